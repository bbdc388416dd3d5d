use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    initial_click, next_click, Click, InteractiveSegmenter, PromptError, SegmenterError,
    SegmenterInput,
};
use crate::metrics::{dice_slice, RoundLog};
use crate::plane::{Frame, MaskSlice};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRound {
    pub round: u32,
    pub click: Click,
    /// Dice of this round's prediction against the ground-truth slice.
    pub dice: f64,
}

/// Record of one simulated click session on a single slice.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceSessionLog {
    pub rounds: Vec<SessionRound>,
    /// Prediction after the last completed round (blank if none completed).
    pub final_mask: MaskSlice,
    /// True when the prediction matched the ground truth before `k` rounds.
    pub stopped_early: bool,
}

impl SliceSessionLog {
    pub fn clicks(&self) -> Vec<Click> {
        self.rounds.iter().map(|r| r.click).collect()
    }

    pub fn final_dice(&self) -> Option<f64> {
        self.rounds.last().map(|r| r.dice)
    }

    /// One point per round.
    pub fn round_log(&self) -> RoundLog {
        RoundLog::from_pairs(&self.rounds.iter().map(|r| (1, r.dice)).collect::<Vec<_>>())
    }
}

#[derive(Debug, Error)]
#[error("click session aborted after {} completed rounds: {cause}", partial.rounds.len())]
pub struct SessionAborted {
    pub partial: SliceSessionLog,
    #[source]
    pub cause: SessionFailure,
}

#[derive(Debug, Error)]
pub enum SessionFailure {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Segmenter(#[from] SegmenterError),
}

/// Runs up to `k_rounds` rounds of simulated clicking on one slice.
///
/// Round 1 clicks the deepest ground-truth pixel; later rounds click the
/// largest error of the latest prediction. The segmenter always receives the
/// cumulative click list. Stops early once the prediction is perfect.
pub fn run_click_session<S: InteractiveSegmenter + ?Sized>(
    frame: &Frame,
    gt: &MaskSlice,
    seg: &mut S,
    k_rounds: u32,
) -> Result<SliceSessionLog, SessionAborted> {
    let mut log = SliceSessionLog {
        rounds: Vec::new(),
        final_mask: MaskSlice::new(gt.height(), gt.width()),
        stopped_early: false,
    };
    let fail = |log: SliceSessionLog, cause: SessionFailure| SessionAborted {
        partial: log,
        cause,
    };

    if k_rounds == 0 {
        return Err(fail(
            log,
            PromptError::Invalid("k_rounds must be >= 1".into()).into(),
        ));
    }
    if let Err(e) = frame.ensure_same_shape(gt) {
        return Err(fail(log, PromptError::from(e).into()));
    }
    seg.reset();
    let mut clicks: Vec<Click> = Vec::new();
    for round in 1..=k_rounds {
        let click = if round == 1 {
            initial_click(gt)
        } else {
            match next_click(&log.final_mask, gt, round) {
                Err(PromptError::NoError) => break,
                other => other,
            }
        };
        let click = match click {
            Ok(c) => c,
            Err(e) => return Err(fail(log, e.into())),
        };
        clicks.push(click);
        let pred = match seg.predict(frame, &SegmenterInput::clicks(&clicks)) {
            Ok(p) => p,
            Err(e) => return Err(fail(log, e.into())),
        };
        let dice = match dice_slice(&pred, gt) {
            Ok(d) => d,
            Err(_) => {
                let e = SegmenterError::Protocol("prediction shape differs from frame".into());
                return Err(fail(log, e.into()));
            }
        };
        log.rounds.push(SessionRound { round, click, dice });
        log.final_mask = pred;
    }
    log.stopped_early = log.rounds.len() < k_rounds as usize;
    Ok(log)
}
