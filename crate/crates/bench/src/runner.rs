use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use slicewise_core::metrics::{
    dice, dice_slice, hd95, masked_metrics, nsd, salient_slices, CaseMetrics, MetricError,
};
use slicewise_core::nifti::{load_mask, load_volume};
use slicewise_core::prompt::{run_click_session, select_center_slice};
use slicewise_core::propagation::{propagate, Propagator};
use slicewise_core::volume::to_frames;
use slicewise_core::{MaskVolume, Volume, VoxelGrid, WindowSpec};

use crate::baselines::BaselineData;
use crate::config::{ExperimentConfig, PromptMode};
use crate::manifest::{validate_manifest, CaseManifestEntry};
use crate::report::{CaseReport, CaseStatus, Report, SessionRecord};
use crate::BenchError;

/// Runs every case, `workers` at a time (default: available parallelism).
///
/// Cases are independent: a case that cannot be loaded or evaluated is
/// reported as failed and the rest still run. Fails as a whole only when
/// every case failed, and then still carries the full report.
pub fn run_experiment(
    manifest: &[CaseManifestEntry],
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<Report, BenchError> {
    validate_manifest(manifest)?;
    config.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool
        .build()
        .map_err(|e| BenchError::Config(format!("worker pool: {e}")))?;
    let cases: Vec<CaseReport> =
        pool.install(|| manifest.par_iter().map(|e| run_case(e, config)).collect());
    let report = Report::assemble(config.clone(), cases, &BaselineData::embedded());
    if report.cases.iter().all(|c| c.status == CaseStatus::Failed) {
        return Err(BenchError::AllFailed(Box::new(report)));
    }
    Ok(report)
}

fn run_case(entry: &CaseManifestEntry, config: &ExperimentConfig) -> CaseReport {
    let run = || -> Result<CaseReport, String> {
        let vol = load_volume(&entry.image_path)
            .map_err(|e| format!("image {}: {e}", entry.image_path.display()))?;
        let (_, gt) = load_mask(&entry.label_path)
            .map_err(|e| format!("label {}: {e}", entry.label_path.display()))?;
        if vol.dims() != gt.dims() {
            return Err(format!(
                "image dims {:?} differ from label dims {:?}",
                vol.dims(),
                gt.dims()
            ));
        }
        let window = entry.window_for(vol.modality());
        Ok(evaluate_volumes(
            &entry.case_id,
            &vol,
            &gt,
            entry.axis,
            window,
            config,
        ))
    };
    match catch_unwind(AssertUnwindSafe(run)) {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => CaseReport::failed(&entry.case_id, e),
        Err(_) => CaseReport::failed(
            &entry.case_id,
            "internal error while evaluating case".into(),
        ),
    }
}

/// Evaluates one already loaded case.
pub fn evaluate_volumes(
    case_id: &str,
    vol: &Volume,
    gt: &MaskVolume,
    axis: usize,
    window: WindowSpec,
    config: &ExperimentConfig,
) -> CaseReport {
    let fail = |msg: String| CaseReport::failed(case_id, msg);
    let stack = match to_frames(vol, axis, window) {
        Ok(s) => s,
        Err(e) => return fail(format!("framing: {e}")),
    };
    let center = match select_center_slice(gt, axis) {
        Ok(c) => c,
        Err(e) => return fail(format!("center slice: {e}")),
    };
    let gt_center = match gt.slice(axis, center) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string()),
    };

    let (prompt, session, round_log, rounds_used) = match config.mode {
        PromptMode::GtMask => (gt_center.clone(), None, None, 0),
        PromptMode::Clicks(k) => {
            let mut seg = config.make_segmenter();
            match run_click_session(&stack.frames[center], &gt_center, &mut seg, k) {
                Ok(log) => {
                    let record = SessionRecord {
                        rounds: log.rounds.clone(),
                        stopped_early: log.stopped_early,
                    };
                    let used = log.rounds.len() as u32;
                    (
                        log.final_mask.clone(),
                        Some(record),
                        Some(log.round_log()),
                        used,
                    )
                }
                Err(e) => return fail(format!("click session: {e}")),
            }
        }
    };

    let factory = || -> Box<dyn Propagator> { config.make_propagator() };
    let result = match propagate(&stack, &prompt, center, &factory) {
        Ok(r) => r,
        Err(e) => return fail(format!("propagation: {e}")),
    };
    let (status, error) = if result.is_complete() {
        (CaseStatus::Ok, None)
    } else {
        let msgs: Vec<String> = result
            .failures
            .iter()
            .map(|f| {
                format!(
                    "{:?} pass stopped at slice {}: {}",
                    f.direction, f.at_index, f.error
                )
            })
            .collect();
        (CaseStatus::Partial, Some(msgs.join("; ")))
    };

    let pred = &result.mask;
    let spacing = vol.spacing();
    let scores = (|| -> Result<_, MetricError> {
        let d = dice(pred, gt)?;
        let n = nsd(pred, gt, spacing, config.nsd_delta)?;
        let h = match hd95(pred, gt, spacing) {
            Ok(h) => Some(h),
            Err(MetricError::Undefined(_)) => None,
            Err(e) => return Err(e),
        };
        let center_dice = dice_slice(&pred.slice(axis, center)?, &gt_center)?;
        Ok((d, n, h, center_dice))
    })();
    let (d, n, h, center_dice) = match scores {
        Ok(s) => s,
        Err(e) => return fail(format!("metrics: {e}")),
    };

    let (mut salient_dice, mut salient_nsd, mut salient_count, mut fallback) =
        (None, None, None, false);
    if config.salient_filter {
        let idx = match salient_slices(gt, axis, config.salient_threshold) {
            Ok(i) => i,
            Err(e) => return fail(format!("salient filter: {e}")),
        };
        salient_count = Some(idx.len());
        if idx.is_empty() {
            fallback = true;
            salient_dice = Some(d);
            salient_nsd = Some(n);
        } else {
            match masked_metrics(pred, gt, axis, &idx, spacing, config.nsd_delta) {
                Ok(s) => {
                    salient_dice = Some(s.dice);
                    salient_nsd = Some(s.nsd);
                }
                Err(e) => return fail(format!("salient metrics: {e}")),
            }
        }
    }

    CaseReport {
        case_id: case_id.to_string(),
        status,
        error,
        center_slice: Some(center),
        metrics: Some(CaseMetrics {
            case_id: case_id.to_string(),
            dice: d,
            nsd: n,
            hd95: h,
            salient_dice,
            salient_nsd,
        }),
        center_dice: Some(center_dice),
        salient_slice_count: salient_count,
        salient_fallback: fallback,
        session,
        round_log,
        rounds_used: Some(rounds_used),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use slicewise_core::volume::{make_phantom, PhantomSpec};

    fn phantom(seed: u64) -> (Volume, MaskVolume) {
        make_phantom(&PhantomSpec::centered([32, 32, 24], seed)).unwrap()
    }

    #[test]
    fn gt_mask_mode_on_small_phantom() {
        let (v, gt) = phantom(1);
        let cfg = ExperimentConfig::new(PromptMode::GtMask);
        let r = evaluate_volumes("p", &v, &gt, 2, WindowSpec::MR_DEFAULT, &cfg);
        assert_eq!(r.status, CaseStatus::Ok, "{:?}", r.error);
        assert_eq!(r.center_dice, Some(1.0));
        assert!(r.metrics.unwrap().dice > 0.8);
        assert_eq!(r.rounds_used, Some(0));
    }

    #[test]
    fn clicks_mode_center_dice_matches_session() {
        let (v, gt) = phantom(2);
        let cfg = ExperimentConfig::new(PromptMode::Clicks(3));
        let r = evaluate_volumes("p", &v, &gt, 2, WindowSpec::MR_DEFAULT, &cfg);
        assert_eq!(r.status, CaseStatus::Ok, "{:?}", r.error);
        let s = r.session.unwrap();
        assert!(!s.rounds.is_empty() && s.rounds.len() <= 3);
        assert_eq!(r.center_dice, Some(s.rounds.last().unwrap().dice));
        assert_eq!(r.round_log.unwrap().rounds.len(), s.rounds.len());
    }

    #[test]
    fn no_salient_slice_falls_back_to_unfiltered() {
        let (v, gt) = phantom(3);
        let mut cfg = ExperimentConfig::new(PromptMode::GtMask);
        cfg.salient_threshold = 100_000;
        let r = evaluate_volumes("p", &v, &gt, 2, WindowSpec::MR_DEFAULT, &cfg);
        let m = r.metrics.unwrap();
        assert!(r.salient_fallback);
        assert_eq!(m.salient_dice, Some(m.dice));
        assert_eq!(r.salient_slice_count, Some(0));
    }

    #[test]
    fn empty_ground_truth_fails_the_case_only() {
        let (v, _) = phantom(4);
        let gt = MaskVolume::empty(v.dims()).unwrap();
        let r = evaluate_volumes(
            "p",
            &v,
            &gt,
            2,
            WindowSpec::MR_DEFAULT,
            &ExperimentConfig::new(PromptMode::GtMask),
        );
        assert_eq!(r.status, CaseStatus::Failed);
        assert!(r.error.unwrap().contains("center slice"));
    }
}
