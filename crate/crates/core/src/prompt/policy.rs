use thiserror::Error;

use super::{Click, ClickLabel};
use crate::plane::{MaskSlice, ShapeMismatch};
use crate::volume::{MaskVolume, VolumeError};

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("mask is empty")]
    EmptyMask,
    /// The prediction already equals the ground truth.
    #[error("prediction has no errors")]
    NoError,
    #[error("invalid prompt: {0}")]
    Invalid(String),
    #[error(transparent)]
    Shape(#[from] ShapeMismatch),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

/// Slice with the most ground-truth foreground; the lowest index wins ties.
pub fn select_center_slice(gt: &MaskVolume, axis: usize) -> Result<usize, PromptError> {
    let counts = gt.slice_counts(axis)?;
    let mut best = 0;
    for (i, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = i;
        }
    }
    if counts[best] == 0 {
        return Err(PromptError::EmptyMask);
    }
    Ok(best)
}

/// Foreground click at the deepest point of the ground truth.
pub fn initial_click(gt: &MaskSlice) -> Result<Click, PromptError> {
    let (row, col) = gt.deepest_pixel().ok_or(PromptError::EmptyMask)?;
    Ok(Click {
        row,
        col,
        label: ClickLabel::Foreground,
        round: 1,
    })
}

/// Click at the deepest point of the largest error region.
///
/// Missed pixels (false negatives) and spurious pixels (false positives) are
/// split into separate 4-connected regions so every region has one error
/// type. Equal sizes go to the region holding the smallest `(row, col)`.
pub fn next_click(pred: &MaskSlice, gt: &MaskSlice, round: u32) -> Result<Click, PromptError> {
    pred.ensure_same_shape(gt)?;
    let (h, w) = gt.shape();
    let missed = MaskSlice::from_fn(h, w, |r, c| gt.get(r, c) && !pred.get(r, c));
    let spurious = MaskSlice::from_fn(h, w, |r, c| pred.get(r, c) && !gt.get(r, c));

    let mut regions: Vec<_> = missed
        .components()
        .into_iter()
        .map(|c| (c, ClickLabel::Foreground))
        .chain(
            spurious
                .components()
                .into_iter()
                .map(|c| (c, ClickLabel::Background)),
        )
        .collect();
    regions.sort_by_key(|(c, _)| c.first());

    let mut best: Option<usize> = None;
    for (i, (c, _)) in regions.iter().enumerate() {
        if best.is_none_or(|b| c.len() > regions[b].0.len()) {
            best = Some(i);
        }
    }
    let (component, label) = &regions[best.ok_or(PromptError::NoError)?];
    let (row, col) = component
        .to_mask(h, w)
        .deepest_pixel()
        .expect("components are nonempty");
    Ok(Click {
        row,
        col,
        label: *label,
        round,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::Plane;

    fn disk(h: usize, w: usize, cr: f64, cc: f64, radius: f64) -> MaskSlice {
        Plane::from_fn(h, w, |r, c| {
            (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2) <= radius * radius
        })
    }

    #[test]
    fn center_slice_prefers_lowest_on_ties() {
        let counts = [0usize, 10, 10, 3];
        let gt = MaskVolume::from_fn([4, 4, 4], |x, y, z| y * 4 + x < counts[z]).unwrap();
        assert_eq!(select_center_slice(&gt, 2).unwrap(), 1);
    }

    #[test]
    fn center_slice_of_empty_mask_errors() {
        let gt = MaskVolume::empty([3, 3, 3]).unwrap();
        assert_eq!(select_center_slice(&gt, 2), Err(PromptError::EmptyMask));
    }

    #[test]
    fn initial_click_hits_disk_center() {
        let c = initial_click(&disk(21, 21, 10.0, 10.0, 6.0)).unwrap();
        assert_eq!((c.row, c.col), (10, 10));
        assert!(c.is_foreground());
        assert_eq!(c.round, 1);
    }

    #[test]
    fn initial_click_single_pixel() {
        let mut m = MaskSlice::new(5, 5);
        m.set(3, 1, true);
        let c = initial_click(&m).unwrap();
        assert_eq!((c.row, c.col), (3, 1));
        assert_eq!(
            initial_click(&MaskSlice::new(4, 4)),
            Err(PromptError::EmptyMask)
        );
    }

    #[test]
    fn next_click_on_blank_prediction_matches_initial() {
        let gt = disk(20, 20, 9.0, 11.0, 5.0);
        let c = next_click(&MaskSlice::new(20, 20), &gt, 2).unwrap();
        let i = initial_click(&gt).unwrap();
        assert_eq!(
            (c.row, c.col, c.label),
            (i.row, i.col, ClickLabel::Foreground)
        );
    }

    #[test]
    fn next_click_inside_spurious_blob_is_background() {
        let gt = disk(30, 30, 10.0, 10.0, 5.0);
        let mut pred = gt.clone();
        for r in 20..23 {
            for c in 20..23 {
                pred.set(r, c, true);
            }
        }
        let c = next_click(&pred, &gt, 2).unwrap();
        assert_eq!((c.row, c.col, c.label), (21, 21, ClickLabel::Background));
    }

    #[test]
    fn next_click_without_errors_signals_stop() {
        let gt = disk(10, 10, 5.0, 5.0, 3.0);
        assert_eq!(next_click(&gt, &gt, 2), Err(PromptError::NoError));
    }
}
