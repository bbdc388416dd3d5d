//! Overlap and surface-distance metrics.
//!
//! Surfaces are foreground voxels with at least one 6-connected neighbor that
//! is background or outside the grid. Surface-to-surface distances are exact
//! Euclidean distances in millimeters, computed with a distance transform of
//! the other mask's surface voxels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edt;
use crate::plane::{MaskSlice, ShapeMismatch};
use crate::volume::{nearest_rank, voxel_index, Dims, MaskVolume, VolumeError, VoxelGrid};

/// Surface tolerance used when nothing else is configured, in millimeters.
pub const DEFAULT_NSD_TOLERANCE_MM: f64 = 1.0;
/// Slices must have strictly more ground-truth pixels than this to be salient.
pub const DEFAULT_SALIENT_THRESHOLD: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error(transparent)]
    Shape(#[from] ShapeMismatch),
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

/// Surface distance tolerance in millimeters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Tolerance(f64);

impl Tolerance {
    pub fn new(mm: f64) -> Result<Self, MetricError> {
        if !mm.is_finite() || mm < 0.0 {
            return Err(MetricError::Contract(format!(
                "tolerance must be finite and >= 0, got {mm}"
            )));
        }
        Ok(Self(mm))
    }

    pub fn mm(self) -> f64 {
        self.0
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self(DEFAULT_NSD_TOLERANCE_MM)
    }
}

impl TryFrom<f64> for Tolerance {
    type Error = MetricError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<Tolerance> for f64 {
    fn from(t: Tolerance) -> f64 {
        t.0
    }
}

fn overlap_dice(x: &[bool], y: &[bool]) -> f64 {
    let mut inter = 0usize;
    let mut total = 0usize;
    for (&a, &b) in x.iter().zip(y) {
        inter += (a && b) as usize;
        total += a as usize + b as usize;
    }
    if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    }
}

/// `2|X∩Y| / (|X|+|Y|)`; two empty masks score 1.
pub fn dice(x: &MaskVolume, y: &MaskVolume) -> Result<f64, MetricError> {
    x.ensure_same_dims(y.dims())
        .map_err(|_| ShapeMismatch::new(&x.dims(), &y.dims()))?;
    Ok(overlap_dice(x.data(), y.data()))
}

pub fn dice_slice(x: &MaskSlice, y: &MaskSlice) -> Result<f64, MetricError> {
    x.ensure_same_shape(y)?;
    Ok(overlap_dice(x.as_slice(), y.as_slice()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfacePointSet {
    /// Voxel coordinates of the surface, in storage order.
    pub voxels: Vec<[usize; 3]>,
    /// The same points scaled by spacing (millimeters).
    pub points: Vec<[f64; 3]>,
    pub source_dims: Dims,
}

impl SurfacePointSet {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    fn seed_grid(&self) -> Vec<bool> {
        let mut seeds = vec![false; self.source_dims.iter().product()];
        for v in &self.voxels {
            seeds[voxel_index(self.source_dims, v[0], v[1], v[2])] = true;
        }
        seeds
    }
}

fn is_surface(m: &MaskVolume, x: usize, y: usize, z: usize) -> bool {
    let d = m.dims();
    if !m.get(x, y, z) {
        return false;
    }
    x == 0
        || y == 0
        || z == 0
        || x + 1 == d[0]
        || y + 1 == d[1]
        || z + 1 == d[2]
        || !m.get(x - 1, y, z)
        || !m.get(x + 1, y, z)
        || !m.get(x, y - 1, z)
        || !m.get(x, y + 1, z)
        || !m.get(x, y, z - 1)
        || !m.get(x, y, z + 1)
}

pub fn extract_surface(m: &MaskVolume, spacing: [f64; 3]) -> SurfacePointSet {
    let d = m.dims();
    let mut voxels = Vec::new();
    for z in 0..d[2] {
        for y in 0..d[1] {
            for x in 0..d[0] {
                if is_surface(m, x, y, z) {
                    voxels.push([x, y, z]);
                }
            }
        }
    }
    let points = voxels
        .iter()
        .map(|v| {
            [
                v[0] as f64 * spacing[0],
                v[1] as f64 * spacing[1],
                v[2] as f64 * spacing[2],
            ]
        })
        .collect();
    SurfacePointSet {
        voxels,
        points,
        source_dims: d,
    }
}

/// For every point of `from`, the distance to the nearest point of `to`.
/// Infinite when `to` is empty.
pub fn directed_distances(
    from: &SurfacePointSet,
    to: &SurfacePointSet,
    spacing: [f64; 3],
) -> Vec<f64> {
    if from.is_empty() {
        return Vec::new();
    }
    if to.is_empty() {
        return vec![f64::INFINITY; from.len()];
    }
    let field = edt::squared_distance_to_seeds(&to.source_dims, &spacing, &to.seed_grid());
    from.voxels
        .iter()
        .map(|v| field[voxel_index(from.source_dims, v[0], v[1], v[2])].sqrt())
        .collect()
}

fn surfaces(
    x: &MaskVolume,
    y: &MaskVolume,
    spacing: [f64; 3],
) -> Result<(SurfacePointSet, SurfacePointSet), MetricError> {
    if x.dims() != y.dims() {
        return Err(ShapeMismatch::new(&x.dims(), &y.dims()).into());
    }
    Ok((extract_surface(x, spacing), extract_surface(y, spacing)))
}

/// Normalized surface dice: the share of both surfaces lying within `tol`
/// of the other surface. Both empty scores 1, exactly one empty scores 0.
pub fn nsd(
    x: &MaskVolume,
    y: &MaskVolume,
    spacing: [f64; 3],
    tol: Tolerance,
) -> Result<f64, MetricError> {
    let (sx, sy) = surfaces(x, y, spacing)?;
    Ok(nsd_from_surfaces(&sx, &sy, spacing, tol))
}

fn nsd_from_surfaces(
    sx: &SurfacePointSet,
    sy: &SurfacePointSet,
    spacing: [f64; 3],
    tol: Tolerance,
) -> f64 {
    match (sx.is_empty(), sy.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let within = |ds: Vec<f64>| ds.into_iter().filter(|&d| d <= tol.mm()).count();
    let hits =
        within(directed_distances(sx, sy, spacing)) + within(directed_distances(sy, sx, spacing));
    hits as f64 / (sx.len() + sy.len()) as f64
}

/// 95th percentile (nearest rank) of the pooled directed surface distances.
pub fn hd95(x: &MaskVolume, y: &MaskVolume, spacing: [f64; 3]) -> Result<f64, MetricError> {
    let (sx, sy) = surfaces(x, y, spacing)?;
    if sx.is_empty() || sy.is_empty() {
        return Err(MetricError::Undefined(
            "hd95 needs two nonempty masks".into(),
        ));
    }
    let mut pooled = directed_distances(&sx, &sy, spacing);
    pooled.extend(directed_distances(&sy, &sx, spacing));
    pooled.sort_unstable_by(f64::total_cmp);
    Ok(nearest_rank(&pooled, 95.0))
}

/// Slices along `axis` whose ground-truth count is strictly above `threshold`.
pub fn salient_slices(
    gt: &MaskVolume,
    axis: usize,
    threshold: usize,
) -> Result<Vec<usize>, MetricError> {
    Ok(gt
        .slice_counts(axis)?
        .into_iter()
        .enumerate()
        .filter(|&(_, n)| n > threshold)
        .map(|(i, _)| i)
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapScores {
    pub dice: f64,
    pub nsd: f64,
}

/// Dice and NSD on the sub-volume made by stacking only `indices` along
/// `axis`. Surfaces are re-extracted on that sub-volume.
pub fn masked_metrics(
    pred: &MaskVolume,
    gt: &MaskVolume,
    axis: usize,
    indices: &[usize],
    spacing: [f64; 3],
    tol: Tolerance,
) -> Result<OverlapScores, MetricError> {
    if indices.is_empty() {
        return Err(MetricError::Undefined("no slices selected".into()));
    }
    pred.ensure_same_dims(gt.dims())
        .map_err(|_| ShapeMismatch::new(&gt.dims(), &pred.dims()))?;
    let stack = |m: &MaskVolume| -> Result<MaskVolume, MetricError> {
        let planes = indices
            .iter()
            .map(|&i| m.slice(axis, i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MaskVolume::from_slices(axis, &planes)?)
    };
    let (p, g) = (stack(pred)?, stack(gt)?);
    Ok(OverlapScores {
        dice: dice(&p, &g)?,
        nsd: nsd(&p, &g, spacing, tol)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundEntry {
    pub points_added: u32,
    pub dice_after: f64,
}

/// Per-round interaction record: how many points each round added and the
/// dice reached afterwards.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub rounds: Vec<RoundEntry>,
}

impl RoundLog {
    pub fn from_pairs(pairs: &[(u32, f64)]) -> Self {
        Self {
            rounds: pairs
                .iter()
                .map(|&(points_added, dice_after)| RoundEntry {
                    points_added,
                    dice_after,
                })
                .collect(),
        }
    }
}

/// Dice gained per added point in each round. The first round is measured
/// against `baseline_dice`. Negative growth is kept as is.
pub fn dice_growth_per_point(log: &RoundLog, baseline_dice: f64) -> Result<Vec<f64>, MetricError> {
    let mut prev = baseline_dice;
    let mut out = Vec::with_capacity(log.rounds.len());
    for (i, r) in log.rounds.iter().enumerate() {
        if r.points_added == 0 {
            return Err(MetricError::Contract(format!(
                "round {} added no points",
                i + 1
            )));
        }
        out.push((r.dice_after - prev) / r.points_added as f64);
        prev = r.dice_after;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub case_id: String,
    pub dice: f64,
    pub nsd: f64,
    /// `None` when either mask is empty.
    pub hd95: Option<f64>,
    pub salient_dice: Option<f64>,
    pub salient_nsd: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Stat {
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub dice: Stat,
    pub nsd: Stat,
    pub hd95: Option<Stat>,
    /// Cases left out of the hd95 statistics because it was undefined.
    pub hd95_excluded: usize,
    pub salient_dice: Option<Stat>,
    pub salient_nsd: Option<Stat>,
}

pub fn aggregate(cases: &[CaseMetrics]) -> Result<Summary, MetricError> {
    if cases.is_empty() {
        return Err(MetricError::Contract("cannot aggregate zero cases".into()));
    }
    let collect =
        |f: &dyn Fn(&CaseMetrics) -> Option<f64>| cases.iter().filter_map(f).collect::<Vec<_>>();
    let dice = collect(&|c| Some(c.dice));
    let nsd = collect(&|c| Some(c.nsd));
    let hd = collect(&|c| c.hd95);
    Ok(Summary {
        count: cases.len(),
        dice: Stat::of(&dice).unwrap(),
        nsd: Stat::of(&nsd).unwrap(),
        hd95: Stat::of(&hd),
        hd95_excluded: cases.len() - hd.len(),
        salient_dice: Stat::of(&collect(&|c| c.salient_dice)),
        salient_nsd: Stat::of(&collect(&|c| c.salient_nsd)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::Plane;

    fn cube(dims: Dims, lo: [usize; 3], hi: [usize; 3]) -> MaskVolume {
        MaskVolume::from_fn(dims, |x, y, z| {
            (lo[0]..hi[0]).contains(&x)
                && (lo[1]..hi[1]).contains(&y)
                && (lo[2]..hi[2]).contains(&z)
        })
        .unwrap()
    }

    fn one_voxel(dims: Dims, p: [usize; 3]) -> MaskVolume {
        let mut m = MaskVolume::empty(dims).unwrap();
        m.set(p[0], p[1], p[2], true);
        m
    }

    #[test]
    fn dice_basics() {
        let a = cube([8, 8, 8], [1, 1, 1], [4, 4, 4]);
        let b = cube([8, 8, 8], [5, 5, 5], [7, 7, 7]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        let e = MaskVolume::empty([8, 8, 8]).unwrap();
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        let other = MaskVolume::empty([8, 8, 7]).unwrap();
        assert!(matches!(dice(&a, &other), Err(MetricError::Shape(_))));
    }

    #[test]
    fn dice_of_shifted_block() {
        let block = |c0: usize| {
            Plane::from_fn(16, 16, |r, c| {
                (4..8).contains(&r) && (c0..c0 + 4).contains(&c)
            })
        };
        let d = dice_slice(&block(4), &block(6)).unwrap();
        assert_eq!(d, 0.5);
    }

    #[test]
    fn surface_counts() {
        assert_eq!(
            extract_surface(&one_voxel([3, 3, 3], [1, 1, 1]), [1.0; 3]).len(),
            1
        );
        assert_eq!(
            extract_surface(&cube([8, 8, 8], [2, 2, 2], [6, 6, 6]), [1.0; 3]).len(),
            56
        );
        let full = cube([4, 5, 6], [0, 0, 0], [4, 5, 6]);
        assert_eq!(
            extract_surface(&full, [1.0; 3]).len(),
            4 * 5 * 6 - 2 * 3 * 4
        );
        assert!(extract_surface(&MaskVolume::empty([3, 3, 3]).unwrap(), [1.0; 3]).is_empty());
    }

    #[test]
    fn surface_points_are_scaled() {
        let s = extract_surface(&one_voxel([4, 4, 4], [1, 2, 3]), [0.5, 2.0, 3.0]);
        assert_eq!(s.points, vec![[0.5, 4.0, 9.0]]);
    }

    #[test]
    fn nsd_conventions() {
        let a = cube([8, 8, 8], [2, 2, 2], [5, 5, 5]);
        let e = MaskVolume::empty([8, 8, 8]).unwrap();
        let t = Tolerance::new(1.0).unwrap();
        assert_eq!(
            nsd(&a, &a, [1.0; 3], Tolerance::new(0.0).unwrap()).unwrap(),
            1.0
        );
        assert_eq!(nsd(&e, &e, [1.0; 3], t).unwrap(), 1.0);
        assert_eq!(nsd(&a, &e, [1.0; 3], t).unwrap(), 0.0);
        assert_eq!(nsd(&e, &a, [1.0; 3], t).unwrap(), 0.0);
    }

    #[test]
    fn nsd_two_voxels_two_mm_apart() {
        let a = one_voxel([5, 5, 5], [1, 2, 2]);
        let b = one_voxel([5, 5, 5], [3, 2, 2]);
        assert_eq!(
            nsd(&a, &b, [1.0; 3], Tolerance::new(1.0).unwrap()).unwrap(),
            0.0
        );
        assert_eq!(
            nsd(&a, &b, [1.0; 3], Tolerance::new(2.0).unwrap()).unwrap(),
            1.0
        );
    }

    #[test]
    fn hd95_single_voxels() {
        let a = one_voxel([6, 6, 6], [0, 1, 1]);
        let b = one_voxel([6, 6, 6], [3, 1, 1]);
        assert_eq!(hd95(&a, &b, [1.0; 3]).unwrap(), 3.0);
        assert_eq!(hd95(&a, &a, [1.0; 3]).unwrap(), 0.0);
        let e = MaskVolume::empty([6, 6, 6]).unwrap();
        assert!(matches!(
            hd95(&a, &e, [1.0; 3]),
            Err(MetricError::Undefined(_))
        ));
    }

    #[test]
    fn hd95_scales_with_spacing() {
        let a = cube([10, 10, 10], [2, 2, 2], [5, 6, 5]);
        let b = cube([10, 10, 10], [3, 2, 3], [8, 7, 6]);
        let base = hd95(&a, &b, [1.0, 0.5, 2.0]).unwrap();
        let scaled = hd95(&a, &b, [2.0, 1.0, 4.0]).unwrap();
        assert_eq!(scaled, 2.0 * base);
    }

    #[test]
    fn tolerance_rejects_negative() {
        assert!(Tolerance::new(-0.1).is_err());
        assert!(Tolerance::new(f64::NAN).is_err());
        assert!(serde_json::from_str::<Tolerance>("-1.0").is_err());
        assert_eq!(serde_json::from_str::<Tolerance>("2.5").unwrap().mm(), 2.5);
    }

    fn slab_with_counts(counts: &[usize]) -> MaskVolume {
        // 32x32 in-plane, slice z has `counts[z]` foreground pixels in scan order
        let dims = [32, 32, counts.len()];
        MaskVolume::from_fn(dims, |x, y, z| y * 32 + x < counts[z]).unwrap()
    }

    #[test]
    fn salient_boundary_is_strict() {
        let gt = slab_with_counts(&[0, 256, 257, 300, 10]);
        assert_eq!(salient_slices(&gt, 2, 256).unwrap(), vec![2, 3]);
        assert_eq!(salient_slices(&gt, 2, 0).unwrap(), vec![1, 2, 3, 4]);
        let empty = MaskVolume::empty([4, 4, 4]).unwrap();
        assert!(salient_slices(&empty, 2, 256).unwrap().is_empty());
    }

    #[test]
    fn masked_metrics_on_all_slices_equals_unfiltered() {
        let gt = cube([8, 8, 6], [2, 2, 1], [6, 6, 5]);
        let pred = cube([8, 8, 6], [3, 2, 1], [7, 6, 4]);
        let t = Tolerance::default();
        let all: Vec<usize> = (0..6).collect();
        let m = masked_metrics(&pred, &gt, 2, &all, [1.0; 3], t).unwrap();
        assert_eq!(m.dice, dice(&pred, &gt).unwrap());
        assert_eq!(m.nsd, nsd(&pred, &gt, [1.0; 3], t).unwrap());
        assert!(matches!(
            masked_metrics(&pred, &gt, 2, &[], [1.0; 3], t),
            Err(MetricError::Undefined(_))
        ));
    }

    #[test]
    fn masked_metrics_perfect_on_selected_slices() {
        let gt = cube([8, 8, 6], [2, 2, 0], [6, 6, 6]);
        let mut pred = gt.clone();
        for y in 0..8 {
            for x in 0..8 {
                pred.set(x, y, 0, false);
                pred.set(x, y, 5, true);
            }
        }
        let m =
            masked_metrics(&pred, &gt, 2, &[1, 2, 3, 4], [1.0; 3], Tolerance::default()).unwrap();
        assert_eq!(m.dice, 1.0);
        assert_eq!(m.nsd, 1.0);
        assert!(dice(&pred, &gt).unwrap() < 1.0);
    }

    #[test]
    fn growth_arithmetic() {
        let log = RoundLog::from_pairs(&[(25, 0.60), (5, 0.70)]);
        let g = dice_growth_per_point(&log, 0.0).unwrap();
        assert!((g[0] - 0.024).abs() < 1e-15);
        assert!((g[1] - 0.02).abs() < 1e-15);
        let g = dice_growth_per_point(&RoundLog::from_pairs(&[(1, 0.55)]), 0.50).unwrap();
        assert!((g[0] - 0.05).abs() < 1e-15);
        let g = dice_growth_per_point(&RoundLog::from_pairs(&[(5, 0.65)]), 0.70).unwrap();
        assert!((g[0] + 0.01).abs() < 1e-15);
        assert!(dice_growth_per_point(&RoundLog::from_pairs(&[(0, 0.5)]), 0.0).is_err());
    }

    fn case(id: &str, dice: f64, hd: Option<f64>) -> CaseMetrics {
        CaseMetrics {
            case_id: id.into(),
            dice,
            nsd: dice,
            hd95: hd,
            salient_dice: None,
            salient_nsd: None,
        }
    }

    #[test]
    fn aggregate_statistics() {
        let s = aggregate(&[case("a", 0.7, Some(2.0))]).unwrap();
        assert_eq!(s.dice.mean, 0.7);
        assert_eq!(s.dice.std, 0.0);
        let s = aggregate(&[
            case("a", 0.8, Some(1.0)),
            case("b", 1.0, None),
            case("c", 1.0, Some(3.0)),
        ])
        .unwrap();
        assert_eq!(s.hd95.unwrap().mean, 2.0);
        assert_eq!(s.hd95.unwrap().count, 2);
        assert_eq!(s.hd95_excluded, 1);
        let s = aggregate(&[case("a", 0.8, None), case("b", 1.0, None)]).unwrap();
        assert!((s.dice.mean - 0.9).abs() < 1e-15);
        assert!((s.dice.std - 0.1).abs() < 1e-15);
        assert!(s.hd95.is_none());
        assert!(aggregate(&[]).is_err());
    }
}
