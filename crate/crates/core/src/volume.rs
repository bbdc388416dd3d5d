//! Scalar volumes, binary mask volumes, and their conversion to frame stacks.
//!
//! Voxels are stored with axis 0 varying fastest, matching the on-disk NIfTI
//! order: voxel `(x, y, z)` lives at `x + nx * (y + ny * z)`.
//!
//! Slicing convention: a slice taken along `axis` is a plane whose rows run
//! along axis `(axis + 2) % 3` and whose columns run along `(axis + 1) % 3`,
//! both ascending. For the default axis 2 this gives rows = y, columns = x.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plane::{Frame, MaskSlice, Plane, ShapeMismatch};

pub type Dims = [usize; 3];
pub type Affine = [[f64; 4]; 4];

/// Propagation axis used when nothing else is configured.
pub const DEFAULT_AXIS: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum VolumeError {
    #[error("dims must all be >= 1, got {0:?}")]
    InvalidDims(Dims),
    #[error("spacing must be finite and > 0, got {0:?}")]
    InvalidSpacing([f64; 3]),
    #[error("data length {actual} does not match dims product {expected}")]
    DataLength { expected: usize, actual: usize },
    #[error("affine rotation/scale block is singular")]
    SingularAffine,
    #[error("axis {0} is not one of 0, 1, 2")]
    InvalidAxis(usize),
    #[error("slice index {index} out of range for axis {axis} with {len} slices")]
    SliceOutOfRange {
        axis: usize,
        index: usize,
        len: usize,
    },
    #[error(transparent)]
    Shape(#[from] ShapeMismatch),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("invalid phantom: {0}")]
    InvalidPhantom(String),
}

#[inline]
pub fn voxel_index(dims: Dims, x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

/// `(row_axis, col_axis)` for slices taken along `axis`.
#[inline]
pub fn plane_axes(axis: usize) -> (usize, usize) {
    ((axis + 2) % 3, (axis + 1) % 3)
}

fn check_axis(axis: usize) -> Result<(), VolumeError> {
    if axis > 2 {
        return Err(VolumeError::InvalidAxis(axis));
    }
    Ok(())
}

fn check_dims(dims: Dims) -> Result<(), VolumeError> {
    if dims.contains(&0) {
        return Err(VolumeError::InvalidDims(dims));
    }
    Ok(())
}

pub fn diagonal_affine(spacing: [f64; 3]) -> Affine {
    let mut a = [[0.0; 4]; 4];
    for i in 0..3 {
        a[i][i] = spacing[i];
    }
    a[3][3] = 1.0;
    a
}

fn det3(a: &Affine) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Anything laid out as a 3D voxel grid.
pub trait VoxelGrid {
    type Voxel: Copy;
    fn dims(&self) -> Dims;
    fn voxels(&self) -> &[Self::Voxel];
}

/// Extracts one plane. See the module docs for the orientation convention.
pub fn slice_of<G: VoxelGrid>(
    grid: &G,
    axis: usize,
    index: usize,
) -> Result<Plane<G::Voxel>, VolumeError> {
    check_axis(axis)?;
    let dims = grid.dims();
    if index >= dims[axis] {
        return Err(VolumeError::SliceOutOfRange {
            axis,
            index,
            len: dims[axis],
        });
    }
    let (ra, ca) = plane_axes(axis);
    let voxels = grid.voxels();
    let mut pos = [0usize; 3];
    pos[axis] = index;
    Ok(Plane::from_fn(dims[ra], dims[ca], |r, c| {
        let mut p = pos;
        p[ra] = r;
        p[ca] = c;
        voxels[voxel_index(dims, p[0], p[1], p[2])]
    }))
}

/// Number of slices along `axis`.
pub fn slice_count<G: VoxelGrid>(grid: &G, axis: usize) -> Result<usize, VolumeError> {
    check_axis(axis)?;
    Ok(grid.dims()[axis])
}

#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    dims: Dims,
    spacing: [f64; 3],
    data: Vec<f64>,
    modality: String,
    affine: Affine,
}

impl Volume {
    /// Volume with a diagonal voxel-to-world affine built from `spacing`.
    pub fn new(dims: Dims, spacing: [f64; 3], data: Vec<f64>) -> Result<Self, VolumeError> {
        Self::with_affine(dims, spacing, data, diagonal_affine(spacing))
    }

    pub fn with_affine(
        dims: Dims,
        spacing: [f64; 3],
        data: Vec<f64>,
        affine: Affine,
    ) -> Result<Self, VolumeError> {
        check_dims(dims)?;
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(VolumeError::InvalidSpacing(spacing));
        }
        let expected = dims.iter().product();
        if data.len() != expected {
            return Err(VolumeError::DataLength {
                expected,
                actual: data.len(),
            });
        }
        let det = det3(&affine);
        if det == 0.0 || !det.is_finite() {
            return Err(VolumeError::SingularAffine);
        }
        Ok(Self {
            dims,
            spacing,
            data,
            modality: String::new(),
            affine,
        })
    }

    pub fn with_modality(mut self, tag: impl Into<String>) -> Self {
        self.modality = tag.into();
        self
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn modality(&self) -> &str {
        &self.modality
    }

    pub fn affine(&self) -> &Affine {
        &self.affine
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[voxel_index(self.dims, x, y, z)]
    }
}

impl VoxelGrid for Volume {
    type Voxel = f64;
    fn dims(&self) -> Dims {
        self.dims
    }
    fn voxels(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskVolume {
    dims: Dims,
    data: Vec<bool>,
}

impl MaskVolume {
    pub fn empty(dims: Dims) -> Result<Self, VolumeError> {
        check_dims(dims)?;
        Ok(Self {
            dims,
            data: vec![false; dims.iter().product()],
        })
    }

    pub fn from_vec(dims: Dims, data: Vec<bool>) -> Result<Self, VolumeError> {
        check_dims(dims)?;
        let expected = dims.iter().product();
        if data.len() != expected {
            return Err(VolumeError::DataLength {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(
        dims: Dims,
        mut f: impl FnMut(usize, usize, usize) -> bool,
    ) -> Result<Self, VolumeError> {
        check_dims(dims)?;
        let mut data = Vec::with_capacity(dims.iter().product());
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Ok(Self { dims, data })
    }

    /// Stacks planes along `axis`; inverse of taking every [`slice_of`].
    pub fn from_slices(axis: usize, slices: &[MaskSlice]) -> Result<Self, VolumeError> {
        check_axis(axis)?;
        let first = slices.first().ok_or(VolumeError::InvalidDims([0, 0, 0]))?;
        let (ra, ca) = plane_axes(axis);
        let mut dims = [0; 3];
        dims[axis] = slices.len();
        dims[ra] = first.height();
        dims[ca] = first.width();
        let mut vol = Self::empty(dims)?;
        for (i, s) in slices.iter().enumerate() {
            vol.set_slice(axis, i, s)?;
        }
        Ok(vol)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[voxel_index(self.dims, x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = voxel_index(self.dims, x, y, z);
        self.data[i] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_blank(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn slice(&self, axis: usize, index: usize) -> Result<MaskSlice, VolumeError> {
        slice_of(self, axis, index)
    }

    /// Foreground count of every slice along `axis`.
    pub fn slice_counts(&self, axis: usize) -> Result<Vec<usize>, VolumeError> {
        check_axis(axis)?;
        let mut counts = vec![0; self.dims[axis]];
        for z in 0..self.dims[2] {
            for y in 0..self.dims[1] {
                for x in 0..self.dims[0] {
                    if self.get(x, y, z) {
                        counts[[x, y, z][axis]] += 1;
                    }
                }
            }
        }
        Ok(counts)
    }

    pub fn set_slice(
        &mut self,
        axis: usize,
        index: usize,
        plane: &MaskSlice,
    ) -> Result<(), VolumeError> {
        check_axis(axis)?;
        if index >= self.dims[axis] {
            return Err(VolumeError::SliceOutOfRange {
                axis,
                index,
                len: self.dims[axis],
            });
        }
        let (ra, ca) = plane_axes(axis);
        if plane.shape() != (self.dims[ra], self.dims[ca]) {
            return Err(ShapeMismatch::new(
                &[self.dims[ra], self.dims[ca]],
                &[plane.height(), plane.width()],
            )
            .into());
        }
        let mut p = [0usize; 3];
        p[axis] = index;
        for r in 0..plane.height() {
            for c in 0..plane.width() {
                p[ra] = r;
                p[ca] = c;
                self.set(p[0], p[1], p[2], plane.get(r, c));
            }
        }
        Ok(())
    }

    pub fn ensure_same_dims(&self, other_dims: Dims) -> Result<(), VolumeError> {
        if self.dims != other_dims {
            return Err(ShapeMismatch::new(&other_dims, &self.dims).into());
        }
        Ok(())
    }
}

impl VoxelGrid for MaskVolume {
    type Voxel = bool;
    fn dims(&self) -> Dims {
        self.dims
    }
    fn voxels(&self) -> &[bool] {
        &self.data
    }
}

/// Intensity window mapping raw voxels to 8-bit pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum WindowSpec {
    /// Clip to the nearest-rank percentiles `lo`..`hi` (0 to 100) of the whole volume.
    Percentile { lo: f64, hi: f64 },
    /// Clip to `center ± width / 2` in raw units.
    Hounsfield { center: f64, width: f64 },
}

impl WindowSpec {
    pub const MR_DEFAULT: WindowSpec = WindowSpec::Percentile { lo: 0.5, hi: 99.5 };
    pub const CT_DEFAULT: WindowSpec = WindowSpec::Hounsfield {
        center: 40.0,
        width: 400.0,
    };

    /// Preset chosen from a modality tag: CT gets the soft-tissue window,
    /// everything else the MR percentile clip.
    pub fn for_modality(tag: &str) -> WindowSpec {
        if tag.to_ascii_uppercase().starts_with("CT") {
            Self::CT_DEFAULT
        } else {
            Self::MR_DEFAULT
        }
    }

    pub fn validate(&self) -> Result<(), VolumeError> {
        match *self {
            WindowSpec::Percentile { lo, hi } => {
                if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) {
                    return Err(VolumeError::InvalidWindow(format!(
                        "percentiles {lo}, {hi} outside [0, 100]"
                    )));
                }
                if lo >= hi {
                    return Err(VolumeError::InvalidWindow(format!(
                        "lo {lo} must be below hi {hi}"
                    )));
                }
            }
            WindowSpec::Hounsfield { center, width } => {
                if !center.is_finite() || !width.is_finite() || width <= 0.0 {
                    return Err(VolumeError::InvalidWindow(format!(
                        "center {center}, width {width}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Nearest-rank percentile of already sorted values: the smallest value with
/// at least `p` percent of the data at or below it.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Slices of a volume as 8-bit frames, in slice-index order.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameStack {
    pub axis: usize,
    pub frames: Vec<Frame>,
    pub source_dims: Dims,
    pub window: WindowSpec,
    /// Set when the window collapsed to a single value and every frame is zero.
    pub degenerate: bool,
}

impl FrameStack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(height, width)` shared by every frame.
    pub fn frame_shape(&self) -> (usize, usize) {
        let (ra, ca) = plane_axes(self.axis);
        (self.source_dims[ra], self.source_dims[ca])
    }
}

/// Windows the whole volume once, then cuts it into frames along `axis`.
///
/// Pixels are `floor((v - lo) / (hi - lo) * 255 + 0.5)` after clipping to
/// `[lo, hi]`. A constant volume or a collapsed window gives all-zero frames
/// with [`FrameStack::degenerate`] set.
pub fn to_frames(vol: &Volume, axis: usize, window: WindowSpec) -> Result<FrameStack, VolumeError> {
    check_axis(axis)?;
    window.validate()?;
    let finite = vol.data.iter().copied().filter(|v| v.is_finite());
    let (min, max) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });

    let (lo, hi) = match window {
        WindowSpec::Percentile { lo, hi } => {
            let mut sorted: Vec<f64> = vol.data.iter().copied().filter(|v| v.is_finite()).collect();
            if sorted.is_empty() {
                (0.0, 0.0)
            } else {
                sorted.sort_unstable_by(f64::total_cmp);
                (nearest_rank(&sorted, lo), nearest_rank(&sorted, hi))
            }
        }
        WindowSpec::Hounsfield { center, width } => (center - width / 2.0, center + width / 2.0),
    };
    let degenerate = lo >= hi || min >= max;

    let pixels: Vec<u8> = if degenerate {
        vec![0; vol.data.len()]
    } else {
        let range = hi - lo;
        vol.data
            .iter()
            .map(|&v| {
                if v.is_nan() {
                    0
                } else {
                    ((v.clamp(lo, hi) - lo) * 255.0 / range + 0.5)
                        .floor()
                        .clamp(0.0, 255.0) as u8
                }
            })
            .collect()
    };

    struct Windowed<'a> {
        dims: Dims,
        pixels: &'a [u8],
    }
    impl VoxelGrid for Windowed<'_> {
        type Voxel = u8;
        fn dims(&self) -> Dims {
            self.dims
        }
        fn voxels(&self) -> &[u8] {
            self.pixels
        }
    }
    let grid = Windowed {
        dims: vol.dims,
        pixels: &pixels,
    };
    let frames = (0..vol.dims[axis])
        .map(|i| slice_of(&grid, axis, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FrameStack {
        axis,
        frames,
        source_dims: vol.dims,
        window,
        degenerate,
    })
}

/// Synthetic ellipsoid scan with its ground-truth mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: Dims,
    /// Ellipsoid center in voxel coordinates.
    pub center: [f64; 3],
    /// Semi-axes in voxels.
    pub semi_axes: [f64; 3],
    pub fg_intensity: f64,
    pub bg_intensity: f64,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl PhantomSpec {
    /// Centered sphere-ish ellipsoid filling about half of each axis.
    pub fn centered(dims: Dims, rng_seed: u64) -> Self {
        Self {
            dims,
            center: dims.map(|d| (d as f64 - 1.0) / 2.0),
            semi_axes: [
                dims[0] as f64 * 0.3,
                dims[1] as f64 * 0.25,
                dims[2] as f64 * 0.35,
            ],
            fg_intensity: 200.0,
            bg_intensity: 60.0,
            noise_sigma: 10.0,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<(), VolumeError> {
        check_dims(self.dims)?;
        for i in 0..3 {
            let (c, a) = (self.center[i], self.semi_axes[i]);
            if !(a > 0.0) || !a.is_finite() {
                return Err(VolumeError::InvalidPhantom(format!(
                    "semi-axis {i} must be > 0"
                )));
            }
            if c - a < 0.0 || c + a > (self.dims[i] - 1) as f64 {
                return Err(VolumeError::InvalidPhantom(format!(
                    "ellipsoid does not fit along axis {i}: center {c}, semi-axis {a}, extent {}",
                    self.dims[i]
                )));
            }
        }
        // fg == bg is allowed: the mask does not depend on intensity.
        if !(self.noise_sigma >= 0.0) {
            return Err(VolumeError::InvalidPhantom(
                "noise_sigma must be >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        let p = [x as f64, y as f64, z as f64];
        let mut s = 0.0;
        for i in 0..3 {
            let d = (p[i] - self.center[i]) / self.semi_axes[i];
            s += d * d;
        }
        s <= 1.0
    }
}

/// Builds the phantom volume and mask.
///
/// Noise is drawn from ChaCha8 seeded with `rng_seed` (via
/// `SeedableRng::seed_from_u64`), one standard-normal sample per voxel in
/// storage order using the ziggurat sampler of `rand_distr`, scaled by
/// `noise_sigma`.
pub fn make_phantom(spec: &PhantomSpec) -> Result<(Volume, MaskVolume), VolumeError> {
    spec.validate()?;
    let mask = MaskVolume::from_fn(spec.dims, |x, y, z| spec.contains(x, y, z))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let data = mask
        .data()
        .iter()
        .map(|&inside| {
            let base = if inside {
                spec.fg_intensity
            } else {
                spec.bg_intensity
            };
            let n: f64 = StandardNormal.sample(&mut rng);
            base + spec.noise_sigma * n
        })
        .collect();
    let vol = Volume::new(spec.dims, [1.0; 3], data)?.with_modality("PHANTOM");
    Ok((vol, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coded_volume() -> Volume {
        let dims = [3, 3, 3];
        let mut data = vec![0.0; 27];
        for z in 0..3 {
            for y in 0..3 {
                for x in 0..3 {
                    data[voxel_index(dims, x, y, z)] = (100 * z + 10 * y + x) as f64;
                }
            }
        }
        Volume::new(dims, [1.0; 3], data).unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(matches!(
            Volume::new([0, 1, 1], [1.0; 3], vec![]),
            Err(VolumeError::InvalidDims(_))
        ));
        assert!(matches!(
            Volume::new([1, 1, 1], [1.0, 0.0, 1.0], vec![0.0]),
            Err(VolumeError::InvalidSpacing(_))
        ));
        assert!(matches!(
            Volume::new([2, 1, 1], [1.0; 3], vec![0.0]),
            Err(VolumeError::DataLength { .. })
        ));
        let mut singular = diagonal_affine([1.0; 3]);
        singular[2][2] = 0.0;
        assert_eq!(
            Volume::with_affine([1, 1, 1], [1.0; 3], vec![0.0], singular),
            Err(VolumeError::SingularAffine)
        );
    }

    #[test]
    fn axial_slice_has_rows_y_cols_x() {
        let v = coded_volume();
        let p = slice_of(&v, 2, 1).unwrap();
        assert_eq!(p.shape(), (3, 3));
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(p.get(r, c), (100 + 10 * r + c) as f64);
            }
        }
    }

    #[test]
    fn other_axes_follow_cyclic_convention() {
        let v = coded_volume();
        // axis 0: rows = z, cols = y
        let p = slice_of(&v, 0, 2).unwrap();
        assert_eq!(p.get(1, 0), 102.0);
        assert_eq!(p.get(0, 1), 12.0);
        // axis 1: rows = x, cols = z
        let p = slice_of(&v, 1, 1).unwrap();
        assert_eq!(p.get(2, 0), 12.0);
        assert_eq!(p.get(0, 2), 210.0);
    }

    #[test]
    fn slice_index_bounds() {
        let v = coded_volume();
        assert_eq!(
            slice_of(&v, 2, 3),
            Err(VolumeError::SliceOutOfRange {
                axis: 2,
                index: 3,
                len: 3
            })
        );
        assert_eq!(slice_of(&v, 3, 0), Err(VolumeError::InvalidAxis(3)));
    }

    #[test]
    fn one_hot_mask_slice() {
        let mut m = MaskVolume::empty([4, 5, 6]).unwrap();
        m.set(1, 2, 3, true);
        for axis in 0..3 {
            let idx = [1, 2, 3][axis];
            let s = m.slice(axis, idx).unwrap();
            assert_eq!(s.count(), 1);
            let other = if idx > 0 { idx - 1 } else { idx + 1 };
            assert_eq!(m.slice(axis, other).unwrap().count(), 0);
        }
    }

    #[test]
    fn constant_volume_gives_degenerate_zero_frames() {
        let v = Volume::new([4, 4, 4], [1.0; 3], vec![7.0; 64]).unwrap();
        let fs = to_frames(&v, 2, WindowSpec::MR_DEFAULT).unwrap();
        assert!(fs.degenerate);
        assert_eq!(fs.len(), 4);
        assert!(fs
            .frames
            .iter()
            .all(|f| f.as_slice().iter().all(|&p| p == 0)));
    }

    #[test]
    fn two_value_volume_maps_to_endpoints() {
        let data: Vec<f64> = (0..27)
            .map(|i| if i % 2 == 0 { 0.0 } else { 100.0 })
            .collect();
        let v = Volume::new([3, 3, 3], [1.0; 3], data).unwrap();
        let fs = to_frames(&v, 2, WindowSpec::Percentile { lo: 0.0, hi: 100.0 }).unwrap();
        assert!(!fs.degenerate);
        let mut seen: Vec<u8> = fs
            .frames
            .iter()
            .flat_map(|f| f.as_slice().to_vec())
            .collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen, vec![0, 255]);
    }

    #[test]
    fn hounsfield_window_on_ramp() {
        let v = Volume::new(
            [10, 10, 10],
            [1.0; 3],
            (0..1000).map(|i| i as f64).collect(),
        )
        .unwrap();
        let fs = to_frames(
            &v,
            2,
            WindowSpec::Hounsfield {
                center: 500.0,
                width: 200.0,
            },
        )
        .unwrap();
        // voxel i sits at x = i % 10, y = (i / 10) % 10, z = i / 100
        let px = |i: usize| fs.frames[i / 100].get((i / 10) % 10, i % 10);
        assert_eq!(px(400), 0);
        assert_eq!(px(500), 128);
        assert_eq!(px(600), 255);
        assert_eq!(px(0), 0);
        assert_eq!(px(999), 255);
    }

    #[test]
    fn nearest_rank_percentile() {
        let s: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        assert_eq!(nearest_rank(&s, 0.0), 1.0);
        assert_eq!(nearest_rank(&s, 50.0), 5.0);
        assert_eq!(nearest_rank(&s, 95.0), 10.0);
        assert_eq!(nearest_rank(&s, 100.0), 10.0);
    }

    #[test]
    fn window_validation() {
        assert!(WindowSpec::Percentile { lo: 5.0, hi: 5.0 }
            .validate()
            .is_err());
        assert!(WindowSpec::Percentile { lo: -1.0, hi: 5.0 }
            .validate()
            .is_err());
        assert!(WindowSpec::Hounsfield {
            center: 0.0,
            width: 0.0
        }
        .validate()
        .is_err());
        assert_eq!(WindowSpec::for_modality("CT"), WindowSpec::CT_DEFAULT);
        assert_eq!(
            WindowSpec::for_modality("MR-T2FLAIR"),
            WindowSpec::MR_DEFAULT
        );
    }

    #[test]
    fn phantom_mask_matches_brute_force_count() {
        let spec = PhantomSpec {
            dims: [32, 32, 32],
            center: [16.0; 3],
            semi_axes: [8.0; 3],
            fg_intensity: 1.0,
            bg_intensity: 0.0,
            noise_sigma: 0.0,
            rng_seed: 0,
        };
        let (_, mask) = make_phantom(&spec).unwrap();
        let mut expected = 0;
        for z in 0..32i64 {
            for y in 0..32i64 {
                for x in 0..32i64 {
                    let d2 = (x - 16).pow(2) + (y - 16).pow(2) + (z - 16).pow(2);
                    if d2 <= 64 {
                        expected += 1;
                    }
                }
            }
        }
        assert_eq!(mask.count(), expected);
    }

    #[test]
    fn phantom_mask_independent_of_intensity_and_seed_deterministic() {
        let mut spec = PhantomSpec::centered([20, 20, 20], 3);
        let (v1, m1) = make_phantom(&spec).unwrap();
        let (v2, _) = make_phantom(&spec).unwrap();
        assert_eq!(v1, v2);
        spec.bg_intensity = spec.fg_intensity;
        spec.noise_sigma = 0.0;
        let (v3, m3) = make_phantom(&spec).unwrap();
        assert_eq!(m1, m3);
        assert!(v3.data().iter().all(|&x| x == spec.fg_intensity));
    }

    #[test]
    fn phantom_rejects_ellipsoid_outside_grid() {
        let mut spec = PhantomSpec::centered([10, 10, 10], 0);
        spec.semi_axes = [6.0, 2.0, 2.0];
        assert!(matches!(
            make_phantom(&spec),
            Err(VolumeError::InvalidPhantom(_))
        ));
    }

    #[test]
    fn phantom_is_reflection_symmetric() {
        let spec = PhantomSpec {
            dims: [21, 17, 15],
            center: [10.0, 8.0, 7.0],
            semi_axes: [7.0, 5.5, 4.0],
            fg_intensity: 1.0,
            bg_intensity: 0.0,
            noise_sigma: 0.0,
            rng_seed: 0,
        };
        let (_, m) = make_phantom(&spec).unwrap();
        for z in 0..15 {
            for y in 0..17 {
                for x in 0..21 {
                    assert_eq!(m.get(x, y, z), m.get(20 - x, 16 - y, 14 - z));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn slices_reassemble_volume(
            (nx, ny, nz, bits) in (1usize..6, 1usize..6, 1usize..6)
                .prop_flat_map(|(x, y, z)| (Just(x), Just(y), Just(z), proptest::collection::vec(any::<bool>(), x * y * z))),
            axis in 0usize..3,
        ) {
            let m = MaskVolume::from_vec([nx, ny, nz], bits).unwrap();
            let slices: Vec<_> = (0..m.dims()[axis]).map(|i| m.slice(axis, i).unwrap()).collect();
            prop_assert_eq!(MaskVolume::from_slices(axis, &slices).unwrap(), m);
        }

        #[test]
        fn percentile_window_is_monotone(values in proptest::collection::vec(-1000.0f64..1000.0, 8)) {
            let v = Volume::new([2, 2, 2], [1.0; 3], values.clone()).unwrap();
            let fs = to_frames(&v, 2, WindowSpec::Percentile { lo: 10.0, hi: 90.0 }).unwrap();
            let px: Vec<u8> = fs.frames.iter().flat_map(|f| f.as_slice().to_vec()).collect();
            // axis-2 frames are in storage order
            for i in 0..8 {
                for j in 0..8 {
                    if values[i] >= values[j] {
                        prop_assert!(px[i] >= px[j]);
                    }
                }
            }
        }
    }
}
