//! Interactive 3D segmentation by slice-to-slice mask propagation.
//!
//! A volume is cut into 8-bit frames along one axis. The slice with the
//! largest object cross-section is segmented first, either from a full mask
//! or by a few rounds of simulated clicks, and that mask is then propagated
//! slice by slice in both directions. The result is scored with Dice,
//! normalized surface dice and the 95th-percentile Hausdorff distance.

pub mod edt;
pub mod http;
pub mod metrics;
pub mod nifti;
pub mod plane;
pub mod prompt;
pub mod propagation;
pub mod rle;
pub mod volume;
pub mod wire;

pub use plane::{Frame, MaskSlice, Plane};
pub use volume::{FrameStack, MaskVolume, Volume, VoxelGrid, WindowSpec};
