//! Non-local cross-spectral reconstruction.
//!
//! Recovers the missing pixels of one distorted spectral channel from a set of
//! fully available reference channels. For every missing pixel the reference
//! channels are block-matched inside a bounded search window, the matched
//! locations are stacked into bars, and a per-pixel affine model between the
//! best-correlated reference bar and the valid entries of the distorted bar
//! predicts the missing value.
//!
//! ```
//! use nocs_core::{reconstruct, Channel, Mask, NocsParams, ReconstructionProblem};
//!
//! let reference = Channel::from_fn(24, 24, |r, c| ((r * 7 + c * 13) % 50) as f64 * 4.0);
//! let clean = Channel::from_fn(24, 24, |r, c| 0.5 * reference.get(r, c) + 10.0);
//! let mask = Mask::from_fn(24, 24, |r, c| !(10..13).contains(&r) || !(10..13).contains(&c));
//! let distorted = nocs_core::apply_mask(&clean, &mask).unwrap();
//!
//! let problem = ReconstructionProblem::new(distorted, mask, vec![reference]).unwrap();
//! let params = NocsParams { search_radius: 6, ..NocsParams::default() };
//! let restored = reconstruct(&problem, &params).unwrap();
//! assert!((restored.get(11, 11) - clean.get(11, 11)).abs() < 1e-9);
//! ```

pub mod block_matching;
mod error;
pub mod image_model;
pub mod masks;
pub mod metrics;
pub mod reconstructor;
pub mod regression;

pub use block_matching::{block_distance, extract_block, match_blocks, BlockMatcher, MatchList, NocsParams};
pub use error::{NocsError, Result};
pub use image_model::{apply_mask, Channel, Coord, Mask, ReconstructionProblem};
pub use masks::{generate_mask, MaskPattern, MaskSpec};
pub use metrics::{psnr, ssim, QualityReport};
pub use reconstructor::{reconstruct, Progress, Reconstruction, ReconstructionState, Reconstructor, RunStats};
pub use regression::{fit_affine, predict_pixel, select_reference, AffineFit, Bar};
