//! Digital-twin channel toolkit.
//!
//! Builds ground-truth MISO-OFDM channels and path-loss maps from scenes made
//! of axis-aligned cuboids, extracts propagation-guided environment feature
//! maps (location, height and penetration ratio), and reconstructs full CSI
//! matrices from sparse pilots with an environment-conditioned unrolled
//! proximal gradient solver.
//!
//! Module map:
//!
//! - [`scene`]: cuboid scenes, the 0.1 m grid, slab intersections, seeded scenario generation
//! - [`raychan`]: multipath tracing, steering vectors, CSI assembly, path loss and PL maps
//! - [`envfeat`]: BS/UT location maps, height map, penetration-ratio map
//! - [`pilot`]: pilot masks and the sampling operator
//! - [`recon`]: unrolled proximal gradient reconstruction with FiLM conditioning, physics PL baseline
//! - [`patches`]: two-scale patch tokenization with overlap averaging
//! - [`metrics`]: RMSE, NMSE, SGCS, Charbonnier losses, empirical CDFs
//! - [`dataset`]: crop/rotate augmentation, sample labeling, splits and the sample container
//! - [`sensing`]: point-cloud simulation, DBSCAN fine localization, dynamic object injection
//! - [`pipeline`]: end-to-end run and latency profiling
//! - [`formats`]: binary/CSV/PPM artifact formats shared by the modules

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod dft;
pub mod envfeat;
mod error;
pub mod formats;
pub mod metrics;
pub mod patches;
pub mod pilot;
pub mod pipeline;
pub mod raychan;
pub mod recon;
pub mod rng;
pub mod scene;
pub mod sensing;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
