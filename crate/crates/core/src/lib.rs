//! Families of VGG-style CNN architectures that share one total feature
//! budget, redistributed across layers by a skew normal distribution.
//!
//! The pipeline is: [`skewnorm`] integrates the density over layer bins,
//! [`archgen`] turns bin masses into per-layer widths and realizes them as
//! shape-checked architectures, [`gridsearch`] sweeps the (ξ, ω, α) grid,
//! [`schedule`] gives the training learning-rate schedule and [`expio`]
//! handles manifests, results and aggregation.

pub mod archgen;
pub mod cli;
pub mod error;
pub mod expio;
pub mod gridsearch;
pub mod par;
pub mod schedule;
pub mod skewnorm;

pub use archgen::{
    allocate, classify_shape, default_vgg10_template, default_vgg16_template, is_valid, realize,
    vgg_budget, ArchitectureSpec, FeatureAllocation, NetworkTemplate, ShapeClass,
};
pub use error::{Error, Result};
pub use gridsearch::{default_grid, enumerate, summarize, GridSpec};
pub use par::Execution;
pub use skewnorm::{bin_masses, erf, pdf, BinConvention, BinMasses, SkewNormalParams};
