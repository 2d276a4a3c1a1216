//! Simulation and optimization toolkit for redundant-sensing quantizers.
//!
//! The pipeline for one Monte Carlo trial:
//!
//! 1. build a component array ([`grouping`]),
//! 2. draw actual weights under unit-cell mismatch ([`model`]),
//! 3. enumerate every reference the array can generate and pick the one
//!    nearest each target of a finer grid ([`reference`]),
//! 4. score the selected boundaries by entropy ([`metrics`]).
//!
//! [`montecarlo`] repeats that over seeded trials, [`lut`] persists the
//! selected assemblies and [`report`] writes plot-ready CSV/JSON.

pub mod cli;
pub mod error;
pub mod grouping;
pub mod lut;
pub mod metrics;
pub mod model;
pub mod montecarlo;
pub mod reference;
pub mod report;

pub use error::{Error, Result};
pub use grouping::{build_binary_weighted, build_half_split, build_rs_family, build_uniform};
pub use lut::{export_lut, import_lut};
pub use metrics::{entropy_report, rmse_profile, shannon_limit, EntropyReport};
pub use model::{sample_actual_weights, ComponentArray, Grouping, MismatchModel, QuantizerSpec};
pub use montecarlo::{run_diffusion, run_sweep, DiffusionHistogram, McSummary, Selector, SweepConfig};
pub use reference::{
    decode_assembly, enumerate_references, quantize, select_quantizer_exhaustive, select_quantizer_greedy, Mask,
    ReferenceSet, SelectedQuantizer, TargetGrid,
};
