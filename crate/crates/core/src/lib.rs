//! hlsforge: synthetic HLS design-point generation and evaluation.
//!
//! The crate covers the full pipeline:
//!
//! * [`dataset`] — CSV + schema ingestion of design points.
//! * [`codec`] — Q20.12 fixed-point / directive-ordinal bit matrices.
//! * [`nn`] — minimal dense numeric core (layers, Adam, gradcheck).
//! * [`vae`] — MLP variational autoencoder over flattened bit matrices.
//! * [`gan`] — convolutional GAN over one-channel bit canvases.
//! * [`baselines`] — per-variable Gaussian and rejection-ABC generators.
//! * [`fidelity`] — MMD / SSD / PRD / COSS scoring with multi-run stats.
//! * [`dse`] — multi-component design-space exploration with a genetic
//!   algorithm, Pareto extraction, and ADRS scoring.
//! * [`harness`] — experiment orchestration and report files.
//! * [`synthetic`] — deterministic fixture generators for evaluation.

pub mod baselines;
pub mod codec;
pub mod dataset;
pub mod dse;
pub mod error;
pub mod fidelity;
pub mod gan;
pub mod harness;
pub mod nn;
pub mod synthetic;
pub mod vae;

pub use error::{Error, Result};
