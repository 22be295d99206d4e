//! Adversarial post-processing for music source separation estimates.
//!
//! The crate is organized around a small reverse-mode autodiff engine
//! ([`autodiff`]), shared signal-analysis primitives ([`dsp`]), the
//! generator/discriminator models ([`model`]), training objectives
//! ([`losses`]), corpus tooling ([`data`]), the training loop ([`train`]),
//! and artifact metrics ([`analyze`]).
//!
//! The numeric core is generic over [`scalar::Scalar`] (f32 or f64); the
//! pipeline modules pin the crate-root aliases below. Training and analysis
//! run in f64; checkpoints store f32 parameter payloads.

pub mod autodiff;
pub mod dsp;
pub mod scalar;

/// Scalar type used by the training and analysis pipeline.
pub type Sample = f64;

/// Differentiable array over the pipeline scalar.
pub type Array = autodiff::DiffArray<Sample>;

/// Gradient tape over the pipeline scalar.
pub type GradTape = autodiff::Tape<Sample>;
