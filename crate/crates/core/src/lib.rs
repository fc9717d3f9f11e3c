//! Simulation and analysis of a quantum-memory atom-light interferometer
//! read out by balanced heterodyne detection.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod io;
pub mod sequencer;
pub mod signal;
pub mod theory;

use thiserror::Error;

/// Any failure raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Signal(#[from] signal::SignalError),
    #[error(transparent)]
    Sequence(#[from] sequencer::SequenceError),
    #[error(transparent)]
    Theory(#[from] theory::TheoryError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error(transparent)]
    Config(#[from] io::ConfigError),
    #[error(transparent)]
    TraceIo(#[from] io::TraceIoError),
    #[error(transparent)]
    BatchIo(#[from] io::BatchIoError),
}
