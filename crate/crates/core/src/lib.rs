//! Bearing fault diagnosis from STFT spectrogram images.
//!
//! Simulated or recorded vibration signals are cut into chunks, rendered as
//! 227x227 log-magnitude spectrogram images, projected onto a few
//! eigen-spectrograms found by randomized SVD, and classified by an ECOC
//! ensemble of kernel SVMs.

pub mod error;
pub mod io;
pub mod interpret;
pub mod label;
pub mod linalg;
pub mod pipeline;
pub mod rla;
pub mod seed;
pub mod signal_sim;
pub mod spectrogram;
pub mod svm;

pub use error::{Error, Result};
pub use label::{ClassLabel, FaultCode};
