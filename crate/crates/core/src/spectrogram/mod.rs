//! Signals to spectrogram images to the dataset matrix.

mod dataset;
mod image;

pub use dataset::{assemble_dataset, DatasetMatrix};
pub use image::{
    normalize_min_max, render_image, render_image_with_range, resize_bilinear, SpectrogramImage, IMAGE_PIXELS,
    IMAGE_SIDE,
};

/// Default image black level below the peak, dB.
pub const DEFAULT_DYNAMIC_RANGE_DB: f64 = 20.0;

pub use crate::label::{ClassLabel, FaultCode};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_sim::Signal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Hamming,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub window_len: usize,
    pub window: WindowKind,
    pub overlap_frac: f64,
    pub chunk_len: usize,
    /// Image black level in dB below the peak; `None` is plain min-max.
    pub dynamic_range_db: Option<f64>,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            window_len: 32,
            window: WindowKind::Hamming,
            overlap_frac: 0.5,
            chunk_len: 2048,
            dynamic_range_db: Some(DEFAULT_DYNAMIC_RANGE_DB),
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::InvalidArgument("window must span at least 2 samples".into()));
        }
        if self.window_len > self.chunk_len {
            return Err(Error::InvalidArgument(format!(
                "window length {} exceeds chunk length {}",
                self.window_len, self.chunk_len
            )));
        }
        if !(0.0..1.0).contains(&self.overlap_frac) {
            return Err(Error::InvalidArgument(format!(
                "overlap must lie in [0, 1), got {}",
                self.overlap_frac
            )));
        }
        if let Some(range) = self.dynamic_range_db {
            if !(range.is_finite() && range > 0.0) {
                return Err(Error::InvalidArgument(format!("dynamic range must be positive, got {range} dB")));
            }
        }
        self.hop().map(|_| ())
    }

    /// `window_len * (1 - overlap_frac)`, required to be a positive integer.
    pub fn hop(&self) -> Result<usize> {
        let hop = self.window_len as f64 * (1.0 - self.overlap_frac);
        let rounded = hop.round();
        if rounded < 1.0 || (hop - rounded).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "hop {hop} (window {} x (1 - {})) is not a positive integer",
                self.window_len, self.overlap_frac
            )));
        }
        Ok(rounded as usize)
    }

    pub fn frame_count(&self) -> Result<usize> {
        Ok((self.chunk_len - self.window_len) / self.hop()? + 1)
    }

    pub fn bin_count(&self) -> usize {
        self.window_len / 2 + 1
    }
}

/// Consecutive non-overlapping chunks of `chunk_len` samples; the trailing
/// remainder is dropped.
pub fn chunk_signal<'a>(sig: &'a Signal, cfg: &StftConfig) -> Result<Vec<&'a [f64]>> {
    if cfg.chunk_len == 0 {
        return Err(Error::InvalidArgument("chunk length must be positive".into()));
    }
    if sig.len() < cfg.chunk_len {
        return Err(Error::EmptyDataset(format!(
            "signal of {} samples is shorter than one {}-sample chunk",
            sig.len(),
            cfg.chunk_len
        )));
    }
    Ok(sig.samples.chunks_exact(cfg.chunk_len).collect())
}

/// Symmetric Hamming window `0.54 - 0.46 cos(2 pi k / (L - 1))`.
pub fn hamming(len: usize) -> Vec<f64> {
    let denom = (len - 1) as f64;
    (0..len)
        .map(|k| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / denom).cos())
        .collect()
}

/// One-sided STFT magnitude, frequency bins down the rows and frames across
/// the columns. The FFT length equals the window length.
pub fn stft_magnitude(chunk: &[f64], cfg: &StftConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    if chunk.len() != cfg.chunk_len {
        return Err(Error::Shape {
            expected: format!("chunk of {} samples", cfg.chunk_len),
            actual: format!("{} samples", chunk.len()),
        });
    }
    let hop = cfg.hop()?;
    let frames = cfg.frame_count()?;
    let bins = cfg.bin_count();
    let window = match cfg.window {
        WindowKind::Hamming => hamming(cfg.window_len),
    };
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.window_len);

    let mut out = DMatrix::zeros(bins, frames);
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.window_len];
    for frame in 0..frames {
        let start = frame * hop;
        for (slot, (x, w)) in buf.iter_mut().zip(chunk[start..].iter().zip(&window)) {
            *slot = Complex64::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for bin in 0..bins {
            out[(bin, frame)] = buf[bin].norm();
        }
    }
    Ok(out)
}

/// Full chunk-to-image path for one signal.
pub fn signal_to_images(sig: &Signal, cfg: &StftConfig, max_chunks: Option<usize>) -> Result<Vec<SpectrogramImage>> {
    let label = sig
        .label
        .clone()
        .ok_or_else(|| Error::InvalidDataset("signal has no class label".into()))?;
    let chunks = chunk_signal(sig, cfg)?;
    let take = max_chunks.unwrap_or(chunks.len()).min(chunks.len());
    chunks[..take]
        .iter()
        .map(|chunk| {
            let mag = stft_magnitude(chunk, cfg)?;
            render_image_with_range(&mag, label.clone(), cfg.dynamic_range_db)
        })
        .collect()
}
