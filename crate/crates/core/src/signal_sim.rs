//! Synthetic rolling-bearing fault signals.
//!
//! A localized defect is modelled as a periodic train of exponentially
//! decaying sinusoids
//!
//! ```text
//! s(t) = sum_j A_j h(t - jT),   h(t) = exp(-beta t) sin(2 pi f_n t)  for t > 0
//! ```
//!
//! where `T` is the period of the characteristic fault frequency. Impulse
//! tails are never truncated; the sum is evaluated with a complex one-pole
//! recursion, so the cost is linear in the number of samples.

use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{ClassLabel, FaultCode};
use crate::seed::{self, STREAM_AMPLITUDE, STREAM_NOISE};

/// Samples per chunk used by the default dataset layout.
pub const DEFAULT_CHUNK_LEN: usize = 2048;

/// Characteristic fault frequencies of a bearing, as multiples of shaft speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BearingSpec {
    pub designation: String,
    pub bpfi_mult: f64,
    pub bpfo_mult: f64,
    pub bsf_mult: f64,
}

impl BearingSpec {
    /// SKF 22240 CCK/W33, the bearing of the numerical dataset.
    pub fn skf_22240() -> Self {
        BearingSpec {
            designation: "SKF 22240 CCK/W33".to_string(),
            bpfi_mult: 11.103,
            bpfo_mult: 7.897,
            bsf_mult: 2.830,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_positive = [self.bpfi_mult, self.bpfo_mult, self.bsf_mult]
            .iter()
            .all(|m| m.is_finite() && *m > 0.0);
        if !all_positive {
            return Err(Error::InvalidArgument(format!(
                "bearing {}: fault multiples must be positive",
                self.designation
            )));
        }
        if self.bpfi_mult <= self.bpfo_mult {
            return Err(Error::InvalidArgument(format!(
                "bearing {}: BPFI multiple must exceed BPFO multiple",
                self.designation
            )));
        }
        Ok(())
    }
}

impl Default for BearingSpec {
    fn default() -> Self {
        BearingSpec::skf_22240()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultType {
    InnerRace,
    OuterRace,
    RollingElement,
}

impl FaultType {
    pub const ALL: [FaultType; 3] = [
        FaultType::RollingElement,
        FaultType::InnerRace,
        FaultType::OuterRace,
    ];

    pub fn code(self) -> FaultCode {
        match self {
            FaultType::InnerRace => FaultCode::IR,
            FaultType::OuterRace => FaultCode::OR,
            FaultType::RollingElement => FaultCode::B,
        }
    }
}

impl FromStr for FaultType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ir" | "inner" | "innerrace" | "inner-race" => Ok(FaultType::InnerRace),
            "or" | "outer" | "outerrace" | "outer-race" => Ok(FaultType::OuterRace),
            "b" | "ball" | "rollingelement" | "rolling-element" => Ok(FaultType::RollingElement),
            _ => Err(Error::InvalidArgument(format!("unknown fault type {s:?}"))),
        }
    }
}

/// Fault frequency in Hz for a shaft speed in rev/min.
///
/// Rolling-element faults strike both races once per spin revolution, so
/// their impulse rate is twice the ball spin frequency.
pub fn fault_frequency(spec: &BearingSpec, fault: FaultType, shaft_speed_rpm: f64) -> Result<f64> {
    if !(shaft_speed_rpm.is_finite() && shaft_speed_rpm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "shaft speed must be positive, got {shaft_speed_rpm}"
        )));
    }
    let multiple = match fault {
        FaultType::InnerRace => spec.bpfi_mult,
        FaultType::OuterRace => spec.bpfo_mult,
        FaultType::RollingElement => 2.0 * spec.bsf_mult,
    };
    Ok(multiple * shaft_speed_rpm / 60.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultSimParams {
    pub fault_type: FaultType,
    pub amplitude_mean: f64,
    pub amplitude_jitter_frac: f64,
    /// Decay rate of each impulse, Hz.
    pub decay_beta: f64,
    /// Excited resonance frequency, Hz.
    pub resonance_fn: f64,
    /// rev/min
    pub shaft_speed: f64,
    pub sample_rate: f64,
    /// seconds
    pub duration: f64,
    pub rng_seed: u64,
}

impl FaultSimParams {
    /// Numerical-dataset defaults: beta 1200 Hz, f_n 2000 Hz, 1000 rpm,
    /// 12 kHz, +/-10 % amplitude jitter, 151 chunks of signal.
    pub fn numerical(fault_type: FaultType, amplitude_mean: f64, rng_seed: u64) -> Self {
        let sample_rate = 12_000.0;
        FaultSimParams {
            fault_type,
            amplitude_mean,
            amplitude_jitter_frac: 0.10,
            decay_beta: 1200.0,
            resonance_fn: 2000.0,
            shaft_speed: 1000.0,
            sample_rate,
            duration: default_duration(sample_rate, DEFAULT_CHUNK_LEN),
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return bad(format!("sample rate must be positive, got {}", self.sample_rate));
        }
        if !(self.decay_beta.is_finite() && self.decay_beta > 0.0) {
            return bad(format!("decay beta must be positive, got {}", self.decay_beta));
        }
        if !(self.resonance_fn.is_finite() && self.resonance_fn > 0.0) {
            return bad(format!("resonance must be positive, got {}", self.resonance_fn));
        }
        if self.resonance_fn >= self.sample_rate / 2.0 {
            return bad(format!(
                "resonance {} Hz is at or above the Nyquist frequency {} Hz",
                self.resonance_fn,
                self.sample_rate / 2.0
            ));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(0.0..1.0).contains(&self.amplitude_jitter_frac) {
            return bad(format!(
                "amplitude jitter must lie in [0, 1), got {}",
                self.amplitude_jitter_frac
            ));
        }
        if !self.amplitude_mean.is_finite() {
            return bad("amplitude mean must be finite".to_string());
        }
        if !(self.shaft_speed.is_finite() && self.shaft_speed > 0.0) {
            return bad(format!("shaft speed must be positive, got {}", self.shaft_speed));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        floor_guarded(self.duration * self.sample_rate)
    }
}

/// Duration giving `chunks + 1` chunks' worth of samples: 151 x 2048 / f_s
/// for the default layout, so that 150 full chunks are always available.
pub fn default_duration(sample_rate: f64, chunk_len: usize) -> f64 {
    151.0 * chunk_len as f64 / sample_rate
}

/// floor() that tolerates values a few ulps below an integer.
fn floor_guarded(x: f64) -> usize {
    (x * (1.0 + 8.0 * f64::EPSILON)).floor().max(0.0) as usize
}

#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub label: Option<ClassLabel>,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: f64, label: Option<ClassLabel>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("signal has no samples".into()));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        Ok(Signal {
            samples,
            sample_rate,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean square of the samples.
    pub fn power(&self) -> f64 {
        mean_square(&self.samples)
    }
}

pub(crate) fn mean_square(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64
}

/// Single impulse response `exp(-beta t) sin(2 pi f_n t)`, zero for `t <= 0`.
pub fn impulse_response(t: f64, decay_beta: f64, resonance_fn: f64) -> f64 {
    if t > 0.0 {
        (-decay_beta * t).exp() * (2.0 * std::f64::consts::PI * resonance_fn * t).sin()
    } else {
        0.0
    }
}

/// Sum of impulses `(onset, amplitude)` sampled at `k / sample_rate`.
///
/// `impulses` must be sorted by onset.
pub fn superpose_impulses(
    n_samples: usize,
    sample_rate: f64,
    impulses: &[(f64, f64)],
    decay_beta: f64,
    resonance_fn: f64,
) -> Vec<f64> {
    debug_assert!(impulses.windows(2).all(|w| w[0].0 <= w[1].0));
    let pole = Complex64::new(-decay_beta, 2.0 * std::f64::consts::PI * resonance_fn);
    let step = (pole / sample_rate).exp();

    let mut out = Vec::with_capacity(n_samples);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut next = 0;
    for k in 0..n_samples {
        let t = k as f64 / sample_rate;
        if k > 0 {
            acc *= step;
        }
        while next < impulses.len() && impulses[next].0 < t {
            let (onset, amplitude) = impulses[next];
            acc += amplitude * (pole * (t - onset)).exp();
            next += 1;
        }
        out.push(acc.im);
    }
    out
}

/// Impulse onsets `jT` for `j = 1..=J`, `J = floor(duration / T)`, with
/// amplitudes drawn uniformly in `mean * [1 - jitter, 1 + jitter]`.
pub fn impulse_schedule(params: &FaultSimParams, spec: &BearingSpec) -> Result<Vec<(f64, f64)>> {
    let freq = fault_frequency(spec, params.fault_type, params.shaft_speed)?;
    let period = 1.0 / freq;
    let count = floor_guarded(params.duration / period);

    let mut rng = seed::rng(params.rng_seed, STREAM_AMPLITUDE);
    let lo = params.amplitude_mean * (1.0 - params.amplitude_jitter_frac);
    let hi = params.amplitude_mean * (1.0 + params.amplitude_jitter_frac);
    Ok((1..=count)
        .map(|j| {
            let amplitude = if lo < hi {
                rng.random_range(lo..=hi)
            } else {
                params.amplitude_mean
            };
            (j as f64 * period, amplitude)
        })
        .collect())
}

/// Noise-free fault signal of `floor(duration * sample_rate)` samples,
/// labelled `<fault code><amplitude mean>` (e.g. `IR3`) when the mean is a
/// positive integer.
pub fn simulate_fault_signal(params: &FaultSimParams, spec: &BearingSpec) -> Result<Signal> {
    params.validate()?;
    spec.validate()?;
    let n = params.sample_count();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "duration is shorter than one sample period".into(),
        ));
    }
    let impulses = impulse_schedule(params, spec)?;
    let samples = superpose_impulses(
        n,
        params.sample_rate,
        &impulses,
        params.decay_beta,
        params.resonance_fn,
    );
    let label = amplitude_label(params.fault_type, params.amplitude_mean);
    Signal::new(samples, params.sample_rate, label)
}

fn amplitude_label(fault: FaultType, amplitude_mean: f64) -> Option<ClassLabel> {
    let level = amplitude_mean.round();
    if level >= 1.0 && (amplitude_mean - level).abs() < 1e-12 {
        ClassLabel::new(fault.code(), format!("{}", level as u64)).ok()
    } else {
        None
    }
}

/// Power the SNR is measured against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrReference {
    /// Mean square of the clean signal.
    Measured,
    /// A fixed 1 (0 dBW) reference: noise power is `10^(-snr_db/10)`
    /// regardless of the signal.
    #[default]
    UnitPower,
}

/// Adds white Gaussian noise with power `signal_power / 10^(snr_db/10)`,
/// where `signal_power` is the measured mean square of `sig`.
pub fn add_awgn(sig: &Signal, snr_db: f64, rng_seed: u64) -> Result<Signal> {
    add_awgn_with_reference(sig, snr_db, SnrReference::Measured, rng_seed)
}

pub fn add_awgn_with_reference(
    sig: &Signal,
    snr_db: f64,
    reference: SnrReference,
    rng_seed: u64,
) -> Result<Signal> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!("SNR must be finite, got {snr_db}")));
    }
    let reference_power = match reference {
        SnrReference::Measured => {
            let p = sig.power();
            if p == 0.0 {
                return Err(Error::UndefinedSnr);
            }
            p
        }
        SnrReference::UnitPower => 1.0,
    };
    let sigma = (reference_power / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = seed::rng(rng_seed, STREAM_NOISE);
    let samples = sig
        .samples
        .iter()
        .map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(Signal {
        samples,
        sample_rate: sig.sample_rate,
        label: sig.label.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_sum(n: usize, fs: f64, impulses: &[(f64, f64)], beta: f64, fnat: f64) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let t = k as f64 / fs;
                impulses
                    .iter()
                    .map(|&(onset, a)| a * impulse_response(t - onset, beta, fnat))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn fault_frequencies_of_skf_22240() {
        let spec = BearingSpec::skf_22240();
        assert_eq!(spec.bpfi_mult, 11.103);
        let ir = fault_frequency(&spec, FaultType::InnerRace, 1000.0).unwrap();
        assert!((ir - 11.103 * 1000.0 / 60.0).abs() < 1e-12);
        assert!((ir - 185.05).abs() < 1e-2);
        let b = fault_frequency(&spec, FaultType::RollingElement, 1000.0).unwrap();
        assert!((b - 94.333).abs() < 1e-3);
        let or = fault_frequency(&spec, FaultType::OuterRace, 60.0).unwrap();
        assert!((or - 7.897).abs() < 1e-12);
    }

    #[test]
    fn fault_frequency_rejects_bad_speed_and_type() {
        let spec = BearingSpec::skf_22240();
        assert!(fault_frequency(&spec, FaultType::InnerRace, 0.0).is_err());
        assert!(matches!("cage".parse::<FaultType>(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bearing_invariants() {
        let mut spec = BearingSpec::skf_22240();
        assert!(spec.validate().is_ok());
        spec.bpfo_mult = 12.0;
        assert!(spec.validate().is_err());
        spec.bpfo_mult = -1.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn closed_form_quarter_period_sample() {
        let h = impulse_response(1.0 / (4.0 * 2000.0), 1200.0, 2000.0);
        assert!((h - (-0.15f64).exp()).abs() < 1e-15);
        assert!((h - 0.8607).abs() < 1e-4);
        // same value through the recursion: at 8 kHz sample 1 is t = 125 us
        let s = superpose_impulses(4, 8000.0, &[(0.0, 1.0)], 1200.0, 2000.0);
        assert_eq!(s[0], 0.0);
        assert!((s[1] - (-0.15f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn recursion_matches_direct_sum() {
        let fs = 12_000.0;
        let impulses: Vec<(f64, f64)> = (1..40).map(|j| (j as f64 * 0.0054037, 1.0 + 0.01 * j as f64)).collect();
        let fast = superpose_impulses(3000, fs, &impulses, 1200.0, 2000.0);
        let slow = direct_sum(3000, fs, &impulses, 1200.0, 2000.0);
        let max_err = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max_err < 1e-12, "max error {max_err}");
    }

    #[test]
    fn zero_amplitude_gives_zero_signal() {
        let params = FaultSimParams {
            duration: 0.5,
            ..FaultSimParams::numerical(FaultType::InnerRace, 0.0, 3)
        };
        let sig = simulate_fault_signal(&params, &BearingSpec::skf_22240()).unwrap();
        assert_eq!(sig.len(), 6000);
        assert!(sig.samples.iter().all(|&x| x == 0.0));
        assert_eq!(sig.label, None);
    }

    #[test]
    fn amplitudes_stay_within_jitter_band() {
        let params = FaultSimParams::numerical(FaultType::InnerRace, 1.0, 11);
        let sched = impulse_schedule(&params, &BearingSpec::skf_22240()).unwrap();
        assert!(sched.len() > 4000);
        assert!(sched.iter().all(|&(_, a)| (0.9..=1.1).contains(&a)));
        let spread = sched.iter().map(|s| s.1).fold(f64::MIN, f64::max)
            - sched.iter().map(|s| s.1).fold(f64::MAX, f64::min);
        assert!(spread > 0.15, "jitter not exercised: spread {spread}");
    }

    #[test]
    fn default_layout_has_151_chunks() {
        let params = FaultSimParams::numerical(FaultType::OuterRace, 2.0, 5);
        assert_eq!(params.sample_count(), 151 * 2048);
        let sig = simulate_fault_signal(&params, &BearingSpec::skf_22240()).unwrap();
        assert_eq!(sig.label.unwrap().to_string(), "OR2");
    }

    #[test]
    fn resonance_above_nyquist_is_rejected() {
        let params = FaultSimParams {
            resonance_fn: 7000.0,
            ..FaultSimParams::numerical(FaultType::InnerRace, 1.0, 0)
        };
        assert!(matches!(
            simulate_fault_signal(&params, &BearingSpec::skf_22240()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn simulation_is_deterministic() {
        let params = FaultSimParams {
            duration: 1.0,
            ..FaultSimParams::numerical(FaultType::RollingElement, 3.0, 99)
        };
        let spec = BearingSpec::skf_22240();
        let a = simulate_fault_signal(&params, &spec).unwrap();
        let b = simulate_fault_signal(&params, &spec).unwrap();
        assert!(a.samples.iter().zip(&b.samples).all(|(x, y)| x.to_bits() == y.to_bits()));
        let other = simulate_fault_signal(&FaultSimParams { rng_seed: 100, ..params }, &spec).unwrap();
        assert_ne!(a.samples, other.samples);
    }

    #[test]
    fn doubling_duration_extends_consistently() {
        // 100 Hz fault rate (T = 120 samples) with impulses dying out within a period
        let spec = BearingSpec {
            designation: "test".into(),
            bpfi_mult: 6.0,
            bpfo_mult: 4.0,
            bsf_mult: 1.0,
        };
        let base = FaultSimParams {
            fault_type: FaultType::InnerRace,
            amplitude_mean: 1.0,
            amplitude_jitter_frac: 0.0,
            decay_beta: 3000.0,
            resonance_fn: 2000.0,
            shaft_speed: 1000.0,
            sample_rate: 12_000.0,
            duration: 0.1,
            rng_seed: 1,
        };
        assert!((-3000.0f64 * 0.01).exp() < 1e-6);
        let short = simulate_fault_signal(&base, &spec).unwrap();
        let long = simulate_fault_signal(&FaultSimParams { duration: 0.2, ..base }, &spec).unwrap();
        assert_eq!(long.len(), 2 * short.len());
        let n = short.len();
        for k in 0..n {
            assert!((long.samples[k] - short.samples[k]).abs() < 1e-12);
        }
        // second half repeats the first half, away from the t=0 edge
        for k in 130..n {
            assert!((long.samples[k + n] - long.samples[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn huge_snr_leaves_signal_intact() {
        let params = FaultSimParams {
            duration: 0.5,
            ..FaultSimParams::numerical(FaultType::InnerRace, 1.0, 2)
        };
        let sig = simulate_fault_signal(&params, &BearingSpec::skf_22240()).unwrap();
        let noisy = add_awgn(&sig, 300.0, 5).unwrap();
        let rms = sig.power().sqrt();
        let dev = sig.samples.iter().zip(&noisy.samples).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-12 * rms);
    }

    #[test]
    fn zero_signal_has_undefined_snr() {
        let sig = Signal::new(vec![0.0; 100], 1000.0, None).unwrap();
        assert!(matches!(add_awgn(&sig, 10.0, 1), Err(Error::UndefinedSnr)));
        // the unit-power reference does not depend on the signal
        let noisy = add_awgn_with_reference(&sig, 10.0, SnrReference::UnitPower, 1).unwrap();
        assert!(noisy.power() > 0.0);
    }

    fn sine(n: usize) -> Signal {
        let samples = (0..n).map(|k| (k as f64 * 0.1).sin() * 3.0).collect();
        Signal::new(samples, 12_000.0, None).unwrap()
    }

    #[test]
    fn measured_snr_hits_target_on_long_signal() {
        let sig = sine(1_000_000);
        let noisy = add_awgn(&sig, 10.0, 77).unwrap();
        let noise: Vec<f64> = noisy.samples.iter().zip(&sig.samples).map(|(a, b)| a - b).collect();
        let snr = 10.0 * (sig.power() / mean_square(&noise)).log10();
        assert!((snr - 10.0).abs() < 0.2, "measured SNR {snr}");
    }

    #[test]
    fn unit_reference_noise_power() {
        let sig = sine(1_000_000);
        let noisy = add_awgn_with_reference(&sig, 1.0, SnrReference::UnitPower, 8).unwrap();
        let noise: Vec<f64> = noisy.samples.iter().zip(&sig.samples).map(|(a, b)| a - b).collect();
        let p = mean_square(&noise);
        assert!((10.0 * p.log10() + 1.0).abs() < 0.2, "noise power {p}");
    }

    #[test]
    fn noise_is_white() {
        let n = 200_000;
        let sig = Signal::new(vec![1.0; n], 1.0, None).unwrap();
        let noisy = add_awgn(&sig, 0.0, 123).unwrap();
        let noise: Vec<f64> = noisy.samples.iter().map(|x| x - 1.0).collect();
        let mean = noise.iter().sum::<f64>() / n as f64;
        let var = noise.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let bound = 5.0 / (n as f64).sqrt();
        for lag in 1..=10 {
            let c = (0..n - lag).map(|i| (noise[i] - mean) * (noise[i + lag] - mean)).sum::<f64>()
                / (n as f64 * var);
            assert!(c.abs() < bound, "lag {lag}: autocorrelation {c}");
        }
    }
}
