//! Interpretation coefficients.
//!
//! For a centred sample `b` with features `F_j = b^T u_j`, the explained
//! fraction is `gamma = sum_j F_j^2 / b^T b` (at most 1 by Bessel's
//! inequality), and the interpretation coefficients
//! `theta_j = F_j^2 / (gamma b^T b)` give the share of the explained energy
//! carried by each eigen-spectrogram. They are non-negative and sum to one.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;
use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::label::ClassLabel;
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub struct InterpretationRecord {
    pub sample_id: usize,
    pub gamma: f64,
    pub thetas: Vec<f64>,
}

fn energy(b: &[f64]) -> Result<f64> {
    let e: f64 = b.iter().map(|x| x * x).sum();
    if e > 0.0 && e.is_finite() {
        Ok(e)
    } else {
        Err(Error::UndefinedInterpretation("sample has zero norm".into()))
    }
}

/// Explained fraction `sum_j F_j^2 / ||b||^2`.
pub fn gamma(b: &[f64], features: &[f64]) -> Result<f64> {
    let total = energy(b)?;
    let explained: f64 = features.iter().map(|f| f * f).sum();
    Ok(explained / total)
}

/// `theta_j = F_j^2 / (gamma ||b||^2)`.
pub fn thetas(b: &[f64], features: &[f64]) -> Result<Vec<f64>> {
    let g = gamma(b, features)?;
    if g <= 0.0 {
        return Err(Error::UndefinedInterpretation(
            "sample is orthogonal to every retained mode".into(),
        ));
    }
    // gamma ||b||^2 is the explained energy itself
    let explained: f64 = features.iter().map(|f| f * f).sum();
    Ok(features.iter().map(|f| f * f / explained).collect())
}

pub fn interpret_sample(sample_id: usize, b: &[f64], features: &[f64]) -> Result<InterpretationRecord> {
    Ok(InterpretationRecord {
        sample_id,
        gamma: gamma(b, features)?,
        thetas: thetas(b, features)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassMeanRow {
    pub class: ClassLabel,
    pub mean_thetas: Vec<f64>,
    pub mean_gamma: f64,
    pub n_samples: usize,
}

/// Per-class mean of theta vectors over at most `n_per_class` records drawn
/// without replacement. Classes with fewer records use all of them.
pub fn class_mean_report(
    groups: &BTreeMap<ClassLabel, Vec<InterpretationRecord>>,
    n_per_class: usize,
    seed: u64,
) -> Vec<ClassMeanRow> {
    let mut rows = Vec::new();
    for (class_index, (class, records)) in groups.iter().enumerate() {
        if records.is_empty() {
            warn!("class {class} has no interpretable samples; left out of the report");
            continue;
        }
        let take = n_per_class.min(records.len());
        if take < n_per_class {
            warn!("class {class}: {n_per_class} samples requested, using all {take}");
        }
        let mut rng = seed::rng(seed::derive_seed(seed, "explain", class_index as u64), 0);
        let mut picked = sample(&mut rng, records.len(), take).into_vec();
        picked.sort_unstable();

        let k = records[0].thetas.len();
        let mut mean_thetas = vec![0.0; k];
        let mut mean_gamma = 0.0;
        for &i in &picked {
            for (acc, t) in mean_thetas.iter_mut().zip(&records[i].thetas) {
                *acc += t;
            }
            mean_gamma += records[i].gamma;
        }
        mean_thetas.iter_mut().for_each(|t| *t /= take as f64);
        rows.push(ClassMeanRow {
            class: class.clone(),
            mean_thetas,
            mean_gamma: mean_gamma / take as f64,
            n_samples: take,
        });
    }
    rows
}

/// `class,theta_1,...,theta_k,mean_gamma,n_samples`
pub fn report_csv(rows: &[ClassMeanRow]) -> String {
    let k = rows.first().map_or(0, |r| r.mean_thetas.len());
    let mut out = String::from("class");
    for j in 1..=k {
        let _ = write!(out, ",theta_{j}");
    }
    out.push_str(",mean_gamma,n_samples\n");
    for row in rows {
        out.push_str(&row.class.to_string());
        for t in &row.mean_thetas {
            let _ = write!(out, ",{t}");
        }
        let _ = writeln!(out, ",{},{}", row.mean_gamma, row.n_samples);
    }
    out
}
