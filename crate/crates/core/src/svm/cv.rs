use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::ClassLabel;
use crate::seed;

use super::ecoc::ecoc_train;
use super::SvmConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

/// Stratified fold index per sample.
///
/// Each class is shuffled and dealt round-robin, continuing the rotation
/// from where the previous class stopped, so per-class and overall fold
/// sizes each differ by at most one.
pub fn stratified_folds(labels: &[ClassLabel], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidFold(format!("need at least 2 folds, got {folds}")));
    }
    let mut groups: BTreeMap<&ClassLabel, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut rng = seed::rng(seed, 0);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for (label, idx) in groups.iter_mut() {
        if idx.len() < folds {
            return Err(Error::InvalidFold(format!(
                "class {label} has {} samples, fewer than {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for &i in idx.iter() {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

/// k-fold CV of the ECOC model: trains on k-1 folds, scores the held-out one.
pub fn cross_validate(
    features: &[Vec<f64>],
    labels: &[ClassLabel],
    folds: usize,
    seed: u64,
    params: &SvmConfig,
) -> Result<CvReport> {
    let assignment = stratified_folds(labels, folds, seed)?;
    let mut fold_accuracies = Vec::with_capacity(folds);
    for fold in 0..folds {
        let (mut train_x, mut train_y, mut test_x, mut test_y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, &f) in assignment.iter().enumerate() {
            if f == fold {
                test_x.push(features[i].clone());
                test_y.push(labels[i].clone());
            } else {
                train_x.push(features[i].clone());
                train_y.push(labels[i].clone());
            }
        }
        let model = ecoc_train(&train_x, &train_y, params, params.coding, params.standardize)?;
        let correct = test_x
            .iter()
            .zip(&test_y)
            .filter(|(x, y)| &model.predict(x) == *y)
            .count();
        fold_accuracies.push(correct as f64 / test_x.len() as f64);
    }
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / folds as f64;
    Ok(CvReport {
        fold_accuracies,
        mean_accuracy,
    })
}
