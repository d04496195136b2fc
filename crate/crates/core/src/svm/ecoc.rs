use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::ClassLabel;

use super::smo::{train_binary, BinarySvmModel};
use super::SvmConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coding {
    OneVsOne,
    OneVsAll,
}

/// Classes x learners matrix with entries in {-1, 0, +1}.
pub fn coding_matrix(n_classes: usize, coding: Coding) -> Vec<Vec<i8>> {
    match coding {
        Coding::OneVsOne => {
            let mut rows = vec![Vec::new(); n_classes];
            for a in 0..n_classes {
                for b in a + 1..n_classes {
                    for (c, row) in rows.iter_mut().enumerate() {
                        row.push(if c == a {
                            1
                        } else if c == b {
                            -1
                        } else {
                            0
                        });
                    }
                }
            }
            rows
        }
        Coding::OneVsAll => (0..n_classes)
            .map(|c| (0..n_classes).map(|l| if l == c { 1 } else { -1 }).collect())
            .collect(),
    }
}

pub(crate) fn validate_coding(m: &[Vec<i8>]) -> Result<()> {
    let learners = m.first().map_or(0, |r| r.len());
    if m.iter().any(|r| r.len() != learners) {
        return Err(Error::InvalidArgument("ragged coding matrix".into()));
    }
    for (i, a) in m.iter().enumerate() {
        if a.iter().any(|v| !(-1..=1).contains(v)) {
            return Err(Error::InvalidArgument("coding entries must be -1, 0 or +1".into()));
        }
        if m[i + 1..].iter().any(|b| b == a) {
            return Err(Error::InvalidArgument(format!("coding row {i} is duplicated")));
        }
    }
    for col in 0..learners {
        let has_pos = m.iter().any(|r| r[col] == 1);
        let has_neg = m.iter().any(|r| r[col] == -1);
        if !(has_pos && has_neg) {
            return Err(Error::InvalidArgument(format!("coding column {col} lacks a +1 or -1")));
        }
    }
    Ok(())
}

/// Per-feature z-scoring fitted on training rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, |r| r.len());
        let n = rows.len().max(1) as f64;
        let mean: Vec<f64> = (0..dim).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let std = (0..dim)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                // a constant feature is left unscaled
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EcocSvmModel {
    pub classes: Vec<ClassLabel>,
    pub coding: Vec<Vec<i8>>,
    pub learners: Vec<BinarySvmModel>,
    pub standardizer: Option<Standardizer>,
}

impl EcocSvmModel {
    pub fn feature_dim(&self) -> Option<usize> {
        self.learners
            .iter()
            .flat_map(|l| l.support_vectors.first())
            .map(|sv| sv.len())
            .next()
    }

    pub fn predict(&self, x: &[f64]) -> ClassLabel {
        ecoc_predict(self, x).0
    }

    pub fn class_index(&self, label: &ClassLabel) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }
}

/// One binary learner per coding column; classes coded 0 in a column sit
/// out of that learner's training set.
pub fn ecoc_train(
    features: &[Vec<f64>],
    labels: &[ClassLabel],
    params: &SvmConfig,
    coding: Coding,
    standardize: bool,
) -> Result<EcocSvmModel> {
    if features.len() != labels.len() {
        return Err(Error::Shape {
            expected: format!("{} labels", features.len()),
            actual: format!("{}", labels.len()),
        });
    }
    let mut classes: Vec<ClassLabel> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::DegenerateProblem(format!(
            "multiclass training needs at least 2 classes, got {}",
            classes.len()
        )));
    }
    let standardizer = standardize.then(|| Standardizer::fit(features));
    let scaled: Vec<Vec<f64>> = match &standardizer {
        Some(s) => features.iter().map(|x| s.apply(x)).collect(),
        None => features.to_vec(),
    };
    let class_of: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label is in the class list"))
        .collect();

    let m = coding_matrix(classes.len(), coding);
    validate_coding(&m)?;
    let n_learners = m[0].len();
    let mut learners = Vec::with_capacity(n_learners);
    #[allow(clippy::needless_range_loop)]
    for col in 0..n_learners {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (row, &c) in scaled.iter().zip(&class_of) {
            let code = m[c][col];
            if code != 0 {
                x.push(row.clone());
                y.push(code as f64);
            }
        }
        let learner = train_binary(&x, &y, params).map_err(|e| Error::Learner {
            index: col,
            source: Box::new(e),
        })?;
        learners.push(learner);
    }
    Ok(EcocSvmModel {
        classes,
        coding: m,
        learners,
        standardizer,
    })
}

/// `max(0, 1 - z)`
fn hinge(z: f64) -> f64 {
    (1.0 - z).max(0.0)
}

/// Loss-weighted decoding: class `c` scores the mean hinge loss of
/// `M[c, l] f_l(x)` over its nonzero code entries. The lowest loss wins,
/// ties going to the earlier class.
pub fn ecoc_predict(model: &EcocSvmModel, x: &[f64]) -> (ClassLabel, Vec<f64>) {
    let scaled;
    let x = match &model.standardizer {
        Some(s) => {
            scaled = s.apply(x);
            &scaled[..]
        }
        None => x,
    };
    let scores: Vec<f64> = model.learners.iter().map(|l| l.decision(x)).collect();
    let losses: Vec<f64> = model
        .coding
        .iter()
        .map(|row| {
            let (sum, count) = row
                .iter()
                .zip(&scores)
                .filter(|(code, _)| **code != 0)
                .fold((0.0, 0usize), |(s, n), (code, f)| (s + hinge(*code as f64 * f), n + 1));
            sum / count as f64
        })
        .collect();
    let mut best = 0;
    for (c, &loss) in losses.iter().enumerate() {
        if loss < losses[best] {
            best = c;
        }
    }
    (model.classes[best].clone(), losses)
}
