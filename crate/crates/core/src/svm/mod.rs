//! Kernel SVM classification of eigen-spectrogram features.
//!
//! Binary soft-margin machines are trained with an SMO dual solver
//! ([`smo`]), combined into a multiclass model by error-correcting output
//! codes ([`ecoc`]) and validated by stratified k-fold CV ([`cv`]).

pub mod cv;
pub mod ecoc;
pub mod smo;

pub use cv::{cross_validate, stratified_folds, CvReport};
pub use ecoc::{coding_matrix, ecoc_predict, ecoc_train, Coding, EcocSvmModel, Standardizer};
pub use smo::{kkt_violation, solve_dual, train_binary, BinarySvmModel, DualSolution};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Polynomial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub degree: u32,
    pub offset: f64,
}

impl KernelSpec {
    /// `(x . z + 1)^2`
    pub fn quadratic() -> Self {
        KernelSpec {
            kind: KernelKind::Polynomial,
            degree: 2,
            offset: 1.0,
        }
    }

    pub fn linear() -> Self {
        KernelSpec {
            kind: KernelKind::Linear,
            degree: 1,
            offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == KernelKind::Polynomial {
            if self.degree < 1 {
                return Err(Error::InvalidArgument("polynomial degree must be at least 1".into()));
            }
            if !(self.offset.is_finite() && self.offset >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "polynomial offset must be non-negative, got {}",
                    self.offset
                )));
            }
        }
        Ok(())
    }

    /// Kernel value without the dimension check.
    #[inline]
    pub(crate) fn apply(&self, x: &[f64], z: &[f64]) -> f64 {
        let dot: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
        match self.kind {
            KernelKind::Linear => dot,
            KernelKind::Polynomial => (dot + self.offset).powi(self.degree as i32),
        }
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::quadratic()
    }
}

pub fn kernel_eval(x: &[f64], z: &[f64], spec: &KernelSpec) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::Shape {
            expected: format!("vector of length {}", x.len()),
            actual: format!("{}", z.len()),
        });
    }
    Ok(spec.apply(x, z))
}

/// Solver and multiclass settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub cost: f64,
    pub kernel: KernelSpec,
    pub tol: f64,
    pub max_iter: usize,
    pub coding: Coding,
    pub standardize: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            cost: 1.0,
            kernel: KernelSpec::quadratic(),
            tol: 1e-3,
            max_iter: 1_000_000,
            coding: Coding::OneVsOne,
            standardize: false,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cost.is_finite() && self.cost > 0.0) {
            return Err(Error::InvalidArgument(format!("cost must be positive, got {}", self.cost)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("iteration cap must be positive".into()));
        }
        self.kernel.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_kernel_values() {
        let k = KernelSpec::quadratic();
        assert_eq!(kernel_eval(&[1.0, 0.0], &[0.0, 5.0], &k).unwrap(), 1.0);
        assert_eq!(kernel_eval(&[1.0; 4], &[1.0; 4], &k).unwrap(), 25.0);
        assert_eq!(kernel_eval(&[2.0, 3.0], &[4.0, -1.0], &KernelSpec::linear()).unwrap(), 5.0);
        assert!(matches!(kernel_eval(&[1.0], &[1.0, 2.0], &k), Err(Error::Shape { .. })));
    }

    #[test]
    fn kernel_spec_validation() {
        assert!(KernelSpec { offset: -1.0, ..KernelSpec::quadratic() }.validate().is_err());
        assert!(KernelSpec { degree: 0, ..KernelSpec::quadratic() }.validate().is_err());
        assert!(KernelSpec::linear().validate().is_ok());
    }

    #[test]
    fn gram_matrix_is_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for spec in [KernelSpec::quadratic(), KernelSpec::linear()] {
            let pts: Vec<Vec<f64>> = (0..10).map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let gram = DMatrix::from_fn(10, 10, |i, j| kernel_eval(&pts[i], &pts[j], &spec).unwrap());
            assert_eq!(gram, gram.transpose());
            let min_eig = gram.symmetric_eigenvalues().min();
            assert!(min_eig >= -1e-10 * gram.amax(), "min eigenvalue {min_eig}");
        }
    }
}
