//! Randomized PCA of the spectrogram dataset ("eigen-spectrograms").
//!
//! The training matrix `X` (pixels x samples) is mean-centred into `B`, a
//! Gaussian sketch `Z = B P` captures its column space, `Q` is an
//! orthonormal basis of `Z` from a QR factorization, the small matrix
//! `Y = Q^T B` is decomposed exactly, and the left singular vectors are
//! lifted back as `U = Q U_Y`. The leading columns of `U`, reshaped as
//! images, are the eigen-spectrograms; the features of a sample are its
//! coordinates `b^T u_j` in that basis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::ClassLabel;
use crate::linalg::{gemm_nn, gemm_tn, jacobi_svd, orthonormal_basis};
use crate::seed;
use crate::spectrogram::{DatasetMatrix, SpectrogramImage, IMAGE_PIXELS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RsvdConfig {
    pub target_rank: usize,
    pub oversampling: usize,
    pub power_iterations: usize,
    pub retained_components: usize,
    pub rng_seed: u64,
}

impl Default for RsvdConfig {
    fn default() -> Self {
        RsvdConfig {
            target_rank: 110,
            oversampling: 0,
            power_iterations: 0,
            retained_components: 4,
            rng_seed: 0,
        }
    }
}

impl RsvdConfig {
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        let limit = n.min(m);
        if self.target_rank == 0 || self.retained_components == 0 {
            return Err(Error::InvalidRank("rank and retained components must be positive".into()));
        }
        if self.retained_components > self.target_rank {
            return Err(Error::InvalidRank(format!(
                "retained components {} exceed target rank {}",
                self.retained_components, self.target_rank
            )));
        }
        if self.target_rank + self.oversampling > limit {
            return Err(Error::InvalidRank(format!(
                "rank {} + oversampling {} exceeds min(n, m) = {limit}",
                self.target_rank, self.oversampling
            )));
        }
        Ok(())
    }
}

/// Truncated factorization `B ~ U diag(s) V^T`.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl Factorization {
    fn truncate(mut self, r: usize) -> Self {
        let r = r.min(self.singular_values.len());
        self.u = self.u.columns(0, r).into_owned();
        self.v = self.v.columns(0, r).into_owned();
        self.singular_values.truncate(r);
        self
    }

    /// Flips each pair `(u_j, v_j)` so the largest-magnitude entry of `u_j`
    /// is positive.
    fn fix_signs(mut self) -> Self {
        for j in 0..self.u.ncols() {
            let col = self.u.column(j);
            let pivot = col.iamax();
            if col[pivot] < 0.0 {
                self.u.column_mut(j).neg_mut();
                self.v.column_mut(j).neg_mut();
            }
        }
        self
    }
}

/// Row-wise mean `s` and the centred matrix `B = X - s 1^T`, computed in
/// place.
pub fn mean_center(mut x: DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if x.ncols() < 2 {
        return Err(Error::InvalidDataset(format!(
            "mean centring needs at least 2 columns, got {}",
            x.ncols()
        )));
    }
    let mean = column_mean(&x);
    for mut col in x.column_iter_mut() {
        col -= &mean;
    }
    Ok((x, mean))
}

fn column_mean(x: &DMatrix<f64>) -> DVector<f64> {
    let mut sum = DVector::zeros(x.nrows());
    for col in x.column_iter() {
        sum += col;
    }
    sum / x.ncols() as f64
}

/// Randomized SVD returning the leading `target_rank` triplets.
pub fn rsvd(b: &DMatrix<f64>, cfg: &RsvdConfig) -> Result<Factorization> {
    let (n, m) = b.shape();
    cfg.validate(n, m)?;
    let width = cfg.target_rank + cfg.oversampling;

    let mut rng = seed::rng(cfg.rng_seed, 0);
    let p = DMatrix::from_fn(m, width, |_, _| rng.sample::<f64, _>(StandardNormal));

    let mut q = orthonormal_basis(gemm_nn(b, &p));
    for _ in 0..cfg.power_iterations {
        let w = orthonormal_basis(gemm_tn(b, &q));
        q = orthonormal_basis(gemm_nn(b, &w));
    }

    let y = gemm_tn(&q, b);
    let small = jacobi_svd(&y);
    let u = gemm_nn(&q, &small.u);
    Ok(Factorization {
        u,
        singular_values: small.singular_values.iter().cloned().collect(),
        v: small.v,
    }
    .truncate(cfg.target_rank)
    .fix_signs())
}

/// Deterministic thin SVD of the whole matrix.
///
/// Small matrices go through the Jacobi SVD. Larger ones use the snapshot
/// method: the eigendecomposition of the `min(n, m)`-square Gram matrix
/// gives `V` and `s^2`, and `U = B V / s`. Only numerically nonzero triplets
/// are returned in that case.
pub fn exact_svd(b: &DMatrix<f64>) -> Factorization {
    let (n, m) = b.shape();
    if n.max(m) <= 2000 {
        let svd = jacobi_svd(b);
        return Factorization {
            u: svd.u,
            singular_values: svd.singular_values.iter().cloned().collect(),
            v: svd.v,
        }
        .fix_signs();
    }
    if n < m {
        let t = exact_svd(&b.transpose());
        return Factorization {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        }
        .fix_signs();
    }
    let gram = gemm_tn(b, b);
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let lambda_max = eig.eigenvalues[order[0]].max(0.0);
    let cutoff = lambda_max * f64::EPSILON * m as f64;
    let kept: Vec<usize> = order.into_iter().filter(|&i| eig.eigenvalues[i] > cutoff).collect();

    let mut v = DMatrix::zeros(m, kept.len());
    let mut sigma = Vec::with_capacity(kept.len());
    for (dst, &src) in kept.iter().enumerate() {
        v.set_column(dst, &eig.eigenvectors.column(src));
        sigma.push(eig.eigenvalues[src].sqrt());
    }
    let mut u = gemm_nn(b, &v);
    for (j, s) in sigma.iter().enumerate() {
        u.column_mut(j).unscale_mut(*s);
    }
    Factorization {
        u,
        singular_values: sigma,
        v,
    }
    .fix_signs()
}

/// Residuals `||B B^T u_j - s_j^2 u_j|| / s_j^2` per mode, computed as
/// `B (B^T u_j)`. Modes with a numerically zero singular value are skipped.
pub fn eigenproblem_check(b: &DMatrix<f64>, u: &DMatrix<f64>, singular_values: &[f64]) -> Vec<(usize, f64)> {
    let sigma_max = singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = sigma_max * f64::EPSILON * b.nrows().max(b.ncols()) as f64;
    let live: Vec<usize> = (0..singular_values.len().min(u.ncols()))
        .filter(|&j| singular_values[j] > cutoff && singular_values[j] > 0.0)
        .collect();
    if live.is_empty() {
        return Vec::new();
    }
    let mut modes = DMatrix::zeros(u.nrows(), live.len());
    for (dst, &j) in live.iter().enumerate() {
        modes.set_column(dst, &u.column(j));
    }
    let cu = gemm_nn(b, &gemm_tn(b, &modes));
    live.iter()
        .enumerate()
        .map(|(dst, &j)| {
            let s2 = singular_values[j] * singular_values[j];
            let residual = cu.column(dst) - modes.column(dst) * s2;
            (j, residual.norm() / s2)
        })
        .collect()
}

/// Mean image and retained eigen-spectrograms.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenBasis {
    pub mean: DVector<f64>,
    /// n x k, orthonormal columns.
    pub modes: DMatrix<f64>,
    pub singular_values: Vec<f64>,
}

/// Keeps the first `k` modes of a factorization.
pub fn truncate_basis(mean: DVector<f64>, fact: &Factorization, k: usize) -> Result<EigenBasis> {
    if k == 0 || k > fact.singular_values.len() {
        return Err(Error::InvalidRank(format!(
            "cannot keep {k} of {} components",
            fact.singular_values.len()
        )));
    }
    if mean.len() != fact.u.nrows() {
        return Err(Error::Shape {
            expected: format!("mean of length {}", fact.u.nrows()),
            actual: format!("{}", mean.len()),
        });
    }
    Ok(EigenBasis {
        mean,
        modes: fact.u.columns(0, k).into_owned(),
        singular_values: fact.singular_values[..k].to_vec(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaMethod {
    #[default]
    Randomized,
    Exact,
}

impl EigenBasis {
    /// Centres the training matrix, factorizes it and keeps
    /// `cfg.retained_components` modes. Returns the basis with the training
    /// features `T = B^T U`.
    pub fn fit(x: DMatrix<f64>, cfg: &RsvdConfig, method: PcaMethod) -> Result<(EigenBasis, DMatrix<f64>)> {
        let (n, m) = x.shape();
        cfg.validate(n, m)?;
        let (b, mean) = mean_center(x)?;
        let fact = match method {
            PcaMethod::Randomized => rsvd(&b, cfg)?,
            PcaMethod::Exact => exact_svd(&b),
        };
        let basis = truncate_basis(mean, &fact, cfg.retained_components)?;
        let features = project_features(&b, &basis)?;
        Ok((basis, features))
    }

    pub fn n(&self) -> usize {
        self.modes.nrows()
    }

    pub fn k(&self) -> usize {
        self.modes.ncols()
    }

    /// Features of raw (uncentred) columns, centred with the training mean:
    /// `(X - s 1^T)^T U = X^T U - 1 (s^T U)`.
    pub fn project_raw(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(x.nrows())?;
        let mut f = gemm_tn(x, &self.modes);
        let offset = self.modes.tr_mul(&self.mean);
        for mut row in f.row_iter_mut() {
            row -= offset.transpose();
        }
        Ok(f)
    }

    pub fn center(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_rows(x.len())?;
        Ok(DVector::from_column_slice(x) - &self.mean)
    }

    /// `U t^T`, the projection of a centred sample onto the basis span.
    pub fn reconstruct(&self, features: &[f64]) -> DVector<f64> {
        &self.modes * DVector::from_column_slice(features)
    }

    /// Mode `j` as a min-max normalized image (brightest = largest entry).
    pub fn mode_image(&self, j: usize) -> Result<SpectrogramImage> {
        if self.n() != IMAGE_PIXELS {
            return Err(Error::Shape {
                expected: format!("{IMAGE_PIXELS}-pixel modes"),
                actual: format!("{}", self.n()),
            });
        }
        SpectrogramImage::from_values(self.modes.column(j).as_slice(), None)
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.n() {
            return Err(Error::Shape {
                expected: format!("columns of length {}", self.n()),
                actual: format!("{rows}"),
            });
        }
        Ok(())
    }
}

/// `F = B^T U`: row `i` holds `<b_i, u_j>` for each mode `j`.
pub fn project_features(b: &DMatrix<f64>, basis: &EigenBasis) -> Result<DMatrix<f64>> {
    basis.check_rows(b.nrows())?;
    Ok(gemm_tn(b, &basis.modes))
}

/// Per-sample coordinates in the eigen-spectrogram basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    /// m x k
    pub features: DMatrix<f64>,
    pub labels: Vec<ClassLabel>,
}

impl FeatureMatrix {
    pub fn new(features: DMatrix<f64>, labels: Vec<ClassLabel>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Shape {
                expected: format!("{} labels", features.nrows()),
                actual: format!("{}", labels.len()),
            });
        }
        Ok(FeatureMatrix { features, labels })
    }

    /// Projects a raw dataset using the training mean of `basis`.
    pub fn from_dataset(ds: &DatasetMatrix, basis: &EigenBasis) -> Result<Self> {
        Self::new(basis.project_raw(&ds.data)?, ds.labels.clone())
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.features.row_iter().map(|r| r.iter().cloned().collect()).collect()
    }
}
