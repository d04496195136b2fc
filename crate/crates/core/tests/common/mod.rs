//! Independent oracles shared by the integration tests and the acceptance
//! runner. Nothing here calls into the solvers under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `(x . z + offset)^degree`, written out independently of the crate.
pub fn poly_kernel(x: &[f64], z: &[f64], degree: i32, offset: f64) -> f64 {
    let dot: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
    (dot + offset).powi(degree)
}

/// Global optimum of the soft-margin dual found by enumerating every
/// active set. `bias` is exact when some multiplier is strictly between the
/// bounds; otherwise any value in `[bias_lo, bias_hi]` is optimal.
#[derive(Clone, Debug)]
pub struct DualOracle {
    pub alpha: Vec<f64>,
    pub bias_lo: f64,
    pub bias_hi: f64,
    pub objective: f64,
}

impl DualOracle {
    /// `sum_j alpha_j y_j K(x_j, z)`, the bias-free part of the decision.
    pub fn kernel_part(&self, x: &[Vec<f64>], y: &[f64], z: &[f64], k: &dyn Fn(&[f64], &[f64]) -> f64) -> f64 {
        (0..x.len()).map(|j| self.alpha[j] * y[j] * k(&x[j], z)).sum()
    }
}

pub fn brute_force_dual(x: &[Vec<f64>], y: &[f64], cost: f64, k: &dyn Fn(&[f64], &[f64]) -> f64) -> Option<DualOracle> {
    let n = x.len();
    let gram = DMatrix::from_fn(n, n, |i, j| k(&x[i], &x[j]));
    let tol = 1e-9 * cost.max(1.0);
    let mut best: Option<DualOracle> = None;

    // state per multiplier: 0 = at zero, 1 = at C, 2 = free
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut state = vec![0u8; n];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { cost } else { 0.0 }).collect();
        let mut bias = None;

        if !free.is_empty() {
            // y_i (g_i + b) = 1 on the free set, sum alpha_i y_i = 0
            let f = free.len();
            let mut a = DMatrix::zeros(f + 1, f + 1);
            let mut rhs = DVector::zeros(f + 1);
            for (r, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    a[(r, c)] = y[j] * gram[(i, j)];
                }
                a[(r, f)] = 1.0;
                let fixed: f64 = (0..n).filter(|&j| state[j] == 1).map(|j| cost * y[j] * gram[(i, j)]).sum();
                rhs[r] = y[i] - fixed;
            }
            for (c, &j) in free.iter().enumerate() {
                a[(f, c)] = y[j];
            }
            rhs[f] = -(0..n).filter(|&j| state[j] == 1).map(|j| cost * y[j]).sum::<f64>();
            let sol = match a.lu().solve(&rhs) {
                Some(s) if s.iter().all(|v| v.is_finite()) => s,
                _ => continue,
            };
            if free.iter().enumerate().any(|(r, _)| sol[r] <= tol || sol[r] >= cost - tol) {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r];
            }
            bias = Some(sol[f]);
        } else if alpha.iter().zip(y).map(|(a, y)| a * y).sum::<f64>().abs() > tol {
            continue;
        }

        let g: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| alpha[j] * y[j] * gram[(i, j)]).sum())
            .collect();
        // remaining KKT conditions as bounds on b
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            match state[i] {
                // y_i (g_i + b) >= 1
                0 => {
                    if y[i] > 0.0 {
                        lo = lo.max(1.0 - g[i]);
                    } else {
                        hi = hi.min(-1.0 - g[i]);
                    }
                }
                // y_i (g_i + b) <= 1
                1 => {
                    if y[i] > 0.0 {
                        hi = hi.min(1.0 - g[i]);
                    } else {
                        lo = lo.max(-1.0 - g[i]);
                    }
                }
                _ => {}
            }
        }
        let slack = 1e-7;
        let (bias_lo, bias_hi) = match bias {
            Some(b) if b >= lo - slack && b <= hi + slack => (b, b),
            Some(_) => continue,
            None if lo <= hi + slack => (lo, hi),
            None => continue,
        };
        let objective = alpha.iter().sum::<f64>()
            - 0.5 * (0..n).map(|i| alpha[i] * y[i] * g[i]).sum::<f64>();
        if best.as_ref().is_none_or(|b| objective > b.objective) {
            best = Some(DualOracle {
                alpha,
                bias_lo,
                bias_hi,
                objective,
            });
        }
    }
    best
}

/// Binary training set for the dual oracle: at most 8 points, at most 3
/// dimensions, and few enough points that the quadratic feature map keeps
/// the Gram matrix nonsingular.
pub fn qp_instance(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let mut rng = rng(seed);
    let dim = 1 + (seed % 3) as usize;
    let max_n = [3, 6, 8][dim - 1];
    let n = rng.random_range(2..=max_n);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let mut y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[1] = -1.0;
    let cost = [0.5, 1.0, 10.0][rng.random_range(0..3)];
    (x, y, cost)
}

/// `U diag(s) V^T` with Haar-like random orthonormal factors and
/// `s_j = scale * decay^j`.
pub fn planted_matrix(rows: usize, cols: usize, decay: f64, scale: f64, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, Vec<f64>) {
    let r = rows.min(cols);
    let u = gaussian(rows, r, rng).qr().q();
    let v = gaussian(cols, r, rng).qr().q();
    let s: Vec<f64> = (0..r).map(|j| scale * decay.powi(j as i32)).collect();
    let a = &u * DMatrix::from_diagonal(&DVector::from_vec(s.clone())) * v.transpose();
    (a, s)
}

/// Principal angles between the column spans of two orthonormal bases.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let m = a.transpose() * b;
    m.svd(false, false)
        .singular_values
        .iter()
        .map(|c| c.clamp(-1.0, 1.0).acos())
        .collect()
}

/// Leading `k` left singular vectors and values by nalgebra's SVD.
pub fn reference_svd(a: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let svd = a.clone().svd(true, false);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let u = svd.u.expect("requested U");
    let mut top = DMatrix::zeros(a.nrows(), k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        top.set_column(dst, &u.column(src));
    }
    (top, order.iter().take(k).map(|&i| svd.singular_values[i]).collect())
}
