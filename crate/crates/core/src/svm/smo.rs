//! SMO solver for the soft-margin SVM dual
//!
//! ```text
//! min_a  1/2 a^T Q a - e^T a   s.t.  y^T a = 0,  0 <= a_i <= C
//! Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! Two multipliers are updated per step. The pair is chosen with the
//! second-order working-set rule of Fan, Chen & Lin (2005): the maximal
//! violator `i`, then the `j` promising the largest decrease of the
//! objective. Iteration stops once the maximal KKT violation gap drops below
//! `tol`.

use std::borrow::Cow;

use crate::error::{Error, Result};

use super::{KernelSpec, SvmConfig};

const TAU: f64 = 1e-12;
/// Above this many samples kernel rows are recomputed instead of cached.
const GRAM_CACHE_LIMIT: usize = 5000;

#[derive(Clone, Debug, PartialEq)]
pub struct BinarySvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub cost: f64,
}

impl BinarySvmModel {
    /// `f(x) = sum_i alpha_i y_i K(x_i, x) + b`
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coeffs)
            .map(|(sv, c)| c * self.kernel.apply(sv, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.decision(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Final maximal violation gap `m(a) - M(a)`.
    pub gap: f64,
    pub iterations: usize,
}

enum KernelRows<'a> {
    Cached { n: usize, values: Vec<f64> },
    OnDemand { x: &'a [Vec<f64>], kernel: KernelSpec },
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [Vec<f64>], kernel: KernelSpec) -> Self {
        let n = x.len();
        if n > GRAM_CACHE_LIMIT {
            return KernelRows::OnDemand { x, kernel };
        }
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let k = kernel.apply(&x[i], &x[j]);
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        KernelRows::Cached { n, values }
    }

    fn row(&self, i: usize) -> Cow<'_, [f64]> {
        match self {
            KernelRows::Cached { n, values } => Cow::Borrowed(&values[i * n..(i + 1) * n]),
            KernelRows::OnDemand { x, kernel } => {
                Cow::Owned(x.iter().map(|xj| kernel.apply(&x[i], xj)).collect())
            }
        }
    }
}

fn check_problem(x: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape {
            expected: format!("{} labels", x.len()),
            actual: format!("{}", y.len()),
        });
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidArgument(format!("binary labels must be +1/-1, got {bad}")));
    }
    let dim = x.first().map_or(0, |r| r.len());
    if x.iter().any(|r| r.len() != dim) {
        return Err(Error::Shape {
            expected: format!("rows of length {dim}"),
            actual: "ragged rows".into(),
        });
    }
    let positives = y.iter().filter(|&&v| v > 0.0).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::DegenerateProblem(
            "training labels contain a single class".into(),
        ));
    }
    Ok(())
}

pub fn solve_dual(x: &[Vec<f64>], y: &[f64], params: &SvmConfig) -> Result<DualSolution> {
    params.validate()?;
    check_problem(x, y)?;
    let n = x.len();
    let c = params.cost;
    let rows = KernelRows::new(x, params.kernel);
    let diag: Vec<f64> = (0..n).map(|i| params.kernel.apply(&x[i], &x[i])).collect();

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let gap = loop {
        // i: maximal violator over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if in_up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else { break 0.0 };
        let k_i = rows.row(i);

        // j: best second-order decrease over I_low; gmax2 = -M(a)
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let g_t = y[t] * grad[t];
            gmax2 = gmax2.max(g_t);
            let grad_diff = gmax + g_t;
            if grad_diff > 0.0 {
                let mut quad = diag[i] + diag[t] - 2.0 * k_i[t];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        let gap = gmax + gmax2;
        let Some(j) = j_sel else { break gap };
        if gap <= params.tol {
            break gap;
        }
        if iterations >= params.max_iter {
            return Err(Error::NonConvergence { iterations, gap });
        }
        iterations += 1;

        let k_j = rows.row(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * k_i[j];
        if y[i] != y[j] {
            let mut quad = diag[i] + diag[j] + 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = diag[i] + diag[j] - 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (d_i, d_j) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k_i[t] * d_i + y[j] * k_j[t] * d_j);
        }
    };

    let bias = bias_from_gradient(&alpha, &grad, y, c);
    Ok(DualSolution {
        alpha,
        bias,
        gap,
        iterations,
    })
}

/// Mean of `-y_i G_i` over free multipliers, or the midpoint of the
/// feasible interval when every multiplier sits at a bound.
fn bias_from_gradient(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..alpha.len() {
        let g = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += g;
            free += 1;
            continue;
        }
        let at_upper = alpha[t] >= c;
        // points in I_up bound b from below, points in I_low from above
        let in_up = if y[t] > 0.0 { !at_upper } else { at_upper };
        if in_up {
            lb = lb.max(g);
        } else {
            ub = ub.min(g);
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else if lb.is_finite() && ub.is_finite() {
        (lb + ub) / 2.0
    } else if lb.is_finite() {
        lb
    } else {
        ub
    }
}

/// Trains a binary machine. Labels must be +1/-1 with both present.
pub fn train_binary(x: &[Vec<f64>], y: &[f64], params: &SvmConfig) -> Result<BinarySvmModel> {
    let sol = solve_dual(x, y, params)?;
    let mut support_vectors = Vec::new();
    let mut dual_coeffs = Vec::new();
    for (t, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x[t].clone());
            dual_coeffs.push(a * y[t]);
        }
    }
    Ok(BinarySvmModel {
        support_vectors,
        dual_coeffs,
        bias: sol.bias,
        kernel: params.kernel,
        cost: params.cost,
    })
}

/// Largest violation of the KKT conditions
///
/// `a_i = 0 => y_i f(x_i) >= 1`, `0 < a_i < C => y_i f(x_i) = 1`,
/// `a_i = C => y_i f(x_i) <= 1`.
pub fn kkt_violation(x: &[Vec<f64>], y: &[f64], alpha: &[f64], bias: f64, cost: f64, kernel: &KernelSpec) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let f: f64 = (0..x.len())
            .filter(|&j| alpha[j] != 0.0)
            .map(|j| alpha[j] * y[j] * kernel.apply(&x[j], &x[i]))
            .sum::<f64>()
            + bias;
        let margin = y[i] * f;
        let violation = if alpha[i] <= 0.0 {
            1.0 - margin
        } else if alpha[i] >= cost {
            margin - 1.0
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(violation);
    }
    worst
}
