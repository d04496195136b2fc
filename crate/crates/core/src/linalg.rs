//! Dense kernels shared by the PCA code: strided GEMM, thin orthonormal
//! bases, and a one-sided Jacobi SVD.

use nalgebra::{DMatrix, DVector};

/// `a^T b` without materializing the transpose.
pub fn gemm_tn(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows(), "gemm_tn: inner dimensions differ");
    let (k, m, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut c = DMatrix::zeros(m, n);
    if k == 0 || m == 0 || n == 0 {
        return c;
    }
    // SAFETY: the pointers cover column-major buffers of the stated shapes
    // and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            1,
            m as isize,
        );
    }
    c
}

/// `a b`.
pub fn gemm_nn(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows(), "gemm_nn: inner dimensions differ");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut c = DMatrix::zeros(m, n);
    if k == 0 || m == 0 || n == 0 {
        return c;
    }
    // SAFETY: as in `gemm_tn`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            1,
            m as isize,
        );
    }
    c
}

/// Orthonormal basis `Q` (same shape as `z`) of the column space of a tall
/// matrix, from a Householder QR.
pub fn orthonormal_basis(z: DMatrix<f64>) -> DMatrix<f64> {
    debug_assert!(z.nrows() >= z.ncols());
    z.qr().q()
}

/// Thin SVD `a = u diag(s) v^T` with `s` sorted non-increasing.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        &us * self.v.transpose()
    }
}

const JACOBI_MAX_SWEEPS: usize = 60;

/// One-sided (Hestenes) Jacobi SVD.
///
/// Rotates column pairs of the working matrix until all pairs are
/// orthogonal to machine precision, so small singular values keep high
/// relative accuracy. Works on the transpose when `a` is wide. Left vectors
/// belonging to numerically zero singular values are replaced by an
/// orthonormal completion.
pub fn jacobi_svd(a: &DMatrix<f64>) -> ThinSvd {
    if a.nrows() < a.ncols() {
        let t = jacobi_svd(&a.transpose());
        return ThinSvd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    let (rows, cols) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(cols, cols);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (alpha, beta, gamma) = {
                    let cp = w.column(p);
                    let cq = w.column(q);
                    (cp.norm_squared(), cq.norm_squared(), cp.dot(&cq))
                };
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..cols).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let sigma_max = norms.iter().cloned().fold(0.0, f64::max);
    let cutoff = sigma_max * f64::EPSILON * rows.max(cols) as f64;
    let mut u = DMatrix::zeros(rows, cols);
    let mut s = DVector::zeros(cols);
    let mut v_sorted = DMatrix::zeros(cols, cols);
    let mut degenerate = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        s[dst] = norms[src];
        v_sorted.set_column(dst, &v.column(src));
        if norms[src] > cutoff && norms[src] > 0.0 {
            u.set_column(dst, &(w.column(src) / norms[src]));
        } else {
            degenerate.push(dst);
        }
    }
    complete_orthonormal(&mut u, &degenerate);
    ThinSvd {
        u,
        singular_values: s,
        v: v_sorted,
    }
}

fn rotate_columns(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let rows = m.nrows();
    let data = m.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * rows);
    let cp = &mut head[p * rows..(p + 1) * rows];
    let cq = &mut tail[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to every
/// other column, using Gram-Schmidt on the standard basis.
fn complete_orthonormal(u: &mut DMatrix<f64>, slots: &[usize]) {
    if slots.is_empty() {
        return;
    }
    let rows = u.nrows();
    let mut filled: Vec<usize> = (0..u.ncols()).filter(|j| !slots.contains(j)).collect();
    let mut candidate = 0;
    for &slot in slots {
        while candidate < rows {
            let mut e = DVector::zeros(rows);
            e[candidate] = 1.0;
            candidate += 1;
            // two passes of classical Gram-Schmidt
            for _ in 0..2 {
                for &j in &filled {
                    let proj = u.column(j).dot(&e);
                    e.axpy(-proj, &u.column(j), 1.0);
                }
            }
            let norm = e.norm();
            if norm > 1e-6 {
                u.set_column(slot, &(e / norm));
                filled.push(slot);
                break;
            }
        }
    }
}
