//! Small dense linear algebra for p×p symmetric systems.
//!
//! The parameter dimension in this crate is small (tens), so a plain
//! Cholesky factorization and a cyclic Jacobi eigenvalue sweep are all
//! that is needed.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn norm2<T: Real>(v: ArrayView1<'_, T>) -> T {
    v.dot(&v).sqrt()
}

pub fn dist2<T: Real>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).fold(T::zero(), |acc, v| acc + v).sqrt()
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Array2<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factorizes a symmetric positive definite matrix. Only the lower
    /// triangle of `a` is read.
    pub fn factor(a: ArrayView2<'_, T>) -> Result<Self> {
        let p = a.nrows();
        if a.ncols() != p {
            return Err(Error::DimensionMismatch { expected: p, got: a.ncols() });
        }
        let mut l = Array2::<T>::zeros((p, p));
        for j in 0..p {
            let mut d = a[[j, j]];
            for k in 0..j {
                d -= l[[j, k]] * l[[j, k]];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { min_eigenvalue: min_eigenvalue(a).as_f64() });
            }
            let djj = d.sqrt();
            l[[j, j]] = djj;
            for i in (j + 1)..p {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn solve(&self, b: ArrayView1<'_, T>) -> Array1<T> {
        let p = self.dim();
        let l = &self.l;
        let mut y = b.to_owned();
        for i in 0..p {
            let mut s = y[i];
            for k in 0..i {
                s -= l[[i, k]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        for i in (0..p).rev() {
            let mut s = y[i];
            for k in (i + 1)..p {
                s -= l[[k, i]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        y
    }
}

/// Solves `a x = b` for SPD `a` and verifies the relative residual.
pub fn spd_solve<T: Real>(a: ArrayView2<'_, T>, b: ArrayView1<'_, T>) -> Result<Array1<T>> {
    let chol = Cholesky::factor(a)?;
    let x = chol.solve(b);
    check_residual(a, x.view(), b)?;
    Ok(x)
}

pub fn check_residual<T: Real>(a: ArrayView2<'_, T>, x: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> Result<()> {
    let r = a.dot(&x) - b;
    let rn = norm2(r.view());
    let bn = norm2(b);
    let rel = if bn > T::zero() { rn / bn } else { rn };
    if !(rel <= T::solve_residual_tol()) {
        return Err(Error::SolveResidual { relative_residual: rel.as_f64() });
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Real>(a: ArrayView2<'_, T>) -> Array1<T> {
    let p = a.nrows();
    let mut m = a.to_owned();
    // symmetrize from the lower triangle
    for i in 0..p {
        for j in 0..i {
            m[[j, i]] = m[[i, j]];
        }
    }
    let tol = T::epsilon() * T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut total = T::zero();
        for i in 0..p {
            for j in 0..p {
                let v = m[[i, j]] * m[[i, j]];
                total += v;
                if i != j {
                    off += v;
                }
            }
        }
        if off <= tol * total || off == T::zero() {
            break;
        }
        for q in 1..p {
            for r in 0..q {
                let apq = m[[r, q]];
                if apq == T::zero() {
                    continue;
                }
                let app = m[[r, r]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..p {
                    let mkr = m[[k, r]];
                    let mkq = m[[k, q]];
                    m[[k, r]] = c * mkr - s * mkq;
                    m[[k, q]] = s * mkr + c * mkq;
                }
                for k in 0..p {
                    let mrk = m[[r, k]];
                    let mqk = m[[q, k]];
                    m[[r, k]] = c * mrk - s * mqk;
                    m[[q, k]] = s * mrk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..p).map(|i| m[[i, i]]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Array1::from(ev)
}

pub fn min_eigenvalue<T: Real>(a: ArrayView2<'_, T>) -> T {
    let ev = symmetric_eigenvalues(a);
    ev.first().copied().unwrap_or_else(T::zero)
}

pub fn max_eigenvalue<T: Real>(a: ArrayView2<'_, T>) -> T {
    let ev = symmetric_eigenvalues(a);
    ev.last().copied().unwrap_or_else(T::zero)
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration; the Rayleigh quotient approaches it from below.
pub fn power_max_eigenvalue<T: Real>(a: ArrayView2<'_, T>) -> T {
    let p = a.nrows();
    if p == 0 {
        return T::zero();
    }
    // uneven start so no eigenvector of a symmetric pattern is missed
    let mut v = Array1::from_shape_fn(p, |k| T::one() + T::from_usize_lossy(k) / T::from_usize_lossy(p));
    let mut estimate = T::zero();
    for _ in 0..1000 {
        let len = norm2(v.view());
        if !(len > T::zero()) {
            return T::zero();
        }
        v.mapv_inplace(|x| x / len);
        let w = a.dot(&v);
        let next = v.dot(&w);
        let settled = (next - estimate).abs() <= T::lit(1e-12) * next.abs();
        estimate = next;
        v = w;
        if settled {
            break;
        }
    }
    estimate
}

/// Spectral norm of a symmetric matrix.
pub fn symmetric_spectral_norm<T: Real>(a: ArrayView2<'_, T>) -> T {
    let ev = symmetric_eigenvalues(a);
    ev.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}
