//! Independent reference formulas on plain `Vec<f64>`, used as oracles.
#![allow(dead_code)]

use iacv::{Dataset, LossModel};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Gaussian design with labels drawn from the loss's own model around `theta`.
pub fn random_data(rng: &mut ChaCha8Rng, n: usize, p: usize, loss: LossModel, theta: &[f64]) -> Dataset<f64> {
    let x = Array2::from_shape_vec((n, p), normal_vec(rng, n * p, 1.0)).unwrap();
    let y: Array1<f64> = x
        .rows()
        .into_iter()
        .map(|r| {
            let eta: f64 = r.iter().zip(theta).map(|(a, b)| a * b).sum();
            match loss {
                LossModel::Logistic => f64::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())),
                LossModel::Squared => eta + rng.sample::<f64, _>(StandardNormal),
            }
        })
        .collect();
    Dataset::new(x, y).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `ℓ(z; θ)` straight from the definitions.
pub fn loss(kind: LossModel, x: &[f64], y: f64, th: &[f64]) -> f64 {
    let eta = dot(x, th);
    match kind {
        LossModel::Logistic => -y * eta + (1.0 + eta.exp()).ln(),
        LossModel::Squared => 0.5 * (y - eta).powi(2),
    }
}

pub fn loss_grad(kind: LossModel, x: &[f64], y: f64, th: &[f64]) -> Vec<f64> {
    let eta = dot(x, th);
    let c = match kind {
        LossModel::Logistic => 1.0 / (1.0 + (-eta).exp()) - y,
        LossModel::Squared => eta - y,
    };
    x.iter().map(|v| c * v).collect()
}

pub fn loss_hess(kind: LossModel, x: &[f64], th: &[f64]) -> Vec<Vec<f64>> {
    let eta = dot(x, th);
    let c = match kind {
        LossModel::Logistic => {
            let s = 1.0 / (1.0 + (-eta).exp());
            s * (1.0 - s)
        }
        LossModel::Squared => 1.0,
    };
    x.iter().map(|a| x.iter().map(|b| c * a * b).collect()).collect()
}

pub fn row(data: &Dataset<f64>, i: usize) -> Vec<f64> {
    data.x().row(i).to_vec()
}

/// `Σ_{j∈idx} ∇ℓ_j + 2λθ`.
pub fn grad_sum(kind: LossModel, data: &Dataset<f64>, idx: &[usize], th: &[f64], ridge: f64) -> Vec<f64> {
    let mut g: Vec<f64> = th.iter().map(|v| 2.0 * ridge * v).collect();
    for &j in idx {
        for (a, b) in g.iter_mut().zip(loss_grad(kind, &row(data, j), data.y()[j], th)) {
            *a += b;
        }
    }
    g
}

/// `Σ_{j∈idx} ∇²ℓ_j + 2λI`.
pub fn hess_sum(kind: LossModel, data: &Dataset<f64>, idx: &[usize], th: &[f64], ridge: f64) -> Vec<Vec<f64>> {
    let p = th.len();
    let mut h = vec![vec![0.0; p]; p];
    for (k, r) in h.iter_mut().enumerate() {
        r[k] = 2.0 * ridge;
    }
    for &j in idx {
        let hj = loss_hess(kind, &row(data, j), th);
        for a in 0..p {
            for b in 0..p {
                h[a][b] += hj[a][b];
            }
        }
    }
    h
}

pub fn matvec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| dot(r, v)).collect()
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &bi)| r.iter().copied().chain([bi]).collect()).collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, piv);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// Minimizer of `Σ_{j∈idx} ℓ_j + λ‖θ‖²` by damped-free Newton from `start`.
pub fn newton_minimize(kind: LossModel, data: &Dataset<f64>, idx: &[usize], ridge: f64, start: &[f64]) -> Vec<f64> {
    let mut th = start.to_vec();
    for _ in 0..100 {
        let g = grad_sum(kind, data, idx, &th, ridge);
        if norm(&g) < 1e-13 {
            break;
        }
        let step = solve(&hess_sum(kind, data, idx, &th, ridge), &g);
        th = sub(&th, &step);
    }
    th
}

pub fn all_but(n: usize, i: usize) -> Vec<usize> {
    (0..n).filter(|&j| j != i).collect()
}

pub fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}
