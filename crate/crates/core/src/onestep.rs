//! One-shot leave-one-out estimators evaluated at a single parameter value,
//! the trivial baseline, and the theory diagnostics (empirical constants
//! and the iteration-dependent error bound recursion).

use ndarray::linalg::general_mat_vec_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact_loo::{LooState, ROW_CHUNK};
use crate::linalg::{
    check_residual, norm2, power_max_eigenvalue, symmetric_eigenvalues, symmetric_spectral_norm, Cholesky,
};
use crate::model::{weighted_gram, Dataset, LossModel, Objective, Regularizer};
use crate::scalar::Real;
use crate::schedule::StepSchedule;
use crate::trajectory::TrajectoryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OneStepMethod {
    /// One Newton step on the leave-one-out objective.
    NewtonStep,
    /// Infinitesimal jackknife: leave-one-out gradient, full-data Hessian.
    Jackknife,
    /// The full-data parameter itself.
    Baseline,
}

/// Derivatives of `g` over all points at one parameter value, with the
/// per-point coefficients used to strip a single point out.
#[derive(Debug, Clone)]
pub struct FullDerivatives<T> {
    pub grad: Array1<T>,
    pub hess: Array2<T>,
    pub d1: Array1<T>,
    pub d2: Array1<T>,
}

impl<T: Real> FullDerivatives<T> {
    pub fn at(data: &Dataset<T>, objective: &Objective<T>, theta: ArrayView1<'_, T>) -> Result<Self> {
        data.check_param(theta)?;
        let eta = data.x().dot(&theta);
        let mut d1 = Array1::<T>::zeros(data.n());
        let mut d2 = Array1::<T>::zeros(data.n());
        Zip::from(&mut d1).and(&mut d2).and(&eta).and(data.y()).for_each(|a, b, &e, &y| {
            let l = objective.loss.link(e, y);
            *a = l.d1;
            *b = l.d2;
        });
        let mut grad = data.x().t().dot(&d1);
        grad += &objective.smooth.grad(theta)?;
        let mut hess = weighted_gram(data.x(), d2.view());
        let c = objective.smooth.hess_diag()?;
        for k in 0..data.p() {
            hess[[k, k]] += c;
        }
        Ok(Self { grad, hess, d1, d2 })
    }

    /// `∇g(𝒵₋ᵢ; θ)`.
    pub fn loo_grad(&self, data: &Dataset<T>, i: usize) -> Array1<T> {
        let mut g = self.grad.clone();
        g.scaled_add(-self.d1[i], &data.x().row(i));
        g
    }

    /// `∇²g(𝒵₋ᵢ; θ)`.
    pub fn loo_hess(&self, data: &Dataset<T>, i: usize) -> Array2<T> {
        let xs = data.x();
        let x = xs.row(i);
        let c = self.d2[i];
        let mut h = self.hess.clone();
        let p = x.len();
        for a in 0..p {
            for b in 0..p {
                h[[a, b]] -= c * x[a] * x[b];
            }
        }
        h
    }
}

fn solve_checked<T: Real>(a: ArrayView2<'_, T>, chol: &Cholesky<T>, b: ArrayView1<'_, T>) -> Result<Array1<T>> {
    let x = chol.solve(b);
    check_residual(a, x.view(), b)?;
    Ok(x)
}

fn newton_point<T: Real>(
    theta: ArrayView1<'_, T>,
    hess: ArrayView2<'_, T>,
    chol: &Cholesky<T>,
    grad: ArrayView1<'_, T>,
) -> Result<Array1<T>> {
    let step = solve_checked(hess, chol, grad)?;
    Ok(&theta - &step)
}

fn require_smooth<T: Real>(objective: &Objective<T>) -> Result<()> {
    if objective.has_prox() {
        return Err(Error::InvalidArgument("objective has a nonsmooth part; use the proximal variant".into()));
    }
    Ok(())
}

/// `θ̂ − (∇²F(𝒵₋ᵢ; θ̂))⁻¹ ∇F(𝒵₋ᵢ; θ̂)`.
pub fn ns_estimate<T: Real>(
    data: &Dataset<T>,
    objective: &Objective<T>,
    theta_hat: ArrayView1<'_, T>,
    i: usize,
) -> Result<Array1<T>> {
    require_smooth(objective)?;
    data.check_index(i)?;
    let full = FullDerivatives::at(data, objective, theta_hat)?;
    let h = full.loo_hess(data, i);
    let chol = Cholesky::factor(h.view())?;
    newton_point(theta_hat, h.view(), &chol, full.loo_grad(data, i).view())
}

/// `θ̂ − (∇²F(𝒵; θ̂))⁻¹ ∇F(𝒵₋ᵢ; θ̂)`.
pub fn ij_estimate<T: Real>(
    data: &Dataset<T>,
    objective: &Objective<T>,
    theta_hat: ArrayView1<'_, T>,
    i: usize,
) -> Result<Array1<T>> {
    require_smooth(objective)?;
    data.check_index(i)?;
    let full = FullDerivatives::at(data, objective, theta_hat)?;
    let chol = Cholesky::factor(full.hess.view())?;
    newton_point(theta_hat, full.hess.view(), &chol, full.loo_grad(data, i).view())
}

/// The Newton-step estimate for point `i` computed from a factorization of
/// the full-data Hessian via the Sherman–Morrison downdate
/// `(H − c x xᵀ)⁻¹ b = H⁻¹b + c·H⁻¹x (xᵀH⁻¹b) / (1 − c·xᵀH⁻¹x)`.
pub fn ns_estimate_sherman_morrison<T: Real>(
    data: &Dataset<T>,
    full: &FullDerivatives<T>,
    full_chol: &Cholesky<T>,
    theta_hat: ArrayView1<'_, T>,
    i: usize,
) -> Result<Array1<T>> {
    data.check_index(i)?;
    let xs = data.x();
    let x = xs.row(i);
    let c = full.d2[i];
    let b = full.loo_grad(data, i);
    let hinv_b = full_chol.solve(b.view());
    let hinv_x = full_chol.solve(x);
    let denom = T::one() - c * x.dot(&hinv_x);
    if !(denom > T::zero()) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: f64::NAN });
    }
    let mut step = hinv_b;
    let coef = c * x.dot(&step) / denom;
    step.scaled_add(coef, &hinv_x);
    Ok(&theta_hat - &step)
}

/// Settings for the scaled proximal subproblem solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledProxOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for ScaledProxOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iterations: 10_000 }
    }
}

/// `argmin_z ½(x − z)ᵀH(x − z) + h(z)` for positive definite `H`, solved by
/// proximal gradient with step `1/λ_max(H)`. Stops when successive iterates
/// move less than `tol·max(1, ‖z‖)`.
pub fn scaled_prox<T: Real>(
    h: &Regularizer<T>,
    hess: ArrayView2<'_, T>,
    x: ArrayView1<'_, T>,
    opts: ScaledProxOptions,
) -> Result<Array1<T>> {
    if h.is_none() {
        return Ok(x.to_owned());
    }
    // any step below 2/λ_max converges, so the power-iteration estimate is safe
    let lmax = power_max_eigenvalue(hess);
    if !(lmax > T::zero()) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: lmax.as_f64() });
    }
    let step = T::one() / lmax;
    let tol = T::lit(opts.tol);
    // z − step·H(z − x) = (I − step·H) z + step·H x
    let mut contraction = hess.mapv(|v| -(v * step));
    for k in 0..x.len() {
        contraction[[k, k]] += T::one();
    }
    let offset = hess.dot(&x) * step;
    let mut moved = Array1::<T>::zeros(x.len());
    let mut z = x.to_owned();
    let mut residual = T::infinity();
    for _ in 0..opts.max_iterations {
        moved.assign(&offset);
        general_mat_vec_mul(T::one(), &contraction, &z, T::one(), &mut moved);
        let next = h.prox(moved.view(), step)?;
        residual = norm2((&next - &z).view());
        let scale = norm2(next.view()).max(T::one());
        z = next;
        if residual <= tol * scale {
            return Ok(z);
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, residual: residual.as_f64() })
}

/// `prox_h^{H₋ᵢ}(θ̂ − H₋ᵢ⁻¹ ∇g(𝒵₋ᵢ; θ̂))` with `H₋ᵢ = ∇²g(𝒵₋ᵢ; θ̂)`.
pub fn prox_ns_estimate<T: Real>(
    data: &Dataset<T>,
    objective: &Objective<T>,
    theta_hat: ArrayView1<'_, T>,
    i: usize,
    opts: ScaledProxOptions,
) -> Result<Array1<T>> {
    data.check_index(i)?;
    let full = FullDerivatives::at(data, objective, theta_hat)?;
    prox_ns_from(data, objective, &full, theta_hat, i, opts)
}

fn prox_ns_from<T: Real>(
    data: &Dataset<T>,
    objective: &Objective<T>,
    full: &FullDerivatives<T>,
    theta_hat: ArrayView1<'_, T>,
    i: usize,
    opts: ScaledProxOptions,
) -> Result<Array1<T>> {
    let h = full.loo_hess(data, i);
    let chol = Cholesky::factor(h.view())?;
    let u = newton_point(theta_hat, h.view(), &chol, full.loo_grad(data, i).view())?;
    scaled_prox(&objective.nonsmooth, h.view(), u.view(), opts)
}

/// `prox_h^{H₋ᵢ}(θ̂ − H⁻¹ ∇g(𝒵₋ᵢ; θ̂))` with the full-data Hessian `H`
/// in the Newton point and the leave-one-out Hessian in the prox.
pub fn prox_ij_estimate<T: Real>(
    data: &Dataset<T>,
    objective: &Objective<T>,
    theta_hat: ArrayView1<'_, T>,
    i: usize,
    opts: ScaledProxOptions,
) -> Result<Array1<T>> {
    data.check_index(i)?;
    let full = FullDerivatives::at(data, objective, theta_hat)?;
    let chol = Cholesky::factor(full.hess.view())?;
    prox_ij_from(data, objective, &full, &chol, theta_hat, i, opts)
}

fn prox_ij_from<T: Real>(
    data: &Dataset<T>,
    objective: &Objective<T>,
    full: &FullDerivatives<T>,
    full_chol: &Cholesky<T>,
    theta_hat: ArrayView1<'_, T>,
    i: usize,
    opts: ScaledProxOptions,
) -> Result<Array1<T>> {
    let u = newton_point(theta_hat, full.hess.view(), full_chol, full.loo_grad(data, i).view())?;
    if objective.nonsmooth.is_none() {
        return Ok(u);
    }
    let h = full.loo_hess(data, i);
    scaled_prox(&objective.nonsmooth, h.view(), u.view(), opts)
}

/// All `n` one-step estimates at `theta_t`, stored as a leave-one-out
/// state stamped with iteration `t`. With a nonsmooth part the proximal
/// Newton variants are used.
pub fn along_path_estimates<T: Real>(
    data: &Dataset<T>,
    objective: &Objective<T>,
    theta_t: ArrayView1<'_, T>,
    t: usize,
    method: OneStepMethod,
) -> Result<LooState<T>> {
    along_path_estimates_with(data, objective, theta_t, t, method, ScaledProxOptions::default())
}

pub fn along_path_estimates_with<T: Real>(
    data: &Dataset<T>,
    objective: &Objective<T>,
    theta_t: ArrayView1<'_, T>,
    t: usize,
    method: OneStepMethod,
    opts: ScaledProxOptions,
) -> Result<LooState<T>> {
    data.check_param(theta_t)?;
    if theta_t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { iteration: t, unit: None });
    }
    let n = data.n();
    if method == OneStepMethod::Baseline {
        return Ok(LooState::replicated(n, theta_t, t));
    }
    let full = FullDerivatives::at(data, objective, theta_t)?;
    let full_chol = match method {
        OneStepMethod::Jackknife => Some(Cholesky::factor(full.hess.view())?),
        _ => None,
    };
    let mut rows = Array2::<T>::zeros((n, data.p()));
    let results: Vec<Result<()>> = rows
        .axis_chunks_iter_mut(Axis(0), ROW_CHUNK)
        .into_par_iter()
        .enumerate()
        .map(|(c, mut out)| {
            for (r, mut dst) in out.outer_iter_mut().enumerate() {
                let i = c * ROW_CHUNK + r;
                let est = match (method, &full_chol) {
                    (OneStepMethod::Jackknife, Some(chol)) => {
                        prox_ij_from(data, objective, &full, chol, theta_t, i, opts)?
                    }
                    _ => prox_ns_from(data, objective, &full, theta_t, i, opts)?,
                };
                dst.assign(&est);
            }
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }
    let state = LooState { rows, t };
    state.ensure_finite(t)?;
    Ok(state)
}

/// Empirical stand-ins for the constants in the accuracy guarantees.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryConstants<T> {
    /// Lower bound on `λ_min(∇²g(𝒵₋ᵢ; θ̂⁽ᵗ⁻¹⁾)) / n`.
    pub lambda0: T,
    /// Upper bound on `λ_max(∇²g(𝒵₋ᵢ; θ̂⁽ᵗ⁻¹⁾)) / n`.
    pub lambda1: T,
    /// Hessian Lipschitz constant divided by `n`.
    pub gamma: T,
    /// Per-point gradient bounds along the trajectory.
    pub eta: Vec<T>,
    /// Per-point gradient bounds used for the CV error.
    pub eta_prime: Vec<T>,
    /// Moment inflation factor for SGD; only known from simulation.
    pub beta: Option<T>,
}

impl<T: Real> TheoryConstants<T> {
    pub fn eta_max(&self) -> T {
        self.eta.iter().fold(T::zero(), |m, &v| m.max(v))
    }

    pub fn is_valid(&self) -> bool {
        let nonneg = |v: T| v >= T::zero() && v.is_finite();
        nonneg(self.lambda0)
            && nonneg(self.lambda1)
            && nonneg(self.gamma)
            && self.lambda0 <= self.lambda1
            && self.eta.iter().all(|&v| nonneg(v))
            && self.eta_prime.iter().all(|&v| nonneg(v))
    }

    /// `2‖η‖∞ / ((2λ₀ − γ) n)`: the uniform bound on the distance between
    /// the full and leave-one-out iterates.
    pub fn baseline_bound(&self, n: usize) -> T {
        T::lit(2.0) * self.eta_max() / ((T::lit(2.0) * self.lambda0 - self.gamma) * T::from_usize_lossy(n))
    }

    /// `4γ‖η‖∞² / (λ₀ (2λ₀ − γ)² n²)`: the uniform bound on the tracking error.
    pub fn iacv_bound(&self, n: usize) -> T {
        let gap = T::lit(2.0) * self.lambda0 - self.gamma;
        let nn = T::from_usize_lossy(n);
        T::lit(4.0) * self.gamma * self.eta_max().powi(2) / (self.lambda0 * gap * gap * nn * nn)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundViolation {
    InvalidConstants,
    /// `γ ≥ 2λ₀`.
    CurvatureGap,
    /// `n < 4‖η‖∞ / (2λ₀ − γ)`.
    SampleSize {
        required: f64,
    },
    /// `α_t > 1/(nλ₁)` at the first such `t`.
    StepTooLarge {
        t: usize,
    },
}

/// Iteration-dependent bound sequences from zero initialization:
///
/// ```text
/// b_t = (1 − α_t nλ₀) b_{t−1} + α_t η + α_t nγ b_{t−1}²     (full vs. leave-one-out)
/// c_t = (1 − α_t nλ₀) c_{t−1} + α_t nγ b_{t−1}²             (tracking error)
/// ```
///
/// `η` is the largest per-point gradient bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSequences<T> {
    pub baseline: Vec<T>,
    pub iacv: Vec<T>,
    pub violations: Vec<BoundViolation>,
}

pub fn bound_recursion<T: Real>(
    consts: &TheoryConstants<T>,
    schedule: &StepSchedule<T>,
    n: usize,
    iterations: usize,
) -> Result<BoundSequences<T>> {
    let mut violations = Vec::new();
    if !consts.is_valid() {
        violations.push(BoundViolation::InvalidConstants);
    }
    let two = T::lit(2.0);
    let nf = T::from_usize_lossy(n);
    let eta = consts.eta_max();
    let gap = two * consts.lambda0 - consts.gamma;
    if !(gap > T::zero()) {
        violations.push(BoundViolation::CurvatureGap);
    } else {
        let required = T::lit(4.0) * eta / gap;
        if nf < required {
            violations.push(BoundViolation::SampleSize { required: required.as_f64() });
        }
    }
    let mut baseline = Vec::with_capacity(iterations + 1);
    let mut iacv = Vec::with_capacity(iterations + 1);
    baseline.push(T::zero());
    iacv.push(T::zero());
    let mut flagged_step = false;
    for t in 1..=iterations {
        let alpha = schedule.step_at(t)?;
        if !flagged_step && alpha * nf * consts.lambda1 > T::one() {
            violations.push(BoundViolation::StepTooLarge { t });
            flagged_step = true;
        }
        let contraction = T::one() - alpha * nf * consts.lambda0;
        let b_prev = baseline[t - 1];
        let c_prev = iacv[t - 1];
        let curvature = alpha * nf * consts.gamma * b_prev * b_prev;
        baseline.push(contraction * b_prev + alpha * eta + curvature);
        iacv.push(contraction * c_prev + curvature);
    }
    Ok(BoundSequences { baseline, iacv, violations })
}

/// Number of Hessian finite-difference direction samples per sampled iterate.
const GAMMA_DIRECTIONS: usize = 100;
const GAMMA_SEED: u64 = 0x5ee_d0f9_a33a;

/// Iterates at which curvature constants are probed: roughly every decile
/// of `θ̂⁽⁰⁾..θ̂⁽ᵀ⁻¹⁾`.
fn decile_indices(len: usize) -> Vec<usize> {
    let last = len.saturating_sub(2);
    let mut idx: Vec<usize> = (0..=10).map(|k| (k * last + 5) / 10).collect();
    idx.dedup();
    idx
}

/// Estimates the constants of the accuracy guarantees along a recorded
/// trajectory. `λ₀`, `λ₁` come from exact leave-one-out Hessian spectra at
/// decile iterates, `η_i` from every iterate, and `γ` from symmetric finite
/// differences of the data Hessian along random directions. `η′_i` is the
/// global Lipschitz constant `‖x_i‖` for the logistic loss and falls back
/// to `η_i` otherwise. `β` is left unset (see [`empirical_beta`]).
pub fn estimate_constants<T: Real>(
    data: &Dataset<T>,
    objective: &Objective<T>,
    trajectory: &TrajectoryRecord<T>,
) -> Result<TheoryConstants<T>> {
    let n = data.n();
    let nf = T::from_usize_lossy(n);
    let x = data.x();
    let norms: Vec<T> = x.outer_iter().map(|r| norm2(r)).collect();

    let mut eta = vec![T::zero(); n];
    for theta in &trajectory.iterates {
        let e = x.dot(theta);
        for i in 0..n {
            let g = objective.loss.d1(e[i], data.y()[i]).abs() * norms[i];
            eta[i] = eta[i].max(g);
        }
    }

    let mut lambda0 = T::infinity();
    let mut lambda1 = T::zero();
    let mut gamma = T::zero();
    let mut rng = ChaCha8Rng::seed_from_u64(GAMMA_SEED);
    for &k in &decile_indices(trajectory.iterates.len()) {
        let theta = trajectory.iterates[k].view();
        let full = FullDerivatives::at(data, objective, theta)?;
        let extremes: Vec<(T, T)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let ev = symmetric_eigenvalues(full.loo_hess(data, i).view());
                (ev[0], ev[ev.len() - 1])
            })
            .collect();
        for (lo, hi) in extremes {
            lambda0 = lambda0.min(lo / nf);
            lambda1 = lambda1.max(hi / nf);
        }
        let scale = norm2(theta).max(T::one());
        let delta = T::lit(1e-4) * scale;
        for _ in 0..GAMMA_DIRECTIONS {
            let mut u: Array1<T> = (0..data.p()).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect();
            let un = norm2(u.view());
            if un == T::zero() {
                continue;
            }
            u.mapv_inplace(|v| v / un);
            let plus = &theta + &(&u * delta);
            let minus = &theta - &(&u * delta);
            let hp = data_hessian(data, objective.loss, plus.view());
            let hm = data_hessian(data, objective.loss, minus.view());
            let diff = hp - hm;
            let ratio = symmetric_spectral_norm(diff.view()) / (T::lit(2.0) * delta * nf);
            gamma = gamma.max(ratio);
        }
    }
    if !lambda0.is_finite() {
        lambda0 = T::zero();
    }
    let eta_prime = match objective.loss {
        LossModel::Logistic => norms,
        LossModel::Squared => eta.clone(),
    };
    Ok(TheoryConstants { lambda0, lambda1, gamma, eta, eta_prime, beta: None })
}

fn data_hessian<T: Real>(data: &Dataset<T>, loss: LossModel, theta: ArrayView1<'_, T>) -> Array2<T> {
    let eta = data.x().dot(&theta);
    let d2: Array1<T> = eta.iter().zip(data.y().iter()).map(|(&e, &y)| loss.link(e, y).d2).collect();
    weighted_gram(data.x(), d2.view())
}

/// Empirical inflation factor: for each point `i`, the ratio
/// `E‖Δᵢ‖² / ((n/K)(E‖Δᵢ‖)²)` over independent replications of the gap
/// `Δᵢ = θ̂₋ᵢ⁽ᵗ⁾ − θ̂⁽ᵗ⁾`, maximized over points. `gaps[i]` holds the
/// replications for point `i`. Points whose gaps are all zero are skipped.
pub fn empirical_beta<T: Real>(gaps: &[Vec<T>], n: usize, k: usize) -> Option<T> {
    let inflation = T::from_usize_lossy(n) / T::from_usize_lossy(k);
    gaps.iter()
        .filter(|g| !g.is_empty())
        .filter_map(|g| {
            let m = T::from_usize_lossy(g.len());
            let mean = g.iter().copied().sum::<T>() / m;
            let second = g.iter().map(|&v| v * v).sum::<T>() / m;
            (mean > T::zero()).then(|| second / (inflation * mean * mean))
        })
        .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))))
}
