//! Per-point losses, regularizers and their aggregate derivatives.
//!
//! Both supported losses are generalized linear: the loss depends on the
//! parameter only through the linear predictor `η = xᵀθ`. The gradient is
//! `ℓ'(η)·x` and the Hessian is the rank-one matrix `ℓ''(η)·x xᵀ`, which is
//! kept in factored form and densified only on request.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A dataset of `n` points in `p` dimensions. Row `i` of `x` and entry `i`
/// of `y` form data point `i` (0-based, stable for the whole experiment).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    x: Array2<T>,
    y: Array1<T>,
}

/// Borrowed view of a single data point.
#[derive(Debug, Clone, Copy)]
pub struct DataPoint<'a, T> {
    pub x: ArrayView1<'a, T>,
    pub y: T,
}

impl<T: Real> Dataset<T> {
    pub fn new(x: Array2<T>, y: Array1<T>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidArgument("dataset needs n ≥ 1 and p ≥ 1".into()));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> ArrayView2<'_, T> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView1<'_, T> {
        self.y.view()
    }

    pub fn point(&self, i: usize) -> DataPoint<'_, T> {
        DataPoint { x: self.x.row(i), y: self.y[i] }
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange { index: i, n: self.n() });
        }
        Ok(())
    }

    pub(crate) fn check_param(&self, theta: ArrayView1<'_, T>) -> Result<()> {
        check_dim(self.p(), theta.len())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossModel {
    /// `ℓ = −y·η + log(1 + e^η)` with `y ∈ {0, 1}`.
    Logistic,
    /// `ℓ = ½(y − η)²`.
    Squared,
}

/// Value and first two derivatives of a loss with respect to `η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDerivs<T> {
    pub value: T,
    pub d1: T,
    pub d2: T,
}

/// Logistic sigmoid evaluated on the branch that cannot overflow.
pub fn sigmoid<T: Real>(eta: T) -> T {
    if eta >= T::zero() {
        T::one() / (T::one() + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + e^η)` without overflow.
pub fn softplus<T: Real>(eta: T) -> T {
    eta.max(T::zero()) + (-eta.abs()).exp().ln_1p()
}

impl LossModel {
    #[inline]
    pub fn link<T: Real>(self, eta: T, y: T) -> LinkDerivs<T> {
        match self {
            LossModel::Logistic => {
                let s = sigmoid(eta);
                LinkDerivs { value: softplus(eta) - y * eta, d1: s - y, d2: s * (T::one() - s) }
            }
            LossModel::Squared => {
                let r = eta - y;
                LinkDerivs { value: T::lit(0.5) * r * r, d1: r, d2: T::one() }
            }
        }
    }

    #[inline]
    pub fn d1<T: Real>(self, eta: T, y: T) -> T {
        match self {
            LossModel::Logistic => sigmoid(eta) - y,
            LossModel::Squared => eta - y,
        }
    }

    pub fn value<T: Real>(self, z: &DataPoint<'_, T>, theta: ArrayView1<'_, T>) -> Result<T> {
        check_dim(z.x.len(), theta.len())?;
        Ok(self.link(z.x.dot(&theta), z.y).value)
    }

    pub fn grad<T: Real>(self, z: &DataPoint<'_, T>, theta: ArrayView1<'_, T>) -> Result<Array1<T>> {
        check_dim(z.x.len(), theta.len())?;
        let d1 = self.d1(z.x.dot(&theta), z.y);
        Ok(z.x.mapv(|v| v * d1))
    }

    pub fn hess<T: Real>(self, z: &DataPoint<'_, T>, theta: ArrayView1<'_, T>) -> Result<RankOneHessian<T>> {
        check_dim(z.x.len(), theta.len())?;
        let d2 = self.link(z.x.dot(&theta), z.y).d2;
        Ok(RankOneHessian { coef: d2, x: z.x.to_owned() })
    }

    pub fn hess_vec<T: Real>(
        self,
        z: &DataPoint<'_, T>,
        theta: ArrayView1<'_, T>,
        v: ArrayView1<'_, T>,
    ) -> Result<Array1<T>> {
        check_dim(z.x.len(), v.len())?;
        self.hess(z, theta).map(|h| h.apply(v))
    }
}

/// `coef · x xᵀ` kept in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneHessian<T> {
    pub coef: T,
    pub x: Array1<T>,
}

impl<T: Real> RankOneHessian<T> {
    /// O(p) product with a vector.
    pub fn apply(&self, v: ArrayView1<'_, T>) -> Array1<T> {
        let s = self.coef * self.x.dot(&v);
        self.x.mapv(|xi| xi * s)
    }

    pub fn dense(&self) -> Array2<T> {
        let p = self.x.len();
        Array2::from_shape_fn((p, p), |(a, b)| self.coef * self.x[a] * self.x[b])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer<T> {
    None,
    /// `λ‖θ‖²₂`
    Ridge {
        lambda: T,
    },
    /// `λ‖θ‖₁`
    L1 {
        lambda: T,
    },
}

impl<T: Real> Regularizer<T> {
    pub fn ridge(lambda: T) -> Result<Self> {
        Self::check_strength(lambda)?;
        Ok(Regularizer::Ridge { lambda })
    }

    pub fn l1(lambda: T) -> Result<Self> {
        Self::check_strength(lambda)?;
        Ok(Regularizer::L1 { lambda })
    }

    fn check_strength(lambda: T) -> Result<()> {
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("regularization strength {lambda} must be ≥ 0")));
        }
        Ok(())
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, Regularizer::L1 { .. })
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Regularizer::None)
    }

    pub fn strength(&self) -> T {
        match *self {
            Regularizer::None => T::zero(),
            Regularizer::Ridge { lambda } | Regularizer::L1 { lambda } => lambda,
        }
    }

    pub fn value(&self, theta: ArrayView1<'_, T>) -> T {
        match *self {
            Regularizer::None => T::zero(),
            Regularizer::Ridge { lambda } => lambda * theta.dot(&theta),
            Regularizer::L1 { lambda } => lambda * theta.iter().fold(T::zero(), |a, v| a + v.abs()),
        }
    }

    /// Gradient of a smooth regularizer.
    pub fn grad(&self, theta: ArrayView1<'_, T>) -> Result<Array1<T>> {
        match *self {
            Regularizer::None => Ok(Array1::zeros(theta.len())),
            Regularizer::Ridge { lambda } => Ok(theta.mapv(|v| T::lit(2.0) * lambda * v)),
            Regularizer::L1 { .. } => Err(Error::InvalidArgument("l1 penalty has no gradient".into())),
        }
    }

    /// The Hessian of a smooth regularizer is `c·I`; returns `c`.
    pub fn hess_diag(&self) -> Result<T> {
        match *self {
            Regularizer::None => Ok(T::zero()),
            Regularizer::Ridge { lambda } => Ok(T::lit(2.0) * lambda),
            Regularizer::L1 { .. } => Err(Error::InvalidArgument("l1 penalty has no Hessian".into())),
        }
    }

    /// `argmin_θ ½‖θ − u‖² + step·R(θ)`.
    pub fn prox(&self, u: ArrayView1<'_, T>, step: T) -> Result<Array1<T>> {
        match *self {
            Regularizer::None => Ok(u.to_owned()),
            Regularizer::Ridge { lambda } => {
                let s = T::one() / (T::one() + T::lit(2.0) * step * lambda);
                Ok(u.mapv(|v| v * s))
            }
            Regularizer::L1 { lambda } => prox_l1(u, step * lambda),
        }
    }
}

/// Soft-threshold map `sign(u)·max(|u| − threshold, 0)` entrywise.
pub fn prox_l1<T: Real>(u: ArrayView1<'_, T>, threshold: T) -> Result<Array1<T>> {
    if !(threshold >= T::zero()) {
        return Err(Error::InvalidArgument(format!("negative threshold {threshold}")));
    }
    Ok(u.mapv(|v| soft_threshold(v, threshold)))
}

#[inline]
pub fn soft_threshold<T: Real>(v: T, threshold: T) -> T {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        T::zero()
    }
}

/// Objective `F = Σ ℓ + smooth + nonsmooth`, split as `g = Σ ℓ + smooth`
/// (differentiated) and `h = nonsmooth` (handled by its prox).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective<T> {
    pub loss: LossModel,
    pub smooth: Regularizer<T>,
    pub nonsmooth: Regularizer<T>,
}

impl<T: Real> Objective<T> {
    pub fn new(loss: LossModel, smooth: Regularizer<T>, nonsmooth: Regularizer<T>) -> Result<Self> {
        if !smooth.is_smooth() {
            return Err(Error::InvalidArgument("the differentiable part cannot hold an l1 term".into()));
        }
        if matches!(nonsmooth, Regularizer::Ridge { .. }) {
            return Err(Error::InvalidArgument("ridge belongs in the differentiable part".into()));
        }
        if !smooth.is_none() && !nonsmooth.is_none() {
            return Err(Error::InvalidArgument("mixed smooth and nonsmooth penalties are not supported".into()));
        }
        Ok(Self { loss, smooth, nonsmooth })
    }

    /// Loss plus ridge, all in `g`.
    pub fn ridge(loss: LossModel, lambda: T) -> Result<Self> {
        Self::new(loss, Regularizer::ridge(lambda)?, Regularizer::None)
    }

    /// Loss in `g`, `λ‖θ‖₁` in `h`.
    pub fn lasso(loss: LossModel, lambda: T) -> Result<Self> {
        Self::new(loss, Regularizer::None, Regularizer::l1(lambda)?)
    }

    pub fn unregularized(loss: LossModel) -> Self {
        Self { loss, smooth: Regularizer::None, nonsmooth: Regularizer::None }
    }

    pub fn has_prox(&self) -> bool {
        !self.nonsmooth.is_none()
    }

    /// `F(𝒵_subset; θ)`.
    pub fn value(&self, data: &Dataset<T>, subset: Option<&[usize]>, theta: ArrayView1<'_, T>) -> Result<T> {
        data.check_param(theta)?;
        let eta = data.x().dot(&theta);
        let mut total = T::zero();
        let mut add = |i: usize| total += self.loss.link(eta[i], data.y[i]).value;
        match subset {
            Some(s) => s.iter().copied().for_each(&mut add),
            None => (0..data.n()).for_each(&mut add),
        }
        Ok(total + self.smooth.value(theta) + self.nonsmooth.value(theta))
    }

    /// Gradient of `g` over `subset` (all points when `None`), smooth penalty included.
    pub fn g_grad(&self, data: &Dataset<T>, subset: Option<&[usize]>, theta: ArrayView1<'_, T>) -> Result<Array1<T>> {
        let (mut g, _) = subset_sums(self.loss, data, subset, theta, false)?;
        g += &self.smooth.grad(theta)?;
        Ok(g)
    }

    /// Gradient and dense Hessian of `g` over `subset`, smooth penalty included.
    pub fn g_grad_hess(
        &self,
        data: &Dataset<T>,
        subset: Option<&[usize]>,
        theta: ArrayView1<'_, T>,
    ) -> Result<(Array1<T>, Array2<T>)> {
        subset_grad_hess(self.loss, Some(&self.smooth), data, subset, theta)
    }
}

/// Per-point derivative coefficients `ℓ'(η_j)` and `ℓ''(η_j)` over a subset.
pub(crate) fn subset_sums<T: Real>(
    loss: LossModel,
    data: &Dataset<T>,
    subset: Option<&[usize]>,
    theta: ArrayView1<'_, T>,
    with_hessian: bool,
) -> Result<(Array1<T>, Option<Array2<T>>)> {
    data.check_param(theta)?;
    let p = data.p();
    let owned;
    let xs: ArrayView2<'_, T> = match subset {
        Some(s) => {
            for &i in s {
                data.check_index(i)?;
            }
            owned = data.x.select(Axis(0), s);
            owned.view()
        }
        None => data.x.view(),
    };
    let ys: Array1<T> = match subset {
        Some(s) => s.iter().map(|&i| data.y[i]).collect(),
        None => data.y.clone(),
    };
    if xs.nrows() == 0 {
        return Ok((Array1::zeros(p), with_hessian.then(|| Array2::zeros((p, p)))));
    }
    let eta = xs.dot(&theta);
    let mut d1 = Array1::<T>::zeros(eta.len());
    let mut d2 = Array1::<T>::zeros(eta.len());
    for j in 0..eta.len() {
        let l = loss.link(eta[j], ys[j]);
        d1[j] = l.d1;
        d2[j] = l.d2;
    }
    let grad = xs.t().dot(&d1);
    let hess = with_hessian.then(|| weighted_gram(xs, d2.view()));
    Ok((grad, hess))
}

/// `Σ_j w_j x_j x_jᵀ` for the rows of `xs`.
pub(crate) fn weighted_gram<T: Real>(xs: ArrayView2<'_, T>, w: ArrayView1<'_, T>) -> Array2<T> {
    let mut scaled = xs.to_owned();
    for (mut row, &wj) in scaled.rows_mut().into_iter().zip(w.iter()) {
        row.mapv_inplace(|v| v * wj);
    }
    scaled.t().dot(&xs)
}

/// `Σ_{j∈subset} ∇ℓ(Z_j;θ)` and the matching Hessian sum, plus the smooth
/// regularizer's contribution when `reg` is given. `None` for the subset
/// means every point.
pub fn subset_grad_hess<T: Real>(
    model: LossModel,
    reg: Option<&Regularizer<T>>,
    data: &Dataset<T>,
    subset: Option<&[usize]>,
    theta: ArrayView1<'_, T>,
) -> Result<(Array1<T>, Array2<T>)> {
    let (mut g, h) = subset_sums(model, data, subset, theta, true)?;
    let mut h = h.expect("hessian requested");
    if let Some(r) = reg {
        g += &r.grad(theta)?;
        let c = r.hess_diag()?;
        for k in 0..data.p() {
            h[[k, k]] += c;
        }
    }
    Ok((g, h))
}
