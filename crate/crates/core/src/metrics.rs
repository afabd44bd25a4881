//! Accuracy metrics for leave-one-out estimates, quartile summaries across
//! repetitions, and cumulative wall-time bookkeeping.

use std::time::Duration;

use ndarray::Zip;

use crate::error::{Error, Result};
use crate::exact_loo::LooState;
use crate::linalg::dist2;
use crate::model::{check_dim, Dataset, LossModel};
use crate::scalar::Real;

/// `(1/n) Σᵢ ℓ(Zᵢ; θᵢ)` with `θᵢ` the `i`-th row of `estimates`.
pub fn cv_loss<T: Real>(model: LossModel, data: &Dataset<T>, estimates: &LooState<T>) -> Result<T> {
    check_dim(data.n(), estimates.n())?;
    check_dim(data.p(), estimates.p())?;
    if data.n() == 0 {
        return Err(Error::InvalidArgument("cv loss of an empty dataset".into()));
    }
    let mut total = T::zero();
    Zip::from(data.x().rows()).and(data.y()).and(estimates.rows.rows()).for_each(|x, &y, theta| {
        total += model.link(x.dot(&theta), y).value;
    });
    Ok(total / T::from_usize_lossy(data.n()))
}

fn check_pair<T: Real>(target: &LooState<T>, estimate: &LooState<T>) -> Result<()> {
    check_dim(target.n(), estimate.n())?;
    check_dim(target.p(), estimate.p())?;
    if target.t != estimate.t {
        return Err(Error::InvalidArgument(format!(
            "states are at different iterations ({} and {})",
            target.t, estimate.t
        )));
    }
    if target.n() == 0 {
        return Err(Error::InvalidArgument("states have no rows".into()));
    }
    Ok(())
}

/// Mean Euclidean distance between corresponding rows.
pub fn err_approx<T: Real>(target: &LooState<T>, estimate: &LooState<T>) -> Result<T> {
    check_pair(target, estimate)?;
    let total: T = target.rows.rows().into_iter().zip(estimate.rows.rows()).map(|(a, b)| dist2(a, b)).sum();
    Ok(total / T::from_usize_lossy(target.n()))
}

/// Absolute and relative CV-loss error of `estimate` against `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvError<T> {
    pub absolute: T,
    /// `None` when the target CV loss is zero.
    pub relative: Option<T>,
    pub target_cv: T,
    pub estimate_cv: T,
}

pub fn err_cv<T: Real>(
    target: &LooState<T>,
    estimate: &LooState<T>,
    model: LossModel,
    data: &Dataset<T>,
) -> Result<CvError<T>> {
    check_pair(target, estimate)?;
    let target_cv = cv_loss(model, data, target)?;
    let estimate_cv = cv_loss(model, data, estimate)?;
    let absolute = (estimate_cv - target_cv).abs();
    let relative = (target_cv != T::zero()).then(|| absolute / target_cv);
    Ok(CvError { absolute, relative, target_cv, estimate_cv })
}

/// Median and quartiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Quantile `q ∈ [0, 1]` of an ascending sample, linearly interpolating
/// between order statistics at position `q·(m − 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Quartiles of the finite values in `values`; `None` if there are none.
pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(Quartiles {
        q1: quantile_sorted(&v, 0.25)?,
        median: quantile_sorted(&v, 0.5)?,
        q3: quantile_sorted(&v, 0.75)?,
    })
}

/// Running wall-time total for one method.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeLedger {
    cumulative: Vec<Duration>,
}

impl TimeLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records the time of the next step.
    pub fn push(&mut self, step: Duration) {
        let last = self.total();
        self.cumulative.push(last + step);
    }

    pub fn total(&self) -> Duration {
        self.cumulative.last().copied().unwrap_or_default()
    }

    /// Cumulative time after `t` steps; zero for `t = 0`.
    pub fn after(&self, t: usize) -> Option<Duration> {
        match t {
            0 => Some(Duration::ZERO),
            _ => self.cumulative.get(t - 1).copied(),
        }
    }

    pub fn steps(&self) -> usize {
        self.cumulative.len()
    }
}
