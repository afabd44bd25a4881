//! The full-data iteration: a gradient step on `g` over the batch `S_t`
//! followed by a proximal step on `h`. GD, SGD and ProxGD are the three
//! specializations.

use std::time::{Duration, Instant};

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::model::{check_dim, Dataset, Objective};
use crate::scalar::Real;
use crate::schedule::{BatchSchedule, IndexSet, StepSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Gd,
    Sgd,
    ProxGd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec<T> {
    pub objective: Objective<T>,
    pub step: StepSchedule<T>,
    pub batch: BatchSchedule,
    pub theta0: Array1<T>,
}

impl<T: Real> SolverSpec<T> {
    /// Starts at the origin.
    pub fn new(objective: Objective<T>, step: StepSchedule<T>, batch: BatchSchedule, p: usize) -> Self {
        Self { objective, step, batch, theta0: Array1::zeros(p) }
    }

    pub fn with_theta0(mut self, theta0: Array1<T>) -> Self {
        self.theta0 = theta0;
        self
    }

    pub fn kind(&self) -> SolverKind {
        match (self.objective.has_prox(), self.batch.is_full()) {
            (false, true) => SolverKind::Gd,
            (false, false) => SolverKind::Sgd,
            (true, _) => SolverKind::ProxGd,
        }
    }

    pub fn validate(&self, data: &Dataset<T>) -> Result<()> {
        check_dim(data.p(), self.theta0.len())?;
        if self.batch.n() != data.n() {
            return Err(Error::DimensionMismatch { expected: data.n(), got: self.batch.n() });
        }
        if self.theta0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: 0, unit: None });
        }
        Ok(())
    }
}

/// Borrowed subset for the aggregate routines; `None` stands for all points.
pub(crate) fn subset_of(batch: &IndexSet) -> Option<&[usize]> {
    if batch.is_full() {
        None
    } else {
        Some(batch.as_slice())
    }
}

pub(crate) fn ensure_finite<T: Real>(v: ArrayView1<'_, T>, iteration: usize, unit: Option<usize>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { iteration, unit })
    }
}

/// One step of the full-data iteration from `theta_prev`, drawing `S_t`
/// from the solver's batch schedule.
pub fn full_step<T: Real>(
    spec: &SolverSpec<T>,
    data: &Dataset<T>,
    theta_prev: ArrayView1<'_, T>,
    t: usize,
) -> Result<Array1<T>> {
    let batch = spec.batch.batch_at(t)?;
    full_step_with_batch(spec, data, theta_prev, &batch, t)
}

/// As [`full_step`] with a caller-supplied `S_t`, so one batch can be
/// shared with the leave-one-out engines.
pub fn full_step_with_batch<T: Real>(
    spec: &SolverSpec<T>,
    data: &Dataset<T>,
    theta_prev: ArrayView1<'_, T>,
    batch: &IndexSet,
    t: usize,
) -> Result<Array1<T>> {
    let alpha = spec.step.step_at(t)?;
    let grad = spec.objective.g_grad(data, subset_of(batch), theta_prev)?;
    ensure_finite(grad.view(), t, None)?;
    let moved = &theta_prev - &(grad * alpha);
    let next = spec.objective.nonsmooth.prox(moved.view(), alpha)?;
    ensure_finite(next.view(), t, None)?;
    Ok(next)
}

/// Iterates `θ̂⁽⁰⁾..θ̂⁽ᵀ⁾` with per-step wall time (`wall[t-1]` is step `t`).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord<T> {
    pub iterates: Vec<Array1<T>>,
    pub wall: Vec<Duration>,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn last(&self) -> &Array1<T> {
        self.iterates.last().expect("record holds θ⁽⁰⁾")
    }

    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }
}

pub fn run<T: Real>(spec: &SolverSpec<T>, data: &Dataset<T>, iterations: usize) -> Result<TrajectoryRecord<T>> {
    spec.validate(data)?;
    let mut iterates = Vec::with_capacity(iterations + 1);
    let mut wall = Vec::with_capacity(iterations);
    iterates.push(spec.theta0.clone());
    for t in 1..=iterations {
        let start = Instant::now();
        let next = full_step(spec, data, iterates[t - 1].view(), t)?;
        wall.push(start.elapsed());
        iterates.push(next);
    }
    Ok(TrajectoryRecord { iterates, wall })
}

/// Stationarity measure of the full objective: `‖∇F(θ)‖₂` when `h ≡ 0`,
/// otherwise the norm of the prox-gradient mapping at the first step size.
pub fn stationarity<T: Real>(spec: &SolverSpec<T>, data: &Dataset<T>, theta: ArrayView1<'_, T>) -> Result<T> {
    let grad = spec.objective.g_grad(data, None, theta)?;
    if !spec.objective.has_prox() {
        return Ok(norm2(grad.view()));
    }
    let alpha = spec.step.step_at(1)?;
    let moved = &theta - &(grad * alpha);
    let next = spec.objective.nonsmooth.prox(moved.view(), alpha)?;
    Ok(norm2((&theta - &next).view()) / alpha)
}

/// Runs full-batch iterations until the stationarity measure falls to `tol`
/// or `max_iterations` is reached. Returns the record and whether it
/// converged. Batches come from the solver's schedule as usual.
pub fn run_until<T: Real>(
    spec: &SolverSpec<T>,
    data: &Dataset<T>,
    max_iterations: usize,
    tol: T,
) -> Result<(TrajectoryRecord<T>, bool)> {
    spec.validate(data)?;
    let mut iterates = vec![spec.theta0.clone()];
    let mut wall = Vec::new();
    for t in 1..=max_iterations {
        if stationarity(spec, data, iterates[t - 1].view())? <= tol {
            return Ok((TrajectoryRecord { iterates, wall }, true));
        }
        let start = Instant::now();
        let next = full_step(spec, data, iterates[t - 1].view(), t)?;
        wall.push(start.elapsed());
        iterates.push(next);
    }
    let done = stationarity(spec, data, iterates[max_iterations].view())? <= tol;
    Ok((TrajectoryRecord { iterates, wall }, done))
}
