//! Exact leave-one-out trajectories, advanced in lockstep with the full run.
//!
//! Row `i` runs the same iteration as the full data except that point `i`
//! is dropped from every batch: its gradient is taken over `S_t ∖ {i}` at
//! the row's own parameter. This is the ground truth every estimator is
//! scored against.

use std::time::{Duration, Instant};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{check_dim, Dataset};
use crate::scalar::Real;
use crate::schedule::IndexSet;
use crate::trajectory::SolverSpec;

/// Rows per parallel work item. Fixed so results never depend on the
/// number of worker threads.
pub(crate) const ROW_CHUNK: usize = 32;

/// `n` leave-one-out parameter estimates at iteration `t`; row `i` belongs
/// to the problem without point `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LooState<T> {
    pub rows: Array2<T>,
    pub t: usize,
}

impl<T: Real> LooState<T> {
    /// Every row set to `theta0`, at `t = 0`.
    pub fn initial(n: usize, theta0: ArrayView1<'_, T>) -> Self {
        Self::replicated(n, theta0, 0)
    }

    pub fn replicated(n: usize, theta: ArrayView1<'_, T>, t: usize) -> Self {
        let rows = theta.broadcast((n, theta.len())).expect("broadcast row").to_owned();
        Self { rows, t }
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn p(&self) -> usize {
        self.rows.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.rows.row(i)
    }

    pub(crate) fn ensure_finite(&self, iteration: usize) -> Result<()> {
        for (i, row) in self.rows.outer_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { iteration, unit: Some(i) });
            }
        }
        Ok(())
    }
}

/// Work done by one leave-one-out step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    /// Per-point gradient evaluations.
    pub grad_evals: u64,
    /// Per-point Hessian evaluations.
    pub hess_evals: u64,
    pub elapsed: Duration,
}

/// Data restricted to a batch, shared read-only by every row update.
pub(crate) struct BatchView<T> {
    pub xs: Array2<T>,
    pub ys: Array1<T>,
}

pub(crate) fn batch_view<T: Real>(data: &Dataset<T>, batch: &IndexSet) -> BatchView<T> {
    if batch.is_full() {
        BatchView { xs: data.x().to_owned(), ys: data.y().to_owned() }
    } else {
        let idx = batch.as_slice();
        BatchView { xs: data.x().select(Axis(0), idx), ys: idx.iter().map(|&i| data.y()[i]).collect() }
    }
}

/// Position of data point `i` within the batch, if present.
pub(crate) fn position_in(batch: &IndexSet, i: usize) -> Option<usize> {
    if !batch.contains(i) {
        None
    } else if batch.is_full() {
        Some(i)
    } else {
        batch.as_slice().binary_search(&i).ok()
    }
}

fn check_state<T: Real>(data: &Dataset<T>, state: &LooState<T>, batch: &IndexSet, t: usize) -> Result<()> {
    check_dim(data.n(), state.n())?;
    check_dim(data.p(), state.p())?;
    check_dim(data.n(), batch.universe())?;
    if t == 0 || state.t + 1 != t {
        return Err(Error::InvalidArgument(format!("state is at t = {}, cannot take step {t}", state.t)));
    }
    Ok(())
}

/// Advances every row one step using the shared batch `S_t`.
pub fn loo_step<T: Real>(
    spec: &SolverSpec<T>,
    data: &Dataset<T>,
    state: &LooState<T>,
    batch: &IndexSet,
    t: usize,
) -> Result<(LooState<T>, StepStats)> {
    check_state(data, state, batch, t)?;
    let start = Instant::now();
    let alpha = spec.step.step_at(t)?;
    let view = batch_view(data, batch);
    let objective = spec.objective;
    let n = data.n();
    let p = data.p();

    let mut next = Array2::<T>::zeros((n, p));
    let evals: Vec<Result<u64>> = next
        .axis_chunks_iter_mut(Axis(0), ROW_CHUNK)
        .into_par_iter()
        .enumerate()
        .map(|(c, mut out)| {
            let first = c * ROW_CHUNK;
            let rows = state.rows.slice(s![first..first + out.nrows(), ..]);
            let grads = chunk_gradients(objective.loss, rows, first, &view, batch);
            let mut evals = 0u64;
            for (r, (mut dst, (src, g))) in
                out.outer_iter_mut().zip(rows.outer_iter().zip(grads.outer_iter())).enumerate()
            {
                let i = first + r;
                evals += (batch.len() - usize::from(batch.contains(i))) as u64;
                let mut g = g.to_owned();
                g += &objective.smooth.grad(src)?;
                let moved = &src - &(g * alpha);
                let stepped = objective.nonsmooth.prox(moved.view(), alpha)?;
                dst.assign(&stepped);
            }
            Ok(evals)
        })
        .collect();
    let mut grad_evals = 0;
    for e in evals {
        grad_evals += e?;
    }
    let next = LooState { rows: next, t };
    next.ensure_finite(t)?;
    Ok((next, StepStats { grad_evals, hess_evals: 0, elapsed: start.elapsed() }))
}

/// Loss gradients `Σ_{j∈S∖{i}} ℓ'(x_jᵀθ_i)·x_j` for a block of rows.
fn chunk_gradients<T: Real>(
    loss: crate::model::LossModel,
    rows: ArrayView2<'_, T>,
    first: usize,
    view: &BatchView<T>,
    batch: &IndexSet,
) -> Array2<T> {
    if view.xs.nrows() == 0 {
        return Array2::zeros(rows.raw_dim());
    }
    // eta[r, j] = x_jᵀ θ_{first+r}
    let mut d = rows.dot(&view.xs.t());
    for (r, mut line) in d.outer_iter_mut().enumerate() {
        Zip::from(&mut line).and(&view.ys).for_each(|e, &y| *e = loss.d1(*e, y));
        if let Some(pos) = position_in(batch, first + r) {
            line[pos] = T::zero();
        }
    }
    d.dot(&view.xs)
}

/// Leave-one-out states `0..=T` and per-step work.
#[derive(Debug, Clone)]
pub struct LooRun<T> {
    pub states: Vec<LooState<T>>,
    pub stats: Vec<StepStats>,
}

/// Runs all `n` exact leave-one-out trajectories for `iterations` steps.
/// Keeps every state, so it is meant for small problems; the harness
/// drives [`loo_step`] directly.
pub fn run_loo<T: Real>(spec: &SolverSpec<T>, data: &Dataset<T>, iterations: usize) -> Result<LooRun<T>> {
    spec.validate(data)?;
    let mut states = vec![LooState::initial(data.n(), spec.theta0.view())];
    let mut stats = Vec::with_capacity(iterations);
    for t in 1..=iterations {
        let batch = spec.batch.batch_at(t)?;
        let (next, st) = loo_step(spec, data, &states[t - 1], &batch, t)?;
        states.push(next);
        stats.push(st);
    }
    Ok(LooRun { states, stats })
}
