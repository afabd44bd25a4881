//! Iterative approximate leave-one-out tracking.
//!
//! Each leave-one-out gradient `∇g(𝒵_{S_t∖i}; θ̂₋ᵢ⁽ᵗ⁻¹⁾)` is replaced by its
//! second-order expansion around the full-data iterate `θ̂⁽ᵗ⁻¹⁾`:
//!
//! ```text
//! θ′ = θ̃₋ᵢ⁽ᵗ⁻¹⁾ − α_t ( ∇g(𝒵_{S_t∖i}; θ̂⁽ᵗ⁻¹⁾) + ∇²g(𝒵_{S_t∖i}; θ̂⁽ᵗ⁻¹⁾)[θ̃₋ᵢ⁽ᵗ⁻¹⁾ − θ̂⁽ᵗ⁻¹⁾] )
//! θ̃₋ᵢ⁽ᵗ⁾ = prox_{α_t h}(θ′)
//! ```
//!
//! Because the expansion point is shared by all `i`, one batch gradient
//! `G_t` and one batch Hessian `H_t` serve every row; row `i` only
//! subtracts its own rank-one contribution when `i ∈ S_t`. The per-step
//! cost is `|S_t|` gradient and Hessian evaluations plus `n` matrix-vector
//! products, instead of `n·|S_t|` gradient evaluations for exact tracking.
//!
//! Synchronization contract: step `t` reads the full-data iterate at
//! `t − 1`. When co-running, call [`iacv_step`] before advancing the full
//! trajectory.

use std::time::Instant;

use ndarray::{s, Array1, Array2, ArrayView1, Axis, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact_loo::{batch_view, position_in, LooState, StepStats, ROW_CHUNK};
use crate::model::{check_dim, weighted_gram, Dataset};
use crate::scalar::Real;
use crate::schedule::IndexSet;
use crate::trajectory::{full_step_with_batch, SolverSpec, TrajectoryRecord};

/// Batch gradient and Hessian of `g` at the shared expansion point, with
/// the per-point derivative coefficients needed for the rank-one removals.
struct SharedExpansion<T> {
    grad: Array1<T>,
    hess: Array2<T>,
    d1: Array1<T>,
    d2: Array1<T>,
}

fn shared_expansion<T: Real>(
    spec: &SolverSpec<T>,
    xs: &Array2<T>,
    ys: &Array1<T>,
    theta: ArrayView1<'_, T>,
) -> Result<SharedExpansion<T>> {
    let loss = spec.objective.loss;
    let p = theta.len();
    let (mut grad, mut hess, d1, d2) = if xs.nrows() == 0 {
        (Array1::zeros(p), Array2::zeros((p, p)), Array1::zeros(0), Array1::zeros(0))
    } else {
        let eta = xs.dot(&theta);
        let mut d1 = Array1::<T>::zeros(eta.len());
        let mut d2 = Array1::<T>::zeros(eta.len());
        Zip::from(&mut d1).and(&mut d2).and(&eta).and(ys).for_each(|a, b, &e, &y| {
            let l = loss.link(e, y);
            *a = l.d1;
            *b = l.d2;
        });
        (xs.t().dot(&d1), weighted_gram(xs.view(), d2.view()), d1, d2)
    };
    grad += &spec.objective.smooth.grad(theta)?;
    let c = spec.objective.smooth.hess_diag()?;
    for k in 0..p {
        hess[[k, k]] += c;
    }
    Ok(SharedExpansion { grad, hess, d1, d2 })
}

/// Advances every row of the approximate leave-one-out state by one step.
pub fn iacv_step<T: Real>(
    spec: &SolverSpec<T>,
    data: &Dataset<T>,
    full_theta_prev: ArrayView1<'_, T>,
    state: &LooState<T>,
    batch: &IndexSet,
    t: usize,
) -> Result<(LooState<T>, StepStats)> {
    check_dim(data.n(), state.n())?;
    check_dim(data.p(), state.p())?;
    check_dim(data.p(), full_theta_prev.len())?;
    check_dim(data.n(), batch.universe())?;
    if t == 0 || state.t + 1 != t {
        return Err(Error::InvalidArgument(format!("state is at t = {}, cannot take step {t}", state.t)));
    }
    let start = Instant::now();
    let alpha = spec.step.step_at(t)?;
    let view = batch_view(data, batch);
    let shared = shared_expansion(spec, &view.xs, &view.ys, full_theta_prev)?;

    let n = data.n();
    let p = data.p();
    let x = data.x();
    let nonsmooth = spec.objective.nonsmooth;
    // offsets from the expansion point and their images under H_t
    let offsets = &state.rows - &full_theta_prev;
    let h_offsets = offsets.dot(&shared.hess);

    let mut next = Array2::<T>::zeros((n, p));
    let results: Vec<Result<()>> = next
        .axis_chunks_iter_mut(Axis(0), ROW_CHUNK)
        .into_par_iter()
        .enumerate()
        .map(|(c, mut out)| {
            let first = c * ROW_CHUNK;
            let rows = out.nrows();
            let block = s![first..first + rows, ..];
            for (r, ((mut dst, offset), hv)) in out
                .outer_iter_mut()
                .zip(offsets.slice(block).outer_iter())
                .zip(h_offsets.slice(block).outer_iter())
                .enumerate()
            {
                let i = first + r;
                let mut step = &shared.grad + &hv;
                if let Some(pos) = position_in(batch, i) {
                    let xi = x.row(i);
                    let coef = shared.d1[pos] + shared.d2[pos] * xi.dot(&offset);
                    step.scaled_add(-coef, &xi);
                }
                let current = state.rows.row(i);
                let moved = &current - &(step * alpha);
                dst.assign(&nonsmooth.prox(moved.view(), alpha)?);
            }
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }
    let next = LooState { rows: next, t };
    next.ensure_finite(t)?;
    let evals = batch.len() as u64;
    Ok((next, StepStats { grad_evals: evals, hess_evals: evals, elapsed: start.elapsed() }))
}

/// Full trajectory, approximate leave-one-out states and per-step work.
#[derive(Debug, Clone)]
pub struct IacvRun<T> {
    pub full: TrajectoryRecord<T>,
    pub states: Vec<LooState<T>>,
    pub stats: Vec<StepStats>,
}

/// Co-runs the full trajectory and the approximate leave-one-out tracker
/// for `iterations` steps, all rows starting at `θ⁽⁰⁾`.
pub fn iacv_run<T: Real>(spec: &SolverSpec<T>, data: &Dataset<T>, iterations: usize) -> Result<IacvRun<T>> {
    spec.validate(data)?;
    let mut full = TrajectoryRecord { iterates: vec![spec.theta0.clone()], wall: Vec::with_capacity(iterations) };
    let mut states = vec![LooState::initial(data.n(), spec.theta0.view())];
    let mut stats = Vec::with_capacity(iterations);
    for t in 1..=iterations {
        let batch = spec.batch.batch_at(t)?;
        let prev = full.iterates[t - 1].view();
        let (next, st) = iacv_step(spec, data, prev, &states[t - 1], &batch, t)?;
        let clock = Instant::now();
        let theta = full_step_with_batch(spec, data, prev, &batch, t)?;
        full.wall.push(clock.elapsed());
        full.iterates.push(theta);
        states.push(next);
        stats.push(st);
    }
    Ok(IacvRun { full, states, stats })
}
