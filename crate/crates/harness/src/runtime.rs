//! Per-iteration cost of exact leave-one-out tracking against IACV plus the
//! full-data step, measured on one trial of a configuration.

use std::time::{Duration, Instant};

use iacv::trajectory::full_step_with_batch;
use iacv::{iacv_step, loo_step, quartiles, LooState};

use crate::config::ExperimentConfig;
use crate::runner::trial_problem;

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeReport {
    pub n: usize,
    pub p: usize,
    pub iterations: usize,
    pub exact_median_seconds: f64,
    pub iacv_median_seconds: f64,
    pub full_median_seconds: f64,
    /// Exact median over (IACV + full) median.
    pub speedup: f64,
    pub exact_grad_evals_per_iter: f64,
    pub iacv_grad_evals_per_iter: f64,
    pub iacv_hess_evals_per_iter: f64,
}

impl std::fmt::Display for RuntimeReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "n = {}, p = {}, iterations = {}", self.n, self.p, self.iterations)?;
        writeln!(f, "median seconds per iteration")?;
        writeln!(f, "  exact  {:.6e}", self.exact_median_seconds)?;
        writeln!(f, "  iacv   {:.6e}", self.iacv_median_seconds)?;
        writeln!(f, "  full   {:.6e}", self.full_median_seconds)?;
        writeln!(f, "speedup exact / (iacv + full) = {:.2}", self.speedup)?;
        write!(
            f,
            "evaluations per iteration: exact {} gradients, iacv {} gradients + {} Hessians",
            self.exact_grad_evals_per_iter, self.iacv_grad_evals_per_iter, self.iacv_hess_evals_per_iter
        )
    }
}

fn median_secs(v: &[Duration]) -> f64 {
    let secs: Vec<f64> = v.iter().map(Duration::as_secs_f64).collect();
    quartiles(&secs).map_or(f64::NAN, |q| q.median)
}

/// Times `iterations` steps of trial 0 (`cfg.iterations` when `None`).
pub fn compare_runtime(cfg: &ExperimentConfig, iterations: Option<usize>) -> anyhow::Result<RuntimeReport> {
    cfg.validate()?;
    let iterations = iterations.unwrap_or(cfg.iterations);
    anyhow::ensure!(iterations >= 1, "need at least one iteration");
    let (data, spec) = trial_problem(cfg, 0)?;
    let n = data.n();
    let mut theta = spec.theta0.clone();
    let mut exact = LooState::initial(n, theta.view());
    let mut approx = exact.clone();
    let (mut te, mut ti, mut tf) = (Vec::new(), Vec::new(), Vec::new());
    let (mut ge, mut gi, mut hi) = (0u64, 0u64, 0u64);
    for t in 1..=iterations {
        let batch = spec.batch.batch_at(t)?;
        let (next, st) = iacv_step(&spec, &data, theta.view(), &approx, &batch, t)?;
        approx = next;
        ti.push(st.elapsed);
        gi += st.grad_evals;
        hi += st.hess_evals;
        let (next, st) = loo_step(&spec, &data, &exact, &batch, t)?;
        exact = next;
        te.push(st.elapsed);
        ge += st.grad_evals;
        let clock = Instant::now();
        theta = full_step_with_batch(&spec, &data, theta.view(), &batch, t)?;
        tf.push(clock.elapsed());
    }
    let (e, i, f) = (median_secs(&te), median_secs(&ti), median_secs(&tf));
    let per = |x: u64| x as f64 / iterations as f64;
    Ok(RuntimeReport {
        n,
        p: data.p(),
        iterations,
        exact_median_seconds: e,
        iacv_median_seconds: i,
        full_median_seconds: f,
        speedup: e / (i + f),
        exact_grad_evals_per_iter: per(ge),
        iacv_grad_evals_per_iter: per(gi),
        iacv_hess_evals_per_iter: per(hi),
    })
}
