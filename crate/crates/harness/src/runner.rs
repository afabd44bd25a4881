//! Runs a configured experiment: per trial, the full trajectory, exact
//! leave-one-out, IACV and the along-path estimators are co-run on one
//! shared batch sequence and scored at each checkpoint.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use iacv::datagen::gen_logistic;
use iacv::exact_loo::StepStats;
use iacv::trajectory::full_step_with_batch;
use iacv::{
    along_path_estimates, cv_loss, err_approx, err_cv, iacv_step, loo_step, quartiles, Dataset, LooState,
    OneStepMethod, SolverSpec, TimeLedger,
};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Method};

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub trial: usize,
    pub method: String,
    pub t: usize,
    pub err_approx: f64,
    pub err_cv: f64,
    /// NaN when the exact CV loss is zero.
    pub rel_err_cv: f64,
    pub cv_loss: f64,
    /// Exact and IACV: cumulative tracking time (IACV includes the full
    /// trajectory). NS and IJ: cost of the single evaluation at `t`.
    pub cum_wall_time_seconds: f64,
    pub note: String,
}

pub const METRICS_HEADER: &str = "trial,method,t,err_approx,err_cv,rel_err_cv,cv_loss,cum_wall_time_seconds,note";

fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

fn csv_note(note: &str) -> String {
    if note.contains([',', '"', '\n']) {
        format!("\"{}\"", note.replace('"', "\"\""))
    } else {
        note.to_string()
    }
}

impl MetricsRow {
    /// Every column except wall time, which differs between runs.
    fn deterministic_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.trial,
            self.method,
            self.t,
            fmt_f(self.err_approx),
            fmt_f(self.err_cv),
            fmt_f(self.rel_err_cv),
            fmt_f(self.cv_loss),
            csv_note(&self.note)
        )
    }

    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.method,
            self.t,
            fmt_f(self.err_approx),
            fmt_f(self.err_cv),
            fmt_f(self.rel_err_cv),
            fmt_f(self.cv_loss),
            fmt_f(self.cum_wall_time_seconds),
            csv_note(&self.note)
        )
    }
}

/// Work totals for one method in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub trial: usize,
    pub method: String,
    /// Steps taken, or estimator evaluations for NS and IJ.
    pub steps: usize,
    pub total_seconds: f64,
    pub median_step_seconds: f64,
    pub grad_evals: u64,
    pub hess_evals: u64,
}

pub const TIMING_HEADER: &str = "trial,method,steps,total_seconds,median_step_seconds,grad_evals,hess_evals";

/// Median and quartiles of one metric for one method at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub t: usize,
    pub metric: &'static str,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub count: usize,
}

pub const SUMMARY_HEADER: &str = "method,t,metric,median,q1,q3,count";
pub const SUMMARY_METRICS: [&str; 5] = ["err_approx", "err_cv", "rel_err_cv", "cv_loss", "cum_wall_time_seconds"];

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub metrics: Vec<MetricsRow>,
    pub timing: Vec<TimingRow>,
    pub summary: Vec<SummaryRow>,
    /// SHA-256 of the deterministic metrics columns.
    pub checksum: String,
}

impl RunOutcome {
    pub fn failed_trials(&self) -> Vec<usize> {
        self.metrics.iter().filter(|r| r.method == "error").map(|r| r.trial).collect()
    }

    /// Rows for `method`, in trial then iteration order.
    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a MetricsRow> + 'a {
        self.metrics.iter().filter(move |r| r.method == method)
    }

    pub fn summary_for(&self, method: &str, metric: &str) -> Vec<&SummaryRow> {
        self.summary.iter().filter(|r| r.method == method && r.metric == metric).collect()
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut m = String::from(METRICS_HEADER);
        m.push('\n');
        for r in &self.metrics {
            m.push_str(&r.csv_line());
            m.push('\n');
        }
        std::fs::write(dir.join("metrics.csv"), m)?;

        let mut s = String::from(SUMMARY_HEADER);
        s.push('\n');
        for r in &self.summary {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.method,
                r.t,
                r.metric,
                fmt_f(r.median),
                fmt_f(r.q1),
                fmt_f(r.q3),
                r.count
            );
        }
        std::fs::write(dir.join("summary.csv"), s)?;

        let mut tm = String::from(TIMING_HEADER);
        tm.push('\n');
        for r in &self.timing {
            let _ = writeln!(
                tm,
                "{},{},{},{},{},{},{}",
                r.trial,
                r.method,
                r.steps,
                fmt_f(r.total_seconds),
                fmt_f(r.median_step_seconds),
                r.grad_evals,
                r.hess_evals
            );
        }
        std::fs::write(dir.join("timing.csv"), tm)?;
        std::fs::write(dir.join("checksum.sha256"), format!("{}  metrics.csv (deterministic columns)\n", self.checksum))
    }
}

/// Runs every trial of `cfg`. A failing trial contributes the rows it
/// produced before the failure plus one `method = "error"` row.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome, crate::config::ConfigError> {
    cfg.validate()?;
    let checkpoints = cfg.checkpoints();
    let trial = |k: usize| run_trial(cfg, k, &checkpoints);
    let per_trial: Vec<TrialOutput> = if cfg.parallel_trials {
        (0..cfg.trials).into_par_iter().map(trial).collect()
    } else {
        (0..cfg.trials).map(trial).collect()
    };
    let mut metrics = Vec::new();
    let mut timing = Vec::new();
    for out in per_trial {
        metrics.extend(out.metrics);
        timing.extend(out.timing);
    }
    let summary = summarize(&metrics);
    let checksum = checksum(&metrics);
    Ok(RunOutcome { metrics, timing, summary, checksum })
}

pub fn checksum(metrics: &[MetricsRow]) -> String {
    let mut h = Sha256::new();
    for r in metrics {
        h.update(r.deterministic_line().as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Quartiles across trials for every (method, t, metric); error rows and
/// non-finite values are left out.
pub fn summarize(metrics: &[MetricsRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize), Vec<&MetricsRow>> = BTreeMap::new();
    for r in metrics.iter().filter(|r| r.method != "error") {
        groups.entry((r.method.clone(), r.t)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((method, t), rows) in groups {
        for metric in SUMMARY_METRICS {
            let values: Vec<f64> = rows
                .iter()
                .map(|r| match metric {
                    "err_approx" => r.err_approx,
                    "err_cv" => r.err_cv,
                    "rel_err_cv" => r.rel_err_cv,
                    "cv_loss" => r.cv_loss,
                    _ => r.cum_wall_time_seconds,
                })
                .collect();
            if let Some(q) = quartiles(&values) {
                let count = values.iter().filter(|v| v.is_finite()).count();
                out.push(SummaryRow { method: method.clone(), t, metric, median: q.median, q1: q.q1, q3: q.q3, count });
            }
        }
    }
    out
}

struct TrialOutput {
    metrics: Vec<MetricsRow>,
    timing: Vec<TimingRow>,
}

/// Wall time and evaluation counts per method within one trial.
#[derive(Default)]
struct Work {
    ledger: TimeLedger,
    steps: Vec<Duration>,
    grad_evals: u64,
    hess_evals: u64,
}

impl Work {
    fn record(&mut self, d: Duration, grad: u64, hess: u64) {
        self.ledger.push(d);
        self.steps.push(d);
        self.grad_evals += grad;
        self.hess_evals += hess;
    }

    fn add_stats(&mut self, st: &StepStats) {
        self.record(st.elapsed, st.grad_evals, st.hess_evals);
    }

    fn row(&self, trial: usize, method: &str) -> TimingRow {
        let secs: Vec<f64> = self.steps.iter().map(Duration::as_secs_f64).collect();
        TimingRow {
            trial,
            method: method.into(),
            steps: self.steps.len(),
            total_seconds: self.ledger.total().as_secs_f64(),
            median_step_seconds: quartiles(&secs).map_or(f64::NAN, |q| q.median),
            grad_evals: self.grad_evals,
            hess_evals: self.hess_evals,
        }
    }
}

#[derive(Default)]
struct TrialWork {
    full: Work,
    exact: Work,
    iacv: Work,
    ns: Work,
    ij: Work,
}

fn run_trial(cfg: &ExperimentConfig, trial: usize, checkpoints: &[usize]) -> TrialOutput {
    let mut metrics = Vec::new();
    let mut work = TrialWork::default();
    let mut t_reached = 0;
    if let Err(e) = drive(cfg, trial, checkpoints, &mut metrics, &mut work, &mut t_reached) {
        metrics.push(MetricsRow {
            trial,
            method: "error".into(),
            t: t_reached,
            err_approx: f64::NAN,
            err_cv: f64::NAN,
            rel_err_cv: f64::NAN,
            cv_loss: f64::NAN,
            cum_wall_time_seconds: f64::NAN,
            note: e.to_string(),
        });
    }
    let mut timing = vec![work.full.row(trial, "full"), work.exact.row(trial, "exact")];
    for (m, w, name) in [(Method::Iacv, &work.iacv, "iacv"), (Method::Ns, &work.ns, "ns"), (Method::Ij, &work.ij, "ij")]
    {
        if cfg.wants(m) {
            timing.push(w.row(trial, name));
        }
    }
    TrialOutput { metrics, timing }
}

/// Dataset and solver for trial `k` of `cfg`.
pub fn trial_problem(cfg: &ExperimentConfig, trial: usize) -> iacv::Result<(Dataset<f64>, SolverSpec<f64>)> {
    let (data_seed, batch_seed) = cfg.trial_seeds(trial);
    let (data, _) = gen_logistic::<f64>(cfg.n, cfg.p, cfg.sparsity, data_seed)?;
    let spec = cfg.solver_spec(batch_seed)?;
    spec.validate(&data)?;
    Ok((data, spec))
}

fn drive(
    cfg: &ExperimentConfig,
    trial: usize,
    checkpoints: &[usize],
    out: &mut Vec<MetricsRow>,
    work: &mut TrialWork,
    t_reached: &mut usize,
) -> iacv::Result<()> {
    let (data, spec) = trial_problem(cfg, trial)?;
    let n = data.n();
    let model = spec.objective.loss;
    let mut theta = spec.theta0.clone();
    let mut exact = LooState::initial(n, theta.view());
    let mut approx = cfg.wants(Method::Iacv).then(|| exact.clone());
    let mut next_cp = checkpoints.iter().peekable();

    for t in 1..=cfg.iterations {
        *t_reached = t;
        let batch = spec.batch.batch_at(t)?;
        if let Some(state) = approx.as_mut() {
            let (next, st) = iacv_step(&spec, &data, theta.view(), state, &batch, t)?;
            work.iacv.add_stats(&st);
            *state = next;
        }
        let (next, st) = loo_step(&spec, &data, &exact, &batch, t)?;
        work.exact.add_stats(&st);
        exact = next;
        let clock = Instant::now();
        theta = full_step_with_batch(&spec, &data, theta.view(), &batch, t)?;
        work.full.record(clock.elapsed(), batch.len() as u64, 0);

        if next_cp.peek() != Some(&&t) {
            continue;
        }
        next_cp.next();
        let exact_cv = cv_loss(model, &data, &exact)?;
        let row = |method: &str, err_a: f64, cv: f64, time: f64| {
            let abs = (cv - exact_cv).abs();
            MetricsRow {
                trial,
                method: method.into(),
                t,
                err_approx: err_a,
                err_cv: abs,
                rel_err_cv: if exact_cv != 0.0 { abs / exact_cv } else { f64::NAN },
                cv_loss: cv,
                cum_wall_time_seconds: time,
                note: String::new(),
            }
        };
        if cfg.wants(Method::Exact) {
            out.push(row("exact", 0.0, exact_cv, work.exact.ledger.total().as_secs_f64()));
        }
        if let Some(state) = approx.as_ref() {
            let e = err_cv(&exact, state, model, &data)?;
            let time = (work.iacv.ledger.total() + work.full.ledger.total()).as_secs_f64();
            out.push(row("iacv", err_approx(&exact, state)?, e.estimate_cv, time));
        }
        for (method, kind, w) in [
            (Method::Ns, OneStepMethod::NewtonStep, &mut work.ns),
            (Method::Ij, OneStepMethod::Jackknife, &mut work.ij),
        ] {
            if !cfg.wants(method) {
                continue;
            }
            let clock = Instant::now();
            let est = along_path_estimates(&data, &spec.objective, theta.view(), t, kind)?;
            let elapsed = clock.elapsed();
            w.record(elapsed, n as u64, n as u64);
            let e = err_cv(&exact, &est, model, &data)?;
            out.push(row(method.name(), err_approx(&exact, &est)?, e.estimate_cv, elapsed.as_secs_f64()));
        }
        if cfg.wants(Method::Baseline) {
            let est = LooState::replicated(n, theta.view(), t);
            let e = err_cv(&exact, &est, model, &data)?;
            out.push(row("baseline", err_approx(&exact, &est)?, e.estimate_cv, 0.0));
        }
    }
    Ok(())
}
