//! Experiment configuration, read from TOML.
//!
//! ```toml
//! solver = "gd"            # gd | sgd | proxgd
//! n = 1000                 # data points
//! p = 20                   # dimension
//! sparsity = 5             # nonzeros in the true parameter
//! lambda_coef = 1e-6       # λ = lambda_coef · n (ridge for gd/sgd, l1 for proxgd)
//! iterations = 1000        # T
//! trials = 20
//! seed = 1                 # trial k uses seed + k
//! methods = ["exact", "iacv", "ns", "ij", "baseline"]
//! output_dir = "out/gd-n1000"
//! parallel_trials = true   # optional, default true
//!
//! [step]
//! kind = "constant"        # constant | epoch_doubling
//! scale = 0.5              # α = scale / divisor
//! divide_by = "n"          # n | k | one
//! epoch_length = 1000      # epoch_doubling only
//!
//! [batch]
//! kind = "full"            # full | bernoulli | fixed_size
//! size = 100               # K, stochastic kinds only
//!
//! [cadence]
//! kind = "auto"            # auto | every | log
//! every = 10               # every only
//! points = 200             # log only
//! ```
//!
//! Exact leave-one-out always runs, since every estimator is scored against
//! it; listing `exact` only adds its own rows to the output. `auto` records
//! every iteration when `T ≤ 1000` and 200 log-spaced checkpoints
//! otherwise. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use iacv::{BatchSchedule, LossModel, Objective, SolverSpec, StepSchedule};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Gd,
    Sgd,
    Proxgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Iacv,
    Ns,
    Ij,
    Baseline,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Iacv => "iacv",
            Method::Ns => "ns",
            Method::Ij => "ij",
            Method::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Constant,
    EpochDoubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Divisor {
    N,
    K,
    One,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    pub kind: StepKind,
    pub scale: f64,
    pub divide_by: Divisor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch_length: Option<usize>,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self { kind: StepKind::Constant, scale: 0.5, divide_by: Divisor::N, epoch_length: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchKindName {
    Full,
    Bernoulli,
    FixedSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    pub kind: BatchKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self { kind: BatchKindName::Full, size: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CadenceKind {
    Auto,
    Every,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CadenceConfig {
    pub kind: CadenceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

impl Default for CadenceConfig {
    fn default() -> Self {
        Self { kind: CadenceKind::Auto, every: None, points: None }
    }
}

const AUTO_EVERY_LIMIT: usize = 1000;
const DEFAULT_LOG_POINTS: usize = 200;

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub solver: Solver,
    pub n: usize,
    pub p: usize,
    pub sparsity: usize,
    pub lambda_coef: f64,
    pub iterations: usize,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub output_dir: PathBuf,
    #[serde(default = "default_true")]
    pub parallel_trials: bool,
    #[serde(default)]
    pub step: StepConfig,
    #[serde(default)]
    pub batch: BatchConfig,
    #[serde(default)]
    pub cadence: CadenceConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable in TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.n < 2 || self.p == 0 {
            return bad(format!("need n ≥ 2 and p ≥ 1, got n = {}, p = {}", self.n, self.p));
        }
        if self.sparsity == 0 || self.sparsity > self.p {
            return bad(format!("sparsity {} must lie in 1..={}", self.sparsity, self.p));
        }
        if !(self.lambda_coef >= 0.0) || !self.lambda_coef.is_finite() {
            return bad("lambda_coef must be a finite nonnegative number".into());
        }
        if self.trials == 0 {
            return bad("trials must be ≥ 1".into());
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        let mut sorted = self.methods.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.methods.len() {
            return bad("methods contain duplicates".into());
        }
        let stochastic = self.batch.kind != BatchKindName::Full;
        match (self.solver, stochastic) {
            (Solver::Sgd, false) => return bad("sgd needs a bernoulli or fixed_size batch".into()),
            (Solver::Gd | Solver::Proxgd, true) => return bad("gd and proxgd use full batches".into()),
            _ => {}
        }
        if stochastic {
            match self.batch.size {
                Some(k) if k >= 1 && k <= self.n => {}
                _ => return bad(format!("batch.size must lie in 1..={}", self.n)),
            }
        } else if self.batch.size.is_some() {
            return bad("batch.size only applies to stochastic batches".into());
        }
        if !(self.step.scale > 0.0) || !self.step.scale.is_finite() {
            return bad("step.scale must be positive".into());
        }
        if self.step.divide_by == Divisor::K && !stochastic {
            return bad("step.divide_by = \"k\" needs a stochastic batch".into());
        }
        match (self.step.kind, self.step.epoch_length) {
            (StepKind::EpochDoubling, Some(l)) if l >= 1 => {}
            (StepKind::EpochDoubling, _) => return bad("epoch_doubling needs epoch_length ≥ 1".into()),
            (StepKind::Constant, Some(_)) => return bad("epoch_length only applies to epoch_doubling".into()),
            (StepKind::Constant, None) => {}
        }
        match self.cadence.kind {
            CadenceKind::Every if self.cadence.every.unwrap_or(0) == 0 => {
                return bad("cadence.every must be ≥ 1".into())
            }
            CadenceKind::Log if self.cadence.points == Some(0) => return bad("cadence.points must be ≥ 1".into()),
            _ => {}
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_coef * self.n as f64
    }

    pub fn alpha(&self) -> f64 {
        let div = match self.step.divide_by {
            Divisor::N => self.n,
            Divisor::K => self.batch.size.unwrap_or(self.n),
            Divisor::One => 1,
        };
        self.step.scale / div as f64
    }

    pub fn objective(&self) -> iacv::Result<Objective<f64>> {
        match self.solver {
            Solver::Gd | Solver::Sgd => Objective::ridge(LossModel::Logistic, self.lambda()),
            Solver::Proxgd => Objective::lasso(LossModel::Logistic, self.lambda()),
        }
    }

    pub fn step_schedule(&self) -> iacv::Result<StepSchedule<f64>> {
        match self.step.kind {
            StepKind::Constant => StepSchedule::constant(self.alpha()),
            StepKind::EpochDoubling => StepSchedule::epoch_doubling(self.alpha(), self.step.epoch_length.unwrap_or(0)),
        }
    }

    pub fn batch_schedule(&self, batch_seed: u64) -> iacv::Result<BatchSchedule> {
        let k = self.batch.size.unwrap_or(self.n);
        match self.batch.kind {
            BatchKindName::Full => Ok(BatchSchedule::full(self.n)),
            BatchKindName::Bernoulli => BatchSchedule::bernoulli(self.n, k, batch_seed),
            BatchKindName::FixedSize => BatchSchedule::fixed_size(self.n, k, batch_seed),
        }
    }

    pub fn solver_spec(&self, batch_seed: u64) -> iacv::Result<SolverSpec<f64>> {
        Ok(SolverSpec::new(self.objective()?, self.step_schedule()?, self.batch_schedule(batch_seed)?, self.p))
    }

    /// Iterations at which metrics are recorded, ascending, all in `1..=T`.
    pub fn checkpoints(&self) -> Vec<usize> {
        let t_max = self.iterations;
        if t_max == 0 {
            return Vec::new();
        }
        let every = |m: usize| {
            let mut v: Vec<usize> = (1..=t_max / m).map(|k| k * m).collect();
            if v.last() != Some(&t_max) {
                v.push(t_max);
            }
            v
        };
        match self.cadence.kind {
            CadenceKind::Every => every(self.cadence.every.unwrap_or(1)),
            CadenceKind::Auto if t_max <= AUTO_EVERY_LIMIT => every(1),
            CadenceKind::Auto | CadenceKind::Log => {
                log_spaced(t_max, self.cadence.points.unwrap_or(DEFAULT_LOG_POINTS))
            }
        }
    }

    pub fn wants(&self, m: Method) -> bool {
        self.methods.contains(&m)
    }

    /// Seeds for trial `k`: the dataset uses `seed + k`; the batch stream is
    /// a separate mix of the same value so the two never share a stream.
    pub fn trial_seeds(&self, trial: usize) -> (u64, u64) {
        let data = self.seed.wrapping_add(trial as u64);
        (data, splitmix64(data ^ 0x6261_7463_685f_7365))
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Up to `points` integers in `1..=t_max`, evenly spaced in `log t`,
/// always including both ends.
pub fn log_spaced(t_max: usize, points: usize) -> Vec<usize> {
    if points <= 1 || t_max == 1 {
        return vec![t_max];
    }
    let top = (t_max as f64).ln();
    let mut v: Vec<usize> =
        (0..points).map(|k| ((top * k as f64 / (points - 1) as f64).exp().round() as usize).clamp(1, t_max)).collect();
    v.push(t_max);
    v.sort_unstable();
    v.dedup();
    v
}
