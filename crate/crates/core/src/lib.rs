//! Leave-one-out cross-validation along the iterates of gradient descent,
//! stochastic gradient descent and proximal gradient descent.
//!
//! The exact leave-one-out trajectories ([`exact_loo`]) cost `n` times a
//! full run. [`iacv`] tracks the same `n` trajectories with one shared
//! batch gradient and Hessian per step. [`onestep`] holds the Newton-step
//! and jackknife estimators evaluated at a single iterate, plus the
//! theoretical error bound recursion.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the `*64` aliases below fix `f64`.

// `!(x > 0)` style checks are used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod error;
pub mod exact_loo;
pub mod iacv;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod onestep;
pub mod scalar;
pub mod schedule;
pub mod trajectory;

pub use error::{Error, Result};
pub use exact_loo::{loo_step, run_loo, LooRun, LooState, StepStats};
pub use iacv::{iacv_run, iacv_step, IacvRun};
pub use metrics::{cv_loss, err_approx, err_cv, quartiles, CvError, Quartiles, TimeLedger};
pub use model::{Dataset, LossModel, Objective, Regularizer};
pub use onestep::{along_path_estimates, OneStepMethod, TheoryConstants};
pub use scalar::Real;
pub use schedule::{BatchKind, BatchSchedule, IndexSet, StepSchedule};
pub use trajectory::{SolverKind, SolverSpec, TrajectoryRecord};

pub type Dataset64 = Dataset<f64>;
pub type Objective64 = Objective<f64>;
pub type SolverSpec64 = SolverSpec<f64>;
pub type LooState64 = LooState<f64>;
pub type StepSchedule64 = StepSchedule<f64>;
pub type TheoryConstants64 = TheoryConstants<f64>;

pub type Dataset32 = Dataset<f32>;
pub type SolverSpec32 = SolverSpec<f32>;
pub type LooState32 = LooState<f32>;
