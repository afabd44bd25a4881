use std::path::PathBuf;

use iacv::datagen::gen_logistic;
use iacv::exact_loo::run_loo;
use iacv::trajectory::run;
use iacv_harness::config::{BatchConfig, BatchKindName, CadenceConfig, CadenceKind, Divisor, StepConfig, StepKind};
use iacv_harness::{run_experiment, ExperimentConfig, Method, Solver};

fn small(solver: Solver) -> ExperimentConfig {
    let stochastic = solver == Solver::Sgd;
    ExperimentConfig {
        solver,
        n: 40,
        p: 4,
        sparsity: 2,
        lambda_coef: 1e-6,
        iterations: 30,
        trials: 3,
        seed: 11,
        methods: vec![Method::Exact, Method::Iacv, Method::Ns, Method::Ij, Method::Baseline],
        output_dir: PathBuf::from("unused"),
        parallel_trials: true,
        step: StepConfig {
            kind: StepKind::Constant,
            scale: 0.5,
            divide_by: if stochastic { Divisor::K } else { Divisor::N },
            epoch_length: None,
        },
        batch: if stochastic {
            BatchConfig { kind: BatchKindName::FixedSize, size: Some(10) }
        } else {
            BatchConfig::default()
        },
        cadence: CadenceConfig { kind: CadenceKind::Every, every: Some(5), points: None },
    }
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
            names.push(path.file_stem().unwrap().to_string_lossy().into_owned());
        }
    }
    names.sort();
    assert_eq!(names, ["gd-n1000", "gd-n250", "gd-n5000-p50", "proxgd-n1000", "proxgd-n250", "sgd-K100", "sgd-K400"]);
}

#[test]
fn rows_cover_every_trial_method_and_checkpoint() {
    for solver in [Solver::Gd, Solver::Sgd, Solver::Proxgd] {
        let cfg = small(solver);
        let out = run_experiment(&cfg).unwrap();
        assert!(out.failed_trials().is_empty(), "{solver:?}: {:?}", out.failed_trials());
        assert_eq!(out.metrics.len(), 3 * 5 * 6);
        for trial in 0..3 {
            for m in ["exact", "iacv", "ns", "ij", "baseline"] {
                let ts: Vec<usize> =
                    out.metrics.iter().filter(|r| r.trial == trial && r.method == m).map(|r| r.t).collect();
                assert_eq!(ts, [5, 10, 15, 20, 25, 30], "{solver:?} {m}");
            }
        }
        for r in out.rows_for("exact") {
            assert_eq!((r.err_approx, r.err_cv), (0.0, 0.0));
        }
        let exact_cv: Vec<f64> = out.rows_for("exact").map(|r| r.cv_loss).collect();
        for m in ["iacv", "ns", "ij", "baseline"] {
            for (r, cv) in out.rows_for(m).zip(&exact_cv) {
                assert!(f64::abs(r.err_cv - f64::abs(r.cv_loss - cv)) <= 1e-15 * cv.max(1.0));
                assert!(f64::abs(r.rel_err_cv - r.err_cv / cv) <= 1e-15);
            }
        }
        // IACV time is cumulative, so nondecreasing within a trial
        let times: Vec<f64> = out.rows_for("iacv").filter(|r| r.trial == 0).map(|r| r.cum_wall_time_seconds).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn timing_separates_methods_and_counts_evaluations() {
    let cfg = small(Solver::Gd);
    let out = run_experiment(&cfg).unwrap();
    let row = |m: &str| out.timing.iter().find(|r| r.trial == 0 && r.method == m).unwrap();
    let (n, t) = (cfg.n as u64, cfg.iterations as u64);
    assert_eq!(row("full").grad_evals, n * t);
    assert_eq!(row("exact").grad_evals, n * (n - 1) * t);
    assert_eq!((row("iacv").grad_evals, row("iacv").hess_evals), (n * t, n * t));
    assert_eq!(row("ns").steps, 6);
    assert_eq!(out.timing.len(), 3 * 5);
}

#[test]
fn baseline_only_matches_direct_distance() {
    let mut cfg = small(Solver::Gd);
    cfg.methods = vec![Method::Baseline];
    cfg.trials = 1;
    let out = run_experiment(&cfg).unwrap();
    assert!(out.metrics.iter().all(|r| r.method == "baseline"));

    let (data_seed, batch_seed) = cfg.trial_seeds(0);
    let (data, _) = gen_logistic::<f64>(cfg.n, cfg.p, cfg.sparsity, data_seed).unwrap();
    let spec = cfg.solver_spec(batch_seed).unwrap();
    let full = run(&spec, &data, cfg.iterations).unwrap();
    let loo = run_loo(&spec, &data, cfg.iterations).unwrap();
    for r in out.rows_for("baseline") {
        let theta = &full.iterates[r.t];
        let mean: f64 =
            loo.states[r.t].rows.rows().into_iter().map(|row| (&row - theta).mapv(|v| v * v).sum().sqrt()).sum::<f64>()
                / cfg.n as f64;
        assert!(f64::abs(r.err_approx - mean) <= 1e-14 * mean.max(1e-300), "t = {}", r.t);
    }
}

#[test]
fn equal_configs_give_identical_bytes_apart_from_wall_time() {
    let mut cfg = small(Solver::Sgd);
    cfg.trials = 2;
    let a = run_experiment(&cfg).unwrap();
    cfg.parallel_trials = false;
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.checksum, b.checksum);

    let dir = tempfile::tempdir().unwrap();
    let (da, db) = (dir.path().join("a"), dir.path().join("b"));
    a.write(&da).unwrap();
    b.write(&db).unwrap();
    let strip_time = |path: PathBuf| -> Vec<String> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(7);
                f.join(",")
            })
            .collect()
    };
    assert_eq!(strip_time(da.join("metrics.csv")), strip_time(db.join("metrics.csv")));
    let summary = |p: PathBuf| -> Vec<String> {
        std::fs::read_to_string(p).unwrap().lines().filter(|l| !l.contains("cum_wall_time")).map(String::from).collect()
    };
    assert_eq!(summary(da.join("summary.csv")), summary(db.join("summary.csv")));
    assert_eq!(std::fs::read(da.join("checksum.sha256")).unwrap(), std::fs::read(db.join("checksum.sha256")).unwrap());

    cfg.seed += 1;
    assert_ne!(run_experiment(&cfg).unwrap().checksum, a.checksum);
}

#[test]
fn failing_trial_emits_diagnostic_row_and_others_proceed() {
    // more features than points and no ridge: the Newton-step Hessian is singular
    let mut cfg = small(Solver::Gd);
    cfg.n = 5;
    cfg.p = 8;
    cfg.lambda_coef = 0.0;
    cfg.trials = 2;
    cfg.methods = vec![Method::Exact, Method::Iacv, Method::Ns];
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.failed_trials(), [0, 1]);
    let err = out.metrics.iter().find(|r| r.method == "error").unwrap();
    assert_eq!(err.t, 5);
    assert!(err.note.contains("positive definite"), "{}", err.note);
    // rows computed before the failure are kept
    assert!(out.rows_for("iacv").any(|r| r.t == 5));
    assert!(out.summary.iter().all(|r| r.method != "error"));
}
