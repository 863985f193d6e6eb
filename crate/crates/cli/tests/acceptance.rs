//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use hybrid_kf::cost::{
    newkf_flops, quoted_reduction_report, reduction_ratio, sweep_grid, ukf_flops, CostModelInput,
    JRule, MRule,
};
use hybrid_kf::filters::{check_posterior, ekf_predict, newkf_predict, ukf_predict};
use hybrid_kf::gaussian::{symmetric_sigma_points, unscented_mean};
use hybrid_kf::models::{
    polynomial_test_model, CountingModel, GapController, LinearModel, MaglevConstants, MaglevModel,
    SystemModel, TimeSeriesModel, TimeSeriesParams,
};
use hybrid_kf::oracle::{
    convergence_order, gaussian_sin_moments, transform_moments, Moment, MomentEstimate, OrderFit,
    TransformMethod,
};
use hybrid_kf::{
    FilterKind, FilterOptions, FilterState, GaussianBelief, Matrix, ProposalKind, UtParams, Vector,
};
use hybrid_kf_cli::report::{strip_timing_columns, ExperimentReport, FilterResult};
use hybrid_kf_cli::{bench_a, bench_b, run_experiment, Benchmark, ExperimentConfig, FilterId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn no_input() -> Vector {
    Vector::zeros(0)
}

// 1 ---------------------------------------------------------------------

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Matrix {
    let b = random_matrix(rng, n, n);
    &b * b.transpose() / n as f64 + Matrix::identity(n, n) * floor
}

/// Textbook Kalman step, independent of the library's update code.
fn classical_kf(model: &LinearModel, x: &Vector, p: &Matrix, y: &Vector) -> (Vector, Matrix) {
    let xp = &model.a * x;
    let pp = &model.a * p * model.a.transpose() + &model.q;
    let s = &model.c * &pp * model.c.transpose() + &model.r;
    let k = &pp * model.c.transpose() * s.try_inverse().expect("S invertible");
    let xn = &xp + &k * (y - &model.c * &xp);
    let i_kc = Matrix::identity(x.len(), x.len()) - &k * &model.c;
    (
        xn,
        &i_kc * &pp * i_kc.transpose() + &k * &model.r * k.transpose(),
    )
}

fn linear_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let a = random_matrix(&mut rng, 3, 3);
    let radius = a
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let a = a * (0.95 / radius);
    let c = random_matrix(&mut rng, 2, 3);
    let q = random_spd(&mut rng, 3, 0.05);
    let r = random_spd(&mut rng, 2, 0.1);
    let model = LinearModel::new(a, c, q, r).unwrap();
    let lq = model.q.clone().cholesky().unwrap().l();
    let lr = model.r.clone().cholesky().unwrap().l();
    let mut x = Vector::from_column_slice(&[1.0, -0.5, 0.25]);
    let ys: Vec<Vector> = (0..100)
        .map(|_| {
            x = &model.a * &x
                + &lq * Vector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            &model.c * &x + &lr * Vector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal))
        })
        .collect();
    let opts = FilterOptions::default();
    let (mut worst_mean, mut worst_cov) = (0.0f64, 0.0f64);
    for kind in FilterKind::ALL {
        let mut state = FilterState::new(
            GaussianBelief::new(Vector::zeros(3), Matrix::identity(3, 3)).unwrap(),
            0,
        );
        let (mut xr, mut pr) = (Vector::zeros(3), Matrix::identity(3, 3));
        for y in &ys {
            state = kind.step(&state, &model, &no_input(), y, &opts).unwrap();
            (xr, pr) = classical_kf(&model, &xr, &pr, y);
            worst_mean = worst_mean.max((state.mean() - &xr).amax());
            worst_cov = worst_cov.max((state.cov() - &pr).norm() / pr.norm());
        }
    }
    outcome(
        worst_mean <= 1e-8 && worst_cov <= 1e-7,
        format!("all five filters vs classical KF over 100 steps: max mean err {worst_mean:.2e} (tol 1e-8), max relative cov err {worst_cov:.2e} (tol 1e-7)"),
    )
}

// 2 ---------------------------------------------------------------------

fn hybrid_identity() -> Outcome {
    let q = Matrix::from_diagonal(&Vector::from_column_slice(&[1e-12, 1e-10, 1e-8, 1e-2]));
    let maglev = MaglevModel::new(MaglevConstants::default(), 1e-3, q, 1e-10).unwrap();
    let post = GaussianBelief::new(
        Vector::from_column_slice(&[0.0101, 0.001, 0.13, 19.0]),
        Matrix::from_diagonal(&Vector::from_column_slice(&[1e-8, 1e-6, 1e-4, 4.0])),
    )
    .unwrap();
    let state = FilterState::new(post, 5);
    let u = Vector::from_element(1, GapController::default().voltage(&maglev, state.mean()));
    let opts = FilterOptions::default();
    let ekf = ekf_predict(&state, &maglev, &u, &opts).unwrap();
    let hybrid = newkf_predict(&state, &maglev, &u, &opts).unwrap();
    let ukf = ukf_predict(&state, &maglev, &u, &opts).unwrap();
    let bit_equal = ekf
        .cov()
        .iter()
        .zip(hybrid.prior.cov().iter())
        .all(|(a, b)| a.to_bits() == b.to_bits());

    let set = symmetric_sigma_points(&state.belief, &opts.ut).unwrap();
    let pts = set.map(|p| maglev.transition(p, &u, state.step)).unwrap();
    let ut_mean = unscented_mean(&set, &pts).unwrap();
    let scale = ut_mean.amax().max(1.0);
    let err_set = (hybrid.prior.mean() - &ut_mean).amax() / scale;
    let err_ukf = (hybrid.prior.mean() - ukf.mean()).amax() / scale;

    let ts = TimeSeriesModel::new(TimeSeriesParams::default()).unwrap();
    let ts_state = FilterState::new(GaussianBelief::scalar(2.0, 0.3).unwrap(), 7);
    let ts_ekf = ekf_predict(&ts_state, &ts, &no_input(), &opts).unwrap();
    let ts_hybrid = newkf_predict(&ts_state, &ts, &no_input(), &opts).unwrap();
    let ts_bits = ts_ekf.cov()[(0, 0)].to_bits() == ts_hybrid.prior.cov()[(0, 0)].to_bits();

    outcome(
        bit_equal && ts_bits && err_set <= 1e-12 && err_ukf <= 1e-12,
        format!("P- bit-equal to EKF: maglev {bit_equal}, time series {ts_bits}; mean vs UT mean on same set {err_set:.1e}, vs UKF predict {err_ukf:.1e} (tol 1e-12)"),
    )
}

// 3 ---------------------------------------------------------------------

fn taylor_hierarchy() -> Outcome {
    let scales = [0.2, 0.1, 0.05, 0.02, 0.01];
    let belief = GaussianBelief::scalar(0.5, 1.0).unwrap();
    let sin = |x: &Vector| Ok(x.map(f64::sin));
    let oracle = |b: &GaussianBelief| {
        let (m, v) = gaussian_sin_moments(b.mean()[0], b.cov()[(0, 0)]);
        Ok(MomentEstimate::exact(
            Vector::from_element(1, m),
            Matrix::from_element(1, 1, v),
        ))
    };
    // ±σ points with weights 1/(2n): the plain unscented set
    let params = UtParams::with_lambda(0.0);
    let fit =
        |m| convergence_order(m, sin, &belief, &scales, &params, Moment::Mean, oracle).unwrap();
    let (lin, ut) = (
        fit(TransformMethod::Linearized),
        fit(TransformMethod::Unscented),
    );
    let (
        OrderFit::Slope {
            order: lo,
            errors: le,
            ..
        },
        OrderFit::Slope {
            order: uo,
            errors: ue,
            ..
        },
    ) = (&lin, &ut)
    else {
        return outcome(false, format!("unexpected fits {lin:?} {ut:?}"));
    };
    let dominated = ue.iter().zip(le).all(|(u, l)| u <= l);
    outcome(
        (lo - 2.0).abs() <= 0.3 && (uo - 4.0).abs() <= 0.5 && dominated,
        format!("sin at mean 0.5: linearized mean order {lo:.3} (2.0 ± 0.3), UT mean order {uo:.3} (4.0 ± 0.5), UT error <= linearized at every sigma: {dominated}"),
    )
}

// 4 ---------------------------------------------------------------------

fn quadratic_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let model = polynomial_test_model(&[1.0, 0.0, 0.0], 0.0, 1.0).unwrap();
    let square = |x: &Vector| Ok(x.map(|v| v * v));
    let opts = FilterOptions::default();
    let (mut worst_ut, mut worst_hybrid, mut worst_ekf) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let mu = rng.random_range(-5.0..5.0);
        let p = rng.random_range(1e-3..4.0);
        let truth = mu * mu + p;
        let belief = GaussianBelief::scalar(mu, p).unwrap();
        let (ut, _) =
            transform_moments(TransformMethod::Unscented, square, &belief, &opts.ut).unwrap();
        let state = FilterState::new(belief, 0);
        let hybrid = newkf_predict(&state, &model, &no_input(), &opts).unwrap();
        let ekf = ekf_predict(&state, &model, &no_input(), &opts).unwrap();
        let rel = |v: f64| (v - truth).abs() / truth.max(1.0);
        worst_ut = worst_ut.max(rel(ut[0]));
        worst_hybrid = worst_hybrid.max(rel(hybrid.prior.mean()[0]));
        worst_ekf = worst_ekf.max(((truth - ekf.mean()[0]) - p).abs() / truth.max(1.0));
    }
    outcome(
        worst_ut <= 1e-10 && worst_hybrid <= 1e-10 && worst_ekf <= 1e-12,
        format!("100 random (mean, P): UT mean err {worst_ut:.1e}, NewKF mean err {worst_hybrid:.1e} (tol 1e-10); EKF error minus P {worst_ekf:.1e}"),
    )
}

// 5 ---------------------------------------------------------------------

fn flop_golden() -> Outcome {
    let a = CostModelInput::new(1, 1, 5).unwrap();
    let b = CostModelInput::new(4, 1, 30).unwrap();
    let (u, h, r) = (ukf_flops(&a), newkf_flops(&a), reduction_ratio(&a));
    let rb = reduction_ratio(&b);
    let report = quoted_reduction_report();
    let flagged = report
        .lines()
        .any(|l| l.contains("n=4, m=1, j=30") && l.contains("0.503") && l.contains("INCONSISTENT"));
    outcome(
        u == 117 && h == 40 && format!("{r:.3}") == "0.658" && format!("{rb:.3}") == "0.503" && flagged,
        format!("ukf(1,1,5)={u}, newkf(1,1,5)={h}, reduction {r:.3}; (4,1,30) reduction {rb:.3}, quoted 0.61 flagged inconsistent: {flagged}"),
    )
}

// 6 ---------------------------------------------------------------------

fn sweep_claim() -> Outcome {
    let mut values = Vec::new();
    for n in [50, 100, 200] {
        let rows = sweep_grid(n..=n, MRule::HalfCeil, JRule::PerState(10)).unwrap();
        values.push((n, rows[0].reduction));
    }
    let pass = values.iter().all(|(_, r)| (0.70..=0.80).contains(r));
    let shown: Vec<String> = values
        .iter()
        .map(|(n, r)| format!("n={n}: {r:.4}"))
        .collect();
    outcome(
        pass,
        format!(
            "m=ceil(n/2), j=10n reductions {} (band [0.70, 0.80])",
            shown.join(", ")
        ),
    )
}

// 7 ---------------------------------------------------------------------

fn result(report: &ExperimentReport, f: FilterId) -> &FilterResult {
    report
        .results
        .iter()
        .find(|r| r.filter == f)
        .expect("filter in report")
}

fn benchmark_a() -> Outcome {
    let cfg = ExperimentConfig::defaults(Benchmark::A);
    let report = run_experiment(&cfg).unwrap();
    let mse = |f| result(&report, f).mse_mean.unwrap_or(f64::NAN);
    let time = |f| result(&report, f).total_seconds.unwrap_or(f64::NAN);
    let (ekf, ukf, newkf) = (
        mse(FilterId::Kalman(FilterKind::Ekf)),
        mse(FilterId::Kalman(FilterKind::Ukf)),
        mse(FilterId::Kalman(FilterKind::NewKf)),
    );
    let (pf, pf_newkf) = (
        mse(FilterId::Particle(ProposalKind::Prior)),
        mse(FilterId::Particle(ProposalKind::NewKf)),
    );
    let ratio = time(FilterId::Kalman(FilterKind::NewKf)) / time(FilterId::Kalman(FilterKind::Ukf));
    let a = ekf > ukf;
    let rel = (newkf - ukf).abs() / ukf;
    let b = rel <= 0.15;
    let c = pf_newkf < pf;
    let d = (0.3..=0.8).contains(&ratio);
    let failed: Vec<String> = report
        .results
        .iter()
        .filter(|r| r.failed_runs > 0)
        .map(|r| format!("{} {}", r.filter, r.failed_runs))
        .collect();
    outcome(
        a && b && c && d,
        format!(
            "{} runs: (a) EKF {ekf:.4} > UKF {ukf:.4}: {a}; (b) |NewKF {newkf:.4} - UKF| / UKF = {rel:.3} <= 0.15: {b}; \
             (c) PF-NewKF {pf_newkf:.4} < PF {pf:.4}: {c}; (d) NewKF/UKF total time {ratio:.3} in [0.3, 0.8]: {d}; failed runs: [{}]",
            cfg.mc_runs,
            failed.join(", ")
        ),
    )
}

// 8 ---------------------------------------------------------------------

fn benchmark_b() -> Outcome {
    let cfg = ExperimentConfig::defaults(Benchmark::B);
    let report = run_experiment(&cfg).unwrap();
    let get = |k| result(&report, FilterId::Kalman(k));
    let kinds = [FilterKind::Ekf, FilterKind::Ukf, FilterKind::NewKf];
    let param: Vec<f64> = kinds
        .iter()
        .map(|&k| get(k).param_mse_mean.unwrap_or(f64::NAN))
        .collect();
    let gap: Vec<f64> = kinds
        .iter()
        .map(|&k| get(k).mse_mean.unwrap_or(f64::NAN))
        .collect();
    let conv: Vec<f64> = kinds
        .iter()
        .map(|&k| get(k).mass_convergence.unwrap_or(f64::NAN))
        .collect();
    let ordering = param[1] < param[0] && param[2] < param[0];
    let spread =
        gap.iter().cloned().fold(f64::MIN, f64::max) / gap.iter().cloned().fold(f64::MAX, f64::min);
    let converged = conv.iter().all(|c| *c < 0.1);
    outcome(
        ordering && spread <= 2.0 && converged,
        format!(
            "{} runs: parameter MSE EKF {:.4}, UKF {:.4}, NewKF {:.4} (UKF, NewKF < EKF: {ordering}); air-gap MSE spread {spread:.3} (<= 2); \
             final/initial mass error {:.4}, {:.4}, {:.4} (< 0.1)",
            cfg.mc_runs, param[0], param[1], param[2], conv[0], conv[1], conv[2]
        ),
    )
}

// 9 ---------------------------------------------------------------------

fn call_accounting() -> Outcome {
    let q = Matrix::identity(4, 4) * 1e-8;
    let maglev = MaglevModel::new(MaglevConstants::default(), 1e-3, q, 1e-10).unwrap();
    let x0 = Vector::from_column_slice(&[0.01, 0.0, maglev.equilibrium_current(20.0, 0.01), 20.0]);
    let maglev_state = FilterState::new(
        GaussianBelief::new(
            x0.clone(),
            Matrix::from_diagonal(&Vector::from_column_slice(&[1e-10, 1e-8, 1e-6, 1.0])),
        )
        .unwrap(),
        0,
    );
    let u = Vector::from_element(1, GapController::default().voltage(&maglev, &x0));
    let y4 = Vector::from_element(1, 0.01);
    let ts = TimeSeriesModel::new(TimeSeriesParams::default()).unwrap();
    let ts_state = FilterState::new(GaussianBelief::scalar(1.0, 1e-3).unwrap(), 0);
    let y1 = Vector::from_element(1, 2.0);
    let opts = FilterOptions::default();
    let mut shown = Vec::new();
    let mut pass = true;
    for (name, n) in [("maglev", 4u64), ("time series", 1u64)] {
        for (kind, expected) in [
            (FilterKind::Ukf, 2 * n + 1),
            (FilterKind::NewKf, 2 * n + 1),
            (FilterKind::Ssukf, n + 2),
            (FilterKind::Spukf, 1),
        ] {
            let calls = if n == 4 {
                let counting = CountingModel::new(&maglev);
                kind.step(&maglev_state, &counting, &u, &y4, &opts).unwrap();
                counting.counts().transition
            } else {
                let counting = CountingModel::new(&ts);
                kind.step(&ts_state, &counting, &no_input(), &y1, &opts)
                    .unwrap();
                counting.counts().transition
            };
            pass &= calls == expected;
            shown.push(format!("{name} {kind} {calls}/{expected}"));
        }
    }
    outcome(
        pass,
        format!("f calls per step (got/expected): {}", shown.join(", ")),
    )
}

// 10 --------------------------------------------------------------------

fn psd_robustness() -> Outcome {
    let steps = 10_000;
    let opts = FilterOptions::default();
    let mut problems = Vec::new();

    let mut cfg_a = ExperimentConfig::defaults(Benchmark::A);
    cfg_a.horizon = steps;
    cfg_a.mc_runs = 1;
    cfg_a.trace_run = 0;
    let ts = TimeSeriesModel::new(cfg_a.time_series_params()).unwrap();
    let truth_a = bench_a::simulate(&cfg_a, &ts, 0).unwrap();
    let init_a = GaussianBelief::new(
        Vector::from_element(1, cfg_a.ts_x0),
        Matrix::identity(1, 1) * 1e-12,
    )
    .unwrap();

    let mut cfg_b = ExperimentConfig::defaults(Benchmark::B);
    cfg_b.horizon = steps;
    cfg_b.mc_runs = 1;
    let maglev = bench_b::filter_model(&cfg_b).unwrap();
    let truth_b = bench_b::simulate(&cfg_b, &maglev, 0).unwrap();
    let x0 = bench_b::initial_state(&cfg_b, &maglev);
    let init_b = GaussianBelief::new(
        Vector::from_column_slice(&[x0[0], x0[1], x0[2], cfg_b.ml_mass_guess]),
        Matrix::identity(4, 4) * 1e-12,
    )
    .unwrap();

    for kind in FilterKind::ALL {
        let mut state = FilterState::new(init_a.clone(), 0);
        for (t, (u, y)) in truth_a.inputs.iter().zip(&truth_a.measurements).enumerate() {
            match kind
                .step(&state, &ts, u, y, &opts)
                .and_then(|s| check_posterior(&s).map(|_| s))
            {
                Ok(s) => state = s,
                Err(e) => {
                    problems.push(format!("A {kind} step {}: {e}", t + 1));
                    break;
                }
            }
        }
        let mut state = FilterState::new(init_b.clone(), 0);
        for (t, (u, y)) in truth_b.inputs.iter().zip(&truth_b.measurements).enumerate() {
            match kind
                .step(&state, &maglev, u, y, &opts)
                .and_then(|s| check_posterior(&s).map(|_| s))
            {
                Ok(s) => state = s,
                Err(e) => {
                    problems.push(format!("B {kind} step {}: {e}", t + 1));
                    break;
                }
            }
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{steps} steps of all five Kalman filters on A and B from P0 = 1e-12 I, every posterior PSD")
        } else {
            problems.join("; ")
        },
    )
}

// 11 --------------------------------------------------------------------

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut bodies = Vec::new();
    let mut codes = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_bench"))
            .args([
                "run",
                "--benchmark",
                "a",
                "--runs",
                "30",
                "--seed",
                "2024",
                "--format",
                "csv",
                "--out",
            ])
            .arg(&out)
            .status()
            .unwrap();
        codes.push(status.code());
        bodies.push(std::fs::read_to_string(&out).unwrap_or_default());
    }
    let stripped: Vec<String> = bodies.iter().map(|b| strip_timing_columns(b)).collect();
    let rows = stripped[0].lines().count();
    let same = !stripped[0].is_empty() && stripped[0] == stripped[1];
    let exited = codes.iter().all(|c| matches!(c, Some(0) | Some(4)));
    outcome(
        same && exited && rows == 1 + FilterId::ALL.len(),
        format!("two `bench run` executions (seed 2024, 30 runs, 9 filters): CSV bodies without timing columns identical: {same}; {rows} lines; exit codes {codes:?}"),
    )
}

// -----------------------------------------------------------------------

fn main() {
    type Criterion = (u32, &'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        (
            1,
            "linear-Gaussian equivalence",
            Duration::from_secs(1),
            linear_equivalence,
        ),
        (
            2,
            "hybrid identity",
            Duration::from_secs(1),
            hybrid_identity,
        ),
        (
            3,
            "Taylor-order hierarchy",
            Duration::from_secs(10),
            taylor_hierarchy,
        ),
        (
            4,
            "quadratic exactness",
            Duration::from_secs(1),
            quadratic_exactness,
        ),
        (
            5,
            "flop-model golden values",
            Duration::from_secs(1),
            flop_golden,
        ),
        (
            6,
            "sweep reduction band",
            Duration::from_secs(1),
            sweep_claim,
        ),
        (
            7,
            "benchmark A orderings and ratios",
            Duration::from_secs(300),
            benchmark_a,
        ),
        (
            8,
            "benchmark B properties",
            Duration::from_secs(120),
            benchmark_b,
        ),
        (
            9,
            "function-call accounting",
            Duration::from_secs(1),
            call_accounting,
        ),
        (
            10,
            "PSD robustness",
            Duration::from_secs(60),
            psd_robustness,
        ),
        (11, "determinism", Duration::from_secs(60), determinism),
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = Vec::new();
    for (id, name, budget, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = res.pass && in_time;
        println!(
            "criterion {id:>2} [{}] {name}: {} | {:.2} s (budget {} s{})",
            if pass { "PASS" } else { "FAIL" },
            res.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", exceeded" }
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
