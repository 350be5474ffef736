//! Acceptance suite: every criterion prints one PASS/FAIL line (run with
//! `cargo test --test acceptance -- --nocapture` to see them) and enforces
//! its stated tolerance and runtime budget.

use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use marginlab::data_gen::{
    sample_clust, sample_opp, sample_sg, ClustSpec, Dataset, DistributionSpec, OppSpec, SgSpec,
};
use marginlab::eval::{
    interpolation_check, opp_signal_decomposition, test_error_exact_sg_gaussian, test_error_mc,
    Predictor,
};
use marginlab::geometry::{orthogonality_profile, uniformity_ratio};
use marginlab::harness::{
    run_experiment, DistConfig, EvalSection, ExperimentConfig, ModelConfig, SolverSection,
    TrainSection,
};
use marginlab::leaky::{
    boundary_agreement, effective_linear_direction, extract_net_kkt, init_network,
    lambda_bounds_leaky, loss_and_grad, rescale_to_unit_margin, tau_bound_leaky, train_to_margin,
    LossKind, ProbeDist, TrainConfig,
};
use marginlab::maxmargin::{
    brute_force_max_margin, lambda_bounds_linear, solve_max_margin, tau_bound_linear,
};

/// Heavy criteria run their seed loops on private pools so they neither
/// monopolize nor wait on the global rayon pool (the timed small criteria
/// would otherwise queue behind 200-second training tasks).
fn scoped_pool() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .build()
        .expect("thread pool")
}

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {:02} {:<28} {} ({detail})",
        id,
        name,
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} {name}: {detail}");
}

/// Criterion 1: the dual coordinate-ascent solver agrees with the
/// subset-enumeration oracle on 200 random separable instances.
#[test]
fn c01_dual_vs_brute_force_oracle() {
    let start = Instant::now();
    let mut rng = marginlab::rng::stream_rng(2024, 9001);
    let mut max_diff = 0.0f64;
    let mut done = 0usize;
    while done < 200 {
        let n = rng.gen_range(1..=8);
        let d = rng.gen_range(2..=6);
        let wstar: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let wnorm = wstar.iter().map(|v| v * v).sum::<f64>().sqrt();
        if wnorm < 0.1 {
            continue;
        }
        let mut x = Vec::with_capacity(n * d);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            // resample rows that sit too close to the separator so every
            // instance is cleanly separable
            loop {
                let row: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let s: f64 = row.iter().zip(&wstar).map(|(a, b)| a * b).sum();
                if s.abs() > 0.05 * wnorm {
                    y.push(if s < 0.0 { -1i8 } else { 1 });
                    x.extend_from_slice(&row);
                    break;
                }
            }
        }
        let ds = Dataset::adhoc(x, d, y, "acceptance-c1").unwrap();
        let oracle = brute_force_max_margin(&ds).expect("separable instance must have an optimum");
        let dual = solve_max_margin(&ds, 1e-10, 1_000_000).expect("dual solver must converge");
        let diff: f64 = dual
            .w
            .iter()
            .zip(&oracle.w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let onorm: f64 = oracle.w.iter().map(|v| v * v).sum::<f64>().sqrt();
        max_diff = max_diff.max(diff / (1.0 + onorm));
        assert!(
            diff <= 1e-6 * (1.0 + onorm),
            "instance {done}: ||w_dual - w_brute|| = {diff:.3e} exceeds tolerance"
        );
        done += 1;
    }
    let elapsed = start.elapsed();
    report(
        1,
        "dual-vs-brute-force",
        elapsed.as_secs_f64() < 10.0,
        &format!("200 instances, max normalized diff {max_diff:.2e}, {elapsed:.2?} < 10s"),
    );
}

/// Criterion 2: multiplier sandwich for the linear solver on 50 seeded
/// spiked-Gaussian datasets; checked whenever the measured p* is >= 3.
#[test]
fn c02_multiplier_sandwich_linear() {
    let start = Instant::now();
    let spec = SgSpec::pgaus(3000, 0.75, 0.1).unwrap();
    let results: Vec<(u64, bool, bool)> = scoped_pool().install(|| {
        (0..50u64)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&seed| {
                let ds = sample_sg(&spec, 16, seed).unwrap();
                let prof = orthogonality_profile(&ds).unwrap();
                let sol = solve_max_margin(&ds, 1e-8, 400_000).unwrap();
                let p = prof.p_star_value();
                if p < 3.0 {
                    return (seed, false, true); // hypothesis not applicable
                }
                let (lo, hi) = lambda_bounds_linear(&prof, p).unwrap();
                let sandwich = sol.lambda.iter().all(|&l| l >= lo - 1e-9 && l <= hi + 1e-9);
                let tau_ok = match uniformity_ratio(&sol.lambda) {
                    Ok(tau) => tau <= tau_bound_linear(p, prof.r_sq).unwrap() + 1e-9,
                    Err(_) => false,
                };
                (seed, true, sandwich && tau_ok)
            })
            .collect()
    });
    let applicable = results.iter().filter(|r| r.1).count();
    let violations: Vec<u64> = results
        .iter()
        .filter(|r| r.1 && !r.2)
        .map(|r| r.0)
        .collect();
    let elapsed = start.elapsed();
    report(
        2,
        "multiplier-sandwich-linear",
        violations.is_empty() && elapsed.as_secs_f64() < 60.0,
        &format!(
            "50 seeds solved, p*>=3 in {applicable}, violations {violations:?}, {elapsed:.2?} < 1min"
        ),
    );
}

struct LeakyRun {
    seed: u64,
    residual: f64,
    passes: bool,
    p_star: f64,
    sandwich_ok: bool,
    tau_ok: bool,
    agreement: f64,
    n_kept: usize,
}

fn criterion3_runs() -> &'static Vec<LeakyRun> {
    static RUNS: OnceLock<Vec<LeakyRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let d = 20_000;
        let n = 10;
        let gamma = 0.5;
        let spec = SgSpec::pgaus(d, 0.75, 0.1).unwrap();
        let cfg = TrainConfig {
            max_steps: 2_000_000,
            dir_tol: 1e-11,
            margin_tol: 1e-10,
            ..TrainConfig::default()
        };
        scoped_pool().install(|| {
            (0..20u64)
                .collect::<Vec<_>>()
                .par_iter()
                .map(|&seed| {
                    let ds = sample_sg(&spec, n, seed).unwrap();
                    let prof = orthogonality_profile(&ds).unwrap();
                    let p_star = prof.p_star_value();
                    let p0 = init_network(32, d, gamma, 1e-3, seed).unwrap();
                    let (trained, _trace) =
                        train_to_margin(&p0, &ds, &cfg).expect("training must reach the threshold");
                    let unit = rescale_to_unit_margin(&trained, &ds).unwrap();
                    let cert = extract_net_kkt(&unit, &ds, 1e-10).unwrap();
                    // Lemma-based interval and tau bound when the hypothesis holds
                    let hypothesis = p_star >= 3.0 * gamma.powi(-3);
                    let (mut sandwich_ok, mut tau_ok) = (true, true);
                    if hypothesis && cert.passes {
                        let (lo, hi) = lambda_bounds_leaky(&prof, gamma, p_star).unwrap();
                        sandwich_ok = cert
                            .lambda
                            .iter()
                            .all(|&l| l >= lo - 1e-9 && l <= hi + 1e-9);
                        tau_ok = match cert.tau {
                            Some(tau) => {
                                tau <= tau_bound_leaky(p_star, prof.r_sq, gamma).unwrap() + 1e-9
                            }
                            None => false,
                        };
                    }
                    let z = effective_linear_direction(&cert.lambda, &ds, gamma).unwrap();
                    let agree = boundary_agreement(
                        &unit,
                        &z,
                        &ProbeDist::Spec(DistributionSpec::Sg(spec.clone())),
                        10_000,
                        1e-3,
                        seed,
                    )
                    .unwrap();
                    LeakyRun {
                        seed,
                        residual: cert.stationarity_residual,
                        passes: cert.passes,
                        p_star,
                        sandwich_ok,
                        tau_ok,
                        agreement: agree.agreement,
                        n_kept: agree.n_kept,
                    }
                })
                .collect()
        })
    })
}

/// Criterion 3: trained leaky networks certify as approximate KKT points
/// (stationarity residual <= 1e-3) in at least 18 of 20 seeded runs; where
/// the p-orthogonality hypothesis holds, multipliers sit in the closed-form
/// interval and tau respects its bound.
#[test]
fn c03_multiplier_sandwich_leaky() {
    let start = Instant::now();
    let runs = criterion3_runs();
    let passing = runs.iter().filter(|r| r.passes).count();
    let resid_ok = runs.iter().filter(|r| r.passes).all(|r| r.residual <= 1e-3);
    let hypothesis_runs = runs.iter().filter(|r| r.p_star >= 24.0).count();
    let sandwich_ok = runs.iter().all(|r| r.sandwich_ok && r.tau_ok);
    let elapsed = start.elapsed();
    report(
        3,
        "multiplier-sandwich-leaky",
        passing >= 18 && resid_ok && sandwich_ok && elapsed.as_secs_f64() < 900.0,
        &format!(
            "passing {passing}/20, residuals<=1e-3: {resid_ok}, p*>=24 in {hypothesis_runs} runs, {elapsed:.2?} < 15min"
        ),
    );
}

/// Criterion 4: every passing certificate's decision boundary agrees exactly
/// with its effective linear direction outside the exclusion band.
#[test]
fn c04_linear_boundary_of_network() {
    let runs = criterion3_runs();
    let passing: Vec<&LeakyRun> = runs.iter().filter(|r| r.passes).collect();
    let all_exact = passing.iter().all(|r| r.agreement == 1.0);
    let min_kept = passing.iter().map(|r| r.n_kept).min().unwrap_or(0);
    let disagreeing: Vec<u64> = passing
        .iter()
        .filter(|r| r.agreement < 1.0)
        .map(|r| r.seed)
        .collect();
    report(
        4,
        "network-boundary-linear",
        !passing.is_empty() && all_exact,
        &format!(
            "{} passing certificates, agreement 1.0 in all (min kept probes {min_kept}), disagreeing seeds {disagreeing:?}",
            passing.len()
        ),
    );
}

/// Criterion 5: benign overfitting in the spiked-Gaussian regime; both
/// models interpolate in all 20 seeds, the mean Monte-Carlo test error of
/// the max-margin direction lands in [0.10, 0.20], and the closed-form
/// oracle sits within 3 interval widths of each estimate.
#[test]
fn c05_benign_overfitting_subgaussian() {
    let start = Instant::now();
    let d = 4000;
    let n = 20;
    let spec = SgSpec::pgaus(d, 0.75, 0.1).unwrap();
    let cfg = TrainConfig {
        max_steps: 500_000,
        dir_tol: 1e-9,
        margin_tol: 1e-8,
        ..TrainConfig::default()
    };
    let results: Vec<(bool, bool, f64, f64)> = scoped_pool().install(|| {
        (0..20u64)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&seed| {
                let ds = sample_sg(&spec, n, seed).unwrap();
                let sol = solve_max_margin(&ds, 1e-8, 400_000).unwrap();
                let (lin_ok, _) =
                    interpolation_check(&Predictor::Linear { w: sol.w.clone() }, &ds).unwrap();
                let p0 = init_network(32, d, 0.5, 1e-3, seed).unwrap();
                let (net, _) = train_to_margin(&p0, &ds, &cfg).unwrap();
                let (net_ok, _) =
                    interpolation_check(&Predictor::Net { params: net }, &ds).unwrap();
                let mc = test_error_mc(
                    &Predictor::Linear { w: sol.w.clone() },
                    &DistributionSpec::Sg(spec.clone()),
                    100_000,
                    seed,
                    0.99,
                )
                .unwrap();
                let exact = test_error_exact_sg_gaussian(&sol.w, &spec).unwrap();
                let ci_width = mc.ci_high - mc.ci_low;
                let oracle_gap = (mc.point_estimate - exact.point_estimate).abs() / ci_width;
                (lin_ok, net_ok, mc.point_estimate, oracle_gap)
            })
            .collect()
    });
    let all_interpolate = results.iter().all(|r| r.0 && r.1);
    let mean_err = results.iter().map(|r| r.2).sum::<f64>() / results.len() as f64;
    let max_oracle_gap = results.iter().map(|r| r.3).fold(0.0f64, f64::max);
    let elapsed = start.elapsed();
    report(
        5,
        "benign-overfitting-subgauss",
        all_interpolate
            && (0.10..=0.20).contains(&mean_err)
            && max_oracle_gap <= 3.0
            && elapsed.as_secs_f64() < 1200.0,
        &format!(
            "interpolation {all_interpolate}, mean test error {mean_err:.4} in [0.10,0.20], max oracle gap {max_oracle_gap:.2} CI-widths, {elapsed:.2?} < 20min"
        ),
    );
}

/// Criterion 6: benign overfitting in the cluster regime; interpolation in
/// all 10 seeds for both models and mean test error at most 0.15.
#[test]
fn c06_benign_overfitting_clusters() {
    let start = Instant::now();
    let d = 30_000;
    let n = 30;
    let mu_norm = (d as f64).powf(1.0 / 3.0);
    let spec = ClustSpec::orthogonal(d, 3, mu_norm, 0.1).unwrap();
    let cfg = TrainConfig {
        max_steps: 500_000,
        dir_tol: 1e-9,
        margin_tol: 1e-8,
        ..TrainConfig::default()
    };
    let results: Vec<(bool, bool, f64)> = scoped_pool().install(|| {
        (0..10u64)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&seed| {
                let ds = sample_clust(&spec, n, seed).unwrap();
                let sol = solve_max_margin(&ds, 1e-8, 400_000).unwrap();
                let (lin_ok, _) =
                    interpolation_check(&Predictor::Linear { w: sol.w.clone() }, &ds).unwrap();
                let p0 = init_network(32, d, 0.5, 1e-3, seed).unwrap();
                let (net, _) = train_to_margin(&p0, &ds, &cfg).unwrap();
                let (net_ok, _) =
                    interpolation_check(&Predictor::Net { params: net }, &ds).unwrap();
                let mc = test_error_mc(
                    &Predictor::Linear { w: sol.w },
                    &DistributionSpec::Clust(spec.clone()),
                    20_000,
                    seed,
                    0.99,
                )
                .unwrap();
                (lin_ok, net_ok, mc.point_estimate)
            })
            .collect()
    });
    let all_interpolate = results.iter().all(|r| r.0 && r.1);
    let mean_err = results.iter().map(|r| r.2).sum::<f64>() / results.len() as f64;
    let elapsed = start.elapsed();
    report(
        6,
        "benign-overfitting-clusters",
        all_interpolate && mean_err <= 0.15 && elapsed.as_secs_f64() < 1200.0,
        &format!(
            "interpolation {all_interpolate}, mean test error {mean_err:.4} <= 0.15, {elapsed:.2?} < 20min"
        ),
    );
}

/// Criterion 7: analytic gradients match central finite differences at 100
/// random differentiable points with relative error at most 1e-5.
#[test]
fn c07_gradient_correctness() {
    let mut rng = marginlab::rng::stream_rng(77, 7001);
    let m = 8;
    let d = 5;
    let mut checked = 0usize;
    let mut max_rel = 0.0f64;
    let mut attempt = 0u64;
    while checked < 100 {
        attempt += 1;
        let params = init_network(m, d, 0.5, 1.0, 5000 + attempt).unwrap();
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect())
            .collect();
        let x: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let y: Vec<i8> = (0..4).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let ds = Dataset::adhoc(x, d, y, "acceptance-c7").unwrap();
        // differentiable point: no preactivation near the kink
        let near_kink = (0..m).any(|j| {
            (0..ds.n).any(|i| {
                params
                    .row(j)
                    .iter()
                    .zip(ds.row(i))
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .abs()
                    < 1e-4
            })
        });
        if near_kink {
            continue;
        }
        let loss = if checked % 2 == 0 {
            LossKind::Logistic
        } else {
            LossKind::Exponential
        };
        let (_, grad) = loss_and_grad(&params, &ds, loss).unwrap();
        let h = 1e-6;
        let mut fd = vec![0.0; m * d];
        for idx in 0..m * d {
            let mut plus = params.clone();
            plus.w[idx] += h;
            let mut minus = params.clone();
            minus.w[idx] -= h;
            let (rp, _) = loss_and_grad(&plus, &ds, loss).unwrap();
            let (rm, _) = loss_and_grad(&minus, &ds, loss).unwrap();
            fd[idx] = (rp - rm) / (2.0 * h);
        }
        let diff: f64 = grad
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let gnorm: f64 = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = diff / gnorm.max(1e-12);
        max_rel = max_rel.max(rel);
        assert!(rel <= 1e-5, "point {checked}: gradient rel err {rel:.3e}");
        checked += 1;
    }
    report(
        7,
        "gradient-correctness",
        true,
        &format!("100 differentiable points, max rel err {max_rel:.2e} <= 1e-5"),
    );
}

/// Criterion 8: standard-basis data decouples the dual exactly:
/// lambda_i = 1/||x_i||^2 to 1e-10, and tau = 1 for equal norms.
#[test]
fn c08_exact_orthogonality_fixture() {
    let mut max_lambda_err = 0.0f64;
    for (n, scale_rows) in [(3usize, true), (8, true), (24, true), (6, false)] {
        let d = n;
        let mut x = vec![0.0; n * d];
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let s = if scale_rows {
                1.0 + 0.25 * i as f64
            } else {
                1.5
            };
            x[i * d + i] = s;
            y.push(if i % 3 == 0 { -1i8 } else { 1 });
        }
        let ds = Dataset::adhoc(x, d, y, "acceptance-c8").unwrap();
        let sol = solve_max_margin(&ds, 1e-12, 100_000).unwrap();
        for i in 0..n {
            let nsq: f64 = ds.row(i).iter().map(|v| v * v).sum();
            let err = (sol.lambda[i] - 1.0 / nsq).abs();
            max_lambda_err = max_lambda_err.max(err);
            assert!(err <= 1e-10, "n={n} i={i}: lambda error {err:.3e}");
        }
        if !scale_rows {
            let tau = uniformity_ratio(&sol.lambda).unwrap();
            assert!((tau - 1.0).abs() <= 1e-10, "tau = {tau} for equal norms");
        }
    }
    report(
        8,
        "exact-orthogonality",
        true,
        &format!("max multiplier error {max_lambda_err:.2e} <= 1e-10, tau = 1 at equal norms"),
    );
}

/// Criterion 9: Monte-Carlo estimates and the closed-form oracle agree; the
/// oracle value falls inside the estimator's own 99% interval in >= 48 of
/// 50 random (w, Sigma) cases at N = 2e5.
#[test]
fn c09_mc_vs_closed_form_oracle() {
    let cases: Vec<u64> = (0..50).collect();
    let hits: usize = scoped_pool().install(|| {
        cases
            .par_iter()
            .map(|&case| {
                let mut rng = marginlab::rng::stream_rng(900 + case, 4242);
                let d = rng.gen_range(3..12);
                let mut lambda: Vec<f64> = (0..d).map(|_| rng.gen_range(0.2..4.0)).collect();
                lambda.sort_by(|a, b| b.total_cmp(a));
                let eta = rng.gen_range(0.0..0.4);
                let spec =
                    SgSpec::new(lambda, marginlab::data_gen::BaseDist::Gaussian, eta).unwrap();
                let mut w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                w[0] = w[0].abs() + 0.05;
                let exact = test_error_exact_sg_gaussian(&w, &spec).unwrap();
                let mc = test_error_mc(
                    &Predictor::Linear { w },
                    &DistributionSpec::Sg(spec),
                    200_000,
                    case,
                    0.99,
                )
                .unwrap();
                (mc.ci_low <= exact.point_estimate && exact.point_estimate <= mc.ci_high) as usize
            })
            .sum()
    });
    report(
        9,
        "mc-vs-closed-form",
        hits >= 48,
        &format!("{hits}/50 oracle values inside the 99% interval (need >= 48)"),
    );
}

/// Criterion 10: the training-side influence of the overfitting component
/// dominates its test-side influence by at least 5x in >= 18 of 20 seeds.
#[test]
fn c10_signal_noise_decomposition() {
    let d = 4000;
    let n = 20;
    let mut mu = vec![0.0; d];
    mu[0] = 5.0;
    let spec = OppSpec::new(mu, 0.2).unwrap();
    let results: Vec<(u64, f64)> = scoped_pool().install(|| {
        (0..20u64)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&seed| {
                let ds = sample_opp(&spec, n, seed).unwrap();
                let dec = opp_signal_decomposition(&ds, &vec![1.0; n], 5, seed).unwrap();
                (seed, dec.min_train_inner / dec.max_test_inner)
            })
            .collect()
    });
    let dominating = results.iter().filter(|r| r.1 >= 5.0).count();
    let worst = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    report(
        10,
        "signal-noise-decomposition",
        dominating >= 18,
        &format!("train/test influence ratio >= 5 in {dominating}/20 seeds (worst {worst:.2})"),
    );
}

/// Criterion 11: replaying an experiment config reproduces identical CSV
/// rows (wall-clock aside) for both model types.
#[test]
fn c11_determinism() {
    let linear_cfg = ExperimentConfig {
        name: "acceptance-determinism".into(),
        seeds: vec![11, 12, 13],
        n: 12,
        distribution: DistConfig::Pgaus {
            d: 600,
            rho: 0.75,
            eta: 0.1,
        },
        model: ModelConfig::Linear,
        solver: SolverSection::default(),
        training: TrainSection::default(),
        eval: EvalSection {
            n_test: 20_000,
            ..EvalSection::default()
        },
        bounds: Default::default(),
    };
    let mut net_cfg = linear_cfg.clone();
    net_cfg.model = ModelConfig::LeakyNet {
        m: 8,
        gamma: 0.5,
        scale: 1e-3,
    };
    net_cfg.n = 8;
    net_cfg.distribution = DistConfig::Pgaus {
        d: 400,
        rho: 0.75,
        eta: 0.1,
    };
    net_cfg.training.max_steps = 300_000;
    net_cfg.eval.n_test = 10_000;
    net_cfg.eval.boundary_probes = 2_000;

    let mut all_equal = true;
    for cfg in [&linear_cfg, &net_cfg] {
        let a = run_experiment(cfg).unwrap();
        let b = run_experiment(cfg).unwrap();
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.status, "ok");
            if ra.to_csv_row_stable() != rb.to_csv_row_stable() {
                all_equal = false;
            }
        }
    }
    report(
        11,
        "determinism",
        all_equal,
        "replayed linear and leaky configs give identical stable CSV rows",
    );
}
