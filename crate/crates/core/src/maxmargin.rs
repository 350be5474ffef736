//! Hard-margin linear classification: an exact dual coordinate-ascent solver
//! with KKT multipliers, a subset-enumeration oracle for small instances, and
//! the closed-form multiplier/uniformity bounds for p-orthogonal data.

use serde::{Deserialize, Serialize};

use crate::data_gen::Dataset;
use crate::error::{Error, Result};
use crate::geometry::OrthogonalityProfile;
use crate::linalg::{axpy, cholesky_solve, dot, norm, norm_sq};

/// Solution of the bias-free hard-margin problem
/// `min ||w||^2 s.t. y_i <w, x_i> >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSolution {
    pub w: Vec<f64>,
    /// KKT multipliers, one per example, >= 0.
    pub lambda: Vec<f64>,
    /// y_i <w, x_i> per example.
    pub margins: Vec<f64>,
    /// ||w||^2.
    pub objective: f64,
    /// Dual sweeps (solver) or subsets examined (oracle).
    pub iterations: usize,
    pub converged: bool,
}

/// KKT diagnostics of `(w, lambda)` against a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// ||w - sum_i lambda_i y_i x_i|| / ||w||.
    pub stationarity_residual: f64,
    /// min_i margin_i - 1.
    pub primal_feasibility_min: f64,
    /// min_i lambda_i.
    pub dual_feasibility_min: f64,
    /// max_i lambda_i |margin_i - 1|.
    pub comp_slack_max: f64,
    pub passes: bool,
}

/// Solver knobs. `lambda_cap = None` uses the divergence default
/// 1e8 / min_i ||x_i||^2.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub lambda_cap: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 100_000,
            lambda_cap: None,
        }
    }
}

/// Solve the hard-margin dual by cyclic exact coordinate ascent
/// (`lambda_i <- max(0, lambda_i + (1 - margin_i)/||x_i||^2)`), returning the
/// primal `w = sum lambda_i y_i x_i`. Convergence is declared on the KKT
/// residual, not on objective stall. Non-separable data makes the dual
/// diverge; that is reported as an infeasibility error carrying the best
/// iterate.
pub fn solve_max_margin(data: &Dataset, tol: f64, max_iter: usize) -> Result<MarginSolution> {
    solve_with_options(
        data,
        &SolverOptions {
            tol,
            max_iter,
            lambda_cap: None,
        },
        &mut |_| {},
    )
}

/// As `solve_max_margin`, with explicit options and a per-sweep observer that
/// receives the dual objective (used by monotonicity tests).
pub fn solve_with_options(
    data: &Dataset,
    opts: &SolverOptions,
    on_sweep: &mut dyn FnMut(f64),
) -> Result<MarginSolution> {
    data.validate()?;
    if !(opts.tol > 0.0) {
        return Err(Error::validation("solver tol must be positive"));
    }
    let n = data.n;
    let d = data.d;
    let norms_sq: Vec<f64> = (0..n).map(|i| norm_sq(data.row(i))).collect();
    let min_norm_sq = norms_sq.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_norm_sq == 0.0 {
        return Err(Error::validation("zero rows cannot satisfy a unit margin"));
    }
    let cap = opts.lambda_cap.unwrap_or(1e8 / min_norm_sq);

    let mut w = vec![0.0; d];
    let mut lambda = vec![0.0; n];
    let mut margins = vec![0.0; n];
    let mut sweeps = 0;
    let mut residual;

    loop {
        for i in 0..n {
            let xi = data.row(i);
            let yi = data.y(i);
            let margin = yi * dot(&w, xi);
            let updated = (lambda[i] + (1.0 - margin) / norms_sq[i]).max(0.0);
            let delta = updated - lambda[i];
            if delta != 0.0 {
                axpy(&mut w, delta * yi, xi);
                lambda[i] = updated;
            }
        }
        sweeps += 1;

        // fresh margins for the KKT residual and the dual objective
        let mut min_margin = f64::INFINITY;
        let mut comp_slack = 0.0f64;
        let mut dual_obj = 0.0;
        for i in 0..n {
            margins[i] = data.y(i) * dot(&w, data.row(i));
            min_margin = min_margin.min(margins[i]);
            comp_slack = comp_slack.max(lambda[i] * (margins[i] - 1.0).abs() / (1.0 + lambda[i]));
            dual_obj += lambda[i] * (1.0 - margins[i] / 2.0);
        }
        on_sweep(dual_obj);
        residual = (1.0 - min_margin).max(0.0).max(comp_slack);

        if residual <= opts.tol {
            let objective = norm_sq(&w);
            return Ok(MarginSolution {
                w,
                lambda,
                margins,
                objective,
                iterations: sweeps,
                converged: true,
            });
        }
        let lambda_max = lambda.iter().cloned().fold(0.0f64, f64::max);
        if lambda_max > cap || sweeps >= opts.max_iter {
            let reason = if lambda_max > cap {
                format!("dual diverged: max multiplier {lambda_max:.3e} exceeded cap {cap:.3e}")
            } else {
                format!(
                    "margins failed to reach 1 - tol within {} sweeps (residual {residual:.3e})",
                    opts.max_iter
                )
            };
            let objective = norm_sq(&w);
            return Err(Error::Infeasible {
                reason,
                best: Box::new(MarginSolution {
                    w,
                    lambda,
                    margins,
                    objective,
                    iterations: sweeps,
                    converged: false,
                }),
            });
        }
    }
}

/// Evaluate the KKT conditions of a (possibly external) solution.
pub fn verify_linear_kkt(sol: &MarginSolution, data: &Dataset, tol: f64) -> Result<KktReport> {
    if sol.w.len() != data.d || sol.lambda.len() != data.n {
        return Err(Error::validation("dimension mismatch in KKT verification"));
    }
    let mut recon = vec![0.0; data.d];
    for i in 0..data.n {
        axpy(&mut recon, sol.lambda[i] * data.y(i), data.row(i));
    }
    let mut diff_sq = 0.0;
    for (a, b) in sol.w.iter().zip(&recon) {
        diff_sq += (a - b) * (a - b);
    }
    let w_norm = norm(&sol.w);
    let stationarity_residual = if w_norm > 0.0 {
        diff_sq.sqrt() / w_norm
    } else if diff_sq == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };

    let mut primal_feasibility_min = f64::INFINITY;
    let mut comp_slack_max = 0.0f64;
    for i in 0..data.n {
        let margin = data.y(i) * dot(&sol.w, data.row(i));
        primal_feasibility_min = primal_feasibility_min.min(margin - 1.0);
        comp_slack_max = comp_slack_max.max(sol.lambda[i] * (margin - 1.0).abs());
    }
    let dual_feasibility_min = sol.lambda.iter().cloned().fold(f64::INFINITY, f64::min);

    let passes = stationarity_residual <= tol
        && primal_feasibility_min >= -tol
        && dual_feasibility_min >= -tol
        && comp_slack_max <= tol;
    Ok(KktReport {
        stationarity_residual,
        primal_feasibility_min,
        dual_feasibility_min,
        comp_slack_max,
        passes,
    })
}

/// Uniformity bound for the linear max-margin multipliers on p-orthogonal
/// data: tau = R^2 (1 + 2/(p R^2 - 2)).
pub fn tau_bound_linear(p: f64, r_sq: f64) -> Result<f64> {
    if !(p >= 3.0) {
        return Err(Error::validation("tau bound requires p >= 3"));
    }
    if !(r_sq >= 1.0) {
        return Err(Error::validation("R^2 is a ratio of extremes, so R^2 >= 1"));
    }
    let prs = p * r_sq;
    if prs <= 2.0 {
        return Err(Error::validation("tau bound undefined for p R^2 <= 2"));
    }
    Ok(r_sq * (1.0 + 2.0 / (prs - 2.0)))
}

/// Two-sided multiplier bounds for p-orthogonal data:
/// every lambda_i lies in
/// [(1 - 1/(p R^2 - 1)) / R_max^2, 1 / (R_min^2 (1 - 1/(p R^2)))].
pub fn lambda_bounds_linear(profile: &OrthogonalityProfile, p: f64) -> Result<(f64, f64)> {
    if !(p >= 3.0) {
        return Err(Error::validation("multiplier bounds require p >= 3"));
    }
    let prs = p * profile.r_sq;
    if prs <= 1.0 {
        return Err(Error::validation(
            "multiplier bounds undefined for p R^2 <= 1",
        ));
    }
    let lower = (1.0 - 1.0 / (prs - 1.0)) / profile.r_max_sq;
    let upper = 1.0 / (profile.r_min_sq * (1.0 - 1.0 / prs));
    Ok((lower, upper))
}

/// Independent oracle for small instances (n <= 12): enumerate every nonempty
/// support set, solve the equality-constrained minimum-norm system, and keep
/// the feasible candidate with nonnegative implied multipliers and smallest
/// objective. Ties within 1e-12 go to the lexicographically smallest support.
pub fn brute_force_max_margin(data: &Dataset) -> Result<MarginSolution> {
    data.validate()?;
    let n = data.n;
    if n > 12 {
        return Err(Error::validation(
            "brute-force oracle is limited to n <= 12 examples",
        ));
    }
    let d = data.d;
    let gram = data.gram();

    let mut best: Option<(f64, Vec<usize>, Vec<f64>, Vec<f64>)> = None; // (obj, support, w, lambda)
    let mut examined = 0usize;

    for mask in 1u32..(1 << n) {
        examined += 1;
        let support: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let k = support.len();
        let mut g = vec![0.0; k * k];
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                g[a * k + b] = data.y(i) * data.y(j) * gram[i * n + j];
            }
        }
        let Some(alpha) = cholesky_solve(&g, &vec![1.0; k], k) else {
            continue;
        };
        let max_alpha = alpha.iter().cloned().fold(0.0f64, f64::max);
        if alpha.iter().any(|&a| a < -1e-10 * (1.0 + max_alpha)) {
            continue;
        }
        let mut w = vec![0.0; d];
        for (a, &i) in support.iter().enumerate() {
            axpy(&mut w, alpha[a].max(0.0) * data.y(i), data.row(i));
        }
        let feasible = (0..n).all(|i| data.y(i) * dot(&w, data.row(i)) >= 1.0 - 1e-9);
        if !feasible {
            continue;
        }
        let obj = norm_sq(&w);
        let mut lambda = vec![0.0; n];
        for (a, &i) in support.iter().enumerate() {
            lambda[i] = alpha[a].max(0.0);
        }
        let better = match &best {
            None => true,
            Some((best_obj, best_support, _, _)) => {
                if obj < best_obj - 1e-12 {
                    true
                } else if obj <= best_obj + 1e-12 {
                    support < *best_support
                } else {
                    false
                }
            }
        };
        if better {
            best = Some((obj, support, w, lambda));
        }
    }

    match best {
        Some((objective, _, w, lambda)) => {
            let margins = (0..n).map(|i| data.y(i) * dot(&w, data.row(i))).collect();
            Ok(MarginSolution {
                w,
                lambda,
                margins,
                objective,
                iterations: examined,
                converged: true,
            })
        }
        None => Err(Error::Infeasible {
            reason: "no support set yields a feasible nonnegative-multiplier candidate".into(),
            best: Box::new(MarginSolution {
                w: vec![0.0; d],
                lambda: vec![0.0; n],
                margins: vec![0.0; n],
                objective: 0.0,
                iterations: examined,
                converged: false,
            }),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_gen::Dataset;
    use crate::geometry::{orthogonality_profile, uniformity_ratio};

    fn adhoc(rows: &[&[f64]], y: &[i8]) -> Dataset {
        let d = rows[0].len();
        let x: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Dataset::adhoc(x, d, y.to_vec(), "fixture").unwrap()
    }

    #[test]
    fn single_point_hand_kkt() {
        let ds = adhoc(&[&[2.0, 0.0]], &[1]);
        let sol = solve_max_margin(&ds, 1e-10, 1000).unwrap();
        assert!((sol.w[0] - 0.5).abs() < 1e-9);
        assert!(sol.w[1].abs() < 1e-12);
        assert!((sol.lambda[0] - 0.25).abs() < 1e-9);
        assert!((sol.margins[0] - 1.0).abs() < 1e-9);
        assert!(sol.converged);

        let oracle = brute_force_max_margin(&ds).unwrap();
        assert!((oracle.w[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pair_hand_kkt() {
        let ds = adhoc(&[&[1.0, 0.0], &[0.0, 1.0]], &[1, -1]);
        let sol = solve_max_margin(&ds, 1e-10, 1000).unwrap();
        assert!((sol.w[0] - 1.0).abs() < 1e-9);
        assert!((sol.w[1] + 1.0).abs() < 1e-9);
        assert!((sol.lambda[0] - 1.0).abs() < 1e-9);
        assert!((sol.lambda[1] - 1.0).abs() < 1e-9);

        let oracle = brute_force_max_margin(&ds).unwrap();
        assert!((oracle.w[0] - 1.0).abs() < 1e-12);
        assert!((oracle.w[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn conflicting_duplicate_is_infeasible() {
        let ds = adhoc(&[&[1.0, 0.0], &[1.0, 0.0]], &[1, -1]);
        match solve_max_margin(&ds, 1e-8, 50_000) {
            Err(Error::Infeasible { best, .. }) => assert!(!best.converged),
            other => panic!("expected infeasibility, got {other:?}"),
        }
        assert!(matches!(
            brute_force_max_margin(&ds),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn verify_passes_solver_output_and_rejects_scaled() {
        let ds = adhoc(&[&[1.0, 0.2], &[-0.3, 1.4], &[-1.2, -0.7]], &[1, 1, -1]);
        let sol = solve_max_margin(&ds, 1e-10, 100_000).unwrap();
        let report = verify_linear_kkt(&sol, &ds, 1e-6).unwrap();
        assert!(report.passes, "{report:?}");

        let mut scaled = sol.clone();
        for v in scaled.w.iter_mut() {
            *v *= 2.0;
        }
        let report2 = verify_linear_kkt(&scaled, &ds, 1e-6).unwrap();
        assert!(!report2.passes);
        assert!((report2.stationarity_residual - 0.5).abs() < 1e-9);

        let mut neg = sol.clone();
        neg.lambda[0] = -0.5;
        let report3 = verify_linear_kkt(&neg, &ds, 1e-6).unwrap();
        assert!(report3.dual_feasibility_min < 0.0);
        assert!(!report3.passes);
    }

    #[test]
    fn tau_bound_values() {
        assert!((tau_bound_linear(1e12, 1.0).unwrap() - 1.0).abs() < 1e-9);
        assert!((tau_bound_linear(3.0, 1.0).unwrap() - 3.0).abs() < 1e-12);
        assert!((tau_bound_linear(6.0, 2.0).unwrap() - 2.4).abs() < 1e-12);
        assert!(tau_bound_linear(2.0, 1.0).is_err());
    }

    #[test]
    fn lambda_bound_values() {
        let prof = OrthogonalityProfile {
            n: 2,
            r_min_sq: 1.0,
            r_max_sq: 1.0,
            r_sq: 1.0,
            zeta: 0.1,
            p_star: Some(3.0),
        };
        let (lo, hi) = lambda_bounds_linear(&prof, 3.0).unwrap();
        assert!((lo - 0.5).abs() < 1e-12);
        assert!((hi - 1.5).abs() < 1e-12);

        let prof2 = OrthogonalityProfile {
            n: 2,
            r_min_sq: 1.0,
            r_max_sq: 2.0,
            r_sq: 2.0,
            zeta: 0.01,
            p_star: Some(6.0),
        };
        let (lo2, hi2) = lambda_bounds_linear(&prof2, 6.0).unwrap();
        assert!((lo2 - (1.0 - 1.0 / 11.0) / 2.0).abs() < 1e-12);
        assert!((hi2 - 1.0 / (1.0 - 1.0 / 12.0)).abs() < 1e-12);
        assert!(lambda_bounds_linear(&prof, 2.9).is_err());

        // orthonormal limit: unit norms and p -> infinity squeeze both
        // bounds onto lambda_i = 1/||x_i||^2 = 1
        let (lo3, hi3) = lambda_bounds_linear(&prof, 1e12).unwrap();
        assert!((lo3 - 1.0).abs() < 1e-11);
        assert!((hi3 - 1.0).abs() < 1e-11);
    }

    #[test]
    fn exact_orthogonality_decouples_multipliers() {
        // standard basis scaled by different norms: lambda_i = 1/||x_i||^2
        let ds = adhoc(
            &[
                &[2.0, 0.0, 0.0, 0.0],
                &[0.0, 1.5, 0.0, 0.0],
                &[0.0, 0.0, 1.0, 0.0],
                &[0.0, 0.0, 0.0, 0.5],
            ],
            &[1, -1, 1, -1],
        );
        let sol = solve_max_margin(&ds, 1e-12, 10_000).unwrap();
        for i in 0..4 {
            let expect = 1.0 / norm_sq(ds.row(i));
            assert!(
                (sol.lambda[i] - expect).abs() < 1e-10,
                "lambda[{i}] = {} vs {expect}",
                sol.lambda[i]
            );
        }
    }

    #[test]
    fn dual_objective_is_monotone() {
        let ds = adhoc(
            &[
                &[1.0, 0.3, -0.2],
                &[-0.5, 1.1, 0.4],
                &[0.2, -0.8, 1.3],
                &[-1.1, -0.2, -0.9],
            ],
            &[1, -1, 1, -1],
        );
        let mut history = Vec::new();
        let sol = solve_with_options(
            &ds,
            &SolverOptions {
                tol: 1e-10,
                max_iter: 100_000,
                lambda_cap: None,
            },
            &mut |obj| history.push(obj),
        )
        .unwrap();
        assert!(sol.converged);
        for w in history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "dual objective decreased: {w:?}");
        }
        // at optimality the dual objective equals ||w||^2 / 2
        let last = *history.last().unwrap();
        assert!((last - sol.objective / 2.0).abs() < 1e-6 * (1.0 + last));
    }

    #[test]
    fn scale_covariance() {
        let ds = adhoc(&[&[1.0, 0.3], &[-0.4, 1.2], &[-1.0, -0.6]], &[1, 1, -1]);
        let sol = solve_max_margin(&ds, 1e-11, 100_000).unwrap();
        let c = 2.5;
        let scaled_rows: Vec<Vec<f64>> = (0..ds.n)
            .map(|i| ds.row(i).iter().map(|v| v * c).collect())
            .collect();
        let refs: Vec<&[f64]> = scaled_rows.iter().map(|v| v.as_slice()).collect();
        let ds2 = adhoc(&refs, &[1, 1, -1]);
        let sol2 = solve_max_margin(&ds2, 1e-11, 100_000).unwrap();
        for j in 0..ds.d {
            assert!((sol2.w[j] - sol.w[j] / c).abs() < 1e-8);
        }
        for i in 0..ds.n {
            assert!((sol2.lambda[i] - sol.lambda[i] / (c * c)).abs() < 1e-8);
            // predictions on scaled inputs unchanged
            let p1 = dot(&sol.w, ds.row(i));
            let p2 = dot(&sol2.w, ds2.row(i));
            assert_eq!(p1.signum(), p2.signum());
        }
    }

    #[test]
    fn multiplier_sandwich_and_tau_on_p_orthogonal_data() {
        // isotropic data with small n and large d is p-orthogonal for p >= 3
        let spec = crate::data_gen::SgSpec::new(
            vec![1.0; 4096],
            crate::data_gen::BaseDist::Gaussian,
            0.25,
        )
        .unwrap();
        let mut checked = 0;
        for seed in 0..8u64 {
            let ds = crate::data_gen::sample_sg(&spec, 6, seed).unwrap();
            let prof = orthogonality_profile(&ds).unwrap();
            let p = prof.p_star_value();
            if p < 3.0 {
                continue;
            }
            checked += 1;
            let sol = solve_max_margin(&ds, 1e-10, 200_000).unwrap();
            let (lo, hi) = lambda_bounds_linear(&prof, p).unwrap();
            assert!(lo > 0.0);
            for (i, &l) in sol.lambda.iter().enumerate() {
                assert!(
                    l >= lo - 1e-9 && l <= hi + 1e-9,
                    "seed {seed}: lambda[{i}] = {l} outside [{lo}, {hi}]"
                );
            }
            let tau = uniformity_ratio(&sol.lambda).unwrap();
            let bound = tau_bound_linear(p, prof.r_sq).unwrap();
            assert!(tau <= bound + 1e-9, "tau {tau} > bound {bound}");
        }
        assert!(checked >= 6, "only {checked} seeds were p-orthogonal");
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let rows: Vec<Vec<f64>> = (0..13).map(|i| vec![i as f64 + 1.0, 1.0]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|v| v.as_slice()).collect();
        let ds = adhoc(&refs, &[1; 13]);
        assert!(matches!(
            brute_force_max_margin(&ds),
            Err(Error::Validation(_))
        ));
    }
}
