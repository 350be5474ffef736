//! Train/test error measurement: exact interpolation checks, Monte-Carlo
//! generalization estimates with Wilson score intervals, the closed-form
//! Gaussian test-error oracle, and the signal/noise decomposition of
//! weighted-average estimators on opposing-means data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_gen::{sign_pm, DataSource, Dataset, DistributionSpec, SgSpec};
use crate::error::{Error, Result};
use crate::leaky::NetworkParams;
use crate::linalg::{axpy, dot, norm};
use crate::rng::{mc_block_rng, stream_rng, STREAM_PROBES};
use crate::stats::wilson_interval;

/// A classifier under evaluation: a linear direction or a network.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predictor {
    Linear { w: Vec<f64> },
    Net { params: NetworkParams },
}

impl Predictor {
    pub fn dim(&self) -> usize {
        match self {
            Predictor::Linear { w } => w.len(),
            Predictor::Net { params } => params.d,
        }
    }

    #[inline]
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            Predictor::Linear { w } => dot(w, x),
            Predictor::Net { params } => params.forward(x),
        }
    }
}

/// How an error estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    MonteCarlo,
    ClosedForm,
    EmpiricalTrain,
}

/// A misclassification-probability estimate with a two-sided interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub point_estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: usize,
    pub method: EstimateMethod,
}

/// Check whether the predictor reproduces every observed label, returning the
/// margin vector y_i * score(x_i) alongside. Sign ties resolve to +1,
/// matching the samplers.
pub fn interpolation_check(predictor: &Predictor, data: &Dataset) -> Result<(bool, Vec<f64>)> {
    if predictor.dim() != data.d {
        return Err(Error::validation("predictor dimension mismatch"));
    }
    let mut ok = true;
    let margins: Vec<f64> = (0..data.n)
        .map(|i| {
            let s = predictor.score(data.row(i));
            if sign_pm(s) != data.y_obs[i] {
                ok = false;
            }
            data.y(i) * s
        })
        .collect();
    Ok((ok, margins))
}

/// Empirical train error (fraction of observed labels missed).
pub fn train_error(predictor: &Predictor, data: &Dataset) -> Result<ErrorEstimate> {
    if predictor.dim() != data.d {
        return Err(Error::validation("predictor dimension mismatch"));
    }
    let errors = (0..data.n)
        .filter(|&i| sign_pm(predictor.score(data.row(i))) != data.y_obs[i])
        .count();
    let p = errors as f64 / data.n as f64;
    Ok(ErrorEstimate {
        point_estimate: p,
        ci_low: p,
        ci_high: p,
        n_samples: data.n,
        method: EstimateMethod::EmpiricalTrain,
    })
}

const MC_BLOCK: usize = 4096;

/// Monte-Carlo test error under the observed-label law of `spec`, with a
/// Wilson score interval at `ci_level`. Draws are tiled into fixed blocks
/// with per-block derived RNGs, so the estimate does not depend on the worker
/// count.
pub fn test_error_mc(
    predictor: &Predictor,
    spec: &DistributionSpec,
    n_samples: usize,
    seed: u64,
    ci_level: f64,
) -> Result<ErrorEstimate> {
    spec.validate()?;
    if n_samples < 1 {
        return Err(Error::validation("need at least one Monte-Carlo sample"));
    }
    if predictor.dim() != spec.dim() {
        return Err(Error::validation("predictor dimension mismatch"));
    }
    let blocks: Vec<(u64, usize)> = (0..n_samples)
        .step_by(MC_BLOCK)
        .enumerate()
        .map(|(b, start)| (b as u64, MC_BLOCK.min(n_samples - start)))
        .collect();
    let errors: u64 = blocks
        .par_iter()
        .map(|&(block, count)| {
            let mut rng = mc_block_rng(seed, block);
            let mut x = vec![0.0; spec.dim()];
            let mut e = 0u64;
            for _ in 0..count {
                let y = spec.draw_observed(&mut rng, &mut x);
                if sign_pm(predictor.score(&x)) != y {
                    e += 1;
                }
            }
            e
        })
        .sum();
    let p = errors as f64 / n_samples as f64;
    let (lo, hi) = wilson_interval(errors, n_samples as u64, ci_level);
    Ok(ErrorEstimate {
        point_estimate: p,
        ci_low: lo,
        ci_high: hi,
        n_samples,
        method: EstimateMethod::MonteCarlo,
    })
}

/// Closed-form test error of a linear classifier under the Gaussian
/// single-index family: the pair (<w,x>, [x]_1) is jointly Gaussian with
/// correlation rho = sqrt(lambda_1) w_1 / sqrt(w' Sigma w), so the clean
/// error is arccos(rho)/pi and the total is eta + (1-2 eta) arccos(rho)/pi.
pub fn test_error_exact_sg_gaussian(w: &[f64], spec: &SgSpec) -> Result<ErrorEstimate> {
    spec.validate()?;
    if spec.base_dist != crate::data_gen::BaseDist::Gaussian {
        return Err(Error::validation(
            "closed-form oracle requires the gaussian base distribution",
        ));
    }
    if w.len() != spec.dim() {
        return Err(Error::validation("predictor dimension mismatch"));
    }
    let quad: f64 = w
        .iter()
        .zip(&spec.lambda)
        .map(|(wi, li)| li * wi * wi)
        .sum();
    if !(quad > 0.0) {
        return Err(Error::validation(
            "w' Sigma w must be positive for the closed-form oracle",
        ));
    }
    let rho = (spec.lambda[0].sqrt() * w[0] / quad.sqrt()).clamp(-1.0, 1.0);
    let clean = rho.acos() / std::f64::consts::PI;
    let total = spec.eta + (1.0 - 2.0 * spec.eta) * clean;
    Ok(ErrorEstimate {
        point_estimate: total,
        ci_low: total,
        ci_high: total,
        n_samples: 0,
        method: EstimateMethod::ClosedForm,
    })
}

/// Signal/noise decomposition of a weighted estimator sum_i s_i y_i x_i on
/// opposing-means data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OppDecomposition {
    /// Coefficient of mu in the estimator: sum_clean s_i - sum_noisy s_i.
    pub signal_coef: f64,
    /// Norm of the mu component, |signal_coef| * ||mu||.
    pub signal_norm: f64,
    /// Norm of the residual direction xi = signal_coef^{-1} sum s_i y_i z_i.
    pub xi_norm: f64,
    /// min over training examples of <xi, y_k x_k>.
    pub min_train_inner: f64,
    /// max over fresh test draws of |<y x, xi>|.
    pub max_test_inner: f64,
    pub n_test_draws: usize,
    /// min_train_inner / (d/n).
    pub train_ratio_vs_d_over_n: f64,
    /// max_test_inner / ((||mu|| + sqrt d)/sqrt n).
    pub test_ratio_vs_prediction: f64,
}

/// Decompose the weighted estimator on a dataset drawn from an opposing-means
/// spec: the mu-component coefficient, the overfitting direction xi, its
/// inner products with the training examples, and its effect on `n_test`
/// fresh draws.
pub fn opp_signal_decomposition(
    data: &Dataset,
    s: &[f64],
    n_test: usize,
    seed: u64,
) -> Result<OppDecomposition> {
    let DataSource::Spec(DistributionSpec::Opp(spec)) = &data.source else {
        return Err(Error::validation(
            "signal decomposition requires a dataset drawn from an opposing-means spec",
        ));
    };
    if s.len() != data.n {
        return Err(Error::validation("one weight per example required"));
    }
    if n_test < 1 {
        return Err(Error::validation("need at least one test draw"));
    }
    let n = data.n;
    let d = data.d;
    let mu = &spec.mu;

    let mut signal_coef = 0.0;
    for i in 0..n {
        signal_coef += if data.noise_mask[i] { -s[i] } else { s[i] };
    }
    if signal_coef == 0.0 {
        return Err(Error::validation(
            "degenerate weighting: clean and noisy weights balance exactly",
        ));
    }

    // xi = signal_coef^{-1} sum_i s_i y_i z_i with z_i = x_i - y_clean_i mu
    let mut xi = vec![0.0; d];
    for i in 0..n {
        let yi = data.y(i);
        axpy(&mut xi, s[i] * yi / signal_coef, data.row(i));
        // subtract the mean component: s_i y_i y_clean_i mu
        let c = -s[i] * yi * data.y_clean[i] as f64 / signal_coef;
        axpy(&mut xi, c, mu);
    }

    let min_train_inner = (0..n)
        .map(|k| data.y(k) * dot(&xi, data.row(k)))
        .fold(f64::INFINITY, f64::min);

    let mut rng = stream_rng(seed, STREAM_PROBES);
    let test_spec = DistributionSpec::Opp(spec.clone());
    let mut x = vec![0.0; d];
    let mut max_test_inner = 0.0f64;
    for _ in 0..n_test {
        let y = test_spec.draw_observed(&mut rng, &mut x);
        max_test_inner = max_test_inner.max((y as f64 * dot(&x, &xi)).abs());
    }

    let d_over_n = d as f64 / n as f64;
    let pred_test = (norm(mu) + (d as f64).sqrt()) / (n as f64).sqrt();
    Ok(OppDecomposition {
        signal_coef,
        signal_norm: signal_coef.abs() * norm(mu),
        xi_norm: norm(&xi),
        min_train_inner,
        max_test_inner,
        n_test_draws: n_test,
        train_ratio_vs_d_over_n: min_train_inner / d_over_n,
        test_ratio_vs_prediction: max_test_inner / pred_test,
    })
}
