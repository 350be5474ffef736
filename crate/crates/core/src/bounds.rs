//! Closed-form evaluation of the explicit test-error bounds and related
//! quantities, with the unspecified absolute constants exposed as caller
//! parameters (default 1.0) and recorded alongside each value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data_gen::ClustSpec;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq};

/// Which bound formula produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    SgTestBound,
    ClustTestBound,
}

/// A bound evaluation: `value` is clamped into [eta, 1], `raw` is the
/// unclamped formula output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub raw: f64,
    pub constants_used: BTreeMap<String, f64>,
    pub formula_id: FormulaId,
}

impl BoundValue {
    fn new(raw: f64, eta: f64, formula_id: FormulaId, constants: &[(&str, f64)]) -> Self {
        BoundValue {
            value: raw.max(eta).min(1.0),
            raw,
            constants_used: constants.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            formula_id,
        }
    }
}

/// Sub-Gaussian test-error bound:
/// eta + C' sqrt(tr(S^2)/l1^2) (1 + sqrt(max(0, 0.5 log(l1^2/tr(S^2)))))
/// where S = Sigma_{2:d} and l1 is the top eigenvalue. A zero tail gives
/// exactly the noise floor eta.
pub fn sg_test_bound(lambda: &[f64], eta: f64, c_prime: f64) -> Result<BoundValue> {
    if lambda.is_empty() || !(lambda[0] > 0.0) {
        return Err(Error::validation("sg bound needs lambda_1 > 0"));
    }
    let l1_sq = lambda[0] * lambda[0];
    let tail_sq: f64 = lambda[1..].iter().map(|l| l * l).sum();
    let raw = if tail_sq == 0.0 {
        eta
    } else {
        let ratio = tail_sq / l1_sq;
        let log_term = (0.5 * (l1_sq / tail_sq).ln()).max(0.0);
        eta + c_prime * ratio.sqrt() * (1.0 + log_term.sqrt())
    };
    Ok(BoundValue::new(
        raw,
        eta,
        FormulaId::SgTestBound,
        &[("c_prime", c_prime), ("eta", eta)],
    ))
}

/// Cluster test-error bound: eta + exp(-n min_q ||mu_q||^4 / (C' k^2 d)).
pub fn clust_test_bound(
    means: &[Vec<f64>],
    n: usize,
    k: usize,
    d: usize,
    eta: f64,
    c_prime: f64,
) -> Result<BoundValue> {
    if n < 1 || k < 1 || d < 1 {
        return Err(Error::validation("cluster bound needs n, k, d >= 1"));
    }
    if !(c_prime > 0.0) {
        return Err(Error::validation("C' must be positive"));
    }
    let min_mu_sq = means
        .iter()
        .map(|m| norm_sq(m))
        .fold(f64::INFINITY, f64::min);
    let exponent = n as f64 * min_mu_sq * min_mu_sq / (c_prime * (k * k) as f64 * d as f64);
    let raw = eta + (-exponent).exp();
    Ok(BoundValue::new(
        raw,
        eta,
        FormulaId::ClustTestBound,
        &[("c_prime", c_prime), ("eta", eta)],
    ))
}

/// The alignment ratio driving the sub-Gaussian generalization lemma:
/// ||[Sigma^{1/2} w]_{2:d}|| / (sqrt(lambda_1) [w]_1), for [w]_1 > 0.
/// Zero tail gives 0. The lemma's hypothesis [w]_1 > 0 is enforced.
pub fn sg_alignment(w: &[f64], lambda: &[f64]) -> Result<f64> {
    if w.len() != lambda.len() {
        return Err(Error::validation("w and lambda must share a dimension"));
    }
    if w.is_empty() || !(w[0] > 0.0) {
        return Err(Error::validation(
            "alignment requires [w]_1 > 0 (lemma hypothesis fails otherwise)",
        ));
    }
    let tail_sq: f64 = w[1..]
        .iter()
        .zip(&lambda[1..])
        .map(|(wi, li)| li * wi * wi)
        .sum();
    Ok(tail_sq.sqrt() / (lambda[0].sqrt() * w[0]))
}

/// Per-cluster margin exponent of a direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMarginExponent {
    pub cluster: usize,
    /// <w, mu_q>^2 / ||w||^2, the argument of the exp(-c ...) tail term.
    pub exponent: f64,
    /// Sign of y_q <w, mu_q>; the tail bound applies when this is >= 0.
    pub aligned_sign: i8,
}

/// Arguments of the per-cluster exponential tail terms: exponent
/// <w, mu_q>^2/||w||^2 and the sign of y_q <w, mu_q> (the absolute constant
/// multiplying the exponent is not evaluated).
pub fn cluster_margin_exponents(w: &[f64], spec: &ClustSpec) -> Result<Vec<ClusterMarginExponent>> {
    spec.validate()?;
    if w.len() != spec.dim() {
        return Err(Error::validation("direction dimension mismatch"));
    }
    let w_norm_sq = norm_sq(w);
    if w_norm_sq == 0.0 {
        return Err(Error::validation("cluster exponents need w != 0"));
    }
    Ok(spec
        .means
        .iter()
        .enumerate()
        .map(|(q, mu)| {
            let ip = dot(w, mu);
            let signed = spec.cluster_labels[q] as f64 * ip;
            ClusterMarginExponent {
                cluster: q,
                exponent: ip * ip / w_norm_sq,
                aligned_sign: if signed < 0.0 { -1 } else { 1 },
            }
        })
        .collect())
}

/// The label-noise ceiling under which the linear max-margin results hold.
pub fn eta_limit_linear() -> f64 {
    0.49
}

/// The label-noise ceiling for leaky-network results: 0.49 gamma^2.
pub fn eta_limit_leaky(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::validation("gamma must lie in (0, 1]"));
    }
    Ok(0.49 * gamma * gamma)
}
