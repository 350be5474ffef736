//! Deterministic diagnostics of a dataset: the orthogonality profile, the
//! uniformity ratio of coefficient vectors, spectral functionals of diagonal
//! covariances, and the distributional assumption checkers.

use serde::{Deserialize, Serialize};

use crate::data_gen::{ClustSpec, Dataset, SgSpec};
use crate::error::{Error, Result};
use crate::linalg::norm;

/// Norm and correlation profile of a training set.
///
/// `p_star` is the exact supremum of p such that the data is p-orthogonal
/// (`r_min_sq >= p * r_sq * n * zeta`); `None` encodes +infinity, which
/// occurs exactly when the data is exactly orthogonal (`zeta == 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityProfile {
    pub n: usize,
    /// min_i ||x_i||^2
    pub r_min_sq: f64,
    /// max_i ||x_i||^2
    pub r_max_sq: f64,
    /// r_max_sq / r_min_sq
    pub r_sq: f64,
    /// max_{i != j} |<x_i, x_j>|
    pub zeta: f64,
    pub p_star: Option<f64>,
}

impl OrthogonalityProfile {
    /// Whether the data is p-orthogonal for this particular p.
    pub fn is_p_orthogonal(&self, p: f64) -> bool {
        match self.p_star {
            None => p > 0.0,
            Some(ps) => p <= ps,
        }
    }

    /// p_star as a float, +inf for exactly orthogonal data.
    pub fn p_star_value(&self) -> f64 {
        self.p_star.unwrap_or(f64::INFINITY)
    }
}

/// Compute the orthogonality profile from the Gram matrix. Needs n >= 2
/// (pairwise correlations are undefined otherwise).
pub fn orthogonality_profile(data: &Dataset) -> Result<OrthogonalityProfile> {
    if data.n < 2 {
        return Err(Error::validation(
            "orthogonality profile needs n >= 2 (zeta is undefined)",
        ));
    }
    let n = data.n;
    let gram = data.gram();
    let mut r_min_sq = f64::INFINITY;
    let mut r_max_sq: f64 = 0.0;
    let mut zeta: f64 = 0.0;
    for i in 0..n {
        let nsq = gram[i * n + i];
        r_min_sq = r_min_sq.min(nsq);
        r_max_sq = r_max_sq.max(nsq);
        for j in (i + 1)..n {
            zeta = zeta.max(gram[i * n + j].abs());
        }
    }
    let r_sq = r_max_sq / r_min_sq;
    let p_star = if zeta > 0.0 {
        Some(r_min_sq / (r_sq * n as f64 * zeta))
    } else {
        None
    };
    Ok(OrthogonalityProfile {
        n,
        r_min_sq,
        r_max_sq,
        r_sq,
        zeta,
        p_star,
    })
}

/// max_i s_i / min_i s_i for a strictly positive coefficient vector.
pub fn uniformity_ratio(s: &[f64]) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::validation("uniformity ratio of an empty vector"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in s {
        if !(v > 0.0) {
            return Err(Error::validation(format!(
                "uniformity witness requires strictly positive coefficients, got {v}"
            )));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(hi / lo)
}

/// Check that `w` is represented by the positive coefficients `s` over the
/// observed-label examples: ||w - sum_i s_i y_i x_i|| <= tol * ||w||.
pub fn check_tau_uniform(w: &[f64], data: &Dataset, s: &[f64], tol: f64) -> Result<bool> {
    if w.len() != data.d || s.len() != data.n {
        return Err(Error::validation("dimension mismatch in tau-uniform check"));
    }
    if s.iter().any(|&v| !(v > 0.0)) {
        return Ok(false);
    }
    let mut recon = vec![0.0; data.d];
    for i in 0..data.n {
        crate::linalg::axpy(&mut recon, s[i] * data.y(i), data.row(i));
    }
    let mut diff_sq = 0.0;
    for (a, b) in w.iter().zip(&recon) {
        diff_sq += (a - b) * (a - b);
    }
    Ok(diff_sq.sqrt() <= tol * norm(w))
}

/// Stable rank of diag(lambda): (sum lambda_i^2) / (max lambda_i)^2.
/// The caller passes the eigenvalues of the matrix in question (e.g. the
/// tail block of a covariance).
pub fn stable_rank(diag: &[f64]) -> Result<f64> {
    spectral_check(diag)?;
    let sum_sq: f64 = diag.iter().map(|l| l * l).sum();
    let max_sq = diag.iter().fold(0.0f64, |a, &l| a.max(l * l));
    Ok(sum_sq / max_sq)
}

/// tr(Sigma)/sqrt(tr(Sigma^2)) for Sigma = diag(lambda).
pub fn effective_rank_ratio(lambda: &[f64]) -> Result<f64> {
    spectral_check(lambda)?;
    let tr: f64 = lambda.iter().sum();
    let tr2: f64 = lambda.iter().map(|l| l * l).sum();
    Ok(tr / tr2.sqrt())
}

fn spectral_check(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::validation("eigenvalue vector is empty"));
    }
    if v.iter().any(|&l| l < 0.0 || !l.is_finite()) {
        return Err(Error::validation("eigenvalues must be finite and >= 0"));
    }
    if v.iter().all(|&l| l == 0.0) {
        return Err(Error::validation("eigenvalue vector is all zeros"));
    }
    Ok(())
}

/// One checked assumption: `satisfied` iff lhs >= rhs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionEntry {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    /// lhs / rhs; +inf when rhs = 0.
    pub margin_ratio: f64,
}

impl AssumptionEntry {
    fn geq(name: &str, lhs: f64, rhs: f64) -> Self {
        AssumptionEntry {
            name: name.to_string(),
            lhs,
            rhs,
            satisfied: lhs >= rhs,
            margin_ratio: if rhs == 0.0 { f64::INFINITY } else { lhs / rhs },
        }
    }
}

/// Evaluation of a family's assumptions at explicit `C` and `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn all_satisfied(&self) -> bool {
        self.entries.iter().all(|e| e.satisfied)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Compact "SG1:1;SG2:0" form for CSV cells.
    pub fn compact(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}:{}", e.name, e.satisfied as u8))
            .collect::<Vec<_>>()
            .join(";")
    }
}

fn validate_c_delta(c: f64, delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::validation("delta must lie in (0, 1/2)"));
    }
    if !(c > 1.0) {
        return Err(Error::validation("C must be > 1"));
    }
    Ok(())
}

/// Sub-Gaussian family assumptions (natural logarithms):
/// SG1: n >= C log(6/delta);
/// SG2: StableRank(Sigma_{2:d}) >= C log(6n/delta);
/// SG3: tr(Sigma)/sqrt(tr(Sigma^2)) >= C n log(6n^2/delta).
pub fn sg_assumption_report(
    spec: &SgSpec,
    n: usize,
    delta: f64,
    c: f64,
) -> Result<AssumptionReport> {
    spec.validate()?;
    validate_c_delta(c, delta)?;
    let nf = n as f64;
    let sg1 = AssumptionEntry::geq("SG1", nf, c * (6.0 / delta).ln());
    let tail = spec.lambda_tail();
    let srank = if tail.is_empty() || tail.iter().all(|&l| l == 0.0) {
        0.0
    } else {
        stable_rank(tail)?
    };
    let sg2 = AssumptionEntry::geq("SG2", srank, c * (6.0 * nf / delta).ln());
    let err = effective_rank_ratio(&spec.lambda)?;
    let sg3 = AssumptionEntry::geq("SG3", err, c * nf * (6.0 * nf * nf / delta).ln());
    Ok(AssumptionReport {
        entries: vec![sg1, sg2, sg3],
    })
}

/// Cluster family assumptions (natural logarithms):
/// CL1: n >= C k^2 log(k/delta);
/// CL2: d >= C max{ n max_q ||mu_q||^2, n^2 log(n/delta) };
/// CL3: min_q ||mu_q|| >= C k sqrt(log(2 n k/delta));
/// CL4: min_q ||mu_q||^2 >= C k max_{q != r} |<mu_q, mu_r>|.
pub fn clust_assumption_report(
    spec: &ClustSpec,
    n: usize,
    delta: f64,
    c: f64,
) -> Result<AssumptionReport> {
    spec.validate()?;
    validate_c_delta(c, delta)?;
    let nf = n as f64;
    let k = spec.k() as f64;
    let d = spec.dim() as f64;
    let cl1 = AssumptionEntry::geq("CL1", nf, c * k * k * (k / delta).ln());
    let max_mu_sq = spec.max_mean_norm().powi(2);
    let cl2 = AssumptionEntry::geq(
        "CL2",
        d,
        c * (nf * max_mu_sq).max(nf * nf * (nf / delta).ln()),
    );
    let cl3 = AssumptionEntry::geq(
        "CL3",
        spec.min_mean_norm(),
        c * k * (2.0 * nf * k / delta).ln().sqrt(),
    );
    let cl4 = AssumptionEntry::geq(
        "CL4",
        spec.min_mean_norm().powi(2),
        c * k * spec.max_cross_inner(),
    );
    Ok(AssumptionReport {
        entries: vec![cl1, cl2, cl3, cl4],
    })
}
