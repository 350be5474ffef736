//! Seed-driven samplers for the synthetic distributions used throughout the
//! crate, with explicit clean/noisy label bookkeeping.
//!
//! Three families are supported:
//! - a sub-Gaussian single-index family (diagonal covariance, label given by
//!   the sign of the first coordinate, flipped with probability `eta`);
//! - a cluster mixture (uniform cluster index, mean shift plus isotropic
//!   noise, cluster label flipped with probability `eta`);
//! - an opposing-means mixture (uniform +/-1 latent label, mean `+/-mu` plus
//!   standard Gaussian noise, flipped with probability `eta`).
//!
//! Sampling is deterministic given `(spec, n, seed)`. Covariates, label
//! flips, and cluster/label assignments are drawn from independent RNG
//! substreams, so two datasets that differ only in `eta` share covariates.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_ASSIGNMENTS, STREAM_COVARIATES, STREAM_FLIPS};

/// Sign convention used artifact-wide: sign(0) = +1.
#[inline]
pub fn sign_pm(v: f64) -> i8 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

/// Isotropic factor distributions: unit variance, independent components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseDist {
    /// Standard normal entries.
    Gaussian,
    /// +/-1 entries.
    Rademacher,
    /// Uniform on [-sqrt(3), sqrt(3)].
    UniformScaled,
}

impl BaseDist {
    /// Anti-concentration constant `beta` with P(|z_1| <= t) <= beta * t.
    /// Documented on the spec, not enforced at sampling.
    pub fn beta(self) -> f64 {
        match self {
            // density of N(0,1) is bounded by 1/sqrt(2 pi)
            BaseDist::Gaussian => (2.0 / std::f64::consts::PI).sqrt(),
            BaseDist::Rademacher => 1.0,
            BaseDist::UniformScaled => 1.0 / 3f64.sqrt(),
        }
    }

    fn draw(self, rng: &mut impl Rng, out: &mut [f64]) {
        match self {
            BaseDist::Gaussian => {
                for v in out.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
            }
            BaseDist::Rademacher => {
                for v in out.iter_mut() {
                    *v = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                }
            }
            BaseDist::UniformScaled => {
                let s = 3f64.sqrt();
                for v in out.iter_mut() {
                    *v = rng.gen_range(-s..=s);
                }
            }
        }
    }
}

impl fmt::Display for BaseDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BaseDist::Gaussian => "gaussian",
            BaseDist::Rademacher => "rademacher",
            BaseDist::UniformScaled => "uniform_scaled",
        };
        f.write_str(s)
    }
}

fn validate_eta(eta: f64) -> Result<()> {
    if !(0.0..0.5).contains(&eta) {
        return Err(Error::validation(format!(
            "flip probability eta must lie in [0, 1/2), got {eta}"
        )));
    }
    Ok(())
}

/// Sub-Gaussian single-index distribution: x = Sigma^{1/2} z with diagonal
/// Sigma = diag(lambda), clean label sign([x]_1), flip probability `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgSpec {
    /// Eigenvalues lambda_1 >= ... >= lambda_d >= 0 of the diagonal covariance.
    pub lambda: Vec<f64>,
    pub base_dist: BaseDist,
    pub eta: f64,
    /// Anti-concentration constant of the base distribution (documentation).
    pub beta: f64,
}

impl SgSpec {
    pub fn new(lambda: Vec<f64>, base_dist: BaseDist, eta: f64) -> Result<Self> {
        let spec = SgSpec {
            beta: base_dist.beta(),
            lambda,
            base_dist,
            eta,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The spiked-covariance Gaussian family: Sigma = diag(d^rho, 1, ..., 1).
    pub fn pgaus(d: usize, rho: f64, eta: f64) -> Result<Self> {
        if d < 1 {
            return Err(Error::validation("pgaus needs d >= 1"));
        }
        let mut lambda = vec![1.0; d];
        lambda[0] = (d as f64).powf(rho).max(1.0);
        SgSpec::new(lambda, BaseDist::Gaussian, eta)
    }

    pub fn validate(&self) -> Result<()> {
        validate_eta(self.eta)?;
        if self.lambda.is_empty() {
            return Err(Error::validation("lambda must be nonempty"));
        }
        if self.lambda[0] <= 0.0 {
            return Err(Error::validation("lambda_1 must be positive"));
        }
        if self.lambda.iter().any(|&l| l < 0.0 || !l.is_finite()) {
            return Err(Error::validation("lambda entries must be finite and >= 0"));
        }
        if self.lambda.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::validation("lambda must be sorted nonincreasing"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Tail eigenvalues lambda_2..lambda_d.
    pub fn lambda_tail(&self) -> &[f64] {
        &self.lambda[1..]
    }
}

/// Cluster mixture: q uniform on [k], x = mu^(q) + noise_scale * z,
/// clean label = cluster label, flipped with probability `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClustSpec {
    pub means: Vec<Vec<f64>>,
    /// Cluster labels, +/-1 per cluster.
    pub cluster_labels: Vec<i8>,
    pub eta: f64,
    pub base_dist: BaseDist,
    /// Noise amplitude; 1.0 matches the E||z||^2 = d model, 0.0 is the
    /// degenerate fixture where every sample equals its cluster mean.
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
}

fn default_noise_scale() -> f64 {
    1.0
}

impl ClustSpec {
    pub fn new(
        means: Vec<Vec<f64>>,
        cluster_labels: Vec<i8>,
        eta: f64,
        base_dist: BaseDist,
    ) -> Result<Self> {
        let spec = ClustSpec {
            means,
            cluster_labels,
            eta,
            base_dist,
            noise_scale: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// k orthogonal means mu_norm * e_q with alternating labels +1, -1, ...
    pub fn orthogonal(d: usize, k: usize, mu_norm: f64, eta: f64) -> Result<Self> {
        if k > d {
            return Err(Error::validation("orthogonal means require k <= d"));
        }
        let means = (0..k)
            .map(|q| {
                let mut m = vec![0.0; d];
                m[q] = mu_norm;
                m
            })
            .collect();
        let labels = (0..k).map(|q| if q % 2 == 0 { 1 } else { -1 }).collect();
        ClustSpec::new(means, labels, eta, BaseDist::Gaussian)
    }

    pub fn validate(&self) -> Result<()> {
        validate_eta(self.eta)?;
        let k = self.means.len();
        if k < 2 {
            return Err(Error::validation("cluster distribution needs k >= 2"));
        }
        if self.cluster_labels.len() != k {
            return Err(Error::validation("one label per cluster required"));
        }
        if self.cluster_labels.iter().any(|&l| l != 1 && l != -1) {
            return Err(Error::validation("cluster labels must be +/-1"));
        }
        let d = self.means[0].len();
        if d == 0 || self.means.iter().any(|m| m.len() != d) {
            return Err(Error::validation(
                "all means must share a positive dimension",
            ));
        }
        if self.means.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::validation("means must be finite"));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::validation("noise_scale must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn min_mean_norm(&self) -> f64 {
        self.means
            .iter()
            .map(|m| crate::linalg::norm(m))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_mean_norm(&self) -> f64 {
        self.means
            .iter()
            .map(|m| crate::linalg::norm(m))
            .fold(0.0, f64::max)
    }

    /// max_{q != r} |<mu_q, mu_r>|, the cross-correlation of the means.
    pub fn max_cross_inner(&self) -> f64 {
        let k = self.k();
        let mut best = 0.0f64;
        for q in 0..k {
            for r in (q + 1)..k {
                best = best.max(crate::linalg::dot(&self.means[q], &self.means[r]).abs());
            }
        }
        best
    }
}

/// Opposing-means mixture: y_clean uniform +/-1, x = y_clean * mu + z with
/// standard Gaussian z, flipped with probability `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OppSpec {
    pub mu: Vec<f64>,
    pub eta: f64,
}

impl OppSpec {
    pub fn new(mu: Vec<f64>, eta: f64) -> Result<Self> {
        let spec = OppSpec { mu, eta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        validate_eta(self.eta)?;
        if self.mu.is_empty() || self.mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("mu must be nonempty and finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// A sampleable distribution over labeled examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Sg(SgSpec),
    Clust(ClustSpec),
    Opp(OppSpec),
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::Sg(s) => s.validate(),
            DistributionSpec::Clust(s) => s.validate(),
            DistributionSpec::Opp(s) => s.validate(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::Sg(s) => s.dim(),
            DistributionSpec::Clust(s) => s.dim(),
            DistributionSpec::Opp(s) => s.dim(),
        }
    }

    pub fn eta(&self) -> f64 {
        match self {
            DistributionSpec::Sg(s) => s.eta,
            DistributionSpec::Clust(s) => s.eta,
            DistributionSpec::Opp(s) => s.eta,
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        match self {
            DistributionSpec::Sg(s) => sample_sg(s, n, seed),
            DistributionSpec::Clust(s) => sample_clust(s, n, seed),
            DistributionSpec::Opp(s) => sample_opp(s, n, seed),
        }
    }

    /// Draw a single fresh example under the observed-label law. All draws
    /// come from the supplied RNG; used by Monte-Carlo evaluation.
    pub fn draw_observed(&self, rng: &mut impl Rng, x_out: &mut [f64]) -> i8 {
        match self {
            DistributionSpec::Sg(s) => {
                s.base_dist.draw(rng, x_out);
                for (v, &l) in x_out.iter_mut().zip(&s.lambda) {
                    *v *= l.sqrt();
                }
                let y_clean = sign_pm(x_out[0]);
                flip_label(y_clean, s.eta, rng)
            }
            DistributionSpec::Clust(s) => {
                let q = rng.gen_range(0..s.k());
                s.base_dist.draw(rng, x_out);
                for (v, &m) in x_out.iter_mut().zip(&s.means[q]) {
                    *v = s.noise_scale * *v + m;
                }
                flip_label(s.cluster_labels[q], s.eta, rng)
            }
            DistributionSpec::Opp(s) => {
                let y_clean: i8 = if rng.gen::<bool>() { 1 } else { -1 };
                BaseDist::Gaussian.draw(rng, x_out);
                for (v, &m) in x_out.iter_mut().zip(&s.mu) {
                    *v += y_clean as f64 * m;
                }
                flip_label(y_clean, s.eta, rng)
            }
        }
    }
}

#[inline]
fn flip_label(y_clean: i8, eta: f64, rng: &mut impl Rng) -> i8 {
    if eta > 0.0 && rng.gen::<f64>() < eta {
        -y_clean
    } else {
        y_clean
    }
}

/// Where a dataset came from: a sampleable spec, or an ad-hoc fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Spec(DistributionSpec),
    Adhoc { label: String },
}

/// An n x d training set with clean labels, observed labels, and a noise
/// mask. Immutable after creation; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n: usize,
    pub d: usize,
    /// Row-major n*d covariates.
    pub x: Vec<f64>,
    pub y_clean: Vec<i8>,
    pub y_obs: Vec<i8>,
    /// true iff the observed label was flipped.
    pub noise_mask: Vec<bool>,
    /// Cluster index per example; present iff the source is a cluster spec.
    pub cluster_id: Option<Vec<u32>>,
    pub source: DataSource,
    pub seed: u64,
}

impl Dataset {
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.y_obs[i] as f64
    }

    /// Build a noiseless fixture (observed = clean, no flips).
    pub fn adhoc(x: Vec<f64>, d: usize, y_obs: Vec<i8>, label: &str) -> Result<Self> {
        if d == 0 || x.len() != y_obs.len() * d {
            return Err(Error::validation("adhoc dataset: shape mismatch"));
        }
        let ds = Dataset {
            n: y_obs.len(),
            d,
            x,
            y_clean: y_obs.clone(),
            noise_mask: vec![false; y_obs.len()],
            y_obs,
            cluster_id: None,
            source: DataSource::Adhoc {
                label: label.to_string(),
            },
            seed: 0,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Check the structural invariants; deserialization calls this.
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.d < 1 {
            return Err(Error::validation("dataset needs n >= 1 and d >= 1"));
        }
        if self.x.len() != self.n * self.d
            || self.y_clean.len() != self.n
            || self.y_obs.len() != self.n
            || self.noise_mask.len() != self.n
        {
            return Err(Error::validation("dataset field lengths disagree"));
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("covariates must be finite"));
        }
        for i in 0..self.n {
            if self.y_clean[i].abs() != 1 || self.y_obs[i].abs() != 1 {
                return Err(Error::validation("labels must be +/-1"));
            }
            let expect = if self.noise_mask[i] {
                -self.y_clean[i]
            } else {
                self.y_clean[i]
            };
            if self.y_obs[i] != expect {
                return Err(Error::validation(
                    "y_obs must equal y_clean xor noise_mask (as a sign flip)",
                ));
            }
        }
        let is_clust = matches!(self.source, DataSource::Spec(DistributionSpec::Clust(_)));
        if is_clust != self.cluster_id.is_some() {
            return Err(Error::validation(
                "cluster_id must be present iff the source is a cluster spec",
            ));
        }
        if let Some(cid) = &self.cluster_id {
            if cid.len() != self.n {
                return Err(Error::validation("cluster_id length mismatch"));
            }
        }
        Ok(())
    }

    /// Fraction of flipped labels.
    pub fn flip_fraction(&self) -> f64 {
        self.noise_mask.iter().filter(|&&b| b).count() as f64 / self.n as f64
    }

    /// Indices of clean examples (observed label equals clean label).
    pub fn clean_indices(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| !self.noise_mask[i]).collect()
    }

    /// Indices of noisy examples.
    pub fn noisy_indices(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.noise_mask[i]).collect()
    }

    /// Per-cluster (total, clean, noisy) example counts; None for
    /// non-cluster data.
    pub fn cluster_counts(&self) -> Option<Vec<(usize, usize, usize)>> {
        let cid = self.cluster_id.as_ref()?;
        let k = match &self.source {
            DataSource::Spec(DistributionSpec::Clust(c)) => c.k(),
            _ => (cid.iter().max().copied().unwrap_or(0) + 1) as usize,
        };
        let mut counts = vec![(0usize, 0usize, 0usize); k];
        for i in 0..self.n {
            let q = cid[i] as usize;
            counts[q].0 += 1;
            if self.noise_mask[i] {
                counts[q].2 += 1;
            } else {
                counts[q].1 += 1;
            }
        }
        Some(counts)
    }

    /// Gram matrix G[i][j] = <x_i, x_j>, row-major n*n. Small instances are
    /// computed inline; larger ones fan out per row. Entries are identical
    /// either way, so results do not depend on the thread count.
    pub fn gram(&self) -> Vec<f64> {
        let n = self.n;
        let mut g = vec![0.0; n * n];
        let fill_row = |i: usize, row: &mut [f64]| {
            let xi = self.row(i);
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = crate::linalg::dot(xi, self.row(j));
            }
        };
        if n * n * self.d <= 2_000_000 {
            for (i, row) in g.chunks_mut(n).enumerate() {
                fill_row(i, row);
            }
        } else {
            use rayon::prelude::*;
            g.par_chunks_mut(n)
                .enumerate()
                .for_each(|(i, row)| fill_row(i, row));
        }
        g
    }
}

/// Sample from the sub-Gaussian single-index family.
pub fn sample_sg(spec: &SgSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if n < 1 {
        return Err(Error::validation("n must be >= 1"));
    }
    let d = spec.dim();
    let sqrt_lambda: Vec<f64> = spec.lambda.iter().map(|l| l.sqrt()).collect();

    let mut cov_rng = stream_rng(seed, STREAM_COVARIATES);
    let mut x = vec![0.0; n * d];
    let mut y_clean = vec![0i8; n];
    for i in 0..n {
        let row = &mut x[i * d..(i + 1) * d];
        spec.base_dist.draw(&mut cov_rng, row);
        for (v, &s) in row.iter_mut().zip(&sqrt_lambda) {
            *v *= s;
        }
        y_clean[i] = sign_pm(row[0]);
    }

    let (y_obs, noise_mask) = draw_flips(&y_clean, spec.eta, seed);
    Ok(Dataset {
        n,
        d,
        x,
        y_clean,
        y_obs,
        noise_mask,
        cluster_id: None,
        source: DataSource::Spec(DistributionSpec::Sg(spec.clone())),
        seed,
    })
}

/// Sample from the cluster mixture.
pub fn sample_clust(spec: &ClustSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if n < 1 {
        return Err(Error::validation("n must be >= 1"));
    }
    let d = spec.dim();
    let k = spec.k();

    let mut assign_rng = stream_rng(seed, STREAM_ASSIGNMENTS);
    let cluster_id: Vec<u32> = (0..n).map(|_| assign_rng.gen_range(0..k) as u32).collect();

    let mut cov_rng = stream_rng(seed, STREAM_COVARIATES);
    let mut x = vec![0.0; n * d];
    let mut y_clean = vec![0i8; n];
    for i in 0..n {
        let q = cluster_id[i] as usize;
        let row = &mut x[i * d..(i + 1) * d];
        spec.base_dist.draw(&mut cov_rng, row);
        for (v, &m) in row.iter_mut().zip(&spec.means[q]) {
            *v = spec.noise_scale * *v + m;
        }
        y_clean[i] = spec.cluster_labels[q];
    }

    let (y_obs, noise_mask) = draw_flips(&y_clean, spec.eta, seed);
    Ok(Dataset {
        n,
        d,
        x,
        y_clean,
        y_obs,
        noise_mask,
        cluster_id: Some(cluster_id),
        source: DataSource::Spec(DistributionSpec::Clust(spec.clone())),
        seed,
    })
}

/// Sample from the opposing-means mixture.
pub fn sample_opp(spec: &OppSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if n < 1 {
        return Err(Error::validation("n must be >= 1"));
    }
    let d = spec.dim();

    let mut assign_rng = stream_rng(seed, STREAM_ASSIGNMENTS);
    let y_clean: Vec<i8> = (0..n)
        .map(|_| if assign_rng.gen::<bool>() { 1 } else { -1 })
        .collect();

    let mut cov_rng = stream_rng(seed, STREAM_COVARIATES);
    let mut x = vec![0.0; n * d];
    for i in 0..n {
        let row = &mut x[i * d..(i + 1) * d];
        BaseDist::Gaussian.draw(&mut cov_rng, row);
        for (v, &m) in row.iter_mut().zip(&spec.mu) {
            *v += y_clean[i] as f64 * m;
        }
    }

    let (y_obs, noise_mask) = draw_flips(&y_clean, spec.eta, seed);
    Ok(Dataset {
        n,
        d,
        x,
        y_clean,
        y_obs,
        noise_mask,
        cluster_id: None,
        source: DataSource::Spec(DistributionSpec::Opp(spec.clone())),
        seed,
    })
}

fn draw_flips(y_clean: &[i8], eta: f64, seed: u64) -> (Vec<i8>, Vec<bool>) {
    let mut flip_rng = stream_rng(seed, STREAM_FLIPS);
    let noise_mask: Vec<bool> = y_clean
        .iter()
        .map(|_| eta > 0.0 && flip_rng.gen::<f64>() < eta)
        .collect();
    let y_obs = y_clean
        .iter()
        .zip(&noise_mask)
        .map(|(&y, &m)| if m { -y } else { y })
        .collect();
    (y_obs, noise_mask)
}

// ---------------------------------------------------------------------------
// Serialization: a self-describing binary container (round-trip exact) and a
// CSV export.
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"MLD1";

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    schema_version: u32,
    n: u64,
    d: u64,
    seed: u64,
    source: DataSource,
    has_cluster: bool,
}

impl Dataset {
    /// Write the exact binary form: JSON header plus little-endian payload.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let header = BinaryHeader {
            schema_version: 1,
            n: self.n as u64,
            d: self.d as u64,
            seed: self.seed,
            source: self.source.clone(),
            has_cluster: self.cluster_id.is_some(),
        };
        let header_bytes = serde_json::to_vec(&header).map_err(|e| Error::Serde(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
        w.write_all(&header_bytes)?;
        for v in &self.x {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in &self.y_clean {
            w.write_all(&[v as u8])?;
        }
        for &v in &self.y_obs {
            w.write_all(&[v as u8])?;
        }
        for &b in &self.noise_mask {
            w.write_all(&[b as u8])?;
        }
        if let Some(cid) = &self.cluster_id {
            for &c in cid {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::validation("not a dataset file (bad magic)"));
        }
        let mut len4 = [0u8; 4];
        r.read_exact(&mut len4)?;
        let hlen = u32::from_le_bytes(len4) as usize;
        let mut hbytes = vec![0u8; hlen];
        r.read_exact(&mut hbytes)?;
        let header: BinaryHeader =
            serde_json::from_slice(&hbytes).map_err(|e| Error::Serde(e.to_string()))?;
        if header.schema_version != 1 {
            return Err(Error::validation(format!(
                "unsupported dataset schema version {}",
                header.schema_version
            )));
        }
        let n = header.n as usize;
        let d = header.d as usize;
        let mut x = vec![0.0f64; n * d];
        let mut buf8 = [0u8; 8];
        for v in x.iter_mut() {
            r.read_exact(&mut buf8)?;
            *v = f64::from_le_bytes(buf8);
        }
        let read_i8 = |r: &mut BufReader<File>| -> Result<Vec<i8>> {
            let mut b = vec![0u8; n];
            r.read_exact(&mut b)?;
            Ok(b.into_iter().map(|v| v as i8).collect())
        };
        let y_clean = read_i8(&mut r)?;
        let y_obs = read_i8(&mut r)?;
        let mut mask_bytes = vec![0u8; n];
        r.read_exact(&mut mask_bytes)?;
        let noise_mask = mask_bytes.into_iter().map(|b| b != 0).collect();
        let cluster_id = if header.has_cluster {
            let mut cid = vec![0u32; n];
            let mut b4 = [0u8; 4];
            for c in cid.iter_mut() {
                r.read_exact(&mut b4)?;
                *c = u32::from_le_bytes(b4);
            }
            Some(cid)
        } else {
            None
        };
        let ds = Dataset {
            n,
            d,
            x,
            y_clean,
            y_obs,
            noise_mask,
            cluster_id,
            source: header.source,
            seed: header.seed,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// CSV export: index, cluster_id, y_clean, y_obs, x_1..x_d. The binary
    /// form is the round-trip-exact one; this is for inspection.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        write!(w, "index,cluster_id,y_clean,y_obs")?;
        for j in 1..=self.d {
            write!(w, ",x_{j}")?;
        }
        writeln!(w)?;
        for i in 0..self.n {
            let cid = self
                .cluster_id
                .as_ref()
                .map(|c| c[i].to_string())
                .unwrap_or_default();
            write!(w, "{i},{cid},{},{}", self.y_clean[i], self.y_obs[i])?;
            for v in self.row(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
