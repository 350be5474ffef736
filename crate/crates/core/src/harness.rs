//! Experiment orchestration: TOML-backed configuration, a per-seed pipeline
//! (generate, profile, solve or train, certify, evaluate), record emission as
//! CSV/JSON, and one-axis parameter sweeps.
//!
//! Config files are the provenance record: `run` copies the serialized
//! config next to the emitted records, and replaying a config with the same
//! seeds reproduces the records bit for bit (wall-clock aside).

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{clust_test_bound, sg_test_bound};
use crate::data_gen::{BaseDist, ClustSpec, DistributionSpec, OppSpec, SgSpec};
use crate::error::{Error, Result};
use crate::eval::{
    interpolation_check, test_error_exact_sg_gaussian, test_error_mc, train_error, Predictor,
};
use crate::geometry::{
    clust_assumption_report, orthogonality_profile, sg_assumption_report, uniformity_ratio,
    AssumptionReport, OrthogonalityProfile,
};
use crate::leaky::{
    boundary_agreement, effective_linear_direction, extract_net_kkt, init_network,
    lambda_bounds_leaky, rescale_to_unit_margin, tau_bound_leaky, train_to_margin, LossKind,
    ProbeDist, TrainConfig,
};
use crate::maxmargin::{lambda_bounds_linear, solve_max_margin, tau_bound_linear};

pub const SCHEMA_VERSION: u32 = 1;

/// Parametric distribution description, rebuildable after axis edits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistConfig {
    /// Spiked Gaussian family Sigma = diag(d^rho, 1, ..., 1).
    Pgaus { d: usize, rho: f64, eta: f64 },
    /// Fully explicit sub-Gaussian spec.
    Sg {
        lambda: Vec<f64>,
        #[serde(default = "default_base")]
        base: BaseDist,
        eta: f64,
    },
    /// k orthogonal cluster means mu_norm * e_q with alternating labels.
    ClustOrthogonal {
        d: usize,
        k: usize,
        eta: f64,
        #[serde(default)]
        mu_norm: Option<f64>,
        /// ||mu|| = d^exponent; exactly one of mu_norm / mu_norm_exponent.
        #[serde(default)]
        mu_norm_exponent: Option<f64>,
    },
    /// Opposing means +/- mu_norm * e_1.
    Opp { d: usize, eta: f64, mu_norm: f64 },
}

fn default_base() -> BaseDist {
    BaseDist::Gaussian
}

impl DistConfig {
    pub fn build(&self) -> Result<DistributionSpec> {
        match self {
            DistConfig::Pgaus { d, rho, eta } => {
                Ok(DistributionSpec::Sg(SgSpec::pgaus(*d, *rho, *eta)?))
            }
            DistConfig::Sg { lambda, base, eta } => Ok(DistributionSpec::Sg(SgSpec::new(
                lambda.clone(),
                *base,
                *eta,
            )?)),
            DistConfig::ClustOrthogonal {
                d,
                k,
                eta,
                mu_norm,
                mu_norm_exponent,
            } => {
                let norm = match (mu_norm, mu_norm_exponent) {
                    (Some(v), None) => *v,
                    (None, Some(e)) => (*d as f64).powf(*e),
                    _ => {
                        return Err(Error::validation(
                            "clust_orthogonal needs exactly one of mu_norm / mu_norm_exponent",
                        ))
                    }
                };
                Ok(DistributionSpec::Clust(ClustSpec::orthogonal(
                    *d, *k, norm, *eta,
                )?))
            }
            DistConfig::Opp { d, eta, mu_norm } => {
                let mut mu = vec![0.0; *d];
                if mu.is_empty() {
                    return Err(Error::validation("opp needs d >= 1"));
                }
                mu[0] = *mu_norm;
                Ok(DistributionSpec::Opp(OppSpec::new(mu, *eta)?))
            }
        }
    }

    fn set_axis(&mut self, axis: &str, value: f64) -> Result<()> {
        match (self, axis) {
            (DistConfig::Pgaus { d, .. }, "d") => *d = value as usize,
            (DistConfig::Pgaus { rho, .. }, "rho") => *rho = value,
            (DistConfig::Pgaus { eta, .. }, "eta") => *eta = value,
            (DistConfig::Sg { eta, .. }, "eta") => *eta = value,
            (DistConfig::ClustOrthogonal { d, .. }, "d") => *d = value as usize,
            (DistConfig::ClustOrthogonal { k, .. }, "k") => *k = value as usize,
            (DistConfig::ClustOrthogonal { eta, .. }, "eta") => *eta = value,
            (
                DistConfig::ClustOrthogonal {
                    mu_norm,
                    mu_norm_exponent,
                    ..
                },
                "mu_norm",
            ) => {
                *mu_norm = Some(value);
                *mu_norm_exponent = None;
            }
            (DistConfig::Opp { d, .. }, "d") => *d = value as usize,
            (DistConfig::Opp { eta, .. }, "eta") => *eta = value,
            (DistConfig::Opp { mu_norm, .. }, "mu_norm") => *mu_norm = value,
            (_, other) => {
                return Err(Error::validation(format!(
                    "axis '{other}' does not name a numeric field of this distribution"
                )))
            }
        }
        Ok(())
    }
}

/// Which model the pipeline runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Linear,
    LeakyNet { m: usize, gamma: f64, scale: f64 },
}

impl ModelConfig {
    pub fn label(&self) -> &'static str {
        match self {
            ModelConfig::Linear => "linear",
            ModelConfig::LeakyNet { .. } => "leaky_net",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol: 1e-8,
            max_iter: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub loss: LossKind,
    pub max_steps: usize,
    pub checkpoint_every: usize,
    /// 0 selects the automatic rate 0.5 / max ||x_i||^2.
    pub base_lr: f64,
    pub dir_tol: f64,
    pub margin_tol: f64,
    pub window: usize,
    pub kink_tol: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            loss: LossKind::Logistic,
            max_steps: 2_000_000,
            checkpoint_every: 100,
            base_lr: 0.0,
            dir_tol: 1e-11,
            margin_tol: 1e-10,
            window: 5,
            kink_tol: 1e-10,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            loss: self.loss,
            max_steps: self.max_steps,
            checkpoint_every: self.checkpoint_every,
            base_lr: if self.base_lr > 0.0 {
                Some(self.base_lr)
            } else {
                None
            },
            dir_tol: self.dir_tol,
            margin_tol: self.margin_tol,
            window: self.window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub n_test: usize,
    pub ci_level: f64,
    /// Boundary-agreement probe count for network runs.
    pub boundary_probes: usize,
    pub boundary_epsilon: f64,
    /// Evaluate the network itself by Monte Carlo instead of its effective
    /// linear direction (slower at large d).
    pub net_mc: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            n_test: 100_000,
            ci_level: 0.99,
            boundary_probes: 10_000,
            boundary_epsilon: 1e-3,
            net_mc: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundsSection {
    pub c_prime: f64,
    /// The assumption-checker constant C.
    pub big_c: f64,
    pub delta: f64,
    /// Margin used by the cluster noise-tolerance check (eta <= 1/(1+tau) -
    /// cluster_delta); must be given explicitly for cluster experiments.
    pub cluster_delta: Option<f64>,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection {
            c_prime: 1.0,
            big_c: 2.0,
            delta: 0.1,
            cluster_delta: None,
        }
    }
}

/// One experiment: a distribution, a sample size, a model, and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub seeds: Vec<u64>,
    pub n: usize,
    pub distribution: DistConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub training: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub bounds: BoundsSection,
}

fn default_name() -> String {
    "experiment".to_string()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::validation(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::validation("seed list must be nonempty"));
        }
        if self.n < 1 {
            return Err(Error::validation("n must be >= 1"));
        }
        self.distribution.build()?.validate()?;
        if let ModelConfig::LeakyNet { m, gamma, scale } = &self.model {
            if m % 2 != 0 || *m < 2 {
                return Err(Error::validation("m must be even and >= 2"));
            }
            if !(*gamma > 0.0 && *gamma < 1.0) {
                return Err(Error::validation(
                    "leaky model gamma must lie in (0, 1) for training",
                ));
            }
            if !(*scale >= 0.0) {
                return Err(Error::validation("scale must be >= 0"));
            }
        }
        if matches!(self.distribution, DistConfig::ClustOrthogonal { .. })
            && self.bounds.cluster_delta.is_none()
        {
            return Err(Error::validation(
                "cluster experiments must set bounds.cluster_delta explicitly",
            ));
        }
        if !(self.eval.ci_level > 0.0 && self.eval.ci_level < 1.0) {
            return Err(Error::validation("ci_level must lie in (0,1)"));
        }
        Ok(())
    }
}

/// Everything measured in one seeded run. Fields are None when they do not
/// apply to the model type or the pipeline failed before reaching them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub name: String,
    pub model: String,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    /// "ok" or the error that stopped the pipeline.
    pub status: String,
    pub profile: Option<OrthogonalityProfile>,
    pub assumptions: Option<AssumptionReport>,
    pub train_error: Option<f64>,
    pub interpolated: Option<bool>,
    pub tau_measured: Option<f64>,
    pub tau_bound: Option<f64>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub lambda_bound_low: Option<f64>,
    pub lambda_bound_high: Option<f64>,
    /// All multipliers inside the bound interval; None when the
    /// p-orthogonality hypothesis does not hold for this dataset.
    pub sandwich_ok: Option<bool>,
    /// Cluster runs: eta <= 1/(1 + tau_measured) - cluster_delta.
    pub eta_hypothesis_ok: Option<bool>,
    pub test_error: Option<f64>,
    pub test_ci_low: Option<f64>,
    pub test_ci_high: Option<f64>,
    /// Which predictor the test error was measured on (network runs report
    /// "z_direction" unless eval.net_mc is set).
    pub test_error_predictor: Option<String>,
    pub closed_form_error: Option<f64>,
    pub bound_value: Option<f64>,
    pub bound_raw: Option<f64>,
    /// Which closed-form bound produced bound_value, plus its constant.
    pub bound_formula: Option<String>,
    pub bound_c_prime: Option<f64>,
    pub kkt_residual: Option<f64>,
    pub cert_passes: Option<bool>,
    pub boundary_agreement: Option<f64>,
    pub train_steps: Option<usize>,
    pub solver_iterations: Option<usize>,
    pub wall_clock_ms: u64,
}

impl RunRecord {
    fn blank(cfg: &ExperimentConfig, seed: u64, d: usize) -> Self {
        RunRecord {
            schema_version: SCHEMA_VERSION,
            name: cfg.name.clone(),
            model: cfg.model.label().to_string(),
            seed,
            n: cfg.n,
            d,
            status: "ok".to_string(),
            profile: None,
            assumptions: None,
            train_error: None,
            interpolated: None,
            tau_measured: None,
            tau_bound: None,
            lambda_min: None,
            lambda_max: None,
            lambda_bound_low: None,
            lambda_bound_high: None,
            sandwich_ok: None,
            eta_hypothesis_ok: None,
            test_error: None,
            test_ci_low: None,
            test_ci_high: None,
            test_error_predictor: None,
            closed_form_error: None,
            bound_value: None,
            bound_raw: None,
            bound_formula: None,
            bound_c_prime: None,
            kkt_residual: None,
            cert_passes: None,
            boundary_agreement: None,
            train_steps: None,
            solver_iterations: None,
            wall_clock_ms: 0,
        }
    }

    /// Fixed CSV header; one superset schema for both model types.
    pub fn csv_header() -> String {
        [
            "schema_version",
            "name",
            "model",
            "seed",
            "n",
            "d",
            "status",
            "r_min_sq",
            "r_max_sq",
            "r_sq",
            "zeta",
            "p_star",
            "assumptions",
            "train_error",
            "interpolated",
            "tau_measured",
            "tau_bound",
            "lambda_min",
            "lambda_max",
            "lambda_bound_low",
            "lambda_bound_high",
            "sandwich_ok",
            "eta_hypothesis_ok",
            "test_error",
            "test_ci_low",
            "test_ci_high",
            "test_error_predictor",
            "closed_form_error",
            "bound_value",
            "bound_raw",
            "bound_formula",
            "bound_c_prime",
            "kkt_residual",
            "cert_passes",
            "boundary_agreement",
            "train_steps",
            "solver_iterations",
            "wall_clock_ms",
        ]
        .join(",")
    }

    pub fn to_csv_row(&self) -> String {
        fn f(v: &Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        fn b(v: &Option<bool>) -> String {
            v.map(|x| (x as u8).to_string()).unwrap_or_default()
        }
        fn u(v: &Option<usize>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let p = self.profile.as_ref();
        let cells: Vec<String> = vec![
            self.schema_version.to_string(),
            self.name.clone(),
            self.model.clone(),
            self.seed.to_string(),
            self.n.to_string(),
            self.d.to_string(),
            self.status.replace(',', ";"),
            p.map(|p| p.r_min_sq.to_string()).unwrap_or_default(),
            p.map(|p| p.r_max_sq.to_string()).unwrap_or_default(),
            p.map(|p| p.r_sq.to_string()).unwrap_or_default(),
            p.map(|p| p.zeta.to_string()).unwrap_or_default(),
            p.map(|p| match p.p_star {
                Some(v) => v.to_string(),
                None => "inf".to_string(),
            })
            .unwrap_or_default(),
            self.assumptions
                .as_ref()
                .map(|a| a.compact())
                .unwrap_or_default(),
            f(&self.train_error),
            b(&self.interpolated),
            f(&self.tau_measured),
            f(&self.tau_bound),
            f(&self.lambda_min),
            f(&self.lambda_max),
            f(&self.lambda_bound_low),
            f(&self.lambda_bound_high),
            b(&self.sandwich_ok),
            b(&self.eta_hypothesis_ok),
            f(&self.test_error),
            f(&self.test_ci_low),
            f(&self.test_ci_high),
            self.test_error_predictor.clone().unwrap_or_default(),
            f(&self.closed_form_error),
            f(&self.bound_value),
            f(&self.bound_raw),
            self.bound_formula.clone().unwrap_or_default(),
            f(&self.bound_c_prime),
            f(&self.kkt_residual),
            b(&self.cert_passes),
            f(&self.boundary_agreement),
            u(&self.train_steps),
            u(&self.solver_iterations),
            self.wall_clock_ms.to_string(),
        ];
        cells.join(",")
    }

    /// The row minus the wall-clock cell, for determinism comparisons.
    pub fn to_csv_row_stable(&self) -> String {
        let row = self.to_csv_row();
        match row.rfind(',') {
            Some(idx) => row[..idx].to_string(),
            None => row,
        }
    }
}

/// Run the full pipeline for every seed. Per-seed failures are recorded in
/// the status field without aborting the batch; seeds run in parallel and
/// records come back in seed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let records: Vec<RunRecord> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_single(cfg, seed))
        .collect();
    Ok(records)
}

fn run_single(cfg: &ExperimentConfig, seed: u64) -> RunRecord {
    let started = Instant::now();
    let mut rec = RunRecord::blank(cfg, seed, 0);
    let finish = |mut rec: RunRecord, started: Instant| {
        rec.wall_clock_ms = started.elapsed().as_millis() as u64;
        rec
    };

    let spec = match cfg.distribution.build() {
        Ok(s) => s,
        Err(e) => {
            rec.status = e.to_string();
            return finish(rec, started);
        }
    };
    rec.d = spec.dim();

    let data = match spec.sample(cfg.n, seed) {
        Ok(d) => d,
        Err(e) => {
            rec.status = e.to_string();
            return finish(rec, started);
        }
    };

    if data.n >= 2 {
        rec.profile = orthogonality_profile(&data).ok();
    }
    rec.assumptions = match &spec {
        DistributionSpec::Sg(s) => {
            sg_assumption_report(s, cfg.n, cfg.bounds.delta, cfg.bounds.big_c).ok()
        }
        DistributionSpec::Clust(c) => {
            clust_assumption_report(c, cfg.n, cfg.bounds.delta, cfg.bounds.big_c).ok()
        }
        DistributionSpec::Opp(_) => None,
    };

    // theoretical bound value for the family
    match &spec {
        DistributionSpec::Sg(s) => {
            if let Ok(bv) = sg_test_bound(&s.lambda, s.eta, cfg.bounds.c_prime) {
                rec.bound_value = Some(bv.value);
                rec.bound_raw = Some(bv.raw);
                rec.bound_formula = Some("sg_test_bound".to_string());
                rec.bound_c_prime = Some(cfg.bounds.c_prime);
            }
        }
        DistributionSpec::Clust(c) => {
            if let Ok(bv) =
                clust_test_bound(&c.means, cfg.n, c.k(), c.dim(), c.eta, cfg.bounds.c_prime)
            {
                rec.bound_value = Some(bv.value);
                rec.bound_raw = Some(bv.raw);
                rec.bound_formula = Some("clust_test_bound".to_string());
                rec.bound_c_prime = Some(cfg.bounds.c_prime);
            }
        }
        DistributionSpec::Opp(_) => {}
    }

    match &cfg.model {
        ModelConfig::Linear => {
            let sol = match solve_max_margin(&data, cfg.solver.tol, cfg.solver.max_iter) {
                Ok(s) => s,
                Err(e) => {
                    rec.status = e.to_string();
                    return finish(rec, started);
                }
            };
            rec.solver_iterations = Some(sol.iterations);
            let predictor = Predictor::Linear { w: sol.w.clone() };
            fill_predictor_stats(&mut rec, cfg, &spec, &data, &predictor, seed);
            rec.lambda_min = sol
                .lambda
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min)
                .into();
            rec.lambda_max = sol.lambda.iter().cloned().fold(0.0f64, f64::max).into();
            if sol.lambda.iter().all(|&l| l > 0.0) {
                rec.tau_measured = uniformity_ratio(&sol.lambda).ok();
            }
            if let Some(p) = rec.profile.clone() {
                let ps = p.p_star_value();
                if ps >= 3.0 {
                    if let Ok(tb) = tau_bound_linear(ps.min(1e300), p.r_sq) {
                        rec.tau_bound = Some(tb);
                    }
                    if let Ok((lo, hi)) = lambda_bounds_linear(&p, ps.min(1e300)) {
                        rec.lambda_bound_low = Some(lo);
                        rec.lambda_bound_high = Some(hi);
                        rec.sandwich_ok =
                            Some(sol.lambda.iter().all(|&l| l >= lo - 1e-9 && l <= hi + 1e-9));
                    }
                }
            }
            if let DistributionSpec::Sg(s) = &spec {
                if let Ok(e) = test_error_exact_sg_gaussian(&sol.w, s) {
                    rec.closed_form_error = Some(e.point_estimate);
                }
            }
        }
        ModelConfig::LeakyNet { m, gamma, scale } => {
            let params = match init_network(*m, rec.d, *gamma, *scale, seed) {
                Ok(p) => p,
                Err(e) => {
                    rec.status = e.to_string();
                    return finish(rec, started);
                }
            };
            let tc = cfg.training.to_train_config();
            let (trained, trace) = match train_to_margin(&params, &data, &tc) {
                Ok(r) => r,
                Err(e) => {
                    rec.status = e.to_string();
                    return finish(rec, started);
                }
            };
            rec.train_steps = Some(trace.steps_taken);
            let unit = match rescale_to_unit_margin(&trained, &data) {
                Ok(u) => u,
                Err(e) => {
                    rec.status = e.to_string();
                    return finish(rec, started);
                }
            };
            let cert = match extract_net_kkt(&unit, &data, cfg.training.kink_tol) {
                Ok(c) => c,
                Err(e) => {
                    rec.status = e.to_string();
                    return finish(rec, started);
                }
            };
            rec.kkt_residual = Some(cert.stationarity_residual);
            rec.cert_passes = Some(cert.passes);
            rec.tau_measured = cert.tau;
            rec.lambda_min = cert
                .lambda
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min)
                .into();
            rec.lambda_max = cert.lambda.iter().cloned().fold(0.0f64, f64::max).into();

            if let Some(p) = rec.profile.clone() {
                let ps = p.p_star_value();
                if let Ok(tb) = tau_bound_leaky(ps.min(1e300), p.r_sq, *gamma) {
                    rec.tau_bound = Some(tb);
                }
                if let Ok((lo, hi)) = lambda_bounds_leaky(&p, *gamma, ps.min(1e300)) {
                    rec.lambda_bound_low = Some(lo);
                    rec.lambda_bound_high = Some(hi);
                    if cert.passes {
                        rec.sandwich_ok = Some(
                            cert.lambda
                                .iter()
                                .all(|&l| l >= lo - 1e-9 && l <= hi + 1e-9),
                        );
                    }
                }
            }

            let z = match effective_linear_direction(&cert.lambda, &data, *gamma) {
                Ok(z) => z,
                Err(e) => {
                    rec.status = e.to_string();
                    return finish(rec, started);
                }
            };
            if let Ok(agree) = boundary_agreement(
                &unit,
                &z,
                &ProbeDist::Spec(spec.clone()),
                cfg.eval.boundary_probes,
                cfg.eval.boundary_epsilon,
                seed,
            ) {
                rec.boundary_agreement = Some(agree.agreement);
            }

            // train-side stats always use the network itself
            let net_pred = Predictor::Net { params: unit };
            if let Ok((ok, _)) = interpolation_check(&net_pred, &data) {
                rec.interpolated = Some(ok);
            }
            if let Ok(te) = train_error(&net_pred, &data) {
                rec.train_error = Some(te.point_estimate);
            }
            // test error: full net forward when asked, else the certified
            // effective direction
            let (test_pred, label) = if cfg.eval.net_mc {
                (net_pred, "net_forward")
            } else {
                (Predictor::Linear { w: z.clone() }, "z_direction")
            };
            if let Ok(est) =
                test_error_mc(&test_pred, &spec, cfg.eval.n_test, seed, cfg.eval.ci_level)
            {
                rec.test_error = Some(est.point_estimate);
                rec.test_ci_low = Some(est.ci_low);
                rec.test_ci_high = Some(est.ci_high);
                rec.test_error_predictor = Some(label.to_string());
            }
            if let DistributionSpec::Sg(s) = &spec {
                if let Ok(e) = test_error_exact_sg_gaussian(&z, s) {
                    rec.closed_form_error = Some(e.point_estimate);
                }
            }
        }
    }

    // cluster eta-gap hypothesis needs a measured tau
    if let (Some(tau), Some(delta)) = (rec.tau_measured, cfg.bounds.cluster_delta) {
        if matches!(spec, DistributionSpec::Clust(_)) {
            rec.eta_hypothesis_ok = Some(spec.eta() <= 1.0 / (1.0 + tau) - delta);
        }
    }

    finish(rec, started)
}

fn fill_predictor_stats(
    rec: &mut RunRecord,
    cfg: &ExperimentConfig,
    spec: &DistributionSpec,
    data: &crate::data_gen::Dataset,
    predictor: &Predictor,
    seed: u64,
) {
    if let Ok((ok, _)) = interpolation_check(predictor, data) {
        rec.interpolated = Some(ok);
    }
    if let Ok(te) = train_error(predictor, data) {
        rec.train_error = Some(te.point_estimate);
    }
    if let Ok(est) = test_error_mc(predictor, spec, cfg.eval.n_test, seed, cfg.eval.ci_level) {
        rec.test_error = Some(est.point_estimate);
        rec.test_ci_low = Some(est.ci_low);
        rec.test_ci_high = Some(est.ci_high);
        rec.test_error_predictor = Some("linear".to_string());
    }
}

/// One aggregated sweep row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub schema_version: u32,
    pub axis: String,
    pub value: f64,
    pub runs: usize,
    pub failures: usize,
    pub mean_test_error: Option<f64>,
    pub test_error_ci_low: Option<f64>,
    pub test_error_ci_high: Option<f64>,
    pub interpolation_rate: Option<f64>,
    pub mean_bound_value: Option<f64>,
}

impl SweepRow {
    pub fn csv_header() -> String {
        "schema_version,axis,value,runs,failures,mean_test_error,test_error_ci_low,test_error_ci_high,interpolation_rate,mean_bound_value".to_string()
    }

    pub fn to_csv_row(&self) -> String {
        fn f(v: &Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.schema_version,
            self.axis,
            self.value,
            self.runs,
            self.failures,
            f(&self.mean_test_error),
            f(&self.test_error_ci_low),
            f(&self.test_error_ci_high),
            f(&self.interpolation_rate),
            f(&self.mean_bound_value),
        )
    }
}

/// Rerun the experiment for each value of one numeric axis and aggregate
/// mean test error (normal CI across seeds), interpolation rate, and the
/// theoretical bound.
pub fn sweep(cfg: &ExperimentConfig, axis: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::validation("sweep needs at least one axis value"));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut c = cfg.clone();
        match axis {
            "n" => c.n = value as usize,
            "m" => {
                if let ModelConfig::LeakyNet { m, .. } = &mut c.model {
                    *m = value as usize;
                } else {
                    return Err(Error::validation("axis 'm' needs a leaky_net model"));
                }
            }
            "gamma" => {
                if let ModelConfig::LeakyNet { gamma, .. } = &mut c.model {
                    *gamma = value;
                } else {
                    return Err(Error::validation("axis 'gamma' needs a leaky_net model"));
                }
            }
            other => c.distribution.set_axis(other, value)?,
        }
        let records = run_experiment(&c)?;
        rows.push(aggregate(axis, value, &records));
    }
    Ok(rows)
}

fn aggregate(axis: &str, value: f64, records: &[RunRecord]) -> SweepRow {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| r.status == "ok").collect();
    let failures = records.len() - ok.len();
    let errs: Vec<f64> = ok.iter().filter_map(|r| r.test_error).collect();
    let (mean, lo, hi) = if errs.is_empty() {
        (None, None, None)
    } else {
        let k = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / k;
        // sample variance; degenerates to 0 for a single run
        let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (k - 1.0).max(1.0);
        let half = 1.959963984540054 * (var / k).sqrt();
        (Some(mean), Some(mean - half), Some(mean + half))
    };
    let interps: Vec<bool> = ok.iter().filter_map(|r| r.interpolated).collect();
    let interpolation_rate = if interps.is_empty() {
        None
    } else {
        Some(interps.iter().filter(|&&b| b).count() as f64 / interps.len() as f64)
    };
    let bounds: Vec<f64> = ok.iter().filter_map(|r| r.bound_value).collect();
    let mean_bound_value = if bounds.is_empty() {
        None
    } else {
        Some(bounds.iter().sum::<f64>() / bounds.len() as f64)
    };
    SweepRow {
        schema_version: SCHEMA_VERSION,
        axis: axis.to_string(),
        value,
        runs: records.len(),
        failures,
        mean_test_error: mean,
        test_error_ci_low: lo,
        test_error_ci_high: hi,
        interpolation_rate,
        mean_bound_value,
    }
}

/// Serialize records as CSV (header + one row per record).
pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut out = RunRecord::csv_header();
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = SweepRow::csv_header();
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}
