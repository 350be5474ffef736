//! Two-layer leaky-ReLU networks: initialization, forward/gradient
//! evaluation, a gradient-flow discretization with loss-adaptive steps, KKT
//! certification of trained networks, and the closed-form multiplier and
//! uniformity bounds for p-orthogonal data.
//!
//! The trainer runs plain gradient descent with step size proportional to
//! `1/max(risk, floor)`. Because every gradient of the first layer lies in
//! the span of the training examples, the trajectory is maintained in span
//! coordinates (an m x n coefficient matrix against the Gram matrix), which
//! makes a step O(m n^2) instead of O(m n d). The dynamics are identical to
//! the direct update up to floating-point rounding; a test pins that down.
//! Per-example weights are kept in log space so the late phase (margins far
//! beyond exp underflow) stays exact.

use serde::{Deserialize, Serialize};

use crate::data_gen::{sign_pm, Dataset, DistributionSpec};
use crate::error::{Error, Result};
use crate::geometry::{uniformity_ratio, OrthogonalityProfile};
use crate::linalg::{axpy, dot, nnls_normal, norm, norm_sq};
use crate::rng::{stream_rng, STREAM_INIT, STREAM_PROBES};
use crate::stats::{log1pexp, log_logistic_dloss_abs, log_logistic_loss, logsumexp};

/// First-layer weights plus the fixed second layer: half the output weights
/// are +1/sqrt(m), half are -1/sqrt(m), and they are never trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub m: usize,
    pub d: usize,
    /// Row-major m x d first-layer weights.
    pub w: Vec<f64>,
    /// Second-layer weights, +/- 1/sqrt(m) each.
    pub a: Vec<f64>,
    /// Leaky slope in (0, 1]; 1 collapses the network to a linear map.
    pub gamma: f64,
}

impl NetworkParams {
    pub fn new(w: Vec<f64>, m: usize, d: usize, a: Vec<f64>, gamma: f64) -> Result<Self> {
        let p = NetworkParams { m, d, w, a, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.m % 2 != 0 {
            return Err(Error::validation("network width m must be even and >= 2"));
        }
        if self.d < 1 || self.w.len() != self.m * self.d || self.a.len() != self.m {
            return Err(Error::validation("network parameter shapes disagree"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::validation("leaky slope gamma must lie in (0, 1]"));
        }
        let unit = 1.0 / (self.m as f64).sqrt();
        let pos = self.a.iter().filter(|&&v| v > 0.0).count();
        if pos != self.m / 2 || self.a.iter().any(|&v| (v.abs() - unit).abs() > 1e-12) {
            return Err(Error::validation(
                "second layer must hold exactly m/2 weights of each sign, magnitude 1/sqrt(m)",
            ));
        }
        if self.w.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("weights must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.w[j * self.d..(j + 1) * self.d]
    }

    #[inline]
    pub fn phi(&self, q: f64) -> f64 {
        if q >= 0.0 {
            q
        } else {
            self.gamma * q
        }
    }

    /// Subgradient selection for phi: 1 on the positive side, gamma at and
    /// below zero (the fixed Clarke selection used artifact-wide).
    #[inline]
    pub fn phi_prime(&self, q: f64) -> f64 {
        if q > 0.0 {
            1.0
        } else {
            self.gamma
        }
    }

    /// f(x; W) = sum_j a_j phi(<w_j, x>).
    pub fn forward(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        (0..self.m)
            .map(|j| self.a[j] * self.phi(dot(self.row(j), x)))
            .sum()
    }

    pub fn fro_norm(&self) -> f64 {
        norm(&self.w)
    }

    /// Margins y_i f(x_i; W) over a dataset.
    pub fn margins(&self, data: &Dataset) -> Vec<f64> {
        (0..data.n)
            .map(|i| data.y(i) * self.forward(data.row(i)))
            .collect()
    }
}

/// Initialize a network: rows of W i.i.d. Gaussian with standard deviation
/// `scale/sqrt(d)`, first m/2 output weights +1/sqrt(m), rest -1/sqrt(m).
pub fn init_network(
    m: usize,
    d: usize,
    gamma: f64,
    scale: f64,
    seed: u64,
) -> Result<NetworkParams> {
    if m < 2 || m % 2 != 0 {
        return Err(Error::validation("network width m must be even and >= 2"));
    }
    if !(scale >= 0.0) {
        return Err(Error::validation("init scale must be >= 0"));
    }
    let mut rng = stream_rng(seed, STREAM_INIT);
    let sd = scale / (d as f64).sqrt();
    let mut w = vec![0.0; m * d];
    {
        use rand::Rng;
        for v in w.iter_mut() {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            *v = sd * z;
        }
    }
    let unit = 1.0 / (m as f64).sqrt();
    let a = (0..m)
        .map(|j| if j < m / 2 { unit } else { -unit })
        .collect();
    NetworkParams::new(w, m, d, a, gamma)
}

/// Loss functions with exponential tails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Logistic,
    Exponential,
}

impl LossKind {
    /// ell(q), stable against overflow for large positive q.
    #[inline]
    pub fn loss(self, q: f64) -> f64 {
        match self {
            LossKind::Logistic => log1pexp(-q),
            LossKind::Exponential => (-q).exp(),
        }
    }

    /// |ell'(q)| (both losses have ell' < 0).
    #[inline]
    pub fn dloss_abs(self, q: f64) -> f64 {
        match self {
            LossKind::Logistic => 1.0 / (1.0 + q.exp()),
            LossKind::Exponential => (-q).exp(),
        }
    }

    /// ln ell(q), exact even when ell underflows.
    #[inline]
    pub fn log_loss(self, q: f64) -> f64 {
        match self {
            LossKind::Logistic => log_logistic_loss(q),
            LossKind::Exponential => -q,
        }
    }

    /// ln |ell'(q)|.
    #[inline]
    pub fn log_dloss_abs(self, q: f64) -> f64 {
        match self {
            LossKind::Logistic => log_logistic_dloss_abs(q),
            LossKind::Exponential => -q,
        }
    }
}

/// Empirical risk and its Clarke-selection gradient (m x d, row-major).
pub fn loss_and_grad(
    params: &NetworkParams,
    data: &Dataset,
    loss: LossKind,
) -> Result<(f64, Vec<f64>)> {
    if data.d != params.d {
        return Err(Error::validation("dimension mismatch in loss_and_grad"));
    }
    let n = data.n;
    let nf = n as f64;
    let mut risk = 0.0;
    let mut grad = vec![0.0; params.m * params.d];
    for i in 0..n {
        let xi = data.row(i);
        let yi = data.y(i);
        let q = yi * params.forward(xi);
        risk += loss.loss(q) / nf;
        let dl = -loss.dloss_abs(q); // ell'(q)
        for j in 0..params.m {
            let pre = dot(params.row(j), xi);
            let coef = dl * yi * params.a[j] * params.phi_prime(pre) / nf;
            if coef != 0.0 {
                axpy(&mut grad[j * params.d..(j + 1) * params.d], coef, xi);
            }
        }
    }
    Ok((risk, grad))
}

/// Training schedule for the gradient-flow discretization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub max_steps: usize,
    /// Steps between trace checkpoints (also the stopping cadence).
    pub checkpoint_every: usize,
    /// Absolute base learning rate; None picks 0.5 / max_i ||x_i||^2.
    pub base_lr: Option<f64>,
    /// Direction convergence: checkpoint-to-checkpoint cosine >= 1 - dir_tol.
    pub dir_tol: f64,
    /// Margin stall: relative change of the min normalized margin over
    /// `window` checkpoints below this.
    pub margin_tol: f64,
    pub window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::Logistic,
            max_steps: 1_000_000,
            checkpoint_every: 100,
            base_lr: None,
            dir_tol: 1e-9,
            margin_tol: 1e-8,
            window: 5,
        }
    }
}

/// The loss-adaptive step floor: risks below 1e-300 are clamped in log space.
const LOG_RISK_FLOOR: f64 = -690.7755278982137; // ln(1e-300)

/// One trace checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    /// Empirical risk; underflows to 0 for very large margins.
    pub risk: f64,
    /// ln of the empirical risk (exact in the underflow regime).
    pub log_risk: f64,
    /// min_i y_i f(x_i; W) / ||W||_F.
    pub min_norm_margin: f64,
    /// Cosine between this checkpoint's direction and the previous one.
    pub direction_cosine: Option<f64>,
    pub w_fro_norm: f64,
}

/// Checkpointed training history.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub entries: Vec<TraceEntry>,
    pub steps_taken: usize,
}

/// Span-coordinate training state: W(t) = W0 + C(t) X.
struct SpanState<'a> {
    data: &'a Dataset,
    gram: Vec<f64>, // n x n
    p0: Vec<f64>,   // m x n preactivations of W0
    c: Vec<f64>,    // m x n coefficients
    pre: Vec<f64>,  // m x n current preactivations
    w0_norm_sq: f64,
    a: Vec<f64>,
    gamma: f64,
    m: usize,
    n: usize,
}

impl<'a> SpanState<'a> {
    fn new(params: &NetworkParams, data: &'a Dataset) -> Self {
        let m = params.m;
        let n = data.n;
        let gram = data.gram();
        let mut p0 = vec![0.0; m * n];
        for j in 0..m {
            let wj = params.row(j);
            for i in 0..n {
                p0[j * n + i] = dot(wj, data.row(i));
            }
        }
        SpanState {
            data,
            gram,
            pre: p0.clone(),
            p0,
            c: vec![0.0; m * n],
            w0_norm_sq: norm_sq(&params.w),
            a: params.a.clone(),
            gamma: params.gamma,
            m,
            n,
        }
    }

    #[inline]
    fn phi(&self, q: f64) -> f64 {
        if q >= 0.0 {
            q
        } else {
            self.gamma * q
        }
    }

    fn margins(&self, out: &mut [f64]) {
        for i in 0..self.n {
            let mut f = 0.0;
            for j in 0..self.m {
                f += self.a[j] * self.phi(self.pre[j * self.n + i]);
            }
            out[i] = self.data.y(i) * f;
        }
    }

    /// ||W0 + C X||_F^2 for an arbitrary coefficient matrix.
    fn norm_sq_of(&self, c: &[f64]) -> f64 {
        let n = self.n;
        let mut total = self.w0_norm_sq;
        for j in 0..self.m {
            let cj = &c[j * n..(j + 1) * n];
            let p0j = &self.p0[j * n..(j + 1) * n];
            let mut cross = 0.0;
            let mut quad = 0.0;
            for i2 in 0..n {
                cross += cj[i2] * p0j[i2];
                let mut gi = 0.0;
                for i in 0..n {
                    gi += cj[i] * self.gram[i2 * n + i];
                }
                quad += cj[i2] * gi;
            }
            total += 2.0 * cross + quad;
        }
        total
    }

    /// <W0 + Ca X, W0 + Cb X>.
    fn inner_of(&self, ca: &[f64], cb: &[f64]) -> f64 {
        let n = self.n;
        let mut total = self.w0_norm_sq;
        for j in 0..self.m {
            let aj = &ca[j * n..(j + 1) * n];
            let bj = &cb[j * n..(j + 1) * n];
            let p0j = &self.p0[j * n..(j + 1) * n];
            for i2 in 0..n {
                total += (aj[i2] + bj[i2]) * p0j[i2];
                let mut gi = 0.0;
                for i in 0..n {
                    gi += aj[i] * self.gram[i2 * n + i];
                }
                total += gi * bj[i2];
            }
        }
        total
    }

    /// Apply one normalized gradient step; `coef[i]` is the per-example
    /// weight lr/n * |ell'(q_i)| / max(risk, floor).
    fn step(&mut self, coef: &[f64]) {
        let n = self.n;
        let mut dc = vec![0.0; n];
        for j in 0..self.m {
            let aj = self.a[j];
            for i in 0..n {
                let pre = self.pre[j * n + i];
                let phip = if pre > 0.0 { 1.0 } else { self.gamma };
                dc[i] = coef[i] * self.data.y(i) * aj * phip;
            }
            let cj = &mut self.c[j * n..(j + 1) * n];
            for i in 0..n {
                cj[i] += dc[i];
            }
            let prej = &mut self.pre[j * n..(j + 1) * n];
            for i2 in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    s += dc[i] * self.gram[i2 * n + i];
                }
                prej[i2] += s;
            }
        }
    }

    /// Materialize W = W0 + C X.
    fn materialize(&self, params: &NetworkParams) -> Vec<f64> {
        let mut w = params.w.clone();
        for j in 0..self.m {
            let wj = &mut w[j * params.d..(j + 1) * params.d];
            for i in 0..self.n {
                let cji = self.c[j * self.n + i];
                if cji != 0.0 {
                    axpy(wj, cji, self.data.row(i));
                }
            }
        }
        w
    }
}

/// Train by gradient descent with loss-adaptive steps until the empirical
/// risk falls below log(2)/n, the direction has stopped moving, and the
/// minimum normalized margin has stalled. Exhausting the step budget before
/// the risk threshold is a training failure carrying the trace.
pub fn train_to_margin(
    params: &NetworkParams,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<(NetworkParams, TrainTrace)> {
    params.validate()?;
    data.validate()?;
    if data.d != params.d {
        return Err(Error::validation("dimension mismatch in training"));
    }
    if cfg.checkpoint_every == 0 || cfg.window == 0 {
        return Err(Error::validation(
            "checkpoint cadence and window must be >= 1",
        ));
    }
    let n = data.n;
    let nf = n as f64;
    let mut state = SpanState::new(params, data);
    let r_max_sq = (0..n).map(|i| state.gram[i * n + i]).fold(0.0f64, f64::max);
    let base_lr = cfg.base_lr.unwrap_or(0.5 / r_max_sq);
    if !(base_lr > 0.0 && base_lr.is_finite()) {
        return Err(Error::validation("base learning rate must be positive"));
    }
    let stop_log_risk = (std::f64::consts::LN_2 / nf).ln();

    let mut margins = vec![0.0; n];
    let mut logl = vec![0.0; n];
    let mut coef = vec![0.0; n];
    let mut trace = TrainTrace::default();
    let mut prev_c: Option<(Vec<f64>, f64)> = None; // (coefficients, norm)
    let mut margin_history: Vec<f64> = Vec::new();
    let mut step = 0usize;

    loop {
        state.margins(&mut margins);
        for i in 0..n {
            logl[i] = cfg.loss.log_loss(margins[i]);
        }
        let log_risk = logsumexp(&logl) - nf.ln();
        let reached_risk = log_risk < stop_log_risk;

        let checkpoint_due = step % cfg.checkpoint_every == 0;
        if checkpoint_due {
            let nsq = state.norm_sq_of(&state.c);
            let w_fro = nsq.sqrt();
            let min_margin = margins.iter().cloned().fold(f64::INFINITY, f64::min);
            let min_norm_margin = if w_fro > 0.0 { min_margin / w_fro } else { 0.0 };
            let cosine = prev_c.as_ref().map(|(cprev, nprev)| {
                let ip = state.inner_of(cprev, &state.c);
                ip / (nprev * w_fro)
            });
            trace.entries.push(TraceEntry {
                step,
                risk: log_risk.exp(),
                log_risk,
                min_norm_margin,
                direction_cosine: cosine,
                w_fro_norm: w_fro,
            });
            margin_history.push(min_norm_margin);

            let direction_settled = cosine.map_or(false, |c| c >= 1.0 - cfg.dir_tol);
            let margin_settled = margin_history.len() > cfg.window && {
                let old = margin_history[margin_history.len() - 1 - cfg.window];
                let now = min_norm_margin;
                (now - old).abs() < cfg.margin_tol * now.abs().max(1e-12)
            };
            if reached_risk && direction_settled && margin_settled {
                break;
            }
            prev_c = Some((state.c.clone(), w_fro));
        }

        if step >= cfg.max_steps {
            if reached_risk {
                break; // budget exhausted after reaching the risk threshold
            }
            trace.steps_taken = step;
            return Err(Error::TrainingFailure {
                reason: format!(
                    "risk threshold log(2)/n not reached within {} steps (log risk {log_risk:.3})",
                    cfg.max_steps
                ),
                trace,
            });
        }

        let log_risk_eff = log_risk.max(LOG_RISK_FLOOR);
        for i in 0..n {
            let log_dl = cfg.loss.log_dloss_abs(margins[i]);
            coef[i] = base_lr / nf * (log_dl - log_risk_eff).exp();
        }
        state.step(&coef);
        step += 1;
    }

    trace.steps_taken = step;
    let w = state.materialize(params);
    let trained = NetworkParams::new(w, params.m, params.d, params.a.clone(), params.gamma)?;
    Ok((trained, trace))
}

/// Divide W by the minimum margin so the minimum margin becomes exactly 1
/// (f is 1-homogeneous in W). Errors when the margin is not positive.
pub fn rescale_to_unit_margin(params: &NetworkParams, data: &Dataset) -> Result<NetworkParams> {
    let margins = params.margins(data);
    let min_margin = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_margin > 0.0) {
        return Err(Error::validation(format!(
            "cannot rescale: minimum margin {min_margin} is not positive"
        )));
    }
    let mut w = params.w.clone();
    for v in w.iter_mut() {
        *v /= min_margin;
    }
    NetworkParams::new(w, params.m, params.d, params.a.clone(), params.gamma)
}

/// Certificate that a network is (approximately) a KKT point of the
/// margin-maximization problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    /// Recovered multipliers, one per example, >= 0 by construction.
    pub lambda: Vec<f64>,
    /// ||W - What(lambda)||_F / ||W||_F for the stacked stationarity system.
    pub stationarity_residual: f64,
    /// min_i y_i f(x_i; W) - 1.
    pub feasibility_min: f64,
    /// max_i lambda_i |y_i f(x_i; W) - 1|.
    pub comp_slack_max: f64,
    /// Uniformity ratio of the effective coefficients (1+gamma)/2 * lambda;
    /// None when some multiplier is zero.
    pub tau: Option<f64>,
    /// Preactivations inside the kink band; certification requires zero.
    pub kink_count: usize,
    pub passes: bool,
    /// Tolerances the pass/fail verdict was computed at.
    pub tol_stationarity: f64,
    pub tol_feasibility: f64,
    /// Relative complementary-slackness tolerance (scaled by max lambda).
    pub tol_comp_slack: f64,
}

/// Tolerances for `extract_net_kkt`.
#[derive(Debug, Clone, Copy)]
pub struct CertTolerances {
    pub stationarity: f64,
    pub feasibility: f64,
    pub comp_slack_rel: f64,
}

impl Default for CertTolerances {
    fn default() -> Self {
        CertTolerances {
            stationarity: 1e-3,
            feasibility: 1e-6,
            comp_slack_rel: 2e-2,
        }
    }
}

/// Recover KKT multipliers for a unit-margin network by nonnegative least
/// squares over the stacked per-neuron stationarity equations, using the
/// subgradient selection phi' = 1 above `tol_kink`, gamma below `-tol_kink`,
/// and gamma inside the band (counted; certification requires an empty band).
pub fn extract_net_kkt(
    params: &NetworkParams,
    data: &Dataset,
    tol_kink: f64,
) -> Result<KktCertificate> {
    extract_net_kkt_with(params, data, tol_kink, CertTolerances::default())
}

pub fn extract_net_kkt_with(
    params: &NetworkParams,
    data: &Dataset,
    tol_kink: f64,
    tols: CertTolerances,
) -> Result<KktCertificate> {
    params.validate()?;
    if data.d != params.d {
        return Err(Error::validation("dimension mismatch in KKT extraction"));
    }
    let m = params.m;
    let n = data.n;
    let sqrt_m = (m as f64).sqrt();

    // preactivations and derivative pattern
    let mut pre = vec![0.0; m * n];
    let mut phip = vec![0.0; m * n];
    let mut kink_count = 0usize;
    for j in 0..m {
        let wj = params.row(j);
        for i in 0..n {
            let p = dot(wj, data.row(i));
            pre[j * n + i] = p;
            phip[j * n + i] = if p > tol_kink {
                1.0
            } else {
                if p >= -tol_kink {
                    kink_count += 1;
                }
                params.gamma
            };
        }
    }
    let margins: Vec<f64> = (0..n)
        .map(|i| {
            let mut f = 0.0;
            for j in 0..m {
                f += params.a[j] * params.phi(pre[j * n + i]);
            }
            data.y(i) * f
        })
        .collect();

    // normal equations of the stacked system; column i of the design is the
    // neuron-stacked vector (sigma_j y_i phi'_{i,j} / sqrt(m)) x_i with
    // sigma_j the second-layer sign.
    let gram = data.gram();
    let mut ata = vec![0.0; n * n];
    let mut atb = vec![0.0; n];
    for i in 0..n {
        for i2 in 0..n {
            let mut s = 0.0;
            for j in 0..m {
                s += phip[j * n + i] * phip[j * n + i2];
            }
            ata[i * n + i2] = data.y(i) * data.y(i2) * gram[i * n + i2] * s / m as f64;
        }
        let mut b = 0.0;
        for j in 0..m {
            let sigma = if params.a[j] > 0.0 { 1.0 } else { -1.0 };
            b += sigma * phip[j * n + i] * pre[j * n + i];
        }
        atb[i] = data.y(i) * b / sqrt_m;
    }
    let lambda = nnls_normal(&ata, &atb, n)?;

    // residual computed directly against the materialized stationarity system
    let mut resid_sq = 0.0;
    let mut recon_row = vec![0.0; params.d];
    for j in 0..m {
        let sigma = if params.a[j] > 0.0 { 1.0 } else { -1.0 };
        recon_row.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let c = sigma * lambda[i] * data.y(i) * phip[j * n + i] / sqrt_m;
            if c != 0.0 {
                axpy(&mut recon_row, c, data.row(i));
            }
        }
        for (ww, rr) in params.row(j).iter().zip(&recon_row) {
            resid_sq += (ww - rr) * (ww - rr);
        }
    }
    let w_norm = params.fro_norm();
    let stationarity_residual = if w_norm > 0.0 {
        resid_sq.sqrt() / w_norm
    } else {
        f64::INFINITY
    };

    let feasibility_min = margins.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let comp_slack_max = lambda
        .iter()
        .zip(&margins)
        .map(|(&l, &mg)| l * (mg - 1.0).abs())
        .fold(0.0f64, f64::max);
    let lambda_max = lambda.iter().cloned().fold(0.0f64, f64::max);
    let comp_slack_rel = if lambda_max > 0.0 {
        comp_slack_max / lambda_max
    } else {
        0.0
    };

    let tau = if lambda.iter().all(|&l| l > 0.0) {
        let eff: Vec<f64> = lambda
            .iter()
            .map(|&l| (1.0 + params.gamma) / 2.0 * l)
            .collect();
        Some(uniformity_ratio(&eff)?)
    } else {
        None
    };

    let passes = stationarity_residual <= tols.stationarity
        && feasibility_min >= -tols.feasibility
        && comp_slack_rel <= tols.comp_slack_rel
        && kink_count == 0;

    Ok(KktCertificate {
        lambda,
        stationarity_residual,
        feasibility_min,
        comp_slack_max,
        tau,
        kink_count,
        passes,
        tol_stationarity: tols.stationarity,
        tol_feasibility: tols.feasibility,
        tol_comp_slack: tols.comp_slack_rel,
    })
}

/// Multiplier bounds for KKT points of the leaky network on p-orthogonal
/// data with p >= 3 gamma^{-3}:
/// lambda_i in [(1/R_max^2)(1 - 1/(gamma p R^2 - 1)),
///              1/(R_min^2 gamma (gamma - 1/(p R^2)))].
pub fn lambda_bounds_leaky(
    profile: &OrthogonalityProfile,
    gamma: f64,
    p: f64,
) -> Result<(f64, f64)> {
    check_leaky_hypothesis(gamma, p)?;
    let prs = p * profile.r_sq;
    let lower = (1.0 - 1.0 / (gamma * prs - 1.0)) / profile.r_max_sq;
    let upper = 1.0 / (profile.r_min_sq * gamma * (gamma - 1.0 / prs));
    Ok((lower, upper))
}

/// Uniformity bound for the effective linear direction of a leaky KKT point:
/// tau = (R^2/gamma^2)(1 + 2/(gamma p R^2 - 2)).
pub fn tau_bound_leaky(p: f64, r_sq: f64, gamma: f64) -> Result<f64> {
    check_leaky_hypothesis(gamma, p)?;
    if !(r_sq >= 1.0) {
        return Err(Error::validation("R^2 is a ratio of extremes, so R^2 >= 1"));
    }
    let gprs = gamma * p * r_sq;
    if gprs <= 2.0 {
        return Err(Error::validation(
            "tau bound undefined for gamma p R^2 <= 2",
        ));
    }
    Ok(r_sq / (gamma * gamma) * (1.0 + 2.0 / (gprs - 2.0)))
}

fn check_leaky_hypothesis(gamma: f64, p: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::validation("gamma must lie in (0, 1]"));
    }
    let need = 3.0 * gamma.powi(-3);
    if !(p >= need) {
        return Err(Error::validation(format!(
            "hypothesis violated: p = {p} < 3 gamma^-3 = {need}"
        )));
    }
    Ok(())
}

/// The linear direction sharing the KKT network's decision boundary:
/// z = (1+gamma)/2 * sum_i lambda_i y_i x_i.
pub fn effective_linear_direction(lambda: &[f64], data: &Dataset, gamma: f64) -> Result<Vec<f64>> {
    if lambda.len() != data.n {
        return Err(Error::validation("one multiplier per example required"));
    }
    if lambda.iter().any(|&l| l < 0.0) {
        return Err(Error::validation("multipliers must be nonnegative"));
    }
    let mut z = vec![0.0; data.d];
    for i in 0..data.n {
        axpy(
            &mut z,
            (1.0 + gamma) / 2.0 * lambda[i] * data.y(i),
            data.row(i),
        );
    }
    Ok(z)
}

/// Where boundary probes come from.
#[derive(Debug, Clone)]
pub enum ProbeDist {
    /// Fresh covariates from a generating distribution (labels ignored).
    Spec(DistributionSpec),
    /// Isotropic standard Gaussian probes.
    Isotropic { d: usize },
}

/// Sign-agreement measurement between a network and a linear direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAgreement {
    /// Fraction of kept probes with sign(f(x;W)) = sign(<z,x>).
    pub agreement: f64,
    pub n_kept: usize,
    /// Probes discarded for falling inside the exclusion band.
    pub n_excluded: usize,
}

/// Sample `n_probes` points, drop those with |<z,x>| < epsilon ||z|| ||x||,
/// and report the fraction of survivors where the network's sign matches the
/// linear direction's sign.
pub fn boundary_agreement(
    params: &NetworkParams,
    z: &[f64],
    probes: &ProbeDist,
    n_probes: usize,
    epsilon: f64,
    seed: u64,
) -> Result<BoundaryAgreement> {
    if z.len() != params.d {
        return Err(Error::validation("direction dimension mismatch"));
    }
    let z_norm = norm(z);
    if z_norm == 0.0 {
        return Err(Error::validation("boundary agreement needs z != 0"));
    }
    if n_probes == 0 {
        return Err(Error::validation("need at least one probe"));
    }
    let d = params.d;
    let mut rng = stream_rng(seed, STREAM_PROBES);
    let mut x = vec![0.0; d];
    let mut kept = 0usize;
    let mut agree = 0usize;
    let mut excluded = 0usize;
    for _ in 0..n_probes {
        match probes {
            ProbeDist::Spec(spec) => {
                if spec.dim() != d {
                    return Err(Error::validation("probe spec dimension mismatch"));
                }
                let _ = spec.draw_observed(&mut rng, &mut x);
            }
            ProbeDist::Isotropic { d: pd } => {
                if *pd != d {
                    return Err(Error::validation("probe dimension mismatch"));
                }
                use rand::Rng;
                for v in x.iter_mut() {
                    *v = rng.sample(rand_distr::StandardNormal);
                }
            }
        }
        let lin = dot(z, &x);
        if lin.abs() < epsilon * z_norm * norm(&x) {
            excluded += 1;
            continue;
        }
        kept += 1;
        if sign_pm(lin) == sign_pm(params.forward(&x)) {
            agree += 1;
        }
    }
    let agreement = if kept > 0 {
        agree as f64 / kept as f64
    } else {
        1.0
    };
    Ok(BoundaryAgreement {
        agreement,
        n_kept: kept,
        n_excluded: excluded,
    })
}

/// Checkpoint container for the CLI: parameters plus training trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub params: NetworkParams,
    pub trace: TrainTrace,
}
