//! Statistical helpers: normal quantiles, Wilson score intervals, and
//! log-space utilities used by the trainers.

/// Inverse standard normal CDF (Acklam's rational approximation,
/// relative error below 1.2e-9 over (0,1)).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level must lie in (0,1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -inverse_normal_cdf(1.0 - p)
    }
}

/// Two-sided Wilson score interval for `successes` out of `trials` at
/// confidence `level` (e.g. 0.99). Returns `(low, high)`.
pub fn wilson_interval(successes: u64, trials: u64, level: f64) -> (f64, f64) {
    assert!(trials > 0, "wilson interval needs at least one trial");
    assert!(level > 0.0 && level < 1.0);
    let n = trials as f64;
    let p_hat = successes as f64 / n;
    let z = inverse_normal_cdf(0.5 + level / 2.0);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p_hat + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// log(1 + exp(x)) without overflow.
pub fn log1pexp(x: f64) -> f64 {
    if x > 33.0 {
        x
    } else if x < -33.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Natural log of the logistic loss log(1 + exp(-q)).
pub fn log_logistic_loss(q: f64) -> f64 {
    if q > 33.0 {
        // loss ~ exp(-q), so log loss ~ -q up to a relative error below 1e-14
        -q
    } else if q < -33.0 {
        // loss ~ -q + exp(q); the correction is below machine precision of ln(-q)
        (-q).ln()
    } else {
        log1pexp(-q).ln()
    }
}

/// Natural log of |d/dq log(1+exp(-q))| = log sigmoid(-q).
pub fn log_logistic_dloss_abs(q: f64) -> f64 {
    -log1pexp(q)
}

/// Log-sum-exp of a slice; returns -inf on empty input.
pub fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_quantiles_match_tables() {
        assert!((inverse_normal_cdf(0.975) - 1.959963984540054).abs() < 1e-7);
        assert!((inverse_normal_cdf(0.995) - 2.5758293035489004).abs() < 1e-7);
        assert!((inverse_normal_cdf(0.9995) - 3.2905267314919255).abs() < 1e-6);
        assert!((inverse_normal_cdf(0.5)).abs() < 1e-9);
        assert!((inverse_normal_cdf(0.025) + inverse_normal_cdf(0.975)).abs() < 1e-9);
    }

    #[test]
    fn wilson_brackets_point_estimate() {
        let (lo, hi) = wilson_interval(10, 100, 0.95);
        assert!(lo < 0.1 && 0.1 < hi);
        assert!(lo > 0.0 && hi < 1.0);
        let (lo0, hi0) = wilson_interval(0, 50, 0.99);
        assert_eq!(lo0, 0.0);
        assert!(hi0 > 0.0 && hi0 < 0.25);
    }

    #[test]
    fn log_loss_helpers_are_stable() {
        assert!((log_logistic_loss(0.0) - (2f64).ln().ln()).abs() < 1e-12);
        // large-margin regime: log loss ~ -q
        assert!((log_logistic_loss(800.0) + 800.0).abs() < 1e-9);
        // badly violated margin: loss ~ -q
        assert!((log_logistic_loss(-700.0) - 700f64.ln()).abs() < 1e-6);
        assert!((log_logistic_dloss_abs(0.0) + (2f64).ln()).abs() < 1e-12);
        let v = [0.0, (2f64).ln()];
        assert!((logsumexp(&v) - (3f64).ln()).abs() < 1e-12);
    }
}
