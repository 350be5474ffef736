//! Small dense linear-algebra helpers: dot products, Cholesky solves on
//! desk-scale systems, and nonnegative least squares on normal equations.

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| x * c).collect()
}

pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Solve `A x = b` for symmetric positive definite `A` (row-major n*n)
/// via Cholesky. Returns None if a pivot falls below `tol * max_diag`,
/// i.e. the matrix is numerically singular.
pub fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(0.0f64, f64::max);
    if max_diag == 0.0 {
        return None;
    }
    let tol = 1e-13 * max_diag;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= tol {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    // forward substitution L y = b
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    // back substitution L^T x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Nonnegative least squares `min ||A x - b||, x >= 0` given the normal
/// equations `ata = A^T A` and `atb = A^T b` (Bro & De Jong's fast NNLS).
///
/// Works on the Gram form so callers can avoid materializing tall design
/// matrices; the residual norm is left to the caller, who usually has a
/// cheaper route to it.
pub fn nnls_normal(ata: &[f64], atb: &[f64], n: usize) -> Result<Vec<f64>> {
    debug_assert_eq!(ata.len(), n * n);
    debug_assert_eq!(atb.len(), n);
    let scale = atb
        .iter()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let tol = 1e-12 * scale;

    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    // w = atb - ata * x; starts at atb since x = 0.
    let mut w = atb.to_vec();

    let max_outer = 8 * n + 32;
    for _ in 0..max_outer {
        let candidate = (0..n)
            .filter(|&i| !passive[i])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(imax) = candidate else { break };
        if w[imax] <= tol {
            break;
        }
        passive[imax] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let k = idx.len();
            let mut sub = vec![0.0; k * k];
            let mut rhs = vec![0.0; k];
            for (r, &i) in idx.iter().enumerate() {
                rhs[r] = atb[i];
                for (c, &j) in idx.iter().enumerate() {
                    sub[r * k + c] = ata[i * n + j];
                }
            }
            let s = cholesky_solve(&sub, &rhs, k)
                .ok_or_else(|| Error::Numerical("nnls: singular passive-set system".into()))?;
            if s.iter().all(|&v| v > 0.0) {
                for (r, &i) in idx.iter().enumerate() {
                    x[i] = s[r];
                }
                break;
            }
            // Step toward s until the first passive variable hits zero.
            let mut alpha = f64::INFINITY;
            for (r, &i) in idx.iter().enumerate() {
                if s[r] <= 0.0 {
                    let a = x[i] / (x[i] - s[r]);
                    if a < alpha {
                        alpha = a;
                    }
                }
            }
            for (r, &i) in idx.iter().enumerate() {
                x[i] += alpha * (s[r] - x[i]);
            }
            for &i in &idx {
                if x[i] <= tol.max(1e-300) {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }

        for i in 0..n {
            let mut v = atb[i];
            for j in 0..n {
                if x[j] != 0.0 {
                    v -= ata[i * n + j] * x[j];
                }
            }
            w[i] = v;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        // A = [[4,2],[2,3]], b = [2,5] -> x = [-1/2, 2]
        let a = [4.0, 2.0, 2.0, 3.0];
        let b = [2.0, 5.0];
        let x = cholesky_solve(&a, &b, 2).unwrap();
        assert!((x[0] + 0.5).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(cholesky_solve(&a, &[1.0, 1.0], 2).is_none());
    }

    #[test]
    fn nnls_clips_negative_component() {
        // Unconstrained solution of min ||Ax-b|| with A=I is b; with b_1 < 0
        // the constrained solution zeroes it out.
        let ata = [1.0, 0.0, 0.0, 1.0];
        let atb = [-2.0, 3.0];
        let x = nnls_normal(&ata, &atb, 2).unwrap();
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn nnls_matches_active_set_enumeration() {
        // Independent oracle: enumerate all sign-support subsets and pick the
        // best feasible KKT candidate.
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _case in 0..50 {
            let m = 6;
            let n = 4;
            let a: Vec<f64> = (0..m * n).map(|_| next()).collect();
            let b: Vec<f64> = (0..m).map(|_| next()).collect();
            let mut ata = vec![0.0; n * n];
            let mut atb = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    ata[i * n + j] = (0..m).map(|r| a[r * n + i] * a[r * n + j]).sum();
                }
                atb[i] = (0..m).map(|r| a[r * n + i] * b[r]).sum();
            }
            let x = nnls_normal(&ata, &atb, n).unwrap();
            let obj = |x: &[f64]| {
                let mut v = 0.0;
                for r in 0..m {
                    let pred: f64 = (0..n).map(|c| a[r * n + c] * x[c]).sum();
                    v += (pred - b[r]).powi(2);
                }
                v
            };
            let mut best = f64::INFINITY;
            for mask in 0..(1u32 << n) {
                let idx: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                let k = idx.len();
                if k == 0 {
                    best = best.min(obj(&vec![0.0; n]));
                    continue;
                }
                let mut sub = vec![0.0; k * k];
                let mut rhs = vec![0.0; k];
                for (r, &i) in idx.iter().enumerate() {
                    rhs[r] = atb[i];
                    for (c, &j) in idx.iter().enumerate() {
                        sub[r * k + c] = ata[i * n + j];
                    }
                }
                if let Some(s) = cholesky_solve(&sub, &rhs, k) {
                    if s.iter().all(|&v| v >= 0.0) {
                        let mut cand = vec![0.0; n];
                        for (r, &i) in idx.iter().enumerate() {
                            cand[i] = s[r];
                        }
                        best = best.min(obj(&cand));
                    }
                }
            }
            assert!(
                obj(&x) <= best + 1e-9 * (1.0 + best),
                "nnls objective {} worse than enumerated {}",
                obj(&x),
                best
            );
        }
    }
}
