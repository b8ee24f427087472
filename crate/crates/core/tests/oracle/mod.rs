//! Reference implementations used only by the tests. Nothing here calls into
//! the routines under test except the `DenseMatrix` container and `loss`
//! (for finite differences).

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use rglm::DenseMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn random_rank(rows: usize, cols: usize, r: usize, rng: &mut impl Rng) -> DenseMatrix {
    let a = gaussian(rows, r, rng);
    let b = gaussian(r, cols, rng);
    a.matmul(&b)
}

/// One-sided Jacobi SVD. Returns `(U, sigma, V)` with `U` `m x k`, `V` `n x k`,
/// `k = min(m, n)`, singular values sorted nonincreasing.
pub fn jacobi_svd(x: &DenseMatrix) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
    let transposed = x.rows() < x.cols();
    let a = if transposed { x.transpose() } else { x.clone() };
    let (m, n) = a.shape();
    // columns of A and V
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(a, b)| a * b).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (ap, aq) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * ap - s * aq;
                    cols[q][i] = s * ap + c * aq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[p][i], v[q][i]);
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut triples: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..n)
        .map(|j| {
            let s = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            let u = if s > 0.0 {
                cols[j].iter().map(|x| x / s).collect()
            } else {
                vec![0.0; m]
            };
            (s, u, v[j].clone())
        })
        .collect();
    triples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let sig = triples.iter().map(|t| t.0).collect();
    let us = triples.iter().map(|t| t.1.clone()).collect();
    let vs = triples.iter().map(|t| t.2.clone()).collect();
    if transposed {
        (vs, sig, us)
    } else {
        (us, sig, vs)
    }
}

pub fn jacobi_singvals(x: &DenseMatrix) -> Vec<f64> {
    jacobi_svd(x).1
}

/// `sum_{i < r} a_i u_i v_i^T` from oracle singular vectors.
pub fn assemble(u: &[Vec<f64>], a: &[f64], v: &[Vec<f64>]) -> DenseMatrix {
    let (m, n) = (u[0].len(), v[0].len());
    DenseMatrix::from_fn(m, n, |i, j| {
        a.iter().enumerate().map(|(k, ak)| ak * u[k][i] * v[k][j]).sum()
    })
}

/// Threshold `tau` with `sum (s_i - tau)_+ = xi`, found by bisection.
pub fn l1_threshold_bisect(sigma: &[f64], xi: f64) -> f64 {
    let f = |tau: f64| sigma.iter().map(|s| (s - tau).max(0.0)).sum::<f64>() - xi;
    let (mut lo, mut hi) = (0.0, sigma.iter().cloned().fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn l1_project_bisect(sigma: &[f64], xi: f64) -> Vec<f64> {
    if sigma.iter().sum::<f64>() <= xi {
        return sigma.to_vec();
    }
    let tau = l1_threshold_bisect(sigma, xi);
    sigma.iter().map(|s| (s - tau).max(0.0)).collect()
}

/// Central difference of `f` at `0` along a scalar parameter.
pub fn central_diff(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

pub fn second_diff(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h)
}
