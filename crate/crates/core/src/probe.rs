//! Monte-Carlo estimates of the curvature and noise quantities that drive
//! the AVPG schedule and its error floor.
//!
//! These are estimates, not certificates: a sampled minimum of curvature
//! ratios overstates the true restricted strong convexity constant and a
//! sampled maximum understates the smoothness constant.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::glm::{bregman_gap, logistic_curvature, Dataset, GlmFamily, GlmKind};
use crate::linalg::{op_norm, DenseMatrix};
use crate::measure::GroundTruth;
use crate::project::{project, ConstraintSpec};

/// Pairs closer than this in Frobenius norm are skipped.
const MIN_PAIR_DIST: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct RscRsmEstimate {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub eps_alpha_hat: f64,
    pub eps_beta_hat: f64,
    /// Pairs that entered the estimate.
    pub trials: usize,
    pub rank_used: usize,
}

impl RscRsmEstimate {
    pub fn kappa(&self) -> f64 {
        self.beta_hat / self.alpha_hat
    }
}

/// Random rank-`rank` point of `spec`: a Gaussian factor product rescaled to a
/// uniformly drawn fraction of the set's reference size, then projected.
fn random_feasible<R: Rng + ?Sized>(
    d1: usize,
    d2: usize,
    rank: usize,
    spec: &ConstraintSpec,
    rng: &mut R,
) -> Result<DenseMatrix> {
    let left = DenseMatrix::from_fn(d1, rank, |_, _| rng.sample(StandardNormal));
    let right = DenseMatrix::from_fn(rank, d2, |_, _| rng.sample(StandardNormal));
    let mut m = left.matmul(&right);
    let u: f64 = 1.0 - rng.random::<f64>();
    let norm = m.fro_norm();
    if norm > 0.0 {
        m.scale_mut(u * spec.reference_fro(d1, d2, rank) / norm);
    }
    if matches!(spec, ConstraintSpec::RowCenteredInf { .. }) {
        m.center_rows();
    }
    project(&m, rank, spec)
}

/// Sample feasible pairs and record `2 B / ||X - Y||_F^2` for the Bregman gap
/// `B = L(X) - L(Y) - <grad L(Y), X - Y>`.
///
/// The slacks are the smallest `eps_alpha`, `eps_beta` for which every sampled
/// pair satisfies the two relaxed inequalities at `alpha = 1.01 alpha_hat`
/// and `beta = 0.99 beta_hat`.
pub fn empirical_rsc_rsm<R: Rng + ?Sized>(
    dataset: &Dataset,
    spec: &ConstraintSpec,
    rank: usize,
    trials: usize,
    rng: &mut R,
) -> Result<RscRsmEstimate> {
    spec.validate()?;
    if trials < 10 {
        return invalid(format!("need at least 10 trials, got {trials}"));
    }
    let (d1, d2) = dataset.dims();
    if rank == 0 || rank > d1.min(d2) {
        return invalid(format!("probe rank {rank} invalid for {d1}x{d2}"));
    }
    // (gap, squared distance) per accepted pair
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials {
        let x = random_feasible(d1, d2, rank, spec, rng)?;
        let y = random_feasible(d1, d2, rank, spec, rng)?;
        let dist2 = (&x - &y).fro_norm().powi(2);
        if dist2.sqrt() < MIN_PAIR_DIST {
            continue;
        }
        samples.push((bregman_gap(dataset, &x, &y)?, dist2));
    }
    if samples.is_empty() {
        return invalid("every sampled pair was degenerate");
    }
    let ratios = samples.iter().map(|&(b, d)| 2.0 * b / d);
    let alpha_hat = ratios.clone().fold(f64::INFINITY, f64::min);
    let beta_hat = ratios.fold(f64::NEG_INFINITY, f64::max);
    let (alpha, beta) = (1.01 * alpha_hat, 0.99 * beta_hat);
    let mut eps_alpha_hat: f64 = 0.0;
    let mut eps_beta_hat: f64 = 0.0;
    for &(b, d) in &samples {
        eps_alpha_hat = eps_alpha_hat.max(0.5 * alpha * d - b);
        eps_beta_hat = eps_beta_hat.max(b - 0.5 * beta * d);
    }
    Ok(RscRsmEstimate {
        alpha_hat,
        beta_hat,
        eps_alpha_hat,
        eps_beta_hat,
        trials: samples.len(),
        rank_used: rank,
    })
}

/// `||grad L(X_truth)||_op`
pub fn grad_norm_at_truth(dataset: &Dataset, truth: &GroundTruth) -> Result<f64> {
    op_norm(&crate::glm::grad(dataset, &truth.x)?, 1e-12)
}

/// Error floor below which geometric decrease is not guaranteed:
///
/// `(4k/a)(r t0 + r_true) e^2 + e sqrt(8 t0 r ea / a) + e sqrt(64 t0 r k eb / a)
///  + 2k ea + 2 eb`
///
/// with `a = alpha_hat`, `k = beta_hat / alpha_hat`, `e = eps_grad` and the
/// probed slacks `ea`, `eb`.
pub fn statistical_floor(
    est: &RscRsmEstimate,
    eps_grad: f64,
    r: usize,
    t0: usize,
    true_rank: usize,
) -> Result<f64> {
    let alpha = est.alpha_hat;
    if !(alpha > 0.0) {
        return invalid(format!("alpha_hat = {alpha} must be positive"));
    }
    if !(eps_grad >= 0.0) {
        return invalid("gradient norm must be nonnegative");
    }
    let kappa = est.beta_hat / alpha;
    let (ea, eb) = (est.eps_alpha_hat, est.eps_beta_hat);
    let rt0 = (r * t0) as f64;
    Ok(4.0 * kappa / alpha * (rt0 + true_rank as f64) * eps_grad * eps_grad
        + eps_grad * (8.0 * rt0 * ea / alpha).sqrt()
        + eps_grad * (64.0 * rt0 * kappa * eb / alpha).sqrt()
        + 2.0 * kappa * ea
        + 2.0 * eb)
}

/// Population curvature ratio of one-bit completion,
/// `sum_ij psi''(sqrt(d1 d2) X_ij) D_ij^2 / ||D||_F^2`.
pub fn onebit_mc_population_hessian_ratio(x: &DenseMatrix, d: &DenseMatrix) -> Result<f64> {
    if x.shape() != d.shape() {
        return invalid("X and D must have the same shape");
    }
    let d2 = d.dot(d);
    if d2 == 0.0 {
        return invalid("direction D must be nonzero");
    }
    let scale = ((x.rows() * x.cols()) as f64).sqrt();
    let num: f64 = x
        .as_slice()
        .iter()
        .zip(d.as_slice())
        .map(|(&xv, &dv)| logistic_curvature(scale * xv) * dv * dv)
        .sum();
    Ok(num / d2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureBounds {
    pub b_lower: f64,
    pub b_upper: f64,
}

impl CurvatureBounds {
    /// `1.1 * b_upper / b_lower`
    pub fn kappa(&self) -> f64 {
        1.1 * self.b_upper / self.b_lower
    }
}

/// Range of `psi''` over `[-theta_max, theta_max]`.
pub fn glm_curvature_bounds(family: &GlmFamily, theta_max: f64) -> Result<CurvatureBounds> {
    if !(theta_max >= 0.0) {
        return invalid(format!("theta_max = {theta_max} must be nonnegative"));
    }
    Ok(match family.kind() {
        GlmKind::Quadratic => CurvatureBounds {
            b_lower: 1.0,
            b_upper: 1.0,
        },
        // psi'' is even and decreasing in |t|.
        GlmKind::Logistic => CurvatureBounds {
            b_lower: logistic_curvature(theta_max),
            b_upper: 0.25,
        },
    })
}
