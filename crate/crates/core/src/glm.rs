//! Exponential-family links and the empirical negative log-likelihood
//! `L(X) = (1/n) sum_i [psi(<A_i, X>) - y_i <A_i, X>]`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::linalg::DenseMatrix;
use crate::measure::MeasurementOp;

/// Beyond this magnitude the logistic link switches to its asymptotic forms.
const LOGISTIC_SWITCH: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GlmKind {
    /// `psi(t) = t^2 / 2`, Gaussian responses.
    Quadratic,
    /// `psi(t) = log(1 + e^t)`, Bernoulli responses.
    Logistic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlmFamily {
    kind: GlmKind,
    noise_scale: f64,
}

impl GlmFamily {
    /// Gaussian family with noise variance `sigma2`. Zero gives noiseless responses.
    pub fn quadratic(sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return invalid(format!("noise variance must be finite and >= 0, got {sigma2}"));
        }
        Ok(Self {
            kind: GlmKind::Quadratic,
            noise_scale: sigma2,
        })
    }

    pub fn logistic() -> Self {
        Self {
            kind: GlmKind::Logistic,
            noise_scale: 1.0,
        }
    }

    pub fn kind(&self) -> GlmKind {
        self.kind
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    #[inline]
    pub fn psi(&self, t: f64) -> f64 {
        match self.kind {
            GlmKind::Quadratic => 0.5 * t * t,
            GlmKind::Logistic => {
                if t > LOGISTIC_SWITCH {
                    t + (-t).exp()
                } else if t < -LOGISTIC_SWITCH {
                    t.exp()
                } else {
                    t.exp().ln_1p()
                }
            }
        }
    }

    #[inline]
    pub fn psi_prime(&self, t: f64) -> f64 {
        match self.kind {
            GlmKind::Quadratic => t,
            GlmKind::Logistic => sigmoid(t),
        }
    }

    #[inline]
    pub fn psi_second(&self, t: f64) -> f64 {
        match self.kind {
            GlmKind::Quadratic => 1.0,
            GlmKind::Logistic => logistic_curvature(t),
        }
    }
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `e^t / (1 + e^t)^2`, written in terms of `e^{-|t|}` so it never overflows.
#[inline]
pub fn logistic_curvature(t: f64) -> f64 {
    let e = (-t.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiEval {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

pub fn psi_eval(family: &GlmFamily, theta: f64) -> Result<PsiEval> {
    if !theta.is_finite() {
        return invalid(format!("natural parameter {theta} is not finite"));
    }
    Ok(PsiEval {
        value: family.psi(theta),
        first: family.psi_prime(theta),
        second: family.psi_second(theta),
    })
}

/// Draw a response with natural parameter `theta`.
///
/// Quadratic draws one standard normal even when the variance is zero so that
/// the generator stream does not depend on the noise level.
pub fn sample_response<R: Rng + ?Sized>(family: &GlmFamily, theta: f64, rng: &mut R) -> f64 {
    match family.kind {
        GlmKind::Quadratic => {
            let z: f64 = rng.sample(StandardNormal);
            theta + family.noise_scale.sqrt() * z
        }
        GlmKind::Logistic => {
            let u: f64 = rng.random();
            if u < sigmoid(theta) {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// `n` measurements with their responses and the normalising sample size.
#[derive(Clone, Debug)]
pub struct Dataset {
    d1: usize,
    d2: usize,
    ops: Vec<MeasurementOp>,
    responses: Vec<f64>,
    family: GlmFamily,
    effective_n: f64,
}

impl Dataset {
    pub fn new(
        d1: usize,
        d2: usize,
        ops: Vec<MeasurementOp>,
        responses: Vec<f64>,
        family: GlmFamily,
        effective_n: f64,
    ) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return invalid("dataset dimensions must be positive");
        }
        if ops.is_empty() {
            return invalid("dataset needs at least one measurement");
        }
        if ops.len() != responses.len() {
            return invalid(format!(
                "{} measurements but {} responses",
                ops.len(),
                responses.len()
            ));
        }
        if !(effective_n > 0.0) || !effective_n.is_finite() {
            return invalid(format!("effective sample size {effective_n} must be positive"));
        }
        for op in &ops {
            op.validate(d1, d2)?;
        }
        if let Some(y) = responses.iter().find(|y| !y.is_finite()) {
            return invalid(format!("non-finite response {y}"));
        }
        if family.kind == GlmKind::Logistic {
            if let Some(y) = responses.iter().find(|&&y| y != 0.0 && y != 1.0) {
                return invalid(format!("logistic response {y} is not 0 or 1"));
            }
        }
        Ok(Self {
            d1,
            d2,
            ops,
            responses,
            family,
            effective_n,
        })
    }

    /// Effective sample size equal to the number of measurements.
    pub fn counted(
        d1: usize,
        d2: usize,
        ops: Vec<MeasurementOp>,
        responses: Vec<f64>,
        family: GlmFamily,
    ) -> Result<Self> {
        let n = ops.len() as f64;
        Self::new(d1, d2, ops, responses, family, n)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[MeasurementOp] {
        &self.ops
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn family(&self) -> GlmFamily {
        self.family
    }

    pub fn effective_n(&self) -> f64 {
        self.effective_n
    }

    /// Same measurements and responses under a different link. The responses
    /// must be valid for the new family.
    pub fn with_family(&self, family: GlmFamily) -> Result<Self> {
        Self::new(
            self.d1,
            self.d2,
            self.ops.clone(),
            self.responses.clone(),
            family,
            self.effective_n,
        )
    }

    fn check(&self, x: &DenseMatrix) -> Result<()> {
        if x.shape() != (self.d1, self.d2) {
            return invalid(format!(
                "matrix is {}x{} but the dataset expects {}x{}",
                x.rows(),
                x.cols(),
                self.d1,
                self.d2
            ));
        }
        Ok(())
    }

    /// Natural parameters `<A_i, X>` for every measurement.
    pub fn thetas(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.ops.iter().map(|op| op.inner(x)).collect())
    }
}

pub fn loss(dataset: &Dataset, x: &DenseMatrix) -> Result<f64> {
    let thetas = dataset.thetas(x)?;
    Ok(loss_from_thetas(dataset, &thetas))
}

fn loss_from_thetas(dataset: &Dataset, thetas: &[f64]) -> f64 {
    let f = dataset.family;
    let sum: f64 = thetas
        .iter()
        .zip(&dataset.responses)
        .map(|(&t, &y)| f.psi(t) - y * t)
        .sum();
    sum / dataset.effective_n
}

fn grad_from_thetas(dataset: &Dataset, thetas: &[f64]) -> DenseMatrix {
    let f = dataset.family;
    let mut g = DenseMatrix::zeros(dataset.d1, dataset.d2);
    let inv_n = 1.0 / dataset.effective_n;
    for ((op, &t), &y) in dataset.ops.iter().zip(thetas).zip(&dataset.responses) {
        let w = (f.psi_prime(t) - y) * inv_n;
        if w != 0.0 {
            op.accumulate_into(w, &mut g);
        }
    }
    g
}

/// `(1/n) sum_i (psi'(<A_i, X>) - y_i) A_i`
pub fn grad(dataset: &Dataset, x: &DenseMatrix) -> Result<DenseMatrix> {
    let thetas = dataset.thetas(x)?;
    Ok(grad_from_thetas(dataset, &thetas))
}

/// Loss and gradient sharing one pass over the natural parameters.
pub fn loss_and_grad(dataset: &Dataset, x: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    let thetas = dataset.thetas(x)?;
    Ok((
        loss_from_thetas(dataset, &thetas),
        grad_from_thetas(dataset, &thetas),
    ))
}

/// Second directional derivative `(1/n) sum_i psi''(<A_i, X>) <D, A_i>^2`.
pub fn hessian_quadform(dataset: &Dataset, x: &DenseMatrix, d: &DenseMatrix) -> Result<f64> {
    let thetas = dataset.thetas(x)?;
    dataset.check(d)?;
    let f = dataset.family;
    let sum: f64 = dataset
        .ops
        .iter()
        .zip(&thetas)
        .map(|(op, &t)| {
            let a = op.inner(d);
            f.psi_second(t) * a * a
        })
        .sum();
    Ok(sum / dataset.effective_n)
}

/// Bregman gap `L(X) - L(Y) - <grad L(Y), X - Y>`.
pub fn bregman_gap(dataset: &Dataset, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    let lx = loss(dataset, x)?;
    let (ly, gy) = loss_and_grad(dataset, y)?;
    Ok(lx - ly - gy.dot(&(x - y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn logistic_at_zero() {
        let e = psi_eval(&GlmFamily::logistic(), 0.0).unwrap();
        assert!((e.value - 2f64.ln()).abs() < 1e-15);
        assert_eq!(e.first, 0.5);
        assert_eq!(e.second, 0.25);
    }

    #[test]
    fn quadratic_at_two() {
        let e = psi_eval(&GlmFamily::quadratic(1.0).unwrap(), 2.0).unwrap();
        assert_eq!((e.value, e.first, e.second), (2.0, 2.0, 1.0));
    }

    #[test]
    fn logistic_curvature_at_five() {
        // e^5 / (1 + e^5)^2 evaluated independently in 50-digit arithmetic.
        let want = 0.006648056670790155;
        let got = psi_eval(&GlmFamily::logistic(), 5.0).unwrap().second;
        assert!((got - want).abs() < 1e-15, "{got}");
    }

    #[test]
    fn logistic_is_overflow_safe() {
        let f = GlmFamily::logistic();
        for t in [-1e4, -800.0, -31.0, 31.0, 800.0, 1e4] {
            let e = psi_eval(&f, t).unwrap();
            assert!(e.value.is_finite() && e.first.is_finite() && e.second.is_finite());
            assert!(e.second >= 0.0 && e.second <= 0.25);
        }
        let e = psi_eval(&f, 800.0).unwrap();
        assert_eq!(e.value, 800.0);
        assert_eq!(e.first, 1.0);
        // Continuity across the switchover.
        let lo = f.psi(30.0);
        let hi = f.psi(30.0 + 1e-9);
        assert!((hi - lo).abs() < 2e-9);
        assert!(psi_eval(&f, f64::NAN).is_err());
        assert!(psi_eval(&f, f64::INFINITY).is_err());
    }

    #[test]
    fn saturated_and_noiseless_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = GlmFamily::logistic();
        assert!((0..1000).all(|_| sample_response(&f, 100.0, &mut rng) == 1.0));
        let q = GlmFamily::quadratic(0.0).unwrap();
        assert_eq!(sample_response(&q, 1.25, &mut rng), 1.25);
    }

    #[test]
    fn logistic_mean_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = GlmFamily::logistic();
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_response(&f, 0.0, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.002, "{mean}");
    }

    #[test]
    fn family_validation() {
        assert!(GlmFamily::quadratic(-1.0).is_err());
        assert!(GlmFamily::quadratic(f64::NAN).is_err());
        assert_eq!(GlmFamily::logistic().noise_scale(), 1.0);
    }

    fn single(family: GlmFamily, a: DenseMatrix, y: f64) -> Dataset {
        let (d1, d2) = a.shape();
        Dataset::counted(d1, d2, vec![MeasurementOp::Dense { a }], vec![y], family).unwrap()
    }

    #[test]
    fn loss_single_quadratic() {
        let a = DenseMatrix::from_diag(2, 2, &[1.0, 1.0]);
        let ds = single(GlmFamily::quadratic(1.0).unwrap(), a, 2.0);
        let x = DenseMatrix::from_diag(2, 2, &[1.0, 1.0]);
        assert_eq!(loss(&ds, &x).unwrap(), -2.0);
    }

    #[test]
    fn loss_at_zero_logistic() {
        let a = DenseMatrix::from_rows(&[&[0.3, -1.0], &[2.0, 0.5]]).unwrap();
        let ds = single(GlmFamily::logistic(), a, 1.0);
        let l = loss(&ds, &DenseMatrix::zeros(2, 2)).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn grad_logistic_at_zero() {
        let a = DenseMatrix::from_rows(&[&[0.3, -1.0], &[2.0, 0.5]]).unwrap();
        let ds = single(GlmFamily::logistic(), a.clone(), 0.0);
        let g = grad(&ds, &DenseMatrix::zeros(2, 2)).unwrap();
        assert!((&g - &a.scaled(0.5)).fro_norm() < 1e-15);
    }

    #[test]
    fn hessian_of_zero_direction() {
        let a = DenseMatrix::from_rows(&[&[0.3, -1.0], &[2.0, 0.5]]).unwrap();
        let ds = single(GlmFamily::logistic(), a, 1.0);
        let x = DenseMatrix::identity(2);
        assert_eq!(
            hessian_quadform(&ds, &x, &DenseMatrix::zeros(2, 2)).unwrap(),
            0.0
        );
    }

    #[test]
    fn dataset_validation() {
        let a = DenseMatrix::identity(2);
        let op = MeasurementOp::Dense { a };
        let f = GlmFamily::logistic();
        assert!(Dataset::counted(2, 2, vec![op.clone()], vec![0.5], f).is_err());
        assert!(Dataset::counted(2, 2, vec![op.clone()], vec![], f).is_err());
        assert!(Dataset::counted(2, 2, vec![], vec![], f).is_err());
        assert!(Dataset::new(2, 2, vec![op.clone()], vec![1.0], f, 0.0).is_err());
        assert!(Dataset::counted(3, 2, vec![op.clone()], vec![1.0], f).is_err());
        let ds = Dataset::counted(2, 2, vec![op], vec![1.0], f).unwrap();
        assert!(loss(&ds, &DenseMatrix::zeros(3, 2)).is_err());
        assert!(grad(&ds, &DenseMatrix::zeros(2, 3)).is_err());
    }
}
