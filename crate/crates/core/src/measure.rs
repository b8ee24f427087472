//! Measurement operators, ground-truth generation and dataset simulation.
//!
//! Structured operators (entrywise, pairwise, masked) are stored as indices
//! and a scale; `<A, X>` and gradient accumulation touch only the referenced
//! cells.

use rand::Rng;
use rand_distr::{StandardNormal, Uniform};

use crate::error::{invalid, Result};
use crate::glm::{sample_response, Dataset, GlmFamily};
use crate::linalg::{numerical_rank, DenseMatrix, RANK_TOL};

#[derive(Clone, Debug, PartialEq)]
pub enum MeasurementOp {
    Dense { a: DenseMatrix },
    /// `scale * e_k e_l^T`
    Entry { k: usize, l: usize, scale: f64 },
    /// `scale * e_k (e_l - e_j)^T`
    Pair { k: usize, l: usize, j: usize, scale: f64 },
    /// A single observed cell of a Bernoulli mask, normally with unit scale.
    MaskedEntry { k: usize, l: usize, scale: f64 },
}

impl MeasurementOp {
    pub fn validate(&self, d1: usize, d2: usize) -> Result<()> {
        let in_range = |k: usize, l: usize| k < d1 && l < d2;
        let ok = match *self {
            MeasurementOp::Dense { ref a } => {
                if a.shape() != (d1, d2) {
                    return invalid(format!(
                        "dense operator is {}x{}, expected {d1}x{d2}",
                        a.rows(),
                        a.cols()
                    ));
                }
                true
            }
            MeasurementOp::Entry { k, l, scale } | MeasurementOp::MaskedEntry { k, l, scale } => {
                if !(scale > 0.0) || !scale.is_finite() {
                    return invalid(format!("operator scale {scale} must be positive"));
                }
                in_range(k, l)
            }
            MeasurementOp::Pair { k, l, j, scale } => {
                if !(scale > 0.0) || !scale.is_finite() {
                    return invalid(format!("operator scale {scale} must be positive"));
                }
                in_range(k, l) && j < d2
            }
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("operator indices out of range for {d1}x{d2}: {self:?}"))
        }
    }

    /// `<A, X>`
    #[inline]
    pub fn inner(&self, x: &DenseMatrix) -> f64 {
        match *self {
            MeasurementOp::Dense { ref a } => a.dot(x),
            MeasurementOp::Entry { k, l, scale } | MeasurementOp::MaskedEntry { k, l, scale } => {
                scale * x.get(k, l)
            }
            MeasurementOp::Pair { k, l, j, scale } => scale * (x.get(k, l) - x.get(k, j)),
        }
    }

    /// `G += w * A`
    #[inline]
    pub fn accumulate_into(&self, w: f64, g: &mut DenseMatrix) {
        match *self {
            MeasurementOp::Dense { ref a } => g.axpy(w, a),
            MeasurementOp::Entry { k, l, scale } | MeasurementOp::MaskedEntry { k, l, scale } => {
                g.add_at(k, l, w * scale)
            }
            MeasurementOp::Pair { k, l, j, scale } => {
                g.add_at(k, l, w * scale);
                g.add_at(k, j, -w * scale);
            }
        }
    }

    pub fn to_dense(&self, d1: usize, d2: usize) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(d1, d2);
        self.accumulate_into(1.0, &mut m);
        m
    }
}

/// `sqrt(d1 d2)`, the scale that makes uniform entrywise sampling isotropic.
pub fn standard_scale(d1: usize, d2: usize) -> f64 {
    ((d1 * d2) as f64).sqrt()
}

pub fn gen_gaussian_ops<R: Rng + ?Sized>(
    d1: usize,
    d2: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<MeasurementOp>> {
    check_shape(d1, d2, n)?;
    Ok((0..n)
        .map(|_| MeasurementOp::Dense {
            a: DenseMatrix::from_fn(d1, d2, |_, _| rng.sample(StandardNormal)),
        })
        .collect())
}

pub fn gen_entrywise_ops<R: Rng + ?Sized>(
    d1: usize,
    d2: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<MeasurementOp>> {
    check_shape(d1, d2, n)?;
    let scale = standard_scale(d1, d2);
    Ok((0..n)
        .map(|_| MeasurementOp::Entry {
            k: rng.random_range(0..d1),
            l: rng.random_range(0..d2),
            scale,
        })
        .collect())
}

/// Row uniform on `[d1]`, column pair uniform on `[d2]^2` (ties allowed).
pub fn gen_pairwise_ops<R: Rng + ?Sized>(
    d1: usize,
    d2: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<MeasurementOp>> {
    check_shape(d1, d2, n)?;
    let scale = standard_scale(d1, d2);
    Ok((0..n)
        .map(|_| MeasurementOp::Pair {
            k: rng.random_range(0..d1),
            l: rng.random_range(0..d2),
            j: rng.random_range(0..d2),
            scale,
        })
        .collect())
}

/// One `Entry` operator per cell with the standard scale, in row-major order.
pub fn full_entrywise_ops(d1: usize, d2: usize) -> Vec<MeasurementOp> {
    let scale = standard_scale(d1, d2);
    (0..d1)
        .flat_map(|k| (0..d2).map(move |l| MeasurementOp::Entry { k, l, scale }))
        .collect()
}

fn check_shape(d1: usize, d2: usize, n: usize) -> Result<()> {
    if d1 == 0 || d2 == 0 || n == 0 {
        return invalid(format!("need positive d1, d2, n; got {d1}, {d2}, {n}"));
    }
    Ok(())
}

/// Draw a response for each operator from `family` at `x_true`.
pub fn simulate_dataset<R: Rng + ?Sized>(
    x_true: &DenseMatrix,
    ops: Vec<MeasurementOp>,
    family: GlmFamily,
    rng: &mut R,
) -> Result<Dataset> {
    let (d1, d2) = x_true.shape();
    for op in &ops {
        op.validate(d1, d2)?;
    }
    let responses = ops
        .iter()
        .map(|op| sample_response(&family, op.inner(x_true), rng))
        .collect();
    Dataset::counted(d1, d2, ops, responses, family)
}

/// Observe each cell independently with probability `p`.
///
/// Cells are visited in row-major order and each visit draws the mask bit
/// and then the response, so the generator stream is the same whatever `p` is.
/// The natural parameter of cell `(i, j)` is the unscaled `x_true[i, j]` and
/// the effective sample size is `p * d1 * d2`.
pub fn gen_bernoulli_mask_dataset<R: Rng + ?Sized>(
    x_true: &DenseMatrix,
    p: f64,
    family: GlmFamily,
    rng: &mut R,
) -> Result<Dataset> {
    if !(p > 0.0 && p <= 1.0) {
        return invalid(format!("mask probability {p} outside (0, 1]"));
    }
    let (d1, d2) = x_true.shape();
    let mut ops = Vec::new();
    let mut responses = Vec::new();
    for k in 0..d1 {
        for l in 0..d2 {
            let keep = rng.random::<f64>() < p;
            let y = sample_response(&family, x_true.get(k, l), rng);
            if keep {
                ops.push(MeasurementOp::MaskedEntry { k, l, scale: 1.0 });
                responses.push(y);
            }
        }
    }
    if ops.is_empty() {
        return invalid("Bernoulli mask observed no cells");
    }
    Dataset::new(d1, d2, ops, responses, family, p * (d1 * d2) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TruthStyle {
    /// Unit Frobenius norm.
    UnitFro,
    /// `M / (c * max|M_ij|)`, so the largest entry has magnitude `1/c`.
    InfScaled(f64),
}

#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub x: DenseMatrix,
    pub rank: usize,
    pub spikiness: f64,
}

impl GroundTruth {
    pub fn from_matrix(x: DenseMatrix) -> Result<Self> {
        let rank = numerical_rank(&x, RANK_TOL)?;
        if rank == 0 {
            return invalid("ground truth must be nonzero");
        }
        let spikiness = spikiness(&x)?;
        Ok(Self { x, rank, spikiness })
    }
}

/// Product of `d1 x r` and `r x d2` factors with Uniform[-0.5, 0.5] entries,
/// normalised per `style`. Draws again on exact rank deficiency.
pub fn gen_ground_truth<R: Rng + ?Sized>(
    d1: usize,
    d2: usize,
    r: usize,
    style: TruthStyle,
    rng: &mut R,
) -> Result<GroundTruth> {
    if d1 == 0 || d2 == 0 || r == 0 || r > d1.min(d2) {
        return invalid(format!("rank {r} invalid for {d1}x{d2}"));
    }
    if let TruthStyle::InfScaled(c) = style {
        if !(c > 0.0) || !c.is_finite() {
            return invalid(format!("infinity-norm scale {c} must be positive"));
        }
    }
    let unif = Uniform::new_inclusive(-0.5, 0.5).expect("valid range");
    for _ in 0..100 {
        let m1 = DenseMatrix::from_fn(d1, r, |_, _| rng.sample(unif));
        let m2 = DenseMatrix::from_fn(r, d2, |_, _| rng.sample(unif));
        let prod = m1.matmul(&m2);
        if numerical_rank(&prod, RANK_TOL)? != r {
            continue;
        }
        let x = match style {
            TruthStyle::UnitFro => prod.scaled(1.0 / prod.fro_norm()),
            TruthStyle::InfScaled(c) => prod.scaled(1.0 / (c * prod.inf_norm())),
        };
        let spikiness = spikiness(&x)?;
        return Ok(GroundTruth { x, rank: r, spikiness });
    }
    invalid("could not draw a full-rank factor product")
}

/// `sqrt(d1 d2) * max|X_ij| / ||X||_F`, between 1 and `sqrt(d1 d2)`.
pub fn spikiness(x: &DenseMatrix) -> Result<f64> {
    let fro = x.fro_norm();
    if fro == 0.0 {
        return invalid("spikiness of the zero matrix is undefined");
    }
    let (d1, d2) = x.shape();
    Ok(standard_scale(d1, d2) * x.inf_norm() / fro)
}
