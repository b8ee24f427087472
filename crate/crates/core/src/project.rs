//! Projection onto `{rank <= r} ∩ C` for the supported regularity sets `C`.
//!
//! For sets defined by the singular values (Frobenius, nuclear, Schatten-1/2
//! and operator-norm balls) the projection is exact: truncate to the top `r`
//! singular triples and project the spectrum onto the matching vector ball.
//! Infinity-norm type sets have no known exact oracle; `FactorRowClip`,
//! `AltInfBall` and `RowCenteredInf` are heuristics with weaker contracts.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{svd_top_r, DenseMatrix, SvdResult, SVD_TOL};

fn default_alt_iters() -> usize {
    50
}

fn default_alt_tol() -> f64 {
    1e-7
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintSpec {
    Unconstrained,
    FroBall {
        xi: f64,
    },
    NucBall {
        xi: f64,
    },
    /// Schatten-p ball, `p` in {1, 2}.
    SchattenP {
        p: f64,
        xi: f64,
    },
    OpNormBall {
        xi: f64,
    },
    /// Clip rows of the balanced factors `U sqrt(S)` and `V sqrt(S)`.
    FactorRowClip {
        a_u: f64,
        a_v: f64,
    },
    /// Alternate entrywise clipping and rank truncation.
    AltInfBall {
        xi: f64,
        #[serde(default = "default_alt_iters")]
        max_iters: usize,
        #[serde(default = "default_alt_tol")]
        tol: f64,
    },
    /// `AltInfBall` restricted to matrices whose rows sum to zero.
    RowCenteredInf {
        xi: f64,
        #[serde(default = "default_alt_iters")]
        max_iters: usize,
        #[serde(default = "default_alt_tol")]
        tol: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SingvalBall {
    L1,
    L2,
    Linf,
}

impl ConstraintSpec {
    pub fn alt_inf_ball(xi: f64) -> Self {
        ConstraintSpec::AltInfBall {
            xi,
            max_iters: default_alt_iters(),
            tol: default_alt_tol(),
        }
    }

    pub fn row_centered_inf(xi: f64) -> Self {
        ConstraintSpec::RowCenteredInf {
            xi,
            max_iters: default_alt_iters(),
            tol: default_alt_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                invalid(format!("{name} must be positive and finite, got {v}"))
            }
        };
        match *self {
            ConstraintSpec::Unconstrained => Ok(()),
            ConstraintSpec::FroBall { xi }
            | ConstraintSpec::NucBall { xi }
            | ConstraintSpec::OpNormBall { xi } => pos("xi", xi),
            ConstraintSpec::SchattenP { p, xi } => {
                if p != 1.0 && p != 2.0 {
                    return invalid(format!("Schatten-p projection supports p in {{1, 2}}, got {p}"));
                }
                pos("xi", xi)
            }
            ConstraintSpec::FactorRowClip { a_u, a_v } => {
                pos("a_u", a_u)?;
                pos("a_v", a_v)
            }
            ConstraintSpec::AltInfBall { xi, max_iters, tol }
            | ConstraintSpec::RowCenteredInf { xi, max_iters, tol } => {
                pos("xi", xi)?;
                pos("tol", tol)?;
                if max_iters == 0 {
                    return invalid("max_iters must be at least 1");
                }
                Ok(())
            }
        }
    }

    /// The vector ball that the spectrum is projected onto, for spectral sets.
    pub fn singval_ball(&self) -> Option<(SingvalBall, f64)> {
        match *self {
            ConstraintSpec::FroBall { xi } => Some((SingvalBall::L2, xi)),
            ConstraintSpec::NucBall { xi } => Some((SingvalBall::L1, xi)),
            ConstraintSpec::OpNormBall { xi } => Some((SingvalBall::Linf, xi)),
            ConstraintSpec::SchattenP { p, xi } if p == 1.0 => Some((SingvalBall::L1, xi)),
            ConstraintSpec::SchattenP { p, xi } if p == 2.0 => Some((SingvalBall::L2, xi)),
            _ => None,
        }
    }

    /// True when the oracle is the exact nearest-point map.
    pub fn is_spectral(&self) -> bool {
        matches!(self, ConstraintSpec::Unconstrained) || self.singval_ball().is_some()
    }

    /// Frobenius scale of a typical feasible point, used to draw probe pairs.
    pub fn reference_fro(&self, d1: usize, d2: usize, rank: usize) -> f64 {
        let cells = ((d1 * d2) as f64).sqrt();
        match *self {
            ConstraintSpec::Unconstrained => 1.0,
            ConstraintSpec::FroBall { xi }
            | ConstraintSpec::NucBall { xi }
            | ConstraintSpec::SchattenP { xi, .. } => xi,
            ConstraintSpec::OpNormBall { xi } => xi * (rank as f64).sqrt(),
            ConstraintSpec::FactorRowClip { a_u, a_v } => a_u * a_v * cells,
            ConstraintSpec::AltInfBall { xi, .. } | ConstraintSpec::RowCenteredInf { xi, .. } => {
                xi * cells
            }
        }
    }
}

/// Euclidean projection of a nonnegative spectrum onto the `ball` of radius
/// `xi` intersected with the nonnegative orthant.
pub fn project_singvals(sigma: &[f64], ball: SingvalBall, xi: f64) -> Vec<f64> {
    match ball {
        SingvalBall::L2 => {
            let norm = sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
            if norm <= xi {
                sigma.to_vec()
            } else {
                sigma.iter().map(|s| s * (xi / norm)).collect()
            }
        }
        SingvalBall::Linf => sigma.iter().map(|s| s.min(xi)).collect(),
        SingvalBall::L1 => {
            let total: f64 = sigma.iter().sum();
            if total <= xi {
                return sigma.to_vec();
            }
            let tau = simplex_threshold(sigma, xi);
            sigma.iter().map(|s| (s - tau).max(0.0)).collect()
        }
    }
}

/// Soft threshold `tau` with `sum (s_i - tau)_+ = xi`, by sorting.
fn simplex_threshold(sigma: &[f64], xi: f64) -> f64 {
    let mut sorted = sigma.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let candidate = (cumsum - xi) / (j + 1) as f64;
        if s - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    tau
}

/// Output of a projection together with heuristic diagnostics.
#[derive(Clone, Debug)]
pub struct Projection {
    pub matrix: DenseMatrix,
    /// For infinity-norm heuristics: how far the returned matrix exceeds the
    /// radius, `max(0, ||out||_inf - xi)`. Zero for the other sets.
    pub inf_overshoot: f64,
    /// Alternating sweeps performed (zero for one-shot oracles).
    pub sweeps: usize,
}

pub fn project(x: &DenseMatrix, r: usize, spec: &ConstraintSpec) -> Result<DenseMatrix> {
    project_detailed(x, r, spec).map(|p| p.matrix)
}

pub fn project_detailed(x: &DenseMatrix, r: usize, spec: &ConstraintSpec) -> Result<Projection> {
    spec.validate()?;
    let (d1, d2) = x.shape();
    if r == 0 || r > d1.min(d2) {
        return invalid(format!("rank {r} outside 1..={}", d1.min(d2)));
    }
    let one_shot = |matrix| Projection {
        matrix,
        inf_overshoot: 0.0,
        sweeps: 0,
    };
    match *spec {
        ConstraintSpec::Unconstrained => Ok(one_shot(svd_top_r(x, r, SVD_TOL)?.reconstruct())),
        ConstraintSpec::FactorRowClip { a_u, a_v } => {
            Ok(one_shot(factor_row_clip(&svd_top_r(x, r, SVD_TOL)?, a_u, a_v)))
        }
        ConstraintSpec::AltInfBall { xi, max_iters, tol } => {
            alternating_inf(x, r, xi, max_iters, tol, false)
        }
        ConstraintSpec::RowCenteredInf { xi, max_iters, tol } => {
            alternating_inf(x, r, xi, max_iters, tol, true)
        }
        _ => {
            let (ball, xi) = spec.singval_ball().expect("remaining specs are spectral");
            let svd = svd_top_r(x, r, SVD_TOL)?;
            let s = project_singvals(&svd.singvals, ball, xi);
            Ok(one_shot(svd.reconstruct_with(&s)))
        }
    }
}

/// Balanced factors `U sqrt(S)` and `V sqrt(S)` of a truncated SVD.
pub fn balanced_factors(svd: &SvdResult) -> (DenseMatrix, DenseMatrix) {
    let root: Vec<f64> = svd.singvals.iter().map(|s| s.sqrt()).collect();
    let scale = |m: &DenseMatrix| {
        let mut out = m.clone();
        for i in 0..out.rows() {
            for (v, s) in out.row_mut(i).iter_mut().zip(&root) {
                *v *= s;
            }
        }
        out
    };
    (scale(&svd.left), scale(&svd.right))
}

fn max_row_norm(m: &DenseMatrix) -> f64 {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn clip_rows(m: &mut DenseMatrix, bound: f64) {
    for i in 0..m.rows() {
        let row = m.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > bound {
            let s = bound / norm;
            row.iter_mut().for_each(|v| *v *= s);
        }
    }
}

fn factor_row_clip(svd: &SvdResult, a_u: f64, a_v: f64) -> DenseMatrix {
    let (d1, d2) = (svd.left.rows(), svd.right.rows());
    if svd.rank() == 0 {
        return DenseMatrix::zeros(d1, d2);
    }
    let (mut u1, mut v1) = balanced_factors(svd);
    clip_rows(&mut u1, a_u);
    clip_rows(&mut v1, a_v);
    u1.matmul(&v1.transpose())
}

/// Row-norm bounds `(a_u, a_v)` of the balanced rank-`r` factors of `x`;
/// with these, `FactorRowClip` leaves the rank-`r` truncation of `x` intact.
pub fn factor_row_bounds(x: &DenseMatrix, r: usize) -> Result<(f64, f64)> {
    let svd = svd_top_r(x, r, SVD_TOL)?;
    let (u1, v1) = balanced_factors(&svd);
    Ok((max_row_norm(&u1), max_row_norm(&v1)))
}

fn alternating_inf(
    x: &DenseMatrix,
    r: usize,
    xi: f64,
    max_iters: usize,
    tol: f64,
    center: bool,
) -> Result<Projection> {
    let mut current = x.clone();
    if center {
        current.center_rows();
    }
    let mut sweeps = 0;
    let mut clipped;
    loop {
        sweeps += 1;
        clipped = current.clone();
        clipped.clip_entries(xi);
        if center {
            clipped.center_rows();
        }
        let next = svd_top_r(&clipped, r, SVD_TOL)?.reconstruct();
        let moved = (&next - &current).fro_norm();
        current = next;
        if moved < tol || sweeps >= max_iters {
            break;
        }
    }
    // Final clip-then-truncate pass.
    clipped = current;
    clipped.clip_entries(xi);
    if center {
        clipped.center_rows();
    }
    let mut out = svd_top_r(&clipped, r, SVD_TOL)?.reconstruct();
    if center {
        // Truncation preserves zero row sums up to rounding; remove the residue.
        out.center_rows();
    }
    let inf_overshoot = (out.inf_norm() - xi).max(0.0);
    Ok(Projection {
        matrix: out,
        inf_overshoot,
        sweeps,
    })
}
