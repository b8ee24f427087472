//! Averaged projected gradient (AVPG) and plain projected gradient (PG).
//!
//! Both solvers record one [`IterRecord`] per iterate. Row `t = 0` is the
//! projected starting point (no step taken, `eta = 0`); row `t >= 1` is the
//! iterate produced by step `t`. The returned `best` iterate minimises the
//! observed objective over all rows, including the starting point.

use crate::error::{invalid, Error, Result};
use crate::glm::{loss, loss_and_grad, Dataset};
use crate::linalg::{count_above, op_norm, singular_values, DenseMatrix, RANK_TOL};
use crate::measure::GroundTruth;
use crate::project::{project_detailed, ConstraintSpec};

/// Objectives above this magnitude abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct AvpgConfig {
    /// Rank passed to the projection oracle.
    pub r: usize,
    /// Averaging weight inside a period.
    pub eta0: f64,
    /// Smoothness estimate; the projected point is `X - grad / (2 beta eta)`.
    pub beta: f64,
    /// Period length: `eta = 1` whenever `t` is a multiple of `t0`.
    pub t0: usize,
    pub max_iter: usize,
    /// Stop once `||grad L(X_t)||_op <= grad_tol`. Zero disables the check.
    pub grad_tol: f64,
}

impl AvpgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return invalid("rank must be at least 1");
        }
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0) {
            return invalid(format!("eta0 = {} outside (0, 1]", self.eta0));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return invalid(format!("beta = {} must be positive", self.beta));
        }
        if self.t0 == 0 {
            return invalid("t0 must be at least 1");
        }
        if !(self.grad_tol >= 0.0) {
            return invalid("grad_tol must be nonnegative");
        }
        Ok(())
    }

    pub fn step_weight(&self, t: usize) -> f64 {
        if t.is_multiple_of(self.t0) {
            1.0
        } else {
            self.eta0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PgConfig {
    pub r: usize,
    /// Gradient step; zero is allowed and reduces the method to repeated projection.
    pub step: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl PgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return invalid("rank must be at least 1");
        }
        if !(self.step >= 0.0) || !self.step.is_finite() {
            return invalid(format!("step = {} must be finite and >= 0", self.step));
        }
        if !(self.grad_tol >= 0.0) {
            return invalid("grad_tol must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    pub t: usize,
    pub eta: f64,
    pub objective: f64,
    /// `L(X_t) - L(X_truth)` when the truth is known.
    pub h: Option<f64>,
    /// `||X_t - X_truth||_F / ||X_truth||_F` when the truth is known.
    pub rel_dist: Option<f64>,
    pub num_rank: usize,
    pub fro: f64,
    /// Infinity-norm overshoot reported by a heuristic projection at this step.
    pub inf_overshoot: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<IterRecord>,
    /// Index into `records` of the smallest objective.
    pub best_index: usize,
    /// Rank handed to the projection oracle.
    pub rank: usize,
    /// Largest rank an iterate can reach (`r * t0` for AVPG, `r` for PG).
    pub rank_bound: usize,
}

impl SolveTrace {
    pub fn best(&self) -> &IterRecord {
        &self.records[self.best_index]
    }

    pub fn last(&self) -> &IterRecord {
        self.records.last().expect("trace always holds the start point")
    }

    pub fn has_truth(&self) -> bool {
        self.records.first().is_some_and(|r| r.h.is_some())
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub best: DenseMatrix,
    pub last: DenseMatrix,
    pub trace: SolveTrace,
}

/// Shared bookkeeping for both solvers.
struct Recorder<'a> {
    dataset: &'a Dataset,
    truth: Option<(&'a DenseMatrix, f64, f64)>,
    trace: SolveTrace,
    best: DenseMatrix,
}

impl<'a> Recorder<'a> {
    fn new(
        dataset: &'a Dataset,
        truth: Option<&'a GroundTruth>,
        x0: &DenseMatrix,
        rank: usize,
        rank_bound: usize,
    ) -> Result<Self> {
        let truth = match truth {
            Some(t) => {
                if t.x.shape() != x0.shape() {
                    return invalid("ground truth shape does not match the iterate");
                }
                Some((&t.x, loss(dataset, &t.x)?, t.x.fro_norm()))
            }
            None => None,
        };
        Ok(Self {
            dataset,
            truth,
            trace: SolveTrace {
                records: Vec::new(),
                best_index: 0,
                rank,
                rank_bound,
            },
            best: x0.clone(),
        })
    }

    fn record(&mut self, t: usize, eta: f64, x: &DenseMatrix, objective: f64, overshoot: f64) -> Result<()> {
        let (h, rel_dist) = match self.truth {
            Some((xt, lt, nt)) => (Some(objective - lt), Some((x - xt).fro_norm() / nt)),
            None => (None, None),
        };
        let num_rank = if x.is_finite() {
            count_above(&singular_values(x)?, RANK_TOL)
        } else {
            0
        };
        self.trace.records.push(IterRecord {
            t,
            eta,
            objective,
            h,
            rel_dist,
            num_rank,
            fro: x.fro_norm(),
            inf_overshoot: overshoot,
        });
        if !objective.is_finite() || objective.abs() > DIVERGENCE_LIMIT || !x.is_finite() {
            return Err(Error::Divergence {
                iteration: t,
                objective,
                trace: Box::new(self.trace.clone()),
            });
        }
        let idx = self.trace.records.len() - 1;
        if objective < self.trace.records[self.trace.best_index].objective {
            self.trace.best_index = idx;
            self.best = x.clone();
        }
        Ok(())
    }

    fn finish(self, last: DenseMatrix) -> SolveOutput {
        SolveOutput {
            best: self.best,
            last,
            trace: self.trace,
        }
    }

    fn objective_and_grad(&self, x: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        loss_and_grad(self.dataset, x)
    }
}

fn check_start(dataset: &Dataset, x0: &DenseMatrix, r: usize) -> Result<()> {
    let (d1, d2) = dataset.dims();
    if x0.shape() != (d1, d2) {
        return invalid(format!(
            "initial iterate is {}x{}, dataset expects {d1}x{d2}",
            x0.rows(),
            x0.cols()
        ));
    }
    if r > d1.min(d2) {
        return invalid(format!("rank {r} exceeds min({d1}, {d2})"));
    }
    if !x0.is_finite() {
        return invalid("initial iterate has non-finite entries");
    }
    Ok(())
}

fn converged(grad: &DenseMatrix, grad_tol: f64) -> Result<bool> {
    Ok(grad_tol > 0.0 && op_norm(grad, 1e-12)? <= grad_tol)
}

/// Averaged projected gradient.
///
/// At step `t` the weight is `eta = 1` if `t0` divides `t` and `eta0`
/// otherwise; `V_t = P(X - grad / (2 beta eta))` and the next iterate is
/// `(1 - eta) X + eta V_t`. The start point is projected once before the loop.
pub fn avpg(
    dataset: &Dataset,
    spec: &ConstraintSpec,
    config: &AvpgConfig,
    x0: &DenseMatrix,
    truth: Option<&GroundTruth>,
) -> Result<SolveOutput> {
    config.validate()?;
    spec.validate()?;
    check_start(dataset, x0, config.r)?;

    let start = project_detailed(x0, config.r, spec)?;
    let mut x = start.matrix;
    let mut rec = Recorder::new(dataset, truth, &x, config.r, config.r * config.t0)?;
    let (mut obj, mut g) = rec.objective_and_grad(&x)?;
    rec.best = x.clone();
    rec.record(0, 0.0, &x, obj, start.inf_overshoot)?;

    for t in 1..=config.max_iter {
        if converged(&g, config.grad_tol)? {
            break;
        }
        let eta = config.step_weight(t);
        let target = x.lincomb(1.0, &g, -1.0 / (2.0 * config.beta * eta));
        let proj = project_detailed(&target, config.r, spec)?;
        x = if eta == 1.0 {
            proj.matrix
        } else {
            x.lincomb(1.0 - eta, &proj.matrix, eta)
        };
        (obj, g) = rec.objective_and_grad(&x)?;
        rec.record(t, eta, &x, obj, proj.inf_overshoot)?;
    }
    Ok(rec.finish(x))
}

/// Projected gradient `X_{t+1} = P(X_t - step * grad L(X_t))`.
pub fn pg(
    dataset: &Dataset,
    spec: &ConstraintSpec,
    config: &PgConfig,
    x0: &DenseMatrix,
    truth: Option<&GroundTruth>,
) -> Result<SolveOutput> {
    config.validate()?;
    spec.validate()?;
    check_start(dataset, x0, config.r)?;

    let start = project_detailed(x0, config.r, spec)?;
    let mut x = start.matrix;
    let mut rec = Recorder::new(dataset, truth, &x, config.r, config.r)?;
    let (mut obj, mut g) = rec.objective_and_grad(&x)?;
    rec.best = x.clone();
    rec.record(0, 0.0, &x, obj, start.inf_overshoot)?;

    for t in 1..=config.max_iter {
        if converged(&g, config.grad_tol)? {
            break;
        }
        let target = x.lincomb(1.0, &g, -config.step);
        let proj = project_detailed(&target, config.r, spec)?;
        x = proj.matrix;
        (obj, g) = rec.objective_and_grad(&x)?;
        rec.record(t, 1.0, &x, obj, proj.inf_overshoot)?;
    }
    Ok(rec.finish(x))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub t0: usize,
    pub eta0: f64,
}

/// `t0 = ceil(4 kappa (ln(4 kappa) + 1))`, `eta0 = 1 / (4 kappa)`.
pub fn default_schedule(kappa: f64) -> Result<Schedule> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return invalid(format!("condition number {kappa} must be finite and >= 1"));
    }
    let k4 = 4.0 * kappa;
    Ok(Schedule {
        t0: (k4 * (k4.ln() + 1.0)).ceil() as usize,
        eta0: 1.0 / k4,
    })
}

/// `(1 - 1/(4 kappa))^t (4 kappa)^s h_0` with `s = floor(t / t0)`, one value
/// per trace record.
pub fn theorem1_envelope(trace: &SolveTrace, kappa: f64, t0: usize) -> Result<Vec<f64>> {
    if !(kappa >= 1.0) || t0 == 0 {
        return invalid("envelope needs kappa >= 1 and t0 >= 1");
    }
    let h0 = match trace.records.first().and_then(|r| r.h) {
        Some(h0) => h0,
        None => return invalid("envelope needs a trace recorded against a known truth"),
    };
    let k4 = 4.0 * kappa;
    let log_contract = (1.0 - 1.0 / k4).ln();
    let log_growth = k4.ln();
    Ok(trace
        .records
        .iter()
        .map(|rec| {
            let s = (rec.t / t0) as f64;
            (rec.t as f64 * log_contract + s * log_growth).exp() * h0
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        let s = default_schedule(1.0).unwrap();
        assert_eq!(s.t0, 10);
        assert_eq!(s.eta0, 0.25);
        assert_eq!(default_schedule(2.0).unwrap().eta0, 0.125);
        assert!(default_schedule(0.5).is_err());
        assert!(default_schedule(f64::NAN).is_err());
        let mut prev = 0;
        for i in 0..200 {
            let t0 = default_schedule(1.0 + 0.37 * i as f64).unwrap().t0;
            assert!(t0 >= prev);
            prev = t0;
        }
    }

    fn trace_with_h(h: &[f64]) -> SolveTrace {
        SolveTrace {
            records: h
                .iter()
                .enumerate()
                .map(|(t, &h)| IterRecord {
                    t,
                    eta: 0.0,
                    objective: h,
                    h: Some(h),
                    rel_dist: Some(0.0),
                    num_rank: 1,
                    fro: 1.0,
                    inf_overshoot: 0.0,
                })
                .collect(),
            best_index: 0,
            rank: 1,
            rank_bound: 1,
        }
    }

    #[test]
    fn envelope_values() {
        let trace = trace_with_h(&[2.0; 11]);
        let env = theorem1_envelope(&trace, 1.0, 10).unwrap();
        assert_eq!(env[0], 2.0);
        // (3/4)^10 * 4 = 0.225254058837890625
        assert!((env[10] / 2.0 - 0.225_254_058_837_890_6).abs() < 1e-14);
        let mut no_truth = trace.clone();
        no_truth.records[0].h = None;
        assert!(theorem1_envelope(&no_truth, 1.0, 10).is_err());
    }

    #[test]
    fn envelope_decays_across_periods() {
        for kappa in [1.0, 2.0, 5.0] {
            let s = default_schedule(kappa).unwrap();
            let ratio = (1.0 - 1.0 / (4.0 * kappa)).powi(s.t0 as i32) * 4.0 * kappa;
            assert!(ratio < 1.0, "kappa {kappa}: {ratio}");
        }
    }

    #[test]
    fn step_weights() {
        let c = AvpgConfig {
            r: 1,
            eta0: 0.3,
            beta: 1.0,
            t0: 4,
            max_iter: 10,
            grad_tol: 0.0,
        };
        let w: Vec<f64> = (1..=8).map(|t| c.step_weight(t)).collect();
        assert_eq!(w, vec![0.3, 0.3, 0.3, 1.0, 0.3, 0.3, 0.3, 1.0]);
        assert!(AvpgConfig { eta0: 0.0, ..c.clone() }.validate().is_err());
        assert!(AvpgConfig { eta0: 1.5, ..c.clone() }.validate().is_err());
        assert!(AvpgConfig { t0: 0, ..c.clone() }.validate().is_err());
        assert!(AvpgConfig { beta: 0.0, ..c }.validate().is_err());
    }
}
