//! Derivative-based iterative solvers for the Wahba loss: gradient descent,
//! Gauss-Newton and Levenberg-Marquardt with fixed damping.
//!
//! All three work on the unconstrained quaternion. With
//! `normalize_each_step` the iterate is projected back onto the unit sphere
//! after every update and the next Jacobian is evaluated there.

use nalgebra::{Cholesky, Matrix4, Vector4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{gradient, hessian_total, jacobian, loss_total, residual_stack, ObservationSet};
use crate::quat::{normalize, Quaternion, DEGENERATE_NORM};
use crate::spectral::eig_sym4;

/// Relative eigenvalue floor below which `JᵀJ` is treated as singular.
pub const GNA_SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gda,
    Gna,
    Lma,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Gradient-descent step `μ`.
    pub step_size: f64,
    /// Levenberg-Marquardt damping `κ`.
    pub kappa: f64,
    pub normalize_each_step: bool,
    pub grad_tol: f64,
    /// Stop when the loss changes by no more than this between iterations.
    pub loss_tol: f64,
    pub max_iters: usize,
    /// Record the smallest Hessian eigenvalue of every iterate.
    pub record_min_eig: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Lma,
            step_size: 0.1,
            kappa: 1e-6,
            normalize_each_step: true,
            grad_tol: 1e-10,
            loss_tol: 1e-14,
            max_iters: 200,
            record_min_eig: true,
        }
    }
}

impl OptimizerConfig {
    pub fn with_method(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive("step_size", self.step_size)?;
        positive("kappa", self.kappa)?;
        positive("grad_tol", self.grad_tol)?;
        positive("loss_tol", self.loss_tol)?;
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub index: usize,
    pub q: [f64; 4],
    pub loss: f64,
    pub grad_norm: f64,
    pub min_hessian_eig: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    GradTol,
    LossTol,
    MaxIters,
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub final_q: Quaternion,
    pub final_loss: f64,
    pub converged: bool,
    pub termination_reason: TerminationReason,
    /// Starts with the (possibly normalized) initial point at index 0.
    pub trace: Vec<IterationRecord>,
}

fn normal_equations(set: &ObservationSet, q: &Quaternion) -> (Matrix4<f64>, Vector4<f64>) {
    let jac = jacobian(set, q);
    let e = residual_stack(set, q);
    (jac.transpose() * &jac, jac.transpose() * e)
}

fn ensure_finite(q: &Quaternion) -> Result<()> {
    if q.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteQuaternion)
    }
}

/// `q − (JᵀJ + κI)⁻¹ Jᵀe`.
pub fn step_lma(set: &ObservationSet, q: &Quaternion, kappa: f64) -> Result<Quaternion> {
    ensure_finite(q)?;
    if !(kappa > 0.0) {
        return Err(Error::InvalidConfig(format!("kappa must be positive, got {kappa}")));
    }
    let (jtj, jte) = normal_equations(set, q);
    let damped = jtj + Matrix4::identity() * kappa;
    let chol = Cholesky::new(damped).ok_or(Error::Factorization("JᵀJ + κI is not positive definite"))?;
    let delta = chol.solve(&jte);
    Ok(Quaternion::from_vector(&(q.to_vector() - delta)))
}

/// `q − (JᵀJ)⁺ Jᵀe`. Falls back to the spectral pseudo-inverse when the
/// smallest eigenvalue of `JᵀJ` is below `1e-12` relative to the largest,
/// which is always the case for a single observation pair (`J` is 3×4).
pub fn step_gna(set: &ObservationSet, q: &Quaternion) -> Result<Quaternion> {
    ensure_finite(q)?;
    let (jtj, jte) = normal_equations(set, q);
    let spectrum = eig_sym4(&jtj)?;
    let cutoff = GNA_SINGULAR_TOL * spectrum.max().max(f64::MIN_POSITIVE);
    let delta = if spectrum.min() > cutoff {
        match Cholesky::new(jtj) {
            Some(chol) => chol.solve(&jte),
            None => pseudo_inverse_apply(&spectrum, &jte, cutoff),
        }
    } else {
        pseudo_inverse_apply(&spectrum, &jte, cutoff)
    };
    Ok(Quaternion::from_vector(&(q.to_vector() - delta)))
}

fn pseudo_inverse_apply(s: &crate::spectral::Spectrum, rhs: &Vector4<f64>, cutoff: f64) -> Vector4<f64> {
    let mut out = Vector4::zeros();
    for i in 0..4 {
        let l = s.eigenvalues[i];
        if l > cutoff {
            let v = s.eigenvector(i);
            out += v * (v.dot(rhs) / l);
        }
    }
    out
}

/// `q − μ ∇F`.
pub fn step_gda(set: &ObservationSet, q: &Quaternion, step_size: f64) -> Result<Quaternion> {
    ensure_finite(q)?;
    if !(step_size > 0.0) {
        return Err(Error::InvalidConfig(format!("step_size must be positive, got {step_size}")));
    }
    Ok(Quaternion::from_vector(&(q.to_vector() - gradient(set, q) * step_size)))
}

fn take_step(set: &ObservationSet, q: &Quaternion, config: &OptimizerConfig) -> Result<Quaternion> {
    match config.method {
        Method::Gda => step_gda(set, q, config.step_size),
        Method::Gna => step_gna(set, q),
        Method::Lma => step_lma(set, q, config.kappa),
    }
}

fn record(set: &ObservationSet, q: &Quaternion, index: usize, config: &OptimizerConfig) -> IterationRecord {
    let loss = loss_total(set, q);
    let grad_norm = gradient(set, q).norm();
    let min_hessian_eig = if config.record_min_eig && q.is_finite() {
        eig_sym4(hessian_total(set, q).as_matrix()).ok().map(|s| s.min())
    } else {
        None
    };
    IterationRecord { index, q: q.to_array(), loss, grad_norm, min_hessian_eig }
}

/// Runs the configured method from `q0`.
///
/// Stops on the first of: gradient norm ≤ `grad_tol` (reported first on a
/// tie), loss change ≤ `loss_tol`, a non-finite iterate (`Diverged`), or
/// `max_iters` steps. When normalization is enabled the start point is
/// normalized too.
pub fn solve(set: &ObservationSet, q0: &Quaternion, config: &OptimizerConfig) -> Result<SolveResult> {
    config.validate()?;
    ensure_finite(q0)?;
    let n0 = q0.norm();
    if n0 <= DEGENERATE_NORM {
        return Err(Error::DegenerateQuaternion { norm: n0 });
    }
    let mut q = if config.normalize_each_step { normalize(q0)?.quaternion() } else { *q0 };

    let mut trace = vec![record(set, &q, 0, config)];
    let mut prev_loss = trace[0].loss;
    let mut reason = TerminationReason::MaxIters;

    for index in 1..=config.max_iters {
        let stepped = take_step(set, &q, config).and_then(|next| {
            if config.normalize_each_step {
                normalize(&next).map(|u| u.quaternion())
            } else {
                ensure_finite(&next).map(|_| next)
            }
        });
        let next = match stepped {
            Ok(next) => next,
            Err(_) => {
                trace.push(IterationRecord {
                    index,
                    q: q.to_array(),
                    loss: f64::NAN,
                    grad_norm: f64::NAN,
                    min_hessian_eig: None,
                });
                reason = TerminationReason::Diverged;
                break;
            }
        };
        q = next;
        let rec = record(set, &q, index, config);
        trace.push(rec);

        if !(rec.loss.is_finite() && rec.grad_norm.is_finite()) {
            reason = TerminationReason::Diverged;
            break;
        }
        if rec.grad_norm <= config.grad_tol {
            reason = TerminationReason::GradTol;
            break;
        }
        if (prev_loss - rec.loss).abs() <= config.loss_tol {
            reason = TerminationReason::LossTol;
            break;
        }
        prev_loss = rec.loss;
    }

    let last = trace.last().expect("trace holds the start point");
    Ok(SolveResult {
        final_q: Quaternion::from_array(last.q),
        final_loss: last.loss,
        converged: matches!(reason, TerminationReason::GradTol | TerminationReason::LossTol),
        termination_reason: reason,
        trace,
    })
}
