//! Symmetric 4×4 eigen-decomposition and definiteness classification.

use std::fmt;

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{hessian_total_with, HessianConvention, ObservationSet, SymMatrix4};
use crate::quat::Quaternion;

/// Input asymmetry tolerated by [`eig_sym4`], relative to `max(1, ‖M‖_max)`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Default relative tolerance for [`classify`].
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-9;
/// Absolute slack when checking eigenvalues against the analytic bounds.
pub const BOUND_TOL: f64 = 1e-9;

const JACOBI_REL_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 60;

/// Eigenvalues sorted descending with eigenvectors in the matching columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: [f64; 4],
    pub eigenvectors: Matrix4<f64>,
}

impl Spectrum {
    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[3]
    }

    pub fn eigenvector(&self, i: usize) -> Vector4<f64> {
        self.eigenvectors.column(i).into_owned()
    }

    /// `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> Matrix4<f64> {
        let lambda = Matrix4::from_diagonal(&Vector4::from(self.eigenvalues));
        self.eigenvectors * lambda * self.eigenvectors.transpose()
    }
}

fn off_diagonal_frobenius(a: &Matrix4<f64>) -> f64 {
    let mut s = 0.0;
    for p in 0..4 {
        for q in 0..4 {
            if p != q {
                s += a[(p, q)] * a[(p, q)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigensolver for a symmetric 4×4 matrix.
///
/// Sweeps all `(p, q)` planes in row order until the off-diagonal Frobenius
/// norm drops below `1e-13 · ‖M‖_F` (at most 60 sweeps). Each eigenvector is
/// sign-fixed so that its largest-magnitude component is positive, which
/// makes the output a deterministic function of the input.
pub fn eig_sym4(m: &Matrix4<f64>) -> Result<Spectrum> {
    let asym = (m - m.transpose()).abs().max();
    if !(asym <= SYMMETRY_TOL * m.abs().max().max(1.0)) {
        return Err(Error::NotSymmetric(asym));
    }
    let mut a = SymMatrix4::try_from_matrix(*m, SYMMETRY_TOL)?.into_matrix();
    let mut v = Matrix4::<f64>::identity();
    let threshold = JACOBI_REL_TOL * a.norm();

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_frobenius(&a) <= threshold {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // a ← Jᵀ a J with J the (p, q) plane rotation.
                for k in 0..4 {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..4 {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;

                for k in 0..4 {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));

    let mut eigenvalues = [0.0; 4];
    let mut eigenvectors = Matrix4::zeros();
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues[dst] = a[(src, src)];
        let mut col = v.column(src).into_owned();
        let lead = col.iamax();
        if col[lead] < 0.0 {
            col = -col;
        }
        eigenvectors.set_column(dst, &col);
    }
    Ok(Spectrum { eigenvalues, eigenvectors })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    PositiveDefinite,
    PositiveSemidefinite,
    Indefinite,
    NegativeSemidefinite,
    NegativeDefinite,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::PositiveDefinite => "positive-definite",
            Self::PositiveSemidefinite => "positive-semidefinite",
            Self::Indefinite => "indefinite",
            Self::NegativeSemidefinite => "negative-semidefinite",
            Self::NegativeDefinite => "negative-definite",
        }
    }

    /// True for the two classes with no negative eigenvalue.
    pub fn is_convex(&self) -> bool {
        matches!(self, Self::PositiveDefinite | Self::PositiveSemidefinite)
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Absolute threshold `scale_tol · max(1, λ_max − λ_min)`.
pub fn classify_threshold(s: &Spectrum, scale_tol: f64) -> f64 {
    scale_tol * (s.max() - s.min()).max(1.0)
}

pub fn classify(s: &Spectrum, scale_tol: f64) -> Classification {
    let tau = classify_threshold(s, scale_tol);
    let (lo, hi) = (s.min(), s.max());
    if lo > tau {
        Classification::PositiveDefinite
    } else if lo >= -tau {
        Classification::PositiveSemidefinite
    } else if hi < -tau {
        Classification::NegativeDefinite
    } else if hi <= tau {
        Classification::NegativeSemidefinite
    } else {
        Classification::Indefinite
    }
}

/// Number of eigenvalues with magnitude above the classification threshold.
pub fn rank_estimate(s: &Spectrum, scale_tol: f64) -> usize {
    let tau = classify_threshold(s, scale_tol);
    s.eigenvalues.iter().filter(|l| l.abs() > tau).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lower: f64,
    pub upper: f64,
    /// `λ_min − lower`; zero when the lower bound is attained.
    pub lower_margin: f64,
    /// `upper − λ_max`.
    pub upper_margin: f64,
    pub satisfied: bool,
}

/// Eigenvalue bounds `4‖q‖² − 4 ≤ λ ≤ 12‖q‖² + 4` for the Hessian of the
/// Wahba loss at `q`. They hold for one pair and, since the total Hessian is
/// a convex combination of single-pair Hessians, for any weighted set.
pub fn bound_check(q: &Quaternion, s: &Spectrum) -> BoundCheck {
    let n2 = q.norm_squared();
    let lower = 4.0 * n2 - 4.0;
    let upper = 12.0 * n2 + 4.0;
    let lower_margin = s.min() - lower;
    let upper_margin = upper - s.max();
    BoundCheck {
        lower,
        upper,
        lower_margin,
        upper_margin,
        satisfied: lower_margin >= -BOUND_TOL && upper_margin >= -BOUND_TOL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub classification: Classification,
    pub eigenvalues: [f64; 4],
    pub min_eig: f64,
    pub max_eig: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
    pub bound_satisfied: bool,
    pub rank_estimate: usize,
    pub norm: f64,
}

pub fn analyze(set: &ObservationSet, q: &Quaternion) -> Result<ConvexityReport> {
    analyze_with(set, q, HessianConvention::SecondPartials)
}

pub fn analyze_with(
    set: &ObservationSet,
    q: &Quaternion,
    convention: HessianConvention,
) -> Result<ConvexityReport> {
    let h = hessian_total_with(set, q, convention);
    let s = eig_sym4(h.as_matrix())?;
    let bounds = bound_check(q, &s);
    Ok(ConvexityReport {
        classification: classify(&s, DEFAULT_CLASSIFY_TOL),
        eigenvalues: s.eigenvalues,
        min_eig: s.min(),
        max_eig: s.max(),
        lower_bound: bounds.lower,
        upper_bound: bounds.upper,
        lower_margin: bounds.lower_margin,
        upper_margin: bounds.upper_margin,
        bound_satisfied: bounds.satisfied,
        rank_estimate: rank_estimate(&s, DEFAULT_CLASSIFY_TOL),
        norm: q.norm(),
    })
}
