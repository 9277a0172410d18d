//! Davenport q-method: the closed-form global minimizer of the Wahba loss
//! over unit quaternions, used as ground truth for the iterative solvers.
//!
//! ```text
//! B = Σ aᵢ bᵢ rᵢᵀ,   z = Σ aᵢ bᵢ × rᵢ,
//!
//!     ⎡ B + Bᵀ − tr(B) I   z     ⎤
//! K = ⎣ zᵀ                 tr(B) ⎦
//! ```
//!
//! `K` is stored vector-first, as above. Everything that leaves this module
//! is scalar-first: with `K̃` the reordered matrix, `bᵀ C(q) r = qᵀ K̃ q`, so
//! for unit `q` the total loss is `2(1 − qᵀ K̃ q)`.

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::error::Result;
use crate::model::{ObservationSet, SymMatrix4};
use crate::quat::{canonical_sign, normalize, Quaternion, UnitQuaternion};
use crate::spectral::{eig_sym4, Spectrum};

/// Top-two eigenvalue gap below which the attitude is reported unobservable.
pub const MULTIPLICITY_GAP: f64 = 1e-9;

// Scalar-first index i reads vector-first index SCALAR_FIRST[i].
const SCALAR_FIRST: [usize; 4] = [3, 0, 1, 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DavenportMatrix {
    /// Vector-first `K`.
    pub k: Matrix4<f64>,
    pub b: Matrix3<f64>,
    pub z: Vector3<f64>,
}

impl DavenportMatrix {
    /// `K̃`, the same matrix with the scalar component moved to index 0.
    pub fn scalar_first(&self) -> SymMatrix4 {
        SymMatrix4::from_upper_fn(|j, k| self.k[(SCALAR_FIRST[j], SCALAR_FIRST[k])])
    }
}

pub fn build_k(set: &ObservationSet) -> DavenportMatrix {
    let mut b = Matrix3::zeros();
    let mut z = Vector3::zeros();
    for p in set.pairs() {
        b += p.weight() * p.body() * p.reference().transpose();
        z += p.weight() * p.body().cross(p.reference());
    }
    let tr = b.trace();
    let s = b + b.transpose() - tr * Matrix3::identity();

    let mut k = Matrix4::zeros();
    k.fixed_view_mut::<3, 3>(0, 0).copy_from(&s);
    k.fixed_view_mut::<3, 1>(0, 3).copy_from(&z);
    k.fixed_view_mut::<1, 3>(3, 0).copy_from(&z.transpose());
    k[(3, 3)] = tr;
    DavenportMatrix { k, b, z }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DavenportSolution {
    /// Scalar-first, sign-canonicalized.
    pub quaternion: UnitQuaternion,
    pub lambda_max: f64,
    /// Second-largest eigenvalue of `K`.
    pub lambda_second: f64,
    /// Set when the top eigenvalue is (numerically) repeated, so the optimal
    /// attitude is not unique.
    pub multiplicity_flag: bool,
    pub spectrum: Spectrum,
}

impl DavenportSolution {
    /// Smallest attainable total loss over unit quaternions.
    pub fn min_loss(&self) -> f64 {
        2.0 * (1.0 - self.lambda_max)
    }
}

pub fn solve_davenport(set: &ObservationSet) -> Result<DavenportSolution> {
    let kt = build_k(set).scalar_first();
    let spectrum = eig_sym4(kt.as_matrix())?;
    let top = Quaternion::from_vector(&spectrum.eigenvector(0));
    let quaternion = normalize(&canonical_sign(&top)?)?;
    let (lambda_max, lambda_second) = (spectrum.eigenvalues[0], spectrum.eigenvalues[1]);
    Ok(DavenportSolution {
        quaternion,
        lambda_max,
        lambda_second,
        multiplicity_flag: lambda_max - lambda_second < MULTIPLICITY_GAP,
        spectrum,
    })
}
