//! Quaternion and direction-cosine-matrix arithmetic.
//!
//! Quaternions are scalar-first, `q = (q0, q1, q2, q3)`, and are *not*
//! assumed to be normalized: iterative solvers pass through unnormalized
//! iterates and the Hessian analysis depends on `‖q‖`.
//!
//! The DCM is the homogeneous quadratic map
//!
//! ```text
//!        ⎡ q0²+q1²−q2²−q3²   2(q1q2+q0q3)      2(q1q3−q0q2)    ⎤
//! C(q) = ⎢ 2(q1q2−q0q3)      q0²−q1²+q2²−q3²   2(q2q3+q0q1)    ⎥
//!        ⎣ 2(q1q3+q0q2)      2(q2q3−q0q1)      q0²−q1²−q2²+q3² ⎦
//! ```
//!
//! which satisfies `CᵀC = ‖q‖⁴·I` and `det C = ‖q‖⁶`. For unit `q` it is the
//! rotation taking reference-frame vectors to body-frame vectors,
//! `D_b = C·D_r`.

use std::ops::Neg;

use nalgebra::{Matrix3, Vector4};

use crate::error::{Error, Result};

/// 3×3 direction cosine matrix.
pub type Dcm = Matrix3<f64>;

/// Norms at or below this are treated as the zero quaternion.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Tolerance on `|‖q‖ − 1|` for [`UnitQuaternion`].
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);

    pub const fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Self { q0, q1, q2, q3 }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q0, self.q1, self.q2, self.q3]
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.q0, self.q1, self.q2, self.q3)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    pub fn norm_squared(&self) -> f64 {
        self.q0 * self.q0 + self.q1 * self.q1 + self.q2 * self.q2 + self.q3 * self.q3
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn dot(&self, other: &Quaternion) -> f64 {
        self.q0 * other.q0 + self.q1 * other.q1 + self.q2 * other.q2 + self.q3 * other.q3
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(s * self.q0, s * self.q1, s * self.q2, s * self.q3)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        self.scale(-1.0)
    }
}

/// A quaternion with `|‖q‖ − 1| ≤ 1e-12`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion(Quaternion);

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion(Quaternion::IDENTITY);

    /// Accepts `q` only if it is already unit norm within [`UNIT_TOL`].
    pub fn try_new(q: Quaternion) -> Result<Self> {
        if !q.is_finite() {
            return Err(Error::NonFiniteQuaternion);
        }
        let n = q.norm();
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidConfig(format!(
                "quaternion norm {n} is not unit within {UNIT_TOL:e}"
            )));
        }
        Ok(Self(q))
    }

    pub fn quaternion(&self) -> Quaternion {
        self.0
    }
}

impl From<UnitQuaternion> for Quaternion {
    fn from(u: UnitQuaternion) -> Self {
        u.0
    }
}

/// Homogeneous quaternion DCM (see module docs for the explicit form).
pub fn dcm_from_quat(q: &Quaternion) -> Dcm {
    let Quaternion { q0, q1, q2, q3 } = *q;
    let (s0, s1, s2, s3) = (q0 * q0, q1 * q1, q2 * q2, q3 * q3);
    Matrix3::new(
        s0 + s1 - s2 - s3,
        2.0 * (q1 * q2 + q0 * q3),
        2.0 * (q1 * q3 - q0 * q2),
        2.0 * (q1 * q2 - q0 * q3),
        s0 - s1 + s2 - s3,
        2.0 * (q2 * q3 + q0 * q1),
        2.0 * (q1 * q3 + q0 * q2),
        2.0 * (q2 * q3 - q0 * q1),
        s0 - s1 - s2 + s3,
    )
}

/// `∂C/∂q_k`, linear in `q`.
pub fn dcm_partial(q: &Quaternion, k: usize) -> Result<Dcm> {
    let Quaternion { q0, q1, q2, q3 } = *q;
    let m = match k {
        0 => Matrix3::new(q0, q3, -q2, -q3, q0, q1, q2, -q1, q0),
        1 => Matrix3::new(q1, q2, q3, q2, -q1, q0, q3, -q0, -q1),
        2 => Matrix3::new(-q2, q1, -q0, q1, q2, q3, q0, q3, -q2),
        3 => Matrix3::new(-q3, q0, q1, -q0, -q3, q2, q1, q2, q3),
        _ => return Err(Error::IndexOutOfRange(k)),
    };
    Ok(2.0 * m)
}

/// `∂²C/∂q_j∂q_k`: sixteen constant matrices, symmetric in `(j, k)`.
pub fn dcm_second_partial(j: usize, k: usize) -> Result<Dcm> {
    if j > 3 {
        return Err(Error::IndexOutOfRange(j));
    }
    if k > 3 {
        return Err(Error::IndexOutOfRange(k));
    }
    let (a, b) = if j <= k { (j, k) } else { (k, j) };
    let m = match (a, b) {
        (0, 0) => Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0),
        (1, 1) => Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0),
        (2, 2) => Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0),
        (3, 3) => Matrix3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0),
        (0, 1) => Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0),
        (0, 2) => Matrix3::new(0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0),
        (0, 3) => Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        (1, 2) => Matrix3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        (1, 3) => Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0),
        (2, 3) => Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0),
        _ => unreachable!(),
    };
    Ok(2.0 * m)
}

pub fn normalize(q: &Quaternion) -> Result<UnitQuaternion> {
    if !q.is_finite() {
        return Err(Error::NonFiniteQuaternion);
    }
    let n = q.norm();
    if n <= DEGENERATE_NORM {
        return Err(Error::DegenerateQuaternion { norm: n });
    }
    Ok(UnitQuaternion(q.scale(1.0 / n)))
}

/// Picks the sign of `q` so that its first nonzero component is positive.
pub fn canonical_sign(q: &Quaternion) -> Result<Quaternion> {
    if !q.is_finite() {
        return Err(Error::NonFiniteQuaternion);
    }
    match q.to_array().iter().find(|c| **c != 0.0) {
        None => Err(Error::DegenerateQuaternion { norm: 0.0 }),
        Some(c) if *c < 0.0 => Ok(-*q),
        Some(_) => Ok(*q),
    }
}

/// Rotation angle (radians) between the attitudes encoded by two quaternions,
/// insensitive to sign and to scale.
pub fn angular_distance(a: &Quaternion, b: &Quaternion) -> Result<f64> {
    let a = normalize(a)?.quaternion().to_vector();
    let b = normalize(b)?.quaternion().to_vector();
    let chord = (a - b).norm().min((a + b).norm());
    Ok(4.0 * (0.5 * chord).min(1.0).asin())
}
