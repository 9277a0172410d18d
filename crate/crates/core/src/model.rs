//! Wahba loss in quaternion coordinates with its analytic derivatives.
//!
//! For one unit observation pair `(b, r)` the loss expands to
//!
//! ```text
//! F(q) = ‖b − C(q) r‖² = 1 + ‖q‖⁴ − 2A(q),    A(q) = bᵀ C(q) r
//! ```
//!
//! without assuming `‖q‖ = 1`. `A` is a quadratic form in `q` whose constant
//! Hessian `H_A` has entries `bᵀ (∂²C/∂q_j∂q_k) r`, so
//!
//! ```text
//! ∇F = 4‖q‖² q − 2∇A,    H_F = 4‖q‖² I + 8 q qᵀ − 2 H_A.
//! ```
//!
//! Multi-pair quantities are the weight-averaged single-pair ones.

use nalgebra::{DVector, Dyn, Matrix4, OMatrix, Vector3, Vector4, U4};

use crate::error::{Error, Result};
use crate::quat::{dcm_from_quat, dcm_partial, dcm_second_partial, Quaternion};

/// Observation vectors must be within this distance of unit norm.
pub const UNIT_VECTOR_TOL: f64 = 1e-6;

const RENORMALIZE_NORM_SLACK: f64 = 4.0 * f64::EPSILON;
const RENORMALIZE_WEIGHT_SLACK: f64 = 1e-13;

/// Stacked residual Jacobian, `3n × 4`.
pub type Jacobian = OMatrix<f64, Dyn, U4>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationPair {
    body: Vector3<f64>,
    reference: Vector3<f64>,
    weight: f64,
}

fn ingest_unit(v: Vector3<f64>, which: &'static str) -> Result<Vector3<f64>> {
    let n = v.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_VECTOR_TOL {
        return Err(Error::NotUnitVector { which, norm: n });
    }
    // Leave already-normalized input untouched so re-ingestion is bit-stable.
    if (n - 1.0).abs() > RENORMALIZE_NORM_SLACK {
        Ok(v / n)
    } else {
        Ok(v)
    }
}

impl ObservationPair {
    /// Validates and renormalizes a pair. Vectors further than 1e-6 from unit
    /// norm are rejected rather than silently corrected.
    pub fn new(body: Vector3<f64>, reference: Vector3<f64>, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidWeight(weight));
        }
        Ok(Self {
            body: ingest_unit(body, "body")?,
            reference: ingest_unit(reference, "reference")?,
            weight,
        })
    }

    pub fn from_arrays(body: [f64; 3], reference: [f64; 3], weight: f64) -> Result<Self> {
        Self::new(Vector3::from(body), Vector3::from(reference), weight)
    }

    pub fn body(&self) -> &Vector3<f64> {
        &self.body
    }

    pub fn reference(&self) -> &Vector3<f64> {
        &self.reference
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

/// Non-empty list of pairs whose weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pairs: Vec<ObservationPair>,
}

impl ObservationSet {
    /// Builds a set, rescaling the weights to sum to one.
    pub fn new(mut pairs: Vec<ObservationPair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySet);
        }
        let total: f64 = pairs.iter().map(|p| p.weight).sum();
        if !total.is_finite() {
            return Err(Error::InvalidWeight(total));
        }
        if (total - 1.0).abs() > RENORMALIZE_WEIGHT_SLACK {
            for p in &mut pairs {
                p.weight /= total;
            }
        }
        Ok(Self { pairs })
    }

    pub fn single(pair: ObservationPair) -> Self {
        let mut pair = pair;
        pair.weight = 1.0;
        Self { pairs: vec![pair] }
    }

    pub fn pairs(&self) -> &[ObservationPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Symmetric 4×4 matrix. Symmetry is exact: every constructor mirrors or
/// averages the off-diagonal halves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix4(Matrix4<f64>);

impl SymMatrix4 {
    pub fn zeros() -> Self {
        Self(Matrix4::zeros())
    }

    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn from_diagonal(d: [f64; 4]) -> Self {
        Self(Matrix4::from_diagonal(&Vector4::from(d)))
    }

    /// Builds the matrix from `f(j, k)` evaluated on `j <= k` only.
    pub fn from_upper_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix4::zeros();
        for j in 0..4 {
            for k in j..4 {
                let v = f(j, k);
                m[(j, k)] = v;
                m[(k, j)] = v;
            }
        }
        Self(m)
    }

    /// `v vᵀ`.
    pub fn outer(v: &Vector4<f64>) -> Self {
        Self::from_upper_fn(|j, k| v[j] * v[k])
    }

    /// Accepts a general matrix if it is symmetric within `tol` (scaled by
    /// `max(1, ‖m‖_max)`), then symmetrizes it exactly.
    pub fn try_from_matrix(m: Matrix4<f64>, tol: f64) -> Result<Self> {
        let asym = (m - m.transpose()).abs().max();
        if !(asym <= tol * m.abs().max().max(1.0)) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self::from_upper_fn(|j, k| 0.5 * (m[(j, k)] + m[(k, j)])))
    }

    pub fn as_matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix4<f64> {
        self.0
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.0[(j, k)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0 * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0 + other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0 - other.0)
    }

    pub fn mul_vec(&self, v: &Vector4<f64>) -> Vector4<f64> {
        self.0 * v
    }

    pub fn quadratic_form(&self, v: &Vector4<f64>) -> f64 {
        v.dot(&(self.0 * v))
    }
}

/// Which formula produces the constant Hessian of `A = bᵀ C r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HessianConvention {
    /// `(H_A)_jk = bᵀ (∂²C/∂q_j∂q_k) r` from the constant second partials.
    #[default]
    SecondPartials,
    /// The ten-entry closed-form table as it circulates in print. Its
    /// off-diagonal and lower three diagonal entries carry the opposite sign
    /// of the second-partials route, so it breaks `trace H_A = 0`. Kept only
    /// to demonstrate that discrepancy.
    EntryTable,
}

/// `b − C(q) r`, unweighted.
pub fn residual(pair: &ObservationPair, q: &Quaternion) -> Vector3<f64> {
    pair.body - dcm_from_quat(q) * pair.reference
}

/// `[√a₁ e₁; √a₂ e₂; …]`, so that its squared norm is the total loss at unit q.
pub fn residual_stack(set: &ObservationSet, q: &Quaternion) -> DVector<f64> {
    let c = dcm_from_quat(q);
    let mut out = DVector::zeros(3 * set.len());
    for (i, p) in set.pairs.iter().enumerate() {
        let e = (p.body - c * p.reference) * p.weight.sqrt();
        out.fixed_rows_mut::<3>(3 * i).copy_from(&e);
    }
    out
}

/// `A = bᵀ C(q) r`.
pub fn attitude_score(pair: &ObservationPair, q: &Quaternion) -> f64 {
    pair.body.dot(&(dcm_from_quat(q) * pair.reference))
}

/// `1 + ‖q‖⁴ − 2A`; equals `‖residual‖²` exactly in exact arithmetic when
/// `‖q‖ = 1`.
pub fn loss_single(pair: &ObservationPair, q: &Quaternion) -> f64 {
    let n2 = q.norm_squared();
    1.0 + n2 * n2 - 2.0 * attitude_score(pair, q)
}

pub fn loss_total(set: &ObservationSet, q: &Quaternion) -> f64 {
    set.pairs.iter().map(|p| p.weight * loss_single(p, q)).sum()
}

/// Jacobian of [`residual_stack`] with respect to `q`.
pub fn jacobian(set: &ObservationSet, q: &Quaternion) -> Jacobian {
    let partials = dcm_partials(q);
    let mut jac = Jacobian::zeros(3 * set.len());
    for (i, p) in set.pairs.iter().enumerate() {
        let s = -p.weight.sqrt();
        for (k, dc) in partials.iter().enumerate() {
            let col = dc * p.reference * s;
            jac.fixed_view_mut::<3, 1>(3 * i, k).copy_from(&col);
        }
    }
    jac
}

fn dcm_partials(q: &Quaternion) -> [nalgebra::Matrix3<f64>; 4] {
    std::array::from_fn(|k| dcm_partial(q, k).expect("k < 4"))
}

/// `∇A_k = bᵀ (∂C/∂q_k) r`.
pub fn score_gradient(pair: &ObservationPair, q: &Quaternion) -> Vector4<f64> {
    let partials = dcm_partials(q);
    Vector4::from_fn(|k, _| pair.body.dot(&(partials[k] * pair.reference)))
}

/// Exact gradient of [`loss_total`].
pub fn gradient(set: &ObservationSet, q: &Quaternion) -> Vector4<f64> {
    let partials = dcm_partials(q);
    let mut grad_score = Vector4::zeros();
    for p in &set.pairs {
        for k in 0..4 {
            grad_score[k] += p.weight * p.body.dot(&(partials[k] * p.reference));
        }
    }
    4.0 * q.norm_squared() * q.to_vector() - 2.0 * grad_score
}

pub fn hessian_a(pair: &ObservationPair) -> SymMatrix4 {
    hessian_a_with(pair, HessianConvention::SecondPartials)
}

pub fn hessian_a_with(pair: &ObservationPair, convention: HessianConvention) -> SymMatrix4 {
    let (b, r) = (&pair.body, &pair.reference);
    match convention {
        HessianConvention::SecondPartials => SymMatrix4::from_upper_fn(|j, k| {
            b.dot(&(dcm_second_partial(j, k).expect("indices < 4") * r))
        }),
        HessianConvention::EntryTable => {
            let (bx, by, bz) = (b.x, b.y, b.z);
            let (rx, ry, rz) = (r.x, r.y, r.z);
            let table = [
                [bx * rx + by * ry + bz * rz, bz * ry - by * rz, bx * rz - bz * rx, by * rx - bx * ry],
                [0.0, -bx * rx + by * ry + bz * rz, -(by * rx + bx * ry), -(bz * rx + bx * rz)],
                [0.0, 0.0, bx * rx - by * ry + bz * rz, -(bz * ry + by * rz)],
                [0.0, 0.0, 0.0, bx * rx + by * ry - bz * rz],
            ];
            SymMatrix4::from_upper_fn(|j, k| 2.0 * table[j][k])
        }
    }
}

/// Hessian of `‖q‖⁴`: `4‖q‖² I + 8 q qᵀ`.
pub fn hessian_norm4(q: &Quaternion) -> SymMatrix4 {
    SymMatrix4::identity()
        .scale(4.0 * q.norm_squared())
        .add(&SymMatrix4::outer(&q.to_vector()).scale(8.0))
}

pub fn hessian_single(pair: &ObservationPair, q: &Quaternion) -> SymMatrix4 {
    hessian_single_with(pair, q, HessianConvention::SecondPartials)
}

pub fn hessian_single_with(
    pair: &ObservationPair,
    q: &Quaternion,
    convention: HessianConvention,
) -> SymMatrix4 {
    hessian_norm4(q).sub(&hessian_a_with(pair, convention).scale(2.0))
}

pub fn hessian_total(set: &ObservationSet, q: &Quaternion) -> SymMatrix4 {
    hessian_total_with(set, q, HessianConvention::SecondPartials)
}

/// `Σ aᵢ H_Fᵢ`. Since the weights sum to one this is
/// `4‖q‖² I + 8 q qᵀ − 2 Σ aᵢ H_Aᵢ`.
pub fn hessian_total_with(
    set: &ObservationSet,
    q: &Quaternion,
    convention: HessianConvention,
) -> SymMatrix4 {
    let score = set.pairs.iter().fold(SymMatrix4::zeros(), |acc, p| {
        acc.add(&hessian_a_with(p, convention).scale(p.weight))
    });
    hessian_norm4(q).sub(&score.scale(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eig_sym4;

    fn pair(b: [f64; 3], r: [f64; 3]) -> ObservationPair {
        ObservationPair::from_arrays(b, r, 1.0).unwrap()
    }

    fn reference_pair() -> ObservationPair {
        pair(
            [-0.712824827533344, -0.225772381096068, 0.664008732763561],
            [-0.037453665434217, 0.500499809534146, -0.864926102971707],
        )
    }

    #[test]
    fn rejects_bad_pairs() {
        assert!(matches!(
            ObservationPair::from_arrays([0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1.0),
            Err(Error::NotUnitVector { which: "body", .. })
        ));
        assert!(matches!(
            ObservationPair::from_arrays([0.0, 0.0, 1.0], [0.0, 0.0, 1.1], 1.0),
            Err(Error::NotUnitVector { which: "reference", .. })
        ));
        assert_eq!(
            ObservationPair::from_arrays([0.0, 0.0, 1.0], [0.0, 0.0, 1.0], 0.0),
            Err(Error::InvalidWeight(0.0))
        );
        assert!(ObservationPair::from_arrays([0.0, 0.0, 1.0], [0.0, 0.0, 1.0], f64::NAN).is_err());
        assert_eq!(ObservationSet::new(vec![]), Err(Error::EmptySet));
    }

    #[test]
    fn near_unit_vectors_are_renormalized() {
        let p = ObservationPair::from_arrays([0.0, 0.0, 1.0 + 5e-7], [0.6, 0.8, 0.0], 1.0).unwrap();
        assert!((p.body().norm() - 1.0).abs() < 1e-15);
        let again = ObservationPair::new(*p.body(), *p.reference(), 1.0).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn weights_are_normalized() {
        let a = pair([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        let b = ObservationPair::from_arrays([0.0, 1.0, 0.0], [0.0, 1.0, 0.0], 3.0).unwrap();
        let set = ObservationSet::new(vec![a, b]).unwrap();
        let w: Vec<f64> = set.pairs().iter().map(|p| p.weight()).collect();
        assert_eq!(w, vec![0.25, 0.75]);
    }

    #[test]
    fn residual_examples() {
        let z = [0.0, 0.0, 1.0];
        assert_eq!(residual(&pair(z, z), &Quaternion::IDENTITY), Vector3::zeros());
        assert_eq!(
            residual(&pair(z, [0.0, 0.0, -1.0]), &Quaternion::IDENTITY),
            Vector3::new(0.0, 0.0, 2.0)
        );
    }

    #[test]
    fn residual_stack_examples() {
        let z = [0.0, 0.0, 1.0];
        let one = ObservationSet::single(pair(z, z));
        assert_eq!(residual_stack(&one, &Quaternion::IDENTITY), DVector::zeros(3));
        let x = [1.0, 0.0, 0.0];
        let two = ObservationSet::new(vec![pair(z, z), pair(x, x)]).unwrap();
        assert_eq!(residual_stack(&two, &Quaternion::IDENTITY), DVector::zeros(6));
    }

    #[test]
    fn loss_examples() {
        let z = [0.0, 0.0, 1.0];
        assert_eq!(loss_single(&pair(z, z), &Quaternion::IDENTITY), 0.0);
        assert_eq!(loss_single(&pair(z, [0.0, 0.0, -1.0]), &Quaternion::IDENTITY), 4.0);
        let p = reference_pair();
        let set = ObservationSet::single(p);
        let q = Quaternion::new(0.3, 0.1, -0.7, 0.2);
        assert_eq!(loss_total(&set, &q), loss_single(&p, &q));
    }

    #[test]
    fn loss_at_printed_unit_quaternion_is_not_zero() {
        // The unit example quaternion paired with this observation is a
        // generic point, not an alignment: the residual is far from zero.
        let p = reference_pair();
        let q = Quaternion::new(0.118759061535262, -0.346543560044311, -0.817997262250335, 0.443491065576337);
        let e = residual(&p, &q);
        assert!((loss_single(&p, &q) - e.norm_squared()).abs() < 1e-12);
        assert!((e.norm() - 1.669407809001673).abs() < 1e-9);
    }

    #[test]
    fn jacobian_column_at_identity() {
        let r = [0.6, 0.0, 0.8];
        let set = ObservationSet::single(pair(r, r));
        let jac = jacobian(&set, &Quaternion::IDENTITY);
        let col0: Vector3<f64> = jac.fixed_view::<3, 1>(0, 0).into();
        assert_eq!(col0, -2.0 * Vector3::from(r));
    }

    #[test]
    fn gradient_vanishes_when_aligned() {
        let z = [0.0, 0.0, 1.0];
        let set = ObservationSet::single(pair(z, z));
        assert_eq!(gradient(&set, &Quaternion::IDENTITY), Vector4::zeros());
    }

    #[test]
    fn hessian_a_aligned_with_z() {
        let z = [0.0, 0.0, 1.0];
        assert_eq!(hessian_a(&pair(z, z)), SymMatrix4::from_diagonal([2.0, -2.0, -2.0, 2.0]));
    }

    #[test]
    fn hessian_single_aligned_with_z() {
        let z = [0.0, 0.0, 1.0];
        let h = hessian_single(&pair(z, z), &Quaternion::IDENTITY);
        assert_eq!(h, SymMatrix4::from_diagonal([8.0, 8.0, 8.0, 0.0]));
    }

    #[test]
    fn entry_table_differs_in_sign() {
        let p = reference_pair();
        let routed = hessian_a(&p);
        let table = hessian_a_with(&p, HessianConvention::EntryTable);
        assert!((routed.get(0, 0) - table.get(0, 0)).abs() < 1e-15);
        assert!((routed.get(1, 1) + table.get(1, 1)).abs() < 1e-15);
        assert!((routed.get(0, 1) + table.get(0, 1)).abs() < 1e-15);
        assert!(routed.trace().abs() < 1e-15);
        assert!((table.trace() - 4.0 * p.body().dot(p.reference())).abs() < 1e-14);
    }

    #[test]
    fn reference_eigenvalues_via_hessian_single() {
        let p = reference_pair();
        let q = Quaternion::new(0.420683700201250, 0.400737998146962, 0.095142157864169, 0.496684391636530);
        let s = eig_sym4(hessian_single(&p, &q).as_matrix()).unwrap();
        let expected = [9.761874553883407, 6.373252535488999, -0.268864411927401, -1.626747464510996];
        for (got, want) in s.eigenvalues.iter().zip(expected) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }
}
