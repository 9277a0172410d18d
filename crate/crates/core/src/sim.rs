//! Seeded generation of synthetic observation sets, plus the reference
//! single-pair case used by the golden tests.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ObservationPair, ObservationSet};
use crate::quat::{dcm_from_quat, normalize, Quaternion, UnitQuaternion};

#[derive(Debug, Clone, PartialEq)]
pub enum WeightScheme {
    Uniform,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_pairs: usize,
    /// Per-axis standard deviation of the additive body-vector noise.
    pub noise_sigma: f64,
    pub weights: WeightScheme,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n_pairs: usize, noise_sigma: f64, seed: u64) -> Self {
        Self { n_pairs, noise_sigma, weights: WeightScheme::Uniform, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pairs == 0 {
            return Err(Error::InvalidConfig("n_pairs must be at least 1".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!("noise sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if let WeightScheme::Custom(w) = &self.weights {
            if w.len() != self.n_pairs {
                return Err(Error::InvalidConfig(format!(
                    "{} custom weights given for {} pairs",
                    w.len(),
                    self.n_pairs
                )));
            }
            if let Some(bad) = w.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
                return Err(Error::InvalidWeight(*bad));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimMetadata {
    pub truth: [f64; 4],
    pub seed: u64,
    pub noise_sigma: f64,
    /// Additive noise applied to each body vector before renormalization.
    pub noise: Vec<[f64; 3]>,
}

/// Independent deterministic stream `k` derived from `seed`.
pub fn substream(seed: u64, k: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Uniform on the 3-sphere: four standard normals, normalized.
pub fn random_unit_quaternion<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion {
    loop {
        let q = Quaternion::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if let Ok(u) = normalize(&q) {
            return u;
        }
    }
}

/// Uniform on the 2-sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v: Vector3<f64> =
            Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Attitude used by the CLI when only a seed is given.
pub fn truth_for_seed(seed: u64) -> UnitQuaternion {
    random_unit_quaternion(&mut substream(seed, 0))
}

/// Draws reference directions uniformly and sets `body = normalize(C r + ε)`.
pub fn generate_set(truth: &UnitQuaternion, config: &SimConfig) -> Result<(ObservationSet, SimMetadata)> {
    config.validate()?;
    let mut rng = substream(config.seed, 1);
    let c = dcm_from_quat(&truth.quaternion());
    let weights: Vec<f64> = match &config.weights {
        WeightScheme::Uniform => vec![1.0; config.n_pairs],
        WeightScheme::Custom(w) => w.clone(),
    };

    let mut pairs = Vec::with_capacity(config.n_pairs);
    let mut noise = Vec::with_capacity(config.n_pairs);
    for w in weights {
        let reference = random_unit_vector(&mut rng);
        let eps = Vector3::new(
            rng.sample::<f64, _>(StandardNormal) * config.noise_sigma,
            rng.sample::<f64, _>(StandardNormal) * config.noise_sigma,
            rng.sample::<f64, _>(StandardNormal) * config.noise_sigma,
        );
        let raw = c * reference + eps;
        let norm = raw.norm();
        if !(norm > 1e-9) {
            return Err(Error::InvalidConfig("noise cancelled a body vector".into()));
        }
        pairs.push(ObservationPair::new(raw / norm, reference, w)?);
        noise.push([eps.x, eps.y, eps.z]);
    }
    let set = ObservationSet::new(pairs)?;
    let meta = SimMetadata {
        truth: truth.quaternion().to_array(),
        seed: config.seed,
        noise_sigma: config.noise_sigma,
        noise,
    };
    Ok((set, meta))
}

/// Unrelated random body/reference directions with random positive weights,
/// for Monte Carlo property checks that need no ground truth.
pub fn random_observation_set<R: Rng + ?Sized>(rng: &mut R, n_pairs: usize) -> Result<ObservationSet> {
    let pairs = (0..n_pairs.max(1))
        .map(|_| {
            let w = 0.05 + rng.random::<f64>();
            ObservationPair::new(random_unit_vector(rng), random_unit_vector(rng), w)
        })
        .collect::<Result<Vec<_>>>()?;
    ObservationSet::new(pairs)
}

pub const REFERENCE_PAIR_BODY: [f64; 3] = [-0.712824827533344, -0.225772381096068, 0.664008732763561];
pub const REFERENCE_PAIR_REF: [f64; 3] = [-0.037453665434217, 0.500499809534146, -0.864926102971707];

/// Unnormalized iterate, `‖q‖ = 0.770268222031943`.
pub const Q_NORM_LT_ONE: [f64; 4] = [0.420683700201250, 0.400737998146962, 0.095142157864169, 0.496684391636530];
/// Normalized iterate.
pub const Q_UNIT: [f64; 4] = [0.118759061535262, -0.346543560044311, -0.817997262250335, 0.443491065576337];
/// Iterate with `‖q‖ = 1.777657443309303`. The third component is rebuilt
/// from that norm (negative sign): the commonly printed value repeats the
/// second component and neither has the stated norm nor reproduces the
/// reference eigenvalues. See [`PRINTED_Q_NORM_GT_ONE`].
pub const Q_NORM_GT_ONE: [f64; 4] = [-0.353622599299341, 0.046434526687823, -0.7929475022018079, -1.550514474779561];
/// The `‖q‖ > 1` iterate as printed, kept for reference only.
pub const PRINTED_Q_NORM_GT_ONE: [f64; 4] = [-0.353622599299341, 0.046434526687823, 0.046434526687823, -1.550514474779561];

pub const NORM_LT_ONE: f64 = 0.770268222031943;
pub const NORM_GT_ONE: f64 = 1.777657443309303;

/// Reference Hessian eigenvalues (descending) at the three iterates.
#[allow(clippy::excessive_precision)]
pub const REFERENCE_EIGENVALUES: [[f64; 4]; 3] = [
    [9.761874553883407, 6.373252535488999, -0.268864411927401, -1.626747464510996],
    [14.677631236006699, 7.999999999999996, 1.322368763993306, 0.000000000000000],
    [39.127609299877825, 16.640263943011881, 11.433446472169676, 8.640263943011886],
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCase {
    pub pair: ObservationPair,
    /// `‖q‖ < 1`, `‖q‖ = 1`, `‖q‖ > 1`, in that order.
    pub quaternions: [Quaternion; 3],
}

impl ReferenceCase {
    pub fn set(&self) -> ObservationSet {
        ObservationSet::single(self.pair)
    }
}

pub fn reference_case() -> ReferenceCase {
    ReferenceCase {
        pair: ObservationPair::from_arrays(REFERENCE_PAIR_BODY, REFERENCE_PAIR_REF, 1.0)
            .expect("reference vectors are unit length"),
        quaternions: [
            Quaternion::from_array(Q_NORM_LT_ONE),
            Quaternion::from_array(Q_UNIT),
            Quaternion::from_array(Q_NORM_GT_ONE),
        ],
    }
}
