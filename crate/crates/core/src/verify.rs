//! Self-check suite behind `wahba verify`: reproduces the reference single-pair
//! spectra and runs the trace, spectrum and derivative identities on seeded
//! random draws.

use nalgebra::Vector4;

use crate::davenport::build_k;
use crate::error::Result;
use crate::model::{
    gradient, hessian_a_with, hessian_total_with, loss_total, HessianConvention, ObservationPair, ObservationSet,
};
use crate::quat::Quaternion;
use crate::sim::{
    reference_case, random_observation_set, random_unit_quaternion, random_unit_vector, substream, REFERENCE_EIGENVALUES,
};
use crate::spectral::{analyze_with, eig_sym4, Classification};

pub const EIGENVALUE_TOL: f64 = 1e-9;
pub const TRACE_REL_TOL: f64 = 1e-9;
pub const HA_SPECTRUM_TOL: f64 = 1e-10;
pub const HA_DAVENPORT_TOL: f64 = 1e-12;
pub const GRADIENT_REL_TOL: f64 = 1e-6;
pub const HESSIAN_REL_TOL: f64 = 1e-5;

const FD_STEP: f64 = 1e-5;
const SEED: u64 = 0x005e_ed0f_7ace;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    /// Computed eigenvalues at the three reference iterates.
    pub eigenvalues: [[f64; 4]; 3],
    pub classifications: [Classification; 3],
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Random quaternion with norm uniform in `[0.2, 2]`.
fn random_quaternion(rng: &mut rand_chacha::ChaCha20Rng) -> Quaternion {
    use rand::Rng;
    let dir = random_unit_quaternion(rng).quaternion();
    dir.scale(rng.random_range(0.2..2.0))
}

fn perturbed(q: &Quaternion, k: usize, h: f64) -> Quaternion {
    let mut a = q.to_array();
    a[k] += h;
    Quaternion::from_array(a)
}

pub fn run(convention: HessianConvention) -> Result<VerifyReport> {
    let case = reference_case();
    let set = case.set();
    let mut checks = Vec::new();

    let mut eigenvalues = [[0.0; 4]; 3];
    let mut classifications = [Classification::Indefinite; 3];
    let expected_class = [
        Classification::Indefinite,
        Classification::PositiveSemidefinite,
        Classification::PositiveDefinite,
    ];
    let mut worst = 0.0f64;
    let mut bounds_ok = true;
    for (i, q) in case.quaternions.iter().enumerate() {
        let report = analyze_with(&set, q, convention)?;
        eigenvalues[i] = report.eigenvalues;
        classifications[i] = report.classification;
        bounds_ok &= report.bound_satisfied;
        for (got, want) in report.eigenvalues.iter().zip(REFERENCE_EIGENVALUES[i]) {
            worst = worst.max((got - want).abs());
        }
    }
    checks.push(Check {
        name: "reference eigenvalues",
        passed: worst <= EIGENVALUE_TOL,
        detail: format!("max abs error {worst:.3e} (tol {EIGENVALUE_TOL:e})"),
    });
    checks.push(Check {
        name: "reference classifications",
        passed: classifications == expected_class,
        detail: format!(
            "{} / {} / {}",
            classifications[0], classifications[1], classifications[2]
        ),
    });

    let n2 = [case.quaternions[0].norm_squared(), case.quaternions[2].norm_squared()];
    let tight = [
        (eigenvalues[0][3] - (4.0 * n2[0] - 4.0)).abs(),
        (eigenvalues[0][1] - (4.0 * n2[0] + 4.0)).abs(),
        (eigenvalues[2][3] - (4.0 * n2[1] - 4.0)).abs(),
    ];
    let tight_worst = tight.iter().cloned().fold(0.0, f64::max);
    checks.push(Check {
        name: "bound tightness",
        passed: bounds_ok && tight_worst <= EIGENVALUE_TOL,
        detail: format!("bounds hold: {bounds_ok}, max deviation from 4|q|^2 -/+ 4: {tight_worst:.3e}"),
    });

    let mut rng = substream(SEED, 1);
    let mut trace_worst = 0.0f64;
    for i in 0..1000 {
        let set = random_observation_set(&mut rng, 1 + i % 6)?;
        let q = random_quaternion(&mut rng);
        let expected = 24.0 * q.norm_squared();
        let tr = hessian_total_with(&set, &q, convention).trace();
        trace_worst = trace_worst.max((tr - expected).abs() / expected.max(1.0));
    }
    checks.push(Check {
        name: "trace identity",
        passed: trace_worst <= TRACE_REL_TOL,
        detail: format!("max rel |tr H - 24|q|^2| = {trace_worst:.3e} over 1000 draws"),
    });

    let mut rng = substream(SEED, 2);
    let (mut spec_worst, mut dav_worst) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let pair = ObservationPair::new(random_unit_vector(&mut rng), random_unit_vector(&mut rng), 1.0)?;
        let ha = hessian_a_with(&pair, convention);
        let s = eig_sym4(ha.as_matrix())?;
        for (l, e) in s.eigenvalues.iter().zip([2.0, 2.0, -2.0, -2.0]) {
            spec_worst = spec_worst.max((l - e).abs());
        }
        let kt = build_k(&ObservationSet::single(pair)).scalar_first().scale(2.0);
        dav_worst = dav_worst.max((ha.as_matrix() - kt.as_matrix()).abs().max());
    }
    checks.push(Check {
        name: "H_A spectrum {2,2,-2,-2}",
        passed: spec_worst <= HA_SPECTRUM_TOL,
        detail: format!("max abs error {spec_worst:.3e} over 1000 pairs"),
    });
    checks.push(Check {
        name: "H_A = 2 K (scalar-first)",
        passed: dav_worst <= HA_DAVENPORT_TOL,
        detail: format!("max abs error {dav_worst:.3e} over 1000 pairs"),
    });

    let mut rng = substream(SEED, 3);
    let (mut g_worst, mut h_worst) = (0.0f64, 0.0f64);
    for i in 0..200 {
        let set = random_observation_set(&mut rng, 1 + i % 5)?;
        let q = random_quaternion(&mut rng);
        let g = gradient(&set, &q);
        let g_fd = Vector4::from_fn(|k, _| {
            (loss_total(&set, &perturbed(&q, k, FD_STEP)) - loss_total(&set, &perturbed(&q, k, -FD_STEP)))
                / (2.0 * FD_STEP)
        });
        g_worst = g_worst.max((g - g_fd).abs().max() / g.abs().max().max(1.0));

        let h = *hessian_total_with(&set, &q, convention).as_matrix();
        let mut h_fd = nalgebra::Matrix4::zeros();
        for k in 0..4 {
            let col =
                (gradient(&set, &perturbed(&q, k, FD_STEP)) - gradient(&set, &perturbed(&q, k, -FD_STEP))) / (2.0 * FD_STEP);
            h_fd.set_column(k, &col);
        }
        h_worst = h_worst.max((h - h_fd).abs().max() / h.abs().max().max(1.0));
    }
    checks.push(Check {
        name: "gradient vs finite differences",
        passed: g_worst <= GRADIENT_REL_TOL,
        detail: format!("max rel error {g_worst:.3e} over 200 draws"),
    });
    checks.push(Check {
        name: "Hessian vs finite differences",
        passed: h_worst <= HESSIAN_REL_TOL,
        detail: format!("max rel error {h_worst:.3e} over 200 draws"),
    });

    Ok(VerifyReport { checks, eigenvalues, classifications })
}
