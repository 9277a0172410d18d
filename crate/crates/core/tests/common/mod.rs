//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use wahba_core::sim::{random_unit_quaternion, substream};
use wahba_core::Quaternion;

pub fn rng(stream: u64) -> ChaCha20Rng {
    substream(0x00ac_ce97, stream)
}

pub fn random_quaternion(rng: &mut ChaCha20Rng, min_norm: f64, max_norm: f64) -> Quaternion {
    let dir = random_unit_quaternion(rng).quaternion();
    dir.scale(rng.random_range(min_norm..max_norm))
}

fn shifted(q: &Quaternion, k: usize, h: f64) -> Quaternion {
    let mut a = q.to_array();
    a[k] += h;
    Quaternion::from_array(a)
}

/// Central-difference gradient of a scalar function of `q`.
pub fn fd_gradient(f: impl Fn(&Quaternion) -> f64, q: &Quaternion, h: f64) -> Vector4<f64> {
    Vector4::from_fn(|k, _| (f(&shifted(q, k, h)) - f(&shifted(q, k, -h))) / (2.0 * h))
}

/// Central-difference Jacobian of a 4-vector function of `q`, column k = ∂g/∂q_k.
pub fn fd_jacobian4(g: impl Fn(&Quaternion) -> Vector4<f64>, q: &Quaternion, h: f64) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for k in 0..4 {
        m.set_column(k, &((g(&shifted(q, k, h)) - g(&shifted(q, k, -h))) / (2.0 * h)));
    }
    m
}

pub fn rel_err_vec(a: &Vector4<f64>, b: &Vector4<f64>) -> f64 {
    (a - b).abs().max() / a.abs().max().max(1.0)
}

pub fn rel_err_mat(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
    (a - b).abs().max() / a.abs().max().max(1.0)
}

fn det3(m: &Matrix4<f64>, idx: [usize; 3]) -> f64 {
    let a = |i: usize, j: usize| m[(idx[i], idx[j])];
    a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
        + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
}

fn det4(m: &Matrix4<f64>) -> f64 {
    let mut d = 0.0;
    for col in 0..4 {
        let rest: Vec<usize> = (0..4).filter(|c| *c != col).collect();
        let mut minor = Matrix4::zeros();
        for (i, r) in (1..4).enumerate() {
            for (j, c) in rest.iter().enumerate() {
                minor[(i, j)] = m[(r, *c)];
            }
        }
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        d += sign * m[(0, col)] * det3(&minor, [0, 1, 2]);
    }
    d
}

/// Coefficients `[1, −e1, e2, −e3, e4]` of `det(λI − M)`, where `e_k` is the
/// sum of the k×k principal minors.
pub fn char_poly(m: &Matrix4<f64>) -> [f64; 5] {
    let e1 = m.trace();
    let mut e2 = 0.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            e2 += m[(i, i)] * m[(j, j)] - m[(i, j)] * m[(j, i)];
        }
    }
    let e3 = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]].iter().map(|idx| det3(m, *idx)).sum::<f64>();
    [1.0, -e1, e2, -e3, det4(m)]
}

fn horner(c: &[f64; 5], x: f64) -> f64 {
    c.iter().fold(0.0, |acc, ci| acc * x + ci)
}

/// Real roots of the characteristic polynomial, descending, found by a dense
/// sign-change scan over the Gershgorin interval followed by bisection.
/// Returns `None` if fewer than four simple roots are bracketed.
pub fn char_poly_roots(m: &Matrix4<f64>) -> Option<[f64; 4]> {
    let c = char_poly(m);
    let radius = (0..4).map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let (lo, hi) = (-radius - 1.0, radius + 1.0);
    let steps = 200_000;
    let mut roots = Vec::new();
    let mut x0 = lo;
    let mut p0 = horner(&c, x0);
    for i in 1..=steps {
        let x1 = lo + (hi - lo) * i as f64 / steps as f64;
        let p1 = horner(&c, x1);
        if p0 == 0.0 {
            roots.push(x0);
        } else if p0 * p1 < 0.0 {
            let (mut a, mut b, mut pa) = (x0, x1, p0);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                let pm = horner(&c, mid);
                if pm == 0.0 || mid == a || mid == b {
                    a = mid;
                    b = mid;
                    break;
                }
                if pa * pm < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    pa = pm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        x0 = x1;
        p0 = p1;
    }
    if roots.len() != 4 {
        return None;
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    Some([roots[0], roots[1], roots[2], roots[3]])
}

pub fn random_symmetric(rng: &mut ChaCha20Rng, scale: f64) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for j in 0..4 {
        for k in j..4 {
            let v = rng.random_range(-scale..scale);
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
    }
    m
}
