//! Independent verification of the sector-volume computation: the
//! membership test for the region R_M(Q, xi) = { g : ||g|| < Q,
//! ||gM|| < Q, |theta_g - theta_{gM}| < 2 xi / Q^2 }, the interval
//! decomposition of its y = cos(phi) cross-section, the 1-D quadrature
//! F_M whose xi-derivative is the kernel f_xi, and a Monte Carlo Haar
//! volume oracle.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::hyperbolic::{angle_of, circle_dist, pair_norm_and_tan, CartanCoords, GroupElement};
use crate::quad::integrate_adaptive;
use crate::Error;

/// A region R_M(Q, xi), with the hyperbolic invariants of M precomputed.
#[derive(Clone, Debug)]
pub struct RegionSpec {
    pub m: GroupElement,
    pub q: f64,
    pub xi: f64,
    /// Cartan radius of M: ||M||^2 = 2 cosh ell.
    pub ell: f64,
    /// cosh ell
    pub a: f64,
    /// sinh ell
    pub b: f64,
    /// 2 sinh(ell / 2)
    pub c: f64,
    /// Cartan theta of M, needed to merge K-factors in the closed forms.
    pub theta_m: f64,
}

impl RegionSpec {
    pub fn new(m: GroupElement, q: f64, xi: f64) -> Result<Self, Error> {
        if m.is_rotation() {
            return Err(Error::RotationNotAllowed);
        }
        let cart = crate::hyperbolic::decompose_cartan(&m);
        let ell = cart.t;
        Ok(RegionSpec {
            m,
            q,
            xi,
            ell,
            a: ell.cosh(),
            b: ell.sinh(),
            c: 2.0 * (ell / 2.0).sinh(),
            theta_m: cart.theta,
        })
    }
}

/// The y = cos(phi) cross-section of the region splits [-1, 1] into
/// I1 (norm condition on gM binding), I2 (norm condition on g binding)
/// and an empty remainder; each is a union of at most two intervals.
#[derive(Clone, Debug)]
pub struct IntervalSet {
    pub i1: Vec<(f64, f64)>,
    pub i2: Vec<(f64, f64)>,
    pub lambda_minus: Option<f64>,
    pub lambda_plus: Option<f64>,
    pub alpha: Option<f64>,
}

/// Roots of B^2 (xi^2 + 1) y^2 + 2 A B xi^2 y + A^2 xi^2 - B^2 = 0,
/// real iff xi <= B. The further root lambda_minus is computed by the
/// explicit formula and lambda_plus from the product of roots, which
/// stays stable when the discriminant nearly vanishes.
fn lambda_roots(a: f64, b: f64, xi: f64) -> Option<(f64, f64)> {
    let disc = b * b - xi * xi;
    if disc < 0.0 {
        return None;
    }
    let denom = b * (xi * xi + 1.0);
    let minus = -(a * xi * xi + disc.sqrt()) / denom;
    let product = (a * a * xi * xi - b * b) / (denom * denom) * (xi * xi + 1.0);
    Some((minus, product / minus))
}

pub fn interval_endpoints(spec: &RegionSpec) -> IntervalSet {
    let (a, b, c, xi) = (spec.a, spec.b, spec.c, spec.xi);
    // (1 - A)/B = -tanh(ell / 2): where ||gM|| = ||g|| on the cross-section.
    let e0 = -(spec.ell / 2.0).tanh();
    match lambda_roots(a, b, xi) {
        None => IntervalSet {
            i1: vec![(-1.0, e0)],
            i2: vec![(e0, 1.0)],
            lambda_minus: None,
            lambda_plus: None,
            alpha: None,
        },
        Some((lm, lp)) => {
            let alpha = (1.0 - (xi / b) * (xi / b)).max(0.0).sqrt();
            if xi > c {
                IntervalSet {
                    i1: vec![(-1.0, lm), (lp, e0)],
                    i2: vec![(e0, -alpha), (alpha, 1.0)],
                    lambda_minus: Some(lm),
                    lambda_plus: Some(lp),
                    alpha: Some(alpha),
                }
            } else {
                IntervalSet {
                    i1: vec![(-1.0, lm)],
                    i2: vec![(alpha, 1.0)],
                    lambda_minus: Some(lm),
                    lambda_plus: Some(lp),
                    alpha: Some(alpha),
                }
            }
        }
    }
}

/// F_M(xi) = int_{-1}^1 |J_xi(y)| (1 - y^2)^{-1/2} dy, the main-term
/// coefficient of vol(R_M(Q, xi)) / Q^2. Substituting y = cos(phi)
/// removes the endpoint singularity; each sub-interval is integrated
/// adaptively.
pub fn f_m(spec: &RegionSpec) -> f64 {
    let (a, b, xi) = (spec.a, spec.b, spec.xi);
    let iv = interval_endpoints(spec);
    let mut total = 0.0;
    // On I1 the section length is 1 - B sin(phi) / (xi (A + B cos(phi))).
    for &(lo, hi) in &iv.i1 {
        if hi <= lo {
            continue;
        }
        total += integrate_adaptive(
            |phi| 1.0 - b * phi.sin() / (xi * (a + b * phi.cos())),
            hi.clamp(-1.0, 1.0).acos(),
            lo.clamp(-1.0, 1.0).acos(),
            1e-13,
        );
    }
    // On I2 it is (1 - B sin(phi) / xi) / (A + B cos(phi)).
    for &(lo, hi) in &iv.i2 {
        if hi <= lo {
            continue;
        }
        total += integrate_adaptive(
            |phi| (1.0 - b * phi.sin() / xi) / (a + b * phi.cos()),
            hi.clamp(-1.0, 1.0).acos(),
            lo.clamp(-1.0, 1.0).acos(),
            1e-13,
        );
    }
    total
}

/// Membership of the Cartan sample (t, phi) in R_M(Q, xi) via the
/// closed forms; only valid when ||M|| <= ||g||, where the angle
/// difference lies in [-pi/2, pi/2] and the arctan is unambiguous.
fn contains_closed(spec: &RegionSpec, t: f64, phi: f64) -> bool {
    let qsq = spec.q * spec.q;
    if 2.0 * t.cosh() >= qsq {
        return false;
    }
    let (norm_gm, tan_delta) = pair_norm_and_tan(t, phi + spec.theta_m, spec.ell);
    if norm_gm >= qsq {
        return false;
    }
    let w = 2.0 * spec.xi / qsq;
    if w > FRAC_PI_2 {
        return true;
    }
    match tan_delta {
        // Angle difference of exactly +-pi/2.
        None => false,
        Some(td) => td.abs() < w.tan(),
    }
}

/// Membership computed from scratch: decompose g and gM and compare
/// their ray angles on the circle.
pub fn region_contains_direct(spec: &RegionSpec, g: &GroupElement) -> bool {
    let qsq = spec.q * spec.q;
    if g.norm_sq() >= qsq {
        return false;
    }
    let gm = g.compose(&spec.m);
    if gm.norm_sq() >= qsq {
        return false;
    }
    let (theta_g, theta_gm) = match (angle_of(g), angle_of(&gm)) {
        (Some(x), Some(y)) => (x, y),
        _ => return false,
    };
    circle_dist(theta_g, theta_gm) < 2.0 * spec.xi / qsq
}

/// Membership of g in R_M(Q, xi); closed forms when they apply,
/// direct decomposition otherwise.
pub fn region_contains(spec: &RegionSpec, g: &GroupElement) -> bool {
    if g.is_rotation() {
        return false;
    }
    if spec.m.norm_sq() <= g.norm_sq() {
        let cart = crate::hyperbolic::decompose_cartan(g);
        contains_closed(spec, cart.t, cart.phi)
    } else {
        region_contains_direct(spec, g)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VolumeEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

const SHARD: u64 = 65_536;

/// Monte Carlo Haar volume of R_M(Q, xi): theta and phi uniform on
/// [-pi, pi), cosh t uniform on [1, Q^2/2] (the inverse CDF of the
/// sinh t density), total measure pi Q^2 - 2 pi. Shards use independent
/// RNG streams keyed by (seed, shard index) and integer hit counts are
/// combined in shard order, so the result is reproducible across thread
/// counts.
pub fn mc_volume(spec: &RegionSpec, samples: u64, seed: u64) -> VolumeEstimate {
    let qsq = spec.q * spec.q;
    let measure = PI * qsq - 2.0 * PI;
    let shards = samples.div_ceil(SHARD);
    let hits: u64 = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let count = SHARD.min(samples - shard * SHARD);
            let mut hits = 0u64;
            for _ in 0..count {
                let _theta: f64 = rng.gen_range(-PI..PI);
                let phi: f64 = rng.gen_range(-PI..PI);
                let u: f64 = rng.gen_range(1.0..qsq / 2.0);
                let t = u.acosh();
                let inside = if 2.0 * u >= spec.m.norm_sq() {
                    contains_closed(spec, t, phi)
                } else {
                    let g = CartanCoords {
                        theta: 0.0,
                        t,
                        phi,
                    }
                    .recompose();
                    region_contains_direct(spec, &g)
                };
                if inside {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let p = hits as f64 / samples as f64;
    VolumeEstimate {
        mean: measure * p,
        stderr: measure * (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
        seed,
    }
}
