//! 2x2 matrix algebra in PSL(2,R), the Mobius action on the upper half
//! plane, and the Cartan (KA+K) decomposition with angle extraction.
//!
//! Matrices are stored as floats with an optional exact integer backing,
//! which keeps deduplication exact for arithmetic lattices. Every value is
//! canonicalized so that the first nonzero entry in the order (a, b, c, d)
//! is strictly positive, fixing one representative of the pair {g, -g}.

use std::f64::consts::PI;

use crate::Error;

/// Entrywise tolerance for the determinant of floating matrices.
pub const DET_TOL: f64 = 1e-12;

/// An element of PSL(2,R): a unimodular 2x2 matrix modulo sign.
#[derive(Clone, Copy, Debug)]
pub struct GroupElement {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    exact: Option<[i64; 4]>,
}

/// KA+K coordinates (theta, t, phi): rotation, displacement, rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartanCoords {
    /// Ray angle theta(g), in [-pi, pi).
    pub theta: f64,
    /// Hyperbolic displacement d(i, g.i) >= 0.
    pub t: f64,
    /// Right rotation angle, in [-pi, pi).
    pub phi: f64,
}

/// A point x + iy of the upper half plane (y > 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HPoint {
    pub x: f64,
    pub y: f64,
}

impl HPoint {
    pub fn new(x: f64, y: f64) -> Result<Self, Error> {
        if !(y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::InvalidPoint { x, y });
        }
        Ok(HPoint { x, y })
    }

    /// The base point i.
    pub fn i() -> Self {
        HPoint { x: 0.0, y: 1.0 }
    }

    /// cosh of the hyperbolic distance to another point:
    /// cosh d(z, w) = 1 + |z - w|^2 / (2 Im z Im w).
    pub fn cosh_dist(&self, other: &HPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        1.0 + (dx * dx + dy * dy) / (2.0 * self.y * other.y)
    }
}

/// Wrap an angle into [-pi, pi).
pub fn wrap_angle(x: f64) -> f64 {
    let mut r = x.rem_euclid(2.0 * PI);
    if r >= PI {
        r -= 2.0 * PI;
    }
    r
}

/// Distance of a - b to 2*pi*Z (the circle distance, in [0, pi]).
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

impl GroupElement {
    /// Build from floating entries; checks |det - 1| <= 1e-12.
    pub fn from_floats(a: f64, b: f64, c: f64, d: f64) -> Result<Self, Error> {
        let det = a * d - b * c;
        if !((det - 1.0).abs() <= DET_TOL) {
            return Err(Error::NotUnimodular { det });
        }
        Ok(Self::new_unchecked(a, b, c, d))
    }

    /// Build from integer entries; requires det == 1 exactly.
    pub fn from_ints(a: i64, b: i64, c: i64, d: i64) -> Result<Self, Error> {
        let det = a * d - b * c;
        if det != 1 {
            return Err(Error::NotUnimodular { det: det as f64 });
        }
        let mut e = [a, b, c, d];
        if let Some(&first) = e.iter().find(|&&v| v != 0) {
            if first < 0 {
                for v in &mut e {
                    *v = -*v;
                }
            }
        }
        Ok(GroupElement {
            a: e[0] as f64,
            b: e[1] as f64,
            c: e[2] as f64,
            d: e[3] as f64,
            exact: Some(e),
        })
    }

    /// Build without a determinant check (internal products).
    pub(crate) fn new_unchecked(a: f64, b: f64, c: f64, d: f64) -> Self {
        let mut e = [a, b, c, d];
        if let Some(&first) = e.iter().find(|&&v| v != 0.0) {
            if first < 0.0 {
                for v in &mut e {
                    *v = -*v;
                }
            }
        }
        GroupElement {
            a: e[0],
            b: e[1],
            c: e[2],
            d: e[3],
            exact: None,
        }
    }

    pub fn identity() -> Self {
        Self::from_ints(1, 0, 0, 1).unwrap()
    }

    /// The rotation k_theta = [[cos(t/2), sin(t/2)], [-sin(t/2), cos(t/2)]].
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Self::new_unchecked(c, s, -s, c)
    }

    /// The dilation a_t = diag(e^{t/2}, e^{-t/2}).
    pub fn translation(t: f64) -> Self {
        let h = (t / 2.0).exp();
        Self::new_unchecked(h, 0.0, 0.0, 1.0 / h)
    }

    /// k_theta * a_t * k_phi.
    pub fn from_cartan(coords: &CartanCoords) -> Self {
        GroupElement::rotation(coords.theta)
            .compose(&GroupElement::translation(coords.t))
            .compose(&GroupElement::rotation(coords.phi))
    }

    /// Exact integer entries of the canonical representative, when backed.
    pub fn exact_entries(&self) -> Option<[i64; 4]> {
        self.exact
    }

    /// Canonical entries quantized to a grid (for hashing float elements).
    pub fn quantized_key(&self, grid: f64) -> [i64; 4] {
        [
            (self.a / grid).round() as i64,
            (self.b / grid).round() as i64,
            (self.c / grid).round() as i64,
            (self.d / grid).round() as i64,
        ]
    }

    /// Matrix product (canonical representative of the product class).
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        if let (Some(x), Some(y)) = (self.exact, other.exact) {
            let prod = exact_mul(x, y);
            if let Some([a, b, c, d]) = prod {
                return GroupElement::from_ints(a, b, c, d)
                    .expect("product of unimodular integer matrices");
            }
        }
        GroupElement::new_unchecked(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )
    }

    pub fn inverse(&self) -> GroupElement {
        if let Some([a, b, c, d]) = self.exact {
            return GroupElement::from_ints(d, -b, -c, a).unwrap();
        }
        GroupElement::new_unchecked(self.d, -self.b, -self.c, self.a)
    }

    /// Squared norm a^2 + b^2 + c^2 + d^2 = 2 cosh d(i, g.i); always >= 2.
    pub fn norm_sq(&self) -> f64 {
        if let Some([a, b, c, d]) = self.exact {
            return (a * a + b * b + c * c + d * d) as f64;
        }
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    /// Exact squared norm for integer-backed elements.
    pub fn norm_sq_exact(&self) -> Option<i64> {
        self.exact.map(|[a, b, c, d]| a * a + b * b + c * c + d * d)
    }

    /// Whether g stabilizes i (g lies in PSO(2)).
    pub fn is_rotation(&self) -> bool {
        if let Some(n) = self.norm_sq_exact() {
            return n == 2;
        }
        self.norm_sq() <= 2.0 + 4.0 * DET_TOL
    }

    /// Mobius action z -> (az + b) / (cz + d).
    pub fn apply(&self, z: &HPoint) -> HPoint {
        let (nx, ny) = (self.a * z.x + self.b, self.a * z.y);
        let (dx, dy) = (self.c * z.x + self.d, self.c * z.y);
        let den = dx * dx + dy * dy;
        HPoint {
            x: (nx * dx + ny * dy) / den,
            y: (ny * dx - nx * dy) / den,
        }
    }

    /// The orbit point g.i.
    pub fn apply_i(&self) -> HPoint {
        let (dx, dy) = (self.d, self.c);
        let den = dx * dx + dy * dy;
        HPoint {
            x: (self.b * dx + self.a * dy) / den,
            y: (self.a * dx - self.b * dy) / den,
        }
    }
}

fn exact_mul(x: [i64; 4], y: [i64; 4]) -> Option<[i64; 4]> {
    let m = |p: i64, q: i64, r: i64, s: i64| -> Option<i64> {
        p.checked_mul(q)?.checked_add(r.checked_mul(s)?)
    };
    Some([
        m(x[0], y[0], x[1], y[2])?,
        m(x[0], y[1], x[1], y[3])?,
        m(x[2], y[0], x[3], y[2])?,
        m(x[2], y[1], x[3], y[3])?,
    ])
}

/// The ray angle theta_g = arg((g.i - i)/(g.i + i)), measured from the
/// upward direction at i. Returns `None` when g.i = i (stabilizer; the
/// sentinel value would be 0, but such elements never enter a pair).
pub fn angle_of(g: &GroupElement) -> Option<f64> {
    if g.is_rotation() {
        return None;
    }
    let z = g.apply_i();
    // (z - i)/(z + i) has argument atan2(-2x, x^2 + y^2 - 1).
    Some(f64::atan2(-2.0 * z.x, z.x * z.x + z.y * z.y - 1.0))
}

/// Cartan decomposition g = k_theta a_t k_phi.
///
/// For g in K the convention is (0, 0, total rotation); for t > 0 the
/// decomposition is unique with t > 0 and theta the ray angle of g.
pub fn decompose_cartan(g: &GroupElement) -> CartanCoords {
    if g.is_rotation() {
        // Total rotation angle, mod 2pi in PSL.
        let phi = wrap_angle(2.0 * f64::atan2(g.b, g.a));
        return CartanCoords {
            theta: 0.0,
            t: 0.0,
            phi,
        };
    }
    let ch = g.norm_sq() / 2.0;
    let t = (ch + (ch * ch - 1.0).max(0.0).sqrt()).ln();
    let theta = angle_of(g).expect("non-rotation has a ray angle");
    // Residual rotation: a_{-t} k_{-theta} g should be (up to sign) k_phi.
    let r = GroupElement::translation(-t)
        .compose(&GroupElement::rotation(-theta))
        .compose(g);
    let phi = wrap_angle(2.0 * f64::atan2(r.b - r.c, r.a + r.d));
    CartanCoords { theta, t, phi }
}

impl CartanCoords {
    pub fn recompose(&self) -> GroupElement {
        GroupElement::from_cartan(self)
    }
}

/// Closed forms for g = k_theta a_t k_phi' with M = k_m a_ell k_*
/// absorbed (phi' is the rotation left of a_ell after merging the K factors):
/// returns (|gM|^2, tan(theta_{gM} - theta_g)).
///
/// The tangent is `None` when its denominator vanishes (only possible for
/// t <= ell, where the angle difference reaches +-pi/2).
pub fn pair_norm_and_tan(t: f64, phi: f64, ell: f64) -> (f64, Option<f64>) {
    let (a, b) = (ell.cosh(), ell.sinh());
    let (ch, sh) = (t.cosh(), t.sinh());
    let cphi = phi.cos();
    let norm_sq = 2.0 * (a * ch + b * cphi * sh);
    let den = a * sh + b * cphi * ch;
    if den == 0.0 {
        return (norm_sq, None);
    }
    (norm_sq, Some(b * phi.sin() / den))
}
