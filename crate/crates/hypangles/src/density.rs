//! The limiting pair correlation density: the three-case kernel f_xi,
//! its derivative and breakpoints, the lattice sums g_2 and R_2, the
//! Haar integral of f_xi, and tail/truncation control.
//!
//! Scaling convention: the limiting density is naturally expressed at
//! argument xi / V (V the covolume). The public functions here take xi directly
//! and apply the substitution zeta = V * xi in exactly one place each,
//! marked below, so the rescaling cannot be applied twice.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::lattice::{BallEnumeration, LatticeSpec};
use crate::quad::integrate_adaptive;
use crate::Error;

/// Which branch of the kernel applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FxiCase {
    /// B <= xi: f = 2 ell / xi^2.
    Top,
    /// C <= xi <= B.
    Mid,
    /// xi <= C.
    Tail,
}

/// One evaluation of the kernel, with the hyperbolic invariants of ell.
#[derive(Clone, Copy, Debug)]
pub struct FxiEval {
    pub ell: f64,
    /// cosh ell
    pub a: f64,
    /// sinh ell
    pub b: f64,
    /// 2 sinh(ell/2) = sqrt(2(A-1))
    pub c: f64,
    pub value: f64,
    pub case: FxiCase,
}

/// The two radii where the kernel changes branch: sinh(ell1) = xi and
/// 2 sinh(ell2 / 2) = xi. Always 0 < ell1 < ell2 for xi > 0.
#[derive(Clone, Copy, Debug)]
pub struct Breakpoints {
    pub ell1: f64,
    pub ell2: f64,
}

pub fn breakpoints(xi: f64) -> Breakpoints {
    Breakpoints {
        ell1: xi.asinh(),
        ell2: 2.0 * (xi / 2.0).asinh(),
    }
}

/// The kernel f_xi(ell).
///
/// The tail branch ell - ln(A + sqrt(B^2 - xi^2)) is rewritten as
/// -ln1p(-e^{-ell} xi^2 / (B + sqrt(B^2 - xi^2))) which is exact and
/// avoids the catastrophic cancellation of the direct form for large
/// ell or small xi.
pub fn f_xi(xi: f64, ell: f64) -> FxiEval {
    debug_assert!(xi > 0.0 && ell >= 0.0);
    let a = ell.cosh();
    let b = ell.sinh();
    let c = 2.0 * (ell / 2.0).sinh();
    let (value, case) = if b <= xi {
        (2.0 * ell / (xi * xi), FxiCase::Top)
    } else if c <= xi {
        let root = (b * b - xi * xi).sqrt();
        (
            2.0 / (xi * xi) * (ell + (1.0 + xi * xi).ln() - 2.0 * (a + root).ln()),
            FxiCase::Mid,
        )
    } else {
        let root = (b * b - xi * xi).sqrt();
        (
            -2.0 / (xi * xi) * (-(-ell).exp() * xi * xi / (b + root)).ln_1p(),
            FxiCase::Tail,
        )
    };
    FxiEval {
        ell,
        a,
        b,
        c,
        value,
        case,
    }
}

/// Derivative of f_xi in ell; `None` at the two breakpoints, where the
/// left and right derivatives differ (and blow up at ell1).
pub fn f_xi_prime(xi: f64, ell: f64) -> Option<f64> {
    let bp = breakpoints(xi);
    if ell == bp.ell1 || ell == bp.ell2 {
        return None;
    }
    let scale = 2.0 / (xi * xi);
    Some(if ell < bp.ell1 {
        scale
    } else {
        let b = ell.sinh();
        let root = (b * b - xi * xi).sqrt();
        if ell < bp.ell2 {
            scale * (1.0 - 2.0 * b / root)
        } else {
            scale * (1.0 - b / root)
        }
    })
}

/// cosh of the Cartan radius of a group element with the given norm.
fn ell_of_norm_sq(norm_sq: f64) -> f64 {
    (norm_sq / 2.0).acosh()
}

/// Fold chunk results in index order so the float sum is independent of
/// thread scheduling.
fn ordered_sum(parts: Vec<f64>) -> f64 {
    parts.into_iter().sum()
}

const CHUNK: usize = 4096;

/// g_2(xi): the truncated lattice sum (V / 2 pi) sum_M f_{V xi}(ell(M)),
/// with an estimated tail bound for the elements beyond the enumeration
/// radius.
///
/// The bound calibrates the known ~ 1/norm^4 decay of the summand
/// against the outermost computed shell, so it is an estimate rather
/// than a proof; a safety factor of 2 is applied.
pub fn g2_theoretical(
    xi: f64,
    ball: &BallEnumeration,
    spec: &LatticeSpec,
) -> Result<(f64, f64), Error> {
    let v = spec.covolume;
    // The single zeta = V * xi conversion point for g_2.
    let zeta = v * xi;
    let t_max = ball.q;
    let needed_sq = 2.0 * breakpoints(zeta).ell2.cosh() + 2.0;
    if t_max * t_max < needed_sq {
        return Err(Error::TruncationTooSmall {
            t_max,
            xi,
            needed: needed_sq.sqrt(),
        });
    }
    let shell_lo = 0.64 * t_max * t_max;
    let parts: Vec<(f64, f64)> = ball
        .elements
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut total = 0.0;
            let mut shell = 0.0;
            for g in chunk {
                let n = g.norm_sq();
                if n <= 2.0 {
                    continue;
                }
                let term = f_xi(zeta, ell_of_norm_sq(n)).value;
                total += term;
                if n >= shell_lo {
                    shell += term;
                }
            }
            (total, shell)
        })
        .collect();
    let sum = ordered_sum(parts.iter().map(|p| p.0).collect());
    let shell_sum = ordered_sum(parts.iter().map(|p| p.1).collect());
    let scale = v / (2.0 * PI);
    // Under dN ~ (2 pi / V) r dr and summand ~ r^-4, the mass beyond
    // t_max is (tail integral)/(shell integral) = 0.64/0.36 of the
    // [0.8 t_max, t_max) shell.
    let calibrated = scale * shell_sum * (0.64 / 0.36);
    let analytic = 4.0 / (t_max * t_max);
    let tail_bound = 2.0 * calibrated.max(analytic);
    Ok((scale * sum, tail_bound))
}

/// g_2(0) = (V / pi) sum_{ell(M) > 0} 1 / (e^{2 ell(M)} - 1), truncated
/// to the enumeration.
pub fn g2_zero(ball: &BallEnumeration, spec: &LatticeSpec) -> f64 {
    let parts: Vec<f64> = ball
        .elements
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|g| {
                    let n = g.norm_sq();
                    if n <= 2.0 {
                        0.0
                    } else {
                        let ell = ell_of_norm_sq(n);
                        1.0 / (2.0 * ell).exp_m1()
                    }
                })
                .sum()
        })
        .collect();
    spec.covolume / PI * ordered_sum(parts)
}

/// Integral of zeta |-> f_zeta(ell) from 0 to `upper`, for fixed ell > 0.
///
/// As a function of zeta the integrand has three branches: the tail
/// branch on (0, C], the middle branch on [C, B] (integrated under
/// zeta = B sin psi, which removes the square-root cusp at zeta = B),
/// and the exact 2 ell / zeta^2 beyond B.
pub fn f_zeta_integral(ell: f64, upper: f64) -> f64 {
    let mut acc = 0.0;
    cumulative_into(ell, &[upper], &mut |_, v| acc = v);
    acc
}

/// Evaluate the cumulative integral of zeta |-> f_zeta(ell) at each of
/// the increasing positive `targets`, invoking `sink(index, value)`.
fn cumulative_into(ell: f64, targets: &[f64], sink: &mut dyn FnMut(usize, f64)) {
    let a = ell.cosh();
    let b = ell.sinh();
    let c = 2.0 * (ell / 2.0).sinh();
    let tol = 1e-12;
    let tail_part = |lo: f64, hi: f64| -> f64 {
        if hi <= lo {
            return 0.0;
        }
        integrate_adaptive(
            |z| {
                let root = (b * b - z * z).sqrt();
                -2.0 / (z * z) * (-(-ell).exp() * z * z / (b + root)).ln_1p()
            },
            lo,
            hi,
            tol,
        )
    };
    let mid_part = |lo: f64, hi: f64| -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let psi_of = |z: f64| (z / b).min(1.0).asin();
        integrate_adaptive(
            |psi| {
                let z = b * psi.sin();
                let root = b * psi.cos();
                2.0 / (z * z) * (ell + (1.0 + z * z).ln() - 2.0 * (a + root).ln()) * root
            },
            psi_of(lo),
            psi_of(hi),
            tol,
        )
    };
    let top_part = |lo: f64, hi: f64| -> f64 {
        if hi <= lo {
            0.0
        } else {
            2.0 * ell * (1.0 / lo - 1.0 / hi)
        }
    };
    let mut acc = 0.0;
    let mut prev = 0.0_f64;
    for (j, &u) in targets.iter().enumerate() {
        acc += tail_part(prev.min(c), u.min(c));
        acc += mid_part(prev.clamp(c, b), u.clamp(c, b));
        acc += top_part(prev.max(b), u.max(b));
        prev = u;
        sink(j, acc);
    }
}

/// R_2 on a grid: R_2(xi) = (1 / 2 pi) sum_M int_0^{V xi} f_zeta(ell(M))
/// dzeta, so that R_2' = g_2. Elements are grouped by norm so each
/// distinct radius is integrated once.
pub fn r2_theoretical(
    xi_grid: &[f64],
    ball: &BallEnumeration,
    spec: &LatticeSpec,
) -> Result<Vec<f64>, Error> {
    if xi_grid.is_empty() || xi_grid.windows(2).any(|w| w[1] <= w[0]) || xi_grid[0] <= 0.0 {
        return Err(Error::BadGrid);
    }
    let v = spec.covolume;
    let xi_max = *xi_grid.last().unwrap();
    let t_max = ball.q;
    let needed_sq = 2.0 * breakpoints(v * xi_max).ell2.cosh() + 2.0;
    if t_max * t_max < needed_sq {
        return Err(Error::TruncationTooSmall {
            t_max,
            xi: xi_max,
            needed: needed_sq.sqrt(),
        });
    }
    // The single zeta = V * xi conversion point for R_2.
    let targets: Vec<f64> = xi_grid.iter().map(|&x| v * x).collect();

    // Multiplicity of each distinct norm (1e-9-quantized; exact for
    // integer lattices).
    let mut groups: std::collections::BTreeMap<i64, (f64, u64)> = Default::default();
    for g in &ball.elements {
        let n = g.norm_sq();
        if n <= 2.0 {
            continue;
        }
        let e = groups.entry((n * 1e9).round() as i64).or_insert((n, 0));
        e.1 += 1;
    }
    let groups: Vec<(f64, u64)> = groups.into_values().collect();

    let parts: Vec<Vec<f64>> = groups
        .par_chunks(64)
        .map(|chunk| {
            let mut local = vec![0.0; targets.len()];
            for &(n, mult) in chunk {
                let ell = ell_of_norm_sq(n);
                cumulative_into(ell, &targets, &mut |j, val| {
                    local[j] += mult as f64 * val;
                });
            }
            local
        })
        .collect();
    let mut out = vec![0.0; targets.len()];
    for part in parts {
        for (o, p) in out.iter_mut().zip(part) {
            *o += p;
        }
    }
    for o in &mut out {
        *o /= 2.0 * PI;
    }
    Ok(out)
}

pub fn r2_theoretical_at(
    xi: f64,
    ball: &BallEnumeration,
    spec: &LatticeSpec,
) -> Result<f64, Error> {
    Ok(r2_theoretical(&[xi], ball, spec)?[0])
}

/// The Haar integral int_G f_xi(ell(g)) dg = 2 pi int_0^inf f_xi(t)
/// sinh t dt. Integrating the piecewise derivative by parts shows the
/// value is exactly 2 pi for every xi > 0, so the quadrature result
/// doubles as an accuracy check.
pub fn integral_f_xi(xi: f64) -> f64 {
    2.0 * PI * radial_integral(xi, |_| 1.0)
}

/// Weighted variant int_G f_xi(ell(g)) ||g||^{-alpha} dg, which decays
/// like xi^{-alpha}.
pub fn integral_f_xi_weighted(xi: f64, alpha: f64) -> f64 {
    2.0 * PI * radial_integral(xi, |t| (2.0 * t.cosh()).powf(-alpha / 2.0))
}

/// int_0^inf f_xi(t) w(t) sinh t dt, split at the breakpoints. On
/// [ell1, ell2] the substitution sinh t = xi cosh u removes the
/// infinite derivative of f_xi at ell1.
fn radial_integral<W: Fn(f64) -> f64>(xi: f64, w: W) -> f64 {
    let bp = breakpoints(xi);
    let tol = 1e-12;
    let top = integrate_adaptive(
        |t| 2.0 * t / (xi * xi) * w(t) * t.sinh(),
        0.0,
        bp.ell1,
        tol,
    );
    // u ranges over [0, arcsinh(xi/2)]: sinh(ell2) = xi cosh(arcsinh(xi/2)).
    let u2 = (xi / 2.0).asinh();
    let mid = integrate_adaptive(
        |u| {
            let sh = xi * u.cosh();
            let ch = (1.0 + sh * sh).sqrt();
            let t = sh.asinh();
            let root = xi * u.sinh();
            let f = 2.0 / (xi * xi) * (t + (1.0 + xi * xi).ln() - 2.0 * (ch + root).ln());
            f * w(t) * sh * (xi * u.sinh() / ch)
        },
        0.0,
        u2,
        tol,
    );
    let tail = integrate_adaptive(
        |t| f_xi(xi, t).value * w(t) * t.sinh(),
        bp.ell2,
        bp.ell2 + 60.0,
        tol,
    );
    top + mid + tail
}
