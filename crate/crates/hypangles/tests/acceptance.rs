//! End-to-end acceptance checks. Each test prints one summary line;
//! run with `--nocapture` to see them.

use std::f64::consts::PI;
use std::time::Instant;

use once_cell::sync::Lazy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hypangles::correlation::{empirical_r2, pair_count, records_from_enumeration, restricted_r2, AngleRecord};
use hypangles::density::{breakpoints, f_xi, g2_theoretical, integral_f_xi, r2_theoretical};
use hypangles::hyperbolic::{
    angle_of, circle_dist, decompose_cartan, CartanCoords, GroupElement, HPoint,
};
use hypangles::lattice::{BallEnumeration, LatticeSpec};
use hypangles::volume::{f_m, interval_endpoints, mc_volume, RegionSpec};

static PSL2Z: Lazy<LatticeSpec> = Lazy::new(LatticeSpec::psl2z);
static BALL_500: Lazy<BallEnumeration> = Lazy::new(|| PSL2Z.enumerate(500.0, 4.0).unwrap());
static BALL_1000: Lazy<BallEnumeration> = Lazy::new(|| PSL2Z.enumerate(1000.0, 4.0).unwrap());
static THEORY_BALL: Lazy<BallEnumeration> = Lazy::new(|| PSL2Z.enumerate(200.0, 4.0).unwrap());

fn grid_0_4() -> Vec<f64> {
    (1..=80).map(|k| 0.05 * k as f64).collect()
}

#[test]
fn criterion_1_counting_asymptotic() {
    let start = Instant::now();
    let mut devs = Vec::new();
    for q in [200.0, 500.0, 1000.0] {
        let count = if q == 500.0 {
            BALL_500.count()
        } else if q == 1000.0 {
            BALL_1000.count()
        } else {
            PSL2Z.enumerate(q, 4.0).unwrap().count()
        };
        let ratio = count as f64 * PSL2Z.covolume / (PI * q * q);
        devs.push((ratio - 1.0).abs());
    }
    assert!(devs[0] <= 0.05, "deviation at Q=200: {}", devs[0]);
    assert!(devs[1] < devs[0] && devs[2] < devs[1], "not decreasing: {devs:?}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() <= 60, "took {elapsed:?}");

    match std::env::var("HYPANGLES_OCTAGON_GENERATORS") {
        Ok(path) => {
            let octagon = LatticeSpec::from_json_file(path.as_ref()).unwrap();
            let count = octagon.enumerate(2000.0, 4.0).unwrap().count();
            assert_eq!(count, 2_000_914);
            println!("criterion 1: pass (deviations {devs:?}; octagon count {count})");
        }
        Err(_) => {
            println!(
                "criterion 1: pass (deviations {devs:?}; octagon clause skipped, generators not sourced)"
            );
        }
    }
}

fn max_rel_gap(q: f64, ball: &BallEnumeration, r2_theory: &[f64], grid: &[f64]) -> f64 {
    let records = records_from_enumeration(ball);
    let curve = empirical_r2(&records, q, grid, PSL2Z.covolume).unwrap();
    curve
        .r2_emp
        .iter()
        .zip(r2_theory)
        .map(|(e, t)| (e - t).abs() / t.max(0.1))
        .fold(0.0, f64::max)
}

#[test]
fn criterion_2_pair_correlation_reproduction() {
    let start = Instant::now();
    let grid = grid_0_4();
    let theory = r2_theoretical(&grid, &THEORY_BALL, &PSL2Z).unwrap();
    let gap_500 = max_rel_gap(500.0, &BALL_500, &theory, &grid);
    let gap_1000 = max_rel_gap(1000.0, &BALL_1000, &theory, &grid);
    assert!(gap_500 <= 0.10, "Q=500 max relative gap {gap_500}");
    assert!(gap_1000 <= gap_500, "no convergence: {gap_1000} vs {gap_500}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() <= 300, "took {elapsed:?}");
    println!("criterion 2: pass (gaps {gap_500:.4} at Q=500, {gap_1000:.4} at Q=1000)");
}

#[test]
fn criterion_3_fxi_continuity() {
    let eps = 1e-6_f64;
    let mut worst_l1 = 0.0_f64;
    for xi in [0.5, 1.0, 2.0, 5.0] {
        let bp = breakpoints(xi);
        let at = |ell: f64| f_xi(xi, ell).value;
        // ell2: absolute budget 1e-3 (the derivative jump there is finite).
        for side in [-1.0, 1.0] {
            let gap = (at(bp.ell2 + side * eps) - at(bp.ell2)).abs();
            assert!(gap <= 1e-3, "xi={xi} ell2 gap {gap}");
        }
        // ell1: the stated budget 1e-2 sqrt(eps)/xi^2. The true local
        // modulus is ~ 4 sqrt(2 xi cosh(ell1)) sqrt(eps)/xi^2, i.e. an
        // O(1) constant instead of 1e-2, so this assertion fails; the
        // square-root regularity itself is covered by the library test
        // with an honest constant.
        for side in [-1.0, 1.0] {
            let gap = (at(bp.ell1 + side * eps) - at(bp.ell1)).abs();
            worst_l1 = worst_l1.max(gap * xi * xi / eps.sqrt());
        }
    }
    let budget = 1e-2;
    if worst_l1 <= budget {
        println!("criterion 3: pass");
    } else {
        println!(
            "criterion 3: FAIL (expected) - measured sqrt-modulus constant {worst_l1:.2} exceeds the stated 1e-2"
        );
    }
    assert!(
        worst_l1 <= budget,
        "ell1 continuity modulus {worst_l1:.3} > 1e-2 (criterion unattainable as stated)"
    );
}

#[test]
fn criterion_4_derivative_identity() {
    // 5 matrices x 4 xi values = 20 pairs covering all three cases,
    // each xi at least 0.05 away from both B and C.
    let ms = [
        GroupElement::from_ints(1, 1, 0, 1).unwrap(),
        GroupElement::from_ints(1, 0, 1, 1).unwrap(),
        GroupElement::from_ints(2, 1, 1, 1).unwrap(),
        GroupElement::from_ints(3, 2, 1, 1).unwrap(),
        GroupElement::from_ints(2, 3, 1, 2).unwrap(),
    ];
    for m in &ms {
        let ell = (m.norm_sq() / 2.0).acosh();
        let (b, c) = (ell.sinh(), 2.0 * (ell / 2.0).sinh());
        assert!(b - c > 0.1, "need room for the middle case");
        let xis = [
            0.4 * (c - 0.05),        // case I (xi < C)
            0.8 * (c - 0.05),        // case I again
            0.5 * (c + b),           // case II (C < xi < B)
            b + 0.3,                 // case III (xi > B)
        ];
        for xi in xis {
            assert!(xi > 0.05 && (xi - b).abs() >= 0.05 && (xi - c).abs() >= 0.05);
            let fm_at = |x: f64| f_m(&RegionSpec::new(m.clone(), 10.0, x).unwrap());
            // Richardson-extrapolated central differences (h, h/2).
            let h = 1e-3;
            let d_h = (fm_at(xi + h) - fm_at(xi - h)) / (2.0 * h);
            let d_h2 = (fm_at(xi + h / 2.0) - fm_at(xi - h / 2.0)) / h;
            let fd = (4.0 * d_h2 - d_h) / 3.0;
            let f = f_xi(xi, ell).value;
            assert!(
                (fd - f).abs() <= 1e-6 * f,
                "M={:?} xi={xi}: {fd} vs {f}",
                m.exact_entries()
            );
        }
    }
    println!("criterion 4: pass (20 pairs)");
}

#[test]
fn criterion_5_volume_oracle() {
    let start = Instant::now();
    let m = GroupElement::from_ints(1, 1, 0, 1).unwrap();
    let seed = 12345;
    // The headline check at Q = 100 with 1e7 samples.
    let region = RegionSpec::new(m.clone(), 100.0, 1.0).unwrap();
    let closed = 100.0 * 100.0 * f_m(&region);
    let est = mc_volume(&region, 10_000_000, seed);
    let budget = 3.0 * est.stderr + 5.0 * 100.0_f64.powf(2.0 / 3.0) * m.norm_sq();
    assert!(
        (est.mean - closed).abs() <= budget,
        "{} vs {closed} (budget {budget})",
        est.mean
    );
    // Trend in Q: samples grow with Q so the Monte Carlo error stays
    // subordinate to the deterministic gap being measured.
    let mut gaps = Vec::new();
    for (q, n) in [(50.0, 1_000_000u64), (100.0, 10_000_000), (200.0, 100_000_000)] {
        let region = RegionSpec::new(m.clone(), q, 1.0).unwrap();
        let closed = q * q * f_m(&region);
        let est = mc_volume(&region, n, seed);
        gaps.push((est.mean - closed).abs() / closed);
    }
    assert!(
        gaps[1] < gaps[0] && gaps[2] < gaps[1],
        "relative gaps not shrinking: {gaps:?}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() <= 120, "took {elapsed:?}");
    println!("criterion 5: pass (relative gaps {gaps:?})");
}

#[test]
fn criterion_6_haar_integral() {
    let dev10 = (integral_f_xi(10.0) - 2.0 * PI).abs();
    let dev100 = (integral_f_xi(100.0) - 2.0 * PI).abs();
    assert!(dev10 <= 0.07, "{dev10}");
    // The radial integral is exactly 2 pi for every xi (integration by parts of the
    // piecewise derivative), so both deviations are pure roundoff; the rate comparison
    // carries a machine-precision floor and a direct absolute check
    // strictly stronger than the intended O(1/xi^2) statement.
    let floor = 64.0 * f64::EPSILON * 2.0 * PI;
    assert!(dev100 <= 0.02 * dev10 + floor, "{dev100} vs {dev10}");
    assert!(dev100 <= 1e-12);
    println!("criterion 6: pass (deviations {dev10:.2e}, {dev100:.2e})");
}

#[test]
fn criterion_7_g2_large_xi_tail() {
    let ball = PSL2Z.enumerate(400.0, 4.0).unwrap();
    let (g50, _) = g2_theoretical(50.0, &ball, &PSL2Z).unwrap();
    let (g100, _) = g2_theoretical(100.0, &ball, &PSL2Z).unwrap();
    let (d50, d100) = ((g50 - 1.0).abs(), (g100 - 1.0).abs());
    assert!(d50 <= 0.1, "{g50}");
    assert!(d100 <= d50, "{g100} vs {g50}");
    println!("criterion 7: pass (g2(50)={g50:.5}, g2(100)={g100:.5})");
}

fn random_cartan(rng: &mut impl Rng, t_max: f64) -> CartanCoords {
    CartanCoords {
        theta: rng.gen_range(-PI..PI),
        t: rng.gen_range(0.0..t_max),
        phi: rng.gen_range(-PI..PI),
    }
}

#[test]
fn criterion_8_property_suites() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);

    // Cartan round-trip and the Frobenius-vs-distance identity.
    for _ in 0..10_000 {
        let cart = random_cartan(&mut rng, 8.0);
        let g = cart.recompose();
        let back = decompose_cartan(&g);
        let again = back.recompose();
        for (p, q) in [(g.a, again.a), (g.b, again.b), (g.c, again.c), (g.d, again.d)] {
            assert!((p - q).abs() <= 1e-8 * (1.0 + p.abs()));
        }
        let z = g.apply_i();
        let lhs = g.norm_sq();
        let rhs = 2.0 * HPoint::i().cosh_dist(&z);
        assert!((lhs - rhs).abs() <= 1e-9 * lhs);
    }

    // Obtuse-angle bound: ||h|| <= ||g|| forces |theta_g - theta_gh| <= pi/2.
    for _ in 0..10_000 {
        let g = random_cartan(&mut rng, 6.0).recompose();
        let h = random_cartan(&mut rng, 6.0).recompose();
        let (big, small) = if g.norm_sq() >= h.norm_sq() { (g, h) } else { (h, g) };
        if let (Some(a), Some(b)) = (angle_of(&big), angle_of(&big.compose(&small))) {
            assert!(circle_dist(a, b) <= PI / 2.0 + 1e-9);
        }
    }

    // Sliding window equals the O(n^2) oracle on 200 random instances.
    for _ in 0..200 {
        let n = rng.gen_range(2..60);
        let records: Vec<AngleRecord> = (0..n)
            .map(|k| AngleRecord {
                theta: rng.gen_range(-PI..PI),
                norm_sq: 2.0,
                point_key: (k % 7, 0),
            })
            .collect();
        let (q, xi, v) = (
            rng.gen_range(2.0..8.0),
            rng.gen_range(0.05..2.0),
            rng.gen_range(0.3..1.5),
        );
        let w = 2.0 * v * xi / (q * q);
        let mut brute = 0u32;
        for i in 0..records.len() {
            for j in (i + 1)..records.len() {
                if records[i].point_key != records[j].point_key
                    && circle_dist(records[i].theta, records[j].theta) < w
                {
                    brute += 1;
                }
            }
        }
        assert_eq!(pair_count(&records, q, xi, v), brute as f64);
    }

    // lambda+- / alpha endpoint identities to 1e-10.
    for _ in 0..500 {
        let m = random_cartan(&mut rng, 4.0).recompose();
        if m.is_rotation() {
            continue;
        }
        let spec = RegionSpec::new(m, 10.0, rng.gen_range(0.05..3.0)).unwrap();
        let iv = interval_endpoints(&spec);
        for root in [iv.lambda_minus, iv.lambda_plus].into_iter().flatten() {
            if root.abs() <= 1.0 {
                let r = spec.b * (1.0 - root * root).sqrt() - spec.xi * (spec.a + spec.b * root);
                assert!(r.abs() <= 1e-10 * (1.0 + spec.b), "{r}");
            }
        }
        if let Some(alpha) = iv.alpha {
            assert!((spec.b * (1.0 - alpha * alpha).sqrt() - spec.xi).abs() <= 1e-10);
        }
    }

    // Restricted-interval curve within 15% of the unrestricted one at Q = 500.
    let records = records_from_enumeration(&BALL_500);
    let grid: Vec<f64> = (1..=8).map(|k| 0.5 * k as f64).collect();
    let full = empirical_r2(&records, 500.0, &grid, PSL2Z.covolume).unwrap();
    let half = restricted_r2(&records, 500.0, &grid, PSL2Z.covolume, (0.0, PI)).unwrap();
    for (f, h) in full.r2_emp.iter().zip(&half.r2_emp) {
        assert!((f - h).abs() <= 0.15 * f.max(0.1), "{f} vs {h}");
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    println!("criterion 8: pass ({elapsed:?})");
}
