//! Empirical pair correlation of ray angles: the pair count N_Q(xi), the
//! normalized R_2 curve, a finite-difference density estimate, and the
//! interval-restricted ("part of the sky") variant.
//!
//! Pairs are counted over the circle R/2piZ with a sort + sliding window;
//! the wraparound is handled by replaying a prefix shifted by 2pi. All
//! grid points are filled in one pass by binning each pair's gap into the
//! smallest window that contains it.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::hyperbolic::{angle_of, wrap_angle};
use crate::lattice::BallEnumeration;
use crate::Error;

/// Grid for quantizing orbit points; exact for integer lattices and far
/// below the minimal separation of distinct orbit points at desk scales.
pub const POINT_GRID: f64 = 1e-9;

/// One enumerated group element reduced to what the statistics need.
#[derive(Clone, Copy, Debug)]
pub struct AngleRecord {
    /// Ray angle in [-pi, pi).
    pub theta: f64,
    pub norm_sq: f64,
    /// Quantized (x, y) of gamma.i, for same-point detection.
    pub point_key: (i64, i64),
}

/// Build records from an enumeration, dropping stabilizer elements
/// (gamma.i = i never enters a pair).
pub fn records_from_enumeration(ball: &BallEnumeration) -> Vec<AngleRecord> {
    ball.elements
        .iter()
        .filter_map(|g| {
            let theta = angle_of(g)?;
            let z = g.apply_i();
            Some(AngleRecord {
                theta,
                norm_sq: g.norm_sq(),
                point_key: (
                    (z.x / POINT_GRID).round() as i64,
                    (z.y / POINT_GRID).round() as i64,
                ),
            })
        })
        .collect()
}

/// Empirical correlation data on a xi grid.
#[derive(Clone, Debug)]
pub struct CorrelationCurve {
    pub q: f64,
    pub xi_grid: Vec<f64>,
    /// Halved pair counts (unordered pairs of distinct orbit points).
    pub n_q: Vec<f64>,
    pub r2_emp: Vec<f64>,
    /// Centered finite differences of r2_emp on the grid.
    pub g2_emp: Vec<f64>,
    pub interval: Option<(f64, f64)>,
}

fn check_grid(xi_grid: &[f64]) -> Result<(), Error> {
    if xi_grid.is_empty() || xi_grid.windows(2).any(|w| w[1] <= w[0]) || xi_grid[0] <= 0.0 {
        return Err(Error::BadGrid);
    }
    Ok(())
}

/// Sorted angles plus a 2pi-shifted prefix covering windows up to w_max.
struct SortedAngles {
    /// (theta, point_key) sorted; length n + wrap prefix.
    ext: Vec<(f64, (i64, i64))>,
    n: usize,
}

fn sort_with_wraparound(records: &[AngleRecord], w_max: f64) -> SortedAngles {
    let mut base: Vec<(f64, (i64, i64))> = records
        .iter()
        .map(|r| (wrap_angle(r.theta), r.point_key))
        .collect();
    base.par_sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let n = base.len();
    let mut ext = base.clone();
    if n > 0 {
        let lo = base[0].0;
        for &(theta, key) in &base {
            if theta - lo < w_max {
                ext.push((theta + 2.0 * PI, key));
            } else {
                break;
            }
        }
    }
    SortedAngles { ext, n }
}

/// Count unordered pairs of records with distinct point keys whose circle
/// gap is below 2 * V * xi / Q^2. Equals half the ordered pair count.
pub fn pair_count(records: &[AngleRecord], q: f64, xi: f64, covolume: f64) -> f64 {
    if xi <= 0.0 {
        return 0.0;
    }
    let w = 2.0 * covolume * xi / (q * q);
    if w >= PI {
        return all_distinct_pairs(records) as f64;
    }
    let sorted = sort_with_wraparound(records, w);
    let mut count: u64 = 0;
    for i in 0..sorted.n {
        let (theta_i, key_i) = sorted.ext[i];
        for j in (i + 1)..sorted.ext.len() {
            let (theta_j, key_j) = sorted.ext[j];
            if theta_j - theta_i >= w {
                break;
            }
            if key_i != key_j {
                count += 1;
            }
        }
    }
    count as f64
}

fn all_distinct_pairs(records: &[AngleRecord]) -> u64 {
    use std::collections::HashMap;
    let n = records.len() as u64;
    let mut groups: HashMap<(i64, i64), u64> = HashMap::new();
    for r in records {
        *groups.entry(r.point_key).or_insert(0) += 1;
    }
    let same: u64 = groups.values().map(|&m| m * (m - 1) / 2).sum();
    n * (n - 1) / 2 - same
}

/// Per-grid-point pair counts in one pass: each pair's gap is binned into
/// the first grid window that contains it, then a cumulative sum gives
/// N_Q at every xi. Deterministic regardless of thread count (integer
/// histograms merged by addition).
fn binned_counts(records: &[AngleRecord], q: f64, xi_grid: &[f64], covolume: f64) -> Vec<u64> {
    let w_of = |xi: f64| 2.0 * covolume * xi / (q * q);
    let w_max = w_of(*xi_grid.last().unwrap()).min(PI);
    let sorted = sort_with_wraparound(records, w_max);
    let bins = xi_grid.len();
    let hist = (0..sorted.n)
        .into_par_iter()
        .fold(
            || vec![0u64; bins],
            |mut hist, i| {
                let (theta_i, key_i) = sorted.ext[i];
                for j in (i + 1)..sorted.ext.len() {
                    let (theta_j, key_j) = sorted.ext[j];
                    let gap = theta_j - theta_i;
                    if gap >= w_max {
                        break;
                    }
                    if key_i == key_j {
                        continue;
                    }
                    // Smallest grid xi with gap < w(xi), i.e. xi > gap Q^2 / (2V).
                    let threshold = gap * q * q / (2.0 * covolume);
                    let idx = xi_grid.partition_point(|&x| x <= threshold);
                    if idx < bins {
                        hist[idx] += 1;
                    }
                }
                hist
            },
        )
        .reduce(
            || vec![0u64; bins],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let mut cum = 0u64;
    hist.into_iter()
        .map(|h| {
            cum += h;
            cum
        })
        .collect()
}

fn finite_difference_density(xi_grid: &[f64], r2: &[f64]) -> Vec<f64> {
    let n = xi_grid.len();
    (0..n)
        .map(|j| {
            let (lo, hi) = if n == 1 {
                return 0.0;
            } else if j == 0 {
                (0, 1)
            } else if j == n - 1 {
                (n - 2, n - 1)
            } else {
                (j - 1, j + 1)
            };
            (r2[hi] - r2[lo]) / (xi_grid[hi] - xi_grid[lo])
        })
        .collect()
}

/// The empirical R_2 curve: R2[j] = V * N_Q(xi_j) / (pi Q^2), with a
/// finite-difference density estimate.
pub fn empirical_r2(
    records: &[AngleRecord],
    q: f64,
    xi_grid: &[f64],
    covolume: f64,
) -> Result<CorrelationCurve, Error> {
    check_grid(xi_grid)?;
    let counts = binned_counts(records, q, xi_grid, covolume);
    let n_q: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let scale = covolume / (PI * q * q);
    let r2_emp: Vec<f64> = n_q.iter().map(|&c| scale * c).collect();
    let g2_emp = finite_difference_density(xi_grid, &r2_emp);
    Ok(CorrelationCurve {
        q,
        xi_grid: xi_grid.to_vec(),
        n_q,
        r2_emp,
        g2_emp,
        interval: None,
    })
}

/// Pair correlation restricted to the sub-arc [lo, hi): only pairs with
/// both angles inside count, rescaled by 2pi / |I|. A length of exactly
/// 2pi denotes the full circle.
pub fn restricted_r2(
    records: &[AngleRecord],
    q: f64,
    xi_grid: &[f64],
    covolume: f64,
    interval: (f64, f64),
) -> Result<CorrelationCurve, Error> {
    check_grid(xi_grid)?;
    let (lo, hi) = interval;
    let len = hi - lo;
    if !(len > 0.0) || len > 2.0 * PI + 1e-12 {
        return Err(Error::EmptyInterval { lo, hi });
    }
    let full = (len - 2.0 * PI).abs() <= 1e-12;
    let (wlo, whi) = (wrap_angle(lo), wrap_angle(hi));
    let contains = |theta: f64| -> bool {
        if full {
            true
        } else if wlo <= whi {
            (wlo..whi).contains(&theta)
        } else {
            theta >= wlo || theta < whi
        }
    };
    let subset: Vec<AngleRecord> = records
        .iter()
        .copied()
        .filter(|r| contains(wrap_angle(r.theta)))
        .collect();
    let counts = binned_counts(&subset, q, xi_grid, covolume);
    let n_q: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let scale = (2.0 * PI / len) * covolume / (PI * q * q);
    let r2_emp: Vec<f64> = n_q.iter().map(|&c| scale * c).collect();
    let g2_emp = finite_difference_density(xi_grid, &r2_emp);
    Ok(CorrelationCurve {
        q,
        xi_grid: xi_grid.to_vec(),
        n_q,
        r2_emp,
        g2_emp,
        interval: Some((lo, hi)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::circle_dist;
    use rand::{Rng, SeedableRng};

    fn rec(theta: f64, key: i64) -> AngleRecord {
        AngleRecord {
            theta,
            norm_sq: 2.0,
            point_key: (key, key),
        }
    }

    /// O(n^2) oracle over circle distances.
    fn brute_count(records: &[AngleRecord], q: f64, xi: f64, v: f64) -> u64 {
        let w = 2.0 * v * xi / (q * q);
        let mut count = 0;
        for i in 0..records.len() {
            for j in (i + 1)..records.len() {
                if records[i].point_key != records[j].point_key
                    && circle_dist(records[i].theta, records[j].theta) < w
                {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn antipodal_pair_not_counted() {
        let records = [rec(0.0, 0), rec(PI - 1e-9, 1)];
        // Window below pi.
        assert_eq!(pair_count(&records, 2.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn identical_angles_distinct_points_all_pair() {
        let n = 17;
        let records: Vec<AngleRecord> = (0..n).map(|k| rec(0.4, k)).collect();
        let expect = (n * (n - 1) / 2) as f64;
        assert_eq!(pair_count(&records, 100.0, 0.1, 1.0), expect);
    }

    #[test]
    fn nonpositive_xi_counts_nothing() {
        let records = [rec(0.0, 0), rec(0.0, 1)];
        assert_eq!(pair_count(&records, 2.0, 0.0, 1.0), 0.0);
        assert_eq!(pair_count(&records, 2.0, -1.0, 1.0), 0.0);
    }

    #[test]
    fn sliding_window_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for trial in 0..200 {
            let n = rng.gen_range(2..80);
            let records: Vec<AngleRecord> = (0..n)
                .map(|k| rec(rng.gen_range(-PI..PI), k % 11))
                .collect();
            let q = rng.gen_range(1.5..10.0);
            let xi = rng.gen_range(0.01..3.0);
            let v = rng.gen_range(0.2..2.0);
            let fast = pair_count(&records, q, xi, v);
            let slow = brute_count(&records, q, xi, v) as f64;
            assert_eq!(fast, slow, "trial {trial}");
        }
    }

    #[test]
    fn larger_sliding_window_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let records: Vec<AngleRecord> = (0..1000)
            .map(|k| rec(rng.gen_range(-PI..PI), k))
            .collect();
        let (q, v) = (30.0, 1.0);
        for &xi in &[0.5, 5.0, 60.0] {
            assert_eq!(
                pair_count(&records, q, xi, v),
                brute_count(&records, q, xi, v) as f64
            );
        }
    }

    #[test]
    fn curve_counts_agree_with_pair_count() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let records: Vec<AngleRecord> = (0..500)
            .map(|k| rec(rng.gen_range(-PI..PI), k))
            .collect();
        let grid: Vec<f64> = (1..=40).map(|j| 0.1 * j as f64).collect();
        let curve = empirical_r2(&records, 12.0, &grid, 1.0).unwrap();
        for (j, &xi) in grid.iter().enumerate() {
            assert_eq!(curve.n_q[j], pair_count(&records, 12.0, xi, 1.0));
        }
        // Monotone in xi.
        assert!(curve.n_q.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn empty_records_give_zero_curve() {
        let grid = [0.5, 1.0];
        let curve = empirical_r2(&[], 10.0, &grid, 1.0).unwrap();
        assert!(curve.r2_emp.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bad_grid_rejected() {
        let records = [rec(0.0, 0)];
        assert!(empirical_r2(&records, 2.0, &[1.0, 1.0], 1.0).is_err());
        assert!(empirical_r2(&records, 2.0, &[], 1.0).is_err());
        assert!(empirical_r2(&records, 2.0, &[-1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn statistics_invariant_under_rotation_and_reflection() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        let records: Vec<AngleRecord> = (0..300)
            .map(|k| rec(rng.gen_range(-PI..PI), k))
            .collect();
        let grid: Vec<f64> = (1..=20).map(|j| 0.2 * j as f64).collect();
        let base = empirical_r2(&records, 9.0, &grid, 1.0).unwrap();
        for transform in [0, 1] {
            let moved: Vec<AngleRecord> = records
                .iter()
                .map(|r| AngleRecord {
                    theta: if transform == 0 {
                        wrap_angle(r.theta + 1.2345)
                    } else {
                        wrap_angle(-r.theta)
                    },
                    ..*r
                })
                .collect();
            let curve = empirical_r2(&moved, 9.0, &grid, 1.0).unwrap();
            assert_eq!(curve.n_q, base.n_q);
        }
    }

    #[test]
    fn stabilizer_multiplicity_scales_pairs_quadratically() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let records: Vec<AngleRecord> = (0..100)
            .map(|k| rec(rng.gen_range(-PI..PI), k))
            .collect();
        let m = 2; // |Gamma_omega|
        let doubled: Vec<AngleRecord> = records
            .iter()
            .flat_map(|r| std::iter::repeat(*r).take(m))
            .collect();
        let single = pair_count(&records, 8.0, 1.0, 1.0);
        let multi = pair_count(&doubled, 8.0, 1.0, 1.0);
        assert_eq!(multi, (m * m) as f64 * single);
    }

    #[test]
    fn full_circle_restriction_is_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        let records: Vec<AngleRecord> = (0..200)
            .map(|k| rec(rng.gen_range(-PI..PI), k))
            .collect();
        let grid: Vec<f64> = (1..=10).map(|j| 0.3 * j as f64).collect();
        let full = restricted_r2(&records, 9.0, &grid, 1.0, (0.0, 2.0 * PI)).unwrap();
        let plain = empirical_r2(&records, 9.0, &grid, 1.0).unwrap();
        assert_eq!(full.n_q, plain.n_q);
        for (a, b) in full.r2_emp.iter().zip(&plain.r2_emp) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn empty_interval_rejected() {
        let records = [rec(0.0, 0)];
        assert!(restricted_r2(&records, 2.0, &[1.0], 1.0, (0.3, 0.3)).is_err());
        assert!(restricted_r2(&records, 2.0, &[1.0], 1.0, (1.0, 0.5)).is_err());
    }
}
