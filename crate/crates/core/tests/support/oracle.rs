//! Brute-force Krippendorff's α by explicit enumeration of value pairs.
//!
//! Shares nothing with the coincidence-matrix implementation: observed
//! disagreement sums over every ordered pair of distinct positions inside
//! each unit, expected disagreement over every ordered pair of distinct
//! positions in the pooled pairable values.

#![allow(dead_code)]

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMetric {
    Nominal,
    Ordinal,
    Interval,
}

fn delta(metric: OracleMetric, pooled: &[u8], c: u8, k: u8) -> f64 {
    match metric {
        OracleMetric::Nominal => {
            if c == k {
                0.0
            } else {
                1.0
            }
        }
        OracleMetric::Interval => (c as f64 - k as f64).powi(2),
        OracleMetric::Ordinal => {
            if c == k {
                return 0.0;
            }
            let (lo, hi) = (c.min(k), c.max(k));
            let count = |g: u8| pooled.iter().filter(|&&v| v == g).count() as f64;
            let mut between = 0.0;
            for g in lo..=hi {
                between += count(g);
            }
            (between - (count(lo) + count(hi)) / 2.0).powi(2)
        }
    }
}

/// `None` when no unit has two values.
pub fn alpha(units: &[Vec<u8>], metric: OracleMetric) -> Option<f64> {
    let pairable: Vec<&Vec<u8>> = units.iter().filter(|u| u.len() >= 2).collect();
    let pooled: Vec<u8> = pairable.iter().flat_map(|u| u.iter().copied()).collect();
    let n = pooled.len();
    if n == 0 {
        return None;
    }

    let mut observed = 0.0;
    for unit in &pairable {
        let m = unit.len();
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    observed += delta(metric, &pooled, unit[i], unit[j]) / (m - 1) as f64;
                }
            }
        }
    }
    observed /= n as f64;

    let mut expected = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                expected += delta(metric, &pooled, pooled[i], pooled[j]);
            }
        }
    }
    expected /= (n * (n - 1)) as f64;

    if expected == 0.0 {
        return Some(1.0);
    }
    Some(1.0 - observed / expected)
}

/// Nominal α for two coders on fully paired data using only the two labels
/// `a` and `b`: `1 - (n-1) * disagreements / (n_a * n_b)`.
pub fn two_coder_binary_nominal(pairs: &[(u8, u8)], a: u8) -> f64 {
    let n = (2 * pairs.len()) as f64;
    let disagreements = pairs.iter().filter(|(x, y)| x != y).count() as f64;
    let n_a = pairs.iter().map(|(x, y)| (*x == a) as usize + (*y == a) as usize).sum::<usize>() as f64;
    let n_b = n - n_a;
    1.0 - (n - 1.0) * disagreements / (n_a * n_b)
}

pub fn close(actual: f64, expected: f64, rel: f64) -> bool {
    (actual - expected).abs() <= rel * expected.abs().max(1.0)
}
