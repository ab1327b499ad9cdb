//! Robust aggregate statistics for evaluation results.

use crate::rng::RngKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
}

/// Mean computed as `pivot + Σ(x − pivot)/n`, which is exact for constant
/// input.
fn pivot_mean(values: &[f64]) -> f64 {
    let pivot = values[values.len() / 2];
    let dev: f64 = values.iter().map(|v| v - pivot).sum();
    pivot + dev / values.len() as f64
}

pub fn mean(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    Ok(pivot_mean(values))
}

/// Interquartile mean: drop `floor(n/4)` values from each end of the sorted
/// sample and average the rest. For `n < 4` nothing is dropped.
pub fn iqm(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let trim = v.len() / 4;
    Ok(pivot_mean(&v[trim..v.len() - trim]))
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi || sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    let t = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * t
}

/// Percentile bootstrap interval of `statistic` at confidence `level`.
pub fn bootstrap_ci(
    values: &[f64],
    resamples: usize,
    level: f64,
    statistic: impl Fn(&[f64]) -> f64,
    rng: RngKey,
) -> Result<(f64, f64), StatsError> {
    if values.is_empty() || resamples == 0 {
        return Err(StatsError::EmptyInput);
    }
    let mut s = rng.stream();
    let n = values.len();
    let mut buf = vec![0.0; n];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = values[s.index(n)];
            }
            statistic(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((percentile_sorted(&stats, alpha), percentile_sorted(&stats, 1.0 - alpha)))
}

/// IQM bootstrap with 1000 resamples at 95%.
pub fn iqm_ci(values: &[f64], rng: RngKey) -> Result<(f64, f64), StatsError> {
    bootstrap_ci(values, 1000, 0.95, |v| iqm(v).expect("non-empty"), rng)
}

/// Fraction of scores strictly above each threshold.
pub fn performance_profile(scores: &[f64], taus: &[f64]) -> Vec<f64> {
    taus.iter()
        .map(|&t| {
            if scores.is_empty() {
                0.0
            } else {
                scores.iter().filter(|&&s| s > t).count() as f64 / scores.len() as f64
            }
        })
        .collect()
}

/// Mean shortfall below 1 of normalized scores.
pub fn optimality_gap(normalized: &[f64]) -> f64 {
    if normalized.is_empty() {
        return 0.0;
    }
    normalized.iter().map(|s| (1.0 - s).max(0.0)).sum::<f64>() / normalized.len() as f64
}

/// Mann–Whitney probability that a draw from `x` beats one from `y`, ties
/// counting one half.
pub fn prob_improvement(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut twice = 0u64;
    for a in x {
        for b in y {
            twice += match a.partial_cmp(b) {
                Some(std::cmp::Ordering::Greater) => 2,
                Some(std::cmp::Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    Ok(twice as f64 / (2 * x.len() * y.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iqm_examples() {
        assert_eq!(iqm(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap(), 4.5);
        assert_eq!(iqm(&[0.0, 0.0, 0.0, 100.0]).unwrap(), 0.0);
        assert_eq!(iqm(&[0.1; 7]).unwrap(), 0.1);
        assert_eq!(iqm(&[]), Err(StatsError::EmptyInput));
        assert_eq!(iqm(&[1.0, 2.0]).unwrap(), 1.5);
    }

    #[test]
    fn bootstrap_constant() {
        let ci = iqm_ci(&[0.3; 20], RngKey::from_seed(1)).unwrap();
        assert_eq!(ci, (0.3, 0.3));
    }

    #[test]
    fn profile_examples() {
        assert_eq!(performance_profile(&[0.2, 0.8], &[0.5]), vec![0.5]);
        assert_eq!(performance_profile(&[0.2, 0.8], &[0.0, 1.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn gap_examples() {
        assert_eq!(optimality_gap(&[1.0, 1.0]), 0.0);
        assert_eq!(optimality_gap(&[0.0, 0.0]), 1.0);
        assert_eq!(optimality_gap(&[0.5, 1.0]), 0.25);
    }

    #[test]
    fn improvement_examples() {
        assert_eq!(prob_improvement(&[1.0, 1.0], &[0.0]).unwrap(), 1.0);
        assert_eq!(prob_improvement(&[1.0, 3.0], &[2.0]).unwrap(), 0.5);
        let x = [0.3, 0.1, 0.3, 0.9];
        assert_eq!(prob_improvement(&x, &x).unwrap(), 0.5);
    }
}
