//! Small numeric helpers shared across modules.

/// Empirical quantile of already-sorted data, linear interpolation between
/// adjacent order statistics: position `h = (n - 1) q`.
///
/// `sorted` must be non-empty and ascending; `q` is clamped to `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let q = q.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Sort a copy and take several quantiles.
pub fn quantiles(values: &[f64], qs: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    qs.iter().map(|&q| quantile_sorted(&sorted, q)).collect()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divisor n), two-pass.
pub fn population_variance(values: &[f64]) -> f64 {
    if let Some(&first) = values.first() {
        if values.iter().all(|v| *v == first) {
            return 0.0;
        }
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolated_quantiles() {
        let v: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        assert!((quantile_sorted(&v, 0.1) - 0.19).abs() < 1e-12);
        assert!((quantile_sorted(&v, 0.9) - 0.91).abs() < 1e-12);
        assert_eq!(quantile_sorted(&v, 0.0), 0.1);
        assert_eq!(quantile_sorted(&v, 1.0), 1.0);
        assert_eq!(quantile_sorted(&[3.0], 0.3), 3.0);
    }

    #[test]
    fn variance_of_two_point_set() {
        assert_eq!(population_variance(&[0.0, 1.0, 0.0, 1.0]), 0.25);
    }
}
