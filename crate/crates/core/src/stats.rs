//! Small numeric helpers: binomial tails, medians and quantiles.

fn ln_choose(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| (f64::from(n - k + i) / f64::from(i)).ln()).sum()
}

/// `P[X >= k]` for `X ~ Binomial(n, p)`, summed term by term from `k`.
pub fn binomial_upper_tail(k: u32, n: u32, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let ratio = p / (1.0 - p);
    let mut term = (ln_choose(n, k) + f64::from(k) * p.ln() + f64::from(n - k) * (1.0 - p).ln()).exp();
    let mut sum = 0.0;
    for j in k..=n {
        sum += term;
        term *= f64::from(n - j) / f64::from(j + 1) * ratio;
    }
    sum.min(1.0)
}

/// `P[X <= k]` for `X ~ Binomial(n, p)`.
pub fn binomial_lower_tail(k: u32, n: u32, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    // X <= k  <=>  n - X >= n - k, and n - X ~ Binomial(n, 1 - p)
    binomial_upper_tail(n - k, n, 1.0 - p)
}

/// Median with the mean of the two middle values for even lengths.
/// `None` for an empty input.
pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Linearly interpolated quantile (the common "type 7" definition).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tails_at_known_values() {
        assert_eq!(binomial_upper_tail(20, 20, 0.5), 0.5f64.powi(20));
        assert!((binomial_lower_tail(0, 20, 0.5) - 0.5f64.powi(20)).abs() < 1e-21);
        assert!((binomial_upper_tail(1, 1, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(binomial_upper_tail(0, 5, 0.5), 1.0);
        assert_eq!(binomial_lower_tail(5, 5, 0.5), 1.0);
        // P[X >= 2] for Bin(3, 0.5) = 4/8
        assert!((binomial_upper_tail(2, 3, 0.5) - 0.5).abs() < 1e-15);
        // large n stays finite and sums to one with the complementary tail
        let up = binomial_upper_tail(501, 1000, 0.5);
        let low = binomial_lower_tail(500, 1000, 0.5);
        assert!((up + low - 1.0).abs() < 1e-10);
    }

    #[test]
    fn medians_and_quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), Some(2.0));
        assert_eq!(quantile(&[7.0], 0.75), Some(7.0));
    }
}
