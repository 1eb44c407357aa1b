//! Counting statistics: Poisson errors and first-order error propagation.
//!
//! All propagated uncertainties treat their inputs as independent.

use std::fmt;

use crate::coincidence::DelayHistogram;
use crate::error::{Error, Result};

/// A value with a one-standard-deviation uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountWithError {
    pub value: f64,
    pub sigma: f64,
}

impl CountWithError {
    pub fn new(value: f64, sigma: f64) -> Self {
        CountWithError { value, sigma }
    }

    /// A raw Poisson count, `N ± √N`.
    pub fn count(n: u64) -> Self {
        let v = n as f64;
        CountWithError { value: v, sigma: v.sqrt() }
    }

    pub fn zero() -> Self {
        CountWithError { value: 0.0, sigma: 0.0 }
    }
}

impl fmt::Display for CountWithError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4e} ± {:.2e}", self.value, self.sigma)
    }
}

/// Mean off-peak count per `window_width` slice of a delay histogram.
///
/// Bins that overlap `peak_exclusion` are skipped. The total off-peak count
/// `S` over an off-peak span `W` gives `S·w/W ± √S·w/W`.
pub fn estimate_noise(hist: &DelayHistogram, peak_exclusion: (i64, i64), window_width: i64) -> Result<CountWithError> {
    let (ex_lo, ex_hi) = peak_exclusion;
    if window_width <= 0 {
        return Err(Error::invalid("window_width", "must be > 0"));
    }
    if ex_lo > ex_hi || ex_lo < hist.min_delay || ex_hi > hist.max_delay {
        return Err(Error::invalid(
            "peak_exclusion",
            format!(
                "[{ex_lo}, {ex_hi}) must lie inside the histogram range [{}, {})",
                hist.min_delay, hist.max_delay
            ),
        ));
    }
    let (mut total, mut bins) = (0u64, 0u64);
    for (i, &c) in hist.counts.iter().enumerate() {
        let start = hist.bin_start(i);
        let end = start + hist.bin_width;
        if end <= ex_lo || start >= ex_hi {
            total += c;
            bins += 1;
        }
    }
    if bins == 0 {
        return Err(Error::InsufficientData("no histogram bins outside the peak exclusion".into()));
    }
    let scale = window_width as f64 / (bins as f64 * hist.bin_width as f64);
    Ok(CountWithError::new(total as f64 * scale, (total as f64).sqrt() * scale))
}

/// `x / y` with relative errors added in quadrature.
pub fn conditional_probability(numerator: CountWithError, denominator: CountWithError) -> Result<CountWithError> {
    let (x, y) = (numerator, denominator);
    if y.value == 0.0 {
        return Err(Error::DivisionByZero("conditional_probability"));
    }
    let value = x.value / y.value;
    let sigma = ((x.sigma / y.value).powi(2) + (x.value * y.sigma / (y.value * y.value)).powi(2)).sqrt();
    Ok(CountWithError::new(value, sigma))
}

/// `P_A · P_B`, the coincidence probability expected for uncorrelated arms.
pub fn independence_product(p_a: CountWithError, p_b: CountWithError) -> CountWithError {
    let value = p_a.value * p_b.value;
    let sigma = ((p_b.value * p_a.sigma).powi(2) + (p_a.value * p_b.sigma).powi(2)).sqrt();
    CountWithError::new(value, sigma)
}

/// Accidental double-click probability from noise: `P_N·P_A + P_N·P_B`.
pub fn accidental_prediction(p_n: CountWithError, p_a: CountWithError, p_b: CountWithError) -> CountWithError {
    let arms = p_a.value + p_b.value;
    let value = p_n.value * arms;
    let sigma = ((arms * p_n.sigma).powi(2) + (p_n.value * p_a.sigma).powi(2) + (p_n.value * p_b.sigma).powi(2)).sqrt();
    CountWithError::new(value, sigma)
}

/// `P_AB / (P_A·P_B)`; 1 for uncorrelated arms, 0 for perfect antibunching.
pub fn antibunching_ratio(p_ab: CountWithError, product: CountWithError) -> Result<CountWithError> {
    if product.value == 0.0 {
        return Err(Error::DivisionByZero("antibunching_ratio"));
    }
    conditional_probability(p_ab, product)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn flat(per_bin: u64, bins: usize) -> DelayHistogram {
        let mut h = DelayHistogram::new(50, (0, 50 * bins as i64)).unwrap();
        h.counts.iter_mut().for_each(|c| *c = per_bin);
        h
    }

    #[test]
    fn raw_count_sigma_is_sqrt() {
        let c = CountWithError::count(94_800);
        assert_eq!(c.sigma, 94_800f64.sqrt());
        assert_eq!(CountWithError::count(0).sigma, 0.0);
    }

    #[test]
    fn noise_single_off_peak_slice() {
        // 20 bins of 50 ps: 1 ns off-peak slice carrying 50 counts, rest excluded
        let mut h = DelayHistogram::new(50, (0, 2000)).unwrap();
        for c in h.counts.iter_mut().take(20) {
            *c = 2;
        }
        h.counts[20..].iter_mut().for_each(|c| *c = 0);
        h.counts[0] = 12; // 12 + 19*2 = 50
        let n = estimate_noise(&h, (1000, 2000), 1000).unwrap();
        assert_eq!(n.value, 50.0);
        assert!(close(n.sigma, 7.07, 0.01));
    }

    #[test]
    fn noise_flat_background_many_slices() {
        // 2.5 counts per 50 ps bin = 50 per ns over 100 ns, peak excluded
        let mut h = flat(0, 2000);
        for (i, c) in h.counts.iter_mut().enumerate() {
            *c = if i % 2 == 0 { 2 } else { 3 };
        }
        let n = estimate_noise(&h, (40_000, 50_000), 1000).unwrap();
        assert!(close(n.value, 50.0, 1e-9));
        let off = (2000 - 200) as f64 * 2.5;
        assert!(close(n.sigma, off.sqrt() * 1000.0 / (1800.0 * 50.0), 1e-9));
    }

    #[test]
    fn noise_all_zero_off_peak() {
        let mut h = flat(0, 100);
        h.counts[50] = 1000;
        let n = estimate_noise(&h, (2000, 3000), 1000).unwrap();
        assert_eq!((n.value, n.sigma), (0.0, 0.0));
    }

    #[test]
    fn noise_recovers_synthetic_rate() {
        use rand::Rng;
        use rand_distr::{Distribution, Poisson};
        let mut rng = crate::seed::rng(17);
        let rate_per_ns = 37.0;
        let pois = Poisson::new(rate_per_ns / 20.0).unwrap();
        let mut h = flat(0, 4000);
        for c in h.counts.iter_mut() {
            *c = pois.sample(&mut rng) as u64;
        }
        // a fake peak that must be ignored
        for c in h.counts[1900..2100].iter_mut() {
            *c += rng.random_range(100..200);
        }
        let n = estimate_noise(&h, (95_000, 105_000), 1000).unwrap();
        assert!((n.value - rate_per_ns).abs() < 3.0 * n.sigma, "{n}");
    }

    #[test]
    fn noise_errors() {
        let h = flat(1, 20);
        assert!(matches!(estimate_noise(&h, (0, 1000), 1000), Err(Error::InsufficientData(_))));
        assert!(matches!(estimate_noise(&h, (-10, 100), 1000), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn conditional_probability_examples() {
        let p = conditional_probability(CountWithError::count(4), CountWithError::count(17_145_000)).unwrap();
        assert!(close(p.value, 2.333e-7, 0.001e-7));
        assert!(close(p.sigma, 1.167e-7, 0.001e-7));

        let p = conditional_probability(CountWithError::count(0), CountWithError::count(123)).unwrap();
        assert_eq!((p.value, p.sigma), (0.0, 0.0));

        let p = conditional_probability(CountWithError::count(94_800), CountWithError::count(5_570_000)).unwrap();
        assert!(close(p.value, 1.702e-2, 0.001e-2));
        assert!(close(p.sigma, 0.006e-2, 0.0005e-2));

        assert!(matches!(
            conditional_probability(CountWithError::count(1), CountWithError::zero()),
            Err(Error::DivisionByZero(_))
        ));
    }

    #[test]
    fn product_examples() {
        let p = independence_product(CountWithError::new(1.703e-2, 0.006e-2), CountWithError::new(1.090e-2, 0.004e-2));
        assert!(close(p.value, 1.856e-4, 0.001e-4));
        assert!(close(p.sigma, 0.009e-4, 0.001e-4));
        let p = independence_product(CountWithError::new(1.616e-2, 0.0), CountWithError::new(1.019e-2, 0.0));
        assert!(close(p.value, 1.647e-4, 0.001e-4));
        let p = independence_product(CountWithError::zero(), CountWithError::new(0.3, 0.01));
        assert_eq!((p.value, p.sigma), (0.0, 0.0));
    }

    #[test]
    fn accidental_examples() {
        let pn = CountWithError::new(9.0e-6, 1.3e-6);
        let pa = CountWithError::new(1.703e-2, 0.006e-2);
        let pb = CountWithError::new(1.090e-2, 0.004e-2);
        let p = accidental_prediction(pn, pa, pb);
        assert!(close(p.value, 2.5e-7, 0.05e-7));
        // quadrature from these inputs, not the published error bar
        assert!(close(p.sigma, 0.0279 * 1.3e-6, 0.01e-7));
        assert_eq!(accidental_prediction(CountWithError::zero(), pa, pb).value, 0.0);
        let q = CountWithError::new(0.02, 0.001);
        assert!(close(accidental_prediction(pn, q, q).value, 2.0 * 9.0e-6 * 0.02, 1e-18));
    }

    #[test]
    fn ratio_examples() {
        let r = antibunching_ratio(CountWithError::new(2.3e-7, 1.2e-7), CountWithError::new(1.86e-4, 0.01e-4)).unwrap();
        assert!(close(r.value, 1.24e-3, 0.005e-3));
        let x = CountWithError::new(1.8e-4, 1e-6);
        assert!(close(antibunching_ratio(x, x).unwrap().value, 1.0, 1e-12));
        assert_eq!(antibunching_ratio(CountWithError::zero(), x).unwrap().value, 0.0);
        assert!(antibunching_ratio(x, CountWithError::zero()).is_err());
    }
}
