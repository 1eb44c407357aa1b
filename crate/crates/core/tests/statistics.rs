mod common;

use antibunch::detection::{detect, DetectorParams};
use antibunch::optics::{beamsplit, propagate, PathParams, SplitterParams};
use antibunch::source::{generate_pairs, PairEmission, SourceParams};
use common::poisson_consistent;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, DiscreteCDF, Poisson};

const SEEDS: u64 = 120;

fn emissions(pair_rate: f64, duration: f64, seed: u64) -> Vec<u64> {
    generate_pairs(SourceParams { pair_rate, duration, seed })
        .unwrap()
        .map(|e| e.t_emit)
        .collect()
}

#[test]
fn source_counts_are_poisson_across_seeds() {
    // 2.5 s spans three blocks, including a partial one
    let counts: Vec<f64> = (0..SEEDS).map(|s| emissions(1_000.0, 2.5, s).len() as f64).collect();
    poisson_consistent(&counts, 2_500.0).unwrap();
}

#[test]
fn source_counts_in_subintervals_are_poisson() {
    // counts in 100 ms slices of one long run
    let t = emissions(2_000.0, 20.0, 99);
    let mut counts = vec![0f64; 200];
    for x in t {
        counts[(x / 100_000_000_000) as usize] += 1.0;
    }
    poisson_consistent(&counts, 200.0).unwrap();
}

#[test]
fn source_gaps_are_exponential() {
    // chi-square on gap deciles of the exponential law
    let t = emissions(10_000.0, 10.0, 5);
    let rate_per_ps = 1e4 / 1e12;
    let mut bins = [0f64; 10];
    for w in t.windows(2) {
        let u = 1.0 - (-((w[1] - w[0]) as f64) * rate_per_ps).exp();
        bins[((u * 10.0) as usize).min(9)] += 1.0;
    }
    let n: f64 = bins.iter().sum();
    let chi2: f64 = bins.iter().map(|&o| (o - n / 10.0).powi(2) / (n / 10.0)).sum();
    let limit = ChiSquared::new(9.0).unwrap().inverse_cdf(0.999);
    assert!(chi2 < limit, "chi2 {chi2} >= {limit}");
}

#[test]
fn dark_counts_are_poisson_across_seeds() {
    let counts: Vec<f64> = (0..SEEDS)
        .map(|seed| {
            let p = DetectorParams { efficiency: 0.5, jitter_sigma: 0.0, dark_rate: 3_000.0, dead_time: 0, seed };
            detect(&[], &p, 1.5).unwrap().clicks.len() as f64
        })
        .collect();
    poisson_consistent(&counts, 4_500.0).unwrap();
}

/// Number of fixed windows of `width` ps holding two or more emissions.
fn multi_pair_windows(t: &[u64], width: u64) -> u64 {
    let mut n = 0;
    let mut i = 0;
    while i < t.len() {
        let w = t[i] / width;
        let mut j = i + 1;
        while j < t.len() && t[j] / width == w {
            j += 1;
        }
        if j - i >= 2 {
            n += 1;
        }
        i = j;
    }
    n
}

fn check_two_pair_probability(rate: f64, duration: f64, seed: u64) {
    let width = 1_000u64;
    let t = emissions(rate, duration, seed);
    let windows = duration * 1e12 / width as f64;
    let p = rate * width as f64 * 1e-12;
    let observed = multi_pair_windows(&t, width) as f64;
    let exact = 1.0 - Poisson::new(p).unwrap().cdf(1);
    let expected = windows * p * p / 2.0;
    // p²/2 is the leading term; the exact tail differs by O(p)
    assert!((exact / (p * p / 2.0) - 1.0).abs() < p);
    assert!(
        (observed - expected).abs() < 3.0 * expected.sqrt(),
        "observed {observed} vs expected {expected:.1}"
    );
}

#[test]
fn two_pair_windows_at_preset_rate() {
    check_two_pair_probability(47_400.0, 60.0, 11);
}

#[test]
fn two_pair_windows_at_high_rate() {
    check_two_pair_probability(1_000_000.0, 5.0, 12);
}

#[test]
fn lossy_paths_compose() {
    let arrivals = emissions(50_000.0, 1.0, 3);
    let n = arrivals.len() as f64;
    let (t1, t2) = (0.6, 0.35);
    let counts: Vec<f64> = (0..SEEDS)
        .map(|s| {
            let once = propagate(&arrivals, &PathParams { transmission: t1, delay: 10 }, 2 * s).unwrap();
            propagate(&once, &PathParams { transmission: t2, delay: 5 }, 2 * s + 1).unwrap().len() as f64
        })
        .collect();
    let p = t1 * t2;
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    let se = (n * p * (1.0 - p) / counts.len() as f64).sqrt();
    assert!((mean - n * p).abs() < 3.0 * se, "{mean} vs {}", n * p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn beamsplit_conserves_photons(seed in any::<u64>(), ratio in 0.0f64..=1.0, rate in 0.0f64..20_000.0) {
        let pairs: Vec<PairEmission> = generate_pairs(SourceParams { pair_rate: rate, duration: 0.2, seed })
            .unwrap()
            .collect();
        let (a, b) = beamsplit(&pairs, &SplitterParams { ratio_to_a: ratio, seed: seed ^ 1 }).unwrap();
        prop_assert_eq!(a.len() + b.len(), pairs.len());
        let mut ids: Vec<u64> = a.iter().chain(&b).map(|p| p.pair_id).collect();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..pairs.len() as u64).collect::<Vec<_>>());
        prop_assert!(a.windows(2).all(|w| w[0].t_emit <= w[1].t_emit));
        prop_assert!(b.windows(2).all(|w| w[0].t_emit <= w[1].t_emit));
    }
}
