//! Brute-force reference implementations and random stream generators shared
//! by the integration tests and the acceptance target.
#![allow(dead_code)]

use antibunch::coincidence::WindowSpec;
use antibunch::detection::TimeTag;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: u8 = 0;
pub const A: u8 = 1;
pub const B: u8 = 2;

fn times(tags: &[TimeTag], ch: u8) -> Vec<i64> {
    tags.iter().filter(|t| t.channel == ch).map(|t| t.t as i64).collect()
}

fn in_window(d: i64, w: &WindowSpec) -> bool {
    let lo = w.center_delay - w.width / 2;
    lo <= d && d < lo + w.width
}

/// Heralds with at least one target in the window, checking every pair.
pub fn oracle_double(tags: &[TimeTag], h: u8, target: u8, w: &WindowSpec) -> (u64, u64) {
    let heralds = times(tags, h);
    let targets = times(tags, target);
    let hits = heralds
        .iter()
        .filter(|&&th| targets.iter().any(|&tt| in_window(tt - th, w)))
        .count();
    (hits as u64, heralds.len() as u64)
}

pub fn oracle_triple(tags: &[TimeTag], h: u8, a: u8, b: u8, wa: &WindowSpec, wb: &WindowSpec) -> (u64, u64) {
    let heralds = times(tags, h);
    let ta = times(tags, a);
    let tb = times(tags, b);
    let hits = heralds
        .iter()
        .filter(|&&th| ta.iter().any(|&t| in_window(t - th, wa)) && tb.iter().any(|&t| in_window(t - th, wb)))
        .count();
    (hits as u64, heralds.len() as u64)
}

pub fn oracle_histogram(tags: &[TimeTag], h: u8, target: u8, bin_width: i64, range: (i64, i64)) -> Vec<u64> {
    let mut counts = vec![0u64; ((range.1 - range.0) / bin_width) as usize];
    let targets = times(tags, target);
    for th in times(tags, h) {
        for &tt in &targets {
            let d = tt - th;
            if range.0 <= d && d < range.1 {
                counts[((d - range.0) / bin_width) as usize] += 1;
            }
        }
    }
    counts
}

/// A random sorted stream plus windows and histogram settings to test it with.
#[derive(Debug, Clone)]
pub struct Case {
    pub tags: Vec<TimeTag>,
    pub window_a: WindowSpec,
    pub window_b: WindowSpec,
    pub bin_width: i64,
    pub range: (i64, i64),
}

/// Stream of up to `max_len` tags on channels 0..=3 (channel 3 is never
/// analyzed), dense enough that windows catch something.
pub fn random_case(seed: u64, max_len: usize) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(0..=max_len);
    let spacing = rng.random_range(1..=2_000u64);
    let span = (n as u64).max(1) * spacing;
    let mut tags: Vec<TimeTag> = (0..n)
        .map(|_| {
            let ch = match rng.random_range(0..10) {
                0..=3 => H,
                4..=6 => A,
                7..=8 => B,
                _ => 3,
            };
            // occasional exact duplicates and coarse grid to provoke ties
            let t = rng.random_range(0..span) / 50 * 50;
            TimeTag::new(t, ch)
        })
        .collect();
    tags.sort();
    let window = |rng: &mut ChaCha8Rng| WindowSpec::new(rng.random_range(-3_000..=3_000), rng.random_range(1..=4_000));
    let window_a = window(&mut rng);
    let window_b = window(&mut rng);
    let bin_width = rng.random_range(1..=500);
    let bins = rng.random_range(1..=200);
    let lo = rng.random_range(-20_000..=5_000);
    Case { tags, window_a, window_b, bin_width, range: (lo, lo + bins * bin_width) }
}

/// Summary statistics for a set of counts.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Whether the mean and variance of `n` draws agree with a Poisson law of
/// mean `lambda` at 3σ. The variance check uses the sampling variance of the
/// unbiased variance estimator for a Poisson law.
pub fn poisson_consistent(xs: &[f64], lambda: f64) -> Result<(), String> {
    let n = xs.len() as f64;
    let (mean, var) = mean_var(xs);
    let se_mean = (lambda / n).sqrt();
    let se_var = (lambda / n + 2.0 * lambda * lambda / (n - 1.0)).sqrt();
    if (mean - lambda).abs() > 3.0 * se_mean {
        return Err(format!("mean {mean:.3} vs {lambda:.3} (3σ = {:.3})", 3.0 * se_mean));
    }
    if (var - lambda).abs() > 3.0 * se_var {
        return Err(format!("variance {var:.3} vs {lambda:.3} (3σ = {:.3})", 3.0 * se_var));
    }
    Ok(())
}
