//! Lossy fibers, delay lines and the beamsplitter.
//!
//! Each photon is routed as a particle: it either survives a lossy element or
//! not, and the splitter sends it to exactly one output.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    /// Survival probability.
    pub transmission: f64,
    /// Fixed delay in picoseconds.
    pub delay: u64,
}

impl PathParams {
    pub fn lossless() -> Self {
        PathParams { transmission: 1.0, delay: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("transmission", self.transmission)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitterParams {
    pub ratio_to_a: f64,
    pub seed: u64,
}

impl SplitterParams {
    pub fn validate(&self) -> Result<()> {
        check_probability("ratio_to_A", self.ratio_to_a)
    }
}

pub(crate) fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must lie in [0, 1], got {p}")))
    }
}

pub(crate) fn ensure_sorted<T: PartialOrd>(items: &[T], what: &str) -> Result<()> {
    match items.windows(2).position(|w| w[1] < w[0]) {
        Some(i) => Err(Error::Precondition(format!(
            "{what} input is not sorted at index {}",
            i + 1
        ))),
        None => Ok(()),
    }
}

/// Thin by `transmission`, then shift survivors by `delay`.
pub fn propagate(arrivals: &[u64], path: &PathParams, seed: u64) -> Result<Vec<u64>> {
    path.validate()?;
    ensure_sorted(arrivals, "propagate")?;
    let mut rng = seed::rng(seed);
    Ok(propagate_with(arrivals, path, &mut rng))
}

pub(crate) fn propagate_with<R: Rng>(arrivals: &[u64], path: &PathParams, rng: &mut R) -> Vec<u64> {
    let t = path.transmission;
    arrivals
        .iter()
        .filter(|_| rng.random_bool(t))
        .map(|&a| a + path.delay)
        .collect()
}

/// Route each item to arm A with probability `ratio_to_a`, otherwise to arm B.
pub fn beamsplit<T: Copy + PartialOrd>(items: &[T], params: &SplitterParams) -> Result<(Vec<T>, Vec<T>)> {
    params.validate()?;
    ensure_sorted(items, "beamsplit")?;
    let mut rng = seed::rng(params.seed);
    Ok(beamsplit_with(items, params.ratio_to_a, &mut rng))
}

pub(crate) fn beamsplit_with<T: Copy, R: Rng>(items: &[T], ratio_to_a: f64, rng: &mut R) -> (Vec<T>, Vec<T>) {
    let mut a = Vec::with_capacity((items.len() as f64 * ratio_to_a) as usize + 8);
    let mut b = Vec::with_capacity((items.len() as f64 * (1.0 - ratio_to_a)) as usize + 8);
    for &item in items {
        if rng.random_bool(ratio_to_a) {
            a.push(item);
        } else {
            b.push(item);
        }
    }
    (a, b)
}
