//! CW-pumped pair source: pair emission times as a homogeneous Poisson process.
//!
//! The run is cut into fixed one-second blocks. Each block draws exponential
//! inter-arrival gaps from its own seed (see [`crate::seed::block_seed`]), which
//! by memorylessness is the same process as one uninterrupted draw, and lets
//! blocks be generated in any order or in parallel.

use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::seed;

pub const PS_PER_S: f64 = 1e12;

/// Length of one generation block in picoseconds.
pub const BLOCK_PS: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PairEmission {
    pub t_emit: u64,
    pub pair_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    /// Mean pair emission rate in pairs per second.
    pub pair_rate: f64,
    /// Run length in seconds.
    pub duration: f64,
    pub seed: u64,
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pair_rate.is_finite() && self.pair_rate >= 0.0) {
            return Err(Error::invalid("pair_rate", format!("must be >= 0, got {}", self.pair_rate)));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::invalid("duration", format!("must be > 0, got {}", self.duration)));
        }
        Ok(())
    }

    pub fn duration_ps(&self) -> u64 {
        duration_to_ps(self.duration)
    }

    pub fn block_count(&self) -> u64 {
        self.duration_ps().div_ceil(BLOCK_PS)
    }

    /// Time span `[start, end)` covered by a block.
    pub fn block_span(&self, block: u64) -> (u64, u64) {
        let start = block * BLOCK_PS;
        (start, (start + BLOCK_PS).min(self.duration_ps()))
    }
}

pub(crate) fn duration_to_ps(seconds: f64) -> u64 {
    (seconds * PS_PER_S).round() as u64
}

/// Emission times in one block, sorted, quantized down to whole picoseconds.
pub fn generate_block(params: &SourceParams, block: u64) -> Result<Vec<u64>> {
    params.validate()?;
    let (start, end) = params.block_span(block);
    if params.pair_rate == 0.0 || start >= end {
        return Ok(Vec::new());
    }
    let gap = Exp::new(params.pair_rate / PS_PER_S)
        .map_err(|e| Error::invalid("pair_rate", e.to_string()))?;
    let mut rng = seed::rng(seed::block_seed(params.seed, block));
    let expected = (params.pair_rate * (end - start) as f64 / PS_PER_S) as usize;
    let mut out = Vec::with_capacity(expected + expected / 16 + 16);
    let mut t = start as f64;
    loop {
        t += gap.sample(&mut rng);
        let q = t.floor() as u64;
        if q >= end {
            break;
        }
        out.push(q);
    }
    Ok(out)
}

/// Sequential stream of pair emissions over the whole run.
pub struct PairStream {
    params: SourceParams,
    block: u64,
    buf: std::vec::IntoIter<u64>,
    next_id: u64,
}

impl Iterator for PairStream {
    type Item = PairEmission;

    fn next(&mut self) -> Option<PairEmission> {
        loop {
            if let Some(t_emit) = self.buf.next() {
                let pair_id = self.next_id;
                self.next_id += 1;
                return Some(PairEmission { t_emit, pair_id });
            }
            if self.block >= self.params.block_count() {
                return None;
            }
            // params were validated when the stream was built
            self.buf = generate_block(&self.params, self.block).ok()?.into_iter();
            self.block += 1;
        }
    }
}

pub fn generate_pairs(params: SourceParams) -> Result<PairStream> {
    params.validate()?;
    Ok(PairStream {
        params,
        block: 0,
        buf: Vec::new().into_iter(),
        next_id: 0,
    })
}

/// Pair rate needed to see `target_herald_rate` heralds per second through a
/// herald arm of the given total efficiency.
pub fn calibrate_pair_rate(target_herald_rate: f64, herald_arm_efficiency: f64) -> Result<f64> {
    if herald_arm_efficiency == 0.0 {
        return Err(Error::DivisionByZero("calibrate_pair_rate"));
    }
    if !(herald_arm_efficiency > 0.0 && herald_arm_efficiency <= 1.0) {
        return Err(Error::invalid(
            "herald_arm_efficiency",
            format!("must lie in (0, 1], got {herald_arm_efficiency}"),
        ));
    }
    if !(target_herald_rate.is_finite() && target_herald_rate >= 0.0) {
        return Err(Error::invalid("target_herald_rate", "must be >= 0"));
    }
    Ok(target_herald_rate / herald_arm_efficiency)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(rate: f64, duration: f64, seed: u64) -> SourceParams {
        SourceParams { pair_rate: rate, duration, seed }
    }

    #[test]
    fn zero_rate_is_empty() {
        assert_eq!(generate_pairs(params(0.0, 600.0, 1)).unwrap().count(), 0);
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(generate_pairs(params(-1.0, 1.0, 0)).is_err());
        assert!(generate_pairs(params(1.0, 0.0, 0)).is_err());
        assert!(generate_pairs(params(1.0, -3.0, 0)).is_err());
    }

    #[test]
    fn stream_is_sorted_with_increasing_ids() {
        let v: Vec<_> = generate_pairs(params(50_000.0, 2.5, 9)).unwrap().collect();
        assert!(v.windows(2).all(|w| w[0].t_emit <= w[1].t_emit && w[0].pair_id < w[1].pair_id));
        assert!(v.last().unwrap().t_emit < 2_500_000_000_000);
    }

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<_> = generate_pairs(params(10_000.0, 1.5, 42)).unwrap().collect();
        let b: Vec<_> = generate_pairs(params(10_000.0, 1.5, 42)).unwrap().collect();
        let c: Vec<_> = generate_pairs(params(10_000.0, 1.5, 43)).unwrap().collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn parallel_blocks_match_sequential_stream() {
        let p = params(20_000.0, 4.2, 5);
        let sequential: Vec<u64> = generate_pairs(p).unwrap().map(|e| e.t_emit).collect();
        let blocks: Vec<Vec<u64>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..p.block_count())
                .map(|b| s.spawn(move || generate_block(&p, b).unwrap()))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert_eq!(sequential, blocks.concat());
    }

    #[test]
    fn calibration_examples() {
        let r = calibrate_pair_rate(9283.0, 0.35 * 0.56).unwrap();
        assert!((r - 47_362.0).abs() < 1.0, "{r}");
        assert_eq!(calibrate_pair_rate(123.4, 1.0).unwrap(), 123.4);
        assert_eq!(calibrate_pair_rate(0.0, 0.5).unwrap(), 0.0);
        assert!(matches!(calibrate_pair_rate(1.0, 0.0), Err(Error::DivisionByZero(_))));
        assert!(calibrate_pair_rate(1.0, 1.5).is_err());
    }
}
