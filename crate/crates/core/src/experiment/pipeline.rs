//! Block-wise simulation from pair emission to a merged, sorted tag stream.
//!
//! Each one-second block is simulated independently: every random stage
//! draws from `block_seed(stage_seed(master_seed, stage), block)` with the
//! stage names in [`STAGES`]. Blocks can therefore be computed on any number
//! of threads and the output stays byte-identical.
//!
//! Jitter lets a click land up to `max_jitter_ps` before the block it came
//! from. A per-channel buffer holds clicks until every block that could
//! still put an earlier click on that channel has been simulated; only then
//! do they pass through dead time and the TDC.

use std::collections::VecDeque;
use std::path::Path;

use crate::detection::{raw_clicks, DeadTimeFilter, DetectorParams, TimeTag};
use crate::error::Result;
use crate::optics::{beamsplit_with, propagate_with};
use crate::seed::{block_seed, rng, stage_seed};
use crate::source::{generate_block, SourceParams, BLOCK_PS};
use crate::timetag::{merge_channels, write_tags, TagFileHeader};

use super::config::ExperimentConfig;

pub const STAGE_SOURCE: &str = "source";
pub const STAGES: [&str; 9] = [
    "coupling_H",
    "arm_H",
    "det_H",
    "coupling_S",
    "splitter",
    "arm_A",
    "arm_B",
    "det_A",
    "det_B",
];

pub const CHANNEL_COUNT: u8 = 3;

/// Per-channel bookkeeping, indexed by channel id.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PipelineStats {
    pub pairs: u64,
    pub tags: [u64; 3],
    pub clamped: [u64; 3],
    pub dead_time_losses: [u64; 3],
    /// Clicks pushed past the end of the run by delay or jitter.
    pub dropped_after_end: [u64; 3],
}

impl PipelineStats {
    pub fn total_tags(&self) -> u64 {
        self.tags.iter().sum()
    }
}

struct BlockOutput {
    pairs: u64,
    clicks: [Vec<u64>; 3],
    clamped: [u64; 3],
}

struct Seeds {
    source: SourceParams,
    stages: [u64; 9],
}

fn simulate_block(cfg: &ExperimentConfig, seeds: &Seeds, block: u64) -> Result<BlockOutput> {
    let span = seeds.source.block_span(block);
    let emissions = generate_block(&seeds.source, block)?;
    let mut r = seeds.stages.map(|s| rng(block_seed(s, block)));
    let [c_h, a_h, d_h, c_s, split, a_a, a_b, d_a, d_b] = &mut r;

    let herald = propagate_with(&propagate_with(&emissions, &cfg.coupling, c_h), &cfg.arm_h, a_h);
    let (h, h_clamped) = raw_clicks(&herald, &cfg.det_h, span, d_h);

    let signal = propagate_with(&emissions, &cfg.coupling, c_s);
    let (to_a, to_b) = beamsplit_with(&signal, cfg.splitter.ratio_to_a, split);
    let (a, a_clamped) = raw_clicks(&propagate_with(&to_a, &cfg.arm_a, a_a), &cfg.det_a, span, d_a);
    let (b, b_clamped) = raw_clicks(&propagate_with(&to_b, &cfg.arm_b, a_b), &cfg.det_b, span, d_b);

    Ok(BlockOutput {
        pairs: emissions.len() as u64,
        clicks: [h, a, b],
        clamped: [h_clamped, a_clamped, b_clamped],
    })
}

/// Detectors in channel order.
fn detectors(cfg: &ExperimentConfig) -> [&DetectorParams; 3] {
    [&cfg.det_h, &cfg.det_a, &cfg.det_b]
}

/// Sorted tag stream of a whole run, produced lazily block by block.
pub struct Simulation {
    cfg: ExperimentConfig,
    seeds: Seeds,
    threads: usize,
    next_block: u64,
    block_count: u64,
    end_ps: u64,
    /// Largest jitter excursion over all detectors, rounded up to the TDC grid.
    lookback: u64,
    pending: [Vec<u64>; 3],
    filters: [DeadTimeFilter; 3],
    ready: VecDeque<TimeTag>,
    stats: PipelineStats,
    failed: bool,
}

impl Simulation {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Self::with_threads(cfg, 1)
    }

    /// `threads` blocks are simulated concurrently; the output does not
    /// depend on it.
    pub fn with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<Self> {
        cfg.validate()?;
        let mut source = cfg.source;
        source.duration = cfg.duration;
        source.seed = stage_seed(cfg.master_seed, STAGE_SOURCE);
        let stages = STAGES.map(|s| stage_seed(cfg.master_seed, s));
        let res = cfg.tdc_resolution;
        let jitter = detectors(cfg).iter().map(|d| d.max_jitter_ps()).max().unwrap_or(0);
        let dead = detectors(cfg).map(|d| DeadTimeFilter::new(d.dead_time));
        Ok(Simulation {
            cfg: cfg.clone(),
            block_count: source.block_count(),
            end_ps: source.duration_ps(),
            seeds: Seeds { source, stages },
            threads: threads.max(1),
            next_block: 0,
            lookback: jitter.div_ceil(res) * res,
            pending: Default::default(),
            filters: dead,
            ready: VecDeque::new(),
            stats: PipelineStats::default(),
            failed: false,
        })
    }

    pub fn header(&self) -> TagFileHeader {
        TagFileHeader {
            resolution_ps: self.cfg.tdc_resolution as u32,
            channel_count: CHANNEL_COUNT,
        }
    }

    pub fn stats(&self) -> PipelineStats {
        self.stats
    }

    fn run_batch(&mut self) -> Result<()> {
        let first = self.next_block;
        let last = (first + self.threads as u64).min(self.block_count);
        let outputs: Vec<Result<BlockOutput>> = if last - first <= 1 {
            (first..last).map(|b| simulate_block(&self.cfg, &self.seeds, b)).collect()
        } else {
            let (cfg, seeds) = (&self.cfg, &self.seeds);
            std::thread::scope(|s| {
                let handles: Vec<_> = (first..last)
                    .map(|b| s.spawn(move || simulate_block(cfg, seeds, b)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("block worker panicked")).collect()
            })
        };
        for (b, out) in (first..last).zip(outputs) {
            self.absorb(b, out?);
        }
        self.next_block = last;
        Ok(())
    }

    fn absorb(&mut self, block: u64, out: BlockOutput) {
        self.stats.pairs += out.pairs;
        for ch in 0..3 {
            self.stats.clamped[ch] += out.clamped[ch];
            self.pending[ch].extend_from_slice(&out.clicks[ch]);
        }
        // Clicks below the watermark can no longer be preceded by a later
        // block. It sits on the TDC grid so quantized times never straddle it.
        let watermark = if block + 1 >= self.block_count {
            u64::MAX
        } else {
            ((block + 1) * BLOCK_PS).saturating_sub(self.lookback) / self.cfg.tdc_resolution * self.cfg.tdc_resolution
        };
        let res = self.cfg.tdc_resolution;
        let mut flushed: [Vec<TimeTag>; 3] = Default::default();
        for (ch, tags) in flushed.iter_mut().enumerate() {
            let pending = &mut self.pending[ch];
            pending.sort_unstable();
            let cut = pending.partition_point(|&t| t < watermark);
            let filter = &mut self.filters[ch];
            for &t in &pending[..cut] {
                if t >= self.end_ps {
                    self.stats.dropped_after_end[ch] += 1;
                } else if filter.accept(t) {
                    tags.push(TimeTag::new(t / res * res, ch as u8));
                }
            }
            pending.drain(..cut);
            self.stats.tags[ch] += tags.len() as u64;
            self.stats.dead_time_losses[ch] = filter.rejected();
        }
        let streams: Vec<_> = flushed.into_iter().map(|v| v.into_iter()).collect();
        // each stream is sorted, so the merge cannot fail
        self.ready.extend(merge_channels(streams).map_while(|t| t.ok()));
    }
}

impl Iterator for Simulation {
    type Item = Result<TimeTag>;

    fn next(&mut self) -> Option<Result<TimeTag>> {
        loop {
            if let Some(tag) = self.ready.pop_front() {
                return Some(Ok(tag));
            }
            if self.failed || self.next_block >= self.block_count {
                return None;
            }
            if let Err(e) = self.run_batch() {
                self.failed = true;
                return Some(Err(e));
            }
        }
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Simulate the run and write it as a PTAG file. Returns the pipeline stats.
pub fn run_simulation(cfg: &ExperimentConfig, out: impl AsRef<Path>) -> Result<PipelineStats> {
    let mut sim = Simulation::with_threads(cfg, default_threads())?;
    let header = sim.header();
    let mut err = None;
    let tags = sim.by_ref().map_while(|t| t.map_err(|e| err = Some(e)).ok());
    write_tags(out, &header, tags)?;
    match err {
        Some(e) => Err(e),
        None => Ok(sim.stats()),
    }
}

/// The whole run in memory.
pub fn simulate_tags(cfg: &ExperimentConfig) -> Result<(Vec<TimeTag>, PipelineStats)> {
    let mut sim = Simulation::with_threads(cfg, default_threads())?;
    let tags = sim.by_ref().collect::<Result<Vec<_>>>()?;
    Ok((tags, sim.stats()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{CHANNEL_A, CHANNEL_B, CHANNEL_H};
    use crate::experiment::config::{preset, PRESET_SPACELIKE};

    fn short_run(seconds: f64) -> ExperimentConfig {
        let mut c = preset(PRESET_SPACELIKE).unwrap();
        c.set_duration(seconds);
        c
    }

    #[test]
    fn output_is_sorted_and_on_grid() {
        let (tags, stats) = simulate_tags(&short_run(2.5)).unwrap();
        assert!(tags.windows(2).all(|w| w[0] <= w[1]));
        assert!(tags.iter().all(|t| t.t % 50 == 0 && t.t < 2_500_000_000_000));
        assert_eq!(stats.total_tags(), tags.len() as u64);
        for ch in 0..3u8 {
            assert_eq!(tags.iter().filter(|t| t.channel == ch).count() as u64, stats.tags[ch as usize]);
        }
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let cfg = short_run(5.0);
        let serial: Vec<_> = Simulation::with_threads(&cfg, 1).unwrap().map(Result::unwrap).collect();
        let parallel: Vec<_> = Simulation::with_threads(&cfg, 4).unwrap().map(Result::unwrap).collect();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn seed_changes_output() {
        let a = simulate_tags(&short_run(1.0)).unwrap().0;
        let mut c = short_run(1.0);
        c.set_master_seed(c.master_seed + 1);
        let b = simulate_tags(&c).unwrap().0;
        assert_ne!(a, b);
    }

    #[test]
    fn block_edges_keep_order_under_large_jitter() {
        let mut c = short_run(3.0);
        c.det_h.jitter_sigma = 1e9;
        c.det_a.jitter_sigma = 3e8;
        c.tdc_resolution = 1_000_003;
        let (tags, _) = simulate_tags(&c).unwrap();
        assert!(tags.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn dead_time_is_counted() {
        let mut c = short_run(1.0);
        c.det_a.dead_time = 10_000_000;
        let (_, stats) = simulate_tags(&c).unwrap();
        assert!(stats.dead_time_losses[CHANNEL_A as usize] > 0);
        assert_eq!(stats.dead_time_losses[CHANNEL_B as usize], 0);
    }

    #[test]
    fn herald_rate_matches_arithmetic() {
        let c = short_run(4.0);
        let (_, stats) = simulate_tags(&c).unwrap();
        let expect = c.source.pair_rate * c.coupling.transmission * c.det_h.efficiency * 4.0;
        let n = stats.tags[CHANNEL_H as usize] as f64;
        assert!((n - expect).abs() < 5.0 * expect.sqrt(), "{n} vs {expect}");
    }
}
