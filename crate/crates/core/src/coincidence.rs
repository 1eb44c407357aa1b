//! Single-pass herald-gated coincidence counting and delay histograms.
//!
//! The engine consumes one merged, sorted tag stream. Heralds wait in a queue
//! until the stream has moved past the far edge of every window attached to
//! them; at that point every target tag that could fall in their windows has
//! been seen and the herald is resolved. Target tags are buffered per window
//! and discarded once no pending or future herald can reach them, so memory
//! depends on the window span times the tag rate and not on stream length.

use std::collections::VecDeque;

use crate::detection::TimeTag;
use crate::error::{Error, Result};

/// Coincidence window relative to a herald, `[center - width/2, center - width/2 + width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    /// Expected target-minus-herald delay in picoseconds.
    pub center_delay: i64,
    /// Full width in picoseconds.
    pub width: i64,
}

pub const DEFAULT_WINDOW_WIDTH_PS: i64 = 1_000;

impl WindowSpec {
    pub fn new(center_delay: i64, width: i64) -> Self {
        WindowSpec { center_delay, width }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width <= 0 {
            return Err(Error::invalid("width", format!("must be > 0, got {}", self.width)));
        }
        Ok(())
    }

    /// Half-open delay bounds `(lo, hi)`.
    pub fn bounds(&self) -> (i64, i64) {
        let lo = self.center_delay - self.width / 2;
        (lo, lo + self.width)
    }

    pub fn contains(&self, delay: i64) -> bool {
        let (lo, hi) = self.bounds();
        lo <= delay && delay < hi
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayHistogram {
    pub bin_width: i64,
    pub min_delay: i64,
    pub max_delay: i64,
    pub counts: Vec<u64>,
}

impl DelayHistogram {
    pub fn new(bin_width: i64, range: (i64, i64)) -> Result<Self> {
        let (min_delay, max_delay) = range;
        if bin_width <= 0 {
            return Err(Error::invalid("bin_width", "must be > 0"));
        }
        if max_delay <= min_delay {
            return Err(Error::invalid("range", format!("empty range [{min_delay}, {max_delay})")));
        }
        if (max_delay - min_delay) % bin_width != 0 {
            return Err(Error::invalid("range", "span must be a whole number of bins"));
        }
        let n = ((max_delay - min_delay) / bin_width) as usize;
        Ok(DelayHistogram { bin_width, min_delay, max_delay, counts: vec![0; n] })
    }

    pub fn bin_start(&self, i: usize) -> i64 {
        self.min_delay + i as i64 * self.bin_width
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// CSV with header `bin_start_ps,count`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin_start_ps,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(out, "{},{}", self.bin_start(i), c)?;
        }
        out.flush()?;
        Ok(())
    }
}

struct Gate {
    channel: u8,
    lo: i64,
    hi: i64,
    buf: VecDeque<i64>,
    hits: u64,
}

struct Hist {
    channel: u8,
    hist: DelayHistogram,
    buf: VecDeque<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EngineOutput {
    pub heralds: u64,
    /// Heralds with at least one target in each gate, in gate order.
    pub gate_hits: Vec<u64>,
    /// Heralds with a target in every gate at once.
    pub all_gates_hits: u64,
    pub histograms: Vec<DelayHistogram>,
    pub tags_seen: u64,
    /// Largest number of buffered herald and target times at any point.
    pub peak_buffered: usize,
}

/// Streaming coincidence engine. Feed tags in sorted order with [`push`](Self::push).
pub struct CoincidenceEngine {
    herald_ch: u8,
    gates: Vec<Gate>,
    hists: Vec<Hist>,
    pending: VecDeque<i64>,
    // largest hi over every consumer; a herald resolves once time reaches h + this
    reach: i64,
    heralds: u64,
    all_hits: u64,
    last: Option<TimeTag>,
    seen: u64,
    peak: usize,
}

impl CoincidenceEngine {
    pub fn new(herald_ch: u8) -> Self {
        CoincidenceEngine {
            herald_ch,
            gates: Vec::new(),
            hists: Vec::new(),
            pending: VecDeque::new(),
            reach: i64::MIN,
            heralds: 0,
            all_hits: 0,
            last: None,
            seen: 0,
            peak: 0,
        }
    }

    fn check_target(&self, channel: u8) -> Result<()> {
        if channel == self.herald_ch {
            return Err(Error::invalid("target_ch", "target channel must differ from the herald channel"));
        }
        Ok(())
    }

    pub fn add_gate(&mut self, channel: u8, window: WindowSpec) -> Result<usize> {
        self.check_target(channel)?;
        window.validate()?;
        let (lo, hi) = window.bounds();
        self.reach = self.reach.max(hi);
        self.gates.push(Gate { channel, lo, hi, buf: VecDeque::new(), hits: 0 });
        Ok(self.gates.len() - 1)
    }

    pub fn add_histogram(&mut self, channel: u8, bin_width: i64, range: (i64, i64)) -> Result<usize> {
        self.check_target(channel)?;
        let hist = DelayHistogram::new(bin_width, range)?;
        self.reach = self.reach.max(hist.max_delay);
        self.hists.push(Hist { channel, hist, buf: VecDeque::new() });
        Ok(self.hists.len() - 1)
    }

    pub fn push(&mut self, tag: TimeTag) -> Result<()> {
        if let Some(prev) = self.last {
            if tag < prev {
                return Err(Error::Unsorted {
                    offset: self.seen,
                    reason: format!("({}, ch {}) after ({}, ch {})", tag.t, tag.channel, prev.t, prev.channel),
                });
            }
        }
        let t = i64::try_from(tag.t).map_err(|_| Error::Unsorted {
            offset: self.seen,
            reason: format!("timestamp {} exceeds the signed 64-bit range", tag.t),
        })?;
        self.last = Some(tag);
        self.seen += 1;

        // everything strictly before t has been seen
        while let Some(&h) = self.pending.front() {
            if h.saturating_add(self.reach) <= t {
                self.pending.pop_front();
                self.resolve(h);
            } else {
                break;
            }
        }

        if tag.channel == self.herald_ch {
            self.pending.push_back(t);
            self.heralds += 1;
        } else {
            let idle = self.pending.is_empty();
            for g in self.gates.iter_mut().filter(|g| g.channel == tag.channel) {
                g.buf.push_back(t);
                if idle {
                    prune(&mut g.buf, t.saturating_add(g.lo));
                }
            }
            for h in self.hists.iter_mut().filter(|h| h.channel == tag.channel) {
                h.buf.push_back(t);
                if idle {
                    prune(&mut h.buf, t.saturating_add(h.hist.min_delay));
                }
            }
        }

        let buffered = self.pending.len()
            + self.gates.iter().map(|g| g.buf.len()).sum::<usize>()
            + self.hists.iter().map(|h| h.buf.len()).sum::<usize>();
        self.peak = self.peak.max(buffered);
        Ok(())
    }

    fn resolve(&mut self, h: i64) {
        let mut all = !self.gates.is_empty();
        for g in &mut self.gates {
            let lo = h.saturating_add(g.lo);
            prune(&mut g.buf, lo);
            let hit = matches!(g.buf.front(), Some(&t) if t < h.saturating_add(g.hi));
            if hit {
                g.hits += 1;
            }
            all &= hit;
        }
        if all {
            self.all_hits += 1;
        }
        for hs in &mut self.hists {
            let lo = h.saturating_add(hs.hist.min_delay);
            let hi = h.saturating_add(hs.hist.max_delay);
            prune(&mut hs.buf, lo);
            for &t in hs.buf.iter().take_while(|&&t| t < hi) {
                let bin = ((t - lo) / hs.hist.bin_width) as usize;
                hs.hist.counts[bin] += 1;
            }
        }
    }

    pub fn finish(mut self) -> EngineOutput {
        while let Some(h) = self.pending.pop_front() {
            self.resolve(h);
        }
        EngineOutput {
            heralds: self.heralds,
            gate_hits: self.gates.iter().map(|g| g.hits).collect(),
            all_gates_hits: self.all_hits,
            histograms: self.hists.into_iter().map(|h| h.hist).collect(),
            tags_seen: self.seen,
            peak_buffered: self.peak,
        }
    }
}

fn prune(buf: &mut VecDeque<i64>, below: i64) {
    while matches!(buf.front(), Some(&t) if t < below) {
        buf.pop_front();
    }
}

fn feed<I: IntoIterator<Item = TimeTag>>(mut engine: CoincidenceEngine, tags: I) -> Result<EngineOutput> {
    for tag in tags {
        engine.push(tag)?;
    }
    Ok(engine.finish())
}

/// All-pairs histogram of `t_target - t_herald` over `range`.
pub fn build_delay_histogram<I: IntoIterator<Item = TimeTag>>(
    tags: I,
    herald_ch: u8,
    target_ch: u8,
    bin_width: i64,
    range: (i64, i64),
) -> Result<DelayHistogram> {
    let mut e = CoincidenceEngine::new(herald_ch);
    e.add_histogram(target_ch, bin_width, range)?;
    Ok(feed(e, tags)?.histograms.remove(0))
}

/// Returns `(heralds with a target in the window, total heralds)`.
pub fn count_double<I: IntoIterator<Item = TimeTag>>(
    tags: I,
    herald_ch: u8,
    target_ch: u8,
    window: WindowSpec,
) -> Result<(u64, u64)> {
    let mut e = CoincidenceEngine::new(herald_ch);
    e.add_gate(target_ch, window)?;
    let out = feed(e, tags)?;
    Ok((out.gate_hits[0], out.heralds))
}

/// Returns `(heralds with an A tag in window_a and a B tag in window_b, total heralds)`.
pub fn count_triple<I: IntoIterator<Item = TimeTag>>(
    tags: I,
    herald_ch: u8,
    ch_a: u8,
    ch_b: u8,
    window_a: WindowSpec,
    window_b: WindowSpec,
) -> Result<(u64, u64)> {
    let mut e = CoincidenceEngine::new(herald_ch);
    e.add_gate(ch_a, window_a)?;
    e.add_gate(ch_b, window_b)?;
    let out = feed(e, tags)?;
    Ok((out.all_gates_hits, out.heralds))
}
