//! Detector response and TDC quantization.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};
use crate::optics::{check_probability, ensure_sorted};
use crate::seed;
use crate::source::{duration_to_ps, PS_PER_S};

pub const CHANNEL_H: u8 = 0;
pub const CHANNEL_A: u8 = 1;
pub const CHANNEL_B: u8 = 2;

/// Jitter offsets are truncated at this many standard deviations. This bounds
/// how far a click can move, which the block pipeline relies on.
pub const JITTER_TRUNCATION_SIGMAS: f64 = 50.0;

/// A TDC time tag. Ordering is by time, then by channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeTag {
    pub t: u64,
    pub channel: u8,
}

impl TimeTag {
    pub fn new(t: u64, channel: u8) -> Self {
        TimeTag { t, channel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    pub efficiency: f64,
    /// Standard deviation of the Gaussian timing jitter, picoseconds.
    pub jitter_sigma: f64,
    /// Dark (and other uncorrelated background) click rate, counts per second.
    pub dark_rate: f64,
    /// Picoseconds after an accepted click during which clicks are discarded.
    pub dead_time: u64,
    pub seed: u64,
}

impl DetectorParams {
    pub fn ideal() -> Self {
        DetectorParams {
            efficiency: 1.0,
            jitter_sigma: 0.0,
            dark_rate: 0.0,
            dead_time: 0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("efficiency", self.efficiency)?;
        if !(self.jitter_sigma.is_finite() && self.jitter_sigma >= 0.0) {
            return Err(Error::invalid("jitter_sigma", format!("must be >= 0, got {}", self.jitter_sigma)));
        }
        if !(self.dark_rate.is_finite() && self.dark_rate >= 0.0) {
            return Err(Error::invalid("dark_rate", format!("must be >= 0, got {}", self.dark_rate)));
        }
        Ok(())
    }

    /// Largest distance a click can be moved by jitter, in picoseconds.
    pub fn max_jitter_ps(&self) -> u64 {
        (self.jitter_sigma * JITTER_TRUNCATION_SIGMAS).ceil() as u64 + 1
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Detection {
    /// Sorted click times in picoseconds.
    pub clicks: Vec<u64>,
    /// Clicks whose jittered time fell below zero and were clamped to 0.
    pub clamped: u64,
    /// Clicks removed by the dead-time filter.
    pub dead_time_losses: u64,
}

/// Thinning, jitter and dark clicks over `[span.0, span.1)`, without sorting
/// and without dead time. Returns the unsorted clicks and the clamp count.
pub(crate) fn raw_clicks<R: Rng>(
    arrivals: &[u64],
    params: &DetectorParams,
    span: (u64, u64),
    rng: &mut R,
) -> (Vec<u64>, u64) {
    let mut clicks = Vec::with_capacity((arrivals.len() as f64 * params.efficiency) as usize + 16);
    let mut clamped = 0;
    let jitter = (params.jitter_sigma > 0.0).then(|| Normal::new(0.0, params.jitter_sigma).unwrap());
    let limit = params.jitter_sigma * JITTER_TRUNCATION_SIGMAS;
    for &a in arrivals {
        if !rng.random_bool(params.efficiency) {
            continue;
        }
        let t = match &jitter {
            Some(n) => {
                let off = n.sample(rng).clamp(-limit, limit).round() as i64;
                let t = a as i64 + off;
                if t < 0 {
                    clamped += 1;
                    0
                } else {
                    t as u64
                }
            }
            None => a,
        };
        clicks.push(t);
    }
    if params.dark_rate > 0.0 && span.0 < span.1 {
        let gap = Exp::new(params.dark_rate / PS_PER_S).unwrap();
        let mut t = span.0 as f64;
        loop {
            t += gap.sample(rng);
            let q = t.floor() as u64;
            if q >= span.1 {
                break;
            }
            clicks.push(q);
        }
    }
    (clicks, clamped)
}

/// Streaming dead-time filter for a single detector.
#[derive(Debug, Clone)]
pub struct DeadTimeFilter {
    dead_time: u64,
    last: Option<u64>,
    rejected: u64,
}

impl DeadTimeFilter {
    pub fn new(dead_time: u64) -> Self {
        DeadTimeFilter { dead_time, last: None, rejected: 0 }
    }

    /// Feed clicks in time order; returns whether this one is kept.
    pub fn accept(&mut self, t: u64) -> bool {
        match self.last {
            Some(last) if t - last < self.dead_time => {
                self.rejected += 1;
                false
            }
            _ => {
                self.last = Some(t);
                true
            }
        }
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }
}

/// Turn photon arrivals into detector clicks.
///
/// Arrivals are thinned by the efficiency, jittered, merged with Poisson dark
/// clicks over `[0, duration)`, and passed through the dead-time filter.
pub fn detect(arrivals: &[u64], params: &DetectorParams, duration: f64) -> Result<Detection> {
    params.validate()?;
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::invalid("duration", format!("must be >= 0, got {duration}")));
    }
    ensure_sorted(arrivals, "detect")?;
    let end = duration_to_ps(duration);
    if let Some(&last) = arrivals.last() {
        if last >= end {
            return Err(Error::Precondition(format!(
                "arrival at {last} ps lies outside [0, {end}) ps"
            )));
        }
    }
    let mut rng = seed::rng(params.seed);
    let (mut clicks, clamped) = raw_clicks(arrivals, params, (0, end), &mut rng);
    clicks.sort_unstable();
    let mut filter = DeadTimeFilter::new(params.dead_time);
    clicks.retain(|&t| filter.accept(t));
    Ok(Detection {
        clicks,
        clamped,
        dead_time_losses: filter.rejected(),
    })
}

/// Floor each click to the TDC grid and attach the channel id.
pub fn tdc_quantize(clicks: &[u64], resolution: u64, channel: u8) -> Result<Vec<TimeTag>> {
    if resolution == 0 {
        return Err(Error::invalid("resolution", "must be > 0"));
    }
    ensure_sorted(clicks, "tdc_quantize")?;
    Ok(clicks
        .iter()
        .map(|&t| TimeTag::new(t / resolution * resolution, channel))
        .collect())
}
