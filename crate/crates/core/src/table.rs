//! Table-of-results assembly: heralded rates, conditional probabilities and
//! the quantities derived from them.

use std::io::Write;

use crate::coincidence::{CoincidenceEngine, DelayHistogram, WindowSpec};
use crate::detection::{TimeTag, CHANNEL_A, CHANNEL_B, CHANNEL_H};
use crate::error::Result;
use crate::estimate::{
    accidental_prediction, antibunching_ratio, conditional_probability, estimate_noise, independence_product,
    CountWithError,
};
use crate::spacetime::IntervalClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparationLabel {
    Spacelike,
    Timelike,
    Undetermined,
}

impl SeparationLabel {
    pub fn short(self) -> &'static str {
        match self {
            SeparationLabel::Spacelike => "SL",
            SeparationLabel::Timelike => "TL",
            SeparationLabel::Undetermined => "undetermined",
        }
    }
}

impl From<IntervalClass> for SeparationLabel {
    fn from(c: IntervalClass) -> Self {
        match c {
            IntervalClass::Spacelike => SeparationLabel::Spacelike,
            IntervalClass::Timelike => SeparationLabel::Timelike,
            IntervalClass::Lightlike => SeparationLabel::Undetermined,
        }
    }
}

/// One row: coincidences, heralds over the same measurement, and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub coincidences: CountWithError,
    pub heralds: CountWithError,
    pub probability: CountWithError,
}

impl RateRow {
    pub fn new(coincidences: CountWithError, heralds: CountWithError) -> Result<Self> {
        Ok(RateRow {
            coincidences,
            heralds,
            probability: conditional_probability(coincidences, heralds)?,
        })
    }

    pub fn from_counts(coincidences: u64, heralds: u64) -> Result<Self> {
        Self::new(CountWithError::count(coincidences), CountWithError::count(heralds))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultsTable {
    pub separation: SeparationLabel,
    /// R_HA, R_H(A), P_A
    pub a: RateRow,
    /// R_HB, R_H(B), P_B
    pub b: RateRow,
    /// R_HAB, R_H(AB), P(1,1)
    pub ab: RateRow,
    /// R_HN, R_H(N), P_N
    pub noise: RateRow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedQuantities {
    /// P_A · P_B
    pub product: CountWithError,
    /// P_N · P_A + P_N · P_B
    pub accidental: CountWithError,
    /// P(1,1) / (P_A · P_B)
    pub antibunching_ratio: CountWithError,
}

impl ResultsTable {
    /// Rows may come from independent measurements.
    pub fn assemble(separation: SeparationLabel, a: RateRow, b: RateRow, ab: RateRow, noise: RateRow) -> Self {
        ResultsTable { separation, a, b, ab, noise }
    }

    pub fn derived(&self) -> Result<DerivedQuantities> {
        let product = independence_product(self.a.probability, self.b.probability);
        Ok(DerivedQuantities {
            product,
            accidental: accidental_prediction(self.noise.probability, self.a.probability, self.b.probability),
            antibunching_ratio: antibunching_ratio(self.ab.probability, product)?,
        })
    }

    pub fn rows(&self) -> Vec<(&'static str, CountWithError)> {
        vec![
            ("R_HA", self.a.coincidences),
            ("R_H(A)", self.a.heralds),
            ("P_A", self.a.probability),
            ("R_HB", self.b.coincidences),
            ("R_H(B)", self.b.heralds),
            ("P_B", self.b.probability),
            ("R_HAB", self.ab.coincidences),
            ("R_H(AB)", self.ab.heralds),
            ("P(1,1)", self.ab.probability),
            ("R_HN", self.noise.coincidences),
            ("R_H(N)", self.noise.heralds),
            ("P_N", self.noise.probability),
        ]
    }

    /// CSV `quantity,value,sigma`: the table rows, then the derived quantities
    /// when they are defined.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "quantity,value,sigma")?;
        for (name, v) in self.rows() {
            writeln!(out, "{},{:e},{:e}", csv_field(name), v.value, v.sigma)?;
        }
        if let Ok(d) = self.derived() {
            for (name, v) in [
                ("P_A*P_B", d.product),
                ("P_N(1,1)", d.accidental),
                ("P(1,1)/(P_A*P_B)", d.antibunching_ratio),
            ] {
                writeln!(out, "{},{:e},{:e}", csv_field(name), v.value, v.sigma)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') {
        format!("\"{s}\"")
    } else {
        s.to_string()
    }
}

/// Channels, windows and histogram settings for one analysis pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub herald_ch: u8,
    pub ch_a: u8,
    pub ch_b: u8,
    pub window_a: WindowSpec,
    pub window_b: WindowSpec,
    pub hist_bin_width: i64,
    /// Histograms span `center ± hist_half_range` around each window centre.
    pub hist_half_range: i64,
    /// Noise is estimated outside `center ± noise_exclusion` of the H–A peak.
    pub noise_exclusion: i64,
    pub separation: SeparationLabel,
}

pub const DEFAULT_HIST_BIN_WIDTH_PS: i64 = 50;
pub const DEFAULT_HIST_HALF_RANGE_PS: i64 = 50_000;
pub const DEFAULT_NOISE_EXCLUSION_PS: i64 = 5_000;

impl AnalysisConfig {
    pub fn new(window_a: WindowSpec, window_b: WindowSpec, separation: SeparationLabel) -> Self {
        AnalysisConfig {
            herald_ch: CHANNEL_H,
            ch_a: CHANNEL_A,
            ch_b: CHANNEL_B,
            window_a,
            window_b,
            hist_bin_width: DEFAULT_HIST_BIN_WIDTH_PS,
            hist_half_range: DEFAULT_HIST_HALF_RANGE_PS,
            noise_exclusion: DEFAULT_NOISE_EXCLUSION_PS,
            separation,
        }
    }

    fn hist_range(&self, w: &WindowSpec) -> (i64, i64) {
        (w.center_delay - self.hist_half_range, w.center_delay + self.hist_half_range)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub table: ResultsTable,
    pub hist_a: DelayHistogram,
    pub hist_b: DelayHistogram,
    pub tags_seen: u64,
    pub peak_buffered: usize,
}

/// One pass over a merged tag stream: double and triple counts, both delay
/// histograms and the noise row.
pub fn analyze_stream<I>(tags: I, cfg: &AnalysisConfig) -> Result<Analysis>
where
    I: IntoIterator<Item = Result<TimeTag>>,
{
    let mut engine = CoincidenceEngine::new(cfg.herald_ch);
    engine.add_gate(cfg.ch_a, cfg.window_a)?;
    engine.add_gate(cfg.ch_b, cfg.window_b)?;
    engine.add_histogram(cfg.ch_a, cfg.hist_bin_width, cfg.hist_range(&cfg.window_a))?;
    engine.add_histogram(cfg.ch_b, cfg.hist_bin_width, cfg.hist_range(&cfg.window_b))?;
    for tag in tags {
        engine.push(tag?)?;
    }
    let out = engine.finish();
    let mut hists = out.histograms.into_iter();
    let (hist_a, hist_b) = (hists.next().unwrap(), hists.next().unwrap());

    let heralds = out.heralds;
    let center = cfg.window_a.center_delay;
    let noise = estimate_noise(
        &hist_a,
        (center - cfg.noise_exclusion, center + cfg.noise_exclusion),
        cfg.window_a.width,
    )?;
    let table = ResultsTable::assemble(
        cfg.separation,
        RateRow::from_counts(out.gate_hits[0], heralds)?,
        RateRow::from_counts(out.gate_hits[1], heralds)?,
        RateRow::from_counts(out.all_gates_hits, heralds)?,
        RateRow::new(noise, CountWithError::count(heralds))?,
    );
    Ok(Analysis {
        table,
        hist_a,
        hist_b,
        tags_seen: out.tags_seen,
        peak_buffered: out.peak_buffered,
    })
}

pub fn build_results_table<I>(tags: I, cfg: &AnalysisConfig) -> Result<ResultsTable>
where
    I: IntoIterator<Item = Result<TimeTag>>,
{
    analyze_stream(tags, cfg).map(|a| a.table)
}
