//! Experiment configuration, presets and the flat `key = value` file format.
//!
//! A config file is a list of `key = value` lines; `#` starts a comment. Keys
//! name fields of [`ExperimentConfig`] (`det_A.efficiency = 0.10`). Omitted keys
//! take the values of the base preset, `spacelike-paper` unless the file sets
//! `preset = timelike-paper`. Unknown keys are rejected.
//!
//! Three groups of values are derived unless set explicitly: `arm_A.delay`
//! and `arm_B.delay` follow the fiber lengths in `geometry`, and the window
//! centres follow the arm delays relative to `arm_H.delay`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::coincidence::{WindowSpec, DEFAULT_WINDOW_WIDTH_PS};
use crate::detection::DetectorParams;
use crate::error::{Error, Result};
use crate::optics::{PathParams, SplitterParams};
use crate::source::SourceParams;
use crate::spacetime::{fiber_delay, Geometry};
use crate::table::{AnalysisConfig, SeparationLabel, DEFAULT_HIST_BIN_WIDTH_PS, DEFAULT_HIST_HALF_RANGE_PS, DEFAULT_NOISE_EXCLUSION_PS};

pub const PRESET_SPACELIKE: &str = "spacelike-paper";
pub const PRESET_TIMELIKE: &str = "timelike-paper";

pub const DEFAULT_DURATION_S: f64 = 60.0;
pub const DEFAULT_MASTER_SEED: u64 = 20_120_405;
pub const DEFAULT_TDC_RESOLUTION_PS: u64 = 50;

/// Uncorrelated click rate seen by each signal detector (dark counts plus
/// photons from unheralded pairs), counts per second. 9 kHz puts 9e-6
/// background clicks in a 1 ns window.
pub const BACKGROUND_RATE_HZ: f64 = 9_000.0;

/// Conversion from a full width at half maximum to a Gaussian sigma.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: String,
    /// `source.duration` and `source.seed` mirror `duration` and `master_seed`.
    pub source: SourceParams,
    pub coupling: PathParams,
    pub splitter: SplitterParams,
    pub arm_h: PathParams,
    pub arm_a: PathParams,
    pub arm_b: PathParams,
    pub det_h: DetectorParams,
    pub det_a: DetectorParams,
    pub det_b: DetectorParams,
    pub tdc_resolution: u64,
    pub window_ha: WindowSpec,
    pub window_hb: WindowSpec,
    pub geometry: Geometry,
    pub duration: f64,
    pub master_seed: u64,
    pub hist_bin_width: i64,
    pub hist_half_range: i64,
    pub noise_exclusion: i64,
}

struct Calibration {
    pair_rate: f64,
    arm_a_transmission: f64,
    arm_b_transmission: f64,
    fiber_a_mm: i64,
    fiber_b_mm: i64,
}

// Shared physical values.
const COUPLING: f64 = 0.35;
const HERALD_EFFICIENCY: f64 = 0.56;
const SIGNAL_EFFICIENCY: f64 = 0.15;
const HERALD_JITTER_FWHM_PS: f64 = 1_200.0;
const SIGNAL_JITTER_FWHM_PS: f64 = 400.0;
const DETECTOR_SEPARATION_MM: i64 = 10_000;
const LEAD_FIBER_MM: i64 = 2_000;
const DELAY_LOOP_MM: i64 = 10_000;

fn preset_calibration(name: &str) -> Option<Calibration> {
    match name {
        // 10 m loop before A; B sits 10 m away at the end of 10 m of fiber
        PRESET_SPACELIKE => Some(Calibration {
            pair_rate: 47_400.0,
            arm_a_transmission: 1.0,
            arm_b_transmission: 0.64,
            fiber_a_mm: LEAD_FIBER_MM + DELAY_LOOP_MM,
            fiber_b_mm: LEAD_FIBER_MM + DETECTOR_SEPARATION_MM,
        }),
        // loop moved from A to B
        PRESET_TIMELIKE => Some(Calibration {
            pair_rate: 52_100.0,
            arm_a_transmission: 0.95,
            arm_b_transmission: 0.60,
            fiber_a_mm: LEAD_FIBER_MM,
            fiber_b_mm: LEAD_FIBER_MM + DETECTOR_SEPARATION_MM + DELAY_LOOP_MM,
        }),
        _ => None,
    }
}

fn signal_detector(pair_rate: f64, splitter_ratio: f64, arm_transmission: f64) -> DetectorParams {
    let singles = pair_rate * COUPLING * splitter_ratio * arm_transmission * SIGNAL_EFFICIENCY;
    DetectorParams {
        efficiency: SIGNAL_EFFICIENCY,
        jitter_sigma: (SIGNAL_JITTER_FWHM_PS / FWHM_PER_SIGMA).round(),
        dark_rate: (BACKGROUND_RATE_HZ - singles).max(0.0).round(),
        dead_time: 0,
        seed: 0,
    }
}

/// One of the two calibrated reference configurations.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let cal = preset_calibration(name).ok_or_else(|| {
        Error::config(
            "preset",
            format!("unknown preset `{name}` (expected {PRESET_SPACELIKE} or {PRESET_TIMELIKE})"),
        )
    })?;
    let splitter_ratio = 0.5;
    let mut cfg = ExperimentConfig {
        preset: name.to_string(),
        source: SourceParams {
            pair_rate: cal.pair_rate,
            duration: DEFAULT_DURATION_S,
            seed: 0,
        },
        coupling: PathParams { transmission: COUPLING, delay: 0 },
        splitter: SplitterParams { ratio_to_a: splitter_ratio, seed: 0 },
        arm_h: PathParams::lossless(),
        arm_a: PathParams { transmission: cal.arm_a_transmission, delay: 0 },
        arm_b: PathParams { transmission: cal.arm_b_transmission, delay: 0 },
        det_h: DetectorParams {
            efficiency: HERALD_EFFICIENCY,
            jitter_sigma: (HERALD_JITTER_FWHM_PS / FWHM_PER_SIGMA).round(),
            dark_rate: 0.0,
            dead_time: 0,
            seed: 0,
        },
        det_a: signal_detector(cal.pair_rate, splitter_ratio, cal.arm_a_transmission),
        det_b: signal_detector(cal.pair_rate, 1.0 - splitter_ratio, cal.arm_b_transmission),
        tdc_resolution: DEFAULT_TDC_RESOLUTION_PS,
        window_ha: WindowSpec::new(0, DEFAULT_WINDOW_WIDTH_PS),
        window_hb: WindowSpec::new(0, DEFAULT_WINDOW_WIDTH_PS),
        geometry: Geometry {
            det_a: Some([0, 0, 0]),
            det_b: Some([DETECTOR_SEPARATION_MM, 0, 0]),
            fiber_a: Some(cal.fiber_a_mm),
            fiber_b: Some(cal.fiber_b_mm),
            ..Geometry::default()
        },
        duration: DEFAULT_DURATION_S,
        master_seed: DEFAULT_MASTER_SEED,
        hist_bin_width: DEFAULT_HIST_BIN_WIDTH_PS,
        hist_half_range: DEFAULT_HIST_HALF_RANGE_PS,
        noise_exclusion: DEFAULT_NOISE_EXCLUSION_PS,
    };
    cfg.derive(&BTreeSet::new())?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Fill in derived values that were not set explicitly.
    fn derive(&mut self, explicit: &BTreeSet<String>) -> Result<()> {
        let g = &self.geometry;
        if !(g.group_index.is_finite() && g.group_index >= 1.0) {
            return Err(Error::config("geometry.group_index", format!("must be >= 1, got {}", g.group_index)));
        }
        if !explicit.contains("arm_A.delay") {
            if let Some(len) = g.fiber_a {
                self.arm_a.delay = arm_delay(len, g.group_index, "geometry.fiber_A")?;
            }
        }
        if !explicit.contains("arm_B.delay") {
            if let Some(len) = g.fiber_b {
                self.arm_b.delay = arm_delay(len, g.group_index, "geometry.fiber_B")?;
            }
        }
        if !explicit.contains("window_HA.center_delay") {
            self.window_ha.center_delay = self.arm_a.delay as i64 - self.arm_h.delay as i64;
        }
        if !explicit.contains("window_HB.center_delay") {
            self.window_hb.center_delay = self.arm_b.delay as i64 - self.arm_h.delay as i64;
        }
        self.sync_source();
        Ok(())
    }

    fn sync_source(&mut self) {
        self.source.duration = self.duration;
        self.source.seed = self.master_seed;
    }

    /// Override the run length, keeping the source in step.
    pub fn set_duration(&mut self, seconds: f64) {
        self.duration = seconds;
        self.sync_source();
    }

    pub fn set_master_seed(&mut self, seed: u64) {
        self.master_seed = seed;
        self.sync_source();
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |prefix: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::InvalidParameter { name, reason } => Error::config(format!("{prefix}.{name}"), reason),
                other => other,
            })
        };
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::config("duration", format!("must be > 0, got {}", self.duration)));
        }
        wrap("source", self.source.validate())?;
        wrap("coupling", self.coupling.validate())?;
        wrap("splitter", self.splitter.validate())?;
        wrap("arm_H", self.arm_h.validate())?;
        wrap("arm_A", self.arm_a.validate())?;
        wrap("arm_B", self.arm_b.validate())?;
        wrap("det_H", self.det_h.validate())?;
        wrap("det_A", self.det_a.validate())?;
        wrap("det_B", self.det_b.validate())?;
        wrap("window_HA", self.window_ha.validate())?;
        wrap("window_HB", self.window_hb.validate())?;
        if self.tdc_resolution == 0 || self.tdc_resolution > u32::MAX as u64 {
            return Err(Error::config("tdc_resolution", "must lie in [1, 2^32)"));
        }
        if !(self.geometry.group_index.is_finite() && self.geometry.group_index >= 1.0) {
            return Err(Error::config("geometry.group_index", "must be >= 1"));
        }
        if self.hist_bin_width <= 0 {
            return Err(Error::config("analysis.hist_bin_width", "must be > 0"));
        }
        if self.hist_half_range <= 0 || (2 * self.hist_half_range) % self.hist_bin_width != 0 {
            return Err(Error::config(
                "analysis.hist_half_range",
                "must be > 0 and span a whole number of bins",
            ));
        }
        if self.noise_exclusion < 0 || self.noise_exclusion >= self.hist_half_range {
            return Err(Error::config("analysis.noise_exclusion", "must lie in [0, hist_half_range)"));
        }
        Ok(())
    }

    pub fn analysis_config(&self, separation: SeparationLabel) -> AnalysisConfig {
        let mut a = AnalysisConfig::new(self.window_ha, self.window_hb, separation);
        a.hist_bin_width = self.hist_bin_width;
        a.hist_half_range = self.hist_half_range;
        a.noise_exclusion = self.noise_exclusion;
        a
    }

    /// Every field as `key = value`, in sorted key order. Parsing this text
    /// reproduces the configuration exactly.
    pub fn to_text(&self) -> String {
        let mut entries: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| entries.push((k.to_string(), v));
        put("preset", self.preset.clone());
        put("duration", fmt_f64(self.duration));
        put("master_seed", self.master_seed.to_string());
        put("tdc_resolution", self.tdc_resolution.to_string());
        put("source.pair_rate", fmt_f64(self.source.pair_rate));
        put("splitter.ratio_to_A", fmt_f64(self.splitter.ratio_to_a));
        for (name, p) in [("coupling", &self.coupling), ("arm_H", &self.arm_h), ("arm_A", &self.arm_a), ("arm_B", &self.arm_b)] {
            put(&format!("{name}.transmission"), fmt_f64(p.transmission));
            put(&format!("{name}.delay"), p.delay.to_string());
        }
        for (name, d) in [("det_H", &self.det_h), ("det_A", &self.det_a), ("det_B", &self.det_b)] {
            put(&format!("{name}.efficiency"), fmt_f64(d.efficiency));
            put(&format!("{name}.jitter_sigma"), fmt_f64(d.jitter_sigma));
            put(&format!("{name}.dark_rate"), fmt_f64(d.dark_rate));
            put(&format!("{name}.dead_time"), d.dead_time.to_string());
        }
        for (name, w) in [("window_HA", &self.window_ha), ("window_HB", &self.window_hb)] {
            put(&format!("{name}.center_delay"), w.center_delay.to_string());
            put(&format!("{name}.width"), w.width.to_string());
        }
        let g = &self.geometry;
        for (name, pos) in [("geometry.det_A", g.det_a), ("geometry.det_B", g.det_b)] {
            if let Some(p) = pos {
                for (axis, v) in ["x", "y", "z"].iter().zip(p) {
                    put(&format!("{name}.{axis}"), v.to_string());
                }
            }
        }
        if let Some(l) = g.fiber_a {
            put("geometry.fiber_A", l.to_string());
        }
        if let Some(l) = g.fiber_b {
            put("geometry.fiber_B", l.to_string());
        }
        put("geometry.group_index", fmt_f64(g.group_index));
        put("geometry.timing_uncertainty", g.timing_uncertainty.to_string());
        put("analysis.hist_bin_width", self.hist_bin_width.to_string());
        put("analysis.hist_half_range", self.hist_half_range.to_string());
        put("analysis.noise_exclusion", self.noise_exclusion.to_string());

        entries.sort();
        let mut s = String::new();
        for (k, v) in entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn arm_delay(len: i64, group_index: f64, key: &str) -> Result<u64> {
    let d = fiber_delay(len, group_index).map_err(|e| Error::config(key, e.to_string()))?;
    Ok(d as u64)
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}")))
}

fn set_key(cfg: &mut ExperimentConfig, key: &str, v: &str) -> Result<()> {
    let (head, field) = key.split_once('.').unwrap_or((key, ""));
    match (head, field) {
        ("duration", "") => cfg.duration = parse(key, v)?,
        ("master_seed", "") => cfg.master_seed = parse(key, v)?,
        ("tdc_resolution", "") => cfg.tdc_resolution = parse(key, v)?,
        ("source", "pair_rate") => cfg.source.pair_rate = parse(key, v)?,
        ("splitter", "ratio_to_A") => cfg.splitter.ratio_to_a = parse(key, v)?,
        ("coupling" | "arm_H" | "arm_A" | "arm_B", f) => {
            let p = match head {
                "coupling" => &mut cfg.coupling,
                "arm_H" => &mut cfg.arm_h,
                "arm_A" => &mut cfg.arm_a,
                _ => &mut cfg.arm_b,
            };
            match f {
                "transmission" => p.transmission = parse(key, v)?,
                "delay" => p.delay = parse(key, v)?,
                _ => return Err(unknown(key)),
            }
        }
        ("det_H" | "det_A" | "det_B", f) => {
            let d = match head {
                "det_H" => &mut cfg.det_h,
                "det_A" => &mut cfg.det_a,
                _ => &mut cfg.det_b,
            };
            match f {
                "efficiency" => d.efficiency = parse(key, v)?,
                "jitter_sigma" => d.jitter_sigma = parse(key, v)?,
                "dark_rate" => d.dark_rate = parse(key, v)?,
                "dead_time" => d.dead_time = parse(key, v)?,
                _ => return Err(unknown(key)),
            }
        }
        ("window_HA" | "window_HB", f) => {
            let w = if head == "window_HA" { &mut cfg.window_ha } else { &mut cfg.window_hb };
            match f {
                "center_delay" => w.center_delay = parse(key, v)?,
                "width" => w.width = parse(key, v)?,
                _ => return Err(unknown(key)),
            }
        }
        ("geometry", f) => {
            let g = &mut cfg.geometry;
            match f {
                "fiber_A" => g.fiber_a = Some(parse(key, v)?),
                "fiber_B" => g.fiber_b = Some(parse(key, v)?),
                "group_index" => g.group_index = parse(key, v)?,
                "timing_uncertainty" => g.timing_uncertainty = parse(key, v)?,
                _ => {
                    let (det, axis) = f.split_once('.').ok_or_else(|| unknown(key))?;
                    let pos = match det {
                        "det_A" => &mut g.det_a,
                        "det_B" => &mut g.det_b,
                        _ => return Err(unknown(key)),
                    };
                    let i = match axis {
                        "x" => 0,
                        "y" => 1,
                        "z" => 2,
                        _ => return Err(unknown(key)),
                    };
                    pos.get_or_insert([0, 0, 0])[i] = parse(key, v)?;
                }
            }
        }
        ("analysis", "hist_bin_width") => cfg.hist_bin_width = parse(key, v)?,
        ("analysis", "hist_half_range") => cfg.hist_half_range = parse(key, v)?,
        ("analysis", "noise_exclusion") => cfg.noise_exclusion = parse(key, v)?,
        _ => return Err(unknown(key)),
    }
    Ok(())
}

fn unknown(key: &str) -> Error {
    Error::config(key, "unknown key")
}

/// Parse configuration text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut pairs = Vec::new();
    let mut seen = BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::config(format!("line {}", lineno + 1), format!("expected `key = value`, got `{line}`"))
        })?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if !seen.insert(k.clone()) {
            return Err(Error::config(k, "key given more than once"));
        }
        pairs.push((k, v));
    }

    let base = pairs
        .iter()
        .find(|(k, _)| k == "preset")
        .map(|(_, v)| v.as_str())
        .unwrap_or(PRESET_SPACELIKE);
    let mut cfg = preset(base)?;
    for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
        set_key(&mut cfg, k, v)?;
    }
    cfg.derive(&seen)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), format!("cannot read config: {e}")))?;
    parse_config(&text)
}
