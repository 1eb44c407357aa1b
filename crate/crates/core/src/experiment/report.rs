//! End-to-end analysis of a tag stream against its configuration.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::detection::TimeTag;
use crate::error::{Error, Result};
use crate::spacetime::{certify_separation, SeparationCertificate};
use crate::table::{analyze_stream, Analysis, DerivedQuantities, ResultsTable, SeparationLabel};
use crate::timetag::read_tags;

use super::config::ExperimentConfig;

pub const HIST_HA_FILE: &str = "hist_HA.csv";
pub const HIST_HB_FILE: &str = "hist_HB.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config_digest: String,
    pub preset: String,
    pub duration: f64,
    pub master_seed: u64,
    pub certificate: SeparationCertificate,
    pub table: ResultsTable,
    /// `None` when `P_A · P_B` is zero and the ratio is undefined.
    pub derived: Option<DerivedQuantities>,
    pub tags_seen: u64,
    pub peak_buffered: usize,
    pub hist_ha: Option<PathBuf>,
    pub hist_hb: Option<PathBuf>,
}

fn separation_label(cert: &SeparationCertificate) -> SeparationLabel {
    if cert.undetermined {
        SeparationLabel::Undetermined
    } else {
        cert.class.into()
    }
}

/// Analyze a tag stream; histograms are written to `hist_dir` when given.
pub fn analyze_tags<I>(tags: I, cfg: &ExperimentConfig, hist_dir: Option<&Path>) -> Result<(RunReport, Analysis)>
where
    I: IntoIterator<Item = Result<TimeTag>>,
{
    cfg.validate()?;
    let certificate = certify_separation(&cfg.geometry)?;
    let analysis = analyze_stream(tags, &cfg.analysis_config(separation_label(&certificate)))?;

    let (mut hist_ha, mut hist_hb) = (None, None);
    if let Some(dir) = hist_dir {
        std::fs::create_dir_all(dir)?;
        let (pa, pb) = (dir.join(HIST_HA_FILE), dir.join(HIST_HB_FILE));
        analysis.hist_a.write_csv(BufWriter::new(File::create(&pa)?))?;
        analysis.hist_b.write_csv(BufWriter::new(File::create(&pb)?))?;
        hist_ha = Some(pa);
        hist_hb = Some(pb);
    }

    let report = RunReport {
        config_digest: cfg.digest(),
        preset: cfg.preset.clone(),
        duration: cfg.duration,
        master_seed: cfg.master_seed,
        certificate,
        table: analysis.table,
        derived: analysis.table.derived().ok(),
        tags_seen: analysis.tags_seen,
        peak_buffered: analysis.peak_buffered,
        hist_ha,
        hist_hb,
    };
    Ok((report, analysis))
}

/// Analyze a PTAG file. The file's TDC resolution must match the config.
pub fn run_analysis(tag_path: impl AsRef<Path>, cfg: &ExperimentConfig, hist_dir: Option<&Path>) -> Result<RunReport> {
    let (header, reader) = read_tags(tag_path)?;
    if header.resolution_ps as u64 != cfg.tdc_resolution {
        return Err(Error::Format(format!(
            "tag file resolution {} ps does not match tdc_resolution = {} ps",
            header.resolution_ps, cfg.tdc_resolution
        )));
    }
    analyze_tags(reader, cfg, hist_dir).map(|(r, _)| r)
}

impl RunReport {
    /// Human-readable report. Contains no timestamps or host details, so the
    /// same inputs give the same text.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let c = &self.certificate;
        let _ = writeln!(s, "config_digest   {}", self.config_digest);
        let _ = writeln!(s, "preset          {}", self.preset);
        let _ = writeln!(s, "duration_s      {}", self.duration);
        let _ = writeln!(s, "master_seed     {}", self.master_seed);
        let _ = writeln!(s, "tags_analyzed   {}", self.tags_seen);
        let _ = writeln!(s);
        let _ = writeln!(s, "separation      {}{}", c.class.as_str(), if c.undetermined { " (undetermined)" } else { "" });
        let _ = writeln!(s, "  light_travel_time_ps          {}", c.light_travel_time);
        let _ = writeln!(s, "  detection_time_difference_ps  {}", c.detection_time_difference);
        let _ = writeln!(s, "  margin_ps                     {}", c.margin);
        let _ = writeln!(s, "  uncertainty_ps                {}", c.uncertainty);
        let _ = writeln!(s);
        let _ = writeln!(s, "results ({})", self.table.separation.short());
        for (name, v) in self.table.rows() {
            let _ = writeln!(s, "  {name:<10} {v}");
        }
        let _ = writeln!(s);
        match &self.derived {
            Some(d) => {
                let _ = writeln!(s, "  {:<18} {}", "P_A*P_B", d.product);
                let _ = writeln!(s, "  {:<18} {}", "P_N(1,1)", d.accidental);
                let _ = writeln!(s, "  {:<18} {}", "P(1,1)/(P_A*P_B)", d.antibunching_ratio);
            }
            None => {
                let _ = writeln!(s, "  derived quantities undefined: P_A*P_B = 0");
            }
        }
        if self.hist_ha.is_some() || self.hist_hb.is_some() {
            let _ = writeln!(s);
            for p in [&self.hist_ha, &self.hist_hb].into_iter().flatten() {
                let _ = writeln!(s, "histogram       {}", p.display());
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{preset, PRESET_SPACELIKE, PRESET_TIMELIKE};
    use crate::experiment::pipeline::{run_simulation, Simulation};
    use crate::spacetime::IntervalClass;

    #[test]
    fn file_and_stream_analysis_agree() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = preset(PRESET_SPACELIKE).unwrap();
        cfg.set_duration(2.0);
        let p = dir.path().join("run.ptag");
        run_simulation(&cfg, &p).unwrap();
        let from_file = run_analysis(&p, &cfg, None).unwrap();
        let (from_stream, _) = analyze_tags(Simulation::new(&cfg).unwrap(), &cfg, None).unwrap();
        assert_eq!(from_file, from_stream);
        assert_eq!(from_file.render(), from_stream.render());
        assert_eq!(from_file.certificate.class, IntervalClass::Spacelike);
    }

    #[test]
    fn resolution_mismatch_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = preset(PRESET_TIMELIKE).unwrap();
        cfg.set_duration(0.1);
        let p = dir.path().join("run.ptag");
        run_simulation(&cfg, &p).unwrap();
        cfg.tdc_resolution = 10;
        assert!(matches!(run_analysis(&p, &cfg, None), Err(Error::Format(_))));
    }

    #[test]
    fn histograms_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = preset(PRESET_TIMELIKE).unwrap();
        cfg.set_duration(1.0);
        let (r, a) = analyze_tags(Simulation::new(&cfg).unwrap(), &cfg, Some(dir.path())).unwrap();
        let text = std::fs::read_to_string(r.hist_hb.as_ref().unwrap()).unwrap();
        assert_eq!(text.lines().count(), 1 + a.hist_b.counts.len());
        assert_eq!(r.table.separation, SeparationLabel::Timelike);
        assert!(r.render().contains("separation      timelike"));
    }
}
