//! Artifact files with embedded run metadata.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Format};
use crate::analysis::svg::{heatmap, line_plot, Series};
use crate::analysis::{PointResult, SweepResult};
use crate::geometry::AtomArrangement;
use crate::spectral::write_lines_csv;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    /// SHA-256 of the compact JSON of the materialized config.
    pub config_sha256: String,
    pub seed: Option<u64>,
}

impl Metadata {
    pub fn new(materialized: &ExperimentConfig, seed: Option<u64>) -> Result<Self> {
        let canonical = serde_json::to_string(materialized)?;
        let digest = Sha256::digest(canonical.as_bytes());
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed,
        })
    }

    fn line(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "{} {} config_sha256={} seed={}",
            self.tool, self.version, self.config_sha256, seed
        )
    }
}

pub struct ArtifactWriter {
    dir: PathBuf,
    meta: Metadata,
    formats: Vec<Format>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path, meta: Metadata, formats: &[Format]) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            meta,
            formats: formats.to_vec(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn metadata(&self) -> &Metadata {
        &self.meta
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn csv(&self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        if !self.wants(Format::Csv) {
            return Ok(());
        }
        let mut buf = format!("# {}\n", self.meta.line()).into_bytes();
        body(&mut buf)?;
        fs::write(self.dir.join(name), buf)?;
        Ok(())
    }

    fn json(&self, name: &str, fields: Value) -> Result<()> {
        if !self.wants(Format::Json) {
            return Ok(());
        }
        let mut obj = serde_json::Map::new();
        obj.insert("metadata".into(), serde_json::to_value(&self.meta)?);
        if let Value::Object(m) = fields {
            obj.extend(m);
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(obj))?;
        text.push('\n');
        fs::write(self.dir.join(name), text)?;
        Ok(())
    }

    fn svg(&self, name: &str, body: String) -> Result<()> {
        if !self.wants(Format::Svg) {
            return Ok(());
        }
        let text = format!("<!-- {} -->\n{body}", self.meta.line());
        fs::write(self.dir.join(name), text)?;
        Ok(())
    }
}

pub fn write_spectrum(w: &ArtifactWriter, cfg: &ExperimentConfig, arr: &AtomArrangement, p: &PointResult) -> Result<()> {
    w.json("config.json", json!({ "config": cfg.materialized()? }))?;
    w.csv("arrangement.csv", |b| arr.write_csv(b))?;
    w.csv("eigenvalues.csv", |b| p.decomposition.write_csv(b))?;
    w.csv("lines.csv", |b| write_lines_csv(&p.lines, b))?;
    w.csv("timeseries.csv", |b| p.ideal.write_csv(b))?;
    if let Some(m) = &p.measured {
        w.csv("measured.csv", |b| m.write_csv(b))?;
    }
    w.csv("spectrum.csv", |b| p.spectrum.write_csv(b))?;
    w.json("timeseries.json", json!({ "ideal": p.ideal, "measured": p.measured }))?;
    w.json(
        "peaks.json",
        json!({
            "lines": p.lines,
            "peaks": p.peaks,
            "match": p.report,
        }),
    )?;

    let times = p.ideal.grid.times();
    let mut series = vec![Series {
        name: "ideal".into(),
        points: times.iter().copied().zip(p.ideal.values.iter().copied()).collect(),
    }];
    if let Some(m) = &p.measured {
        series.push(Series {
            name: "measured".into(),
            points: times.iter().copied().zip(m.values.iter().copied()).collect(),
        });
    }
    w.svg("p0.svg", line_plot("P0(t)", "t (us)", "P0", &series))?;
    let spectrum = Series {
        name: "psd".into(),
        points: p.spectrum.freqs.iter().copied().zip(p.spectrum.psd.iter().copied()).collect(),
    };
    w.svg("spectrum.svg", line_plot("Fourier spectrum", "f (MHz)", "PSD", &[spectrum]))?;
    Ok(())
}

pub fn write_sweep(w: &ArtifactWriter, cfg: &ExperimentConfig, r: &SweepResult) -> Result<()> {
    w.json("config.json", json!({ "config": cfg.materialized()? }))?;
    w.csv("spectrogram.csv", |b| r.write_spectrogram_csv(b))?;
    w.csv("spectrogram_matrix.csv", |b| {
        use std::io::Write;
        let header: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
        writeln!(b, "freq_MHz,{}", header.join(","))?;
        let freqs = &r.points[0].spectrum.freqs;
        for (i, f) in freqs.iter().enumerate() {
            let row: Vec<String> = r.points.iter().map(|p| p.spectrum.psd[i].to_string()).collect();
            writeln!(b, "{f},{}", row.join(","))?;
        }
        Ok(())
    })?;
    w.csv("lines.csv", |b| r.write_lines_csv(b))?;
    w.csv("levels.csv", |b| r.write_levels_csv(b))?;
    let points: Vec<Value> = r
        .values
        .iter()
        .zip(&r.points)
        .map(|(v, p)| {
            json!({
                "param": v,
                "eigenvalues": p.decomposition.eigenvalues(),
                "bright_probs": p.decomposition.bright_probs(),
                "lines": p.lines,
                "peaks": p.peaks,
                "match": p.report,
            })
        })
        .collect();
    w.json(
        "sweep.json",
        json!({ "family": r.family, "values": r.values, "points": points }),
    )?;

    let freqs = &r.points[0].spectrum.freqs;
    let z: Vec<Vec<f64>> = r.points.iter().map(|p| p.spectrum.psd.clone()).collect();
    let overlay: Vec<(f64, f64)> = r
        .values
        .iter()
        .zip(&r.points)
        .flat_map(|(v, p)| p.lines.iter().map(move |l| (*v, l.freq_mhz())))
        .collect();
    w.svg(
        "spectrogram.svg",
        heatmap("Spectrogram", "parameter", "f (MHz)", &r.values, freqs, &z, &overlay),
    )?;
    let mut levels: Vec<Series> = Vec::new();
    let dim = r.points[0].decomposition.dim();
    if r.points.iter().all(|p| p.decomposition.dim() == dim) {
        for j in 0..dim {
            levels.push(Series {
                name: format!("lambda_{}", j + 1),
                points: r
                    .values
                    .iter()
                    .zip(&r.points)
                    .map(|(v, p)| (*v, crate::rad_per_us_to_mhz(p.decomposition.eigenvalues()[j])))
                    .collect(),
            });
        }
    }
    w.svg("levels.svg", line_plot("Energy levels", "parameter", "E/2pi (MHz)", &levels))?;
    Ok(())
}
