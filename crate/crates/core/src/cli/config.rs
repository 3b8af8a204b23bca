//! Experiment configuration files and built-in presets.

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisParams, PipelineSettings};
use crate::dynamics::{NoiseParams, TimeGrid};
use crate::geometry::{AtomArrangement, ArrangementRecord, AtomRecord, TransformFamily};
use crate::hamiltonian::{DriveParams, Model, DEFAULT_BLOCKADE_RADIUS};
use crate::{mhz_to_rad_per_us, Error, Result};

/// Relative tolerance for `c6` and `r_b_um` given together.
const C6_CONSISTENCY_TOL: f64 = 1e-6;

/// Atom positions: a transformation family at one parameter value, or an
/// explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<TransformFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default = "default_d")]
    pub d_um: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomRecord>>,
}

fn default_d() -> f64 {
    8.0
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            family: Some(TransformFamily::StarToTetrahedron),
            value: Some(0.0),
            d_um: default_d(),
            atoms: None,
        }
    }
}

impl GeometryConfig {
    pub fn family(family: TransformFamily, value: f64, d_um: f64) -> Self {
        Self {
            family: Some(family),
            value: Some(value),
            d_um,
            atoms: None,
        }
    }

    pub fn arrangement(&self) -> Result<AtomArrangement> {
        match (&self.family, self.value, &self.atoms) {
            (Some(f), Some(v), None) => f.arrangement(v, self.d_um),
            (None, None, Some(atoms)) => AtomArrangement::from_record(&ArrangementRecord { atoms: atoms.clone() }),
            (Some(_), None, None) => Err(Error::Parameter("geometry.value is required with geometry.family".into())),
            (None, Some(_), None) => Err(Error::Parameter("geometry.family is required with geometry.value".into())),
            _ => Err(Error::Parameter(
                "geometry needs either family + value or an atoms list, not both".into(),
            )),
        }
    }
}

/// Drive settings as written in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    /// Ω/2π in MHz.
    #[serde(default = "default_omega_mhz")]
    pub omega_mhz: f64,
    /// C6 in rad·μm⁶/μs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c6: Option<f64>,
    /// Blockade radius; sets C6 = Ω·r_b⁶ when `c6` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_b_um: Option<f64>,
    /// Δ/2π in MHz.
    #[serde(default)]
    pub detuning_mhz: f64,
}

fn default_omega_mhz() -> f64 {
    1.0
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            omega_mhz: default_omega_mhz(),
            c6: None,
            r_b_um: None,
            detuning_mhz: 0.0,
        }
    }
}

impl DriveConfig {
    pub fn resolve(&self) -> Result<DriveParams> {
        if !(self.omega_mhz.is_finite() && self.omega_mhz > 0.0) {
            return Err(Error::Parameter(format!("drive.omega_mhz must be > 0, got {}", self.omega_mhz)));
        }
        let omega = mhz_to_rad_per_us(self.omega_mhz);
        let c6 = match (self.c6, self.r_b_um) {
            (Some(c6), None) => c6,
            (None, r_b) => {
                let r_b = r_b.unwrap_or(DEFAULT_BLOCKADE_RADIUS);
                if !(r_b.is_finite() && r_b > 0.0) {
                    return Err(Error::Parameter(format!("drive.r_b_um must be > 0, got {r_b}")));
                }
                omega * r_b.powi(6)
            }
            (Some(c6), Some(r_b)) => {
                let implied = omega * r_b.powi(6);
                if ((c6 - implied) / implied).abs() > C6_CONSISTENCY_TOL {
                    return Err(Error::Parameter(format!(
                        "drive.c6 = {c6} is inconsistent with drive.r_b_um = {r_b} (implies {implied})"
                    )));
                }
                c6
            }
        };
        DriveParams::new(omega, c6, mhz_to_rad_per_us(self.detuning_mhz))
            .map_err(|e| Error::Parameter(format!("drive: {e}")))
    }

    /// Same drive with both `c6` and `r_b_um` filled in.
    pub fn materialized(&self) -> Result<Self> {
        let p = self.resolve()?;
        Ok(Self {
            c6: Some(p.c6),
            r_b_um: Some(p.blockade_radius()),
            ..*self
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; overridden by `--out` and the environment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            formats: default_formats(),
        }
    }
}

/// Sweep settings used by the `sweep` command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub family: TransformFamily,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Range in family units (z/d for the hexagon family); defaults to the
    /// family domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<f64>,
}

fn default_steps() -> usize {
    21
}

impl SweepConfig {
    pub fn range(&self) -> (f64, f64) {
        let (lo, hi) = self.family.domain();
        (self.from.unwrap_or(lo), self.to.unwrap_or(hi))
    }
}

/// Complete description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub drive: DriveConfig,
    #[serde(default = "default_model")]
    pub model: Model,
    #[serde(default)]
    pub noise: Option<NoiseParams>,
    #[serde(default)]
    pub grid: TimeGrid,
    #[serde(default)]
    pub analysis: AnalysisParams,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn default_model() -> Model {
    Model::Full
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            drive: DriveConfig::default(),
            model: default_model(),
            noise: None,
            grid: TimeGrid::default(),
            analysis: AnalysisParams::default(),
            output: OutputConfig::default(),
            sweep: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.drive.resolve()?;
        self.grid.validate().map_err(|e| Error::Parameter(format!("grid: {e}")))?;
        self.analysis.validate().map_err(|e| Error::Parameter(format!("analysis: {e}")))?;
        if let Some(n) = &self.noise {
            n.validate().map_err(|e| Error::Parameter(format!("noise: {e}")))?;
        }
        if !(self.geometry.d_um.is_finite() && self.geometry.d_um > 0.0) {
            return Err(Error::Parameter(format!("geometry.d_um must be > 0, got {}", self.geometry.d_um)));
        }
        if self.sweep.is_none() || self.geometry.atoms.is_some() || self.geometry.family.is_some() {
            self.geometry.arrangement()?;
        }
        if let Some(s) = &self.sweep {
            if s.steps < 2 {
                return Err(Error::Parameter(format!("sweep.steps must be >= 2, got {}", s.steps)));
            }
        }
        Ok(())
    }

    /// Copy with every default written out, `c6` and `r_b_um` both set, and
    /// the output directory dropped (it does not affect results).
    pub fn materialized(&self) -> Result<Self> {
        let mut c = self.clone();
        c.drive = self.drive.materialized()?;
        c.output.directory = None;
        Ok(c)
    }

    pub fn pipeline_settings(&self) -> Result<PipelineSettings> {
        Ok(PipelineSettings {
            drive: self.drive.resolve()?,
            model: self.model,
            noise: self.noise,
            grid: self.grid,
            analysis: self.analysis,
        })
    }
}

/// Named configurations for the published experiments.
pub const PRESETS: [&str; 11] = [
    "triangle-60",
    "triangle-90",
    "triangle-180",
    "s4",
    "k4",
    "c4",
    "k4e",
    "hexagon-0",
    "hexagon-0.75d",
    "hexagon-1.5d",
    "decoupled-trios",
];

/// Looks up a preset. N = 3 and 4 presets use Ω = (2π) 1 MHz and r_b = 10 μm;
/// the six-atom presets use (2π) 0.8 MHz and r_b = 11 μm. All use d = 8 μm.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let n34 = DriveConfig {
        omega_mhz: 1.0,
        c6: None,
        r_b_um: Some(10.0),
        detuning_mhz: 0.0,
    };
    let n6 = DriveConfig {
        omega_mhz: 0.8,
        r_b_um: Some(11.0),
        ..n34
    };
    let (family, value, drive, model) = match name {
        "triangle-60" => (TransformFamily::ThreeAtomBend, 60.0, n34, Model::Pxp),
        "triangle-90" => (TransformFamily::ThreeAtomBend, 90.0, n34, Model::Full),
        "triangle-180" => (TransformFamily::ThreeAtomBend, 180.0, n34, Model::Full),
        "s4" => (TransformFamily::StarToTetrahedron, 0.0, n34, Model::Pxp),
        "k4" => (TransformFamily::StarToTetrahedron, 1.0, n34, Model::Pxp),
        "c4" => (TransformFamily::TetraToSquare, 1.0, n34, Model::Pxp),
        "k4e" => (TransformFamily::SquareToDiamond, 1.0, n34, Model::Pxp),
        "hexagon-0" => (TransformFamily::HexagonToAntiprism, 0.0, n6, Model::Full),
        "hexagon-0.75d" => (TransformFamily::HexagonToAntiprism, 0.75, n6, Model::Full),
        "hexagon-1.5d" => (TransformFamily::HexagonToAntiprism, 1.5, n6, Model::Full),
        "decoupled-trios" => (TransformFamily::HexagonToAntiprism, 1.5, n6, Model::Pxp),
        other => {
            return Err(Error::Parameter(format!(
                "unknown preset '{other}'; available: {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(ExperimentConfig {
        geometry: GeometryConfig::family(family, value, 8.0),
        drive,
        model,
        ..ExperimentConfig::default()
    })
}

/// Preset used by `sweep --family` when no config or preset is given.
pub fn family_default_preset(family: TransformFamily) -> &'static str {
    match family {
        TransformFamily::ThreeAtomBend => "triangle-90",
        TransformFamily::HexagonToAntiprism => "hexagon-0",
        _ => "s4",
    }
}
