//! Single-configuration pipeline and parameter sweeps.

use std::io::Write;

use rayon::prelude::*;

use super::{detect_peaks, fourier_spectrum, match_lines, AnalysisParams, MatchReport, PeakSet, Spectrum};
use crate::dynamics::{apply_spam, p0_closed_form, p0_lindblad, sample_shots_with, NoiseParams, TimeGrid, TimeSeries};
use crate::geometry::{blockade_graph, AtomArrangement, TransformFamily};
use crate::hamiltonian::{
    build_full, build_full_truncated, build_ising, build_pxp, ising_params_from, DriveParams,
    HamiltonianMatrix, Model,
};
use crate::rng::stream_rng;
use crate::spectral::{bright_lines, diagonalize, SpectralDecomposition, TransitionLine};
use crate::{Error, Result};

/// Everything except the geometry needed to go from atoms to a matched
/// spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineSettings {
    pub drive: DriveParams,
    pub model: Model,
    /// `None` analyzes the ideal series.
    pub noise: Option<NoiseParams>,
    pub grid: TimeGrid,
    pub analysis: AnalysisParams,
}

impl PipelineSettings {
    pub fn ideal(drive: DriveParams, model: Model) -> Self {
        Self {
            drive,
            model,
            noise: None,
            grid: TimeGrid::default(),
            analysis: AnalysisParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.drive.validate()?;
        self.grid.validate()?;
        self.analysis.validate()?;
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        Ok(())
    }
}

/// Compiles `arr` under `model`. Graph-based models use the blockade radius
/// implied by `drive`.
pub fn build_hamiltonian(arr: &AtomArrangement, drive: &DriveParams, model: Model) -> Result<HamiltonianMatrix> {
    match model {
        Model::Full => build_full(arr, drive),
        Model::Truncated => {
            let g = blockade_graph(arr, drive.blockade_radius())?;
            build_full_truncated(arr, drive, &g)
        }
        Model::Ising => {
            let g = blockade_graph(arr, drive.blockade_radius())?;
            build_ising(&g, &ising_params_from(drive, &g)?.params)
        }
        Model::Pxp => {
            if drive.detuning != 0.0 {
                return Err(Error::Unsupported("the pxp model has no detuning term".into()));
            }
            let g = blockade_graph(arr, drive.blockade_radius())?;
            build_pxp(&g, drive.omega)
        }
    }
}

/// Outputs of one configuration.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub decomposition: SpectralDecomposition,
    pub lines: Vec<TransitionLine>,
    pub ideal: TimeSeries,
    /// Lindblad evolution with SPAM and shot noise applied, when noise is
    /// configured.
    pub measured: Option<TimeSeries>,
    /// Spectrum of `measured` if present, otherwise of `ideal`.
    pub spectrum: Spectrum,
    pub peaks: PeakSet,
    pub report: MatchReport,
}

impl PointResult {
    pub fn analyzed(&self) -> &TimeSeries {
        self.measured.as_ref().unwrap_or(&self.ideal)
    }
}

/// Hamiltonian → eigensystem → P0(t) → (noise) → spectrum → peaks → match.
/// Shot noise draws from stream `stream` of the noise seed.
pub fn run_pipeline(arr: &AtomArrangement, settings: &PipelineSettings, stream: u64) -> Result<PointResult> {
    settings.validate()?;
    let h = build_hamiltonian(arr, &settings.drive, settings.model)?;
    let sd = diagonalize(&h)?;
    let lines = bright_lines(&sd, settings.analysis.eps_bright);
    let ideal = p0_closed_form(&sd, &settings.grid)?;
    let measured = match &settings.noise {
        None => None,
        Some(noise) => {
            let evolved = if noise.gamma_phi > 0.0 {
                p0_lindblad(&h, noise, &settings.grid)?
            } else {
                ideal.clone()
            };
            let spam = apply_spam(&evolved, noise)?;
            let mut rng = stream_rng(noise.rng_seed, stream);
            Some(sample_shots_with(&spam, noise.n_shots, &mut rng)?)
        }
    };
    let a = &settings.analysis;
    let spectrum = fourier_spectrum(measured.as_ref().unwrap_or(&ideal), a.window, a.zero_pad_factor)?;
    let peaks = detect_peaks(&spectrum, a.min_prominence);
    let report = match_lines(&peaks, &lines, a.tol_frac);
    Ok(PointResult {
        decomposition: sd,
        lines,
        ideal,
        measured,
        spectrum,
        peaks,
        report,
    })
}

/// Per-value results of a transformation sweep, in parameter order.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub family: TransformFamily,
    /// Family parameter (θ in degrees, ξ/η/ζ, or z/d).
    pub values: Vec<f64>,
    pub points: Vec<PointResult>,
}

impl SweepResult {
    /// Long-format CSV `param,freq_MHz,psd`.
    pub fn write_spectrogram_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "param,freq_MHz,psd")?;
        for (v, p) in self.values.iter().zip(&self.points) {
            for (f, s) in p.spectrum.freqs.iter().zip(&p.spectrum.psd) {
                writeln!(w, "{v},{f},{s}")?;
            }
        }
        Ok(())
    }

    /// Theoretical line overlay, CSV `param,j,k,freq_MHz,weight`.
    pub fn write_lines_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "param,j,k,freq_MHz,weight")?;
        for (v, p) in self.values.iter().zip(&self.points) {
            for l in &p.lines {
                writeln!(w, "{v},{},{},{},{}", l.j, l.k, l.freq_mhz(), l.weight)?;
            }
        }
        Ok(())
    }

    /// CSV `param,index,eigenvalue_rad_per_us,bright_prob` for energy-level
    /// plots.
    pub fn write_levels_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "param,index,eigenvalue_rad_per_us,bright_prob")?;
        for (v, p) in self.values.iter().zip(&self.points) {
            let sd = &p.decomposition;
            for (j, (l, b)) in sd.eigenvalues().iter().zip(sd.bright_probs()).enumerate() {
                writeln!(w, "{v},{},{l},{b}", j + 1)?;
            }
        }
        Ok(())
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

fn run_points(
    family: TransformFamily,
    values: Vec<f64>,
    arrangements: Vec<AtomArrangement>,
    settings: &PipelineSettings,
) -> Result<SweepResult> {
    let results: Vec<Result<PointResult>> = arrangements
        .par_iter()
        .enumerate()
        .map(|(i, arr)| {
            run_pipeline(arr, settings, i as u64).map_err(|e| Error::SweepPoint {
                index: i,
                source: Box::new(e),
            })
        })
        .collect();
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { family, values, points })
}

/// Sweeps `family` over `n_steps` equally spaced values spanning `range`
/// (default: the family's domain) at length scale `d`. Point `i` uses shot
/// stream `i`.
pub fn sweep(
    family: TransformFamily,
    n_steps: usize,
    range: Option<(f64, f64)>,
    d: f64,
    settings: &PipelineSettings,
) -> Result<SweepResult> {
    if n_steps < 2 {
        return Err(Error::Parameter(format!("a sweep needs at least 2 steps, got {n_steps}")));
    }
    let (lo, hi) = range.unwrap_or_else(|| family.domain());
    if !(lo < hi) {
        return Err(Error::Parameter(format!("sweep range must be increasing, got [{lo}, {hi}]")));
    }
    settings.validate()?;
    let values = linspace(lo, hi, n_steps);
    let arrangements = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            family.arrangement(v, d).map_err(|e| Error::SweepPoint {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    run_points(family, values, arrangements, settings)
}

/// Hexagon → antiprism sweep over explicit plane separations `z_um`
/// (strictly increasing), always with the full interaction model. The
/// reported parameter is z/d.
pub fn hexagon_sweep(z_um: &[f64], d: f64, settings: &PipelineSettings) -> Result<SweepResult> {
    if z_um.len() < 2 {
        return Err(Error::Parameter("a sweep needs at least 2 values".into()));
    }
    if !z_um.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Parameter("z values must be strictly increasing".into()));
    }
    let settings = PipelineSettings {
        model: Model::Full,
        ..*settings
    };
    settings.validate()?;
    let family = TransformFamily::HexagonToAntiprism;
    let values: Vec<f64> = z_um.iter().map(|z| z / d).collect();
    let arrangements = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            family.arrangement(v, d).map_err(|e| Error::SweepPoint {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    run_points(family, values, arrangements, &settings)
}
