//! Fourier spectroscopy of P0(t): spectra, peaks, line matching and sweeps.

use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynamics::TimeSeries;
use crate::spectral::{TransitionLine, DEFAULT_EPS_BRIGHT};
use crate::{Error, Result};

mod pipeline;
pub mod svg;

pub use pipeline::{
    build_hamiltonian, hexagon_sweep, run_pipeline, sweep, PipelineSettings, PointResult, SweepResult,
};

/// Spectra need at least this many samples.
pub const MIN_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rect,
    #[default]
    Hann,
}

impl Window {
    /// Symmetric window of length n.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; n],
            Window::Hann if n < 2 => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / (n - 1) as f64).cos()))
                .collect(),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Rect => "rect",
            Window::Hann => "hann",
        })
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rect" | "rectangular" | "none" => Ok(Window::Rect),
            "hann" | "hanning" => Ok(Window::Hann),
            other => Err(Error::Parameter(format!("unknown window '{other}'"))),
        }
    }
}

/// Spectral-analysis settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisParams {
    pub window: Window,
    pub zero_pad_factor: usize,
    /// Peak prominence threshold as a fraction of the largest non-DC PSD.
    pub min_prominence: f64,
    /// Relative-error tolerance for a matched line.
    pub tol_frac: f64,
    /// Bright-state threshold on |A_j|².
    pub eps_bright: f64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            window: Window::Hann,
            zero_pad_factor: 8,
            min_prominence: 0.02,
            tol_frac: 0.10,
            eps_bright: DEFAULT_EPS_BRIGHT,
        }
    }
}

impl AnalysisParams {
    pub fn validate(&self) -> Result<()> {
        if self.zero_pad_factor == 0 {
            return Err(Error::Parameter("zero_pad_factor must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.min_prominence) {
            return Err(Error::Parameter(format!(
                "min_prominence must be in [0, 1), got {}",
                self.min_prominence
            )));
        }
        if !(self.tol_frac > 0.0) {
            return Err(Error::Parameter(format!("tol_frac must be > 0, got {}", self.tol_frac)));
        }
        if !(self.eps_bright >= 0.0) {
            return Err(Error::Parameter(format!("eps_bright must be >= 0, got {}", self.eps_bright)));
        }
        Ok(())
    }
}

/// One-sided power spectrum of a mean-subtracted, windowed, zero-padded
/// series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// Bin frequencies in MHz, `k / (zero_pad_factor · N · dt)`.
    pub freqs: Vec<f64>,
    /// Normalized so that `Σ psd` equals the mean square of the windowed,
    /// mean-subtracted signal.
    pub psd: Vec<f64>,
    pub window: Window,
    pub zero_pad_factor: usize,
    pub n_samples: usize,
    pub dt: f64,
    /// Mean of the raw series: the constant term of P0(t).
    pub mean: f64,
}

impl Spectrum {
    /// Padded bin spacing, MHz.
    pub fn bin_width(&self) -> f64 {
        1.0 / (self.zero_pad_factor as f64 * self.n_samples as f64 * self.dt)
    }

    /// Unpadded bin spacing 1/(N·dt), the resolution of the record.
    pub fn resolution(&self) -> f64 {
        1.0 / (self.n_samples as f64 * self.dt)
    }

    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum()
    }

    /// CSV `freq_MHz,psd`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "freq_MHz,psd")?;
        for (f, p) in self.freqs.iter().zip(&self.psd) {
            writeln!(w, "{f},{p}")?;
        }
        Ok(())
    }
}

/// Power spectrum of `series`. The DC bin is kept (it holds leakage only,
/// since the mean is removed first) but never reported as a peak.
pub fn fourier_spectrum(series: &TimeSeries, window: Window, zero_pad_factor: usize) -> Result<Spectrum> {
    let n = series.values.len();
    if n < MIN_SAMPLES {
        return Err(Error::Parameter(format!(
            "spectrum needs at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    if zero_pad_factor == 0 {
        return Err(Error::Parameter("zero_pad_factor must be >= 1".into()));
    }
    let mean = series.values.iter().sum::<f64>() / n as f64;
    let nfft = n * zero_pad_factor;
    let mut buf: Vec<Complex64> = series
        .values
        .iter()
        .zip(window.coefficients(n))
        .map(|(v, w)| Complex64::new((v - mean) * w, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(nfft)
        .collect();
    FftPlanner::<f64>::new().plan_fft_forward(nfft).process(&mut buf);
    let half = nfft / 2;
    let norm = (nfft * n) as f64;
    let psd = (0..=half)
        .map(|k| {
            let c = if k == 0 || (nfft.is_multiple_of(2) && k == half) { 1.0 } else { 2.0 };
            c * buf[k].norm_sqr() / norm
        })
        .collect();
    let dt = series.grid.dt;
    let freqs = (0..=half).map(|k| k as f64 / (nfft as f64 * dt)).collect();
    Ok(Spectrum {
        freqs,
        psd,
        window,
        zero_pad_factor,
        n_samples: n,
        dt,
        mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    /// Interpolated frequency, MHz.
    pub freq_mhz: f64,
    pub height: f64,
    pub prominence: f64,
    /// Bin index of the local maximum.
    pub bin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakSet {
    /// Sorted by frequency.
    pub peaks: Vec<Peak>,
    /// Absolute prominence threshold used.
    pub threshold: f64,
    /// Unpadded bin spacing of the source spectrum, MHz.
    pub resolution_mhz: f64,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn freqs(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.freq_mhz).collect()
    }
}

/// Spectra whose largest non-DC value is below this are treated as flat.
const FLAT_FLOOR: f64 = 1e-20;

/// Local maxima (excluding DC) whose topographic prominence is at least
/// `min_prominence_frac · max(psd)`; the frequency is refined by a parabola
/// through the log-PSD of the three bins around the maximum.
pub fn detect_peaks(spec: &Spectrum, min_prominence_frac: f64) -> PeakSet {
    let y = &spec.psd;
    let n = y.len();
    let max = y.iter().skip(1).copied().fold(0.0, f64::max);
    let threshold = min_prominence_frac * max;
    let mut peaks = Vec::new();
    if max > FLAT_FLOOR && n >= 4 {
        for k in 2..n - 1 {
            if !(y[k] > y[k - 1] && y[k] >= y[k + 1]) {
                continue;
            }
            let prominence = y[k] - left_base(y, k).max(right_base(y, k));
            if prominence < threshold || prominence <= 0.0 {
                continue;
            }
            peaks.push(Peak {
                freq_mhz: spec.freqs[k] + interpolate(y[k - 1], y[k], y[k + 1]) * spec.bin_width(),
                height: y[k],
                prominence,
                bin: k,
            });
        }
    }
    PeakSet {
        peaks,
        threshold,
        resolution_mhz: spec.resolution(),
    }
}

fn left_base(y: &[f64], k: usize) -> f64 {
    let mut lo = y[k];
    for i in (1..k).rev() {
        if y[i] > y[k] {
            break;
        }
        lo = lo.min(y[i]);
    }
    lo
}

fn right_base(y: &[f64], k: usize) -> f64 {
    let mut lo = y[k];
    for &v in &y[k + 1..] {
        if v > y[k] {
            break;
        }
        lo = lo.min(v);
    }
    lo
}

/// Vertex offset in bins of the parabola through three samples, on log
/// scale when all are positive.
fn interpolate(a: f64, b: f64, c: f64) -> f64 {
    let (a, b, c) = if a > 0.0 && b > 0.0 && c > 0.0 {
        (a.ln(), b.ln(), c.ln())
    } else {
        (a, b, c)
    };
    let den = a - 2.0 * b + c;
    if den.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        (0.5 * (a - c) / den).clamp(-0.5, 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineMatch {
    pub line_freq: f64,
    pub peak_freq: f64,
    pub rel_err: f64,
    pub weight: f64,
    pub within_tol: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissedLine {
    pub line_freq: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpuriousPeak {
    pub peak_freq: f64,
    pub height: f64,
    pub prominence: f64,
}

/// Peak/line assignment. Frequencies in MHz.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub matches: Vec<LineMatch>,
    pub missed: Vec<MissedLine>,
    pub spurious: Vec<SpuriousPeak>,
    pub tol_frac: f64,
    /// Maximum peak–line distance for an assignment, MHz.
    pub capture_mhz: f64,
}

impl MatchReport {
    /// True when every matched pair is within tolerance.
    pub fn all_within_tol(&self) -> bool {
        self.matches.iter().all(|m| m.within_tol)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.matches.iter().map(|m| m.rel_err).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Capture radius, in unpadded bins.
pub const CAPTURE_BINS: f64 = 2.0;

/// Greedy assignment: theoretical lines are first merged when closer than
/// one unpadded bin (weighted-mean frequency, summed weight); then, in order
/// of decreasing weight, each line takes the nearest free peak within
/// [`CAPTURE_BINS`] unpadded bins.
pub fn match_lines(peaks: &PeakSet, lines: &[TransitionLine], tol_frac: f64) -> MatchReport {
    let res = peaks.resolution_mhz;
    let mut sorted: Vec<(f64, f64)> = lines.iter().map(|l| (l.freq_mhz(), l.weight)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (f, w) in sorted {
        match merged.last_mut() {
            Some((mf, mw)) if f - *mf < res => {
                let total = *mw + w;
                if total > 0.0 {
                    *mf = (*mf * *mw + f * w) / total;
                }
                *mw = total;
            }
            _ => merged.push((f, w)),
        }
    }
    let mut order: Vec<usize> = (0..merged.len()).collect();
    order.sort_by(|&a, &b| merged[b].1.total_cmp(&merged[a].1).then(a.cmp(&b)));

    let capture = CAPTURE_BINS * res;
    let mut taken = vec![false; peaks.peaks.len()];
    let mut matches = Vec::new();
    let mut missed = Vec::new();
    for i in order {
        let (f, w) = merged[i];
        let best = peaks
            .peaks
            .iter()
            .enumerate()
            .filter(|(p, _)| !taken[*p])
            .map(|(p, pk)| (p, (pk.freq_mhz - f).abs()))
            .filter(|&(_, d)| d <= capture)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((p, d)) => {
                taken[p] = true;
                let rel_err = if f > 0.0 { d / f } else { f64::INFINITY };
                matches.push(LineMatch {
                    line_freq: f,
                    peak_freq: peaks.peaks[p].freq_mhz,
                    rel_err,
                    weight: w,
                    within_tol: rel_err < tol_frac,
                });
            }
            None => missed.push(MissedLine { line_freq: f, weight: w }),
        }
    }
    matches.sort_by(|a, b| a.line_freq.total_cmp(&b.line_freq));
    missed.sort_by(|a, b| a.line_freq.total_cmp(&b.line_freq));
    let spurious = peaks
        .peaks
        .iter()
        .zip(&taken)
        .filter(|(_, &t)| !t)
        .map(|(p, _)| SpuriousPeak {
            peak_freq: p.freq_mhz,
            height: p.height,
            prominence: p.prominence,
        })
        .collect();
    MatchReport {
        matches,
        missed,
        spurious,
        tol_frac,
        capture_mhz: capture,
    }
}
