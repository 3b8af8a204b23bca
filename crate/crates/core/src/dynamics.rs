//! Return probability P0(t) = |⟨W0|e^{−iHt}|W0⟩|²: closed form, exact
//! unitary evolution, dephasing master equation, SPAM and shot noise.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::hamiltonian::HamiltonianMatrix;
use crate::rng::stream_rng;
use crate::spectral::{diagonalize, SpectralDecomposition};
use crate::{Error, Result};

/// Trace drift above which the master-equation integrator gives up.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-4;

/// Largest substep times ‖K‖ in the master-equation integrator.
pub const LAWSON_STEP_SCALE: f64 = 0.005;

/// Uniform samples `0, dt, …` up to `t_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(rename = "t_max_us")]
    pub t_max: f64,
    #[serde(rename = "dt_us")]
    pub dt: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self { t_max: 5.0, dt: 0.1 }
    }
}

impl TimeGrid {
    pub fn new(t_max: f64, dt: f64) -> Result<Self> {
        let g = Self { t_max, dt };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Parameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max >= self.dt) {
            return Err(Error::Parameter(format!(
                "t_max must be >= dt, got t_max = {}, dt = {}",
                self.t_max, self.dt
            )));
        }
        Ok(())
    }

    /// floor(t_max/dt) + 1, robust to round-off in the ratio.
    pub fn len(&self) -> usize {
        (self.t_max / self.dt + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }
}

/// Decoherence, SPAM and sampling settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    /// Dephasing rate per atom, 1/μs.
    pub gamma_phi: f64,
    /// Probability that an atom does not start in |0⟩.
    pub eps_prep: f64,
    /// Probability of reading a ground-state atom as excited.
    pub eps_det_0to1: f64,
    /// Probability of reading an excited atom as ground.
    pub eps_det_1to0: f64,
    pub n_shots: u64,
    pub rng_seed: u64,
}

impl Default for NoiseParams {
    /// γ_φ = 1/(10 μs); SPAM values are estimates.
    fn default() -> Self {
        Self {
            gamma_phi: 0.1,
            eps_prep: 0.03,
            eps_det_0to1: 0.02,
            eps_det_1to0: 0.05,
            n_shots: 150,
            rng_seed: 1,
        }
    }
}

impl NoiseParams {
    /// No decoherence, no SPAM; sampling settings kept.
    pub fn noiseless() -> Self {
        Self {
            gamma_phi: 0.0,
            eps_prep: 0.0,
            eps_det_0to1: 0.0,
            eps_det_1to0: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_phi.is_finite() && self.gamma_phi >= 0.0) {
            return Err(Error::Parameter(format!("gamma_phi must be >= 0, got {}", self.gamma_phi)));
        }
        for (name, p) in [
            ("eps_prep", self.eps_prep),
            ("eps_det_0to1", self.eps_det_0to1),
            ("eps_det_1to0", self.eps_det_1to0),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parameter(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.n_shots == 0 {
            return Err(Error::Parameter("n_shots must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Ideal,
    Lindblad,
    Sampled,
}

/// P0 samples on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub kind: SeriesKind,
    pub n_atoms: usize,
}

impl TimeSeries {
    pub fn new(grid: TimeGrid, values: Vec<f64>, kind: SeriesKind, n_atoms: usize) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::Parameter(format!(
                "{} values for a grid of {} samples",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            kind,
            n_atoms,
        })
    }

    /// CSV `t_us,p0`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t_us,p0")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.grid.time(i), v)?;
        }
        Ok(())
    }
}

/// Σ_j |A_j|⁴ + Σ_{j<k} B_jk cos(λ_jk t), summed over every pair with
/// nonzero weight.
pub fn p0_closed_form(sd: &SpectralDecomposition, grid: &TimeGrid) -> Result<TimeSeries> {
    grid.validate()?;
    let probs = sd.bright_probs();
    let l = sd.eigenvalues();
    let idx: Vec<usize> = (0..probs.len()).filter(|&j| probs[j] > 0.0).collect();
    let constant: f64 = idx.iter().map(|&j| probs[j] * probs[j]).sum();
    let mut terms = Vec::with_capacity(idx.len() * idx.len() / 2);
    for (a, &j) in idx.iter().enumerate() {
        for &k in &idx[a + 1..] {
            terms.push((2.0 * probs[j] * probs[k], l[k] - l[j]));
        }
    }
    let values = grid
        .times()
        .into_iter()
        .map(|t| constant + terms.iter().map(|&(b, w)| b * (w * t).cos()).sum::<f64>())
        .collect();
    TimeSeries::new(*grid, values, SeriesKind::Ideal, sd.n_qubits())
}

/// Exact state evolution through the eigendecomposition of `h`.
pub fn p0_unitary(h: &HamiltonianMatrix, grid: &TimeGrid) -> Result<TimeSeries> {
    Ok(p0_unitary_detailed(h, grid)?.0)
}

/// As [`p0_unitary`], also returning max |‖ψ(t)‖ − 1| over the grid.
pub fn p0_unitary_detailed(h: &HamiltonianMatrix, grid: &TimeGrid) -> Result<(TimeSeries, f64)> {
    grid.validate()?;
    let sd = diagonalize(h)?;
    let v = sd.eigenvectors();
    let w0 = h.basis().iter().position(|&b| b == 0).unwrap_or(0);
    // Coefficients of |W0⟩ in the eigenbasis: V† e_w0.
    let c0: DVector<Complex64> = v.row(w0).adjoint();
    let mut values = Vec::with_capacity(grid.len());
    let mut norm_err: f64 = 0.0;
    for t in grid.times() {
        let phased = DVector::from_iterator(
            c0.len(),
            c0.iter()
                .zip(sd.eigenvalues())
                .map(|(c, &l)| c * Complex64::from_polar(1.0, -l * t)),
        );
        let psi = v * phased;
        norm_err = norm_err.max((psi.norm() - 1.0).abs());
        values.push(psi[w0].norm_sqr());
    }
    if norm_err > 1e-10 {
        return Err(Error::Numerical(format!("state norm drifted by {norm_err:e}")));
    }
    Ok((TimeSeries::new(*grid, values, SeriesKind::Ideal, h.n_qubits())?, norm_err))
}

/// Integrator diagnostics of a master-equation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LindbladDiagnostics {
    pub substep: f64,
    pub n_substeps: usize,
    /// max |tr ρ − 1| over the grid.
    pub max_trace_drift: f64,
    /// Smallest eigenvalue of ρ over the grid.
    pub min_eigenvalue: f64,
}

/// ⟨W0|ρ(t)|W0⟩ under dρ/dt = −i[H,ρ] + γ_φ Σ_j (n̂_j ρ n̂_j − ½{n̂_j, ρ}).
pub fn p0_lindblad(h: &HamiltonianMatrix, noise: &NoiseParams, grid: &TimeGrid) -> Result<TimeSeries> {
    Ok(p0_lindblad_detailed(h, noise, grid, None)?.0)
}

/// Integrating-factor (Lawson) RK4. The diagonal of H and the dephasing
/// act elementwise on ρ in the product basis (ρ_ab gains the rate
/// −i(H_aa − H_bb) − γ_φ·hamming(a, b)/2) and are propagated exactly; RK4
/// handles the off-diagonal drive in that rotating frame.
///
/// The substep is `min(dt/20, LAWSON_STEP_SCALE/‖H_off‖_max)`, with
/// ‖H_off‖_max the largest off-diagonal |H_ac|, shrunk so that an integer
/// number of substeps spans each grid interval. `max_substep` caps
/// it further (used for convergence checks).
pub fn p0_lindblad_detailed(
    h: &HamiltonianMatrix,
    noise: &NoiseParams,
    grid: &TimeGrid,
    max_substep: Option<f64>,
) -> Result<(TimeSeries, LindbladDiagnostics)> {
    grid.validate()?;
    noise.validate()?;
    h.ensure_hermitian()?;
    let dim = h.dim();
    let basis = h.basis();
    let w0 = basis.iter().position(|&b| b == 0).unwrap_or(0);
    let hm = h.matrix();
    let neg_i = Complex64::new(0.0, -1.0);

    let rate: Vec<Complex64> = (0..dim * dim)
        .map(|ab| {
            let (a, b) = (ab / dim, ab % dim);
            let gap = hm[(a, a)].re - hm[(b, b)].re;
            let deph = 0.5 * noise.gamma_phi * (basis[a] ^ basis[b]).count_ones() as f64;
            Complex64::new(-deph, -gap)
        })
        .collect();
    let off: Vec<(usize, usize, Complex64)> = (0..dim)
        .flat_map(|a| (0..dim).map(move |c| (a, c)))
        .filter(|&(a, c)| a != c && hm[(a, c)] != Complex64::new(0.0, 0.0))
        .map(|(a, c)| (a, c, hm[(a, c)] * neg_i))
        .collect();
    let stiffness = off.iter().map(|t| t.2.norm()).fold(0.0, f64::max);

    let mut h_max = grid.dt / 20.0;
    if stiffness > 0.0 {
        h_max = h_max.min(LAWSON_STEP_SCALE / stiffness);
    }
    if let Some(cap) = max_substep {
        if !(cap > 0.0) {
            return Err(Error::Parameter(format!("substep cap must be > 0, got {cap}")));
        }
        h_max = h_max.min(cap);
    }
    let per_interval = (grid.dt / h_max).ceil() as usize;
    let step = grid.dt / per_interval as f64;
    let e_full: Vec<Complex64> = rate.iter().map(|r| (r * step).exp()).collect();
    let e_half: Vec<Complex64> = rate.iter().map(|r| (r * (0.5 * step)).exp()).collect();

    // Row-major −i[H_off, ρ] = X + X† with X = −i·H_off·ρ, valid because
    // every stage value is Hermitian.
    let drive = |rho: &[Complex64], out: &mut [Complex64]| {
        out.fill(Complex64::new(0.0, 0.0));
        for &(a, c, v) in &off {
            let src = &rho[c * dim..(c + 1) * dim];
            for (o, r) in out[a * dim..(a + 1) * dim].iter_mut().zip(src) {
                *o += v * r;
            }
        }
        for a in 0..dim {
            out[a * dim + a] = Complex64::new(2.0 * out[a * dim + a].re, 0.0);
            for b in a + 1..dim {
                let m = out[a * dim + b] + out[b * dim + a].conj();
                out[a * dim + b] = m;
                out[b * dim + a] = m.conj();
            }
        }
    };

    let zero = Complex64::new(0.0, 0.0);
    let mut rho = vec![zero; dim * dim];
    rho[w0 * dim + w0] = Complex64::new(1.0, 0.0);
    let mut values = Vec::with_capacity(grid.len());
    let mut diag = LindbladDiagnostics {
        substep: step,
        n_substeps: per_interval * (grid.len() - 1),
        max_trace_drift: 0.0,
        min_eigenvalue: 1.0,
    };
    let (mut k, mut acc, mut u) = (vec![zero; dim * dim], vec![zero; dim * dim], vec![zero; dim * dim]);
    let hs = step * 0.5;
    for i in 0..grid.len() {
        if i > 0 {
            for _ in 0..per_interval {
                drive(&rho, &mut k);
                for idx in 0..dim * dim {
                    acc[idx] = e_full[idx] * k[idx];
                    u[idx] = e_half[idx] * (rho[idx] + k[idx] * hs);
                }
                drive(&u, &mut k);
                for idx in 0..dim * dim {
                    acc[idx] += e_half[idx] * k[idx] * 2.0;
                    u[idx] = e_half[idx] * rho[idx] + k[idx] * hs;
                }
                drive(&u, &mut k);
                for idx in 0..dim * dim {
                    acc[idx] += e_half[idx] * k[idx] * 2.0;
                    u[idx] = e_full[idx] * rho[idx] + e_half[idx] * k[idx] * step;
                }
                drive(&u, &mut k);
                for idx in 0..dim * dim {
                    rho[idx] = e_full[idx] * rho[idx] + (acc[idx] + k[idx]) * (step / 6.0);
                }
            }
            // Remove round-off anti-Hermitian drift.
            for a in 0..dim {
                for b in a..dim {
                    let m = (rho[a * dim + b] + rho[b * dim + a].conj()) * 0.5;
                    rho[a * dim + b] = m;
                    rho[b * dim + a] = m.conj();
                }
            }
        }
        let rho_m = DMatrix::from_row_slice(dim, dim, &rho);
        let drift = (rho_m.trace() - Complex64::new(1.0, 0.0)).norm();
        diag.max_trace_drift = diag.max_trace_drift.max(drift);
        if !drift.is_finite() || drift > TRACE_DRIFT_LIMIT {
            return Err(Error::Numerical(format!(
                "master equation unstable at t = {} us: trace drift {drift:e}, substep {step:e} us",
                grid.time(i)
            )));
        }
        let min_ev = nalgebra::SymmetricEigen::new(rho_m)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        diag.min_eigenvalue = diag.min_eigenvalue.min(min_ev);
        values.push(rho[w0 * dim + w0].re);
    }
    Ok((TimeSeries::new(*grid, values, SeriesKind::Lindblad, h.n_qubits())?, diag))
}

/// Affine SPAM model applied per sample.
///
/// With q = (1 − ε_prep)^N the probability that all atoms start in |0⟩:
/// `P_meas = q(1 − ε01)^N · P + ε10 (1 − ε01)^{N−1} (1 − qP)`.
/// The second term counts runs that end with exactly one excitation read
/// as ground, keeping first order in ε10. Output is clamped to [0, 1].
pub fn apply_spam(series: &TimeSeries, noise: &NoiseParams) -> Result<TimeSeries> {
    noise.validate()?;
    let n = series.n_atoms as i32;
    let q = (1.0 - noise.eps_prep).powi(n);
    let keep = (1.0 - noise.eps_det_0to1).powi(n);
    let leak = noise.eps_det_1to0 * (1.0 - noise.eps_det_0to1).powi((n - 1).max(0));
    let values = series
        .values
        .iter()
        .map(|&p| (q * keep * p + leak * (1.0 - q * p)).clamp(0.0, 1.0))
        .collect();
    TimeSeries::new(series.grid, values, series.kind, series.n_atoms)
}

/// Binomial shot sampling on stream 0 of `noise.rng_seed`.
pub fn sample_shots(series: &TimeSeries, noise: &NoiseParams) -> Result<TimeSeries> {
    let mut rng = stream_rng(noise.rng_seed, 0);
    sample_shots_with(series, noise.n_shots, &mut rng)
}

/// Per-sample `Binomial(n_shots, p) / n_shots` drawn from `rng`.
pub fn sample_shots_with<R: Rng + ?Sized>(series: &TimeSeries, n_shots: u64, rng: &mut R) -> Result<TimeSeries> {
    if n_shots == 0 {
        return Err(Error::Parameter("n_shots must be >= 1".into()));
    }
    let mut values = Vec::with_capacity(series.values.len());
    for &p in &series.values {
        let dist = Binomial::new(n_shots, p.clamp(0.0, 1.0))
            .map_err(|e| Error::Numerical(format!("binomial sampling failed: {e}")))?;
        values.push(dist.sample(rng) as f64 / n_shots as f64);
    }
    TimeSeries::new(series.grid, values, SeriesKind::Sampled, series.n_atoms)
}
