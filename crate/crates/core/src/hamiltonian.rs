//! Dense Hamiltonians on the product basis.
//!
//! Basis convention: index `b` encodes the bitstring `b1 b2 … bN` with atom 1
//! as the most significant bit; bit value 1 is the Rydberg state. Index 0 is
//! the all-ground state |W0⟩.
//!
//! Four models are provided:
//! * [`build_full`]: van der Waals interaction over all pairs,
//! * [`build_full_truncated`]: the same restricted to blockade-graph edges,
//! * [`build_ising`]: Pauli-form Ising model on a graph,
//! * [`build_pxp`]: perfect-blockade limit, restricted to independent sets.

use std::f64::consts::TAU;
use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::{AtomArrangement, BlockadeGraph};
use crate::{Error, Result};

/// Dense-matrix guard.
pub const MAX_QUBITS: usize = 12;

/// Default blockade radius (μm) at Ω = (2π) 1 MHz.
pub const DEFAULT_BLOCKADE_RADIUS: f64 = 10.0;

/// Hermiticity tolerance on max |H − H†|.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Full,
    Truncated,
    Ising,
    Pxp,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Full => "full",
            Model::Truncated => "truncated",
            Model::Ising => "ising",
            Model::Pxp => "pxp",
        })
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Model::Full),
            "truncated" => Ok(Model::Truncated),
            "ising" => Ok(Model::Ising),
            "pxp" => Ok(Model::Pxp),
            other => Err(Error::Parameter(format!("unknown model '{other}'"))),
        }
    }
}

/// Laser drive and interaction strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    /// Rabi angular frequency Ω, rad/μs.
    pub omega: f64,
    /// Van der Waals coefficient C6, rad·μm⁶/μs (positive: repulsive).
    pub c6: f64,
    /// Global detuning Δ, rad/μs.
    pub detuning: f64,
}

impl Default for DriveParams {
    /// Ω = (2π) 1 MHz and C6 = Ω·(10 μm)⁶.
    fn default() -> Self {
        let omega = TAU;
        Self {
            omega,
            c6: omega * DEFAULT_BLOCKADE_RADIUS.powi(6),
            detuning: 0.0,
        }
    }
}

impl DriveParams {
    pub fn new(omega: f64, c6: f64, detuning: f64) -> Result<Self> {
        let p = Self {
            omega,
            c6,
            detuning,
        };
        p.validate()?;
        Ok(p)
    }

    /// Ω given in MHz (Ω/2π) and C6 chosen so that r_b = |C6/Ω|^{1/6}.
    pub fn from_mhz_and_radius(omega_mhz: f64, r_b: f64) -> Result<Self> {
        let omega = omega_mhz * TAU;
        Self::new(omega, omega * r_b.powi(6), 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::Parameter(format!("omega must be > 0, got {}", self.omega)));
        }
        if !(self.c6.is_finite() && self.c6 > 0.0) {
            return Err(Error::Parameter(format!("c6 must be > 0, got {}", self.c6)));
        }
        if !self.detuning.is_finite() {
            return Err(Error::Parameter("detuning must be finite".into()));
        }
        Ok(())
    }

    /// r_b = |C6/Ω|^{1/6} in μm.
    pub fn blockade_radius(&self) -> f64 {
        (self.c6 / self.omega).abs().powf(1.0 / 6.0)
    }

    /// U(r) = C6 / r⁶.
    pub fn interaction(&self, r: f64) -> f64 {
        self.c6 / r.powi(6)
    }
}

/// Parameters of the graph Ising Hamiltonian
/// `H = J Σ_E σz σz + Σ_j (h_x σx + h_z^(j) σz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingParams {
    pub j_coupling: f64,
    pub h_x: f64,
    pub h_z: Vec<f64>,
}

/// Ising parameters plus the scalar offset that makes
/// `H_truncated = H_ising + offset·I` exact.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingMapping {
    pub params: IsingParams,
    pub offset: f64,
}

/// Longitudinal-field prefactor used by [`ising_params_from_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LongitudinalFactor {
    /// h_z^(j) = −‖E_j‖ U(d)/4, from n̂ = (1 − σz)/2.
    #[default]
    Derived,
    /// h_z^(j) = −‖E_j‖ U(d)/2 as originally printed; breaks the identity
    /// with the van der Waals model.
    Printed,
}

/// Dense Hermitian matrix on a set of product-basis states.
///
/// For every model except PXP the basis is the full `0..2^N`. The PXP
/// operator is stored on its invariant independent-set sector only, so its
/// eigenindices count sector states.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    n_qubits: usize,
    basis: Vec<usize>,
    matrix: DMatrix<Complex64>,
    model: Model,
}

impl HamiltonianMatrix {
    /// Wraps a full-basis matrix. Fails on wrong shape or non-Hermitian input.
    pub fn from_dense(n_qubits: usize, matrix: DMatrix<Complex64>, model: Model) -> Result<Self> {
        check_capacity(n_qubits)?;
        let dim = 1usize << n_qubits;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Parameter(format!(
                "expected a {dim}x{dim} matrix for {n_qubits} qubits, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let h = Self {
            n_qubits,
            basis: (0..dim).collect(),
            matrix,
            model,
        };
        h.ensure_hermitian()?;
        Ok(h)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Product-basis state of each row, ascending; `basis()[0] == 0`.
    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn is_full_basis(&self) -> bool {
        self.basis.len() == 1 << self.n_qubits
    }

    /// max |H − H†|.
    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn ensure_hermitian(&self) -> Result<()> {
        let err = self.hermiticity_error();
        let scale = self.max_abs_entry().max(1.0);
        if err > HERMITIAN_TOL * scale {
            return Err(Error::Validation(format!(
                "matrix is not Hermitian: max |H - H^dagger| = {err:e}"
            )));
        }
        Ok(())
    }

    /// Largest absolute entry, ‖H‖_max.
    pub fn max_abs_entry(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Embeds into the full `2^N` basis, zero outside the stored sector.
    pub fn to_full_basis(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut out = DMatrix::zeros(dim, dim);
        for (i, &bi) in self.basis.iter().enumerate() {
            for (j, &bj) in self.basis.iter().enumerate() {
                out[(bi, bj)] = self.matrix[(i, j)];
            }
        }
        out
    }

    /// Writes nonzero entries as CSV `row,col,re,im` over product-basis
    /// indices.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "row,col,re,im")?;
        for (i, &bi) in self.basis.iter().enumerate() {
            for (j, &bj) in self.basis.iter().enumerate() {
                let z = self.matrix[(i, j)];
                if z.re != 0.0 || z.im != 0.0 {
                    writeln!(w, "{bi},{bj},{},{}", z.re, z.im)?;
                }
            }
        }
        Ok(())
    }
}

fn check_capacity(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Parameter("need at least one qubit".into()));
    }
    if n > MAX_QUBITS {
        return Err(Error::Capacity { n, max: MAX_QUBITS });
    }
    Ok(())
}

#[inline]
fn bit(state: usize, atom: usize, n: usize) -> usize {
    (state >> (n - 1 - atom)) & 1
}

#[inline]
fn flip_mask(atom: usize, n: usize) -> usize {
    1 << (n - 1 - atom)
}

fn van_der_waals(
    arr: &AtomArrangement,
    drive: &DriveParams,
    pairs: &[(usize, usize)],
    model: Model,
) -> Result<HamiltonianMatrix> {
    drive.validate()?;
    let n = arr.len();
    check_capacity(n)?;
    let dim = 1usize << n;
    let couplings: Vec<(usize, f64)> = pairs
        .iter()
        .map(|&(j, k)| (flip_mask(j, n) | flip_mask(k, n), drive.interaction(arr.distance(j, k))))
        .collect();
    let half = Complex64::new(drive.omega / 2.0, 0.0);
    let mut m = DMatrix::zeros(dim, dim);
    for s in 0..dim {
        let mut diag = -drive.detuning * s.count_ones() as f64;
        for &(mask, u) in &couplings {
            if s & mask == mask {
                diag += u;
            }
        }
        m[(s, s)] = Complex64::new(diag, 0.0);
        for j in 0..n {
            m[(s ^ flip_mask(j, n), s)] = half;
        }
    }
    Ok(HamiltonianMatrix {
        n_qubits: n,
        basis: (0..dim).collect(),
        matrix: m,
        model,
    })
}

/// `H = (Ω/2) Σ_j σx^(j) + Σ_{j<k} C6/r_jk⁶ n̂_j n̂_k − Δ Σ_j n̂_j` over all pairs.
pub fn build_full(arr: &AtomArrangement, drive: &DriveParams) -> Result<HamiltonianMatrix> {
    let pairs: Vec<_> = arr.pairs().map(|(j, k, _)| (j, k)).collect();
    van_der_waals(arr, drive, &pairs, Model::Full)
}

/// As [`build_full`] with the interaction sum restricted to graph edges.
pub fn build_full_truncated(
    arr: &AtomArrangement,
    drive: &DriveParams,
    graph: &BlockadeGraph,
) -> Result<HamiltonianMatrix> {
    if graph.n_vertices() != arr.len() {
        return Err(Error::Parameter(format!(
            "graph has {} vertices but arrangement has {} atoms",
            graph.n_vertices(),
            arr.len()
        )));
    }
    let pairs: Vec<_> = graph.edges().iter().copied().collect();
    van_der_waals(arr, drive, &pairs, Model::Truncated)
}

/// Pauli-form Ising Hamiltonian with σz|0⟩ = +|0⟩, σz|1⟩ = −|1⟩.
pub fn build_ising(graph: &BlockadeGraph, params: &IsingParams) -> Result<HamiltonianMatrix> {
    let n = graph.n_vertices();
    check_capacity(n)?;
    if params.h_z.len() != n {
        return Err(Error::Parameter(format!(
            "h_z has {} entries for a {n}-vertex graph",
            params.h_z.len()
        )));
    }
    let dim = 1usize << n;
    let sz = |s: usize, j: usize| 1.0 - 2.0 * bit(s, j, n) as f64;
    let hx = Complex64::new(params.h_x, 0.0);
    let mut m = DMatrix::zeros(dim, dim);
    for s in 0..dim {
        let zz: f64 = graph.edges().iter().map(|&(a, b)| sz(s, a) * sz(s, b)).sum();
        let z: f64 = (0..n).map(|j| params.h_z[j] * sz(s, j)).sum();
        m[(s, s)] = Complex64::new(params.j_coupling * zz + z, 0.0);
        for j in 0..n {
            m[(s ^ flip_mask(j, n), s)] = hx;
        }
    }
    Ok(HamiltonianMatrix {
        n_qubits: n,
        basis: (0..dim).collect(),
        matrix: m,
        model: Model::Ising,
    })
}

/// Ising parameters equivalent to the edge-truncated van der Waals model.
pub fn ising_params_from(drive: &DriveParams, graph: &BlockadeGraph) -> Result<IsingMapping> {
    ising_params_from_with(drive, graph, LongitudinalFactor::Derived)
}

/// Expanding n̂ = (1 − σz)/2 in the truncated model gives J = U(d)/4,
/// h_x = Ω/2, h_z^(j) = −‖E_j‖U(d)/4 + Δ/2 and offset ‖E‖U(d)/4 − NΔ/2.
pub fn ising_params_from_with(
    drive: &DriveParams,
    graph: &BlockadeGraph,
    factor: LongitudinalFactor,
) -> Result<IsingMapping> {
    drive.validate()?;
    let n = graph.n_vertices();
    let u = if graph.n_edges() == 0 {
        0.0
    } else {
        let d = graph.edge_length().ok_or_else(|| {
            Error::Parameter("graph has no common edge length; Ising mapping undefined".into())
        })?;
        drive.interaction(d)
    };
    let hz_scale = match factor {
        LongitudinalFactor::Derived => 4.0,
        LongitudinalFactor::Printed => 2.0,
    };
    let h_z = (0..n)
        .map(|j| -(graph.degree(j) as f64) * u / hz_scale + drive.detuning / 2.0)
        .collect();
    Ok(IsingMapping {
        params: IsingParams {
            j_coupling: u / 4.0,
            h_x: drive.omega / 2.0,
            h_z,
        },
        offset: graph.n_edges() as f64 * u / 4.0 - n as f64 * drive.detuning / 2.0,
    })
}

/// Perfect-blockade Hamiltonian
/// `H = (Ω/2) Σ_j [Π_{k∈nbr(j)} (1 − n̂_k)] σx^(j)` on the independent-set
/// sector that contains |W0⟩.
pub fn build_pxp(graph: &BlockadeGraph, omega: f64) -> Result<HamiltonianMatrix> {
    let n = graph.n_vertices();
    check_capacity(n)?;
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::Parameter(format!("omega must be > 0, got {omega}")));
    }
    let basis = graph.independent_sets();
    let dim = basis.len();
    let nbr: Vec<usize> = (0..n).map(|j| graph.neighbor_mask(j)).collect();
    let half = Complex64::new(omega / 2.0, 0.0);
    let mut m = DMatrix::zeros(dim, dim);
    for (col, &s) in basis.iter().enumerate() {
        for (j, &mask) in nbr.iter().enumerate() {
            if s & mask != 0 {
                continue;
            }
            let t = s ^ flip_mask(j, n);
            if let Ok(row) = basis.binary_search(&t) {
                m[(row, col)] = half;
            }
        }
    }
    Ok(HamiltonianMatrix {
        n_qubits: n,
        basis,
        matrix: m,
        model: Model::Pxp,
    })
}
