//! Exact diagonalization and bright-state bookkeeping.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::geometry::{AtomArrangement, BlockadeGraph, GraphClass};
use crate::hamiltonian::{DriveParams, HamiltonianMatrix, Model};
use crate::{rad_per_us_to_mhz, Error, Result};

/// Eigenvalues closer than this (rad/μs) form one degenerate cluster.
pub const CLUSTER_GAP: f64 = 1e-9;
/// Default threshold on |A_j|² for a bright state.
pub const DEFAULT_EPS_BRIGHT: f64 = 1e-6;
/// Transition frequencies closer than this (rad/μs) are merged.
pub const LINE_MERGE_TOL: f64 = 1e-9;

/// Eigensystem of a [`HamiltonianMatrix`] with bright amplitudes
/// `A_j = ⟨W0|λ_j⟩`.
///
/// Indices returned by accessors are 0-based; reports and CSV use 1-based
/// indices over the matrix basis.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    n_qubits: usize,
    basis: Vec<usize>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<Complex64>,
    amplitudes: Vec<Complex64>,
    source: Model,
}

impl SpectralDecomposition {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Ascending eigenvalues, rad/μs.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `j` is the eigenvector of `eigenvalues()[j]`.
    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.eigenvectors
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// |A_j|².
    pub fn bright_probs(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn source(&self) -> Model {
        self.source
    }

    /// 0-based indices with |A_j|² > eps.
    pub fn bright_indices(&self, eps: f64) -> Vec<usize> {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > eps)
            .map(|(j, _)| j)
            .collect()
    }

    /// Eigenvector `j` embedded in the full 2^N product basis.
    pub fn state_full_basis(&self, j: usize) -> DVector<Complex64> {
        let mut v = DVector::zeros(1 << self.n_qubits);
        for (i, &b) in self.basis.iter().enumerate() {
            v[b] = self.eigenvectors[(i, j)];
        }
        v
    }

    /// max |V†V − I|.
    pub fn unitarity_error(&self) -> f64 {
        let v = &self.eigenvectors;
        let g = v.adjoint() * v;
        let n = g.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// max |H − VΛV†|.
    pub fn reconstruction_error(&self, h: &HamiltonianMatrix) -> f64 {
        let v = &self.eigenvectors;
        let lambda = DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim(),
            self.eigenvalues.iter().map(|&l| Complex64::new(l, 0.0)),
        ));
        let r = v * lambda * v.adjoint() - h.matrix();
        r.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// CSV `index,eigenvalue_rad_per_us,bright_prob` with 1-based indices.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,eigenvalue_rad_per_us,bright_prob")?;
        for (j, (l, a)) in self.eigenvalues.iter().zip(&self.amplitudes).enumerate() {
            writeln!(w, "{},{},{}", j + 1, l, a.norm_sqr())?;
        }
        Ok(())
    }
}

/// Hermitian eigendecomposition with deterministic degenerate subspaces and
/// phases.
///
/// Within a cluster of eigenvalues closer than [`CLUSTER_GAP`], the
/// projection of |W0⟩ becomes the single bright vector and is placed last;
/// the remaining (dark) vectors come from Gram–Schmidt on the projected
/// canonical basis vectors in basis-index order. Cluster eigenvalues are
/// replaced by their mean. Each vector is then rotated so that its
/// largest-magnitude component is real and positive.
pub fn diagonalize(h: &HamiltonianMatrix) -> Result<SpectralDecomposition> {
    h.ensure_hermitian()?;
    let dim = h.dim();
    let eig = nalgebra::SymmetricEigen::new(h.matrix().clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigensolver returned non-finite values".into()));
    }
    let mut vectors = DMatrix::<Complex64>::zeros(dim, dim);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }

    let w0 = h
        .basis()
        .iter()
        .position(|&b| b == 0)
        .ok_or_else(|| Error::Validation("basis does not contain |W0>".into()))?;

    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && values[end] - values[end - 1] < CLUSTER_GAP {
            end += 1;
        }
        if end - start > 1 {
            let mean = values[start..end].iter().sum::<f64>() / (end - start) as f64;
            values[start..end].fill(mean);
            let q = vectors.columns(start, end - start).into_owned();
            let fixed = canonical_cluster_basis(&q, w0);
            vectors.columns_mut(start, end - start).copy_from(&fixed);
        }
        start = end;
    }

    for j in 0..dim {
        let mut col = vectors.column_mut(j);
        let max = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let pivot = col
            .iter()
            .position(|z| z.norm() >= max * (1.0 - 1e-9))
            .unwrap_or(0);
        let z = col[pivot];
        if z.norm() > 0.0 {
            let phase = z.conj() / z.norm();
            col *= phase;
        }
    }

    let amplitudes = (0..dim).map(|j| vectors[(w0, j)]).collect();
    Ok(SpectralDecomposition {
        n_qubits: h.n_qubits(),
        basis: h.basis().to_vec(),
        eigenvalues: values,
        eigenvectors: vectors,
        amplitudes,
        source: h.model(),
    })
}

fn canonical_cluster_basis(q: &DMatrix<Complex64>, w0: usize) -> DMatrix<Complex64> {
    let (dim, m) = q.shape();
    let project = |i: usize| -> DVector<Complex64> {
        let coeffs = q.row(i).adjoint();
        q * coeffs
    };
    let bright = {
        let p = project(w0);
        let n = p.norm();
        (n > 1e-8).then(|| p / Complex64::new(n, 0.0))
    };
    let mut accepted: Vec<DVector<Complex64>> = bright.iter().cloned().collect();
    let mut dark = Vec::new();
    for i in 0..dim {
        if accepted.len() == m {
            break;
        }
        if bright.is_some() && i == w0 {
            continue;
        }
        let mut v = project(i);
        for _ in 0..2 {
            for u in &accepted {
                let c = u.dotc(&v);
                v -= u * c;
            }
        }
        let n = v.norm();
        if n > 1e-6 {
            let v = v / Complex64::new(n, 0.0);
            accepted.push(v.clone());
            dark.push(v);
        }
    }
    let mut out = DMatrix::zeros(dim, m);
    let mut cols = dark;
    cols.extend(bright);
    for (c, v) in cols.iter().enumerate().take(m) {
        out.set_column(c, v);
    }
    out
}

/// A cosine component of P0(t): frequency λ_k − λ_j and weight
/// B_jk = 2|A_j|²|A_k|².
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionLine {
    /// 1-based eigenindices, `j < k`.
    pub j: usize,
    pub k: usize,
    /// rad/μs.
    pub frequency: f64,
    pub weight: f64,
    /// All (j, k) pairs merged into this line, 1-based.
    pub pairs: Vec<(usize, usize)>,
}

impl TransitionLine {
    pub fn freq_mhz(&self) -> f64 {
        rad_per_us_to_mhz(self.frequency)
    }
}

/// Lines between all bright pairs, sorted by frequency, with equal
/// frequencies (within [`LINE_MERGE_TOL`]) merged.
pub fn bright_lines(sd: &SpectralDecomposition, eps_bright: f64) -> Vec<TransitionLine> {
    let bright = sd.bright_indices(eps_bright);
    let p = sd.bright_probs();
    let l = sd.eigenvalues();
    let mut raw = Vec::new();
    for (a, &j) in bright.iter().enumerate() {
        for &k in &bright[a + 1..] {
            raw.push(TransitionLine {
                j: j + 1,
                k: k + 1,
                frequency: l[k] - l[j],
                weight: 2.0 * p[j] * p[k],
                pairs: vec![(j + 1, k + 1)],
            });
        }
    }
    raw.sort_by(|a, b| a.frequency.total_cmp(&b.frequency).then((a.j, a.k).cmp(&(b.j, b.k))));
    let mut out: Vec<TransitionLine> = Vec::new();
    for line in raw {
        match out.last_mut() {
            Some(prev) if line.frequency - prev.frequency < LINE_MERGE_TOL => {
                prev.weight += line.weight;
                prev.pairs.extend(line.pairs);
            }
            _ => out.push(line),
        }
    }
    for line in &mut out {
        line.pairs.sort_unstable();
        (line.j, line.k) = line.pairs[0];
    }
    out
}

/// CSV `j,k,freq_MHz,weight`.
pub fn write_lines_csv<W: Write>(lines: &[TransitionLine], mut w: W) -> Result<()> {
    writeln!(w, "j,k,freq_MHz,weight")?;
    for l in lines {
        writeln!(w, "{},{},{},{}", l.j, l.k, l.freq_mhz(), l.weight)?;
    }
    Ok(())
}

/// Symmetric four-atom base states used to express the reference
/// eigenvectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WState {
    W0,
    W1,
    W2C,
    W1S,
    W2S,
    W1D,
    W1PrimeD,
    /// A single product state, e.g. `Product(0b1000)` for |1000⟩.
    Product(usize),
}

impl WState {
    fn terms(self) -> Vec<usize> {
        match self {
            WState::W0 => vec![0b0000],
            WState::W1 => vec![0b1000, 0b0100, 0b0010, 0b0001],
            WState::W2C => vec![0b1010, 0b0101],
            WState::W1S => vec![0b0100, 0b0010, 0b0001],
            WState::W2S => vec![0b0110, 0b0011, 0b0101],
            WState::W1D => vec![0b1000, 0b0010],
            WState::W1PrimeD => vec![0b0100, 0b0001],
            WState::Product(b) => vec![b],
        }
    }

    /// Normalized vector in the 16-dimensional product basis.
    pub fn vector(self) -> DVector<Complex64> {
        let t = self.terms();
        let c = Complex64::new(1.0 / (t.len() as f64).sqrt(), 0.0);
        let mut v = DVector::zeros(16);
        for b in t {
            v[b] = c;
        }
        v
    }
}

impl fmt::Display for WState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WState::W0 => f.write_str("W0"),
            WState::W1 => f.write_str("W1"),
            WState::W2C => f.write_str("W2^C"),
            WState::W1S => f.write_str("W1^S"),
            WState::W2S => f.write_str("W2^S"),
            WState::W1D => f.write_str("W1^D"),
            WState::W1PrimeD => f.write_str("W1'^D"),
            WState::Product(b) => write!(f, "|{b:04b}>"),
        }
    }
}

/// One bright eigenstate of the reference table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceState {
    /// 1-based eigenindex in the independent-set sector.
    pub index: usize,
    /// Closed-form eigenvalue in units of Ω.
    pub eigenvalue: f64,
    pub eigenvalue_expr: &'static str,
    /// Tabulated eigenvalue in units of Ω and its printed form.
    pub printed_eigenvalue: f64,
    pub printed_expr: &'static str,
    /// Closed-form expansion over [`WState`]s (unit norm).
    pub expansion: Vec<(WState, f64)>,
    /// Tabulated expansion coefficients.
    pub printed_expansion: Vec<(WState, f64)>,
}

fn expand(terms: &[(WState, f64)]) -> DVector<Complex64> {
    terms
        .iter()
        .fold(DVector::zeros(16), |acc, &(w, c)| acc + w.vector() * Complex64::new(c, 0.0))
}

impl ReferenceState {
    pub fn vector(&self) -> DVector<Complex64> {
        expand(&self.expansion)
    }

    pub fn printed_vector(&self) -> DVector<Complex64> {
        expand(&self.printed_expansion)
    }

    /// |printed − exact| / |exact| for the eigenvalue.
    pub fn eigenvalue_discrepancy(&self) -> f64 {
        if self.eigenvalue == 0.0 {
            self.printed_eigenvalue.abs()
        } else {
            ((self.printed_eigenvalue - self.eigenvalue) / self.eigenvalue).abs()
        }
    }
}

/// Closed-form bright eigensystem of one four-atom graph in the perfect
/// blockade limit, together with the tabulated values.
#[derive(Debug, Clone)]
pub struct ReferenceTable {
    pub class: GraphClass,
    /// The graph with the labeling used by the W-basis definitions.
    pub graph: BlockadeGraph,
    pub states: Vec<ReferenceState>,
}

impl ReferenceTable {
    /// Human-readable notes for tabulated eigenvalues that differ from the
    /// closed form by more than `rel_tol`.
    pub fn discrepancies(&self, rel_tol: f64) -> Vec<String> {
        self.states
            .iter()
            .filter(|s| s.eigenvalue_discrepancy() > rel_tol)
            .map(|s| {
                format!(
                    "{} lambda_{}: tabulated {} = {:.10} Omega, exact {} = {:.10} Omega (rel. diff {:.2e})",
                    self.class,
                    s.index,
                    s.printed_expr,
                    s.printed_eigenvalue,
                    s.eigenvalue_expr,
                    s.eigenvalue,
                    s.eigenvalue_discrepancy()
                )
            })
            .collect()
    }
}

fn normalize_with_sign(raw: &[(WState, f64)], sign_ref: f64) -> Vec<(WState, f64)> {
    let n = raw.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();
    let first = raw.iter().find(|(w, _)| *w == WState::W0).map_or(1.0, |t| t.1);
    let s = if (first >= 0.0) == (sign_ref >= 0.0) { 1.0 } else { -1.0 };
    raw.iter().map(|&(w, c)| (w, s * c / n)).collect()
}

/// S4 bright vector at x = 2λ/Ω by recurrence along the tree
/// |1000⟩ – W0 – W1^S – W2^S – |0111⟩.
fn star_vector(x: f64, sign_ref: f64) -> Vec<(WState, f64)> {
    let s3 = 3f64.sqrt();
    let a = 1.0;
    let b = a / x;
    let c = (x * a - b) / s3;
    let d = (x * c - s3 * a) / 2.0;
    let e = s3 * d / x;
    normalize_with_sign(
        &[
            (WState::W0, a),
            (WState::W1S, c),
            (WState::Product(0b1000), b),
            (WState::W2S, d),
            (WState::Product(0b0111), e),
        ],
        sign_ref,
    )
}

/// K4-e bright vector for mode `k` of the uniform path
/// |1010⟩ – W1^D – W0 – W1'^D.
fn diamond_vector(k: usize, sign_ref: f64) -> Vec<(WState, f64)> {
    let s = |j: usize| (j as f64 * k as f64 * std::f64::consts::PI / 5.0).sin();
    normalize_with_sign(
        &[
            (WState::W0, s(3)),
            (WState::W1D, s(2)),
            (WState::W1PrimeD, s(4)),
            (WState::Product(0b1010), s(1)),
        ],
        sign_ref,
    )
}

/// Reference bright eigensystem for `star_4`, `complete_4`, `cycle_4` or
/// `diamond`.
pub fn reference_table(class: &GraphClass) -> Result<ReferenceTable> {
    let graph = class
        .reference_graph()
        .ok_or_else(|| Error::Unsupported(format!("no reference table for {class}")))?;
    let r = f64::sqrt;
    let states = match class {
        GraphClass::Star(4) => {
            let hi = r((11.0 + r(57.0)) / 8.0);
            let lo = r((11.0 - r(57.0)) / 8.0);
            let printed = |c: [f64; 5]| {
                vec![
                    (WState::W0, c[0]),
                    (WState::W1S, c[1]),
                    (WState::Product(0b1000), c[2]),
                    (WState::W2S, c[3]),
                    (WState::Product(0b0111), c[4]),
                ]
            };
            vec![
                ReferenceState {
                    index: 1,
                    eigenvalue: -hi,
                    eigenvalue_expr: "-sqrt((11+sqrt57)/8)",
                    printed_eigenvalue: -r(23.0 / 10.0),
                    printed_expr: "-sqrt(23/10)",
                    expansion: star_vector(-2.0 * hi, 1.0),
                    printed_expansion: printed([
                        r(3.0 / 20.0),
                        -r(11.0 / 30.0),
                        -r(1.0 / 60.0),
                        r(7.0 / 20.0),
                        -r(7.0 / 60.0),
                    ]),
                },
                ReferenceState {
                    index: 2,
                    eigenvalue: -lo,
                    eigenvalue_expr: "-sqrt((11-sqrt57)/8)",
                    printed_eigenvalue: -r(10.0 / 23.0),
                    printed_expr: "-sqrt(10/23)",
                    expansion: star_vector(-2.0 * lo, -1.0),
                    printed_expansion: printed([
                        -r(7.0 / 20.0),
                        r(1.0 / 30.0),
                        r(1.0 / 5.0),
                        r(3.0 / 20.0),
                        -r(4.0 / 15.0),
                    ]),
                },
                ReferenceState {
                    index: 8,
                    eigenvalue: lo,
                    eigenvalue_expr: "sqrt((11-sqrt57)/8)",
                    printed_eigenvalue: r(10.0 / 23.0),
                    printed_expr: "sqrt(10/23)",
                    expansion: star_vector(2.0 * lo, 1.0),
                    printed_expansion: printed([
                        r(7.0 / 20.0),
                        r(1.0 / 30.0),
                        r(1.0 / 5.0),
                        -r(3.0 / 20.0),
                        -r(4.0 / 15.0),
                    ]),
                },
                ReferenceState {
                    index: 9,
                    eigenvalue: hi,
                    eigenvalue_expr: "sqrt((11+sqrt57)/8)",
                    printed_eigenvalue: r(23.0 / 10.0),
                    printed_expr: "sqrt(23/10)",
                    expansion: star_vector(2.0 * hi, 1.0),
                    printed_expansion: printed([
                        r(3.0 / 20.0),
                        r(11.0 / 30.0),
                        r(1.0 / 60.0),
                        r(7.0 / 20.0),
                        r(7.0 / 60.0),
                    ]),
                },
            ]
        }
        GraphClass::Complete(4) => {
            let h = r(0.5);
            let v1 = vec![(WState::W0, h), (WState::W1, -h)];
            let v5 = vec![(WState::W0, h), (WState::W1, h)];
            vec![
                ReferenceState {
                    index: 1,
                    eigenvalue: -1.0,
                    eigenvalue_expr: "-1",
                    printed_eigenvalue: -1.0,
                    printed_expr: "-1",
                    expansion: v1.clone(),
                    printed_expansion: v1,
                },
                ReferenceState {
                    index: 5,
                    eigenvalue: 1.0,
                    eigenvalue_expr: "1",
                    printed_eigenvalue: 1.0,
                    printed_expr: "1",
                    expansion: v5.clone(),
                    printed_expansion: v5,
                },
            ]
        }
        GraphClass::Cycle(4) => {
            let (a, b, c) = (r(1.0 / 3.0), r(0.5), r(1.0 / 6.0));
            let v1 = vec![(WState::W0, -a), (WState::W1, b), (WState::W2C, -c)];
            let v5 = vec![(WState::W0, -a), (WState::W2C, r(2.0 / 3.0))];
            let v7 = vec![(WState::W0, a), (WState::W1, b), (WState::W2C, c)];
            vec![
                ReferenceState {
                    index: 1,
                    eigenvalue: -r(1.5),
                    eigenvalue_expr: "-sqrt(3/2)",
                    printed_eigenvalue: -r(3.0 / 2.0),
                    printed_expr: "-sqrt(3/2)",
                    expansion: v1.clone(),
                    printed_expansion: v1,
                },
                ReferenceState {
                    index: 5,
                    eigenvalue: 0.0,
                    eigenvalue_expr: "0",
                    printed_eigenvalue: 0.0,
                    printed_expr: "0",
                    expansion: v5.clone(),
                    printed_expansion: v5,
                },
                ReferenceState {
                    index: 7,
                    eigenvalue: r(1.5),
                    eigenvalue_expr: "sqrt(3/2)",
                    printed_eigenvalue: r(3.0 / 2.0),
                    printed_expr: "sqrt(3/2)",
                    expansion: v7.clone(),
                    printed_expansion: v7,
                },
            ]
        }
        GraphClass::Diamond => {
            let lam = |k: usize| r(2.0) * (k as f64 * std::f64::consts::PI / 5.0).cos();
            let (p, q) = (3.0 / 5.0, r(7.0 / 50.0));
            let printed = |c: [f64; 4]| {
                vec![
                    (WState::W0, c[0]),
                    (WState::W1D, c[1]),
                    (WState::W1PrimeD, c[2]),
                    (WState::Product(0b1010), c[3]),
                ]
            };
            vec![
                ReferenceState {
                    index: 1,
                    eigenvalue: lam(4),
                    eigenvalue_expr: "-sqrt((3+sqrt5)/4)",
                    printed_eigenvalue: -r(13.0 / 10.0),
                    printed_expr: "-sqrt(13/10)",
                    expansion: diamond_vector(4, -1.0),
                    printed_expansion: printed([-p, p, q, -q]),
                },
                ReferenceState {
                    index: 2,
                    eigenvalue: lam(3),
                    eigenvalue_expr: "-sqrt((3-sqrt5)/4)",
                    printed_eigenvalue: -r(5.0 / 26.0),
                    printed_expr: "-sqrt(5/26)",
                    expansion: diamond_vector(3, -1.0),
                    printed_expansion: printed([-q, -q, p, p]),
                },
                ReferenceState {
                    index: 5,
                    eigenvalue: lam(2),
                    eigenvalue_expr: "sqrt((3-sqrt5)/4)",
                    printed_eigenvalue: r(5.0 / 26.0),
                    printed_expr: "sqrt(5/26)",
                    expansion: diamond_vector(2, 1.0),
                    printed_expansion: printed([q, -q, p, -p]),
                },
                ReferenceState {
                    index: 6,
                    eigenvalue: lam(1),
                    eigenvalue_expr: "sqrt((3+sqrt5)/4)",
                    printed_eigenvalue: r(23.0 / 10.0),
                    printed_expr: "sqrt(23/10)",
                    expansion: diamond_vector(1, 1.0),
                    printed_expansion: printed([p, p, q, q]),
                },
            ]
        }
        other => return Err(Error::Unsupported(format!("no reference table for {other}"))),
    };
    Ok(ReferenceTable {
        class: class.clone(),
        graph,
        states,
    })
}

/// Qualitative coupling label of one atom pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRegime {
    /// U > Ω.
    Blockaded,
    /// Ω/100 < U ≤ Ω.
    Intermediate,
    /// U ≤ Ω/100.
    Decoupled,
}

impl PairRegime {
    pub fn from_ratio(u_over_omega: f64) -> Self {
        if u_over_omega > 1.0 {
            PairRegime::Blockaded
        } else if u_over_omega > 1e-2 {
            PairRegime::Intermediate
        } else {
            PairRegime::Decoupled
        }
    }
}

/// Overall tag of an arrangement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Every pair blockaded.
    SuperAtom,
    /// Every pair either blockaded or decoupled: the graph picture holds.
    GraphLike,
    /// At least one pair in the intermediate range.
    Intermediate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCoupling {
    /// 1-based atom labels.
    pub j: usize,
    pub k: usize,
    pub distance_um: f64,
    pub u_over_omega: f64,
    pub regime: PairRegime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub pairs: Vec<PairCoupling>,
}

impl RegimeReport {
    pub fn pair(&self, j: usize, k: usize) -> Option<&PairCoupling> {
        let (a, b) = (j.min(k), j.max(k));
        self.pairs.iter().find(|p| p.j == a && p.k == b)
    }
}

/// Pairwise U/Ω table and regime tag.
pub fn regime_report(arr: &AtomArrangement, drive: &DriveParams) -> Result<RegimeReport> {
    drive.validate()?;
    let pairs: Vec<PairCoupling> = arr
        .pairs()
        .map(|(j, k, r)| {
            let ratio = drive.interaction(r) / drive.omega;
            PairCoupling {
                j: j + 1,
                k: k + 1,
                distance_um: r,
                u_over_omega: ratio,
                regime: PairRegime::from_ratio(ratio),
            }
        })
        .collect();
    let regime = if pairs.iter().all(|p| p.regime == PairRegime::Blockaded) {
        Regime::SuperAtom
    } else if pairs.iter().any(|p| p.regime == PairRegime::Intermediate) {
        Regime::Intermediate
    } else {
        Regime::GraphLike
    };
    Ok(RegimeReport { regime, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{blockade_graph, hexagon_to_antiprism, three_atom_bend};
    use crate::hamiltonian::{build_full, build_pxp};
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn pxp(class: GraphClass) -> SpectralDecomposition {
        let g = class.reference_graph().unwrap();
        diagonalize(&build_pxp(&g, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn two_level() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0)],
        );
        let h = HamiltonianMatrix::from_dense(1, m, Model::Full).unwrap();
        let sd = diagonalize(&h).unwrap();
        assert!((sd.eigenvalues()[0] + 0.5).abs() < 1e-14);
        let v0 = sd.eigenvectors().column(0);
        let v1 = sd.eigenvectors().column(1);
        let s = 0.5f64.sqrt();
        assert!((v0[0].re.abs() - s).abs() < 1e-12 && (v0[0] + v0[1]).norm() < 1e-12);
        assert!((v1[0] - v1[1]).norm() < 1e-12);
    }

    #[test]
    fn cycle_bright_indices_and_values() {
        let sd = pxp(GraphClass::Cycle(4));
        assert_eq!(sd.bright_indices(DEFAULT_EPS_BRIGHT), vec![0, 4, 6]);
        let l = sd.eigenvalues();
        assert!((l[0] + 1.5f64.sqrt()).abs() < 1e-12);
        assert!(l[4].abs() < 1e-12);
        assert!((l[6] - 1.5f64.sqrt()).abs() < 1e-12);
        for &j in &[0, 4, 6] {
            assert!((sd.bright_probs()[j] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bright_counts_match_table() {
        for (class, n) in [
            (GraphClass::Star(4), 4),
            (GraphClass::Complete(4), 2),
            (GraphClass::Cycle(4), 3),
            (GraphClass::Diamond, 4),
        ] {
            let sd = pxp(class.clone());
            assert_eq!(sd.bright_indices(DEFAULT_EPS_BRIGHT).len(), n, "{class}");
            let total: f64 = sd.bright_probs().iter().sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn reference_matches_diagonalization() {
        for class in [GraphClass::Star(4), GraphClass::Complete(4), GraphClass::Cycle(4), GraphClass::Diamond] {
            let reference = reference_table(&class).unwrap();
            let sd = diagonalize(&build_pxp(&reference.graph, 1.0).unwrap()).unwrap();
            for s in &reference.states {
                let j = s.index - 1;
                let got = sd.eigenvalues()[j];
                let scale = s.eigenvalue.abs().max(1.0);
                assert!((got - s.eigenvalue).abs() < 1e-10 * scale, "{class} {}", s.index);
                let ov = s.vector().dotc(&sd.state_full_basis(j)).norm();
                assert!(ov > 1.0 - 1e-10, "{class} {} overlap {ov}", s.index);
                assert!((s.vector().norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tabulated_values_flagged() {
        assert!(reference_table(&GraphClass::Cycle(4)).unwrap().discrepancies(1e-10).is_empty());
        assert!(reference_table(&GraphClass::Complete(4)).unwrap().discrepancies(1e-10).is_empty());
        let d = reference_table(&GraphClass::Diamond).unwrap().discrepancies(1e-10);
        assert_eq!(d.len(), 4);
        assert!(d[3].contains("lambda_6"));
        assert_eq!(reference_table(&GraphClass::Star(4)).unwrap().discrepancies(1e-10).len(), 4);
        assert!(reference_table(&GraphClass::Path(3)).is_err());
    }

    #[test]
    fn printed_cycle_vectors_are_exact() {
        for s in reference_table(&GraphClass::Cycle(4)).unwrap().states {
            assert!((s.printed_vector() - s.vector()).norm() < 1e-15);
        }
    }

    #[test]
    fn lines_for_complete_and_cycle() {
        let lines = bright_lines(&pxp(GraphClass::Complete(4)), DEFAULT_EPS_BRIGHT);
        assert_eq!(lines.len(), 1);
        assert!((lines[0].frequency - 2.0).abs() < 1e-12);
        assert!((lines[0].weight - 0.5).abs() < 1e-12);
        assert_eq!((lines[0].j, lines[0].k), (1, 5));

        let lines = bright_lines(&pxp(GraphClass::Cycle(4)), DEFAULT_EPS_BRIGHT);
        assert_eq!(lines.len(), 2);
        assert!((lines[0].frequency - 1.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(lines[0].pairs, vec![(1, 5), (5, 7)]);
        assert!((lines[0].weight - 4.0 / 9.0).abs() < 1e-12);
        assert!((lines[1].frequency - 2.0 * 1.5f64.sqrt()).abs() < 1e-12);

        let lines = bright_lines(&pxp(GraphClass::Star(4)), DEFAULT_EPS_BRIGHT);
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0].pairs, vec![(1, 2), (8, 9)]);
        assert_eq!(lines[2].pairs, vec![(1, 8), (2, 9)]);
    }

    #[test]
    fn equilateral_triangle_collective_splitting() {
        let sd = pxp(GraphClass::Complete(3));
        let b = sd.bright_indices(DEFAULT_EPS_BRIGHT);
        assert_eq!(b.len(), 2);
        let l = sd.eigenvalues();
        assert!((l[b[1]] - l[b[0]] - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn decoupled_trios_line_set() {
        let g = BlockadeGraph::from_edges(6, [(0, 2), (2, 4), (0, 4), (1, 3), (3, 5), (1, 5)]).unwrap();
        let sd = diagonalize(&build_pxp(&g, 1.0).unwrap()).unwrap();
        let lines = bright_lines(&sd, DEFAULT_EPS_BRIGHT);
        let f: Vec<f64> = lines.iter().map(|l| l.frequency).collect();
        assert_eq!(f.len(), 2);
        assert!((f[0] - 3f64.sqrt()).abs() < 1e-10);
        assert!((f[1] - 2.0 * 3f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn decomposition_invariants_on_full_model() {
        let arr = hexagon_to_antiprism(6.0, 8.0).unwrap();
        let drive = DriveParams::from_mhz_and_radius(0.8, 11.0).unwrap();
        let h = build_full(&arr, &drive).unwrap();
        let sd = diagonalize(&h).unwrap();
        assert!(sd.unitarity_error() < 1e-10);
        assert!(sd.reconstruction_error(&h) < 1e-9);
        assert!(sd.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn regime_examples() {
        let drive = DriveParams::default();
        let r = regime_report(&three_atom_bend(60.0, 8.0).unwrap(), &drive).unwrap();
        assert_eq!(r.regime, Regime::SuperAtom);

        let r = regime_report(&three_atom_bend(180.0, 8.0).unwrap(), &drive).unwrap();
        let ac = r.pair(1, 3).unwrap();
        assert!((ac.u_over_omega - (10.0f64 / 16.0).powi(6)).abs() < 1e-12);
        assert_eq!(ac.regime, PairRegime::Intermediate);
        assert_eq!(r.regime, Regime::Intermediate);

        let r = regime_report(&hexagon_to_antiprism(12.0, 8.0).unwrap(), &drive).unwrap();
        let intra = r.pair(1, 3).unwrap().u_over_omega;
        for p in &r.pairs {
            if (p.j + p.k) % 2 == 1 {
                assert!(p.u_over_omega < intra);
            }
        }
    }

    #[test]
    fn csv_exports() {
        let sd = pxp(GraphClass::Complete(4));
        let mut buf = Vec::new();
        sd.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("index,eigenvalue_rad_per_us,bright_prob\n1,"));
        assert_eq!(s.lines().count(), 6);

        let mut buf = Vec::new();
        write_lines_csv(&bright_lines(&sd, DEFAULT_EPS_BRIGHT), &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("j,k,freq_MHz,weight\n1,5,"));
    }

    #[test]
    fn degenerate_cluster_puts_bright_last() {
        let sd = pxp(GraphClass::Cycle(4));
        // Zero eigenvalue has multiplicity three at 0-based 2..=4.
        for j in 2..4 {
            assert!(sd.bright_probs()[j] < 1e-20);
        }
        let arr = hexagon_to_antiprism(0.0, 8.0).unwrap();
        let g = blockade_graph(&arr, 11.0).unwrap();
        let h = build_pxp(&g, TAU).unwrap();
        let a = diagonalize(&h).unwrap();
        let b = diagonalize(&h).unwrap();
        assert_eq!(a.eigenvectors(), b.eigenvectors());
    }

    fn random_hermitian(n: usize, vals: &[f64]) -> HamiltonianMatrix {
        let dim = 1 << n;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        let mut it = vals.iter().cycle();
        for i in 0..dim {
            m[(i, i)] = Complex64::new(*it.next().unwrap(), 0.0);
            for j in i + 1..dim {
                let z = Complex64::new(*it.next().unwrap(), *it.next().unwrap());
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        HamiltonianMatrix::from_dense(n, m, Model::Full).unwrap()
    }

    proptest! {
        #[test]
        fn random_hermitian_invariants(n in 1usize..=4, vals in proptest::collection::vec(-3.0f64..3.0, 7..40)) {
            let h = random_hermitian(n, &vals);
            let sd = diagonalize(&h).unwrap();
            prop_assert!(sd.unitarity_error() < 1e-10);
            prop_assert!(sd.reconstruction_error(&h) < 1e-9);
            let total: f64 = sd.bright_probs().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            for l in bright_lines(&sd, DEFAULT_EPS_BRIGHT) {
                prop_assert!(l.frequency >= 0.0 && l.weight >= 0.0);
            }
        }

        #[test]
        fn pxp_spectrum_is_symmetric(
            n in 2usize..=6,
            mask in proptest::collection::vec(any::<bool>(), 15),
        ) {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
            let edges = pairs.iter().zip(mask.iter().cycle()).filter(|(_, &m)| m).map(|(&e, _)| e);
            let g = BlockadeGraph::from_edges(n, edges).unwrap();
            let sd = diagonalize(&build_pxp(&g, 1.7).unwrap()).unwrap();
            let l = sd.eigenvalues();
            let m = l.len();
            for i in 0..m {
                prop_assert!((l[i] + l[m - 1 - i]).abs() < 1e-10);
            }
        }
    }
}
