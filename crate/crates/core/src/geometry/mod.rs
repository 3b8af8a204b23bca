//! Atom arrangements, the continuous transformation families between them,
//! and blockade-graph extraction.
//!
//! All family constructors work in units of the nearest-neighbor length `d`
//! and scale the result to μm at the end. Atom labels run `1..=N` and the
//! label order is the qubit order used by every operator downstream.

mod graph;

pub use graph::{blockade_graph, classify_graph, BlockadeGraph, GraphClass};

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Position = Vector3<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub label: usize,
    /// Position in μm.
    pub position: Position,
}

/// Labeled 3D positions of N atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomArrangement {
    atoms: Vec<Atom>,
}

impl AtomArrangement {
    /// Validates labels (`1..=N` in order) and that no two atoms coincide.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Parameter("arrangement has no atoms".into()));
        }
        for (i, atom) in atoms.iter().enumerate() {
            if atom.label != i + 1 {
                return Err(Error::Parameter(format!(
                    "atom labels must be 1..N in order; position {} has label {}",
                    i + 1,
                    atom.label
                )));
            }
            if !atom.position.iter().all(|c| c.is_finite()) {
                return Err(Error::Parameter(format!(
                    "atom {} has a non-finite coordinate",
                    atom.label
                )));
            }
        }
        for j in 0..atoms.len() {
            for k in j + 1..atoms.len() {
                let r = (atoms[j].position - atoms[k].position).norm();
                if r <= 0.0 {
                    return Err(Error::Parameter(format!(
                        "atoms {} and {} coincide",
                        j + 1,
                        k + 1
                    )));
                }
            }
        }
        Ok(Self { atoms })
    }

    /// Labels the positions `1..=N` in the given order.
    pub fn from_positions<I>(positions: I) -> Result<Self>
    where
        I: IntoIterator<Item = Position>,
    {
        Self::new(
            positions
                .into_iter()
                .enumerate()
                .map(|(i, position)| Atom {
                    label: i + 1,
                    position,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Position of the atom at zero-based index `i`.
    pub fn position(&self, i: usize) -> Position {
        self.atoms[i].position
    }

    /// Distance in μm between zero-based atoms `j` and `k`.
    pub fn distance(&self, j: usize, k: usize) -> f64 {
        (self.atoms[j].position - self.atoms[k].position).norm()
    }

    /// All `(j, k, r_jk)` with `j < k`, zero-based.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |j| (j + 1..n).map(move |k| (j, k, self.distance(j, k))))
    }

    /// Sorted multiset of pairwise distances; a congruence invariant.
    pub fn sorted_distances(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.pairs().map(|(_, _, r)| r).collect();
        d.sort_by(f64::total_cmp);
        d
    }

    /// Reorders atoms so that new atom `i` is old atom `perm[i]`, relabeling
    /// `1..=N`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::Parameter("permutation length mismatch".into()));
        }
        Self::from_positions(perm.iter().map(|&p| self.atoms[p].position))
    }

    pub fn to_record(&self) -> ArrangementRecord {
        ArrangementRecord {
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomRecord {
                    label: a.label,
                    xyz_um: [a.position.x, a.position.y, a.position.z],
                })
                .collect(),
        }
    }

    pub fn from_record(rec: &ArrangementRecord) -> Result<Self> {
        Self::new(
            rec.atoms
                .iter()
                .map(|a| Atom {
                    label: a.label,
                    position: Position::new(a.xyz_um[0], a.xyz_um[1], a.xyz_um[2]),
                })
                .collect(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: ArrangementRecord = serde_json::from_str(s)?;
        Self::from_record(&rec)
    }

    /// CSV with header `label,x_um,y_um,z_um`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "label,x_um,y_um,z_um")?;
        for a in &self.atoms {
            writeln!(
                w,
                "{},{},{},{}",
                a.label, a.position.x, a.position.y, a.position.z
            )?;
        }
        Ok(())
    }
}

/// JSON form `{"atoms": [{"label": 1, "xyz_um": [x, y, z]}, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrangementRecord {
    pub atoms: Vec<AtomRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomRecord {
    pub label: usize,
    pub xyz_um: [f64; 3],
}

fn check_scale(d: f64) -> Result<()> {
    if d.is_finite() && d > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("length scale d must be > 0, got {d}")))
    }
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn scaled(points: &[[f64; 3]], d: f64) -> Result<AtomArrangement> {
    AtomArrangement::from_positions(points.iter().map(|p| Position::new(p[0], p[1], p[2]) * d))
}

/// Three atoms A(−d,0,0), B(0,0,0), C(−d cos θ, d sin θ, 0) with bend angle
/// θ = ∠ABC in degrees; AB = BC = d.
pub fn three_atom_bend(theta_deg: f64, d: f64) -> Result<AtomArrangement> {
    check_scale(d)?;
    if !(theta_deg > 0.0 && theta_deg <= 180.0) {
        return Err(Error::Parameter(format!(
            "bend angle must satisfy 0 < theta <= 180 degrees, got {theta_deg}"
        )));
    }
    let t = theta_deg.to_radians();
    scaled(&[[-1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [-t.cos(), t.sin(), 0.0]], d)
}

/// Leaf-radius law for [`star_to_tetrahedron_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeafRadius {
    /// ρ(ξ) = 1 − (1 − 1/√3)ξ: ends in a regular tetrahedron of edge d.
    #[default]
    Corrected,
    /// ρ(ξ) = 1 − (1 − 2/√3)ξ as originally printed; the base triangle grows
    /// instead of shrinking, so ξ = 1 is not a regular tetrahedron.
    Printed,
}

/// Star S4 (ξ = 0) lifted into a regular tetrahedron K4 (ξ = 1).
pub fn star_to_tetrahedron(xi: f64, d: f64) -> Result<AtomArrangement> {
    star_to_tetrahedron_with(xi, d, LeafRadius::Corrected)
}

/// Center atom (label 1) at (0, 0, √(2/3)ξ); leaves at ρ(ξ)(cos θᵢ, sin θᵢ, 0)
/// with θᵢ = 0, 2π/3, 4π/3. Units of d.
pub fn star_to_tetrahedron_with(xi: f64, d: f64, law: LeafRadius) -> Result<AtomArrangement> {
    check_scale(d)?;
    check_unit_interval("xi", xi)?;
    let coeff = match law {
        LeafRadius::Corrected => 1.0 / 3f64.sqrt(),
        LeafRadius::Printed => 2.0 / 3f64.sqrt(),
    };
    let rho = 1.0 - (1.0 - coeff) * xi;
    let mut pts = vec![[0.0, 0.0, (2.0f64 / 3.0).sqrt() * xi]];
    for i in 0..3 {
        let th = 2.0 * PI * i as f64 / 3.0;
        pts.push([rho * th.cos(), rho * th.sin(), 0.0]);
    }
    scaled(&pts, d)
}

/// Regular tetrahedron (η = 0) stretched along two opposite edges into a
/// square of side d (η = 1).
pub fn tetra_to_square(eta: f64, d: f64) -> Result<AtomArrangement> {
    check_scale(d)?;
    check_unit_interval("eta", eta)?;
    let s3 = 3f64.sqrt();
    let r13 = (1.0f64 / 3.0).sqrt();
    let pts = [
        [-eta * FRAC_1_SQRT_2, 0.0, (2.0f64 / 3.0).sqrt() * (1.0 - eta)],
        [r13 + (FRAC_1_SQRT_2 - r13) * eta, 0.0, 0.0],
        [
            -(1.0 - eta) / (2.0 * s3),
            0.5 + (FRAC_1_SQRT_2 - 0.5) * eta,
            0.0,
        ],
        [
            -(1.0 - eta) / (2.0 * s3),
            -0.5 + (-FRAC_1_SQRT_2 + 0.5) * eta,
            0.0,
        ],
    ];
    scaled(&pts, d)
}

/// Square (ζ = 0) pinched into a rhombus with one long diagonal d√3, the
/// diamond graph K4−e (ζ = 1). Atom order continues [`tetra_to_square`] at
/// η = 1: −x, +x, +y, −y.
pub fn square_to_diamond(zeta: f64, d: f64) -> Result<AtomArrangement> {
    check_scale(d)?;
    check_unit_interval("zeta", zeta)?;
    let x = FRAC_1_SQRT_2 + (0.5 - FRAC_1_SQRT_2) * zeta;
    let y = FRAC_1_SQRT_2 + (3f64.sqrt() / 2.0 - FRAC_1_SQRT_2) * zeta;
    scaled(
        &[[-x, 0.0, 0.0], [x, 0.0, 0.0], [0.0, y, 0.0], [0.0, -y, 0.0]],
        d,
    )
}

/// Six atoms on a hexagon of circumradius d/√3 at angles jπ/3; even labels
/// are lifted to height `z` (μm). Odd and even atoms each form a triangle of
/// side d, and adjacent atoms sit √(d²/3 + z²) apart.
pub fn hexagon_to_antiprism(z: f64, d: f64) -> Result<AtomArrangement> {
    check_scale(d)?;
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::Parameter(format!("z must be >= 0, got {z}")));
    }
    let r = d / 3f64.sqrt();
    AtomArrangement::from_positions((1..=6).map(|j| {
        let th = j as f64 * PI / 3.0;
        let h = if j % 2 == 0 { z } else { 0.0 };
        Position::new(r * th.cos(), r * th.sin(), h)
    }))
}

/// The continuous transformation families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformFamily {
    ThreeAtomBend,
    StarToTetrahedron,
    TetraToSquare,
    SquareToDiamond,
    HexagonToAntiprism,
}

impl TransformFamily {
    pub const ALL: [TransformFamily; 5] = [
        TransformFamily::ThreeAtomBend,
        TransformFamily::StarToTetrahedron,
        TransformFamily::TetraToSquare,
        TransformFamily::SquareToDiamond,
        TransformFamily::HexagonToAntiprism,
    ];

    /// Sweep domain of the dimensionless parameter: θ in degrees for the
    /// bend, z/d for the antiprism, otherwise [0, 1].
    pub fn domain(self) -> (f64, f64) {
        match self {
            TransformFamily::ThreeAtomBend => (60.0, 180.0),
            TransformFamily::HexagonToAntiprism => (0.0, 1.5),
            _ => (0.0, 1.0),
        }
    }

    pub fn n_atoms(self) -> usize {
        match self {
            TransformFamily::ThreeAtomBend => 3,
            TransformFamily::HexagonToAntiprism => 6,
            _ => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformFamily::ThreeAtomBend => "three_atom_bend",
            TransformFamily::StarToTetrahedron => "star_to_tetrahedron",
            TransformFamily::TetraToSquare => "tetra_to_square",
            TransformFamily::SquareToDiamond => "square_to_diamond",
            TransformFamily::HexagonToAntiprism => "hexagon_to_antiprism",
        }
    }

    /// Builds the arrangement at `value` with length scale `d` (μm).
    pub fn arrangement(self, value: f64, d: f64) -> Result<AtomArrangement> {
        match self {
            TransformFamily::ThreeAtomBend => three_atom_bend(value, d),
            TransformFamily::StarToTetrahedron => star_to_tetrahedron(value, d),
            TransformFamily::TetraToSquare => tetra_to_square(value, d),
            TransformFamily::SquareToDiamond => square_to_diamond(value, d),
            TransformFamily::HexagonToAntiprism => {
                if !value.is_finite() || value < 0.0 {
                    return Err(Error::Parameter(format!("z/d must be >= 0, got {value}")));
                }
                hexagon_to_antiprism(value * d, d)
            }
        }
    }
}

impl fmt::Display for TransformFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        match norm.as_str() {
            "three_atom_bend" | "bend" | "triangle" => Ok(TransformFamily::ThreeAtomBend),
            "star_to_tetrahedron" | "star_to_tetra" => Ok(TransformFamily::StarToTetrahedron),
            "tetra_to_square" | "tetrahedron_to_square" => Ok(TransformFamily::TetraToSquare),
            "square_to_diamond" => Ok(TransformFamily::SquareToDiamond),
            "hexagon_to_antiprism" | "hexagon_antiprism" | "hexagon" => {
                Ok(TransformFamily::HexagonToAntiprism)
            }
            _ => Err(Error::Parameter(format!("unknown transformation family '{s}'"))),
        }
    }
}

/// A point on one of the transformation families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformationParam {
    pub family: TransformFamily,
    pub value: f64,
    /// Nearest-neighbor length d in μm.
    pub scale: f64,
}

impl TransformationParam {
    pub fn new(family: TransformFamily, value: f64, scale: f64) -> Result<Self> {
        let p = Self {
            family,
            value,
            scale,
        };
        p.arrangement()?;
        Ok(p)
    }

    pub fn arrangement(&self) -> Result<AtomArrangement> {
        self.family.arrangement(self.value, self.scale)
    }
}
