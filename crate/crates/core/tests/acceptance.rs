//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria known to fail are listed in `EXPECTED_FAILURES`; the suite
//! asserts that exactly those fail, so a regression or an unexpected fix
//! both show up.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rydspec::analysis::{build_hamiltonian, fourier_spectrum, detect_peaks, run_pipeline, AnalysisParams};
use rydspec::cli::{preset, PRESETS};
use rydspec::dynamics::{p0_closed_form, p0_unitary, NoiseParams, TimeGrid};
use rydspec::geometry::{blockade_graph, hexagon_to_antiprism, AtomArrangement, BlockadeGraph, Position};
use rydspec::hamiltonian::{
    build_full_truncated, build_ising, build_pxp, ising_params_from, DriveParams, HamiltonianMatrix, Model,
};
use rydspec::spectral::{bright_lines, diagonalize, SpectralDecomposition, DEFAULT_EPS_BRIGHT};

const EXPECTED_FAILURES: [u32; 3] = [1, 7, 9];

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: u32, title: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, title, pass, detail }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn graph(n: usize, edges: &[(usize, usize)]) -> BlockadeGraph {
    BlockadeGraph::from_edges(n, edges.iter().copied()).unwrap()
}

fn cycle4() -> BlockadeGraph {
    graph(4, &[(0, 1), (1, 2), (2, 3), (0, 3)])
}

fn star4() -> BlockadeGraph {
    graph(4, &[(0, 1), (0, 2), (0, 3)])
}

fn complete4() -> BlockadeGraph {
    graph(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
}

/// K4 without the 2–4 edge.
fn diamond() -> BlockadeGraph {
    graph(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (2, 3)])
}

fn pxp_decomposition(g: &BlockadeGraph) -> SpectralDecomposition {
    diagonalize(&build_pxp(g, 1.0).unwrap()).unwrap()
}

fn bright_eigenvalues(sd: &SpectralDecomposition) -> Vec<f64> {
    sd.bright_indices(DEFAULT_EPS_BRIGHT).iter().map(|&j| sd.eigenvalues()[j]).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn check_set(got: &[f64], want: &[f64], tol: f64) -> (bool, f64) {
    if got.len() != want.len() {
        return (false, f64::INFINITY);
    }
    let worst = got.iter().zip(want).map(|(g, w)| if *w == 0.0 { g.abs() } else { rel(*g, *w) }).fold(0.0, f64::max);
    (worst <= tol, worst)
}

fn c1() -> Outcome {
    let start = Instant::now();
    let r = f64::sqrt;
    let cases: [(&str, BlockadeGraph, Vec<f64>); 4] = [
        ("K4", complete4(), vec![-1.0, 1.0]),
        ("C4", cycle4(), vec![-r(1.5), 0.0, r(1.5)]),
        ("S4", star4(), vec![-r(2.3), -r(10.0 / 23.0), r(10.0 / 23.0), r(2.3)]),
        // Positive partners from the chiral symmetry of the spectrum.
        ("K4-e", diamond(), vec![-r(1.3), -r(5.0 / 26.0), r(5.0 / 26.0), r(1.3)]),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, g, want) in cases {
        let got = bright_eigenvalues(&pxp_decomposition(&g));
        let (ok, worst) = check_set(&got, &want, 1e-10);
        pass &= ok;
        notes.push(format!("{name} {} (max rel. err {worst:.2e}, got {got:.10?})", if ok { "ok" } else { "MISMATCH" }));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(1);
    notes.push(format!("runtime {elapsed:?}"));
    outcome(1, "reference eigenvalue regression", pass, notes.join("; "))
}

fn c2() -> Outcome {
    let sd = pxp_decomposition(&cycle4());
    let basis = |bits: &[usize]| {
        let mut v = DVector::<Complex64>::zeros(16);
        for &b in bits {
            v[b] = c(1.0 / (bits.len() as f64).sqrt());
        }
        v
    };
    let w0 = basis(&[0]);
    let w1 = basis(&[8, 4, 2, 1]);
    let w2 = basis(&[0b1010, 0b0101]);
    let r = f64::sqrt;
    let expected = [
        (1, &w0 * c(-r(1.0 / 3.0)) + &w1 * c(r(0.5)) - &w2 * c(r(1.0 / 6.0))),
        (5, &w0 * c(-r(1.0 / 3.0)) + &w2 * c(r(2.0 / 3.0))),
        (7, &w0 * c(r(1.0 / 3.0)) + &w1 * c(r(0.5)) + &w2 * c(r(1.0 / 6.0))),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for (j, v) in expected {
        let overlap = v.dotc(&sd.state_full_basis(j - 1)).norm();
        pass &= overlap > 1.0 - 1e-10;
        notes.push(format!("lambda_{j} overlap {overlap:.14}"));
    }
    outcome(2, "C4 eigenvector regression", pass, notes.join("; "))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn c3() -> Outcome {
    let start = Instant::now();
    let grid = TimeGrid::default();
    let mut worst: f64 = 0.0;
    for name in PRESETS {
        let cfg = preset(name).unwrap();
        let h = build_hamiltonian(&cfg.geometry.arrangement().unwrap(), &cfg.drive.resolve().unwrap(), cfg.model)
            .unwrap();
        let a = p0_closed_form(&diagonalize(&h).unwrap(), &grid).unwrap();
        let b = p0_unitary(&h, &grid).unwrap();
        worst = worst.max(max_diff(&a.values, &b.values));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for i in 0..20 {
        let n = 1 + i % 5;
        let dim = 1 << n;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for a in 0..dim {
            m[(a, a)] = c(rng.random_range(-10.0..10.0));
            for b in a + 1..dim {
                let z = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
                m[(a, b)] = z;
                m[(b, a)] = z.conj();
            }
        }
        let h = HamiltonianMatrix::from_dense(n, m, Model::Full).unwrap();
        let a = p0_closed_form(&diagonalize(&h).unwrap(), &grid).unwrap();
        let b = p0_unitary(&h, &grid).unwrap();
        worst = worst.max(max_diff(&a.values, &b.values));
    }
    let elapsed = start.elapsed();
    outcome(
        3,
        "closed-form vs propagated P0",
        worst < 1e-8 && elapsed < Duration::from_secs(5),
        format!("{} presets + 20 random matrices, max |diff| {worst:.2e}, runtime {elapsed:?}", PRESETS.len()),
    )
}

fn regular_hexagon(d: f64) -> AtomArrangement {
    AtomArrangement::from_positions((0..6).map(|j| {
        let th = j as f64 * std::f64::consts::PI / 3.0;
        Position::new(d * th.cos(), d * th.sin(), 0.0)
    }))
    .unwrap()
}

fn c4() -> Outcome {
    let mut cases: Vec<(String, AtomArrangement, DriveParams)> = ["s4", "k4", "c4", "k4e", "triangle-180", "decoupled-trios"]
        .iter()
        .map(|n| {
            let cfg = preset(n).unwrap();
            (n.to_string(), cfg.geometry.arrangement().unwrap(), cfg.drive.resolve().unwrap())
        })
        .collect();
    cases.push(("hexagon".into(), regular_hexagon(8.0), DriveParams::from_mhz_and_radius(1.0, 10.0).unwrap()));
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, arr, drive) in cases {
        let g = blockade_graph(&arr, drive.blockade_radius()).unwrap();
        let map = ising_params_from(&drive, &g).unwrap();
        let t = build_full_truncated(&arr, &drive, &g).unwrap();
        let i = build_ising(&g, &map.params).unwrap();
        let diff = t.matrix() - i.matrix() - DMatrix::<Complex64>::identity(t.dim(), t.dim()) * c(map.offset);
        let worst = diff.iter().map(|z| z.norm()).fold(0.0, f64::max);
        pass &= worst <= 1e-10 && g.n_edges() > 0;
        notes.push(format!("{name} ({} edges) {worst:.1e}", g.n_edges()));
    }
    outcome(4, "truncated Hamiltonian = Ising form + offset", pass, notes.join("; "))
}

fn c5() -> Outcome {
    let omega = TAU;
    let d: f64 = 8.0;
    // Arrangements whose blockade graphs are the four N = 4 classes with
    // common edge length d.
    let mut pass = true;
    let mut notes = Vec::new();
    for name in ["s4", "k4", "c4", "k4e"] {
        let cfg = preset(name).unwrap();
        let arr = cfg.geometry.arrangement().unwrap();
        let g = blockade_graph(&arr, cfg.drive.resolve().unwrap().blockade_radius()).unwrap();
        let pxp = diagonalize(&build_pxp(&g, omega).unwrap()).unwrap();
        let want = bright_eigenvalues(&pxp);
        let mut devs = Vec::new();
        for ratio in [1e2, 1e3, 1e4] {
            let drive = DriveParams::new(omega, ratio * omega * d.powi(6), 0.0).unwrap();
            let t = diagonalize(&build_full_truncated(&arr, &drive, &g).unwrap()).unwrap();
            // Bright states of the truncated model: the largest |A_j|^2.
            let probs = t.bright_probs();
            let mut idx: Vec<usize> = (0..probs.len()).collect();
            idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
            let mut got: Vec<f64> = idx[..want.len()].iter().map(|&j| t.eigenvalues()[j]).collect();
            got.sort_by(f64::total_cmp);
            devs.push(max_diff(&got, &want) / omega);
        }
        let ok = devs[0] > devs[1] && devs[1] > devs[2] && devs[2] < 1e-3;
        pass &= ok;
        notes.push(format!("{name} {:.2e} > {:.2e} > {:.2e}", devs[0], devs[1], devs[2]));
    }
    outcome(5, "PXP convergence", pass, notes.join("; "))
}

fn c6() -> Outcome {
    let r3 = 3f64.sqrt();
    let cfg = preset("triangle-60").unwrap();
    let drive = cfg.drive.resolve().unwrap();
    let arr = cfg.geometry.arrangement().unwrap();
    let sd = diagonalize(&build_hamiltonian(&arr, &drive, cfg.model).unwrap()).unwrap();
    let a = AnalysisParams::default();
    let spec = fourier_spectrum(&p0_closed_form(&sd, &cfg.grid).unwrap(), a.window, a.zero_pad_factor).unwrap();
    let peaks = detect_peaks(&spec, a.min_prominence);
    let target = r3 * drive.omega / TAU;
    let tri_ok = peaks.len() == 1 && (peaks.peaks[0].freq_mhz - target).abs() <= spec.bin_width();
    let trios = preset("decoupled-trios").unwrap();
    let td = trios.drive.resolve().unwrap();
    let tsd = diagonalize(&build_hamiltonian(&trios.geometry.arrangement().unwrap(), &td, trios.model).unwrap()).unwrap();
    let f: Vec<f64> = bright_lines(&tsd, DEFAULT_EPS_BRIGHT).iter().map(|l| l.freq_mhz()).collect();
    let want = [r3 * td.omega / TAU, 2.0 * r3 * td.omega / TAU];
    let trio_ok = f.len() == 2 && rel(f[0], want[0]) < 1e-10 && rel(f[1], want[1]) < 1e-10;
    outcome(
        6,
        "collective enhancement",
        tri_ok && trio_ok,
        format!(
            "triangle peaks {:?} MHz vs {target:.6} (bin {:.4}); trios lines {f:.6?} vs {want:.6?}",
            peaks.freqs(),
            spec.bin_width()
        ),
    )
}

fn c7() -> Outcome {
    let a = AnalysisParams::default();
    let grid = TimeGrid::default();
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, g, want) in [("S4", star4(), 4), ("K4", complete4(), 1), ("C4", cycle4(), 2), ("K4-e", diamond(), 3)] {
        let sd = diagonalize(&build_pxp(&g, TAU).unwrap()).unwrap();
        let spec = fourier_spectrum(&p0_closed_form(&sd, &grid).unwrap(), a.window, a.zero_pad_factor).unwrap();
        let n = detect_peaks(&spec, a.min_prominence).len();
        pass &= n == want;
        notes.push(format!("{name} {n} peaks (want {want})"));
    }
    let drive = DriveParams::from_mhz_and_radius(0.8, 11.0).unwrap();
    let arr = hexagon_to_antiprism(6.0, 8.0).unwrap();
    let sd = diagonalize(&build_hamiltonian(&arr, &drive, Model::Full).unwrap()).unwrap();
    let n_lines = bright_lines(&sd, DEFAULT_EPS_BRIGHT).len();
    let spec = fourier_spectrum(&p0_closed_form(&sd, &grid).unwrap(), a.window, a.zero_pad_factor).unwrap();
    let n_peaks = detect_peaks(&spec, a.min_prominence).len();
    pass &= n_lines == 6;
    notes.push(format!("hexagon z=3d/4 full model: {n_lines} bright lines (want 6), {n_peaks} peaks"));
    outcome(7, "peak counts on ideal spectra", pass, notes.join("; "))
}

fn c8() -> Outcome {
    let start = Instant::now();
    let mut passing_seeds = 0;
    let mut notes = Vec::new();
    for seed in 1..=10u64 {
        let mut ok = true;
        let mut worst: f64 = 0.0;
        for name in ["s4", "k4", "c4", "k4e"] {
            let cfg = preset(name).unwrap();
            let mut settings = cfg.pipeline_settings().unwrap();
            settings.noise = Some(NoiseParams {
                rng_seed: seed,
                ..NoiseParams::default()
            });
            let r = run_pipeline(&cfg.geometry.arrangement().unwrap(), &settings, 0).unwrap();
            ok &= !r.report.matches.is_empty() && r.report.matches.iter().all(|m| m.rel_err < 0.10);
            worst = worst.max(r.report.max_rel_err());
        }
        if ok {
            passing_seeds += 1;
        }
        notes.push(format!("seed {seed}: {} (max rel. err {worst:.3})", if ok { "ok" } else { "fail" }));
    }
    let elapsed = start.elapsed();
    outcome(
        8,
        "resolution under noise",
        passing_seeds >= 9 && elapsed < Duration::from_secs(60),
        format!("{passing_seeds}/10 seeds; {}; runtime {elapsed:?}", notes.join(", ")),
    )
}

fn c9() -> Outcome {
    let cfg = preset("triangle-180").unwrap();
    let drive = cfg.drive.resolve().unwrap();
    let h = build_hamiltonian(&cfg.geometry.arrangement().unwrap(), &drive, Model::Truncated).unwrap();
    let sd = diagonalize(&h).unwrap();
    let l = |j: usize| sd.eigenvalues()[j - 1] / drive.omega;
    let (l54, l42, l21, l41, l52) = (l(5) - l(4), l(4) - l(2), l(2) - l(1), l(4) - l(1), l(5) - l(2));
    let spread = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / hi.abs()
    };
    let a = spread(&[l54, l42, l21]);
    let b = spread(&[l41, l52]);
    outcome(
        9,
        "linear-chain degeneracy",
        a <= 1e-6 && b <= 1e-6,
        format!(
            "lambda_54 {l54:.4}, lambda_42 {l42:.4}, lambda_21 {l21:.4} Omega (spread {a:.2e}); \
             lambda_41 {l41:.4}, lambda_52 {l52:.4} Omega (spread {b:.2e})"
        ),
    )
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn c10() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_rydspec");
    let runs: [&[&str]; 2] = [
        &["spectrum", "--preset", "c4", "--noisy", "--seed", "7"],
        &["sweep", "--family", "star-to-tetra", "--steps", "5", "--noisy", "--seed", "7"],
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for args in runs {
        let outs: Vec<_> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let status = Command::new(exe).args(args).arg("--out").arg(dir.path()).output().unwrap();
                assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
                let files = read_dir_sorted(dir.path());
                files
            })
            .collect();
        let same = outs[0] == outs[1] && !outs[0].is_empty();
        let tagged = outs[0].iter().all(|(_, b)| String::from_utf8_lossy(b).contains("config_sha256"));
        pass &= same && tagged;
        notes.push(format!("{}: {} files, identical {same}, metadata {tagged}", args[0], outs[0].len()));
    }
    outcome(10, "deterministic artifacts", pass, notes.join("; "))
}

#[test]
fn acceptance() {
    let results = [c1(), c2(), c3(), c4(), c5(), c6(), c7(), c8(), c9(), c10()];
    for r in &results {
        println!(
            "{} C{} {}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.id,
            r.title,
            r.detail
        );
    }
    let failed: BTreeSet<u32> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    let expected: BTreeSet<u32> = EXPECTED_FAILURES.into_iter().collect();
    assert_eq!(failed, expected, "failing criteria differ from the documented set");
}
