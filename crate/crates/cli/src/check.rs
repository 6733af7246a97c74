//! `incoh check`: desk-scale acceptance gates, or validation of emitted files.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use incoh_core::bethe::ladder::build_hubbard_ladder;
use incoh_core::bethe::{locate_j_crit, solve_string, string_eigenvalue_closed, string_eigenvalue_sum, BetheParams};
use incoh_core::dynamics::toy::{toy_dos_gamma, toy_dos_plateaus, ToyDosParams};
use incoh_core::dynamics::{evolve_integrate, expand, make_initial, time_grid, InitialState};
use incoh_core::io::{detect_schema, validate_csv};
use incoh_core::liouvillian::{assemble, ModelParams};
use incoh_core::single_particle::lambda_inc;
use incoh_core::spectral::{compute_metrics, diagonalize, multiset_distance, qc_gap, DiagOptions, EigenmodeSet};
use incoh_core::{C64, I};
use rayon::prelude::*;
use serde_json::Value;

use crate::output::sha256_hex;
use crate::{Context, Failure};

pub struct Gate {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

type GateResult = Result<(bool, String), Failure>;
type GateFn = Box<dyn Fn() -> GateResult + Sync + Send>;

fn modes(p: &ModelParams, opts: &DiagOptions) -> Result<(incoh_core::basis::SectorBasis, EigenmodeSet), Failure> {
    let (b, m) = assemble(p)?;
    let modes = diagonalize(&m, &b, opts)?;
    Ok((b, modes))
}

fn counts(values: &[C64], targets: &[C64]) -> (Vec<usize>, usize) {
    let mut c = vec![0; targets.len()];
    let mut stray = 0;
    for v in values {
        match targets.iter().position(|t| (v - t).norm() < 1e-9) {
            Some(i) => c[i] += 1,
            None => stray += 1,
        }
    }
    (c, stray)
}

fn one_particle_gap(opts: &DiagOptions) -> GateResult {
    let mut ok = true;
    let mut msg = vec![];
    for j in [0.15f64, 0.2] {
        let (b, m) = modes(&ModelParams::hardcore(20, 1, j, 1.0), opts)?;
        let got = qc_gap(&m, &compute_metrics(&m, &b), &b, 1.0).gaps[0];
        let want = (1.0 - 16.0 * j * j).sqrt();
        let rel = (got - want).abs() / want;
        ok &= rel <= 0.05;
        msg.push(format!("J={j}: Δ={got:.4} vs {want:.3} ({:.1}%)", 100.0 * rel));
    }
    Ok((ok, msg.join("; ")))
}

fn degeneracies(opts: &DiagOptions) -> GateResult {
    let (_, m) = modes(&ModelParams::hardcore(8, 3, 0.0, 1.0), opts)?;
    let targets: Vec<C64> = (0..4).map(|x| C64::new(-(x as f64), 0.0)).collect();
    let (c, stray) = counts(m.eigenvalues(), &targets);
    Ok((c == [56, 840, 1680, 560] && stray == 0, format!("L=8 N=3: {c:?}, stray {stray}")))
}

fn bose_hubbard(opts: &DiagOptions) -> GateResult {
    let (_, m) = modes(&ModelParams::bose_hubbard(5, 2, 0.0, 1.0, 1.0), opts)?;
    let targets: Vec<C64> = [(0.0, 0.0), (-1.0, 0.0), (-1.0, 1.0), (-1.0, -1.0), (-2.0, 0.0), (-3.0, 1.0), (-3.0, -1.0), (-4.0, 0.0)]
        .iter()
        .map(|&(a, b)| C64::new(a, b))
        .collect();
    let (c, stray) = counts(m.eigenvalues(), &targets);
    Ok((c[0] == 15 && c[1] == 60 && stray == 0, format!("λ=0: {}, λ=−1: {}, stray {stray}", c[0], c[1])))
}

fn strings() -> GateResult {
    let mut ok = true;
    let mut msg = vec![];
    for m in 1..=3usize {
        let jc = m as f64 / 4.0;
        let found = locate_j_crit(m, 1.0, 200, 0.5 * jc, 2.0 * jc, 1e-12)?;
        ok &= (found - jc).abs() <= 1e-9;
        msg.push(format!("J_c^({m})={found:.9}"));
    }
    // both eigenvalue routes over a fixed grid of confined strings
    let mut worst: f64 = 0.0;
    for m in 1..=3usize {
        for i in 1..10 {
            let p = -PI * i as f64 / 10.0;
            let j_max = m as f64 / (4.0 * p.sin().abs());
            for f in [0.1, 0.5, 0.9] {
                let s = solve_string(m, p, f * j_max, 1.0)?.ok_or_else(|| Failure::Numerical("confined string missing".into()))?;
                worst = worst.max((string_eigenvalue_sum(&s) - string_eigenvalue_closed(m, s.total_momentum, f * j_max, 1.0)).norm());
            }
        }
    }
    let s = solve_string(1, -PI / 2.0, 0.2, 1.0)?.ok_or_else(|| Failure::Numerical("no m=1 string".into()))?;
    let d_inc = (string_eigenvalue_sum(&s) - lambda_inc(PI, 0.2, 1.0)).norm();
    let d_kappa = (s.kappa.re - 2f64.ln()).abs() + s.kappa.im.abs();
    ok &= worst <= 1e-10 && d_inc <= 1e-12 && d_kappa <= 1e-12;
    msg.push(format!("routes {worst:.1e}, λ_inc(π) {d_inc:.1e}, κ−ln2 {d_kappa:.1e}"));
    Ok((ok, msg.join("; ")))
}

fn eta_pairing() -> GateResult {
    let mut ok = true;
    let mut msg = vec![];
    for n in [1, 2] {
        let ops = build_hubbard_ladder(&BetheParams::new(4, n, 0.3, 1.0))?;
        let steady = ops.steady_state_defect(n);
        let comm = ops.symmetry_report().max();
        let e = ops.sector_hamiltonian(n, n).eigenvalues().map_err(|e| Failure::Numerical(format!("{e:?}")))?;
        let (_, m) = assemble(&ModelParams::hardcore(4, n, 0.3, 1.0))?;
        let lam: Vec<C64> =
            m.to_dense().eigenvalues().map_err(|e| Failure::Numerical(format!("{e:?}")))?.iter().map(|z| I * z).collect();
        let dist = multiset_distance(&e, &lam);
        ok &= steady <= 1e-10 && comm <= 1e-10 && dist <= 1e-8;
        msg.push(format!("N={n}: steady {steady:.1e}, commutators {comm:.1e}, spectra {dist:.1e}"));
    }
    Ok((ok, msg.join("; ")))
}

fn toy_dos() -> GateResult {
    let p = ToyDosParams::symmetric(0.1, 1.0, 0.1, 1.0, 1.0);
    let pl = toy_dos_plateaus(&p, 1e-2, 1e3, 400)?;
    let first = pl.iter().any(|q| (q.gamma - 1.0).abs() <= 0.05);
    let second = pl.iter().any(|q| (q.gamma - 0.05).abs() <= 0.02);
    let watson = toy_dos_gamma(&p, 1e4)? * 1e4;
    Ok((first && second && (watson - 1.0).abs() <= 0.02, format!("plateaus {first}/{second}; Γ₁t(10⁴)={watson:.4}")))
}

fn dual_method(opts: &DiagOptions) -> GateResult {
    let p = ModelParams::hardcore(6, 2, 0.2, 1.0);
    let (b, m) = assemble(&p)?;
    let modes = diagonalize(&m, &b, opts)?;
    let rho0 = make_initial(&InitialState::RandomPure { seed: 1 }, &b)?;
    let x = expand(&rho0, &modes)?;
    let times = time_grid(5.0, 0.5);
    let mut worst: f64 = 0.0;
    evolve_integrate(&rho0, &m, &p, &times, 0.01, |i, r| {
        let e = modes.evolve(&x, times[i]).0;
        worst = worst.max((r - e.matrix()).norm_max());
    })?;
    let trace = m.trace_preservation_defect();
    let a = modes.verify_appendix_a()?;
    Ok((
        worst <= 1e-6 && trace <= 1e-12 && a.passes(),
        format!("L=6 N=2: RK4 vs modes {worst:.1e}, column sums {trace:.1e}, general properties {}", a.passes()),
    ))
}

/// All gates, evaluated on the pool and reported in a fixed order.
pub fn gates(ctx: &Context) -> Vec<Gate> {
    let opts = DiagOptions { dense_limit: ctx.dense_limit, ..Default::default() };
    let list: Vec<(&str, GateFn)> = vec![
        ("one-particle-qc-gap", Box::new(move || one_particle_gap(&opts))),
        ("zero-hopping-degeneracies", Box::new(move || degeneracies(&opts))),
        ("bose-hubbard-degeneracies", Box::new(move || bose_hubbard(&opts))),
        ("string-solutions", Box::new(strings)),
        ("eta-pairing", Box::new(eta_pairing)),
        ("toy-dos", Box::new(toy_dos)),
        ("dual-method", Box::new(move || dual_method(&opts))),
    ];
    ctx.pool.install(|| {
        list.par_iter()
            .map(|(name, f)| {
                let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
                Gate { name: name.to_string(), pass, detail }
            })
            .collect()
    })
}

fn check_manifest(path: &Path) -> (bool, String) {
    let dir = path.parent().unwrap_or(Path::new("."));
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return (false, e.to_string()),
    };
    let v: Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => return (false, format!("not JSON: {e}")),
    };
    let Some(outputs) = v["outputs"].as_array() else { return (false, "no outputs list".into()) };
    for o in outputs {
        let (Some(file), Some(hash)) = (o["file"].as_str(), o["sha256"].as_str()) else {
            return (false, "malformed output record".into());
        };
        match fs::read(dir.join(file)) {
            Ok(bytes) if sha256_hex(&bytes) == hash => {}
            Ok(_) => return (false, format!("{file}: hash mismatch")),
            Err(e) => return (false, format!("{file}: {e}")),
        }
    }
    (true, format!("{} outputs match their hashes", outputs.len()))
}

/// Validate CSVs against their schemas and manifests against the files they list.
pub fn files(paths: &[PathBuf]) -> Vec<Gate> {
    paths
        .iter()
        .map(|p| {
            let name = p.display().to_string();
            let (pass, detail) = if p.extension().is_some_and(|e| e == "csv") {
                match fs::read_to_string(p) {
                    Ok(text) => match detect_schema(&text) {
                        Some(schema) => match validate_csv(&text, schema) {
                            Ok(rows) => (true, format!("{} schema, {rows} rows", schema.name)),
                            Err(e) => (false, e.to_string()),
                        },
                        None => (false, "header matches no known schema".into()),
                    },
                    Err(e) => (false, e.to_string()),
                }
            } else if p.extension().is_some_and(|e| e == "json") {
                check_manifest(p)
            } else {
                (false, "expected a .csv table or a manifest .json".into())
            };
            Gate { name, pass, detail }
        })
        .collect()
}
