//! The subcommands: each resolves its parameters, evaluates the sweep points
//! on the worker pool, and hands the results to a single writer in sweep order.

use std::f64::consts::PI;

use incoh_core::bethe::{
    bethe_residual, j_crit_m, p_grid, solve_string, string_candidate, string_eigenvalue, string_eigenvalue_closed,
};
use incoh_core::dynamics::coherence::{Annihilation, ChiMeasures, CoherenceSeries, DEFAULT_TILDE_C};
use incoh_core::dynamics::fit::fit_relaxation;
use incoh_core::dynamics::toy::{find_plateaus, log_grid, toy_dos_chi, toy_dos_gamma, toy_dos_plateaus, ToyDosParams};
use incoh_core::dynamics::{evolve_integrate, expand, make_initial, n_of_k, step_bound, time_grid, InitialState};
use incoh_core::io::{Cell, Table, DYNAMICS, SINGLE_PARTICLE, SPECTRUM, STRINGS, TOY_DOS};
use incoh_core::liouvillian::{assemble, DensityMatrix, Model, ModelParams};
use incoh_core::single_particle::{j_crit, lambda_inc, momentum_grid, qc_gap_analytic, solve_bound_state};
use incoh_core::spectral::{compute_metrics, degenerate_clusters, diagonalize, qc_gap, DiagOptions};
use incoh_core::C64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::output::Output;
use crate::settings::{Settings, Sweep};
use crate::{Context, Failure};

/// JSON number, or its CSV spelling when not finite.
fn num(x: f64) -> Value {
    if x.is_finite() { json!(x) } else { json!(incoh_core::io::fmt_f64(x)) }
}

fn complex(z: C64) -> Value {
    json!([num(z.re), num(z.im)])
}

fn nan_if_none(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

/// The `sweep` setting, restricted to the parameters a command can vary.
fn sweep_points(s: &mut Settings, allowed: &[&str]) -> Result<Option<Sweep>, Failure> {
    let sweep: Option<Sweep> = s.get_opt("sweep")?;
    if let Some(sw) = &sweep {
        if !allowed.contains(&sw.parameter.as_str()) {
            return Err(Failure::Config(format!("this command cannot sweep {}; choose one of {allowed:?}", sw.parameter)));
        }
    }
    Ok(sweep)
}

/// Evaluate `f` at every point on the pool; results come back in point order.
fn run_points<P: Sync, R: Send>(ctx: &Context, points: &[P], f: impl Fn(&P) -> Result<R, Failure> + Sync) -> Result<Vec<R>, Failure> {
    ctx.pool.install(|| points.par_iter().map(&f).collect::<Vec<_>>()).into_iter().collect()
}

fn stem(base: &str, sweep: &Option<Sweep>, i: usize) -> String {
    if sweep.is_some() { format!("{base}_{i:03}") } else { base.to_string() }
}

fn model_params(s: &mut Settings, default_l: usize) -> Result<ModelParams, Failure> {
    let model: Model = s.get::<String>("model", "hardcore".into())?.parse()?;
    let p = ModelParams {
        model,
        l: s.get("L", default_l)?,
        n: s.get("N", 1usize)?,
        j: s.get("J", 0.2)?,
        gamma: s.get("gamma", 1.0)?,
        u: s.get("U", 0.0)?,
    };
    p.validate()?;
    Ok(p)
}

fn with_model_value(mut p: ModelParams, name: &str, v: f64) -> ModelParams {
    match name {
        "J" => p.j = v,
        "gamma" => p.gamma = v,
        "U" => p.u = v,
        _ => unreachable!("sweep parameter checked against the allowed list"),
    }
    p
}

fn model_json(p: &ModelParams) -> Value {
    json!({ "model": p.model.to_string(), "L": p.l, "N": p.n, "J": p.j, "gamma": p.gamma, "U": p.u })
}

// ---------------------------------------------------------------- spectrum

struct SpectrumPoint {
    table: Table,
    report: Value,
    ok: bool,
}

fn spectrum_point(p: &ModelParams, opts: &DiagOptions, check: bool) -> Result<SpectrumPoint, Failure> {
    let (basis, m) = assemble(p)?;
    let modes = diagonalize(&m, &basis, opts)?;
    let metrics = compute_metrics(&modes, &basis);
    let qc = qc_gap(&modes, &metrics, &basis, p.gamma);
    let mut table = Table::for_schema(&SPECTRUM);
    for (a, (z, mm)) in modes.eigenvalues().iter().zip(&metrics).enumerate() {
        table.push(vec![
            z.re.into(),
            z.im.into(),
            mm.n_b_cluster.into(),
            nan_if_none(mm.s_diag).into(),
            nan_if_none(mm.s_off).into(),
            mm.group.into(),
            mm.class.to_string().into(),
            modes.residual_norms()[a].into(),
        ]);
    }
    // distinct eigenvalues with multiplicities, in order of first appearance
    let roots = degenerate_clusters(modes.eigenvalues(), 1e-9);
    let mut clusters: Vec<(usize, C64, usize)> = vec![];
    for (a, &r) in roots.iter().enumerate() {
        match clusters.iter_mut().find(|c| c.0 == r) {
            Some(c) => c.2 += 1,
            None => clusters.push((r, modes.eigenvalues()[a], 1)),
        }
    }
    let mut ok = modes.residuals_ok();
    let mut report = json!({
        "params": model_json(p),
        "ladder_dim": m.ladder_dim(),
        "liouvillian_gap": modes.liouvillian_gap().map(num),
        "max_residual": num(modes.max_residual()),
        "residuals_ok": modes.residuals_ok(),
        "qc_gap": {
            "rule": format!("{:?}", qc.rule),
            "gaps": qc.gaps.iter().map(|&g| num(g)).collect::<Vec<_>>(),
            "real_gaps": qc.real_gaps.iter().map(|&g| num(g)).collect::<Vec<_>>(),
            "bins": qc.bins,
            "threshold": qc.threshold,
            "gap_closed": qc.gap_closed,
            "all_closed": qc.all_closed(),
            "group_counts": qc.group_counts,
            "ambiguous": qc.ambiguous,
            "warning": qc.warning(),
        },
        "distinct_eigenvalues": clusters.iter().map(|c| json!({ "lambda": complex(c.1), "count": c.2 })).collect::<Vec<_>>(),
    });
    if p.n == 1 && p.model == Model::Hardcore {
        report["qc_gap"]["analytic"] = num(qc_gap_analytic(p.j, p.gamma));
    }
    if check {
        let a = modes.verify_appendix_a()?;
        ok &= a.passes();
        report["general_properties"] = json!({
            "passes": a.passes(),
            "max_re": num(a.max_re),
            "conjugation_defect": num(a.conjugation_defect),
            "max_nonzero_trace": num(a.max_nonzero_trace),
            "steady_count": a.steady_count,
            "biorthogonality_defect": num(a.biorthogonality_defect),
        });
    }
    Ok(SpectrumPoint { table, report, ok })
}

pub fn spectrum(s: &mut Settings, ctx: &Context, out: &mut Output) -> Result<Value, Failure> {
    let base = model_params(s, 20)?;
    let sweep = sweep_points(s, &["J", "gamma", "U"])?;
    let params: Vec<ModelParams> = match &sweep {
        Some(sw) => sw.values.iter().map(|&v| with_model_value(base, &sw.parameter, v)).collect(),
        None => vec![base],
    };
    let opts = DiagOptions { dense_limit: ctx.dense_limit, ..Default::default() };
    let results = run_points(ctx, &params, |p| spectrum_point(p, &opts, ctx.check))?;
    let mut reports = vec![];
    let mut ok = true;
    for (i, r) in results.into_iter().enumerate() {
        out.table(&stem("spectrum", &sweep, i), &SPECTRUM, &r.table)?;
        reports.push(r.report);
        ok &= r.ok;
    }
    out.json("qc_gap.json", &Value::Array(reports))?;
    Ok(json!({ "points": params.len(), "checks_ok": ok }))
}

// --------------------------------------------------------- single-particle

fn single_particle_point(j: f64, gamma: f64, l: usize) -> Result<(Table, Value), Failure> {
    let mut table = Table::for_schema(&SINGLE_PARTICLE);
    let mut bound = 0;
    let mut worst: f64 = 0.0;
    for k in momentum_grid(l) {
        let b = solve_bound_state(k, j, gamma)?;
        bound += b.exists as usize;
        worst = worst.max(b.residual);
        table.push(vec![k.into(), b.lambda.re.into(), b.lambda.im.into(), b.alpha.re.into(), b.alpha.im.into(), b.xi_con.into(), b.exists.into()]);
    }
    let report = json!({
        "J": j,
        "gamma": gamma,
        "L": l,
        "qc_gap_analytic": qc_gap_analytic(j, gamma),
        "j_crit_pi": j_crit(PI, gamma).map(num),
        "bound_states": bound,
        "momenta": l,
        "max_residual": num(worst),
    });
    Ok((table, report))
}

pub fn single_particle(s: &mut Settings, ctx: &Context, out: &mut Output) -> Result<Value, Failure> {
    let l: usize = s.get("L", 20)?;
    let j: f64 = s.get("J", 0.2)?;
    let gamma: f64 = s.get("gamma", 1.0)?;
    if l < 2 || !(gamma >= 0.0) || !j.is_finite() {
        return Err(Failure::Config("need L ≥ 2, finite J and γ ≥ 0".into()));
    }
    let sweep = sweep_points(s, &["J", "gamma"])?;
    let points: Vec<(f64, f64)> = match &sweep {
        Some(sw) if sw.parameter == "J" => sw.values.iter().map(|&v| (v, gamma)).collect(),
        Some(sw) => sw.values.iter().map(|&v| (j, v)).collect(),
        None => vec![(j, gamma)],
    };
    let results = run_points(ctx, &points, |&(j, g)| single_particle_point(j, g, l))?;
    let mut reports = vec![];
    for (i, (table, report)) in results.into_iter().enumerate() {
        out.table(&stem("single_particle", &sweep, i), &SINGLE_PARTICLE, &table)?;
        reports.push(report);
    }
    out.json("single_particle.json", &Value::Array(reports))?;
    Ok(json!({ "points": points.len() }))
}

// ---------------------------------------------------------------- dynamics

#[derive(Debug, Clone, Copy, PartialEq)]
enum Method {
    Rk4,
    Expansion,
}

#[derive(Debug, Clone, Copy)]
struct DynamicsPoint {
    p: ModelParams,
    k: f64,
    delta_n: f64,
}

struct DynamicsSetup {
    times: Vec<f64>,
    dt: Option<f64>,
    method: Method,
    seeds: Vec<u64>,
    modulated: bool,
}

/// Per-sample observables of one trajectory.
struct Trace {
    n_k: Vec<C64>,
    chi: Vec<ChiMeasures>,
    trace_err: Vec<f64>,
    min_eig: Vec<f64>,
}

fn trajectory(pt: &DynamicsPoint, set: &DynamicsSetup, init: &InitialState, opts: &DiagOptions) -> Result<Trace, Failure> {
    let (basis, m) = assemble(&pt.p)?;
    let ops = Annihilation::new(&basis)?;
    let rho0 = make_initial(init, &basis)?;
    let n = set.times.len();
    let mut tr = Trace { n_k: Vec::with_capacity(n), chi: Vec::with_capacity(n), trace_err: vec![], min_eig: vec![] };
    let mut observe = |r: &faer::Mat<C64>| {
        let d = DensityMatrix::from_matrix_unchecked(r.clone()).diagnostics();
        tr.n_k.push(n_of_k(r, &basis, pt.k));
        tr.chi.push(ops.measures(r, DEFAULT_TILDE_C));
        tr.trace_err.push(d.trace_error);
        tr.min_eig.push(d.min_eigenvalue);
    };
    match set.method {
        Method::Rk4 => {
            let dt = set.dt.unwrap_or_else(|| step_bound(&pt.p).min(0.02));
            evolve_integrate(&rho0, &m, &pt.p, &set.times, dt, |_, r| observe(r))?;
        }
        Method::Expansion => {
            let modes = diagonalize(&m, &basis, opts)?;
            let x = expand(&rho0, &modes)?;
            for &t in &set.times {
                observe(modes.evolve(&x, t).0.matrix());
            }
        }
    }
    Ok(tr)
}

/// Plateaus of a rate series over its positive, finite samples.
fn plateau_rows(t: &[f64], g: &[f64]) -> Value {
    let (t, g): (Vec<f64>, Vec<f64>) = t.iter().zip(g).filter(|(t, g)| **t > 0.0 && g.is_finite() && **g > 0.0).map(|(a, b)| (*a, *b)).unzip();
    Value::Array(find_plateaus(&t, &g).iter().map(|q| json!({ "t": q.t, "gamma": q.gamma, "slope": q.slope })).collect())
}

fn dynamics_point(pt: &DynamicsPoint, set: &DynamicsSetup, opts: &DiagOptions) -> Result<(Table, Value), Failure> {
    let inits: Vec<InitialState> = if set.modulated {
        vec![InitialState::DensityModulated { k: pt.k, delta_n: pt.delta_n }]
    } else {
        set.seeds.iter().map(|&seed| InitialState::RandomPure { seed }).collect()
    };
    // ensemble members in parallel; averaged in seed order
    let runs: Vec<Trace> = inits.par_iter().map(|init| trajectory(pt, set, init, opts)).collect::<Result<_, _>>()?;
    let n = set.times.len();
    let members = runs.len() as f64;
    let n_k: Vec<C64> = (0..n).map(|i| runs.iter().map(|r| r.n_k[i]).sum::<C64>() / members).collect();
    let chis: Vec<Vec<ChiMeasures>> = runs.iter().map(|r| r.chi.clone()).collect();
    let series = CoherenceSeries::average(&chis, set.times.clone())?;
    let mut table = Table::for_schema(&DYNAMICS);
    for i in 0..n {
        let trace_err = runs.iter().map(|r| r.trace_err[i]).fold(0.0, f64::max);
        let min_eig = runs.iter().map(|r| r.min_eig[i]).fold(f64::INFINITY, f64::min);
        table.push(vec![
            set.times[i].into(),
            n_k[i].re.into(),
            n_k[i].im.into(),
            series.chi1[i].into(),
            series.chi2[i].into(),
            series.chi1_tilde[i].into(),
            series.gamma1[i].into(),
            series.gamma2[i].into(),
            trace_err.into(),
            min_eig.into(),
        ]);
    }
    let max_trace_err = runs.iter().flat_map(|r| r.trace_err.iter().copied()).fold(0.0, f64::max);
    let mut report = json!({
        "params": model_json(&pt.p),
        "k": pt.k,
        "max_trace_error": num(max_trace_err),
    });
    if set.modulated {
        report["delta_n"] = json!(pt.delta_n);
        let y: Vec<f64> = n_k.iter().map(|z| z.re).collect();
        report["J"] = json!(pt.p.j);
        report["gamma"] = json!(pt.p.gamma);
        match fit_relaxation(&set.times, &y, pt.p.gamma) {
            Ok(f) => {
                report["fit_kind"] = json!(f.kind.to_string());
                report["rate_or_omega"] = num(f.value);
                report["r2"] = num(f.r2);
                report["window"] = json!([num(f.window.0), num(f.window.1)]);
            }
            // an unfittable series is reported, not fatal: the samples are still valid
            Err(e) => {
                report["fit_kind"] = Value::Null;
                report["fit_error"] = json!(e.to_string());
            }
        }
        report["lambda_inc"] = complex(lambda_inc(pt.k, pt.p.j, pt.p.gamma));
        report["j_crit"] = j_crit(pt.k, pt.p.gamma).map_or(Value::Null, num);
    } else {
        report["seeds"] = json!(set.seeds);
        report["plateaus_gamma1"] = plateau_rows(&series.times, &series.gamma1);
        report["plateaus_gamma2"] = plateau_rows(&series.times, &series.gamma2);
    }
    Ok((table, report))
}

pub fn dynamics(s: &mut Settings, ctx: &Context, out: &mut Output) -> Result<Value, Failure> {
    let p = model_params(s, 20)?;
    let k: f64 = s.get("k", PI)?;
    let delta_n: f64 = s.get("delta-n", 0.5)?;
    let tmax: f64 = s.get("tmax", 40.0)?;
    let sample: f64 = s.get("sample-dt", 0.05)?;
    let dt: Option<f64> = s.get_opt("dt")?;
    let method = match s.get::<String>("method", "rk4".into())?.as_str() {
        "rk4" => Method::Rk4,
        "expansion" => Method::Expansion,
        other => return Err(Failure::Config(format!("unknown method {other:?}; use rk4 or expansion"))),
    };
    let default_init = if p.n == 1 { "modulated" } else { "random" };
    let modulated = match s.get::<String>("init", default_init.into())?.as_str() {
        "modulated" => true,
        "random" => false,
        other => return Err(Failure::Config(format!("unknown initial state {other:?}; use modulated or random"))),
    };
    let (seeds, sweep_allowed): (Vec<u64>, &[&str]) = if modulated {
        (vec![], &["J", "gamma", "U", "k", "delta-n"])
    } else {
        let seed: u64 = s.get("seed", 0)?;
        let ensemble: u64 = s.get("ensemble", 20)?;
        if ensemble == 0 {
            return Err(Failure::Config("ensemble must contain at least one state".into()));
        }
        ((seed..seed + ensemble).collect(), &["J", "gamma", "U", "k"])
    };
    if !(tmax > 0.0 && sample > 0.0 && tmax.is_finite()) || tmax / sample > 1e6 {
        return Err(Failure::Config("need 0 < sample-dt ≤ tmax with at most 10⁶ samples".into()));
    }
    let sweep = sweep_points(s, sweep_allowed)?;
    let base = DynamicsPoint { p, k, delta_n };
    let points: Vec<DynamicsPoint> = match &sweep {
        Some(sw) => sw
            .values
            .iter()
            .map(|&v| match sw.parameter.as_str() {
                "k" => DynamicsPoint { k: v, ..base },
                "delta-n" => DynamicsPoint { delta_n: v, ..base },
                name => DynamicsPoint { p: with_model_value(p, name, v), ..base },
            })
            .collect(),
        None => vec![base],
    };
    let set = DynamicsSetup { times: time_grid(tmax, sample), dt, method, seeds, modulated };
    let opts = DiagOptions { dense_limit: ctx.dense_limit, ..Default::default() };
    let results = run_points(ctx, &points, |pt| dynamics_point(pt, &set, &opts))?;
    let mut reports = vec![];
    let mut worst: f64 = 0.0;
    for (i, (table, report)) in results.into_iter().enumerate() {
        out.table(&stem("dynamics", &sweep, i), &DYNAMICS, &table)?;
        if let Some(e) = report["max_trace_error"].as_f64() {
            worst = worst.max(e);
        }
        reports.push(report);
    }
    out.json("fit.json", &Value::Array(reports))?;
    Ok(json!({ "points": points.len(), "checks_ok": worst <= 1e-6 }))
}

// ------------------------------------------------------------------- bethe

fn bethe_point(m: usize, j: f64, gamma: f64, steps: usize, l: usize) -> Result<(Table, Value), Failure> {
    let mut table = Table::for_schema(&STRINGS);
    table.header.push(format!("residual_L{l}"));
    let mut gap: Vec<f64> = vec![];
    let mut confined_worst: f64 = 0.0;
    for p in p_grid(steps) {
        let cand = string_candidate(m, p, j, gamma)?;
        let residual = bethe_residual(&cand, l);
        let (kappa, mu, lambda, exists) = match solve_string(m, p, j, gamma)? {
            Some(st) => {
                confined_worst = confined_worst.max(residual);
                (st.kappa.re, st.mu.re, string_eigenvalue(&st)?, true)
            }
            None => {
                gap.push(p);
                (f64::NAN, f64::NAN, string_eigenvalue_closed(m, 2.0 * p, j, gamma), false)
            }
        };
        let row: Vec<Cell> = vec![
            m.into(),
            p.into(),
            kappa.into(),
            mu.into(),
            (2.0 * p).into(),
            lambda.re.into(),
            lambda.im.into(),
            exists.into(),
            residual.into(),
        ];
        table.push(row);
    }
    let window = match (gap.first(), gap.last()) {
        (Some(&a), Some(&b)) => json!([a, b]),
        _ => Value::Null,
    };
    let report = json!({
        "m": m,
        "J": j,
        "gamma": gamma,
        "j_crit": j_crit_m(m, gamma),
        "scan_steps": steps,
        "no_solution_count": gap.len(),
        "no_solution_window": window,
        "residual_L": l,
        "max_confined_residual": num(confined_worst),
    });
    Ok((table, report))
}

pub fn bethe(s: &mut Settings, ctx: &Context, out: &mut Output) -> Result<Value, Failure> {
    let m: usize = s.get("m", 1)?;
    let j: f64 = s.get("J", 0.2)?;
    let gamma: f64 = s.get("gamma", 1.0)?;
    let steps: usize = s.get("scan-p", 200)?;
    let l: usize = s.get("residual-L", 64)?;
    if steps < 2 || l < 2 {
        return Err(Failure::Config("need scan-p ≥ 2 and residual-L ≥ 2".into()));
    }
    let sweep = sweep_points(s, &["J", "gamma"])?;
    let points: Vec<(f64, f64)> = match &sweep {
        Some(sw) if sw.parameter == "J" => sw.values.iter().map(|&v| (v, gamma)).collect(),
        Some(sw) => sw.values.iter().map(|&v| (j, v)).collect(),
        None => vec![(j, gamma)],
    };
    let results = run_points(ctx, &points, |&(j, g)| bethe_point(m, j, g, steps, l))?;
    let mut reports = vec![];
    for (i, (table, report)) in results.into_iter().enumerate() {
        out.table(&stem("strings", &sweep, i), &STRINGS, &table)?;
        reports.push(report);
    }
    out.json("strings.json", &Value::Array(reports))?;
    Ok(json!({ "points": points.len() }))
}

// ------------------------------------------------------------------ toydos

fn toydos_point(p: &ToyDosParams, tmin: f64, tmax: f64, points: usize) -> Result<(Table, Value), Failure> {
    let mut table = Table::for_schema(&TOY_DOS);
    for t in log_grid(tmin, tmax, points) {
        table.push(vec![t.into(), toy_dos_chi(p, t)?.into(), toy_dos_gamma(p, t)?.into()]);
    }
    let plateaus = toy_dos_plateaus(p, tmin, tmax, points)?;
    let report = json!({
        "a0": p.a0, "a1": p.a1, "delta": p.delta0, "gamma": p.gamma, "eta": p.eta,
        "plateaus": plateaus.iter().map(|q| json!({ "t": q.t, "gamma1": q.gamma, "slope": q.slope })).collect::<Vec<_>>(),
    });
    Ok((table, report))
}

pub fn toydos(s: &mut Settings, ctx: &Context, out: &mut Output) -> Result<Value, Failure> {
    let base = ToyDosParams::symmetric(s.get("a0", 0.1)?, s.get("a1", 1.0)?, s.get("delta", 0.1)?, s.get("gamma", 1.0)?, s.get("eta", 1.0)?);
    base.validate()?;
    let tmin: f64 = s.get("tmin", 1e-2)?;
    let tmax: f64 = s.get("tmax", 1e3)?;
    let n: usize = s.get("points", 400)?;
    if !(tmin > 0.0 && tmax > tmin && tmax.is_finite()) || n < 3 {
        return Err(Failure::Config("need 0 < tmin < tmax and at least 3 points".into()));
    }
    let sweep = sweep_points(s, &["gamma", "delta", "eta"])?;
    let points: Vec<ToyDosParams> = match &sweep {
        Some(sw) => sw
            .values
            .iter()
            .map(|&v| match sw.parameter.as_str() {
                "gamma" => ToyDosParams { gamma: v, ..base },
                "delta" => ToyDosParams { delta0: v, delta1: v, ..base },
                _ => ToyDosParams { eta: v, ..base },
            })
            .collect(),
        None => vec![base],
    };
    let results = run_points(ctx, &points, |p| toydos_point(p, tmin, tmax, n))?;
    let mut reports = vec![];
    for (i, (table, report)) in results.into_iter().enumerate() {
        out.table(&stem("toydos", &sweep, i), &TOY_DOS, &table)?;
        reports.push(report);
    }
    out.json("toydos.json", &Value::Array(reports))?;
    Ok(json!({ "points": points.len() }))
}
