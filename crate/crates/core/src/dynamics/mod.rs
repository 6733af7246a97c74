//! Density-matrix time evolution and relaxation observables.
//!
//! Two independent propagators are provided: the eigenmode expansion
//! `ρ(t) = Σ c_α e^{λ_α t} ρ_α` (see [`crate::spectral::EigenmodeSet`]) and a
//! fixed-step fourth-order Runge-Kutta integrator on the matrix-free
//! generator. Agreement between the two is the main correctness check.

pub mod coherence;
pub mod fit;
pub mod toy;

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::SectorBasis;
use crate::liouvillian::{hermitian_defect, trace, DensityMatrix, ModelParams, Superoperator};
use crate::spectral::{EigenExpansion, EigenmodeSet};
use crate::{invalid, Error, Result, C64};

/// Eigenbases with a worse condition estimate are not trusted for expansion.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone)]
pub enum InitialState {
    /// One particle with density `(1 + Δn cos kl)/L`, sites labelled l = 1..L.
    DensityModulated { k: f64, delta_n: f64 },
    /// `|ψ⟩⟨ψ|` with ψ uniform on the unit sphere.
    RandomPure { seed: u64 },
    Custom(Mat<C64>),
}

pub fn make_initial(kind: &InitialState, basis: &SectorBasis) -> Result<DensityMatrix> {
    let d = basis.dim();
    match kind {
        InitialState::DensityModulated { k, delta_n } => {
            if basis.particles() != 1 {
                return invalid("density-modulated initial state needs the one-particle sector");
            }
            if delta_n.abs() > 1.0 {
                return invalid(format!("|Δn| = {} > 1 gives negative densities", delta_n.abs()));
            }
            let l = basis.sites() as f64;
            let mut m = Mat::<C64>::zeros(d, d);
            for i in 0..d {
                let site = basis.state_at(i).occupations().iter().position(|&n| n == 1).expect("one particle");
                m[(i, i)] = C64::new((1.0 + delta_n * (k * (site + 1) as f64).cos()) / l, 0.0);
            }
            DensityMatrix::new(m)
        }
        InitialState::RandomPure { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let psi: Vec<C64> = (0..d)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    C64::new(re, im)
                })
                .collect();
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let psi: Vec<C64> = psi.into_iter().map(|z| z / norm).collect();
            DensityMatrix::new(Mat::from_fn(d, d, |i, j| psi[i] * psi[j].conj()))
        }
        InitialState::Custom(m) => {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
            }
            DensityMatrix::new(m.clone())
        }
    }
}

/// `Σ_l ⟨n_l⟩ e^{−ikl}` with sites labelled l = 1..L.
pub fn n_of_k(rho: &Mat<C64>, basis: &SectorBasis, k: f64) -> C64 {
    let l = basis.sites();
    let mut dens = vec![0.0; l];
    for (i, s) in basis.states().iter().enumerate() {
        let p = rho[(i, i)].re;
        for (site, &n) in s.occupations().iter().enumerate() {
            dens[site] += p * n as f64;
        }
    }
    dens.iter().enumerate().map(|(site, &n)| n * C64::from_polar(1.0, -k * (site + 1) as f64)).sum()
}

/// Expansion coefficients, refusing ill-conditioned eigenbases.
pub fn expand(rho0: &DensityMatrix, modes: &EigenmodeSet) -> Result<EigenExpansion> {
    let x = modes.expansion(rho0.matrix())?;
    if x.condition > MAX_CONDITION {
        return Err(Error::Numerical(format!(
            "eigenbasis condition estimate {:.3e} exceeds {MAX_CONDITION:e}; use the integrator",
            x.condition
        )));
    }
    Ok(x)
}

/// ρ(t) from the eigenmode expansion, Hermitized; also returns the removed asymmetry.
pub fn evolve_expansion(rho0: &DensityMatrix, modes: &EigenmodeSet, t: f64) -> Result<(DensityMatrix, f64)> {
    let x = expand(rho0, modes)?;
    Ok(modes.evolve(&x, t))
}

/// Stability bound `0.1 / max(γ, 4J, |U|, 1)` for the fixed-step integrator.
pub fn step_bound(params: &ModelParams) -> f64 {
    0.1 / params.gamma.max(4.0 * params.j.abs()).max(params.u.abs()).max(1.0)
}

/// Conservation diagnostics collected along a trajectory.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrajectoryReport {
    pub max_trace_error: f64,
    pub max_hermiticity: f64,
    pub steps: usize,
}

/// `x + a·y`.
fn axpy(x: &Mat<C64>, a: f64, y: &Mat<C64>) -> Mat<C64> {
    Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] + a * y[(i, j)])
}

fn rk4_step(gen: &Superoperator, rho: &Mat<C64>, h: f64) -> Result<Mat<C64>> {
    let k1 = gen.apply_matrix_free(rho)?;
    let k2 = gen.apply_matrix_free(&axpy(rho, 0.5 * h, &k1))?;
    let k3 = gen.apply_matrix_free(&axpy(rho, 0.5 * h, &k2))?;
    let k4 = gen.apply_matrix_free(&axpy(rho, h, &k3))?;
    let c = h / 6.0;
    Ok(Mat::from_fn(rho.nrows(), rho.ncols(), |i, j| {
        rho[(i, j)] + c * (k1[(i, j)] + 2.0 * k2[(i, j)] + 2.0 * k3[(i, j)] + k4[(i, j)])
    }))
}

/// Fourth-order Runge-Kutta with steps no longer than `dt`, landing exactly on
/// every sample time; `observe(t_index, ρ)` is called at each sample.
pub fn evolve_integrate<F>(
    rho0: &DensityMatrix,
    gen: &Superoperator,
    params: &ModelParams,
    times: &[f64],
    dt: f64,
    mut observe: F,
) -> Result<TrajectoryReport>
where
    F: FnMut(usize, &Mat<C64>),
{
    let bound = step_bound(params);
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::StepSize { dt, bound });
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return invalid("sample times must be non-negative and ascending");
    }
    let mut rho = rho0.matrix().clone();
    let mut t = 0.0;
    let mut report = TrajectoryReport::default();
    for (idx, &target) in times.iter().enumerate() {
        let span = target - t;
        if span > 0.0 {
            let n = (span / dt - 1e-9).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for _ in 0..n {
                rho = rk4_step(gen, &rho, h)?;
            }
            report.steps += n;
            t = target;
        }
        report.max_trace_error = report.max_trace_error.max((trace(&rho) - C64::new(1.0, 0.0)).norm());
        report.max_hermiticity = report.max_hermiticity.max(hermitian_defect(&rho));
        observe(idx, &rho);
    }
    Ok(report)
}

/// States at the sample times.
pub fn integrate_states(
    rho0: &DensityMatrix,
    gen: &Superoperator,
    params: &ModelParams,
    times: &[f64],
    dt: f64,
) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(times.len());
    evolve_integrate(rho0, gen, params, times, dt, |_, r| out.push(DensityMatrix::from_matrix_unchecked(r.clone())))?;
    Ok(out)
}

/// `I/D`, the dephasing steady state.
pub fn maximally_mixed(d: usize) -> Mat<C64> {
    Mat::from_fn(d, d, |i, j| if i == j { C64::new(1.0 / d as f64, 0.0) } else { C64::default() })
}

/// Uniform grid `0, Δt, …, t_max`.
pub fn time_grid(t_max: f64, step: f64) -> Vec<f64> {
    let n = (t_max / step + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Largest change of `observable` along the trajectory when `dt` is halved.
pub fn convergence_gate<F>(
    rho0: &DensityMatrix,
    gen: &Superoperator,
    params: &ModelParams,
    times: &[f64],
    dt: f64,
    observable: F,
) -> Result<f64>
where
    F: Fn(&Mat<C64>) -> f64,
{
    let mut a = Vec::with_capacity(times.len());
    evolve_integrate(rho0, gen, params, times, dt, |_, r| a.push(observable(r)))?;
    let mut worst: f64 = 0.0;
    evolve_integrate(rho0, gen, params, times, dt / 2.0, |i, r| worst = worst.max((observable(r) - a[i]).abs()))?;
    Ok(worst)
}
