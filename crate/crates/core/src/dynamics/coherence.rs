//! Reduced density matrices and the coherence measures χ₁, χ₂, Γ_s.

use faer::Mat;

use crate::basis::{enumerate_sector, FockState, SectorBasis};
use crate::liouvillian::{DensityMatrix, ModelParams, Superoperator};
use crate::spectral::{EigenExpansion, EigenmodeSet, ModeMetrics, STEADY_TOL};
use crate::spectral::metrics::ring_distance;
use crate::{invalid, Error, Result, C64};

use super::{evolve_integrate, make_initial, InitialState};

/// Default decay constant of the distance weight in χ̃₁.
pub const DEFAULT_TILDE_C: f64 = 1.0;

/// `b_{l}|i⟩` and `b_{l1} b_{l2}|i⟩` tables, grouped by the image state.
///
/// Each group lists `(source state, site index, amplitude)`; for pairs the
/// site index is `l1·L + l2`.
#[derive(Debug, Clone)]
pub struct Annihilation {
    l: usize,
    d: usize,
    one: Vec<Vec<(usize, usize, f64)>>,
    two: Vec<Vec<(usize, usize, f64)>>,
}

fn lower(state: &FockState, site: usize) -> Option<(FockState, f64)> {
    let n = state.n(site);
    if n == 0 {
        return None;
    }
    let mut occ = state.occupations().to_vec();
    occ[site] -= 1;
    Some((FockState::new(occ), (n as f64).sqrt()))
}

fn grouped(
    basis: &SectorBasis,
    removed: usize,
    apply: impl Fn(&FockState) -> Vec<(usize, FockState, f64)>,
) -> Result<Vec<Vec<(usize, usize, f64)>>> {
    if basis.particles() < removed {
        return Ok(vec![]);
    }
    let target = enumerate_sector(basis.sites(), basis.particles() - removed, basis.n_max())?;
    let mut groups = vec![Vec::new(); target.dim()];
    for (i, s) in basis.states().iter().enumerate() {
        for (idx, image, amp) in apply(s) {
            let t = target.lookup(&image).expect("image lies in the lower sector");
            groups[t].push((i, idx, amp));
        }
    }
    Ok(groups)
}

impl Annihilation {
    pub fn new(basis: &SectorBasis) -> Result<Self> {
        let l = basis.sites();
        let one = grouped(basis, 1, |s| (0..l).filter_map(|a| lower(s, a).map(|(t, amp)| (a, t, amp))).collect())?;
        let two = grouped(basis, 2, |s| {
            let mut out = Vec::new();
            for l2 in 0..l {
                let Some((s2, a2)) = lower(s, l2) else { continue };
                for l1 in 0..l {
                    if let Some((s1, a1)) = lower(&s2, l1) {
                        out.push((l1 * l + l2, s1, a1 * a2));
                    }
                }
            }
            out
        })?;
        Ok(Self { l, d: basis.dim(), one, two })
    }

    fn contract(&self, groups: &[Vec<(usize, usize, f64)>], size: usize, rho: &Mat<C64>) -> Mat<C64> {
        let mut g = Mat::<C64>::zeros(size, size);
        for group in groups {
            for &(i, a, x) in group {
                for &(j, b, y) in group {
                    g[(a, b)] += rho[(i, j)] * (x * y);
                }
            }
        }
        g
    }

    /// `G⁽¹⁾_{l₁l₂} = Tr[b_{l₁} ρ b†_{l₂}]`.
    pub fn g1(&self, rho: &Mat<C64>) -> Mat<C64> {
        assert_eq!(rho.nrows(), self.d);
        self.contract(&self.one, self.l, rho)
    }

    /// `G⁽²⁾_{(l₁l₂),(l₃l₄)} = Tr[b_{l₁} b_{l₂} ρ b†_{l₃} b†_{l₄}]`, flattened as `l₁·L + l₂`.
    pub fn g2(&self, rho: &Mat<C64>) -> Mat<C64> {
        assert_eq!(rho.nrows(), self.d);
        self.contract(&self.two, self.l * self.l, rho)
    }

    pub fn measures(&self, rho: &Mat<C64>, c: f64) -> ChiMeasures {
        chi_measures(&self.g1(rho), &self.g2(rho), self.l, c)
    }
}

pub fn reduced_g1(rho: &Mat<C64>, basis: &SectorBasis) -> Result<Mat<C64>> {
    check(rho, basis)?;
    Ok(Annihilation::new(basis)?.g1(rho))
}

pub fn reduced_g2(rho: &Mat<C64>, basis: &SectorBasis) -> Result<Mat<C64>> {
    check(rho, basis)?;
    Ok(Annihilation::new(basis)?.g2(rho))
}

fn check(rho: &Mat<C64>, basis: &SectorBasis) -> Result<()> {
    if rho.nrows() != basis.dim() || rho.ncols() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: rho.nrows() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiMeasures {
    pub chi1: f64,
    pub chi2: f64,
    pub chi1_tilde: f64,
}

/// χ₁ = Σ_{l₁≠l₂}|G⁽¹⁾|; χ₂ sums |G⁽²⁾| over tuples with {l₁,l₂} ∩ {l₃,l₄} = ∅;
/// χ̃₁ weights χ₁'s terms by `e^{−c·d(l₁,l₂)}` with ring distance d.
pub fn chi_measures(g1: &Mat<C64>, g2: &Mat<C64>, l: usize, c: f64) -> ChiMeasures {
    let (mut chi1, mut chi1_tilde, mut chi2) = (0.0, 0.0, 0.0);
    for a in 0..l {
        for b in 0..l {
            if a != b {
                let v = g1[(a, b)].norm();
                chi1 += v;
                chi1_tilde += v * (-c * ring_distance(a, b, l) as f64).exp();
            }
        }
    }
    if g2.nrows() == l * l {
        for l1 in 0..l {
            for l2 in 0..l {
                for l3 in 0..l {
                    if l3 == l1 || l3 == l2 {
                        continue;
                    }
                    for l4 in 0..l {
                        if l4 != l1 && l4 != l2 {
                            chi2 += g2[(l1 * l + l2, l3 * l + l4)].norm();
                        }
                    }
                }
            }
        }
    }
    ChiMeasures { chi1, chi2, chi1_tilde }
}

/// `Γ = −d ln χ/dt`: central differences inside, one-sided at the ends.
pub fn gamma_s(t: &[f64], chi: &[f64]) -> Result<Vec<f64>> {
    if t.len() != chi.len() || t.len() < 2 {
        return invalid("Γ_s needs at least two matching samples");
    }
    if let Some(i) = chi.iter().position(|&c| !(c > 0.0)) {
        return Err(Error::Numerical(format!("χ({}) = {} is not positive", t[i], chi[i])));
    }
    let ln: Vec<f64> = chi.iter().map(|c| c.ln()).collect();
    let n = t.len();
    Ok((0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            -(ln[b] - ln[a]) / (t[b] - t[a])
        })
        .collect())
}

#[derive(Debug, Clone, Default)]
pub struct CoherenceSeries {
    pub times: Vec<f64>,
    pub chi1: Vec<f64>,
    pub chi2: Vec<f64>,
    pub chi1_tilde: Vec<f64>,
    /// NaN where χ vanishes (e.g. χ₂ for one particle).
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
}

impl CoherenceSeries {
    pub fn from_measures(times: Vec<f64>, m: &[ChiMeasures]) -> Self {
        let chi1: Vec<f64> = m.iter().map(|x| x.chi1).collect();
        let chi2: Vec<f64> = m.iter().map(|x| x.chi2).collect();
        let rate = |chi: &[f64]| gamma_s(&times, chi).unwrap_or_else(|_| vec![f64::NAN; chi.len()]);
        Self {
            gamma1: rate(&chi1),
            gamma2: rate(&chi2),
            chi1_tilde: m.iter().map(|x| x.chi1_tilde).collect(),
            chi1,
            chi2,
            times,
        }
    }

    /// Pointwise mean of the χ's of several runs, rates recomputed afterwards.
    pub fn average(runs: &[Vec<ChiMeasures>], times: Vec<f64>) -> Result<Self> {
        let Some(first) = runs.first() else { return invalid("no runs to average") };
        if runs.iter().any(|r| r.len() != first.len()) || first.len() != times.len() {
            return invalid("runs have different lengths");
        }
        let n = runs.len() as f64;
        let mean: Vec<ChiMeasures> = (0..times.len())
            .map(|i| ChiMeasures {
                chi1: runs.iter().map(|r| r[i].chi1).sum::<f64>() / n,
                chi2: runs.iter().map(|r| r[i].chi2).sum::<f64>() / n,
                chi1_tilde: runs.iter().map(|r| r[i].chi1_tilde).sum::<f64>() / n,
            })
            .collect();
        Ok(Self::from_measures(times, &mean))
    }
}

/// χ measures along an integrated trajectory.
pub fn coherence_integrate(
    rho0: &DensityMatrix,
    gen: &Superoperator,
    params: &ModelParams,
    ops: &Annihilation,
    times: &[f64],
    dt: f64,
    c: f64,
) -> Result<Vec<ChiMeasures>> {
    let mut out = Vec::with_capacity(times.len());
    evolve_integrate(rho0, gen, params, times, dt, |_, r| out.push(ops.measures(r, c)))?;
    Ok(out)
}

/// χ measures from the eigenmode expansion.
pub fn coherence_expansion(
    exp: &EigenExpansion,
    modes: &EigenmodeSet,
    ops: &Annihilation,
    times: &[f64],
    c: f64,
) -> Vec<ChiMeasures> {
    times.iter().map(|&t| ops.measures(modes.evolve(exp, t).0.matrix(), c)).collect()
}

/// χ measures for the random pure state with the given seed.
pub fn random_state_coherence(
    seed: u64,
    basis: &SectorBasis,
    gen: &Superoperator,
    params: &ModelParams,
    ops: &Annihilation,
    times: &[f64],
    dt: f64,
) -> Result<Vec<ChiMeasures>> {
    let rho0 = make_initial(&InitialState::RandomPure { seed }, basis)?;
    coherence_integrate(&rho0, gen, params, ops, times, dt, DEFAULT_TILDE_C)
}

/// `(τ₁, τ₂) = (γ⁻¹ ln(Lγ/J), 1/|Re λ*|)`.
pub fn estimate_crossovers(l: usize, j: f64, gamma: f64, lambda_star: C64) -> Result<(f64, f64)> {
    if !(j > 0.0) || !(gamma > 0.0) {
        return invalid("crossover times need J > 0 and γ > 0");
    }
    Ok(((l as f64 * gamma / j).ln() / gamma, 1.0 / lambda_star.re.abs()))
}

/// Slowest-decaying nonzero eigenvalue of the fully bound group.
pub fn slowest_incoherent(modes: &EigenmodeSet, metrics: &[ModeMetrics]) -> Option<C64> {
    modes
        .eigenvalues()
        .iter()
        .zip(metrics)
        .filter(|(z, m)| m.group == 0 && z.norm() > STEADY_TOL)
        .map(|(z, _)| *z)
        .min_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
}

/// Σ|c_α| of an expansion per unbound-pair group.
pub fn coefficients_by_group(exp: &EigenExpansion, metrics: &[ModeMetrics]) -> Vec<f64> {
    let groups = metrics.iter().map(|m| m.group).max().map_or(0, |g| g + 1);
    let mut w = vec![0.0; groups];
    for (c, m) in exp.coefficients.iter().zip(metrics) {
        w[m.group] += c.norm();
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::trace;

    fn uniform_pure(l: usize) -> Mat<C64> {
        Mat::from_fn(l, l, |_, _| C64::new(1.0 / l as f64, 0.0))
    }

    #[test]
    fn one_particle_g1_is_rho() {
        let b = SectorBasis::hard_core(4, 1).unwrap();
        let g = reduced_g1(&uniform_pure(4), &b).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((g[(i, j)] - 0.25).norm() < 1e-15);
            }
        }
        let m = chi_measures(&g, &reduced_g2(&uniform_pure(4), &b).unwrap(), 4, 1.0);
        assert!((m.chi1 - 3.0).abs() < 1e-14);
        assert_eq!(m.chi2, 0.0);
    }

    #[test]
    fn infinite_temperature_state() {
        let (l, n) = (6, 3);
        let b = SectorBasis::hard_core(l, n).unwrap();
        let d = b.dim();
        let rho = super::super::maximally_mixed(d);
        let g = reduced_g1(&rho, &b).unwrap();
        for i in 0..l {
            for j in 0..l {
                let want = if i == j { n as f64 / l as f64 } else { 0.0 };
                assert!((g[(i, j)].re - want).abs() < 1e-14 && g[(i, j)].im == 0.0);
            }
        }
        assert!((trace(&g) - n as f64).norm() < 1e-13);
        let g2 = reduced_g2(&rho, &b).unwrap();
        assert!((trace(&g2) - (n * (n - 1)) as f64).norm() < 1e-12);
        let m = chi_measures(&g, &g2, l, 1.0);
        assert_eq!((m.chi1, m.chi2), (0.0, 0.0));
    }

    #[test]
    fn hard_core_pairs_vanish() {
        let b = SectorBasis::hard_core(5, 2).unwrap();
        let d = b.dim();
        let rho = make_initial(&InitialState::RandomPure { seed: 4 }, &b).unwrap();
        let g2 = reduced_g2(rho.matrix(), &b).unwrap();
        for l in 0..5 {
            for k in 0..25 {
                assert_eq!(g2[(l * 5 + l, k)], C64::default());
            }
        }
        assert_eq!(d, 10);
    }

    #[test]
    fn soft_core_double_occupancy() {
        let b = SectorBasis::soft_core(3, 2).unwrap();
        let i = b.lookup(&FockState::new(vec![2, 0, 0])).unwrap();
        let mut rho = Mat::<C64>::zeros(b.dim(), b.dim());
        rho[(i, i)] = C64::new(1.0, 0.0);
        let g1 = reduced_g1(&rho, &b).unwrap();
        assert!((g1[(0, 0)].re - 2.0).abs() < 1e-14);
        let g2 = reduced_g2(&rho, &b).unwrap();
        assert!((g2[(0, 0)].re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn g1_is_hermitian_psd() {
        let b = SectorBasis::hard_core(6, 2).unwrap();
        let rho = make_initial(&InitialState::RandomPure { seed: 9 }, &b).unwrap();
        let g = reduced_g1(rho.matrix(), &b).unwrap();
        assert!(crate::liouvillian::hermitian_defect(&g) < 1e-14);
        let ev = g.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        assert!(ev.iter().all(|&x| x > -1e-13));
    }

    #[test]
    fn gamma_of_exponential() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let chi: Vec<f64> = t.iter().map(|x| (-2.0 * x).exp()).collect();
        assert!(gamma_s(&t, &chi).unwrap().iter().all(|g| (g - 2.0).abs() < 1e-10));
        assert!(gamma_s(&t, &vec![0.0; 50]).is_err());
    }

    #[test]
    fn no_hopping_rates_are_integer() {
        let p = ModelParams::hardcore(5, 2, 0.0, 1.0);
        let (b, m) = crate::liouvillian::assemble(&p).unwrap();
        let ops = Annihilation::new(&b).unwrap();
        let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
        let run = random_state_coherence(5, &b, &m, &p, &ops, &times, 0.01).unwrap();
        let s = CoherenceSeries::from_measures(times, &run);
        assert!(s.gamma1.iter().all(|g| (g - 1.0).abs() < 1e-6));
        assert!(s.gamma2.iter().all(|g| (g - 2.0).abs() < 1e-6));
    }

    #[test]
    fn crossovers() {
        let (t1, t2) = estimate_crossovers(10, 0.1, 1.0, C64::new(-0.05, 0.0)).unwrap();
        assert!((t1 - 100f64.ln()).abs() < 1e-14);
        assert!((t2 - 20.0).abs() < 1e-12);
        assert!(estimate_crossovers(10, 0.0, 1.0, C64::new(-0.05, 0.0)).is_err());
    }
}
