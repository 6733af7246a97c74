//! Exact solution layer: k-Λ strings of the imaginary-interaction Hubbard
//! model and the Hubbard ladder itself.
//!
//! The hard-core ladder maps, after a Jordan-Wigner transformation and a
//! staggered gauge on one leg, onto `H_φ = iL̃`: a Hubbard chain with
//! interaction `iγ` under flux φ (0 for odd N, π for even N). Length-2m
//! strings describe m-th order incoherentons; they exist only while
//! `cosh κ = −mγ/(4J sin p) ≥ 1`, which fails around p = −π/2 once J > mγ/4.

pub mod ladder;

use std::f64::consts::PI;

use crate::{invalid, Error, Result, C64, I};

pub use ladder::{HubbardLadderOps, SymmetryReport};

/// Agreement required between the summed and closed-form string eigenvalues.
pub const EIGENVALUE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetheParams {
    pub j: f64,
    pub gamma: f64,
    pub l: usize,
    /// Particles per leg.
    pub n: usize,
}

impl BetheParams {
    pub fn new(l: usize, n: usize, j: f64, gamma: f64) -> Self {
        Self { j, gamma, l, n }
    }

    /// Dimensionless interaction `u = iγ/(4J)`.
    pub fn u(&self) -> C64 {
        interaction(self.j, self.gamma)
    }

    /// Flux 0 for odd N, π for even N.
    pub fn phi(&self) -> f64 {
        flux(self.n)
    }
}

pub fn interaction(j: f64, gamma: f64) -> C64 {
    C64::new(0.0, gamma / (4.0 * j))
}

pub fn flux(n: usize) -> f64 {
    if n % 2 == 0 { PI } else { 0.0 }
}

/// `J_c^{(m)} = mγ/4`.
pub fn j_crit_m(m: usize, gamma: f64) -> f64 {
    m as f64 * gamma / 4.0
}

#[derive(Debug, Clone)]
pub struct KLambdaString {
    pub m: usize,
    pub p: f64,
    pub q: f64,
    /// Imaginary offset of the end quasimomenta; complex for a deconfined candidate.
    pub kappa: C64,
    pub mu: C64,
    pub u: C64,
    /// k₁ … k_{2m}.
    pub k: Vec<C64>,
    /// Λ₁ … Λ_m.
    pub lambda_rapidities: Vec<C64>,
    /// Total momentum `Σk − mπ = 2p`.
    pub total_momentum: f64,
    pub j: f64,
    pub gamma: f64,
}

impl KLambdaString {
    pub fn exists(&self) -> bool {
        self.kappa.im == 0.0 && self.kappa.re > 0.0
    }

    /// `|sin k₁ − sin k_{2m} − 2miu|`.
    pub fn end_defect(&self) -> f64 {
        (self.k[0].sin() - self.k[2 * self.m - 1].sin() - 2.0 * self.m as f64 * I * self.u).norm()
    }

    /// `|Im Σ k_a|`.
    pub fn momentum_defect(&self) -> f64 {
        self.k.iter().sum::<C64>().im.abs()
    }

    /// Largest deviation of the rapidities from `iμ + (m−2j+1)iu`.
    pub fn rapidity_defect(&self) -> f64 {
        let m = self.m as f64;
        self.lambda_rapidities
            .iter()
            .enumerate()
            .map(|(j, l)| (l - I * self.mu - (m - 2.0 * (j + 1) as f64 + 1.0) * I * self.u).norm())
            .fold(0.0, f64::max)
    }
}

fn check_inputs(m: usize, p: f64, j: f64, gamma: f64) -> Result<()> {
    if m == 0 {
        return invalid("string order m must be at least 1");
    }
    if !(p > -PI && p < 0.0) {
        return invalid(format!("p = {p} outside the solution-bearing half (−π, 0)"));
    }
    if !(j > 0.0 && gamma > 0.0 && j.is_finite() && gamma.is_finite()) {
        return invalid("string construction needs J > 0 and γ > 0");
    }
    Ok(())
}

/// String with a given (possibly complex) κ; the rest of the pattern follows.
fn build(m: usize, p: f64, j: f64, gamma: f64, kappa: C64) -> KLambdaString {
    let u = interaction(j, gamma);
    let q = p + PI;
    let mu = -p.cos() * kappa.sinh();
    let mut k = Vec::with_capacity(2 * m);
    k.push(p - I * kappa);
    for jj in 1..m {
        let w = I * mu + (m as f64 - 2.0 * jj as f64) * I * u;
        let a = w.asin();
        k.push(PI - a);
        k.push(a);
    }
    k.push(q + I * kappa);
    let lambda_rapidities = (1..=m).map(|jj| I * mu + (m as f64 - 2.0 * jj as f64 + 1.0) * I * u).collect();
    KLambdaString { m, p, q, kappa, mu, u, k, lambda_rapidities, total_momentum: 2.0 * p, j, gamma }
}

/// Length-2m string at real part p of k₁, or `None` when deconfined.
///
/// `q = p + π`, `cosh κ = −mγ/(4J sin p)`, `μ = −cos p sinh κ`; the boundary
/// `cosh κ = 1` (κ = 0) counts as no solution.
pub fn solve_string(m: usize, p: f64, j: f64, gamma: f64) -> Result<Option<KLambdaString>> {
    check_inputs(m, p, j, gamma)?;
    let c = -(m as f64) * gamma / (4.0 * j * p.sin());
    if !(c > 1.0) {
        return Ok(None);
    }
    Ok(Some(build(m, p, j, gamma, C64::new(c.acosh(), 0.0))))
}

/// The string pattern continued to complex κ = arccosh(·); used as a
/// deconfined negative control where [`solve_string`] has no solution.
pub fn string_candidate(m: usize, p: f64, j: f64, gamma: f64) -> Result<KLambdaString> {
    check_inputs(m, p, j, gamma)?;
    let c = C64::new(-(m as f64) * gamma / (4.0 * j * p.sin()), 0.0);
    Ok(build(m, p, j, gamma, c.acosh()))
}

/// `−mγ + √(m²γ² − 16J² sin²(K/2))`.
pub fn string_eigenvalue_closed(m: usize, k_total: f64, j: f64, gamma: f64) -> C64 {
    let mg = m as f64 * gamma;
    let s = (k_total / 2.0).sin();
    C64::new(mg * mg - 16.0 * j * j * s * s, 0.0).sqrt() - mg
}

/// `−γ(N↑+N↓)/2 + 2iJ Σ cos k_a` evaluated on the string.
pub fn string_eigenvalue_sum(s: &KLambdaString) -> C64 {
    -(s.m as f64) * s.gamma + 2.0 * I * s.j * s.k.iter().map(|k| k.cos()).sum::<C64>()
}

/// Eigenvalue of a valid string; the summed and closed forms must agree.
pub fn string_eigenvalue(s: &KLambdaString) -> Result<C64> {
    let a = string_eigenvalue_sum(s);
    let b = string_eigenvalue_closed(s.m, s.total_momentum, s.j, s.gamma);
    let scale = 1.0 + a.norm();
    if (a - b).norm() > EIGENVALUE_TOL * scale {
        return Err(Error::Numerical(format!("string eigenvalue routes disagree: {a} vs {b}")));
    }
    Ok(b)
}

/// Largest normalized deviation of the Bethe equations at finite L.
///
/// Each equation is written without fractions, `A·D = N`, where the string
/// makes a factor of D or N vanish exactly; the deviation is the smaller of
/// `|A·D − N|` and `|D − N/A|` over `1 + |D| + |N|`, which stays finite when
/// `A = e^{ikL}` over- or underflows.
pub fn bethe_residual(s: &KLambdaString, l: usize) -> f64 {
    let m = s.m;
    let u = s.u;
    let phi = flux(m);
    let mut worst: f64 = 0.0;
    for ka in &s.k {
        let sk = ka.sin();
        let (mut num, mut den) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        for lam in &s.lambda_rapidities {
            num *= lam - sk - I * u;
            den *= lam - sk + I * u;
        }
        // log-domain phase factor: ln A = i k L − iφ
        let ln_a = I * ka * l as f64 - I * phi;
        let scale = 1.0 + den.norm() + num.norm();
        let forward = if ln_a.re > 700.0 { f64::INFINITY } else { (ln_a.exp() * den - num).norm() };
        let backward = if -ln_a.re > 700.0 { f64::INFINITY } else { (den - num * (-ln_a).exp()).norm() };
        let r = forward.min(backward) / scale;
        worst = worst.max(if r.is_finite() { r } else { 1.0 });
    }
    for la in &s.lambda_rapidities {
        let (mut x_num, mut x_den) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        for ka in &s.k {
            let sk = ka.sin();
            x_num *= la - sk - I * u;
            x_den *= la - sk + I * u;
        }
        let (mut y_num, mut y_den) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        for lb in &s.lambda_rapidities {
            y_num *= la - lb - 2.0 * I * u;
            y_den *= la - lb + 2.0 * I * u;
        }
        let lhs = x_num * y_den;
        let rhs = -(y_num * x_den);
        worst = worst.max((lhs - rhs).norm() / (1.0 + lhs.norm() + rhs.norm()));
    }
    worst
}

/// Grid `p = −π + iπ/steps`, i = 1..steps−1, which contains p = −π/2 for even steps.
pub fn p_grid(steps: usize) -> Vec<f64> {
    (1..steps).map(|i| -PI + PI * i as f64 / steps as f64).collect()
}

/// Grid momenta without a string solution.
pub fn no_solution_set(m: usize, j: f64, gamma: f64, steps: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for p in p_grid(steps) {
        if solve_string(m, p, j, gamma)?.is_none() {
            out.push(p);
        }
    }
    Ok(out)
}

/// Smallest J in `[lo, hi]` at which some grid momentum loses its string,
/// by bisection to `tol`.
pub fn locate_j_crit(m: usize, gamma: f64, steps: usize, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let broken = |j: f64| no_solution_set(m, j, gamma, steps).map(|s| !s.is_empty());
    if broken(lo)? || !broken(hi)? {
        return invalid(format!("deconfinement not bracketed by J ∈ [{lo}, {hi}]"));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let c = 0.5 * (a + b);
        if broken(c)? {
            b = c;
        } else {
            a = c;
        }
    }
    Ok(b)
}

/// Hermitian control with real u: `q = p`, `sinh κ = −m·u/cos p`, solvable for every p.
pub fn hermitian_string(m: usize, p: f64, u: f64) -> Result<(f64, f64)> {
    if m == 0 || p.cos().abs() < 1e-15 {
        return invalid("Hermitian string needs m ≥ 1 and cos p ≠ 0");
    }
    Ok((p, (-(m as f64) * u / p.cos()).asinh()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::single_particle::{lambda_inc, solve_bound_state};

    #[test]
    fn first_order_string_at_zone_centre() {
        let s = solve_string(1, -PI / 2.0, 0.2, 1.0).unwrap().unwrap();
        assert!((s.kappa.re - 1.25f64.acosh()).abs() < 1e-15);
        assert!((s.kappa.re - 2f64.ln()).abs() < 1e-12);
        assert!(s.mu.norm() < 1e-15);
        assert!((string_eigenvalue(&s).unwrap() - C64::new(-0.4, 0.0)).norm() < 1e-12);
        assert!(s.end_defect() < 1e-12 && s.momentum_defect() < 1e-12 && s.rapidity_defect() < 1e-15);
        let b = solve_bound_state(PI, 0.2, 1.0).unwrap();
        assert!((s.kappa.re - b.alpha.re).abs() < 1e-12);
        assert!((string_eigenvalue(&s).unwrap() - lambda_inc(PI, 0.2, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn deconfined_and_higher_order() {
        assert!(solve_string(1, -PI / 2.0, 0.3, 1.0).unwrap().is_none());
        let s = solve_string(2, -PI / 2.0, 0.3, 1.0).unwrap().unwrap();
        assert!((s.kappa.re.cosh() - 5.0 / 3.0).abs() < 1e-14);
        let s = solve_string(2, -PI / 2.0, 0.2, 1.0).unwrap().unwrap();
        let want = -2.0 + 3.36f64.sqrt();
        assert!((string_eigenvalue(&s).unwrap().re - want).abs() < 1e-12);
        assert!(s.end_defect() < 1e-12);
        assert!(solve_string(1, 0.5, 0.2, 1.0).is_err());
    }

    #[test]
    fn zero_momentum_limit() {
        assert!(string_eigenvalue_closed(3, 0.0, 0.4, 1.0).norm() < 1e-15);
        let s = solve_string(2, -1e-4, 0.3, 1.0).unwrap().unwrap();
        assert!(string_eigenvalue(&s).unwrap().norm() < 1e-6);
    }

    #[test]
    fn critical_hopping() {
        assert_eq!(j_crit_m(1, 1.0), 0.25);
        assert_eq!(j_crit_m(2, 1.0), 0.5);
        assert_eq!(j_crit_m(3, 2.0), 1.5);
        for m in 1..=3 {
            let jc = locate_j_crit(m, 1.0, 200, 0.01, 2.0, 1e-12).unwrap();
            assert!((jc - j_crit_m(m, 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn no_solution_set_is_centred() {
        let gap = no_solution_set(1, 0.3, 1.0, 200).unwrap();
        assert!(!gap.is_empty());
        assert!(gap.windows(2).all(|w| (w[1] - w[0] - PI / 200.0).abs() < 1e-12));
        assert!((gap[0] + gap[gap.len() - 1] + PI).abs() < 1e-12);
        assert!(no_solution_set(1, 0.24, 1.0, 200).unwrap().is_empty());
    }

    #[test]
    fn residual_decays_for_confined_strings() {
        let s = solve_string(1, -PI / 2.0, 0.2, 1.0).unwrap().unwrap();
        let (a, b) = (bethe_residual(&s, 16), bethe_residual(&s, 32));
        assert!(b < a && b < 1e-9, "{a} {b}");
        let c = string_candidate(1, -PI / 2.0, 0.3, 1.0).unwrap();
        assert!(!c.exists());
        assert!(bethe_residual(&c, 32) > 0.1 * bethe_residual(&c, 16));
        assert!(bethe_residual(&c, 64) > 1e-3);
    }

    #[test]
    fn hermitian_strings_always_exist() {
        for i in 1..50 {
            let p = -PI + PI * i as f64 / 50.0;
            if (p + PI / 2.0).abs() < 1e-9 {
                continue;
            }
            let (q, kappa) = hermitian_string(2, p, 0.8).unwrap();
            let u = C64::new(0.8, 0.0);
            let d = (p - I * kappa).sin() - (q + I * kappa).sin() - 4.0 * I * u;
            assert!(d.norm() < 1e-12);
        }
    }
}
