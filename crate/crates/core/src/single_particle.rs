//! Closed-form one-particle solution in the centre-of-mass momentum basis.
//!
//! With `|k, l) = L^{-1/2} Σ_m e^{ikm} |m+l⟩⊗|m⟩` the ladder generator splits
//! into L×L blocks in the relative coordinate `l`: a tight-binding chain with
//! imaginary hopping and a zero-loss impurity at `l = 0`. Its bound state is
//! the incoherenton.

use std::f64::consts::PI;

use faer::Mat;

use crate::{invalid, Error, Result, C64, I};

#[derive(Debug, Clone)]
pub struct MomentumBlock {
    pub k: f64,
    pub matrix: Mat<C64>,
}

/// Wrap an angle into (−π, π].
pub fn wrap_angle(k: f64) -> f64 {
    let mut w = k.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Relative-coordinate block for centre-of-mass momentum `k = 2πs/L`.
pub fn build_momentum_block(k: f64, j: f64, gamma: f64, l: usize) -> Result<MomentumBlock> {
    if l < 2 {
        return invalid("L must be at least 2");
    }
    let s = k * l as f64 / (2.0 * PI);
    if (s - s.round()).abs() > 1e-9 {
        return invalid(format!("k = {k} is not on the grid 2πs/{l}"));
    }
    let mut m = Mat::<C64>::zeros(l, l);
    for r in 1..l {
        m[(r, r)] = C64::new(-gamma, 0.0);
    }
    for r in 0..l {
        // neighbours at relative displacement ±1; the ring wraps the indices
        for step in [1i64, -1] {
            let c = (r as i64 - step).rem_euclid(l as i64) as usize;
            m[(r, c)] += I * j * (C64::new(1.0, 0.0) - C64::from_polar(1.0, k * step as f64));
        }
    }
    Ok(MomentumBlock { k, matrix: m })
}

/// Bound-state eigenvalue `−γ + √(γ² − 16J² sin²(k/2))`, principal root.
pub fn lambda_inc(k: f64, j: f64, gamma: f64) -> C64 {
    let s = (k / 2.0).sin();
    C64::new(gamma * gamma - 16.0 * j * j * s * s, 0.0).sqrt() - gamma
}

/// `γ / (4|sin(k/2)|)`; `None` at k ≡ 0 where no transition occurs.
pub fn j_crit(k: f64, gamma: f64) -> Option<f64> {
    let s = (k / 2.0).sin().abs();
    (s > 1e-15).then(|| gamma / (4.0 * s))
}

/// `√(γ² − 16J²)`, clamped at zero beyond the critical hopping.
pub fn qc_gap_analytic(j: f64, gamma: f64) -> f64 {
    (gamma * gamma - 16.0 * j * j).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct BoundStateSolution {
    pub k: f64,
    pub alpha: C64,
    pub beta: C64,
    pub lambda: C64,
    /// `1/Re α`; zero for a fully localized mode, infinite when unbound.
    pub xi_con: f64,
    pub exists: bool,
    /// Max deviation of the two eigenvalue relations at the solution.
    pub residual: f64,
}

/// Bound state of the relative-coordinate chain in the infinite-L limit.
///
/// Eliminating λ between the bulk relation and the impurity condition leaves
/// a quadratic in `x = e^{−α}`:
/// `iJ(1−e^{−ik}) x² + γ x − iJ(1−e^{ik}) = 0`.
/// Its roots have `|x₊ x₋| = 1`, so at most one lies inside the unit circle;
/// that root is the bound state and gives `λ = 2iJ(1−e^{−ik}) x`.
pub fn solve_bound_state(k: f64, j: f64, gamma: f64) -> Result<BoundStateSolution> {
    if !(k.is_finite() && j.is_finite() && gamma.is_finite()) {
        return Err(Error::InvalidArguments("non-finite bound-state parameters".into()));
    }
    let k = wrap_angle(k);
    let one = C64::new(1.0, 0.0);
    let a = one - C64::from_polar(1.0, k);
    let b = one - C64::from_polar(1.0, -k);
    let ijb = I * j * b;
    if ijb.norm() < 1e-300 {
        // k = 0 or J = 0: the mode sits entirely on the impurity site
        let alpha = C64::new(f64::INFINITY, 0.0);
        return Ok(BoundStateSolution {
            k,
            alpha,
            beta: alpha,
            lambda: C64::new(0.0, 0.0),
            xi_con: 0.0,
            exists: true,
            residual: 0.0,
        });
    }
    let disc = (C64::new(gamma * gamma, 0.0) - 4.0 * j * j * a * b).sqrt();
    let roots = [(-gamma + disc) / (2.0 * ijb), (-gamma - disc) / (2.0 * ijb)];
    // prefer the branch continuous with λ_inc (principal root) unless the other is bound
    let x = if roots[0].norm() <= roots[1].norm() * (1.0 + 1e-12) { roots[0] } else { roots[1] };
    let alpha = -x.ln();
    let beta = alpha + I * (k - PI);
    let lambda = 2.0 * ijb * x;
    let exists = alpha.re > 1e-9;
    let xi_con = if exists { 1.0 / alpha.re } else { f64::INFINITY };
    let bulk = I * j * (alpha.exp() + (-alpha).exp() - (I * k + alpha).exp() - (-I * k - alpha).exp()) - gamma;
    let impurity = I * j * a * (-beta).exp() + I * j * b * (-alpha).exp();
    let residual = (lambda - bulk).norm().max((lambda - impurity).norm());
    Ok(BoundStateSolution { k, alpha, beta, lambda, xi_con, exists, residual })
}

/// Centre-of-mass momenta `2πs/L` for `s = −L/2+1 .. L/2`.
pub fn momentum_grid(l: usize) -> Vec<f64> {
    let lo = -(l as i64) / 2 + 1;
    let hi = l as i64 / 2;
    let lo = if l % 2 == 1 { -(l as i64 - 1) / 2 } else { lo };
    (lo..=hi).map(|s| 2.0 * PI * s as f64 / l as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_momentum_block_is_diagonal() {
        let b = build_momentum_block(0.0, 0.37, 1.0, 10).unwrap();
        let ev = b.matrix.eigenvalues().unwrap();
        assert_eq!(ev.iter().filter(|z| z.norm() < 1e-12).count(), 1);
        assert_eq!(ev.iter().filter(|z| (*z + 1.0).norm() < 1e-12).count(), 9);
    }

    #[test]
    fn zone_boundary_hopping_is_2ij() {
        let b = build_momentum_block(PI, 0.2, 1.0, 8).unwrap();
        assert!((b.matrix[(1, 0)] - C64::new(0.0, 0.4)).norm() < 1e-15);
        assert!((b.matrix[(0, 1)] - C64::new(0.0, 0.4)).norm() < 1e-15);
        assert!(build_momentum_block(1.0, 0.2, 1.0, 8).is_err());
    }

    #[test]
    fn bound_state_eigenvalues() {
        assert!((lambda_inc(PI, 0.2, 1.0) - C64::new(-0.4, 0.0)).norm() < 1e-14);
        assert_eq!(lambda_inc(0.0, 0.3, 1.0), C64::new(0.0, 0.0));
        assert!((lambda_inc(PI / 2.0, 0.3, 1.0).re - (-1.0 + 0.28f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn critical_hopping() {
        assert!((j_crit(PI, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((j_crit(PI / 2.0, 1.0).unwrap() - 0.3535533905932738).abs() < 1e-12);
        assert!((j_crit(PI, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(j_crit(0.0, 1.0).is_none());
    }

    #[test]
    fn analytic_gap() {
        assert!((qc_gap_analytic(0.15, 1.0) - 0.8).abs() < 1e-14);
        assert_eq!(qc_gap_analytic(0.25, 1.0), 0.0);
        assert_eq!(qc_gap_analytic(0.0, 1.0), 1.0);
    }

    #[test]
    fn zone_boundary_bound_state() {
        let s = solve_bound_state(PI, 0.2, 1.0).unwrap();
        assert!(s.exists);
        assert!((s.alpha.re - 1.25f64.acosh()).abs() < 1e-12);
        // sinh α = −iγ/(4J)
        assert!((s.alpha.sinh() - C64::new(0.0, -1.25)).norm() < 1e-12);
        assert!((s.lambda - C64::new(-0.4, 0.0)).norm() < 1e-12);
        assert!(s.residual < 1e-12);
        let s = solve_bound_state(PI, 0.3, 1.0).unwrap();
        assert!(!s.exists);
        assert!(s.alpha.re.abs() < 1e-9);
    }

    #[test]
    fn bound_state_phase_follows_momentum() {
        for &k in &[0.3, 1.0, 2.0, 3.0, -1.5] {
            let s = solve_bound_state(k, 0.15, 1.0).unwrap();
            assert!(s.exists);
            // e^{−α} ∝ e^{ik/2}/sin(k/2): the phase flips by π for k < 0
            let want = if k < 0.0 { -k / 2.0 - PI } else { -k / 2.0 };
            assert!((s.alpha.im - want).abs() < 1e-10, "k={k} α={}", s.alpha);
            assert!((s.lambda - lambda_inc(k, 0.15, 1.0)).norm() < 1e-10);
            assert!((s.beta - s.alpha - I * (k - PI)).norm() < 1e-14);
        }
    }

    #[test]
    fn grid_is_centred() {
        let g = momentum_grid(4);
        assert_eq!(g.len(), 4);
        assert!((g[0] + PI / 2.0).abs() < 1e-15 && (g[3] - PI).abs() < 1e-15);
        assert_eq!(momentum_grid(5).len(), 5);
    }
}
