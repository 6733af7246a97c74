//! Two-band density-of-states model for the coherence decay rate.
//!
//! `χ(t) = ∫ D(μ) e^{−μt} dμ` with `D(μ) = a₀ μ^{η−1}` on `[0, δ₀]` and `a₁`
//! on `[γ, γ+δ₁]`; the rate is `Γ = ∫ μ D e^{−μt} / ∫ D e^{−μt}`.

use crate::{invalid, Error, Result};

/// `|d ln Γ / d ln t|` below this at a local minimum marks a plateau.
pub const PLATEAU_SLOPE: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyDosParams {
    pub a0: f64,
    pub a1: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub gamma: f64,
    pub eta: f64,
}

impl ToyDosParams {
    /// Equal band widths δ.
    pub fn symmetric(a0: f64, a1: f64, delta: f64, gamma: f64, eta: f64) -> Self {
        Self { a0, a1, delta0: delta, delta1: delta, gamma, eta }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a0, self.a1, self.delta0, self.delta1, self.gamma, self.eta];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return invalid("toy DOS parameters must be finite and non-negative");
        }
        if !(self.eta > 0.0) {
            return invalid("η must be positive");
        }
        Ok(())
    }
}

/// `∫₀^x u^{s−1} e^{−u} du` by its power series; accurate for moderate x.
fn lower_gamma_series(s: f64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0 / s;
    for k in 1..200 {
        term *= -x / k as f64;
        let add = term / (s + k as f64);
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    x.powf(s) * sum
}

#[allow(clippy::too_many_arguments)]
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, min_width: f64, depth: u32) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // intervals narrower than min_width only occur at integrable endpoint kinks
    if delta.abs() <= 15.0 * tol || b - a < min_width {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Numerical(format!("adaptive quadrature did not converge on [{a}, {b}]")));
    }
    Ok(simpson(f, a, m, fa, flm, fm, left, tol / 2.0, min_width, depth - 1)?
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, min_width, depth - 1)?)
}

/// Adaptive Simpson on [a, b] to relative tolerance `rel`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> Result<f64> {
    // coarse pass fixes the absolute scale of the tolerance
    let n = 64;
    let h = (b - a) / n as f64;
    let scale: f64 = (0..=n).map(|i| f(a + i as f64 * h).abs()).sum::<f64>() * h;
    let tol = (rel * scale).max(f64::MIN_POSITIVE);
    let mut total = 0.0;
    for i in 0..n {
        let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
        let (f0, f1, fm) = (f(x0), f(x1), f(0.5 * (x0 + x1)));
        let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        total += simpson(f, x0, x1, f0, fm, f1, whole, tol / n as f64, 1e-13 * (b - a), 60)?;
    }
    Ok(total)
}

/// `∫₀^δ μ^{η−1+k} e^{−μt} dμ` for k ∈ {0, 1}.
fn lower_band(eta: f64, delta: f64, t: f64, k: u32) -> Result<f64> {
    let s = eta + k as f64;
    if delta == 0.0 {
        return Ok(0.0);
    }
    if t == 0.0 {
        return Ok(delta.powf(s) / s);
    }
    let x = delta * t;
    if x <= 1.0 {
        return Ok(lower_gamma_series(s, x) / t.powf(s));
    }
    let e = (-x).exp();
    match s {
        s if s == 1.0 => Ok((1.0 - e) / t),
        s if s == 2.0 => Ok((1.0 - e * (1.0 + x)) / (t * t)),
        s if s == 3.0 => Ok((2.0 - e * (2.0 + 2.0 * x + x * x)) / (t * t * t)),
        _ => {
            // in v = μt the integrand v^{s−1} e^{−v} is negligible beyond s + 60
            let upper = x.min(s + 60.0);
            let lower_gamma = if s >= 1.0 {
                integrate(&|v: f64| v.powf(s - 1.0) * (-v).exp(), 0.0, upper, 1e-12)?
            } else {
                // w = v^s removes the endpoint singularity of v^{s−1}
                let f = |w: f64| (-w.powf(1.0 / s)).exp() / s;
                integrate(&f, 0.0, upper.powf(s), 1e-12)?
            };
            Ok(lower_gamma / t.powf(s))
        }
    }
}

/// `∫_γ^{γ+δ} μ^k e^{−μt} dμ` for k ∈ {0, 1}.
fn upper_band(gamma: f64, delta: f64, t: f64, k: u32) -> f64 {
    if t == 0.0 {
        return if k == 0 { delta } else { ((gamma + delta).powi(2) - gamma * gamma) / 2.0 };
    }
    let x = delta * t;
    let eg = (-gamma * t).exp();
    // −expm1 keeps precision when δt is small
    let d0 = -(-x).exp_m1();
    match k {
        0 => eg * d0 / t,
        _ => {
            let f = |m: f64| (m * t + 1.0) / (t * t);
            eg * (f(gamma) - (-x).exp() * f(gamma + delta))
        }
    }
}

fn moments(p: &ToyDosParams, t: f64) -> Result<(f64, f64)> {
    p.validate()?;
    if !(t >= 0.0) {
        return invalid("t must be non-negative");
    }
    let m0 = p.a0 * lower_band(p.eta, p.delta0, t, 0)? + p.a1 * upper_band(p.gamma, p.delta1, t, 0);
    let m1 = p.a0 * lower_band(p.eta, p.delta0, t, 1)? + p.a1 * upper_band(p.gamma, p.delta1, t, 1);
    Ok((m0, m1))
}

pub fn toy_dos_chi(p: &ToyDosParams, t: f64) -> Result<f64> {
    Ok(moments(p, t)?.0)
}

/// `Γ₁(t) = −d ln χ/dt`, differentiated under the integral.
pub fn toy_dos_gamma(p: &ToyDosParams, t: f64) -> Result<f64> {
    let (m0, m1) = moments(p, t)?;
    if !(m0 > 0.0) {
        return Err(Error::Numerical(format!("χ({t}) = {m0} vanishes")));
    }
    Ok(m1 / m0)
}

/// Logarithmically spaced times.
pub fn log_grid(t_min: f64, t_max: f64, points: usize) -> Vec<f64> {
    let (a, b) = (t_min.ln(), t_max.ln());
    (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    pub t: f64,
    pub gamma: f64,
    /// `|d ln Γ / d ln t|` at the plateau centre.
    pub slope: f64,
}

/// Local minima of `|d ln Γ/d ln t|` below [`PLATEAU_SLOPE`] along `(t, Γ)`.
pub fn find_plateaus(t: &[f64], gamma: &[f64]) -> Vec<Plateau> {
    let n = t.len();
    if n < 3 {
        return vec![];
    }
    let slope: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            ((gamma[b].ln() - gamma[a].ln()) / (t[b].ln() - t[a].ln())).abs()
        })
        .collect();
    // endpoints count when the slope rises away from them
    (0..n)
        .filter(|&i| {
            slope[i] < PLATEAU_SLOPE
                && (i == 0 || slope[i] <= slope[i - 1])
                && (i == n - 1 || slope[i] <= slope[i + 1])
        })
        .map(|i| Plateau { t: t[i], gamma: gamma[i], slope: slope[i] })
        .collect()
}

/// Plateaus of Γ₁ over `[t_min, t_max]` sampled on a log grid.
pub fn toy_dos_plateaus(p: &ToyDosParams, t_min: f64, t_max: f64, points: usize) -> Result<Vec<Plateau>> {
    let t = log_grid(t_min, t_max, points);
    let g = t.iter().map(|&x| toy_dos_gamma(p, x)).collect::<Result<Vec<_>>>()?;
    Ok(find_plateaus(&t, &g))
}
