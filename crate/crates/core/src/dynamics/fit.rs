//! Least-squares fits of relaxation curves: exponential decay, damped
//! oscillation and the critical power law.

use std::f64::consts::PI;
use std::fmt;

use crate::spectral::qc::linear_fit;
use crate::{Error, Result};

/// Decay-fit window in units of 1/γ; starts late enough to skip the transient
/// from the continuum modes.
pub const DECAY_WINDOW: (f64, f64) = (5.0, 15.0);
/// Samples below this fraction of y(0) are excluded from decay fits.
pub const DECAY_FLOOR: f64 = 1e-6;
/// Sign changes are ignored once |y| drops below this fraction of |y(0)|.
pub const SIGN_FLOOR: f64 = 1e-9;
/// Horizon (units of 1/γ) over which sign changes are looked for.
pub const CLASSIFY_HORIZON: f64 = 40.0;
/// Periods covered by the oscillation fit after t = 1/γ.
pub const OSCILLATION_PERIODS: f64 = 1.0;
/// Power-law window for the critical point, units of 1/γ.
pub const POWER_LAW_WINDOW: (f64, f64) = (1.0, 5.0);

const ZERO_PAD: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    Decay,
    Oscillation,
}

impl fmt::Display for FitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitKind::Decay => "decay",
            FitKind::Oscillation => "oscillation",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub gamma: f64,
    pub r2: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Copy)]
pub struct OscillationFit {
    pub omega: f64,
    pub phase: f64,
    pub amplitude: f64,
    pub r2: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Copy)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r2: f64,
    pub window: (f64, f64),
}

fn windowed(t: &[f64], y: &[f64], window: (f64, f64)) -> Vec<(f64, f64)> {
    t.iter()
        .zip(y)
        .filter(|(&ti, _)| ti >= window.0 - 1e-12 && ti <= window.1 + 1e-12)
        .map(|(&a, &b)| (a, b))
        .collect()
}

fn r_squared(pts: &[(f64, f64)], model: impl Fn(f64) -> f64) -> f64 {
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - model(p.0)).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 { 1.0 } else { 0.0 }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// `y ≈ a e^{−Γt}` by linear least squares on `ln y`.
pub fn fit_decay(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let pts = windowed(t, y, window);
    if pts.len() < 3 {
        return Err(Error::Fit(format!("{} samples in decay window {window:?}", pts.len())));
    }
    if let Some(p) = pts.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::Fit(format!("non-positive sample y({}) = {} in decay window", p.0, p.1)));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, p.1.ln())).collect();
    let (slope, icpt) = linear_fit(&logs);
    let r2 = r_squared(&logs, |x| slope * x + icpt);
    Ok(DecayFit { gamma: -slope, r2, window })
}

/// `y ≈ a t^b` by linear least squares on `(ln t, ln y)`.
pub fn fit_power_law(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<PowerLawFit> {
    let pts = windowed(t, y, window);
    if pts.len() < 3 {
        return Err(Error::Fit(format!("{} samples in power-law window {window:?}", pts.len())));
    }
    if pts.iter().any(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::Fit("power-law fit needs positive t and y".into()));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|p| (p.0.ln(), p.1.ln())).collect();
    let (slope, icpt) = linear_fit(&logs);
    let r2 = r_squared(&logs, |x| slope * x + icpt);
    Ok(PowerLawFit { exponent: slope, prefactor: icpt.exp(), r2, window })
}

/// Angular frequency of the largest zero-padded DFT peak of the samples.
///
/// Fails when the peak is the zero-frequency bin.
pub fn dominant_frequency(t: &[f64], y: &[f64]) -> Result<f64> {
    if t.len() < 4 {
        return Err(Error::Fit("too few samples for a spectrum".into()));
    }
    let span = t[t.len() - 1] - t[0];
    let step = span / (t.len() - 1) as f64;
    let bins = ZERO_PAD * t.len();
    let dw = 2.0 * PI / (bins as f64 * step);
    let power = |m: usize| {
        let w = m as f64 * dw;
        let (mut re, mut im) = (0.0, 0.0);
        for (&ti, &yi) in t.iter().zip(y) {
            let (s, c) = (w * (ti - t[0])).sin_cos();
            re += yi * c;
            im -= yi * s;
        }
        re * re + im * im
    };
    let (best, _) = (0..bins / 2).map(|m| (m, power(m))).fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    if best == 0 {
        return Err(Error::Fit("no oscillation: spectral peak at zero frequency".into()));
    }
    Ok(best as f64 * dw)
}

/// Best `(c1, c2, rss)` of `c1 sin ωt + c2 cos ωt`.
fn project(pts: &[(f64, f64)], w: f64) -> (f64, f64, f64) {
    let (mut ss, mut sc, mut cc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, y) in pts {
        let (s, c) = (w * t).sin_cos();
        ss += s * s;
        sc += s * c;
        cc += c * c;
        ys += y * s;
        yc += y * c;
    }
    let det = ss * cc - sc * sc;
    if det.abs() < 1e-300 {
        return (0.0, 0.0, f64::INFINITY);
    }
    let c1 = (ys * cc - yc * sc) / det;
    let c2 = (yc * ss - ys * sc) / det;
    let rss = pts.iter().map(|&(t, y)| (y - c1 * (w * t).sin() - c2 * (w * t).cos()).powi(2)).sum();
    (c1, c2, rss)
}

/// Spectral peak of the samples, or for periods longer than the record the
/// best sinusoid below one cycle per record.
fn seed_frequency(t: &[f64], y: &[f64]) -> Result<f64> {
    match dominant_frequency(t, y) {
        Ok(w) => Ok(w),
        Err(e) => {
            let pts: Vec<(f64, f64)> = t.iter().copied().zip(y.iter().copied()).collect();
            let cycle = 2.0 * PI / (t[t.len() - 1] - t[0]);
            let grid = 64;
            let best = (1..=grid)
                .map(|i| cycle * i as f64 / grid as f64)
                .map(|w| (w, project(&pts, w).2))
                .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            if best.1.is_finite() { Ok(best.0) } else { Err(e) }
        }
    }
}

/// `y ≈ a sin(ωt + b)` over `window`, seeded by the spectral content of the
/// window itself.
pub fn fit_oscillation(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<OscillationFit> {
    let (tt, yy): (Vec<f64>, Vec<f64>) = windowed(t, y, window).into_iter().unzip();
    if tt.len() < 8 {
        return Err(Error::Fit(format!("{} samples in oscillation window {window:?}", tt.len())));
    }
    // without a spectral peak only a sign change shows there is anything to fit
    let w0 = match dominant_frequency(&tt, &yy) {
        Ok(w) => w,
        Err(e) if yy.windows(2).all(|w| w[0].signum() == w[1].signum()) => return Err(e),
        Err(_) => seed_frequency(&tt, &yy)?,
    };
    fit_seeded(t, y, window, w0)
}

/// Oscillation fit around a known starting frequency.
fn fit_seeded(t: &[f64], y: &[f64], window: (f64, f64), w0: f64) -> Result<OscillationFit> {
    let pts = windowed(t, y, window);
    if pts.len() < 8 {
        return Err(Error::Fit(format!("{} samples in oscillation window {window:?}", pts.len())));
    }
    // variable projection on ω within one spectral bin either side
    let bin = 2.0 * PI / (pts[pts.len() - 1].0 - pts[0].0);
    let (mut lo, mut hi) = ((w0 - bin).max(0.25 * w0), w0 + bin);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (project(&pts, a).2, project(&pts, b).2);
    for _ in 0..200 {
        if hi - lo < 1e-13 * w0 {
            break;
        }
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = project(&pts, a).2;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = project(&pts, b).2;
        }
    }
    let mut w = 0.5 * (lo + hi);
    let (mut c1, mut c2, mut rss) = project(&pts, w);
    // Gauss-Newton polish on (c1, c2, ω)
    for _ in 0..20 {
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for &(ti, yi) in &pts {
            let (s, c) = (w * ti).sin_cos();
            let r = yi - c1 * s - c2 * c;
            let jac = [s, c, ti * (c1 * c - c2 * s)];
            for p in 0..3 {
                jtr[p] += jac[p] * r;
                for q in 0..3 {
                    jtj[p][q] += jac[p] * jac[q];
                }
            }
        }
        let Some(step) = solve3(jtj, jtr) else { break };
        let (n1, n2, nw) = (c1 + step[0], c2 + step[1], w + step[2]);
        let new_rss: f64 = pts.iter().map(|&(ti, yi)| (yi - n1 * (nw * ti).sin() - n2 * (nw * ti).cos()).powi(2)).sum();
        if !(new_rss <= rss) {
            break;
        }
        let done = step[2].abs() < 1e-15 * w.abs().max(1.0);
        (c1, c2, w, rss) = (n1, n2, nw, new_rss);
        if done {
            break;
        }
    }
    let r2 = r_squared(&pts, |x| c1 * (w * x).sin() + c2 * (w * x).cos());
    Ok(OscillationFit { omega: w, phase: c2.atan2(c1), amplitude: c1.hypot(c2), r2, window })
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    if !(d.abs() > 1e-300) {
        return None;
    }
    let mut x = [0.0; 3];
    for (col, xi) in x.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        *xi = det(&m) / d;
    }
    Some(x)
}

/// Oscillation if y changes sign while still above the noise floor within
/// the horizon, decay otherwise.
pub fn classify_relaxation(t: &[f64], y: &[f64], gamma: f64) -> FitKind {
    let floor = SIGN_FLOOR * y.first().map_or(0.0, |v| v.abs());
    let horizon = CLASSIFY_HORIZON / gamma;
    let live: Vec<f64> = t.iter().zip(y).filter(|(&ti, &yi)| ti <= horizon && yi.abs() > floor).map(|(_, &yi)| yi).collect();
    if live.windows(2).any(|w| w[0].signum() != w[1].signum()) {
        FitKind::Oscillation
    } else {
        FitKind::Decay
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RelaxationFit {
    pub kind: FitKind,
    /// Γ for a decay, ω for an oscillation.
    pub value: f64,
    pub r2: f64,
    pub window: (f64, f64),
}

/// Classify `y(t)` and fit it with the default windows.
///
/// Decays are fitted over [`DECAY_WINDOW`]/γ restricted to `y > 1e−6·y(0)`;
/// oscillations fit `e^{γt} y` over [`OSCILLATION_PERIODS`] periods after 1/γ.
pub fn fit_relaxation(t: &[f64], y: &[f64], gamma: f64) -> Result<RelaxationFit> {
    if t.len() != y.len() || t.is_empty() {
        return Err(Error::Fit("time and value series differ in length".into()));
    }
    match classify_relaxation(t, y, gamma) {
        FitKind::Decay => {
            let floor = DECAY_FLOOR * y[0];
            let end = t
                .iter()
                .zip(y)
                .take_while(|(_, &v)| v > floor)
                .last()
                .map_or(0.0, |(&ti, _)| ti)
                .min(DECAY_WINDOW.1 / gamma);
            let f = fit_decay(t, y, (DECAY_WINDOW.0 / gamma, end))?;
            Ok(RelaxationFit { kind: FitKind::Decay, value: f.gamma, r2: f.r2, window: f.window })
        }
        FitKind::Oscillation => {
            let z: Vec<f64> = t.iter().zip(y).map(|(&ti, &yi)| (gamma * ti).exp() * yi).collect();
            // beyond the decay floor e^{γt} amplifies round-off and slower modes;
            // the record is only extended to the sign floor for very long periods
            let start = 1.0 / gamma;
            let seeded = |floor: f64| -> Result<(f64, f64)> {
                let end = t
                    .iter()
                    .zip(y)
                    .filter(|(_, &v)| v.abs() > floor * y[0].abs())
                    .last()
                    .map_or(0.0, |(&ti, _)| ti)
                    .min(CLASSIFY_HORIZON / gamma);
                let (tt, zz): (Vec<f64>, Vec<f64>) = windowed(t, &z, (start, end)).into_iter().unzip();
                if tt.len() < 8 {
                    return Err(Error::Fit(format!("oscillation above the floor only until t = {end}")));
                }
                Ok((seed_frequency(&tt, &zz)?, end))
            };
            let (w0, end) = seeded(DECAY_FLOOR).or_else(|_| seeded(SIGN_FLOOR))?;
            let f = fit_seeded(t, &z, (start, (start + OSCILLATION_PERIODS * 2.0 * PI / w0).min(end)), w0)?;
            Ok(RelaxationFit { kind: FitKind::Oscillation, value: f.omega, r2: f.r2, window: f.window })
        }
    }
}
