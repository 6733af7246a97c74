//! Per-mode localization metrics and incoherent/coherent labels.

use std::fmt;

use crate::basis::SectorBasis;
use crate::{invalid, Result, C64};

use super::{degenerate_clusters, EigenmodeSet};

/// S_off/S_diag below this labels a one-particle mode incoherent.
pub const S_RATIO_INCOHERENT: f64 = 0.1;

/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeClass {
    Incoherent,
    Coherent,
    Intermediate,
}

impl fmt::Display for ModeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeClass::Incoherent => "incoherent",
            ModeClass::Coherent => "coherent",
            ModeClass::Intermediate => "intermediate",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ModeMetrics {
    /// Bound-pair fraction of this eigenvector.
    pub n_b: f64,
    /// Bound-pair fraction averaged over the degenerate cluster; basis independent.
    pub n_b_cluster: f64,
    pub s_diag: Option<f64>,
    pub s_off: Option<f64>,
    pub trace: C64,
    pub class: ModeClass,
    /// Number of unbound pairs.
    pub group: usize,
}

/// `Σ_{ij} |v_ij|² Σ_l n_l(i) n_l(j)` for a unit-norm ladder vector.
pub fn bound_pair_fraction(mode: &[C64], basis: &SectorBasis) -> f64 {
    let d = basis.dim();
    assert_eq!(mode.len(), d * d);
    let mut acc = 0.0;
    for (i, a) in basis.states().iter().enumerate() {
        for (j, b) in basis.states().iter().enumerate() {
            let w = mode[i * d + j].norm_sqr();
            if w != 0.0 {
                acc += w * a.overlap(b) as f64;
            }
        }
    }
    acc
}

/// Shortest distance between two sites of a ring of `l` sites.
pub fn ring_distance(a: usize, b: usize, l: usize) -> usize {
    let d = a.abs_diff(b) % l;
    d.min(l - d)
}

fn site_of(basis: &SectorBasis, i: usize) -> usize {
    basis.state_at(i).occupations().iter().position(|&n| n == 1).expect("one particle")
}

/// `(Σ_{|l−m|<L/4} |ρ_lm|, Σ_{|l−m|≥L/4} |ρ_lm|)` with ring distance; one-particle only.
pub fn diag_off_weights(mode: &[C64], basis: &SectorBasis) -> Result<(f64, f64)> {
    if basis.particles() != 1 {
        return invalid("diagonal/off-diagonal weights are defined for the one-particle sector only");
    }
    let d = basis.dim();
    let l = basis.sites();
    let (mut near, mut far) = (0.0, 0.0);
    for i in 0..d {
        let si = site_of(basis, i);
        for j in 0..d {
            let r = ring_distance(si, site_of(basis, j), l) as f64;
            let v = mode[i * d + j].norm();
            if r < l as f64 / 4.0 {
                near += v;
            } else {
                far += v;
            }
        }
    }
    Ok((near, far))
}

/// Upper bin edges `j·N/(N+1)`, j = 1..N, splitting [0, N] into N+1 bins.
pub fn group_edges(n: usize) -> Vec<f64> {
    (1..=n).map(|j| (j * n) as f64 / (n + 1) as f64).collect()
}

/// Number of unbound pairs implied by a bound-pair fraction.
pub fn group_of(n_b: f64, n: usize) -> usize {
    let bin = group_edges(n).iter().filter(|&&e| n_b >= e).count();
    n - bin
}

pub fn compute_metrics(modes: &EigenmodeSet, basis: &SectorBasis) -> Vec<ModeMetrics> {
    let n = basis.particles();
    let one_particle = n == 1;
    let clusters = degenerate_clusters(modes.eigenvalues(), DEGENERACY_TOL);
    let mut raw = Vec::with_capacity(modes.len());
    for a in 0..modes.len() {
        let v = modes.mode(a);
        let n_b = bound_pair_fraction(&v, basis);
        let weights = if one_particle { diag_off_weights(&v, basis).ok() } else { None };
        let d = basis.dim();
        let tr: C64 = (0..d).map(|i| v[i * d + i]).sum();
        raw.push((n_b, weights, tr));
    }
    let mut sum = vec![0.0; modes.len()];
    let mut count = vec![0usize; modes.len()];
    // the S ratio is pooled over the cluster too: degenerate eigenvectors are
    // only defined up to mixing (e.g. the k=0 modes at λ = −γ)
    let mut pooled = vec![(0.0, 0.0); modes.len()];
    for (a, &c) in clusters.iter().enumerate() {
        sum[c] += raw[a].0;
        count[c] += 1;
        if let Some((near, far)) = raw[a].1 {
            pooled[c].0 += near;
            pooled[c].1 += far;
        }
    }
    raw.into_iter()
        .enumerate()
        .map(|(a, (n_b, weights, tr))| {
            let c = clusters[a];
            let n_b_cluster = sum[c] / count[c] as f64;
            let group = group_of(n_b_cluster, n);
            let class = match weights.map(|_| pooled[c]) {
                Some((near, far)) => {
                    if far < S_RATIO_INCOHERENT * near {
                        ModeClass::Incoherent
                    } else {
                        ModeClass::Coherent
                    }
                }
                None if group == 0 => ModeClass::Incoherent,
                None if group == n => ModeClass::Coherent,
                None => ModeClass::Intermediate,
            };
            ModeMetrics {
                n_b,
                n_b_cluster,
                s_diag: weights.map(|w| w.0),
                s_off: weights.map(|w| w.1),
                trace: tr,
                class,
                group,
            }
        })
        .collect()
}
