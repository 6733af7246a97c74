//! Quantum-coherence gaps between eigenmode groups and confinement lengths.

use crate::basis::SectorBasis;
use crate::{invalid, Error, Result, C64};

use super::metrics::{group_edges, ring_distance, ModeClass, ModeMetrics};
use super::EigenmodeSet;

/// N_b values closer than this to a bin edge make the grouping ambiguous.
pub const EDGE_MARGIN: f64 = 0.05;

/// Profile values below this fraction of the peak are treated as round-off.
pub const PROFILE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupingRule {
    /// One particle: incoherent (S ratio) versus everything else.
    SRatio,
    /// Bound-pair fraction bins, N+1 uniform bins over [0, N].
    BoundPairBins,
}

#[derive(Debug, Clone)]
pub struct QcGapReport {
    pub rule: GroupingRule,
    /// Δ^(n) = min |λ^(n) − λ^(n−1)| for n = 1..N; infinite when a group is empty.
    pub gaps: Vec<f64>,
    /// Same with |Re λ^(n) − Re λ^(n−1)|.
    pub real_gaps: Vec<f64>,
    /// Bin edges (empty for the S-ratio rule).
    pub bins: Vec<f64>,
    pub threshold: f64,
    pub gap_closed: Vec<bool>,
    /// Mode count per group n = 0..N.
    pub group_counts: Vec<usize>,
    /// Modes whose cluster-averaged N_b lies within [`EDGE_MARGIN`] of an edge.
    pub ambiguous: usize,
}

impl QcGapReport {
    pub fn all_closed(&self) -> bool {
        self.gap_closed.iter().all(|&c| c)
    }

    pub fn warning(&self) -> Option<String> {
        (self.ambiguous > 0).then(|| format!("{} modes have N_b within {EDGE_MARGIN} of a bin edge", self.ambiguous))
    }
}

/// Gap-closing threshold `max(1e−3, 5/L)·γ`.
pub fn closing_threshold(l: usize, gamma: f64) -> f64 {
    (5.0 / l as f64).max(1e-3) * gamma
}

/// QC gaps with the default rule: S ratio for one particle, N_b bins otherwise.
pub fn qc_gap(modes: &EigenmodeSet, metrics: &[ModeMetrics], basis: &SectorBasis, gamma: f64) -> QcGapReport {
    let rule = if basis.particles() == 1 { GroupingRule::SRatio } else { GroupingRule::BoundPairBins };
    qc_gap_with(modes, metrics, basis, gamma, rule)
}

pub fn qc_gap_with(
    modes: &EigenmodeSet,
    metrics: &[ModeMetrics],
    basis: &SectorBasis,
    gamma: f64,
    rule: GroupingRule,
) -> QcGapReport {
    let n = basis.particles();
    let l = basis.sites();
    let (groups, bins): (Vec<usize>, Vec<f64>) = match rule {
        GroupingRule::SRatio => {
            (metrics.iter().map(|m| usize::from(m.class != ModeClass::Incoherent)).collect(), vec![])
        }
        GroupingRule::BoundPairBins => (metrics.iter().map(|m| m.group).collect(), group_edges(n)),
    };
    let n_groups = match rule {
        GroupingRule::SRatio => 2,
        GroupingRule::BoundPairBins => n + 1,
    };
    let mut members: Vec<Vec<C64>> = vec![vec![]; n_groups];
    for (a, &g) in groups.iter().enumerate() {
        members[g].push(modes.eigenvalues()[a]);
    }
    let mut gaps = Vec::new();
    let mut real_gaps = Vec::new();
    for g in 1..n_groups {
        let (mut best, mut best_re) = (f64::INFINITY, f64::INFINITY);
        for x in &members[g] {
            for y in &members[g - 1] {
                best = best.min((x - y).norm());
                best_re = best_re.min((x.re - y.re).abs());
            }
        }
        gaps.push(best);
        real_gaps.push(best_re);
    }
    let threshold = closing_threshold(l, gamma);
    let ambiguous = match rule {
        GroupingRule::SRatio => 0,
        GroupingRule::BoundPairBins => metrics
            .iter()
            .filter(|m| bins.iter().any(|e| (m.n_b_cluster - e).abs() < EDGE_MARGIN))
            .count(),
    };
    QcGapReport {
        rule,
        gap_closed: gaps.iter().map(|&g| g < threshold).collect(),
        gaps,
        real_gaps,
        bins,
        threshold,
        group_counts: members.iter().map(|m| m.len()).collect(),
        ambiguous,
    }
}

/// Confinement length from the off-diagonal decay of a one-particle mode.
///
/// The profile `f(d) = max_{ring(l,m)=d} |ρ_lm|` is fitted as `ln f ∝ −d/ξ`
/// over `d ∈ [2, L/2−2]`, skipping values below the round-off floor.
pub fn confinement_length(mode: &[C64], basis: &SectorBasis) -> Result<f64> {
    if basis.particles() != 1 {
        return invalid("confinement length is defined for one-particle modes");
    }
    let l = basis.sites();
    let d = basis.dim();
    let site = |i: usize| basis.state_at(i).occupations().iter().position(|&x| x == 1).expect("one particle");
    let mut profile = vec![0.0f64; l / 2 + 1];
    for i in 0..d {
        for j in 0..d {
            let r = ring_distance(site(i), site(j), l);
            profile[r] = profile[r].max(mode[i * d + j].norm());
        }
    }
    let peak = profile.iter().copied().fold(0.0, f64::max);
    let hi = (l / 2).saturating_sub(2);
    let pts: Vec<(f64, f64)> = (2..=hi)
        .filter(|&r| profile[r] > PROFILE_FLOOR * peak)
        .map(|r| (r as f64, profile[r].ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Fit(format!("only {} usable distances for the confinement fit", pts.len())));
    }
    let slope = linear_fit(&pts).0;
    if !(slope < 0.0) {
        return Err(Error::Fit(format!("profile does not decay (slope {slope})")));
    }
    Ok(-1.0 / slope)
}

/// Least-squares `(slope, intercept)`.
pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_scales_with_size() {
        assert_eq!(closing_threshold(20, 1.0), 0.25);
        assert_eq!(closing_threshold(8, 2.0), 1.25);
        assert_eq!(closing_threshold(100_000, 1.0), 1e-3);
    }

    #[test]
    fn exponential_profile_gives_its_length() {
        let l = 30;
        let b = SectorBasis::hard_core(l, 1).unwrap();
        let xi = 2.5;
        let mut v = vec![C64::default(); l * l];
        for i in 0..l {
            for j in 0..l {
                v[i * l + j] = C64::new((-(ring_distance(i, j, l) as f64) / xi).exp(), 0.0);
            }
        }
        assert!((confinement_length(&v, &b).unwrap() - xi).abs() < 1e-10);
    }

    #[test]
    fn diagonal_mode_is_fit_degenerate() {
        let b = SectorBasis::hard_core(20, 1).unwrap();
        let mut v = vec![C64::default(); 400];
        v[0] = C64::new(1.0, 0.0);
        assert!(matches!(confinement_length(&v, &b), Err(Error::Fit(_))));
    }
}
