//! Occupation-number bases of fixed-particle-number sectors on a periodic ring.

use std::collections::HashMap;

use crate::{invalid, Result};

/// Site occupations `n_0 .. n_{L-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockState(Vec<u8>);

impl FockState {
    pub fn new(occupations: Vec<u8>) -> Self {
        Self(occupations)
    }

    pub fn occupations(&self) -> &[u8] {
        &self.0
    }

    pub fn n(&self, site: usize) -> u8 {
        self.0[site]
    }

    pub fn sites(&self) -> usize {
        self.0.len()
    }

    pub fn particle_number(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }

    /// Number of sites where both states are occupied, weighted by occupations:
    /// `Σ_l n_l(a) n_l(b)`.
    pub fn overlap(&self, other: &FockState) -> usize {
        self.0.iter().zip(&other.0).map(|(&a, &b)| a as usize * b as usize).sum()
    }

    /// Every occupation moved one site to the right (site l → l+1 mod L).
    pub fn translated(&self) -> FockState {
        let l = self.0.len();
        let mut out = vec![0u8; l];
        for (site, &n) in self.0.iter().enumerate() {
            out[(site + 1) % l] = n;
        }
        FockState(out)
    }
}

/// All states of `N` bosons on `L` sites with occupancy at most `n_max`,
/// ordered lexicographically descending.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    l: usize,
    n: usize,
    n_max: u8,
    states: Vec<FockState>,
    index: HashMap<FockState, usize>,
}

/// Ladder (ket ⊗ bra) index with `flat = ket·D + bra`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LadderIndex {
    pub ket: usize,
    pub bra: usize,
    pub flat: usize,
}

impl LadderIndex {
    pub fn new(ket: usize, bra: usize, d: usize) -> Self {
        debug_assert!(ket < d && bra < d);
        Self { ket, bra, flat: ket * d + bra }
    }

    pub fn from_flat(flat: usize, d: usize) -> Self {
        Self { ket: flat / d, bra: flat % d, flat }
    }
}

pub fn enumerate_sector(l: usize, n: usize, n_max: usize) -> Result<SectorBasis> {
    if l == 0 {
        return invalid("L must be at least 1");
    }
    if n_max == 0 || n_max > u8::MAX as usize {
        return invalid(format!("occupancy cap {n_max} out of range"));
    }
    if n > l * n_max {
        return invalid(format!("N = {n} exceeds L·n_max = {}", l * n_max));
    }
    let mut states = Vec::new();
    let mut current = vec![0u8; l];
    fill(&mut current, 0, n, n_max, &mut states);
    let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    Ok(SectorBasis { l, n, n_max: n_max as u8, states, index })
}

fn fill(cur: &mut [u8], site: usize, remaining: usize, n_max: usize, out: &mut Vec<FockState>) {
    let l = cur.len();
    if site == l - 1 {
        if remaining <= n_max {
            cur[site] = remaining as u8;
            out.push(FockState(cur.to_vec()));
        }
        return;
    }
    let capacity_after = (l - site - 1) * n_max;
    let hi = remaining.min(n_max);
    let lo = remaining.saturating_sub(capacity_after);
    for occ in (lo..=hi).rev() {
        cur[site] = occ as u8;
        fill(cur, site + 1, remaining - occ, n_max, out);
    }
    cur[site] = 0;
}

impl SectorBasis {
    pub fn hard_core(l: usize, n: usize) -> Result<Self> {
        enumerate_sector(l, n, 1)
    }

    /// Bose-Hubbard sector: the cap equals `N`, i.e. unconstrained.
    pub fn soft_core(l: usize, n: usize) -> Result<Self> {
        enumerate_sector(l, n, n.max(1))
    }

    pub fn sites(&self) -> usize {
        self.l
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn n_max(&self) -> usize {
        self.n_max as usize
    }

    pub fn is_hard_core(&self) -> bool {
        self.n_max == 1
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn state_at(&self, i: usize) -> &FockState {
        &self.states[i]
    }

    pub fn lookup(&self, s: &FockState) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// `table[i]` is the index of the state obtained by translating state `i` by one site.
    pub fn translation_table(&self) -> Vec<usize> {
        self.states
            .iter()
            .map(|s| self.lookup(&s.translated()).expect("sector is translation invariant"))
            .collect()
    }

    /// `Σ_l n_l(i) n_l(j)` for every ladder index, flat ordering.
    pub fn rung_occupation_table(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for a in &self.states {
            for b in &self.states {
                out.push(a.overlap(b) as f64);
            }
        }
        out
    }
}

/// Move one boson between neighbouring sites of the ring.
///
/// Returns the image state and `√n_from·√(n_to+1)`; the amplitude is zero when
/// the source is empty or the target is at the cap (the state is then returned
/// unchanged).
pub fn hop_apply(state: &FockState, from: usize, to: usize, n_max: usize) -> (FockState, f64) {
    let l = state.sites();
    assert!(
        l >= 2 && ((from + 1) % l == to || (to + 1) % l == from),
        "sites {from} and {to} are not neighbours on a ring of {l}"
    );
    let nf = state.n(from) as usize;
    let nt = state.n(to) as usize;
    if nf == 0 || nt >= n_max {
        return (state.clone(), 0.0);
    }
    let mut occ = state.0.clone();
    occ[from] -= 1;
    occ[to] += 1;
    (FockState(occ), ((nf * (nt + 1)) as f64).sqrt())
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}
