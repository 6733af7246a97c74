//! The non-Hermitian Hubbard ladder `H_φ` and its η/spin SU(2) generators on
//! the spinful-fermion Fock space.
//!
//! Modes are ordered ↑ sites 1..L then ↓ sites 1..L (mode `σL + l`, 0-based);
//! Fock states are bitmasks and `c_j` carries the Jordan-Wigner sign
//! `(−1)^{#occupied modes below j}`. The η generators commute with `H_φ` only
//! for even L.

use faer::Mat;

use crate::sparse::{commutator_norm, CsrMatrix};
use crate::{invalid, Error, Result, C64, I};

use super::{flux, BetheParams};

/// Largest ladder handled; the Fock space has 4^L states.
pub const MAX_SITES: usize = 8;

fn annihilate(state: usize, mode: usize) -> Option<(usize, f64)> {
    if state >> mode & 1 == 0 {
        return None;
    }
    let sign = if (state & ((1 << mode) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    Some((state ^ (1 << mode), sign))
}

fn create(state: usize, mode: usize) -> Option<(usize, f64)> {
    if state >> mode & 1 == 1 {
        return None;
    }
    let sign = if (state & ((1 << mode) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    Some((state | (1 << mode), sign))
}

/// `c†_to c_from |state⟩`.
fn hop(state: usize, from: usize, to: usize) -> Option<(usize, f64)> {
    let (s1, a) = annihilate(state, from)?;
    let (s2, b) = create(s1, to)?;
    Some((s2, a * b))
}

#[derive(Debug, Clone)]
pub struct HubbardLadderOps {
    pub l: usize,
    pub phi: f64,
    pub h_phi: CsrMatrix,
    pub eta_plus: CsrMatrix,
    pub eta_minus: CsrMatrix,
    pub eta_z: CsrMatrix,
    pub s_plus: CsrMatrix,
    pub s_minus: CsrMatrix,
    pub s_z: CsrMatrix,
}

#[derive(Debug, Clone, Copy)]
pub struct SymmetryReport {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub eta_z: f64,
    pub s_plus: f64,
    pub s_minus: f64,
    pub s_z: f64,
}

impl SymmetryReport {
    pub fn max(&self) -> f64 {
        [self.eta_plus, self.eta_minus, self.eta_z, self.s_plus, self.s_minus, self.s_z].into_iter().fold(0.0, f64::max)
    }
}

/// Assemble `H_φ` and the symmetry generators with the flux of `params.n`.
pub fn build_hubbard_ladder(params: &BetheParams) -> Result<HubbardLadderOps> {
    HubbardLadderOps::with_flux(params.l, params.j, params.gamma, flux(params.n))
}

impl HubbardLadderOps {
    pub fn with_flux(l: usize, j: f64, gamma: f64, phi: f64) -> Result<Self> {
        if l < 2 {
            return invalid("ladder needs at least two sites");
        }
        if l > MAX_SITES {
            return Err(Error::SizeLimit { d2: 1 << (2 * l), limit: 1 << (2 * MAX_SITES) });
        }
        let dim = 1usize << (2 * l);
        let up = |site: usize| site;
        let dn = |site: usize| l + site;
        let leg = |sigma: usize, site: usize| sigma * l + site;
        let fwd = C64::from_polar(1.0, -phi / l as f64);
        let (mut h, mut ep, mut ez, mut sp, mut sz) = (vec![], vec![], vec![], vec![], vec![]);
        for s in 0..dim {
            let mut n_tot = 0.0;
            let mut doubles = 0.0;
            let mut mag = 0.0;
            for site in 0..l {
                let (nu, nd) = ((s >> up(site) & 1) as f64, (s >> dn(site) & 1) as f64);
                n_tot += nu + nd;
                doubles += nu * nd;
                mag += nu - nd;
                // −J(e^{−iφ/L} c†_l c_{l+1} + e^{iφ/L} c†_{l+1} c_l) on both legs, ring closed
                let next = (site + 1) % l;
                for sigma in 0..2 {
                    if let Some((t, sign)) = hop(s, leg(sigma, next), leg(sigma, site)) {
                        h.push((t, s, -j * fwd * sign));
                    }
                    if let Some((t, sign)) = hop(s, leg(sigma, site), leg(sigma, next)) {
                        h.push((t, s, -j * fwd.conj() * sign));
                    }
                }
                // η⁺ = Σ_l (−1)^l e^{2iφl/L} c†_{l↑} c†_{l↓}, sites labelled from 1
                let label = (site + 1) as f64;
                let phase = C64::from_polar(if (site + 1) % 2 == 0 { 1.0 } else { -1.0 }, 2.0 * phi * label / l as f64);
                if let Some((t1, a)) = create(s, dn(site)) {
                    if let Some((t2, b)) = create(t1, up(site)) {
                        ep.push((t2, s, phase * (a * b)));
                    }
                }
                if let Some((t, sign)) = hop(s, dn(site), up(site)) {
                    sp.push((t, s, C64::new(sign, 0.0)));
                }
            }
            h.push((s, s, I * gamma * doubles - I * 0.5 * gamma * n_tot));
            ez.push((s, s, C64::new(0.5 * (n_tot - l as f64), 0.0)));
            sz.push((s, s, C64::new(0.5 * mag, 0.0)));
        }
        let eta_plus = CsrMatrix::from_triplets(dim, dim, ep);
        let s_plus = CsrMatrix::from_triplets(dim, dim, sp);
        Ok(Self {
            l,
            phi,
            h_phi: CsrMatrix::from_triplets(dim, dim, h),
            eta_minus: eta_plus.adjoint(),
            eta_plus,
            eta_z: CsrMatrix::from_triplets(dim, dim, ez),
            s_minus: s_plus.adjoint(),
            s_plus,
            s_z: CsrMatrix::from_triplets(dim, dim, sz),
        })
    }

    pub fn dim(&self) -> usize {
        self.h_phi.nrows()
    }

    /// Commutator norms `‖[H_φ, X]‖_F` for all generators.
    pub fn symmetry_report(&self) -> SymmetryReport {
        let c = |x: &CsrMatrix| commutator_norm(&self.h_phi, x);
        SymmetryReport {
            eta_plus: c(&self.eta_plus),
            eta_minus: c(&self.eta_minus),
            eta_z: c(&self.eta_z),
            s_plus: c(&self.s_plus),
            s_minus: c(&self.s_minus),
            s_z: c(&self.s_z),
        }
    }

    /// Fock states with `n_up` ↑ and `n_down` ↓ fermions, ascending bitmask order.
    pub fn sector(&self, n_up: usize, n_down: usize) -> Vec<usize> {
        let mask = (1usize << self.l) - 1;
        (0..self.dim())
            .filter(|&s| (s & mask).count_ones() as usize == n_up && (s >> self.l).count_ones() as usize == n_down)
            .collect()
    }

    /// `H_φ` restricted to a particle-number sector.
    pub fn sector_hamiltonian(&self, n_up: usize, n_down: usize) -> Mat<C64> {
        let idx = self.sector(n_up, n_down);
        self.h_phi.restrict(&idx, &idx)
    }

    /// `(η⁺)^n |vac⟩` as a full Fock-space vector.
    pub fn eta_tower(&self, n: usize) -> Vec<C64> {
        let mut v = vec![C64::default(); self.dim()];
        v[0] = C64::new(1.0, 0.0);
        for _ in 0..n {
            v = self.eta_plus.mul_vec(&v);
        }
        v
    }

    /// `‖H_φ (η⁺)^n |vac⟩‖`, relative to the state norm.
    pub fn steady_state_defect(&self, n: usize) -> f64 {
        let v = self.eta_tower(n);
        let hv = self.h_phi.mul_vec(&v);
        norm(&hv) / norm(&v)
    }

    /// Largest `‖H w − E w‖/‖w‖` over `w = η⁺ v` for eigenpairs `(E, v)` of the
    /// `(n, n)` sector whose image does not vanish.
    pub fn eta_tower_defect(&self, n: usize) -> Result<f64> {
        let idx = self.sector(n, n);
        let block = self.h_phi.restrict(&idx, &idx);
        let eig = block.eigen().map_err(|e| Error::SolverFailure(format!("{e:?}")))?;
        let (vals, vecs) = (eig.S(), eig.U());
        let mut worst: f64 = 0.0;
        for c in 0..idx.len() {
            let mut full = vec![C64::default(); self.dim()];
            for (r, &s) in idx.iter().enumerate() {
                full[s] = vecs[(r, c)];
            }
            let w = self.eta_plus.mul_vec(&full);
            let wn = norm(&w);
            if wn < 1e-8 * norm(&full) {
                continue;
            }
            let hw = self.h_phi.mul_vec(&w);
            let e = vals[c];
            let d = norm(&hw.iter().zip(&w).map(|(a, b)| a - e * b).collect::<Vec<_>>());
            worst = worst.max(d / wn);
        }
        Ok(worst)
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::{assemble, ModelParams};
    use crate::spectral::multiset_distance;
    use std::f64::consts::PI;

    #[test]
    fn fermion_signs() {
        // c†_0 c†_1 |0⟩ = −c†_1 c†_0 |0⟩
        let (a, s1) = create(0, 1).unwrap();
        let (a, s2) = create(a, 0).unwrap();
        let (b, t1) = create(0, 0).unwrap();
        let (b, t2) = create(b, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(s1 * s2, -(t1 * t2));
        assert!(annihilate(0, 3).is_none() && create(1, 0).is_none());
    }

    #[test]
    fn symmetries_hold() {
        for (n, l) in [(1, 4), (2, 4), (1, 6)] {
            let ops = build_hubbard_ladder(&BetheParams::new(l, n, 0.3, 1.0)).unwrap();
            let r = ops.symmetry_report();
            assert!(r.max() < 1e-10, "{r:?}");
            assert!(ops.steady_state_defect(n) < 1e-10);
        }
    }

    #[test]
    fn spectrum_matches_liouvillian() {
        for n in [1, 2] {
            let l = 4;
            let ops = build_hubbard_ladder(&BetheParams::new(l, n, 0.3, 1.0)).unwrap();
            let e = ops.sector_hamiltonian(n, n).eigenvalues().unwrap();
            let (_, m) = assemble(&ModelParams::hardcore(l, n, 0.3, 1.0)).unwrap();
            let lam: Vec<C64> = m.to_dense().eigenvalues().unwrap().iter().map(|z| I * z).collect();
            assert!(multiset_distance(&e, &lam) < 1e-8, "N={n}");
        }
    }

    #[test]
    fn eta_pairs_keep_the_energy() {
        let ops = HubbardLadderOps::with_flux(4, 0.2, 1.0, PI).unwrap();
        assert!(ops.eta_tower_defect(1).unwrap() < 1e-9);
    }

    #[test]
    fn size_limit() {
        assert!(matches!(HubbardLadderOps::with_flux(9, 0.2, 1.0, 0.0), Err(Error::SizeLimit { .. })));
    }
}
