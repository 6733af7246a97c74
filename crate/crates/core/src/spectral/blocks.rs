//! Translation-symmetry reduction of the ladder space.
//!
//! Simultaneous translation of ket and bra commutes with the generator, so
//! orbits of ladder indices under it span invariant subspaces. For total
//! momentum `K = 2πq/L` the orbit of `r` with period `P` contributes the unit
//! vector `u_{K,r} = P^{-1/2} Σ_{n<P} e^{−iKn} |Tⁿ r⟩` whenever `qP ≡ 0 (mod L)`.

use std::f64::consts::PI;

use faer::Mat;

use crate::basis::SectorBasis;
use crate::sparse::CsrMatrix;
use crate::C64;

#[derive(Debug, Clone)]
pub(crate) struct Orbits {
    pub l: usize,
    /// Members `r, T r, T² r, …` of each orbit.
    pub members: Vec<Vec<usize>>,
    /// For every flat ladder index: (orbit id, position within orbit).
    pub position: Vec<(usize, usize)>,
}

impl Orbits {
    pub fn new(basis: &SectorBasis) -> Self {
        let d = basis.dim();
        let l = basis.sites();
        let t = basis.translation_table();
        let shift = |f: usize| t[f / d] * d + t[f % d];
        let mut position = vec![(usize::MAX, 0); d * d];
        let mut members = Vec::new();
        for f in 0..d * d {
            if position[f].0 != usize::MAX {
                continue;
            }
            let id = members.len();
            let mut orbit = vec![f];
            position[f] = (id, 0);
            let mut g = shift(f);
            while g != f {
                position[g] = (id, orbit.len());
                orbit.push(g);
                g = shift(g);
            }
            members.push(orbit);
        }
        Self { l, members, position }
    }

    fn phase(&self, q: usize, n: usize) -> C64 {
        // e^{−iKn} with K = 2πq/L, reduced mod L for accuracy
        let k = ((q * n) % self.l) as f64;
        C64::from_polar(1.0, -2.0 * PI * k / self.l as f64)
    }

    /// Orbits admitting momentum index `q`.
    pub fn admissible(&self, q: usize) -> Vec<usize> {
        (0..self.members.len()).filter(|&r| (q * self.members[r].len()) % self.l == 0).collect()
    }
}

/// Embedding of one momentum sector into the full ladder space.
#[derive(Debug, Clone)]
pub(crate) struct MomentumEmbedding {
    pub q: usize,
    pub orbits: Vec<usize>,
}

impl MomentumEmbedding {
    /// Full ladder vector `Σ_r c_r u_{K,r}`.
    pub fn embed(&self, o: &Orbits, coeffs: &[C64], out: &mut [C64]) {
        for (&r, &c) in self.orbits.iter().zip(coeffs) {
            if c == C64::default() {
                continue;
            }
            let m = &o.members[r];
            let norm = 1.0 / (m.len() as f64).sqrt();
            for (n, &f) in m.iter().enumerate() {
                out[f] += c * o.phase(self.q, n) * norm;
            }
        }
    }

    /// Sector coordinates `u_{K,r}† v`.
    pub fn project(&self, o: &Orbits, v: &[C64]) -> Vec<C64> {
        self.orbits
            .iter()
            .map(|&r| {
                let m = &o.members[r];
                let norm = 1.0 / (m.len() as f64).sqrt();
                m.iter().enumerate().map(|(n, &f)| o.phase(self.q, n).conj() * v[f]).sum::<C64>() * norm
            })
            .collect()
    }

    /// `B = U_K† M U_K` from the column-major view `mt = Mᵀ` of the generator.
    pub fn block(&self, o: &Orbits, mt: &CsrMatrix) -> Mat<C64> {
        let n = self.orbits.len();
        let mut local = vec![usize::MAX; o.members.len()];
        for (k, &r) in self.orbits.iter().enumerate() {
            local[r] = k;
        }
        let mut b = Mat::<C64>::zeros(n, n);
        for (col, &r) in self.orbits.iter().enumerate() {
            let m = &o.members[r];
            let norm_r = 1.0 / (m.len() as f64).sqrt();
            for (nr, &f) in m.iter().enumerate() {
                let coef = o.phase(self.q, nr) * norm_r;
                for (g, v) in mt.row(f) {
                    let (rp, np) = o.position[g];
                    let row = local[rp];
                    if row == usize::MAX {
                        continue;
                    }
                    let norm_p = 1.0 / (o.members[rp].len() as f64).sqrt();
                    b[(row, col)] += o.phase(self.q, np).conj() * norm_p * v * coef;
                }
            }
        }
        b
    }
}

pub(crate) fn momentum_sectors(o: &Orbits) -> Vec<MomentumEmbedding> {
    (0..o.l)
        .map(|q| MomentumEmbedding { q, orbits: o.admissible(q) })
        .filter(|e| !e.orbits.is_empty())
        .collect()
}
