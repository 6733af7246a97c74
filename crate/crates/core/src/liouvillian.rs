//! Hamiltonians, dephasing jump operators and the vectorized Liouvillian.
//!
//! Vectorization convention: `vec(ρ)[ket·D + bra] = ρ[ket, bra]`, so that
//! `L ρ L†` becomes the literal Kronecker product `L ⊗ L*`.

use std::fmt;
use std::str::FromStr;

use faer::Mat;

use crate::basis::{hop_apply, SectorBasis};
use crate::sparse::CsrMatrix;
use crate::{invalid, Error, Result, C64, I};

/// A D×D operator on a sector basis.
pub type OperatorMatrix = CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// Hard-core bosons with on-site dephasing.
    Hardcore,
    /// Soft-core Bose-Hubbard bosons with on-site dephasing.
    BoseHubbard,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Hardcore => "hardcore",
            Model::BoseHubbard => "bose-hubbard",
        })
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hardcore" | "hardcore-dephasing" | "hard-core" => Ok(Model::Hardcore),
            "bose-hubbard" | "bose-hubbard-dephasing" | "bh" => Ok(Model::BoseHubbard),
            other => invalid(format!("unknown model '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub model: Model,
    pub l: usize,
    pub n: usize,
    pub j: f64,
    pub gamma: f64,
    /// On-site interaction; ignored by the hard-core model.
    pub u: f64,
}

impl ModelParams {
    pub fn hardcore(l: usize, n: usize, j: f64, gamma: f64) -> Self {
        Self { model: Model::Hardcore, l, n, j, gamma, u: 0.0 }
    }

    pub fn bose_hubbard(l: usize, n: usize, j: f64, gamma: f64, u: f64) -> Self {
        Self { model: Model::BoseHubbard, l, n, j, gamma, u }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return invalid(format!("L = {} < 2", self.l));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return invalid(format!("gamma = {} must be finite and non-negative", self.gamma));
        }
        if !self.j.is_finite() || !self.u.is_finite() {
            return invalid("J and U must be finite");
        }
        if self.model == Model::Hardcore && self.n > self.l {
            return invalid(format!("hard-core sector N = {} exceeds L = {}", self.n, self.l));
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<SectorBasis> {
        self.validate()?;
        match self.model {
            Model::Hardcore => SectorBasis::hard_core(self.l, self.n),
            Model::BoseHubbard => SectorBasis::soft_core(self.l, self.n),
        }
    }

    fn check_basis(&self, basis: &SectorBasis) -> Result<()> {
        self.validate()?;
        // for N ≤ 1 both models share the cap 1 and hence the same basis
        let cap = if self.model == Model::Hardcore { 1 } else { self.n.max(1) };
        if basis.sites() != self.l || basis.particles() != self.n || basis.n_max() != cap {
            return invalid(format!(
                "basis (L={}, N={}, n_max={}) does not match {} model with L={}, N={}",
                basis.sites(),
                basis.particles(),
                basis.n_max(),
                self.model,
                self.l,
                self.n
            ));
        }
        Ok(())
    }
}

/// `−J Σ_l (b†_l b_{l+1} + h.c.)` on the ring, plus `(U/2) Σ n_l(n_l−1)` for soft-core bosons.
pub fn build_hamiltonian(params: &ModelParams, basis: &SectorBasis) -> Result<OperatorMatrix> {
    params.check_basis(basis)?;
    let l = basis.sites();
    let n_max = basis.n_max();
    let mut trip = Vec::new();
    for (i, s) in basis.states().iter().enumerate() {
        for site in 0..l {
            let next = (site + 1) % l;
            for (from, to) in [(next, site), (site, next)] {
                let (img, amp) = hop_apply(s, from, to, n_max);
                if amp != 0.0 {
                    let k = basis.lookup(&img).expect("hop stays in sector");
                    trip.push((k, i, C64::new(-params.j * amp, 0.0)));
                }
            }
        }
        if params.model == Model::BoseHubbard && params.u != 0.0 {
            let e: f64 = s.occupations().iter().map(|&n| (n as f64) * (n as f64 - 1.0)).sum();
            trip.push((i, i, C64::new(0.5 * params.u * e, 0.0)));
        }
    }
    Ok(CsrMatrix::from_triplets(basis.dim(), basis.dim(), trip))
}

/// On-site dephasing `L_l = √γ n_l`, one operator per site.
pub fn build_lindblads(params: &ModelParams, basis: &SectorBasis) -> Result<Vec<OperatorMatrix>> {
    params.check_basis(basis)?;
    let sg = params.gamma.sqrt();
    Ok((0..basis.sites())
        .map(|site| {
            CsrMatrix::from_triplets(
                basis.dim(),
                basis.dim(),
                basis.states().iter().enumerate().map(|(i, s)| (i, i, C64::new(sg * s.n(site) as f64, 0.0))),
            )
        })
        .collect())
}

/// Max |A − A†| over entries.
pub fn hermiticity_defect(a: &CsrMatrix) -> f64 {
    a.add_scaled(&a.adjoint(), C64::new(-1.0, 0.0)).max_abs()
}

/// The ladder generator `M = −i(H_eff ⊗ I − I ⊗ H_eff*) + Σ_ν L_ν ⊗ L_ν*`.
///
/// Stored sparse; [`Superoperator::to_dense`] materializes the D²×D² matrix.
#[derive(Debug, Clone)]
pub struct Superoperator {
    d: usize,
    h_eff: CsrMatrix,
    h_eff_adj: CsrMatrix,
    jumps: Vec<CsrMatrix>,
    /// `Σ_ν l_ν(i) l_ν(j)*` when every jump operator is diagonal.
    jump_weights: Option<Mat<C64>>,
    generator: CsrMatrix,
}

pub fn build_superoperator(h: &OperatorMatrix, lindblads: &[OperatorMatrix]) -> Result<Superoperator> {
    let d = h.nrows();
    if h.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: h.ncols() });
    }
    for l in lindblads {
        if l.nrows() != d || l.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: l.nrows() });
        }
    }
    let mut lsum = CsrMatrix::zeros(d, d);
    for l in lindblads {
        lsum = lsum.add_scaled(&l.adjoint().matmul(l), C64::new(1.0, 0.0));
    }
    let h_eff = h.add_scaled(&lsum, C64::new(0.0, -0.5));
    let h_eff_adj = h_eff.adjoint();

    let mut trip = Vec::new();
    for (a, i, v) in h_eff.triplets() {
        for b in 0..d {
            trip.push((a * d + b, i * d + b, -I * v));
        }
    }
    for (b, j, v) in h_eff.triplets() {
        for a in 0..d {
            trip.push((a * d + b, a * d + j, I * v.conj()));
        }
    }
    for l in lindblads {
        for (a, i, x) in l.triplets() {
            for (b, j, y) in l.triplets() {
                trip.push((a * d + b, i * d + j, x * y.conj()));
            }
        }
    }
    let generator = CsrMatrix::from_triplets(d * d, d * d, trip);

    let diagonals: Option<Vec<Vec<C64>>> = lindblads.iter().map(|l| l.as_diagonal()).collect();
    let jump_weights = diagonals.map(|ds| {
        Mat::from_fn(d, d, |i, j| ds.iter().map(|x| x[i] * x[j].conj()).sum::<C64>())
    });

    Ok(Superoperator { d, h_eff, h_eff_adj, jumps: lindblads.to_vec(), jump_weights, generator })
}

/// Hamiltonian, jump operators and generator for a model in one call.
pub fn assemble(params: &ModelParams) -> Result<(SectorBasis, Superoperator)> {
    let basis = params.basis()?;
    let h = build_hamiltonian(params, &basis)?;
    let ls = build_lindblads(params, &basis)?;
    Ok((basis, build_superoperator(&h, &ls)?))
}

pub fn vectorize(rho: &Mat<C64>) -> Vec<C64> {
    let d = rho.nrows();
    (0..d * d).map(|f| rho[(f / d, f % d)]).collect()
}

pub fn unvectorize(v: &[C64], d: usize) -> Mat<C64> {
    assert_eq!(v.len(), d * d);
    Mat::from_fn(d, d, |i, j| v[i * d + j])
}

impl Superoperator {
    /// Sector dimension D.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Ladder dimension D².
    pub fn ladder_dim(&self) -> usize {
        self.d * self.d
    }

    pub fn sparse(&self) -> &CsrMatrix {
        &self.generator
    }

    pub fn h_eff(&self) -> &CsrMatrix {
        &self.h_eff
    }

    pub fn jumps(&self) -> &[CsrMatrix] {
        &self.jumps
    }

    pub fn to_dense(&self) -> Mat<C64> {
        self.generator.to_dense()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.generator.frobenius_norm()
    }

    /// `max_c |Σ_i M[(i,i), c]|`; vanishes for a trace-preserving generator.
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.d;
        let mut sums = vec![C64::default(); d * d];
        for i in 0..d {
            for (c, v) in self.generator.row(i * d + i) {
                sums[c] += v;
            }
        }
        sums.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        self.generator.mul_vec(v)
    }

    /// `L(ρ)` through the ladder matrix.
    pub fn apply(&self, rho: &Mat<C64>) -> Result<Mat<C64>> {
        self.check_shape(rho)?;
        Ok(unvectorize(&self.apply_vec(&vectorize(rho)), self.d))
    }

    /// `L(ρ) = −i(H_eff ρ − ρ H_eff†) + Σ L_ν ρ L_ν†` without the ladder matrix.
    pub fn apply_matrix_free(&self, rho: &Mat<C64>) -> Result<Mat<C64>> {
        self.check_shape(rho)?;
        let mut out = self.h_eff.mul_dense(rho);
        let right = self.h_eff_adj.dense_mul(rho);
        let d = self.d;
        for j in 0..d {
            for i in 0..d {
                out[(i, j)] = -I * (out[(i, j)] - right[(i, j)]);
            }
        }
        match &self.jump_weights {
            Some(w) => {
                for j in 0..d {
                    for i in 0..d {
                        out[(i, j)] += w[(i, j)] * rho[(i, j)];
                    }
                }
            }
            None => {
                for l in &self.jumps {
                    let lr = l.mul_dense(rho);
                    out += l.adjoint().dense_mul(&lr);
                }
            }
        }
        Ok(out)
    }

    fn check_shape(&self, rho: &Mat<C64>) -> Result<()> {
        if rho.nrows() != self.d || rho.ncols() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: rho.nrows() });
        }
        Ok(())
    }
}

/// A validated density matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: Mat<C64>,
}

#[derive(Debug, Clone, Copy)]
pub struct DensityDiagnostics {
    pub hermiticity: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

impl DensityMatrix {
    /// Accepts `m` if it is Hermitian and has unit trace within `1e−10`.
    pub fn new(m: Mat<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let herm = hermitian_defect(&m);
        let tr = trace(&m);
        if herm > 1e-10 || (tr - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return invalid(format!("not a density matrix: hermiticity {herm:.3e}, trace {tr}"));
        }
        Ok(Self { matrix: m })
    }

    /// Wraps without validation; used for intermediate trajectory states.
    pub fn from_matrix_unchecked(m: Mat<C64>) -> Self {
        Self { matrix: m }
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn diagnostics(&self) -> DensityDiagnostics {
        let m = &self.matrix;
        let herm_part = Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
        let min_eigenvalue = herm_part
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map(|v| v.into_iter().fold(f64::INFINITY, f64::min))
            .unwrap_or(f64::NAN);
        DensityDiagnostics {
            hermiticity: hermitian_defect(m),
            trace_error: (trace(m) - C64::new(1.0, 0.0)).norm(),
            min_eigenvalue,
        }
    }
}

pub fn trace(m: &Mat<C64>) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Max |m − m†| over entries.
pub fn hermitian_defect(m: &Mat<C64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_spectrum(params: &ModelParams) -> Vec<C64> {
        let (_, m) = assemble(params).unwrap();
        m.to_dense().eigenvalues().unwrap()
    }

    #[test]
    fn two_site_ring_doubles_the_bond() {
        let p = ModelParams::hardcore(2, 1, 1.0, 0.0);
        let b = p.basis().unwrap();
        let h = build_hamiltonian(&p, &b).unwrap();
        assert_eq!(h.get(0, 1), C64::new(-2.0, 0.0));
        assert_eq!(h.get(1, 0), C64::new(-2.0, 0.0));
    }

    #[test]
    fn four_site_tight_binding_levels() {
        let p = ModelParams::hardcore(4, 1, 1.0, 0.0);
        let h = build_hamiltonian(&p, &p.basis().unwrap()).unwrap();
        let mut e = h.to_dense().self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        e.sort_by(f64::total_cmp);
        for (x, y) in e.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn interaction_counts_doublons() {
        let p = ModelParams::bose_hubbard(2, 2, 0.0, 0.0, 3.0);
        let h = build_hamiltonian(&p, &p.basis().unwrap()).unwrap();
        let diag: Vec<f64> = (0..3).map(|i| h.get(i, i).re).collect();
        assert_eq!(diag, vec![3.0, 0.0, 3.0]);
    }

    #[test]
    fn dephasing_operators() {
        let p = ModelParams::hardcore(2, 1, 0.0, 1.0);
        let ls = build_lindblads(&p, &p.basis().unwrap()).unwrap();
        assert_eq!(ls[0].as_diagonal().unwrap(), vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert_eq!(ls[1].as_diagonal().unwrap(), vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);

        let p = ModelParams::hardcore(3, 1, 0.3, 0.0);
        assert!(build_lindblads(&p, &p.basis().unwrap()).unwrap().iter().all(|l| l.nnz() == 0));

        let p = ModelParams::bose_hubbard(2, 2, 0.0, 4.0, 0.0);
        let ls = build_lindblads(&p, &p.basis().unwrap()).unwrap();
        assert_eq!(ls[0].get(0, 0), C64::new(4.0, 0.0));
    }

    #[test]
    fn two_site_dephasing_spectrum() {
        let mut ev: Vec<f64> = dense_spectrum(&ModelParams::hardcore(2, 1, 0.0, 1.0)).iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        assert_eq!(ev, vec![-1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn off_diagonal_element_decays_at_gamma() {
        let (_, m) = assemble(&ModelParams::hardcore(3, 1, 0.0, 1.0)).unwrap();
        let mut rho = Mat::<C64>::zeros(3, 3);
        rho[(0, 1)] = C64::new(1.0, 0.0);
        let out = m.apply_matrix_free(&rho).unwrap();
        assert!((&out + &rho).norm_l2() < 1e-15);
    }

    #[test]
    fn identity_is_stationary() {
        for p in [ModelParams::hardcore(5, 2, 0.37, 0.8), ModelParams::bose_hubbard(4, 2, 0.2, 1.3, 0.7)] {
            let (b, m) = assemble(&p).unwrap();
            let id = Mat::<C64>::identity(b.dim(), b.dim());
            assert!(m.apply(&id).unwrap().norm_l2() < 1e-12);
            assert!(m.apply_matrix_free(&id).unwrap().norm_l2() < 1e-12);
            assert!(m.trace_preservation_defect() < 1e-12);
        }
    }

    #[test]
    fn rejects_mismatched_basis() {
        let p = ModelParams::hardcore(4, 2, 0.1, 1.0);
        let wrong = SectorBasis::hard_core(4, 1).unwrap();
        assert!(build_hamiltonian(&p, &wrong).is_err());
        let soft = SectorBasis::soft_core(4, 2).unwrap();
        assert!(build_lindblads(&p, &soft).is_err());
    }
}
