//! Diagonalization of the ladder generator and eigenmode bookkeeping.
//!
//! Two routes produce the same [`EigenmodeSet`]: a single dense
//! eigendecomposition of the full D²×D² matrix, and a block route that first
//! splits the ladder space into total-momentum sectors. Residuals are measured
//! in whichever coordinates were diagonalized; the sector embeddings are
//! isometric, so they equal the full-space residuals.

mod blocks;
pub mod metrics;
pub mod qc;

use std::sync::OnceLock;

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;

use crate::basis::SectorBasis;
use crate::liouvillian::{trace, unvectorize, vectorize, DensityMatrix, Superoperator};
use crate::{Error, Result, C64};
use blocks::{momentum_sectors, MomentumEmbedding, Orbits};

pub use metrics::{bound_pair_fraction, compute_metrics, diag_off_weights, ModeClass, ModeMetrics};
pub use qc::{confinement_length, qc_gap, QcGapReport};

/// Default cap on D² for dense diagonalization.
pub const DEFAULT_DENSE_LIMIT: usize = 20_000;

/// Eigenvalues with modulus below this count as steady.
pub const STEADY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct DiagOptions {
    pub dense_limit: usize,
    /// Residual tolerance relative to ‖M‖_F.
    pub rel_tol: f64,
}

impl Default for DiagOptions {
    fn default() -> Self {
        Self { dense_limit: DEFAULT_DENSE_LIMIT, rel_tol: 1e-8 }
    }
}

#[derive(Debug, Clone)]
enum Embedding {
    Full,
    Momentum(MomentumEmbedding),
}

#[derive(Debug)]
struct Sector {
    embedding: Embedding,
    matrix: Mat<C64>,
    vectors: Mat<C64>,
    values: Vec<C64>,
    inverse: OnceLock<Mat<C64>>,
}

impl Sector {
    fn inverse(&self) -> &Mat<C64> {
        self.inverse.get_or_init(|| self.vectors.partial_piv_lu().inverse())
    }
}

/// Eigenvalues sorted by ascending |Re λ| with unit-norm right eigenvectors.
#[derive(Debug)]
pub struct EigenmodeSet {
    d: usize,
    eigenvalues: Vec<C64>,
    residuals: Vec<f64>,
    diag_tol: f64,
    frobenius: f64,
    orbits: Option<Orbits>,
    sectors: Vec<Sector>,
    /// Global mode index → (sector, column).
    locate: Vec<(usize, usize)>,
}

/// Coefficients of an initial state in the right-eigenmode basis.
#[derive(Debug, Clone)]
pub struct EigenExpansion {
    pub coefficients: Vec<C64>,
    /// Largest ‖V‖₁‖V⁻¹‖₁ over sectors.
    pub condition: f64,
    /// ‖Σ c_α ρ_α − ρ₀‖ in the ladder 2-norm.
    pub reconstruction_error: f64,
}

fn check_limit(m: &Superoperator, opts: &DiagOptions) -> Result<()> {
    let d2 = m.ladder_dim();
    if d2 > opts.dense_limit {
        return Err(Error::SizeLimit { d2, limit: opts.dense_limit });
    }
    Ok(())
}

fn eigen_sector(embedding: Embedding, matrix: Mat<C64>) -> Result<Sector> {
    let n = matrix.nrows();
    if n == 0 {
        return Ok(Sector { embedding, matrix, vectors: Mat::zeros(0, 0), values: vec![], inverse: OnceLock::new() });
    }
    let evd = matrix.eigen().map_err(|e| Error::SolverFailure(format!("{e:?}")))?;
    let s = evd.S();
    let values: Vec<C64> = (0..n).map(|j| s[j]).collect();
    let mut vectors = evd.U().to_owned();
    for j in 0..n {
        let mut col = vectors.col_mut(j);
        let norm = col.norm_l2();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::SolverFailure(format!("degenerate eigenvector {j}")));
        }
        // unit norm, largest component real positive
        let mut big = 0;
        for i in 0..n {
            if col[i].norm() > col[big].norm() * (1.0 + 1e-12) {
                big = i;
            }
        }
        let phase = col[big].conj() / col[big].norm();
        for i in 0..n {
            col[i] = col[i] * phase / norm;
        }
    }
    Ok(Sector { embedding, matrix, vectors, values, inverse: OnceLock::new() })
}

fn residuals(sector: &Sector) -> Vec<f64> {
    let n = sector.values.len();
    if n == 0 {
        return vec![];
    }
    let mv = &sector.matrix * &sector.vectors;
    (0..n)
        .map(|j| {
            let mut r = 0.0;
            for i in 0..n {
                r += (mv[(i, j)] - sector.values[j] * sector.vectors[(i, j)]).norm_sqr();
            }
            r.sqrt()
        })
        .collect()
}

fn finish(m: &Superoperator, opts: &DiagOptions, orbits: Option<Orbits>, sectors: Vec<Sector>) -> EigenmodeSet {
    let frobenius = m.frobenius_norm();
    let mut entries = Vec::with_capacity(m.ladder_dim());
    let mut res_by = Vec::with_capacity(sectors.len());
    for (si, s) in sectors.iter().enumerate() {
        res_by.push(residuals(s));
        for (c, &v) in s.values.iter().enumerate() {
            entries.push((v, si, c));
        }
    }
    entries.sort_by(|a, b| {
        a.0.re
            .abs()
            .total_cmp(&b.0.re.abs())
            .then(a.0.im.total_cmp(&b.0.im))
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    EigenmodeSet {
        d: m.dim(),
        eigenvalues: entries.iter().map(|e| e.0).collect(),
        residuals: entries.iter().map(|e| res_by[e.1][e.2]).collect(),
        diag_tol: opts.rel_tol * frobenius,
        frobenius,
        orbits,
        locate: entries.iter().map(|e| (e.1, e.2)).collect(),
        sectors,
    }
}

/// Dense eigendecomposition of the full ladder matrix.
pub fn diagonalize_dense(m: &Superoperator, opts: &DiagOptions) -> Result<EigenmodeSet> {
    check_limit(m, opts)?;
    let sector = eigen_sector(Embedding::Full, m.to_dense())?;
    Ok(finish(m, opts, None, vec![sector]))
}

/// Eigendecomposition sector by sector in total momentum; same spectrum and
/// modes as [`diagonalize_dense`] at a fraction of the cost.
pub fn diagonalize(m: &Superoperator, basis: &SectorBasis, opts: &DiagOptions) -> Result<EigenmodeSet> {
    check_limit(m, opts)?;
    if basis.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: basis.dim() });
    }
    let orbits = Orbits::new(basis);
    let mt = m.sparse().transpose();
    let mut sectors = Vec::new();
    for emb in momentum_sectors(&orbits) {
        let b = emb.block(&orbits, &mt);
        sectors.push(eigen_sector(Embedding::Momentum(emb), b)?);
    }
    Ok(finish(m, opts, Some(orbits), sectors))
}

impl EigenmodeSet {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Sector dimension D.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn residual_norms(&self) -> &[f64] {
        &self.residuals
    }

    pub fn diag_tol(&self) -> f64 {
        self.diag_tol
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn residuals_ok(&self) -> bool {
        self.residuals.iter().all(|&r| r <= self.diag_tol)
    }

    pub fn steady_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&a| self.eigenvalues[a].norm() <= STEADY_TOL).collect()
    }

    /// `|Re λ₁|` for the slowest non-steady mode, given a unique steady state.
    pub fn liouvillian_gap(&self) -> Option<f64> {
        if self.steady_indices().len() != 1 {
            return None;
        }
        self.eigenvalues.iter().find(|z| z.norm() > STEADY_TOL).map(|z| z.re.abs())
    }

    /// Total-momentum index q (K = 2πq/L) of a mode, if the block route was used.
    pub fn momentum_index(&self, alpha: usize) -> Option<usize> {
        match &self.sectors[self.locate[alpha].0].embedding {
            Embedding::Momentum(e) => Some(e.q),
            Embedding::Full => None,
        }
    }

    /// Unit-norm right eigenvector as a flat ladder vector.
    pub fn mode(&self, alpha: usize) -> Vec<C64> {
        let (si, c) = self.locate[alpha];
        let s = &self.sectors[si];
        let col: Vec<C64> = (0..s.vectors.nrows()).map(|i| s.vectors[(i, c)]).collect();
        match &s.embedding {
            Embedding::Full => col,
            Embedding::Momentum(e) => {
                let mut out = vec![C64::default(); self.d * self.d];
                e.embed(self.orbits.as_ref().expect("orbits present"), &col, &mut out);
                out
            }
        }
    }

    /// The eigenmode as a D×D matrix `ρ_α`.
    pub fn mode_matrix(&self, alpha: usize) -> Mat<C64> {
        unvectorize(&self.mode(alpha), self.d)
    }

    fn project(&self, s: &Sector, v: &[C64]) -> Vec<C64> {
        match &s.embedding {
            Embedding::Full => v.to_vec(),
            Embedding::Momentum(e) => e.project(self.orbits.as_ref().expect("orbits present"), v),
        }
    }

    fn embed_into(&self, s: &Sector, coords: &[C64], out: &mut [C64]) {
        match &s.embedding {
            Embedding::Full => out.iter_mut().zip(coords).for_each(|(o, c)| *o += c),
            Embedding::Momentum(e) => e.embed(self.orbits.as_ref().expect("orbits present"), coords, out),
        }
    }

    /// Solve `V c = vec(ρ₀)` sector by sector.
    pub fn expansion(&self, rho0: &Mat<C64>) -> Result<EigenExpansion> {
        if rho0.nrows() != self.d || rho0.ncols() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: rho0.nrows() });
        }
        let v = vectorize(rho0);
        let mut per_sector: Vec<Vec<C64>> = Vec::with_capacity(self.sectors.len());
        let mut condition: f64 = 1.0;
        let mut recon = vec![C64::default(); v.len()];
        for s in &self.sectors {
            let n = s.values.len();
            if n == 0 {
                per_sector.push(vec![]);
                continue;
            }
            let p = self.project(s, &v);
            let inv = s.inverse();
            let c: Vec<C64> = (0..n).map(|i| (0..n).map(|j| inv[(i, j)] * p[j]).sum()).collect();
            condition = condition.max(one_norm(&s.vectors) * one_norm(inv));
            let back: Vec<C64> = (0..n).map(|i| (0..n).map(|j| s.vectors[(i, j)] * c[j]).sum()).collect();
            self.embed_into(s, &back, &mut recon);
            per_sector.push(c);
        }
        let coefficients = self.locate.iter().map(|&(si, c)| per_sector[si][c]).collect();
        let reconstruction_error = recon.iter().zip(&v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        Ok(EigenExpansion { coefficients, condition, reconstruction_error })
    }

    /// `Σ_α c_α e^{λ_α t} ρ_α` as a flat ladder vector.
    pub fn propagate(&self, exp: &EigenExpansion, t: f64) -> Vec<C64> {
        let mut per_sector: Vec<Vec<C64>> = self.sectors.iter().map(|s| vec![C64::default(); s.values.len()]).collect();
        for (a, &(si, c)) in self.locate.iter().enumerate() {
            per_sector[si][c] = exp.coefficients[a] * (self.eigenvalues[a] * t).exp();
        }
        let mut out = vec![C64::default(); self.d * self.d];
        for (s, c) in self.sectors.iter().zip(&per_sector) {
            let n = s.values.len();
            let coords: Vec<C64> = (0..n).map(|i| (0..n).map(|j| s.vectors[(i, j)] * c[j]).sum()).collect();
            self.embed_into(s, &coords, &mut out);
        }
        out
    }

    /// Check of the general spectral properties of a dephasing Liouvillian.
    pub fn verify_appendix_a(&self) -> Result<AppendixAReport> {
        let max_re = self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let conjugation_defect = conjugation_defect(&self.eigenvalues);
        let mut max_nonzero_trace: f64 = 0.0;
        for a in 0..self.len() {
            if self.eigenvalues[a].norm() > 1e-8 {
                max_nonzero_trace = max_nonzero_trace.max(trace(&self.mode_matrix(a)).norm());
            }
        }
        let steady = self.steady_indices();
        let steady_defect = if steady.len() == 1 {
            let v = self.mode(steady[0]);
            let d = self.d;
            let target = 1.0 / (d as f64).sqrt();
            let overlap: C64 = (0..d).map(|i| v[i * d + i]).sum::<C64>() * target;
            let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C64::new(1.0, 0.0) };
            let mut r = 0.0;
            for (f, z) in v.iter().enumerate() {
                let want = if f / d == f % d { phase * target } else { C64::default() };
                r += (z - want).norm_sqr();
            }
            r.sqrt()
        } else {
            f64::INFINITY
        };
        let mut biorthogonality_defect: f64 = 0.0;
        for s in &self.sectors {
            biorthogonality_defect = biorthogonality_defect.max(biorthogonality(s)?);
        }
        Ok(AppendixAReport {
            max_re,
            conjugation_defect,
            max_nonzero_trace,
            steady_count: steady.len(),
            steady_defect,
            biorthogonality_defect,
            liouvillian_gap: self.liouvillian_gap(),
        })
    }

    /// Evolved state with Hermitization; returns the state and the removed anti-Hermitian part.
    pub fn evolve(&self, exp: &EigenExpansion, t: f64) -> (DensityMatrix, f64) {
        let m = unvectorize(&self.propagate(exp, t), self.d);
        let asym = crate::liouvillian::hermitian_defect(&m);
        let h = Mat::from_fn(self.d, self.d, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
        (DensityMatrix::from_matrix_unchecked(h), asym)
    }
}

fn one_norm(m: &Mat<C64>) -> f64 {
    (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Largest distance from any eigenvalue to the nearest conjugate of another.
pub fn conjugation_defect(values: &[C64]) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re));
    let res: Vec<f64> = idx.iter().map(|&i| values[i].re).collect();
    let mut worst: f64 = 0.0;
    for z in values {
        let target = z.conj();
        // widen the real-part window until a candidate is found
        let mut w = 1e-7;
        let best = loop {
            let lo = res.partition_point(|&r| r < target.re - w);
            let hi = res.partition_point(|&r| r <= target.re + w);
            let best = idx[lo..hi].iter().map(|&i| (values[i] - target).norm()).fold(f64::INFINITY, f64::min);
            if best <= w || w > 1e3 {
                break best;
            }
            w *= 10.0;
        };
        worst = worst.max(best);
    }
    worst
}

fn biorthogonality(s: &Sector) -> Result<f64> {
    let n = s.values.len();
    if n == 0 {
        return Ok(0.0);
    }
    let adj = s.matrix.adjoint().to_owned();
    let evd = adj.eigen().map_err(|e| Error::SolverFailure(format!("{e:?}")))?;
    let sl = evd.S();
    let left = evd.U();
    let gram = left.adjoint() * &s.vectors;
    let mut worst: f64 = 0.0;
    for b in 0..n {
        let mu = sl[b].conj();
        let ln = left.col(b).norm_l2();
        for a in 0..n {
            if (s.values[a] - mu).norm() > 1e-6 {
                worst = worst.max(gram[(b, a)].norm() / ln);
            }
        }
    }
    Ok(worst)
}

/// Measured violations of the general spectral properties.
#[derive(Debug, Clone)]
pub struct AppendixAReport {
    /// max Re λ (must not be positive).
    pub max_re: f64,
    /// Spectrum closure under complex conjugation.
    pub conjugation_defect: f64,
    /// max |Tr ρ_α| over modes with λ_α ≠ 0.
    pub max_nonzero_trace: f64,
    pub steady_count: usize,
    /// ‖ρ_ss − e^{iθ} I/√D‖ for the unit-norm steady mode.
    pub steady_defect: f64,
    /// max |⟨l_β|r_α⟩| for λ_α ≠ λ_β, unit-norm left and right vectors.
    pub biorthogonality_defect: f64,
    pub liouvillian_gap: Option<f64>,
}

impl AppendixAReport {
    pub fn passes(&self) -> bool {
        self.max_re <= 1e-9
            && self.conjugation_defect <= 1e-8
            && self.max_nonzero_trace <= 1e-8
            && self.steady_count == 1
            && self.steady_defect <= 1e-8
            && self.biorthogonality_defect <= 1e-8
    }
}

/// Group eigenvalues that are closer than `tol`, transitively.
pub fn degenerate_clusters(values: &[C64], tol: f64) -> Vec<usize> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re));
    for (pos, &a) in idx.iter().enumerate() {
        for &b in &idx[pos + 1..] {
            if values[b].re - values[a].re > tol {
                break;
            }
            if (values[a] - values[b]).norm() < tol {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    (0..n).map(|a| find(&mut parent, a)).collect()
}

/// Multiset distance: greedy nearest matching after sorting; `INFINITY` on size mismatch.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut bs: Vec<(C64, bool)> = b.iter().map(|&z| (z, false)).collect();
    bs.sort_by(|x, y| x.0.re.total_cmp(&y.0.re));
    let mut worst: f64 = 0.0;
    let mut a_sorted = a.to_vec();
    a_sorted.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    for z in a_sorted {
        let mut best = (f64::INFINITY, usize::MAX);
        let start = bs.partition_point(|(w, _)| w.re < z.re - 1e-6);
        for (k, (w, used)) in bs.iter().enumerate().skip(start) {
            if w.re > z.re + 1e-6 && best.1 != usize::MAX {
                break;
            }
            if !used {
                let dist = (w - z).norm();
                if dist < best.0 {
                    best = (dist, k);
                }
            }
        }
        if best.1 == usize::MAX {
            // fall back to a global search
            for (k, (w, used)) in bs.iter().enumerate() {
                if !used && (w - z).norm() < best.0 {
                    best = ((w - z).norm(), k);
                }
            }
        }
        bs[best.1].1 = true;
        worst = worst.max(best.0);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::{assemble, ModelParams};

    #[test]
    fn block_route_matches_dense_route() {
        for p in [
            ModelParams::hardcore(5, 2, 0.3, 1.0),
            ModelParams::hardcore(6, 1, 0.2, 0.7),
            ModelParams::bose_hubbard(4, 2, 0.25, 1.0, 0.6),
        ] {
            let (b, m) = assemble(&p).unwrap();
            let opts = DiagOptions::default();
            let dense = diagonalize_dense(&m, &opts).unwrap();
            let blocked = diagonalize(&m, &b, &opts).unwrap();
            assert!(multiset_distance(dense.eigenvalues(), blocked.eigenvalues()) < 1e-9);
            assert!(blocked.residuals_ok() && dense.residuals_ok());
            for a in 0..blocked.len() {
                let v = blocked.mode(a);
                let mv = m.apply_vec(&v);
                let r: f64 = mv.iter().zip(&v).map(|(x, y)| (x - blocked.eigenvalues()[a] * y).norm_sqr()).sum::<f64>().sqrt();
                assert!((r - blocked.residual_norms()[a]).abs() < 1e-10);
                let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sorted_by_decay_rate_with_unique_steady_state() {
        let (b, m) = assemble(&ModelParams::hardcore(6, 2, 0.2, 1.0)).unwrap();
        let e = diagonalize(&m, &b, &DiagOptions::default()).unwrap();
        assert!(e.eigenvalues()[0].norm() < STEADY_TOL);
        assert!(e.eigenvalues().windows(2).all(|w| w[0].re.abs() <= w[1].re.abs()));
        assert_eq!(e.steady_indices().len(), 1);
        assert!(e.liouvillian_gap().unwrap() > 0.0);
    }

    #[test]
    fn size_limit_is_enforced() {
        let (b, m) = assemble(&ModelParams::hardcore(6, 3, 0.1, 1.0)).unwrap();
        let opts = DiagOptions { dense_limit: 100, ..Default::default() };
        assert!(matches!(diagonalize(&m, &b, &opts), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn expansion_reconstructs_and_relaxes() {
        let (b, m) = assemble(&ModelParams::hardcore(5, 2, 0.3, 1.0)).unwrap();
        let e = diagonalize(&m, &b, &DiagOptions::default()).unwrap();
        let d = b.dim();
        let rho0 = Mat::from_fn(d, d, |i, j| if i == j { C64::new((i + 1) as f64, 0.0) } else { C64::new(0.01, 0.02 * (i as f64 - j as f64)) });
        let tr = trace(&rho0);
        let rho0 = Mat::from_fn(d, d, |i, j| rho0[(i, j)] / tr);
        let x = e.expansion(&rho0).unwrap();
        assert!(x.reconstruction_error < 1e-10);
        let (late, _) = e.evolve(&x, 60.0);
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { 1.0 / d as f64 } else { 0.0 };
                assert!((late.matrix()[(i, j)] - C64::new(want, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn clusters_are_transitive() {
        let v = [C64::new(0.0, 0.0), C64::new(5e-10, 0.0), C64::new(9.9e-10, 0.0), C64::new(1.0, 0.0)];
        let c = degenerate_clusters(&v, 1e-9);
        assert_eq!(c[0], c[2]);
        assert_ne!(c[0], c[3]);
    }
}
