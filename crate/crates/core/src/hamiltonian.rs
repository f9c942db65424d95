//! Sparse assembly of the bath and probe-bath Hamiltonians.
//!
//! Normalization follows the lattice model literally: the on-site term is
//! `U n(n-1)` with no ½, the cross-band term is
//! `U⁰¹ Σ_r Σ_{l≠l'} (2 n_r^l n_r^{l'} + b_r^{l†} b_r^{l†} b_r^{l'} b_r^{l'})`,
//! and tunneling sums `r ≠ r'` over both directions without an extra
//! Hermitian-conjugate term.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::BasisIndex;
use crate::orbitals::{CouplingTensor, HubbardParams};

const PARALLEL_ROWS: usize = 4096;

/// Real symmetric operator in compressed-row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    /// Build from per-row `(column, value)` lists. Duplicates are summed,
    /// exact zeros dropped, columns sorted.
    pub fn from_rows(dim: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        assert_eq!(rows.len(), dim);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows = vec![Vec::new(); dim];
        for (r, c, v) in triplets {
            rows[r].push((c, v));
        }
        Self::from_rows(dim, rows)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_rows(dim, vec![Vec::new(); dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|A_ij - A_ji|` over stored entries.
    pub fn hermiticity_error(&self) -> f64 {
        self.triplets().map(|(i, j, v)| (v - self.get(j, i)).abs()).fold(0.0, f64::max)
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without the dimension check.
    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        let row = |i: usize| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += x[self.cols[k]] * self.vals[k];
            }
            acc
        };
        if self.dim >= PARALLEL_ROWS {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        } else {
            y.iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        }
    }

    /// `⟨x|A|x⟩`, real part (the operator is symmetric).
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.apply_into(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// `A ⊗ 1₂` with the identity as the least-significant factor.
    pub fn kron_identity2(&self) -> Self {
        let rows = (0..2 * self.dim)
            .map(|i| self.row(i / 2).map(|(j, v)| (2 * j + i % 2, v)).collect())
            .collect();
        Self::from_rows(2 * self.dim, rows)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let rows = (0..self.dim).map(|i| self.row(i).chain(other.row(i)).collect()).collect();
        Ok(Self::from_rows(self.dim, rows))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let rows = (0..self.dim).map(|i| self.row(i).map(|(j, v)| (j, v * factor)).collect()).collect();
        Self::from_rows(self.dim, rows)
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim).map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Dump as `row,col,value` CSV.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "row,col,value")?;
        for (i, j, v) in self.triplets() {
            writeln!(out, "{i},{j},{v:.17e}")?;
        }
        Ok(())
    }
}

/// Lattice model definition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub params: HubbardParams,
    pub n_atoms: usize,
    /// 1 or 2.
    pub bands: usize,
}

impl ModelSpec {
    pub fn two_band(params: HubbardParams, n_atoms: usize) -> Self {
        Self { params, n_atoms, bands: 2 }
    }

    /// Lowest band only; band-1 interactions are switched off.
    pub fn single_band(mut params: HubbardParams, n_atoms: usize) -> Self {
        params.u[1] = 0.0;
        params.u01 = 0.0;
        Self { params, n_atoms, bands: 1 }
    }

    pub fn modes(&self) -> usize {
        2 * self.bands
    }

    pub fn validate(&self) -> Result<()> {
        match self.bands {
            1 => {
                if self.params.u[1] != 0.0 || self.params.u01 != 0.0 {
                    return Err(Error::InvalidArgument(
                        "single-band model requires U1 = U01 = 0".into(),
                    ));
                }
            }
            2 => {}
            b => return Err(Error::InvalidArgument(format!("band count {b} (expected 1 or 2)"))),
        }
        if self.n_atoms == 0 {
            return Err(Error::InvalidArgument("no bath atoms".into()));
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<BasisIndex> {
        self.validate()?;
        BasisIndex::new(self.n_atoms, self.modes())
    }

    fn check_basis(&self, basis: &BasisIndex) -> Result<()> {
        self.validate()?;
        if basis.n_atoms() != self.n_atoms || basis.modes() != self.modes() {
            return Err(Error::BasisMismatch(format!(
                "model has N = {}, M = {}; basis has N = {}, M = {}",
                self.n_atoms,
                self.modes(),
                basis.n_atoms(),
                basis.modes()
            )));
        }
        Ok(())
    }
}

/// Scratch helper applying ladder operators to an occupation vector.
struct Ladder<'a> {
    basis: &'a BasisIndex,
    scratch: Vec<u16>,
}

impl<'a> Ladder<'a> {
    fn new(basis: &'a BasisIndex) -> Self {
        Self { basis, scratch: vec![0; basis.modes()] }
    }

    /// `b_to† b_from |n⟩ = amp |n'⟩`; returns `(rank(n'), amp)`.
    fn hop(&mut self, n: &[u16], to: usize, from: usize) -> Option<(usize, f64)> {
        if to == from {
            return (n[to] > 0).then(|| (self.basis.rank_bath_unchecked(n), n[to] as f64));
        }
        if n[from] == 0 {
            return None;
        }
        self.scratch.copy_from_slice(n);
        let amp = ((n[from] as f64) * (n[to] as f64 + 1.0)).sqrt();
        self.scratch[from] -= 1;
        self.scratch[to] += 1;
        Some((self.basis.rank_bath_unchecked(&self.scratch), amp))
    }

    /// `b_to† b_to† b_from b_from |n⟩`.
    fn pair(&mut self, n: &[u16], to: usize, from: usize) -> Option<(usize, f64)> {
        if n[from] < 2 {
            return None;
        }
        self.scratch.copy_from_slice(n);
        let (a, b) = (n[from] as f64, n[to] as f64);
        let amp = (a * (a - 1.0) * (b + 1.0) * (b + 2.0)).sqrt();
        self.scratch[from] -= 2;
        self.scratch[to] += 2;
        Some((self.basis.rank_bath_unchecked(&self.scratch), amp))
    }
}

fn assemble<F>(dim: usize, f: F) -> SparseOperator
where
    F: Fn(usize, &mut Vec<(usize, f64)>) + Sync,
{
    let rows: Vec<Vec<(usize, f64)>> = (0..dim)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            f(i, &mut row);
            row
        })
        .collect();
    SparseOperator::from_rows(dim, rows)
}

/// Which pieces of the bath Hamiltonian to assemble.
#[derive(Debug, Clone, Copy)]
struct BathTerms {
    single_particle: bool,
    same_band: bool,
    cross_band: bool,
}

fn bath_factor(spec: &ModelSpec, basis: &BasisIndex, terms: BathTerms) -> Result<SparseOperator> {
    spec.check_basis(basis)?;
    let p = &spec.params;
    let bands = basis.bands();
    Ok(assemble(basis.dim_bath(), |b, row| {
        let n = basis.occupations(b);
        let mut ladder = Ladder::new(basis);
        let mut diag = 0.0;
        for r in 0..2 {
            for l in 0..bands {
                let mode = basis.mode(r, l).unwrap();
                let occ = n[mode] as f64;
                if terms.single_particle {
                    diag += p.e[l] * occ;
                    let other = basis.mode(1 - r, l).unwrap();
                    if let Some((t, amp)) = ladder.hop(n, mode, other) {
                        row.push((t, -p.j[l] * amp));
                    }
                }
                if terms.same_band {
                    diag += p.u[l] * occ * (occ - 1.0);
                }
            }
            if terms.cross_band && bands == 2 {
                let (m0, m1) = (basis.mode(r, 0).unwrap(), basis.mode(r, 1).unwrap());
                // Σ_{l≠l'} 2 n^l n^{l'} counts both orderings.
                diag += 4.0 * p.u01 * n[m0] as f64 * n[m1] as f64;
                for (to, from) in [(m0, m1), (m1, m0)] {
                    if let Some((t, amp)) = ladder.pair(n, to, from) {
                        row.push((t, p.u01 * amp));
                    }
                }
            }
        }
        row.push((b, diag));
    }))
}

/// Bath Hamiltonian on the bath factor alone (dimension `dim_bath`).
pub fn build_bath_factor(spec: &ModelSpec, basis: &BasisIndex) -> Result<SparseOperator> {
    bath_factor(spec, basis, BathTerms { single_particle: true, same_band: true, cross_band: true })
}

/// Cross-band interaction alone (the `U⁰¹` term) on the bath factor.
pub fn build_cross_band_factor(spec: &ModelSpec, basis: &BasisIndex) -> Result<SparseOperator> {
    bath_factor(spec, basis, BathTerms { single_particle: false, same_band: false, cross_band: true })
}

/// Bath Hamiltonian acting as the identity on the probe.
pub fn build_bath(spec: &ModelSpec, basis: &BasisIndex) -> Result<SparseOperator> {
    Ok(build_bath_factor(spec, basis)?.kron_identity2())
}

/// Probe hopping plus the probe-bath contact coupling
/// `g_I Σ C^{lm}_{αβγδ} b_α^{l†} b_β^m a_γ† a_δ`.
pub fn build_coupling(spec: &ModelSpec, basis: &BasisIndex, c: &CouplingTensor) -> Result<SparseOperator> {
    spec.check_basis(basis)?;
    let herm = c.hermiticity_error();
    if herm > 1e-10 {
        return Err(Error::NonHermitian(format!("coupling tensor asymmetry {herm:.3e}")));
    }
    let p = &spec.params;
    let bands = basis.bands();
    let g_i = p.g_i;
    Ok(assemble(basis.dim(), |i, row| {
        let (b, delta) = (i / 2, i % 2);
        row.push((2 * b + (1 - delta), -p.j_s));
        if g_i == 0.0 {
            return;
        }
        let n = basis.occupations(b);
        let mut ladder = Ladder::new(basis);
        for l in 0..bands {
            for m in 0..bands {
                for alpha in 0..2 {
                    for beta in 0..2 {
                        let (to, from) = (basis.mode(alpha, l).unwrap(), basis.mode(beta, m).unwrap());
                        let Some((t, amp)) = ladder.hop(n, to, from) else { continue };
                        for gamma in 0..2 {
                            let coeff = c.get(l, m, alpha, beta, gamma, delta);
                            if coeff != 0.0 {
                                row.push((2 * t + gamma, g_i * coeff * amp));
                            }
                        }
                    }
                }
            }
        }
    }))
}

/// Full coupled Hamiltonian `H_T ⊗ 1 + coupling`.
pub fn build_full(spec: &ModelSpec, basis: &BasisIndex) -> Result<SparseOperator> {
    build_bath(spec, basis)?.add(&build_coupling(spec, basis, &spec.params.c)?)
}

/// Bath Hamiltonian plus free probe hopping (coupling switched off).
pub fn build_decoupled(spec: &ModelSpec, basis: &BasisIndex) -> Result<SparseOperator> {
    let mut off = *spec;
    off.params.g_i = 0.0;
    build_bath(spec, basis)?.add(&build_coupling(&off, basis, &off.params.c)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{FockKet, Probe};
    use faer::Mat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(n: usize) -> ModelSpec {
        ModelSpec::two_band(HubbardParams::reference(n), n)
    }

    fn idx(basis: &BasisIndex, occ: &[u16]) -> usize {
        basis.rank_bath(occ).unwrap()
    }

    #[test]
    fn single_atom_tunneling_element() {
        let s = spec(1);
        let basis = s.basis().unwrap();
        let h = build_bath_factor(&s, &basis).unwrap();
        let a = idx(&basis, &[1, 0, 0, 0]);
        let b = idx(&basis, &[0, 0, 1, 0]);
        assert_eq!(h.get(a, b), -0.153);
    }

    #[test]
    fn doubly_occupied_diagonal() {
        let s = spec(2);
        let basis = s.basis().unwrap();
        let h = build_bath_factor(&s, &basis).unwrap();
        let a = idx(&basis, &[2, 0, 0, 0]);
        let p = s.params;
        assert!((h.get(a, a) - (2.0 * p.e[0] + 2.0 * p.u[0])).abs() < 1e-14);
    }

    #[test]
    fn pair_transfer_element() {
        let s = spec(2);
        let basis = s.basis().unwrap();
        let h = build_bath_factor(&s, &basis).unwrap();
        let a = idx(&basis, &[0, 2, 0, 0]);
        let b = idx(&basis, &[2, 0, 0, 0]);
        assert!((h.get(a, b) - 2.0 * s.params.u01).abs() < 1e-14);
        assert!((h.get(b, a) - 2.0 * s.params.u01).abs() < 1e-14);
    }

    #[test]
    fn zero_coupling_leaves_probe_hopping() {
        let mut s = spec(3);
        s.params.g_i = 0.0;
        let basis = s.basis().unwrap();
        let h = build_coupling(&s, &basis, &s.params.c).unwrap();
        assert_eq!(h.nnz(), basis.dim());
        for b in 0..basis.dim_bath() {
            assert_eq!(h.get(2 * b, 2 * b + 1), -s.params.j_s);
            assert_eq!(h.get(2 * b + 1, 2 * b), -s.params.j_s);
        }
    }

    #[test]
    fn diagonal_coupling_element() {
        let s = spec(4);
        let basis = s.basis().unwrap();
        let h = build_coupling(&s, &basis, &s.params.c).unwrap();
        let occ = [2u16, 1, 0, 1];
        let i = basis.rank(&FockKet::new(occ.to_vec(), Probe::Left)).unwrap();
        let c = &s.params.c;
        let mut expected = 0.0;
        for l in 0..2 {
            for a in 0..2 {
                expected += s.params.g_i * c.get(l, l, a, a, 0, 0) * occ[basis.mode(a, l).unwrap()] as f64;
            }
        }
        assert!((h.get(i, i) - expected).abs() < 1e-13);
    }

    #[test]
    fn rejects_asymmetric_tensor() {
        let s = spec(2);
        let basis = s.basis().unwrap();
        let mut c = s.params.c;
        c.values[0][1][0][0][0][1] += 0.1;
        assert!(matches!(build_coupling(&s, &basis, &c), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn rejects_mismatched_basis() {
        let s = spec(3);
        let basis = BasisIndex::new(4, 4).unwrap();
        assert!(matches!(build_bath(&s, &basis), Err(Error::BasisMismatch(_))));
        let single = ModelSpec::single_band(HubbardParams::reference(3), 3);
        assert!(build_bath(&single, &BasisIndex::new(3, 4).unwrap()).is_err());
        let mut bad = single;
        bad.params.u01 = 0.1;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn apply_checks_dimension_and_is_linear() {
        let s = spec(3);
        let basis = s.basis().unwrap();
        let h = build_full(&s, &basis).unwrap();
        assert!(matches!(
            h.apply(&vec![Complex64::new(0.0, 0.0); 3]),
            Err(Error::DimensionMismatch { .. })
        ));
        let zero = vec![Complex64::new(0.0, 0.0); h.dim()];
        assert!(h.apply(&zero).unwrap().iter().all(|z| z.norm() == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Complex64> = (0..h.dim()).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let y: Vec<Complex64> = (0..h.dim()).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let a = Complex64::new(0.3, -1.2);
        let lhs = h.apply(&x.iter().zip(&y).map(|(p, q)| a * p + q).collect::<Vec<_>>()).unwrap();
        let hx = h.apply(&x).unwrap();
        let hy = h.apply(&y).unwrap();
        for k in 0..h.dim() {
            assert!((lhs[k] - (a * hx[k] + hy[k])).norm() < 1e-12);
        }
    }

    // Independent oracle: ladder operators as dense matrices on the
    // truncated product space (n_max = N per mode), Hamiltonian built by
    // matrix algebra, then projected on the fixed-N sector.
    struct DenseOracle {
        modes: usize,
        cutoff: usize,
    }

    impl DenseOracle {
        fn dim(&self) -> usize {
            (self.cutoff + 1).pow(self.modes as u32) * 2
        }


        fn index(&self, occ: &[u16], probe: usize) -> usize {
            let mut i = 0;
            for &n in occ {
                i = i * (self.cutoff + 1) + n as usize;
            }
            2 * i + probe
        }

        fn kron(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
            Mat::from_fn(a.nrows() * b.nrows(), a.ncols() * b.ncols(), |i, j| {
                a[(i / b.nrows(), j / b.ncols())] * b[(i % b.nrows(), j % b.ncols())]
            })
        }

        fn local_annihilation(&self) -> Mat<f64> {
            let d = self.cutoff + 1;
            Mat::from_fn(d, d, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 })
        }

        fn bath_annihilation(&self, mode: usize) -> Mat<f64> {
            let d = self.cutoff + 1;
            let mut op = Mat::<f64>::identity(1, 1);
            for m in 0..self.modes {
                let factor = if m == mode { self.local_annihilation() } else { Mat::identity(d, d) };
                op = Self::kron(&op, &factor);
            }
            op
        }

        /// `|γ⟩⟨δ|` on the probe factor.
        fn probe_transition(gamma: usize, delta: usize) -> Mat<f64> {
            Mat::from_fn(2, 2, |i, j| if i == gamma && j == delta { 1.0 } else { 0.0 })
        }

        fn hamiltonian(&self, spec: &ModelSpec) -> Mat<f64> {
            let p = &spec.params;
            let bands = spec.bands;
            let b: Vec<Mat<f64>> = (0..self.modes).map(|m| self.bath_annihilation(m)).collect();
            let bd: Vec<Mat<f64>> = b.iter().map(|m| m.transpose().to_owned()).collect();
            let mode = |r: usize, l: usize| r * bands + l;
            let bath_dim = (self.cutoff + 1).pow(self.modes as u32);
            let id = Mat::<f64>::identity(bath_dim, bath_dim);
            let mut ht = Mat::<f64>::zeros(bath_dim, bath_dim);
            for r in 0..2 {
                for l in 0..bands {
                    let (x, y) = (mode(r, l), mode(1 - r, l));
                    let n = &bd[x] * &b[x];
                    ht = ht - p.j[l] * (&bd[x] * &b[y]);
                    ht = ht + p.u[l] * (&n * (&n - &id));
                    ht = ht + p.e[l] * &n;
                }
                if bands == 2 {
                    for (l, lp) in [(0, 1), (1, 0)] {
                        let (x, y) = (mode(r, l), mode(r, lp));
                        let nn = (&bd[x] * &b[x]) * (&bd[y] * &b[y]);
                        let pair = &bd[x] * &bd[x] * &b[y] * &b[y];
                        ht = ht + p.u01 * (2.0 * nn + pair);
                    }
                }
            }
            let sigma_x = Self::probe_transition(0, 1) + Self::probe_transition(1, 0);
            let mut h = Self::kron(&ht, &Mat::identity(2, 2)) - p.j_s * Self::kron(&id, &sigma_x);
            for l in 0..bands {
                for m in 0..bands {
                    for a in 0..2 {
                        for bb in 0..2 {
                            let hop = &bd[mode(a, l)] * &b[mode(bb, m)];
                            for g in 0..2 {
                                for d in 0..2 {
                                    let coeff = p.g_i * p.c.get(l, m, a, bb, g, d);
                                    h = h + coeff * Self::kron(&hop, &Self::probe_transition(g, d));
                                }
                            }
                        }
                    }
                }
            }
            h
        }
    }

    fn check_dense_equivalence(spec: &ModelSpec) {
        let basis = spec.basis().unwrap();
        let sparse = build_full(spec, &basis).unwrap();
        let oracle = DenseOracle { modes: spec.modes(), cutoff: spec.n_atoms };
        let dense = oracle.hamiltonian(spec);
        let map: Vec<usize> = (0..basis.dim())
            .map(|i| oracle.index(basis.occupations(i / 2), i % 2))
            .collect();
        for i in 0..basis.dim() {
            for j in 0..basis.dim() {
                let d = dense[(map[i], map[j])];
                assert!((sparse.get(i, j) - d).abs() < 1e-12, "({i},{j}): {} vs {d}", sparse.get(i, j));
            }
        }
        // Number conservation: nothing leaks out of the fixed-N sector.
        let inside: std::collections::HashSet<usize> = map.iter().copied().collect();
        for &j in &map {
            for i in 0..oracle.dim() {
                if !inside.contains(&i) {
                    assert!(dense[(i, j)].abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn sparse_matches_dense_operator_algebra() {
        for n in 1..=3 {
            check_dense_equivalence(&spec(n));
        }
        for n in 1..=5 {
            let mut p = HubbardParams::reference(n);
            p.u[0] = 0.1 / n as f64;
            check_dense_equivalence(&ModelSpec::single_band(p, n));
        }
    }

    #[test]
    fn assembled_operators_are_symmetric() {
        for n in 1..=5 {
            let s = spec(n);
            let basis = s.basis().unwrap();
            let h = build_full(&s, &basis).unwrap();
            assert!(h.hermiticity_error() < 1e-12);
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let x: Vec<Complex64> = (0..h.dim()).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            let y: Vec<Complex64> = (0..h.dim()).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            let hx = h.apply(&x).unwrap();
            let hy = h.apply(&y).unwrap();
            let xhy: Complex64 = x.iter().zip(&hy).map(|(a, b)| a.conj() * b).sum();
            let yhx: Complex64 = y.iter().zip(&hx).map(|(a, b)| a.conj() * b).sum();
            assert!((xhy - yhx.conj()).norm() < 1e-10);
            let xhx: Complex64 = x.iter().zip(&hx).map(|(a, b)| a.conj() * b).sum();
            assert!(xhx.im.abs() < 1e-10);
        }
    }

    #[test]
    fn basis_ket_columns_match_dense() {
        let s = spec(3);
        let basis = s.basis().unwrap();
        let h = build_full(&s, &basis).unwrap();
        let dense = h.to_dense();
        for i in 0..h.dim() {
            let mut e = vec![Complex64::new(0.0, 0.0); h.dim()];
            e[i] = Complex64::new(1.0, 0.0);
            let col = h.apply(&e).unwrap();
            for k in 0..h.dim() {
                assert_eq!(col[k].re, dense[(k, i)]);
            }
        }
    }

    #[test]
    fn csv_dump_lists_every_entry() {
        let s = spec(1);
        let basis = s.basis().unwrap();
        let h = build_full(&s, &basis).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), h.nnz() + 1);
    }
}
