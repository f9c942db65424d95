//! Eigenbasis diagnostics of the bath Hamiltonian: eigenstate structure,
//! off-diagonal occupation matrix elements and occupation histograms.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::fock::BasisIndex;
use crate::hamiltonian::{build_cross_band_factor, ModelSpec, SparseOperator};
use crate::linalg::dense_symmetric_eigen;

/// Default cap on the bath dimension for full diagonalization.
pub const DEFAULT_EIGEN_CAP: usize = 8000;

/// Complete eigendecomposition of the bath Hamiltonian, ascending. Each
/// eigenvector has its largest-magnitude component positive.
#[derive(Debug, Clone)]
pub struct BathEigen {
    pub energies: Vec<f64>,
    /// Column `α` holds `C_n^α`.
    pub vectors: Mat<f64>,
    /// `ε_n = ⟨n|H|n⟩`.
    pub diagonal: Vec<f64>,
    /// Number of decoupled blocks the operator split into.
    pub blocks: usize,
}

impl BathEigen {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn component(&self, n: usize, alpha: usize) -> f64 {
        self.vectors[(n, alpha)]
    }

    /// Largest `‖H v − E v‖` over all eigenpairs.
    pub fn max_residual(&self, h: &SparseOperator) -> f64 {
        (0..self.dim())
            .into_par_iter()
            .map(|a| {
                let mut acc = 0.0;
                for i in 0..self.dim() {
                    let hv: f64 = h.row(i).map(|(j, v)| v * self.vectors[(j, a)]).sum();
                    let r = hv - self.energies[a] * self.vectors[(i, a)];
                    acc += r * r;
                }
                acc.sqrt()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Largest `|⟨α|β⟩ − δ_αβ|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.vectors.transpose() * &self.vectors;
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Index of the eigenvalue closest to `energy`.
    pub fn closest_to(&self, energy: f64) -> usize {
        let mut best = 0;
        for (i, e) in self.energies.iter().enumerate() {
            if (e - energy).abs() < (self.energies[best] - energy).abs() {
                best = i;
            }
        }
        best
    }

    /// Indices with `e0 <= E_α <= e1`.
    pub fn window(&self, e0: f64, e1: f64) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.energies[i] >= e0 && self.energies[i] <= e1).collect()
    }

    /// `n_αα` for one mode.
    pub fn diagonal_occupation(&self, basis: &BasisIndex, mode: usize, alpha: usize) -> f64 {
        basis
            .iter_bath()
            .enumerate()
            .map(|(n, occ)| occ[mode] as f64 * self.vectors[(n, alpha)].powi(2))
            .sum()
    }
}

/// Connected components of the operator's sparsity graph.
fn components(h: &SparseOperator) -> Vec<Vec<usize>> {
    let n = h.dim();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, j, _) in h.triplets() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[label[r]].push(i);
    }
    groups
}

/// Full diagonalization of a real symmetric bath operator. Decoupled blocks
/// (e.g. band-number sectors when `U⁰¹ = 0`) are solved separately.
pub fn eigensolve_bath(h: &SparseOperator, cap: usize) -> Result<BathEigen> {
    let d = h.dim();
    if d > cap {
        return Err(Error::DimensionOverflow { dim: d, cap });
    }
    let groups = components(h);
    let solved: Vec<(Vec<f64>, Mat<f64>)> = groups
        .par_iter()
        .map(|g| {
            let local: std::collections::HashMap<usize, usize> = g.iter().enumerate().map(|(k, &i)| (i, k)).collect();
            let mut m = Mat::<f64>::zeros(g.len(), g.len());
            for (k, &i) in g.iter().enumerate() {
                for (j, v) in h.row(i) {
                    m[(k, local[&j])] = v;
                }
            }
            dense_symmetric_eigen(&m)
        })
        .collect::<Result<_>>()?;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(d);
    for (b, (e, _)) in solved.iter().enumerate() {
        pairs.extend(e.iter().enumerate().map(|(k, &v)| (v, b, k)));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut vectors = Mat::<f64>::zeros(d, d);
    for (col, &(_, b, k)) in pairs.iter().enumerate() {
        let block = &solved[b].1;
        // Sign gauge: largest-magnitude component positive (first on ties).
        let mut pivot = 0;
        for r in 0..groups[b].len() {
            if block[(r, k)].abs() > block[(pivot, k)].abs() + 1e-12 {
                pivot = r;
            }
        }
        let sign = block[(pivot, k)].signum();
        for (r, &i) in groups[b].iter().enumerate() {
            vectors[(i, col)] = sign * block[(r, k)];
        }
    }
    let out = BathEigen {
        energies: pairs.iter().map(|p| p.0).collect(),
        vectors,
        diagonal: h.diagonal(),
        blocks: groups.len(),
    };
    let scale = h.norm_bound().max(1.0);
    let res = out.max_residual(h);
    if res > 1e-8 * scale {
        return Err(Error::EigenNotConverged(format!("eigen residual {res:.3e}")));
    }
    Ok(out)
}

/// Distribution of one eigenstate over the Fock basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenProfile {
    pub index: usize,
    pub energy: f64,
    /// `(ε_n, C_n^α)` for every basis ket.
    pub components: Vec<(f64, f64)>,
    pub participation_ratio: f64,
    /// `Σ|C_n|² ε_n`.
    pub energy_centroid: f64,
    /// `Σ|C_n|² (ε_n − centroid)²`, square-rooted.
    pub energy_width: f64,
    pub norm: f64,
}

pub fn eigenstate_profile(eig: &BathEigen, alpha: usize) -> Result<EigenProfile> {
    if alpha >= eig.dim() {
        return Err(Error::InvalidArgument(format!("eigenstate {alpha} outside {}", eig.dim())));
    }
    let components: Vec<(f64, f64)> = (0..eig.dim()).map(|n| (eig.diagonal[n], eig.component(n, alpha))).collect();
    let norm: f64 = components.iter().map(|(_, c)| c * c).sum();
    let ipr: f64 = components.iter().map(|(_, c)| c.powi(4)).sum();
    let centroid: f64 = components.iter().map(|(e, c)| c * c * e).sum();
    let spread: f64 = components.iter().map(|(e, c)| c * c * (e - centroid).powi(2)).sum();
    Ok(EigenProfile {
        index: alpha,
        energy: eig.energies[alpha],
        components,
        participation_ratio: 1.0 / ipr,
        energy_centroid: centroid,
        energy_width: spread.sqrt(),
        norm,
    })
}

/// Reference Fock ket `|16,10,0,4⟩` rescaled to `n_atoms`, rounding to the
/// nearest integers while keeping the total.
pub fn scaled_reference_ket(n_atoms: usize, bands: usize) -> Vec<u16> {
    let weights: &[f64] = if bands == 2 { &[16.0, 10.0, 0.0, 4.0] } else { &[1.0, 0.0] };
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w * n_atoms as f64 / total).collect();
    let mut ket: Vec<u16> = exact.iter().map(|x| x.round() as u16).collect();
    loop {
        let sum: usize = ket.iter().map(|&v| v as usize).sum();
        if sum == n_atoms {
            return ket;
        }
        // Adjust the entry with the largest rounding error in the needed direction.
        let (k, _) = exact
            .iter()
            .zip(&ket)
            .enumerate()
            .filter(|(_, (_, &v))| sum < n_atoms || v > 0)
            .map(|(k, (x, &v))| (k, if sum < n_atoms { x - v as f64 } else { v as f64 - x }))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if sum < n_atoms {
            ket[k] += 1;
        } else {
            ket[k] -= 1;
        }
    }
}

/// Statistics of `n_αβ = Σ_n n C_n^α C_n^β` over pairs `α < β` in a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffDiagStats {
    pub states: usize,
    pub pairs: usize,
    pub mean: f64,
    pub std: f64,
    /// `std / √pairs`.
    pub std_error: f64,
    /// Jackknife error of the mean, leaving out one eigenstate at a time
    /// (pairs sharing a state are correlated).
    pub jackknife_error: f64,
    pub mean_abs: f64,
    /// Mean of the diagonal elements `n_αα` in the window.
    pub diagonal_mean: f64,
}

impl OffDiagStats {
    /// `|mean| <= k · jackknife_error`.
    pub fn mean_consistent_with_zero(&self, k: f64) -> bool {
        self.mean.abs() <= k * self.jackknife_error
    }
}

/// Off-diagonal occupation statistics of `mode` over eigenstates with
/// energies in `[e0, e1]`.
pub fn offdiag_occupation_stats(eig: &BathEigen, basis: &BasisIndex, mode: usize, window: [f64; 2]) -> Result<OffDiagStats> {
    if basis.dim_bath() != eig.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim_bath(), got: eig.dim() });
    }
    if mode >= basis.modes() {
        return Err(Error::InvalidArgument(format!("mode {mode} outside {}", basis.modes())));
    }
    let idx = eig.window(window[0], window[1]);
    if idx.len() < 100 {
        return Err(Error::InsufficientData(format!("{} eigenstates in window (need 100)", idx.len())));
    }
    let d = eig.dim();
    let k = idx.len();
    let occ: Vec<f64> = basis.iter_bath().map(|o| o[mode] as f64).collect();
    let c = Mat::from_fn(d, k, |n, j| eig.vectors[(n, idx[j])]);
    let weighted = Mat::from_fn(d, k, |n, j| occ[n] * c[(n, j)]);
    let m = c.transpose() * &weighted;
    let mut vals = Vec::with_capacity(k * (k - 1) / 2);
    let mut row_sums = vec![0.0; k];
    let mut diag = 0.0;
    for a in 0..k {
        diag += m[(a, a)];
        for b in a + 1..k {
            vals.push(m[(a, b)]);
            row_sums[a] += m[(a, b)];
            row_sums[b] += m[(a, b)];
        }
    }
    let pairs = vals.len();
    let total: f64 = vals.iter().sum();
    let mean = total / pairs as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (pairs as f64 - 1.0);
    let kf = k as f64;
    let reduced = (kf - 1.0) * (kf - 2.0) / 2.0;
    let loo: Vec<f64> = row_sums.iter().map(|r| (total - r) / reduced).collect();
    let loo_mean = loo.iter().sum::<f64>() / kf;
    let jack_var = (kf - 1.0) / kf * loo.iter().map(|v| (v - loo_mean).powi(2)).sum::<f64>();
    Ok(OffDiagStats {
        states: k,
        pairs,
        mean,
        std: var.sqrt(),
        std_error: (var / pairs as f64).sqrt(),
        jackknife_error: jack_var.sqrt(),
        mean_abs: vals.iter().map(|v| v.abs()).sum::<f64>() / pairs as f64,
        diagonal_mean: diag / k as f64,
    })
}

/// Energy window of `count` eigenvalues centred on index `center`.
pub fn window_around(eig: &BathEigen, center: usize, count: usize) -> [f64; 2] {
    let d = eig.dim();
    let count = count.min(d);
    let lo = center.saturating_sub(count / 2).min(d - count);
    [eig.energies[lo], eig.energies[lo + count - 1]]
}

/// Mean spacing of adjacent eigenvalues.
pub fn mean_level_spacing(energies: &[f64]) -> f64 {
    let n = energies.len();
    if n < 2 {
        return 0.0;
    }
    (energies[n - 1] - energies[0]) / (n - 1) as f64
}

/// `δ² = Tr V² / 𝒩` for the cross-band perturbation `V`.
pub fn perturbation_strength(spec: &ModelSpec, basis: &BasisIndex) -> Result<f64> {
    let v = build_cross_band_factor(spec, basis)?;
    let trace: f64 = v.triplets().map(|(_, _, x)| x * x).sum();
    Ok(trace / v.dim() as f64)
}

/// Band-mixing scales of the bath model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingScales {
    /// Mean level spacing with `U⁰¹ = 0`.
    pub spacing: f64,
    /// `Tr V² / 𝒩`.
    pub delta_sq: f64,
    /// `Δ² / δ²`.
    pub spacing_sq_over_delta_sq: f64,
    /// `δ² / Δ`.
    pub delta_sq_over_spacing: f64,
}

pub fn mixing_scales(spec: &ModelSpec, cap: usize) -> Result<MixingScales> {
    let basis = spec.basis()?;
    let mut free = spec.clone();
    free.params.u01 = 0.0;
    let h0 = crate::hamiltonian::build_bath_factor(&free, &basis)?;
    let eig = eigensolve_bath(&h0, cap)?;
    let spacing = mean_level_spacing(&eig.energies);
    let delta_sq = perturbation_strength(spec, &basis)?;
    Ok(MixingScales {
        spacing,
        delta_sq,
        spacing_sq_over_delta_sq: spacing * spacing / delta_sq,
        delta_sq_over_spacing: delta_sq / spacing,
    })
}

/// `Σ_α |A_α|² n_αα` for a bath ket `n0`: the relaxed value of `⟨n̂⟩`.
pub fn diagonal_ensemble_occupation(eig: &BathEigen, basis: &BasisIndex, initial: &[u16], mode: usize) -> Result<f64> {
    let n0 = basis.rank_bath(initial)?;
    Ok((0..eig.dim())
        .map(|a| eig.component(n0, a).powi(2) * eig.diagonal_occupation(basis, mode, a))
        .sum())
}

/// One histogram bin with the fitted normal density at its centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub center: f64,
    pub width: f64,
    pub count: usize,
    pub density: f64,
    pub gaussian: f64,
}

/// Normal fit to the samples of a time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub variance: f64,
    pub samples: usize,
    /// Samples divided by the integrated autocorrelation time.
    pub effective_samples: f64,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Sarle's bimodality coefficient; above 5/9 suggests bimodality.
    pub bimodality: f64,
    pub bins: Vec<HistogramBin>,
}

impl GaussianFit {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn is_unimodal(&self) -> bool {
        self.bimodality <= 5.0 / 9.0
    }

    /// Unimodal and not rejected by the chi-square test at level `alpha`
    /// (false when the test had no degrees of freedom).
    pub fn is_gaussian(&self, alpha: f64) -> bool {
        self.is_unimodal() && self.p_value > alpha
    }
}

/// `1 + 2 Σ ρ_k`, summed while the autocorrelation stays positive.
pub fn integrated_autocorrelation(x: &[f64]) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for k in 1..n / 2 {
        let c: f64 = (0..n - k).map(|i| (x[i] - mean) * (x[i + k] - mean)).sum::<f64>() / (n as f64 * var);
        if c <= 0.0 {
            break;
        }
        tau += 2.0 * c;
    }
    tau
}

fn normal_cdf(x: f64, mean: f64, std: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-(x - mean) / (std * std::f64::consts::SQRT_2))
}

/// Histogram of `values` (Freedman–Diaconis bins) with a moment-matched
/// normal fit and a chi-square goodness-of-fit test. Counts are rescaled to
/// the effective sample size since time-series samples are correlated.
pub fn gaussian_fit(values: &[f64]) -> Result<GaussianFit> {
    let n = values.len();
    if n < 200 {
        return Err(Error::InsufficientData(format!("{n} samples (need 200)")));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    if !(m2 > 0.0) {
        return Err(Error::Fit("zero variance".into()));
    }
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
    let variance = m2 * nf / (nf - 1.0);
    let std = variance.sqrt();
    let skew = m3 / m2.powf(1.5) * (nf * (nf - 1.0)).sqrt() / (nf - 2.0);
    let excess = ((nf + 1.0) * (m4 / (m2 * m2) - 3.0) + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0));
    let bimodality = (skew * skew + 1.0) / (excess + 3.0 * (nf - 1.0).powi(2) / ((nf - 2.0) * (nf - 3.0)));

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (nf - 1.0);
        let i = pos.floor() as usize;
        let f = pos - i as f64;
        sorted[i] + f * (sorted[(i + 1).min(n - 1)] - sorted[i])
    };
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let iqr = q(0.75) - q(0.25);
    let h = if iqr > 0.0 { 2.0 * iqr / nf.cbrt() } else { (hi - lo) / 10.0 };
    let nbins = (((hi - lo) / h).ceil() as usize).clamp(1, 200);
    let width = (hi - lo) / nbins as f64;
    let mut counts = vec![0usize; nbins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(nbins - 1);
        counts[b] += 1;
    }
    let bins: Vec<HistogramBin> = counts
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            let center = lo + (b as f64 + 0.5) * width;
            HistogramBin {
                center,
                width,
                count: c,
                density: c as f64 / (nf * width),
                gaussian: (-(center - mean).powi(2) / (2.0 * variance)).exp()
                    / (std * (2.0 * std::f64::consts::PI).sqrt()),
            }
        })
        .collect();

    let tau = integrated_autocorrelation(values);
    let effective = (nf / tau).max(1.0);
    let scale = effective / nf;
    // Expected counts with open outer bins; adjacent bins merged until each
    // expects at least five effective samples.
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for b in 0..nbins {
        let left = if b == 0 { f64::NEG_INFINITY } else { lo + b as f64 * width };
        let right = if b + 1 == nbins { f64::INFINITY } else { lo + (b + 1) as f64 * width };
        obs += counts[b] as f64 * scale;
        exp += effective * (normal_cdf(right, mean, std) - normal_cdf(left, mean, std));
        if exp >= 5.0 {
            groups.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match groups.last_mut() {
            Some(g) => {
                g.0 += obs;
                g.1 += exp;
            }
            None => groups.push((obs, exp)),
        }
    }
    let chi_square: f64 = groups.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = groups.len().saturating_sub(3);
    // Too few effective samples for any degree of freedom: no test possible.
    let p_value = if dof == 0 {
        f64::NAN
    } else {
        1.0 - ChiSquared::new(dof as f64).map_err(|e| Error::Fit(e.to_string()))?.cdf(chi_square)
    };
    Ok(GaussianFit {
        mean,
        variance,
        samples: n,
        effective_samples: effective,
        chi_square,
        dof,
        p_value,
        bimodality,
        bins,
    })
}

/// Histogram fit of a time series restricted to `[t0, t1]`.
pub fn occupation_histogram(series: &crate::series::TimeSeries, window: [f64; 2]) -> Result<GaussianFit> {
    gaussian_fit(&series.window(window[0], window[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DensePropagator, QuantumState};
    use crate::hamiltonian::build_bath_factor;
    use crate::orbitals::HubbardParams;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn spec(n: usize, u01: Option<f64>) -> ModelSpec {
        let mut p = HubbardParams::reference(n);
        if let Some(u) = u01 {
            p.u01 = u;
        }
        ModelSpec::two_band(p, n)
    }

    fn solve(s: &ModelSpec) -> (BasisIndex, SparseOperator, BathEigen) {
        let basis = s.basis().unwrap();
        let h = build_bath_factor(s, &basis).unwrap();
        let eig = eigensolve_bath(&h, DEFAULT_EIGEN_CAP).unwrap();
        (basis, h, eig)
    }

    #[test]
    fn single_atom_levels_are_band_energies_split_by_tunneling() {
        let s = spec(1, None);
        let (_, _, eig) = solve(&s);
        let p = &s.params;
        let mut expected = vec![p.e[0] - p.j[0], p.e[0] + p.j[0], p.e[1] - p.j[1], p.e[1] + p.j[1]];
        expected.sort_by(f64::total_cmp);
        for (a, b) in eig.energies.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(eig.blocks, 2);
    }

    #[test]
    fn decomposition_is_orthonormal_and_trace_preserving() {
        for u01 in [None, Some(0.0)] {
            let s = spec(8, u01);
            let (_, h, eig) = solve(&s);
            assert!(eig.orthonormality_error() < 1e-8);
            assert!(eig.max_residual(&h) < 1e-8);
            let tr: f64 = eig.diagonal.iter().sum();
            let sum: f64 = eig.energies.iter().sum();
            assert!(((tr - sum) / tr).abs() < 1e-6);
            assert!(eig.energies.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn band_sectors_decouple_without_cross_band_term() {
        let (_, _, eig) = solve(&spec(6, Some(0.0)));
        // Sectors of fixed upper-band number 0..=6.
        assert_eq!(eig.blocks, 7);
        let (_, _, mixed) = solve(&spec(6, None));
        // Pair transfer keeps upper-band parity.
        assert_eq!(mixed.blocks, 2);
    }

    #[test]
    fn dimension_cap() {
        let s = spec(12, None);
        let basis = s.basis().unwrap();
        let h = build_bath_factor(&s, &basis).unwrap();
        assert!(matches!(eigensolve_bath(&h, 100), Err(Error::DimensionOverflow { .. })));
    }

    #[test]
    fn scaled_reference_kets() {
        assert_eq!(scaled_reference_ket(30, 2), vec![16, 10, 0, 4]);
        assert_eq!(scaled_reference_ket(12, 2), vec![6, 4, 0, 2]);
        assert_eq!(scaled_reference_ket(30, 1), vec![30, 0]);
        for n in 1..60 {
            let k = scaled_reference_ket(n, 2);
            assert_eq!(k.iter().map(|&v| v as usize).sum::<usize>(), n);
        }
    }

    fn mid_profile(u01: f64) -> EigenProfile {
        let s = spec(12, Some(u01));
        let (basis, h, eig) = solve(&s);
        let n0 = basis.rank_bath(&scaled_reference_ket(12, 2)).unwrap();
        let alpha = eig.closest_to(h.get(n0, n0));
        eigenstate_profile(&eig, alpha).unwrap()
    }

    #[test]
    fn cross_band_coupling_delocalizes_eigenstates() {
        let free = mid_profile(0.0);
        let mixed = mid_profile(1.0 / 12.0);
        assert!((free.norm - 1.0).abs() < 1e-10 && (mixed.norm - 1.0).abs() < 1e-10);
        assert!(
            mixed.participation_ratio > free.participation_ratio,
            "PR {} vs {}",
            mixed.participation_ratio,
            free.participation_ratio
        );
        assert!(mixed.energy_width > free.energy_width);
    }

    #[test]
    fn offdiagonal_occupations_have_zero_mean() {
        let s = spec(12, Some(1.0 / 12.0));
        let (basis, _, eig) = solve(&s);
        let w = window_around(&eig, eig.dim() / 2, 200);
        for mode in 0..4 {
            let st = offdiag_occupation_stats(&eig, &basis, mode, w).unwrap();
            assert!(st.states >= 100);
            assert!(st.mean_consistent_with_zero(3.0), "mode {mode}: {st:?}");
        }
        assert!(matches!(
            offdiag_occupation_stats(&eig, &basis, 0, [eig.energies[0], eig.energies[10]]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn offdiagonal_elements_against_direct_sum() {
        let s = spec(7, None);
        let (basis, _, eig) = solve(&s);
        let w = [eig.energies[0], eig.energies[eig.dim() - 1]];
        let st = offdiag_occupation_stats(&eig, &basis, 1, w).unwrap();
        let mut vals = Vec::new();
        for a in 0..eig.dim() {
            for b in a + 1..eig.dim() {
                let nab: f64 = basis
                    .iter_bath()
                    .enumerate()
                    .map(|(n, o)| o[1] as f64 * eig.component(n, a) * eig.component(n, b))
                    .sum();
                vals.push(nab);
            }
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert_eq!(vals.len(), st.pairs);
        assert!((mean - st.mean).abs() < 1e-12);
        // Jackknife against explicit leave-one-out recomputation.
        let k = eig.dim();
        let loo: Vec<f64> = (0..k)
            .map(|skip| {
                let mut acc = (0.0, 0usize);
                let mut idx = 0;
                for a in 0..k {
                    for b in a + 1..k {
                        if a != skip && b != skip {
                            acc.0 += vals[idx];
                            acc.1 += 1;
                        }
                        idx += 1;
                    }
                }
                acc.0 / acc.1 as f64
            })
            .collect();
        let lm = loo.iter().sum::<f64>() / k as f64;
        let jack = ((k as f64 - 1.0) / k as f64 * loo.iter().map(|v| (v - lm).powi(2)).sum::<f64>()).sqrt();
        assert!((jack - st.jackknife_error).abs() < 1e-12 * jack.max(1.0));
    }

    #[test]
    fn level_spacing_shrinks_with_atom_number() {
        let d: Vec<f64> = [10, 14, 18]
            .iter()
            .map(|&n| mixing_scales(&spec(n, None), DEFAULT_EIGEN_CAP).unwrap().spacing)
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }

    #[test]
    fn perturbation_trace_matches_dense_square() {
        let s = spec(4, None);
        let basis = s.basis().unwrap();
        let v = build_cross_band_factor(&s, &basis).unwrap().to_dense();
        let v2 = &v * &v;
        let tr: f64 = (0..v.nrows()).map(|i| v2[(i, i)]).sum();
        let got = perturbation_strength(&s, &basis).unwrap();
        assert!((got - tr / v.nrows() as f64).abs() < 1e-12);
        let mut s0 = s.clone();
        s0.params.u01 = 0.0;
        assert_eq!(perturbation_strength(&s0, &basis).unwrap(), 0.0);
    }

    #[test]
    fn long_time_average_relaxes_to_diagonal_ensemble() {
        let s = spec(8, None);
        let (basis, h, eig) = solve(&s);
        let ket = scaled_reference_ket(8, 2);
        let n0 = basis.rank_bath(&ket).unwrap();
        let prop = DensePropagator::new(&h).unwrap();
        let mut amps = vec![Complex64::new(0.0, 0.0); basis.dim_bath()];
        amps[n0] = Complex64::new(1.0, 0.0);
        let mut psi = QuantumState::new(amps);
        let (steps, dt) = (100_000, 7.31);
        let mut acc = [0.0; 4];
        for _ in 0..steps {
            psi = prop.evolve(&psi, dt).unwrap();
            for (b, occ) in basis.iter_bath().enumerate() {
                let w = psi.amplitudes[b].norm_sqr();
                for m in 0..4 {
                    acc[m] += w * occ[m] as f64;
                }
            }
        }
        for m in 0..4 {
            let avg = acc[m] / steps as f64;
            let de = diagonal_ensemble_occupation(&eig, &basis, &ket, m).unwrap();
            assert!((avg - de).abs() <= 0.01 * de.max(1.0), "mode {m}: {avg} vs {de}");
        }
    }

    #[test]
    fn normal_samples_pass_and_sinusoid_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..4000).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 0.4 + 0.07 * z }).collect();
        let fit = gaussian_fit(&x).unwrap();
        assert!((fit.mean - 0.4).abs() < 0.01);
        assert!((fit.variance / 0.0049 - 1.0).abs() < 0.1);
        assert!(fit.is_gaussian(0.01), "{fit:?}");
        assert!((fit.effective_samples / 4000.0) > 0.5);

        let s: Vec<f64> = (0..5000).map(|i| (i as f64 * 0.1 * 0.21).sin()).collect();
        let fit = gaussian_fit(&s).unwrap();
        assert!(!fit.is_unimodal(), "bimodality {}", fit.bimodality);
        assert!(!fit.is_gaussian(0.01));
    }

    #[test]
    fn histogram_density_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let fit = gaussian_fit(&x).unwrap();
        let total: f64 = fit.bins.iter().map(|b| b.density * b.width).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(fit.bins.iter().map(|b| b.count).sum::<usize>(), 1000);
        assert!(matches!(gaussian_fit(&x[..150]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn autocorrelation_time_of_white_and_smooth_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let white: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(integrated_autocorrelation(&white) < 1.2);
        // AR(1) with coefficient φ has τ = (1 + φ)/(1 − φ).
        let phi: f64 = 0.9;
        let mut x = vec![0.0];
        for i in 1..200_000usize {
            let z: f64 = StandardNormal.sample(&mut rng);
            x.push(phi * x[i - 1] + z);
        }
        let tau = integrated_autocorrelation(&x);
        assert!((tau / 19.0 - 1.0).abs() < 0.15, "tau {tau}");
    }
}
