//! Single-particle problem of the split harmonic trap and the lattice
//! parameters derived from it.
//!
//! Units: lengths in the oscillator length `l_ho`, energies in `ħω₀`, bath
//! mass set to one. The bath Hamiltonian on the grid is
//! `h = -½ d²/dx² + ½x² + V₀ exp(-x²/2σ²)`, discretized with second-order
//! central differences and Dirichlet walls just outside the grid.
//!
//! Because the trap is even, every eigenproblem is split into its even and
//! odd parity sectors on the half grid `x > 0`. That keeps the near-degenerate
//! tunneling doublets numerically separate even when the barrier is so high
//! that their splitting drops below machine precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymTridiagonal;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Uniform grid `x_min..=x_max` with `n_points` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        let g = Self { x_min, x_max, n_points };
        g.validate()?;
        Ok(g)
    }

    /// Symmetric grid `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_points)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 3 {
            return Err(Error::InvalidGrid(format!("n_points = {} < 3", self.n_points)));
        }
        if !(self.x_max > self.x_min) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "x_max ({}) must exceed x_min ({})",
                self.x_max, self.x_min
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    fn is_symmetric(&self) -> bool {
        (self.x_min + self.x_max).abs() <= 1e-12 * (self.x_max - self.x_min)
    }

    /// Trapezoid rule for samples on this grid.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        let n = self.n_points;
        let interior: f64 = (1..n - 1).map(&f).sum();
        self.spacing() * (interior + 0.5 * (f(0) + f(n - 1)))
    }
}

impl Default for Grid1D {
    fn default() -> Self {
        Self { x_min: -8.0, x_max: 8.0, n_points: 2048 }
    }
}

/// Harmonic trap split by a Gaussian barrier:
/// `V(x) = ½ k x² + V₀ exp(-x²/2σ_b²)` with `k = harmonic_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapPotential {
    pub barrier_height: f64,
    pub barrier_width: f64,
    /// Prefactor of the harmonic part; 1 for the bath species.
    #[serde(default = "one")]
    pub harmonic_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl TrapPotential {
    pub fn new(barrier_height: f64, barrier_width: f64) -> Result<Self> {
        let p = Self { barrier_height, barrier_width, harmonic_scale: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn harmonic() -> Self {
        Self { barrier_height: 0.0, barrier_width: 1.0, harmonic_scale: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.barrier_height >= 0.0) {
            return Err(Error::InvalidPotential(format!("V0 = {} < 0", self.barrier_height)));
        }
        if !(self.barrier_width > 0.0) {
            return Err(Error::InvalidPotential(format!("sigma = {} <= 0", self.barrier_width)));
        }
        if !(self.harmonic_scale > 0.0) {
            return Err(Error::InvalidPotential("harmonic prefactor must be positive".into()));
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        let s = self.barrier_width;
        0.5 * self.harmonic_scale * x * x + self.barrier_height * (-x * x / (2.0 * s * s)).exp()
    }
}

/// Which trap the heavier probe atom sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeTrap {
    /// Same potential function as the bath atoms.
    Shared,
    /// Same trap frequency: the harmonic part is scaled by the mass ratio,
    /// the barrier is not.
    #[default]
    MassScaled,
}

impl ProbeTrap {
    pub fn potential(self, bath: &TrapPotential, mass_ratio: f64) -> TrapPotential {
        match self {
            ProbeTrap::Shared => *bath,
            ProbeTrap::MassScaled => TrapPotential {
                harmonic_scale: bath.harmonic_scale * mass_ratio,
                ..*bath
            },
        }
    }
}

/// One eigenpair of the grid Hamiltonian.
#[derive(Debug, Clone)]
pub struct Eigenstate {
    pub energy: f64,
    pub wavefunction: Vec<f64>,
}

/// Discretized single-particle Hamiltonian `-(1/2μ) d²/dx² + V(x)` for a
/// particle of mass `μ` (in bath masses).
#[derive(Debug, Clone, Copy)]
pub struct GridHamiltonian {
    pub potential: TrapPotential,
    pub grid: Grid1D,
    pub mass_ratio: f64,
}

impl GridHamiltonian {
    fn hopping(&self) -> f64 {
        let h = self.grid.spacing();
        1.0 / (2.0 * self.mass_ratio * h * h)
    }

    /// Apply the discretized Hamiltonian to a grid function.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.grid.n_points;
        let c = self.hopping();
        (0..n)
            .map(|i| {
                let left = if i > 0 { f[i - 1] } else { 0.0 };
                let right = if i + 1 < n { f[i + 1] } else { 0.0 };
                -c * (left - 2.0 * f[i] + right) + self.potential.value(self.grid.x(i)) * f[i]
            })
            .collect()
    }

    /// `∫ a(x) (h b)(x) dx` with the trapezoid rule.
    pub fn matrix_element(&self, a: &[f64], b: &[f64]) -> f64 {
        let hb = self.apply(b);
        self.grid.integrate(|i| a[i] * hb[i])
    }

    /// Parity-sector tridiagonal problem on the half grid `x >= 0`. Returns
    /// the matrix, the first full-grid index it covers, and the scale of the
    /// first component (non-unit only for the even sector of odd grids).
    fn sector(&self, even: bool) -> (SymTridiagonal, usize, f64) {
        let n = self.grid.n_points;
        let c = self.hopping();
        let v = |i: usize| self.potential.value(self.grid.x(i));
        if n % 2 == 0 {
            let start = n / 2;
            let len = n - start;
            let mut diag: Vec<f64> = (start..n).map(|i| 2.0 * c + v(i)).collect();
            diag[0] += if even { -c } else { c };
            (SymTridiagonal::new(diag, vec![-c; len - 1]), start, 1.0)
        } else {
            let center = n / 2;
            if even {
                let diag: Vec<f64> = (center..n).map(|i| 2.0 * c + v(i)).collect();
                let mut off = vec![-c; n - center - 1];
                // ψ(-h) = ψ(h); symmetrized with w₀ = ψ₀/√2.
                off[0] = -std::f64::consts::SQRT_2 * c;
                (SymTridiagonal::new(diag, off), center, std::f64::consts::SQRT_2)
            } else {
                let diag: Vec<f64> = (center + 1..n).map(|i| 2.0 * c + v(i)).collect();
                let len = diag.len();
                (SymTridiagonal::new(diag, vec![-c; len - 1]), center + 1, 1.0)
            }
        }
    }
}

/// Lowest `n_states` eigenpairs of the trap of a particle with the given
/// mass ratio, ascending in energy, normalized with the trapezoid rule.
pub fn solve_eigenstates(
    potential: &TrapPotential,
    grid: &Grid1D,
    mass_ratio: f64,
    n_states: usize,
) -> Result<Vec<Eigenstate>> {
    grid.validate()?;
    potential.validate()?;
    if !(mass_ratio > 0.0) {
        return Err(Error::InvalidArgument(format!("mass ratio {mass_ratio} must be positive")));
    }
    if n_states > grid.n_points {
        return Err(Error::InvalidArgument(format!(
            "requested {n_states} states on a {}-point grid",
            grid.n_points
        )));
    }
    if !grid.is_symmetric() {
        return Err(Error::InvalidGrid("grid must be symmetric about x = 0".into()));
    }
    let ham = GridHamiltonian { potential: *potential, grid: *grid, mass_ratio };
    let n = grid.n_points;

    // The k-th state alternates parity: even, odd, even, ...
    let mut states = Vec::with_capacity(n_states);
    let mut sectors = [None, None];
    for k in 0..n_states {
        let even = k % 2 == 0;
        let slot = &mut sectors[usize::from(!even)];
        let (tri, start, first_scale) = slot.get_or_insert_with(|| ham.sector(even)).clone();
        let lambda = tri.eigenvalue(k / 2);
        let w = tri.eigenvector(lambda);
        let tw = tri.matvec(&w);
        let residual = tw.iter().zip(&w).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        let scale = tri.diag.iter().fold(1.0_f64, |m, d| m.max(d.abs()));
        if !(residual <= 1e-8 * scale) {
            return Err(Error::EigenNotConverged(format!(
                "state {k}: residual {residual:.3e}"
            )));
        }
        let mut psi = vec![0.0; n];
        for (j, wj) in w.iter().enumerate() {
            let i = start + j;
            let value = if j == 0 { wj * first_scale } else { *wj };
            psi[i] = value;
            let mirror = n - 1 - i;
            if mirror != i {
                psi[mirror] = if even { value } else { -value };
            }
        }
        let norm = grid.integrate(|i| psi[i] * psi[i]).sqrt();
        psi.iter_mut().for_each(|p| *p /= norm);
        // Fix an overall sign: first significant lobe on the right positive.
        if let Some(&p) = psi[n / 2..].iter().find(|p| p.abs() > 1e-3) {
            if p < 0.0 {
                psi.iter_mut().for_each(|v| *v = -*v);
            }
        }
        let edge = psi[0].abs().max(psi[n - 1].abs());
        if edge > 1e-6 {
            return Err(Error::GridTooNarrow { state: k, amplitude: edge });
        }
        states.push(Eigenstate { energy: lambda, wavefunction: psi });
    }
    Ok(states)
}

/// Localized orbitals of one tunneling doublet, `[left, right]`.
pub fn localize_doublet(symmetric: &[f64], antisymmetric: &[f64], grid: &Grid1D, right_min: usize) -> [Vec<f64>; 2] {
    let n = grid.n_points;
    // Orient the odd state so that s + a piles up on the right.
    let overlap_right: f64 = (n / 2..n).map(|i| symmetric[i] * antisymmetric[i]).sum();
    let a_sign = if overlap_right >= 0.0 { 1.0 } else { -1.0 };
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let mut left: Vec<f64> = symmetric.iter().zip(antisymmetric).map(|(s, a)| inv * (s - a_sign * a)).collect();
    let mut right: Vec<f64> = symmetric.iter().zip(antisymmetric).map(|(s, a)| inv * (s + a_sign * a)).collect();
    if right[right_min] < 0.0 {
        left.iter_mut().for_each(|v| *v = -*v);
        right.iter_mut().for_each(|v| *v = -*v);
    }
    [left, right]
}

fn right_well_minimum(potential: &TrapPotential, grid: &Grid1D) -> usize {
    (grid.n_points / 2..grid.n_points)
        .min_by(|&a, &b| potential.value(grid.x(a)).total_cmp(&potential.value(grid.x(b))))
        .unwrap_or(grid.n_points - 1)
}

fn check_doublets(states: &[Eigenstate], bands: usize) -> Result<()> {
    if states.len() < 2 * bands + 1 {
        return Err(Error::DoubletIdentification(format!(
            "need {} eigenstates to identify {bands} doublet(s), got {}",
            2 * bands + 1,
            states.len()
        )));
    }
    let gap = states[2].energy - states[1].energy;
    for band in 0..bands {
        let split = states[2 * band + 1].energy - states[2 * band].energy;
        let next_gap = states[2 * band + 2].energy - states[2 * band + 1].energy;
        if !(split < 0.5 * gap) || !(split < 0.5 * next_gap) {
            return Err(Error::DoubletIdentification(format!(
                "band {band}: splitting {split:.4} is not small against gaps {gap:.4}/{next_gap:.4}"
            )));
        }
    }
    Ok(())
}

/// Grid-sampled localized orbitals of both species.
#[derive(Debug, Clone)]
pub struct OrbitalSet {
    pub grid: Grid1D,
    pub potential: TrapPotential,
    pub probe_potential: TrapPotential,
    pub mass_ratio: f64,
    /// Bath orbitals indexed `[well][band]`.
    pub bath: [[Vec<f64>; 2]; 2],
    /// Probe orbitals indexed by well.
    pub probe: [Vec<f64>; 2],
    /// Eigenvalues behind the bath doublets (lowest five states).
    pub bath_energies: Vec<f64>,
    pub probe_energies: Vec<f64>,
}

impl OrbitalSet {
    /// Solve both species and localize their doublets.
    pub fn compute(potential: &TrapPotential, grid: &Grid1D, mass_ratio: f64, probe_trap: ProbeTrap) -> Result<Self> {
        let bath_states = solve_eigenstates(potential, grid, 1.0, 5)?;
        let probe_potential = probe_trap.potential(potential, mass_ratio);
        let probe_states = solve_eigenstates(&probe_potential, grid, mass_ratio, 3)?;
        localize(&bath_states, &probe_states, potential, &probe_potential, grid, mass_ratio)
    }

    pub fn bath_hamiltonian(&self) -> GridHamiltonian {
        GridHamiltonian { potential: self.potential, grid: self.grid, mass_ratio: 1.0 }
    }

    pub fn probe_hamiltonian(&self) -> GridHamiltonian {
        GridHamiltonian { potential: self.probe_potential, grid: self.grid, mass_ratio: self.mass_ratio }
    }

    /// Fraction of `|f|²` on the `x > 0` half of the grid.
    pub fn right_fraction(&self, f: &[f64]) -> f64 {
        let total = self.grid.integrate(|i| f[i] * f[i]);
        let right = self.grid.integrate(|i| if self.grid.x(i) > 0.0 { f[i] * f[i] } else { 0.0 });
        right / total
    }

    /// Largest deviation from orthonormality inside each species.
    pub fn orthonormality_error(&self) -> f64 {
        let bath: Vec<&Vec<f64>> = self.bath.iter().flatten().collect();
        let probe: Vec<&Vec<f64>> = self.probe.iter().collect();
        let mut worst = 0.0_f64;
        for set in [bath, probe] {
            for (i, a) in set.iter().enumerate() {
                for (j, b) in set.iter().enumerate() {
                    let ov = self.grid.integrate(|k| a[k] * b[k]);
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((ov - target).abs());
                }
            }
        }
        worst
    }
}

/// Turn eigenstates of both species into localized orbitals: states 0,1
/// form band 0, states 2,3 band 1, and the probe uses its lowest doublet.
pub fn localize(
    bath_states: &[Eigenstate],
    probe_states: &[Eigenstate],
    potential: &TrapPotential,
    probe_potential: &TrapPotential,
    grid: &Grid1D,
    mass_ratio: f64,
) -> Result<OrbitalSet> {
    check_doublets(bath_states, 2)?;
    check_doublets(probe_states, 1)?;
    let bath_min = right_well_minimum(potential, grid);
    let probe_min = right_well_minimum(probe_potential, grid);
    let [l0, r0] = localize_doublet(&bath_states[0].wavefunction, &bath_states[1].wavefunction, grid, bath_min);
    let [l1, r1] = localize_doublet(&bath_states[2].wavefunction, &bath_states[3].wavefunction, grid, bath_min);
    let probe = localize_doublet(&probe_states[0].wavefunction, &probe_states[1].wavefunction, grid, probe_min);
    Ok(OrbitalSet {
        grid: *grid,
        potential: *potential,
        probe_potential: *probe_potential,
        mass_ratio,
        bath: [[l0, l1], [r0, r1]],
        probe,
        bath_energies: bath_states.iter().map(|s| s.energy).collect(),
        probe_energies: probe_states.iter().map(|s| s.energy).collect(),
    })
}

/// Overlap integrals `C[l][m][α][β][γ][δ] = ∫ φ_α^l φ_β^m ψ_γ ψ_δ dx`
/// between bath orbitals (band, well) and probe orbitals (well).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingTensor {
    pub values: [[[[[[f64; 2]; 2]; 2]; 2]; 2]; 2],
}

impl CouplingTensor {
    pub fn zeros() -> Self {
        Self { values: [[[[[[0.0; 2]; 2]; 2]; 2]; 2]; 2] }
    }

    pub fn get(&self, l: usize, m: usize, alpha: usize, beta: usize, gamma: usize, delta: usize) -> f64 {
        self.values[l][m][alpha][beta][gamma][delta]
    }

    pub fn from_orbitals(orbitals: &OrbitalSet) -> Self {
        let mut c = Self::zeros();
        let grid = &orbitals.grid;
        for l in 0..2 {
            for m in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        for g in 0..2 {
                            for d in 0..2 {
                                let (fa, fb) = (&orbitals.bath[a][l], &orbitals.bath[b][m]);
                                let (pg, pd) = (&orbitals.probe[g], &orbitals.probe[d]);
                                c.values[l][m][a][b][g][d] = grid.integrate(|i| fa[i] * fb[i] * pg[i] * pd[i]);
                            }
                        }
                    }
                }
            }
        }
        c
    }

    /// Build a mirror-symmetric tensor from its values with `α = L`; the
    /// entries with `α = R` follow from `L ↔ R` applied to every index.
    fn mirror_completed(left: [[[[[f64; 2]; 2]; 2]; 2]; 2]) -> Self {
        let mut c = Self::zeros();
        for l in 0..2 {
            for m in 0..2 {
                for b in 0..2 {
                    for g in 0..2 {
                        for d in 0..2 {
                            let v = left[l][m][b][g][d];
                            c.values[l][m][LEFT][b][g][d] = v;
                            c.values[l][m][RIGHT][1 - b][1 - g][1 - d] = v;
                        }
                    }
                }
            }
        }
        c
    }

    /// Tensor of the reference trap (V₀ = 10, σ_b = 0.1, probe twice as
    /// heavy in a trap of the same frequency), evaluated on the default grid.
    pub fn reference() -> Self {
        Self::mirror_completed(REFERENCE_C_LEFT)
    }

    /// Largest violation of `C[l][m][α][β][γ][δ] = C[m][l][β][α][δ][γ]`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for l in 0..2 {
            for m in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        for g in 0..2 {
                            for d in 0..2 {
                                let diff = self.values[l][m][a][b][g][d] - self.values[m][l][b][a][d][g];
                                worst = worst.max(diff.abs());
                            }
                        }
                    }
                }
            }
        }
        worst
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut c = *self;
        c.values.iter_mut().flatten().flatten().flatten().flatten().flatten().for_each(|v| *v *= factor);
        c
    }
}

// Indexed [l][m][β][γ][δ] for α = L.
const REFERENCE_C_LEFT: [[[[[f64; 2]; 2]; 2]; 2]; 2] = include!("reference_coupling.in");

/// Lattice parameters in units of ħω₀ (couplings multiply the overlaps in `c`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HubbardParams {
    /// Tunneling per band.
    pub j: [f64; 2],
    /// On-site energy per band (same in both wells).
    pub e: [f64; 2],
    /// Same-band on-site interaction per band.
    pub u: [f64; 2],
    pub u01: f64,
    /// Probe tunneling.
    pub j_s: f64,
    /// Probe-bath coupling.
    pub g_i: f64,
    pub c: CouplingTensor,
}

impl HubbardParams {
    /// Reference lattice parameters for `n_atoms` bath atoms: J⁰ = 0.153,
    /// J¹ = 0.226, E = 1.37/3.31, U⁰ = 2/N, U¹ = ¾U⁰, U⁰¹ = U⁰/2,
    /// J_s = 0.1, g_I = 2/N, and the reference overlap tensor.
    pub fn reference(n_atoms: usize) -> Self {
        let n = n_atoms as f64;
        let u0 = 2.0 / n;
        Self {
            j: [0.153, 0.226],
            e: [1.37, 3.31],
            u: [u0, 0.75 * u0],
            u01: 0.5 * u0,
            j_s: 0.1,
            g_i: 2.0 / n,
            c: CouplingTensor::reference(),
        }
    }
}

/// Derive every lattice parameter from the orbitals with bath contact
/// coupling `g` and probe-bath coupling `g_i`.
pub fn hubbard_params(orbitals: &OrbitalSet, g: f64, g_i: f64) -> HubbardParams {
    let bath = orbitals.bath_hamiltonian();
    let probe = orbitals.probe_hamiltonian();
    let grid = &orbitals.grid;
    let phi = &orbitals.bath;
    let mut j = [0.0; 2];
    let mut e = [0.0; 2];
    let mut u = [0.0; 2];
    for l in 0..2 {
        e[l] = bath.matrix_element(&phi[LEFT][l], &phi[LEFT][l]);
        j[l] = -bath.matrix_element(&phi[LEFT][l], &phi[RIGHT][l]);
        u[l] = g * grid.integrate(|i| phi[LEFT][l][i].powi(4));
    }
    let u01 = g * grid.integrate(|i| phi[LEFT][0][i].powi(2) * phi[LEFT][1][i].powi(2));
    let j_s = -probe.matrix_element(&orbitals.probe[LEFT], &orbitals.probe[RIGHT]);
    HubbardParams { j, e, u, u01, j_s, g_i, c: CouplingTensor::from_orbitals(orbitals) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_orbitals() -> OrbitalSet {
        let pot = TrapPotential::new(10.0, 0.1).unwrap();
        OrbitalSet::compute(&pot, &Grid1D::default(), 2.0, ProbeTrap::MassScaled).unwrap()
    }

    #[test]
    fn harmonic_spectrum() {
        let grid = Grid1D::symmetric(8.0, 2048).unwrap();
        let states = solve_eigenstates(&TrapPotential::harmonic(), &grid, 1.0, 4).unwrap();
        for (k, s) in states.iter().enumerate() {
            assert!((s.energy - (k as f64 + 0.5)).abs() < 1e-4, "E{k} = {}", s.energy);
        }
    }

    #[test]
    fn heavier_particle_halves_harmonic_level_spacing_in_shared_trap() {
        // ω ∝ 1/√μ for fixed spring constant.
        let grid = Grid1D::symmetric(8.0, 2048).unwrap();
        let states = solve_eigenstates(&TrapPotential::harmonic(), &grid, 2.0, 2).unwrap();
        let w = 1.0 / 2f64.sqrt();
        assert!((states[0].energy - 0.5 * w).abs() < 1e-4);
        assert!((states[1].energy - 1.5 * w).abs() < 1e-4);
    }

    #[test]
    fn odd_point_count_grid_matches_even() {
        let pot = TrapPotential::new(10.0, 0.1).unwrap();
        let a = solve_eigenstates(&pot, &Grid1D::symmetric(8.0, 2048).unwrap(), 1.0, 4).unwrap();
        let b = solve_eigenstates(&pot, &Grid1D::symmetric(8.0, 2049).unwrap(), 1.0, 4).unwrap();
        for k in 0..4 {
            assert!((a[k].energy - b[k].energy).abs() < 1e-3);
        }
    }

    #[test]
    fn eigenstates_orthonormal_and_ascending() {
        let pot = TrapPotential::new(10.0, 0.1).unwrap();
        let grid = Grid1D::default();
        let states = solve_eigenstates(&pot, &grid, 1.0, 6).unwrap();
        for w in states.windows(2) {
            assert!(w[0].energy < w[1].energy);
        }
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let ov = grid.integrate(|k| a.wavefunction[k] * b.wavefunction[k]);
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((ov - target).abs() < 1e-8, "<{i}|{j}> = {ov}");
            }
        }
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let grid = Grid1D::symmetric(2.0, 400).unwrap();
        let err = solve_eigenstates(&TrapPotential::harmonic(), &grid, 1.0, 3).unwrap_err();
        assert!(matches!(err, Error::GridTooNarrow { .. }));
    }

    #[test]
    fn invalid_inputs() {
        assert!(Grid1D::new(0.0, 1.0, 2).is_err());
        assert!(Grid1D::new(1.0, 1.0, 10).is_err());
        assert!(TrapPotential::new(-1.0, 0.1).is_err());
        assert!(TrapPotential::new(1.0, 0.0).is_err());
        let grid = Grid1D::new(-6.0, 8.0, 200).unwrap();
        assert!(solve_eigenstates(&TrapPotential::harmonic(), &grid, 1.0, 2).is_err());
    }

    #[test]
    fn doublet_means_match_reference_energies() {
        let pot = TrapPotential::new(10.0, 0.1).unwrap();
        let states = solve_eigenstates(&pot, &Grid1D::default(), 1.0, 4).unwrap();
        let e0 = 0.5 * (states[0].energy + states[1].energy);
        let e1 = 0.5 * (states[2].energy + states[3].energy);
        assert!((e0 - 1.37).abs() < 0.02, "E0 = {e0}");
        assert!((e1 - 3.31).abs() < 0.04, "E1 = {e1}");
    }

    #[test]
    fn harmonic_trap_has_no_doublets() {
        let grid = Grid1D::default();
        let states = solve_eigenstates(&TrapPotential::harmonic(), &grid, 1.0, 5).unwrap();
        let pot = TrapPotential::harmonic();
        let err = localize(&states, &states, &pot, &pot, &grid, 1.0).unwrap_err();
        assert!(matches!(err, Error::DoubletIdentification(_)));
    }

    #[test]
    fn localized_orbitals_are_mirror_images() {
        let orb = reference_orbitals();
        let n = orb.grid.n_points;
        for l in 0..2 {
            for i in 0..n {
                let d = orb.bath[LEFT][l][i] - orb.bath[RIGHT][l][n - 1 - i];
                assert!(d.abs() < 1e-12);
            }
        }
        for i in 0..n {
            assert!((orb.probe[LEFT][i] - orb.probe[RIGHT][n - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn localized_orbitals_orthonormal() {
        let orb = reference_orbitals();
        assert!(orb.orthonormality_error() < 1e-6);
        for r in 0..2 {
            for l in 0..2 {
                let f = &orb.bath[r][l];
                assert!((orb.grid.integrate(|i| f[i] * f[i]) - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn left_orbital_lives_in_left_well() {
        // Leakage of (s - a)/√2 through the barrier, computed on the default grid.
        let orb = reference_orbitals();
        let f0 = orb.right_fraction(&orb.bath[LEFT][0]);
        let f1 = orb.right_fraction(&orb.bath[LEFT][1]);
        assert!((f0 - 0.01774).abs() < 2e-4, "band 0 leakage {f0}");
        assert!((f1 - 0.03832).abs() < 2e-4, "band 1 leakage {f1}");
        assert!(orb.right_fraction(&orb.bath[RIGHT][0]) > 0.98);
    }

    #[test]
    fn relocalizing_recovers_eigenstates() {
        let pot = TrapPotential::new(10.0, 0.1).unwrap();
        let grid = Grid1D::default();
        let states = solve_eigenstates(&pot, &grid, 1.0, 2).unwrap();
        let rmin = right_well_minimum(&pot, &grid);
        let [l, r] = localize_doublet(&states[0].wavefunction, &states[1].wavefunction, &grid, rmin);
        let s: Vec<f64> = l.iter().zip(&r).map(|(a, b)| (a + b) / 2f64.sqrt()).collect();
        let a: Vec<f64> = l.iter().zip(&r).map(|(a, b)| (b - a) / 2f64.sqrt()).collect();
        let [l2, r2] = localize_doublet(&s, &a, &grid, rmin);
        for i in 0..grid.n_points {
            assert!((l2[i] - l[i]).abs() < 1e-12 && (r2[i] - r[i]).abs() < 1e-12);
            assert!((s[i].abs() - states[0].wavefunction[i].abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_contact_coupling_gives_zero_interactions() {
        let p = hubbard_params(&reference_orbitals(), 0.0, 0.1);
        assert_eq!(p.u, [0.0, 0.0]);
        assert_eq!(p.u01, 0.0);
    }

    #[test]
    fn mirror_symmetric_hopping_and_energies() {
        let orb = reference_orbitals();
        let h = orb.bath_hamiltonian();
        for l in 0..2 {
            let lr = h.matrix_element(&orb.bath[LEFT][l], &orb.bath[RIGHT][l]);
            let rl = h.matrix_element(&orb.bath[RIGHT][l], &orb.bath[LEFT][l]);
            assert!((lr - rl).abs() < 1e-12);
            let el = h.matrix_element(&orb.bath[LEFT][l], &orb.bath[LEFT][l]);
            let er = h.matrix_element(&orb.bath[RIGHT][l], &orb.bath[RIGHT][l]);
            assert!((el - er).abs() < 1e-10);
        }
    }

    #[test]
    fn hopping_is_half_doublet_splitting() {
        let orb = reference_orbitals();
        let p = hubbard_params(&orb, 1.0, 1.0);
        let e = &orb.bath_energies;
        assert!((p.j[0] - 0.5 * (e[1] - e[0])).abs() < 1e-9);
        assert!((p.j[1] - 0.5 * (e[3] - e[2])).abs() < 1e-9);
        assert!((p.e[0] - 0.5 * (e[1] + e[0])).abs() < 1e-9);
    }

    #[test]
    fn coupling_tensor_symmetries() {
        let c = CouplingTensor::from_orbitals(&reference_orbitals());
        assert!(c.hermiticity_error() < 1e-14);
        // Mirror: L ↔ R on every index.
        for l in 0..2 {
            for m in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        for g in 0..2 {
                            for d in 0..2 {
                                let v = c.get(l, m, a, b, g, d);
                                let w = c.get(l, m, 1 - a, 1 - b, 1 - g, 1 - d);
                                assert!((v - w).abs() < 1e-10);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn reference_tensor_matches_solver() {
        let c = CouplingTensor::from_orbitals(&reference_orbitals());
        let r = CouplingTensor::reference();
        let worst = c
            .values
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .flatten()
            .flatten()
            .zip(r.values.iter().flatten().flatten().flatten().flatten().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "max deviation {worst}");
    }
}
