//! Number-conserving bosonic Fock basis of the bath tensored with the
//! two-state probe.
//!
//! Bath kets are compositions of `N` into `M` modes listed in ascending
//! lexicographic order with the first mode varying slowest. Mode layout is
//! `(L⁰, L¹, R⁰, R¹)` for two bands and `(L⁰, R⁰)` for one band. The probe
//! well is the least-significant factor of the combined index, so
//! `index = 2 * bath_index + probe`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the combined dimension.
pub const DEFAULT_DIMENSION_CAP: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    Left = 0,
    Right = 1,
}

impl Probe {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Probe::Left
        } else {
            Probe::Right
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Probe::Left => Probe::Right,
            Probe::Right => Probe::Left,
        }
    }
}

/// Occupations of the bath modes plus the probe well.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockKet {
    pub occupations: Vec<u16>,
    pub probe: Probe,
}

impl FockKet {
    pub fn new(occupations: Vec<u16>, probe: Probe) -> Self {
        Self { occupations, probe }
    }

    pub fn total(&self) -> usize {
        self.occupations.iter().map(|&n| n as usize).sum()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    usize::try_from(acc).unwrap_or(usize::MAX)
}

/// Number of ways to place `n` bosons in `m` modes.
pub fn bath_dimension(n_atoms: usize, modes: usize) -> usize {
    binomial(n_atoms + modes - 1, modes - 1)
}

/// Enumerated bath basis for fixed atom number.
#[derive(Debug, Clone)]
pub struct BasisIndex {
    n_atoms: usize,
    modes: usize,
    /// Row-major `dim_bath × modes` occupation table.
    table: Vec<u16>,
}

impl BasisIndex {
    pub fn new(n_atoms: usize, modes: usize) -> Result<Self> {
        Self::with_cap(n_atoms, modes, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(n_atoms: usize, modes: usize, cap: usize) -> Result<Self> {
        if modes != 2 && modes != 4 {
            return Err(Error::ModeCount(modes));
        }
        if n_atoms == 0 {
            return Err(Error::InvalidArgument("at least one bath atom is required".into()));
        }
        if n_atoms > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("{n_atoms} atoms exceed occupation range")));
        }
        let dim_bath = bath_dimension(n_atoms, modes);
        let dim = dim_bath.saturating_mul(2);
        if dim > cap {
            return Err(Error::DimensionOverflow { dim, cap });
        }
        let mut table = Vec::with_capacity(dim_bath * modes);
        let mut ket = vec![0u16; modes];
        ket[modes - 1] = n_atoms as u16;
        loop {
            table.extend_from_slice(&ket);
            if !next_composition(&mut ket) {
                break;
            }
        }
        debug_assert_eq!(table.len(), dim_bath * modes);
        Ok(Self { n_atoms, modes, table })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn bands(&self) -> usize {
        self.modes / 2
    }

    pub fn dim_bath(&self) -> usize {
        self.table.len() / self.modes
    }

    /// Combined dimension including the probe factor.
    pub fn dim(&self) -> usize {
        2 * self.dim_bath()
    }

    /// Mode index of `(well, band)`, `None` if the band is not present.
    pub fn mode(&self, well: usize, band: usize) -> Option<usize> {
        (band < self.bands() && well < 2).then_some(well * self.bands() + band)
    }

    /// Occupations of bath ket `b`.
    pub fn occupations(&self, b: usize) -> &[u16] {
        &self.table[b * self.modes..(b + 1) * self.modes]
    }

    pub fn iter_bath(&self) -> impl Iterator<Item = &[u16]> {
        self.table.chunks_exact(self.modes)
    }

    /// Rank of a bath occupation vector.
    pub fn rank_bath(&self, occupations: &[u16]) -> Result<usize> {
        if occupations.len() != self.modes {
            return Err(Error::ConstraintViolation(format!(
                "expected {} modes, got {}",
                self.modes,
                occupations.len()
            )));
        }
        let total: usize = occupations.iter().map(|&n| n as usize).sum();
        if total != self.n_atoms {
            return Err(Error::ConstraintViolation(format!(
                "occupations sum to {total}, basis holds {} atoms",
                self.n_atoms
            )));
        }
        Ok(self.rank_bath_unchecked(occupations))
    }

    /// Rank without validation; `occupations` must sum to the atom number.
    pub fn rank_bath_unchecked(&self, occupations: &[u16]) -> usize {
        let mut rank = 0;
        let mut remaining = self.n_atoms;
        for (i, &n) in occupations[..self.modes - 1].iter().enumerate() {
            let n = n as usize;
            let k = self.modes - i - 1;
            // Compositions with a smaller value at position i, by the hockey-stick identity.
            rank += binomial(remaining + k, k) - binomial(remaining - n + k, k);
            remaining -= n;
        }
        rank
    }

    pub fn rank(&self, ket: &FockKet) -> Result<usize> {
        Ok(2 * self.rank_bath(&ket.occupations)? + ket.probe.index())
    }

    pub fn unrank(&self, index: usize) -> Result<FockKet> {
        if index >= self.dim() {
            return Err(Error::InvalidArgument(format!("index {index} outside dimension {}", self.dim())));
        }
        Ok(FockKet::new(self.occupations(index / 2).to_vec(), Probe::from_index(index % 2)))
    }
}

/// Advance to the next composition in ascending lexicographic order.
fn next_composition(ket: &mut [u16]) -> bool {
    let m = ket.len();
    // Rightmost position (excluding the last) that can grow: requires the
    // suffix after it to hold at least one atom.
    let mut suffix: u32 = ket[m - 1] as u32;
    for i in (0..m - 1).rev() {
        if suffix > 0 {
            ket[i] += 1;
            let rest = suffix - 1;
            for v in ket[i + 1..].iter_mut() {
                *v = 0;
            }
            ket[m - 1] = rest as u16;
            return true;
        }
        suffix += ket[i] as u32;
    }
    false
}
