//! Unitary propagation of the combined state and the two-stage
//! thermalize-then-couple protocol.
//!
//! `ħ = 1`; energies in `ħω₀`, times in `1/ω₀`.

use faer::{linalg::matmul::matmul, Accum, Mat, Par};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{BasisIndex, FockKet, Probe};
use crate::hamiltonian::{build_decoupled, build_full, ModelSpec, SparseOperator};
use crate::linalg::dense_symmetric_eigen;
use crate::observables::{purity, reduce};
use crate::series::TimeSeries;

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Amplitudes over the combined basis plus the time they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub amplitudes: Vec<C64>,
    pub time: f64,
}

impl QuantumState {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        Self { amplitudes, time: 0.0 }
    }

    pub fn basis_ket(basis: &BasisIndex, ket: &FockKet) -> Result<Self> {
        let mut amplitudes = vec![ZERO; basis.dim()];
        amplitudes[basis.rank(ket)?] = C64::new(1.0, 0.0);
        Ok(Self::new(amplitudes))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        self.amplitudes.iter_mut().for_each(|a| *a /= n);
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &Self) -> C64 {
        dot(&self.amplitudes, &other.amplitudes)
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn orthogonalize(w: &mut [C64], basis: &[Vec<C64>]) {
    for v in basis {
        let proj = dot(v, w);
        w.iter_mut().zip(v).for_each(|(x, y)| *x -= proj * y);
    }
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Settings of the Lanczos propagator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrylovConfig {
    /// Largest Krylov subspace.
    pub max_dim: usize,
    /// Error bound per substep.
    pub tolerance: f64,
    /// Step halvings allowed before giving up.
    pub max_halvings: u32,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self { max_dim: 30, tolerance: 1e-10, max_halvings: 40 }
    }
}

/// Orthonormal Lanczos basis and the projected tridiagonal matrix.
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> Result<(Vec<f64>, Mat<f64>)> {
    let m = alpha.len();
    let t = Mat::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let (values, vectors) = dense_symmetric_eigen(&t)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::KrylovNotConverged("non-finite Ritz values".into()));
    }
    Ok((values, vectors))
}

struct Lanczos {
    vectors: Vec<Vec<C64>>,
    /// Eigen-decomposition of the projected matrix.
    ritz_values: Vec<f64>,
    ritz_vectors: Mat<f64>,
    /// Coupling to the first discarded direction; zero on exhaustion.
    residual: f64,
}

impl Lanczos {
    /// Grows the basis until `max_dim`, exhaustion, or until the a-posteriori
    /// error of a step of length `tau` drops below `tol`.
    fn build(h: &SparseOperator, start: &[C64], max_dim: usize, tau: f64, tol: f64) -> Result<Self> {
        let beta0 = norm(start);
        let mut v0: Vec<C64> = start.iter().map(|z| z / beta0).collect();
        let mut vectors: Vec<Vec<C64>> = Vec::with_capacity(max_dim);
        let mut alpha = Vec::with_capacity(max_dim);
        let mut beta: Vec<f64> = Vec::with_capacity(max_dim);
        let mut w = vec![ZERO; start.len()];
        let scale = h.norm_bound().max(1.0);
        let max_dim = max_dim.min(start.len()).max(1);
        loop {
            h.apply_into(&v0, &mut w);
            alpha.push(dot(&v0, &w).re);
            vectors.push(std::mem::take(&mut v0));
            // Full reorthogonalization, repeated once if cancellation was severe.
            let before = norm(&w);
            orthogonalize(&mut w, &vectors);
            let mut b = norm(&w);
            if b < 0.5 * before {
                orthogonalize(&mut w, &vectors);
                b = norm(&w);
            }
            let exhausted = b <= 1e-13 * scale;
            let k = vectors.len();
            if exhausted || k == max_dim || (k >= 8 && k % 4 == 0) {
                let (ritz_values, ritz_vectors) = tridiagonal_eigen(&alpha, &beta)?;
                let mut out = Self { vectors, ritz_values, ritz_vectors, residual: if exhausted { 0.0 } else { b } };
                let last = out.propagated_coefficients(tau)[k - 1].norm();
                if exhausted || k == max_dim || beta0 * b * last <= tol {
                    return Ok(out);
                }
                vectors = std::mem::take(&mut out.vectors);
            }
            beta.push(b);
            v0 = w.iter().map(|z| z / b).collect();
        }
    }

    /// `exp(-i T τ) e₁` in the Lanczos basis.
    fn propagated_coefficients(&self, tau: f64) -> Vec<C64> {
        let m = self.vectors.len();
        let q = &self.ritz_vectors;
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|k| C64::from_polar(q[(i, k)] * q[(0, k)], -self.ritz_values[k] * tau))
                    .sum()
            })
            .collect()
    }
}

/// Krylov propagation of `exp(-i H Δt)` with adaptive substeps.
pub fn evolve_krylov(state: &QuantumState, h: &SparseOperator, dt: f64, config: &KrylovConfig) -> Result<QuantumState> {
    if state.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: state.dim() });
    }
    if dt < 0.0 || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("time step {dt}")));
    }
    let mut psi = state.amplitudes.clone();
    let mut remaining = dt;
    let mut tau = dt;
    while remaining > 0.0 {
        let beta0 = norm(&psi);
        if beta0 == 0.0 {
            break;
        }
        tau = tau.min(remaining);
        let lanczos = Lanczos::build(h, &psi, config.max_dim, tau, config.tolerance)?;
        let m = lanczos.vectors.len();
        let mut halvings = 0;
        let coeffs = loop {
            let c = lanczos.propagated_coefficients(tau);
            let err = beta0 * lanczos.residual * c[m - 1].norm();
            if err <= config.tolerance {
                break c;
            }
            halvings += 1;
            if halvings > config.max_halvings {
                return Err(Error::KrylovNotConverged(format!(
                    "error {err:.3e} above tolerance after {halvings} halvings (τ = {tau:.3e})"
                )));
            }
            tau *= 0.5;
        };
        let mut next = vec![ZERO; psi.len()];
        for (v, c) in lanczos.vectors.iter().zip(&coeffs) {
            let c = c * beta0;
            next.iter_mut().zip(v).for_each(|(x, y)| *x += c * y);
        }
        psi = next;
        remaining -= tau;
        if remaining < 1e-14 * dt {
            remaining = 0.0;
        }
        if halvings == 0 {
            tau *= 1.5;
        }
    }
    Ok(QuantumState { amplitudes: psi, time: state.time + dt })
}

/// Exact propagation through a full eigendecomposition.
pub struct DensePropagator {
    energies: Vec<f64>,
    vectors: Mat<f64>,
}

impl DensePropagator {
    pub fn new(h: &SparseOperator) -> Result<Self> {
        let (energies, vectors) = dense_symmetric_eigen(&h.to_dense())?;
        Ok(Self { energies, vectors })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Coefficients of `state` in the eigenbasis, split in real/imag columns.
    fn to_eigenbasis(&self, amplitudes: &[C64]) -> Mat<f64> {
        let n = self.dim();
        let x = Mat::from_fn(n, 2, |i, j| if j == 0 { amplitudes[i].re } else { amplitudes[i].im });
        let mut c = Mat::zeros(n, 2);
        matmul(&mut c, Accum::Replace, self.vectors.transpose(), &x, 1.0, Par::rayon(0));
        c
    }

    fn from_eigenbasis(&self, c: &Mat<f64>) -> Vec<C64> {
        let n = self.dim();
        let mut x = Mat::zeros(n, 2);
        matmul(&mut x, Accum::Replace, &self.vectors, c, 1.0, Par::rayon(0));
        (0..n).map(|i| C64::new(x[(i, 0)], x[(i, 1)])).collect()
    }

    pub fn evolve(&self, state: &QuantumState, dt: f64) -> Result<QuantumState> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: state.dim() });
        }
        let mut c = self.to_eigenbasis(&state.amplitudes);
        for (k, e) in self.energies.iter().enumerate() {
            let z = C64::new(c[(k, 0)], c[(k, 1)]) * C64::from_polar(1.0, -e * dt);
            c[(k, 0)] = z.re;
            c[(k, 1)] = z.im;
        }
        Ok(QuantumState { amplitudes: self.from_eigenbasis(&c), time: state.time + dt })
    }
}

/// Dimension at or below which the dense propagator is used.
pub const DENSE_LIMIT: usize = 2000;

/// Propagator for one constant-Hamiltonian segment.
pub enum Propagator {
    Dense(DensePropagator),
    Krylov { h: SparseOperator, config: KrylovConfig },
}

impl Propagator {
    /// Dense path for `D <= DENSE_LIMIT`, Krylov otherwise.
    pub fn auto(h: SparseOperator, config: KrylovConfig) -> Result<Self> {
        if h.dim() <= DENSE_LIMIT {
            Ok(Propagator::Dense(DensePropagator::new(&h)?))
        } else {
            Ok(Propagator::Krylov { h, config })
        }
    }

    pub fn evolve(&self, state: &QuantumState, dt: f64) -> Result<QuantumState> {
        if dt == 0.0 {
            return Ok(state.clone());
        }
        match self {
            Propagator::Dense(d) => d.evolve(state, dt),
            Propagator::Krylov { h, config } => evolve_krylov(state, h, dt, config),
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, Propagator::Dense(_))
    }
}

/// `exp(-i H Δt) |ψ⟩`, choosing the method by dimension.
pub fn evolve(state: &QuantumState, h: &SparseOperator, dt: f64) -> Result<QuantumState> {
    if dt == 0.0 {
        return Ok(state.clone());
    }
    if h.dim() <= DENSE_LIMIT {
        DensePropagator::new(h)?.evolve(state, dt)
    } else {
        evolve_krylov(state, h, dt, &KrylovConfig::default())
    }
}

/// Expectation values of the level occupations and the probe position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupations {
    /// `⟨n_r^l⟩` in the order `(L⁰, L¹, R⁰, R¹)`; band-1 entries are zero
    /// for single-band bases.
    pub levels: [f64; 4],
    pub p_left: f64,
    pub p_right: f64,
}

pub fn expectations(state: &QuantumState, basis: &BasisIndex) -> Result<Occupations> {
    if state.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: state.dim() });
    }
    let mut raw = [0.0; 4];
    let mut p = [0.0; 2];
    for (b, occ) in basis.iter_bath().enumerate() {
        let wl = state.amplitudes[2 * b].norm_sqr();
        let wr = state.amplitudes[2 * b + 1].norm_sqr();
        p[0] += wl;
        p[1] += wr;
        for (m, &n) in occ.iter().enumerate() {
            raw[m] += (wl + wr) * n as f64;
        }
    }
    let mut levels = [0.0; 4];
    for r in 0..2 {
        for l in 0..basis.bands() {
            levels[2 * r + l] = raw[basis.mode(r, l).unwrap()];
        }
    }
    Ok(Occupations { levels, p_left: p[0], p_right: p[1] })
}

/// Sudden-switch protocol: free evolution with the coupling off until
/// `t_switch`, full Hamiltonian afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    /// Initial bath occupations in `(L⁰, L¹, R⁰, R¹)` order (or `(L⁰, R⁰)`).
    pub initial_bath: Vec<u16>,
    pub initial_probe: Probe,
    pub t_switch: f64,
    pub t_end: f64,
    pub sample_dt: f64,
    #[serde(default)]
    pub krylov: KrylovConfig,
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_dt > 0.0) {
            return Err(Error::InvalidProtocol(format!("sample interval {} <= 0", self.sample_dt)));
        }
        if !(0.0 <= self.t_switch && self.t_switch <= self.t_end) {
            return Err(Error::InvalidProtocol(format!(
                "need 0 <= t_switch ({}) <= t_end ({})",
                self.t_switch, self.t_end
            )));
        }
        Ok(())
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.t_end / self.sample_dt + 1e-9).floor() as usize;
        (0..=n).map(|k| k as f64 * self.sample_dt).collect()
    }
}

/// One sampled row of a protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    /// `⟨n_r^l⟩ / N` in `(L⁰, L¹, R⁰, R¹)` order.
    pub levels: [f64; 4],
    pub p_left: f64,
    pub p_right: f64,
    pub purity: f64,
    pub energy: f64,
    pub norm: f64,
}

/// Record of a protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRecord {
    pub n_atoms: usize,
    pub bands: usize,
    pub dim: usize,
    pub dense: bool,
    pub t_switch: f64,
    pub samples: Vec<Sample>,
}

/// Scalar columns available from a protocol record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    /// Level `(well, band)` occupation per atom.
    Level(usize, usize),
    PLeft,
    Purity,
    /// `2P - 1`.
    PurityExcess,
    /// `2P_L - 1`.
    Imbalance,
    Energy,
}

impl ProtocolRecord {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn series(&self, column: Column) -> TimeSeries {
        let (label, f): (String, Box<dyn Fn(&Sample) -> f64>) = match column {
            Column::Level(r, l) => (
                format!("n{}{}", if r == 0 { "L" } else { "R" }, l),
                Box::new(move |s: &Sample| s.levels[2 * r + l]),
            ),
            Column::PLeft => ("pL".into(), Box::new(|s: &Sample| s.p_left)),
            Column::Purity => ("purity".into(), Box::new(|s: &Sample| s.purity)),
            Column::PurityExcess => ("2P-1".into(), Box::new(|s: &Sample| 2.0 * s.purity - 1.0)),
            Column::Imbalance => ("2pL-1".into(), Box::new(|s: &Sample| 2.0 * s.p_left - 1.0)),
            Column::Energy => ("energy".into(), Box::new(|s: &Sample| s.energy)),
        };
        TimeSeries::new(label, self.times(), self.samples.iter().map(|s| f(s)).collect())
    }
}

fn sample(state: &QuantumState, basis: &BasisIndex, h: &SparseOperator, t: f64) -> Result<Sample> {
    let occ = expectations(state, basis)?;
    let n = basis.n_atoms() as f64;
    let mut levels = occ.levels;
    levels.iter_mut().for_each(|v| *v /= n);
    Ok(Sample {
        t,
        levels,
        p_left: occ.p_left,
        p_right: occ.p_right,
        purity: purity(&reduce(&state.amplitudes)),
        energy: h.expectation(&state.amplitudes),
        norm: state.norm(),
    })
}

/// Run the protocol and record every sample.
pub fn run_protocol(spec: &ModelSpec, protocol: &Protocol) -> Result<ProtocolRecord> {
    protocol.validate()?;
    let basis = spec.basis()?;
    let ket = FockKet::new(protocol.initial_bath.clone(), protocol.initial_probe);
    let mut state = QuantumState::basis_ket(&basis, &ket)?;
    let h_free = build_decoupled(spec, &basis)?;
    let h_full = build_full(spec, &basis)?;
    let free = Propagator::auto(h_free.clone(), protocol.krylov)?;
    let coupled = Propagator::auto(h_full.clone(), protocol.krylov)?;
    let times = protocol.sample_times();
    let mut samples = Vec::with_capacity(times.len());
    let t_sw = protocol.t_switch;
    let current_h = |t: f64| if t < t_sw { &h_free } else { &h_full };
    samples.push(sample(&state, &basis, current_h(0.0), 0.0)?);
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t0 < t_sw && t_sw < t1 {
            state = free.evolve(&state, t_sw - t0)?;
            state = coupled.evolve(&state, t1 - t_sw)?;
        } else if t1 <= t_sw {
            state = free.evolve(&state, t1 - t0)?;
        } else {
            state = coupled.evolve(&state, t1 - t0)?;
        }
        samples.push(sample(&state, &basis, current_h(t1), t1)?);
    }
    Ok(ProtocolRecord {
        n_atoms: spec.n_atoms,
        bands: spec.bands,
        dim: basis.dim(),
        dense: coupled.is_dense(),
        t_switch: t_sw,
        samples,
    })
}
