//! Reduced density matrix of the probe, purity and decay-rate fits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// 2×2 probe density matrix in the `(L, R)` basis, with the convention
/// `ρ_pq = Σ_n conj(c_{n,p}) c_{n,q}` (so `ρ_LR = Σ_n A_n* B_n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedDensity {
    pub rho: [[Complex64; 2]; 2],
}

impl ReducedDensity {
    pub fn diagonal(p_left: f64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self { rho: [[Complex64::new(p_left, 0.0), z], [z, Complex64::new(1.0 - p_left, 0.0)]] }
    }

    pub fn trace(&self) -> Complex64 {
        self.rho[0][0] + self.rho[1][1]
    }

    pub fn p_left(&self) -> f64 {
        self.rho[0][0].re
    }

    pub fn p_right(&self) -> f64 {
        self.rho[1][1].re
    }

    /// `max |ρ_ij - conj(ρ_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.rho[i][j] - self.rho[j][i].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = self.rho[0][0].re;
        let d = self.rho[1][1].re;
        let b = self.rho[0][1].norm();
        let mean = 0.5 * (a + d);
        let half = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        [mean - half, mean + half]
    }

    /// `|ρ_LR|`.
    pub fn coherence(&self) -> f64 {
        self.rho[0][1].norm()
    }

    /// `U ρ U†` for a probe-local unitary acting on the amplitudes.
    pub fn transformed(&self, u: [[Complex64; 2]; 2]) -> Self {
        // With ρ_pq = Σ conj(c_p) c_q, amplitudes c → U c give ρ → conj(U) ρ Uᵀ.
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for p in 0..2 {
            for q in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        out[p][q] += u[p][a].conj() * self.rho[a][b] * u[q][b];
                    }
                }
            }
        }
        Self { rho: out }
    }
}

/// Partial trace of a combined-basis state over the bath.
///
/// The probe index is the least-significant factor, so the amplitudes come
/// in `(A_n, B_n)` pairs.
pub fn reduce(amplitudes: &[Complex64]) -> ReducedDensity {
    let mut rho = [[Complex64::new(0.0, 0.0); 2]; 2];
    for pair in amplitudes.chunks_exact(2) {
        for p in 0..2 {
            for q in 0..2 {
                rho[p][q] += pair[p].conj() * pair[q];
            }
        }
    }
    ReducedDensity { rho }
}

/// `Tr ρ² = Σ_ij |ρ_ij|²`.
pub fn purity(rho: &ReducedDensity) -> f64 {
    rho.rho.iter().flatten().map(|z| z.norm_sqr()).sum()
}

/// How the fitted values are taken from the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    /// Fit every sample in the window.
    Raw,
    /// Fit only local maxima of `|x|` (for oscillating decays).
    Peaks,
}

/// Result of a log-linear fit `x(t) ≈ A exp(-rate t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub points: usize,
    pub window: [f64; 2],
}

/// Sample indices of local maxima of `|x|` inside `[t0, t1]`.
pub fn envelope_peaks(series: &TimeSeries, t0: f64, t1: f64) -> Vec<usize> {
    let v = &series.values;
    (1..v.len().saturating_sub(1))
        .filter(|&i| series.t[i] >= t0 && series.t[i] <= t1)
        .filter(|&i| {
            let (a, b, c) = (v[i - 1].abs(), v[i].abs(), v[i + 1].abs());
            b >= a && b > c
        })
        .collect()
}

/// Least-squares slope of `ln x` against `t` over the window.
pub fn fit_exponential(series: &TimeSeries, window: [f64; 2], envelope: Envelope) -> Result<ExpFit> {
    let [t0, t1] = window;
    if !(t1 > t0) {
        return Err(Error::Fit(format!("empty window [{t0}, {t1}]")));
    }
    let (first, last) = match (series.t.first(), series.t.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::InsufficientData("empty series".into())),
    };
    let slack = 1e-9 * (t1 - t0);
    if first > t0 + slack || last < t1 - slack {
        return Err(Error::InsufficientData(format!(
            "series covers [{first}, {last}], window is [{t0}, {t1}]"
        )));
    }
    let indices: Vec<usize> = match envelope {
        Envelope::Raw => (0..series.len()).filter(|&i| series.t[i] >= t0 && series.t[i] <= t1).collect(),
        Envelope::Peaks => envelope_peaks(series, t0, t1),
    };
    if indices.len() < 5 {
        return Err(Error::InsufficientData(format!("{} envelope points (need 5)", indices.len())));
    }
    let mut xs = Vec::with_capacity(indices.len());
    let mut ys = Vec::with_capacity(indices.len());
    for &i in &indices {
        let v = match envelope {
            Envelope::Raw => series.values[i],
            Envelope::Peaks => series.values[i].abs(),
        };
        if !(v > 0.0) {
            return Err(Error::Fit(format!("non-positive value {v} at t = {}", series.t[i])));
        }
        xs.push(series.t[i]);
        ys.push(v.ln());
    }
    let (slope, intercept, r_squared) = linear_regression(&xs, &ys);
    Ok(ExpFit { rate: -slope, amplitude: intercept.exp(), r_squared, points: xs.len(), window })
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, R²)`.
/// `R²` is 1 for a perfect (including constant) fit.
pub fn linear_regression(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - (slope * a + intercept)).powi(2)).sum();
    let r2 = if syy > 1e-300 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}
