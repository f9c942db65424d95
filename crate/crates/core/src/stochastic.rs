//! Mean-field model of the probe: a two-level system whose level is shifted
//! by stationary Gaussian noise with exponential correlations
//! `⟨δε(t′)δε(t″)⟩ = σ² exp(−2|t′−t″|/τ_c)`.
//!
//! Trajectories use ChaCha8 streams keyed by `(seed, trajectory index)`, so
//! ensembles are bit-reproducible regardless of thread count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{linear_regression, purity, ReducedDensity};
use crate::orbitals::{CouplingTensor, LEFT, RIGHT};

type C64 = Complex64;

/// How a quoted noise strength maps onto the standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaConvention {
    /// The number is the standard deviation σ.
    StdDev,
    /// The number is the variance σ².
    Variance,
}

/// Where the noise enters the two-level Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseCoupling {
    /// `δε(t)` on the upper tunneling eigenstate only: a fluctuating relative
    /// phase between the doublet states, which dephases `ρ`.
    Relative,
    /// `δε(t)·1`: a global phase. `ρ` stays pure; only the averaged amplitude
    /// decays.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of `δε` (ħω₀).
    pub sigma: f64,
    /// Correlation time (1/ω₀).
    pub tau_c: f64,
    pub seed: u64,
    pub ensemble: usize,
}

impl NoiseSpec {
    /// Noise from a quoted strength with `τ_c = ħ/σ`.
    pub fn from_quoted(value: f64, convention: SigmaConvention, seed: u64, ensemble: usize) -> Self {
        let sigma = match convention {
            SigmaConvention::StdDev => value,
            SigmaConvention::Variance => value.sqrt(),
        };
        Self { sigma, tau_c: 1.0 / sigma, seed, ensemble }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("σ = {}", self.sigma)));
        }
        if !(self.tau_c > 0.0) || !self.tau_c.is_finite() {
            return Err(Error::InvalidArgument(format!("τ_c = {}", self.tau_c)));
        }
        if self.ensemble == 0 {
            return Err(Error::InvalidArgument("empty ensemble".into()));
        }
        Ok(())
    }

    /// `2ħ⁻² ∫₀ᵗ∫₀ᵗ σ² e^{−2|t′−t″|/τ_c}` in closed form.
    pub fn theta_exact(&self, t: f64) -> f64 {
        let (s2, tc) = (self.sigma * self.sigma, self.tau_c);
        2.0 * s2 * tc * t - s2 * tc * tc * (-(-2.0 * t / tc).exp_m1())
    }

    /// Long-time asymptote `2ħ⁻²σ²τ_c t`.
    pub fn theta_linear(&self, t: f64) -> f64 {
        2.0 * self.sigma * self.sigma * self.tau_c * t
    }

    /// Asymptotic slope `dΘ/dt`.
    pub fn theta_slope(&self) -> f64 {
        2.0 * self.sigma * self.sigma * self.tau_c
    }
}

/// Per-trajectory RNG stream.
pub fn trajectory_rng(seed: u64, trajectory: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trajectory);
    rng
}

/// Exactly discretized stationary Ornstein–Uhlenbeck process together with
/// its running time integral.
#[derive(Debug, Clone)]
pub struct OuProcess {
    pub value: f64,
    pub integral: f64,
    decay: f64,
    kick: f64,
    drift_integral: f64,
    kick_integral: f64,
    independent_integral: f64,
}

impl OuProcess {
    /// Starts from the stationary distribution.
    pub fn new(sigma: f64, tau_c: f64, dt: f64, rng: &mut impl Rng) -> Self {
        let k = 2.0 / tau_c;
        let e = (-k * dt).exp();
        let s2 = sigma * sigma;
        let var_v = s2 * (1.0 - e * e);
        // Joint Gaussian statistics of (δε(t+Δt), ∫δε) given δε(t).
        let var_x = 2.0 * s2 / k * (dt - 2.0 * (1.0 - e) / k + (1.0 - e * e) / (2.0 * k));
        let cov = s2 / k * (1.0 - e).powi(2);
        let kick = var_v.sqrt();
        let kick_integral = if kick > 0.0 { cov / kick } else { 0.0 };
        let independent_integral = (var_x - kick_integral * kick_integral).max(0.0).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        Self {
            value: sigma * z,
            integral: 0.0,
            decay: e,
            kick,
            drift_integral: (1.0 - e) / k,
            kick_integral,
            independent_integral,
        }
    }

    /// Advance by the configured step; returns the increment of the integral.
    pub fn step(&mut self, rng: &mut impl Rng) -> f64 {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let dx = self.value * self.drift_integral + self.kick_integral * z1 + self.independent_integral * z2;
        self.value = self.value * self.decay + self.kick * z1;
        self.integral += dx;
        dx
    }
}

/// Mean-field probe parameters induced by the bath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldParams {
    /// Mean induced tunneling `J₀`.
    pub j0: f64,
    pub j0_variance: f64,
    /// Mean on-site shifts `(ε_L, ε_R)`.
    pub eps: [f64; 2],
    pub eps_variance: [f64; 2],
    /// Variance of the bias `ε_L − ε_R`.
    pub bias_variance: f64,
    /// `J_s′ = J_s − J₀`.
    pub j_s_eff: f64,
}

impl MeanFieldParams {
    /// Uncoupled probe with tunneling `j_s`.
    pub fn free(j_s: f64) -> Self {
        Self { j0: 0.0, j0_variance: 0.0, eps: [0.0; 2], eps_variance: [0.0; 2], bias_variance: 0.0, j_s_eff: j_s }
    }

    /// `ε₀`, the mean shift of the left site.
    pub fn eps0(&self) -> f64 {
        self.eps[LEFT]
    }
}

/// Mean and variance of a raw level occupation `n_r^l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Propagates level-occupation moments through `ΔJ = g_I Σ C^{ll}_{ααLR} n_α^l`
/// and `ε_r = g_I Σ C^{ll}_{ααrr} n_α^l`, treating occupations as independent
/// Gaussians. `levels` is ordered `(L⁰, L¹, R⁰, R¹)`.
pub fn mean_field_from_microscopic(
    c: &CouplingTensor,
    g_i: f64,
    j_s: f64,
    levels: &[Option<LevelMoments>],
) -> Result<MeanFieldParams> {
    if levels.len() != 4 {
        return Err(Error::InvalidArgument(format!("expected 4 level fits, got {}", levels.len())));
    }
    let mut moments = [[LevelMoments { mean: 0.0, variance: 0.0 }; 2]; 2];
    for (k, m) in levels.iter().enumerate() {
        let m = m.ok_or_else(|| Error::InsufficientData(format!("missing occupation fit for level {k}")))?;
        moments[k / 2][k % 2] = m;
    }
    let linear = |weight: &dyn Fn(usize, usize) -> f64| {
        let mut mean = 0.0;
        let mut var = 0.0;
        for a in [LEFT, RIGHT] {
            for l in 0..2 {
                let w = g_i * weight(a, l);
                mean += w * moments[a][l].mean;
                var += w * w * moments[a][l].variance;
            }
        }
        (mean, var)
    };
    let (j0, j0_variance) = linear(&|a, l| c.get(l, l, a, a, LEFT, RIGHT));
    let (el, vl) = linear(&|a, l| c.get(l, l, a, a, LEFT, LEFT));
    let (er, vr) = linear(&|a, l| c.get(l, l, a, a, RIGHT, RIGHT));
    let (_, bias_variance) = linear(&|a, l| c.get(l, l, a, a, LEFT, LEFT) - c.get(l, l, a, a, RIGHT, RIGHT));
    Ok(MeanFieldParams {
        j0,
        j0_variance,
        eps: [el, er],
        eps_variance: [vl, vr],
        bias_variance,
        j_s_eff: j_s - j0,
    })
}

/// Ensemble-averaged probe observables at one sample time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingSample {
    pub t: f64,
    pub p_left: f64,
    /// `|⟨e^{−i∫δε}⟩|`: normalized doublet coherence for relative noise,
    /// averaged-amplitude factor for global noise.
    pub offdiag_abs: f64,
    /// Standard error of `offdiag_abs`.
    pub offdiag_se: f64,
    pub purity: f64,
    pub theta_exact: f64,
    pub theta_linear: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DephasingRecord {
    pub coupling: NoiseCoupling,
    pub noise: NoiseSpec,
    pub samples: Vec<DephasingSample>,
}

impl DephasingRecord {
    /// `Θ` inferred from the coherence, `−4 ln|offdiag|`.
    pub fn theta_estimate(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.t, -4.0 * s.offdiag_abs.ln())).collect()
    }

    /// Least-squares slope of the inferred `Θ` over `[t0, t1]`.
    pub fn theta_slope(&self, t0: f64, t1: f64) -> Result<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .theta_estimate()
            .into_iter()
            .filter(|(t, th)| *t >= t0 && *t <= t1 && th.is_finite())
            .unzip();
        if x.len() < 3 {
            return Err(Error::InsufficientData(format!("{} points in [{t0}, {t1}]", x.len())));
        }
        Ok(linear_regression(&x, &y).0)
    }
}

#[derive(Clone)]
struct Accumulator {
    /// Σρ per sample in the (L, R) basis.
    rho: Vec<[C64; 4]>,
    /// Σz, Σ(Re z)², Σ(Im z)², Σ Re z Im z with z = e^{−iX}.
    z: Vec<[f64; 5]>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self { rho: vec![[C64::new(0.0, 0.0); 4]; n], z: vec![[0.0; 5]; n] }
    }

    fn merge(mut self, other: &Self) -> Self {
        for (a, b) in self.rho.iter_mut().zip(&other.rho) {
            for k in 0..4 {
                a[k] += b[k];
            }
        }
        for (a, b) in self.z.iter_mut().zip(&other.z) {
            for k in 0..5 {
                a[k] += b[k];
            }
        }
        self
    }

    fn record(&mut self, i: usize, amp: [C64; 2], z: C64) {
        // Same convention as `observables::reduce`: ρ_pq = c_p* c_q.
        let r = &mut self.rho[i];
        r[0] += amp[0].conj() * amp[0];
        r[1] += amp[0].conj() * amp[1];
        r[2] += amp[1].conj() * amp[0];
        r[3] += amp[1].conj() * amp[1];
        let s = &mut self.z[i];
        s[0] += z.re;
        s[1] += z.im;
        s[2] += z.re * z.re;
        s[3] += z.im * z.im;
        s[4] += z.re * z.im;
    }
}

const CHUNK: usize = 64;

/// Monte-Carlo ensemble of probe trajectories starting in the left well,
/// `H(t) = ε₀·1 − J_s′σ_x + δε(t)·P`, with `P` the identity (global) or the
/// projector on the antisymmetric tunneling eigenstate (relative). Every
/// `sample_every` steps of length `dt` the ensemble averages are recorded.
pub fn simulate_dephasing(
    mf: &MeanFieldParams,
    noise: &NoiseSpec,
    coupling: NoiseCoupling,
    t_end: f64,
    dt: f64,
    sample_every: usize,
) -> Result<DephasingRecord> {
    noise.validate()?;
    if !(dt > 0.0) || dt > noise.tau_c / 10.0 + 1e-12 * noise.tau_c {
        return Err(Error::InvalidArgument(format!("Δt = {dt} must be in (0, τ_c/10 = {}]", noise.tau_c / 10.0)));
    }
    if sample_every == 0 || !(t_end >= 0.0) {
        return Err(Error::InvalidArgument("invalid sampling".into()));
    }
    let steps = (t_end / dt + 1e-9).floor() as usize;
    let n_samples = steps / sample_every + 1;
    let eps0 = mf.eps0();
    let j = mf.j_s_eff;
    // Tunneling eigenstates |±⟩ = (|L⟩ ± |R⟩)/√2 with energies ε₀ ∓ J.
    let energies = [eps0 - j, eps0 + j];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let chunks: Vec<Accumulator> = (0..noise.ensemble.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut acc = Accumulator::new(n_samples);
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(noise.ensemble);
            for traj in lo..hi {
                let mut rng = trajectory_rng(noise.seed, traj as u64);
                let mut ou = OuProcess::new(noise.sigma, noise.tau_c, dt, &mut rng);
                for step in 0..=steps {
                    if step > 0 {
                        ou.step(&mut rng);
                    }
                    if step % sample_every != 0 {
                        continue;
                    }
                    let t = step as f64 * dt;
                    let x = ou.integral;
                    let z = C64::from_polar(1.0, -x);
                    let (p0, p1) = match coupling {
                        NoiseCoupling::Relative => (C64::new(1.0, 0.0), z),
                        NoiseCoupling::Global => (z, z),
                    };
                    let c0 = C64::from_polar(h, -energies[0] * t) * p0;
                    let c1 = C64::from_polar(h, -energies[1] * t) * p1;
                    acc.record(step / sample_every, [(c0 + c1) * h, (c0 - c1) * h], z);
                }
            }
            acc
        })
        .collect();
    let total = chunks.iter().skip(1).fold(chunks[0].clone(), |a, b| a.merge(b));
    let m = noise.ensemble as f64;
    let samples = (0..n_samples)
        .map(|i| {
            let t = (i * sample_every) as f64 * dt;
            let r = total.rho[i];
            let rho = ReducedDensity { rho: [[r[0] / m, r[1] / m], [r[2] / m, r[3] / m]] };
            let s = total.z[i];
            let (mr, mi) = (s[0] / m, s[1] / m);
            let mag = (mr * mr + mi * mi).sqrt();
            // Variance of z projected on the direction of its mean.
            let (ur, ui) = if mag > 0.0 { (mr / mag, mi / mag) } else { (1.0, 0.0) };
            let second = (ur * ur * s[2] + ui * ui * s[3] + 2.0 * ur * ui * s[4]) / m;
            let var = (second - mag * mag).max(0.0) * m / (m - 1.0).max(1.0);
            DephasingSample {
                t,
                p_left: rho.rho[0][0].re,
                offdiag_abs: mag,
                offdiag_se: (var / m).sqrt(),
                purity: purity(&rho),
                theta_exact: noise.theta_exact(t),
                theta_linear: noise.theta_linear(t),
            }
        })
        .collect();
    Ok(DephasingRecord { coupling, noise: *noise, samples })
}

/// Probe density matrix with stochastic phase `θ(t)` of Gaussian statistics:
/// `⟨cos θ⟩ = cos(t/T) e^{−Θ/2}`, `⟨sin θ⟩ = sin(t/T) e^{−Θ/2}` with
/// `Θ = ⟨(θ₁ − θ₀)²⟩`.
pub fn phase_model_density(t: f64, period: f64, theta: f64) -> Result<ReducedDensity> {
    if !(period > 0.0) {
        return Err(Error::InvalidArgument(format!("period {period}")));
    }
    let damp = (-theta / 2.0).exp();
    let (s, c) = (t / period).sin_cos();
    let (cos_avg, sin_avg) = (c * damp, s * damp);
    Ok(ReducedDensity {
        rho: [
            [C64::new(0.5 * (1.0 + cos_avg), 0.0), C64::new(0.0, 0.5 * sin_avg)],
            [C64::new(0.0, -0.5 * sin_avg), C64::new(0.5 * (1.0 - cos_avg), 0.0)],
        ],
    })
}

/// Phase-model trajectory over sample times with a nondecreasing `Θ(t)`.
pub fn phase_model_trajectory(times: &[f64], period: f64, theta: impl Fn(f64) -> f64) -> Result<Vec<ReducedDensity>> {
    let mut last = f64::NEG_INFINITY;
    times
        .iter()
        .map(|&t| {
            let th = theta(t);
            if th < last - 1e-12 {
                return Err(Error::InvalidArgument(format!("Θ decreases at t = {t}")));
            }
            last = th;
            phase_model_density(t, period, th)
        })
        .collect()
}
