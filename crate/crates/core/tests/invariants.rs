//! Cross-module invariants checked through the public API.

use fockbath_core::dynamics::{evolve_krylov, DensePropagator, KrylovConfig};
use fockbath_core::hamiltonian::{build_bath_factor, build_decoupled, build_full};
use fockbath_core::stochastic::{NoiseSpec, SigmaConvention};
use fockbath_core::{purity, reduce, BasisIndex, FockKet, HubbardParams, ModelSpec, Probe, QuantumState};
use num_complex::Complex64;
use proptest::prelude::*;

fn params(u_scale: f64, g_scale: f64, u01_scale: f64, n: usize) -> HubbardParams {
    let mut p = HubbardParams::reference(n);
    p.u = [p.u[0] * u_scale, p.u[1] * u_scale];
    p.u01 *= u01_scale;
    p.g_i *= g_scale;
    p
}

fn state_from(seed: u64, dim: usize) -> QuantumState {
    // Small LCG: deterministic amplitudes without extra dependencies.
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut s = QuantumState::new((0..dim).map(|_| Complex64::new(next(), next())).collect());
    s.normalize();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn assembled_operators_are_symmetric(
        n in 1usize..6, u in 0.0f64..3.0, g in 0.0f64..3.0, u01 in 0.0f64..3.0, single in any::<bool>()
    ) {
        let p = params(u, g, u01, n);
        let spec = if single { ModelSpec::single_band(p, n) } else { ModelSpec::two_band(p, n) };
        let basis = spec.basis().unwrap();
        for h in [build_full(&spec, &basis).unwrap(), build_decoupled(&spec, &basis).unwrap(), build_bath_factor(&spec, &basis).unwrap()] {
            let d = h.to_dense();
            for i in 0..d.nrows() {
                for j in 0..i {
                    prop_assert!((d[(i, j)] - d[(j, i)]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn krylov_matches_dense_and_conserves(n in 1usize..5, seed in 0u64..1000, dt in 0.01f64..5.0) {
        let spec = ModelSpec::two_band(HubbardParams::reference(n), n);
        let basis = spec.basis().unwrap();
        let h = build_full(&spec, &basis).unwrap();
        let psi = state_from(seed, h.dim());
        let k = evolve_krylov(&psi, &h, dt, &KrylovConfig::default()).unwrap();
        let d = DensePropagator::new(&h).unwrap().evolve(&psi, dt).unwrap();
        prop_assert!(k.overlap(&d).norm() >= 1.0 - 1e-8);
        prop_assert!((k.norm() - 1.0).abs() < 1e-10);
        let (e0, e1) = (h.expectation(&psi.amplitudes), h.expectation(&k.amplitudes));
        prop_assert!((e0 - e1).abs() < 1e-9 * (1.0 + e0.abs()));
    }

    #[test]
    fn probe_purity_is_bounded(n in 1usize..6, seed in 0u64..1000) {
        let basis = BasisIndex::new(n, 4).unwrap();
        let psi = state_from(seed, basis.dim());
        let rho = reduce(&psi.amplitudes);
        let p = purity(&rho);
        prop_assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&p));
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_states_are_pure(n in 1usize..8, k in 0usize..10_000, right in any::<bool>()) {
        let basis = BasisIndex::new(n, 4).unwrap();
        let occ = basis.occupations(k % basis.dim_bath()).to_vec();
        let probe = if right { Probe::Right } else { Probe::Left };
        let psi = QuantumState::basis_ket(&basis, &FockKet::new(occ, probe)).unwrap();
        prop_assert!((purity(&reduce(&psi.amplitudes)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dephasing_exponent_is_monotone_and_below_asymptote(sigma in 1e-4f64..0.5, t in 0.0f64..1e4, dt in 0.0f64..100.0) {
        let noise = NoiseSpec::from_quoted(sigma, SigmaConvention::StdDev, 1, 1);
        let (a, b) = (noise.theta_exact(t), noise.theta_exact(t + dt));
        prop_assert!(a >= 0.0);
        prop_assert!(b >= a - 1e-12 * b.abs().max(1.0));
        prop_assert!(a <= noise.theta_linear(t) + 1e-12);
    }
}

#[test]
fn decoupled_bath_leaves_probe_pure() {
    let n = 4;
    let spec = ModelSpec::two_band(HubbardParams::reference(n), n);
    let basis = spec.basis().unwrap();
    let h = build_decoupled(&spec, &basis).unwrap();
    let dense = DensePropagator::new(&h).unwrap();
    let psi = QuantumState::basis_ket(&basis, &FockKet::new(vec![2, 1, 0, 1], Probe::Left)).unwrap();
    for t in [1.0, 13.0, 77.0, 400.0] {
        let p = purity(&reduce(&dense.evolve(&psi, t).unwrap().amplitudes));
        assert!((p - 1.0).abs() < 1e-10, "t={t}: {p}");
    }
}
