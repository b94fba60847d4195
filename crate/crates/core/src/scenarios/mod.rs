//! Benchmark scenarios, the time-loop driver and file output.

pub mod config;
pub mod output;
mod run;
pub mod study;

use std::f64::consts::PI;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::assembly::{FemOperators, ScalarField};

pub use config::{Profile, RunConfig, Scenario, SolverChoice};
pub use run::{run, run_with, RunRecord, Snapshot, StepEvent, TimeRow};

/// Closed-form solution `θ(x1, x2, t)`.
pub type ExactSolution = Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Range of the uniform random initial data.
pub const NOISE_AMPLITUDE: f64 = 10.0;

/// Evaluates a smooth profile at a point.
pub fn profile_value(profile: Profile, x1: f64, x2: f64) -> Option<f64> {
    let v = match profile {
        Profile::Smooth => x1.sin() * x2.sin() + x2.cos(),
        Profile::Eigenmode => x2.sin() * x1.cos(),
        Profile::SingleVortex => (-(x1 - PI).powi(2) - 16.0 * (x2 - PI).powi(2)).exp(),
        Profile::DoubleVortex => {
            let bump = |c: f64| (-16.0 * (x1 - c).powi(2) - (x2 - PI).powi(2)).exp();
            bump(PI + 0.5) + bump(PI - 0.5)
        }
        Profile::Noise => return None,
    };
    Some(v)
}

/// `n` draws, uniform on `[−10, 10)`.
///
/// The generator is SplitMix64 seeded directly with `seed`: the state
/// advances by `0x9e3779b97f4a7c15` and each output is mixed with the
/// multipliers `0xbf58476d1ce4e5b9`, `0x94d049bb133111eb` and shifts 30, 27,
/// 31. Each draw uses the top 53 bits, `(x >> 11) · 2⁻⁵³ ∈ [0, 1)`.
pub fn uniform_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            NOISE_AMPLITUDE * (2.0 * unit - 1.0)
        })
        .collect()
}

/// Nodal initial buoyancy with its lumped mean removed.
pub fn initial_field(ops: &FemOperators, profile: Profile, seed: u64) -> ScalarField {
    let mut theta = match profile {
        Profile::Noise => uniform_noise(ops.mesh.num_vertices(), seed),
        p => ops
            .mesh
            .vertices()
            .iter()
            .map(|v| profile_value(p, v[0], v[1]).expect("smooth profile"))
            .collect(),
    };
    ops.remove_mean(&mut theta);
    theta
}

/// Exact solution of a configuration, when one is known.
///
/// Under a constant velocity `u` the smooth profiles are sums of Laplacian
/// eigenmodes, each transported rigidly and damped by `e^{−ϰ λ^s t}`.
pub fn exact_solution(cfg: &RunConfig) -> Option<ExactSolution> {
    let [u1, u2] = cfg.frozen_velocity?;
    let (kappa, s) = (cfg.kappa, cfg.s);
    let damp = move |lambda: f64, t: f64| (-kappa * lambda.powf(s) * t).exp();
    match cfg.initial {
        Profile::Smooth => Some(Box::new(move |x1, x2, t| {
            let (y1, y2) = (x1 - u1 * t, x2 - u2 * t);
            y1.sin() * y2.sin() * damp(2.0, t) + y2.cos() * damp(1.0, t)
        })),
        Profile::Eigenmode => Some(Box::new(move |x1, x2, t| {
            let (y1, y2) = (x1 - u1 * t, x2 - u2 * t);
            y2.sin() * y1.cos() * damp(2.0, t)
        })),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{FemSystem, SolverKind};

    fn ops(n: usize) -> FemOperators {
        FemSystem::uniform(n, SolverKind::Spectral).unwrap().ops
    }

    #[test]
    fn smooth_profile_at_quarter_point() {
        let ops = ops(8);
        let theta = initial_field(&ops, Profile::Smooth, 0);
        let id = ops.mesh.vertex_id(2, 2);
        assert!((theta[id] - 1.0).abs() < 1e-12);
        let raw: Vec<f64> = ops
            .mesh
            .vertices()
            .iter()
            .map(|v| profile_value(Profile::Smooth, v[0], v[1]).unwrap())
            .collect();
        assert!(ops.lumped_mean(&raw).abs() <= 1e-12);
    }

    #[test]
    fn vortex_peaks_at_centre() {
        assert_eq!(profile_value(Profile::SingleVortex, PI, PI), Some(1.0));
        let ops = ops(16);
        let theta = initial_field(&ops, Profile::SingleVortex, 0);
        assert!(ops.lumped_mean(&theta).abs() < 1e-14);
    }

    #[test]
    fn double_vortex_is_symmetric() {
        let a = profile_value(Profile::DoubleVortex, PI + 0.3, 2.0).unwrap();
        let b = profile_value(Profile::DoubleVortex, PI - 0.3, 2.0).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn noise_matches_reference_splitmix() {
        fn reference(state: &mut u64) -> u64 {
            *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = *state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^ (z >> 31)
        }
        let mut state = 42u64;
        let expected: Vec<f64> = (0..100)
            .map(|_| {
                let x = reference(&mut state);
                -10.0 + 20.0 * ((x >> 11) as f64 / 9_007_199_254_740_992.0)
            })
            .collect();
        let got = uniform_noise(100, 42);
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-14, "{g} vs {e}");
        }
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let ops = ops(32);
        let a = initial_field(&ops, Profile::Noise, 7);
        let b = initial_field(&ops, Profile::Noise, 7);
        let c = initial_field(&ops, Profile::Noise, 8);
        assert_eq!(a, b);
        let differ = a.iter().zip(&c).filter(|(x, y)| x != y).count();
        assert!(differ as f64 > 0.99 * a.len() as f64);
        assert!(a.iter().all(|v| v.abs() <= 10.5));
    }

    #[test]
    fn exact_solution_starts_at_profile() {
        for sc in [Scenario::SmoothConvection, Scenario::FractionalDiffusion] {
            let cfg = RunConfig::preset(sc);
            let exact = exact_solution(&cfg).unwrap();
            let v = profile_value(cfg.initial, 0.7, 2.3).unwrap();
            assert!((exact(0.7, 2.3, 0.0) - v).abs() < 1e-15);
        }
        assert!(exact_solution(&RunConfig::preset(Scenario::SingleVortex)).is_none());
    }

    #[test]
    fn smooth_convection_is_periodic_in_time() {
        let cfg = RunConfig::preset(Scenario::SmoothConvection);
        let exact = exact_solution(&cfg).unwrap();
        let v = exact(1.1, 0.4, 2.0 * PI);
        assert!((v - exact(1.1, 0.4, 0.0)).abs() < 1e-12);
    }

    #[test]
    fn eigenmode_decays_at_fractional_rate() {
        let cfg = RunConfig::preset(Scenario::FractionalDiffusion);
        let exact = exact_solution(&cfg).unwrap();
        let (x1, x2) = (0.0, PI / 2.0);
        let t = 3.0;
        let expected = (-t * 2f64.powf(0.25) / 1000.0).exp();
        assert!((exact(x1, x2, t) - expected).abs() < 1e-15);
    }
}
