//! Sinc-quadrature realisations of spectral fractional Laplacians.
//!
//! Negative powers use the Balakrishnan representation
//! `(−Δ)^{−s} f = (sin πs / π) ∫ e^{(1−s)y} w(y) dy` with `e^y w − Δw = f`;
//! positive powers act through
//! `∫(−Δ)^s V W = (sin πs / π) ∫_ℝ e^{sy} ∫(V + Ṽ(y)) W dy` with
//! `Ṽ + e^{−y}(−Δ)Ṽ = −V`. Both integrals in `y` are truncated to the
//! nodes `y_ℓ = ℓk`, `ℓ = −M..M`, and summed in ascending `ℓ`.
//!
//! With the CG backend every node costs one shifted solve (the solves run
//! concurrently). With the spectral backend each node contributes its exact
//! Fourier response and the weighted sum collapses into one multiplier.

use std::f64::consts::PI;

use crate::error::{Result, SqgError};
use crate::par;
use crate::system::{FemSystem, MassKind};

/// Quadrature spacing `k` and truncation `M` of the sinc rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SincQuadrature {
    pub k: f64,
    pub m: usize,
}

impl SincQuadrature {
    pub fn new(k: f64, m: usize) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(SqgError::InvalidParameter {
                name: "sinc_k".into(),
                reason: format!("spacing must be positive, got {k}"),
            });
        }
        if m < 1 {
            return Err(SqgError::InvalidParameter {
                name: "sinc_m".into(),
                reason: "truncation must be at least 1".into(),
            });
        }
        Ok(Self { k, m })
    }

    /// `k = 0.8, M = 12`, the default configuration.
    pub fn standard() -> Self {
        Self { k: 0.8, m: 12 }
    }

    /// `k = 0.2, M = 62`.
    pub fn fine() -> Self {
        Self { k: 0.2, m: 62 }
    }

    /// Nodes `y_ℓ = ℓk` in ascending order.
    pub fn nodes(&self) -> Vec<f64> {
        let m = self.m as i64;
        (-m..=m).map(|l| l as f64 * self.k).collect()
    }

    pub fn num_nodes(&self) -> usize {
        2 * self.m + 1
    }
}

impl Default for SincQuadrature {
    fn default() -> Self {
        Self::standard()
    }
}

/// Fractional exponent `s ∈ (0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracPower(f64);

impl FracPower {
    pub fn new(s: f64) -> Result<Self> {
        if s > 0.0 && s < 1.0 {
            Ok(Self(s))
        } else {
            Err(SqgError::InvalidParameter {
                name: "s".into(),
                reason: format!("exponent must lie in (0, 1), got {s}"),
            })
        }
    }

    pub fn half() -> Self {
        Self(0.5)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `sin(πs) / π`, the weight of both integrals over all of ℝ (for an
    /// eigenvalue λ they integrate to exactly `λ^{−s}` and `λ^s`).
    fn weight(self) -> f64 {
        (PI * self.0).sin() / PI
    }
}

const INV_KEY: u8 = 0;
const LUMPED_KEY: u8 = 1;
const CONSISTENT_KEY: u8 = 2;

fn key(kind: u8, s: FracPower, q: SincQuadrature) -> (u8, u64, u64, usize) {
    (kind, s.0.to_bits(), q.k.to_bits(), q.m)
}

fn check_zero_mean(sys: &FemSystem, f: &[f64]) -> Result<()> {
    let scale = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mean = sys.ops.lumped_mean(f);
    if mean.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(SqgError::NotZeroMean { mean });
    }
    Ok(())
}

fn check_len(sys: &FemSystem, f: &[f64]) -> Result<()> {
    if f.len() != sys.n() {
        return Err(SqgError::DimensionMismatch {
            expected: sys.n(),
            got: f.len(),
        });
    }
    Ok(())
}

/// Per-node shifted solves `(α·Mass + e^{−y}·Stiffness) x = rhs(y)`, in
/// ascending node order.
fn node_solves<F>(
    sys: &FemSystem,
    q: SincQuadrature,
    mass: MassKind,
    rhs: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64) -> Vec<f64> + Sync + Send,
{
    let nodes = q.nodes();
    let results = par::map(nodes.len(), |l| {
        let y = nodes[l];
        let b = rhs(y);
        sys.solve_shifted(mass, 1.0, (-y).exp(), &b)
            .and_then(|(x, rep)| {
                if rep.converged {
                    Ok(x)
                } else {
                    Err(SqgError::SincSolveFailed {
                        y,
                        residual: rep.final_residual,
                        iterations: rep.iterations,
                    })
                }
            })
    });
    results.into_iter().collect()
}

/// Approximates `(−Δ)^{−s} f` for a zero-mean field.
pub fn inv_frac_apply(
    sys: &FemSystem,
    f: &[f64],
    s: FracPower,
    q: SincQuadrature,
) -> Result<Vec<f64>> {
    check_len(sys, f)?;
    check_zero_mean(sys, f)?;
    let mut v = if sys.spectral().is_some() {
        let mult = sys.multiplier(key(INV_KEY, s, q), |sp| {
            let nodes = q.nodes();
            sp.mass
                .iter()
                .zip(&sp.stiffness)
                .enumerate()
                .map(|(idx, (m, kk))| {
                    if idx == 0 {
                        return 0.0;
                    }
                    let mut acc = 0.0;
                    for &y in &nodes {
                        let e = (-y).exp();
                        // e^{(1−s)y} · e^{−y} m / (m + e^{−y} k)
                        acc += (-s.0 * y).exp() * m / (m + e * kk);
                    }
                    s.weight() * q.k * acc
                })
                .collect()
        });
        sys.spectral().unwrap().fft.apply_multiplier(f, &mult)
    } else {
        let mf = sys.ops.mass.apply(f)?;
        let ws = node_solves(sys, q, MassKind::Consistent, |y| {
            let e = (-y).exp();
            mf.iter().map(|v| e * v).collect()
        })?;
        let mut v = vec![0.0; sys.n()];
        for (w, y) in ws.iter().zip(q.nodes()) {
            let c = s.weight() * q.k * ((1.0 - s.0) * y).exp();
            v.iter_mut().zip(w).for_each(|(a, b)| *a += c * b);
        }
        v
    };
    sys.ops.remove_mean(&mut v);
    Ok(v)
}

/// Nodal values `A_i(Θ)` of the mass-lumped fractional action.
pub fn lumped_frac_action(
    sys: &FemSystem,
    theta: &[f64],
    s: FracPower,
    q: SincQuadrature,
) -> Result<Vec<f64>> {
    check_len(sys, theta)?;
    let c = s.weight() * q.k;
    if sys.spectral().is_some() {
        let mult = sys.multiplier(key(LUMPED_KEY, s, q), |sp| {
            positive_multiplier(&sp.lumped, &sp.stiffness, s, q)
        });
        return Ok(sys.spectral().unwrap().fft.apply_multiplier(theta, &mult));
    }
    let m = &sys.ops.lumped;
    let rhs: Vec<f64> = m.iter().zip(theta).map(|(m, t)| -m * t).collect();
    let vs = node_solves(sys, q, MassKind::Lumped, |_| rhs.clone())?;
    let mut a = vec![0.0; sys.n()];
    for (v, y) in vs.iter().zip(q.nodes()) {
        let w = c * (s.0 * y).exp();
        for i in 0..a.len() {
            a[i] += w * (theta[i] + v[i]);
        }
    }
    Ok(a)
}

fn positive_multiplier(mass: &[f64], stiff: &[f64], s: FracPower, q: SincQuadrature) -> Vec<f64> {
    let c = s.weight() * q.k;
    let nodes = q.nodes();
    mass.iter()
        .zip(stiff)
        .map(|(m, kk)| {
            let mut acc = 0.0;
            for &y in &nodes {
                let e = (-y).exp();
                // 1 − m / (m + e k), written without cancellation
                acc += (s.0 * y).exp() * (e * kk) / (m + e * kk);
            }
            c * acc
        })
        .collect()
}

/// Cached auxiliary solves for the bilinear form `A_{h,k}(V, ·)`.
///
/// Holds `Z = (sin πs/π) k Σ_ℓ e^{s y_ℓ} (V + Ṽ(y_ℓ; V))`, so that
/// `A_{h,k}(V, W) = ∫ Z W` for every `W`.
#[derive(Clone, Debug)]
pub struct FracAction {
    weighted: Vec<f64>,
}

impl FracAction {
    pub fn new(sys: &FemSystem, v: &[f64], s: FracPower, q: SincQuadrature) -> Result<Self> {
        check_len(sys, v)?;
        let weighted = if sys.spectral().is_some() {
            let mult = sys.multiplier(key(CONSISTENT_KEY, s, q), |sp| {
                positive_multiplier(&sp.mass, &sp.stiffness, s, q)
            });
            sys.spectral().unwrap().fft.apply_multiplier(v, &mult)
        } else {
            let mv = sys.ops.mass.apply(v)?;
            let rhs: Vec<f64> = mv.iter().map(|x| -x).collect();
            let vs = node_solves(sys, q, MassKind::Consistent, |_| rhs.clone())?;
            let c = s.weight() * q.k;
            let mut z = vec![0.0; sys.n()];
            for (vt, y) in vs.iter().zip(q.nodes()) {
                let w = c * (s.0 * y).exp();
                for i in 0..z.len() {
                    z[i] += w * (v[i] + vt[i]);
                }
            }
            z
        };
        Ok(Self { weighted })
    }

    /// `A_{h,k}(V, W)`.
    pub fn eval(&self, sys: &FemSystem, w: &[f64]) -> Result<f64> {
        check_len(sys, w)?;
        sys.ops.mass.bilinear(&self.weighted, w)
    }
}

/// `A_{h,k}(V, W)` without caching.
pub fn frac_action_bilinear(
    sys: &FemSystem,
    v: &[f64],
    w: &[f64],
    s: FracPower,
    q: SincQuadrature,
) -> Result<f64> {
    FracAction::new(sys, v, s, q)?.eval(sys, w)
}
