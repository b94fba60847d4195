//! Monitored quantities, error norms, Schlieren fields and the
//! two-point-correlation energy spectrum.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::assembly::FemOperators;
use crate::error::{Result, SqgError};
use crate::mesh::TorusMesh;
use crate::par;

/// `K(θ) = ½ ∫ θ²` with the consistent mass (exact for P1).
pub fn kinetic_energy(ops: &FemOperators, theta: &[f64]) -> Result<f64> {
    Ok(0.5 * ops.mass.bilinear(theta, theta)?)
}

/// `½ Σ m_i θ_i²`.
pub fn lumped_kinetic_energy(ops: &FemOperators, theta: &[f64]) -> f64 {
    0.5 * ops
        .lumped
        .iter()
        .zip(theta)
        .map(|(m, t)| m * t * t)
        .sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Helicity {
    /// `∫ ψ θ`
    pub integral: f64,
    /// `H(θ) = −∫ ψ θ`
    pub signed: f64,
}

pub fn helicity(ops: &FemOperators, theta: &[f64], psi: &[f64]) -> Result<Helicity> {
    let integral = ops.mass.bilinear(psi, theta)?;
    Ok(Helicity {
        integral,
        signed: -integral,
    })
}

/// Largest Euclidean norm of the element gradients.
pub fn grad_sup_norm(ops: &FemOperators, theta: &[f64]) -> f64 {
    ops.element_gradients(theta)
        .iter()
        .map(|g| g[0].hypot(g[1]))
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// `L¹`, `L²` by the edge-midpoint rule and `L∞` over vertices and edge
/// midpoints. `exact` receives unwrapped coordinates; it must be periodic.
pub fn error_norms<F>(ops: &FemOperators, theta: &[f64], exact: F) -> ErrorNorms
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let mesh = &ops.mesh;
    let per_tri = par::map(mesh.triangles().len(), |t| {
        let tri = mesh.triangles()[t];
        let x = mesh.triangle_coords(t);
        let w = ops.areas[t] / 3.0;
        let (mut l1, mut l2, mut linf) = (0.0, 0.0, 0.0f64);
        for a in 0..3 {
            let b = (a + 1) % 3;
            let mx = 0.5 * (x[a][0] + x[b][0]);
            let my = 0.5 * (x[a][1] + x[b][1]);
            let e = 0.5 * (theta[tri[a]] + theta[tri[b]]) - exact(mx, my);
            l1 += w * e.abs();
            l2 += w * e * e;
            linf = linf
                .max(e.abs())
                .max((theta[tri[a]] - exact(x[a][0], x[a][1])).abs());
        }
        (l1, l2, linf)
    });
    let (mut l1, mut l2, mut linf) = (0.0, 0.0, 0.0f64);
    for (a, b, c) in per_tri {
        l1 += a;
        l2 += b;
        linf = linf.max(c);
    }
    ErrorNorms {
        l1,
        l2: l2.sqrt(),
        linf,
    }
}

/// `log2(e_k / e_{k+1})` for successive halvings of `h`; `None` where an
/// error vanishes.
pub fn convergence_rates(errors: &[f64]) -> Vec<Option<f64>> {
    errors
        .windows(2)
        .map(|w| (w[0] > 0.0 && w[1] > 0.0).then(|| (w[0] / w[1]).log2()))
        .collect()
}

/// Schlieren shading `σ = exp(−10 (|∇θ| − min) / (max − min))` with the
/// gradient magnitude taken from the patch-averaged nodal gradient.
pub fn schlieren(ops: &FemOperators, theta: &[f64]) -> Vec<f64> {
    let g = ops.patch_gradients(theta);
    let mag: Vec<f64> = g.u1.iter().zip(&g.u2).map(|(a, b)| a.hypot(*b)).collect();
    let lo = mag.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        log::info!("constant gradient magnitude; Schlieren field is uniform");
        return vec![1.0; mag.len()];
    }
    mag.iter()
        .map(|m| (-10.0 * (m - lo) / (hi - lo)).exp())
        .collect()
}

/// Spectrum of the two-point correlation in the first coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    /// `R(2πm/N)`, `m = 0..N`.
    pub correlation: Vec<f64>,
    /// `|R̃_m|`, `m = 0..=N/2`.
    pub modulus: Vec<f64>,
    /// `Σ_{m=0}^{N−1} |R̃_m|`, which reproduces `R(0)`.
    pub modulus_sum: f64,
}

/// `R(2πm/N) = (h²/2) Σ θ_{i1,i2} θ_{i1+m,i2}` followed by
/// `R̃_m = (1/N) Σ_n R(2πn/N) e^{−2πi nm/N}` (computed by FFT).
pub fn energy_spectrum(mesh: &TorusMesh, theta: &[f64]) -> Result<Spectrum> {
    let n = mesh.n_side();
    if theta.len() != n * n {
        return Err(SqgError::DimensionMismatch {
            expected: n * n,
            got: theta.len(),
        });
    }
    let h2 = mesh.h() * mesh.h();
    let correlation = par::map(n, |m| {
        let mut acc = 0.0;
        for i2 in 0..n {
            let row = &theta[i2 * n..(i2 + 1) * n];
            for i1 in 0..n {
                acc += row[i1] * row[(i1 + m) % n];
            }
        }
        0.5 * h2 * acc
    });
    let mut buf: Vec<Complex64> = correlation
        .iter()
        .map(|r| Complex64::new(*r, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let inv_n = 1.0 / n as f64;
    let full: Vec<f64> = buf.iter().map(|c| c.norm() * inv_n).collect();
    let modulus_sum = full.iter().sum();
    Ok(Spectrum {
        correlation,
        modulus: full[..=n / 2].to_vec(),
        modulus_sum,
    })
}

/// Least-squares slope of `log |R̃_m|` against `log m` over `[lo, hi]`.
pub fn slope_fit(modulus: &[f64], lo: usize, hi: usize) -> Result<f64> {
    let bad = |reason: &str| {
        Err(SqgError::InvalidBand {
            lo,
            hi,
            reason: reason.into(),
        })
    };
    if lo < 1 || hi <= lo || hi >= modulus.len() {
        return bad(&format!("need 1 ≤ lo < hi < {}", modulus.len()));
    }
    let pts: Vec<(f64, f64)> = (lo..=hi).map(|m| ((m as f64).ln(), modulus[m])).collect();
    if pts.iter().any(|(_, v)| !(*v > 0.0)) {
        return bad("zero or non-finite modulus in band");
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, v) in &pts {
        sxy += (x - mx) * (v.ln() - my);
        sxx += (x - mx) * (x - mx);
    }
    Ok(sxy / sxx)
}
