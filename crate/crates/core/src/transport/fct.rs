//! Zalesak flux limiting between the low- and high-order updates.

use crate::assembly::FemOperators;
use crate::par;
use crate::transport::viscosity::GraphViscosity;

/// Anti-diffusive fluxes `𝒜_ij`, stored per pattern entry (zero on the
/// diagonal). Skew-symmetric by construction.
#[derive(Clone, Debug)]
pub struct AntiDiffusiveFlux {
    pub values: Vec<f64>,
}

/// Limiter coefficients `L_ij ∈ [0, 1]`, stored per pattern entry.
#[derive(Clone, Debug)]
pub struct Limiter {
    pub values: Vec<f64>,
}

impl Limiter {
    pub fn constant(ops: &FemOperators, value: f64) -> Self {
        Self {
            values: vec![value; ops.pattern.nnz()],
        }
    }
}

/// `𝒜_ij = −(m_ij/Δt)((θ^H_j − θ_j) − (θ^H_i − θ_i)) + (d^H_ij − d^L_ij)(θ_j − θ_i)`.
pub fn anti_diffusive_fluxes(
    ops: &FemOperators,
    theta_h: &[f64],
    theta_n: &[f64],
    dl: &GraphViscosity,
    dh: &GraphViscosity,
    dt: f64,
) -> AntiDiffusiveFlux {
    let p = &ops.pattern;
    let m = ops.mass.values();
    let (vl, vh) = (dl.values(), dh.values());
    let values = p.entry_values(|i, j, k| {
        if j == i {
            return 0.0;
        }
        let dj = theta_h[j] - theta_n[j];
        let di = theta_h[i] - theta_n[i];
        let a = -m[k] / dt * (dj - di) + (vh[k] - vl[k]) * (theta_n[j] - theta_n[i]);
        if j > i {
            a
        } else {
            // the mirror entry of (j, i), negated bit-exactly
            let kt = p.transpose_pos(k);
            let dj = theta_h[i] - theta_n[i];
            let di = theta_h[j] - theta_n[j];
            -(-m[kt] / dt * (dj - di) + (vh[kt] - vl[kt]) * (theta_n[i] - theta_n[j]))
        }
    });
    AntiDiffusiveFlux { values }
}

/// Local bounds `min / max_{j ∈ I(i)} θ_j`.
pub fn local_bounds(ops: &FemOperators, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let p = &ops.pattern;
    let b = par::map(p.num_rows(), |i| {
        p.cols(i)
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &j| {
                (lo.min(theta[j]), hi.max(theta[j]))
            })
    });
    b.into_iter().unzip()
}

/// Zalesak limiter for the bounds `[lo_i, hi_i]` around the low-order
/// solution.
pub fn zalesak_limiter(
    ops: &FemOperators,
    flux: &AntiDiffusiveFlux,
    theta_l: &[f64],
    lo: &[f64],
    hi: &[f64],
    dt: f64,
) -> Limiter {
    let p = &ops.pattern;
    let a = &flux.values;
    let ratios = par::map(p.num_rows(), |i| {
        let (mut pp, mut pm) = (0.0, 0.0);
        for k in p.row_range(i) {
            pp += a[k].max(0.0);
            pm += a[k].min(0.0);
        }
        let s = ops.lumped[i] / dt;
        let qp = (s * (hi[i] - theta_l[i])).max(0.0);
        let qm = (s * (lo[i] - theta_l[i])).min(0.0);
        let rp = if pp == 0.0 { 1.0 } else { (qp / pp).min(1.0) };
        let rm = if pm == 0.0 { 1.0 } else { (qm / pm).min(1.0) };
        (rp, rm)
    });
    let values = p.entry_values(|i, j, k| {
        if j == i {
            return 0.0;
        }
        // evaluate on the upper entry so L_ij = L_ji exactly
        let (i, j, k) = if j > i {
            (i, j, k)
        } else {
            (j, i, p.transpose_pos(k))
        };
        if a[k] >= 0.0 {
            ratios[i].0.min(ratios[j].1)
        } else {
            ratios[i].1.min(ratios[j].0)
        }
    });
    Limiter { values }
}

/// `θ_i = θ^L_i + (Δt/m_i) Σ_j L_ij 𝒜_ij`.
pub fn apply_limited(
    ops: &FemOperators,
    theta_l: &[f64],
    flux: &AntiDiffusiveFlux,
    limiter: &Limiter,
    dt: f64,
) -> Vec<f64> {
    let p = &ops.pattern;
    let mut out = vec![0.0; theta_l.len()];
    par::fill(&mut out, |i| {
        let s: f64 = p
            .row_range(i)
            .map(|k| limiter.values[k] * flux.values[k])
            .sum();
        theta_l[i] + dt / ops.lumped[i] * s
    });
    out
}

/// Full FCT combination with local bounds taken from `θⁿ`.
pub fn fct_combine(
    ops: &FemOperators,
    theta_l: &[f64],
    theta_h: &[f64],
    theta_n: &[f64],
    dl: &GraphViscosity,
    dh: &GraphViscosity,
    dt: f64,
) -> Vec<f64> {
    let flux = anti_diffusive_fluxes(ops, theta_h, theta_n, dl, dh, dt);
    let (lo, hi) = local_bounds(ops, theta_n);
    let lim = zalesak_limiter(ops, &flux, theta_l, &lo, &hi, dt);
    apply_limited(ops, theta_l, &flux, &lim, dt)
}
