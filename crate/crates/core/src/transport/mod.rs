//! Buoyancy transport: low-order graph-viscosity update, Galerkin
//! predictor, entropy-viscosity high-order update and FCT limiting, each a
//! forward Euler step inside SSP-RK3.

pub mod fct;
mod rk;
pub mod viscosity;

pub use fct::{fct_combine, AntiDiffusiveFlux, Limiter};
pub use rk::{ssprk3_step, StepOutcome, TransportState};
pub use viscosity::{low_order_viscosity, select_dt, DtChoice, GraphViscosity};

use std::fmt;
use std::str::FromStr;

use crate::assembly::{FemOperators, VectorField2};
use crate::error::{Result, SqgError};
use crate::fractional::{lumped_frac_action, FracPower, SincQuadrature};
use crate::par;
use crate::sparse::SparseOperator;
use crate::system::FemSystem;
use crate::velocity::{velocity_of, VelocityMode};

/// Space discretisation used inside each Euler step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SchemeKind {
    Galerkin,
    LowOrder,
    EntropyViscosity,
    #[default]
    Fct,
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "galerkin" => Ok(Self::Galerkin),
            "low_order" | "loworder" => Ok(Self::LowOrder),
            "ev" | "entropy_viscosity" => Ok(Self::EntropyViscosity),
            "fct" => Ok(Self::Fct),
            other => Err(format!(
                "unknown scheme `{other}` (expected galerkin, low_order, ev or fct)"
            )),
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Galerkin => "galerkin",
            Self::LowOrder => "low_order",
            Self::EntropyViscosity => "ev",
            Self::Fct => "fct",
        })
    }
}

/// Normalisation of the entropy residual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Normalization {
    /// `η̃_i = max(|max_{I(i)} η − min_{I(i)} η|, ε|η(θ_i)|)`
    #[default]
    Local,
    /// `max(η̃_i, |η(θ_i)|)`
    Max,
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "local" => Ok(Self::Local),
            "max" => Ok(Self::Max),
            other => Err(format!(
                "unknown normalization `{other}` (expected local or max)"
            )),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Local => "local",
            Self::Max => "max",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvConfig {
    pub c_ev: f64,
    pub epsilon: f64,
    pub normalization: Normalization,
}

impl Default for EvConfig {
    fn default() -> Self {
        Self {
            c_ev: 1.0,
            epsilon: 1e-8,
            normalization: Normalization::Local,
        }
    }
}

/// Where the transport velocity comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VelocitySource {
    /// A constant field, independent of the buoyancy.
    Frozen([f64; 2]),
    /// Recovered from the buoyancy through its stream function.
    Computed(VelocityMode),
}

/// Everything a time step needs besides the mesh and the state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportConfig {
    pub scheme: SchemeKind,
    pub ev: EvConfig,
    pub kappa: f64,
    pub s: FracPower,
    pub quad: SincQuadrature,
    pub velocity: VelocitySource,
    pub cfl: f64,
    pub dt_max: f64,
    /// Fixed step overriding the CFL selection.
    pub fixed_dt: Option<f64>,
    /// Recompute the velocity at every SSP-RK3 stage (otherwise once per
    /// step).
    pub refresh_velocity: bool,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            scheme: SchemeKind::Fct,
            ev: EvConfig::default(),
            kappa: 0.0,
            s: FracPower::half(),
            quad: SincQuadrature::standard(),
            velocity: VelocitySource::Computed(VelocityMode::Sqg),
            cfl: 0.25,
            dt_max: f64::INFINITY,
            fixed_dt: None,
            refresh_velocity: true,
        }
    }
}

impl TransportConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: String| {
            Err(SqgError::InvalidParameter {
                name: name.into(),
                reason,
            })
        };
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return bad("cfl", format!("must lie in (0, 1/2], got {}", self.cfl));
        }
        if !(self.ev.c_ev > 0.0) {
            return bad("c_ev", format!("must be positive, got {}", self.ev.c_ev));
        }
        if !(self.ev.epsilon > 0.0) {
            return bad(
                "epsilon",
                format!("must be positive, got {}", self.ev.epsilon),
            );
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad(
                "kappa",
                format!("must be finite and nonnegative, got {}", self.kappa),
            );
        }
        if !(self.dt_max > 0.0) {
            return bad("dt_max", format!("must be positive, got {}", self.dt_max));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad("dt", format!("must be positive, got {dt}"));
            }
        }
        Ok(())
    }
}

/// Nodal velocity for a buoyancy field under the configured source.
pub fn stage_velocity(
    sys: &FemSystem,
    theta: &[f64],
    cfg: &TransportConfig,
) -> Result<VectorField2> {
    match cfg.velocity {
        VelocitySource::Frozen(v) => Ok(VectorField2::constant(sys.n(), v)),
        VelocitySource::Computed(mode) => Ok(velocity_of(sys, theta, mode, cfg.quad)?.1),
    }
}

/// `F(θ)` and, when `ϰ > 0`, `A(θ)`.
struct ExplicitTerms {
    flux: Vec<f64>,
    action: Option<Vec<f64>>,
}

impl ExplicitTerms {
    fn new(
        sys: &FemSystem,
        theta: &[f64],
        u: &VectorField2,
        kappa: f64,
        s: FracPower,
        q: SincQuadrature,
    ) -> Result<Self> {
        let flux = sys.ops.transport_flux(u, theta);
        let action = if kappa > 0.0 {
            Some(lumped_frac_action(sys, theta, s, q)?)
        } else {
            None
        };
        Ok(Self { flux, action })
    }

    /// `−F_i − ϰ m_i A_i`.
    fn rhs(&self, ops: &FemOperators, kappa: f64) -> Vec<f64> {
        let mut r: Vec<f64> = self.flux.iter().map(|f| -f).collect();
        if let Some(a) = &self.action {
            for ((r, a), m) in r.iter_mut().zip(a).zip(&ops.lumped) {
                *r -= kappa * m * a;
            }
        }
        r
    }
}

fn check_inputs(sys: &FemSystem, theta: &[f64], u: &VectorField2) -> Result<()> {
    for len in [theta.len(), u.u1.len(), u.u2.len()] {
        if len != sys.n() {
            return Err(SqgError::DimensionMismatch {
                expected: sys.n(),
                got: len,
            });
        }
    }
    Ok(())
}

fn low_order_from(
    ops: &FemOperators,
    theta: &[f64],
    rhs: &[f64],
    dl: &GraphViscosity,
    dt: f64,
) -> Vec<f64> {
    let diff = dl.apply(theta);
    let mut out = vec![0.0; theta.len()];
    par::fill(&mut out, |i| {
        theta[i] + dt / ops.lumped[i] * (rhs[i] + diff[i])
    });
    out
}

/// Consistent-mass update `θ + M⁻¹ Δt b`.
fn consistent_update(sys: &FemSystem, theta: &[f64], b: &[f64], dt: f64) -> Result<Vec<f64>> {
    let scaled: Vec<f64> = b.iter().map(|v| dt * v).collect();
    let delta = sys.solve_mass(&scaled)?;
    Ok(theta.iter().zip(&delta).map(|(t, d)| t + d).collect())
}

/// Low-order update
/// `m_i θ^L_i = m_i θ_i − Δt Σ_j u_j·c_ij θ_j − ϰΔt m_i A_i(θ) + Δt Σ_j d_ij θ_j`.
#[allow(clippy::too_many_arguments)]
pub fn low_order_euler(
    sys: &FemSystem,
    theta: &[f64],
    u: &VectorField2,
    dl: &GraphViscosity,
    dt: f64,
    kappa: f64,
    s: FracPower,
    q: SincQuadrature,
) -> Result<Vec<f64>> {
    check_inputs(sys, theta, u)?;
    let ex = ExplicitTerms::new(sys, theta, u, kappa, s, q)?;
    Ok(low_order_from(
        &sys.ops,
        theta,
        &ex.rhs(&sys.ops, kappa),
        dl,
        dt,
    ))
}

/// Galerkin update `Σ_j m_ij (θ^G_j − θ_j) = Δt(−Σ_j u_j·c_ij θ_j − ϰ m_i A_i(θ))`.
pub fn galerkin_euler(
    sys: &FemSystem,
    theta: &[f64],
    u: &VectorField2,
    dt: f64,
    kappa: f64,
    s: FracPower,
    q: SincQuadrature,
) -> Result<Vec<f64>> {
    check_inputs(sys, theta, u)?;
    let ex = ExplicitTerms::new(sys, theta, u, kappa, s, q)?;
    consistent_update(sys, theta, &ex.rhs(&sys.ops, kappa), dt)
}

#[allow(clippy::too_many_arguments)]
fn residual_from(
    sys: &FemSystem,
    theta_n: &[f64],
    theta_g: &[f64],
    u: &VectorField2,
    action_n: Option<&[f64]>,
    kappa: f64,
    s: FracPower,
    q: SincQuadrature,
) -> Result<Vec<f64>> {
    let diff: Vec<f64> = theta_n.iter().zip(theta_g).map(|(a, b)| a - b).collect();
    let mut r = sys.ops.transport_flux(u, &diff);
    if kappa > 0.0 {
        let an = match action_n {
            Some(a) => a.to_vec(),
            None => lumped_frac_action(sys, theta_n, s, q)?,
        };
        let ag = lumped_frac_action(sys, theta_g, s, q)?;
        for i in 0..r.len() {
            r[i] += kappa * sys.ops.lumped[i] * (an[i] - ag[i]);
        }
    }
    // η'(θ) = θ, weighted nodally
    for (r, t) in r.iter_mut().zip(theta_n) {
        *r *= t;
    }
    Ok(r)
}

/// Entropy residual `R_i` for `η(θ) = θ²/2`, weighted nodally by `η'(θ_i)`.
#[allow(clippy::too_many_arguments)]
pub fn entropy_residual(
    sys: &FemSystem,
    theta_n: &[f64],
    theta_g: &[f64],
    u: &VectorField2,
    kappa: f64,
    s: FracPower,
    q: SincQuadrature,
) -> Result<Vec<f64>> {
    check_inputs(sys, theta_n, u)?;
    check_inputs(sys, theta_g, u)?;
    residual_from(sys, theta_n, theta_g, u, None, kappa, s, q)
}

/// Entropy normalisation `η̃_i` under the chosen variant.
pub fn entropy_normalization(ops: &FemOperators, theta: &[f64], ev: &EvConfig) -> Vec<f64> {
    let p = &ops.pattern;
    let eta = |t: f64| 0.5 * t * t;
    par::map(p.num_rows(), |i| {
        let (lo, hi) = p
            .cols(i)
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &j| {
                let e = eta(theta[j]);
                (lo.min(e), hi.max(e))
            });
        let ei = eta(theta[i]).abs();
        let local = (hi - lo).abs().max(ev.epsilon * ei);
        match ev.normalization {
            Normalization::Local => local,
            Normalization::Max => local.max(ei),
        }
    })
}

/// `d^H_ij = min(d^L_ij, c_EV · max(|R_i|/η̃_i, |R_j|/η̃_j))`, `i ≠ j`.
///
/// Rows whose normalisation vanishes (locally zero field) get zero
/// viscosity.
pub fn high_order_viscosity(
    ops: &FemOperators,
    residual: &[f64],
    theta_n: &[f64],
    dl: &GraphViscosity,
    ev: &EvConfig,
) -> GraphViscosity {
    let p = &ops.pattern;
    let norm = entropy_normalization(ops, theta_n, ev);
    let ratio: Vec<Option<f64>> = residual
        .iter()
        .zip(&norm)
        .map(|(r, n)| if *n > 0.0 { Some(r.abs() / n) } else { None })
        .collect();
    let zero_rows = ratio.iter().filter(|r| r.is_none()).count();
    if zero_rows > 0 {
        log::debug!("{zero_rows} rows with vanishing entropy normalisation");
    }
    let vl = dl.values();
    let values = p.entry_values(|i, j, k| {
        if j == i {
            return 0.0;
        }
        match (ratio[i], ratio[j]) {
            (Some(a), Some(b)) => vl[k].min(ev.c_ev * a.max(b)),
            _ => 0.0,
        }
    });
    let op = SparseOperator::from_values(std::sync::Arc::clone(p), values)
        .expect("values match the pattern");
    GraphViscosity::from_offdiagonal(op)
}

fn high_order_from(
    sys: &FemSystem,
    theta: &[f64],
    rhs: &[f64],
    dh: &GraphViscosity,
    dt: f64,
) -> Result<Vec<f64>> {
    let diff = dh.apply(theta);
    let b: Vec<f64> = rhs.iter().zip(&diff).map(|(r, d)| r + d).collect();
    consistent_update(sys, theta, &b, dt)
}

/// High-order update: the Galerkin update plus the viscous term `Σ_j d^H_ij θ_j`.
#[allow(clippy::too_many_arguments)]
pub fn high_order_euler(
    sys: &FemSystem,
    theta: &[f64],
    u: &VectorField2,
    dh: &GraphViscosity,
    dt: f64,
    kappa: f64,
    s: FracPower,
    q: SincQuadrature,
) -> Result<Vec<f64>> {
    check_inputs(sys, theta, u)?;
    let ex = ExplicitTerms::new(sys, theta, u, kappa, s, q)?;
    high_order_from(sys, theta, &ex.rhs(&sys.ops, kappa), dh, dt)
}

/// One forward Euler step of the selected scheme; `dl` is required for
/// every scheme except Galerkin.
pub fn euler_step(
    sys: &FemSystem,
    theta: &[f64],
    u: &VectorField2,
    dl: Option<&GraphViscosity>,
    dt: f64,
    cfg: &TransportConfig,
) -> Result<Vec<f64>> {
    check_inputs(sys, theta, u)?;
    let ops = &sys.ops;
    let (kappa, s, q) = (cfg.kappa, cfg.s, cfg.quad);
    let ex = ExplicitTerms::new(sys, theta, u, kappa, s, q)?;
    let rhs = ex.rhs(ops, kappa);
    let need_dl = || {
        dl.ok_or_else(|| SqgError::InvalidParameter {
            name: "scheme".into(),
            reason: format!("{} requires the low-order viscosity", cfg.scheme),
        })
    };
    let out = match cfg.scheme {
        SchemeKind::Galerkin => consistent_update(sys, theta, &rhs, dt)?,
        SchemeKind::LowOrder => low_order_from(ops, theta, &rhs, need_dl()?, dt),
        SchemeKind::EntropyViscosity | SchemeKind::Fct => {
            let dl = need_dl()?;
            let theta_l = if cfg.scheme == SchemeKind::Fct {
                Some(low_order_from(ops, theta, &rhs, dl, dt))
            } else {
                None
            };
            let theta_g = consistent_update(sys, theta, &rhs, dt)?;
            let r = residual_from(sys, theta, &theta_g, u, ex.action.as_deref(), kappa, s, q)?;
            let dh = high_order_viscosity(ops, &r, theta, dl, &cfg.ev);
            let theta_h = high_order_from(sys, theta, &rhs, &dh, dt)?;
            match theta_l {
                Some(tl) => fct_combine(ops, &tl, &theta_h, theta, dl, &dh, dt),
                None => theta_h,
            }
        }
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(SqgError::NonFinite("buoyancy update"));
    }
    Ok(out)
}
