//! Three-stage strong-stability-preserving Runge–Kutta stepping.

use crate::error::{Result, SqgError};
use crate::system::FemSystem;

use super::viscosity::{low_order_viscosity, select_dt, GraphViscosity};
use super::{euler_step, stage_velocity, SchemeKind, TransportConfig};

/// CFL ratio above which a later stage rejects the step.
const STAGE_CFL_LIMIT: f64 = 0.5;
const MAX_REJECTIONS: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct TransportState {
    pub theta: Vec<f64>,
    pub t: f64,
    pub step_index: usize,
}

impl TransportState {
    pub fn new(theta: Vec<f64>) -> Self {
        Self {
            theta,
            t: 0.0,
            step_index: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: TransportState,
    pub dt: f64,
    /// Attempts rejected by the later-stage CFL check.
    pub rejections: usize,
    /// The first-stage viscosity vanished, so `dt_max` was used.
    pub zero_viscosity: bool,
}

struct Stage {
    u: crate::assembly::VectorField2,
    dl: Option<GraphViscosity>,
}

fn needs_viscosity(cfg: &TransportConfig) -> bool {
    cfg.scheme != SchemeKind::Galerkin || cfg.fixed_dt.is_none()
}

fn stage(sys: &FemSystem, theta: &[f64], cfg: &TransportConfig) -> Result<Stage> {
    let u = stage_velocity(sys, theta, cfg)?;
    let dl = needs_viscosity(cfg).then(|| low_order_viscosity(&sys.ops, &u));
    Ok(Stage { u, dl })
}

fn combine(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(x, y)| a * x + b * y).collect()
}

/// Advances the state by one SSP-RK3 step, never past `t_end`.
///
/// The step is chosen from the first-stage viscosity (or `fixed_dt`) and
/// held for all stages. When the velocity is refreshed per stage and a later
/// stage violates the CFL limit of 1/2, the step is halved and retried.
pub fn ssprk3_step(
    sys: &FemSystem,
    state: &TransportState,
    cfg: &TransportConfig,
    t_end: f64,
) -> Result<StepOutcome> {
    let remaining = t_end - state.t;
    if !(remaining > 0.0) {
        return Err(SqgError::InvalidParameter {
            name: "t_end".into(),
            reason: format!("must exceed the current time {}", state.t),
        });
    }
    let th0 = &state.theta;
    let s0 = stage(sys, th0, cfg)?;
    let (mut dt, zero_viscosity) = match cfg.fixed_dt {
        Some(dt) => (dt.min(cfg.dt_max), false),
        None => {
            let c = select_dt(
                s0.dl.as_ref().expect("viscosity built"),
                &sys.ops.lumped,
                cfg.cfl,
                cfg.dt_max,
            );
            (c.dt, c.capped_by_zero_viscosity)
        }
    };
    // absorb round-off so a sequence of uniform steps lands on t_end
    if dt >= remaining || remaining - dt < 1e-10 * dt {
        dt = remaining;
    }
    let check = cfg.fixed_dt.is_none() && cfg.refresh_velocity;
    let mut rejections = 0;
    loop {
        let v1 = euler_step(sys, th0, &s0.u, s0.dl.as_ref(), dt, cfg)?;
        let s1 = if cfg.refresh_velocity {
            stage(sys, &v1, cfg)?
        } else {
            reuse(&s0)
        };
        if check && stage_violates(sys, &s1, dt) {
            rejections += 1;
            dt = reject(dt, rejections)?;
            continue;
        }
        let e1 = euler_step(sys, &v1, &s1.u, s1.dl.as_ref(), dt, cfg)?;
        let v2 = combine(0.75, th0, 0.25, &e1);
        let s2 = if cfg.refresh_velocity {
            stage(sys, &v2, cfg)?
        } else {
            reuse(&s0)
        };
        if check && stage_violates(sys, &s2, dt) {
            rejections += 1;
            dt = reject(dt, rejections)?;
            continue;
        }
        let e2 = euler_step(sys, &v2, &s2.u, s2.dl.as_ref(), dt, cfg)?;
        let theta = combine(1.0 / 3.0, th0, 2.0 / 3.0, &e2);
        // land exactly on t_end when the step was clamped
        let t = if dt == remaining { t_end } else { state.t + dt };
        return Ok(StepOutcome {
            state: TransportState {
                theta,
                t,
                step_index: state.step_index + 1,
            },
            dt,
            rejections,
            zero_viscosity,
        });
    }
}

fn reuse(s: &Stage) -> Stage {
    Stage {
        u: s.u.clone(),
        dl: s.dl.clone(),
    }
}

fn stage_violates(sys: &FemSystem, s: &Stage, dt: f64) -> bool {
    s.dl.as_ref()
        .is_some_and(|d| d.cfl_ratio(&sys.ops.lumped, dt) > STAGE_CFL_LIMIT)
}

fn reject(dt: f64, rejections: usize) -> Result<f64> {
    if rejections > MAX_REJECTIONS {
        return Err(SqgError::InvalidParameter {
            name: "dt".into(),
            reason: format!("stage CFL check failed {rejections} times"),
        });
    }
    log::debug!("later stage exceeds CFL {STAGE_CFL_LIMIT}; halving dt = {dt}");
    Ok(0.5 * dt)
}
