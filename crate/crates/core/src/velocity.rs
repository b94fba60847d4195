//! Stream function and nodal velocity reconstruction.

use crate::assembly::VectorField2;
use crate::error::Result;
use crate::fractional::{inv_frac_apply, FracPower, SincQuadrature};
use crate::system::FemSystem;

/// Relation between buoyancy and stream function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VelocityMode {
    /// `(−Δ)^{1/2} ψ = θ`
    #[default]
    Sqg,
    /// `(−Δ) ψ = θ`
    Qg,
}

impl std::str::FromStr for VelocityMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sqg" => Ok(Self::Sqg),
            "qg" => Ok(Self::Qg),
            other => Err(format!(
                "unknown velocity mode `{other}` (expected sqg or qg)"
            )),
        }
    }
}

impl std::fmt::Display for VelocityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sqg => "sqg",
            Self::Qg => "qg",
        })
    }
}

/// Stream function Ψ of a zero-mean buoyancy.
pub fn stream_function(
    sys: &FemSystem,
    theta: &[f64],
    mode: VelocityMode,
    q: SincQuadrature,
) -> Result<Vec<f64>> {
    match mode {
        VelocityMode::Sqg => inv_frac_apply(sys, theta, FracPower::half(), q),
        VelocityMode::Qg => {
            let rhs = sys.ops.mass.apply(theta)?;
            sys.solve_poisson(&rhs)
        }
    }
}

/// Nodal velocity `u_i`: patch average of `∇⊥Ψ = (−∂₂Ψ, ∂₁Ψ)`.
pub fn clement_perp_velocity(sys: &FemSystem, psi: &[f64]) -> VectorField2 {
    let g = sys.ops.patch_gradients(psi);
    VectorField2 {
        u1: g.u2.iter().map(|v| -v).collect(),
        u2: g.u1,
    }
}

/// Velocity of a buoyancy field, together with its stream function.
pub fn velocity_of(
    sys: &FemSystem,
    theta: &[f64],
    mode: VelocityMode,
    q: SincQuadrature,
) -> Result<(Vec<f64>, VectorField2)> {
    let psi = stream_function(sys, theta, mode, q)?;
    let u = clement_perp_velocity(sys, &psi);
    Ok((psi, u))
}
