//! Mesh-refinement studies against exact solutions.

use crate::diagnostics::{convergence_rates, ErrorNorms};
use crate::error::{Result, SqgError};
use crate::fractional::SincQuadrature;
use crate::transport::{Normalization, SchemeKind};

use super::config::{RunConfig, Scenario};
use super::run::run;

/// Meshes of the standard refinement study, 100 to 6400 dofs.
pub const STUDY_SIDES: [usize; 4] = [10, 20, 40, 80];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudyRow {
    pub n_side: usize,
    pub dofs: usize,
    pub errors: ErrorNorms,
    pub steps: usize,
}

/// Observed rates per norm: `(L1, L2, L∞)`, `None` on the first row.
pub type StudyRates = (Vec<Option<f64>>, Vec<Option<f64>>, Vec<Option<f64>>);

/// Runs `base` on each mesh and measures the final-time error.
pub fn convergence_study(base: &RunConfig, sides: &[usize]) -> Result<Vec<StudyRow>> {
    sides
        .iter()
        .map(|&n| {
            let mut cfg = base.clone();
            cfg.n_side = n;
            cfg.output_dir = None;
            let rec = run(&cfg)?;
            let errors = rec.final_errors.ok_or_else(|| SqgError::InvalidParameter {
                name: "initial".into(),
                reason: format!("no exact solution for {} with this velocity", cfg.initial),
            })?;
            log::info!(
                "n_side {n}: L1 {:.3e} L2 {:.3e} Linf {:.3e}",
                errors.l1,
                errors.l2,
                errors.linf
            );
            Ok(StudyRow {
                n_side: n,
                dofs: n * n,
                errors,
                steps: rec.final_state.step_index,
            })
        })
        .collect()
}

pub fn study_rates(rows: &[StudyRow]) -> StudyRates {
    let col = |f: fn(&ErrorNorms) -> f64| {
        let r = convergence_rates(&rows.iter().map(|r| f(&r.errors)).collect::<Vec<_>>());
        std::iter::once(None).chain(r).collect()
    };
    (col(|e| e.l1), col(|e| e.l2), col(|e| e.linf))
}

/// Smooth convection with a given scheme and entropy normalization.
pub fn convection_config(scheme: SchemeKind, normalization: Normalization) -> RunConfig {
    RunConfig {
        scheme,
        normalization,
        ..RunConfig::preset(Scenario::SmoothConvection)
    }
}

/// Fractional diffusion of the eigenmode with a given sinc rule.
pub fn diffusion_config(quad: SincQuadrature) -> RunConfig {
    RunConfig {
        sinc_k: quad.k,
        sinc_m: quad.m,
        ..RunConfig::preset(Scenario::FractionalDiffusion)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn galerkin_convection_converges() {
        let rows = convergence_study(
            &convection_config(SchemeKind::Galerkin, Normalization::Local),
            &[8, 16],
        )
        .unwrap();
        assert_eq!(rows[1].dofs, 256);
        let (r1, r2, _) = study_rates(&rows);
        assert!(r1[0].is_none());
        assert!(
            r1[1].unwrap() > 1.5 && r2[1].unwrap() > 1.5,
            "{r1:?} {r2:?}"
        );
    }

    #[test]
    fn study_without_exact_solution_fails() {
        let cfg = RunConfig {
            t_final: 0.01,
            snapshot_times: vec![],
            ..RunConfig::preset(Scenario::SingleVortex)
        };
        assert!(convergence_study(&cfg, &[8]).is_err());
    }
}
