//! Time-loop driver.

use crate::assembly::VectorField2;
use crate::diagnostics::{
    energy_spectrum, error_norms, grad_sup_norm, helicity, kinetic_energy, ErrorNorms, Spectrum,
};
use crate::error::{Result, SqgError};
use crate::system::FemSystem;
use crate::transport::{
    low_order_viscosity, select_dt, ssprk3_step, TransportConfig, TransportState,
};
use crate::velocity::stream_function;

use super::config::RunConfig;
use super::output::{RunOutput, RunStatus};
use super::{exact_solution, initial_field};

/// One line of the time series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeRow {
    pub t: f64,
    /// Step that reached `t` (zero for the initial row).
    pub dt: f64,
    pub kinetic_energy: f64,
    pub helicity_integral: f64,
    pub helicity_signed: f64,
    pub grad_sup_norm: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl TimeRow {
    /// Values in column order.
    pub fn values(&self) -> [f64; 8] {
        [
            self.t,
            self.dt,
            self.kinetic_energy,
            self.helicity_integral,
            self.helicity_signed,
            self.grad_sup_norm,
            self.theta_min,
            self.theta_max,
        ]
    }

    pub fn from_values(v: &[f64]) -> Result<Self> {
        match *v {
            [t, dt, kinetic_energy, helicity_integral, helicity_signed, grad_sup_norm, theta_min, theta_max] => {
                Ok(Self {
                    t,
                    dt,
                    kinetic_energy,
                    helicity_integral,
                    helicity_signed,
                    grad_sup_norm,
                    theta_min,
                    theta_max,
                })
            }
            _ => Err(SqgError::DimensionMismatch {
                expected: 8,
                got: v.len(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub config: RunConfig,
    pub rows: Vec<TimeRow>,
    pub snapshots: Vec<Snapshot>,
    pub spectra: Vec<(f64, Spectrum)>,
    pub initial: Vec<f64>,
    pub final_state: TransportState,
    /// Errors at `t_final` against the exact solution, when one is known.
    pub final_errors: Option<ErrorNorms>,
    /// Steps retried by the later-stage CFL check.
    pub rejections: usize,
}

/// What an observer sees after each accepted step.
pub struct StepEvent<'a> {
    pub previous: &'a TransportState,
    pub current: &'a TransportState,
    pub dt: f64,
}

/// Runs a configuration on a freshly assembled mesh.
pub fn run(cfg: &RunConfig) -> Result<RunRecord> {
    let sys = FemSystem::uniform(cfg.n_side, cfg.solver_kind())?;
    run_with(cfg, &sys, |_| {})
}

/// Runs a configuration on `sys`, calling `observer` after every step.
///
/// With an output directory set, the directory is prepared before the first
/// step and every row is flushed as it is produced; on abort the manifest
/// records the failing step.
pub fn run_with<F>(cfg: &RunConfig, sys: &FemSystem, observer: F) -> Result<RunRecord>
where
    F: FnMut(&StepEvent),
{
    cfg.validate()?;
    if sys.mesh().n_side() != cfg.n_side {
        return Err(SqgError::DimensionMismatch {
            expected: cfg.n_side,
            got: sys.mesh().n_side(),
        });
    }
    let mut out = cfg
        .output_dir
        .as_deref()
        .map(|d| RunOutput::create(d, cfg))
        .transpose()?;
    let result = drive(cfg, sys, out.as_mut(), observer);
    if let Some(out) = &out {
        match &result {
            Ok(rec) => {
                if let Some(e) = rec.final_errors {
                    out.errors(&[(cfg.n_side * cfg.n_side, e)])?;
                }
                let s = &rec.final_state;
                out.finish(cfg, RunStatus::Completed, s.step_index, s.t, None)?;
            }
            Err(err) => {
                let (step, time) = match err {
                    SqgError::RunAborted { step, time, .. } => (*step, *time),
                    _ => (0, 0.0),
                };
                let msg = err.to_string();
                if let Err(e) = out.finish(cfg, RunStatus::Aborted, step, time, Some(&msg)) {
                    log::error!("could not record the abort in the manifest: {e}");
                }
            }
        }
    }
    result
}

/// Equal steps covering `t_final` for a constant velocity.
fn uniform_step(cfg: &RunConfig, sys: &FemSystem, tcfg: &TransportConfig) -> Option<f64> {
    let u = cfg.frozen_velocity?;
    if !cfg.uniform_steps || tcfg.fixed_dt.is_some() || cfg.t_final <= 0.0 {
        return None;
    }
    let dl = low_order_viscosity(&sys.ops, &VectorField2::constant(sys.n(), u));
    let choice = select_dt(&dl, &sys.ops.lumped, tcfg.cfl, tcfg.dt_max);
    if !choice.dt.is_finite() {
        return None;
    }
    let steps = (cfg.t_final / choice.dt).ceil().max(1.0);
    Some(cfg.t_final / steps)
}

fn row(
    sys: &FemSystem,
    cfg: &RunConfig,
    tcfg: &TransportConfig,
    theta: &[f64],
    t: f64,
    dt: f64,
) -> Result<TimeRow> {
    let ops = &sys.ops;
    let psi = stream_function(sys, theta, cfg.mode, tcfg.quad)?;
    let hel = helicity(ops, theta, &psi)?;
    let (lo, hi) = theta
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    Ok(TimeRow {
        t,
        dt,
        kinetic_energy: kinetic_energy(ops, theta)?,
        helicity_integral: hel.integral,
        helicity_signed: hel.signed,
        grad_sup_norm: grad_sup_norm(ops, theta),
        theta_min: lo,
        theta_max: hi,
    })
}

struct Recorder<'a> {
    cfg: &'a RunConfig,
    sys: &'a FemSystem,
    out: Option<&'a mut RunOutput>,
    pending: Vec<f64>,
    snapshots: Vec<Snapshot>,
    spectra: Vec<(f64, Spectrum)>,
    rows: Vec<TimeRow>,
}

impl Recorder<'_> {
    fn push_row(&mut self, r: TimeRow) -> Result<()> {
        if let Some(out) = self.out.as_deref_mut() {
            out.row(&r)?;
        }
        self.rows.push(r);
        Ok(())
    }

    fn snapshot(&mut self, t: f64, theta: Vec<f64>) -> Result<()> {
        log::info!("snapshot at t = {t}");
        if let Some(out) = self.out.as_deref() {
            out.snapshot(&self.sys.ops, t, &theta)?;
        }
        if self.cfg.spectrum {
            let sp = energy_spectrum(self.sys.mesh(), &theta)?;
            if let Some(out) = self.out.as_deref() {
                out.spectrum(t, &sp)?;
            }
            self.spectra.push((t, sp));
        }
        self.snapshots.push(Snapshot { t, theta });
        Ok(())
    }

    /// Emits the snapshots falling in `(t0, t1]` by linear interpolation.
    fn interval(&mut self, t0: f64, th0: &[f64], t1: f64, th1: &[f64]) -> Result<()> {
        while let Some(&ts) = self.pending.first() {
            if ts > t1 {
                break;
            }
            self.pending.remove(0);
            let theta = if ts == t1 {
                th1.to_vec()
            } else {
                let w = (ts - t0) / (t1 - t0);
                th0.iter().zip(th1).map(|(a, b)| a + w * (b - a)).collect()
            };
            self.snapshot(ts, theta)?;
        }
        Ok(())
    }
}

fn drive<F>(
    cfg: &RunConfig,
    sys: &FemSystem,
    out: Option<&mut RunOutput>,
    mut observer: F,
) -> Result<RunRecord>
where
    F: FnMut(&StepEvent),
{
    let mut tcfg = cfg.transport(sys.mesh().h())?;
    if let Some(dt) = uniform_step(cfg, sys, &tcfg) {
        log::debug!("uniform step {dt} for constant velocity");
        tcfg.fixed_dt = Some(dt);
    }
    let initial = initial_field(&sys.ops, cfg.initial, cfg.seed);
    let mut pending = cfg.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    pending.dedup();
    let mut rec = Recorder {
        cfg,
        sys,
        out,
        pending,
        snapshots: Vec::new(),
        spectra: Vec::new(),
        rows: Vec::new(),
    };
    let abort = |state: &TransportState, e: SqgError| SqgError::RunAborted {
        step: state.step_index + 1,
        time: state.t,
        source: Box::new(e),
    };

    let mut state = TransportState::new(initial.clone());
    let first = row(sys, cfg, &tcfg, &state.theta, 0.0, 0.0).map_err(|e| abort(&state, e))?;
    rec.push_row(first)?;
    while rec.pending.first() == Some(&0.0) {
        rec.pending.remove(0);
        rec.snapshot(0.0, initial.clone())?;
    }

    let mut rejections = 0;
    while state.t < cfg.t_final {
        let outcome = ssprk3_step(sys, &state, &tcfg, cfg.t_final).map_err(|e| abort(&state, e))?;
        let next = outcome.state;
        if next.theta.iter().any(|v| !v.is_finite()) {
            return Err(abort(&state, SqgError::NonFinite("buoyancy")));
        }
        rejections += outcome.rejections;
        let r =
            row(sys, cfg, &tcfg, &next.theta, next.t, outcome.dt).map_err(|e| abort(&state, e))?;
        rec.push_row(r)?;
        rec.interval(state.t, &state.theta, next.t, &next.theta)?;
        observer(&StepEvent {
            previous: &state,
            current: &next,
            dt: outcome.dt,
        });
        log::debug!(
            "step {} t = {} dt = {}",
            next.step_index,
            next.t,
            outcome.dt
        );
        state = next;
    }

    let final_errors = exact_solution(cfg).map(|exact| {
        let t = state.t;
        error_norms(&sys.ops, &state.theta, move |x1, x2| exact(x1, x2, t))
    });
    Ok(RunRecord {
        config: cfg.clone(),
        rows: rec.rows,
        snapshots: rec.snapshots,
        spectra: rec.spectra,
        initial,
        final_state: state,
        final_errors,
        rejections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::config::Scenario;
    use crate::scenarios::output::{read_timeseries, MANIFEST_FILE, TIMESERIES_FILE};

    fn small(sc: Scenario) -> RunConfig {
        let mut cfg = RunConfig::preset(sc);
        cfg.n_side = 12;
        cfg.snapshot_times.clear();
        cfg
    }

    #[test]
    fn zero_final_time_gives_one_row() {
        let mut cfg = small(Scenario::SingleVortex);
        cfg.t_final = 0.0;
        cfg.snapshot_times = vec![0.0];
        let rec = run(&cfg).unwrap();
        assert_eq!(rec.rows.len(), 1);
        assert_eq!(rec.rows[0].t, 0.0);
        assert_eq!(rec.snapshots.len(), 1);
        assert_eq!(rec.final_state.step_index, 0);
    }

    #[test]
    fn uniform_steps_land_on_final_time() {
        let cfg = small(Scenario::SmoothConvection);
        let rec = run(&cfg).unwrap();
        let last = rec.rows.last().unwrap();
        assert_eq!(last.t, cfg.t_final);
        let dt0 = rec.rows[1].dt;
        assert!(rec.rows[1..]
            .iter()
            .all(|r| (r.dt - dt0).abs() < 1e-12 * dt0));
        assert!(rec.final_errors.is_some());
    }

    #[test]
    fn snapshots_interpolate_between_steps() {
        let mut cfg = small(Scenario::SingleVortex);
        cfg.t_final = 0.5;
        cfg.snapshot_times = vec![0.5, 0.2];
        let mut trace = Vec::new();
        let sys = FemSystem::uniform(cfg.n_side, cfg.solver_kind()).unwrap();
        let rec = run_with(&cfg, &sys, |ev| {
            trace.push((
                ev.previous.t,
                ev.previous.theta.clone(),
                ev.current.t,
                ev.current.theta.clone(),
            ))
        })
        .unwrap();
        assert_eq!(
            rec.snapshots.iter().map(|s| s.t).collect::<Vec<_>>(),
            vec![0.2, 0.5]
        );
        assert_eq!(rec.snapshots[1].theta, rec.final_state.theta);
        let (t0, a, t1, b) = trace
            .iter()
            .find(|(t0, _, t1, _)| *t0 < 0.2 && 0.2 <= *t1)
            .unwrap();
        let w = (0.2 - t0) / (t1 - t0);
        for (i, v) in rec.snapshots[0].theta.iter().enumerate() {
            assert!((v - (a[i] + w * (b[i] - a[i]))).abs() < 1e-15);
        }
    }

    #[test]
    fn output_directory_contents() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(Scenario::DecayingTurbulence);
        cfg.t_final = 0.01;
        cfg.snapshot_times = vec![0.0, 0.01];
        cfg.output_dir = Some(dir.path().join("run"));
        let rec = run(&cfg).unwrap();
        let d = dir.path().join("run");
        for f in [
            "snapshot_t0.vtk",
            "snapshot_t0.01.txt",
            "spectrum_t0.01.csv",
            TIMESERIES_FILE,
        ] {
            assert!(d.join(f).exists(), "{f}");
        }
        let rows = read_timeseries(&d.join(TIMESERIES_FILE)).unwrap();
        assert_eq!(rows, rec.rows);
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(d.join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(m["status"], "completed");
        assert_eq!(m["config"]["scenario"], "decaying_turbulence");
        assert_eq!(m["steps"], rec.final_state.step_index);
    }

    #[test]
    fn identical_configs_are_bit_identical() {
        let mut cfg = small(Scenario::DecayingTurbulence);
        cfg.t_final = 0.02;
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn unwritable_directory_fails_before_stepping() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let mut cfg = small(Scenario::SingleVortex);
        cfg.output_dir = Some(blocker.join("sub"));
        let err = run(&cfg).unwrap_err();
        assert!(matches!(err, SqgError::Io(_)), "{err}");
    }

    #[test]
    fn abort_leaves_truncated_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(Scenario::SingleVortex);
        cfg.t_final = 1.0;
        // an unstable explicit Galerkin step blows up within a few steps
        cfg.scheme = crate::transport::SchemeKind::Galerkin;
        cfg.dt = Some(50.0);
        cfg.dt_max = 50.0;
        cfg.t_final = 1e6;
        cfg.output_dir = Some(dir.path().to_path_buf());
        let err = run(&cfg).unwrap_err();
        let SqgError::RunAborted { step, .. } = err else {
            panic!("unexpected {err}")
        };
        let rows = read_timeseries(&dir.path().join(TIMESERIES_FILE)).unwrap();
        assert_eq!(rows.len(), step);
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap())
                .unwrap();
        assert_eq!(m["status"], "aborted");
        assert_eq!(m["steps"], step);
    }
}
