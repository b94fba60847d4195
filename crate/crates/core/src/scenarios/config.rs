//! Flat `key = value` run configuration.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. The
//! `scenario` key selects the defaults; every other key overrides one field.
//!
//! | key | meaning | values |
//! |---|---|---|
//! | `scenario` | benchmark preset | `smooth_convection`, `fractional_diffusion`, `single_vortex`, `double_vortex`, `viscous_sqg`, `decaying_turbulence`, `custom` |
//! | `initial` | initial buoyancy | `smooth`, `eigenmode`, `single_vortex`, `double_vortex`, `noise` |
//! | `n_side` | vertices per side | integer ≥ 4 |
//! | `cfl` | CFL number | (0, 0.5] |
//! | `scheme` | spatial scheme | `galerkin`, `low_order`, `ev`, `fct` |
//! | `c_ev` | entropy-viscosity constant | > 0 |
//! | `epsilon` | normalization floor | > 0 |
//! | `normalization` | entropy normalization | `local`, `max` |
//! | `kappa` | fractional diffusion coefficient | ≥ 0 |
//! | `s` | fractional diffusion power | (0, 1) |
//! | `mode` | velocity law | `sqg`, `qg` |
//! | `sinc_k`, `sinc_m` | sinc quadrature spacing and half-width | > 0, ≥ 1 |
//! | `t_final` | end time | ≥ 0 |
//! | `snapshot_times` | comma-separated times in [0, t_final] | may be empty |
//! | `dt_max` | time-step cap | > 0 or `inf` |
//! | `dt` | fixed time step | > 0 or `none` |
//! | `dt_per_h` | fixed time step as a multiple of h | > 0 or `none` |
//! | `uniform_steps` | with a frozen velocity, spread `t_final` over equal steps | `true`, `false` |
//! | `seed` | random seed for `noise` | u64 |
//! | `output_dir` | output directory | path or `none` |
//! | `frozen_velocity` | constant velocity `u1, u2` | two numbers or `none` |
//! | `refresh_velocity` | recompute the velocity at every RK stage | `true`, `false` |
//! | `solver` | linear solver backend | `spectral`, `cg` |
//! | `spectrum` | write energy spectra at snapshot times | `true`, `false` |

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Result, SqgError};
use crate::fractional::{FracPower, SincQuadrature};
use crate::system::SolverKind;
use crate::transport::{EvConfig, Normalization, SchemeKind, TransportConfig, VelocitySource};
use crate::velocity::VelocityMode;

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($var:ident => $s:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
        pub enum $name { $($var),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$var),+];

            pub fn name(self) -> &'static str {
                match self { $($name::$var => $s),+ }
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($s => Ok($name::$var),)+
                    other => Err(format!(
                        "unknown {} `{other}` (expected one of {})",
                        stringify!($name).to_lowercase(),
                        [$($s),+].join(", ")
                    )),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named_enum!(
    /// Benchmark presets.
    Scenario {
        SmoothConvection => "smooth_convection",
        FractionalDiffusion => "fractional_diffusion",
        SingleVortex => "single_vortex",
        DoubleVortex => "double_vortex",
        ViscousSqg => "viscous_sqg",
        DecayingTurbulence => "decaying_turbulence",
        Custom => "custom",
    }
);

named_enum!(
    /// Initial buoyancy profiles.
    Profile {
        Smooth => "smooth",
        Eigenmode => "eigenmode",
        SingleVortex => "single_vortex",
        DoubleVortex => "double_vortex",
        Noise => "noise",
    }
);

named_enum!(
    /// Linear solver backend.
    SolverChoice {
        Spectral => "spectral",
        Cg => "cg",
    }
);

/// All keys accepted in a config file, in canonical order.
pub const KEYS: &[&str] = &[
    "scenario",
    "initial",
    "n_side",
    "cfl",
    "scheme",
    "c_ev",
    "epsilon",
    "normalization",
    "kappa",
    "s",
    "mode",
    "sinc_k",
    "sinc_m",
    "t_final",
    "snapshot_times",
    "dt_max",
    "dt",
    "dt_per_h",
    "uniform_steps",
    "seed",
    "output_dir",
    "frozen_velocity",
    "refresh_velocity",
    "solver",
    "spectrum",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub initial: Profile,
    pub n_side: usize,
    pub cfl: f64,
    pub scheme: SchemeKind,
    pub c_ev: f64,
    pub epsilon: f64,
    pub normalization: Normalization,
    pub kappa: f64,
    pub s: f64,
    pub mode: VelocityMode,
    pub sinc_k: f64,
    pub sinc_m: usize,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
    pub dt_max: f64,
    pub dt: Option<f64>,
    pub dt_per_h: Option<f64>,
    pub uniform_steps: bool,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub frozen_velocity: Option<[f64; 2]>,
    pub refresh_velocity: bool,
    pub solver: SolverChoice,
    pub spectrum: bool,
}

impl RunConfig {
    /// Defaults of a scenario preset.
    pub fn preset(scenario: Scenario) -> Self {
        let q = SincQuadrature::standard();
        let base = Self {
            scenario,
            initial: Profile::Smooth,
            n_side: 64,
            cfl: 0.25,
            scheme: SchemeKind::Fct,
            c_ev: 1.0,
            epsilon: EvConfig::default().epsilon,
            normalization: Normalization::Local,
            kappa: 0.0,
            s: 0.5,
            mode: VelocityMode::Sqg,
            sinc_k: q.k,
            sinc_m: q.m,
            t_final: 1.0,
            snapshot_times: Vec::new(),
            dt_max: f64::INFINITY,
            dt: None,
            dt_per_h: None,
            uniform_steps: true,
            seed: 0,
            output_dir: None,
            frozen_velocity: None,
            refresh_velocity: true,
            solver: SolverChoice::Spectral,
            spectrum: false,
        };
        let vortex = |initial| Self {
            initial,
            n_side: 351,
            cfl: 0.4,
            c_ev: 0.1,
            t_final: 40.0,
            snapshot_times: vec![8.0, 16.0, 26.0, 35.0, 40.0],
            ..base.clone()
        };
        match scenario {
            Scenario::SmoothConvection => Self {
                n_side: 20,
                cfl: 0.2,
                t_final: 2.0 * std::f64::consts::PI,
                frozen_velocity: Some([1.0, 1.0]),
                ..base
            },
            Scenario::FractionalDiffusion => Self {
                initial: Profile::Eigenmode,
                n_side: 20,
                scheme: SchemeKind::Galerkin,
                kappa: 1e-3,
                s: 0.25,
                t_final: std::f64::consts::PI,
                dt_per_h: Some(0.1),
                frozen_velocity: Some([0.0, 0.0]),
                ..base
            },
            Scenario::SingleVortex => vortex(Profile::SingleVortex),
            Scenario::DoubleVortex => vortex(Profile::DoubleVortex),
            Scenario::ViscousSqg => Self {
                n_side: 351,
                kappa: 1e-3,
                t_final: 20.0,
                snapshot_times: vec![6.0, 7.0, 7.5, 8.0, 12.0, 14.0, 16.0, 20.0],
                ..base
            },
            Scenario::DecayingTurbulence => Self {
                initial: Profile::Noise,
                n_side: 256,
                cfl: 0.4,
                c_ev: 0.1,
                t_final: 20.0,
                snapshot_times: vec![0.0, 5.0, 20.0],
                spectrum: true,
                ..base
            },
            Scenario::Custom => base,
        }
    }

    /// Parses a config file body.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| SqgError::ConfigParse {
                    line,
                    reason: format!("expected `key = value`, found `{content}`"),
                })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(SqgError::ConfigParse {
                    line,
                    reason: format!("unknown key `{key}`"),
                });
            }
            if !seen.insert(key) {
                return Err(SqgError::ConfigParse {
                    line,
                    reason: format!("duplicate key `{key}`"),
                });
            }
            pairs.push((line, key, value));
        }
        let scenario = match pairs.iter().find(|(_, k, _)| *k == "scenario") {
            Some(&(line, _, v)) => v
                .parse::<Scenario>()
                .map_err(|reason| SqgError::ConfigParse { line, reason })?,
            None => {
                return Err(SqgError::ConfigParse {
                    line: 0,
                    reason: "missing required key `scenario`".into(),
                })
            }
        };
        let mut cfg = Self::preset(scenario);
        for (line, key, value) in pairs {
            if key != "scenario" {
                cfg.set(key, value)
                    .map_err(|reason| SqgError::ConfigParse { line, reason })?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and parses a config file.
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies a `key=value` override, leaving `self` unchanged on error.
    pub fn apply_override(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| SqgError::InvalidParameter {
                name: pair.into(),
                reason: "override must have the form key=value".into(),
            })?;
        let key = key.trim();
        let invalid = |reason| SqgError::InvalidParameter {
            name: key.into(),
            reason,
        };
        if key == "scenario" {
            return Err(invalid("the scenario cannot be overridden".into()));
        }
        let mut next = self.clone();
        next.set(key, value.trim()).map_err(invalid)?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "scenario" => self.scenario = value.parse()?,
            "initial" => self.initial = value.parse()?,
            "n_side" => self.n_side = parse_num(key, value)?,
            "cfl" => self.cfl = parse_num(key, value)?,
            "scheme" => self.scheme = value.parse()?,
            "c_ev" => self.c_ev = parse_num(key, value)?,
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "normalization" => self.normalization = value.parse()?,
            "kappa" => self.kappa = parse_num(key, value)?,
            "s" => self.s = parse_num(key, value)?,
            "mode" => self.mode = value.parse()?,
            "sinc_k" => self.sinc_k = parse_num(key, value)?,
            "sinc_m" => self.sinc_m = parse_num(key, value)?,
            "t_final" => self.t_final = parse_num(key, value)?,
            "snapshot_times" => {
                self.snapshot_times = value
                    .split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(|v| parse_num(key, v))
                    .collect::<std::result::Result<_, _>>()?
            }
            "dt_max" => self.dt_max = parse_num(key, value)?,
            "dt" => self.dt = parse_optional(key, value)?,
            "dt_per_h" => self.dt_per_h = parse_optional(key, value)?,
            "uniform_steps" => self.uniform_steps = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "output_dir" => {
                self.output_dir = (!is_none(value)).then(|| PathBuf::from(value));
            }
            "frozen_velocity" => {
                self.frozen_velocity = if is_none(value) {
                    None
                } else {
                    let parts: Vec<f64> = value
                        .split(',')
                        .map(|v| parse_num(key, v.trim()))
                        .collect::<std::result::Result<_, _>>()?;
                    match parts[..] {
                        [a, b] => Some([a, b]),
                        _ => {
                            return Err(format!(
                                "`{key}` needs two components, got {}",
                                parts.len()
                            ))
                        }
                    }
                }
            }
            "refresh_velocity" => self.refresh_velocity = parse_num(key, value)?,
            "solver" => self.solver = value.parse()?,
            "spectrum" => self.spectrum = parse_num(key, value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Checks the field invariants, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: String| {
            Err(SqgError::InvalidParameter {
                name: name.into(),
                reason,
            })
        };
        if self.n_side < 4 {
            return bad("n_side", format!("must be at least 4, got {}", self.n_side));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return bad("cfl", format!("must lie in (0, 1/2], got {}", self.cfl));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return bad("s", format!("must lie in (0, 1), got {}", self.s));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(
                "t_final",
                format!("must be finite and non-negative, got {}", self.t_final),
            );
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|t| !(**t >= 0.0 && **t <= self.t_final))
        {
            return bad(
                "snapshot_times",
                format!("{t} lies outside [0, {}]", self.t_final),
            );
        }
        if self.dt.is_some() && self.dt_per_h.is_some() {
            return bad("dt", "set at most one of `dt` and `dt_per_h`".into());
        }
        for (name, v) in [("dt", self.dt), ("dt_per_h", self.dt_per_h)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(name, format!("must be positive, got {v}"));
                }
            }
        }
        if let Some(u) = self.frozen_velocity {
            if !u.iter().all(|c| c.is_finite()) {
                return bad("frozen_velocity", "components must be finite".into());
            }
        }
        self.transport(1.0).map(|_| ())
    }

    /// Mesh width of the configured mesh.
    pub fn h(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n_side as f64
    }

    pub fn solver_kind(&self) -> SolverKind {
        match self.solver {
            SolverChoice::Spectral => SolverKind::Spectral,
            SolverChoice::Cg => SolverKind::default_cg(self.n_side),
        }
    }

    pub fn quadrature(&self) -> Result<SincQuadrature> {
        SincQuadrature::new(self.sinc_k, self.sinc_m)
    }

    /// Transport settings for a mesh of width `h`.
    pub fn transport(&self, h: f64) -> Result<TransportConfig> {
        let cfg = TransportConfig {
            scheme: self.scheme,
            ev: EvConfig {
                c_ev: self.c_ev,
                epsilon: self.epsilon,
                normalization: self.normalization,
            },
            kappa: self.kappa,
            s: FracPower::new(self.s)?,
            quad: self.quadrature()?,
            velocity: match self.frozen_velocity {
                Some(u) => VelocitySource::Frozen(u),
                None => VelocitySource::Computed(self.mode),
            },
            cfl: self.cfl,
            dt_max: self.dt_max,
            fixed_dt: self.dt.or(self.dt_per_h.map(|r| r * h)),
            refresh_velocity: self.refresh_velocity,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical `(key, value)` rendering; parsing it reproduces `self`.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), fmt_f64);
        let times: Vec<String> = self.snapshot_times.iter().map(|t| fmt_f64(*t)).collect();
        vec![
            ("scenario", self.scenario.to_string()),
            ("initial", self.initial.to_string()),
            ("n_side", self.n_side.to_string()),
            ("cfl", fmt_f64(self.cfl)),
            ("scheme", self.scheme.to_string()),
            ("c_ev", fmt_f64(self.c_ev)),
            ("epsilon", fmt_f64(self.epsilon)),
            ("normalization", self.normalization.to_string()),
            ("kappa", fmt_f64(self.kappa)),
            ("s", fmt_f64(self.s)),
            ("mode", self.mode.to_string()),
            ("sinc_k", fmt_f64(self.sinc_k)),
            ("sinc_m", self.sinc_m.to_string()),
            ("t_final", fmt_f64(self.t_final)),
            ("snapshot_times", times.join(", ")),
            ("dt_max", fmt_f64(self.dt_max)),
            ("dt", opt(self.dt)),
            ("dt_per_h", opt(self.dt_per_h)),
            ("uniform_steps", self.uniform_steps.to_string()),
            ("seed", self.seed.to_string()),
            (
                "output_dir",
                self.output_dir
                    .as_ref()
                    .map_or("none".into(), |p| p.display().to_string()),
            ),
            (
                "frozen_velocity",
                self.frozen_velocity.map_or("none".into(), |[a, b]| {
                    format!("{}, {}", fmt_f64(a), fmt_f64(b))
                }),
            ),
            ("refresh_velocity", self.refresh_velocity.to_string()),
            ("solver", self.solver.to_string()),
            ("spectrum", self.spectrum.to_string()),
        ]
    }

    /// Renders the config as a file that [`RunConfig::parse`] accepts.
    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Shortest decimal that parses back to the same value.
fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}

fn is_none(value: &str) -> bool {
    value.eq_ignore_ascii_case("none")
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value `{value}` for `{key}`"))
}

fn parse_optional(key: &str, value: &str) -> std::result::Result<Option<f64>, String> {
    if is_none(value) {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}
