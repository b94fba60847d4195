//! `sqg`: run SQG finite-element scenarios and the standard benchmark studies.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sqg_fem::diagnostics::slope_fit;
use sqg_fem::scenarios::output::write_error_table;
use sqg_fem::scenarios::study::{
    convection_config, convergence_study, diffusion_config, study_rates, StudyRow, STUDY_SIDES,
};
use sqg_fem::scenarios::{run, RunConfig, RunRecord, Scenario};
use sqg_fem::transport::{Normalization, SchemeKind};
use sqg_fem::{SincQuadrature, VelocityMode};

#[derive(Parser)]
#[command(
    name = "sqg",
    version,
    about = "SQG finite-element solver on the periodic torus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random seed (overrides `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// `key=value` overrides applied after the file, in order.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Smooth-convection error tables for the Galerkin, EV and FCT schemes.
    Table1 {
        /// Largest mesh to include, in degrees of freedom.
        #[arg(long, default_value_t = 6400)]
        max_dofs: usize,
        #[arg(long, default_value = "out/table1")]
        out: PathBuf,
    },
    /// Fractional-diffusion error tables for two sinc rules.
    Table2 {
        #[arg(long, default_value = "out/table2")]
        out: PathBuf,
    },
    /// Single and double rotating vortices.
    Vortex {
        #[arg(long, default_value = "out/vortex")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Decaying turbulence in SQG and QG mode, with spectrum slopes.
    Turbulence {
        #[arg(long, default_value = "out/turbulence")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// `key=value` overrides applied to every run.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            overrides,
        } => {
            let mut cfg = RunConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            apply(&mut cfg, &overrides)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = Some(o);
            }
            let rec = run(&cfg)?;
            summarize(&rec);
            Ok(())
        }
        Command::Table1 { max_dofs, out } => table1(max_dofs, &out),
        Command::Table2 { out } => table2(&out),
        Command::Vortex { out, common } => vortex(&out, &common.overrides),
        Command::Turbulence { out, seed, common } => turbulence(&out, seed, &common.overrides),
    }
}

fn apply(cfg: &mut RunConfig, overrides: &[String]) -> Result<()> {
    for o in overrides {
        cfg.apply_override(o)
            .with_context(|| format!("override `{o}`"))?;
    }
    Ok(())
}

fn summarize(rec: &RunRecord) {
    let s = &rec.final_state;
    println!("{} steps to t = {}", s.step_index, s.t);
    if let Some(last) = rec.rows.last() {
        println!(
            "kinetic energy {:.6e}, theta in [{:.6e}, {:.6e}]",
            last.kinetic_energy, last.theta_min, last.theta_max
        );
    }
    if let Some(e) = rec.final_errors {
        println!(
            "errors: L1 {:.3e} L2 {:.3e} Linf {:.3e}",
            e.l1, e.l2, e.linf
        );
    }
    if let Some(dir) = &rec.config.output_dir {
        println!("output in {}", dir.display());
    }
}

fn print_study(title: &str, rows: &[StudyRow]) {
    let (r1, r2, rinf) = study_rates(rows);
    let rate = |r: Option<f64>| r.map_or("-".to_string(), |v| format!("{v:.2}"));
    println!("{title}");
    println!(
        "{:>8} {:>10} {:>6} {:>10} {:>6} {:>10} {:>6}",
        "dofs", "L1", "rate", "L2", "rate", "Linf", "rate"
    );
    for (k, r) in rows.iter().enumerate() {
        let e = r.errors;
        println!(
            "{:>8} {:>10.3e} {:>6} {:>10.3e} {:>6} {:>10.3e} {:>6}",
            r.dofs,
            e.l1,
            rate(r1[k]),
            e.l2,
            rate(r2[k]),
            e.linf,
            rate(rinf[k])
        );
    }
}

fn write_study(dir: &Path, rows: &[StudyRow]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let table: Vec<_> = rows.iter().map(|r| (r.dofs, r.errors)).collect();
    write_error_table(&dir.join("errors.csv"), &table)?;
    Ok(())
}

fn table1(max_dofs: usize, out: &Path) -> Result<()> {
    let sides: Vec<usize> = STUDY_SIDES
        .iter()
        .copied()
        .filter(|n| n * n <= max_dofs)
        .collect();
    if sides.is_empty() {
        bail!("--max-dofs {max_dofs} excludes every mesh (smallest has 100 dofs)");
    }
    let blocks = [
        ("galerkin", SchemeKind::Galerkin, Normalization::Local),
        ("ev", SchemeKind::EntropyViscosity, Normalization::Local),
        ("fct", SchemeKind::Fct, Normalization::Local),
        ("ev_max", SchemeKind::EntropyViscosity, Normalization::Max),
        ("fct_max", SchemeKind::Fct, Normalization::Max),
    ];
    for (name, scheme, norm) in blocks {
        let rows = convergence_study(&convection_config(scheme, norm), &sides)?;
        print_study(&format!("smooth convection, {name}"), &rows);
        write_study(&out.join(name), &rows)?;
    }
    println!("tables in {}", out.display());
    Ok(())
}

fn table2(out: &Path) -> Result<()> {
    for (name, q) in [
        ("k0.8_M12", SincQuadrature::standard()),
        ("k0.2_M62", SincQuadrature::fine()),
    ] {
        let rows = convergence_study(&diffusion_config(q), &STUDY_SIDES)?;
        print_study(
            &format!("fractional diffusion, k = {}, M = {}", q.k, q.m),
            &rows,
        );
        write_study(&out.join(name), &rows)?;
    }
    println!("tables in {}", out.display());
    Ok(())
}

fn vortex(out: &Path, overrides: &[String]) -> Result<()> {
    for sc in [Scenario::SingleVortex, Scenario::DoubleVortex] {
        let mut cfg = RunConfig::preset(sc);
        apply(&mut cfg, overrides)?;
        cfg.output_dir = Some(out.join(sc.name()));
        println!("{sc}");
        summarize(&run(&cfg)?);
    }
    Ok(())
}

fn turbulence(out: &Path, seed: Option<u64>, overrides: &[String]) -> Result<()> {
    for mode in [VelocityMode::Sqg, VelocityMode::Qg] {
        let mut cfg = RunConfig::preset(Scenario::DecayingTurbulence);
        cfg.mode = mode;
        apply(&mut cfg, overrides)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.output_dir = Some(out.join(mode.to_string()));
        println!("{mode}");
        let rec = run(&cfg)?;
        summarize(&rec);
        if let Some((t, sp)) = rec.spectra.last() {
            let inertial = slope_fit(&sp.modulus, 3, 20)?;
            let tail_hi = (sp.modulus.len() - 1).min(120);
            let tail = slope_fit(&sp.modulus, 40.min(tail_hi - 1), tail_hi)?;
            println!("t = {t}: spectrum slope {inertial:.3} over m in [3, 20], {tail:.3} over [40, {tail_hi}]");
        }
    }
    Ok(())
}
