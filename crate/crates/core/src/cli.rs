//! Command-line front end. The binary only parses arguments and calls [`run`].

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

use crate::config::load_sim_config;
use crate::error::Result;
use crate::output::{comparison_toml, write_run, write_run_prefixed};
use crate::plant::linearize_detailed;
use crate::sim::{compare_runs, run_scenario, PlantModel, ScenarioModel, SimConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_SAFETY: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "safe-adaptive", version, about = "Governed adaptive temperature control of a PEM fuel cell stack")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// More log output on stderr (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Accepted for scripts that pin determinism; runs never draw random numbers
    #[arg(long, global = true)]
    pub seedless: bool,
}

impl Cli {
    pub fn log_level(&self) -> log::LevelFilter {
        match self.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one closed-loop scenario and write records.csv, summary.toml, scenario.toml
    Simulate(SimulateArgs),
    /// Print the linearized plant, reference model and Lyapunov matrix
    Linearize(ConfigArg),
    /// Run the scenario with and without the governor side by side
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Scenario TOML file; defaults apply when omitted
    #[arg(short, long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Output directory, created if missing
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    /// Feed the raw setpoint straight to the reference model
    #[arg(long)]
    pub no_governor: bool,
    /// Simulate the nonlinear thermal balance instead of the perturbed linear plant
    #[arg(long = "bilinear-plant")]
    pub bilinear: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long = "bilinear-plant")]
    pub bilinear: bool,
}

fn load(arg: &ConfigArg) -> Result<SimConfig> {
    match &arg.config {
        Some(path) => load_sim_config(path),
        None => {
            let cfg = SimConfig::default();
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn run<W: Write>(cli: &Cli, stdout: &mut W) -> u8 {
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a, stdout),
        Command::Linearize(a) => linearize(a, stdout),
        Command::Compare(a) => compare(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            let _ = writeln!(std::io::stderr(), "error: {e}");
            EXIT_ERROR
        }
    }
}

fn simulate<W: Write>(a: &SimulateArgs, stdout: &mut W) -> Result<u8> {
    let mut cfg = load(&a.config)?;
    if a.no_governor {
        cfg.governed = false;
    }
    if a.bilinear {
        cfg.plant_model = PlantModel::Bilinear;
    }
    let run = run_scenario(&cfg)?;
    write_run(&a.out, &cfg, &run)?;
    let s = &run.summary;
    writeln!(
        stdout,
        "max|x| = {:.6} degC, final x = {:.6} degC, safety_ok = {}, infeasible samples = {}",
        s.max_abs_x, s.final_x, s.safety_ok, s.infeasible_samples
    )?;
    info!("wrote {}", a.out.display());
    if s.any_infeasible {
        warn!("governor was infeasible at {} samples", s.infeasible_samples);
    }
    if cfg.governed && !s.safety_ok {
        warn!(
            "{} records exceeded |x| <= {}",
            s.violation_count,
            cfg.safety_bound()
        );
        return Ok(EXIT_SAFETY);
    }
    Ok(EXIT_OK)
}

fn linearize<W: Write>(a: &ConfigArg, out: &mut W) -> Result<u8> {
    let cfg = load(a)?;
    let lin = linearize_detailed(&cfg.params, &cfg.operating_point)?;
    let model = ScenarioModel::build(&cfg)?;
    let c = &lin.coefficients;
    let (am, bm, p) = (&model.reference.a, &model.reference.b, &model.p);
    writeln!(
        out,
        "operating point: T_st0 = {} degC, I = {} A, T_in = {} degC",
        cfg.operating_point.t_st0, cfg.operating_point.current, cfg.operating_point.t_in
    )?;
    writeln!(out, "A0    = {:.10e} degC/s", c.a0)?;
    writeln!(out, "A1    = {:.10e} 1/s", c.a1)?;
    writeln!(out, "B0    = {:.10e} 1/kg", c.b0)?;
    writeln!(out, "w_c0  = {:.6} kg/s", lin.nominal_flow)?;
    writeln!(out, "J     = {:.6} kg/degC", lin.plant.j)?;
    writeln!(out, "B     = {:.6} kg/(s·degC)", lin.plant.b)?;
    writeln!(out, "A_m   = [[{:.6}, {:.6}], [{:.6}, {:.6}]]", am[(0, 0)], am[(0, 1)], am[(1, 0)], am[(1, 1)])?;
    writeln!(out, "b_m   = [{:.6}, {:.6}]", bm[0], bm[1])?;
    writeln!(out, "P     = [[{:.6}, {:.6}], [{:.6}, {:.6}]]", p[(0, 0)], p[(0, 1)], p[(1, 0)], p[(1, 1)])?;
    Ok(EXIT_OK)
}

fn compare<W: Write>(a: &CompareArgs, stdout: &mut W) -> Result<u8> {
    let mut governed = load(&a.config)?;
    if a.bilinear {
        governed.plant_model = PlantModel::Bilinear;
    }
    governed.governed = true;
    let ungoverned = SimConfig { governed: false, ..governed.clone() };
    let (cmp, rg, ru) = compare_runs(&governed, &ungoverned)?;
    write_run_prefixed(&a.out, "governed_", &governed, &rg)?;
    write_run_prefixed(&a.out, "ungoverned_", &ungoverned, &ru)?;
    std::fs::write(a.out.join("comparison.toml"), comparison_toml(&cmp)?)?;
    writeln!(
        stdout,
        "max|x| governed = {:.6} degC, ungoverned = {:.6} degC",
        rg.summary.max_abs_x, ru.summary.max_abs_x
    )?;
    if !rg.summary.safety_ok {
        return Ok(EXIT_SAFETY);
    }
    Ok(EXIT_OK)
}
