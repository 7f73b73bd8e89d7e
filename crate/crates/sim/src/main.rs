use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dcm_step_core::alip::{compute_dcm_bounds, verify_boundedness};
use dcm_step_core::planner::plan;
use dcm_step_core::terrain::generate_profile;
use dcm_step_sim::io::{read_json, write_json, write_run, PlanRequest};
use dcm_step_sim::{run_comparison, run_scenario, PlannerMode, Scenario, SimConfig};

#[derive(Parser)]
#[command(name = "dcm-step", version, about = "Footstep MPC on stepping stones, reduced-order simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    Mpc,
    Qp,
}

#[derive(clap::Args)]
struct ScenarioArgs {
    /// I, II, III, IV or perturb. Overrides the scenario in --params.
    #[arg(long)]
    profile: Option<String>,
    /// TOML config file.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Forward spacing for profile I.
    #[arg(long, default_value_t = 0.4)]
    length: f64,
    /// Lateral deviation for profile I.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    width: f64,
    #[arg(long, default_value_t = 4)]
    horizon: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop scenario and write its traces.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum, default_value_t = PlannerArg::Mpc)]
        planner: PlannerArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run MPC and QP on several seeds and print a JSON summary.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that the DCM bounds are invariant under admissible steps.
    VerifyBounds {
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Solve one planner request stored as JSON and print the solution.
    Plan {
        #[arg(long)]
        input: PathBuf,
    },
    /// Write the stone profile of a scenario as JSON.
    Profile {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn build_config(a: &ScenarioArgs, mode: PlannerMode) -> Result<SimConfig> {
    let mut cfg = match &a.params {
        Some(path) => SimConfig::load(path)?,
        None => {
            let label = a.profile.as_deref().unwrap_or("II");
            SimConfig::new(Scenario::preset(label, a.seed, a.length, a.width)?, mode)
        }
    };
    if a.params.is_some() {
        if let Some(label) = &a.profile {
            cfg.scenario = Scenario::preset(label, a.seed, a.length, a.width)?;
        } else {
            cfg.scenario.seed = a.seed;
        }
    }
    cfg.planner_mode = mode;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { scenario, planner, out } => {
            let mode = match planner {
                PlannerArg::Mpc => PlannerMode::Mpc {
                    horizon: scenario.horizon,
                },
                PlannerArg::Qp => PlannerMode::Qp,
            };
            let cfg = build_config(&scenario, mode)?;
            let result = run_scenario(&cfg)?;
            write_run(&out, &result, &mode.label())?;
            std::fs::write(out.join("config.toml"), cfg.to_toml_string()?)
                .with_context(|| format!("writing config into {}", out.display()))?;
            println!(
                "{} seed {} {}: {} rmse {:.4} m",
                result.profile.kind.label(),
                cfg.scenario.seed,
                mode.label(),
                dcm_step_sim::io::status_text(&result.trace.status),
                result.metrics.step_position_rmse
            );
        }
        Command::Compare { scenario, seeds, out } => {
            let cfg = build_config(
                &scenario,
                PlannerMode::Mpc {
                    horizon: scenario.horizon,
                },
            )?;
            let summary = run_comparison(&cfg, &seeds)?;
            match out {
                Some(path) => write_json(&path, &summary)?,
                None => println!("{}", serde_json::to_string_pretty(&summary)?),
            }
        }
        Command::VerifyBounds { grid, params } => {
            let cfg = match params {
                Some(p) => SimConfig::load(&p)?,
                None => SimConfig::new(Scenario::preset("I", 0, 0.4, 0.0)?, PlannerMode::Qp),
            };
            let limits = cfg.planner.limits;
            let bounds = compute_dcm_bounds(&limits, &cfg.model);
            println!("{}", serde_json::to_string_pretty(&bounds)?);
            match verify_boundedness(&bounds, &limits, &cfg.model, grid) {
                Ok(report) => println!("{}", serde_json::to_string_pretty(&report)?),
                Err(e) => bail!("{e}"),
            }
        }
        Command::Plan { input } => {
            let req: PlanRequest = read_json(&input)?;
            let sol = plan(&req.input, &req.planner, &req.model)?;
            println!("{}", serde_json::to_string_pretty(&sol)?);
        }
        Command::Profile { scenario, out } => {
            let cfg = build_config(&scenario, PlannerMode::Qp)?;
            let profile = generate_profile(&cfg.scenario.profile, cfg.scenario.seed, &cfg.planner.limits)?;
            write_json(&out, &profile)?;
        }
    }
    Ok(())
}
