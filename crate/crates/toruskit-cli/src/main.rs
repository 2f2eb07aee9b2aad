//! toruskit: invariant tori and attractors of conformally symplectic maps.
//!
//! Subcommands orchestrate the library: spectral solves of the invariance
//! equation, continuation to breakdown with the Sobolev blow-up estimate,
//! Greene-style periodic-orbit scans, invariant-bundle analysis, basin maps,
//! and deterministic reproduction of the benchmark artifacts.

mod commands;
mod config;

use anyhow::{bail, Result};
use commands::{Outcome, EXIT_CONFIG};
use config::RunConfig;
use std::path::PathBuf;

const USAGE: &str = "\
usage: toruskit <command> [--config FILE] [overrides]

commands:
  solve           solve the invariance equation at the configured epsilon
  continue        continue the torus in epsilon, writing a trace + checkpoint
  breakdown       continue toward breakdown and fit the Sobolev blow-up
  greene          periodic-orbit (Greene) breakdown estimate
  basins          basin-of-attraction map on a grid of initial conditions
  bundle          stable bundle, tangency angle and Lyapunov multipliers
  rotation-scan   rotation number vs. parameter a for the non-twist family
  reproduce <id>  regenerate a named artifact: table1 fig_basins fig_tongues
                  fig_existence fig_rotnum fig_drift_mu

common overrides:
  --config FILE       structured key = value configuration file
  --family NAME       conservative_standard | dissipative_standard |
                      nontwist_standard | spin_orbit_conservative |
                      spin_orbit_dissipative
  --lambda X          dissipation parameter
  --mu X              drift (default: the drift identity for the chosen omega)
  --eps X             perturbing parameter
  --omega golden|X    frequency preset or literal (radians per iterate)
  --rotation X        frequency as a rotation number (omega = 2*pi*X)
  --eps-start X / --eps-end X   continuation range
  --torus FILE        input torus checkpoint (bundle command)
  --out DIR           output directory (default toruskit-out)
  --jobs N            worker threads (0 = all cores)

exit codes: 0 ok, 1 config error, 2 non-convergence, 3 resource cap
";

fn parse_args(args: &[String]) -> Result<(String, Option<String>, RunConfig)> {
    if args.is_empty() {
        bail!("missing command");
    }
    let command = args[0].clone();
    let mut artifact = None;
    let mut i = 1;
    if command == "reproduce" {
        if i >= args.len() || args[i].starts_with("--") {
            bail!("reproduce needs an artifact id");
        }
        artifact = Some(args[i].clone());
        i += 1;
    }

    // a --config file is applied first so flags can override it
    let mut config_path: Option<PathBuf> = None;
    let mut overrides: Vec<(String, String, String)> = Vec::new();
    while i < args.len() {
        let flag = args[i].as_str();
        let mut value = || -> Result<String> {
            i += 1;
            args.get(i).cloned().ok_or_else(|| anyhow::anyhow!("flag {flag} needs a value"))
        };
        match flag {
            "--config" => config_path = Some(PathBuf::from(value()?)),
            "--family" => overrides.push(("model".into(), "family".into(), value()?)),
            "--lambda" => overrides.push(("model".into(), "lambda".into(), value()?)),
            "--mu" => overrides.push(("model".into(), "mu".into(), value()?)),
            "--eps" | "--epsilon" => overrides.push(("model".into(), "epsilon".into(), value()?)),
            "--omega" => {
                let v = value()?;
                if v == "golden" {
                    overrides.push(("omega".into(), "preset".into(), v));
                } else {
                    overrides.push(("omega".into(), "omega".into(), v));
                }
            }
            "--rotation" => overrides.push(("omega".into(), "rotation".into(), value()?)),
            "--eps-start" => overrides.push(("continuation".into(), "eps_start".into(), value()?)),
            "--eps-end" => overrides.push(("continuation".into(), "eps_end".into(), value()?)),
            "--n-modes" => overrides.push(("solver".into(), "n_modes".into(), value()?)),
            "--mode-cap" => overrides.push(("solver".into(), "mode_cap".into(), value()?)),
            "--tol" => overrides.push(("solver".into(), "tol".into(), value()?)),
            "--with-bundle" => overrides.push(("solver".into(), "with_bundle".into(), "true".into())),
            "--torus" => overrides.push(("bundle".into(), "torus".into(), value()?)),
            "--out" => overrides.push(("output".into(), "dir".into(), value()?)),
            "--jobs" => overrides.push(("run".into(), "jobs".into(), value()?)),
            other => bail!("unknown flag `{other}`"),
        }
        i += 1;
    }

    let mut cfg = match config_path {
        Some(p) => RunConfig::from_file(&p)?,
        None => RunConfig::default(),
    };
    for (section, key, value) in overrides {
        cfg.apply(&section, &key, &value)?;
    }
    Ok((command, artifact, cfg))
}

fn run() -> Result<Outcome> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--help" || a == "-h") || args.first().map(String::as_str) == Some("help")
    {
        print!("{USAGE}");
        return Ok(Outcome { code: 0 });
    }
    let (command, artifact, cfg) = parse_args(&args)?;
    toruskit::par::configure_jobs(cfg.jobs);
    match command.as_str() {
        "solve" => commands::cmd_solve(&cfg),
        "continue" => commands::cmd_continue(&cfg),
        "breakdown" => commands::cmd_breakdown(&cfg),
        "greene" => commands::cmd_greene(&cfg),
        "basins" => commands::cmd_basins(&cfg),
        "bundle" => commands::cmd_bundle(&cfg),
        "rotation-scan" => commands::cmd_rotation_scan(&cfg),
        "reproduce" => commands::cmd_reproduce(&cfg, artifact.as_deref().unwrap_or_default()),
        other => bail!("unknown command `{other}`\n{USAGE}"),
    }
}

fn main() {
    match run() {
        Ok(outcome) => std::process::exit(outcome.code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(EXIT_CONFIG);
        }
    }
}
