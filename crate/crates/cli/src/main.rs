//! `tlsim`: per-figure experiments on a driven two-level emitter.

mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use config::{Experiment, Preset, RunConfig};
use error::CliError;
use run::Output;

#[derive(Debug, Parser)]
#[command(name = "tlsim", version, about = "Two-level emitter under coherent and chaotic drive")]
struct Cli {
    #[arg(value_enum)]
    command: Experiment,

    /// JSON run configuration; overrides the preset, overridden by flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, value_enum, global = true)]
    preset: Option<Preset>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Primary sample count of the experiment (ensemble size, field length,
    /// sweep points, or expected detected photons for tag runs).
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Worker threads. Results do not depend on this value.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Also run the oracle suite and fail with exit code 4 if any check fails.
    #[arg(long, global = true)]
    validate: bool,
}

fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    if let Some(p) = cli.preset {
        if p.experiment() != cli.command {
            return Err(CliError::Config(format!(
                "preset {} belongs to `{:?}`, not `{:?}`",
                p.name(),
                p.experiment(),
                cli.command
            )));
        }
    }
    let doc = cli.config.as_deref().map(config::load_document).transpose()?;
    let mut cfg = config::resolve(cli.preset, doc)?;
    if let Some(e) = cfg.experiment {
        if e != cli.command && cli.command != Experiment::Validate {
            return Err(CliError::Config(format!("config selects `{e:?}` but the command is `{:?}`", cli.command)));
        }
    }
    cfg.experiment = Some(cli.command);
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(n) = cli.samples {
        let tls = cfg.resolve_parameters()?.tls;
        cfg.set_samples(cli.command, n, |c| match cli.command {
            Experiment::G2 => {
                run::detected_rate(&tls, c.g2.rabi, c.g2.detuning, c.g2.statistics, c.g2.efficiency, c.g2.blinking.as_ref())
            }
            _ => run::detected_rate(
                &tls,
                c.tags.rabi,
                c.tags.detuning,
                c.tags.statistics,
                c.tags.efficiency,
                c.tags.blinking.as_ref(),
            ),
        })?;
    }
    cfg.validate(cli.command)?;
    Ok(cfg)
}

fn main_inner(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let cfg = effective_config(cli)?;
    let params = cfg.resolve_parameters()?;
    let mut out = Output::new(&cfg.out)?;

    let results = run::execute(cli.command, &cfg, &params, &mut out)?;
    let mut sidecar = json!({
        "command": cli.command,
        "preset": cli.preset.map(Preset::name),
        "seed": cfg.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "parameters": params.set,
        "config": cfg,
        "results": results,
    });
    let mut checks = None;
    if cli.validate && cli.command != Experiment::Validate {
        match run::validation(&cfg, &params, &mut out) {
            Ok(v) => checks = Some(Ok(v)),
            Err(e) => checks = Some(Err(e)),
        }
    }
    sidecar["files"] = json!(out.files.clone());
    out.write_json("run.json", &sidecar)?;
    for f in &out.files {
        println!("{}", cfg.out.join(f).display());
    }
    match checks {
        Some(Err(e)) => Err(e),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tlsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
