use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lingreedy::harness::{
    all_presets, preset_config, run_experiment, write_outputs, ExperimentConfig, HarnessError,
    PolicyEntry, PresetDist, PresetShape,
};
use lingreedy::policies::PolicyKind;

#[derive(Parser)]
#[command(
    name = "lingreedy",
    version,
    about = "Greedy linear contextual bandit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or a builtin preset.
    Run(RunArgs),
    /// List the builtin presets.
    Presets,
    /// Print the resolved config without running it.
    ShowConfig(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Builtin shape: d20k20, d100k20 or d20k100.
    #[arg(long)]
    preset: Option<PresetShape>,
    /// Builtin distribution, resolved for the final d.
    #[arg(long)]
    dist: Option<PresetDist>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "T")]
    horizon: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated policies with default hyperparameters.
    #[arg(long, value_delimiter = ',')]
    algo: Option<Vec<PolicyKind>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG regret plot.
    #[arg(long)]
    svg: bool,
    /// Run diagnostics and add them to the sidecar file.
    #[arg(long)]
    diagnostics: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => preset_config(
                self.preset.unwrap_or(PresetShape::D20K20),
                self.dist.unwrap_or(PresetDist::Gaussian),
            ),
        };
        if let Some(v) = self.d {
            cfg.d = v;
            if self.dist.is_none() && self.config.is_none() {
                cfg.spec = PresetDist::Gaussian.spec(v);
            }
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.reps {
            cfg.reps = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(dist) = self.dist {
            cfg.spec = dist.spec(cfg.d);
        }
        if let Some(kinds) = &self.algo {
            cfg.policies = kinds.iter().copied().map(PolicyEntry::new).collect();
        }
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
        cfg.emit_svg |= self.svg;
        cfg.diagnostics |= self.diagnostics;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(args: &RunArgs) -> Result<(), HarnessError> {
    let cfg = args.resolve()?;
    let results = run_experiment(&cfg)?;
    let dir = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("results"));
    for path in write_outputs(&cfg, &results, &dir)? {
        println!("wrote {}", path.display());
    }
    let last = results
        .table
        .aggregate
        .iter()
        .filter(|r| r.t == cfg.horizon);
    for row in last {
        println!(
            "{:>10}  R({}) = {:.3} +- {:.3}",
            row.policy, row.t, row.cum_regret_mean, row.cum_regret_std
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::ShowConfig(args) => args.resolve().map(|cfg| print!("{}", cfg.to_toml_string())),
        Command::Presets => {
            for (shape, dist) in all_presets() {
                let (d, k) = shape.dims();
                println!("{:<8} {:<17} d={d:<4} K={k}", shape.name(), dist.name());
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
