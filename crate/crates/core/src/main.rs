use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use roomchan::harness::{dump_realizations, parse_config, run_experiment, write_theory, SimulationConfig};
use roomchan::pointprocess::ModelKind;
use roomchan::Error;

#[derive(Parser)]
#[command(name = "roomchan", version, about = "In-room multipath channel simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo ensemble and write all data files.
    Run(Common),
    /// Evaluate the closed-form curves to CSV.
    Theory(Common),
    /// Dump individual realizations (`--runs` of them, default `dump_count`).
    Sample(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// ms, poisson, constant or quadratic.
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dump_realizations: bool,
}

impl Common {
    fn load(&self) -> Result<SimulationConfig, Error> {
        let text = match &self.config {
            Some(path) => std::fs::read_to_string(path)
                .map_err(|e| Error::Config {
                    key: "--config".into(),
                    msg: format!("{}: {e}", path.display()),
                })?,
            None => String::new(),
        };
        let mut cfg = parse_config(&text)?;
        if let Some(m) = self.model {
            cfg.model = m;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if self.dump_realizations {
            cfg.dump_realizations = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(command: &Command) -> Result<(), Error> {
    match command {
        Command::Run(c) => {
            let cfg = c.load()?;
            let summary = run_experiment(&cfg)?;
            let (mean, se) = summary.mean_count();
            eprintln!(
                "{} runs of model {}: mean arrivals {:.1} +- {:.1}, T = {:.3} ns, wrote {}",
                summary.runs,
                summary.model,
                mean,
                se,
                summary.reverb_time * 1e9,
                cfg.output_dir.display()
            );
        }
        Command::Theory(c) => {
            let cfg = c.load()?;
            write_theory(&cfg, &cfg.output_dir)?;
            eprintln!("wrote theory curves to {}", cfg.output_dir.display());
        }
        Command::Sample(c) => {
            let cfg = c.load()?;
            let count = c.runs.unwrap_or(cfg.dump_count);
            let dir = cfg.output_dir.join("realizations");
            dump_realizations(&cfg, count, &dir)?;
            std::fs::write(cfg.output_dir.join("config.txt"), cfg.to_text())?;
            eprintln!("wrote {count} realizations to {}", dir.display());
        }
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
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
