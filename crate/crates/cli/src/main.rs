use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qinsim::config::{load_config, resolve_config, ResolvedConfig};
use qinsim::ephemeris::{tabulate, EphemerisTable};
use qinsim::output::{summary_table, write_run};
use qinsim::presets;
use qinsim::{run_scenario, RunOutput, Trajectory};

/// Satellite-to-ground entanglement distribution mission simulator.
#[derive(Parser)]
#[command(name = "qinsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenarios. Each argument is a config file or a preset name.
    Run {
        #[arg(required = true)]
        configs: Vec<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Also print a side-by-side table of all scenarios.
        #[arg(long)]
        compare: bool,
        /// Write the propagated trajectory of the (single) scenario as CSV.
        #[arg(long)]
        ephemeris_out: Option<PathBuf>,
    },
    /// Run several scenarios and write one comparison table.
    Compare {
        #[arg(required = true)]
        configs: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// List the built-in presets, or print one as a resolved config.
    Presets { name: Option<String> },
    /// Check a config and print its resolved form.
    Validate { config: String },
    /// Check an ephemeris CSV and optionally rewrite it in ECI.
    ImportEphemeris {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

fn load(arg: &str) -> Result<ResolvedConfig, Failure> {
    let path = Path::new(arg);
    let res = if path.exists() {
        load_config(path)
    } else if presets::preset_names().iter().any(|n| n == arg) {
        resolve_config(&format!(r#"{{"preset": "{arg}"}}"#), None)
    } else {
        return Err(Failure::Config(format!("{arg}: no such config file or preset")));
    };
    res.map_err(|e| Failure::Config(format!("{arg}: {e}")))
}

fn run_one(cfg: &ResolvedConfig, dir: &Path, workers: usize) -> Result<RunOutput, Failure> {
    let sc = &cfg.scenario;
    let run = run_scenario(sc, workers).map_err(|e| Failure::Runtime(format!("{}: {e}", sc.name)))?;
    write_run(dir, sc, &cfg.document, &run)
        .map_err(|e| Failure::Runtime(format!("writing {}: {e}", dir.display())))?;
    Ok(run)
}

fn run_many(configs: &[String], out: &Path, workers: usize, compare: bool) -> Result<(), Failure> {
    let loaded = configs.iter().map(|c| load(c)).collect::<Result<Vec<_>, _>>()?;
    let nested = loaded.len() > 1;
    let mut runs = Vec::new();
    for (k, cfg) in loaded.iter().enumerate() {
        let dir = if nested {
            out.join(format!("{:02}-{}", k + 1, cfg.scenario.name))
        } else {
            out.to_path_buf()
        };
        runs.push(run_one(cfg, &dir, workers)?);
    }
    let columns: Vec<_> = loaded.iter().zip(&runs).map(|(c, r)| (&c.scenario, &r.summary)).collect();
    let table = summary_table(&columns);
    if compare || nested {
        std::fs::write(out.join("comparison.txt"), &table)
            .map_err(|e| Failure::Runtime(format!("writing comparison: {e}")))?;
    }
    print!("{table}");
    for (cfg, run) in loaded.iter().zip(&runs) {
        if let Some(g) = run.gaps.iter().max_by_key(|g| g.length_days) {
            println!(
                "{}: longest gap without communication {} days ({} to {})",
                cfg.scenario.name, g.length_days, g.start, g.end
            );
        }
    }
    Ok(())
}

fn export_ephemeris(cfg: &ResolvedConfig, path: &Path) -> Result<(), Failure> {
    let sc = &cfg.scenario;
    let Trajectory::Elements(el) = &sc.trajectory else {
        return Err(Failure::Config("--ephemeris-out needs an element-based orbit".into()));
    };
    let table = tabulate(el, sc.start, sc.step_s, sc.duration_days).map_err(|e| Failure::Runtime(e.to_string()))?;
    std::fs::write(path, table.to_csv()).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            configs,
            out,
            workers,
            compare,
            ephemeris_out,
        } => {
            if let Some(path) = &ephemeris_out {
                if configs.len() != 1 {
                    return Err(Failure::Config("--ephemeris-out takes exactly one config".into()));
                }
                export_ephemeris(&load(&configs[0])?, path)?;
            }
            run_many(&configs, &out, workers, compare)
        }
        Command::Compare { configs, out, workers } => run_many(&configs, &out, workers, true),
        Command::Presets { name: None } => {
            for n in presets::preset_names() {
                println!("{n}");
            }
            Ok(())
        }
        Command::Presets { name: Some(n) } | Command::Validate { config: n } => {
            let cfg = load(&n)?;
            println!("{}", cfg.document.to_json_pretty());
            Ok(())
        }
        Command::ImportEphemeris { file, out } => {
            let table = EphemerisTable::load(&file).map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
            println!(
                "{} rows, {} frame, {} to {}",
                table.len(),
                table.source_frame(),
                table.first_epoch(),
                table.last_epoch()
            );
            if let Some(path) = out {
                std::fs::write(&path, table.to_csv())
                    .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(m) | Failure::Runtime(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
