use std::path::PathBuf;
use std::process::ExitCode;

use adapnet::harness::{oracle_compare, run_preset, Preset};
use adapnet::mesh::snapshot::{edge_list, parse_edge_list};
use adapnet::{build_geode, check_invariant, rng_from_seed, Config, Error};
use clap::{Parser, Subcommand};

/// Simulator and experiment harness for the adapnet overlay.
#[derive(Parser, Debug)]
#[command(name = "adapnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment preset and write its CSV files.
    Run {
        #[arg(long, value_parser = parse_preset)]
        preset: Preset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; without it the files go to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use the full-size network instead of the scaled-down default.
        #[arg(long)]
        large: bool,
        /// key=value settings file applied over the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// A single key=value override, applied last. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Print the effective configuration to standard error.
        #[arg(long)]
        show_config: bool,
    },
    /// Check the mesh invariant and connectivity of an edge-list file.
    CheckInvariant {
        #[arg(long)]
        topology: PathBuf,
    },
    /// Compare spiral-walk scans against BFS balls on a geode.
    OracleCompare {
        #[arg(long)]
        geode: u32,
        #[arg(long)]
        radius: u32,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the geode of a subdivision level as an edge list.
    Geode {
        #[arg(long)]
        level: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Exit status: 0 success, 1 validation or runtime failure, 2 bad usage.
enum Failure {
    Usage(String),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse(_) | Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            preset,
            seed,
            out,
            large,
            config,
            overrides,
            show_config,
        } => {
            let mut c: Config = preset.config(seed, large);
            if let Some(path) = config {
                let text = std::fs::read_to_string(&path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                c.apply(&text)?;
            }
            for o in &overrides {
                let (k, v) = o.split_once('=').ok_or_else(|| Failure::Usage(format!("--set `{o}` is not key=value")))?;
                c.set(k, v)?;
            }
            c.validate()?;
            if show_config {
                eprint!("{c}");
            }
            let output = run_preset(preset, &c)?;
            if let Some(body) = output.get("errors.csv") {
                let n = body.lines().count().saturating_sub(1);
                if n > 0 {
                    eprintln!("warning: {n} module errors logged to errors.csv");
                }
            }
            if let Some(body) = output.get("spacing.csv") {
                for topo in ["geode", "grown"] {
                    if !body.lines().any(|l| l.starts_with(topo)) {
                        eprintln!("warning: {topo} run ended with fewer than two replicas; its spacing histogram is empty");
                    }
                }
            }
            match out {
                Some(dir) => {
                    output.write_to(&dir)?;
                    eprintln!("{preset}: wrote {} files to {}", output.files.len(), dir.display());
                }
                None => {
                    for (name, body) in &output.files {
                        println!("==> {name} <==");
                        print!("{body}");
                    }
                }
            }
            Ok(())
        }
        Command::CheckInvariant { topology } => {
            let text = std::fs::read_to_string(&topology).map_err(|e| Failure::Usage(format!("{}: {e}", topology.display())))?;
            let t = parse_edge_list(&text)?;
            let report = check_invariant(&t);
            println!("nodes,edges,violations,components");
            println!("{},{},{},{}", t.alive_count(), t.edge_count(), report.violations.len(), report.components.len());
            for (a, b, c) in report.violations.iter().take(10) {
                eprintln!("edge {a}-{b} has {c} common neighbors");
            }
            if report.components.len() > 1 {
                eprintln!("graph has {} components", report.components.len());
            }
            if report.is_valid() {
                Ok(())
            } else {
                Err(Failure::Invalid("invariant violated".into()))
            }
        }
        Command::OracleCompare { geode, radius, trials, seed } => {
            let t = build_geode(geode)?;
            let mut rng = rng_from_seed(seed);
            let report = oracle_compare(&t, radius, trials, &mut rng)?;
            println!("{}/{} exact matches", report.matches, report.trials);
            match report.first_mismatch {
                None => Ok(()),
                Some(m) => {
                    eprintln!(
                        "first mismatch: source {} radius {}: missing {:?} extra {:?} duplicates {:?} wrong distance {:?}",
                        m.source, m.radius, m.missing, m.extra, m.duplicates, m.wrong_distance
                    );
                    Err(Failure::Invalid("spiral walk disagrees with BFS".into()))
                }
            }
        }
        Command::Geode { level, out } => {
            let t = build_geode(level)?;
            std::fs::write(&out, edge_list(&t)).map_err(|e| Failure::Invalid(format!("{}: {e}", out.display())))?;
            eprintln!("geode level {level}: {} nodes, {} edges", t.alive_count(), t.edge_count());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}
