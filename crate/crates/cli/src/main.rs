use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trimiga::adapt::asymptotic_effectivity;
use trimiga::bench::{parse_config, run_case, Case, CaseId, RunConfig, RESULTS_FILE};
use trimiga::Error;

#[derive(Parser)]
#[command(name = "trimiga", version, about = "Adaptive isogeometric Poisson solver on trimmed domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark described by a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for results.csv and dumps.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Write mesh_iter_<k>.svg per iteration.
        #[arg(long)]
        dump_mesh: bool,
        /// Write cells_iter_<k>.csv with the per-cell indicators.
        #[arg(long)]
        dump_cells: bool,
    },
    /// Run the property suites.
    Verify,
    /// Show a benchmark case.
    Case {
        #[arg(long)]
        id: String,
        /// Print the resolved defaults.
        #[arg(long)]
        print: bool,
    },
}

const CONFIG_ERROR: u8 = 2;

fn run(config: PathBuf, out: PathBuf, dump_mesh: bool, dump_cells: bool) -> ExitCode {
    let case = match std::fs::read_to_string(&config)
        .map_err(|e| Error::Config(format!("{}: {e}", config.display())))
        .and_then(|text| parse_config(&text))
    {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let rc = RunConfig {
        out_dir: out,
        dump_mesh,
        dump_cells,
    };
    match run_case(&case, &rc) {
        Ok(outcome) => {
            for r in &outcome.records {
                eprintln!(
                    "iter {:>3}  dofs {:>6}  levels {:>2}  error {:.4e}  estimator {:.4e}  effectivity {:.3}  marked {}",
                    r.iter, r.n_dof, r.n_levels, r.energy_error, r.estimator, r.effectivity, r.n_marked
                );
            }
            if let Some(eff) = asymptotic_effectivity(&outcome.records) {
                eprintln!("asymptotic effectivity {eff:.3}");
            }
            eprintln!("wrote {}", rc.out_dir.join(RESULTS_FILE).display());
            match outcome.error {
                Some(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn verify() -> ExitCode {
    let results = trimiga::verify::run_all();
    let mut ok = true;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {} ({:.2}s) {}", r.name, r.elapsed.as_secs_f64(), r.detail);
        ok &= r.passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            dump_mesh,
            dump_cells,
        } => run(config, out, dump_mesh, dump_cells),
        Command::Verify => verify(),
        Command::Case { id, print } => match id.parse::<CaseId>() {
            Ok(id) => {
                if print {
                    print!("{}", Case::new(id).describe());
                } else {
                    println!("{id}");
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(CONFIG_ERROR)
            }
        },
    }
}
