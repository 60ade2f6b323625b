//! Benchmark cases, run configuration and output files.

mod cases;
mod config;
mod output;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub use cases::{Case, CaseId, Exact, L_CORNER};
pub use config::parse_config;
pub use output::{mesh_svg, write_records, CSV_HEADER};

use crate::adapt::LoopOutcome;
use crate::error::Result;

pub const RESULTS_FILE: &str = "results.csv";

/// Where and what to write during a run.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// Write `mesh_iter_<k>.svg` for every iteration.
    pub dump_mesh: bool,
    /// Write `cells_iter_<k>.csv` with the per-cell indicators.
    pub dump_cells: bool,
}

/// Run a case and write `results.csv` plus the requested dumps into the
/// output directory. The records are written even when the loop stopped on
/// an error, which is then returned in the outcome.
pub fn run_case(case: &Case, run: &RunConfig) -> Result<LoopOutcome> {
    fs::create_dir_all(&run.out_dir)?;
    let map = case.map();
    let dir: &Path = &run.out_dir;
    let outcome = case.run(&mut |state| {
        let k = state.record.iter;
        if run.dump_mesh {
            let svg = mesh_svg(state.space, state.classification, &map);
            fs::write(dir.join(format!("mesh_iter_{k}.svg")), svg)?;
        }
        if run.dump_cells {
            let mut w = BufWriter::new(File::create(dir.join(format!("cells_iter_{k}.csv")))?);
            state.estimate.write_csv(state.space, &mut w)?;
            w.flush()?;
        }
        Ok(())
    })?;
    let mut w = BufWriter::new(File::create(dir.join(RESULTS_FILE))?);
    write_records(&outcome.records, &mut w)?;
    w.flush()?;
    Ok(outcome)
}
