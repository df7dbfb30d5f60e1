use std::io::{Read, Write};
use std::path::Path;

use super::{EvalError, Result, RunResult};

fn io_err(path: &Path, e: impl std::fmt::Display) -> EvalError {
    EvalError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes `run,seed,accuracy,macro_f1,weighted_f1,epochs` rows.
pub fn write_runs<W: Write>(writer: W, runs: &[RunResult]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in runs {
        w.serialize(r)?;
    }
    if runs.is_empty() {
        w.write_record(["run", "seed", "accuracy", "macro_f1", "weighted_f1", "epochs"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runs<R: Read>(reader: R) -> csv::Result<Vec<RunResult>> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

pub fn write_runs_csv(path: &Path, runs: &[RunResult]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    write_runs(file, runs).map_err(|e| io_err(path, e))
}

pub fn read_runs_csv(path: &Path) -> Result<Vec<RunResult>> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let runs = read_runs(file).map_err(|e| io_err(path, e))?;
    for r in &runs {
        for (name, v) in [("accuracy", r.accuracy), ("macro_f1", r.macro_f1), ("weighted_f1", r.weighted_f1)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(io_err(path, format!("run {}: {name} = {v} is outside [0, 1]", r.run)));
            }
        }
    }
    Ok(runs)
}
