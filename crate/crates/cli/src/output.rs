use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use kdvstar::discretization::GraphState;
use kdvstar::diagnostics::EnergyLedger;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Collects every file a command writes. All writes go through here so
/// nothing lands outside the output directory.
#[derive(Debug)]
pub struct Session {
    out_dir: Option<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Session {
    pub fn new(out_dir: Option<PathBuf>) -> Self {
        Session {
            out_dir,
            outputs: Vec::new(),
        }
    }

    pub fn has_output(&self) -> bool {
        self.out_dir.is_some()
    }

    /// Writes `name` under the output directory. Without one the call is a
    /// no-op and the command's summary on stdout is the only output.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let Some(dir) = &self.out_dir else {
            return Ok(());
        };
        debug_assert!(!name.contains('/') && !name.contains(".."));
        fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.clone(), e))?;
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(path.clone(), e))?;
        self.outputs.push(path);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("output serializes");
        self.write(name, &text)
    }

    pub fn outputs(&self) -> &[PathBuf] {
        &self.outputs
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub config_sha256: String,
    /// The configuration with every default filled in.
    pub config: serde_json::Value,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub exit_code: i32,
    pub outputs: Vec<String>,
}

pub fn config_hash(resolved_json: &str) -> String {
    format!("{:x}", Sha256::digest(resolved_json.as_bytes()))
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// Long-format snapshot table with columns `t,edge,x,u`.
pub fn snapshots_csv(states: &[GraphState]) -> String {
    let mut out = String::from("t,edge,x,u\n");
    for s in states {
        for (j, (grid, vals)) in s.grids.iter().zip(&s.values).enumerate() {
            for (i, u) in vals.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", s.t, j, grid.x(i), u);
            }
        }
    }
    out
}

/// One row per step interval.
pub fn ledger_csv(ledger: &EnergyLedger) -> String {
    let mut out = String::from("t_mid,energy_next,rate,vertex_term,outer_term,forcing_term,residual\n");
    for k in 0..ledger.rate.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            ledger.t_mid[k],
            ledger.energy[k + 1],
            ledger.rate[k],
            ledger.vertex_term[k],
            ledger.outer_term[k],
            ledger.forcing_term[k],
            ledger.residual[k]
        );
    }
    out
}

pub fn coo_csv(triples: &[(usize, usize, f64)]) -> String {
    let mut out = String::from("row,col,value\n");
    for (r, c, v) in triples {
        let _ = writeln!(out, "{r},{c},{v}");
    }
    out
}
