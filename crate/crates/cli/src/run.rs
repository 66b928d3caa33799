//! Run context: inputs that determine an output, and the files written.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_PRECISION_BITS: u64 = 256;

/// Floats in outputs: 17 significant digits, round-trip exact.
pub fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn precision_bits_from_env() -> Result<u64, CliError> {
    match std::env::var("BILLIARD_PRECISION_BITS") {
        Err(_) => Ok(DEFAULT_PRECISION_BITS),
        Ok(v) => match v.trim().parse::<u64>() {
            Ok(b) if b > 0 => Ok(b),
            _ => Err(CliError::Usage(format!("BILLIARD_PRECISION_BITS must be a positive integer, got {v:?}"))),
        },
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Everything an output depends on. Serialized into the CSV header, so it
/// must not hold anything that varies between equivalent runs.
#[derive(Clone, Debug, Serialize)]
pub struct Inputs {
    pub tool: &'static str,
    pub version: &'static str,
    /// Arguments without output paths and the thread count.
    pub args: Vec<String>,
    pub polygon_hash: Option<String>,
    pub seed: u64,
    pub precision_bits: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command_line: &'a [String],
    #[serde(flatten)]
    pub inputs: &'a Inputs,
    pub threads: usize,
    pub wall_time_s: f64,
    /// Samples or predicates left unresolved at the precision cap.
    pub uncertainty: u64,
}

pub struct Run {
    pub argv: Vec<String>,
    pub inputs: Inputs,
    pub threads: usize,
    started: Instant,
    pub unresolved: u64,
}

/// Flags whose value does not affect the content of outputs.
const NON_CONTENT: [&str; 3] = ["--out", "--svg", "--threads"];

fn content_args(argv: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in argv.iter().skip(1) {
        if skip {
            skip = false;
            continue;
        }
        if let Some((flag, _)) = a.split_once('=') {
            if NON_CONTENT.contains(&flag) {
                continue;
            }
        }
        if NON_CONTENT.contains(&a.as_str()) {
            skip = true;
            continue;
        }
        out.push(a.clone());
    }
    out
}

impl Run {
    pub fn new(argv: Vec<String>, seed: u64, precision_bits: u64, threads: usize) -> Self {
        let inputs = Inputs {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            args: content_args(&argv),
            polygon_hash: None,
            seed,
            precision_bits,
        };
        Run { argv, inputs, threads, started: Instant::now(), unresolved: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.inputs.seed
    }

    pub fn precision_bits(&self) -> u64 {
        self.inputs.precision_bits
    }

    pub fn set_polygon(&mut self, canonical: &str) {
        self.inputs.polygon_hash = Some(sha256_hex(canonical));
    }

    fn manifest_path(out: &Path) -> PathBuf {
        let mut s = out.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn write_manifest(&self, out: &Path) -> Result<(), CliError> {
        let m = RunManifest {
            command_line: &self.argv,
            inputs: &self.inputs,
            threads: self.threads,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            uncertainty: self.unresolved,
        };
        let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Failed(e.to_string()))?;
        std::fs::write(Self::manifest_path(out), text + "\n")?;
        Ok(())
    }

    /// Writes a CSV with the `# manifest:` line, optional `# ` notes, a
    /// header row and the rows; then its manifest.
    pub fn write_csv(&self, out: &Path, notes: &[String], header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut buf = Vec::new();
        let line = serde_json::to_string(&self.inputs).map_err(|e| CliError::Failed(e.to_string()))?;
        buf.extend_from_slice(format!("# manifest: {line}\n").as_bytes());
        for n in notes {
            buf.extend_from_slice(format!("# {n}\n").as_bytes());
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        std::fs::write(out, buf)?;
        self.write_manifest(out)
    }
}
