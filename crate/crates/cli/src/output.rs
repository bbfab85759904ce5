//! Tables, their CSV or JSON files, and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, RunConfig};
use crate::CliError;

/// Column-oriented numeric data with `# key = value` header lines.
#[derive(Debug, Clone)]
pub struct Table {
    name: String,
    header: Vec<(String, String)>,
    columns: Vec<String>,
    integer: Vec<bool>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: Vec<String>) -> Self {
        let integer = vec![false; columns.len()];
        Table {
            name: name.into(),
            header: Vec::new(),
            columns,
            integer,
            rows: Vec::new(),
        }
    }

    /// Grid variable in the first column and one column per function.
    pub fn sampled(name: &str, variable: &str, prefix: &str, points: &[f64], functions: &[Vec<f64>]) -> Self {
        let mut columns = vec![variable.to_string()];
        columns.extend((1..=functions.len()).map(|i| format!("{prefix}_{i}")));
        let mut t = Table::new(name, columns);
        for (r, x) in points.iter().enumerate() {
            let mut row = vec![*x];
            row.extend(functions.iter().map(|f| f[r]));
            t.rows.push(row);
        }
        t
    }

    /// Marks columns that hold integers, printed without exponent.
    pub fn integer_columns(mut self, columns: &[usize]) -> Self {
        columns.iter().for_each(|&c| self.integer[c] = true);
        self
    }

    pub fn note(mut self, key: &str, value: impl ToString) -> Self {
        self.header.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn csv(&self, preamble: &[(String, String)]) -> String {
        let mut s = String::new();
        for (k, v) in preamble.iter().chain(&self.header) {
            let _ = writeln!(s, "# {k} = {v}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    if self.integer[c] {
                        format!("{}", *v as i64)
                    } else {
                        format!("{v:.11e}")
                    }
                })
                .collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    fn json(&self, preamble: &[(String, String)]) -> Value {
        let header: serde_json::Map<String, Value> = preamble
            .iter()
            .chain(&self.header)
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        json!({ "header": header, "columns": self.columns, "rows": self.rows })
    }
}

#[derive(Debug, Serialize)]
struct FileEntry {
    name: String,
    bytes: usize,
    sha256: String,
}

/// Writes the files of one command into the output directory and keeps
/// track of them for the manifest.
pub struct Output {
    dir: PathBuf,
    format: Format,
    command: String,
    preamble: Vec<(String, String)>,
    files: Vec<FileEntry>,
    started: Instant,
}

impl Output {
    pub fn create(cfg: &RunConfig, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(&cfg.out)?;
        let mut preamble = vec![
            ("tool".to_string(), format!("qmem {}", env!("CARGO_PKG_VERSION"))),
            ("command".to_string(), command.to_string()),
        ];
        preamble.extend(describe(cfg));
        Ok(Output {
            dir: cfg.out.clone(),
            format: cfg.format,
            command: command.into(),
            preamble,
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn table(&mut self, table: &Table) -> Result<(), CliError> {
        match self.format {
            Format::Csv => {
                let text = table.csv(&self.preamble);
                self.write(&format!("{}.csv", table.name), text.into_bytes())
            }
            Format::Json => {
                let text = serde_json::to_string_pretty(&table.json(&self.preamble)).expect("plain data");
                self.write(&format!("{}.json", table.name), (text + "\n").into_bytes())
            }
        }
    }

    /// A JSON document written regardless of the table format.
    pub fn document<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("plain data");
        self.write(&format!("{name}.json"), (text + "\n").into_bytes())
    }

    fn write(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), CliError> {
        fs::write(self.dir.join(name), &bytes)?;
        self.files.push(FileEntry {
            name: name.into(),
            bytes: bytes.len(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish<T: Serialize>(self, cfg: &RunConfig, extra: &T) -> Result<PathBuf, CliError> {
        let manifest = json!({
            "tool": "qmem",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": cfg,
            "details": extra,
            "wall_time_s": self.started.elapsed().as_secs_f64(),
            "files": self.files,
        });
        let path = self.dir.join("manifest.json");
        fs::write(
            &path,
            serde_json::to_string_pretty(&manifest).expect("plain data") + "\n",
        )?;
        Ok(path)
    }
}

fn describe(cfg: &RunConfig) -> Vec<(String, String)> {
    let mut out = vec![
        ("length".to_string(), cfg.length.to_string()),
        ("write_duration".to_string(), cfg.write_duration.to_string()),
        ("read_duration".to_string(), cfg.read_duration.to_string()),
        ("nz".to_string(), cfg.nz.to_string()),
        ("nt".to_string(), cfg.nt.to_string()),
        ("inner_n".to_string(), cfg.inner_n.to_string()),
        ("modes".to_string(), cfg.modes.to_string()),
    ];
    let storage = serde_json::to_value(cfg.storage).expect("plain data");
    if let Value::Object(map) = storage {
        for (k, v) in map {
            let v = match v {
                Value::String(s) => s,
                other => other.to_string(),
            };
            out.push((if k == "model" { "storage".into() } else { k }, v));
        }
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}
