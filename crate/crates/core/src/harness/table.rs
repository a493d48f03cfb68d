//! Column tables written as CSV with a `#`-prefixed provenance header.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::config::RunConfig;

const CONFIG_PREFIX: &str = "# config | ";

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    provenance: Vec<(String, String)>,
    config_lines: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl ResultTable {
    /// Empty table stamped with the code version, command, seed, config hash and
    /// the canonical config itself.
    pub fn new(command: &str, config: &RunConfig, columns: &[&str]) -> Result<Self> {
        let canonical = config.canonical_toml()?;
        Ok(Self {
            provenance: vec![
                ("qprobe".into(), env!("CARGO_PKG_VERSION").into()),
                ("command".into(), command.into()),
                ("seed".into(), config.seed.to_string()),
                ("config_sha256".into(), config.config_hash()?),
            ],
            config_lines: canonical.lines().map(str::to_owned).collect(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        })
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::param(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn provenance(&self, key: &str) -> Option<&str> {
        self.provenance
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// The run configuration embedded in the header.
    pub fn embedded_config(&self) -> Result<RunConfig> {
        RunConfig::from_toml_str(&(self.config_lines.join("\n") + "\n"))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.provenance {
            let _ = writeln!(out, "# {key}: {value}");
        }
        for line in &self.config_lines {
            let _ = writeln!(out, "{CONFIG_PREFIX}{line}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Config(format!("malformed table: {msg}"));
        let mut provenance = Vec::new();
        let mut config_lines = Vec::new();
        let mut lines = text.lines();
        let header = loop {
            let line = lines.next().ok_or_else(|| bad("missing header row".into()))?;
            if let Some(cfg) = line.strip_prefix(CONFIG_PREFIX) {
                config_lines.push(cfg.to_owned());
            } else if let Some(meta) = line.strip_prefix("# ") {
                let (k, v) = meta
                    .split_once(": ")
                    .ok_or_else(|| bad(format!("provenance line {line:?}")))?;
                provenance.push((k.to_owned(), v.to_owned()));
            } else {
                break line;
            }
        };
        let columns: Vec<String> = header.split(',').map(str::to_owned).collect();
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let row = line
                .split(',')
                .map(|cell| cell.parse::<f64>().map_err(|e| bad(format!("{cell:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != columns.len() {
                return Err(bad(format!("row {line:?} does not match the header")));
            }
            rows.push(row);
        }
        Ok(Self {
            provenance,
            config_lines,
            columns,
            rows,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Shortest round-trip decimal; scientific notation outside `[1e-5, 1e16)`.
pub fn format_value(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if !v.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}
