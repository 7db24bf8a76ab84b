//! Observation datasets and their comma-separated file form.
//!
//! File layout: optional `# key: value` provenance lines, a header row
//! naming every search-space variable plus an `objective` column, then one
//! row per evaluated configuration.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search_space::{Configuration, Domain, SearchSpace, Value};

pub const OBJECTIVE_COLUMN: &str = "objective";

/// `(input, output)` pairs observed on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationDataset {
    pub task_id: String,
    pub inputs: Vec<Configuration>,
    pub outputs: Vec<f64>,
}

impl ObservationDataset {
    pub fn new(task_id: impl Into<String>) -> Self {
        ObservationDataset {
            task_id: task_id.into(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn from_pairs(task_id: impl Into<String>, inputs: Vec<Configuration>, outputs: Vec<f64>) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::Config(format!(
                "{} inputs but {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        Ok(ObservationDataset {
            task_id: task_id.into(),
            inputs,
            outputs,
        })
    }

    pub fn push(&mut self, x: Configuration, y: f64) {
        self.inputs.push(x);
        self.outputs.push(y);
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn encoded(&self, space: &SearchSpace) -> Result<Vec<Vec<f64>>> {
        self.inputs.iter().map(|x| space.encode(x)).collect()
    }

    pub fn min_output(&self) -> Option<f64> {
        self.outputs.iter().copied().reduce(f64::min)
    }

    pub fn max_output(&self) -> Option<f64> {
        self.outputs.iter().copied().reduce(f64::max)
    }

    pub fn write_csv<W: Write>(&self, space: &SearchSpace, provenance: &[(String, String)], mut out: W) -> Result<()> {
        for (k, v) in provenance {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = space.variables().iter().map(|v| v.name.as_str()).collect();
        header.push(OBJECTIVE_COLUMN);
        w.write_record(&header).map_err(csv_io)?;
        for (x, y) in self.inputs.iter().zip(&self.outputs) {
            let mut row: Vec<String> = x.0.iter().map(ToString::to_string).collect();
            row.push(y.to_string());
            w.write_record(&row).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, space: &SearchSpace, provenance: &[(String, String)], path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(space, provenance, &mut buf)?;
        crate::io::write_atomic(path, &buf)
    }

    /// Parses a dataset file. `origin` names the source in error messages.
    pub fn read_csv<R: Read>(
        space: &SearchSpace,
        task_id: &str,
        origin: &str,
        mut input: R,
    ) -> Result<(Self, Vec<(String, String)>)> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut provenance = Vec::new();
        let mut body_start = 0;
        let mut skipped = 0;
        for line in text.split_inclusive('\n') {
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once(':') {
                    provenance.push((k.trim().to_string(), v.trim().to_string()));
                }
                body_start += line.len();
                skipped += 1;
            } else {
                break;
            }
        }
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text[body_start..].as_bytes());
        let header_line = skipped + 1;
        let headers = reader
            .headers()
            .map_err(|e| parse_err(header_line, e.to_string()))?
            .clone();
        if headers.is_empty() {
            return Err(parse_err(header_line, "empty file".into()));
        }
        let mut columns = Vec::with_capacity(space.dim());
        for var in space.variables() {
            let idx = headers
                .iter()
                .position(|h| h == var.name)
                .ok_or_else(|| parse_err(header_line, format!("missing column `{}`", var.name)))?;
            columns.push(idx);
        }
        let objective = headers
            .iter()
            .position(|h| h == OBJECTIVE_COLUMN)
            .ok_or_else(|| parse_err(header_line, format!("missing `{OBJECTIVE_COLUMN}` column")))?;

        let mut data = ObservationDataset::new(task_id);
        for (row_idx, record) in reader.records().enumerate() {
            let line = header_line + 1 + row_idx;
            let record = record.map_err(|e| parse_err(line, e.to_string()))?;
            let mut values = Vec::with_capacity(space.dim());
            for (var, &col) in space.variables().iter().zip(&columns) {
                let cell = record
                    .get(col)
                    .ok_or_else(|| parse_err(line, format!("missing value for `{}`", var.name)))?;
                let value = match &var.domain {
                    Domain::Continuous { .. } => cell
                        .parse::<f64>()
                        .map(Value::Real)
                        .map_err(|e| parse_err(line, format!("`{}`: {e}", var.name)))?,
                    Domain::Integer { .. } => match cell.parse::<i64>() {
                        Ok(v) => Value::Integer(v),
                        Err(_) => cell
                            .parse::<f64>()
                            .ok()
                            .filter(|v| v.fract() == 0.0)
                            .map(|v| Value::Integer(v as i64))
                            .ok_or_else(|| parse_err(line, format!("`{}`: `{cell}` is not an integer", var.name)))?,
                    },
                    Domain::Categorical { .. } => Value::Category(cell.to_string()),
                };
                values.push(value);
            }
            let config = space
                .normalize(&Configuration(values))
                .map_err(|e| parse_err(line, e.to_string()))?;
            let y: f64 = record
                .get(objective)
                .ok_or_else(|| parse_err(line, "missing objective".into()))?
                .parse()
                .map_err(|e| parse_err(line, format!("objective: {e}")))?;
            if !y.is_finite() {
                return Err(parse_err(line, "objective is not finite".into()));
            }
            data.push(config, y);
        }
        Ok((data, provenance))
    }

    pub fn load_csv(space: &SearchSpace, task_id: &str, path: &Path) -> Result<(Self, Vec<(String, String)>)> {
        let file = std::fs::File::open(path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?;
        Self::read_csv(space, task_id, &path.display().to_string(), file)
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
