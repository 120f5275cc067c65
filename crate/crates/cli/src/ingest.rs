//! CSV ingestion into a [`Dataset`].

use std::path::Path;

use sfbreak::{Dataset, Observation};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Reads `output_column` and `input_columns` from a headed, comma-separated
/// file. The design gets a leading constant; with `log_transform` every
/// value enters in logs.
pub fn ingest_csv(path: &Path, config: &RunConfig) -> Result<Dataset> {
    let data_err = |message: String| CliError::Data { path: path.to_path_buf(), message };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| data_err(e.to_string()))?.clone();

    let mut wanted = vec![config.output_column.as_str()];
    wanted.extend(config.input_columns.iter().map(String::as_str));
    let positions = wanted
        .iter()
        .map(|name| {
            headers.iter().position(|h| h == *name).ok_or_else(|| {
                let available: Vec<&str> = headers.iter().collect();
                data_err(format!("missing column '{name}' (columns: {})", available.join(", ")))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut observations = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Row 1 is the header line.
        let row = i + 2;
        let record = record.map_err(|e| data_err(format!("row {row}: {e}")))?;
        let mut values = Vec::with_capacity(positions.len());
        for (&pos, name) in positions.iter().zip(&wanted) {
            let cell = record.get(pos).unwrap_or("");
            if cell.is_empty() {
                return Err(data_err(format!("blank cell at row {row}, column '{name}'")));
            }
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| data_err(format!("non-numeric cell '{cell}' at row {row}, column '{name}'")))?;
            let v = if config.log_transform {
                if v <= 0.0 {
                    return Err(data_err(format!(
                        "nonpositive value {v} at row {row}, column '{name}' cannot be log-transformed"
                    )));
                }
                v.ln()
            } else {
                v
            };
            values.push(v);
        }
        let y = values[0];
        let mut x = Vec::with_capacity(values.len());
        x.push(1.0);
        x.extend_from_slice(&values[1..]);
        observations.push(Observation::new(y, x)?);
    }
    if observations.is_empty() {
        return Err(data_err("no data rows".into()));
    }

    let prefix = if config.log_transform { "ln_" } else { "" };
    let mut names = vec!["const".to_string()];
    names.extend(config.input_columns.iter().map(|c| format!("{prefix}{c}")));
    Ok(Dataset::new(observations, names)?)
}
