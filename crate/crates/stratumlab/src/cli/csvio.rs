//! CSV ingestion and emission.
//!
//! Observed data: required columns `id`, `z` (0/1), `s` (0/1/empty), and
//! either `y` or the pair `time`,`event`; every remaining column is a
//! covariate. Column types are inferred: all-numeric columns are continuous,
//! anything else categorical. A `y` column whose values are all 0/1 is
//! binary. Errors carry the offending data row number (1-based).

use std::collections::BTreeSet;
use std::path::Path;

use crate::core::{
    Arm, CovariateSchema, CovariateValue, CovariateVector, ObservedRecord, Outcome, OutcomeKind,
    PotentialRecord,
};
use crate::error::{Error, Result};

/// Ingested dataset: records, inferred outcome kind and covariate schema,
/// plus non-fatal warnings.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<ObservedRecord>,
    pub outcome_kind: OutcomeKind,
    pub schema: CovariateSchema,
    pub warnings: Vec<String>,
}

const RESERVED: [&str; 5] = ["id", "z", "s", "y", "time"];

fn csv_error(row: usize, message: impl Into<String>) -> Error {
    Error::Csv {
        row,
        message: message.into(),
    }
}

/// Reads observed records from a headered CSV file.
pub fn ingest_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::invalid(format!("cannot read header: {e}")))?
        .iter()
        .map(|h| h.to_string())
        .collect();

    let index_of = |name: &str| headers.iter().position(|h| h == name);
    let id_idx = index_of("id").ok_or_else(|| Error::invalid("missing required column 'id'"))?;
    let z_idx = index_of("z").ok_or_else(|| Error::invalid("missing required column 'z'"))?;
    let s_idx = index_of("s").ok_or_else(|| Error::invalid("missing required column 's'"))?;
    let y_idx = index_of("y");
    let time_idx = index_of("time");
    let event_idx = index_of("event");
    let outcome_columns = match (y_idx, time_idx, event_idx) {
        (Some(y), None, None) => OutcomeColumns::Scalar(y),
        (None, Some(t), Some(e)) => OutcomeColumns::TimeEvent(t, e),
        _ => {
            return Err(Error::invalid(
                "outcome columns must be either 'y' or the pair 'time','event'",
            ))
        }
    };

    let mut covariate_columns: Vec<(usize, String)> = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        let is_reserved = RESERVED.contains(&h.as_str()) || h == "event";
        if !is_reserved {
            covariate_columns.push((i, h.clone()));
        }
    }

    let mut raw_rows: Vec<csv::StringRecord> = Vec::new();
    for (row_number, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| csv_error(row_number + 1, format!("malformed CSV row: {e}")))?;
        raw_rows.push(record);
    }

    let mut warnings = Vec::new();
    if raw_rows.is_empty() {
        warnings.push("the data file has no data rows".to_string());
        return Ok(Dataset {
            records: Vec::new(),
            outcome_kind: match outcome_columns {
                OutcomeColumns::Scalar(_) => OutcomeKind::Continuous,
                OutcomeColumns::TimeEvent(..) => OutcomeKind::TimeToEvent,
            },
            schema: CovariateSchema { columns: Vec::new() },
            warnings,
        });
    }

    // Column type inference over all rows.
    let mut covariate_is_numeric: Vec<bool> = vec![true; covariate_columns.len()];
    for record in &raw_rows {
        for (slot, (idx, _)) in covariate_is_numeric.iter_mut().zip(&covariate_columns) {
            let cell = record.get(*idx).unwrap_or("");
            if !cell.is_empty() && cell.parse::<f64>().is_err() {
                *slot = false;
            }
        }
    }
    let scalar_is_binary = match outcome_columns {
        OutcomeColumns::Scalar(y) => raw_rows
            .iter()
            .all(|r| matches!(r.get(y), Some("0") | Some("1"))),
        OutcomeColumns::TimeEvent(..) => false,
    };

    let mut records = Vec::with_capacity(raw_rows.len());
    let mut seen_ids = BTreeSet::new();
    for (i, record) in raw_rows.iter().enumerate() {
        let row = i + 1;
        let get = |idx: usize| record.get(idx).unwrap_or("");

        let id = get(id_idx).to_string();
        if id.is_empty() {
            return Err(csv_error(row, "empty id"));
        }
        if !seen_ids.insert(id.clone()) {
            return Err(csv_error(row, format!("duplicate id '{id}'")));
        }

        let z = match get(z_idx) {
            "0" => Arm::Control,
            "1" => Arm::Test,
            other => return Err(csv_error(row, format!("z must be 0 or 1, got '{other}'"))),
        };

        let s = match get(s_idx) {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            other => {
                return Err(csv_error(row, format!("s must be 0, 1, or empty, got '{other}'")))
            }
        };

        let y = match outcome_columns {
            OutcomeColumns::Scalar(y_idx) => {
                let raw = get(y_idx);
                let value: f64 = raw
                    .parse()
                    .map_err(|_| csv_error(row, format!("y must be numeric, got '{raw}'")))?;
                if scalar_is_binary {
                    Outcome::binary(value == 1.0)
                } else {
                    Outcome::continuous(value).map_err(|e| csv_error(row, e.to_string()))?
                }
            }
            OutcomeColumns::TimeEvent(t_idx, e_idx) => {
                let raw_time = get(t_idx);
                let time: f64 = raw_time.parse().map_err(|_| {
                    csv_error(row, format!("time must be numeric, got '{raw_time}'"))
                })?;
                if time < 0.0 {
                    return Err(csv_error(row, format!("negative time {time}")));
                }
                let event = match get(e_idx) {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(csv_error(row, format!("event must be 0 or 1, got '{other}'")))
                    }
                };
                Outcome::time_to_event(time, event).map_err(|e| csv_error(row, e.to_string()))?
            }
        };

        let mut x = CovariateVector::empty();
        for ((idx, name), is_numeric) in covariate_columns.iter().zip(&covariate_is_numeric) {
            let cell = get(*idx);
            if cell.is_empty() {
                return Err(csv_error(row, format!("covariate '{name}' is empty")));
            }
            let value = if *is_numeric {
                CovariateValue::Continuous(cell.parse().unwrap())
            } else {
                CovariateValue::Categorical(cell.to_string())
            };
            x.push(name.clone(), value)
                .map_err(|e| csv_error(row, e.to_string()))?;
        }

        records.push(ObservedRecord { id, z, s, y, x });
    }

    let outcome_kind = records[0].y.kind();
    let schema = CovariateSchema::infer(records.iter().map(|r| &r.x))?;
    Ok(Dataset {
        records,
        outcome_kind,
        schema,
        warnings,
    })
}

#[derive(Clone, Copy)]
enum OutcomeColumns {
    Scalar(usize),
    TimeEvent(usize, usize),
}

fn format_value(v: f64) -> String {
    format!("{v}")
}

fn covariate_cell(value: &CovariateValue) -> String {
    match value {
        CovariateValue::Continuous(v) => format_value(*v),
        CovariateValue::Categorical(level) => level.clone(),
    }
}

/// Writes observed records; the inverse of [`ingest_csv`] up to column-type
/// inference. Floats round-trip exactly through their shortest decimal form.
pub fn write_observed_csv(path: &Path, records: &[ObservedRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))?;

    let covariate_names: Vec<String> = records
        .first()
        .map(|r| r.x.names().map(|n| n.to_string()).collect())
        .unwrap_or_default();
    let is_tte = records
        .first()
        .map(|r| r.y.kind() == OutcomeKind::TimeToEvent)
        .unwrap_or(false);

    let mut header = vec!["id".to_string(), "z".to_string(), "s".to_string()];
    if is_tte {
        header.push("time".to_string());
        header.push("event".to_string());
    } else {
        header.push("y".to_string());
    }
    header.extend(covariate_names.iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| Error::invalid(e.to_string()))?;

    for r in records {
        let mut row = vec![
            r.id.clone(),
            r.z.as_binary().to_string(),
            match r.s {
                None => String::new(),
                Some(s) => u8::from(s).to_string(),
            },
        ];
        match r.y {
            Outcome::Binary { value } => row.push(u8::from(value).to_string()),
            Outcome::Continuous { value } => row.push(format_value(value)),
            Outcome::TimeToEvent { time, event } => {
                row.push(format_value(time));
                row.push(u8::from(event).to_string());
            }
        }
        for name in &covariate_names {
            let value = r
                .x
                .get(name)
                .ok_or_else(|| Error::invalid(format!("record '{}' missing '{name}'", r.id)))?;
            row.push(covariate_cell(value));
        }
        writer
            .write_record(&row)
            .map_err(|e| Error::invalid(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes the potential-outcomes sidecar produced by `simulate`. Written for
/// audit only: `analyze` never reads it.
pub fn write_potential_csv(path: &Path, records: &[PotentialRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))?;

    let covariate_names: Vec<String> = records
        .first()
        .map(|r| r.x.names().map(|n| n.to_string()).collect())
        .unwrap_or_default();
    let is_tte = records.first().map(|r| r.true_event_times.is_some()).unwrap_or(false);

    let mut header: Vec<String> = ["id", "s0", "s1"].iter().map(|s| s.to_string()).collect();
    if is_tte {
        header.extend(
            ["y0_time", "y0_event", "y1_time", "y1_event", "t0_true", "t1_true"]
                .iter()
                .map(|s| s.to_string()),
        );
    } else {
        header.push("y0".to_string());
        header.push("y1".to_string());
    }
    header.push("stratum".to_string());
    header.extend(covariate_names.iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| Error::invalid(e.to_string()))?;

    for r in records {
        let mut row = vec![
            r.id.clone(),
            u8::from(r.s0).to_string(),
            u8::from(r.s1).to_string(),
        ];
        match (r.y0, r.y1) {
            (
                Outcome::TimeToEvent { time: t0, event: e0 },
                Outcome::TimeToEvent { time: t1, event: e1 },
            ) => {
                let (true0, true1) = r.true_event_times.unwrap_or((f64::NAN, f64::NAN));
                row.push(format_value(t0));
                row.push(u8::from(e0).to_string());
                row.push(format_value(t1));
                row.push(u8::from(e1).to_string());
                row.push(format_value(true0));
                row.push(format_value(true1));
            }
            (y0, y1) => {
                row.push(format_value(y0.numeric_value()?));
                row.push(format_value(y1.numeric_value()?));
            }
        }
        row.push(r.stratum().name().to_string());
        for name in &covariate_names {
            let value = r
                .x
                .get(name)
                .ok_or_else(|| Error::invalid(format!("record '{}' missing '{name}'", r.id)))?;
            row.push(covariate_cell(value));
        }
        writer
            .write_record(&row)
            .map_err(|e| Error::invalid(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}
