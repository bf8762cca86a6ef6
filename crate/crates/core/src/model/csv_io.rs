//! CSV ingestion and emission.
//!
//! Longitudinal files carry the header `id,time,y,<covariate...>`; survival
//! files carry `id,entry,exit,event` with event in {0,1}. UTF-8, decimal
//! point, no thousands separators.

use super::{LongitudinalRecord, SurvivalRecord};
use crate::{Error, Result};
use std::path::Path;

fn parse_f64(field: &str, what: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Data(format!("line {line}: cannot parse {what} from {field:?}")))
}

pub fn read_longitudinal_csv(path: &Path) -> Result<(Vec<String>, Vec<LongitudinalRecord>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 3 || cols[0] != "id" || cols[1] != "time" || cols[2] != "y" {
        return Err(Error::Data(format!(
            "{}: longitudinal header must start with id,time,y",
            path.display()
        )));
    }
    let names: Vec<String> = cols[3..].iter().map(|s| s.to_string()).collect();
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let covariates = row
            .iter()
            .skip(3)
            .map(|f| parse_f64(f, "covariate", line))
            .collect::<Result<Vec<f64>>>()?;
        records.push(LongitudinalRecord {
            subject_id: row.get(0).unwrap_or_default().to_string(),
            time: parse_f64(row.get(1).unwrap_or_default(), "time", line)?,
            response: parse_f64(row.get(2).unwrap_or_default(), "y", line)?,
            covariates,
        });
    }
    Ok((names, records))
}

pub fn read_survival_csv(path: &Path) -> Result<Vec<SurvivalRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != ["id", "entry", "exit", "event"] {
        return Err(Error::Data(format!(
            "{}: survival header must be id,entry,exit,event",
            path.display()
        )));
    }
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let event = match row.get(3).map(str::trim) {
            Some("0") => false,
            Some("1") => true,
            other => {
                return Err(Error::Data(format!(
                    "line {line}: event must be 0 or 1, got {other:?}"
                )))
            }
        };
        records.push(SurvivalRecord {
            subject_id: row.get(0).unwrap_or_default().to_string(),
            entry: parse_f64(row.get(1).unwrap_or_default(), "entry", line)?,
            exit: parse_f64(row.get(2).unwrap_or_default(), "exit", line)?,
            event,
        });
    }
    Ok(records)
}

pub fn write_longitudinal_csv(
    path: &Path,
    names: &[String],
    records: &[LongitudinalRecord],
) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string(), "time".into(), "y".into()];
    header.extend(names.iter().cloned());
    wtr.write_record(&header)?;
    for r in records {
        let mut row = vec![r.subject_id.clone(), format!("{:?}", r.time), format!("{:?}", r.response)];
        row.extend(r.covariates.iter().map(|v| format!("{v:?}")));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_survival_csv(path: &Path, records: &[SurvivalRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["id", "entry", "exit", "event"])?;
    for r in records {
        wtr.write_record([
            r.subject_id.as_str(),
            &format!("{:?}", r.entry),
            &format!("{:?}", r.exit),
            if r.event { "1" } else { "0" },
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
