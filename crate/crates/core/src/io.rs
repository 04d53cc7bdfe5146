//! Reading and writing teams.
//!
//! CSV: the first record names the variables, each further record is one
//! row. Tokens are ingested as uninterpreted text, so `"4"` from a file
//! never equals a constructed `Int(4)`. JSON: `{"domain": [...], "rows":
//! [[...], ...]}` with integers and strings as the two value forms.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::team::{Assignment, MultiTeam, Team, TeamError, Value, Variable};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Team(#[from] TeamError),
    #[error("missing header row")]
    MissingHeader,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Reads a multi-team from CSV, one row id per data record in file order.
pub fn read_multiteam_csv<R: Read>(reader: R) -> Result<MultiTeam, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(record) => record?,
        None => return Err(IoError::MissingHeader),
    };
    let domain: Vec<Variable> = header
        .iter()
        .map(Variable::new)
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for record in records {
        let record = record?;
        let values: Vec<Value> = record.iter().map(|t| Value::Text(t.to_string())).collect();
        if values.len() != domain.len() {
            return Err(TeamError::RowArity {
                row: rows.len(),
                got: values.len(),
                want: domain.len(),
            }
            .into());
        }
        rows.push(Assignment::new(domain.iter().cloned().zip(values).collect()));
    }
    Ok(MultiTeam::from_rows(domain, rows)?)
}

/// Writes a multi-team as CSV in row-id order.
pub fn write_multiteam_csv<W: Write>(writer: W, team: &MultiTeam) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(team.domain().iter().map(Variable::name))?;
    let domain = team.domain().to_vec();
    for (_, row) in team.rows() {
        let record: Vec<String> = domain
            .iter()
            .map(|v| row.get(v).expect("row is total on the domain").to_string())
            .collect();
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TeamJson {
    domain: Vec<Variable>,
    rows: Vec<Vec<Value>>,
}

fn rows_to_json(domain: &[Variable], rows: Vec<&Assignment>) -> TeamJson {
    TeamJson {
        domain: domain.to_vec(),
        rows: rows
            .into_iter()
            .map(|row| {
                domain
                    .iter()
                    .map(|v| row.get(v).expect("row is total on the domain").clone())
                    .collect()
            })
            .collect(),
    }
}

/// JSON value for a multi-team, rows in id order (multiplicity preserved).
pub fn multiteam_to_json(team: &MultiTeam) -> serde_json::Value {
    let json = rows_to_json(team.domain(), team.rows().map(|(_, r)| r).collect());
    serde_json::to_value(json).expect("team serializes")
}

/// JSON value for a set team, rows in canonical set order.
pub fn team_to_json(team: &Team) -> serde_json::Value {
    let json = rows_to_json(team.domain(), team.rows().collect());
    serde_json::to_value(json).expect("team serializes")
}

/// Reads a multi-team from its JSON form, ids in row-array order.
pub fn multiteam_from_json(value: &serde_json::Value) -> Result<MultiTeam, IoError> {
    let json: TeamJson = serde_json::from_value(value.clone())?;
    let mut rows = Vec::new();
    for (i, values) in json.rows.into_iter().enumerate() {
        if values.len() != json.domain.len() {
            return Err(TeamError::RowArity {
                row: i,
                got: values.len(),
                want: json.domain.len(),
            }
            .into());
        }
        rows.push(Assignment::new(json.domain.iter().cloned().zip(values).collect()));
    }
    Ok(MultiTeam::from_rows(json.domain, rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_preserves_order_and_multiplicity() {
        let input = "x,y\n2,4\n5,25\n2,4\n";
        let team = read_multiteam_csv(input.as_bytes()).unwrap();
        assert_eq!(team.len(), 3);
        let mut out = Vec::new();
        write_multiteam_csv(&mut out, &team).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), input);
    }

    #[test]
    fn csv_header_only_gives_empty_team() {
        let team = read_multiteam_csv("x,y\n".as_bytes()).unwrap();
        assert!(team.is_empty());
        assert_eq!(team.domain().len(), 2);
    }

    #[test]
    fn csv_tokens_stay_textual() {
        let team = read_multiteam_csv("x\n4\n".as_bytes()).unwrap();
        let (_, row) = team.rows().next().unwrap();
        let x = Variable::new("x").unwrap();
        assert_eq!(row.get(&x), Some(&Value::Text("4".into())));
    }

    #[test]
    fn csv_rejects_missing_header_and_duplicate_columns() {
        assert!(matches!(
            read_multiteam_csv("".as_bytes()),
            Err(IoError::MissingHeader)
        ));
        assert!(read_multiteam_csv("x,x\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn json_roundtrip_distinguishes_ints_from_text() {
        let value = serde_json::json!({
            "domain": ["x", "y"],
            "rows": [[0, "0"], [1, "1"]],
        });
        let team = multiteam_from_json(&value).unwrap();
        let x = Variable::new("x").unwrap();
        let y = Variable::new("y").unwrap();
        let (_, first) = team.rows().next().unwrap();
        assert_eq!(first.get(&x), Some(&Value::Int(0)));
        assert_eq!(first.get(&y), Some(&Value::Text("0".into())));
        assert_eq!(multiteam_to_json(&team), value);
    }

    #[test]
    fn json_rejects_ragged_rows() {
        let value = serde_json::json!({"domain": ["x", "y"], "rows": [[1]]});
        assert!(multiteam_from_json(&value).is_err());
    }
}
