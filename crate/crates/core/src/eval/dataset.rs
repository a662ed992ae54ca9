use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::schema::{json_scalar_text, table_from_text_cells, Column, DataType, Table, TableSchema, Value};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("dataset error on line {line}: {reason}")]
pub struct DatasetError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetExample {
    pub id: String,
    pub query: String,
    pub tables: Vec<Table>,
    pub reference: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ColumnSpec {
    Name(String),
    Typed {
        name: String,
        #[serde(rename = "type")]
        data_type: String,
    },
}

#[derive(Deserialize)]
struct RawTable {
    name: String,
    columns: Vec<ColumnSpec>,
    rows: Vec<Vec<serde_json::Value>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawId {
    Text(String),
    Number(i64),
}

#[derive(Deserialize)]
struct RawExample {
    id: RawId,
    query: String,
    tables: Vec<RawTable>,
    reference: String,
}

fn to_table(raw: RawTable) -> Result<Table, String> {
    let width = raw.columns.len();
    if let Some((i, row)) = raw.rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(format!(
            "table `{}` row {} has {} cells, expected {width}",
            raw.name,
            i + 1,
            row.len()
        ));
    }
    let mut cells = Vec::with_capacity(raw.rows.len());
    for (i, row) in raw.rows.iter().enumerate() {
        let mut out = Vec::with_capacity(width);
        for v in row {
            if v.is_array() || v.is_object() {
                return Err(format!(
                    "table `{}` row {} holds a nested value",
                    raw.name,
                    i + 1
                ));
            }
            out.push(json_scalar_text(v));
        }
        cells.push(out);
    }
    let all_typed = raw
        .columns
        .iter()
        .all(|c| matches!(c, ColumnSpec::Typed { .. }));
    let names: Vec<String> = raw
        .columns
        .iter()
        .map(|c| match c {
            ColumnSpec::Name(n) | ColumnSpec::Typed { name: n, .. } => n.clone(),
        })
        .collect();
    let inferred = table_from_text_cells(&raw.name, names, cells).map_err(|e| e.to_string())?;
    if !all_typed || raw.columns.is_empty() {
        return Ok(inferred);
    }
    // Declared types win over inference; cells must fit them.
    let mut columns = Vec::with_capacity(width);
    for (spec, col) in raw.columns.iter().zip(&inferred.schema().columns) {
        let ColumnSpec::Typed { data_type, .. } = spec else {
            unreachable!("all columns typed")
        };
        let t = DataType::parse(data_type)
            .ok_or_else(|| format!("unknown column type `{data_type}`"))?;
        columns.push(Column::new(col.name.clone(), t, col.nullable));
    }
    let schema = TableSchema::new(raw.name.clone(), columns).map_err(|e| e.to_string())?;
    let rows = inferred
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .zip(&schema.columns)
                .map(|(v, c)| convert(v, c.data_type))
                .collect::<Option<Vec<_>>>()
        })
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| format!("table `{}` has cells that do not fit the declared types", raw.name))?;
    Table::new(schema, rows).map_err(|e| e.to_string())
}

fn convert(v: &Value, t: DataType) -> Option<Value> {
    match (v, t) {
        (Value::Null, _) => Some(Value::Null),
        _ if v.data_type() == Some(t) => Some(v.clone()),
        (Value::Integer(i), DataType::Real) => Some(Value::Real(*i as f64)),
        (_, DataType::Text) => Some(Value::Text(v.to_text())),
        _ => None,
    }
}

/// Parses JSONL text: one `{id, query, tables, reference}` object per
/// non-blank line.
pub fn parse_dataset(text: &str) -> Result<Vec<DatasetExample>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| DatasetError {
            line: line_no,
            reason,
        };
        let raw: RawExample = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if raw.reference.trim().is_empty() {
            return Err(err("empty reference".into()));
        }
        if raw.tables.is_empty() {
            return Err(err("no tables".into()));
        }
        let tables = raw
            .tables
            .into_iter()
            .map(to_table)
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        out.push(DatasetExample {
            id: match raw.id {
                RawId::Text(s) => s,
                RawId::Number(n) => n.to_string(),
            },
            query: raw.query,
            tables,
            reference: raw.reference,
        });
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetExample>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError {
        line: 0,
        reason: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_dataset(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_and_multi_table_lines() {
        let text = r#"{"id": 1, "query": "q", "tables": [{"name": "df", "columns": ["a", "b"], "rows": [[1, "x"], [2, null]]}], "reference": "r"}

{"id": "303", "query": "q2", "tables": [{"name": "T", "columns": ["id"], "rows": [[1]]}, {"name": "D", "columns": [{"name": "id", "type": "real"}], "rows": [[1]]}], "reference": "r2"}"#;
        let ds = parse_dataset(text).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds[0].id, "1");
        assert_eq!(ds[0].tables.len(), 1);
        assert_eq!(ds[0].tables[0].rows()[1][1], Value::Null);
        assert_eq!(ds[1].tables.len(), 2);
        assert_eq!(ds[1].tables[1].schema().columns[0].data_type, DataType::Real);
        assert_eq!(ds[1].tables[1].rows()[0][0], Value::Real(1.0));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let missing_ref = r#"{"id": 1, "query": "q", "tables": [{"name": "df", "columns": ["a"], "rows": []}]}"#;
        assert_eq!(parse_dataset(missing_ref).unwrap_err().line, 1);
        let ragged = format!(
            "\n{}",
            r#"{"id": 1, "query": "q", "tables": [{"name": "df", "columns": ["a"], "rows": [[1, 2]]}], "reference": "r"}"#
        );
        let e = parse_dataset(&ragged).unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.reason.contains("expected 1"), "{e}");
        let empty_ref = r#"{"id": 1, "query": "q", "tables": [{"name": "df", "columns": ["a"], "rows": []}], "reference": " "}"#;
        assert!(parse_dataset(empty_ref).is_err());
    }
}
