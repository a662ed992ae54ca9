//! Table ingestion, type inference, schema rendering and fingerprinting.
//!
//! A [`Table`] pairs a [`TableSchema`] with typed rows. Only the schema ever
//! leaves this module on its way to a language model: [`render_schema_text`]
//! prints names and types, and [`schema_fingerprint`] digests the same
//! metadata into the key under which offline templates are reused.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("ingest error at {position}: {reason}")]
pub struct IngestError {
    pub position: String,
    pub reason: String,
}

impl IngestError {
    fn new(position: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            position: position.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("schema `{0}` has no columns")]
    NoColumns(String),
    #[error("schema `{table}` has an empty column name")]
    EmptyColumnName { table: String },
    #[error("schema `{table}` repeats column `{column}`")]
    DuplicateColumn { table: String, column: String },
    #[error("row {row} has {got} cells, expected {expected}")]
    RowArity { row: usize, expected: usize, got: usize },
    #[error("row {row}, column `{column}`: {reason}")]
    Cell {
        row: usize,
        column: String,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Integer,
    Real,
    Text,
    Boolean,
    Date,
}

impl DataType {
    pub fn as_str(self) -> &'static str {
        match self {
            DataType::Integer => "integer",
            DataType::Real => "real",
            DataType::Text => "text",
            DataType::Boolean => "boolean",
            DataType::Date => "date",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "integer" | "int" | "bigint" => Some(DataType::Integer),
            "real" | "float" | "double" | "numeric" => Some(DataType::Real),
            "text" | "string" | "varchar" => Some(DataType::Text),
            "boolean" | "bool" => Some(DataType::Boolean),
            "date" => Some(DataType::Date),
            _ => None,
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub data_type: DataType,
    pub nullable: bool,
}

impl Column {
    pub fn new(name: impl Into<String>, data_type: DataType, nullable: bool) -> Self {
        Self {
            name: name.into(),
            data_type,
            nullable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TableSchema {
    pub table_name: String,
    pub columns: Vec<Column>,
}

impl TableSchema {
    pub fn new(table_name: impl Into<String>, columns: Vec<Column>) -> Result<Self, SchemaError> {
        let schema = Self {
            table_name: table_name.into(),
            columns,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.columns.is_empty() {
            return Err(SchemaError::NoColumns(self.table_name.clone()));
        }
        let mut seen = HashSet::new();
        for column in &self.columns {
            if column.name.is_empty() {
                return Err(SchemaError::EmptyColumnName {
                    table: self.table_name.clone(),
                });
            }
            if !seen.insert(column.name.as_str()) {
                return Err(SchemaError::DuplicateColumn {
                    table: self.table_name.clone(),
                    column: column.name.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

/// A single typed cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    Boolean(bool),
    Date(NaiveDate),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn data_type(&self) -> Option<DataType> {
        match self {
            Value::Null => None,
            Value::Integer(_) => Some(DataType::Integer),
            Value::Real(_) => Some(DataType::Real),
            Value::Text(_) => Some(DataType::Text),
            Value::Boolean(_) => Some(DataType::Boolean),
            Value::Date(_) => Some(DataType::Date),
        }
    }

    /// Text form used by CSV serialization. Reals always carry a fractional
    /// part so that they re-infer as `real`.
    pub fn to_text(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Integer(i) => i.to_string(),
            Value::Real(r) => format_real(*r),
            Value::Text(s) => s.clone(),
            Value::Boolean(b) => b.to_string(),
            Value::Date(d) => d.format("%Y-%m-%d").to_string(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Null => serde_json::Value::Null,
            Value::Integer(i) => (*i).into(),
            Value::Real(r) => serde_json::Number::from_f64(*r)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Value::Text(s) => s.clone().into(),
            Value::Boolean(b) => (*b).into(),
            Value::Date(d) => d.format("%Y-%m-%d").to_string().into(),
        }
    }
}

/// Shortest round-trip decimal form, always with a `.` or exponent.
pub fn format_real(r: f64) -> String {
    if r.is_finite() {
        format!("{r:?}")
    } else if r.is_nan() {
        "nan".to_string()
    } else if r > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    schema: TableSchema,
    rows: Vec<Vec<Value>>,
}

impl Table {
    /// Builds a table, checking arity, nullability and cell types.
    pub fn new(schema: TableSchema, rows: Vec<Vec<Value>>) -> Result<Self, SchemaError> {
        schema.validate()?;
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.columns.len() {
                return Err(SchemaError::RowArity {
                    row: r,
                    expected: schema.columns.len(),
                    got: row.len(),
                });
            }
            for (cell, column) in row.iter().zip(&schema.columns) {
                match cell.data_type() {
                    None if !column.nullable => {
                        return Err(SchemaError::Cell {
                            row: r,
                            column: column.name.clone(),
                            reason: "null in non-nullable column".into(),
                        })
                    }
                    Some(t) if t != column.data_type => {
                        return Err(SchemaError::Cell {
                            row: r,
                            column: column.name.clone(),
                            reason: format!("expected {}, found {}", column.data_type, t),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn name(&self) -> &str {
        &self.schema.table_name
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Same schema, different rows.
    pub fn with_rows(&self, rows: Vec<Vec<Value>>) -> Result<Self, SchemaError> {
        Table::new(self.schema.clone(), rows)
    }

    /// Writes the table as RFC-4180 CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer
            .write_record(self.schema.columns.iter().map(|c| c.name.as_str()))
            .expect("in-memory write");
        for row in &self.rows {
            writer
                .write_record(row.iter().map(Value::to_text))
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    /// Writes the table as a JSON array of flat records.
    pub fn to_json_records(&self) -> String {
        let records: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut object = serde_json::Map::new();
                for (cell, column) in row.iter().zip(&self.schema.columns) {
                    object.insert(column.name.clone(), cell.to_json());
                }
                serde_json::Value::Object(object)
            })
            .collect();
        serde_json::to_string(&records).expect("json values serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    CsvWithHeader,
    /// A JSON array of flat objects, or one object per line.
    JsonRecords,
}

impl TableFormat {
    pub fn from_path(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(TableFormat::CsvWithHeader),
            "json" | "jsonl" | "ndjson" => Some(TableFormat::JsonRecords),
            _ => None,
        }
    }
}

pub fn load_table(
    mut source: impl Read,
    format: TableFormat,
    table_name: &str,
) -> Result<Table, IngestError> {
    let mut buf = String::new();
    source
        .read_to_string(&mut buf)
        .map_err(|e| IngestError::new("input", e.to_string()))?;
    let (names, cells) = match format {
        TableFormat::CsvWithHeader => read_csv(&buf)?,
        TableFormat::JsonRecords => read_json_records(&buf)?,
    };
    table_from_text_cells(table_name, names, cells)
}

/// Builds a table from untyped cells, inferring each column's type over all
/// of its values. `None` cells are nulls.
pub fn table_from_text_cells(
    table_name: &str,
    names: Vec<String>,
    cells: Vec<Vec<Option<String>>>,
) -> Result<Table, IngestError> {
    if names.is_empty() {
        return Err(IngestError::new("header", "no columns"));
    }
    let mut columns = Vec::with_capacity(names.len());
    for (i, name) in names.into_iter().enumerate() {
        let values: Vec<Option<&str>> = cells.iter().map(|row| row[i].as_deref()).collect();
        let data_type = infer_column_type(&values);
        let nullable = values.iter().any(Option::is_none);
        columns.push(Column::new(name, data_type, nullable));
    }
    let schema = TableSchema::new(table_name, columns)
        .map_err(|e| IngestError::new("header", e.to_string()))?;
    let mut rows = Vec::with_capacity(cells.len());
    for (r, raw) in cells.into_iter().enumerate() {
        let row = raw
            .into_iter()
            .zip(&schema.columns)
            .map(|(cell, column)| match cell {
                None => Ok(Value::Null),
                Some(text) => coerce(&text, column.data_type).ok_or_else(|| {
                    IngestError::new(
                        format!("row {}", r + 1),
                        format!("cannot read `{}` as {}", column.name, column.data_type),
                    )
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Table::new(schema, rows).map_err(|e| IngestError::new("table", e.to_string()))
}

/// Header names and untyped cells.
type RawCells = (Vec<String>, Vec<Vec<Option<String>>>);

fn read_csv(buf: &str) -> Result<RawCells, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(buf.as_bytes());
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error("header", e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut cells = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(&format!("record {}", i + 1), e))?;
        cells.push(
            record
                .iter()
                .map(|c| (!c.is_empty()).then(|| c.to_string()))
                .collect(),
        );
    }
    Ok((names, cells))
}

fn csv_error(fallback: &str, err: csv::Error) -> IngestError {
    let position = err
        .position()
        .map(|p| format!("line {}", p.line()))
        .unwrap_or_else(|| fallback.to_string());
    let reason = match err.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("ragged row: expected {expected_len} fields, found {len}"),
        _ => err.to_string(),
    };
    IngestError::new(position, reason)
}

fn read_json_records(buf: &str) -> Result<RawCells, IngestError> {
    let trimmed = buf.trim_start();
    let records: Vec<(String, serde_json::Value)> = if trimmed.starts_with('[') {
        let value: serde_json::Value = serde_json::from_str(buf)
            .map_err(|e| IngestError::new(format!("line {}", e.line()), e.to_string()))?;
        match value {
            serde_json::Value::Array(items) => items
                .into_iter()
                .enumerate()
                .map(|(i, v)| (format!("record {}", i + 1), v))
                .collect(),
            _ => unreachable!("starts with `[`"),
        }
    } else {
        buf.lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(i, line)| {
                serde_json::from_str(line)
                    .map(|v| (format!("line {}", i + 1), v))
                    .map_err(|e| IngestError::new(format!("line {}", i + 1), e.to_string()))
            })
            .collect::<Result<_, _>>()?
    };

    let mut names: Vec<String> = Vec::new();
    let mut objects = Vec::with_capacity(records.len());
    for (position, record) in records {
        let serde_json::Value::Object(object) = record else {
            return Err(IngestError::new(position, "record is not a JSON object"));
        };
        for key in object.keys() {
            if !names.iter().any(|n| n == key) {
                names.push(key.clone());
            }
        }
        objects.push((position, object));
    }
    let mut cells = Vec::with_capacity(objects.len());
    for (position, object) in objects {
        let mut row = Vec::with_capacity(names.len());
        for name in &names {
            row.push(match object.get(name) {
                None | Some(serde_json::Value::Null) => None,
                Some(v) => Some(json_scalar_text(v).ok_or_else(|| {
                    IngestError::new(position.clone(), format!("`{name}` is not a scalar"))
                })?),
            });
        }
        cells.push(row);
    }
    Ok((names, cells))
}

pub(crate) fn json_scalar_text(value: &serde_json::Value) -> Option<String> {
    match value {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        serde_json::Value::Number(n) => Some(if n.is_f64() {
            format_real(n.as_f64()?)
        } else {
            n.to_string()
        }),
        _ => None,
    }
}

fn parse_integer(s: &str) -> Option<i64> {
    s.trim().parse().ok()
}

fn parse_real(s: &str) -> Option<f64> {
    let t = s.trim();
    // `f64::from_str` accepts "inf"/"nan"; those are text here.
    if t.is_empty() || !t.bytes().any(|b| b.is_ascii_digit()) {
        return None;
    }
    t.parse().ok()
}

fn parse_boolean(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    let t = s.trim();
    if t.len() != 10 {
        return None;
    }
    NaiveDate::parse_from_str(t, "%Y-%m-%d").ok()
}

fn coerce(text: &str, data_type: DataType) -> Option<Value> {
    match data_type {
        DataType::Integer => parse_integer(text).map(Value::Integer),
        DataType::Real => parse_real(text).map(Value::Real),
        DataType::Boolean => parse_boolean(text).map(Value::Boolean),
        DataType::Date => parse_date(text).map(Value::Date),
        DataType::Text => Some(Value::Text(text.to_string())),
    }
}

/// Infers a column type from all of its non-null values, trying integer,
/// real, boolean and date in that order and falling back to text.
pub fn infer_column_type<S: AsRef<str>>(values: &[Option<S>]) -> DataType {
    let present: Vec<&str> = values.iter().flatten().map(AsRef::as_ref).collect();
    let all = |pred: fn(&str) -> bool| present.iter().all(|v| pred(v));
    if all(|v| parse_integer(v).is_some()) {
        DataType::Integer
    } else if all(|v| parse_real(v).is_some()) {
        DataType::Real
    } else if all(|v| parse_boolean(v).is_some()) {
        DataType::Boolean
    } else if all(|v| parse_date(v).is_some()) {
        DataType::Date
    } else {
        DataType::Text
    }
}

/// Value-free digest of a schema: lowercased table name plus the ordered
/// (lowercased column name, type) list. Column order is significant.
pub fn schema_fingerprint(schema: &TableSchema) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"facts-schema-v1\n");
    hasher.update(schema.table_name.to_lowercase().as_bytes());
    for column in &schema.columns {
        hasher.update(b"\n");
        hasher.update(column.name.to_lowercase().as_bytes());
        hasher.update(b"\x1f");
        hasher.update(column.data_type.as_str().as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Prompt-facing schema block:
///
/// ```text
/// Table: ACCOUNTS
///   custid: integer
///   name: text
/// ```
///
/// Multiple schemas are separated by a blank line, in input order.
pub fn render_schema_text(schemas: &[&TableSchema]) -> String {
    schemas
        .iter()
        .map(|schema| {
            let mut block = format!("Table: {}", schema.table_name);
            for column in &schema.columns {
                block.push_str(&format!("\n  {}: {}", column.name, column.data_type));
            }
            block
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}
