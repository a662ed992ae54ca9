//! Local execution of candidate SELECT queries over in-memory tables.
//!
//! Tables are loaded into a private in-memory SQLite database. Every query is
//! screened lexically before it reaches the engine, and the connection is
//! switched to `query_only` once the tables are loaded, so a batch can never
//! modify the data it reads.

use std::fmt;

use rusqlite::types::ValueRef;
use rusqlite::config::DbConfig;
use rusqlite::Connection;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{DataType, Table, Value};

/// Alias under which the only registered table is also reachable.
pub const SINGLE_TABLE_ALIAS: &str = "df";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SqlError {
    #[error("duplicate table name `{0}`")]
    DuplicateTableName(String),
    #[error("no tables to register")]
    NoTables,
    #[error("engine error: {0}")]
    Engine(String),
}

impl From<rusqlite::Error> for SqlError {
    fn from(e: rusqlite::Error) -> Self {
        SqlError::Engine(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SqlQuery(String);

impl SqlQuery {
    pub fn new(text: impl Into<String>) -> Self {
        Self(text.into())
    }

    pub fn text(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SqlQuery {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub error: Option<String>,
}

impl QueryResult {
    pub fn failed(error: impl Into<String>) -> Self {
        Self {
            columns: Vec::new(),
            rows: Vec::new(),
            error: Some(error.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// Exactly one row of exactly one column.
    pub fn is_scalar(&self) -> bool {
        self.is_ok() && self.columns.len() == 1 && self.rows.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SqlExecutionResult {
    pub per_query: Vec<QueryResult>,
}

impl SqlExecutionResult {
    /// Prompt-safe description: per query, either the error text or whether
    /// rows came back plus the output column names. Never includes cell
    /// values or row counts.
    pub fn describe(&self) -> String {
        if self.per_query.is_empty() {
            return "No queries were executed.".to_string();
        }
        self.per_query
            .iter()
            .enumerate()
            .map(|(i, r)| match &r.error {
                Some(e) => format!("Query {}: error: {e}", i + 1),
                None if r.rows.is_empty() => format!(
                    "Query {}: empty result (no rows); columns: {}",
                    i + 1,
                    r.columns.join(", ")
                ),
                None => format!(
                    "Query {}: returned rows; columns: {}",
                    i + 1,
                    r.columns.join(", ")
                ),
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScreenOutcome {
    Accepted,
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Invalid(Vec<String>),
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
}

/// Valid iff every query ran without error and returned at least one row.
pub fn validate(result: &SqlExecutionResult) -> Validity {
    if result.per_query.is_empty() {
        return Validity::Invalid(vec!["no queries".into()]);
    }
    let single = result.per_query.len() == 1;
    let reasons: Vec<String> = result
        .per_query
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let reason = match &r.error {
                Some(e) => e.clone(),
                None if r.rows.is_empty() => "empty result".to_string(),
                None => return None,
            };
            Some(if single {
                reason
            } else {
                format!("query {}: {reason}", i + 1)
            })
        })
        .collect();
    if reasons.is_empty() {
        Validity::Valid
    } else {
        Validity::Invalid(reasons)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Word(String),
    Semicolon,
    Other,
}

/// Lexes just enough SQL to find statement boundaries and bare keywords.
/// Strings, quoted identifiers and comments are skipped.
fn lex(sql: &str) -> Result<Vec<Token>, String> {
    let chars: Vec<char> = sql.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            _ if c.is_whitespace() => i += 1,
            '-' if chars.get(i + 1) == Some(&'-') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                i += 2;
                loop {
                    if i + 1 >= chars.len() {
                        return Err("unterminated comment".into());
                    }
                    if chars[i] == '*' && chars[i + 1] == '/' {
                        i += 2;
                        break;
                    }
                    i += 1;
                }
            }
            '\'' | '"' | '`' | '[' => {
                let close = if c == '[' { ']' } else { c };
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err("unterminated quoted text".into()),
                        Some(&ch) if ch == close => {
                            // doubled quote is an escaped quote
                            if close != ']' && chars.get(i + 1) == Some(&close) {
                                i += 2;
                            } else {
                                i += 1;
                                break;
                            }
                        }
                        Some(_) => i += 1,
                    }
                }
                tokens.push(Token::Other);
            }
            ';' => {
                tokens.push(Token::Semicolon);
                i += 1;
            }
            _ if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                    i += 1;
                }
                tokens.push(Token::Word(
                    chars[start..i].iter().collect::<String>().to_ascii_uppercase(),
                ));
            }
            _ => {
                tokens.push(Token::Other);
                i += 1;
            }
        }
    }
    Ok(tokens)
}

/// Splits text into statements at top-level semicolons, ignoring those in
/// strings, quoted identifiers and comments. Each statement is trimmed and
/// keeps its terminating `;` if it had one.
pub fn split_statements(sql: &str) -> Vec<String> {
    let chars: Vec<char> = sql.chars().collect();
    let mut out = Vec::new();
    let mut current = String::new();
    let mut i = 0;
    let flush = |current: &mut String, out: &mut Vec<String>| {
        let stmt = current.trim();
        if !stmt.is_empty() && stmt != ";" {
            out.push(stmt.to_string());
        }
        current.clear();
    };
    while i < chars.len() {
        let c = chars[i];
        match c {
            '-' if chars.get(i + 1) == Some(&'-') => {
                while i < chars.len() && chars[i] != '\n' {
                    current.push(chars[i]);
                    i += 1;
                }
                continue;
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                current.push_str("/*");
                i += 2;
                while i < chars.len() {
                    current.push(chars[i]);
                    if chars[i] == '/' && chars[i - 1] == '*' && current.len() > 3 {
                        i += 1;
                        break;
                    }
                    i += 1;
                }
                continue;
            }
            '\'' | '"' | '`' | '[' => {
                let close = if c == '[' { ']' } else { c };
                current.push(c);
                i += 1;
                while i < chars.len() {
                    current.push(chars[i]);
                    if chars[i] == close {
                        if close != ']' && chars.get(i + 1) == Some(&close) {
                            current.push(close);
                            i += 2;
                            continue;
                        }
                        i += 1;
                        break;
                    }
                    i += 1;
                }
                continue;
            }
            ';' => {
                current.push(';');
                flush(&mut current, &mut out);
            }
            _ => current.push(c),
        }
        i += 1;
    }
    flush(&mut current, &mut out);
    out
}

const FORBIDDEN: &[&str] = &[
    "INSERT", "UPDATE", "DELETE", "CREATE", "DROP", "ALTER", "ATTACH", "DETACH", "PRAGMA",
    "VACUUM", "REINDEX", "ANALYZE", "BEGIN", "COMMIT", "ROLLBACK", "SAVEPOINT", "RELEASE",
    "TRUNCATE", "COPY", "INSTALL", "LOAD", "EXPORT", "IMPORT",
];

/// Accepts exactly one SELECT statement (optionally introduced by WITH).
pub fn screen(query: &SqlQuery) -> ScreenOutcome {
    let tokens = match lex(query.text()) {
        Ok(t) => t,
        Err(e) => return ScreenOutcome::Rejected(e),
    };
    let statements: Vec<&[Token]> = tokens
        .split(|t| *t == Token::Semicolon)
        .filter(|s| !s.is_empty())
        .collect();
    match statements.len() {
        0 => return ScreenOutcome::Rejected("empty statement".into()),
        1 => {}
        _ => return ScreenOutcome::Rejected("multiple statements".into()),
    }
    let statement = statements[0];
    let first_word = statement.iter().find_map(|t| match t {
        Token::Word(w) => Some(w.as_str()),
        _ => None,
    });
    if !matches!(first_word, Some("SELECT" | "WITH" | "VALUES")) {
        return ScreenOutcome::Rejected("non-SELECT statement".into());
    }
    for (i, token) in statement.iter().enumerate() {
        if let Token::Word(w) = token {
            let forbidden = FORBIDDEN.contains(&w.as_str())
                || (w == "REPLACE" && statement.get(i + 1) == Some(&Token::Word("INTO".into())));
            if forbidden {
                return ScreenOutcome::Rejected(format!("forbidden keyword {w}"));
            }
        }
    }
    ScreenOutcome::Accepted
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn sql_type(t: DataType) -> &'static str {
    match t {
        DataType::Integer | DataType::Boolean => "INTEGER",
        DataType::Real => "REAL",
        DataType::Text | DataType::Date => "TEXT",
    }
}

fn to_sql(value: &Value) -> rusqlite::types::Value {
    use rusqlite::types::Value as Sql;
    match value {
        Value::Null => Sql::Null,
        Value::Integer(i) => Sql::Integer(*i),
        Value::Real(r) => Sql::Real(*r),
        Value::Text(s) => Sql::Text(s.clone()),
        Value::Boolean(b) => Sql::Integer(i64::from(*b)),
        Value::Date(d) => Sql::Text(d.format("%Y-%m-%d").to_string()),
    }
}

fn from_sql(value: ValueRef<'_>) -> Value {
    match value {
        ValueRef::Null => Value::Null,
        ValueRef::Integer(i) => Value::Integer(i),
        ValueRef::Real(r) => Value::Real(r),
        ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Value::Text(hex::encode(b)),
    }
}

/// A set of registered tables. Single-threaded; open one session per task.
pub struct SqlSession {
    conn: Connection,
    table_names: Vec<String>,
}

impl fmt::Debug for SqlSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SqlSession")
            .field("tables", &self.table_names)
            .finish()
    }
}

impl SqlSession {
    /// Loads `tables` under their schema names. When exactly one table is
    /// given it is also reachable as `df`.
    pub fn register_tables(tables: &[Table]) -> Result<Self, SqlError> {
        if tables.is_empty() {
            return Err(SqlError::NoTables);
        }
        let mut seen: Vec<String> = Vec::new();
        for table in tables {
            let lower = table.name().to_lowercase();
            if seen.contains(&lower) {
                return Err(SqlError::DuplicateTableName(table.name().to_string()));
            }
            seen.push(lower);
        }
        let mut conn = Connection::open_in_memory()?;
        let tx = conn.transaction()?;
        for table in tables {
            let columns: Vec<String> = table
                .schema()
                .columns
                .iter()
                .map(|c| format!("{} {}", quote_ident(&c.name), sql_type(c.data_type)))
                .collect();
            tx.execute_batch(&format!(
                "CREATE TABLE {} ({});",
                quote_ident(table.name()),
                columns.join(", ")
            ))?;
            let placeholders = vec!["?"; table.schema().columns.len()].join(", ");
            let mut insert = tx.prepare(&format!(
                "INSERT INTO {} VALUES ({placeholders})",
                quote_ident(table.name())
            ))?;
            for row in table.rows() {
                insert.execute(rusqlite::params_from_iter(row.iter().map(to_sql)))?;
            }
        }
        if tables.len() == 1 && !tables[0].name().eq_ignore_ascii_case(SINGLE_TABLE_ALIAS) {
            tx.execute_batch(&format!(
                "CREATE TEMP VIEW {SINGLE_TABLE_ALIAS} AS SELECT * FROM main.{};",
                quote_ident(tables[0].name())
            ))?;
        }
        tx.commit()?;
        conn.execute_batch("PRAGMA query_only = ON;")?;
        // A misspelled "column" must fail rather than read as a string.
        conn.set_db_config(DbConfig::SQLITE_DBCONFIG_DQS_DML, false)?;
        Ok(Self {
            conn,
            table_names: tables.iter().map(|t| t.name().to_string()).collect(),
        })
    }

    pub fn table_names(&self) -> &[String] {
        &self.table_names
    }

    pub fn row_count(&self, table: &str) -> Result<usize, SqlError> {
        let n: i64 = self.conn.query_row(
            &format!("SELECT COUNT(*) FROM {}", quote_ident(table)),
            [],
            |r| r.get(0),
        )?;
        Ok(n as usize)
    }

    /// Runs each query independently. Failures are captured per query and
    /// never abort the batch.
    pub fn execute(&self, queries: &[SqlQuery]) -> SqlExecutionResult {
        SqlExecutionResult {
            per_query: queries.iter().map(|q| self.execute_one(q)).collect(),
        }
    }

    fn execute_one(&self, query: &SqlQuery) -> QueryResult {
        if let ScreenOutcome::Rejected(reason) = screen(query) {
            return QueryResult::failed(format!("rejected: {reason}"));
        }
        let text = query.text().trim().trim_end_matches(';');
        let run = || -> rusqlite::Result<QueryResult> {
            let mut stmt = self.conn.prepare(text)?;
            if !stmt.readonly() {
                return Ok(QueryResult::failed("rejected: statement is not read-only"));
            }
            let columns: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
            let width = columns.len();
            let mut rows = Vec::new();
            let mut cursor = stmt.query([])?;
            while let Some(row) = cursor.next()? {
                let mut out = Vec::with_capacity(width);
                for i in 0..width {
                    out.push(from_sql(row.get_ref(i)?));
                }
                rows.push(out);
            }
            Ok(QueryResult {
                columns,
                rows,
                error: None,
            })
        };
        run().unwrap_or_else(|e| QueryResult::failed(e.to_string()))
    }
}
