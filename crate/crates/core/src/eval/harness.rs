use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::Serialize;
use thiserror::Error;

use crate::schema::{Table, Value};
use crate::store::{MemoryStore, TemplateStore};
use crate::workflow::{apply_offline_template, Pipeline, Stage, SummarySource, WorkflowError};

use super::dataset::DatasetExample;
use super::metrics::{corpus_bleu, meteor, rouge_l_f1};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("pass rate over zero outcomes")]
    EmptyOutcomes,
    #[error("experiment needs {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error("experiment invariant violated: {0}")]
    Invariant(String),
}

/// Fraction of `true` outcomes.
pub fn pass_rate(sql_ok: &[bool]) -> Result<f64, EvalError> {
    if sql_ok.is_empty() {
        return Err(EvalError::EmptyOutcomes);
    }
    Ok(sql_ok.iter().filter(|ok| **ok).count() as f64 / sql_ok.len() as f64)
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleScore {
    pub id: String,
    pub sql_ok: bool,
    pub summary: Option<String>,
    pub error: Option<String>,
    pub bleu: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub llm_calls: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    /// Corpus BLEU over all examples; failures count as empty candidates.
    pub bleu: f64,
    /// Mean over examples.
    pub rouge_l: f64,
    /// Mean over examples.
    pub meteor: f64,
    pub pass_rate: f64,
    pub per_example: Vec<ExampleScore>,
    pub timing: BTreeMap<String, f64>,
}

impl MetricReport {
    /// Aggregates per-example scores.
    pub fn from_examples(
        per_example: Vec<ExampleScore>,
        references: &[&str],
        timing: BTreeMap<String, f64>,
    ) -> Result<Self, EvalError> {
        let n = per_example.len();
        let pairs: Vec<(&str, &str)> = per_example
            .iter()
            .zip(references)
            .map(|(e, r)| (e.summary.as_deref().unwrap_or(""), *r))
            .collect();
        let mean = |f: &dyn Fn(&ExampleScore) -> f64| {
            per_example.iter().map(f).sum::<f64>() / n.max(1) as f64
        };
        Ok(Self {
            bleu: corpus_bleu(&pairs),
            rouge_l: mean(&|e| e.rouge_l),
            meteor: mean(&|e| e.meteor),
            pass_rate: pass_rate(&per_example.iter().map(|e| e.sql_ok).collect::<Vec<_>>())?,
            per_example,
            timing,
        })
    }
}

impl MetricReport {
    /// Zeroes wall-clock fields so reports of scripted runs compare bytewise.
    pub fn without_timings(mut self) -> Self {
        self.timing.clear();
        for e in &mut self.per_example {
            e.wall_ms = 0.0;
        }
        self
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:>8} {:>8} {:>8} {:>6} {:>6}",
            "example", "BLEU", "ROUGE-L", "METEOR", "sql", "calls"
        )?;
        for e in &self.per_example {
            writeln!(
                f,
                "{:<16} {:>8.2} {:>8.2} {:>8.2} {:>6} {:>6}",
                e.id,
                e.bleu,
                e.rouge_l,
                e.meteor,
                if e.sql_ok { "ok" } else { "fail" },
                e.llm_calls
            )?;
        }
        writeln!(
            f,
            "{:<16} {:>8.2} {:>8.2} {:>8.2} {:>6}",
            "overall",
            self.bleu,
            self.rouge_l,
            self.meteor,
            format!("{:.1}%", self.pass_rate * 100.0)
        )
    }
}

/// Summarizes every example against one shared in-memory store and scores
/// the output. A failed example scores zero and the run continues; its SQL
/// counts as ok only if it failed after the SQL stage.
pub fn run_benchmark(
    pipeline: &Pipeline,
    dataset: &[DatasetExample],
) -> Result<MetricReport, EvalError> {
    let store = MemoryStore::new();
    let started = Instant::now();
    let mut scores = Vec::with_capacity(dataset.len());
    for ex in dataset {
        let t0 = Instant::now();
        let calls0 = pipeline.meter().snapshot().calls;
        let result = pipeline.summarize(&store, &ex.query, &ex.tables);
        let llm_calls = pipeline.meter().snapshot().calls - calls0;
        let score = match result {
            Ok(summary) => ExampleScore {
                id: ex.id.clone(),
                sql_ok: true,
                bleu: super::metrics::bleu(&summary.text, &[&ex.reference]),
                rouge_l: rouge_l_f1(&summary.text, &ex.reference),
                meteor: meteor(&summary.text, &ex.reference),
                summary: Some(summary.text),
                error: None,
                llm_calls,
                wall_ms: ms(t0.elapsed()),
            },
            Err(e) => {
                log::warn!("example {} failed: {e}", ex.id);
                ExampleScore {
                    id: ex.id.clone(),
                    sql_ok: e.stage() == Some(Stage::Template),
                    summary: None,
                    error: Some(e.to_string()),
                    bleu: 0.0,
                    rouge_l: 0.0,
                    meteor: 0.0,
                    llm_calls,
                    wall_ms: ms(t0.elapsed()),
                }
            }
        };
        scores.push(score);
    }
    let references: Vec<&str> = dataset.iter().map(|e| e.reference.as_str()).collect();
    let timing = BTreeMap::from([("total_ms".to_string(), ms(started.elapsed()))]);
    MetricReport::from_examples(scores, &references, timing)
}

/// Shuffles each column's values across rows. Schema and multiset of values
/// per column are preserved.
pub fn permute_values(table: &Table, rng: &mut StdRng) -> Table {
    let rows = table.rows();
    let width = table.schema().columns.len();
    let mut columns: Vec<Vec<Value>> = (0..width)
        .map(|c| rows.iter().map(|r| r[c].clone()).collect())
        .collect();
    for col in &mut columns {
        col.shuffle(rng);
    }
    let new_rows = (0..rows.len())
        .map(|r| columns.iter().map(|c| c[r].clone()).collect())
        .collect();
    table.with_rows(new_rows).expect("permutation keeps types")
}

/// `target` rows cycled from the base rows; real values in later cycles
/// are scaled slightly so copies are not identical.
pub fn resize_table(table: &Table, target: usize) -> Table {
    let base = table.rows();
    if base.is_empty() {
        return table.clone();
    }
    let rows = (0..target)
        .map(|i| {
            let cycle = (i / base.len()) as f64;
            base[i % base.len()]
                .iter()
                .map(|v| match v {
                    Value::Real(r) => Value::Real(r * (1.0 + 0.001 * cycle)),
                    other => other.clone(),
                })
                .collect()
        })
        .collect();
    table.with_rows(rows).expect("resizing keeps types")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRun {
    pub index: usize,
    pub source: SummarySource,
    pub llm_calls: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReuseReport {
    pub n_tables: usize,
    pub builds: usize,
    pub store_hits: usize,
    pub total_llm_calls: usize,
    pub total_wall_ms: f64,
    pub per_table: Vec<TableRun>,
}

impl ReuseReport {
    pub fn without_timings(mut self) -> Self {
        self.total_wall_ms = 0.0;
        for t in &mut self.per_table {
            t.wall_ms = 0.0;
        }
        self
    }
}

impl fmt::Display for ReuseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tables        {}", self.n_tables)?;
        writeln!(f, "builds        {}", self.builds)?;
        writeln!(f, "store hits    {}", self.store_hits)?;
        writeln!(f, "llm calls     {}", self.total_llm_calls)?;
        let first = self.per_table.first().map_or(0.0, |t| t.wall_ms);
        let rest: f64 = self.per_table.iter().skip(1).map(|t| t.wall_ms).sum();
        writeln!(f, "first table   {first:.2} ms")?;
        writeln!(f, "other tables  {rest:.2} ms")
    }
}

/// Summarizes `n_tables` value-permuted copies of the base tables with one
/// query. Summary validation is switched off, since it would show values to
/// the council on every table. Fails unless exactly one build happened.
pub fn reusability_experiment(
    pipeline: &Pipeline,
    base: &DatasetExample,
    n_tables: usize,
    seed: u64,
) -> Result<ReuseReport, EvalError> {
    if n_tables == 0 {
        return Err(EvalError::InvalidArgument("n_tables >= 1".into()));
    }
    let mut config = pipeline.config().clone();
    config.validate_final_summary = false;
    let pipeline = pipeline.clone().with_config(config);
    let store = MemoryStore::new();
    let mut rng = StdRng::seed_from_u64(seed);
    let started = Instant::now();
    let calls0 = pipeline.meter().snapshot().calls;
    let mut per_table = Vec::with_capacity(n_tables);
    for index in 0..n_tables {
        let tables: Vec<Table> = if index == 0 {
            base.tables.clone()
        } else {
            base.tables.iter().map(|t| permute_values(t, &mut rng)).collect()
        };
        let summary = pipeline.summarize(&store as &dyn TemplateStore, &base.query, &tables)?;
        per_table.push(TableRun {
            index,
            source: summary.source,
            llm_calls: summary.llm_calls_used,
            wall_ms: ms(summary.wall_time),
        });
    }
    let builds = per_table
        .iter()
        .filter(|t| t.source == SummarySource::Built)
        .count();
    let report = ReuseReport {
        n_tables,
        builds,
        store_hits: per_table
            .iter()
            .filter(|t| t.source == SummarySource::StoreHit)
            .count(),
        total_llm_calls: pipeline.meter().snapshot().calls - calls0,
        total_wall_ms: ms(started.elapsed()),
        per_table,
    };
    if report.builds != 1 {
        return Err(EvalError::Invariant(format!(
            "expected exactly one build, saw {}",
            report.builds
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalePoint {
    pub rows: usize,
    pub prompt_chars: usize,
    pub llm_calls: usize,
    pub build_ms: f64,
    /// SQL execution plus rendering on the resized tables.
    pub apply_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleReport {
    pub points: Vec<ScalePoint>,
    /// Whether every point sent the same number of prompt characters.
    pub prompt_chars_flat: bool,
}

impl ScaleReport {
    pub fn without_timings(mut self) -> Self {
        for p in &mut self.points {
            p.build_ms = 0.0;
            p.apply_ms = 0.0;
        }
        self
    }
}

impl fmt::Display for ScaleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>8} {:>13} {:>6} {:>10} {:>10}",
            "rows", "prompt_chars", "calls", "build_ms", "apply_ms"
        )?;
        for p in &self.points {
            writeln!(
                f,
                "{:>8} {:>13} {:>6} {:>10.2} {:>10.2}",
                p.rows, p.prompt_chars, p.llm_calls, p.build_ms, p.apply_ms
            )?;
        }
        writeln!(
            f,
            "prompt payload {}",
            if self.prompt_chars_flat { "flat" } else { "varies" }
        )
    }
}

/// Builds a fresh template at each row count and applies it, recording
/// prompt size and the two timing components separately.
pub fn scalability_experiment(
    pipeline: &Pipeline,
    base: &DatasetExample,
    row_counts: &[usize],
) -> Result<ScaleReport, EvalError> {
    if row_counts.is_empty() {
        return Err(EvalError::InvalidArgument("at least one row count".into()));
    }
    let mut points = Vec::with_capacity(row_counts.len());
    for &rows in row_counts {
        let tables: Vec<Table> = base.tables.iter().map(|t| resize_table(t, rows)).collect();
        let before = pipeline.meter().snapshot();
        let t0 = Instant::now();
        let template = pipeline.build_offline_template(&base.query, &tables)?;
        let build_ms = ms(t0.elapsed());
        let after = pipeline.meter().snapshot();
        let applied = apply_offline_template(&template, &tables)?;
        points.push(ScalePoint {
            rows,
            prompt_chars: after.prompt_chars - before.prompt_chars,
            llm_calls: after.calls - before.calls,
            build_ms,
            apply_ms: ms(applied.wall_time),
        });
    }
    let prompt_chars_flat = points.windows(2).all(|w| w[0].prompt_chars == w[1].prompt_chars);
    Ok(ScaleReport {
        points,
        prompt_chars_flat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::table_from_text_cells;

    fn table() -> Table {
        table_from_text_cells(
            "df",
            vec!["k".into(), "v".into()],
            (0..6)
                .map(|i| vec![Some(i.to_string()), Some(format!("{i}.5"))])
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn pass_rate_accounting() {
        assert_eq!(pass_rate(&[true, true]).unwrap(), 1.0);
        let mut v = vec![true; 832];
        v.extend(vec![false; 168]);
        assert!((pass_rate(&v).unwrap() - 0.832).abs() < 1e-12);
        assert_eq!(pass_rate(&[false]).unwrap(), 0.0);
        assert!(matches!(pass_rate(&[]), Err(EvalError::EmptyOutcomes)));
    }

    #[test]
    fn permutation_keeps_schema_and_multisets() {
        let t = table();
        let p = permute_values(&t, &mut StdRng::seed_from_u64(7));
        assert_eq!(p.schema(), t.schema());
        for c in 0..2 {
            let mut a: Vec<String> = t.rows().iter().map(|r| r[c].to_text()).collect();
            let mut b: Vec<String> = p.rows().iter().map(|r| r[c].to_text()).collect();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn resize_cycles_rows() {
        let t = resize_table(&table(), 14);
        assert_eq!(t.row_count(), 14);
        assert_eq!(t.rows()[6][0], Value::Integer(0));
        assert_ne!(t.rows()[6][1], t.rows()[0][1]);
    }
}
