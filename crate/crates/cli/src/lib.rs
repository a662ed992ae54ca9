//! Library side of the `facts` binary: argument types, config resolution and
//! one function per subcommand. Every command writes its normal output to a
//! caller-supplied sink, so tests can run them in-process.

pub mod config;
pub mod error;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use facts_core::eval::{
    load_dataset, reusability_experiment, run_benchmark, scalability_experiment, DatasetExample,
};
use facts_core::llm::{HttpProvider, HttpProviderConfig};
use facts_core::store::{load_template_file, TemplateDocument};
use facts_core::workflow::FixedClock;
use facts_core::{
    apply_offline_template, Agent, ChatProvider, Council, CouncilMember, DirStore,
    OfflineTemplate, Pipeline, RetryPolicy, ScriptedBackend, StoreKey, Table, TableFormat,
    TableSchema, TemplateStore,
};
use serde::Serialize;

pub use config::{Mode, ModelConfig, Overrides, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "facts", version, about = "Build and reuse offline table-summary templates")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Template store directory.
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// Replay model responses from a script file instead of calling providers.
    #[arg(long, global = true)]
    pub script: Option<PathBuf>,
    /// Where to write the JSON report or template document.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Include wall-clock timings. On by default for live runs only, so
    /// scripted output stays byte-identical across runs.
    #[arg(long, global = true)]
    pub timings: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a template for a query and save it to the store.
    GenTemplate(QueryArgs),
    /// Run a saved template on tables. Never calls a model.
    Apply {
        /// Template file path, or a store key digest.
        #[arg(long)]
        template: String,
        #[arg(long = "table", required = true, value_parser = parse_table_arg)]
        tables: Vec<TableArg>,
    },
    /// Summarize via the store, building the template on a miss.
    Summarize(QueryArgs),
    /// Score a JSONL dataset with BLEU, ROUGE-L, METEOR and SQL pass rate.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// One query over many value-permuted copies of the same tables.
    BenchReuse {
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build at several row counts and compare prompt size and timings.
    BenchScale {
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![100, 500, 1000])]
        rows: Vec<usize>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub query: String,
    /// `name=path` or `path`; the name defaults to the file stem.
    #[arg(long = "table", required = true, value_parser = parse_table_arg)]
    pub tables: Vec<TableArg>,
}

/// The base example for experiments: a query with tables, or one dataset row.
#[derive(Debug, Clone, Args)]
pub struct BaseArgs {
    #[arg(long, conflicts_with = "dataset")]
    pub query: Option<String>,
    #[arg(long = "table", value_parser = parse_table_arg)]
    pub tables: Vec<TableArg>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Dataset example id; defaults to the first example.
    #[arg(long, requires = "dataset")]
    pub example: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableArg {
    pub name: String,
    pub path: PathBuf,
}

pub fn parse_table_arg(raw: &str) -> Result<TableArg, String> {
    let (name, path) = match raw.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        Some(_) => return Err(format!("empty table name in `{raw}`")),
        None => {
            let path = PathBuf::from(raw);
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| format!("cannot derive a table name from `{raw}`"))?
                .to_string();
            (stem, path)
        }
    };
    if path.as_os_str().is_empty() {
        return Err(format!("empty table path in `{raw}`"));
    }
    Ok(TableArg { name, path })
}

pub fn load_tables(args: &[TableArg]) -> Result<Vec<Table>, CliError> {
    args.iter()
        .map(|a| {
            let format = TableFormat::from_path(&a.path).ok_or_else(|| {
                CliError::Input(format!(
                    "{}: unknown table format (use .csv, .json or .jsonl)",
                    a.path.display()
                ))
            })?;
            let file = std::fs::File::open(&a.path)
                .map_err(|e| CliError::Input(format!("{}: {e}", a.path.display())))?;
            facts_core::load_table(file, format, &a.name)
                .map_err(|e| CliError::Input(format!("{}: {e}", a.path.display())))
        })
        .collect()
}

/// A ready pipeline plus the scripted backend behind it, if any.
pub struct Backend {
    pub pipeline: Pipeline,
    pub scripted: Option<Arc<ScriptedBackend>>,
}

/// Builds the pipeline. In scripted mode the script is replayed `copies`
/// times back to back.
pub fn build_backend(cfg: &RunConfig, copies: usize) -> Result<Backend, CliError> {
    cfg.check_credentials()?;
    let council_ids: Vec<&str> = cfg.council.iter().map(ModelConfig::id).collect();
    match cfg.backend.mode {
        Mode::Scripted => {
            let path = cfg
                .backend
                .script
                .as_ref()
                .ok_or_else(|| CliError::Config("scripted mode needs a script".into()))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read script {}: {e}", path.display())))?;
            let entries = ScriptedBackend::parse_entries(&text).map_err(CliError::Config)?;
            let replayed = (0..copies.max(1)).flat_map(|_| entries.clone()).collect();
            let backend = Arc::new(ScriptedBackend::new(replayed));
            let provider: Arc<dyn ChatProvider> = backend.clone();
            let retry = RetryPolicy::immediate(3);
            let agent = Agent::new(provider.clone(), cfg.agent.model.clone()).with_retry(retry.clone());
            let council = Council::new(
                cfg.council
                    .iter()
                    .map(|m| CouncilMember {
                        id: m.id().to_string(),
                        model_id: m.model.clone(),
                        provider: provider.clone(),
                    })
                    .collect(),
            )
            .map_err(|e| CliError::Config(e.to_string()))?
            .with_retry(retry);
            let pipeline = Pipeline::new(agent, council, cfg.workflow.clone())
                .with_clock(Arc::new(FixedClock::epoch()));
            Ok(Backend {
                pipeline,
                scripted: Some(backend),
            })
        }
        Mode::Live => {
            let timeout = Duration::from_secs(cfg.timeout_secs);
            let provider = |m: &ModelConfig| -> Result<Arc<dyn ChatProvider>, CliError> {
                Ok(Arc::new(HttpProvider::new(HttpProviderConfig {
                    name: m.id().to_string(),
                    endpoint: m.endpoint.clone(),
                    api_key: config::interpolate_secret(&m.api_key)?,
                    timeout,
                })))
            };
            let agent = Agent::new(provider(&cfg.agent)?, cfg.agent.model.clone());
            let members = cfg
                .council
                .iter()
                .map(|m| {
                    Ok(CouncilMember {
                        id: m.id().to_string(),
                        model_id: m.model.clone(),
                        provider: provider(m)?,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let council = Council::new(members).map_err(|e| CliError::Config(e.to_string()))?;
            log::info!("live council: {}", council_ids.join(", "));
            Ok(Backend {
                pipeline: Pipeline::new(agent, council, cfg.workflow.clone()),
                scripted: None,
            })
        }
    }
}

/// Everything a command needs besides its own arguments.
pub struct Context {
    pub config: RunConfig,
    pub out: Option<PathBuf>,
    pub timings: bool,
}

impl Context {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let overrides = Overrides {
            store: cli.store.clone(),
            script: cli.script.clone(),
        };
        let config = RunConfig::resolve(cli.config.as_deref(), &overrides)?;
        let timings = cli.timings || config.backend.mode == Mode::Live;
        Ok(Self {
            config,
            out: cli.out.clone(),
            timings,
        })
    }

    fn open_store(&self) -> Result<DirStore, CliError> {
        Ok(DirStore::open(self.config.store_path())?)
    }

    fn write_report<T: Serialize>(&self, default_name: &str, report: &T) -> Result<PathBuf, CliError> {
        let path = self
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(default_name));
        let mut text = serde_json::to_string_pretty(report).expect("reports serialize");
        text.push('\n');
        write_file(&path, &text)?;
        Ok(path)
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    let wrap = |source| CliError::Output {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(wrap)?;
    }
    std::fs::write(path, text).map_err(wrap)
}

fn out_err(e: std::io::Error) -> CliError {
    CliError::Output {
        path: "<stdout>".into(),
        source: e,
    }
}

fn describe_template(out: &mut dyn Write, t: &OfflineTemplate, key: &str) -> std::io::Result<()> {
    let it = &t.provenance.iterations;
    writeln!(out, "key          {key}")?;
    writeln!(out, "query        {}", t.user_query)?;
    writeln!(out, "council      {}", t.provenance.council_members.join(", "))?;
    writeln!(out, "specs        {}", t.provenance.accepted_specifications.len())?;
    for s in &t.provenance.accepted_specifications {
        writeln!(out, "  - {}", s.text)?;
    }
    writeln!(
        out,
        "rounds       sql {}, template {}",
        it.sql_rounds, it.template_rounds
    )?;
    writeln!(out, "llm calls    {}", it.llm_calls)?;
    writeln!(out, "sql")?;
    for q in &t.sql_queries {
        for line in q.text().lines() {
            writeln!(out, "  {line}")?;
        }
    }
    for w in &t.provenance.warnings {
        writeln!(out, "warning      {w}")?;
    }
    Ok(())
}

pub fn cmd_gen_template(ctx: &Context, args: &QueryArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let tables = load_tables(&args.tables)?;
    let store = ctx.open_store()?;
    let backend = build_backend(&ctx.config, 1)?;
    let template = backend
        .pipeline
        .build_offline_template(&args.query, &tables)?;
    let key = store.save(&template)?;
    describe_template(out, &template, &key.digest()).map_err(out_err)?;
    writeln!(out, "saved        {}", store.path_for(&key).display()).map_err(out_err)?;
    if let Some(path) = &ctx.out {
        write_file(path, &TemplateDocument::from_template(&template).to_text())?;
    }
    Ok(())
}

/// Resolves `--template` as a file, then as a digest in the store.
fn find_template(ctx: &Context, reference: &str) -> Result<OfflineTemplate, CliError> {
    let path = Path::new(reference);
    if path.is_file() {
        return Ok(load_template_file(path)?);
    }
    let is_digest = !reference.is_empty() && reference.chars().all(|c| c.is_ascii_hexdigit());
    if is_digest {
        let stored = ctx.config.store_path().join(format!("{reference}.json"));
        if stored.is_file() {
            return Ok(load_template_file(&stored)?);
        }
    }
    Err(CliError::Input(format!(
        "no template file or store entry `{reference}`"
    )))
}

pub fn cmd_apply(
    ctx: &Context,
    template: &str,
    tables: &[TableArg],
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let template = find_template(ctx, template)?;
    let tables = load_tables(tables)?;
    let summary = apply_offline_template(&template, &tables)?;
    writeln!(out, "{}", summary.text).map_err(out_err)?;
    Ok(())
}

pub fn cmd_summarize(ctx: &Context, args: &QueryArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let tables = load_tables(&args.tables)?;
    let store = ctx.open_store()?;
    let backend = build_backend(&ctx.config, 1)?;
    let summary = backend.pipeline.summarize(&store, &args.query, &tables)?;
    let schemas: Vec<&TableSchema> = tables.iter().map(Table::schema).collect();
    let key = StoreKey::for_schemas(&args.query, &schemas);
    writeln!(out, "{}", summary.text).map_err(out_err)?;
    writeln!(out).map_err(out_err)?;
    writeln!(out, "provenance   {}", summary.source).map_err(out_err)?;
    writeln!(out, "key          {}", key.digest()).map_err(out_err)?;
    writeln!(out, "llm calls    {}", summary.llm_calls_used).map_err(out_err)?;
    if ctx.timings {
        writeln!(out, "wall time    {:.2} ms", summary.wall_time.as_secs_f64() * 1000.0)
            .map_err(out_err)?;
    }
    for w in &summary.warnings {
        writeln!(out, "warning      {w}").map_err(out_err)?;
    }
    Ok(())
}

pub fn cmd_eval(ctx: &Context, dataset: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let examples = load_dataset(dataset)?;
    let backend = build_backend(&ctx.config, 1)?;
    let mut report = run_benchmark(&backend.pipeline, &examples)?;
    if !ctx.timings {
        report = report.without_timings();
    }
    write!(out, "{report}").map_err(out_err)?;
    let path = ctx.write_report("facts-eval.json", &report)?;
    writeln!(out, "report       {}", path.display()).map_err(out_err)?;
    Ok(())
}

fn base_example(args: &BaseArgs) -> Result<DatasetExample, CliError> {
    if let Some(path) = &args.dataset {
        let examples = load_dataset(path)?;
        return match &args.example {
            Some(id) => examples
                .into_iter()
                .find(|e| &e.id == id)
                .ok_or_else(|| CliError::Input(format!("no example `{id}` in {}", path.display()))),
            None => examples
                .into_iter()
                .next()
                .ok_or_else(|| CliError::Input(format!("{} is empty", path.display()))),
        };
    }
    let query = args
        .query
        .clone()
        .ok_or_else(|| CliError::Input("give --dataset, or --query with --table".into()))?;
    if args.tables.is_empty() {
        return Err(CliError::Input("--query needs at least one --table".into()));
    }
    Ok(DatasetExample {
        id: "cli".into(),
        query,
        tables: load_tables(&args.tables)?,
        reference: String::new(),
    })
}

pub fn cmd_bench_reuse(
    ctx: &Context,
    base: &BaseArgs,
    n: usize,
    seed: u64,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let example = base_example(base)?;
    let backend = build_backend(&ctx.config, 1)?;
    let mut report = reusability_experiment(&backend.pipeline, &example, n, seed)?;
    if !ctx.timings {
        report = report.without_timings();
    }
    write!(out, "{report}").map_err(out_err)?;
    let path = ctx.write_report("facts-reuse.json", &report)?;
    writeln!(out, "report        {}", path.display()).map_err(out_err)?;
    Ok(())
}

pub fn cmd_bench_scale(
    ctx: &Context,
    base: &BaseArgs,
    rows: &[usize],
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let example = base_example(base)?;
    let backend = build_backend(&ctx.config, rows.len())?;
    let mut report = scalability_experiment(&backend.pipeline, &example, rows)?;
    if !ctx.timings {
        report = report.without_timings();
    }
    write!(out, "{report}").map_err(out_err)?;
    let path = ctx.write_report("facts-scale.json", &report)?;
    writeln!(out, "report         {}", path.display()).map_err(out_err)?;
    Ok(())
}

/// Runs one parsed invocation and returns the process exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = Context::from_cli(cli).and_then(|ctx| match &cli.command {
        Command::GenTemplate(args) => cmd_gen_template(&ctx, args, out),
        Command::Apply { template, tables } => cmd_apply(&ctx, template, tables, out),
        Command::Summarize(args) => cmd_summarize(&ctx, args, out),
        Command::Eval { dataset } => cmd_eval(&ctx, dataset, out),
        Command::BenchReuse { base, n, seed } => cmd_bench_reuse(&ctx, base, *n, *seed, out),
        Command::BenchScale { base, rows } => cmd_bench_scale(&ctx, base, rows, out),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
