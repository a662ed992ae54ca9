use std::sync::Arc;
use std::time::Instant;

use crate::council::{ArtifactKind, Council, EvaluationContext};
use crate::llm::{ChatProvider, Meter, Metered};
use crate::schema::{render_schema_text, schema_fingerprint, Table, TableSchema};
use crate::sqlexec::SqlSession;
use crate::store::{StoreKey, TemplateStore};
use crate::template::RenderBinding;

use super::stages::{stage1, stage2, stage3};
use super::{
    timestamp, Agent, Clock, IterationCounts, OfflineTemplate, Provenance, Stage, Summary,
    SummarySource, SystemClock, WorkflowConfig, WorkflowError,
};

/// Agent, council and config, with every model call metered.
#[derive(Clone)]
pub struct Pipeline {
    agent: Agent,
    council: Council,
    config: WorkflowConfig,
    clock: Arc<dyn Clock>,
    meter: Meter,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("agent", &self.agent)
            .field("council", &self.council.member_ids())
            .field("config", &self.config)
            .finish()
    }
}

fn metered(meter: &Meter) -> impl Fn(Arc<dyn ChatProvider>) -> Arc<dyn ChatProvider> + '_ {
    move |p| Arc::new(Metered::new(p, meter.clone())) as Arc<dyn ChatProvider>
}

impl Pipeline {
    pub fn new(agent: Agent, council: Council, config: WorkflowConfig) -> Self {
        let meter = Meter::new();
        Self {
            agent: agent.map_provider(metered(&meter)),
            council: council.map_providers(metered(&meter)),
            config,
            clock: Arc::new(SystemClock),
            meter,
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &WorkflowConfig {
        &self.config
    }

    pub fn with_config(mut self, config: WorkflowConfig) -> Self {
        self.config = config;
        self
    }

    /// Counts every model call made through this pipeline and its clones.
    pub fn meter(&self) -> &Meter {
        &self.meter
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn council(&self) -> &Council {
        &self.council
    }

    pub fn build_offline_template(
        &self,
        query: &str,
        tables: &[Table],
    ) -> Result<OfflineTemplate, WorkflowError> {
        self.config.validate()?;
        if tables.is_empty() {
            return Err(WorkflowError::NoTables);
        }
        let calls_before = self.meter.snapshot().calls;
        let schemas: Vec<&TableSchema> = tables.iter().map(Table::schema).collect();
        let schema_text = render_schema_text(&schemas);
        let session = SqlSession::register_tables(tables)?;

        let s1 = stage1(&self.agent, &self.council, query, &schema_text, &self.config)?;
        let s2 = stage2(
            &self.agent,
            &self.council,
            query,
            &schema_text,
            &s1.accepted,
            &session,
            &self.config,
        )?;
        let s3 = stage3(
            &self.agent,
            &self.council,
            query,
            &schema_text,
            s2.queries,
            s2.execution,
            &session,
            &self.config,
        )?;

        let iterations = IterationCounts {
            spec_generations: s1.generations,
            spec_revisions: s1.revisions,
            spec_judge_rounds: s1.judge_rounds,
            sufficiency_probes: s1.probes,
            sql_rounds: s2.rounds,
            template_rounds: s3.rounds,
            llm_calls: self.meter.snapshot().calls - calls_before,
        };
        Ok(OfflineTemplate {
            user_query: query.to_string(),
            schema_fingerprints: schemas.iter().map(|s| schema_fingerprint(s)).collect(),
            sql_queries: s3.queries,
            jinja2_template: s3.template,
            provenance: Provenance {
                created_at: timestamp(&self.clock),
                council_members: self.council.member_ids(),
                accepted_specifications: s1.accepted,
                iterations,
                warnings: Vec::new(),
            },
        })
    }

    /// Store hit: apply only. Miss: build, apply, save. With
    /// `validate_final_summary`, one council round judges the result and a
    /// NO becomes a warning.
    pub fn summarize(
        &self,
        store: &dyn TemplateStore,
        query: &str,
        tables: &[Table],
    ) -> Result<Summary, WorkflowError> {
        let started = Instant::now();
        let calls_before = self.meter.snapshot().calls;
        let schemas: Vec<&TableSchema> = tables.iter().map(Table::schema).collect();
        let key = StoreKey::for_schemas(query, &schemas);

        let (mut summary, built) = match store.lookup_key(&key)? {
            Some(template) => {
                let mut s = apply_offline_template(&template, tables)?;
                s.source = SummarySource::StoreHit;
                (s, None)
            }
            None => {
                let template = self.build_offline_template(query, tables)?;
                let mut s = apply_offline_template(&template, tables)?;
                s.source = SummarySource::Built;
                (s, Some(template))
            }
        };

        if self.config.validate_final_summary {
            if let Some(warning) = self.judge_summary(query, &schemas, &summary.text)? {
                summary.warnings.push(warning);
            }
        }
        if let Some(mut template) = built {
            template.provenance.warnings = summary.warnings.clone();
            store.save(&template)?;
        }
        summary.llm_calls_used = self.meter.snapshot().calls - calls_before;
        summary.wall_time = started.elapsed();
        Ok(summary)
    }

    fn judge_summary(
        &self,
        query: &str,
        schemas: &[&TableSchema],
        text: &str,
    ) -> Result<Option<String>, WorkflowError> {
        let ctx = EvaluationContext {
            schema_text: Some(render_schema_text(schemas)),
            user_query: Some(query.to_string()),
            ..Default::default()
        };
        let verdict = self
            .council
            .judge(ArtifactKind::Summary, text, &ctx)
            .map_err(|source| WorkflowError::Council {
                stage: Stage::Summary,
                source,
            })?;
        Ok((!verdict.accepted())
            .then(|| format!("summary validation: NO ({})", verdict.consensus_feedback)))
    }
}

/// Runs a finished template on new tables. Never calls a model.
pub fn apply_offline_template(
    template: &OfflineTemplate,
    tables: &[Table],
) -> Result<Summary, WorkflowError> {
    let started = Instant::now();
    let got: Vec<String> = tables.iter().map(|t| schema_fingerprint(t.schema())).collect();
    if got != template.schema_fingerprints {
        return Err(WorkflowError::FingerprintMismatch {
            expected: template.schema_fingerprints.clone(),
            got,
        });
    }
    let session = SqlSession::register_tables(tables)
        .map_err(|e| WorkflowError::Application(e.to_string()))?;
    let execution = session.execute(&template.sql_queries);
    for (i, r) in execution.per_query.iter().enumerate() {
        if let Some(err) = &r.error {
            return Err(WorkflowError::Application(format!(
                "query {} failed: {err}",
                i + 1
            )));
        }
    }
    let text = template
        .jinja2_template
        .render(&RenderBinding::from_execution(&execution))
        .map_err(|e| WorkflowError::Application(e.to_string()))?;
    let text = text.trim().to_string();
    if text.is_empty() {
        return Err(WorkflowError::Application(
            "template rendered empty text".into(),
        ));
    }
    Ok(Summary {
        text,
        llm_calls_used: 0,
        wall_time: started.elapsed(),
        source: SummarySource::Applied,
        warnings: Vec::new(),
    })
}
