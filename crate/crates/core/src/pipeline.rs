//! The command layer tying corpus, prompting, gateway, parsing, robustness,
//! stance, and stats into resumable runs and deterministic reports.

use crate::aligndata::{
    assign_leanings, build_preference_dataset, ingest_manifestos, AlignApproach, CodeStanceTable,
    IngestReport, PreferenceDataset, RileDictionaries,
};
use crate::analysis::{
    build_grid, issue_scores, model_language_pairs, overall_stance, regression_dataset,
    screen_scores, statement_scores, validity_by_pair, RegressionTarget,
};
use crate::corpus::{PolicyIssue, StatementSet};
use crate::error::{Error, Result};
use crate::gateway::{dispatch, ConditionKey, Responder, WorkItem};
use crate::lang::Language;
use crate::openended::{
    aspect_score, build_aspect_prompts, generate_statements, judge_stance, left_score,
    AspectTable, JudgeTemplate, JudgeVerdict, LeftScore,
};
use crate::parsing::{parse_response, LexiconSet};
use crate::prompting::{enumerate_conditions, TemplateSet};
use crate::report::{fmt_f64, fmt_opt_f64, Report, ReportKind};
use crate::robustness::{
    random_baseline, run_battery, significance_share, BatteryParams, GridShape, RobustnessTest,
};
use crate::run::{now_unix_ms, OpinionRecord, RunManifest, RunStore};
use crate::stance::{ScoreLevel, StanceScore};
use crate::stats::beta::squeeze_to_open_interval;
use crate::stats::design::build_design;
use crate::stats::fit_beta_regression;
use crate::stats::kw::{kw_language_screen, LanguageScreen, RandomShape};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

/// Planned size of a probe, before any request is made.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanSummary {
    pub statements: usize,
    pub conditions_per_statement: usize,
    /// Conditions for one model in one language.
    pub conditions_per_model_language: usize,
    /// Responses for one model in one language.
    pub responses_per_model_language: usize,
    pub total_conditions: usize,
    pub total_responses: usize,
}

/// Grid arithmetic for a probe: statements x (6 variants x templates x 2
/// orders) x samples, per model and language.
pub fn plan_probe(
    corpus: &StatementSet,
    templates: &TemplateSet,
    languages: &[Language],
    n_models: usize,
    samples_per_condition: usize,
) -> PlanSummary {
    let templates_per_language =
        languages.iter().map(|&l| templates.for_language(l).len()).max().unwrap_or(0);
    let conditions_per_statement = 6 * templates_per_language * 2;
    let per_ml_conditions = corpus.len() * conditions_per_statement;
    let per_ml_responses = per_ml_conditions * samples_per_condition;
    PlanSummary {
        statements: corpus.len(),
        conditions_per_statement,
        conditions_per_model_language: per_ml_conditions,
        responses_per_model_language: per_ml_responses,
        total_conditions: per_ml_conditions * languages.len() * n_models,
        total_responses: per_ml_responses * languages.len() * n_models,
    }
}

/// One model taking part in a probe.
pub struct ProbeModel {
    pub name: String,
    pub responder: Arc<dyn Responder>,
    pub max_in_flight: usize,
    pub requests_per_minute: Option<u32>,
}

/// Probe parameters beyond the models.
pub struct ProbeSpec<'a> {
    pub run_id: String,
    pub corpus: &'a StatementSet,
    pub corpus_path: String,
    pub templates: &'a TemplateSet,
    pub lexicons: &'a LexiconSet,
    pub languages: Vec<Language>,
    pub samples_per_condition: usize,
    pub temperature: f64,
    pub seed: u64,
    pub mock_profile: Option<String>,
}

/// Execute (or resume) a probe run: enumerate all conditions, dispatch the
/// missing ones, persist raw responses, parse them, and seal the manifest.
/// Re-running a sealed run is a no-op that issues zero requests.
pub fn cmd_probe(
    store: &RunStore,
    spec: &ProbeSpec<'_>,
    models: &[ProbeModel],
) -> Result<RunManifest> {
    if models.is_empty() {
        return Err(Error::Config("probe needs at least one model".to_string()));
    }
    if spec.languages.is_empty() {
        return Err(Error::Config("probe needs at least one language".to_string()));
    }
    let plan = plan_probe(
        spec.corpus,
        spec.templates,
        &spec.languages,
        models.len(),
        spec.samples_per_condition,
    );

    let manifest = if store.run_exists(&spec.run_id) {
        let existing = store.load_manifest(&spec.run_id)?;
        if existing.corpus_hash != spec.corpus.content_hash() {
            return Err(Error::Config(format!(
                "run `{}` was started with a different corpus",
                spec.run_id
            )));
        }
        if existing.is_sealed() {
            return Ok(existing);
        }
        existing
    } else {
        let manifest = RunManifest {
            run_id: spec.run_id.clone(),
            corpus_hash: spec.corpus.content_hash(),
            template_hash: spec.templates.content_hash(),
            lexicon_hash: spec.lexicons.content_hash(),
            corpus_path: spec.corpus_path.clone(),
            models: models.iter().map(|m| m.name.clone()).collect(),
            languages: spec.languages.clone(),
            samples_per_condition: spec.samples_per_condition,
            temperature: spec.temperature,
            seed: spec.seed,
            conditions_expected: plan.total_conditions,
            conditions_completed: 0,
            created_unix_ms: now_unix_ms(),
            sealed_unix_ms: None,
            mock_profile: spec.mock_profile.clone(),
        };
        store.save_manifest(&manifest)?;
        manifest
    };

    let completed = store.completed_conditions(&spec.run_id, spec.samples_per_condition)?;
    let mut pending_any = false;
    let mut partial: Option<Error> = None;

    for model in models {
        let mut work = Vec::new();
        for &language in &spec.languages {
            for statement in spec.corpus.statements() {
                for condition in enumerate_conditions(statement, language, spec.templates)? {
                    let key = ConditionKey {
                        model: model.name.clone(),
                        language,
                        statement_id: statement.id.clone(),
                        variant_kind: condition.spec.variant_kind,
                        template_id: condition.spec.template_id.clone(),
                        answer_order: condition.spec.answer_order,
                    };
                    if completed.contains_key(&key.tag()) {
                        continue;
                    }
                    work.push(WorkItem {
                        key,
                        prompt: condition.text,
                        n: spec.samples_per_condition,
                        temperature: spec.temperature,
                    });
                }
            }
        }
        if work.is_empty() {
            continue;
        }
        pending_any = true;
        let mut buffer = Vec::with_capacity(2048);
        let outcome = dispatch(
            work,
            model.responder.as_ref(),
            model.max_in_flight,
            model.requests_per_minute,
            &mut |response| {
                buffer.push(response);
                if buffer.len() >= 2048 {
                    store.append_responses(&spec.run_id, &buffer)?;
                    buffer.clear();
                }
                Ok(())
            },
        );
        if !buffer.is_empty() {
            store.append_responses(&spec.run_id, &buffer)?;
        }
        if let Err(e) = outcome {
            partial = Some(e);
            break;
        }
    }

    let completed_now = store.completed_conditions(&spec.run_id, spec.samples_per_condition)?;
    let mut manifest = manifest;
    manifest.conditions_completed = completed_now.len();
    store.save_manifest(&manifest)?;

    if let Some(e) = partial {
        return Err(e);
    }
    if manifest.conditions_completed < manifest.conditions_expected {
        return Err(Error::PartialRun {
            completed: manifest.conditions_completed,
            expected: manifest.conditions_expected,
            gaps: vec!["responses persisted; rerun to resume".to_string()],
        });
    }

    // Parse every stored response (idempotent reruns included: nothing was
    // pending, but records may not exist yet).
    let _ = pending_any;
    let responses = store.load_responses(&spec.run_id)?;
    let records: Vec<OpinionRecord> = responses
        .into_iter()
        .map(|response| OpinionRecord {
            stance: parse_response(&response.text, spec.lexicons.get(response.key.language)),
            sample_index: response.sample_index,
            key: response.key,
        })
        .collect();
    store.write_records(&spec.run_id, &records)?;
    store.seal(&spec.run_id)
}

/// Battery parameters plus provenance-carrying robustness report emission.
pub fn cmd_robustness(
    store: &RunStore,
    run_id: &str,
    params: &BatteryParams,
) -> Result<PathBuf> {
    let manifest = store.require_sealed(run_id)?;
    let records = store.load_records(run_id)?;
    let corpus = load_and_verify_corpus(&manifest)?;
    let template_ids = template_ids_in(&records);
    let shape = GridShape {
        statement_ids: corpus.statements().iter().map(|s| s.id.clone()).collect(),
        template_ids,
        samples_per_condition: manifest.samples_per_condition,
    };

    let mut report = Report::new(
        ReportKind::Robustness,
        &["run_id", "corpus_hash", "config_hash", "model", "language", "test", "mean", "ci_lo", "ci_hi", "overall_mean"],
    );
    let config_hash = manifest.config_hash();
    for (model, language) in model_language_pairs(&records) {
        let grid = build_grid(&records, &model, language);
        let battery = run_battery(&grid, &shape, &model, language, params)?;
        for test in RobustnessTest::ALL {
            let summary = &battery.per_test[&test];
            report.push(vec![
                manifest.run_id.clone(),
                manifest.corpus_hash.clone(),
                config_hash.clone(),
                model.clone(),
                language.to_string(),
                test.to_string(),
                fmt_f64(summary.mean),
                fmt_f64(summary.ci.0),
                fmt_f64(summary.ci.1),
                fmt_f64(battery.overall_mean),
            ]);
        }
        // Random baseline rows for the same shape.
        let baseline = random_baseline(manifest.seed, &shape, language, params)?;
        for test in RobustnessTest::ALL {
            let summary = &baseline.per_test[&test];
            report.push(vec![
                manifest.run_id.clone(),
                manifest.corpus_hash.clone(),
                config_hash.clone(),
                format!("random-baseline[{model}]"),
                language.to_string(),
                test.to_string(),
                fmt_f64(summary.mean),
                fmt_f64(summary.ci.0),
                fmt_f64(summary.ci.1),
                fmt_f64(baseline.overall_mean),
            ]);
        }
    }
    store.write_report(run_id, ReportKind::Robustness.file_stem(), &report.to_csv()?)
}

fn template_ids_in(records: &[OpinionRecord]) -> Vec<String> {
    let set: std::collections::BTreeSet<String> =
        records.iter().map(|r| r.key.template_id.clone()).collect();
    set.into_iter().collect()
}

fn load_and_verify_corpus(manifest: &RunManifest) -> Result<StatementSet> {
    let corpus = crate::corpus::load_corpus(std::path::Path::new(&manifest.corpus_path))?;
    if corpus.content_hash() != manifest.corpus_hash {
        return Err(Error::Analysis(format!(
            "corpus at `{}` no longer matches run `{}` (hash mismatch)",
            manifest.corpus_path, manifest.run_id
        )));
    }
    Ok(corpus)
}

/// Analysis options; defaults match the shipped configuration.
#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub alpha: f64,
    pub bootstrap_resamples: usize,
    pub allow_partial: bool,
    /// Reference model for treatment coding; defaults to Mixtral8x7B when
    /// present, otherwise the alphabetically first model.
    pub reference_model: Option<String>,
    pub with_regression: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            alpha: 0.05,
            bootstrap_resamples: 1000,
            allow_partial: false,
            reference_model: None,
            with_regression: true,
        }
    }
}

/// One stance row of the analyze output.
#[derive(Debug, Clone, PartialEq)]
pub struct StanceRow {
    pub model: String,
    pub language: Language,
    /// "overall" or the issue name.
    pub scope: String,
    pub score: StanceScore,
}

impl StanceRow {
    pub fn value(&self) -> f64 {
        self.score.value
    }
}

/// One validity-accounting row.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityRow {
    pub model: String,
    pub language: Language,
    pub share_valid: f64,
    pub share_significant: f64,
}

/// Structured analyze outcome, also written as CSV reports.
pub struct AnalyzeOutcome {
    pub reports: Vec<PathBuf>,
    pub stance_rows: Vec<StanceRow>,
    pub validity_rows: Vec<ValidityRow>,
    pub screens: BTreeMap<String, LanguageScreen>,
}

/// Stance coordinates, Kruskal-Wallis screens, beta regression, and
/// validity accounting for one sealed run.
pub fn cmd_analyze(store: &RunStore, run_id: &str, opts: &AnalyzeOptions) -> Result<AnalyzeOutcome> {
    let manifest = store.require_sealed(run_id)?;
    let records = store.load_records(run_id)?;
    let corpus = load_and_verify_corpus(&manifest)?;
    let config_hash = manifest.config_hash();
    let provenance = |report: &mut Report, rest: Vec<String>| {
        let mut row = vec![manifest.run_id.clone(), manifest.corpus_hash.clone(), config_hash.clone()];
        row.extend(rest);
        report.push(row);
    };

    let scores = statement_scores(&records, opts.allow_partial)?;
    let pairs = model_language_pairs(&records);
    let models: Vec<String> = {
        let mut m: Vec<String> = pairs.iter().map(|(m, _)| m.clone()).collect();
        m.dedup();
        m
    };

    // Stance coordinates: per (model, language) the overall stance and the
    // eight issue positions on the left/right axis.
    let mut stance_report = Report::new(
        ReportKind::StanceCoords,
        &["run_id", "corpus_hash", "config_hash", "model", "language", "level", "issue", "value", "n_statements"],
    );
    let mut stance_rows = Vec::new();
    for (model, language) in &pairs {
        let overall = overall_stance(&scores, &corpus, model, *language)?;
        let labeled = corpus.statements().iter().filter(|s| !s.issue_stances.is_empty()).count();
        stance_rows.push(StanceRow {
            model: model.clone(),
            language: *language,
            scope: "overall".to_string(),
            score: StanceScore::aggregated(ScoreLevel::Overall, overall, labeled),
        });
        provenance(
            &mut stance_report,
            vec![
                model.clone(),
                language.to_string(),
                "overall".to_string(),
                String::new(),
                fmt_f64(overall),
                labeled.to_string(),
            ],
        );
        for issue_score in issue_scores(&scores, &corpus, model, *language)? {
            stance_rows.push(StanceRow {
                model: model.clone(),
                language: *language,
                scope: issue_score.issue.to_string(),
                score: StanceScore::aggregated(
                    ScoreLevel::Issue,
                    issue_score.left_right_value,
                    issue_score.n_statements,
                ),
            });
            provenance(
                &mut stance_report,
                vec![
                    model.clone(),
                    language.to_string(),
                    "issue".to_string(),
                    issue_score.issue.to_string(),
                    fmt_f64(issue_score.left_right_value),
                    issue_score.n_statements.to_string(),
                ],
            );
        }
    }

    // Kruskal-Wallis screens per model.
    let mut kw_report = Report::new(
        ReportKind::Kw,
        &["run_id", "corpus_hash", "config_hash", "model", "test", "issue", "language", "h", "dof", "p_value", "significant", "method", "note"],
    );
    let mut screens = BTreeMap::new();
    let shape = RandomShape {
        conditions_per_statement: crate::prompting::CONDITIONS_PER_STATEMENT,
        samples_per_condition: manifest.samples_per_condition,
    };
    for model in &models {
        let languages: Vec<Language> =
            pairs.iter().filter(|(m, _)| m == model).map(|(_, l)| *l).collect();
        let input = screen_scores(&scores, &corpus, model);
        if languages.len() < 2 {
            provenance(
                &mut kw_report,
                vec![
                    model.clone(),
                    "across_languages".to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    "skipped: fewer than two languages".to_string(),
                ],
            );
        }
        let screen = kw_language_screen(&input, shape, opts.alpha, manifest.seed)?;
        for entry in &screen.across_languages {
            if languages.len() < 2 {
                break;
            }
            provenance(
                &mut kw_report,
                vec![
                    model.clone(),
                    "across_languages".to_string(),
                    entry.issue.to_string(),
                    String::new(),
                    fmt_f64(entry.result.h),
                    entry.result.dof.to_string(),
                    fmt_f64(entry.result.p_value),
                    entry.significant.to_string(),
                    format!("{:?}", entry.result.method),
                    String::new(),
                ],
            );
        }
        for entry in &screen.vs_random {
            provenance(
                &mut kw_report,
                vec![
                    model.clone(),
                    "vs_random".to_string(),
                    entry.issue.to_string(),
                    entry.language.to_string(),
                    fmt_f64(entry.result.h),
                    entry.result.dof.to_string(),
                    fmt_f64(entry.result.p_value),
                    entry.significant.to_string(),
                    format!("{:?}", entry.result.method),
                    String::new(),
                ],
            );
        }
        for (issue, reason) in &screen.skipped {
            provenance(
                &mut kw_report,
                vec![
                    model.clone(),
                    "across_languages".to_string(),
                    issue.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("skipped: {reason}"),
                ],
            );
        }
        screens.insert(model.clone(), screen);
    }

    // Beta regression: overall stance and one fit per issue.
    let mut regression_report = Report::new(
        ReportKind::Regression,
        &["run_id", "corpus_hash", "config_hash", "response", "term", "estimate", "std_error", "ci_lo", "ci_hi", "p_value", "significant_at_5pct", "status"],
    );
    if opts.with_regression {
        let reference_model = opts
            .reference_model
            .clone()
            .or_else(|| models.iter().find(|m| *m == "Mixtral8x7B").cloned())
            .or_else(|| models.first().cloned())
            .ok_or_else(|| Error::Analysis("no models in run".to_string()))?;
        let mut targets = vec![RegressionTarget::Overall];
        targets.extend(PolicyIssue::ALL.map(RegressionTarget::Issue));
        for target in targets {
            let (rows, raw) = regression_dataset(&records, &corpus, target)?;
            if rows.is_empty() {
                provenance(
                    &mut regression_report,
                    vec![
                        target.to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        "skipped: no observations".to_string(),
                    ],
                );
                continue;
            }
            let squeezed: Vec<f64> = raw
                .iter()
                .map(|&y| squeeze_to_open_interval(y, manifest.samples_per_condition))
                .collect::<Result<_>>()?;
            let fit_result = build_design(&rows, &reference_model, Language::En)
                .and_then(|design| fit_beta_regression(&design, &squeezed));
            match fit_result {
                Ok(fit) => {
                    for coefficient in &fit.coefficients {
                        provenance(
                            &mut regression_report,
                            vec![
                                target.to_string(),
                                coefficient.name.clone(),
                                fmt_f64(coefficient.estimate),
                                fmt_f64(coefficient.std_error),
                                fmt_f64(coefficient.ci_lo),
                                fmt_f64(coefficient.ci_hi),
                                fmt_f64(coefficient.p_value),
                                (coefficient.p_value < 0.05).to_string(),
                                "ok".to_string(),
                            ],
                        );
                    }
                    provenance(
                        &mut regression_report,
                        vec![
                            target.to_string(),
                            "(phi)".to_string(),
                            fmt_f64(fit.phi),
                            fmt_f64(fit.phi_std_error),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            "ok".to_string(),
                        ],
                    );
                }
                Err(e) => {
                    provenance(
                        &mut regression_report,
                        vec![
                            target.to_string(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            format!("skipped: {e}"),
                        ],
                    );
                }
            }
        }
    }

    // Validity and significance shares, per model and language.
    let mut validity_report = Report::new(
        ReportKind::Validity,
        &["run_id", "corpus_hash", "config_hash", "model", "language", "share_valid_responses", "share_significant_stances"],
    );
    let params = BatteryParams {
        bootstrap_resamples: opts.bootstrap_resamples,
        alpha: opts.alpha,
        seed: manifest.seed,
    };
    let mut validity_rows = Vec::new();
    let validity = validity_by_pair(&records);
    for ((model, language), share_valid) in validity {
        let grid = build_grid(&records, &model, language);
        let share_significant = significance_share(&grid, &params)?;
        validity_rows.push(ValidityRow {
            model: model.clone(),
            language,
            share_valid,
            share_significant,
        });
        provenance(
            &mut validity_report,
            vec![
                model,
                language.to_string(),
                fmt_f64(share_valid),
                fmt_f64(share_significant),
            ],
        );
    }

    let reports = vec![
        store.write_report(run_id, ReportKind::StanceCoords.file_stem(), &stance_report.to_csv()?)?,
        store.write_report(run_id, ReportKind::Kw.file_stem(), &kw_report.to_csv()?)?,
        store.write_report(run_id, ReportKind::Regression.file_stem(), &regression_report.to_csv()?)?,
        store.write_report(run_id, ReportKind::Validity.file_stem(), &validity_report.to_csv()?)?,
    ];
    Ok(AnalyzeOutcome { reports, stance_rows, validity_rows, screens })
}

/// Outcome of building the two alignment datasets.
pub struct BuildAlignOutcome {
    pub left_path: PathBuf,
    pub right_path: PathBuf,
    pub ingest: IngestReport,
    pub pool_left: usize,
    pub pool_right: usize,
    pub left: PreferenceDataset,
    pub right: PreferenceDataset,
}

/// Compile the left- and right-leaning preference datasets from a manifesto
/// export. Both datasets share the seed, sentence sample, and template
/// assignment; only the preference direction differs.
#[allow(clippy::too_many_arguments)]
pub fn cmd_build_align(
    manifesto_path: &std::path::Path,
    output_dir: &std::path::Path,
    approach: AlignApproach,
    templates: &TemplateSet,
    rile: &RileDictionaries,
    table: &CodeStanceTable,
    seed: u64,
    per_leaning: usize,
) -> Result<BuildAlignOutcome> {
    let countries: Vec<String> =
        crate::aligndata::ENGLISH_OFFICIAL_COUNTRIES.iter().map(|s| s.to_string()).collect();
    let (sentences, ingest) = ingest_manifestos(manifesto_path, &countries)?;
    let pool = assign_leanings(&sentences, approach, rile, table);
    let pool_left = pool.iter().filter(|(_, l)| *l == crate::corpus::Leaning::Left).count();
    let pool_right = pool.len() - pool_left;
    let left = build_preference_dataset(
        &pool,
        templates,
        crate::corpus::Leaning::Left,
        approach,
        seed,
        per_leaning,
    )?;
    let right = build_preference_dataset(
        &pool,
        templates,
        crate::corpus::Leaning::Right,
        approach,
        seed,
        per_leaning,
    )?;
    std::fs::create_dir_all(output_dir)?;
    let left_path = output_dir.join(format!("align-{approach}-left.jsonl"));
    let right_path = output_dir.join(format!("align-{approach}-right.jsonl"));
    left.save(&left_path)?;
    right.save(&right_path)?;
    Ok(BuildAlignOutcome { left_path, right_path, ingest, pool_left, pool_right, left, right })
}

/// One scored open-ended cell.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenEndedRow {
    pub model: String,
    pub alignment: String,
    pub issue: PolicyIssue,
    pub aspect_term: String,
    pub side: crate::openended::AspectSide,
    pub po_a: Option<f64>,
    pub refusals: usize,
    pub judged: usize,
}

/// Outcome of the open-ended evaluation.
pub struct OpenEvalOutcome {
    pub rows: Vec<OpenEndedRow>,
    pub left_scores: Vec<LeftScore>,
    pub csv: String,
}

/// Generate opinionated statements per aspect prompt, judge them, and
/// aggregate aspect scores and per-issue left scores.
#[allow(clippy::too_many_arguments)]
pub fn cmd_open_eval(
    generator: &dyn Responder,
    generator_model: &str,
    judge: &dyn Responder,
    judge_model: &str,
    alignment_label: &str,
    table: &AspectTable,
    judge_template: &JudgeTemplate,
    samples: usize,
    temperature: f64,
    include_refusals: bool,
) -> Result<OpenEvalOutcome> {
    let issues = table.issues();
    let prompts = build_aspect_prompts(table, &issues);
    // cell -> (side, aspect term, verdicts)
    let mut cells: BTreeMap<(PolicyIssue, usize, crate::openended::AspectSide), (String, Vec<Option<JudgeVerdict>>)> =
        BTreeMap::new();
    for prompt in &prompts {
        let texts = generate_statements(generator, generator_model, prompt, samples, temperature)?;
        let entry = cells
            .entry(prompt.score_key())
            .or_insert_with(|| (prompt.aspect_term.clone(), Vec::new()));
        for (i, text) in texts.iter().enumerate() {
            let cell_tag = format!("{}|{i}", prompt.cell_id());
            let verdict =
                judge_stance(judge, judge_model, judge_template, text, &prompt.aspect_term, &cell_tag)?;
            entry.1.push(verdict);
        }
    }

    let mut rows = Vec::new();
    let mut per_issue: BTreeMap<PolicyIssue, Vec<(crate::openended::AspectSide, Option<f64>)>> =
        BTreeMap::new();
    for ((issue, _aspect_index, side), (term, verdicts)) in &cells {
        let score = aspect_score(verdicts, include_refusals);
        per_issue.entry(*issue).or_default().push((*side, score.po_a));
        rows.push(OpenEndedRow {
            model: generator_model.to_string(),
            alignment: alignment_label.to_string(),
            issue: *issue,
            aspect_term: term.clone(),
            side: *side,
            po_a: score.po_a,
            refusals: score.refusals,
            judged: verdicts.len(),
        });
    }
    let mut left_scores = Vec::new();
    for (&issue, cell_scores) in &per_issue {
        left_scores.push(left_score(issue, cell_scores)?);
    }

    let mut report = Report::new(
        ReportKind::OpenEnded,
        &["model", "alignment", "issue", "aspect", "side", "po_a", "left_score", "refusals", "judged"],
    );
    for row in &rows {
        let issue_left =
            left_scores.iter().find(|s| s.issue == row.issue).map(|s| s.value);
        report.push(vec![
            row.model.clone(),
            row.alignment.clone(),
            row.issue.to_string(),
            row.aspect_term.clone(),
            row.side.to_string(),
            fmt_opt_f64(row.po_a),
            fmt_opt_f64(issue_left),
            row.refusals.to_string(),
            row.judged.to_string(),
        ]);
    }
    Ok(OpenEvalOutcome { rows, left_scores, csv: report.to_csv()? })
}

/// One row of the run comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub run_id: String,
    pub model: String,
    pub language: Language,
    pub scope: String,
    pub value: f64,
    pub delta_vs_first: f64,
}

/// Juxtapose stance coordinates of two or more sealed runs over the same
/// corpus (e.g. unaligned vs left- and right-aligned variants). Deltas are
/// against the first run's per-(scope, language) mean.
pub fn cmd_compare(store: &RunStore, run_ids: &[String]) -> Result<(PathBuf, Vec<CompareRow>)> {
    if run_ids.len() < 2 {
        return Err(Error::Analysis("compare needs at least two runs".to_string()));
    }
    let manifests: Vec<RunManifest> =
        run_ids.iter().map(|id| store.require_sealed(id)).collect::<Result<_>>()?;
    let corpus_hash = &manifests[0].corpus_hash;
    for manifest in &manifests[1..] {
        if &manifest.corpus_hash != corpus_hash {
            return Err(Error::Analysis(format!(
                "runs `{}` and `{}` used different corpora; comparison would be meaningless",
                manifests[0].run_id, manifest.run_id
            )));
        }
    }

    // (scope, language) -> values of the first run (baseline).
    let mut all_rows: Vec<(String, StanceRow)> = Vec::new();
    for manifest in &manifests {
        let records = store.load_records(&manifest.run_id)?;
        let corpus = load_and_verify_corpus(manifest)?;
        let scores = statement_scores(&records, false)?;
        for (model, language) in model_language_pairs(&records) {
            let overall = overall_stance(&scores, &corpus, &model, language)?;
            all_rows.push((
                manifest.run_id.clone(),
                StanceRow {
                    model: model.clone(),
                    language,
                    scope: "overall".to_string(),
                    score: StanceScore::aggregated(ScoreLevel::Overall, overall, 0),
                },
            ));
            for issue_score in issue_scores(&scores, &corpus, &model, language)? {
                all_rows.push((
                    manifest.run_id.clone(),
                    StanceRow {
                        model: model.clone(),
                        language,
                        scope: issue_score.issue.to_string(),
                        score: StanceScore::aggregated(
                            ScoreLevel::Issue,
                            issue_score.left_right_value,
                            issue_score.n_statements,
                        ),
                    },
                ));
            }
        }
    }

    let first_run = &manifests[0].run_id;
    let mut baseline: BTreeMap<(String, Language), (f64, usize)> = BTreeMap::new();
    for (run_id, row) in &all_rows {
        if run_id == first_run {
            let entry = baseline.entry((row.scope.clone(), row.language)).or_insert((0.0, 0));
            entry.0 += row.score.value;
            entry.1 += 1;
        }
    }

    let mut rows = Vec::new();
    let mut report = Report::new(
        ReportKind::AlignComparison,
        &["run_id", "corpus_hash", "model", "language", "scope", "value", "delta_vs_first"],
    );
    for (run_id, row) in &all_rows {
        let base = baseline
            .get(&(row.scope.clone(), row.language))
            .map(|(sum, count)| sum / *count as f64)
            .unwrap_or(f64::NAN);
        let delta = row.score.value - base;
        rows.push(CompareRow {
            run_id: run_id.clone(),
            model: row.model.clone(),
            language: row.language,
            scope: row.scope.clone(),
            value: row.score.value,
            delta_vs_first: delta,
        });
        report.push(vec![
            run_id.clone(),
            corpus_hash.clone(),
            row.model.clone(),
            row.language.to_string(),
            row.scope.clone(),
            fmt_f64(row.score.value),
            fmt_f64(delta),
        ]);
    }

    let dir = store.root().join("comparisons");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}.csv", run_ids.join("__vs__")));
    std::fs::write(&path, report.to_csv()?)?;
    Ok((path, rows))
}
