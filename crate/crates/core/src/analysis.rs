//! Turning parsed opinion records into the analysis quantities: robustness
//! grids, statement/issue/overall stance scores, cross-language screen
//! inputs, regression datasets, and validity accounting.

use crate::corpus::{PolicyIssue, StatementSet};
use crate::error::{Error, Result};
use crate::gateway::{sample_responses, ConditionKey, Responder};
use crate::lang::Language;
use crate::parsing::{parse_response, LexiconSet, ParsedStance};
use crate::prompting::{enumerate_conditions, TemplateSet, CONDITIONS_PER_STATEMENT};
use crate::robustness::RunGrid;
use crate::run::OpinionRecord;
use crate::stance::{condition_score, opinion_issue, opinion_statement, IssueScore};
use crate::stats::design::RegressionRecord;
use crate::stats::kw::ScreenScores;
use std::collections::{BTreeMap, BTreeSet};

/// (model, language) pairs present in a record set, in stable order.
pub fn model_language_pairs(records: &[OpinionRecord]) -> Vec<(String, Language)> {
    let set: BTreeSet<(String, Language)> =
        records.iter().map(|r| (r.key.model.clone(), r.key.language)).collect();
    set.into_iter().collect()
}

/// Group one model-language's records into a robustness grid.
pub fn build_grid(records: &[OpinionRecord], model: &str, language: Language) -> RunGrid {
    let mut grid = RunGrid::new();
    for record in records {
        if record.key.model == model && record.key.language == language {
            grid.push(
                &record.key.statement_id,
                record.key.variant_kind,
                &record.key.template_id,
                record.key.answer_order,
                record.stance.value(),
            );
        }
    }
    grid
}

/// Statement-level opinion scores (variant polarity applied) for every
/// (model, language, statement).
#[derive(Debug, Clone, Default)]
pub struct StatementScores {
    scores: BTreeMap<(String, Language), BTreeMap<String, f64>>,
}

impl StatementScores {
    pub fn get(&self, model: &str, language: Language) -> Option<&BTreeMap<String, f64>> {
        self.scores.get(&(model.to_string(), language))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&(String, Language), &BTreeMap<String, f64>)> {
        self.scores.iter()
    }
}

/// Compute po per statement: mean over the 72 wording conditions of the
/// polarity-adjusted condition scores. `allow_partial` tolerates
/// incomplete grids (for exploratory analysis only).
pub fn statement_scores(
    records: &[OpinionRecord],
    allow_partial: bool,
) -> Result<StatementScores> {
    // (model, lang, statement) -> (variant, template, order) -> stances
    let mut cells: BTreeMap<
        (String, Language, String),
        BTreeMap<(crate::corpus::VariantKind, String, crate::prompting::AnswerOrder), Vec<ParsedStance>>,
    > = BTreeMap::new();
    for record in records {
        cells
            .entry((record.key.model.clone(), record.key.language, record.key.statement_id.clone()))
            .or_default()
            .entry((record.key.variant_kind, record.key.template_id.clone(), record.key.answer_order))
            .or_default()
            .push(record.stance);
    }
    let mut out = StatementScores::default();
    for ((model, language, statement_id), conditions) in cells {
        let mut condition_scores = Vec::with_capacity(CONDITIONS_PER_STATEMENT);
        for ((variant, _, _), stances) in &conditions {
            condition_scores.push(condition_score(stances, *variant)?);
        }
        let po = opinion_statement(&condition_scores, allow_partial).map_err(|e| match e {
            Error::PartialRun { completed, expected, .. } => Error::PartialRun {
                completed,
                expected,
                gaps: vec![format!("{model}|{language}|{statement_id}: incomplete condition grid")],
            },
            other => other,
        })?;
        out.scores.entry((model, language)).or_default().insert(statement_id, po);
    }
    Ok(out)
}

/// Issue-level scores for one model and language.
pub fn issue_scores(
    scores: &StatementScores,
    corpus: &StatementSet,
    model: &str,
    language: Language,
) -> Result<Vec<IssueScore>> {
    let by_statement = scores
        .get(model, language)
        .ok_or_else(|| Error::Analysis(format!("no scores for {model}/{language}")))?;
    let mut out = Vec::new();
    for issue in PolicyIssue::ALL {
        let mut pairs = Vec::new();
        for statement in corpus.filter_by_issue(issue) {
            if let (Some(&po), Some(stance)) =
                (by_statement.get(&statement.id), statement.stance_toward(issue))
            {
                pairs.push((po, stance));
            }
        }
        if !pairs.is_empty() {
            out.push(opinion_issue(&pairs, issue)?);
        }
    }
    Ok(out)
}

/// Overall left/right stance for one model and language: the mean over
/// issue-labeled statements of po weighted by the statement's leaning-sign
/// sum over the fixed eight issues.
pub fn overall_stance(
    scores: &StatementScores,
    corpus: &StatementSet,
    model: &str,
    language: Language,
) -> Result<f64> {
    let by_statement = scores
        .get(model, language)
        .ok_or_else(|| Error::Analysis(format!("no scores for {model}/{language}")))?;
    let mut values = Vec::new();
    for statement in corpus.statements() {
        if statement.issue_stances.is_empty() {
            continue;
        }
        if let Some(&po) = by_statement.get(&statement.id) {
            values.push(po * statement.leaning_sign_sum() / PolicyIssue::ALL.len() as f64);
        }
    }
    if values.is_empty() {
        return Err(Error::Analysis(format!(
            "no issue-labeled statement scores for {model}/{language}"
        )));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Per-issue, per-language statement score vectors (pro-issue oriented)
/// feeding the Kruskal-Wallis screen, for one model.
pub fn screen_scores(
    scores: &StatementScores,
    corpus: &StatementSet,
    model: &str,
) -> ScreenScores {
    let mut out: ScreenScores = BTreeMap::new();
    for issue in PolicyIssue::ALL {
        let statements = corpus.filter_by_issue(issue);
        if statements.is_empty() {
            continue;
        }
        let mut by_language: BTreeMap<Language, Vec<f64>> = BTreeMap::new();
        for (&(ref m, language), by_statement) in scores.pairs() {
            if m != model {
                continue;
            }
            let mut values = Vec::new();
            for statement in &statements {
                if let (Some(&po), Some(stance)) =
                    (by_statement.get(&statement.id), statement.stance_toward(issue))
                {
                    values.push(po * f64::from(stance));
                }
            }
            if !values.is_empty() {
                by_language.insert(language, values);
            }
        }
        if !by_language.is_empty() {
            out.insert(issue, by_language);
        }
    }
    out
}

/// Which response the regression models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionTarget {
    Overall,
    Issue(PolicyIssue),
}

impl std::fmt::Display for RegressionTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegressionTarget::Overall => f.write_str("overall"),
            RegressionTarget::Issue(issue) => write!(f, "{issue}"),
        }
    }
}

/// Assemble regression rows at the (model, language, statement, condition)
/// level: predictors from the record keys and statement flags, response in
/// [-1, 1] (callers squeeze it into (0,1) before fitting).
pub fn regression_dataset(
    records: &[OpinionRecord],
    corpus: &StatementSet,
    target: RegressionTarget,
) -> Result<(Vec<RegressionRecord>, Vec<f64>)> {
    // (model, lang, statement, condition cell) -> stances
    let mut cells: BTreeMap<(String, Language, String, String), (crate::corpus::VariantKind, Vec<ParsedStance>)> =
        BTreeMap::new();
    for record in records {
        let cell_id = format!(
            "{}|{}|{}",
            record.key.variant_kind, record.key.template_id, record.key.answer_order
        );
        cells
            .entry((
                record.key.model.clone(),
                record.key.language,
                record.key.statement_id.clone(),
                cell_id,
            ))
            .or_insert_with(|| (record.key.variant_kind, Vec::new()))
            .1
            .push(record.stance);
    }
    let mut rows = Vec::new();
    let mut responses = Vec::new();
    for ((model, language, statement_id, _), (variant, stances)) in cells {
        let Some(statement) = corpus.get(&statement_id) else {
            return Err(Error::Analysis(format!(
                "record references unknown statement `{statement_id}`"
            )));
        };
        let adjusted = condition_score(&stances, variant)?;
        let response = match target {
            RegressionTarget::Overall => {
                if statement.issue_stances.is_empty() {
                    continue;
                }
                adjusted * statement.leaning_sign_sum() / PolicyIssue::ALL.len() as f64
            }
            RegressionTarget::Issue(issue) => match statement.stance_toward(issue) {
                Some(stance) => adjusted * f64::from(stance),
                None => continue,
            },
        };
        rows.push(RegressionRecord {
            model,
            language,
            country_specific: Some(statement.country_specific),
            translated: statement.translated.get(&language).copied().map(Some).unwrap_or(None),
        });
        responses.push(response);
    }
    Ok((rows, responses))
}

/// Validity share per (model, language).
pub fn validity_by_pair(records: &[OpinionRecord]) -> Vec<((String, Language), f64)> {
    let mut grouped: BTreeMap<(String, Language), Vec<ParsedStance>> = BTreeMap::new();
    for record in records {
        grouped
            .entry((record.key.model.clone(), record.key.language))
            .or_default()
            .push(record.stance);
    }
    grouped
        .into_iter()
        .map(|(pair, stances)| {
            let share = crate::parsing::validity_share(&stances).unwrap_or(0.0);
            (pair, share)
        })
        .collect()
}

/// Run a probe entirely in memory: enumerate all conditions, query the
/// responder, parse, and return the records. The disk-backed pipeline in
/// [`crate::pipeline`] is equivalent but resumable; this path backs the
/// mock-model test harnesses.
#[allow(clippy::too_many_arguments)]
pub fn simulate_records(
    corpus: &StatementSet,
    templates: &TemplateSet,
    lexicons: &LexiconSet,
    responder: &dyn Responder,
    model: &str,
    languages: &[Language],
    samples_per_condition: usize,
    temperature: f64,
) -> Result<Vec<OpinionRecord>> {
    let mut records = Vec::new();
    for &language in languages {
        let lexicon = lexicons.get(language);
        for statement in corpus.statements() {
            for condition in enumerate_conditions(statement, language, templates)? {
                let key = ConditionKey {
                    model: model.to_string(),
                    language,
                    statement_id: statement.id.clone(),
                    variant_kind: condition.spec.variant_kind,
                    template_id: condition.spec.template_id.clone(),
                    answer_order: condition.spec.answer_order,
                };
                let responses = sample_responses(
                    responder,
                    &key,
                    &condition.text,
                    samples_per_condition,
                    temperature,
                )?;
                for response in responses {
                    records.push(OpinionRecord {
                        stance: parse_response(&response.text, lexicon),
                        sample_index: response.sample_index,
                        key: response.key,
                    });
                }
            }
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth;
    use crate::gateway::mock::{MockProfile, MockResponder, SimulatorConfig};

    fn mock_records(profile: MockProfile, n_statements: usize, n_samples: usize) -> (StatementSet, Vec<OpinionRecord>) {
        let corpus = synth::toy_corpus(n_statements, 1);
        let templates = TemplateSet::embedded_default();
        let lexicons = LexiconSet::embedded_default();
        let responder = MockResponder::with_corpus(profile, &corpus);
        let records = simulate_records(
            &corpus,
            &templates,
            &lexicons,
            &responder,
            "mock",
            &[Language::En, Language::De],
            n_samples,
            1.0,
        )
        .unwrap();
        (corpus, records)
    }

    #[test]
    fn record_counts_match_grid_arithmetic() {
        let (_, records) = mock_records(MockProfile::AlwaysAgree, 3, 5);
        // 3 statements x 72 conditions x 5 samples x 2 languages.
        assert_eq!(records.len(), 3 * 72 * 5 * 2);
    }

    #[test]
    fn always_agree_statement_scores_follow_polarity() {
        let (corpus, records) = mock_records(MockProfile::AlwaysAgree, 2, 4);
        let scores = statement_scores(&records, false).unwrap();
        let by_statement = scores.get("mock", Language::En).unwrap();
        // 48 of 72 conditions are positive-polarity (original + paraphrases),
        // 24 are negation/opposite: (48 - 24) / 72 = 1/3.
        for po in by_statement.values() {
            assert!((po - 1.0 / 3.0).abs() < 1e-12, "po = {po}");
        }
        let overall = overall_stance(&scores, &corpus, "mock", Language::En).unwrap();
        // Toy statements carry single labels; sign mix depends on the
        // rotation, but the magnitude is bounded by 1/3 / 8.
        assert!(overall.abs() <= 1.0 / 3.0 / 8.0 + 1e-12);
    }

    #[test]
    fn left_simulator_produces_negative_overall() {
        let (corpus, records) = mock_records(
            MockProfile::LeaningSimulator(SimulatorConfig::left_leaning(3.0, 7)),
            8,
            8,
        );
        let scores = statement_scores(&records, false).unwrap();
        for language in [Language::En, Language::De] {
            let overall = overall_stance(&scores, &corpus, "mock", language).unwrap();
            assert!(overall < 0.0, "{language}: {overall}");
        }
    }

    #[test]
    fn issue_scores_present_for_labeled_issues() {
        let (corpus, records) = mock_records(MockProfile::AlwaysAgree, 8, 3);
        let scores = statement_scores(&records, false).unwrap();
        let issues = issue_scores(&scores, &corpus, "mock", Language::En).unwrap();
        // The 8-statement toy corpus covers all eight issues once.
        assert_eq!(issues.len(), 8);
        for score in &issues {
            assert_eq!(score.n_statements, 1);
            assert!((-1.0..=1.0).contains(&score.left_right_value));
        }
    }

    #[test]
    fn screen_scores_are_issue_signed() {
        let (corpus, records) = mock_records(MockProfile::AlwaysAgree, 8, 3);
        let scores = statement_scores(&records, false).unwrap();
        let screen = screen_scores(&scores, &corpus, "mock");
        // Statement 5 has an against-stance label (idx 5 % 5 == 0): its
        // screen value must be the negated statement score.
        let stmt = &corpus.statements()[4];
        let issue = stmt.issue_stances[0].issue;
        assert_eq!(stmt.issue_stances[0].stance, -1);
        let po = scores.get("mock", Language::En).unwrap()[&stmt.id];
        let screen_value = screen[&issue][&Language::En][0];
        assert!((screen_value + po).abs() < 1e-12);
    }

    #[test]
    fn partial_grid_rejected_unless_allowed() {
        let (_, mut records) = mock_records(MockProfile::AlwaysAgree, 2, 3);
        // Drop one whole condition.
        let victim = records[0].key.tag();
        records.retain(|r| r.key.tag() != victim);
        assert!(matches!(
            statement_scores(&records, false),
            Err(Error::PartialRun { .. })
        ));
        assert!(statement_scores(&records, true).is_ok());
    }

    #[test]
    fn regression_dataset_filters_by_target() {
        let (corpus, records) = mock_records(MockProfile::AlwaysAgree, 8, 3);
        let (rows, responses) =
            regression_dataset(&records, &corpus, RegressionTarget::Overall).unwrap();
        assert_eq!(rows.len(), responses.len());
        // 8 labeled statements x 72 conditions x 2 languages.
        assert_eq!(rows.len(), 8 * 72 * 2);
        let issue = PolicyIssue::ExpandedEnvironmentalProtection;
        let (issue_rows, _) =
            regression_dataset(&records, &corpus, RegressionTarget::Issue(issue)).unwrap();
        // One toy statement carries that issue.
        assert_eq!(issue_rows.len(), 72 * 2);
        assert!(issue_rows.iter().all(|r| r.translated.is_some()));
    }

    #[test]
    fn validity_is_one_for_lexicon_bound_mocks() {
        let (_, records) = mock_records(MockProfile::UniformRandom { seed: 5 }, 2, 4);
        for ((_, _), share) in validity_by_pair(&records) {
            assert_eq!(share, 1.0);
        }
    }
}
