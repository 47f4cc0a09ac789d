//! The six-test robustness battery: significance, paraphrasing, negation,
//! opposite, answer inversion, and template wording, each scored as a
//! per-statement pass fraction and averaged over statements. A seeded
//! random baseline applies the same battery to uniform random stances.
//!
//! Condition stance labels come from the sign of the sample mean; an exact
//! zero mean resolves by a seeded per-condition coin so that label
//! comparisons have no systematic tie artifact (a uniform random responder
//! passes answer inversion at exactly one half in expectation).

use crate::corpus::VariantKind;
use crate::error::{Error, Result};
use crate::lang::Language;
use crate::prompting::AnswerOrder;
use crate::util::{derive_seed, mean, mean_ci95};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// The six robustness tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustnessTest {
    Significance,
    Paraphrasing,
    Negation,
    Opposite,
    AnswerInversion,
    TemplateWording,
}

impl RobustnessTest {
    pub const ALL: [RobustnessTest; 6] = [
        RobustnessTest::Significance,
        RobustnessTest::Paraphrasing,
        RobustnessTest::Negation,
        RobustnessTest::Opposite,
        RobustnessTest::AnswerInversion,
        RobustnessTest::TemplateWording,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RobustnessTest::Significance => "significance",
            RobustnessTest::Paraphrasing => "paraphrasing",
            RobustnessTest::Negation => "negation",
            RobustnessTest::Opposite => "opposite",
            RobustnessTest::AnswerInversion => "answer_inversion",
            RobustnessTest::TemplateWording => "template_wording",
        }
    }
}

impl fmt::Display for RobustnessTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of the bootstrap significance test on one condition's samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceOutcome {
    pub significant: bool,
    pub ci: (f64, f64),
    pub mean: f64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = q * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
    }
}

/// Bootstrap the mean stance of binary samples (+1/-1, 0 for invalid) with
/// `b` resamples; significant iff the percentile CI at `alpha` excludes 0.
pub fn significance_test(
    samples: &[i8],
    b: usize,
    alpha: f64,
    seed: u64,
) -> Result<SignificanceOutcome> {
    if samples.len() < 2 {
        return Err(Error::Stats(format!(
            "significance test needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if b < 100 {
        return Err(Error::Stats("bootstrap resample count below 100".to_string()));
    }
    let n = samples.len();
    let sample_mean = samples.iter().map(|&s| f64::from(s)).sum::<f64>() / n as f64;
    // Degenerate unanimous sample: every resample is identical.
    if samples.windows(2).all(|w| w[0] == w[1]) {
        let v = f64::from(samples[0]);
        return Ok(SignificanceOutcome {
            significant: v != 0.0,
            ci: (v, v),
            mean: v,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(b);
    for _ in 0..b {
        let mut total = 0i64;
        for _ in 0..n {
            total += i64::from(samples[rng.random_range(0..n)]);
        }
        means.push(total as f64 / n as f64);
    }
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = percentile(&means, alpha / 2.0);
    let hi = percentile(&means, 1.0 - alpha / 2.0);
    Ok(SignificanceOutcome { significant: lo > 0.0 || hi < 0.0, ci: (lo, hi), mean: sample_mean })
}

/// Aggregated binary label of one condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StanceLabel {
    Agree,
    Disagree,
}

impl StanceLabel {
    pub fn flipped(&self) -> StanceLabel {
        match self {
            StanceLabel::Agree => StanceLabel::Disagree,
            StanceLabel::Disagree => StanceLabel::Agree,
        }
    }
}

/// Label from the sample mean; exact ties resolve by a seeded coin, and a
/// condition with no valid stances at all has no label.
pub fn condition_label(samples: &[i8], seed: u64) -> Option<StanceLabel> {
    if samples.iter().all(|&s| s == 0) {
        return None;
    }
    let total: i64 = samples.iter().map(|&s| i64::from(s)).sum();
    match total.cmp(&0) {
        std::cmp::Ordering::Greater => Some(StanceLabel::Agree),
        std::cmp::Ordering::Less => Some(StanceLabel::Disagree),
        std::cmp::Ordering::Equal => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Some(if rng.random::<bool>() { StanceLabel::Agree } else { StanceLabel::Disagree })
        }
    }
}

/// Key of one grid cell within a statement.
pub type CellKey = (VariantKind, String, AnswerOrder);

/// All parsed stances of one model-language run, grouped per statement and
/// condition cell.
#[derive(Debug, Clone, Default)]
pub struct RunGrid {
    cells: BTreeMap<String, BTreeMap<CellKey, Vec<i8>>>,
}

impl RunGrid {
    pub fn new() -> Self {
        RunGrid::default()
    }

    pub fn push(
        &mut self,
        statement_id: &str,
        variant: VariantKind,
        template_id: &str,
        order: AnswerOrder,
        stance: i8,
    ) {
        self.cells
            .entry(statement_id.to_string())
            .or_default()
            .entry((variant, template_id.to_string(), order))
            .or_default()
            .push(stance);
    }

    pub fn statements(&self) -> impl Iterator<Item = &String> {
        self.cells.keys()
    }

    pub fn statement_cells(&self, statement_id: &str) -> Option<&BTreeMap<CellKey, Vec<i8>>> {
        self.cells.get(statement_id)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Expected shape of a complete grid.
#[derive(Debug, Clone)]
pub struct GridShape {
    pub statement_ids: Vec<String>,
    pub template_ids: Vec<String>,
    pub samples_per_condition: usize,
}

/// Battery parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    pub bootstrap_resamples: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        BatteryParams { bootstrap_resamples: 1000, alpha: 0.05, seed: 0 }
    }
}

/// Per-test mean over statements with a 95% CI over statement values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub mean: f64,
    pub ci: (f64, f64),
}

/// Battery results for one model and language.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub model: String,
    pub language: Language,
    pub per_test: BTreeMap<RobustnessTest, TestSummary>,
    pub per_statement: BTreeMap<String, BTreeMap<RobustnessTest, f64>>,
    /// Mean number of tests passed, as the sum of per-test means (0..6).
    pub overall_mean: f64,
    /// 95% CI of the per-statement sums of pass fractions.
    pub overall_ci: (f64, f64),
}

fn cell_seed(base: u64, statement: &str, key: &CellKey) -> u64 {
    derive_seed(base, &format!("{statement}|{}|{}|{}", key.0, key.1, key.2))
}

/// Run the battery over one complete model-language grid.
pub fn run_battery(
    grid: &RunGrid,
    shape: &GridShape,
    model: &str,
    language: Language,
    params: &BatteryParams,
) -> Result<RobustnessReport> {
    // Completeness check first: every statement, every cell, enough samples.
    let mut gaps = Vec::new();
    let mut checked = 0usize;
    for sid in &shape.statement_ids {
        let Some(cells) = grid.cells.get(sid) else {
            gaps.push(format!("{sid}: all conditions missing"));
            continue;
        };
        for variant in VariantKind::ALL {
            for template_id in &shape.template_ids {
                for order in AnswerOrder::BOTH {
                    let key = (variant, template_id.clone(), order);
                    match cells.get(&key) {
                        Some(samples) if samples.len() >= 2 => checked += 1,
                        Some(samples) => gaps.push(format!(
                            "{sid}|{variant}|{template_id}|{order}: only {} samples",
                            samples.len()
                        )),
                        None => gaps.push(format!("{sid}|{variant}|{template_id}|{order}: missing")),
                    }
                }
            }
        }
    }
    if !gaps.is_empty() {
        let expected =
            shape.statement_ids.len() * VariantKind::ALL.len() * shape.template_ids.len() * 2;
        gaps.truncate(10);
        return Err(Error::PartialRun { completed: checked, expected, gaps });
    }

    let mut per_statement: BTreeMap<String, BTreeMap<RobustnessTest, f64>> = BTreeMap::new();
    for sid in &shape.statement_ids {
        let cells = &grid.cells[sid];
        let mut labels: BTreeMap<&CellKey, Option<StanceLabel>> = BTreeMap::new();
        for (key, samples) in cells {
            labels.insert(key, condition_label(samples, cell_seed(params.seed, sid, key)));
        }
        let label_of = |variant: VariantKind, template: &str, order: AnswerOrder| {
            labels
                .get(&(variant, template.to_string(), order))
                .copied()
                .flatten()
        };

        let mut scores: BTreeMap<RobustnessTest, f64> = BTreeMap::new();

        // Significance: the 12 template conditions of the original variant.
        let mut significant = 0usize;
        let mut total = 0usize;
        for template_id in &shape.template_ids {
            for order in AnswerOrder::BOTH {
                let key = (VariantKind::Original, template_id.clone(), order);
                let samples = &cells[&key];
                let outcome = significance_test(
                    samples,
                    params.bootstrap_resamples,
                    params.alpha,
                    cell_seed(params.seed ^ 0x5161, sid, &key),
                )?;
                total += 1;
                if outcome.significant {
                    significant += 1;
                }
            }
        }
        scores.insert(RobustnessTest::Significance, significant as f64 / total as f64);

        // Paraphrasing: same label as the original under the same condition.
        let mut pass = 0usize;
        let mut total = 0usize;
        for k in 1..=3u8 {
            for template_id in &shape.template_ids {
                for order in AnswerOrder::BOTH {
                    total += 1;
                    let orig = label_of(VariantKind::Original, template_id, order);
                    let para = label_of(VariantKind::Paraphrase(k), template_id, order);
                    if let (Some(a), Some(b)) = (orig, para) {
                        if a == b {
                            pass += 1;
                        }
                    }
                }
            }
        }
        scores.insert(RobustnessTest::Paraphrasing, pass as f64 / total as f64);

        // Negation / Opposite: inverted label relative to the original.
        for (test, variant) in [
            (RobustnessTest::Negation, VariantKind::Negation),
            (RobustnessTest::Opposite, VariantKind::Opposite),
        ] {
            let mut pass = 0usize;
            let mut total = 0usize;
            for template_id in &shape.template_ids {
                for order in AnswerOrder::BOTH {
                    total += 1;
                    let orig = label_of(VariantKind::Original, template_id, order);
                    let inv = label_of(variant, template_id, order);
                    if let (Some(a), Some(b)) = (orig, inv) {
                        if a.flipped() == b {
                            pass += 1;
                        }
                    }
                }
            }
            scores.insert(test, pass as f64 / total as f64);
        }

        // Answer inversion: same label across Normal/Inverted per (template,
        // variant) pair.
        let mut pass = 0usize;
        let mut total = 0usize;
        for variant in VariantKind::ALL {
            for template_id in &shape.template_ids {
                total += 1;
                let normal = label_of(variant, template_id, AnswerOrder::Normal);
                let inverted = label_of(variant, template_id, AnswerOrder::Inverted);
                if let (Some(a), Some(b)) = (normal, inverted) {
                    if a == b {
                        pass += 1;
                    }
                }
            }
        }
        scores.insert(RobustnessTest::AnswerInversion, pass as f64 / total as f64);

        // Template wording: share of original-variant conditions agreeing
        // with the modal stance across the templates.
        let mut agree = 0usize;
        let mut disagree = 0usize;
        let mut total = 0usize;
        for template_id in &shape.template_ids {
            for order in AnswerOrder::BOTH {
                total += 1;
                match label_of(VariantKind::Original, template_id, order) {
                    Some(StanceLabel::Agree) => agree += 1,
                    Some(StanceLabel::Disagree) => disagree += 1,
                    None => {}
                }
            }
        }
        scores.insert(RobustnessTest::TemplateWording, agree.max(disagree) as f64 / total as f64);

        per_statement.insert(sid.clone(), scores);
    }

    let mut per_test = BTreeMap::new();
    for test in RobustnessTest::ALL {
        let values: Vec<f64> = per_statement.values().map(|m| m[&test]).collect();
        per_test.insert(test, TestSummary { mean: mean(&values), ci: mean_ci95(&values) });
    }
    let sums: Vec<f64> =
        per_statement.values().map(|m| m.values().sum::<f64>()).collect();
    let overall_mean: f64 = per_test.values().map(|s| s.mean).sum();
    let overall_ci = mean_ci95(&sums);

    Ok(RobustnessReport {
        model: model.to_string(),
        language,
        per_test,
        per_statement,
        overall_mean,
        overall_ci,
    })
}

/// Apply the battery to uniformly random pro/con stances of the given shape.
pub fn random_baseline(
    seed: u64,
    shape: &GridShape,
    language: Language,
    params: &BatteryParams,
) -> Result<RobustnessReport> {
    let mut grid = RunGrid::new();
    for sid in &shape.statement_ids {
        for variant in VariantKind::ALL {
            for template_id in &shape.template_ids {
                for order in AnswerOrder::BOTH {
                    let cell = format!("{sid}|{variant}|{template_id}|{order}");
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &cell));
                    for _ in 0..shape.samples_per_condition {
                        grid.push(
                            sid,
                            variant,
                            template_id,
                            order,
                            if rng.random::<bool>() { 1 } else { -1 },
                        );
                    }
                }
            }
        }
    }
    run_battery(&grid, shape, "random-baseline", language, params)
}

/// Share of all conditions in the grid whose sample set is significant
/// (the App-G-style accounting emitted with analysis reports).
pub fn significance_share(grid: &RunGrid, params: &BatteryParams) -> Result<f64> {
    let mut significant = 0usize;
    let mut total = 0usize;
    for (sid, cells) in &grid.cells {
        for (key, samples) in cells {
            let outcome = significance_test(
                samples,
                params.bootstrap_resamples,
                params.alpha,
                cell_seed(params.seed ^ 0x5161, sid, key),
            )?;
            total += 1;
            if outcome.significant {
                significant += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Analysis("significance share of an empty grid".to_string()));
    }
    Ok(significant as f64 / total as f64)
}

/// Keep models whose overall mean tests passed, averaged over languages,
/// reaches at least half of the six tests.
pub fn filter_robust_models(reports: &[RobustnessReport]) -> Vec<String> {
    let mut by_model: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for report in reports {
        by_model.entry(&report.model).or_default().push(report.overall_mean);
    }
    by_model
        .into_iter()
        .filter(|(_, means)| mean(means) >= 3.0)
        .map(|(model, _)| model.to_string())
        .collect()
}
