//! Preference-pair alignment datasets from annotated manifesto corpora.
//!
//! Two routes assign a left/right leaning to a manifesto sentence: the RiLe
//! code dictionaries, or the policy-issue annotation table combined with
//! the fixed issue leanings. Sentences are sampled per leaning, inserted
//! into English instruction templates in both answer orders, and emitted as
//! (prompt, chosen, rejected) records ready for preference-optimization
//! trainers.

use crate::corpus::{IssueStance, Leaning};
use crate::error::{Error, Result};
use crate::lang::Language;
use crate::prompting::{render_text, AnswerOrder, TemplateSet};
use crate::util::sha256_hex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

pub mod synth;

/// Countries whose manifestos are originally English.
pub const ENGLISH_OFFICIAL_COUNTRIES: [&str; 7] = [
    "United States",
    "Canada",
    "United Kingdom",
    "South Africa",
    "Australia",
    "New Zealand",
    "Ireland",
];

/// Sentences shorter than this (in word tokens) are dropped.
pub const MIN_SENTENCE_WORDS: usize = 5;

/// One annotated quasi-sentence from a manifesto corpus export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub id: String,
    pub text: String,
    pub marpor_code: String,
    pub manifesto_id: String,
    pub country: String,
    pub original_language: String,
}

/// Ingest accounting: what was kept and why rows were dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub skipped_malformed: usize,
    pub skipped_language: usize,
    pub skipped_country: usize,
    pub skipped_short: usize,
    pub skipped_not_sentence: usize,
}

fn word_count(text: &str) -> usize {
    text.split_whitespace().filter(|t| t.chars().any(char::is_alphanumeric)).count()
}

fn is_full_sentence(text: &str) -> bool {
    let trimmed = text.trim_end_matches(['"', '\'', ')', ']', '\u{201d}', '\u{2019}']);
    trimmed.ends_with(['.', '!', '?', '\u{2026}'])
}

/// Read a delimited manifesto export (columns: text, cmp_code, country,
/// language, manifesto_id), keeping full English-original sentences of at
/// least five words from the given countries. Malformed rows are skipped
/// and counted, not fatal.
pub fn ingest_manifestos(
    path: &Path,
    countries: &[String],
) -> Result<(Vec<AnnotatedSentence>, IngestReport)> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Align(format!("cannot open {}: {e}", path.display())))?;
    ingest_manifestos_from_reader(file, countries)
}

#[derive(Debug, Deserialize)]
struct ManifestoRow {
    text: String,
    cmp_code: String,
    country: String,
    language: String,
    manifesto_id: String,
}

pub fn ingest_manifestos_from_reader(
    reader: impl std::io::Read,
    countries: &[String],
) -> Result<(Vec<AnnotatedSentence>, IngestReport)> {
    let country_set: BTreeSet<String> = countries.iter().map(|c| c.to_lowercase()).collect();
    let mut csv_reader = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let mut report = IngestReport::default();
    let mut sentences = Vec::new();
    for (row_idx, row) in csv_reader.deserialize::<ManifestoRow>().enumerate() {
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                report.skipped_malformed += 1;
                continue;
            }
        };
        let lang = row.language.trim().to_lowercase();
        if lang != "english" && lang != "en" {
            report.skipped_language += 1;
            continue;
        }
        if !country_set.contains(&row.country.trim().to_lowercase()) {
            report.skipped_country += 1;
            continue;
        }
        if word_count(&row.text) < MIN_SENTENCE_WORDS {
            report.skipped_short += 1;
            continue;
        }
        if !is_full_sentence(&row.text) {
            report.skipped_not_sentence += 1;
            continue;
        }
        report.accepted += 1;
        sentences.push(AnnotatedSentence {
            id: format!("{}:{row_idx}", row.manifesto_id),
            text: row.text.trim().to_string(),
            marpor_code: row.cmp_code.trim().to_string(),
            manifesto_id: row.manifesto_id,
            country: row.country,
            original_language: row.language,
        });
    }
    Ok((sentences, report))
}

/// The right/left code dictionaries of the RiLe scheme, as configuration.
#[derive(Debug, Clone)]
pub struct RileDictionaries {
    right: BTreeSet<String>,
    left: BTreeSet<String>,
    source: String,
}

#[derive(Deserialize)]
struct RileFile {
    right: Vec<String>,
    left: Vec<String>,
}

impl RileDictionaries {
    pub fn from_toml(content: &str) -> Result<Self> {
        let parsed: RileFile =
            toml::from_str(content).map_err(|e| Error::Align(format!("rile config: {e}")))?;
        let right: BTreeSet<String> = parsed.right.into_iter().collect();
        let left: BTreeSet<String> = parsed.left.into_iter().collect();
        if let Some(dup) = right.intersection(&left).next() {
            return Err(Error::Align(format!("code `{dup}` in both rile dictionaries")));
        }
        Ok(RileDictionaries { right, left, source: content.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| Error::Align(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&content)
    }

    pub fn embedded_default() -> Self {
        Self::from_toml(include_str!("../assets/rile_codes.toml"))
            .expect("embedded rile dictionaries are valid")
    }

    pub fn content_hash(&self) -> String {
        sha256_hex(self.source.as_bytes())
    }
}

/// Left/Right membership of a code in the RiLe dictionaries; None excludes
/// the sentence from the pool.
pub fn rile_leaning(code: &str, dict: &RileDictionaries) -> Option<Leaning> {
    if dict.right.contains(code) {
        Some(Leaning::Right)
    } else if dict.left.contains(code) {
        Some(Leaning::Left)
    } else {
        None
    }
}

/// Annotation table: manifesto code -> policy-issue stances.
#[derive(Debug, Clone)]
pub struct CodeStanceTable {
    codes: BTreeMap<String, Vec<IssueStance>>,
    pub agreement_alpha: Option<f64>,
    source: String,
}

#[derive(Deserialize)]
struct AnnotationEntry {
    code: String,
    labels: Vec<IssueStance>,
}

#[derive(Deserialize)]
struct AnnotationFile {
    #[serde(default)]
    agreement_alpha: Option<f64>,
    codes: Vec<AnnotationEntry>,
}

impl CodeStanceTable {
    pub fn from_toml(content: &str) -> Result<Self> {
        let parsed: AnnotationFile =
            toml::from_str(content).map_err(|e| Error::Align(format!("annotation table: {e}")))?;
        let mut codes = BTreeMap::new();
        for entry in parsed.codes {
            for label in &entry.labels {
                if label.stance != 1 && label.stance != -1 {
                    return Err(Error::Align(format!(
                        "code `{}`: stance must be +1 or -1",
                        entry.code
                    )));
                }
            }
            if codes.insert(entry.code.clone(), entry.labels).is_some() {
                return Err(Error::Align(format!("duplicate code `{}` in table", entry.code)));
            }
        }
        Ok(CodeStanceTable { codes, agreement_alpha: parsed.agreement_alpha, source: content.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| Error::Align(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&content)
    }

    pub fn embedded_default() -> Self {
        Self::from_toml(include_str!("../assets/annotation_table.toml"))
            .expect("embedded annotation table is valid")
    }

    pub fn labels(&self, code: &str) -> &[IssueStance] {
        self.codes.get(code).map_or(&[], Vec::as_slice)
    }

    pub fn content_hash(&self) -> String {
        sha256_hex(self.source.as_bytes())
    }
}

/// Leaning of a code via the annotation table and the fixed issue leanings:
/// a +1 stance toward a right issue (or -1 toward a left issue) is a Right
/// statement, and vice versa. Codes whose labels point in both directions
/// are excluded (None), as are unmapped codes.
pub fn issue_leaning_from_annotation(code: &str, table: &CodeStanceTable) -> Option<Leaning> {
    let labels = table.labels(code);
    if labels.is_empty() {
        return None;
    }
    let mut directions = BTreeSet::new();
    for label in labels {
        let direction = if label.stance > 0 {
            label.issue.leaning()
        } else {
            label.issue.leaning().flipped()
        };
        directions.insert(direction);
    }
    if directions.len() == 1 {
        directions.into_iter().next()
    } else {
        None
    }
}

/// Which leaning-assignment route built a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignApproach {
    Rile,
    PolicyIssue,
}

impl std::fmt::Display for AlignApproach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AlignApproach::Rile => "rile",
            AlignApproach::PolicyIssue => "policy_issue",
        })
    }
}

/// Metadata carried by every preference record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetadata {
    pub leaning: Leaning,
    pub approach: AlignApproach,
    pub code: String,
    pub sentence_id: String,
    pub template_id: String,
    pub order: AnswerOrder,
}

/// One preference-optimization training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub metadata: PairMetadata,
}

/// A compiled alignment dataset for one target leaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceDataset {
    pub target: Leaning,
    pub approach: AlignApproach,
    pub pairs: Vec<PreferencePair>,
}

impl PreferenceDataset {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for pair in &self.pairs {
            out.push_str(&serde_json::to_string(pair)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()?)?;
        Ok(())
    }
}

/// Sentences per leaning sampled into a dataset.
pub const SENTENCES_PER_LEANING: usize = 5_000;

/// Deterministic base assignment shared by the Left and Right datasets of
/// one seed: which sentences are sampled and which template each one gets.
struct BaseAssignment<'a> {
    sentence: &'a AnnotatedSentence,
    leaning: Leaning,
    template_idx: usize,
}

fn sample_base<'a>(
    pool: &[(&'a AnnotatedSentence, Leaning)],
    per_leaning: usize,
    n_templates: usize,
    seed: u64,
) -> Result<Vec<BaseAssignment<'a>>> {
    let mut left: Vec<&AnnotatedSentence> =
        pool.iter().filter(|(_, l)| *l == Leaning::Left).map(|(s, _)| *s).collect();
    let mut right: Vec<&AnnotatedSentence> =
        pool.iter().filter(|(_, l)| *l == Leaning::Right).map(|(s, _)| *s).collect();
    if left.len() < per_leaning || right.len() < per_leaning {
        return Err(Error::Align(format!(
            "insufficient pool: need {per_leaning} per leaning, have {} left and {} right",
            left.len(),
            right.len()
        )));
    }
    // Deterministic order before the seeded shuffle.
    left.sort_by(|a, b| a.id.cmp(&b.id));
    right.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    left.shuffle(&mut rng);
    right.shuffle(&mut rng);
    let mut base = Vec::with_capacity(per_leaning * 2);
    for sentence in left.into_iter().take(per_leaning) {
        base.push(BaseAssignment {
            sentence,
            leaning: Leaning::Left,
            template_idx: rng.random_range(0..n_templates),
        });
    }
    for sentence in right.into_iter().take(per_leaning) {
        base.push(BaseAssignment {
            sentence,
            leaning: Leaning::Right,
            template_idx: rng.random_range(0..n_templates),
        });
    }
    Ok(base)
}

/// Build one alignment dataset: sample `per_leaning` sentences of each
/// leaning, insert each into one randomly chosen English template, emit
/// both answer orders. In the Left dataset, agreement is preferred for
/// Left sentences and disagreement for Right sentences; the Right dataset
/// mirrors this. The same seed yields the same sentences and templates for
/// both targets, with all preferences flipped.
pub fn build_preference_dataset(
    pool: &[(&AnnotatedSentence, Leaning)],
    templates: &TemplateSet,
    target: Leaning,
    approach: AlignApproach,
    seed: u64,
    per_leaning: usize,
) -> Result<PreferenceDataset> {
    let english = templates.for_language(Language::En);
    if english.is_empty() {
        return Err(Error::Align("no English templates loaded".to_string()));
    }
    let base = sample_base(pool, per_leaning, english.len(), seed)?;
    let mut pairs = Vec::with_capacity(base.len() * 2);
    for assignment in &base {
        let template = &english[assignment.template_idx];
        let prefer_agree = assignment.leaning == target;
        for order in AnswerOrder::BOTH {
            let prompt = render_text(template, &assignment.sentence.text, order);
            let (chosen, rejected) = if prefer_agree {
                (template.agree_term.clone(), template.disagree_term.clone())
            } else {
                (template.disagree_term.clone(), template.agree_term.clone())
            };
            pairs.push(PreferencePair {
                prompt,
                chosen,
                rejected,
                metadata: PairMetadata {
                    leaning: assignment.leaning,
                    approach,
                    code: assignment.sentence.marpor_code.clone(),
                    sentence_id: assignment.sentence.id.clone(),
                    template_id: template.id.clone(),
                    order,
                },
            });
        }
    }
    Ok(PreferenceDataset { target, approach, pairs })
}

/// Assign leanings to sentences with the chosen approach, dropping
/// unassignable ones.
pub fn assign_leanings<'a>(
    sentences: &'a [AnnotatedSentence],
    approach: AlignApproach,
    rile: &RileDictionaries,
    table: &CodeStanceTable,
) -> Vec<(&'a AnnotatedSentence, Leaning)> {
    sentences
        .iter()
        .filter_map(|s| {
            let leaning = match approach {
                AlignApproach::Rile => rile_leaning(&s.marpor_code, rile),
                AlignApproach::PolicyIssue => issue_leaning_from_annotation(&s.marpor_code, table),
            };
            leaning.map(|l| (s, l))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PolicyIssue;

    fn sentence(id: &str, code: &str, words: usize) -> AnnotatedSentence {
        AnnotatedSentence {
            id: id.to_string(),
            text: format!("{}.", vec!["policy"; words].join(" ")),
            marpor_code: code.to_string(),
            manifesto_id: "m1".to_string(),
            country: "Canada".to_string(),
            original_language: "english".to_string(),
        }
    }

    #[test]
    fn ingest_filters_by_length_language_country() {
        let csv = "\
text,cmp_code,country,language,manifesto_id
\"We will expand the public health system.\",504,Canada,english,m1
\"Too short sentence here.\",504,Canada,english,m1
\"Der Staat soll die Wirtschaft umfassend regulieren.\",403,Germany,german,m2
\"A perfectly fine sentence about lowering taxes everywhere.\",414,Austria,english,m3
\"Fund schools properly across all regions\",506,Canada,english,m1
\"We support strong and effective market regulation everywhere.\",403,United Kingdom,english,m4
";
        let countries: Vec<String> =
            ENGLISH_OFFICIAL_COUNTRIES.iter().map(|s| s.to_string()).collect();
        let (sentences, report) =
            ingest_manifestos_from_reader(csv.as_bytes(), &countries).unwrap();
        assert_eq!(sentences.len(), 2);
        assert_eq!(report.accepted, 2);
        assert_eq!(report.skipped_short, 1); // "Too short sentence here."
        assert_eq!(report.skipped_language, 1); // German manifesto
        assert_eq!(report.skipped_country, 1); // Austria
        assert_eq!(report.skipped_not_sentence, 1); // no terminal punctuation
    }

    #[test]
    fn four_word_quasi_sentence_excluded() {
        let csv = "text,cmp_code,country,language,manifesto_id\n\
                   \"Only four words here.\",504,Canada,english,m1\n";
        let countries = vec!["Canada".to_string()];
        let (sentences, report) =
            ingest_manifestos_from_reader(csv.as_bytes(), &countries).unwrap();
        assert!(sentences.is_empty());
        assert_eq!(report.skipped_short, 1);
    }

    #[test]
    fn rile_membership() {
        let dict = RileDictionaries::embedded_default();
        assert_eq!(rile_leaning("401", &dict), Some(Leaning::Right));
        assert_eq!(rile_leaning("504", &dict), Some(Leaning::Left));
        assert_eq!(rile_leaning("000", &dict), None);
        assert_eq!(rile_leaning("totally-unknown", &dict), None);
    }

    #[test]
    fn annotation_table_reference_rows() {
        let table = CodeStanceTable::embedded_default();
        // 401 -> liberal economic policy +1 -> Right.
        assert_eq!(issue_leaning_from_annotation("401", &table), Some(Leaning::Right));
        // 603 -> liberal society -1: against a left issue -> Right.
        assert_eq!(issue_leaning_from_annotation("603", &table), Some(Leaning::Right));
        // 402 -> liberal economic policy +1 (Right) and restrictive
        // financial policy -1 (Left): conflicting -> excluded.
        assert_eq!(issue_leaning_from_annotation("402", &table), None);
        // Unmapped code.
        assert_eq!(issue_leaning_from_annotation("999", &table), None);
        assert_eq!(table.agreement_alpha, Some(0.718));
    }

    #[test]
    fn annotation_labels_match_expectations() {
        let table = CodeStanceTable::embedded_default();
        let labels = table.labels("402");
        assert_eq!(labels.len(), 2);
        assert_eq!(labels[0].issue, PolicyIssue::LiberalEconomicPolicy);
        assert_eq!(labels[0].stance, 1);
        assert_eq!(labels[1].issue, PolicyIssue::RestrictiveFinancialPolicy);
        assert_eq!(labels[1].stance, -1);
    }

    fn pool_of(n_left: usize, n_right: usize) -> Vec<AnnotatedSentence> {
        let mut out = Vec::new();
        for i in 0..n_left {
            out.push(sentence(&format!("L{i:05}"), "504", 6 + i % 5));
        }
        for i in 0..n_right {
            out.push(sentence(&format!("R{i:05}"), "401", 6 + i % 5));
        }
        out
    }

    #[test]
    fn dataset_counts_and_balance() {
        let sentences = pool_of(60, 60);
        let rile = RileDictionaries::embedded_default();
        let table = CodeStanceTable::embedded_default();
        let pool = assign_leanings(&sentences, AlignApproach::Rile, &rile, &table);
        let templates = TemplateSet::embedded_default();
        let dataset =
            build_preference_dataset(&pool, &templates, Leaning::Left, AlignApproach::Rile, 5, 50)
                .unwrap();
        assert_eq!(dataset.pairs.len(), 200); // 50 x 2 leanings x 2 orders
        let agree_preferred = dataset
            .pairs
            .iter()
            .filter(|p| {
                let t = templates.get(Language::En, &p.metadata.template_id).unwrap();
                p.chosen == t.agree_term
            })
            .count();
        assert_eq!(agree_preferred, 100, "half the pairs prefer agreement");
        // Each sentence appears exactly twice with a consistent direction.
        let mut by_sentence: BTreeMap<&str, Vec<&PreferencePair>> = BTreeMap::new();
        for p in &dataset.pairs {
            by_sentence.entry(&p.metadata.sentence_id).or_default().push(p);
        }
        assert_eq!(by_sentence.len(), 100);
        for (sid, pairs) in by_sentence {
            assert_eq!(pairs.len(), 2, "{sid}");
            assert_eq!(pairs[0].chosen, pairs[1].chosen);
            assert_eq!(pairs[0].metadata.template_id, pairs[1].metadata.template_id);
            assert_ne!(pairs[0].metadata.order, pairs[1].metadata.order);
        }
        // Left sentences in the Left dataset prefer the agree option.
        for p in &dataset.pairs {
            let t = templates.get(Language::En, &p.metadata.template_id).unwrap();
            if p.metadata.leaning == Leaning::Left {
                assert_eq!(p.chosen, t.agree_term);
            } else {
                assert_eq!(p.chosen, t.disagree_term);
            }
            assert_ne!(p.chosen, p.rejected);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let sentences = pool_of(30, 30);
        let rile = RileDictionaries::embedded_default();
        let table = CodeStanceTable::embedded_default();
        let pool = assign_leanings(&sentences, AlignApproach::Rile, &rile, &table);
        let templates = TemplateSet::embedded_default();
        let build = || {
            build_preference_dataset(&pool, &templates, Leaning::Right, AlignApproach::Rile, 11, 20)
                .unwrap()
                .to_jsonl()
                .unwrap()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn left_and_right_datasets_are_preference_complements() {
        let sentences = pool_of(30, 30);
        let rile = RileDictionaries::embedded_default();
        let table = CodeStanceTable::embedded_default();
        let pool = assign_leanings(&sentences, AlignApproach::Rile, &rile, &table);
        let templates = TemplateSet::embedded_default();
        let left =
            build_preference_dataset(&pool, &templates, Leaning::Left, AlignApproach::Rile, 3, 20)
                .unwrap();
        let right =
            build_preference_dataset(&pool, &templates, Leaning::Right, AlignApproach::Rile, 3, 20)
                .unwrap();
        assert_eq!(left.pairs.len(), right.pairs.len());
        for (l, r) in left.pairs.iter().zip(&right.pairs) {
            assert_eq!(l.prompt, r.prompt, "same sampling and templates");
            assert_eq!(l.chosen, r.rejected, "preferences flipped");
            assert_eq!(l.rejected, r.chosen);
        }
    }

    #[test]
    fn insufficient_pool_reports_shortfall() {
        let sentences = pool_of(10, 300);
        let rile = RileDictionaries::embedded_default();
        let table = CodeStanceTable::embedded_default();
        let pool = assign_leanings(&sentences, AlignApproach::Rile, &rile, &table);
        let templates = TemplateSet::embedded_default();
        let err = build_preference_dataset(
            &pool,
            &templates,
            Leaning::Left,
            AlignApproach::Rile,
            1,
            50,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("have 10 left"), "{msg}");
    }
}
