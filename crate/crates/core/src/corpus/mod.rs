//! Statement corpus: policy issues, statements, wording variants.
//!
//! The corpus file is UTF-8 line-delimited JSON, one statement per record
//! with its six wording variants embedded. See `docs/corpus-schema.md`.

pub mod synth;

use crate::error::{Error, Result};
use crate::lang::Language;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Political leaning attached to a policy issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Leaning {
    Left,
    Right,
}

impl Leaning {
    /// Sign convention used by the overall-stance aggregate: Left = -1, Right = +1.
    pub fn sign(&self) -> f64 {
        match self {
            Leaning::Left => -1.0,
            Leaning::Right => 1.0,
        }
    }

    pub fn flipped(&self) -> Leaning {
        match self {
            Leaning::Left => Leaning::Right,
            Leaning::Right => Leaning::Left,
        }
    }
}

impl fmt::Display for Leaning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Leaning::Left => "left",
            Leaning::Right => "right",
        })
    }
}

/// The eight canonical policy issues. Four align with left views, four with
/// right views; the mapping is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyIssue {
    ExpandedEnvironmentalProtection,
    ExpandedSocialWelfareState,
    LiberalSociety,
    OpenForeignPolicy,
    LawAndOrder,
    LiberalEconomicPolicy,
    RestrictiveFinancialPolicy,
    RestrictiveMigrationPolicy,
}

impl PolicyIssue {
    pub const ALL: [PolicyIssue; 8] = [
        PolicyIssue::ExpandedEnvironmentalProtection,
        PolicyIssue::ExpandedSocialWelfareState,
        PolicyIssue::LiberalSociety,
        PolicyIssue::OpenForeignPolicy,
        PolicyIssue::LawAndOrder,
        PolicyIssue::LiberalEconomicPolicy,
        PolicyIssue::RestrictiveFinancialPolicy,
        PolicyIssue::RestrictiveMigrationPolicy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyIssue::ExpandedEnvironmentalProtection => "expanded environmental protection",
            PolicyIssue::ExpandedSocialWelfareState => "expanded social welfare state",
            PolicyIssue::LiberalSociety => "liberal society",
            PolicyIssue::OpenForeignPolicy => "open foreign policy",
            PolicyIssue::LawAndOrder => "law and order",
            PolicyIssue::LiberalEconomicPolicy => "liberal economic policy",
            PolicyIssue::RestrictiveFinancialPolicy => "restrictive financial policy",
            PolicyIssue::RestrictiveMigrationPolicy => "restrictive migration policy",
        }
    }

    /// Whether a positive stance toward statements of this issue aligns with
    /// a left or right view.
    pub fn leaning(&self) -> Leaning {
        match self {
            PolicyIssue::ExpandedEnvironmentalProtection
            | PolicyIssue::ExpandedSocialWelfareState
            | PolicyIssue::LiberalSociety
            | PolicyIssue::OpenForeignPolicy => Leaning::Left,
            PolicyIssue::LawAndOrder
            | PolicyIssue::LiberalEconomicPolicy
            | PolicyIssue::RestrictiveFinancialPolicy
            | PolicyIssue::RestrictiveMigrationPolicy => Leaning::Right,
        }
    }

    /// Number of original statements labeled with this issue in the reference
    /// corpus. The synthetic reference corpus reproduces these counts.
    pub fn reference_statement_count(&self) -> usize {
        match self {
            PolicyIssue::ExpandedEnvironmentalProtection => 32,
            PolicyIssue::ExpandedSocialWelfareState => 38,
            PolicyIssue::LiberalSociety => 44,
            PolicyIssue::OpenForeignPolicy => 25,
            PolicyIssue::LawAndOrder => 19,
            PolicyIssue::LiberalEconomicPolicy => 55,
            PolicyIssue::RestrictiveFinancialPolicy => 29,
            PolicyIssue::RestrictiveMigrationPolicy => 16,
        }
    }
}

impl fmt::Display for PolicyIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyIssue {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase().replace(['_', '-'], " ");
        PolicyIssue::ALL
            .into_iter()
            .find(|issue| issue.name() == norm)
            .ok_or_else(|| format!("unknown policy issue `{s}`"))
    }
}

impl Serialize for PolicyIssue {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for PolicyIssue {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fixed left/right lookup for an issue name.
pub fn issue_leaning(issue: PolicyIssue) -> Leaning {
    issue.leaning()
}

/// Kind of statement wording variant. Each statement carries exactly six:
/// the original, three paraphrases, one negation, one opposite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VariantKind {
    Original,
    Paraphrase(u8),
    Negation,
    Opposite,
}

impl VariantKind {
    pub const ALL: [VariantKind; 6] = [
        VariantKind::Original,
        VariantKind::Paraphrase(1),
        VariantKind::Paraphrase(2),
        VariantKind::Paraphrase(3),
        VariantKind::Negation,
        VariantKind::Opposite,
    ];

    /// +1 when agreement with the variant means agreement with the original
    /// statement, -1 when it means the reverse.
    pub fn stance_polarity(&self) -> i8 {
        match self {
            VariantKind::Original | VariantKind::Paraphrase(_) => 1,
            VariantKind::Negation | VariantKind::Opposite => -1,
        }
    }

    pub fn token(&self) -> String {
        match self {
            VariantKind::Original => "original".to_string(),
            VariantKind::Paraphrase(k) => format!("paraphrase{k}"),
            VariantKind::Negation => "negation".to_string(),
            VariantKind::Opposite => "opposite".to_string(),
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

impl FromStr for VariantKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "original" => Ok(VariantKind::Original),
            "negation" => Ok(VariantKind::Negation),
            "opposite" => Ok(VariantKind::Opposite),
            _ => {
                if let Some(num) = s.strip_prefix("paraphrase") {
                    let k: u8 = num.parse().map_err(|_| format!("bad variant kind `{s}`"))?;
                    if (1..=3).contains(&k) {
                        return Ok(VariantKind::Paraphrase(k));
                    }
                }
                Err(format!("bad variant kind `{s}`"))
            }
        }
    }
}

impl Serialize for VariantKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.token())
    }
}

impl<'de> Deserialize<'de> for VariantKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One wording variant of a statement, with text in every language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementVariant {
    pub kind: VariantKind,
    pub texts: BTreeMap<Language, String>,
}

impl StatementVariant {
    pub fn stance_polarity(&self) -> i8 {
        self.kind.stance_polarity()
    }
}

/// A stance label: the statement is pro (+1) or against (-1) the issue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueStance {
    pub issue: PolicyIssue,
    pub stance: i8,
}

/// One voting-advice statement with per-language texts and variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub id: String,
    pub texts: BTreeMap<Language, String>,
    #[serde(default)]
    pub issue_stances: Vec<IssueStance>,
    #[serde(default)]
    pub country_specific: bool,
    #[serde(default)]
    pub translated: BTreeMap<Language, bool>,
    pub variants: Vec<StatementVariant>,
}

impl Statement {
    /// Stance toward `issue`, if labeled.
    pub fn stance_toward(&self, issue: PolicyIssue) -> Option<i8> {
        self.issue_stances
            .iter()
            .find(|is| is.issue == issue)
            .map(|is| is.stance)
    }

    pub fn variant(&self, kind: VariantKind) -> Option<&StatementVariant> {
        self.variants.iter().find(|v| v.kind == kind)
    }

    /// Sum of issue leaning signs over this statement's labels, used by the
    /// overall-stance aggregate (unlabeled issues contribute zero).
    pub fn leaning_sign_sum(&self) -> f64 {
        self.issue_stances
            .iter()
            .map(|is| is.issue.leaning().sign() * f64::from(is.stance))
            .sum()
    }

    fn validate(&self) -> std::result::Result<(), String> {
        for lang in Language::ALL {
            match self.texts.get(&lang) {
                None => return Err(format!("missing {lang} text")),
                Some(t) if t.trim().is_empty() => return Err(format!("empty {lang} text")),
                _ => {}
            }
        }
        let mut seen_issues = HashSet::new();
        for is in &self.issue_stances {
            if !seen_issues.insert(is.issue) {
                return Err(format!("duplicate stance for issue `{}`", is.issue));
            }
            if is.stance != 1 && is.stance != -1 {
                return Err(format!("stance for `{}` must be +1 or -1, got {}", is.issue, is.stance));
            }
        }
        let mut seen_kinds = HashSet::new();
        for variant in &self.variants {
            if !seen_kinds.insert(variant.kind) {
                return Err(format!("duplicate variant `{}`", variant.kind));
            }
            for lang in Language::ALL {
                match variant.texts.get(&lang) {
                    None => return Err(format!("variant `{}` missing {lang} text", variant.kind)),
                    Some(t) if t.trim().is_empty() => {
                        return Err(format!("variant `{}` has empty {lang} text", variant.kind))
                    }
                    _ => {}
                }
            }
        }
        for kind in VariantKind::ALL {
            if !seen_kinds.contains(&kind) {
                return Err(format!("missing variant `{kind}`"));
            }
        }
        Ok(())
    }
}

/// A validated, immutable statement corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct StatementSet {
    statements: Vec<Statement>,
}

impl StatementSet {
    /// Validate and build a set from raw statements.
    pub fn new(statements: Vec<Statement>) -> Result<Self> {
        if statements.is_empty() {
            return Err(Error::Corpus("no statements".to_string()));
        }
        let mut ids = HashSet::new();
        for stmt in &statements {
            if stmt.id.trim().is_empty() {
                return Err(Error::Corpus("statement with empty id".to_string()));
            }
            if !ids.insert(stmt.id.clone()) {
                return Err(Error::Corpus(format!("duplicate statement id `{}`", stmt.id)));
            }
            stmt.validate()
                .map_err(|msg| Error::Corpus(format!("statement `{}`: {msg}", stmt.id)))?;
        }
        Ok(StatementSet { statements })
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Statement> {
        self.statements.iter().find(|s| s.id == id)
    }

    /// Statements with a nonzero stance toward `issue`.
    pub fn filter_by_issue(&self, issue: PolicyIssue) -> Vec<&Statement> {
        self.statements
            .iter()
            .filter(|s| s.stance_toward(issue).is_some())
            .collect()
    }

    /// Serialize to the line-delimited corpus format.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for stmt in &self.statements {
            out.push_str(&serde_json::to_string(stmt)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(content: &str) -> Result<Self> {
        let mut statements = Vec::new();
        for (lineno, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let stmt: Statement = serde_json::from_str(line).map_err(|e| {
                Error::Corpus(format!("line {}: malformed record: {e}", lineno + 1))
            })?;
            statements.push(stmt);
        }
        StatementSet::new(statements)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()?)?;
        Ok(())
    }

    /// Content hash for provenance (hash of the canonical serialization).
    pub fn content_hash(&self) -> String {
        crate::util::sha256_hex(self.to_jsonl().unwrap_or_default().as_bytes())
    }
}

/// Load a corpus file, validating corpus-wide invariants.
pub fn load_corpus(path: &Path) -> Result<StatementSet> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| Error::Corpus(format!("cannot read {}: {e}", path.display())))?;
    StatementSet::from_jsonl(&content)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_of_issues_is_balanced() {
        let left = PolicyIssue::ALL.iter().filter(|i| i.leaning() == Leaning::Left).count();
        let right = PolicyIssue::ALL.iter().filter(|i| i.leaning() == Leaning::Right).count();
        assert_eq!(left, 4);
        assert_eq!(right, 4);
    }

    #[test]
    fn issue_leanings_match_reference() {
        assert_eq!(issue_leaning(PolicyIssue::ExpandedEnvironmentalProtection), Leaning::Left);
        assert_eq!(issue_leaning(PolicyIssue::LawAndOrder), Leaning::Right);
        assert_eq!(issue_leaning(PolicyIssue::LiberalEconomicPolicy), Leaning::Right);
    }

    #[test]
    fn reference_counts_sum_to_258() {
        let total: usize = PolicyIssue::ALL.iter().map(|i| i.reference_statement_count()).sum();
        assert_eq!(total, 258);
    }

    #[test]
    fn variant_polarity_by_kind() {
        for kind in VariantKind::ALL {
            let expected = matches!(kind, VariantKind::Negation | VariantKind::Opposite);
            assert_eq!(kind.stance_polarity() == -1, expected);
            assert!(kind.stance_polarity() == 1 || kind.stance_polarity() == -1);
        }
    }

    #[test]
    fn issue_parses_from_name() {
        let issue: PolicyIssue = "law and order".parse().unwrap();
        assert_eq!(issue, PolicyIssue::LawAndOrder);
        assert!("fiscal prudence".parse::<PolicyIssue>().is_err());
    }

    #[test]
    fn empty_corpus_rejected() {
        let err = StatementSet::from_jsonl("").unwrap_err();
        assert!(err.to_string().contains("no statements"));
    }

    #[test]
    fn missing_language_text_names_statement() {
        let mut stmt = synth::toy_corpus(1, 1).statements()[0].clone();
        stmt.texts.remove(&Language::It);
        let err = StatementSet::new(vec![stmt]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("missing it text"), "got: {msg}");
        assert!(msg.contains("s001"), "got: {msg}");
    }

    #[test]
    fn duplicate_id_rejected() {
        let stmt = synth::toy_corpus(1, 1).statements()[0].clone();
        let err = StatementSet::new(vec![stmt.clone(), stmt]).unwrap_err();
        assert!(err.to_string().contains("duplicate statement id"));
    }

    #[test]
    fn missing_variant_named_in_error() {
        let mut stmt = synth::toy_corpus(1, 1).statements()[0].clone();
        stmt.variants.retain(|v| v.kind != VariantKind::Paraphrase(2));
        let err = StatementSet::new(vec![stmt]).unwrap_err();
        assert!(err.to_string().contains("missing variant `paraphrase2`"));
    }

    #[test]
    fn unknown_issue_name_fails_load() {
        let corpus = synth::toy_corpus(1, 1);
        let json = corpus.to_jsonl().unwrap();
        let bad = json.replace("expanded environmental protection", "techno optimism");
        assert_ne!(bad, json, "toy corpus should carry this label");
        let err = StatementSet::from_jsonl(&bad).unwrap_err();
        assert!(err.to_string().contains("unknown policy issue"));
    }

    #[test]
    fn load_serialize_load_is_identity() {
        let corpus = synth::toy_corpus(7, 42);
        let reloaded = StatementSet::from_jsonl(&corpus.to_jsonl().unwrap()).unwrap();
        assert_eq!(corpus, reloaded);
    }

    #[test]
    fn filter_by_issue_empty_when_unlabeled() {
        let corpus = synth::toy_corpus(3, 1);
        let mut stripped: Vec<Statement> = corpus.statements().to_vec();
        for s in &mut stripped {
            s.issue_stances.clear();
        }
        let set = StatementSet::new(stripped).unwrap();
        assert!(set.filter_by_issue(PolicyIssue::LawAndOrder).is_empty());
    }
}
