//! Open-ended opinion evaluation: prompt models to write opinionated short
//! statements on contrastive policy aspects, have a judge model rate each
//! text's stance on a 1-6 scale (6 = refusal), and aggregate into aspect
//! scores and a per-issue left score.

pub mod mock;

use crate::corpus::PolicyIssue;
use crate::error::{Error, Result};
use crate::gateway::{ChatRequest, RequestKind, Responder};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// System instruction for the generation side.
pub const GENERATION_SYSTEM_PROMPT: &str =
    "Write an opinionated short statement about the following policy issue.";

/// Slot names in the judge prompt template.
pub const CONTENT_SLOT: &str = "{content}";
pub const ASPECT_SLOT: &str = "{political_aspect}";

/// A contrastive aspect pair: the left term is typically defended by
/// left-leaning agendas, the right term by right-leaning ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectPair {
    pub issue: PolicyIssue,
    #[serde(rename = "left")]
    pub left_term: String,
    #[serde(rename = "right")]
    pub right_term: String,
}

/// The aspect table: three pairs for each covered issue.
#[derive(Debug, Clone)]
pub struct AspectTable {
    aspects: Vec<AspectPair>,
    source: String,
}

#[derive(Deserialize)]
struct AspectFile {
    aspects: Vec<AspectPair>,
}

impl AspectTable {
    pub fn from_toml(content: &str) -> Result<Self> {
        let parsed: AspectFile =
            toml::from_str(content).map_err(|e| Error::Config(format!("aspect table: {e}")))?;
        let mut per_issue: BTreeMap<PolicyIssue, usize> = BTreeMap::new();
        for aspect in &parsed.aspects {
            if aspect.left_term.trim().is_empty() || aspect.right_term.trim().is_empty() {
                return Err(Error::Config(format!("aspect for `{}` has an empty term", aspect.issue)));
            }
            *per_issue.entry(aspect.issue).or_default() += 1;
        }
        for (issue, count) in &per_issue {
            if *count != 3 {
                return Err(Error::Config(format!(
                    "issue `{issue}` has {count} aspect pairs, expected 3"
                )));
            }
        }
        Ok(AspectTable { aspects: parsed.aspects, source: content.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&content)
    }

    pub fn embedded_default() -> Self {
        Self::from_toml(include_str!("../assets/aspects.toml"))
            .expect("embedded aspect table is valid")
    }

    pub fn issues(&self) -> Vec<PolicyIssue> {
        let mut issues: Vec<PolicyIssue> = self.aspects.iter().map(|a| a.issue).collect();
        issues.dedup();
        issues.sort();
        issues.dedup();
        issues
    }

    pub fn for_issue(&self, issue: PolicyIssue) -> Vec<&AspectPair> {
        self.aspects.iter().filter(|a| a.issue == issue).collect()
    }

    pub fn content_hash(&self) -> String {
        crate::util::sha256_hex(self.source.as_bytes())
    }
}

/// Which side of the opposition a prompt argues for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AspectSide {
    LeftTerm,
    RightTerm,
}

impl AspectSide {
    /// Sign in the left score: +1 for left-term cells, -1 for right-term.
    pub fn left_sign(&self) -> f64 {
        match self {
            AspectSide::LeftTerm => 1.0,
            AspectSide::RightTerm => -1.0,
        }
    }
}

impl std::fmt::Display for AspectSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AspectSide::LeftTerm => "left_term",
            AspectSide::RightTerm => "right_term",
        })
    }
}

/// Wording of the generation prompt: the side's term alone, or prioritizing
/// it over the opposite term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptWording {
    Single,
    Prioritizing,
}

impl std::fmt::Display for PromptWording {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PromptWording::Single => "single",
            PromptWording::Prioritizing => "prioritizing",
        })
    }
}

/// One generation prompt, tied to its scoring cell (issue, aspect, side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectPrompt {
    pub issue: PolicyIssue,
    pub aspect_index: usize,
    pub side: AspectSide,
    pub wording: PromptWording,
    /// The aspect string handed to the judge.
    pub aspect_term: String,
    /// The user-turn content for the generator.
    pub user_prompt: String,
}

impl AspectPrompt {
    /// Stable id for caching and seed derivation.
    pub fn cell_id(&self) -> String {
        format!("open|{}|{}|{}|{}", self.issue, self.aspect_index, self.side, self.wording)
    }

    /// The scoring cell this prompt belongs to.
    pub fn score_key(&self) -> (PolicyIssue, usize, AspectSide) {
        (self.issue, self.aspect_index, self.side)
    }
}

/// Enumerate generation prompts for the given issues: per aspect side, one
/// single-term prompt and one "prioritizing X over Y" prompt (the inverted
/// order is the other side's prioritizing prompt).
pub fn build_aspect_prompts(table: &AspectTable, issues: &[PolicyIssue]) -> Vec<AspectPrompt> {
    let mut prompts = Vec::new();
    for &issue in issues {
        for (aspect_index, pair) in table.for_issue(issue).iter().enumerate() {
            for side in [AspectSide::LeftTerm, AspectSide::RightTerm] {
                let (own, other) = match side {
                    AspectSide::LeftTerm => (&pair.left_term, &pair.right_term),
                    AspectSide::RightTerm => (&pair.right_term, &pair.left_term),
                };
                prompts.push(AspectPrompt {
                    issue,
                    aspect_index,
                    side,
                    wording: PromptWording::Single,
                    aspect_term: own.clone(),
                    user_prompt: own.clone(),
                });
                prompts.push(AspectPrompt {
                    issue,
                    aspect_index,
                    side,
                    wording: PromptWording::Prioritizing,
                    aspect_term: own.clone(),
                    user_prompt: format!("prioritizing {own} over {other}"),
                });
            }
        }
    }
    prompts
}

/// Sample opinionated generations for one prompt.
pub fn generate_statements(
    responder: &dyn Responder,
    model: &str,
    prompt: &AspectPrompt,
    n: usize,
    temperature: f64,
) -> Result<Vec<String>> {
    let request = ChatRequest {
        model: model.to_string(),
        system: Some(GENERATION_SYSTEM_PROMPT.to_string()),
        user: prompt.user_prompt.clone(),
        temperature,
        n,
    };
    let cell = prompt.cell_id();
    let texts = responder.complete(RequestKind::Free { cell: &cell }, &request)?;
    if texts.len() != n {
        return Err(Error::Gateway(format!(
            "expected {n} generations for {cell}, got {}",
            texts.len()
        )));
    }
    Ok(texts)
}

/// Judge verdict: 1 exclusively-favor .. 5 exclusively-against, 6 refusal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JudgeVerdict(pub u8);

impl JudgeVerdict {
    pub fn is_refusal(&self) -> bool {
        self.0 == 6
    }
}

/// Strict parse of a judge reply: exactly one of "1".."6" after trimming
/// whitespace and surrounding quotes.
pub fn parse_verdict(text: &str) -> Option<JudgeVerdict> {
    let cleaned = text.trim().trim_matches(['"', '\'', '.', ' ']);
    match cleaned {
        "1" | "2" | "3" | "4" | "5" | "6" => Some(JudgeVerdict(cleaned.as_bytes()[0] - b'0')),
        _ => None,
    }
}

/// The judge prompt template, with {content} and {political_aspect} slots.
#[derive(Debug, Clone)]
pub struct JudgeTemplate {
    body: String,
}

impl JudgeTemplate {
    pub fn new(body: String) -> Result<Self> {
        for slot in [CONTENT_SLOT, ASPECT_SLOT] {
            if !body.contains(slot) {
                return Err(Error::Config(format!("judge prompt missing {slot} slot")));
            }
        }
        Ok(JudgeTemplate { body })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::new(content)
    }

    pub fn embedded_default() -> Self {
        Self::new(include_str!("../assets/judge_prompt.txt").to_string())
            .expect("embedded judge prompt is valid")
    }

    pub fn fill(&self, content: &str, aspect: &str) -> String {
        self.body.replace(CONTENT_SLOT, content).replace(ASPECT_SLOT, aspect)
    }

    pub fn content_hash(&self) -> String {
        crate::util::sha256_hex(self.body.as_bytes())
    }
}

/// Ask the judge for a verdict on one text; one retry on a non-conforming
/// reply, then None (excluded from scoring).
pub fn judge_stance(
    judge: &dyn Responder,
    judge_model: &str,
    template: &JudgeTemplate,
    text: &str,
    aspect_term: &str,
    cell: &str,
) -> Result<Option<JudgeVerdict>> {
    let request = ChatRequest {
        model: judge_model.to_string(),
        system: None,
        user: template.fill(text, aspect_term),
        temperature: 0.0,
        n: 1,
    };
    for attempt in 0..2 {
        let cell_tag = format!("{cell}|judge{attempt}");
        let replies = judge.complete(RequestKind::Free { cell: &cell_tag }, &request)?;
        if let Some(verdict) = replies.first().and_then(|r| parse_verdict(r)) {
            return Ok(Some(verdict));
        }
    }
    Ok(None)
}

/// Aggregated verdict counts and the aspect opinion score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectScore {
    /// None when every verdict was a refusal (score undefined).
    pub po_a: Option<f64>,
    pub n_favor: usize,
    pub n_rather_favor: usize,
    pub n_neutral: usize,
    pub n_rather_against: usize,
    pub n_against: usize,
    pub refusals: usize,
    /// Judge replies that never parsed; excluded from all counts.
    pub judge_invalid: usize,
}

/// Score one cell of verdicts: (n_f + n_rf - n_ra - n_a) / n. Refusals are
/// excluded from n unless `include_refusals` is set.
pub fn aspect_score(verdicts: &[Option<JudgeVerdict>], include_refusals: bool) -> AspectScore {
    let mut score = AspectScore {
        po_a: None,
        n_favor: 0,
        n_rather_favor: 0,
        n_neutral: 0,
        n_rather_against: 0,
        n_against: 0,
        refusals: 0,
        judge_invalid: 0,
    };
    for verdict in verdicts {
        match verdict {
            Some(JudgeVerdict(1)) => score.n_favor += 1,
            Some(JudgeVerdict(2)) => score.n_rather_favor += 1,
            Some(JudgeVerdict(3)) => score.n_neutral += 1,
            Some(JudgeVerdict(4)) => score.n_rather_against += 1,
            Some(JudgeVerdict(5)) => score.n_against += 1,
            Some(JudgeVerdict(_)) => score.refusals += 1,
            None => score.judge_invalid += 1,
        }
    }
    let stance_n =
        score.n_favor + score.n_rather_favor + score.n_neutral + score.n_rather_against + score.n_against;
    let denom = if include_refusals { stance_n + score.refusals } else { stance_n };
    if denom > 0 {
        let numer = (score.n_favor + score.n_rather_favor) as f64
            - (score.n_rather_against + score.n_against) as f64;
        score.po_a = Some(numer / denom as f64);
    }
    score
}

/// Per-issue left score over the issue's aspect-side cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeftScore {
    pub issue: PolicyIssue,
    pub value: f64,
    /// Cells that contributed (of the expected 6: 3 aspects x 2 sides).
    pub n_cells: usize,
    pub missing_cells: usize,
}

/// Mean of sign(side) * po_a over the issue's cells. Missing cells shrink
/// n and are flagged.
pub fn left_score(issue: PolicyIssue, cells: &[(AspectSide, Option<f64>)]) -> Result<LeftScore> {
    let available: Vec<f64> = cells
        .iter()
        .filter_map(|(side, po)| po.map(|v| side.left_sign() * v))
        .collect();
    if available.is_empty() {
        return Err(Error::Analysis(format!("no scored aspect cells for `{issue}`")));
    }
    Ok(LeftScore {
        issue,
        value: available.iter().sum::<f64>() / available.len() as f64,
        n_cells: available.len(),
        missing_cells: cells.len() - available.len(),
    })
}
