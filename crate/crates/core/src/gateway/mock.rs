//! Simulated model endpoints for validating the harness without real
//! inference: a constant agree-er, a seeded coin flipper, and a leaning
//! simulator whose agreement probability follows the statement's issue
//! stances.
//!
//! All mock output is drawn from the parsing lexicons (unless noise is
//! requested), and all randomness is derived per condition key, so results
//! do not depend on dispatch order.

use super::{ChatRequest, RequestCounter, RequestKind, Responder};
use crate::corpus::{PolicyIssue, StatementSet};
use crate::error::{Error, Result};
use crate::lang::Language;
use crate::stats::special::logistic;
use crate::util::derive_seed;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap};

/// Canonical agreement phrase per language (present in the lexicons).
pub fn agree_phrase(language: Language) -> &'static str {
    match language {
        Language::De => "Ich stimme zu.",
        Language::En => "I agree.",
        Language::Es => "Estoy de acuerdo.",
        Language::Fr => "Je suis d'accord.",
        Language::It => "Sono d'accordo.",
    }
}

/// Canonical disagreement phrase per language (present in the lexicons).
pub fn disagree_phrase(language: Language) -> &'static str {
    match language {
        Language::De => "Ich stimme nicht zu.",
        Language::En => "I disagree.",
        Language::Es => "No estoy de acuerdo.",
        Language::Fr => "Je ne suis pas d'accord.",
        Language::It => "Non sono d'accordo.",
    }
}

/// Configuration of the leaning simulator. Agreement probability is
/// sigma(sum_i bias_i * stance_i * polarity + offsets), i.e. a logistic
/// model over the statement's issue labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorConfig {
    pub seed: u64,
    /// Per-issue logit bias. Positive means: agrees with statements that are
    /// pro this issue.
    pub issue_bias: BTreeMap<PolicyIssue, f64>,
    /// Extra pro-issue logit per (language, issue); injects cross-lingual
    /// differences.
    pub language_issue_offsets: BTreeMap<(Language, PolicyIssue), f64>,
    /// When false the simulator ignores variant polarity (a maximally
    /// paraphrase-consistent but negation-blind responder).
    pub variant_aware: bool,
    /// Probability of emitting an out-of-lexicon response.
    pub noise: f64,
}

impl SimulatorConfig {
    pub fn neutral(seed: u64) -> Self {
        SimulatorConfig {
            seed,
            issue_bias: BTreeMap::new(),
            language_issue_offsets: BTreeMap::new(),
            variant_aware: true,
            noise: 0.0,
        }
    }

    /// A simulator whose opinions sit at `lean` on the left/right axis:
    /// negative leans left, positive leans right. `strength` is the logit
    /// magnitude per issue.
    pub fn with_axis_lean(lean: f64, strength: f64, seed: u64) -> Self {
        let mut config = Self::neutral(seed);
        for issue in PolicyIssue::ALL {
            // Pro-left-issue bias produces a negative (left) axis value.
            config.issue_bias.insert(issue, lean * strength * issue.leaning().sign());
        }
        config
    }

    pub fn left_leaning(strength: f64, seed: u64) -> Self {
        Self::with_axis_lean(-1.0, strength, seed)
    }

    pub fn right_leaning(strength: f64, seed: u64) -> Self {
        Self::with_axis_lean(1.0, strength, seed)
    }

    pub fn with_language_offset(
        mut self,
        language: Language,
        issue: PolicyIssue,
        logit_delta: f64,
    ) -> Self {
        self.language_issue_offsets.insert((language, issue), logit_delta);
        self
    }
}

/// Mock responder profiles.
#[derive(Debug, Clone, PartialEq)]
pub enum MockProfile {
    AlwaysAgree,
    UniformRandom { seed: u64 },
    LeaningSimulator(SimulatorConfig),
}

impl MockProfile {
    /// Parse a profile from a CLI string: `always-agree`, `uniform-random`,
    /// `left-simulator`, `right-simulator`.
    pub fn parse(name: &str, seed: u64) -> Result<Self> {
        match name {
            "always-agree" => Ok(MockProfile::AlwaysAgree),
            "uniform-random" => Ok(MockProfile::UniformRandom { seed }),
            "left-simulator" => Ok(MockProfile::LeaningSimulator(SimulatorConfig::left_leaning(2.0, seed))),
            "right-simulator" => Ok(MockProfile::LeaningSimulator(SimulatorConfig::right_leaning(2.0, seed))),
            other => Err(Error::Config(format!(
                "unknown mock profile `{other}` (expected always-agree, uniform-random, \
                 left-simulator, or right-simulator)"
            ))),
        }
    }
}

/// A gateway-compatible responder backed by a mock profile.
pub struct MockResponder {
    profile: MockProfile,
    /// statement id -> issue labels, for the leaning simulator.
    stances: HashMap<String, Vec<(PolicyIssue, i8)>>,
    counter: RequestCounter,
}

impl MockResponder {
    pub fn new(profile: MockProfile) -> Self {
        MockResponder { profile, stances: HashMap::new(), counter: RequestCounter::default() }
    }

    /// Attach corpus metadata; required for the leaning simulator.
    pub fn with_corpus(profile: MockProfile, corpus: &StatementSet) -> Self {
        let stances = corpus
            .statements()
            .iter()
            .map(|s| {
                (
                    s.id.clone(),
                    s.issue_stances.iter().map(|is| (is.issue, is.stance)).collect(),
                )
            })
            .collect();
        MockResponder { profile, stances, counter: RequestCounter::default() }
    }

    fn agreement_probability(&self, kind: &RequestKind<'_>) -> Result<f64> {
        let config = match &self.profile {
            MockProfile::AlwaysAgree => return Ok(1.0),
            MockProfile::UniformRandom { .. } => return Ok(0.5),
            MockProfile::LeaningSimulator(config) => config,
        };
        let RequestKind::Opinion(key) = kind else {
            return Err(Error::Gateway(
                "leaning simulator only serves opinion conditions".to_string(),
            ));
        };
        let labels = self.stances.get(&key.statement_id).ok_or_else(|| {
            Error::Gateway(format!(
                "leaning simulator has no metadata for statement `{}`; \
                 construct it with the run's corpus",
                key.statement_id
            ))
        })?;
        let polarity = if config.variant_aware {
            f64::from(key.variant_kind.stance_polarity())
        } else {
            1.0
        };
        let mut logit = 0.0;
        for (issue, stance) in labels {
            let bias = config.issue_bias.get(issue).copied().unwrap_or(0.0);
            let offset =
                config.language_issue_offsets.get(&(key.language, *issue)).copied().unwrap_or(0.0);
            logit += (bias + offset) * f64::from(*stance) * polarity;
        }
        Ok(logistic(logit))
    }

    fn seed_for(&self, tag: &str) -> u64 {
        let base = match &self.profile {
            MockProfile::AlwaysAgree => 0,
            MockProfile::UniformRandom { seed } => *seed,
            MockProfile::LeaningSimulator(config) => config.seed,
        };
        derive_seed(base, tag)
    }
}

impl Responder for MockResponder {
    fn complete(&self, kind: RequestKind<'_>, request: &ChatRequest) -> Result<Vec<String>> {
        self.counter.bump();
        let language = match &kind {
            RequestKind::Opinion(key) => key.language,
            RequestKind::Free { .. } => Language::En,
        };
        let p_agree = self.agreement_probability(&kind)?;
        let noise = match &self.profile {
            MockProfile::LeaningSimulator(c) => c.noise,
            _ => 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed_for(&kind.tag()));
        let texts = (0..request.n)
            .map(|_| {
                if noise > 0.0 && rng.random::<f64>() < noise {
                    return "(unintelligible)".to_string();
                }
                let agree = match self.profile {
                    MockProfile::AlwaysAgree => true,
                    _ => rng.random::<f64>() < p_agree,
                };
                if agree { agree_phrase(language) } else { disagree_phrase(language) }.to_string()
            })
            .collect();
        Ok(texts)
    }

    fn request_count(&self) -> usize {
        self.counter.get()
    }
}

/// Build a mock responder, attaching corpus metadata when the profile
/// needs it.
pub fn mock_model(profile: MockProfile, corpus: Option<&StatementSet>) -> Result<MockResponder> {
    match (&profile, corpus) {
        (MockProfile::LeaningSimulator(_), Some(c)) => Ok(MockResponder::with_corpus(profile, c)),
        (MockProfile::LeaningSimulator(_), None) => Err(Error::Config(
            "leaning simulator requires the run corpus for statement metadata".to_string(),
        )),
        (_, Some(c)) => Ok(MockResponder::with_corpus(profile, c)),
        (_, None) => Ok(MockResponder::new(profile)),
    }
}
