//! Run configuration: one structured TOML file with sections per module.
//! Secrets never live here; endpoints name the environment variable that
//! holds their token.

use crate::aligndata::AlignApproach;
use crate::error::{Error, Result};
use crate::gateway::ModelEndpoint;
use crate::lang::Language;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
pub struct RunSection {
    pub store: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_languages")]
    pub languages: Vec<String>,
    #[serde(default = "default_samples")]
    pub samples_per_condition: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_languages() -> Vec<String> {
    Language::ALL.iter().map(|l| l.code().to_string()).collect()
}
fn default_samples() -> usize {
    30
}
fn default_temperature() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
pub struct CorpusSection {
    pub path: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PathSection {
    pub path: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
pub struct LexiconSection {
    /// Directory holding lexicon.<lang>.txt files.
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RobustnessSection {
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_resamples() -> usize {
    1000
}
fn default_alpha() -> f64 {
    0.05
}

impl Default for RobustnessSection {
    fn default() -> Self {
        RobustnessSection { bootstrap_resamples: 1000, alpha: 0.05 }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct AlignSection {
    pub manifesto_path: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "default_approach")]
    pub approach: String,
    #[serde(default = "default_per_leaning")]
    pub per_leaning: usize,
    #[serde(default)]
    pub annotation_table: Option<PathBuf>,
    #[serde(default)]
    pub rile_codes: Option<PathBuf>,
}

fn default_approach() -> String {
    "policy_issue".to_string()
}
fn default_per_leaning() -> usize {
    crate::aligndata::SENTENCES_PER_LEANING
}

impl AlignSection {
    pub fn approach(&self) -> Result<AlignApproach> {
        match self.approach.as_str() {
            "rile" => Ok(AlignApproach::Rile),
            "policy_issue" | "policy-issue" => Ok(AlignApproach::PolicyIssue),
            other => Err(Error::Config(format!(
                "align.approach must be `rile` or `policy_issue`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct OpenEndedSection {
    /// Endpoint name (or mock profile when running with --mock).
    pub generator: String,
    pub judge: String,
    /// Label distinguishing aligned variants in the report (e.g. unaligned).
    #[serde(default = "default_alignment_label")]
    pub alignment_label: String,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub aspects_path: Option<PathBuf>,
    #[serde(default)]
    pub judge_prompt_path: Option<PathBuf>,
    #[serde(default)]
    pub include_refusals: bool,
}

fn default_alignment_label() -> String {
    "unaligned".to_string()
}

#[derive(Debug, Clone, Deserialize)]
pub struct RunConfig {
    pub run: RunSection,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub templates: Option<PathSection>,
    #[serde(default)]
    pub lexicons: Option<LexiconSection>,
    #[serde(default)]
    pub endpoints: Vec<ModelEndpoint>,
    #[serde(default)]
    pub robustness: Option<RobustnessSection>,
    #[serde(default)]
    pub align: Option<AlignSection>,
    #[serde(default)]
    pub openended: Option<OpenEndedSection>,
}

impl RunConfig {
    pub fn from_toml(content: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(content).map_err(|e| Error::Config(format!("config: {e}")))?;
        for endpoint in &config.endpoints {
            endpoint.validate()?;
        }
        if config.run.samples_per_condition == 0 {
            return Err(Error::Config("run.samples_per_condition must be >= 1".to_string()));
        }
        config.languages()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&content)?;
        // Paths are relative to the config file's directory.
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        fix(&mut self.run.store);
        fix(&mut self.corpus.path);
        if let Some(t) = &mut self.templates {
            fix(&mut t.path);
        }
        if let Some(l) = &mut self.lexicons {
            fix(&mut l.dir);
        }
        if let Some(a) = &mut self.align {
            fix(&mut a.manifesto_path);
            fix(&mut a.output_dir);
            if let Some(p) = &mut a.annotation_table {
                fix(p);
            }
            if let Some(p) = &mut a.rile_codes {
                fix(p);
            }
        }
        if let Some(o) = &mut self.openended {
            if let Some(p) = &mut o.aspects_path {
                fix(p);
            }
            if let Some(p) = &mut o.judge_prompt_path {
                fix(p);
            }
        }
    }

    pub fn languages(&self) -> Result<Vec<Language>> {
        self.run
            .languages
            .iter()
            .map(|code| code.parse::<Language>().map_err(Error::Config))
            .collect()
    }

    pub fn endpoint(&self, name: &str) -> Option<&ModelEndpoint> {
        self.endpoints.iter().find(|e| e.name == name)
    }

    pub fn load_templates(&self) -> Result<crate::prompting::TemplateSet> {
        match &self.templates {
            Some(section) => crate::prompting::TemplateSet::load(&section.path),
            None => Ok(crate::prompting::TemplateSet::embedded_default()),
        }
    }

    pub fn load_lexicons(&self) -> Result<crate::parsing::LexiconSet> {
        match &self.lexicons {
            Some(section) => {
                let mut lexicons = Vec::new();
                for lang in Language::ALL {
                    let path = section.dir.join(format!("lexicon.{}.txt", lang.code()));
                    lexicons.push(crate::parsing::StanceLexicon::load(lang, &path)?);
                }
                crate::parsing::LexiconSet::new(lexicons)
            }
            None => Ok(crate::parsing::LexiconSet::embedded_default()),
        }
    }

    pub fn load_corpus(&self) -> Result<crate::corpus::StatementSet> {
        crate::corpus::load_corpus(&self.corpus.path)
    }
}
