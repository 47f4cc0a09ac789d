//! Prompt templates and the per-statement condition grid.
//!
//! Wording lives in an editable template file, not in code: six templates
//! per language (half personally, half impersonally phrased), each with a
//! statement slot and two answer-option slots. A statement in one language
//! expands to 72 conditions: 6 templates x 2 answer orders x 6 variants.

use crate::corpus::{Statement, VariantKind};
use crate::error::{Error, Result};
use crate::lang::Language;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub const STATEMENT_SLOT: &str = "{statement}";
pub const OPTION_A_SLOT: &str = "{option_a}";
pub const OPTION_B_SLOT: &str = "{option_b}";

/// Templates per language in the default set.
pub const TEMPLATES_PER_LANGUAGE: usize = 6;
/// Template conditions per statement-language: 6 templates x 2 answer orders.
pub const TEMPLATE_CONDITIONS: usize = TEMPLATES_PER_LANGUAGE * 2;
/// Full wording grid per statement-language: 12 template conditions x 6 variants.
pub const CONDITIONS_PER_STATEMENT: usize = TEMPLATE_CONDITIONS * 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateStyle {
    Personal,
    Impersonal,
}

/// Whether the agree option is rendered first (Normal) or second (Inverted).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerOrder {
    Normal,
    Inverted,
}

impl AnswerOrder {
    pub const BOTH: [AnswerOrder; 2] = [AnswerOrder::Normal, AnswerOrder::Inverted];

    pub fn token(&self) -> &'static str {
        match self {
            AnswerOrder::Normal => "normal",
            AnswerOrder::Inverted => "inverted",
        }
    }
}

impl fmt::Display for AnswerOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for AnswerOrder {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "normal" => Ok(AnswerOrder::Normal),
            "inverted" => Ok(AnswerOrder::Inverted),
            other => Err(format!("bad answer order `{other}`")),
        }
    }
}

/// One instruction template in one language.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub id: String,
    pub style: TemplateStyle,
    pub language: Language,
    pub body: String,
    pub agree_term: String,
    pub disagree_term: String,
}

impl PromptTemplate {
    fn validate(&self) -> std::result::Result<(), String> {
        for (slot, name) in [
            (STATEMENT_SLOT, "statement"),
            (OPTION_A_SLOT, "option_a"),
            (OPTION_B_SLOT, "option_b"),
        ] {
            match self.body.matches(slot).count() {
                1 => {}
                0 => return Err(format!("missing {name} slot")),
                n => return Err(format!("{name} slot appears {n} times, expected once")),
            }
        }
        if self.agree_term.trim().is_empty() || self.disagree_term.trim().is_empty() {
            return Err("empty option term".to_string());
        }
        Ok(())
    }

    /// Option terms in render order for the given answer order.
    pub fn options_in_order(&self, order: AnswerOrder) -> (&str, &str) {
        match order {
            AnswerOrder::Normal => (&self.agree_term, &self.disagree_term),
            AnswerOrder::Inverted => (&self.disagree_term, &self.agree_term),
        }
    }
}

/// Key of one cell in the wording grid (for one statement and language).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConditionSpec {
    pub variant_kind: VariantKind,
    pub template_id: String,
    pub answer_order: AnswerOrder,
}

/// A condition together with its rendered prompt text.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedCondition {
    pub spec: ConditionSpec,
    pub text: String,
}

/// All templates, keyed by language. Immutable after load.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    templates: BTreeMap<Language, Vec<PromptTemplate>>,
    source: String,
}

#[derive(Deserialize)]
struct RawTemplate {
    id: String,
    style: TemplateStyle,
    agree: String,
    disagree: String,
    body: String,
}

#[derive(Deserialize)]
struct TemplateFile {
    templates: BTreeMap<String, Vec<RawTemplate>>,
}

impl TemplateSet {
    pub fn from_toml(content: &str) -> Result<Self> {
        let parsed: TemplateFile =
            toml::from_str(content).map_err(|e| Error::Template(format!("parse error: {e}")))?;
        let mut templates = BTreeMap::new();
        for (lang_code, raw_templates) in parsed.templates {
            let language: Language = lang_code
                .parse()
                .map_err(|e| Error::Template(format!("template section: {e}")))?;
            let mut list = Vec::new();
            let mut seen = std::collections::HashSet::new();
            for raw in raw_templates {
                let template = PromptTemplate {
                    id: raw.id,
                    style: raw.style,
                    language,
                    body: raw.body,
                    agree_term: raw.agree,
                    disagree_term: raw.disagree,
                };
                if !seen.insert(template.id.clone()) {
                    return Err(Error::Template(format!(
                        "duplicate template id `{}` for {language}",
                        template.id
                    )));
                }
                template.validate().map_err(|msg| {
                    Error::Template(format!("template `{}` ({language}): {msg}", template.id))
                })?;
                list.push(template);
            }
            templates.insert(language, list);
        }
        for lang in Language::ALL {
            let count = templates.get(&lang).map_or(0, Vec::len);
            if count != TEMPLATES_PER_LANGUAGE {
                return Err(Error::Template(format!(
                    "{lang}: expected {TEMPLATES_PER_LANGUAGE} templates, found {count}"
                )));
            }
        }
        Ok(TemplateSet { templates, source: content.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| Error::Template(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&content)
    }

    /// The template set shipped with the crate. The wording is a default,
    /// not canonical; projects are expected to edit the file.
    pub fn embedded_default() -> Self {
        Self::from_toml(include_str!("../assets/templates.toml"))
            .expect("embedded template file is valid")
    }

    pub fn for_language(&self, language: Language) -> &[PromptTemplate] {
        self.templates.get(&language).map_or(&[], Vec::as_slice)
    }

    pub fn get(&self, language: Language, template_id: &str) -> Option<&PromptTemplate> {
        self.for_language(language).iter().find(|t| t.id == template_id)
    }

    pub fn content_hash(&self) -> String {
        crate::util::sha256_hex(self.source.as_bytes())
    }
}

/// Substitute raw statement text and answer options into a template. Used
/// where the statement is not part of a corpus (e.g. manifesto sentences).
pub fn render_text(template: &PromptTemplate, statement_text: &str, order: AnswerOrder) -> String {
    let (first, second) = template.options_in_order(order);
    template
        .body
        .replace(STATEMENT_SLOT, statement_text)
        .replace(OPTION_A_SLOT, first)
        .replace(OPTION_B_SLOT, second)
}

/// Substitute the statement variant and answer options into a template.
pub fn render_prompt(
    template: &PromptTemplate,
    statement: &Statement,
    variant_kind: VariantKind,
    language: Language,
    order: AnswerOrder,
) -> Result<String> {
    if template.language != language {
        return Err(Error::Template(format!(
            "template `{}` is {}, requested {language}",
            template.id, template.language
        )));
    }
    let variant = statement.variant(variant_kind).ok_or_else(|| {
        Error::Template(format!("statement `{}` lacks variant `{variant_kind}`", statement.id))
    })?;
    let text = variant.texts.get(&language).ok_or_else(|| {
        Error::Template(format!(
            "statement `{}` variant `{variant_kind}` missing {language} text",
            statement.id
        ))
    })?;
    Ok(render_text(template, text, order))
}

/// Enumerate the full 72-condition grid for one statement and language, in a
/// deterministic order (variants, then templates in file order, then both
/// answer orders).
pub fn enumerate_conditions(
    statement: &Statement,
    language: Language,
    templates: &TemplateSet,
) -> Result<Vec<RenderedCondition>> {
    let mut out = Vec::with_capacity(CONDITIONS_PER_STATEMENT);
    for variant_kind in VariantKind::ALL {
        for template in templates.for_language(language) {
            for order in AnswerOrder::BOTH {
                let text = render_prompt(template, statement, variant_kind, language, order)?;
                out.push(RenderedCondition {
                    spec: ConditionSpec {
                        variant_kind,
                        template_id: template.id.clone(),
                        answer_order: order,
                    },
                    text,
                });
            }
        }
    }
    Ok(out)
}
