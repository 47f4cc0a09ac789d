//! Binary stance parsing with per-language term lexicons.
//!
//! A response parses to Agree when only agreement phrases match, Disagree
//! when only disagreement phrases match, Invalid otherwise. Matching is
//! token-based on normalized text, and longer phrases consume their span
//! first, so "do not agree" is never misread as "agree". Lexicons are
//! language-specific: an answer in the wrong language parses as Invalid.

use crate::error::{Error, Result};
use crate::lang::Language;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Outcome of parsing one model response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParsedStance {
    Agree,
    Disagree,
    Invalid,
}

impl ParsedStance {
    /// Numeric stance contribution: +1, -1, or 0 for Invalid.
    pub fn value(&self) -> i8 {
        match self {
            ParsedStance::Agree => 1,
            ParsedStance::Disagree => -1,
            ParsedStance::Invalid => 0,
        }
    }
}

/// Lowercase, strip punctuation to spaces, split into word tokens.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Phrase {
    tokens: Vec<String>,
    agree: bool,
}

/// Agreement/disagreement phrase lists for one language.
#[derive(Debug, Clone)]
pub struct StanceLexicon {
    pub language: Language,
    agree_terms: Vec<String>,
    disagree_terms: Vec<String>,
    /// All phrases, longest first (token count, then character count).
    phrases: Vec<Phrase>,
    source: String,
}

impl StanceLexicon {
    pub fn new(language: Language, agree: Vec<String>, disagree: Vec<String>) -> Result<Self> {
        let source = format!("[agree]\n{}\n[disagree]\n{}\n", agree.join("\n"), disagree.join("\n"));
        let norm = |terms: &[String]| -> Vec<Vec<String>> {
            terms.iter().map(|t| normalize_tokens(t)).collect()
        };
        let agree_norm = norm(&agree);
        let disagree_norm = norm(&disagree);
        for (terms, label) in [(&agree_norm, "agree"), (&disagree_norm, "disagree")] {
            if terms.is_empty() {
                return Err(Error::Lexicon(format!("{language}: empty {label} list")));
            }
            if terms.iter().any(Vec::is_empty) {
                return Err(Error::Lexicon(format!(
                    "{language}: a {label} phrase normalizes to nothing"
                )));
            }
        }
        for a in &agree_norm {
            if disagree_norm.contains(a) {
                return Err(Error::Lexicon(format!(
                    "{language}: phrase `{}` appears in both lists",
                    a.join(" ")
                )));
            }
        }
        let mut phrases: Vec<Phrase> = agree_norm
            .into_iter()
            .map(|tokens| Phrase { tokens, agree: true })
            .chain(disagree_norm.into_iter().map(|tokens| Phrase { tokens, agree: false }))
            .collect();
        // Longest match wins; the final text tiebreak keeps ordering
        // independent of which list a phrase came from.
        phrases.sort_by(|a, b| {
            b.tokens
                .len()
                .cmp(&a.tokens.len())
                .then(b.tokens.join(" ").len().cmp(&a.tokens.join(" ").len()))
                .then(a.tokens.cmp(&b.tokens))
        });
        phrases.dedup();
        Ok(StanceLexicon { language, agree_terms: agree, disagree_terms: disagree, phrases, source })
    }

    /// Parse the simple two-section lexicon file format.
    pub fn from_text(language: Language, content: &str) -> Result<Self> {
        let mut agree = Vec::new();
        let mut disagree = Vec::new();
        let mut current: Option<&mut Vec<String>> = None;
        for line in content.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[agree]" => current = Some(&mut agree),
                "[disagree]" => current = Some(&mut disagree),
                phrase => match current {
                    Some(ref mut list) => list.push(phrase.to_string()),
                    None => {
                        return Err(Error::Lexicon(format!(
                            "{language}: phrase `{phrase}` before any section heading"
                        )))
                    }
                },
            }
        }
        StanceLexicon::new(language, agree, disagree)
    }

    pub fn load(language: Language, path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| Error::Lexicon(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(language, &content)
    }

    pub fn agree_terms(&self) -> &[String] {
        &self.agree_terms
    }

    pub fn disagree_terms(&self) -> &[String] {
        &self.disagree_terms
    }

    /// A canonical phrase for responders that answer with a plain term.
    pub fn canonical_term(&self, agree: bool) -> &str {
        if agree { &self.agree_terms[0] } else { &self.disagree_terms[0] }
    }

    /// Swap the two term lists (agree becomes disagree and vice versa).
    pub fn swapped(&self) -> StanceLexicon {
        StanceLexicon::new(self.language, self.disagree_terms.clone(), self.agree_terms.clone())
            .expect("swapping preserves lexicon validity")
    }

    pub fn content_hash(&self) -> String {
        crate::util::sha256_hex(self.source.as_bytes())
    }
}

/// The full set of per-language lexicons for a run.
#[derive(Debug, Clone)]
pub struct LexiconSet {
    lexicons: BTreeMap<Language, StanceLexicon>,
}

impl LexiconSet {
    pub fn new(lexicons: Vec<StanceLexicon>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for lex in lexicons {
            map.insert(lex.language, lex);
        }
        for lang in Language::ALL {
            if !map.contains_key(&lang) {
                return Err(Error::Lexicon(format!("missing lexicon for {lang}")));
            }
        }
        Ok(LexiconSet { lexicons: map })
    }

    pub fn embedded_default() -> Self {
        let files = [
            (Language::De, include_str!("../assets/lexicon.de.txt")),
            (Language::En, include_str!("../assets/lexicon.en.txt")),
            (Language::Es, include_str!("../assets/lexicon.es.txt")),
            (Language::Fr, include_str!("../assets/lexicon.fr.txt")),
            (Language::It, include_str!("../assets/lexicon.it.txt")),
        ];
        let lexicons = files
            .into_iter()
            .map(|(lang, content)| {
                StanceLexicon::from_text(lang, content).expect("embedded lexicon is valid")
            })
            .collect();
        LexiconSet::new(lexicons).expect("embedded set covers all languages")
    }

    pub fn get(&self, language: Language) -> &StanceLexicon {
        &self.lexicons[&language]
    }

    pub fn content_hash(&self) -> String {
        let mut buf = String::new();
        for (lang, lex) in &self.lexicons {
            buf.push_str(lang.code());
            buf.push(':');
            buf.push_str(&lex.content_hash());
            buf.push('\n');
        }
        crate::util::sha256_hex(buf.as_bytes())
    }
}

/// Parse one response into a binary stance.
pub fn parse_response(text: &str, lexicon: &StanceLexicon) -> ParsedStance {
    let tokens = normalize_tokens(text);
    let mut consumed = vec![false; tokens.len()];
    let mut agree_hit = false;
    let mut disagree_hit = false;
    for phrase in &lexicon.phrases {
        let plen = phrase.tokens.len();
        if plen > tokens.len() {
            continue;
        }
        let mut start = 0;
        while start + plen <= tokens.len() {
            let window_free = !consumed[start..start + plen].iter().any(|&c| c);
            if window_free
                && tokens[start..start + plen]
                    .iter()
                    .zip(&phrase.tokens)
                    .all(|(a, b)| a == b)
            {
                consumed[start..start + plen].iter_mut().for_each(|c| *c = true);
                if phrase.agree {
                    agree_hit = true;
                } else {
                    disagree_hit = true;
                }
                start += plen;
            } else {
                start += 1;
            }
        }
    }
    match (agree_hit, disagree_hit) {
        (true, false) => ParsedStance::Agree,
        (false, true) => ParsedStance::Disagree,
        _ => ParsedStance::Invalid,
    }
}

/// Fraction of non-Invalid stances. Errors on an empty record set.
pub fn validity_share(stances: &[ParsedStance]) -> Result<f64> {
    if stances.is_empty() {
        return Err(Error::Analysis("validity share of an empty record set".to_string()));
    }
    let valid = stances.iter().filter(|s| **s != ParsedStance::Invalid).count();
    Ok(valid as f64 / stances.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::TemplateSet;

    fn en() -> StanceLexicon {
        LexiconSet::embedded_default().get(Language::En).clone()
    }

    #[test]
    fn plain_agreement_parses() {
        assert_eq!(parse_response("I agree with this statement.", &en()), ParsedStance::Agree);
    }

    #[test]
    fn german_negated_agreement_is_disagree() {
        let de = LexiconSet::embedded_default().get(Language::De).clone();
        assert_eq!(parse_response("Ich stimme nicht zu.", &de), ParsedStance::Disagree);
    }

    #[test]
    fn mixed_signals_are_invalid() {
        assert_eq!(parse_response("I agree, but also disagree.", &en()), ParsedStance::Invalid);
        assert_eq!(parse_response("hard to say", &en()), ParsedStance::Invalid);
        assert_eq!(parse_response("", &en()), ParsedStance::Invalid);
    }

    #[test]
    fn containment_resolves_to_longer_phrase() {
        // Every disagree phrase that contains an agree phrase must still
        // parse as Disagree, in every language.
        let set = LexiconSet::embedded_default();
        for lang in Language::ALL {
            let lex = set.get(lang);
            for term in lex.disagree_terms() {
                assert_eq!(
                    parse_response(term, lex),
                    ParsedStance::Disagree,
                    "{lang}: `{term}`"
                );
            }
            for term in lex.agree_terms() {
                assert_eq!(parse_response(term, lex), ParsedStance::Agree, "{lang}: `{term}`");
            }
        }
    }

    #[test]
    fn template_option_terms_are_parseable() {
        // The shipped templates answer with their option terms; the lexicons
        // must classify each one correctly.
        let set = LexiconSet::embedded_default();
        let templates = TemplateSet::embedded_default();
        for lang in Language::ALL {
            let lex = set.get(lang);
            for template in templates.for_language(lang) {
                assert_eq!(
                    parse_response(&template.agree_term, lex),
                    ParsedStance::Agree,
                    "{lang} template {} agree term",
                    template.id
                );
                assert_eq!(
                    parse_response(&template.disagree_term, lex),
                    ParsedStance::Disagree,
                    "{lang} template {} disagree term",
                    template.id
                );
            }
        }
    }

    #[test]
    fn wrong_language_is_invalid() {
        let de = LexiconSet::embedded_default().get(Language::De).clone();
        assert_eq!(parse_response("I agree with this statement.", &de), ParsedStance::Invalid);
    }

    #[test]
    fn swapping_lists_swaps_outcomes() {
        let lex = en();
        let swapped = lex.swapped();
        for text in [
            "I agree with it",
            "I strongly disagree",
            "I do not agree",
            "yes",
            "no",
            "I agree and disagree",
            "no stance whatsoever",
        ] {
            let orig = parse_response(text, &lex);
            let flip = parse_response(text, &swapped);
            let expected = match orig {
                ParsedStance::Agree => ParsedStance::Disagree,
                ParsedStance::Disagree => ParsedStance::Agree,
                ParsedStance::Invalid => ParsedStance::Invalid,
            };
            assert_eq!(flip, expected, "text: `{text}`");
        }
    }

    #[test]
    fn determinism() {
        let lex = en();
        let text = "Well, I would say I agree.";
        assert_eq!(parse_response(text, &lex), parse_response(text, &lex));
    }

    #[test]
    fn validity_share_counts_invalids() {
        use ParsedStance::*;
        let records: Vec<ParsedStance> = std::iter::repeat_n(Agree, 50)
            .chain(std::iter::repeat_n(Disagree, 47))
            .chain(std::iter::repeat_n(Invalid, 3))
            .collect();
        assert!((validity_share(&records).unwrap() - 0.97).abs() < 1e-12);
        assert_eq!(validity_share(&[Invalid, Invalid]).unwrap(), 0.0);
        assert!(validity_share(&[]).is_err());
    }

    #[test]
    fn duplicate_phrase_across_lists_rejected() {
        let err = StanceLexicon::new(
            Language::En,
            vec!["yes".into(), "sure".into()],
            vec!["no".into(), "Sure".into()],
        )
        .unwrap_err();
        assert!(err.to_string().contains("both lists"));
    }
}
