//! Synthetic corpora for tests, demos, and mock-model runs.
//!
//! The generated text is filler; mock responders decide from statement
//! metadata, not wording. What matters is the shape: statement counts,
//! issue-label counts, variants, and control flags.

use super::{IssueStance, PolicyIssue, Statement, StatementSet, StatementVariant, VariantKind};
use crate::lang::Language;
use std::collections::BTreeMap;

fn lang_text(lang: Language, seed: u64, idx: usize, suffix: &str) -> String {
    let stem = match lang {
        Language::De => format!("Der Staat soll Maßnahme {seed}-{idx} umsetzen"),
        Language::En => format!("The state should implement measure {seed}-{idx}"),
        Language::Es => format!("El estado debe implementar la medida {seed}-{idx}"),
        Language::Fr => format!("L'État devrait mettre en œuvre la mesure {seed}-{idx}"),
        Language::It => format!("Lo stato dovrebbe attuare la misura {seed}-{idx}"),
    };
    format!("{stem}{suffix}.")
}

fn negation_text(lang: Language, seed: u64, idx: usize) -> String {
    let stem = match lang {
        Language::De => format!("Der Staat soll Maßnahme {seed}-{idx} nicht umsetzen"),
        Language::En => format!("The state should not implement measure {seed}-{idx}"),
        Language::Es => format!("El estado no debe implementar la medida {seed}-{idx}"),
        Language::Fr => format!("L'État ne devrait pas mettre en œuvre la mesure {seed}-{idx}"),
        Language::It => format!("Lo stato non dovrebbe attuare la misura {seed}-{idx}"),
    };
    format!("{stem}.")
}

fn opposite_text(lang: Language, seed: u64, idx: usize) -> String {
    let stem = match lang {
        Language::De => format!("Der Staat soll Maßnahme {seed}-{idx} abschaffen"),
        Language::En => format!("The state should abolish measure {seed}-{idx}"),
        Language::Es => format!("El estado debe abolir la medida {seed}-{idx}"),
        Language::Fr => format!("L'État devrait abolir la mesure {seed}-{idx}"),
        Language::It => format!("Lo stato dovrebbe abolire la misura {seed}-{idx}"),
    };
    format!("{stem}.")
}

fn texts_for(seed: u64, idx: usize, kind: VariantKind) -> BTreeMap<Language, String> {
    let mut map = BTreeMap::new();
    for lang in Language::ALL {
        let text = match kind {
            VariantKind::Original => lang_text(lang, seed, idx, ""),
            VariantKind::Paraphrase(k) => {
                let suffix = match (lang, k) {
                    (Language::De, _) => format!(", und zwar in Fassung {k}"),
                    (Language::En, _) => format!(", specifically in wording {k}"),
                    (Language::Es, _) => format!(", concretamente en la versión {k}"),
                    (Language::Fr, _) => format!(", plus précisément dans la version {k}"),
                    (Language::It, _) => format!(", in particolare nella versione {k}"),
                };
                lang_text(lang, seed, idx, &suffix)
            }
            VariantKind::Negation => negation_text(lang, seed, idx),
            VariantKind::Opposite => opposite_text(lang, seed, idx),
        };
        map.insert(lang, text);
    }
    map
}

fn build_statement(seed: u64, idx: usize, labels: Vec<IssueStance>) -> Statement {
    let variants = VariantKind::ALL
        .into_iter()
        .map(|kind| StatementVariant { kind, texts: texts_for(seed, idx, kind) })
        .collect();
    let original_de = idx % 11 == 0;
    let mut translated = BTreeMap::new();
    for lang in Language::ALL {
        let is_original = if original_de { lang == Language::De } else { lang == Language::En };
        translated.insert(lang, !is_original);
    }
    Statement {
        id: format!("s{idx:03}"),
        texts: texts_for(seed, idx, VariantKind::Original),
        issue_stances: labels,
        country_specific: idx % 7 == 0,
        translated,
        variants,
    }
}

/// A small corpus of `n` statements, issue labels rotating through all eight
/// issues, every fifth label an against-stance.
pub fn toy_corpus(n: usize, seed: u64) -> StatementSet {
    let statements = (1..=n)
        .map(|idx| {
            let issue = PolicyIssue::ALL[(idx - 1) % 8];
            let stance = if idx % 5 == 0 { -1 } else { 1 };
            build_statement(seed, idx, vec![IssueStance { issue, stance }])
        })
        .collect();
    StatementSet::new(statements).expect("toy corpus is valid by construction")
}

/// A 239-statement corpus whose per-issue label counts match the reference
/// corpus exactly (sum 258: some statements carry two labels, a few carry
/// none). Deterministic for a given seed.
pub fn reference_corpus(seed: u64) -> StatementSet {
    const TOTAL: usize = 239;
    const DOUBLES: usize = 24;
    const ZEROS: usize = 5;

    let mut remaining: Vec<(PolicyIssue, usize)> = PolicyIssue::ALL
        .iter()
        .map(|&i| (i, i.reference_statement_count()))
        .collect();

    let mut take_top = |exclude: Option<PolicyIssue>| -> PolicyIssue {
        remaining.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.name().cmp(b.0.name())));
        let slot = remaining
            .iter_mut()
            .find(|(issue, count)| *count > 0 && Some(*issue) != exclude)
            .expect("label budget exhausted early");
        slot.1 -= 1;
        slot.0
    };

    let mut label_sets: Vec<Vec<PolicyIssue>> = Vec::with_capacity(TOTAL);
    for _ in 0..DOUBLES {
        let first = take_top(None);
        let second = take_top(Some(first));
        label_sets.push(vec![first, second]);
    }
    for _ in 0..(TOTAL - DOUBLES - ZEROS) {
        label_sets.push(vec![take_top(None)]);
    }
    for _ in 0..ZEROS {
        label_sets.push(Vec::new());
    }
    debug_assert!(remaining.iter().all(|(_, c)| *c == 0));

    let mut label_counter = 0usize;
    let statements = label_sets
        .into_iter()
        .enumerate()
        .map(|(i, issues)| {
            let labels = issues
                .into_iter()
                .map(|issue| {
                    label_counter += 1;
                    let stance = if label_counter % 6 == 0 { -1 } else { 1 };
                    IssueStance { issue, stance }
                })
                .collect();
            build_statement(seed, i + 1, labels)
        })
        .collect();
    StatementSet::new(statements).expect("reference corpus is valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_corpus_has_239_statements() {
        assert_eq!(reference_corpus(0).len(), 239);
    }

    #[test]
    fn reference_corpus_matches_per_issue_counts() {
        let corpus = reference_corpus(0);
        for issue in PolicyIssue::ALL {
            assert_eq!(
                corpus.filter_by_issue(issue).len(),
                issue.reference_statement_count(),
                "count mismatch for {issue}"
            );
        }
        let total: usize = PolicyIssue::ALL
            .iter()
            .map(|&i| corpus.filter_by_issue(i).len())
            .sum();
        assert_eq!(total, 258);
    }

    #[test]
    fn reference_corpus_is_deterministic_per_seed() {
        assert_eq!(reference_corpus(3).content_hash(), reference_corpus(3).content_hash());
        assert_ne!(reference_corpus(3).content_hash(), reference_corpus(4).content_hash());
    }

    #[test]
    fn corpus_contains_against_stances() {
        let corpus = reference_corpus(0);
        let against = corpus
            .statements()
            .iter()
            .flat_map(|s| &s.issue_stances)
            .filter(|is| is.stance == -1)
            .count();
        assert!(against > 0);
    }
}
