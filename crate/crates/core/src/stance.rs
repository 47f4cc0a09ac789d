//! Opinion aggregation at variant, statement, issue, and overall levels.
//!
//! All values live in [-1, 1]. At the variant level the score is
//! (n_favor - n_against) / n, with invalid responses diluting toward zero.
//! A statement score averages its 72 wording conditions. Issue scores
//! average over the statements labeled with the issue (against-statements
//! contribute with flipped sign so that +1 consistently means pro-issue),
//! and are additionally reported on the left/right axis where negative
//! means left. The overall stance weighs per-issue scores by their leaning
//! sign and divides by the fixed eight issues.
//!
//! Variant stance polarity must be applied *before* these aggregates: an
//! Agree on a negation variant counts toward the original statement's
//! Disagree. [`condition_score`] does exactly that.

use crate::corpus::{PolicyIssue, VariantKind};
use crate::error::{Error, Result};
use crate::parsing::ParsedStance;
use serde::{Deserialize, Serialize};

/// Aggregation level of a stance score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreLevel {
    Variant,
    Statement,
    Issue,
    Overall,
}

/// A stance value with its support counts where applicable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceScore {
    pub level: ScoreLevel,
    pub value: f64,
    /// (n, n_favor, n_against) at the variant level; (n, 0, 0) elsewhere
    /// where n is the number of aggregated inputs.
    pub support: (usize, usize, usize),
}

impl StanceScore {
    pub fn variant(n_favor: usize, n_against: usize, n: usize) -> Result<StanceScore> {
        Ok(StanceScore {
            level: ScoreLevel::Variant,
            value: opinion_variant(n_favor, n_against, n)?,
            support: (n, n_favor, n_against),
        })
    }

    pub fn aggregated(level: ScoreLevel, value: f64, n: usize) -> StanceScore {
        debug_assert!((-1.0..=1.0).contains(&value));
        StanceScore { level, value, support: (n, 0, 0) }
    }
}

/// Variant-level opinion: (n_f - n_a) / n over all n sampled responses.
pub fn opinion_variant(n_favor: usize, n_against: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Analysis("variant opinion over zero samples".to_string()));
    }
    if n_favor + n_against > n {
        return Err(Error::Analysis(format!(
            "favor {n_favor} + against {n_against} exceed sample count {n}"
        )));
    }
    Ok((n_favor as f64 - n_against as f64) / n as f64)
}

/// Count stances and compute the variant opinion, with the variant's
/// polarity applied so the score is oriented toward the original statement.
pub fn condition_score(stances: &[ParsedStance], variant: VariantKind) -> Result<f64> {
    let n_favor = stances.iter().filter(|s| **s == ParsedStance::Agree).count();
    let n_against = stances.iter().filter(|s| **s == ParsedStance::Disagree).count();
    let raw = opinion_variant(n_favor, n_against, stances.len())?;
    Ok(f64::from(variant.stance_polarity()) * raw)
}

/// Overall left/right stance from eight per-issue opinions:
/// sum of sign(leaning) * po over the eight issues, divided by eight.
/// Negative means left-leaning.
pub fn stance_overall(per_issue: &[(PolicyIssue, f64)]) -> Result<f64> {
    for issue in PolicyIssue::ALL {
        if !per_issue.iter().any(|(i, _)| *i == issue) {
            return Err(Error::Analysis(format!("missing issue score for `{issue}`")));
        }
    }
    if per_issue.len() != PolicyIssue::ALL.len() {
        return Err(Error::Analysis("expected exactly eight issue scores".to_string()));
    }
    let sum: f64 = per_issue.iter().map(|(issue, po)| issue.leaning().sign() * po).sum();
    Ok(sum / PolicyIssue::ALL.len() as f64)
}

/// Statement-level opinion: mean over the 72 wording-condition scores.
/// `allow_partial` permits analyses over incomplete grids.
pub fn opinion_statement(condition_scores: &[f64], allow_partial: bool) -> Result<f64> {
    const EXPECTED: usize = crate::prompting::CONDITIONS_PER_STATEMENT;
    if condition_scores.len() != EXPECTED && !allow_partial {
        return Err(Error::PartialRun {
            completed: condition_scores.len(),
            expected: EXPECTED,
            gaps: vec![],
        });
    }
    if condition_scores.is_empty() {
        return Err(Error::Analysis("statement opinion over zero conditions".to_string()));
    }
    Ok(condition_scores.iter().sum::<f64>() / condition_scores.len() as f64)
}

/// Issue-level opinion over issue-filtered statements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueScore {
    pub issue: PolicyIssue,
    /// Mean opinion toward the issue (+1 = fully pro-issue). Statements
    /// labeled against the issue enter with flipped sign.
    pub pro_issue_mean: f64,
    /// The same value on the left/right axis (negative = left).
    pub left_right_value: f64,
    pub n_statements: usize,
}

/// `statement_scores` pairs each statement's opinion (po toward the
/// statement) with its stance label toward the issue (+1 pro, -1 against).
pub fn opinion_issue(statement_scores: &[(f64, i8)], issue: PolicyIssue) -> Result<IssueScore> {
    if statement_scores.is_empty() {
        return Err(Error::Analysis(format!("no statements labeled with `{issue}`")));
    }
    let pro_issue_mean = statement_scores
        .iter()
        .map(|(po, stance)| po * f64::from(*stance))
        .sum::<f64>()
        / statement_scores.len() as f64;
    Ok(IssueScore {
        issue,
        pro_issue_mean,
        left_right_value: issue.leaning().sign() * pro_issue_mean,
        n_statements: statement_scores.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Leaning;

    #[test]
    fn stance_score_carries_support() {
        let score = StanceScore::variant(20, 10, 30).unwrap();
        assert_eq!(score.level, ScoreLevel::Variant);
        assert_eq!(score.support, (30, 20, 10));
        assert!((score.value - 1.0 / 3.0).abs() < 1e-12);
        let agg = StanceScore::aggregated(ScoreLevel::Issue, -0.5, 19);
        assert_eq!(agg.support.0, 19);
    }

    #[test]
    fn variant_formula_arithmetic() {
        assert!((opinion_variant(20, 10, 30).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(opinion_variant(15, 15, 30).unwrap(), 0.0);
        // Ten invalids dilute a 10/10 split to zero.
        assert_eq!(opinion_variant(10, 10, 30).unwrap(), 0.0);
        assert!(opinion_variant(1, 0, 0).is_err());
        assert!(opinion_variant(20, 20, 30).is_err());
    }

    #[test]
    fn overall_sign_bookkeeping() {
        // Fully pro-left, fully anti-right: maximally left.
        let scores: Vec<(PolicyIssue, f64)> = PolicyIssue::ALL
            .iter()
            .map(|&i| (i, if i.leaning() == Leaning::Left { 1.0 } else { -1.0 }))
            .collect();
        assert_eq!(stance_overall(&scores).unwrap(), -1.0);

        // Equal opinions cancel across the 4/4 leaning split.
        let flat: Vec<_> = PolicyIssue::ALL.iter().map(|&i| (i, 0.7)).collect();
        assert!(stance_overall(&flat).unwrap().abs() < 1e-12);

        // One pro-left issue, all else zero.
        let one: Vec<_> = PolicyIssue::ALL
            .iter()
            .map(|&i| (i, if i == PolicyIssue::LiberalSociety { 1.0 } else { 0.0 }))
            .collect();
        assert_eq!(stance_overall(&one).unwrap(), -0.125);
    }

    #[test]
    fn overall_requires_all_eight() {
        let seven: Vec<_> = PolicyIssue::ALL[..7].iter().map(|&i| (i, 0.0)).collect();
        assert!(stance_overall(&seven).is_err());
    }

    #[test]
    fn statement_mean_and_grid_check() {
        assert_eq!(crate::prompting::CONDITIONS_PER_STATEMENT, 72);
        let same = vec![0.5; 72];
        assert_eq!(opinion_statement(&same, false).unwrap(), 0.5);
        let mut split = vec![1.0; 36];
        split.extend(vec![-1.0; 36]);
        assert_eq!(opinion_statement(&split, false).unwrap(), 0.0);
        assert!(matches!(
            opinion_statement(&[0.5; 10], false),
            Err(Error::PartialRun { completed: 10, expected: 72, .. })
        ));
        assert_eq!(opinion_statement(&[0.5; 10], true).unwrap(), 0.5);
    }

    #[test]
    fn issue_score_sign_mapping() {
        // All pro-issue statements at +1 on a left issue: -1 on the axis.
        let scores = vec![(1.0, 1); 5];
        let result = opinion_issue(&scores, PolicyIssue::ExpandedSocialWelfareState).unwrap();
        assert_eq!(result.pro_issue_mean, 1.0);
        assert_eq!(result.left_right_value, -1.0);

        // Scores summing to zero.
        let zero = vec![(0.5, 1), (-0.5, 1)];
        assert_eq!(opinion_issue(&zero, PolicyIssue::LawAndOrder).unwrap().pro_issue_mean, 0.0);

        // Against-statements flip: agreeing with an anti-issue statement is
        // an anti-issue opinion.
        let against = vec![(1.0, -1)];
        let res = opinion_issue(&against, PolicyIssue::LawAndOrder).unwrap();
        assert_eq!(res.pro_issue_mean, -1.0);
        assert_eq!(res.left_right_value, -1.0);

        assert!(opinion_issue(&[], PolicyIssue::LawAndOrder).is_err());
    }

    #[test]
    fn flipping_leanings_negates_overall() {
        let scores: Vec<(PolicyIssue, f64)> = PolicyIssue::ALL
            .iter()
            .enumerate()
            .map(|(k, &i)| (i, (k as f64 - 3.5) / 4.0))
            .collect();
        let normal = stance_overall(&scores).unwrap();
        // Flipping every leaning sign is the same as negating every issue
        // score under the sum.
        let flipped: Vec<_> = scores.iter().map(|&(i, v)| (i, -v)).collect();
        assert!((stance_overall(&flipped).unwrap() + normal).abs() < 1e-12);
    }

    #[test]
    fn negating_variant_stances_negates_aggregates() {
        let cond = [0.25, -0.5, 1.0, 0.0, 0.75, -1.0];
        let pos = opinion_statement(&cond, true).unwrap();
        let neg_cond: Vec<f64> = cond.iter().map(|v| -v).collect();
        let neg = opinion_statement(&neg_cond, true).unwrap();
        assert!((pos + neg).abs() < 1e-12);
    }

    #[test]
    fn polarity_applied_before_aggregation() {
        use crate::parsing::ParsedStance::*;
        // A consistent responder that inverts on negations gives the same
        // oriented score as a consistent responder on originals.
        let orig = condition_score(&[Agree; 30], VariantKind::Original).unwrap();
        let negated = condition_score(&[Disagree; 30], VariantKind::Negation).unwrap();
        assert_eq!(orig, negated);
        assert_eq!(orig, 1.0);

        // Agreement on a negation counts toward the original's disagree.
        let agree_on_negation = condition_score(&[Agree; 30], VariantKind::Negation).unwrap();
        assert_eq!(agree_on_negation, -1.0);
    }

    #[test]
    fn aggregates_stay_in_range() {
        for nf in 0..=30usize {
            for na in 0..=(30 - nf) {
                let v = opinion_variant(nf, na, 30).unwrap();
                assert!((-1.0..=1.0).contains(&v));
            }
        }
    }
}
