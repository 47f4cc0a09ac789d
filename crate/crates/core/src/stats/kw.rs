//! Kruskal-Wallis rank tests: the k-group omnibus test with tie correction,
//! plus the cross-language screen used by the analysis pipeline (one
//! five-language test per policy issue and one two-group test per language
//! against a seeded random-stance baseline).

use crate::corpus::PolicyIssue;
use crate::error::{Error, Result};
use crate::lang::Language;
use crate::stats::special::chi_square_sf;
use crate::util::derive_seed;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Exact permutation enumeration is used below this arrangement count.
const EXACT_LIMIT: f64 = 200_000.0;
/// Monte Carlo permutation count for small samples past the exact limit.
const MC_PERMUTATIONS: usize = 10_000;
/// Groups this small trigger the permutation fallback.
const SMALL_GROUP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KwMethod {
    ChiSquare,
    ExactPermutation,
    MonteCarloPermutation,
}

/// Result of one Kruskal-Wallis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KwResult {
    pub h: f64,
    pub dof: usize,
    pub p_value: f64,
    pub group_sizes: Vec<usize>,
    pub method: KwMethod,
}

/// Average ranks of the pooled sample, with ties sharing their mean rank.
/// Returns (ranks in input order, tie-correction denominator term).
fn average_ranks(pooled: &[f64]) -> (Vec<f64>, f64) {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pooled[a].partial_cmp(&pooled[b]).expect("NaN in rank data"));
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let tied = (j - i + 1) as f64;
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg_rank;
        }
        tie_term += tied * tied * tied - tied;
        i = j + 1;
    }
    (ranks, tie_term)
}

/// H statistic from ranks laid out group after group.
fn h_from_ranks(ranks: &[f64], sizes: &[usize], tie_term: f64) -> f64 {
    let n = ranks.len() as f64;
    let mut h = 0.0;
    let mut offset = 0;
    for &size in sizes {
        let r: f64 = ranks[offset..offset + size].iter().sum();
        h += r * r / size as f64;
        offset += size;
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
    let correction = 1.0 - tie_term / (n * n * n - n);
    if correction <= 0.0 {
        // Every observation identical: no rank variation at all.
        0.0
    } else {
        h / correction
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Count of distinct group-label arrangements: N! / prod(n_j!).
fn arrangement_count(sizes: &[usize]) -> f64 {
    let n: usize = sizes.iter().sum();
    let ln = ln_factorial(n) - sizes.iter().map(|&s| ln_factorial(s)).sum::<f64>();
    ln.exp()
}

/// Exact permutation p-value: enumerate all distinct assignments of pooled
/// ranks to groups and count H >= observed.
fn exact_permutation_p(ranks: &[f64], sizes: &[usize], tie_term: f64, observed: f64) -> f64 {
    let n = ranks.len();
    let mut assignment = vec![usize::MAX; n];
    let mut remaining: Vec<usize> = sizes.to_vec();
    let mut hits = 0u64;
    let mut total = 0u64;

    // Depth-first over positions; identical group multisets are generated
    // once per distinct labeling because slots are interchangeable only
    // within a group.
    fn recurse(
        pos: usize,
        ranks: &[f64],
        sizes: &[usize],
        tie_term: f64,
        observed: f64,
        assignment: &mut [usize],
        remaining: &mut [usize],
        hits: &mut u64,
        total: &mut u64,
    ) {
        let n = ranks.len();
        if pos == n {
            let mut sums = vec![0.0; sizes.len()];
            for (i, &g) in assignment.iter().enumerate() {
                sums[g] += ranks[i];
            }
            let nf = n as f64;
            let mut h = 0.0;
            for (g, &size) in sizes.iter().enumerate() {
                h += sums[g] * sums[g] / size as f64;
            }
            h = 12.0 / (nf * (nf + 1.0)) * h - 3.0 * (nf + 1.0);
            let correction = 1.0 - tie_term / (nf * nf * nf - nf);
            let h = if correction <= 0.0 { 0.0 } else { h / correction };
            *total += 1;
            if h >= observed - 1e-9 {
                *hits += 1;
            }
            return;
        }
        for g in 0..sizes.len() {
            if remaining[g] > 0 {
                remaining[g] -= 1;
                assignment[pos] = g;
                recurse(pos + 1, ranks, sizes, tie_term, observed, assignment, remaining, hits, total);
                remaining[g] += 1;
            }
        }
    }

    recurse(0, ranks, sizes, tie_term, observed, &mut assignment, &mut remaining, &mut hits, &mut total);
    hits as f64 / total as f64
}

fn monte_carlo_p(ranks: &[f64], sizes: &[usize], tie_term: f64, observed: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = ranks.to_vec();
    let mut hits = 0usize;
    for _ in 0..MC_PERMUTATIONS {
        shuffled.shuffle(&mut rng);
        if h_from_ranks(&shuffled, sizes, tie_term) >= observed - 1e-9 {
            hits += 1;
        }
    }
    // Add-one correction keeps the estimate off exact zero.
    (hits + 1) as f64 / (MC_PERMUTATIONS + 1) as f64
}

/// Kruskal-Wallis H test across two or more groups. Uses the chi-square
/// approximation, falling back to a permutation distribution (exact when
/// enumerable, Monte Carlo otherwise) when any group has fewer than five
/// observations.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KwResult> {
    if groups.len() < 2 {
        return Err(Error::Stats("kruskal-wallis needs at least two groups".to_string()));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::Stats(format!("kruskal-wallis group {i} is empty")));
        }
    }
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let (ranks, tie_term) = average_ranks(&pooled);
    let h = h_from_ranks(&ranks, &sizes, tie_term);
    let dof = groups.len() - 1;

    let all_identical = pooled.windows(2).all(|w| w[0] == w[1]);
    if all_identical {
        return Ok(KwResult { h: 0.0, dof, p_value: 1.0, group_sizes: sizes, method: KwMethod::ChiSquare });
    }

    let (p_value, method) = if sizes.iter().any(|&s| s < SMALL_GROUP) {
        if arrangement_count(&sizes) <= EXACT_LIMIT {
            (exact_permutation_p(&ranks, &sizes, tie_term, h), KwMethod::ExactPermutation)
        } else {
            let seed = crate::util::fnv1a64(
                &pooled.iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>(),
            );
            (monte_carlo_p(&ranks, &sizes, tie_term, h, seed), KwMethod::MonteCarloPermutation)
        }
    } else {
        (chi_square_sf(h, dof), KwMethod::ChiSquare)
    };

    Ok(KwResult { h, dof, p_value, group_sizes: sizes, method })
}

/// Shape of the random-stance baseline: V conditions per statement, n
/// samples per condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomShape {
    pub conditions_per_statement: usize,
    pub samples_per_condition: usize,
}

impl Default for RandomShape {
    fn default() -> Self {
        RandomShape {
            conditions_per_statement: crate::prompting::CONDITIONS_PER_STATEMENT,
            samples_per_condition: 30,
        }
    }
}

/// One statement-level score from uniformly random binary stances.
fn random_statement_score(rng: &mut ChaCha8Rng, shape: RandomShape) -> f64 {
    let mut sum = 0.0;
    for _ in 0..shape.conditions_per_statement {
        let mut tally = 0i32;
        for _ in 0..shape.samples_per_condition {
            tally += if rng.random::<bool>() { 1 } else { -1 };
        }
        sum += f64::from(tally) / shape.samples_per_condition as f64;
    }
    sum / shape.conditions_per_statement as f64
}

/// Statement-level scores per issue and language feeding the screen.
pub type ScreenScores = BTreeMap<PolicyIssue, BTreeMap<Language, Vec<f64>>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IssueKw {
    pub issue: PolicyIssue,
    pub result: KwResult,
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LanguageBaselineKw {
    pub issue: PolicyIssue,
    pub language: Language,
    pub result: KwResult,
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LanguageScreen {
    pub across_languages: Vec<IssueKw>,
    pub vs_random: Vec<LanguageBaselineKw>,
    /// Issues skipped for insufficient data, with the reason.
    pub skipped: Vec<(PolicyIssue, String)>,
}

/// Run the cross-language screen: per issue, a five-group test over the
/// languages' statement scores; per (language, issue), a two-group test
/// against a seeded random baseline of equal shape.
pub fn kw_language_screen(
    scores: &ScreenScores,
    shape: RandomShape,
    alpha: f64,
    seed: u64,
) -> Result<LanguageScreen> {
    let mut screen = LanguageScreen {
        across_languages: Vec::new(),
        vs_random: Vec::new(),
        skipped: Vec::new(),
    };
    for (&issue, by_language) in scores {
        let too_small = by_language.values().any(|v| v.len() < 2);
        if by_language.is_empty() || too_small {
            screen
                .skipped
                .push((issue, "fewer than 2 statements labeled with the issue".to_string()));
            continue;
        }
        let groups: Vec<Vec<f64>> = by_language.values().cloned().collect();
        if groups.len() >= 2 {
            let result = kruskal_wallis(&groups)?;
            let significant = result.p_value < alpha;
            screen.across_languages.push(IssueKw { issue, result, significant });
        }
        for (&language, values) in by_language {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                seed,
                &format!("kw-baseline:{language}:{issue}"),
            ));
            let baseline: Vec<f64> =
                (0..values.len()).map(|_| random_statement_score(&mut rng, shape)).collect();
            let result = kruskal_wallis(&[values.clone(), baseline])?;
            let significant = result.p_value < alpha;
            screen.vs_random.push(LanguageBaselineKw { issue, language, result, significant });
        }
    }
    Ok(screen)
}
