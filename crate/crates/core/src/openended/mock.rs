//! Mock generator and judge for exercising the open-ended pipeline.
//!
//! The writer emits short opinionated statements whose stance toward the
//! asked aspect depends on its configured lean; the rubric judge recognizes
//! those stance phrasings and answers with the bare verdict digit the real
//! judge prompt asks for.

use crate::error::{Error, Result};
use crate::gateway::{ChatRequest, RequestCounter, RequestKind, Responder};
use crate::openended::AspectSide;
use crate::util::derive_seed;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const STANCE_PHRASES: [&str; 5] = [
    "I wholeheartedly support",
    "On balance, I lean toward",
    "There are reasonable arguments on both sides of",
    "On balance, I lean against",
    "I firmly oppose",
];

const REFUSAL_PHRASE: &str = "I'm sorry, but I cannot write an opinionated statement about";

/// A generator whose opinions sit at `left_lean` on a [-1, 1] scale where
/// +1 favors every left-term aspect and opposes every right-term aspect.
pub struct OpinionWriterMock {
    left_lean: f64,
    refusal_rate: f64,
    seed: u64,
    counter: RequestCounter,
}

impl OpinionWriterMock {
    pub fn new(left_lean: f64, seed: u64) -> Self {
        OpinionWriterMock { left_lean, refusal_rate: 0.02, seed, counter: RequestCounter::default() }
    }

    pub fn with_refusal_rate(mut self, rate: f64) -> Self {
        self.refusal_rate = rate;
        self
    }
}

fn side_from_cell(cell: &str) -> Result<AspectSide> {
    if cell.contains("|left_term|") {
        Ok(AspectSide::LeftTerm)
    } else if cell.contains("|right_term|") {
        Ok(AspectSide::RightTerm)
    } else {
        Err(Error::Gateway(format!("opinion writer mock: cell `{cell}` names no aspect side")))
    }
}

impl Responder for OpinionWriterMock {
    fn complete(&self, kind: RequestKind<'_>, request: &ChatRequest) -> Result<Vec<String>> {
        self.counter.bump();
        let RequestKind::Free { cell } = kind else {
            return Err(Error::Gateway("opinion writer mock serves free-form cells only".to_string()));
        };
        let side = side_from_cell(cell)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, cell));
        // Stance toward the asked aspect: positive favors it.
        let alignment = self.left_lean * side.left_sign();
        let p_favor = (0.4 + 0.45 * alignment).clamp(0.02, 0.96);
        let p_against = (0.4 - 0.45 * alignment).clamp(0.02, 0.96);
        let texts = (0..request.n)
            .map(|_| {
                if rng.random::<f64>() < self.refusal_rate {
                    return format!("{REFUSAL_PHRASE} {}.", request.user);
                }
                let draw: f64 = rng.random();
                let phrase = if draw < p_favor {
                    // Split favor between exclusive and qualified support.
                    if rng.random::<bool>() { STANCE_PHRASES[0] } else { STANCE_PHRASES[1] }
                } else if draw < p_favor + p_against {
                    if rng.random::<bool>() { STANCE_PHRASES[4] } else { STANCE_PHRASES[3] }
                } else {
                    STANCE_PHRASES[2]
                };
                format!("{phrase} {}.", request.user)
            })
            .collect();
        Ok(texts)
    }

    fn request_count(&self) -> usize {
        self.counter.get()
    }
}

/// A judge that reads the filled judge prompt, finds the writer's stance
/// phrasing inside it, and answers with the matching verdict digit.
pub struct RubricJudgeMock {
    counter: RequestCounter,
}

impl RubricJudgeMock {
    pub fn new() -> Self {
        RubricJudgeMock { counter: RequestCounter::default() }
    }
}

impl Default for RubricJudgeMock {
    fn default() -> Self {
        Self::new()
    }
}

impl Responder for RubricJudgeMock {
    fn complete(&self, _kind: RequestKind<'_>, request: &ChatRequest) -> Result<Vec<String>> {
        self.counter.bump();
        let verdict = if request.user.contains(REFUSAL_PHRASE) {
            "6"
        } else if request.user.contains(STANCE_PHRASES[0]) {
            "1"
        } else if request.user.contains(STANCE_PHRASES[1]) {
            "2"
        } else if request.user.contains(STANCE_PHRASES[3]) {
            "4"
        } else if request.user.contains(STANCE_PHRASES[4]) {
            "5"
        } else {
            "3"
        };
        Ok(vec![verdict.to_string(); request.n])
    }

    fn request_count(&self) -> usize {
        self.counter.get()
    }
}
