//! The adaptive streaming game.
//!
//! Each round the adversary sees every earlier update together with the
//! algorithm's answers, then picks the next update. Transcripts are audited
//! against an exact oracle maintained here, independent of the algorithm.

mod attack;
mod generators;

use serde::Serialize;

use crate::robust::{RobustError, RobustSketch};
use crate::sketches::{FrequencyVector, Functionality, ObliviousSketch, StreamModel, StreamUpdate};
use crate::Real;

pub use attack::F2ProbeAttack;
pub use generators::{random_stream, RandomModel, RandomStreamAdversary, ReplayAdversary};

/// Why an algorithm stopped answering.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmHalt {
    BudgetExhausted,
    Failed(String),
}

/// Anything that consumes updates and answers after each one.
pub trait StreamingAlgorithm {
    type Scalar: Real;

    fn process(&mut self, u: StreamUpdate) -> Result<Self::Scalar, AlgorithmHalt>;
}

impl<S: ObliviousSketch> StreamingAlgorithm for S {
    type Scalar = S::Scalar;

    fn process(&mut self, u: StreamUpdate) -> Result<S::Scalar, AlgorithmHalt> {
        self.update(u).map_err(|e| AlgorithmHalt::Failed(e.to_string()))?;
        Ok(self.estimate())
    }
}

impl<S: ObliviousSketch> StreamingAlgorithm for RobustSketch<S> {
    type Scalar = S::Scalar;

    fn process(&mut self, u: StreamUpdate) -> Result<S::Scalar, AlgorithmHalt> {
        match RobustSketch::process(self, u) {
            Ok(out) => Ok(out.estimate),
            Err(RobustError::BudgetExhausted) => Err(AlgorithmHalt::BudgetExhausted),
            Err(e) => Err(AlgorithmHalt::Failed(e.to_string())),
        }
    }
}

/// Picks updates, possibly as a function of everything seen so far.
pub trait Adversary<T> {
    /// Declared stream model; updates outside it end the game.
    fn model(&self) -> StreamModel;

    /// `None` ends the game early.
    fn next_update(&mut self, history: &[Round<T>]) -> Option<StreamUpdate>;
}

/// One round of a played game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Round<T> {
    /// 1-based round number.
    pub i: usize,
    pub update: StreamUpdate,
    pub output: T,
    pub exact: u128,
    pub within_alpha: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub round: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameConfig {
    pub m: usize,
    pub n: u64,
    pub functionality: Functionality,
    pub alpha: f64,
}

/// `|output - exact| / exact`; infinite when `exact = 0 != output`.
pub fn relative_error<T: Real>(output: T, exact: u128) -> f64 {
    let out = output.to_f64_lossy();
    let exact = exact as f64;
    if exact == 0.0 {
        return if out == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (out - exact).abs() / exact
}

/// `output ∈ (1 ± alpha) exact`.
pub fn within_alpha<T: Real>(output: T, exact: u128, alpha: f64) -> bool {
    let out = output.to_f64_lossy();
    let exact = exact as f64;
    (out - exact).abs() <= alpha * exact
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameTranscript<T> {
    pub config: GameConfig,
    pub rounds: Vec<Round<T>>,
    pub violation: Option<Violation>,
    pub halt: Option<AlgorithmHalt>,
}

#[derive(Serialize)]
struct RoundRecord {
    i: usize,
    item: u64,
    weight: i64,
    output: f64,
    exact: u128,
    ok: bool,
}

#[derive(Serialize)]
struct TranscriptRecord<'a> {
    functionality: Functionality,
    alpha: f64,
    rounds: Vec<RoundRecord>,
    violation: &'a Option<Violation>,
    halt: &'a Option<AlgorithmHalt>,
}

impl<T: Real> GameTranscript<T> {
    /// First round whose output missed the `(1 ± alpha)` band.
    pub fn failure_round(&self) -> Option<usize> {
        self.rounds.iter().find(|r| !r.within_alpha).map(|r| r.i)
    }

    pub fn all_within_alpha(&self) -> bool {
        self.failure_round().is_none()
    }

    pub fn max_relative_error(&self) -> f64 {
        self.rounds.iter().map(|r| relative_error(r.output, r.exact)).fold(0.0, f64::max)
    }

    pub fn final_relative_error(&self) -> Option<f64> {
        self.rounds.last().map(|r| relative_error(r.output, r.exact))
    }

    pub fn updates(&self) -> Vec<StreamUpdate> {
        self.rounds.iter().map(|r| r.update).collect()
    }

    /// One JSON document: metadata plus `rounds: [{i, item, weight, output, exact, ok}]`.
    pub fn to_json(&self) -> serde_json::Value {
        let rounds = self
            .rounds
            .iter()
            .map(|r| RoundRecord {
                i: r.i,
                item: r.update.item,
                weight: r.update.weight,
                output: r.output.to_f64_lossy(),
                exact: r.exact,
                ok: r.within_alpha,
            })
            .collect();
        let record = TranscriptRecord {
            functionality: self.config.functionality,
            alpha: self.config.alpha,
            rounds,
            violation: &self.violation,
            halt: &self.halt,
        };
        serde_json::to_value(record).expect("transcript is serializable")
    }
}

fn check_update(model: &StreamModel, u: StreamUpdate, n: u64) -> Result<(), String> {
    if u.item == 0 || u.item > n {
        return Err(format!("item {} outside [1, {n}]", u.item));
    }
    if !model.admits_weight(u.weight) {
        return Err(format!("weight {} not allowed in the {model} model", u.weight));
    }
    Ok(())
}

/// Plays up to `config.m` rounds of `adversary` against `algorithm`.
///
/// Stops early when the adversary runs dry, breaks its declared model (the
/// offending update is not played) or the algorithm halts.
pub fn play_game<A, D>(algorithm: &mut A, adversary: &mut D, config: GameConfig) -> GameTranscript<A::Scalar>
where
    A: StreamingAlgorithm,
    D: Adversary<A::Scalar> + ?Sized,
{
    let model = adversary.model();
    let mut oracle = FrequencyVector::new(config.n);
    let mut transcript = GameTranscript { config, rounds: Vec::with_capacity(config.m), violation: None, halt: None };
    for i in 1..=config.m {
        let Some(update) = adversary.next_update(&transcript.rounds) else {
            break;
        };
        if let Err(reason) = check_update(&model, update, config.n) {
            transcript.violation = Some(Violation { round: i, reason });
            break;
        }
        oracle.apply(update).expect("range checked above");
        if let StreamModel::TauBounded(tau) = model {
            if oracle.h2() as f64 > tau * oracle.f2() as f64 {
                transcript.violation = Some(Violation { round: i, reason: format!("prefix is not {tau}-bounded") });
                break;
            }
        }
        let output = match algorithm.process(update) {
            Ok(output) => output,
            Err(halt) => {
                transcript.halt = Some(halt);
                break;
            }
        };
        let exact = config.functionality.evaluate(&oracle);
        transcript.rounds.push(Round { i, update, output, exact, within_alpha: within_alpha(output, exact, config.alpha) });
    }
    transcript
}
