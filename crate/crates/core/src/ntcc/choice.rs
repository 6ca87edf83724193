use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ProcessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChoiceKind {
    /// Options are indices of enabled branches of a sum.
    Sum,
    /// Options are delays of a `*P`.
    Star,
}

/// A nondeterministic choice with at least two options.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChoicePoint {
    pub kind: ChoiceKind,
    pub options: Vec<u32>,
}

/// Resolves choice points; returns an index into `point.options`.
pub trait Chooser {
    fn choose(&mut self, point: &ChoicePoint) -> usize;
}

/// Always the first option (lowest branch index, shortest delay).
#[derive(Clone, Copy, Debug, Default)]
pub struct FirstChoice;

impl Chooser for FirstChoice {
    fn choose(&mut self, _: &ChoicePoint) -> usize {
        0
    }
}

/// Uniform choice from a seeded ChaCha8 stream; reproducible per seed.
#[derive(Clone, Debug)]
pub struct RandomChoice(ChaCha8Rng);

impl RandomChoice {
    pub fn new(seed: u64) -> Self {
        RandomChoice(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl Chooser for RandomChoice {
    fn choose(&mut self, point: &ChoicePoint) -> usize {
        self.0.gen_range(0..point.options.len())
    }
}

/// Replays recorded picks in order, then falls back to the first option.
#[derive(Clone, Debug, Default)]
pub struct ScriptedChoice {
    picks: Vec<usize>,
    pos: usize,
}

impl ScriptedChoice {
    pub fn new(picks: Vec<usize>) -> Self {
        ScriptedChoice { picks, pos: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }
}

impl Chooser for ScriptedChoice {
    fn choose(&mut self, point: &ChoicePoint) -> usize {
        let pick = self.picks.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        pick.min(point.options.len() - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ChoiceMode {
    #[default]
    Deterministic,
    SeededRandom,
    EnumerateAll,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChoicePolicy {
    pub mode: ChoiceMode,
    pub seed: u64,
    /// Largest delay `*P` may pick.
    pub star_bound: u32,
}

impl Default for ChoicePolicy {
    fn default() -> Self {
        ChoicePolicy { mode: ChoiceMode::Deterministic, seed: 0, star_bound: 0 }
    }
}

impl ChoicePolicy {
    pub fn deterministic() -> Self {
        ChoicePolicy::default()
    }

    pub fn seeded(seed: u64) -> Self {
        ChoicePolicy { mode: ChoiceMode::SeededRandom, seed, ..ChoicePolicy::default() }
    }

    pub fn chooser(&self) -> Result<Box<dyn Chooser + Send>, ProcessError> {
        match self.mode {
            ChoiceMode::Deterministic => Ok(Box::new(FirstChoice)),
            ChoiceMode::SeededRandom => Ok(Box::new(RandomChoice::new(self.seed))),
            ChoiceMode::EnumerateAll => Err(ProcessError::EnumerateUnsupported),
        }
    }
}
