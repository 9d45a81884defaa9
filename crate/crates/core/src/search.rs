//! Seeded randomness and search budgets shared by the heuristic routines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Effort knobs for randomized local searches. Results are a deterministic
/// function of the inputs and `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub restarts: usize,
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            restarts: 8,
            sweeps: 200,
            seed: 0,
        }
    }
}

impl SearchBudget {
    pub fn with_seed(self, seed: u64) -> Self {
        SearchBudget { seed, ..self }
    }
}

/// Independent stream `stream` of the generator seeded by `seed`.
pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub(crate) fn uniform<S: Scalar>(rng: &mut impl Rng) -> S {
    S::of(rng.gen_range(-1.0..1.0))
}
