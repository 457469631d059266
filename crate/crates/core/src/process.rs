//! Sampling the growth process.
//!
//! One step draws a vertex `v` with probability `exp(L_v) / Σ_u exp(L_u)`
//! and adds a particle there. Sampling is inverse-CDF over max-shifted
//! weights with one uniform draw per step.
//!
//! Randomness comes from ChaCha8 streams: a master seed selects the key and
//! replica `i` reads stream `i`, so replicas are independent and every run is
//! reproducible bit for bit.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::is_connected;
use crate::math;
use crate::rates::{ExponentCache, RateModel, State};

/// The generator used for every simulation.
pub type StreamRng = ChaCha8Rng;

/// Generator for replica `replica` under master seed `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Uniform draw in `[0, 1)` from the top 53 bits of one `u64`.
#[inline]
pub fn unit_draw<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Transition probabilities at `state`, computed from scratch.
pub fn transition_probs(model: &RateModel<'_>, state: &State) -> Vec<f64> {
    math::softmax(&model.exponents(state))
}

/// Adds one particle at `v` and updates the exponent cache incrementally.
#[inline]
pub fn apply_allocation(
    model: &RateModel<'_>,
    state: &mut State,
    cache: &mut ExponentCache,
    v: usize,
) {
    state.add(v);
    cache.apply(model, v);
}

/// Inverse-CDF pick over `exp(L − max L)` for a uniform `u` in `[0, 1)`.
pub fn sample_index(exponents: &[f64], u: f64) -> usize {
    let m = math::max(exponents);
    let mut total = 0.0;
    for &l in exponents {
        total += math::exp(l - m);
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (v, &l) in exponents.iter().enumerate() {
        let w = math::exp(l - m);
        if w > 0.0 {
            acc += w;
            last_positive = v;
            if target < acc {
                return v;
            }
        }
    }
    // rounding left target at or beyond the accumulated mass
    last_positive
}

/// Draws the next vertex, applies the allocation and returns the vertex.
pub fn step<R: RngCore + ?Sized>(
    model: &RateModel<'_>,
    state: &mut State,
    cache: &mut ExponentCache,
    rng: &mut R,
) -> usize {
    let v = sample_index(cache.as_slice(), unit_draw(rng));
    apply_allocation(model, state, cache, v);
    v
}

/// Initial state, allocation sequence and the seed/stream that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: State,
    pub allocations: Vec<usize>,
    pub seed: u64,
    pub stream: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.allocations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allocations.is_empty()
    }

    /// State after the first `n` allocations.
    pub fn state_at(&self, n: usize) -> State {
        let mut s = self.initial.clone();
        for &v in &self.allocations[..n] {
            s.add(v);
        }
        s
    }

    pub fn final_state(&self) -> State {
        self.state_at(self.allocations.len())
    }

    /// States `X(0), X(1), …, X(n)` in order.
    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        let mut s = self.initial.clone();
        core::iter::once(s.clone()).chain(self.allocations.iter().map(move |&v| {
            s.add(v);
            s.clone()
        }))
    }
}

fn check_initial(model: &RateModel<'_>, x0: &State) -> Result<()> {
    if x0.len() != model.len() {
        return Err(Error::LengthMismatch {
            expected: model.len(),
            got: x0.len(),
        });
    }
    if !is_connected(model.graph()) {
        return Err(Error::Disconnected);
    }
    Ok(())
}

/// Runs `steps` allocations from `x0` using stream `stream` of `seed`.
pub fn run_stream(
    model: &RateModel<'_>,
    x0: &State,
    steps: usize,
    seed: u64,
    stream: u64,
) -> Result<Trajectory> {
    check_initial(model, x0)?;
    let mut rng = replica_rng(seed, stream);
    let mut state = x0.clone();
    let mut cache = ExponentCache::new(model, &state);
    let mut allocations = Vec::with_capacity(steps);
    for _ in 0..steps {
        allocations.push(step(model, &mut state, &mut cache, &mut rng));
    }
    Ok(Trajectory {
        initial: x0.clone(),
        allocations,
        seed,
        stream,
    })
}

/// Runs `steps` allocations from `x0`; deterministic in `seed`.
pub fn run(model: &RateModel<'_>, x0: &State, steps: usize, seed: u64) -> Result<Trajectory> {
    run_stream(model, x0, steps, seed, 0)
}
