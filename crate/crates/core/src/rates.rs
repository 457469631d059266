//! Rate parameters, states and log-rate (exponent) bookkeeping.
//!
//! The growth rate of vertex `v` at state `x` is `exp(L_v)` with
//!
//! ```text
//! L_v = b_v + α_v x_v + Σ_{u∼v} β_vu x_u
//! ```
//!
//! where `b_v` is an additive offset (the log of a multiplicative rate
//! coefficient). Rates themselves are never formed; everything works on `L`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::math;

/// Parameter regime of a uniform `(α, β)` model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `0 < β < α`: all but finitely many particles land on one vertex.
    SingleVertex,
    /// `0 < α = β`: localisation on a maximal clique with random ratio limits.
    Critical,
    /// `0 < α < β`: localisation on a maximal clique with equal shares.
    Clique,
    /// Non-positive or per-vertex parameters; no localisation claim.
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Interaction {
    Uniform {
        alpha: f64,
        beta: f64,
    },
    /// Per-vertex self weights and per-ordered-edge weights `(v, u, β_vu)`:
    /// `β_vu` multiplies `x_u` in `L_v`. Unlisted edges default to 0.
    General {
        alpha: Vec<f64>,
        beta: Vec<(usize, usize, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub interaction: Interaction,
    /// Per-vertex additive exponent offsets; empty means all zero.
    #[serde(default)]
    pub base_offset: Vec<f64>,
}

impl RateParams {
    pub fn uniform(alpha: f64, beta: f64) -> Self {
        RateParams {
            interaction: Interaction::Uniform { alpha, beta },
            base_offset: Vec::new(),
        }
    }

    pub fn general(alpha: Vec<f64>, beta: Vec<(usize, usize, f64)>) -> Self {
        RateParams {
            interaction: Interaction::General { alpha, beta },
            base_offset: Vec::new(),
        }
    }

    pub fn with_base_offset(mut self, offsets: Vec<f64>) -> Self {
        self.base_offset = offsets;
        self
    }

    /// Multiplicative rate coefficients `c_v > 0`, stored as offsets `ln c_v`.
    pub fn with_coefficients(self, coefficients: &[f64]) -> Result<Self> {
        if coefficients.iter().any(|&c| c.is_nan() || c <= 0.0) {
            return Err(Error::InvalidArgument("rate coefficients must be positive"));
        }
        let offsets = coefficients.iter().map(|&c| math::ln(c)).collect();
        Ok(self.with_base_offset(offsets))
    }

    pub fn regime(&self) -> Regime {
        match self.interaction {
            Interaction::Uniform { alpha, beta } if alpha > 0.0 && beta > 0.0 => {
                if beta < alpha {
                    Regime::SingleVertex
                } else if alpha == beta {
                    Regime::Critical
                } else {
                    Regime::Clique
                }
            }
            _ => Regime::Other,
        }
    }

    /// `λ = α = β` in the critical regime and `λ = β − α` in the clique
    /// regime; `None` elsewhere.
    pub fn lambda(&self) -> Option<f64> {
        match (self.regime(), &self.interaction) {
            (Regime::Critical, Interaction::Uniform { alpha, .. }) => Some(*alpha),
            (Regime::Clique, Interaction::Uniform { alpha, beta }) => Some(beta - alpha),
            _ => None,
        }
    }
}

/// Particle counts per vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct State {
    counts: Vec<u64>,
    total: u64,
}

impl State {
    pub fn zeros(n: usize) -> Self {
        State {
            counts: vec![0; n],
            total: 0,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        State { counts, total }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, v: usize) -> u64 {
        self.counts[v]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    #[inline]
    pub fn add(&mut self, v: usize) {
        self.counts[v] += 1;
        self.total += 1;
    }
}

/// Parameters compiled against a graph: per-vertex self weight, offset, and
/// the weighted in/out neighbour lists used by exponent evaluation and
/// incremental updates.
#[derive(Debug, Clone)]
pub struct RateModel<'g> {
    graph: &'g Graph,
    params: RateParams,
    self_weight: Vec<f64>,
    offset: Vec<f64>,
    // (u, β_vu): contributions to L_v
    incoming: Vec<Vec<(usize, f64)>>,
    // (u, β_uv): how an allocation at v moves L_u
    outgoing: Vec<Vec<(usize, f64)>>,
}

impl<'g> RateModel<'g> {
    pub fn new(graph: &'g Graph, params: &RateParams) -> Result<Self> {
        let n = graph.len();
        let offset = match params.base_offset.len() {
            0 => vec![0.0; n],
            len if len == n => params.base_offset.clone(),
            len => {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: len,
                })
            }
        };
        let (self_weight, incoming) = match &params.interaction {
            Interaction::Uniform { alpha, beta } => {
                let incoming = (0..n)
                    .map(|v| graph.neighbors(v).iter().map(|&u| (u, *beta)).collect())
                    .collect();
                (vec![*alpha; n], incoming)
            }
            Interaction::General { alpha, beta } => {
                if alpha.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        got: alpha.len(),
                    });
                }
                let mut incoming: Vec<Vec<(usize, f64)>> = (0..n)
                    .map(|v| graph.neighbors(v).iter().map(|&u| (u, 0.0)).collect())
                    .collect();
                for &(v, u, w) in beta {
                    graph.check_vertex(v)?;
                    graph.check_vertex(u)?;
                    if !graph.adjacent(v, u) {
                        return Err(Error::NonEdgeCoefficient(v, u));
                    }
                    let slot = incoming[v]
                        .iter_mut()
                        .find(|(x, _)| *x == u)
                        .expect("adjacent pair has a slot");
                    slot.1 = w;
                }
                (alpha.clone(), incoming)
            }
        };
        let mut outgoing: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (v, list) in incoming.iter().enumerate() {
            for &(u, w) in list {
                outgoing[u].push((v, w));
            }
        }
        Ok(RateModel {
            graph,
            params: params.clone(),
            self_weight,
            offset,
            incoming,
            outgoing,
        })
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn params(&self) -> &RateParams {
        &self.params
    }

    pub fn regime(&self) -> Regime {
        self.params.regime()
    }

    pub fn lambda(&self) -> Option<f64> {
        self.params.lambda()
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    /// `L_v` evaluated from scratch.
    pub fn rate_exponent(&self, state: &State, v: usize) -> f64 {
        let x = state.counts();
        let mut l = self.offset[v] + self.self_weight[v] * x[v] as f64;
        for &(u, w) in &self.incoming[v] {
            l += w * x[u] as f64;
        }
        l
    }

    /// Exponent vector `L` evaluated from scratch.
    pub fn exponents(&self, state: &State) -> Vec<f64> {
        (0..self.len())
            .map(|v| self.rate_exponent(state, v))
            .collect()
    }

    /// Exponent changes caused by one allocation at `v`, as `(vertex, delta)`
    /// pairs; the first entry is `v` itself.
    pub fn allocation_effect(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        core::iter::once((v, self.self_weight[v])).chain(self.outgoing[v].iter().copied())
    }

    /// Dense exponent change vector for one allocation at `v`.
    pub fn allocation_delta(&self, v: usize) -> Vec<f64> {
        let mut d = vec![0.0; self.len()];
        for (u, w) in self.allocation_effect(v) {
            d[u] += w;
        }
        d
    }
}

/// Per-vertex exponents kept consistent with a [`State`] through
/// incremental updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentCache {
    exponents: Vec<f64>,
}

impl ExponentCache {
    pub fn new(model: &RateModel<'_>, state: &State) -> Self {
        ExponentCache {
            exponents: model.exponents(state),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.exponents
    }

    pub fn get(&self, v: usize) -> f64 {
        self.exponents[v]
    }

    /// Applies the exponent shift of one allocation at `v`. Cost is
    /// `O(deg(v) + 1)`.
    #[inline]
    pub fn apply(&mut self, model: &RateModel<'_>, v: usize) {
        self.exponents[v] += model.self_weight[v];
        for &(u, w) in &model.outgoing[v] {
            self.exponents[u] += w;
        }
    }

    /// Largest absolute gap between cached and recomputed exponents.
    pub fn max_deviation(&self, model: &RateModel<'_>, state: &State) -> f64 {
        self.exponents
            .iter()
            .enumerate()
            .map(|(v, &l)| math::abs(l - model.rate_exponent(state, v)))
            .fold(0.0, f64::max)
    }
}
