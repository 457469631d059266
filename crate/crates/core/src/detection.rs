//! Greedy detection of the final maximal clique of a state.
//!
//! Start from a vertex of maximal rate, then repeatedly extend the current
//! clique by a common neighbour of maximal rate until no common neighbour is
//! left. All comparisons are on exponents `L_v`.

use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::graph::{is_maximal_clique, Graph, OrderedClique};
use crate::math;
use crate::process::replica_rng;
use crate::rates::{RateModel, State};

/// Relative tolerance under which two exponents count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Smallest vertex index among the tied maxima.
    Lexicographic,
    /// Uniform choice among the tied maxima, from a seeded stream.
    Seeded(u64),
}

fn pick_max<R: RngCore>(candidates: &[usize], exponents: &[f64], rng: Option<&mut R>) -> usize {
    let top = candidates
        .iter()
        .map(|&v| exponents[v])
        .fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&v| math::ties(exponents[v], top, TIE_TOLERANCE))
        .collect();
    match rng {
        Some(rng) if tied.len() > 1 => tied[(rng.next_u64() % tied.len() as u64) as usize],
        _ => tied[0],
    }
}

/// Final maximal clique for a precomputed exponent vector.
pub fn final_clique_from_exponents(g: &Graph, exponents: &[f64], tie: TieBreak) -> OrderedClique {
    let mut rng = match tie {
        TieBreak::Lexicographic => None,
        TieBreak::Seeded(seed) => Some(replica_rng(seed, 0)),
    };
    let all: Vec<usize> = (0..g.len()).collect();
    let first = pick_max(&all, exponents, rng.as_mut());
    let mut clique = alloc::vec![first];
    let mut candidates: Vec<usize> = g.neighbors(first).to_vec();
    while !candidates.is_empty() {
        let next = pick_max(&candidates, exponents, rng.as_mut());
        clique.push(next);
        candidates.retain(|&w| w != next && g.adjacent(w, next));
    }
    OrderedClique::from_vec_unchecked(clique)
}

/// Final maximal clique for `state`.
pub fn final_maximal_clique(model: &RateModel<'_>, state: &State, tie: TieBreak) -> OrderedClique {
    final_clique_from_exponents(model.graph(), &model.exponents(state), tie)
}

/// Checks the defining properties of a final maximal clique: `v_1` has a
/// maximal exponent over `V`; exponents are non-increasing along the order;
/// each `v_{k+1}` is a common neighbour of the prefix with maximal exponent
/// among all such; and the clique is maximal.
pub fn check_final_properties(model: &RateModel<'_>, state: &State, c: &OrderedClique) -> bool {
    let g = model.graph();
    let vs = c.vertices();
    if !is_maximal_clique(g, vs) {
        return false;
    }
    let l = model.exponents(state);
    let top = math::max(&l);
    if !math::ties(l[vs[0]], top, TIE_TOLERANCE) {
        return false;
    }
    for k in 1..vs.len() {
        let prev = l[vs[k - 1]];
        let cur = l[vs[k]];
        if cur > prev && !math::ties(cur, prev, TIE_TOLERANCE) {
            return false;
        }
        let common = g.common_neighbors(&vs[..k]);
        if !common.contains(&vs[k]) {
            return false;
        }
        let best = common
            .iter()
            .map(|&w| l[w])
            .fold(f64::NEG_INFINITY, f64::max);
        if !math::ties(cur, best, TIE_TOLERANCE) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::enumerate_maximal_cliques;
    use crate::graph::tests::figure1;
    use crate::rates::RateParams;

    fn labelled(g: &Graph, c: &OrderedClique) -> Vec<u64> {
        g.labels_of(c.vertices())
    }

    fn state_with(g: &Graph, pairs: &[(u64, u64)]) -> State {
        let mut counts = alloc::vec![0; g.len()];
        for &(label, c) in pairs {
            counts[g.index_of(label).unwrap()] = c;
        }
        State::from_counts(counts)
    }

    #[test]
    fn zero_state_lexicographic() {
        let g = figure1();
        let m = RateModel::new(&g, &RateParams::uniform(1.0, 1.0)).unwrap();
        let c = final_maximal_clique(&m, &State::zeros(8), TieBreak::Lexicographic);
        assert_eq!(labelled(&g, &c), [1, 2]);
        assert!(check_final_properties(&m, &State::zeros(8), &c));
    }

    #[test]
    fn ties_at_the_top_resolve_to_4_5_6() {
        let g = figure1();
        let m = RateModel::new(&g, &RateParams::uniform(1.0, 1.0)).unwrap();
        let s = state_with(&g, &[(5, 3), (6, 2)]);
        let l = m.exponents(&s);
        for label in [4, 5, 6] {
            assert_eq!(l[g.index_of(label).unwrap()], 5.0);
        }
        let c = final_maximal_clique(&m, &s, TieBreak::Lexicographic);
        assert_eq!(labelled(&g, &c), [4, 5, 6]);
    }

    #[test]
    fn five_then_six_gives_5_6_4() {
        // L_5 = 8 > L_6 = 7 > L_4 = 5
        let g = figure1();
        let m = RateModel::new(&g, &RateParams::uniform(2.0, 1.0)).unwrap();
        let s = state_with(&g, &[(5, 3), (6, 2)]);
        let c = final_maximal_clique(&m, &s, TieBreak::Lexicographic);
        assert_eq!(labelled(&g, &c), [5, 6, 4]);
        assert!(check_final_properties(&m, &s, &c));
    }

    #[test]
    fn reversed_order_valid_at_zero_state() {
        let g = figure1();
        let m = RateModel::new(&g, &RateParams::uniform(1.0, 1.0)).unwrap();
        let c = OrderedClique::new(&g, g.indices_of(&[2, 1]).unwrap()).unwrap();
        assert!(check_final_properties(&m, &State::zeros(8), &c));
    }

    #[test]
    fn positive_count_elsewhere_breaks_property_one() {
        let g = figure1();
        let m = RateModel::new(&g, &RateParams::uniform(1.0, 1.0)).unwrap();
        let c = OrderedClique::new(&g, g.indices_of(&[7, 8]).unwrap()).unwrap();
        let s = state_with(&g, &[(4, 1)]);
        assert!(!check_final_properties(&m, &s, &c));
    }

    #[test]
    fn seeded_ties_explore_all_cliques() {
        let g = figure1();
        let m = RateModel::new(&g, &RateParams::uniform(1.0, 1.0)).unwrap();
        let s = State::zeros(8);
        let cliques = enumerate_maximal_cliques(&g);
        let mut hit = alloc::vec![false; cliques.len()];
        for seed in 0..400 {
            let c = final_maximal_clique(&m, &s, TieBreak::Seeded(seed));
            assert!(check_final_properties(&m, &s, &c));
            let id = cliques.iter().position(|k| *k == c.sorted()).unwrap();
            hit[id] = true;
        }
        assert!(hit.iter().all(|&h| h));
    }
}
