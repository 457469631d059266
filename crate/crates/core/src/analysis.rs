//! Trajectory post-processing and Monte Carlo aggregation.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::detection::{final_clique_from_exponents, TieBreak};
use crate::error::{Error, Result};
use crate::graph::{enumerate_maximal_cliques, Graph};
use crate::math;
use crate::process::{run_stream, Trajectory};
use crate::rates::{ExponentCache, RateModel, Regime, State};

/// Vertices receiving at least one allocation in the last
/// `⌈tail_fraction · n⌉` steps, sorted by index.
pub fn localisation_set(t: &Trajectory, tail_fraction: f64) -> Result<Vec<usize>> {
    if t.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidArgument("tail fraction must lie in (0, 1]"));
    }
    let n = t.len();
    let tail = (math::ceil(tail_fraction * n as f64) as usize).clamp(1, n);
    let mut hit = vec![false; t.initial.len()];
    for &v in &t.allocations[n - tail..] {
        hit[v] = true;
    }
    Ok((0..hit.len()).filter(|&v| hit[v]).collect())
}

/// Last step (1-based) whose allocation fell outside `set`; 0 if none did.
pub fn onset(t: &Trajectory, set: &[usize]) -> usize {
    t.allocations
        .iter()
        .rposition(|v| !set.contains(v))
        .map_or(0, |i| i + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    /// The localisation set is one vertex.
    SingleVertex,
    /// Position of the clique in [`enumerate_maximal_cliques`] order.
    MaximalClique {
        id: usize,
    },
    Undecided,
}

/// Classifies a vertex set against a precomputed maximal-clique list.
pub fn classify_with(cliques: &[Vec<usize>], set: &[usize]) -> Classification {
    if set.len() == 1 {
        return Classification::SingleVertex;
    }
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    match cliques.iter().position(|c| *c == sorted) {
        Some(id) => Classification::MaximalClique { id },
        None => Classification::Undecided,
    }
}

pub fn classify_outcome(g: &Graph, set: &[usize]) -> Classification {
    classify_with(&enumerate_maximal_cliques(g), set)
}

fn require_critical(model: &RateModel<'_>) -> Result<f64> {
    match (model.regime(), model.lambda()) {
        (Regime::Critical, Some(l)) => Ok(l),
        (found, _) => Err(Error::RegimeMismatch {
            expected: "critical",
            found,
        }),
    }
}

/// Realised `C_vu` for all ordered pairs of `clique` at `state`:
///
/// ```text
/// C_vu = λ Σ_{w ∉ {v,u}} X_w [1{w∼v, w≁u} − 1{w∼u, w≁v}]
/// ```
///
/// Excluding `w ∈ {v, u}` makes `C_vu = L_v − L_u`, so `e^{C_vu}` is the
/// ratio of in-clique shares.
pub fn c_matrix(model: &RateModel<'_>, state: &State, clique: &[usize]) -> Result<Vec<Vec<f64>>> {
    let lambda = require_critical(model)?;
    let g = model.graph();
    if clique.len() < 2 || !g.is_clique(clique) {
        return Err(Error::NotAClique);
    }
    let x = state.counts();
    let m = clique.len();
    let mut c = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let (v, u) = (clique[i], clique[j]);
            let mut acc: i128 = 0;
            for (w, &xw) in x.iter().enumerate() {
                if w == v || w == u {
                    continue;
                }
                let (nv, nu) = (g.adjacent(w, v), g.adjacent(w, u));
                if nv && !nu {
                    acc += i128::from(xw);
                } else if nu && !nv {
                    acc -= i128::from(xw);
                }
            }
            c[i][j] = lambda * acc as f64;
            c[j][i] = -c[i][j];
        }
    }
    Ok(c)
}

/// Limit targets for `X_v / X_u`: `e^{C_vu}` in the critical regime, 1 in
/// the clique regime.
pub fn ratio_targets(
    model: &RateModel<'_>,
    state: &State,
    clique: &[usize],
) -> Result<Vec<Vec<f64>>> {
    match model.regime() {
        Regime::Critical => Ok(c_matrix(model, state, clique)?
            .into_iter()
            .map(|row| row.into_iter().map(math::exp).collect())
            .collect()),
        Regime::Clique => {
            if clique.len() < 2 || !model.graph().is_clique(clique) {
                return Err(Error::NotAClique);
            }
            Ok(vec![vec![1.0; clique.len()]; clique.len()])
        }
        found => Err(Error::RegimeMismatch {
            expected: "critical or clique",
            found,
        }),
    }
}

/// `X_v / X_u` at `state` for all ordered pairs of `set`.
pub fn ratio_matrix(state: &State, set: &[usize]) -> Vec<Vec<f64>> {
    set.iter()
        .map(|&v| {
            set.iter()
                .map(|&u| state.count(v) as f64 / state.count(u) as f64)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    pub passed: bool,
    pub max_deviation: f64,
}

/// Largest relative deviation `|X_v/X_u − t_vu| / t_vu` at the end of `t`.
pub fn ratio_limit_check(
    t: &Trajectory,
    clique: &[usize],
    target: &[Vec<f64>],
    tol: f64,
) -> Result<RatioCheck> {
    if clique.len() < 2 {
        return Err(Error::InvalidArgument(
            "ratio limits need at least two vertices",
        ));
    }
    if target.len() != clique.len() || target.iter().any(|r| r.len() != clique.len()) {
        return Err(Error::LengthMismatch {
            expected: clique.len(),
            got: target.len(),
        });
    }
    let s = t.final_state();
    if let Some(&v) = clique.iter().find(|&&v| s.count(v) == 0) {
        return Err(Error::ZeroCount(v));
    }
    let ratios = ratio_matrix(&s, clique);
    let mut worst: f64 = 0.0;
    for i in 0..clique.len() {
        for j in 0..clique.len() {
            if i != j {
                worst = worst.max(math::abs(ratios[i][j] - target[i][j]) / target[i][j]);
            }
        }
    }
    Ok(RatioCheck {
        passed: worst <= tol,
        max_deviation: worst,
    })
}

/// `sup_{n ≥ n0} (1/n) Σ_i |X_{v_i}(n) − p_i n|` along `t`.
pub fn lln_deviation(t: &Trajectory, clique: &[usize], probs: &[f64], n0: usize) -> Result<f64> {
    if probs.len() != clique.len() {
        return Err(Error::LengthMismatch {
            expected: clique.len(),
            got: probs.len(),
        });
    }
    if n0 >= t.len() {
        return Err(Error::InvalidArgument("n0 must be below the horizon"));
    }
    let mut counts: Vec<i64> = clique.iter().map(|&v| t.initial.count(v) as i64).collect();
    let mut worst: f64 = 0.0;
    for (i, &a) in t.allocations.iter().enumerate() {
        if let Some(k) = clique.iter().position(|&v| v == a) {
            counts[k] += 1;
        }
        let n = i + 1;
        if n >= n0 {
            let nf = n as f64;
            let dev: f64 = counts
                .iter()
                .zip(probs)
                .map(|(&c, &p)| math::abs(c as f64 - p * nf))
                .sum();
            worst = worst.max(dev / nf);
        }
    }
    Ok(worst)
}

/// Difference process `Z_i(n) = X_i(n) − X_m(n)` of a trajectory on a
/// complete graph, with return times to the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZChainPath {
    pub dim: usize,
    /// Row-major: `Z(n)` is `z_path[n·dim .. (n+1)·dim]`.
    pub z_path: Vec<i64>,
    /// `σ_0 = 0`, then every `n ≥ 1` with `Z(n) = 0`.
    pub return_times: Vec<usize>,
}

impl ZChainPath {
    pub fn z(&self, n: usize) -> &[i64] {
        &self.z_path[n * self.dim..(n + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.z_path.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.z_path.is_empty()
    }

    pub fn return_stats(&self) -> ReturnStats {
        ReturnStats::from_times(&self.return_times)
    }
}

/// Gap statistics of return times `σ_k − σ_{k−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub returns: usize,
    pub mean_gap: f64,
    pub std_error: f64,
    pub max_gap: usize,
    /// `(K, mean of the first K gaps)` at K = 10, 100, 1000, …
    pub running_means: Vec<(usize, f64)>,
}

impl ReturnStats {
    pub fn from_times(times: &[usize]) -> Self {
        let gaps: Vec<f64> = times.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
        let k = gaps.len();
        let max_gap = times.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
        if k == 0 {
            return ReturnStats {
                returns: 0,
                mean_gap: f64::NAN,
                std_error: f64::NAN,
                max_gap,
                running_means: Vec::new(),
            };
        }
        let mean = gaps.iter().sum::<f64>() / k as f64;
        let var = if k > 1 {
            gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / (k - 1) as f64
        } else {
            0.0
        };
        let mut running_means = Vec::new();
        let mut checkpoint = 10;
        let mut acc = 0.0;
        for (i, g) in gaps.iter().enumerate() {
            acc += g;
            if i + 1 == checkpoint {
                running_means.push((checkpoint, acc / checkpoint as f64));
                checkpoint *= 10;
            }
        }
        ReturnStats {
            returns: k,
            mean_gap: mean,
            std_error: math::sqrt(var / k as f64),
            max_gap,
            running_means,
        }
    }
}

pub fn z_chain(g: &Graph, t: &Trajectory) -> Result<ZChainPath> {
    if !g.is_complete() || g.len() < 2 {
        return Err(Error::NotComplete);
    }
    if t.initial.len() != g.len() {
        return Err(Error::LengthMismatch {
            expected: g.len(),
            got: t.initial.len(),
        });
    }
    let m = g.len();
    let dim = m - 1;
    let last = m - 1;
    let x0 = t.initial.counts();
    let mut z: Vec<i64> = (0..dim).map(|i| x0[i] as i64 - x0[last] as i64).collect();
    let mut z_path = Vec::with_capacity((t.len() + 1) * dim);
    z_path.extend_from_slice(&z);
    let mut return_times = vec![0];
    for (i, &v) in t.allocations.iter().enumerate() {
        if v == last {
            for zi in &mut z {
                *zi -= 1;
            }
        } else {
            z[v] += 1;
        }
        z_path.extend_from_slice(&z);
        if z.iter().all(|&zi| zi == 0) {
            return_times.push(i + 1);
        }
    }
    Ok(ZChainPath {
        dim,
        z_path,
        return_times,
    })
}

/// Renewal times: `T_0 = 0`; `T_{k+1}` is the first step after `T_k` whose
/// allocation leaves the (lexicographic) final maximal clique of
/// `X(T_k)`. Only times within the trajectory are reported.
pub fn renewal_times(model: &RateModel<'_>, t: &Trajectory) -> Vec<usize> {
    let g = model.graph();
    let mut cache = ExponentCache::new(model, &t.initial);
    let mut current = final_clique_from_exponents(g, cache.as_slice(), TieBreak::Lexicographic);
    let mut times = vec![0];
    for (i, &v) in t.allocations.iter().enumerate() {
        let left = !current.contains(v);
        cache.apply(model, v);
        if left {
            times.push(i + 1);
            current = final_clique_from_exponents(g, cache.as_slice(), TieBreak::Lexicographic);
        }
    }
    times
}

/// Largest change, over steps `n ≥ from`, of the exponent differences
/// `L_v − L_{set[0]}` relative to their values at step `from`. Uses the
/// incremental cache, so it measures the arithmetic the sampler sees.
pub fn exponent_difference_drift(
    model: &RateModel<'_>,
    t: &Trajectory,
    set: &[usize],
    from: usize,
) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let mut state = t.initial.clone();
    let mut cache = ExponentCache::new(model, &state);
    for &v in &t.allocations[..from] {
        state.add(v);
        cache.apply(model, v);
    }
    let diffs =
        |c: &ExponentCache| -> Vec<f64> { set.iter().map(|&v| c.get(v) - c.get(set[0])).collect() };
    let reference = diffs(&cache);
    let mut worst: f64 = 0.0;
    for &v in &t.allocations[from..] {
        cache.apply(model, v);
        for (d, r) in diffs(&cache).iter().zip(&reference) {
            worst = worst.max(math::abs(d - r));
        }
    }
    worst
}

/// Per-replica outcome. Vertex sets are reported by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaOutcome {
    pub replica: u64,
    pub localisation_set: Vec<u64>,
    pub classification: Classification,
    pub onset: usize,
    /// `X_v / X_u` at the horizon over the localisation set, in set order.
    pub ratio_matrix: Vec<Vec<f64>>,
    /// Realised `C_vu` (critical regime, set is a clique).
    pub c_matrix: Option<Vec<Vec<f64>>>,
    /// Max relative deviation of terminal ratios from their limit targets.
    pub ratio_deviation: Option<f64>,
    /// Max change of in-set exponent differences after onset.
    pub exponent_drift: Option<f64>,
    pub final_counts: Vec<u64>,
}

/// Simulates and analyses replica `replica` (stream `replica` of `seed`).
pub fn analyse_replica(
    model: &RateModel<'_>,
    cliques: &[Vec<usize>],
    x0: &State,
    steps: usize,
    seed: u64,
    replica: u64,
    tail_fraction: f64,
) -> Result<ReplicaOutcome> {
    let t = run_stream(model, x0, steps, seed, replica)?;
    outcome_of(model, cliques, &t, replica, tail_fraction)
}

/// Analyses an existing trajectory.
pub fn outcome_of(
    model: &RateModel<'_>,
    cliques: &[Vec<usize>],
    t: &Trajectory,
    replica: u64,
    tail_fraction: f64,
) -> Result<ReplicaOutcome> {
    let g = model.graph();
    let set = localisation_set(t, tail_fraction)?;
    let classification = classify_with(cliques, &set);
    let start = onset(t, &set);
    let last = t.final_state();
    let is_clique = set.len() >= 2 && g.is_clique(&set);
    let c = if is_clique && model.regime() == Regime::Critical {
        Some(c_matrix(model, &last, &set)?)
    } else {
        None
    };
    let ratio_deviation =
        if is_clique && matches!(model.regime(), Regime::Critical | Regime::Clique) {
            let target = ratio_targets(model, &last, &set)?;
            ratio_limit_check(t, &set, &target, f64::INFINITY)
                .ok()
                .map(|r| r.max_deviation)
        } else {
            None
        };
    let exponent_drift = is_clique.then(|| exponent_difference_drift(model, t, &set, start));
    Ok(ReplicaOutcome {
        replica,
        localisation_set: g.labels_of(&set),
        classification,
        onset: start,
        ratio_matrix: ratio_matrix(&last, &set),
        c_matrix: c,
        ratio_deviation,
        exponent_drift,
        final_counts: last.counts().to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub count: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueFrequency {
    pub id: usize,
    pub clique: Vec<u64>,
    pub count: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub maximal_cliques: Vec<CliqueFrequency>,
    pub single_vertex: Frequency,
    pub undecided: Frequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalisationReport {
    pub replicas: usize,
    pub steps: usize,
    pub seed: u64,
    pub tail_fraction: f64,
    pub per_replica: Vec<ReplicaOutcome>,
    pub aggregate: Aggregate,
}

impl LocalisationReport {
    /// Folds outcomes in the order given; callers pass them by replica index.
    pub fn assemble(
        g: &Graph,
        cliques: &[Vec<usize>],
        outcomes: Vec<ReplicaOutcome>,
        steps: usize,
        seed: u64,
        tail_fraction: f64,
    ) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::NoReplicas);
        }
        let total = outcomes.len();
        let freq = |count: usize| Frequency {
            count,
            frequency: count as f64 / total as f64,
        };
        let mut per_clique = vec![0usize; cliques.len()];
        let (mut single, mut undecided) = (0, 0);
        for o in &outcomes {
            match o.classification {
                Classification::SingleVertex => single += 1,
                Classification::MaximalClique { id } => per_clique[id] += 1,
                Classification::Undecided => undecided += 1,
            }
        }
        let maximal_cliques = cliques
            .iter()
            .zip(&per_clique)
            .enumerate()
            .map(|(id, (c, &count))| CliqueFrequency {
                id,
                clique: g.labels_of(c),
                count,
                frequency: count as f64 / total as f64,
            })
            .collect();
        Ok(LocalisationReport {
            replicas: total,
            steps,
            seed,
            tail_fraction,
            per_replica: outcomes,
            aggregate: Aggregate {
                maximal_cliques,
                single_vertex: freq(single),
                undecided: freq(undecided),
            },
        })
    }
}

/// Runs `replicas` independent trajectories sequentially and aggregates.
pub fn monte_carlo_report(
    model: &RateModel<'_>,
    x0: &State,
    steps: usize,
    replicas: usize,
    seed: u64,
    tail_fraction: f64,
) -> Result<LocalisationReport> {
    if replicas == 0 {
        return Err(Error::NoReplicas);
    }
    let cliques = enumerate_maximal_cliques(model.graph());
    let outcomes = (0..replicas as u64)
        .map(|r| analyse_replica(model, &cliques, x0, steps, seed, r, tail_fraction))
        .collect::<Result<Vec<_>>>()?;
    LocalisationReport::assemble(
        model.graph(),
        &cliques,
        outcomes,
        steps,
        seed,
        tail_fraction,
    )
}
