//! Exact small-horizon probabilities and closed-form lower bounds.
//!
//! Everything here is deterministic. Enumerations are bounded by an explicit
//! budget and fail loudly when it would be exceeded.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::detection::check_final_properties;
use crate::error::{Error, Result};
use crate::graph::{d_sets, OrderedClique};
use crate::math;
use crate::rates::{ExponentCache, RateModel, Regime, State};

/// Default cap on enumerated paths or DP states.
pub const DEFAULT_BUDGET: u128 = 1_000_000;

/// Cap on terms of a truncated infinite product.
const MAX_PRODUCT_TERMS: usize = 100_000_000;

fn saturating_pow(base: u128, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base);
    }
    acc
}

/// `C(n + m − 1, m − 1)`: number of count vectors of `m` parts summing to `n`.
pub fn composition_count(n: usize, m: usize) -> u128 {
    if m == 0 {
        return u128::from(n == 0);
    }
    let k = (m - 1) as u128;
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc.saturating_mul(n as u128 + i) / i;
    }
    acc
}

fn check_state(model: &RateModel<'_>, x: &State) -> Result<()> {
    if x.len() == model.len() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            expected: model.len(),
            got: x.len(),
        })
    }
}

/// The block measure on length-`n` sequences of clique positions.
///
/// `masses[i]` belongs to the sequence whose base-`m` digits (most
/// significant first) are `i`; see [`QMeasure::path`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QMeasure {
    pub clique: OrderedClique,
    pub horizon: usize,
    pub masses: Vec<f64>,
}

impl QMeasure {
    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Clique positions `(k(1), …, k(n))` of path `index`.
    pub fn path(&self, mut index: usize) -> Vec<usize> {
        let m = self.clique.len();
        let mut out = vec![0; self.horizon];
        for slot in out.iter_mut().rev() {
            *slot = index % m;
            index /= m;
        }
        out
    }
}

/// Assigns each sequence `(k(1), …, k(n))` the product over steps of the
/// one-step probability of landing in block `V_{k(j+1)}`, evaluated at the
/// state where the first `j` particles went to `v_{k(1)}, …, v_{k(j)}`.
pub fn q_measure(
    model: &RateModel<'_>,
    x0: &State,
    clique: &OrderedClique,
    n: usize,
    budget: u128,
) -> Result<QMeasure> {
    check_state(model, x0)?;
    let g = model.graph();
    let partition = d_sets(g, clique)?;
    if !check_final_properties(model, x0, clique) {
        return Err(Error::NotFinal);
    }
    let m = clique.len();
    let needed = saturating_pow(m as u128, n);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let owner = partition
        .block_index(g.len())
        .expect("d_sets of a maximal clique partition V");
    let mut masses = Vec::with_capacity(needed as usize);
    let cache = ExponentCache::new(model, x0);
    q_descend(
        model,
        clique.vertices(),
        &owner,
        &cache,
        n,
        1.0,
        &mut masses,
    );
    Ok(QMeasure {
        clique: clique.clone(),
        horizon: n,
        masses,
    })
}

fn q_descend(
    model: &RateModel<'_>,
    clique: &[usize],
    owner: &[usize],
    cache: &ExponentCache,
    remaining: usize,
    mass: f64,
    out: &mut Vec<f64>,
) {
    if remaining == 0 {
        out.push(mass);
        return;
    }
    let probs = math::softmax(cache.as_slice());
    let mut block = vec![0.0; clique.len()];
    for (v, p) in probs.iter().enumerate() {
        block[owner[v]] += p;
    }
    for (k, &vk) in clique.iter().enumerate() {
        let mut next = cache.clone();
        next.apply(model, vk);
        q_descend(
            model,
            clique,
            owner,
            &next,
            remaining - 1,
            mass * block[k],
            out,
        );
    }
}

/// `P(first j allocations all land in `set`)` for `j = 0, …, n`.
///
/// Dynamic program over in-set count vectors: under confinement the state is
/// `x0 + Σ n_i e_{v_i}`, so the law of the next step depends on the path
/// only through `(n_1, …, n_m)`.
pub fn confinement_profile(
    model: &RateModel<'_>,
    x0: &State,
    set: &[usize],
    n: usize,
    budget: u128,
) -> Result<Vec<f64>> {
    check_state(model, x0)?;
    if set.is_empty() {
        return Err(Error::InvalidArgument("confinement set is empty"));
    }
    for (i, &v) in set.iter().enumerate() {
        model.graph().check_vertex(v)?;
        if set[..i].contains(&v) {
            return Err(Error::InvalidArgument(
                "confinement set has repeated vertices",
            ));
        }
    }
    let m = set.len();
    let needed = composition_count(n, m);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let base = model.exponents(x0);
    let deltas: Vec<Vec<f64>> = set.iter().map(|&v| model.allocation_delta(v)).collect();

    let mut profile = Vec::with_capacity(n + 1);
    profile.push(1.0);
    let mut level: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    level.insert(vec![0; m], 1.0);
    let mut exps = vec![0.0; base.len()];
    for _ in 0..n {
        let mut next: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (counts, &mass) in &level {
            exps.copy_from_slice(&base);
            for (c, d) in counts.iter().zip(&deltas) {
                if *c > 0 {
                    let c = f64::from(*c);
                    for (e, dv) in exps.iter_mut().zip(d) {
                        *e += c * dv;
                    }
                }
            }
            let lse = math::log_sum_exp(&exps);
            for (i, &v) in set.iter().enumerate() {
                let p = math::exp(exps[v] - lse);
                let mut key = counts.clone();
                key[i] += 1;
                *next.entry(key).or_insert(0.0) += mass * p;
            }
        }
        profile.push(next.values().sum());
        level = next;
    }
    Ok(profile)
}

/// Exact probability that the first `n` allocations all land in `set`.
pub fn confinement_prob(
    model: &RateModel<'_>,
    x0: &State,
    set: &[usize],
    n: usize,
    budget: u128,
) -> Result<f64> {
    Ok(*confinement_profile(model, x0, set, n, budget)?
        .last()
        .expect("profile has n + 1 entries"))
}

/// Lower bound `1 / (1 + |V| e^{−α r})` on landing at a clique vertex given
/// its block, after `r` earlier particles at that vertex.
pub fn p11_bound(v_size: usize, alpha: f64, r: u64) -> f64 {
    1.0 / (1.0 + v_size as f64 * math::exp(-alpha * r as f64))
}

/// `(Π_{r=1}^{n−1} 1/(1 + |V| e^{−α r}))^m`.
pub fn epsilon_n(v_size: usize, alpha: f64, m: usize, n: usize) -> f64 {
    let log: f64 = (1..n)
        .map(|r| math::ln_1p(v_size as f64 * math::exp(-alpha * r as f64)))
        .sum();
    math::exp(-(m as f64) * log)
}

/// A truncated infinite product reported as a certified lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedBound {
    pub value: f64,
    /// Number of factors evaluated explicitly.
    pub terms: usize,
    /// Upper bound on the omitted log-factors, already folded into `value`.
    pub tail_bound: f64,
    pub tail_tol: f64,
}

/// Upper bound on `Σ_{r ≥ first} ln(1 + V e^{−d r})`, truncated once the
/// geometric tail `V e^{−d(R+1)} / (1 − e^{−d})` drops below `tail_tol`.
fn log_product_upper(
    v_size: usize,
    decay: f64,
    first: u64,
    tail_tol: f64,
) -> Result<(f64, usize, f64)> {
    if decay.is_nan() || decay <= 0.0 || !decay.is_finite() {
        return Err(Error::InvalidArgument(
            "decay rate must be positive and finite",
        ));
    }
    if tail_tol.is_nan() || tail_tol <= 0.0 {
        return Err(Error::InvalidArgument("tail tolerance must be positive"));
    }
    let v = v_size as f64;
    let ratio = 1.0 / -libm::expm1(-decay);
    let mut sum = 0.0;
    let mut r = first;
    let mut terms = 0;
    loop {
        // tail bound for r, r+1, ... given sum holds first..r-1
        let tail = v * math::exp(-decay * r as f64) * ratio;
        if tail < tail_tol {
            return Ok((sum, terms, tail));
        }
        if terms >= MAX_PRODUCT_TERMS {
            return Err(Error::BudgetExceeded {
                needed: terms as u128 + 1,
                budget: MAX_PRODUCT_TERMS as u128,
            });
        }
        sum += math::ln_1p(v * math::exp(-decay * r as f64));
        r += 1;
        terms += 1;
    }
}

/// Certified lower bound on `ε = (Π_{r≥1} 1/(1 + |V| e^{−α r}))^m`.
pub fn epsilon_lower_bound(
    v_size: usize,
    alpha: f64,
    m: usize,
    tail_tol: f64,
) -> Result<CertifiedBound> {
    let (sum, terms, tail) = log_product_upper(v_size, alpha, 1, tail_tol)?;
    Ok(CertifiedBound {
        value: math::exp(-(m as f64) * (sum + tail)),
        terms,
        tail_bound: tail,
        tail_tol,
    })
}

/// Certified lower bound on `(Π_{r≥0} 1/(1 + |V| e^{−α r}))^m`.
///
/// Same product as [`epsilon_lower_bound`] with the `r = 0` factor kept:
/// the first particle at each clique vertex is also bounded by
/// [`p11_bound`]`(|V|, α, 0) = 1/(1 + |V|)`. Unlike `ε`, this floor holds
/// from every state, including the zero state.
pub fn confinement_floor(
    v_size: usize,
    alpha: f64,
    m: usize,
    tail_tol: f64,
) -> Result<CertifiedBound> {
    let (sum, terms, tail) = log_product_upper(v_size, alpha, 0, tail_tol)?;
    Ok(CertifiedBound {
        value: math::exp(-(m as f64) * (sum + tail)),
        terms,
        tail_bound: tail,
        tail_tol,
    })
}

/// Certified lower bound on `Π_{n≥0} 1/(1 + |V| e^{−(α−β) n})`, the
/// probability floor for staying forever at a maximal-rate vertex when
/// `β < α`.
pub fn single_vertex_bound(
    v_size: usize,
    alpha: f64,
    beta: f64,
    tail_tol: f64,
) -> Result<CertifiedBound> {
    if alpha.is_nan() || beta.is_nan() || alpha <= beta {
        return Err(Error::InvalidArgument(
            "single-vertex bound needs beta < alpha",
        ));
    }
    let (sum, terms, tail) = log_product_upper(v_size, alpha - beta, 0, tail_tol)?;
    Ok(CertifiedBound {
        value: math::exp(-(sum + tail)),
        terms,
        tail_bound: tail,
        tail_tol,
    })
}

/// In-clique share `p_i = Γ_{v_i} / Σ_j Γ_{v_j}` at `state`. Only
/// meaningful in the critical regime, where these shares are invariant
/// under in-clique allocation.
pub fn clique_probs(model: &RateModel<'_>, state: &State, clique: &[usize]) -> Result<Vec<f64>> {
    if model.regime() != Regime::Critical {
        return Err(Error::RegimeMismatch {
            expected: "critical",
            found: model.regime(),
        });
    }
    check_state(model, state)?;
    if !model.graph().is_clique(clique) {
        return Err(Error::NotAClique);
    }
    let l: Vec<f64> = clique
        .iter()
        .map(|&v| model.rate_exponent(state, v))
        .collect();
    Ok(math::softmax(&l))
}

fn check_z_args(a: &[f64], lambda: f64, z: &[i64]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::InvalidArgument("difference chain needs m >= 2"));
    }
    if z.len() != a.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: z.len(),
        });
    }
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::InvalidArgument("lambda must be positive"));
    }
    if a.iter().any(|&x| x.is_nan() || x <= 0.0) {
        return Err(Error::InvalidArgument("coefficients a_i must be positive"));
    }
    Ok(())
}

/// One-step law of the difference chain `Z_i = X_i − X_m` on a complete
/// graph with `m = a.len() + 1` vertices. Entry `i < m − 1` is the move
/// `+e_i`, with weight `a_i e^{−λ z_i}`; the last entry is the diagonal move
/// `−(1, …, 1)` with weight 1.
pub fn z_transition_probs(a: &[f64], lambda: f64, z: &[i64]) -> Result<Vec<f64>> {
    check_z_args(a, lambda, z)?;
    let mut logs: Vec<f64> = a
        .iter()
        .zip(z)
        .map(|(&ai, &zi)| math::ln(ai) - lambda * zi as f64)
        .collect();
    logs.push(0.0);
    Ok(math::softmax(&logs))
}

/// Expected one-step change of `f(z) = Σ z_i²` under [`z_transition_probs`].
pub fn z_drift(a: &[f64], lambda: f64, z: &[i64]) -> Result<f64> {
    let p = z_transition_probs(a, lambda, z)?;
    let d = a.len();
    let mut drift = 0.0;
    for i in 0..d {
        drift += p[i] * (2.0 * z[i] as f64 + 1.0);
    }
    let down: f64 = z.iter().map(|&zi| 1.0 - 2.0 * zi as f64).sum();
    drift += p[d] * down;
    Ok(drift)
}

/// Calls `visit` on every `z ∈ Z^d` with `‖z‖₁ = r`.
pub fn for_each_on_sphere<F: FnMut(&[i64])>(d: usize, r: u64, mut visit: F) {
    let mut z = vec![0i64; d];
    sphere_fill(&mut z, 0, r, &mut visit);
}

fn sphere_fill<F: FnMut(&[i64])>(z: &mut [i64], i: usize, rem: u64, visit: &mut F) {
    if i + 1 == z.len() {
        z[i] = rem as i64;
        visit(z);
        if rem > 0 {
            z[i] = -(rem as i64);
            visit(z);
        }
        return;
    }
    for t in 0..=rem {
        z[i] = t as i64;
        sphere_fill(z, i + 1, rem - t, visit);
        if t > 0 {
            z[i] = -(t as i64);
            sphere_fill(z, i + 1, rem - t, visit);
        }
    }
}

/// Worst (largest) drift over all integer points of an ℓ₁ shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellScan {
    pub inner: u64,
    pub outer: u64,
    pub points: u64,
    pub max_drift: f64,
    pub argmax: Vec<i64>,
}

fn sphere_max(a: &[f64], lambda: f64, r: u64) -> Result<(f64, Vec<i64>, u64)> {
    let mut best = f64::NEG_INFINITY;
    let mut arg = Vec::new();
    let mut count = 0;
    let mut failure = None;
    for_each_on_sphere(a.len(), r, |z| {
        count += 1;
        match z_drift(a, lambda, z) {
            Ok(d) if d > best => {
                best = d;
                arg = z.to_vec();
            }
            Ok(_) => {}
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok((best, arg, count)),
    }
}

/// Exhaustive drift scan over `inner ≤ ‖z‖₁ ≤ outer`.
pub fn drift_shell_scan(a: &[f64], lambda: f64, inner: u64, outer: u64) -> Result<ShellScan> {
    check_z_args(a, lambda, &vec![0; a.len()])?;
    if inner > outer {
        return Err(Error::InvalidArgument(
            "shell inner radius exceeds outer radius",
        ));
    }
    let mut scan = ShellScan {
        inner,
        outer,
        points: 0,
        max_drift: f64::NEG_INFINITY,
        argmax: Vec::new(),
    };
    for r in inner..=outer {
        let (best, arg, count) = sphere_max(a, lambda, r)?;
        scan.points += count;
        if best > scan.max_drift {
            scan.max_drift = best;
            scan.argmax = arg;
        }
    }
    Ok(scan)
}

/// Smallest `C ≤ limit` whose shell `[C, C + width]` has drift at most
/// `−eps` everywhere, found by scanning radii outward from 0.
pub fn find_drift_radius(
    a: &[f64],
    lambda: f64,
    eps: f64,
    width: u64,
    limit: u64,
) -> Result<Option<ShellScan>> {
    check_z_args(a, lambda, &vec![0; a.len()])?;
    let mut per_radius: Vec<(f64, Vec<i64>, u64)> = Vec::new();
    for c in 0..=limit {
        while (per_radius.len() as u64) <= c + width {
            per_radius.push(sphere_max(a, lambda, per_radius.len() as u64)?);
        }
        let window = &per_radius[c as usize..=(c + width) as usize];
        let (idx, worst) = window
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .0.total_cmp(&y.1 .0))
            .expect("window is non-empty");
        if worst.0 <= -eps {
            return Ok(Some(ShellScan {
                inner: c,
                outer: c + width,
                points: window.iter().map(|w| w.2).sum(),
                max_drift: worst.0,
                argmax: window[idx].1.clone(),
            }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::figure1;
    use crate::graph::Graph;
    use crate::rates::RateParams;

    fn clique(g: &Graph, labels: &[u64]) -> OrderedClique {
        OrderedClique::new(g, g.indices_of(labels).unwrap()).unwrap()
    }

    #[test]
    fn q_one_step_is_block_law() {
        let g = figure1();
        let m = RateModel::new(&g, &RateParams::uniform(1.0, 1.0)).unwrap();
        let q = q_measure(
            &m,
            &State::zeros(8),
            &clique(&g, &[1, 2]),
            1,
            DEFAULT_BUDGET,
        )
        .unwrap();
        // V_1 = {1} ∪ {3,4,5,6,7,8}, V_2 = {2}
        assert!((q.masses[0] - 7.0 / 8.0).abs() < 1e-15);
        assert!((q.masses[1] - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn q_on_k2_is_chain_law() {
        let g = Graph::complete(2);
        let m = RateModel::new(&g, &RateParams::uniform(1.0, 2.0)).unwrap();
        let x0 = State::zeros(2);
        let c = OrderedClique::new(&g, vec![0, 1]).unwrap();
        let q = q_measure(&m, &x0, &c, 2, DEFAULT_BUDGET).unwrap();
        for (i, &mass) in q.masses.iter().enumerate() {
            let path = q.path(i);
            let mut s = x0.clone();
            let mut p = 1.0;
            for &k in &path {
                p *= crate::process::transition_probs(&m, &s)[k];
                s.add(k);
            }
            assert!((mass - p).abs() < 1e-15);
        }
    }

    #[test]
    fn q_rejects_non_final_and_budget() {
        let g = figure1();
        let m = RateModel::new(&g, &RateParams::uniform(1.0, 1.0)).unwrap();
        let mut x = State::zeros(8);
        x.add(g.index_of(4).unwrap());
        let c = clique(&g, &[7, 8]);
        assert_eq!(
            q_measure(&m, &x, &c, 2, DEFAULT_BUDGET),
            Err(Error::NotFinal)
        );
        let c = clique(&g, &[2, 3, 4, 5]);
        assert!(matches!(
            q_measure(&m, &State::zeros(8), &c, 11, DEFAULT_BUDGET),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn confinement_first_steps() {
        let g = figure1();
        let m = RateModel::new(&g, &RateParams::uniform(1.0, 1.0)).unwrap();
        let set = g.indices_of(&[1, 2]).unwrap();
        let prof = confinement_profile(&m, &State::zeros(8), &set, 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(prof[0], 1.0);
        assert!((prof[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn confinement_budget() {
        let g = figure1();
        let m = RateModel::new(&g, &RateParams::uniform(1.0, 1.0)).unwrap();
        let set = g.indices_of(&[2, 3, 4, 5]).unwrap();
        assert_eq!(composition_count(200, 4), 1_373_701);
        assert!(matches!(
            confinement_prob(&m, &State::zeros(8), &set, 200, DEFAULT_BUDGET),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn p11_values() {
        assert!((p11_bound(8, 1.0, 0) - 1.0 / 9.0).abs() < 1e-16);
        assert!((p11_bound(8, 1.0, 10_000) - 1.0).abs() < 1e-16);
    }

    #[test]
    fn epsilon_limits() {
        let big = epsilon_lower_bound(8, 60.0, 3, 1e-12).unwrap();
        assert!(big.value > 1.0 - 1e-12);
        let sv = single_vertex_bound(8, 80.0, 1.0, 1e-12).unwrap();
        assert!((sv.value - 1.0 / 9.0).abs() < 1e-12);
        assert!(single_vertex_bound(8, 1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn floor_is_epsilon_times_first_factors() {
        let eps = epsilon_lower_bound(8, 1.0, 2, 1e-13).unwrap().value;
        let floor = confinement_floor(8, 1.0, 2, 1e-13).unwrap().value;
        assert!((floor - eps / 81.0).abs() < 1e-12 * eps);
        // only the r = 0 factors survive as alpha grows
        let big = confinement_floor(8, 60.0, 2, 1e-12).unwrap().value;
        assert!((big - 1.0 / 81.0).abs() < 1e-12);
    }

    #[test]
    fn clique_probs_regime() {
        let g = Graph::complete(3);
        let m = RateModel::new(&g, &RateParams::uniform(1.0, 1.0)).unwrap();
        let p = clique_probs(&m, &State::zeros(3), &[0, 1, 2]).unwrap();
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        let m = RateModel::new(&g, &RateParams::uniform(1.0, 2.0)).unwrap();
        assert!(matches!(
            clique_probs(&m, &State::zeros(3), &[0, 1, 2]),
            Err(Error::RegimeMismatch { .. })
        ));
    }

    #[test]
    fn z_kernel_at_origin() {
        let p = z_transition_probs(&[1.0, 1.0], 0.5, &[0, 0]).unwrap();
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert!((z_drift(&[1.0, 1.0], 0.5, &[0, 0]).unwrap() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn z_kernel_logistic_for_m2() {
        let lambda = 0.5;
        for z in -5..=5i64 {
            let p = z_transition_probs(&[1.0], lambda, &[z]).unwrap();
            let e = math::exp(-lambda * z as f64);
            assert!((p[0] - e / (1.0 + e)).abs() < 1e-15);
        }
    }

    #[test]
    fn z_drift_negative_far_out() {
        let d = z_drift(&[1.0], 0.5, &[10]).unwrap();
        let up = z_transition_probs(&[1.0], 0.5, &[10]).unwrap()[0];
        assert!((d - (-20.0 * (1.0 - 2.0 * up) + 1.0)).abs() < 1e-12);
        assert!(d < 0.0);
    }

    #[test]
    fn sphere_counts() {
        let mut n = 0;
        for_each_on_sphere(2, 5, |_| n += 1);
        assert_eq!(n, 20);
        let mut n = 0;
        for_each_on_sphere(3, 0, |z| {
            assert_eq!(z, &[0, 0, 0]);
            n += 1
        });
        assert_eq!(n, 1);
        // |{z ∈ Z^3 : ‖z‖₁ = 2}| = 18
        let mut n = 0;
        for_each_on_sphere(3, 2, |_| n += 1);
        assert_eq!(n, 18);
    }
}
