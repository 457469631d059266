//! Replica-parallel Monte Carlo.
//!
//! Replica `i` always reads stream `i` of the master seed and outcomes are
//! folded in replica order, so reports do not depend on the thread count.

use cliqueloc_core::analysis::{analyse_replica, outcome_of, LocalisationReport, ReplicaOutcome};
use cliqueloc_core::process::{run_stream, Trajectory};
use cliqueloc_core::{enumerate_maximal_cliques, Error, RateModel, State};
use rayon::prelude::*;

fn pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()?)
}

/// Runs `replicas` trajectories on `jobs` threads and assembles the report.
pub fn localisation_report(
    model: &RateModel<'_>,
    x0: &State,
    steps: usize,
    replicas: usize,
    seed: u64,
    tail_fraction: f64,
    jobs: usize,
) -> anyhow::Result<LocalisationReport> {
    if replicas == 0 {
        return Err(Error::NoReplicas.into());
    }
    let cliques = enumerate_maximal_cliques(model.graph());
    let outcomes = pool(jobs)?.install(|| {
        (0..replicas as u64)
            .into_par_iter()
            .map(|r| analyse_replica(model, &cliques, x0, steps, seed, r, tail_fraction))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(LocalisationReport::assemble(
        model.graph(),
        &cliques,
        outcomes,
        steps,
        seed,
        tail_fraction,
    )?)
}

/// Like [`localisation_report`] but hands each trajectory to `inspect`
/// alongside its outcome, for callers that need more than the summary.
#[allow(clippy::too_many_arguments)]
pub fn map_replicas<T, F>(
    model: &RateModel<'_>,
    x0: &State,
    steps: usize,
    replicas: usize,
    seed: u64,
    tail_fraction: f64,
    jobs: usize,
    inspect: F,
) -> anyhow::Result<Vec<(ReplicaOutcome, T)>>
where
    T: Send,
    F: Fn(&Trajectory, &ReplicaOutcome) -> T + Sync,
{
    let cliques = enumerate_maximal_cliques(model.graph());
    let results = pool(jobs)?.install(|| {
        (0..replicas as u64)
            .into_par_iter()
            .map(|r| {
                let t = run_stream(model, x0, steps, seed, r)?;
                let o = outcome_of(model, &cliques, &t, r, tail_fraction)?;
                let extra = inspect(&t, &o);
                Ok((o, extra))
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cliqueloc_core::analysis::monte_carlo_report;
    use cliqueloc_core::{Graph, RateParams};

    #[test]
    fn parallel_matches_sequential() {
        let g = Graph::from_edges([(1, 2), (2, 3), (3, 1), (3, 4)]).unwrap();
        let m = RateModel::new(&g, &RateParams::uniform(1.0, 1.0)).unwrap();
        let x0 = State::zeros(4);
        let seq = monte_carlo_report(&m, &x0, 300, 12, 5, 0.5).unwrap();
        for jobs in [1, 3] {
            assert_eq!(
                localisation_report(&m, &x0, 300, 12, 5, 0.5, jobs).unwrap(),
                seq
            );
        }
    }

    #[test]
    fn zero_replicas_rejected() {
        let g = Graph::complete(2);
        let m = RateModel::new(&g, &RateParams::uniform(1.0, 1.0)).unwrap();
        assert!(localisation_report(&m, &State::zeros(2), 10, 0, 1, 0.5, 2).is_err());
    }
}
