use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BeliefSet, DurationBelief, ForecastError};
use crate::network::{ActivityNetwork, CpmKernel};
use crate::Scalar;

pub const DEFAULT_SAMPLES: usize = 10_000;
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub samples: usize,
    pub seed: u64,
    /// Worker count; `None` uses the global pool. Results do not depend on it.
    pub threads: Option<usize>,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            threads: None,
        }
    }
}

impl ForecastConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            threads: None,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads.max(1));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantilePoint<T> {
    pub probability: T,
    pub finish: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult<T> {
    pub p50_finish: T,
    pub p80_finish: T,
    pub mean_finish: T,
    pub samples: usize,
    pub seed: u64,
    /// Percent of replications in which each activity was critical.
    pub criticality: BTreeMap<String, T>,
    /// Median early finish per activity.
    pub activity_p50_finish: BTreeMap<String, T>,
    pub finish_histogram: Vec<QuantilePoint<T>>,
}

impl<T: Scalar> ForecastResult<T> {
    /// Activity ids by descending criticality, ties by id.
    pub fn criticality_ranking(&self) -> Vec<String> {
        let mut ranked: Vec<(&String, &T)> = self.criticality.iter().collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(b.0)));
        ranked.into_iter().map(|(id, _)| id.clone()).collect()
    }
}

/// Independent stream for one replication: the same `(seed, replication)`
/// always yields the same uniforms, whichever worker runs it.
pub fn replication_stream(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Nearest-rank empirical quantile of an ascending slice.
pub fn nearest_rank<T: Scalar>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty());
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

struct Chunk<T> {
    makespans: Vec<T>,
    finishes: Vec<T>,
    critical_counts: Vec<u64>,
}

fn simulate_chunk<T: Scalar>(
    network: &ActivityNetwork,
    beliefs: &[&DurationBelief<T>],
    seed: u64,
    range: std::ops::Range<usize>,
) -> Chunk<T> {
    let n = network.len();
    let mut kernel = CpmKernel::new(n);
    let mut durations = vec![T::zero(); n];
    let mut chunk = Chunk {
        makespans: Vec::with_capacity(range.len()),
        finishes: Vec::with_capacity(range.len() * n),
        critical_counts: vec![0; n],
    };
    // maps [0, 1) onto the open interval so the inverse CDF stays finite
    let half_ulp = 0.5 / (1u64 << 53) as f64;
    for r in range {
        let mut rng = replication_stream(seed, r as u64);
        for (i, belief) in beliefs.iter().enumerate() {
            let u: f64 = rng.random::<f64>() + half_ulp;
            durations[i] = belief.quantile(u);
        }
        let makespan = kernel.run(network, &durations);
        chunk.makespans.push(makespan);
        for i in 0..n {
            chunk.finishes.push(kernel.early_finish(i));
            if kernel.is_critical(i) {
                chunk.critical_counts[i] += 1;
            }
        }
    }
    chunk
}

/// Samples every activity duration, runs a CPM pass per replication and
/// summarises the makespan distribution.
pub fn monte_carlo_forecast<T: Scalar>(
    network: &ActivityNetwork,
    beliefs: &BeliefSet<T>,
    config: &ForecastConfig,
) -> Result<ForecastResult<T>, ForecastError> {
    if network.is_empty() {
        return Err(ForecastError::EmptyNetwork);
    }
    if config.samples == 0 {
        return Err(ForecastError::NoSamples);
    }
    let ordered: Vec<&DurationBelief<T>> = network
        .activities()
        .iter()
        .map(|a| beliefs.get(&a.id).ok_or_else(|| ForecastError::MissingBelief(a.id.clone())))
        .collect::<Result<_, _>>()?;

    let ranges: Vec<_> = (0..config.samples)
        .step_by(CHUNK)
        .map(|start| start..(start + CHUNK).min(config.samples))
        .collect();
    let run = || -> Vec<Chunk<T>> {
        ranges
            .par_iter()
            .map(|r| simulate_chunk(network, &ordered, config.seed, r.clone()))
            .collect()
    };
    let chunks = match config.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map(|pool| pool.install(run))
            .unwrap_or_else(|_| run()),
        None => run(),
    };

    let n = network.len();
    let mut makespans = Vec::with_capacity(config.samples);
    let mut per_activity: Vec<Vec<T>> = vec![Vec::with_capacity(config.samples); n];
    let mut counts = vec![0u64; n];
    for chunk in chunks {
        makespans.extend_from_slice(&chunk.makespans);
        for row in chunk.finishes.chunks_exact(n) {
            for (i, &f) in row.iter().enumerate() {
                per_activity[i].push(f);
            }
        }
        for (c, k) in counts.iter_mut().zip(chunk.critical_counts) {
            *c += k;
        }
    }
    let samples = makespans.len();
    let mean_finish = makespans.iter().copied().sum::<T>() / T::lit(samples as f64);
    makespans.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));

    let hundred = T::lit(100.0);
    let criticality = network
        .activities()
        .iter()
        .zip(&counts)
        .map(|(a, &c)| (a.id.clone(), hundred * T::lit(c as f64) / T::lit(samples as f64)))
        .collect();
    let activity_p50_finish = network
        .activities()
        .iter()
        .zip(per_activity.iter_mut())
        .map(|(a, v)| {
            v.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
            (a.id.clone(), nearest_rank(v, 0.5))
        })
        .collect();
    let finish_histogram = (1..=19)
        .map(|k| {
            let p = k as f64 * 0.05;
            QuantilePoint {
                probability: T::lit(p),
                finish: nearest_rank(&makespans, p),
            }
        })
        .collect();
    Ok(ForecastResult {
        p50_finish: nearest_rank(&makespans, 0.5),
        p80_finish: nearest_rank(&makespans, 0.8),
        mean_finish,
        samples,
        seed: config.seed,
        criticality,
        activity_p50_finish,
        finish_histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, Activity, Calendar, Edge};
    use chrono::NaiveDate;

    fn cal() -> Calendar {
        Calendar::five_day(NaiveDate::from_ymd_opt(2024, 1, 1).unwrap())
    }

    fn beliefs(spec: &[(&str, f64, f64)]) -> BeliefSet<f64> {
        spec.iter()
            .map(|&(id, m, s)| (id.to_string(), DurationBelief::prior(id, m, s)))
            .collect()
    }

    fn two_chains() -> ActivityNetwork {
        build_network(
            vec![
                Activity::new("A", "a", 10.0),
                Activity::new("B", "b", 10.0),
                Activity::new("Z", "z", 0.0),
            ],
            vec![Edge::new("A", "Z"), Edge::new("B", "Z")],
            cal(),
        )
        .unwrap()
    }

    #[test]
    fn nearest_rank_matches_definition() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(nearest_rank(&v, 0.5), 2.0);
        assert_eq!(nearest_rank(&v, 0.8), 4.0);
        assert_eq!(nearest_rank(&v, 0.0), 1.0);
        assert_eq!(nearest_rank(&[7.0], 0.8), 7.0);
    }

    #[test]
    fn degenerate_beliefs_give_deterministic_makespan() {
        let net = two_chains();
        let b = beliefs(&[("A", 10.0, 0.0), ("B", 7.0, 0.0), ("Z", 0.0, 0.0)]);
        let r = monte_carlo_forecast(&net, &b, &ForecastConfig::new(200, 3)).unwrap();
        assert_eq!(r.p50_finish, 10.0);
        assert_eq!(r.p80_finish, 10.0);
        assert_eq!(r.criticality["A"], 100.0);
        assert_eq!(r.criticality["B"], 0.0);
    }

    #[test]
    fn single_chain_is_always_critical() {
        let net = build_network(
            vec![
                Activity::new("A", "a", 1.0),
                Activity::new("B", "b", 1.0),
                Activity::new("C", "c", 1.0),
            ],
            vec![Edge::new("A", "B"), Edge::new("B", "C")],
            cal(),
        )
        .unwrap();
        let b = beliefs(&[("A", 4.0, 2.0), ("B", 9.0, 5.0), ("C", 1.0, 3.0)]);
        let r = monte_carlo_forecast(&net, &b, &ForecastConfig::new(2000, 11)).unwrap();
        assert!(r.criticality.values().all(|&c| c == 100.0));
        assert!(r.p50_finish <= r.p80_finish);
    }

    #[test]
    fn symmetric_parallel_chains_split_criticality() {
        let net = two_chains();
        let b = beliefs(&[("A", 10.0, 2.0), ("B", 10.0, 2.0), ("Z", 0.0, 0.0)]);
        let r = monte_carlo_forecast(&net, &b, &ForecastConfig::new(10_000, 5)).unwrap();
        assert!((r.criticality["A"] - 50.0).abs() <= 3.0, "{:?}", r.criticality);
        assert!((r.criticality["B"] - 50.0).abs() <= 3.0);
        assert_eq!(r.criticality["Z"], 100.0);
    }

    #[test]
    fn result_independent_of_thread_count() {
        let net = two_chains();
        let b = beliefs(&[("A", 10.0, 2.0), ("B", 9.0, 3.0), ("Z", 1.0, 0.5)]);
        let one = monte_carlo_forecast(&net, &b, &ForecastConfig::new(3000, 9).with_threads(1)).unwrap();
        let many = monte_carlo_forecast(&net, &b, &ForecastConfig::new(3000, 9).with_threads(4)).unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn errors_on_missing_belief_and_zero_samples() {
        let net = two_chains();
        let b = beliefs(&[("A", 10.0, 2.0), ("B", 9.0, 3.0)]);
        assert_eq!(
            monte_carlo_forecast(&net, &b, &ForecastConfig::new(10, 1)).unwrap_err(),
            ForecastError::MissingBelief("Z".into())
        );
        let b = beliefs(&[("A", 10.0, 2.0), ("B", 9.0, 3.0), ("Z", 0.0, 0.0)]);
        assert_eq!(
            monte_carlo_forecast(&net, &b, &ForecastConfig::new(0, 1)).unwrap_err(),
            ForecastError::NoSamples
        );
    }

    #[test]
    fn f32_forecast_runs() {
        let net = two_chains();
        let b: BeliefSet<f32> = [("A", 10.0f32, 0.0f32), ("B", 7.0, 0.0), ("Z", 0.0, 0.0)]
            .iter()
            .map(|&(id, m, s)| (id.to_string(), DurationBelief::prior(id, m, s)))
            .collect();
        let r = monte_carlo_forecast(&net, &b, &ForecastConfig::new(50, 1)).unwrap();
        assert_eq!(r.p50_finish, 10.0f32);
    }
}
