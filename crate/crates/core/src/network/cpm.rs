use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ActivityNetwork, NetworkError};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityTiming<T> {
    pub id: String,
    pub early_start: T,
    pub early_finish: T,
    pub late_start: T,
    pub late_finish: T,
    pub total_float: T,
}

/// Forward/backward pass result. Times are working-day offsets from the
/// project start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpmResult<T> {
    pub timings: Vec<ActivityTiming<T>>,
    pub makespan: T,
    /// Ids with zero total float, sorted. Ties are all reported.
    pub critical_set: Vec<String>,
}

impl<T: Scalar> CpmResult<T> {
    pub fn timing(&self, id: &str) -> Option<&ActivityTiming<T>> {
        self.timings.iter().find(|t| t.id == id)
    }

    pub fn is_critical(&self, id: &str) -> bool {
        self.critical_set.binary_search_by(|c| c.as_str().cmp(id)).is_ok()
    }
}

/// Reusable buffers for repeated passes over the same network.
#[derive(Debug, Clone)]
pub struct CpmKernel<T> {
    early_start: Vec<T>,
    early_finish: Vec<T>,
    late_start: Vec<T>,
    late_finish: Vec<T>,
    makespan: T,
}

impl<T: Scalar> CpmKernel<T> {
    pub fn new(len: usize) -> Self {
        Self {
            early_start: vec![T::zero(); len],
            early_finish: vec![T::zero(); len],
            late_start: vec![T::zero(); len],
            late_finish: vec![T::zero(); len],
            makespan: T::zero(),
        }
    }

    /// Runs both passes; `durations` is indexed like `network.activities()`.
    pub fn run(&mut self, network: &ActivityNetwork, durations: &[T]) -> T {
        debug_assert_eq!(durations.len(), network.len());
        let order = network.topological_order();
        for &i in order {
            let es = network
                .predecessors(i)
                .iter()
                .map(|&p| self.early_finish[p])
                .fold(T::zero(), T::max);
            self.early_start[i] = es;
            self.early_finish[i] = es + durations[i];
        }
        let makespan = network
            .sinks()
            .map(|i| self.early_finish[i])
            .fold(T::zero(), T::max);
        for &i in order.iter().rev() {
            let lf = network
                .successors(i)
                .iter()
                .map(|&s| self.late_start[s])
                .fold(makespan, T::min);
            self.late_finish[i] = lf;
            self.late_start[i] = lf - durations[i];
        }
        self.makespan = makespan;
        makespan
    }

    pub fn makespan(&self) -> T {
        self.makespan
    }

    pub fn early_start(&self, i: usize) -> T {
        self.early_start[i]
    }

    pub fn early_finish(&self, i: usize) -> T {
        self.early_finish[i]
    }

    pub fn late_start(&self, i: usize) -> T {
        self.late_start[i]
    }

    pub fn late_finish(&self, i: usize) -> T {
        self.late_finish[i]
    }

    pub fn total_float(&self, i: usize) -> T {
        (self.late_start[i] - self.early_start[i]).max(T::zero())
    }

    pub fn is_critical(&self, i: usize) -> bool {
        self.late_start[i] - self.early_start[i] <= T::float_tolerance(self.makespan)
    }
}

/// Deterministic CPM pass over durations keyed by activity id.
pub fn cpm_pass<T: Scalar>(
    network: &ActivityNetwork,
    durations: &BTreeMap<String, T>,
) -> Result<CpmResult<T>, NetworkError> {
    let indexed = network
        .activities()
        .iter()
        .map(|a| {
            durations
                .get(&a.id)
                .copied()
                .ok_or_else(|| NetworkError::MissingDuration(a.id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    cpm_indexed(network, &indexed)
}

/// Same as [`cpm_pass`] with durations in activity order.
pub fn cpm_indexed<T: Scalar>(network: &ActivityNetwork, durations: &[T]) -> Result<CpmResult<T>, NetworkError> {
    if durations.len() != network.len() {
        let missing = network
            .activities()
            .get(durations.len())
            .map(|a| a.id.clone())
            .unwrap_or_default();
        return Err(NetworkError::MissingDuration(missing));
    }
    for (a, &d) in network.activities().iter().zip(durations) {
        if !(d >= T::zero()) || !d.is_finite() {
            return Err(NetworkError::NegativeDuration {
                id: a.id.clone(),
                value: d.to_f64_lossy(),
            });
        }
    }
    let mut kernel = CpmKernel::new(network.len());
    let makespan = kernel.run(network, durations);
    let timings = network
        .activities()
        .iter()
        .enumerate()
        .map(|(i, a)| ActivityTiming {
            id: a.id.clone(),
            early_start: kernel.early_start(i),
            early_finish: kernel.early_finish(i),
            late_start: kernel.late_start(i),
            late_finish: kernel.late_finish(i),
            total_float: kernel.total_float(i),
        })
        .collect();
    let mut critical_set: Vec<String> = (0..network.len())
        .filter(|&i| kernel.is_critical(i))
        .map(|i| network.activities()[i].id.clone())
        .collect();
    critical_set.sort();
    Ok(CpmResult {
        timings,
        makespan,
        critical_set,
    })
}
