//! Leader method: closed-form cluster representatives and the
//! assign/recompute loop that minimizes the clustering criterion.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissim::{partition_criterion, unit_leader_dissim};
use crate::error::{Error, Result};
use crate::model::{Composition, Dataset, Leader, Partition, SymbolicUnit};
use crate::numeric::CompensatedSum;

/// Optimal leader of a set of units.
///
/// For each variable the leader is the weighted mean of the members'
/// compositions, which minimizes the weighted sum of squared Euclidean
/// distances over the simplex. A variable whose total weight is zero
/// contributes nothing to the criterion, so any point is optimal; the
/// unweighted mean is used.
pub fn compute_leader(members: &[&SymbolicUnit]) -> Result<Leader> {
    let first = members.first().ok_or(Error::EmptyCluster)?;
    let p = first.num_variables();
    let m = first.descriptions().first().map_or(0, Composition::len);
    if let Some(bad) = members
        .iter()
        .find(|u| u.num_variables() != p || u.descriptions().iter().any(|c| c.len() != m))
    {
        return Err(Error::SchemaMismatch(format!(
            "unit `{}` does not match the schema of `{}`",
            bad.id(),
            first.id()
        )));
    }

    if let [only] = members {
        return Ok(Leader::of_unit(only));
    }
    let components = (0..p)
        .map(|j| {
            let mut total = CompensatedSum::new();
            members.iter().for_each(|u| total.add(u.weights()[j]));
            let total = total.value();
            let values = if total > 0.0 {
                weighted_mean(members, j, m, |u| u.weights()[j], total)
            } else {
                weighted_mean(members, j, m, |_| 1.0, members.len() as f64)
            };
            Composition::from_simplex_unchecked(values)
        })
        .collect();
    Ok(Leader::new(components))
}

fn weighted_mean(
    members: &[&SymbolicUnit],
    j: usize,
    m: usize,
    weight: impl Fn(&SymbolicUnit) -> f64,
    total: f64,
) -> Vec<f64> {
    (0..m)
        .map(|l| {
            let mut acc = CompensatedSum::new();
            for u in members {
                acc.add(weight(u) * u.descriptions()[j].values()[l]);
            }
            // clamp guards against -0.0 and rounding just below zero
            (acc.value() / total).max(0.0)
        })
        .collect()
}

/// Index of the closest leader for every unit; ties go to the lowest index.
pub fn assign_labels(dataset: &Dataset, leaders: &[Leader]) -> Result<Vec<usize>> {
    if leaders.is_empty() {
        return Err(Error::InvalidConfig("at least one leader is required".into()));
    }
    dataset
        .units()
        .par_iter()
        .map(|unit| nearest_leader(unit, leaders).map(|(idx, _)| idx))
        .collect()
}

fn nearest_leader(unit: &SymbolicUnit, leaders: &[Leader]) -> Result<(usize, f64)> {
    let mut best = (0, f64::INFINITY);
    for (i, leader) in leaders.iter().enumerate() {
        let d = unit_leader_dissim(unit, leader)?;
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

/// Assigns every unit to its nearest leader and recomputes the leaders of
/// the resulting clusters. Leaders that attract no unit yield no cluster.
pub fn assign_units(dataset: &Dataset, leaders: &[Leader]) -> Result<Partition> {
    let labels = assign_labels(dataset, leaders)?;
    Partition::from_labels(dataset, &labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// `k` distinct units drawn with the seeded generator.
    RandomUnits,
    /// Heaviest unit first, then repeatedly the unit farthest from all
    /// seeds chosen so far.
    #[default]
    SpreadSeeding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderConfig {
    pub k: usize,
    pub max_iterations: usize,
    /// Stop once the criterion decreases by less than this amount.
    pub convergence_epsilon: f64,
    pub seed: u64,
    pub init_strategy: InitStrategy,
}

impl LeaderConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iterations: 100,
            convergence_epsilon: 1e-12,
            seed: 0,
            init_strategy: InitStrategy::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_init(mut self, init: InitStrategy) -> Self {
        self.init_strategy = init;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.k > n {
            return Err(Error::KExceedsN { k: self.k, n });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if self.convergence_epsilon.is_nan() || self.convergence_epsilon < 0.0 {
            return Err(Error::InvalidConfig("convergence_epsilon must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderRun {
    pub partition: Partition,
    /// Criterion value after each iteration; never increases.
    pub criterion_trace: Vec<f64>,
    pub converged: bool,
}

impl LeaderRun {
    pub fn criterion(&self) -> f64 {
        *self.criterion_trace.last().expect("at least one iteration")
    }
}

fn initial_seeds(dataset: &Dataset, config: &LeaderConfig) -> Result<Vec<usize>> {
    let n = dataset.len();
    match config.init_strategy {
        InitStrategy::RandomUnits => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            Ok(rand::seq::index::sample(&mut rng, n, config.k).into_vec())
        }
        InitStrategy::SpreadSeeding => {
            let units = dataset.units();
            let mut first = 0;
            let mut heaviest = f64::NEG_INFINITY;
            for (i, u) in units.iter().enumerate() {
                let w = u.total_weight();
                if w > heaviest {
                    heaviest = w;
                    first = i;
                }
            }
            let mut seeds = vec![first];
            // min dissimilarity of every unit to the chosen seeds
            let mut closest: Vec<f64> = units
                .iter()
                .map(|u| unit_leader_dissim(u, &Leader::of_unit(&units[first])))
                .collect::<Result<_>>()?;
            while seeds.len() < config.k {
                let mut next = None;
                let mut farthest = f64::NEG_INFINITY;
                for (i, &d) in closest.iter().enumerate() {
                    if !seeds.contains(&i) && d > farthest {
                        farthest = d;
                        next = Some(i);
                    }
                }
                let next = next.expect("k <= n leaves an unchosen unit");
                seeds.push(next);
                let leader = Leader::of_unit(&units[next]);
                for (i, u) in units.iter().enumerate() {
                    closest[i] = closest[i].min(unit_leader_dissim(u, &leader)?);
                }
            }
            Ok(seeds)
        }
    }
}

/// Moves units into clusters left empty by an assignment step: each empty
/// cluster takes the unit farthest from its current leader among clusters
/// that would keep at least one member.
fn repair_empty(dataset: &Dataset, leaders: &[Leader], labels: &mut [usize]) -> Result<()> {
    let k = leaders.len();
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut pick = None;
        let mut farthest = f64::NEG_INFINITY;
        for (i, unit) in dataset.units().iter().enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = unit_leader_dissim(unit, &leaders[labels[i]])?;
            if d > farthest {
                farthest = d;
                pick = Some(i);
            }
        }
        let pick = pick.expect("k <= n guarantees a cluster with two members");
        counts[labels[pick]] -= 1;
        labels[pick] = empty;
        counts[empty] = 1;
    }
    Ok(())
}

/// Runs the leader method: alternate nearest-leader assignment and leader
/// recomputation until the criterion stops decreasing by at least
/// `convergence_epsilon`, or `max_iterations` criterion evaluations.
pub fn run_leader_method(dataset: &Dataset, config: &LeaderConfig) -> Result<LeaderRun> {
    config.validate(dataset.len())?;
    let seeds = initial_seeds(dataset, config)?;
    let mut leaders: Vec<Leader> = seeds
        .iter()
        .map(|&i| Leader::of_unit(&dataset.units()[i]))
        .collect();

    let mut trace: Vec<f64> = Vec::new();
    let mut best: Option<Partition> = None;
    let mut converged = false;

    loop {
        let mut labels = assign_labels(dataset, &leaders)?;
        repair_empty(dataset, &leaders, &mut labels)?;
        // labels cover 0..k, so cluster order follows leader order
        let partition = Partition::from_labels(dataset, &labels)?;
        let err = partition_criterion(&partition, dataset)?;

        if let Some(&last) = trace.last() {
            if err > last {
                converged = true;
                break;
            }
            trace.push(err);
            best = Some(partition);
            if last - err < config.convergence_epsilon {
                converged = true;
                break;
            }
        } else {
            trace.push(err);
            best = Some(partition);
        }
        if trace.len() >= config.max_iterations {
            break;
        }
        leaders = best
            .as_ref()
            .expect("set above")
            .clusters()
            .iter()
            .map(|c| c.leader().clone())
            .collect();
    }

    Ok(LeaderRun {
        partition: best.expect("at least one iteration"),
        criterion_trace: trace,
        converged,
    })
}
