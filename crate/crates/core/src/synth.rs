//! Synthetic datasets: random compositions and planted cluster structure.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};

use crate::dissim::sq_euclidean;
use crate::error::Result;
use crate::model::{CategorySchema, Composition, Dataset, SymbolicUnit, VariableSchema};

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    values.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Dirichlet-distributed composition with all concentrations equal to
/// `alpha` (`alpha = 1` is uniform on the simplex).
pub fn random_composition<R: Rng + ?Sized>(rng: &mut R, m: usize, alpha: f64) -> Composition {
    let values: Vec<f64> = if alpha == 1.0 {
        (0..m).map(|_| Exp1.sample(rng)).collect()
    } else {
        let gamma = rand_distr::Gamma::new(alpha, 1.0).expect("alpha > 0");
        (0..m).map(|_| gamma.sample(rng)).collect()
    };
    let total: f64 = values.iter().sum();
    if total == 0.0 {
        return Composition::point_mass(m, rng.random_range(0..m));
    }
    Composition::new(values.iter().map(|v| v / total).collect(), 1e-9).expect("normalized")
}

fn schemas(p: usize, m: usize) -> (CategorySchema, VariableSchema) {
    let cats = CategorySchema::new((0..m).map(|l| format!("c{l}"))).expect("m >= 2");
    let vars = VariableSchema::new((0..p).map(|j| format!("v{j}"))).expect("p >= 1");
    (cats, vars)
}

/// `n` units with uniform random compositions and weights drawn from
/// `weights` (a half-open range).
pub fn random_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    p: usize,
    m: usize,
    weights: std::ops::Range<f64>,
) -> Result<Dataset> {
    let (cats, vars) = schemas(p, m);
    let units = (0..n)
        .map(|i| {
            let descriptions = (0..p).map(|_| random_composition(rng, m, 1.0)).collect();
            let w = (0..p).map(|_| rng.random_range(weights.clone())).collect();
            SymbolicUnit::new(format!("u{i:02}"), descriptions, w)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(cats, vars, units)
}

/// A dataset with `k` planted clusters. Each cluster has, per variable, a
/// centroid composition at squared Euclidean distance at least
/// `min_separation` from the other centroids; members are centroids plus
/// Gaussian noise of standard deviation `sigma`, projected back onto the
/// simplex. Units are assigned to clusters round robin. Returns the
/// dataset and the planted labels.
pub fn planted_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    k: usize,
    p: usize,
    m: usize,
    sigma: f64,
    min_separation: f64,
) -> Result<(Dataset, Vec<usize>)> {
    let (cats, vars) = schemas(p, m);
    let mut centroids: Vec<Vec<Composition>> = vec![Vec::with_capacity(p); k];
    for _ in 0..p {
        let chosen = loop {
            let candidate: Vec<Composition> = (0..k).map(|_| random_composition(rng, m, 0.3)).collect();
            let separated = (0..k).all(|a| {
                (a + 1..k).all(|b| sq_euclidean(&candidate[a], &candidate[b]).expect("same m") >= min_separation)
            });
            if separated {
                break candidate;
            }
        };
        for (c, comp) in chosen.into_iter().enumerate() {
            centroids[c].push(comp);
        }
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| crate::Error::InvalidConfig(e.to_string()))?;
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let units = labels
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let descriptions = centroids[c]
                .iter()
                .map(|centre| {
                    let noisy: Vec<f64> = centre.values().iter().map(|v| v + noise.sample(rng)).collect();
                    Composition::new(project_to_simplex(&noisy), 1e-9)
                })
                .collect::<Result<Vec<_>>>()?;
            let w = (0..p).map(|_| rng.random_range(0.5..5.0)).collect();
            SymbolicUnit::new(format!("u{i:02}"), descriptions, w)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Dataset::new(cats, vars, units)?, labels))
}
