//! Python bindings: datasets, both clustering methods, diagnostics and
//! ANOVA, exposed as the `symclust` module.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use symclust::leader::{InitStrategy, LeaderConfig};
use symclust::{formats, CategorySchema, Composition, Partition, SymbolicUnit, VariableSchema};

fn err(e: symclust::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn partition(ds: &symclust::Dataset, labels: &[usize]) -> PyResult<Partition> {
    if labels.len() != ds.len() {
        return Err(PyValueError::new_err(format!(
            "expected {} labels, got {}",
            ds.len(),
            labels.len()
        )));
    }
    Partition::from_labels(ds, labels).map_err(err)
}

/// Units described by one composition and one weight per variable.
#[pyclass(frozen, module = "symclust")]
struct Dataset {
    inner: symclust::Dataset,
}

#[pymethods]
impl Dataset {
    /// `units` is a list of `(id, descriptions, weights)` with one
    /// composition (list of proportions) per variable.
    #[new]
    #[pyo3(signature = (categories, variables, units, tolerance = symclust::model::DEFAULT_SUM_TOLERANCE))]
    fn new(
        categories: Vec<String>,
        variables: Vec<String>,
        units: Vec<(String, Vec<Vec<f64>>, Vec<f64>)>,
        tolerance: f64,
    ) -> PyResult<Self> {
        let units = units
            .into_iter()
            .map(|(id, descriptions, weights)| {
                let descriptions = descriptions
                    .into_iter()
                    .map(|v| Composition::new(v, tolerance))
                    .collect::<symclust::Result<Vec<_>>>()?;
                SymbolicUnit::new(id, descriptions, weights)
            })
            .collect::<symclust::Result<Vec<_>>>()
            .map_err(err)?;
        let inner = symclust::Dataset::new(
            CategorySchema::new(categories).map_err(err)?,
            VariableSchema::new(variables).map_err(err)?,
            units,
        )
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: formats::dataset_from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        formats::dataset_to_json(&self.inner).map_err(err)
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.units().iter().map(|u| u.id().to_string()).collect()
    }

    #[getter]
    fn categories(&self) -> Vec<String> {
        self.inner.categories().labels().to_vec()
    }

    #[getter]
    fn variables(&self) -> Vec<String> {
        self.inner.variables().names().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        self.inner.units().iter().map(|u| u.weights().to_vec()).collect()
    }

    /// Compositions of unit `index`, one list per variable.
    fn descriptions(&self, index: usize) -> PyResult<Vec<Vec<f64>>> {
        let unit = self.inner.unit(index).map_err(err)?;
        Ok(unit.descriptions().iter().map(|c| c.values().to_vec()).collect())
    }

    fn with_uniform_weights(&self) -> Self {
        Self {
            inner: self.inner.with_uniform_weights(),
        }
    }

    fn with_scaled_weights(&self, factor: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_scaled_weights(factor).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset({} units, {} variables, {} categories)",
            self.inner.len(),
            self.inner.num_variables(),
            self.inner.num_categories()
        )
    }
}

#[pyclass(frozen, get_all, module = "symclust")]
struct LeaderResult {
    /// Cluster index of every unit.
    labels: Vec<usize>,
    criterion: f64,
    criterion_trace: Vec<f64>,
    converged: bool,
    /// Leader compositions: cluster x variable x category.
    leaders: Vec<Vec<Vec<f64>>>,
}

#[pyclass(frozen, module = "symclust")]
struct Dendrogram {
    inner: symclust::Dendrogram,
}

#[pymethods]
impl Dendrogram {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: formats::dendrogram_from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        formats::dendrogram_to_json(&self.inner).map_err(err)
    }

    fn to_newick(&self) -> String {
        formats::dendrogram_to_newick(&self.inner)
    }

    #[getter]
    fn leaves(&self) -> Vec<String> {
        self.inner.leaves().to_vec()
    }

    /// `(left, right, height, size)` per merge; merge `i` creates node `n + i`.
    #[getter]
    fn merges(&self) -> Vec<(usize, usize, f64, usize)> {
        self.inner
            .merges()
            .iter()
            .map(|m| (m.left, m.right, m.height, m.size))
            .collect()
    }

    #[getter]
    fn has_inversions(&self) -> bool {
        self.inner.has_inversions()
    }

    /// Cluster index of every leaf after cutting into `k` clusters.
    fn cut(&self, k: usize) -> PyResult<Vec<usize>> {
        self.inner.cut_labels(k).map_err(err)
    }

    fn leaf_order(&self) -> Vec<usize> {
        self.inner.leaf_order()
    }
}

#[pyfunction]
fn compute_weight(deaths: f64, population: f64, std_population: f64) -> PyResult<f64> {
    symclust::ingest::compute_weight(deaths, population, std_population).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, b, tolerance = symclust::model::DEFAULT_SUM_TOLERANCE))]
fn sq_euclidean(a: Vec<f64>, b: Vec<f64>, tolerance: f64) -> PyResult<f64> {
    let a = Composition::new(a, tolerance).map_err(err)?;
    let b = Composition::new(b, tolerance).map_err(err)?;
    symclust::dissim::sq_euclidean(&a, &b).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (dataset, k, seed = 0, init = "spread_seeding", max_iterations = 100))]
fn run_leader(dataset: &Dataset, k: usize, seed: u64, init: &str, max_iterations: usize) -> PyResult<LeaderResult> {
    let init = match init {
        "spread_seeding" => InitStrategy::SpreadSeeding,
        "random_units" => InitStrategy::RandomUnits,
        other => {
            return Err(PyValueError::new_err(format!(
                "init must be `spread_seeding` or `random_units`, got `{other}`"
            )))
        }
    };
    let mut config = LeaderConfig::new(k).with_seed(seed).with_init(init);
    config.max_iterations = max_iterations;
    let run = symclust::run_leader_method(&dataset.inner, &config).map_err(err)?;
    Ok(LeaderResult {
        labels: run.partition.labels(),
        criterion: run.criterion(),
        leaders: run
            .partition
            .clusters()
            .iter()
            .map(|c| c.leader().components().iter().map(|x| x.values().to_vec()).collect())
            .collect(),
        criterion_trace: run.criterion_trace,
        converged: run.converged,
    })
}

#[pyfunction]
#[pyo3(signature = (dataset, normalize_by_p = false))]
fn agglomerate(dataset: &Dataset, normalize_by_p: bool) -> PyResult<Dendrogram> {
    Ok(Dendrogram {
        inner: symclust::agglomerate(&dataset.inner, normalize_by_p).map_err(err)?,
    })
}

/// Sum of cluster errors of the partition given by `labels`.
#[pyfunction]
fn partition_criterion(dataset: &Dataset, labels: Vec<usize>) -> PyResult<f64> {
    let p = partition(&dataset.inner, &labels)?;
    symclust::dissim::partition_criterion(&p, &dataset.inner).map_err(err)
}

/// Specificities and contrasts of every cluster. Returns one dict per
/// cluster with `members`, `specificity` (per variable), `contrasts`
/// and `highlighted` (variable x category).
#[pyfunction]
#[pyo3(signature = (dataset, labels, highlight_threshold = symclust::diag::DEFAULT_HIGHLIGHT_THRESHOLD))]
fn diagnostics<'py>(
    py: Python<'py>,
    dataset: &Dataset,
    labels: Vec<usize>,
    highlight_threshold: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let p = partition(&dataset.inner, &labels)?;
    let report = symclust::diag::diagnostics_report(&p, &dataset.inner, highlight_threshold).map_err(err)?;
    report
        .clusters
        .iter()
        .map(|cluster| {
            let d = PyDict::new(py);
            d.set_item("members", &cluster.members)?;
            let spec: Vec<f64> = cluster.rows.iter().map(|r| r.specificity).collect();
            let values: Vec<Vec<f64>> = cluster
                .rows
                .iter()
                .map(|r| r.contrasts.iter().map(|c| c.value).collect())
                .collect();
            let marks: Vec<Vec<bool>> = cluster
                .rows
                .iter()
                .map(|r| r.contrasts.iter().map(|c| c.highlighted).collect())
                .collect();
            d.set_item("specificity", spec)?;
            d.set_item("contrasts", values)?;
            d.set_item("highlighted", marks)?;
            Ok(d)
        })
        .collect()
}

/// One-way ANOVA over groups of values with Bonferroni-adjusted pairwise
/// t tests. Group labels are list positions.
#[pyfunction]
fn one_way_anova<'py>(py: Python<'py>, groups: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let groups: Vec<(usize, Vec<f64>)> = groups.into_iter().enumerate().collect();
    let r = symclust::diag::one_way_anova("values", &groups).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("f_statistic", r.f_statistic)?;
    d.set_item("p_value", r.p_value)?;
    d.set_item("df_between", r.df_between)?;
    d.set_item("df_within", r.df_within)?;
    d.set_item("group_means", r.group_means)?;
    let pairs = r
        .comparisons
        .iter()
        .map(|c| {
            let p = PyDict::new(py);
            p.set_item("groups", (c.group_a, c.group_b))?;
            p.set_item("mean_difference", c.mean_difference)?;
            p.set_item("t_statistic", c.t_statistic)?;
            p.set_item("p_value", c.p_value)?;
            p.set_item("adjusted_p_value", c.adjusted_p_value)?;
            Ok(p)
        })
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("comparisons", pairs)?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "symclust")]
fn symclust_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<LeaderResult>()?;
    m.add_class::<Dendrogram>()?;
    m.add_function(wrap_pyfunction!(compute_weight, m)?)?;
    m.add_function(wrap_pyfunction!(sq_euclidean, m)?)?;
    m.add_function(wrap_pyfunction!(run_leader, m)?)?;
    m.add_function(wrap_pyfunction!(agglomerate, m)?)?;
    m.add_function(wrap_pyfunction!(partition_criterion, m)?)?;
    m.add_function(wrap_pyfunction!(diagnostics, m)?)?;
    m.add_function(wrap_pyfunction!(one_way_anova, m)?)?;
    Ok(())
}
