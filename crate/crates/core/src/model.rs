//! Domain types: category and variable schemas, compositions, symbolic
//! units, clusters and partitions.
//!
//! Every variable of a dataset shares one ordered [`CategorySchema`]; a
//! composition is identified with a category only through its position.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::leader::compute_leader;
use crate::numeric;

/// Tolerance used when no other is given: freshly computed compositions
/// must sum to one up to accumulated rounding.
pub const DEFAULT_SUM_TOLERANCE: f64 = 1e-9;

/// The seven cause-of-death categories used for mortality patterns.
pub const MORTALITY_CATEGORIES: [&str; 7] = ["Neop", "Nerv", "Circ", "Resp", "Acc", "Suic", "Oth"];

/// Male and female five-year age groups from 20 to 39.
pub const YOUNG_ADULT_VARIABLES: [&str; 8] = [
    "M.Y20-24", "F.Y20-24", "M.Y25-29", "F.Y25-29", "M.Y30-34", "F.Y30-34", "M.Y35-39", "F.Y35-39",
];

fn check_labels(labels: &[String], min_len: usize, what: &str) -> Result<()> {
    if labels.len() < min_len {
        return Err(Error::InvalidSchema(format!(
            "{what} needs at least {min_len} labels, got {}",
            labels.len()
        )));
    }
    let mut seen = HashSet::new();
    for label in labels {
        if label.is_empty() {
            return Err(Error::InvalidSchema(format!("empty {what} label")));
        }
        if !seen.insert(label.as_str()) {
            return Err(Error::InvalidSchema(format!("duplicate {what} label `{label}`")));
        }
    }
    Ok(())
}

/// Ordered category labels shared by all variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategorySchema {
    labels: Vec<String>,
}

impl CategorySchema {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        check_labels(&labels, 2, "category")?;
        Ok(Self { labels })
    }

    pub fn mortality() -> Self {
        Self::new(MORTALITY_CATEGORIES).expect("built-in schema is valid")
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Ordered names of the symbolic variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableSchema {
    names: Vec<String>,
}

impl VariableSchema {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        check_labels(&names, 1, "variable")?;
        Ok(Self { names })
    }

    pub fn young_adults() -> Self {
        Self::new(YOUNG_ADULT_VARIABLES).expect("built-in schema is valid")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// A point of the probability simplex: nonnegative proportions summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    values: Vec<f64>,
}

impl Composition {
    /// Checks nonnegativity and the sum constraint, then rescales so the
    /// compensated sum of the components is exactly one. A composition
    /// whose sum is already exactly one is returned bit-for-bit unchanged.
    pub fn new(values: Vec<f64>, tolerance: f64) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteComponent { index });
            }
            if value < 0.0 {
                return Err(Error::NegativeComponent { index, value });
            }
        }
        let sum = numeric::sum(values.iter().copied());
        let within = (sum - 1.0).abs() <= tolerance; // false for NaN
        if !within {
            return Err(Error::SumOutOfTolerance { sum, tolerance });
        }
        Ok(Self {
            values: normalize(values, sum),
        })
    }

    /// Wraps values already known to lie on the simplex up to rounding
    /// (weighted means of compositions), removing the rounding residual.
    pub(crate) fn from_simplex_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| *v >= 0.0));
        let sum = numeric::sum(values.iter().copied());
        debug_assert!((sum - 1.0).abs() < 1e-9);
        Self {
            values: normalize(values, sum),
        }
    }

    pub fn uniform(m: usize) -> Self {
        assert!(m > 0, "uniform composition needs at least one category");
        Self::new(vec![1.0 / m as f64; m], DEFAULT_SUM_TOLERANCE).expect("uniform is on the simplex")
    }

    pub fn point_mass(m: usize, index: usize) -> Self {
        assert!(index < m);
        let mut values = vec![0.0; m];
        values[index] = 1.0;
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn normalize(mut values: Vec<f64>, sum: f64) -> Vec<f64> {
    if sum == 1.0 {
        return values;
    }
    for v in &mut values {
        *v /= sum;
    }
    // Push the residual rounding error into the largest component.
    for _ in 0..4 {
        let s = numeric::sum(values.iter().copied());
        if s == 1.0 {
            break;
        }
        let largest = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("non-empty");
        values[largest] = (values[largest] + (1.0 - s)).max(0.0);
    }
    values
}

/// Validates `values` as a composition over `m` categories.
pub fn validate_composition(values: &[f64], m: usize, tolerance: f64) -> Result<Composition> {
    if values.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            actual: values.len(),
        });
    }
    Composition::new(values.to_vec(), tolerance)
}

/// A unit described by one weighted composition per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicUnit {
    id: String,
    descriptions: Vec<Composition>,
    weights: Vec<f64>,
}

impl SymbolicUnit {
    pub fn new(id: impl Into<String>, descriptions: Vec<Composition>, weights: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if descriptions.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: descriptions.len(),
                actual: weights.len(),
            });
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidWeight { unit: id, index, value });
            }
        }
        Ok(Self {
            id,
            descriptions,
            weights,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn descriptions(&self) -> &[Composition] {
        &self.descriptions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        numeric::sum(self.weights.iter().copied())
    }

    pub fn num_variables(&self) -> usize {
        self.descriptions.len()
    }
}

/// A finite set of units sharing one category and one variable schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    categories: CategorySchema,
    variables: VariableSchema,
    units: Vec<SymbolicUnit>,
}

impl Dataset {
    pub fn new(categories: CategorySchema, variables: VariableSchema, units: Vec<SymbolicUnit>) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut ids = HashSet::new();
        for unit in &units {
            if !ids.insert(unit.id.as_str()) {
                return Err(Error::DuplicateId(unit.id.clone()));
            }
            if unit.descriptions.len() != variables.len() {
                return Err(Error::SchemaMismatch(format!(
                    "unit `{}` has {} variables, schema has {}",
                    unit.id,
                    unit.descriptions.len(),
                    variables.len()
                )));
            }
            if let Some(c) = unit.descriptions.iter().find(|c| c.len() != categories.len()) {
                return Err(Error::SchemaMismatch(format!(
                    "unit `{}` has a composition over {} categories, schema has {}",
                    unit.id,
                    c.len(),
                    categories.len()
                )));
            }
        }
        Ok(Self {
            categories,
            variables,
            units,
        })
    }

    pub fn categories(&self) -> &CategorySchema {
        &self.categories
    }

    pub fn variables(&self) -> &VariableSchema {
        &self.variables
    }

    pub fn units(&self) -> &[SymbolicUnit] {
        &self.units
    }

    pub fn unit(&self, index: usize) -> Result<&SymbolicUnit> {
        self.units.get(index).ok_or(Error::UnknownMember(index))
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.units.iter().position(|u| u.id == id)
    }

    /// Pattern-only mode: every weight becomes 1, compositions untouched.
    pub fn with_uniform_weights(&self) -> Self {
        self.map_weights(|_| 1.0)
    }

    /// Multiplies every weight by `factor`.
    pub fn with_scaled_weights(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidConfig(format!("weight scale must be positive, got {factor}")));
        }
        Ok(self.map_weights(|w| w * factor))
    }

    fn map_weights(&self, f: impl Fn(f64) -> f64) -> Self {
        let units = self
            .units
            .iter()
            .map(|u| SymbolicUnit {
                id: u.id.clone(),
                descriptions: u.descriptions.clone(),
                weights: u.weights.iter().map(|&w| f(w)).collect(),
            })
            .collect();
        Self {
            categories: self.categories.clone(),
            variables: self.variables.clone(),
            units,
        }
    }
}

/// Returns a copy of `dataset` with all weights set to 1.
pub fn set_uniform_weights(dataset: &Dataset) -> Dataset {
    dataset.with_uniform_weights()
}

/// Optimal representative of a cluster: one composition per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Leader {
    components: Vec<Composition>,
}

impl Leader {
    pub fn new(components: Vec<Composition>) -> Self {
        Self { components }
    }

    /// The leader that coincides with a unit's own description.
    pub fn of_unit(unit: &SymbolicUnit) -> Self {
        Self::new(unit.descriptions.clone())
    }

    pub fn components(&self) -> &[Composition] {
        &self.components
    }

    pub fn num_variables(&self) -> usize {
        self.components.len()
    }
}

/// A set of units together with its leader and per-variable aggregated weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    members: Vec<usize>,
    leader: Leader,
    agg_weights: Vec<f64>,
}

impl Cluster {
    /// Builds a cluster from unit indices, computing its leader and
    /// aggregated weights. Members are kept in ascending order.
    pub fn from_members(dataset: &Dataset, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        let units = members
            .iter()
            .map(|&i| dataset.unit(i))
            .collect::<Result<Vec<_>>>()?;
        let leader = compute_leader(&units)?;
        let agg_weights = aggregate_weights(&units);
        Ok(Self {
            members,
            leader,
            agg_weights,
        })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn member_ids<'a>(&self, dataset: &'a Dataset) -> Vec<&'a str> {
        self.members.iter().map(|&i| dataset.units[i].id()).collect()
    }

    pub fn leader(&self) -> &Leader {
        &self.leader
    }

    pub fn agg_weights(&self) -> &[f64] {
        &self.agg_weights
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub(crate) fn aggregate_weights(units: &[&SymbolicUnit]) -> Vec<f64> {
    let p = units.first().map_or(0, |u| u.num_variables());
    (0..p)
        .map(|j| numeric::sum(units.iter().map(|u| u.weights[j])))
        .collect()
}

/// Disjoint clusters covering every unit of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    clusters: Vec<Cluster>,
}

impl Partition {
    pub fn new(dataset: &Dataset, clusters: Vec<Cluster>) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::InvalidPartition("no clusters".into()));
        }
        let mut seen = vec![false; dataset.len()];
        for cluster in &clusters {
            if cluster.is_empty() {
                return Err(Error::EmptyCluster);
            }
            for &m in &cluster.members {
                match seen.get_mut(m) {
                    None => return Err(Error::UnknownMember(m)),
                    Some(true) => return Err(Error::OverlappingClusters(m)),
                    Some(flag) => *flag = true,
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!(
                "unit `{}` is not assigned to any cluster",
                dataset.units[missing].id
            )));
        }
        Ok(Self { clusters })
    }

    /// Builds the partition induced by cluster labels `0..k`. Labels
    /// without members are dropped.
    pub fn from_labels(dataset: &Dataset, labels: &[usize]) -> Result<Self> {
        if labels.len() != dataset.len() {
            return Err(Error::LengthMismatch {
                expected: dataset.len(),
                actual: labels.len(),
            });
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut groups = vec![Vec::new(); k];
        for (unit, &label) in labels.iter().enumerate() {
            groups[label].push(unit);
        }
        let clusters = groups
            .into_iter()
            .filter(|g| !g.is_empty())
            .map(|g| Cluster::from_members(dataset, g))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dataset, clusters)
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn num_units(&self) -> usize {
        self.clusters.iter().map(Cluster::len).sum()
    }

    /// Cluster index of every unit, in cluster order.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.num_units()];
        for (c, cluster) in self.clusters.iter().enumerate() {
            for &m in &cluster.members {
                labels[m] = c;
            }
        }
        labels
    }

    /// Labels renumbered by first appearance, so two partitions with the
    /// same blocks compare equal regardless of cluster order.
    pub fn canonical_labels(&self) -> Vec<usize> {
        canonicalize_labels(&self.labels())
    }
}

pub fn canonicalize_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EU28_M20: [f64; 7] = [0.093, 0.046, 0.054, 0.022, 0.387, 0.218, 0.180];

    #[test]
    fn eu28_row_validates() {
        let c = validate_composition(&EU28_M20, 7, 1e-3).unwrap();
        assert_eq!(numeric::sum(c.values().iter().copied()), 1.0);
        for (a, b) in c.values().iter().zip(EU28_M20) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn point_mass_is_valid() {
        let c = validate_composition(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 7, 1e-9).unwrap();
        assert_eq!(c, Composition::point_mass(7, 0));
    }

    #[test]
    fn sum_out_of_tolerance_reports_sum() {
        match validate_composition(&[0.5, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0], 7, 1e-3) {
            Err(Error::SumOutOfTolerance { sum, .. }) => assert!((sum - 1.1).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_and_length_errors() {
        assert!(matches!(
            validate_composition(&[1.5, -0.5], 2, 1e-9),
            Err(Error::NegativeComponent { index: 1, .. })
        ));
        assert!(matches!(
            validate_composition(&[1.0], 2, 1e-9),
            Err(Error::LengthMismatch { expected: 2, actual: 1 })
        ));
        assert!(matches!(
            validate_composition(&[f64::NAN, 1.0], 2, 1e-9),
            Err(Error::NonFiniteComponent { index: 0 })
        ));
    }

    #[test]
    fn zeros_are_preserved() {
        let c = validate_composition(&[0.0, 0.3, 0.7000004], 3, 1e-3).unwrap();
        assert_eq!(c.values()[0], 0.0);
    }

    #[test]
    fn schema_rejects_duplicates_and_short_lists() {
        assert!(CategorySchema::new(["a", "a"]).is_err());
        assert!(CategorySchema::new(["a"]).is_err());
        assert!(VariableSchema::new(Vec::<String>::new()).is_err());
        assert!(VariableSchema::new(["x", ""]).is_err());
        assert_eq!(CategorySchema::mortality().len(), 7);
        assert_eq!(VariableSchema::young_adults().len(), 8);
    }

    fn small_dataset() -> Dataset {
        let units = vec![
            SymbolicUnit::new("A", vec![Composition::point_mass(2, 0)], vec![2.0]).unwrap(),
            SymbolicUnit::new("B", vec![Composition::point_mass(2, 1)], vec![3.0]).unwrap(),
            SymbolicUnit::new("C", vec![Composition::uniform(2)], vec![1.0]).unwrap(),
        ];
        Dataset::new(CategorySchema::new(["x", "y"]).unwrap(), VariableSchema::new(["v"]).unwrap(), units).unwrap()
    }

    #[test]
    fn uniform_weights_keep_compositions() {
        let ds = small_dataset();
        let uw = set_uniform_weights(&ds);
        assert_eq!(uw.len(), ds.len());
        for (a, b) in ds.units().iter().zip(uw.units()) {
            assert_eq!(a.descriptions(), b.descriptions());
            assert!(b.weights().iter().all(|&w| w == 1.0));
        }
        assert_eq!(set_uniform_weights(&uw), uw);
    }

    #[test]
    fn dataset_rejects_bad_units() {
        let cats = CategorySchema::new(["x", "y"]).unwrap();
        let vars = VariableSchema::new(["v"]).unwrap();
        let a = SymbolicUnit::new("A", vec![Composition::uniform(2)], vec![1.0]).unwrap();
        assert!(matches!(
            Dataset::new(cats.clone(), vars.clone(), vec![a.clone(), a.clone()]),
            Err(Error::DuplicateId(_))
        ));
        let wide = SymbolicUnit::new("W", vec![Composition::uniform(3)], vec![1.0]).unwrap();
        assert!(matches!(
            Dataset::new(cats.clone(), vars.clone(), vec![wide]),
            Err(Error::SchemaMismatch(_))
        ));
        assert!(matches!(Dataset::new(cats, vars, vec![]), Err(Error::EmptyDataset)));
        assert!(SymbolicUnit::new("N", vec![Composition::uniform(2)], vec![-1.0]).is_err());
    }

    #[test]
    fn partition_checks_cover_and_overlap() {
        let ds = small_dataset();
        let a = Cluster::from_members(&ds, vec![0, 1]).unwrap();
        let b = Cluster::from_members(&ds, vec![1, 2]).unwrap();
        let c = Cluster::from_members(&ds, vec![2]).unwrap();
        assert!(matches!(
            Partition::new(&ds, vec![a.clone(), b]),
            Err(Error::OverlappingClusters(1))
        ));
        assert!(Partition::new(&ds, vec![a.clone()]).is_err());
        let p = Partition::new(&ds, vec![c, a]).unwrap();
        assert_eq!(p.labels(), vec![1, 1, 0]);
        assert_eq!(p.canonical_labels(), vec![0, 0, 1]);
        assert_eq!(p.clusters()[1].agg_weights(), &[5.0]);
    }
}
