//! Dissimilarities and the clustering criterion.
//!
//! The base dissimilarity between compositions is the squared Euclidean
//! distance. A unit is compared to a leader variable by variable, each
//! term scaled by the unit's weight for that variable:
//!
//! ```text
//! d(X, R) = sum_j w_xj * |x_j - r_j|^2
//! ```
//!
//! The error of a cluster is the sum of its members' dissimilarities to
//! the cluster leader and the criterion of a partition is the sum of its
//! cluster errors. Merging two clusters raises the criterion by
//!
//! ```text
//! D(Cu, Cv) = sum_j w_uj * w_vj / (w_uj + w_vj) * |u_j - v_j|^2
//! ```
//!
//! where `u_j`, `v_j` are the leaders and `w_uj`, `w_vj` the aggregated
//! weights. [`merge_dissim_closed`] can optionally divide that sum by the
//! number of variables `p`.

use crate::error::{Error, Result};
use crate::leader::compute_leader;
use crate::model::{Cluster, Composition, Dataset, Leader, Partition, SymbolicUnit};
use crate::numeric::{self, CompensatedSum};

/// Squared Euclidean distance between two compositions.
pub fn sq_euclidean(a: &Composition, b: &Composition) -> Result<f64> {
    sq_euclidean_slices(a.values(), b.values())
}

pub(crate) fn sq_euclidean_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(numeric::sum(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y))))
}

fn check_variables(unit: &SymbolicUnit, leader: &Leader) -> Result<()> {
    if unit.num_variables() != leader.num_variables() {
        return Err(Error::SchemaMismatch(format!(
            "unit `{}` has {} variables, leader has {}",
            unit.id(),
            unit.num_variables(),
            leader.num_variables()
        )));
    }
    Ok(())
}

/// Weighted dissimilarity between a unit and a cluster representative.
pub fn unit_leader_dissim(unit: &SymbolicUnit, leader: &Leader) -> Result<f64> {
    check_variables(unit, leader)?;
    let mut acc = CompensatedSum::new();
    for ((x, r), &w) in unit.descriptions().iter().zip(leader.components()).zip(unit.weights()) {
        let d = sq_euclidean(x, r).map_err(|_| {
            Error::SchemaMismatch(format!("unit `{}` and leader use different category counts", unit.id()))
        })?;
        acc.add(w * d);
    }
    Ok(acc.value())
}

/// Sum of member dissimilarities to the cluster's leader.
pub fn cluster_error(cluster: &Cluster, dataset: &Dataset) -> Result<f64> {
    members_error(cluster.members(), cluster.leader(), dataset)
}

pub(crate) fn members_error(members: &[usize], leader: &Leader, dataset: &Dataset) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for &m in members {
        acc.add(unit_leader_dissim(dataset.unit(m)?, leader)?);
    }
    Ok(acc.value())
}

/// The criterion function: total error over all clusters.
pub fn partition_criterion(partition: &Partition, dataset: &Dataset) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for cluster in partition.clusters() {
        acc.add(cluster_error(cluster, dataset)?);
    }
    Ok(acc.value())
}

pub(crate) fn check_disjoint(cu: &Cluster, cv: &Cluster) -> Result<()> {
    // members are sorted
    let (mut i, mut j) = (0, 0);
    let (a, b) = (cu.members(), cv.members());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return Err(Error::OverlappingClusters(a[i])),
        }
    }
    Ok(())
}

/// Criterion increase from merging two clusters, computed from its
/// definition: the merged cluster's optimal leader is formed and its error
/// compared with the two separate errors.
pub fn merge_dissim_definitional(cu: &Cluster, cv: &Cluster, dataset: &Dataset) -> Result<f64> {
    check_disjoint(cu, cv)?;
    let merged: Vec<usize> = cu.members().iter().chain(cv.members()).copied().collect();
    let units = merged.iter().map(|&i| dataset.unit(i)).collect::<Result<Vec<_>>>()?;
    let leader = compute_leader(&units)?;
    let merged_err = members_error(&merged, &leader, dataset)?;
    Ok(merged_err - cluster_error(cu, dataset)? - cluster_error(cv, dataset)?)
}

/// Closed-form merge dissimilarity from leaders and aggregated weights.
/// With `normalize_by_p` the sum is divided by the number of variables.
pub fn merge_dissim_closed(cu: &Cluster, cv: &Cluster, normalize_by_p: bool) -> Result<f64> {
    check_disjoint(cu, cv)?;
    merge_cost(cu.leader(), cu.agg_weights(), cv.leader(), cv.agg_weights(), normalize_by_p)
}

pub(crate) fn merge_cost(
    u: &Leader,
    wu: &[f64],
    v: &Leader,
    wv: &[f64],
    normalize_by_p: bool,
) -> Result<f64> {
    let p = u.num_variables();
    if v.num_variables() != p || wu.len() != p || wv.len() != p {
        return Err(Error::SchemaMismatch("clusters have different variable counts".into()));
    }
    let mut acc = CompensatedSum::new();
    for j in 0..p {
        let total = wu[j] + wv[j];
        if total == 0.0 {
            continue;
        }
        let d = sq_euclidean(&u.components()[j], &v.components()[j])?;
        acc.add(wu[j] * wv[j] / total * d);
    }
    let value = acc.value();
    Ok(if normalize_by_p { value / p as f64 } else { value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CategorySchema, VariableSchema};

    fn comp(v: &[f64]) -> Composition {
        Composition::new(v.to_vec(), 1e-9).unwrap()
    }

    fn two_point_masses() -> Dataset {
        let units = vec![
            SymbolicUnit::new("A", vec![comp(&[1.0, 0.0])], vec![1.0]).unwrap(),
            SymbolicUnit::new("B", vec![comp(&[0.0, 1.0])], vec![1.0]).unwrap(),
        ];
        Dataset::new(CategorySchema::new(["x", "y"]).unwrap(), VariableSchema::new(["v"]).unwrap(), units).unwrap()
    }

    #[test]
    fn sq_euclidean_basics() {
        let a = Composition::point_mass(7, 0);
        let b = Composition::point_mass(7, 1);
        assert_eq!(sq_euclidean(&a, &a).unwrap(), 0.0);
        assert_eq!(sq_euclidean(&a, &b).unwrap(), 2.0);
        assert!(matches!(
            sq_euclidean(&a, &Composition::uniform(3)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn unit_leader_weighted() {
        let unit = SymbolicUnit::new("A", vec![comp(&[1.0, 0.0])], vec![2.0]).unwrap();
        let leader = Leader::new(vec![comp(&[0.0, 1.0])]);
        assert_eq!(unit_leader_dissim(&unit, &leader).unwrap(), 4.0);
        assert_eq!(unit_leader_dissim(&unit, &Leader::of_unit(&unit)).unwrap(), 0.0);
        let wrong = Leader::new(vec![comp(&[0.0, 1.0]), comp(&[0.0, 1.0])]);
        assert!(matches!(unit_leader_dissim(&unit, &wrong), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn two_point_mass_cluster() {
        let ds = two_point_masses();
        let both = Cluster::from_members(&ds, vec![0, 1]).unwrap();
        assert_eq!(both.leader().components()[0].values(), &[0.5, 0.5]);
        assert_eq!(cluster_error(&both, &ds).unwrap(), 1.0);

        let a = Cluster::from_members(&ds, vec![0]).unwrap();
        let b = Cluster::from_members(&ds, vec![1]).unwrap();
        assert_eq!(cluster_error(&a, &ds).unwrap(), 0.0);
        assert_eq!(merge_dissim_definitional(&a, &b, &ds).unwrap(), 1.0);
        assert_eq!(merge_dissim_closed(&a, &b, false).unwrap(), 1.0);
        assert_eq!(merge_dissim_closed(&a, &b, true).unwrap(), 1.0);

        let singletons = Partition::new(&ds, vec![a.clone(), b]).unwrap();
        assert_eq!(partition_criterion(&singletons, &ds).unwrap(), 0.0);
        let whole = Partition::new(&ds, vec![both]).unwrap();
        assert_eq!(partition_criterion(&whole, &ds).unwrap(), 1.0);
        assert!(matches!(
            merge_dissim_closed(&a, &a, false),
            Err(Error::OverlappingClusters(0))
        ));
        assert!(matches!(
            merge_dissim_definitional(&a, &a, &ds),
            Err(Error::OverlappingClusters(0))
        ));
    }

    #[test]
    fn zero_weight_variable_contributes_nothing() {
        let units = vec![
            SymbolicUnit::new("A", vec![comp(&[1.0, 0.0])], vec![0.0]).unwrap(),
            SymbolicUnit::new("B", vec![comp(&[0.0, 1.0])], vec![0.0]).unwrap(),
        ];
        let ds = Dataset::new(CategorySchema::new(["x", "y"]).unwrap(), VariableSchema::new(["v"]).unwrap(), units)
            .unwrap();
        let a = Cluster::from_members(&ds, vec![0]).unwrap();
        let b = Cluster::from_members(&ds, vec![1]).unwrap();
        assert_eq!(merge_dissim_closed(&a, &b, false).unwrap(), 0.0);
        assert_eq!(merge_dissim_definitional(&a, &b, &ds).unwrap(), 0.0);
    }
}
