//! Agglomerative hierarchical clustering compatible with the leader
//! criterion.
//!
//! Nodes are numbered as usual for dendrograms: leaves take `0..n` in
//! dataset order and the node created by merge `i` is `n + i`.

use rayon::prelude::*;

use crate::dissim::{check_disjoint, merge_cost};
use crate::error::{Error, Result};
use crate::model::{Cluster, Composition, Dataset, Leader, Partition};

#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    /// Smaller node id of the merged pair.
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub leader: Leader,
    pub agg_weights: Vec<f64>,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    leaves: Vec<String>,
    merges: Vec<Merge>,
    normalize_by_p: bool,
}

impl Dendrogram {
    /// Assembles a dendrogram and checks that `merges` form a full binary
    /// tree over the leaves.
    pub fn new(leaves: Vec<String>, merges: Vec<Merge>, normalize_by_p: bool) -> Result<Self> {
        let n = leaves.len();
        if n < 2 {
            return Err(Error::FewerThanTwoUnits(n));
        }
        if merges.len() != n - 1 {
            return Err(Error::Format(format!(
                "{} leaves need {} merges, got {}",
                n,
                n - 1,
                merges.len()
            )));
        }
        let mut used = vec![false; 2 * n - 1];
        for (i, m) in merges.iter().enumerate() {
            let node = n + i;
            for child in [m.left, m.right] {
                if child >= node {
                    return Err(Error::Format(format!("merge {i} refers to node {child} not yet created")));
                }
                if std::mem::replace(&mut used[child], true) {
                    return Err(Error::Format(format!("node {child} is merged twice")));
                }
            }
            if m.left == m.right {
                return Err(Error::Format(format!("merge {i} joins node {} with itself", m.left)));
            }
            if !(m.height.is_finite() && m.height >= 0.0) {
                return Err(Error::Format(format!("merge {i} has invalid height {}", m.height)));
            }
        }
        Ok(Self {
            leaves,
            merges,
            normalize_by_p,
        })
    }

    pub fn leaves(&self) -> &[String] {
        &self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn normalize_by_p(&self) -> bool {
        self.normalize_by_p
    }

    pub fn root(&self) -> usize {
        2 * self.leaves.len() - 2
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.leaves.len()
    }

    /// Children of an internal node.
    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        node.checked_sub(self.leaves.len())
            .and_then(|i| self.merges.get(i))
            .map(|m| (m.left, m.right))
    }

    /// Height of a node; leaves sit at zero.
    pub fn height(&self, node: usize) -> f64 {
        node.checked_sub(self.leaves.len())
            .and_then(|i| self.merges.get(i))
            .map_or(0.0, |m| m.height)
    }

    /// True when some merge sits lower than one of its children.
    pub fn has_inversions(&self) -> bool {
        self.merges
            .iter()
            .any(|m| m.height < self.height(m.left) || m.height < self.height(m.right))
    }

    /// Leaf indices below `node`, left subtree first.
    pub fn leaves_under(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            match self.children(v) {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => out.push(v),
            }
        }
        out
    }

    /// Leaf display order: depth first from the root, left subtree first.
    pub fn leaf_order(&self) -> Vec<usize> {
        self.leaves_under(self.root())
    }

    /// Cluster label of every leaf after undoing the last `k - 1` merges.
    /// Labels are numbered by smallest member.
    pub fn cut_labels(&self, k: usize) -> Result<Vec<usize>> {
        let n = self.leaves.len();
        if k == 0 || k > n {
            return Err(Error::KOutOfRange { k, n });
        }
        let mut parent: Vec<usize> = (0..2 * n - 1).collect();
        for (i, m) in self.merges.iter().take(n - k).enumerate() {
            parent[m.left] = n + i;
            parent[m.right] = n + i;
        }
        let find = |mut v: usize| {
            while parent[v] != v {
                v = parent[v];
            }
            v
        };
        let roots: Vec<usize> = (0..n).map(find).collect();
        Ok(crate::model::canonicalize_labels(&roots))
    }
}

/// Leader of the union of two disjoint clusters, from their leaders and
/// aggregated weights.
pub fn merge_leaders(cu: &Cluster, cv: &Cluster) -> Result<Leader> {
    check_disjoint(cu, cv)?;
    combine_leaders(
        (cu.leader(), cu.agg_weights(), cu.len()),
        (cv.leader(), cv.agg_weights(), cv.len()),
    )
}

type LeaderParts<'a> = (&'a Leader, &'a [f64], usize);

fn combine_leaders((u, wu, nu): LeaderParts<'_>, (v, wv, nv): LeaderParts<'_>) -> Result<Leader> {
    let p = u.num_variables();
    if v.num_variables() != p || wu.len() != p || wv.len() != p {
        return Err(Error::SchemaMismatch("clusters have different variable counts".into()));
    }
    let components = (0..p)
        .map(|j| {
            let (a, b) = (u.components()[j].values(), v.components()[j].values());
            // zero total weight: leaders are unweighted means, so pool by size
            let (ca, cb) = if wu[j] + wv[j] > 0.0 {
                (wu[j], wv[j])
            } else {
                (nu as f64, nv as f64)
            };
            let total = ca + cb;
            let values = a
                .iter()
                .zip(b)
                .map(|(x, y)| ((ca * x + cb * y) / total).max(0.0))
                .collect();
            Composition::from_simplex_unchecked(values)
        })
        .collect();
    Ok(Leader::new(components))
}

struct Node {
    id: usize,
    members: Vec<usize>,
    leader: Leader,
    agg_weights: Vec<f64>,
}

/// Greedy agglomeration: starting from singletons, repeatedly merge the
/// pair of active clusters with the smallest closed-form merge
/// dissimilarity. Ties go to the lexicographically smallest pair of node ids.
pub fn agglomerate(dataset: &Dataset, normalize_by_p: bool) -> Result<Dendrogram> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::FewerThanTwoUnits(n));
    }
    let total = 2 * n - 1;
    let mut nodes: Vec<Option<Node>> = Vec::with_capacity(total);
    for (i, unit) in dataset.units().iter().enumerate() {
        nodes.push(Some(Node {
            id: i,
            members: vec![i],
            leader: Leader::of_unit(unit),
            agg_weights: unit.weights().to_vec(),
        }));
    }
    // dist[a][b] for a < b, filled lazily as nodes appear
    let mut dist = vec![vec![f64::NAN; total]; total];
    let cost = |a: &Node, b: &Node| merge_cost(&a.leader, &a.agg_weights, &b.leader, &b.agg_weights, normalize_by_p);
    for a in 0..n {
        let row: Vec<f64> = (a + 1..n)
            .into_par_iter()
            .map(|b| cost(nodes[a].as_ref().unwrap(), nodes[b].as_ref().unwrap()))
            .collect::<Result<_>>()?;
        dist[a][a + 1..n].copy_from_slice(&row);
    }

    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);
    while active.len() > 1 {
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for (ia, &a) in active.iter().enumerate() {
            for &b in &active[ia + 1..] {
                let d = dist[a][b];
                if d < best.0 || (d == best.0 && (a, b) < (best.1, best.2)) {
                    best = (d, a, b);
                }
            }
        }
        let (height, a, b) = best;
        let left = nodes[a].take().expect("active node");
        let right = nodes[b].take().expect("active node");
        let leader = combine_leaders(
            (&left.leader, &left.agg_weights, left.members.len()),
            (&right.leader, &right.agg_weights, right.members.len()),
        )?;
        let agg_weights: Vec<f64> = left
            .agg_weights
            .iter()
            .zip(&right.agg_weights)
            .map(|(x, y)| x + y)
            .collect();
        let mut members = left.members;
        members.extend(right.members);
        members.sort_unstable();

        let id = nodes.len();
        merges.push(Merge {
            left: a,
            right: b,
            height,
            leader: leader.clone(),
            agg_weights: agg_weights.clone(),
            size: members.len(),
        });
        let node = Node {
            id,
            members,
            leader,
            agg_weights,
        };
        active.retain(|&x| x != a && x != b);
        let row: Vec<f64> = active
            .par_iter()
            .map(|&other| cost(nodes[other].as_ref().unwrap(), &node))
            .collect::<Result<_>>()?;
        for (&other, d) in active.iter().zip(row) {
            dist[other][id] = d;
        }
        debug_assert_eq!(node.id, id);
        nodes.push(Some(node));
        active.push(id);
    }

    let leaves = dataset.units().iter().map(|u| u.id().to_string()).collect();
    Dendrogram::new(leaves, merges, normalize_by_p)
}

/// Partition obtained by undoing the last `k - 1` merges, with leaders
/// recomputed from the members. Clusters are ordered by smallest member.
pub fn cut(dendrogram: &Dendrogram, k: usize, dataset: &Dataset) -> Result<Partition> {
    if dendrogram.num_leaves() != dataset.len() {
        return Err(Error::SchemaMismatch(format!(
            "dendrogram has {} leaves, dataset has {} units",
            dendrogram.num_leaves(),
            dataset.len()
        )));
    }
    for (leaf, unit) in dendrogram.leaves().iter().zip(dataset.units()) {
        if leaf != unit.id() {
            return Err(Error::SchemaMismatch(format!(
                "dendrogram leaf `{leaf}` does not match unit `{}`",
                unit.id()
            )));
        }
    }
    let labels = dendrogram.cut_labels(k)?;
    Partition::from_labels(dataset, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissim::merge_dissim_closed;
    use crate::model::{CategorySchema, SymbolicUnit, VariableSchema};

    fn comp(v: &[f64]) -> Composition {
        Composition::new(v.to_vec(), 1e-9).unwrap()
    }

    fn dataset(rows: &[(&str, [f64; 3], f64)]) -> Dataset {
        let units = rows
            .iter()
            .map(|(id, c, w)| SymbolicUnit::new(*id, vec![comp(c)], vec![*w]).unwrap())
            .collect();
        Dataset::new(
            CategorySchema::new(["a", "b", "c"]).unwrap(),
            VariableSchema::new(["v"]).unwrap(),
            units,
        )
        .unwrap()
    }

    #[test]
    fn two_units_single_merge() {
        let ds = dataset(&[("A", [1.0, 0.0, 0.0], 1.0), ("B", [0.0, 1.0, 0.0], 3.0)]);
        let d = agglomerate(&ds, false).unwrap();
        let a = Cluster::from_members(&ds, vec![0]).unwrap();
        let b = Cluster::from_members(&ds, vec![1]).unwrap();
        assert_eq!(d.merges().len(), 1);
        assert_eq!(d.merges()[0].height, merge_dissim_closed(&a, &b, false).unwrap());
        assert_eq!(d.merges()[0].height, 1.5);
        assert_eq!((d.merges()[0].left, d.merges()[0].right), (0, 1));
    }

    #[test]
    fn identical_pair_merges_first_at_zero() {
        let ds = dataset(&[
            ("A", [0.6, 0.2, 0.2], 1.0),
            ("B", [0.1, 0.1, 0.8], 2.0),
            ("C", [0.1, 0.1, 0.8], 2.0),
        ]);
        let d = agglomerate(&ds, false).unwrap();
        assert_eq!((d.merges()[0].left, d.merges()[0].right), (1, 2));
        assert_eq!(d.merges()[0].height, 0.0);
        assert!(d.merges()[1].height > 0.0);
        assert!(!d.has_inversions());
        assert_eq!(d.leaf_order(), vec![0, 1, 2]);
    }

    #[test]
    fn merge_leaders_cases() {
        let ds = dataset(&[("A", [1.0, 0.0, 0.0], 2.0), ("B", [0.0, 1.0, 0.0], 2.0), ("C", [0.0, 0.0, 1.0], 0.0)]);
        let a = Cluster::from_members(&ds, vec![0]).unwrap();
        let b = Cluster::from_members(&ds, vec![1]).unwrap();
        let c = Cluster::from_members(&ds, vec![2]).unwrap();
        assert_eq!(merge_leaders(&a, &b).unwrap().components()[0].values(), &[0.5, 0.5, 0.0]);
        assert_eq!(merge_leaders(&a, &c).unwrap(), *a.leader());
        assert!(matches!(merge_leaders(&a, &a), Err(Error::OverlappingClusters(0))));
    }

    #[test]
    fn cut_extremes_and_errors() {
        let ds = dataset(&[
            ("A", [0.6, 0.2, 0.2], 1.0),
            ("B", [0.1, 0.1, 0.8], 2.0),
            ("C", [0.2, 0.1, 0.7], 2.0),
            ("D", [0.7, 0.2, 0.1], 1.0),
        ]);
        let d = agglomerate(&ds, true).unwrap();
        assert_eq!(cut(&d, 1, &ds).unwrap().len(), 1);
        assert_eq!(cut(&d, 4, &ds).unwrap().len(), 4);
        assert_eq!(cut(&d, 2, &ds).unwrap().canonical_labels(), vec![0, 1, 1, 0]);
        assert!(matches!(cut(&d, 0, &ds), Err(Error::KOutOfRange { .. })));
        assert!(matches!(cut(&d, 5, &ds), Err(Error::KOutOfRange { .. })));
    }

    #[test]
    fn single_unit_is_rejected() {
        let ds = dataset(&[("A", [0.6, 0.2, 0.2], 1.0)]);
        assert!(matches!(agglomerate(&ds, false), Err(Error::FewerThanTwoUnits(1))));
    }

    #[test]
    fn malformed_merge_lists_are_rejected() {
        let leader = Leader::new(vec![Composition::uniform(3)]);
        let m = |left, right| Merge {
            left,
            right,
            height: 0.0,
            leader: leader.clone(),
            agg_weights: vec![1.0],
            size: 2,
        };
        let leaves = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        assert!(Dendrogram::new(leaves.clone(), vec![m(0, 1), m(0, 3)], false).is_err());
        assert!(Dendrogram::new(leaves.clone(), vec![m(0, 4), m(1, 2)], false).is_err());
        assert!(Dendrogram::new(leaves.clone(), vec![m(0, 1)], false).is_err());
        assert!(Dendrogram::new(leaves, vec![m(0, 1), m(2, 3)], false).is_ok());
    }
}
