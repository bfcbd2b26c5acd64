//! Cluster diagnostics: specificity of each variable, signed contrasts of
//! each category, indicator deciles, and one-way ANOVA with Bonferroni
//! pairwise comparisons.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::dissim::sq_euclidean;
use crate::error::{Error, Result};
use crate::model::{Cluster, Composition, Dataset, Leader, Partition};
use crate::numeric::{self, CompensatedSum};

pub const DEFAULT_HIGHLIGHT_THRESHOLD: f64 = 1.25;

/// Half the squared Euclidean distance between a cluster leader and the
/// global leader for one variable. Lies in `[0, 1]` for compositions.
pub fn specificity(cluster_leader: &Composition, global_leader: &Composition) -> Result<f64> {
    sq_euclidean(cluster_leader, global_leader)
        .map(|d| 0.5 * d)
        .map_err(|_| Error::SchemaMismatch("compositions have different lengths".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastFlag {
    Defined,
    /// Both proportions are zero; reported as a neutral 1.
    BothZero,
    /// Exactly one proportion is zero; reported as signed infinity.
    OneZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contrast {
    pub value: f64,
    pub flag: ContrastFlag,
}

/// Signed ratio of a cluster proportion to the overall proportion:
/// `r_c / r_s` when the cluster is at or above the overall value,
/// `-r_s / r_c` below it.
pub fn contrast(r_c: f64, r_s: f64) -> Result<Contrast> {
    if !(r_c >= 0.0 && r_s >= 0.0 && r_c.is_finite() && r_s.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "contrast needs finite nonnegative proportions, got {r_c} and {r_s}"
        )));
    }
    let (value, flag) = match (r_c == 0.0, r_s == 0.0) {
        (true, true) => (1.0, ContrastFlag::BothZero),
        (false, true) => (f64::INFINITY, ContrastFlag::OneZero),
        (true, false) => (f64::NEG_INFINITY, ContrastFlag::OneZero),
        (false, false) if r_c >= r_s => (r_c / r_s, ContrastFlag::Defined),
        (false, false) => (-r_s / r_c, ContrastFlag::Defined),
    };
    Ok(Contrast { value, flag })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastCell {
    pub variable: String,
    pub category: String,
    pub value: f64,
    pub highlighted: bool,
    pub flag: ContrastFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableRow {
    pub variable: String,
    pub specificity: f64,
    pub contrasts: Vec<ContrastCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub members: Vec<String>,
    pub rows: Vec<VariableRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub categories: Vec<String>,
    pub highlight_threshold: f64,
    pub clusters: Vec<ClusterReport>,
}

/// Specificities and contrasts of every cluster against the leader of the
/// whole dataset. Rows follow the variable schema, columns the categories.
pub fn diagnostics_report(
    partition: &Partition,
    dataset: &Dataset,
    highlight_threshold: f64,
) -> Result<DiagnosticsReport> {
    if partition.num_units() != dataset.len() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} units, dataset has {}",
            partition.num_units(),
            dataset.len()
        )));
    }
    let global = Cluster::from_members(dataset, (0..dataset.len()).collect())?;
    let global = global.leader();
    let categories = dataset.categories().labels();

    let clusters = partition
        .clusters()
        .iter()
        .map(|cluster| {
            let rows = dataset
                .variables()
                .names()
                .iter()
                .enumerate()
                .map(|(j, variable)| variable_row(variable, j, cluster.leader(), global, categories, highlight_threshold))
                .collect::<Result<Vec<_>>>()?;
            Ok(ClusterReport {
                members: cluster.member_ids(dataset).into_iter().map(String::from).collect(),
                rows,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DiagnosticsReport {
        categories: categories.to_vec(),
        highlight_threshold,
        clusters,
    })
}

fn variable_row(
    variable: &str,
    j: usize,
    cluster: &Leader,
    global: &Leader,
    categories: &[String],
    threshold: f64,
) -> Result<VariableRow> {
    let (rc, rs) = (&cluster.components()[j], &global.components()[j]);
    let contrasts = categories
        .iter()
        .zip(rc.values().iter().zip(rs.values()))
        .map(|(category, (&c, &s))| {
            let Contrast { value, flag } = contrast(c, s)?;
            Ok(ContrastCell {
                variable: variable.to_string(),
                category: category.clone(),
                value,
                highlighted: flag != ContrastFlag::BothZero && value.abs() >= threshold,
                flag,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VariableRow {
        variable: variable.to_string(),
        specificity: specificity(rc, rs)?,
        contrasts,
    })
}

impl DiagnosticsReport {
    /// Plain-text table: one block per cluster, one row per variable,
    /// highlighted contrasts marked with `*`.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = write!(out, "{:<12} {:>11}", "variable", "specificity");
        for c in &self.categories {
            let _ = write!(out, " {c:>8}");
        }
        out.push('\n');
        for (i, cluster) in self.clusters.iter().enumerate() {
            let _ = writeln!(out, "CLUSTER {} ({} units): {}", i + 1, cluster.members.len(), cluster.members.join(" "));
            for row in &cluster.rows {
                let _ = write!(out, "{:<12} {:>11.2}", row.variable, row.specificity);
                for cell in &row.contrasts {
                    let mark = if cell.highlighted { "*" } else { " " };
                    let text = if cell.value.is_infinite() {
                        if cell.value > 0.0 { "inf".to_string() } else { "-inf".to_string() }
                    } else {
                        format!("{:.2}", cell.value)
                    };
                    let _ = write!(out, " {:>7}{}", text, mark);
                }
                out.push('\n');
            }
        }
        let _ = writeln!(out, "* |contrast| >= {}", self.highlight_threshold);
        out
    }
}

/// External indicator values per unit. Missing values are simply absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndicatorTable {
    values: BTreeMap<String, BTreeMap<String, f64>>,
}

impl IndicatorTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, unit: impl Into<String>, indicator: impl Into<String>, value: f64) -> Result<()> {
        let (unit, indicator) = (unit.into(), indicator.into());
        if !value.is_finite() {
            return Err(Error::InvalidConfig(format!("indicator `{indicator}` for `{unit}` is not finite")));
        }
        let previous = self.values.entry(indicator.clone()).or_default().insert(unit.clone(), value);
        if previous.is_some() {
            return Err(Error::InvalidConfig(format!("duplicate value of `{indicator}` for `{unit}`")));
        }
        Ok(())
    }

    /// Indicator names in sorted order.
    pub fn indicators(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn get(&self, unit: &str, indicator: &str) -> Option<f64> {
        self.values.get(indicator)?.get(unit).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Empirical decile (1..=10) of every unit's value of `indicator`; `None`
/// where the value is missing. Decile = ceil(10 * F(x)) with F the
/// empirical distribution function, so ties share a decile.
pub fn decile_ranks(indicators: &IndicatorTable, indicator: &str, unit_ids: &[&str]) -> Vec<Option<u8>> {
    let present: Vec<f64> = unit_ids
        .iter()
        .filter_map(|u| indicators.get(u, indicator))
        .collect();
    let n = present.len();
    unit_ids
        .iter()
        .map(|u| {
            indicators.get(u, indicator).map(|x| {
                let at_most = present.iter().filter(|&&v| v <= x).count();
                ((10 * at_most).div_ceil(n)).clamp(1, 10) as u8
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    /// Cluster indices (0-based, partition order).
    pub group_a: usize,
    pub group_b: usize,
    /// mean(a) - mean(b)
    pub mean_difference: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub adjusted_p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub indicator: String,
    /// Clusters that had at least one value, with their sizes and means.
    pub groups: Vec<usize>,
    pub group_sizes: Vec<usize>,
    pub group_means: Vec<f64>,
    pub ss_between: f64,
    pub ss_within: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub f_statistic: f64,
    pub p_value: f64,
    pub comparisons: Vec<PairwiseComparison>,
}

/// One-way ANOVA of a set of groups followed by pairwise t comparisons
/// using the pooled within-group variance, Bonferroni-adjusted by the
/// number of pairs. `groups` holds `(label, values)`.
pub fn one_way_anova(indicator: &str, groups: &[(usize, Vec<f64>)]) -> Result<AnovaResult> {
    let groups: Vec<&(usize, Vec<f64>)> = groups.iter().filter(|(_, v)| !v.is_empty()).collect();
    let k = groups.len();
    let n: usize = groups.iter().map(|(_, v)| v.len()).sum();
    if k < 2 {
        return Err(Error::InsufficientData(format!(
            "`{indicator}`: need at least two groups with values, got {k}"
        )));
    }
    if n <= k {
        return Err(Error::InsufficientData(format!(
            "`{indicator}`: {n} observations in {k} groups leave no within-group degrees of freedom"
        )));
    }
    let means: Vec<f64> = groups
        .iter()
        .map(|(_, v)| numeric::sum(v.iter().copied()) / v.len() as f64)
        .collect();
    let grand = numeric::sum(groups.iter().flat_map(|(_, v)| v.iter().copied())) / n as f64;

    let mut ssb = CompensatedSum::new();
    let mut ssw = CompensatedSum::new();
    for ((_, values), &mean) in groups.iter().zip(&means) {
        ssb.add(values.len() as f64 * (mean - grand).powi(2));
        for &x in values {
            ssw.add((x - mean).powi(2));
        }
    }
    let (ssb, ssw) = (ssb.value(), ssw.value());
    if ssw == 0.0 {
        return Err(Error::DegenerateGroups(format!(
            "`{indicator}`: no variation within groups"
        )));
    }
    let (df_b, df_w) = (k - 1, n - k);
    let msw = ssw / df_w as f64;
    let f = (ssb / df_b as f64) / msw;
    let fdist = FisherSnedecor::new(df_b as f64, df_w as f64)
        .map_err(|e| Error::InsufficientData(format!("`{indicator}`: {e}")))?;
    let p_value = fdist.sf(f);

    let tdist = StudentsT::new(0.0, 1.0, df_w as f64)
        .map_err(|e| Error::InsufficientData(format!("`{indicator}`: {e}")))?;
    let pairs = k * (k - 1) / 2;
    let mut comparisons = Vec::with_capacity(pairs);
    for a in 0..k {
        for b in a + 1..k {
            let (na, nb) = (groups[a].1.len() as f64, groups[b].1.len() as f64);
            let diff = means[a] - means[b];
            let se = (msw * (1.0 / na + 1.0 / nb)).sqrt();
            let t = diff / se;
            let p = 2.0 * tdist.sf(t.abs());
            comparisons.push(PairwiseComparison {
                group_a: groups[a].0,
                group_b: groups[b].0,
                mean_difference: diff,
                t_statistic: t,
                p_value: p.min(1.0),
                adjusted_p_value: (p * pairs as f64).min(1.0),
            });
        }
    }

    Ok(AnovaResult {
        indicator: indicator.to_string(),
        groups: groups.iter().map(|(g, _)| *g).collect(),
        group_sizes: groups.iter().map(|(_, v)| v.len()).collect(),
        group_means: means,
        ss_between: ssb,
        ss_within: ssw,
        df_between: df_b,
        df_within: df_w,
        f_statistic: f,
        p_value,
        comparisons,
    })
}

/// ANOVA of every indicator across the clusters of a partition.
pub fn anova_bonferroni(
    indicators: &IndicatorTable,
    partition: &Partition,
    dataset: &Dataset,
) -> Vec<(String, Result<AnovaResult>)> {
    indicators
        .indicators()
        .map(|name| {
            let groups: Vec<(usize, Vec<f64>)> = partition
                .clusters()
                .iter()
                .enumerate()
                .map(|(c, cluster)| {
                    let values = cluster
                        .member_ids(dataset)
                        .into_iter()
                        .filter_map(|id| indicators.get(id, name))
                        .collect();
                    (c, values)
                })
                .collect();
            (name.to_string(), one_way_anova(name, &groups))
        })
        .collect()
}
