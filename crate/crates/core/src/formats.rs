//! File formats: dataset, partition and dendrogram JSON, the CSV inputs
//! (rates, standard population, indicators) and Newick export.
//!
//! Every JSON document carries `format_version` and a `kind` tag. Floats
//! are written in shortest round-trip form, so loading a saved file
//! reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::diag::IndicatorTable;
use crate::error::{Error, Result};
use crate::hclust::{Dendrogram, Merge};
use crate::ingest::{combine_gender_distributions, split_variable, RateRecord, StandardPopulation2D};
use crate::model::{
    CategorySchema, Composition, Dataset, Leader, Partition, SymbolicUnit, VariableSchema, DEFAULT_SUM_TOLERANCE,
};

pub const FORMAT_VERSION: u32 = 1;

fn check_header(kind: &str, expected: &str, version: u32) -> Result<()> {
    if kind != expected {
        return Err(Error::Format(format!("expected a {expected} document, found `{kind}`")));
    }
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format_version {version}")));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct UnitRecord {
    id: String,
    descriptions: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetDoc {
    format_version: u32,
    kind: String,
    categories: Vec<String>,
    variables: Vec<String>,
    /// Slack allowed on composition sums when loading, e.g. for
    /// published tables rounded to three decimals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sum_tolerance: Option<f64>,
    units: Vec<UnitRecord>,
}

fn leader_values(leader: &Leader) -> Vec<Vec<f64>> {
    leader.components().iter().map(|c| c.values().to_vec()).collect()
}

pub fn dataset_to_json(dataset: &Dataset) -> Result<String> {
    let doc = DatasetDoc {
        format_version: FORMAT_VERSION,
        kind: "dataset".into(),
        categories: dataset.categories().labels().to_vec(),
        variables: dataset.variables().names().to_vec(),
        sum_tolerance: None,
        units: dataset
            .units()
            .iter()
            .map(|u| UnitRecord {
                id: u.id().to_string(),
                descriptions: u.descriptions().iter().map(|c| c.values().to_vec()).collect(),
                weights: u.weights().to_vec(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

pub fn dataset_from_json(text: &str) -> Result<Dataset> {
    let doc: DatasetDoc = serde_json::from_str(text)?;
    check_header(&doc.kind, "dataset", doc.format_version)?;
    let categories = CategorySchema::new(doc.categories)?;
    let variables = VariableSchema::new(doc.variables)?;
    let tolerance = doc.sum_tolerance.unwrap_or(DEFAULT_SUM_TOLERANCE);
    let m = categories.len();
    let units = doc
        .units
        .into_iter()
        .map(|u| {
            let descriptions = u
                .descriptions
                .into_iter()
                .map(|values| {
                    if values.len() != m {
                        return Err(Error::LengthMismatch {
                            expected: m,
                            actual: values.len(),
                        });
                    }
                    Composition::new(values, tolerance)
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::Format(format!("unit `{}`: {e}", u.id)))?;
            SymbolicUnit::new(u.id, descriptions, u.weights)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(categories, variables, units)
}

#[derive(Debug, Serialize, Deserialize)]
struct ClusterRecord {
    members: Vec<String>,
    leader: Vec<Vec<f64>>,
    agg_weights: Vec<f64>,
    error: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PartitionDoc {
    format_version: u32,
    kind: String,
    method: String,
    k: usize,
    criterion: f64,
    #[serde(default)]
    criterion_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    clusters: Vec<ClusterRecord>,
}

/// Extra information stored alongside a partition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartitionMeta {
    pub method: String,
    pub criterion_trace: Vec<f64>,
    pub converged: Option<bool>,
}

pub fn partition_to_json(partition: &Partition, dataset: &Dataset, meta: &PartitionMeta) -> Result<String> {
    let clusters = partition
        .clusters()
        .iter()
        .map(|c| {
            Ok(ClusterRecord {
                members: c.member_ids(dataset).into_iter().map(String::from).collect(),
                leader: leader_values(c.leader()),
                agg_weights: c.agg_weights().to_vec(),
                error: crate::dissim::cluster_error(c, dataset)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let doc = PartitionDoc {
        format_version: FORMAT_VERSION,
        kind: "partition".into(),
        method: meta.method.clone(),
        k: partition.len(),
        criterion: crate::dissim::partition_criterion(partition, dataset)?,
        criterion_trace: meta.criterion_trace.clone(),
        converged: meta.converged,
        clusters,
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// Reads a partition and rebuilds its clusters (and leaders) against
/// `dataset`.
pub fn partition_from_json(text: &str, dataset: &Dataset) -> Result<(Partition, PartitionMeta)> {
    let doc: PartitionDoc = serde_json::from_str(text)?;
    check_header(&doc.kind, "partition", doc.format_version)?;
    let mut labels = vec![usize::MAX; dataset.len()];
    for (c, cluster) in doc.clusters.iter().enumerate() {
        for id in &cluster.members {
            let i = dataset
                .position(id)
                .ok_or_else(|| Error::Format(format!("partition member `{id}` is not in the dataset")))?;
            if labels[i] != usize::MAX {
                return Err(Error::OverlappingClusters(i));
            }
            labels[i] = c;
        }
    }
    if let Some(i) = labels.iter().position(|&l| l == usize::MAX) {
        return Err(Error::InvalidPartition(format!(
            "unit `{}` is missing from the partition",
            dataset.units()[i].id()
        )));
    }
    let partition = Partition::from_labels(dataset, &labels)?;
    let meta = PartitionMeta {
        method: doc.method,
        criterion_trace: doc.criterion_trace,
        converged: doc.converged,
    };
    Ok((partition, meta))
}

#[derive(Debug, Serialize, Deserialize)]
struct MergeRecord {
    left: usize,
    right: usize,
    height: f64,
    size: usize,
    leader: Vec<Vec<f64>>,
    agg_weights: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DendrogramDoc {
    format_version: u32,
    kind: String,
    /// `criterion_increase` or `criterion_increase_over_p`.
    height_variant: String,
    normalize_by_p: bool,
    has_inversions: bool,
    leaves: Vec<String>,
    merges: Vec<MergeRecord>,
}

fn height_variant(normalize_by_p: bool) -> &'static str {
    if normalize_by_p {
        "criterion_increase_over_p"
    } else {
        "criterion_increase"
    }
}

pub fn dendrogram_to_json(dendrogram: &Dendrogram) -> Result<String> {
    let doc = DendrogramDoc {
        format_version: FORMAT_VERSION,
        kind: "dendrogram".into(),
        height_variant: height_variant(dendrogram.normalize_by_p()).into(),
        normalize_by_p: dendrogram.normalize_by_p(),
        has_inversions: dendrogram.has_inversions(),
        leaves: dendrogram.leaves().to_vec(),
        merges: dendrogram
            .merges()
            .iter()
            .map(|m| MergeRecord {
                left: m.left,
                right: m.right,
                height: m.height,
                size: m.size,
                leader: leader_values(&m.leader),
                agg_weights: m.agg_weights.clone(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

pub fn dendrogram_from_json(text: &str) -> Result<Dendrogram> {
    let doc: DendrogramDoc = serde_json::from_str(text)?;
    check_header(&doc.kind, "dendrogram", doc.format_version)?;
    if doc.height_variant != height_variant(doc.normalize_by_p) {
        return Err(Error::Format(format!(
            "height_variant `{}` contradicts normalize_by_p = {}",
            doc.height_variant, doc.normalize_by_p
        )));
    }
    let merges = doc
        .merges
        .into_iter()
        .map(|m| {
            let components = m
                .leader
                .into_iter()
                .map(|values| Composition::new(values, DEFAULT_SUM_TOLERANCE))
                .collect::<Result<Vec<_>>>()?;
            Ok(Merge {
                left: m.left,
                right: m.right,
                height: m.height,
                leader: Leader::new(components),
                agg_weights: m.agg_weights,
                size: m.size,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dendrogram::new(doc.leaves, merges, doc.normalize_by_p)
}

/// Distinguishes saved partitions from dendrograms.
pub fn document_kind(text: &str) -> Result<String> {
    #[derive(Deserialize)]
    struct Header {
        kind: String,
    }
    Ok(serde_json::from_str::<Header>(text)?.kind)
}

fn parse_error(line: Option<u64>, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line.unwrap_or(0),
        message: message.into(),
    }
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input)
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| parse_error(Some(1), format!("missing column `{name}`")))
}

fn parse_number(record: &csv::StringRecord, col: usize, name: &str) -> Result<f64> {
    let line = record.position().map(|p| p.line());
    let raw = record.get(col).unwrap_or_default();
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_error(line, format!("`{name}` is not a number: `{raw}`")))
}

/// Reads `country,variable,cause_code,deaths,population` rows. Rows with
/// negative deaths or nonpositive population are rejected with their line
/// number.
pub fn read_rates_csv<R: Read>(input: R) -> Result<Vec<RateRecord>> {
    let mut reader = csv_reader(input);
    let headers = reader.headers()?.clone();
    let cols: Vec<usize> = ["country", "variable", "cause_code", "deaths", "population"]
        .iter()
        .map(|c| header_index(&headers, c))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line());
        let deaths = parse_number(&row, cols[3], "deaths")?;
        let population = parse_number(&row, cols[4], "population")?;
        if deaths < 0.0 {
            return Err(parse_error(line, format!("deaths must be nonnegative, got {deaths}")));
        }
        if population <= 0.0 {
            return Err(parse_error(line, format!("population must be positive, got {population}")));
        }
        out.push(RateRecord {
            country: row[cols[0]].to_string(),
            variable: row[cols[1]].to_string(),
            cause_code: row[cols[2]].to_string(),
            deaths,
            population,
        });
    }
    Ok(out)
}

/// Reads a standard population either as `variable,std_count` rows or as
/// `age_group,gender,count` rows (gender `M`/`F`), the latter combined
/// with [`combine_gender_distributions`].
pub fn read_std_population_csv<R: Read>(
    input: R,
    variables: &VariableSchema,
    gender_share: f64,
    total: f64,
) -> Result<StandardPopulation2D> {
    let mut reader = csv_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().any(|h| h == "std_count") {
        let var_col = header_index(&headers, "variable")?;
        let count_col = header_index(&headers, "std_count")?;
        let mut entries = BTreeMap::new();
        for row in reader.records() {
            let row = row?;
            let line = row.position().map(|p| p.line());
            let count = parse_number(&row, count_col, "std_count")?;
            if count <= 0.0 {
                return Err(parse_error(line, format!("std_count must be positive, got {count}")));
            }
            if entries.insert(row[var_col].to_string(), count).is_some() {
                return Err(parse_error(line, format!("duplicate variable `{}`", &row[var_col])));
            }
        }
        return StandardPopulation2D::new(entries);
    }

    let age_col = header_index(&headers, "age_group")?;
    let gender_col = header_index(&headers, "gender")?;
    let count_col = header_index(&headers, "count")?;
    let (mut male, mut female) = (BTreeMap::new(), BTreeMap::new());
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line());
        let count = parse_number(&row, count_col, "count")?;
        if count < 0.0 {
            return Err(parse_error(line, format!("count must be nonnegative, got {count}")));
        }
        let target = match &row[gender_col] {
            "M" => &mut male,
            "F" => &mut female,
            other => return Err(parse_error(line, format!("gender must be M or F, got `{other}`"))),
        };
        if target.insert(row[age_col].to_string(), count).is_some() {
            return Err(parse_error(line, format!("duplicate age group `{}`", &row[age_col])));
        }
    }
    // fail early on schemas that cannot be split into gender and age
    for name in variables.names() {
        split_variable(name)?;
    }
    combine_gender_distributions(&male, &female, gender_share, total, variables)
}

/// Reads `unit_id,indicator,value` rows.
pub fn read_indicators_csv<R: Read>(input: R) -> Result<IndicatorTable> {
    let mut reader = csv_reader(input);
    let headers = reader.headers()?.clone();
    let cols: Vec<usize> = ["unit_id", "indicator", "value"]
        .iter()
        .map(|c| header_index(&headers, c))
        .collect::<Result<_>>()?;
    let mut table = IndicatorTable::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line());
        let value = parse_number(&row, cols[2], "value")?;
        table
            .insert(&row[cols[0]], &row[cols[1]], value)
            .map_err(|e| parse_error(line, e.to_string()))?;
    }
    Ok(table)
}

fn newick_label(label: &str) -> String {
    let plain = !label.is_empty()
        && label
            .chars()
            .all(|c| !c.is_whitespace() && !"()[]':;,".contains(c));
    if plain {
        label.to_string()
    } else {
        format!("'{}'", label.replace('\'', "''"))
    }
}

/// Newick string with branch length = parent height - child height, so a
/// node's depth below the root reproduces its merge height. Children are
/// written left (smaller node id) first.
pub fn dendrogram_to_newick(dendrogram: &Dendrogram) -> String {
    fn write(d: &Dendrogram, node: usize, out: &mut String) {
        match d.children(node) {
            Some((l, r)) => {
                out.push('(');
                for (i, child) in [l, r].into_iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write(d, child, out);
                    out.push(':');
                    out.push_str(&format!("{}", d.height(node) - d.height(child)));
                }
                out.push(')');
            }
            None => out.push_str(&newick_label(&d.leaves()[node])),
        }
    }
    let mut out = String::new();
    write(dendrogram, dendrogram.root(), &mut out);
    out.push_str(";\n");
    out
}

/// A parsed Newick tree.
#[derive(Debug, Clone, PartialEq)]
pub struct NewickNode {
    pub label: Option<String>,
    pub length: Option<f64>,
    pub children: Vec<NewickNode>,
}

pub fn parse_newick(text: &str) -> Result<NewickNode> {
    let mut parser = NewickParser {
        chars: text.trim().chars().collect(),
        pos: 0,
    };
    let node = parser.node()?;
    parser.skip_ws();
    if parser.peek() != Some(';') {
        return Err(Error::Format("Newick string must end with `;`".into()));
    }
    parser.pos += 1;
    parser.skip_ws();
    if parser.pos != parser.chars.len() {
        return Err(Error::Format("trailing characters after `;`".into()));
    }
    Ok(node)
}

struct NewickParser {
    chars: Vec<char>,
    pos: usize,
}

impl NewickParser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn error(&self, message: &str) -> Error {
        Error::Format(format!("Newick position {}: {message}", self.pos))
    }

    fn node(&mut self) -> Result<NewickNode> {
        self.skip_ws();
        let mut children = Vec::new();
        if self.peek() == Some('(') {
            self.pos += 1;
            loop {
                children.push(self.node()?);
                self.skip_ws();
                match self.peek() {
                    Some(',') => self.pos += 1,
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.error("expected `,` or `)`")),
                }
            }
        }
        self.skip_ws();
        let label = self.label()?;
        self.skip_ws();
        let length = if self.peek() == Some(':') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self
                .peek()
                .is_some_and(|c| c.is_ascii_digit() || "+-.eE".contains(c))
            {
                self.pos += 1;
            }
            let raw: String = self.chars[start..self.pos].iter().collect();
            Some(raw.parse::<f64>().map_err(|_| self.error("invalid branch length"))?)
        } else {
            None
        };
        if children.is_empty() && label.is_none() {
            return Err(self.error("leaf without a label"));
        }
        Ok(NewickNode {
            label,
            length,
            children,
        })
    }

    fn label(&mut self) -> Result<Option<String>> {
        if self.peek() == Some('\'') {
            self.pos += 1;
            let mut out = String::new();
            loop {
                match self.peek() {
                    None => return Err(self.error("unterminated quoted label")),
                    Some('\'') if self.chars.get(self.pos + 1) == Some(&'\'') => {
                        out.push('\'');
                        self.pos += 2;
                    }
                    Some('\'') => {
                        self.pos += 1;
                        return Ok(Some(out));
                    }
                    Some(c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                }
            }
        }
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| !c.is_whitespace() && !"()[]':;,".contains(c))
        {
            self.pos += 1;
        }
        Ok((self.pos > start).then(|| self.chars[start..self.pos].iter().collect()))
    }
}
