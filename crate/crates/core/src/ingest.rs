//! From raw death counts to a [`Dataset`].
//!
//! Each (country, age-gender group) cell is turned into a composition of
//! deaths over the cause categories, weighted by the expected number of
//! deaths in a standard population:
//!
//! ```text
//! w = deaths / population * std_population
//! ```
//!
//! Causes are grouped into categories by ICD-10 code ranges; anything not
//! matched by a rule falls into the residual category.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CategorySchema, Composition, Dataset, SymbolicUnit, VariableSchema};
use crate::numeric::{self, CompensatedSum};

/// Standard population size the weights refer to.
pub const DEFAULT_STD_TOTAL: f64 = 100_000.0;

/// Expected deaths in the standard population.
pub fn compute_weight(deaths: f64, population: f64, std_population: f64) -> Result<f64> {
    if !(population.is_finite() && population > 0.0) {
        return Err(Error::ZeroPopulation(population));
    }
    if !(deaths.is_finite() && deaths >= 0.0) {
        return Err(Error::InvalidDeaths(deaths));
    }
    if !(std_population.is_finite() && std_population > 0.0) {
        return Err(Error::InvalidStdPopulation(std_population));
    }
    Ok(deaths * std_population / population)
}

/// An ICD-10 code reduced to its letter and integer part; decimal
/// subdivisions (`X60.1`) compare equal to their parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IcdCode {
    letter: char,
    number: u16,
}

impl FromStr for IcdCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnparseableCode(s.to_string());
        let code = s.trim();
        let mut chars = code.chars();
        let letter = chars.next().filter(char::is_ascii_alphabetic).ok_or_else(bad)?;
        let rest = chars.as_str();
        let digits = rest.split('.').next().unwrap_or_default();
        if digits.is_empty() || digits.len() > 3 || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if let Some(suffix) = rest.strip_prefix(digits).and_then(|r| r.strip_prefix('.')) {
            if suffix.is_empty() || !suffix.bytes().all(|b| b.is_ascii_alphanumeric()) {
                return Err(bad());
            }
        } else if rest.len() != digits.len() {
            return Err(bad());
        }
        Ok(Self {
            letter: letter.to_ascii_uppercase(),
            number: digits.parse().map_err(|_| bad())?,
        })
    }
}

impl fmt::Display for IcdCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:02}", self.letter, self.number)
    }
}

/// Inclusive range of ICD-10 codes, e.g. `V01-X59`. A single code is a
/// range of one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IcdRange {
    start: IcdCode,
    end: IcdCode,
}

impl IcdRange {
    pub fn new(start: IcdCode, end: IcdCode) -> Result<Self> {
        if start.cmp(&end) == Ordering::Greater {
            return Err(Error::InvalidRange(format!("{start}-{end}")));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, code: IcdCode) -> bool {
        self.start <= code && code <= self.end
    }
}

impl FromStr for IcdRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let invalid = |_| Error::InvalidRange(s.to_string());
        match s.split_once('-') {
            Some((a, b)) => Self::new(a.parse().map_err(invalid)?, b.parse().map_err(invalid)?),
            None => {
                let code: IcdCode = s.parse().map_err(invalid)?;
                Self::new(code, code)
            }
        }
    }
}

impl fmt::Display for IcdRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.start == self.end {
            write!(f, "{}", self.start)
        } else {
            write!(f, "{}-{}", self.start, self.end)
        }
    }
}

impl Serialize for IcdRange {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IcdRange {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Whether `code` lies in `range`, both ends inclusive.
pub fn icd_in_range(code: &str, range: &IcdRange) -> Result<bool> {
    Ok(range.contains(code.parse()?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauseRule {
    pub category: String,
    pub ranges: Vec<IcdRange>,
}

/// Ordered cause-grouping rules; the first matching rule wins and
/// unmatched codes go to `residual`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauseMapping {
    pub rules: Vec<CauseRule>,
    #[serde(default = "default_residual")]
    pub residual: String,
}

fn default_residual() -> String {
    "Oth".to_string()
}

impl CauseMapping {
    /// Grouping of young-adult causes of death into the seven mortality
    /// categories.
    pub fn mortality() -> Self {
        let rule = |category: &str, ranges: &[&str]| CauseRule {
            category: category.to_string(),
            ranges: ranges.iter().map(|r| r.parse().expect("valid built-in range")).collect(),
        };
        Self {
            rules: vec![
                rule("Neop", &["C00-D48"]),
                rule("Nerv", &["G00-H95"]),
                rule("Circ", &["I00-I99"]),
                rule("Resp", &["J00-J99"]),
                rule("Acc", &["V01-X59", "Y85", "Y86"]),
                rule("Suic", &["X60-X84", "Y87"]),
            ],
            residual: default_residual(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self, categories: &CategorySchema) -> Result<()> {
        for label in self.rules.iter().map(|r| &r.category).chain([&self.residual]) {
            if categories.position(label).is_none() {
                return Err(Error::UnknownCategory(label.clone()));
            }
        }
        Ok(())
    }

    /// Category of a cause. A cause given directly as a category label
    /// maps to itself.
    pub fn category_of<'a>(&'a self, cause: &str) -> Result<&'a str> {
        let cause = cause.trim();
        if let Some(label) = self
            .rules
            .iter()
            .map(|r| r.category.as_str())
            .chain([self.residual.as_str()])
            .find(|l| *l == cause)
        {
            return Ok(label);
        }
        let code: IcdCode = cause.parse()?;
        Ok(self
            .rules
            .iter()
            .find(|r| r.ranges.iter().any(|range| range.contains(code)))
            .map_or(self.residual.as_str(), |r| r.category.as_str()))
    }
}

/// Persons per age-gender group in the standard population.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardPopulation2D {
    entries: BTreeMap<String, f64>,
}

impl StandardPopulation2D {
    pub fn new(entries: BTreeMap<String, f64>) -> Result<Self> {
        if let Some((_, &v)) = entries.iter().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidStdPopulation(v));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, variable: &str) -> Option<f64> {
        self.entries.get(variable).copied()
    }

    pub fn entries(&self) -> &BTreeMap<String, f64> {
        &self.entries
    }
}

/// Splits a variable name such as `M.Y20-24` into gender and age group.
pub fn split_variable(name: &str) -> Result<(&str, &str)> {
    match name.split_once('.') {
        Some((g @ ("M" | "F"), age)) if !age.is_empty() => Ok((g, age)),
        _ => Err(Error::InvalidSchema(format!(
            "variable `{name}` is not of the form M.<age> or F.<age>"
        ))),
    }
}

/// Builds a two-dimensional standard population from separate male and
/// female age distributions. Each gender's distribution is normalized over
/// all of its age groups, then scaled to its share of `total` persons.
pub fn combine_gender_distributions(
    male: &BTreeMap<String, f64>,
    female: &BTreeMap<String, f64>,
    gender_share: f64,
    total: f64,
    variables: &VariableSchema,
) -> Result<StandardPopulation2D> {
    if !(gender_share > 0.0 && gender_share < 1.0) {
        return Err(Error::DegenerateShare(gender_share));
    }
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::InvalidStdPopulation(total));
    }
    for dist in [male, female] {
        if let Some((_, &v)) = dist.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidStdPopulation(v));
        }
    }
    let male_total = numeric::sum(male.values().copied());
    let female_total = numeric::sum(female.values().copied());
    let mut entries = BTreeMap::new();
    for name in variables.names() {
        let (gender, age) = split_variable(name)?;
        let (dist, dist_total, share) = if gender == "M" {
            (male, male_total, gender_share)
        } else {
            (female, female_total, 1.0 - gender_share)
        };
        let count = dist.get(age).ok_or_else(|| Error::MissingAgeGroup(age.to_string()))?;
        entries.insert(name.clone(), share * total * count / dist_total);
    }
    StandardPopulation2D::new(entries)
}

/// One input row: deaths from one cause in one (country, age-gender) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub country: String,
    pub variable: String,
    pub cause_code: String,
    pub deaths: f64,
    pub population: f64,
}

/// Aggregates rate records into a dataset with one unit per country, in
/// sorted country order. A cell without deaths gets the uniform
/// composition and weight 0.
pub fn build_dataset(
    records: &[RateRecord],
    std: &StandardPopulation2D,
    mapping: &CauseMapping,
    categories: &CategorySchema,
    variables: &VariableSchema,
) -> Result<Dataset> {
    mapping.validate(categories)?;
    let m = categories.len();

    struct Cell<'a> {
        population: f64,
        records: Vec<(&'a RateRecord, usize)>,
    }
    let mut cells: BTreeMap<(&str, usize), Cell> = BTreeMap::new();
    let mut countries = BTreeSet::new();
    for record in records {
        let j = variables
            .position(&record.variable)
            .ok_or_else(|| Error::UnmappedVariable(record.variable.clone()))?;
        if !(record.population.is_finite() && record.population > 0.0) {
            return Err(Error::ZeroPopulation(record.population));
        }
        if !(record.deaths.is_finite() && record.deaths >= 0.0) {
            return Err(Error::InvalidDeaths(record.deaths));
        }
        let category = mapping.category_of(&record.cause_code)?;
        let l = categories.position(category).expect("mapping validated");
        countries.insert(record.country.as_str());
        let cell = cells.entry((record.country.as_str(), j)).or_insert(Cell {
            population: record.population,
            records: Vec::new(),
        });
        if cell.population != record.population {
            return Err(Error::InconsistentPopulation {
                country: record.country.clone(),
                variable: record.variable.clone(),
                first: cell.population,
                second: record.population,
            });
        }
        cell.records.push((record, l));
    }

    let mut units = Vec::with_capacity(countries.len());
    for country in countries {
        let mut descriptions = Vec::with_capacity(variables.len());
        let mut weights = Vec::with_capacity(variables.len());
        for (j, variable) in variables.names().iter().enumerate() {
            let cell = cells.get_mut(&(country, j)).ok_or_else(|| Error::MissingCell {
                country: country.to_string(),
                variable: variable.clone(),
            })?;
            let std_count = std
                .get(variable)
                .ok_or_else(|| Error::MissingStdEntry(variable.clone()))?;
            // fixed summation order regardless of input order
            cell.records.sort_by(|(a, _), (b, _)| {
                a.cause_code.cmp(&b.cause_code).then(a.deaths.total_cmp(&b.deaths))
            });
            let mut by_category = vec![CompensatedSum::new(); m];
            for (record, l) in &cell.records {
                by_category[*l].add(record.deaths);
            }
            let counts: Vec<f64> = by_category.iter().map(CompensatedSum::value).collect();
            let total = numeric::sum(counts.iter().copied());
            if total == 0.0 {
                descriptions.push(Composition::uniform(m));
                weights.push(0.0);
            } else {
                let values = counts.iter().map(|c| c / total).collect();
                descriptions.push(Composition::new(values, crate::model::DEFAULT_SUM_TOLERANCE)?);
                weights.push(compute_weight(total, cell.population, std_count)?);
            }
        }
        units.push(SymbolicUnit::new(country, descriptions, weights)?);
    }
    Dataset::new(categories.clone(), variables.clone(), units)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range(s: &str) -> IcdRange {
        s.parse().unwrap()
    }

    #[test]
    fn weight_examples() {
        assert_eq!(compute_weight(10.0, 200_000.0, 3_000_000.0).unwrap(), 150.0);
        assert_eq!(compute_weight(0.0, 12_345.0, 999.0).unwrap(), 0.0);
        // 37 * 2876000 / 412345 to 40 digits: 258.0654548982041736895...
        let w = compute_weight(37.0, 412_345.0, 2_876_000.0).unwrap();
        assert!((w - 258.065_454_898_204_17).abs() <= 258.0 * f64::EPSILON);
        assert!(matches!(compute_weight(1.0, 0.0, 1.0), Err(Error::ZeroPopulation(_))));
        assert!(compute_weight(-1.0, 10.0, 1.0).is_err());
        assert!(compute_weight(1.0, 10.0, 0.0).is_err());
    }

    #[test]
    fn icd_ranges() {
        assert!(icd_in_range("C15", &range("C00-D48")).unwrap());
        assert!(icd_in_range("D48.9", &range("C00-D48")).unwrap());
        assert!(icd_in_range("I99", &range("I00-I99")).unwrap());
        assert!(!icd_in_range("Y87", &range("V01-X59")).unwrap());
        assert!(icd_in_range("x60.1", &range("X60-X84")).unwrap());
        assert!(icd_in_range("Y85", &range("Y85")).unwrap());
        assert!(matches!(icd_in_range("15C", &range("C00-D48")), Err(Error::UnparseableCode(_))));
        assert!(matches!(icd_in_range("C1x", &range("C00-D48")), Err(Error::UnparseableCode(_))));
        assert!("X59-V01".parse::<IcdRange>().is_err());
        assert_eq!(range("V01-X59").to_string(), "V01-X59");
    }

    #[test]
    fn mortality_mapping() {
        let m = CauseMapping::mortality();
        assert_eq!(m.category_of("Y87").unwrap(), "Suic");
        assert_eq!(m.category_of("X70").unwrap(), "Suic");
        assert_eq!(m.category_of("V89").unwrap(), "Acc");
        assert_eq!(m.category_of("Y86").unwrap(), "Acc");
        // assault
        assert_eq!(m.category_of("X95").unwrap(), "Oth");
        assert_eq!(m.category_of("C50").unwrap(), "Neop");
        assert_eq!(m.category_of("Resp").unwrap(), "Resp");
        assert!(m.category_of("??").is_err());
        m.validate(&CategorySchema::mortality()).unwrap();
        assert!(m.validate(&CategorySchema::new(["Neop", "Oth"]).unwrap()).is_err());
    }

    #[test]
    fn mapping_json_round_trip() {
        let text = r#"{"rules":[{"category":"Acc","ranges":["V01-X59","Y85","Y86"]}],"residual":"Oth"}"#;
        let m = CauseMapping::from_json(text).unwrap();
        assert_eq!(m.rules[0].ranges.len(), 3);
        assert_eq!(serde_json::to_string(&m).unwrap(), text);
        assert!(CauseMapping::from_json(r#"{"rules":[{"category":"Acc","ranges":["V01-"]}]}"#).is_err());
    }

    fn four_groups() -> VariableSchema {
        VariableSchema::new(["M.a", "F.a", "M.b", "F.b", "M.c", "F.c", "M.d", "F.d"]).unwrap()
    }

    fn dist(values: [f64; 4]) -> BTreeMap<String, f64> {
        ["a", "b", "c", "d"].iter().map(|s| s.to_string()).zip(values).collect()
    }

    #[test]
    fn gender_combination() {
        let std = combine_gender_distributions(&dist([1.0; 4]), &dist([1.0; 4]), 0.5, 100_000.0, &four_groups())
            .unwrap();
        assert!(std.entries().values().all(|&v| v == 12_500.0));
        let std = combine_gender_distributions(
            &dist([2.0, 1.0, 1.0, 1.0]),
            &dist([1.0; 4]),
            0.5,
            100_000.0,
            &four_groups(),
        )
        .unwrap();
        let male: Vec<f64> = ["M.a", "M.b", "M.c", "M.d"].iter().map(|v| std.get(v).unwrap()).collect();
        assert_eq!(male, vec![20_000.0, 10_000.0, 10_000.0, 10_000.0]);
        assert!(matches!(
            combine_gender_distributions(&dist([1.0; 4]), &dist([1.0; 4]), 1.0, 1e5, &four_groups()),
            Err(Error::DegenerateShare(_))
        ));
        let mut short = dist([1.0; 4]);
        short.remove("c");
        assert!(matches!(
            combine_gender_distributions(&short, &dist([1.0; 4]), 0.5, 1e5, &four_groups()),
            Err(Error::MissingAgeGroup(_))
        ));
    }

    fn record(country: &str, variable: &str, cause: &str, deaths: f64, population: f64) -> RateRecord {
        RateRecord {
            country: country.into(),
            variable: variable.into(),
            cause_code: cause.into(),
            deaths,
            population,
        }
    }

    fn one_variable() -> (VariableSchema, StandardPopulation2D) {
        let vars = VariableSchema::new(["M.Y20-24"]).unwrap();
        let std = StandardPopulation2D::new([("M.Y20-24".to_string(), 100_000.0)].into()).unwrap();
        (vars, std)
    }

    #[test]
    fn single_cell_arithmetic() {
        let (vars, std) = one_variable();
        let records: Vec<RateRecord> = [("C34", 10.0), ("V89", 20.0), ("X70", 10.0), ("R99", 10.0)]
            .iter()
            .map(|(c, d)| record("AT", "M.Y20-24", c, *d, 100_000.0))
            .collect();
        let ds = build_dataset(&records, &std, &CauseMapping::mortality(), &CategorySchema::mortality(), &vars).unwrap();
        let unit = &ds.units()[0];
        assert_eq!(unit.descriptions()[0].values(), &[0.2, 0.0, 0.0, 0.0, 0.4, 0.2, 0.2]);
        assert_eq!(unit.weights(), &[50.0]);
    }

    #[test]
    fn zero_deaths_give_uniform_and_zero_weight() {
        let (vars, std) = one_variable();
        let records = vec![record("AT", "M.Y20-24", "C34", 0.0, 5_000.0)];
        let ds = build_dataset(&records, &std, &CauseMapping::mortality(), &CategorySchema::mortality(), &vars).unwrap();
        assert_eq!(ds.units()[0].descriptions()[0], Composition::uniform(7));
        assert_eq!(ds.units()[0].weights(), &[0.0]);
    }

    #[test]
    fn build_errors() {
        let (vars, std) = one_variable();
        let cats = CategorySchema::mortality();
        let map = CauseMapping::mortality();
        let conflicting = vec![
            record("AT", "M.Y20-24", "C34", 1.0, 5_000.0),
            record("AT", "M.Y20-24", "V89", 1.0, 6_000.0),
        ];
        assert!(matches!(
            build_dataset(&conflicting, &std, &map, &cats, &vars),
            Err(Error::InconsistentPopulation { .. })
        ));
        let unknown = vec![record("AT", "F.Y20-24", "C34", 1.0, 5_000.0)];
        assert!(matches!(
            build_dataset(&unknown, &std, &map, &cats, &vars),
            Err(Error::UnmappedVariable(_))
        ));
        let zero_pop = vec![record("AT", "M.Y20-24", "C34", 1.0, 0.0)];
        assert!(matches!(
            build_dataset(&zero_pop, &std, &map, &cats, &vars),
            Err(Error::ZeroPopulation(_))
        ));
        let two_vars = VariableSchema::new(["M.Y20-24", "F.Y20-24"]).unwrap();
        let ok = vec![
            record("AT", "M.Y20-24", "C34", 1.0, 5_000.0),
            record("AT", "F.Y20-24", "C34", 1.0, 5_000.0),
        ];
        assert!(matches!(
            build_dataset(&ok, &std, &map, &cats, &two_vars),
            Err(Error::MissingStdEntry(_))
        ));
        assert!(matches!(
            build_dataset(&ok[..1], &std, &map, &cats, &two_vars),
            Err(Error::MissingCell { .. })
        ));
    }
}
