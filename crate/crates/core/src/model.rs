//! Typed model of Beacon v2 query requests and responses.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

/// Assembly used when a query does not name one.
pub const DEFAULT_ASSEMBLY: &str = "GRCh38";

/// Entity type a query returns.
///
/// `Unknown` is a pipeline sentinel: extraction may produce it, but a payload
/// never carries it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Individuals,
    Biosamples,
    Runs,
    Analyses,
    Datasets,
    Cohorts,
    GVariants,
    Unknown,
}

impl Scope {
    pub const CONCRETE: [Scope; 7] = [
        Scope::Individuals,
        Scope::Biosamples,
        Scope::Runs,
        Scope::Analyses,
        Scope::Datasets,
        Scope::Cohorts,
        Scope::GVariants,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Individuals => "individuals",
            Scope::Biosamples => "biosamples",
            Scope::Runs => "runs",
            Scope::Analyses => "analyses",
            Scope::Datasets => "datasets",
            Scope::Cohorts => "cohorts",
            Scope::GVariants => "g_variants",
            Scope::Unknown => "unknown",
        }
    }

    pub fn is_concrete(self) -> bool {
        self != Scope::Unknown
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scope {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scope::CONCRETE
            .iter()
            .chain(core::iter::once(&Scope::Unknown))
            .copied()
            .find(|scope| scope.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// Detail level of a Beacon answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Record,
    Count,
    Boolean,
    Unknown,
}

impl Granularity {
    pub const CONCRETE: [Granularity; 3] =
        [Granularity::Record, Granularity::Count, Granularity::Boolean];

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Record => "record",
            Granularity::Count => "count",
            Granularity::Boolean => "boolean",
            Granularity::Unknown => "unknown",
        }
    }

    pub fn is_concrete(self) -> bool {
        self != Granularity::Unknown
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "record" => Ok(Granularity::Record),
            "count" => Ok(Granularity::Count),
            "boolean" => Ok(Granularity::Boolean),
            "unknown" => Ok(Granularity::Unknown),
            other => Err(UnknownLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label `{0}`")]
pub struct UnknownLabel(pub String);

/// Chromosome label normalized to `1`..`22`, `X` or `Y`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Chromosome(String);

impl Chromosome {
    /// Accepts `7`, `chr7`, `CHR07`, `x` and similar spellings.
    pub fn parse(raw: &str) -> Option<Self> {
        let trimmed = raw.trim();
        let body = match trimmed.get(..3) {
            Some(prefix) if trimmed.len() > 3 && prefix.eq_ignore_ascii_case("chr") => &trimmed[3..],
            _ => trimmed,
        };
        if body.eq_ignore_ascii_case("x") {
            return Some(Chromosome("X".into()));
        }
        if body.eq_ignore_ascii_case("y") {
            return Some(Chromosome("Y".into()));
        }
        if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) || body.len() > 3 {
            return None;
        }
        let n: u32 = body.parse().ok()?;
        (1..=22).contains(&n).then(|| Chromosome(n.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Chromosome {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Chromosome {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Chromosome::parse(&raw)
            .ok_or_else(|| serde::de::Error::custom(alloc::format!("invalid chromosome `{raw}`")))
    }
}

/// True when every character belongs to the IUPAC nucleotide alphabet
/// accepted for reference/alternate bases (`^[ACGTUNRYSWKMBDHV\-\.]*$`).
pub fn is_valid_bases(bases: &str) -> bool {
    bases.chars().all(|c| "ACGTUNRYSWKMBDHV-.".contains(c))
}

fn default_assembly() -> String {
    DEFAULT_ASSEMBLY.into()
}

fn default_bases() -> String {
    "N".into()
}

/// Genomic part of a request.
///
/// `start`/`end` hold zero, one or two positions; two positions form a
/// bracket. An empty `start` means the query is not positional (for example a
/// gene-only query).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantParams {
    #[serde(default = "default_assembly")]
    pub assembly_id: String,
    #[serde(default)]
    pub reference_name: Option<Chromosome>,
    #[serde(default)]
    pub start: Vec<u64>,
    #[serde(default)]
    pub end: Vec<u64>,
    #[serde(default = "default_bases")]
    pub reference_bases: String,
    #[serde(default = "default_bases")]
    pub alternate_bases: String,
    #[serde(default)]
    pub gene_id: Option<String>,
}

impl Default for VariantParams {
    fn default() -> Self {
        VariantParams {
            assembly_id: default_assembly(),
            reference_name: None,
            start: Vec::new(),
            end: Vec::new(),
            reference_bases: default_bases(),
            alternate_bases: default_bases(),
            gene_id: None,
        }
    }
}

impl VariantParams {
    /// Point or range query on a chromosome.
    pub fn range(chrom: Chromosome, start: u64, end: u64) -> Self {
        VariantParams {
            reference_name: Some(chrom),
            start: alloc::vec![start],
            end: alloc::vec![end],
            ..VariantParams::default()
        }
    }

    pub fn gene(pattern: impl Into<String>) -> Self {
        VariantParams {
            gene_id: Some(pattern.into()),
            ..VariantParams::default()
        }
    }

    pub fn is_positional(&self) -> bool {
        !self.start.is_empty()
    }

    pub fn validate(&self) -> Result<(), PayloadError> {
        let bad_len = |v: &Vec<u64>| v.len() > 2;
        if bad_len(&self.start) || bad_len(&self.end) {
            return Err(PayloadError::InvalidInterval("start/end hold at most two positions".into()));
        }
        if self.start.is_empty() && !self.end.is_empty() {
            return Err(PayloadError::InvalidInterval("end given without start".into()));
        }
        for bracket in [&self.start, &self.end] {
            if bracket.len() == 2 && bracket[0] > bracket[1] {
                return Err(PayloadError::InvalidInterval("bracket bounds must ascend".into()));
            }
        }
        if let (Some(first), Some(last)) = (self.start.first(), self.end.last()) {
            if first > last {
                return Err(PayloadError::InvalidInterval(alloc::format!(
                    "start {first} is after end {last}"
                )));
            }
        }
        for (name, bases) in [
            ("referenceBases", &self.reference_bases),
            ("alternateBases", &self.alternate_bases),
        ] {
            if !is_valid_bases(bases) {
                return Err(PayloadError::InvalidBases { field: name, value: bases.clone() });
            }
        }
        Ok(())
    }

    /// Inclusive genomic window `[start[0], end[last]]` the query covers.
    pub fn window(&self) -> Option<(u64, u64)> {
        let lo = *self.start.first()?;
        let hi = match (self.end.last(), self.start.get(1)) {
            (Some(&e), _) => e,
            (None, Some(&s)) => s,
            (None, None) => lo,
        };
        Some((lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterType {
    Ontology,
    Alphanumeric,
    Custom,
}

/// `PREFIX:code` or `PREFIX: code`, e.g. `SNOMED: 36340605` or `HP:0004789`.
pub fn is_ontology_code(id: &str) -> bool {
    let Some((prefix, code)) = id.split_once(':') else {
        return false;
    };
    let code = code.strip_prefix(' ').unwrap_or(code);
    let mut prefix_chars = prefix.chars();
    let prefix_ok = prefix_chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && prefix_chars.all(|c| c.is_ascii_alphanumeric() || "_.-".contains(c));
    let code_ok = !code.is_empty() && code.chars().all(|c| c.is_ascii_alphanumeric() || "_.-".contains(c));
    prefix_ok && code_ok
}

/// A phenotypic or ontology condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filter {
    pub filter_type: FilterType,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub value: Option<String>,
    #[serde(default)]
    pub term: Option<String>,
    pub scope: Scope,
}

fn non_empty(s: Option<String>) -> Option<String> {
    s.filter(|s| !s.is_empty())
}

impl Filter {
    /// Builds a filter, inferring its type from the id/value shape.
    pub fn new(id: Option<String>, value: Option<String>, term: Option<String>, scope: Scope) -> Self {
        let (id, value, term) = (non_empty(id), non_empty(value), non_empty(term));
        let filter_type = Filter::infer_type(id.as_deref(), value.as_deref());
        Filter { filter_type, id, value, term, scope }
    }

    pub fn term(term: impl Into<String>, scope: Scope) -> Self {
        Filter::new(None, None, Some(term.into()), scope)
    }

    pub fn infer_type(id: Option<&str>, value: Option<&str>) -> FilterType {
        if id.is_some_and(is_ontology_code) {
            FilterType::Ontology
        } else if value.is_some_and(|v| v.contains('%')) {
            FilterType::Alphanumeric
        } else {
            FilterType::Custom
        }
    }

    /// An ontology condition whose code has not been chosen yet.
    pub fn is_ontology_pending(&self) -> bool {
        self.filter_type == FilterType::Ontology && self.id.is_none()
    }

    pub fn validate(&self) -> Result<(), PayloadError> {
        let empty = |s: &Option<String>| s.as_deref().is_none_or(str::is_empty);
        if empty(&self.id) && empty(&self.value) && empty(&self.term) {
            return Err(PayloadError::InvalidFilter("filter needs an id, value or term".into()));
        }
        if !self.scope.is_concrete() {
            return Err(PayloadError::InvalidFilter("filter scope is unknown".into()));
        }
        Ok(())
    }

    /// Human-readable phrase: the term, else the value without `%`, else the id.
    pub fn display_term(&self) -> String {
        if let Some(term) = &self.term {
            return term.clone();
        }
        if let Some(value) = &self.value {
            return value.trim_matches('%').to_string();
        }
        self.id.clone().unwrap_or_default()
    }

    /// What survives a trip through the wire format: the term only travels
    /// when nothing else identifies the filter, in which case it becomes the id.
    pub fn wire_normalized(&self) -> Filter {
        let (id, value) = match (&self.id, &self.value) {
            (None, None) => (self.term.clone(), None),
            (id, value) => (id.clone(), value.clone()),
        };
        Filter::new(id, value, None, self.scope)
    }
}

/// Fully specified Beacon v2 request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeaconQuery {
    pub scope: Scope,
    pub granularity: Granularity,
    #[serde(default)]
    pub variant: Option<VariantParams>,
    #[serde(default)]
    pub filters: Vec<Filter>,
}

impl BeaconQuery {
    pub fn new(scope: Scope, granularity: Granularity) -> Self {
        BeaconQuery { scope, granularity, variant: None, filters: Vec::new() }
    }

    pub fn wire_normalized(&self) -> BeaconQuery {
        BeaconQuery {
            filters: self.filters.iter().map(Filter::wire_normalized).collect(),
            ..self.clone()
        }
    }
}

/// Answer to a query at the requested granularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeaconResponse {
    pub granularity: Granularity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exists: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<Value>>,
}

impl BeaconResponse {
    pub fn boolean(exists: bool) -> Self {
        BeaconResponse { granularity: Granularity::Boolean, exists: Some(exists), count: None, records: None }
    }

    pub fn count(count: u64) -> Self {
        BeaconResponse { granularity: Granularity::Count, exists: None, count: Some(count), records: None }
    }

    pub fn records(records: Vec<Value>) -> Self {
        BeaconResponse { granularity: Granularity::Record, exists: None, count: None, records: Some(records) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PayloadError {
    #[error("query scope is missing or unknown")]
    MissingScope,
    #[error("requested granularity is missing or unknown")]
    MissingGranularity,
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("invalid {field} `{value}`")]
    InvalidBases { field: &'static str, value: String },
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("response does not match requested granularity: {0}")]
    ShapeMismatch(String),
}
