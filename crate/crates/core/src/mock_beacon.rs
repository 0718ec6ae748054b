//! Query semantics of the in-memory beacon.
//!
//! Filters are conjunctive. Within one filter every present criterion must
//! hold for some annotation term: an ontology-shaped `id` matches codes
//! exactly, any other `id` or `term` matches labels by case-insensitive
//! substring, and a `value` containing `%` is an SQL `LIKE` pattern. A
//! variant matches when its position lies in `[start[0], end[last]]`.

use alloc::string::String;
use alloc::vec::Vec;

use serde_json::{json, Value};

use crate::cohort::{CohortFixture, Individual, OntologyTerm, VariantSite};
use crate::model::{is_ontology_code, BeaconQuery, BeaconResponse, Filter, Granularity, PayloadError, Scope, VariantParams};
use crate::payload::parse_payload;

pub const BLOOD: (&str, &str) = ("UBERON:0000178", "blood");

/// Case-insensitive SQL `LIKE` where `%` matches any run of characters.
pub fn like(pattern: &str, text: &str) -> bool {
    let pattern: Vec<char> = pattern.chars().flat_map(char::to_lowercase).collect();
    let text: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    // classic wildcard matcher with single-star backtracking
    let (mut p, mut t) = (0usize, 0usize);
    let mut star: Option<(usize, usize)> = None;
    while t < text.len() {
        if p < pattern.len() && pattern[p] != '%' && pattern[p] == text[t] {
            p += 1;
            t += 1;
        } else if p < pattern.len() && pattern[p] == '%' {
            star = Some((p, t));
            p += 1;
        } else if let Some((sp, st)) = star {
            p = sp + 1;
            t = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    pattern[p..].iter().all(|c| *c == '%')
}

fn contains_ci(haystack: &str, needle: &str) -> bool {
    haystack.to_lowercase().contains(&needle.to_lowercase())
}

fn code_key(code: &str) -> String {
    code.chars().filter(|c| !c.is_whitespace()).flat_map(char::to_uppercase).collect()
}

pub fn filter_matches(filter: &Filter, terms: &[OntologyTerm]) -> bool {
    let id_ok = filter.id.as_deref().is_none_or(|id| {
        if is_ontology_code(id) {
            terms.iter().any(|t| code_key(&t.id) == code_key(id))
        } else {
            terms.iter().any(|t| contains_ci(&t.label, id))
        }
    });
    let value_ok = filter.value.as_deref().is_none_or(|v| {
        terms.iter().any(|t| if v.contains('%') { like(v, &t.label) } else { contains_ci(&t.label, v) })
    });
    let term_ok = filter.term.as_deref().is_none_or(|term| terms.iter().any(|t| contains_ci(&t.label, term)));
    id_ok && value_ok && term_ok
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BeaconError {
    #[error("bad request: {0}")]
    BadRequest(#[from] PayloadError),
}

impl BeaconError {
    pub fn status(&self) -> u16 {
        400
    }
}

#[derive(Debug, Clone)]
pub struct MockBeacon {
    fixture: CohortFixture,
}

impl MockBeacon {
    pub fn new(fixture: CohortFixture) -> Self {
        MockBeacon { fixture }
    }

    pub fn fixture(&self) -> &CohortFixture {
        &self.fixture
    }

    fn site_matches(&self, params: &VariantParams, site: &VariantSite) -> bool {
        if !params.assembly_id.eq_ignore_ascii_case(&self.fixture.assembly_id) {
            return false;
        }
        if params.reference_name.as_ref().is_some_and(|c| c.as_str() != site.chrom) {
            return false;
        }
        if let Some((lo, hi)) = params.window() {
            if site.position < lo || site.position > hi {
                return false;
            }
        }
        if let Some(gene) = &params.gene_id {
            let ok = if gene.contains('%') { like(gene, &site.gene) } else { gene.eq_ignore_ascii_case(&site.gene) };
            if !ok {
                return false;
            }
        }
        let bases_ok = |wanted: &str, have: &str| wanted == "N" || wanted == have;
        bases_ok(&params.reference_bases, &site.reference_bases) && bases_ok(&params.alternate_bases, &site.alternate_bases)
    }

    fn matching_sites<'a>(&'a self, params: Option<&'a VariantParams>) -> impl Iterator<Item = &'a VariantSite> + 'a {
        self.fixture
            .variants
            .iter()
            .filter(move |site| params.is_none_or(|p| self.site_matches(p, site)))
    }

    fn carries(&self, individual: &Individual, params: Option<&VariantParams>) -> bool {
        params.is_none() || self.matching_sites(params).any(|s| s.carriers.contains(&individual.id))
    }

    fn passes(filters: &[Filter], terms: &[OntologyTerm]) -> bool {
        filters.iter().all(|f| filter_matches(f, terms))
    }

    /// Every record matching `query`, regardless of its granularity.
    pub fn matching_records(&self, query: &BeaconQuery) -> Vec<Value> {
        let params = query.variant.as_ref();
        match query.scope {
            Scope::Individuals => self
                .fixture
                .individuals
                .iter()
                .filter(|i| self.carries(i, params) && Self::passes(&query.filters, &i.terms()))
                .map(Individual::record)
                .collect(),
            Scope::Biosamples => self
                .fixture
                .individuals
                .iter()
                .filter(|i| {
                    let mut terms = i.terms();
                    terms.push(OntologyTerm::new(BLOOD.0, BLOOD.1));
                    self.carries(i, params) && Self::passes(&query.filters, &terms)
                })
                .map(biosample_record)
                .collect(),
            Scope::GVariants => self
                .matching_sites(params)
                .filter(|site| {
                    query.filters.is_empty()
                        || site.carriers.iter().filter_map(|c| self.fixture.individual(c)).any(|i| Self::passes(&query.filters, &i.terms()))
                })
                .map(VariantSite::record)
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn answer_query(&self, query: &BeaconQuery) -> BeaconResponse {
        let records = self.matching_records(query);
        match query.granularity {
            Granularity::Boolean => BeaconResponse::boolean(!records.is_empty()),
            Granularity::Count => BeaconResponse::count(records.len() as u64),
            _ => BeaconResponse::records(records),
        }
    }

    /// Answers a request body posted to the `scope` endpoint.
    pub fn answer(&self, scope: Scope, payload: &Value) -> Result<Value, BeaconError> {
        let query = parse_payload(scope, payload)?;
        let response = self.answer_query(&query);
        Ok(match query.granularity {
            Granularity::Boolean => json!({ "exists": response.exists }),
            Granularity::Count => json!({ "count": response.count }),
            _ => json!({ "records": response.records }),
        })
    }
}

pub fn biosample_record(individual: &Individual) -> Value {
    let suffix = individual.id.trim_start_matches("ind");
    json!({
        "id": alloc::format!("bio{suffix}"),
        "individual_id": individual.id,
        "sample_origin": { "id": BLOOD.0, "label": BLOOD.1 },
    })
}
