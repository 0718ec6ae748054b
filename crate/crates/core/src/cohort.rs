//! Deterministic synthetic cohort served by the mock beacon.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OntologyTerm {
    pub id: String,
    pub label: String,
}

impl OntologyTerm {
    pub fn new(id: &str, label: &str) -> Self {
        OntologyTerm { id: id.into(), label: label.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KaryotypicSex {
    XX,
    XY,
}

impl KaryotypicSex {
    pub fn as_str(self) -> &'static str {
        match self {
            KaryotypicSex::XX => "XX",
            KaryotypicSex::XY => "XY",
        }
    }

    pub fn phenotypic(self) -> OntologyTerm {
        match self {
            KaryotypicSex::XX => OntologyTerm::new("NCIT:C16576", "female"),
            KaryotypicSex::XY => OntologyTerm::new("NCIT:C20197", "male"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Individual {
    pub id: String,
    pub karyotypic_sex: KaryotypicSex,
    pub diseases: Vec<OntologyTerm>,
}

impl Individual {
    pub fn record(&self) -> Value {
        let sex = self.karyotypic_sex.phenotypic();
        json!({
            "id": self.id,
            "sex": { "id": sex.id, "label": sex.label },
            "karyotypic_sex": self.karyotypic_sex.as_str(),
            "diseases": self.diseases.iter().map(|d| json!({ "id": d.id, "label": d.label })).collect::<Vec<_>>(),
        })
    }

    /// Terms a filter may match: diseases and phenotypic sex.
    pub fn terms(&self) -> Vec<OntologyTerm> {
        let mut terms = self.diseases.clone();
        terms.push(self.karyotypic_sex.phenotypic());
        terms
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSite {
    pub site_id: String,
    pub chrom: String,
    pub position: u64,
    pub gene: String,
    pub reference_bases: String,
    pub alternate_bases: String,
    pub carriers: Vec<String>,
}

impl VariantSite {
    pub fn record(&self) -> Value {
        json!({
            "variantInternalId": self.site_id,
            "referenceName": self.chrom,
            "position": self.position,
            "geneId": self.gene,
            "referenceBases": self.reference_bases,
            "alternateBases": self.alternate_bases,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortFixture {
    pub assembly_id: String,
    pub individuals: Vec<Individual>,
    pub variants: Vec<VariantSite>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FixtureError {
    #[error("fixture spec has no individuals")]
    Empty,
    #[error("stratum {0} names unknown site `{1}`")]
    UnknownSite(usize, String),
    #[error("stratum {0} names unknown disease `{1}`")]
    UnknownDisease(usize, String),
    #[error("duplicate site id `{0}`")]
    DuplicateSite(String),
    #[error("site `{0}` has position 0")]
    ZeroPosition(String),
    #[error("carrier `{1}` of site `{0}` is not an individual")]
    UnknownCarrier(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteSpec {
    pub site_id: String,
    pub chrom: String,
    pub position: u64,
    pub gene: String,
    pub reference_bases: String,
    pub alternate_bases: String,
}

/// `count` individuals sharing sex, diseases and carried sites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stratum {
    pub sex: KaryotypicSex,
    pub diseases: Vec<String>,
    pub sites: Vec<String>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub seed: u64,
    pub diseases: Vec<OntologyTerm>,
    pub sites: Vec<SiteSpec>,
    pub strata: Vec<Stratum>,
}

pub const PARKINSON: &str = "SNOMED:49049000";
pub const COLON_CANCER: &str = "SNOMED:363406005";
pub const HYPERTENSION: &str = "SNOMED:38341003";

pub const SNCA_SITE: &str = "rs356181";
pub const RPL10_SITE: &str = "rs28602900";

fn site(site_id: &str, chrom: &str, position: u64, gene: &str, reference: &str, alternate: &str) -> SiteSpec {
    SiteSpec {
        site_id: site_id.into(),
        chrom: chrom.into(),
        position,
        gene: gene.into(),
        reference_bases: reference.into(),
        alternate_bases: alternate.into(),
    }
}

fn stratum(sex: KaryotypicSex, diseases: &[&str], sites: &[&str], count: usize) -> Stratum {
    Stratum {
        sex,
        diseases: diseases.iter().map(|d| (*d).into()).collect(),
        sites: sites.iter().map(|s| (*s).into()).collect(),
        count,
    }
}

impl FixtureSpec {
    /// The shipped cohort: 24 Parkinson's cases, all carrying the chr4 SNCA
    /// site (14 XY, 10 XX), 20 of them also carrying the X-linked RPL10 site
    /// (10 XY, 10 XX), plus 19 other individuals.
    pub fn default_spec() -> Self {
        use KaryotypicSex::{XX, XY};
        FixtureSpec {
            seed: 20_240_917,
            diseases: alloc::vec![
                OntologyTerm::new(PARKINSON, "Parkinson's disease"),
                OntologyTerm::new(COLON_CANCER, "colon cancer"),
                OntologyTerm::new(HYPERTENSION, "hypertension"),
            ],
            sites: alloc::vec![
                site(SNCA_SITE, "4", 89_704_960, "SNCA", "T", "C"),
                site(RPL10_SITE, "X", 154_398_005, "RPL10", "A", "G"),
                site("rs1801155", "5", 112_839_942, "APC", "T", "A"),
                site("var_7_505000", "7", 505_000, "PDGFA", "G", "A"),
                site("var_1_110050", "1", 110_050, "OR4F5", "C", "T"),
            ],
            strata: alloc::vec![
                stratum(XY, &[PARKINSON], &[SNCA_SITE, RPL10_SITE], 10),
                stratum(XY, &[PARKINSON], &[SNCA_SITE], 4),
                stratum(XX, &[PARKINSON], &[SNCA_SITE, RPL10_SITE], 10),
                stratum(XY, &[COLON_CANCER], &["rs1801155", "var_7_505000"], 3),
                stratum(XX, &[COLON_CANCER], &["rs1801155"], 2),
                stratum(XX, &[HYPERTENSION], &["var_1_110050"], 4),
                stratum(XY, &[HYPERTENSION], &["var_7_505000"], 2),
                stratum(XX, &[], &[], 5),
                stratum(XY, &[], &["var_1_110050"], 3),
            ],
        }
    }

    pub fn total(&self) -> usize {
        self.strata.iter().map(|s| s.count).sum()
    }
}

/// Builds the cohort. Individual ids are shuffled across strata with a
/// seeded ChaCha stream, so the same spec always yields the same fixture.
pub fn generate_fixture(spec: &FixtureSpec) -> Result<CohortFixture, FixtureError> {
    let total = spec.total();
    if total == 0 {
        return Err(FixtureError::Empty);
    }
    let mut seen = BTreeSet::new();
    for s in &spec.sites {
        if !seen.insert(s.site_id.clone()) {
            return Err(FixtureError::DuplicateSite(s.site_id.clone()));
        }
        if s.position == 0 {
            return Err(FixtureError::ZeroPosition(s.site_id.clone()));
        }
    }
    for (i, stratum) in spec.strata.iter().enumerate() {
        if let Some(missing) = stratum.sites.iter().find(|id| !seen.contains(*id)) {
            return Err(FixtureError::UnknownSite(i, missing.clone()));
        }
        if let Some(missing) = stratum.diseases.iter().find(|d| !spec.diseases.iter().any(|t| &t.id == *d)) {
            return Err(FixtureError::UnknownDisease(i, missing.clone()));
        }
    }

    let width = format!("{total}").len().max(4);
    let mut ids: Vec<String> = (1..=total).map(|n| format!("ind{n:0width$}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    ids.shuffle(&mut rng);

    let mut individuals = Vec::with_capacity(total);
    let mut carriers: Vec<Vec<String>> = alloc::vec![Vec::new(); spec.sites.len()];
    let mut next = ids.into_iter();
    for stratum in &spec.strata {
        let diseases: Vec<OntologyTerm> = stratum
            .diseases
            .iter()
            .filter_map(|d| spec.diseases.iter().find(|t| &t.id == d).cloned())
            .collect();
        for id in next.by_ref().take(stratum.count) {
            for site_id in &stratum.sites {
                let idx = spec.sites.iter().position(|s| &s.site_id == site_id).expect("validated");
                carriers[idx].push(id.clone());
            }
            individuals.push(Individual { id, karyotypic_sex: stratum.sex, diseases: diseases.clone() });
        }
    }
    individuals.sort_by(|a, b| a.id.cmp(&b.id));
    let variants = spec
        .sites
        .iter()
        .zip(carriers)
        .map(|(s, mut carriers)| {
            carriers.sort();
            VariantSite {
                site_id: s.site_id.clone(),
                chrom: s.chrom.clone(),
                position: s.position,
                gene: s.gene.clone(),
                reference_bases: s.reference_bases.clone(),
                alternate_bases: s.alternate_bases.clone(),
                carriers,
            }
        })
        .collect();
    let fixture = CohortFixture { assembly_id: crate::model::DEFAULT_ASSEMBLY.into(), individuals, variants };
    fixture.check()?;
    Ok(fixture)
}

impl CohortFixture {
    pub fn check(&self) -> Result<(), FixtureError> {
        let ids: BTreeSet<&str> = self.individuals.iter().map(|i| i.id.as_str()).collect();
        let mut sites = BTreeSet::new();
        for v in &self.variants {
            if !sites.insert(v.site_id.as_str()) {
                return Err(FixtureError::DuplicateSite(v.site_id.clone()));
            }
            if v.position == 0 {
                return Err(FixtureError::ZeroPosition(v.site_id.clone()));
            }
            if let Some(c) = v.carriers.iter().find(|c| !ids.contains(c.as_str())) {
                return Err(FixtureError::UnknownCarrier(v.site_id.clone(), c.clone()));
            }
        }
        Ok(())
    }

    pub fn individual(&self, id: &str) -> Option<&Individual> {
        self.individuals.iter().find(|i| i.id == id)
    }

    pub fn site(&self, site_id: &str) -> Option<&VariantSite> {
        self.variants.iter().find(|v| v.site_id == site_id)
    }

    /// Carriers of `site_id` by karyotypic sex, as (XY, XX).
    pub fn carriers_by_sex(&self, site_id: &str) -> (usize, usize) {
        let Some(site) = self.site(site_id) else { return (0, 0) };
        site.carriers.iter().filter_map(|c| self.individual(c)).fold((0, 0), |(xy, xx), i| {
            match i.karyotypic_sex {
                KaryotypicSex::XY => (xy + 1, xx),
                KaryotypicSex::XX => (xy, xx + 1),
            }
        })
    }

    /// Pretty JSON with a trailing newline, the checked-in file format.
    pub fn to_json_text(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("fixture serializes");
        text.push('\n');
        text
    }
}
