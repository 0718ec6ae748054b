//! Generators shared by the property tests.
#![allow(dead_code)]

pub mod oracle;

use beaconql_core::model::{BeaconQuery, Chromosome, Filter, Granularity, Scope, VariantParams};
use proptest::prelude::*;

pub const CONCRETE_SCOPES: [Scope; 7] = [
    Scope::Individuals,
    Scope::Biosamples,
    Scope::Runs,
    Scope::Analyses,
    Scope::Datasets,
    Scope::Cohorts,
    Scope::GVariants,
];

pub fn scope() -> impl Strategy<Value = Scope> {
    proptest::sample::select(CONCRETE_SCOPES.to_vec())
}

pub fn granularity() -> impl Strategy<Value = Granularity> {
    proptest::sample::select(vec![Granularity::Record, Granularity::Count, Granularity::Boolean])
}

pub fn chromosome() -> impl Strategy<Value = Chromosome> {
    prop_oneof![
        (1u32..=22).prop_map(|n| n.to_string()),
        Just("X".to_string()),
        Just("Y".to_string()),
    ]
    .prop_map(|s| Chromosome::parse(&s).unwrap())
}

fn bases() -> impl Strategy<Value = String> {
    prop_oneof![Just("N".to_string()), "[ACGT]{1,4}"]
}

/// Positions satisfying the interval rules.
fn positions() -> impl Strategy<Value = (Vec<u64>, Vec<u64>)> {
    (0u64..1_000_000_000, 0u64..5_000, 0u64..5_000, 0u64..5_000, 0usize..2, 0usize..3).prop_map(
        |(s1, ds, de1, de2, n_start, n_end)| {
            let start = if n_start == 0 { vec![s1] } else { vec![s1, s1 + ds] };
            let e1 = s1 + de1;
            let end = match n_end {
                0 => vec![],
                1 => vec![e1],
                _ => vec![e1, e1 + de2],
            };
            (start, end)
        },
    )
}

pub fn variant() -> impl Strategy<Value = VariantParams> {
    (
        proptest::sample::select(vec!["GRCh38", "GRCh37"]),
        proptest::option::of(chromosome()),
        proptest::option::of(positions()),
        bases(),
        bases(),
        proptest::option::of(proptest::sample::select(vec!["%APC%", "EGFR", "BRCA1", "%SNCA%"])),
    )
        .prop_map(|(assembly, chrom, pos, rb, ab, gene)| {
            let (start, end) = pos.unwrap_or_default();
            VariantParams {
                assembly_id: assembly.into(),
                reference_name: chrom,
                start,
                end,
                reference_bases: rb,
                alternate_bases: ab,
                gene_id: gene.map(str::to_string),
            }
        })
}

pub fn filter() -> impl Strategy<Value = Filter> {
    let id = proptest::option::of(prop_oneof![
        Just("SNOMED: 36340605".to_string()),
        Just("HP:0004789".to_string()),
        Just("NCIT:C16576".to_string()),
        "[a-z]{3,10}",
    ]);
    let value = proptest::option::of(prop_oneof!["%[a-z ]{2,12}%", "[a-z]{2,8}"]);
    let term = proptest::option::of("[a-z][a-z ]{1,15}");
    (id, value, term, scope())
        .prop_filter("filter needs something to match", |(i, v, t, _)| i.is_some() || v.is_some() || t.is_some())
        .prop_map(|(i, v, t, s)| Filter::new(i, v, t, s))
}

pub fn query() -> impl Strategy<Value = BeaconQuery> {
    (scope(), granularity(), proptest::option::of(variant()), proptest::collection::vec(filter(), 0..4)).prop_map(
        |(scope, granularity, variant, filters)| BeaconQuery { scope, granularity, variant, filters },
    )
}

/// Queries aimed at a cohort: windows around its sites, its genes and its
/// ontology terms, mixed with values that match nothing.
pub fn cohort_query(fixture: &beaconql_core::cohort::CohortFixture) -> impl Strategy<Value = BeaconQuery> {
    let sites: Vec<(String, u64, String)> =
        fixture.variants.iter().map(|s| (s.chrom.clone(), s.position, s.gene.clone())).collect();
    let mut terms: Vec<(String, String)> = Vec::new();
    for individual in &fixture.individuals {
        for t in individual.terms() {
            if !terms.iter().any(|(id, _)| *id == t.id) {
                terms.push((t.id.clone(), t.label.clone()));
            }
        }
    }
    terms.push(("UBERON:0000178".into(), "blood".into()));

    let variant = (proptest::sample::select(sites), 0usize..5, 0u64..2_000, 0u64..2_000, any::<bool>()).prop_map(
        |((chrom, pos, gene), form, before, after, upper)| {
            let chrom = Chromosome::parse(&chrom).unwrap();
            match form {
                0 => VariantParams::range(chrom, pos.saturating_sub(before), pos + after),
                1 => VariantParams { start: vec![pos + 1 + before], end: vec![], ..VariantParams::range(chrom, 0, 0) },
                2 => VariantParams::gene(if upper { gene } else { format!("%{}%", &gene[..2]) }),
                3 => VariantParams { reference_name: Some(chrom), ..VariantParams::default() },
                _ => VariantParams { assembly_id: "GRCh37".into(), ..VariantParams::range(chrom, pos, pos) },
            }
        },
    );
    let filter = (proptest::sample::select(terms), 0usize..5, scope()).prop_map(|((id, label), form, scope)| {
        let scope = if scope == Scope::Biosamples { Scope::Biosamples } else { Scope::Individuals };
        match form {
            0 => Filter::new(Some(id), None, None, scope),
            1 => Filter::new(Some(label), None, None, scope),
            2 => Filter::new(None, Some(format!("%{}%", &label[..label.len().min(4)])), None, scope),
            3 => Filter::new(Some(label.to_uppercase()), None, None, scope),
            _ => Filter::new(Some("HP:9999999".into()), None, None, scope),
        }
    });
    let scope = proptest::sample::select(vec![Scope::Individuals, Scope::Biosamples, Scope::GVariants, Scope::Runs]);
    (scope, granularity(), proptest::option::of(variant), proptest::collection::vec(filter, 0..3))
        .prop_map(|(scope, granularity, variant, filters)| BeaconQuery { scope, granularity, variant, filters })
}

/// Short word sequences with mixed separators, case and non-ASCII words.
pub fn phrase() -> impl Strategy<Value = String> {
    let word = prop_oneof![
        4 => proptest::sample::select(vec![
            "colon", "cancer", "Cancer", "chromosome", "7", "on", "the", "EGFR", "gene", "asthma", "of", "Ünïcode", "ß",
        ])
        .prop_map(str::to_string),
        1 => "[a-zA-Z0-9]{1,5}",
    ];
    let sep = proptest::sample::select(vec![" ", "  ", "-", ", ", "_", "/", "\t", "."]);
    proptest::collection::vec((word, sep), 0..7).prop_map(|parts| parts.into_iter().map(|(w, s)| format!("{w}{s}")).collect())
}
