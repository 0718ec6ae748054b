use beaconql_core::model::Scope;
use beaconql_core::sql::{parse_select, parse_sql_fields, PredicateClass};
use proptest::prelude::*;

fn column() -> impl Strategy<Value = &'static str> {
    proptest::sample::select(vec![
        "chr", "T.chr", "start", "T.start", "end", "T.end", "assemblyId", "geneId", "referenceBases", "alternateBases",
        "O.label", "O.id", "age", "name", "T.variantType",
    ])
}

fn literal() -> impl Strategy<Value = String> {
    prop_oneof![
        (0u64..2_000_000).prop_map(|n| n.to_string()),
        proptest::sample::select(vec!["'7'", "'X'", "'chr3'", "'25'", "'hg19'", "'GRCh38'", "'A'", "'ACGT'", "'Z'", "'EGFR'", "'asthma'", "'NCIT:C16576'", "''", "'it''s'"])
            .prop_map(str::to_string),
    ]
}

fn predicate() -> impl Strategy<Value = String> {
    (column(), 0usize..9, literal(), literal(), "[a-z ]{0,8}").prop_map(|(col, form, a, b, word)| match form {
        0 => format!("{col} = {a}"),
        1 => format!("{col} >= {a}"),
        2 => format!("{col} <= {a}"),
        3 => format!("{col} > {a}"),
        4 => format!("{col} < {a}"),
        5 => format!("{col} LIKE '%{word}%'"),
        6 => format!("{col} BETWEEN {a} AND {b}"),
        7 => format!("{col} IS NULL"),
        _ => format!("{a} <= {col}"),
    })
}

fn statement() -> impl Strategy<Value = (String, usize)> {
    (proptest::collection::vec(predicate(), 1..7), any::<bool>()).prop_map(|(preds, join)| {
        let from = if join { "GenomicVariations T JOIN OntologyTerm O ON T.variantLevelData = O.id" } else { "GenomicVariations T" };
        (format!("SELECT * FROM {from} WHERE {}", preds.join(" AND ")), preds.len())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn every_predicate_lands_in_exactly_one_class((sql, n) in statement()) {
        let x = parse_sql_fields(&sql, Scope::GVariants).unwrap();
        prop_assert_eq!(x.predicates.len(), n);
        prop_assert_eq!(parse_select(&sql).unwrap().predicates.len(), n);
        let count = |class| x.predicates.iter().filter(|p| p.class == class).count();
        let (variant, filter, residue) = (count(PredicateClass::Variant), count(PredicateClass::Filter), count(PredicateClass::Residue));
        prop_assert_eq!(variant + filter + residue, n);
        prop_assert_eq!(filter, x.filters.len());
        let residue_texts: Vec<&String> =
            x.predicates.iter().filter(|p| p.class == PredicateClass::Residue).map(|p| &p.text).collect();
        prop_assert_eq!(x.residue.iter().collect::<Vec<_>>(), residue_texts);
        prop_assert_eq!(variant > 0, x.variant.is_some());
        if let Some(v) = &x.variant {
            prop_assert!(v.validate().is_ok());
        }
    }

    #[test]
    fn disjunctions_are_rejected((sql, _) in statement(), extra in predicate()) {
        let with_or = format!("{sql} OR {extra}");
        prop_assert!(parse_sql_fields(&with_or, Scope::GVariants).is_err());
    }
}
