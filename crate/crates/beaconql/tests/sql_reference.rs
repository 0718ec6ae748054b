mod common;

use beaconql_core::sql::{parse_select, parse_sql_fields, PredicateClass};
use common::sql::{core_shape, load_fixtures, load_reference, reference_path, reference_shape, reference_text, Shape, REGENERATE_ENV};

fn class_name(class: PredicateClass) -> &'static str {
    match class {
        PredicateClass::Variant => "variant",
        PredicateClass::Filter => "filter",
        PredicateClass::Residue => "residue",
    }
}

#[test]
fn recorded_reference_is_current() {
    let shapes: Vec<Shape> = load_fixtures()
        .iter()
        .map(|f| reference_shape(&f.name, &f.sql).unwrap_or_else(|e| panic!("{}: {e}", f.name)))
        .collect();
    let text = reference_text(&shapes);
    if std::env::var_os(REGENERATE_ENV).is_some() {
        std::fs::write(reference_path(), &text).unwrap();
    }
    assert_eq!(std::fs::read_to_string(reference_path()).unwrap(), text);
}

#[test]
fn own_parser_matches_reference() {
    let fixtures = load_fixtures();
    let reference = load_reference();
    assert_eq!(fixtures.len(), 20);
    assert_eq!(reference.len(), fixtures.len());
    for (fixture, expected) in fixtures.iter().zip(&reference) {
        let stmt = parse_select(&fixture.sql).unwrap_or_else(|e| panic!("{}: {e}", fixture.name));
        assert_eq!(&core_shape(&fixture.name, &stmt), expected);
    }
}

#[test]
fn fixtures_extract_as_expected() {
    for fixture in load_fixtures() {
        let x = parse_sql_fields(&fixture.sql, fixture.scope).unwrap_or_else(|e| panic!("{}: {e}", fixture.name));
        assert_eq!(x.variant, fixture.expected.variant, "{}", fixture.name);
        assert_eq!(x.filters, fixture.expected.filters, "{}", fixture.name);
        assert_eq!(x.residue, fixture.expected.residue, "{}", fixture.name);
        let classes: Vec<&str> = x.predicates.iter().map(|p| class_name(p.class)).collect();
        assert_eq!(classes, fixture.expected.classes, "{}", fixture.name);
    }
}

#[test]
fn both_parsers_reject_non_selects() {
    for sql in ["DROP TABLE x", "SELECT * FROM T WHERE a = 1 OR b = 2", "SELECT * FROM T WHERE (a = 1"] {
        assert!(parse_select(sql).is_err(), "{sql}");
        assert!(reference_shape("x", sql).is_err(), "{sql}");
    }
}
