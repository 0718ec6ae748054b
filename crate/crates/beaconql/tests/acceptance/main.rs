//! Acceptance run: one line per criterion with its verdict and runtime.
//! Exits non-zero when any criterion fails.

#[path = "../common/mod.rs"]
mod common;
#[path = "../../../core/tests/support/mod.rs"]
mod support;

use std::cell::Cell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use beaconql::dataset::{load_dataset, load_predictions};
use beaconql::extract::extract;
use beaconql::mocks::shipped_script;
use beaconql_core::canonical::canonical_json;
use beaconql_core::cohort::{RPL10_SITE, SNCA_SITE};
use beaconql_core::draft::{ExtractionDraft, Workflow};
use beaconql_core::eval::{evaluate, rouge1_prf, EvalConfig};
use beaconql_core::guard::{guard_code, guard_script, GuardConfig, Rule, ScriptArtifact, VettedScript};
use beaconql_core::llm::MockProvider;
use beaconql_core::mock_beacon::MockBeacon;
use beaconql_core::model::{BeaconQuery, Chromosome, Filter, Granularity, Scope, VariantParams};
use beaconql_core::payload::build_payload;
use beaconql_core::sql::{parse_select, parse_sql_fields, PredicateClass};
use beaconql_core::template::TemplateRegistry;
use common::interactions::{block_on, checkpoint_and_bearer, ops};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use serde::Deserialize;
use serde_json::{json, Value};

enum Outcome {
    Pass(String),
    Skip(String),
    Fail(String),
}

type Check = Result<String, String>;

type Criterion = (&'static str, u64, Box<dyn Fn() -> Outcome>);

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(message()) }
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(Config { cases, failure_persistence: None, ..Config::default() }, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn golden(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn payload_fidelity() -> Check {
    let mut range = BeaconQuery::new(Scope::GVariants, Granularity::Record);
    range.variant = Some(VariantParams::range(Chromosome::parse("1").unwrap(), 110000, 110100));
    let mut colon = BeaconQuery::new(Scope::GVariants, Granularity::Record);
    colon.variant = Some(VariantParams::gene("%APC%"));
    colon.filters = vec![Filter::new(Some("SNOMED: 36340605".into()), Some("%colon cancer%".into()), None, Scope::GVariants)];
    for (query, name) in [(range, "range_query.json"), (colon, "colon_cancer.json")] {
        let built = canonical_json(&build_payload(&query).map_err(|e| e.to_string())?);
        ensure(built == canonical_json(&golden(name)), || format!("{name}: built {}", String::from_utf8_lossy(&built)))?;
    }
    Ok("2 payloads byte-identical".into())
}

struct Row {
    question: &'static str,
    scope: Scope,
    granularity: Granularity,
    variant: Option<(&'static str, u64, u64)>,
    filters: &'static [(&'static str, Scope)],
}

const TABLE: [Row; 3] = [
    Row {
        question: "Which individuals have been diagnosed with hereditary cancers?",
        scope: Scope::Individuals,
        granularity: Granularity::Record,
        variant: None,
        filters: &[("hereditary cancers", Scope::Individuals)],
    },
    Row {
        question: "What variants are found on chromosome 7 between 500k to 510k?",
        scope: Scope::GVariants,
        granularity: Granularity::Record,
        variant: Some(("7", 500_000, 510_000)),
        filters: &[],
    },
    Row {
        question: "What sequence alterations have been found in the EGFR gene related to cancers?",
        scope: Scope::GVariants,
        granularity: Granularity::Record,
        variant: None,
        filters: &[("EGFR gene", Scope::Individuals)],
    },
];

type Fields = (Scope, Granularity, Option<(String, Vec<u64>, Vec<u64>)>, Vec<(String, Scope)>);

fn table_fields(draft: &ExtractionDraft) -> Fields {
    let variant = draft.variant.value.as_ref().map(|v| {
        let chrom = v.reference_name.as_ref().map_or(String::new(), |c| c.as_str().to_string());
        (chrom, v.start.clone(), v.end.clone())
    });
    let filters = draft.filters.value.iter().map(|f| (f.display_term(), f.scope)).collect();
    (draft.scope.value, draft.granularity.value, variant, filters)
}

fn table_end_to_end() -> Check {
    let provider = MockProvider::new(shipped_script());
    let templates = TemplateRegistry::builtin();
    for workflow in [Workflow::Parallel, Workflow::Multistep] {
        for row in &TABLE {
            let (draft, _) = extract(workflow, row.question, &provider, &templates);
            ensure(draft.validity.yes, || format!("{workflow:?} rejected {:?}", row.question))?;
            let expected = (
                row.scope,
                row.granularity,
                row.variant.map(|(c, s, e)| (c.to_string(), vec![s], vec![e])),
                row.filters.iter().map(|(t, s)| (t.to_string(), *s)).collect::<Vec<_>>(),
            );
            let got = table_fields(&draft);
            ensure(got == expected, || format!("{workflow:?} {:?}: {got:?} != {expected:?}", row.question))?;
        }
    }
    Ok("3 questions x 2 workflows".into())
}

fn parallel_resilience() -> Check {
    common::workflows::parallel_resilience().map(|runs| format!("{runs} runs over 16 failure subsets"))
}

fn multistep_termination() -> Check {
    let faults = common::workflows::multistep_termination()?;
    let questions = common::workflows::usage_ordering()?;
    Ok(format!("{faults} injected faults; parallel >= multistep on {questions} questions"))
}

fn class_name(class: PredicateClass) -> &'static str {
    match class {
        PredicateClass::Variant => "variant",
        PredicateClass::Filter => "filter",
        PredicateClass::Residue => "residue",
    }
}

fn sql_oracle() -> Check {
    use common::sql::{core_shape, load_fixtures, load_reference, reference_shape};
    let fixtures = load_fixtures();
    let reference = load_reference();
    ensure(fixtures.len() == 20 && reference.len() == 20, || format!("{} fixtures, {} reference shapes", fixtures.len(), reference.len()))?;
    for (fixture, recorded) in fixtures.iter().zip(&reference) {
        let name = &fixture.name;
        let fresh = reference_shape(name, &fixture.sql)?;
        ensure(&fresh == recorded, || format!("{name}: recorded reference is stale"))?;
        let stmt = parse_select(&fixture.sql).map_err(|e| format!("{name}: {e}"))?;
        ensure(&core_shape(name, &stmt) == recorded, || format!("{name}: shape differs from the reference parser"))?;
        let x = parse_sql_fields(&fixture.sql, fixture.scope).map_err(|e| format!("{name}: {e}"))?;
        ensure(x.variant == fixture.expected.variant, || format!("{name}: variant {:?}", x.variant))?;
        ensure(x.filters == fixture.expected.filters, || format!("{name}: filters {:?}", x.filters))?;
        ensure(x.residue == fixture.expected.residue, || format!("{name}: residue {:?}", x.residue))?;
        let classes: Vec<&str> = x.predicates.iter().map(|p| class_name(p.class)).collect();
        ensure(classes == fixture.expected.classes, || format!("{name}: classes {classes:?}"))?;
    }
    Ok("20 statements agree with the reference parser and expectations".into())
}

fn rouge_oracle() -> Check {
    let mut runner = runner(500);
    runner
        .run(&(support::phrase(), support::phrase()), |(a, b)| {
            let got = rouge1_prf(&a, &b);
            let (p, r) = support::oracle::rouge1_brute(&a, &b);
            prop_assert_eq!((got.precision, got.recall), (p, r), "{:?} vs {:?}", a, b);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let prf = rouge1_prf("chromosome 7", "on chromosome 7");
    let near = |x: f64, y: f64| (x - y).abs() <= 1e-4;
    ensure(prf.precision == 1.0 && near(prf.recall, 0.6667) && near(prf.f1, 0.8), || format!("derived example gave {prf:?}"))?;
    Ok(format!("500 pairs match brute force; example ({}, {:.4}, {:.4})", prf.precision, prf.recall, prf.f1))
}

fn metrics_fidelity() -> Check {
    let data = |p: &str| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(p);
    let config = EvalConfig::default();
    let dataset = load_dataset(&data("dataset")).map_err(|e| e.to_string())?;
    let (model, preds) = load_predictions(&data("predictions/oracle.jsonl")).map_err(|e| e.to_string())?;
    let report = evaluate(&model, &dataset.cases, &preds, &config).map_err(|e| e.to_string())?;
    for t in &report.tasks {
        ensure((t.precision, t.recall, t.f1) == (1.0, 1.0, 1.0), || format!("oracle {}: {t:?}", t.task))?;
    }
    ensure(report.extraction_accuracy == 1.0, || format!("oracle accuracy {}", report.extraction_accuracy))?;
    let degraded = load_dataset(&data("fixtures/degraded")).map_err(|e| e.to_string())?;
    let (model, preds) = load_predictions(&data("fixtures/degraded/degraded.jsonl")).map_err(|e| e.to_string())?;
    let r = evaluate(&model, &degraded.cases, &preds, &config).map_err(|e| e.to_string())?;
    // 4 of 5 gold terms found, 1 missed, 1 of 5 cases adds an extra term
    let expected = (4.0 / 5.0, 1.0 / 5.0, 1.0 / 5.0);
    let got = (r.extraction_accuracy, r.incompleteness, r.hallucination_rate);
    ensure(got == expected, || format!("degraded {got:?}"))?;
    Ok(format!("oracle all 1.0 over {} tasks; degraded {got:?}", report.tasks.len()))
}

async fn walk_through() -> Check {
    use common::{call, harness, open, tally, BEACON_TOKEN};
    let h = harness();
    let tab = open(&h.app, "t").await;
    let mut ratios = Vec::new();
    let steps = [
        ("Which individuals have Parkinson's disease?", None),
        ("Which of them carry the SNCA variant at position 89704960 on chromosome 4?", Some((14, 10))),
        ("And the RPL10 variant at position 154398005 on chromosome X?", Some((10, 10))),
    ];
    for (question, expected) in steps {
        let card = call(&h.app, "POST", &format!("{tab}/question"), Some("t"), Some(json!({ "question": question }))).await.json();
        ensure(card["kind"] == "card", || format!("{question:?}: {card}"))?;
        let r = call(&h.app, "POST", &format!("{tab}/confirm"), Some(BEACON_TOKEN), None).await;
        ensure(r.status == StatusCode::OK, || format!("{question:?}: confirm {}", r.status))?;
        let Some((xy, xx)) = expected else { continue };
        let counts = tally(&r.json());
        let got = (counts.get("XY").copied().unwrap_or(0), counts.get("XX").copied().unwrap_or(0));
        ensure(got == (xy, xx), || format!("{question:?}: XY:XX {}:{}", got.0, got.1))?;
        ratios.push(format!("{}:{} = {:.1}", got.0, got.1, got.0 as f64 / got.1 as f64));
    }
    let fixture = common::fixture();
    ensure(fixture.carriers_by_sex(SNCA_SITE) == (14, 10), || "fixture SNCA split changed".into())?;
    ensure(fixture.carriers_by_sex(RPL10_SITE) == (10, 10), || "fixture RPL10 split changed".into())?;
    Ok(format!("autosomal {}, X-linked {}", ratios[0], ratios[1]))
}

fn mock_beacon_consistency() -> Check {
    let beacon = MockBeacon::new(common::fixture());
    let ask = |query: &BeaconQuery, granularity: Granularity| {
        let q = BeaconQuery { granularity, ..query.clone() };
        beacon.answer(q.scope, &build_payload(&q).unwrap()).unwrap()
    };
    let nonempty = Cell::new(0);
    let mut runner = runner(200);
    let strategy = support::cohort_query(beacon.fixture());
    runner
        .run(&strategy, |query| {
            let records = ask(&query, Granularity::Record)["records"].as_array().unwrap().len() as u64;
            let count = ask(&query, Granularity::Count)["count"].as_u64().unwrap();
            let exists = ask(&query, Granularity::Boolean)["exists"].as_bool().unwrap();
            prop_assert_eq!(count, records);
            prop_assert_eq!(exists, count > 0);
            nonempty.set(nonempty.get() + usize::from(exists));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("200 queries, {} non-empty", nonempty.get()))
}

#[derive(Deserialize)]
struct Pair {
    rule: Rule,
    reject: String,
    pass: String,
}

fn artifact(code: &str, files: &[String]) -> ScriptArtifact {
    ScriptArtifact { code: code.into(), files: files.to_vec(), assumptions: vec![], feedback: vec![] }
}

async fn guard_suite() -> Check {
    use common::{call, harness, open, BEACON_TOKEN};
    let config = GuardConfig::default();
    let pairs: Vec<Pair> = serde_json::from_value(golden("guard_pairs.json")).map_err(|e| e.to_string())?;
    for rule in [Rule::R1, Rule::R2, Rule::R3, Rule::R4, Rule::R5] {
        ensure(pairs.iter().any(|p| p.rule == rule), || format!("no fixture pair for {rule}"))?;
    }
    for p in &pairs {
        ensure(guard_code(&p.reject, &config).rules().contains(&p.rule), || format!("{}: reject fixture passes", p.rule))?;
        ensure(guard_code(&p.pass, &config).passed(), || format!("{}: pass fixture rejected", p.rule))?;
    }

    let lines: Vec<String> = pairs.iter().flat_map(|p| [p.pass.clone(), p.reject.clone()]).collect();
    let mut runner = runner(256);
    runner
        .run(&proptest::collection::vec(proptest::sample::select(lines), 1..6), |chosen| {
            let code = chosen.concat();
            let report = guard_script(&artifact(&code, &[]), &config);
            match VettedScript::vet(artifact(&code, &[]), &config) {
                Ok(vetted) => {
                    prop_assert!(report.passed());
                    prop_assert_eq!(vetted.code(), code.as_str());
                }
                Err(rejected) => prop_assert_eq!(rejected, report),
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    // edited code at the run step is guarded again before anything executes
    let h = harness();
    let tab = open(&h.app, "t").await;
    call(&h.app, "POST", &format!("{tab}/question"), Some("t"), Some(json!({ "question": "Which individuals have Parkinson's disease?" }))).await;
    call(&h.app, "POST", &format!("{tab}/confirm"), Some(BEACON_TOKEN), None).await;
    let review = call(&h.app, "POST", &format!("{tab}/analysis"), Some("t"), Some(json!({ "request": "Plot a pie chart for karyotypic sex" }))).await;
    ensure(review.json()["guard"]["verdict"] == "pass", || "shipped analysis did not pass the guard".into())?;
    for p in &pairs {
        let r = call(&h.app, "POST", &format!("{tab}/analysis/run"), Some("t"), Some(json!({ "code": p.reject }))).await;
        ensure(r.status == StatusCode::UNPROCESSABLE_ENTITY, || format!("{} edit answered {}", p.rule, r.status))?;
        let view = call(&h.app, "GET", &tab, Some("t"), None).await.json();
        ensure(view["state"] == "awaiting_code_review", || format!("{} edit moved the tab to {}", p.rule, view["state"]))?;
    }
    Ok(format!("{} fixture pairs; 256 vetting cases; {} rejected edits refused at run", pairs.len(), pairs.len()))
}

fn checkpoint_totality() -> Check {
    let executed = Cell::new(0);
    let requests = Cell::new(0);
    let mut runner = runner(100);
    runner
        .run(&ops(2, 1..16), |ops| {
            requests.set(requests.get() + ops.len());
            match block_on(checkpoint_and_bearer(&ops)) {
                Ok(n) => executed.set(executed.get() + n),
                Err(e) => return Err(TestCaseError::fail(e)),
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let (requests, executed) = (requests.get(), executed.get());
    ensure(executed > 0, || "no interaction reached the Beacon".into())?;
    Ok(format!("100 interactions, {requests} requests, {executed} Beacon calls all via confirm"))
}

fn analytics_golden() -> Outcome {
    match common::analytics::interpreter() {
        None => Outcome::Skip("no interpreter with pandas, matplotlib and seaborn".into()),
        Some(config) => match common::analytics::pie_chart_golden(config) {
            Ok(()) => Outcome::Pass("exit 0, one declared PNG, sandbox left no trace".into()),
            Err(e) => Outcome::Fail(e),
        },
    }
}

fn checked(check: Check) -> Outcome {
    match check {
        Ok(detail) => Outcome::Pass(detail),
        Err(e) => Outcome::Fail(e),
    }
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("payload fidelity", 1, Box::new(|| checked(payload_fidelity()))),
        ("example questions end-to-end", 5, Box::new(|| checked(table_end_to_end()))),
        ("parallel resilience", 10, Box::new(|| checked(parallel_resilience()))),
        ("multistep early termination", 10, Box::new(|| checked(multistep_termination()))),
        ("SQL field-parse oracle", 2, Box::new(|| checked(sql_oracle()))),
        ("ROUGE oracle", 5, Box::new(|| checked(rouge_oracle()))),
        ("metrics fidelity", 2, Box::new(|| checked(metrics_fidelity()))),
        ("carrier walk-through", 10, Box::new(|| checked(block_on(walk_through())))),
        ("mock-beacon consistency", 10, Box::new(|| checked(mock_beacon_consistency()))),
        ("guard suite", 5, Box::new(|| checked(block_on(guard_suite())))),
        ("checkpoint and bearer pass-through", 10, Box::new(|| checked(checkpoint_totality()))),
        ("analytics golden", 15, Box::new(analytics_golden)),
    ];
    let mut failed = 0;
    for (name, budget, run) in &criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let message = panic.downcast_ref::<String>().cloned().or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()));
            Outcome::Fail(format!("panicked: {}", message.unwrap_or_default()))
        });
        let elapsed = started.elapsed();
        let outcome = match outcome {
            Outcome::Pass(_) if elapsed > Duration::from_secs(*budget) => Outcome::Fail(format!("over the {budget} s budget")),
            other => other,
        };
        let (verdict, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Skip(d) => ("SKIP", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{verdict} {name} [{:.2} s / {budget} s] {detail}", elapsed.as_secs_f64());
    }
    println!("{} criteria, {failed} failed", criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
