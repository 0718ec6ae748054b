//! The shipped rule-based mock script and builders for aligned scripts.
//!
//! Every rule pairs a template anchor (a phrase only that template contains)
//! with the question text, so one script serves both workflows.

use beaconql_core::eval::{EvalCase, Gold};
use beaconql_core::llm::{FailureReason, MockReply, MockRule, MockScript};
use beaconql_core::model::{Granularity, Scope};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Prompt steps that can be told apart by their template text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Validator,
    Scope,
    Granularity,
    Variants,
    Filters,
    MultistepScope,
    MultistepGranularity,
    Text2Sql,
    Codegen,
}

impl Step {
    pub const PARALLEL: [Step; 5] = [Step::Validator, Step::Scope, Step::Granularity, Step::Variants, Step::Filters];
    pub const EXTRACTORS: [Step; 4] = [Step::Scope, Step::Granularity, Step::Variants, Step::Filters];
    pub const MULTISTEP: [Step; 3] = [Step::MultistepScope, Step::MultistepGranularity, Step::Text2Sql];

    pub fn anchor(self) -> &'static str {
        match self {
            Step::Validator => "You are a query builder for GA4GH Beacon V2",
            Step::Scope => "SCOPE MUST BE ONE OF",
            Step::Granularity => "CANDIDATE GRANULARITIES",
            Step::Variants => "extract the assembly, chromosome, start base and end base",
            Step::Filters => "Ignore anything that corresponds to a genomic variant",
            Step::MultistepScope => "Classify the above user query into one of the below scopes",
            Step::MultistepGranularity => "Classify the above user query into one of the below categories",
            Step::Text2Sql => "Based on the schema create an SQL statement",
            Step::Codegen => "You must create a python code",
        }
    }

    /// Override that makes this step fail for every question.
    pub fn failing(self, reason: FailureReason) -> MockRule {
        MockRule::fail(&[self.anchor()], reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedTerm {
    pub term: String,
    pub scope: Scope,
}

/// Variant extractor answer; positions stay raw JSON so shorthand such as
/// `"500k"` reaches the decoder untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedVariant {
    #[serde(default)]
    pub assembly_id: Option<String>,
    #[serde(default)]
    pub chromosome: Option<String>,
    #[serde(default)]
    pub start: Option<Value>,
    #[serde(default)]
    pub end: Option<Value>,
    #[serde(default)]
    pub gene_id: Option<String>,
}

fn yes() -> bool {
    true
}

/// What a well-behaved model answers for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedQuestion {
    pub question: String,
    #[serde(default = "yes")]
    pub valid: bool,
    #[serde(default)]
    pub reason: Option<String>,
    pub scope: Scope,
    pub granularity: Granularity,
    #[serde(default)]
    pub variant: Option<ScriptedVariant>,
    #[serde(default)]
    pub filters: Vec<ScriptedTerm>,
    /// Text-to-SQL answer; derived from the other fields when absent.
    #[serde(default)]
    pub sql: Option<String>,
}

fn unknown_or(value: Option<Value>) -> Value {
    value.unwrap_or_else(|| json!("unknown"))
}

fn entity_table(scope: Scope) -> Option<&'static str> {
    match scope {
        Scope::GVariants => Some("GenomicVariations"),
        Scope::Individuals => Some("Individuals"),
        Scope::Biosamples => Some("Biosamples"),
        _ => None,
    }
}

fn ontology_link(scope: Scope) -> &'static str {
    match scope {
        Scope::Individuals => "diseases",
        Scope::Biosamples => "sampleOriginType",
        _ => "variantLevelData",
    }
}

fn sql_literal(text: &str) -> String {
    format!("'{}'", text.replace('\'', "''"))
}

fn sql_position(value: &Value) -> Vec<String> {
    let one = |v: &Value| match v {
        Value::String(s) => beaconql_core::decode::parse_position(s).map(|p| p.to_string()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    };
    match value {
        Value::Array(items) => items.iter().filter_map(one).collect(),
        other => one(other).into_iter().collect(),
    }
}

impl ScriptedQuestion {
    fn validity_reply(&self) -> String {
        let reason = self.reason.clone().unwrap_or_else(|| {
            if self.valid { "asks for Beacon data".into() } else { "not related to genomic or phenotypic data".into() }
        });
        json!({ "yes": self.valid, "reason": reason }).to_string()
    }

    fn variants_reply(&self) -> String {
        match &self.variant {
            Some(v) if v.chromosome.is_some() || v.start.is_some() => json!({
                "success": true,
                "assembly_id": unknown_or(v.assembly_id.clone().map(Value::from)),
                "chromosome": unknown_or(v.chromosome.clone().map(Value::from)),
                "start": unknown_or(v.start.clone()),
                "end": unknown_or(v.end.clone()),
            })
            .to_string(),
            _ => json!({
                "success": false,
                "assembly_id": "unknown",
                "chromosome": "unknown",
                "start": "unknown",
                "end": "unknown",
            })
            .to_string(),
        }
    }

    fn filters_reply(&self) -> String {
        let filters: Vec<Value> = self.filters.iter().map(|f| json!({ "term": f.term, "scope": f.scope })).collect();
        json!({ "filters": filters }).to_string()
    }

    /// The SQL a schema-following model would write for these fields.
    pub fn derived_sql(&self) -> String {
        let Some(table) = entity_table(self.scope) else {
            return "SELECT * FROM Runs".into();
        };
        let mut joins = String::new();
        let mut conditions = Vec::new();
        if let Some(v) = &self.variant {
            if let Some(chrom) = &v.chromosome {
                conditions.push(format!("T.chr = {}", sql_literal(chrom)));
            }
            if let Some(assembly) = &v.assembly_id {
                conditions.push(format!("T.assemblyId = {}", sql_literal(assembly)));
            }
            let start = v.start.as_ref().map(sql_position).unwrap_or_default();
            let end = v.end.as_ref().map(sql_position).unwrap_or_default();
            match start.as_slice() {
                [a] => conditions.push(format!("T.start >= {a}")),
                [a, b] => conditions.push(format!("T.start BETWEEN {a} AND {b}")),
                _ => {}
            }
            match end.as_slice() {
                [b] => conditions.push(format!("T.end <= {b}")),
                [a, b] => conditions.push(format!("T.end BETWEEN {a} AND {b}")),
                _ => {}
            }
            if let Some(gene) = &v.gene_id {
                conditions.push(format!("T.geneId LIKE {}", sql_literal(&format!("%{gene}%"))));
            }
        }
        let mut joined: Vec<Scope> = Vec::new();
        for f in &self.filters {
            if !joined.contains(&f.scope) {
                joined.push(f.scope);
                let k = joined.len();
                match entity_table(f.scope).filter(|_| f.scope != self.scope) {
                    Some(entity) => joins.push_str(&format!(
                        " JOIN {entity} E{k} ON T.individualId = E{k}.id JOIN OntologyTerm O{k} ON E{k}.{} = O{k}.id",
                        ontology_link(f.scope)
                    )),
                    None => joins.push_str(&format!(" JOIN OntologyTerm O{k} ON T.{} = O{k}.id", ontology_link(self.scope))),
                }
            }
            let k = joined.iter().position(|s| *s == f.scope).unwrap() + 1;
            conditions.push(format!("O{k}.label LIKE {}", sql_literal(&format!("%{}%", f.term))));
        }
        let mut sql = format!("SELECT * FROM {table} T{joins}");
        if !conditions.is_empty() {
            sql.push_str(" WHERE ");
            sql.push_str(&conditions.join(" AND "));
        }
        sql.push(';');
        sql
    }

    /// One rule per prompt step, keyed on the question as a whole line.
    pub fn rules(&self) -> Vec<MockRule> {
        let line = format!("\n{}\n", self.question);
        let reply = |step: Step, text: String| MockRule::text(&[step.anchor(), line.as_str()], text);
        vec![
            reply(Step::Validator, self.validity_reply()),
            reply(Step::Scope, json!({ "scope": self.scope }).to_string()),
            reply(Step::Granularity, json!({ "granularity": self.granularity }).to_string()),
            reply(Step::Variants, self.variants_reply()),
            reply(Step::Filters, self.filters_reply()),
            reply(Step::MultistepScope, self.scope.as_str().to_string()),
            reply(Step::MultistepGranularity, self.granularity.as_str().to_string()),
            reply(Step::Text2Sql, self.sql.clone().unwrap_or_else(|| self.derived_sql())),
        ]
    }

    /// Script answers matching a labelled case, as an ideal model would.
    pub fn aligned(case: &EvalCase) -> ScriptedQuestion {
        let mut scripted = ScriptedQuestion {
            question: case.question.clone(),
            valid: true,
            reason: None,
            scope: Scope::Individuals,
            granularity: Granularity::Record,
            variant: None,
            filters: Vec::new(),
            sql: None,
        };
        match &case.gold {
            Gold::Scope(scope) => scripted.scope = *scope,
            Gold::Granularity(g) => scripted.granularity = *g,
            Gold::Variants(v) => {
                scripted.scope = Scope::GVariants;
                scripted.variant = Some(ScriptedVariant {
                    assembly_id: None,
                    chromosome: v.chrom.as_ref().map(|c| c.as_str().to_string()),
                    start: (!v.start.is_empty()).then(|| json!(v.start)),
                    end: (!v.end.is_empty()).then(|| json!(v.end)),
                    gene_id: None,
                });
            }
            Gold::Filters(terms) => {
                scripted.filters = terms.iter().map(|t| ScriptedTerm { term: t.term.clone(), scope: t.scope }).collect();
            }
            Gold::Invalid => {
                scripted.valid = false;
                scripted.scope = Scope::Unknown;
                scripted.granularity = Granularity::Unknown;
            }
        }
        scripted
    }
}

/// Canned analytics answer for requests containing `needle`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedCodegen {
    pub needle: String,
    pub code: String,
    pub files: Vec<String>,
    #[serde(default)]
    pub assumptions: Vec<String>,
    #[serde(default)]
    pub feedback: Vec<String>,
}

impl ScriptedCodegen {
    pub fn rule(&self) -> MockRule {
        let reply = json!({
            "code": self.code,
            "files": self.files,
            "assumptions": self.assumptions,
            "feedback": self.feedback,
        });
        MockRule::text(&[Step::Codegen.anchor(), self.needle.as_str()], reply.to_string())
    }
}

/// Answers for prompts no rule covers: refuse, or report unknown.
pub fn fallback_rules() -> Vec<MockRule> {
    vec![
        MockRule::text(&[Step::Validator.anchor()], r#"{"yes": false, "reason": "not related to genomic or phenotypic data"}"#),
        MockRule::text(&[Step::Scope.anchor()], r#"{"scope": "unknown"}"#),
        MockRule::text(&[Step::Granularity.anchor()], r#"{"granularity": "unknown"}"#),
        MockRule::text(
            &[Step::Variants.anchor()],
            r#"{"success": false, "assembly_id": "unknown", "chromosome": "unknown", "start": "unknown", "end": "unknown"}"#,
        ),
        MockRule::text(&[Step::Filters.anchor()], r#"{"filters": []}"#),
        MockRule::text(&[Step::MultistepScope.anchor()], "unknown"),
        MockRule::text(&[Step::MultistepGranularity.anchor()], "unknown"),
    ]
}

/// Builds a script from question answers and codegen answers, followed by
/// the fallbacks.
pub fn script_for(questions: &[ScriptedQuestion], codegen: &[ScriptedCodegen]) -> MockScript {
    let mut script = MockScript::new(MockReply::Text("{}".into()));
    for q in questions {
        for rule in q.rules() {
            script = script.with_rule(rule);
        }
    }
    for c in codegen {
        script = script.with_rule(c.rule());
    }
    for rule in fallback_rules() {
        script = script.with_rule(rule);
    }
    script
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShippedAnswers {
    pub questions: Vec<ScriptedQuestion>,
    pub codegen: Vec<ScriptedCodegen>,
}

const SHIPPED_ANSWERS: &str = include_str!("../data/mock/answers.json");
const PIE_CHART: &str = include_str!("../data/analytics/pie_chart.py");

/// The known-good analytics script shipped as a fixture.
pub fn pie_chart_script() -> &'static str {
    PIE_CHART
}

pub fn shipped_answers() -> ShippedAnswers {
    let mut answers: ShippedAnswers = serde_json::from_str(SHIPPED_ANSWERS).expect("shipped mock answers parse");
    for c in &mut answers.codegen {
        if c.code == "@pie_chart.py" {
            c.code = PIE_CHART.to_string();
        }
    }
    answers
}

/// Script covering the example questions, the cohort walk-through and the
/// pie-chart request.
pub fn shipped_script() -> MockScript {
    let answers = shipped_answers();
    script_for(&answers.questions, &answers.codegen)
}
