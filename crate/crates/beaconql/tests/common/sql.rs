//! SQL fixtures and a parser-neutral statement shape.
//!
//! The shape is computed twice: from `beaconql_core::sql::parse_select` and
//! from an independent `sqlparser` AST walk. The walk is recorded in
//! `data/sql/reference.json`.

use std::path::PathBuf;

use beaconql_core::model::{Filter, Scope, VariantParams};
use beaconql_core::sql::{CmpOp, Literal, PredicateKind, SelectStatement};
use serde::{Deserialize, Serialize};
use sqlparser::ast::{BinaryOperator, Expr, SelectItem, SetExpr, Statement, TableFactor, Value};
use sqlparser::dialect::GenericDialect;
use sqlparser::parser::Parser;

pub const REGENERATE_ENV: &str = "BEACONQL_REGENERATE";

#[derive(Debug, Deserialize)]
pub struct SqlFixture {
    pub name: String,
    pub scope: Scope,
    pub sql: String,
    pub expected: Expected,
}

#[derive(Debug, Deserialize)]
pub struct Expected {
    pub variant: Option<VariantParams>,
    pub filters: Vec<Filter>,
    pub residue: Vec<String>,
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub name: String,
    pub from: String,
    pub joins: Vec<String>,
    pub predicates: Vec<PredicateShape>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateShape {
    pub column: String,
    /// Comparison symbol, `LIKE`, `NOT LIKE`, `BETWEEN` or `other`.
    pub op: String,
    /// Literals rendered as SQL: `'7'`, `500000`.
    pub values: Vec<String>,
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/sql")
}

pub fn reference_path() -> PathBuf {
    data_dir().join("reference.json")
}

pub fn load_fixtures() -> Vec<SqlFixture> {
    let text = std::fs::read_to_string(data_dir().join("fixtures.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn load_reference() -> Vec<Shape> {
    let text = std::fs::read_to_string(reference_path()).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn reference_text(shapes: &[Shape]) -> String {
    serde_json::to_string_pretty(shapes).unwrap() + "\n"
}

fn sql_string(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn core_literal(lit: &Literal) -> String {
    match lit {
        Literal::Str(s) => sql_string(s),
        Literal::Num(n) => n.clone(),
    }
}

fn core_op(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Eq => "=",
        CmpOp::Ne => "<>",
        CmpOp::Lt => "<",
        CmpOp::Le => "<=",
        CmpOp::Gt => ">",
        CmpOp::Ge => ">=",
    }
}

/// Shape of a statement as the crate's own parser sees it.
pub fn core_shape(name: &str, stmt: &SelectStatement) -> Shape {
    let predicates = stmt
        .predicates
        .iter()
        .map(|p| {
            let column = match &p.column.qualifier {
                Some(q) => format!("{q}.{}", p.column.name),
                None => p.column.name.clone(),
            };
            let (op, values) = match &p.kind {
                PredicateKind::Compare { op, value } => (core_op(*op).to_string(), vec![core_literal(value)]),
                PredicateKind::Like { negated, pattern } => {
                    ((if *negated { "NOT LIKE" } else { "LIKE" }).to_string(), vec![sql_string(pattern)])
                }
                PredicateKind::Between { low, high } => ("BETWEEN".into(), vec![core_literal(low), core_literal(high)]),
                PredicateKind::Other => ("other".into(), vec![]),
            };
            PredicateShape { column, op, values }
        })
        .collect();
    Shape {
        name: name.into(),
        from: stmt.from.name.clone(),
        joins: stmt.joins.iter().map(|j| j.table.name.clone()).collect(),
        predicates,
    }
}

fn table_name(factor: &TableFactor) -> String {
    match factor {
        TableFactor::Table { name, .. } => name.to_string(),
        other => panic!("unexpected relation {other}"),
    }
}

fn column_of(expr: &Expr) -> Option<String> {
    match expr {
        Expr::Identifier(id) => Some(id.value.clone()),
        Expr::CompoundIdentifier(parts) => Some(parts.iter().map(|p| p.value.as_str()).collect::<Vec<_>>().join(".")),
        Expr::Nested(inner) => column_of(inner),
        _ => None,
    }
}

fn literal_of(expr: &Expr) -> Option<String> {
    match expr {
        Expr::Value(v) => match &v.value {
            Value::SingleQuotedString(s) => Some(sql_string(s)),
            Value::Number(n, _) => Some(n.to_string()),
            _ => None,
        },
        Expr::Nested(inner) => literal_of(inner),
        _ => None,
    }
}

fn comparison(op: &BinaryOperator) -> Option<(&'static str, &'static str)> {
    // (symbol, symbol with operands swapped)
    Some(match op {
        BinaryOperator::Eq => ("=", "="),
        BinaryOperator::NotEq => ("<>", "<>"),
        BinaryOperator::Lt => ("<", ">"),
        BinaryOperator::LtEq => ("<=", ">="),
        BinaryOperator::Gt => (">", "<"),
        BinaryOperator::GtEq => (">=", "<="),
        _ => return None,
    })
}

fn conjuncts(expr: &Expr, out: &mut Vec<PredicateShape>) -> Result<(), String> {
    match expr {
        Expr::Nested(inner) => conjuncts(inner, out),
        Expr::BinaryOp { left, op: BinaryOperator::And, right } => {
            conjuncts(left, out)?;
            conjuncts(right, out)
        }
        Expr::BinaryOp { op: BinaryOperator::Or, .. } => Err("disjunction".into()),
        Expr::BinaryOp { left, op, right } => {
            let (symbol, swapped) = comparison(op).ok_or_else(|| format!("operator {op}"))?;
            let shape = match (column_of(left), literal_of(left), column_of(right), literal_of(right)) {
                (Some(c), _, _, Some(v)) => PredicateShape { column: c, op: symbol.into(), values: vec![v] },
                (_, Some(v), Some(c), _) => PredicateShape { column: c, op: swapped.into(), values: vec![v] },
                (Some(c), _, Some(_), _) => PredicateShape { column: c, op: "other".into(), values: vec![] },
                _ => return Err(format!("comparison {expr}")),
            };
            out.push(shape);
            Ok(())
        }
        Expr::Like { negated, expr: target, pattern, .. } => {
            let column = column_of(target).ok_or("LIKE target")?;
            let pattern = literal_of(pattern).ok_or("LIKE pattern")?;
            let op = if *negated { "NOT LIKE" } else { "LIKE" };
            out.push(PredicateShape { column, op: op.into(), values: vec![pattern] });
            Ok(())
        }
        Expr::Between { expr: target, negated, low, high } => {
            let column = column_of(target).ok_or("BETWEEN target")?;
            if *negated {
                out.push(PredicateShape { column, op: "other".into(), values: vec![] });
            } else {
                let values = vec![literal_of(low).ok_or("BETWEEN low")?, literal_of(high).ok_or("BETWEEN high")?];
                out.push(PredicateShape { column, op: "BETWEEN".into(), values });
            }
            Ok(())
        }
        Expr::InList { expr: target, .. } | Expr::IsNull(target) | Expr::IsNotNull(target) => {
            let column = column_of(target).ok_or("IN/IS target")?;
            out.push(PredicateShape { column, op: "other".into(), values: vec![] });
            Ok(())
        }
        other => Err(format!("unsupported predicate {other}")),
    }
}

/// Shape of a statement according to `sqlparser`.
pub fn reference_shape(name: &str, sql: &str) -> Result<Shape, String> {
    let mut statements = Parser::parse_sql(&GenericDialect {}, sql).map_err(|e| e.to_string())?;
    if statements.len() != 1 {
        return Err(format!("{} statements", statements.len()));
    }
    let Statement::Query(query) = statements.remove(0) else {
        return Err("not a query".into());
    };
    let SetExpr::Select(select) = *query.body else {
        return Err("not a SELECT".into());
    };
    if !matches!(select.projection.as_slice(), [SelectItem::Wildcard(_)]) {
        return Err("projection is not *".into());
    }
    let [from] = select.from.as_slice() else {
        return Err("expected one FROM relation".into());
    };
    let mut predicates = Vec::new();
    if let Some(selection) = &select.selection {
        conjuncts(selection, &mut predicates)?;
    }
    Ok(Shape {
        name: name.into(),
        from: table_name(&from.relation),
        joins: from.joins.iter().map(|j| table_name(&j.relation)).collect(),
        predicates,
    })
}
