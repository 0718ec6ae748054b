//! Field extraction from generated `SELECT` statements.
//!
//! The grammar is deliberately small:
//!
//! ```text
//! SELECT <anything> FROM table [alias] { [INNER|LEFT|RIGHT [OUTER]] JOIN table [alias] ON a = b {AND c = d} }
//!     [WHERE predicate {AND predicate}] [LIMIT n] [;]
//! ```
//!
//! Predicates are `column op literal`, `column [NOT] LIKE 'pattern'`,
//! `column BETWEEN a AND b`, `column IS [NOT] NULL` and `column IN (...)`,
//! optionally parenthesized. `OR` is rejected. Every predicate ends up in
//! exactly one of: variant parameters, filters, residue.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{is_valid_bases, Chromosome, Filter, FilterType, Scope, VariantParams};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("SQL parse error at token {position}: {message}")]
pub struct SqlParseError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Ident(String),
    QuotedIdent(String),
    Str(String),
    Num(String),
    Op(CmpOp),
    Star,
    Comma,
    Dot,
    LParen,
    RParen,
    Semi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    fn flipped(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            same => same,
        }
    }
}

fn lex(sql: &str) -> Result<Vec<Token>, SqlParseError> {
    let chars: Vec<char> = sql.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let err = |i: usize, message: &str| SqlParseError { position: i, message: message.into() };
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '-' if chars.get(i + 1) == Some(&'-') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(err(tokens.len(), "unterminated string literal")),
                        Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                            s.push('\'');
                            i += 2;
                        }
                        Some('\'') => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                tokens.push(Token::Str(s));
            }
            '"' | '`' => {
                let close = c;
                let start = i + 1;
                let end = chars[start..]
                    .iter()
                    .position(|&ch| ch == close)
                    .ok_or_else(|| err(tokens.len(), "unterminated quoted identifier"))?;
                tokens.push(Token::QuotedIdent(chars[start..start + end].iter().collect()));
                i = start + end + 1;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                tokens.push(Token::Num(chars[start..i].iter().collect()));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                tokens.push(Token::Ident(chars[start..i].iter().collect()));
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            ',' => {
                tokens.push(Token::Comma);
                i += 1;
            }
            '.' => {
                tokens.push(Token::Dot);
                i += 1;
            }
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            ';' => {
                tokens.push(Token::Semi);
                i += 1;
            }
            '=' => {
                i += if chars.get(i + 1) == Some(&'=') { 2 } else { 1 };
                tokens.push(Token::Op(CmpOp::Eq));
            }
            '!' if chars.get(i + 1) == Some(&'=') => {
                tokens.push(Token::Op(CmpOp::Ne));
                i += 2;
            }
            '<' => {
                let (op, width) = match chars.get(i + 1) {
                    Some('=') => (CmpOp::Le, 2),
                    Some('>') => (CmpOp::Ne, 2),
                    _ => (CmpOp::Lt, 1),
                };
                tokens.push(Token::Op(op));
                i += width;
            }
            '>' => {
                let (op, width) = if chars.get(i + 1) == Some(&'=') { (CmpOp::Ge, 2) } else { (CmpOp::Gt, 1) };
                tokens.push(Token::Op(op));
                i += width;
            }
            other => return Err(err(tokens.len(), &format!("unexpected character `{other}`"))),
        }
    }
    Ok(tokens)
}

const RESERVED: &[&str] = &[
    "select", "from", "where", "join", "inner", "left", "right", "full", "outer", "cross", "on", "and", "or",
    "not", "like", "ilike", "between", "is", "null", "in", "as", "limit", "order", "group", "by",
];

fn is_keyword(token: &Token, word: &str) -> bool {
    matches!(token, Token::Ident(s) if s.eq_ignore_ascii_case(word))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnRef {
    pub qualifier: Option<String>,
    pub name: String,
}

impl ColumnRef {
    fn render(&self) -> String {
        match &self.qualifier {
            Some(q) => format!("{q}.{}", self.name),
            None => self.name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Literal {
    Str(String),
    Num(String),
}

impl Literal {
    fn text(&self) -> &str {
        match self {
            Literal::Str(s) | Literal::Num(s) => s,
        }
    }

    fn render(&self) -> String {
        match self {
            Literal::Str(s) => format!("'{}'", s.replace('\'', "''")),
            Literal::Num(n) => n.clone(),
        }
    }

    fn as_position(&self) -> Option<u64> {
        let text = self.text().trim();
        text.parse::<u64>().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateKind {
    Compare { op: CmpOp, value: Literal },
    Like { negated: bool, pattern: String },
    Between { low: Literal, high: Literal },
    /// `IS NULL`, `IN (...)`, column-to-column comparisons.
    Other,
}

/// One conjunct of the WHERE clause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub column: ColumnRef,
    pub kind: PredicateKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRef {
    pub name: String,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinClause {
    pub table: TableRef,
    pub on: Vec<(ColumnRef, ColumnRef)>,
}

/// Parsed statement shape before classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectStatement {
    pub from: TableRef,
    pub joins: Vec<JoinClause>,
    pub predicates: Vec<Predicate>,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let token = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        token
    }

    fn error(&self, message: impl Into<String>) -> SqlParseError {
        SqlParseError { position: self.pos, message: message.into() }
    }

    fn at_keyword(&self, word: &str) -> bool {
        self.peek().is_some_and(|t| is_keyword(t, word))
    }

    fn eat_keyword(&mut self, word: &str) -> bool {
        if self.at_keyword(word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, word: &str) -> Result<(), SqlParseError> {
        if self.eat_keyword(word) {
            Ok(())
        } else {
            Err(self.error(format!("expected {}", word.to_uppercase())))
        }
    }

    fn identifier(&mut self) -> Result<String, SqlParseError> {
        match self.next() {
            Some(Token::Ident(s)) if !RESERVED.iter().any(|k| s.eq_ignore_ascii_case(k)) => Ok(s),
            Some(Token::QuotedIdent(s)) => Ok(s),
            _ => {
                self.pos -= 1;
                Err(self.error("expected an identifier"))
            }
        }
    }

    fn optional_alias(&mut self) -> Option<String> {
        if self.eat_keyword("as") {
            return self.identifier().ok();
        }
        match self.peek() {
            Some(Token::Ident(s)) if !RESERVED.iter().any(|k| s.eq_ignore_ascii_case(k)) => {
                let alias = s.clone();
                self.pos += 1;
                Some(alias)
            }
            _ => None,
        }
    }

    fn table_ref(&mut self) -> Result<TableRef, SqlParseError> {
        let name = self.identifier()?;
        let alias = self.optional_alias();
        Ok(TableRef { name, alias })
    }

    fn column(&mut self) -> Result<ColumnRef, SqlParseError> {
        let first = self.identifier()?;
        if self.peek() == Some(&Token::Dot) {
            self.pos += 1;
            let name = self.identifier()?;
            Ok(ColumnRef { qualifier: Some(first), name })
        } else {
            Ok(ColumnRef { qualifier: None, name: first })
        }
    }

    fn literal(&mut self) -> Option<Literal> {
        match self.peek().cloned() {
            Some(Token::Str(s)) | Some(Token::QuotedIdent(s)) => {
                self.pos += 1;
                Some(Literal::Str(s))
            }
            Some(Token::Num(n)) => {
                self.pos += 1;
                Some(Literal::Num(n))
            }
            _ => None,
        }
    }

    fn statement(&mut self) -> Result<SelectStatement, SqlParseError> {
        if !self.eat_keyword("select") {
            return Err(self.error("statement is not a SELECT"));
        }
        let mut depth = 0usize;
        loop {
            match self.peek() {
                None => return Err(self.error("missing FROM")),
                Some(Token::LParen) => depth += 1,
                Some(Token::RParen) => {
                    depth = depth.checked_sub(1).ok_or_else(|| self.error("unbalanced `)`"))?;
                }
                Some(t) if depth == 0 && is_keyword(t, "from") => break,
                _ => {}
            }
            self.pos += 1;
        }
        self.expect_keyword("from")?;
        let from = self.table_ref()?;

        let mut joins = Vec::new();
        loop {
            let save = self.pos;
            if self.eat_keyword("inner") || self.eat_keyword("cross") {
            } else if self.eat_keyword("left") || self.eat_keyword("right") || self.eat_keyword("full") {
                self.eat_keyword("outer");
            }
            if !self.eat_keyword("join") {
                self.pos = save;
                break;
            }
            let table = self.table_ref()?;
            self.expect_keyword("on")?;
            let mut on = Vec::new();
            loop {
                let parens = self.eat_parens_open();
                let left = self.column()?;
                match self.next() {
                    Some(Token::Op(CmpOp::Eq)) => {}
                    _ => return Err(self.error("JOIN condition must be an equality")),
                }
                let right = self.column()?;
                self.eat_parens_close(parens)?;
                on.push((left, right));
                if !self.eat_keyword("and") {
                    break;
                }
            }
            if self.at_keyword("or") {
                return Err(self.error("OR is not supported"));
            }
            joins.push(JoinClause { table, on });
        }

        let mut predicates = Vec::new();
        if self.eat_keyword("where") {
            self.conjunction(&mut predicates, 0)?;
        }
        if self.eat_keyword("limit") {
            match self.next() {
                Some(Token::Num(_)) => {}
                _ => return Err(self.error("LIMIT needs a number")),
            }
        }
        while self.peek() == Some(&Token::Semi) {
            self.pos += 1;
        }
        if self.peek().is_some() {
            return Err(self.error("unexpected trailing tokens"));
        }
        Ok(SelectStatement { from, joins, predicates })
    }

    fn eat_parens_open(&mut self) -> usize {
        let mut n = 0;
        while self.peek() == Some(&Token::LParen) {
            self.pos += 1;
            n += 1;
        }
        n
    }

    fn eat_parens_close(&mut self, n: usize) -> Result<(), SqlParseError> {
        for _ in 0..n {
            if self.next() != Some(Token::RParen) {
                self.pos -= 1;
                return Err(self.error("unbalanced `(`"));
            }
        }
        Ok(())
    }

    fn conjunction(&mut self, out: &mut Vec<Predicate>, depth: usize) -> Result<(), SqlParseError> {
        loop {
            if self.peek() == Some(&Token::LParen) {
                self.pos += 1;
                self.conjunction(out, depth + 1)?;
                if self.next() != Some(Token::RParen) {
                    self.pos -= 1;
                    return Err(self.error("unbalanced `(`"));
                }
            } else {
                out.push(self.predicate()?);
            }
            if self.at_keyword("or") {
                return Err(self.error("OR is not supported"));
            }
            if !self.eat_keyword("and") {
                break;
            }
        }
        if depth == 0 && self.peek() == Some(&Token::RParen) {
            return Err(self.error("unbalanced `)`"));
        }
        Ok(())
    }

    fn predicate(&mut self) -> Result<Predicate, SqlParseError> {
        // literal on the left: `500000 <= start`
        if let Some(value) = self.literal() {
            let op = match self.next() {
                Some(Token::Op(op)) => op,
                _ => return Err(self.error("expected a comparison operator")),
            };
            let column = self.column()?;
            let op = op.flipped();
            let text = format!("{} {} {}", column.render(), op.symbol(), value.render());
            return Ok(Predicate { column, kind: PredicateKind::Compare { op, value }, text });
        }

        let column = self.column()?;
        let col = column.render();
        let negated = self.eat_keyword("not");
        if self.eat_keyword("like") || self.eat_keyword("ilike") {
            let pattern = match self.literal() {
                Some(Literal::Str(s)) => s,
                _ => return Err(self.error("LIKE needs a string pattern")),
            };
            let text = format!("{col} {}LIKE {}", if negated { "NOT " } else { "" }, Literal::Str(pattern.clone()).render());
            return Ok(Predicate { column, kind: PredicateKind::Like { negated, pattern }, text });
        }
        if self.eat_keyword("between") {
            let low = self.literal().ok_or_else(|| self.error("BETWEEN needs literals"))?;
            self.expect_keyword("and")?;
            let high = self.literal().ok_or_else(|| self.error("BETWEEN needs literals"))?;
            let kind = if negated { PredicateKind::Other } else { PredicateKind::Between { low: low.clone(), high: high.clone() } };
            let text = format!("{col} {}BETWEEN {} AND {}", if negated { "NOT " } else { "" }, low.render(), high.render());
            return Ok(Predicate { column, kind, text });
        }
        if self.eat_keyword("in") {
            if self.next() != Some(Token::LParen) {
                return Err(self.error("IN needs a list"));
            }
            let mut items = Vec::new();
            loop {
                items.push(self.literal().ok_or_else(|| self.error("IN list holds literals"))?.render());
                match self.next() {
                    Some(Token::Comma) => continue,
                    Some(Token::RParen) => break,
                    _ => return Err(self.error("unbalanced IN list")),
                }
            }
            let text = format!("{col} {}IN ({})", if negated { "NOT " } else { "" }, items.join(", "));
            return Ok(Predicate { column, kind: PredicateKind::Other, text });
        }
        if negated {
            return Err(self.error("NOT must precede LIKE, BETWEEN or IN"));
        }
        if self.eat_keyword("is") {
            let not = self.eat_keyword("not");
            self.expect_keyword("null")?;
            let text = format!("{col} IS {}NULL", if not { "NOT " } else { "" });
            return Ok(Predicate { column, kind: PredicateKind::Other, text });
        }
        let op = match self.next() {
            Some(Token::Op(op)) => op,
            _ => {
                self.pos -= 1;
                return Err(self.error("expected a comparison"));
            }
        };
        if let Some(value) = self.literal() {
            let text = format!("{col} {} {}", op.symbol(), value.render());
            return Ok(Predicate { column, kind: PredicateKind::Compare { op, value }, text });
        }
        let other = self.column()?;
        let text = format!("{col} {} {}", op.symbol(), other.render());
        Ok(Predicate { column, kind: PredicateKind::Other, text })
    }
}

pub fn parse_select(sql: &str) -> Result<SelectStatement, SqlParseError> {
    let tokens = lex(sql)?;
    let mut parser = Parser { tokens, pos: 0 };
    parser.statement()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateClass {
    Variant,
    Filter,
    Residue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedPredicate {
    pub text: String,
    pub class: PredicateClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlExtraction {
    pub sql: String,
    pub variant: Option<VariantParams>,
    pub filters: Vec<Filter>,
    pub residue: Vec<String>,
    pub predicates: Vec<ClassifiedPredicate>,
}

pub const ONTOLOGY_TABLE: &str = "OntologyTerm";

fn squash(name: &str) -> String {
    name.chars().filter(|c| *c != '_').flat_map(char::to_lowercase).collect()
}

/// Scope of a schema entity, if it belongs to one.
pub fn table_scope(table: &str) -> Option<Scope> {
    match squash(table).as_str() {
        "genomicvariations" | "genomicvariation" | "gvariants" | "legacyvariation" | "chromosomelocation"
        | "caselevelvariant" | "caseleveldata" | "molecularattributes" | "variants" => Some(Scope::GVariants),
        "individuals" | "individual" => Some(Scope::Individuals),
        "biosamples" | "biosample" => Some(Scope::Biosamples),
        "runs" | "run" => Some(Scope::Runs),
        "analyses" | "analysis" => Some(Scope::Analyses),
        "datasets" | "dataset" => Some(Scope::Datasets),
        "cohorts" | "cohort" => Some(Scope::Cohorts),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VariantColumn {
    Chromosome,
    Start,
    End,
    Assembly,
    Gene,
    ReferenceBases,
    AlternateBases,
}

fn variant_column(name: &str) -> Option<VariantColumn> {
    Some(match squash(name).as_str() {
        "chr" | "chrom" | "chromosome" | "referencename" => VariantColumn::Chromosome,
        "start" | "startposition" | "startbase" => VariantColumn::Start,
        "end" | "endposition" | "endbase" => VariantColumn::End,
        "assemblyid" | "assembly" => VariantColumn::Assembly,
        "geneid" | "gene" | "genesymbol" => VariantColumn::Gene,
        "referencebases" => VariantColumn::ReferenceBases,
        "alternatebases" => VariantColumn::AlternateBases,
        _ => return None,
    })
}

/// Lower/upper inclusive bounds gathered for one position column.
#[derive(Debug, Default)]
struct Bounds {
    low: Option<u64>,
    high: Option<u64>,
    predicates: Vec<usize>,
}

impl Bounds {
    fn apply(&mut self, low: Option<u64>, high: Option<u64>, index: usize) -> bool {
        if (low.is_some() && self.low.is_some()) || (high.is_some() && self.high.is_some()) {
            return false;
        }
        self.low = self.low.or(low);
        self.high = self.high.or(high);
        self.predicates.push(index);
        true
    }
}

fn bounds_of(kind: &PredicateKind) -> Option<(Option<u64>, Option<u64>)> {
    match kind {
        PredicateKind::Compare { op, value } => {
            let v = value.as_position()?;
            Some(match op {
                CmpOp::Eq => (Some(v), Some(v)),
                CmpOp::Ge => (Some(v), None),
                CmpOp::Gt => (Some(v.checked_add(1)?), None),
                CmpOp::Le => (None, Some(v)),
                CmpOp::Lt => (None, Some(v.checked_sub(1)?)),
                CmpOp::Ne => return None,
            })
        }
        PredicateKind::Between { low, high } => {
            let (lo, hi) = (low.as_position()?, high.as_position()?);
            (lo <= hi).then_some((Some(lo), Some(hi)))
        }
        _ => None,
    }
}

fn strip_like(pattern: &str) -> String {
    pattern.trim_matches('%').trim().to_string()
}

fn equality_text(kind: &PredicateKind) -> Option<&str> {
    match kind {
        PredicateKind::Compare { op: CmpOp::Eq, value } => Some(value.text()),
        _ => None,
    }
}

/// Parses `sql` and sorts its predicates into variant parameters, filters and
/// residue. `scope` is the query scope used when a predicate's table does not
/// imply one.
pub fn parse_sql_fields(sql: &str, scope: Scope) -> Result<SqlExtraction, SqlParseError> {
    let statement = parse_select(sql)?;

    // alias (and bare table name) -> table name
    let mut tables: BTreeMap<String, String> = BTreeMap::new();
    let mut register = |t: &TableRef| {
        tables.insert(t.name.to_lowercase(), t.name.clone());
        if let Some(alias) = &t.alias {
            tables.insert(alias.to_lowercase(), t.name.clone());
        }
    };
    register(&statement.from);
    for join in &statement.joins {
        register(&join.table);
    }
    let resolve = |column: &ColumnRef| -> String {
        match &column.qualifier {
            Some(q) => tables.get(&q.to_lowercase()).cloned().unwrap_or_else(|| q.clone()),
            None => statement.from.name.clone(),
        }
    };
    let is_ontology = |table: &str| squash(table) == squash(ONTOLOGY_TABLE);

    // ontology alias -> scope of the entity it is joined to
    let mut ontology_scope: BTreeMap<String, Scope> = BTreeMap::new();
    for join in &statement.joins {
        if !is_ontology(&join.table.name) {
            continue;
        }
        let key = join.table.alias.clone().unwrap_or_else(|| join.table.name.clone()).to_lowercase();
        let linked = join.on.iter().find_map(|(a, b)| {
            let (ta, tb) = (resolve(a), resolve(b));
            if is_ontology(&ta) && !is_ontology(&tb) {
                table_scope(&tb)
            } else if is_ontology(&tb) && !is_ontology(&ta) {
                table_scope(&ta)
            } else {
                None
            }
        });
        ontology_scope.insert(key, linked.unwrap_or(scope));
    }

    let mut classes = alloc::vec![PredicateClass::Residue; statement.predicates.len()];
    let mut filters = Vec::new();
    let mut variant = VariantParams::default();
    let mut variant_touched = false;
    let mut start = Bounds::default();
    let mut end = Bounds::default();
    let mut seen_scalar: Vec<VariantColumn> = Vec::new();

    for (index, predicate) in statement.predicates.iter().enumerate() {
        let table = resolve(&predicate.column);
        if is_ontology(&table) {
            let key = predicate
                .column
                .qualifier
                .clone()
                .unwrap_or_else(|| ONTOLOGY_TABLE.into())
                .to_lowercase();
            let filter_scope = ontology_scope.get(&key).copied().unwrap_or(scope);
            let column = squash(&predicate.column.name);
            let filter = match (column.as_str(), &predicate.kind) {
                ("label", PredicateKind::Like { negated: false, pattern }) => Some(Filter {
                    filter_type: FilterType::Ontology,
                    id: None,
                    value: Some(pattern.clone()),
                    term: Some(strip_like(pattern)),
                    scope: filter_scope,
                }),
                ("label", kind) => equality_text(kind).map(|text| Filter {
                    filter_type: FilterType::Ontology,
                    id: None,
                    value: None,
                    term: Some(text.to_string()),
                    scope: filter_scope,
                }),
                ("id", kind) => equality_text(kind).map(|text| Filter {
                    filter_type: FilterType::Ontology,
                    id: Some(text.to_string()),
                    value: None,
                    term: None,
                    scope: filter_scope,
                }),
                _ => None,
            };
            if let Some(filter) = filter.filter(|f| f.validate().is_ok()) {
                filters.push(filter);
                classes[index] = PredicateClass::Filter;
            }
            continue;
        }

        if let Some(kind) = variant_column(&predicate.column.name) {
            let accepted = match kind {
                VariantColumn::Start => bounds_of(&predicate.kind).is_some_and(|(lo, hi)| start.apply(lo, hi, index)),
                VariantColumn::End => bounds_of(&predicate.kind).is_some_and(|(lo, hi)| end.apply(lo, hi, index)),
                scalar if seen_scalar.contains(&scalar) => false,
                VariantColumn::Chromosome => match equality_text(&predicate.kind).and_then(Chromosome::parse) {
                    Some(chrom) => {
                        variant.reference_name = Some(chrom);
                        true
                    }
                    None => false,
                },
                VariantColumn::Assembly => match equality_text(&predicate.kind) {
                    Some(text) => {
                        variant.assembly_id = crate::draft::normalize_assembly(text);
                        true
                    }
                    None => false,
                },
                VariantColumn::Gene => {
                    let gene = match &predicate.kind {
                        PredicateKind::Like { negated: false, pattern } => Some(pattern.clone()),
                        kind => equality_text(kind).map(str::to_string),
                    };
                    match gene {
                        Some(gene) if !gene.is_empty() => {
                            variant.gene_id = Some(gene);
                            true
                        }
                        _ => false,
                    }
                }
                VariantColumn::ReferenceBases | VariantColumn::AlternateBases => {
                    match equality_text(&predicate.kind).filter(|b| is_valid_bases(b)) {
                        Some(bases) if kind == VariantColumn::ReferenceBases => {
                            variant.reference_bases = bases.to_string();
                            true
                        }
                        Some(bases) => {
                            variant.alternate_bases = bases.to_string();
                            true
                        }
                        None => false,
                    }
                }
            };
            if accepted {
                if !matches!(kind, VariantColumn::Start | VariantColumn::End) {
                    seen_scalar.push(kind);
                }
                classes[index] = PredicateClass::Variant;
                variant_touched = true;
            }
            continue;
        }

        if let PredicateKind::Like { negated: false, pattern } = &predicate.kind {
            let filter_scope = table_scope(&table).unwrap_or(scope);
            let filter = Filter::new(None, Some(pattern.clone()), Some(strip_like(pattern)), filter_scope);
            if filter.validate().is_ok() {
                filters.push(filter);
                classes[index] = PredicateClass::Filter;
            }
        }
    }

    // positions: a start needs a lower bound, an end needs an upper bound
    let start_list = match (start.low, start.high) {
        (Some(lo), Some(hi)) if lo == hi => alloc::vec![lo],
        (Some(lo), Some(hi)) => alloc::vec![lo, hi],
        (Some(lo), None) => alloc::vec![lo],
        _ => Vec::new(),
    };
    let end_list = match (end.low, end.high) {
        (Some(lo), Some(hi)) if lo == hi => alloc::vec![hi],
        (Some(lo), Some(hi)) => alloc::vec![lo, hi],
        (None, Some(hi)) => alloc::vec![hi],
        _ => Vec::new(),
    };
    let demote = |indices: &[usize], classes: &mut Vec<PredicateClass>| {
        for &i in indices {
            classes[i] = PredicateClass::Residue;
        }
    };
    if start_list.is_empty() {
        demote(&start.predicates, &mut classes);
    }
    if end_list.is_empty() {
        demote(&end.predicates, &mut classes);
    }
    variant.start = start_list;
    variant.end = if variant.start.is_empty() { Vec::new() } else { end_list };
    if variant.start.is_empty() {
        demote(&end.predicates, &mut classes);
    }
    if variant.validate().is_err() {
        demote(&start.predicates, &mut classes);
        demote(&end.predicates, &mut classes);
        variant.start.clear();
        variant.end.clear();
    }
    let variant_touched = variant_touched && classes.contains(&PredicateClass::Variant);

    let predicates: Vec<ClassifiedPredicate> = statement
        .predicates
        .iter()
        .zip(&classes)
        .map(|(p, class)| ClassifiedPredicate { text: p.text.clone(), class: *class })
        .collect();
    let residue = predicates
        .iter()
        .filter(|p| p.class == PredicateClass::Residue)
        .map(|p| p.text.clone())
        .collect();

    Ok(SqlExtraction {
        sql: sql.to_string(),
        variant: variant_touched.then_some(variant),
        filters,
        residue,
        predicates,
    })
}

/// Moves filters whose phrase appears neither in the question nor in the
/// schema text into the residue. Matching ignores case.
pub fn ground_filters(extraction: &mut SqlExtraction, question: &str, schema_text: &str) {
    let haystacks = [question.to_lowercase(), schema_text.to_lowercase()];
    let (kept, dropped): (Vec<Filter>, Vec<Filter>) = core::mem::take(&mut extraction.filters)
        .into_iter()
        .partition(|f| {
            let phrase = f.display_term().to_lowercase();
            !phrase.is_empty() && haystacks.iter().any(|h| h.contains(&phrase))
        });
    extraction.filters = kept;
    for filter in dropped {
        let phrase = filter.display_term();
        if let Some(p) = extraction
            .predicates
            .iter_mut()
            .find(|p| p.class == PredicateClass::Filter && p.text.contains(phrase.as_str()))
        {
            p.class = PredicateClass::Residue;
            extraction.residue.push(p.text.clone());
        } else {
            extraction.residue.push(phrase);
        }
    }
}
