//! Prompt templates with `{name}` placeholders and `{{` / `}}` escapes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub mod ids {
    pub const PARALLEL_VALIDATOR: &str = "parallel/validator";
    pub const PARALLEL_SCOPE: &str = "parallel/scope";
    pub const PARALLEL_GRANULARITY: &str = "parallel/granularity";
    pub const PARALLEL_VARIANTS: &str = "parallel/variants";
    pub const PARALLEL_FILTERS: &str = "parallel/filters";
    pub const MULTISTEP_SCOPE: &str = "multistep/scope";
    pub const MULTISTEP_GRANULARITY: &str = "multistep/granularity";
    pub const MULTISTEP_TEXT2SQL: &str = "multistep/text2sql";
    pub const ANALYTICS_CODEGEN: &str = "analytics/codegen";
}

/// Shipped template assets as `(id, body)`; the id doubles as the relative
/// asset path without the `.txt` suffix.
pub const BUILTIN_TEMPLATES: &[(&str, &str)] = &[
    (ids::PARALLEL_VALIDATOR, include_str!("../templates/parallel/validator.txt")),
    (ids::PARALLEL_SCOPE, include_str!("../templates/parallel/scope.txt")),
    (ids::PARALLEL_GRANULARITY, include_str!("../templates/parallel/granularity.txt")),
    (ids::PARALLEL_VARIANTS, include_str!("../templates/parallel/variants.txt")),
    (ids::PARALLEL_FILTERS, include_str!("../templates/parallel/filters.txt")),
    (ids::MULTISTEP_SCOPE, include_str!("../templates/multistep/scope.txt")),
    (ids::MULTISTEP_GRANULARITY, include_str!("../templates/multistep/granularity.txt")),
    (ids::MULTISTEP_TEXT2SQL, include_str!("../templates/multistep/text2sql.txt")),
    (ids::ANALYTICS_CODEGEN, include_str!("../templates/analytics/codegen.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template `{0}` is already registered")]
    DuplicateId(String),
    #[error("malformed template at byte {offset}: {reason}")]
    MalformedTemplate { offset: usize, reason: &'static str },
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("no binding for `{0}`")]
    UnboundVariable(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Placeholder(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    id: String,
    body: String,
    segments: Vec<Segment>,
    required_bindings: BTreeSet<String>,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn parse_segments(body: &str) -> Result<Vec<Segment>, TemplateError> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut chars = body.char_indices().peekable();
    while let Some((offset, c)) = chars.next() {
        match c {
            '{' if chars.peek().map(|&(_, n)| n) == Some('{') => {
                chars.next();
                literal.push('{');
            }
            '}' if chars.peek().map(|&(_, n)| n) == Some('}') => {
                chars.next();
                literal.push('}');
            }
            '}' => {
                return Err(TemplateError::MalformedTemplate { offset, reason: "unmatched `}`" });
            }
            '{' => {
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some((_, '}')) => break,
                        Some((_, n)) if (name.is_empty() && is_ident_start(n)) || (!name.is_empty() && is_ident_char(n)) => {
                            name.push(n)
                        }
                        _ => {
                            return Err(TemplateError::MalformedTemplate {
                                offset,
                                reason: "`{` does not open a placeholder or `{{` escape",
                            })
                        }
                    }
                }
                if name.is_empty() {
                    return Err(TemplateError::MalformedTemplate { offset, reason: "empty placeholder" });
                }
                if !literal.is_empty() {
                    segments.push(Segment::Literal(core::mem::take(&mut literal)));
                }
                segments.push(Segment::Placeholder(name));
            }
            other => literal.push(other),
        }
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    Ok(segments)
}

impl Template {
    pub fn new(id: impl Into<String>, body: impl Into<String>) -> Result<Self, TemplateError> {
        let body = body.into();
        let segments = parse_segments(&body)?;
        let required_bindings = segments
            .iter()
            .filter_map(|s| match s {
                Segment::Placeholder(name) => Some(name.clone()),
                Segment::Literal(_) => None,
            })
            .collect();
        Ok(Template { id: id.into(), body, segments, required_bindings })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn required_bindings(&self) -> &BTreeSet<String> {
        &self.required_bindings
    }

    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<RenderedPrompt, TemplateError> {
        if let Some(missing) = self.required_bindings.iter().find(|name| !bindings.contains_key(*name)) {
            return Err(TemplateError::UnboundVariable(missing.clone()));
        }
        let mut text = String::with_capacity(self.body.len());
        for segment in &self.segments {
            match segment {
                Segment::Literal(lit) => text.push_str(lit),
                Segment::Placeholder(name) => text.push_str(&bindings[name]),
            }
        }
        Ok(RenderedPrompt { template_id: self.id.clone(), text, bindings: bindings.clone() })
    }
}

/// Final prompt text plus the bindings that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub template_id: String,
    pub text: String,
    pub bindings: BTreeMap<String, String>,
}

impl RenderedPrompt {
    /// A prompt that did not come from a registered template.
    pub fn raw(text: impl Into<String>) -> Self {
        RenderedPrompt { template_id: "raw".into(), text: text.into(), bindings: BTreeMap::new() }
    }
}

/// Write-once registry; share it behind an `Arc` once populated.
#[derive(Debug, Clone, Default)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, Template>,
}

impl TemplateRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry holding every shipped template.
    pub fn builtin() -> Self {
        Self::from_assets(BUILTIN_TEMPLATES.iter().map(|(id, body)| (id.to_string(), body.to_string())))
            .expect("shipped templates are well formed")
    }

    pub fn from_assets<I>(assets: I) -> Result<Self, TemplateError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut registry = Self::empty();
        for (id, body) in assets {
            registry.register(Template::new(id, body)?)?;
        }
        Ok(registry)
    }

    pub fn register(&mut self, template: Template) -> Result<String, TemplateError> {
        if self.templates.contains_key(template.id()) {
            return Err(TemplateError::DuplicateId(template.id().to_string()));
        }
        let id = template.id().to_string();
        self.templates.insert(id.clone(), template);
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Option<&Template> {
        self.templates.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn render(&self, id: &str, bindings: &BTreeMap<String, String>) -> Result<RenderedPrompt, TemplateError> {
        self.get(id)
            .ok_or_else(|| TemplateError::UnknownTemplate(id.to_string()))?
            .render(bindings)
    }

    /// Convenience for the single-binding templates.
    pub fn render_with(&self, id: &str, pairs: &[(&str, &str)]) -> Result<RenderedPrompt, TemplateError> {
        let bindings = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        self.render(id, &bindings)
    }
}
