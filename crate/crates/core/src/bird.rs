//! Schema texts handed to the text-to-SQL step.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::model::Scope;

const G_VARIANTS: &str = include_str!("../schemas/g_variants.bird.txt");
const INDIVIDUALS: &str = include_str!("../schemas/individuals.bird.txt");
const BIOSAMPLES: &str = include_str!("../schemas/biosamples.bird.txt");

/// JSON-schema description of the request payload.
pub const REQUEST_JSON_SCHEMA: &str = include_str!("../schemas/beacon_request.schema.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaDoc {
    pub scope: Scope,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no schema is shipped for scope `{0}`")]
pub struct UnsupportedScope(pub Scope);

pub fn schema_text(scope: Scope) -> Option<&'static str> {
    match scope {
        Scope::GVariants => Some(G_VARIANTS),
        Scope::Individuals => Some(INDIVIDUALS),
        Scope::Biosamples => Some(BIOSAMPLES),
        _ => None,
    }
}

pub fn render_schema(scope: Scope) -> Result<SchemaDoc, UnsupportedScope> {
    schema_text(scope)
        .map(|text| SchemaDoc { scope, text: text.into() })
        .ok_or(UnsupportedScope(scope))
}
