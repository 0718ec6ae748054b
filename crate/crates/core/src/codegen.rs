//! Prompt construction for analysis code generation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::decode::CodegenResult;
use crate::frame::{Column, ResultFrame};
use crate::guard::ScriptArtifact;
use crate::template::{ids, RenderedPrompt, TemplateError, TemplateRegistry};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodegenError {
    #[error("at least one input frame is required")]
    NoFrames,
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Variable name a frame is bound to in the execution wrapper.
pub fn frame_variable(frame: Option<&str>, index: usize) -> String {
    match frame {
        Some(name) if !name.is_empty() => name.into(),
        _ if index == 0 => "data".into(),
        _ => format!("data{}", index + 1),
    }
}

/// The `{data}` section: one block per frame listing columns with their
/// `'str'`/`'list'`/`'dict'` hints.
pub fn data_section(frames: &[(String, Vec<Column>)]) -> String {
    let mut out = String::new();
    for (i, (name, columns)) in frames.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("{name}: pandas data frame with columns\n"));
        for column in columns {
            out.push_str(&format!("  {}: '{}'\n", column.name, column.kind.hint()));
        }
    }
    while out.ends_with('\n') {
        out.pop();
    }
    out
}

pub fn frame_schemas(frames: &[ResultFrame]) -> Vec<(String, Vec<Column>)> {
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| (frame_variable(f.name.as_deref(), i), f.columns.clone()))
        .collect()
}

pub fn build_codegen_prompt(
    registry: &TemplateRegistry,
    frames: &[(String, Vec<Column>)],
    request: &str,
) -> Result<RenderedPrompt, CodegenError> {
    if frames.is_empty() {
        return Err(CodegenError::NoFrames);
    }
    let data = data_section(frames);
    Ok(registry.render_with(ids::ANALYTICS_CODEGEN, &[("data", &data), ("query", request)])?)
}

impl From<CodegenResult> for ScriptArtifact {
    fn from(r: CodegenResult) -> Self {
        ScriptArtifact { code: r.code, files: r.files, assumptions: r.assumptions, feedback: r.feedback }
    }
}
