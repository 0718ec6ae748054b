//! Static vetting of generated analysis scripts.
//!
//! The guard works on a token stream of the guest language (Python), not on
//! a full syntax tree. Rules:
//!
//! * `R1` no import statements, `__import__` or `importlib`.
//! * `R2` no module references other than the pre-bound aliases.
//! * `R3` writes go under the output directory, with no `..` segments.
//! * `R4` no process, OS, network, reflection or input-reading primitives.
//! * `R5` no interactive display calls.
//!
//! A script that cannot be tokenized is rejected under `PARSE`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "R1")]
    R1,
    #[serde(rename = "R2")]
    R2,
    #[serde(rename = "R3")]
    R3,
    #[serde(rename = "R4")]
    R4,
    #[serde(rename = "R5")]
    R5,
    #[serde(rename = "PARSE")]
    Parse,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::R1 => "R1",
            Rule::R2 => "R2",
            Rule::R3 => "R3",
            Rule::R4 => "R4",
            Rule::R5 => "R5",
            Rule::Parse => "PARSE",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    /// 1-based; 0 for findings not tied to a line (declared files).
    pub line: usize,
    pub excerpt: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardReport {
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
}

impl GuardReport {
    fn from_violations(mut violations: Vec<Violation>) -> Self {
        violations.sort_by_key(|v| (v.line, v.rule));
        violations.dedup();
        let verdict = if violations.is_empty() { Verdict::Pass } else { Verdict::Reject };
        GuardReport { verdict, violations }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn rules(&self) -> Vec<Rule> {
        let mut rules: Vec<Rule> = self.violations.iter().map(|v| v.rule).collect();
        rules.sort();
        rules.dedup();
        rules
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| (*s).to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardConfig {
    /// Names bound by the execution wrapper.
    pub aliases: Vec<String>,
    /// Module names that may not be referenced directly.
    pub module_names: Vec<String>,
    pub deny_names: Vec<String>,
    pub writer_calls: Vec<String>,
    pub display_calls: Vec<String>,
    pub output_prefix: String,
}

impl Default for GuardConfig {
    fn default() -> Self {
        GuardConfig {
            aliases: strings(&["pd", "np", "plt", "sns"]),
            module_names: strings(&[
                "os", "sys", "subprocess", "shutil", "socket", "pathlib", "builtins", "ctypes", "requests", "urllib",
                "http", "pickle", "glob", "tempfile", "signal", "threading", "multiprocessing", "asyncio", "inspect",
                "gc", "pty", "marshal", "mmap", "platform", "io", "codecs", "webbrowser", "ftplib", "smtplib",
                "sqlite3", "zipfile", "tarfile", "pandas", "numpy", "matplotlib", "pyplot", "seaborn", "scipy",
            ]),
            deny_names: strings(&[
                "eval", "exec", "compile", "open", "getattr", "setattr", "delattr", "globals", "locals", "vars",
                "input", "breakpoint", "memoryview", "system", "popen", "spawn", "fork", "execv", "execve", "kill",
                "remove", "unlink", "rmdir", "rmtree", "chmod", "chown", "rename", "urlopen", "connect", "read_csv",
                "read_table", "read_excel", "read_json", "read_parquet", "read_pickle", "read_html", "read_sql",
                "read_fwf", "read_clipboard", "read_feather", "read_xml", "load", "loadtxt", "genfromtxt",
                "fromfile", "query",
            ]),
            writer_calls: strings(&[
                "savefig", "imsave", "to_csv", "to_json", "to_excel", "to_parquet", "to_html", "to_pickle",
                "to_feather", "to_latex", "to_xml", "save", "savez", "savetxt", "tofile",
            ]),
            display_calls: strings(&["show", "display", "ion", "pause", "ginput", "waitforbuttonpress"]),
            output_prefix: "/tmp/".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Name(String),
    /// Literal text and, for f-strings, the static prefix before the first
    /// replacement field.
    Str { text: String, fstring: bool },
    Num,
    Op(char),
    Newline,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct LexError {
    line: usize,
    reason: &'static str,
}

fn is_string_prefix(name: &str) -> bool {
    matches!(name.to_ascii_lowercase().as_str(), "r" | "b" | "u" | "f" | "rb" | "br" | "fr" | "rf")
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    depth: Vec<char>,
    out: Vec<Token>,
    _src: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Lexer { chars: src.chars().collect(), pos: 0, line, depth: Vec::new(), out: Vec::new(), _src: src }
    }

    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn push(&mut self, tok: Tok, line: usize) {
        self.out.push(Token { tok, line });
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        while let Some(c) = self.peek(0) {
            match c {
                '\n' => {
                    if self.depth.is_empty() {
                        self.push(Tok::Newline, self.line);
                    }
                    self.line += 1;
                    self.pos += 1;
                }
                '#' => {
                    while self.peek(0).is_some_and(|c| c != '\n') {
                        self.pos += 1;
                    }
                }
                '\\' if self.peek(1) == Some('\n') => {
                    self.pos += 2;
                    self.line += 1;
                }
                c if c.is_whitespace() => self.pos += 1,
                '\'' | '"' => self.string("")?,
                c if c.is_alphabetic() || c == '_' => {
                    let start = self.pos;
                    while self.peek(0).is_some_and(|c| c.is_alphanumeric() || c == '_') {
                        self.pos += 1;
                    }
                    let name: String = self.chars[start..self.pos].iter().collect();
                    if is_string_prefix(&name) && matches!(self.peek(0), Some('\'') | Some('"')) {
                        self.string(&name)?;
                    } else {
                        self.push(Tok::Name(name), self.line);
                    }
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) => {
                    while self.peek(0).is_some_and(|c| c.is_alphanumeric() || c == '.' || c == '_') {
                        self.pos += 1;
                    }
                    self.push(Tok::Num, self.line);
                }
                '(' | '[' | '{' => {
                    self.depth.push(c);
                    self.push(Tok::Op(c), self.line);
                    self.pos += 1;
                }
                ')' | ']' | '}' => {
                    let open = match c {
                        ')' => '(',
                        ']' => '[',
                        _ => '{',
                    };
                    if self.depth.pop() != Some(open) {
                        return Err(LexError { line: self.line, reason: "unbalanced brackets" });
                    }
                    self.push(Tok::Op(c), self.line);
                    self.pos += 1;
                }
                other => {
                    self.push(Tok::Op(other), self.line);
                    self.pos += 1;
                }
            }
        }
        if !self.depth.is_empty() {
            return Err(LexError { line: self.line, reason: "unclosed bracket" });
        }
        Ok(self.out)
    }

    fn string(&mut self, prefix: &str) -> Result<(), LexError> {
        let lower = prefix.to_ascii_lowercase();
        let raw = lower.contains('r');
        let fstring = lower.contains('f');
        let quote = self.peek(0).expect("caller saw a quote");
        let triple = self.peek(1) == Some(quote) && self.peek(2) == Some(quote);
        let start_line = self.line;
        self.pos += if triple { 3 } else { 1 };
        let mut text = String::new();
        loop {
            let Some(c) = self.peek(0) else {
                return Err(LexError { line: start_line, reason: "unterminated string" });
            };
            if c == '\\' {
                if let Some(next) = self.peek(1) {
                    if next == '\n' {
                        self.line += 1;
                    }
                    if raw {
                        text.push('\\');
                    }
                    text.push(next);
                    self.pos += 2;
                    continue;
                }
            }
            if c == quote {
                if !triple {
                    self.pos += 1;
                    break;
                }
                if self.peek(1) == Some(quote) && self.peek(2) == Some(quote) {
                    self.pos += 3;
                    break;
                }
            }
            if c == '\n' {
                if !triple {
                    return Err(LexError { line: start_line, reason: "unterminated string" });
                }
                self.line += 1;
            }
            text.push(c);
            self.pos += 1;
        }
        if fstring {
            let (static_prefix, expressions) = split_fstring(&text).ok_or(LexError {
                line: start_line,
                reason: "unbalanced f-string field",
            })?;
            self.push(Tok::Str { text: static_prefix, fstring: true }, start_line);
            for expr in expressions {
                let inner = Lexer::new(&expr, start_line).run()?;
                self.out.extend(inner.into_iter().filter(|t| t.tok != Tok::Newline));
            }
        } else {
            self.push(Tok::Str { text, fstring: false }, start_line);
        }
        Ok(())
    }
}

/// Static text before the first replacement field, and the field sources.
fn split_fstring(body: &str) -> Option<(String, Vec<String>)> {
    let chars: Vec<char> = body.chars().collect();
    let mut prefix = String::new();
    let mut in_prefix = true;
    let mut fields = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '{' if chars.get(i + 1) == Some(&'{') => {
                if in_prefix {
                    prefix.push('{');
                }
                i += 2;
            }
            '}' if chars.get(i + 1) == Some(&'}') => {
                if in_prefix {
                    prefix.push('}');
                }
                i += 2;
            }
            '{' => {
                in_prefix = false;
                let mut depth = 1;
                let start = i + 1;
                i += 1;
                while i < chars.len() && depth > 0 {
                    match chars[i] {
                        '{' | '[' | '(' => depth += 1,
                        '}' | ']' | ')' => depth -= 1,
                        _ => {}
                    }
                    i += 1;
                }
                if depth != 0 {
                    return None;
                }
                let field: String = chars[start..i - 1].iter().collect();
                // drop a trailing format spec / conversion
                let mut expr_end = field.len();
                let mut nest = 0i32;
                for (j, c) in field.char_indices() {
                    match c {
                        '(' | '[' | '{' => nest += 1,
                        ')' | ']' | '}' => nest -= 1,
                        '!' | ':' if nest == 0 && !field[j..].starts_with("!=") => {
                            expr_end = j;
                            break;
                        }
                        _ => {}
                    }
                }
                fields.push(field[..expr_end].to_string());
            }
            '}' => return None,
            c => {
                if in_prefix {
                    prefix.push(c);
                }
                i += 1;
            }
        }
    }
    Some((prefix, fields))
}

fn excerpt(lines: &[&str], line: usize) -> String {
    let text = lines.get(line.wrapping_sub(1)).map_or("", |l| l.trim());
    let mut out: String = text.chars().take(120).collect();
    if text.chars().count() > 120 {
        out.push_str("...");
    }
    out
}

const PATH_KEYWORDS: &[&str] = &["path_or_buf", "fname", "path", "buf", "excel_writer", "file", "filename"];

/// Vets script source against the rule set.
pub fn guard_code(code: &str, config: &GuardConfig) -> GuardReport {
    let lines: Vec<&str> = code.lines().collect();
    let tokens = match Lexer::new(code, 1).run() {
        Ok(tokens) => tokens,
        Err(err) => {
            return GuardReport::from_violations(alloc::vec![Violation {
                rule: Rule::Parse,
                line: err.line,
                excerpt: format!("{}: {}", err.reason, excerpt(&lines, err.line)),
            }]);
        }
    };
    let mut violations = Vec::new();
    let mut flag = |rule: Rule, line: usize| violations.push(Violation { rule, line, excerpt: excerpt(&lines, line) });
    let has = |list: &[String], name: &str| list.iter().any(|n| n == name);

    // simple `name = "literal"` bindings, tracked in order
    let mut bindings: BTreeMap<String, Option<(String, bool)>> = BTreeMap::new();

    for (i, token) in tokens.iter().enumerate() {
        let prev = i.checked_sub(1).map(|p| &tokens[p].tok);
        let next = tokens.get(i + 1).map(|t| &t.tok);
        let after_dot = prev == Some(&Tok::Op('.'));
        let called = next == Some(&Tok::Op('('));
        let Tok::Name(name) = &token.tok else { continue };

        // assignment tracking: start of logical line, `name = <str>` then end
        let line_start = prev.is_none_or(|p| *p == Tok::Newline || *p == Tok::Op(';'));
        if line_start && next == Some(&Tok::Op('=')) && tokens.get(i + 2).is_some_and(|t| t.tok != Tok::Op('=')) {
            let value = match (tokens.get(i + 2).map(|t| &t.tok), tokens.get(i + 3).map(|t| &t.tok)) {
                (Some(Tok::Str { text, fstring }), None | Some(Tok::Newline) | Some(Tok::Op(';'))) => {
                    Some((text.clone(), *fstring))
                }
                _ => None,
            };
            bindings.insert(name.clone(), value);
        }

        if name == "import" || name == "__import__" || name == "importlib" {
            flag(Rule::R1, token.line);
            continue;
        }
        if !after_dot && has(&config.module_names, name) && !has(&config.aliases, name) {
            flag(Rule::R2, token.line);
        }
        let dunder = name.len() > 4 && name.starts_with("__") && name.ends_with("__");
        if has(&config.deny_names, name) || (dunder && name != "__name__") {
            flag(Rule::R4, token.line);
        }
        if called && has(&config.display_calls, name) && (after_dot || name == "display") {
            flag(Rule::R5, token.line);
        }
        if after_dot && called && has(&config.writer_calls, name) && !write_target_ok(&tokens[i + 2..], &bindings, &config.output_prefix) {
            flag(Rule::R3, token.line);
        }
    }
    GuardReport::from_violations(violations)
}

/// Checks the path argument of a writer call. `args` starts just after `(`.
fn write_target_ok(args: &[Token], bindings: &BTreeMap<String, Option<(String, bool)>>, prefix: &str) -> bool {
    // split top-level arguments up to the matching `)`
    let mut depth = 0usize;
    let mut arguments: Vec<&[Token]> = Vec::new();
    let mut start = 0;
    let mut end = args.len();
    for (j, t) in args.iter().enumerate() {
        match t.tok {
            Tok::Op('(') | Tok::Op('[') | Tok::Op('{') => depth += 1,
            Tok::Op(')') if depth == 0 => {
                end = j;
                break;
            }
            Tok::Op(')') | Tok::Op(']') | Tok::Op('}') => depth -= 1,
            Tok::Op(',') if depth == 0 => {
                arguments.push(&args[start..j]);
                start = j + 1;
            }
            _ => {}
        }
    }
    if start < end {
        arguments.push(&args[start..end]);
    }
    let keyword = |arg: &[Token]| match (arg.first().map(|t| &t.tok), arg.get(1).map(|t| &t.tok)) {
        (Some(Tok::Name(k)), Some(Tok::Op('='))) if arg.get(2).is_none_or(|t| t.tok != Tok::Op('=')) => {
            Some(k.clone())
        }
        _ => None,
    };
    let target: Option<&[Token]> = arguments
        .iter()
        .find(|a| keyword(a).is_some_and(|k| PATH_KEYWORDS.contains(&k.as_str())))
        .map(|a| &a[2..])
        .or_else(|| arguments.first().copied().filter(|a| keyword(a).is_none()));
    let Some(target) = target else {
        // no path: the call returns its output instead of writing
        return true;
    };
    let dotted = target.iter().any(|t| matches!(&t.tok, Tok::Str { text, .. } if text.contains("..")));
    if dotted {
        return false;
    }
    let head = match target.first().map(|t| &t.tok) {
        Some(Tok::Str { text, .. }) => Some(text.clone()),
        Some(Tok::Name(name)) => bindings.get(name).cloned().flatten().map(|(text, _)| text),
        _ => None,
    };
    head.is_some_and(|path| path.starts_with(prefix) && !path.contains(".."))
}

/// Generated analysis as decoded from the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptArtifact {
    pub code: String,
    #[serde(default)]
    pub files: Vec<String>,
    #[serde(default)]
    pub assumptions: Vec<String>,
    #[serde(default)]
    pub feedback: Vec<String>,
}

/// Vets the code and the declared output files.
pub fn guard_script(artifact: &ScriptArtifact, config: &GuardConfig) -> GuardReport {
    let mut report = guard_code(&artifact.code, config);
    for file in &artifact.files {
        if !file.starts_with(&config.output_prefix) || file.contains("..") {
            report.violations.push(Violation { rule: Rule::R3, line: 0, excerpt: format!("declared file {file}") });
        }
    }
    GuardReport::from_violations(report.violations)
}

/// A script whose exact bytes passed the guard. The only way to obtain one
/// is [`VettedScript::vet`], so execution APIs taking it cannot run
/// unvetted code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VettedScript {
    artifact: ScriptArtifact,
    report: GuardReport,
}

impl VettedScript {
    pub fn vet(artifact: ScriptArtifact, config: &GuardConfig) -> Result<VettedScript, GuardReport> {
        let report = guard_script(&artifact, config);
        if report.passed() {
            Ok(VettedScript { artifact, report })
        } else {
            Err(report)
        }
    }

    pub fn code(&self) -> &str {
        &self.artifact.code
    }

    pub fn files(&self) -> &[String] {
        &self.artifact.files
    }

    pub fn artifact(&self) -> &ScriptArtifact {
        &self.artifact
    }

    pub fn report(&self) -> &GuardReport {
        &self.report
    }
}
