//! Prompt templates with named placeholders.
//!
//! Template syntax follows the format-string convention: `{name}` is a
//! placeholder, `{{` and `}}` render as literal braces. A `{` that does not
//! open a well-formed placeholder passes through unchanged. The four
//! built-in templates ship with the crate; custom templates load from plain
//! text files.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use thiserror::Error;

use crate::util::short_hash;

const QUALITY_TEMPLATE: &str = include_str!("../../templates/quality.txt");
const REDUNDANCY_TEMPLATE: &str = include_str!("../../templates/redundancy.txt");
const FACTUALITY_TEMPLATE: &str = include_str!("../../templates/factuality.txt");
const CATEGORY_TEMPLATE: &str = include_str!("../../templates/category.txt");

/// Optional first line of a custom template file: `#template-version: <v>`.
const VERSION_HEADER: &str = "#template-version:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Quality,
    Redundancy,
    Factuality,
    Category,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 4] = [
        TemplateKind::Quality,
        TemplateKind::Redundancy,
        TemplateKind::Factuality,
        TemplateKind::Category,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TemplateKind::Quality => "quality",
            TemplateKind::Redundancy => "redundancy",
            TemplateKind::Factuality => "factuality",
            TemplateKind::Category => "category",
        }
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub kind: TemplateKind,
    pub body: String,
    pub version: String,
}

/// Rendered prompt plus any bindings the template never referenced.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub text: String,
    pub unused_bindings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("missing binding for placeholder {{{0}}}")]
    MissingBinding(String),
    #[error("cannot read template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PromptTemplate {
    /// The built-in default template for a kind.
    pub fn builtin(kind: TemplateKind) -> Self {
        let body = match kind {
            TemplateKind::Quality => QUALITY_TEMPLATE,
            TemplateKind::Redundancy => REDUNDANCY_TEMPLATE,
            TemplateKind::Factuality => FACTUALITY_TEMPLATE,
            TemplateKind::Category => CATEGORY_TEMPLATE,
        };
        Self {
            kind,
            body: body.to_string(),
            version: "default-v1".to_string(),
        }
    }

    /// Load a custom template from a file. The version comes from a
    /// `#template-version:` first line when present, otherwise from a
    /// content digest so distinct bodies never share a version.
    pub fn from_file(kind: TemplateKind, path: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::from_body(kind, &raw))
    }

    pub fn from_body(kind: TemplateKind, raw: &str) -> Self {
        if let Some(first) = raw.lines().next() {
            if let Some(version) = first.strip_prefix(VERSION_HEADER) {
                let body = raw
                    .split_once('\n')
                    .map(|(_, rest)| rest)
                    .unwrap_or("")
                    .to_string();
                return Self {
                    kind,
                    body,
                    version: version.trim().to_string(),
                };
            }
        }
        Self {
            kind,
            body: raw.to_string(),
            version: format!("sha-{}", short_hash(raw)),
        }
    }

    /// Substitute every `{name}` placeholder from `bindings`. Exact
    /// substitution with no other transformation; substituted values are
    /// never re-scanned.
    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<Rendered, TemplateError> {
        let mut out = String::with_capacity(self.body.len());
        let mut used: Vec<&str> = Vec::new();
        let bytes = self.body.as_bytes();
        let mut i = 0usize;
        while i < bytes.len() {
            match bytes[i] {
                b'{' if bytes.get(i + 1) == Some(&b'{') => {
                    out.push('{');
                    i += 2;
                }
                b'}' if bytes.get(i + 1) == Some(&b'}') => {
                    out.push('}');
                    i += 2;
                }
                b'{' => {
                    if let Some(name) = placeholder_at(&self.body, i) {
                        let value = bindings
                            .get(name)
                            .ok_or_else(|| TemplateError::MissingBinding(name.to_string()))?;
                        out.push_str(value);
                        if !used.contains(&name) {
                            used.push(name);
                        }
                        i += name.len() + 2;
                    } else {
                        out.push('{');
                        i += 1;
                    }
                }
                _ => {
                    let ch_len = utf8_len(bytes[i]);
                    out.push_str(&self.body[i..i + ch_len]);
                    i += ch_len;
                }
            }
        }

        let unused_bindings = bindings
            .keys()
            .filter(|k| !used.contains(&k.as_str()))
            .cloned()
            .collect();
        Ok(Rendered {
            text: out,
            unused_bindings,
        })
    }
}

/// The placeholder name opening at byte `start` (which holds `{`), if the
/// braces wrap a bare identifier.
fn placeholder_at(body: &str, start: usize) -> Option<&str> {
    let rest = &body[start + 1..];
    let end = rest.find('}')?;
    let name = &rest[..end];
    let mut chars = name.chars();
    let first = chars.next()?;
    if (first.is_ascii_alphabetic() || first == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    {
        Some(name)
    } else {
        None
    }
}

fn utf8_len(first_byte: u8) -> usize {
    match first_byte {
        b if b < 0x80 => 1,
        b if b >> 5 == 0b110 => 2,
        b if b >> 4 == 0b1110 => 3,
        _ => 4,
    }
}

/// Helper for callers building bindings inline.
pub fn bindings<const N: usize>(pairs: [(&str, &str); N]) -> BTreeMap<String, String> {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// The four templates an evaluation run uses. Defaults are the built-ins;
/// any of them may be swapped for a custom file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub quality: PromptTemplate,
    pub redundancy: PromptTemplate,
    pub factuality: PromptTemplate,
    pub category: PromptTemplate,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            quality: PromptTemplate::builtin(TemplateKind::Quality),
            redundancy: PromptTemplate::builtin(TemplateKind::Redundancy),
            factuality: PromptTemplate::builtin(TemplateKind::Factuality),
            category: PromptTemplate::builtin(TemplateKind::Category),
        }
    }
}

impl TemplateSet {
    pub fn get(&self, kind: TemplateKind) -> &PromptTemplate {
        match kind {
            TemplateKind::Quality => &self.quality,
            TemplateKind::Redundancy => &self.redundancy,
            TemplateKind::Factuality => &self.factuality,
            TemplateKind::Category => &self.category,
        }
    }

    pub fn set(&mut self, template: PromptTemplate) {
        match template.kind {
            TemplateKind::Quality => self.quality = template,
            TemplateKind::Redundancy => self.redundancy = template,
            TemplateKind::Factuality => self.factuality = template,
            TemplateKind::Category => self.category = template,
        }
    }

    /// Template name → version map, journaled with every run.
    pub fn versions(&self) -> BTreeMap<String, String> {
        TemplateKind::ALL
            .into_iter()
            .map(|kind| (kind.name().to_string(), self.get(kind).version.clone()))
            .collect()
    }
}
