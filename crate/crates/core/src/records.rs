//! Minimal line-oriented record files: `[section]` headers followed by
//! `key = value` lines, where a value is a quoted string or a number.
//! Used by the `.platform` and `.contracts` formats, which allow repeated
//! sections and repeated keys.

use crate::diag::{Diagnostic, SourceSpan};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Num(f64),
}

impl Value {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            Value::Num(_) => None,
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(n) => Some(*n),
            Value::Str(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Field {
    pub key: String,
    pub value: Value,
    pub span: SourceSpan,
}

#[derive(Debug, Clone)]
pub struct Record {
    pub kind: String,
    pub span: SourceSpan,
    pub fields: Vec<Field>,
}

impl Record {
    pub fn first(&self, key: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.key == key)
    }

    pub fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Field> {
        self.fields.iter().filter(move |f| f.key == key)
    }

    pub fn str_field(&self, key: &str, diags: &mut Vec<Diagnostic>) -> Option<String> {
        match self.first(key) {
            Some(f) => match f.value.as_str() {
                Some(s) => Some(s.to_string()),
                None => {
                    diags.push(Diagnostic::error(
                        f.span.clone(),
                        format!("field `{key}` must be a quoted string"),
                    ));
                    None
                }
            },
            None => {
                diags.push(Diagnostic::error(
                    self.span.clone(),
                    format!("[{}] record is missing field `{key}`", self.kind),
                ));
                None
            }
        }
    }

    pub fn num_field(&self, key: &str, diags: &mut Vec<Diagnostic>) -> Option<f64> {
        match self.first(key) {
            Some(f) => match f.value.as_num() {
                Some(n) => Some(n),
                None => {
                    diags.push(Diagnostic::error(
                        f.span.clone(),
                        format!("field `{key}` must be a number"),
                    ));
                    None
                }
            },
            None => {
                diags.push(Diagnostic::error(
                    self.span.clone(),
                    format!("[{}] record is missing field `{key}`", self.kind),
                ));
                None
            }
        }
    }
}

pub fn parse_records(text: &str, file: &str) -> Result<Vec<Record>, Vec<Diagnostic>> {
    let mut records: Vec<Record> = Vec::new();
    let mut diags = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx as u32 + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let span = SourceSpan::new(file, line_no, 1, raw.len().max(1) as u32);
        if let Some(section) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            records.push(Record {
                kind: section.trim().to_string(),
                span,
                fields: Vec::new(),
            });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            diags.push(Diagnostic::error(
                span,
                "expected `[section]` or `key = value`",
            ));
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim();
        let parsed = if let Some(stripped) = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
        {
            Value::Str(stripped.to_string())
        } else {
            match value.parse::<f64>() {
                Ok(n) => Value::Num(n),
                Err(_) => {
                    diags.push(Diagnostic::error(
                        span,
                        format!("value `{value}` is neither a quoted string nor a number"),
                    ));
                    continue;
                }
            }
        };
        match records.last_mut() {
            Some(rec) => rec.fields.push(Field {
                key,
                value: parsed,
                span,
            }),
            None => diags.push(Diagnostic::error(
                span,
                "field appears before any [section] header",
            )),
        }
    }
    if diags.is_empty() {
        Ok(records)
    } else {
        Err(diags)
    }
}
