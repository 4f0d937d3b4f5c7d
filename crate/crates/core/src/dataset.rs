//! Line-delimited JSON datasets.
//!
//! Classification records are `{id, text, label}`; QA records are
//! `{id, question, answer, label}` and are joined as
//! `question [SEP] answer` for localization and replacement.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::localize::SEP_MARKER;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    #[default]
    Classification,
    Qa,
}

/// Task label; integer and string labels are kept as written.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Text(String),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(i) => write!(f, "{i}"),
            Label::Text(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledText {
    pub id: String,
    pub text: String,
    pub label: Label,
}

impl LabeledText {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: impl Into<Label>) -> Self {
        Self { id: id.into(), text: text.into(), label: label.into() }
    }
}

/// Joins a QA pair into one text.
pub fn join_qa(question: &str, answer: &str) -> String {
    format!("{question} {SEP_MARKER} {answer}")
}

/// Inverse of [`join_qa`]. Texts without the marker come back as a question
/// with an empty answer.
pub fn split_qa(text: &str) -> (String, String) {
    let sep = format!(" {SEP_MARKER} ");
    match text.split_once(&sep) {
        Some((q, a)) => (q.to_string(), a.to_string()),
        None => (text.to_string(), String::new()),
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub records: Vec<LabeledText>,
    /// Input lines as read, used to reproduce originals verbatim.
    pub raw: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn read<R: Read>(src: R, mode: InputMode) -> Result<Self, DataError> {
        let mut out = Dataset::default();
        let mut seen = HashSet::new();
        for (i, line) in BufReader::new(src).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = parse_record(&line, mode).map_err(|reason| DataError::Malformed { line: i + 1, reason })?;
            if !seen.insert(rec.id.clone()) {
                return Err(DataError::DuplicateId(rec.id));
            }
            out.raw.push(line.trim().to_string());
            out.records.push(rec);
        }
        Ok(out)
    }
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value, String> {
    obj.get(name).ok_or_else(|| format!("missing field `{name}`"))
}

fn string_field(obj: &Map<String, Value>, name: &str) -> Result<String, String> {
    match field(obj, name)? {
        Value::String(s) => Ok(s.clone()),
        _ => Err(format!("field `{name}` must be a string")),
    }
}

fn parse_record(line: &str, mode: InputMode) -> Result<LabeledText, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let obj = value.as_object().ok_or("record is not a JSON object")?;
    let id = match field(obj, "id")? {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return Err("field `id` must be a string or number".into()),
    };
    let label = match field(obj, "label")? {
        Value::String(s) => Label::Text(s.clone()),
        Value::Number(n) => Label::Int(n.as_i64().ok_or("numeric label must be an integer")?),
        _ => return Err("field `label` must be a string or integer".into()),
    };
    let text = match mode {
        InputMode::Classification => string_field(obj, "text")?,
        InputMode::Qa => join_qa(&string_field(obj, "question")?, &string_field(obj, "answer")?),
    };
    Ok(LabeledText { id, text, label })
}
