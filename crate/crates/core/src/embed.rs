//! Static word/phrase embeddings in the plain word-vector text format.
//!
//! Every stored vector is L2-normalised at load time, so inner products are
//! cosine similarities and a fixed threshold means the same thing for every
//! pair.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("line {line}: expected dimension {expected}, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("embedding table contains no usable vectors")]
    EmptyTable,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    dropped_zero: usize,
}

impl EmbeddingTable {
    /// Parses `token v1 ... vd` lines. A leading `count dim` header line is
    /// accepted and its dimension enforced. Zero vectors are dropped and
    /// counted. Keys are case-folded; the first occurrence of a key wins.
    pub fn load<R: Read>(src: R) -> Result<Self, EmbedError> {
        let mut dim: Option<usize> = None;
        let mut vectors = HashMap::new();
        let mut dropped_zero = 0;
        for (i, line) in BufReader::new(src).lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if line_no == 1 && fields.len() == 2 {
                if let (Ok(_), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    if d == 0 {
                        return Err(EmbedError::Malformed { line: 1, reason: "header dimension is zero".into() });
                    }
                    dim = Some(d);
                    continue;
                }
            }
            let token = fields[0];
            let values = fields[1..]
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EmbedError::Malformed { line: line_no, reason: e.to_string() })?;
            if values.is_empty() {
                return Err(EmbedError::Malformed { line: line_no, reason: "token without vector".into() });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(EmbedError::Malformed { line: line_no, reason: "non-finite component".into() });
            }
            match dim {
                Some(d) if d != values.len() => {
                    return Err(EmbedError::DimensionMismatch { line: line_no, expected: d, found: values.len() })
                }
                None => dim = Some(values.len()),
                _ => {}
            }
            match normalized(values) {
                Some(v) => {
                    vectors.entry(token.to_lowercase()).or_insert(v);
                }
                None => dropped_zero += 1,
            }
        }
        if dropped_zero > 0 {
            log::warn!("dropped {dropped_zero} zero-norm embedding rows");
        }
        match dim {
            Some(dim) if !vectors.is_empty() => Ok(Self { dim, vectors, dropped_zero }),
            _ => Err(EmbedError::EmptyTable),
        }
    }

    /// Builds a table from in-memory rows; rows are normalised like file rows.
    pub fn from_rows<'a, I>(rows: I) -> Result<Self, EmbedError>
    where
        I: IntoIterator<Item = (&'a str, Vec<f64>)>,
    {
        let mut text = String::new();
        for (token, v) in rows {
            text.push_str(token);
            for x in v {
                text.push(' ');
                text.push_str(&format!("{x:e}"));
            }
            text.push('\n');
        }
        Self::load(text.as_bytes())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dropped_zero(&self) -> usize {
        self.dropped_zero
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(&token.to_lowercase()).map(Vec::as_slice)
    }

    /// Vector for a phrase: the underscore-joined key if present, otherwise
    /// the normalised mean of the known constituent tokens.
    pub fn embed_phrase<S: AsRef<str>>(&self, tokens: &[S]) -> Option<Vec<f64>> {
        if tokens.is_empty() {
            return None;
        }
        let joined = tokens.iter().map(|t| t.as_ref()).collect::<Vec<_>>().join("_");
        if let Some(v) = self.get(&joined) {
            return Some(v.to_vec());
        }
        let mut sum = vec![0.0; self.dim];
        let mut known = 0;
        for t in tokens {
            if let Some(v) = self.get(t.as_ref()) {
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                known += 1;
            }
        }
        if known == 0 {
            return None;
        }
        normalized(sum)
    }
}

fn normalized(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
