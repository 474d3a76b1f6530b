//! Sequence and label file formats.
//!
//! * FASTA: lines starting with `>` open a record whose id is the first
//!   word of the header; sequence lines are concatenated with whitespace
//!   removed and upper-cased.
//! * Token files: one sequence per non-empty line, whitespace removed.
//!   Symbols are kept as written.
//! * Label files: one label per line, or CSV rows whose last field is the
//!   label. A first row ending in the field `label` is a header.

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed FASTA at line {line}: {reason}")]
    MalformedFasta { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FastaRecord {
    pub id: String,
    /// Header text after the id.
    pub description: String,
    pub sequence: String,
}

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_fasta_str(text: &str) -> Result<Vec<FastaRecord>, FormatError> {
    let mut records: Vec<FastaRecord> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            let mut parts = header.trim().splitn(2, char::is_whitespace);
            let id = parts.next().unwrap_or("").to_string();
            if id.is_empty() {
                return Err(FormatError::MalformedFasta {
                    line: i + 1,
                    reason: "empty header".into(),
                });
            }
            records.push(FastaRecord {
                id,
                description: parts.next().unwrap_or("").trim().to_string(),
                sequence: String::new(),
            });
        } else {
            let Some(rec) = records.last_mut() else {
                return Err(FormatError::MalformedFasta {
                    line: i + 1,
                    reason: "sequence data before the first header".into(),
                });
            };
            rec.sequence
                .extend(line.chars().filter(|c| !c.is_whitespace()).flat_map(char::to_uppercase));
        }
    }
    if records.is_empty() {
        return Err(FormatError::MalformedFasta {
            line: 0,
            reason: "no records".into(),
        });
    }
    Ok(records)
}

pub fn parse_fasta(path: &Path) -> Result<Vec<FastaRecord>, FormatError> {
    parse_fasta_str(&read_text(path)?)
}

/// Records with sequence lines wrapped at `width` symbols.
pub fn write_fasta(records: &[FastaRecord], width: usize) -> String {
    let mut out = String::new();
    for rec in records {
        out.push('>');
        out.push_str(&rec.id);
        if !rec.description.is_empty() {
            out.push(' ');
            out.push_str(&rec.description);
        }
        out.push('\n');
        let chars: Vec<char> = rec.sequence.chars().collect();
        for chunk in chars.chunks(width.max(1)) {
            out.extend(chunk);
            out.push('\n');
        }
    }
    out
}

pub fn parse_tokens_str(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.chars().filter(|c| !c.is_whitespace()).collect::<String>())
        .filter(|l| !l.is_empty())
        .collect()
}

pub fn is_fasta_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("fa" | "fasta" | "fna" | "fas")
    )
}

/// Sequences from a FASTA or token file; FASTA is recognized by extension
/// or by a leading `>`.
pub fn read_sequences(path: &Path) -> Result<Vec<(String, String)>, FormatError> {
    let text = read_text(path)?;
    if is_fasta_path(path) || text.trim_start().starts_with('>') {
        Ok(parse_fasta_str(&text)?
            .into_iter()
            .map(|r| (r.id, r.sequence))
            .collect())
    } else {
        let lines = parse_tokens_str(&text);
        if lines.is_empty() {
            return Err(FormatError::Invalid(format!("{}: no sequences", path.display())));
        }
        Ok(lines
            .into_iter()
            .enumerate()
            .map(|(i, s)| (format!("seq{}", i + 1), s))
            .collect())
    }
}

pub fn parse_labels_str(text: &str) -> Vec<String> {
    let mut labels: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.rsplit(',').next().unwrap_or("").trim().to_string())
        .collect();
    if labels.first().is_some_and(|l| l.eq_ignore_ascii_case("label")) {
        labels.remove(0);
    }
    labels
}

pub fn read_labels(path: &Path) -> Result<Vec<String>, FormatError> {
    Ok(parse_labels_str(&read_text(path)?))
}
