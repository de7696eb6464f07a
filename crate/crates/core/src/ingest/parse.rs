use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{IngestError, RawItem};

/// Raw corpus encodings accepted by [`parse_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl std::str::FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(Self::Jsonl),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown corpus format '{other}' (expected jsonl or csv)")),
        }
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    text: String,
    #[serde(default)]
    count: Option<i64>,
}

pub fn parse_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<RawItem>, IngestError> {
    let content = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let items = match format {
        CorpusFormat::Jsonl => parse_jsonl(&content)?,
        CorpusFormat::Csv => parse_csv(&content)?,
    };
    if items.is_empty() {
        return Err(IngestError::Empty(path.to_path_buf()));
    }
    Ok(items)
}

pub fn parse_jsonl(content: &str) -> Result<Vec<RawItem>, IngestError> {
    let mut items = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonRecord = serde_json::from_str(line).map_err(|e| IngestError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        items.push(make_item(record.text, record.count, line_no)?);
    }
    Ok(items)
}

pub fn parse_csv(content: &str) -> Result<Vec<RawItem>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(content.as_bytes());
    let mut items = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IngestError::Parse {
            line: e.position().map_or(idx + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line_no = record.position().map_or(idx + 1, |p| p.line() as usize);
        if idx == 0 && is_header(&record) {
            continue;
        }
        if record.len() > 2 {
            return Err(IngestError::Parse {
                line: line_no,
                message: format!("expected 1 or 2 columns, found {}", record.len()),
            });
        }
        let text = record.get(0).unwrap_or_default().to_string();
        let count = match record.get(1).map(str::trim) {
            None | Some("") => None,
            Some(raw) => Some(raw.parse::<i64>().map_err(|e| IngestError::Parse {
                line: line_no,
                message: format!("count '{raw}': {e}"),
            })?),
        };
        items.push(make_item(text, count, line_no)?);
    }
    Ok(items)
}

fn is_header(record: &csv::StringRecord) -> bool {
    let cols: Vec<&str> = record.iter().map(str::trim).collect();
    matches!(cols.as_slice(), ["text"] | ["text", "count"])
}

fn make_item(text: String, count: Option<i64>, line: usize) -> Result<RawItem, IngestError> {
    if text.trim().is_empty() {
        return Err(IngestError::Parse {
            line,
            message: "empty descriptor text".into(),
        });
    }
    let count = match count {
        None => 1,
        Some(c) if c >= 1 => c as u64,
        Some(c) => {
            return Err(IngestError::Parse {
                line,
                message: format!("count must be >= 1, got {c}"),
            })
        }
    };
    Ok(RawItem {
        raw_text: text,
        count,
    })
}
