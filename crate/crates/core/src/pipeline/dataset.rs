use serde::{Deserialize, Serialize};

/// One dataset line: `{"context": "...", "reference": "..."}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRow {
    pub context: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub line: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    /// Parsed rows with their 1-based line numbers.
    pub rows: Vec<(usize, DatasetRow)>,
    pub malformed: Vec<RowError>,
}

/// Parses JSONL. Blank lines are ignored; bad lines are collected instead
/// of aborting the whole file.
pub fn parse_dataset(text: &str) -> Dataset {
    let mut out = Dataset::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<DatasetRow>(line) {
            Ok(row) => out.rows.push((i + 1, row)),
            Err(e) => out.malformed.push(RowError {
                line: i + 1,
                error: e.to_string(),
            }),
        }
    }
    out
}
