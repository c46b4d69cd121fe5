//! 2×2 tables with supplemental margins.
//!
//! The nine observed cells are always handled in the same order:
//! the four complete cells row-major, the two row margins (second outcome
//! missing), the two column margins (first outcome missing) and the
//! doubly-missing count.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ParseError;

/// Canonical cell names, in positional order.
pub const CELL_NAMES: [&str; 9] = [
    "n00_11", "n00_12", "n00_21", "n00_22", "n01_1p", "n01_2p", "n10_p1", "n10_p2", "n11_pp",
];

/// Observed counts of a 2×2 table with supplemental margins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservedTable {
    pub n00_11: u64,
    pub n00_12: u64,
    pub n00_21: u64,
    pub n00_22: u64,
    pub n01_1p: u64,
    pub n01_2p: u64,
    pub n10_p1: u64,
    pub n10_p2: u64,
    pub n11_pp: u64,
}

impl ObservedTable {
    /// Builds a table from counts in positional order. Rejects all-zero input.
    pub fn from_counts(counts: [u64; 9]) -> Result<Self, ParseError> {
        let t = Self::from_array_unchecked(counts);
        if t.total() == 0 {
            return Err(ParseError::Empty);
        }
        Ok(t)
    }

    pub(crate) fn from_array_unchecked(c: [u64; 9]) -> Self {
        Self {
            n00_11: c[0],
            n00_12: c[1],
            n00_21: c[2],
            n00_22: c[3],
            n01_1p: c[4],
            n01_2p: c[5],
            n10_p1: c[6],
            n10_p2: c[7],
            n11_pp: c[8],
        }
    }

    /// The nine counts in positional order.
    pub fn counts(&self) -> [u64; 9] {
        [
            self.n00_11,
            self.n00_12,
            self.n00_21,
            self.n00_22,
            self.n01_1p,
            self.n01_2p,
            self.n10_p1,
            self.n10_p2,
            self.n11_pp,
        ]
    }

    pub fn counts_f64(&self) -> [f64; 9] {
        self.counts().map(|c| c as f64)
    }

    /// Total sample size n.
    pub fn total(&self) -> u64 {
        self.counts().iter().sum()
    }

    /// Complete cells as a 2×2 array indexed `[i][j]`.
    pub fn complete(&self) -> [[f64; 2]; 2] {
        [
            [self.n00_11 as f64, self.n00_12 as f64],
            [self.n00_21 as f64, self.n00_22 as f64],
        ]
    }

    pub fn complete_total(&self) -> u64 {
        self.n00_11 + self.n00_12 + self.n00_21 + self.n00_22
    }

    /// Row supplemental margins `n01_{i+}`.
    pub fn row_margins(&self) -> [f64; 2] {
        [self.n01_1p as f64, self.n01_2p as f64]
    }

    /// Column supplemental margins `n10_{+j}`.
    pub fn col_margins(&self) -> [f64; 2] {
        [self.n10_p1 as f64, self.n10_p2 as f64]
    }

    pub fn both_missing(&self) -> f64 {
        self.n11_pp as f64
    }

    /// Parses a table in the given format.
    pub fn parse(source: &str, format: TableFormat) -> Result<Self, ParseError> {
        match format {
            TableFormat::Csv => parse_csv(source),
            TableFormat::Json => parse_json(source),
        }
    }

    /// Serializes to the canonical text of the given format. Parsing the
    /// result yields the same table.
    pub fn to_text(&self, format: TableFormat) -> String {
        match format {
            TableFormat::Csv => {
                let values: Vec<String> = self.counts().iter().map(u64::to_string).collect();
                format!("{}\n{}\n", CELL_NAMES.join(","), values.join(","))
            }
            TableFormat::Json => serde_json::to_string(self).expect("plain struct serializes"),
        }
    }
}

impl fmt::Display for ObservedTable {
    /// Renders the table in its 3×3 layout.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>10} {:>8} {:>8} {:>8}", "", "Y2=1", "Y2=2", "Y2=?")?;
        writeln!(
            f,
            "{:>10} {:>8} {:>8} {:>8}",
            "Y1=1", self.n00_11, self.n00_12, self.n01_1p
        )?;
        writeln!(
            f,
            "{:>10} {:>8} {:>8} {:>8}",
            "Y1=2", self.n00_21, self.n00_22, self.n01_2p
        )?;
        write!(
            f,
            "{:>10} {:>8} {:>8} {:>8}",
            "Y1=?", self.n10_p1, self.n10_p2, self.n11_pp
        )
    }
}

/// On-disk table formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    /// Guesses a format from a file extension, defaulting to CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => TableFormat::Json,
            _ => TableFormat::Csv,
        }
    }
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            other => Err(format!("unknown table format {other:?}")),
        }
    }
}

fn parse_count(field: &'static str, raw: &str) -> Result<u64, ParseError> {
    let raw = raw.trim();
    let invalid = |reason: &str| ParseError::InvalidCount {
        field,
        value: raw.to_string(),
        reason: reason.to_string(),
    };
    if raw.starts_with('-') {
        return Err(invalid("negative count"));
    }
    raw.parse::<u64>().map_err(|e| invalid(&e.to_string()))
}

fn field_index(name: &str) -> Option<usize> {
    CELL_NAMES.iter().position(|c| *c == name)
}

fn parse_csv(source: &str) -> Result<ObservedTable, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| ParseError::Csv(e.to_string()))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(record);
    }

    let (order, data) = match rows.as_slice() {
        [] => return Err(ParseError::Csv("no data row".into())),
        [data] => ((0..9).collect::<Vec<_>>(), data),
        [header, data] => {
            let mut order = Vec::with_capacity(header.len());
            for name in header.iter() {
                let idx = field_index(name).ok_or_else(|| ParseError::UnknownField(name.into()))?;
                if order.contains(&idx) {
                    return Err(ParseError::Csv(format!("duplicate column {name:?}")));
                }
                order.push(idx);
            }
            if let Some(missing) = (0..9).find(|i| !order.contains(i)) {
                return Err(ParseError::MissingField(CELL_NAMES[missing]));
            }
            (order, data)
        }
        more => {
            return Err(ParseError::Csv(format!(
                "expected one data row and an optional header, found {} rows",
                more.len()
            )))
        }
    };

    if data.len() != 9 {
        return Err(ParseError::Arity(data.len()));
    }
    if order.len() != 9 {
        return Err(ParseError::Arity(order.len()));
    }
    let mut counts = [0u64; 9];
    for (raw, &idx) in data.iter().zip(&order) {
        counts[idx] = parse_count(CELL_NAMES[idx], raw)?;
    }
    ObservedTable::from_counts(counts)
}

fn parse_json(source: &str) -> Result<ObservedTable, ParseError> {
    let value: serde_json::Value = serde_json::from_str(source).map_err(|e| ParseError::Json(e.to_string()))?;
    let counts = match value {
        serde_json::Value::Object(map) => {
            if let Some(unknown) = map.keys().find(|k| field_index(k).is_none()) {
                return Err(ParseError::UnknownField(unknown.clone()));
            }
            let mut counts = [0u64; 9];
            for (idx, name) in CELL_NAMES.iter().enumerate() {
                let v = map.get(*name).ok_or(ParseError::MissingField(name))?;
                counts[idx] = json_count(name, v)?;
            }
            counts
        }
        serde_json::Value::Array(items) => {
            if items.len() != 9 {
                return Err(ParseError::Arity(items.len()));
            }
            let mut counts = [0u64; 9];
            for (idx, v) in items.iter().enumerate() {
                counts[idx] = json_count(CELL_NAMES[idx], v)?;
            }
            counts
        }
        _ => return Err(ParseError::Json("expected an object with nine counts".into())),
    };
    ObservedTable::from_counts(counts)
}

fn json_count(field: &'static str, v: &serde_json::Value) -> Result<u64, ParseError> {
    match v {
        serde_json::Value::Number(n) => parse_count(field, &n.to_string()),
        other => Err(ParseError::InvalidCount {
            field,
            value: other.to_string(),
            reason: "not an integer".into(),
        }),
    }
}

/// Probabilities of the nine observed cells, in positional order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellProbabilities(pub [f64; 9]);

impl CellProbabilities {
    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// True if every entry is non-negative and the total is within `tol` of one.
    pub fn is_normalized(&self, tol: f64) -> bool {
        self.0.iter().all(|&p| p >= 0.0) && (self.sum() - 1.0).abs() <= tol
    }

    /// Expected frequencies `n * pi`.
    pub fn scaled(&self, n: f64) -> [f64; 9] {
        self.0.map(|p| p * n)
    }
}
