//! Plain-text matrix files: a line `ORPT N` followed by `N` rows of `N`
//! space-separated integers.

use std::path::Path;

use orpt_core::OrptMatrix;

use crate::error::{OrptError, Result};

/// An integer matrix read back from text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextMatrix {
    pub size: usize,
    /// Row-major entries.
    pub entries: Vec<i64>,
}

impl TextMatrix {
    pub fn column(&self, c: usize) -> Vec<i64> {
        (0..self.size).map(|r| self.entries[r * self.size + c]).collect()
    }
}

impl From<&OrptMatrix> for TextMatrix {
    fn from(m: &OrptMatrix) -> Self {
        TextMatrix {
            size: m.size(),
            entries: m.entries().to_vec(),
        }
    }
}

pub fn to_text(m: &OrptMatrix) -> String {
    m.to_string()
}

pub fn write_matrix(path: &Path, m: &OrptMatrix) -> Result<()> {
    std::fs::write(path, to_text(m)).map_err(|e| OrptError::io(path, e))
}

/// Parses matrix text. Offsets in errors are byte positions of the
/// offending line.
pub fn parse_matrix(path: &Path, text: &str) -> Result<TextMatrix> {
    let mut offset = 0u64;
    let mut lines = text.split_inclusive('\n').map(|l| {
        let at = offset;
        offset += l.len() as u64;
        (at, l.trim_end_matches(['\n', '\r']))
    });
    let (_, head) = lines.next().ok_or_else(|| OrptError::format(path, 0, "empty file"))?;
    let size: usize = head
        .strip_prefix("ORPT ")
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| OrptError::format(path, 0, format!("bad header line `{head}`")))?;
    let mut entries = Vec::with_capacity(size * size);
    for row in 0..size {
        let (at, line) = lines
            .next()
            .ok_or_else(|| OrptError::format(path, text.len() as u64, format!("missing row {row}")))?;
        let before = entries.len();
        for tok in line.split_whitespace() {
            let v = tok
                .parse::<i64>()
                .map_err(|_| OrptError::format(path, at, format!("row {row}: bad integer `{tok}`")))?;
            entries.push(v);
        }
        if entries.len() - before != size {
            return Err(OrptError::format(
                path,
                at,
                format!("row {row} has {} entries, expected {size}", entries.len() - before),
            ));
        }
    }
    if let Some((at, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(OrptError::format(path, at, format!("trailing content `{extra}`")));
    }
    Ok(TextMatrix { size, entries })
}

pub fn read_matrix(path: &Path) -> Result<TextMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| OrptError::io(path, e))?;
    parse_matrix(path, &text)
}
