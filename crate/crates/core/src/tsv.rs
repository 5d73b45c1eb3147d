//! Minimal tab-separated table reader shared by the file loaders.

use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct TsvError {
    pub line: usize,
    pub message: String,
}

/// One data row with its 1-based source line number.
pub struct Row<'a> {
    pub line: usize,
    pub fields: Vec<&'a str>,
}

impl<'a> Row<'a> {
    pub fn get(&self, idx: usize, name: &str) -> Result<&'a str, TsvError> {
        self.fields.get(idx).copied().ok_or_else(|| TsvError {
            line: self.line,
            message: format!("missing column `{name}`"),
        })
    }

    pub fn parse<T: FromStr>(&self, idx: usize, name: &str) -> Result<T, TsvError> {
        let raw = self.get(idx, name)?;
        raw.trim().parse().map_err(|_| TsvError {
            line: self.line,
            message: format!("bad value `{raw}` in column `{name}`"),
        })
    }
}

/// Splits `text` into rows, skipping blank lines, `#` comments and the header
/// line, which must start with `header_first`.
pub fn rows<'a>(text: &'a str, header_first: &str) -> Result<Vec<Row<'a>>, TsvError> {
    let mut out = Vec::new();
    let mut seen_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            seen_header = true;
            if line.split('\t').next().map(str::trim) == Some(header_first) {
                continue;
            }
            return Err(TsvError {
                line: i + 1,
                message: format!("expected header starting with `{header_first}`"),
            });
        }
        out.push(Row {
            line: i + 1,
            fields: line.split('\t').collect(),
        });
    }
    Ok(out)
}
