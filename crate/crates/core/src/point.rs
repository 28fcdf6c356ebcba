//! Command-line vectors: `"0,0,1"` positionally, or `"q1=1, pth=1e-3"` by
//! coordinate name with unspecified entries zero.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PointError {
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("`{0}` is not a finite number")]
    Number(String),
    #[error("unknown coordinate `{0}`")]
    UnknownName(String),
    #[error("coordinate `{0}` given twice")]
    Duplicate(String),
    #[error("cannot mix positional and named entries")]
    Mixed,
}

fn number(s: &str) -> Result<f64, PointError> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(PointError::Number(s.trim().to_string())),
    }
}

/// Comma- or whitespace-separated finite numbers of any length.
pub fn parse_list(text: &str) -> Result<Vec<f64>, PointError> {
    text.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).map(number).collect()
}

/// A point with one entry per name, positional or `name=value`.
pub fn parse_point(text: &str, names: &[String]) -> Result<Vec<f64>, PointError> {
    let entries: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let named = entries.iter().filter(|e| e.contains('=')).count();
    if named == 0 {
        let values = parse_list(text)?;
        if values.len() != names.len() {
            return Err(PointError::Length { expected: names.len(), got: values.len() });
        }
        return Ok(values);
    }
    if named != entries.len() {
        return Err(PointError::Mixed);
    }
    let mut out = vec![0.0; names.len()];
    let mut seen = vec![false; names.len()];
    for e in entries {
        let (name, value) = e.split_once('=').expect("entry is named");
        let name = name.trim();
        let i = names.iter().position(|n| n == name).ok_or_else(|| PointError::UnknownName(name.to_string()))?;
        if seen[i] {
            return Err(PointError::Duplicate(name.to_string()));
        }
        seen[i] = true;
        out[i] = number(value)?;
    }
    Ok(out)
}

/// Coordinate names to indices, for `--freeze`.
pub fn parse_names(text: &str, names: &[String]) -> Result<Vec<usize>, PointError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|n| names.iter().position(|x| x == n).ok_or_else(|| PointError::UnknownName(n.to_string())))
        .collect()
}
