//! Cocycle files and command-line list syntax.
//!
//! A cocycle file is a JSON object `{"d": 2, "k": 2, "matrices": [...]}`
//! where `matrices` holds `k` square `d × d` matrices given row by row.

use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::shift::OneStepCocycle;

#[derive(Debug, Serialize)]
pub struct CocycleFile {
    pub d: usize,
    pub k: usize,
    pub matrices: Vec<Vec<Vec<f64>>>,
}

struct Rows(Vec<Vec<f64>>);

impl<'de> Deserialize<'de> for Rows {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(de::Error::custom(format!(
                "ragged matrix: row {} has {} entries, expected {n}",
                i + 1,
                r.len()
            )));
        }
        Ok(Rows(rows))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    d: usize,
    k: usize,
    matrices: Vec<Rows>,
}

impl From<&OneStepCocycle> for CocycleFile {
    fn from(c: &OneStepCocycle) -> Self {
        CocycleFile {
            d: c.dim(),
            k: c.k(),
            matrices: c.generators().iter().map(Matrix::rows).collect(),
        }
    }
}

impl fmt::Display for CocycleFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = serde_json::to_string_pretty(self).map_err(|_| fmt::Error)?;
        f.write_str(&text)
    }
}

/// Parses and validates a cocycle file.
pub fn parse_cocycle_json(text: &str) -> Result<OneStepCocycle> {
    let raw: RawFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
    })?;
    if raw.d == 0 {
        return Err(Error::Validation("d must be at least 1".into()));
    }
    if raw.matrices.len() != raw.k {
        return Err(Error::Validation(format!(
            "k = {} but {} matrices were given",
            raw.k,
            raw.matrices.len()
        )));
    }
    let mut generators = Vec::with_capacity(raw.k);
    for (i, Rows(rows)) in raw.matrices.into_iter().enumerate() {
        if rows.len() != raw.d {
            return Err(Error::Validation(format!(
                "generator {} is {}x{}, expected d = {}",
                i + 1,
                rows.len(),
                rows.len(),
                raw.d
            )));
        }
        generators.push(Matrix::from_rows(&rows)?);
    }
    OneStepCocycle::new(generators)
}

pub fn load_cocycle(path: impl AsRef<Path>) -> Result<OneStepCocycle> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_cocycle_json(&text)
}

fn split_list(text: &str) -> impl Iterator<Item = &str> {
    text.split(',').map(str::trim)
}

/// Comma-separated reals, e.g. `1,-0.5,2e-3`.
pub fn parse_real_list(text: &str) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Err(Error::Input("empty list".into()));
    }
    split_list(text)
        .map(|s| match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::Input(format!("'{s}' is not a finite real number"))),
        })
        .collect()
}

/// Comma-separated nonnegative integers; `a..b` expands to `a, a+1, …, b`.
pub fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    if text.trim().is_empty() {
        return Err(Error::Input("empty list".into()));
    }
    let bad = |s: &str| Error::Input(format!("'{s}' is not a nonnegative integer or range"));
    let mut out = Vec::new();
    for s in split_list(text) {
        if let Some((a, b)) = s.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| bad(s))?;
            let b: usize = b.trim().parse().map_err(|_| bad(s))?;
            if a > b || b - a > 1 << 20 {
                return Err(bad(s));
            }
            out.extend(a..=b);
        } else {
            out.push(s.parse().map_err(|_| bad(s))?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIAG_PAIR: &str = r#"{"d": 2, "k": 2, "matrices": [[[4, 0], [0, 1]], [[1, 0], [0, 4]]]}"#;

    #[test]
    fn loads_diag_pair() {
        let c = parse_cocycle_json(DIAG_PAIR).unwrap();
        assert_eq!((c.k(), c.dim()), (2, 2));
        assert!((c.max_log_norm() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn singular_generator_is_named() {
        let text = r#"{"d": 2, "k": 2, "matrices": [[[1, 0], [0, 1]], [[1, 2], [2, 4]]]}"#;
        let err = parse_cocycle_json(text).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("generator 2 is singular"));
    }

    #[test]
    fn ragged_rows_are_parse_errors() {
        let text = "{\"d\": 2, \"k\": 1,\n \"matrices\": [\n [[1, 0], [0]] ]}";
        match parse_cocycle_json(text).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("ragged"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_cocycle_json("{\"d\": 2,\n \"k\": }").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn shape_mismatches() {
        let wrong_k = r#"{"d": 2, "k": 3, "matrices": [[[1, 0], [0, 1]]]}"#;
        assert!(matches!(parse_cocycle_json(wrong_k), Err(Error::Validation(_))));
        let wrong_d = r#"{"d": 3, "k": 1, "matrices": [[[1, 0], [0, 1]]]}"#;
        assert!(matches!(parse_cocycle_json(wrong_d), Err(Error::Validation(_))));
    }

    #[test]
    fn file_round_trip() {
        let c = parse_cocycle_json(DIAG_PAIR).unwrap();
        let again = parse_cocycle_json(&CocycleFile::from(&c).to_string()).unwrap();
        assert_eq!(c.generators(), again.generators());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_real_list("1, -0.5,2e-3").unwrap(), vec![1.0, -0.5, 0.002]);
        assert!(parse_real_list("1,x").is_err());
        assert!(parse_real_list("inf").is_err());
        assert_eq!(parse_usize_list("8,10..12").unwrap(), vec![8, 10, 11, 12]);
        assert!(parse_usize_list("3..1").is_err());
        assert!(parse_usize_list("-1").is_err());
    }
}
