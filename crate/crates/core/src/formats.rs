//! On-disk formats: observation files (JSON) and iteration traces (CSV).
//!
//! ```json
//! { "pairs": [ { "body": [x, y, z], "reference": [x, y, z], "weight": w } ] }
//! ```
//!
//! Trace CSV columns are `iter,loss,grad_norm,q0,q1,q2,q3,min_eig`, floats in
//! 17-significant-digit scientific notation so that they parse back to the
//! same `f64`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error;
use crate::model::{ObservationPair, ObservationSet};
use crate::optim::IterationRecord;

pub const TRACE_HEADER: &str = "iter,loss,grad_norm,q0,q1,q2,q3,min_eig";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },

    #[error("pair {index}: {source}")]
    InvalidPair { index: usize, source: Error },

    #[error(transparent)]
    InvalidSet(Error),
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        // serde_json appends " at line L column C"; keep only the cause.
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        FormatError::Json { line: e.line(), column: e.column(), message }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub body: [f64; 3],
    pub reference: [f64; 3],
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationFile {
    pub pairs: Vec<PairRecord>,
}

impl ObservationFile {
    pub fn from_set(set: &ObservationSet) -> Self {
        let pairs = set
            .pairs()
            .iter()
            .map(|p| PairRecord {
                body: (*p.body()).into(),
                reference: (*p.reference()).into(),
                weight: p.weight(),
            })
            .collect();
        Self { pairs }
    }

    pub fn to_set(&self) -> Result<ObservationSet, FormatError> {
        let pairs = self
            .pairs
            .iter()
            .enumerate()
            .map(|(index, p)| {
                ObservationPair::from_arrays(p.body, p.reference, p.weight)
                    .map_err(|source| FormatError::InvalidPair { index, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        ObservationSet::new(pairs).map_err(FormatError::InvalidSet)
    }
}

pub fn parse_observations(text: &str) -> Result<ObservationSet, FormatError> {
    let file: ObservationFile = serde_json::from_str(text)?;
    file.to_set()
}

pub fn write_observations(set: &ObservationSet) -> String {
    let mut s = serde_json::to_string_pretty(&ObservationFile::from_set(set)).expect("plain data serializes");
    s.push('\n');
    s
}

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trace(trace: &[IterationRecord]) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        let min_eig = r.min_hessian_eig.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.index,
            fmt_f64(r.loss),
            fmt_f64(r.grad_norm),
            fmt_f64(r.q[0]),
            fmt_f64(r.q[1]),
            fmt_f64(r.q[2]),
            fmt_f64(r.q[3]),
            min_eig
        );
    }
    out
}

/// JSON number literal with a fixed number of decimals.
pub fn fixed_decimal_json(x: f64, decimals: usize) -> Box<serde_json::value::RawValue> {
    let text = if x.is_finite() { format!("{x:.decimals$}") } else { "null".to_string() };
    serde_json::value::RawValue::from_string(text).expect("formatted float is valid JSON")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_set, truth_for_seed, SimConfig};

    #[test]
    fn parse_reports_line_numbers() {
        let text = "{\n  \"pairs\": [\n    { \"body\": [0, 0, 1], \"reference\": [0, 0, 1] \n  ]\n}";
        match parse_observations(text) {
            Err(FormatError::Json { line, .. }) => assert!(line >= 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_zero_vector_and_empty_set() {
        let text = r#"{"pairs": [{"body": [0, 0, 0], "reference": [0, 0, 1], "weight": 1}]}"#;
        assert!(matches!(parse_observations(text), Err(FormatError::InvalidPair { index: 0, .. })));
        assert!(matches!(parse_observations(r#"{"pairs": []}"#), Err(FormatError::InvalidSet(Error::EmptySet))));
    }

    #[test]
    fn generated_file_round_trips_byte_for_byte() {
        let cfg = SimConfig::new(5, 0.01, 3);
        let (set, _) = generate_set(&truth_for_seed(3), &cfg).unwrap();
        let text = write_observations(&set);
        let reparsed = parse_observations(&text).unwrap();
        assert_eq!(reparsed, set);
        assert_eq!(write_observations(&reparsed), text);
    }

    #[test]
    fn trace_csv_layout() {
        let rec = IterationRecord {
            index: 3,
            q: [1.0, 0.0, -0.5, 0.1],
            loss: 0.1,
            grad_norm: 2.0,
            min_hessian_eig: None,
        };
        let csv = write_trace(&[rec]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 8);
        assert_eq!(row[0], "3");
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.1);
        assert_eq!(row[7], "");
    }

    #[test]
    fn fixed_decimals() {
        assert_eq!(fixed_decimal_json(-1.5, 15).get(), "-1.500000000000000");
        assert_eq!(fixed_decimal_json(f64::NAN, 15).get(), "null");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn seventeen_digits_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
                prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
            }
        }
    }
}
