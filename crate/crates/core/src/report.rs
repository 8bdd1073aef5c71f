//! Verification reports with JSON output.

use rug::Float;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::scalar::float_to_short;

/// Outcome of one named check.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub order: u32,
    pub max_deviation: String,
    pub pass: bool,
    pub details: Map<String, Value>,
    #[serde(skip)]
    deviation: Option<Float>,
}

impl VerificationReport {
    /// A report whose pass flag is decided by `deviation ≤ tol` (or by exact
    /// vanishing when `tol` is `None`).
    pub fn from_deviation(check: impl Into<String>, order: u32, deviation: Float, tol: Option<&Float>) -> Self {
        let pass = match tol {
            Some(t) => deviation <= *t,
            None => deviation.is_zero(),
        };
        let mut r = Self::new(check, order, pass);
        r.max_deviation = float_to_short(&deviation);
        r.details.insert(
            "tolerance".into(),
            Value::String(match tol {
                Some(t) => float_to_short(t),
                None => "exact".into(),
            }),
        );
        r.deviation = Some(deviation);
        r
    }

    pub fn new(check: impl Into<String>, order: u32, pass: bool) -> Self {
        VerificationReport {
            check: check.into(),
            order,
            max_deviation: "0".into(),
            pass,
            details: Map::new(),
            deviation: None,
        }
    }

    pub fn with_detail(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.details.insert(key.to_string(), value.into());
        self
    }

    pub fn set_detail(&mut self, key: &str, value: impl Into<Value>) {
        self.details.insert(key.to_string(), value.into());
    }

    /// Deviation as a float, when the report carries one.
    pub fn deviation(&self) -> Option<&Float> {
        self.deviation.as_ref()
    }

    pub fn deviation_f64(&self) -> f64 {
        match &self.deviation {
            Some(d) => d.to_f64(),
            None => self.max_deviation.parse().unwrap_or(f64::NAN),
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("reports serialize")
    }
}

/// Conjunction of the pass flags.
pub fn all_pass(reports: &[VerificationReport]) -> bool {
    reports.iter().all(|r| r.pass)
}
