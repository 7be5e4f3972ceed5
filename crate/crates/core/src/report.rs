//! Pass/fail records and number formatting shared by the CLI and the C API.

use serde::Serialize;

/// `x` with 12 significant digits, trailing zeros trimmed (`0.275`, `1.0`, `-2.5e-13`).
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.0".into();
    }
    let exponent = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exponent) {
        let text = format!("{x:.11e}");
        let (mantissa, exp) = text.split_once('e').expect("scientific format");
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{exp}");
    }
    let decimals = (11 - exponent).max(1) as usize;
    trim_zeros(&format!("{x:.decimals$}"))
}

fn trim_zeros(text: &str) -> String {
    if !text.contains('.') {
        return text.to_string();
    }
    let trimmed = text.trim_end_matches('0');
    if trimmed.ends_with('.') {
        format!("{trimmed}0")
    } else {
        trimmed.to_string()
    }
}

/// One verified property.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub passed: bool,
    /// `name = value (reference)`
    pub summary: String,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, reference: Option<String>, passed: bool) -> Self {
        Check::text(name, sig12(value), reference, passed)
    }

    pub fn text(name: impl Into<String>, value: String, reference: Option<String>, passed: bool) -> Self {
        let name = name.into();
        let summary = match &reference {
            Some(r) => format!("{name} = {value} ({r})"),
            None => format!("{name} = {value}"),
        };
        Check { name, value, reference, passed, summary }
    }

    pub fn flag(name: impl Into<String>, value: bool) -> Self {
        Check::text(name, value.to_string(), None, value)
    }

    /// `|value - expected| <= tol`.
    pub fn close(name: impl Into<String>, value: f64, expected: f64, tol: f64, reference: impl Into<String>) -> Self {
        Check::new(name, value, Some(reference.into()), (value - expected).abs() <= tol)
    }

    /// A deviation that must stay at or below `tol`.
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Check::new(name, value, Some(format!("<= {}", sig12(tol))), value <= tol)
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::new(name, value, Some(format!(">= {}", sig12(bound))), value >= bound)
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Report {
    pub command: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Command-specific payload.
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub data: serde_json::Value,
}

impl Report {
    pub fn new(command: impl Into<String>, checks: Vec<Check>, data: serde_json::Value) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Report { command: command.into(), passed, checks, data }
    }
}
