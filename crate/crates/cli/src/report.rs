//! Deterministic JSON output. Floats are written with 17 significant
//! digits, object keys in sorted order.

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Number, Value};
use sha2::{Digest, Sha256};

use errcalc::stats::Estimate;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn format_number(n: &Number) -> String {
    if n.is_f64() {
        let v = n.as_f64().expect("checked f64");
        format!("{v:.16e}")
    } else {
        n.to_string()
    }
}

fn write_string(s: &str, out: &mut String) {
    out.push_str(&Value::String(s.to_owned()).to_string());
}

fn write_value(v: &Value, indent: Option<usize>, out: &mut String) {
    let scalar = |v: &Value| !matches!(v, Value::Array(_) | Value::Object(_));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&format_number(n)),
        Value::String(s) => write_string(s, out),
        Value::Array(items) => {
            // Arrays of scalars stay on one line.
            let inline = indent.is_none() || items.iter().all(scalar);
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                    if inline && indent.is_some() {
                        out.push(' ');
                    }
                }
                if !inline {
                    newline(indent.map(|d| d + 1), out);
                }
                write_value(item, indent.map(|d| d + 1), out);
            }
            if !inline && !items.is_empty() {
                newline(indent, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(indent.map(|d| d + 1), out);
                write_string(k, out);
                out.push(':');
                if indent.is_some() {
                    out.push(' ');
                }
                write_value(item, indent.map(|d| d + 1), out);
            }
            if !map.is_empty() {
                newline(indent, out);
            }
            out.push('}');
        }
    }
}

fn newline(indent: Option<usize>, out: &mut String) {
    if let Some(d) = indent {
        out.push('\n');
        for _ in 0..d {
            out.push_str("  ");
        }
    }
}

pub fn write_compact(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, None, &mut out);
    out
}

pub fn write_pretty(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, Some(0), &mut out);
    out.push('\n');
    out
}

/// SHA-256 of the canonical compact form of `v`.
pub fn digest(v: &Value) -> String {
    hex::encode(Sha256::digest(write_compact(v).as_bytes()))
}

pub fn num(x: f64) -> Value {
    Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn vector(xs: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(xs.into_iter().map(num).collect())
}

pub fn dvector(v: &DVector<f64>) -> Value {
    vector(v.iter().copied())
}

pub fn matrix(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| vector(m.row(i).iter().copied()))
            .collect(),
    )
}

pub fn estimate(e: Estimate) -> Value {
    let mut m = Map::new();
    m.insert("value".into(), num(e.value));
    m.insert("std_error".into(), num(e.std_error));
    Value::Object(m)
}

/// A command's output.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: Value,
    pub digest: String,
    pub seed: u64,
    pub results: Value,
    /// Human-readable rendering, not part of the JSON.
    pub table: String,
}

impl Report {
    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("command".into(), self.command.clone());
        m.insert("input_digest".into(), Value::String(self.digest.clone()));
        m.insert("seed".into(), Value::from(self.seed));
        m.insert("version".into(), Value::String(VERSION.into()));
        m.insert("results".into(), self.results.clone());
        Value::Object(m)
    }

    pub fn to_json(&self) -> String {
        write_pretty(&self.to_value())
    }

    pub fn results_json(&self) -> String {
        write_pretty(&self.results)
    }
}
