//! Report assembly and rendering (text, CSV, JSON).

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::args::Format;

/// Significant digits for every printed float.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats like C's `%.12g`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIGNIFICANT_DIGITS as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Nums(Vec<f64>),
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Num(x) => fmt_num(*x),
            Field::Int(i) => i.to_string(),
            Field::Bool(b) => b.to_string(),
            Field::Text(s) => s.clone(),
            Field::Nums(v) => v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(";"),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Field::Num(x) => num_json(*x),
            Field::Int(i) => json!(i),
            Field::Bool(b) => json!(b),
            Field::Text(s) => json!(s),
            Field::Nums(v) => Value::Array(v.iter().map(|x| num_json(*x)).collect()),
        }
    }
}

/// Round-trips through the 12-digit text form so JSON and CSV agree.
fn num_json(x: f64) -> Value {
    let rounded: f64 = fmt_num(x).parse().unwrap_or(x);
    serde_json::Number::from_f64(rounded).map_or_else(|| json!(fmt_num(x)), Value::Number)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    /// Deterministic run description, written as `# key=value` lines.
    pub manifest: Vec<(String, String)>,
    pub summary: Vec<(String, Field)>,
    pub table: Option<Table>,
}

impl Report {
    pub fn meta(&mut self, key: &str, value: impl Into<String>) {
        self.manifest.push((key.into(), value.into()));
    }

    pub fn field(&mut self, key: &str, value: Field) {
        self.summary.push((key.into(), value));
    }

    pub fn get(&self, key: &str) -> Option<&Field> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.render_text(),
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    fn manifest_block(&self, out: &mut String) {
        for (k, v) in &self.manifest {
            let _ = writeln!(out, "# {k}={v}");
        }
    }

    fn table_csv(table: &Table, out: &mut String) {
        let _ = writeln!(out, "{}", table.columns.join(","));
        for row in &table.rows {
            let cells: Vec<String> = row.iter().map(|x| fmt_num(*x)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
    }

    fn render_text(&self) -> String {
        let mut out = String::new();
        self.manifest_block(&mut out);
        let width = self.summary.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.summary {
            let _ = writeln!(out, "{k:<width$}  {}", v.render());
        }
        if let Some(table) = &self.table {
            if !self.summary.is_empty() {
                out.push('\n');
            }
            Self::table_csv(table, &mut out);
        }
        out
    }

    fn render_csv(&self) -> String {
        let mut out = String::new();
        self.manifest_block(&mut out);
        match &self.table {
            Some(table) => Self::table_csv(table, &mut out),
            None => {
                let keys: Vec<&str> = self.summary.iter().map(|(k, _)| k.as_str()).collect();
                let vals: Vec<String> = self.summary.iter().map(|(_, v)| v.render()).collect();
                let _ = writeln!(out, "{}", keys.join(","));
                let _ = writeln!(out, "{}", vals.join(","));
            }
        }
        out
    }

    fn render_json(&self) -> String {
        let manifest: Map<String, Value> = self.manifest.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let summary: Map<String, Value> = self.summary.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
        let mut doc = json!({ "manifest": manifest, "summary": summary });
        if let Some(table) = &self.table {
            doc["table"] = json!({
                "columns": table.columns,
                "rows": table.rows.iter()
                    .map(|r| r.iter().map(|x| num_json(*x)).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            });
        }
        let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
        text.push('\n');
        text
    }
}
