use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use vacua_core::lamb::EnergyResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub parameters: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedResult {
    pub name: String,
    #[serde(flatten)]
    pub result: EnergyResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Relative comparison.
    pub fn relative(name: &str, value: f64, expected: f64, tolerance: f64) -> Self {
        let pass = ((value - expected) / expected).abs() <= tolerance;
        Self { name: name.into(), value, expected, tolerance, pass, note: None }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub columns: Vec<String>,
    pub units: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub manifest: Manifest,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub results: Vec<NamedResult>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Spectrum>,
}

impl Report {
    pub fn new(manifest: Manifest) -> Self {
        Self { manifest, results: vec![], values: BTreeMap::new(), checks: vec![], spectrum: None }
    }

    pub fn push(&mut self, name: &str, result: EnergyResult) {
        self.results.push(NamedResult { name: name.into(), result });
    }

    pub fn value(&mut self, name: &str, v: f64) {
        self.values.insert(name.into(), v);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Csv => self.csv(),
            Format::Text => self.text(),
        }
    }

    fn csv(&self) -> String {
        let mut s = String::new();
        if let Some(sp) = &self.spectrum {
            let units: Vec<String> = sp.columns.iter().zip(&sp.units).map(|(c, u)| format!("{c}={u}")).collect();
            let _ = writeln!(s, "# units: {}", units.join(", "));
            let _ = writeln!(s, "{}", sp.columns.join(","));
            for row in &sp.rows {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                let _ = writeln!(s, "{}", cells.join(","));
            }
            return s;
        }
        if !self.checks.is_empty() {
            let _ = writeln!(s, "# units: dimensionless");
            let _ = writeln!(s, "check,value,expected,tolerance,pass");
            for c in &self.checks {
                let _ = writeln!(s, "{},{:e},{:e},{:e},{}", c.name, c.value, c.expected, c.tolerance, c.pass);
            }
            return s;
        }
        let units: Vec<String> = self.results.iter().map(|r| format!("{}={}", r.name, r.result.units)).collect();
        let _ = writeln!(s, "# units: {}", units.join(", "));
        let _ = writeln!(s, "name,component,value");
        for r in &self.results {
            let _ = writeln!(s, "{},value,{:e}", r.name, r.result.value);
            for (k, v) in &r.result.breakdown {
                let _ = writeln!(s, "{},breakdown.{k},{v:e}", r.name);
            }
            for (k, v) in &r.result.comparators {
                let _ = writeln!(s, "{},comparator.{k},{v:e}", r.name);
            }
            let _ = writeln!(s, "{},error_estimate,{:e}", r.name, r.result.error_estimate);
        }
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k},value,{v:e}");
        }
        s
    }

    fn text(&self) -> String {
        let mut s = String::new();
        for r in &self.results {
            let e = &r.result;
            let _ = writeln!(s, "{} = {:.10e} {} (± {:.1e})", r.name, e.value, e.units, e.error_estimate);
            for (k, v) in &e.breakdown {
                let _ = writeln!(s, "  {k:<24} {v:.10e}");
            }
            for (k, v) in &e.comparators {
                let _ = writeln!(s, "  [{k}] {v:.10e}");
            }
        }
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k} = {v:.10e}");
        }
        for c in &self.checks {
            let mark = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{mark} {:<34} {:.12e} expected {:.12e} (rel tol {:.0e})", c.name, c.value, c.expected, c.tolerance);
            if let Some(n) = &c.note {
                let _ = writeln!(s, "     {n}");
            }
        }
        if let Some(sp) = &self.spectrum {
            let _ = writeln!(s, "spectrum: {} rows of {} (use --format csv or --json)", sp.rows.len(), sp.columns.join(", "));
        }
        s
    }
}
