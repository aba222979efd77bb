//! Report rows and CSV emission.
//!
//! Every CSV starts with `# key=value` lines (tool version, seed, sampling steps and the
//! full constant table), followed by one header line and one line per run.

use std::io::Write;

use geoclose::orbits::BoundCheck;

use crate::config::ExperimentKind;
use crate::plot::Plot;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Flag(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) if x.is_nan() => String::new(),
            Cell::Num(x) => format!("{x}"),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Flag(b) => b.to_string(),
        }
    }
}

/// One inequality of a row. Skipped checks carry no margin and never fail.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Measured and bound values; NaN for checks reported only through a margin.
    pub measured: f64,
    pub bound: f64,
    pub margin: Option<f64>,
    pub tolerance: f64,
    /// Equality counts as a violation.
    pub strict: bool,
}

impl Check {
    /// `measured ≤ bound`, with `margin = bound − measured`.
    pub fn upper(name: impl Into<String>, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            bound,
            margin: Some(bound - measured),
            tolerance,
            strict: false,
        }
    }

    /// A check known only through its (possibly relative) margin.
    pub fn margin(name: impl Into<String>, margin: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured: f64::NAN,
            bound: f64::NAN,
            margin: Some(margin),
            tolerance,
            strict: false,
        }
    }

    pub fn skipped(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            measured: f64::NAN,
            bound: f64::NAN,
            margin: None,
            tolerance: 0.0,
            strict: false,
        }
    }

    pub fn from_bound(check: &BoundCheck, tolerance: f64) -> Self {
        Self {
            strict: check.strict,
            ..Self::upper(check.name, check.measured, check.bound, tolerance)
        }
    }

    pub fn passed(&self) -> bool {
        match self.margin {
            None => true,
            Some(m) if self.strict => m > 0.0,
            Some(m) => m >= -self.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub kind: ExperimentKind,
    pub columns: Vec<(String, Cell)>,
    pub checks: Vec<Check>,
}

impl ReportRow {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            columns: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn num(mut self, name: &str, value: f64) -> Self {
        self.columns.push((name.into(), Cell::Num(value)));
        self
    }

    pub fn int(mut self, name: &str, value: i64) -> Self {
        self.columns.push((name.into(), Cell::Int(value)));
        self
    }

    pub fn text(mut self, name: &str, value: impl Into<String>) -> Self {
        self.columns.push((name.into(), Cell::Text(value.into())));
        self
    }

    pub fn flag(mut self, name: &str, value: bool) -> Self {
        self.columns.push((name.into(), Cell::Flag(value)));
        self
    }

    pub fn check(mut self, check: Check) -> Self {
        self.checks.push(check);
        self
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .and_then(|(_, c)| match c {
                Cell::Num(x) => Some(*x),
                Cell::Int(n) => Some(*n as f64),
                _ => None,
            })
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = vec!["kind".into()];
        h.extend(self.columns.iter().map(|(n, _)| n.clone()));
        for c in &self.checks {
            h.push(format!("{}_measured", c.name));
            h.push(format!("{}_bound", c.name));
            h.push(format!("{}_margin", c.name));
            h.push(format!("{}_pass", c.name));
        }
        h.push("pass".into());
        h
    }

    fn record(&self) -> Vec<String> {
        let mut r: Vec<String> = vec![self.kind.name().into()];
        r.extend(self.columns.iter().map(|(_, c)| c.render()));
        for c in &self.checks {
            r.push(Cell::Num(c.measured).render());
            r.push(Cell::Num(c.bound).render());
            r.push(c.margin.map(|m| Cell::Num(m).render()).unwrap_or_default());
            r.push(match c.margin {
                None => "skip".into(),
                Some(_) => c.passed().to_string(),
            });
        }
        r.push(self.passed().to_string());
        r
    }
}

/// Rows of one experiment plus run metadata and summary-level checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: ExperimentKind,
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<ReportRow>,
    /// Checks on the sweep as a whole, such as a fitted slope.
    pub summary: Vec<Check>,
    /// Free-form summary values printed after the run.
    pub notes: Vec<(String, String)>,
    /// Optional figure written next to the CSV.
    pub plot: Option<Plot>,
}

impl Report {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            metadata: Vec::new(),
            rows: Vec::new(),
            summary: Vec::new(),
            notes: Vec::new(),
            plot: None,
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.into(), value.to_string()));
    }

    /// Failing rows plus failing summary checks.
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.passed()).count()
            + self.summary.iter().filter(|c| !c.passed()).count()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), CliError> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}={v}")?;
        }
        for c in &self.summary {
            let margin = c.margin.map(|m| m.to_string()).unwrap_or_default();
            writeln!(
                out,
                "# summary.{}: measured={} bound={} margin={} pass={}",
                c.name,
                Cell::Num(c.measured).render(),
                Cell::Num(c.bound).render(),
                margin,
                c.passed()
            )?;
        }
        let mut writer = csv::Writer::from_writer(out);
        if let Some(first) = self.rows.first() {
            let header = first.header();
            writer.write_record(&header)?;
            for row in &self.rows {
                let record = row.record();
                if record.len() != header.len() {
                    return Err(CliError::Config(format!(
                        "row has {} fields, header {}",
                        record.len(),
                        header.len()
                    )));
                }
                writer.write_record(&record)?;
            }
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, CliError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }

    /// Human-readable summary: counts, notes and summary checks.
    pub fn summary_text(&self) -> String {
        let mut s = format!(
            "{}: {} rows, {} violations\n",
            self.kind.name(),
            self.rows.len(),
            self.violations()
        );
        for (k, v) in &self.notes {
            s.push_str(&format!("  {k} = {v}\n"));
        }
        for c in &self.summary {
            s.push_str(&format!(
                "  {}: measured {} bound {} -> {}\n",
                c.name,
                Cell::Num(c.measured).render(),
                Cell::Num(c.bound).render(),
                if c.passed() { "ok" } else { "VIOLATED" }
            ));
        }
        s
    }
}
