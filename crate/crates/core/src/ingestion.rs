//! CSV ingestion for the uptake series and the query-frequency panel.
//!
//! Two uptake layouts are accepted:
//!
//! ```text
//! month,vaccinated,birth_cohort      month,uptake_percent
//! 2011-01,500,1000                   2011-01,50
//! ```
//!
//! The query panel has one column per term: `month,<term1>,<term2>,...`.
//! Validation is strict. Nothing is clamped or imputed, and every error names
//! the 1-based line it came from.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::timeseries::{describe_range, Dataset, MonthIndex, QueryPanel, UptakeSeries};

/// Summary of one ingestion pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub rows_read: usize,
    pub warnings: Vec<String>,
}

struct Row {
    line: usize,
    fields: Vec<String>,
}

fn read_rows(text: &str) -> Result<(Row, Vec<Row>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Format {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        rows.push(Row {
            line,
            fields: record.iter().map(str::to_owned).collect(),
        });
    }
    if rows.is_empty() {
        return Err(Error::Format {
            line: 1,
            msg: "missing header".into(),
        });
    }
    let header = rows.remove(0);
    Ok((header, rows))
}

fn parse_number(row: &Row, col: usize, name: &str) -> Result<f64> {
    let raw = &row.fields[col];
    let v: f64 = raw.parse().map_err(|_| Error::Format {
        line: row.line,
        msg: format!("`{raw}` in column `{name}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Value(format!(
            "line {}: `{name}` must be finite, got {raw}",
            row.line
        )));
    }
    Ok(v)
}

fn parse_month(row: &Row) -> Result<MonthIndex> {
    row.fields[0].parse().map_err(|e: Error| Error::Format {
        line: row.line,
        msg: e.to_string(),
    })
}

/// Checks that months start somewhere and increase by exactly one per row.
fn contiguous_months(rows: &[Row]) -> Result<MonthIndex> {
    let first = rows.first().ok_or(Error::Format {
        line: 2,
        msg: "no data rows".into(),
    })?;
    let start = parse_month(first)?;
    let mut expected = start;
    for row in rows {
        let found = parse_month(row)?;
        if found != expected {
            return Err(Error::Gap {
                line: row.line,
                expected,
                found,
            });
        }
        expected = expected.successor();
    }
    Ok(start)
}

fn check_width(row: &Row, width: usize) -> Result<()> {
    if row.fields.len() != width {
        return Err(Error::Format {
            line: row.line,
            msg: format!("expected {width} fields, found {}", row.fields.len()),
        });
    }
    Ok(())
}

/// Parses an uptake CSV in either the raw-count or the percent layout.
pub fn parse_uptake_csv(text: &str) -> Result<UptakeSeries> {
    read_uptake_csv(text).map(|(s, _)| s)
}

/// Like [`parse_uptake_csv`], also returning an [`IngestReport`].
pub fn read_uptake_csv(text: &str) -> Result<(UptakeSeries, IngestReport)> {
    let (header, rows) = read_rows(text)?;
    let names: Vec<&str> = header.fields.iter().map(String::as_str).collect();
    let raw = match names.as_slice() {
        ["month", "vaccinated", "birth_cohort"] => true,
        ["month", "uptake_percent"] => false,
        _ => {
            return Err(Error::Format {
                line: header.line,
                msg: format!(
                    "missing header: expected `month,vaccinated,birth_cohort` or `month,uptake_percent`, found `{}`",
                    header.fields.join(",")
                ),
            })
        }
    };
    let width = names.len();
    for row in &rows {
        check_width(row, width)?;
    }
    let start = contiguous_months(&rows)?;

    let mut report = IngestReport {
        rows_read: rows.len(),
        warnings: Vec::new(),
    };
    let mut values = Vec::with_capacity(rows.len());
    for row in &rows {
        let v = if raw {
            let vaccinated = parse_number(row, 1, "vaccinated")?;
            let cohort = parse_number(row, 2, "birth_cohort")?;
            if vaccinated < 0.0 {
                return Err(Error::Value(format!(
                    "line {}: vaccinated must be non-negative, got {vaccinated}",
                    row.line
                )));
            }
            if cohort <= 0.0 {
                return Err(Error::Value(format!(
                    "line {}: birth_cohort must be positive, got {cohort}",
                    row.line
                )));
            }
            100.0 * vaccinated / cohort
        } else {
            let v = parse_number(row, 1, "uptake_percent")?;
            if v < 0.0 {
                return Err(Error::Value(format!(
                    "line {}: uptake_percent must be non-negative, got {v}",
                    row.line
                )));
            }
            v
        };
        if v > 100.0 {
            report
                .warnings
                .push(format!("line {}: uptake {v:.2}% exceeds the birth cohort", row.line));
        }
        values.push(v);
    }
    Ok((UptakeSeries::new(start, values)?, report))
}

/// Parses a query-frequency panel CSV.
pub fn parse_query_csv(text: &str) -> Result<QueryPanel> {
    read_query_csv(text).map(|(p, _)| p)
}

/// Like [`parse_query_csv`], also returning an [`IngestReport`].
pub fn read_query_csv(text: &str) -> Result<(QueryPanel, IngestReport)> {
    let (header, rows) = read_rows(text)?;
    if header.fields.first().map(String::as_str) != Some("month") {
        return Err(Error::Format {
            line: header.line,
            msg: "missing header: first column must be `month`".into(),
        });
    }
    let terms: Vec<String> = header.fields[1..].to_vec();
    for (i, term) in terms.iter().enumerate() {
        if term.is_empty() {
            return Err(Error::Format {
                line: header.line,
                msg: format!("empty term label in column {}", i + 2),
            });
        }
        if terms[..i].contains(term) {
            return Err(Error::Format {
                line: header.line,
                msg: format!("duplicate term label `{term}`"),
            });
        }
    }
    let width = header.fields.len();
    for row in &rows {
        check_width(row, width)?;
    }
    let start = contiguous_months(&rows)?;

    let mut matrix = vec![Vec::with_capacity(rows.len()); terms.len()];
    for row in &rows {
        for (k, term) in terms.iter().enumerate() {
            let v = parse_number(row, k + 1, term)?;
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::Value(format!(
                    "line {}: frequency {v} for `{term}` is outside [0, 100]",
                    row.line
                )));
            }
            matrix[k].push(v);
        }
    }
    let mut report = IngestReport {
        rows_read: rows.len(),
        warnings: Vec::new(),
    };
    for (term, row) in terms.iter().zip(&matrix) {
        if row.windows(2).all(|w| w[0] == w[1]) {
            report
                .warnings
                .push(format!("term `{term}` is constant and carries no signal"));
        }
    }
    let panel = if terms.is_empty() {
        QueryPanel::without_terms(start, rows.len())
    } else {
        QueryPanel::new(start, terms, matrix)?
    };
    Ok((panel, report))
}

/// Restricts both inputs to their common month range.
pub fn align(uptake: &UptakeSeries, panel: &QueryPanel) -> Result<Dataset> {
    let from = uptake.start().max(panel.start());
    let to_exclusive = uptake
        .start()
        .offset(uptake.len() as i64)
        .min(panel.start().offset(panel.len() as i64));
    let len = from.months_until(to_exclusive);
    if len <= 0 {
        return Err(Error::Alignment(format!(
            "uptake covers {} but query panel covers {}: no months in common",
            describe_range(uptake.start(), uptake.len()),
            describe_range(panel.start(), panel.len())
        )));
    }
    let u0 = uptake.start().months_until(from) as usize;
    let p0 = panel.start().months_until(from) as usize;
    let len = len as usize;
    Dataset::new(uptake.slice(u0, u0 + len), panel.slice(p0, p0 + len))
}

/// Parses both files and aligns them, collecting warnings from every stage.
pub fn load_dataset(uptake_csv: &str, query_csv: &str) -> Result<(Dataset, IngestReport)> {
    let (uptake, mut report) = read_uptake_csv(uptake_csv)?;
    let (panel, panel_report) = read_query_csv(query_csv)?;
    report.rows_read += panel_report.rows_read;
    report.warnings.extend(panel_report.warnings);
    let ds = align(&uptake, &panel)?;
    if ds.len() < uptake.len() || ds.len() < panel.len() {
        let (a, b) = ds.month_range();
        report.warnings.push(format!(
            "inputs trimmed to common range {a}..{b} (uptake {}, panel {})",
            describe_range(uptake.start(), uptake.len()),
            describe_range(panel.start(), panel.len())
        ));
    }
    Ok((ds, report))
}

/// Serializes an uptake series in the `month,uptake_percent` layout.
pub fn write_uptake_csv(series: &UptakeSeries) -> String {
    let mut out = String::from("month,uptake_percent\n");
    for (t, v) in series.values().iter().enumerate() {
        let _ = writeln!(out, "{},{}", series.start().offset(t as i64), v);
    }
    out
}

/// Serializes a query panel with one column per term.
pub fn write_query_csv(panel: &QueryPanel) -> String {
    let mut out = String::from("month");
    for term in panel.terms() {
        out.push(',');
        out.push_str(term);
    }
    out.push('\n');
    for t in 0..panel.len() {
        let _ = write!(out, "{}", panel.start().offset(t as i64));
        for k in 0..panel.n_terms() {
            let _ = write!(out, ",{}", panel.value(k, t));
        }
        out.push('\n');
    }
    out
}
