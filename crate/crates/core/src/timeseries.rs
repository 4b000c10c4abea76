//! Calendar-indexed monthly series.
//!
//! Every algorithm in this crate works in *step space*: step `0` is the first
//! month of a [`Dataset`], step `t` is `start + t` months. Calendar months only
//! appear at the edges (parsing, reports).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calendar month. Ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MonthIndex {
    year: i32,
    month: u8,
}

impl MonthIndex {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Value(format!("month {month} is not in 1..=12")));
        }
        Ok(MonthIndex {
            year,
            month: month as u8,
        })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month as u32
    }

    fn ordinal(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_ordinal(ordinal: i64) -> Self {
        MonthIndex {
            year: ordinal.div_euclid(12) as i32,
            month: (ordinal.rem_euclid(12) + 1) as u8,
        }
    }

    pub fn successor(&self) -> Self {
        self.offset(1)
    }

    pub fn predecessor(&self) -> Self {
        self.offset(-1)
    }

    /// Shifts by `months`, rolling the year over as needed.
    pub fn offset(&self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(&self, other: MonthIndex) -> i64 {
        other.ordinal() - self.ordinal()
    }
}

impl fmt::Display for MonthIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthIndex {
    type Err = Error;

    /// Parses `YYYY-MM`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Value(format!("`{s}` is not a YYYY-MM month"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        MonthIndex::new(year, month).map_err(|_| bad())
    }
}

impl TryFrom<String> for MonthIndex {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MonthIndex> for String {
    fn from(m: MonthIndex) -> String {
        m.to_string()
    }
}

/// Monthly uptake in percent of the birth cohort. Values above 100 are legal.
#[derive(Debug, Clone, PartialEq)]
pub struct UptakeSeries {
    start: MonthIndex,
    values: Vec<f64>,
}

impl UptakeSeries {
    pub fn new(start: MonthIndex, values: Vec<f64>) -> Result<Self> {
        if let Some((t, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::Value(format!(
                "uptake at step {t} ({}) must be finite and non-negative, got {v}",
                start.offset(t as i64)
            )));
        }
        Ok(UptakeSeries { start, values })
    }

    pub fn start(&self) -> MonthIndex {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Last month covered, or `None` for an empty series.
    pub fn end(&self) -> Option<MonthIndex> {
        (!self.is_empty()).then(|| self.start.offset(self.len() as i64 - 1))
    }

    /// Uptake at step `t` (0-based from `start`).
    pub fn value_at(&self, t: usize) -> Result<f64> {
        self.values.get(t).copied().ok_or(Error::Range {
            index: t,
            len: self.values.len(),
        })
    }

    pub(crate) fn slice(&self, from: usize, to: usize) -> UptakeSeries {
        UptakeSeries {
            start: self.start.offset(from as i64),
            values: self.values[from..to].to_vec(),
        }
    }
}

/// Query-term frequencies on the normalized `[0, 100]` scale, one row per term.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryPanel {
    start: MonthIndex,
    months: usize,
    terms: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

impl QueryPanel {
    pub fn new(start: MonthIndex, terms: Vec<String>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        if terms.len() != matrix.len() {
            return Err(Error::Shape(format!(
                "{} term labels for {} term rows",
                terms.len(),
                matrix.len()
            )));
        }
        for (i, label) in terms.iter().enumerate() {
            if terms[..i].contains(label) {
                return Err(Error::Value(format!("duplicate term label `{label}`")));
            }
        }
        if let Some(first) = matrix.first() {
            let len = first.len();
            if let Some(row) = matrix.iter().position(|r| r.len() != len) {
                return Err(Error::Shape(format!(
                    "term `{}` has {} values, expected {len}",
                    terms[row],
                    matrix[row].len()
                )));
            }
        }
        for (label, row) in terms.iter().zip(&matrix) {
            if let Some((t, v)) = row.iter().enumerate().find(|(_, v)| !(0.0..=100.0).contains(*v)) {
                return Err(Error::Value(format!(
                    "frequency for `{label}` at {} is {v}, outside [0, 100]",
                    start.offset(t as i64)
                )));
            }
        }
        Ok(QueryPanel {
            start,
            months: matrix.first().map_or(0, Vec::len),
            terms,
            matrix,
        })
    }

    /// A panel covering `months` months with no query terms.
    pub fn without_terms(start: MonthIndex, months: usize) -> Self {
        QueryPanel {
            start,
            months,
            terms: Vec::new(),
            matrix: Vec::new(),
        }
    }

    pub fn start(&self) -> MonthIndex {
        self.start
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Number of months covered.
    pub fn len(&self) -> usize {
        self.months
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn end(&self) -> Option<MonthIndex> {
        (!self.is_empty()).then(|| self.start.offset(self.len() as i64 - 1))
    }

    /// Frequencies of one term across all months.
    pub fn term_values(&self, term: usize) -> &[f64] {
        &self.matrix[term]
    }

    pub fn value(&self, term: usize, t: usize) -> f64 {
        self.matrix[term][t]
    }

    pub(crate) fn slice(&self, from: usize, to: usize) -> QueryPanel {
        QueryPanel {
            start: self.start.offset(from as i64),
            months: to - from,
            terms: self.terms.clone(),
            matrix: self.matrix.iter().map(|r| r[from..to].to_vec()).collect(),
        }
    }
}

/// Uptake series and query panel over the identical month range.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    uptake: UptakeSeries,
    panel: QueryPanel,
}

impl Dataset {
    /// Pairs the two series, rejecting any misalignment. Use
    /// [`crate::ingestion::align`] to intersect ranges instead.
    pub fn new(uptake: UptakeSeries, panel: QueryPanel) -> Result<Self> {
        if uptake.is_empty() {
            return Err(Error::Alignment("uptake series is empty".into()));
        }
        if uptake.start() != panel.start() || uptake.len() != panel.len() {
            return Err(Error::Alignment(format!(
                "uptake covers {} ({} months) but query panel covers {} ({} months)",
                describe_range(uptake.start(), uptake.len()),
                uptake.len(),
                describe_range(panel.start(), panel.len()),
                panel.len()
            )));
        }
        Ok(Dataset { uptake, panel })
    }

    pub fn uptake(&self) -> &UptakeSeries {
        &self.uptake
    }

    pub fn panel(&self) -> &QueryPanel {
        &self.panel
    }

    pub fn len(&self) -> usize {
        self.uptake.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uptake.is_empty()
    }

    pub fn start(&self) -> MonthIndex {
        self.uptake.start()
    }

    /// Calendar month of step `t`.
    pub fn month_of(&self, t: usize) -> MonthIndex {
        self.start().offset(t as i64)
    }

    /// Inclusive first and last month.
    pub fn month_range(&self) -> (MonthIndex, MonthIndex) {
        (self.start(), self.month_of(self.len() - 1))
    }

    /// A copy with the uptake values replaced; the panel is kept.
    pub fn with_uptake_values(&self, values: Vec<f64>) -> Result<Dataset> {
        Dataset::new(UptakeSeries::new(self.start(), values)?, self.panel.clone())
    }
}

pub(crate) fn describe_range(start: MonthIndex, len: usize) -> String {
    if len == 0 {
        format!("nothing (empty, starting {start})")
    } else {
        format!("{start}..{}", start.offset(len as i64 - 1))
    }
}

/// Inclusive first and last month of a dataset.
pub fn month_range(ds: &Dataset) -> (MonthIndex, MonthIndex) {
    ds.month_range()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(s: &str) -> MonthIndex {
        s.parse().unwrap()
    }

    fn flat_dataset(start: &str, len: usize) -> Dataset {
        let start = m(start);
        Dataset::new(
            UptakeSeries::new(start, vec![1.0; len]).unwrap(),
            QueryPanel::new(start, vec!["q".into()], vec![vec![5.0; len]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn month_range_examples() {
        assert_eq!(month_range(&flat_dataset("2011-01", 1)), (m("2011-01"), m("2011-01")));
        assert_eq!(month_range(&flat_dataset("2011-01", 66)), (m("2011-01"), m("2016-06")));
        assert_eq!(month_range(&flat_dataset("2011-12", 13)), (m("2011-12"), m("2012-12")));
    }

    #[test]
    fn value_at_bounds() {
        let s = UptakeSeries::new(m("2011-01"), vec![10.0, 20.0, 30.0]).unwrap();
        assert_eq!(s.value_at(0).unwrap(), 10.0);
        assert_eq!(s.value_at(2).unwrap(), 30.0);
        assert_eq!(s.value_at(3), Err(Error::Range { index: 3, len: 3 }));
    }

    #[test]
    fn month_parsing() {
        assert_eq!(m("2011-12").successor(), m("2012-01"));
        assert_eq!(m("2012-01").predecessor(), m("2011-12"));
        assert!("2011-13".parse::<MonthIndex>().is_err());
        assert!("2011-1".parse::<MonthIndex>().is_err());
        assert!("201101".parse::<MonthIndex>().is_err());
        assert_eq!(m("2011-03").to_string(), "2011-03");
    }

    #[test]
    fn uptake_above_100_is_legal() {
        assert!(UptakeSeries::new(m("2011-01"), vec![140.0]).is_ok());
        assert!(UptakeSeries::new(m("2011-01"), vec![-0.5]).is_err());
        assert!(UptakeSeries::new(m("2011-01"), vec![f64::NAN]).is_err());
    }

    #[test]
    fn panel_rejects_ragged_and_out_of_scale() {
        let s = m("2011-01");
        assert!(QueryPanel::new(s, vec!["a".into(), "b".into()], vec![vec![1.0], vec![]]).is_err());
        assert!(QueryPanel::new(s, vec!["a".into()], vec![vec![100.5]]).is_err());
        assert!(QueryPanel::new(s, vec!["a".into(), "a".into()], vec![vec![1.0], vec![1.0]]).is_err());
    }

    proptest! {
        #[test]
        fn successor_predecessor_round_trip(y in 1900i32..2100, mo in 1u32..=12, k in 0usize..=1200) {
            let start = MonthIndex::new(y, mo).unwrap();
            let mut cur = start;
            for _ in 0..k { cur = cur.successor(); }
            prop_assert_eq!(start.months_until(cur), k as i64);
            prop_assert!(k == 0 || cur > start);
            for _ in 0..k { cur = cur.predecessor(); }
            prop_assert_eq!(cur, start);
        }

        #[test]
        fn misaligned_pairs_rejected(len in 1usize..40, shift in -5i64..5, extra in -3i64..3) {
            prop_assume!(shift != 0 || extra != 0);
            let start = m("2011-01");
            let plen = (len as i64 + extra).max(0) as usize;
            let uptake = UptakeSeries::new(start, vec![1.0; len]).unwrap();
            let panel = QueryPanel::new(start.offset(shift), vec!["q".into()], vec![vec![1.0; plen]]).unwrap();
            prop_assert!(matches!(Dataset::new(uptake, panel), Err(Error::Alignment(_))));
        }
    }
}
