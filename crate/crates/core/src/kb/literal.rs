//! Typed literal values: numbers, calendar values with a precision, and text.
//!
//! Literals are normalized when constructed so that equality is bit-exact:
//! numbers are finite `f64` with `-0.0` folded into `0.0`, datetimes keep only
//! the components their precision carries.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiteralTag {
    Numeric,
    Datetime,
    String,
}

impl LiteralTag {
    pub fn as_str(self) -> &'static str {
        match self {
            LiteralTag::Numeric => "numeric",
            LiteralTag::Datetime => "datetime",
            LiteralTag::String => "string",
        }
    }

    pub fn is_comparable(self) -> bool {
        !matches!(self, LiteralTag::String)
    }
}

impl FromStr for LiteralTag {
    type Err = LiteralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "numeric" => Ok(LiteralTag::Numeric),
            "datetime" => Ok(LiteralTag::Datetime),
            "string" => Ok(LiteralTag::String),
            other => Err(LiteralError::UnknownTag(other.to_string())),
        }
    }
}

impl fmt::Display for LiteralTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LiteralError {
    #[error("unknown literal tag `{0}`")]
    UnknownTag(String),
    #[error("invalid numeric literal `{0}`")]
    BadNumber(String),
    #[error("invalid datetime literal `{0}`")]
    BadDatetime(String),
    #[error("cannot compare a {left} literal with a {right} literal")]
    CrossTag { left: LiteralTag, right: LiteralTag },
    #[error("string literals do not support ordering comparisons")]
    StringComparison,
}

/// Ordering comparators of the LT/LE/GT/GE family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub const ALL: [Comparator; 4] = [Comparator::Lt, Comparator::Le, Comparator::Gt, Comparator::Ge];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Precision {
    Year,
    YearMonth,
    Date,
    DateTime,
}

/// A point on the timeline at one-second resolution, ordered lexicographically.
pub type Instant = (i32, u8, u8, u32);

/// A calendar value. Components beyond the precision are stored as their
/// minimum (month 1, day 1, second 0) so derived equality is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Datetime {
    year: i32,
    month: u8,
    day: u8,
    second_of_day: u32,
    precision: Precision,
}

fn is_leap(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

pub fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        _ => 28,
    }
}

impl Datetime {
    pub fn year(year: i32) -> Self {
        Datetime { year, month: 1, day: 1, second_of_day: 0, precision: Precision::Year }
    }

    pub fn year_month(year: i32, month: u8) -> Option<Self> {
        (1..=12).contains(&month).then_some(Datetime {
            year,
            month,
            day: 1,
            second_of_day: 0,
            precision: Precision::YearMonth,
        })
    }

    pub fn date(year: i32, month: u8, day: u8) -> Option<Self> {
        if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
            return None;
        }
        Some(Datetime { year, month, day, second_of_day: 0, precision: Precision::Date })
    }

    pub fn date_time(year: i32, month: u8, day: u8, h: u32, m: u32, s: u32) -> Option<Self> {
        let mut d = Self::date(year, month, day)?;
        if h > 23 || m > 59 || s > 59 {
            return None;
        }
        d.second_of_day = h * 3600 + m * 60 + s;
        d.precision = Precision::DateTime;
        Some(d)
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn year_value(&self) -> i32 {
        self.year
    }

    /// The closed interval of instants this value covers.
    pub fn interval(&self) -> (Instant, Instant) {
        let lo = (self.year, self.month, self.day, self.second_of_day);
        let hi = match self.precision {
            Precision::Year => (self.year, 12, 31, 86_399),
            Precision::YearMonth => (self.year, self.month, days_in_month(self.year, self.month), 86_399),
            Precision::Date => (self.year, self.month, self.day, 86_399),
            Precision::DateTime => lo,
        };
        (lo, hi)
    }

    /// Interval comparison: `x < y` iff `x.max < y.min`; `x > y` iff
    /// `x.min > y.max`; `x <= y` is "not after" and `x >= y` is "not before".
    /// For values of equal precision this is the usual total order.
    pub fn compare(&self, op: Comparator, other: &Datetime) -> bool {
        let (lo, hi) = self.interval();
        let (olo, ohi) = other.interval();
        match op {
            Comparator::Lt => hi < olo,
            Comparator::Gt => lo > ohi,
            Comparator::Le => lo <= ohi,
            Comparator::Ge => hi >= olo,
        }
    }
}

impl fmt::Display for Datetime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.year < 0 {
            write!(f, "-{:04}", -(self.year as i64))?;
        } else {
            write!(f, "{:04}", self.year)?;
        }
        if self.precision >= Precision::YearMonth {
            write!(f, "-{:02}", self.month)?;
        }
        if self.precision >= Precision::Date {
            write!(f, "-{:02}", self.day)?;
        }
        if self.precision == Precision::DateTime {
            let s = self.second_of_day;
            write!(f, "T{:02}:{:02}:{:02}", s / 3600, (s / 60) % 60, s % 60)?;
        }
        Ok(())
    }
}

impl FromStr for Datetime {
    type Err = LiteralError;

    /// Accepts `YYYY`, `YYYY-MM`, `YYYY-MM-DD` and `YYYY-MM-DDTHH:MM[:SS][Z]`,
    /// with an optional leading `-` on the year.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = || LiteralError::BadDatetime(text.to_string());
        let (negative, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let (date_part, time_part) = match body.split_once('T') {
            Some((d, t)) => (d, Some(t.trim_end_matches('Z'))),
            None => (body, None),
        };
        let mut pieces = date_part.split('-');
        let year_text = pieces.next().ok_or_else(bad)?;
        if year_text.len() < 4 || !year_text.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let mut year: i32 = year_text.parse().map_err(|_| bad())?;
        if negative {
            year = -year;
        }
        let month = pieces.next();
        let day = pieces.next();
        if pieces.next().is_some() {
            return Err(bad());
        }
        let num = |s: &str| -> Result<u32, LiteralError> {
            if s.is_empty() || s.len() > 2 || !s.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            s.parse().map_err(|_| bad())
        };
        match (month, day, time_part) {
            (None, None, None) => Ok(Datetime::year(year)),
            (Some(m), None, None) => Datetime::year_month(year, num(m)? as u8).ok_or_else(bad),
            (Some(m), Some(d), None) => Datetime::date(year, num(m)? as u8, num(d)? as u8).ok_or_else(bad),
            (Some(m), Some(d), Some(t)) => {
                let mut hms = t.split(':');
                let h = num(hms.next().ok_or_else(bad)?)?;
                let mi = num(hms.next().ok_or_else(bad)?)?;
                let s = match hms.next() {
                    Some(s) => num(s)?,
                    None => 0,
                };
                if hms.next().is_some() {
                    return Err(bad());
                }
                Datetime::date_time(year, num(m)? as u8, num(d)? as u8, h, mi, s).ok_or_else(bad)
            }
            _ => Err(bad()),
        }
    }
}

/// A literal value from the set L.
#[derive(Debug, Clone)]
pub enum Literal {
    Numeric(f64),
    Datetime(Datetime),
    String(String),
}

impl Literal {
    /// Builds a numeric literal, rejecting NaN and infinities.
    pub fn numeric(value: f64) -> Option<Literal> {
        if !value.is_finite() {
            return None;
        }
        // fold -0.0 so that bitwise equality matches numeric equality
        Some(Literal::Numeric(if value == 0.0 { 0.0 } else { value }))
    }

    pub fn tag(&self) -> LiteralTag {
        match self {
            Literal::Numeric(_) => LiteralTag::Numeric,
            Literal::Datetime(_) => LiteralTag::Datetime,
            Literal::String(_) => LiteralTag::String,
        }
    }

    /// Parses a value under an explicit tag, normalizing it.
    pub fn parse_tagged(value: &str, tag: LiteralTag) -> Result<Literal, LiteralError> {
        match tag {
            LiteralTag::Numeric => value
                .trim()
                .parse::<f64>()
                .ok()
                .and_then(Literal::numeric)
                .ok_or_else(|| LiteralError::BadNumber(value.to_string())),
            LiteralTag::Datetime => Ok(Literal::Datetime(value.trim().parse()?)),
            LiteralTag::String => Ok(Literal::String(value.to_string())),
        }
    }

    /// The normalized value text, without a tag.
    pub fn value_text(&self) -> String {
        match self {
            Literal::Numeric(v) => format!("{v}"),
            Literal::Datetime(d) => d.to_string(),
            Literal::String(s) => s.clone(),
        }
    }

    /// Ordering comparison `self op other`. Comparing across tags, or
    /// comparing strings, is an error rather than `false`.
    pub fn compare(&self, op: Comparator, other: &Literal) -> Result<bool, LiteralError> {
        match (self, other) {
            (Literal::Numeric(a), Literal::Numeric(b)) => Ok(match op {
                Comparator::Lt => a < b,
                Comparator::Le => a <= b,
                Comparator::Gt => a > b,
                Comparator::Ge => a >= b,
            }),
            (Literal::Datetime(a), Literal::Datetime(b)) => Ok(a.compare(op, b)),
            (Literal::String(_), Literal::String(_)) => Err(LiteralError::StringComparison),
            (a, b) => Err(LiteralError::CrossTag { left: a.tag(), right: b.tag() }),
        }
    }

    /// Total preorder used to pick extremes (ARGMAX/ARGMIN). Numbers order
    /// by value; datetimes by interval start, then interval end. `None` for
    /// strings and across tags.
    pub fn extreme_cmp(&self, other: &Literal) -> Option<Ordering> {
        match (self, other) {
            (Literal::Numeric(a), Literal::Numeric(b)) => Some(a.total_cmp(b)),
            (Literal::Datetime(a), Literal::Datetime(b)) => Some(a.interval().cmp(&b.interval())),
            _ => None,
        }
    }
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Literal::Numeric(a), Literal::Numeric(b)) => a.to_bits() == b.to_bits(),
            (Literal::Datetime(a), Literal::Datetime(b)) => a == b,
            (Literal::String(a), Literal::String(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Literal {}

impl Hash for Literal {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.tag().hash(state);
        match self {
            Literal::Numeric(v) => v.to_bits().hash(state),
            Literal::Datetime(d) => d.hash(state),
            Literal::String(s) => s.hash(state),
        }
    }
}

impl Ord for Literal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Literal::Numeric(a), Literal::Numeric(b)) => a.total_cmp(b),
            (Literal::Datetime(a), Literal::Datetime(b)) => a.cmp(b),
            (Literal::String(a), Literal::String(b)) => a.cmp(b),
            (a, b) => a.tag().cmp(&b.tag()),
        }
    }
}

impl PartialOrd for Literal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for Literal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Prints the tagged atom form used in S-expressions: `7.5^^numeric`,
/// `2015-08-10^^datetime`, `"text"^^string`.
impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::String(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"^^string")
            }
            other => write!(f, "{}^^{}", other.value_text(), other.tag()),
        }
    }
}
