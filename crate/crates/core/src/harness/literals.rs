use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use crate::kb::{Datetime, Literal};

/// A literal found in a question, with its byte span.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiteralSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub literal: Literal,
}

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october", "november",
    "december",
];

fn month_number(name: &str) -> Option<u8> {
    let name = name.to_ascii_lowercase();
    let name = name.trim_end_matches('.');
    MONTHS.iter().position(|m| *m == name || (name.len() >= 3 && m.starts_with(name))).map(|i| i as u8 + 1)
}

const MONTH_RE: &str = r"(?:jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|aug(?:ust)?|sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)\.?";

static ISO: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(\d{4})-(\d{2})(?:-(\d{2}))?\b").expect("valid regex"));
static MONTH_DAY_YEAR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"(?i)\b({MONTH_RE})\s+(\d{{1,2}})(?:st|nd|rd|th)?,?\s+(\d{{4}})\b")).expect("valid regex")
});
static DAY_MONTH_YEAR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"(?i)\b(\d{{1,2}})(?:st|nd|rd|th)?\s+(?:of\s+)?({MONTH_RE})\s+(\d{{4}})\b")).expect("valid regex")
});
static MONTH_YEAR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"(?i)\b({MONTH_RE})\s+(?:of\s+)?(\d{{4}})\b")).expect("valid regex"));
static NUMBER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(?:^|[^\w.])(-?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|-?\.\d+)(?:\s*(thousand|million|billion|trillion)\b)?")
        .expect("valid regex")
});

fn magnitude(word: &str) -> f64 {
    match word.to_ascii_lowercase().as_str() {
        "thousand" => 1e3,
        "million" => 1e6,
        "billion" => 1e9,
        "trillion" => 1e12,
        _ => 1.0,
    }
}

/// Extracts numeric and datetime literals from a question.
///
/// Dates are matched first: ISO dates, "August 10, 2015", "10 August 2015",
/// "August 2015". Remaining numbers become numeric literals, scaled by a
/// following magnitude word ("2.5 million"), except bare four-digit integers
/// in 1000..=2999, which are read as years. Results are in text order.
pub fn identify_literals(question: &str) -> Vec<LiteralSpan> {
    let mut found: Vec<LiteralSpan> = Vec::new();
    let free = |found: &[LiteralSpan], s: usize, e: usize| found.iter().all(|f| e <= f.start || s >= f.end);
    let push = |found: &mut Vec<LiteralSpan>, s: usize, e: usize, lit: Option<Datetime>| {
        if let Some(d) = lit {
            if free(found, s, e) {
                found.push(LiteralSpan { start: s, end: e, text: question[s..e].to_string(), literal: Literal::Datetime(d) });
            }
        }
    };
    for c in ISO.captures_iter(question) {
        let m = c.get(0).expect("whole match");
        let year = c[1].parse().unwrap_or(0);
        let month = c[2].parse().unwrap_or(0);
        let d = match c.get(3) {
            Some(day) => Datetime::date(year, month, day.as_str().parse().unwrap_or(0)),
            None => Datetime::year_month(year, month),
        };
        push(&mut found, m.start(), m.end(), d);
    }
    for c in MONTH_DAY_YEAR.captures_iter(question) {
        let m = c.get(0).expect("whole match");
        let d = month_number(&c[1]).and_then(|mo| Datetime::date(c[3].parse().ok()?, mo, c[2].parse().ok()?));
        push(&mut found, m.start(), m.end(), d);
    }
    for c in DAY_MONTH_YEAR.captures_iter(question) {
        let m = c.get(0).expect("whole match");
        let d = month_number(&c[2]).and_then(|mo| Datetime::date(c[3].parse().ok()?, mo, c[1].parse().ok()?));
        push(&mut found, m.start(), m.end(), d);
    }
    for c in MONTH_YEAR.captures_iter(question) {
        let m = c.get(0).expect("whole match");
        // "may" alone is too often a verb
        if c[1].eq_ignore_ascii_case("may") && !question[..m.start()].trim_end().to_ascii_lowercase().ends_with("in") {
            continue;
        }
        let d = month_number(&c[1]).and_then(|mo| Datetime::year_month(c[2].parse().ok()?, mo));
        push(&mut found, m.start(), m.end(), d);
    }
    for c in NUMBER.captures_iter(question) {
        let num = c.get(1).expect("number group");
        let end = c.get(2).map_or(num.end(), |m| m.end());
        if !free(&found, num.start(), end) {
            continue;
        }
        // skip pieces of identifiers such as "B52" or "m.0abc"
        if question[end..].chars().next().is_some_and(|ch| ch.is_alphanumeric() || ch == '_') {
            continue;
        }
        let digits = num.as_str().replace(',', "");
        let bare_year = c.get(2).is_none()
            && num.as_str().len() == 4
            && digits.bytes().all(|b| b.is_ascii_digit())
            && (1000..=2999).contains(&digits.parse::<i32>().unwrap_or(0));
        let literal = if bare_year {
            Literal::Datetime(Datetime::year(digits.parse().expect("four digits")))
        } else {
            let Ok(v) = digits.parse::<f64>() else { continue };
            let scale = c.get(2).map_or(1.0, |m| magnitude(m.as_str()));
            let Some(l) = Literal::numeric(v * scale) else { continue };
            l
        };
        found.push(LiteralSpan { start: num.start(), end, text: question[num.start()..end].to_string(), literal });
    }
    found.sort_by_key(|f| f.start);
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(q: &str) -> Vec<String> {
        identify_literals(q).iter().map(|l| l.literal.to_string()).collect()
    }

    #[test]
    fn numbers_and_years() {
        assert_eq!(values("wines with more than 7.5 percent alcohol"), ["7.5^^numeric"]);
        assert_eq!(values("films released in 2015"), ["2015^^datetime"]);
        assert_eq!(values("cities above 2.5 million people"), ["2500000^^numeric"]);
        assert_eq!(values("over 1,200 employees"), ["1200^^numeric"]);
        assert_eq!(values("the B52 bomber and m.0abc"), Vec::<String>::new());
    }

    #[test]
    fn dates() {
        assert_eq!(values("born on August 10, 2015"), ["2015-08-10^^datetime"]);
        assert_eq!(values("born 3rd of March 1970 or 1971-02"), ["1970-03-03^^datetime", "1971-02^^datetime"]);
        assert_eq!(values("in May 2001"), ["2001-05^^datetime"]);
        assert_eq!(values("who may 2001 have"), ["2001^^datetime"]);
    }

    #[test]
    fn spans_cover_the_matched_text() {
        let q = "after June 5, 1999 and under 90 minutes";
        let found = identify_literals(q);
        assert_eq!(found.len(), 2);
        assert_eq!(&q[found[0].start..found[0].end], "June 5, 1999");
        assert_eq!(found[1].text, "90");
    }
}
