//! Readers for the raw TSV inputs.

use std::io::BufRead;

use super::{RawRating, RawReview};
use crate::error::{Error, Result};

fn rows<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()))
}

/// `user_id \t item_id \t stars [\t timestamp]`
pub fn read_ratings<R: BufRead>(reader: R, path: &str) -> Result<Vec<RawRating>> {
    let mut out = Vec::new();
    for (line_no, line) in rows(reader) {
        let line = line?;
        let f: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        let (user, item, stars, ts) = match f.as_slice() {
            [u, i, s] => (u, i, s, None),
            [u, i, s, t] => (u, i, s, Some(t)),
            _ => return Err(Error::parse(path, line_no, "expected 3 or 4 columns")),
        };
        let stars: u8 = stars
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad star value `{stars}`")))?;
        if !(1..=5).contains(&stars) {
            return Err(Error::parse(path, line_no, format!("stars out of range: {stars}")));
        }
        let timestamp = match ts {
            Some(t) if !t.trim().is_empty() => Some(
                t.trim()
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, format!("bad timestamp `{t}`")))?,
            ),
            _ => None,
        };
        out.push(RawRating::new(user, item, stars, timestamp));
    }
    Ok(out)
}

/// Reverses the `\t`, `\n` and `\\` escapes used in review text.
pub fn unescape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// `user_id \t item_id \t text`, with tabs and newlines in text escaped.
pub fn read_reviews<R: BufRead>(reader: R, path: &str) -> Result<Vec<RawReview>> {
    let mut out = Vec::new();
    for (line_no, line) in rows(reader) {
        let line = line?;
        let mut f = line.trim_end_matches('\r').splitn(3, '\t');
        match (f.next(), f.next(), f.next()) {
            (Some(u), Some(i), Some(t)) => out.push(RawReview::new(u, i, &unescape_field(t))),
            _ => return Err(Error::parse(path, line_no, "expected 3 columns")),
        }
    }
    Ok(out)
}

/// `item_id \t category_id`
pub fn read_categories<R: BufRead>(reader: R, path: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (line_no, line) in rows(reader) {
        let line = line?;
        match line.trim_end_matches('\r').split('\t').collect::<Vec<_>>().as_slice() {
            [i, c] => out.push((i.to_string(), c.to_string())),
            _ => return Err(Error::parse(path, line_no, "expected 2 columns")),
        }
    }
    Ok(out)
}

/// `item_id \t attr_name \t attr_value`
pub fn read_attributes<R: BufRead>(reader: R, path: &str) -> Result<Vec<(String, String, String)>> {
    let mut out = Vec::new();
    for (line_no, line) in rows(reader) {
        let line = line?;
        match line.trim_end_matches('\r').split('\t').collect::<Vec<_>>().as_slice() {
            [i, n, v] => out.push((i.to_string(), n.to_string(), v.to_string())),
            _ => return Err(Error::parse(path, line_no, "expected 3 columns")),
        }
    }
    Ok(out)
}
