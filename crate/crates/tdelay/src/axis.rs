//! Textual axis specifications shared by histogram bins and evaluation grids.
//!
//! Grammar: `log:LO:HI:COUNT`, `lin:LO:HI:COUNT`, or a comma-separated list of
//! numbers.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted `COUNT`.
pub const MAX_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AxisSpec {
    Log { lo: f64, hi: f64, count: usize },
    Lin { lo: f64, hi: f64, count: usize },
    List(Vec<f64>),
}

fn parse_err(token: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        token: token.to_string(),
        reason: reason.into(),
    }
}

/// Parses one finite float.
pub fn parse_float(token: &str) -> Result<f64> {
    let t = token.trim();
    let v: f64 = t.parse().map_err(|_| parse_err(t, "not a number"))?;
    if !v.is_finite() {
        return Err(parse_err(t, "not finite"));
    }
    Ok(v)
}

/// Parses `a,b,c` into finite floats; empty input is an error.
pub fn parse_float_list(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Err(parse_err(s, "empty list"));
    }
    s.split(',').map(parse_float).collect()
}

impl FromStr for AxisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let Some((kind, rest)) = s.split_once(':') else {
            let values = parse_float_list(s)?;
            return AxisSpec::List(values).validated();
        };
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(parse_err(s, "expected KIND:LO:HI:COUNT"));
        }
        let lo = parse_float(parts[0])?;
        let hi = parse_float(parts[1])?;
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(parts[2], "count must be a non-negative integer"))?;
        let spec = match kind.trim() {
            "log" => AxisSpec::Log { lo, hi, count },
            "lin" => AxisSpec::Lin { lo, hi, count },
            other => return Err(parse_err(other, "unknown axis kind (use log or lin)")),
        };
        spec.validated()
    }
}

impl AxisSpec {
    fn validated(self) -> Result<Self> {
        match &self {
            AxisSpec::Log { lo, hi, count } | AxisSpec::Lin { lo, hi, count } => {
                if *count == 0 || *count > MAX_POINTS {
                    return Err(parse_err(&count.to_string(), "count out of range"));
                }
                if !(lo < hi) {
                    return Err(parse_err(&format!("{lo}:{hi}"), "LO must be below HI"));
                }
                if matches!(self, AxisSpec::Log { .. }) && !(*lo > 0.0) {
                    return Err(parse_err(&lo.to_string(), "log axis needs LO > 0"));
                }
            }
            AxisSpec::List(v) => {
                if v.len() > MAX_POINTS {
                    return Err(parse_err("list", "too many points"));
                }
                if v.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(parse_err("list", "values must be strictly increasing"));
                }
            }
        }
        Ok(self)
    }

    /// `count` evenly spaced points (in log or linear scale) from LO to HI
    /// inclusive, or the explicit list.
    pub fn points(&self) -> Vec<f64> {
        match *self {
            AxisSpec::Log { lo, hi, count } => spaced(lo, hi, count, true),
            AxisSpec::Lin { lo, hi, count } => spaced(lo, hi, count, false),
            AxisSpec::List(ref v) => v.clone(),
        }
    }

    /// Edges of `count` bins spanning LO to HI, or the explicit list as edges.
    pub fn edges(&self) -> Result<Vec<f64>> {
        let e = match *self {
            AxisSpec::Log { lo, hi, count } => spaced(lo, hi, count + 1, true),
            AxisSpec::Lin { lo, hi, count } => spaced(lo, hi, count + 1, false),
            AxisSpec::List(ref v) => v.clone(),
        };
        if e.len() < 2 {
            return Err(parse_err("list", "at least two edges are required"));
        }
        Ok(e)
    }
}

fn spaced(lo: f64, hi: f64, count: usize, log: bool) -> Vec<f64> {
    let (a, b) = if log { (lo.ln(), hi.ln()) } else { (lo, hi) };
    let mut out: Vec<f64> = (0..count)
        .map(|i| {
            let x = if count == 1 {
                a
            } else {
                a + (b - a) * i as f64 / (count - 1) as f64
            };
            if log {
                x.exp()
            } else {
                x
            }
        })
        .collect();
    // Pin the end points so that round-off does not move them.
    if let Some(first) = out.first_mut() {
        *first = lo;
    }
    if count > 1 {
        if let Some(last) = out.last_mut() {
            *last = hi;
        }
    }
    out
}
