//! Report serialization.
//!
//! Floats are written with 17 significant digits in scientific notation, which
//! round-trips every `f64` exactly.

use std::fmt::Write;

use crate::bounds::{BoundReport, Inequality, Method};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "inequality,epsilon,lhs,ci_halfwidth,rhs,holds,slack,method";

/// `v` with 17 significant digits, e.g. `2.5000000000000000e-1`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Sort key used for every emitted report stream.
pub fn sort_reports(reports: &mut [BoundReport]) {
    reports.sort_by(|a, b| a.inequality.cmp(&b.inequality).then(a.epsilon.total_cmp(&b.epsilon)));
}

pub fn to_csv(reports: &[BoundReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.inequality,
            fmt17(r.epsilon),
            fmt17(r.lhs),
            fmt17(r.ci_halfwidth),
            fmt17(r.rhs),
            r.holds,
            fmt17(r.slack),
            r.method.name()
        )
        .expect("writing to a String");
    }
    out
}

fn json_object(r: &BoundReport) -> String {
    let mut s = format!(
        "{{\"inequality\":\"{}\",\"epsilon\":{},\"lhs\":{},\"ci_halfwidth\":{},\"rhs\":{},\"holds\":{},\"slack\":{},\"method\":\"{}\"",
        r.inequality,
        fmt17(r.epsilon),
        fmt17(r.lhs),
        fmt17(r.ci_halfwidth),
        fmt17(r.rhs),
        r.holds,
        fmt17(r.slack),
        r.method.name()
    );
    if let Some(n) = r.norm_interval {
        write!(
            s,
            ",\"norm_interval\":{{\"lower\":{},\"upper\":{},\"exact\":{}}}",
            fmt17(n.lower),
            fmt17(n.upper),
            n.exact
        )
        .expect("writing to a String");
    }
    s.push('}');
    s
}

pub fn to_json(reports: &[BoundReport]) -> String {
    let rows: Vec<String> = reports.iter().map(|r| format!("  {}", json_object(r))).collect();
    if rows.is_empty() {
        "[]\n".to_string()
    } else {
        format!("[\n{}\n]\n", rows.join(",\n"))
    }
}

pub fn from_json(text: &str) -> std::result::Result<Vec<BoundReport>, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn from_csv(text: &str) -> Result<Vec<BoundReport>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Domain("report CSV is missing its header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| Error::Domain(format!("report CSV row {}: bad {what}", i + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad("column count"));
            }
            let num = |k: usize, what: &str| f[k].parse::<f64>().map_err(|_| bad(what));
            let method = match f[7] {
                "exact-enumeration" => Method::ExactEnumeration,
                "monte-carlo" => Method::MonteCarlo,
                _ => return Err(bad("method")),
            };
            Ok(BoundReport {
                inequality: f[0].parse::<Inequality>()?,
                epsilon: num(1, "epsilon")?,
                lhs: num(2, "lhs")?,
                ci_halfwidth: num(3, "ci_halfwidth")?,
                rhs: num(4, "rhs")?,
                holds: f[5].parse().map_err(|_| bad("holds"))?,
                slack: num(6, "slack")?,
                method,
                norm_interval: None,
            })
        })
        .collect()
}
