//! Delimited-text posterior and feature dumps.
//!
//! Posterior dump:
//!
//! ```text
//! mia-dump v1 classes=<C> labeled=<0|1>
//! p_1,...,p_C,label[,member]
//! ```
//!
//! Feature dump (attack data, two rows per sample: view i then view j):
//!
//! ```text
//! mia-features v1 dim=<C+2>
//! v_1,...,v_D
//! ```
//!
//! Values are printed with 9 significant digits. Rows whose probabilities
//! leave the simplex are rejected, never renormalized.

use std::fmt::Write as _;
use std::path::Path;

use super::text::fmt_sig9;
use crate::error::{Error, Result};
use crate::features::SIMPLEX_TOLERANCE;

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorRow {
    pub probs: Vec<f64>,
    pub label: usize,
    pub member: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorDump {
    pub n_classes: usize,
    pub labeled: bool,
    pub rows: Vec<PosteriorRow>,
}

impl PosteriorDump {
    pub fn new(n_classes: usize, labeled: bool) -> Self {
        PosteriorDump {
            n_classes,
            labeled,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Membership bits, when every row carries one.
    pub fn membership(&self) -> Option<Vec<bool>> {
        self.rows.iter().map(|r| r.member).collect()
    }

    /// Checks the invariants that `read_posterior_dump` enforces.
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            validate_row(row, self.n_classes, self.labeled).map_err(|reason| Error::Format {
                line: i + 2,
                reason,
            })?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "mia-dump v1 classes={} labeled={}\n",
            self.n_classes,
            u8::from(self.labeled)
        );
        for row in &self.rows {
            for p in &row.probs {
                out.push_str(&fmt_sig9(*p));
                out.push(',');
            }
            write!(out, "{}", row.label).expect("string write");
            if let Some(m) = row.member {
                write!(out, ",{}", u8::from(m)).expect("string write");
            }
            out.push('\n');
        }
        out
    }
}

fn validate_row(row: &PosteriorRow, classes: usize, labeled: bool) -> std::result::Result<(), String> {
    if row.probs.len() != classes {
        return Err(format!("expected {classes} probabilities, found {}", row.probs.len()));
    }
    if let Some(p) = row.probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(format!("probability {p} outside [0, 1]"));
    }
    let sum: f64 = row.probs.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(format!("probabilities sum to {sum}, not 1"));
    }
    if row.label >= classes {
        return Err(format!("label {} out of range for {classes} classes", row.label));
    }
    if labeled != row.member.is_some() {
        return Err(if labeled {
            "missing membership bit in a labeled dump".to_string()
        } else {
            "membership bit present in an unlabeled dump".to_string()
        });
    }
    Ok(())
}

fn parse_header<'a>(line: Option<&'a str>, magic: &str) -> Result<Vec<(&'a str, &'a str)>> {
    let line = line.ok_or_else(|| Error::Format {
        line: 1,
        reason: "missing header".into(),
    })?;
    let mut parts = line.split_whitespace();
    let ok = parts.next() == Some(magic) && parts.next() == Some("v1");
    if !ok {
        return Err(Error::Format {
            line: 1,
            reason: format!("expected `{magic} v1` header"),
        });
    }
    parts
        .map(|kv| {
            kv.split_once('=').ok_or_else(|| Error::Format {
                line: 1,
                reason: format!("malformed header field `{kv}`"),
            })
        })
        .collect()
}

fn header_usize(fields: &[(&str, &str)], key: &str) -> Result<usize> {
    fields
        .iter()
        .find(|(k, _)| *k == key)
        .and_then(|(_, v)| v.parse().ok())
        .ok_or_else(|| Error::Format {
            line: 1,
            reason: format!("header field `{key}` missing or not an integer"),
        })
}

pub fn read_posterior_dump(text: &str) -> Result<PosteriorDump> {
    let mut lines = text.lines();
    let fields = parse_header(lines.next(), "mia-dump")?;
    let n_classes = header_usize(&fields, "classes")?;
    let labeled = match header_usize(&fields, "labeled")? {
        0 => false,
        1 => true,
        _ => {
            return Err(Error::Format {
                line: 1,
                reason: "labeled must be 0 or 1".into(),
            })
        }
    };
    if n_classes == 0 {
        return Err(Error::Format {
            line: 1,
            reason: "classes must be positive".into(),
        });
    }

    let mut dump = PosteriorDump::new(n_classes, labeled);
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fmt = |reason: String| Error::Format {
            line: lineno,
            reason,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = n_classes + 1 + usize::from(labeled);
        if fields.len() != expected {
            return Err(fmt(format!("expected {expected} fields, found {}", fields.len())));
        }
        let probs = fields[..n_classes]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| fmt(format!("`{f}` is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        let label = fields[n_classes]
            .parse::<usize>()
            .map_err(|_| fmt(format!("label `{}` is not a class index", fields[n_classes])))?;
        let member = if labeled {
            match fields[n_classes + 1] {
                "0" => Some(false),
                "1" => Some(true),
                other => return Err(fmt(format!("membership bit `{other}` is not 0 or 1"))),
            }
        } else {
            None
        };
        let row = PosteriorRow {
            probs,
            label,
            member,
        };
        validate_row(&row, n_classes, labeled).map_err(fmt)?;
        dump.rows.push(row);
    }
    Ok(dump)
}

pub fn load_posterior_dump(path: impl AsRef<Path>) -> Result<PosteriorDump> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_posterior_dump(&text)
}

pub fn write_posterior_dump(dump: &PosteriorDump, path: impl AsRef<Path>) -> Result<()> {
    dump.validate()?;
    crate::io::write_atomic(path.as_ref(), dump.to_text().as_bytes())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDump {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureDump {
    pub fn to_text(&self) -> String {
        let mut out = format!("mia-features v1 dim={}\n", self.dim);
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| fmt_sig9(*v)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn read_feature_dump(text: &str) -> Result<FeatureDump> {
    let mut lines = text.lines();
    let fields = parse_header(lines.next(), "mia-features")?;
    let dim = header_usize(&fields, "dim")?;
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Format {
                line: idx + 2,
                reason: "non-numeric feature value".into(),
            })?;
        if row.len() != dim || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format {
                line: idx + 2,
                reason: format!("expected {dim} finite values, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    Ok(FeatureDump { dim, rows })
}

pub fn load_feature_dump(path: impl AsRef<Path>) -> Result<FeatureDump> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_feature_dump(&text)
}

pub fn write_feature_dump(dump: &FeatureDump, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), dump.to_text().as_bytes())
}
