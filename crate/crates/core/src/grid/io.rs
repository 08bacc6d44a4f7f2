//! `.pfld` field files and CSV export.
//!
//! ```text
//! PFLD 1
//! m=2
//! counts=65 65
//! lower=0 0
//! upper=1 1
//! kind=scalar | kind=vector c=<m> | kind=skew c=<m(m-1)/2> | kind=alt3 c=<C(m,3)>
//! <values, one per line, block after block>
//! ```
//!
//! Values are written with 17 significant digits, which round-trips every
//! finite `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::{GridDomain, ScalarField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Vector,
    Skew,
    Alt3,
}

impl FieldKind {
    /// Number of value blocks a field of this kind carries in dimension `m`.
    pub fn blocks(self, m: usize) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Vector => m,
            FieldKind::Skew => m * (m - 1) / 2,
            FieldKind::Alt3 => m * (m - 1) * (m.saturating_sub(2)) / 6,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            FieldKind::Scalar => "scalar",
            FieldKind::Vector => "vector",
            FieldKind::Skew => "skew",
            FieldKind::Alt3 => "alt3",
        }
    }
}

/// Raw contents of a `.pfld` file.
#[derive(Debug, Clone)]
pub struct FieldFile {
    pub domain: GridDomain,
    pub kind: FieldKind,
    pub blocks: Vec<Vec<f64>>,
}

/// 17 significant digits, enough to round-trip; `-0` prints as `0`.
pub fn format_value(v: f64) -> String {
    let v = v + 0.0;
    format!("{v:.16e}")
}

pub fn encode(domain: &GridDomain, kind: FieldKind, blocks: &[&[f64]]) -> Result<String> {
    let m = domain.dim();
    let expected = kind.blocks(m);
    if blocks.len() != expected {
        return Err(Error::Length {
            expected,
            got: blocks.len(),
        });
    }
    let join = |xs: &[f64]| {
        xs.iter()
            .map(|x| format_value(*x))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = String::with_capacity(24 * domain.len() * blocks.len().max(1) + 128);
    out.push_str("PFLD 1\n");
    let _ = writeln!(out, "m={m}");
    let counts: Vec<String> = domain.counts().iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "counts={}", counts.join(" "));
    let _ = writeln!(out, "lower={}", join(domain.lower()));
    let _ = writeln!(out, "upper={}", join(domain.upper()));
    match kind {
        FieldKind::Scalar => out.push_str("kind=scalar\n"),
        _ => {
            let _ = writeln!(out, "kind={} c={}", kind.tag(), expected);
        }
    }
    for block in blocks {
        if block.len() != domain.len() {
            return Err(Error::Length {
                expected: domain.len(),
                got: block.len(),
            });
        }
        for v in block.iter() {
            if !v.is_finite() {
                return Err(Error::Format("refusing to write a non-finite value".into()));
            }
            out.push_str(&format_value(*v));
            out.push('\n');
        }
    }
    Ok(out)
}

fn header_value<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| Error::Format(format!("missing `{key}=` line")))?;
    line.trim()
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| Error::Format(format!("expected `{key}=`, found `{}`", line.trim())))
}

fn parse_list<T: std::str::FromStr>(s: &str, key: &str, m: usize) -> Result<Vec<T>> {
    let items = s
        .split_whitespace()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| Error::Format(format!("bad {key} entry `{t}`")))
        })
        .collect::<Result<Vec<T>>>()?;
    if items.len() != m {
        return Err(Error::Format(format!(
            "{key} has {} entries, expected {m}",
            items.len()
        )));
    }
    Ok(items)
}

pub fn decode(text: &str) -> Result<FieldFile> {
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("PFLD 1") => {}
        other => {
            return Err(Error::Format(format!(
                "bad magic line {:?}, expected `PFLD 1`",
                other.unwrap_or("")
            )))
        }
    }
    let m: usize = header_value(lines.next(), "m")?
        .trim()
        .parse()
        .map_err(|_| Error::Format("bad m".into()))?;
    if !(2..=6).contains(&m) {
        return Err(Error::Format(format!("m={m} out of range")));
    }
    let counts: Vec<usize> = parse_list(header_value(lines.next(), "counts")?, "counts", m)?;
    let lower: Vec<f64> = parse_list(header_value(lines.next(), "lower")?, "lower", m)?;
    let upper: Vec<f64> = parse_list(header_value(lines.next(), "upper")?, "upper", m)?;
    let domain = GridDomain::new(&lower, &upper, &counts)
        .map_err(|e| Error::Format(format!("invalid domain: {e}")))?;

    let kind_line = header_value(lines.next(), "kind")?;
    let mut parts = kind_line.split_whitespace();
    let kind = match parts.next() {
        Some("scalar") => FieldKind::Scalar,
        Some("vector") => FieldKind::Vector,
        Some("skew") => FieldKind::Skew,
        Some("alt3") => FieldKind::Alt3,
        other => return Err(Error::Format(format!("unknown kind {other:?}"))),
    };
    let nblocks = kind.blocks(m);
    if kind != FieldKind::Scalar {
        let c: usize = parts
            .next()
            .and_then(|t| t.strip_prefix("c="))
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Format("missing c=<blocks> on kind line".into()))?;
        if c != nblocks {
            return Err(Error::Format(format!(
                "kind={} with m={m} needs c={nblocks}, found c={c}",
                kind.tag()
            )));
        }
    }

    let n = domain.len();
    let mut values = Vec::with_capacity(n * nblocks);
    for tok in lines.flat_map(str::split_whitespace) {
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::Format(format!("bad value token `{tok}`")))?;
        if !v.is_finite() {
            return Err(Error::Format(format!("non-finite value token `{tok}`")));
        }
        values.push(v);
    }
    if values.len() != n * nblocks {
        return Err(Error::Format(format!(
            "count mismatch: {} values, expected {}",
            values.len(),
            n * nblocks
        )));
    }
    let blocks = values.chunks(n.max(1)).take(nblocks).map(<[f64]>::to_vec).collect();
    Ok(FieldFile {
        domain,
        kind,
        blocks,
    })
}

pub fn write_file(path: &Path, domain: &GridDomain, kind: FieldKind, blocks: &[&[f64]]) -> Result<()> {
    let text = encode(domain, kind, blocks)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<FieldFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode(&text)
}

pub fn write_field(f: &ScalarField, path: &Path) -> Result<()> {
    write_file(path, f.domain(), FieldKind::Scalar, &[f.values()])
}

pub fn write_vector(v: &VectorField, path: &Path) -> Result<()> {
    let blocks: Vec<&[f64]> = v.components().iter().map(ScalarField::values).collect();
    write_file(path, v.domain(), FieldKind::Vector, &blocks)
}

impl FieldFile {
    pub fn into_scalar(self) -> Result<ScalarField> {
        if self.kind != FieldKind::Scalar {
            return Err(Error::Format(format!(
                "expected kind=scalar, found kind={}",
                self.kind.tag()
            )));
        }
        let domain = Arc::new(self.domain);
        ScalarField::new(domain, self.blocks.into_iter().next().unwrap_or_default())
    }

    pub fn into_vector(self) -> Result<VectorField> {
        if self.kind != FieldKind::Vector {
            return Err(Error::Format(format!(
                "expected kind=vector, found kind={}",
                self.kind.tag()
            )));
        }
        let domain = Arc::new(self.domain);
        let comps = self
            .blocks
            .into_iter()
            .map(|b| ScalarField::new(domain.clone(), b))
            .collect::<Result<Vec<_>>>()?;
        VectorField::new(comps)
    }
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    read_file(path)?.into_scalar()
}

pub fn read_vector(path: &Path) -> Result<VectorField> {
    read_file(path)?.into_vector()
}

/// One row per node: coordinates `x1..xm`, then one column per named field.
pub fn csv_string(domain: &GridDomain, columns: &[(&str, &[f64])]) -> Result<String> {
    for (name, col) in columns {
        if col.len() != domain.len() {
            return Err(Error::InvalidArgument(format!(
                "CSV column `{name}` has {} rows, expected {}",
                col.len(),
                domain.len()
            )));
        }
    }
    let m = domain.dim();
    let mut out = String::new();
    let mut header: Vec<String> = (1..=m).map(|a| format!("x{a}")).collect();
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    out.push_str(&header.join(","));
    out.push('\n');
    let mut x = vec![0.0; m];
    for k in 0..domain.len() {
        domain.coords_into(k, &mut x);
        let mut row: Vec<String> = x.iter().map(|v| format_value(*v)).collect();
        row.extend(columns.iter().map(|(_, c)| format_value(c[k])));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_csv(path: &Path, domain: &GridDomain, columns: &[(&str, &[f64])]) -> Result<()> {
    let text = csv_string(domain, columns)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
