//! JSON symbol files (`opbmo-symbol/1`).
//!
//! ```json
//! {"schema": "opbmo-symbol/1", "depth": 2, "dim": 2, "convention": "left-plus",
//!  "mean": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]],
//!  "coeffs": [{"level": 0, "pos": 0, "matrix": [[[0.5, -1.0], ...], ...]}]}
//! ```
//!
//! Matrices are row-major arrays of `[re, im]` pairs. Coefficients that are
//! not listed are zero. A `right-plus` file is converted on load by negating
//! every coefficient.

use std::path::Path;

use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::dyadic::{DyadicIndex, HalfConvention, TreeConfig};
use crate::error::{Error, Result};
use crate::linalg::{real, Mat};
use crate::symbol::HaarSymbol;

pub const SYMBOL_SCHEMA: &str = "opbmo-symbol/1";

fn field<'a>(obj: &'a Map<String, Value>, key: &str, at: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::parse(at, format!("missing field \"{key}\"")))
}

fn as_u64(v: &Value, at: &str) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| Error::parse(at, "expected a non-negative integer"))
}

fn parse_matrix(v: &Value, n: usize, at: &str) -> Result<Mat> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::parse(at, "expected an array of rows"))?;
    if rows.len() != n {
        return Err(Error::parse(at, format!("expected {n} rows, found {}", rows.len())));
    }
    let mut m = Mat::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let row_at = format!("{at}/{i}");
        let entries = row
            .as_array()
            .ok_or_else(|| Error::parse(&row_at, "expected an array of [re, im] pairs"))?;
        if entries.len() != n {
            return Err(Error::parse(
                &row_at,
                format!("ragged row: expected {n} entries, found {}", entries.len()),
            ));
        }
        for (j, e) in entries.iter().enumerate() {
            let e_at = format!("{row_at}/{j}");
            let pair = e
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| Error::parse(&e_at, "expected a [re, im] pair"))?;
            let re = pair[0]
                .as_f64()
                .ok_or_else(|| Error::parse(format!("{e_at}/0"), "expected a number"))?;
            let im = pair[1]
                .as_f64()
                .ok_or_else(|| Error::parse(format!("{e_at}/1"), "expected a number"))?;
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

fn matrix_json(m: &Mat) -> Result<Value> {
    let mut rows = Vec::with_capacity(m.nrows());
    for i in 0..m.nrows() {
        let mut row = Vec::with_capacity(m.ncols());
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::Numeric("cannot serialize a non-finite entry".into()));
            }
            row.push(json!([z.re, z.im]));
        }
        rows.push(Value::Array(row));
    }
    Ok(Value::Array(rows))
}

/// Parses a symbol from a JSON value; errors carry a JSON pointer.
pub fn symbol_from_json(v: &Value) -> Result<HaarSymbol> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::parse("", "expected a JSON object"))?;
    match field(obj, "schema", "")?.as_str() {
        Some(SYMBOL_SCHEMA) => {}
        Some(other) => {
            return Err(Error::parse(
                "/schema",
                format!("unsupported schema \"{other}\", expected \"{SYMBOL_SCHEMA}\""),
            ))
        }
        None => return Err(Error::parse("/schema", "expected a string")),
    }
    let depth = as_u64(field(obj, "depth", "")?, "/depth")?;
    let dim = as_u64(field(obj, "dim", "")?, "/dim")?;
    let cfg = TreeConfig::new(
        u32::try_from(depth).map_err(|_| Error::parse("/depth", "depth too large"))?,
        dim as usize,
    )
    .map_err(|e| Error::parse("", e.to_string()))?;
    let convention = match obj.get("convention").map(|c| c.as_str()) {
        None | Some(Some("left-plus")) => HalfConvention::LeftPlus,
        Some(Some("right-plus")) => HalfConvention::RightPlus,
        _ => {
            return Err(Error::parse(
                "/convention",
                "expected \"left-plus\" or \"right-plus\"",
            ))
        }
    };
    let n = cfg.dim;
    let mean = match obj.get("mean") {
        Some(m) => parse_matrix(m, n, "/mean")?,
        None => Mat::zeros(n, n),
    };
    let mut out = HaarSymbol::zero(cfg, n, n);
    out.set_mean(mean)?;
    let coeffs = field(obj, "coeffs", "")?
        .as_array()
        .ok_or_else(|| Error::parse("/coeffs", "expected an array"))?;
    let mut seen = vec![false; cfg.intervals()];
    for (k, entry) in coeffs.iter().enumerate() {
        let at = format!("/coeffs/{k}");
        let e = entry
            .as_object()
            .ok_or_else(|| Error::parse(&at, "expected an object"))?;
        let level = as_u64(field(e, "level", &at)?, &format!("{at}/level"))?;
        let pos = as_u64(field(e, "pos", &at)?, &format!("{at}/pos"))?;
        if level >= depth || pos >= (1u64 << level) {
            return Err(Error::parse(
                &at,
                format!("interval ({level},{pos}) is outside a depth-{depth} tree"),
            ));
        }
        let index = DyadicIndex::new(level as u32, pos)?;
        if std::mem::replace(&mut seen[index.bfs()], true) {
            return Err(Error::parse(&at, format!("duplicate coefficient {index}")));
        }
        let mut m = parse_matrix(field(e, "matrix", &at)?, n, &format!("{at}/matrix"))?;
        if convention == HalfConvention::RightPlus {
            m *= real(-1.0);
        }
        out.set_coeff(index, m)?;
    }
    Ok(out)
}

pub fn symbol_to_json(b: &HaarSymbol) -> Result<Value> {
    b.require_operator()?;
    let cfg = b.cfg();
    let coeffs = b
        .iter()
        .map(|(i, m)| {
            Ok(json!({
                "level": i.level,
                "pos": i.position,
                "matrix": matrix_json(m)?,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({
        "schema": SYMBOL_SCHEMA,
        "depth": cfg.depth,
        "dim": cfg.dim,
        "convention": HalfConvention::LeftPlus.as_str(),
        "mean": matrix_json(b.mean())?,
        "coeffs": coeffs,
    }))
}

pub fn parse_symbol(text: &str) -> Result<HaarSymbol> {
    let v: Value = serde_json::from_str(text).map_err(|e| {
        Error::parse("", format!("invalid JSON at line {} column {}: {e}", e.line(), e.column()))
    })?;
    symbol_from_json(&v)
}

pub fn read_symbol(path: &Path) -> Result<HaarSymbol> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_symbol(&text)
}

pub fn write_symbol(path: &Path, b: &HaarSymbol) -> Result<()> {
    let text = serde_json::to_string_pretty(&symbol_to_json(b)?).expect("JSON values serialize");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))
}
