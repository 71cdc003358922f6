//! Plain-text method files.
//!
//! ```text
//! # comment
//! name=ssprk33
//! class=explicit
//! s=3
//! p=3
//! A:
//! 0 0 0
//! 1 0 0
//! 1/4 1/4 0
//! b:
//! 1/6 1/6 2/3
//! ```
//!
//! Numbers may be decimals or `p/q` fractions. Saving writes the shortest
//! decimal that reads back to the same `f64`, so a save/load cycle is exact.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{
    parse_number, shu_osher_to_butcher, ButcherTableau, ImexTableau, KValue, MethodInfo,
    ShuOsherForm, Structure,
};
use crate::error::{Error, Result};

/// Any method a file can describe.
#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    Butcher(ButcherTableau),
    Imex(ImexTableau),
    ShuOsher(ShuOsherForm),
}

impl Method {
    pub fn info(&self) -> &MethodInfo {
        match self {
            Method::Butcher(t) => t.info(),
            Method::Imex(t) => t.info(),
            Method::ShuOsher(t) => t.info(),
        }
    }

    pub fn name(&self) -> &str {
        self.info().name.as_deref().unwrap_or("unnamed")
    }

    pub fn stages(&self) -> usize {
        match self {
            Method::Butcher(t) => t.stages(),
            Method::Imex(t) => t.stages(),
            Method::ShuOsher(t) => t.stages(),
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            Method::Butcher(t) => t.structure().as_str(),
            Method::Imex(_) => "imex",
            Method::ShuOsher(_) => "shu-osher",
        }
    }

    /// The Butcher tableau of a single-part method. Shu–Osher forms are
    /// converted; IMEX pairs are rejected.
    pub fn to_butcher(&self) -> Result<ButcherTableau> {
        match self {
            Method::Butcher(t) => Ok(t.clone()),
            Method::ShuOsher(so) => shu_osher_to_butcher(so),
            Method::Imex(_) => Err(Error::Mismatch(
                "an IMEX pair has no single Butcher tableau".into(),
            )),
        }
    }

    pub fn into_imex(self) -> Result<ImexTableau> {
        match self {
            Method::Imex(t) => Ok(t),
            other => Err(Error::Mismatch(format!(
                "'{}' is a {} method, not an IMEX pair",
                other.name(),
                other.class()
            ))),
        }
    }
}

impl From<ButcherTableau> for Method {
    fn from(t: ButcherTableau) -> Self {
        Method::Butcher(t)
    }
}

impl From<ImexTableau> for Method {
    fn from(t: ImexTableau) -> Self {
        Method::Imex(t)
    }
}

impl From<ShuOsherForm> for Method {
    fn from(t: ShuOsherForm) -> Self {
        Method::ShuOsher(t)
    }
}

pub fn load_method(path: impl AsRef<Path>) -> Result<Method> {
    let text = std::fs::read_to_string(path)?;
    parse_method(&text)
}

pub fn save_method(method: &Method, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_method(method))?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Block {
    A,
    B,
    At,
    Bt,
    Alpha,
    Beta,
    V,
}

impl Block {
    fn from_label(label: &str) -> Option<Block> {
        Some(match label {
            "A" => Block::A,
            "b" => Block::B,
            "At" => Block::At,
            "bt" => Block::Bt,
            "alpha" => Block::Alpha,
            "beta" => Block::Beta,
            "v" => Block::V,
            _ => return None,
        })
    }

    fn label(self) -> &'static str {
        match self {
            Block::A => "A",
            Block::B => "b",
            Block::At => "At",
            Block::Bt => "bt",
            Block::Alpha => "alpha",
            Block::Beta => "beta",
            Block::V => "v",
        }
    }

    /// Expected (rows, columns) for a method with `s` stages.
    fn shape(self, s: usize) -> (usize, usize) {
        match self {
            Block::A | Block::At => (s, s),
            Block::B | Block::Bt => (1, s),
            Block::Alpha | Block::Beta => (s + 1, s),
            Block::V => (1, s + 1),
        }
    }
}

#[derive(Default)]
struct Header {
    name: Option<String>,
    class: Option<String>,
    s: Option<usize>,
    p: Option<usize>,
    p_lin: Option<usize>,
    p_e: Option<usize>,
    p_i: Option<usize>,
    ssp_coefficient: Option<f64>,
    k_designed: Option<KValue>,
    r: Option<f64>,
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::parse(line, format!("{key} must be a nonnegative integer, got '{v}'")))
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    parse_number(v).ok_or_else(|| Error::parse(line, format!("{key} must be a number, got '{v}'")))
}

fn set_once<T>(slot: &mut Option<T>, value: T, line: usize, key: &str) -> Result<()> {
    if slot.is_some() {
        return Err(Error::parse(line, format!("duplicate key '{key}'")));
    }
    *slot = Some(value);
    Ok(())
}

impl Header {
    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        match key {
            "name" => set_once(&mut self.name, value.to_string(), line, key),
            "class" => set_once(&mut self.class, value.to_string(), line, key),
            "s" => {
                let s = parse_usize(line, key, value)?;
                if s == 0 {
                    return Err(Error::parse(line, "s must be positive"));
                }
                set_once(&mut self.s, s, line, key)
            }
            "p" => set_once(&mut self.p, parse_usize(line, key, value)?, line, key),
            "p_lin" => set_once(&mut self.p_lin, parse_usize(line, key, value)?, line, key),
            "p_e" => set_once(&mut self.p_e, parse_usize(line, key, value)?, line, key),
            "p_i" => set_once(&mut self.p_i, parse_usize(line, key, value)?, line, key),
            "ssp_coefficient" => {
                let v = parse_f64(line, key, value)?;
                set_once(&mut self.ssp_coefficient, v, line, key)
            }
            "k_designed" => {
                let k = KValue::parse(value).map_err(|e| Error::parse(line, e.to_string()))?;
                set_once(&mut self.k_designed, k, line, key)
            }
            "r" => {
                let v = parse_f64(line, key, value)?;
                set_once(&mut self.r, v, line, key)
            }
            _ => Err(Error::parse(line, format!("unknown key '{key}'"))),
        }
    }

    fn info(&self) -> MethodInfo {
        MethodInfo {
            name: self.name.clone(),
            p: self.p,
            p_lin: self.p_lin,
            p_e: self.p_e,
            p_i: self.p_i,
            ssp_coefficient: self.ssp_coefficient,
            k_designed: self.k_designed,
        }
    }
}

struct ParsedBlock {
    line: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

/// Parses the text of a method file.
pub fn parse_method(text: &str) -> Result<Method> {
    let mut header = Header::default();
    let mut blocks: Vec<(Block, ParsedBlock)> = Vec::new();
    let mut current: Option<(Block, ParsedBlock, usize)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((block, mut pb, expected)) = current.take() {
            if pb.rows.len() < expected {
                let values = line
                    .split_whitespace()
                    .map(|tok| {
                        parse_number(tok).ok_or_else(|| {
                            Error::parse(
                                line_no,
                                format!("expected a number in block '{}', got '{tok}'", block.label()),
                            )
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                pb.rows.push((line_no, values));
                if pb.rows.len() < expected {
                    current = Some((block, pb, expected));
                } else {
                    blocks.push((block, pb));
                }
                continue;
            }
            blocks.push((block, pb));
        }
        if let Some(label) = line.strip_suffix(':') {
            let block = Block::from_label(label.trim())
                .ok_or_else(|| Error::parse(line_no, format!("unknown block '{label}'")))?;
            if blocks.iter().any(|(b, _)| *b == block) {
                return Err(Error::parse(line_no, format!("duplicate block '{label}'")));
            }
            let s = header
                .s
                .ok_or_else(|| Error::parse(line_no, "s= must precede the coefficient blocks"))?;
            let (rows, _) = block.shape(s);
            current = Some((
                block,
                ParsedBlock {
                    line: line_no,
                    rows: Vec::new(),
                },
                rows,
            ));
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            header.set(line_no, key.trim(), value.trim())?;
            continue;
        }
        return Err(Error::parse(line_no, format!("unexpected content '{line}'")));
    }
    if let Some((block, pb, expected)) = current {
        return Err(Error::parse(
            pb.line,
            format!(
                "block '{}' has {} rows, expected {expected}",
                block.label(),
                pb.rows.len()
            ),
        ));
    }

    let s = header
        .s
        .ok_or_else(|| Error::parse(1, "missing required key 's'"))?;
    let class = header
        .class
        .clone()
        .ok_or_else(|| Error::parse(1, "missing required key 'class'"))?;

    let mut take = |which: Block| -> Result<Option<DMatrix<f64>>> {
        let Some(pos) = blocks.iter().position(|(b, _)| *b == which) else {
            return Ok(None);
        };
        let (_, pb) = blocks.remove(pos);
        let (rows, cols) = which.shape(s);
        for (line, row) in &pb.rows {
            if row.len() != cols {
                return Err(Error::Validation(format!(
                    "line {line}: block '{}' row has {} entries, expected {cols} (s = {s})",
                    which.label(),
                    row.len()
                )));
            }
        }
        Ok(Some(DMatrix::from_fn(rows, cols, |i, j| pb.rows[i].1[j])))
    };
    let require = |m: Option<DMatrix<f64>>, which: Block| -> Result<DMatrix<f64>> {
        m.ok_or_else(|| {
            Error::Validation(format!("class '{class}' requires a '{}:' block", which.label()))
        })
    };
    let row_vector = |m: DMatrix<f64>| DVector::from_iterator(m.ncols(), m.iter().cloned());

    let info = header.info();
    let method = match class.as_str() {
        "explicit" | "dirk" | "sdirk" | "full" => {
            if header.r.is_some() {
                return Err(Error::Validation("key 'r' applies only to shu-osher files".into()));
            }
            let a = require(take(Block::A)?, Block::A)?;
            let b = row_vector(require(take(Block::B)?, Block::B)?);
            let structure = Structure::parse(&class).expect("matched above");
            Method::Butcher(ButcherTableau::with_structure(a, b, structure)?.with_info(info))
        }
        "imex" => {
            if header.r.is_some() {
                return Err(Error::Validation("key 'r' applies only to shu-osher files".into()));
            }
            let a = require(take(Block::A)?, Block::A)?;
            let b = row_vector(require(take(Block::B)?, Block::B)?);
            let at = require(take(Block::At)?, Block::At)?;
            let bt = row_vector(require(take(Block::Bt)?, Block::Bt)?);
            let explicit = ButcherTableau::new(a, b)?;
            let implicit = ButcherTableau::new(at, bt)?;
            Method::Imex(ImexTableau::new(explicit, implicit)?.with_info(info))
        }
        "shu-osher" => {
            let alpha = require(take(Block::Alpha)?, Block::Alpha)?;
            let beta = take(Block::Beta)?;
            let v = take(Block::V)?.map(row_vector);
            let form = match beta {
                Some(beta) => {
                    let v = v.unwrap_or_else(|| {
                        DVector::from_fn(alpha.nrows(), |i, _| 1.0 - alpha.row(i).sum())
                    });
                    ShuOsherForm::new(alpha, beta, v, header.r)?
                }
                None => {
                    let r = header.r.ok_or_else(|| {
                        Error::Validation("a shu-osher file needs either 'beta:' or 'r='".into())
                    })?;
                    ShuOsherForm::canonical(alpha, r, v)?
                }
            };
            Method::ShuOsher(form.with_info(info))
        }
        other => {
            return Err(Error::Validation(format!("unknown class '{other}'")));
        }
    };
    if let Some((block, pb)) = blocks.first() {
        return Err(Error::Validation(format!(
            "line {}: block '{}' is not used by class '{}'",
            pb.line,
            block.label(),
            method.class()
        )));
    }
    if method.stages() != s {
        return Err(Error::Validation(format!(
            "s={s} does not match the coefficient blocks"
        )));
    }
    Ok(method)
}

fn write_rows(out: &mut String, label: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "{label}:");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

fn write_vector(out: &mut String, label: &str, v: &DVector<f64>) {
    let _ = writeln!(out, "{label}:");
    let row: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    let _ = writeln!(out, "{}", row.join(" "));
}

fn write_header(out: &mut String, info: &MethodInfo, class: &str, s: usize) {
    if let Some(name) = &info.name {
        let _ = writeln!(out, "name={name}");
    }
    let _ = writeln!(out, "class={class}");
    let _ = writeln!(out, "s={s}");
    for (key, val) in [("p", info.p), ("p_lin", info.p_lin), ("p_e", info.p_e), ("p_i", info.p_i)] {
        if let Some(v) = val {
            let _ = writeln!(out, "{key}={v}");
        }
    }
    if let Some(c) = info.ssp_coefficient {
        let _ = writeln!(out, "ssp_coefficient={c}");
    }
    if let Some(k) = info.k_designed {
        let _ = writeln!(out, "k_designed={k}");
    }
}

/// Renders a method in the file format read by [`parse_method`].
pub fn write_method(method: &Method) -> String {
    let mut out = String::new();
    write_header(&mut out, method.info(), method.class(), method.stages());
    match method {
        Method::Butcher(t) => {
            write_rows(&mut out, "A", t.a());
            write_vector(&mut out, "b", t.b());
        }
        Method::Imex(t) => {
            write_rows(&mut out, "A", t.explicit().a());
            write_vector(&mut out, "b", t.explicit().b());
            write_rows(&mut out, "At", t.implicit().a());
            write_vector(&mut out, "bt", t.implicit().b());
        }
        Method::ShuOsher(so) => {
            if let Some(r) = so.r() {
                let _ = writeln!(out, "r={r}");
            }
            write_rows(&mut out, "alpha", so.alpha());
            write_rows(&mut out, "beta", so.beta());
            write_vector(&mut out, "v", so.v());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SSPRK33: &str = "\
# Shu-Osher third order
name=ssprk33
class=explicit
s=3
p=3
p_lin=3
ssp_coefficient=1

A:
0 0 0
1 0 0
1/4 1/4 0
b:
1/6 1/6 2/3
";

    #[test]
    fn parses_fractions_and_metadata() {
        let m = parse_method(SSPRK33).unwrap();
        let Method::Butcher(t) = &m else { panic!("wrong class") };
        assert_eq!(t.b()[2], 2.0 / 3.0);
        assert_eq!(t.a()[(2, 1)], 0.25);
        assert_eq!(t.info().p, Some(3));
        assert_eq!(t.info().ssp_coefficient, Some(1.0));
        assert_eq!(m.name(), "ssprk33");
    }

    #[test]
    fn write_then_parse_is_exact() {
        let m = parse_method(SSPRK33).unwrap();
        let text = write_method(&m);
        assert_eq!(parse_method(&text).unwrap(), m);
    }

    #[test]
    fn short_b_is_a_validation_error() {
        let bad = SSPRK33.replace("1/6 1/6 2/3", "1/6 1/6");
        assert!(matches!(parse_method(&bad), Err(Error::Validation(_))));
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let bad = format!("{SSPRK33}extra stuff\n");
        assert!(matches!(parse_method(&bad), Err(Error::Parse { line: 15, .. })));
        let bad = format!("{SSPRK33}1 2 3\n");
        assert!(parse_method(&bad).is_err());
    }

    #[test]
    fn unknown_keys_and_bad_numbers_report_lines() {
        let bad = SSPRK33.replace("p_lin=3", "q=3");
        assert!(matches!(parse_method(&bad), Err(Error::Parse { line: 6, .. })));
        let bad = SSPRK33.replace("1/4 1/4 0", "1/4 x 0");
        assert!(matches!(parse_method(&bad), Err(Error::Parse { line: 12, .. })));
    }

    #[test]
    fn missing_rows_reported() {
        let bad = SSPRK33.replace("1/4 1/4 0\n", "");
        assert!(parse_method(&bad).is_err());
    }

    #[test]
    fn declared_class_checked() {
        let bad = SSPRK33.replace("0 0 0\n1 0 0", "0.5 0 0\n1 0 0");
        assert!(matches!(parse_method(&bad), Err(Error::Validation(_))));
    }

    #[test]
    fn shu_osher_without_beta_uses_r() {
        let text = "\
class=shu-osher
s=1
r=2
alpha:
0
1
v:
1 0
";
        let Method::ShuOsher(so) = parse_method(text).unwrap() else { panic!() };
        assert_eq!(so.beta()[(1, 0)], 0.5);
        assert_eq!(so.r(), Some(2.0));
        let back = parse_method(&write_method(&Method::ShuOsher(so.clone()))).unwrap();
        assert_eq!(back, Method::ShuOsher(so));
    }

    #[test]
    fn imex_round_trip() {
        let text = "\
name=pair
class=imex
s=2
p_e=2
p_i=2
k_designed=inf
A:
0 0
1 0
b:
0.5 0.5
At:
0 0
0.5 0.5
bt:
0.5 0.5
";
        let m = parse_method(text).unwrap();
        assert!(matches!(m, Method::Imex(_)));
        assert_eq!(m.info().k_designed, Some(KValue::Infinite));
        assert_eq!(parse_method(&write_method(&m)).unwrap(), m);
    }
}
