//! Line-oriented tensor text format.
//!
//! ```text
//! # comment
//! 3 4            <- order and dimension; append `general` for per-position tensors
//! 1 2 3 0.5      <- 1-based indices, then the coefficient
//! ```
//!
//! Symmetric files store one sorted tuple per monomial with its total
//! coefficient. Coefficients are written in shortest round-trip form.

use std::fmt::Write as _;

use super::{SymTensor, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum TensorFile {
    Symmetric(SymTensor),
    General(Tensor),
}

impl TensorFile {
    pub fn order(&self) -> usize {
        match self {
            TensorFile::Symmetric(t) => t.order(),
            TensorFile::General(t) => t.order(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TensorFile::Symmetric(t) => t.dim(),
            TensorFile::General(t) => t.dim(),
        }
    }

    /// Per-position coefficient tensor of the decoupled objective.
    pub fn decoupled(&self) -> Tensor {
        match self {
            TensorFile::Symmetric(t) => t.to_tensor(),
            TensorFile::General(t) => t.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            TensorFile::Symmetric(t) => write_sym_tensor(t),
            TensorFile::General(t) => write_tensor(t),
        }
    }
}

fn write_entries<'a>(out: &mut String, entries: impl Iterator<Item = (&'a [usize], f64)>) {
    for (idx, c) in entries {
        for i in idx {
            write!(out, "{} ", i + 1).unwrap();
        }
        writeln!(out, "{c:?}").unwrap();
    }
}

pub fn write_sym_tensor(t: &SymTensor) -> String {
    let mut out = format!("{} {}\n", t.order(), t.dim());
    write_entries(&mut out, t.entries());
    out
}

pub fn write_tensor(t: &Tensor) -> String {
    let mut out = format!("{} {} general\n", t.order(), t.dim());
    write_entries(&mut out, t.entries());
    out
}

pub fn parse_tensor_file(text: &str) -> Result<TensorFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(Error::Parse { line: 0, msg: "missing header".into() })?;
    let hs: Vec<&str> = header.split_whitespace().collect();
    let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
    if hs.len() < 2 || hs.len() > 3 {
        return Err(perr(hline, "header must be `d n` or `d n general`"));
    }
    let d: usize = hs[0].parse().map_err(|_| perr(hline, "bad order"))?;
    let n: usize = hs[1].parse().map_err(|_| perr(hline, "bad dimension"))?;
    let general = match hs.get(2) {
        None => false,
        Some(&"general") => true,
        Some(_) => return Err(perr(hline, "unknown header flag")),
    };
    let mut entries = Vec::new();
    for (ln, l) in lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != d + 1 {
            return Err(perr(ln, &format!("expected {} fields", d + 1)));
        }
        let mut idx = Vec::with_capacity(d);
        for t in &toks[..d] {
            let i: usize = t.parse().map_err(|_| perr(ln, "bad index"))?;
            if i == 0 || i > n {
                return Err(perr(ln, "index out of range"));
            }
            idx.push(i - 1);
        }
        let c: f64 = toks[d].parse().map_err(|_| perr(ln, "bad coefficient"))?;
        if !general && idx.windows(2).any(|w| w[0] >= w[1]) {
            return Err(perr(ln, "symmetric entries must be strictly increasing"));
        }
        entries.push((idx, c));
    }
    if general {
        Ok(TensorFile::General(Tensor::from_entries(d, n, entries)?))
    } else {
        Ok(TensorFile::Symmetric(SymTensor::from_monomials(d, n, entries)?))
    }
}
