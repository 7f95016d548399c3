use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Maximize,
    Feasibility,
}

/// PSD block whose entries are affine in the decision vector `y`.
/// Only the upper triangle (`row <= col`) is stored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PsdBlock {
    pub dim: usize,
    /// `(row, col, value)` constant part.
    pub constant: Vec<(usize, usize, f64)>,
    /// `(row, col, var, coeff)` linear part.
    pub entries: Vec<(usize, usize, usize, f64)>,
}

impl PsdBlock {
    pub fn new(dim: usize) -> Self {
        Self { dim, ..Default::default() }
    }

    /// Matrix value at `y`.
    pub fn eval(&self, y: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.constant {
            m[(r, c)] += v;
            if r != c {
                m[(c, r)] += v;
            }
        }
        for &(r, c, var, a) in &self.entries {
            m[(r, c)] += a * y[var];
            if r != c {
                m[(c, r)] += a * y[var];
            }
        }
        m
    }
}

/// Sparse linear form `sum terms` compared against `rhs`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn value(&self, y: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * y[v]).sum()
    }
}

/// Block-PSD program in moment-vector form: find `y` with every block PSD,
/// equalities `a.y = rhs`, inequalities `a.y >= rhs`, maximizing `c.y + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub num_vars: usize,
    pub blocks: Vec<PsdBlock>,
    pub equalities: Vec<LinearConstraint>,
    pub inequalities: Vec<LinearConstraint>,
    pub objective: Vec<(usize, f64)>,
    pub objective_offset: f64,
    pub mode: Mode,
}

impl SdpProblem {
    pub fn new(num_vars: usize, mode: Mode) -> Self {
        Self {
            num_vars,
            blocks: Vec::new(),
            equalities: Vec::new(),
            inequalities: Vec::new(),
            objective: Vec::new(),
            objective_offset: 0.0,
            mode,
        }
    }

    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * y[v]).sum::<f64>() + self.objective_offset
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        for (b, blk) in self.blocks.iter().enumerate() {
            for &(r, c, _) in &blk.constant {
                if r > c || c >= blk.dim {
                    return bad(format!("block {b}: bad constant coordinate ({r},{c})"));
                }
            }
            for &(r, c, v, _) in &blk.entries {
                if r > c || c >= blk.dim || v >= self.num_vars {
                    return bad(format!("block {b}: bad entry ({r},{c}) var {v}"));
                }
            }
        }
        for row in self.equalities.iter().chain(&self.inequalities) {
            if row.terms.iter().any(|&(v, _)| v >= self.num_vars) {
                return bad("constraint references an unknown variable".into());
            }
        }
        if self.objective.iter().any(|&(v, _)| v >= self.num_vars) {
            return bad("objective references an unknown variable".into());
        }
        Ok(())
    }

    /// Debug dump mirroring the moment format: a header line, then one line
    /// per block entry, constraint term and objective term.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {} {} {} {}\n",
            self.num_vars,
            self.blocks.len(),
            self.equalities.len(),
            self.inequalities.len(),
            match self.mode {
                Mode::Maximize => "maximize",
                Mode::Feasibility => "feasibility",
            }
        );
        for (b, blk) in self.blocks.iter().enumerate() {
            writeln!(s, "block {b} {}", blk.dim).unwrap();
            for &(r, c, v) in &blk.constant {
                writeln!(s, "  {r} {c} const {v:?}").unwrap();
            }
            for &(r, c, var, a) in &blk.entries {
                writeln!(s, "  {r} {c} y{var} {a:?}").unwrap();
            }
        }
        for (name, rows) in [("eq", &self.equalities), ("ge", &self.inequalities)] {
            for row in rows.iter() {
                let terms: Vec<String> = row.terms.iter().map(|(v, a)| format!("{a:?}*y{v}")).collect();
                writeln!(s, "{name} {} {:?}", terms.join(" + "), row.rhs).unwrap();
            }
        }
        let terms: Vec<String> = self.objective.iter().map(|(v, a)| format!("{a:?}*y{v}")).collect();
        writeln!(s, "obj {} + {:?}", terms.join(" + "), self.objective_offset).unwrap();
        s
    }
}
