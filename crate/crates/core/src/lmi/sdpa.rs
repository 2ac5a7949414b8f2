//! Sparse SDPA (`.dat-s`) export and import.
//!
//! A constraint `E(x) ⪰ εI` is written as Σ x_k A_k − F0 ⪰ 0 with F0 = εI − C;
//! `E(x) ⪯ −εI` flips every sign. The solver-side scalar box is not exported.

use nalgebra::DMatrix;
use std::fmt::Write as _;

use super::problem::{LmiProblem, Sense};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SdpaDoc {
    pub comment: String,
    pub n_vars: usize,
    pub block_sizes: Vec<usize>,
    pub c: Vec<f64>,
    /// (matrix index 0..=m, block 1-based, row, col 1-based with row ≤ col, value)
    pub entries: Vec<(usize, usize, usize, usize, f64)>,
}

impl SdpaDoc {
    pub fn from_problem(p: &LmiProblem) -> Self {
        let mut entries = Vec::new();
        for (b, con) in p.constraints.iter().enumerate() {
            let sign = match con.sense {
                Sense::Psd => 1.0,
                Sense::Nsd => -1.0,
            };
            let d = con.expr.nrows();
            let f0 = DMatrix::<f64>::identity(d, d) * p.epsilon - &con.expr.constant * sign;
            push_upper(&mut entries, 0, b + 1, &f0);
            for (k, m) in &con.expr.terms {
                push_upper(&mut entries, k + 1, b + 1, &(m * sign));
            }
        }
        entries.sort_by(|a, b| (a.0, a.1, a.2, a.3).cmp(&(b.0, b.1, b.2, b.3)));
        let c = match &p.objective {
            Some((c, _)) => c.iter().copied().collect(),
            None => vec![0.0; p.n_scalars],
        };
        Self {
            comment: format!("netsynth {}", p.name),
            n_vars: p.n_scalars,
            block_sizes: p.constraints.iter().map(|c| c.expr.nrows()).collect(),
            c,
            entries,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "\"{}\"", self.comment.replace('\n', " "));
        let _ = writeln!(s, "{}", self.n_vars);
        let _ = writeln!(s, "{}", self.block_sizes.len());
        let sizes: Vec<String> = self.block_sizes.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(s, "{}", sizes.join(" "));
        let c: Vec<String> = self.c.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "{}", c.join(" "));
        for (m, b, i, j, v) in &self.entries {
            let _ = writeln!(s, "{m} {b} {i} {j} {v:?}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut comment = String::new();
        let mut first = lines.next().ok_or_else(|| perr("empty document"))?;
        while first.starts_with('"') || first.starts_with('*') {
            comment = first.trim_matches(|c| c == '"' || c == '*').trim().to_string();
            first = lines.next().ok_or_else(|| perr("missing header"))?;
        }
        let n_vars = first.split_whitespace().next().ok_or_else(|| perr("m"))?.parse().map_err(|_| perr("m"))?;
        let nb: usize = lines.next().and_then(|l| l.split_whitespace().next()).ok_or_else(|| perr("nBlocks"))?.parse().map_err(|_| perr("nBlocks"))?;
        let block_sizes = nums::<i64>(lines.next().ok_or_else(|| perr("block sizes"))?)?
            .into_iter()
            .map(|v| v.unsigned_abs() as usize)
            .collect::<Vec<_>>();
        if block_sizes.len() != nb {
            return Err(perr("block size count"));
        }
        let c = nums::<f64>(lines.next().ok_or_else(|| perr("objective"))?)?;
        if c.len() != n_vars {
            return Err(perr("objective length"));
        }
        let mut entries = Vec::new();
        for l in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 5 {
                return Err(perr(&format!("bad entry line '{l}'")));
            }
            let u = |s: &str| s.parse::<usize>().map_err(|_| perr(&format!("bad index '{s}'")));
            let v: f64 = f[4].parse().map_err(|_| perr(&format!("bad value '{}'", f[4])))?;
            entries.push((u(f[0])?, u(f[1])?, u(f[2])?, u(f[3])?, v));
        }
        Ok(Self { comment, n_vars, block_sizes, c, entries })
    }

    /// Dense F_k for one block (k = 0 is F0).
    pub fn matrix(&self, k: usize, block: usize) -> DMatrix<f64> {
        let d = self.block_sizes[block - 1];
        let mut m = DMatrix::zeros(d, d);
        for &(mk, b, i, j, v) in &self.entries {
            if mk == k && b == block {
                m[(i - 1, j - 1)] = v;
                m[(j - 1, i - 1)] = v;
            }
        }
        m
    }
}

fn push_upper(out: &mut Vec<(usize, usize, usize, usize, f64)>, k: usize, block: usize, m: &DMatrix<f64>) {
    for j in 0..m.ncols() {
        for i in 0..=j {
            let v = m[(i, j)];
            if v != 0.0 {
                out.push((k, block, i + 1, j + 1, v));
            }
        }
    }
}

fn nums<T: std::str::FromStr>(line: &str) -> Result<Vec<T>> {
    line.split(|c: char| c.is_whitespace() || c == ',' || c == '{' || c == '}' || c == '(' || c == ')')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| perr(&format!("bad number '{s}'"))))
        .collect()
}

fn perr(what: &str) -> Error {
    Error::Parse(format!("sdpa: {what}"))
}

pub fn export_sdpa(p: &LmiProblem) -> String {
    SdpaDoc::from_problem(p).to_text()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::expr::LinMat;
    use crate::lmi::problem::Structure;

    fn scalar_problem() -> LmiProblem {
        let mut p = LmiProblem::new("scalar");
        let x = p.symmetric("x", 1);
        p.constrain("x>=1", x.expr() - LinMat::identity(1), Sense::Psd);
        p.minimize(&x.expr());
        p
    }

    #[test]
    fn scalar_export() {
        let text = export_sdpa(&scalar_problem());
        let doc = SdpaDoc::parse(&text).unwrap();
        assert_eq!(doc.n_vars, 1);
        assert_eq!(doc.block_sizes, vec![1]);
        assert_eq!(doc.c, vec![1.0]);
        assert_eq!(doc.matrix(1, 1)[(0, 0)], 1.0);
        assert_eq!(doc.matrix(0, 1)[(0, 0)], 1.0 + 1e-7);
    }

    #[test]
    fn round_trip_is_exact_and_byte_stable() {
        let mut p = LmiProblem::new("dyadic");
        p.epsilon = 0.0;
        let y = p.var("Y", 2, 2, Structure::SymmetricPair);
        let f = p.full("F", 2, 2);
        let a = DMatrix::from_row_slice(2, 2, &[0.5, -0.25, 1.125, 3.0]);
        p.constrain("n", f.expr().lmul(&a).he() + y.at(-0.75), Sense::Psd);
        p.constrain("m", y.at(1.5) - LinMat::identity(2) * 0.0625, Sense::Nsd);
        let text = export_sdpa(&p);
        let doc = SdpaDoc::parse(&text).unwrap();
        assert_eq!(doc, SdpaDoc::from_problem(&p));
        assert_eq!(doc.to_text(), text);
        for (b, con) in p.constraints.iter().enumerate() {
            let s = if con.sense == Sense::Psd { 1.0 } else { -1.0 };
            for (k, m) in &con.expr.terms {
                assert_eq!(doc.matrix(k + 1, b + 1), m * s);
            }
            assert_eq!(doc.matrix(0, b + 1), -&con.expr.constant * s);
        }
    }
}
