use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::expr::LinMat;
use crate::model::io::matrix_serde;
use crate::slalg::min_eig_sym;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    Symmetric,
    Full,
    /// (X^d, X^i) for I⊗X^d + P⊗X^i, both symmetric.
    SymmetricPair,
    /// (X^d, X^i), both full.
    FullPair,
}

impl Structure {
    pub fn is_pair(self) -> bool {
        matches!(self, Structure::SymmetricPair | Structure::FullPair)
    }

    pub fn is_symmetric(self) -> bool {
        matches!(self, Structure::Symmetric | Structure::SymmetricPair)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionVar {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub structure: Structure,
    /// First scalar index.
    pub offset: usize,
}

impl DecisionVar {
    pub fn part_len(&self) -> usize {
        if self.structure.is_symmetric() {
            self.rows * (self.rows + 1) / 2
        } else {
            self.rows * self.cols
        }
    }

    pub fn scalar_count(&self) -> usize {
        self.part_len() * if self.structure.is_pair() { 2 } else { 1 }
    }

    /// Part 0 is X^d (or X itself), part 1 is X^i.
    pub fn part(&self, k: usize) -> LinMat {
        assert!(k == 0 || (k == 1 && self.structure.is_pair()), "no part {k} in {}", self.name);
        let base = self.offset + k * self.part_len();
        let (r, c) = (self.rows, self.cols);
        let mut out = LinMat::zeros(r, c);
        let mut idx = base;
        if self.structure.is_symmetric() {
            for j in 0..c {
                for i in 0..=j {
                    let mut m = DMatrix::zeros(r, c);
                    m[(i, j)] = 1.0;
                    m[(j, i)] = 1.0;
                    out.terms.insert(idx, m);
                    idx += 1;
                }
            }
        } else {
            for j in 0..c {
                for i in 0..r {
                    let mut m = DMatrix::zeros(r, c);
                    m[(i, j)] = 1.0;
                    out.terms.insert(idx, m);
                    idx += 1;
                }
            }
        }
        out
    }

    pub fn expr(&self) -> LinMat {
        self.part(0)
    }

    /// X^d + λX^i; plain variables ignore λ.
    pub fn at(&self, lambda: f64) -> LinMat {
        if self.structure.is_pair() {
            self.part(0) + self.part(1) * lambda
        } else {
            self.part(0)
        }
    }

    /// I⊗X^d + P⊗X^i.
    pub fn expanded(&self, p: &DMatrix<f64>) -> LinMat {
        let eye = DMatrix::identity(p.nrows(), p.nrows());
        let d = self.part(0).kron_left(&eye);
        if self.structure.is_pair() {
            d + self.part(1).kron_left(p)
        } else {
            d
        }
    }

    pub fn value(&self, x: &[f64]) -> VarValue {
        let d = self.part(0).eval(x);
        let i = self.structure.is_pair().then(|| self.part(1).eval(x));
        VarValue { d, i }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarValue {
    #[serde(with = "matrix_serde")]
    pub d: DMatrix<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_matrix")]
    pub i: Option<DMatrix<f64>>,
}

mod opt_matrix {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct W<'a>(#[serde(with = "matrix_serde")] &'a DMatrix<f64>);
        m.as_ref().map(W).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
        #[derive(Deserialize)]
        struct W(#[serde(with = "matrix_serde")] DMatrix<f64>);
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    /// expr ⪰ εI
    Psd,
    /// expr ⪯ −εI
    Nsd,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub name: String,
    pub expr: LinMat,
    pub sense: Sense,
    /// Pattern eigenvalue this constraint was instantiated at, if any.
    pub lambda: Option<f64>,
}

impl Constraint {
    /// Smallest eigenvalue of expr (Psd) or of −expr (Nsd) at x.
    pub fn margin(&self, x: &[f64]) -> f64 {
        let v = self.expr.eval(x);
        match self.sense {
            Sense::Psd => min_eig_sym(&v),
            Sense::Nsd => min_eig_sym(&(-v)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LmiProblem {
    pub name: String,
    pub vars: Vec<DecisionVar>,
    pub n_scalars: usize,
    pub constraints: Vec<Constraint>,
    /// Minimise cᵀx + c0.
    pub objective: Option<(DVector<f64>, f64)>,
    pub epsilon: f64,
    /// Box |x_k| ≤ bound on every scalar, solver-side only.
    pub scalar_bound: Option<f64>,
}

pub const DEFAULT_EPSILON: f64 = 1e-7;
pub const DEFAULT_SCALAR_BOUND: f64 = 1e6;

impl LmiProblem {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            vars: Vec::new(),
            n_scalars: 0,
            constraints: Vec::new(),
            objective: None,
            epsilon: DEFAULT_EPSILON,
            scalar_bound: Some(DEFAULT_SCALAR_BOUND),
        }
    }

    /// Declares a variable; re-declaring an existing name returns the existing one.
    pub fn var(&mut self, name: &str, rows: usize, cols: usize, structure: Structure) -> DecisionVar {
        if let Some(v) = self.vars.iter().find(|v| v.name == name) {
            assert!(v.rows == rows && v.cols == cols && v.structure == structure, "conflicting declaration of {name}");
            return v.clone();
        }
        if structure.is_symmetric() {
            assert_eq!(rows, cols, "symmetric variable {name} must be square");
        }
        let v = DecisionVar { name: name.to_string(), rows, cols, structure, offset: self.n_scalars };
        self.n_scalars += v.scalar_count();
        self.vars.push(v.clone());
        v
    }

    pub fn symmetric(&mut self, name: &str, n: usize) -> DecisionVar {
        self.var(name, n, n, Structure::Symmetric)
    }

    pub fn full(&mut self, name: &str, r: usize, c: usize) -> DecisionVar {
        self.var(name, r, c, Structure::Full)
    }

    pub fn find_var(&self, name: &str) -> Option<&DecisionVar> {
        self.vars.iter().find(|v| v.name == name)
    }

    /// Adds a symmetric constraint; the expression is symmetrised.
    pub fn constrain(&mut self, name: impl Into<String>, expr: LinMat, sense: Sense) {
        self.constrain_at(name, expr, sense, None)
    }

    pub fn constrain_at(&mut self, name: impl Into<String>, expr: LinMat, sense: Sense, lambda: Option<f64>) {
        assert_eq!(expr.nrows(), expr.ncols(), "constraint must be square");
        if let Some(k) = expr.max_var() {
            assert!(k < self.n_scalars, "constraint references undeclared scalar {k}");
        }
        let expr = expr.sym().pruned();
        self.constraints.push(Constraint { name: name.into(), expr, sense, lambda });
    }

    /// Minimise a 1×1 affine expression.
    pub fn minimize(&mut self, f: &LinMat) {
        assert_eq!(f.shape(), (1, 1));
        let mut c = DVector::zeros(self.n_scalars);
        for (k, m) in &f.terms {
            c[*k] = m[(0, 0)];
        }
        self.objective = Some((c, f.constant[(0, 0)]));
    }

    pub fn data_scale(&self) -> f64 {
        self.constraints.iter().fold(1.0f64, |s, c| s.max(c.expr.scale()))
    }

    pub fn assignment(&self, x: &[f64]) -> BTreeMap<String, VarValue> {
        self.vars.iter().map(|v| (v.name.clone(), v.value(x))).collect()
    }

    /// (name, margin) per constraint at x.
    pub fn margins(&self, x: &[f64]) -> Vec<(String, f64)> {
        self.constraints.iter().map(|c| (c.name.clone(), c.margin(x))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_vars_use_upper_triangle() {
        let mut p = LmiProblem::new("t");
        let y = p.symmetric("Y", 3);
        assert_eq!(y.scalar_count(), 6);
        let q = p.var("Q", 2, 2, Structure::SymmetricPair);
        assert_eq!(q.offset, 6);
        assert_eq!(p.n_scalars, 12);
        let x: Vec<f64> = (0..12).map(|k| k as f64 + 1.0).collect();
        let v = y.expr().eval(&x);
        assert_eq!(v, v.transpose());
        let qd = q.part(0).eval(&x);
        let qi = q.part(1).eval(&x);
        assert_eq!(q.at(2.0).eval(&x), &qd + &qi * 2.0);
        let pat = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = q.expanded(&pat).eval(&x);
        assert_eq!(e, DMatrix::<f64>::identity(2, 2).kronecker(&qd) + pat.kronecker(&qi));
        assert_eq!(p.var("Y", 3, 3, Structure::Symmetric).offset, 0);
    }

    #[test]
    fn constraint_margins() {
        let mut p = LmiProblem::new("t");
        let x = p.symmetric("x", 1);
        p.constrain("lo", x.expr() - LinMat::identity(1), Sense::Psd);
        p.constrain("hi", x.expr() - LinMat::identity(1) * 3.0, Sense::Nsd);
        let m = p.margins(&[2.0]);
        assert!((m[0].1 - 1.0).abs() < 1e-15 && (m[1].1 - 1.0).abs() < 1e-15);
    }
}
