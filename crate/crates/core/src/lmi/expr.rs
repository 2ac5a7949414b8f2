//! Affine matrix expressions in scalar decision variables.

use nalgebra::DMatrix;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

/// C + Σ_k x_k A_k with dense coefficients keyed by scalar index.
#[derive(Clone, Debug, PartialEq)]
pub struct LinMat {
    pub constant: DMatrix<f64>,
    pub terms: BTreeMap<usize, DMatrix<f64>>,
}

impl LinMat {
    pub fn zeros(r: usize, c: usize) -> Self {
        Self { constant: DMatrix::zeros(r, c), terms: BTreeMap::new() }
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        Self { constant: m, terms: BTreeMap::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(DMatrix::identity(n, n))
    }

    pub fn nrows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    pub fn max_var(&self) -> Option<usize> {
        self.terms.keys().next_back().copied()
    }

    fn map_all(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        Self { constant: f(&self.constant), terms: self.terms.iter().map(|(k, m)| (*k, f(m))).collect() }
    }

    pub fn transpose(&self) -> Self {
        self.map_all(|m| m.transpose())
    }

    /// self + selfᵀ.
    pub fn he(&self) -> Self {
        self + &self.transpose()
    }

    /// (self + selfᵀ)/2.
    pub fn sym(&self) -> Self {
        self.he() * 0.5
    }

    /// a · self.
    pub fn lmul(&self, a: &DMatrix<f64>) -> Self {
        assert_eq!(a.ncols(), self.nrows(), "lmul shape");
        self.map_all(|m| a * m)
    }

    /// self · b.
    pub fn rmul(&self, b: &DMatrix<f64>) -> Self {
        assert_eq!(self.ncols(), b.nrows(), "rmul shape");
        self.map_all(|m| m * b)
    }

    /// tᵀ · self · t.
    pub fn congruence(&self, t: &DMatrix<f64>) -> Self {
        self.map_all(|m| t.transpose() * m * t)
    }

    /// a ⊗ self.
    pub fn kron_left(&self, a: &DMatrix<f64>) -> Self {
        self.map_all(|m| a.kronecker(m))
    }

    /// Places self at (r0, c0) inside a zero matrix of the given shape.
    pub fn embed(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        let place = |m: &DMatrix<f64>| {
            let mut out = DMatrix::zeros(rows, cols);
            out.view_mut((r0, c0), m.shape()).copy_from(m);
            out
        };
        self.map_all(place)
    }

    pub fn view(&self, start: (usize, usize), shape: (usize, usize)) -> Self {
        self.map_all(|m| m.view(start, shape).clone_owned())
    }

    /// Block matrix from a grid; every row of blocks must share heights, every column widths.
    pub fn blocks(grid: &[Vec<LinMat>]) -> Self {
        let heights: Vec<usize> = grid.iter().map(|row| row[0].nrows()).collect();
        let widths: Vec<usize> = grid[0].iter().map(|b| b.ncols()).collect();
        let (r, c) = (heights.iter().sum(), widths.iter().sum());
        let mut out = Self::zeros(r, c);
        let mut i0 = 0;
        for (bi, row) in grid.iter().enumerate() {
            assert_eq!(row.len(), widths.len(), "ragged block grid");
            let mut j0 = 0;
            for (bj, b) in row.iter().enumerate() {
                assert_eq!(b.shape(), (heights[bi], widths[bj]), "block shape in grid");
                out.constant.view_mut((i0, j0), b.shape()).copy_from(&b.constant);
                for (k, m) in &b.terms {
                    out.terms.entry(*k).or_insert_with(|| DMatrix::zeros(r, c)).view_mut((i0, j0), b.shape()).copy_from(m);
                }
                j0 += widths[bj];
            }
            i0 += heights[bi];
        }
        out
    }

    pub fn hcat(parts: &[LinMat]) -> Self {
        Self::blocks(&[parts.to_vec()])
    }

    pub fn vcat(parts: &[LinMat]) -> Self {
        Self::blocks(&parts.iter().map(|p| vec![p.clone()]).collect::<Vec<_>>())
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (k, m) in &self.terms {
            out += m * x[*k];
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let ok = |m: &DMatrix<f64>| m.nrows() == m.ncols() && (m - m.transpose()).amax() <= tol;
        ok(&self.constant) && self.terms.values().all(ok)
    }

    /// Drops coefficient matrices that are exactly zero.
    pub fn pruned(mut self) -> Self {
        self.terms.retain(|_, m| m.iter().any(|v| *v != 0.0));
        self
    }

    /// Largest absolute entry over constant and coefficients.
    pub fn scale(&self) -> f64 {
        std::iter::once(&self.constant).chain(self.terms.values()).fold(0.0f64, |s, m| s.max(m.amax()))
    }
}

impl Add<&LinMat> for &LinMat {
    type Output = LinMat;
    fn add(self, rhs: &LinMat) -> LinMat {
        assert_eq!(self.shape(), rhs.shape(), "add shape");
        let mut out = self.clone();
        out.constant += &rhs.constant;
        for (k, m) in &rhs.terms {
            match out.terms.get_mut(k) {
                Some(t) => *t += m,
                None => {
                    out.terms.insert(*k, m.clone());
                }
            }
        }
        out
    }
}

impl Add for LinMat {
    type Output = LinMat;
    fn add(self, rhs: LinMat) -> LinMat {
        &self + &rhs
    }
}

impl Add<&LinMat> for LinMat {
    type Output = LinMat;
    fn add(self, rhs: &LinMat) -> LinMat {
        &self + rhs
    }
}

impl Neg for &LinMat {
    type Output = LinMat;
    fn neg(self) -> LinMat {
        self.map_all(|m| -m)
    }
}

impl Neg for LinMat {
    type Output = LinMat;
    fn neg(self) -> LinMat {
        -&self
    }
}

impl Sub<&LinMat> for &LinMat {
    type Output = LinMat;
    fn sub(self, rhs: &LinMat) -> LinMat {
        self + &(-rhs)
    }
}

impl Sub for LinMat {
    type Output = LinMat;
    fn sub(self, rhs: LinMat) -> LinMat {
        &self - &rhs
    }
}

impl Sub<&LinMat> for LinMat {
    type Output = LinMat;
    fn sub(self, rhs: &LinMat) -> LinMat {
        &self - rhs
    }
}

impl Mul<f64> for &LinMat {
    type Output = LinMat;
    fn mul(self, s: f64) -> LinMat {
        self.map_all(|m| m * s)
    }
}

impl Mul<f64> for LinMat {
    type Output = LinMat;
    fn mul(self, s: f64) -> LinMat {
        &self * s
    }
}

/// X · Y where exactly one side is constant.
impl Mul<&LinMat> for &DMatrix<f64> {
    type Output = LinMat;
    fn mul(self, rhs: &LinMat) -> LinMat {
        rhs.lmul(self)
    }
}

impl Mul<&DMatrix<f64>> for &LinMat {
    type Output = LinMat;
    fn mul(self, rhs: &DMatrix<f64>) -> LinMat {
        self.rmul(rhs)
    }
}
