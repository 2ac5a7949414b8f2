//! Kronecker products, the pattern spectrum and congruence with Z⊗I.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{DecomposableMatrix, PatternGraph};

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// uᵀ w u.
pub fn star(u: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if w.nrows() != w.ncols() || w.ncols() != u.nrows() {
        return Err(Error::Shape(format!("star: u {:?}, w {:?}", u.shape(), w.shape())));
    }
    Ok(u.transpose() * w * u)
}

#[derive(Clone, Debug)]
pub struct EigenStructure {
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal; column k belongs to eigenvalue k.
    pub basis: DMatrix<f64>,
    /// (value, multiplicity), ascending.
    pub distinct: Vec<(f64, usize)>,
    pub dedup_tol: f64,
}

impl EigenStructure {
    pub fn distinct_values(&self) -> Vec<f64> {
        self.distinct.iter().map(|d| d.0).collect()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }
}

pub fn default_dedup_tol(spectral_radius: f64) -> f64 {
    1e-9 * spectral_radius.max(1.0)
}

/// Spectrum of the pattern. `tol = None` uses [`default_dedup_tol`].
pub fn sym_eig(g: &PatternGraph, tol: Option<f64>) -> Result<EigenStructure> {
    let p = g.to_f64();
    if p != p.transpose() {
        return Err(Error::InvalidArgument("pattern matrix is not symmetric".into()));
    }
    sym_eig_dense(&p, tol)
}

pub fn sym_eig_dense(p: &DMatrix<f64>, tol: Option<f64>) -> Result<EigenStructure> {
    let n = p.nrows();
    if p.iter().all(|v| *v == 0.0) {
        return Ok(EigenStructure {
            eigenvalues: DVector::zeros(n),
            basis: DMatrix::identity(n, n),
            distinct: vec![(0.0, n)],
            dedup_tol: tol.unwrap_or(default_dedup_tol(0.0)),
        });
    }
    let eig = SymmetricEigen::new(p.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let basis = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    let radius = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = tol.unwrap_or(default_dedup_tol(radius));

    let mut groups: Vec<Vec<f64>> = Vec::new();
    for &v in eigenvalues.iter() {
        match groups.last_mut() {
            Some(g) if (v - g[0]).abs() <= tol => g.push(v),
            _ => groups.push(vec![v]),
        }
    }
    let distinct = groups
        .into_iter()
        .map(|g| {
            let mean = g.iter().sum::<f64>() / g.len() as f64;
            (if mean.abs() <= tol { 0.0 } else { mean }, g.len())
        })
        .collect();
    Ok(EigenStructure { eigenvalues, basis, distinct, dedup_tol: tol })
}

/// Blocks M^d + λ_h M^i, h = 1..N, in the order of `e.eigenvalues`.
pub fn congruence_diagonalize(m: &DecomposableMatrix, e: &EigenStructure) -> Vec<DMatrix<f64>> {
    e.eigenvalues.iter().map(|&l| m.at(l)).collect()
}

/// (Z⊗I_r)ᵀ · full · (Z⊗I_c), the dense version of [`congruence_diagonalize`].
pub fn dense_congruence(full: &DMatrix<f64>, z: &DMatrix<f64>, r: usize, c: usize) -> DMatrix<f64> {
    let zl = kron(z, &DMatrix::identity(r, r));
    let zr = kron(z, &DMatrix::identity(c, c));
    zl.transpose() * full * zr
}

pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(r, c);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        out.view_mut((i, j), b.shape()).copy_from(b);
        i += b.nrows();
        j += b.ncols();
    }
    out
}

/// Smallest eigenvalue of the symmetric part.
pub fn min_eig_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let s = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v))
}
