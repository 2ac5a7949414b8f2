#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netsynth::analysis::{spectral_abscissa, StateSpace};
use netsynth::model::{ControllerGains, Dimensions, HomogeneousSystem, PatternGraph};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

pub fn symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let a = uniform(rng, n, n, scale);
    (&a + a.transpose()) * 0.5
}

/// Plain Kronecker product, written out independently of the library.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Random binary symmetric zero-diagonal pattern with at least one edge.
pub fn random_pattern(rng: &mut ChaCha8Rng, n: usize) -> PatternGraph {
    loop {
        let mut adj = DMatrix::<i64>::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let b = rng.random_range(0.0..1.0) < 0.5;
                adj[(i, j)] = b as i64;
                adj[(j, i)] = b as i64;
            }
        }
        if adj.iter().any(|v| *v != 0) {
            return PatternGraph::new(adj).unwrap();
        }
    }
}

/// Random network with weak coupling and a full-rank input per subsystem.
pub fn random_system(rng: &mut ChaCha8Rng, pattern: PatternGraph, n: usize, n_u: usize) -> HomogeneousSystem {
    let dims = Dimensions::new(n, n_u, n, 1, 2.max(n_u));
    let mut s = HomogeneousSystem::zeros(pattern, dims);
    s.a.d = uniform(rng, n, n, 1.0);
    s.a.i = uniform(rng, n, n, 0.15);
    s.b_u.d = uniform(rng, n, n_u, 1.0) + DMatrix::identity(n, n_u);
    s.b_w.d = uniform(rng, n, 1, 1.0);
    s.c_y.d = DMatrix::identity(n, n);
    s.c_z.d = uniform(rng, dims.n_z, n, 1.0);
    s.c_z.i = uniform(rng, dims.n_z, n, 0.1);
    s.d_zu.d = uniform(rng, dims.n_z, n_u, 0.3) + DMatrix::identity(dims.n_z, n_u) * 0.5;
    s.validated().unwrap()
}

pub fn random_gains(rng: &mut ChaCha8Rng, dims: &Dimensions) -> ControllerGains {
    ControllerGains { k_d: uniform(rng, dims.n_u, dims.n, 1.0), k_i: uniform(rng, dims.n_u, dims.n, 0.3) }
}

/// Random asymptotically stable system, feedthrough half of the time.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize, nu: usize, ny: usize) -> StateSpace {
    let mut a = uniform(rng, n, n, 1.0);
    let shift = spectral_abscissa(&a).unwrap() + rng.random_range(0.05..1.0);
    a -= DMatrix::identity(n, n) * shift;
    let b = uniform(rng, n, nu, 1.0);
    let c = uniform(rng, ny, n, 1.0);
    let d = if rng.random_range(0.0..1.0) < 0.5 { DMatrix::zeros(ny, nu) } else { uniform(rng, ny, nu, 0.5) };
    StateSpace::new(a, b, c, d).unwrap()
}

/// I⊗M^d + P⊗M^i by explicit Kronecker products.
pub fn dense(d: &DMatrix<f64>, i: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    kron(&DMatrix::identity(n, n), d) + kron(p, i)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}
