//! Bundled example systems.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{Dimensions, HomogeneousSystem, PatternGraph};

pub const FIXTURE_NAMES: [&str; 2] = ["paper-sec7", "ring-base"];

pub fn load_fixture(name: &str) -> Result<HomogeneousSystem> {
    match name {
        "paper-sec7" => Ok(paper_sec7()),
        "ring-base" => Ok(ring_base(4)),
        other => Err(Error::UnknownFixture(other.to_string())),
    }
}

fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(r, c, v)
}

/// Six subsystems (three states, one input) on the complete bipartite graph K_{2,4}.
pub fn paper_sec7() -> HomogeneousSystem {
    let p = [
        [0, 1, 0, 0, 1, 0],
        [1, 0, 1, 1, 0, 1],
        [0, 1, 0, 0, 1, 0],
        [0, 1, 0, 0, 1, 0],
        [1, 0, 1, 1, 0, 1],
        [0, 1, 0, 0, 1, 0],
    ];
    let pattern = PatternGraph::new(DMatrix::from_fn(6, 6, |i, j| p[i][j])).expect("valid pattern");
    let mut s = HomogeneousSystem::zeros(pattern, Dimensions::new(3, 1, 3, 1, 2));
    s.a.d = m(3, 3, &[0.0, -0.2, 0.8, -0.9, -0.7, -0.4, -0.9, 0.5, -0.6]);
    s.a.i = m(3, 3, &[0.2, 0.1, -0.1, -0.4, -0.1, -1.0, -0.3, -0.1, 0.0]);
    s.b_u.d = m(3, 1, &[0.2, 0.2, -0.1]);
    s.b_w.d = m(3, 1, &[0.5, 0.5, 0.5]);
    s.c_y.d = m(3, 3, &[1.1, -2.1, -1.6, -0.3, -0.4, 0.5, 0.7, -0.8, 0.3]);
    s.c_z.d = m(2, 3, &[0.8, 0.3, 0.3, -0.1, 0.1, -0.1]);
    s.c_z.i = m(2, 3, &[0.0, 0.0, 0.0, 0.3, 0.2, 0.5]);
    s.d_zu.d = m(2, 1, &[0.1, 0.9]);
    s
}

/// Lightly coupled two-state subsystem replicated over a ring of `n` nodes.
pub fn ring_base(n: usize) -> HomogeneousSystem {
    let mut s = HomogeneousSystem::zeros(PatternGraph::ring(n), Dimensions::new(2, 1, 2, 1, 2));
    s.a.d = m(2, 2, &[0.0, 1.0, -1.0, -0.5]);
    s.a.i = m(2, 2, &[0.0, 0.0, 0.2, 0.1]);
    s.b_u.d = m(2, 1, &[0.0, 1.0]);
    s.b_w.d = m(2, 1, &[0.0, 1.0]);
    s.c_y.d = DMatrix::identity(2, 2);
    s.c_z.d = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    s.c_z.i = m(2, 2, &[0.0, 0.0, 0.0, 0.0]);
    s.d_zu.d = m(2, 1, &[0.0, 0.5]);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_entries() {
        let s = load_fixture("paper-sec7").unwrap();
        assert_eq!(s.a.d[(0, 2)], 0.8);
        assert_eq!(s.d_zu.d, m(2, 1, &[0.1, 0.9]));
        let row: Vec<i64> = s.pattern.adjacency().row(1).iter().copied().collect();
        assert_eq!(row, vec![1, 0, 1, 1, 0, 1]);
        assert!(s.b_u.is_block_diagonal() && s.c_y.is_block_diagonal());
        assert!(matches!(load_fixture("nope"), Err(Error::UnknownFixture(_))));
    }
}
