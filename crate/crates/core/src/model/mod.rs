//! Homogeneous decomposable systems, distributed gains and closed-loop assembly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::slalg::kron;

pub mod io;

pub use io::{gains_from_json, gains_to_json, system_from_json, system_to_json};

/// Unweighted undirected interconnection graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternGraph {
    adjacency: DMatrix<i64>,
}

impl PatternGraph {
    /// Builds a pattern and checks that it is symmetric, binary and loop-free.
    pub fn new(adjacency: DMatrix<i64>) -> Result<Self> {
        let g = Self::new_unchecked(adjacency)?;
        let violations = g.violations();
        if violations.is_empty() {
            Ok(g)
        } else {
            Err(Error::Validation(ValidationReport { violations }))
        }
    }

    /// Only squareness is enforced; use [`validate`] to inspect the rest.
    pub fn new_unchecked(adjacency: DMatrix<i64>) -> Result<Self> {
        if adjacency.nrows() != adjacency.ncols() || adjacency.nrows() == 0 {
            return Err(Error::Shape(format!(
                "pattern must be square and non-empty, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        Ok(Self { adjacency })
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("pattern rows must all have length N".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn ring(n: usize) -> Self {
        let mut a = DMatrix::zeros(n, n);
        if n >= 2 {
            for i in 0..n {
                let j = (i + 1) % n;
                if i != j {
                    a[(i, j)] = 1;
                    a[(j, i)] = 1;
                }
            }
        }
        Self { adjacency: a }
    }

    pub fn empty(n: usize) -> Self {
        Self { adjacency: DMatrix::zeros(n, n) }
    }

    pub fn n_subsystems(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<i64> {
        &self.adjacency
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.adjacency.map(|v| v as f64)
    }

    pub fn edge_count(&self) -> usize {
        let n = self.n_subsystems();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| self.adjacency[(i, j)] != 0).count()
    }

    /// Relabels nodes: node `h` becomes `perm[h]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n_subsystems();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(perm[i], perm[j])] = self.adjacency[(i, j)];
            }
        }
        Self { adjacency: a }
    }

    fn violations(&self) -> Vec<Violation> {
        let n = self.n_subsystems();
        let mut out = Vec::new();
        for i in 0..n {
            if self.adjacency[(i, i)] != 0 {
                out.push(Violation::SelfLoop { node: i });
            }
            for j in 0..n {
                let v = self.adjacency[(i, j)];
                if v != 0 && v != 1 {
                    out.push(Violation::NonBinary { row: i, col: j, value: v });
                }
                if j > i && v != self.adjacency[(j, i)] {
                    out.push(Violation::Asymmetric { row: i, col: j });
                }
            }
        }
        out
    }
}

/// The pair (M^d, M^i) standing for I⊗M^d + P⊗M^i.
#[derive(Clone, Debug, PartialEq)]
pub struct DecomposableMatrix {
    pub d: DMatrix<f64>,
    pub i: DMatrix<f64>,
}

impl DecomposableMatrix {
    pub fn new(d: DMatrix<f64>, i: DMatrix<f64>) -> Result<Self> {
        if d.shape() != i.shape() {
            return Err(Error::Shape(format!("diag block {:?} vs inter block {:?}", d.shape(), i.shape())));
        }
        Ok(Self { d, i })
    }

    pub fn diagonal(d: DMatrix<f64>) -> Self {
        let i = DMatrix::zeros(d.nrows(), d.ncols());
        Self { d, i }
    }

    pub fn zeros(r: usize, c: usize) -> Self {
        Self { d: DMatrix::zeros(r, c), i: DMatrix::zeros(r, c) }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.d.shape()
    }

    pub fn is_block_diagonal(&self) -> bool {
        self.i.iter().all(|v| *v == 0.0)
    }

    /// M^d + λ M^i.
    pub fn at(&self, lambda: f64) -> DMatrix<f64> {
        &self.d + &self.i * lambda
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!("{:?} + {:?}", self.shape(), other.shape())));
        }
        Ok(Self { d: &self.d + &other.d, i: &self.i + &other.i })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { d: &self.d * s, i: &self.i * s }
    }
}

/// I_N⊗M^d + P⊗M^i.
pub fn expand(m: &DecomposableMatrix, g: &PatternGraph) -> Result<DMatrix<f64>> {
    if m.d.shape() != m.i.shape() {
        return Err(Error::Shape(format!("diag block {:?} vs inter block {:?}", m.d.shape(), m.i.shape())));
    }
    let n = g.n_subsystems();
    let eye = DMatrix::<f64>::identity(n, n);
    Ok(kron(&eye, &m.d) + kron(&g.to_f64(), &m.i))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub n_w: usize,
    pub n_z: usize,
    pub n_q: usize,
    pub n_p: usize,
}

impl Dimensions {
    pub fn new(n: usize, n_u: usize, n_y: usize, n_w: usize, n_z: usize) -> Self {
        Self { n, n_u, n_y, n_w, n_z, n_q: n + n_u, n_p: n + n_u }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousSystem {
    pub pattern: PatternGraph,
    pub dims: Dimensions,
    pub a: DecomposableMatrix,
    pub b_u: DecomposableMatrix,
    pub b_w: DecomposableMatrix,
    pub c_y: DecomposableMatrix,
    pub d_yw: DecomposableMatrix,
    pub c_z: DecomposableMatrix,
    pub d_zu: DecomposableMatrix,
    pub d_zw: DecomposableMatrix,
}

impl HomogeneousSystem {
    /// Zero system of the given sizes; fill in blocks and call [`HomogeneousSystem::validated`].
    pub fn zeros(pattern: PatternGraph, dims: Dimensions) -> Self {
        let Dimensions { n, n_u, n_y, n_w, n_z, .. } = dims;
        let z = DecomposableMatrix::zeros;
        Self {
            pattern,
            dims,
            a: z(n, n),
            b_u: z(n, n_u),
            b_w: z(n, n_w),
            c_y: z(n_y, n),
            d_yw: z(n_y, n_w),
            c_z: z(n_z, n),
            d_zu: z(n_z, n_u),
            d_zw: z(n_z, n_w),
        }
    }

    pub fn validated(self) -> Result<Self> {
        let report = validate(&self);
        if report.passed() {
            Ok(self)
        } else {
            Err(Error::Validation(report))
        }
    }

    pub fn n_subsystems(&self) -> usize {
        self.pattern.n_subsystems()
    }

    fn blocks(&self) -> [(&'static str, &DecomposableMatrix, (usize, usize)); 8] {
        let Dimensions { n, n_u, n_y, n_w, n_z, .. } = self.dims;
        [
            ("A", &self.a, (n, n)),
            ("B_u", &self.b_u, (n, n_u)),
            ("B_w", &self.b_w, (n, n_w)),
            ("C_y", &self.c_y, (n_y, n)),
            ("D_yw", &self.d_yw, (n_y, n_w)),
            ("C_z", &self.c_z, (n_z, n)),
            ("D_zu", &self.d_zu, (n_z, n_u)),
            ("D_zw", &self.d_zw, (n_z, n_w)),
        ]
    }

    /// Interconnection blocks the block-diagonal closed-loop form cannot carry.
    pub fn unsupported_blocks(&self) -> Vec<&'static str> {
        [("B_u", &self.b_u), ("B_w", &self.b_w), ("D_zu", &self.d_zu), ("D_zw", &self.d_zw)]
            .into_iter()
            .filter(|(_, m)| !m.is_block_diagonal())
            .map(|(name, _)| name)
            .collect()
    }

    pub fn ensure_supported(&self) -> Result<()> {
        let bad = self.unsupported_blocks();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::UnsupportedInterconnection(format!(
                "nonzero inter block in {} (only A^i, C_y^i, D_yw^i and C_z^i may couple subsystems)",
                bad.join(", ")
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    SelfLoop { node: usize },
    NonBinary { row: usize, col: usize, value: i64 },
    Asymmetric { row: usize, col: usize },
    NonzeroFeedthrough { max_abs: f64 },
    Shape { block: String, expected: (usize, usize), found: (usize, usize) },
    Channel { n_q: usize, n_p: usize, expected: usize },
    EmptyState,
    NonFinite { block: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfLoop { node } => write!(f, "self-loop at node {node}"),
            Violation::NonBinary { row, col, value } => write!(f, "non-binary pattern entry {value} at ({row},{col})"),
            Violation::Asymmetric { row, col } => write!(f, "asymmetric pattern at ({row},{col})"),
            Violation::NonzeroFeedthrough { max_abs } => write!(f, "nonzero feedthrough D_zw^d (max |entry| {max_abs})"),
            Violation::Shape { block, expected, found } => {
                write!(f, "block {block} has shape {found:?}, expected {expected:?}")
            }
            Violation::Channel { n_q, n_p, expected } => {
                write!(f, "channel widths n_q={n_q}, n_p={n_p}; only q = [x; u] (width {expected}) is supported")
            }
            Violation::EmptyState => write!(f, "state dimension n must be at least 1"),
            Violation::NonFinite { block } => write!(f, "block {block} has non-finite entries"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

pub fn validate(sys: &HomogeneousSystem) -> ValidationReport {
    let mut violations = sys.pattern.violations();
    let d = sys.dims;
    if d.n == 0 {
        violations.push(Violation::EmptyState);
    }
    if d.n_q != d.n + d.n_u || d.n_p != d.n + d.n_u {
        violations.push(Violation::Channel { n_q: d.n_q, n_p: d.n_p, expected: d.n + d.n_u });
    }
    for (name, m, expected) in sys.blocks() {
        for (part, mat) in [("d", &m.d), ("i", &m.i)] {
            if mat.shape() != expected {
                violations.push(Violation::Shape { block: format!("{name}^{part}"), expected, found: mat.shape() });
            }
            if mat.iter().any(|v| !v.is_finite()) {
                violations.push(Violation::NonFinite { block: format!("{name}^{part}") });
            }
        }
    }
    let max_abs = sys.d_zw.d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs != 0.0 {
        violations.push(Violation::NonzeroFeedthrough { max_abs });
    }
    ValidationReport { violations }
}

/// Subsystem-level plant with the q = [x; u] interconnection channel.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsystemPlant {
    pub dims: Dimensions,
    pub a: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    pub b_w: DMatrix<f64>,
    pub b_p: DMatrix<f64>,
    pub c_y: DMatrix<f64>,
    pub d_yw: DMatrix<f64>,
    pub d_yp: DMatrix<f64>,
    pub c_z: DMatrix<f64>,
    pub d_zu: DMatrix<f64>,
    pub d_zp: DMatrix<f64>,
    pub c_q: DMatrix<f64>,
    pub d_qu: DMatrix<f64>,
    pub d_qw: DMatrix<f64>,
}

impl SubsystemPlant {
    /// Largest absolute entry over the plant data, at least 1.
    pub fn data_scale(&self) -> f64 {
        [&self.a, &self.b_u, &self.b_w, &self.b_p, &self.c_z, &self.d_zu, &self.d_zp]
            .iter()
            .flat_map(|m| m.iter())
            .fold(1.0f64, |s, v| s.max(v.abs()))
    }
}

pub fn subsystem_plant(sys: &HomogeneousSystem) -> SubsystemPlant {
    let Dimensions { n, n_u, n_w, n_q, .. } = sys.dims;
    let mut c_q = DMatrix::zeros(n_q, n);
    c_q.view_mut((0, 0), (n, n)).fill_with_identity();
    let mut d_qu = DMatrix::zeros(n_q, n_u);
    d_qu.view_mut((n, 0), (n_u, n_u)).fill_with_identity();
    SubsystemPlant {
        dims: sys.dims,
        a: sys.a.d.clone(),
        b_u: sys.b_u.d.clone(),
        b_w: sys.b_w.d.clone(),
        b_p: hcat(&sys.a.i, &sys.b_u.i),
        c_y: sys.c_y.d.clone(),
        d_yw: sys.d_yw.d.clone(),
        d_yp: hcat(&sys.c_y.i, &DMatrix::zeros(sys.dims.n_y, n_u)),
        c_z: sys.c_z.d.clone(),
        d_zu: sys.d_zu.d.clone(),
        d_zp: hcat(&sys.c_z.i, &sys.d_zu.i),
        c_q,
        d_qu,
        d_qw: DMatrix::zeros(n_q, n_w),
    }
}

pub fn interconnection_matrix(g: &PatternGraph, n_q: usize) -> DMatrix<f64> {
    kron(&g.to_f64(), &DMatrix::identity(n_q, n_q))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    #[serde(with = "io::matrix_serde")]
    pub k_d: DMatrix<f64>,
    #[serde(with = "io::matrix_serde")]
    pub k_i: DMatrix<f64>,
}

impl ControllerGains {
    pub fn zeros(dims: &Dimensions) -> Self {
        Self { k_d: DMatrix::zeros(dims.n_u, dims.n), k_i: DMatrix::zeros(dims.n_u, dims.n) }
    }

    pub fn as_decomposable(&self) -> DecomposableMatrix {
        DecomposableMatrix { d: self.k_d.clone(), i: self.k_i.clone() }
    }

    /// I⊗K^d + P⊗K^i.
    pub fn expand(&self, g: &PatternGraph) -> Result<DMatrix<f64>> {
        expand(&self.as_decomposable(), g)
    }

    fn check(&self, dims: &Dimensions) -> Result<()> {
        let want = (dims.n_u, dims.n);
        if self.k_d.shape() != want || self.k_i.shape() != want {
            return Err(Error::Shape(format!(
                "gains {:?}/{:?}, expected {:?}",
                self.k_d.shape(),
                self.k_i.shape(),
                want
            )));
        }
        Ok(())
    }
}

/// Closed loop as a block-diagonal plant in feedback with p = 𝒫q.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoopSystem {
    pub a_cl: DecomposableMatrix,
    pub b1: DecomposableMatrix,
    pub b2: DecomposableMatrix,
    pub c1: DecomposableMatrix,
    pub d11: DecomposableMatrix,
    pub d12: DecomposableMatrix,
    pub c2: DecomposableMatrix,
    pub d21: DecomposableMatrix,
    pub d22: DecomposableMatrix,
    pub pattern: PatternGraph,
    pub n_q: usize,
}

impl ClosedLoopSystem {
    pub fn interconnection(&self) -> DMatrix<f64> {
        interconnection_matrix(&self.pattern, self.n_q)
    }

    pub fn is_block_diagonal(&self) -> bool {
        [&self.a_cl, &self.b1, &self.b2, &self.c1, &self.d11, &self.d12, &self.c2, &self.d21, &self.d22]
            .iter()
            .all(|m| m.is_block_diagonal())
    }
}

/// Closed loop for u = (I⊗K^d + P⊗K^i)x with channel q_h = [x_h; K^i x_h].
///
/// The neighbour aggregate p_h = [Σ_j x_j; Σ_j K^i x_j] then enters through
/// B1 = [A^i, B_u^d] and D21 = [C_z^i, D_zu^d].
pub fn close_loop(sys: &HomogeneousSystem, k: &ControllerGains) -> Result<ClosedLoopSystem> {
    k.check(&sys.dims)?;
    sys.ensure_supported()?;
    let Dimensions { n, n_u, n_w, n_z, n_q, n_p, .. } = sys.dims;
    let bu = &sys.b_u.d;
    let du = &sys.d_zu.d;
    let dg = DecomposableMatrix::diagonal;
    let mut c1 = DMatrix::zeros(n_q, n);
    c1.view_mut((0, 0), (n, n)).fill_with_identity();
    c1.view_mut((n, 0), (n_u, n)).copy_from(&k.k_i);
    Ok(ClosedLoopSystem {
        a_cl: dg(&sys.a.d + bu * &k.k_d),
        b1: dg(hcat(&sys.a.i, bu)),
        b2: dg(sys.b_w.d.clone()),
        c1: dg(c1),
        d11: DecomposableMatrix::zeros(n_q, n_p),
        d12: DecomposableMatrix::zeros(n_q, n_w),
        c2: dg(&sys.c_z.d + du * &k.k_d),
        d21: dg(hcat(&sys.c_z.i, du)),
        d22: dg(sys.d_zw.d.clone()),
        pattern: sys.pattern.clone(),
        n_q,
    })
    .map(|cl| {
        debug_assert!(cl.is_block_diagonal());
        debug_assert_eq!(cl.c2.shape(), (n_z, n));
        cl
    })
}

pub(crate) fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::paper_sec7;
    use proptest::prelude::*;

    fn small_sys() -> HomogeneousSystem {
        let g = PatternGraph::ring(3);
        let mut s = HomogeneousSystem::zeros(g, Dimensions::new(2, 1, 1, 1, 1));
        s.a.d = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        s.a.i = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.2, 0.1]);
        s.b_u.d = DMatrix::from_row_slice(2, 1, &[1.0, 0.5]);
        s.b_w.d = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        s.c_z.d = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        s.c_z.i = DMatrix::from_row_slice(1, 2, &[0.0, 0.3]);
        s.d_zu.d = DMatrix::from_row_slice(1, 1, &[0.5]);
        s
    }

    #[test]
    fn expand_identity_and_pattern() {
        let sys = paper_sec7();
        let one = DecomposableMatrix::new(DMatrix::from_element(1, 1, 1.0), DMatrix::zeros(1, 1)).unwrap();
        assert_eq!(expand(&one, &sys.pattern).unwrap(), DMatrix::identity(6, 6));
        let p = DecomposableMatrix::new(DMatrix::zeros(1, 1), DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_eq!(expand(&p, &sys.pattern).unwrap(), sys.pattern.to_f64());
    }

    #[test]
    fn expand_paper_block() {
        let sys = paper_sec7();
        let a = expand(&sys.a, &sys.pattern).unwrap();
        assert_eq!(a.shape(), (18, 18));
        assert_eq!(a.view((0, 3), (3, 3)).clone_owned(), sys.a.i);
        assert_eq!(a.view((0, 0), (3, 3)).clone_owned(), sys.a.d);
        assert_eq!(a.view((0, 6), (3, 3)).clone_owned(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn expand_rejects_shape_mismatch() {
        let m = DecomposableMatrix { d: DMatrix::zeros(2, 2), i: DMatrix::zeros(2, 3) };
        assert!(matches!(expand(&m, &PatternGraph::ring(3)), Err(Error::Shape(_))));
        assert!(DecomposableMatrix::new(DMatrix::zeros(1, 2), DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn subsystem_plant_channel_blocks() {
        let sys = paper_sec7();
        let pl = subsystem_plant(&sys);
        assert_eq!(pl.b_p.columns(0, 3).clone_owned(), sys.a.i);
        assert_eq!(pl.b_p.column(3).iter().copied().collect::<Vec<_>>(), vec![0.0; 3]);
        assert_eq!(pl.d_zp, hcat(&sys.c_z.i, &DMatrix::zeros(2, 1)));

        let s = small_sys();
        let pl = subsystem_plant(&s);
        assert_eq!(pl.c_q, DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
        assert_eq!(pl.d_qu, DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]));
        assert_eq!(pl.d_qw, DMatrix::zeros(3, 1));
    }

    #[test]
    fn decoupled_plant_has_zero_channel() {
        let mut s = small_sys();
        s.a.i.fill(0.0);
        s.c_z.i.fill(0.0);
        let pl = subsystem_plant(&s);
        assert!(pl.b_p.iter().all(|v| *v == 0.0));
        assert!(pl.d_zp.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn interconnection_examples() {
        let g = PatternGraph::ring(2);
        assert_eq!(interconnection_matrix(&g, 1), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let big = interconnection_matrix(&paper_sec7().pattern, 4);
        assert_eq!(big.shape(), (24, 24));
        assert_eq!(big.view((0, 4), (4, 4)).clone_owned(), DMatrix::identity(4, 4));
        assert_eq!(interconnection_matrix(&PatternGraph::empty(3), 2), DMatrix::zeros(6, 6));
    }

    #[test]
    fn close_loop_open_loop_case() {
        let sys = paper_sec7();
        let cl = close_loop(&sys, &ControllerGains::zeros(&sys.dims)).unwrap();
        assert_eq!(cl.a_cl.d, sys.a.d);
        assert_eq!(cl.c2.d, sys.c_z.d);
        assert!(cl.d11.d.iter().all(|v| *v == 0.0) && cl.d22.d.iter().all(|v| *v == 0.0));
        assert!(cl.is_block_diagonal());
    }

    #[test]
    fn close_loop_rejects_coupled_input() {
        let mut s = small_sys();
        s.b_u.i[(0, 0)] = 1.0;
        assert!(validate(&s).passed());
        assert!(matches!(
            close_loop(&s, &ControllerGains::zeros(&s.dims)),
            Err(Error::UnsupportedInterconnection(_))
        ));
    }

    #[test]
    fn validate_examples() {
        assert!(validate(&paper_sec7()).passed());

        let mut s = small_sys();
        s.pattern = PatternGraph::new_unchecked(DMatrix::from_row_slice(2, 2, &[1, 1, 1, 0])).unwrap();
        let r = validate(&s);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::SelfLoop { node: 0 })));
        assert!(r.to_string().contains("self-loop"));

        let mut s = small_sys();
        s.d_zw.d = DMatrix::identity(1, 1);
        let r = validate(&s);
        assert!(r.to_string().contains("nonzero feedthrough"));

        let mut s = small_sys();
        s.b_w.d = DMatrix::zeros(3, 1);
        s.pattern = PatternGraph::new_unchecked(DMatrix::from_row_slice(2, 2, &[0, 2, 1, 0])).unwrap();
        let r = validate(&s);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::Shape { .. })));
        assert!(r.violations.iter().any(|v| matches!(v, Violation::NonBinary { .. })));
        assert!(r.violations.iter().any(|v| matches!(v, Violation::Asymmetric { .. })));
    }

    fn arb_pattern(max_n: usize) -> impl Strategy<Value = PatternGraph> {
        (2..=max_n).prop_flat_map(|n| {
            proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
                let mut a = DMatrix::zeros(n, n);
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        if bits[k] {
                            a[(i, j)] = 1;
                            a[(j, i)] = 1;
                        }
                        k += 1;
                    }
                }
                PatternGraph::new(a).unwrap()
            })
        })
    }

    fn arb_mat(r: usize, c: usize) -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(-2.0f64..2.0, r * c).prop_map(move |v| DMatrix::from_vec(r, c, v))
    }

    proptest! {
        #[test]
        fn expand_is_linear(g in arb_pattern(5), bd in arb_mat(2, 3), bi in arb_mat(2, 3),
                            cd in arb_mat(2, 3), ci in arb_mat(2, 3), s in -3.0f64..3.0) {
            let b = DecomposableMatrix::new(bd, bi).unwrap();
            let c = DecomposableMatrix::new(cd, ci).unwrap();
            let lhs = expand(&b.add(&c).unwrap(), &g).unwrap();
            let rhs = expand(&b, &g).unwrap() + expand(&c, &g).unwrap();
            prop_assert!((lhs - rhs).amax() <= 1e-12);
            let lhs = expand(&b.scale(s), &g).unwrap();
            let rhs = expand(&b, &g).unwrap() * s;
            prop_assert!((lhs - rhs).amax() <= 1e-12);
        }

        #[test]
        fn closed_loop_is_wellposed(g in arb_pattern(4), kd in arb_mat(1, 2), ki in arb_mat(1, 2)) {
            let mut s = small_sys();
            s.pattern = g;
            let cl = close_loop(&s, &ControllerGains { k_d: kd, k_i: ki }).unwrap();
            let d11 = expand(&cl.d11, &cl.pattern).unwrap();
            let m = DMatrix::identity(d11.nrows(), d11.nrows()) - d11 * cl.interconnection();
            prop_assert_eq!(m.clone(), DMatrix::identity(m.nrows(), m.nrows()));
        }
    }
}
