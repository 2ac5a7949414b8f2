//! Solver backends and the independent residual check.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

use super::problem::{LmiProblem, Sense, VarValue};

/// Conic program: minimise cᵀx subject to F0_j + Σ_k x_k F_kj ⪰ 0 for every block j.
#[derive(Clone, Debug, Default)]
pub struct ConicProgram {
    pub n_vars: usize,
    pub blocks: Vec<PsdBlock>,
    pub objective: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PsdBlock {
    pub constant: DMatrix<f64>,
    pub coeffs: Vec<(usize, DMatrix<f64>)>,
}

impl ConicProgram {
    pub fn free_scalar(&mut self) -> usize {
        self.n_vars += 1;
        self.objective.push(0.0);
        self.n_vars - 1
    }

    pub fn psd(&mut self, constant: DMatrix<f64>, coeffs: Vec<(usize, DMatrix<f64>)>) {
        debug_assert!(coeffs.iter().all(|(k, m)| *k < self.n_vars && m.shape() == constant.shape()));
        self.blocks.push(PsdBlock { constant, coeffs });
    }

    pub fn set_objective(&mut self, c: Vec<f64>) {
        assert_eq!(c.len(), self.n_vars);
        self.objective = c;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendStatus {
    Solved,
    Infeasible,
    Inaccurate,
    Failed,
}

#[derive(Clone, Debug)]
pub struct BackendSolution {
    pub status: BackendStatus,
    pub x: Vec<f64>,
    pub raw_status: String,
    pub iterations: u32,
    /// Absolute primal-dual objective gap at `x`, if the backend tracks one.
    pub gap: Option<f64>,
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, program: &ConicProgram) -> BackendSolution;
    /// Second opinion for runs that stall without a decision.
    fn fallback(&self) -> Option<&dyn Backend> {
        None
    }
}

#[derive(Clone, Debug)]
pub struct ClarabelBackend {
    pub max_iter: u32,
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub verbose: bool,
    /// Sparse LDL backend: "qdldl" or "faer".
    pub solve_method: String,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self { max_iter: 400, tol_feas: 1e-9, tol_gap: 1e-9, verbose: false, solve_method: "faer".into() }
    }
}

impl ClarabelBackend {
    /// Relative accuracy the independent checks should allow for.
    pub fn tolerance(&self) -> f64 {
        self.tol_feas.max(self.tol_gap)
    }
}

fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

impl Backend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn solve(&self, prog: &ConicProgram) -> BackendSolution {
        let n = prog.n_vars;
        // s = b − A x; scalar blocks go into one nonnegative cone, the rest are PSD triangles.
        let (scalars, mats): (Vec<&PsdBlock>, Vec<&PsdBlock>) = prog.blocks.iter().partition(|b| b.constant.nrows() == 1);
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut b = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let mut row0 = 0;
        for blk in &scalars {
            b.push(blk.constant[(0, 0)]);
            for (k, m) in &blk.coeffs {
                if m[(0, 0)] != 0.0 {
                    rows.push(row0);
                    cols.push(*k);
                    vals.push(-m[(0, 0)]);
                }
            }
            row0 += 1;
        }
        if !scalars.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(scalars.len()));
        }
        let s2 = std::f64::consts::SQRT_2;
        for blk in &mats {
            let d = blk.constant.nrows();
            let mut idx = row0;
            for j in 0..d {
                for i in 0..=j {
                    let w = if i == j { 1.0 } else { s2 };
                    b.push(blk.constant[(i, j)] * w);
                    for (k, m) in &blk.coeffs {
                        let v = m[(i, j)];
                        if v != 0.0 {
                            rows.push(idx);
                            cols.push(*k);
                            vals.push(-v * w);
                        }
                    }
                    idx += 1;
                }
            }
            cones.push(SupportedConeT::PSDTriangleConeT(d));
            row0 += svec_len(d);
        }
        let m = row0;
        let a = CscMatrix::new_from_triplets(m, n, rows, cols, vals);
        let p = CscMatrix::<f64>::zeros((n, n));
        let settings = match DefaultSettingsBuilder::default()
            .verbose(self.verbose)
            .max_iter(self.max_iter)
            .tol_feas(self.tol_feas)
            .tol_gap_abs(self.tol_gap)
            .tol_gap_rel(self.tol_gap)
            .direct_solve_method(self.solve_method.clone())
            .build()
        {
            Ok(s) => s,
            Err(e) => return failed(n, format!("settings: {e}")),
        };
        let mut solver = match DefaultSolver::new(&p, &prog.objective, &a, &b, &cones, settings) {
            Ok(s) => s,
            Err(e) => return failed(n, format!("setup: {e:?}")),
        };
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => BackendStatus::Solved,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => BackendStatus::Infeasible,
            SolverStatus::AlmostSolved
            | SolverStatus::MaxIterations
            | SolverStatus::MaxTime
            | SolverStatus::InsufficientProgress => BackendStatus::Inaccurate,
            _ => BackendStatus::Failed,
        };
        let gap = (sol.obj_val - sol.obj_val_dual).abs();
        BackendSolution {
            status,
            x: sol.x.clone(),
            raw_status: format!("{:?}", sol.status),
            iterations: sol.iterations,
            gap: gap.is_finite().then_some(gap),
        }
    }
}

/// `primary`, with `secondary` consulted by [`solve`] when the primary stalls undecided.
pub struct FallbackBackend {
    pub primary: Box<dyn Backend>,
    pub secondary: Box<dyn Backend>,
}

impl Default for FallbackBackend {
    fn default() -> Self {
        Self { primary: Box::new(super::InteriorPointBackend::default()), secondary: Box::new(ClarabelBackend::default()) }
    }
}

impl Backend for FallbackBackend {
    fn name(&self) -> &str {
        "ipm+clarabel"
    }

    fn solve(&self, prog: &ConicProgram) -> BackendSolution {
        self.primary.solve(prog)
    }

    fn fallback(&self) -> Option<&dyn Backend> {
        Some(self.secondary.as_ref())
    }
}

fn failed(n: usize, msg: String) -> BackendSolution {
    BackendSolution { status: BackendStatus::Failed, x: vec![f64::NAN; n], raw_status: msg, iterations: 0, gap: None }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Feasible,
    Infeasible,
    Inaccurate,
    Failed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub assignment: BTreeMap<String, VarValue>,
    #[serde(skip)]
    pub x: Vec<f64>,
    /// Smallest constraint margin, recomputed from the assignment.
    pub min_margin: f64,
    /// max(0, ε − min_margin).
    pub residual: f64,
    pub margins: Vec<(String, f64)>,
    pub objective: Option<f64>,
    pub backend_status: String,
    pub iterations: u32,
    pub seconds: f64,
}

impl SolveOutcome {
    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Feasible
    }
}

/// Solves `p`. Without an objective the common margin t of all constraints is maximised
/// (capped at 1) and the problem is declared feasible iff the recomputed margin is ≥ ε.
/// With an objective the constraints carry the ε shift directly.
///
/// If the backend stalls without a feasible point and has a fallback, the fallback is
/// run too; a feasible answer from either wins, since margins are checked at the point.
pub fn solve(p: &LmiProblem, backend: &dyn Backend) -> SolveOutcome {
    let start = Instant::now();
    let (mut out, decided) = solve_once(p, backend);
    if !out.is_feasible() && !decided {
        if let Some(fb) = backend.fallback() {
            let (other, _) = solve_once(p, fb);
            if other.is_feasible() || (other.status == SolveStatus::Infeasible && out.status != SolveStatus::Infeasible) {
                out = SolveOutcome { backend_status: format!("{} after {}", other.backend_status, out.backend_status), ..other };
            }
        }
    }
    out.seconds = start.elapsed().as_secs_f64();
    out
}

fn solve_once(p: &LmiProblem, backend: &dyn Backend) -> (SolveOutcome, bool) {
    let start = Instant::now();
    let eps = p.epsilon;
    if p.constraints.is_empty() && p.objective.is_none() {
        let x = vec![0.0; p.n_scalars];
        let trivial = SolveOutcome {
            status: SolveStatus::Feasible,
            assignment: p.assignment(&x),
            x,
            min_margin: f64::INFINITY,
            residual: 0.0,
            margins: Vec::new(),
            objective: None,
            backend_status: "trivial".into(),
            iterations: 0,
            seconds: 0.0,
        };
        return (trivial, true);
    }

    let mut prog = ConicProgram::default();
    for _ in 0..p.n_scalars {
        prog.free_scalar();
    }
    let margin_mode = p.objective.is_none();
    let t = margin_mode.then(|| prog.free_scalar());
    for c in &p.constraints {
        let sign = match c.sense {
            Sense::Psd => 1.0,
            Sense::Nsd => -1.0,
        };
        let d = c.expr.nrows();
        let eye = DMatrix::<f64>::identity(d, d);
        let mut coeffs: Vec<(usize, DMatrix<f64>)> = c.expr.terms.iter().map(|(k, m)| (*k, m * sign)).collect();
        let constant = match t {
            Some(t) => {
                coeffs.push((t, -&eye));
                &c.expr.constant * sign
            }
            None => &c.expr.constant * sign - &eye * eps,
        };
        prog.psd(constant, coeffs);
    }
    if let Some(t) = t {
        prog.psd(DMatrix::from_element(1, 1, 1.0), vec![(t, DMatrix::from_element(1, 1, -1.0))]);
        let mut c = vec![0.0; prog.n_vars];
        c[t] = -1.0;
        prog.set_objective(c);
    } else if let Some((c, _)) = &p.objective {
        let mut cv = c.iter().copied().collect::<Vec<_>>();
        cv.resize(prog.n_vars, 0.0);
        prog.set_objective(cv);
    }
    if let Some(bound) = p.scalar_bound {
        for k in 0..p.n_scalars {
            let one = DMatrix::from_element(1, 1, 1.0);
            prog.psd(DMatrix::from_element(1, 1, bound), vec![(k, -&one)]);
            prog.psd(DMatrix::from_element(1, 1, bound), vec![(k, one)]);
        }
    }

    let sol = backend.solve(&prog);
    let x: Vec<f64> = sol.x[..p.n_scalars].to_vec();
    let finite = x.iter().all(|v| v.is_finite());
    let margins = if finite { p.margins(&x) } else { Vec::new() };
    let min_margin = if finite {
        margins.iter().fold(f64::INFINITY, |m, (_, v)| m.min(*v))
    } else {
        f64::NEG_INFINITY
    };
    let check_tol = 10.0 * 1e-8 * p.data_scale();
    let status = if !finite {
        SolveStatus::Failed
    } else if margin_mode {
        if min_margin >= eps {
            SolveStatus::Feasible
        } else {
            match sol.status {
                BackendStatus::Solved | BackendStatus::Infeasible => SolveStatus::Infeasible,
                BackendStatus::Inaccurate => SolveStatus::Inaccurate,
                BackendStatus::Failed => SolveStatus::Failed,
            }
        }
    } else {
        match sol.status {
            BackendStatus::Solved if min_margin >= eps - check_tol => SolveStatus::Feasible,
            BackendStatus::Solved | BackendStatus::Inaccurate => SolveStatus::Inaccurate,
            BackendStatus::Infeasible => SolveStatus::Infeasible,
            BackendStatus::Failed => SolveStatus::Failed,
        }
    };
    let objective = p.objective.as_ref().filter(|_| finite).map(|(c, c0)| c.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + c0);
    // a stalled run is still decisive when even the gap cannot lift the margin to ε
    let decided = sol.status == BackendStatus::Solved
        || (margin_mode && finite && sol.gap.is_some_and(|g| min_margin + 2.0 * g < eps));
    let out = SolveOutcome {
        status,
        assignment: if finite { p.assignment(&x) } else { BTreeMap::new() },
        x,
        min_margin,
        residual: (eps - min_margin).max(0.0),
        margins,
        objective,
        backend_status: sol.raw_status,
        iterations: sol.iterations,
        seconds: start.elapsed().as_secs_f64(),
    };
    (out, decided)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::expr::LinMat;

    #[test]
    fn empty_problem_is_feasible() {
        let p = LmiProblem::new("empty");
        let out = solve(&p, &ClarabelBackend::default());
        assert!(out.is_feasible());
        assert!(out.assignment.is_empty());
    }

    #[test]
    fn scalar_sdp_minimum() {
        let mut p = LmiProblem::new("scalar");
        let x = p.symmetric("x", 1);
        p.constrain("x>=1", x.expr() - LinMat::identity(1), Sense::Psd);
        p.minimize(&x.expr());
        let out = solve(&p, &ClarabelBackend::default());
        assert!(out.is_feasible(), "{out:?}");
        assert!((out.assignment["x"].d[(0, 0)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn contradictory_scalars_are_infeasible() {
        let mut p = LmiProblem::new("bad");
        let x = p.symmetric("x", 1);
        p.constrain("x>=1", x.expr() - LinMat::identity(1), Sense::Psd);
        p.constrain("x<=0", x.expr(), Sense::Nsd);
        let out = solve(&p, &ClarabelBackend::default());
        assert_eq!(out.status, SolveStatus::Infeasible);
        assert!(out.residual > 0.0);
    }

    struct Stall;

    impl Backend for Stall {
        fn name(&self) -> &str {
            "stall"
        }

        fn solve(&self, prog: &ConicProgram) -> BackendSolution {
            BackendSolution { status: BackendStatus::Inaccurate, x: vec![0.0; prog.n_vars], raw_status: "stalled".into(), iterations: 1, gap: None }
        }
    }

    #[test]
    fn fallback_only_decides_stalled_runs() {
        let mut p = LmiProblem::new("x>=1");
        let x = p.symmetric("x", 1);
        p.constrain("x>=1", x.expr() - LinMat::identity(1), Sense::Psd);
        assert_eq!(solve(&p, &Stall).status, SolveStatus::Inaccurate);
        let fb = FallbackBackend { primary: Box::new(Stall), secondary: Box::new(ClarabelBackend::default()) };
        let out = solve(&p, &fb);
        assert!(out.is_feasible(), "{out:?}");
        assert!(out.backend_status.ends_with("after stalled"), "{}", out.backend_status);

        // a stalled run that still lands on a feasible point is kept
        let mut q = LmiProblem::new("x>=-1");
        let y = q.symmetric("x", 1);
        q.constrain("x>=-1", y.expr() + LinMat::identity(1), Sense::Psd);
        assert_eq!(solve(&q, &fb).backend_status, "stalled");
    }

    #[test]
    fn lyapunov_feasibility() {
        // AᵀX + XA ≺ 0, X ≻ 0 for a stable and an unstable A
        for (a, want) in [([-1.0, 2.0, 0.0, -3.0], true), ([0.5, 1.0, 0.0, -1.0], false)] {
            let a = DMatrix::from_row_slice(2, 2, &a);
            let mut p = LmiProblem::new("lyap");
            let x = p.symmetric("X", 2);
            p.constrain("X", x.expr(), Sense::Psd);
            p.constrain("lyap", x.expr().rmul(&a).he(), Sense::Nsd);
            let out = solve(&p, &ClarabelBackend::default());
            assert_eq!(out.is_feasible(), want, "{out:?}");
        }
    }
}
