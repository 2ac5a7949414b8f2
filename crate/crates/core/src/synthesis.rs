//! γ-bisection synthesis drivers, gain recovery and the commuting-pattern search.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::analysis::{hinf_sweep, verify_certificate_with, CertificateReport, StateSpace, VerifyOptions};
use crate::error::{Error, Result};
use crate::lmi::{
    assemble_decomposed, assemble_dual_efbsp, solve, AssemblyOptions, Backend, LmiProblem,
    FallbackBackend, MultiplierMode, Performance, SolveOutcome, SolveStatus, StructureMode, VarValue,
};
use crate::model::{subsystem_plant, ControllerGains, Dimensions, HomogeneousSystem, PatternGraph};
use crate::slalg::sym_eig;

/// Largest N for the undecomposed problem.
pub const FULL_SIZE_LIMIT: usize = 12;
/// Largest N for the commuting-pattern search.
pub const PATTERN_SEARCH_LIMIT: usize = 8;
/// Condition number of F̃ above which gain recovery is refused.
pub const MAX_F_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthesisMode {
    Kron,
    Blockdiag,
    Full,
}

impl fmt::Display for SynthesisMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthesisMode::Kron => "kron",
            SynthesisMode::Blockdiag => "blockdiag",
            SynthesisMode::Full => "full",
        })
    }
}

#[derive(Clone)]
pub struct SynthesisOptions {
    /// Defaults to 1e-4.
    pub gamma_lo: Option<f64>,
    /// Defaults to 10³ × open-loop sweep norm (stable) or 10⁶.
    pub gamma_hi: Option<f64>,
    pub bisect_tol: f64,
    pub epsilon: Option<f64>,
    pub multiplier_mode: MultiplierMode,
    pub structure_mode: StructureMode,
    pub scalar_bound: Option<f64>,
    /// Extra probes above the result to check monotonicity.
    pub monotonicity_checks: usize,
    /// Maximise ρ = γ⁻² in one solve instead of bisecting.
    pub direct_rho: bool,
    pub verify: VerifyOptions,
    pub backend: Arc<dyn Backend>,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            gamma_lo: None,
            gamma_hi: None,
            bisect_tol: 1e-4,
            epsilon: None,
            multiplier_mode: MultiplierMode::PerEigenvalue,
            structure_mode: StructureMode::Kron,
            scalar_bound: Some(crate::lmi::problem::DEFAULT_SCALAR_BOUND),
            monotonicity_checks: 0,
            direct_rho: false,
            verify: VerifyOptions { lmi_state_limit: 0, ..VerifyOptions::default() },
            backend: Arc::new(FallbackBackend::default()),
        }
    }
}

impl fmt::Debug for SynthesisOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SynthesisOptions")
            .field("gamma_lo", &self.gamma_lo)
            .field("gamma_hi", &self.gamma_hi)
            .field("bisect_tol", &self.bisect_tol)
            .field("epsilon", &self.epsilon)
            .field("multiplier_mode", &self.multiplier_mode)
            .field("structure_mode", &self.structure_mode)
            .field("scalar_bound", &self.scalar_bound)
            .field("monotonicity_checks", &self.monotonicity_checks)
            .field("direct_rho", &self.direct_rho)
            .field("backend", &self.backend.name())
            .finish()
    }
}

impl SynthesisOptions {
    fn check(&self) -> Result<()> {
        if !(self.bisect_tol > 0.0 && self.bisect_tol < 1.0) {
            return Err(Error::InvalidArgument(format!("bisect_tol must lie in (0, 1), got {}", self.bisect_tol)));
        }
        for (name, v) in [("gamma_lo", self.gamma_lo), ("gamma_hi", self.gamma_hi)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (self.gamma_lo, self.gamma_hi) {
            if lo >= hi {
                return Err(Error::InvalidArgument(format!("gamma_lo {lo} must be below gamma_hi {hi}")));
            }
        }
        Ok(())
    }

    fn assembly(&self, structure: StructureMode) -> AssemblyOptions {
        AssemblyOptions { structure, multiplier: self.multiplier_mode, epsilon: self.epsilon, scalar_bound: self.scalar_bound }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectProbe {
    pub gamma: f64,
    pub feasible: bool,
    #[serde(default)]
    pub spot_check: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<SolveStatus>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BisectTrace {
    pub probes: Vec<BisectProbe>,
    pub monotone: bool,
    pub warnings: Vec<String>,
}

/// Smallest feasible γ in [lo, hi] to relative tolerance `tol` by geometric bisection.
pub fn bisect_gamma<F>(feasible_at: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, BisectTrace)>
where
    F: FnMut(f64) -> Result<bool>,
{
    bisect_gamma_with(feasible_at, lo, hi, tol, 3)
}

/// As [`bisect_gamma`], re-probing `spot_checks` points between the result and `hi`.
pub fn bisect_gamma_with<F>(mut feasible_at: F, lo: f64, hi: f64, tol: f64, spot_checks: usize) -> Result<(f64, BisectTrace)>
where
    F: FnMut(f64) -> Result<bool>,
{
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("need 0 < lo < hi, got lo = {lo}, hi = {hi}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let mut trace = BisectTrace { monotone: true, ..Default::default() };
    let mut probe = |g: f64, spot: bool, trace: &mut BisectTrace| -> Result<bool> {
        let ok = feasible_at(g)?;
        trace.probes.push(BisectProbe { gamma: g, feasible: ok, spot_check: spot, margin: None, status: None });
        Ok(ok)
    };
    if !probe(hi, false, &mut trace)? {
        return Err(Error::InfeasibleAtGammaHi { gamma_hi: hi });
    }
    let best = if probe(lo, false, &mut trace)? {
        lo
    } else {
        let (mut a, mut b) = (lo, hi);
        while b / a - 1.0 > tol {
            let mid = (a * b).sqrt();
            if probe(mid, false, &mut trace)? {
                b = mid;
            } else {
                a = mid;
            }
        }
        b
    };
    for k in 1..=spot_checks {
        let g = best * (hi / best).powf(k as f64 / (spot_checks + 1) as f64);
        if g > best {
            probe(g, true, &mut trace)?;
        }
    }
    let first_feasible = trace.probes.iter().filter(|p| p.feasible).map(|p| p.gamma).fold(f64::INFINITY, f64::min);
    if let Some(bad) = trace.probes.iter().find(|p| !p.feasible && p.gamma > first_feasible) {
        trace.monotone = false;
        trace.warnings.push(format!(
            "feasibility is not monotone in gamma: infeasible at {} above feasible {}",
            bad.gamma, first_feasible
        ));
    }
    Ok((best, trace))
}

/// K̂ = M F̃⁻¹ split into K^d (first n_u rows) and K^i (last n_u rows).
pub fn recover_gains(m: &DMatrix<f64>, f: &DMatrix<f64>, dims: &Dimensions) -> Result<ControllerGains> {
    let (n, nu) = (dims.n, dims.n_u);
    if f.shape() != (n, n) || m.shape() != (2 * nu, n) {
        return Err(Error::Shape(format!("recover_gains: M {:?}, F {:?} for n = {n}, n_u = {nu}", m.shape(), f.shape())));
    }
    if n == 0 {
        return Ok(ControllerGains::zeros(dims));
    }
    let sv = f.singular_values();
    let (smin, smax) = (sv.min(), sv.max());
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= MAX_F_CONDITION) {
        return Err(Error::SingularF { cond });
    }
    // K̂ F = M  ⇔  Fᵀ K̂ᵀ = Mᵀ
    let k = f
        .transpose()
        .lu()
        .solve(&m.transpose())
        .ok_or(Error::SingularF { cond: f64::INFINITY })?
        .transpose();
    Ok(ControllerGains { k_d: k.rows(0, nu).clone_owned(), k_i: k.rows(nu, nu).clone_owned() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenMargin {
    pub lambda: f64,
    pub multiplicity: usize,
    /// Nominal-condition margin at this eigenvalue.
    pub nominal: f64,
    /// Multiplier-condition margin, where imposed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub mode: SynthesisMode,
    pub gains: ControllerGains,
    pub gamma_certified: f64,
    pub gamma_verified: f64,
    pub per_eigenvalue: Vec<EigenMargin>,
    pub iterations: BisectTrace,
    pub variables: BTreeMap<String, VarValue>,
    pub certificate: CertificateReport,
    pub n_subsystems: usize,
    pub seconds: f64,
}

fn default_bounds(sys: &HomogeneousSystem, opts: &SynthesisOptions) -> Result<(f64, f64)> {
    let lo = opts.gamma_lo.unwrap_or(1e-4);
    let hi = match opts.gamma_hi {
        Some(h) => h,
        None => match open_loop_sweep_norm(sys)? {
            Some(h) => (1e3 * h).max(1e3 * lo),
            None => 1e6,
        },
    };
    if lo >= hi {
        return Err(Error::InvalidArgument(format!("gamma_lo {lo} must be below gamma_hi {hi}")));
    }
    Ok((lo, hi))
}

/// Open-loop sweep norm as the maximum over pattern modes; `None` if unstable.
pub fn open_loop_sweep_norm(sys: &HomogeneousSystem) -> Result<Option<f64>> {
    let e = sym_eig(&sys.pattern, None)?;
    let mut worst = 0.0f64;
    for l in e.distinct_values() {
        let ss = StateSpace::new(sys.a.at(l), sys.b_w.at(l), sys.c_z.at(l), sys.d_zw.at(l))?;
        let h = hinf_sweep(&ss)?;
        if !h.stable {
            return Ok(None);
        }
        worst = worst.max(h.norm);
    }
    Ok(Some(worst))
}

struct Solved {
    gamma: f64,
    problem: LmiProblem,
    outcome: SolveOutcome,
}

/// Shared driver: `build` assembles the problem at a performance level.
fn run<B>(sys: &HomogeneousSystem, mode: SynthesisMode, opts: &SynthesisOptions, build: B) -> Result<SynthesisResult>
where
    B: Fn(Performance) -> Result<LmiProblem>,
{
    let start = Instant::now();
    opts.check()?;
    sys.ensure_supported()?;
    let backend = opts.backend.as_ref();
    let mut best: Option<Solved> = None;
    let mut details: Vec<(f64, f64, SolveStatus)> = Vec::new();

    let (gamma_certified, mut trace) = if opts.direct_rho {
        let p = build(Performance::MaximizeRho)?;
        let out = solve(&p, backend);
        let rho = out.assignment.get("rho").map(|v| v.d[(0, 0)]).unwrap_or(0.0);
        if !out.is_feasible() || !(rho > 0.0) {
            return Err(Error::InfeasibleAtGammaHi { gamma_hi: f64::INFINITY });
        }
        let g = 1.0 / rho.sqrt();
        let probe = BisectProbe { gamma: g, feasible: true, spot_check: false, margin: Some(out.min_margin), status: Some(out.status) };
        best = Some(Solved { gamma: g, problem: p, outcome: out });
        (g, BisectTrace { probes: vec![probe], monotone: true, warnings: Vec::new() })
    } else {
        let (lo, hi) = default_bounds(sys, opts)?;
        let feasible_at = |g: f64| -> Result<bool> {
            let p = build(Performance::Gamma(g))?;
            let out = solve(&p, backend);
            details.push((g, out.min_margin, out.status));
            let ok = out.is_feasible();
            if ok && best.as_ref().is_none_or(|b| g <= b.gamma) {
                best = Some(Solved { gamma: g, problem: p, outcome: out });
            }
            Ok(ok)
        };
        bisect_gamma_with(feasible_at, lo, hi, opts.bisect_tol, opts.monotonicity_checks)?
    };
    for (probe, (g, margin, status)) in trace.probes.iter_mut().zip(&details) {
        debug_assert_eq!(probe.gamma, *g);
        probe.margin = Some(*margin);
        probe.status = Some(*status);
    }
    let best = best.ok_or(Error::InfeasibleAtGammaHi { gamma_hi: gamma_certified })?;
    debug_assert!((best.gamma - gamma_certified).abs() <= 1e-12 * gamma_certified || opts.direct_rho);

    let var = |name: &str| -> Result<DMatrix<f64>> {
        best.outcome
            .assignment
            .get(name)
            .map(|v| v.d.clone())
            .ok_or_else(|| Error::Solver(format!("variable {name} missing from solution")))
    };
    let gains = recover_gains(&var("M")?, &var("Ft")?, &sys.dims)?;
    let certificate = verify_certificate_with(sys, &gains, gamma_certified, &opts.verify);
    if !certificate.passed {
        return Err(Error::VerificationFailed { gamma: gamma_certified, detail: certificate.failures.join("; ") });
    }
    let gamma_verified = certificate.hinf.as_ref().map(|h| h.norm).unwrap_or(f64::NAN);
    let per_eigenvalue = per_eigenvalue_margins(sys, opts, mode, &best)?;
    Ok(SynthesisResult {
        mode,
        gains,
        gamma_certified,
        gamma_verified,
        per_eigenvalue,
        iterations: trace,
        variables: best.outcome.assignment.clone(),
        certificate,
        n_subsystems: sys.n_subsystems(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Margins of the decomposed conditions at the final solution. The full-size problem
/// shares the variable layout, so its solution is evaluated the same way.
fn per_eigenvalue_margins(sys: &HomogeneousSystem, opts: &SynthesisOptions, mode: SynthesisMode, best: &Solved) -> Result<Vec<EigenMargin>> {
    let e = sym_eig(&sys.pattern, None)?;
    let structure = match mode {
        SynthesisMode::Blockdiag => StructureMode::BlockDiag,
        _ => opts.structure_mode,
    };
    let problem = if mode == SynthesisMode::Full {
        if structure == StructureMode::Free {
            return Ok(Vec::new());
        }
        let perf = if opts.direct_rho { Performance::MaximizeRho } else { Performance::Gamma(best.gamma) };
        assemble_decomposed(&subsystem_plant(sys), &e.distinct_values(), perf, &opts.assembly(structure))?.0
    } else {
        best.problem.clone()
    };
    let x = &best.outcome.x;
    let mut out: Vec<EigenMargin> = e
        .distinct
        .iter()
        .map(|&(lambda, multiplicity)| EigenMargin { lambda, multiplicity, nominal: f64::NAN, multiplier: None })
        .collect();
    for c in &problem.constraints {
        let Some(l) = c.lambda else { continue };
        let Some(slot) = out.iter_mut().find(|m| m.lambda == l) else { continue };
        let margin = c.margin(x);
        if c.name.starts_with("nominal") {
            slot.nominal = margin;
        } else {
            slot.multiplier = Some(margin);
        }
    }
    Ok(out)
}

/// Decomposed conditions over the distinct pattern eigenvalues with shared variables.
pub fn synth_decomposed(sys: &HomogeneousSystem, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    let mode = match opts.structure_mode {
        StructureMode::Kron => SynthesisMode::Kron,
        StructureMode::BlockDiag => SynthesisMode::Blockdiag,
        StructureMode::Free => {
            return Err(Error::InvalidArgument("free variables are only available for the full-size problem".into()))
        }
    };
    let plant = subsystem_plant(sys);
    let lambdas = sym_eig(&sys.pattern, None)?.distinct_values();
    let asm = opts.assembly(opts.structure_mode);
    run(sys, mode, opts, |perf| assemble_decomposed(&plant, &lambdas, perf, &asm).map(|(p, _)| p))
}

/// Decomposed synthesis with every interconnection part of the variables forced to zero.
pub fn synth_blockdiag_baseline(sys: &HomogeneousSystem, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    let mut o = opts.clone();
    o.structure_mode = StructureMode::BlockDiag;
    synth_decomposed(sys, &o)
}

/// The undecomposed network-size problem.
pub fn synth_full_dual(sys: &HomogeneousSystem, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    let n = sys.n_subsystems();
    if n > FULL_SIZE_LIMIT {
        return Err(Error::SizeGuard { what: "full-size synthesis", size: n, limit: FULL_SIZE_LIMIT });
    }
    let asm = opts.assembly(opts.structure_mode);
    run(sys, SynthesisMode::Full, opts, |perf| assemble_dual_efbsp(sys, perf, &asm).map(|(p, _)| p))
}

pub fn synthesize(sys: &HomogeneousSystem, mode: SynthesisMode, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    match mode {
        SynthesisMode::Kron => {
            let mut o = opts.clone();
            o.structure_mode = StructureMode::Kron;
            synth_decomposed(sys, &o)
        }
        SynthesisMode::Blockdiag => synth_blockdiag_baseline(sys, opts),
        SynthesisMode::Full => synth_full_dual(sys, opts),
    }
}

/// Upper-triangle positions (i, j), i < j, in row-major order.
pub fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// Binary symmetric zero-diagonal P₁ ≠ P commuting with P with the most edges.
/// Ties go to the lexicographically smallest upper-triangle bit string.
pub fn find_commuting_pattern(g: &PatternGraph) -> Result<PatternGraph> {
    let n = g.n_subsystems();
    if n > PATTERN_SEARCH_LIMIT {
        return Err(Error::SizeGuard { what: "commuting-pattern search", size: n, limit: PATTERN_SEARCH_LIMIT });
    }
    let p = g.adjacency();
    let pairs = upper_pairs(n);
    let nb = pairs.len();
    let bit_of = |a: usize, b: usize| -> Option<usize> {
        if a == b {
            return None;
        }
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        pairs.iter().position(|&q| q == (i, j))
    };
    // (PX − XP)_{ij} = Σ_k P_ik X_kj − X_ik P_kj, linear in the bits
    let mut eqs: Vec<Vec<(usize, i64)>> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let mut coef: BTreeMap<usize, i64> = BTreeMap::new();
            for k in 0..n {
                if let Some(b) = bit_of(k, j) {
                    *coef.entry(b).or_default() += p[(i, k)];
                }
                if let Some(b) = bit_of(i, k) {
                    *coef.entry(b).or_default() -= p[(k, j)];
                }
            }
            let c: Vec<(usize, i64)> = coef.into_iter().filter(|(_, v)| *v != 0).collect();
            if !c.is_empty() {
                eqs.push(c);
            }
        }
    }
    let target: Vec<u8> = pairs.iter().map(|&(i, j)| p[(i, j)] as u8).collect();

    struct Search<'a> {
        eqs: &'a [Vec<(usize, i64)>],
        target: &'a [u8],
        bits: Vec<u8>,
        best: Option<(usize, Vec<u8>)>,
    }
    impl Search<'_> {
        fn consistent(&self, depth: usize) -> bool {
            self.eqs.iter().all(|eq| {
                let (mut sum, mut lo, mut hi) = (0i64, 0i64, 0i64);
                for &(b, c) in eq {
                    if b < depth {
                        sum += c * self.bits[b] as i64;
                    } else if c < 0 {
                        lo += c;
                    } else {
                        hi += c;
                    }
                }
                sum + lo <= 0 && 0 <= sum + hi
            })
        }

        fn go(&mut self, depth: usize, count: usize) {
            let remaining = self.bits.len() - depth;
            if let Some((b, _)) = &self.best {
                if count + remaining <= *b {
                    return;
                }
            }
            if depth == self.bits.len() {
                if self.bits != self.target {
                    self.best = Some((count, self.bits.clone()));
                }
                return;
            }
            for v in [0u8, 1] {
                self.bits[depth] = v;
                if self.consistent(depth + 1) {
                    self.go(depth + 1, count + v as usize);
                }
            }
            self.bits[depth] = 0;
        }
    }

    let mut s = Search { eqs: &eqs, target: &target, bits: vec![0; nb], best: None };
    s.go(0, 0);
    let (_, bits) = s.best.ok_or_else(|| Error::InvalidArgument("no commuting pattern other than P exists".into()))?;
    let mut adj = DMatrix::<i64>::zeros(n, n);
    for (&(i, j), &b) in pairs.iter().zip(&bits) {
        adj[(i, j)] = b as i64;
        adj[(j, i)] = b as i64;
    }
    PatternGraph::new(adj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::paper_sec7;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bisection_examples() {
        let (g, t) = bisect_gamma(|g| Ok(g >= 5.0), 1.0, 16.0, 1e-3).unwrap();
        assert!((g - 5.0).abs() <= 0.005 && g >= 5.0, "{g}");
        assert!(t.monotone && t.probes[0].gamma == 16.0);
        let (g, _) = bisect_gamma(|_| Ok(true), 1.0, 16.0, 1e-3).unwrap();
        assert_eq!(g, 1.0);
        let (_, t) = bisect_gamma(|g| Ok((3.0..=4.0).contains(&g) || g >= 10.0), 1.0, 16.0, 1e-3).unwrap();
        assert!(!t.monotone && !t.warnings.is_empty());
        assert!(matches!(bisect_gamma(|g| Ok(g > 20.0), 1.0, 16.0, 1e-3), Err(Error::InfeasibleAtGammaHi { .. })));
        assert!(bisect_gamma(|_| Ok(true), 2.0, 1.0, 1e-3).is_err());
    }

    #[test]
    fn gain_recovery() {
        let dims = Dimensions::new(3, 2, 0, 1, 1);
        let m = DMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64);
        let k = recover_gains(&m, &DMatrix::identity(3, 3), &dims).unwrap();
        assert_eq!(k.k_d, m.rows(0, 2));
        assert_eq!(k.k_i, m.rows(2, 2));
        let k = recover_gains(&DMatrix::zeros(4, 3), &DMatrix::identity(3, 3), &dims).unwrap();
        assert!(k.k_d.iter().chain(k.k_i.iter()).all(|v| *v == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let kh = DMatrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
            let f = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0)) + DMatrix::identity(3, 3) * 2.0;
            let k = recover_gains(&(&kh * &f), &f, &dims).unwrap();
            assert!((&k.k_d - kh.rows(0, 2)).amax() < 1e-10);
            assert!((&k.k_i - kh.rows(2, 2)).amax() < 1e-10);
        }
        let sing = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1e-14]);
        assert!(matches!(recover_gains(&m, &sing, &dims), Err(Error::SingularF { .. })));
    }

    #[test]
    fn commuting_pattern_examples() {
        let k3 = find_commuting_pattern(&PatternGraph::empty(3)).unwrap();
        assert_eq!(k3.edge_count(), 3);
        let k2 = PatternGraph::ring(2);
        assert_eq!(find_commuting_pattern(&k2).unwrap().edge_count(), 0);
        assert!(find_commuting_pattern(&PatternGraph::empty(9)).is_err());

        let p = paper_sec7().pattern;
        let p1 = find_commuting_pattern(&p).unwrap();
        let (a, b) = (p.to_f64(), p1.to_f64());
        assert!((&a * &b - &b * &a).amax() == 0.0);
        assert_ne!(p1, p);
    }

    #[test]
    fn options_are_checked() {
        let sys = paper_sec7();
        let o = SynthesisOptions { bisect_tol: 1.5, ..Default::default() };
        assert!(synth_decomposed(&sys, &o).is_err());
        let o = SynthesisOptions { gamma_lo: Some(5.0), gamma_hi: Some(1.0), ..Default::default() };
        assert!(synth_decomposed(&sys, &o).is_err());
        let o = SynthesisOptions { structure_mode: StructureMode::Free, ..Default::default() };
        assert!(synth_decomposed(&sys, &o).is_err());
        let big = HomogeneousSystem::zeros(PatternGraph::ring(13), sys.dims);
        assert!(matches!(synth_full_dual(&big, &SynthesisOptions::default()), Err(Error::SizeGuard { .. })));
    }
}
