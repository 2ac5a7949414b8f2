//! Assembly of the analysis and synthesis matrix inequalities.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::expr::LinMat;
use super::problem::{DecisionVar, LmiProblem, Sense, Structure};
use crate::error::{Error, Result};
use crate::model::{expand, ClosedLoopSystem, HomogeneousSystem, SubsystemPlant};
use crate::slalg::kron;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureMode {
    /// Lyapunov and multiplier variables of the form I⊗X^d + P⊗X^i.
    Kron,
    /// Only the I⊗X^d part.
    BlockDiag,
    /// Unstructured full-size variables (full-size problems only).
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultiplierMode {
    /// Multiplier condition at every distinct eigenvalue.
    PerEigenvalue,
    /// R^i = 0, R^d − S^i − S^iᵀ ⪰ εI, condition only at λ_min and λ_max.
    ConvexifiedExtremes,
}

/// How the performance level enters the nominal condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Performance {
    /// Fixed γ.
    Gamma(f64),
    /// ρ = 1/γ² as a decision variable, maximised.
    MaximizeRho,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssemblyOptions {
    pub structure: StructureMode,
    pub multiplier: MultiplierMode,
    pub epsilon: Option<f64>,
    pub scalar_bound: Option<f64>,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            structure: StructureMode::Kron,
            multiplier: MultiplierMode::PerEigenvalue,
            epsilon: None,
            scalar_bound: Some(super::problem::DEFAULT_SCALAR_BOUND),
        }
    }
}

fn check_gamma(perf: Performance) -> Result<()> {
    match perf {
        Performance::Gamma(g) if !(g > 0.0 && g.is_finite()) => {
            Err(Error::InvalidArgument(format!("gamma must be positive and finite, got {g}")))
        }
        _ => Ok(()),
    }
}

fn zeros(r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::zeros(r, c)
}

fn eye(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

/// Horizontal concatenation of constant blocks.
fn row(parts: &[DMatrix<f64>]) -> DMatrix<f64> {
    let r = parts[0].nrows();
    let c = parts.iter().map(|p| p.ncols()).sum();
    let mut out = zeros(r, c);
    let mut j = 0;
    for p in parts {
        assert_eq!(p.nrows(), r);
        out.view_mut((0, j), p.shape()).copy_from(p);
        j += p.ncols();
    }
    out
}

fn selector(offset: usize, width: usize, total: usize) -> DMatrix<f64> {
    let mut e = zeros(width, total);
    e.view_mut((0, offset), (width, width)).fill_with_identity();
    e
}

// ---------------------------------------------------------------------------
// Closed-loop analysis

struct DenseLft {
    a: DMatrix<f64>,
    b1: DMatrix<f64>,
    b2: DMatrix<f64>,
    c1: DMatrix<f64>,
    d11: DMatrix<f64>,
    d12: DMatrix<f64>,
    c2: DMatrix<f64>,
    d21: DMatrix<f64>,
    d22: DMatrix<f64>,
    pi: DMatrix<f64>,
}

fn dense_lft(cl: &ClosedLoopSystem) -> Result<DenseLft> {
    let g = &cl.pattern;
    let ex = |m| expand(m, g);
    let out = DenseLft {
        a: ex(&cl.a_cl)?,
        b1: ex(&cl.b1)?,
        b2: ex(&cl.b2)?,
        c1: ex(&cl.c1)?,
        d11: ex(&cl.d11)?,
        d12: ex(&cl.d12)?,
        c2: ex(&cl.c2)?,
        d21: ex(&cl.d21)?,
        d22: ex(&cl.d22)?,
        pi: cl.interconnection(),
    };
    let nx = out.a.nrows();
    let ok = out.a.is_square()
        && out.b1.nrows() == nx
        && out.b2.nrows() == nx
        && out.c1.ncols() == nx
        && out.c2.ncols() == nx
        && out.d11.shape() == (out.c1.nrows(), out.b1.ncols())
        && out.pi.shape() == (out.b1.ncols(), out.c1.nrows())
        && out.d21.shape() == (out.c2.nrows(), out.b1.ncols())
        && out.d12.shape() == (out.c1.nrows(), out.b2.ncols())
        && out.d22.shape() == (out.c2.nrows(), out.b2.ncols());
    if !ok {
        return Err(Error::Shape("closed-loop blocks are not dimension-consistent".into()));
    }
    Ok(out)
}

/// Adds Q, S, R and the multiplier condition [𝒫; I]ᵀΠ[𝒫; I] ⪰ εI. Returns (Q, S, R).
fn primal_multipliers(p: &mut LmiProblem, d: &DenseLft) -> (LinMat, LinMat, LinMat) {
    let (np, nq) = (d.b1.ncols(), d.c1.nrows());
    let q = p.symmetric("Q", np).expr();
    let s = p.full("S", np, nq).expr();
    let r = p.symmetric("R", nq).expr();
    let mc = q.congruence(&d.pi) + s.lmul(&d.pi.transpose()).he() + &r;
    p.constrain("multiplier", mc, Sense::Psd);
    (q, s, r)
}

/// Performance block for −γ²wᵀw + zᵀz scaled by 1/γ.
fn primal_performance(gamma: f64, ew: &DMatrix<f64>, tz: &DMatrix<f64>) -> LinMat {
    LinMat::constant(ew.transpose() * ew * (-gamma) + tz.transpose() * tz * (1.0 / gamma))
}

/// Full-block S-procedure analysis LMIs for a fixed closed loop.
pub fn assemble_fbsp_analysis(cl: &ClosedLoopSystem, gamma: f64) -> Result<LmiProblem> {
    check_gamma(Performance::Gamma(gamma))?;
    let d = dense_lft(cl)?;
    let (nx, np, nw) = (d.a.nrows(), d.b1.ncols(), d.b2.ncols());
    let m = nx + np + nw;
    let mut p = LmiProblem::new("fbsp-analysis");
    p.epsilon = super::problem::DEFAULT_EPSILON;
    p.scalar_bound = None;
    let x = p.symmetric("X", nx).expr();
    p.constrain("X", x.clone(), Sense::Psd);
    let (q, s, r) = primal_multipliers(&mut p, &d);
    let ex = selector(0, nx, m);
    let ep = selector(nx, np, m);
    let ew = selector(nx + np, nw, m);
    let ta = row(&[d.a.clone(), d.b1.clone(), d.b2.clone()]);
    let tq = row(&[d.c1.clone(), d.d11.clone(), d.d12.clone()]);
    let tz = row(&[d.c2.clone(), d.d21.clone(), d.d22.clone()]);
    let nominal = x.lmul(&ex.transpose()).rmul(&ta).he()
        + q.congruence(&ep)
        + s.lmul(&ep.transpose()).rmul(&tq).he()
        + r.congruence(&tq)
        + primal_performance(gamma, &ew, &tz);
    p.constrain("nominal", nominal, Sense::Nsd);
    Ok(p)
}

/// Extended (slack-variable) primal analysis LMIs for a fixed closed loop.
pub fn assemble_primal_efbsp(cl: &ClosedLoopSystem, gamma: f64) -> Result<LmiProblem> {
    check_gamma(Performance::Gamma(gamma))?;
    let d = dense_lft(cl)?;
    let (nx, np, nw) = (d.a.nrows(), d.b1.ncols(), d.b2.ncols());
    let m = 2 * nx + np + nw;
    let mut p = LmiProblem::new("primal-efbsp");
    p.scalar_bound = None;
    let x = p.symmetric("X", nx).expr();
    let f = p.full("F", nx, nx).expr();
    p.constrain("X", x.clone(), Sense::Psd);
    p.constrain("F", f.he(), Sense::Psd);
    let (q, s, r) = primal_multipliers(&mut p, &d);
    let e1 = selector(0, nx, m);
    let e2 = selector(nx, nx, m);
    let ep = selector(2 * nx, np, m);
    let ew = selector(2 * nx + np, nw, m);
    let z = zeros(nx, nx);
    let ta = row(&[d.a.clone(), z.clone(), d.b1.clone(), d.b2.clone()]);
    let tq = row(&[d.c1.clone(), zeros(d.c1.nrows(), nx), d.d11.clone(), d.d12.clone()]);
    let tz = row(&[d.c2.clone(), zeros(d.c2.nrows(), nx), d.d21.clone(), d.d22.clone()]);
    let (e1t, e2t) = (e1.transpose(), e2.transpose());
    let state = (&x - &f).lmul(&e1t).rmul(&e2).he() + f.lmul(&e1t).rmul(&ta).he() - f.he().congruence(&e2)
        + f.lmul(&e2t).rmul(&ta).he();
    let nominal = state
        + q.congruence(&ep)
        + s.lmul(&ep.transpose()).rmul(&tq).he()
        + r.congruence(&tq)
        + primal_performance(gamma, &ew, &tz);
    p.constrain("nominal", nominal, Sense::Nsd);
    Ok(p)
}

// ---------------------------------------------------------------------------
// Dual synthesis conditions

/// Shared synthesis variables. Declaration order is identical for the full-size and
/// decomposed problems so their scalar vectors are interchangeable.
pub struct SynthesisVars {
    pub y: DecisionVar,
    pub f: DecisionVar,
    pub m: DecisionVar,
    pub q: DecisionVar,
    pub s: DecisionVar,
    pub r: DecisionVar,
    pub rho: Option<DecisionVar>,
}

fn declare_vars(p: &mut LmiProblem, plant: &SubsystemPlant, opts: &AssemblyOptions, perf: Performance) -> SynthesisVars {
    let d = plant.dims;
    let (sym, full) = match opts.structure {
        StructureMode::Kron => (Structure::SymmetricPair, Structure::FullPair),
        _ => (Structure::Symmetric, Structure::Full),
    };
    let r_structure = if opts.multiplier == MultiplierMode::ConvexifiedExtremes { Structure::Symmetric } else { sym };
    SynthesisVars {
        y: p.var("Y", d.n, d.n, sym),
        f: p.full("Ft", d.n, d.n),
        m: p.full("M", 2 * d.n_u, d.n),
        q: p.var("Q", d.n_p, d.n_p, sym),
        s: p.var("S", d.n_p, d.n_q, full),
        r: p.var("R", d.n_q, d.n_q, r_structure),
        rho: matches!(perf, Performance::MaximizeRho).then(|| p.symmetric("rho", 1)),
    }
}

/// Closed-loop data of the synthesis form.
struct DualData {
    a: DMatrix<f64>,
    bu: DMatrix<f64>,
    bw: DMatrix<f64>,
    cz: DMatrix<f64>,
    dzu: DMatrix<f64>,
    b1: DMatrix<f64>,
    d21: DMatrix<f64>,
}

fn dual_data(plant: &SubsystemPlant) -> Result<DualData> {
    let n = plant.dims.n;
    let nu = plant.dims.n_u;
    let bp_u = plant.b_p.columns(n, nu);
    let dzp_u = plant.d_zp.columns(n, nu);
    if bp_u.iter().any(|v| *v != 0.0) || dzp_u.iter().any(|v| *v != 0.0) {
        return Err(Error::UnsupportedInterconnection("B_u^i and D_zu^i must be zero".into()));
    }
    Ok(DualData {
        a: plant.a.clone(),
        bu: plant.b_u.clone(),
        bw: plant.b_w.clone(),
        cz: plant.c_z.clone(),
        dzu: plant.d_zu.clone(),
        b1: row(&[plant.b_p.columns(0, n).clone_owned(), plant.b_u.clone()]),
        d21: row(&[plant.d_zp.columns(0, n).clone_owned(), plant.d_zu.clone()]),
    })
}

/// Affine pieces of the dual nominal condition at subsystem size.
struct DualBlocks {
    /// A F̃ + B_u M1
    ac: LinMat,
    /// [F̃; M2]
    cq: LinMat,
    /// C_z F̃ + D_zu M1
    cz: LinMat,
}

fn dual_blocks(data: &DualData, v: &SynthesisVars) -> DualBlocks {
    let nu = data.bu.ncols();
    let n = data.a.nrows();
    let f = v.f.expr();
    let m = v.m.expr();
    let m1 = m.view((0, 0), (nu, n));
    let m2 = m.view((nu, 0), (nu, n));
    DualBlocks {
        ac: f.lmul(&data.a) + m1.lmul(&data.bu),
        cq: LinMat::vcat(&[f.clone(), m2]),
        cz: f.lmul(&data.cz) + m1.lmul(&data.dzu),
    }
}

struct NominalInputs<'a> {
    ac: &'a LinMat,
    cq: &'a LinMat,
    cz: &'a LinMat,
    f: &'a LinMat,
    y: &'a LinMat,
    q: &'a LinMat,
    s: &'a LinMat,
    r: &'a LinMat,
    b1: &'a DMatrix<f64>,
    d21: &'a DMatrix<f64>,
    bw: &'a DMatrix<f64>,
    rho: Option<&'a LinMat>,
    gamma: f64,
}

/// The dual nominal condition, required ⪰ εI, on columns (c1, c2, c3, c4) of sizes (n, n, n_q, n_z).
fn dual_nominal(k: NominalInputs<'_>) -> LinMat {
    let n = k.f.nrows();
    let nq = k.cq.nrows();
    let nz = k.cz.nrows();
    let m = 2 * n + nq + nz;
    let (o2, o3, o4) = (n, 2 * n, 2 * n + nq);
    // G = −(AF̃+BM1)ᵀE1 − [F̃; M2]ᵀE3 − (CF̃+DM1)ᵀE4
    let g = (-k.ac.transpose()).embed(0, 0, n, m)
        + (-k.cq.transpose()).embed(0, o3, n, m)
        + (-k.cz.transpose()).embed(0, o4, n, m);
    let h = row(&[-k.b1.transpose(), zeros(k.b1.ncols(), n + nq), -k.d21.transpose()]);
    let h7 = row(&[-k.bw.transpose(), zeros(k.bw.ncols(), n + nq + nz)]);
    let e3 = selector(o3, nq, m);
    let e4 = selector(o4, nz, m);

    let mut l = g.embed(0, 0, m, m).he() + g.embed(o2, 0, m, m).he();
    l = l + (k.f.transpose() - k.y).embed(0, o2, m, m).he();
    l = l + k.f.he().embed(o2, o2, m, m);
    l = l + k.q.congruence(&h) + k.s.lmul(&h.transpose()).rmul(&e3).he() + k.r.congruence(&e3);
    let zz = e4.transpose() * &e4;
    let ww = h7.transpose() * &h7;
    match k.rho {
        Some(rho) => {
            l = l + LinMat::constant(zz);
            let mut t = LinMat::zeros(m, m);
            for (idx, c) in &rho.terms {
                t.terms.insert(*idx, &ww * (-c[(0, 0)]));
            }
            l + t
        }
        // balanced: γ·(zᵀz − γ⁻²wᵀw) with the homogeneous part absorbing the factor
        None => l + LinMat::constant(zz * k.gamma - ww * (1.0 / k.gamma)),
    }
}

fn epsilon_for(plant: &SubsystemPlant, opts: &AssemblyOptions) -> f64 {
    opts.epsilon.unwrap_or(super::problem::DEFAULT_EPSILON * plant.data_scale())
}

fn add_side_constraints(p: &mut LmiProblem, v: &SynthesisVars, opts: &AssemblyOptions) {
    p.constrain("Ft", v.f.expr().he(), Sense::Psd);
    if opts.multiplier == MultiplierMode::ConvexifiedExtremes {
        let si = if v.s.structure.is_pair() { v.s.part(1) } else { LinMat::zeros(v.s.rows, v.s.cols) };
        p.constrain("convexity", v.r.part(0) - si.he(), Sense::Psd);
    }
    if let Some(rho) = &v.rho {
        p.constrain("rho", rho.expr(), Sense::Psd);
        p.minimize(&(-rho.expr()));
    }
}

/// Q_λ − λ(S_λ + S_λᵀ) + λ²R_λ.
pub fn multiplier_polynomial(v: &SynthesisVars, lambda: f64) -> LinMat {
    v.q.at(lambda) - v.s.at(lambda).he() * lambda + v.r.at(lambda) * (lambda * lambda)
}

fn multiplier_lambdas(lambdas: &[f64], mode: MultiplierMode) -> Vec<f64> {
    match mode {
        MultiplierMode::PerEigenvalue => lambdas.to_vec(),
        MultiplierMode::ConvexifiedExtremes => {
            let lo = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi { vec![lo] } else { vec![lo, hi] }
        }
    }
}

/// Decomposed dual conditions over the given eigenvalues with shared variables.
pub fn assemble_decomposed(
    plant: &SubsystemPlant,
    lambdas: &[f64],
    perf: Performance,
    opts: &AssemblyOptions,
) -> Result<(LmiProblem, SynthesisVars)> {
    check_gamma(perf)?;
    if opts.structure == StructureMode::Free {
        return Err(Error::InvalidArgument("free variables need the full-size problem".into()));
    }
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("no eigenvalues".into()));
    }
    let data = dual_data(plant)?;
    let mut p = LmiProblem::new("decomposed-efbsp");
    p.epsilon = epsilon_for(plant, opts);
    p.scalar_bound = opts.scalar_bound;
    let v = declare_vars(&mut p, plant, opts, perf);
    let blocks = dual_blocks(&data, &v);
    let f = v.f.expr();
    let rho = v.rho.as_ref().map(|r| r.expr());
    let gamma = if let Performance::Gamma(g) = perf { g } else { 1.0 };
    for &lambda in lambdas {
        let nominal = dual_nominal(NominalInputs {
            ac: &blocks.ac,
            cq: &blocks.cq,
            cz: &blocks.cz,
            f: &f,
            y: &v.y.at(lambda),
            q: &v.q.at(lambda),
            s: &v.s.at(lambda),
            r: &v.r.at(lambda),
            b1: &data.b1,
            d21: &data.d21,
            bw: &data.bw,
            rho: rho.as_ref(),
            gamma,
        });
        p.constrain_at(format!("nominal@{lambda:.12}"), nominal, Sense::Psd, Some(lambda));
        p.constrain_at(format!("Y@{lambda:.12}"), v.y.at(lambda), Sense::Psd, Some(lambda));
    }
    for lambda in multiplier_lambdas(lambdas, opts.multiplier) {
        p.constrain_at(format!("multiplier@{lambda:.12}"), multiplier_polynomial(&v, lambda), Sense::Nsd, Some(lambda));
    }
    add_side_constraints(&mut p, &v, opts);
    Ok((p, v))
}

/// Single-eigenvalue decomposed problem.
pub fn assemble_decomposed_efbsp(plant: &SubsystemPlant, lambda: f64, gamma: f64, opts: &AssemblyOptions) -> Result<LmiProblem> {
    assemble_decomposed(plant, &[lambda], Performance::Gamma(gamma), opts).map(|(p, _)| p)
}

/// Full-size dual conditions on the whole network.
pub fn assemble_dual_efbsp(sys: &HomogeneousSystem, perf: Performance, opts: &AssemblyOptions) -> Result<(LmiProblem, SynthesisVars)> {
    check_gamma(perf)?;
    sys.ensure_supported()?;
    let plant = crate::model::subsystem_plant(sys);
    let data = dual_data(&plant)?;
    let n_sub = sys.n_subsystems();
    let pat = sys.pattern.to_f64();
    let id = eye(n_sub);
    let mut p = LmiProblem::new("dual-efbsp");
    p.epsilon = epsilon_for(&plant, opts);
    p.scalar_bound = opts.scalar_bound;
    let (free_y, free_q, free_s, free_r);
    let v;
    if opts.structure == StructureMode::Free {
        // keep the structured declarations first so Ft and M sit at the same offsets
        let mut o = *opts;
        o.structure = StructureMode::BlockDiag;
        v = declare_vars(&mut p, &plant, &o, perf);
        let d = plant.dims;
        free_y = Some(p.symmetric("Y_full", n_sub * d.n).expr());
        free_q = Some(p.symmetric("Q_full", n_sub * d.n_p).expr());
        free_s = Some(p.full("S_full", n_sub * d.n_p, n_sub * d.n_q).expr());
        free_r = Some(p.symmetric("R_full", n_sub * d.n_q).expr());
    } else {
        v = declare_vars(&mut p, &plant, opts, perf);
        free_y = None;
        free_q = None;
        free_s = None;
        free_r = None;
    }
    let blocks = dual_blocks(&data, &v);
    let big = |x: &LinMat| x.kron_left(&id);
    let kc = |x: &DMatrix<f64>| kron(&id, x);
    let y = free_y.unwrap_or_else(|| v.y.expanded(&pat));
    let q = free_q.unwrap_or_else(|| v.q.expanded(&pat));
    let s = free_s.unwrap_or_else(|| v.s.expanded(&pat));
    let r = free_r.unwrap_or_else(|| v.r.expanded(&pat));
    let rho = v.rho.as_ref().map(|r| r.expr());
    let gamma = if let Performance::Gamma(g) = perf { g } else { 1.0 };
    let nominal = dual_nominal(NominalInputs {
        ac: &big(&blocks.ac),
        cq: &big(&blocks.cq),
        cz: &big(&blocks.cz),
        f: &big(&v.f.expr()),
        y: &y,
        q: &q,
        s: &s,
        r: &r,
        b1: &kc(&data.b1),
        d21: &kc(&data.d21),
        bw: &kc(&data.bw),
        rho: rho.as_ref(),
        gamma,
    });
    p.constrain("nominal", nominal, Sense::Psd);
    p.constrain("Y", y, Sense::Psd);
    let pi = kron(&pat, &eye(plant.dims.n_q));
    let mc = &q - &s.rmul(&pi).he() + r.congruence(&pi);
    p.constrain("multiplier", mc, Sense::Nsd);
    add_side_constraints(&mut p, &v, opts);
    Ok((p, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::paper_sec7;
    use crate::model::{close_loop, subsystem_plant, ControllerGains, Dimensions, PatternGraph};
    use crate::slalg::sym_eig;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_x(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn paper_decomposed_block_sizes() {
        let sys = paper_sec7();
        let plant = subsystem_plant(&sys);
        let p = assemble_decomposed_efbsp(&plant, 0.0, 10.0, &AssemblyOptions::default()).unwrap();
        let sizes: Vec<usize> = p.constraints.iter().map(|c| c.expr.nrows()).collect();
        assert_eq!(sizes, vec![12, 3, 4, 3]);
        let e = sym_eig(&sys.pattern, None).unwrap();
        let (p, _) = assemble_decomposed(&plant, &e.distinct_values(), Performance::Gamma(9.3), &AssemblyOptions::default()).unwrap();
        assert_eq!(p.constraints.iter().filter(|c| c.name.starts_with("nominal")).count(), 3);
    }

    #[test]
    fn zero_eigenvalue_multiplier_is_q_d() {
        let plant = subsystem_plant(&paper_sec7());
        let mut p = LmiProblem::new("t");
        let v = declare_vars(&mut p, &plant, &AssemblyOptions::default(), Performance::Gamma(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = rand_x(&mut rng, p.n_scalars);
        assert_eq!(multiplier_polynomial(&v, 0.0).eval(&x), v.q.part(0).eval(&x));
    }

    #[test]
    fn assembled_expressions_are_symmetric() {
        let sys = paper_sec7();
        let plant = subsystem_plant(&sys);
        let (p, _) = assemble_decomposed(&plant, &[-2.0, 0.0, 1.5], Performance::Gamma(3.0), &AssemblyOptions::default()).unwrap();
        let (pf, _) = assemble_dual_efbsp(&sys, Performance::Gamma(3.0), &AssemblyOptions::default()).unwrap();
        let cl = close_loop(&sys, &ControllerGains::zeros(&sys.dims)).unwrap();
        let pa = assemble_fbsp_analysis(&cl, 2.0).unwrap();
        let pe = assemble_primal_efbsp(&cl, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for prob in [&p, &pf, &pa, &pe] {
            for _ in 0..50 {
                let x = rand_x(&mut rng, prob.n_scalars);
                for c in &prob.constraints {
                    let v = c.expr.eval(&x);
                    assert!((&v - v.transpose()).amax() <= 1e-12, "{} in {}", c.name, prob.name);
                }
            }
        }
    }

    #[test]
    fn rejects_nonpositive_gamma() {
        let plant = subsystem_plant(&paper_sec7());
        assert!(assemble_decomposed_efbsp(&plant, 0.0, 0.0, &AssemblyOptions::default()).is_err());
        assert!(assemble_decomposed_efbsp(&plant, 0.0, -1.0, &AssemblyOptions::default()).is_err());
    }

    #[test]
    fn full_and_decomposed_share_layout() {
        let mut sys = HomogeneousSystem::zeros(PatternGraph::ring(4), Dimensions::new(2, 1, 0, 1, 1));
        sys.a.d = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        sys.a.i = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.2]);
        sys.b_u.d = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        sys.b_w.d = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        sys.c_z.d = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        sys.c_z.i = DMatrix::from_row_slice(1, 2, &[0.0, 0.5]);
        let plant = subsystem_plant(&sys);
        let e = sym_eig(&sys.pattern, None).unwrap();
        let opts = AssemblyOptions::default();
        let (pd, _) = assemble_decomposed(&plant, &e.distinct_values(), Performance::Gamma(2.0), &opts).unwrap();
        let (pf, _) = assemble_dual_efbsp(&sys, Performance::Gamma(2.0), &opts).unwrap();
        assert_eq!(pd.n_scalars, pf.n_scalars);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = rand_x(&mut rng, pd.n_scalars);
            for prefix in ["nominal", "Y", "multiplier"] {
                let full = pf.constraints.iter().find(|c| c.name == prefix).unwrap().margin(&x);
                let dec = pd
                    .constraints
                    .iter()
                    .filter(|c| c.name.split('@').next() == Some(prefix))
                    .map(|c| c.margin(&x))
                    .fold(f64::INFINITY, f64::min);
                assert!((full - dec).abs() < 1e-9, "{prefix}: {full} vs {dec}");
            }
        }
    }
}
