//! H∞ norm, stability and certificate checks on dense closed loops.

use nalgebra::{Complex, DMatrix, Hessenberg, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{self, FallbackBackend};
use crate::model::{close_loop, expand, ClosedLoopSystem, ControllerGains, HomogeneousSystem};

type C64 = Complex<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || c.ncols() != n || d.shape() != (c.nrows(), b.ncols()) {
            return Err(Error::Shape(format!(
                "state space A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// Largest singular value of C(iωI − A)⁻¹B + D.
    pub fn gain_at(&self, omega: f64) -> f64 {
        let n = self.a.nrows();
        let m = DMatrix::<C64>::from_fn(n, n, |i, j| {
            let re = -self.a[(i, j)];
            C64::new(re, if i == j { omega } else { 0.0 })
        });
        let b = self.b.map(|v| C64::new(v, 0.0));
        let x = match m.lu().solve(&b) {
            Some(x) => x,
            None => return f64::INFINITY,
        };
        let g = self.c.map(|v| C64::new(v, 0.0)) * x + self.d.map(|v| C64::new(v, 0.0));
        sigma_max(&g)
    }
}

/// σ_max through the eigenvalues of the smaller Gram matrix.
fn sigma_max(g: &DMatrix<C64>) -> f64 {
    if g.is_empty() {
        return 0.0;
    }
    let gram = if g.nrows() >= g.ncols() { g.adjoint() * g } else { g * g.adjoint() };
    if gram.nrows() == 1 {
        return gram[(0, 0)].re.max(0.0).sqrt();
    }
    let top = nalgebra::SymmetricEigen::new(gram).eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    top.max(0.0).sqrt()
}

fn sigma_max_real(g: &DMatrix<f64>) -> f64 {
    if g.is_empty() {
        return 0.0;
    }
    g.singular_values().iter().fold(0.0f64, |m, v| m.max(*v))
}

/// Frequency response evaluator in Hessenberg coordinates, O(n²) per frequency.
struct HessEval {
    h: DMatrix<f64>,
    bq: DMatrix<f64>,
    cq: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl HessEval {
    fn new(ss: &StateSpace) -> Self {
        let hess = Hessenberg::new(ss.a.clone());
        let q = hess.q();
        let h = hess.h();
        Self { bq: q.transpose() * &ss.b, cq: &ss.c * &q, h, d: ss.d.clone() }
    }

    fn gain(&self, omega: f64) -> f64 {
        let n = self.h.nrows();
        let nb = self.bq.ncols();
        let mut m = DMatrix::<C64>::from_fn(n, n, |i, j| C64::new(-self.h[(i, j)], if i == j { omega } else { 0.0 }));
        let mut x = self.bq.map(|v| C64::new(v, 0.0));
        for k in 0..n.saturating_sub(1) {
            if m[(k + 1, k)].norm() > m[(k, k)].norm() {
                m.swap_rows(k, k + 1);
                x.swap_rows(k, k + 1);
            }
            let piv = m[(k, k)];
            if piv.norm() == 0.0 {
                continue;
            }
            let l = m[(k + 1, k)] / piv;
            if l.norm() != 0.0 {
                for j in k..n {
                    let v = m[(k, j)];
                    m[(k + 1, j)] -= l * v;
                }
                for j in 0..nb {
                    let v = x[(k, j)];
                    x[(k + 1, j)] -= l * v;
                }
            }
        }
        for k in (0..n).rev() {
            let piv = m[(k, k)];
            if piv.norm() == 0.0 {
                return f64::INFINITY;
            }
            for j in 0..nb {
                let mut s = x[(k, j)];
                for i in k + 1..n {
                    s -= m[(k, i)] * x[(i, j)];
                }
                x[(k, j)] = s / piv;
            }
        }
        let g = self.cq.map(|v| C64::new(v, 0.0)) * x + self.d.map(|v| C64::new(v, 0.0));
        sigma_max(&g)
    }
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<C64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Solver("Schur decomposition did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// max Re λ(A).
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Shape(format!("spectral abscissa of {:?}", a.shape())));
    }
    Ok(eigenvalues(a)?.iter().fold(f64::NEG_INFINITY, |m, l| m.max(l.re)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HinfMethod {
    HamiltonianBisection,
    FrequencySweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HinfReport {
    /// Upper end of the certified bracket (∞ if unstable).
    pub norm: f64,
    pub lower_bound: f64,
    pub method: HinfMethod,
    pub peak_frequency: f64,
    pub stable: bool,
    /// Frequency-sweep value, set by `hinf_sweep` only.
    pub sweep_norm: Option<f64>,
}

fn is_zero(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| *v == 0.0)
}

fn sweep_grid(poles: &[C64]) -> Vec<f64> {
    let radius = poles.iter().fold(0.0f64, |m, l| m.max(l.norm()));
    let scale = radius.max(1.0);
    let (lo, hi) = ((1e-4 * scale).log10(), (1e4 * scale).log10());
    let pts = 1000;
    let mut w: Vec<f64> = (0..pts).map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (pts - 1) as f64)).collect();
    w.push(0.0);
    w.extend(poles.iter().map(|l| l.im.abs()).filter(|v| *v > 0.0));
    w.sort_by(f64::total_cmp);
    w.dedup();
    w
}

/// Logarithmic sweep with golden-section refinement at the peak.
pub fn hinf_sweep(ss: &StateSpace) -> Result<HinfReport> {
    let poles = eigenvalues(&ss.a)?;
    let stable = poles.iter().all(|l| l.re < 0.0);
    if !stable {
        return Ok(HinfReport {
            norm: f64::INFINITY,
            lower_bound: f64::INFINITY,
            method: HinfMethod::FrequencySweep,
            peak_frequency: f64::NAN,
            stable,
            sweep_norm: None,
        });
    }
    let (norm, w) = sweep_peak(ss, &poles);
    Ok(HinfReport { norm, lower_bound: norm, method: HinfMethod::FrequencySweep, peak_frequency: w, stable, sweep_norm: Some(norm) })
}

fn sweep_peak(ss: &StateSpace, poles: &[C64]) -> (f64, f64) {
    let d_gain = sigma_max_real(&ss.d);
    if ss.a.nrows() == 0 || is_zero(&ss.b) || is_zero(&ss.c) {
        return (d_gain, 0.0);
    }
    let ev = HessEval::new(ss);
    let grid = sweep_grid(poles);
    let vals: Vec<f64> = grid.iter().map(|&w| ev.gain(w)).collect();
    let (k, &best) = vals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let (mut peak, mut w_peak) = (best, grid[k]);
    // golden section on [grid[k-1], grid[k+1]]
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (ev.gain(c), ev.gain(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = ev.gain(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = ev.gain(d);
        }
        if (b - a) <= 1e-12 * b.max(1e-300) {
            break;
        }
    }
    for (w, f) in [(c, fc), (d, fd)] {
        if f > peak {
            peak = f;
            w_peak = w;
        }
    }
    if d_gain > peak {
        return (d_gain, f64::INFINITY);
    }
    (peak, w_peak)
}

/// Frequencies where γ is a singular value of G(iω), from the Hamiltonian spectrum.
///
/// Near-axis eigenvalues are only candidates; a real crossing needs σ_max(G(iω)) ≥ γ.
fn crossing_frequencies(ss: &StateSpace, ev: &HessEval, gamma: f64) -> Result<Vec<f64>> {
    let n = ss.a.nrows();
    let (p, m) = (ss.c.nrows(), ss.b.ncols());
    // test G/γ at level one so tiny or huge γ does not swamp the axis tolerance
    let s = gamma.sqrt().recip();
    let (b, c, d) = (&ss.b * s, &ss.c * s, &ss.d / gamma);
    let dt = d.transpose();
    let r = DMatrix::<f64>::identity(m, m) - &dt * &d;
    let r_inv = r.try_inverse().ok_or_else(|| Error::Solver("singular Hamiltonian weight".into()))?;
    let ah = &ss.a + &b * &r_inv * &dt * &c;
    let g = &b * &r_inv * b.transpose();
    let q = -(c.transpose() * (DMatrix::<f64>::identity(p, p) + &d * &r_inv * &dt) * &c);
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&ah);
    h.view_mut((0, n), (n, n)).copy_from(&g);
    h.view_mut((n, 0), (n, n)).copy_from(&q);
    h.view_mut((n, n), (n, n)).copy_from(&(-ah.transpose()));
    let tol = 1e-8 * h.norm().max(1e-300);
    let mut w: Vec<f64> = eigenvalues(&h)?
        .iter()
        .filter(|l| l.re.abs() <= tol)
        .map(|l| l.im.abs())
        .filter(|&f| ev.gain(f) >= gamma * (1.0 - 1e-6))
        .collect();
    w.sort_by(f64::total_cmp);
    w.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    Ok(w)
}

/// H∞ norm by the Hamiltonian imaginary-axis test, raising the lower bound at the
/// crossing frequencies and bisecting if that stalls.
pub fn hinf_norm(ss: &StateSpace, tol: f64) -> Result<HinfReport> {
    if !ss.a.is_square() {
        return Err(Error::Shape("A must be square".into()));
    }
    let tol = tol.clamp(1e-12, 0.5);
    let poles = eigenvalues(&ss.a)?;
    let stable = poles.iter().all(|l| l.re < 0.0);
    if !stable {
        return Ok(HinfReport {
            norm: f64::INFINITY,
            lower_bound: f64::INFINITY,
            method: HinfMethod::HamiltonianBisection,
            peak_frequency: f64::NAN,
            stable,
            sweep_norm: None,
        });
    }
    let d_gain = sigma_max_real(&ss.d);
    if ss.a.nrows() == 0 || is_zero(&ss.b) || is_zero(&ss.c) {
        return Ok(HinfReport {
            norm: d_gain,
            lower_bound: d_gain,
            method: HinfMethod::HamiltonianBisection,
            peak_frequency: if d_gain > 0.0 { f64::INFINITY } else { 0.0 },
            stable,
            sweep_norm: None,
        });
    }

    let mut lb = d_gain;
    let mut w_peak = f64::INFINITY;
    let ev = HessEval::new(ss);
    let probe = |w: f64, lb: &mut f64, w_peak: &mut f64| {
        let g = ev.gain(w);
        if g > *lb {
            *lb = g;
            *w_peak = w;
        }
    };
    probe(0.0, &mut lb, &mut w_peak);
    // the most lightly damped pole
    if let Some(l) = poles.iter().max_by(|a, b| (a.im.abs() / -a.re).total_cmp(&(b.im.abs() / -b.re))) {
        probe(l.im.abs(), &mut lb, &mut w_peak);
        probe(l.norm(), &mut lb, &mut w_peak);
    }
    if lb == 0.0 {
        lb = f64::MIN_POSITIVE;
    }

    let mut ub = f64::INFINITY;
    for _ in 0..60 {
        let gamma = lb * (1.0 + 2.0 * tol);
        let w = crossing_frequencies(ss, &ev, gamma)?;
        if w.is_empty() {
            ub = gamma;
            break;
        }
        let before = lb;
        let mut mids: Vec<f64> = w.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        mids.extend(w.iter().copied());
        for m in mids {
            probe(m, &mut lb, &mut w_peak);
        }
        if lb <= before * (1.0 + tol) {
            break;
        }
    }
    if !ub.is_finite() {
        // bracket then bisect on the imaginary-axis test
        let mut hi = lb.max(f64::MIN_POSITIVE) * 2.0;
        while !crossing_frequencies(ss, &ev, hi)?.is_empty() {
            lb = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Solver("H-infinity bracket diverged".into()));
            }
        }
        let mut lo = lb;
        while hi / lo - 1.0 > tol {
            let mid = (lo * hi).sqrt();
            let w = crossing_frequencies(ss, &ev, mid)?;
            if w.is_empty() {
                hi = mid;
            } else {
                lo = mid;
                for &f in &w {
                    let g = ev.gain(f);
                    if g > lb {
                        lb = g;
                        w_peak = f;
                    }
                }
            }
        }
        lb = lb.max(lo);
        ub = hi;
    }
    Ok(HinfReport {
        norm: ub,
        lower_bound: lb,
        method: HinfMethod::HamiltonianBisection,
        peak_frequency: w_peak,
        stable,
        sweep_norm: None,
    })
}

/// (Aᵀ, Cᵀ, Bᵀ, Dᵀ).
pub fn dualize(ss: &StateSpace) -> StateSpace {
    StateSpace { a: ss.a.transpose(), b: ss.c.transpose(), c: ss.b.transpose(), d: ss.d.transpose() }
}

/// I − 𝒟₁₁𝒫 invertible.
pub fn check_wellposed(cl: &ClosedLoopSystem) -> bool {
    let Ok(d11) = expand(&cl.d11, &cl.pattern) else { return false };
    let pi = cl.interconnection();
    if d11.ncols() != pi.nrows() || d11.nrows() != pi.ncols() {
        return false;
    }
    let n = d11.nrows();
    let m = DMatrix::<f64>::identity(n, n) - d11 * pi;
    let sv = m.singular_values();
    let smin = sv.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    let smax = sv.iter().fold(0.0f64, |a, v| a.max(*v));
    smin > 1e-12 * smax.max(1.0)
}

/// Dense closed loop of the network under u = (I⊗K^d + P⊗K^i)x.
pub fn dense_closed_loop(sys: &HomogeneousSystem, k: &ControllerGains) -> Result<StateSpace> {
    let g = &sys.pattern;
    let kk = k.expand(g)?;
    let bu = expand(&sys.b_u, g)?;
    let dzu = expand(&sys.d_zu, g)?;
    if kk.shape() != (bu.ncols(), bu.nrows()) {
        return Err(Error::Shape(format!("gains {:?} for input matrix {:?}", kk.shape(), bu.shape())));
    }
    StateSpace::new(
        expand(&sys.a, g)? + &bu * &kk,
        expand(&sys.b_w, g)?,
        expand(&sys.c_z, g)? + &dzu * &kk,
        expand(&sys.d_zw, g)?,
    )
}

/// State-space realisation of a closed-loop LFT with p = 𝒫q.
pub fn lft_state_space(cl: &ClosedLoopSystem) -> Result<StateSpace> {
    let g = &cl.pattern;
    let ex = |m| expand(m, g);
    let pi = cl.interconnection();
    let d11 = ex(&cl.d11)?;
    let n = d11.nrows();
    let inv = (DMatrix::<f64>::identity(n, n) - &d11 * &pi)
        .try_inverse()
        .ok_or_else(|| Error::Solver("closed loop is not well-posed".into()))?;
    let b1pi = ex(&cl.b1)? * &pi * &inv;
    let d21pi = ex(&cl.d21)? * &pi * &inv;
    let (c1, d12) = (ex(&cl.c1)?, ex(&cl.d12)?);
    StateSpace::new(
        ex(&cl.a_cl)? + &b1pi * &c1,
        ex(&cl.b2)? + &b1pi * &d12,
        ex(&cl.c2)? + &d21pi * &c1,
        ex(&cl.d22)? + &d21pi * &d12,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LmiCheck {
    Feasible { margin: f64 },
    Infeasible { margin: f64 },
    Skipped { reason: String },
    Error { message: String },
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Attempt the analysis LMIs when N·n is at most this.
    pub lmi_state_limit: usize,
    pub hinf_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { lmi_state_limit: 12, hinf_tol: 1e-7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub gamma: f64,
    pub stable: bool,
    pub spectral_abscissa: f64,
    pub hinf: Option<HinfReport>,
    pub wellposed: bool,
    pub fbsp: LmiCheck,
    pub primal_efbsp: LmiCheck,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Relative slack allowed between the verified norm and γ.
pub const GAMMA_REL_TOL: f64 = 1e-6;

pub fn verify_certificate(sys: &HomogeneousSystem, k: &ControllerGains, gamma: f64) -> CertificateReport {
    verify_certificate_with(sys, k, gamma, &VerifyOptions::default())
}

pub fn verify_certificate_with(sys: &HomogeneousSystem, k: &ControllerGains, gamma: f64, opts: &VerifyOptions) -> CertificateReport {
    let mut failures = Vec::new();
    let mut report = CertificateReport {
        gamma,
        stable: false,
        spectral_abscissa: f64::NAN,
        hinf: None,
        wellposed: false,
        fbsp: LmiCheck::Skipped { reason: "not attempted".into() },
        primal_efbsp: LmiCheck::Skipped { reason: "not attempted".into() },
        passed: false,
        failures: Vec::new(),
    };
    let ss = match dense_closed_loop(sys, k) {
        Ok(ss) => ss,
        Err(e) => {
            report.failures.push(e.to_string());
            return report;
        }
    };
    match spectral_abscissa(&ss.a) {
        Ok(a) => {
            report.spectral_abscissa = a;
            report.stable = a < 0.0;
        }
        Err(e) => failures.push(e.to_string()),
    }
    if !report.stable {
        failures.push(format!("unstable closed loop (spectral abscissa {})", report.spectral_abscissa));
    } else {
        match hinf_norm(&ss, opts.hinf_tol) {
            Ok(h) => {
                if h.norm > gamma * (1.0 + GAMMA_REL_TOL) {
                    failures.push(format!("H-infinity norm {} exceeds gamma {}", h.norm, gamma));
                }
                report.hinf = Some(h);
            }
            Err(e) => failures.push(e.to_string()),
        }
    }
    match close_loop(sys, k) {
        Ok(cl) => {
            report.wellposed = check_wellposed(&cl);
            if !report.wellposed {
                failures.push("closed loop is not well-posed".into());
            }
            let size = sys.n_subsystems() * sys.dims.n;
            if !(gamma > 0.0 && gamma.is_finite()) {
                let reason = "gamma is not positive and finite".to_string();
                report.fbsp = LmiCheck::Skipped { reason: reason.clone() };
                report.primal_efbsp = LmiCheck::Skipped { reason };
            } else if size > opts.lmi_state_limit {
                let reason = format!("network state dimension {size} above limit {}", opts.lmi_state_limit);
                report.fbsp = LmiCheck::Skipped { reason: reason.clone() };
                report.primal_efbsp = LmiCheck::Skipped { reason };
            } else {
                report.fbsp = run_check(lmi::assemble_fbsp_analysis(&cl, gamma));
                report.primal_efbsp = run_check(lmi::assemble_primal_efbsp(&cl, gamma));
            }
        }
        Err(e) => {
            report.wellposed = true;
            let reason = e.to_string();
            report.fbsp = LmiCheck::Skipped { reason: reason.clone() };
            report.primal_efbsp = LmiCheck::Skipped { reason };
        }
    }
    report.passed = failures.is_empty();
    report.failures = failures;
    report
}

fn run_check(p: Result<lmi::LmiProblem>) -> LmiCheck {
    match p {
        Err(e) => LmiCheck::Error { message: e.to_string() },
        Ok(p) => {
            let out = lmi::solve(&p, &FallbackBackend::default());
            match out.status {
                lmi::SolveStatus::Feasible => LmiCheck::Feasible { margin: out.min_margin },
                lmi::SolveStatus::Infeasible | lmi::SolveStatus::Inaccurate => LmiCheck::Infeasible { margin: out.min_margin },
                lmi::SolveStatus::Failed => LmiCheck::Error { message: out.backend_status },
            }
        }
    }
}
