//! Primal-dual interior-point method for block-diagonal SDPs (HKM direction,
//! Mehrotra predictor-corrector, Schur complement of the size of the variable vector).
//!
//! Dual form:   max bᵀy  s.t.  Z = C − Σ yᵢAᵢ ⪰ 0
//! Primal form: min ⟨C, X⟩ s.t. ⟨Aᵢ, X⟩ = bᵢ, X ⪰ 0
//! with C = F₀, Aᵢ = −Fᵢ and b = −c for a [`ConicProgram`].

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::solve::{Backend, BackendSolution, BackendStatus, ConicProgram};

#[derive(Clone, Debug)]
pub struct InteriorPointBackend {
    pub max_iter: u32,
    /// Relative gap and infeasibility tolerance.
    pub tol: f64,
    /// Fraction of the step to the boundary.
    pub step_fraction: f64,
}

impl Default for InteriorPointBackend {
    fn default() -> Self {
        Self { max_iter: 150, tol: 1e-10, step_fraction: 0.95 }
    }
}

/// Sparse symmetric coefficient, both triangles stored.
#[derive(Clone, Debug, Default)]
struct SparseSym {
    entries: Vec<(usize, usize, f64)>,
    /// Columns holding a nonzero.
    cols: Vec<usize>,
}

impl SparseSym {
    fn from_dense(m: &DMatrix<f64>, sign: f64) -> Self {
        let mut entries = Vec::new();
        let mut cols = Vec::new();
        for j in 0..m.ncols() {
            let mut any = false;
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != 0.0 {
                    entries.push((i, j, sign * v));
                    any = true;
                }
            }
            if any {
                cols.push(j);
            }
        }
        Self { entries, cols }
    }

    fn dot(&self, m: &DMatrix<f64>) -> f64 {
        self.entries.iter().map(|&(i, j, v)| v * m[(i, j)]).sum()
    }

    fn axpy_into(&self, alpha: f64, out: &mut DMatrix<f64>) {
        for &(i, j, v) in &self.entries {
            out[(i, j)] += alpha * v;
        }
    }

    fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt()
    }
}

struct SdpBlock {
    c: DMatrix<f64>,
    /// (variable, Aᵢ restricted to this block)
    a: Vec<(usize, SparseSym)>,
}

/// All 1×1 blocks as a diagonal block.
struct LpBlock {
    c: DVector<f64>,
    /// Per variable: (row, value).
    a: Vec<Vec<(usize, f64)>>,
}

struct Data {
    m: usize,
    /// LP coefficients grouped by row: (row, [(variable, value)]).
    lp_rows: Vec<(usize, Vec<(usize, f64)>)>,
    b: DVector<f64>,
    sdp: Vec<SdpBlock>,
    lp: LpBlock,
}

impl Data {
    fn new(prog: &ConicProgram) -> Self {
        let m = prog.n_vars;
        let b = DVector::from_iterator(m, (0..m).map(|k| -prog.objective.get(k).copied().unwrap_or(0.0)));
        let mut sdp = Vec::new();
        let mut lp = LpBlock { c: DVector::zeros(0), a: vec![Vec::new(); m] };
        let mut lp_c = Vec::new();
        for blk in &prog.blocks {
            if blk.constant.nrows() == 1 {
                let row = lp_c.len();
                lp_c.push(blk.constant[(0, 0)]);
                for (k, f) in &blk.coeffs {
                    if f[(0, 0)] != 0.0 {
                        lp.a[*k].push((row, -f[(0, 0)]));
                    }
                }
            } else {
                let mut a: Vec<(usize, SparseSym)> = Vec::new();
                for (k, f) in &blk.coeffs {
                    let s = SparseSym::from_dense(f, -1.0);
                    if s.entries.is_empty() {
                        continue;
                    }
                    match a.iter_mut().find(|(kk, _)| kk == k) {
                        Some((_, prev)) => {
                            let mut d = DMatrix::zeros(f.nrows(), f.ncols());
                            prev.axpy_into(1.0, &mut d);
                            s.axpy_into(1.0, &mut d);
                            *prev = SparseSym::from_dense(&d, 1.0);
                        }
                        None => a.push((*k, s)),
                    }
                }
                sdp.push(SdpBlock { c: blk.constant.clone(), a });
            }
        }
        lp.c = DVector::from_vec(lp_c);
        let mut lp_rows: Vec<(usize, Vec<(usize, f64)>)> = (0..lp.c.len()).map(|r| (r, Vec::new())).collect();
        for (k, col) in lp.a.iter().enumerate() {
            for &(r, v) in col {
                lp_rows[r].1.push((k, v));
            }
        }
        Self { m, lp_rows, b, sdp, lp }
    }

    fn n_total(&self) -> usize {
        self.sdp.iter().map(|b| b.c.nrows()).sum::<usize>() + self.lp.c.len()
    }

    /// 𝒜(X)ᵢ = ⟨Aᵢ, X⟩.
    fn a_op(&self, xs: &[DMatrix<f64>], xl: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (blk, x) in self.sdp.iter().zip(xs) {
            for (k, a) in &blk.a {
                out[*k] += a.dot(x);
            }
        }
        for (k, col) in self.lp.a.iter().enumerate() {
            out[k] += col.iter().map(|&(r, v)| v * xl[r]).sum::<f64>();
        }
        out
    }

    /// 𝒜*(y) = Σ yᵢAᵢ.
    fn a_adj(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>) {
        let mats = self
            .sdp
            .iter()
            .map(|blk| {
                let d = blk.c.nrows();
                let mut out = DMatrix::zeros(d, d);
                for (k, a) in &blk.a {
                    if y[*k] != 0.0 {
                        a.axpy_into(y[*k], &mut out);
                    }
                }
                out
            })
            .collect();
        let mut lp = DVector::zeros(self.lp.c.len());
        for (k, col) in self.lp.a.iter().enumerate() {
            for &(r, v) in col {
                lp[r] += v * y[k];
            }
        }
        (mats, lp)
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// Largest α ≤ 1/τ-scaled step with X + αΔX ⪰ 0, given the Cholesky factor of X.
fn max_step_sdp(chol: &Cholesky<f64, nalgebra::Dyn>, dx: &DMatrix<f64>) -> f64 {
    let l = chol.l();
    let Some(t) = l.solve_lower_triangular(dx) else { return 0.0 };
    let Some(s) = l.solve_lower_triangular(&t.transpose()) else { return 0.0 };
    let s = sym(&s);
    let lmin = SymmetricEigen::new(s).eigenvalues.min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter().zip(dx.iter()).filter(|(_, d)| **d < 0.0).map(|(x, d)| -x / d).fold(f64::INFINITY, f64::min)
}

struct Iterate {
    xs: Vec<DMatrix<f64>>,
    zs: Vec<DMatrix<f64>>,
    xl: DVector<f64>,
    zl: DVector<f64>,
    y: DVector<f64>,
}

struct Direction {
    dxs: Vec<DMatrix<f64>>,
    dzs: Vec<DMatrix<f64>>,
    dxl: DVector<f64>,
    dzl: DVector<f64>,
    dy: DVector<f64>,
}

impl Backend for InteriorPointBackend {
    fn name(&self) -> &str {
        "ipm"
    }

    fn solve(&self, prog: &ConicProgram) -> BackendSolution {
        let data = Data::new(prog);
        match run(&data, self) {
            Some((status, y, iters, gap)) => BackendSolution {
                raw_status: format!("{status:?}"),
                status,
                x: y.iter().copied().collect(),
                iterations: iters,
                gap: Some(gap),
            },
            None => BackendSolution {
                status: BackendStatus::Failed,
                x: vec![f64::NAN; data.m],
                raw_status: "numerical breakdown".into(),
                iterations: 0,
                gap: None,
            },
        }
    }
}

fn initial_point(data: &Data) -> Iterate {
    let mut xs = Vec::new();
    let mut zs = Vec::new();
    for blk in &data.sdp {
        let d = blk.c.nrows();
        let sd = (d as f64).sqrt();
        let mut xi = 10f64.max(sd);
        let mut eta = 10f64.max(sd).max(blk.c.norm());
        for (k, a) in &blk.a {
            let na = a.norm();
            xi = xi.max(d as f64 * (1.0 + data.b[*k].abs()) / (1.0 + na));
            eta = eta.max(na);
        }
        xs.push(DMatrix::identity(d, d) * xi);
        zs.push(DMatrix::identity(d, d) * eta);
    }
    let nl = data.lp.c.len();
    let mut xi = 10f64;
    let mut eta = 10f64.max(data.lp.c.amax());
    for (k, col) in data.lp.a.iter().enumerate() {
        let na = col.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if na > 0.0 {
            xi = xi.max((1.0 + data.b[k].abs()) / (1.0 + na));
            eta = eta.max(na);
        }
    }
    Iterate { xs, zs, xl: DVector::from_element(nl, xi), zl: DVector::from_element(nl, eta), y: DVector::zeros(data.m) }
}

fn run(data: &Data, opts: &InteriorPointBackend) -> Option<Finished> {
    let m = data.m;
    let ntot = data.n_total() as f64;
    if ntot == 0.0 {
        return Some((BackendStatus::Solved, DVector::zeros(m), 0, 0.0));
    }
    let mut it = initial_point(data);
    let bnorm = data.b.norm();
    let cnorm: Vec<f64> = data.sdp.iter().map(|b| b.c.norm()).collect();
    let lp_cnorm = data.lp.c.norm();
    let mut best: Option<(f64, DVector<f64>, f64)> = None;
    let mut history: Vec<f64> = Vec::new();

    for iter in 0..opts.max_iter {
        // residuals
        let rp = &data.b - data.a_op(&it.xs, &it.xl);
        let (ay, ayl) = data.a_adj(&it.y);
        let rds: Vec<DMatrix<f64>> =
            data.sdp.iter().zip(&it.zs).zip(&ay).map(|((blk, z), a)| &blk.c - z - a).collect();
        let rdl = &data.lp.c - &it.zl - ayl;

        let gap: f64 = it.xs.iter().zip(&it.zs).map(|(x, z)| inner(x, z)).sum::<f64>() + it.xl.dot(&it.zl);
        let mu = gap / ntot;
        let pobj: f64 = data.sdp.iter().zip(&it.xs).map(|(b, x)| inner(&b.c, x)).sum::<f64>() + data.lp.c.dot(&it.xl);
        let dobj = data.b.dot(&it.y);
        let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let pinf = rp.norm() / (1.0 + bnorm);
        let mut dinf = rdl.norm() / (1.0 + lp_cnorm);
        for (r, c) in rds.iter().zip(&cnorm) {
            dinf = dinf.max(r.norm() / (1.0 + c));
        }
        let merit = rel_gap.max(pinf).max(dinf);
        if !merit.is_finite() {
            return finish(best, iter, opts);
        }
        if best.as_ref().is_none_or(|(b, _, _)| merit < *b) {
            best = Some((merit, it.y.clone(), (pobj - dobj).abs()));
        }
        history.push(merit);
        if history.len() > 8 && merit > 0.5 * history[history.len() - 9] && merit < ACCEPT {
            return finish(best, iter, opts);
        }
        if rel_gap <= opts.tol && pinf <= opts.tol && dinf <= opts.tol {
            return Some((BackendStatus::Solved, it.y.clone(), iter, (pobj - dobj).abs()));
        }

        // Schur complement
        let mut zinv = Vec::with_capacity(data.sdp.len());
        for z in &it.zs {
            let Some(ch) = Cholesky::new(z.clone()) else { return finish(best, iter, opts) };
            zinv.push(sym(&ch.inverse()));
        }
        let mut mm = DMatrix::<f64>::zeros(m, m);
        for ((blk, x), zi) in data.sdp.iter().zip(&it.xs).zip(&zinv) {
            let d = blk.c.nrows();
            for (j, aj) in &blk.a {
                // W = X Aⱼ Z⁻¹ using the nonzero columns of Aⱼ
                let nc = aj.cols.len();
                let mut u = DMatrix::<f64>::zeros(d, nc);
                for &(p, q, v) in &aj.entries {
                    let c = aj.cols.binary_search(&q).unwrap();
                    u.column_mut(c).axpy(v, &x.column(p), 1.0);
                }
                let zrows = zi.select_rows(aj.cols.iter());
                let w = u * zrows;
                for (i, ai) in &blk.a {
                    // ⟨Aᵢ, W⟩ with W not symmetric: Σ Aᵢ[k,l] W[l,k]
                    let s: f64 = ai.entries.iter().map(|&(k, l, v)| v * w[(l, k)]).sum();
                    mm[(*i, *j)] += s;
                }
            }
        }
        let ratio: DVector<f64> = it.xl.component_div(&it.zl);
        for row in &data.lp_rows {
            for &(i, vi) in row.1.iter() {
                for &(j, vj) in row.1.iter() {
                    mm[(i, j)] += vi * vj * ratio[row.0];
                }
            }
        }
        let mm = sym(&mm);
        let scale = mm.diagonal().amax().max(1e-300);
        let Some(solver) = Factor::new(mm, scale) else { return finish(best, iter, opts) };

        // X R_d Z⁻¹ term, shared by predictor and corrector
        let xrz: Vec<DMatrix<f64>> =
            it.xs.iter().zip(&rds).zip(&zinv).map(|((x, r), zi)| x * r * zi).collect();
        let xrzl = it.xl.component_mul(&rdl).component_div(&it.zl);

        let direction = |gs: &[DMatrix<f64>], gl: &DVector<f64>| -> Option<Direction> {
            // M Δy = r_p − 𝒜(G) + 𝒜(X R_d Z⁻¹)
            let gs_sym: Vec<DMatrix<f64>> = gs.iter().map(sym).collect();
            let xrz_sym: Vec<DMatrix<f64>> = xrz.iter().map(sym).collect();
            let rhs = &rp - data.a_op(&gs_sym, gl) + data.a_op(&xrz_sym, &xrzl);
            let dy = solver.solve(&rhs)?;
            let (ady, adyl) = data.a_adj(&dy);
            let dzs: Vec<DMatrix<f64>> = rds.iter().zip(&ady).map(|(r, a)| r - a).collect();
            let dzl = &rdl - adyl;
            let dxs: Vec<DMatrix<f64>> = gs
                .iter()
                .zip(&it.xs)
                .zip(&dzs)
                .zip(&zinv)
                .map(|(((g, x), dz), zi)| sym(&(g - x * dz * zi)))
                .collect();
            let dxl = gl - it.xl.component_mul(&dzl).component_div(&it.zl);
            Some(Direction { dxs, dzs, dxl, dzl, dy })
        };

        let steps = |dir: &Direction| -> Option<(f64, f64)> {
            let mut ap = max_step_lp(&it.xl, &dir.dxl);
            let mut ad = max_step_lp(&it.zl, &dir.dzl);
            for (x, dx) in it.xs.iter().zip(&dir.dxs) {
                ap = ap.min(max_step_sdp(&Cholesky::new(x.clone())?, dx));
            }
            for (z, dz) in it.zs.iter().zip(&dir.dzs) {
                ad = ad.min(max_step_sdp(&Cholesky::new(z.clone())?, dz));
            }
            Some(((opts.step_fraction * ap).min(1.0), (opts.step_fraction * ad).min(1.0)))
        };

        // predictor
        let g_aff: Vec<DMatrix<f64>> = it.xs.iter().map(|x| -x).collect();
        let gl_aff = -&it.xl;
        let Some(aff) = direction(&g_aff, &gl_aff) else { return finish(best, iter, opts) };
        let Some((ap, ad)) = steps(&aff) else { return finish(best, iter, opts) };
        let mut gap_aff = 0.0;
        for (((x, dx), z), dz) in it.xs.iter().zip(&aff.dxs).zip(&it.zs).zip(&aff.dzs) {
            gap_aff += inner(&(x + dx * ap), &(z + dz * ad));
        }
        gap_aff += (&it.xl + &aff.dxl * ap).dot(&(&it.zl + &aff.dzl * ad));
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3).max(if pinf.max(dinf) > 1e-3 { 0.1 } else { 0.0 });

        // corrector
        let gs: Vec<DMatrix<f64>> = it
            .xs
            .iter()
            .zip(&zinv)
            .zip(aff.dxs.iter().zip(&aff.dzs))
            .map(|((x, zi), (dx, dz))| zi * (sigma * mu) - x - dx * dz * zi)
            .collect();
        let gl = DVector::from_iterator(
            it.xl.len(),
            (0..it.xl.len()).map(|r| sigma * mu / it.zl[r] - it.xl[r] - aff.dxl[r] * aff.dzl[r] / it.zl[r]),
        );
        let Some(dir) = direction(&gs, &gl) else { return finish(best, iter, opts) };
        let Some((ap, ad)) = steps(&dir) else { return finish(best, iter, opts) };
        if ap < 1e-12 && ad < 1e-12 {
            return finish(best, iter, opts);
        }
        for (x, dx) in it.xs.iter_mut().zip(&dir.dxs) {
            *x += dx * ap;
        }
        it.xl += &dir.dxl * ap;
        for (z, dz) in it.zs.iter_mut().zip(&dir.dzs) {
            *z += dz * ad;
        }
        it.zl += &dir.dzl * ad;
        it.y += &dir.dy * ad;
    }
    finish(best, opts.max_iter, opts)
}

/// Stalled or out of iterations: accept the best iterate if it is accurate enough.
const ACCEPT: f64 = 1e-7;

type Finished = (BackendStatus, DVector<f64>, u32, f64);

fn finish(best: Option<(f64, DVector<f64>, f64)>, iter: u32, opts: &InteriorPointBackend) -> Option<Finished> {
    best.map(|(merit, y, gap)| {
        let status = if merit <= opts.tol.max(ACCEPT) { BackendStatus::Solved } else { BackendStatus::Inaccurate };
        (status, y, iter, gap)
    })
}

/// Cholesky of the Schur complement with LU fallback.
struct Factor {
    m: DMatrix<f64>,
    kind: FactorKind,
}

enum FactorKind {
    Chol(Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn new(m: DMatrix<f64>, scale: f64) -> Option<Self> {
        if let Some(c) = Cholesky::new(m.clone()) {
            return Some(Factor { m, kind: FactorKind::Chol(c) });
        }
        let n = m.nrows();
        let reg = &m + DMatrix::<f64>::identity(n, n) * (1e-14 * scale);
        if let Some(c) = Cholesky::new(reg) {
            return Some(Factor { m, kind: FactorKind::Chol(c) });
        }
        let lu = m.clone().lu();
        Some(Factor { m, kind: FactorKind::Lu(lu) })
    }

    fn raw(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.kind {
            FactorKind::Chol(c) => Some(c.solve(b)),
            FactorKind::Lu(l) => l.solve(b),
        }
    }

    /// Solve with two steps of iterative refinement.
    fn solve(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        let mut x = self.raw(b)?;
        for _ in 0..2 {
            let r = b - &self.m * &x;
            x += self.raw(&r)?;
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn small_lp_and_sdp() {
        // min x s.t. x ≥ 2 (as 1×1) → 2
        let mut p = ConicProgram::default();
        let x = p.free_scalar();
        p.psd(scalar(-2.0), vec![(x, scalar(1.0))]);
        p.set_objective(vec![1.0]);
        let s = InteriorPointBackend::default().solve(&p);
        assert_eq!(s.status, BackendStatus::Solved);
        assert!((s.x[0] - 2.0).abs() < 1e-8, "{:?}", s.x);

        // max t s.t. [[1, t],[t, 1]] ⪰ 0 → t = 1
        let mut p = ConicProgram::default();
        let t = p.free_scalar();
        p.psd(DMatrix::identity(2, 2), vec![(t, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]))]);
        p.set_objective(vec![-1.0]);
        let s = InteriorPointBackend::default().solve(&p);
        assert_eq!(s.status, BackendStatus::Solved);
        assert!((s.x[0] - 1.0).abs() < 1e-7, "{:?}", s.x);
    }
}
