//! Homogeneous self-dual interior-point method.
//!
//! Internally the program is brought into the form
//!
//! ```text
//! min cᵀx   s.t.  A x = b,   G x + s = h,   s ∈ K
//! ```
//!
//! where `K` is one non-negative orthant block (general `≤` rows, finite bounds,
//! `NonNeg` cones) followed by one block per second-order cone. Equality rows and
//! orthant rows are scaled to unit ∞-norm and the objective to unit ∞-norm;
//! termination is always judged on unscaled residuals.

use crate::cones::{self, Block, Kind, NtScaling, Scaling};
use crate::linalg::LdlFactor;
use crate::program::{Cone, ConicProgram, ProgramError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    /// Converged to a looser tolerance (1e-5) after stalling.
    AlmostOptimal,
    Infeasible,
    Unbounded,
    MaxIterations,
    NumericalError,
}

impl Status {
    pub fn has_solution(self) -> bool {
        matches!(self, Status::Optimal | Status::AlmostOptimal)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub tol: f64,
    pub infeasibility_tol: f64,
    pub max_iter: usize,
    pub static_reg: f64,
    pub refine_steps: usize,
    pub verbose: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            infeasibility_tol: 1e-8,
            max_iter: 120,
            static_reg: 1e-9,
            refine_steps: 10,
            verbose: false,
        }
    }
}

/// Relative residuals of the returned point, in the units of the original program.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Multipliers with the sign convention
/// `c + Aᵀ·eq + Gᵀ·ineq − lower + upper − Σ cone duals = 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Duals {
    pub equalities: Vec<f64>,
    pub inequalities: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cones: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals: Duals,
    pub residuals: Residuals,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
enum RowOrigin {
    Eq(usize),
    Fixed(usize),
    Ineq(usize),
    Lower(usize),
    Upper(usize),
    Cone(usize, usize),
}

type Rows = Vec<Vec<(usize, f64)>>;

struct Internal {
    n: usize,
    a: Rows,
    b: Vec<f64>,
    g: Rows,
    h: Vec<f64>,
    c: Vec<f64>,
    blocks: Vec<Block>,
    a_scale: Vec<f64>,
    g_scale: Vec<f64>,
    cost_scale: f64,
    a_origin: Vec<RowOrigin>,
    g_origin: Vec<RowOrigin>,
    norm_b: f64,
    norm_h: f64,
    norm_c: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mul(rows: &Rows, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(rows) {
        *o = row.iter().map(|&(j, a)| a * x[j]).sum();
    }
}

fn mul_t_add(rows: &Rows, y: &[f64], out: &mut [f64]) {
    for (row, &yi) in rows.iter().zip(y) {
        if yi != 0.0 {
            for &(j, a) in row {
                out[j] += a * yi;
            }
        }
    }
}

impl Internal {
    fn build(p: &ConicProgram) -> Self {
        let n = p.num_vars;
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut a_origin = Vec::new();
        for (r, row) in p.equalities.iter().enumerate() {
            a.push(row.canonical_terms());
            b.push(row.rhs);
            a_origin.push(RowOrigin::Eq(r));
        }
        let mut g = Vec::new();
        let mut h = Vec::new();
        let mut g_origin = Vec::new();
        for (r, row) in p.inequalities.iter().enumerate() {
            g.push(row.canonical_terms());
            h.push(row.rhs);
            g_origin.push(RowOrigin::Ineq(r));
        }
        for j in 0..n {
            let (lo, hi) = (p.lower[j], p.upper[j]);
            if lo == hi {
                a.push(vec![(j, 1.0)]);
                b.push(lo);
                a_origin.push(RowOrigin::Fixed(j));
                continue;
            }
            if lo.is_finite() {
                g.push(vec![(j, -1.0)]);
                h.push(-lo);
                g_origin.push(RowOrigin::Lower(j));
            }
            if hi.is_finite() {
                g.push(vec![(j, 1.0)]);
                h.push(hi);
                g_origin.push(RowOrigin::Upper(j));
            }
        }
        for (k, cone) in p.cones.iter().enumerate() {
            if let Cone::NonNeg(idx) = cone {
                for (pos, &j) in idx.iter().enumerate() {
                    g.push(vec![(j, -1.0)]);
                    h.push(0.0);
                    g_origin.push(RowOrigin::Cone(k, pos));
                }
            }
        }
        let mut blocks = Vec::new();
        if !g.is_empty() {
            blocks.push(Block { kind: Kind::Lp, start: 0, dim: g.len() });
        }
        for (k, cone) in p.cones.iter().enumerate() {
            if let Cone::Soc { .. } = cone {
                let start = g.len();
                for (pos, j) in cone.indices().into_iter().enumerate() {
                    g.push(vec![(j, -1.0)]);
                    h.push(0.0);
                    g_origin.push(RowOrigin::Cone(k, pos));
                }
                blocks.push(Block { kind: Kind::Soc, start, dim: cone.dim() });
            }
        }

        let norm_b = inf_norm(&b);
        let norm_h = inf_norm(&h);
        let norm_c = inf_norm(&p.objective);

        // Row equilibration: equalities and orthant rows to unit ∞-norm.
        let lp_rows = blocks.first().filter(|b| b.kind == Kind::Lp).map_or(0, |b| b.dim);
        let mut a_scale = vec![1.0; a.len()];
        for (r, row) in a.iter_mut().enumerate() {
            let m = row.iter().fold(0.0f64, |m, &(_, v)| m.max(v.abs()));
            if m > 0.0 {
                a_scale[r] = 1.0 / m;
                row.iter_mut().for_each(|t| t.1 /= m);
                b[r] /= m;
            }
        }
        let mut g_scale = vec![1.0; g.len()];
        for r in 0..lp_rows {
            let m = g[r].iter().fold(0.0f64, |m, &(_, v)| m.max(v.abs()));
            if m > 0.0 {
                g_scale[r] = 1.0 / m;
                g[r].iter_mut().for_each(|t| t.1 /= m);
                h[r] /= m;
            }
        }
        let cost_scale = if norm_c > 0.0 { norm_c } else { 1.0 };
        let c = p.objective.iter().map(|v| v / cost_scale).collect();

        Self { n, a, b, g, h, c, blocks, a_scale, g_scale, cost_scale, a_origin, g_origin, norm_b, norm_h, norm_c }
    }

    fn p(&self) -> usize {
        self.a.len()
    }

    fn m(&self) -> usize {
        self.g.len()
    }
}

/// Newton-system workspace: pattern, factorization and refinement.
struct Kkt {
    entries: Vec<(usize, usize)>,
    values: Vec<f64>,
    /// Index in `values` where the −W² block starts.
    w_offset: usize,
    w_pattern_len: usize,
    factor: LdlFactor,
    wsq: Vec<f64>,
    static_reg: f64,
    refine_steps: usize,
}

impl Kkt {
    fn new(prob: &Internal, static_reg: f64, refine_steps: usize) -> Self {
        let (n, p, m) = (prob.n, prob.p(), prob.m());
        let dim = n + p + m;
        let mut entries = Vec::new();
        let mut values = Vec::new();
        for j in 0..n {
            entries.push((j, j));
            values.push(static_reg);
        }
        for (r, row) in prob.a.iter().enumerate() {
            for &(j, v) in row {
                entries.push((j, n + r));
                values.push(v);
            }
        }
        for r in 0..p {
            entries.push((n + r, n + r));
            values.push(-static_reg);
        }
        for (i, row) in prob.g.iter().enumerate() {
            for &(j, v) in row {
                entries.push((j, n + p + i));
                values.push(v);
            }
        }
        let w_offset = entries.len();
        let wpat = cones::w_squared_pattern(&prob.blocks);
        for &(r, c) in &wpat {
            entries.push((n + p + r, n + p + c));
            values.push(0.0);
        }
        let mut signs = vec![1.0; n];
        signs.extend(std::iter::repeat(-1.0).take(p + m));
        let factor = LdlFactor::new(dim, &entries, &signs);
        Self {
            entries,
            values,
            w_offset,
            w_pattern_len: wpat.len(),
            factor,
            wsq: Vec::new(),
            static_reg,
            refine_steps,
        }
    }

    fn factor(&mut self, prob: &Internal, w: &NtScaling) -> Result<(), ()> {
        w.w_squared_upper(&prob.blocks, &mut self.wsq);
        debug_assert_eq!(self.wsq.len(), self.w_pattern_len);
        for (k, &v) in self.wsq.iter().enumerate() {
            let (r, c) = self.entries[self.w_offset + k];
            self.values[self.w_offset + k] = -v - if r == c { self.static_reg } else { 0.0 };
        }
        self.factor.factor(&self.values).map_err(|_| ())
    }

    /// Unregularized K·v.
    fn mul(&self, prob: &Internal, w: &NtScaling, v: &[f64], out: &mut [f64]) {
        let (n, p, m) = (prob.n, prob.p(), prob.m());
        let (vx, rest) = v.split_at(n);
        let (vy, vz) = rest.split_at(p);
        out.iter_mut().for_each(|o| *o = 0.0);
        {
            let ox = &mut out[..n];
            mul_t_add(&prob.a, vy, ox);
            mul_t_add(&prob.g, vz, ox);
        }
        mul(&prob.a, vx, &mut out[n..n + p]);
        let mut gx = vec![0.0; m];
        mul(&prob.g, vx, &mut gx);
        let mut t = vec![0.0; m];
        let mut wwz = vec![0.0; m];
        w.apply(&prob.blocks, vz, &mut t, false);
        w.apply(&prob.blocks, &t, &mut wwz, false);
        for i in 0..m {
            out[n + p + i] = gx[i] - wwz[i];
        }
    }

    fn solve(&self, prob: &Internal, w: &NtScaling, rhs: &[f64]) -> Vec<f64> {
        let mut sol = rhs.to_vec();
        self.factor.solve(&mut sol);
        let scale = 1.0 + inf_norm(rhs);
        let mut kv = vec![0.0; rhs.len()];
        for _ in 0..self.refine_steps {
            self.mul(prob, w, &sol, &mut kv);
            let mut r: Vec<f64> = rhs.iter().zip(&kv).map(|(a, b)| a - b).collect();
            if inf_norm(&r) <= 1e-14 * scale {
                break;
            }
            self.factor.solve(&mut r);
            for (s, d) in sol.iter_mut().zip(&r) {
                *s += d;
            }
        }
        sol
    }
}

struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Metrics {
    pres: f64,
    dres: f64,
    gap: f64,
    pcost: f64,
    primal_infeasible: bool,
    dual_infeasible: bool,
}

fn identity_scaling(blocks: &[Block]) -> NtScaling {
    NtScaling {
        parts: blocks
            .iter()
            .map(|b| match b.kind {
                Kind::Lp => Scaling::Lp { w: vec![1.0; b.dim] },
                Kind::Soc => {
                    let mut w = vec![0.0; b.dim];
                    w[0] = 1.0;
                    Scaling::Soc { eta: 1.0, w }
                }
            })
            .collect(),
    }
}

/// Solves a continuous conic program. Binary declarations are ignored here; see
/// [`crate::branch_and_bound`].
pub fn solve_socp(program: &ConicProgram, settings: &Settings) -> Result<Solution, ProgramError> {
    program.validate()?;
    let prob = Internal::build(program);
    Ok(run(program, &prob, settings))
}

fn residual_vectors(prob: &Internal, it: &Iterate) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let (n, p, m) = (prob.n, prob.p(), prob.m());
    let mut rx = vec![0.0; n];
    mul_t_add(&prob.a, &it.y, &mut rx);
    mul_t_add(&prob.g, &it.z, &mut rx);
    for j in 0..n {
        rx[j] += prob.c[j] * it.tau;
    }
    let mut ax = vec![0.0; p];
    mul(&prob.a, &it.x, &mut ax);
    let ry: Vec<f64> = (0..p).map(|r| -ax[r] + prob.b[r] * it.tau).collect();
    let mut gx = vec![0.0; m];
    mul(&prob.g, &it.x, &mut gx);
    let rz: Vec<f64> = (0..m).map(|i| it.s[i] + gx[i] - prob.h[i] * it.tau).collect();
    let rtau = it.kappa + dot(&prob.c, &it.x) + dot(&prob.b, &it.y) + dot(&prob.h, &it.z);
    (rx, ry, rz, rtau)
}

fn metrics(prob: &Internal, it: &Iterate, rx: &[f64], ry: &[f64], rz: &[f64], settings: &Settings) -> Metrics {
    let cs = prob.cost_scale;
    let tau = it.tau;
    let pres_a = ry.iter().zip(&prob.a_scale).fold(0.0f64, |m, (r, d)| m.max((r / d).abs())) / tau;
    let pres_g = rz.iter().zip(&prob.g_scale).fold(0.0f64, |m, (r, d)| m.max((r / d).abs())) / tau;
    let pres = (pres_a / (1.0 + prob.norm_b)).max(pres_g / (1.0 + prob.norm_h));
    let dres = cs * inf_norm(rx) / tau / (1.0 + prob.norm_c);
    let cx = dot(&prob.c, &it.x);
    let by_hz = dot(&prob.b, &it.y) + dot(&prob.h, &it.z);
    let pcost = cs * cx / tau;
    let dcost = -cs * by_hz / tau;
    let sz = cs * dot(&it.s, &it.z) / (tau * tau);
    let gap = (pcost - dcost).abs().max(sz.abs()) / (1.0 + pcost.abs());

    // Certificates (scale-free ratios).
    let mut primal_infeasible = false;
    if by_hz < 0.0 {
        let mut aty = vec![0.0; prob.n];
        mul_t_add(&prob.a, &it.y, &mut aty);
        mul_t_add(&prob.g, &it.z, &mut aty);
        primal_infeasible = inf_norm(&aty) <= settings.infeasibility_tol * (-by_hz);
    }
    let mut dual_infeasible = false;
    if cx < 0.0 {
        let mut ax = vec![0.0; prob.p()];
        mul(&prob.a, &it.x, &mut ax);
        let mut gxs = vec![0.0; prob.m()];
        mul(&prob.g, &it.x, &mut gxs);
        let ra = ax.iter().zip(&prob.a_scale).fold(0.0f64, |m, (r, d)| m.max((r / d).abs()));
        let rg = gxs
            .iter()
            .zip(&it.s)
            .zip(&prob.g_scale)
            .fold(0.0f64, |m, ((g, s), d)| m.max(((g + s) / d).abs()));
        dual_infeasible = ra.max(rg) <= settings.infeasibility_tol * (-cs * cx);
    }
    Metrics { pres, dres, gap, pcost, primal_infeasible, dual_infeasible }
}

fn run(program: &ConicProgram, prob: &Internal, settings: &Settings) -> Solution {
    let (n, p, m) = (prob.n, prob.p(), prob.m());
    let blocks = &prob.blocks;
    let nu = cones::degree(blocks) as f64;
    let mut kkt = Kkt::new(prob, settings.static_reg, settings.refine_steps);

    // Initial point from two least-squares style solves with W = I.
    let ident = identity_scaling(blocks);
    if kkt.factor(prob, &ident).is_err() {
        return failed(program, prob, Status::NumericalError, 0);
    }
    let mut rhs = vec![0.0; n + p + m];
    rhs[n..n + p].copy_from_slice(&prob.b);
    rhs[n + p..].copy_from_slice(&prob.h);
    let sol = kkt.solve(prob, &ident, &rhs);
    let x0 = sol[..n].to_vec();
    let mut s0: Vec<f64> = sol[n + p..].iter().map(|v| -v).collect();
    cones::shift_into_interior(blocks, &mut s0);
    let mut rhs = vec![0.0; n + p + m];
    for j in 0..n {
        rhs[j] = -prob.c[j];
    }
    let sol = kkt.solve(prob, &ident, &rhs);
    let y0 = sol[n..n + p].to_vec();
    let mut z0 = sol[n + p..].to_vec();
    cones::shift_into_interior(blocks, &mut z0);
    let mut it = Iterate { x: x0, y: y0, z: z0, s: s0, tau: 1.0, kappa: 1.0 };

    let mut status = Status::MaxIterations;
    let mut iterations = 0;
    let mut stalls = 0;
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64, f64)> = None;
    let loose = 1e-5f64.max(settings.tol);

    for iter in 0..=settings.max_iter {
        iterations = iter;
        let (rx, ry, rz, rtau) = residual_vectors(prob, &it);
        let mt = metrics(prob, &it, &rx, &ry, &rz, settings);
        if settings.verbose {
            eprintln!(
                "ipm {iter:3}  pcost {:+.6e}  pres {:.2e}  dres {:.2e}  gap {:.2e}  tau {:.2e}  kappa {:.2e}",
                mt.pcost, mt.pres, mt.dres, mt.gap, it.tau, it.kappa
            );
        }
        if mt.pres <= settings.tol && mt.dres <= settings.tol && mt.gap <= settings.tol {
            status = Status::Optimal;
            break;
        }
        if mt.primal_infeasible {
            status = Status::Infeasible;
            break;
        }
        if mt.dual_infeasible {
            status = Status::Unbounded;
            break;
        }
        let score = mt.pres.max(mt.dres).max(mt.gap);
        if score <= loose && best.as_ref().map_or(true, |b| score < b.0) {
            best = Some((score, it.x.clone(), it.y.clone(), it.z.clone(), it.s.clone(), it.tau, it.kappa));
        }
        if iter == settings.max_iter {
            break;
        }

        let Some(w) = NtScaling::compute(blocks, &it.s, &it.z) else {
            status = Status::NumericalError;
            break;
        };
        let mut lambda = vec![0.0; m];
        w.apply(blocks, &it.z, &mut lambda, false);
        if kkt.factor(prob, &w).is_err() {
            status = Status::NumericalError;
            break;
        }

        let mut rhs1 = vec![0.0; n + p + m];
        for j in 0..n {
            rhs1[j] = -prob.c[j];
        }
        rhs1[n..n + p].copy_from_slice(&prob.b);
        rhs1[n + p..].copy_from_slice(&prob.h);
        let sol1 = kkt.solve(prob, &w, &rhs1);

        let mut ll = vec![0.0; m];
        cones::jordan(blocks, &lambda, &lambda, &mut ll);
        let mu = (dot(&it.s, &it.z) + it.tau * it.kappa) / (nu + 1.0);

        // Affine predictor.
        let ds_aff: Vec<f64> = ll.iter().map(|v| -v).collect();
        let dk_aff = -it.kappa * it.tau;
        let Some(aff) = direction(prob, &kkt, &w, &lambda, &it, &sol1, (&rx, &ry, &rz, rtau), 0.0, &ds_aff, dk_aff)
        else {
            status = Status::NumericalError;
            break;
        };
        let alpha_aff = step_length(blocks, &it, &aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // Combined corrector.
        let mut ws_aff = vec![0.0; m];
        let mut wz_aff = vec![0.0; m];
        w.apply(blocks, &aff.s, &mut ws_aff, true);
        w.apply(blocks, &aff.z, &mut wz_aff, false);
        let mut corr = vec![0.0; m];
        cones::jordan(blocks, &ws_aff, &wz_aff, &mut corr);
        let mut ds: Vec<f64> = (0..m).map(|i| -ll[i] - corr[i]).collect();
        cones::add_identity(blocks, &mut ds, sigma * mu);
        let dk = -it.kappa * it.tau - aff.tau * aff.kappa + sigma * mu;
        let Some(dir) = direction(prob, &kkt, &w, &lambda, &it, &sol1, (&rx, &ry, &rz, rtau), sigma, &ds, dk) else {
            status = Status::NumericalError;
            break;
        };
        let alpha = (0.99 * step_length(blocks, &it, &dir)).min(1.0);
        if !(alpha > 1e-10) {
            stalls += 3;
        } else if alpha < 1e-3 {
            stalls += 1;
        } else {
            stalls = 0;
        }
        if stalls >= 6 {
            break;
        }
        for j in 0..n {
            it.x[j] += alpha * dir.x[j];
        }
        for r in 0..p {
            it.y[r] += alpha * dir.y[r];
        }
        for i in 0..m {
            it.z[i] += alpha * dir.z[i];
            it.s[i] += alpha * dir.s[i];
        }
        it.tau += alpha * dir.tau;
        it.kappa += alpha * dir.kappa;
        if !(it.tau > 0.0) || !it.tau.is_finite() {
            status = Status::NumericalError;
            break;
        }
    }

    if !matches!(status, Status::Optimal | Status::Infeasible | Status::Unbounded) {
        if let Some((_, x, y, z, s, tau, kappa)) = best {
            it = Iterate { x, y, z, s, tau, kappa };
            status = Status::AlmostOptimal;
        } else if status != Status::NumericalError {
            status = Status::MaxIterations;
        }
    }
    finish(program, prob, &it, status, iterations)
}

#[allow(clippy::too_many_arguments)]
fn direction(
    prob: &Internal,
    kkt: &Kkt,
    w: &NtScaling,
    lambda: &[f64],
    it: &Iterate,
    sol1: &[f64],
    res: (&[f64], &[f64], &[f64], f64),
    sigma: f64,
    ds: &[f64],
    dk: f64,
) -> Option<Direction> {
    let (n, p, m) = (prob.n, prob.p(), prob.m());
    let (rx, ry, rz, rtau) = res;
    let f = 1.0 - sigma;
    let mut ldiv = vec![0.0; m];
    cones::jordan_div(&prob.blocks, lambda, ds, &mut ldiv);
    let mut wl = vec![0.0; m];
    w.apply(&prob.blocks, &ldiv, &mut wl, false);

    let mut rhs = vec![0.0; n + p + m];
    for j in 0..n {
        rhs[j] = -f * rx[j];
    }
    for r in 0..p {
        rhs[n + r] = f * ry[r];
    }
    for i in 0..m {
        rhs[n + p + i] = -f * rz[i] - wl[i];
    }
    let sol2 = kkt.solve(prob, w, &rhs);

    let dot_full = |v: &[f64]| dot(&prob.c, &v[..n]) + dot(&prob.b, &v[n..n + p]) + dot(&prob.h, &v[n + p..]);
    let denom = dot_full(sol1) - it.kappa / it.tau;
    let dtau = (-f * rtau - dk / it.tau - dot_full(&sol2)) / denom;
    if !dtau.is_finite() {
        return None;
    }
    let full: Vec<f64> = sol2.iter().zip(sol1).map(|(a, b)| a + dtau * b).collect();
    let dz = full[n + p..].to_vec();
    // Δs = W(λ \ ds) − W² Δz
    let mut t = vec![0.0; m];
    let mut wwz = vec![0.0; m];
    w.apply(&prob.blocks, &dz, &mut t, false);
    w.apply(&prob.blocks, &t, &mut wwz, false);
    let dsv: Vec<f64> = (0..m).map(|i| wl[i] - wwz[i]).collect();
    let dkappa = (dk - it.kappa * dtau) / it.tau;
    if full.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(Direction {
        x: full[..n].to_vec(),
        y: full[n..n + p].to_vec(),
        z: dz,
        s: dsv,
        tau: dtau,
        kappa: dkappa,
    })
}

fn step_length(blocks: &[Block], it: &Iterate, d: &Direction) -> f64 {
    let mut a = cones::max_step(blocks, &it.s, &d.s, f64::INFINITY);
    a = a.min(cones::max_step(blocks, &it.z, &d.z, f64::INFINITY));
    if d.tau < 0.0 {
        a = a.min(-it.tau / d.tau);
    }
    if d.kappa < 0.0 {
        a = a.min(-it.kappa / d.kappa);
    }
    a
}

fn failed(program: &ConicProgram, prob: &Internal, status: Status, iterations: usize) -> Solution {
    let it = Iterate {
        x: vec![0.0; prob.n],
        y: vec![0.0; prob.p()],
        z: vec![0.0; prob.m()],
        s: vec![0.0; prob.m()],
        tau: 1.0,
        kappa: 0.0,
    };
    finish(program, prob, &it, status, iterations)
}

fn finish(program: &ConicProgram, prob: &Internal, it: &Iterate, status: Status, iterations: usize) -> Solution {
    let n = program.num_vars;
    let mut duals = Duals {
        equalities: vec![0.0; program.equalities.len()],
        inequalities: vec![0.0; program.inequalities.len()],
        lower: vec![0.0; n],
        upper: vec![0.0; n],
        cones: program.cones.iter().map(|c| vec![0.0; c.dim()]).collect(),
    };
    // Certificates are returned unnormalized; solutions are divided by τ.
    let scale = if status == Status::Infeasible || status == Status::Unbounded { 1.0 } else { it.tau };
    let x: Vec<f64> = it.x.iter().map(|v| v / scale).collect();
    let cs = prob.cost_scale;
    for (r, origin) in prob.a_origin.iter().enumerate() {
        let y = cs * prob.a_scale[r] * it.y[r] / scale;
        match *origin {
            RowOrigin::Eq(k) => duals.equalities[k] = y,
            RowOrigin::Fixed(j) => {
                if y >= 0.0 {
                    duals.upper[j] = y;
                } else {
                    duals.lower[j] = -y;
                }
            }
            _ => unreachable!(),
        }
    }
    for (i, origin) in prob.g_origin.iter().enumerate() {
        let z = cs * prob.g_scale[i] * it.z[i] / scale;
        match *origin {
            RowOrigin::Ineq(k) => duals.inequalities[k] = z,
            RowOrigin::Lower(j) => duals.lower[j] = z,
            RowOrigin::Upper(j) => duals.upper[j] = z,
            RowOrigin::Cone(k, pos) => duals.cones[k][pos] = z,
            RowOrigin::Fixed(_) | RowOrigin::Eq(_) => unreachable!(),
        }
    }
    let residuals = if status.has_solution() {
        crate::ipm::check_residuals(program, &x, &duals)
    } else {
        Residuals::default()
    };
    let objective = match status {
        Status::Infeasible => f64::INFINITY,
        Status::Unbounded => f64::NEG_INFINITY,
        _ => program.objective_value(&x),
    };
    Solution { status, x, objective, duals, residuals, iterations }
}

/// Recomputes relative primal/dual residuals and duality gap of a candidate
/// primal-dual pair directly from the original program data.
pub fn check_residuals(program: &ConicProgram, x: &[f64], duals: &Duals) -> Residuals {
    let n = program.num_vars;
    let mut norm_rhs = 0.0f64;
    let mut pres = 0.0f64;
    for row in &program.equalities {
        pres = pres.max((row.eval(x) - row.rhs).abs());
        norm_rhs = norm_rhs.max(row.rhs.abs());
    }
    for row in &program.inequalities {
        pres = pres.max((row.eval(x) - row.rhs).max(0.0));
        norm_rhs = norm_rhs.max(row.rhs.abs());
    }
    for j in 0..n {
        pres = pres.max((program.lower[j] - x[j]).max(0.0)).max((x[j] - program.upper[j]).max(0.0));
        for v in [program.lower[j], program.upper[j]] {
            if v.is_finite() {
                norm_rhs = norm_rhs.max(v.abs());
            }
        }
    }
    for cone in &program.cones {
        match cone {
            Cone::NonNeg(idx) => {
                for &j in idx {
                    pres = pres.max((-x[j]).max(0.0));
                }
            }
            Cone::Soc { head, tail } => {
                let t: f64 = tail.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt();
                pres = pres.max((t - x[*head]).max(0.0));
            }
        }
    }
    let mut r = program.objective.clone();
    for (row, &y) in program.equalities.iter().zip(&duals.equalities) {
        for &(j, a) in &row.terms {
            r[j] += a * y;
        }
    }
    for (row, &z) in program.inequalities.iter().zip(&duals.inequalities) {
        for &(j, a) in &row.terms {
            r[j] += a * z;
        }
    }
    for j in 0..n {
        r[j] += duals.upper[j] - duals.lower[j];
    }
    for (cone, z) in program.cones.iter().zip(&duals.cones) {
        for (pos, j) in cone.indices().into_iter().enumerate() {
            r[j] -= z[pos];
        }
    }
    let dres = inf_norm(&r) / (1.0 + inf_norm(&program.objective));
    let pcost: f64 = program.objective.iter().zip(x).map(|(c, v)| c * v).sum();
    let mut dcost = 0.0;
    for (row, &y) in program.equalities.iter().zip(&duals.equalities) {
        dcost -= row.rhs * y;
    }
    for (row, &z) in program.inequalities.iter().zip(&duals.inequalities) {
        dcost -= row.rhs * z;
    }
    for j in 0..n {
        if program.upper[j].is_finite() {
            dcost -= program.upper[j] * duals.upper[j];
        }
        if program.lower[j].is_finite() {
            dcost += program.lower[j] * duals.lower[j];
        }
    }
    Residuals {
        primal: pres / (1.0 + norm_rhs),
        dual: dres,
        gap: (pcost - dcost).abs() / (1.0 + pcost.abs()),
    }
}
