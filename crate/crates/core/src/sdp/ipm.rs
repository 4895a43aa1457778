//! Infeasible-start HKM primal-dual path-following on the real embedding.
//!
//! Inequalities get nonnegative slacks: `<G, Y> - w = h`, `w >= 0`. Every
//! constraint row is normalized to unit Frobenius norm and the objective
//! to at most unit norm before iterating.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{embed_complex, recover_complex, SdpIterate, SdpProblem, SdpSolution, SdpStatus};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpSettings {
    /// Target relative duality gap and relative feasibility residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Fraction-to-boundary factor.
    pub step_fraction: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self { tol: 1e-7, max_iters: 100, step_fraction: 0.98, sigma_min: 0.05, sigma_max: 0.5 }
    }
}

impl SdpSettings {
    pub fn new(tol: f64, max_iters: usize) -> Self {
        Self { tol, max_iters, ..Self::default() }
    }
}

/// Solves with default step parameters.
pub fn solve(problem: &SdpProblem, tol: f64, max_iters: usize) -> Result<SdpSolution> {
    solve_with(problem, &SdpSettings::new(tol, max_iters))
}

type Mat = DMatrix<f64>;
type Vector = DVector<f64>;

/// A constraint matrix in the real embedding.
#[derive(Debug, Clone)]
enum Row {
    /// Symmetric entry list (both triangles present).
    Sparse(Vec<(usize, usize, f64)>),
    Dense(Mat),
}

impl Row {
    fn from_dense(m: Mat) -> Self {
        let d = m.nrows();
        let nnz = m.iter().filter(|v| **v != 0.0).count();
        if nnz <= 2 * d {
            let mut entries = Vec::with_capacity(nnz);
            for j in 0..d {
                for i in 0..d {
                    let v = m[(i, j)];
                    if v != 0.0 {
                        entries.push((i, j, v));
                    }
                }
            }
            Row::Sparse(entries)
        } else {
            Row::Dense(m)
        }
    }

    fn inner(&self, y: &Mat) -> f64 {
        match self {
            Row::Sparse(e) => e.iter().map(|&(i, j, v)| v * y[(i, j)]).sum(),
            Row::Dense(a) => a.dot(y),
        }
    }

    fn axpy_into(&self, alpha: f64, out: &mut Mat) {
        match self {
            Row::Sparse(e) => {
                for &(i, j, v) in e {
                    out[(i, j)] += alpha * v;
                }
            }
            Row::Dense(a) => *out += a * alpha,
        }
    }

    fn norm(&self) -> f64 {
        match self {
            Row::Sparse(e) => e.iter().map(|(_, _, v)| v * v).sum::<f64>().sqrt(),
            Row::Dense(a) => a.norm(),
        }
    }

    fn scale(&mut self, s: f64) {
        match self {
            Row::Sparse(e) => e.iter_mut().for_each(|t| t.2 *= s),
            Row::Dense(a) => *a *= s,
        }
    }
}

/// Normalized real-embedded problem.
struct Real {
    d: usize,
    n_eq: usize,
    rows: Vec<Row>,
    b: Vector,
    c: Mat,
    row_scale: Vec<f64>,
    c_scale: f64,
    b_norm: f64,
    c_norm: f64,
}

impl Real {
    fn new(p: &SdpProblem) -> Self {
        let d = 2 * p.dim;
        let mut rows = Vec::with_capacity(p.num_constraints());
        let mut b = Vec::with_capacity(p.num_constraints());
        let mut row_scale = Vec::with_capacity(p.num_constraints());
        for (a, rhs) in p.equalities.iter().chain(&p.inequalities) {
            let mut row = Row::from_dense(embed_complex(a) * 0.5);
            let nrm = row.norm();
            let s = if nrm > 0.0 { 1.0 / nrm } else { 1.0 };
            row.scale(s);
            rows.push(row);
            b.push(rhs * s);
            row_scale.push(s);
        }
        let mut c = embed_complex(&p.objective) * 0.5;
        let c_fro = c.norm();
        let c_scale = if c_fro > 1.0 { 1.0 / c_fro } else { 1.0 };
        c *= c_scale;
        let b = Vector::from_vec(b);
        Self {
            d,
            n_eq: p.equalities.len(),
            b_norm: b.norm(),
            c_norm: c.norm(),
            rows,
            b,
            c,
            row_scale,
            c_scale,
        }
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    fn n_in(&self) -> usize {
        self.rows.len() - self.n_eq
    }

    /// `A(Y)` with the slack columns `-w` on inequality rows.
    fn apply(&self, y: &Mat, w: &Vector) -> Vector {
        let mut out = Vector::from_iterator(self.m(), self.rows.iter().map(|r| r.inner(y)));
        for (k, wk) in w.iter().enumerate() {
            out[self.n_eq + k] -= wk;
        }
        out
    }

    /// `sum_k y_k A_k` (matrix part only).
    fn adjoint(&self, y: &Vector) -> Mat {
        let mut out = Mat::zeros(self.d, self.d);
        for (row, yk) in self.rows.iter().zip(y.iter()) {
            row.axpy_into(*yk, &mut out);
        }
        out
    }

    /// HKM Schur complement `M_kl = <A_k, X A_l Z^-1>` plus the slack block.
    fn schur(&self, x: &Mat, zinv: &Mat, dl: &Vector) -> Mat {
        let m = self.m();
        let mut s = Mat::zeros(m, m);
        let products: Vec<Option<Mat>> = self
            .rows
            .iter()
            .map(|r| match r {
                Row::Dense(a) => Some(x * a * zinv),
                Row::Sparse(_) => None,
            })
            .collect();
        for l in 0..m {
            for k in 0..=l {
                let v = match (&self.rows[k], &self.rows[l], &products[k], &products[l]) {
                    (Row::Sparse(ek), Row::Sparse(el), _, _) => {
                        // sum A_k[a,b] X[b,c] A_l[c,e] Zinv[e,a]
                        let mut acc = 0.0;
                        for &(a, bb, vk) in ek {
                            for &(c, e, vl) in el {
                                acc += vk * vl * x[(bb, c)] * zinv[(e, a)];
                            }
                        }
                        acc
                    }
                    (Row::Sparse(ek), _, _, Some(ql)) => ek.iter().map(|&(a, bb, v)| v * ql[(bb, a)]).sum(),
                    (_, Row::Sparse(el), Some(qk), _) => el.iter().map(|&(a, bb, v)| v * qk[(bb, a)]).sum(),
                    (Row::Dense(ak), _, _, Some(ql)) => ak.tr_dot(ql),
                    _ => unreachable!("dense rows always have products"),
                };
                s[(k, l)] = v;
                s[(l, k)] = v;
            }
        }
        for (k, d) in dl.iter().enumerate() {
            let i = self.n_eq + k;
            s[(i, i)] += d;
        }
        s
    }
}

struct State {
    x: Mat,
    w: Vector,
    y: Vector,
    z: Mat,
    zw: Vector,
}

struct Direction {
    dx: Mat,
    dw: Vector,
    dy: Vector,
    dz: Mat,
    dzw: Vector,
}

fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Largest `alpha` keeping `X + alpha D` PSD, given `L^-1` for `X = L L^T`.
fn max_step_psd(linv: &Mat, dm: &Mat) -> f64 {
    let s = sym(&(linv * dm * linv.transpose()));
    let lmin = min_eigenvalue(&s);
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

/// Lower estimate of the smallest eigenvalue of a symmetric matrix via
/// Lanczos with full reorthogonalization. Small matrices are solved exactly.
fn min_eigenvalue(s: &Mat) -> f64 {
    let d = s.nrows();
    if d <= 24 {
        return s.clone().symmetric_eigenvalues().min();
    }
    let scale = s.norm().max(1e-300);
    let mut basis: Vec<Vector> = Vec::with_capacity(d);
    let mut alpha: Vec<f64> = Vec::with_capacity(d);
    let mut beta: Vec<f64> = Vec::with_capacity(d);
    let mut v = Vector::from_fn(d, |i, _| 1.0 + 0.37 * (i as f64 * 1.618).sin());
    v.normalize_mut();
    basis.push(v);
    loop {
        let k = basis.len();
        let mut w = s * &basis[k - 1];
        alpha.push(basis[k - 1].dot(&w));
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let b = w.norm();
        let exhausted = k == d || b <= 1e-13 * scale;
        if exhausted || (k >= 8 && k % 4 == 0) {
            let mut t = Mat::zeros(k, k);
            for i in 0..k {
                t[(i, i)] = alpha[i];
                if i + 1 < k {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = t.symmetric_eigen();
            let (imin, theta) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
            let res = b * eig.eigenvectors[(k - 1, imin)].abs();
            if exhausted || res <= 1e-3 * theta.abs().max(1e-12 * scale) {
                return if exhausted { theta } else { theta - res };
            }
        }
        beta.push(b);
        basis.push(w / b);
    }
}

/// Shrinks `alpha` until `X + alpha D` admits a Cholesky factorization.
fn verified_step(x: &Mat, dm: &Mat, mut alpha: f64) -> f64 {
    for _ in 0..60 {
        if alpha <= 0.0 || Cholesky::new(sym(&(x + dm * alpha))).is_some() {
            return alpha;
        }
        alpha *= 0.8;
    }
    0.0
}

fn lower_inverse(c: &Cholesky<f64, Dyn>) -> Mat {
    let l = c.l();
    let mut inv = Mat::identity(l.nrows(), l.ncols());
    l.solve_lower_triangular_mut(&mut inv);
    inv
}

fn max_step_vec(v: &Vector, dv: &Vector) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

fn chol(m: &Mat) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(sym(m))
}

fn solve_schur(s: &Mat, rhs: &Vector) -> Option<Vector> {
    if let Some(c) = Cholesky::new(s.clone()) {
        return Some(c.solve(rhs));
    }
    let scale = s.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut reg = s.clone();
    for i in 0..reg.nrows() {
        reg[(i, i)] += 1e-13 * scale;
    }
    if let Some(c) = Cholesky::new(reg) {
        return Some(c.solve(rhs));
    }
    s.clone().lu().solve(rhs)
}

pub fn solve_with(problem: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution> {
    problem.validate()?;
    if !(settings.tol > 0.0) || settings.max_iters == 0 {
        return Err(Error::contract("SDP settings need tol > 0 and max_iters >= 1"));
    }
    if problem.dim == 0 {
        return Ok(SdpSolution {
            x: crate::CMat::zeros(0, 0),
            primal_value: 0.0,
            dual_value: 0.0,
            gap: 0.0,
            rel_gap: 0.0,
            status: SdpStatus::Optimal,
            iterations: 0,
            equality_duals: vec![0.0; problem.equalities.len()],
            inequality_duals: vec![0.0; problem.inequalities.len()],
            history: Vec::new(),
        });
    }
    let p = Real::new(problem);
    Solver { p: &p, s: settings }.run(problem)
}

struct Solver<'a> {
    p: &'a Real,
    s: &'a SdpSettings,
}

struct Metrics {
    pobj: f64,
    dobj: f64,
    rel_gap: f64,
    pinf: f64,
    dinf: f64,
    mu: f64,
}

impl Solver<'_> {
    fn initial(&self) -> State {
        let p = self.p;
        let d = p.d as f64;
        // every row has unit norm, so ||A_k|| = 1
        let bmax = p.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let xi = 10f64.max(d.sqrt()).max(d * (1.0 + bmax) / 2.0);
        let zeta = 10f64.max(d.sqrt()).max(p.c_norm);
        State {
            x: Mat::identity(p.d, p.d) * xi,
            w: Vector::from_element(p.n_in(), xi),
            y: Vector::zeros(p.m()),
            z: Mat::identity(p.d, p.d) * zeta,
            zw: Vector::from_element(p.n_in(), zeta),
        }
    }

    fn nu(&self) -> f64 {
        (self.p.d + self.p.n_in()) as f64
    }

    fn residuals(&self, st: &State) -> (Vector, Mat, Vector) {
        let p = self.p;
        let rp = &p.b - p.apply(&st.x, &st.w);
        let rd = &p.c - p.adjoint(&st.y) - &st.z;
        // dual slack rows: y_in - z_w = 0
        let rdw = Vector::from_iterator(p.n_in(), (0..p.n_in()).map(|k| st.y[p.n_eq + k] - st.zw[k]));
        (rp, rd, rdw)
    }

    fn metrics(&self, st: &State, rp: &Vector, rd: &Mat, rdw: &Vector) -> Metrics {
        let p = self.p;
        let unscale = 1.0 / p.c_scale;
        let pobj = p.c.dot(&st.x) * unscale;
        let dobj = p.b.dot(&st.y) * unscale;
        let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let pinf = rp.norm() / (1.0 + p.b_norm);
        let dinf = (rd.norm_squared() + rdw.norm_squared()).sqrt() / (1.0 + p.c_norm);
        let mu = (st.x.dot(&st.z) + st.w.dot(&st.zw)) / self.nu();
        Metrics { pobj, dobj, rel_gap, pinf, dinf, mu }
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        st: &State,
        zinv: &Mat,
        x_rd_zinv: &Mat,
        schur: &Mat,
        rp: &Vector,
        rd: &Mat,
        rdw: &Vector,
        sigma_mu: f64,
        corr: Option<&Direction>,
    ) -> Option<Direction> {
        let p = self.p;
        let n_eq = p.n_eq;
        let mut h = zinv * sigma_mu - &st.x - x_rd_zinv;
        if let Some(c) = corr {
            h -= &c.dx * &c.dz * zinv;
        }
        let h = sym(&h);
        let mut hw = Vector::zeros(p.n_in());
        for k in 0..p.n_in() {
            let (w, zw) = (st.w[k], st.zw[k]);
            let mut v = sigma_mu / zw - w - (w / zw) * rdw[k];
            if let Some(c) = corr {
                v -= c.dw[k] * c.dzw[k] / zw;
            }
            hw[k] = v;
        }
        // rhs = rp - A(H) - B hw with B = [0; -I]
        let mut rhs = rp - Vector::from_iterator(p.m(), p.rows.iter().map(|r| r.inner(&h)));
        for k in 0..p.n_in() {
            rhs[n_eq + k] += hw[k];
        }
        let dy = solve_schur(schur, &rhs)?;
        let aty = p.adjoint(&dy);
        let dz = sym(&(rd - &aty));
        let dx = sym(&(h + &st.x * &aty * zinv));
        let mut dzw = Vector::zeros(p.n_in());
        let mut dw = Vector::zeros(p.n_in());
        for k in 0..p.n_in() {
            dzw[k] = rdw[k] + dy[n_eq + k];
            dw[k] = hw[k] - (st.w[k] / st.zw[k]) * dy[n_eq + k];
        }
        Some(Direction { dx, dw, dy, dz, dzw })
    }

    /// Step lengths scaled by `fraction` and capped at one; with `verify`
    /// the matrix steps are confirmed by Cholesky.
    fn step_lengths(&self, st: &State, lx_inv: &Mat, lz_inv: &Mat, dir: &Direction, fraction: f64, verify: bool) -> (f64, f64) {
        let ap = max_step_psd(lx_inv, &dir.dx).min(max_step_vec(&st.w, &dir.dw));
        let ad = max_step_psd(lz_inv, &dir.dz).min(max_step_vec(&st.zw, &dir.dzw));
        let (mut ap, mut ad) = ((fraction * ap).min(1.0), (fraction * ad).min(1.0));
        if verify {
            ap = verified_step(&st.x, &dir.dx, ap);
            ad = verified_step(&st.z, &dir.dz, ad);
        }
        (ap, ad)
    }

    fn run(&self, problem: &SdpProblem) -> Result<SdpSolution> {
        let p = self.p;
        let s = self.s;
        let mut st = self.initial();
        let mut history = Vec::new();
        let mut best: Option<(f64, State)> = None;
        let mut status = SdpStatus::MaxIters;
        let mut iterations = 0;
        let mut stalled = 0;

        for iter in 0..=s.max_iters {
            let (rp, rd, rdw) = self.residuals(&st);
            let m = self.metrics(&st, &rp, &rd, &rdw);
            history.push(SdpIterate {
                primal_value: m.pobj,
                dual_value: m.dobj,
                primal_residual: m.pinf,
                dual_residual: m.dinf,
                mu: m.mu,
            });
            let comp = m.mu * self.nu() / p.c_scale / (1.0 + m.pobj.abs() + m.dobj.abs());
            let merit = m.rel_gap.max(m.pinf).max(m.dinf).max(comp);
            if best.as_ref().is_none_or(|(b, _)| merit < *b) {
                best = Some((merit, clone_state(&st)));
            }
            iterations = iter;
            if m.rel_gap <= s.tol && comp <= s.tol && m.pinf <= s.tol && m.dinf <= s.tol {
                status = SdpStatus::Optimal;
                break;
            }
            if iter == s.max_iters || stalled >= 3 || self.certificate(&st) {
                if self.certificate(&st) {
                    status = SdpStatus::Infeasible;
                }
                break;
            }

            let (Some(cx), Some(cz)) = (chol(&st.x), chol(&st.z)) else { break };
            let lx_inv = lower_inverse(&cx);
            let lz_inv = lower_inverse(&cz);
            let zinv = lz_inv.transpose() * &lz_inv;
            let dl = st.w.component_div(&st.zw);
            let schur = p.schur(&st.x, &zinv, &dl);
            let x_rd_zinv = &st.x * &rd * &zinv;

            let Some(pred) = self.direction(&st, &zinv, &x_rd_zinv, &schur, &rp, &rd, &rdw, 0.0, None) else {
                break;
            };
            let (ap, ad) = self.step_lengths(&st, &lx_inv, &lz_inv, &pred, 1.0, false);
            let xa = &st.x + &pred.dx * ap;
            let za = &st.z + &pred.dz * ad;
            let wa = &st.w + &pred.dw * ap;
            let zwa = &st.zw + &pred.dzw * ad;
            let mu_aff = (xa.dot(&za) + wa.dot(&zwa)) / self.nu();
            let sigma = (mu_aff / m.mu).max(0.0).powi(3).clamp(s.sigma_min, s.sigma_max);

            let Some(dir) =
                self.direction(&st, &zinv, &x_rd_zinv, &schur, &rp, &rd, &rdw, sigma * m.mu, Some(&pred))
            else {
                break;
            };
            let (ap, ad) = self.step_lengths(&st, &lx_inv, &lz_inv, &dir, s.step_fraction, true);
            if ap < 1e-10 && ad < 1e-10 {
                stalled += 1;
            } else {
                stalled = 0;
            }
            st.x = sym(&(&st.x + &dir.dx * ap));
            st.w += &dir.dw * ap;
            st.y += &dir.dy * ad;
            st.z = sym(&(&st.z + &dir.dz * ad));
            st.zw += &dir.dzw * ad;
        }

        if status == SdpStatus::MaxIters {
            if let Some((_, b)) = best.take() {
                st = b;
            }
        }
        let (rp, rd, rdw) = self.residuals(&st);
        let m = self.metrics(&st, &rp, &rd, &rdw);
        let x = recover_complex(&st.x);
        let primal_value = problem.objective_value(&x);
        let unscale = 1.0 / p.c_scale;
        let duals: Vec<f64> = st.y.iter().zip(&p.row_scale).map(|(y, rs)| y * rs * unscale).collect();
        let comp = (st.x.dot(&st.z) + st.w.dot(&st.zw)) * unscale;
        let gap = (primal_value - m.dobj).abs().max(comp.abs());
        Ok(SdpSolution {
            x,
            primal_value,
            dual_value: m.dobj,
            gap,
            rel_gap: (primal_value - m.dobj).abs() / (1.0 + primal_value.abs() + m.dobj.abs()),
            status,
            iterations,
            equality_duals: duals[..p.n_eq].to_vec(),
            inequality_duals: duals[p.n_eq..].to_vec(),
            history,
        })
    }

    /// Farkas-type certificates read off the current iterate.
    fn certificate(&self, st: &State) -> bool {
        const EPS: f64 = 1e-8;
        let p = self.p;
        // primal infeasible: b'y > 0, sum y_k A_k <= 0, y_in >= 0
        let by = p.b.dot(&st.y);
        let ynorm = st.y.norm();
        if by > 0.0 && ynorm > 1e6 * (1.0 + p.c_norm) {
            let yt = &st.y / by;
            let ok_in = (0..p.n_in()).all(|k| yt[p.n_eq + k] >= -EPS);
            if ok_in && p.adjoint(&yt).symmetric_eigenvalues().max() <= EPS {
                return true;
            }
        }
        // dual infeasible: <C, X> < 0 with A(X) - w ~ 0
        let cx = p.c.dot(&st.x);
        if cx < 0.0 && st.x.norm() > 1e8 * (1.0 + p.b_norm) {
            let r = p.apply(&st.x, &st.w) / (-cx);
            if r.norm() <= EPS {
                return true;
            }
        }
        false
    }
}

fn clone_state(st: &State) -> State {
    State { x: st.x.clone(), w: st.w.clone(), y: st.y.clone(), z: st.z.clone(), zw: st.zw.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::trace_product;
    use crate::CMat;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
        let a = random_matrix(rng, n, n);
        (&a + a.adjoint()) * c(0.5)
    }

    fn min_eig(x: &CMat) -> f64 {
        *crate::numerics::hermitian_eig(x).unwrap().values.last().unwrap()
    }

    #[test]
    fn two_by_two_maxcut() {
        let obj = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let mut p = SdpProblem::new(2).with_objective(obj);
        p.add_unit_diagonal(0..2);
        let sol = solve(&p, 1e-7, 100).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_value + 2.0).abs() < 1e-6, "{}", sol.primal_value);
        let expect = CMat::from_row_slice(2, 2, &[c(1.0), c(-1.0), c(-1.0), c(1.0)]);
        assert!((&sol.x - expect).norm() < 1e-6);
    }

    #[test]
    fn trace_lower_bound() {
        let mut p = SdpProblem::new(3).with_objective(CMat::identity(3, 3));
        p.add_inequality(CMat::identity(3, 3), 1.0);
        let sol = solve(&p, 1e-7, 100).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_value - 1.0).abs() < 1e-6);
        assert!((sol.dual_value - 1.0).abs() < 1e-6);
        assert!((sol.inequality_duals[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn detects_primal_infeasibility() {
        // diag(X) = 1 caps tr(X) at 2
        let mut p = SdpProblem::new(2);
        p.add_unit_diagonal(0..2);
        p.add_inequality(CMat::identity(2, 2), 3.0);
        let sol = solve(&p, 1e-7, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let obj = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let mut p = SdpProblem::new(2).with_objective(obj);
        p.add_unit_diagonal(0..2);
        let sol = solve(&p, 1e-12, 2).unwrap();
        assert_eq!(sol.status, SdpStatus::MaxIters);
        assert!(min_eig(&sol.x) >= 0.0);
    }

    #[test]
    fn empty_dimension() {
        let sol = solve(&SdpProblem::new(0), 1e-7, 10).unwrap();
        assert!(sol.is_optimal());
    }

    /// Builds a problem whose optimum is known: X* of rank r, Z* supported on
    /// the orthogonal complement, so complementary slackness holds by
    /// construction. Returns the problem and tr(C X*).
    fn planted(rng: &mut ChaCha8Rng, n: usize, r: usize, n_eq: usize, n_in: usize) -> (SdpProblem, f64) {
        let q = random_matrix(rng, n, n).qr().q();
        let mut x = CMat::zeros(n, n);
        let mut z = CMat::zeros(n, n);
        for k in 0..n {
            let u = q.column(k).into_owned();
            let uu = &u * u.adjoint();
            if k < r {
                x += uu * c(rng.random_range(0.5..2.0));
            } else {
                z += uu * c(rng.random_range(0.5..2.0));
            }
        }
        let mut p = SdpProblem::new(n);
        let mut objective = z;
        for _ in 0..n_eq {
            let a = random_hermitian(rng, n);
            let y: f64 = rng.random_range(-1.0..1.0);
            objective += &a * c(y);
            let b = trace_product(&a, &x);
            p.add_equality(a, b);
        }
        for k in 0..n_in {
            let g = random_hermitian(rng, n);
            let h = trace_product(&g, &x);
            if k % 2 == 0 {
                // active with a positive multiplier
                objective += &g * c(rng.random_range(0.1..1.0));
                p.add_inequality(g, h);
            } else {
                // inactive
                p.add_inequality(g, h - 1.0);
            }
        }
        let truth = trace_product(&objective, &x);
        (p.with_objective(objective), truth)
    }

    #[test]
    fn planted_optima_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..12 {
            let n = 2 + trial % 5;
            let r = 1 + trial % n;
            let n_eq = 1 + trial % 4;
            let (p, truth) = planted(&mut rng, n, r, n_eq, trial % 3);
            let sol = solve(&p, 1e-7, 100).unwrap();
            assert_eq!(sol.status, SdpStatus::Optimal, "trial {trial}");
            assert!(
                (sol.primal_value - truth).abs() <= 1e-6 * (1.0 + truth.abs()),
                "trial {trial}: {} vs {truth}",
                sol.primal_value
            );
            check_solution_invariants(&p, &sol);
        }
    }

    fn check_solution_invariants(p: &SdpProblem, sol: &SdpSolution) {
        let tr = sol.x.trace().re;
        assert!(min_eig(&sol.x) >= -1e-7 * tr.abs().max(1e-300));
        assert!((sol.primal_value - sol.dual_value).abs() <= sol.gap + 1e-15);
        assert!(sol.dual_value <= sol.primal_value + 1e-9 * (1.0 + sol.primal_value.abs()));
        for (a, b) in &p.equalities {
            let r = (trace_product(a, &sol.x) - b).abs();
            assert!(r <= 1e-6 * (1.0 + b.abs()), "equality residual {r}");
        }
        for (g, h) in &p.inequalities {
            assert!(trace_product(g, &sol.x) >= h - 1e-6 * (1.0 + h.abs()));
        }
        assert!((&sol.x - sol.x.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn residuals_shrink_along_the_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (p, _) = planted(&mut rng, 5, 2, 3, 2);
        let sol = solve(&p, 1e-7, 100).unwrap();
        for pair in sol.history.windows(2) {
            assert!(pair[1].primal_residual <= 10.0 * pair[0].primal_residual + 1e-14);
            assert!(pair[1].dual_residual <= 10.0 * pair[0].dual_residual + 1e-14);
        }
        // weak duality on every iterate that is feasible to working precision
        for it in &sol.history {
            if it.primal_residual < 1e-10 && it.dual_residual < 1e-10 {
                assert!(it.dual_value <= it.primal_value + 1e-9 * (1.0 + it.primal_value.abs()));
            }
        }
    }

    /// Unit-modulus shaped instance: PSD objective, unit diagonal.
    fn unit_modulus_instance(rng: &mut ChaCha8Rng, n: usize) -> SdpProblem {
        let a = random_matrix(rng, n, 2);
        let mut p = SdpProblem::new(n).with_objective(&a * a.adjoint() + random_hermitian(rng, n) * c(0.3));
        p.add_unit_diagonal(0..n);
        p
    }

    fn phase_grid_minimum(p: &SdpProblem, levels: usize) -> f64 {
        let n = p.dim;
        let free = n - 1;
        let mut best = f64::INFINITY;
        let mut idx = vec![0usize; free];
        loop {
            let mut v = crate::CVec::from_element(n, c(1.0));
            for (k, &i) in idx.iter().enumerate() {
                v[k] = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / levels as f64);
            }
            let val = (v.adjoint() * &p.objective * &v)[(0, 0)].re;
            best = best.min(val);
            let mut k = 0;
            while k < free {
                idx[k] += 1;
                if idx[k] < levels {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == free {
                return best;
            }
        }
    }

    #[test]
    fn relaxation_lower_bounds_phase_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [2, 3, 4, 5] {
            let p = unit_modulus_instance(&mut rng, n);
            let sol = solve(&p, 1e-7, 100).unwrap();
            assert!(sol.is_optimal());
            assert!(sol.rel_gap <= 1e-7);
            let grid = phase_grid_minimum(&p, 16);
            assert!(sol.primal_value <= grid + 1e-9, "n={n}: {} > {grid}", sol.primal_value);
            check_solution_invariants(&p, &sol);
        }
    }
}
