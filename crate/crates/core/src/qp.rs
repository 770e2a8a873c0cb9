//! Dense convex quadratic programming.
//!
//! Solves problems of the form
//!
//! ```text
//!     minimize    1/2 x' Q x + c' x
//!     subject to  A_eq x  = b_eq
//!                 A_in x <= b_in
//!                 lo <= x <= hi        (entries may be infinite)
//! ```
//!
//! with `Q` symmetric positive semidefinite, via a primal-dual interior-point
//! method with Mehrotra predictor-corrector steps. Bounds are handled
//! natively (they only contribute diagonal terms to the reduced system), the
//! augmented KKT system is factored once per iteration with a Bunch-Kaufman
//! factorization, and a purely equality-constrained problem short-circuits to
//! a single regularized KKT solve with iterative refinement.
//!
//! Linear programs are the `Q = 0` special case. The solver never panics on
//! well-formed input: infeasible, unbounded and iteration-limited outcomes
//! are reported through [`QpStatus`].

use ndarray::{s, Array1, Array2, ArrayView1};
use thiserror::Error;

/// Structural problems with the input itself. Solvability outcomes are in
/// [`QpStatus`], not here.
#[derive(Debug, Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("bound lo[{idx}] = {lo} exceeds hi[{idx}] = {hi}")]
    InvalidBounds { idx: usize, lo: f64, hi: f64 },
    #[error("KKT factorization failed beyond recovery")]
    Factorization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
}

/// A dense QP instance. Constraint blocks may be empty (zero rows).
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub q: Array2<f64>,
    pub c: Array1<f64>,
    pub a_eq: Array2<f64>,
    pub b_eq: Array1<f64>,
    pub a_in: Array2<f64>,
    pub b_in: Array1<f64>,
    pub lo: Array1<f64>,
    pub hi: Array1<f64>,
}

impl QpProblem {
    /// An unconstrained zero-objective problem in `n` variables.
    pub fn new(n: usize) -> Self {
        QpProblem {
            q: Array2::zeros((n, n)),
            c: Array1::zeros(n),
            a_eq: Array2::zeros((0, n)),
            b_eq: Array1::zeros(0),
            a_in: Array2::zeros((0, n)),
            b_in: Array1::zeros(0),
            lo: Array1::from_elem(n, f64::NEG_INFINITY),
            hi: Array1::from_elem(n, f64::INFINITY),
        }
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.n();
        if self.q.dim() != (n, n) {
            return Err(QpError::Dimension(format!(
                "Q is {:?}, expected ({n}, {n})",
                self.q.dim()
            )));
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return Err(QpError::Dimension(format!(
                "A_eq {:?} vs b_eq {}",
                self.a_eq.dim(),
                self.b_eq.len()
            )));
        }
        if self.a_in.ncols() != n || self.a_in.nrows() != self.b_in.len() {
            return Err(QpError::Dimension(format!(
                "A_in {:?} vs b_in {}",
                self.a_in.dim(),
                self.b_in.len()
            )));
        }
        if self.lo.len() != n || self.hi.len() != n {
            return Err(QpError::Dimension("bound vectors".into()));
        }
        for (name, arr) in [("Q", &self.q), ("A_eq", &self.a_eq), ("A_in", &self.a_in)] {
            if arr.iter().any(|v| !v.is_finite()) {
                return Err(QpError::NonFinite(name));
            }
        }
        for (name, arr) in [("c", &self.c), ("b_eq", &self.b_eq), ("b_in", &self.b_in)] {
            if arr.iter().any(|v| !v.is_finite()) {
                return Err(QpError::NonFinite(name));
            }
        }
        if self.lo.iter().chain(self.hi.iter()).any(|v| v.is_nan()) {
            return Err(QpError::NonFinite("bounds"));
        }
        for i in 0..n {
            if self.lo[i] > self.hi[i] {
                return Err(QpError::InvalidBounds {
                    idx: i,
                    lo: self.lo[i],
                    hi: self.hi[i],
                });
            }
        }
        Ok(())
    }

    /// Objective value at `x` using the symmetrized `Q`.
    pub fn objective(&self, x: &Array1<f64>) -> f64 {
        let qx = self.q.dot(x);
        let xqx = x.dot(&qx);
        let xtq = self.q.t().dot(x).dot(x);
        0.25 * (xqx + xtq) + self.c.dot(x)
    }
}

/// Solver knobs. `tol` is an absolute max-norm bound on every KKT residual
/// block (stationarity, primal feasibility, complementarity products).
#[derive(Debug, Clone, Copy)]
pub struct QpOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Iterate-norm threshold used to flag divergence: dual blow-up is
    /// reported as infeasible, primal blow-up as unbounded.
    pub divergence: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            tol: 1e-8,
            max_iters: 150,
            divergence: 1e10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Array1<f64>,
    /// Multipliers of the equality constraints, one per row of `A_eq`.
    pub eq_duals: Array1<f64>,
    /// Multipliers of the inequality rows (nonnegative at optimality).
    pub in_duals: Array1<f64>,
    /// Multipliers of the finite lower/upper bounds, zero where infinite.
    pub lower_duals: Array1<f64>,
    pub upper_duals: Array1<f64>,
    pub objective: f64,
    pub status: QpStatus,
    /// Max-norm over all KKT residual blocks at the returned iterate.
    pub kkt_residual: f64,
    pub iterations: usize,
}

pub fn solve(problem: &QpProblem, tol: f64) -> Result<QpSolution, QpError> {
    solve_with(
        problem,
        &QpOptions {
            tol,
            ..QpOptions::default()
        },
    )
}

pub fn solve_with(problem: &QpProblem, opts: &QpOptions) -> Result<QpSolution, QpError> {
    problem.validate()?;
    let n = problem.n();
    let q = symmetrized(&problem.q);
    let lo_idx: Vec<usize> = (0..n).filter(|&i| problem.lo[i].is_finite()).collect();
    let hi_idx: Vec<usize> = (0..n).filter(|&i| problem.hi[i].is_finite()).collect();
    let mi = problem.a_in.nrows();
    if mi == 0 && lo_idx.is_empty() && hi_idx.is_empty() {
        return solve_equality(problem, &q, opts);
    }
    Ipm::new(problem, q, lo_idx, hi_idx, *opts).run()
}

fn symmetrized(q: &Array2<f64>) -> Array2<f64> {
    let mut s = q.clone();
    s += &q.t();
    s *= 0.5;
    s
}

fn inf_norm(v: ArrayView1<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Largest step `alpha <= 1` keeping `v + alpha*dv` nonnegative, with a
/// fraction-to-the-boundary factor.
fn step_length(v: &Array1<f64>, dv: &Array1<f64>, tau: f64) -> f64 {
    let mut alpha = 1.0f64;
    for (vi, di) in v.iter().zip(dv.iter()) {
        if *di < 0.0 {
            alpha = alpha.min(-tau * vi / di);
        }
    }
    alpha.max(0.0)
}

/// Symmetric indefinite factorization (LAPACK Bunch-Kaufman) of the
/// augmented system `[[M, A'], [A, -delta I]]`.
struct KktFactor {
    packed: Vec<f64>,
    ipiv: Vec<i32>,
    n: usize,
    dim: usize,
}

impl KktFactor {
    fn build(m: &Array2<f64>, a_eq: &Array2<f64>, delta: f64) -> Result<Self, QpError> {
        let n = m.nrows();
        let me = a_eq.nrows();
        let dim = n + me;
        let mut kkt = Array2::zeros((dim, dim));
        kkt.slice_mut(s![..n, ..n]).assign(m);
        if me > 0 {
            kkt.slice_mut(s![n.., ..n]).assign(a_eq);
            kkt.slice_mut(s![..n, n..]).assign(&a_eq.t());
        }
        for i in 0..n {
            kkt[[i, i]] += delta;
        }
        for i in n..dim {
            kkt[[i, i]] -= delta;
        }
        // The matrix is symmetric, so row-major storage doubles as
        // column-major and LAPACK can consume it directly.
        let mut packed = kkt.into_raw_vec_and_offset().0;
        let mut ipiv = vec![0i32; dim.max(1)];
        let lda = dim.max(1) as i32;
        let mut info = 0i32;
        let lwork = (64 * dim.max(1)) as i32;
        let mut work = vec![0f64; lwork as usize];
        unsafe {
            lapack::dsytrf(
                b'L',
                dim as i32,
                &mut packed,
                lda,
                &mut ipiv,
                &mut work,
                lwork,
                &mut info,
            );
        }
        if info != 0 {
            return Err(QpError::Factorization);
        }
        Ok(KktFactor {
            packed,
            ipiv,
            n,
            dim,
        })
    }

    /// Solve for (dx, dy) given the stacked right-hand side.
    fn solve(
        &self,
        rhs_x: &Array1<f64>,
        rhs_y: &Array1<f64>,
    ) -> Result<(Array1<f64>, Array1<f64>), QpError> {
        let mut rhs = vec![0f64; self.dim];
        rhs[..self.n].copy_from_slice(rhs_x.as_slice().unwrap());
        rhs[self.n..].copy_from_slice(rhs_y.as_slice().unwrap());
        let mut info = 0i32;
        let lda = self.dim.max(1) as i32;
        unsafe {
            lapack::dsytrs(
                b'L',
                self.dim as i32,
                1,
                &self.packed,
                lda,
                &self.ipiv,
                &mut rhs,
                lda,
                &mut info,
            );
        }
        if info != 0 {
            return Err(QpError::Factorization);
        }
        let dx = Array1::from_iter(rhs[..self.n].iter().copied());
        let dy = Array1::from_iter(rhs[self.n..].iter().copied());
        Ok((dx, dy))
    }
}

const STATIC_REG: f64 = 1e-10;

/// Equality-constrained (or unconstrained) case: one regularized KKT solve
/// plus iterative refinement. Unboundedness shows up as iterate blow-up.
fn solve_equality(
    problem: &QpProblem,
    q: &Array2<f64>,
    opts: &QpOptions,
) -> Result<QpSolution, QpError> {
    let n = problem.n();
    let me = problem.a_eq.nrows();
    let factor = KktFactor::build(q, &problem.a_eq, STATIC_REG)?;
    let mut x = Array1::zeros(n);
    let mut y = Array1::zeros(me);
    let mut residual = f64::INFINITY;
    for _ in 0..3 {
        let r_d = q.dot(&x) + &problem.c + problem.a_eq.t().dot(&y);
        let r_p = problem.a_eq.dot(&x) - &problem.b_eq;
        residual = inf_norm(r_d.view()).max(inf_norm(r_p.view()));
        if residual <= opts.tol {
            break;
        }
        let (dx, dy) = factor.solve(&(-&r_d), &(-&r_p))?;
        x += &dx;
        y += &dy;
    }
    let r_d = q.dot(&x) + &problem.c + problem.a_eq.t().dot(&y);
    let r_p = problem.a_eq.dot(&x) - &problem.b_eq;
    residual = inf_norm(r_d.view()).max(inf_norm(r_p.view()));
    let status = if inf_norm(x.view()) > opts.divergence {
        QpStatus::Unbounded
    } else if residual <= opts.tol {
        QpStatus::Optimal
    } else if inf_norm(y.view()) > opts.divergence {
        QpStatus::Infeasible
    } else {
        QpStatus::MaxIterations
    };
    Ok(QpSolution {
        objective: problem.objective(&x),
        x,
        eq_duals: y,
        in_duals: Array1::zeros(0),
        lower_duals: Array1::zeros(n),
        upper_duals: Array1::zeros(n),
        status,
        kkt_residual: residual,
        iterations: 1,
    })
}

/// Interior-point state for problems with at least one inequality or bound.
struct Ipm<'a> {
    p: &'a QpProblem,
    q: Array2<f64>,
    lo_idx: Vec<usize>,
    hi_idx: Vec<usize>,
    opts: QpOptions,
    x: Array1<f64>,
    y: Array1<f64>,
    // general inequality slacks/duals
    sg: Array1<f64>,
    zg: Array1<f64>,
    // bound slacks/duals, compacted over the finite-bound coordinates
    sl: Array1<f64>,
    zl: Array1<f64>,
    su: Array1<f64>,
    zu: Array1<f64>,
}

struct Residuals {
    r_d: Array1<f64>,
    r_p: Array1<f64>,
    r_g: Array1<f64>,
    r_l: Array1<f64>,
    r_u: Array1<f64>,
    comp_max: f64,
    norm: f64,
}

impl<'a> Ipm<'a> {
    fn new(
        p: &'a QpProblem,
        q: Array2<f64>,
        lo_idx: Vec<usize>,
        hi_idx: Vec<usize>,
        opts: QpOptions,
    ) -> Self {
        let n = p.n();
        let mi = p.a_in.nrows();
        Ipm {
            p,
            q,
            x: Array1::zeros(n),
            y: Array1::zeros(p.a_eq.nrows()),
            sg: Array1::ones(mi),
            zg: Array1::ones(mi),
            sl: Array1::ones(lo_idx.len()),
            zl: Array1::ones(lo_idx.len()),
            su: Array1::ones(hi_idx.len()),
            zu: Array1::ones(hi_idx.len()),
            lo_idx,
            hi_idx,
            opts,
        }
    }

    fn pairs(&self) -> usize {
        self.sg.len() + self.sl.len() + self.su.len()
    }

    fn gather(&self, idx: &[usize]) -> Array1<f64> {
        Array1::from_iter(idx.iter().map(|&i| self.x[i]))
    }

    fn residuals(&self) -> Residuals {
        let p = self.p;
        let mut r_d = self.q.dot(&self.x) + &p.c;
        if p.a_eq.nrows() > 0 {
            r_d += &p.a_eq.t().dot(&self.y);
        }
        if p.a_in.nrows() > 0 {
            r_d += &p.a_in.t().dot(&self.zg);
        }
        for (k, &i) in self.lo_idx.iter().enumerate() {
            r_d[i] -= self.zl[k];
        }
        for (k, &i) in self.hi_idx.iter().enumerate() {
            r_d[i] += self.zu[k];
        }
        let r_p = p.a_eq.dot(&self.x) - &p.b_eq;
        let r_g = if p.a_in.nrows() > 0 {
            p.a_in.dot(&self.x) + &self.sg - &p.b_in
        } else {
            Array1::zeros(0)
        };
        let lo_vals = Array1::from_iter(self.lo_idx.iter().map(|&i| p.lo[i]));
        let hi_vals = Array1::from_iter(self.hi_idx.iter().map(|&i| p.hi[i]));
        let r_l = self.gather(&self.lo_idx) - &self.sl - &lo_vals;
        let r_u = self.gather(&self.hi_idx) + &self.su - &hi_vals;
        let comp_max = self
            .sg
            .iter()
            .zip(self.zg.iter())
            .chain(self.sl.iter().zip(self.zl.iter()))
            .chain(self.su.iter().zip(self.zu.iter()))
            .fold(0.0f64, |m, (s, z)| m.max((s * z).abs()));
        let norm = inf_norm(r_d.view())
            .max(inf_norm(r_p.view()))
            .max(inf_norm(r_g.view()))
            .max(inf_norm(r_l.view()))
            .max(inf_norm(r_u.view()))
            .max(comp_max);
        Residuals {
            r_d,
            r_p,
            r_g,
            r_l,
            r_u,
            comp_max,
            norm,
        }
    }

    /// Warm the primal block with an equality-regularized solve so the first
    /// interior iterates start near the affine manifold.
    fn initialize(&mut self) -> Result<(), QpError> {
        let delta0 = 1e-6;
        let mut m = self.q.clone();
        for i in 0..m.nrows() {
            m[[i, i]] += 1.0;
        }
        if let Ok(factor) = KktFactor::build(&m, &self.p.a_eq, delta0) {
            if let Ok((x0, y0)) = factor.solve(&(-self.p.c.clone()), &self.p.b_eq.clone()) {
                if x0.iter().all(|v| v.is_finite()) {
                    self.x = x0;
                    self.y = y0;
                }
            }
        }
        if self.p.a_in.nrows() > 0 {
            let slack = &self.p.b_in - &self.p.a_in.dot(&self.x);
            self.sg = slack.mapv(|v| v.max(1.0));
        }
        for (k, &i) in self.lo_idx.iter().enumerate() {
            self.sl[k] = (self.x[i] - self.p.lo[i]).max(1.0);
        }
        for (k, &i) in self.hi_idx.iter().enumerate() {
            self.su[k] = (self.p.hi[i] - self.x[i]).max(1.0);
        }
        Ok(())
    }

    fn run(mut self) -> Result<QpSolution, QpError> {
        self.initialize()?;
        let n = self.p.n();
        let mi = self.p.a_in.nrows();
        let m_tot = self.pairs() as f64;
        let mut best: Option<(f64, QpSolution)> = None;
        let mut iterations = 0;
        let mut status = QpStatus::MaxIterations;
        for iter in 0..self.opts.max_iters {
            iterations = iter;
            let res = self.residuals();
            if best.as_ref().map_or(true, |(b, _)| res.norm < *b) {
                best = Some((res.norm, self.snapshot(res.norm, iter)));
            }
            if res.norm <= self.opts.tol {
                status = QpStatus::Optimal;
                break;
            }
            if inf_norm(self.x.view()) > self.opts.divergence {
                status = QpStatus::Unbounded;
                break;
            }
            if inf_norm(self.y.view()).max(inf_norm(self.zg.view())) > self.opts.divergence
                || inf_norm(self.zl.view()).max(inf_norm(self.zu.view())) > self.opts.divergence
            {
                status = QpStatus::Infeasible;
                break;
            }

            // reduced matrix M = Q + G' D G + diag over finite bounds
            let mut m = self.q.clone();
            if mi > 0 {
                let d = &self.zg / &self.sg;
                let mut scaled = self.p.a_in.clone();
                for (mut row, di) in scaled.rows_mut().into_iter().zip(d.iter()) {
                    row *= *di;
                }
                m += &self.p.a_in.t().dot(&scaled);
            }
            for (k, &i) in self.lo_idx.iter().enumerate() {
                m[[i, i]] += self.zl[k] / self.sl[k];
            }
            for (k, &i) in self.hi_idx.iter().enumerate() {
                m[[i, i]] += self.zu[k] / self.su[k];
            }
            let factor = match KktFactor::build(&m, &self.p.a_eq, STATIC_REG) {
                Ok(f) => f,
                Err(_) => KktFactor::build(&m, &self.p.a_eq, 1e-6)?,
            };

            let mu = if m_tot > 0.0 {
                (self.sg.dot(&self.zg) + self.sl.dot(&self.zl) + self.su.dot(&self.zu)) / m_tot
            } else {
                0.0
            };

            // predictor (affine scaling) direction
            let rc_g = &self.sg * &self.zg;
            let rc_l = &self.sl * &self.zl;
            let rc_u = &self.su * &self.zu;
            let aff = self.direction(&factor, &res, &rc_g, &rc_l, &rc_u)?;
            let tau = 0.995;
            let ap_aff = self.primal_step(&aff, 1.0);
            let ad_aff = self.dual_step(&aff, 1.0);
            let mu_aff = self.mu_after(&aff, ap_aff, ad_aff, m_tot);
            let sigma = if mu > 0.0 {
                ((mu_aff / mu).max(0.0).min(1.0)).powi(3)
            } else {
                0.0
            };

            // corrector
            let rc_g2 = &rc_g + &(&aff.ds_g * &aff.dz_g) - sigma * mu;
            let rc_l2 = &rc_l + &(&aff.ds_l * &aff.dz_l) - sigma * mu;
            let rc_u2 = &rc_u + &(&aff.ds_u * &aff.dz_u) - sigma * mu;
            let dir = self.direction(&factor, &res, &rc_g2, &rc_l2, &rc_u2)?;
            let ap = self.primal_step(&dir, tau);
            let ad = self.dual_step(&dir, tau);

            self.x += &(ap * &dir.dx);
            self.y += &(ad * &dir.dy);
            self.sg += &(ap * &dir.ds_g);
            self.zg += &(ad * &dir.dz_g);
            self.sl += &(ap * &dir.ds_l);
            self.zl += &(ad * &dir.dz_l);
            self.su += &(ap * &dir.ds_u);
            self.zu += &(ad * &dir.dz_u);
        }
        let res = self.residuals();
        let final_better = best.as_ref().map_or(true, |(b, _)| res.norm <= *b);
        let mut sol = if final_better || status != QpStatus::MaxIterations {
            self.snapshot(res.norm, iterations)
        } else {
            best.unwrap().1
        };
        sol.status = status;
        Ok(sol)
    }

    fn snapshot(&self, residual: f64, iterations: usize) -> QpSolution {
        let n = self.p.n();
        let mut lower = Array1::zeros(n);
        for (k, &i) in self.lo_idx.iter().enumerate() {
            lower[i] = self.zl[k];
        }
        let mut upper = Array1::zeros(n);
        for (k, &i) in self.hi_idx.iter().enumerate() {
            upper[i] = self.zu[k];
        }
        QpSolution {
            objective: self.p.objective(&self.x),
            x: self.x.clone(),
            eq_duals: self.y.clone(),
            in_duals: self.zg.clone(),
            lower_duals: lower,
            upper_duals: upper,
            status: QpStatus::Optimal,
            kkt_residual: residual,
            iterations,
        }
    }

    fn direction(
        &self,
        factor: &KktFactor,
        res: &Residuals,
        rc_g: &Array1<f64>,
        rc_l: &Array1<f64>,
        rc_u: &Array1<f64>,
    ) -> Result<Direction, QpError> {
        let p = self.p;
        let mut rhs_x = -res.r_d.clone();
        if p.a_in.nrows() > 0 {
            let w = (rc_g - &(&self.zg * &res.r_g)) / &self.sg;
            rhs_x += &p.a_in.t().dot(&w);
        }
        for (k, &i) in self.lo_idx.iter().enumerate() {
            rhs_x[i] -= (rc_l[k] + self.zl[k] * res.r_l[k]) / self.sl[k];
        }
        for (k, &i) in self.hi_idx.iter().enumerate() {
            rhs_x[i] += (rc_u[k] - self.zu[k] * res.r_u[k]) / self.su[k];
        }
        let (dx, dy) = factor.solve(&rhs_x, &(-res.r_p.clone()))?;
        let (ds_g, dz_g) = if p.a_in.nrows() > 0 {
            let ds = -&res.r_g - &p.a_in.dot(&dx);
            let dz = (-rc_g - &(&self.zg * &ds)) / &self.sg;
            (ds, dz)
        } else {
            (Array1::zeros(0), Array1::zeros(0))
        };
        let dxl = Array1::from_iter(self.lo_idx.iter().map(|&i| dx[i]));
        let ds_l = &dxl + &res.r_l;
        let dz_l = (-rc_l - &(&self.zl * &ds_l)) / &self.sl;
        let dxu = Array1::from_iter(self.hi_idx.iter().map(|&i| dx[i]));
        let ds_u = -&dxu - &res.r_u;
        let dz_u = (-rc_u - &(&self.zu * &ds_u)) / &self.su;
        Ok(Direction {
            dx,
            dy,
            ds_g,
            dz_g,
            ds_l,
            dz_l,
            ds_u,
            dz_u,
        })
    }

    fn primal_step(&self, d: &Direction, tau: f64) -> f64 {
        step_length(&self.sg, &d.ds_g, tau)
            .min(step_length(&self.sl, &d.ds_l, tau))
            .min(step_length(&self.su, &d.ds_u, tau))
    }

    fn dual_step(&self, d: &Direction, tau: f64) -> f64 {
        step_length(&self.zg, &d.dz_g, tau)
            .min(step_length(&self.zl, &d.dz_l, tau))
            .min(step_length(&self.zu, &d.dz_u, tau))
    }

    fn mu_after(&self, d: &Direction, ap: f64, ad: f64, m_tot: f64) -> f64 {
        if m_tot == 0.0 {
            return 0.0;
        }
        let dot3 = |s: &Array1<f64>, ds: &Array1<f64>, z: &Array1<f64>, dz: &Array1<f64>| {
            (s + &(ap * ds)).dot(&(z + &(ad * dz)))
        };
        (dot3(&self.sg, &d.ds_g, &self.zg, &d.dz_g)
            + dot3(&self.sl, &d.ds_l, &self.zl, &d.dz_l)
            + dot3(&self.su, &d.ds_u, &self.zu, &d.dz_u))
            / m_tot
    }
}

struct Direction {
    dx: Array1<f64>,
    dy: Array1<f64>,
    ds_g: Array1<f64>,
    dz_g: Array1<f64>,
    ds_l: Array1<f64>,
    dz_l: Array1<f64>,
    ds_u: Array1<f64>,
    dz_u: Array1<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn unconstrained_quadratic() {
        // min x^2 - 2x -> x = 1, objective -1
        let mut p = QpProblem::new(1);
        p.q[[0, 0]] = 2.0;
        p.c[0] = -2.0;
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_close(sol.x[0], 1.0, 1e-7);
        assert_close(sol.objective, -1.0, 1e-7);
    }

    #[test]
    fn equality_constrained_symmetric() {
        // min x^2 + y^2 s.t. x + y = 2 -> (1, 1), objective 2
        let mut p = QpProblem::new(2);
        p.q = array![[2.0, 0.0], [0.0, 2.0]];
        p.a_eq = array![[1.0, 1.0]];
        p.b_eq = array![2.0];
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_close(sol.x[0], 1.0, 1e-7);
        assert_close(sol.x[1], 1.0, 1e-7);
        assert_close(sol.objective, 2.0, 1e-7);
    }

    #[test]
    fn inequality_and_bounds() {
        // min 1/2 x'Qx + c'x, Q = 2I, c = (-2, -4), x >= 0, x1 + x2 <= 1.
        // Projection of the unconstrained optimum (1, 2) onto the simplex
        // face x1 + x2 = 1 gives (0, 1) with objective -3.
        let mut p = QpProblem::new(2);
        p.q = array![[2.0, 0.0], [0.0, 2.0]];
        p.c = array![-2.0, -4.0];
        p.a_in = array![[1.0, 1.0]];
        p.b_in = array![1.0];
        p.lo = array![0.0, 0.0];
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        // the lower bound on x1 is weakly active (zero multiplier), so the
        // primal iterate only reaches it to O(sqrt(tol)); the objective is
        // second-order accurate
        assert_close(sol.x[0], 0.0, 1e-4);
        assert_close(sol.x[1], 1.0, 1e-4);
        assert_close(sol.objective, -3.0, 1e-7);
        assert!(sol.kkt_residual <= 1e-8);
        // dual feasibility
        assert!(sol.in_duals.iter().all(|z| *z >= -1e-8));
    }

    #[test]
    fn linear_program_as_zero_q() {
        // min -x s.t. x <= 1, x >= 0
        let mut p = QpProblem::new(1);
        p.c[0] = -1.0;
        p.lo[0] = 0.0;
        p.hi[0] = 1.0;
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_close(sol.x[0], 1.0, 1e-7);
    }

    #[test]
    fn infeasible_is_flagged() {
        // x <= -1 and -x <= -1 cannot both hold
        let mut p = QpProblem::new(1);
        p.q[[0, 0]] = 2.0;
        p.a_in = array![[1.0], [-1.0]];
        p.b_in = array![-1.0, -1.0];
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn unbounded_is_flagged() {
        // min -x with only x >= 0
        let mut p = QpProblem::new(1);
        p.c[0] = -1.0;
        p.lo[0] = 0.0;
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Unbounded);
    }

    #[test]
    fn unbounded_unconstrained_linear() {
        let mut p = QpProblem::new(1);
        p.c[0] = 1.0;
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Unbounded);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut p = QpProblem::new(2);
        p.b_eq = array![1.0];
        assert!(matches!(solve(&p, 1e-8), Err(QpError::Dimension(_))));
    }

    #[test]
    fn inverted_bounds_rejected() {
        let mut p = QpProblem::new(1);
        p.lo[0] = 1.0;
        p.hi[0] = -1.0;
        assert!(matches!(
            solve(&p, 1e-8),
            Err(QpError::InvalidBounds { .. })
        ));
    }

    #[test]
    fn asymmetric_q_is_symmetrized() {
        // Q = [[2, 2], [0, 2]] acts like [[2, 1], [1, 2]]
        let mut p = QpProblem::new(2);
        p.q = array![[2.0, 2.0], [0.0, 2.0]];
        p.c = array![-3.0, -3.0];
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_close(sol.x[0], 1.0, 1e-7);
        assert_close(sol.x[1], 1.0, 1e-7);
    }

    #[test]
    fn equality_duals_have_shadow_price_meaning() {
        // min (x-3)^2 s.t. x = 1: gradient 2(x-3) = -4 must be balanced by
        // the equality dual, objective sensitivity d obj / d b = -y = -4.
        let mut p = QpProblem::new(1);
        p.q[[0, 0]] = 2.0;
        p.c[0] = -6.0;
        p.a_eq = array![[1.0]];
        p.b_eq = array![1.0];
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_close(sol.x[0], 1.0, 1e-9);
        assert_close(sol.eq_duals[0], 4.0, 1e-7);
    }
}
