//! Test oracles for the market-clearing workspace.
//!
//! The centerpiece is a brute-force active-set enumeration solver for small
//! dense QPs: it tries every subset of inequality constraints as the active
//! set, solves the resulting equality-constrained KKT system by Gaussian
//! elimination, and keeps the best primal-dual feasible candidate. It shares
//! only the problem *types* with the production solver; the algorithm and the
//! linear algebra are independent.

use drclear_core::qp::QpProblem;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Optimum found by enumeration, or `None` when no subset yields a
/// primal-dual feasible point (infeasible instance).
#[derive(Debug, Clone)]
pub struct EnumSolution {
    pub x: Array1<f64>,
    pub objective: f64,
    pub active: Vec<usize>,
}

const FEAS_TOL: f64 = 1e-7;

/// Gaussian elimination with partial pivoting; `None` when the system is
/// numerically singular.
fn dense_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut rhs = b.clone();
    for col in 0..n {
        let mut pivot = col;
        let mut best = m[[col, col]].abs();
        for row in col + 1..n {
            let v = m[[row, col]].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best < 1e-12 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                let tmp = m[[col, k]];
                m[[col, k]] = m[[pivot, k]];
                m[[pivot, k]] = tmp;
            }
            rhs.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = m[[row, col]] / m[[col, col]];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[[row, k]] -= f * m[[col, k]];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = Array1::zeros(n);
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[[row, k]] * x[k];
        }
        x[row] = acc / m[[row, row]];
    }
    Some(x)
}

/// All inequality rows of the problem: explicit `A_in` rows followed by
/// finite upper bounds (`x_i <= hi_i`) and finite lower bounds
/// (`-x_i <= -lo_i`).
fn inequality_rows(p: &QpProblem) -> (Array2<f64>, Array1<f64>) {
    let n = p.n();
    let mut rows: Vec<f64> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for (row, b) in p.a_in.rows().into_iter().zip(p.b_in.iter()) {
        rows.extend(row.iter().copied());
        rhs.push(*b);
    }
    for i in 0..n {
        if p.hi[i].is_finite() {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            rows.extend(r);
            rhs.push(p.hi[i]);
        }
    }
    for i in 0..n {
        if p.lo[i].is_finite() {
            let mut r = vec![0.0; n];
            r[i] = -1.0;
            rows.extend(r);
            rhs.push(-p.lo[i]);
        }
    }
    let m = rhs.len();
    (
        Array2::from_shape_vec((m, n), rows).unwrap(),
        Array1::from_vec(rhs),
    )
}

/// Solve the QP exactly by enumerating active sets. Only sensible for
/// strictly convex objectives and a small number of inequality rows (the
/// cost is `2^m` KKT solves).
pub fn enumerate_optimum(p: &QpProblem) -> Option<EnumSolution> {
    let n = p.n();
    let me = p.a_eq.nrows();
    let (g, h) = inequality_rows(p);
    let m = g.nrows();
    assert!(m <= 20, "enumeration oracle limited to 20 inequality rows");
    let mut qs = p.q.clone();
    qs += &p.q.t();
    qs *= 0.5;

    let mut best: Option<EnumSolution> = None;
    for mask in 0u32..(1u32 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let na = active.len();
        if na > n {
            continue;
        }
        let dim = n + me + na;
        let mut kkt = Array2::zeros((dim, dim));
        let mut rhs = Array1::zeros(dim);
        for i in 0..n {
            for j in 0..n {
                kkt[[i, j]] = qs[[i, j]];
            }
            rhs[i] = -p.c[i];
        }
        for (r, row) in p.a_eq.rows().into_iter().enumerate() {
            for j in 0..n {
                kkt[[n + r, j]] = row[j];
                kkt[[j, n + r]] = row[j];
            }
            rhs[n + r] = p.b_eq[r];
        }
        for (k, &a) in active.iter().enumerate() {
            for j in 0..n {
                kkt[[n + me + k, j]] = g[[a, j]];
                kkt[[j, n + me + k]] = g[[a, j]];
            }
            rhs[n + me + k] = h[a];
        }
        let Some(sol) = dense_solve(&kkt, &rhs) else {
            continue;
        };
        let x = sol.slice(ndarray::s![..n]).to_owned();
        // dual feasibility of active multipliers (sign convention: stationarity
        // Qx + c + A'y + G'z = 0 with z >= 0)
        let duals_ok = (0..na).all(|k| sol[n + me + k] >= -FEAS_TOL);
        if !duals_ok {
            continue;
        }
        let primal_ok = (0..m).all(|r| {
            let gx: f64 = (0..n).map(|j| g[[r, j]] * x[j]).sum();
            gx <= h[r] + FEAS_TOL
        });
        if !primal_ok {
            continue;
        }
        let eq_ok = p
            .a_eq
            .rows()
            .into_iter()
            .zip(p.b_eq.iter())
            .all(|(row, b)| {
                let ax: f64 = row.iter().zip(x.iter()).map(|(a, v)| a * v).sum();
                (ax - b).abs() <= FEAS_TOL
            });
        if !eq_ok {
            continue;
        }
        let objective = {
            let qx = qs.dot(&x);
            0.5 * x.dot(&qx) + p.c.dot(&x)
        };
        if best.as_ref().map_or(true, |b| objective < b.objective) {
            best = Some(EnumSolution {
                x,
                objective,
                active,
            });
        }
    }
    best
}

/// Draw a feasible, strictly convex random QP: `Q = M'M + d I`, equality and
/// inequality rows anchored at a random interior point. Instances stay small
/// enough for [`enumerate_optimum`].
pub fn random_instance(rng: &mut ChaCha8Rng) -> QpProblem {
    let n = rng.gen_range(1..=20usize);
    let me = if n > 1 {
        rng.gen_range(0..n.min(4))
    } else {
        0
    };
    let mi = rng.gen_range(0..=8usize);
    let mut p = QpProblem::new(n);
    let mut m = Array2::zeros((n, n));
    for v in m.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let d = rng.gen_range(0.1..2.0);
    let mut q = m.t().dot(&m);
    for i in 0..n {
        q[[i, i]] += d;
    }
    p.q = q;
    for v in p.c.iter_mut() {
        *v = rng.gen_range(-5.0..5.0);
    }
    let x0 = Array1::from_iter((0..n).map(|_| rng.gen_range(-2.0..2.0)));
    if me > 0 {
        let mut a = Array2::zeros((me, n));
        for v in a.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        p.b_eq = a.dot(&x0);
        p.a_eq = a;
    }
    if mi > 0 {
        let mut g = Array2::zeros((mi, n));
        for v in g.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let slack = Array1::from_iter((0..mi).map(|_| rng.gen_range(0.0..2.0)));
        p.b_in = g.dot(&x0) + &slack;
        p.a_in = g;
    }
    p
}

/// Seeded generator stream for reproducible instance sequences.
pub fn instance_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn oracle_matches_hand_solution() {
        // min 1/2 x'Qx + c'x, Q = 2I, c = (-2, -4), x >= 0, x1 + x2 <= 1
        let mut p = QpProblem::new(2);
        p.q = array![[2.0, 0.0], [0.0, 2.0]];
        p.c = array![-2.0, -4.0];
        p.a_in = array![[1.0, 1.0]];
        p.b_in = array![1.0];
        p.lo = array![0.0, 0.0];
        let sol = enumerate_optimum(&p).unwrap();
        assert!((sol.objective - (-3.0)).abs() < 1e-9);
        assert!(sol.x[0].abs() < 1e-9);
        assert!((sol.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_detects_infeasible() {
        let mut p = QpProblem::new(1);
        p.q[[0, 0]] = 2.0;
        p.a_in = array![[1.0], [-1.0]];
        p.b_in = array![-1.0, -1.0];
        assert!(enumerate_optimum(&p).is_none());
    }

    #[test]
    fn random_instances_are_feasible_and_bounded() {
        let mut rng = instance_rng(7);
        for _ in 0..25 {
            let p = random_instance(&mut rng);
            assert!(enumerate_optimum(&p).is_some());
        }
    }
}
