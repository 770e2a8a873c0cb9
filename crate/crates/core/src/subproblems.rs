//! Per-iteration Lagrangian minimizations.
//!
//! Given the current multipliers, the dual function splits into the market
//! operator's DC-OPF piece (dispatch generators and aggregator consumption
//! against cost minus multiplier revenue) and one piece per aggregator, which
//! further splits into independent per-appliance problems with a closed-form
//! greedy solution.
//!
//! The multiplier `mu[j][t]` prices aggregator `j`'s consumption at slot `t`
//! in $/MWh. Appliances are scheduled in kWh; the single kWh->MW conversion
//! (divide by 1000, one-hour slots) happens in [`aggregator_respond`] so that
//! everything crossing the MO boundary is in MW and $.

use crate::exec;
use crate::model::{
    build_admittance, build_flow_matrix, build_incidence, AggregatorModel, AggregatorSite,
    ApplianceSpec, NetworkModel,
};
use crate::qp::{self, QpError, QpProblem, QpStatus};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lagrange multipliers of the aggregator-users balance, one per
/// (aggregator, slot), stored row-major by aggregator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierField {
    n_aggregators: usize,
    horizon: usize,
    values: Vec<f64>,
}

impl MultiplierField {
    pub fn zeros(n_aggregators: usize, horizon: usize) -> Self {
        MultiplierField {
            n_aggregators,
            horizon,
            values: vec![0.0; n_aggregators * horizon],
        }
    }

    pub fn from_values(n_aggregators: usize, horizon: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_aggregators * horizon);
        MultiplierField {
            n_aggregators,
            horizon,
            values,
        }
    }

    pub fn n_aggregators(&self) -> usize {
        self.n_aggregators
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, aggregator: usize, slot: usize) -> f64 {
        self.values[aggregator * self.horizon + slot]
    }

    pub fn set(&mut self, aggregator: usize, slot: usize, value: f64) {
        self.values[aggregator * self.horizon + slot] = value;
    }

    /// Per-slot prices for one aggregator.
    pub fn row(&self, aggregator: usize) -> &[f64] {
        &self.values[aggregator * self.horizon..(aggregator + 1) * self.horizon]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn inf_norm_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn l2_dist(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn clamp(&mut self, lo: f64, hi: f64) {
        for v in &mut self.values {
            *v = v.max(lo).min(hi);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Error)]
pub enum SubproblemError {
    #[error("multiplier field is {got:?}, scenario expects ({n_agg}, {horizon})")]
    DimensionMismatch {
        got: (usize, usize),
        n_agg: usize,
        horizon: usize,
    },
    #[error("market-operator subproblem infeasible: {0}")]
    Infeasible(String),
    #[error("market-operator subproblem did not reach tolerance (kkt residual {0:.3e})")]
    NotConverged(f64),
    #[error(transparent)]
    Qp(#[from] QpError),
}

/// Market operator's minimizer at the current multipliers: dispatch, angles,
/// its dual-function component and the matching subgradient.
#[derive(Debug, Clone)]
pub struct MoSolution {
    /// Generator outputs, shape (n_generators, horizon), MW.
    pub p_g: Array2<f64>,
    /// Scheduled aggregator consumption, shape (n_aggregators, horizon), MW.
    pub p_dra: Array2<f64>,
    /// Bus angles, shape (n_buses, horizon), rad.
    pub theta: Array2<f64>,
    /// Value of the MO's Lagrangian piece at the minimizer.
    pub dual_value: f64,
    /// Subgradient with respect to the multipliers: exactly `-p_dra`.
    pub subgradient: MultiplierField,
}

/// Solve the market operator's DC-OPF piece: minimize generation cost minus
/// multiplier revenue subject to nodal balance, generator limits and ramps
/// (slot one ramps against `p_initial`), line flow limits, the reference
/// angle and the aggregator consumption box.
pub fn solve_mo(
    net: &NetworkModel,
    sites: &[AggregatorSite],
    mu: &MultiplierField,
    tol: f64,
) -> Result<MoSolution, SubproblemError> {
    let t_len = net.horizon;
    let ng = net.n_generators();
    let na = sites.len();
    let nb = net.n_buses;
    if mu.n_aggregators() != na || mu.horizon() != t_len {
        return Err(SubproblemError::DimensionMismatch {
            got: (mu.n_aggregators(), mu.horizon()),
            n_agg: na,
            horizon: t_len,
        });
    }

    let b = build_admittance(net);
    let h = build_flow_matrix(net);
    let (a_g, a_a) = build_incidence(net);

    let og = 0; // generator block offset
    let od = ng * t_len; // aggregator consumption block offset
    let ot = (ng + na) * t_len; // angle block offset
    let n = (ng + na + nb) * t_len;

    let mut p = QpProblem::new(n);
    for (i, gen) in net.generators.iter().enumerate() {
        for t in 0..t_len {
            let idx = og + i * t_len + t;
            p.q[[idx, idx]] = 2.0 * gen.cost_quadratic;
            p.c[idx] = gen.cost_linear;
            p.lo[idx] = gen.p_min;
            p.hi[idx] = gen.p_max;
        }
    }
    for j in 0..na {
        for t in 0..t_len {
            let idx = od + j * t_len + t;
            p.c[idx] = -mu.get(j, t);
            p.lo[idx] = 0.0;
            p.hi[idx] = sites[j].p_dra_max;
        }
    }

    // equalities: nodal balance per (slot, bus), then the reference angle
    let me = nb * t_len + t_len;
    let mut a_eq = Array2::zeros((me, n));
    let mut b_eq = Array1::zeros(me);
    for t in 0..t_len {
        for bus in 0..nb {
            let row = t * nb + bus;
            for i in 0..ng {
                a_eq[[row, og + i * t_len + t]] = a_g[[bus, i]];
            }
            for j in 0..na {
                a_eq[[row, od + j * t_len + t]] = -a_a[[bus, j]];
            }
            for m in 0..nb {
                a_eq[[row, ot + m * t_len + t]] = -b[[bus, m]];
            }
            b_eq[row] = net.base_load[[bus, t]];
        }
    }
    for t in 0..t_len {
        a_eq[[nb * t_len + t, ot + net.reference_bus * t_len + t]] = 1.0;
    }
    p.a_eq = a_eq;
    p.b_eq = b_eq;

    // inequalities: ramps, then finite flow limits
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for (i, gen) in net.generators.iter().enumerate() {
        for t in 0..t_len {
            let cur = og + i * t_len + t;
            if t == 0 {
                rows.push(vec![(cur, 1.0)]);
                rhs.push(gen.p_initial + gen.ramp_up);
                rows.push(vec![(cur, -1.0)]);
                rhs.push(gen.ramp_down - gen.p_initial);
            } else {
                let prev = og + i * t_len + t - 1;
                rows.push(vec![(cur, 1.0), (prev, -1.0)]);
                rhs.push(gen.ramp_up);
                rows.push(vec![(cur, -1.0), (prev, 1.0)]);
                rhs.push(gen.ramp_down);
            }
        }
    }
    for (q, line) in net.lines.iter().enumerate() {
        for t in 0..t_len {
            if line.flow_max.is_finite() {
                let row = (0..nb)
                    .filter(|&m| h[[q, m]] != 0.0)
                    .map(|m| (ot + m * t_len + t, h[[q, m]]))
                    .collect();
                rows.push(row);
                rhs.push(line.flow_max);
            }
            if line.flow_min.is_finite() {
                let row = (0..nb)
                    .filter(|&m| h[[q, m]] != 0.0)
                    .map(|m| (ot + m * t_len + t, -h[[q, m]]))
                    .collect();
                rows.push(row);
                rhs.push(-line.flow_min);
            }
        }
    }
    let mi = rows.len();
    let mut a_in = Array2::zeros((mi, n));
    for (r, row) in rows.iter().enumerate() {
        for &(idx, v) in row {
            a_in[[r, idx]] = v;
        }
    }
    p.a_in = a_in;
    p.b_in = Array1::from_vec(rhs);

    let sol = qp::solve(&p, tol)?;
    match sol.status {
        QpStatus::Optimal => {}
        QpStatus::Infeasible => {
            return Err(SubproblemError::Infeasible(format!(
                "no dispatch satisfies balance/ramp/flow constraints \
                 ({} buses, {} generators, {} slots; kkt residual {:.3e})",
                nb, ng, t_len, sol.kkt_residual
            )))
        }
        QpStatus::Unbounded => {
            // cannot happen with bounded generation and consumption boxes
            return Err(SubproblemError::Infeasible(
                "subproblem reported unbounded".into(),
            ));
        }
        QpStatus::MaxIterations => return Err(SubproblemError::NotConverged(sol.kkt_residual)),
    }

    let slice2 = |offset: usize, rows_n: usize| {
        let mut out = Array2::zeros((rows_n, t_len));
        for r in 0..rows_n {
            for t in 0..t_len {
                out[[r, t]] = sol.x[offset + r * t_len + t];
            }
        }
        out
    };
    let p_g = slice2(og, ng);
    let p_dra = slice2(od, na);
    let theta = slice2(ot, nb);
    let subgradient = MultiplierField::from_values(
        na,
        t_len,
        p_dra.iter().map(|v| -v).collect::<Vec<f64>>(),
    );
    Ok(MoSolution {
        p_g,
        p_dra,
        theta,
        dual_value: sol.objective,
        subgradient,
    })
}

/// One appliance's optimal schedule under per-slot prices.
#[derive(Debug, Clone)]
pub struct ApplianceSchedule {
    /// Consumption per slot in kWh, zero outside the window.
    pub power: Vec<f64>,
    /// Price-weighted cost of the schedule.
    pub cost: f64,
}

/// Closed-form fractional-knapsack schedule: fill `p_min` everywhere in the
/// window, then pour the remaining energy into slots in ascending price
/// order (ties broken toward earlier slots) up to `p_max`, leaving at most
/// one fractional slot. The window sum equals the required energy.
pub fn schedule_appliance(app: &ApplianceSpec, prices: &[f64]) -> ApplianceSchedule {
    debug_assert!(app.window_end < prices.len());
    let horizon = prices.len();
    let mut power = vec![0.0; horizon];
    let window: Vec<usize> = (app.window_start..=app.window_end).collect();
    for &t in &window {
        power[t] = app.p_min;
    }
    let mut remaining = app.energy_total - window.len() as f64 * app.p_min;
    if remaining > 0.0 {
        let mut order = window.clone();
        // stable sort keeps earlier slots first on price ties
        order.sort_by(|&a, &b| prices[a].total_cmp(&prices[b]));
        let cap = app.p_max - app.p_min;
        for &t in &order {
            if remaining <= 0.0 {
                break;
            }
            let add = cap.min(remaining);
            power[t] += add;
            remaining -= add;
        }
    }
    let cost = window.iter().map(|&t| prices[t] * power[t]).sum();
    ApplianceSchedule { power, cost }
}

/// What an aggregator reports to the market operator: its dual-function
/// component and the aggregate consumption profile. Per-user schedules never
/// leave this function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatorResponse {
    /// Dual component `D_j` in $ (zero-utility users: sum of schedule costs).
    pub dual_value: f64,
    /// Aggregate consumption per slot in MW; this is the subgradient `g_j`.
    pub consumption_mw: Vec<f64>,
}

fn user_response(appliances: &[ApplianceSpec], prices: &[f64]) -> (Vec<f64>, f64) {
    let mut consumption = vec![0.0; prices.len()];
    let mut cost = 0.0;
    for app in appliances {
        let sched = schedule_appliance(app, prices);
        for (acc, v) in consumption.iter_mut().zip(sched.power.iter()) {
            *acc += v;
        }
        cost += sched.cost;
    }
    (consumption, cost)
}

fn accumulate(per_user: Vec<(Vec<f64>, f64)>, horizon: usize) -> AggregatorResponse {
    let mut consumption_kwh = vec![0.0; horizon];
    let mut cost = 0.0;
    for (user_cons, user_cost) in per_user {
        for (acc, v) in consumption_kwh.iter_mut().zip(user_cons.iter()) {
            *acc += v;
        }
        cost += user_cost;
    }
    AggregatorResponse {
        dual_value: cost / 1000.0,
        consumption_mw: consumption_kwh.iter().map(|v| v / 1000.0).collect(),
    }
}

/// Schedule every user of the aggregator at the given prices and report the
/// aggregate. Users are independent, so they are scheduled in parallel when
/// the `parallel` feature is on; the reduction over users is sequential in
/// user order either way, so results are bitwise reproducible.
pub fn aggregator_respond(agg: &AggregatorModel, prices: &[f64]) -> AggregatorResponse {
    let per_user = exec::map_ordered(&agg.users, |user| user_response(user, prices));
    accumulate(per_user, prices.len())
}

/// Sequential reference path for [`aggregator_respond`]; used by the
/// benchmarks and the parallel-consistency tests.
pub fn aggregator_respond_sequential(agg: &AggregatorModel, prices: &[f64]) -> AggregatorResponse {
    let per_user: Vec<_> = agg
        .users
        .iter()
        .map(|user| user_response(user, prices))
        .collect();
    accumulate(per_user, prices.len())
}
