//! Power-network and demand-response data model.
//!
//! All indices are zero-based internally (buses, lines, generators,
//! aggregators, slots). Scenario files use one-based indices; the conversion
//! happens in [`crate::scenario`]. Generator and bus quantities are in MW,
//! appliance quantities in kWh per one-hour slot; the single kWh->MW
//! conversion point is `subproblems::aggregator_respond`.

use ndarray::Array2;

/// A transmission line between two buses, with reactance in p.u.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub reactance: f64,
    /// Flow limits in MW; `f64::NEG_INFINITY`/`f64::INFINITY` when unbounded.
    pub flow_min: f64,
    pub flow_max: f64,
}

/// A dispatchable generator with quadratic cost `a*p^2 + b*p`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub bus: usize,
    /// Quadratic cost coefficient, $/(MWh)^2.
    pub cost_quadratic: f64,
    /// Linear cost coefficient, $/MWh.
    pub cost_linear: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Ramp limits in MW per slot.
    pub ramp_up: f64,
    pub ramp_down: f64,
    /// Output before the first slot; the slot-one ramp constraint is taken
    /// against this value.
    pub p_initial: f64,
}

/// Where an aggregator connects to the grid and how much it may draw.
///
/// This is the only aggregator information the market operator ever sees;
/// user-level data stays in [`AggregatorModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatorSite {
    pub bus: usize,
    /// Upper bound on the aggregator's consumption per slot, MW.
    pub p_dra_max: f64,
}

/// A deferrable appliance: consume `energy_total` kWh inside the window
/// `[window_start, window_end]` (slot indices, inclusive), between `p_min`
/// and `p_max` kWh in each window slot and nothing outside.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplianceSpec {
    pub energy_total: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub window_start: usize,
    pub window_end: usize,
}

impl ApplianceSpec {
    /// Number of slots in the charging window.
    pub fn window_len(&self) -> usize {
        self.window_end - self.window_start + 1
    }

    /// Invariant check against a horizon of `t` slots. Returns human-readable
    /// violations; empty means the spec is feasible.
    pub fn violations(&self, horizon: usize) -> Vec<String> {
        let mut out = Vec::new();
        if self.window_start > self.window_end {
            out.push(format!(
                "appliance window start {} is after end {}",
                self.window_start, self.window_end
            ));
            return out;
        }
        if self.window_end >= horizon {
            out.push(format!(
                "appliance window end {} exceeds horizon {}",
                self.window_end, horizon
            ));
        }
        if !(self.p_min >= 0.0 && self.p_min <= self.p_max) {
            out.push(format!(
                "appliance power bounds invalid: p_min={} p_max={}",
                self.p_min, self.p_max
            ));
        }
        let n = self.window_len() as f64;
        if self.energy_total < n * self.p_min - 1e-12 || self.energy_total > n * self.p_max + 1e-12
        {
            out.push(format!(
                "appliance energy {} infeasible for window of {} slots with p in [{}, {}]",
                self.energy_total, n, self.p_min, self.p_max
            ));
        }
        if !self.energy_total.is_finite() {
            out.push("appliance energy must be finite".into());
        }
        out
    }
}

/// An aggregator: grid connection plus the users it serves. Each user owns a
/// list of appliances.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatorModel {
    pub id: usize,
    pub site: AggregatorSite,
    pub users: Vec<Vec<ApplianceSpec>>,
}

/// The transmission network with generators, aggregator placements, base
/// load and the scheduling horizon. Immutable after construction; safe to
/// share read-only across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub n_buses: usize,
    pub lines: Vec<Line>,
    pub generators: Vec<GeneratorSpec>,
    /// Bus of each aggregator, indexed by aggregator id.
    pub aggregator_buses: Vec<usize>,
    /// Fixed base load in MW, shape (n_buses, horizon).
    pub base_load: Array2<f64>,
    /// Bus whose angle is pinned to zero.
    pub reference_bus: usize,
    /// Number of scheduling slots.
    pub horizon: usize,
}

impl NetworkModel {
    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn n_aggregators(&self) -> usize {
        self.aggregator_buses.len()
    }

    /// Invariant check. Returns human-readable violations; empty means ok.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_buses == 0 {
            out.push("network must have at least one bus".into());
        }
        if self.horizon == 0 {
            out.push("horizon must be at least one slot".into());
        }
        if self.reference_bus >= self.n_buses {
            out.push(format!(
                "reference bus {} out of range (n_buses={})",
                self.reference_bus, self.n_buses
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for (q, line) in self.lines.iter().enumerate() {
            if line.from == line.to {
                out.push(format!("line {} connects bus {} to itself", q, line.from));
            }
            if line.from >= self.n_buses || line.to >= self.n_buses {
                out.push(format!("line {} endpoint out of range", q));
            }
            if !(line.reactance > 0.0) {
                out.push(format!(
                    "line {} reactance {} must be strictly positive",
                    q, line.reactance
                ));
            }
            if !(line.flow_min <= line.flow_max) {
                out.push(format!(
                    "line {} flow limits inverted: [{}, {}]",
                    q, line.flow_min, line.flow_max
                ));
            }
            let key = (line.from.min(line.to), line.from.max(line.to));
            if !seen.insert(key) {
                out.push(format!(
                    "parallel line between buses {} and {} (one line per pair)",
                    key.0, key.1
                ));
            }
        }
        for (i, g) in self.generators.iter().enumerate() {
            if g.bus >= self.n_buses {
                out.push(format!("generator {} bus {} out of range", i, g.bus));
            }
            if !(0.0 <= g.p_min && g.p_min <= g.p_max) {
                out.push(format!(
                    "generator {} limits invalid: [{}, {}]",
                    i, g.p_min, g.p_max
                ));
            }
            if !(g.ramp_up >= 0.0 && g.ramp_down >= 0.0) {
                out.push(format!("generator {} ramp rates must be nonnegative", i));
            }
            if g.cost_quadratic < 0.0 {
                out.push(format!(
                    "generator {} quadratic cost must be nonnegative",
                    i
                ));
            }
            if !(g.p_min <= g.p_initial && g.p_initial <= g.p_max) {
                out.push(format!(
                    "generator {} initial output {} outside [{}, {}]",
                    i, g.p_initial, g.p_min, g.p_max
                ));
            }
        }
        for (j, &bus) in self.aggregator_buses.iter().enumerate() {
            if bus >= self.n_buses {
                out.push(format!("aggregator {} bus {} out of range", j, bus));
            }
        }
        if self.base_load.dim() != (self.n_buses, self.horizon) {
            out.push(format!(
                "base load shape {:?} does not match (n_buses, horizon) = ({}, {})",
                self.base_load.dim(),
                self.n_buses,
                self.horizon
            ));
        }
        out
    }
}

/// Bus admittance matrix: `B[m][n] = -1/X_mn` for a line between m and n,
/// `B[m][m]` the sum of `1/X` over incident lines. Symmetric with zero row
/// sums.
pub fn build_admittance(net: &NetworkModel) -> Array2<f64> {
    let mut b = Array2::zeros((net.n_buses, net.n_buses));
    for line in &net.lines {
        let y = 1.0 / line.reactance;
        b[[line.from, line.to]] -= y;
        b[[line.to, line.from]] -= y;
        b[[line.from, line.from]] += y;
        b[[line.to, line.to]] += y;
    }
    b
}

/// Line flow matrix: row q maps angles to the MW flow on line q,
/// `(H theta)_q = (theta_from - theta_to) / X`.
pub fn build_flow_matrix(net: &NetworkModel) -> Array2<f64> {
    let mut h = Array2::zeros((net.n_lines(), net.n_buses));
    for (q, line) in net.lines.iter().enumerate() {
        let y = 1.0 / line.reactance;
        h[[q, line.from]] = y;
        h[[q, line.to]] = -y;
    }
    h
}

/// Bus incidence matrices for generators and aggregators: each column has a
/// single 1 at the entity's bus.
pub fn build_incidence(net: &NetworkModel) -> (Array2<f64>, Array2<f64>) {
    let mut a_g = Array2::zeros((net.n_buses, net.n_generators()));
    for (i, g) in net.generators.iter().enumerate() {
        a_g[[g.bus, i]] = 1.0;
    }
    let mut a_a = Array2::zeros((net.n_buses, net.n_aggregators()));
    for (j, &bus) in net.aggregator_buses.iter().enumerate() {
        a_a[[bus, j]] = 1.0;
    }
    (a_g, a_a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_bus_net() -> NetworkModel {
        NetworkModel {
            n_buses: 2,
            lines: vec![Line {
                from: 0,
                to: 1,
                reactance: 0.5,
                flow_min: f64::NEG_INFINITY,
                flow_max: f64::INFINITY,
            }],
            generators: vec![],
            aggregator_buses: vec![],
            base_load: Array2::zeros((2, 1)),
            reference_bus: 0,
            horizon: 1,
        }
    }

    /// Ring used throughout: reactances for lines (1,6),(6,2),(2,5),(5,3),(3,4),(4,1)
    /// in one-based labels.
    pub(crate) fn six_bus_ring(horizon: usize) -> NetworkModel {
        let xs = [
            (0usize, 5usize, 0.2),
            (5, 1, 0.3),
            (1, 4, 0.25),
            (4, 2, 0.1),
            (2, 3, 0.3),
            (3, 0, 0.4),
        ];
        NetworkModel {
            n_buses: 6,
            lines: xs
                .iter()
                .map(|&(f, t, x)| Line {
                    from: f,
                    to: t,
                    reactance: x,
                    flow_min: f64::NEG_INFINITY,
                    flow_max: f64::INFINITY,
                })
                .collect(),
            generators: vec![],
            aggregator_buses: vec![],
            base_load: Array2::zeros((6, horizon)),
            reference_bus: 0,
            horizon,
        }
    }

    #[test]
    fn admittance_two_bus() {
        let b = build_admittance(&two_bus_net());
        assert_eq!(b, array![[2.0, -2.0], [-2.0, 2.0]]);
    }

    #[test]
    fn admittance_no_lines_is_zero() {
        let mut net = two_bus_net();
        net.lines.clear();
        let b = build_admittance(&net);
        assert_eq!(b, Array2::zeros((2, 2)));
    }

    #[test]
    fn admittance_ring_diagonal() {
        let b = build_admittance(&six_bus_ring(1));
        // bus 1 touches lines (1,6) X=0.2 and (4,1) X=0.4
        assert!((b[[0, 0]] - 7.5).abs() < 1e-12);
        // symmetry and zero row sums
        for m in 0..6 {
            let row_sum: f64 = (0..6).map(|n| b[[m, n]]).sum();
            assert!(row_sum.abs() < 1e-12);
            for n in 0..6 {
                assert_eq!(b[[m, n]], b[[n, m]]);
            }
        }
    }

    #[test]
    fn flow_matrix_single_line() {
        let h = build_flow_matrix(&two_bus_net());
        assert_eq!(h, array![[2.0, -2.0]]);
    }

    #[test]
    fn flow_matrix_ring_line_5_3() {
        let h = build_flow_matrix(&six_bus_ring(1));
        // line (5,3) with X=0.1 is the fourth in construction order
        assert!((h[[3, 4]] - 10.0).abs() < 1e-12);
        assert!((h[[3, 2]] + 10.0).abs() < 1e-12);
    }

    #[test]
    fn flow_matrix_angle_identity() {
        let net = six_bus_ring(1);
        let h = build_flow_matrix(&net);
        let theta = array![0.0, 0.1, -0.2, 0.05, 0.3, -0.1];
        let flows = h.dot(&theta);
        for (q, line) in net.lines.iter().enumerate() {
            let expect = (theta[line.from] - theta[line.to]) / line.reactance;
            assert!((flows[q] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn incidence_columns() {
        let mut net = six_bus_ring(1);
        net.generators = vec![GeneratorSpec {
            bus: 2,
            cost_quadratic: 0.1,
            cost_linear: 1.0,
            p_min: 0.0,
            p_max: 10.0,
            ramp_up: 10.0,
            ramp_down: 10.0,
            p_initial: 0.0,
        }];
        net.aggregator_buses = vec![4, 5];
        let (a_g, a_a) = build_incidence(&net);
        assert_eq!(a_g.dim(), (6, 1));
        assert_eq!(a_g[[2, 0]], 1.0);
        assert_eq!(a_g.column(0).sum(), 1.0);
        assert_eq!(a_a[[4, 0]], 1.0);
        assert_eq!(a_a[[5, 1]], 1.0);
        for j in 0..2 {
            assert_eq!(a_a.column(j).sum(), 1.0);
        }
    }

    #[test]
    fn appliance_feasibility() {
        // 6-slot window, p_max 2.1 cannot hold 13 kWh
        let spec = ApplianceSpec {
            energy_total: 13.0,
            p_min: 0.0,
            p_max: 2.1,
            window_start: 0,
            window_end: 5,
        };
        assert!(!spec.violations(24).is_empty());
        let ok = ApplianceSpec {
            energy_total: 12.0,
            ..spec
        };
        assert!(ok.violations(24).is_empty());
    }

    #[test]
    fn network_violations_detected() {
        let mut net = two_bus_net();
        net.lines[0].reactance = -0.5;
        net.reference_bus = 7;
        let v = net.violations();
        assert!(v.iter().any(|s| s.contains("reactance")));
        assert!(v.iter().any(|s| s.contains("reference bus")));
    }
}
