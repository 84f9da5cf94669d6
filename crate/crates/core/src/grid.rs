//! Radial distribution network and its branch-flow cone relaxation.
//!
//! Every line `(m, n)` is oriented toward the root: `n` lies between `m` and the
//! root bus. Flows `P_mn + jQ_mn` are measured at the sending end `m`, `v` is
//! the squared voltage magnitude and `l` the squared current magnitude, all in
//! per unit of the network's base power and voltage.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use chargesite_conic::{solve_socp, LinExpr, Model, Settings, Var};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::transport::{Scenario, TransportNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    /// Bus farther from the root.
    pub from: u32,
    pub to: u32,
    pub r_ohm: f64,
    pub x_ohm: f64,
    pub rating_ka: f64,
}

/// Transport node served by a bus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub node: u32,
    pub bus: u32,
    /// Length of the feeder from the bus substation to the station, km.
    pub line_km: f64,
    /// Spare substation capacity available without expansion, kVA.
    #[serde(default)]
    pub spare_kva: f64,
}

fn default_vmin() -> f64 {
    0.95
}

fn default_vmax() -> f64 {
    1.05
}

fn default_factor() -> f64 {
    0.85
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionNetwork {
    pub base_mva: f64,
    pub base_kv: f64,
    pub root: u32,
    pub buses: Vec<u32>,
    pub lines: Vec<Line>,
    #[serde(default = "default_vmin")]
    pub vmin_pu: f64,
    #[serde(default = "default_vmax")]
    pub vmax_pu: f64,
    /// Fraction of each line rating usable in operation.
    #[serde(default = "default_factor")]
    pub current_limit_factor: f64,
    /// Apparent-power limit of the root transformer, MVA.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_capacity_mva: Option<f64>,
    #[serde(default)]
    pub coupling: Vec<Coupling>,
}

/// Tree structure of a validated network, as bus indices into `buses`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialOrder {
    pub bus_index: BTreeMap<u32, usize>,
    /// Root first, then breadth-first outward.
    pub order: Vec<usize>,
    /// Line leaving each bus toward the root; `None` only for the root.
    pub up_line: Vec<Option<usize>>,
    /// Lines arriving at each bus from farther out.
    pub down_lines: Vec<Vec<usize>>,
    pub root: usize,
}

impl DistributionNetwork {
    pub fn z_base_ohm(&self) -> f64 {
        self.base_kv * self.base_kv / self.base_mva
    }

    pub fn i_base_ka(&self) -> f64 {
        self.base_mva / (3f64.sqrt() * self.base_kv)
    }

    pub fn kw_to_pu(&self, kw: f64) -> f64 {
        kw / (1000.0 * self.base_mva)
    }

    pub fn pu_to_kw(&self, pu: f64) -> f64 {
        pu * 1000.0 * self.base_mva
    }

    pub fn ohm_to_pu(&self, ohm: f64) -> f64 {
        ohm / self.z_base_ohm()
    }

    pub fn pu_to_ohm(&self, pu: f64) -> f64 {
        pu * self.z_base_ohm()
    }

    pub fn ka_to_pu(&self, ka: f64) -> f64 {
        ka / self.i_base_ka()
    }

    pub fn pu_to_ka(&self, pu: f64) -> f64 {
        pu * self.i_base_ka()
    }

    /// Upper bound on `l` for `line`, per unit squared.
    pub fn current_limit_sq(&self, line: &Line) -> f64 {
        let i = self.current_limit_factor * self.ka_to_pu(line.rating_ka);
        i * i
    }

    pub fn coupling_for(&self, node: u32) -> Option<&Coupling> {
        self.coupling.iter().find(|c| c.node == node)
    }

    /// Checks data ranges and that the lines form a tree oriented toward the root.
    pub fn validate_radial(&self) -> Result<RadialOrder> {
        let v = |m: String| Err(CoreError::Validation(m));
        if !(self.base_mva > 0.0 && self.base_kv > 0.0) {
            return v("base power and voltage must be positive".into());
        }
        if !(self.vmin_pu > 0.0 && self.vmin_pu <= self.vmax_pu) {
            return v(format!("voltage band [{}, {}] is invalid", self.vmin_pu, self.vmax_pu));
        }
        if !(self.current_limit_factor >= 0.0) {
            return v("current limit factor must be non-negative".into());
        }
        let mut bus_index = BTreeMap::new();
        for (i, &b) in self.buses.iter().enumerate() {
            if bus_index.insert(b, i).is_some() {
                return v(format!("duplicate bus {b}"));
            }
        }
        let Some(&root) = bus_index.get(&self.root) else {
            return v(format!("root bus {} is not listed", self.root));
        };
        for l in &self.lines {
            if !bus_index.contains_key(&l.from) || !bus_index.contains_key(&l.to) || l.from == l.to {
                return v(format!("line ({}, {}) references unknown or identical buses", l.from, l.to));
            }
            if !(l.r_ohm >= 0.0 && l.r_ohm.is_finite() && l.x_ohm.is_finite()) {
                return v(format!("line ({}, {}) has invalid impedance", l.from, l.to));
            }
            if !(l.rating_ka >= 0.0 && l.rating_ka.is_finite()) {
                return v(format!("line ({}, {}) has invalid rating", l.from, l.to));
            }
        }
        let n = self.buses.len();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let mut dsu: Vec<usize> = (0..n).collect();
        fn find(d: &mut [usize], mut a: usize) -> usize {
            while d[a] != a {
                d[a] = d[d[a]];
                a = d[a];
            }
            a
        }
        for (k, l) in self.lines.iter().enumerate() {
            let (a, b) = (bus_index[&l.from], bus_index[&l.to]);
            let (ra, rb) = (find(&mut dsu, a), find(&mut dsu, b));
            if ra == rb {
                let cycle = tree_path(&adj, a, b).into_iter().map(|i| self.buses[i].to_string()).collect::<Vec<_>>();
                return v(format!(
                    "line ({}, {}) closes the cycle {} -> {}",
                    l.from,
                    l.to,
                    cycle.join(" -> "),
                    l.from
                ));
            }
            dsu[ra] = rb;
            adj[a].push((b, k));
            adj[b].push((a, k));
        }
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(w, k) in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some((u, k));
                    queue.push_back(w);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return v(format!("bus {} is not connected to the root", self.buses[i]));
        }
        let mut up_line = vec![None; n];
        let mut down_lines = vec![Vec::new(); n];
        for &u in &order[1..] {
            let (p, k) = parent[u].unwrap();
            let l = &self.lines[k];
            if bus_index[&l.from] != u || bus_index[&l.to] != p {
                return v(format!(
                    "line ({}, {}) is oriented away from the root; expected ({}, {})",
                    l.from, l.to, self.buses[u], self.buses[p]
                ));
            }
            up_line[u] = Some(k);
            down_lines[p].push(k);
        }
        Ok(RadialOrder { bus_index, order, up_line, down_lines, root })
    }

    /// Adds couplings for auxiliary transport nodes that have none: each uses
    /// the bus of the nearer original endpoint, a feeder longer by a tenth of
    /// the highway distance to that endpoint, and no spare capacity.
    pub fn couple_auxiliary(&mut self, net: &TransportNetwork) -> Result<()> {
        let known: BTreeSet<u32> = self.coupling.iter().map(|c| c.node).collect();
        let mut added = Vec::new();
        for n in &net.nodes {
            let Some(aux) = n.auxiliary else { continue };
            if known.contains(&n.id) {
                continue;
            }
            let (anchor, dist) = if aux.offset_km <= aux.arc_km - aux.offset_km {
                (aux.from, aux.offset_km)
            } else {
                (aux.to, aux.arc_km - aux.offset_km)
            };
            let Some(c) = self.coupling_for(anchor) else {
                return Err(CoreError::validation(format!(
                    "auxiliary node {} needs a coupling for endpoint {anchor}",
                    n.id
                )));
            };
            added.push(Coupling { node: n.id, bus: c.bus, line_km: c.line_km + 0.1 * dist, spare_kva: 0.0 });
        }
        self.coupling.extend(added);
        Ok(())
    }

    /// Per-bus active and reactive base load in kW / kvar for hour `t`.
    pub fn base_loads(&self, order: &RadialOrder, scenario: &Scenario, t: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut p = vec![0.0; self.buses.len()];
        let mut q = vec![0.0; self.buses.len()];
        for b in &scenario.base_load {
            let Some(&i) = order.bus_index.get(&b.bus) else {
                return Err(CoreError::validation(format!("scenario {} loads unknown bus {}", scenario.id, b.bus)));
            };
            p[i] += b.p_kw[t];
            q[i] += b.q_kvar[t];
        }
        Ok((p, q))
    }
}

fn tree_path(adj: &[Vec<(usize, usize)>], from: usize, to: usize) -> Vec<usize> {
    let mut prev = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::from([from]);
    prev[from] = from;
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for &(w, _) in &adj[u] {
            if prev[w] == usize::MAX {
                prev[w] = u;
                queue.push_back(w);
            }
        }
    }
    let mut path = vec![to];
    let mut u = to;
    while u != from {
        u = prev[u];
        path.push(u);
    }
    path.reverse();
    path
}

/// Variables of one branch-flow block, indexed like `buses` and `lines`.
#[derive(Debug, Clone)]
pub struct BranchFlowVars {
    pub v: Vec<Var>,
    pub p: Vec<Var>,
    pub q: Vec<Var>,
    pub l: Vec<Var>,
    pub p_import: Var,
    pub q_import: Var,
}

impl BranchFlowVars {
    /// `Σ r·l`, per unit.
    pub fn losses(&self, grid: &DistributionNetwork) -> LinExpr {
        LinExpr::sum(self.l.iter().zip(&grid.lines).map(|(&l, line)| (l, grid.ohm_to_pu(line.r_ohm))))
    }
}

/// Balance, voltage-drop and cone constraints for one operating hour. Loads
/// are per unit, one expression per bus; the root voltage is fixed at 1.
pub fn branch_flow_blocks(
    model: &mut Model,
    grid: &DistributionNetwork,
    order: &RadialOrder,
    p_load: &[LinExpr],
    q_load: &[LinExpr],
) -> BranchFlowVars {
    let nb = grid.buses.len();
    let nl = grid.lines.len();
    let v: Vec<Var> = (0..nb).map(|_| model.add_var(0.0, f64::INFINITY)).collect();
    let p: Vec<Var> = (0..nl).map(|_| model.add_free()).collect();
    let q: Vec<Var> = (0..nl).map(|_| model.add_free()).collect();
    let l: Vec<Var> = (0..nl).map(|_| model.add_var(0.0, f64::INFINITY)).collect();
    let p_import = model.add_free();
    let q_import = model.add_free();
    model.fix(v[order.root], 1.0);
    let zr: Vec<f64> = grid.lines.iter().map(|ln| grid.ohm_to_pu(ln.r_ohm)).collect();
    let zx: Vec<f64> = grid.lines.iter().map(|ln| grid.ohm_to_pu(ln.x_ohm)).collect();
    let received = |inc: &[usize], flow: &[Var], z: &[f64]| {
        let mut e = LinExpr::new();
        for &h in inc {
            e.add_term(flow[h], 1.0).add_term(l[h], -z[h]);
        }
        e
    };
    for &m in &order.order {
        let rp = received(&order.down_lines[m], &p, &zr);
        let rq = received(&order.down_lines[m], &q, &zx);
        match order.up_line[m] {
            Some(k) => {
                // P_mn = −load_m + Σ (P_hm − r_hm·l_hm)
                model.add_eq(LinExpr::from(p[k]) + p_load[m].clone() - rp, 0.0);
                model.add_eq(LinExpr::from(q[k]) + q_load[m].clone() - rq, 0.0);
                let n = order.bus_index[&grid.lines[k].to];
                let z2 = zr[k] * zr[k] + zx[k] * zx[k];
                model.add_eq(v[m] - v[n] - p[k] * (2.0 * zr[k]) - q[k] * (2.0 * zx[k]) + l[k] * z2, 0.0);
                model.add_rotated_soc(l[k], v[m], vec![p[k].into(), q[k].into()]);
            }
            None => {
                model.add_eq(LinExpr::from(p_import) - p_load[m].clone() + rp, 0.0);
                model.add_eq(LinExpr::from(q_import) - q_load[m].clone() + rq, 0.0);
            }
        }
    }
    BranchFlowVars { v, p, q, l, p_import, q_import }
}

/// Voltage band, current limits and the optional root transformer limit.
pub fn limit_blocks(model: &mut Model, grid: &DistributionNetwork, order: &RadialOrder, vars: &BranchFlowVars) {
    let (lo, hi) = (grid.vmin_pu * grid.vmin_pu, grid.vmax_pu * grid.vmax_pu);
    for (m, &v) in vars.v.iter().enumerate() {
        if m != order.root {
            model.set_bounds(v, lo, hi);
        }
    }
    for (line, &l) in grid.lines.iter().zip(&vars.l) {
        model.set_bounds(l, 0.0, grid.current_limit_sq(line));
    }
    if let Some(cap) = grid.root_capacity_mva {
        model.add_soc(LinExpr::constant(cap / grid.base_mva), vec![vars.p_import.into(), vars.q_import.into()]);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    /// Squared voltage magnitude per bus, per unit.
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub l: Vec<f64>,
    pub p_import_kw: f64,
    pub q_import_kvar: f64,
    pub losses_kw: f64,
}

impl PowerFlowSolution {
    /// Largest `(l·v − P² − Q²) / (l·v)` over lines carrying current.
    pub fn max_cone_gap(&self, grid: &DistributionNetwork, order: &RadialOrder) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, line) in grid.lines.iter().enumerate() {
            let m = order.bus_index[&line.from];
            let lv = self.l[k] * self.v[m];
            let s2 = self.p[k] * self.p[k] + self.q[k] * self.q[k];
            if lv > 1e-14 {
                worst = worst.max((lv - s2).abs() / lv);
            }
        }
        worst
    }
}

/// Minimum-import operating point for fixed loads (kW, kvar per bus).
pub fn solve_power_flow(
    grid: &DistributionNetwork,
    order: &RadialOrder,
    p_kw: &[f64],
    q_kvar: &[f64],
    with_limits: bool,
) -> Result<PowerFlowSolution> {
    let mut model = Model::new();
    let pl: Vec<LinExpr> = p_kw.iter().map(|&x| LinExpr::constant(grid.kw_to_pu(x))).collect();
    let ql: Vec<LinExpr> = q_kvar.iter().map(|&x| LinExpr::constant(grid.kw_to_pu(x))).collect();
    let vars = branch_flow_blocks(&mut model, grid, order, &pl, &ql);
    if with_limits {
        limit_blocks(&mut model, grid, order, &vars);
    }
    model.set_objective(vars.p_import);
    // Lightly loaded lines carry l ~ 1e-4 pu, so the cone equality needs a gap well below the default.
    let settings = Settings { tol: 1e-12, ..Settings::default() };
    let sol = solve_socp(model.program(), &settings)?;
    if !sol.status.has_solution() {
        return Err(match sol.status {
            chargesite_conic::Status::Infeasible => CoreError::Infeasible("loads exceed the network limits".into()),
            s => CoreError::Solver(format!("power flow solve ended with {s:?}")),
        });
    }
    let get = |vs: &[Var]| vs.iter().map(|v| sol.x[v.index()]).collect::<Vec<_>>();
    let l = get(&vars.l);
    let losses = grid.lines.iter().zip(&l).map(|(ln, l)| grid.ohm_to_pu(ln.r_ohm) * l).sum::<f64>();
    Ok(PowerFlowSolution {
        v: get(&vars.v),
        p: get(&vars.p),
        q: get(&vars.q),
        l,
        p_import_kw: grid.pu_to_kw(sol.x[vars.p_import.index()]),
        q_import_kvar: grid.pu_to_kw(sol.x[vars.q_import.index()]),
        losses_kw: grid.pu_to_kw(losses),
    })
}
