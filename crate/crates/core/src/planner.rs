//! Stochastic station planning: assembly of the mixed-binary cone program,
//! plan extraction, independent plan checks and fixed-plan re-evaluation.
//!
//! Money is in millions of dollars per year throughout the model. First-stage
//! variables per candidate site are the build decision `x`, continuous spots `y`
//! and substation expansion; every (path, type) owns one binary charge choice
//! per node, possibly aliased across paths by the choice trie. Each scenario
//! hour adds a branch-flow block, station loads and unserved-load slacks.

use std::collections::{BTreeMap, BTreeSet};

use chargesite_conic::{branch_and_bound, solve_socp, BnbSettings, BnbStatus, LinExpr, Model, Settings, Var};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{charge_time, max_mean_load, pareto_maximal, service_factor, SocSizing};
use crate::error::{CoreError, Result};
use crate::grid::{branch_flow_blocks, limit_blocks, BranchFlowVars, DistributionNetwork, RadialOrder};
use crate::transport::{
    augment, build_choice_trie, densify, enumerate_subpaths, gravity_od_flows, range_feasible, shortest_paths,
    temporal_node_rates, validate_scenarios, validate_types, AugmentedPath, ChoiceTrie, Path, PevType, Scenario,
    SubPathConstraint, TransportNetwork, HOURS,
};

pub const PLAN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParameters {
    pub station_usd: f64,
    pub spot_usd: f64,
    pub line_usd_per_kva_km: f64,
    pub substation_usd_per_kva: f64,
    pub energy_usd_per_kwh: f64,
    pub penalty_usd_per_kwh: f64,
    pub discount_rate: f64,
    pub lifetime_years: f64,
    pub spot_kw: f64,
    pub efficiency: f64,
    pub max_spots: f64,
    /// Site cost multiplier is `1 + weight_cost_factor · W_i` on station, spot and substation costs.
    pub weight_cost_factor: f64,
    /// Reactive-to-active ratio of charging load.
    pub tan_theta: f64,
    pub days_per_year: f64,
}

impl Default for CostParameters {
    fn default() -> Self {
        Self {
            station_usd: 163_000.0,
            spot_usd: 31_640.0,
            line_usd_per_kva_km: 120.0,
            substation_usd_per_kva: 788.0,
            energy_usd_per_kwh: 0.094,
            penalty_usd_per_kwh: 1000.0,
            discount_rate: 0.08,
            lifetime_years: 15.0,
            spot_kw: 44.0,
            efficiency: 0.92,
            max_spots: 200.0,
            weight_cost_factor: 5.0,
            tan_theta: 0.0,
            days_per_year: 365.0,
        }
    }
}

impl CostParameters {
    /// Capital recovery factor `r(1+r)^Y / ((1+r)^Y − 1)`, `1/Y` at `r = 0`.
    pub fn capital_recovery(&self) -> f64 {
        let (r, y) = (self.discount_rate, self.lifetime_years);
        if r == 0.0 {
            return 1.0 / y;
        }
        let g = (1.0 + r).powf(y);
        r * g / (g - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.station_usd,
            self.spot_usd,
            self.line_usd_per_kva_km,
            self.substation_usd_per_kva,
            self.energy_usd_per_kwh,
            self.penalty_usd_per_kwh,
            self.discount_rate,
            self.weight_cost_factor,
            self.max_spots,
        ];
        if vals.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(CoreError::validation("cost parameters must be finite and non-negative"));
        }
        if !(self.lifetime_years >= 1.0 && self.spot_kw > 0.0 && self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(CoreError::validation("lifetime, spot power or efficiency out of range"));
        }
        if !(self.days_per_year > 0.0 && self.tan_theta.is_finite()) {
            return Err(CoreError::validation("days per year and tan(theta) must be valid"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanOptions {
    pub alpha: f64,
    pub d_a_km: f64,
    pub d_d_km: f64,
    pub speed_kmh: f64,
    pub share_choices: bool,
    pub rel_gap: f64,
    pub max_nodes: usize,
    pub seed: u64,
    pub densify_max_km: Option<f64>,
    pub gravity_exponent: f64,
    pub total_daily_flow: f64,
    pub od_pairs: Option<Vec<(u32, u32)>>,
    /// Scales every path flow; 2 doubles the fleet.
    pub traffic_multiplier: f64,
    /// Plan as if every vehicle had the shortest range in the fleet while
    /// keeping each type's charging duration.
    pub collapse_ranges: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            d_a_km: 100.0,
            d_d_km: 100.0,
            speed_kmh: 100.0,
            share_choices: true,
            rel_gap: 0.005,
            max_nodes: 50_000,
            seed: 1,
            densify_max_km: None,
            gravity_exponent: 2.0,
            total_daily_flow: 20_000.0,
            od_pairs: None,
            traffic_multiplier: 1.0,
            collapse_ranges: false,
        }
    }
}

/// Validated raw inputs of one planning case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseInputs {
    pub network: TransportNetwork,
    pub grid: DistributionNetwork,
    pub scenarios: Vec<Scenario>,
    pub types: Vec<PevType>,
    pub costs: CostParameters,
    pub options: PlanOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub node: u32,
    pub bus: usize,
    pub line_km: f64,
    pub spare_kva: f64,
    /// `1 + weight_cost_factor · W_i`.
    pub multiplier: f64,
}

/// Expected busy spots `Σ T_k·λ` carried by one charge-choice handle.
#[derive(Debug, Clone, PartialEq)]
pub struct HandleLoad {
    pub site: usize,
    /// Indexed `[scenario][hour]`.
    pub load: Vec<[f64; HOURS]>,
}

/// Everything derived from [`CaseInputs`] that the model needs.
#[derive(Debug, Clone)]
pub struct Instance {
    pub network: TransportNetwork,
    pub grid: DistributionNetwork,
    pub order: RadialOrder,
    pub scenarios: Vec<Scenario>,
    pub types: Vec<PevType>,
    pub durations: Vec<f64>,
    pub costs: CostParameters,
    pub options: PlanOptions,
    pub z: f64,
    pub flows: BTreeMap<(u32, u32), f64>,
    pub paths: Vec<Path>,
    /// Keyed by (path, type).
    pub augmented: BTreeMap<(usize, usize), AugmentedPath>,
    pub constraints: Vec<SubPathConstraint>,
    pub trie: ChoiceTrie,
    pub sites: Vec<Site>,
    pub site_index: BTreeMap<u32, usize>,
    pub handles: Vec<HandleLoad>,
    /// Base load per slot and bus, kW and kvar; slots are scenario-major.
    pub base_p_kw: Vec<Vec<f64>>,
    pub base_q_kvar: Vec<Vec<f64>>,
}

impl CaseInputs {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        validate_types(&self.types)?;
        validate_scenarios(&self.scenarios)?;
        self.grid.validate_radial()?;
        self.costs.validate()?;
        let o = &self.options;
        service_factor(o.alpha)?;
        if !(o.rel_gap > 0.0) {
            return Err(CoreError::validation("relative gap must be positive"));
        }
        if !(o.traffic_multiplier >= 0.0 && o.traffic_multiplier.is_finite()) {
            return Err(CoreError::validation("traffic multiplier must be non-negative"));
        }
        let buses: BTreeSet<u32> = self.grid.buses.iter().copied().collect();
        for c in &self.grid.coupling {
            if !buses.contains(&c.bus) {
                return Err(CoreError::validation(format!("node {} is coupled to unknown bus {}", c.node, c.bus)));
            }
            if self.network.node(c.node).is_none() {
                return Err(CoreError::validation(format!("coupling names unknown transport node {}", c.node)));
            }
            if !(c.line_km >= 0.0 && c.spare_kva >= 0.0) {
                return Err(CoreError::validation(format!("coupling of node {} has negative values", c.node)));
            }
        }
        for s in &self.scenarios {
            for b in &s.base_load {
                if !buses.contains(&b.bus) {
                    return Err(CoreError::validation(format!("scenario {} loads unknown bus {}", s.id, b.bus)));
                }
            }
        }
        Ok(())
    }

    pub fn instance(&self) -> Result<Instance> {
        self.validate()?;
        let o = &self.options;
        let network = match o.densify_max_km {
            Some(km) => densify(&self.network, km)?,
            None => self.network.clone(),
        };
        let mut grid = self.grid.clone();
        grid.couple_auxiliary(&network)?;
        let order = grid.validate_radial()?;
        let mut types = self.types.clone();
        // Durations come from the true batteries; collapse only shortens the stop spacing.
        let durations: Vec<f64> = types.iter().map(|t| charge_time(t, self.costs.spot_kw, self.costs.efficiency)).collect();
        if o.collapse_ranges {
            let shortest = types.iter().map(|t| t.range_km).fold(f64::INFINITY, f64::min);
            for t in &mut types {
                t.range_km = shortest;
            }
        }
        let flows = gravity_od_flows(&network, o.total_daily_flow, o.gravity_exponent, o.od_pairs.as_deref())?;
        let pairs: Vec<(u32, u32)> = flows.iter().filter(|(_, &f)| f > 0.0).map(|(&k, _)| k).collect();
        let mut paths = shortest_paths(&network, &pairs)?;
        for p in &mut paths {
            p.daily_flow = flows[&(p.origin, p.destination)] * o.traffic_multiplier;
        }
        paths.retain(|p| p.daily_flow > 0.0);

        let mut augmented = BTreeMap::new();
        let mut constraints = Vec::new();
        for (q, p) in paths.iter().enumerate() {
            for (k, t) in types.iter().enumerate() {
                let ap = augment(p, q, t, k, o.d_a_km, o.d_d_km).map_err(|e| match e {
                    CoreError::Infeasible(m) => CoreError::Infeasible(format!("path {}->{}: {m}", p.origin, p.destination)),
                    e => e,
                })?;
                constraints.extend(enumerate_subpaths(&ap).map_err(|e| match e {
                    CoreError::Infeasible(m) => CoreError::Infeasible(format!("path {}->{}: {m}", p.origin, p.destination)),
                    e => e,
                })?);
                augmented.insert((q, k), ap);
            }
        }
        let trie = build_choice_trie(&paths, types.len(), o.share_choices);

        let on_paths: BTreeSet<u32> = paths.iter().flat_map(|p| p.nodes.iter().copied()).collect();
        let mut sites = Vec::new();
        let mut site_index = BTreeMap::new();
        for &node in &on_paths {
            let Some(c) = grid.coupling_for(node) else {
                return Err(CoreError::validation(format!("transport node {node} has no bus coupling")));
            };
            let w = network.node(node).map(|n| n.weight).unwrap_or(0.0);
            site_index.insert(node, sites.len());
            sites.push(Site {
                node,
                bus: order.bus_index[&c.bus],
                line_km: c.line_km,
                spare_kva: c.spare_kva,
                multiplier: 1.0 + self.costs.weight_cost_factor * w,
            });
        }

        let mut handles: Vec<HandleLoad> = trie
            .handles
            .iter()
            .map(|h| HandleLoad { site: site_index[&h.node], load: vec![[0.0; HOURS]; self.scenarios.len()] })
            .collect();
        for (q, p) in paths.iter().enumerate() {
            for (w, sc) in self.scenarios.iter().enumerate() {
                let rates = temporal_node_rates(p, sc, o.speed_kmh)?;
                for (k, t) in types.iter().enumerate() {
                    let row = &trie.assignments[&(q, k)];
                    for (j, &h) in row.iter().enumerate() {
                        for hr in 0..HOURS {
                            handles[h].load[w][hr] += durations[k] * t.share * rates[j][hr];
                        }
                    }
                }
            }
        }

        let mut base_p_kw = Vec::new();
        let mut base_q_kvar = Vec::new();
        for sc in &self.scenarios {
            for t in 0..HOURS {
                let (p, q) = grid.base_loads(&order, sc, t)?;
                base_p_kw.push(p);
                base_q_kvar.push(q);
            }
        }

        Ok(Instance {
            network,
            grid,
            order,
            scenarios: self.scenarios.clone(),
            types,
            durations,
            costs: self.costs.clone(),
            options: o.clone(),
            z: service_factor(o.alpha)?,
            flows,
            paths,
            augmented,
            constraints,
            trie,
            sites,
            site_index,
            handles,
            base_p_kw,
            base_q_kvar,
        })
    }
}

impl Instance {
    pub fn slot_count(&self) -> usize {
        self.scenarios.len() * HOURS
    }

    /// (scenario index, hour) of a slot.
    pub fn slot(&self, s: usize) -> (usize, usize) {
        (s / HOURS, s % HOURS)
    }

    /// Weight of one slot-hour in the annual objective, M$ per kW of import.
    fn energy_weight(&self, slot: usize) -> f64 {
        let (w, _) = self.slot(slot);
        self.costs.days_per_year * self.scenarios[w].probability / 1e6
    }

    fn handles_at(&self) -> Vec<Vec<usize>> {
        let mut at = vec![Vec::new(); self.sites.len()];
        for (h, hl) in self.handles.iter().enumerate() {
            at[hl.site].push(h);
        }
        at
    }

    /// Handles of `(path, type)` at the nodes of a constraint.
    fn constraint_handles(&self, c: &SubPathConstraint) -> Vec<usize> {
        let p = &self.paths[c.path];
        let row = &self.trie.assignments[&(c.path, c.type_index)];
        let nodes: BTreeSet<u32> = c.nodes.iter().copied().collect();
        p.nodes.iter().zip(row).filter(|(n, _)| nodes.contains(n)).map(|(_, &h)| h).collect()
    }

    /// Expected busy spots at every site for one slot given handle values.
    pub fn site_load(&self, slot: usize, gamma: &[f64]) -> Vec<f64> {
        let (w, t) = self.slot(slot);
        let mut d = vec![0.0; self.sites.len()];
        for (h, hl) in self.handles.iter().enumerate() {
            d[hl.site] += hl.load[w][t] * gamma[h];
        }
        d
    }

    /// Handle values implied by per-(path, type) choice node lists; a shared
    /// handle is on when any user selects it.
    pub fn gamma_from_choices(&self, choices: &[Choice]) -> Result<Vec<f64>> {
        let mut gamma = vec![0.0; self.handles.len()];
        for c in choices {
            let Some(row) = self.trie.assignments.get(&(c.path, c.type_index)) else {
                return Err(CoreError::validation(format!("plan names unknown path {} / type {}", c.path, c.type_index)));
            };
            let p = &self.paths[c.path];
            if (p.origin, p.destination) != (c.origin, c.destination) {
                return Err(CoreError::validation(format!(
                    "plan path {} is {}->{}, instance has {}->{}",
                    c.path, c.origin, c.destination, p.origin, p.destination
                )));
            }
            for n in &c.nodes {
                let Some(j) = p.nodes.iter().position(|x| x == n) else {
                    return Err(CoreError::validation(format!("node {n} is not on path {}", c.path)));
                };
                gamma[row[j]] = 1.0;
            }
        }
        Ok(gamma)
    }
}

/// Variable handles of an assembled model.
#[derive(Debug, Clone)]
pub struct PlanVars {
    pub x: Vec<Var>,
    pub y: Vec<Var>,
    /// Substation expansion, MVA.
    pub psub: Vec<Var>,
    pub gamma: Vec<Var>,
    pub slots: Vec<SlotVars>,
    pub sizing_cones: usize,
}

#[derive(Debug, Clone)]
pub struct SlotVars {
    /// Served and unserved charging load per site, per unit; `None` where the site has no demand.
    pub pev: Vec<Option<(Var, Var)>>,
    pub grid: BranchFlowVars,
}

pub struct Assembled {
    pub model: Model,
    pub vars: PlanVars,
}

/// First-stage objective terms of a site, M$ per year.
fn site_costs(inst: &Instance, s: usize) -> (f64, f64, f64, f64) {
    let c = &inst.costs;
    let site = &inst.sites[s];
    let zeta = c.capital_recovery() / 1e6;
    (
        zeta * c.station_usd * site.multiplier,
        zeta * c.spot_usd * site.multiplier,
        zeta * c.line_usd_per_kva_km * site.line_km * c.spot_kw,
        zeta * c.substation_usd_per_kva * site.multiplier * 1000.0,
    )
}

/// Builds the planning model. Only `x` and `γ` are binary; spots stay continuous.
pub fn assemble(inst: &Instance) -> Assembled {
    let mut m = Model::new();
    let c = &inst.costs;
    let grid = &inst.grid;
    let ns = inst.sites.len();
    let x: Vec<Var> = (0..ns).map(|_| m.add_binary()).collect();
    let y: Vec<Var> = (0..ns).map(|_| m.add_var(0.0, c.max_spots)).collect();
    let psub: Vec<Var> = (0..ns).map(|_| m.add_var(0.0, f64::INFINITY)).collect();
    let gamma: Vec<Var> = (0..inst.handles.len()).map(|_| m.add_binary()).collect();
    let mut obj = LinExpr::new();
    for s in 0..ns {
        let (cx, cy, cl, cp) = site_costs(inst, s);
        obj.add_term(x[s], cx).add_term(y[s], cy + cl).add_term(psub[s], cp);
        m.add_le(y[s] - x[s] * c.max_spots, 0.0);
        m.add_ge(psub[s] - y[s] * (c.spot_kw / 1000.0), -inst.sites[s].spare_kva / 1000.0);
    }
    for (h, hl) in inst.handles.iter().enumerate() {
        m.add_le(gamma[h] - x[hl.site], 0.0);
    }
    for con in &inst.constraints {
        let hs = inst.constraint_handles(con);
        m.add_ge(LinExpr::sum(hs.iter().map(|&h| (gamma[h], 1.0))), 1.0);
    }

    let at = inst.handles_at();
    let mut sizing_cones = 0;
    for (s, hs) in at.iter().enumerate() {
        if hs.is_empty() {
            continue;
        }
        let vectors: Vec<Vec<f64>> = (0..inst.slot_count())
            .map(|slot| {
                let (w, t) = inst.slot(slot);
                hs.iter().map(|&h| inst.handles[h].load[w][t]).collect()
            })
            .collect();
        for i in pareto_maximal(&vectors) {
            if vectors[i].iter().all(|&v| v == 0.0) {
                continue;
            }
            let g: Vec<Var> = hs.iter().map(|&h| gamma[h]).collect();
            SocSizing { coefficients: vectors[i].clone(), z: inst.z }.add_to_model(&mut m, y[s], &g);
            sizing_cones += 1;
        }
    }

    let spot_pu = grid.kw_to_pu(c.spot_kw);
    let mut slots = Vec::with_capacity(inst.slot_count());
    for slot in 0..inst.slot_count() {
        let (w, t) = inst.slot(slot);
        let mut p_load: Vec<LinExpr> = inst.base_p_kw[slot].iter().map(|&v| LinExpr::constant(grid.kw_to_pu(v))).collect();
        let mut q_load: Vec<LinExpr> =
            inst.base_q_kvar[slot].iter().map(|&v| LinExpr::constant(grid.kw_to_pu(v))).collect();
        let mut pev = vec![None; ns];
        let ew = inst.energy_weight(slot);
        for (s, hs) in at.iter().enumerate() {
            let demand: Vec<(Var, f64)> =
                hs.iter().filter(|&&h| inst.handles[h].load[w][t] > 0.0).map(|&h| (gamma[h], inst.handles[h].load[w][t] * spot_pu)).collect();
            if demand.is_empty() {
                continue;
            }
            let served = m.add_var(0.0, f64::INFINITY);
            let unserved = m.add_var(0.0, f64::INFINITY);
            m.add_eq(served + unserved - LinExpr::sum(demand), 0.0);
            let bus = inst.sites[s].bus;
            p_load[bus].add_term(served, 1.0);
            q_load[bus].add_term(served, c.tan_theta);
            obj.add_term(unserved, ew * c.penalty_usd_per_kwh * grid.pu_to_kw(1.0));
            pev[s] = Some((served, unserved));
        }
        let g = branch_flow_blocks(&mut m, grid, &inst.order, &p_load, &q_load);
        limit_blocks(&mut m, grid, &inst.order, &g);
        obj.add_term(g.p_import, ew * c.energy_usd_per_kwh * grid.pu_to_kw(1.0));
        slots.push(SlotVars { pev, grid: g });
    }
    m.set_objective(obj);
    Assembled { model: m, vars: PlanVars { x, y, psub, gamma, slots, sizing_cones } }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub node: u32,
    pub bus: u32,
    pub built: bool,
    /// Continuous spot count from the solve.
    pub spots: f64,
    pub spots_int: u64,
    pub psub_kva: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub path: usize,
    pub origin: u32,
    pub destination: u32,
    pub type_index: usize,
    /// Nodes where this (path, type) charges.
    pub nodes: Vec<u32>,
}

/// Annualized costs, M$ per year.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub station_investment: f64,
    pub grid_upgrade: f64,
    pub expected_energy: f64,
    pub expected_penalty: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Operation {
    pub scenario: u32,
    pub hour: usize,
    pub import_kw: f64,
    pub losses_kw: f64,
    pub demand_kw: f64,
    pub served_kw: f64,
    pub unserved_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: String,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub format_version: u32,
    pub alpha: f64,
    pub share_choices: bool,
    pub stations: Vec<Station>,
    pub choices: Vec<Choice>,
    pub costs: CostBreakdown,
    pub unsatisfied_ratio: f64,
    pub operations: Vec<Operation>,
    pub solver: Option<SolverSummary>,
}

impl Plan {
    pub fn built_stations(&self) -> usize {
        self.stations.iter().filter(|s| s.built).count()
    }

    pub fn total_spots(&self) -> f64 {
        self.stations.iter().map(|s| s.spots).sum()
    }

    pub fn total_spots_int(&self) -> u64 {
        self.stations.iter().map(|s| s.spots_int).sum()
    }

    /// Multiplies every station's spots by `factor` and re-derives the
    /// substation expansion it needs.
    pub fn scale_spots(&mut self, inst: &Instance, factor: f64) {
        for (st, site) in self.stations.iter_mut().zip(&inst.sites) {
            st.spots *= factor;
            st.spots_int = (st.spots - 1e-6 * st.spots.max(1.0)).ceil().max(0.0) as u64;
            st.psub_kva = (inst.costs.spot_kw * st.spots - site.spare_kva).max(0.0);
        }
        self.costs = plan_costs(inst, &self.stations, &self.operations);
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| CoreError::Json { context: "plan".into(), source: e })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Plan = serde_json::from_str(s).map_err(|e| CoreError::Json { context: "plan".into(), source: e })?;
        if p.format_version != PLAN_FORMAT_VERSION {
            return Err(CoreError::validation(format!("unsupported plan format_version {}", p.format_version)));
        }
        Ok(p)
    }
}

/// Investment terms from the station decisions plus expected operating terms
/// from the per-slot records.
pub fn plan_costs(inst: &Instance, stations: &[Station], operations: &[Operation]) -> CostBreakdown {
    let mut out = CostBreakdown::default();
    for (s, st) in stations.iter().enumerate() {
        let (cx, cy, cl, cp) = site_costs(inst, s);
        let x = if st.built { 1.0 } else { 0.0 };
        out.station_investment += cx * x + cy * st.spots;
        out.grid_upgrade += cl * st.spots + cp * st.psub_kva / 1000.0;
    }
    let c = &inst.costs;
    for (slot, op) in operations.iter().enumerate() {
        let ew = inst.energy_weight(slot);
        out.expected_energy += ew * c.energy_usd_per_kwh * op.import_kw;
        out.expected_penalty += ew * c.penalty_usd_per_kwh * op.unserved_kw;
    }
    out.total = out.station_investment + out.grid_upgrade + out.expected_energy + out.expected_penalty;
    out
}

/// Objective value implied by the plan's own records, M$ per year.
pub fn recompute_objective(inst: &Instance, plan: &Plan) -> f64 {
    plan_costs(inst, &plan.stations, &plan.operations).total
}

fn unsatisfied_ratio(inst: &Instance, operations: &[Operation]) -> f64 {
    let mut un = 0.0;
    let mut dem = 0.0;
    for (slot, op) in operations.iter().enumerate() {
        let pi = inst.scenarios[inst.slot(slot).0].probability;
        un += pi * op.unserved_kw;
        dem += pi * op.demand_kw;
    }
    if dem > 0.0 {
        un / dem
    } else {
        0.0
    }
}

/// Clears interior-point residue below 1e-6.
fn snap(v: f64) -> f64 {
    if v < 1e-6 {
        0.0
    } else {
        v
    }
}

fn extract(inst: &Instance, vars: &PlanVars, xv: &[f64], solver: Option<SolverSummary>) -> Plan {
    let grid = &inst.grid;
    let val = |v: Var| xv[v.index()];
    let stations: Vec<Station> = inst
        .sites
        .iter()
        .enumerate()
        .map(|(s, site)| {
            let built = val(vars.x[s]) > 0.5;
            let spots = if built { snap(val(vars.y[s])) } else { 0.0 };
            let spots_int = (spots - 1e-6 * spots.max(1.0)).ceil().max(0.0) as u64;
            Station {
                node: site.node,
                bus: grid.buses[site.bus],
                built,
                spots,
                spots_int,
                psub_kva: snap(val(vars.psub[s]) * 1000.0),
            }
        })
        .collect();
    let choices = inst
        .trie
        .assignments
        .iter()
        .map(|(&(q, k), row)| {
            let p = &inst.paths[q];
            Choice {
                path: q,
                origin: p.origin,
                destination: p.destination,
                type_index: k,
                nodes: p.nodes.iter().zip(row).filter(|(_, &h)| val(vars.gamma[h]) > 0.5).map(|(&n, _)| n).collect(),
            }
        })
        .collect();
    let operations: Vec<Operation> = vars
        .slots
        .iter()
        .enumerate()
        .map(|(slot, sv)| {
            let (w, t) = inst.slot(slot);
            let mut served = 0.0;
            let mut unserved = 0.0;
            for (a, b) in sv.pev.iter().flatten() {
                served += val(*a).max(0.0);
                unserved += val(*b).max(0.0);
            }
            let losses: f64 = sv.grid.l.iter().zip(&grid.lines).map(|(&l, ln)| grid.ohm_to_pu(ln.r_ohm) * val(l)).sum();
            Operation {
                scenario: inst.scenarios[w].id,
                hour: t,
                import_kw: grid.pu_to_kw(val(sv.grid.p_import)),
                losses_kw: grid.pu_to_kw(losses),
                demand_kw: grid.pu_to_kw(served + unserved),
                served_kw: grid.pu_to_kw(served),
                unserved_kw: grid.pu_to_kw(unserved),
            }
        })
        .collect();
    let costs = plan_costs(inst, &stations, &operations);
    Plan {
        format_version: PLAN_FORMAT_VERSION,
        alpha: inst.options.alpha,
        share_choices: inst.options.share_choices,
        unsatisfied_ratio: unsatisfied_ratio(inst, &operations),
        stations,
        choices,
        costs,
        operations,
        solver,
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub plan: Plan,
    pub objective: f64,
    pub bound: f64,
    pub nodes: usize,
    pub status: BnbStatus,
}

/// Assembles and solves the planning model by branch and bound.
/// Search settings taken from the case options.
pub fn search_settings(inst: &Instance) -> BnbSettings {
    BnbSettings { rel_gap: inst.options.rel_gap, max_nodes: inst.options.max_nodes, ..BnbSettings::default() }
}

pub fn solve(inst: &Instance, settings: Option<BnbSettings>) -> Result<SolveOutcome> {
    let Assembled { model, vars } = assemble(inst);
    let settings = settings.unwrap_or_else(|| search_settings(inst));
    let res = branch_and_bound(&model.to_mixed(), &settings)?;
    let x = match (res.status, res.x.as_ref()) {
        (BnbStatus::Infeasible, _) => {
            return Err(CoreError::Infeasible("no station set satisfies the covering and grid constraints".into()))
        }
        (BnbStatus::SolverFailure(s), _) => {
            return Err(CoreError::Solver(format!("root relaxation ended with {s:?}")))
        }
        (_, None) => return Err(CoreError::Solver(format!("search ended ({:?}) without an incumbent", res.status))),
        (_, Some(x)) => x,
    };
    let summary = SolverSummary {
        status: format!("{:?}", res.status),
        objective: res.objective,
        bound: res.bound,
        gap: res.gap(),
        nodes: res.nodes,
    };
    let plan = extract(inst, &vars, x, Some(summary));
    Ok(SolveOutcome { plan, objective: res.objective, bound: res.bound, nodes: res.nodes, status: res.status })
}

/// Solves the continuous model with every binary fixed; `x[s]` per site and
/// `gamma[h]` per handle. `None` when the fixed decisions are infeasible.
pub fn solve_fixed(inst: &Instance, x: &[f64], gamma: &[f64]) -> Result<Option<Plan>> {
    let Assembled { mut model, vars } = assemble(inst);
    for (v, &val) in vars.x.iter().zip(x) {
        model.fix(*v, val);
    }
    for (v, &val) in vars.gamma.iter().zip(gamma) {
        model.fix(*v, val);
    }
    let sol = solve_socp(model.program(), &Settings::default())?;
    match sol.status {
        s if s.has_solution() => Ok(Some(extract(inst, &vars, &sol.x, None))),
        chargesite_conic::Status::Infeasible => Ok(None),
        s => Err(CoreError::Solver(format!("fixed-decision solve ended with {s:?}"))),
    }
}

/// Independent post-solve checks; returns one message per violation.
/// Range feasibility is re-derived by simulating each trip, not from the
/// enumerated windows.
pub fn verify_plan(inst: &Instance, plan: &Plan) -> Vec<String> {
    let mut bad = Vec::new();
    let built: BTreeSet<u32> = plan.stations.iter().filter(|s| s.built).map(|s| s.node).collect();
    for c in &plan.choices {
        let Some(ap) = inst.augmented.get(&(c.path, c.type_index)) else {
            bad.push(format!("choice for unknown path {} type {}", c.path, c.type_index));
            continue;
        };
        let stops: BTreeSet<u32> = c.nodes.iter().copied().collect();
        if !range_feasible(ap, &stops) {
            bad.push(format!("type {} cannot complete path {}->{} charging at {:?}", c.type_index, c.origin, c.destination, c.nodes));
        }
        for n in &c.nodes {
            if !built.contains(n) {
                bad.push(format!("path {} type {} charges at node {n} without a station", c.path, c.type_index));
            }
        }
    }
    let c = &inst.costs;
    for (s, st) in plan.stations.iter().enumerate() {
        let tol = 1e-6 * c.max_spots.max(1.0);
        if st.spots > tol && !st.built {
            bad.push(format!("node {} has spots but no station", st.node));
        }
        if st.spots > c.max_spots + tol {
            bad.push(format!("node {} exceeds the spot limit", st.node));
        }
        let need = (c.spot_kw * st.spots - inst.sites[s].spare_kva).max(0.0);
        if st.psub_kva + 1e-3 < need {
            bad.push(format!("node {} substation expansion {} kVA below {need} kVA", st.node, st.psub_kva));
        }
    }
    bad
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationReport {
    pub format_version: u32,
    pub operations: Vec<Operation>,
    pub costs: CostBreakdown,
    pub unsatisfied_ratio: f64,
    /// Expected annual losses, MWh.
    pub expected_losses_mwh: f64,
}

/// Re-solves the operation of every slot with the plan's stations and charge
/// choices fixed. Served load at a site is capped by the largest mean load its
/// spots carry at the design service level.
pub fn evaluate_plan(inst: &Instance, plan: &Plan) -> Result<OperationReport> {
    if plan.stations.len() != inst.sites.len()
        || plan.stations.iter().zip(&inst.sites).any(|(st, s)| st.node != s.node)
    {
        return Err(CoreError::validation("plan stations do not match the instance's candidate sites"));
    }
    let violations = verify_plan(inst, plan);
    if !violations.is_empty() {
        return Err(CoreError::Infeasible(format!("fixed plan violates: {}", violations.join("; "))));
    }
    let gamma = inst.gamma_from_choices(&plan.choices)?;
    let grid = &inst.grid;
    let c = &inst.costs;
    let cap: Vec<f64> = plan
        .stations
        .iter()
        .map(|st| if st.built { grid.kw_to_pu(c.spot_kw * max_mean_load(st.spots, inst.z)) } else { 0.0 })
        .collect();
    let slots: Vec<Result<Operation>> = (0..inst.slot_count())
        .into_par_iter()
        .map(|slot| {
            let (w, t) = inst.slot(slot);
            let demand_pu: Vec<f64> =
                inst.site_load(slot, &gamma).iter().map(|d| grid.kw_to_pu(c.spot_kw * d)).collect();
            let mut m = Model::new();
            let mut p_load: Vec<LinExpr> =
                inst.base_p_kw[slot].iter().map(|&v| LinExpr::constant(grid.kw_to_pu(v))).collect();
            let mut q_load: Vec<LinExpr> =
                inst.base_q_kvar[slot].iter().map(|&v| LinExpr::constant(grid.kw_to_pu(v))).collect();
            let mut obj = LinExpr::new();
            let mut served = Vec::new();
            for (s, &d) in demand_pu.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                let hi = d.min(cap[s]);
                if hi <= 0.0 {
                    continue;
                }
                let v = m.add_var(0.0, hi);
                let bus = inst.sites[s].bus;
                p_load[bus].add_term(v, 1.0);
                q_load[bus].add_term(v, c.tan_theta);
                // Unserved d − v enters the objective through its negative.
                obj.add_term(v, -c.penalty_usd_per_kwh);
                obj.constant += c.penalty_usd_per_kwh * d;
                served.push(v);
            }
            let g = branch_flow_blocks(&mut m, grid, &inst.order, &p_load, &q_load);
            limit_blocks(&mut m, grid, &inst.order, &g);
            obj.add_term(g.p_import, c.energy_usd_per_kwh);
            m.set_objective(obj);
            let sol = solve_socp(m.program(), &Settings::default())?;
            if !sol.status.has_solution() {
                return Err(match sol.status {
                    chargesite_conic::Status::Infeasible => CoreError::Infeasible(format!(
                        "scenario {} hour {t}: the grid cannot carry the base load under the fixed plan",
                        inst.scenarios[w].id
                    )),
                    s => CoreError::Solver(format!("scenario {} hour {t}: solve ended with {s:?}", inst.scenarios[w].id)),
                });
            }
            let total_d: f64 = demand_pu.iter().sum();
            let srv: f64 = served.iter().map(|v| sol.x[v.index()]).sum();
            let losses: f64 = g.l.iter().zip(&grid.lines).map(|(&l, ln)| grid.ohm_to_pu(ln.r_ohm) * sol.x[l.index()]).sum();
            Ok(Operation {
                scenario: inst.scenarios[w].id,
                hour: t,
                import_kw: grid.pu_to_kw(sol.x[g.p_import.index()]),
                losses_kw: grid.pu_to_kw(losses),
                demand_kw: grid.pu_to_kw(total_d),
                served_kw: grid.pu_to_kw(srv),
                unserved_kw: grid.pu_to_kw((total_d - srv).max(0.0)),
            })
        })
        .collect();
    let operations = slots.into_iter().collect::<Result<Vec<_>>>()?;
    let costs = plan_costs(inst, &plan.stations, &operations);
    let expected_losses_mwh = operations
        .iter()
        .enumerate()
        .map(|(slot, op)| inst.costs.days_per_year * inst.scenarios[inst.slot(slot).0].probability * op.losses_kw / 1000.0)
        .sum();
    Ok(OperationReport {
        format_version: PLAN_FORMAT_VERSION,
        unsatisfied_ratio: unsatisfied_ratio(inst, &operations),
        operations,
        costs,
        expected_losses_mwh,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub label: String,
    pub share_choices: Option<bool>,
    pub traffic_multiplier: Option<f64>,
    pub collapse_ranges: Option<bool>,
}

impl Variant {
    pub fn base() -> Self {
        Self { label: "base".into(), share_choices: None, traffic_multiplier: None, collapse_ranges: None }
    }

    /// Sharing off, doubled traffic and shortest-range collapse next to the base case.
    pub fn standard_grid() -> Vec<Self> {
        vec![
            Self::base(),
            Self { label: "no_sharing".into(), share_choices: Some(false), ..Self::base() },
            Self { label: "traffic_x2".into(), traffic_multiplier: Some(2.0), ..Self::base() },
            Self { label: "shortest_range".into(), collapse_ranges: Some(true), ..Self::base() },
        ]
    }

    pub fn apply(&self, case: &CaseInputs) -> CaseInputs {
        let mut c = case.clone();
        if let Some(s) = self.share_choices {
            c.options.share_choices = s;
        }
        if let Some(t) = self.traffic_multiplier {
            c.options.traffic_multiplier = case.options.traffic_multiplier * t;
        }
        if let Some(r) = self.collapse_ranges {
            c.options.collapse_ranges = r;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub share_choices: bool,
    pub traffic_multiplier: f64,
    pub collapse_ranges: bool,
    pub stations: usize,
    pub spots: f64,
    pub spots_int: u64,
    pub investment: f64,
    pub energy: f64,
    pub penalty: f64,
    pub total: f64,
    pub unsatisfied_ratio: f64,
    /// Same plan re-evaluated with the true fleet ranges and the variant's traffic.
    pub actual_total: f64,
    pub actual_unsatisfied_ratio: f64,
    pub gap: f64,
}

pub fn sweep(case: &CaseInputs, variants: &[Variant]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(variants.len());
    for v in variants {
        let c = v.apply(case);
        let inst = c.instance()?;
        let out = solve(&inst, None)?;
        let plan = &out.plan;
        let actual = if c.options.collapse_ranges {
            let mut reference = c.clone();
            reference.options.collapse_ranges = false;
            evaluate_plan(&reference.instance()?, plan)?
        } else {
            evaluate_plan(&inst, plan)?
        };
        rows.push(SweepRow {
            label: v.label.clone(),
            share_choices: c.options.share_choices,
            traffic_multiplier: c.options.traffic_multiplier,
            collapse_ranges: c.options.collapse_ranges,
            stations: plan.built_stations(),
            spots: plan.total_spots(),
            spots_int: plan.total_spots_int(),
            investment: plan.costs.station_investment + plan.costs.grid_upgrade,
            energy: plan.costs.expected_energy,
            penalty: plan.costs.expected_penalty,
            total: plan.costs.total,
            unsatisfied_ratio: plan.unsatisfied_ratio,
            actual_total: actual.costs.total,
            actual_unsatisfied_ratio: actual.unsatisfied_ratio,
            gap: plan.solver.as_ref().map(|s| s.gap).unwrap_or(0.0),
        });
    }
    Ok(rows)
}
