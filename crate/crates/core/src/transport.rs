//! Highway network, origin-destination flows and the driving-range covering logic.
//!
//! Each OD path is extended with two pseudo nodes per vehicle type: a pseudo
//! origin `R_k − D_a` km before the entry node (a vehicle full at the pseudo
//! origin reaches the entry node with `D_a` km left) and a pseudo destination
//! `D_d` km past the exit node. A vehicle completes the trip iff every
//! violating window of the extended path (see [`violates`]) contains a charging stop.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::io::Write;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const HOURS: usize = 24;

/// Tolerance on km comparisons; lengths are physical so absolute slack is fine.
const KM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxOrigin {
    pub from: u32,
    pub to: u32,
    /// Distance from `from` along the original arc.
    pub offset_km: f64,
    pub arc_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: u32,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auxiliary: Option<AuxOrigin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

impl Node {
    pub fn new(id: u32, weight: f64) -> Self {
        Self { id, weight, auxiliary: None, x: None, y: None }
    }

    pub fn is_auxiliary(&self) -> bool {
        self.auxiliary.is_some()
    }
}

/// Undirected road segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub from: u32,
    pub to: u32,
    pub length_km: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransportNetwork {
    pub nodes: Vec<Node>,
    pub arcs: Vec<Arc>,
}

/// Index-based adjacency with neighbours sorted by node id.
#[derive(Debug, Clone)]
pub(crate) struct Graph {
    pub ids: Vec<u32>,
    pub index: BTreeMap<u32, usize>,
    pub adj: Vec<Vec<(usize, f64)>>,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    // Reversed for a min-heap; ties on the smaller index first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl Graph {
    pub fn dijkstra(&self, src: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.ids.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(HeapItem(0.0, src));
        while let Some(HeapItem(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(w, len) in &self.adj[u] {
                let nd = d + len;
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(HeapItem(nd, w));
                }
            }
        }
        dist
    }
}

impl TransportNetwork {
    pub fn node(&self, id: u32) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn max_id(&self) -> u32 {
        self.nodes.iter().map(|n| n.id).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id) {
                return Err(CoreError::validation(format!("duplicate node id {}", n.id)));
            }
            if !(n.weight >= 0.0 && n.weight.is_finite()) {
                return Err(CoreError::validation(format!("node {} has invalid weight {}", n.id, n.weight)));
            }
        }
        if self.nodes.is_empty() {
            return Err(CoreError::validation("network has no nodes"));
        }
        for a in &self.arcs {
            if !seen.contains(&a.from) || !seen.contains(&a.to) {
                return Err(CoreError::validation(format!("arc {}-{} references an unknown node", a.from, a.to)));
            }
            if a.from == a.to {
                return Err(CoreError::validation(format!("arc {}-{} is a self loop", a.from, a.to)));
            }
            if !(a.length_km > 0.0 && a.length_km.is_finite()) {
                return Err(CoreError::validation(format!(
                    "arc {}-{} has non-positive length {}",
                    a.from, a.to, a.length_km
                )));
            }
        }
        let g = self.graph();
        let d = g.dijkstra(0);
        if let Some(i) = d.iter().position(|x| x.is_infinite()) {
            return Err(CoreError::validation(format!(
                "network is disconnected: node {} unreachable from node {}",
                g.ids[i], g.ids[0]
            )));
        }
        Ok(())
    }

    pub(crate) fn graph(&self) -> Graph {
        let mut ids: Vec<u32> = self.nodes.iter().map(|n| n.id).collect();
        ids.sort_unstable();
        let index: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut adj = vec![Vec::new(); ids.len()];
        for a in &self.arcs {
            let (u, w) = (index[&a.from], index[&a.to]);
            adj[u].push((w, a.length_km));
            adj[w].push((u, a.length_km));
        }
        for row in &mut adj {
            // Parallel arcs: only the shortest one matters.
            row.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            row.dedup_by_key(|e| e.0);
        }
        Graph { ids, index, adj }
    }

    /// Shortest-path distance, `None` when disconnected or unknown.
    pub fn distance(&self, from: u32, to: u32) -> Option<f64> {
        let g = self.graph();
        let (s, t) = (*g.index.get(&from)?, *g.index.get(&to)?);
        let d = g.dijkstra(s)[t];
        d.is_finite().then_some(d)
    }
}

/// Splits every arc longer than `max_arc_km` into equal pieces joined by
/// zero-weight auxiliary nodes. New ids start above the largest existing id and
/// are assigned in arc order.
pub fn densify(net: &TransportNetwork, max_arc_km: f64) -> Result<TransportNetwork> {
    if !(max_arc_km > 0.0 && max_arc_km.is_finite()) {
        return Err(CoreError::validation(format!("max arc length {max_arc_km} must be positive")));
    }
    let mut out = TransportNetwork { nodes: net.nodes.clone(), arcs: Vec::new() };
    let mut next = net.max_id() + 1;
    for a in &net.arcs {
        let ratio = a.length_km / max_arc_km;
        let pieces = if ratio <= 1.0 + 1e-12 { 1 } else { (ratio - 1e-12).ceil() as usize };
        if pieces == 1 {
            out.arcs.push(*a);
            continue;
        }
        let seg = a.length_km / pieces as f64;
        let (pa, pb) = (net.node(a.from), net.node(a.to));
        let mut prev = a.from;
        for j in 1..pieces {
            let t = j as f64 / pieces as f64;
            let lerp = |f: fn(&Node) -> Option<f64>| match (pa.and_then(f), pb.and_then(f)) {
                (Some(u), Some(v)) => Some(u + t * (v - u)),
                _ => None,
            };
            out.nodes.push(Node {
                id: next,
                weight: 0.0,
                auxiliary: Some(AuxOrigin { from: a.from, to: a.to, offset_km: seg * j as f64, arc_km: a.length_km }),
                x: lerp(|n| n.x),
                y: lerp(|n| n.y),
            });
            out.arcs.push(Arc { from: prev, to: next, length_km: seg });
            prev = next;
            next += 1;
        }
        out.arcs.push(Arc { from: prev, to: a.to, length_km: seg });
    }
    Ok(out)
}

/// Daily OD flows from a gravity model, `flow(o, d) ∝ W_o·W_d / dist(o, d)^exponent`,
/// normalized to `total_daily_flow`. Only non-auxiliary nodes are origins or
/// destinations. With `pairs`, only the listed ordered pairs receive flow.
pub fn gravity_od_flows(
    net: &TransportNetwork,
    total_daily_flow: f64,
    exponent: f64,
    pairs: Option<&[(u32, u32)]>,
) -> Result<BTreeMap<(u32, u32), f64>> {
    if !(total_daily_flow >= 0.0 && total_daily_flow.is_finite()) {
        return Err(CoreError::validation(format!("total daily flow {total_daily_flow} must be non-negative")));
    }
    if !exponent.is_finite() {
        return Err(CoreError::validation("gravity exponent must be finite"));
    }
    let g = net.graph();
    let weight: BTreeMap<u32, &Node> = net.nodes.iter().map(|n| (n.id, n)).collect();
    let candidates: Vec<(u32, u32)> = match pairs {
        Some(p) => {
            for &(o, d) in p {
                for id in [o, d] {
                    match weight.get(&id) {
                        None => return Err(CoreError::validation(format!("OD pair ({o}, {d}) names unknown node {id}"))),
                        Some(n) if n.is_auxiliary() => {
                            return Err(CoreError::validation(format!("OD pair ({o}, {d}) uses auxiliary node {id}")))
                        }
                        _ => {}
                    }
                }
                if o == d {
                    return Err(CoreError::validation(format!("OD pair ({o}, {d}) has identical endpoints")));
                }
            }
            p.to_vec()
        }
        None => {
            let real: Vec<u32> = net.nodes.iter().filter(|n| !n.is_auxiliary()).map(|n| n.id).sorted().collect();
            real.iter().flat_map(|&o| real.iter().filter(move |&&d| d != o).map(move |&d| (o, d))).collect()
        }
    };
    let mut dist_cache: HashMap<u32, Vec<f64>> = HashMap::new();
    let mut raw = BTreeMap::new();
    for (o, d) in candidates {
        let w = weight[&o].weight * weight[&d].weight;
        if w <= 0.0 {
            continue;
        }
        let dist = dist_cache.entry(o).or_insert_with(|| g.dijkstra(g.index[&o]))[g.index[&d]];
        if !dist.is_finite() {
            log::warn!("OD pair ({o}, {d}) is disconnected and receives no flow");
            continue;
        }
        raw.insert((o, d), w / dist.powf(exponent));
    }
    let sum: f64 = raw.values().sum();
    if sum > 0.0 {
        for v in raw.values_mut() {
            *v *= total_daily_flow / sum;
        }
    }
    Ok(raw)
}

/// One directed trip between an OD pair along a fixed node sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub origin: u32,
    pub destination: u32,
    pub nodes: Vec<u32>,
    /// km from `origin` for each entry of `nodes`; strictly increasing.
    pub positions: Vec<f64>,
    /// Vehicles per day over all types in the highest-traffic scenario.
    pub daily_flow: f64,
}

impl Path {
    pub fn length_km(&self) -> f64 {
        *self.positions.last().unwrap_or(&0.0)
    }
}

/// Shortest path per OD pair. Among equally short routes the lexicographically
/// smallest node-id sequence wins.
pub fn shortest_paths(net: &TransportNetwork, od_pairs: &[(u32, u32)]) -> Result<Vec<Path>> {
    let g = net.graph();
    let mut from_dest: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut out = Vec::with_capacity(od_pairs.len());
    for &(o, d) in od_pairs {
        let (Some(&s), Some(&t)) = (g.index.get(&o), g.index.get(&d)) else {
            return Err(CoreError::validation(format!("OD pair ({o}, {d}) names an unknown node")));
        };
        let dist = from_dest.entry(t).or_insert_with(|| g.dijkstra(t));
        if !dist[s].is_finite() {
            return Err(CoreError::validation(format!("OD pair ({o}, {d}) is unreachable")));
        }
        let mut nodes = vec![o];
        let mut positions = vec![0.0];
        let mut u = s;
        while u != t {
            let tol = KM_EPS * dist[u].max(1.0);
            let &(w, len) = g.adj[u]
                .iter()
                .find(|&&(w, len)| (dist[u] - (len + dist[w])).abs() <= tol && dist[w] < dist[u])
                .expect("a tight arc exists on every shortest-path tree");
            nodes.push(g.ids[w]);
            positions.push(positions.last().unwrap() + len);
            u = w;
        }
        out.push(Path { origin: o, destination: d, nodes, positions, daily_flow: 0.0 });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PevType {
    pub id: u32,
    pub range_km: f64,
    pub energy_kwh_per_km: f64,
    /// Fraction of the fleet.
    pub share: f64,
}

pub fn validate_types(types: &[PevType]) -> Result<()> {
    if types.is_empty() {
        return Err(CoreError::validation("no vehicle types given"));
    }
    for t in types {
        if !(t.range_km > 0.0 && t.range_km.is_finite()) {
            return Err(CoreError::validation(format!("type {} has non-positive range", t.id)));
        }
        if !(t.energy_kwh_per_km >= 0.0 && t.energy_kwh_per_km.is_finite()) {
            return Err(CoreError::validation(format!("type {} has invalid energy rate", t.id)));
        }
        if !(t.share >= 0.0 && t.share.is_finite()) {
            return Err(CoreError::validation(format!("type {} has invalid share", t.id)));
        }
    }
    let total: f64 = types.iter().map(|t| t.share).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CoreError::validation(format!("type shares sum to {total}, expected 1")));
    }
    Ok(())
}

/// Path extended by the pseudo origin and destination of one vehicle type.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPath {
    pub path: usize,
    pub type_index: usize,
    pub range_km: f64,
    pub entry_arc_km: f64,
    pub exit_arc_km: f64,
    /// Real node ids, in travel order.
    pub nodes: Vec<u32>,
    /// `nodes.len() + 2` positions: pseudo origin at 0, then the real nodes,
    /// then the pseudo destination.
    pub positions: Vec<f64>,
}

pub fn augment(
    path: &Path,
    path_index: usize,
    ty: &PevType,
    type_index: usize,
    d_a: f64,
    d_d: f64,
) -> Result<AugmentedPath> {
    if !(d_a >= 0.0 && d_d >= 0.0) {
        return Err(CoreError::validation("entry and exit ranges must be non-negative"));
    }
    if ty.range_km < d_a {
        return Err(CoreError::Infeasible(format!(
            "type {} has range {} km below the entry range {d_a} km",
            ty.id, ty.range_km
        )));
    }
    let entry = ty.range_km - d_a;
    let mut positions = Vec::with_capacity(path.nodes.len() + 2);
    positions.push(0.0);
    positions.extend(path.positions.iter().map(|p| entry + p));
    positions.push(entry + path.length_km() + d_d);
    Ok(AugmentedPath {
        path: path_index,
        type_index,
        range_km: ty.range_km,
        entry_arc_km: entry,
        exit_arc_km: d_d,
        nodes: path.nodes.clone(),
        positions,
    })
}

/// At least one node of `nodes` must host a charge choice of this (path, type).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubPathConstraint {
    pub path: usize,
    pub type_index: usize,
    pub nodes: Vec<u32>,
    /// Extent of the violating window on the augmented path, km.
    pub start_km: f64,
    pub end_km: f64,
}

/// Whether the stretch between augmented positions `u < w` needs a charging
/// stop strictly inside it. Consecutive stops at real nodes must be closer than
/// the range; legs from the pseudo origin or to the pseudo destination may use
/// the full range, since `D_a` and `D_d` already hold a reserve.
pub fn violates(ap: &AugmentedPath, u: usize, w: usize) -> bool {
    let d = ap.positions[w] - ap.positions[u];
    if u == 0 || w == ap.positions.len() - 1 {
        d > ap.range_km + KM_EPS
    } else {
        d >= ap.range_km - KM_EPS
    }
}

/// Interiors of the minimal violating windows.
///
/// For each start `u` let `w(u)` be the first violating end. The window
/// `(u, w(u))` is minimal iff no later start has `w(u') ≤ w(u)`; every other
/// violating window contains the interior of a minimal one.
pub fn enumerate_subpaths(ap: &AugmentedPath) -> Result<Vec<SubPathConstraint>> {
    let p = &ap.positions;
    let m = p.len();
    let first: Vec<Option<usize>> = (0..m).map(|u| (u + 1..m).find(|&w| violates(ap, u, w))).collect();
    let mut later_min = vec![usize::MAX; m + 1];
    for u in (0..m).rev() {
        later_min[u] = later_min[u + 1].min(first[u].unwrap_or(usize::MAX));
    }
    let mut out = Vec::new();
    for u in 0..m {
        let Some(w) = first[u] else { continue };
        if later_min[u + 1] <= w {
            continue;
        }
        if w == u + 1 {
            return Err(CoreError::Infeasible(format!(
                "type {} on path {}: the {:.3} km stretch between positions {:.3} and {:.3} km leaves no charging stop within the {} km range",
                ap.type_index,
                ap.path,
                p[w] - p[u],
                p[u],
                p[w],
                ap.range_km
            )));
        }
        out.push(SubPathConstraint {
            path: ap.path,
            type_index: ap.type_index,
            // Pseudo nodes sit at 0 and m - 1 and are never interior.
            nodes: ap.nodes[u..w - 1].to_vec(),
            start_km: p[u],
            end_km: p[w],
        });
    }
    Ok(out)
}

/// Whether a vehicle completes `ap` when it may recharge at `stations`,
/// always moving on to the farthest station it may reach next.
pub fn range_feasible(ap: &AugmentedPath, stations: &BTreeSet<u32>) -> bool {
    let last = ap.positions.len() - 1;
    let mut cur = 0;
    loop {
        if !violates(ap, cur, last) {
            return true;
        }
        let next = (cur + 1..last)
            .take_while(|&j| !violates(ap, cur, j))
            .filter(|&j| stations.contains(&ap.nodes[j - 1]))
            .last();
        match next {
            Some(j) => cur = j,
            None => return false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinCover {
    pub count: usize,
    /// Every minimum hitting set, each sorted, in lexicographic order.
    pub sets: Vec<Vec<u32>>,
}

/// Exhaustive minimum hitting sets; exponential in the number of distinct nodes.
pub fn min_cover_witness(constraints: &[SubPathConstraint]) -> MinCover {
    let universe: BTreeSet<u32> = constraints.iter().flat_map(|c| c.nodes.iter().copied()).collect();
    let sets: Vec<BTreeSet<u32>> = constraints.iter().map(|c| c.nodes.iter().copied().collect()).collect();
    for k in 0..=universe.len() {
        let found: Vec<Vec<u32>> = universe
            .iter()
            .copied()
            .combinations(k)
            .filter(|combo| sets.iter().all(|s| combo.iter().any(|n| s.contains(n))))
            .collect();
        if !found.is_empty() {
            return MinCover { count: k, sets: found };
        }
    }
    unreachable!("the full universe hits every non-empty constraint")
}

/// One binary charge-choice variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceHandle {
    pub node: u32,
    pub type_index: usize,
    /// First node of every path using this handle.
    pub entry: u32,
}

/// Charge-choice handles per (path, type). With sharing, paths of one type that
/// enter at the same node reuse handles along their common node prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceTrie {
    pub handles: Vec<ChoiceHandle>,
    /// `(path, type) → handle per node of the path`.
    pub assignments: BTreeMap<(usize, usize), Vec<usize>>,
}

impl ChoiceTrie {
    /// Handles referenced by more than one (path, type).
    pub fn shared_handles(&self) -> usize {
        let mut uses = vec![0usize; self.handles.len()];
        for hs in self.assignments.values() {
            for &h in hs {
                uses[h] += 1;
            }
        }
        uses.iter().filter(|&&u| u > 1).count()
    }
}

pub fn build_choice_trie(paths: &[Path], type_count: usize, share: bool) -> ChoiceTrie {
    let mut handles = Vec::new();
    let mut children: HashMap<(usize, Option<usize>, u32), usize> = HashMap::new();
    let mut assignments = BTreeMap::new();
    for k in 0..type_count {
        for (q, path) in paths.iter().enumerate() {
            let entry = path.nodes[0];
            let mut parent = None;
            let mut row = Vec::with_capacity(path.nodes.len());
            for &node in &path.nodes {
                let mut fresh = || {
                    handles.push(ChoiceHandle { node, type_index: k, entry });
                    handles.len() - 1
                };
                let h = if share { *children.entry((k, parent, node)).or_insert_with(fresh) } else { fresh() };
                row.push(h);
                parent = Some(h);
            }
            assignments.insert((q, k), row);
        }
    }
    ChoiceTrie { handles, assignments }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusLoad {
    pub bus: u32,
    pub p_kw: Vec<f64>,
    pub q_kvar: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: u32,
    pub probability: f64,
    /// Daily traffic relative to the highest-traffic scenario.
    #[serde(default = "one")]
    pub traffic_scale: f64,
    /// Relative departure intensity per hour, 24 entries.
    pub traffic_shape: Vec<f64>,
    #[serde(default)]
    pub base_load: Vec<BusLoad>,
}

fn one() -> f64 {
    1.0
}

pub fn validate_scenarios(scenarios: &[Scenario]) -> Result<()> {
    if scenarios.is_empty() {
        return Err(CoreError::validation("no scenarios given"));
    }
    let mut ids = BTreeSet::new();
    for s in scenarios {
        if !ids.insert(s.id) {
            return Err(CoreError::validation(format!("duplicate scenario id {}", s.id)));
        }
        if !(s.probability >= 0.0 && s.probability.is_finite()) {
            return Err(CoreError::validation(format!("scenario {} has invalid probability", s.id)));
        }
        if !(s.traffic_scale >= 0.0 && s.traffic_scale.is_finite()) {
            return Err(CoreError::validation(format!("scenario {} has invalid traffic scale", s.id)));
        }
        if s.traffic_shape.len() != HOURS || s.traffic_shape.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(CoreError::validation(format!(
                "scenario {} needs {HOURS} non-negative traffic weights",
                s.id
            )));
        }
        for b in &s.base_load {
            if b.p_kw.len() != HOURS || b.q_kvar.len() != HOURS {
                return Err(CoreError::validation(format!(
                    "scenario {} bus {} load profile must have {HOURS} entries",
                    s.id, b.bus
                )));
            }
            if b.p_kw.iter().chain(&b.q_kvar).any(|v| !v.is_finite()) {
                return Err(CoreError::validation(format!("scenario {} bus {} has non-finite load", s.id, b.bus)));
            }
        }
    }
    let total: f64 = scenarios.iter().map(|s| s.probability).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CoreError::validation(format!("scenario probabilities sum to {total}, expected 1")));
    }
    Ok(())
}

/// Hourly arrival rate (vehicles/hour, all types) at every node of `path`.
/// A node `p` km downstream sees the departure profile delayed by
/// `⌊p / speed⌋` hours, wrapping within the day.
pub fn temporal_node_rates(path: &Path, scenario: &Scenario, speed_kmh: f64) -> Result<Vec<[f64; HOURS]>> {
    if !(speed_kmh > 0.0 && speed_kmh.is_finite()) {
        return Err(CoreError::validation(format!("speed {speed_kmh} km/h must be positive")));
    }
    let total: f64 = scenario.traffic_shape.iter().sum();
    let daily = path.daily_flow * scenario.traffic_scale;
    let mut out = Vec::with_capacity(path.nodes.len());
    for &pos in &path.positions {
        let mut r = [0.0; HOURS];
        if total > 0.0 {
            let shift = (pos / speed_kmh + 1e-9).floor() as usize % HOURS;
            for (t, slot) in r.iter_mut().enumerate() {
                *slot = daily * scenario.traffic_shape[(t + HOURS - shift) % HOURS] / total;
            }
        }
        out.push(r);
    }
    Ok(out)
}

pub fn write_flows_csv<W: Write>(w: W, flows: &BTreeMap<(u32, u32), f64>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["origin", "destination", "flow_veh_per_day"])?;
    for (&(o, d), f) in flows {
        wr.write_record([o.to_string(), d.to_string(), f.to_string()])?;
    }
    wr.flush().map_err(|e| CoreError::Io { path: "flows csv".into(), source: e })?;
    Ok(())
}

pub fn write_constraints_csv<W: Write>(w: W, constraints: &[SubPathConstraint]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["path", "type_index", "start_km", "end_km", "nodes"])?;
    for c in constraints {
        wr.write_record([
            c.path.to_string(),
            c.type_index.to_string(),
            c.start_km.to_string(),
            c.end_km.to_string(),
            c.nodes.iter().join(" "),
        ])?;
    }
    wr.flush().map_err(|e| CoreError::Io { path: "constraints csv".into(), source: e })?;
    Ok(())
}
