//! Best-first branch-and-bound over binary variables.
//!
//! Every node is a continuous relaxation solved by [`solve_socp`] with the
//! binaries of the node fixed through their bounds. Children are solved when
//! created, so each queued node carries its own relaxation bound; the bound of a
//! child never drops below its parent's. Order is `(bound, id)`, which makes the
//! search deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::ipm::{solve_socp, Settings, Status};
use crate::program::{MixedConicProgram, ProgramError};

#[derive(Debug, Clone, Copy)]
pub struct BnbSettings {
    /// Stop when `(incumbent − bound) / max(|incumbent|, 1)` falls to this.
    pub rel_gap: f64,
    pub int_tol: f64,
    pub max_nodes: usize,
    /// Run a ceil-rounding dive from every `dive_every`-th expanded node (0 disables).
    pub dive_every: usize,
    pub ipm: Settings,
    pub verbose: bool,
}

impl Default for BnbSettings {
    fn default() -> Self {
        Self {
            rel_gap: 0.005,
            int_tol: 1e-6,
            max_nodes: 50_000,
            dive_every: 25,
            ipm: Settings::default(),
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnbStatus {
    /// Incumbent proven within `rel_gap` of the optimum.
    Optimal,
    Infeasible,
    /// Node limit hit; the incumbent (if any) and bound are still valid.
    NodeLimit,
    /// The root relaxation could not be solved.
    SolverFailure(Status),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRecord {
    pub nodes: usize,
    pub bound: f64,
    pub incumbent: f64,
}

#[derive(Debug, Clone)]
pub struct BnbResult {
    pub status: BnbStatus,
    /// Best integral solution, binaries snapped to exactly 0 or 1.
    pub x: Option<Vec<f64>>,
    pub objective: f64,
    pub bound: f64,
    pub nodes: usize,
    /// Relaxations that ended without a usable answer and were discarded.
    pub failed_relaxations: usize,
    pub history: Vec<BoundRecord>,
}

impl BnbResult {
    pub fn gap(&self) -> f64 {
        rel_gap(self.objective, self.bound)
    }
}

fn rel_gap(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() {
        return f64::INFINITY;
    }
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

struct Node {
    id: usize,
    bound: f64,
    /// Per binary: None = free, Some(v) = fixed.
    fixing: Vec<Option<bool>>,
    x: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Reversed so that BinaryHeap pops the smallest (bound, id).
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

enum Relax {
    Solved { obj: f64, x: Vec<f64> },
    Infeasible,
    Failed(Status),
}

struct Search<'a> {
    base: &'a MixedConicProgram,
    settings: BnbSettings,
    work: crate::program::ConicProgram,
    incumbent: f64,
    best_x: Option<Vec<f64>>,
    failed: usize,
}

impl Search<'_> {
    fn relax(&mut self, fixing: &[Option<bool>]) -> Relax {
        let base = &self.base.program;
        for (k, &j) in self.base.binaries.iter().enumerate() {
            match fixing[k] {
                None => {
                    self.work.lower[j] = base.lower[j];
                    self.work.upper[j] = base.upper[j];
                }
                Some(v) => {
                    let v = if v { 1.0 } else { 0.0 };
                    if v < base.lower[j] || v > base.upper[j] {
                        return Relax::Infeasible;
                    }
                    self.work.lower[j] = v;
                    self.work.upper[j] = v;
                }
            }
        }
        let sol = match solve_socp(&self.work, &self.settings.ipm) {
            Ok(s) => s,
            Err(_) => return Relax::Failed(Status::NumericalError),
        };
        match sol.status {
            Status::Optimal | Status::AlmostOptimal => Relax::Solved { obj: sol.objective, x: sol.x },
            Status::Infeasible => Relax::Infeasible,
            other => Relax::Failed(other),
        }
    }

    fn most_fractional(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (k, &j) in self.base.binaries.iter().enumerate() {
            let v = x[j];
            let frac = v - v.floor();
            let dist = frac.min(1.0 - frac);
            if dist > self.settings.int_tol {
                let score = (frac - 0.5).abs();
                if best.is_none_or(|(s, _)| score < s) {
                    best = Some((score, k));
                }
            }
        }
        best.map(|(_, k)| k)
    }

    fn offer(&mut self, obj: f64, x: &[f64]) {
        if obj < self.incumbent {
            let mut x = x.to_vec();
            for &j in &self.base.binaries {
                x[j] = x[j].round();
            }
            self.incumbent = obj;
            self.best_x = Some(x);
        }
    }

    /// Fixes every binary to `round(x)` (or `ceil(x − tol)` when `ceil`) and solves.
    fn rounding(&mut self, x: &[f64], ceil: bool) {
        let tol = self.settings.int_tol;
        let fixing: Vec<Option<bool>> = self
            .base
            .binaries
            .iter()
            .map(|&j| Some(if ceil { x[j] > tol } else { x[j] >= 0.5 }))
            .collect();
        match self.relax(&fixing) {
            Relax::Solved { obj, x } => self.offer(obj, &x),
            Relax::Failed(_) => self.failed += 1,
            Relax::Infeasible => {}
        }
    }
}

/// Solves a mixed-binary conic program to the relative gap in `settings`.
pub fn branch_and_bound(program: &MixedConicProgram, settings: &BnbSettings) -> Result<BnbResult, ProgramError> {
    program.validate()?;
    let nb = program.binaries.len();
    let mut s = Search {
        base: program,
        settings: *settings,
        work: program.program.clone(),
        incumbent: f64::INFINITY,
        best_x: None,
        failed: 0,
    };
    let mut history = Vec::new();
    let root_fix = vec![None; nb];
    let (root_obj, root_x) = match s.relax(&root_fix) {
        Relax::Solved { obj, x } => (obj, x),
        Relax::Infeasible => {
            return Ok(BnbResult {
                status: BnbStatus::Infeasible,
                x: None,
                objective: f64::INFINITY,
                bound: f64::INFINITY,
                nodes: 1,
                failed_relaxations: 0,
                history,
            })
        }
        Relax::Failed(st) => {
            return Ok(BnbResult {
                status: BnbStatus::SolverFailure(st),
                x: None,
                objective: f64::INFINITY,
                bound: f64::NEG_INFINITY,
                nodes: 1,
                failed_relaxations: 1,
                history,
            })
        }
    };
    let mut nodes = 1;
    let mut next_id = 1;
    if s.most_fractional(&root_x).is_none() {
        s.offer(root_obj, &root_x);
    } else {
        s.rounding(&root_x, false);
        s.rounding(&root_x, true);
    }
    let mut heap = BinaryHeap::new();
    heap.push(Node { id: 0, bound: root_obj, fixing: root_fix, x: root_x });
    let mut status = BnbStatus::Optimal;
    let mut bound = root_obj;
    let mut expanded = 0usize;

    while let Some(node) = heap.pop() {
        bound = node.bound;
        history.push(BoundRecord { nodes, bound, incumbent: s.incumbent });
        if settings.verbose {
            eprintln!("bnb nodes {nodes:6}  bound {bound:+.6e}  incumbent {:+.6e}", s.incumbent);
        }
        if rel_gap(s.incumbent, bound) <= settings.rel_gap {
            break;
        }
        let Some(k) = s.most_fractional(&node.x) else {
            s.offer(node.bound, &node.x);
            continue;
        };
        if nodes >= settings.max_nodes {
            heap.push(node);
            status = BnbStatus::NodeLimit;
            break;
        }
        expanded += 1;
        if settings.dive_every > 0 && expanded % settings.dive_every == 0 {
            s.rounding(&node.x, true);
        }
        for v in [false, true] {
            let mut fixing = node.fixing.clone();
            fixing[k] = Some(v);
            nodes += 1;
            match s.relax(&fixing) {
                Relax::Solved { obj, x } => {
                    let child_bound = obj.max(node.bound);
                    if s.most_fractional(&x).is_none() {
                        s.offer(obj, &x);
                    } else if child_bound < s.incumbent {
                        heap.push(Node { id: next_id, bound: child_bound, fixing, x });
                        next_id += 1;
                    }
                }
                Relax::Infeasible => {}
                Relax::Failed(_) => s.failed += 1,
            }
        }
    }
    if heap.is_empty() && status == BnbStatus::Optimal {
        // Exhausted: every node with a bound below the incumbent was expanded.
        bound = s.incumbent;
    } else {
        bound = bound.min(s.incumbent);
    }
    if s.best_x.is_none() && status == BnbStatus::Optimal {
        status = BnbStatus::Infeasible;
        bound = f64::INFINITY;
    }
    history.push(BoundRecord { nodes, bound, incumbent: s.incumbent });
    Ok(BnbResult {
        status,
        x: s.best_x,
        objective: s.incumbent,
        bound,
        nodes,
        failed_relaxations: s.failed,
        history,
    })
}
