use std::path::PathBuf;

use approx::assert_relative_eq;
use chargesite_core::grid::solve_power_flow;
use chargesite_core::io::{load_case, read_plan, write_plan};
use chargesite_core::planner::{
    assemble, evaluate_plan, recompute_objective, solve, solve_fixed, verify_plan, CaseInputs, CostParameters,
};
use chargesite_core::transport::HOURS;
use chargesite_core::CoreError;

fn toy() -> CaseInputs {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/toy_line/case.json");
    let mut c = load_case(&p).unwrap();
    c.options.rel_gap = 1e-6;
    c
}

#[test]
fn toy_plan_builds_one_valid_pair() {
    let inst = toy().instance().unwrap();
    let out = solve(&inst, None).unwrap();
    let built: Vec<u32> = out.plan.stations.iter().filter(|s| s.built).map(|s| s.node).collect();
    assert_eq!(built, vec![2, 4]);
    assert!(verify_plan(&inst, &out.plan).is_empty());
    // Frozen from the domain-level enumeration oracle in the acceptance suite.
    assert_relative_eq!(out.plan.costs.total, 2.159376, max_relative = 1e-6);
}

#[test]
fn objective_recomputes_from_plan() {
    let inst = toy().instance().unwrap();
    let out = solve(&inst, None).unwrap();
    assert_relative_eq!(recompute_objective(&inst, &out.plan), out.objective, max_relative = 1e-6);
}

#[test]
fn expansion_is_tight_at_optimum() {
    let inst = toy().instance().unwrap();
    let out = solve(&inst, None).unwrap();
    for (st, site) in out.plan.stations.iter().zip(&inst.sites) {
        let need = (inst.costs.spot_kw * st.spots - site.spare_kva).max(0.0);
        assert!((st.psub_kva - need).abs() < 1e-3, "node {} psub {} need {need}", st.node, st.psub_kva);
    }
}

#[test]
fn zero_traffic_builds_nothing() {
    let mut c = toy();
    c.options.total_daily_flow = 0.0;
    let inst = c.instance().unwrap();
    let out = solve(&inst, None).unwrap();
    assert_eq!(out.plan.built_stations(), 0);
    assert_eq!(out.plan.costs.station_investment + out.plan.costs.grid_upgrade, 0.0);
    let order = c.grid.validate_radial().unwrap();
    let mut energy = 0.0;
    for sc in &c.scenarios {
        for t in 0..HOURS {
            let (p, q) = c.grid.base_loads(&order, sc, t).unwrap();
            let pf = solve_power_flow(&c.grid, &order, &p, &q, true).unwrap();
            energy += 365.0 * sc.probability * c.costs.energy_usd_per_kwh * pf.p_import_kw / 1e6;
        }
    }
    assert_relative_eq!(out.plan.costs.total, energy, max_relative = 1e-6);
}

#[test]
fn evaluate_reproduces_operating_cost() {
    let inst = toy().instance().unwrap();
    let plan = solve(&inst, None).unwrap().plan;
    let rep = evaluate_plan(&inst, &plan).unwrap();
    assert_relative_eq!(rep.costs.total, plan.costs.total, max_relative = 1e-5);
    assert!(rep.unsatisfied_ratio < 1e-6);
}

#[test]
fn oversized_and_undersized_plans() {
    let inst = toy().instance().unwrap();
    let plan = solve(&inst, None).unwrap().plan;
    let base = evaluate_plan(&inst, &plan).unwrap();

    let mut big = plan.clone();
    big.scale_spots(&inst, 2.0);
    let r = evaluate_plan(&inst, &big).unwrap();
    assert!(r.unsatisfied_ratio < 1e-9);
    assert!(
        r.costs.station_investment + r.costs.grid_upgrade > base.costs.station_investment + base.costs.grid_upgrade
    );

    let mut small = plan.clone();
    small.scale_spots(&inst, 0.5);
    let r = evaluate_plan(&inst, &small).unwrap();
    assert!(r.unsatisfied_ratio > 0.05, "ratio {}", r.unsatisfied_ratio);
}

#[test]
fn plan_json_round_trips() {
    let inst = toy().instance().unwrap();
    let plan = solve(&inst, None).unwrap().plan;
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("plan.json");
    write_plan(&p, &plan).unwrap();
    assert_eq!(read_plan(&p).unwrap(), plan);
}

#[test]
fn plan_with_wrong_version_is_rejected() {
    let inst = toy().instance().unwrap();
    let mut plan = solve(&inst, None).unwrap().plan;
    plan.format_version = 9;
    let text = plan.to_json().unwrap();
    assert!(matches!(chargesite_core::planner::Plan::from_json(&text), Err(CoreError::Validation(_))));
}

#[test]
fn evaluate_rejects_range_infeasible_plan() {
    let inst = toy().instance().unwrap();
    let mut plan = solve(&inst, None).unwrap().plan;
    for c in &mut plan.choices {
        c.nodes.retain(|&n| n != 4);
    }
    let err = evaluate_plan(&inst, &plan).unwrap_err();
    assert!(matches!(err, CoreError::Infeasible(ref m) if m.contains("cannot complete")), "{err}");
}

#[test]
fn sharing_never_beats_independent_choices() {
    let case = {
        let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/toy_junction/case.json");
        let mut c = load_case(&p).unwrap();
        c.scenarios.truncate(1);
        c.scenarios[0].probability = 1.0;
        c.options.rel_gap = 1e-6;
        c
    };
    let shared = case.instance().unwrap();
    let mut off = case.clone();
    off.options.share_choices = false;
    let free = off.instance().unwrap();
    assert!(shared.trie.handles.len() < free.trie.handles.len());
    let on = solve(&shared, None).unwrap().objective;
    let off = solve(&free, None).unwrap().objective;
    assert!(off <= on * (1.0 + 1e-6), "off {off} on {on}");
}

#[test]
fn fixed_solve_matches_the_search() {
    let inst = toy().instance().unwrap();
    let out = solve(&inst, None).unwrap();
    let x: Vec<f64> = out.plan.stations.iter().map(|s| if s.built { 1.0 } else { 0.0 }).collect();
    let gamma = inst.gamma_from_choices(&out.plan.choices).unwrap();
    let fixed = solve_fixed(&inst, &x, &gamma).unwrap().unwrap();
    assert_relative_eq!(fixed.costs.total, out.plan.costs.total, max_relative = 1e-6);
}

#[test]
fn range_below_entrance_reserve_is_reported_before_solve() {
    let mut c = toy();
    c.types[0].range_km = 40.0;
    assert!(matches!(c.instance(), Err(CoreError::Infeasible(_))));
}

#[test]
fn unknown_coupling_bus_is_a_validation_error() {
    let mut c = toy();
    c.grid.coupling[0].bus = 77;
    assert!(matches!(c.instance(), Err(CoreError::Validation(_))));
}

#[test]
fn capital_recovery_factor() {
    let c = CostParameters::default();
    // r(1+r)^Y/((1+r)^Y-1) at r = 0.08, Y = 15.
    assert_relative_eq!(c.capital_recovery(), 0.116_829_54, max_relative = 1e-7);
    let z = CostParameters { discount_rate: 0.0, ..c };
    assert_relative_eq!(z.capital_recovery(), 1.0 / 15.0);
}

#[test]
fn assembled_model_is_byte_stable() {
    let inst = toy().instance().unwrap();
    let a = chargesite_conic::text::dump(&assemble(&inst).model.to_mixed());
    let b = chargesite_conic::text::dump(&assemble(&inst).model.to_mixed());
    assert_eq!(a, b);
}
