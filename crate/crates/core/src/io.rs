//! Case bundles on disk and plan / report serialization.
//!
//! A case manifest is a JSON object whose `network`, `grid`, `scenarios`,
//! `types`, `costs` and `options` entries are either inline values or paths to
//! JSON files, resolved relative to the manifest's directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::DistributionNetwork;
use crate::planner::{CaseInputs, CostParameters, Operation, OperationReport, Plan, PlanOptions, SweepRow};
use crate::transport::{PevType, Scenario, TransportNetwork};

pub const CASE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    File(PathBuf),
    Inline(T),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseManifest {
    pub format_version: u32,
    #[serde(default)]
    pub name: String,
    pub network: Source<TransportNetwork>,
    pub grid: Source<DistributionNetwork>,
    pub scenarios: Source<Vec<Scenario>>,
    pub types: Source<Vec<PevType>>,
    #[serde(default)]
    pub costs: Option<Source<CostParameters>>,
    #[serde(default)]
    pub options: Option<Source<PlanOptions>>,
}

fn io_err(path: &Path, source: std::io::Error) -> CoreError {
    CoreError::Io { path: path.display().to_string(), source }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CoreError::Json { context: path.display().to_string(), source: e })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CoreError::Json { context: path.display().to_string(), source: e })?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn resolve<T: DeserializeOwned>(base: &Path, s: Source<T>) -> Result<T> {
    match s {
        Source::Inline(v) => Ok(v),
        Source::File(p) => read_json(&base.join(p)),
    }
}

/// Loads and validates a case manifest with all referenced files.
pub fn load_case(path: &Path) -> Result<CaseInputs> {
    let m: CaseManifest = read_json(path)?;
    if m.format_version != CASE_FORMAT_VERSION {
        return Err(CoreError::validation(format!(
            "{}: unsupported format_version {} (expected {CASE_FORMAT_VERSION})",
            path.display(),
            m.format_version
        )));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let case = CaseInputs {
        network: resolve(base, m.network)?,
        grid: resolve(base, m.grid)?,
        scenarios: resolve(base, m.scenarios)?,
        types: resolve(base, m.types)?,
        costs: m.costs.map(|c| resolve(base, c)).transpose()?.unwrap_or_default(),
        options: m.options.map(|o| resolve(base, o)).transpose()?.unwrap_or_default(),
    };
    case.validate()?;
    Ok(case)
}

/// Writes a case as a single manifest with every part inline.
pub fn save_case_inline(path: &Path, case: &CaseInputs, name: &str) -> Result<()> {
    let m = CaseManifest {
        format_version: CASE_FORMAT_VERSION,
        name: name.to_string(),
        network: Source::Inline(case.network.clone()),
        grid: Source::Inline(case.grid.clone()),
        scenarios: Source::Inline(case.scenarios.clone()),
        types: Source::Inline(case.types.clone()),
        costs: Some(Source::Inline(case.costs.clone())),
        options: Some(Source::Inline(case.options.clone())),
    };
    write_json(path, &m)
}

pub fn read_plan(path: &Path) -> Result<Plan> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Plan::from_json(&text)
}

pub fn write_plan(path: &Path, plan: &Plan) -> Result<()> {
    fs::write(path, plan.to_json()? + "\n").map_err(|e| io_err(path, e))
}

pub fn read_report(path: &Path) -> Result<OperationReport> {
    read_json(path)
}

fn csv_flush<W: Write>(mut wr: csv::Writer<W>) -> Result<()> {
    wr.flush().map_err(|e| CoreError::Io { path: "<csv>".into(), source: e })
}

/// Columns: node, bus, built, spots, spots_int, psub_kva.
pub fn write_stations_csv<W: Write>(w: W, plan: &Plan) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for s in &plan.stations {
        wr.serialize(s)?;
    }
    csv_flush(wr)
}

/// Columns: scenario, hour, import_kw, losses_kw, demand_kw, served_kw, unserved_kw.
pub fn write_operations_csv<W: Write>(w: W, ops: &[Operation]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for o in ops {
        wr.serialize(o)?;
    }
    csv_flush(wr)
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    csv_flush(wr)
}

/// One row of the comparison table built from plan summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub stations: usize,
    pub spots: f64,
    pub spots_int: u64,
    pub station_investment_musd: f64,
    pub grid_upgrade_musd: f64,
    pub expected_energy_musd: f64,
    pub expected_penalty_musd: f64,
    pub total_musd: f64,
    pub unsatisfied_ratio: f64,
}

impl SummaryRow {
    pub fn from_plan(label: &str, p: &Plan) -> Self {
        Self {
            label: label.to_string(),
            stations: p.built_stations(),
            spots: p.total_spots(),
            spots_int: p.total_spots_int(),
            station_investment_musd: p.costs.station_investment,
            grid_upgrade_musd: p.costs.grid_upgrade,
            expected_energy_musd: p.costs.expected_energy,
            expected_penalty_musd: p.costs.expected_penalty,
            total_musd: p.costs.total,
            unsatisfied_ratio: p.unsatisfied_ratio,
        }
    }
}

/// Writes the header even when `rows` is empty.
pub fn write_summary_csv<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record([
        "label",
        "stations",
        "spots",
        "spots_int",
        "station_investment_musd",
        "grid_upgrade_musd",
        "expected_energy_musd",
        "expected_penalty_musd",
        "total_musd",
        "unsatisfied_ratio",
    ])?;
    for r in rows {
        wr.serialize(r)?;
    }
    csv_flush(wr)
}
