//! Discrete-event Monte Carlo of a single station under Poisson arrivals.
//!
//! Every vehicle needs exactly its class duration of charging. In FIFO mode a
//! full station evicts the vehicle that has charged longest to admit a new
//! arrival, so charging always starts on arrival. In queue mode arrivals wait
//! in a FIFO line for the earliest free spot.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{integer_spots, poisson_cdf, required_spots, ChargeClass};
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Fifo,
    Queue,
}

impl std::str::FromStr for SimMode {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fifo" => Ok(Self::Fifo),
            "queue" => Ok(Self::Queue),
            _ => Err(CoreError::validation(format!("unknown simulation mode {s:?}"))),
        }
    }
}

impl std::fmt::Display for SimMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fifo => "fifo",
            Self::Queue => "queue",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationConfig {
    pub spots: u64,
    pub classes: Vec<ChargeClass>,
    /// Measured horizon, hours.
    pub horizon_h: f64,
    pub seed: u64,
    /// Defaults to ten times the longest class duration.
    pub warmup_h: Option<f64>,
}

impl StationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon_h > 0.0 && self.horizon_h.is_finite()) {
            return Err(CoreError::validation("simulation horizon must be positive"));
        }
        if self.classes.is_empty() {
            return Err(CoreError::validation("at least one vehicle class is required"));
        }
        for c in &self.classes {
            if !(c.duration_h > 0.0 && c.duration_h.is_finite() && c.rate_per_h >= 0.0 && c.rate_per_h.is_finite()) {
                return Err(CoreError::validation("class durations must be positive and rates non-negative"));
            }
        }
        if let Some(w) = self.warmup_h {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(CoreError::validation("warm-up must be non-negative"));
            }
        }
        Ok(())
    }

    fn max_duration(&self) -> f64 {
        self.classes.iter().map(|c| c.duration_h).fold(0.0, f64::max)
    }

    pub fn warmup(&self) -> f64 {
        self.warmup_h.unwrap_or(10.0 * self.max_duration())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub time_h: f64,
    pub class: usize,
}

/// Per-class exponential inter-arrival streams, merged by time. Class `k`
/// draws from stream `k` of a ChaCha8 generator keyed by `seed`.
pub fn sample_arrivals(classes: &[ChargeClass], horizon_h: f64, seed: u64) -> Vec<Arrival> {
    let mut out = Vec::new();
    for (k, c) in classes.iter().enumerate() {
        if c.rate_per_h <= 0.0 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let exp = Exp::new(c.rate_per_h).expect("positive rate");
        let mut t = 0.0;
        loop {
            t += exp.sample(&mut rng);
            if t >= horizon_h {
                break;
            }
            out.push(Arrival { time_h: t, class: k });
        }
    }
    out.sort_by(|a, b| a.time_h.total_cmp(&b.time_h).then(a.class.cmp(&b.class)));
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub arrivals: u64,
    /// Started on arrival and charged the full duration.
    pub served_fully: u64,
    pub instant: u64,
    pub total_wait_h: f64,
}

impl ClassStats {
    pub fn service_level(&self) -> f64 {
        ratio(self.served_fully, self.arrivals)
    }

    pub fn instant_probability(&self) -> f64 {
        ratio(self.instant, self.arrivals)
    }

    pub fn mean_wait_h(&self) -> f64 {
        if self.arrivals == 0 {
            0.0
        } else {
            self.total_wait_h / self.arrivals as f64
        }
    }

    fn absorb(&mut self, o: &ClassStats) {
        self.arrivals += o.arrivals;
        self.served_fully += o.served_fully;
        self.instant += o.instant;
        self.total_wait_h += o.total_wait_h;
    }
}

fn ratio(a: u64, n: u64) -> f64 {
    if n == 0 {
        1.0
    } else {
        a as f64 / n as f64
    }
}

/// Outcome of one run, statistics over arrivals inside the measured window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub mode: SimMode,
    pub per_class: Vec<ClassStats>,
    /// Queue mode only: every arrival before the horizon end, split into
    /// departed and still present.
    pub system_arrivals: u64,
    pub system_departed: u64,
    pub system_present: u64,
    /// FIFO mode only: every recorded charge start coincided with its arrival.
    pub start_on_arrival: bool,
}

impl RunStats {
    pub fn total(&self) -> ClassStats {
        let mut t = ClassStats::default();
        for c in &self.per_class {
            t.absorb(c);
        }
        t
    }
}

/// Mean and 95 % half-width over replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Self { mean, half_width: f64::NAN };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, half_width: 1.96 * (var / n).sqrt() }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.half_width / 1.96
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub duration_h: f64,
    pub rate_per_h: f64,
    pub arrivals: u64,
    pub service_level: Estimate,
    pub instant_probability: Estimate,
    pub mean_wait_h: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub mode: SimMode,
    pub spots: u64,
    pub replications: usize,
    pub arrivals: u64,
    pub service_level: Estimate,
    pub instant_probability: Estimate,
    pub mean_wait_h: Estimate,
    pub per_class: Vec<ClassReport>,
}

fn run_arrivals(cfg: &StationConfig, extra_h: f64) -> (Vec<Arrival>, f64, f64) {
    let start = cfg.warmup();
    let end = start + cfg.horizon_h;
    (sample_arrivals(&cfg.classes, end + extra_h, cfg.seed), start, end)
}

/// FIFO-preemption run. Arrivals are generated one longest duration past the
/// horizon so every measured vehicle's fate is settled; ties in elapsed
/// charge evict the earliest arrival.
pub fn simulate_fifo(cfg: &StationConfig) -> Result<RunStats> {
    cfg.validate()?;
    let (arrivals, start, end) = run_arrivals(cfg, cfg.max_duration());
    let mut stats = vec![ClassStats::default(); cfg.classes.len()];
    // Onboard vehicles keyed by arrival order; value is the departure time.
    let mut onboard: BTreeMap<usize, f64> = BTreeMap::new();
    let mut departures: BinaryHeap<Reverse<(OrdF64, usize)>> = BinaryHeap::new();
    let mut evicted = vec![false; arrivals.len()];
    for (i, a) in arrivals.iter().enumerate() {
        while let Some(&Reverse((OrdF64(t), j))) = departures.peek() {
            if t > a.time_h {
                break;
            }
            departures.pop();
            onboard.remove(&j);
        }
        if cfg.spots == 0 {
            evicted[i] = true;
            continue;
        }
        if onboard.len() as u64 == cfg.spots {
            let (&oldest, _) = onboard.iter().next().expect("full station");
            onboard.remove(&oldest);
            evicted[oldest] = true;
        }
        let dep = a.time_h + cfg.classes[a.class].duration_h;
        onboard.insert(i, dep);
        departures.push(Reverse((OrdF64(dep), i)));
    }
    for (i, a) in arrivals.iter().enumerate() {
        if a.time_h < start || a.time_h >= end {
            continue;
        }
        let s = &mut stats[a.class];
        s.arrivals += 1;
        if !evicted[i] {
            s.served_fully += 1;
        }
        if cfg.spots > 0 {
            s.instant += 1;
        }
    }
    Ok(RunStats {
        mode: SimMode::Fifo,
        per_class: stats,
        system_arrivals: 0,
        system_departed: 0,
        system_present: 0,
        start_on_arrival: true,
    })
}

/// Waiting-queue run over a multi-server FIFO line. Without spots every
/// arrival waits forever.
pub fn simulate_queue(cfg: &StationConfig) -> Result<RunStats> {
    cfg.validate()?;
    let (arrivals, start, end) = run_arrivals(cfg, 0.0);
    let mut stats = vec![ClassStats::default(); cfg.classes.len()];
    let mut free: BinaryHeap<Reverse<OrdF64>> = (0..cfg.spots).map(|_| Reverse(OrdF64(0.0))).collect();
    let (mut departed, mut present) = (0u64, 0u64);
    for a in &arrivals {
        let (wait, dep) = match free.pop() {
            Some(Reverse(OrdF64(f))) => {
                let begin = f.max(a.time_h);
                let dep = begin + cfg.classes[a.class].duration_h;
                free.push(Reverse(OrdF64(dep)));
                (begin - a.time_h, dep)
            }
            None => (f64::INFINITY, f64::INFINITY),
        };
        if dep <= end {
            departed += 1;
        } else {
            present += 1;
        }
        if a.time_h < start {
            continue;
        }
        let s = &mut stats[a.class];
        s.arrivals += 1;
        s.total_wait_h += wait;
        if wait == 0.0 {
            s.instant += 1;
            s.served_fully += 1;
        }
    }
    Ok(RunStats {
        mode: SimMode::Queue,
        per_class: stats,
        system_arrivals: arrivals.len() as u64,
        system_departed: departed,
        system_present: present,
        start_on_arrival: false,
    })
}

pub fn simulate(cfg: &StationConfig, mode: SimMode) -> Result<RunStats> {
    match mode {
        SimMode::Fifo => simulate_fifo(cfg),
        SimMode::Queue => simulate_queue(cfg),
    }
}

/// SplitMix64 step; derives replication seeds from a master seed.
pub fn replication_seed(master: u64, rep: usize) -> u64 {
    let mut z = master.wrapping_add((rep as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `replications` independent copies in parallel and aggregates them in
/// replication order.
pub fn replicate(cfg: &StationConfig, mode: SimMode, replications: usize) -> Result<SimReport> {
    if replications == 0 {
        return Err(CoreError::validation("at least one replication is required"));
    }
    let runs: Vec<RunStats> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut c = cfg.clone();
            c.seed = replication_seed(cfg.seed, r);
            simulate(&c, mode)
        })
        .collect::<Result<_>>()?;
    let totals: Vec<ClassStats> = runs.iter().map(RunStats::total).collect();
    let est = |f: &dyn Fn(&ClassStats) -> f64, xs: &[ClassStats]| Estimate::of(&xs.iter().map(f).collect::<Vec<_>>());
    let per_class = cfg
        .classes
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let xs: Vec<ClassStats> = runs.iter().map(|r| r.per_class[k].clone()).collect();
            ClassReport {
                duration_h: c.duration_h,
                rate_per_h: c.rate_per_h,
                arrivals: xs.iter().map(|s| s.arrivals).sum(),
                service_level: est(&ClassStats::service_level, &xs),
                instant_probability: est(&ClassStats::instant_probability, &xs),
                mean_wait_h: est(&ClassStats::mean_wait_h, &xs),
            }
        })
        .collect();
    Ok(SimReport {
        mode,
        spots: cfg.spots,
        replications,
        arrivals: totals.iter().map(|s| s.arrivals).sum(),
        service_level: est(&ClassStats::service_level, &totals),
        instant_probability: est(&ClassStats::instant_probability, &totals),
        mean_wait_h: est(&ClassStats::mean_wait_h, &totals),
        per_class,
    })
}

/// Exact FIFO success probability for a single class: a vehicle keeps its
/// spot iff fewer than `spots` later arrivals land within its duration.
pub fn fifo_success_exact(spots: u64, mean_load: f64) -> f64 {
    poisson_cdf(spots as i64 - 1, mean_load)
}

/// `P(Poisson(Σ T_k·λ_k) ≤ spots)`, the tail expression the sizing rule approximates.
pub fn poisson_tail_oracle(spots: u64, mean_load: f64) -> f64 {
    poisson_cdf(spots as i64, mean_load)
}

/// One row of the validation grid CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub mode: SimMode,
    pub alpha: f64,
    /// Total arrival rate over all classes, per hour.
    pub lambda_per_h: f64,
    pub spots: u64,
    pub replications: usize,
    pub arrivals: u64,
    pub service_level: f64,
    pub service_half_width: f64,
    pub instant_probability: f64,
    pub instant_half_width: f64,
    pub mean_wait_h: f64,
    pub mean_wait_half_width: f64,
    pub oracle_tail: f64,
    pub oracle_exact_single_class: Option<f64>,
}

/// Classes scaled so their rates sum to `lambda` while keeping the given proportions.
pub fn scaled_classes(shape: &[ChargeClass], lambda: f64) -> Vec<ChargeClass> {
    let sum: f64 = shape.iter().map(|c| c.rate_per_h).sum();
    shape.iter().map(|c| ChargeClass::new(c.duration_h, lambda * c.rate_per_h / sum)).collect()
}

/// Sizes a station for every (α, λ) cell with the closed-form rule rounded up,
/// or uses `spots_override`, and simulates it.
#[allow(clippy::too_many_arguments)]
pub fn validation_grid(
    shape: &[ChargeClass],
    alphas: &[f64],
    lambdas: &[f64],
    spots_override: Option<u64>,
    mode: SimMode,
    horizon_h: f64,
    replications: usize,
    seed: u64,
) -> Result<Vec<GridCell>> {
    let mut cells = Vec::new();
    for (ai, &alpha) in alphas.iter().enumerate() {
        for (li, &lambda) in lambdas.iter().enumerate() {
            let classes = scaled_classes(shape, lambda);
            let sizing = required_spots(&classes, alpha)?;
            let spots = spots_override.unwrap_or_else(|| integer_spots(sizing.spots));
            let cfg = StationConfig {
                spots,
                classes: classes.clone(),
                horizon_h,
                seed: replication_seed(seed, ai * lambdas.len() + li),
                warmup_h: None,
            };
            let r = replicate(&cfg, mode, replications)?;
            cells.push(GridCell {
                mode,
                alpha,
                lambda_per_h: lambda,
                spots,
                replications,
                arrivals: r.arrivals,
                service_level: r.service_level.mean,
                service_half_width: r.service_level.half_width,
                instant_probability: r.instant_probability.mean,
                instant_half_width: r.instant_probability.half_width,
                mean_wait_h: r.mean_wait_h.mean,
                mean_wait_half_width: r.mean_wait_h.half_width,
                oracle_tail: poisson_tail_oracle(spots, sizing.mean_load),
                oracle_exact_single_class: (classes.len() == 1).then(|| fifo_success_exact(spots, sizing.mean_load)),
            });
        }
    }
    Ok(cells)
}

/// Columns follow [`GridCell`] field order.
pub fn write_grid_csv<W: Write>(w: W, cells: &[GridCell]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for c in cells {
        wr.serialize(c)?;
    }
    wr.flush().map_err(|e| CoreError::Io { path: "<csv>".into(), source: e })?;
    Ok(())
}

/// Total order on f64 by `total_cmp`; equality agrees with it.
#[derive(Debug, Clone, Copy)]
struct OrdF64(f64);

impl PartialEq for OrdF64 {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(spots: u64, classes: Vec<ChargeClass>, horizon_h: f64, seed: u64) -> StationConfig {
        StationConfig { spots, classes, horizon_h, seed, warmup_h: None }
    }

    #[test]
    fn zero_rate_gives_no_arrivals() {
        assert!(sample_arrivals(&[ChargeClass::new(1.0, 0.0)], 100.0, 3).is_empty());
    }

    #[test]
    fn poisson_count_concentrates() {
        let n = sample_arrivals(&[ChargeClass::new(1.0, 100.0)], 1000.0, 11).len() as f64;
        assert!((n - 100_000.0).abs() < 3.0 * 100_000f64.sqrt(), "count {n}");
    }

    #[test]
    fn merged_stream_keeps_class_counts() {
        let a = ChargeClass::new(1.0, 7.0);
        let b = ChargeClass::new(0.5, 3.0);
        let both = sample_arrivals(&[a, b], 200.0, 5);
        let only_a = sample_arrivals(&[a, ChargeClass::new(0.5, 0.0)], 200.0, 5);
        let na = both.iter().filter(|x| x.class == 0).count();
        assert_eq!(na, only_a.len());
        assert!(both.windows(2).all(|w| w[0].time_h <= w[1].time_h));
    }

    #[test]
    fn huge_station_serves_everyone() {
        let r = simulate_fifo(&cfg(10_000, vec![ChargeClass::new(1.0, 50.0)], 100.0, 1)).unwrap();
        assert_eq!(r.total().service_level(), 1.0);
    }

    #[test]
    fn no_spots_fail_everyone() {
        let c = cfg(0, vec![ChargeClass::new(1.0, 5.0)], 50.0, 1);
        assert_eq!(simulate_fifo(&c).unwrap().total().service_level(), 0.0);
        let q = simulate_queue(&c).unwrap().total();
        assert_eq!(q.instant_probability(), 0.0);
        assert!(q.mean_wait_h().is_infinite());
    }

    #[test]
    fn empty_queue_run() {
        let q = simulate_queue(&cfg(2, vec![ChargeClass::new(1.0, 0.0)], 50.0, 1)).unwrap().total();
        assert_eq!(q.mean_wait_h(), 0.0);
        assert_eq!(q.instant_probability(), 1.0);
    }

    #[test]
    fn queue_conserves_vehicles() {
        let r = simulate_queue(&cfg(3, vec![ChargeClass::new(1.0, 4.0)], 200.0, 9)).unwrap();
        assert_eq!(r.system_arrivals, r.system_departed + r.system_present);
    }

    #[test]
    fn single_server_eviction_by_hand() {
        // One spot, T = 1: a vehicle survives iff the next arrival comes at least 1 h later.
        let c = cfg(1, vec![ChargeClass::new(1.0, 1.0)], 1.0, 1);
        let arr = sample_arrivals(&c.classes, 15.0, 1);
        let r = simulate_fifo(&StationConfig { warmup_h: Some(0.0), horizon_h: 14.0, ..c }).unwrap();
        let mut expected = 0;
        for (i, a) in arr.iter().enumerate().filter(|(_, a)| a.time_h < 14.0) {
            let next = arr.get(i + 1).map(|b| b.time_h).unwrap_or(f64::INFINITY);
            if next >= a.time_h + 1.0 {
                expected += 1;
            }
        }
        assert_eq!(r.total().served_fully, expected);
    }

    #[test]
    fn replicate_is_reproducible() {
        let c = cfg(5, vec![ChargeClass::new(1.0, 4.0), ChargeClass::new(0.5, 2.0)], 100.0, 42);
        let a = replicate(&c, SimMode::Fifo, 4).unwrap();
        let b = replicate(&c, SimMode::Fifo, 4).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn mode_round_trip() {
        for m in [SimMode::Fifo, SimMode::Queue] {
            assert_eq!(m.to_string().parse::<SimMode>().unwrap(), m);
        }
        assert!("lifo".parse::<SimMode>().is_err());
    }
}
