//! Service-level sizing of a single station.
//!
//! Arrivals of each vehicle class form a Poisson stream; the number of vehicles
//! that arrive during one charging duration is approximated by a normal
//! variable, so a station with `y` spots meets service level `α` when
//! `y ≥ D + z·√D` with `D = Σ T_k·λ_k` and `z = Φ⁻¹(α)`.

use chargesite_conic::{LinExpr, Model, Var};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::transport::PevType;

/// Hours needed to recharge a fully depleted battery of `ty` at one spot.
pub fn charge_time(ty: &PevType, spot_kw: f64, efficiency: f64) -> f64 {
    ty.range_km * ty.energy_kwh_per_km / (spot_kw * efficiency)
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `Φ⁻¹(α)` for `α ∈ (0, 1)` with `|Φ(z) − α| ≤ 1e-10`.
pub fn inv_std_normal(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CoreError::validation(format!("quantile level {alpha} outside (0, 1)")));
    }
    if alpha == 0.5 {
        return Ok(0.0);
    }
    let mut z = acklam(alpha);
    for _ in 0..4 {
        let f = std_normal_pdf(z);
        if f == 0.0 {
            break;
        }
        let step = (std_normal_cdf(z) - alpha) / f;
        z -= step;
        if step.abs() < 1e-15 * z.abs().max(1.0) {
            break;
        }
    }
    Ok(z)
}

// Rational approximation with relative error below 1.2e-9 before refinement.
fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239e0,
    ];
    const B: [f64; 5] =
        [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838e0,
        -2.549732539343734e0,
        4.374664141464968e0,
        2.938163982698783e0,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996e0, 3.754408661907416e0];
    const LOW: f64 = 0.02425;
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Safety factor `Φ⁻¹(α)`; levels below one half are rejected since they
/// would size stations below their mean load.
pub fn service_factor(alpha: f64) -> Result<f64> {
    if !(0.5..1.0).contains(&alpha) {
        return Err(CoreError::validation(format!("service level {alpha} outside [0.5, 1)")));
    }
    inv_std_normal(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeClass {
    /// Required charging duration `T_k` in hours.
    pub duration_h: f64,
    /// Poisson arrival rate `λ_k` in vehicles per hour.
    pub rate_per_h: f64,
}

impl ChargeClass {
    pub fn new(duration_h: f64, rate_per_h: f64) -> Self {
        Self { duration_h, rate_per_h }
    }

    pub fn load(&self) -> f64 {
        self.duration_h * self.rate_per_h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizingResult {
    /// `Σ T_k·λ_k`, expected number of occupied spots.
    pub mean_load: f64,
    pub safety_stock: f64,
    pub spots: f64,
    pub spots_int: u64,
}

pub fn required_spots(classes: &[ChargeClass], alpha: f64) -> Result<SizingResult> {
    let z = service_factor(alpha)?;
    for c in classes {
        if !(c.duration_h > 0.0 && c.duration_h.is_finite()) || !(c.rate_per_h >= 0.0 && c.rate_per_h.is_finite()) {
            return Err(CoreError::validation(format!("invalid charge class {c:?}")));
        }
    }
    let mean_load: f64 = classes.iter().map(ChargeClass::load).sum();
    let safety_stock = z * mean_load.sqrt();
    let spots = mean_load + safety_stock;
    Ok(SizingResult { mean_load, safety_stock, spots, spots_int: integer_spots(spots) })
}

/// Ceiling with a small tolerance so that values such as `3.0000000001` from
/// floating accumulation still map to 3.
pub fn integer_spots(spots: f64) -> u64 {
    let r = spots.round();
    if (spots - r).abs() <= 1e-9 * spots.abs().max(1.0) {
        r.max(0.0) as u64
    } else {
        spots.ceil().max(0.0) as u64
    }
}

/// Largest mean load a station with `spots` spots can carry at factor `z`,
/// the inverse of `D ↦ D + z√D` on `D ≥ 0`.
pub fn max_mean_load(spots: f64, z: f64) -> f64 {
    if spots <= 0.0 {
        return 0.0;
    }
    let s = (-z + (z * z + 4.0 * spots).sqrt()) / 2.0;
    s * s
}

/// Sizing constraint of one station over candidate charge choices `γ_j` with
/// loads `c_j = T_k·λ_{q,k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocSizing {
    pub coefficients: Vec<f64>,
    pub z: f64,
}

impl SocSizing {
    pub fn new(coefficients: Vec<f64>, alpha: f64) -> Result<Self> {
        if coefficients.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return Err(CoreError::validation("sizing coefficients must be finite and non-negative"));
        }
        Ok(Self { coefficients, z: service_factor(alpha)? })
    }

    /// `cᵀγ + z·√(cᵀγ)`, the bound before conic reformulation.
    pub fn bound_sqrt_form(&self, gamma: &[f64]) -> f64 {
        let d: f64 = self.coefficients.iter().zip(gamma).map(|(c, g)| c * g).sum();
        d + self.z * d.sqrt()
    }

    /// `cᵀγ + z·‖diag(√c)·γ‖₂`, equal to [`Self::bound_sqrt_form`] whenever γ is binary.
    pub fn bound_norm_form(&self, gamma: &[f64]) -> f64 {
        let d: f64 = self.coefficients.iter().zip(gamma).map(|(c, g)| c * g).sum();
        let n2: f64 = self.coefficients.iter().zip(gamma).map(|(c, g)| c * g * g).sum();
        d + self.z * n2.sqrt()
    }

    /// Adds `y ≥ cᵀγ + z·‖diag(√c)·γ‖₂` to `model`.
    pub fn add_to_model(&self, model: &mut Model, y: impl Into<LinExpr>, gamma: &[Var]) {
        assert_eq!(gamma.len(), self.coefficients.len());
        let y = y.into();
        let linear = LinExpr::sum(gamma.iter().zip(&self.coefficients).map(|(&g, &c)| (g, c)));
        let slack = y - linear;
        let tail: Vec<LinExpr> = gamma
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, &c)| c > 0.0)
            .map(|(&g, &c)| LinExpr::term(g, c.sqrt()))
            .collect();
        if self.z == 0.0 || tail.is_empty() {
            model.add_ge(slack, 0.0);
        } else {
            model.add_soc(slack * (1.0 / self.z), tail);
        }
    }
}

/// `a` dominates `b` when every entry of `a` is at least the matching entry of `b`.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

/// Indices of the Pareto-maximal vectors, first occurrence kept among equals.
/// The sizing bound is monotone in `c` for `γ ≥ 0`, so the dropped rows are implied.
pub fn pareto_maximal(vectors: &[Vec<f64>]) -> Vec<usize> {
    let mut keep = Vec::new();
    'outer: for (i, v) in vectors.iter().enumerate() {
        for (j, w) in vectors.iter().enumerate() {
            if i != j && dominates(w, v) && (w != v || j < i) {
                continue 'outer;
            }
        }
        keep.push(i);
    }
    keep
}

/// `P(N ≤ k)` for `N ~ Poisson(mean)`, summed in log space.
pub fn poisson_cdf(k: i64, mean: f64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    if mean == 0.0 {
        return 1.0;
    }
    let mut log_term = -mean;
    let mut total = log_term.exp();
    for i in 1..=k {
        log_term += mean.ln() - (i as f64).ln();
        total += log_term.exp();
    }
    total.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chargesite_conic::{solve_socp, Settings, Status};
    use proptest::prelude::*;

    fn ty(range: f64) -> PevType {
        PevType { id: 0, range_km: range, energy_kwh_per_km: 0.14, share: 1.0 }
    }

    #[test]
    fn charge_times_for_case_fleet() {
        let mins: Vec<f64> = [200.0, 500.0].iter().map(|&r| charge_time(&ty(r), 44.0, 0.92) * 60.0).collect();
        assert!((mins[0] - 41.50).abs() < 0.01, "{}", mins[0]);
        assert!((mins[1] - 103.75).abs() < 0.01, "{}", mins[1]);
        assert_eq!(charge_time(&ty(0.0), 44.0, 0.92), 0.0);
    }

    #[test]
    fn quantiles() {
        assert_eq!(inv_std_normal(0.5).unwrap(), 0.0);
        assert!((inv_std_normal(0.8).unwrap() - 0.8416212335729143).abs() < 1e-9);
        assert!((inv_std_normal(0.9).unwrap() - 1.2815515655446004).abs() < 1e-9);
        assert!(inv_std_normal(0.0).is_err());
        assert!(inv_std_normal(1.0).is_err());
        assert!(inv_std_normal(f64::NAN).is_err());
        assert!(service_factor(0.49).is_err());
    }

    #[test]
    fn sizing_examples() {
        let r = required_spots(&[ChargeClass::new(1.0, 100.0)], 0.8).unwrap();
        assert!((r.spots - 108.416212).abs() < 1e-5);
        assert_eq!(r.spots_int, 109);
        let r = required_spots(&[ChargeClass::new(0.7, 40.0), ChargeClass::new(1.75, 20.0)], 0.9).unwrap();
        assert!((r.mean_load - 63.0).abs() < 1e-12);
        assert!((r.spots - 73.172).abs() < 1e-3, "{}", r.spots);
        let r = required_spots(&[ChargeClass::new(1.0, 0.0)], 0.9).unwrap();
        assert_eq!(r.spots, 0.0);
        let r = required_spots(&[ChargeClass::new(2.0, 3.0)], 0.5).unwrap();
        assert_eq!(r.spots, 6.0);
    }

    #[test]
    fn integer_spots_tolerates_noise() {
        assert_eq!(integer_spots(3.0000000000001), 3);
        assert_eq!(integer_spots(3.01), 4);
        assert_eq!(integer_spots(0.0), 0);
    }

    #[test]
    fn max_mean_load_inverts_sizing() {
        let z = inv_std_normal(0.8).unwrap();
        for d in [0.0, 0.3, 5.0, 120.0] {
            let y = d + z * f64::sqrt(d);
            assert!((max_mean_load(y, z) - d).abs() < 1e-9 * d.max(1.0));
        }
    }

    #[test]
    fn pareto_keeps_maximal_rows() {
        let v = vec![vec![1.0, 2.0], vec![2.0, 2.0], vec![0.0, 3.0], vec![2.0, 2.0], vec![0.0, 0.0]];
        assert_eq!(pareto_maximal(&v), vec![1, 2]);
    }

    #[test]
    fn poisson_cdf_small_cases() {
        assert!((poisson_cdf(0, 2.0) - (-2.0f64).exp()).abs() < 1e-15);
        assert!((poisson_cdf(2, 2.0) - 5.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(poisson_cdf(-1, 2.0), 0.0);
    }

    #[test]
    fn cone_with_fixed_choices_reduces_to_closed_form() {
        let s = SocSizing::new(vec![4.0, 9.0, 0.0], 0.9).unwrap();
        let mut m = Model::new();
        let y = m.add_var(0.0, f64::INFINITY);
        let g: Vec<Var> = (0..3).map(|_| m.add_var(1.0, 1.0)).collect();
        s.add_to_model(&mut m, y, &g);
        m.set_objective(y);
        let sol = solve_socp(m.program(), &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let want = required_spots(&[ChargeClass::new(1.0, 13.0)], 0.9).unwrap().spots;
        assert!((sol.x[y.index()] - want).abs() < 1e-6, "{} vs {want}", sol.x[y.index()]);
    }

    proptest! {
        #[test]
        fn round_trip_through_cdf(alpha in 0.01f64..0.99) {
            let z = inv_std_normal(alpha).unwrap();
            prop_assert!((std_normal_cdf(z) - alpha).abs() <= 1e-10);
        }

        #[test]
        fn monotone_in_rates_durations_and_level(
            t in 0.1f64..3.0, l in 0.0f64..200.0, dt in 0.0f64..1.0, dl in 0.0f64..50.0,
            a in 0.5f64..0.98, da in 0.0f64..0.01,
        ) {
            let base = required_spots(&[ChargeClass::new(t, l)], a).unwrap().spots;
            prop_assert!(required_spots(&[ChargeClass::new(t + dt, l)], a).unwrap().spots >= base);
            prop_assert!(required_spots(&[ChargeClass::new(t, l + dl)], a).unwrap().spots >= base);
            prop_assert!(required_spots(&[ChargeClass::new(t, l)], a + da).unwrap().spots >= base);
        }

        #[test]
        fn pooling_reduces_spots_per_unit(t in 0.1f64..2.0, l in 0.1f64..100.0, a in 0.5f64..0.99, n in 1usize..20) {
            let per = |k: usize| required_spots(&vec![ChargeClass::new(t, l); k], a).unwrap().spots / k as f64;
            prop_assert!(per(n + 1) <= per(n) + 1e-12);
        }

        #[test]
        fn required_at_least_mean(t in 0.1f64..2.0, l in 0.0f64..100.0, a in 0.5f64..0.99) {
            let r = required_spots(&[ChargeClass::new(t, l)], a).unwrap();
            prop_assert!(r.safety_stock >= 0.0 && r.spots >= r.mean_load);
            prop_assert!(r.spots_int as f64 >= r.spots - 1e-9);
        }
    }
}
