//! Sudden quenches `ξ₁ → ξ₂`: local density of states, survival probability
//! and the tangent construction for the critical quench values.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Parity};
use crate::spectra::{diagonalize, hf_slope_in, SpectralData, StateSelector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchSpec {
    pub n: usize,
    pub alpha: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub initial: StateSelector,
}

impl QuenchSpec {
    pub fn initial_params(&self) -> Result<ModelParams> {
        ModelParams::new(self.n, self.xi1, self.alpha)
    }

    pub fn final_params(&self) -> Result<ModelParams> {
        ModelParams::new(self.n, self.xi2, self.alpha)
    }
}

/// Uniform grid `t_k = k · t_max / (n_points - 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_points: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid { t_max: 50.0, n_points: 2000 }
    }
}

impl TimeGrid {
    pub fn new(t_max: f64, n_points: usize) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::invalid(format!("t_max must be positive, got {t_max}")));
        }
        if n_points < 2 {
            return Err(Error::invalid(format!("a time grid needs at least 2 points, got {n_points}")));
        }
        Ok(TimeGrid { t_max, n_points })
    }

    pub fn times(&self) -> Vec<f64> {
        linspace(0.0, self.t_max, self.n_points)
    }
}

pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|k| start + step * k as f64).collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::invalid("times and values differ in length"));
        }
        if times.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::invalid("times must be strictly ascending"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Internal(format!("non-finite value {v} in time series")));
        }
        Ok(TimeSeries { times, values })
    }

    /// Arithmetic mean of the samples with `t0 <= t <= t1`.
    pub fn mean_over(&self, t0: f64, t1: f64) -> Option<f64> {
        let (sum, count) = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| (t0..=t1).contains(*t))
            .fold((0.0, 0usize), |(s, c), (_, v)| (s + v, c + 1));
        (count > 0).then(|| sum / count as f64)
    }

    pub fn max_over(&self, t0: f64, t1: f64) -> Option<f64> {
        self.times.iter().zip(&self.values).filter(|(t, _)| (t0..=t1).contains(*t)).map(|(_, v)| *v).reduce(f64::max)
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("time grid is empty"));
    }
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(Error::invalid(format!("non-finite time {t}")));
    }
    Ok(())
}

/// Local density of states: the initial state's weights `|C_j|²` on the
/// eigenstates of the post-quench Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ldos {
    pub energies: Vec<f64>,
    pub weights: Vec<f64>,
    pub eps: Vec<f64>,
    pub parities: Vec<Parity>,
    pub n: usize,
}

impl Ldos {
    /// Project the (full-basis) state `psi` onto the eigenbasis of `post`.
    pub fn from_state(post: &SpectralData, psi: ndarray::ArrayView1<'_, f64>) -> Self {
        let c = post.overlaps(psi);
        Ldos {
            energies: post.energies.clone(),
            weights: c.iter().map(|x| x * x).collect(),
            eps: post.eps.clone(),
            parities: post.parities.clone(),
            n: post.n(),
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ_j |C_j|⁴`, the infinite-time average of the survival probability.
    pub fn inverse_participation(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// Sticks convolved with a unit-area Gaussian of width `sigma` on the
    /// `ε` axis, evaluated at `grid`. For plotting only.
    pub fn broadened(&self, sigma: f64, grid: &[f64]) -> Result<Vec<f64>> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("broadening width must be positive, got {sigma}")));
        }
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        Ok(grid
            .iter()
            .map(|&x| {
                self.eps
                    .iter()
                    .zip(&self.weights)
                    .map(|(e, w)| w * (-0.5 * ((x - e) / sigma).powi(2)).exp())
                    .sum::<f64>()
                    * norm
            })
            .collect())
    }

    /// `(sector position, energy per site, weight)` for the states of one parity.
    pub fn sector_profile(&self, parity: Parity) -> Vec<(usize, f64, f64)> {
        let nf = self.n as f64;
        self.parities
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == parity)
            .enumerate()
            .map(|(j, (i, _))| (j, self.energies[i] / nf, self.weights[i]))
            .collect()
    }
}

/// Expansion of the selected eigenstate of `Ĥ(ξ₁)` in the eigenbasis of `Ĥ(ξ₂)`.
pub fn quench_coefficients(spec: &QuenchSpec) -> Result<Ldos> {
    let (pre, post) = rayon::join(
        || spec.initial_params().and_then(|p| diagonalize(&p)),
        || spec.final_params().and_then(|p| diagonalize(&p)),
    );
    quench_coefficients_in(&pre?, &post?, &spec.initial)
}

pub fn quench_coefficients_in(pre: &SpectralData, post: &SpectralData, initial: &StateSelector) -> Result<Ldos> {
    if pre.n() != post.n() {
        return Err(Error::invalid("pre- and post-quench spectra have different N"));
    }
    let i = pre.select_index(initial)?;
    Ok(Ldos::from_state(post, pre.state(i)))
}

/// `F(t) = |Σ_j |C_j|² e^{-i E_j t}|²` on the given times.
pub fn survival_probability(ldos: &Ldos, times: &[f64]) -> Result<TimeSeries> {
    validate_times(times)?;
    let total = ldos.total_weight();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!("LDOS is not normalized (total weight {total})")));
    }
    let terms: Vec<(f64, f64)> =
        ldos.energies.iter().zip(&ldos.weights).filter(|(_, w)| **w > 0.0).map(|(e, w)| (*e, *w)).collect();
    // a global phase drops out of |a(t)|², so measure energies from the mean
    let e_ref = terms.iter().map(|(e, w)| e * w).sum::<f64>();
    let values = times
        .par_iter()
        .map(|&t| {
            let a: Complex64 = terms.iter().map(|&(e, w)| Complex64::from_polar(w, -(e - e_ref) * t)).sum();
            a.norm_sqr().min(1.0)
        })
        .collect();
    TimeSeries::new(times.to_vec(), values)
}

/// Result of the tangent construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalQuench {
    pub xi_c: f64,
    /// Hellmann–Feynman slope `dε/dξ` at `ξ₁`.
    pub slope: f64,
    /// Energy per site of the initial state at `ξ₁`.
    pub energy: f64,
    pub xi1: f64,
    /// Energy per site of the target critical line at the crossing.
    pub line_energy: f64,
    pub warning: Option<String>,
}

impl CriticalQuench {
    /// `ε_t(ξ) = m (ξ - ξ₁) + ε(ξ₁)`
    pub fn tangent_at(&self, xi: f64) -> f64 {
        self.slope * (xi - self.xi1) + self.energy
    }
}

const PARALLEL_TOL: f64 = 1e-12;

/// Crossing of the tangent with the line `ε = ξ`: `(m ξ₁ - ε) / (m - 1)`.
pub fn tangent_crossing_diagonal(slope: f64, xi1: f64, energy: f64) -> Result<f64> {
    if (slope - 1.0).abs() < PARALLEL_TOL {
        return Err(Error::Unreachable {
            what: "critical line ε = ξ",
            reason: format!("tangent slope {slope} is parallel to it"),
        });
    }
    Ok((slope * xi1 - energy) / (slope - 1.0))
}

/// Crossing of the tangent with the flat line `ε = ε₀`: `(m ξ₁ + ε₀ - ε) / m`.
pub fn tangent_crossing_flat(slope: f64, xi1: f64, energy: f64, eps0: f64) -> Result<f64> {
    if slope.abs() < PARALLEL_TOL {
        return Err(Error::Unreachable {
            what: "flat critical line",
            reason: format!("tangent slope {slope} is parallel to it"),
        });
    }
    Ok((slope * xi1 + eps0 - energy) / slope)
}

/// Quench value `ξ₂` that brings the ground state of `Ĥ(ξ₁)` onto `ε_c1 = ξ`.
pub fn critical_xi_from_ground(alpha: f64, xi1: f64, n: usize) -> Result<CriticalQuench> {
    let spec = diagonalize(&ModelParams::new(n, xi1, alpha)?)?;
    critical_xi_from_ground_in(&spec)
}

pub fn critical_xi_from_ground_in(spec: &SpectralData) -> Result<CriticalQuench> {
    let sel = StateSelector::Ground;
    let slope = hf_slope_in(spec, &sel)?;
    let energy = spec.energy_per_site(spec.select_index(&sel)?);
    let xi1 = spec.params.xi();
    let xi_c = tangent_crossing_diagonal(slope, xi1, energy)?;
    if !(0.0..=1.0).contains(&xi_c) {
        return Err(Error::Unreachable {
            what: "critical line ε = ξ",
            reason: format!("tangent from ξ₁ = {xi1} crosses it at ξ = {xi_c}, outside [0, 1]"),
        });
    }
    Ok(CriticalQuench { xi_c, slope, energy, xi1, line_energy: xi_c, warning: None })
}

/// Quench value `ξ₂` that brings the most excited even state of `Ĥ(ξ₁)` onto
/// the flat line `ε = eps0` (`1 + α` by default).
pub fn critical_xi_from_highest(alpha: f64, xi1: f64, n: usize, eps0: Option<f64>) -> Result<CriticalQuench> {
    let spec = diagonalize(&ModelParams::new(n, xi1, alpha)?)?;
    critical_xi_from_highest_in(&spec, eps0)
}

pub fn critical_xi_from_highest_in(spec: &SpectralData, eps0: Option<f64>) -> Result<CriticalQuench> {
    let alpha = spec.params.alpha();
    let eps0 = eps0.unwrap_or(1.0 + alpha);
    let sel = StateSelector::HighestEven;
    let slope = hf_slope_in(spec, &sel)?;
    let energy = spec.energy_per_site(spec.select_index(&sel)?);
    let xi1 = spec.params.xi();
    let xi_c = tangent_crossing_flat(slope, xi1, energy, eps0)?;
    let mut warnings = Vec::new();
    if alpha >= 0.0 {
        warnings.push(format!("α = {alpha} >= 0: there is no anharmonicity-induced critical line"));
    }
    if !(0.0..=1.0).contains(&xi_c) {
        warnings.push(format!("ξ_c = {xi_c} lies outside [0, 1]"));
    }
    let warning = (!warnings.is_empty()).then(|| warnings.join("; "));
    Ok(CriticalQuench { xi_c, slope, energy, xi1, line_energy: eps0, warning })
}

/// Thresholds that classify a survival probability as collapsed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseCriteria {
    pub mean_below: f64,
    pub revival_above: f64,
}

impl Default for CollapseCriteria {
    fn default() -> Self {
        CollapseCriteria { mean_below: 0.05, revival_above: 0.2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CollapseReport {
    pub mean: f64,
    pub max: f64,
    pub collapsed: bool,
}

/// Long-time mean and largest revival of `F(t)` inside `[t0, t1]`.
pub fn detect_collapse(series: &TimeSeries, t0: f64, t1: f64, criteria: &CollapseCriteria) -> Result<CollapseReport> {
    let mean = series.mean_over(t0, t1).ok_or_else(|| Error::invalid(format!("no samples inside [{t0}, {t1}]")))?;
    let max = series.max_over(t0, t1).unwrap_or(mean);
    Ok(CollapseReport { mean, max, collapsed: mean < criteria.mean_below && max <= criteria.revival_above })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(xi2: f64) -> QuenchSpec {
        QuenchSpec { n: 40, alpha: -0.6, xi1: 0.6, xi2, initial: StateSelector::Ground }
    }

    #[test]
    fn no_quench_gives_delta_ldos() {
        let ldos = quench_coefficients(&spec(0.6)).unwrap();
        let peak = ldos.weights.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-12);
        // the odd partner of the ground state may sit below it by rounding
        let ground = ldos.parities.iter().position(|p| *p == Parity::Even).unwrap();
        assert!((ldos.weights[ground] - 1.0).abs() < 1e-12);
        let f = survival_probability(&ldos, &linspace(0.0, 50.0, 101)).unwrap();
        assert!(f.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn ldos_is_normalized_and_parity_filtered() {
        let ldos = quench_coefficients(&spec(0.3)).unwrap();
        assert!((ldos.total_weight() - 1.0).abs() < 1e-12);
        assert!(ldos.weights.iter().all(|w| *w >= 0.0));
        for (w, p) in ldos.weights.iter().zip(&ldos.parities) {
            if *p == Parity::Odd {
                assert_eq!(*w, 0.0);
            }
        }
    }

    #[test]
    fn survival_starts_at_one() {
        let ldos = quench_coefficients(&spec(0.2)).unwrap();
        let f = survival_probability(&ldos, &[0.0, 1.0, 2.0]).unwrap();
        assert!((f.values[0] - 1.0).abs() < 1e-12);
        assert!(f.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(survival_probability(&ldos, &[]).is_err());
    }

    #[test]
    fn parallel_tangent_is_unreachable() {
        assert!(matches!(tangent_crossing_diagonal(1.0, 0.5, 0.2), Err(Error::Unreachable { .. })));
        assert!(matches!(tangent_crossing_flat(0.0, 0.5, 0.2, 0.4), Err(Error::Unreachable { .. })));
        assert!((tangent_crossing_diagonal(-0.5, 0.6, 0.2).unwrap() - (-0.5f64 * 0.6 - 0.2) / -1.5).abs() < 1e-15);
    }

    #[test]
    fn tangent_through_own_point_returns_xi1() {
        let p = ModelParams::new(60, 0.7, -0.6).unwrap();
        let s = diagonalize(&p).unwrap();
        let own = s.energy_per_site(s.select_index(&StateSelector::HighestEven).unwrap());
        let c = critical_xi_from_highest_in(&s, Some(own)).unwrap();
        assert!((c.xi_c - 0.7).abs() < 1e-12);
    }

    #[test]
    fn alpha_zero_highest_is_flagged() {
        let c = critical_xi_from_highest(0.0, 0.7, 40, Some(1.0)).unwrap();
        assert!(c.warning.is_some());
        assert!(c.xi_c.is_finite());
    }

    #[test]
    fn broadening_preserves_area() {
        let ldos = quench_coefficients(&spec(0.3)).unwrap();
        let grid = linspace(-1.0, 3.0, 4001);
        let b = ldos.broadened(0.02, &grid).unwrap();
        let area: f64 = b.iter().sum::<f64>() * (grid[1] - grid[0]);
        assert!((area - 1.0).abs() < 1e-6);
        assert!(ldos.broadened(0.0, &grid).is_err());
    }

    #[test]
    fn collapse_detection() {
        let s = TimeSeries::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 0.01, 0.03, 0.02]).unwrap();
        let r = detect_collapse(&s, 1.0, 3.0, &CollapseCriteria::default()).unwrap();
        assert!(r.collapsed);
        assert!((r.mean - 0.02).abs() < 1e-15);
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }
}
