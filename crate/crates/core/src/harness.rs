//! Reference solutions, error tables, and rate fits over `(ε, τ)` sweeps.
//!
//! Sweeps fan their cells out over the current rayon pool (see
//! [`with_workers`]) and return records in a fixed order: schemes as listed,
//! then ascending `ε`, then ascending `τ`. A failing cell is reported in
//! [`SweepReport::failures`] and the remaining cells still run.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{solve, step_count, SolveConfig, StepperKind};
use crate::model::{expected_regularity_exponent, DispersiveModel};
use crate::spectral::{free_propagate, Grid, SpectralField};

/// `‖a − b‖_X` with `j` derivatives.
pub fn error_x(a: &SpectralField, b: &SpectralField, j: u32) -> Result<f64> {
    Ok(a.sub(b)?.x_norm(j))
}

/// Extra logarithmic factor on the `ε^{2−2α/κ}` branch of the error bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogFactor {
    /// `ln ε⁻¹` for `κ = 2`, none otherwise.
    #[default]
    Auto,
    None,
    LnEpsilon,
    /// `(|ln ε| + |ln τ|)²`
    LnEpsilonTauSquared,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    /// Divide by the dominant term `max{ε^{1+(κ−1)α/κ}, ε^{2−2α/κ}·log}`,
    /// i.e. by `ε^β` up to the log factor.
    ErrorExponent {
        #[serde(default)]
        log_factor: LogFactor,
    },
    /// Divide by the growth law of `‖∂_x^j(μ(z) − free)‖`.
    RegularityExponent,
}

impl Normalization {
    pub fn normalizer(&self, kappa: u32, alpha: f64, epsilon: f64, tau: f64, j: u32) -> Result<f64> {
        match self {
            Self::None => Ok(1.0),
            Self::ErrorExponent { log_factor } => {
                let k = kappa as f64;
                let first = epsilon.powf(1.0 + (k - 1.0) * alpha / k);
                let log = match log_factor {
                    LogFactor::Auto if kappa == 2 => epsilon.ln().abs(),
                    LogFactor::Auto | LogFactor::None => 1.0,
                    LogFactor::LnEpsilon => epsilon.ln().abs(),
                    LogFactor::LnEpsilonTauSquared => (epsilon.ln().abs() + tau.ln().abs()).powi(2),
                };
                let second = epsilon.powf(2.0 - 2.0 * alpha / k) * log;
                Ok(first.max(second))
            }
            Self::RegularityExponent => {
                Ok(expected_regularity_exponent(kappa, alpha, j)?.scale(epsilon))
            }
        }
    }
}

/// How the spatial grid is chosen for each `ε`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridRule {
    /// Use the base grid for every `ε`.
    #[default]
    Fixed,
    /// Smallest power-of-two grid on the base domain with
    /// `h ≤ ε / points_per_epsilon`.
    PerEpsilon { points_per_epsilon: f64 },
}

impl GridRule {
    pub fn grid_for(&self, base: &Grid, epsilon: f64) -> Result<Grid> {
        match *self {
            Self::Fixed => Ok(*base),
            Self::PerEpsilon { points_per_epsilon } => {
                if !(points_per_epsilon > 0.0) {
                    return Err(Error::invalid(
                        "grid_rule.points_per_epsilon",
                        "must be positive",
                    ));
                }
                let target = 2.0 * base.half_width() * points_per_epsilon / epsilon;
                let n = (target.ceil() as usize).max(8).next_power_of_two();
                Grid::new(base.half_width(), n)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Template run; its `model.epsilon`, `tau` and `scheme` are overridden
    /// per cell.
    pub base: SolveConfig,
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub taus: Vec<f64>,
    pub schemes: Vec<StepperKind>,
    pub reference_tau: f64,
    /// Scheme for reference runs; each scheme is its own reference when
    /// absent.
    #[serde(default)]
    pub reference_scheme: Option<StepperKind>,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub deriv_order: u32,
    #[serde(default)]
    pub grid_rule: GridRule,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.model.validate()?;
        self.base.potential.validate()?;
        if self.epsilons.is_empty() {
            return Err(Error::invalid("epsilons", "must not be empty"));
        }
        if self.schemes.is_empty() {
            return Err(Error::invalid("schemes", "must not be empty"));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::invalid("epsilons", format!("must be positive, got {e}")));
        }
        if let Some(t) = self.taus.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::invalid("taus", format!("must be positive, got {t}")));
        }
        step_count(self.base.z_final, self.reference_tau)
            .map_err(|e| Error::invalid("reference_tau", e.to_string()))?;
        // a τ equal to the reference step is a self-comparison and is allowed
        let tested = self.taus.iter().copied().filter(|t| *t != self.reference_tau);
        if let Some(min_tau) = tested.reduce(f64::min) {
            if self.reference_tau > min_tau / 10.0 * (1.0 + 1e-12) {
                return Err(Error::invalid(
                    "reference_tau",
                    format!("must be at most min(taus)/10 = {}", min_tau / 10.0),
                ));
            }
        }
        let kappa = self.base.model.kappa();
        if self.deriv_order >= kappa {
            return Err(Error::invalid(
                "deriv_order",
                format!("must be at most kappa - 1 = {}", kappa - 1),
            ));
        }
        if !self.base.potential.is_zero() {
            for &eps in &self.epsilons {
                let h = self.grid_rule.grid_for(&self.base.grid, eps)?.spacing();
                if h > eps {
                    return Err(Error::invalid(
                        "epsilons",
                        format!("epsilon = {eps} is not resolved by h = {h}"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn cell(&self, epsilon: f64, tau: f64, scheme: StepperKind) -> Result<SolveConfig> {
        Ok(SolveConfig {
            model: self.base.model.with_epsilon(epsilon)?,
            grid: self.grid_rule.grid_for(&self.base.grid, epsilon)?,
            tau,
            scheme,
            snapshot_stride: 0,
            ..self.base.clone()
        })
    }

    fn sorted_epsilons(&self) -> Vec<f64> {
        sorted(&self.epsilons)
    }

    fn sorted_taus(&self) -> Vec<f64> {
        sorted(&self.taus)
    }

    fn reference_for(&self, scheme: StepperKind) -> StepperKind {
        self.reference_scheme.unwrap_or(scheme)
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Whether `τ` is below or above the splitting threshold `ε^{κ−α}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRegime {
    Resolved,
    Coarse,
}

impl StepRegime {
    pub fn classify(model: &DispersiveModel, tau: f64) -> Self {
        let threshold = model.epsilon().powf(model.kappa() as f64 - model.alpha());
        if tau <= threshold {
            Self::Resolved
        } else {
            Self::Coarse
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub scheme: StepperKind,
    pub kappa: u32,
    pub alpha: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub z_final: f64,
    pub j: u32,
    pub error_x: f64,
    pub normalized_error: f64,
    /// Seconds spent on the cell's own solve (references excluded).
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<StepRegime>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub scheme: StepperKind,
    pub epsilon: f64,
    pub tau: f64,
    pub config_error: bool,
    pub message: String,
}

impl fmt::Display for CellFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cell (scheme {}, epsilon {}, tau {}): {}",
            self.scheme, self.epsilon, self.tau, self.message
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub records: Vec<ErrorRecord>,
    pub failures: Vec<CellFailure>,
}

impl SweepReport {
    fn push(&mut self, key: (StepperKind, f64, f64), outcome: Result<ErrorRecord>) {
        match outcome {
            Ok(r) => self.records.push(r),
            Err(e) => self.failures.push(CellFailure {
                scheme: key.0,
                epsilon: key.1,
                tau: key.2,
                config_error: e.is_config_error(),
                message: e.to_string(),
            }),
        }
    }
}

/// Run `f` on a dedicated pool with `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Err(Error::invalid("workers", "must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn timed_solve(cfg: &SolveConfig) -> Result<(SpectralField, f64)> {
    let start = Instant::now();
    let out = solve(cfg)?;
    Ok((out.final_state, start.elapsed().as_secs_f64()))
}

/// `‖∂_x^j(μ(z) − e^{izε^αD_κ}μ₀)‖` for each `ε`, with `μ(z)` computed at
/// `reference_tau`.
pub fn regularity_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let scheme = cfg.reference_scheme.unwrap_or(cfg.schemes[0]);
    let j = cfg.deriv_order;
    let outcomes: Vec<_> = cfg
        .sorted_epsilons()
        .into_par_iter()
        .map(|eps| {
            let run = || -> Result<ErrorRecord> {
                let cell = cfg.cell(eps, cfg.reference_tau, scheme)?;
                let (state, wall_time) = timed_solve(&cell)?;
                let mu0 = cell.initial.sample(&cell.grid)?;
                let free = free_propagate(&mu0, &cell.model, cell.z_final);
                let err = error_x(&state, &free, j)?;
                record(cfg, &cell, j, err, wall_time)
            };
            ((scheme, eps, cfg.reference_tau), run())
        })
        .collect();
    let mut report = SweepReport::default();
    for (key, outcome) in outcomes {
        report.push(key, outcome);
    }
    Ok(report)
}

fn record(
    cfg: &SweepConfig,
    cell: &SolveConfig,
    j: u32,
    error_x: f64,
    wall_time: f64,
) -> Result<ErrorRecord> {
    let m = &cell.model;
    let norm = cfg
        .normalization
        .normalizer(m.kappa(), m.alpha(), m.epsilon(), cell.tau, j)?;
    Ok(ErrorRecord {
        scheme: cell.scheme,
        kappa: m.kappa(),
        alpha: m.alpha(),
        epsilon: m.epsilon(),
        tau: cell.tau,
        z_final: cell.z_final,
        j,
        error_x,
        normalized_error: error_x / norm,
        wall_time,
        regime: None,
    })
}

/// Error of every `(scheme, ε, τ)` cell against a reference run at
/// `reference_tau` on the same grid.
pub fn convergence_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    if cfg.taus.is_empty() {
        return Err(Error::invalid("taus", "must not be empty"));
    }
    let epsilons = cfg.sorted_epsilons();
    let taus = cfg.sorted_taus();

    let mut ref_keys: Vec<(StepperKind, u64)> = Vec::new();
    for &s in &cfg.schemes {
        for &eps in &epsilons {
            let key = (cfg.reference_for(s), eps.to_bits());
            if !ref_keys.contains(&key) {
                ref_keys.push(key);
            }
        }
    }
    let references: BTreeMap<(StepperKind, u64), Result<SpectralField, String>> = ref_keys
        .par_iter()
        .map(|&(s, bits)| {
            let state = cfg
                .cell(f64::from_bits(bits), cfg.reference_tau, s)
                .and_then(|c| timed_solve(&c))
                .map(|(state, _)| state)
                .map_err(|e| format!("reference run failed: {e}"));
            ((s, bits), state)
        })
        .collect();

    let mut cells = Vec::new();
    for &s in &cfg.schemes {
        for &eps in &epsilons {
            for &tau in &taus {
                cells.push((s, eps, tau));
            }
        }
    }
    let j = cfg.deriv_order;
    let outcomes: Vec<_> = cells
        .par_iter()
        .map(|&(s, eps, tau)| {
            let run = || -> Result<ErrorRecord> {
                let reference = references[&(cfg.reference_for(s), eps.to_bits())]
                    .as_ref()
                    .map_err(|m| Error::Numerical(m.clone()))?;
                let cell = cfg.cell(eps, tau, s)?;
                let (state, wall_time) = timed_solve(&cell)?;
                record(cfg, &cell, j, error_x(&state, reference, j)?, wall_time)
            };
            ((s, eps, tau), run())
        })
        .collect();
    let mut report = SweepReport::default();
    for (key, outcome) in outcomes {
        report.push(key, outcome);
    }
    Ok(report)
}

/// [`convergence_sweep`] across at least two schemes, with each record
/// flagged by its [`StepRegime`].
pub fn compare_methods(cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.schemes.len() < 2 {
        return Err(Error::invalid("schemes", "comparison needs at least two schemes"));
    }
    let mut report = convergence_sweep(cfg)?;
    for r in &mut report.records {
        let model = cfg.base.model.with_epsilon(r.epsilon)?;
        r.regime = Some(StepRegime::classify(&model, r.tau));
    }
    Ok(report)
}

/// Relative change of the finest-`τ` error when the reference step is
/// halved, per `(scheme, ε)`.
pub fn reference_sensitivity(cfg: &SweepConfig) -> Result<Vec<(StepperKind, f64, f64)>> {
    cfg.validate()?;
    let tau = *cfg
        .sorted_taus()
        .first()
        .ok_or_else(|| Error::invalid("taus", "must not be empty"))?;
    let mut cells = Vec::new();
    for &s in &cfg.schemes {
        for &eps in &cfg.sorted_epsilons() {
            cells.push((s, eps));
        }
    }
    cells
        .par_iter()
        .map(|&(s, eps)| {
            let r = cfg.reference_for(s);
            let coarse = solve(&cfg.cell(eps, cfg.reference_tau, r)?)?.final_state;
            let fine = solve(&cfg.cell(eps, cfg.reference_tau / 2.0, r)?)?.final_state;
            let test = solve(&cfg.cell(eps, tau, s)?)?.final_state;
            let j = cfg.deriv_order;
            let a = error_x(&test, &coarse, j)?;
            let b = error_x(&test, &fine, j)?;
            Ok((s, eps, (a - b).abs() / b))
        })
        .collect()
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub point_count: usize,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::invalid("points", "need at least two points"));
    }
    if let Some(p) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::invalid(
            "points",
            format!("coordinates must be positive and finite, got {p:?}"),
        ));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("points", "all x values coincide"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        point_count: points.len(),
    })
}

/// Which sweep variable a grouped fit runs against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateAxis {
    /// Slope in `τ` for each `(scheme, ε)`.
    Tau,
    /// Slope in `ε` for each `(scheme, τ)`.
    Epsilon,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupFit {
    pub key: String,
    pub fit: RateFit,
}

/// Fits of `error_x` per group along `axis`. Groups with fewer than two
/// usable points are skipped.
pub fn fit_groups(records: &[ErrorRecord], axis: RateAxis) -> Vec<GroupFit> {
    let mut groups: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in records {
        let (key, x) = match axis {
            RateAxis::Tau => (format!("{} eps={} vs tau", r.scheme, r.epsilon), r.tau),
            RateAxis::Epsilon => (format!("{} tau={} vs eps", r.scheme, r.tau), r.epsilon),
        };
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push((x, r.error_x)),
            None => groups.push((key, vec![(x, r.error_x)])),
        }
    }
    groups
        .into_iter()
        .filter_map(|(key, pts)| {
            let usable: Vec<_> = pts.into_iter().filter(|p| p.1 > 0.0).collect();
            fit_rate(&usable).ok().map(|fit| GroupFit { key, fit })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fit_exact_power() {
        let pts: Vec<_> = (1..6).map(|k| (k as f64, (k * k) as f64)).collect();
        let fit = fit_rate(&pts).unwrap();
        assert_relative_eq!(fit.slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert_eq!(fit.point_count, 5);
    }

    #[test]
    fn fit_two_points_interpolates() {
        let fit = fit_rate(&[(2.0, 3.0), (8.0, 5.0)]).unwrap();
        assert_relative_eq!(fit.slope, (5.0f64 / 3.0).ln() / 4f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn fit_rejects_bad_points() {
        assert!(fit_rate(&[(1.0, 1.0)]).is_err());
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.0)]).is_err());
        assert!(fit_rate(&[(-1.0, 1.0), (2.0, 1.0)]).is_err());
        assert!(fit_rate(&[(2.0, 1.0), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn error_exponent_normalizer() {
        let n = Normalization::ErrorExponent {
            log_factor: LogFactor::Auto,
        };
        let eps = 2f64.powi(-6);
        // κ = 2, α = 1: ε^{3/2} against ε ln ε⁻¹; the log term dominates
        let v = n.normalizer(2, 1.0, eps, 0.01, 0).unwrap();
        assert_relative_eq!(v, eps * eps.ln().abs(), epsilon = 1e-15);
        // κ = 3, α = 3/4: both branches are ε^{3/2}
        let v = n.normalizer(3, 0.75, eps, 0.01, 0).unwrap();
        assert_relative_eq!(v, eps.powf(1.5), epsilon = 1e-15);
        let sq = Normalization::ErrorExponent {
            log_factor: LogFactor::LnEpsilonTauSquared,
        };
        let v = sq.normalizer(3, 0.75, eps, 0.01, 0).unwrap();
        assert_relative_eq!(v, eps.powf(1.5) * (eps.ln() + 0.01f64.ln()).powi(2), epsilon = 1e-15);
        assert_eq!(Normalization::None.normalizer(2, 1.0, eps, 1.0, 0).unwrap(), 1.0);
        let r = Normalization::RegularityExponent.normalizer(2, 1.0, eps, 1.0, 0).unwrap();
        assert_relative_eq!(r, eps.sqrt(), epsilon = 1e-15);
        assert!(Normalization::RegularityExponent.normalizer(2, 1.0, eps, 1.0, 2).is_err());
    }

    #[test]
    fn per_epsilon_grid() {
        let base = Grid::new(16.0, 64).unwrap();
        let g = GridRule::PerEpsilon {
            points_per_epsilon: 1.0,
        }
        .grid_for(&base, 2f64.powi(-8))
        .unwrap();
        assert_eq!(g.len(), 8192);
        let g = GridRule::PerEpsilon {
            points_per_epsilon: 4.0,
        }
        .grid_for(&base, 0.1)
        .unwrap();
        assert!(g.spacing() <= 0.025 && g.spacing() > 0.0125);
        assert_eq!(GridRule::Fixed.grid_for(&base, 1e-9).unwrap(), base);
    }

    #[test]
    fn regime_threshold() {
        let m = DispersiveModel::schrodinger(1.0, 2f64.powi(-8)).unwrap();
        assert_eq!(StepRegime::classify(&m, 2f64.powi(-10)), StepRegime::Resolved);
        assert_eq!(StepRegime::classify(&m, 0.05), StepRegime::Coarse);
    }
}
