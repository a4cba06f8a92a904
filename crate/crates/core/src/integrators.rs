//! Time steppers for `∂_z μ = iε^αD_κ μ + R_ε μ` and the time loop.
//!
//! All four schemes share [`PrecomputedStep`]: per-step symbols are built
//! once, the loop itself only does FFTs and pointwise products. Products
//! with `R_ε` are formed in physical space without dealiasing.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DispersiveModel;
use crate::spectral::{
    free_propagator_symbol, phi1, sample_potential, Fourier, Grid, InitialDataSpec, Multiplier,
    PotentialSpec, SpectralField,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StepperKind {
    #[serde(rename = "ei")]
    ExponentialIntegrator,
    #[serde(rename = "lt")]
    LieTrotter,
    #[serde(rename = "strang")]
    Strang,
    #[serde(rename = "lri")]
    LowRegularityIntegrator,
}

impl StepperKind {
    pub const ALL: [StepperKind; 4] = [
        Self::ExponentialIntegrator,
        Self::LieTrotter,
        Self::Strang,
        Self::LowRegularityIntegrator,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Self::ExponentialIntegrator => "ei",
            Self::LieTrotter => "lt",
            Self::Strang => "strang",
            Self::LowRegularityIntegrator => "lri",
        }
    }

    /// Classical order in `τ` at fixed `ε`.
    pub fn order(self) -> u32 {
        match self {
            Self::Strang => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for StepperKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for StepperKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ei" | "exponential" | "exponential-integrator" => Ok(Self::ExponentialIntegrator),
            "lt" | "lie" | "lie-trotter" => Ok(Self::LieTrotter),
            "strang" => Ok(Self::Strang),
            "lri" | "low-regularity" => Ok(Self::LowRegularityIntegrator),
            other => Err(Error::invalid(
                "scheme",
                format!("unknown scheme {other:?} (expected ei, lt, strang or lri)"),
            )),
        }
    }
}

/// One simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub model: DispersiveModel,
    pub potential: PotentialSpec,
    pub initial: InitialDataSpec,
    pub grid: Grid,
    pub tau: f64,
    pub z_final: f64,
    pub scheme: StepperKind,
    /// Record a snapshot every `snapshot_stride` steps; 0 disables.
    #[serde(default)]
    pub snapshot_stride: usize,
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.potential.validate()?;
        self.step_count().map(|_| ())
    }

    /// `z_final / τ`, which must be an integer.
    pub fn step_count(&self) -> Result<usize> {
        step_count(self.z_final, self.tau)
    }
}

pub fn step_count(z_final: f64, tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau", format!("must be positive, got {tau}")));
    }
    if !(z_final >= 0.0 && z_final.is_finite()) {
        return Err(Error::invalid(
            "z_final",
            format!("must be non-negative, got {z_final}"),
        ));
    }
    let ratio = z_final / tau;
    let steps = ratio.round();
    // a few ulps of slack absorbs the representation error of decimal τ
    if (ratio - steps).abs() > 8.0 * f64::EPSILON * steps.max(1.0) {
        return Err(Error::FractionalSteps { ratio });
    }
    Ok(steps as usize)
}

/// Per-step symbols and arrays. Only those used by `kind` are populated.
#[derive(Clone, Debug)]
pub struct PrecomputedStep {
    kind: StepperKind,
    grid: Grid,
    tau: f64,
    /// `e^{−iτε^αP(ξ)}`
    full_flow: Vec<Complex64>,
    /// `e^{−iτε^αP(ξ)/2}` (Strang)
    half_flow: Vec<Complex64>,
    /// `φ1(−iτε^αP(ξ))` (EI)
    phi1_symbol: Vec<Complex64>,
    /// `e^{τR_ε}` (LT, Strang)
    potential_exp: Vec<Complex64>,
    /// `φ1(−iτε^αD_κ) R_ε`, symbol `φ1(iτε^αP(ξ))` (LRI)
    filtered_potential: Vec<Complex64>,
    raw_potential: Vec<f64>,
}

impl PrecomputedStep {
    /// `tau` may be negative (backward stepping); it must be non-zero.
    pub fn new(
        model: &DispersiveModel,
        grid: &Grid,
        potential: &[f64],
        tau: f64,
        kind: StepperKind,
    ) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: potential.len(),
            });
        }
        if tau == 0.0 || !tau.is_finite() {
            return Err(Error::invalid("tau", format!("must be non-zero, got {tau}")));
        }
        let strength = model.dispersion_strength();
        let symbol_p: Vec<f64> = grid.frequencies().iter().map(|&xi| model.eval_p(xi)).collect();
        let full_flow = free_propagator_symbol(model, grid, tau).as_slice().to_vec();
        let mut pre = Self {
            kind,
            grid: *grid,
            tau,
            full_flow,
            half_flow: Vec::new(),
            phi1_symbol: Vec::new(),
            potential_exp: Vec::new(),
            filtered_potential: Vec::new(),
            raw_potential: potential.to_vec(),
        };
        match kind {
            StepperKind::ExponentialIntegrator => {
                pre.phi1_symbol = symbol_p
                    .iter()
                    .map(|p| phi1(Complex64::new(0.0, -tau * strength * p)))
                    .collect();
            }
            StepperKind::LieTrotter => {
                pre.potential_exp = exp_potential(potential, tau);
            }
            StepperKind::Strang => {
                pre.half_flow = free_propagator_symbol(model, grid, 0.5 * tau).as_slice().to_vec();
                pre.potential_exp = exp_potential(potential, tau);
            }
            StepperKind::LowRegularityIntegrator => {
                let symbol: Vec<Complex64> = symbol_p
                    .iter()
                    .map(|p| phi1(Complex64::new(0.0, tau * strength * p)))
                    .collect();
                let mut filtered: Vec<Complex64> =
                    potential.iter().map(|&r| Complex64::new(r, 0.0)).collect();
                Fourier::new(grid.len()).apply(&mut filtered, &symbol);
                pre.filtered_potential = filtered;
            }
        }
        Ok(pre)
    }

    pub fn kind(&self) -> StepperKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn full_flow(&self) -> Multiplier {
        self.symbol(&self.full_flow)
    }

    pub fn half_flow(&self) -> Option<Multiplier> {
        (!self.half_flow.is_empty()).then(|| self.symbol(&self.half_flow))
    }

    pub fn phi1_symbol(&self) -> Option<Multiplier> {
        (!self.phi1_symbol.is_empty()).then(|| self.symbol(&self.phi1_symbol))
    }

    pub fn potential_exp(&self) -> Option<&[Complex64]> {
        (!self.potential_exp.is_empty()).then_some(self.potential_exp.as_slice())
    }

    pub fn filtered_potential(&self) -> Option<&[Complex64]> {
        (!self.filtered_potential.is_empty()).then_some(self.filtered_potential.as_slice())
    }

    pub fn raw_potential(&self) -> &[f64] {
        &self.raw_potential
    }

    fn symbol(&self, values: &[Complex64]) -> Multiplier {
        Multiplier::from_raw(self.grid, values.to_vec())
    }
}

fn exp_potential(potential: &[f64], tau: f64) -> Vec<Complex64> {
    potential.iter().map(|&r| Complex64::new((tau * r).exp(), 0.0)).collect()
}

pub fn precompute(config: &SolveConfig) -> Result<PrecomputedStep> {
    config.validate()?;
    let potential = sample_potential(&config.potential, &config.grid, config.model.epsilon())?;
    PrecomputedStep::new(
        &config.model,
        &config.grid,
        &potential,
        config.tau,
        config.scheme,
    )
}

/// Rescaled route to the LRI filter: sample `R` on the `ε`-scaled grid
/// `(−L/ε, L/ε)` and apply `φ1(−iτε^{α−κ}D̃_κ)` there, with
/// `D̃_κ = −Σ d_{κ−2j} ε^{2j} (−i∂)^{κ−2j}`. Entry `j` approximates
/// `(φ1(−iτε^αD_κ)R_ε)(x_j)`.
pub fn filtered_potential_rescaled(
    model: &DispersiveModel,
    potential: &PotentialSpec,
    grid: &Grid,
    tau: f64,
) -> Result<Vec<Complex64>> {
    potential.validate()?;
    let eps = model.epsilon();
    let scaled = grid.rescaled(eps)?;
    let kappa = model.kappa();
    let prefactor = tau * eps.powf(model.alpha() - kappa as f64);
    let eps2 = eps * eps;
    let scaled_p = |eta: f64| -> f64 {
        let mut eps_pow = 1.0;
        let mut sum = 0.0;
        for (j, d) in model.coeffs().iter().enumerate() {
            sum += d * eps_pow * eta.powi((kappa - 2 * j as u32) as i32);
            eps_pow *= eps2;
        }
        sum
    };
    let symbol = Multiplier::from_fn(scaled, |eta| phi1(Complex64::new(0.0, prefactor * scaled_p(eta))));
    let mut values: Vec<Complex64> = scaled
        .nodes()
        .iter()
        .map(|&y| Complex64::new(potential.eval(y), 0.0))
        .collect();
    Fourier::new(scaled.len()).apply(&mut values, symbol.as_slice());
    Ok(values)
}

/// A [`PrecomputedStep`] with FFT plans and scratch buffers for repeated
/// in-place stepping.
pub struct Stepper {
    pre: PrecomputedStep,
    fourier: Fourier,
    work: Vec<Complex64>,
}

impl Stepper {
    pub fn new(pre: PrecomputedStep) -> Self {
        let n = pre.grid.len();
        Self {
            fourier: Fourier::new(n),
            work: vec![Complex64::new(0.0, 0.0); n],
            pre,
        }
    }

    pub fn precomputed(&self) -> &PrecomputedStep {
        &self.pre
    }

    /// Advance `state` (physical values) by one step.
    pub fn step(&mut self, state: &mut [Complex64]) {
        debug_assert_eq!(state.len(), self.pre.grid.len());
        let pre = &self.pre;
        let scale = 1.0 / state.len() as f64;
        match pre.kind {
            StepperKind::ExponentialIntegrator => {
                for ((w, s), r) in self.work.iter_mut().zip(state.iter()).zip(&pre.raw_potential) {
                    *w = s * r;
                }
                self.fourier.forward(state);
                self.fourier.forward(&mut self.work);
                for (((s, w), flow), phi) in state
                    .iter_mut()
                    .zip(&self.work)
                    .zip(&pre.full_flow)
                    .zip(&pre.phi1_symbol)
                {
                    *s = (flow * *s + pre.tau * phi * w) * scale;
                }
                self.fourier.inverse(state);
            }
            StepperKind::LieTrotter => {
                for (s, e) in state.iter_mut().zip(&pre.potential_exp) {
                    *s *= e;
                }
                self.fourier.apply(state, &pre.full_flow);
            }
            StepperKind::Strang => {
                self.fourier.apply(state, &pre.half_flow);
                for (s, e) in state.iter_mut().zip(&pre.potential_exp) {
                    *s *= e;
                }
                self.fourier.apply(state, &pre.half_flow);
            }
            StepperKind::LowRegularityIntegrator => {
                for ((w, s), f) in self.work.iter_mut().zip(state.iter()).zip(&pre.filtered_potential) {
                    *w = s * f;
                }
                self.fourier.apply(state, &pre.full_flow);
                for (s, w) in state.iter_mut().zip(&self.work) {
                    *s += pre.tau * w;
                }
            }
        }
    }
}

fn step_checked(state: &SpectralField, pre: &PrecomputedStep, kind: StepperKind) -> Result<SpectralField> {
    if state.grid() != pre.grid() {
        return Err(Error::GridMismatch);
    }
    if pre.kind != kind {
        return Err(Error::invalid(
            "scheme",
            format!("step prepared for {} used as {kind}", pre.kind),
        ));
    }
    let mut out = state.clone();
    Stepper::new(pre.clone()).step(out.values_mut());
    Ok(out)
}

/// `μ ↦ e^{iτε^αD_κ}μ + τ φ1(iτε^αD_κ)(R_ε μ)`
pub fn step_ei(state: &SpectralField, pre: &PrecomputedStep) -> Result<SpectralField> {
    step_checked(state, pre, StepperKind::ExponentialIntegrator)
}

/// `μ ↦ e^{iτε^αD_κ} e^{τR_ε} μ`
pub fn step_lt(state: &SpectralField, pre: &PrecomputedStep) -> Result<SpectralField> {
    step_checked(state, pre, StepperKind::LieTrotter)
}

/// Half flow, potential, half flow.
pub fn step_strang(state: &SpectralField, pre: &PrecomputedStep) -> Result<SpectralField> {
    step_checked(state, pre, StepperKind::Strang)
}

/// `μ ↦ e^{iτε^αD_κ}μ + τ (φ1(−iτε^αD_κ)R_ε) μ`
pub fn step_lri(state: &SpectralField, pre: &PrecomputedStep) -> Result<SpectralField> {
    step_checked(state, pre, StepperKind::LowRegularityIntegrator)
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub final_state: SpectralField,
    pub snapshots: Vec<(f64, SpectralField)>,
    pub steps: usize,
}

pub fn solve(config: &SolveConfig) -> Result<SolveOutput> {
    let steps = config.step_count()?;
    let initial = config.initial.sample(&config.grid)?;
    if steps == 0 {
        config.validate()?;
        return Ok(SolveOutput {
            final_state: initial,
            snapshots: Vec::new(),
            steps: 0,
        });
    }
    let pre = precompute(config)?;
    run_steps(pre, initial, steps, config.snapshot_stride)
}

/// Apply `steps` steps of `pre` to `initial`.
pub fn run_steps(
    pre: PrecomputedStep,
    initial: SpectralField,
    steps: usize,
    snapshot_stride: usize,
) -> Result<SolveOutput> {
    if initial.grid() != pre.grid() {
        return Err(Error::GridMismatch);
    }
    let tau = pre.tau;
    let mut stepper = Stepper::new(pre);
    let mut state = initial;
    let mut snapshots = Vec::new();
    for n in 1..=steps {
        stepper.step(state.values_mut());
        if !state.is_finite() {
            return Err(Error::BlowUp {
                step: n,
                z: n as f64 * tau,
            });
        }
        if snapshot_stride > 0 && n % snapshot_stride == 0 {
            snapshots.push((n as f64 * tau, state.clone()));
        }
    }
    Ok(SolveOutput {
        final_state: state,
        snapshots,
        steps,
    })
}
