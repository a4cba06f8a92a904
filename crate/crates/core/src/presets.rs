//! Bundled configurations: the Schrödinger case (`κ = 2`, `L = 16`,
//! `R = −e^{−x²/8}`) and the KdV case (`κ = 3`, `L = 32`, `R = −e^{−|x|}`),
//! both started from `μ₀ = e^{−x²/2}` and run to `z = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{LogFactor, Normalization, SweepConfig};
use crate::integrators::{SolveConfig, StepperKind};
use crate::model::DispersiveModel;
use crate::spectral::{Grid, InitialDataSpec, PotentialSpec};

/// `ε ∈ {2⁻⁸, …, 2⁻⁴}`.
pub const DESK_EPSILONS: [f64; 5] = [0.00390625, 0.0078125, 0.015625, 0.03125, 0.0625];

pub const SWEEP_TAUS: [f64; 7] = [1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1];

pub const REFERENCE_TAU: f64 = 1e-4;

/// Mesh spacing of the desk-scale grids, enough to resolve `ε = 2⁻⁸`.
pub const DESK_SPACING: f64 = 0.00390625;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Schrodinger,
    Kdv,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: &'static str,
    pub family: Family,
    pub alpha: f64,
}

pub const PRESETS: [Preset; 6] = [
    Preset {
        name: "schrodinger-a3/4",
        family: Family::Schrodinger,
        alpha: 0.75,
    },
    Preset {
        name: "schrodinger-a1",
        family: Family::Schrodinger,
        alpha: 1.0,
    },
    Preset {
        name: "schrodinger-a4/3",
        family: Family::Schrodinger,
        alpha: 4.0 / 3.0,
    },
    Preset {
        name: "kdv-a1",
        family: Family::Kdv,
        alpha: 1.0,
    },
    Preset {
        name: "kdv-a3/2",
        family: Family::Kdv,
        alpha: 1.5,
    },
    Preset {
        name: "kdv-a2",
        family: Family::Kdv,
        alpha: 2.0,
    },
];

impl Preset {
    pub fn by_name(name: &str) -> Result<Self> {
        PRESETS.iter().copied().find(|p| p.name == name).ok_or_else(|| {
            let known: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
            Error::invalid("preset", format!("unknown preset {name:?}; known: {}", known.join(", ")))
        })
    }

    pub fn kappa(&self) -> u32 {
        match self.family {
            Family::Schrodinger => 2,
            Family::Kdv => 3,
        }
    }

    pub fn half_width(&self) -> f64 {
        match self.family {
            Family::Schrodinger => 16.0,
            Family::Kdv => 32.0,
        }
    }

    pub fn potential(&self) -> PotentialSpec {
        match self.family {
            Family::Schrodinger => PotentialSpec::Gaussian {
                amplitude: -1.0,
                width_sq: 8.0,
            },
            Family::Kdv => PotentialSpec::ExpAbs { amplitude: -1.0 },
        }
    }

    pub fn model(&self, epsilon: f64) -> Result<DispersiveModel> {
        DispersiveModel::monomial(self.kappa(), self.alpha, epsilon)
    }

    /// Grid with spacing [`DESK_SPACING`].
    pub fn desk_grid(&self) -> Grid {
        Grid::with_spacing(self.half_width(), DESK_SPACING).expect("preset domains are dyadic")
    }

    pub fn solve_config(&self, epsilon: f64, tau: f64, scheme: StepperKind) -> Result<SolveConfig> {
        let cfg = SolveConfig {
            model: self.model(epsilon)?,
            potential: self.potential(),
            initial: InitialDataSpec::Gaussian,
            grid: self.desk_grid(),
            tau,
            z_final: 1.0,
            scheme,
            snapshot_stride: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// EI convergence sweep over [`DESK_EPSILONS`] × [`SWEEP_TAUS`] with
    /// EI references at [`REFERENCE_TAU`].
    pub fn convergence_sweep(&self) -> Result<SweepConfig> {
        let scheme = StepperKind::ExponentialIntegrator;
        Ok(SweepConfig {
            base: self.solve_config(DESK_EPSILONS[0], REFERENCE_TAU, scheme)?,
            epsilons: DESK_EPSILONS.to_vec(),
            taus: SWEEP_TAUS.to_vec(),
            schemes: vec![scheme],
            reference_tau: REFERENCE_TAU,
            reference_scheme: None,
            normalization: Normalization::ErrorExponent {
                log_factor: LogFactor::Auto,
            },
            deriv_order: 0,
            grid_rule: Default::default(),
        })
    }

    /// Distance to the free flow over [`DESK_EPSILONS`].
    pub fn regularity_sweep(&self, deriv_order: u32) -> Result<SweepConfig> {
        Ok(SweepConfig {
            taus: Vec::new(),
            normalization: Normalization::RegularityExponent,
            deriv_order,
            ..self.convergence_sweep()?
        })
    }
}
