//! Periodic pseudospectral machinery on `(−L, L)`.
//!
//! Transform convention: `φ̂(ξ_k) = h Σ_j φ(x_j) e^{−iξ_k x_j}`, inverse
//! `φ(x_j) = (1/2L) Σ_k φ̂(ξ_k) e^{iξ_k x_j}`, which discretizes
//! `φ̂(ξ) = ∫ φ e^{−iξx} dx` with the `1/2π` on the inverse.
//!
//! Coefficients are stored in FFT order (`k = 0, 1, …, n/2−1, −n/2, …, −1`).
//! Every public operation addresses them through their frequency `ξ_k`, so
//! the layout never leaks.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DispersiveModel;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Uniform periodic grid `x_j = −L + j h`, `h = 2L/n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    n: usize,
}

impl Grid {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::invalid(
                "half_width",
                format!("must be positive, got {half_width}"),
            ));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::invalid(
                "n",
                format!("must be a power of two >= 8, got {n}"),
            ));
        }
        Ok(Self { half_width, n })
    }

    /// Grid on `(−L, L)` with spacing `h`; `2L/h` must be a power of two.
    pub fn with_spacing(half_width: f64, h: f64) -> Result<Self> {
        let n = (2.0 * half_width / h).round();
        if (n * h - 2.0 * half_width).abs() > 1e-9 * half_width {
            return Err(Error::invalid(
                "h",
                format!("2L/h = {} is not an integer", 2.0 * half_width / h),
            ));
        }
        Self::new(half_width, n as usize)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn frequency_spacing(&self) -> f64 {
        PI / self.half_width
    }

    /// Largest resolved frequency `π/h − Δξ`.
    pub fn max_frequency(&self) -> f64 {
        PI / self.spacing() - self.frequency_spacing()
    }

    pub fn node(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Integer wavenumber `k ∈ [−n/2, n/2)` stored at slot `i`.
    fn wavenumber(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    fn slot(&self, k: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if k < -half || k >= half {
            return None;
        }
        Some(if k >= 0 { k as usize } else { (k + self.n as i64) as usize })
    }

    /// Frequencies `ξ_k = πk/L` in storage order.
    pub fn frequencies(&self) -> Vec<f64> {
        let dxi = self.frequency_spacing();
        (0..self.n).map(|i| self.wavenumber(i) as f64 * dxi).collect()
    }

    /// Same number of nodes on `(−L/λ, L/λ)`.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.half_width / lambda, self.n)
    }

    fn matches(&self, other: &Grid) -> bool {
        self.n == other.n && self.half_width == other.half_width
    }
}

/// Planned forward/inverse FFTs of one size plus scratch space.
///
/// Raw transforms: no `h` scaling, no `(−1)^k` shift, and no `1/n` on the
/// inverse. Pointwise Fourier multipliers commute with all three, so the
/// time steppers work on raw spectra and only normalize once.
pub struct Fourier {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    n: usize,
}

impl Fourier {
    pub fn new(n: usize) -> Self {
        let (forward, inverse) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (p.plan_fft_forward(n), p.plan_fft_inverse(n))
        });
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    /// Unnormalized inverse; divide by `n` to undo [`Fourier::forward`].
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
    }

    /// `data ← F⁻¹(symbol · F data)`.
    pub fn apply(&mut self, data: &mut [Complex64], symbol: &[Complex64]) {
        self.forward(data);
        let scale = 1.0 / self.n as f64;
        for (d, s) in data.iter_mut().zip(symbol) {
            *d *= s * scale;
        }
        self.inverse(data);
    }
}

/// Complex field sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl SpectralField {
    pub fn from_values(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            grid,
            values: (0..grid.len()).map(|j| f(grid.node(j))).collect(),
        }
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn to_frequency(&self) -> Spectrum {
        let mut coeffs = self.values.clone();
        Fourier::new(self.grid.len()).forward(&mut coeffs);
        let h = self.grid.spacing();
        for (i, c) in coeffs.iter_mut().enumerate() {
            // e^{iξ_k L} = (−1)^k
            let sign = if self.grid.wavenumber(i) % 2 == 0 { h } else { -h };
            *c *= sign;
        }
        Spectrum {
            grid: self.grid,
            coeffs,
        }
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        if !self.grid.matches(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(SpectralField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// Discrete `L²` norm `(h Σ |φ_j|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.spacing() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// `Σ_k |ξ_k|^j |φ̂(ξ_k)| Δξ`, the discrete `‖∂_x^j φ‖_X`.
    pub fn x_norm(&self, j: u32) -> f64 {
        self.to_frequency().x_norm(j)
    }
}

/// Frequency coefficients of a [`SpectralField`].
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    /// Coefficients listed by increasing wavenumber `k = −n/2, …, n/2−1`.
    pub fn from_ordered(grid: Grid, ordered: Vec<Complex64>) -> Result<Self> {
        if ordered.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: ordered.len(),
            });
        }
        let mut coeffs = ordered;
        coeffs.rotate_left(grid.len() / 2);
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `φ̂(ξ_k)` for wavenumber `k ∈ [−n/2, n/2)`.
    pub fn coefficient(&self, k: i64) -> Option<Complex64> {
        self.grid.slot(k).map(|i| self.coeffs[i])
    }

    /// `(ξ_k, φ̂(ξ_k))` by increasing `ξ`.
    pub fn ordered(&self) -> Vec<(f64, Complex64)> {
        let dxi = self.grid.frequency_spacing();
        let half = (self.grid.len() / 2) as i64;
        (-half..half)
            .map(|k| (k as f64 * dxi, self.coeffs[self.grid.slot(k).unwrap()]))
            .collect()
    }

    pub fn to_physical(&self) -> SpectralField {
        let inv_h = 1.0 / self.grid.spacing();
        let mut values: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let sign = if self.grid.wavenumber(i) % 2 == 0 { inv_h } else { -inv_h };
                c * sign
            })
            .collect();
        Fourier::new(self.grid.len()).inverse(&mut values);
        let scale = 1.0 / self.grid.len() as f64;
        values.iter_mut().for_each(|v| *v *= scale);
        SpectralField {
            grid: self.grid,
            values,
        }
    }

    pub fn x_norm(&self, j: u32) -> f64 {
        let dxi = self.grid.frequency_spacing();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let weight = if j == 0 {
                    1.0
                } else {
                    (self.grid.wavenumber(i) as f64 * dxi).abs().powi(j as i32)
                };
                weight * c.norm()
            })
            .sum::<f64>()
            * dxi
    }

    /// `(Δξ/2π) Σ_k |φ̂(ξ_k)|²`, which equals `h Σ_j |φ(x_j)|²`.
    pub fn energy(&self) -> f64 {
        self.grid.frequency_spacing() / (2.0 * PI)
            * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }
}

/// A Fourier multiplier `k ↦ m(ξ_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Multiplier {
    grid: Grid,
    values: Vec<Complex64>,
}

impl Multiplier {
    pub fn from_fn(grid: Grid, m: impl Fn(f64) -> Complex64) -> Self {
        Self {
            grid,
            values: grid.frequencies().into_iter().map(m).collect(),
        }
    }

    /// Entries given in storage order.
    pub(crate) fn from_raw(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn ones(grid: Grid) -> Self {
        Self::from_fn(grid, |_| Complex64::new(1.0, 0.0))
    }

    /// `iξ`, the symbol of `∂_x`.
    pub fn derivative(grid: Grid) -> Self {
        Self::from_fn(grid, |xi| Complex64::new(0.0, xi))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Entries in storage order, aligned with [`Grid::frequencies`].
    pub fn as_slice(&self) -> &[Complex64] {
        &self.values
    }

    /// `(ξ_k, m(ξ_k))` in storage order.
    pub fn entries(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.grid.frequencies().into_iter().zip(self.values.iter().copied())
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn compose(&self, other: &Multiplier) -> Result<Self> {
        if !self.grid.matches(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }
}

/// `φ1(z) = (e^z − 1)/z`, with `φ1(0) = 1`.
///
/// Below `|z| = 1e−4` the cubic Taylor polynomial is used; its truncation
/// error there is `|z|⁴/120 < 1e−18`.
pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0))
    } else {
        (z.exp() - 1.0) / z
    }
}

/// Symbol of `e^{izε^αD_κ}`: `ξ ↦ e^{−izε^α P(ξ)}`.
pub fn free_propagator_symbol(model: &DispersiveModel, grid: &Grid, z: f64) -> Multiplier {
    let strength = model.dispersion_strength();
    Multiplier::from_fn(*grid, |xi| {
        Complex64::from_polar(1.0, -z * strength * model.eval_p(xi))
    })
}

pub fn apply_multiplier(field: &SpectralField, symbol: &Multiplier) -> Result<SpectralField> {
    if !field.grid.matches(&symbol.grid) {
        return Err(Error::LengthMismatch {
            expected: field.grid.len(),
            actual: symbol.grid.len(),
        });
    }
    let mut out = field.clone();
    Fourier::new(field.grid.len()).apply(&mut out.values, &symbol.values);
    Ok(out)
}

pub fn x_norm(field: &SpectralField, j: u32) -> f64 {
    field.x_norm(j)
}

/// `e^{izε^αD_κ} φ`, the free flow.
pub fn free_propagate(field: &SpectralField, model: &DispersiveModel, z: f64) -> SpectralField {
    let symbol = free_propagator_symbol(model, field.grid(), z);
    apply_multiplier(field, &symbol).expect("symbol built on the field's grid")
}

/// Twisted (interaction-picture) field `ψ = e^{−izε^αD_κ} μ`.
pub fn twist(field: &SpectralField, model: &DispersiveModel, z: f64) -> SpectralField {
    let symbol = free_propagator_symbol(model, field.grid(), z).conj();
    apply_multiplier(field, &symbol).expect("symbol built on the field's grid")
}

/// Real potential profile `R`, evaluated as `R(x/ε)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// `amplitude · e^{−x²/width_sq}`
    Gaussian { amplitude: f64, width_sq: f64 },
    /// `amplitude · e^{−|x|}`
    ExpAbs { amplitude: f64 },
    /// Piecewise-linear through `(x, value)` pairs sorted by `x`; zero
    /// outside `[x_first, x_last]`.
    Tabulated { x: Vec<f64>, values: Vec<f64> },
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self::Gaussian {
            amplitude: 0.0,
            width_sq: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian {
                amplitude,
                width_sq,
            } => {
                if !amplitude.is_finite() {
                    return Err(Error::invalid("potential.amplitude", "must be finite"));
                }
                if !(*width_sq > 0.0) {
                    return Err(Error::invalid("potential.width_sq", "must be positive"));
                }
            }
            Self::ExpAbs { amplitude } => {
                if !amplitude.is_finite() {
                    return Err(Error::invalid("potential.amplitude", "must be finite"));
                }
            }
            Self::Tabulated { x, values } => {
                if x.len() != values.len() || x.len() < 2 {
                    return Err(Error::invalid(
                        "potential.values",
                        "need matching x/values lists with at least two entries",
                    ));
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::invalid("potential.x", "must be strictly increasing"));
                }
                if values.iter().chain(x).any(|v| !v.is_finite()) {
                    return Err(Error::invalid("potential.values", "must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Gaussian { amplitude, .. } | Self::ExpAbs { amplitude } => *amplitude == 0.0,
            Self::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// `R(y)` on the unscaled variable.
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Self::Gaussian {
                amplitude,
                width_sq,
            } => amplitude * (-y * y / width_sq).exp(),
            Self::ExpAbs { amplitude } => amplitude * (-y.abs()).exp(),
            Self::Tabulated { x, values } => {
                let last = x.len() - 1;
                if y < x[0] || y > x[last] {
                    return 0.0;
                }
                let i = x.partition_point(|&t| t <= y).clamp(1, last);
                let t = (y - x[i - 1]) / (x[i] - x[i - 1]);
                values[i - 1] + t * (values[i] - values[i - 1])
            }
        }
    }
}

/// `R(x_j/ε)` on the grid nodes.
///
/// Warns when `h > ε` and refuses when `h > 4ε`; a zero potential is exempt.
pub fn sample_potential(spec: &PotentialSpec, grid: &Grid, epsilon: f64) -> Result<Vec<f64>> {
    spec.validate()?;
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon", "must be positive"));
    }
    let h = grid.spacing();
    if !spec.is_zero() {
        if h > 4.0 * epsilon {
            return Err(Error::UnresolvedPotential { h, epsilon });
        }
        if h > epsilon {
            log::warn!("mesh h = {h:.3e} exceeds epsilon = {epsilon:.3e}; potential is under-resolved");
        }
    }
    Ok((0..grid.len()).map(|j| spec.eval(grid.node(j) / epsilon)).collect())
}

/// Initial datum `μ₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDataSpec {
    /// `e^{−x²/2}`
    Gaussian,
    /// `e^{iξ₀x}`
    PlaneWave { xi0: f64 },
    /// Values on the grid nodes.
    Tabulated { values: Vec<Complex64> },
}

impl InitialDataSpec {
    pub fn sample(&self, grid: &Grid) -> Result<SpectralField> {
        match self {
            Self::Gaussian => Ok(SpectralField::from_real_fn(*grid, |x| (-0.5 * x * x).exp())),
            Self::PlaneWave { xi0 } => {
                Ok(SpectralField::from_fn(*grid, |x| Complex64::from_polar(1.0, xi0 * x)))
            }
            Self::Tabulated { values } => SpectralField::from_values(*grid, values.clone()),
        }
    }
}
