//! Continuous model: dispersion polynomial, oscillatory phase and its
//! factorization, the expected rate laws, and the moment-equation reduction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod phase_bound;

pub use phase_bound::{
    phase_bound_ratio, search_c0, verify_phase_lower_bound, C0Search, PhaseBoundReport,
    PhaseSamples,
};

/// Order, coefficients and scaling exponents of
/// `∂_z μ = i ε^α D_κ μ + R(x/ε) μ`, with `D_κ = −P(−i∂_x)`.
///
/// `coeffs[j]` is the coefficient of `y^(κ−2j)` in `P`; `coeffs[0]` is the
/// leading coefficient and must be exactly one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersiveModel {
    kappa: u32,
    coeffs: Vec<f64>,
    alpha: f64,
    epsilon: f64,
}

impl DispersiveModel {
    pub fn new(kappa: u32, coeffs: Vec<f64>, alpha: f64, epsilon: f64) -> Result<Self> {
        let model = Self {
            kappa,
            coeffs,
            alpha,
            epsilon,
        };
        model.validate()?;
        Ok(model)
    }

    /// Pure monomial `P(y) = y^κ`.
    pub fn monomial(kappa: u32, alpha: f64, epsilon: f64) -> Result<Self> {
        let mut coeffs = vec![0.0; Self::coeff_count(kappa)];
        if let Some(lead) = coeffs.first_mut() {
            *lead = 1.0;
        }
        Self::new(kappa, coeffs, alpha, epsilon)
    }

    /// Schrödinger-type model, `D_2 = ∂_xx`.
    pub fn schrodinger(alpha: f64, epsilon: f64) -> Result<Self> {
        Self::monomial(2, alpha, epsilon)
    }

    /// KdV-type model, `D_3 = −i ∂_xxx`.
    pub fn kdv(alpha: f64, epsilon: f64) -> Result<Self> {
        Self::monomial(3, alpha, epsilon)
    }

    pub fn coeff_count(kappa: u32) -> usize {
        kappa.div_ceil(2) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa < 2 {
            return Err(Error::invalid("kappa", format!("must be >= 2, got {}", self.kappa)));
        }
        let expected = Self::coeff_count(self.kappa);
        if self.coeffs.len() != expected {
            return Err(Error::invalid(
                "coeffs",
                format!(
                    "kappa = {} needs {expected} coefficients, got {}",
                    self.kappa,
                    self.coeffs.len()
                ),
            ));
        }
        if self.coeffs[0] != 1.0 {
            return Err(Error::invalid(
                "coeffs",
                format!("leading coefficient must be exactly 1, got {}", self.coeffs[0]),
            ));
        }
        if self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coeffs", "coefficients must be finite"));
        }
        if !(0.0..=self.kappa as f64).contains(&self.alpha) {
            return Err(Error::invalid(
                "alpha",
                format!("must lie in [0, {}], got {}", self.kappa, self.alpha),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::invalid(
                "epsilon",
                format!("must lie in (0, 1], got {}", self.epsilon),
            ));
        }
        Ok(())
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.kappa, self.coeffs.clone(), self.alpha, epsilon)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.kappa, self.coeffs.clone(), alpha, self.epsilon)
    }

    /// `ε^α`, the dispersion strength.
    pub fn dispersion_strength(&self) -> f64 {
        self.epsilon.powf(self.alpha)
    }

    /// Power of `y` carried by `coeffs[j]`.
    pub fn power(&self, j: usize) -> u32 {
        self.kappa - 2 * j as u32
    }

    /// Dispersion polynomial `P(y)`.
    pub fn eval_p(&self, y: f64) -> f64 {
        horner_parity(&self.coeffs, self.kappa, y)
    }

    /// `Σ |d| |y|^r`, the magnitude scale of `P(y)` before cancellation.
    pub fn eval_p_abs(&self, y: f64) -> f64 {
        let abs: Vec<f64> = self.coeffs.iter().map(|c| c.abs()).collect();
        horner_parity(&abs, self.kappa, y.abs())
    }

    /// Oscillatory phase `Φ(ξ₁, ξ₂) = ε^α (P(ξ₁/ε + ξ₂) − P(ξ₂))`.
    pub fn eval_phase(&self, xi1: f64, xi2: f64) -> f64 {
        self.dispersion_strength() * (self.eval_p(xi1 / self.epsilon + xi2) - self.eval_p(xi2))
    }

    /// Same phase through the factorization in `ξ₁` and `ξ₁ + 2εξ₂`.
    pub fn eval_phase_factored(&self, xi1: f64, xi2: f64) -> f64 {
        let eps = self.epsilon;
        let eta = xi1 + 2.0 * eps * xi2;
        let (x, y) = (xi1 * xi1, eta * eta);
        let eps2 = eps * eps;
        let mut sum = 0.0;
        let mut eps_pow = 1.0;
        for (j, &d) in self.coeffs.iter().enumerate() {
            let r = self.power(j);
            if d != 0.0 {
                let scaled = d / 2f64.powi(r as i32 - 1);
                sum += eps_pow * scaled * eval_q_unchecked(r, x, y);
            }
            eps_pow *= eps2;
        }
        let factor = if self.kappa % 2 == 0 { xi1 * eta } else { xi1 };
        sum * factor / eps.powf(self.kappa as f64 - self.alpha)
    }

    /// The `(ε, τ)` exponent `β = min{1 + (κ−1)α/κ, 2 − 2α/κ}`.
    pub fn expected_error_exponent(&self) -> f64 {
        expected_error_exponent(self.kappa, self.alpha)
    }

    pub fn expected_regularity_exponent(&self, j: u32) -> Result<RegularityExponent> {
        expected_regularity_exponent(self.kappa, self.alpha, j)
    }
}

fn horner_parity(coeffs: &[f64], kappa: u32, y: f64) -> f64 {
    let y2 = y * y;
    let mut acc = 0.0;
    for &c in coeffs {
        acc = acc * y2 + c;
    }
    let lowest = kappa - 2 * (coeffs.len() as u32 - 1);
    acc * y.powi(lowest as i32)
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Homogeneous polynomial `Q_r(x, y)` with positive binomial coefficients;
/// `Q_1 ≡ 1`.
pub fn eval_q(r: u32, x: f64, y: f64) -> Result<f64> {
    if r < 1 {
        return Err(Error::invalid("r", "Q_r is defined for r >= 1"));
    }
    Ok(eval_q_unchecked(r, x, y))
}

fn eval_q_unchecked(r: u32, x: f64, y: f64) -> f64 {
    let p = r / 2;
    // number of terms: p for even r, p + 1 for odd r
    let (terms, top) = if r % 2 == 0 { (p, p - 1) } else { (p + 1, p) };
    (0..terms)
        .map(|j| binomial(r, 2 * j + 1) * x.powi(j as i32) * y.powi((top - j) as i32))
        .sum()
}

pub fn expected_error_exponent(kappa: u32, alpha: f64) -> f64 {
    let k = kappa as f64;
    f64::min(1.0 + (k - 1.0) * alpha / k, 2.0 - 2.0 * alpha / k)
}

/// Growth exponent of `‖∂_x^j (μ(z) − e^{izε^αD_κ} μ₀)‖` in `ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityExponent {
    pub exponent: f64,
    /// The bound carries an extra `|ln ε|` factor.
    pub log_factor: bool,
}

impl RegularityExponent {
    /// `ε^exponent`, times `|ln ε|` when the log factor is present.
    pub fn scale(&self, epsilon: f64) -> f64 {
        let base = epsilon.powf(self.exponent);
        if self.log_factor {
            base * epsilon.ln().abs()
        } else {
            base
        }
    }
}

pub fn expected_regularity_exponent(kappa: u32, alpha: f64, j: u32) -> Result<RegularityExponent> {
    if j >= kappa {
        return Err(Error::invalid(
            "j",
            format!("derivative order must lie in [0, {}], got {j}", kappa - 1),
        ));
    }
    let k = kappa as f64;
    Ok(if j + 2 <= kappa {
        RegularityExponent {
            exponent: 1.0 - (1.0 + j as f64) * alpha / k,
            log_factor: false,
        }
    } else {
        RegularityExponent {
            exponent: 1.0 - alpha,
            log_factor: true,
        }
    })
}

/// Which half of the moment-equation operator survives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentSign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl std::str::FromStr for MomentSign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" => Ok(Self::Plus),
            "-" | "minus" => Ok(Self::Minus),
            other => Err(Error::invalid("sign", format!("expected '+' or '-', got {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parity {
    EvenPowers,
    OddPowers,
}

/// Result of decoupling the two-point moment operator in the centre-of-mass
/// frequency `λ`.
///
/// The reduced operator is `sign_factor · Σ_j coeffs[j] (−i∂)^j`. For the
/// `+` branch the `j = 0` entry is also reported as `dropped_constant`: it
/// is removed by the gauge change `U_λ → e^{±i c₀ z} U_λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedModel {
    pub kappa: u32,
    pub alpha: f64,
    pub coeffs: BTreeMap<u32, f64>,
    pub sign_factor: i32,
    pub dropped_constant: Option<f64>,
    pub parity: Parity,
}

pub fn reduce_moment(kappa: u32, beta: f64, sign: MomentSign, lambda: f64) -> Result<ReducedModel> {
    if kappa < 2 {
        return Err(Error::invalid("kappa", format!("must be >= 2, got {kappa}")));
    }
    if !(beta >= 1.0) || !beta.is_finite() {
        return Err(Error::invalid("beta", format!("must be >= 1, got {beta}")));
    }
    if !lambda.is_finite() {
        return Err(Error::invalid("lambda", "must be finite"));
    }
    let keep_parity = match sign {
        MomentSign::Plus => 0,
        MomentSign::Minus => 1,
    };
    let mut coeffs = BTreeMap::new();
    for j in (keep_parity..=kappa).step_by(2) {
        let power = kappa - j;
        let c = binomial(kappa, j) * lambda.abs().powi(power as i32) / 2f64.powi(power as i32 - 1);
        if c > 0.0 {
            coeffs.insert(j, c);
        }
    }
    if coeffs.is_empty() {
        return Err(Error::DegenerateReduction { kappa, lambda });
    }
    // sgn(λ^κ) for "+", sgn(λ^(κ−1)) for "−"; λ = 0 leaves only the positive j = κ term
    let exponent = kappa - keep_parity;
    let sign_factor = if lambda < 0.0 && exponent % 2 == 1 { -1 } else { 1 };
    let dropped_constant = match sign {
        MomentSign::Plus => coeffs.get(&0).copied(),
        MomentSign::Minus => None,
    };
    Ok(ReducedModel {
        kappa,
        alpha: kappa as f64 - 1.0 / beta,
        coeffs,
        sign_factor,
        dropped_constant,
        parity: if keep_parity == 0 {
            Parity::EvenPowers
        } else {
            Parity::OddPowers
        },
    })
}

/// A reduced operator rewritten as a monic [`DispersiveModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedReduction {
    pub model: DispersiveModel,
    /// Leading coefficient `c_lead`; the evolution variable becomes
    /// `c_lead · z` and the potential is divided by `c_lead`.
    pub z_scale: f64,
    /// `sign_factor` of the reduction. With `−1` the rescaled equation is
    /// the model itself; with `+1` it is its complex conjugate.
    pub orientation: i32,
}

impl ReducedModel {
    /// Order of the reduced operator (highest surviving power).
    pub fn degree(&self) -> u32 {
        *self.coeffs.keys().next_back().expect("reduction has at least one coefficient")
    }

    pub fn leading_coefficient(&self) -> f64 {
        self.coeffs[&self.degree()]
    }

    /// Divide by the leading coefficient, drop the gauge constant, and
    /// return the resulting monic model at concentration `epsilon`.
    pub fn normalize(&self, epsilon: f64) -> Result<NormalizedReduction> {
        let degree = self.degree();
        if degree < 2 {
            return Err(Error::invalid(
                "kappa",
                format!("reduced operator has order {degree}; a dispersive model needs >= 2"),
            ));
        }
        let lead = self.leading_coefficient();
        let coeffs = (0..DispersiveModel::coeff_count(degree))
            .map(|j| {
                let power = degree - 2 * j as u32;
                self.coeffs.get(&power).map_or(0.0, |c| c / lead)
            })
            .collect();
        Ok(NormalizedReduction {
            model: DispersiveModel::new(degree, coeffs, self.alpha, epsilon)?,
            z_scale: lead,
            orientation: self.sign_factor,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn p_examples() {
        let m = DispersiveModel::schrodinger(1.0, 0.5).unwrap();
        assert_eq!(m.eval_p(3.0), 9.0);
        let m = DispersiveModel::new(4, vec![1.0, -1.0], 1.0, 0.5).unwrap();
        assert_eq!(m.eval_p(2.0), 12.0);
        let m = DispersiveModel::new(3, vec![1.0, 0.5], 1.0, 0.5).unwrap();
        assert_eq!(m.eval_p(-1.0), -1.5);
    }

    #[test]
    fn p_matches_direct_sum() {
        let m = DispersiveModel::new(5, vec![1.0, -2.5, 0.75], 1.0, 0.5).unwrap();
        for &y in &[-3.0f64, -0.2, 0.0, 1.7, 11.0] {
            let direct = y.powi(5) - 2.5 * y.powi(3) + 0.75 * y;
            assert_relative_eq!(m.eval_p(y), direct, max_relative = 1e-13);
        }
    }

    #[test]
    fn phase_examples() {
        let m = DispersiveModel::schrodinger(1.0, 0.25).unwrap();
        assert_eq!(m.eval_phase(0.0, 5.0), 0.0);
        assert_relative_eq!(m.eval_phase(1.0, 2.0), 8.0, max_relative = 1e-14);
        assert_relative_eq!(m.eval_phase_factored(1.0, 2.0), 8.0, max_relative = 1e-14);
        assert_eq!(m.eval_phase_factored(0.0, 3.0), 0.0);

        let m = DispersiveModel::new(3, vec![1.0, 0.0], 0.0, 0.5).unwrap();
        assert_relative_eq!(m.eval_phase(1.0, 0.0), 8.0, max_relative = 1e-14);
        assert_relative_eq!(m.eval_phase_factored(1.0, 0.0), 8.0, max_relative = 1e-14);
    }

    #[test]
    fn even_kappa_phase_vanishes_on_reflected_line() {
        let m = DispersiveModel::new(4, vec![1.0, -0.7], 1.5, 0.125).unwrap();
        let xi2 = 3.0;
        let xi1 = -2.0 * m.epsilon() * xi2;
        assert_eq!(m.eval_phase_factored(xi1, xi2), 0.0);
        assert!(m.eval_phase(xi1, xi2).abs() < 1e-12);
    }

    #[test]
    fn q_examples() {
        assert_eq!(eval_q(1, 7.0, -3.0).unwrap(), 1.0);
        assert_eq!(eval_q(2, 5.0, 9.0).unwrap(), 2.0);
        assert_eq!(eval_q(3, 2.0, 1.0).unwrap(), 5.0);
        // Q_4 = 4y + 4x
        assert_eq!(eval_q(4, 2.0, 3.0).unwrap(), 20.0);
        assert!(eval_q(0, 1.0, 1.0).is_err());
    }

    #[test]
    fn error_exponent_examples() {
        assert_relative_eq!(expected_error_exponent(2, 1.0), 1.0);
        assert_relative_eq!(expected_error_exponent(2, 2.0 / 3.0), 4.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(expected_error_exponent(3, 0.0), 1.0);
        assert_relative_eq!(expected_error_exponent(3, 0.75), 1.5);
    }

    #[test]
    fn error_exponent_kink() {
        for kappa in 2..=6u32 {
            let k = kappa as f64;
            let kink = k / (k + 1.0);
            let left = 1.0 + (k - 1.0) * kink / k;
            let right = 2.0 - 2.0 * kink / k;
            assert_relative_eq!(left, right, max_relative = 1e-14);
            assert_relative_eq!(expected_error_exponent(kappa, kink), left, max_relative = 1e-14);
            // rising branch left of the kink, falling branch right of it
            assert!(expected_error_exponent(kappa, kink - 0.1) < left);
            assert!(expected_error_exponent(kappa, kink + 0.1) < left);
        }
    }

    #[test]
    fn regularity_exponent_examples() {
        let r = expected_regularity_exponent(2, 1.0, 0).unwrap();
        assert_eq!((r.exponent, r.log_factor), (0.5, false));
        let r = expected_regularity_exponent(2, 1.0, 1).unwrap();
        assert_eq!((r.exponent, r.log_factor), (0.0, true));
        let r = expected_regularity_exponent(3, 1.5, 1).unwrap();
        assert_eq!((r.exponent, r.log_factor), (0.0, false));
        assert!(expected_regularity_exponent(3, 1.5, 3).is_err());
    }

    #[test]
    fn validation() {
        assert!(DispersiveModel::new(1, vec![1.0], 0.0, 0.5).is_err());
        assert!(DispersiveModel::new(4, vec![1.0], 0.0, 0.5).is_err());
        assert!(DispersiveModel::new(2, vec![2.0], 0.0, 0.5).is_err());
        assert!(DispersiveModel::new(2, vec![1.0], 2.5, 0.5).is_err());
        assert!(DispersiveModel::new(2, vec![1.0], 1.0, 0.0).is_err());
        assert!(DispersiveModel::new(2, vec![1.0], 1.0, 1.5).is_err());
        assert!(DispersiveModel::new(2, vec![1.0], 1.0, 1.0).is_ok());
    }

    #[test]
    fn reduce_examples() {
        let r = reduce_moment(2, 1.0, MomentSign::Plus, 1.0).unwrap();
        assert_eq!(r.alpha, 1.0);
        assert_eq!(r.dropped_constant, Some(0.5));
        assert_eq!(r.coeffs[&0], 0.5);
        assert_eq!(r.coeffs[&2], 2.0);
        assert_eq!(r.sign_factor, 1);
        assert_eq!(r.parity, Parity::EvenPowers);

        let r = reduce_moment(2, 1.0, MomentSign::Minus, -3.0).unwrap();
        assert_eq!(r.alpha, 1.0);
        assert_eq!(r.coeffs.len(), 1);
        assert_eq!(r.coeffs[&1], 6.0);
        assert_eq!(r.sign_factor, -1);
        assert_eq!(r.parity, Parity::OddPowers);
        assert_eq!(r.dropped_constant, None);

        let r = reduce_moment(3, 1.0, MomentSign::Minus, 1.0).unwrap();
        assert_eq!(r.alpha, 2.0);
    }

    #[test]
    fn reduce_errors() {
        assert!(reduce_moment(2, 0.5, MomentSign::Plus, 1.0).is_err());
        assert!(matches!(
            reduce_moment(4, 1.0, MomentSign::Minus, 0.0),
            Err(Error::DegenerateReduction { .. })
        ));
        // odd kappa keeps the λ-free j = κ term
        let r = reduce_moment(3, 2.0, MomentSign::Minus, 0.0).unwrap();
        assert_eq!(r.coeffs.keys().copied().collect::<Vec<_>>(), vec![3]);
        assert_eq!(r.sign_factor, 1);
    }

    #[test]
    fn normalize_reduction() {
        let r = reduce_moment(2, 1.0, MomentSign::Plus, 1.0).unwrap();
        let n = r.normalize(0.25).unwrap();
        assert_eq!(n.model.kappa(), 2);
        assert_eq!(n.model.coeffs(), &[1.0]);
        assert_eq!(n.z_scale, 2.0);
        assert_eq!(n.model.alpha(), 1.0);

        let r = reduce_moment(4, 1.0, MomentSign::Plus, 2.0).unwrap();
        let n = r.normalize(0.5).unwrap();
        // c_4 = 2, c_2 = 6·4/2 = 12 → d_2 = 6
        assert_eq!(n.model.coeffs(), &[1.0, 6.0]);

        let r = reduce_moment(2, 1.0, MomentSign::Minus, 1.0).unwrap();
        assert!(r.normalize(0.5).is_err());
    }
}
