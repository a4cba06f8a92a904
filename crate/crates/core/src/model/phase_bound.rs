//! Sampled check of the phase lower bound away from the resonant cross
//! `{|ξ₁| < C₀ε} ∩ {|ξ₁ + 2εξ₂| < C₀ε}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DispersiveModel;
use crate::error::{Error, Result};

/// Where to sample `(ξ₁, ξ₂)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSamples {
    /// Tensor grid with endpoints included.
    Grid {
        xi1: (f64, f64),
        xi2: (f64, f64),
        n1: usize,
        n2: usize,
    },
    Random {
        xi1: (f64, f64),
        xi2: (f64, f64),
        count: usize,
        seed: u64,
    },
    Points(Vec<(f64, f64)>),
}

impl PhaseSamples {
    pub fn square_grid(half_width: f64, n: usize) -> Self {
        Self::Grid {
            xi1: (-half_width, half_width),
            xi2: (-half_width, half_width),
            n1: n,
            n2: n,
        }
    }

    fn for_each(&self, mut f: impl FnMut(f64, f64)) {
        fn node(range: (f64, f64), i: usize, n: usize) -> f64 {
            if n <= 1 {
                return range.0;
            }
            range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64
        }
        match self {
            Self::Grid { xi1, xi2, n1, n2 } => {
                for i in 0..*n1 {
                    for k in 0..*n2 {
                        f(node(*xi1, i, *n1), node(*xi2, k, *n2));
                    }
                }
            }
            Self::Random {
                xi1,
                xi2,
                count,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                for _ in 0..*count {
                    let a = rng.gen_range(xi1.0..=xi1.1);
                    let b = rng.gen_range(xi2.0..=xi2.1);
                    f(a, b);
                }
            }
            Self::Points(points) => points.iter().for_each(|&(a, b)| f(a, b)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseBoundReport {
    pub min_ratio: f64,
    /// `(ξ₁, ξ₂)` attaining `min_ratio`.
    pub worst_point: (f64, f64),
    pub admissible: usize,
    /// Admissible samples skipped because the comparison quantity vanishes
    /// there (e.g. `ξ₁ = 0` exactly).
    pub degenerate: usize,
}

/// Ratio of `|ε^{κ−α} Φ|` to `|ξ₁ η^ς| (|ξ₁|^{κ−1−ς} + |η|^{κ−1−ς})`,
/// `η = ξ₁ + 2εξ₂`, `ς = 1` for even `κ` and `0` for odd `κ`.
///
/// Returns `None` when the comparison quantity is zero.
pub fn phase_bound_ratio(model: &DispersiveModel, xi1: f64, xi2: f64) -> Option<f64> {
    let kappa = model.kappa();
    let eps = model.epsilon();
    let eta = xi1 + 2.0 * eps * xi2;
    let even = kappa % 2 == 0;
    let tail = (kappa - 1 - u32::from(even)) as i32;
    let prefactor = if even { (xi1 * eta).abs() } else { xi1.abs() };
    let denom = prefactor * (xi1.abs().powi(tail) + eta.abs().powi(tail));
    if denom == 0.0 || !denom.is_finite() {
        return None;
    }
    let scaled = model.eval_phase_factored(xi1, xi2) * eps.powf(kappa as f64 - model.alpha());
    Some(scaled.abs() / denom)
}

pub fn verify_phase_lower_bound(
    model: &DispersiveModel,
    c0: f64,
    samples: &PhaseSamples,
) -> Result<PhaseBoundReport> {
    if !(c0 > 0.0) {
        return Err(Error::invalid("c0", format!("must be positive, got {c0}")));
    }
    let cut = c0 * model.epsilon();
    let mut report = PhaseBoundReport {
        min_ratio: f64::INFINITY,
        worst_point: (f64::NAN, f64::NAN),
        admissible: 0,
        degenerate: 0,
    };
    samples.for_each(|xi1, xi2| {
        let eta = xi1 + 2.0 * model.epsilon() * xi2;
        if xi1.abs() < cut && eta.abs() < cut {
            return;
        }
        report.admissible += 1;
        match phase_bound_ratio(model, xi1, xi2) {
            Some(r) if r < report.min_ratio => {
                report.min_ratio = r;
                report.worst_point = (xi1, xi2);
            }
            Some(_) => {}
            None => report.degenerate += 1,
        }
    });
    if report.admissible == report.degenerate {
        return Err(Error::EmptySampleSet);
    }
    Ok(report)
}

/// Outcome of [`search_c0`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C0Search {
    pub c0: f64,
    pub threshold: f64,
    pub report: PhaseBoundReport,
}

/// Smallest `C₀` on the ladder `1, 2, 4, …, 2²⁰` for which the sampled
/// minimum ratio reaches `threshold`.
///
/// With `threshold = None` the target is half of the pure-monomial minimum
/// (`P(y) = y^κ`) over the same samples. That monomial minimum is positive
/// for every `C₀`, so the target is reachable once the lower-order terms
/// are dominated.
pub fn search_c0(
    model: &DispersiveModel,
    samples: &PhaseSamples,
    threshold: Option<f64>,
) -> Result<C0Search> {
    let threshold = match threshold {
        Some(t) => t,
        None => {
            let mono = DispersiveModel::monomial(model.kappa(), model.alpha(), model.epsilon())?;
            0.5 * verify_phase_lower_bound(&mono, 1.0, samples)?.min_ratio
        }
    };
    let mut last = None;
    for k in 0..=20 {
        let c0 = f64::from(1u32 << k);
        let report = match verify_phase_lower_bound(model, c0, samples) {
            Ok(r) => r,
            Err(Error::EmptySampleSet) => break,
            Err(e) => return Err(e),
        };
        if report.min_ratio >= threshold {
            return Ok(C0Search {
                c0,
                threshold,
                report,
            });
        }
        last = Some(report.min_ratio);
    }
    Err(Error::Numerical(format!(
        "no C0 up to 2^20 reaches ratio {threshold} (last minimum {last:?})"
    )))
}
