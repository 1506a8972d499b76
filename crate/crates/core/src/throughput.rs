//! Spatial-throughput optimization: the two-regime optimal power rule, the
//! quartic closed form at path-loss exponent 4, and the high-energy and
//! dense-network limits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{interference_temperature, GeometryError, NetworkParams};
use crate::numerics::bisect_root;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ThroughputError {
    #[error("all parameters must be positive (got {name} = {value})")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("path-loss exponent must exceed 2, got {0}")]
    InvalidAlpha(f64),
    #[error("optimal power {power} fell below the energy-arrival rate {rate}; the dense-regime root is not the admissible one")]
    RootBelowRate { power: f64, rate: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Which side of the admissibility boundary the optimum sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Sparse network: every transmitter can stay on (`rho = 1`); any power
    /// in the reported interval is optimal.
    SparseAllOn,
    /// Dense network: transmissions must be rationed (`rho < 1`); the
    /// optimal power is the unique admissible-boundary root.
    DenseRationed,
}

/// Optimal power: a closed interval of equivalent optima or a single value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PowerStar<F = f64> {
    Interval { lo: F, hi: F },
    Value(F),
}

impl<F: Scalar> PowerStar<F> {
    /// Scalar representative: the interval midpoint, or the value itself.
    pub fn suggested(&self) -> F {
        match *self {
            PowerStar::Interval { lo, hi } => (lo + hi) * F::from_f64_lossy(0.5),
            PowerStar::Value(p) => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputSolution<F = f64> {
    pub regime: Regime,
    pub power: PowerStar<F>,
    /// Optimal transmission probability.
    pub tx_prob: F,
    /// Maximum network throughput (bit/s/Hz per unit area).
    pub throughput: F,
    /// Defect of the dense-regime polynomial at the returned root, scaled
    /// by the constant term (zero in the sparse regime).
    pub residual: F,
}

/// Root of the dense-regime polynomial together with its raw defect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyRoot<F = f64> {
    pub x: F,
    pub residual: F,
}

/// Spatial throughput `lambda_0 rho log2(1 + theta)`.
pub fn throughput<F: Scalar>(lambda_0: F, rho: F, theta: F) -> F {
    lambda_0 * rho * (F::one() + theta).log2()
}

/// Solves `x^alpha - theta x^(alpha-2) - theta c = 0` for its unique root
/// beyond `sqrt(theta)` (below that the left side is at most `-theta c`,
/// and it is strictly increasing after). Bisection brackets the root, then
/// Newton steps polish it to machine precision.
pub fn polynomial_root<F: Scalar>(theta: F, alpha: F, c: F) -> Result<PolyRoot<F>, ThroughputError> {
    if !(theta > F::zero()) {
        return Err(ThroughputError::NonPositiveParameter {
            name: "theta",
            value: theta.to_f64_lossy(),
        });
    }
    if !(alpha > F::from_f64_lossy(2.0)) {
        return Err(ThroughputError::InvalidAlpha(alpha.to_f64_lossy()));
    }
    if !(c > F::zero()) {
        return Err(ThroughputError::NonPositiveParameter {
            name: "c",
            value: c.to_f64_lossy(),
        });
    }
    let two = F::from_f64_lossy(2.0);
    let f = |x: F| x.powf(alpha) - theta * x.powf(alpha - two) - theta * c;
    let df = |x: F| {
        alpha * x.powf(alpha - F::one())
            - theta * (alpha - two) * x.powf(alpha - F::from_f64_lossy(3.0))
    };

    // f(sqrt(theta)) = -theta c < 0 in exact arithmetic; rounding can flip
    // it only when the root coincides with sqrt(theta) to machine precision.
    let lo = theta.sqrt();
    if f(lo) >= F::zero() {
        return Ok(PolyRoot {
            x: lo,
            residual: f(lo),
        });
    }
    let mut hi = lo.max(F::one());
    for _ in 0..2048 {
        if f(hi) > F::zero() {
            break;
        }
        hi = hi * two;
    }
    let mut x = bisect_root(lo, hi, f);
    for _ in 0..4 {
        let d = df(x);
        if d == F::zero() {
            break;
        }
        let next = x - f(x) / d;
        if !(next > theta.sqrt()) || next == x {
            break;
        }
        x = next;
    }
    Ok(PolyRoot { x, residual: f(x) })
}

/// Closed-form optimal power in the dense regime at `alpha = 4`:
/// `P* = (theta + sqrt(theta^2 + 4 theta (lambda_0 lambda_e / mu_eps)^2)) / 2`.
pub fn closed_form_alpha4<F: Scalar>(theta: F, lambda_0: F, lambda_e: F, mu_epsilon: F) -> F {
    let two = F::from_f64_lossy(2.0);
    let ratio = lambda_0 * lambda_e / mu_epsilon;
    let c = ratio * ratio;
    (theta + (theta * theta + two * two * theta * c).sqrt()) / two
}

/// [`optimize`] over a shared parameter bundle.
pub fn optimize_network<F: Scalar>(
    params: &NetworkParams<F>,
) -> Result<ThroughputSolution<F>, ThroughputError> {
    params.validate()?;
    optimize(
        params.lambda_0,
        params.lambda_e,
        params.mu_epsilon,
        params.theta,
        params.alpha,
    )
}

/// High-energy limit of the maximum throughput:
/// `min(lambda_0, mu_eps theta^(-2/alpha)) log2(1 + theta)`.
pub fn limit_high_energy<F: Scalar>(lambda_0: F, mu_epsilon: F, theta: F, alpha: F) -> F {
    let sat = mu_epsilon * theta.powf(-F::from_f64_lossy(2.0) / alpha);
    lambda_0.min(sat) * (F::one() + theta).log2()
}

/// Dense-network limit of the maximum throughput:
/// `mu_eps theta^(-2/alpha) log2(1 + theta)`.
pub fn limit_dense<F: Scalar>(mu_epsilon: F, theta: F, alpha: F) -> F {
    mu_epsilon * theta.powf(-F::from_f64_lossy(2.0) / alpha) * (F::one() + theta).log2()
}

/// Maximum throughput and optimal power for the given transmitter density,
/// energy-arrival rate and outage calibration.
///
/// Sparse regime (`lambda_0 <= zeta(lambda_e)`, which needs
/// `lambda_e >= theta` for `zeta` to be defined — below that the sparse
/// branch is unreachable and `zeta` is treated as zero): every transmitter
/// stays on, any power in `[P_0, lambda_e]` with
/// `P_0 = theta / (1 - theta (lambda_0/mu_eps)^(alpha/2))` is optimal.
/// Dense regime: `sqrt(P*)` solves the admissibility-boundary polynomial
/// and `rho* = lambda_e / P*`.
pub fn optimize<F: Scalar>(
    lambda_0: F,
    lambda_e: F,
    mu_epsilon: F,
    theta: F,
    alpha: F,
) -> Result<ThroughputSolution<F>, ThroughputError> {
    for (name, v) in [
        ("lambda_0", lambda_0),
        ("lambda_e", lambda_e),
        ("mu_epsilon", mu_epsilon),
        ("theta", theta),
    ] {
        if !(v > F::zero()) {
            return Err(ThroughputError::NonPositiveParameter {
                name,
                value: v.to_f64_lossy(),
            });
        }
    }
    if !(alpha > F::from_f64_lossy(2.0)) {
        return Err(ThroughputError::InvalidAlpha(alpha.to_f64_lossy()));
    }

    let zeta_at_rate = if lambda_e >= theta {
        interference_temperature(mu_epsilon, theta, alpha, lambda_e)?
    } else {
        F::zero()
    };

    if lambda_0 <= zeta_at_rate {
        let half_alpha = alpha / F::from_f64_lossy(2.0);
        let denom = F::one() - theta * (lambda_0 / mu_epsilon).powf(half_alpha);
        debug_assert!(denom > F::zero(), "sparse branch guarantees zeta coverage");
        let p0 = theta / denom;
        return Ok(ThroughputSolution {
            regime: Regime::SparseAllOn,
            power: PowerStar::Interval {
                lo: p0,
                hi: lambda_e,
            },
            tx_prob: F::one(),
            throughput: throughput(lambda_0, F::one(), theta),
            residual: F::zero(),
        });
    }

    let half_alpha = alpha / F::from_f64_lossy(2.0);
    let c = (lambda_0 * lambda_e / mu_epsilon).powf(half_alpha);
    let root = polynomial_root(theta, alpha, c)?;
    let p_star = root.x * root.x;
    if p_star < lambda_e * (F::one() - F::from_f64_lossy(1e-9)) {
        return Err(ThroughputError::RootBelowRate {
            power: p_star.to_f64_lossy(),
            rate: lambda_e.to_f64_lossy(),
        });
    }
    let rho = (lambda_e / p_star).min(F::one());
    Ok(ThroughputSolution {
        regime: Regime::DenseRationed,
        power: PowerStar::Value(p_star),
        tx_prob: rho,
        throughput: throughput(lambda_0, rho, theta),
        residual: root.residual / (F::one() + theta * c),
    })
}
