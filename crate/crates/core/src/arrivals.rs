//! Energy-arrival models: per-slot harvested energy distributions, their
//! moments and cumulant generating function, and the nonzero CGF root
//! `r*(beta)` that drives every exponential bound in the battery analysis.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::bisect_root;
use crate::scalar::Scalar;

/// Relative tolerance for pmf normalization checks, adapted to the scalar.
fn pmf_tol<F: Scalar>() -> F {
    F::from_f64_lossy(1e-12).max(F::epsilon() * F::from_f64_lossy(32.0))
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ArrivalError {
    #[error("arrival rate must be non-negative, got {0}")]
    NegativeRate(f64),
    #[error("binary arrival rate is a probability and must lie in [0, 1], got {0}")]
    BinaryRateOutOfRange(f64),
    #[error("chi-squared degrees of freedom must be at least 1")]
    ZeroDof,
    #[error("pmf must not be empty")]
    EmptyPmf,
    #[error("pmf entry for value {value} has negative probability {prob}")]
    NegativePmfEntry { value: u64, prob: f64 },
    #[error("pmf probabilities sum to {sum}, expected 1")]
    PmfNotNormalized { sum: f64 },
    #[error("r = {r} lies outside the MGF domain (finite only for r < {edge})")]
    OutsideMgfDomain { r: f64, edge: f64 },
    #[error("cumulant root is undefined at zero drift (beta equals the arrival rate {rate})")]
    ZeroDrift { rate: f64 },
    #[error("cumulant root requires a non-degenerate arrival distribution")]
    DegenerateModel,
    #[error("no cumulant root is bracketable within the MGF domain for beta = {beta}")]
    RootNotBracketable { beta: f64 },
}

/// Distribution of the per-slot harvested energy `Z`.
///
/// Every variant carries its mean as `rate` (the energy-arrival rate); for
/// `DiscreteGeneric` the rate is the pmf mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ArrivalModel<F = f64> {
    /// `Z = (rate/dof) * W` with `W` chi-squared with `dof` degrees of
    /// freedom; mean `rate`, variance `2 rate^2 / dof`.
    ScaledChiSquared { dof: u32, rate: F },
    /// Exponential with mean `rate`.
    Exponential { rate: F },
    /// `Z` in {0, 1} with `Pr(Z = 1) = rate`.
    Binary { rate: F },
    /// Finite pmf on non-negative integers.
    DiscreteGeneric { pmf: BTreeMap<u64, F> },
    /// `Z = rate` in every slot. Degenerate reference case: no CGF root
    /// exists, so only sampling and simulation accept it.
    Deterministic { rate: F },
}

/// Sign of the nonzero CGF root, as fixed by the drift of `Z - beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootSign {
    Positive,
    Negative,
}

/// Nonzero root of `r -> ln E[exp(r (Z - beta))]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantRoot<F = f64> {
    pub beta: F,
    pub r_star: F,
    pub sign: RootSign,
}

/// Reusable per-draw sampler compiled from a validated model.
#[derive(Debug, Clone)]
pub enum ArrivalSampler<F = f64> {
    Constant(F),
    Binary(F),
    Exponential(F),
    ScaledChiSquared { shape: F, scale: F },
    Discrete { values: Vec<F>, cumulative: Vec<F> },
}

impl<F: Scalar> ArrivalSampler<F> {
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> F {
        match self {
            ArrivalSampler::Constant(v) => *v,
            ArrivalSampler::Binary(p) => {
                if F::unit_uniform(rng) < *p {
                    F::one()
                } else {
                    F::zero()
                }
            }
            ArrivalSampler::Exponential(mean) => *mean * F::standard_exp(rng),
            ArrivalSampler::ScaledChiSquared { shape, scale } => {
                F::gamma_draw(rng, *shape, *scale)
            }
            ArrivalSampler::Discrete { values, cumulative } => {
                let u = F::unit_uniform(rng);
                match cumulative.iter().position(|&c| u < c) {
                    Some(i) => values[i],
                    None => *values.last().unwrap(),
                }
            }
        }
    }
}

impl<F: Scalar> ArrivalModel<F> {
    pub fn validate(&self) -> Result<(), ArrivalError> {
        match self {
            ArrivalModel::ScaledChiSquared { dof, rate } => {
                if *dof < 1 {
                    return Err(ArrivalError::ZeroDof);
                }
                if !(*rate >= F::zero()) {
                    return Err(ArrivalError::NegativeRate(rate.to_f64_lossy()));
                }
            }
            ArrivalModel::Exponential { rate } | ArrivalModel::Deterministic { rate } => {
                if !(*rate >= F::zero()) {
                    return Err(ArrivalError::NegativeRate(rate.to_f64_lossy()));
                }
            }
            ArrivalModel::Binary { rate } => {
                if !(*rate >= F::zero() && *rate <= F::one()) {
                    return Err(ArrivalError::BinaryRateOutOfRange(rate.to_f64_lossy()));
                }
            }
            ArrivalModel::DiscreteGeneric { pmf } => {
                if pmf.is_empty() {
                    return Err(ArrivalError::EmptyPmf);
                }
                let mut sum = F::zero();
                for (&value, &prob) in pmf {
                    if !(prob >= F::zero()) {
                        return Err(ArrivalError::NegativePmfEntry {
                            value,
                            prob: prob.to_f64_lossy(),
                        });
                    }
                    sum += prob;
                }
                if (sum - F::one()).abs() > pmf_tol::<F>() {
                    return Err(ArrivalError::PmfNotNormalized {
                        sum: sum.to_f64_lossy(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Mean energy per slot (the energy-arrival rate).
    pub fn rate(&self) -> F {
        match self {
            ArrivalModel::ScaledChiSquared { rate, .. }
            | ArrivalModel::Exponential { rate }
            | ArrivalModel::Binary { rate }
            | ArrivalModel::Deterministic { rate } => *rate,
            ArrivalModel::DiscreteGeneric { pmf } => pmf
                .iter()
                .map(|(&v, &p)| F::from_f64_lossy(v as f64) * p)
                .sum(),
        }
    }

    pub fn variance(&self) -> F {
        match self {
            ArrivalModel::ScaledChiSquared { dof, rate } => {
                F::from_f64_lossy(2.0) * *rate * *rate / F::from_f64_lossy(*dof as f64)
            }
            ArrivalModel::Exponential { rate } => *rate * *rate,
            ArrivalModel::Binary { rate } => *rate * (F::one() - *rate),
            ArrivalModel::Deterministic { .. } => F::zero(),
            ArrivalModel::DiscreteGeneric { pmf } => {
                let mean = self.rate();
                let second: F = pmf
                    .iter()
                    .map(|(&v, &p)| {
                        let x = F::from_f64_lossy(v as f64);
                        x * x * p
                    })
                    .sum();
                second - mean * mean
            }
        }
    }

    /// Supremum of the MGF's domain of finiteness: `E[exp(r Z)] < inf`
    /// exactly for `r` below this edge (infinite for bounded support).
    pub fn mgf_edge(&self) -> F {
        match self {
            ArrivalModel::ScaledChiSquared { dof, rate } => {
                if *rate == F::zero() {
                    F::infinity()
                } else {
                    F::from_f64_lossy(*dof as f64) / (F::from_f64_lossy(2.0) * *rate)
                }
            }
            ArrivalModel::Exponential { rate } => {
                if *rate == F::zero() {
                    F::infinity()
                } else {
                    rate.recip()
                }
            }
            _ => F::infinity(),
        }
    }

    /// Largest support value for bounded-support variants, `None` otherwise.
    pub fn max_support(&self) -> Option<F> {
        match self {
            ArrivalModel::Binary { .. } => Some(F::one()),
            ArrivalModel::Deterministic { rate } => Some(*rate),
            ArrivalModel::DiscreteGeneric { pmf } => pmf
                .keys()
                .next_back()
                .map(|&v| F::from_f64_lossy(v as f64)),
            _ => None,
        }
    }

    /// The pmf over non-negative integers, for variants that have one.
    pub fn discrete_pmf(&self) -> Option<BTreeMap<u64, F>> {
        match self {
            ArrivalModel::Binary { rate } => {
                let mut pmf = BTreeMap::new();
                pmf.insert(0, F::one() - *rate);
                pmf.insert(1, *rate);
                Some(pmf)
            }
            ArrivalModel::DiscreteGeneric { pmf } => Some(pmf.clone()),
            _ => None,
        }
    }

    /// Cumulant generating function of `Z - beta` at `r`:
    /// `ln E[exp(r (Z - beta))]`. Exactly zero at `r = 0`.
    pub fn cgf(&self, r: F, beta: F) -> Result<F, ArrivalError> {
        self.validate()?;
        if r == F::zero() {
            return Ok(F::zero());
        }
        let edge = self.mgf_edge();
        if r >= edge {
            return Err(ArrivalError::OutsideMgfDomain {
                r: r.to_f64_lossy(),
                edge: edge.to_f64_lossy(),
            });
        }
        let two = F::from_f64_lossy(2.0);
        let value = match self {
            ArrivalModel::ScaledChiSquared { dof, rate } => {
                let d = F::from_f64_lossy(*dof as f64);
                -(d / two) * (F::one() - two * r * *rate / d).ln() - r * beta
            }
            ArrivalModel::Exponential { rate } => {
                -(F::one() - r * *rate).ln() - r * beta
            }
            ArrivalModel::Binary { rate } => {
                // ln((1-p) e^{-r beta} + p e^{r (1 - beta)}), evaluated in
                // log space so large |r| cannot overflow.
                let a = -r * beta;
                let b = r * (F::one() - beta);
                let (hi, lo, p_hi, p_lo) = if a >= b {
                    (a, b, F::one() - *rate, *rate)
                } else {
                    (b, a, *rate, F::one() - *rate)
                };
                hi + (p_hi + p_lo * (lo - hi).exp()).ln()
            }
            ArrivalModel::DiscreteGeneric { pmf } => {
                // log-sum-exp over r (v - beta)
                let mut max_e = F::neg_infinity();
                for &v in pmf.keys() {
                    let e = r * (F::from_f64_lossy(v as f64) - beta);
                    if e > max_e {
                        max_e = e;
                    }
                }
                let mut acc = F::zero();
                for (&v, &p) in pmf {
                    let e = r * (F::from_f64_lossy(v as f64) - beta);
                    acc += p * (e - max_e).exp();
                }
                max_e + acc.ln()
            }
            ArrivalModel::Deterministic { rate } => r * (*rate - beta),
        };
        Ok(value)
    }

    /// Nonzero root of the CGF of `Z - beta`: positive when `beta` exceeds
    /// the arrival rate, negative when it falls short, undefined at zero
    /// drift and for degenerate models.
    pub fn cumulant_root(&self, beta: F) -> Result<CumulantRoot<F>, ArrivalError> {
        self.validate()?;
        let rate = self.rate();
        if beta == rate {
            return Err(ArrivalError::ZeroDrift {
                rate: rate.to_f64_lossy(),
            });
        }
        if !(self.variance() > F::zero()) {
            return Err(ArrivalError::DegenerateModel);
        }

        // The CGF is convex with value 0 and slope (rate - beta) at r = 0,
        // so cgf(r)/r crosses zero exactly once away from the origin.
        // Extending that ratio by its limit at 0 removes the trivial root.
        let slope_at_zero = rate - beta;
        let ratio = |r: F| -> F {
            if r == F::zero() {
                slope_at_zero
            } else {
                self.cgf(r, beta).expect("bracket stays inside MGF domain") / r
            }
        };

        let not_bracketable = || ArrivalError::RootNotBracketable {
            beta: beta.to_f64_lossy(),
        };

        let r_star = if beta > rate {
            let edge = self.mgf_edge();
            let hi = if edge.is_finite() {
                // Walk toward the edge until the CGF turns positive; the
                // MGF diverges there, but the crossing may sit closer to
                // the edge than the scalar can represent for extreme beta.
                let min_gap = F::epsilon() * F::from_f64_lossy(4.0);
                let mut gap = F::from_f64_lossy(1e-9).max(min_gap);
                loop {
                    let hi = edge * (F::one() - gap);
                    if hi >= edge || !(hi > F::zero()) {
                        return Err(not_bracketable());
                    }
                    if ratio(hi) > F::zero() {
                        break hi;
                    }
                    if gap <= min_gap {
                        return Err(not_bracketable());
                    }
                    gap = (gap * F::from_f64_lossy(1e-3)).max(min_gap);
                }
            } else {
                // Bounded support: expand geometrically; if beta is at or
                // above the top of the support the CGF stays negative and
                // no root exists.
                let mut hi = F::one();
                loop {
                    if ratio(hi) > F::zero() {
                        break hi;
                    }
                    hi = hi * F::from_f64_lossy(2.0);
                    if hi > F::from_f64_lossy(1e18) {
                        return Err(not_bracketable());
                    }
                }
            };
            bisect_root(F::zero(), hi, ratio)
        } else {
            let mut lo = -F::one();
            loop {
                if ratio(lo) < F::zero() {
                    break;
                }
                lo = lo * F::from_f64_lossy(2.0);
                if lo < F::from_f64_lossy(-1e18) {
                    return Err(not_bracketable());
                }
            }
            bisect_root(lo, F::zero(), ratio)
        };

        let sign = if r_star > F::zero() {
            RootSign::Positive
        } else {
            RootSign::Negative
        };
        debug_assert_eq!(
            sign == RootSign::Positive,
            beta > rate,
            "root sign must follow the drift"
        );
        Ok(CumulantRoot { beta, r_star, sign })
    }

    /// Compiles a sampler for repeated draws.
    pub fn sampler(&self) -> Result<ArrivalSampler<F>, ArrivalError> {
        self.validate()?;
        let sampler = match self {
            ArrivalModel::Deterministic { rate } => ArrivalSampler::Constant(*rate),
            ArrivalModel::Binary { rate } => ArrivalSampler::Binary(*rate),
            ArrivalModel::Exponential { rate } => {
                if *rate == F::zero() {
                    ArrivalSampler::Constant(F::zero())
                } else {
                    ArrivalSampler::Exponential(*rate)
                }
            }
            ArrivalModel::ScaledChiSquared { dof, rate } => {
                if *rate == F::zero() {
                    ArrivalSampler::Constant(F::zero())
                } else {
                    let d = F::from_f64_lossy(*dof as f64);
                    ArrivalSampler::ScaledChiSquared {
                        shape: d / F::from_f64_lossy(2.0),
                        scale: F::from_f64_lossy(2.0) * *rate / d,
                    }
                }
            }
            ArrivalModel::DiscreteGeneric { pmf } => {
                let values: Vec<F> = pmf.keys().map(|&v| F::from_f64_lossy(v as f64)).collect();
                let mut cumulative = Vec::with_capacity(values.len());
                let mut acc = F::zero();
                for &p in pmf.values() {
                    acc += p;
                    cumulative.push(acc);
                }
                ArrivalSampler::Discrete { values, cumulative }
            }
        };
        Ok(sampler)
    }

    /// `n` i.i.d. draws, deterministic for a fixed `(model, seed)`.
    pub fn sample(&self, seed: u64, n: usize) -> Result<Vec<F>, ArrivalError> {
        let sampler = self.sampler()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..n).map(|_| sampler.draw(&mut rng)).collect())
    }
}

/// Closed form for the positive CGF root of a unit-mean exponential arrival
/// process at `beta = 1 + x`, via the principal Lambert W branch:
/// `r*(1 + x) = W0(-(1 + x) e^{-(1 + x)}) / (1 + x) + 1`.
///
/// Defined for `x >= 0`; `x = 0` maps to the undefined-drift point and
/// returns 0 by the branch-point limit `W0(-1/e) = -1`.
pub fn lambert_root_exponential<F: Scalar>(x: F) -> F {
    debug_assert!(x >= F::zero(), "offset must be non-negative");
    let y = F::one() + x;
    let w = crate::numerics::lambert_w0(-y * (-y).exp());
    w / y + F::one()
}
