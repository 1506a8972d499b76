//! Slotted battery-level process: Monte Carlo simulation of the recursion
//! `S_t = min(S_{t-1} + Z_t - P I(S_{t-1} >= P), B)` plus the analytic
//! transmission probabilities and the exponential tail/overshoot bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrivals::{ArrivalError, ArrivalModel, ArrivalSampler};
use crate::numerics::golden_max;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BatteryError {
    #[error("transmission power must be positive, got {0}")]
    NonPositivePower(f64),
    #[error("battery capacity {capacity} is below the transmission power {power}")]
    CapacityBelowPower { capacity: f64, power: f64 },
    #[error("horizon {horizon} must exceed burn-in {burn_in}")]
    HorizonTooShort { horizon: u64, burn_in: u64 },
    #[error("threshold {threshold} exceeds the battery capacity {capacity}")]
    ThresholdAboveCapacity { threshold: f64, capacity: f64 },
    #[error("threshold {threshold} lies outside [0, {capacity}]")]
    ThresholdOutOfRange { threshold: f64, capacity: f64 },
    #[error("bound requires the arrival rate below the power (rate {rate}, power {power})")]
    DriftNotNegative { rate: f64, power: f64 },
    #[error("bound requires the arrival rate above the power (rate {rate}, power {power})")]
    DriftNotPositive { rate: f64, power: f64 },
    #[error("replication count must be at least 1")]
    ZeroReplications,
    #[error(transparent)]
    Arrival(#[from] ArrivalError),
}

/// Battery capacity: a finite energy limit or unlimited storage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capacity<F = f64> {
    Infinite,
    Finite(F),
}

impl<F: Scalar> Capacity<F> {
    /// The clamp value: the finite limit, or +inf.
    pub fn limit(self) -> F {
        match self {
            Capacity::Infinite => F::infinity(),
            Capacity::Finite(b) => b,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Capacity::Finite(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig<F = f64> {
    pub power: F,
    pub capacity: Capacity<F>,
    /// Total simulated slots.
    pub horizon: u64,
    /// Leading slots excluded from every time average.
    pub burn_in: u64,
    pub seed: u64,
}

/// Post-burn-in slot count below which estimates are flagged unreliable.
pub const MIN_RELIABLE_WINDOW: u64 = 1_000;

impl<F: Scalar> BatteryConfig<F> {
    /// Config with the default burn-in of 10% of the horizon.
    pub fn new(power: F, capacity: Capacity<F>, horizon: u64, seed: u64) -> Self {
        Self {
            power,
            capacity,
            horizon,
            burn_in: horizon / 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), BatteryError> {
        if !(self.power > F::zero()) {
            return Err(BatteryError::NonPositivePower(self.power.to_f64_lossy()));
        }
        if let Capacity::Finite(b) = self.capacity {
            if b < self.power {
                return Err(BatteryError::CapacityBelowPower {
                    capacity: b.to_f64_lossy(),
                    power: self.power.to_f64_lossy(),
                });
            }
        }
        if self.horizon <= self.burn_in {
            return Err(BatteryError::HorizonTooShort {
                horizon: self.horizon,
                burn_in: self.burn_in,
            });
        }
        Ok(())
    }
}

/// Time-averaged estimates from one or more simulated traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryStats<F = f64> {
    /// Fraction of post-burn-in slots with battery level at least `P`.
    pub rho_hat: F,
    /// Batch-means standard error of `rho_hat` (ensemble standard error
    /// across replications when more than one trace was run).
    pub rho_std_err: F,
    /// Threshold -> time-averaged `Pr(S_t > x)`.
    pub tail_hat: Vec<(F, F)>,
    /// Threshold -> time-averaged `Pr(S_t < x)`.
    pub low_tail_hat: Vec<(F, F)>,
    /// Threshold -> time-averaged `E[max(S_t - x, 0)]`.
    pub overshoot_hat: Vec<(F, F)>,
    /// Energy discarded to overflow per post-burn-in slot.
    pub overflow_rate: F,
    /// Slots (full horizon) in which any energy was discarded.
    pub overflow_events: u64,
    /// Whole-horizon energy ledger, for conservation checks.
    pub harvested_total: F,
    pub transmissions_total: u64,
    pub discarded_total: F,
    pub final_level: F,
    /// Post-burn-in slots contributing to the averages.
    pub slots_counted: u64,
    /// Set when the averaging window is shorter than [`MIN_RELIABLE_WINDOW`].
    pub short_horizon: bool,
}

/// One step of the battery recursion. The next level stays in `[0, B]`;
/// a transmission happens exactly when the entering level reaches `power`.
#[inline]
pub fn evolve_step<F: Scalar>(level: F, inflow: F, power: F, capacity: Capacity<F>) -> F {
    let spend = if level >= power { power } else { F::zero() };
    let next = level + inflow - spend;
    match capacity {
        Capacity::Finite(b) => next.min(b),
        Capacity::Infinite => next,
    }
}

fn run_trace<F: Scalar>(
    sampler: &ArrivalSampler<F>,
    cfg: &BatteryConfig<F>,
    thresholds: &[F],
    rng: &mut ChaCha8Rng,
) -> BatteryStats<F> {
    let window = cfg.horizon - cfg.burn_in;
    let power = cfg.power;
    let limit = cfg.capacity.limit();

    let mut level = F::zero();
    let mut tx_hits: u64 = 0;
    let mut tx_total: u64 = 0;
    let mut harvested = F::zero();
    let mut discarded = F::zero();
    let mut discarded_window = F::zero();
    let mut overflow_events: u64 = 0;

    let k = thresholds.len();
    let mut tail_hits = vec![0u64; k];
    let mut low_hits = vec![0u64; k];
    let mut overshoot_sum = vec![F::zero(); k];

    // Batch means for the autocorrelated transmission indicator.
    let n_batches: u64 = if window >= 200 { 100 } else { window.max(1) };
    let batch_len = (window / n_batches).max(1);
    let mut batch_means: Vec<F> = Vec::with_capacity(n_batches as usize);
    let mut batch_acc: u64 = 0;
    let mut batch_fill: u64 = 0;

    for t in 1..=cfg.horizon {
        let z = sampler.draw(rng);
        harvested += z;
        if level >= power {
            tx_total += 1;
        }
        let unclamped = level + z - if level >= power { power } else { F::zero() };
        let next = if unclamped > limit { limit } else { unclamped };
        let spill = unclamped - next;
        if spill > F::zero() {
            overflow_events += 1;
            discarded += spill;
        }
        level = next;

        if t > cfg.burn_in {
            if spill > F::zero() {
                discarded_window += spill;
            }
            let hit = level >= power;
            if hit {
                tx_hits += 1;
            }
            for (i, &x) in thresholds.iter().enumerate() {
                if level > x {
                    tail_hits[i] += 1;
                }
                if level < x {
                    low_hits[i] += 1;
                }
                if level > x {
                    overshoot_sum[i] += level - x;
                }
            }
            if (batch_means.len() as u64) < n_batches {
                batch_acc += hit as u64;
                batch_fill += 1;
                if batch_fill == batch_len {
                    batch_means
                        .push(F::from_f64_lossy(batch_acc as f64 / batch_len as f64));
                    batch_acc = 0;
                    batch_fill = 0;
                }
            }
        }
    }

    let w = F::from_f64_lossy(window as f64);
    let rho_hat = F::from_f64_lossy(tx_hits as f64) / w;
    let rho_std_err = if batch_means.len() >= 2 {
        let m = batch_means.len();
        let mf = F::from_f64_lossy(m as f64);
        let mean: F = batch_means.iter().copied().sum::<F>() / mf;
        let var: F = batch_means
            .iter()
            .map(|&b| (b - mean) * (b - mean))
            .sum::<F>()
            / F::from_f64_lossy((m - 1) as f64);
        (var / mf).sqrt()
    } else {
        F::nan()
    };

    BatteryStats {
        rho_hat,
        rho_std_err,
        tail_hat: thresholds
            .iter()
            .zip(&tail_hits)
            .map(|(&x, &h)| (x, F::from_f64_lossy(h as f64) / w))
            .collect(),
        low_tail_hat: thresholds
            .iter()
            .zip(&low_hits)
            .map(|(&x, &h)| (x, F::from_f64_lossy(h as f64) / w))
            .collect(),
        overshoot_hat: thresholds
            .iter()
            .zip(&overshoot_sum)
            .map(|(&x, &s)| (x, s / w))
            .collect(),
        overflow_rate: discarded_window / w,
        overflow_events,
        harvested_total: harvested,
        transmissions_total: tx_total,
        discarded_total: discarded,
        final_level: level,
        slots_counted: window,
        short_horizon: window < MIN_RELIABLE_WINDOW,
    }
}

fn check_thresholds<F: Scalar>(cfg: &BatteryConfig<F>, thresholds: &[F]) -> Result<(), BatteryError> {
    if let Capacity::Finite(b) = cfg.capacity {
        for &x in thresholds {
            if x > b {
                return Err(BatteryError::ThresholdAboveCapacity {
                    threshold: x.to_f64_lossy(),
                    capacity: b.to_f64_lossy(),
                });
            }
        }
    }
    Ok(())
}

/// Simulates one trace of the battery process and reports time averages
/// over the post-burn-in window. Deterministic for a fixed seed.
pub fn simulate<F: Scalar>(
    model: &ArrivalModel<F>,
    cfg: &BatteryConfig<F>,
    thresholds: &[F],
) -> Result<BatteryStats<F>, BatteryError> {
    cfg.validate()?;
    check_thresholds(cfg, thresholds)?;
    let sampler = model.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(run_trace(&sampler, cfg, thresholds, &mut rng))
}

/// Runs `replications` independent traces (stream `i` of the seeded RNG
/// drives trace `i`) in parallel and averages them. The reduction is a
/// fixed-order fold over the replication index, so the result does not
/// depend on the thread count.
pub fn simulate_replicated<F: Scalar>(
    model: &ArrivalModel<F>,
    cfg: &BatteryConfig<F>,
    thresholds: &[F],
    replications: u32,
) -> Result<BatteryStats<F>, BatteryError> {
    if replications == 0 {
        return Err(BatteryError::ZeroReplications);
    }
    if replications == 1 {
        return simulate(model, cfg, thresholds);
    }
    cfg.validate()?;
    check_thresholds(cfg, thresholds)?;
    let sampler = model.sampler()?;

    let runs: Vec<BatteryStats<F>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(rep as u64);
            run_trace(&sampler, cfg, thresholds, &mut rng)
        })
        .collect();

    let m = F::from_f64_lossy(replications as f64);
    let rho_hat: F = runs.iter().map(|r| r.rho_hat).sum::<F>() / m;
    let rho_var: F = runs
        .iter()
        .map(|r| (r.rho_hat - rho_hat) * (r.rho_hat - rho_hat))
        .sum::<F>()
        / F::from_f64_lossy((replications - 1) as f64);
    let avg_pairs = |get: fn(&BatteryStats<F>) -> &Vec<(F, F)>| -> Vec<(F, F)> {
        (0..thresholds.len())
            .map(|i| {
                let x = get(&runs[0])[i].0;
                let v: F = runs.iter().map(|r| get(r)[i].1).sum::<F>() / m;
                (x, v)
            })
            .collect()
    };

    Ok(BatteryStats {
        rho_hat,
        rho_std_err: (rho_var / m).sqrt(),
        tail_hat: avg_pairs(|r| &r.tail_hat),
        low_tail_hat: avg_pairs(|r| &r.low_tail_hat),
        overshoot_hat: avg_pairs(|r| &r.overshoot_hat),
        overflow_rate: runs.iter().map(|r| r.overflow_rate).sum::<F>() / m,
        overflow_events: runs.iter().map(|r| r.overflow_events).sum(),
        harvested_total: runs.iter().map(|r| r.harvested_total).sum(),
        transmissions_total: runs.iter().map(|r| r.transmissions_total).sum(),
        discarded_total: runs.iter().map(|r| r.discarded_total).sum(),
        final_level: runs.last().unwrap().final_level,
        slots_counted: runs.iter().map(|r| r.slots_counted).sum(),
        short_horizon: runs.iter().any(|r| r.short_horizon),
    })
}

/// Exact transmission probability under unlimited storage:
/// `min(1, rate / power)`.
pub fn tx_prob_infinite<F: Scalar>(rate: F, power: F) -> F {
    (rate / power).min(F::one())
}

/// Upper bound on the stationary tail `Pr(S_t > x)` for unlimited storage
/// and `rate < power`: `2 exp(-r*(P) (x - 2P) / 2)`, clamped to 1.
pub fn tail_bound<F: Scalar>(
    model: &ArrivalModel<F>,
    power: F,
    x: F,
) -> Result<F, BatteryError> {
    let rate = model.rate();
    if !(rate < power) {
        return Err(BatteryError::DriftNotNegative {
            rate: rate.to_f64_lossy(),
            power: power.to_f64_lossy(),
        });
    }
    let r = model.cumulant_root(power)?.r_star;
    let half = F::from_f64_lossy(0.5);
    let two = F::from_f64_lossy(2.0);
    let bound = two * (-half * r * (x - two * power)).exp();
    Ok(bound.min(F::one()))
}

/// Upper bound on the energy-overshoot function `D_t(x)` for unlimited
/// storage and `rate < power`: `(4 / r*(P)) exp(-r*(P) (x - 2P) / 2)`.
/// At `x = B` this is also the finite-capacity overflow bound.
pub fn overshoot_bound<F: Scalar>(
    model: &ArrivalModel<F>,
    power: F,
    x: F,
) -> Result<F, BatteryError> {
    let rate = model.rate();
    if !(rate < power) {
        return Err(BatteryError::DriftNotNegative {
            rate: rate.to_f64_lossy(),
            power: power.to_f64_lossy(),
        });
    }
    let r = model.cumulant_root(power)?.r_star;
    let half = F::from_f64_lossy(0.5);
    let two = F::from_f64_lossy(2.0);
    Ok(F::from_f64_lossy(4.0) / r * (-half * r * (x - two * power)).exp())
}

/// Upper bound on the time-averaged `Pr(S_t < x)` for finite capacity and
/// `rate > power`: `exp(r*(P) (B - x))` with `r*(P) < 0`, clamped to 1.
pub fn low_tail_bound_finite<F: Scalar>(
    model: &ArrivalModel<F>,
    power: F,
    capacity: F,
    x: F,
) -> Result<F, BatteryError> {
    let rate = model.rate();
    if !(rate > power) {
        return Err(BatteryError::DriftNotPositive {
            rate: rate.to_f64_lossy(),
            power: power.to_f64_lossy(),
        });
    }
    if x < F::zero() || x > capacity {
        return Err(BatteryError::ThresholdOutOfRange {
            threshold: x.to_f64_lossy(),
            capacity: capacity.to_f64_lossy(),
        });
    }
    let r = model.cumulant_root(power)?.r_star;
    Ok((r * (capacity - x)).exp().min(F::one()))
}

/// Bounds on the finite-capacity transmission probability.
///
/// With `rate < P` the interval is
/// `(rate/P) [1 - 4/(rate r*(P)) e^{-r*(P)(B-2P)/2}] <= rho <= rate/P`;
/// with `rate > P` it is `1 - e^{r*(P)(B-P)} <= rho <= 1`; at `rate = P`
/// the lower bound maximizes the shifted-power expression over `x > 0` on
/// a log grid refined by golden section. Lower bounds are clamped into
/// `[0, upper]`; the raw formulas can leave that range for small `B`.
/// `Capacity::Infinite` recovers the unlimited-storage value exactly.
pub fn tx_prob_bounds_finite<F: Scalar>(
    model: &ArrivalModel<F>,
    power: F,
    capacity: Capacity<F>,
) -> Result<(F, F), BatteryError> {
    model.validate()?;
    if !(power > F::zero()) {
        return Err(BatteryError::NonPositivePower(power.to_f64_lossy()));
    }
    let b = capacity.limit();
    if b < power {
        return Err(BatteryError::CapacityBelowPower {
            capacity: b.to_f64_lossy(),
            power: power.to_f64_lossy(),
        });
    }
    let rate = model.rate();
    let one = F::one();
    let two = F::from_f64_lossy(2.0);
    let half = F::from_f64_lossy(0.5);
    let four = F::from_f64_lossy(4.0);

    if rate < power {
        let r = model.cumulant_root(power)?.r_star;
        let upper = rate / power;
        let lower = upper * (one - four / (rate * r) * (-half * r * (b - two * power)).exp());
        return Ok((lower.max(F::zero()).min(upper), upper));
    }
    if rate > power {
        let r = model.cumulant_root(power)?.r_star;
        let lower = one - (r * (b - power)).exp();
        return Ok((lower.max(F::zero()).min(one), one));
    }

    // rate == power: zero drift, no root at beta = P. Unlimited storage is
    // the exact boundary value; otherwise maximize the lower bound obtained
    // from the virtual power P + x over x > 0.
    if !capacity.is_finite() {
        return Ok((one, one));
    }
    let lower_at = |x: F| -> Option<F> {
        let root = model.cumulant_root(rate + x).ok()?;
        let r = root.r_star;
        let value = rate / (rate + x)
            * (one - four / (rate * r) * (-half * r * (b - two * rate - two * x)).exp());
        Some(value)
    };
    let n = 200;
    let lo_x = rate * F::from_f64_lossy(1e-3);
    let hi_x = rate * F::from_f64_lossy(10.0);
    let log_lo = lo_x.ln();
    let step = (hi_x.ln() - log_lo) / F::from_f64_lossy((n - 1) as f64);
    let mut best: Option<(usize, F, F)> = None;
    let mut grid = Vec::with_capacity(n);
    for i in 0..n {
        let x = (log_lo + step * F::from_f64_lossy(i as f64)).exp();
        grid.push(x);
        if let Some(v) = lower_at(x) {
            if best.is_none_or(|(_, _, bv)| v > bv) {
                best = Some((i, x, v));
            }
        }
    }
    let Some((i, _, grid_best)) = best else {
        return Err(BatteryError::Arrival(ArrivalError::RootNotBracketable {
            beta: power.to_f64_lossy(),
        }));
    };
    let a = grid[i.saturating_sub(1)];
    let c = grid[(i + 1).min(n - 1)];
    let (_, refined) = golden_max(
        a,
        c,
        |x| lower_at(x).unwrap_or(F::neg_infinity()),
        80,
    );
    let lower = refined.max(grid_best);
    Ok((lower.max(F::zero()).min(one), one))
}

/// One slot of the coupled proof-oracle recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleStep<F = f64> {
    /// Battery level `S_t`.
    pub level: F,
    /// Reflected random walk `G_t` driven by `Z_t - P` (clamped to
    /// `[0, B - P]` under finite capacity).
    pub reflected_walk: F,
    /// `G'_t`: the battery level at the most recent upward crossing of `P`,
    /// initialized to `P`.
    pub crossing_level: F,
}

/// Runs the battery recursion together with the auxiliary processes
/// `G_t` and `G'_t` from the same arrival draws; the envelope inequality
/// `S_t <= G_t + G'_t` holds slot by slot. Entry 0 is the initial state
/// `(0, 0, P)`.
pub fn proof_oracle_trace<F: Scalar>(
    model: &ArrivalModel<F>,
    cfg: &BatteryConfig<F>,
) -> Result<Vec<OracleStep<F>>, BatteryError> {
    cfg.validate()?;
    let sampler = model.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let power = cfg.power;

    let mut out = Vec::with_capacity(cfg.horizon as usize + 1);
    let mut level = F::zero();
    let mut walk = F::zero();
    let mut crossing = power;
    out.push(OracleStep {
        level,
        reflected_walk: walk,
        crossing_level: crossing,
    });

    for _ in 1..=cfg.horizon {
        let z = sampler.draw(&mut rng);
        let zbar = z - power;
        let next = evolve_step(level, z, power, cfg.capacity);
        let crossed = level < power && next >= power;
        walk = (walk + zbar).max(F::zero());
        if let Capacity::Finite(b) = cfg.capacity {
            walk = walk.min(b - power);
        }
        if crossed {
            crossing = next;
        }
        level = next;
        out.push(OracleStep {
            level,
            reflected_walk: walk,
            crossing_level: crossing,
        });
    }
    Ok(out)
}
