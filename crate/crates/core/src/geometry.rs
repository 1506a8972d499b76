//! Stochastic-geometry engine: Poisson point process sampling on a disk,
//! aggregate interference at the origin, Monte Carlo outage estimation,
//! the nominal-density calibration table, and the interference-temperature
//! admissibility test.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::MonotoneCubic;
use crate::scalar::{derive_seed, Scalar};

/// Expected number of points per sampling disk unless overridden.
pub const DEFAULT_MEAN_COUNT: f64 = 200.0;
/// Points landing closer to the origin than this are resampled: the model
/// has no exclusion region, so a sub-nanometre point is a simulation
/// artifact, not physics.
pub const MIN_ORIGIN_DISTANCE: f64 = 1e-9;
/// Fewest Monte Carlo trials accepted by the outage estimator.
pub const MIN_OUTAGE_TRIALS: u64 = 1_000;
/// Fewest Monte Carlo trials accepted per calibration grid point.
pub const MIN_CALIBRATION_TRIALS: u64 = 10_000;
/// Largest outage target the calibration accepts.
pub const MAX_CALIBRATION_TARGET: f64 = 0.2;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("density must be positive, got {0}")]
    InvalidDensity(f64),
    #[error("expected point count must be positive, got {0}")]
    InvalidMeanCount(f64),
    #[error("path-loss exponent must exceed 2, got {0}")]
    InvalidAlpha(f64),
    #[error("target SINR must be positive, got {0}")]
    InvalidTheta(f64),
    #[error("outage probability must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("a point lies within {MIN_ORIGIN_DISTANCE} of the origin; resample it")]
    PointAtOrigin,
    #[error("need at least {min} trials, got {got}")]
    TooFewTrials { min: u64, got: u64 },
    #[error("interference temperature is undefined for power {power} below the target SINR {theta}")]
    PowerBelowTheta { power: f64, theta: f64 },
    #[error("calibration targets must lie in (0, {MAX_CALIBRATION_TARGET}], got {0}")]
    TargetOutOfRange(f64),
    #[error("no calibration targets supplied")]
    NoTargets,
    #[error("calibration grid must be positive and strictly increasing")]
    InvalidGrid,
    #[error("calibration sweep is not strictly monotone; increase the trial count")]
    CalibrationNotMonotone,
    #[error("calibration produced fewer than two usable grid points")]
    CalibrationTooSparse,
    #[error("table parse error on line {line}: {message}")]
    TableFormat { line: usize, message: String },
    #[error("table io error: {0}")]
    TableIo(String),
}

/// Shared parameter bundle for the geometry and throughput layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams<F = f64> {
    /// Transmitter density per unit area.
    pub lambda_0: F,
    /// Energy-arrival rate per slot.
    pub lambda_e: F,
    /// Target SINR.
    pub theta: F,
    /// Path-loss exponent.
    pub alpha: F,
    /// Maximum outage probability.
    pub epsilon: F,
    /// Nominal node density for the outage constraint.
    pub mu_epsilon: F,
}

impl<F: Scalar> NetworkParams<F> {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.alpha > F::from_f64_lossy(2.0)) {
            return Err(GeometryError::InvalidAlpha(self.alpha.to_f64_lossy()));
        }
        if !(self.theta > F::zero()) {
            return Err(GeometryError::InvalidTheta(self.theta.to_f64_lossy()));
        }
        if !(self.epsilon > F::zero() && self.epsilon < F::one()) {
            return Err(GeometryError::InvalidEpsilon(self.epsilon.to_f64_lossy()));
        }
        if !(self.mu_epsilon > F::zero()) {
            return Err(GeometryError::InvalidDensity(
                self.mu_epsilon.to_f64_lossy(),
            ));
        }
        if !(self.lambda_0 > F::zero()) {
            return Err(GeometryError::InvalidDensity(self.lambda_0.to_f64_lossy()));
        }
        Ok(())
    }

    /// [`interference_temperature`] under these parameters.
    pub fn interference_temperature(&self, power: F) -> Result<F, GeometryError> {
        interference_temperature(self.mu_epsilon, self.theta, self.alpha, power)
    }

    /// [`is_admissible`] under these parameters.
    pub fn is_admissible(&self, lambda_t: F, power: F) -> bool {
        is_admissible(lambda_t, power, self.mu_epsilon, self.theta, self.alpha)
    }

    /// Outage probability at the given active density and power.
    pub fn estimate_outage(
        &self,
        lambda_t: F,
        power: F,
        trials: u64,
        seed: u64,
    ) -> Result<Estimate<F>, GeometryError> {
        estimate_outage(lambda_t, power, self.theta, self.alpha, trials, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point<F = f64> {
    pub x: F,
    pub y: F,
}

impl<F: Scalar> Point<F> {
    pub fn norm(&self) -> F {
        (self.x * self.x + self.y * self.y).sqrt()
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate<F = f64> {
    pub value: F,
    pub std_err: F,
}

/// Radius of the sampling disk holding `mean_count` expected points at the
/// given density: `sqrt(mean_count / (pi * density))`.
pub fn disk_radius<F: Scalar>(density: F, mean_count: F) -> F {
    (mean_count / (F::from_f64_lossy(core::f64::consts::PI) * density)).sqrt()
}

fn draw_radius<F: Scalar>(rng: &mut ChaCha8Rng, disk: F) -> F {
    let guard = F::from_f64_lossy(MIN_ORIGIN_DISTANCE);
    loop {
        let r = disk * F::unit_uniform(rng).sqrt();
        if r >= guard {
            return r;
        }
    }
}

/// Poisson number of points (mean `mean_count`) placed uniformly on the
/// disk of matching radius centered at the origin. Deterministic per seed;
/// points closer to the origin than the guard distance are redrawn.
pub fn sample_ppp_disk<F: Scalar>(
    density: F,
    mean_count: F,
    seed: u64,
) -> Result<Vec<Point<F>>, GeometryError> {
    if !(density > F::zero()) {
        return Err(GeometryError::InvalidDensity(density.to_f64_lossy()));
    }
    if !(mean_count > F::zero()) {
        return Err(GeometryError::InvalidMeanCount(mean_count.to_f64_lossy()));
    }
    let disk = disk_radius(density, mean_count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = F::poisson_draw(&mut rng, mean_count);
    let two_pi = F::from_f64_lossy(core::f64::consts::TAU);
    let mut points = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let r = draw_radius(&mut rng, disk);
        let phi = two_pi * F::unit_uniform(&mut rng);
        points.push(Point {
            x: r * phi.cos(),
            y: r * phi.sin(),
        });
    }
    Ok(points)
}

/// Aggregate unit-power interference at the origin: `sum |T|^(-alpha)`.
/// A point inside the guard distance yields [`GeometryError::PointAtOrigin`]
/// so the caller can resample; it never panics.
pub fn interference_at_origin<F: Scalar>(
    points: &[Point<F>],
    alpha: F,
) -> Result<F, GeometryError> {
    if !(alpha > F::from_f64_lossy(2.0)) {
        return Err(GeometryError::InvalidAlpha(alpha.to_f64_lossy()));
    }
    let guard = F::from_f64_lossy(MIN_ORIGIN_DISTANCE);
    let mut sum = F::zero();
    for p in points {
        let d = p.norm();
        if d < guard {
            return Err(GeometryError::PointAtOrigin);
        }
        sum += d.powf(-alpha);
    }
    Ok(sum)
}

/// Probability that the aggregate interference from a PPP of the given
/// density exceeds `threshold`, by Monte Carlo over independent disk
/// realizations (trial `i` runs on stream `i` of the seeded generator, so
/// the result is independent of the parallel schedule).
pub fn exceedance_probability<F: Scalar>(
    density: F,
    threshold: F,
    alpha: F,
    trials: u64,
    mean_count: F,
    seed: u64,
) -> Result<Estimate<F>, GeometryError> {
    if !(density > F::zero()) {
        return Err(GeometryError::InvalidDensity(density.to_f64_lossy()));
    }
    if !(alpha > F::from_f64_lossy(2.0)) {
        return Err(GeometryError::InvalidAlpha(alpha.to_f64_lossy()));
    }
    if !(mean_count > F::zero()) {
        return Err(GeometryError::InvalidMeanCount(mean_count.to_f64_lossy()));
    }
    if trials == 0 {
        return Err(GeometryError::TooFewTrials { min: 1, got: 0 });
    }
    let disk = disk_radius(density, mean_count);

    // Only distances from the origin enter the sum, so the uniform angle
    // is never drawn here.
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let n = F::poisson_draw(&mut rng, mean_count);
            let mut sum = F::zero();
            for _ in 0..n {
                let r = draw_radius(&mut rng, disk);
                sum += r.powf(-alpha);
                if sum > threshold {
                    break;
                }
            }
            (sum > threshold) as u64
        })
        .sum();

    let t = F::from_f64_lossy(trials as f64);
    let p = F::from_f64_lossy(hits as f64) / t;
    Ok(Estimate {
        value: p,
        std_err: (p * (F::one() - p) / t).sqrt(),
    })
}

/// Monte Carlo outage probability for active-transmitter density
/// `lambda_t`, power `power` and target SINR `theta`: the chance that
/// unit-power interference exceeds `1/theta - 1/power`. Exactly one when
/// the power cannot reach the SINR target even without interference.
pub fn estimate_outage<F: Scalar>(
    lambda_t: F,
    power: F,
    theta: F,
    alpha: F,
    trials: u64,
    seed: u64,
) -> Result<Estimate<F>, GeometryError> {
    estimate_outage_with(
        lambda_t,
        power,
        theta,
        alpha,
        trials,
        seed,
        F::from_f64_lossy(DEFAULT_MEAN_COUNT),
    )
}

/// [`estimate_outage`] with an explicit per-trial expected point count
/// (double it to measure residual disk-truncation bias).
pub fn estimate_outage_with<F: Scalar>(
    lambda_t: F,
    power: F,
    theta: F,
    alpha: F,
    trials: u64,
    seed: u64,
    mean_count: F,
) -> Result<Estimate<F>, GeometryError> {
    if !(theta > F::zero()) {
        return Err(GeometryError::InvalidTheta(theta.to_f64_lossy()));
    }
    if trials < MIN_OUTAGE_TRIALS {
        return Err(GeometryError::TooFewTrials {
            min: MIN_OUTAGE_TRIALS,
            got: trials,
        });
    }
    if !(lambda_t > F::zero()) {
        return Err(GeometryError::InvalidDensity(lambda_t.to_f64_lossy()));
    }
    if power <= theta {
        return Ok(Estimate {
            value: F::one(),
            std_err: F::zero(),
        });
    }
    let threshold = theta.recip() - power.recip();
    exceedance_probability(lambda_t, threshold, alpha, trials, mean_count, seed)
}

/// Monte Carlo estimate of the outage level `eps(mu)` defining the nominal
/// node density: the probability that unit-power interference from a PPP
/// of density `mu` exceeds one.
pub fn estimate_epsilon<F: Scalar>(
    mu: F,
    alpha: F,
    trials: u64,
    mean_count: F,
    seed: u64,
) -> Result<Estimate<F>, GeometryError> {
    exceedance_probability(mu, F::one(), alpha, trials, mean_count, seed)
}

/// Network interference temperature: the largest admissible density of
/// active transmitters at power `power`,
/// `zeta(P) = mu_eps (1/theta - 1/P)^(2/alpha)`. Saturates at
/// `mu_eps theta^(-2/alpha)` for large `P` and is undefined below `theta`.
pub fn interference_temperature<F: Scalar>(
    mu_epsilon: F,
    theta: F,
    alpha: F,
    power: F,
) -> Result<F, GeometryError> {
    if !(mu_epsilon > F::zero()) {
        return Err(GeometryError::InvalidDensity(mu_epsilon.to_f64_lossy()));
    }
    if !(theta > F::zero()) {
        return Err(GeometryError::InvalidTheta(theta.to_f64_lossy()));
    }
    if !(alpha > F::from_f64_lossy(2.0)) {
        return Err(GeometryError::InvalidAlpha(alpha.to_f64_lossy()));
    }
    if power < theta {
        return Err(GeometryError::PowerBelowTheta {
            power: power.to_f64_lossy(),
            theta: theta.to_f64_lossy(),
        });
    }
    let margin = theta.recip() - power.recip();
    Ok(mu_epsilon * margin.powf(F::from_f64_lossy(2.0) / alpha))
}

/// Whether `(lambda_t, power)` satisfies the outage constraint:
/// `power >= theta` and `lambda_t <= zeta(power)`.
pub fn is_admissible<F: Scalar>(
    lambda_t: F,
    power: F,
    mu_epsilon: F,
    theta: F,
    alpha: F,
) -> bool {
    match interference_temperature(mu_epsilon, theta, alpha, power) {
        Ok(zeta) => lambda_t <= zeta,
        Err(_) => false,
    }
}

/// One calibrated `(epsilon, mu)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow<F = f64> {
    pub epsilon: F,
    pub mu: F,
    pub trials: u64,
    pub std_err: F,
}

/// Monte Carlo map between the maximum outage probability and the nominal
/// node density, invertible in both directions once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalDensityTable<F = f64> {
    pub alpha: F,
    pub mean_count: F,
    pub seed: u64,
    /// Resolved targets, sorted by `mu` (equivalently by `epsilon`).
    pub rows: Vec<CalibrationRow<F>>,
    /// Requested targets outside the calibrated range.
    pub unresolved: Vec<F>,
    /// Raw sweep evaluations backing the inversion (not persisted).
    #[serde(skip)]
    pub grid: Vec<CalibrationRow<F>>,
}

impl<F: Scalar> NominalDensityTable<F> {
    /// Nominal density for a target outage probability, by monotone cubic
    /// interpolation of `log mu` against `log epsilon` over the rows.
    /// `None` outside the calibrated range or with fewer than two rows.
    pub fn mu_for(&self, epsilon: F) -> Option<F> {
        interp_log_log(
            self.rows.iter().map(|r| (r.epsilon, r.mu)).collect(),
            epsilon,
        )
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), GeometryError> {
        let io = |e: std::io::Error| GeometryError::TableIo(e.to_string());
        writeln!(w, "# nominal-density table").map_err(io)?;
        writeln!(
            w,
            "# alpha={} mean_count={} seed={}",
            self.alpha, self.mean_count, self.seed
        )
        .map_err(io)?;
        writeln!(w, "epsilon,mu,trials,stderr").map_err(io)?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.epsilon, r.mu, r.trials, r.std_err).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, GeometryError> {
        let mut table = NominalDensityTable {
            alpha: F::nan(),
            mean_count: F::from_f64_lossy(DEFAULT_MEAN_COUNT),
            seed: 0,
            rows: Vec::new(),
            unresolved: Vec::new(),
            grid: Vec::new(),
        };
        let mut header_seen = false;
        for (idx, line) in r.lines().enumerate() {
            let line = line.map_err(|e| GeometryError::TableIo(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for token in meta.split_whitespace() {
                    if let Some((key, value)) = token.split_once('=') {
                        match key {
                            "alpha" => {
                                table.alpha = value
                                    .parse::<f64>()
                                    .map(F::from_f64_lossy)
                                    .unwrap_or(F::nan())
                            }
                            "mean_count" => {
                                if let Ok(v) = value.parse::<f64>() {
                                    table.mean_count = F::from_f64_lossy(v);
                                }
                            }
                            "seed" => {
                                if let Ok(v) = value.parse::<u64>() {
                                    table.seed = v;
                                }
                            }
                            _ => {}
                        }
                    }
                }
                continue;
            }
            if !header_seen {
                if line != "epsilon,mu,trials,stderr" {
                    return Err(GeometryError::TableFormat {
                        line: idx + 1,
                        message: format!("unexpected header {line:?}"),
                    });
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(GeometryError::TableFormat {
                    line: idx + 1,
                    message: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str| -> Result<F, GeometryError> {
                s.parse::<f64>()
                    .map(F::from_f64_lossy)
                    .map_err(|e| GeometryError::TableFormat {
                        line: idx + 1,
                        message: e.to_string(),
                    })
            };
            table.rows.push(CalibrationRow {
                epsilon: parse(fields[0])?,
                mu: parse(fields[1])?,
                trials: fields[2].parse().map_err(|_| GeometryError::TableFormat {
                    line: idx + 1,
                    message: "bad trial count".into(),
                })?,
                std_err: parse(fields[3])?,
            });
        }
        if !header_seen {
            return Err(GeometryError::TableFormat {
                line: 0,
                message: "missing header row".into(),
            });
        }
        Ok(table)
    }
}

fn interp_log_log<F: Scalar>(pairs: Vec<(F, F)>, at: F) -> Option<F> {
    if pairs.len() < 2 || !(at > F::zero()) {
        return None;
    }
    let xs: Vec<F> = pairs.iter().map(|&(x, _)| x.ln()).collect();
    let ys: Vec<F> = pairs.iter().map(|&(_, y)| y.ln()).collect();
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return None;
    }
    let spline = MonotoneCubic::new(xs, ys).ok()?;
    let (lo, hi) = spline.x_range();
    let q = at.ln();
    if q < lo || q > hi {
        return None;
    }
    Some(spline.eval(q).exp())
}

/// Calibrates the nominal node density against the requested outage
/// targets with the default disk population of 200 expected points and an
/// automatically sized density grid.
pub fn estimate_nominal_density<F: Scalar>(
    alpha: F,
    eps_targets: &[F],
    trials: u64,
    seed: u64,
) -> Result<NominalDensityTable<F>, GeometryError> {
    estimate_nominal_density_with(
        alpha,
        eps_targets,
        trials,
        seed,
        F::from_f64_lossy(DEFAULT_MEAN_COUNT),
        None,
    )
}

/// Full-control calibration: sweeps `eps(mu)` over a density grid (given
/// or derived from the target range), then inverts by monotone cubic
/// interpolation on log-log axes. Targets outside the achieved range are
/// reported in `unresolved` rather than extrapolated.
pub fn estimate_nominal_density_with<F: Scalar>(
    alpha: F,
    eps_targets: &[F],
    trials: u64,
    seed: u64,
    mean_count: F,
    mu_grid: Option<&[F]>,
) -> Result<NominalDensityTable<F>, GeometryError> {
    if eps_targets.is_empty() {
        return Err(GeometryError::NoTargets);
    }
    for &t in eps_targets {
        if !(t > F::zero() && t <= F::from_f64_lossy(MAX_CALIBRATION_TARGET)) {
            return Err(GeometryError::TargetOutOfRange(t.to_f64_lossy()));
        }
    }
    if trials < MIN_CALIBRATION_TRIALS {
        return Err(GeometryError::TooFewTrials {
            min: MIN_CALIBRATION_TRIALS,
            got: trials,
        });
    }

    let grid: Vec<F> = match mu_grid {
        Some(g) => {
            if g.len() < 2 || g.windows(2).any(|w| !(w[1] > w[0])) || !(g[0] > F::zero()) {
                return Err(GeometryError::InvalidGrid);
            }
            g.to_vec()
        }
        None => {
            // The exceedance level is at least the chance of a point inside
            // the unit disk, about pi*mu for small mu; pad both ends so the
            // targets land strictly inside the swept range.
            let lo = eps_targets
                .iter()
                .cloned()
                .fold(F::infinity(), F::min)
                .to_f64_lossy();
            let hi = eps_targets
                .iter()
                .cloned()
                .fold(F::neg_infinity(), F::max)
                .to_f64_lossy();
            let mu_lo = lo / (4.0 * core::f64::consts::PI);
            let mu_hi = (-(1.0 - (2.5 * hi).min(0.8)).ln()) / core::f64::consts::PI;
            let n = 12;
            (0..n)
                .map(|i| {
                    F::from_f64_lossy(
                        (mu_lo.ln() + (mu_hi.ln() - mu_lo.ln()) * i as f64 / (n - 1) as f64)
                            .exp(),
                    )
                })
                .collect()
        }
    };

    let mut sweep: Vec<CalibrationRow<F>> = Vec::with_capacity(grid.len());
    for (i, &mu) in grid.iter().enumerate() {
        let est = estimate_epsilon(mu, alpha, trials, mean_count, derive_seed(seed, i as u64))?;
        sweep.push(CalibrationRow {
            epsilon: est.value,
            mu,
            trials,
            std_err: est.std_err,
        });
    }

    // Zero-hit points carry no information for the log-log inversion.
    let usable: Vec<&CalibrationRow<F>> = sweep
        .iter()
        .filter(|r| r.epsilon > F::zero())
        .collect();
    if usable.len() < 2 {
        return Err(GeometryError::CalibrationTooSparse);
    }
    if usable.windows(2).any(|w| !(w[1].epsilon > w[0].epsilon)) {
        return Err(GeometryError::CalibrationNotMonotone);
    }

    let pairs: Vec<(F, F)> = usable.iter().map(|r| (r.epsilon, r.mu)).collect();
    let eps_lo = pairs.first().unwrap().0;
    let eps_hi = pairs.last().unwrap().0;

    let mut targets = eps_targets.to_vec();
    targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    targets.dedup();

    let mut rows = Vec::new();
    let mut unresolved = Vec::new();
    for &target in &targets {
        if target < eps_lo || target > eps_hi {
            unresolved.push(target);
            continue;
        }
        if let Some(mu) = interp_log_log(pairs.clone(), target) {
            rows.push(CalibrationRow {
                epsilon: target,
                mu,
                trials,
                std_err: (target * (F::one() - target) / F::from_f64_lossy(trials as f64))
                    .sqrt(),
            });
        } else {
            unresolved.push(target);
        }
    }

    Ok(NominalDensityTable {
        alpha,
        mean_count,
        seed,
        rows,
        unresolved,
        grid: sweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_radius_matches_density() {
        let r = disk_radius(0.05_f64, 200.0);
        assert!((r - 35.682_482_323_055_42).abs() < 1e-10);
    }

    #[test]
    fn interference_closed_cases() {
        let single = [Point::<f64> { x: 0.0, y: 2.0 }];
        assert!((interference_at_origin(&single, 3.0).unwrap() - 0.125).abs() < 1e-15);
        let pair = [Point::<f64> { x: 1.0, y: 0.0 }, Point { x: 0.0, y: 2.0 }];
        assert!((interference_at_origin(&pair, 4.0).unwrap() - 1.0625).abs() < 1e-15);
        assert_eq!(interference_at_origin::<f64>(&[], 3.0).unwrap(), 0.0);
        let origin = [Point::<f64> { x: 0.0, y: 0.0 }];
        assert!(matches!(
            interference_at_origin(&origin, 3.0),
            Err(GeometryError::PointAtOrigin)
        ));
    }

    #[test]
    fn interference_is_additive_and_permutation_invariant() {
        let a = vec![
            Point::<f64> { x: 1.5, y: 0.2 },
            Point { x: -2.0, y: 1.0 },
            Point { x: 0.3, y: -3.0 },
        ];
        let b = vec![Point { x: 4.0, y: 4.0 }, Point { x: -1.0, y: -1.0 }];
        let mut joined = a.clone();
        joined.extend(b.iter().copied());
        let sum = interference_at_origin(&joined, 3.5).unwrap();
        let parts = interference_at_origin(&a, 3.5).unwrap()
            + interference_at_origin(&b, 3.5).unwrap();
        assert!((sum - parts).abs() < 1e-12);
        let mut reversed = joined.clone();
        reversed.reverse();
        let rev = interference_at_origin(&reversed, 3.5).unwrap();
        assert!((sum - rev).abs() < 1e-12);
    }

    #[test]
    fn ppp_point_count_matches_poisson_mean() {
        let trials = 10_000u64;
        let mut total = 0usize;
        for i in 0..trials {
            total += sample_ppp_disk(0.05_f64, 200.0, derive_seed(5, i))
                .unwrap()
                .len();
        }
        let mean = total as f64 / trials as f64;
        // 3-sigma band: sqrt(200 / 1e4) ~ 0.1414.
        assert!((mean - 200.0).abs() < 0.43, "mean = {mean}");
    }

    #[test]
    fn ppp_is_uniform_near_the_origin() {
        let trials = 4_000u64;
        let mut inside = 0usize;
        for i in 0..trials {
            inside += sample_ppp_disk(0.05_f64, 200.0, derive_seed(11, i))
                .unwrap()
                .iter()
                .filter(|p| p.norm() < 10.0)
                .count();
        }
        let area = core::f64::consts::PI * 100.0;
        let density = inside as f64 / (area * trials as f64);
        assert!((density - 0.05).abs() < 0.001, "density = {density}");
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let a = sample_ppp_disk(0.05_f64, 200.0, 9).unwrap();
        let b = sample_ppp_disk(0.05_f64, 200.0, 9).unwrap();
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(p, q)| p == q));
    }

    #[test]
    fn outage_is_one_without_snr_margin() {
        let est = estimate_outage(0.02_f64, 2.0, 3.0, 3.0, 1_000, 1).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.std_err, 0.0);
        let boundary = estimate_outage(0.02_f64, 3.0, 3.0, 3.0, 1_000, 1).unwrap();
        assert_eq!(boundary.value, 1.0);
    }

    #[test]
    fn outage_estimator_rejects_bad_inputs() {
        assert!(matches!(
            estimate_outage(0.0_f64, 10.0, 3.0, 3.0, 1_000, 1),
            Err(GeometryError::InvalidDensity(_))
        ));
        assert!(matches!(
            estimate_outage(0.05_f64, 10.0, 3.0, 3.0, 10, 1),
            Err(GeometryError::TooFewTrials { .. })
        ));
    }

    #[test]
    fn outage_monotone_in_power_and_density() {
        let trials = 30_000u64;
        let low_p = estimate_outage(0.02_f64, 4.0, 3.0, 3.0, trials, 21).unwrap();
        let high_p = estimate_outage(0.02_f64, 40.0, 3.0, 3.0, trials, 22).unwrap();
        let joint = (low_p.std_err.powi(2) + high_p.std_err.powi(2)).sqrt();
        assert!(
            high_p.value <= low_p.value + 3.0 * joint,
            "outage should not increase with power: {} vs {}",
            low_p.value,
            high_p.value
        );
        let dense = estimate_outage(0.08_f64, 40.0, 3.0, 3.0, trials, 23).unwrap();
        let joint = (dense.std_err.powi(2) + high_p.std_err.powi(2)).sqrt();
        assert!(dense.value >= high_p.value - 3.0 * joint);
        assert!(dense.value > high_p.value + 3.0 * joint, "should separate");
    }

    #[test]
    fn exceedance_scale_invariance() {
        // Scaling the process by a=2 divides the density by 4 and the
        // threshold by 2^alpha.
        let trials = 60_000u64;
        let alpha = 3.0;
        let base = exceedance_probability(0.05_f64, 1.0, alpha, trials, 200.0, 31).unwrap();
        let scaled =
            exceedance_probability(0.0125_f64, 0.125, alpha, trials, 200.0, 32).unwrap();
        let joint = (base.std_err.powi(2) + scaled.std_err.powi(2)).sqrt();
        assert!(
            (base.value - scaled.value).abs() <= 3.0 * joint,
            "{} vs {} (joint se {joint})",
            base.value,
            scaled.value
        );
    }

    #[test]
    fn zeta_reference_values() {
        let sat = interference_temperature(0.05_f64, 3.0, 3.0, 1e12).unwrap();
        assert!((sat - 0.024_037_492_838_456_8).abs() < 1e-10);
        assert_eq!(interference_temperature(0.05_f64, 3.0, 3.0, 3.0).unwrap(), 0.0);
        let at_p0 = interference_temperature(0.05_f64, 3.0, 3.0, 12.445_377_158_776_493).unwrap();
        assert!((at_p0 - 0.02).abs() < 1e-12);
        assert!(matches!(
            interference_temperature(0.05_f64, 3.0, 3.0, 2.0),
            Err(GeometryError::PowerBelowTheta { .. })
        ));
    }

    #[test]
    fn zeta_is_increasing_and_bounded() {
        let sat = 0.05_f64 * 3.0f64.powf(-2.0 / 3.0);
        let mut prev = 0.0;
        for k in 0..60 {
            let p = 3.0 * 1.2f64.powi(k);
            let z = interference_temperature(0.05, 3.0, 3.0, p).unwrap();
            assert!(z >= prev);
            assert!(z <= sat + 1e-15);
            prev = z;
        }
    }

    #[test]
    fn admissibility_cases() {
        assert!(is_admissible(0.0_f64, 3.0, 0.05, 3.0, 3.0));
        assert!(!is_admissible(0.03_f64, 1e12, 0.05, 3.0, 3.0));
        let p = 10.0;
        let zeta = interference_temperature(0.05_f64, 3.0, 3.0, p).unwrap();
        assert!(is_admissible(zeta, p, 0.05, 3.0, 3.0));
        assert!(!is_admissible(zeta * 1.000001, p, 0.05, 3.0, 3.0));
        assert!(!is_admissible(0.0_f64, 2.0, 0.05, 3.0, 3.0));
    }

    #[test]
    fn outage_at_the_admissibility_boundary_matches_calibration_level() {
        // lambda_t = zeta(P) rescales the exceedance threshold to exactly
        // the calibration threshold 1, so the outage there equals eps(mu).
        let (mu, theta, alpha, p) = (0.05_f64, 3.0, 3.0, 10.0);
        let zeta = interference_temperature(mu, theta, alpha, p).unwrap();
        let trials = 30_000u64;
        let boundary = estimate_outage(zeta, p, theta, alpha, trials, 41).unwrap();
        let calibration = estimate_epsilon(mu, alpha, trials, 200.0, 42).unwrap();
        let joint = (boundary.std_err.powi(2) + calibration.std_err.powi(2)).sqrt();
        assert!(
            (boundary.value - calibration.value).abs() <= 3.0 * joint,
            "{} vs {} (joint se {joint})",
            boundary.value,
            calibration.value
        );
    }

    #[test]
    fn tiny_density_has_negligible_outage() {
        let est = estimate_epsilon(1e-6_f64, 3.0, 20_000, 200.0, 3).unwrap();
        assert!(est.value < 1e-3, "eps = {}", est.value);
    }

    #[test]
    fn calibration_sweep_is_monotone_and_invertible() {
        let grid = [0.002_f64, 0.005, 0.012, 0.03, 0.07];
        let table =
            estimate_nominal_density_with(3.0_f64, &[0.05], 20_000, 17, 200.0, Some(&grid))
                .unwrap();
        for w in table.grid.windows(2) {
            let joint = (w[0].std_err.powi(2) + w[1].std_err.powi(2)).sqrt();
            assert!(
                w[1].epsilon > w[0].epsilon + 3.0 * joint,
                "sweep rows not separated: {w:?}"
            );
        }
        assert_eq!(table.rows.len(), 1);
        let row = table.rows[0];
        assert_eq!(row.epsilon, 0.05);
        assert!(row.mu > grid[0] && row.mu < *grid.last().unwrap());
        // Round trip: the density the inversion picked should land near
        // the target when evaluated forward.
        let back = estimate_epsilon(row.mu, 3.0, 40_000, 200.0, 99).unwrap();
        assert!(
            (back.value - 0.05).abs() < 0.01,
            "round trip eps = {}",
            back.value
        );
    }

    #[test]
    fn calibration_flags_unresolvable_targets() {
        let grid = [0.02_f64, 0.04, 0.08];
        let table = estimate_nominal_density_with(
            3.0_f64,
            &[0.001, 0.12],
            10_000,
            7,
            200.0,
            Some(&grid),
        )
        .unwrap();
        assert!(table.unresolved.contains(&0.001));
        assert!(table.rows.len() + table.unresolved.len() == 2);
    }

    #[test]
    fn calibration_rejects_bad_targets() {
        assert!(matches!(
            estimate_nominal_density(3.0_f64, &[0.5], 10_000, 1),
            Err(GeometryError::TargetOutOfRange(_))
        ));
        assert!(matches!(
            estimate_nominal_density(3.0_f64, &[], 10_000, 1),
            Err(GeometryError::NoTargets)
        ));
        assert!(matches!(
            estimate_nominal_density(3.0_f64, &[0.05], 100, 1),
            Err(GeometryError::TooFewTrials { .. })
        ));
    }

    #[test]
    fn table_round_trips_through_csv() {
        let table = NominalDensityTable {
            alpha: 3.0_f64,
            mean_count: 200.0,
            seed: 42,
            rows: vec![
                CalibrationRow {
                    epsilon: 0.01,
                    mu: 0.003,
                    trials: 1000,
                    std_err: 0.0004,
                },
                CalibrationRow {
                    epsilon: 0.05,
                    mu: 0.016,
                    trials: 1000,
                    std_err: 0.0009,
                },
                CalibrationRow {
                    epsilon: 0.1,
                    mu: 0.034,
                    trials: 1000,
                    std_err: 0.0012,
                },
            ],
            unresolved: vec![],
            grid: vec![],
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let parsed = NominalDensityTable::<f64>::read_csv(&buf[..]).unwrap();
        assert_eq!(parsed.rows, table.rows);
        assert_eq!(parsed.alpha, 3.0);
        assert_eq!(parsed.seed, 42);
        let mu = parsed.mu_for(0.05).unwrap();
        assert!((mu - 0.016).abs() < 1e-12);
        assert!(parsed.mu_for(0.02).unwrap() > 0.003);
        assert!(parsed.mu_for(0.5).is_none());
    }

    #[test]
    fn network_params_validation() {
        let good = NetworkParams {
            lambda_0: 0.02_f64,
            lambda_e: 2.0,
            theta: 3.0,
            alpha: 3.0,
            epsilon: 0.015,
            mu_epsilon: 0.05,
        };
        assert!(good.validate().is_ok());
        let mut bad = good;
        bad.alpha = 2.0;
        assert!(matches!(bad.validate(), Err(GeometryError::InvalidAlpha(_))));
        let mut bad = good;
        bad.epsilon = 1.0;
        assert!(matches!(
            bad.validate(),
            Err(GeometryError::InvalidEpsilon(_))
        ));
    }
}
