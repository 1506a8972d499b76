//! Exact finite-capacity battery analysis for integer-valued arrivals:
//! the `(B+1)`-state chain over battery levels, its stationary vector, and
//! the closed-form special cases (binary and bounded arrivals).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MarkovError {
    #[error("pmf must not be empty")]
    EmptyPmf,
    #[error("pmf entry for value {value} has negative probability {prob}")]
    NegativePmfEntry { value: u64, prob: f64 },
    #[error("pmf probabilities sum to {sum}, expected 1")]
    PmfNotNormalized { sum: f64 },
    #[error("need 1 <= power <= capacity, got power {power}, capacity {capacity}")]
    PowerOutOfRange { power: u32, capacity: u32 },
    #[error("{count} closed classes are reachable from the empty state; the stationary distribution is ambiguous")]
    MultipleClosedClasses { count: usize },
    #[error("stationary solve hit a singular linear system")]
    SingularSystem,
    #[error("bounded-arrival case requires rate <= power (rate {rate}, power {power})")]
    RateAbovePower { rate: f64, power: f64 },
    #[error("maximum arrival must be non-negative, got {0}")]
    NegativeMaxArrival(f64),
}

/// Battery-level chain on states `{0, 1, ..., capacity}` for integer
/// per-slot arrivals and an integer transmission power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovBattery<F = f64> {
    pub power: u32,
    pub capacity: u32,
    /// Dense arrival pmf: `pmf[k] = Pr(Z = k)`.
    pub pmf: Vec<F>,
    /// Row-major `(capacity+1) x (capacity+1)` row-stochastic matrix.
    pub transition: Vec<F>,
    /// Filled by [`MarkovBattery::solve`]; [`stationary`] recomputes it.
    pub stationary: Option<Vec<F>>,
}

impl<F: Scalar> MarkovBattery<F> {
    pub fn n_states(&self) -> usize {
        self.capacity as usize + 1
    }

    pub fn row(&self, m: usize) -> &[F] {
        let n = self.n_states();
        &self.transition[m * n..(m + 1) * n]
    }

    /// Solves and caches the stationary vector.
    pub fn solve(mut self) -> Result<Self, MarkovError> {
        let pi = stationary(&self)?;
        self.stationary = Some(pi);
        Ok(self)
    }
}

/// Builds the transition matrix from the four-case transition law: below
/// the top state the chain moves by the arrival net of any transmission,
/// and the top state absorbs the whole saturating tail
/// (`sum_{k >= B - m} Pr(Z = k + P I(m >= P))`).
///
/// Infinite-support pmfs must be truncated by the caller with total mass
/// within 1e-12 of one; the missing tail lands in the saturation column.
pub fn build_transition<F: Scalar>(
    pmf: &BTreeMap<u64, F>,
    power: u32,
    capacity: u32,
) -> Result<MarkovBattery<F>, MarkovError> {
    if pmf.is_empty() {
        return Err(MarkovError::EmptyPmf);
    }
    if power < 1 || power > capacity {
        return Err(MarkovError::PowerOutOfRange { power, capacity });
    }
    let mut sum = F::zero();
    for (&value, &prob) in pmf {
        if !(prob >= F::zero()) {
            return Err(MarkovError::NegativePmfEntry {
                value,
                prob: prob.to_f64_lossy(),
            });
        }
        sum += prob;
    }
    let tol = F::from_f64_lossy(1e-12).max(F::epsilon() * F::from_f64_lossy(32.0));
    if (sum - F::one()).abs() > tol {
        return Err(MarkovError::PmfNotNormalized {
            sum: sum.to_f64_lossy(),
        });
    }

    let max_value = *pmf.keys().next_back().unwrap() as usize;
    let mut dense = vec![F::zero(); max_value + 1];
    for (&v, &p) in pmf {
        dense[v as usize] = p;
    }

    let n = capacity as usize + 1;
    let mut transition = vec![F::zero(); n * n];
    for m in 0..n {
        let consumed = if m as u32 >= power { power as i64 } else { 0 };
        let mut below = F::zero();
        for target in 0..n - 1 {
            let needed = target as i64 - m as i64 + consumed;
            let p = if needed >= 0 {
                dense.get(needed as usize).copied().unwrap_or(F::zero())
            } else {
                F::zero()
            };
            transition[m * n + target] = p;
            below += p;
        }
        transition[m * n + n - 1] = (F::one() - below).max(F::zero());
    }

    Ok(MarkovBattery {
        power,
        capacity,
        pmf: dense,
        transition,
        stationary: None,
    })
}

/// States reachable from `from` along positive-probability edges.
fn reachable<F: Scalar>(chain: &MarkovBattery<F>, from: usize) -> Vec<bool> {
    let n = chain.n_states();
    let mut seen = vec![false; n];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(m) = stack.pop() {
        for (target, &p) in chain.row(m).iter().enumerate() {
            if p > F::zero() && !seen[target] {
                seen[target] = true;
                stack.push(target);
            }
        }
    }
    seen
}

/// Strongly connected components of the subgraph induced on `mask`, by
/// pairwise mutual reachability. The state space is at most a few hundred
/// states, so the cubic sweep is plenty fast.
fn components<F: Scalar>(chain: &MarkovBattery<F>, mask: &[bool]) -> Vec<Vec<usize>> {
    let n = chain.n_states();
    let mut reach: Vec<Option<Vec<bool>>> = vec![None; n];
    for start in 0..n {
        if !mask[start] {
            continue;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(m) = stack.pop() {
            for (target, &p) in chain.row(m).iter().enumerate() {
                if p > F::zero() && mask[target] && !seen[target] {
                    seen[target] = true;
                    stack.push(target);
                }
            }
        }
        reach[start] = Some(seen);
    }

    let mut assigned = vec![false; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for a in 0..n {
        if !mask[a] || assigned[a] {
            continue;
        }
        let ra = reach[a].as_ref().unwrap();
        let mut members = Vec::new();
        for b in 0..n {
            if mask[b] && !assigned[b] && ra[b] && reach[b].as_ref().unwrap()[a] {
                members.push(b);
            }
        }
        for &m in &members {
            assigned[m] = true;
        }
        groups.push(members);
    }
    groups
}

/// Stationary distribution of the chain started from the empty battery.
///
/// Scans reachability from state 0, requires a unique closed class among
/// the reachable states, solves `pi P = pi, sum pi = 1` on that class by a
/// dense LU factorization, and reports zero mass on transient states.
pub fn stationary<F: Scalar>(chain: &MarkovBattery<F>) -> Result<Vec<F>, MarkovError> {
    let n = chain.n_states();
    let mask = reachable(chain, 0);
    let groups = components(chain, &mask);

    let mut closed: Vec<&Vec<usize>> = Vec::new();
    for group in &groups {
        let leaves = group.iter().any(|&v| {
            chain
                .row(v)
                .iter()
                .enumerate()
                .any(|(t, &p)| p > F::zero() && !group.contains(&t))
        });
        if !leaves {
            closed.push(group);
        }
    }
    if closed.len() != 1 {
        return Err(MarkovError::MultipleClosedClasses {
            count: closed.len(),
        });
    }

    let mut class: Vec<usize> = closed[0].clone();
    class.sort_unstable();
    let k = class.len();

    // (P^T - I) pi = 0 with the last equation replaced by normalization.
    let mut a = vec![F::zero(); k * k];
    let mut rhs = vec![F::zero(); k];
    for (col, &state_col) in class.iter().enumerate() {
        for (row, &state_row) in class.iter().enumerate() {
            let mut v = chain.row(state_col)[state_row];
            if row == col {
                v = v - F::one();
            }
            a[row * k + col] = v;
        }
    }
    for col in 0..k {
        a[(k - 1) * k + col] = F::one();
    }
    rhs[k - 1] = F::one();

    let pi_class = solve_dense(&mut a, &mut rhs, k)?;

    let mut pi = vec![F::zero(); n];
    let mut total = F::zero();
    for (&state, &v) in class.iter().zip(&pi_class) {
        let v = v.max(F::zero()); // rounding can leave -1e-17 residue
        pi[state] = v;
        total += v;
    }
    for v in &mut pi {
        *v = *v / total;
    }
    Ok(pi)
}

fn solve_dense<F: Scalar>(a: &mut [F], b: &mut [F], n: usize) -> Result<Vec<F>, MarkovError> {
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < F::epsilon() * F::from_f64_lossy(n as f64) {
            return Err(MarkovError::SingularSystem);
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / d;
            if factor == F::zero() {
                continue;
            }
            for j in col..n {
                a[row * n + j] = a[row * n + j] - factor * a[col * n + j];
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    let mut x = vec![F::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in row + 1..n {
            acc = acc - a[row * n + j] * x[j];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}

/// Stationary mass at transmitting states: `rho = sum_{m >= P} pi_m`.
pub fn tx_prob_markov<F: Scalar>(chain: &MarkovBattery<F>) -> Result<F, MarkovError> {
    let pi = match &chain.stationary {
        Some(pi) => pi.clone(),
        None => stationary(chain)?,
    };
    Ok(pi[chain.power as usize..].iter().copied().sum())
}

/// Closed-form stationary vector for binary arrivals: mass `1/P` spread
/// over the interior ramp with `(1 - rate)/P` at empty and `rate/P` at the
/// transmitting state `P`; states above `P` are never revisited.
pub fn binary_stationary<F: Scalar>(rate: F, power: u32, capacity: u32) -> Vec<F> {
    let n = capacity as usize + 1;
    let p = F::from_f64_lossy(power as f64);
    let mut pi = vec![F::zero(); n];
    pi[0] = (F::one() - rate) / p;
    for slot in pi.iter_mut().take(power as usize).skip(1) {
        *slot = p.recip();
    }
    pi[power as usize] = rate / p;
    pi
}

/// Exact transmission probability for bounded arrivals: when the arrival
/// never exceeds the power and the capacity exceeds `2P`, overflow cannot
/// occur and `rho = rate / P`. Returns `None` when the hypothesis fails.
pub fn bounded_arrival_rho<F: Scalar>(
    z_max: F,
    rate: F,
    power: F,
    capacity: F,
) -> Result<Option<F>, MarkovError> {
    if !(z_max >= F::zero()) {
        return Err(MarkovError::NegativeMaxArrival(z_max.to_f64_lossy()));
    }
    let two = F::from_f64_lossy(2.0);
    if z_max <= power && capacity > two * power {
        if rate > power {
            return Err(MarkovError::RateAbovePower {
                rate: rate.to_f64_lossy(),
                power: power.to_f64_lossy(),
            });
        }
        Ok(Some(rate / power))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_pmf(rate: f64) -> BTreeMap<u64, f64> {
        [(0u64, 1.0 - rate), (1, rate)].into_iter().collect()
    }

    #[test]
    fn binary_p1_b2_rows_and_stationary() {
        let chain = build_transition(&binary_pmf(0.5), 1, 2).unwrap();
        assert_eq!(chain.row(0), &[0.5, 0.5, 0.0]);
        assert_eq!(chain.row(1), &[0.5, 0.5, 0.0]);
        assert_eq!(chain.row(2), &[0.0, 0.5, 0.5]);
        // State 2 is unreachable from the empty battery.
        let pi = stationary(&chain).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-14);
        assert!((pi[1] - 0.5).abs() < 1e-14);
        assert_eq!(pi[2], 0.0);
    }

    #[test]
    fn zero_arrivals_give_identity_like_rows() {
        let pmf: BTreeMap<u64, f64> = [(0u64, 1.0)].into_iter().collect();
        let chain = build_transition(&pmf, 2, 5).unwrap();
        for m in 0..6usize {
            let expect = if m >= 2 { m - 2 } else { m };
            for (t, &p) in chain.row(m).iter().enumerate() {
                assert_eq!(p, if t == expect { 1.0 } else { 0.0 }, "row {m}");
            }
        }
        let pi = stationary(&chain).unwrap();
        assert_eq!(pi[0], 1.0);
        assert_eq!(tx_prob_markov(&chain).unwrap(), 0.0);
    }

    #[test]
    fn rows_are_stochastic() {
        let pmf: BTreeMap<u64, f64> = [(0u64, 0.25), (1, 0.5), (2, 0.25)].into_iter().collect();
        let chain = build_transition(&pmf, 2, 4).unwrap();
        for m in 0..chain.n_states() {
            let sum: f64 = chain.row(m).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "row {m} sums to {sum}");
        }
    }

    #[test]
    fn stationary_satisfies_balance() {
        let pmf: BTreeMap<u64, f64> = [(0u64, 0.2), (1, 0.5), (3, 0.3)].into_iter().collect();
        let chain = build_transition(&pmf, 2, 7).unwrap();
        let pi = stationary(&chain).unwrap();
        let n = chain.n_states();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for target in 0..n {
            let flowed: f64 = (0..n).map(|m| pi[m] * chain.row(m)[target]).sum();
            assert!(
                (flowed - pi[target]).abs() < 1e-10,
                "balance violated at state {target}"
            );
        }
        assert!(pi.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn binary_closed_form_matches_solver() {
        for power in 1..=10u32 {
            for extra in 0..=5u32 {
                let capacity = power + extra;
                for rate in [0.2, 0.5, 0.9] {
                    let chain = build_transition(&binary_pmf(rate), power, capacity).unwrap();
                    let pi = stationary(&chain).unwrap();
                    let closed = binary_stationary(rate, power, capacity);
                    for (m, (&a, &b)) in pi.iter().zip(&closed).enumerate() {
                        assert!(
                            (a - b).abs() < 1e-10,
                            "P={power} B={capacity} rate={rate} state {m}: {a} vs {b}"
                        );
                    }
                    let rho = tx_prob_markov(&chain).unwrap();
                    assert!((rho - rate / power as f64).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn solve_caches_stationary() {
        let chain = build_transition(&binary_pmf(0.5), 3, 5)
            .unwrap()
            .solve()
            .unwrap();
        assert!(chain.stationary.is_some());
        let rho = tx_prob_markov(&chain).unwrap();
        assert!((rho - 0.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn finite_capacity_never_beats_infinite() {
        let pmfs: Vec<BTreeMap<u64, f64>> = vec![
            [(0u64, 0.25), (1, 0.5), (2, 0.25)].into_iter().collect(),
            [(0u64, 0.6), (3, 0.4)].into_iter().collect(),
            [(1u64, 0.7), (2, 0.2), (5, 0.1)].into_iter().collect(),
        ];
        for pmf in &pmfs {
            let rate: f64 = pmf.iter().map(|(&v, &p)| v as f64 * p).sum();
            for power in 1..=4u32 {
                for capacity in power..=power + 8 {
                    let chain = build_transition(pmf, power, capacity).unwrap();
                    let rho = tx_prob_markov(&chain).unwrap();
                    let cap = (rate / power as f64).min(1.0);
                    assert!(
                        rho <= cap + 1e-10,
                        "pmf {pmf:?} P={power} B={capacity}: {rho} > {cap}"
                    );
                }
            }
        }
    }

    #[test]
    fn rho_grows_toward_infinite_capacity_limit() {
        let pmf: BTreeMap<u64, f64> = [(0u64, 0.3), (1, 0.4), (2, 0.3)].into_iter().collect();
        let rate: f64 = 1.0;
        let power = 2u32;
        let mut prev = 0.0;
        let mut last = 0.0;
        for capacity in [2u32, 4, 8, 16, 32, 64] {
            let chain = build_transition(&pmf, power, capacity).unwrap();
            let rho = tx_prob_markov(&chain).unwrap();
            assert!(rho >= prev - 1e-12, "B={capacity}: {rho} < {prev}");
            prev = rho;
            last = rho;
        }
        assert!((last - (rate / power as f64).min(1.0)).abs() < 1e-3);
    }

    #[test]
    fn multiple_closed_classes_detected() {
        // Hand-built three-state chain: 0 branches into two absorbing
        // states. Not constructible from the battery recursion, but the
        // solver must refuse it rather than pick a class silently.
        let chain = MarkovBattery {
            power: 1,
            capacity: 2,
            pmf: vec![1.0],
            transition: vec![0.5, 0.25, 0.25, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            stationary: None,
        };
        assert!(matches!(
            stationary(&chain),
            Err(MarkovError::MultipleClosedClasses { count: 2 })
        ));
    }

    #[test]
    fn bounded_arrival_cases() {
        assert_eq!(
            bounded_arrival_rho(1.0, 0.5, 3.0, 7.0).unwrap(),
            Some(0.5 / 3.0)
        );
        assert_eq!(bounded_arrival_rho(5.0, 0.5, 3.0, 7.0).unwrap(), None);
        assert_eq!(bounded_arrival_rho(1.0, 0.5, 3.0, 6.0).unwrap(), None);
        assert!(matches!(
            bounded_arrival_rho(1.0, 4.0, 3.0, 7.0),
            Err(MarkovError::RateAbovePower { .. })
        ));
        assert!(matches!(
            bounded_arrival_rho(-1.0, 0.5, 3.0, 7.0),
            Err(MarkovError::NegativeMaxArrival(_))
        ));
    }

    #[test]
    fn build_rejects_bad_inputs() {
        assert!(matches!(
            build_transition::<f64>(&BTreeMap::new(), 1, 2),
            Err(MarkovError::EmptyPmf)
        ));
        assert!(matches!(
            build_transition(&binary_pmf(0.5), 3, 2),
            Err(MarkovError::PowerOutOfRange { .. })
        ));
        let bad: BTreeMap<u64, f64> = [(0u64, 0.5), (1, 0.6)].into_iter().collect();
        assert!(matches!(
            build_transition(&bad, 1, 2),
            Err(MarkovError::PmfNotNormalized { .. })
        ));
    }

    #[test]
    fn truncated_tail_lands_in_saturation_column() {
        // Geometric-ish pmf truncated at mass 1 - 1e-13.
        let mut pmf: BTreeMap<u64, f64> = BTreeMap::new();
        let mut mass = 0.0_f64;
        let mut k = 0u64;
        while mass < 1.0 - 1e-13 {
            let p = (1.0 - 1e-13 - mass).min(0.5f64.powi(k as i32 + 1));
            pmf.insert(k, p);
            mass += p;
            k += 1;
        }
        let chain = build_transition(&pmf, 1, 3).unwrap();
        for m in 0..chain.n_states() {
            let sum: f64 = chain.row(m).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
