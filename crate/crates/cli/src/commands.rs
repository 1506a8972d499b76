//! The four experiment commands behind the `ehm` binary.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use ehm_core::arrivals::ArrivalModel;
use ehm_core::battery::{
    simulate_replicated, tail_bound, tx_prob_bounds_finite, tx_prob_infinite, BatteryConfig,
    Capacity,
};
use ehm_core::geometry::{
    estimate_nominal_density_with, interference_temperature, NominalDensityTable,
};
use ehm_core::scalar::derive_seed;
use ehm_core::throughput::{optimize, Regime};

use crate::config::{
    CalibrateMuSection, SweepEnergySection, SweepMode, TailBoundSection, TxprobMode,
    TxprobSection,
};
use crate::csvout::{CsvOutput, VERSION};
use crate::CliError;

fn invalid<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Invalid(format!("{context}: {e}"))
}

fn config_json<T: serde::Serialize>(section: &T) -> String {
    serde_json::to_string(section).expect("section serializes")
}

fn out_path(flag: Option<PathBuf>, section_default: &Path) -> PathBuf {
    flag.unwrap_or_else(|| section_default.to_path_buf())
}

pub fn calibrate_mu(
    section: &CalibrateMuSection,
    experiment: Option<&str>,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    section.validate()?;
    let table = estimate_nominal_density_with(
        section.alpha,
        &section.eps_targets,
        section.trials,
        seed,
        section.mean_count,
        section.mu_grid.as_deref(),
    )
    .map_err(invalid("calibration"))?;

    for t in &table.unresolved {
        eprintln!("warning: outage target {t} lies outside the calibrated range; row skipped");
    }
    if table.rows.is_empty() {
        return Err(CliError::Missing(
            "calibration resolved none of the requested targets; widen eps_targets or mu_grid"
                .into(),
        ));
    }

    let path = out_path(out, &section.output);
    let file = File::create(&path)
        .map_err(|e| CliError::Invalid(format!("cannot write {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    use std::io::Write;
    writeln!(w, "# ehm calibrate-mu v{VERSION}").map_err(invalid("write"))?;
    if let Some(id) = experiment {
        writeln!(w, "# experiment: {id}").map_err(invalid("write"))?;
    }
    writeln!(w, "# config: {}", config_json(section)).map_err(invalid("write"))?;
    table.write_csv(&mut w).map_err(invalid("write"))?;
    w.flush().map_err(invalid("write"))?;
    Ok(())
}

fn regime_label(regime: Regime) -> &'static str {
    match regime {
        Regime::SparseAllOn => "sparse-all-on",
        Regime::DenseRationed => "dense-rationed",
    }
}

fn resolve_mu(section: &SweepEnergySection) -> Result<f64, CliError> {
    if let Some(path) = &section.mu_table {
        let file = File::open(path).map_err(|e| {
            CliError::Missing(format!(
                "cannot open calibration table {}: {e}; run `ehm calibrate-mu` first",
                path.display()
            ))
        })?;
        let table = NominalDensityTable::<f64>::read_csv(BufReader::new(file))
            .map_err(invalid("calibration table"))?;
        return table.mu_for(section.epsilon).ok_or_else(|| {
            CliError::Missing(format!(
                "epsilon {} is outside the calibrated table range; recalibrate with wider targets",
                section.epsilon
            ))
        });
    }
    section.mu_epsilon.ok_or_else(|| {
        CliError::Missing(
            "mu_epsilon is null and no mu_table given; run `ehm calibrate-mu` first".into(),
        )
    })
}

/// Log-spaced power grid from just above theta up to `hi`.
fn power_search_grid(theta: f64, hi: f64, per_decade: u32) -> Vec<f64> {
    let lo = theta * 1.02;
    let hi = hi.max(lo * 1.1);
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(2);
    (0..=n)
        .map(|i| lo * 10f64.powf(decades * i as f64 / n as f64))
        .collect()
}

pub fn sweep_energy(
    section: &SweepEnergySection,
    experiment: Option<&str>,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    section.validate()?;
    let mu = resolve_mu(section)?;
    let mut csv = CsvOutput::new(
        "sweep-energy",
        experiment,
        seed,
        &config_json(section),
        "lambda_e,lambda_0,regime,P_star,R_star",
    );
    csv.push_comment(&format!("resolved mu_epsilon: {mu}"));

    match section.mode {
        SweepMode::Analytic => {
            for &lambda_e in &section.lambda_e_grid {
                for &lambda_0 in &section.lambda_0_list {
                    let sol = optimize(lambda_0, lambda_e, mu, section.theta, section.alpha)
                        .map_err(invalid("optimize"))?;
                    csv.push_row(format!(
                        "{lambda_e},{lambda_0},{},{},{}",
                        regime_label(sol.regime),
                        sol.power.suggested(),
                        sol.throughput
                    ));
                }
            }
        }
        SweepMode::FiniteSim => {
            let log2_rate = (1.0 + section.theta).log2();
            for (le_idx, &lambda_e) in section.lambda_e_grid.iter().enumerate() {
                let model = ArrivalModel::ScaledChiSquared {
                    dof: section.dof,
                    rate: lambda_e,
                };
                // Cover every density's analytic optimum with margin; the
                // finite-battery optimum sits below it.
                let mut hi = 10.0 * section.theta;
                for &lambda_0 in &section.lambda_0_list {
                    let sol = optimize(lambda_0, lambda_e, mu, section.theta, section.alpha)
                        .map_err(invalid("optimize"))?;
                    hi = hi.max(2.0 * sol.power.suggested());
                }
                let grid = power_search_grid(section.theta, hi, section.power_grid_per_decade);

                // One simulation per power, shared across the densities.
                let rho_hat: Vec<f64> = grid
                    .iter()
                    .enumerate()
                    .map(|(p_idx, &power)| {
                        let cfg = BatteryConfig::new(
                            power,
                            Capacity::Finite(section.b_over_p * power),
                            section.horizon,
                            derive_seed(seed, (le_idx as u64) << 32 | p_idx as u64),
                        );
                        simulate_replicated(&model, &cfg, &[], section.replications)
                            .map(|stats| stats.rho_hat)
                            .map_err(invalid("simulate"))
                    })
                    .collect::<Result<_, _>>()?;

                for &lambda_0 in &section.lambda_0_list {
                    let mut best: Option<(f64, f64)> = None;
                    for (&power, &rho) in grid.iter().zip(&rho_hat) {
                        let zeta =
                            interference_temperature(mu, section.theta, section.alpha, power)
                                .map_err(invalid("zeta"))?;
                        if lambda_0 * rho > zeta {
                            continue;
                        }
                        let r = lambda_0 * rho * log2_rate;
                        if best.is_none_or(|(_, rb)| r > rb) {
                            best = Some((power, r));
                        }
                    }
                    match best {
                        Some((p_star, r_star)) => csv.push_row(format!(
                            "{lambda_e},{lambda_0},finite-sim,{p_star},{r_star}"
                        )),
                        None => {
                            eprintln!(
                                "warning: no admissible power for lambda_e={lambda_e}, lambda_0={lambda_0}"
                            );
                            csv.push_row(format!("{lambda_e},{lambda_0},finite-sim,nan,0"));
                        }
                    }
                }
            }
        }
    }

    csv.write_to(&out_path(out, &section.output))
}

pub fn txprob(
    section: &TxprobSection,
    experiment: Option<&str>,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    section.validate()?;
    let mut csv = CsvOutput::new(
        "txprob",
        experiment,
        seed,
        &config_json(section),
        "power,b_over_p,dof,rho_sim,rho_std_err,rho_infinite,bound_lower,bound_upper",
    );

    let curves: Vec<(f64, u32)> = match section.mode {
        TxprobMode::Capacity => section
            .b_over_p_list
            .iter()
            .map(|&m| (m, section.dof))
            .collect(),
        TxprobMode::Dof => section
            .dof_list
            .iter()
            .map(|&d| (section.b_over_p, d))
            .collect(),
    };

    let mut counter = 0u64;
    for (mult, dof) in curves {
        for &power in &section.power_grid {
            let model = ArrivalModel::ScaledChiSquared {
                dof,
                rate: section.lambda_e,
            };
            let capacity = Capacity::Finite(mult * power);
            let cfg = BatteryConfig::new(
                power,
                capacity,
                section.horizon,
                derive_seed(seed, counter),
            );
            counter += 1;
            let stats = simulate_replicated(&model, &cfg, &[], section.replications)
                .map_err(invalid("simulate"))?;
            let (lower, upper) =
                tx_prob_bounds_finite(&model, power, capacity).map_err(invalid("bounds"))?;
            csv.push_row(format!(
                "{power},{mult},{dof},{},{},{},{lower},{upper}",
                stats.rho_hat,
                stats.rho_std_err,
                tx_prob_infinite(section.lambda_e, power),
            ));
        }
    }

    csv.write_to(&out_path(out, &section.output))
}

pub fn tail_bound_cmd(
    section: &TailBoundSection,
    experiment: Option<&str>,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    section.validate()?;
    let model = section.model();
    let cfg = BatteryConfig::new(section.power, Capacity::Infinite, section.horizon, seed);
    let stats = simulate_replicated(&model, &cfg, &section.x_grid, section.replications)
        .map_err(invalid("simulate"))?;

    let mut csv = CsvOutput::new(
        "tail-bound",
        experiment,
        seed,
        &config_json(section),
        "x,tail_sim,tail_bound",
    );
    for &(x, empirical) in &stats.tail_hat {
        let bound = tail_bound(&model, section.power, x).map_err(invalid("bound"))?;
        if empirical > bound {
            eprintln!("warning: empirical tail {empirical} exceeds the bound {bound} at x={x}");
        }
        csv.push_row(format!("{x},{empirical},{bound}"));
    }
    csv.write_to(&out_path(out, &section.output))
}
