//! End-to-end checks of the `ehm` binary: exit codes, flag overrides, and
//! the cross-command consistency of emitted CSV columns.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ehm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            l.split(',')
                .map(|f| f.parse::<f64>().unwrap_or(f64::NAN))
                .collect()
        })
        .collect()
}

#[test]
fn malformed_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", "{ not json");
    let out = ehm(dir.path(), &["txprob", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));

    let cfg = write_config(dir.path(), "unknown.json", r#"{"seed":1,"txprob":{"nope":3}}"#);
    let out = ehm(dir.path(), &["txprob", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));

    let cfg = write_config(
        dir.path(),
        "unsorted.json",
        r#"{"seed":1,"txprob":{"power_grid":[4.0,2.0]}}"#,
    );
    let out = ehm(dir.path(), &["txprob", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_seed_exits_one_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "noseed.json",
        r#"{"tail_bound":{"x_grid":[0.0,10.0],"horizon":5000,"output":"t.csv"}}"#,
    );
    let out = ehm(dir.path(), &["tail-bound", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let out = ehm(dir.path(), &["tail-bound", "--config", &cfg, "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{:?}", out);
    let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(text.contains("# seed: 3"));
}

#[test]
fn missing_mu_table_exits_two_with_hint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sweep.json",
        r#"{"seed":1,"sweep_energy":{"lambda_e_grid":[1.0],"mu_table":"absent.csv"}}"#,
    );
    let out = ehm(dir.path(), &["sweep-energy", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("calibrate-mu"), "stderr: {stderr}");

    let cfg = write_config(
        dir.path(),
        "sweep_null.json",
        r#"{"seed":1,"sweep_energy":{"lambda_e_grid":[1.0],"mu_epsilon":null}}"#,
    );
    let out = ehm(dir.path(), &["sweep-energy", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn calibration_feeds_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cal.json",
        r#"{
          "seed": 5,
          "calibrate_mu": {"eps_targets":[0.03,0.08],"trials":10000,
                           "mu_grid":[0.004,0.012,0.035],"output":"mu.csv"},
          "sweep_energy": {"lambda_e_grid":[5.0],"lambda_0_list":[0.02],
                           "mu_table":"mu.csv","epsilon":0.03,"output":"sweep.csv"}
        }"#,
    );
    let out = ehm(dir.path(), &["calibrate-mu", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{:?}", out);
    let out = ehm(dir.path(), &["sweep-energy", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{:?}", out);
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.contains("resolved mu_epsilon"));
    assert_eq!(data_rows(&text).len(), 1);
}

#[test]
fn unresolved_targets_warn_and_keep_partial_table() {
    let dir = tempfile::tempdir().unwrap();
    // 0.008 sits inside the narrow sweep range, 0.2 far outside it.
    let cfg = write_config(
        dir.path(),
        "cal.json",
        r#"{"seed":2,"calibrate_mu":{"eps_targets":[0.008,0.2],"trials":10000,
             "mu_grid":[0.001,0.002,0.004],"output":"mu.csv"}}"#,
    );
    let out = ehm(dir.path(), &["calibrate-mu", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{:?}", out);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("warning"), "stderr: {stderr}");
    let rows = data_rows(&fs::read_to_string(dir.path().join("mu.csv")).unwrap());
    assert_eq!(rows.len(), 1);

    // No resolvable target at all: total failure, exit 2.
    let cfg = write_config(
        dir.path(),
        "cal_fail.json",
        r#"{"seed":2,"calibrate_mu":{"eps_targets":[0.2],"trials":10000,
             "mu_grid":[0.0005,0.001,0.002],"output":"mu2.csv"}}"#,
    );
    let out = ehm(dir.path(), &["calibrate-mu", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn txprob_columns_sandwich_the_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "tx.json",
        r#"{"seed":11,"txprob":{"power_grid":[1.0,2.0,4.0,8.0],
             "b_over_p_list":[1.5,10.0],"horizon":60000,"output":"tx.csv"}}"#,
    );
    let out = ehm(dir.path(), &["txprob", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{:?}", out);
    let rows = data_rows(&fs::read_to_string(dir.path().join("tx.csv")).unwrap());
    assert_eq!(rows.len(), 8);
    for row in &rows {
        let (rho, se, rho_inf, lower, upper) = (row[3], row[4], row[5], row[6], row[7]);
        assert!(lower <= rho + 3.0 * se + 1e-9, "row {row:?}");
        assert!(rho - 3.0 * se <= upper + 1e-9, "row {row:?}");
        assert!(lower <= upper);
        assert!(rho_inf >= upper - 1e-12, "infinite capacity dominates");
    }
    // The two capacity curves at the same power: bigger battery, bigger rho
    // (up to Monte Carlo noise), and at 10x capacity the simulation sits on
    // the unlimited-storage value. At zero drift (P equal to the arrival
    // rate) the gap closes only polynomially in B, so that row gets a wide
    // band instead of a statistical one.
    for k in 0..4 {
        let small = &rows[k];
        let large = &rows[k + 4];
        assert_eq!(small[0], large[0]);
        assert!(large[3] >= small[3] - 3.0 * (small[4] + large[4]));
        let band = if large[0] == 2.0 {
            0.05
        } else {
            (3.0 * large[4]).max(0.01)
        };
        assert!(
            (large[3] - large[5]).abs() <= band,
            "B=10P should track the unlimited-storage value: {large:?}"
        );
    }
}

#[test]
fn txprob_dof_mode_orders_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "dof.json",
        r#"{"seed":13,"txprob":{"mode":"dof","power_grid":[4.0,8.0],
             "dof_list":[2,16],"b_over_p":1.5,"horizon":120000,"output":"dof.csv"}}"#,
    );
    let out = ehm(dir.path(), &["txprob", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{:?}", out);
    let rows = data_rows(&fs::read_to_string(dir.path().join("dof.csv")).unwrap());
    assert_eq!(rows.len(), 4);
    // Less randomness (larger dof) loses less energy to overflow.
    for k in 0..2 {
        let noisy = &rows[k];
        let steady = &rows[k + 2];
        assert_eq!(noisy[0], steady[0]);
        assert!(
            steady[3] > noisy[3] + 3.0 * (noisy[4] + steady[4]),
            "dof curves should separate at P={}: {} vs {}",
            noisy[0],
            noisy[3],
            steady[3]
        );
    }
}

#[test]
fn finite_battery_sweep_stays_below_analytic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sw.json",
        r#"{
          "seed": 17,
          "sweep_energy": {"lambda_e_grid":[2.0,8.0],"lambda_0_list":[0.02],
                           "mode":"analytic","output":"analytic.csv"}
        }"#,
    );
    let out = ehm(dir.path(), &["sweep-energy", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{:?}", out);

    let cfg = write_config(
        dir.path(),
        "sw_fin.json",
        r#"{
          "seed": 17,
          "sweep_energy": {"lambda_e_grid":[2.0,8.0],"lambda_0_list":[0.02],
                           "mode":"finite_sim","b_over_p":1.5,"horizon":60000,
                           "power_grid_per_decade":10,"output":"finite.csv"}
        }"#,
    );
    let out = ehm(dir.path(), &["sweep-energy", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{:?}", out);

    let analytic = data_rows(&fs::read_to_string(dir.path().join("analytic.csv")).unwrap());
    let finite = data_rows(&fs::read_to_string(dir.path().join("finite.csv")).unwrap());
    assert_eq!(analytic.len(), finite.len());
    for (a, f) in analytic.iter().zip(&finite) {
        assert_eq!(a[0], f[0]);
        assert!(
            f[4] < a[4],
            "finite battery should cost throughput at lambda_e={}: {} vs {}",
            a[0],
            f[4],
            a[4]
        );
    }
}

#[test]
fn out_flag_overrides_config_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "t.json",
        r#"{"seed":1,"tail_bound":{"x_grid":[0.0,10.0],"horizon":5000,"output":"ignored.csv"}}"#,
    );
    let out = ehm(
        dir.path(),
        &["tail-bound", "--config", &cfg, "--out", "custom.csv"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("custom.csv").exists());
    assert!(!dir.path().join("ignored.csv").exists());
}

#[test]
fn tail_bound_dominates_simulation_on_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "tail.json",
        r#"{"seed":23,"tail_bound":{"x_grid":[0.0,4.0,8.0,10.0,14.0,20.0,30.0],
             "horizon":200000,"output":"tail.csv"}}"#,
    );
    let out = ehm(dir.path(), &["tail-bound", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{:?}", out);
    let rows = data_rows(&fs::read_to_string(dir.path().join("tail.csv")).unwrap());
    assert_eq!(rows.len(), 7);
    let mut prev = f64::INFINITY;
    for row in &rows {
        let (sim, bound) = (row[1], row[2]);
        assert!(sim <= bound + 1e-12, "dominance broken on {row:?}");
        assert!(sim <= prev + 1e-12, "empirical tail must not increase");
        prev = sim;
    }
    // Reference point: the bound at x = 10 for the default model.
    let at10 = rows.iter().find(|r| r[0] == 10.0).unwrap();
    assert!((at10[2] - 0.9015273040346142).abs() < 1e-12);
}
