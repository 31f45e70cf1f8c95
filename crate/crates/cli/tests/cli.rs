use std::fs;
use std::path::Path;
use std::process::Command as Proc;

use volterra_cli::config::{merge, parse_toml};
use volterra_cli::{parse_config, run, Command, RunSummary, Settings, Status};

fn summary(dir: &Path) -> RunSummary {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn flags(out: &Path) -> Settings {
    Settings {
        out_dir: Some(out.to_path_buf()),
        ..Settings::default()
    }
}

#[test]
fn minimal_simulate_config_resolves() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    fs::write(
        &file,
        "command = \"simulate\"\nf = \"odd-sine-clipped\"\neps = 0.1\nhorizon = 5.0\n",
    )
    .unwrap();
    let cfg = parse_config(None, Some(&file), Settings::default()).unwrap();
    assert_eq!(cfg.command, Command::Simulate);
    assert_eq!(cfg.tol(), 1e-8);
    assert_eq!(cfg.max_iter(), 500);
    assert_eq!(cfg.seed(), 0);
}

#[test]
fn unknown_keys_and_missing_fields_are_usage_errors() {
    assert!(parse_toml("eps = 0.1\nbogus = 1\n")
        .unwrap_err()
        .0
        .contains("bogus"));
    let err = parse_config(
        Some(Command::Simulate),
        None,
        Settings {
            f: Some("atan-shifted".into()),
            eps: Some(0.1),
            ..Settings::default()
        },
    )
    .unwrap_err();
    assert!(err.0.contains("horizon"), "{err}");
    let err = parse_config(Some(Command::Eps0), None, Settings::default()).unwrap_err();
    assert!(err.0.contains("fprime0"));
    assert!(parse_config(None, None, Settings::default())
        .unwrap_err()
        .0
        .contains("command"));
}

#[test]
fn flags_override_file() {
    let file = parse_toml("eps = 0.3\nf = \"atan-shifted\"\ntol = 1e-6\n").unwrap();
    let merged = merge(
        file,
        Settings {
            eps: Some(0.1),
            ..Settings::default()
        },
    );
    assert_eq!(merged.eps, Some(0.1));
    assert_eq!(merged.tol, Some(1e-6));
    assert_eq!(merged.f.as_deref(), Some("atan-shifted"));
}

#[test]
fn commensurate_eps_is_recorded_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let s = Settings {
        f: Some("atan-shifted".into()),
        eps: Some(0.30),
        m: Some(3),
        horizon: Some(4.0),
        ..flags(dir.path())
    };
    let cfg = parse_config(Some(Command::Simulate), None, s).unwrap();
    assert_eq!(run(&cfg), 0);
    let g = summary(dir.path()).grid.unwrap();
    assert_eq!(g.eps, 0.3);
    assert_eq!(g.steps_per_unit, 20);
}

#[test]
fn periodic_atan_writes_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let s = Settings {
        f: Some("atan-shifted".into()),
        eps: Some(0.3),
        ..flags(dir.path())
    };
    let cfg = parse_config(Some(Command::Periodic), None, s).unwrap();
    assert_eq!(run(&cfg), 0);
    let sm = summary(dir.path());
    assert_eq!(sm.status, Status::Ok);
    let period = sm.results["orbit"]["period"].as_f64().unwrap();
    assert!((period - 2.0).abs() < 0.3);
    let csv = fs::read_to_string(dir.path().join("orbit.csv")).unwrap();
    assert!(csv.starts_with("t,x\n"));
    assert!(csv.lines().count() > 100);
}

#[test]
fn sweep_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let s = Settings {
        f: Some("odd-sine-clipped".into()),
        eps_list: Some(vec![0.3, 0.01]),
        ..flags(dir.path())
    };
    let cfg = parse_config(Some(Command::Sweep), None, s).unwrap();
    assert_eq!(run(&cfg), 0);
    let sm = summary(dir.path());
    let rows = sm.results["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let sup = |i: usize| rows[i]["sup_error"].as_f64().unwrap();
    assert!(sup(1) < sup(0));
    assert!(rows.iter().all(|r| r["overshoot"].as_f64().unwrap() > 0.0));
    assert!(dir.path().join("orbit_eps_0.01.csv").exists());
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(
        table.lines().next().unwrap(),
        "eps,period,sup_error,l1_error,overshoot,undershoot"
    );
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn eps0_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(
        Some(Command::Eps0),
        None,
        Settings {
            fprime0: Some(-4.0),
            ..flags(dir.path())
        },
    )
    .unwrap();
    assert_eq!(run(&cfg), 0);
    let e0 = summary(dir.path()).results["eps0"].as_f64().unwrap();
    assert!((e0 - 1.2067).abs() < 1e-4);
}

#[test]
fn failures_still_write_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let s = Settings {
        f: Some("linear:-0.5".into()),
        eps: Some(0.3),
        ..flags(dir.path())
    };
    let cfg = parse_config(Some(Command::Periodic), None, s).unwrap();
    assert_eq!(run(&cfg), 1);
    let sm = summary(dir.path());
    assert_eq!(sm.status, Status::Failed);
    assert!(sm.failure.unwrap().contains("equilibrium"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(
        Some(Command::Eps0),
        None,
        Settings {
            fprime0: Some(-1.5),
            ..flags(dir.path())
        },
    )
    .unwrap();
    assert_eq!(run(&cfg), 1);
    assert!(summary(dir.path()).failure.is_some());
}

#[test]
fn summary_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let s = Settings {
        f: Some("asymmetric-sine-clipped".into()),
        eps: Some(0.2),
        ..flags(dir.path())
    };
    let cfg = parse_config(Some(Command::Periodic), None, s).unwrap();
    assert_eq!(run(&cfg), 0);
    let text = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let sm: RunSummary = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&sm).unwrap() + "\n", text);
}

#[test]
fn generated_data_passes_membership() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let s = Settings {
        f: Some("odd-sine-clipped".into()),
        eps: Some(0.1),
        horizon: Some(10.0),
        b0: Some("generator:tau=0.04,factor=1.5".into()),
        seed: Some(11),
        ..flags(&sim)
    };
    assert_eq!(
        run(&parse_config(Some(Command::Simulate), None, s).unwrap()),
        0
    );
    assert_eq!(summary(&sim).results["verdict"]["slowly_oscillating"], true);
    let mem = dir.path().join("mem");
    let s = Settings {
        f: Some("odd-sine-clipped".into()),
        eps: Some(0.1),
        input: Some(sim.join("initial.csv")),
        ..flags(&mem)
    };
    assert_eq!(
        run(&parse_config(Some(Command::Membership), None, s).unwrap()),
        0
    );
    let res = summary(&mem).results;
    assert_eq!(res["member_r"], true);
    assert!((res["tau"].as_f64().unwrap() - 0.04).abs() < 1e-9);
}

#[test]
fn membership_rejects_off_grid_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("b.csv");
    fs::write(&input, "t,x\n-1.0,0.0\n0.0,0.0\n").unwrap();
    let s = Settings {
        eps: Some(0.1),
        alpha: Some(0.1),
        r: Some(4.0),
        input: Some(input),
        ..flags(dir.path())
    };
    assert_eq!(
        run(&parse_config(Some(Command::Membership), None, s).unwrap()),
        2
    );
}

#[test]
fn gurtin_demo_outputs_density() {
    let dir = tempfile::tempdir().unwrap();
    let s = Settings {
        alpha_ricker: Some(3.1f64.exp()),
        mu: Some(0.1),
        eps: Some(0.25),
        times: Some(vec![2.0, 8.0]),
        ..flags(dir.path())
    };
    assert_eq!(
        run(&parse_config(Some(Command::Gurtin), None, s).unwrap()),
        0
    );
    let res = summary(dir.path()).results;
    assert!(res["min_birth"].as_f64().unwrap() > 0.0);
    assert!(res["b_residual"].as_f64().unwrap() <= 1e-8);
    let d = fs::read_to_string(dir.path().join("density_1.csv")).unwrap();
    assert_eq!(d.lines().next(), Some("a,u"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_volterra");
    let dir = tempfile::tempdir().unwrap();
    let out = Proc::new(bin)
        .args(["eps0", "--fprime0", "-4", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("1.2067"));
    let out = Proc::new(bin)
        .args(["periodic", "--eps", "0.3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`f`"));
}
