use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_memheat");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn memheat(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = memheat(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a CSV with provenance header: (header, rows).
fn read_csv(p: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(p).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().to_owned();
    let rows = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    (header, rows)
}

fn column(rows: &[Vec<String>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn snapshot_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with("snapshot_"))
        .collect();
    files.sort();
    files
}

#[test]
fn model1_profiles_flatten() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("model1.toml");
    ok(&["solve", "--config", path(&cfg), "--out", path(tmp.path())]);
    let files = snapshot_files(tmp.path());
    let names: Vec<String> = files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        names,
        [
            "snapshot_0000.csv",
            "snapshot_0200.csv",
            "snapshot_0400.csv",
            "snapshot_1000.csv",
            "snapshot_2000.csv"
        ]
    );
    let mut previous = f64::INFINITY;
    for f in &files {
        let (header, rows) = read_csv(f);
        assert_eq!(header, "x,u");
        assert_eq!(rows.len(), 501);
        let u = column(&rows, 1);
        let max = u.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        assert!(max < previous);
        assert!(u.iter().all(|&x| x >= 0.0));
        previous = max;
    }
    let (header, rows) = read_csv(&tmp.path().join("energy.csv"));
    assert_eq!(header, "n,t,energy,bound,margin");
    assert_eq!(rows.len(), 2001);
    assert!(column(&rows, 4).iter().all(|&m| m >= 0.0));
}

#[test]
fn strong_flux_memory_goes_negative() {
    let tmp = TempDir::new().unwrap();
    ok(&[
        "solve",
        "--config",
        path(&configs().join("model2_alpha10.toml")),
        "--out",
        path(tmp.path()),
    ]);
    let (_, rows) = read_csv(&tmp.path().join("snapshot_2000.csv"));
    assert!(column(&rows, 1).iter().any(|&u| u < 0.0));
}

#[test]
fn numbers_carry_17_significant_digits() {
    let tmp = TempDir::new().unwrap();
    ok(&[
        "solve",
        "--config",
        path(&configs().join("model4_coarse.toml")),
        "--out",
        path(tmp.path()),
    ]);
    let (_, rows) = read_csv(&tmp.path().join("snapshot_100.csv"));
    for field in rows.iter().flatten() {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
    }
}

#[test]
fn output_is_deterministic_and_provenance_reruns() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("model4.toml");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["solve", "--config", path(&cfg), "--out", path(&a)]);
    ok(&["solve", "--config", path(&cfg), "--out", path(&b)]);
    for f in fs::read_dir(&a).unwrap() {
        let f = f.unwrap().path();
        assert_eq!(fs::read(&f).unwrap(), fs::read(b.join(f.file_name().unwrap())).unwrap());
    }

    // The echoed config alone reproduces the run.
    let text = fs::read_to_string(a.join("energy.csv")).unwrap();
    let echoed: String = text
        .lines()
        .skip_while(|l| *l != "# --- resolved config ---")
        .skip(1)
        .take_while(|l| *l != "# --- end config ---")
        .map(|l| format!("{}\n", l.strip_prefix("# ").unwrap_or("")))
        .collect();
    let rerun_cfg = write_config(tmp.path(), "echoed.toml", &echoed);
    let c = tmp.path().join("c");
    ok(&["solve", "--config", path(&rerun_cfg), "--out", path(&c)]);
    for name in ["energy.csv", "snapshot_2000.csv"] {
        assert_eq!(read_csv(&a.join(name)), read_csv(&c.join(name)));
    }
}

#[test]
fn compare_volterra_converges() {
    let tmp = TempDir::new().unwrap();
    ok(&[
        "compare",
        "--config",
        path(&configs().join("model4_coarse.toml")),
        "--oracle",
        "volterra",
        "--out",
        path(tmp.path()),
    ]);
    let (header, rows) = read_csv(&tmp.path().join("convergence.csv"));
    assert_eq!(
        header,
        "level,tau,snapshot_max_abs,snapshot_weighted_l2,all_levels_max_abs,order"
    );
    for col in [2, 4] {
        let gaps = column(&rows, col);
        assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{gaps:?}");
    }
    let orders = column(&rows[1..], 5);
    assert!(orders.iter().all(|p| (0.7..=1.3).contains(p)));
    let (header, rows) = read_csv(&tmp.path().join("compare.csv"));
    assert_eq!(header, "level,tau,t,max_abs,weighted_l2");
    assert_eq!(rows.len(), 3 * 5);
}

#[test]
fn compare_model1_against_modal_at_reference_resolution() {
    let tmp = TempDir::new().unwrap();
    ok(&[
        "compare",
        "--config",
        path(&configs().join("model1.toml")),
        "--oracle",
        "modal",
        "--out",
        path(tmp.path()),
    ]);
    let (_, rows) = read_csv(&tmp.path().join("convergence.csv"));
    assert!(column(&rows, 2)[0] < 1e-3);
}

#[test]
fn compare_zero_problem_is_exact() {
    let tmp = TempDir::new().unwrap();
    let body = fs::read_to_string(configs().join("model4_coarse.toml")).unwrap();
    let cfg = write_config(tmp.path(), "zero.toml", &format!("initial = \"zero\"\n{body}"));
    for oracle in ["volterra", "modal", "dense-block"] {
        let out = tmp.path().join(oracle);
        ok(&[
            "compare",
            "--config",
            path(&cfg),
            "--oracle",
            oracle,
            "--out",
            path(&out),
        ]);
        let (_, rows) = read_csv(&out.join("convergence.csv"));
        assert!(column(&rows, 2).iter().chain(&column(&rows, 4)).all(|&d| d == 0.0));
    }
}

#[test]
fn compare_preconditions_fail_before_work() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("dense");
    let res = memheat(&[
        "compare",
        "--config",
        path(&configs().join("model1.toml")),
        "--oracle",
        "dense-block",
        "--out",
        path(&out),
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("64"));
    assert!(!out.exists());

    let body = fs::read_to_string(configs().join("model4_coarse.toml")).unwrap();
    let two_terms = body.replace(
        "[{ weight = 5.0, rate = 1.0 }]\ncapacity",
        "[{ weight = 5.0, rate = 1.0 }, { weight = 1.0, rate = 3.0 }]\ncapacity",
    );
    let cfg = write_config(tmp.path(), "two.toml", &two_terms);
    let out = tmp.path().join("modal");
    let res = memheat(&[
        "compare",
        "--config",
        path(&cfg),
        "--oracle",
        "modal",
        "--out",
        path(&out),
    ]);
    assert!(!res.status.success());
    assert!(!out.exists());
}

#[test]
fn sweep_alpha_family() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("model2_alpha10.toml");
    ok(&[
        "sweep",
        "--config",
        path(&cfg),
        "--param",
        "flux_kernel.0.weight",
        "--values",
        "1,5,10",
        "--out",
        path(tmp.path()),
    ]);
    let (header, rows) = read_csv(&tmp.path().join("summary.csv"));
    assert_eq!(header, "value,min_u,max_u,final_energy");
    assert_eq!(column(&rows, 0), [1.0, 5.0, 10.0]);
    let min_u = column(&rows, 1);
    assert!(min_u[2] < 0.0 && min_u[0] > 0.0);
    for dir in ["000_1", "001_5", "002_10"] {
        assert_eq!(snapshot_files(&tmp.path().join(dir)).len(), 5);
    }
    // Each subdirectory matches a standalone solve of the edited config.
    let body = fs::read_to_string(&cfg)
        .unwrap()
        .replace("weight = 10.0", "weight = 5.0");
    let single = write_config(tmp.path(), "alpha5.toml", &body);
    let solo = tmp.path().join("solo");
    ok(&["solve", "--config", path(&single), "--out", path(&solo)]);
    assert_eq!(
        read_csv(&solo.join("snapshot_2000.csv")),
        read_csv(&tmp.path().join("001_5/snapshot_2000.csv"))
    );
}

#[test]
fn sweep_nu_family_and_edge_cases() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("model3.toml");
    let out = tmp.path().join("nu");
    ok(&[
        "sweep",
        "--config",
        path(&cfg),
        "--param",
        "capacity_kernel.0.rate",
        "--values",
        "1,5,10",
        "--out",
        path(&out),
    ]);
    let (_, rows) = read_csv(&out.join("summary.csv"));
    assert_eq!(rows.len(), 3);

    let empty = tmp.path().join("empty");
    ok(&[
        "sweep",
        "--config",
        path(&cfg),
        "--param",
        "capacity_kernel.0.rate",
        "--values",
        "",
        "--out",
        path(&empty),
    ]);
    let (header, rows) = read_csv(&empty.join("summary.csv"));
    assert_eq!(header, "value,min_u,max_u,final_energy");
    assert!(rows.is_empty());

    let bad = tmp.path().join("bad");
    let res = memheat(&[
        "sweep",
        "--config",
        path(&cfg),
        "--param",
        "flux_kernel.0.rate",
        "--values",
        "1",
        "--out",
        path(&bad),
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("invalid parameter path"));
    assert!(!bad.exists());

    let res = memheat(&[
        "sweep",
        "--config",
        path(&cfg),
        "--param",
        "capacity_kernel.0.rate",
        "--values",
        "1,-2",
        "--out",
        path(&bad),
    ]);
    assert!(!res.status.success());
    assert!(!bad.exists());
}

#[test]
fn audit_flags_explicit_instability() {
    let tmp = TempDir::new().unwrap();
    // tau * lambda_max ~ 3.6 on n = 20
    let cfg = write_config(
        tmp.path(),
        "explicit.toml",
        "snapshots = [0.0]\n[grid]\nn = 20\n[time]\ntau = 2e-3\nT = 0.1\n[scheme]\nsigma = 0.0\n",
    );
    let res = memheat(&["audit", "--config", path(&cfg), "--out", path(&tmp.path().join("a"))]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stdout).contains("VIOLATION"));

    let stable = write_config(
        tmp.path(),
        "implicit.toml",
        &fs::read_to_string(&cfg).unwrap().replace("sigma = 0.0", "sigma = 0.5"),
    );
    let res = ok(&["audit", "--config", path(&stable), "--out", path(&tmp.path().join("b"))]);
    assert!(String::from_utf8_lossy(&res.stdout).contains("bound holds"));
}

#[test]
fn config_errors_point_at_the_problem() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.toml",
        "flux_kernel = [{ weight = 5.0, rate = 1.0 }]\ncapacity_kernel = [{ weight = 5.0, rate = -1.0 }]\n[grid]\nn = 9\n[time]\ntau = 0.01\nT = 0.1\n",
    );
    let res = memheat(&["solve", "--config", path(&cfg), "--out", path(&tmp.path().join("o"))]);
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 2") && err.contains("rate"), "{err}");

    let cfg = write_config(tmp.path(), "noout.toml", "[grid]\nn = 9\n[time]\ntau = 0.01\nT = 0.1\n");
    let res = memheat(&["solve", "--config", path(&cfg)]);
    assert!(String::from_utf8_lossy(&res.stderr).contains("--out"));
}

#[test]
fn initial_profile_from_file() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("u0.txt"),
        "# nine nodes\n0.1 0.2 0.3\n0.4,0.5,0.4\n0.3 0.2 0.1\n",
    )
    .unwrap();
    let cfg = write_config(
        tmp.path(),
        "file.toml",
        "initial = { file = \"u0.txt\" }\nsnapshots = [0.0]\noutput = \"out\"\n[grid]\nn = 9\n[time]\ntau = 0.01\nT = 0.1\n",
    );
    ok(&["solve", "--config", path(&cfg)]);
    let (_, rows) = read_csv(&tmp.path().join("out/snapshot_00.csv"));
    assert_eq!(column(&rows, 1)[5], 0.5);
}
