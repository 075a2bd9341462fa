use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rdsjump(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdsjump"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RDSJUMP_JOBS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = rdsjump(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn simulate_writes_steps_plus_one_rows_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["simulate", "--net", "birth_death", "--rates", "10,1", "--seed", "7", "--steps", "100", "--out", "t.csv"],
        dir.path(),
    );
    let (header, rows) = read_csv(&dir.path().join("t.csv"));
    assert_eq!(header, ["n", "T_n", "X_n"]);
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[0], ["0", "0", "0"]);
    // unit steps with increasing times
    for w in rows.windows(2) {
        let (x0, x1): (i64, i64) = (w[0][2].parse().unwrap(), w[1][2].parse().unwrap());
        assert_eq!((x1 - x0).abs(), 1);
        assert!(w[1][1].parse::<f64>().unwrap() > w[0][1].parse::<f64>().unwrap());
    }

    let m = manifest(dir.path());
    assert_eq!(m["subcommand"], "simulate");
    assert_eq!(m["seeds"]["first"], 7);
    assert_eq!(m["outputs"][0]["path"], "t.csv");
    assert_eq!(m["outputs"][0]["rows"], 101);
    assert_eq!(m["network"]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn rerunning_a_manifest_reproduces_the_output_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["twopoint", "--net", "schloegl", "--seed", "3", "--x0", "5", "--y0", "25", "--n-max", "500", "--out", "p.csv"];
    ok(&args, a.path());
    let m = manifest(a.path());
    let replay: Vec<String> = m["command_line"].as_array().unwrap()[1..]
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let replay: Vec<&str> = replay.iter().map(String::as_str).collect();
    ok(&replay, b.path());
    assert_eq!(fs::read(a.path().join("p.csv")).unwrap(), fs::read(b.path().join("p.csv")).unwrap());
    assert_eq!(manifest(b.path())["outputs"], m["outputs"]);
}

#[test]
fn twopoint_columns_and_distance() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["twopoint", "--seed", "1", "--x0", "0", "--y0", "2", "--n-max", "50", "--out", "p.csv"], dir.path());
    let (header, rows) = read_csv(&dir.path().join("p.csv"));
    assert_eq!(header, ["n", "x_n", "y_n", "d_n", "T_n_x", "T_n_y"]);
    assert_eq!(rows.len(), 51);
    for r in &rows {
        let (x, y, d): (i64, i64, i64) = (r[1].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap());
        assert_eq!(d, x - y);
    }
}

#[test]
fn stationary_weights_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    for (which, width) in [("one", 2), ("two-diag", 3), ("two-off", 3)] {
        let out = ok(
            &["stationary", "--net", "birth_death", "--rates", "10,1", "--nmax", "200", "--which", which],
            dir.path(),
        );
        let mut r = csv::Reader::from_reader(out.stdout.as_slice());
        assert_eq!(r.headers().unwrap().len(), width);
        let total: f64 = r
            .records()
            .map(|rec| rec.unwrap()[width - 1].parse::<f64>().unwrap())
            .sum();
        assert!((total - 1.0).abs() <= 1e-12, "{which}: {total}");
    }
    // stdout-only runs leave no manifest behind
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn sync_sweep_is_independent_of_job_count() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("pairs.csv"), "x0,y0\n0,2\n0,1\n").unwrap();
    let base = ["sync-sweep", "--seeds", "40", "--pairs", "pairs.csv", "--n-max", "20000"];
    ok(&[&base[..], &["--jobs", "1", "--out", "a.csv"]].concat(), dir.path());
    ok(&[&base[..], &["--jobs", "3", "--out", "b.csv"]].concat(), dir.path());
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());

    let (header, rows) = read_csv(&dir.path().join("a.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][col("sync_frequency")], "1");
    assert_eq!(rows[1][col("synchronized")], "0");
    assert_eq!(rows[1][col("invariant_violations")], "0");
}

#[test]
fn attractor_and_sample_measure() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["attractor", "--seeds", "20", "--n-max", "2000", "--orbit-shifts", "5", "--out", "f.csv"], dir.path());
    let (header, rows) = read_csv(&dir.path().join("f.csv"));
    assert_eq!(header, ["seed", "a0", "a1", "depth", "converged"]);
    assert_eq!(rows.len(), 20);
    for r in &rows {
        assert_eq!(r[4], "true");
        let (a0, a1): (i64, i64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert_eq!((a0 - a1).abs(), 1);
    }
    let m = manifest(dir.path());
    assert_eq!(m["summary"]["orbit_failed_seeds"], serde_json::json!([]));

    ok(&["sample-measure", "--seeds", "200", "--n-max", "2000", "--out", "mu.csv"], dir.path());
    let (header, rows) = read_csv(&dir.path().join("mu.csv"));
    assert_eq!(header, ["x", "weight", "rho"]);
    let total: f64 = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let tv = manifest(dir.path())["summary"]["tv_to_rho"].as_f64().unwrap();
    assert!(tv < 0.15, "{tv}");
}

#[test]
fn oracle_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["oracle", "lemma", "--alpha", "0.1", "--d", "1", "--p0", "1", "--xmax", "30"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,p_x,log_abs");
    assert_eq!(lines.len(), 32);
    assert!(lines[2].starts_with("1,1.1,"));

    let out = ok(&["oracle", "equilibria", "--model", "schloegl"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    let stab: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(stab, ["stable", "unstable", "stable"]);

    let out = ok(
        &["oracle", "rre", "--model", "birth-death", "--c0", "0", "--t-end", "20", "--dt", "0.01"],
        dir.path(),
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let last: f64 = text.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((last - 10.0).abs() < 1e-6);
}

#[test]
fn custom_network_file() {
    let dir = tempfile::tempdir().unwrap();
    let def = r#"{"species":["A","B"],"reactions":[
        {"reactants":{"A":1},"products":{"B":1},"rate":1.0},
        {"reactants":{"B":1},"products":{"A":1},"rate":2.0}]}"#;
    fs::write(dir.path().join("iso.json"), def).unwrap();
    ok(&["simulate", "--net", "iso.json", "--x0", "5,5", "--steps", "30", "--out", "iso.csv"], dir.path());
    let (header, rows) = read_csv(&dir.path().join("iso.csv"));
    assert_eq!(header, ["n", "T_n", "A", "B"]);
    for r in rows {
        assert_eq!(r[2].parse::<u64>().unwrap() + r[3].parse::<u64>().unwrap(), 10);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rdsjump(&["no-such-command"], dir.path()).status.code(), Some(2));
    assert_eq!(rdsjump(&["simulate", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(rdsjump(&["stationary", "--which", "three"], dir.path()).status.code(), Some(2));

    let missing = rdsjump(&["simulate", "--net", "missing.json", "--steps", "3"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing.json"));
    // negative rates are rejected by the network constructor
    assert_eq!(rdsjump(&["simulate", "--rates", "10,-1", "--steps", "3"], dir.path()).status.code(), Some(1));
    assert_eq!(rdsjump(&["stationary", "--nmax", "1"], dir.path()).status.code(), Some(1));
}

#[test]
fn reports_emit_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str]); 4] = [
        ("fig1", &["fig1_rre_birth_death.csv", "fig1_rre_schloegl.csv", "fig1_equilibria.csv"]),
        ("fig5", &["fig5.csv"]),
        ("fig6", &["fig6_rho.csv", "fig6_pi_diagonal.csv", "fig6_pi_off_diagonal.csv"]),
        ("fig8", &["fig8_rho.csv", "fig8_pi_diagonal.csv", "fig8_pi_S.csv"]),
    ];
    for (exp, files) in cases {
        let out = dir.path().join(exp);
        ok(&["report", "--experiment", exp, "--seed", "2", "--out-dir", out.to_str().unwrap()], dir.path());
        let m = manifest(&out);
        let listed: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap()).collect();
        for f in files {
            assert!(out.join(f).is_file(), "{exp}: {f}");
            assert!(listed.contains(f), "{exp}: {f} not in manifest");
        }
    }

    let (header, rows) = read_csv(&dir.path().join("fig5/fig5.csv"));
    assert_eq!(header, ["seed", "x0", "y0", "tau_d", "n0", "T_syn", "T_syn_prime", "R", "meeting_state"]);
    let r = &rows[0];
    let (t, tp, delay): (f64, f64, f64) = (r[5].parse().unwrap(), r[6].parse().unwrap(), r[7].parse().unwrap());
    assert_eq!((t - tp).abs(), delay);

    let (header, rows) = read_csv(&dir.path().join("fig8/fig8_pi_S.csv"));
    assert_eq!(header, ["x", "y", "weight", "log10_weight"]);
    // the odd-distance class never touches the diagonal
    assert!(rows.iter().all(|r| r[0] != r[1]));

    let (_, rows) = read_csv(&dir.path().join("fig1/fig1_equilibria.csv"));
    assert_eq!(rows[0][..2], ["birth_death", "10"]);
}
