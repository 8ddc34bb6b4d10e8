use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tickvol(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tickvol"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) {
    let o = tickvol(args, cwd);
    assert!(
        o.status.success(),
        "{args:?} failed ({:?}): {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn lines(p: PathBuf) -> Vec<String> {
    fs::read_to_string(&p)
        .unwrap_or_else(|e| panic!("{}: {e}", p.display()))
        .lines()
        .map(String::from)
        .collect()
}

/// Three simulated days with tied timestamps, cleaned, with curves.
fn prepared() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("sim.json"),
        r#"{"n-ticks": 3000, "days": 3, "seed": 11, "sim": {"zero_duration_share": 0.3}}"#,
    )
    .unwrap();
    ok(&["simulate", "--config", "sim.json", "--out", "sim"], d);
    ok(&["clean", "--in", "sim/ticks.csv", "--out", "days"], d);
    ok(&["adjust", "--days", "days", "--out", "curves.json"], d);
    dir
}

#[test]
fn pipeline_on_simulated_data() {
    let dir = prepared();
    let d = dir.path();
    for day in ["2022-03-01", "2022-03-02", "2022-03-03"] {
        assert!(d.join(format!("days/{day}.csv")).exists());
    }
    ok(
        &[
            "fit",
            "--days",
            "days",
            "--curves",
            "curves.json",
            "--variants",
            "proposed",
            "--out",
            "fits",
        ],
        d,
    );
    let summary = lines(d.join("fits/summary.csv"));
    assert_eq!(summary[0], "variant,coefficient,min,median,max,n_days");
    let coefs: Vec<&str> = summary[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(coefs, ["theta", "omega", "phi", "alpha", "pi"]);
    assert!(summary[1..]
        .iter()
        .all(|l| l.starts_with("proposed,") && l.ends_with(",3")));
    assert!(d.join("fits/curves.json").exists());
    assert_eq!(lines(d.join("fits/failures.csv")).len(), 1);

    ok(
        &[
            "diagnose",
            "--fits",
            "fits",
            "--days",
            "days",
            "--out",
            "report.csv",
        ],
        d,
    );
    let report = lines(d.join("report.csv"));
    assert!(report[0].starts_with("variant,loglik,disc_loglik,ar_r2_1,"));
    assert_eq!(report.len(), 2);
    assert_eq!(lines(d.join("report_by_day.csv")).len(), 4);

    ok(
        &[
            "forecast",
            "--fits",
            "fits",
            "--days",
            "days",
            "--out",
            "fcst.csv",
            "--aggregate-train",
            "--aggregate-test",
            "--max-iter",
            "2000",
        ],
        d,
    );
    let cells: Vec<(String, String)> = lines(d.join("fcst.csv"))[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    assert_eq!(
        cells,
        [
            ("full", "full"),
            ("full", "aggregated"),
            ("aggregated", "full"),
            ("aggregated", "aggregated")
        ]
        .map(|(a, b)| (a.to_string(), b.to_string()))
    );
    // Two fits have a following day, each scored in four cells.
    assert_eq!(lines(d.join("fcst_by_day.csv")).len(), 1 + 8);

    ok(
        &[
            "realized",
            "--fits",
            "fits",
            "--days",
            "days",
            "--out",
            "daily.csv",
        ],
        d,
    );
    let daily = lines(d.join("daily.csv"));
    assert_eq!(daily[0], "day,rv,rk,tmv,amv");
    assert_eq!(daily.len(), 4);
    let corr = lines(d.join("daily_corr.csv"));
    assert_eq!(corr[0], "measure,rv,rk,tmv,amv");
    assert!(corr[1].starts_with("rv,1,"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = prepared();
    let d = dir.path();
    for out in ["a", "b"] {
        ok(
            &[
                "--jobs",
                "2",
                "fit",
                "--days",
                "days",
                "--variants",
                "naive,proposed",
                "--out",
                out,
            ],
            d,
        );
    }
    let mut names: Vec<_> = fs::read_dir(d.join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 3 * 2 + 2);
    for n in names {
        assert_eq!(
            fs::read(d.join("a").join(&n)).unwrap(),
            fs::read(d.join("b").join(&n)).unwrap(),
            "{n:?}"
        );
    }
    let before = fs::read(d.join("days/2022-03-02.csv")).unwrap();
    ok(&["clean", "--in", "sim/ticks.csv", "--out", "days"], d);
    assert_eq!(before, fs::read(d.join("days/2022-03-02.csv")).unwrap());
}

#[test]
fn all_variants_give_ten_fits_per_day() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &[
            "simulate",
            "--out",
            "sim",
            "--n-ticks",
            "1500",
            "--seed",
            "3",
        ],
        d,
    );
    ok(&["clean", "--in", "sim/ticks.csv", "--out", "days"], d);
    ok(&["adjust", "--days", "days", "--out", "curves.json"], d);
    ok(
        &[
            "fit",
            "--days",
            "days",
            "--curves",
            "curves.json",
            "--variants",
            "all",
            "--out",
            "fits",
        ],
        d,
    );
    let fits = fs::read_dir(d.join("fits"))
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .contains("__")
        })
        .count();
    assert_eq!(fits, 10);
    ok(
        &[
            "diagnose",
            "--fits",
            "fits",
            "--days",
            "days",
            "--out",
            "report.csv",
        ],
        d,
    );
    let report = lines(d.join("report.csv"));
    assert_eq!(report.len(), 11);
    // Continuous families carry a discretized likelihood, the others do not.
    for row in &report[1..] {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(
            f[2] != "NA",
            f[0] == "normal" || f[0] == "student-t",
            "{row}"
        );
    }
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("sim.json"),
        r#"{"n-ticks": 500, "out": "from_config"}"#,
    )
    .unwrap();
    ok(&["simulate", "--config", "sim.json", "--n-ticks", "300"], d);
    assert_eq!(lines(d.join("from_config/ticks.csv")).len(), 301);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = |args: &[&str]| tickvol(args, d).status.code();
    // Usage errors.
    assert_eq!(code(&[]), Some(1));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["clean", "--in", "x.csv"]), Some(1));
    assert_eq!(
        code(&["fit", "--days", ".", "--out", "f", "--variants", "nope"]),
        Some(1)
    );
    fs::write(d.join("bad.json"), r#"{"no-such-option": 1}"#).unwrap();
    assert_eq!(code(&["adjust", "--config", "bad.json"]), Some(1));
    assert_eq!(code(&["--help"]), Some(0));
    // Data errors.
    assert_eq!(
        code(&["clean", "--in", "missing.csv", "--out", "o"]),
        Some(2)
    );
    fs::create_dir(d.join("empty")).unwrap();
    assert_eq!(
        code(&["adjust", "--days", "empty", "--out", "c.json"]),
        Some(2)
    );
    let o = tickvol(&["clean", "--in", "missing.csv", "--out", "o"], d);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));
}

#[test]
fn unreadable_day_is_skipped() {
    let dir = prepared();
    let d = dir.path();
    fs::write(
        d.join("days/2022-03-04.csv"),
        "time_ms,price,volume\n1,oops,3\n",
    )
    .unwrap();
    ok(
        &[
            "fit",
            "--days",
            "days",
            "--variants",
            "naive",
            "--out",
            "fits",
        ],
        d,
    );
    let failures = lines(d.join("fits/failures.csv"));
    assert_eq!(failures.len(), 2);
    assert!(failures[1].starts_with("2022-03-04,,"));
    assert_eq!(
        lines(d.join("fits/summary.csv"))[1].rsplit(',').next(),
        Some("3")
    );
}
