use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use scenmine::dataset::DataRepository;
use scenmine::exec::Workers;
use scenmine::metrics::pearson_matrix;
use scenmine::synthetic::{self, SyntheticParams, HUMIDITY};
use tempfile::TempDir;

fn scenmine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scenmine"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_data(dir: &Path, n_days: usize) {
    let data = synthetic::generate(&SyntheticParams {
        n_days,
        ..Default::default()
    })
    .unwrap();
    synthetic::write_dir(&data, dir).unwrap();
}

const RUN_TOML: &str = r#"data_dir = "data"
seed = 11

[[algorithms]]
algorithm = "KNN"
k = 3

[[algorithms]]
algorithm = "DT"

[[presets]]
main = "loc1"
target = "humidity"
context = "temperature"
neighbors = ["loc2", "loc3", "loc4"]
"#;

fn workspace(head: &str, tail: &str) -> TempDir {
    let tmp = TempDir::new().unwrap();
    write_data(&tmp.path().join("data"), 200);
    fs::write(tmp.path().join("run.toml"), format!("{head}{RUN_TOML}{tail}")).unwrap();
    tmp
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn run_succeeds_with_exit_zero() {
    let tmp = workspace("", "");
    let out = tmp.path().join("out");
    let o = scenmine(&["run", p(&tmp.path().join("run.toml")), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let index = fs::read_to_string(out.join("index.csv")).unwrap();
    assert_eq!(index.lines().count(), 1 + 6 * 2);
    assert_eq!(fs::read_dir(out.join("cells")).unwrap().count(), 12);
    for f in [
        "scenarios.csv",
        "config.toml",
        "reports/spearman.csv",
        "reports/dispersion.csv",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn unknown_source_is_a_partial_failure() {
    let tmp = workspace("scenario_file = \"extra.csv\"\n", "");
    fs::write(
        tmp.path().join("extra.csv"),
        "scenario_id,loc1.humidity,nowhere.humidity\nghost,target,cs1\n",
    )
    .unwrap();

    let out = tmp.path().join("out");
    let o = scenmine(&["run", p(&tmp.path().join("run.toml")), "--out", p(&out)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("ghost__loc1__KNN"), "{}", stderr(&o));
    let index = fs::read_to_string(out.join("index.csv")).unwrap();
    assert_eq!(index.lines().filter(|l| l.contains(",failed,")).count(), 2);
    assert_eq!(index.lines().filter(|l| l.contains(",ok,")).count(), 12);
}

#[test]
fn window_longer_than_the_series_is_rejected() {
    let tmp = workspace("", "");
    let out = tmp.path().join("out");
    let o = scenmine(&[
        "run",
        p(&tmp.path().join("run.toml")),
        "--out",
        p(&out),
        "--window",
        "5000",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("need at least 5001 rows"), "{}", stderr(&o));
}

#[test]
fn bad_flags_and_missing_config_exit_two() {
    assert_eq!(code(&scenmine(&["--bogus"])), 2);
    assert_eq!(
        code(&scenmine(&["run", "/definitely/not/here.toml", "--out", "/tmp/x"])),
        2
    );
    assert_eq!(code(&scenmine(&["--help"])), 0);
}

#[test]
fn ingest_lists_every_source() {
    let tmp = TempDir::new().unwrap();
    write_data(tmp.path(), 50);
    let o = scenmine(&["ingest", p(tmp.path())]);
    assert_eq!(code(&o), 0);
    let manifest = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = manifest.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("source_id,"));
    assert!(lines[1].starts_with("loc1,"));
    assert!(lines[1].contains(",50,2016-01-01,"));
}

#[test]
fn ingest_rejects_empty_and_corrupt_directories() {
    let empty = TempDir::new().unwrap();
    let o = scenmine(&["ingest", p(empty.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no datasets"));

    let tmp = TempDir::new().unwrap();
    write_data(tmp.path(), 50);
    fs::write(
        tmp.path().join("broken.csv"),
        "date,humidity\n2016-01-01,1.5\n2016-01-02,1.6\n2016-01-03,oops\n",
    )
    .unwrap();
    let o = scenmine(&["ingest", p(tmp.path())]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("broken.csv") && err.contains("row 3"), "{err}");
}

#[test]
fn correlate_prints_the_library_matrix_losslessly() {
    let tmp = TempDir::new().unwrap();
    write_data(tmp.path(), 120);
    let o = scenmine(&["correlate", p(tmp.path()), "--attribute", HUMIDITY]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();

    let repo = DataRepository::load_dir(tmp.path(), b',', Workers::SEQUENTIAL).unwrap();
    let ids: Vec<String> = repo.source_ids().map(String::from).collect();
    let m = pearson_matrix(&repo, HUMIDITY, &ids).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).take(ids.len()).collect();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[0], ids[i]);
        for (j, c) in cells[1..].iter().enumerate() {
            assert_eq!(c.parse::<f64>().unwrap().to_bits(), m.entries[i][j].to_bits());
        }
    }
    assert!(text.contains("\nn_common,"));

    let o = scenmine(&["correlate", p(tmp.path()), "--attribute", HUMIDITY, "--sources", "loc1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn report_regenerates_a_single_kind() {
    let tmp = workspace("", "");
    let out = tmp.path().join("out");
    assert_eq!(
        code(&scenmine(&["run", p(&tmp.path().join("run.toml")), "--out", p(&out)])),
        0
    );
    let original = fs::read(out.join("reports/spearman.csv")).unwrap();

    let rep = tmp.path().join("rep");
    let o = scenmine(&["report", p(&out), "--kind", "spearman", "--out", p(&rep)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(rep.join("spearman.csv")).unwrap(), original);
    assert!(rep.join("spearman_by_label.csv").is_file());
    assert!(!rep.join("dispersion.csv").exists());

    let o = scenmine(&["report", p(&out), "--kind", "nonsense"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn optimize_writes_one_grid_per_scenario() {
    let tmp = workspace(
        "",
        "\n[optimize]\nalgorithm = \"KNN\"\nscenarios = [\"loc1-cadm\"]\nwindows = [3, 5]\n\n\
         [[optimize.axes]]\nname = \"k\"\nvalues = [1, 5]\n",
    );
    let out = tmp.path().join("opt");
    let o = scenmine(&["optimize", p(&tmp.path().join("run.toml")), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let grid = fs::read_to_string(out.join("grid_loc1-cadm.csv")).unwrap();
    assert_eq!(grid.lines().count(), 5);
    assert!(grid.starts_with("trial,window,k,objective,"));
    assert_eq!(grid.lines().skip(1).filter(|l| l.ends_with(",1")).count(), 1);
    assert!(fs::read_to_string(out.join("best.csv"))
        .unwrap()
        .contains("loc1-cadm,KNN,"));
}

#[test]
fn presets_emit_six_scenarios() {
    let o = scenmine(&[
        "presets",
        "--main",
        "a",
        "--target",
        "h",
        "--context",
        "t",
        "--neighbors",
        "b,c,d",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let ids: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        ids,
        [
            "a-standalone",
            "a-cadm",
            "a-cadm-cdm1",
            "a-cadm-cdm2",
            "a-cadm-cdm3",
            "a-cdm3"
        ]
    );

    let o = scenmine(&[
        "presets",
        "--main",
        "a",
        "--target",
        "h",
        "--context",
        "t",
        "--neighbors",
        "b",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_snapshot_reproduces_the_run() {
    let tmp = workspace("", "");
    let out = tmp.path().join("out");
    let o = scenmine(&[
        "run",
        p(&tmp.path().join("run.toml")),
        "--out",
        p(&out),
        "--seed",
        "18446744073709551615",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let again = tmp.path().join("again");
    let o = scenmine(&["run", p(&out.join("config.toml")), "--out", p(&again)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["index.csv", "config.toml", "scenarios.csv", "reports/cells.csv"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}
