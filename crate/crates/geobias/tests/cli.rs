mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{World, MONOTONE_STUB};
use geobias::eval::Report;
use geobias::records::{read_csv, LocationRow, RatingRow, RatingSource};

fn geobias(config: &Path, run: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geobias"))
        .arg("--config")
        .arg(config)
        .arg("--run-dir")
        .arg(run)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(out: Output) -> String {
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(out.status.success(), "stdout:\n{stdout}\nstderr:\n{}", String::from_utf8_lossy(&out.stderr));
    stdout
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn all_stages(config: &Path, run: &Path, extra: &[&str]) {
    for stage in ["sample", "gen-prompts", "query", "eval", "map"] {
        let mut args = extra.to_vec();
        args.push(stage);
        ok(geobias(config, run, &args));
    }
}

#[test]
fn end_to_end_stub_run() {
    let world = World::new(2.0);
    let cfg = world.config(120, "", MONOTONE_STUB);
    let run = world.run_dir("run");
    all_stages(&cfg, &run, &[]);

    let locations: Vec<LocationRow> = read_csv(&run.join("locations.csv")).unwrap();
    assert_eq!(locations.len(), 120);
    let ratings: Vec<RatingRow> = read_csv(&run.join("ratings.csv")).unwrap();
    assert_eq!(ratings.len(), 120 * 4);
    assert!(ratings.iter().all(|r| r.source == RatingSource::Text && r.rating.is_some()));

    let report: Report = serde_json::from_slice(&fs::read(run.join("report.json")).unwrap()).unwrap();
    let pop = report.entry("stub-monotone", "Population Density", geobias::config::Variant::Full).unwrap();
    assert!(pop.rho_truth.unwrap() > 0.99, "{:?}", pop.rho_truth);
    let moral = report.entry("stub-monotone", "Average Morality of Residents", geobias::config::Variant::Full).unwrap();
    let anchor = moral.anchor.as_ref().unwrap();
    assert_eq!(anchor.bias_score, Some(0.0));
    assert!(anchor.rho_degenerate);

    for t in ["objective_rho", "anchor_rho", "bias_score", "mad", "answer_rate", "gini"] {
        assert!(run.join("tables").join(format!("{t}.csv")).exists(), "{t}");
    }
    // One model: a rank map per topic plus rank-error maps for the two
    // objective topics, each as SVG and GeoJSON.
    assert_eq!(fs::read_dir(run.join("maps")).unwrap().count(), (4 + 2) * 2);

    let printed = ok(Command::new(env!("CARGO_BIN_EXE_geobias")).arg("--run-dir").arg(&run).arg("report").output().unwrap());
    assert!(printed.contains("Population Density"));
    assert_eq!(printed, fs::read_to_string(run.join("report.md")).unwrap());
}

#[test]
fn reruns_are_noops_and_changed_inputs_are_refused() {
    let world = World::new(2.0);
    let cfg = world.config(60, "", MONOTONE_STUB);
    let run = world.run_dir("run");
    all_stages(&cfg, &run, &[]);
    let snapshot = |names: &[&str]| names.iter().map(|n| fs::read(run.join(n)).unwrap()).collect::<Vec<_>>();
    let files = ["locations.csv", "ratings.csv", "responses.jsonl", "report.json", "manifest.json"];
    let before = snapshot(&files);
    all_stages(&cfg, &run, &[]);
    assert_eq!(before, snapshot(&files));

    let out = geobias(&cfg, &run, &["--seed", "12", "sample"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("new run directory"));
}

#[test]
fn interrupted_query_resumes_to_identical_ratings() {
    let world = World::new(2.0);
    let cfg = world.config(80, "[prompt]\nablations = [\"no_address\"]", MONOTONE_STUB);
    let run = world.run_dir("run");
    all_stages(&cfg, &run, &[]);
    let ratings = fs::read(run.join("ratings.csv")).unwrap();

    // Keep half the cached responses, the last one cut mid-line.
    let responses = fs::read_to_string(run.join("responses.jsonl")).unwrap();
    let lines: Vec<&str> = responses.lines().collect();
    let mut partial = lines[..lines.len() / 2].join("\n");
    partial.push('\n');
    partial.push_str(&lines[lines.len() / 2][..20]);
    fs::write(run.join("responses.jsonl"), partial).unwrap();
    fs::remove_file(run.join("ratings.csv")).unwrap();

    ok(geobias(&cfg, &run, &["query"]));
    assert_eq!(ratings, fs::read(run.join("ratings.csv")).unwrap());
    let rows: Vec<RatingRow> = read_csv(&run.join("ratings.csv")).unwrap();
    assert_eq!(rows.len(), 80 * 4 * 2);
}

#[test]
fn expected_value_mode_uses_logprobs() {
    let world = World::new(2.0);
    let cfg = world.config(40, "", MONOTONE_STUB);
    let run = world.run_dir("run");
    all_stages(&cfg, &run, &["--mode", "ev"]);
    let rows: Vec<RatingRow> = read_csv(&run.join("ratings.csv")).unwrap();
    assert!(rows.iter().all(|r| r.source == RatingSource::Logprobs));
    assert!(rows.iter().all(|r| (0.0..=9.0).contains(&r.rating.unwrap())));
    assert!(rows.iter().any(|r| r.rating.unwrap().fract() != 0.0));
}

#[test]
fn exit_codes() {
    let world = World::new(5.0);
    let run = world.run_dir("run");

    let no_logprobs = MONOTONE_STUB.replace("kind = \"stub\"", "kind = \"stub\"\nsupports_logprobs = false");
    let cfg = world.config(20, "", &no_logprobs);
    ok(geobias(&cfg, &run, &["sample"]));
    ok(geobias(&cfg, &run, &["gen-prompts"]));
    assert_eq!(code(&geobias(&cfg, &run, &["--mode", "ev", "query"])), 2);

    let http = r#"
[[models]]
name = "remote"
kind = "http"
base_url = "http://127.0.0.1:9"
api_key_env = "GEOBIAS_TEST_KEY_THAT_IS_NOT_SET"
"#;
    let cfg = world.config(20, "", http);
    assert_eq!(code(&geobias(&cfg, &world.run_dir("http"), &["sample"])), 0);
    ok(geobias(&cfg, &world.run_dir("http"), &["gen-prompts"]));
    assert_eq!(code(&geobias(&cfg, &world.run_dir("http"), &["query"])), 2);

    // Stage prerequisites are data errors.
    let cfg = world.config(20, "", MONOTONE_STUB);
    assert_eq!(code(&geobias(&cfg, &world.run_dir("empty"), &["eval"])), 3);

    fs::write(world.path().join("bad.toml"), "[sample\n").unwrap();
    assert_eq!(code(&geobias(&world.path().join("bad.toml"), &run, &["sample"])), 2);
    let unknown = fs::read_to_string(&cfg).unwrap().replace("n_points", "points");
    fs::write(world.path().join("unknown.toml"), unknown).unwrap();
    assert_eq!(code(&geobias(&world.path().join("unknown.toml"), &run, &["sample"])), 2);

    fs::remove_file(world.path().join("imr.asc")).unwrap();
    assert_eq!(code(&geobias(&cfg, &run, &["sample"])), 2);
}

#[test]
fn region_override_restricts_samples() {
    let world = World::new(2.0);
    let cfg = world.config(30, "", MONOTONE_STUB);
    let run = world.run_dir("run");
    ok(geobias(&cfg, &run, &["--region", "-10,-20,30,40", "sample"]));
    let rows: Vec<LocationRow> = read_csv(&run.join("locations.csv")).unwrap();
    assert!(rows.iter().all(|r| (-20.0..=40.0).contains(&r.lon) && (-10.0..=30.0).contains(&r.lat)));
    assert_eq!(code(&geobias(&cfg, &world.run_dir("bad"), &["--region", "30,-20,-10,40", "sample"])), 2);
}
