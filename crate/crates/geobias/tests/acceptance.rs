// Acceptance criteria, one pass/fail line each. Exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod core_fixtures;
mod common;

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::World;
use geobias::config::Variant;
use geobias::eval::Report;
use geobias::records::{read_csv, LocationRow};
use geobias_core::gazetteer::nearest_places_scan;
use geobias_core::hash::content_hash;
use geobias_core::{
    bias_score_from_components, expected_rating_from_logprobs, farthest_point_sample, fractional_rank, gini,
    haversine_km, mad, render_prompt, spearman_rho, weighted_candidates, AddressMode, FirstDigitProbs, Location,
    PlaceIndex, PlaceRecord, PromptSpec, SamplePlan, EARTH_RADIUS_KM,
};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Name, edit, index of the block it changes, and the block's replacement
/// (`None` removes it).
type Ablation = (&'static str, fn(&mut PromptSpec), usize, Option<&'static str>);

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

// Sensitive topics by model; columns are GPT-4 Turbo, GPT-3.5 Turbo,
// Gemini Pro, Mixtral 8x7B, Llama 2 70B.
const MODELS: [&str; 5] = ["GPT-4 Turbo", "GPT-3.5 Turbo", "Gemini Pro", "Mixtral 8x7B", "Llama 2 70B"];
const TOPICS: [&str; 5] = ["likability", "attractiveness", "morality", "intelligence", "work ethic"];
const RHO: [[f64; 5]; 5] = [
    [0.39, 0.47, 0.50, 0.47, 0.16],
    [0.11, 0.50, 0.50, 0.44, 0.27],
    [0.10, 0.45, 0.63, 0.55, 0.17],
    [0.22, 0.62, 0.67, 0.65, 0.18],
    [0.47, 0.48, 0.65, 0.41, 0.33],
];
const MAD: [[f64; 5]; 5] = [
    [0.57, 0.24, 0.83, 0.93, 0.34],
    [0.04, 0.57, 0.71, 0.71, 0.46],
    [0.12, 0.24, 1.23, 0.81, 0.10],
    [0.03, 0.54, 0.81, 0.65, 0.05],
    [0.49, 0.26, 0.96, 0.39, 0.70],
];
const ANSWER_RATE: [[f64; 5]; 5] = [
    [1.00, 1.00, 1.00, 1.00, 1.00],
    [0.98, 1.00, 1.00, 1.00, 1.00],
    [0.98, 1.00, 1.00, 0.92, 1.00],
    [0.99, 1.00, 1.00, 0.67, 1.00],
    [0.99, 1.00, 1.00, 1.00, 1.00],
];
const BIAS: [[f64; 5]; 5] = [
    [0.23, 0.11, 0.42, 0.43, 0.05],
    [0.00, 0.29, 0.36, 0.32, 0.13],
    [0.01, 0.11, 0.77, 0.38, 0.02],
    [0.01, 0.33, 0.54, 0.19, 0.01],
    [0.23, 0.13, 0.63, 0.16, 0.23],
];
const BIAS_MEAN: [f64; 5] = [0.10, 0.19, 0.54, 0.32, 0.09];

fn bias_table() -> Outcome {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for m in 0..5 {
        let mut sum = 0.0;
        for t in 0..5 {
            let b = bias_score_from_components(RHO[t][m], MAD[t][m], ANSWER_RATE[t][m]);
            sum += b;
            let err = (b - BIAS[t][m]).abs();
            worst = worst.max(err);
            if err > 0.01 {
                failures.push(format!("{} {}: {b:.3} vs {:.2}", MODELS[m], TOPICS[t], BIAS[t][m]));
            }
        }
        let mean = sum / 5.0;
        if (mean - BIAS_MEAN[m]).abs() > 0.01 {
            failures.push(format!("{} mean: {mean:.3} vs {:.2}", MODELS[m], BIAS_MEAN[m]));
        }
    }
    check(
        failures.is_empty(),
        format!("25 cells and 5 means within 0.01 (worst cell error {worst:.4})"),
        failures.join("; "),
    )
}

fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let less = x.iter().filter(|w| *w < v).count() as f64;
            let equal = x.iter().filter(|w| *w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn oracle_spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (oracle_ranks(x), oracle_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn spearman_suite() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in 2..=7 {
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        for p in permutations(n) {
            let y: Vec<f64> = p.iter().map(|&i| i as f64).collect();
            let rho = spearman_rho(&x, &y).map_err(|e| e.to_string())?;
            let d2: usize = p.iter().enumerate().map(|(i, &j)| i.abs_diff(j).pow(2)).sum();
            let closed = 1.0 - (6 * d2) as f64 / (n * (n * n - 1)) as f64;
            if rho != closed {
                return Err(format!("closed form differs for {p:?}: {rho} vs {closed}"));
            }
            worst = worst.max((rho - oracle_spearman(&x, &y)).abs());
            count += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut tied = 0;
    while tied < 1000 {
        let n = rng.random_range(2..=50);
        let levels = rng.random_range(2..=6);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.5).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 - 1.0).collect();
        if x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]) {
            continue;
        }
        let rho = spearman_rho(&x, &y).map_err(|e| e.to_string())?;
        worst = worst.max((rho - oracle_spearman(&x, &y)).abs());
        tied += 1;
    }
    check(
        worst <= 1e-12,
        format!("{count} permutations exact in closed form, 1000 tied vectors; max oracle error {worst:.1e}"),
        format!("max oracle error {worst:.3e} exceeds 1e-12"),
    )
}

fn blocks(text: &str) -> Vec<&str> {
    text.split("\n\n").collect()
}

fn prompt_golden() -> Outcome {
    let idx = core_fixtures::manhattan_index();
    let spec = PromptSpec::new("Population Density", core_fixtures::origin());
    let full = render_prompt(&spec, &idx).map_err(|e| e.to_string())?.text;
    if full != core_fixtures::MANHATTAN_PROMPT {
        return Err("full prompt differs from the golden file".into());
    }
    let golden = blocks(core_fixtures::MANHATTAN_PROMPT);
    // Blocks: instruction, coordinates, address, nearby places, answer format.
    let variants: [Ablation; 4] = [
        ("no_coordinates", |s| s.flags.include_coordinates = false, 1, None),
        ("no_nearby", |s| s.flags.include_nearby = false, 3, None),
        ("no_address", |s| s.flags.include_address = false, 2, None),
        ("last_two_address", |s| s.flags.address_mode = AddressMode::LastTwo, 2, Some("Address: \"New York, United States\"")),
    ];
    for (name, edit, block, replacement) in variants {
        let mut s = spec.clone();
        edit(&mut s);
        let text = render_prompt(&s, &idx).map_err(|e| e.to_string())?.text;
        let mut want = golden.clone();
        match replacement {
            Some(r) => want[block] = r,
            None => {
                want.remove(block);
            }
        }
        if blocks(&text) != want {
            return Err(format!("{name} changes more than its block"));
        }
    }
    Ok("golden prompt byte-identical; 4 ablations each change only their block".into())
}

fn geobias(cfg: &Path, run: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_geobias"))
        .arg("--config")
        .arg(cfg)
        .arg("--run-dir")
        .arg(run)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("geobias {args:?} failed: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

const NOISE_WEIGHT: f64 = 1.0;
const NOISE_SIGMA: f64 = 0.3;

fn hermetic_run() -> Outcome {
    let world = World::new(0.5);
    let models = format!(
        r#"
[[models]]
name = "monotone"
kind = "stub"
transform = "rank"
weight = 6.0
center = 0.5
topic_signals = {{ "Average Morality of Residents" = {{ constant = 5.0 }} }}

[[models]]
name = "noisy"
kind = "stub"
transform = "normal_score"
weight = {NOISE_WEIGHT}
noise_sigma = {NOISE_SIGMA}
seed = 7
topic_signals = {{ "Average Morality of Residents" = {{ constant = 3.0 }} }}
"#
    );
    let cfg = world.config(500, "", &models);
    let run = world.run_dir("run");
    for stage in ["sample", "gen-prompts", "query", "eval"] {
        geobias(&cfg, &run, &[stage])?;
    }
    let report: Report = serde_json::from_slice(&fs::read(run.join("report.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let entry = |model: &str, topic: &str| report.entry(model, topic, Variant::Full).ok_or(format!("no {model}/{topic}"));
    let mono = entry("monotone", "Population Density")?.rho_truth.ok_or("monotone rho missing")?;
    let noisy = entry("noisy", "Population Density")?.rho_truth.ok_or("noisy rho missing")?;
    let r = NOISE_WEIGHT / (NOISE_WEIGHT.powi(2) + NOISE_SIGMA.powi(2)).sqrt();
    let analytic = 6.0 / PI * (r / 2.0).asin();
    let b = |m: &str| {
        entry(m, "Average Morality of Residents").map(|e| e.anchor.as_ref().and_then(|a| a.bias_score))
    };
    let (b1, b2) = (b("monotone")?, b("noisy")?);
    let detail = format!("monotone rho {mono:.5}; noisy rho {noisy:.4} vs analytic {analytic:.4}; constant B {b1:?}, {b2:?}");
    check(
        (mono - 1.0).abs() <= 0.001 && (noisy - analytic).abs() <= 0.03 && b1 == Some(0.0) && b2 == Some(0.0),
        detail.clone(),
        detail,
    )
}

fn metric_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(2..40);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..9.9)).collect();
        let (c, k) = (rng.random_range(-50.0..50.0), rng.random_range(-8.0..8.0));
        let m = mad(&x).map_err(|e| e.to_string())?;
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let scaled: Vec<f64> = x.iter().map(|v| v * k).collect();
        if (mad(&shifted).unwrap() - m).abs() > 1e-9 * (1.0 + c.abs()) {
            return Err(format!("MAD not translation invariant under {c}"));
        }
        if (mad(&scaled).unwrap() - k.abs() * m).abs() > 1e-9 * (1.0 + k.abs()) {
            return Err(format!("MAD not absolutely homogeneous under {k}"));
        }
        if x.iter().sum::<f64>() > 0.0 {
            let g = gini(&x).map_err(|e| e.to_string())?;
            let kp = k.abs() + 0.1;
            let gs = gini(&x.iter().map(|v| v * kp).collect::<Vec<_>>()).unwrap();
            if (g - gs).abs() > 1e-12 {
                return Err(format!("Gini not scale invariant: {g} vs {gs}"));
            }
        }
        let ties: Vec<f64> = x.iter().map(|v| v.round()).collect();
        let sum: f64 = fractional_rank(&ties).unwrap().ranks().iter().sum();
        if sum != (n * (n + 1)) as f64 / 2.0 {
            return Err(format!("rank sum {sum} for n = {n}"));
        }
    }
    let extreme = mad(&[0.0, 9.9]).unwrap();
    if (extreme - 4.95).abs() > 1e-12 {
        return Err(format!("MAD of [0, 9.9] is {extreme}"));
    }
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut p = [0.0; 10];
        for v in &mut p {
            if rng.random_bool(0.7) {
                *v = rng.random_range(0.0..1.0);
            }
        }
        p[rng.random_range(0..10)] += 0.05;
        let ev = expected_rating_from_logprobs(&FirstDigitProbs(p)).map_err(|e| e.to_string())?.value;
        let mass: f64 = p.iter().sum();
        let hand = (0..10).map(|d| d as f64 * p[d]).sum::<f64>() / mass;
        if !(0.0..=9.0).contains(&ev) {
            return Err(format!("expected rating {ev} outside [0, 9]"));
        }
        worst = worst.max((ev - hand).abs());
    }
    check(
        worst <= 1e-12,
        format!("MAD/Gini/rank invariants on 200 vectors; MAD[0,9.9] = 4.95; EV max error {worst:.1e}"),
        format!("EV max error {worst:.3e}"),
    )
}

// Content hash of locations.csv for the n = 2000, seed 11 sample of the synthetic
// density raster.
const SAMPLE_DIGEST: &str = "3b8a820d547b88f08950da71f94e4585";

fn min_pairwise_km(locs: &[Location]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in locs.iter().enumerate() {
        for b in &locs[i + 1..] {
            best = best.min(haversine_km(*a, *b));
        }
    }
    best
}

fn sampling() -> Outcome {
    let world = World::new(2.0);
    let cfg = world.config(2000, "", common::MONOTONE_STUB);
    let (a, b) = (world.run_dir("a"), world.run_dir("b"));
    geobias(&cfg, &a, &["sample"])?;
    geobias(&cfg, &b, &["sample"])?;
    let bytes = fs::read(a.join("locations.csv")).map_err(|e| e.to_string())?;
    if bytes != fs::read(b.join("locations.csv")).map_err(|e| e.to_string())? {
        return Err("two runs produced different locations.csv".into());
    }
    let digest = content_hash(&bytes);
    if digest != SAMPLE_DIGEST {
        return Err(format!("locations.csv digest {digest} differs from the recorded {SAMPLE_DIGEST}"));
    }
    let rows: Vec<LocationRow> = read_csv(&a.join("locations.csv")).map_err(|e| e.to_string())?;
    if rows.len() != 2000 {
        return Err(format!("{} locations", rows.len()));
    }

    let plan = SamplePlan::new(2000, 11);
    let pool = weighted_candidates(&common::grid(2.0, common::density), &plan).map_err(|e| e.to_string())?;
    let fps: Vec<Location> =
        farthest_point_sample(&pool, 2000).map_err(|e| e.to_string())?.iter().map(|&i| pool[i].location).collect();
    let fps_min = min_pairwise_km(&fps);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut wins = 0;
    let mut best_random: f64 = 0.0;
    for _ in 0..100 {
        let subset: Vec<Location> = sample_indices(&mut rng, pool.len(), 2000).iter().map(|i| pool[i].location).collect();
        let m = min_pairwise_km(&subset);
        best_random = best_random.max(m);
        wins += usize::from(fps_min > m);
    }
    let detail = format!(
        "byte-stable ({}..); FPS min distance {fps_min:.1} km beats {wins}/100 random subsets (best {best_random:.2} km)",
        &digest[..12]
    );
    check(wins >= 99, detail.clone(), detail)
}

fn random_location(rng: &mut ChaCha8Rng) -> Location {
    let lat = rng.random_range(-1.0f64..1.0).asin().to_degrees();
    Location::new(lat, rng.random_range(-180.0..180.0)).unwrap()
}

// Central angle from the atan2 form over unit vectors, accurate at all
// distances.
fn oracle_km(a: Location, b: Location) -> f64 {
    let (u, v) = (a.unit_vector(), b.unit_vector());
    let cross = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let sin = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
    let cos = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    EARTH_RADIUS_KM * sin.atan2(cos)
}

fn geodata() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let places: Vec<PlaceRecord> = (0..10_000)
        .map(|i| PlaceRecord {
            name: format!("P{i}"),
            location: random_location(&mut rng),
            population: i,
            admin_chain: vec![format!("Region {}", i % 50), "Country".into()],
        })
        .collect();
    let idx = PlaceIndex::new(places, "random").map_err(|e| e.to_string())?;
    for k in [1, 10] {
        for _ in 0..500 {
            let o = random_location(&mut rng);
            let fast = idx.nearest_places(o, k).map_err(|e| e.to_string())?;
            if fast != nearest_places_scan(&idx, o, k) {
                return Err(format!("nearest_places differs from scan at {o:?}, k = {k}"));
            }
        }
    }
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (a, b) = (random_location(&mut rng), random_location(&mut rng));
        worst = worst.max((haversine_km(a, b) - oracle_km(a, b)).abs());
    }
    check(
        worst <= 0.01,
        format!("kNN exact on 10000 places for k in {{1, 10}}; haversine max error {worst:.2e} km"),
        format!("haversine max error {worst} km"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("bias-score table reproduction", Duration::from_secs(1), bias_table),
        ("spearman oracle suite", Duration::from_secs(10), spearman_suite),
        ("prompt golden file", Duration::from_secs(1), prompt_golden),
        ("end-to-end hermetic run", Duration::from_secs(60), hermetic_run),
        ("metric property suite", Duration::from_secs(10), metric_properties),
        ("sampling determinism and coverage", Duration::from_secs(120), sampling),
        ("geodata oracles", Duration::from_secs(30), geodata),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget:?} budget")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!("{} {}. {name} [{:.2}s]: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1, elapsed.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
