//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{fixture, path_str, replaykey, Server};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use replaykey_core::analysis::evaluate_events;
use replaykey_core::eval::{match_peaks, GroundTruth, SemanticSegment, DEFAULT_TOLERANCE_S};
use replaykey_core::event::{serialize_event, Action, InteractionEvent, VideoMeta};
use replaykey_core::peaks::{find_peaks_in, rank_peaks, select_thumbnail, Peak};
use replaykey_core::series::build_replay_series;
use replaykey_core::sim::{simulate_sessions, SimulationConfig, DEFAULT_COHORT};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    check(elapsed < limit, || format!("{what} took {elapsed:?}, limit {limit:?}"))
}

fn peaks(times: &[u32], values: &[f64]) -> Vec<Peak> {
    times.iter().zip(values).map(|(&time_s, &value)| Peak { time_s, value }).collect()
}

fn segments(starts: &[u32]) -> Vec<SemanticSegment> {
    starts.iter().enumerate().map(|(i, &s)| SemanticSegment::new(format!("S{}", i + 1), s, s + 1)).collect()
}

/// 1. Reference distances and pooled detection.
fn reference_distances() -> Outcome {
    let lecture_peaks = peaks(&[73, 158, 398, 555], &[10.0, 10.0, 9.0, 13.0]);
    let lecture_segs = segments(&[40, 145, 350, 554]);
    let howto_peaks = peaks(&[150, 251, 361, 496], &[16.0, 8.0, 3.0, 7.0]);
    let howto_segs = segments(&[105, 230, 374, 475]);

    let start = Instant::now();
    let lecture = match_peaks(&lecture_peaks, &lecture_segs, DEFAULT_TOLERANCE_S);
    let howto = match_peaks(&howto_peaks, &howto_segs, DEFAULT_TOLERANCE_S);
    let elapsed = start.elapsed();

    let dists = |rows: &[replaykey_core::eval::ReportRow]| rows.iter().map(|r| r.signed_distance_s).collect::<Vec<_>>();
    check(dists(&lecture) == [33, 13, 48, 1].map(Some), || format!("lecture distances {:?}", dists(&lecture)))?;
    check(dists(&howto) == [45, 21, -13, 21].map(Some), || format!("how-to distances {:?}", dists(&howto)))?;
    let detected = lecture.iter().chain(&howto).filter(|r| r.detected).count();
    check(detected == 8, || format!("pooled detection {detected}/8"))?;
    within(elapsed, Duration::from_millis(1), "matching")?;
    Ok(format!("[33,13,48,1] and [45,21,-13,21], 8/8 detected in {elapsed:?}"))
}

/// 2. Thumbnail is the highest peak.
fn thumbnail_selection() -> Outcome {
    let start = Instant::now();
    let lecture = select_thumbnail(&rank_peaks(&peaks(&[73, 158, 398, 555], &[10.0, 10.0, 9.0, 13.0])));
    let howto = select_thumbnail(&rank_peaks(&peaks(&[150, 251, 361, 496], &[16.0, 8.0, 3.0, 7.0])));
    let elapsed = start.elapsed();
    let (lecture, howto) = (lecture.map_err(|e| e.to_string())?, howto.map_err(|e| e.to_string())?);
    check(lecture.time_s == 555, || format!("lecture thumbnail {}", lecture.time_s))?;
    check(howto.time_s == 150, || format!("how-to thumbnail {}", howto.time_s))?;
    within(elapsed, Duration::from_millis(1), "selection")?;
    Ok(format!("555 and 150 in {elapsed:?}"))
}

/// Maximal equal runs strictly above both neighbours, reported at the run middle.
fn brute_force_peaks(cells: &[f64]) -> Vec<(u32, f64)> {
    let mut out = Vec::new();
    let mut a = 0;
    while a < cells.len() {
        let mut b = a;
        while b + 1 < cells.len() && cells[b + 1] == cells[a] {
            b += 1;
        }
        if a > 0 && b + 1 < cells.len() && cells[a - 1] < cells[a] && cells[b + 1] < cells[b] && cells[a] > 0.0 {
            out.push((((a + b) / 2) as u32, cells[a]));
        }
        a = b + 1;
    }
    out
}

/// 3. Peak finder equals the brute-force scan.
fn peak_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    let mut compare = |cells: &[f64]| {
        let got: Vec<(u32, f64)> =
            find_peaks_in(cells, 0.0).expect("length >= 3").iter().map(|p| (p.time_s, p.value)).collect();
        if got != brute_force_peaks(cells) {
            mismatches += 1;
        }
        checked += 1;
    };
    for len in 3..=12u32 {
        let mut cells = vec![0.0; len as usize];
        for mut code in 0..3usize.pow(len) {
            for c in cells.iter_mut() {
                *c = (code % 3) as f64;
                code /= 3;
            }
            compare(&cells);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let len = rng.random_range(3..=600);
        let levels = rng.random_range(2..50);
        let cells: Vec<f64> = (0..len).map(|_| rng.random_range(0..levels) as f64).collect();
        compare(&cells);
    }
    let elapsed = start.elapsed();
    check(mismatches == 0, || format!("{mismatches} mismatches out of {checked}"))?;
    within(elapsed, Duration::from_secs(10), "oracle sweep")?;
    Ok(format!("{checked} series, 0 mismatches in {elapsed:?}"))
}

fn epoch_event(id: usize, action: Action, cue: f64) -> InteractionEvent {
    InteractionEvent {
        event_id: format!("e{id}"),
        video_id: "v".into(),
        user_id: "u".into(),
        session_id: "s".into(),
        action,
        cue_time_s: cue,
        wall_time: Default::default(),
    }
}

/// 4. Raw series mass equals the sum of clamped replay spans.
fn series_mass() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let start = Instant::now();
    for set in 0..1000 {
        let duration = rng.random_range(1..=900u32);
        let n = rng.random_range(0..200);
        let events: Vec<_> = (0..n)
            .map(|i| epoch_event(i, Action::ALL[rng.random_range(0..4)], rng.random_range(0.0..=f64::from(duration))))
            .collect();
        let series = build_replay_series(&events, &VideoMeta::new("v", duration)).map_err(|e| e.to_string())?;
        let expected: f64 = events
            .iter()
            .filter(|e| e.action == Action::SeekBack30)
            .map(|e| e.cue_time_s.floor().min(30.0))
            .sum();
        check(series.total() == expected, || format!("set {set}: mass {} != {expected}", series.total()))?;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(1), "1000 event sets")?;
    Ok(format!("1000 sets exact in {elapsed:?}"))
}

/// 5. Simulated cohort on the lecture truth.
fn simulated_experiment() -> Outcome {
    let truth = GroundTruth::load(&fixture("lecture_a.truth.json")).map_err(|e| e.to_string())?;
    let run = |seed: u64| -> Result<(f64, Duration), String> {
        let start = Instant::now();
        let log = simulate_sessions(&SimulationConfig::for_truth(&truth, DEFAULT_COHORT, seed)).map_err(|e| e.to_string())?;
        let report = evaluate_events(&log, &truth, None, Some(60), DEFAULT_TOLERANCE_S, 0.0).map_err(|e| e.to_string())?;
        Ok((report.detection_rate, start.elapsed()))
    };
    let (rate42, t42) = run(42)?;
    check(rate42 == 1.0, || format!("seed 42 detection {rate42}"))?;
    within(t42, Duration::from_secs(2), "seed 42 run")?;

    let mut total = 0.0;
    let mut slowest = Duration::ZERO;
    for seed in 1..=20 {
        let (rate, t) = run(seed)?;
        within(t, Duration::from_secs(2), &format!("seed {seed} run"))?;
        total += rate;
        slowest = slowest.max(t);
    }
    let mean = total / 20.0;
    check(mean >= 0.95, || format!("mean detection over seeds 1..=20 is {mean}"))?;
    Ok(format!("seed 42: 1.0; mean over 20 seeds {mean:.3}; slowest run {slowest:?}"))
}

fn pipeline_outputs(dir: &std::path::Path) -> Result<Vec<Vec<u8>>, String> {
    let truth = fixture("lecture_a.truth.json");
    let log = dir.join("log.jsonl");
    let store = dir.join("store");
    let json = dir.join("report.json");
    let steps: Vec<Vec<&str>> = vec![
        vec!["simulate", "--truth", path_str(&truth), "--users", "23", "--seed", "42", "--out", path_str(&log)],
        vec!["ingest", "--log", path_str(&log), "--store", path_str(&store), "--duration", "600", "--genre", "lecture"],
        vec!["evaluate", "--store", path_str(&store), "--truth", path_str(&truth), "--out", path_str(&json)],
        vec!["evaluate", "--store", path_str(&store), "--truth", path_str(&truth), "--format", "table"],
    ];
    let mut outputs = Vec::new();
    for args in steps {
        let out = replaykey(&args);
        if !out.status.success() {
            return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        outputs.push(out.stdout);
    }
    outputs.push(fs::read(&log).map_err(|e| e.to_string())?);
    outputs.push(fs::read(&json).map_err(|e| e.to_string())?);
    outputs.push(fs::read(store.join("lecture-a").join("events.jsonl")).map_err(|e| e.to_string())?);
    Ok(outputs)
}

/// 6. Two identical CLI pipelines give identical bytes.
fn pipeline_determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = pipeline_outputs(a.path())?;
    let second = pipeline_outputs(b.path())?;
    let names = ["simulate stdout", "ingest summary", "evaluate stdout", "evaluate table", "event log", "report json", "stored log"];
    for ((x, y), name) in first.iter().zip(&second).zip(names) {
        check(x == y, || format!("{name} differs between runs"))?;
    }
    let bytes: usize = first.iter().map(Vec::len).sum();
    Ok(format!("{} artifacts, {bytes} bytes identical", first.len()))
}

/// 7. Acknowledged events survive SIGKILL.
fn service_durability() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = dir.path().join("store");
    let truth = GroundTruth::load(&fixture("lecture_a.truth.json")).map_err(|e| e.to_string())?;
    let log = simulate_sessions(&SimulationConfig::for_truth(&truth, DEFAULT_COHORT, 42)).map_err(|e| e.to_string())?;
    let body = format!("[{}]", log.iter().map(serialize_event).collect::<Vec<_>>().join(","));
    let client = reqwest::blocking::Client::new();
    let err = |e: reqwest::Error| e.to_string();

    let server = Server::start(&store);
    let put = client
        .put(server.url("/api/v1/videos/lecture-a"))
        .body(r#"{"duration_s":600,"genre":"lecture"}"#)
        .send()
        .map_err(err)?;
    check(put.status().as_u16() == 201, || format!("register returned {}", put.status()))?;
    let post = client.post(server.url("/api/v1/events")).body(body).send().map_err(err)?;
    check(post.status().as_u16() == 202, || format!("post returned {}", post.status()))?;
    let ack: serde_json::Value = post.json().map_err(err)?;
    check(ack["accepted"] == log.len(), || format!("ack {ack}"))?;
    let before = client.get(server.url("/api/v1/videos/lecture-a/keyframes")).send().map_err(err)?;
    check(before.status().is_success(), || format!("keyframes returned {}", before.status()))?;
    let before = before.text().map_err(err)?;
    server.kill();

    let server = Server::start(&store);
    let after = client.get(server.url("/api/v1/videos/lecture-a/keyframes")).send().map_err(err)?.text().map_err(err)?;
    drop(server);
    let elapsed = start.elapsed();
    check(before == after, || format!("keyframes changed across restart:\n{before}\nvs\n{after}"))?;
    within(elapsed, Duration::from_secs(5), "kill/restart cycle")?;
    Ok(format!("{} events, identical keyframes after kill and restart in {elapsed:?}", log.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("AC1 reference distance reconstruction", reference_distances),
        ("AC2 thumbnail selection", thumbnail_selection),
        ("AC3 peak-finder oracle equivalence", peak_oracle_equivalence),
        ("AC4 series mass invariant", series_mass),
        ("AC5 end-to-end simulated experiment", simulated_experiment),
        ("AC6 pipeline determinism", pipeline_determinism),
        ("AC7 service durability", service_durability),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
