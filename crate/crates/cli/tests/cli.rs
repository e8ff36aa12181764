use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_traffic-events"))
}

fn ok(cmd: &mut Command) {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn simulate(dir: &Path, preset: &str, noise: &str, seed: &str) {
    ok(bin().current_dir(dir).args([
        "simulate",
        "--preset",
        preset,
        "--noise",
        noise,
        "--seed",
        seed,
        "--tracks",
        "tracks.csv",
        "--annotations",
        "gt.jsonl",
        "--calibration",
        "cal.json",
        "--video-id",
        "v1",
    ]));
}

#[test]
fn simulate_run_score_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "maneuvers", "0", "0");
    ok(bin().current_dir(d).args([
        "run",
        "--tracks",
        "tracks.csv",
        "--calibration",
        "cal.json",
        "--events",
        "events.jsonl",
        "--collisions",
        "alerts.jsonl",
    ]));
    let events = fs::read_to_string(d.join("events.jsonl")).unwrap();
    assert_eq!(events.lines().count(), 10);
    assert!(fs::read_to_string(d.join("alerts.jsonl")).unwrap().is_empty());

    let frames = fs::read_to_string(d.join("tracks.csv"))
        .unwrap()
        .lines()
        .map(|l| l.split(',').next().unwrap().parse::<u64>().unwrap())
        .max()
        .unwrap()
        + 1;
    ok(bin().current_dir(d).args([
        "score",
        "--events",
        "events.jsonl",
        "--annotations",
        "gt.jsonl",
        "--video-id",
        "v1",
        "--num-frames",
        &frames.to_string(),
        "--fps",
        "30",
        "--metrics",
        "metrics.json",
        "--det",
        "det.csv",
    ]));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["mean_p_miss"], 0.0);
    for ty in ["turn_left", "turn_right", "u_turn", "start", "stop"] {
        assert_eq!(metrics["per_type"][ty]["n_false_alarms"], 0, "{ty}");
    }

    ok(bin()
        .current_dir(d)
        .args(["plot", "--det", "det.csv", "--out", "det.svg"]));
    let svg = fs::read_to_string(d.join("det.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 5);
}

#[test]
fn head_on_preset_raises_alert() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "head-on", "0", "0");
    let out = bin()
        .current_dir(d)
        .args([
            "run",
            "--tracks",
            "tracks.csv",
            "--calibration",
            "cal.json",
            "--collisions",
            "alerts.jsonl",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let alerts = fs::read_to_string(d.join("alerts.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(alerts.lines().next().unwrap()).unwrap();
    assert_eq!(first["predicted_overlap"], true);
    assert!(first["t_s"].as_f64().unwrap() <= 0.25);
}

#[test]
fn config_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "maneuvers", "0", "0");
    fs::write(d.join("cfg.toml"), "theta_min = 100.0\ntheta_max = 170.0\n").unwrap();
    let out = bin()
        .current_dir(d)
        .args([
            "run",
            "--tracks",
            "tracks.csv",
            "--calibration",
            "cal.json",
            "--config",
            "cfg.toml",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let events = String::from_utf8(out.stdout).unwrap();
    assert!(!events.contains("turn_left") && !events.contains("turn_right"));
    assert!(events.contains("u_turn") && events.contains("\"start\""));
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "maneuvers", "0", "0");
    fs::write(d.join("bad.toml"), "no_such_key = 1\n").unwrap();
    let out = bin()
        .current_dir(d)
        .args([
            "run",
            "--tracks",
            "tracks.csv",
            "--calibration",
            "cal.json",
            "--config",
            "bad.toml",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());

    fs::write(d.join("broken.csv"), "0,1,car,0.9,10,10,-5,5\n").unwrap();
    let out = bin()
        .current_dir(d)
        .args(["run", "--tracks", "broken.csv", "--calibration", "cal.json"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let out = bin().current_dir(d).args(["simulate"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn scenario_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "maneuvers", "0", "0");
    let cal: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("cal.json")).unwrap()).unwrap();
    let scenario = serde_json::json!({
        "calibration": cal,
        "fps": 30.0,
        "tracks": [{
            "track_id": 7,
            "length_m": 4.5,
            "width_m": 1.8,
            "height_m": 1.5,
            "waypoints": [
                {"t_s": 0.0, "x": -5.0, "y": 25.0},
                {"t_s": 2.0, "x": 5.0, "y": 25.0}
            ]
        }]
    });
    fs::write(d.join("scene.json"), scenario.to_string()).unwrap();
    let out = bin()
        .current_dir(d)
        .args(["simulate", "--scenario", "scene.json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 61);
    assert!(csv.lines().all(|l| l.split(',').nth(1) == Some("7")));
}
