use traffic_events::pipeline::tracks::write_tracks_csv;
use traffic_events::pipeline::{
    collisions_to_jsonl, events_to_jsonl, generate_scenario, parse_tracks, run_pipeline_with, scenes, PipelineConfig,
    RunOptions,
};

fn run(text: &str, parallel: bool) -> (String, String) {
    let config = PipelineConfig::default();
    let points = parse_tracks(text, config.fps).unwrap();
    let out = run_pipeline_with(
        &config,
        &scenes::demo_camera(),
        &points,
        RunOptions {
            parallel,
            ..Default::default()
        },
    )
    .unwrap();
    (events_to_jsonl(&out.events), collisions_to_jsonl(&out.collisions))
}

fn sorted_lines(text: &str) -> Vec<String> {
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    lines.sort();
    lines
}

#[test]
fn concatenated_files_give_the_union() {
    let scene = scenes::maneuver_scene(2.0).unwrap();
    let points = generate_scenario(&scene, 4);
    let (first, second): (Vec<_>, Vec<_>) = points.into_iter().partition(|p| p.track_id <= 5);
    let (a, b) = (write_tracks_csv(&first), write_tracks_csv(&second));

    let (events_a, alerts_a) = run(&a, true);
    let (events_b, alerts_b) = run(&b, true);
    let (events_ab, alerts_ab) = run(&(b.clone() + &a), true);
    assert!(!events_a.is_empty() && !events_b.is_empty());
    assert_eq!(sorted_lines(&events_ab), sorted_lines(&(events_a + &events_b)));
    assert_eq!(sorted_lines(&alerts_ab), sorted_lines(&(alerts_a + &alerts_b)));
}

#[test]
fn replay_is_byte_identical() {
    let scene = scenes::busy_scene(20, 20.0, 2.0).unwrap();
    let text = write_tracks_csv(&generate_scenario(&scene, 8));
    let first = run(&text, true);
    assert!(!first.0.is_empty());
    assert_eq!(first, run(&text, true));
    assert_eq!(first, run(&text, false));
}

#[test]
fn record_order_does_not_matter() {
    let scene = scenes::busy_scene(10, 12.0, 2.0).unwrap();
    let text = write_tracks_csv(&generate_scenario(&scene, 3));
    let reversed: String = text.lines().rev().map(|l| format!("{l}\n")).collect();
    assert_eq!(run(&text, true), run(&reversed, true));
}
