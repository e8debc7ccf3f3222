use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jumptrack::cli::{gt_path, list_scenes, manifest_path, obs_path, pred_path};
use jumptrack::{FrameGrid, ObservationSet, TrackSet};
use tempfile::TempDir;

fn jumptrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jumptrack"))
        .args(args)
        .output()
        .expect("run jumptrack")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_json(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn simulate(dir: &Path, name: &str, config: &str, seed: u64) -> PathBuf {
    let cfg = write_json(dir, &format!("{name}.sim.json"), config);
    let out = dir.join(name);
    let o = jumptrack(&["simulate", "--config", s(&cfg), "--seed", &seed.to_string(), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn track(corpus: &Path, out: &Path, spec: Option<&Path>) -> Output {
    let mut args = vec!["track", "--scenes", s(corpus), "--out", s(out)];
    if let Some(p) = spec {
        args.extend(["--config", s(p)]);
    }
    jumptrack(&args)
}

fn load_gt(corpus: &Path, scene: &str) -> TrackSet {
    let grid = FrameGrid::read_manifest(&manifest_path(corpus, scene)).unwrap();
    TrackSet::read_path(grid, &gt_path(corpus, scene)).unwrap()
}

fn load_pred(corpus: &Path, preds: &Path, scene: &str) -> TrackSet {
    let grid = FrameGrid::read_manifest(&manifest_path(corpus, scene)).unwrap();
    TrackSet::read_path(grid, &pred_path(preds, scene)).unwrap()
}

/// Rows of `metrics.csv` keyed by column name.
fn metrics(dir: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let text = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| header.iter().map(|h| h.to_string()).zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn num(row: &std::collections::HashMap<String, String>, col: &str) -> f64 {
    row[col].parse().unwrap_or_else(|_| panic!("{col} = {:?}", row[col]))
}

#[test]
fn simulate_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"n_scenes": 3, "scenario": {"n_speakers": 1}}"#;
    let a = simulate(tmp.path(), "a", cfg, 7);
    let b = simulate(tmp.path(), "b", cfg, 7);
    let scenes = list_scenes(&a).unwrap();
    assert_eq!(scenes, ["scene_0000", "scene_0001", "scene_0002"]);
    for scene in &scenes {
        for path in [gt_path, obs_path, manifest_path] {
            assert_eq!(fs::read(path(&a, scene)).unwrap(), fs::read(path(&b, scene)).unwrap());
        }
    }
    assert_eq!(fs::read(a.join("corpus.json")).unwrap(), fs::read(b.join("corpus.json")).unwrap());

    let c = simulate(tmp.path(), "c", cfg, 8);
    assert_ne!(fs::read(gt_path(&a, "scene_0000")).unwrap(), fs::read(gt_path(&c, "scene_0000")).unwrap());
}

#[test]
fn three_speaker_corpus_and_lint() {
    let tmp = TempDir::new().unwrap();
    let corpus = simulate(tmp.path(), "c", r#"{"n_scenes": 4, "scenario": {"n_speakers": 3}}"#, 1);
    for scene in list_scenes(&corpus).unwrap() {
        assert_eq!(load_gt(&corpus, &scene).n_tracks(), 3);
    }
    let o = jumptrack(&["lint", "--scenes", s(&corpus)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    // move one active frame of a jump-mode track off its segment position
    let path = gt_path(&corpus, "scene_0002");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let row = lines
        .iter()
        .position(|l| l.starts_with("11,"))
        .expect("frame 11 is active");
    let mut cells: Vec<String> = lines[row].split(',').map(String::from).collect();
    let az: f64 = cells[3].parse().unwrap();
    cells[3] = format!("{:.6}", az + 1.0);
    lines[row] = cells.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let o = jumptrack(&["lint", "--scenes", s(&corpus)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scene_0002"));
}

#[test]
fn oracle_reproduces_noise_free_ground_truth() {
    let tmp = TempDir::new().unwrap();
    let corpus = simulate(
        tmp.path(),
        "c",
        r#"{"n_scenes": 3, "scenario": {"n_speakers": 2},
            "observation": {"angular_noise_sigma_deg": 0, "p_miss": 0, "clutter_rate": 0}}"#,
        3,
    );
    let spec = write_json(tmp.path(), "oracle.json", r#"{"kind": "oracle"}"#);
    let preds = tmp.path().join("p");
    assert!(track(&corpus, &preds, Some(&spec)).status.success());
    for scene in list_scenes(&corpus).unwrap() {
        let gt = load_gt(&corpus, &scene);
        let pred = load_pred(&corpus, &preds, &scene);
        assert_eq!(pred.n_tracks(), gt.n_tracks());
        for (id, track) in gt.tracks() {
            let p = pred.track(&format!("p_{id}")).unwrap();
            assert_eq!(p.keys().collect::<Vec<_>>(), track.keys().collect::<Vec<_>>());
            for (f, d) in track {
                assert!(jumptrack::geometry::angular_distance(d, &p[f]) < 1e-6);
            }
        }
    }

    let out = tmp.path().join("e");
    let o = jumptrack(&["evaluate", "--gt", s(&corpus), "--pred", s(&preds), "--out", s(&out)]);
    assert!(o.status.success());
    for row in metrics(&out) {
        assert_eq!(num(&row, "tsr"), 0.0);
        assert_eq!(num(&row, "mota"), 1.0);
        assert_eq!(num(&row, "ass_a"), 1.0);
        assert!(num(&row, "mean_loc_error_deg") < 1e-5);
    }
}

#[test]
fn pf_with_two_ids_on_three_speakers() {
    let tmp = TempDir::new().unwrap();
    let corpus = simulate(tmp.path(), "c", r#"{"n_scenes": 3, "scenario": {"n_speakers": 3}}"#, 4);
    let spec = write_json(tmp.path(), "pf.json", r#"{"kind": "pf", "k_max": 2, "max_active": 2}"#);
    let preds = tmp.path().join("p");
    let o = track(&corpus, &preds, Some(&spec));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for scene in list_scenes(&corpus).unwrap() {
        let pred = load_pred(&corpus, &preds, &scene);
        assert!((1..=2).contains(&pred.n_tracks()));
        assert!(pred.frames().iter().all(|f| f.len() <= 2));
    }
}

#[test]
fn missing_observations_name_the_scene() {
    let tmp = TempDir::new().unwrap();
    let corpus = simulate(tmp.path(), "c", r#"{"n_scenes": 3}"#, 5);
    fs::remove_file(obs_path(&corpus, "scene_0001")).unwrap();
    let preds = tmp.path().join("p");
    let o = track(&corpus, &preds, None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("scene_0001"), "{err}");
    // the other scenes are still tracked
    assert!(pred_path(&preds, "scene_0000").exists());
    assert!(pred_path(&preds, "scene_0002").exists());
}

#[test]
fn evaluate_identity_predictions() {
    let tmp = TempDir::new().unwrap();
    let corpus = simulate(tmp.path(), "c", r#"{"n_scenes": 2, "scenario": {"n_speakers": 2}}"#, 6);
    let preds = tmp.path().join("p");
    fs::create_dir(&preds).unwrap();
    for scene in list_scenes(&corpus).unwrap() {
        fs::copy(gt_path(&corpus, &scene), pred_path(&preds, &scene)).unwrap();
    }
    let out = tmp.path().join("e");
    let o = jumptrack(&["evaluate", "--gt", s(&corpus), "--pred", s(&preds), "--gate-deg", "5", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let header = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(header.starts_with(
        "scene_id,n_tp,n_fp,n_fn,tsr,tfr,idsw,mota,ospa_mean,mean_loc_error_deg,ass_a,ass_pr,ass_re\n"
    ));
    let rows = metrics(&out);
    assert_eq!(rows.len(), 2);
    for row in &rows {
        for (col, want) in [("tsr", 0.0), ("tfr", 0.0), ("mota", 1.0), ("ass_a", 1.0), ("ass_pr", 1.0), ("ass_re", 1.0)] {
            assert_eq!(num(row, col), want, "{col}");
        }
    }
    let agg: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["n_scenes"], 2);
    assert_eq!(agg["metrics"].as_array().unwrap().len(), 11);
}

#[test]
fn splitter_corpus_halves_recall() {
    let tmp = TempDir::new().unwrap();
    let corpus = simulate(tmp.path(), "c", r#"{"n_scenes": 4}"#, 9);
    let spec = write_json(tmp.path(), "split.json", r#"{"kind": "splitter", "k": 2}"#);
    let preds = tmp.path().join("p");
    assert!(track(&corpus, &preds, Some(&spec)).status.success());
    let out = tmp.path().join("e");
    assert!(jumptrack(&["evaluate", "--gt", s(&corpus), "--pred", s(&preds), "--out", s(&out)]).status.success());
    for row in metrics(&out) {
        let n = load_gt(&corpus, &row["scene_id"]).n_entries() as f64;
        // two pieces of ⌈n/2⌉ and ⌊n/2⌋ frames: Σ nᵢ² / n²
        let (a, b) = ((n / 2.0).ceil(), (n / 2.0).floor());
        let want = (a * a + b * b) / (n * n);
        assert!((num(&row, "ass_re") - want).abs() < 1e-6);
        if n % 2.0 == 0.0 {
            assert!((num(&row, "ass_re") - 0.5).abs() < 1e-12);
        }
        assert_eq!(num(&row, "ass_pr"), 1.0);
    }
}

#[test]
fn merger_on_disjoint_speakers() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("c");
    fs::create_dir(&corpus).unwrap();
    let grid = FrameGrid::new(0.1, 40).unwrap();
    grid.write_manifest(&manifest_path(&corpus, "scene_0000")).unwrap();
    let mut gt = TrackSet::new(grid);
    for f in 0..20 {
        gt.insert("a", f, jumptrack::Direction::from_degrees(30.0, 0.0)).unwrap();
        gt.insert("b", f + 20, jumptrack::Direction::from_degrees(-90.0, 10.0)).unwrap();
    }
    gt.write_path(&gt_path(&corpus, "scene_0000")).unwrap();
    ObservationSet::new(grid, false)
        .write_path(&obs_path(&corpus, "scene_0000"))
        .unwrap();

    let spec = write_json(tmp.path(), "merge.json", r#"{"kind": "merger"}"#);
    let preds = tmp.path().join("p");
    assert!(track(&corpus, &preds, Some(&spec)).status.success());
    let out = tmp.path().join("e");
    assert!(jumptrack(&["evaluate", "--gt", s(&corpus), "--pred", s(&preds), "--out", s(&out)]).status.success());
    let rows = metrics(&out);
    assert_eq!(num(&rows[0], "ass_pr"), 0.5);
    assert_eq!(num(&rows[0], "ass_re"), 1.0);
    assert_eq!(num(&rows[0], "tsr"), 0.0);
}

#[test]
fn sweep_outputs_and_trend_assertion() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_json(
        tmp.path(),
        "sweep.json",
        r#"{"subsets": [{"n_speakers": 1, "n_scenes": 6}],
            "k_max": ["J", "2J", "4J", null],
            "bootstrap": {"replicates": 0}}"#,
    );
    let out = tmp.path().join("s");
    let o = jumptrack(&["sweep", "--config", s(&cfg), "--out", s(&out), "--assert-trends", "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let agg = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    let rows: Vec<Vec<&str>> = agg.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let ass_re: Vec<&Vec<&str>> = rows.iter().filter(|r| r[2] == "ass_re").collect();
    assert_eq!(ass_re.iter().map(|r| r[1]).collect::<Vec<_>>(), ["J", "2J", "4J", "inf"]);
    // zero replicates: plain means, empty std column
    assert!(rows.iter().all(|r| r[4].is_empty()));
    assert!(rows.iter().filter(|r| r[2] == "tsr").all(|r| !r[3].is_empty()));

    let per_scene = fs::read_to_string(out.join("per_scene.csv")).unwrap();
    assert_eq!(per_scene.lines().count(), 1 + 4 * 6);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), rows.len());

    // static speakers never jump, so k_max changes nothing and the trend
    // assertion must fail
    let flat = write_json(
        tmp.path(),
        "flat.json",
        r#"{"subsets": [{"n_speakers": 1, "n_scenes": 3}],
            "scenario": {"mode": "static", "gap_len_s": [0.1, 0.5]},
            "observation": {"angular_noise_sigma_deg": 0, "p_miss": 0, "clutter_rate": 0}}"#,
    );
    let o = jumptrack(&["sweep", "--config", s(&flat), "--out", s(&tmp.path().join("f")), "--assert-trends"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ass_re"));
}

#[test]
fn usage_and_config_errors() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(jumptrack(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(jumptrack(&[]).status.code(), Some(1));
    assert_eq!(jumptrack(&["--help"]).status.code(), Some(0));

    let bad = write_json(tmp.path(), "bad.json", r#"{"n_scenes": 2, "scenario": {"n_speakerz": 2}}"#);
    let o = jumptrack(&["simulate", "--config", s(&bad), "--out", s(&tmp.path().join("x"))]);
    assert_eq!(o.status.code(), Some(1));

    let bad = write_json(tmp.path(), "bad2.json", r#"{"scenario": {"n_positions": 1}}"#);
    let o = jumptrack(&["simulate", "--config", s(&bad), "--out", s(&tmp.path().join("x"))]);
    assert_eq!(o.status.code(), Some(1));

    let o = jumptrack(&["track", "--scenes", s(&tmp.path().join("nowhere")), "--out", s(&tmp.path().join("p"))]);
    assert_eq!(o.status.code(), Some(2));
}
