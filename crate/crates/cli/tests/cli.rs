mod common;

use std::fs;

use common::{affistack, run_ok, s, small_config, Fixture};

fn fixture() -> Fixture {
    Fixture::new(&small_config(), &["E", "EW"], &["LinReg"], &["VvS"], &["101"])
}

#[test]
fn filter_poses_writes_tables_and_is_reproducible() {
    let f = fixture();
    let out = f.path().join("out");
    let cfg = f.config();
    let args = ["filter-poses", "--config", s(&cfg), "--out", s(&out)];
    run_ok(&args);
    let table = out.join("filters").join("scores_VvS_3.0.tsv");
    let first = fs::read(&table).unwrap();
    assert!(out.join("filters").join("scores_VvS_3.0.tsv.manifest.json").exists());
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.lines().count(), 1 + 80);
    run_ok(&args);
    assert_eq!(fs::read(&table).unwrap(), first);
}

#[test]
fn failed_docking_gets_sentinel_row() {
    let f = fixture();
    fs::write(f.path().join("data/poses/s0000_vinardo.sdf"), "").unwrap();
    let out = f.path().join("out");
    run_ok(&["filter-poses", "--config", s(&f.config()), "--out", s(&out)]);
    let text = fs::read_to_string(out.join("filters/scores_VvS_3.0.tsv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split('\t').collect();
    let col = header.iter().position(|h| *h == "rmsd").expect("rmsd column");
    let row = text.lines().find(|l| l.starts_with("s0000\t")).unwrap();
    assert_eq!(row.split('\t').nth(col).unwrap(), "100");
}

#[test]
fn unreadable_pose_file_is_a_data_error() {
    let f = fixture();
    fs::write(f.path().join("data/poses/s0001_smina.sdf"), "garbage\n$$$$\n").unwrap();
    let out = f.path().join("out");
    let res = affistack(&["filter-poses", "--config", s(&f.config()), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    let errors = fs::read_to_string(out.join("filters/errors.tsv")).unwrap();
    assert!(errors.lines().any(|l| l.starts_with("s0001\t")));
    assert!(out.join("filters/scores_VvS_3.0.tsv").exists());
}

#[test]
fn train_writes_one_model_per_cell_and_resumes() {
    let f = fixture();
    let out = f.path().join("out");
    let cfg = f.config();
    let args = ["train", "--config", s(&cfg), "--out", s(&out)];
    let stdout = run_ok(&args);
    assert!(stdout.contains("trained 2 model(s), reused 0"), "{stdout}");
    let e = out.join("models/E_VvS_101.0_LinReg.json");
    let ew = out.join("models/EW_VvS_101.0_LinReg.json");
    assert!(e.exists() && ew.exists());
    let manifest = fs::read_to_string(out.join("models/E_VvS_101.0_LinReg.json.manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 1701"));

    // Simulate an interrupted run: one model lost, the other kept.
    let kept = fs::metadata(&e).unwrap().modified().unwrap();
    fs::remove_file(&ew).unwrap();
    let stdout = run_ok(&args);
    assert!(stdout.contains("trained 1 model(s), reused 1"), "{stdout}");
    assert_eq!(fs::metadata(&e).unwrap().modified().unwrap(), kept);

    // A tampered model is retrained.
    fs::write(&e, "{}").unwrap();
    let stdout = run_ok(&args);
    assert!(stdout.contains("trained 1 model(s), reused 1"), "{stdout}");

    // A different seed invalidates every cell.
    let stdout = run_ok(&["train", "--config", s(&f.config()), "--out", s(&out), "--seed", "7"]);
    assert!(stdout.contains("trained 2 model(s), reused 0"), "{stdout}");
}

#[test]
fn matrix_narrowing_selects_cells() {
    let f = fixture();
    let out = f.path().join("out");
    let stdout = run_ok(&["train", "--config", s(&f.config()), "--out", s(&out), "--group", "EW"]);
    assert!(stdout.contains("trained 1 model(s)"), "{stdout}");
    assert!(!out.join("models/E_VvS_101.0_LinReg.json").exists());
}

#[test]
fn predict_evaluate_and_report() {
    let f = fixture();
    let out = f.path().join("out");
    run_ok(&["train", "--config", s(&f.config()), "--out", s(&out)]);
    let model = out.join("models/E_VvS_101.0_LinReg.json");
    run_ok(&["predict", "--config", s(&f.config()), "--out", s(&out), "--model", s(&model)]);
    let pred = out.join("predictions/E_VvS_101.0_LinReg_CORESET.tsv");
    let text = fs::read_to_string(&pred).unwrap();
    assert_eq!(text.lines().next(), Some("complex_id\tprediction"));
    assert_eq!(text.lines().count(), 21);

    run_ok(&[
        "evaluate",
        "--out",
        s(&out),
        "--pred",
        s(&pred),
        "--truth",
        s(&f.path().join("data/labels.tsv")),
    ]);
    let eval: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("evaluation.json")).unwrap()).unwrap();
    assert_eq!(eval["overall"]["n"], 20);

    run_ok(&["report", "--config", s(&f.config()), "--out", s(&out)]);
    let summary = fs::read_to_string(out.join("reports/summary_CORESET.tsv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("reports/report_CORESET.json")).unwrap()).unwrap();
    assert!(report["EW_VvS_101.0_LinReg"]["by_mw"].is_object());
}

#[test]
fn evaluate_identity_gives_perfect_scores() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.tsv");
    let truth = dir.path().join("truth.tsv");
    fs::write(&pred, "complex_id\tprediction\na\t-3\nb\t-5\nc\t-9.5\n").unwrap();
    fs::write(&truth, "complex_id\tln_affinity\na\t-3\nb\t-5\nc\t-9.5\n").unwrap();
    let out = dir.path().join("out");
    run_ok(&["evaluate", "--out", s(&out), "--pred", s(&pred), "--truth", s(&truth)]);
    let eval: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("evaluation.json")).unwrap()).unwrap();
    assert_eq!(eval["overall"]["pearson"], 1.0);
    assert_eq!(eval["overall"]["rmse"], 0.0);
}

#[test]
fn screen_perfect_ranking_has_full_recall() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.tsv");
    let labels = dir.path().join("labels.tsv");
    let mut p = String::from("ligand_id\tscore\n");
    let mut l = String::from("target\tligand_id\tactive\n");
    for i in 0..20 {
        p.push_str(&format!("L{i}\t{}\n", i as f64 - 30.0));
        l.push_str(&format!("T1\tL{i}\t{}\n", u8::from(i < 6)));
    }
    fs::write(&pred, p).unwrap();
    fs::write(&labels, l).unwrap();
    let out = dir.path().join("out");
    run_ok(&["screen", "--out", s(&out), "--pred", s(&pred), "--labels", s(&labels)]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("screen.json")).unwrap()).unwrap();
    assert_eq!(report[0]["top5_recall"], 1.0);
    assert_eq!(report[0]["precision_at_actives"], 1.0);
    assert!(fs::read_to_string(out.join("screen.tsv")).unwrap().starts_with("target\t"));
}

#[test]
fn missing_molecular_weight_is_named() {
    let f = fixture();
    let out = f.path().join("out");
    run_ok(&["train", "--config", s(&f.config()), "--out", s(&out), "--group", "EW"]);
    let core_id = f
        .dataset
        .complexes
        .iter()
        .find(|c| c.partition.to_string() == "CORESET")
        .map(|c| c.label.complex_id.clone())
        .unwrap();
    fs::remove_file(f.path().join(format!("data/ligands/{core_id}_ligand.sdf"))).unwrap();
    let model = out.join("models/EW_VvS_101.0_LinReg.json");
    let res = affistack(&["predict", "--config", s(&f.config()), "--out", s(&out), "--model", s(&model)]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("mw"), "{stderr}");
}

#[test]
fn model_schema_mismatch_is_reported() {
    let f = fixture();
    let out = f.path().join("out");
    run_ok(&["train", "--config", s(&f.config()), "--out", s(&out), "--group", "E"]);
    let path = out.join("models/E_VvS_101.0_LinReg.json");
    let mut model: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    model["feature_names"][0] = "renamed".into();
    let bad = f.path().join("bad.json");
    fs::write(&bad, serde_json::to_string(&model).unwrap()).unwrap();
    let res = affistack(&["predict", "--config", s(&f.config()), "--out", s(&out), "--model", s(&bad)]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    // Usage error.
    assert_eq!(affistack(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(affistack(&["--help"]).status.code(), Some(0));
    // Config errors.
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(affistack(&["train", "--config", s(&missing)]).status.code(), Some(1));
    let f = fixture();
    f.write_config("bad.toml", &["E"], &["LinReg"], &["VvS"], &["101"], "unknown_key = 1\n");
    assert_eq!(affistack(&["train", "--config", s(&f.path().join("bad.toml"))]).status.code(), Some(1));
    f.write_config("empty.toml", &[], &["LinReg"], &["VvS"], &["101"], "");
    assert_eq!(affistack(&["train", "--config", s(&f.path().join("empty.toml"))]).status.code(), Some(1));
    assert_eq!(
        affistack(&["train", "--config", s(&f.config()), "--group", "NOPE"]).status.code(),
        Some(1)
    );
    // Data error.
    let pred = dir.path().join("pred.tsv");
    fs::write(&pred, "complex_id\tprediction\nx\tnot-a-number\n").unwrap();
    let res = affistack(&["evaluate", "--out", s(dir.path()), "--pred", s(&pred), "--truth", s(&pred)]);
    assert_eq!(res.status.code(), Some(2));
}
