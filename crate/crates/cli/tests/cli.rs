use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn datagrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_datagrid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = datagrid(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A planted table with three categorical groups and three intervals.
fn planted(dir: &TempDir) -> PathBuf {
    let table = dir.path().join("planted.tsv");
    ok(&[
        "gen-synthetic",
        "--var",
        "a:categorical:3:4",
        "--var",
        "x:numerical:3",
        "--noise",
        "0.1",
        "--records",
        "3000",
        "--seed",
        "4",
        "--out",
        s(&table),
    ]);
    table
}

fn train(dir: &TempDir, table: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.path().join(format!("result{}.json", extra.len()));
    let mut args = vec![
        "train",
        s(table),
        "--var",
        "a:categorical",
        "--var",
        "x:numerical",
        "--out",
        s(&out),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

#[test]
fn toy_table_trains_to_the_null_model() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("toy.tsv");
    std::fs::write(&table, "u\tv\na\tx\nb\ty\n").unwrap();
    let out = dir.path().join("toy.json");
    ok(&[
        "train",
        s(&table),
        "--var",
        "u:categorical",
        "--var",
        "v:categorical",
        "--out",
        s(&out),
    ]);
    let doc = json(&out);
    let expected = 4.0 * 2f64.ln() + 2.0 * 3f64.ln();
    assert!((doc["cost"]["total"].as_f64().unwrap() - expected).abs() < 1e-9);
    for p in doc["model"].as_array().unwrap() {
        assert_eq!(p["parts"].as_array().unwrap().len(), 1);
    }
    assert_eq!(doc["format_version"], "datagrid-result/1");
}

#[test]
fn simplify_replays_the_hierarchy() {
    let dir = TempDir::new().unwrap();
    let table = planted(&dir);
    let result = train(&dir, &table, &[]);
    let doc = json(&result);

    let full = dir.path().join("full.json");
    ok(&["simplify", s(&result), "--info-ratio", "1.0", "--out", s(&full)]);
    assert_eq!(json(&full)["partitions"], doc["model"]);
    assert_eq!(json(&full)["step"], 0);

    let coarse = dir.path().join("coarse.json");
    let pareto = dir.path().join("pareto.csv");
    let out = ok(&[
        "simplify",
        s(&result),
        "--info-ratio",
        "0.6",
        "--out",
        s(&coarse),
        "--pareto",
        s(&pareto),
    ]);
    let report = json(&coarse);
    // oracle: the last record still at or above the target
    let records = doc["hierarchy"]["records"].as_array().unwrap();
    let expected_step = records
        .iter()
        .rposition(|r| r["info_ratio_after"].as_f64().unwrap() >= 0.6)
        .map_or(0, |i| i + 1);
    assert_eq!(report["step"].as_u64().unwrap() as usize, expected_step);
    let ir = report["info_ratio"].as_f64().unwrap();
    assert!(ir >= 0.6);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(&format!("information ratio {ir}")), "{stderr}");
    let lines = std::fs::read_to_string(&pareto).unwrap();
    assert_eq!(lines.lines().count(), records.len() + 2);

    let two = dir.path().join("two.json");
    ok(&["simplify", s(&result), "--clusters", "2", "--out", s(&two)]);
    assert_eq!(json(&two)["total_parts"], 2);
    let per = dir.path().join("per.json");
    ok(&["simplify", s(&result), "--per-var", "a=2", "--out", s(&per)]);
    assert_eq!(json(&per)["partitions"][0]["parts"].as_array().unwrap().len(), 2);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let table = planted(&dir);
    let again = dir.path().join("again.tsv");
    ok(&[
        "gen-synthetic",
        "--var",
        "a:categorical:3:4",
        "--var",
        "x:numerical:3",
        "--noise",
        "0.1",
        "--records",
        "3000",
        "--seed",
        "4",
        "--out",
        s(&again),
    ]);
    assert_eq!(std::fs::read(&table).unwrap(), std::fs::read(&again).unwrap());
    let truth = json(Path::new(&format!("{}.truth.json", s(&table))));
    assert_eq!(truth["variables"].as_array().unwrap().len(), 2);

    let a = train(&dir, &table, &["--seed", "3"]);
    let first = std::fs::read(&a).unwrap();
    let b = train(&dir, &table, &["--seed", "3"]);
    assert_eq!(first, std::fs::read(&b).unwrap());
}

#[test]
fn inspection_commands_export_csv_and_json() {
    let dir = TempDir::new().unwrap();
    let table = planted(&dir);
    let result = train(&dir, &table, &[]);

    let out = ok(&[
        "typicality",
        s(&result),
        s(&table),
        "--variable",
        "a",
        "--cluster",
        "0",
        "--top",
        "2",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rank,value,typicality");
    assert_eq!(lines.len(), 3);

    let json_out = dir.path().join("cmi.json");
    let out = ok(&[
        "cmi",
        s(&result),
        s(&table),
        "--row",
        "a",
        "--col",
        "x",
        "--json",
        s(&json_out),
    ]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("a \\ x"));
    let m = json(&json_out);
    assert_eq!(m["kind"], "cmi");
    assert!(m["total_mi"].as_f64().unwrap() > 0.0);

    let freq = dir.path().join("freq.csv");
    ok(&[
        "freq",
        s(&result),
        s(&table),
        "--row",
        "a",
        "--col",
        "x",
        "--out",
        s(&freq),
        "--clusters",
        "4",
    ]);
    let mut total = 0.0;
    for rec in csv::Reader::from_path(&freq).unwrap().records() {
        total += rec
            .unwrap()
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().unwrap())
            .sum::<f64>();
    }
    assert_eq!(total, 3000.0);

    // two variables leave no third one to contrast on
    let out = datagrid(&[
        "contrast",
        s(&result),
        s(&table),
        "--target",
        "a",
        "--part",
        "0",
        "--row",
        "a",
        "--col",
        "x",
    ]);
    assert!(!out.status.success());
}

#[test]
fn three_way_tables_support_contrast_and_embedding() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("three.tsv");
    ok(&[
        "gen-synthetic",
        "--var",
        "a:categorical:2:3",
        "--var",
        "b:categorical:2:3",
        "--var",
        "x:numerical:2",
        "--noise",
        "0.2",
        "--records",
        "4000",
        "--seed",
        "1",
        "--out",
        s(&table),
    ]);
    let result = dir.path().join("three.json");
    ok(&[
        "train",
        s(&table),
        "--var",
        "a:categorical",
        "--var",
        "b:categorical",
        "--var",
        "x:numerical",
        "--embed-matrices",
        "--typicality",
        "--out",
        s(&result),
    ]);
    let doc = json(&result);
    let matrices = doc["matrices"].as_array().unwrap();
    assert!(matrices.iter().any(|m| m["kind"] == "contrast"));
    assert!(matrices.iter().any(|m| m["kind"] == "cmi"));
    assert!(!doc["typicality"].as_array().unwrap().is_empty());

    let out = ok(&[
        "contrast",
        s(&result),
        s(&table),
        "--target",
        "x",
        "--part",
        "1",
        "--row",
        "a",
        "--col",
        "b",
    ]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("a \\ b"));
    let out = datagrid(&["cmi", s(&result), s(&table), "--row", "a", "--col", "b"]);
    assert!(!out.status.success(), "a three-way CMI needs a slice");
    ok(&[
        "cmi",
        s(&result),
        s(&table),
        "--row",
        "a",
        "--col",
        "b",
        "--select",
        "x=0",
    ]);
}

#[test]
fn schema_files_delimiters_and_freezing() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("comma.csv");
    ok(&[
        "gen-synthetic",
        "--var",
        "a:categorical:2:3",
        "--var",
        "x:numerical:2",
        "--var",
        "b:categorical:2:2",
        "--records",
        "1500",
        "--delimiter",
        ",",
        "--out",
        s(&table),
    ]);
    assert!(std::fs::read_to_string(&table).unwrap().starts_with("a,x,b\n"));
    let schema = dir.path().join("schema.json");
    std::fs::write(
        &schema,
        r#"{"variables": [{"name": "a", "kind": "categorical"}, {"name": "x", "kind": "numerical"},
            {"name": "b", "kind": "categorical"}], "delimiter": ","}"#,
    )
    .unwrap();
    let result = dir.path().join("frozen.json");
    ok(&[
        "train",
        s(&table),
        "--config",
        s(&schema),
        "--freeze",
        "b",
        "--out",
        s(&result),
    ]);
    let doc = json(&result);
    assert_eq!(doc["model"][2]["parts"].as_array().unwrap().len(), 1);
    assert_eq!(doc["hierarchy"]["frozen"][0], "b");

    let headless = dir.path().join("headless.csv");
    let text = std::fs::read_to_string(&table).unwrap();
    std::fs::write(&headless, text.split_once('\n').unwrap().1).unwrap();
    let r2 = dir.path().join("headless.json");
    ok(&[
        "train",
        s(&headless),
        "--var",
        "a:categorical",
        "--var",
        "x:numerical",
        "--var",
        "b:categorical",
        "--delimiter",
        ",",
        "--no-header",
        "--out",
        s(&r2),
    ]);
    assert_eq!(json(&r2)["dataset"]["records"], 1500);
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.tsv");
    let out_path = dir.path().join("x.json");
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "train",
            s(&missing),
            "--var",
            "a:categorical",
            "--var",
            "b:numerical",
            "--out",
            s(&out_path),
        ],
        vec![
            "train",
            s(&missing),
            "--var",
            "a:color",
            "--var",
            "b:numerical",
            "--out",
            s(&out_path),
        ],
        vec!["simplify", s(&missing), "--info-ratio", "0.5"],
        vec!["gen-synthetic", "--var", "a:categorical:3", "--out", s(&out_path)],
    ];
    for args in cases {
        let out = datagrid(&args);
        assert!(!out.status.success(), "{args:?}");
        let stderr = String::from_utf8(out.stderr).unwrap();
        assert_eq!(stderr.lines().count(), 1, "{stderr}");
        assert!(stderr.starts_with("datagrid: error:"), "{stderr}");
    }
    let table = planted(&dir);
    let result = train(&dir, &table, &[]);
    for bad in [
        vec!["--info-ratio", "1.5"],
        vec!["--per-var", "a=0"],
        vec!["--clusters", "1"],
    ] {
        let mut args = vec!["simplify", s(&result)];
        args.extend(bad);
        assert!(!datagrid(&args).status.success());
    }
}

/// The example under docs/ is regenerated byte for byte, so a format change
/// shows up here first.
#[test]
fn documented_example_is_reproducible() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples");
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("toy.tsv");
    ok(&[
        "gen-synthetic",
        "--var",
        "color:categorical:2:3",
        "--var",
        "size:numerical:2",
        "--noise",
        "0.2",
        "--records",
        "400",
        "--seed",
        "5",
        "--out",
        s(&table),
    ]);
    assert_eq!(
        std::fs::read(&table).unwrap(),
        std::fs::read(root.join("toy.tsv")).unwrap()
    );
    let out = dir.path().join("result.json");
    ok(&[
        "train",
        s(&table),
        "--var",
        "color:categorical",
        "--var",
        "size:numerical",
        "--vns-rounds",
        "4",
        "--typicality",
        "--embed-matrices",
        "--out",
        s(&out),
    ]);
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        std::fs::read_to_string(root.join("result-v1.json")).unwrap()
    );
}
