//! End-to-end checks of the command-line surface: exit codes, JSON shapes,
//! CSV outputs and the documented roundtrips.

use std::path::PathBuf;

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("treecorr-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["treecorr".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = treecorr::cli::run(&argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).expect("stdout is JSON")
}

#[test]
fn validate_shipped_fixture_exits_zero() {
    let (code, out, _) = run(&[
        "tree",
        "validate",
        fixture("worked_d5.json").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["valid"], Value::Bool(true));
    assert_eq!(v["nodes"], serde_json::json!(15));
}

#[test]
fn validate_broken_tree_exits_one_with_report() {
    let path = scratch("broken.json");
    let text = std::fs::read_to_string(fixture("worked_d5.json")).unwrap();
    let broken = text.replace("01100", "11100");
    std::fs::write(&path, broken).unwrap();
    let (code, out, _) = run(&["tree", "validate", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    let v = json(&out);
    assert_eq!(v["valid"], Value::Bool(false));
    assert!(v["defects"].as_array().unwrap().len() >= 3);
}

#[test]
fn unknown_subcommand_exits_two() {
    let (code, _, err) = run(&["frobnicate"]);
    assert_eq!(code, 2);
    assert!(err.contains("Usage") || err.contains("error"));
}

#[test]
fn build_then_validate_roundtrip() {
    let path = scratch("pairwise4.json");
    let (code, _, _) = run(&[
        "tree",
        "build",
        "--kind",
        "pairwise",
        "--dim",
        "4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (code, _, _) = run(&["tree", "validate", path.to_str().unwrap()]);
    assert_eq!(code, 0);
}

#[test]
fn invert_recovers_forward_generated_covariance() {
    let tree_path = scratch("tree5.json");
    let dec_path = scratch("dec5.json");
    let cov_path = scratch("cov5.json");
    std::fs::write(
        &tree_path,
        std::fs::read_to_string(fixture("worked_d5.json")).unwrap(),
    )
    .unwrap();
    let mut sigma2 = serde_json::Map::new();
    let mut expect = std::collections::BTreeMap::new();
    for (idx, (k, l)) in [(1usize, 1usize), (1, 2), (2, 3), (3, 4), (4, 5), (2, 5)]
        .iter()
        .enumerate()
    {
        let value = format!("{}/4", idx + 1);
        sigma2.insert(format!("{k},{l}"), Value::String(value.clone()));
        expect.insert(format!("{k},{l}"), value);
    }
    std::fs::write(
        &dec_path,
        serde_json::to_string(&serde_json::json!({ "dim": 5, "sigma2": sigma2 })).unwrap(),
    )
    .unwrap();

    let (code, out, _) = run(&[
        "forward",
        "--tree",
        tree_path.to_str().unwrap(),
        "--dec",
        dec_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    std::fs::write(&cov_path, &out).unwrap();

    let (code, out, _) = run(&[
        "invert",
        "--tree",
        tree_path.to_str().unwrap(),
        "--cov",
        cov_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    for (key, want) in expect {
        let got = v["sigma2"][&key].as_str().unwrap();
        assert_eq!(
            treecorr::rational::parse_rat(got).unwrap(),
            treecorr::rational::parse_rat(&want).unwrap(),
            "sigma2[{key}]"
        );
    }
    // untouched pairs invert to zero
    assert_eq!(v["sigma2"]["1,4"], Value::String("0".into()));
    assert_eq!(v["feasible"], Value::Bool(true));
    assert_eq!(v["feasibility"]["poisson"]["feasible"], Value::Bool(true));
}

#[test]
fn construct_sample_and_order_check_flow() {
    let tree_path = scratch("pairwise2.json");
    let cov_path = scratch("cov2.json");
    let model_x = scratch("x.json");
    let model_y = scratch("y.json");
    run(&[
        "tree",
        "build",
        "--kind",
        "pairwise",
        "--dim",
        "2",
        "--out",
        tree_path.to_str().unwrap(),
    ]);
    std::fs::write(
        &cov_path,
        r#"{ "dim": 2, "matrix": [["2","1"],["1","2"]] }"#,
    )
    .unwrap();

    // poisson construction: unit intensity everywhere
    let (code, _, _) = run(&[
        "construct",
        "--tree",
        tree_path.to_str().unwrap(),
        "--cov",
        cov_path.to_str().unwrap(),
        "--family",
        "poisson",
        "--out",
        model_y.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&model_y).unwrap()).unwrap();
    assert_eq!(doc["components"]["1,2"], Value::String("1".into()));

    // a less dependent model with the same margins
    std::fs::write(
        &cov_path,
        r#"{ "dim": 2, "matrix": [["2","0"],["0","2"]] }"#,
    )
    .unwrap();
    let (code, _, _) = run(&[
        "construct",
        "--tree",
        tree_path.to_str().unwrap(),
        "--cov",
        cov_path.to_str().unwrap(),
        "--family",
        "poisson",
        "--out",
        model_x.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    // ordering verdicts and exit codes
    let (code, out, _) = run(&[
        "order",
        "check",
        "--relation",
        "sm",
        "--x",
        model_x.to_str().unwrap(),
        "--y",
        model_y.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["holds"], Value::String("yes".into()));
    let (code, out, _) = run(&[
        "order",
        "check",
        "--relation",
        "sm",
        "--x",
        model_y.to_str().unwrap(),
        "--y",
        model_x.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert_eq!(json(&out)["holds"], Value::String("no".into()));
    let (code, out, _) = run(&[
        "order",
        "check",
        "--relation",
        "cx",
        "--x",
        model_x.to_str().unwrap(),
        "--y",
        model_y.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    let v = json(&out);
    assert_eq!(
        v["evidence"]["witness"]["kind"],
        Value::String("convex_function".into())
    );

    // sampling determinism and CSV shape
    let (code, csv_a, _) = run(&[
        "sample",
        "--model",
        model_y.to_str().unwrap(),
        "--n",
        "50",
        "--seed",
        "7",
    ]);
    assert_eq!(code, 0);
    let (_, csv_b, _) = run(&[
        "sample",
        "--model",
        model_y.to_str().unwrap(),
        "--n",
        "50",
        "--seed",
        "7",
    ]);
    assert_eq!(csv_a, csv_b, "same seed, identical output");
    let mut lines = csv_a.lines();
    assert_eq!(lines.next(), Some("X1,X2"));
    assert_eq!(lines.count(), 50);

    // the grid oracle agrees and exits accordingly
    let (code, out, _) = run(&[
        "order",
        "oracle",
        "--x",
        model_x.to_str().unwrap(),
        "--y",
        model_y.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["verdict"], Value::String("certified".into()));
    let (code, out, _) = run(&[
        "order",
        "oracle",
        "--x",
        model_y.to_str().unwrap(),
        "--y",
        model_x.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert_eq!(json(&out)["verdict"], Value::String("violated".into()));
}

#[test]
fn model_json_roundtrips_through_cli_outputs() {
    // outputs are accepted back as inputs where typed
    let tree_path = scratch("nested3.json");
    let cov_path = scratch("cov3.json");
    let model_path = scratch("model3.json");
    run(&[
        "tree",
        "build",
        "--kind",
        "prior",
        "--dim",
        "3",
        "--out",
        tree_path.to_str().unwrap(),
    ]);
    std::fs::write(
        &cov_path,
        r#"{ "dim": 3, "matrix": [["2","1","1"],["1","3","1"],["1","1","2"]] }"#,
    )
    .unwrap();
    let (code, _, _) = run(&[
        "construct",
        "--tree",
        tree_path.to_str().unwrap(),
        "--cov",
        cov_path.to_str().unwrap(),
        "--family",
        "binomial",
        "--p",
        "1/2",
        "--out",
        model_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (code, out, _) = run(&[
        "order",
        "check",
        "--relation",
        "sm",
        "--x",
        model_path.to_str().unwrap(),
        "--y",
        model_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "model JSON round-trips: {out}");
}

#[test]
fn coupling_csv_and_battery_csv() {
    let tree_path = scratch("nested4.json");
    let model_path = scratch("bin4.json");
    run(&[
        "tree",
        "build",
        "--kind",
        "prior",
        "--dim",
        "4",
        "--out",
        tree_path.to_str().unwrap(),
    ]);
    // counts 1 everywhere: write a model document by constructing from its
    // own forward covariance
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&tree_path).unwrap()).unwrap();
    let mut components = serde_json::Map::new();
    for k in 1..=4 {
        for l in k..=4 {
            components.insert(format!("{k},{l}"), Value::String("1".into()));
        }
    }
    std::fs::write(
        &model_path,
        serde_json::to_string(&serde_json::json!({
            "family": "binomial",
            "tree": doc,
            "params": { "p": "1/2" },
            "components": components,
        }))
        .unwrap(),
    )
    .unwrap();

    let (code, csv, _) = run(&[
        "order",
        "couple",
        "--x",
        model_path.to_str().unwrap(),
        "--pair",
        "3,4",
        "--n",
        "20",
        "--seed",
        "3",
    ]);
    assert_eq!(code, 0, "{csv}");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("XA1,XA2,XA3,XA4,XB1,XB2,XB3,XB4"));
    assert_eq!(lines.count(), 20);

    let (code, csv, _) = run(&[
        "order",
        "battery",
        "--x",
        model_path.to_str().unwrap(),
        "--y",
        model_path.to_str().unwrap(),
        "--n",
        "2000",
        "--seed",
        "5",
    ]);
    assert_eq!(code, 0);
    assert!(csv.starts_with("function,estimate,std_error,flagged"));
}

#[test]
fn levy_decompose_identity() {
    let tree_path = scratch("d5.json");
    let model_path = scratch("poisson5.json");
    std::fs::write(
        &tree_path,
        std::fs::read_to_string(fixture("worked_d5.json")).unwrap(),
    )
    .unwrap();
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&tree_path).unwrap()).unwrap();
    let mut components = serde_json::Map::new();
    for k in 1..=5 {
        for l in k..=5 {
            components.insert(format!("{k},{l}"), Value::String("1/3".into()));
        }
    }
    std::fs::write(
        &model_path,
        serde_json::to_string(&serde_json::json!({
            "family": "poisson",
            "tree": doc,
            "components": components,
        }))
        .unwrap(),
    )
    .unwrap();
    let (code, out, _) = run(&["levy", "decompose", "--model", model_path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["identity"], Value::String("ok".into()));
    assert_eq!(v["means"][2], Value::String("7/3".into()));
}

#[test]
fn float_inputs_warn_in_exact_workflows() {
    let tree_path = scratch("pairwise2b.json");
    let cov_path = scratch("cov2b.json");
    run(&[
        "tree",
        "build",
        "--kind",
        "pairwise",
        "--dim",
        "2",
        "--out",
        tree_path.to_str().unwrap(),
    ]);
    std::fs::write(
        &cov_path,
        r#"{ "dim": 2, "matrix": [[0.5, 0.25], [0.25, 0.5]] }"#,
    )
    .unwrap();
    let (code, _, err) = run(&[
        "invert",
        "--tree",
        tree_path.to_str().unwrap(),
        "--cov",
        cov_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(err.contains("decimal rendering"), "warning expected: {err}");
}
