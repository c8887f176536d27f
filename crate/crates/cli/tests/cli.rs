use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jointcoref::formats::conll::parse_conll;
use jointcoref::formats::jsonl::read_jsonl;
use jointcoref::{DatasetProfile, Split};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jointcoref"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("a diagnostic line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn row(id: &str, part: u32, i: usize, word: &str, coref: &str) -> String {
    format!("{id}\t{part}\t{i}\t{word}\t-\t-\t-\t-\t-\tspk\t*\t{coref}\n")
}

fn conll_doc(id: &str, part: u32, words: &[(&str, &str)]) -> String {
    let mut s = format!("#begin document ({id}); part {part:03}\n");
    for (i, (w, c)) in words.iter().enumerate() {
        s += &row(id, part, i, w, c);
    }
    s + "\n#end document\n"
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/table2")
}

fn table_number(text: &str, metric: &str, col: usize) -> f64 {
    let line = text.lines().find(|l| l.split_whitespace().next() == Some(metric)).expect(metric);
    let cells: Vec<&str> = line.split_whitespace().collect();
    cells[cells.len() - 1 - col].parse().unwrap()
}

#[test]
fn conll_jsonl_round_trip_and_parts() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let text = conll_doc("bc/cnn/00/x", 0, &[("Ann", "(0)"), ("met", "-"), ("her", "(0)"), ("sister", "(1)")])
        + &conll_doc("bc/cnn/00/x", 1, &[("She", "(2)"), ("left", "-"), ("and", "-"), ("she", "(2)")]);
    fs::write(d.join("in.conll"), &text).unwrap();

    ok(d, &["convert", "--from", "conll", "--to", "jsonl", "--profile", "ontonotes", "in.conll", "mid.jsonl"]);
    ok(d, &["convert", "--from", "jsonl", "--to", "conll", "--profile", "ontonotes", "mid.jsonl", "out.conll"]);

    let profile = DatasetProfile::builtin("ontonotes").unwrap();
    let original = parse_conll(&text, &profile, Split::Train).unwrap();
    let back = parse_conll(&fs::read_to_string(d.join("out.conll")).unwrap(), &profile, Split::Train).unwrap();
    assert_eq!(back.documents, original.documents);

    // The two parts become separately keyed documents.
    let mid = read_jsonl(&d.join("mid.jsonl"), &profile, Split::Train).unwrap();
    let keys: Vec<&str> = mid.documents.iter().map(|doc| doc.doc_key.as_str()).collect();
    assert_eq!(keys, ["bc/cnn/00/x_0", "bc/cnn/00/x_1"]);
    assert_eq!(mid.documents[1].clusters.len(), 1);

    let manifest: Value = serde_json::from_str(&fs::read_to_string(d.join("mid.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "convert");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn bad_profile_path_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("in.conll"), conll_doc("d", 0, &[("a", "-")])).unwrap();
    let out = run(
        dir.path(),
        &["convert", "--from", "conll", "--to", "jsonl", "--profile", "missing/profile.toml", "in.conll", "o.jsonl"],
    );
    assert_eq!(out.status.code(), Some(2));
    let diag = stderr_json(&out);
    assert_eq!(diag["kind"], "data");
    assert!(diag["message"].as_str().unwrap().contains("missing/profile.toml"));
    assert!(!dir.path().join("o.jsonl").exists());
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    for args in [&["frobnicate"][..], &["score", "--gold"][..], &["convert", "--from", "xml"][..]] {
        let out = run(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert_eq!(stderr_json(&out)["kind"], "usage");
    }
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn score_identity_and_running_example() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let gold = conll_doc("d", 0, &[("a", "(0)"), ("b", "(0)"), ("c", "(0)")]);
    let pred = conll_doc("d", 0, &[("a", "(0)"), ("b", "(0)"), ("c", "(1)")]);
    fs::write(d.join("gold.conll"), &gold).unwrap();
    fs::write(d.join("pred.conll"), &pred).unwrap();

    let same: Value = serde_json::from_str(&ok(
        d,
        &["score", "--gold", "gold.conll", "--pred", "gold.conll", "--profile", "preco", "--json"],
    ))
    .unwrap();
    assert_eq!(same["task"], "coref");
    for m in ["muc", "b_cubed", "ceaf_e"] {
        assert_eq!(same[m]["f1"], 1.0, "{m}");
    }
    assert_eq!(same["conll_f1"], 1.0);

    let args = ["score", "--gold", "gold.conll", "--pred", "pred.conll", "--profile", "preco"];
    let json: Value = serde_json::from_str(&ok(d, &[&args[..], &["--json"]].concat())).unwrap();
    let expect = (2.0 / 3.0 + 5.0 / 7.0 + 8.0 / 15.0) / 3.0;
    assert!((json["conll_f1"].as_f64().unwrap() - expect).abs() < 1e-12);
    assert!((json["conll_f1"].as_f64().unwrap() - 0.6381).abs() < 1e-4);

    // The table shows exactly the JSON values, rounded.
    let table = ok(d, &args);
    for m in ["muc", "b_cubed", "ceaf_e", "mention"] {
        for (col, field) in ["f1", "precision", "recall"].iter().enumerate() {
            let shown = table_number(&table, m, col);
            assert!((shown - json[m][field].as_f64().unwrap()).abs() <= 5e-5, "{m} {field}");
        }
    }
    assert!((table_number(&table, "conll_f1", 0) - json["conll_f1"].as_f64().unwrap()).abs() <= 5e-5);
}

#[test]
fn score_strips_singletons_under_no_singleton_profile() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let gold = conll_doc("d", 0, &[("a", "(0)"), ("b", "(0)"), ("c", "-")]);
    let pred = conll_doc("d", 0, &[("a", "(0)"), ("b", "(0)"), ("c", "(1)")]);
    fs::write(d.join("gold.conll"), gold).unwrap();
    fs::write(d.join("pred.conll"), pred).unwrap();
    let args = ["score", "--gold", "gold.conll", "--pred", "pred.conll", "--profile", "ontonotes"];
    let json: Value = serde_json::from_str(&ok(d, &[&args[..], &["--json"]].concat())).unwrap();
    assert_eq!(json["predicted_singletons_stripped"], true);
    assert_eq!(json["conll_f1"], 1.0);
    assert!(ok(d, &args).contains("predicted singletons were removed"));

    let split: Value = serde_json::from_str(&ok(
        d,
        &["score", "--gold", "gold.conll", "--pred", "pred.conll", "--profile", "preco", "--split-singletons", "--json"],
    ))
    .unwrap();
    assert_eq!(split["predicted_singletons_stripped"], false);
    assert_eq!(split["singleton_split"]["no_gold_singletons"], true);
    assert_eq!(split["singleton_split"]["non_singleton_conll_f1"], 1.0);
}

#[test]
fn score_pair_and_choice_tasks() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let pred = conll_doc("g", 0, &[("Kim", "(0)"), ("saw", "-"), ("Lee", "-"), ("and", "-"), ("she", "(0)")]);
    fs::write(d.join("pred.conll"), pred).unwrap();
    fs::write(
        d.join("pairs.jsonl"),
        r#"{"doc_key":"g_0","pronoun":[4,4],"candidates":[[0,0],[2,2]],"labels":[true,false]}"#,
    )
    .unwrap();
    fs::write(d.join("choices.jsonl"), r#"{"doc_key":"g_0","pronoun":[4,4],"choices":[[2,2],[0,0]],"gold_choice":1}"#)
        .unwrap();
    let pair: Value = serde_json::from_str(&ok(
        d,
        &["score", "--task", "pair", "--gold", "pairs.jsonl", "--pred", "pred.conll", "--json"],
    ))
    .unwrap();
    assert_eq!(pair["pair"]["f1"], 1.0);
    let choice: Value = serde_json::from_str(&ok(
        d,
        &["score", "--task", "choice", "--gold", "choices.jsonl", "--pred", "pred.conll", "--json"],
    ))
    .unwrap();
    assert_eq!(choice["choice"]["accuracy"], 1.0);
    assert_eq!(choice["choice"]["correct"], 1);
}

#[test]
fn report_rebuilds_published_macros() {
    let dir = TempDir::new().unwrap();
    let text = ok(dir.path(), &["report", "--runs", fixtures().to_str().unwrap()]);
    let line = text.lines().find(|l| l.starts_with("longdoc ") && l.contains(" ON ")).unwrap();
    assert!(line.trim_end().ends_with("59.1"), "{line}");
    let joint = text.lines().find(|l| l.contains("Joint + PS 30K")).unwrap();
    assert!(joint.trim_end().ends_with("70.0"), "{joint}");

    let json: Value =
        serde_json::from_str(&ok(dir.path(), &["report", "--runs", fixtures().to_str().unwrap(), "--json"])).unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    assert_eq!(json["columns"].as_array().unwrap().len(), 8);
    assert!((rows[0]["macro_average"].as_f64().unwrap() - 59.125).abs() < 1e-9);
}

#[test]
fn report_single_run_and_missing_cell() {
    let dir = TempDir::new().unwrap();
    let runs = dir.path().join("runs");
    fs::create_dir(&runs).unwrap();
    fs::write(
        runs.join("a.json"),
        r#"{"model":"m","training":"t","scores":{"ontonotes":80.0,"litbank":60.0,"gap":90.0}}"#,
    )
    .unwrap();
    let one = ok(dir.path(), &["report", "--runs", "runs", "--json"]);
    let one: Value = serde_json::from_str(&one).unwrap();
    assert_eq!(one["rows"].as_array().unwrap().len(), 1);
    assert!((one["rows"][0]["macro_average"].as_f64().unwrap() - 230.0 / 3.0).abs() < 1e-9);

    fs::write(runs.join("b.json"), r#"{"model":"n","training":"t","scores":{"ontonotes":70.0,"gap":80.0}}"#).unwrap();
    let text = ok(dir.path(), &["report", "--runs", "runs"]);
    let n_row = text.lines().find(|l| l.starts_with("n ")).unwrap();
    assert!(n_row.contains('—'), "{n_row}");
    assert!(n_row.trim_end().ends_with("75.0*"), "{n_row}");
    assert!(text.lines().any(|l| l.starts_with("* ") && l.contains("missing LB")), "{text}");
}

/// Small synthetic train/dev pair plus a quick training config.
fn small_setup(d: &Path, steps: usize) {
    ok(d, &["synth", "--docs", "30", "--seed", "1", "train.jsonl"]);
    ok(d, &["synth", "--docs", "10", "--seed", "2", "--split", "dev", "dev.jsonl"]);
    fs::write(
        d.join("train.toml"),
        format!(
            r#"
[model]
hidden = 16
[train]
steps = {steps}
eval_every = 20
lr_encoder = 0.01
lr_rest = 0.001
[mix]
seed = 5
[[mix.corpora]]
path = "train.jsonl"
profile = "train.profile.json"
cap = 20
[[mix.dev]]
path = "dev.jsonl"
profile = "dev.profile.json"
"#
        ),
    )
    .unwrap();
}

#[test]
fn train_is_deterministic_and_predict_honors_gold_mentions() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    small_setup(d, 40);
    ok(d, &["train", "--config", "train.toml", "--checkpoint", "a/ck.json", "--history", "a/h.csv"]);
    ok(d, &["train", "--config", "train.toml", "--checkpoint", "b/ck.json"]);
    assert_eq!(fs::read(d.join("a/ck.json")).unwrap(), fs::read(d.join("b/ck.json")).unwrap());
    let history = fs::read_to_string(d.join("a/h.csv")).unwrap();
    assert!(history.starts_with("step,loss,dev_score"));

    let manifest: Value = serde_json::from_str(&fs::read_to_string(d.join("a/ck.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"]["mix"], 5);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 3);
    // Manifests round-trip through their own serialization.
    let again: Value = serde_json::from_str(&serde_json::to_string(&manifest).unwrap()).unwrap();
    assert_eq!(again, manifest);

    ok(
        d,
        &["predict", "--checkpoint", "a/ck.json", "dev.jsonl", "--profile", "dev.profile.json", "--out", "gm.jsonl", "--gold-mentions"],
    );
    let profile: DatasetProfile = serde_json::from_str(&fs::read_to_string(d.join("dev.profile.json")).unwrap()).unwrap();
    let gold = read_jsonl(&d.join("dev.jsonl"), &profile, Split::Dev).unwrap();
    let pred = read_jsonl(&d.join("gm.jsonl"), &profile, Split::Dev).unwrap();
    for (g, p) in gold.documents.iter().zip(&pred.documents) {
        let mut gm = g.mentions();
        let mut pm = p.mentions();
        gm.sort();
        pm.sort();
        assert_eq!(gm, pm, "{}", g.doc_key);
    }
}

#[test]
fn bad_config_value_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    small_setup(d, 0);
    let out = run(d, &["train", "--config", "train.toml", "--checkpoint", "ck.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("ck.json").exists());
}

#[test]
fn augment_writes_exactly_n_and_applies() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    small_setup(d, 30);
    ok(d, &["synth", "--docs", "30", "--seed", "1", "--no-singletons", "ns.jsonl"]);
    let args = [
        "augment", "ns.jsonl", "--profile", "ns.profile.json", "--split", "train", "--config", "train.toml", "--n", "50",
        "--plan", "plan.jsonl", "--apply", "aug.jsonl",
    ];
    let summary: Value = serde_json::from_str(&ok(d, &args)).unwrap();
    assert_eq!(summary["planned"], 50);
    assert_eq!(fs::read_to_string(d.join("plan.jsonl")).unwrap().lines().filter(|l| !l.trim().is_empty()).count(), 50);

    let profile: DatasetProfile = serde_json::from_str(&fs::read_to_string(d.join("ns.profile.json")).unwrap()).unwrap();
    let base = read_jsonl(&d.join("ns.jsonl"), &profile, Split::Train).unwrap();
    let aug = read_jsonl(&d.join("aug.jsonl"), &profile, Split::Train).unwrap();
    let added: usize = aug.documents.iter().zip(&base.documents).map(|(a, b)| a.clusters.len() - b.clusters.len()).sum();
    assert_eq!(added, 50);
    for (a, b) in aug.documents.iter().zip(&base.documents) {
        assert_eq!(&a.without_singletons(), b);
    }

    // Re-applying the saved plan reproduces the augmented corpus.
    ok(d, &["augment", "ns.jsonl", "--profile", "ns.profile.json", "--from-plan", "plan.jsonl", "--apply", "aug2.jsonl"]);
    assert_eq!(fs::read(d.join("aug.jsonl")).unwrap(), fs::read(d.join("aug2.jsonl")).unwrap());
    assert!(d.join("plan.jsonl.manifest.json").exists());
}

#[test]
fn mix_plan_counts_and_determinism() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--docs", "40", "--seed", "1", "a.jsonl"]);
    ok(d, &["synth", "--docs", "15", "--seed", "2", "b.jsonl"]);
    fs::write(
        d.join("mix.toml"),
        r#"
seed = 9
[[corpora]]
path = "a.jsonl"
profile = "a.profile.json"
cap = 25
[[corpora]]
path = "b.jsonl"
profile = "preco"
cap = "all"
"#,
    )
    .unwrap();
    let summary: Value =
        serde_json::from_str(&ok(d, &["mix-plan", "--config", "mix.toml", "--epochs", "3", "--out", "p1.jsonl"])).unwrap();
    for epoch in summary.as_array().unwrap() {
        assert_eq!(epoch["length"], 40);
        assert_eq!(epoch["counts"]["synthetic"], 25);
        assert_eq!(epoch["counts"]["preco"], 15);
    }
    ok(d, &["mix-plan", "--config", "mix.toml", "--epochs", "3", "--out", "p2.jsonl"]);
    assert_eq!(fs::read(d.join("p1.jsonl")).unwrap(), fs::read(d.join("p2.jsonl")).unwrap());
    ok(d, &["mix-plan", "--config", "mix.toml", "--epochs", "3", "--seed", "10", "--out", "p3.jsonl"]);
    assert_ne!(fs::read(d.join("p1.jsonl")).unwrap(), fs::read(d.join("p3.jsonl")).unwrap());
}

#[test]
fn validate_and_stats() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--docs", "5", "c.jsonl"]);
    let v: Value = serde_json::from_str(&ok(d, &["validate", "c.jsonl", "--profile", "c.profile.json"])).unwrap();
    assert_eq!(v["valid"], true);
    // Singletons violate a profile that does not annotate them.
    let out = run(d, &["validate", "c.jsonl", "--profile", "ontonotes"]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["valid"], false);
    let s: Value = serde_json::from_str(&ok(d, &["stats", "c.jsonl", "--profile", "c.profile.json"])).unwrap();
    assert_eq!(s["stats"]["docs"], 5);
}
