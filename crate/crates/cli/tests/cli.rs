use std::path::Path;
use std::process::{Command, Output};

use storecost::eval::{baseline_formula, storage_terms, PredictorTable};

fn storecost(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_storecost"))
        .args(args)
        .current_dir(cwd)
        .env_remove("STORECOST_LM_ENDPOINT")
        .env_remove("STORECOST_CACHE_DIR")
        .output()
        .expect("spawn storecost")
}

fn ok(out: &Output) -> &Output {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    ok(&storecost(
        &["verify", "--random-models", "5", "--out", "v.json"],
        dir.path(),
    ));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path().join("v.json"))).unwrap();
    assert_eq!(report["passed"], true);
    assert!(dir.path().join("v.json.manifest.json").exists());
}

#[test]
fn generated_stimuli_match_the_bundled_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let fixture =
        read(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/items_ce_rb.tsv"));
    let mut bodies = Vec::new();
    for _ in 0..2 {
        ok(&storecost(
            &[
                "stimuli",
                "generate",
                "--condition",
                "ce-rb",
                "--out",
                "items.tsv",
            ],
            dir.path(),
        ));
        let text = read(dir.path().join("items.tsv"));
        let (header, body) = text.split_once('\n').unwrap();
        assert!(header.starts_with("# manifest "), "{header}");
        bodies.push(text.clone());
        assert_eq!(body, fixture);
    }
    assert_eq!(bodies[0], bodies[1]);
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn predictor_tsv(n: usize) -> String {
    let text_id = (0..n).map(|r| format!("t{}", r % 5)).collect();
    let word_index = (0..n as i64).map(|r| r / 5 + 1).collect();
    let mut table = PredictorTable::new(text_id, word_index);
    let names: Vec<String> = baseline_formula()
        .into_iter()
        .chain(storage_terms("dlt_stor"))
        .chain(storage_terms("info_stor"))
        .collect();
    let value =
        |r: usize, c: usize| splitmix((r as u64) << 8 | c as u64) as f64 / u64::MAX as f64 - 0.5;
    for (c, name) in names.iter().enumerate() {
        table.set_column(name, (0..n).map(|r| value(r, c)).collect());
    }
    table.rt_target = (0..n)
        .map(|r| 300.0 + 20.0 * value(r, 0) + 5.0 * value(r, 99))
        .collect();
    table.to_tsv()
}

#[test]
fn regression_is_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pred.tsv"), predictor_tsv(600)).unwrap();
    let mut runs = Vec::new();
    for out in ["r1.json", "r2.json"] {
        let args = [
            "--seed", "11", "eval", "regress", "--table", "pred.tsv", "--perms", "500", "--out",
            out,
        ];
        ok(&storecost(&args, dir.path()));
        let mut report: serde_json::Value =
            serde_json::from_str(&read(dir.path().join(out))).unwrap();
        // the manifest id covers the output path, which differs between the runs
        report.as_object_mut().unwrap().remove("manifest");
        runs.push(report);
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0]["results"].as_array().unwrap().len(), 4);
}

#[test]
fn exit_codes_follow_failure_kind() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.txt"), "a b\n").unwrap();
    let usage = storecost(&["storage", "--no-such-flag"], dir.path());
    assert_eq!(usage.status.code(), Some(1));
    let data = storecost(
        &[
            "storage",
            "--input",
            "missing.txt",
            "--joint",
            "bundled:copy",
        ],
        dir.path(),
    );
    assert_eq!(data.status.code(), Some(2));
    let backend = storecost(
        &[
            "storage",
            "--input",
            "s.txt",
            "--backend",
            "server",
            "--lm-endpoint",
            "127.0.0.1:1",
        ],
        dir.path(),
    );
    assert_eq!(backend.status.code(), Some(3));
    let record: serde_json::Value = serde_json::from_slice(&backend.stderr).unwrap();
    assert_eq!(record["error"]["kind"], "backend");
}

#[test]
fn storage_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.txt"), "a a a\nb b b\n").unwrap();
    let args = |out: &'static str| {
        [
            "storage",
            "--input",
            "s.txt",
            "--joint",
            "bundled:copy",
            "--cache-dir",
            "cache",
            "--out",
            out,
        ]
    };
    ok(&storecost(&args("first.jsonl"), dir.path()));
    let entries = || walk(&dir.path().join("cache"));
    let cached = entries();
    assert_eq!(cached.len(), 2);
    // a corrupted value that the second run can only have read from the cache
    let mut entry: serde_json::Value = serde_json::from_str(&read(&cached[0])).unwrap();
    entry["storage"][1] = serde_json::json!(123.0);
    std::fs::write(&cached[0], entry.to_string()).unwrap();
    ok(&storecost(&args("second.jsonl"), dir.path()));
    assert!(read(dir.path().join("second.jsonl")).contains("123"));
    assert!(!read(dir.path().join("first.jsonl")).contains("123"));
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap().flatten() {
        if e.path().is_dir() {
            out.extend(walk(&e.path()));
        } else {
            out.push(e.path());
        }
    }
    out.sort();
    out
}

#[test]
fn printed_config_loads_back_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let first = ok(&storecost(
        &["--seed", "5", "--workers", "2", "config"],
        dir.path(),
    ))
    .stdout
    .clone();
    std::fs::write(dir.path().join("run.toml"), &first).unwrap();
    let second = ok(&storecost(&["--config", "run.toml", "config"], dir.path()))
        .stdout
        .clone();
    assert_eq!(
        String::from_utf8(first).unwrap(),
        String::from_utf8(second).unwrap()
    );
}
