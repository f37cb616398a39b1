use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn manifest() -> PathBuf {
    root().join("../core/fixtures/sample_manifest.json")
}

fn fixtures() -> PathBuf {
    root().join("fixtures/sample_llm.jsonl")
}

fn storycut(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_storycut"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("HIVE_LLM_API_KEY")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn edit_writes_plans_and_a_run_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = storycut(
        &[
            "edit",
            "--manifest",
            p(&manifest()),
            "--mock-fixtures",
            p(&fixtures()),
            "--k",
            "2",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("2 clips, 20 windows, 20 plans"));
    assert!(dir.path().join("plan-0020.json").exists());
    assert!(dir.path().join("scored_manifest.json").exists());
    let log = std::fs::read_to_string(dir.path().join("run_log.jsonl")).unwrap();
    assert!(log.lines().count() > 2);
}

#[test]
fn stale_plans_are_cleared() {
    let dir = tempfile::tempdir().unwrap();
    let (m, f) = (manifest(), fixtures());
    let args = ["edit", "--manifest", p(&m), "--mock-fixtures", p(&f)];
    assert!(storycut(&args, dir.path()).status.success());
    let mut k1 = args.to_vec();
    k1.extend(["--k", "1"]);
    assert!(storycut(&k1, dir.path()).status.success());
    assert!(dir.path().join("plan-0016.json").exists());
    assert!(!dir.path().join("plan-0017.json").exists());
}

#[test]
fn ablations_run_from_the_shipped_fixtures() {
    for flag in ["--no-highlight", "--no-boundary", "--no-pruning"] {
        let dir = tempfile::tempdir().unwrap();
        let out = storycut(
            &[
                "edit",
                "--manifest",
                p(&manifest()),
                "--mock-fixtures",
                p(&fixtures()),
                flag,
            ],
            dir.path(),
        );
        assert!(
            out.status.success(),
            "{flag}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn seed_log_is_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let seed = dir.path().join("seed.jsonl");
    let out = storycut(
        &[
            "edit",
            "--manifest",
            p(&manifest()),
            "--mock-fixtures",
            p(&fixtures()),
            "--k",
            "1",
            "--seed-log",
            p(&seed),
        ],
        &dir.path().join("a"),
    );
    assert!(out.status.success());
    let out = storycut(
        &[
            "edit",
            "--manifest",
            p(&manifest()),
            "--mock-fixtures",
            p(&seed),
            "--k",
            "1",
        ],
        &dir.path().join("b"),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        std::fs::read(dir.path().join("a/plan-0007.json")).unwrap(),
        std::fs::read(dir.path().join("b/plan-0007.json")).unwrap()
    );
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();

    // No provider configured.
    let r = storycut(&["edit", "--manifest", p(&manifest())], out);
    assert_eq!(r.status.code(), Some(1));

    // Remote provider without its key.
    let config = out.join("run.json");
    std::fs::write(
        &config,
        r#"{"llm":{"endpoint":"http://127.0.0.1:9/v1/chat"}}"#,
    )
    .unwrap();
    let r = storycut(
        &["--config", p(&config), "edit", "--manifest", p(&manifest())],
        out,
    );
    assert_eq!(r.status.code(), Some(1));

    // Manifest that fails the schema.
    let bad = out.join("bad.json");
    std::fs::write(
        &bad,
        r#"{"format_version":1,"title":"x","audience":"female","episodes":[]}"#,
    )
    .unwrap();
    let r = storycut(
        &[
            "edit",
            "--manifest",
            p(&bad),
            "--mock-fixtures",
            p(&fixtures()),
        ],
        out,
    );
    assert_eq!(
        r.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );

    // Fixture file without the needed reply.
    let empty = out.join("empty.json");
    std::fs::write(&empty, "{}").unwrap();
    let r = storycut(
        &[
            "edit",
            "--manifest",
            p(&manifest()),
            "--mock-fixtures",
            p(&empty),
        ],
        out,
    );
    assert_eq!(r.status.code(), Some(3));
    assert!(out.join("run_log.jsonl").exists());

    // Every scene scored zero.
    let zero = out.join("zero.jsonl");
    let replies: String = std::fs::read_to_string(fixtures())
        .unwrap()
        .lines()
        .map(|l| {
            l.replace(r#"\"score\":2"#, r#"\"score\":0"#)
                .replace(r#"\"score\":3"#, r#"\"score\":0"#)
                .replace(r#"\"score\":4"#, r#"\"score\":0"#)
                + "\n"
        })
        .collect();
    std::fs::write(&zero, replies).unwrap();
    let r = storycut(
        &[
            "edit",
            "--manifest",
            p(&manifest()),
            "--mock-fixtures",
            p(&zero),
        ],
        out,
    );
    assert_eq!(
        r.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );

    // Unknown argument.
    let r = storycut(&["edit", "--bogus"], out);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn metrics_on_identical_plans() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert!(storycut(
        &[
            "edit",
            "--manifest",
            p(&manifest()),
            "--mock-fixtures",
            p(&fixtures())
        ],
        out
    )
    .status
    .success());
    let plan = out.join("plan-0001.json");
    let logs = out.join("logs.jsonl");
    std::fs::write(
        &logs,
        concat!(
            r#"{"viewer_id":"v1","plan_id":"a","normal_play_ms":93000,"total_duration_ms":100000,"interruption_count":9,"hooked":true,"suspense_felt":false}"#,
            "\n",
            r#"{"viewer_id":"v2","plan_id":"a","normal_play_ms":100000,"total_duration_ms":100000,"interruption_count":4,"hooked":false,"suspense_felt":true}"#,
            "\n"
        ),
    )
    .unwrap();
    let r = storycut(
        &[
            "metrics",
            "--plan",
            p(&plan),
            p(&plan),
            "--logs",
            p(&logs),
            "--json",
        ],
        out,
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let report: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(report["diversity"], 0.0);
    assert_eq!(report["n_viewers"], 2);
    // Per-log VEI: 0.93 * 10 and 1.0 * 20, averaged within the one plan.
    assert!((report["vei"].as_f64().unwrap() - (9.3 + 20.0) / 2.0).abs() < 1e-9);

    let table = storycut(
        &["metrics", "--plan", p(&plan), p(&plan), "--logs", p(&logs)],
        out,
    );
    let text = String::from_utf8_lossy(&table.stdout);
    assert!(text.contains("Diversity") && text.contains("0.00"));
}

#[test]
fn export_writes_cut_list_and_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert!(storycut(
        &[
            "edit",
            "--manifest",
            p(&manifest()),
            "--mock-fixtures",
            p(&fixtures()),
            "--k",
            "1"
        ],
        out
    )
    .status
    .success());
    let r = storycut(
        &[
            "export",
            "--plan",
            p(&out.join("plan-0001.json")),
            "--manifest",
            p(&manifest()),
        ],
        out,
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    for name in ["cutlist.json", "concat.txt", "cut.edl", "commands.txt"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let commands = std::fs::read_to_string(out.join("commands.txt")).unwrap();
    assert!(commands.starts_with("ffmpeg -y -i "));
    assert!(commands.contains("episode-01.mp4"));

    // No source for the episode.
    let r = storycut(&["export", "--plan", p(&out.join("plan-0001.json"))], out);
    assert_eq!(r.status.code(), Some(4));
}

#[test]
fn narration_baseline_from_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let r = storycut(
        &[
            "baseline",
            "--mode",
            "narration",
            "--manifest",
            p(&manifest()),
            "--mock-fixtures",
            p(&fixtures()),
        ],
        dir.path(),
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let plan = std::fs::read_to_string(dir.path().join("baseline-narration.json")).unwrap();
    assert!(plan.contains("end2end_narration"));
}
