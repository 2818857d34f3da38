mod common;

use std::fs;

use common::{path_str, tree, wildprep, write_corpus};
use wildprep::dataset::{read_manifest, ClassLabel, Provenance, Split};
use wildprep::pipeline::{MANIFEST_FILE, RUN_LOCK_FILE};

#[test]
fn run_all_on_thirty_images() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let counts = write_corpus(src.path(), 30, 3, 1);
    let max = *counts.values().max().unwrap();

    let res = wildprep(&[
        "run-all",
        path_str(src.path()),
        path_str(out.path()),
        "--seed",
        "7",
        "--jobs",
        "2",
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );

    let m = read_manifest(out.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.len(), counts.len() * max);
    assert_eq!(m.seed, 7);
    assert_eq!(m.originals().count(), 30);
    for r in &m.records {
        let rel = r.processed_path.as_ref().expect("every record processed");
        assert!(out.path().join(rel).is_file());
        assert_ne!(r.split, Split::Unassigned);
        assert_eq!(r.fold.is_some(), r.split == Split::Train);
    }
    let pngs = tree(out.path())
        .keys()
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .count();
    assert_eq!(pngs, m.len());
    let lock = fs::read_to_string(out.path().join(RUN_LOCK_FILE)).unwrap();
    assert!(lock.contains("seed = 7"));
    assert!(lock.contains(&m.config_digest));
}

#[test]
fn stats_shows_ten_equal_counts() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_corpus(src.path(), 20, 10, 2);
    let manifest = out.path().join("m.jsonl");
    let m = path_str(&manifest);
    assert_eq!(
        wildprep(&["ingest", path_str(src.path()), "-o", m])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(wildprep(&["balance", m, "--force"]).status.code(), Some(0));

    let res = wildprep(&["stats", m]);
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8(res.stdout).unwrap();
    let balanced = read_manifest(&manifest).unwrap();
    let per_class = balanced.len() / 10;
    for class in ClassLabel::ALL {
        let line = text
            .lines()
            .find(|l| l.split_whitespace().nth(1) == Some(class.name()))
            .unwrap_or_else(|| panic!("no line for {class}:\n{text}"));
        assert_eq!(
            line.split_whitespace().nth(2),
            Some(per_class.to_string().as_str()),
            "{line}"
        );
    }
}

#[test]
fn same_command_twice_gives_identical_outputs() {
    let src = tempfile::tempdir().unwrap();
    write_corpus(src.path(), 15, 2, 3);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for out in [&a, &b] {
        let res = wildprep(&[
            "run-all",
            path_str(src.path()),
            path_str(out.path()),
            "--seed",
            "11",
            "--target-size",
            "64",
        ]);
        assert_eq!(
            res.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
    assert_eq!(tree(a.path()), tree(b.path()));
    let stats =
        |dir: &std::path::Path| wildprep(&["stats", path_str(&dir.join(MANIFEST_FILE))]).stdout;
    assert_eq!(stats(a.path()), stats(b.path()));
}

#[test]
fn refuses_to_overwrite_without_force() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_corpus(src.path(), 12, 2, 4);
    let args = [
        "run-all",
        path_str(src.path()),
        path_str(out.path()),
        "--target-size",
        "48",
    ];
    assert_eq!(wildprep(&args).status.code(), Some(0));
    let before = tree(out.path());

    let res = wildprep(&args);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("--force"));
    assert_eq!(tree(out.path()), before);

    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(wildprep(&forced).status.code(), Some(0));
    assert_eq!(tree(out.path()), before);

    let manifest = out.path().join("ingested.jsonl");
    let m = path_str(&manifest);
    assert_eq!(
        wildprep(&["ingest", path_str(src.path()), "-o", m])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        wildprep(&["ingest", path_str(src.path()), "-o", m])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(wildprep(&["split", m]).status.code(), Some(1));
}

#[test]
fn stage_commands_compose() {
    let src = tempfile::tempdir().unwrap();
    let work = tempfile::tempdir().unwrap();
    write_corpus(src.path(), 25, 4, 5);
    let manifest = work.path().join("m.jsonl");
    let m = path_str(&manifest);
    let out = work.path().join("png");
    for args in [
        vec!["ingest", path_str(src.path()), "-o", m],
        vec!["balance", m, "--force"],
        vec!["split", m, "--force"],
        vec!["kfold", m, "--force", "--folds", "2"],
        vec!["segment", m, path_str(&out), "--target-size", "40"],
    ] {
        let res = wildprep(&args);
        assert_eq!(
            res.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
    let done = read_manifest(out.join(MANIFEST_FILE)).unwrap();
    assert!(done.records.iter().all(|r| r.processed_path.is_some()));
    assert!(done
        .records
        .iter()
        .any(|r| r.provenance == Provenance::Synthesized));
    assert!(done.records.iter().filter_map(|r| r.fold).all(|f| f < 2));
    assert!(out.join(RUN_LOCK_FILE).is_file());
}

#[test]
fn missing_source_is_a_partial_failure() {
    let src = tempfile::tempdir().unwrap();
    let work = tempfile::tempdir().unwrap();
    write_corpus(src.path(), 12, 3, 6);
    let manifest = work.path().join("m.jsonl");
    let m = path_str(&manifest);
    assert_eq!(
        wildprep(&["ingest", path_str(src.path()), "-o", m])
            .status
            .code(),
        Some(0)
    );
    let victim = read_manifest(&manifest).unwrap().records[0]
        .source_path
        .clone();
    fs::remove_file(&victim).unwrap();

    let out = work.path().join("png");
    let res = wildprep(&["segment", m, path_str(&out), "--target-size", "32"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("file not found"));
    let done = read_manifest(out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(
        done.records
            .iter()
            .filter(|r| r.processed_path.is_none())
            .count(),
        1
    );
}

#[test]
fn user_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = path_str(dir.path());
    assert_eq!(
        wildprep(&["stats", d, "--no-such-flag"]).status.code(),
        Some(1)
    );
    assert_eq!(wildprep(&[]).status.code(), Some(1));
    assert_eq!(
        wildprep(&["stats", &format!("{d}/absent.jsonl")])
            .status
            .code(),
        Some(1)
    );
    let res = wildprep(&["run-all", d, &format!("{d}/out")]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("no samples"));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "k = \"three\"\n").unwrap();
    assert_eq!(
        wildprep(&["stats", d, "--config", path_str(&cfg)])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(wildprep(&["stats", d, "--k", "0"]).status.code(), Some(1));
    assert_eq!(wildprep(&["--help"]).status.code(), Some(0));
}

#[test]
fn flags_override_config_file() {
    let src = tempfile::tempdir().unwrap();
    let work = tempfile::tempdir().unwrap();
    write_corpus(src.path(), 10, 2, 8);
    let cfg = work.path().join("run.toml");
    fs::write(&cfg, "seed = 5\nk = 2\ntarget_size = 24\nfolds = 2\n").unwrap();

    let a = work.path().join("a");
    let res = wildprep(&[
        "run-all",
        path_str(src.path()),
        path_str(&a),
        "--config",
        path_str(&cfg),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let lock = fs::read_to_string(a.join(RUN_LOCK_FILE)).unwrap();
    assert!(
        lock.contains("seed = 5") && lock.contains("k = 2") && lock.contains("target_size = 24"),
        "{lock}"
    );

    let b = work.path().join("b");
    let res = wildprep(&[
        "run-all",
        path_str(src.path()),
        path_str(&b),
        "--config",
        path_str(&cfg),
        "--k",
        "3",
        "--seed",
        "6",
    ]);
    assert_eq!(res.status.code(), Some(0));
    let lock = fs::read_to_string(b.join(RUN_LOCK_FILE)).unwrap();
    assert!(
        lock.contains("seed = 6") && lock.contains("k = 3") && lock.contains("target_size = 24"),
        "{lock}"
    );
}
