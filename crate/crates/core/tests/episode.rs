use std::fs;
use std::path::Path;
use std::process::Command;

use rftrack::tracker::{checkpoint_path, run_episode, EpisodeConfig, Method, RunOptions};

fn tiny(blocks: usize, train: usize, q: usize) -> EpisodeConfig {
    let mut c = EpisodeConfig::desk();
    c.targets = q;
    c.blocks = blocks;
    c.train_blocks = train;
    c.samples = 4;
    c.diffusion_steps = 10;
    c.vae.latent = 4;
    c.vae.hidden = 16;
    c.ddpm.hidden = 16;
    c.ddpm.time_dim = 8;
    c.cnn.channels = [4, 4, 4];
    c.cnn.dense = 8;
    c.batch_size = 16;
    c.music_grid = 256;
    c
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn smoke_run_writes_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let s = run_episode(tiny(2, 1, 1), 1, tmp.path(), &RunOptions::default()).unwrap();
    assert_eq!(s.blocks, 2);
    assert_eq!(read(tmp.path(), "blocks.jsonl").lines().count(), 2);
    let metrics = read(tmp.path(), "metrics.csv");
    assert!(metrics.starts_with("block,phase,method,angle_rsse,dist_rsse\n"));
    // Block 1 has only the subspace baselines; block 2 has all five methods.
    assert_eq!(metrics.lines().count(), 1 + 2 + 5);
    assert!(read(tmp.path(), "estimates.csv").lines().count() > 1);
    let manifest: serde_json::Value = serde_json::from_str(&read(tmp.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["truth_audit"], 0);
}

#[test]
fn identical_seeds_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    for d in ["a", "b"] {
        run_episode(tiny(30, 10, 2), 9, &tmp.path().join(d), &RunOptions::default()).unwrap();
    }
    for f in ["metrics.csv", "blocks.jsonl", "estimates.csv"] {
        assert_eq!(read(&tmp.path().join("a"), f), read(&tmp.path().join("b"), f), "{f}");
    }
    run_episode(tiny(30, 10, 2), 10, &tmp.path().join("c"), &RunOptions::default()).unwrap();
    assert_ne!(read(&tmp.path().join("a"), "metrics.csv"), read(&tmp.path().join("c"), "metrics.csv"));
}

#[test]
fn resumed_run_matches_straight_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(200, 50, 2);
    let straight = tmp.path().join("straight");
    let split = tmp.path().join("split");
    run_episode(cfg.clone(), 4, &straight, &RunOptions::default()).unwrap();

    let opts = RunOptions {
        checkpoint_every: 100,
        ..RunOptions::default()
    };
    // Rows after the checkpoint are discarded on resume and recomputed.
    run_episode(cfg.clone(), 4, &split, &opts).unwrap();
    let ckpt = checkpoint_path(&split, 100);
    assert!(ckpt.exists());
    let resumed = RunOptions {
        resume: Some(ckpt),
        ..RunOptions::default()
    };
    let s = run_episode(cfg, 4, &split, &resumed).unwrap();
    assert_eq!(s.blocks, 200);
    for f in ["metrics.csv", "blocks.jsonl", "estimates.csv"] {
        assert_eq!(read(&straight, f), read(&split, f), "{f}");
    }
}

#[test]
fn resume_rejects_a_different_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        checkpoint_every: 2,
        ..RunOptions::default()
    };
    run_episode(tiny(4, 2, 1), 1, tmp.path(), &opts).unwrap();
    let resumed = RunOptions {
        resume: Some(checkpoint_path(tmp.path(), 2)),
        ..RunOptions::default()
    };
    let err = run_episode(tiny(4, 2, 1), 2, tmp.path(), &resumed).unwrap_err();
    assert!(err.to_string().contains("different"));
}

#[test]
fn method_subset_limits_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        methods: Some(vec![Method::Kf]),
        ..RunOptions::default()
    };
    let s = run_episode(tiny(5, 2, 1), 1, tmp.path(), &opts).unwrap();
    assert_eq!(s.methods.len(), 1);
    let metrics = read(tmp.path(), "metrics.csv");
    assert!(metrics.lines().skip(1).all(|l| l.contains(",kf,")));
    assert_eq!(metrics.lines().count(), 1 + 4);
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rftrack")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"targets": 2, "no_such_key": 1}"#).unwrap();
    let out = tmp.path().join("out");
    let o = cli(&["run", "--config", bad.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let invalid = tmp.path().join("invalid.json");
    fs::write(&invalid, r#"{"train_blocks": 700}"#).unwrap();
    let o = cli(&["run", "--config", invalid.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = cli(&[
        "run", "--config", bad.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap(), "--methods", "kf,bogus",
    ]);
    assert_eq!(o.status.code(), Some(2));

    let good = tmp.path().join("good.json");
    let cfg = serde_json::json!({
        "targets": 1, "blocks": 3, "train_blocks": 1, "samples": 2, "diffusion_steps": 5,
        "vae": {"latent": 4, "hidden": 8}, "ddpm": {"hidden": 8, "time_dim": 8},
        "cnn": {"channels": [2, 2, 2], "dense": 4}, "music_grid": 64
    });
    fs::write(&good, cfg.to_string()).unwrap();
    let o = cli(&[
        "run", "--config", good.to_str().unwrap(), "--seed", "3", "--out", out.to_str().unwrap(), "--methods", "ddpm,kf",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("manifest.json").exists());
}
