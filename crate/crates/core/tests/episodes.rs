use std::path::Path;
use std::sync::Arc;

use sculpt_core::llm::{ChatTransport, ScriptedTransport};
use sculpt_core::pipeline::*;
use sculpt_core::planner::template_names;
use sculpt_core::pointcloud::ply;
use sculpt_core::sim::log::read_log;
use sculpt_core::Error;

fn config(prompt: &str, seed: u64, dir: &Path) -> RunConfig {
    RunConfig { prompt: prompt.into(), seed, output_dir: dir.to_path_buf(), ..Default::default() }
}

fn read_report(dir: &Path) -> EpisodeReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join(REPORT_FILE)).unwrap()).unwrap()
}

#[test]
fn line_episode_writes_consistent_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("line");
    let report = run_episode(&config("line", 7, &out)).unwrap();
    assert_eq!(read_report(&out), report);

    assert_eq!(report.plan.len(), 5);
    assert!(!report.rounds.is_empty() && report.rounds.len() <= 5);
    assert!(report.chamfer_initial.unwrap() > 0.0);
    assert!(report.final_distance.is_some());

    let a = &report.artifacts;
    for f in [&a.plan, &a.planner_audit, &a.episode_log, &a.subgoal_log] {
        assert!(out.join(f).is_file(), "{f}");
    }
    // one snapshot per placement plus one per grasp
    let grasps = report.rounds.iter().filter(|r| r.action.is_some()).count();
    assert_eq!(a.snapshots.len(), report.plan.len() + grasps);
    let records = read_log(out.join(&a.episode_log)).unwrap();
    assert_eq!(records.len(), a.snapshots.len());
    let last = ply::read(out.join(a.snapshots.last().unwrap())).unwrap();
    assert_eq!(last.len(), 5 * 200);
    let subgoal_lines = std::fs::read_to_string(out.join(&a.subgoal_log)).unwrap();
    assert_eq!(subgoal_lines.lines().count(), report.rounds.len());
    for line in subgoal_lines.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    for r in &report.rounds {
        if let Some(g) = &r.action {
            assert!(RunConfig::default().action_bounds.contains(g));
        }
    }
}

#[test]
fn episodes_are_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: u64| {
        let out = tmp.path().join(name);
        let mut r = run_episode(&config("X", seed, &out)).unwrap();
        r.runtime_ms = 0;
        (r, out)
    };
    let (a, da) = run("a", 3);
    let (b, db) = run("b", 3);
    assert_eq!(a, b);
    for f in &a.artifacts.snapshots {
        assert_eq!(std::fs::read(da.join(f)).unwrap(), std::fs::read(db.join(f)).unwrap());
    }
    let (c, _) = run("c", 4);
    assert_ne!(a.chamfer_final, c.chamfer_final);
}

#[test]
fn unknown_prompt_fails_with_exit_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let err = run_episode(&config("teapot", 0, tmp.path())).unwrap_err();
    assert!(matches!(err, Error::UnknownShape { .. }), "{err:?}");
    assert_eq!(err.exit_code(), 2);
    let failure: EpisodeFailure =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join(FAILURE_FILE)).unwrap()).unwrap();
    assert_eq!(failure.exit_code, 2);
    assert_eq!(failure.error_kind, "unknown-shape");
    assert!(!tmp.path().join(REPORT_FILE).exists());
}

#[test]
fn invalid_config_fails_with_exit_code_four() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        offline: true,
        backends: Backends { subgoal: SubgoalBackendKind::Llm, ..Default::default() },
        ..config("line", 0, tmp.path())
    };
    assert_eq!(run_episode(&cfg).unwrap_err().exit_code(), 4);
}

#[test]
fn rounds_respect_max_rounds() {
    let tmp = tempfile::tempdir().unwrap();
    for max_rounds in [0, 2] {
        let cfg = RunConfig { max_rounds, ..config("column", 1, &tmp.path().join(max_rounds.to_string())) };
        let r = run_episode(&cfg).unwrap();
        assert!(r.rounds.len() <= max_rounds);
        if max_rounds == 0 {
            assert_eq!(r.chamfer_final, r.chamfer_initial);
        }
    }
}

#[test]
fn random_action_backend_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        backends: Backends { action: ActionBackendKind::Random, ..Default::default() },
        max_rounds: 3,
        ..config("line", 2, tmp.path())
    };
    let r = run_episode(&cfg).unwrap();
    assert!(r.rounds.iter().any(|x| x.action.is_some()));
}

#[test]
fn suite_covers_every_prompt_and_repeat() {
    let tmp = tempfile::tempdir().unwrap();
    let prompts: Vec<String> = template_names().into_iter().take(8).collect();
    let base = RunConfig { max_rounds: 1, ..Default::default() };
    let summary = run_suite(&prompts, SuiteOptions::default(), &base, tmp.path()).unwrap();
    assert_eq!(summary.episodes.len(), 24);
    assert!(summary.episodes.iter().all(|e| e.error.is_none()), "{:?}", summary.episodes);
    for e in &summary.episodes {
        let r = read_report(&tmp.path().join(&e.dir));
        assert_eq!((r.prompt.as_str(), r.seed), (e.prompt.as_str(), e.seed));
    }
    let csv = std::fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), prompts.len() + 1);
    assert!(tmp.path().join("summary.json").is_file());
    for row in &summary.rows {
        assert_eq!((row.episodes, row.failed), (3, 0));
    }
}

#[test]
fn suite_with_shared_seed_has_zero_spread() {
    let tmp = tempfile::tempdir().unwrap();
    let base = RunConfig { max_rounds: 2, seed: 11, ..Default::default() };
    let opts = SuiteOptions { repeats: 2, share_seed: true };
    let summary = run_suite(&["line".to_string()], opts, &base, tmp.path()).unwrap();
    let row = &summary.rows[0];
    assert_eq!(row.chamfer_final_std, 0.0);
    assert_eq!(row.emd_std, 0.0);
    assert_eq!(row.hd_std, 0.0);
}

#[test]
fn suite_counts_failures_without_aborting() {
    let tmp = tempfile::tempdir().unwrap();
    let base = RunConfig { max_rounds: 0, ..Default::default() };
    let prompts = vec!["line".to_string(), "teapot".to_string()];
    let summary = run_suite(&prompts, SuiteOptions { repeats: 1, share_seed: false }, &base, tmp.path()).unwrap();
    assert_eq!(summary.rows[0].failed, 0);
    assert_eq!(summary.rows[1].failed, 1);
    assert_eq!(summary.episodes[1].error.as_deref(), Some("unknown-shape"));
}

fn llm_config(dir: &Path, rounds: usize) -> RunConfig {
    RunConfig {
        max_rounds: rounds,
        backends: Backends { subgoal: SubgoalBackendKind::Llm, ..Default::default() },
        ..config("line", 5, dir)
    }
}

fn subgoal_decisions(dir: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(dir.join("subgoals.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn llm_malformed_then_valid_uses_one_retry() {
    let tmp = tempfile::tempdir().unwrap();
    let transport = Arc::new(ScriptedTransport::ok([
        "sure, here you go: lengthen cluster 2",
        r#"{"kind":"thin","cluster":2,"direction":[0,1,0],"weight":0.5}"#,
    ]));
    let report =
        run_episode_with(&llm_config(tmp.path(), 1), Some(transport.clone() as Arc<dyn ChatTransport>)).unwrap();
    assert_eq!(transport.calls().len(), 2);
    assert_eq!(report.rounds.len(), 1);
    let d = &subgoal_decisions(tmp.path())[0]["decision"];
    assert_eq!(d["raw_replies"].as_array().unwrap().len(), 2);
    assert_eq!(d["modification"]["kind"], "thin");
    assert_eq!(d["modification"]["cluster"], 2);
}

#[test]
fn llm_exhausted_retries_skip_the_round() {
    let tmp = tempfile::tempdir().unwrap();
    let retries = RunConfig::default().llm.retries;
    // Round 0 gets nothing usable; round 1 gets a valid reply.
    let mut replies = vec!["not json".to_string(); retries + 1];
    replies.push(r#"{"kind":"flatten","cluster":0,"direction":[0,0,-1],"weight":0.3}"#.into());
    let transport = Arc::new(ScriptedTransport::ok(replies));
    let report =
        run_episode_with(&llm_config(tmp.path(), 2), Some(transport.clone() as Arc<dyn ChatTransport>)).unwrap();
    assert_eq!(transport.calls().len(), retries + 2);
    assert_eq!(report.rounds.len(), 2);
    assert!(report.rounds[0].subgoal.is_none());
    assert!(report.rounds[0].skipped.is_some());
    assert!(report.rounds[0].action.is_none());
    assert!(report.rounds[1].subgoal.is_some());
}

#[test]
fn llm_transport_failure_fails_with_exit_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let transport: Arc<dyn ChatTransport> = Arc::new(ScriptedTransport::new([Err("connection refused".to_string())]));
    let err = run_episode_with(&llm_config(tmp.path(), 1), Some(transport)).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let failure: EpisodeFailure =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join(FAILURE_FILE)).unwrap()).unwrap();
    assert_eq!(failure.error_kind, "transport");
}
