mod common;

use std::path::PathBuf;
use std::time::Instant;

use common::{read, Sandbox};
use serde_json::Value;

fn path_of(v: &Value) -> PathBuf {
    PathBuf::from(v.as_str().unwrap())
}

#[test]
fn scenario_list_shows_the_catalog() {
    let sb = Sandbox::new();
    let a = sb.run(&["scenario", "list"]);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout.lines().count(), 1 + 9);
    assert_eq!(sb.run(&["scenario", "list"]).stdout, a.stdout);

    let extra = sb.path("extra.json");
    std::fs::write(
        &extra,
        r#"[{"scenario_id": 10, "family": "FullDuplexSumRate", "n_t": 4, "k": 2}]"#,
    )
    .unwrap();
    let b = sb.run(&["--catalog", extra.to_str().unwrap(), "scenario", "list"]);
    assert_eq!(b.code, 0);
    assert_eq!(b.stdout.lines().count(), 1 + 10);
    assert!(b.stdout.lines().last().unwrap().starts_with("10"));
}

#[test]
fn pipeline_run_writes_a_transcript_and_succeeds() {
    let sb = Sandbox::new();
    let o = sb.run(&["--seed", "4", "run", "--scenario", "1", "--snr", "5"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let s = o.json();
    assert_eq!(s["feasible"], true);
    assert_eq!(s["terminated_by"], "Accepted");
    assert_eq!(s["revisions"], 1);
    let transcript = read(&path_of(&s["transcript"]));
    assert!(transcript
        .lines()
        .any(|l| l.contains("\"type\":\"feedback\"") && l.contains("\"revision\":0")));
    assert!(path_of(&s["report"]).is_file());
    assert_eq!(sb.requests(), 0);
}

#[test]
fn single_methods_run_without_transcripts() {
    let sb = Sandbox::new();
    let o = sb.run(&["run", "--scenario", "8", "--method", "WmmseSumRate"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.json().get("transcript").is_none());
    let wrong = sb.run(&["run", "--scenario", "1", "--method", "WmmseSumRate"]);
    assert_eq!(wrong.code, 2);
    assert!(wrong.stderr.contains("UnknownMethod"));
}

#[test]
fn unknown_scenarios_and_bad_flags_exit_two() {
    let sb = Sandbox::new();
    let o = sb.run(&["run", "--scenario", "42"]);
    assert_eq!(o.code, 2);
    let line: Value = serde_json::from_str(o.stderr.lines().last().unwrap()).unwrap();
    assert_eq!(line["error"], "UnknownScenario");
    assert_eq!(line["exit_code"], 2);
    assert_eq!(sb.run(&["run", "--bogus"]).code, 2);
    assert_eq!(sb.run(&["frobnicate"]).code, 2);
    assert_eq!(sb.run(&["--help"]).code, 0);
}

#[test]
fn remote_backend_without_key_fails_before_any_request() {
    let mut sb = Sandbox::new();
    sb.env
        .insert("AGENTIC_LLM_BASE_URL".into(), "http://127.0.0.1:9".into());
    sb.env.insert("AGENTIC_LLM_MODEL".into(), "m".into());
    let o = sb.run(&["run", "--scenario", "1", "--backend", "remote"]);
    assert_eq!(o.code, 3, "{}", o.stderr);
    assert!(o.stderr.contains("ConfigError"));
    assert!(o.stderr.contains("AGENTIC_LLM_API_KEY"));
    assert_eq!(sb.requests(), 0);

    // with a key the requests go through the injected transport
    sb.env.insert("AGENTIC_LLM_API_KEY".into(), "k".into());
    let o = sb.run(&["run", "--scenario", "1", "--backend", "remote"]);
    assert_eq!(o.code, 4);
    assert_eq!(sb.requests(), 1);
}

#[test]
fn remote_backend_needs_url_and_model() {
    let mut sb = Sandbox::new();
    sb.env.insert("AGENTIC_LLM_API_KEY".into(), "k".into());
    sb.env.insert("AGENTIC_BACKEND".into(), "remote".into());
    let o = sb.run(&["run", "--scenario", "1"]);
    assert_eq!(o.code, 3);
    assert!(o.stderr.contains("llm.base_url"));
    assert_eq!(sb.requests(), 0);
}

#[test]
fn bad_configuration_exits_three() {
    let sb = Sandbox::new();
    let bad = sb.path("bad.toml");
    std::fs::write(&bad, "sweep.n_mc = 0\n").unwrap();
    let args = |p: &std::path::Path| {
        vec![
            "agentic-precoding".to_string(),
            "--config".into(),
            p.display().to_string(),
            "sweep".into(),
        ]
    };
    assert_eq!(sb.run_raw(&args(&bad)).code, 3);
    std::fs::write(&bad, "sweep.nmc = 5\n").unwrap();
    assert_eq!(sb.run_raw(&args(&bad)).code, 3);
    assert_eq!(sb.run_raw(&args(&sb.path("missing.toml"))).code, 3);
}

#[test]
fn small_sweep_is_fast_deterministic_and_complete() {
    let sb = Sandbox::new();
    let sweep = |out: &str| {
        let out = sb.path(out);
        let start = Instant::now();
        let o = sb.run(&[
            "--seed",
            "9",
            "sweep",
            "--scenarios",
            "8",
            "--methods",
            "zf,pipeline",
            "--snrs",
            "0,10",
            "--n-mc",
            "5",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        (start.elapsed(), out)
    };
    let (t, a) = sweep("a");
    assert!(t.as_secs_f64() < 10.0, "{t:?}");
    let (_, b) = sweep("b");
    let files = |d: &std::path::Path| {
        let mut v: Vec<_> = walk(d)
            .into_iter()
            .map(|p| p.strip_prefix(d).unwrap().to_path_buf())
            .collect();
        v.sort();
        v
    };
    assert_eq!(files(&a), files(&b));
    for f in files(&a) {
        assert_eq!(read(&a.join(&f)), read(&b.join(&f)), "{}", f.display());
    }
    assert_eq!(std::fs::read_dir(a.join("plotdata")).unwrap().count(), 2);
    assert!(a.join("metrics.csv").is_file() && a.join("metrics.md").is_file());
    assert!(a.join("feasibility_s08.md").is_file());
    assert_eq!(sb.requests(), 0);
}

fn walk(d: &std::path::Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(d).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn replay_round_trips_and_rejects_truncation() {
    let sb = Sandbox::new();
    let run = sb.run(&["--seed", "2", "run", "--scenario", "8", "--fault-max-iter", "1"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let s = run.json();
    let transcript = path_of(&s["transcript"]);
    let r = sb.run(&["replay", transcript.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rj = r.json();
    assert_eq!(rj["terminated_by"], s["terminated_by"]);
    assert_eq!(rj["revisions"], s["revisions"]);
    assert_eq!(rj["reproduced"], true);
    assert!(s["revisions"].as_u64().unwrap() >= 2);

    let text = read(&transcript);
    let lines: Vec<&str> = text.lines().collect();
    let cut = sb.path("cut.jsonl");
    std::fs::write(&cut, lines[..lines.len() - 1].join("\n")).unwrap();
    let c = sb.run(&["replay", cut.to_str().unwrap()]);
    assert_eq!(c.code, 2);
    assert!(c.stderr.contains("CorruptTranscript"));
    assert_eq!(sb.run(&["replay", sb.path("none.jsonl").to_str().unwrap()]).code, 2);
}

#[test]
fn run_ids_are_unique() {
    let sb = Sandbox::new();
    let ids: std::collections::HashSet<String> = (0..5)
        .map(|_| {
            sb.run(&["run", "--scenario", "1", "--method", "zf"]).json()["run_id"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(ids.len(), 5);
}
