use std::io::Write;
use std::process::Command;

use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("kafw").chain(args.iter().copied());
    let code = kafw_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn records(stdout: &str) -> Vec<Value> {
    stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn attack_on_tied_schedule_always_outputs_one() {
    let (code, out, _) = run(&["attack", "--name", "thm3", "--schedule", "identity_bad(5)", "--trials", "20", "--seed", "9"]);
    assert_eq!(code, 0);
    let recs = records(&out);
    assert_eq!(recs.len(), 21);
    for r in &recs[..20] {
        assert_eq!(r["kind"], "trial");
        assert_eq!(r["output"], 1);
        assert_eq!(r["base_seed"], 9);
        assert!(r["trial_seed"].is_u64());
    }
    assert_eq!(recs[20]["kind"], "summary");
    assert_eq!(recs[20]["ones"], 20);
}

#[test]
fn trial_seeds_replay_single_trials() {
    let (_, a, _) = run(&["attack", "--name", "appbany", "--schedule", "identity_bad(7)", "--trials", "5", "--world", "ideal", "--seed", "3"]);
    let (_, b, _) = run(&["attack", "--name", "appbany", "--schedule", "identity_bad(7)", "--trials", "5", "--world", "ideal", "--seed", "3"]);
    assert_eq!(a, b);
}

#[test]
fn transcripts_list_every_query() {
    let (code, out, _) = run(&["attack", "--name", "thm3", "--schedule", "identity_bad(4)", "--transcript"]);
    assert_eq!(code, 0);
    let recs = records(&out);
    let queries: Vec<_> = recs.iter().filter(|r| r["kind"] == "rk").collect();
    let trial = recs.iter().find(|r| r["kind"] == "trial").unwrap();
    assert_eq!(queries.len() as u64, trial["rk_queries"].as_u64().unwrap());
}

#[test]
fn audit_reports_pass_and_fail() {
    let (code, out, _) = run(&["audit", "--schedule", "ortho6", "--check", "def3"]);
    assert_eq!(code, 0);
    assert_eq!(records(&out)[0]["verdict"], "pass");
    let (code, out, _) = run(&["audit", "--schedule", "minimal4", "--check", "def1"]);
    assert_eq!(code, 0);
    let r = &records(&out)[0];
    assert_eq!(r["verdict"], "pass");
    assert_eq!(r["counts"]["delta1"], 3);
    let (code, out, _) = run(&["audit", "--schedule", "identity_bad(6)", "--check", "def3", "--text"]);
    assert_eq!(code, 0);
    assert!(out.trim_end().ends_with("verdict: fail"));
}

#[test]
fn equivalence_passes_and_reports_cases() {
    let (code, out, _) = run(&["equivalence", "--pair", "kafv-kafw", "--n", "4", "--rounds", "4", "--seeds", "2"]);
    assert_eq!(code, 0);
    let recs = records(&out);
    assert_eq!(recs.len(), 2);
    assert!(recs.iter().all(|r| r["mismatches"] == 0 && r["cases"].as_u64().unwrap() > 0));
}

#[test]
fn missing_weak_offset_is_a_precondition_failure() {
    let (code, out, err) = run(&["attack", "--name", "thm3", "--schedule", "ortho6"]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.starts_with("error:"));
    let (code, _, _) = run(&["attack", "--name", "thm4", "--schedule", "minimal4"]);
    assert_eq!(code, 2);
}

#[test]
fn other_errors_exit_one() {
    assert_eq!(run(&["attack", "--name", "thm3", "--schedule", "no_such_schedule"]).0, 1);
    assert_eq!(run(&["attack", "--name", "nope", "--schedule", "ortho6"]).0, 1);
    assert_eq!(run(&["encrypt", "--schedule", "minimal4", "--key", "100", "00"]).0, 1);
    assert_eq!(run(&["bound", "--theorem", "3", "--qf", "1", "--qe", "1"]).0, 1);
}

#[test]
fn help_lists_builtin_schedules() {
    for args in [&["--help"][..], &["attack", "--help"][..]] {
        let (code, out, _) = run(args);
        assert_eq!(code, 0);
        for name in kafw::schedules::BUILTIN_NAMES {
            assert!(out.contains(name), "{name} missing from {args:?} help");
        }
    }
}

#[test]
fn verbose_advantage_agrees_with_summary_only() {
    let base = ["advantage", "--attack", "appb5", "--schedule", "identity_bad(5)", "--trials", "50", "--seed", "11"];
    let (code, quiet, _) = run(&base);
    assert_eq!(code, 0);
    let mut verbose_args = base.to_vec();
    verbose_args.push("--verbose");
    let (_, verbose, _) = run(&verbose_args);
    let v = records(&verbose);
    assert_eq!(v.len(), 101);
    assert_eq!(records(&quiet)[0], v[100]);
    let real_ones = v[..50].iter().filter(|r| r["output"] == 1).count() as f64;
    assert_eq!(v[100]["p_real"].as_f64().unwrap(), real_ones / 50.0);
}

#[test]
fn encrypt_then_decrypt_across_invocations() {
    let (code, out, _) = run(&["encrypt", "--schedule", "filled6", "--key", "c4", "0102", "fffe", "--seed", "5"]);
    assert_eq!(code, 0);
    let cts: Vec<String> = records(&out).iter().map(|r| r["output"].as_str().unwrap().to_string()).collect();
    let mut args = vec!["encrypt", "--decrypt", "--schedule", "filled6", "--key", "c4", "--seed", "5"];
    args.extend(cts.iter().map(String::as_str));
    let (_, back, _) = run(&args);
    let pts: Vec<_> = records(&back).iter().map(|r| r["output"].clone()).collect();
    assert_eq!(pts, ["0102", "fffe"]);
}

#[test]
fn block_flags_and_round_counts() {
    let (code, out, _) = run(&["encrypt", "--schedule", "identity_bad", "--rounds", "6", "--key", "1", "--block", "0203", "0405"]);
    assert_eq!(code, 0);
    let recs = records(&out);
    assert_eq!(recs.len(), 2);
    assert_eq!((&recs[0]["input"], &recs[1]["input"], &recs[0]["rounds"]), (&"0203".into(), &"0405".into(), &6.into()));
    assert_eq!(run(&["encrypt", "--schedule", "ortho6", "--rounds", "4", "--key", "1", "00"]).0, 1);
    assert_eq!(run(&["encrypt", "--schedule", "ortho6", "--key", "1"]).0, 1);
}

#[test]
fn schedule_show_gives_hex_subkeys() {
    let (code, out, _) = run(&["schedule", "show", "--schedule", "minimal4", "--key", "5", "--key", "6"]);
    assert_eq!(code, 0);
    let recs = records(&out);
    assert_eq!(recs.len(), 2);
    // 02*5 ^ 5^3 and 03*5 ^ 5^3 in GF(2^8) with x^8+x^4+x^3+x+1.
    assert_eq!((&recs[0]["subkeys"]["g1"], &recs[0]["subkeys"]["g4"]), (&"5f".into(), &"5a".into()));
    assert_eq!(recs[0]["subkeys"]["g2"], "00");
}

#[test]
fn trace_ends_at_the_ciphertext() {
    let (_, out, _) = run(&["encrypt", "--schedule", "minimal4", "--key", "3a", "1234", "--trace"]);
    let r = &records(&out)[0];
    let trace = r["trace"].as_array().unwrap();
    assert_eq!(trace.len(), 4);
    assert_eq!(trace[3]["state"], r["output"]);
}

#[test]
fn schedule_files_round_trip_through_the_cli() {
    let (code, text, _) = run(&["schedule", "render", "--schedule", "minimal4"]);
    assert_eq!(code, 0);
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(text.as_bytes()).unwrap();
    let path = file.path().to_str().unwrap();
    let from_file = run(&["schedule", "show", "--schedule", path, "--key", "77"]).1;
    let builtin = run(&["schedule", "show", "--schedule", "minimal4", "--key", "77"]).1;
    let strip = |s: &str| {
        let mut v: Value = serde_json::from_str(s.trim()).unwrap();
        v.as_object_mut().unwrap().remove("schedule");
        v
    };
    assert_eq!(strip(&from_file), strip(&builtin));

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    bad.write_all(b"n = 4\ng1 = affine { matrix = [1, 2], constant = 0 }\n").unwrap();
    let (code, _, err) = run(&["audit", "--schedule", bad.path().to_str().unwrap(), "--check", "def3"]);
    assert_eq!(code, 1);
    assert!(!err.is_empty());
}

#[test]
fn bound_from_counts_and_from_schedule() {
    let (code, out, _) = run(&["bound", "--theorem", "1", "--qf", "4", "--qe", "4", "--n", "8", "--deltas", "3,2,2"]);
    assert_eq!(code, 0);
    let r = &records(&out)[0];
    assert_eq!((r["numerator"].as_str(), r["denominator"].as_str()), (Some("23"), Some("8")));
    let (_, out, _) = run(&["bound", "--theorem", "1", "--qf", "4", "--qe", "4", "--schedule", "minimal4"]);
    assert_eq!(records(&out)[0]["delta_counts"], serde_json::json!([3, 2, 2]));
}

#[test]
fn out_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.ndjson");
    let (code, out, _) = run(&["bound", "--theorem", "6", "--qf", "1", "--qe", "1", "--n", "16", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    assert_eq!(records(&written).len(), 1);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_kafw");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let ok = status(&["equivalence", "--pair", "kac-collapse", "--n", "4", "--rounds", "3"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(status(&["attack", "--name", "appbany", "--schedule", "ortho6"]).status.code(), Some(2));
    assert_eq!(status(&["frobnicate"]).status.code(), Some(1));
    let v = status(&["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).contains("kafw"));
    let seeded = Command::new(bin)
        .args(["attack", "--name", "thm3", "--schedule", "identity_bad(4)"])
        .env("KAFW_SEED", "42")
        .output()
        .unwrap();
    let line = String::from_utf8(seeded.stdout).unwrap();
    let first: Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    assert_eq!(first["base_seed"], 42);
}
