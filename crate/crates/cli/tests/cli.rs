use std::path::Path;
use std::process::{Command as Proc, Output};

use ropelab::PeKind;
use ropelab_cli::{parse_args, Action, Format, UsageError};
use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Proc::new(env!("CARGO_BIN_EXE_ropelab"))
        .args(args)
        .output()
        .expect("spawn ropelab")
}

fn ok_json(args: &[&str]) -> Value {
    let out = bin(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json stdout")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn parses_abf_decay() {
    let cmd = parse_args(&[
        "decay", "--pe", "abf", "--base", "10000", "--beta", "50", "--dim", "128", "--max-dist",
        "8192",
    ])
    .unwrap();
    match &cmd.action {
        Action::Decay { pe, max_dist, .. } => {
            assert_eq!(pe.variant().unwrap().kind(), PeKind::RopeAbf);
            assert_eq!(*max_dist, 8192);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(cmd.format, Format::Csv);
    assert!(matches!(parse_args(&["fit", "--input", "loss.csv"]).unwrap().action, Action::Fit { .. }));
}

#[test]
fn missing_alpha_names_the_flag() {
    let err = parse_args(&["decay", "--pe", "pi", "--base", "10000", "--dim", "128"]).unwrap_err();
    assert!(matches!(&err, UsageError::Invalid(m) if m.contains("--alpha")));
    let out = bin(&["decay", "--pe", "pi", "--base", "10000", "--dim", "128"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.contains("alpha"));
}

#[test]
fn unknown_flags_and_values_are_usage_errors() {
    for args in [
        vec!["decay", "--nope"],
        vec!["theta1", "--from", "x", "--to", "2"],
        vec!["bogus"],
        vec![],
        vec!["bounds", "--pe", "rope", "--beta", "2"],
        vec!["datagen-pack", "--input", "x", "--format", "csv"],
    ] {
        let out = bin(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(String::from_utf8(out.stderr).unwrap().lines().count(), 1, "{args:?}");
    }
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn published_constants() {
    let v = ok_json(&["bounds", "--pe", "pi", "--base", "10000", "--alpha", "0.25"]);
    assert!((v["approximation"].as_f64().unwrap() - 0.02715).abs() < 5e-4);
    let v = ok_json(&["theta1", "--dim", "128", "--from", "10000", "--to", "500000"]);
    assert!((v["relative_difference"].as_f64().unwrap() - 0.0593).abs() < 5e-5);
    let v = ok_json(&["flops", "--p", "0.2", "--cost-ratio", "0.5"]);
    assert!((v["relative"].as_f64().unwrap() - 0.9).abs() < 1e-12);
}

#[test]
fn domain_errors_exit_3_with_name() {
    let dir = tempfile::tempdir().unwrap();
    let flat = write(dir.path(), "flat.csv", "context_length,loss\n100,2\n200,2\n400,2\n800,2\n");
    let out = bin(&["fit", "--input", &flat]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("DegenerateFit"));

    let out = bin(&["theta1", "--dim", "7", "--from", "10000", "--to", "500000"]);
    assert_eq!(out.status.code(), Some(3));
    let out = bin(&["grad-check", "--dim", "64", "--seq-len", "4", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("TooLarge"));
}

#[test]
fn io_errors_exit_4() {
    let out = bin(&["fit", "--input", "/definitely/not/here.csv"]);
    assert_eq!(out.status.code(), Some(4));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "context_length,loss\n100,2\n200,abc\n");
    assert_eq!(bin(&["fit", "--input", &bad]).status.code(), Some(4));
    let out = bin(&["theta1", "--from", "10000", "--to", "500000", "--output", "/definitely/not/here/out.json"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn outputs_are_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let runs = [
        vec!["decay", "--pe", "xpos-abf", "--beta", "50", "--dim", "64", "--max-dist", "300"],
        vec!["theorem-check", "--pe", "pi", "--alpha", "0.25", "--dim", "64", "--seed", "3", "--position", "7"],
        vec!["fsr-task", "--sentences", "8", "--tokens-per-sentence", "5", "--seed", "11"],
        vec!["grad-check", "--pe", "abf", "--beta", "50", "--dim", "8", "--seed", "1,2"],
        vec!["granularity", "--alpha", "0.25", "--beta", "50", "--dim", "8", "--positions", "40", "--seed", "2"],
    ];
    for args in runs {
        let a = bin(&args);
        let b = bin(&args);
        assert_eq!(a.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");

        let path = dir.path().join("out.txt");
        let mut with_out = args.clone();
        let p = path.to_string_lossy().into_owned();
        with_out.extend(["--output", &p]);
        let c = bin(&with_out);
        assert_eq!(c.status.code(), Some(0));
        assert!(c.stdout.is_empty());
        assert_eq!(std::fs::read(&path).unwrap(), a.stdout);
    }
}

#[test]
fn csv_outputs_have_headers() {
    let out = bin(&["decay", "--dim", "8", "--max-dist", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "delta,score");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0,8.0000000000000000e0"));

    let out = bin(&["helix", "--a", "0.5", "--t-end", "3.141592653589793", "--samples", "3"]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("t,x,y,z\n"));

    let out = bin(&["probe-mass", "--dim", "128", "--seq-len", "64,256"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("seq_len,variant,mass_on_first\n64,RoPE;b=10000;d=128,"));
}

#[test]
fn fit_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("context_length,loss\n");
    for c in [64u64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384, 32768] {
        let loss = (1000.0 / c as f64).powf(0.5) + 1.5;
        csv.push_str(&format!("{c},{loss:.17e}\n"));
    }
    let input = write(dir.path(), "loss.csv", &csv);
    let fit_path = dir.path().join("fit.json");
    let fp = fit_path.to_string_lossy().into_owned();
    assert_eq!(bin(&["fit", "--input", &input, "--output", &fp]).status.code(), Some(0));
    let fit: Value = serde_json::from_slice(&std::fs::read(&fit_path).unwrap()).unwrap();
    assert!((fit["alpha"].as_f64().unwrap() / 1000.0 - 1.0).abs() < 1e-6);
    assert!((fit["beta"].as_f64().unwrap() / 0.5 - 1.0).abs() < 1e-6);
    assert!((fit["gamma"].as_f64().unwrap() / 1.5 - 1.0).abs() < 1e-6);

    let v = ok_json(&["predict", "--fit", &fp, "--contexts", "1000,4000", "--format", "json"]);
    let preds = v["predictions"].as_array().unwrap();
    assert!((preds[0]["predicted_loss"].as_f64().unwrap() - 2.5).abs() < 1e-6);
    assert!((v["doubling"]["factor"].as_f64().unwrap() - 0.5f64.exp2().recip()).abs() < 1e-6);

    let out = bin(&["predict", "--alpha", "1000", "--beta", "0.5", "--gamma", "1.5", "--contexts", "1000"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "context_length,predicted_loss\n1000,2.5000000000000000e0\n");
}

#[test]
fn flops_table_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let table = write(dir.path(), "t.csv", "p,total_flops\n0,3.783\n0.2,3.405\n0.4,3.026\n0.8,2.270\n");
    let v = ok_json(&["flops", "--p", "0.4", "--table", &table]);
    assert!((v["cost_ratio"].as_f64().unwrap() - 0.5).abs() < 2e-3);
    assert_eq!(v["calibrated"], Value::Bool(true));
    assert!((v["relative"].as_f64().unwrap() - 0.8).abs() < 2e-3);
}

#[test]
fn bucket_loss_and_fsr_scoring() {
    let dir = tempfile::tempdir().unwrap();
    let losses = write(dir.path(), "l.csv", "position,loss\n0,1\n1,3\n2,5\n");
    let out = bin(&["bucket-loss", "--input", &losses, "--width", "2"]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "bucket_index,mean_loss\n0,2.0000000000000000e0\n1,5.0000000000000000e0\n"
    );

    let task = ok_json(&["fsr-task", "--sentences", "4", "--tokens-per-sentence", "3", "--seed", "5"]);
    let first: Vec<String> = task["task"]["full_sequence"].as_array().unwrap()[..3]
        .iter()
        .map(|t| t.to_string())
        .collect();
    let resp = write(dir.path(), "resp.txt", &first.join(" "));
    let scored = ok_json(&["fsr-task", "--sentences", "4", "--tokens-per-sentence", "3", "--seed", "5", "--response", &resp]);
    assert_eq!(scored["score"]["exact_match"], Value::Bool(true));
    assert_eq!(scored["score"]["token_overlap"].as_f64(), Some(1.0));
}

#[test]
fn datagen_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    let text: String = (0..120).map(|i| format!("word{i} ")).collect::<String>() + "end.";
    let docs = write(
        dir.path(),
        "docs.ndjson",
        &format!("{}\n", serde_json::json!({"doc_id": "d0", "text": text})),
    );
    let code = |args: &[&str]| {
        let out = bin(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    };
    code(&["datagen-chunk", "--input", &docs, "--chunk-tokens", "50", "--output", &p("chunks.ndjson")]);
    let chunks: Vec<Value> = std::fs::read_to_string(p("chunks.ndjson"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(chunks.len(), 3);
    assert_eq!(chunks[2]["token_span"], serde_json::json!([100, 122]));

    code(&["datagen-render", "--input", &p("chunks.ndjson"), "--style", "short", "--output", &p("prompts.ndjson")]);
    let prompts = std::fs::read_to_string(p("prompts.ndjson")).unwrap();
    assert_eq!(prompts.lines().count(), 3);
    assert!(prompts.contains("a single phrase**"));

    let responses = write(
        dir.path(),
        "responses.ndjson",
        &[
            serde_json::json!({"doc_id": "d0", "chunk_index": 1, "response": "Sure. <question>Which word is 60?</question><answer>word60</answer>"}),
            serde_json::json!({"doc_id": "d0", "chunk_index": 2, "response": "no tags here"}),
        ]
        .iter()
        .map(|v| format!("{v}\n"))
        .collect::<String>(),
    );
    let out = code(&["datagen-extract", "--input", &responses, "--style", "short"]);
    let pairs = String::from_utf8(out.stdout).unwrap();
    assert_eq!(pairs.lines().count(), 1);
    assert!(pairs.contains("\"answer\":\"word60\""));
    assert!(String::from_utf8(out.stderr).unwrap().contains("missing <question> tag"));

    code(&[
        "datagen-extract", "--input", &responses, "--style", "short", "--docs", &docs, "--chunks",
        &p("chunks.ndjson"), "--max-context", "200", "--loss-policy", "include-input-lm-loss",
        "--output", &p("inst.ndjson"),
    ]);
    let inst: Value =
        serde_json::from_str(std::fs::read_to_string(p("inst.ndjson")).unwrap().lines().next().unwrap()).unwrap();
    let n = inst["token_ids"].as_array().unwrap().len();
    assert!(n <= 200);
    assert_eq!(inst["response"], "word60");
    assert!(inst["loss_mask"].as_array().unwrap().iter().all(|m| m == true));

    let out = code(&["datagen-pack", "--input", &p("inst.ndjson"), "--seq-len", "256", "--mode", "pad"]);
    let padded: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(padded["token_ids"].as_array().unwrap().len(), 256);
    assert!(padded["loss_mask"].as_array().unwrap()[n..].iter().all(|m| m == false));

    let out = bin(&["datagen-pack", "--input", &p("inst.ndjson"), "--seq-len", "16", "--mode", "pack"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("InstanceTooLong"));

    let two = std::fs::read_to_string(p("inst.ndjson")).unwrap().repeat(2);
    let both = write(dir.path(), "two.ndjson", &two);
    let half = n.to_string();
    let out = code(&["datagen-pack", "--input", &both, "--seq-len", &half]);
    let batch: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(batch["sequences"].as_array().unwrap().len(), 2);
    assert_eq!(batch["dropped_tokens"], 0);
}
