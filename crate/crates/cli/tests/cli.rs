use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::Value;
use tempfile::NamedTempFile;
use zipbf::{execute_with, run_test, OutputFormat, RayonRunner, RunConfig};
use zipbf_core::numerics::SerialRunner;
use zipbf_core::{log_bf_jeffreys, summarize, Backend};

const HEADER: &str = "count\n";
const NON_CONE: &str = "count,x1,x2\n0,-5,1\n2,1,0\n1,0,1\n";
const SYMMETRIC: &str = "count,x1,x2\n0,1,0\n0,0,1\n1,1,1\n2,1,1\n";

fn file(contents: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

fn table(freq: &[usize]) -> String {
    let mut s = String::from(HEADER);
    for (x, &f) in freq.iter().enumerate() {
        for _ in 0..f {
            s.push_str(&format!("{x}\n"));
        }
    }
    s
}

fn zipbf(args: &[&str], input: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zipbf"))
        .args(args.iter().take(1))
        .arg(input)
        .args(args.iter().skip(1))
        .env_remove("ZIPBF_SEED")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn uti_counts() {
    let f = file(&table(&[81, 9, 7, 1]));
    let out = zipbf(&["test"], f.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["bf10"].as_f64().unwrap() - 223.13).abs() < 0.01, "{v}");
    assert!((0.994..=0.996).contains(&v["post_prob_m1"].as_f64().unwrap()));
    assert_eq!(v["method"], "closed_form");
    assert_eq!((v["n"].as_u64(), v["k"].as_u64(), v["s"].as_u64()), (Some(98), Some(81), Some(26)));
    assert_eq!(v["models"]["m1"], "zero-inflated Poisson");

    let text = stdout(&zipbf(&["test", "--format", "text"], f.path()));
    assert!(text.contains("B10 = 223.1"), "{text}");
    assert!(text.contains("Pr(M1 | x) = 0.995"), "{text}");
    assert!(text.contains("Pr(M0 | x) = 0.00446"), "{text}");
}

#[test]
fn terror_counts() {
    let f = file(&table(&[38, 26, 8, 2, 1]));
    let v = json(&zipbf(&["test"], f.path()));
    assert!((v["bf10"].as_f64().unwrap() - 0.28).abs() < 0.005, "{v}");
    assert!((v["post_prob_m1"].as_f64().unwrap() - 0.219).abs() < 0.002);
}

#[test]
fn other_count_priors() {
    let f = file(&table(&[81, 9, 7, 1]));
    let g = json(&zipbf(&["test", "--prior", "gamma:0.5,0"], f.path()));
    let j = json(&zipbf(&["test"], f.path()));
    assert!((g["log_bf10"].as_f64().unwrap() - j["log_bf10"].as_f64().unwrap()).abs() < 1e-12);
    assert_eq!(g["method"], "gamma_closed_form");

    let l1 = json(&zipbf(&["test", "--prior", "jeffreys1"], f.path()));
    assert_eq!(l1["method"], "quadrature_l1");
    let ratio = l1["bf10"].as_f64().unwrap() / j["bf10"].as_f64().unwrap();
    assert!((0.5f64.sqrt()..=2f64.sqrt()).contains(&ratio), "{ratio}");

    let odds = json(&zipbf(&["test", "--prior-odds", "0.25"], f.path()));
    let bf = odds["bf10"].as_f64().unwrap();
    assert!((odds["post_prob_m1"].as_f64().unwrap() - 0.25 * bf / (1.0 + 0.25 * bf)).abs() < 1e-12);

    let out = zipbf(&["test", "--prior", "j1"], f.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn three_zeros_use_default_gamma() {
    let f = file("0\n0\n0\n");
    let out = zipbf(&["test"], f.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["bf10"].as_f64().unwrap() - 25.0 / 12.0).abs() < 1e-12);
    assert_eq!(v["method"], "all_zeros");
    assert_eq!(v["prior"], "gamma:1,1");
    assert!(v["notices"][0].as_str().unwrap().contains("a = 1, b = 1"), "{v}");
}

#[test]
fn input_errors_exit_2_with_line_numbers() {
    let f = file("1\n2\nthree\n");
    let out = zipbf(&["test"], f.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let out = zipbf(&["test"], Path::new("/nonexistent/counts.txt"));
    assert_eq!(out.status.code(), Some(2));

    let f = file("count,x\n1,1\n2,oops\n");
    let out = zipbf(&["test-reg"], f.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    // Collinear design.
    let f = file("count,x1,x2\n1,1,2\n2,2,4\n3,3,6\n");
    assert_eq!(zipbf(&["test-reg"], f.path()).status.code(), Some(2));

    let f = file("1\n");
    let out = zipbf(&["test", "--prior", "gamma:-1,1"], f.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn intercept_only_regression() {
    let f = file("count\n0\n1\n2\n");
    let expected = log_bf_jeffreys(&summarize(&[0, 1, 2]).unwrap()).unwrap();
    assert!((expected.bf10 - 0.5945).abs() < 5e-4);
    for backend in ["quad", "mc"] {
        let out = zipbf(&["test-reg", "--intercept", "--backend", backend, "--seed", "11"], f.path());
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let v = json(&out);
        let got = v["log_bf10"].as_f64().unwrap();
        let se = v["rel_se"].as_f64().unwrap();
        assert!((got - expected.log_bf10).abs() <= (3.0 * se).max(1e-6), "{backend}: {got} vs {}", expected.log_bf10);
        assert_eq!(v["integrability"]["recommended_prior"], "j1");
        assert_eq!(v["seed"], 11);
    }
    // No covariates and no intercept.
    assert_eq!(zipbf(&["test-reg"], f.path()).status.code(), Some(2));
}

#[test]
fn non_cone_design_refused_for_j0() {
    let f = file(NON_CONE);
    let out = zipbf(&["test-reg", "--prior", "j0"], f.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("cone condition violated at row 1"), "{}", stderr(&out));

    let out = zipbf(&["test-reg", "--prior", "j0", "--force"], f.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    let warnings: Vec<&str> = v["warnings"].as_array().unwrap().iter().map(|w| w.as_str().unwrap()).collect();
    assert!(warnings.iter().any(|w| w.contains("may be infinite")), "{warnings:?}");

    // The default route picks j1, which is finite here.
    let v = json(&zipbf(&["test-reg"], f.path()));
    assert_eq!(v["prior"], "j1");
    assert!(v["log_bf10"].as_f64().unwrap().is_finite());
}

#[test]
fn check_reports() {
    let f = file(NON_CONE);
    let out = zipbf(&["check", "--format", "text"], f.path());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("j1: finite"), "{text}");
    assert!(text.contains("j0: cone condition violated at row 1"), "{text}");
    assert!(text.contains("recommended: j1"), "{text}");

    let v = json(&zipbf(&["check"], f.path()));
    assert_eq!(v["integrability"]["j0_condition_ok"], false);
    assert_eq!(v["integrability"]["zero_rows"][0]["input_row"], 0);

    let f = file(SYMMETRIC);
    let text = stdout(&zipbf(&["check", "--format", "text"], f.path()));
    assert!(text.contains("recommended: partial prior"), "{text}");
}

#[test]
fn symmetric_rank_deficient_table() {
    let f = file(SYMMETRIC);
    let out = zipbf(&["test-reg", "--enumerate-selections"], f.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["prior"], "partial");
    let rd = &v["rank_deficient"];
    assert_eq!(rd["selections"].as_array().unwrap().len(), 2);
    let a = rd["selections"][0]["log_bf10"].as_f64().unwrap();
    let b = rd["selections"][1]["log_bf10"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-8);
    assert!(rd["arithmetic_mean_bf"].as_f64().unwrap() >= rd["geometric_mean_bf"].as_f64().unwrap() - 1e-12);

    let text = stdout(&zipbf(&["test-reg", "--enumerate-selections", "--format", "text"], f.path()));
    assert!(text.contains("arithmetic mean B10") && text.contains("geometric mean B10"), "{text}");

    // j1 requested on a rank-deficient design is rerouted.
    let v = json(&zipbf(&["test-reg", "--prior", "j1"], f.path()));
    assert_eq!(v["prior"], "partial");
    assert!(v["notices"][0].as_str().unwrap().contains("partial prior"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let f = file("count,offset,w\n0,0.1,0.3\n3,0.0,1.2\n1,-0.2,0.5\n0,0.3,0.9\n2,0.2,0.1\n4,0.0,1.5\n");
    let args = ["test-reg", "--intercept", "--backend", "mc", "--seed", "42"];
    let a = zipbf(&args, f.path());
    let b = zipbf(&args, f.path());
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let c = zipbf(&["test-reg", "--intercept", "--backend", "mc", "--seed", "43"], f.path());
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn seed_from_environment() {
    let f = file("count\n0\n1\n2\n");
    let out = Command::new(env!("CARGO_BIN_EXE_zipbf"))
        .args(["test-reg", "--intercept", "--backend", "mc"])
        .arg(f.path())
        .env("ZIPBF_SEED", "1234")
        .output()
        .unwrap();
    assert_eq!(json(&out)["seed"], 1234);
    let explicit = zipbf(&["test-reg", "--intercept", "--backend", "mc", "--seed", "1234"], f.path());
    assert_eq!(out.stdout, explicit.stdout);
}

#[test]
fn serial_and_rayon_agree_bit_for_bit() {
    let f = file("count,offset,w\n0,0.1,0.3\n3,0.0,1.2\n1,-0.2,0.5\n0,0.3,0.9\n2,0.2,0.1\n4,0.0,1.5\n");
    let mut cfg = RunConfig::new(zipbf::Command::TestReg, f.path());
    cfg.intercept = true;
    cfg.integration = cfg.integration.with_backend(Backend::ImportanceSampling).with_seed(5);
    let serial = execute_with(&cfg, &SerialRunner).unwrap();
    let parallel = execute_with(&cfg, &RayonRunner).unwrap();
    assert_eq!(serial, parallel);
}

#[test]
fn json_round_trips_log_values() {
    let counts: Vec<i64> = [0, 0, 0, 1, 2, 5, 0, 3].to_vec();
    let f = file(&counts.iter().map(|c| format!("{c}\n")).collect::<String>());
    let v = json(&zipbf(&["test"], f.path()));
    let exact = log_bf_jeffreys(&summarize(&counts).unwrap()).unwrap();
    assert_eq!(v["log_bf10"].as_f64().unwrap().to_bits(), exact.log_bf10.to_bits());
    assert_eq!(v["post_prob_m1"].as_f64().unwrap().to_bits(), exact.post_prob_m1.to_bits());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn counts_file_summary_matches(counts in proptest::collection::vec(0i64..6, 1..40)) {
        let f = file(&counts.iter().map(|c| format!("{c}\n")).collect::<String>());
        let mut cfg = RunConfig::new(zipbf::Command::Test, f.path());
        cfg.output_format = OutputFormat::Json;
        let r = run_test(&cfg).unwrap();
        let s = summarize(&counts).unwrap();
        prop_assert_eq!((r.n, r.k, r.s), (Some(s.n), Some(s.k), Some(s.s)));
        prop_assert!(r.log_bf10.is_finite());
        prop_assert!((r.post_prob_m1 + r.post_prob_m0 - 1.0).abs() < 1e-12);
    }
}
