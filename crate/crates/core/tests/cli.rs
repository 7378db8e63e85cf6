use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
}

fn caplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caplab"))
        .args(args)
        .output()
        .unwrap()
}

fn caplab_in(out: &Path, config: &Path, args: &[&str]) -> Output {
    let mut all = vec![
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    all.extend_from_slice(args);
    caplab(&all)
}

fn error_record(o: &Output) -> Value {
    let text = String::from_utf8(o.stderr.clone()).unwrap();
    serde_json::from_str(text.lines().next().expect("an error line")).unwrap()
}

const BUNDLED: [&str; 4] = [
    "ellsberg_1_1.json",
    "correlated_coupling.json",
    "wlln_mean_uncertainty.json",
    "wlln_variance_uncertainty.json",
];

#[test]
fn every_bundled_config_validates() {
    for name in BUNDLED {
        let o = caplab(&["--config", example(name).to_str().unwrap(), "validate"]);
        assert_eq!(o.status.code(), Some(0), "{name}");
        assert!(String::from_utf8_lossy(&o.stdout).contains(": ok ("));
    }
}

#[test]
fn peng_row_on_the_two_urn_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = caplab_in(
        dir.path(),
        &example("ellsberg_1_1.json"),
        &["check-independence", "--kind", "peng", "--model", "pair"],
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("independence-peng-pair.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("kind,lhs,rhs,holds,max_gap,witness"));
    assert!(lines.next().unwrap().starts_with("peng,0.5,0.6,false,"));
}

#[test]
fn failed_checks_still_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["mm", "exp", "fubini", "peng"] {
        let o = caplab_in(
            dir.path(),
            &example("correlated_coupling.json"),
            &["check-independence", "--kind", kind, "--model", "coupled"],
        );
        assert_eq!(o.status.code(), Some(0), "{kind}");
        let csv = fs::read_to_string(dir.path().join(format!("independence-{kind}-coupled.csv")))
            .unwrap();
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[3], "false", "{kind}");
    }
}

#[test]
fn every_command_runs_on_the_two_urn_example() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("ellsberg_1_1.json");
    for cmd in [
        &["choquet"][..],
        &["envelope"],
        &["classify"],
        &["pprime"],
        &["check-independence", "--kind", "mm"],
        &["check-independence", "--kind", "exp"],
        &["check-independence", "--kind", "fubini"],
        &["product-fubini"],
        &["wlln-exact"],
        &["report"],
    ] {
        let o = caplab_in(dir.path(), &cfg, cmd);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{cmd:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let exact = fs::read_to_string(dir.path().join("wlln-exact.csv")).unwrap();
    assert!(exact.starts_with("scenario,n,exact_lower_prob\n"));
    assert!(exact.contains("ellsberg-exact,2,0.42\n"));
    let pprime = fs::read_to_string(dir.path().join("pprime.csv")).unwrap();
    assert!(pprime
        .lines()
        .skip(1)
        .all(|l| l.ends_with("true,true,true")));
}

#[test]
fn product_fubini_rejects_an_explicit_joint() {
    let dir = tempfile::tempdir().unwrap();
    let o = caplab_in(
        dir.path(),
        &example("correlated_coupling.json"),
        &["product-fubini", "--model", "coupled"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_record(&o)["error"], "independence");
}

#[test]
fn monte_carlo_writes_samples_curves_and_chart() {
    let dir = tempfile::tempdir().unwrap();
    let o = caplab_in(
        dir.path(),
        &example("wlln_mean_uncertainty.json"),
        &["wlln-mc"],
    );
    assert_eq!(o.status.code(), Some(0));

    let samples = fs::read_to_string(dir.path().join("wlln-samples.csv")).unwrap();
    assert!(samples.starts_with("scenario,n,rep,sample_mean,in_band\n"));
    let fig = samples
        .lines()
        .filter(|l| l.starts_with("mean-uncertainty,"))
        .count();
    assert_eq!(fig, 600);

    let curves = fs::read_to_string(dir.path().join("wlln-curves.csv")).unwrap();
    assert!(curves.starts_with("scenario,n,frequency\n"));
    assert_eq!(
        curves
            .lines()
            .filter(|l| l.starts_with("mean-uncertainty,"))
            .count(),
        6
    );

    let svg = fs::read_to_string(dir.path().join("wlln-curves.svg")).unwrap();
    assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 4);
    assert!(!svg.contains("href"));
}

#[test]
fn format_flag_limits_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("wlln_variance_uncertainty.json");
    let o = caplab_in(dir.path(), &cfg, &["--format", "csv", "wlln-mc"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("wlln-curves.csv").exists());
    assert!(!dir.path().join("wlln-curves.svg").exists());
}

#[test]
fn seed_flag_and_env_fallback_agree() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = example("ellsberg_1_1.json");
    let args = ["check-independence", "--kind", "exp", "--model", "pair"];
    let mut with_flag = vec!["--seed", "99"];
    with_flag.extend_from_slice(&args);
    assert_eq!(caplab_in(a.path(), &cfg, &with_flag).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_caplab"))
        .env("CAPLAB_SEED", "99")
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            b.path().to_str().unwrap(),
        ])
        .args(args)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let file = "independence-exp-pair.csv";
    assert_eq!(
        fs::read(a.path().join(file)).unwrap(),
        fs::read(b.path().join(file)).unwrap()
    );
}

#[test]
fn empty_file_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    fs::write(&path, "").unwrap();
    let o = caplab(&["--config", path.to_str().unwrap(), "validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_record(&o)["error"], "parse");
}

#[test]
fn overfull_probability_row_is_an_invariant_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"version": 1, "spaces": {"urn": ["R", "B"]},
            "urns": {"u": {"space": "urn", "members": [[0.5, 0.5], [0.6, 0.6]], "values": [1, 0]}}}"#,
    )
    .unwrap();
    let o = caplab(&["--config", path.to_str().unwrap(), "validate"]);
    assert_eq!(o.status.code(), Some(1));
    let rec = error_record(&o);
    assert_eq!(rec["error"], "invariant");
    let violations = rec["violations"].as_array().unwrap();
    assert_eq!(violations.len(), 1);
    assert!(violations[0]["path"]
        .as_str()
        .unwrap()
        .contains("members[1]"));
}

#[test]
fn dangling_references_are_all_listed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("refs.json");
    fs::write(
        &path,
        r#"{"version": 1,
            "urns": {"u": {"space": "nowhere", "members": [[1.0]], "values": [0]}},
            "models": {"m": {"urns": ["u", "ghost"], "phis": []}}}"#,
    )
    .unwrap();
    let o = caplab(&["--config", path.to_str().unwrap(), "validate"]);
    assert_eq!(o.status.code(), Some(1));
    let rec = error_record(&o);
    assert_eq!(rec["error"], "reference");
    assert!(rec["violations"].as_array().unwrap().len() >= 2);
}

#[test]
fn unknown_fields_are_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("schema.json");
    fs::write(&path, r#"{"version": 1, "colour": "red"}"#).unwrap();
    let o = caplab(&["--config", path.to_str().unwrap(), "validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_record(&o)["error"], "schema");
}

#[test]
fn usage_errors_exit_one_with_a_record() {
    let o = caplab(&["validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_record(&o)["error"], "usage");

    let o = caplab(&[
        "--config",
        example("ellsberg_1_1.json").to_str().unwrap(),
        "no-such-command",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_record(&o)["error"], "usage");

    let o = caplab(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("wlln-mc"));
}

#[test]
fn in_process_entry_point_matches_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("ellsberg_1_1.json");
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = caplab::cli::main_with(
        [
            "caplab",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "wlln-exact",
        ],
        &mut out,
        &mut err,
    );
    assert_eq!(code, 0);
    assert!(err.is_empty());
    assert!(String::from_utf8(out)
        .unwrap()
        .contains("n=2: lower probability 0.42"));
}
