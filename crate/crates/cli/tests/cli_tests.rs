//! End-to-end tests of the `decoyrate` binary and the shipped fixtures:
//! every fixture parses, every documented failure exits with the right
//! code, and the subcommands compose (simulate | rate) deterministically.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use decoyrate_cli::{emit_counts, parse_config, parse_counts, Record};
use decoyrate_core::Variant;
use decoyrate_sim::expected_counts;

const BIN: &str = env!("CARGO_BIN_EXE_decoyrate");

/// Fixture directory: `DECOYRATE_FIXTURES` override or the workspace copy.
fn fixtures() -> PathBuf {
    match std::env::var_os("DECOYRATE_FIXTURES") {
        Some(dir) => PathBuf::from(dir),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"),
    }
}

fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_str(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 stdout")
}

fn stderr_str(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("utf-8 stderr")
}

/// Record portion of stdout: the `key = value` block starting at
/// `command = ...` (a human-readable table may precede it).
fn record_from_stdout(output: &Output) -> Record {
    let text = stdout_str(output);
    let record_lines: String = text
        .lines()
        .skip_while(|line| !line.starts_with("command = "))
        .map(|line| format!("{line}\n"))
        .collect();
    Record::parse(&record_lines).expect("stdout carries a parseable record")
}

#[test]
fn every_shipped_fixture_parses() {
    let dir = fixtures();
    let mut toml_count = 0;
    let mut csv_count = 0;
    for entry in std::fs::read_dir(&dir).expect("fixtures directory exists") {
        let path = entry.expect("readable entry").path();
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => {
                let parsed = parse_config(&path)
                    .unwrap_or_else(|e| panic!("{} failed: {e}", path.display()));
                toml_count += 1;
                // Protocol fixtures must carry a [protocol] section; the
                // receiver-constants fixture is system-only.
                if path.file_name().unwrap().to_str().unwrap().starts_with("s1-") {
                    assert!(parsed.protocol.is_some(), "{} lacks [protocol]", path.display());
                }
            }
            Some("csv") => {
                let table = parse_counts(&path)
                    .unwrap_or_else(|e| panic!("{} failed: {e}", path.display()));
                assert!(!table.is_empty(), "{} is empty", path.display());
                csv_count += 1;
            }
            _ => {}
        }
    }
    assert_eq!(toml_count, 19, "expected 19 config fixtures");
    assert_eq!(csv_count, 18, "expected 18 counts fixtures");
}

#[test]
fn counts_fixtures_are_complete_for_their_variant() {
    for (config, counts) in [
        ("s1-87km-4int.toml", "s2-87km-4int.csv"),
        ("s1-87km-3int-asym.toml", "s2-87km-3int-asym.csv"),
        ("s1-87km-3int-sym.toml", "s2-87km-3int-sym.csv"),
    ] {
        let cfg = parse_config(&fixture(config)).unwrap().protocol.unwrap();
        let table = parse_counts(&fixture(counts)).unwrap();
        table
            .validate_for(cfg.variant)
            .unwrap_or_else(|e| panic!("{counts} incomplete for {}: {e}", cfg.variant));
        let expected_cells = if cfg.variant == Variant::FourIntensity { 8 } else { 10 };
        assert_eq!(table.len(), expected_cells);
    }
}

#[test]
fn rate_reproduces_the_flagship_fixture() {
    let output = run(&[
        "rate",
        "--config",
        fixture("s1-87km-4int.toml").to_str().unwrap(),
        "--counts",
        fixture("s2-87km-4int.csv").to_str().unwrap(),
        "--chernoff-arg",
        "counts",
    ]);
    assert!(output.status.success(), "{}", stderr_str(&output));
    let record = record_from_stdout(&output);
    let rate = record.number("rate_per_pulse").unwrap();
    let reference = 6.481374077189432e-5;
    assert!(
        ((rate - reference) / reference).abs() < 1e-9,
        "rate {rate} vs frozen {reference}"
    );
    let bps = record.number("bits_per_second").unwrap();
    assert!((bps - rate * 6.25e8).abs() <= 1e-9 * bps.abs());
}

#[test]
fn rate_honors_the_out_flag_with_an_identical_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.rec");
    let output = run(&[
        "rate",
        "--config",
        fixture("s1-87km-4int.toml").to_str().unwrap(),
        "--counts",
        fixture("s2-87km-4int.csv").to_str().unwrap(),
        "--chernoff-arg",
        "counts",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let written = Record::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(written, record_from_stdout(&output));
}

#[test]
fn strict_zero_key_exits_3() {
    // The default interval convention is so conservative on these counts
    // that no key survives; --strict must turn that into exit code 3.
    let output = run(&[
        "rate",
        "--config",
        fixture("s1-87km-4int.toml").to_str().unwrap(),
        "--counts",
        fixture("s2-87km-4int.csv").to_str().unwrap(),
        "--strict",
    ]);
    assert_eq!(output.status.code(), Some(3), "{}", stderr_str(&output));
    let record = record_from_stdout(&output);
    assert_eq!(record.number("rate_per_pulse").unwrap(), 0.0);
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    let unknown = run(&["rate", "--no-such-flag"]);
    assert_eq!(unknown.status.code(), Some(1));
    let missing = run(&["rate"]);
    assert_eq!(missing.status.code(), Some(1));
    let bad_value = run(&[
        "optimize",
        "--distance",
        "87",
        "--variant",
        "5int",
    ]);
    assert_eq!(bad_value.status.code(), Some(1));
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();

    let missing_file = run(&[
        "rate",
        "--config",
        dir.path().join("nope.toml").to_str().unwrap(),
        "--counts",
        fixture("s2-87km-4int.csv").to_str().unwrap(),
    ]);
    assert_eq!(missing_file.status.code(), Some(2));

    let bad_counts = dir.path().join("bad.csv");
    std::fs::write(&bad_counts, "source,basis,total,error\nX2,X,100,200\n").unwrap();
    let error_exceeds_total = run(&[
        "rate",
        "--config",
        fixture("s1-87km-4int.toml").to_str().unwrap(),
        "--counts",
        bad_counts.to_str().unwrap(),
    ]);
    assert_eq!(error_exceeds_total.status.code(), Some(2));
    assert!(
        stderr_str(&error_exceeds_total).contains("exceeding total"),
        "{}",
        stderr_str(&error_exceeds_total)
    );

    let bad_config = dir.path().join("bad.toml");
    let base = std::fs::read_to_string(fixture("s1-87km-4int.toml")).unwrap();
    std::fs::write(&bad_config, format!("{base}\nshiny_new_knob = 1\n")).unwrap();
    let unknown_key = run(&[
        "rate",
        "--config",
        bad_config.to_str().unwrap(),
        "--counts",
        fixture("s2-87km-4int.csv").to_str().unwrap(),
    ]);
    assert_eq!(unknown_key.status.code(), Some(2));

    let bad_eta = run(&[
        "rate",
        "--config",
        fixture("s1-87km-4int.toml").to_str().unwrap(),
        "--counts",
        fixture("s2-87km-4int.csv").to_str().unwrap(),
        "--eta-z",
        "1.5",
    ]);
    assert_eq!(bad_eta.status.code(), Some(2));
    assert!(stderr_str(&bad_eta).contains("eta_z"), "{}", stderr_str(&bad_eta));
}

#[test]
fn simulate_with_a_seed_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    for out in [&first, &second] {
        let output = run(&[
            "simulate",
            "--config",
            fixture("s1-87km-4int.toml").to_str().unwrap(),
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "{}", stderr_str(&output));
    }
    let bytes_a = std::fs::read(&first).unwrap();
    let bytes_b = std::fs::read(&second).unwrap();
    assert_eq!(bytes_a, bytes_b);

    let other_seed = run(&[
        "simulate",
        "--config",
        fixture("s1-87km-4int.toml").to_str().unwrap(),
        "--seed",
        "12",
    ]);
    assert_ne!(stdout_str(&other_seed).into_bytes(), bytes_a);
}

#[test]
fn simulate_without_a_seed_emits_the_expected_counts() {
    let file = parse_config(&fixture("s1-87km-4int.toml")).unwrap();
    let expected = expected_counts(&file.system, file.protocol.as_ref().unwrap(), &file.sim)
        .unwrap()
        .to_counts_table()
        .unwrap();
    let output = run(&[
        "simulate",
        "--config",
        fixture("s1-87km-4int.toml").to_str().unwrap(),
    ]);
    assert!(output.status.success());
    assert_eq!(stdout_str(&output), emit_counts(&expected));
}

#[test]
fn piping_simulate_into_rate_twice_gives_identical_rates() {
    let simulate_once = || -> Vec<u8> {
        let output = run(&[
            "simulate",
            "--config",
            fixture("s1-87km-4int.toml").to_str().unwrap(),
            "--seed",
            "7",
        ]);
        assert!(output.status.success());
        output.stdout
    };
    let rate_on = |csv: &[u8]| -> f64 {
        let mut child = Command::new(BIN)
            .args([
                "rate",
                "--config",
                fixture("s1-87km-4int.toml").to_str().unwrap(),
                "--counts",
                "-",
                "--chernoff-arg",
                "counts",
            ])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .expect("binary spawns");
        child.stdin.as_mut().unwrap().write_all(csv).unwrap();
        let output = child.wait_with_output().unwrap();
        assert!(output.status.success(), "{}", stderr_str(&output));
        record_from_stdout(&output).number("rate_per_pulse").unwrap()
    };
    let first = rate_on(&simulate_once());
    let second = rate_on(&simulate_once());
    assert_eq!(first, second);
    assert!(first > 0.0);
}

#[test]
fn sweep_emits_the_documented_csv_shape() {
    let output = run(&[
        "sweep",
        "--eta-z",
        "0.10",
        "--eta-x",
        "0.05",
        "--from",
        "50",
        "--to",
        "60",
        "--step",
        "10",
        "--restarts",
        "2",
        "--chernoff-arg",
        "counts",
    ]);
    assert!(output.status.success(), "{}", stderr_str(&output));
    let text = stdout_str(&output);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("distance_km,variant,R_per_pulse,bps"));
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 6, "2 distances x 3 variants");
    let expected_shape = [
        ("50", "4int"),
        ("50", "3int-asym"),
        ("50", "3int-sym"),
        ("60", "4int"),
        ("60", "3int-asym"),
        ("60", "3int-sym"),
    ];
    for (row, (distance, variant)) in rows.iter().zip(expected_shape) {
        assert_eq!(row.len(), 4);
        assert_eq!(row[0], distance);
        assert_eq!(row[1], variant);
        let rate: f64 = row[2].parse().expect("numeric rate");
        let bps: f64 = row[3].parse().expect("numeric bps");
        assert!(rate.is_finite() && rate >= 0.0);
        assert!((bps - rate * 6.25e8).abs() <= 1e-9 * bps.abs().max(1.0));
    }
    let bad_range = run(&["sweep", "--from", "60", "--to", "50", "--step", "10"]);
    assert_eq!(bad_range.status.code(), Some(2));
}

#[test]
fn optimize_record_round_trips_through_rate_semantics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("opt.rec");
    let output = run(&[
        "optimize",
        "--distance",
        "87",
        "--variant",
        "3int-asym",
        "--seed",
        "3",
        "--restarts",
        "4",
        "--chernoff-arg",
        "counts",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr_str(&output));
    let record = Record::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(record.get("variant"), Some("3int-asym"));
    assert!(record.number("rate_per_pulse").unwrap() > 0.0);
    // The emitted parameters satisfy the 3-intensity shape: tied
    // intensities and a vacuum slot in the per-basis budget.
    assert_eq!(record.number("mu_z1").unwrap(), record.number("mu_x1").unwrap());
    assert_eq!(record.number("mu_z2").unwrap(), record.number("mu_x2").unwrap());
    assert!(record.number("p_vac").unwrap() > 0.0);
}

#[test]
fn compare_reports_the_rate_ratio_between_two_records() {
    let dir = tempfile::tempdir().unwrap();
    let four = dir.path().join("4int.rec");
    let sym = dir.path().join("3sym.rec");
    for (config, counts, out) in [
        ("s1-87km-4int.toml", "s2-87km-4int.csv", &four),
        ("s1-87km-3int-sym.toml", "s2-87km-3int-sym.csv", &sym),
    ] {
        let output = run(&[
            "rate",
            "--config",
            fixture(config).to_str().unwrap(),
            "--counts",
            fixture(counts).to_str().unwrap(),
            "--chernoff-arg",
            "counts",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "{}", stderr_str(&output));
    }
    let output = run(&["compare", four.to_str().unwrap(), sym.to_str().unwrap()]);
    assert!(output.status.success(), "{}", stderr_str(&output));
    let record = record_from_stdout(&output);
    let a = Record::parse(&std::fs::read_to_string(&four).unwrap()).unwrap();
    let b = Record::parse(&std::fs::read_to_string(&sym).unwrap()).unwrap();
    let expected = a.number("rate_per_pulse").unwrap() / b.number("rate_per_pulse").unwrap();
    assert_eq!(record.number("rate_ratio").unwrap(), expected);
    assert!(expected > 1.0, "4-intensity should beat the balanced variant");
}
