//! End-to-end tests of the `opfrelax` binary: exit codes, report
//! shapes, determinism under batching, and the promise that the CLI is
//! a thin shell whose numbers match the library API exactly.

use opfrelax::analysis::{analyze_case, AnalysisOptions, CaseReport};
use opfrelax::case_io::builtin_case;
use opfrelax::solvers::SolverConfig;
use std::process::{Command, Output};

fn opfrelax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opfrelax"))
        .args(args)
        .env_remove("OPFRELAX_CHECK_BREAK")
        .env_remove("OPFRELAX_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

/// The solve subcommand with default flags must reproduce, bit for bit,
/// what the library produces with its default options; the CLI adds no
/// numerics of its own.
#[test]
fn solve_report_matches_the_library_api_exactly() {
    let out = opfrelax(&["solve", "--case", "builtin:case3_base"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let cli: CaseReport = serde_json::from_str(&stdout_of(&out)).expect("valid report JSON");

    let net = builtin_case("case3_base").unwrap();
    let lib = analyze_case(&net, &AnalysisOptions::default(), &SolverConfig::default()).unwrap();

    assert_eq!(cli.case, lib.case);
    assert_eq!(cli.ac.objective, lib.ac.objective, "nonconvex objective drifted");
    assert_eq!(cli.ac.status, lib.ac.status);
    assert_eq!(cli.ac.iterations, lib.ac.iterations);
    assert_eq!(cli.relaxations.len(), lib.relaxations.len());
    for (c, l) in cli.relaxations.iter().zip(&lib.relaxations) {
        assert_eq!(c.kind, l.kind);
        assert_eq!(c.variant, l.variant);
        assert_eq!(c.bound, l.bound, "{} bound drifted", c.kind);
        assert_eq!(c.gap_percent, l.gap_percent);
        assert_eq!(c.status, l.status);
        assert_eq!(c.iterations, l.iterations);
        assert_eq!(c.ac_feasible, l.ac_feasible);
    }
    let (ccp, lcp) = (cli.copper_plate.unwrap(), lib.copper_plate.unwrap());
    assert_eq!(ccp.bound, lcp.bound, "copper-plate bound drifted");
    assert_eq!(ccp.gap_percent, lcp.gap_percent);
    assert_eq!(ccp.ac_feasible, None);

    // And the values themselves sit where the bundled case pins them.
    assert!((cli.ac.objective - 5812.64).abs() / 5812.64 < 1e-3);
    let gap = |kind: &str| {
        cli.relaxations
            .iter()
            .find(|r| r.kind == kind)
            .map(|r| r.gap_percent)
            .expect("row present")
    };
    assert!((gap("soc") - 1.32).abs() < 0.15, "soc gap {}", gap("soc"));
    assert!((gap("qc") - 1.24).abs() < 0.15, "qc gap {}", gap("qc"));
    assert!((ccp.gap_percent - 2.99).abs() < 0.05, "cp gap {}", ccp.gap_percent);
}

#[test]
fn missing_case_file_is_a_usage_error_naming_the_path() {
    let out = opfrelax(&["solve", "--case", "/no/such/dir/case999.m"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("/no/such/dir/case999.m"),
        "stderr should name the path: {}",
        stderr_of(&out)
    );
}

#[test]
fn unknown_builtin_is_a_usage_error_listing_the_builtins() {
    let out = opfrelax(&["solve", "--case", "builtin:case9999"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("case9999"), "stderr: {err}");
    assert!(err.contains("case3_base"), "stderr should list builtins: {err}");
}

#[test]
fn solve_flags_iteration_starvation_with_exit_code_one() {
    let out = opfrelax(&[
        "solve",
        "--case",
        "builtin:case3_base",
        "--relax",
        "cp",
        "--max-iter",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_of(&out));
}

#[test]
fn csv_batches_merge_under_one_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("batch.csv");
    let out = opfrelax(&[
        "solve",
        "--case",
        "builtin:case3_base",
        "--case",
        "builtin:case3_sad18",
        "--relax",
        "cp",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "case,base_mva,kind,variant,value,gap_percent,status,iterations,runtime_s,\
         ac_feasible,numeric_warning"
    );
    // Two cases, each one nonconvex row plus one copper-plate row.
    assert_eq!(lines.len(), 5, "unexpected table:\n{text}");
    assert!(lines[1].contains(",ac,"), "first data row is the reference solve");
    assert!(lines[2].contains(",copper-plate,"));
}

#[test]
fn batch_output_is_identical_across_thread_caps() {
    // Wall-clock runtimes vary run to run by nature; every other field
    // must be reproduced exactly regardless of how the batch is split
    // across workers.
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_opfrelax"))
            .args([
                "solve",
                "--case",
                "builtin:case3_base",
                "--case",
                "builtin:case3_sad18",
                "--relax",
                "cp",
                "--format",
                "csv",
            ])
            .env("OPFRELAX_THREADS", threads)
            .env_remove("OPFRELAX_CHECK_BREAK")
            .output()
            .expect("binary runs");
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
        let text = stdout_of(&out);
        let runtime_col = 8;
        text.lines()
            .map(|line| {
                line.split(',')
                    .enumerate()
                    .map(|(i, f)| if i == runtime_col { "-" } else { f })
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(run("1"), run("2"), "report values depend on the thread cap");
}

#[test]
fn check_reports_cleanly_with_no_samples() {
    let out = opfrelax(&["check", "--samples", "0", "--nets", "0"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("flow identities: no samples"));
}

#[test]
fn check_fails_loudly_when_an_identity_breaks() {
    let out = Command::new(env!("CARGO_BIN_EXE_opfrelax"))
        .args(["check", "--samples", "10", "--nets", "0"])
        .env("OPFRELAX_CHECK_BREAK", "1")
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_of(&out).contains("FAIL"), "stdout: {}", stdout_of(&out));
}

#[test]
fn sdp_export_is_byte_stable_and_validates_paths() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.dat-s");
    let b = dir.path().join("b.dat-s");
    for path in [&a, &b] {
        let out = opfrelax(&[
            "export-sdp",
            "--case",
            "builtin:case3_base",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    }
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, bytes_b, "re-export is not deterministic");

    let bad = opfrelax(&[
        "export-sdp",
        "--case",
        "builtin:case3_base",
        "--out",
        "/no/such/dir/out.dat-s",
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr_of(&bad).contains("/no/such/dir/out.dat-s"));
}

#[test]
fn bench_with_zero_repeats_emits_only_the_header() {
    let out = opfrelax(&["bench", "--case", "builtin:case3_base", "--repeats", "0"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert_eq!(
        stdout_of(&out),
        "case,family,variant,n_vars,n_rows,build_s,solve_s,iterations,bound,status\n"
    );
}

#[test]
fn bench_times_both_families_in_both_closures() {
    let out = opfrelax(&["bench", "--case", "builtin:case3_base", "--repeats", "1"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4, "soc/qc times w/c closures:\n{text}");
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 10, "row: {row}");
        assert!(matches!(fields[1], "soc" | "qc"), "row: {row}");
        assert!(matches!(fields[2], "w" | "c"), "row: {row}");
        assert_eq!(fields[9], "optimal", "row: {row}");
    }
}
