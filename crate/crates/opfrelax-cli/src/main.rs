//! Command-line front end for the relaxation toolkit: parse a case,
//! build the requested programs, solve them, and report bound quality.
//!
//! Subcommands:
//!
//! * `solve`      — nonconvex reference solve plus selected relaxations,
//!                  with optimality gaps, as JSON or CSV;
//! * `check`      — randomized self-test suites: algebraic flow
//!                  identities and the two-sided closure equivalence;
//! * `export-sdp` — write the semidefinite strengthening in SDPA sparse
//!                  format (see `docs/sdp-export.md`);
//! * `bench`      — build/solve timings for both cone closures.
//!
//! Every subcommand is a thin shell over the `opfrelax` library; the
//! same inputs through the library API give identical values.
//!
//! Exit codes: 0 — success; 1 — a solve or suite missed its target
//! (non-optimal status, tolerance violation); 2 — usage, parse, or I/O
//! error. Batches run cases in parallel, capped by the
//! `OPFRELAX_THREADS` environment variable (default: available cores);
//! per-case solves stay single-threaded and deterministic, and output
//! order always follows input order.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use opfrelax::analysis::bench::bench_variants;
use opfrelax::analysis::equivalence::{compare_variants, random_extended_network};
use opfrelax::analysis::identities::run_identity_suite;
use opfrelax::analysis::{analyze_case, AnalysisOptions, CaseReport, RelaxKind};
use opfrelax::case_io::report::{render_report, ReportFormat, CSV_HEADER};
use opfrelax::case_io::{builtin_case, matpower::parse_matpower, BUILTIN_NAMES};
use opfrelax::formulations::sdp::build_sdp;
use opfrelax::formulations::ConeVariant;
use opfrelax::network::Network;
use opfrelax::solvers::SolverConfig;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "opfrelax",
    version,
    about = "Optimal power flow relaxations: solve, cross-check, export, and time them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the nonconvex problem and relaxations, report gaps.
    Solve(SolveArgs),
    /// Run the randomized identity and closure-equivalence suites.
    Check(CheckArgs),
    /// Export the semidefinite strengthening as a .dat-s file.
    ExportSdp(ExportArgs),
    /// Time building and solving both cone closures.
    Bench(BenchArgs),
}

/// Cone closure selector; `w` puts the cone on voltage products, `c`
/// on the squared branch current.
#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    W,
    C,
}

impl From<VariantArg> for ConeVariant {
    fn from(v: VariantArg) -> ConeVariant {
        match v {
            VariantArg::W => ConeVariant::VoltageProduct,
            VariantArg::C => ConeVariant::Current,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> ReportFormat {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Case file path or `builtin:<name>`; repeat for a batch.
    #[arg(long = "case", value_name = "PATH", required = true)]
    cases: Vec<String>,
    /// Comma-separated relaxations: soc, qc, cp, or all.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    relax: Vec<String>,
    /// Cone closure used for soc and qc.
    #[arg(long, value_enum, default_value_t = VariantArg::W)]
    variant: VariantArg,
    /// Interior-point feasibility and gap tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Iteration cap per solve.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Residual threshold for the AC-feasibility verdict on projected
    /// relaxation points.
    #[arg(long, default_value_t = 1e-6)]
    feas_tol: f64,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Args)]
struct CheckArgs {
    /// Seed for every randomized suite.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Random samples per flow-identity family.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Randomized extended networks for the closure cross-check (the
    /// bundled base case is always included).
    #[arg(long, default_value_t = 3)]
    nets: usize,
}

#[derive(Args)]
struct ExportArgs {
    /// Case file path or `builtin:<name>`.
    #[arg(long, value_name = "PATH")]
    case: String,
    /// Destination file; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Case file path or `builtin:<name>`; repeat for a batch.
    #[arg(long = "case", value_name = "PATH", required = true)]
    cases: Vec<String>,
    /// Timing repetitions per formulation; the minimum over runs is
    /// reported. 0 emits an empty table.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Interior-point feasibility and gap tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Iteration cap per solve.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Check(args) => cmd_check(args),
        Command::ExportSdp(args) => cmd_export_sdp(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

/// Loads a case from a file path or from the embedded set via the
/// `builtin:` prefix.
fn load_case(spec: &str) -> Result<Network> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        builtin_case(name)
            .with_context(|| format!("available builtins: {}", BUILTIN_NAMES.join(", ")))
    } else {
        let text = std::fs::read_to_string(spec)
            .with_context(|| format!("cannot read case file '{spec}'"))?;
        parse_matpower(&text).with_context(|| format!("cannot parse case file '{spec}'"))
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("cannot write '{}'", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Number of batch workers: `OPFRELAX_THREADS` if set and positive,
/// otherwise the available parallelism, never more than `jobs`.
fn thread_cap(jobs: usize) -> usize {
    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    std::env::var("OPFRELAX_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(hw)
        .clamp(1, jobs.max(1))
}

/// Applies `f` to every job on a capped pool of scoped threads,
/// returning results in input order.
fn par_map<J: Sync, T: Send>(jobs: &[J], f: impl Fn(&J) -> T + Sync) -> Vec<T> {
    let cap = thread_cap(jobs.len());
    let mut slots: Vec<Option<T>> = jobs.iter().map(|_| None).collect();
    if cap <= 1 {
        for (job, slot) in jobs.iter().zip(slots.iter_mut()) {
            *slot = Some(f(job));
        }
    } else {
        let chunk = jobs.len().div_ceil(cap);
        let f = &f;
        std::thread::scope(|scope| {
            for (job_chunk, slot_chunk) in jobs.chunks(chunk).zip(slots.chunks_mut(chunk)) {
                scope.spawn(move || {
                    for (job, slot) in job_chunk.iter().zip(slot_chunk.iter_mut()) {
                        *slot = Some(f(job));
                    }
                });
            }
        });
    }
    slots.into_iter().map(|s| s.expect("every job ran")).collect()
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "ok"
    } else {
        "FAIL"
    }
}

fn exit_flag(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// Expands and deduplicates the `--relax` tokens, keeping input order;
/// `all` means copper plate, then SOC, then QC.
fn parse_relax(tokens: &[String]) -> Result<Vec<RelaxKind>> {
    let mut kinds = Vec::new();
    let push = |k: RelaxKind, kinds: &mut Vec<RelaxKind>| {
        if !kinds.contains(&k) {
            kinds.push(k);
        }
    };
    for token in tokens {
        if token.eq_ignore_ascii_case("all") {
            for k in [RelaxKind::CopperPlate, RelaxKind::Soc, RelaxKind::Qc] {
                push(k, &mut kinds);
            }
        } else {
            let k: RelaxKind = token.parse().map_err(|e: String| anyhow::anyhow!(e))?;
            push(k, &mut kinds);
        }
    }
    if kinds.is_empty() {
        bail!("at least one relaxation must be selected");
    }
    Ok(kinds)
}

/// True when the reference solve and every relaxation reached the
/// optimal status.
fn all_optimal(report: &CaseReport) -> bool {
    report.ac.status == "optimal"
        && report
            .relaxations
            .iter()
            .chain(report.copper_plate.iter())
            .all(|r| r.status == "optimal")
}

/// One stderr progress line per solve so batches stay observable when
/// the report goes to a file.
fn print_summary(report: &CaseReport) {
    eprintln!(
        "{}: ac {:.4} $/h ({}, {} it)",
        report.case, report.ac.objective, report.ac.status, report.ac.iterations
    );
    for row in report.relaxations.iter().chain(report.copper_plate.iter()) {
        let variant = row
            .variant
            .as_deref()
            .map(|v| format!("[{v}]"))
            .unwrap_or_default();
        eprintln!(
            "{}: {}{} bound {:.4} gap {:.4}% ({})",
            report.case, row.kind, variant, row.bound, row.gap_percent, row.status
        );
    }
}

/// Renders a batch: a single JSON object for one case, a JSON array
/// for several, or one concatenated CSV table.
fn render_reports(reports: &[CaseReport], format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => {
            if reports.len() == 1 {
                Ok(render_report(&reports[0], format)?)
            } else {
                let mut text = serde_json::to_string_pretty(reports)?;
                text.push('\n');
                Ok(text)
            }
        }
        ReportFormat::Csv => {
            let mut out = String::new();
            out.push_str(CSV_HEADER);
            out.push('\n');
            for report in reports {
                let table = render_report(report, format)?;
                for line in table.lines().skip(1) {
                    out.push_str(line);
                    out.push('\n');
                }
            }
            Ok(out)
        }
    }
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let kinds = parse_relax(&args.relax)?;
    let opts = AnalysisOptions {
        kinds,
        variant: args.variant.into(),
        feas_tol: args.feas_tol,
    };
    let cfg = SolverConfig {
        tol_feas: args.tol,
        tol_gap: args.tol,
        max_iter: args.max_iter,
        ..SolverConfig::default()
    };

    // Load everything first: a bad path or unparsable file is a usage
    // error for the whole invocation, not a per-case solve failure.
    let nets = args
        .cases
        .iter()
        .map(|spec| load_case(spec))
        .collect::<Result<Vec<_>>>()?;

    let results = par_map(&nets, |net| analyze_case(net, &opts, &cfg));
    let mut ok = true;
    let mut reports = Vec::with_capacity(results.len());
    for (spec, result) in args.cases.iter().zip(results) {
        match result {
            Ok(report) => {
                print_summary(&report);
                ok &= all_optimal(&report);
                reports.push(report);
            }
            Err(err) => {
                eprintln!("{spec}: solve failed: {err}");
                ok = false;
            }
        }
    }
    let text = render_reports(&reports, args.format.into())?;
    write_output(args.out.as_deref(), &text)?;
    Ok(exit_flag(ok))
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode> {
    const IDENTITY_TOL: f64 = 1e-9;
    const BOUND_TOL: f64 = 1e-6;
    const MAP_TOL: f64 = 1e-8;
    let mut ok = true;

    if args.samples == 0 {
        println!("flow identities: no samples");
    } else {
        let suite = run_identity_suite(args.seed, args.samples);
        let max_plain = suite.max_plain;
        let mut max_extended = suite.max_extended;
        // Failure-path hook for tests: pretend an identity broke.
        if std::env::var_os("OPFRELAX_CHECK_BREAK").is_some() {
            eprintln!("injecting an identity violation (OPFRELAX_CHECK_BREAK is set)");
            max_extended += 1.0;
        }
        let pass = max_plain <= IDENTITY_TOL && max_extended <= IDENTITY_TOL;
        println!(
            "flow identities: max err plain {max_plain:.2e}, extended {max_extended:.2e} \
             over {} samples [{}]",
            args.samples,
            verdict(pass)
        );
        ok &= pass;
    }

    // The transport maps amplify cone residuals by the squared
    // admittance magnitude, so the sources are solved an order tighter
    // than the certification tolerance.
    let cfg = SolverConfig {
        tol_feas: 1e-9,
        tol_gap: 1e-9,
        ..SolverConfig::default()
    };
    let mut nets = vec![builtin_case("case3_base")?];
    for i in 0..args.nets {
        nets.push(random_extended_network(args.seed.wrapping_add(i as u64), 4));
    }
    for net in &nets {
        for (label, envelopes) in [("soc", false), ("qc", true)] {
            match compare_variants(net, envelopes, &cfg, MAP_TOL) {
                Ok(cmp) => {
                    let pass = cmp.agrees(BOUND_TOL);
                    println!(
                        "closure equivalence ({label}) on {}: rel bound gap {:.2e}, \
                         mapped residuals {:.2e} / {:.2e} [{}]",
                        net.name,
                        cmp.relative_gap,
                        cmp.w_point_in_c.max_violation,
                        cmp.c_point_in_w.max_violation,
                        verdict(pass)
                    );
                    ok &= pass;
                }
                Err(err) => {
                    println!("closure equivalence ({label}) on {}: FAIL: {err}", net.name);
                    ok = false;
                }
            }
        }
    }
    Ok(exit_flag(ok))
}

fn cmd_export_sdp(args: ExportArgs) -> Result<ExitCode> {
    let net = load_case(&args.case)?;
    let prog = build_sdp(&net)
        .with_context(|| format!("cannot build the SDP strengthening of '{}'", args.case))?;
    write_output(args.out.as_deref(), &prog.to_dat_s())?;
    let sizes: Vec<String> = prog.block_struct.iter().map(|s| s.to_string()).collect();
    eprintln!(
        "{}: {} scalar variables, {} entries, blocks [{}]",
        net.name,
        prog.var_names.len(),
        prog.entries.len(),
        sizes.join(" ")
    );
    Ok(ExitCode::SUCCESS)
}

const BENCH_HEADER: &str = "case,family,variant,n_vars,n_rows,build_s,solve_s,iterations,bound,status";

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    let cfg = SolverConfig {
        tol_feas: args.tol,
        tol_gap: args.tol,
        max_iter: args.max_iter,
        ..SolverConfig::default()
    };
    let nets = args
        .cases
        .iter()
        .map(|spec| load_case(spec))
        .collect::<Result<Vec<_>>>()?;

    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    let mut ok = true;
    if args.repeats > 0 {
        let measured = par_map(&nets, |net| {
            let mut lines = Vec::new();
            let mut good = true;
            for (family, envelopes) in [("soc", false), ("qc", true)] {
                match bench_variants(net, envelopes, args.repeats, &cfg) {
                    Ok(rows) => {
                        for row in rows {
                            good &= row.status == "optimal";
                            lines.push(format!(
                                "{},{},{},{},{},{:.6},{:.6},{},{},{}",
                                net.name,
                                family,
                                row.variant.short_name(),
                                row.n_vars,
                                row.n_rows,
                                row.build_s,
                                row.solve_s,
                                row.iterations,
                                row.bound,
                                row.status
                            ));
                        }
                    }
                    Err(err) => {
                        good = false;
                        let msg = err.to_string().replace(',', ";");
                        lines.push(format!("{},{family},-,-,-,-,-,-,-,error: {msg}", net.name));
                    }
                }
            }
            (lines, good)
        });
        for (lines, good) in measured {
            ok &= good;
            for line in lines {
                out.push_str(&line);
                out.push('\n');
            }
        }
    }
    write_output(args.out.as_deref(), &out)?;
    Ok(exit_flag(ok))
}
