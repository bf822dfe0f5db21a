//! Matpower case file reader and writer.
//!
//! Supports the subset of the format that steady-state archives (NESTA
//! and the Matpower distribution) actually use: `mpc.version`,
//! `mpc.baseMVA`, and the `bus`, `gen`, `branch`, `gencost` matrices
//! with polynomial costs up to degree two. `mpc.areas` is parsed and
//! discarded (it carries no electrical data); any other `mpc.*` field
//! is a hard error rather than a silent skip, so a case relying on an
//! unsupported feature cannot be quietly misread.
//!
//! Unit handling on read: megawatt/megavar columns are divided by
//! `baseMVA`, shunt admittances likewise, branch ratings of zero mean
//! unlimited, a tap ratio of zero means nominal (1), and the shift
//! column is converted from degrees to radians. Out-of-service rows
//! (status 0) are dropped, with each generator keeping its cost row by
//! position before the drop.
//!
//! The writer inverts those conversions; parsing its output reproduces
//! the network field-for-field (floats survive exactly because values
//! are printed in shortest round-trip form).

use crate::network::{validate, Branch, Bus, BusType, CostCurve, Generator, Network, Violation};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unsupported field 'mpc.{name}' (supported: version, baseMVA, bus, gen, branch, gencost, areas)")]
    UnsupportedSection { line: usize, name: String },
    #[error("line {line}: {section} row has {got} columns, need at least {need}")]
    ShortRow { line: usize, section: &'static str, need: usize, got: usize },
    #[error("missing required section 'mpc.{0}'")]
    MissingSection(&'static str),
    #[error("empty bus section")]
    EmptyBus,
    #[error("line {line}: {msg}")]
    Unsupported { line: usize, msg: String },
    #[error("gencost has {got} rows for {gens} generators; exactly one cost row per generator is required")]
    CostCount { got: usize, gens: usize },
    #[error("parsed case failed validation:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<Violation>),
}

/// One `mpc.name = [rows];` matrix with the line it started on.
struct RawMatrix {
    rows: Vec<Vec<f64>>,
    row_lines: Vec<usize>,
    line: usize,
}

struct RawCase {
    name: String,
    version: String,
    base_mva: f64,
    bus: RawMatrix,
    gen: RawMatrix,
    branch: RawMatrix,
    gencost: Option<RawMatrix>,
}

/// Strips a `%` comment, honoring single-quoted strings.
fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '\'' => in_str = !in_str,
            '%' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_value(tok: &str, line: usize) -> Result<f64, ParseError> {
    tok.parse::<f64>().map_err(|_| ParseError::Syntax {
        line,
        msg: format!("cannot parse number '{tok}'"),
    })
}

fn scan(text: &str) -> Result<RawCase, ParseError> {
    let mut name = String::from("case");
    let mut version = String::from("2");
    let mut base_mva: Option<f64> = None;
    let mut matrices: Vec<(String, RawMatrix)> = Vec::new();

    let mut lines = text.lines().enumerate().peekable();
    while let Some((idx, raw)) = lines.next() {
        let lineno = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("function") {
            // `function mpc = casename`
            if let Some(eq) = rest.find('=') {
                name = rest[eq + 1..].trim().trim_end_matches(';').trim().to_string();
            }
            continue;
        }
        let Some(rest) = line.strip_prefix("mpc.") else {
            return Err(ParseError::Syntax {
                line: lineno,
                msg: format!("expected 'mpc.<field> = ...', found '{line}'"),
            });
        };
        let Some(eq) = rest.find('=') else {
            return Err(ParseError::Syntax { line: lineno, msg: "missing '='".into() });
        };
        let field = rest[..eq].trim().to_string();
        let mut value = rest[eq + 1..].trim().to_string();

        if value.starts_with('[') {
            // Matrix: accumulate until the closing bracket.
            let start_line = lineno;
            while !value.contains(']') {
                match lines.next() {
                    Some((_, more)) => {
                        value.push('\n');
                        value.push_str(strip_comment(more).trim());
                    }
                    None => {
                        return Err(ParseError::Syntax {
                            line: start_line,
                            msg: format!("matrix 'mpc.{field}' is never closed"),
                        })
                    }
                }
            }
            let inner_end = value.find(']').unwrap();
            let inner = &value[1..inner_end];
            // Rows end at ';' or end of line; appended physical lines
            // each contributed exactly one '\n', so counting newlines
            // tracks the true source line.
            let mut rows = Vec::new();
            let mut row_lines = Vec::new();
            let mut cur_line = start_line;
            let mut buf = String::new();
            let flush = |buf: &mut String, line: usize, rows: &mut Vec<Vec<f64>>, row_lines: &mut Vec<usize>| -> Result<(), ParseError> {
                let text = buf.trim();
                if !text.is_empty() {
                    let mut row = Vec::new();
                    for tok in text.split([' ', '\t', ',']).filter(|t| !t.is_empty()) {
                        row.push(parse_value(tok, line)?);
                    }
                    rows.push(row);
                    row_lines.push(line);
                }
                buf.clear();
                Ok(())
            };
            for ch in inner.chars() {
                match ch {
                    ';' => flush(&mut buf, cur_line, &mut rows, &mut row_lines)?,
                    '\n' => {
                        flush(&mut buf, cur_line, &mut rows, &mut row_lines)?;
                        cur_line += 1;
                    }
                    _ => buf.push(ch),
                }
            }
            flush(&mut buf, cur_line, &mut rows, &mut row_lines)?;
            matrices.push((field, RawMatrix { rows, row_lines, line: start_line }));
        } else {
            let value = value.trim_end_matches(';').trim();
            match field.as_str() {
                "version" => version = value.trim_matches('\'').to_string(),
                "baseMVA" => base_mva = Some(parse_value(value, lineno)?),
                other => {
                    return Err(ParseError::UnsupportedSection { line: lineno, name: other.to_string() })
                }
            }
        }
    }

    let mut bus = None;
    let mut gen = None;
    let mut branch = None;
    let mut gencost = None;
    for (field, matrix) in matrices {
        match field.as_str() {
            "bus" => bus = Some(matrix),
            "gen" => gen = Some(matrix),
            "branch" => branch = Some(matrix),
            "gencost" => gencost = Some(matrix),
            // Legacy interchange table; carries no electrical data.
            "areas" => {}
            other => {
                return Err(ParseError::UnsupportedSection { line: matrix.line, name: other.to_string() })
            }
        }
    }
    Ok(RawCase {
        name,
        version,
        base_mva: base_mva.ok_or(ParseError::MissingSection("baseMVA"))?,
        bus: bus.ok_or(ParseError::MissingSection("bus"))?,
        gen: gen.ok_or(ParseError::MissingSection("gen"))?,
        branch: branch.ok_or(ParseError::MissingSection("branch"))?,
        gencost,
    })
}

fn bus_type(code: f64, line: usize) -> Result<BusType, ParseError> {
    match code as i64 {
        1 => Ok(BusType::Pq),
        2 => Ok(BusType::Pv),
        3 => Ok(BusType::Reference),
        4 => Ok(BusType::Isolated),
        other => Err(ParseError::Syntax { line, msg: format!("unknown bus type {other}") }),
    }
}

/// Parses Matpower case text into a validated [`Network`].
pub fn parse_matpower(text: &str) -> Result<Network, ParseError> {
    let raw = scan(text)?;
    let base = raw.base_mva;
    if raw.bus.rows.is_empty() {
        return Err(ParseError::EmptyBus);
    }

    let mut buses = Vec::with_capacity(raw.bus.rows.len());
    for (row, &line) in raw.bus.rows.iter().zip(&raw.bus.row_lines) {
        if row.len() < 13 {
            return Err(ParseError::ShortRow { line, section: "bus", need: 13, got: row.len() });
        }
        buses.push(Bus {
            id: row[0] as usize,
            bus_type: bus_type(row[1], line)?,
            pd: row[2] / base,
            qd: row[3] / base,
            gs: row[4] / base,
            bs: row[5] / base,
            area: row[6] as i64,
            vm: row[7],
            va_deg: row[8],
            base_kv: row[9],
            zone: row[10] as i64,
            vmax: row[11],
            vmin: row[12],
        });
    }

    // Costs pair with generator rows by position before any drop.
    let ng = raw.gen.rows.len();
    let mut costs = vec![CostCurve::default(); ng];
    if let Some(gencost) = &raw.gencost {
        if gencost.rows.len() != ng {
            return Err(ParseError::CostCount { got: gencost.rows.len(), gens: ng });
        }
        for (k, (row, &line)) in gencost.rows.iter().zip(&gencost.row_lines).enumerate() {
            if row.len() < 4 {
                return Err(ParseError::ShortRow { line, section: "gencost", need: 4, got: row.len() });
            }
            let model = row[0] as i64;
            if model != 2 {
                return Err(ParseError::Unsupported {
                    line,
                    msg: format!("gencost model {model} (only polynomial model 2 is supported)"),
                });
            }
            let ncost = row[3] as usize;
            if row.len() < 4 + ncost {
                return Err(ParseError::ShortRow { line, section: "gencost", need: 4 + ncost, got: row.len() });
            }
            if ncost > 3 {
                return Err(ParseError::Unsupported {
                    line,
                    msg: format!("polynomial cost of degree {} (at most quadratic is supported)", ncost - 1),
                });
            }
            let c = &row[4..4 + ncost];
            let curve = match ncost {
                3 => CostCurve { c2: c[0], c1: c[1], c0: c[2], startup: row[1], shutdown: row[2] },
                2 => CostCurve { c2: 0.0, c1: c[0], c0: c[1], startup: row[1], shutdown: row[2] },
                1 => CostCurve { c2: 0.0, c1: 0.0, c0: c[0], startup: row[1], shutdown: row[2] },
                _ => {
                    return Err(ParseError::Syntax { line, msg: "gencost row with ncost 0".into() })
                }
            };
            costs[k] = curve;
        }
    }

    let mut gens = Vec::new();
    for (k, (row, &line)) in raw.gen.rows.iter().zip(&raw.gen.row_lines).enumerate() {
        if row.len() < 10 {
            return Err(ParseError::ShortRow { line, section: "gen", need: 10, got: row.len() });
        }
        if row[7] == 0.0 {
            continue; // out of service, dropped with its cost row
        }
        gens.push(Generator {
            bus: row[0] as usize,
            pg: row[1] / base,
            qg: row[2] / base,
            qmax: row[3] / base,
            qmin: row[4] / base,
            vg: row[5],
            mbase: row[6],
            in_service: true,
            pmax: row[8] / base,
            pmin: row[9] / base,
            cost: costs[k],
        });
    }

    let mut branches = Vec::new();
    for (row, &line) in raw.branch.rows.iter().zip(&raw.branch.row_lines) {
        if row.len() < 13 {
            return Err(ParseError::ShortRow { line, section: "branch", need: 13, got: row.len() });
        }
        if row[10] == 0.0 {
            continue; // out of service
        }
        let rate = |mva: f64| if mva == 0.0 { f64::INFINITY } else { mva / base };
        branches.push(Branch {
            from: row[0] as usize,
            to: row[1] as usize,
            r: row[2],
            x: row[3],
            b_charge: row[4],
            rate_a: rate(row[5]),
            rate_b: rate(row[6]),
            rate_c: rate(row[7]),
            tap: if row[8] == 0.0 { 1.0 } else { row[8] },
            shift: row[9].to_radians(),
            in_service: true,
            ang_min_deg: row[11],
            ang_max_deg: row[12],
        });
    }

    let net = Network {
        name: raw.name,
        version: raw.version,
        base_mva: base,
        buses,
        gens,
        branches,
    };
    validate(&net).map_err(ParseError::Validation)?;
    Ok(net)
}

/// Writes `net` back out as Matpower case text (test support and case
/// generation). Floats are printed in shortest round-trip form, so
/// [`parse_matpower`] recovers the network exactly.
pub fn write_matpower(net: &Network) -> String {
    let base = net.base_mva;
    let mut out = String::new();
    let _ = writeln!(out, "function mpc = {}", net.name);
    let _ = writeln!(out, "mpc.version = '{}';", net.version);
    let _ = writeln!(out, "mpc.baseMVA = {};", fmt(base));

    let _ = writeln!(out, "\n%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin");
    let _ = writeln!(out, "mpc.bus = [");
    for b in &net.buses {
        let t = match b.bus_type {
            BusType::Pq => 1,
            BusType::Pv => 2,
            BusType::Reference => 3,
            BusType::Isolated => 4,
        };
        let _ = writeln!(
            out,
            "\t{} {} {} {} {} {} {} {} {} {} {} {} {};",
            b.id,
            t,
            fmt(b.pd * base),
            fmt(b.qd * base),
            fmt(b.gs * base),
            fmt(b.bs * base),
            b.area,
            fmt(b.vm),
            fmt(b.va_deg),
            fmt(b.base_kv),
            b.zone,
            fmt(b.vmax),
            fmt(b.vmin)
        );
    }
    let _ = writeln!(out, "];");

    let _ = writeln!(out, "\n%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin");
    let _ = writeln!(out, "mpc.gen = [");
    for g in &net.gens {
        let _ = writeln!(
            out,
            "\t{} {} {} {} {} {} {} {} {} {};",
            g.bus,
            fmt(g.pg * base),
            fmt(g.qg * base),
            fmt(g.qmax * base),
            fmt(g.qmin * base),
            fmt(g.vg),
            fmt(g.mbase),
            if g.in_service { 1 } else { 0 },
            fmt(g.pmax * base),
            fmt(g.pmin * base)
        );
    }
    let _ = writeln!(out, "];");

    let _ = writeln!(out, "\n%% fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax");
    let _ = writeln!(out, "mpc.branch = [");
    for br in &net.branches {
        let rate = |r: f64| if r.is_finite() { r * base } else { 0.0 };
        let _ = writeln!(
            out,
            "\t{} {} {} {} {} {} {} {} {} {} {} {} {};",
            br.from,
            br.to,
            fmt(br.r),
            fmt(br.x),
            fmt(br.b_charge),
            fmt(rate(br.rate_a)),
            fmt(rate(br.rate_b)),
            fmt(rate(br.rate_c)),
            fmt(br.tap),
            fmt(br.shift.to_degrees()),
            if br.in_service { 1 } else { 0 },
            fmt(br.ang_min_deg),
            fmt(br.ang_max_deg)
        );
    }
    let _ = writeln!(out, "];");

    let _ = writeln!(out, "\n%% model startup shutdown ncost c2 c1 c0");
    let _ = writeln!(out, "mpc.gencost = [");
    for g in &net.gens {
        let _ = writeln!(
            out,
            "\t2 {} {} 3 {} {} {};",
            fmt(g.cost.startup),
            fmt(g.cost.shutdown),
            fmt(g.cost.c2),
            fmt(g.cost.c1),
            fmt(g.cost.c0)
        );
    }
    let _ = writeln!(out, "];");
    out
}

fn fmt(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "Inf".into() } else { "-Inf".into() }
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
function mpc = sample2
% a two bus sample
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1  3  0.0   0.0  0  0    1  1.0  0.0  230  1  1.06  0.94; % slack
    2  1  90.0  30.0 5  -2.0 1  1.0  0.0  230  1  1.06  0.94;
];
mpc.gen = [
    1  10  0  400  -400  1.0  100  1  250  0;
    2  0   0  0    0     1.0  100  0  0    0;
];
mpc.branch = [
    1  2  0.02  0.16  0.04  80  0  0  1.02  1.5  1  -28  25;
    2  1  0.03  0.22  0.00  0   0  0  0     0    0  -30  30;
];
mpc.gencost = [
    2  100  0  3  0.05  12  30;
    2  0    0  2  9     0;
];
"#;

    #[test]
    fn parses_units_statuses_and_costs() {
        let net = parse_matpower(SAMPLE).unwrap();
        assert_eq!(net.name, "sample2");
        assert_eq!(net.base_mva, 100.0);
        assert_eq!(net.buses.len(), 2);
        assert_eq!(net.buses[1].pd, 0.9);
        assert_eq!(net.buses[1].qd, 0.3);
        assert_eq!(net.buses[1].gs, 0.05);
        assert_eq!(net.buses[1].bs, -0.02);
        assert_eq!(net.buses[0].bus_type, BusType::Reference);

        // Status-0 generator and branch are dropped entirely.
        assert_eq!(net.gens.len(), 1);
        assert_eq!(net.branches.len(), 1);
        let g = &net.gens[0];
        assert_eq!(g.pmax, 2.5);
        assert_eq!(g.qmax, 4.0);
        assert_eq!(g.cost.c2, 0.05);
        assert_eq!(g.cost.c1, 12.0);
        assert_eq!(g.cost.c0, 30.0);
        assert_eq!(g.cost.startup, 100.0);

        let br = &net.branches[0];
        assert_eq!(br.rate_a, 0.8);
        assert!(br.rate_b.is_infinite());
        assert_eq!(br.tap, 1.02);
        assert!((br.shift - 1.5f64.to_radians()).abs() < 1e-15);
        assert_eq!(br.ang_min_deg, -28.0);
        assert_eq!(br.ang_max_deg, 25.0);
    }

    #[test]
    fn zero_rating_and_zero_tap_mean_defaults() {
        let net = parse_matpower(SAMPLE).unwrap();
        // branch 2 is out of service; check branch 1 columns already.
        // A rating written as 0 means unlimited.
        assert!(net.branches[0].rate_b.is_infinite());
        assert!(net.branches[0].rate_c.is_infinite());
    }

    #[test]
    fn roundtrips_through_the_writer() {
        let net = parse_matpower(SAMPLE).unwrap();
        let back = parse_matpower(&write_matpower(&net)).unwrap();
        // Exact for identifiers and statuses; 1e-12 for floats (the
        // shift column passes through a degree/radian conversion).
        let close = |a: f64, b: f64| {
            (a == b) || (a - b).abs() <= 1e-12 * a.abs().max(1.0)
        };
        assert_eq!(net.name, back.name);
        assert_eq!(net.base_mva, back.base_mva);
        assert_eq!(net.buses.len(), back.buses.len());
        for (a, b) in net.buses.iter().zip(&back.buses) {
            assert_eq!((a.id, a.bus_type, a.area, a.zone), (b.id, b.bus_type, b.area, b.zone));
            for (x, y) in [
                (a.pd, b.pd),
                (a.qd, b.qd),
                (a.gs, b.gs),
                (a.bs, b.bs),
                (a.vm, b.vm),
                (a.va_deg, b.va_deg),
                (a.vmax, b.vmax),
                (a.vmin, b.vmin),
            ] {
                assert!(close(x, y), "{x} vs {y}");
            }
        }
        assert_eq!(net.gens.len(), back.gens.len());
        for (a, b) in net.gens.iter().zip(&back.gens) {
            assert_eq!(a.bus, b.bus);
            for (x, y) in [
                (a.pmax, b.pmax),
                (a.pmin, b.pmin),
                (a.qmax, b.qmax),
                (a.qmin, b.qmin),
                (a.cost.c2, b.cost.c2),
                (a.cost.c1, b.cost.c1),
                (a.cost.c0, b.cost.c0),
            ] {
                assert!(close(x, y), "{x} vs {y}");
            }
        }
        assert_eq!(net.branches.len(), back.branches.len());
        for (a, b) in net.branches.iter().zip(&back.branches) {
            assert_eq!((a.from, a.to), (b.from, b.to));
            for (x, y) in [
                (a.r, b.r),
                (a.x, b.x),
                (a.b_charge, b.b_charge),
                (a.rate_a, b.rate_a),
                (a.tap, b.tap),
                (a.shift, b.shift),
                (a.ang_min_deg, b.ang_min_deg),
                (a.ang_max_deg, b.ang_max_deg),
            ] {
                assert!(close(x, y), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn unknown_sections_and_bad_costs_are_rejected() {
        let with_unknown = SAMPLE.replace("mpc.gencost", "mpc.dcline = [1 2];\nmpc.gencost");
        match parse_matpower(&with_unknown) {
            Err(ParseError::UnsupportedSection { name, .. }) => assert_eq!(name, "dcline"),
            other => panic!("expected unsupported-section error, got {other:?}"),
        }

        let pwl = SAMPLE.replace("2  100  0  3  0.05  12  30;", "1  100  0  4  0 0 1 1;");
        match parse_matpower(&pwl) {
            Err(ParseError::Unsupported { msg, .. }) => assert!(msg.contains("model 1")),
            other => panic!("expected unsupported-model error, got {other:?}"),
        }

        let miscount = SAMPLE.replace("    2  0    0  2  9     0;\n", "");
        assert!(matches!(parse_matpower(&miscount), Err(ParseError::CostCount { got: 1, gens: 2 })));
    }

    #[test]
    fn empty_bus_section_is_an_error() {
        let text = "function mpc = e\nmpc.version = '2';\nmpc.baseMVA = 100;\nmpc.bus = [];\nmpc.gen = [];\nmpc.branch = [];";
        assert!(matches!(parse_matpower(text), Err(ParseError::EmptyBus)));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = "function mpc = f\nmpc.baseMVA = 100;\nmpc.bus = [\n 1 3 oops 0 0 0 1 1 0 230 1 1.1 0.9;\n];";
        match parse_matpower(text) {
            Err(ParseError::Syntax { line, msg }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("oops"));
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }
}
