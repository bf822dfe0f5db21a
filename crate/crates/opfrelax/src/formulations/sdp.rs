//! Semidefinite strengthening exported in SDPA sparse format.
//!
//! The per-branch rotated cones of the SOC relaxation only constrain
//! 2x2 principal minors of the Hermitian voltage-product matrix
//! W with W_ij = V_i V_j*. Requiring the whole matrix to be positive
//! semidefinite is stronger. This module assembles that program over
//! real scalar variables and writes it in the SDPA sparse input format
//! (`.dat-s`) understood by external SDP solvers:
//!
//! ```text
//! minimize    c' x
//! subject to  X(x) = sum_k F_k x_k - F_0,   X(x) >= 0 (block diagonal)
//! ```
//!
//! Variable order (1-based in the file): W_ii per bus; Re W_ij, Im W_ij
//! per bus pair i < j; pg, qg per active generator; p_f, q_f, p_t, q_t
//! per active branch; one epigraph value t_g per generator with a
//! quadratic cost term.
//!
//! Blocks, in order:
//!
//! 1. the real embedding of W, size 2n: `[[X, -Y], [Y, X]]` with
//!    X = Re W symmetric and Y = Im W skew, positive semidefinite
//!    exactly when the Hermitian W is;
//! 2. one 2x2 block `[[t_g, a pg], [a pg, 1]]` per quadratic-cost
//!    generator with a = base * sqrt(c2), so t_g >= c2 (base pg)^2;
//! 3. one 3x3 arrow block `[[s, 0, p], [0, s, q], [p, q, s]]` per
//!    directed end of every branch with a finite rating s, encoding
//!    p^2 + q^2 <= s^2;
//! 4. a diagonal block holding every linear row: variable bounds,
//!    flow definitions and angle-difference rows (expressed through the
//!    pair entries rotated by the shift and scaled by the tap), and the
//!    bus balance equalities, with equalities written as paired
//!    one-sided rows.
//!
//! Entry emission is deterministic and the writer is pure, so exporting
//! the same network twice yields byte-identical files. Constant cost
//! offsets (c0) cannot be expressed in the linear objective and are
//! recorded in a header comment.

use super::{BranchCoeffs, BuildError};
use crate::network::{validate, Network};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// One coefficient entry `F_mat[block](row, col) = value`; `mat == 0`
/// is the constant matrix F_0, rows and columns are 1-based with
/// `row <= col`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpaEntry {
    pub mat: usize,
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// An assembled SDPA-form program plus naming metadata.
#[derive(Debug, Clone)]
pub struct SdpaProgram {
    /// Human-readable name of each scalar variable, index = file index - 1.
    pub var_names: Vec<String>,
    /// Block sizes in file order; negative means diagonal.
    pub block_struct: Vec<i64>,
    /// Linear objective over the scalar variables.
    pub objective: Vec<f64>,
    /// Constant cost offset not representable in the file.
    pub objective_constant: f64,
    /// Sorted coefficient entries.
    pub entries: Vec<SdpaEntry>,
    /// Case name echoed into the header comment.
    pub case_name: String,
}

impl SdpaProgram {
    /// Renders the `.dat-s` text. The output is a pure function of the
    /// program, so identical inputs produce identical bytes.
    pub fn to_dat_s(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "* sdp relaxation of case {}", self.case_name);
        let _ = writeln!(
            out,
            "* objective omits the constant cost offset {}",
            fmt_f64(self.objective_constant)
        );
        let _ = writeln!(out, "{}", self.var_names.len());
        let _ = writeln!(out, "{}", self.block_struct.len());
        let sizes: Vec<String> = self.block_struct.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "{}", sizes.join(" "));
        let cs: Vec<String> = self.objective.iter().map(|v| fmt_f64(*v)).collect();
        let _ = writeln!(out, "{}", cs.join(" "));
        for e in &self.entries {
            let _ = writeln!(out, "{} {} {} {} {}", e.mat, e.block, e.row, e.col, fmt_f64(e.value));
        }
        out
    }
}

/// Shortest round-trip decimal rendering; `17` significant digits are
/// never needed because Rust's float Display is already exact.
fn fmt_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{:.1}", v)
    } else {
        format!("{v}")
    }
}

/// A linear row over scalar variables destined for the diagonal block.
struct LinRow {
    coeffs: Vec<(usize, f64)>,
    rhs: f64,
    /// True for `>=`; `<=` rows are negated on emission.
    ge: bool,
}

/// Builds the SDP strengthening of `net` in exportable form.
pub fn build_sdp(net: &Network) -> Result<SdpaProgram, BuildError> {
    validate(net).map_err(BuildError::InvalidNetwork)?;
    let index = net.bus_index();
    let n = net.buses.len();
    let active_gens = net.active_gens();
    let active_branches = net.active_branches();
    for &b in &active_branches {
        let br = &net.branches[b];
        if br.from == br.to {
            return Err(BuildError::NotApplicable(format!(
                "branch {}-{} is a self-loop; the pair lift has no entry for it",
                br.from, br.to
            )));
        }
    }
    for &g in &active_gens {
        if net.gens[g].cost.c2 < 0.0 {
            return Err(BuildError::NotApplicable(format!(
                "generator at bus {} has concave cost; the epigraph block needs c2 >= 0",
                net.gens[g].bus
            )));
        }
    }

    // --- variable table -------------------------------------------------
    let mut names: Vec<String> = Vec::new();
    let mut w_var = Vec::with_capacity(n);
    for bus in &net.buses {
        w_var.push(names.len());
        names.push(format!("W[{}]", bus.id));
    }
    let mut pair_var: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            let re = names.len();
            names.push(format!("ReW[{},{}]", net.buses[i].id, net.buses[j].id));
            let im = names.len();
            names.push(format!("ImW[{},{}]", net.buses[i].id, net.buses[j].id));
            pair_var.insert((i, j), (re, im));
        }
    }
    let mut pg_var = Vec::new();
    let mut qg_var = Vec::new();
    for &g in &active_gens {
        pg_var.push(names.len());
        names.push(format!("pg[{}#{g}]", net.gens[g].bus));
        qg_var.push(names.len());
        names.push(format!("qg[{}#{g}]", net.gens[g].bus));
    }
    let mut flow_var = Vec::new();
    for &b in &active_branches {
        let br = &net.branches[b];
        let tag = format!("{}-{}#{b}", br.from, br.to);
        let base = names.len();
        for what in ["pf", "qf", "pt", "qt"] {
            names.push(format!("{what}[{tag}]"));
        }
        flow_var.push(base);
    }
    let mut t_var: Vec<Option<usize>> = Vec::new();
    for &g in &active_gens {
        if net.gens[g].cost.c2 > 0.0 {
            t_var.push(Some(names.len()));
            names.push(format!("t[{}#{g}]", net.gens[g].bus));
        } else {
            t_var.push(None);
        }
    }
    let m = names.len();

    // --- objective -------------------------------------------------------
    let base = net.base_mva;
    let mut objective = vec![0.0; m];
    let mut constant = 0.0;
    for (gk, &g) in active_gens.iter().enumerate() {
        let cost = &net.gens[g].cost;
        objective[pg_var[gk]] += cost.c1 * base;
        if let Some(t) = t_var[gk] {
            objective[t] += 1.0;
        }
        constant += cost.c0;
    }

    let mut entries: Vec<SdpaEntry> = Vec::new();
    let push = |entries: &mut Vec<SdpaEntry>, mat: usize, block: usize, row: usize, col: usize, value: f64| {
        if value != 0.0 {
            entries.push(SdpaEntry { mat, block, row, col, value });
        }
    };

    // --- block 1: real embedding of the W matrix -------------------------
    let mut block_struct: Vec<i64> = vec![2 * n as i64];
    for i in 0..n {
        push(&mut entries, w_var[i] + 1, 1, i + 1, i + 1, 1.0);
        push(&mut entries, w_var[i] + 1, 1, n + i + 1, n + i + 1, 1.0);
    }
    for (&(i, j), &(re, im)) in &pair_var {
        push(&mut entries, re + 1, 1, i + 1, j + 1, 1.0);
        push(&mut entries, re + 1, 1, n + i + 1, n + j + 1, 1.0);
        push(&mut entries, im + 1, 1, i + 1, n + j + 1, -1.0);
        push(&mut entries, im + 1, 1, j + 1, n + i + 1, 1.0);
    }

    // --- epigraph blocks --------------------------------------------------
    let mut block_no = 1;
    for (gk, &g) in active_gens.iter().enumerate() {
        let Some(t) = t_var[gk] else { continue };
        block_no += 1;
        block_struct.push(2);
        let alpha = base * net.gens[g].cost.c2.sqrt();
        push(&mut entries, t + 1, block_no, 1, 1, 1.0);
        push(&mut entries, pg_var[gk] + 1, block_no, 1, 2, alpha);
        push(&mut entries, 0, block_no, 2, 2, -1.0);
    }

    // --- thermal arrow blocks ----------------------------------------------
    let mut coeffs = Vec::with_capacity(active_branches.len());
    for (bk, &b) in active_branches.iter().enumerate() {
        let k = BranchCoeffs::new(&net.branches[b])?;
        if k.rate.is_finite() {
            for side in 0..2 {
                block_no += 1;
                block_struct.push(3);
                let p = flow_var[bk] + 2 * side;
                let q = p + 1;
                push(&mut entries, p + 1, block_no, 1, 3, 1.0);
                push(&mut entries, q + 1, block_no, 2, 3, 1.0);
                for d in 1..=3 {
                    push(&mut entries, 0, block_no, d, d, -k.rate);
                }
            }
        }
        coeffs.push(k);
    }

    // --- linear rows for the diagonal block --------------------------------
    let mut rows: Vec<LinRow> = Vec::new();
    for (i, bus) in net.buses.iter().enumerate() {
        rows.push(LinRow { coeffs: vec![(w_var[i], 1.0)], rhs: bus.vmin * bus.vmin, ge: true });
        rows.push(LinRow { coeffs: vec![(w_var[i], 1.0)], rhs: bus.vmax * bus.vmax, ge: false });
    }
    for (gk, &g) in active_gens.iter().enumerate() {
        let gen = &net.gens[g];
        for (v, lo, hi) in [(pg_var[gk], gen.pmin, gen.pmax), (qg_var[gk], gen.qmin, gen.qmax)] {
            if lo.is_finite() {
                rows.push(LinRow { coeffs: vec![(v, 1.0)], rhs: lo, ge: true });
            }
            if hi.is_finite() {
                rows.push(LinRow { coeffs: vec![(v, 1.0)], rhs: hi, ge: false });
            }
        }
    }
    for (bk, &b) in active_branches.iter().enumerate() {
        let br = &net.branches[b];
        let k = &coeffs[bk];
        let f = index[&br.from];
        let t = index[&br.to];
        let (lo, hi) = (f.min(t), f.max(t));
        let (re_p, im_p) = pair_var[&(lo, hi)];
        let sgn = if f < t { 1.0 } else { -1.0 };
        let (cos_s, sin_s) = (k.shift.cos(), k.shift.sin());
        // Re W_b and Im W_b over the stored ordered-pair entries:
        // W_b = W_ft exp(-i shift) / tau and W_ft = Re_p + i sgn Im_p.
        let rw = (cos_s / k.tau, sgn * sin_s / k.tau);
        let iw = (-sin_s / k.tau, sgn * cos_s / k.tau);

        let defs = [
            (0usize, w_var[f], 1.0 / k.tau2, k.pf_coeffs()),
            (1, w_var[f], 1.0 / k.tau2, k.qf_coeffs()),
            (2, w_var[t], 1.0, k.pt_coeffs()),
            (3, w_var[t], 1.0, k.qt_coeffs()),
        ];
        for (slot, own, scale, (a, re, im)) in defs {
            let coeffs = vec![
                (own, a * scale),
                (re_p, re * rw.0 + im * iw.0),
                (im_p, re * rw.1 + im * iw.1),
                (flow_var[bk] + slot, -1.0),
            ];
            rows.push(LinRow { coeffs: coeffs.clone(), rhs: 0.0, ge: true });
            rows.push(LinRow { coeffs, rhs: 0.0, ge: false });
        }
        let tan_a = k.angle.tan();
        for sig in [1.0, -1.0] {
            rows.push(LinRow {
                coeffs: vec![
                    (re_p, sig * iw.0 - tan_a * rw.0),
                    (im_p, sig * iw.1 - tan_a * rw.1),
                ],
                rhs: 0.0,
                ge: false,
            });
        }
    }
    for (i, bus) in net.buses.iter().enumerate() {
        let mut p = vec![(w_var[i], -bus.gs)];
        let mut q = vec![(w_var[i], bus.bs)];
        for (gk, &g) in active_gens.iter().enumerate() {
            if index[&net.gens[g].bus] == i {
                p.push((pg_var[gk], 1.0));
                q.push((qg_var[gk], 1.0));
            }
        }
        for (bk, &b) in active_branches.iter().enumerate() {
            let br = &net.branches[b];
            if index[&br.from] == i {
                p.push((flow_var[bk], -1.0));
                q.push((flow_var[bk] + 1, -1.0));
            }
            if index[&br.to] == i {
                p.push((flow_var[bk] + 2, -1.0));
                q.push((flow_var[bk] + 3, -1.0));
            }
        }
        for (coeffs, rhs) in [(p, bus.pd), (q, bus.qd)] {
            rows.push(LinRow { coeffs: coeffs.clone(), rhs, ge: true });
            rows.push(LinRow { coeffs, rhs, ge: false });
        }
    }

    block_no += 1;
    block_struct.push(-(rows.len() as i64));
    for (slot, row) in rows.iter().enumerate() {
        let flip = if row.ge { 1.0 } else { -1.0 };
        for &(v, cv) in &row.coeffs {
            push(&mut entries, v + 1, block_no, slot + 1, slot + 1, flip * cv);
        }
        push(&mut entries, 0, block_no, slot + 1, slot + 1, flip * row.rhs);
    }

    entries.sort_by(|a, b| {
        (a.mat, a.block, a.row, a.col).cmp(&(b.mat, b.block, b.row, b.col))
    });
    Ok(SdpaProgram {
        var_names: names,
        block_struct,
        objective,
        objective_constant: constant,
        entries,
        case_name: net.name.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Branch, Bus, BusType, CostCurve, Generator};
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn two_bus() -> Network {
        Network {
            name: "doc2".into(),
            version: "2".into(),
            base_mva: 100.0,
            buses: vec![
                Bus {
                    id: 1,
                    bus_type: BusType::Reference,
                    pd: 0.0,
                    qd: 0.0,
                    gs: 0.0,
                    bs: 0.0,
                    area: 1,
                    vm: 1.0,
                    va_deg: 0.0,
                    base_kv: 135.0,
                    zone: 1,
                    vmax: 1.05,
                    vmin: 0.95,
                },
                Bus {
                    id: 2,
                    bus_type: BusType::Pq,
                    pd: 0.5,
                    qd: 0.2,
                    gs: 0.0,
                    bs: 0.0,
                    area: 1,
                    vm: 1.0,
                    va_deg: 0.0,
                    base_kv: 135.0,
                    zone: 1,
                    vmax: 1.05,
                    vmin: 0.95,
                },
            ],
            gens: vec![Generator {
                bus: 1,
                pg: 0.0,
                qg: 0.0,
                qmax: 0.8,
                qmin: -0.8,
                vg: 1.0,
                mbase: 100.0,
                in_service: true,
                pmax: 1.5,
                pmin: 0.0,
                cost: CostCurve { c2: 0.04, c1: 20.0, c0: 0.0, startup: 0.0, shutdown: 0.0 },
            }],
            branches: vec![Branch {
                from: 1,
                to: 2,
                r: 0.02,
                x: 0.1,
                b_charge: 0.04,
                rate_a: 1.0,
                rate_b: f64::INFINITY,
                rate_c: f64::INFINITY,
                tap: 1.0,
                shift: 0.0,
                in_service: true,
                ang_min_deg: -30.0,
                ang_max_deg: 30.0,
            }],
        }
    }

    /// The worked example in `docs/sdp-export.md` embeds both the input
    /// case and the exported bytes; parsing the former and exporting it
    /// must reproduce the latter exactly, so the document cannot drift
    /// from the code. The doc also claims bundled cases re-export
    /// byte-identically; check that too.
    #[test]
    fn worked_example_document_matches_the_exporter() {
        let doc = include_str!("../../../../docs/sdp-export.md");
        let fenced = |tag: &str| -> &str {
            let open = format!("```{tag}\n");
            let start = doc.find(&open).expect("fence present") + open.len();
            let len = doc[start..].find("```").expect("fence closed");
            &doc[start..start + len]
        };
        let net = crate::case_io::matpower::parse_matpower(fenced("matlab")).unwrap();
        let prog = build_sdp(&net).unwrap();
        assert_eq!(prog.to_dat_s(), fenced("text"), "docs/sdp-export.md is stale");

        for name in crate::case_io::BUILTIN_NAMES {
            let net = crate::case_io::builtin_case(name).unwrap();
            let a = build_sdp(&net).unwrap().to_dat_s();
            let b = build_sdp(&net).unwrap().to_dat_s();
            assert_eq!(a, b, "re-export of {name} is not byte-stable");
        }
    }

    #[test]
    fn export_is_deterministic_and_well_formed() {
        let net = two_bus();
        let a = build_sdp(&net).unwrap();
        let b = build_sdp(&net).unwrap();
        assert_eq!(a.to_dat_s(), b.to_dat_s());

        // 2 W + 2 pair + 2 gen + 4 flow + 1 epigraph variables.
        assert_eq!(a.var_names.len(), 11);
        // main 4x4, one epigraph, two arrows, diagonal.
        assert_eq!(a.block_struct[0], 4);
        assert_eq!(a.block_struct[1], 2);
        assert_eq!(a.block_struct[2], 3);
        assert_eq!(a.block_struct[3], 3);
        assert_eq!(a.block_struct.len(), 5);
        assert!(a.block_struct[4] < 0);
        // bounds 4 + 4, defs 8, angle rows 2, balance 8.
        assert_eq!(a.block_struct[4], -26);
        // objective: only pg (20 * 100) and the epigraph weight.
        let pg = a.var_names.iter().position(|s| s.starts_with("pg")).unwrap();
        let t = a.var_names.iter().position(|s| s.starts_with("t[")).unwrap();
        assert_eq!(a.objective[pg], 2000.0);
        assert_eq!(a.objective[t], 1.0);
        assert!(a.objective.iter().enumerate().all(|(i, &c)| c == 0.0 || i == pg || i == t));

        let text = a.to_dat_s();
        assert!(text.starts_with("* sdp relaxation of case doc2\n"));
        let mut lines = text.lines().skip(2);
        assert_eq!(lines.next(), Some("11"));
        assert_eq!(lines.next(), Some("5"));
        assert_eq!(lines.next(), Some("4 2 3 3 -26"));
    }

    /// Reassembles `X(x) = sum F_k x_k - F_0` at a feasible rank-1 point
    /// and checks every block is positive semidefinite. The point comes
    /// from complex arithmetic on chosen voltages, independent of the
    /// export path.
    #[test]
    fn rank_one_point_satisfies_every_block() {
        let mut net = two_bus();
        net.branches[0].tap = 1.04;
        net.branches[0].shift = 0.03;
        let prog = build_sdp(&net).unwrap();

        let v = [
            Complex64::from_polar(1.02, 0.0),
            Complex64::from_polar(0.99, -0.06),
        ];
        let br = &net.branches[0];
        let y = 1.0 / Complex64::new(br.r, br.x);
        let c = br.b_charge / 2.0;
        let t = Complex64::from_polar(br.tap, br.shift);
        let u = v[0] / t;
        let i_f = (y + Complex64::new(0.0, c)) * u - y * v[1];
        let s_f = u * i_f.conj();
        let i_t = (y + Complex64::new(0.0, c)) * v[1] - y * u;
        let s_t = v[1] * i_t.conj();

        let mut x = vec![0.0; prog.var_names.len()];
        let at = |names: &[String], key: &str| names.iter().position(|s| s == key).unwrap();
        x[at(&prog.var_names, "W[1]")] = v[0].norm_sqr();
        x[at(&prog.var_names, "W[2]")] = v[1].norm_sqr();
        let w12 = v[0] * v[1].conj();
        x[at(&prog.var_names, "ReW[1,2]")] = w12.re;
        x[at(&prog.var_names, "ImW[1,2]")] = w12.im;
        // One generator supplies the load plus losses at bus 1.
        x[at(&prog.var_names, "pg[1#0]")] = s_f.re;
        x[at(&prog.var_names, "qg[1#0]")] = s_f.im;
        x[at(&prog.var_names, "pf[1-2#0]")] = s_f.re;
        x[at(&prog.var_names, "qf[1-2#0]")] = s_f.im;
        x[at(&prog.var_names, "pt[1-2#0]")] = s_t.re;
        x[at(&prog.var_names, "qt[1-2#0]")] = s_t.im;
        let alpha = net.base_mva * net.gens[0].cost.c2.sqrt();
        x[at(&prog.var_names, "t[1#0]")] = (alpha * s_f.re).powi(2);

        // The chosen point must match the loads for the balance rows;
        // overwrite the loads to make it so.
        net.buses[1].pd = -s_t.re;
        net.buses[1].qd = -s_t.im;
        let prog = build_sdp(&net).unwrap();

        let sizes = prog.block_struct.clone();
        for (bi, &size) in sizes.iter().enumerate() {
            let block = bi + 1;
            let dim = size.unsigned_abs() as usize;
            let mut mat = DMatrix::<f64>::zeros(dim, dim);
            for e in &prog.entries {
                if e.block != block {
                    continue;
                }
                let sign = if e.mat == 0 { -1.0 } else { x[e.mat - 1] };
                let add = sign * e.value;
                mat[(e.row - 1, e.col - 1)] += add;
                if e.row != e.col {
                    mat[(e.col - 1, e.row - 1)] += add;
                }
            }
            let eig = mat.symmetric_eigenvalues();
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(
                min > -1e-9,
                "block {block} (size {size}) has negative eigenvalue {min}"
            );
        }
    }
}
