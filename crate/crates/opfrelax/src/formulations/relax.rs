//! Lifted convex relaxations of the polar AC problem.
//!
//! Per bus the lift keeps W_ii = |V_i|^2; per branch it works with the
//! scaled products of the voltage seen by the series element, that is
//! W'_ff = W_ff / tau^2 and W_b = V_f V_t* / T. Two interchangeable cone
//! closures are built ([`ConeVariant`]):
//!
//! * voltage-product (`w`): variables Re W_b, Im W_b per branch, the four
//!   linear flow-definition rows, and the rotated cone
//!   (Re W_b)^2 + (Im W_b)^2 <= W'_ff W_tt;
//! * current (`c`): a squared-current variable l per branch, the rotated
//!   cone p_f^2 + q_f^2 <= W'_ff l, and three linear rows — active and
//!   reactive loss linking and the voltage-drop row — in which W_b never
//!   appears. Where the angle bound needs Re W_b / Im W_b, their exact
//!   affine images are used:
//!
//!   ```text
//!   Re W_b = (1 - c x) W'_ff - r p_f - x q_f
//!   Im W_b = -(c r) W'_ff + x p_f - r q_f
//!   ```
//!
//! The two closures describe the same feasible set through an affine
//! change of variables, so their bounds agree; the current form trades
//! two lifted voltage products for one current variable and is the shape
//! used by branch-flow style methods.
//!
//! Both variants share Kirchhoff rows, thermal quadratic rows, bounds,
//! the angle-difference rows |Im W_b| <= tan(angle) Re W_b, and the cost
//! objective. [`build_qc`] appends to the same base program the convex
//! envelope block: per-bus voltage magnitudes tied to W_ii by the square
//! envelope, per-bus angles with reference pinned, per-branch auxiliary
//! variables vv ~ v_f v_t, cs ~ cos(d), sn ~ sin(d) for the shifted
//! angle difference d, their trigonometric envelopes, and McCormick cuts
//! tying tau Re W_b = vv * cs and tau Im W_b = vv * sn. Because the QC
//! program is the SOC program plus extra rows, its bound dominates by
//! construction.

use super::{
    BranchCoeffs, BuildError, ConeRow, ConeVariant, ConicProgram, LiftedProgram, LiftedVars,
    LinExpr, LinearRow, QuadRow, Sense,
};
use crate::envelopes::{cosine_envelope, mccormick, sine_envelope, square_envelope};
use crate::network::{total_load, validate, BusType, Network};

/// Second-order cone relaxation.
pub fn build_soc(net: &Network, variant: ConeVariant) -> Result<LiftedProgram, BuildError> {
    build_lifted(net, variant, false)
}

/// Envelope-strengthened relaxation: the SOC program plus the convex
/// envelope block tying the lift back to magnitudes and angles.
pub fn build_qc(net: &Network, variant: ConeVariant) -> Result<LiftedProgram, BuildError> {
    build_lifted(net, variant, true)
}

fn add_scaled(dst: &mut LinExpr, src: &LinExpr, k: f64) {
    if k == 0.0 {
        return;
    }
    for &(v, c) in &src.terms {
        dst.push(v, k * c);
    }
    dst.constant += k * src.constant;
}

fn envelope_error(e: crate::envelopes::EnvelopeError) -> BuildError {
    BuildError::NotApplicable(format!("envelope construction failed: {e}"))
}

fn build_lifted(net: &Network, variant: ConeVariant, envelopes: bool) -> Result<LiftedProgram, BuildError> {
    validate(net).map_err(BuildError::InvalidNetwork)?;
    let index = net.bus_index();
    let mut prog = ConicProgram::new();
    let mut vars = LiftedVars::default();

    for bus in &net.buses {
        vars.bus_w.push(prog.add_var(
            format!("W[{}]", bus.id),
            bus.vmin * bus.vmin,
            bus.vmax * bus.vmax,
            1.0,
        ));
    }

    let active_gens = net.active_gens();
    let p_share = total_load(net).re / active_gens.len().max(1) as f64;
    for &g in &active_gens {
        let gen = &net.gens[g];
        vars.gen_index.push(g);
        vars.gen_p.push(prog.add_var(format!("pg[{}#{g}]", gen.bus), gen.pmin, gen.pmax, p_share));
        vars.gen_q.push(prog.add_var(format!("qg[{}#{g}]", gen.bus), gen.qmin, gen.qmax, 0.0));
    }

    // Per-branch lift, flow rows, cone, angle rows, ratings.
    let active_branches = net.active_branches();
    let mut coeffs = Vec::with_capacity(active_branches.len());
    for &b in &active_branches {
        let br = &net.branches[b];
        let k = BranchCoeffs::new(br)?;
        let f = index[&br.from];
        let t = index[&br.to];
        let tag = format!("{}-{}#{b}", br.from, br.to);
        let free = (f64::NEG_INFINITY, f64::INFINITY);
        let pf = prog.add_var(format!("pf[{tag}]"), free.0, free.1, 0.0);
        let qf = prog.add_var(format!("qf[{tag}]"), free.0, free.1, 0.0);
        let pt = prog.add_var(format!("pt[{tag}]"), free.0, free.1, 0.0);
        let qt = prog.add_var(format!("qt[{tag}]"), free.0, free.1, 0.0);
        vars.branch_index.push(b);
        vars.flow_pf.push(pf);
        vars.flow_qf.push(qf);
        vars.flow_pt.push(pt);
        vars.flow_qt.push(qt);

        let w_f = vars.bus_w[f];
        let w_t = vars.bus_w[t];
        let inv_tau2 = 1.0 / k.tau2;
        let tan_a = k.angle.tan();

        // Affine images of Re W_b / Im W_b in the active variable set.
        let (re_wb, im_wb): (LinExpr, LinExpr) = match variant {
            ConeVariant::VoltageProduct => {
                let rw = prog.add_var(format!("reW[{tag}]"), free.0, free.1, 1.0);
                let iw = prog.add_var(format!("imW[{tag}]"), free.0, free.1, 0.0);
                vars.re_w.push(rw);
                vars.im_w.push(iw);

                // Four flow-definition rows on (W'_ff | W_tt, Re, Im).
                let defs = [
                    ("pf", pf, f, inv_tau2, k.pf_coeffs()),
                    ("qf", qf, f, inv_tau2, k.qf_coeffs()),
                    ("pt", pt, t, 1.0, k.pt_coeffs()),
                    ("qt", qt, t, 1.0, k.qt_coeffs()),
                ];
                for (what, flow, own, scale, (a, re, im)) in defs {
                    let mut expr = LinExpr::default();
                    expr.push(vars.bus_w[own], a * scale);
                    expr.push(rw, re);
                    expr.push(iw, im);
                    expr.push(flow, -1.0);
                    prog.rows.push(LinearRow {
                        name: format!("def:{what}[{tag}]"),
                        expr,
                        sense: Sense::Eq,
                        rhs: 0.0,
                    });
                }
                prog.cone_rows.push(ConeRow {
                    name: format!("cone[{tag}]"),
                    u: LinExpr::term(w_f, inv_tau2),
                    w: LinExpr::term(w_t, 1.0),
                    z: vec![LinExpr::term(rw, 1.0), LinExpr::term(iw, 1.0)],
                });
                (LinExpr::term(rw, 1.0), LinExpr::term(iw, 1.0))
            }
            ConeVariant::Current => {
                let l = prog.add_var(format!("l[{tag}]"), 0.0, f64::INFINITY, 0.0);
                vars.current.push(l);
                let (r, x, c) = (k.r, k.x, k.c);
                let z2 = r * r + x * x;

                // Active-power loss: pf + pt = r l + r c^2 W'_ff + 2 r c qf.
                let mut loss_p = LinExpr::term(pf, 1.0);
                loss_p.push(pt, 1.0);
                loss_p.push(l, -r);
                loss_p.push(w_f, -r * c * c * inv_tau2);
                loss_p.push(qf, -2.0 * r * c);
                prog.rows.push(LinearRow {
                    name: format!("loss:p[{tag}]"),
                    expr: loss_p,
                    sense: Sense::Eq,
                    rhs: 0.0,
                });
                // Reactive counterpart, including the charging injections.
                let mut loss_q = LinExpr::term(qf, 1.0 - 2.0 * x * c);
                loss_q.push(qt, 1.0);
                loss_q.push(l, -x);
                loss_q.push(w_f, (c - x * c * c) * inv_tau2);
                loss_q.push(w_t, c);
                prog.rows.push(LinearRow {
                    name: format!("loss:q[{tag}]"),
                    expr: loss_q,
                    sense: Sense::Eq,
                    rhs: 0.0,
                });
                // Voltage drop along the series element:
                // W_tt = (1 - 2 c x) W'_ff - 2 (r pf + x qf)
                //        + (r^2 + x^2)(l + c^2 W'_ff + 2 c qf).
                let mut drop = LinExpr::term(w_t, 1.0);
                drop.push(w_f, -((1.0 - 2.0 * c * x) + z2 * c * c) * inv_tau2);
                drop.push(pf, 2.0 * r);
                drop.push(qf, 2.0 * x - 2.0 * z2 * c);
                drop.push(l, -z2);
                prog.rows.push(LinearRow {
                    name: format!("drop[{tag}]"),
                    expr: drop,
                    sense: Sense::Eq,
                    rhs: 0.0,
                });
                prog.cone_rows.push(ConeRow {
                    name: format!("cone[{tag}]"),
                    u: LinExpr::term(w_f, inv_tau2),
                    w: LinExpr::term(l, 1.0),
                    z: vec![LinExpr::term(pf, 1.0), LinExpr::term(qf, 1.0)],
                });

                let mut re_wb = LinExpr::term(w_f, (1.0 - c * x) * inv_tau2);
                re_wb.push(pf, -r);
                re_wb.push(qf, -x);
                let mut im_wb = LinExpr::term(w_f, -c * r * inv_tau2);
                im_wb.push(pf, x);
                im_wb.push(qf, -r);
                (re_wb, im_wb)
            }
        };

        // |Im W_b| <= tan(angle) Re W_b.
        for (sig, what) in [(1.0, "+"), (-1.0, "-")] {
            let mut expr = LinExpr::default();
            add_scaled(&mut expr, &im_wb, sig);
            add_scaled(&mut expr, &re_wb, -tan_a);
            prog.rows.push(LinearRow {
                name: format!("pad{what}[{tag}]"),
                expr,
                sense: Sense::Le,
                rhs: 0.0,
            });
        }

        if k.rate.is_finite() {
            let r2 = k.rate * k.rate;
            for (side, p, q) in [("f", pf, qf), ("t", pt, qt)] {
                prog.quad_rows.push(QuadRow {
                    name: format!("thermal:{side}[{tag}]"),
                    quad: vec![(p, p, 1.0), (q, q, 1.0)],
                    lin: LinExpr::default(),
                    rhs: r2,
                });
            }
        }
        coeffs.push(k);
    }

    // Kirchhoff rows.
    for (i, bus) in net.buses.iter().enumerate() {
        let mut p = LinExpr::default();
        let mut q = LinExpr::default();
        for (gk, &g) in vars.gen_index.iter().enumerate() {
            if index[&net.gens[g].bus] == i {
                p.push(vars.gen_p[gk], 1.0);
                q.push(vars.gen_q[gk], 1.0);
            }
        }
        p.push(vars.bus_w[i], -bus.gs);
        q.push(vars.bus_w[i], bus.bs);
        for (bk, &b) in vars.branch_index.iter().enumerate() {
            let br = &net.branches[b];
            if index[&br.from] == i {
                p.push(vars.flow_pf[bk], -1.0);
                q.push(vars.flow_qf[bk], -1.0);
            }
            if index[&br.to] == i {
                p.push(vars.flow_pt[bk], -1.0);
                q.push(vars.flow_qt[bk], -1.0);
            }
        }
        prog.rows.push(LinearRow { name: format!("kcl:p[{}]", bus.id), expr: p, sense: Sense::Eq, rhs: bus.pd });
        prog.rows.push(LinearRow { name: format!("kcl:q[{}]", bus.id), expr: q, sense: Sense::Eq, rhs: bus.qd });
    }

    // Cost on megawatt dispatch.
    let base = net.base_mva;
    for (gk, &g) in vars.gen_index.iter().enumerate() {
        let cost = &net.gens[g].cost;
        if cost.c2 != 0.0 {
            prog.objective.quad.push((vars.gen_p[gk], vars.gen_p[gk], cost.c2 * base * base));
        }
        if cost.c1 != 0.0 {
            prog.objective.lin.push((vars.gen_p[gk], cost.c1 * base));
        }
        prog.objective.constant += cost.c0;
    }

    if envelopes {
        append_envelopes(net, &index, &mut prog, &mut vars, &coeffs, variant)?;
    }

    Ok(LiftedProgram { program: prog, vars })
}

/// Emits one linear envelope cut over affine slot expressions.
fn push_cut(
    prog: &mut ConicProgram,
    name: String,
    cut: &crate::envelopes::LinearCut,
    x: &LinExpr,
    y: Option<&LinExpr>,
    aux: &LinExpr,
) {
    let mut expr = LinExpr::default();
    add_scaled(&mut expr, x, cut.cx);
    if let Some(yy) = y {
        add_scaled(&mut expr, yy, cut.cy);
    }
    add_scaled(&mut expr, aux, cut.ca);
    prog.rows.push(LinearRow { name, expr, sense: Sense::Le, rhs: cut.rhs });
}

/// The envelope block shared by every QC build: magnitude and angle
/// variables plus the cut sets tying them to the lifted products.
fn append_envelopes(
    net: &Network,
    index: &std::collections::BTreeMap<usize, usize>,
    prog: &mut ConicProgram,
    vars: &mut LiftedVars,
    coeffs: &[BranchCoeffs],
    variant: ConeVariant,
) -> Result<(), BuildError> {
    // Per-bus magnitude linked to W_ii by the square envelope.
    for (i, bus) in net.buses.iter().enumerate() {
        let v = prog.add_var(format!("v[{}]", bus.id), bus.vmin, bus.vmax, 1.0);
        vars.volt.push(v);
        let env = square_envelope(bus.vmin, bus.vmax).map_err(envelope_error)?;
        let aux = LinExpr::term(vars.bus_w[i], 1.0);
        let xexpr = LinExpr::term(v, 1.0);
        for (c, cut) in env.linear.iter().enumerate() {
            push_cut(prog, format!("env:w{c}[{}]", bus.id), cut, &xexpr, None, &aux);
        }
        for (c, cut) in env.quad.iter().enumerate() {
            prog.quad_rows.push(QuadRow {
                name: format!("env:wq{c}[{}]", bus.id),
                quad: vec![(v, v, cut.q)],
                lin: LinExpr::term(vars.bus_w[i], cut.ca),
                rhs: cut.rhs,
            });
        }
    }
    for bus in &net.buses {
        let (lb, ub) = if bus.bus_type == BusType::Reference {
            (0.0, 0.0)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        };
        vars.angle.push(prog.add_var(format!("theta[{}]", bus.id), lb, ub, 0.0));
    }

    for (bk, &b) in vars.branch_index.clone().iter().enumerate() {
        let br = &net.branches[b];
        let k = &coeffs[bk];
        let f = index[&br.from];
        let t = index[&br.to];
        let tag = format!("{}-{}#{b}", br.from, br.to);
        let (tf, tt) = (vars.angle[f], vars.angle[t]);

        // Angle-difference box in theta space.
        let mut diff = LinExpr::term(tf, 1.0);
        diff.push(tt, -1.0);
        prog.rows.push(LinearRow {
            name: format!("tpad+[{tag}]"),
            expr: diff.clone(),
            sense: Sense::Le,
            rhs: k.shift + k.angle,
        });
        let mut neg = LinExpr::default();
        add_scaled(&mut neg, &diff, -1.0);
        prog.rows.push(LinearRow {
            name: format!("tpad-[{tag}]"),
            expr: neg,
            sense: Sense::Le,
            rhs: k.angle - k.shift,
        });

        // Auxiliary lifted magnitudes/trig values with envelope ranges.
        let (vf_lo, vf_hi) = (net.buses[f].vmin, net.buses[f].vmax);
        let (vt_lo, vt_hi) = (net.buses[t].vmin, net.buses[t].vmax);
        let prod_env = mccormick(vf_lo, vf_hi, vt_lo, vt_hi).map_err(envelope_error)?;
        let cos_env = cosine_envelope(k.angle).map_err(envelope_error)?;
        let sin_env = sine_envelope(k.angle).map_err(envelope_error)?;

        let vv = prog.add_var(format!("vv[{tag}]"), prod_env.aux_range.0, prod_env.aux_range.1, 1.0);
        let cs = prog.add_var(format!("cs[{tag}]"), cos_env.aux_range.0, cos_env.aux_range.1, 1.0);
        let sn = prog.add_var(format!("sn[{tag}]"), sin_env.aux_range.0, sin_env.aux_range.1, 0.0);
        vars.vv.push(vv);
        vars.cs.push(cs);
        vars.sn.push(sn);

        // vv ~ v_f v_t.
        let xf = LinExpr::term(vars.volt[f], 1.0);
        let xt = LinExpr::term(vars.volt[t], 1.0);
        let vv_expr = LinExpr::term(vv, 1.0);
        for (c, cut) in prod_env.linear.iter().enumerate() {
            push_cut(prog, format!("env:vv{c}[{tag}]"), cut, &xf, Some(&xt), &vv_expr);
        }

        // cs ~ cos(d), sn ~ sin(d) on the affine angle difference
        // d = theta_f - theta_t - shift.
        let mut dexpr = LinExpr::term(tf, 1.0);
        dexpr.push(tt, -1.0);
        dexpr.constant = -k.shift;
        let cs_expr = LinExpr::term(cs, 1.0);
        let sn_expr = LinExpr::term(sn, 1.0);
        for (c, cut) in cos_env.linear.iter().enumerate() {
            push_cut(prog, format!("env:cs{c}[{tag}]"), cut, &dexpr, None, &cs_expr);
        }
        for (c, cut) in cos_env.quad.iter().enumerate() {
            // q (tf - tt - shift)^2 + ca cs <= rhs, expanded over the pair.
            let mut lin = LinExpr::term(cs, cut.ca);
            lin.push(tf, -2.0 * cut.q * k.shift);
            lin.push(tt, 2.0 * cut.q * k.shift);
            lin.constant += cut.q * k.shift * k.shift;
            prog.quad_rows.push(QuadRow {
                name: format!("env:csq{c}[{tag}]"),
                quad: vec![(tf, tf, cut.q), (tt, tt, cut.q), (tf, tt, -2.0 * cut.q)],
                lin,
                rhs: cut.rhs,
            });
        }
        for (c, cut) in sin_env.linear.iter().enumerate() {
            push_cut(prog, format!("env:sn{c}[{tag}]"), cut, &dexpr, None, &sn_expr);
        }

        // tau Re W_b = vv cs and tau Im W_b = vv sn via McCormick over the
        // auxiliary ranges.
        let (re_wb, im_wb) = wb_images(vars, k, bk, vars.bus_w[f], variant);
        let mut tau_re = LinExpr::default();
        add_scaled(&mut tau_re, &re_wb, k.tau);
        let mut tau_im = LinExpr::default();
        add_scaled(&mut tau_im, &im_wb, k.tau);
        let re_env = mccormick(
            prod_env.aux_range.0,
            prod_env.aux_range.1,
            cos_env.aux_range.0,
            cos_env.aux_range.1,
        )
        .map_err(envelope_error)?;
        let im_env = mccormick(
            prod_env.aux_range.0,
            prod_env.aux_range.1,
            sin_env.aux_range.0,
            sin_env.aux_range.1,
        )
        .map_err(envelope_error)?;
        let vv_x = LinExpr::term(vv, 1.0);
        let cs_y = LinExpr::term(cs, 1.0);
        let sn_y = LinExpr::term(sn, 1.0);
        for (c, cut) in re_env.linear.iter().enumerate() {
            push_cut(prog, format!("env:rw{c}[{tag}]"), cut, &vv_x, Some(&cs_y), &tau_re);
        }
        for (c, cut) in im_env.linear.iter().enumerate() {
            push_cut(prog, format!("env:iw{c}[{tag}]"), cut, &vv_x, Some(&sn_y), &tau_im);
        }
    }
    Ok(())
}

/// Affine image of (Re W_b, Im W_b) for branch slot `bk` in either
/// variant (the lifted variables themselves, or their current-form
/// substitutes built on `wf`, the from-side W variable).
fn wb_images(
    vars: &LiftedVars,
    k: &BranchCoeffs,
    bk: usize,
    wf: usize,
    variant: ConeVariant,
) -> (LinExpr, LinExpr) {
    match variant {
        ConeVariant::VoltageProduct => (
            LinExpr::term(vars.re_w[bk], 1.0),
            LinExpr::term(vars.im_w[bk], 1.0),
        ),
        ConeVariant::Current => {
            let inv_tau2 = 1.0 / k.tau2;
            let (r, x, c) = (k.r, k.x, k.c);
            let mut re = LinExpr::term(wf, (1.0 - c * x) * inv_tau2);
            re.push(vars.flow_pf[bk], -r);
            re.push(vars.flow_qf[bk], -x);
            let mut im = LinExpr::term(wf, -c * r * inv_tau2);
            im.push(vars.flow_pf[bk], x);
            im.push(vars.flow_qf[bk], -r);
            (re, im)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulations::ac::build_ac;
    use crate::network::{Branch, Bus, CostCurve, Generator};
    use crate::solvers::{conic::solve_conic, nlp::solve_nlp, SolverConfig, SolverStatus};

    fn small_net() -> Network {
        let bus = |id, bt, pd, qd| Bus {
            id,
            bus_type: bt,
            pd,
            qd,
            gs: 0.0,
            bs: 0.0,
            area: 1,
            vm: 1.0,
            va_deg: 0.0,
            base_kv: 135.0,
            zone: 1,
            vmax: 1.1,
            vmin: 0.9,
        };
        let gen = |b: usize, c2: f64, c1: f64| Generator {
            bus: b,
            pg: 0.0,
            qg: 0.0,
            qmax: f64::INFINITY,
            qmin: f64::NEG_INFINITY,
            vg: 1.0,
            mbase: 100.0,
            in_service: true,
            pmax: f64::INFINITY,
            pmin: 0.0,
            cost: CostCurve { c2, c1, c0: 0.0, startup: 0.0, shutdown: 0.0 },
        };
        Network {
            name: "lift-test".into(),
            version: "2".into(),
            base_mva: 100.0,
            buses: vec![
                bus(1, BusType::Reference, 0.0, 0.0),
                bus(2, BusType::Pq, 0.8, 0.25),
                bus(3, BusType::Pv, 0.4, 0.1),
            ],
            gens: vec![gen(1, 0.02, 8.0), gen(3, 0.015, 12.0)],
            branches: vec![
                Branch {
                    from: 1,
                    to: 2,
                    r: 0.03,
                    x: 0.25,
                    b_charge: 0.2,
                    rate_a: 1.2,
                    rate_b: f64::INFINITY,
                    rate_c: f64::INFINITY,
                    tap: 1.04,
                    shift: 0.02,
                    in_service: true,
                    ang_min_deg: -25.0,
                    ang_max_deg: 25.0,
                },
                Branch {
                    from: 2,
                    to: 3,
                    r: 0.04,
                    x: 0.3,
                    b_charge: 0.1,
                    rate_a: f64::INFINITY,
                    rate_b: f64::INFINITY,
                    rate_c: f64::INFINITY,
                    tap: 1.0,
                    shift: 0.0,
                    in_service: true,
                    ang_min_deg: -30.0,
                    ang_max_deg: 30.0,
                },
            ],
        }
    }

    #[test]
    fn cone_variants_reach_the_same_bound() {
        let net = small_net();
        let cfg = SolverConfig::default();
        let w = solve_conic(&build_soc(&net, ConeVariant::VoltageProduct).unwrap().program, &cfg).unwrap();
        let c = solve_conic(&build_soc(&net, ConeVariant::Current).unwrap().program, &cfg).unwrap();
        assert_eq!(w.status, SolverStatus::Optimal);
        assert_eq!(c.status, SolverStatus::Optimal);
        let rel = (w.objective - c.objective).abs() / w.objective.abs().max(1.0);
        assert!(rel < 1e-6, "w = {}, c = {}", w.objective, c.objective);
    }

    #[test]
    fn relaxation_bound_stays_below_the_nonconvex_objective() {
        let net = small_net();
        let cfg = SolverConfig::default();
        let ac = solve_nlp(&build_ac(&net).unwrap().program, &cfg).unwrap();
        assert_eq!(ac.status, SolverStatus::Optimal);
        for variant in [ConeVariant::VoltageProduct, ConeVariant::Current] {
            let soc = solve_conic(&build_soc(&net, variant).unwrap().program, &cfg).unwrap();
            assert_eq!(soc.status, SolverStatus::Optimal);
            assert!(
                soc.objective <= ac.objective + 1e-6 * ac.objective.abs(),
                "variant {variant:?}: {} vs {}",
                soc.objective,
                ac.objective
            );
            let qc = solve_conic(&build_qc(&net, variant).unwrap().program, &cfg).unwrap();
            assert_eq!(qc.status, SolverStatus::Optimal);
            assert!(qc.objective <= ac.objective + 1e-6 * ac.objective.abs());
            assert!(qc.objective >= soc.objective - 1e-6 * soc.objective.abs());
        }
    }

    #[test]
    fn qc_program_extends_the_soc_program() {
        let net = small_net();
        let soc = build_soc(&net, ConeVariant::VoltageProduct).unwrap();
        let qc = build_qc(&net, ConeVariant::VoltageProduct).unwrap();
        assert!(qc.program.rows.len() > soc.program.rows.len());
        for (a, b) in soc.program.rows.iter().zip(&qc.program.rows) {
            assert_eq!(a.name, b.name);
        }
        assert!(qc.program.quad_rows.len() > soc.program.quad_rows.len());
        assert_eq!(soc.program.cone_rows.len(), qc.program.cone_rows.len());
        assert!(!qc.vars.vv.is_empty());
        assert_eq!(qc.vars.vv.len(), qc.vars.branch_index.len());
    }
}
