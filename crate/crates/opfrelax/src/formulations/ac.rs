//! Polar AC optimal power flow as a smooth nonconvex program.
//!
//! Variables: |V_i| and theta_i per bus (reference angles pinned at 0),
//! dispatch (p_g, q_g) per in-service generator, and the four directed
//! branch flows (p_f, q_f, p_t, q_t) per in-service branch. All power
//! quantities are per-unit; the cost curves convert to megawatts via the
//! MVA base inside the objective only.
//!
//! Per branch, with shifted angle difference d = theta_f - theta_t - shift,
//! series admittance g + ib, half charging c, and tap magnitude tau:
//!
//! ```text
//! p_f =  (g/tau^2) v_f^2      - (v_f v_t / tau) ( g cos d + b sin d)
//! q_f = -((b+c)/tau^2) v_f^2  + (v_f v_t / tau) ( b cos d - g sin d)
//! p_t =  g v_t^2              - (v_f v_t / tau) ( g cos d - b sin d)
//! q_t = -(b+c) v_t^2          + (v_f v_t / tau) ( b cos d + g sin d)
//! ```
//!
//! which the builder emits through the shared [`BranchCoeffs`] bundles so
//! every formulation in the crate agrees on the physics. Kirchhoff rows
//! balance generation, load, the bus shunt (consuming g_s v^2 - i b_s v^2),
//! and incident flows. Finite MVA ratings become p^2 + q^2 <= rate^2
//! range constraints; every branch carries the symmetric bound
//! |theta_f - theta_t - shift| <= angle_limit (capped strictly below
//! pi/2), keeping the nonconvex problem inside the region where the
//! relaxations' trigonometric envelopes are valid.
//!
//! Start point: flat voltage profile (v = 1 clamped into bounds, angles
//! 0) and an equal share of the total active load per generator.

use super::{AcProgram, AcVars, BranchCoeffs, BuildError, NlpConstraint, NlpProgram, Term};
use crate::network::{total_load, validate, BusType, Network};

/// Builds the AC program for a validated network.
pub fn build_ac(net: &Network) -> Result<AcProgram, BuildError> {
    validate(net).map_err(BuildError::InvalidNetwork)?;
    let index = net.bus_index();
    let mut prog = NlpProgram::default();
    let mut vars = AcVars::default();

    for bus in &net.buses {
        let start = 1.0f64.clamp(bus.vmin, bus.vmax);
        vars.volt.push(prog.add_var(format!("v[{}]", bus.id), bus.vmin, bus.vmax, start));
    }
    for bus in &net.buses {
        let (lb, ub) = if bus.bus_type == BusType::Reference {
            (0.0, 0.0)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        };
        vars.angle.push(prog.add_var(format!("theta[{}]", bus.id), lb, ub, 0.0));
    }

    let active_gens = net.active_gens();
    let p_share = total_load(net).re / active_gens.len().max(1) as f64;
    for &g in &active_gens {
        let gen = &net.gens[g];
        vars.gen_index.push(g);
        vars.gen_p.push(prog.add_var(
            format!("pg[{}#{g}]", gen.bus),
            gen.pmin,
            gen.pmax,
            p_share,
        ));
        vars.gen_q.push(prog.add_var(format!("qg[{}#{g}]", gen.bus), gen.qmin, gen.qmax, 0.0));
    }

    // Branch flow variables, their defining rows, ratings, and angle bounds.
    let active_branches = net.active_branches();
    for &b in &active_branches {
        let br = &net.branches[b];
        let k = BranchCoeffs::new(br)?;
        let f = index[&br.from];
        let t = index[&br.to];
        let tag = format!("{}-{}#{b}", br.from, br.to);
        let pf = prog.add_var(format!("pf[{tag}]"), f64::NEG_INFINITY, f64::INFINITY, 0.0);
        let qf = prog.add_var(format!("qf[{tag}]"), f64::NEG_INFINITY, f64::INFINITY, 0.0);
        let pt = prog.add_var(format!("pt[{tag}]"), f64::NEG_INFINITY, f64::INFINITY, 0.0);
        let qt = prog.add_var(format!("qt[{tag}]"), f64::NEG_INFINITY, f64::INFINITY, 0.0);
        vars.branch_index.push(b);
        vars.flow_pf.push(pf);
        vars.flow_qf.push(qf);
        vars.flow_pt.push(pt);
        vars.flow_qt.push(qt);

        // (own-squared coeff, cos coeff, sin coeff) acting on
        // (v_own^2 / scale, v_f v_t cos d / tau, v_f v_t sin d / tau).
        let mut emit = |name: String, own: usize, scale: f64, coeffs: (f64, f64, f64), flow: usize| {
            let (a, re, im) = coeffs;
            prog.constraints.push(NlpConstraint {
                name,
                terms: vec![
                    Term::Square { var: vars.volt[own], coeff: a / scale },
                    Term::FlowCos {
                        vi: vars.volt[f],
                        vj: vars.volt[t],
                        ti: vars.angle[f],
                        tj: vars.angle[t],
                        shift: k.shift,
                        coeff: re / k.tau,
                    },
                    Term::FlowSin {
                        vi: vars.volt[f],
                        vj: vars.volt[t],
                        ti: vars.angle[f],
                        tj: vars.angle[t],
                        shift: k.shift,
                        coeff: im / k.tau,
                    },
                    Term::Lin { var: flow, coeff: -1.0 },
                ],
                lb: 0.0,
                ub: 0.0,
            });
        };
        emit(format!("def:pf[{tag}]"), f, k.tau2, k.pf_coeffs(), pf);
        emit(format!("def:qf[{tag}]"), f, k.tau2, k.qf_coeffs(), qf);
        emit(format!("def:pt[{tag}]"), t, 1.0, k.pt_coeffs(), pt);
        emit(format!("def:qt[{tag}]"), t, 1.0, k.qt_coeffs(), qt);

        if k.rate.is_finite() {
            let r2 = k.rate * k.rate;
            prog.constraints.push(NlpConstraint {
                name: format!("thermal:f[{tag}]"),
                terms: vec![Term::Square { var: pf, coeff: 1.0 }, Term::Square { var: qf, coeff: 1.0 }],
                lb: f64::NEG_INFINITY,
                ub: r2,
            });
            prog.constraints.push(NlpConstraint {
                name: format!("thermal:t[{tag}]"),
                terms: vec![Term::Square { var: pt, coeff: 1.0 }, Term::Square { var: qt, coeff: 1.0 }],
                lb: f64::NEG_INFINITY,
                ub: r2,
            });
        }
        prog.constraints.push(NlpConstraint {
            name: format!("angle[{tag}]"),
            terms: vec![
                Term::Lin { var: vars.angle[f], coeff: 1.0 },
                Term::Lin { var: vars.angle[t], coeff: -1.0 },
            ],
            lb: k.shift - k.angle,
            ub: k.shift + k.angle,
        });
    }

    // Kirchhoff balance per bus.
    for (i, bus) in net.buses.iter().enumerate() {
        let mut p_terms: Vec<Term> = Vec::new();
        let mut q_terms: Vec<Term> = Vec::new();
        for (gk, &g) in vars.gen_index.iter().enumerate() {
            if index[&net.gens[g].bus] == i {
                p_terms.push(Term::Lin { var: vars.gen_p[gk], coeff: 1.0 });
                q_terms.push(Term::Lin { var: vars.gen_q[gk], coeff: 1.0 });
            }
        }
        if bus.gs != 0.0 {
            p_terms.push(Term::Square { var: vars.volt[i], coeff: -bus.gs });
        }
        if bus.bs != 0.0 {
            q_terms.push(Term::Square { var: vars.volt[i], coeff: bus.bs });
        }
        for (bk, &b) in vars.branch_index.iter().enumerate() {
            let br = &net.branches[b];
            if index[&br.from] == i {
                p_terms.push(Term::Lin { var: vars.flow_pf[bk], coeff: -1.0 });
                q_terms.push(Term::Lin { var: vars.flow_qf[bk], coeff: -1.0 });
            }
            if index[&br.to] == i {
                p_terms.push(Term::Lin { var: vars.flow_pt[bk], coeff: -1.0 });
                q_terms.push(Term::Lin { var: vars.flow_qt[bk], coeff: -1.0 });
            }
        }
        prog.constraints.push(NlpConstraint {
            name: format!("kcl:p[{}]", bus.id),
            terms: p_terms,
            lb: bus.pd,
            ub: bus.pd,
        });
        prog.constraints.push(NlpConstraint {
            name: format!("kcl:q[{}]", bus.id),
            terms: q_terms,
            lb: bus.qd,
            ub: bus.qd,
        });
    }

    // Cost in $/h on megawatt dispatch.
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

    Ok(AcProgram { program: prog, vars })
}
