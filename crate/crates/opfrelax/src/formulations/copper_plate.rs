//! Network-free dispatch bound.
//!
//! Dropping every line constraint and every loss term leaves a single
//! balance inequality over the generator fleet:
//!
//! ```text
//! minimize   sum_g c2_g (base pg_g)^2 + c1_g (base pg_g) + c0_g
//! subject to sum_g pg_g >= sum_i pd_i,   pmin_g <= pg_g <= pmax_g
//! ```
//!
//! Because line losses are nonnegative whenever every series resistance
//! is nonnegative, any feasible dispatch of the full problem satisfies
//! the balance inequality, so this program bounds the AC optimum from
//! below. It is the cheapest member of the relaxation hierarchy and the
//! weakest; its gap isolates how much of the AC cost is caused by the
//! network at all. Networks with active branches of negative resistance
//! can inject power through losses, so the bound is refused for them.

use super::{BuildError, ConicProgram, LiftedProgram, LiftedVars, LinExpr, LinearRow, Sense};
use crate::network::{total_load, validate, Network};

/// Builds the copper-plate program. All lifted fields except the
/// generator columns stay empty.
pub fn build_copper_plate(net: &Network) -> Result<LiftedProgram, BuildError> {
    validate(net).map_err(BuildError::InvalidNetwork)?;
    for &b in &net.active_branches() {
        let br = &net.branches[b];
        if br.r < 0.0 {
            return Err(BuildError::NotApplicable(format!(
                "branch {}-{} has negative resistance; losses may be negative and \
                 aggregate balance no longer bounds the AC optimum",
                br.from, br.to
            )));
        }
    }

    let mut prog = ConicProgram::new();
    let mut vars = LiftedVars::default();
    let active = net.active_gens();
    let demand = total_load(net).re;
    let share = demand / active.len().max(1) as f64;
    let mut balance = LinExpr::default();
    for &g in &active {
        let gen = &net.gens[g];
        let pg = prog.add_var(format!("pg[{}#{g}]", gen.bus), gen.pmin, gen.pmax, share);
        vars.gen_index.push(g);
        vars.gen_p.push(pg);
        balance.push(pg, -1.0);
        let base = net.base_mva;
        if gen.cost.c2 != 0.0 {
            prog.objective.quad.push((pg, pg, gen.cost.c2 * base * base));
        }
        if gen.cost.c1 != 0.0 {
            prog.objective.lin.push((pg, gen.cost.c1 * base));
        }
        prog.objective.constant += gen.cost.c0;
    }
    // sum pg >= demand, written as -sum pg <= -demand.
    prog.rows.push(LinearRow {
        name: "balance".into(),
        expr: balance,
        sense: Sense::Le,
        rhs: -demand,
    });
    Ok(LiftedProgram { program: prog, vars })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Branch, Bus, BusType, CostCurve, Generator};
    use crate::solvers::{conic::solve_conic, SolverConfig, SolverStatus};

    fn two_gen_net() -> Network {
        let bus = |id, bt, pd| Bus {
            id,
            bus_type: bt,
            pd,
            qd: 0.3,
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
        let gen = |b, c2, c1| Generator {
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
            name: "cp-test".into(),
            version: "2".into(),
            base_mva: 100.0,
            buses: vec![
                bus(1, BusType::Reference, 1.1),
                bus(2, BusType::Pv, 1.05),
                bus(3, BusType::Pq, 1.0),
            ],
            gens: vec![gen(1, 0.110, 5.0), gen(2, 0.085, 1.2)],
            branches: vec![
                Branch {
                    from: 1,
                    to: 2,
                    r: 0.042,
                    x: 0.9,
                    b_charge: 0.3,
                    rate_a: f64::INFINITY,
                    rate_b: f64::INFINITY,
                    rate_c: f64::INFINITY,
                    tap: 1.0,
                    shift: 0.0,
                    in_service: true,
                    ang_min_deg: -30.0,
                    ang_max_deg: 30.0,
                },
                Branch {
                    from: 2,
                    to: 3,
                    r: 0.025,
                    x: 0.75,
                    b_charge: 0.7,
                    rate_a: 0.5,
                    rate_b: f64::INFINITY,
                    rate_c: f64::INFINITY,
                    tap: 1.0,
                    shift: 0.0,
                    in_service: true,
                    ang_min_deg: -30.0,
                    ang_max_deg: 30.0,
                },
                Branch {
                    from: 1,
                    to: 3,
                    r: 0.065,
                    x: 0.62,
                    b_charge: 0.45,
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

    /// Two quadratic machines splitting 315 MW by equal marginal cost:
    /// 0.220 p1 + 5 = 0.170 p2 + 1.2 with p1 + p2 = 315 gives
    /// p1 = 127.5641025641 MW and cost 5638.9679 (independent
    /// stationarity computation, not a solver output).
    #[test]
    fn equal_marginal_cost_split_is_recovered() {
        let net = two_gen_net();
        let lp = build_copper_plate(&net).unwrap();
        let sol = solve_conic(&lp.program, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        let p1 = sol.x[lp.vars.gen_p[0]] * net.base_mva;
        let p2 = sol.x[lp.vars.gen_p[1]] * net.base_mva;
        assert!((p1 - 127.5641025641).abs() < 1e-5, "p1 = {p1}");
        assert!((p2 - 187.4358974359).abs() < 1e-5, "p2 = {p2}");
        let expected = 0.110 * p1 * p1 + 5.0 * p1 + 0.085 * p2 * p2 + 1.2 * p2;
        assert!((sol.objective - expected).abs() < 1e-4);
        assert!((sol.objective - 5638.9679).abs() < 1e-3, "objective = {}", sol.objective);
    }

    #[test]
    fn negative_resistance_is_refused() {
        let mut net = two_gen_net();
        net.branches[0].r = -0.01;
        match build_copper_plate(&net) {
            Err(BuildError::NotApplicable(msg)) => assert!(msg.contains("negative resistance")),
            other => panic!("expected NotApplicable, got {other:?}"),
        }
    }
}
