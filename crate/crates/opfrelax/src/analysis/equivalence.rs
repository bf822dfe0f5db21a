//! Exact correspondence between the two cone closures.
//!
//! The voltage-product and current forms of the relaxation are affine
//! images of one another. Per branch, with a = W_ff / tau^2:
//!
//! ```text
//! current from products:  l = |Y|^2 (a + W_tt - 2 Re W_b)
//!                             - c^2 a - 2 c q_f
//! products from current:  Re W_b = (1 - c x) a - r p_f - x q_f
//!                         Im W_b = -(c r) a + x p_f - r q_f
//! ```
//!
//! Both maps are division-free, so they are well defined on every
//! feasible point, not just optima. [`map_w_to_c`] and [`map_c_to_w`]
//! transport a solution of one form into the variable order of the
//! other (all shared variables are copied), and
//! [`compare_variants`] solves both forms, transports both optima, and
//! certifies the transported points against the opposite program's
//! constraints — a two-sided numerical proof that the closures describe
//! the same set on the given network.

use crate::formulations::relax::{build_qc, build_soc};
use crate::formulations::{BranchCoeffs, BuildError, ConeVariant, LiftedProgram};
use crate::network::{Branch, Bus, BusType, CostCurve, Generator, Network};
use crate::solvers::{certify_solution, conic::solve_conic, ProgramRef, ResidualReport, SolveError, SolverConfig, SolverStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EquivalenceError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("solver returned {0} on the {1} form")]
    NotSolved(SolverStatus, &'static str),
}

/// Copies every variable the two lifted forms share (bus products,
/// generator injections, flows, and the envelope block when present).
fn copy_shared(src: &LiftedProgram, src_x: &[f64], dst: &LiftedProgram, dst_x: &mut [f64]) {
    let pairs = [
        (&src.vars.bus_w, &dst.vars.bus_w),
        (&src.vars.gen_p, &dst.vars.gen_p),
        (&src.vars.gen_q, &dst.vars.gen_q),
        (&src.vars.flow_pf, &dst.vars.flow_pf),
        (&src.vars.flow_qf, &dst.vars.flow_qf),
        (&src.vars.flow_pt, &dst.vars.flow_pt),
        (&src.vars.flow_qt, &dst.vars.flow_qt),
        (&src.vars.volt, &dst.vars.volt),
        (&src.vars.angle, &dst.vars.angle),
        (&src.vars.vv, &dst.vars.vv),
        (&src.vars.cs, &dst.vars.cs),
        (&src.vars.sn, &dst.vars.sn),
    ];
    for (s, d) in pairs {
        debug_assert_eq!(s.len(), d.len());
        for (&sv, &dv) in s.iter().zip(d.iter()) {
            dst_x[dv] = src_x[sv];
        }
    }
}

/// Transports a voltage-product point into current-form coordinates.
pub fn map_w_to_c(
    net: &Network,
    w_form: &LiftedProgram,
    c_form: &LiftedProgram,
    x_w: &[f64],
) -> Result<Vec<f64>, BuildError> {
    let index = net.bus_index();
    let mut x_c = vec![0.0; c_form.program.n_vars()];
    copy_shared(w_form, x_w, c_form, &mut x_c);
    for (bk, &b) in c_form.vars.branch_index.iter().enumerate() {
        let br = &net.branches[b];
        let k = BranchCoeffs::new(br)?;
        let a = x_w[w_form.vars.bus_w[index[&br.from]]] / k.tau2;
        let wtt = x_w[w_form.vars.bus_w[index[&br.to]]];
        let rw = x_w[w_form.vars.re_w[bk]];
        let qf = x_w[w_form.vars.flow_qf[bk]];
        let y2 = k.g * k.g + k.b * k.b;
        x_c[c_form.vars.current[bk]] =
            y2 * (a + wtt - 2.0 * rw) - k.c * k.c * a - 2.0 * k.c * qf;
    }
    Ok(x_c)
}

/// Transports a current-form point into voltage-product coordinates.
pub fn map_c_to_w(
    net: &Network,
    c_form: &LiftedProgram,
    w_form: &LiftedProgram,
    x_c: &[f64],
) -> Result<Vec<f64>, BuildError> {
    let index = net.bus_index();
    let mut x_w = vec![0.0; w_form.program.n_vars()];
    copy_shared(c_form, x_c, w_form, &mut x_w);
    for (bk, &b) in w_form.vars.branch_index.iter().enumerate() {
        let br = &net.branches[b];
        let k = BranchCoeffs::new(br)?;
        let a = x_c[c_form.vars.bus_w[index[&br.from]]] / k.tau2;
        let pf = x_c[c_form.vars.flow_pf[bk]];
        let qf = x_c[c_form.vars.flow_qf[bk]];
        x_w[w_form.vars.re_w[bk]] = (1.0 - k.c * k.x) * a - k.r * pf - k.x * qf;
        x_w[w_form.vars.im_w[bk]] = -k.c * k.r * a + k.x * pf - k.r * qf;
    }
    Ok(x_w)
}

/// Deterministically generates a small ring network that exercises
/// every extended-physics feature at once: off-nominal tap magnitudes
/// in [0.9, 1.1], phase shifts within +-5 degrees, line charging in
/// [0, 0.7], and nonzero shunts on every bus. Generation capacity
/// comfortably covers the sampled loads and ratings are left open, so
/// the cases are reliably solvable. Series impedances are bounded away
/// from zero because mapped residuals transport between the two
/// coordinate systems with a factor of |y|^2 = 1/(r^2 + x^2); the floor
/// keeps that factor below ~25 so a point certified at solver tolerance
/// in one form still certifies to a meaningful tolerance in the other.
/// The randomized closure cross-checks run [`compare_variants`] over a
/// batch of these.
pub fn random_extended_network(seed: u64, n_buses: usize) -> Network {
    assert!(n_buses >= 3, "a ring needs at least three buses");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buses = Vec::with_capacity(n_buses);
    for i in 0..n_buses {
        let bus_type = if i == 0 {
            BusType::Reference
        } else if i == n_buses - 1 {
            BusType::Pv
        } else {
            BusType::Pq
        };
        let load = bus_type == BusType::Pq;
        buses.push(Bus {
            id: i + 1,
            bus_type,
            pd: if load { rng.gen_range(0.3..0.6) } else { 0.0 },
            qd: if load { rng.gen_range(0.08..0.2) } else { 0.0 },
            gs: rng.gen_range(0.005..0.02),
            bs: rng.gen_range(0.01..0.06),
            area: 1,
            vm: 1.0,
            va_deg: 0.0,
            base_kv: 230.0,
            zone: 1,
            vmax: 1.1,
            vmin: 0.9,
        });
    }
    let gen = |bus: usize, pmax: f64, qlim: f64, c2: f64, c1: f64| Generator {
        bus,
        pg: 0.0,
        qg: 0.0,
        qmax: qlim,
        qmin: -qlim,
        vg: 1.0,
        mbase: 100.0,
        in_service: true,
        pmax,
        pmin: 0.0,
        cost: CostCurve { c2, c1, c0: 0.0, startup: 0.0, shutdown: 0.0 },
    };
    let gens = vec![
        gen(1, 3.0, 2.0, rng.gen_range(0.02..0.05), rng.gen_range(8.0..12.0)),
        gen(n_buses, 2.0, 1.5, rng.gen_range(0.04..0.08), rng.gen_range(13.0..18.0)),
    ];
    let max_shift = 5f64.to_radians();
    let mut branches = Vec::with_capacity(n_buses);
    for i in 0..n_buses {
        branches.push(Branch {
            from: i + 1,
            to: (i + 1) % n_buses + 1,
            r: rng.gen_range(0.02..0.08),
            x: rng.gen_range(0.2..0.4),
            b_charge: rng.gen_range(0.0..0.7),
            rate_a: f64::INFINITY,
            rate_b: f64::INFINITY,
            rate_c: f64::INFINITY,
            tap: rng.gen_range(0.9..1.1),
            shift: rng.gen_range(-max_shift..max_shift),
            in_service: true,
            ang_min_deg: -30.0,
            ang_max_deg: 30.0,
        });
    }
    Network {
        name: format!("random-extended-{seed}"),
        version: "2".into(),
        base_mva: 100.0,
        buses,
        gens,
        branches,
    }
}

/// Outcome of a two-sided variant comparison.
#[derive(Debug)]
pub struct VariantComparison {
    pub w_bound: f64,
    pub c_bound: f64,
    /// |w - c| / max(1, |w|).
    pub relative_gap: f64,
    /// Residual scan of the w optimum transported into the c program.
    pub w_point_in_c: ResidualReport,
    /// Residual scan of the c optimum transported into the w program.
    pub c_point_in_w: ResidualReport,
}

impl VariantComparison {
    /// True when bounds agree to `bound_tol` (relative) and both
    /// transported points satisfy the opposite constraints at the
    /// certification tolerance they were scanned with.
    pub fn agrees(&self, bound_tol: f64) -> bool {
        self.relative_gap <= bound_tol && self.w_point_in_c.pass && self.c_point_in_w.pass
    }
}

/// Solves both closures (optionally with the envelope block) and
/// certifies each optimum inside the other form at `map_tol`.
pub fn compare_variants(
    net: &Network,
    with_envelopes: bool,
    cfg: &SolverConfig,
    map_tol: f64,
) -> Result<VariantComparison, EquivalenceError> {
    let build = |variant| {
        if with_envelopes {
            build_qc(net, variant)
        } else {
            build_soc(net, variant)
        }
    };
    let w_form = build(ConeVariant::VoltageProduct)?;
    let c_form = build(ConeVariant::Current)?;
    let w_sol = solve_conic(&w_form.program, cfg)?;
    if w_sol.status != SolverStatus::Optimal {
        return Err(EquivalenceError::NotSolved(w_sol.status, "voltage-product"));
    }
    let c_sol = solve_conic(&c_form.program, cfg)?;
    if c_sol.status != SolverStatus::Optimal {
        return Err(EquivalenceError::NotSolved(c_sol.status, "current"));
    }
    let x_wc = map_w_to_c(net, &w_form, &c_form, &w_sol.x)?;
    let x_cw = map_c_to_w(net, &c_form, &w_form, &c_sol.x)?;
    Ok(VariantComparison {
        w_bound: w_sol.objective,
        c_bound: c_sol.objective,
        relative_gap: (w_sol.objective - c_sol.objective).abs() / w_sol.objective.abs().max(1.0),
        w_point_in_c: certify_solution(ProgramRef::Conic(&c_form.program), &x_wc, map_tol),
        c_point_in_w: certify_solution(ProgramRef::Conic(&w_form.program), &x_cw, map_tol),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Branch, Bus, BusType, CostCurve, Generator};

    fn tapped_net() -> Network {
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
            base_kv: 230.0,
            zone: 1,
            vmax: 1.08,
            vmin: 0.92,
        };
        let branch = |from, to, r, x, b, tap, shift, rate| Branch {
            from,
            to,
            r,
            x,
            b_charge: b,
            rate_a: rate,
            rate_b: f64::INFINITY,
            rate_c: f64::INFINITY,
            tap,
            shift,
            in_service: true,
            ang_min_deg: -28.0,
            ang_max_deg: 28.0,
        };
        Network {
            name: "equiv-test".into(),
            version: "2".into(),
            base_mva: 100.0,
            buses: vec![
                bus(10, BusType::Reference, 0.1, 0.02),
                bus(20, BusType::Pq, 0.7, 0.2),
                bus(30, BusType::Pv, 0.45, 0.12),
            ],
            gens: vec![
                Generator {
                    bus: 10,
                    pg: 0.0,
                    qg: 0.0,
                    qmax: 2.0,
                    qmin: -2.0,
                    vg: 1.0,
                    mbase: 100.0,
                    in_service: true,
                    pmax: 3.0,
                    pmin: 0.0,
                    cost: CostCurve { c2: 0.03, c1: 9.0, c0: 50.0, startup: 0.0, shutdown: 0.0 },
                },
                Generator {
                    bus: 30,
                    pg: 0.0,
                    qg: 0.0,
                    qmax: 1.5,
                    qmin: -1.5,
                    vg: 1.0,
                    mbase: 100.0,
                    in_service: true,
                    pmax: 2.0,
                    pmin: 0.0,
                    cost: CostCurve { c2: 0.05, c1: 14.0, c0: 0.0, startup: 0.0, shutdown: 0.0 },
                },
            ],
            branches: vec![
                branch(10, 20, 0.02, 0.18, 0.08, 1.05, 0.03, 1.5),
                branch(20, 30, 0.035, 0.27, 0.16, 1.0, 0.0, f64::INFINITY),
                branch(30, 10, 0.015, 0.21, 0.1, 0.97, -0.02, f64::INFINITY),
            ],
        }
    }

    /// The transport map scales small cone residuals by |Y|^2, so the
    /// source problems are solved an order tighter than the 1e-8
    /// certification tolerance.
    fn tight() -> SolverConfig {
        SolverConfig { tol_feas: 1e-9, tol_gap: 1e-9, ..SolverConfig::default() }
    }

    #[test]
    fn soc_forms_agree_and_transport_both_ways() {
        let net = tapped_net();
        let cmp = compare_variants(&net, false, &tight(), 1e-8).unwrap();
        assert!(cmp.agrees(1e-6), "{cmp:#?}");
    }

    #[test]
    fn qc_forms_agree_and_transport_both_ways() {
        let net = tapped_net();
        let cmp = compare_variants(&net, true, &tight(), 1e-8).unwrap();
        assert!(cmp.agrees(1e-6), "{cmp:#?}");
    }

    #[test]
    fn random_networks_are_deterministic_and_in_range() {
        let a = random_extended_network(7, 4);
        let b = random_extended_network(7, 4);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        let c = random_extended_network(8, 4);
        assert_ne!(format!("{a:?}"), format!("{c:?}"));
        let max_shift = 5f64.to_radians();
        for br in &a.branches {
            assert!((0.9..=1.1).contains(&br.tap));
            assert!(br.shift.abs() <= max_shift);
            assert!((0.0..=0.7).contains(&br.b_charge));
        }
        assert!(a.buses.iter().all(|b| b.gs != 0.0 && b.bs != 0.0));
        assert!(crate::network::validate(&a).is_ok());

        let cmp = compare_variants(&a, false, &tight(), 1e-8).unwrap();
        assert!(cmp.agrees(1e-6), "{cmp:#?}");
    }
}
