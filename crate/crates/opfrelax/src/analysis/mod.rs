//! Bound comparison, gap reporting, and solution cross-checks.
//!
//! [`analyze_case`] is the main entry point: it solves the nonconvex
//! problem with the local interior-point method, solves each requested
//! relaxation with the conic method, and assembles a [`CaseReport`]
//! with optimality gaps, statuses, runtimes, and an AC-feasibility
//! verdict per relaxation. The feasibility verdict never trusts the
//! relaxation: the lifted point is projected to voltages
//! ([`rank1::lift_to_voltages`]) and scanned against the original
//! nonconvex constraints from scratch.
//!
//! The optimality gap of a lower bound `b` against a feasible cost `h`
//! is `100 (h - b) / h`; with `h` from a local solver the printed gap
//! is an upper estimate of the true gap, which is the standard way
//! these numbers are reported.
//!
//! Submodules hold the independent cross-checks: algebraic flow
//! identities ([`identities`]), the affine equivalence of the two cone
//! closures ([`equivalence`]), bound ordering ([`dominance`]), rank-one
//! certification and voltage recovery ([`rank1`]), and closure timing
//! ([`bench`]).

pub mod bench;
pub mod dominance;
pub mod equivalence;
pub mod identities;
pub mod rank1;

use crate::formulations::ac::build_ac;
use crate::formulations::copper_plate::build_copper_plate;
use crate::formulations::relax::{build_qc, build_soc};
use crate::formulations::{BuildError, ConeVariant, LiftedProgram};
use crate::network::Network;
use crate::solvers::{
    certify_solution, conic::solve_conic, nlp::solve_nlp, ProgramRef, SolveError, Solution,
    SolverConfig, SolverStatus,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Percentage by which the bound `b` undercuts the feasible cost `h`.
pub fn optimality_gap(heuristic: f64, bound: f64) -> f64 {
    100.0 * (heuristic - bound) / heuristic
}

/// Which relaxations a report should include.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxKind {
    Soc,
    Qc,
    CopperPlate,
}

impl RelaxKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RelaxKind::Soc => "soc",
            RelaxKind::Qc => "qc",
            RelaxKind::CopperPlate => "copper-plate",
        }
    }
}

impl std::str::FromStr for RelaxKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "soc" => Ok(RelaxKind::Soc),
            "qc" => Ok(RelaxKind::Qc),
            "cp" | "copper" | "copper-plate" => Ok(RelaxKind::CopperPlate),
            other => Err(format!("unknown relaxation '{other}' (expected soc, qc, or cp)")),
        }
    }
}

/// Solve metadata for the nonconvex reference problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveSummary {
    pub objective: f64,
    pub status: String,
    pub runtime_s: f64,
    pub iterations: usize,
}

/// One relaxation row of a case report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxationSummary {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub bound: f64,
    pub gap_percent: f64,
    pub status: String,
    pub runtime_s: f64,
    pub iterations: usize,
    /// Whether the projected relaxation point satisfies the nonconvex
    /// constraints; absent for the copper plate, which carries no
    /// voltage information to project.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ac_feasible: Option<bool>,
    pub numeric_warning: bool,
}

/// Full machine-readable result of one case analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseReport {
    pub case: String,
    pub base_mva: f64,
    pub ac: SolveSummary,
    pub relaxations: Vec<RelaxationSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub copper_plate: Option<RelaxationSummary>,
}

/// Analysis knobs: which relaxations, which cone closure, and the
/// absolute residual tolerance below which a projected point counts as
/// feasible for the nonconvex constraints.
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub kinds: Vec<RelaxKind>,
    pub variant: ConeVariant,
    pub feas_tol: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            kinds: vec![RelaxKind::CopperPlate, RelaxKind::Soc, RelaxKind::Qc],
            variant: ConeVariant::VoltageProduct,
            feas_tol: 1e-6,
        }
    }
}

fn summarize(sol: &Solution) -> SolveSummary {
    SolveSummary {
        objective: sol.objective,
        status: sol.status.to_string(),
        runtime_s: sol.runtime_s,
        iterations: sol.iterations,
    }
}

/// Projects a lifted relaxation point onto voltages and measures the
/// worst nonconvex-constraint residual there. Flows and injections are
/// taken from the lifted point itself, so a tight relaxation yields
/// residuals at solver tolerance while a loose one shows its slack in
/// the flow-definition rows.
pub fn ac_feasibility(
    net: &Network,
    lifted: &LiftedProgram,
    x: &[f64],
    tol: f64,
) -> Result<(bool, f64), BuildError> {
    let ac = build_ac(net)?;
    let (vm, va) = rank1::lift_to_voltages(net, lifted, x);
    let mut xa = vec![0.0; ac.program.n_vars()];
    for i in 0..net.buses.len() {
        xa[ac.vars.volt[i]] = vm[i];
        xa[ac.vars.angle[i]] = va[i];
    }
    for (gk, _) in lifted.vars.gen_index.iter().enumerate() {
        xa[ac.vars.gen_p[gk]] = x[lifted.vars.gen_p[gk]];
        xa[ac.vars.gen_q[gk]] = x[lifted.vars.gen_q[gk]];
    }
    for (bk, _) in lifted.vars.branch_index.iter().enumerate() {
        xa[ac.vars.flow_pf[bk]] = x[lifted.vars.flow_pf[bk]];
        xa[ac.vars.flow_qf[bk]] = x[lifted.vars.flow_qf[bk]];
        xa[ac.vars.flow_pt[bk]] = x[lifted.vars.flow_pt[bk]];
        xa[ac.vars.flow_qt[bk]] = x[lifted.vars.flow_qt[bk]];
    }
    let report = certify_solution(ProgramRef::Nlp(&ac.program), &xa, tol);
    Ok((report.pass, report.max_violation))
}

/// Solves the nonconvex problem and the requested relaxations and
/// assembles the report.
pub fn analyze_case(
    net: &Network,
    opts: &AnalysisOptions,
    cfg: &SolverConfig,
) -> Result<CaseReport, AnalysisError> {
    let ac = build_ac(net)?;
    let ac_sol = solve_nlp(&ac.program, cfg)?;
    let heuristic = ac_sol.objective;

    let mut report = CaseReport {
        case: net.name.clone(),
        base_mva: net.base_mva,
        ac: summarize(&ac_sol),
        relaxations: Vec::new(),
        copper_plate: None,
    };

    for &kind in &opts.kinds {
        match kind {
            RelaxKind::Soc | RelaxKind::Qc => {
                let lifted = match kind {
                    RelaxKind::Soc => build_soc(net, opts.variant)?,
                    _ => build_qc(net, opts.variant)?,
                };
                let sol = solve_conic(&lifted.program, cfg)?;
                let (feasible, _residual) = ac_feasibility(net, &lifted, &sol.x, opts.feas_tol)?;
                report.relaxations.push(RelaxationSummary {
                    kind: kind.as_str().to_string(),
                    variant: Some(opts.variant.short_name().to_string()),
                    bound: sol.objective,
                    gap_percent: optimality_gap(heuristic, sol.objective),
                    status: sol.status.to_string(),
                    runtime_s: sol.runtime_s,
                    iterations: sol.iterations,
                    ac_feasible: Some(feasible),
                    numeric_warning: sol.status == SolverStatus::NumericWarning,
                });
            }
            RelaxKind::CopperPlate => {
                let lifted = build_copper_plate(net)?;
                let sol = solve_conic(&lifted.program, cfg)?;
                report.copper_plate = Some(RelaxationSummary {
                    kind: kind.as_str().to_string(),
                    variant: None,
                    bound: sol.objective,
                    gap_percent: optimality_gap(heuristic, sol.objective),
                    status: sol.status.to_string(),
                    runtime_s: sol.runtime_s,
                    iterations: sol.iterations,
                    ac_feasible: None,
                    numeric_warning: sol.status == SolverStatus::NumericWarning,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::network::{Branch, Bus, BusType, CostCurve, Generator};

    fn loop_net() -> Network {
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
        let branch = |from, to, r, x, b| Branch {
            from,
            to,
            r,
            x,
            b_charge: b,
            rate_a: f64::INFINITY,
            rate_b: f64::INFINITY,
            rate_c: f64::INFINITY,
            tap: 1.0,
            shift: 0.0,
            in_service: true,
            ang_min_deg: -30.0,
            ang_max_deg: 30.0,
        };
        Network {
            name: "analysis-test".into(),
            version: "2".into(),
            base_mva: 100.0,
            buses: vec![
                bus(1, BusType::Reference, 0.0, 0.0),
                bus(2, BusType::Pq, 0.6, 0.15),
                bus(3, BusType::Pv, 0.5, 0.1),
            ],
            gens: vec![
                Generator {
                    bus: 1,
                    pg: 0.0,
                    qg: 0.0,
                    qmax: 2.0,
                    qmin: -2.0,
                    vg: 1.0,
                    mbase: 100.0,
                    in_service: true,
                    pmax: 3.0,
                    pmin: 0.0,
                    cost: CostCurve { c2: 0.05, c1: 10.0, c0: 0.0, startup: 0.0, shutdown: 0.0 },
                },
                Generator {
                    bus: 3,
                    pg: 0.0,
                    qg: 0.0,
                    qmax: 1.0,
                    qmin: -1.0,
                    vg: 1.0,
                    mbase: 100.0,
                    in_service: true,
                    pmax: 1.5,
                    pmin: 0.0,
                    cost: CostCurve { c2: 0.07, c1: 16.0, c0: 0.0, startup: 0.0, shutdown: 0.0 },
                },
            ],
            branches: vec![
                branch(1, 2, 0.02, 0.2, 0.04),
                branch(2, 3, 0.03, 0.25, 0.06),
                branch(1, 3, 0.025, 0.22, 0.05),
            ],
        }
    }

    #[test]
    fn report_orders_bounds_and_measures_gaps() {
        let net = loop_net();
        let report = analyze_case(&net, &AnalysisOptions::default(), &SolverConfig::default()).unwrap();
        assert_eq!(report.case, "analysis-test");
        assert_eq!(report.relaxations.len(), 2);
        let cp = report.copper_plate.as_ref().unwrap();
        let soc = &report.relaxations[0];
        let qc = &report.relaxations[1];
        assert_eq!(soc.kind, "soc");
        assert_eq!(qc.kind, "qc");
        let h = report.ac.objective;
        assert!(h > 0.0);
        let chain = dominance::dominance_chain(&[
            ("copper-plate", cp.bound),
            ("soc", soc.bound),
            ("qc", qc.bound),
            ("ac", h),
        ]);
        assert!(chain.iter().all(|l| l.ok), "{chain:#?}");
        // Gap ordering mirrors bound ordering up to solver noise on the
        // bounds (1e-6 relative, so ~1e-4 in percentage points).
        assert!(cp.gap_percent >= soc.gap_percent - 1e-4);
        assert!(soc.gap_percent >= qc.gap_percent - 1e-4);
        assert!(qc.gap_percent >= -1e-4);
        // JSON round trip.
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: CaseReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.relaxations.len(), 2);
        assert_eq!(back.copper_plate.unwrap().kind, "copper-plate");
    }

    #[test]
    fn gap_formula_matches_hand_value() {
        assert!((optimality_gap(200.0, 190.0) - 5.0).abs() < 1e-12);
        assert!((optimality_gap(5812.64, 5638.97) - 2.9878).abs() < 5e-4);
    }
}
