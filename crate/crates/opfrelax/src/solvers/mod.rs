//! Interior-point solvers and solution certification.
//!
//! * [`conic::solve_conic`]: primal-dual method with Nesterov-Todd
//!   scaling for the conic shape (linear + convex quadratic + rotated
//!   cone rows). Every relaxation goes through it.
//! * [`nlp::solve_nlp`]: primal-dual log-barrier method with exact
//!   second derivatives for the smooth nonconvex shape. The AC problem
//!   goes through it; it returns a local (not global) optimum.
//! * [`certify_solution`]: independent residual scan of a candidate
//!   point against a program, used by tests and the CLI to double-check
//!   solver claims without trusting solver internals.
//!
//! Both solvers are deterministic: no randomness, no threading, fixed
//! orderings, so repeated solves of the same program produce identical
//! iterates.

pub mod cones;
pub mod conic;
pub mod ldl;
pub mod nlp;

use thiserror::Error;

use crate::formulations::{ConicProgram, NlpProgram, Sense};

/// Shared solver knobs. Defaults: feasibility and gap tolerances 1e-8,
/// 200 iterations, fraction-to-boundary 0.99.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: usize,
    pub step_frac: f64,
    pub verbose: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_feas: 1e-8,
            tol_gap: 1e-8,
            max_iter: 200,
            step_frac: 0.99,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    IterationLimit,
    /// Solver stopped on a numerical failure; the returned point is the
    /// best iterate and its objective is not a trusted bound.
    NumericWarning,
    /// A Farkas-style certificate of primal infeasibility was found.
    InfeasibleDetected,
    /// The nonlinear solver could not restore feasibility.
    RestorationFailure,
}

impl SolverStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::IterationLimit => "iteration-limit",
            SolverStatus::NumericWarning => "numeric-warning",
            SolverStatus::InfeasibleDetected => "infeasible-detected",
            SolverStatus::RestorationFailure => "restoration-failure",
        }
    }
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolverStatus,
    /// Values in program variable order.
    pub x: Vec<f64>,
    pub objective: f64,
    /// For the conic solver: primal objective minus the complementarity
    /// gap, a valid lower bound at optimality. For the nonlinear solver
    /// it equals the objective.
    pub dual_objective: f64,
    pub iterations: usize,
    pub runtime_s: f64,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("malformed program: {0}")]
    Program(String),
}

/// Either program shape, for certification.
#[derive(Clone, Copy)]
pub enum ProgramRef<'a> {
    Conic(&'a ConicProgram),
    Nlp(&'a NlpProgram),
}

#[derive(Debug, Clone)]
pub struct ResidualClass {
    pub class: &'static str,
    pub max_violation: f64,
    /// Name of the worst row or variable in the class.
    pub worst: String,
}

/// Residual scan result: per-class maxima and the overall verdict.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub classes: Vec<ResidualClass>,
    pub max_violation: f64,
    pub tol: f64,
    pub pass: bool,
}

impl ResidualReport {
    fn from_classes(classes: Vec<ResidualClass>, tol: f64) -> Self {
        let max_violation = classes.iter().map(|c| c.max_violation).fold(0.0, f64::max);
        ResidualReport { max_violation, tol, pass: max_violation <= tol, classes }
    }
}

impl std::fmt::Display for ResidualReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "max violation {:.3e} vs tol {:.3e}: {}",
            self.max_violation,
            self.tol,
            if self.pass { "pass" } else { "FAIL" }
        )?;
        for c in &self.classes {
            writeln!(f, "  {:<12} {:.3e}  (worst: {})", c.class, c.max_violation, c.worst)?;
        }
        Ok(())
    }
}

/// Recomputes every constraint residual of `prog` at `x` from scratch.
/// Violations are absolute: bound and inequality rows report their
/// one-sided excess, equality rows |lhs - rhs|, cone rows
/// max(||z||^2 - u w, -u, -w).
pub fn certify_solution(prog: ProgramRef<'_>, x: &[f64], tol: f64) -> ResidualReport {
    match prog {
        ProgramRef::Conic(p) => certify_conic(p, x, tol),
        ProgramRef::Nlp(p) => certify_nlp(p, x, tol),
    }
}

fn track(worst: &mut (f64, String), violation: f64, name: &str) {
    if violation > worst.0 {
        worst.0 = violation;
        worst.1 = name.to_string();
    }
}

fn certify_conic(p: &ConicProgram, x: &[f64], tol: f64) -> ResidualReport {
    let mut bounds = (0.0, String::from("-"));
    for (k, v) in p.vars.iter().enumerate() {
        if v.lb.is_finite() {
            track(&mut bounds, v.lb - x[k], &v.name);
        }
        if v.ub.is_finite() {
            track(&mut bounds, x[k] - v.ub, &v.name);
        }
    }
    let mut eq = (0.0, String::from("-"));
    let mut ineq = (0.0, String::from("-"));
    for row in &p.rows {
        let lhs = row.expr.eval(x);
        match row.sense {
            Sense::Eq => track(&mut eq, (lhs - row.rhs).abs(), &row.name),
            Sense::Le => track(&mut ineq, lhs - row.rhs, &row.name),
        }
    }
    let mut quad = (0.0, String::from("-"));
    for row in &p.quad_rows {
        let mut lhs = row.lin.eval(x);
        for &(a, b, c) in &row.quad {
            lhs += c * x[a] * x[b];
        }
        track(&mut quad, lhs - row.rhs, &row.name);
    }
    let mut cone = (0.0, String::from("-"));
    for row in &p.cone_rows {
        let u = row.u.eval(x);
        let w = row.w.eval(x);
        let znorm2: f64 = row.z.iter().map(|e| e.eval(x)).map(|v| v * v).sum();
        let viol = (znorm2 - u * w).max(-u).max(-w);
        track(&mut cone, viol, &row.name);
    }
    ResidualReport::from_classes(
        vec![
            ResidualClass { class: "bounds", max_violation: bounds.0, worst: bounds.1 },
            ResidualClass { class: "linear-eq", max_violation: eq.0, worst: eq.1 },
            ResidualClass { class: "linear-ineq", max_violation: ineq.0, worst: ineq.1 },
            ResidualClass { class: "quadratic", max_violation: quad.0, worst: quad.1 },
            ResidualClass { class: "cone", max_violation: cone.0, worst: cone.1 },
        ],
        tol,
    )
}

fn certify_nlp(p: &NlpProgram, x: &[f64], tol: f64) -> ResidualReport {
    let mut bounds = (0.0, String::from("-"));
    for (k, v) in p.vars.iter().enumerate() {
        if v.lb.is_finite() {
            track(&mut bounds, v.lb - x[k], &v.name);
        }
        if v.ub.is_finite() {
            track(&mut bounds, x[k] - v.ub, &v.name);
        }
    }
    let mut eq = (0.0, String::from("-"));
    let mut ineq = (0.0, String::from("-"));
    for row in &p.constraints {
        let val = row.value(x);
        if row.lb == row.ub {
            track(&mut eq, (val - row.lb).abs(), &row.name);
        } else {
            if row.lb.is_finite() {
                track(&mut ineq, row.lb - val, &row.name);
            }
            if row.ub.is_finite() {
                track(&mut ineq, val - row.ub, &row.name);
            }
        }
    }
    ResidualReport::from_classes(
        vec![
            ResidualClass { class: "bounds", max_violation: bounds.0, worst: bounds.1 },
            ResidualClass { class: "equality", max_violation: eq.0, worst: eq.1 },
            ResidualClass { class: "inequality", max_violation: ineq.0, worst: ineq.1 },
        ],
        tol,
    )
}
