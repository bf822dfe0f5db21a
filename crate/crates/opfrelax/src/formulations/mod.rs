//! Optimization program representations and the formulation builders
//! that fill them.
//!
//! Two program shapes cover everything the crate solves:
//!
//! * [`ConicProgram`]: variables with box bounds, sparse linear rows,
//!   convex quadratic inequality rows, and rotated second-order cone
//!   rows with affine members. All relaxations lower to this shape.
//! * [`NlpProgram`]: smooth nonconvex constraints assembled from a small
//!   term language (linear, square, and the two trigonometric
//!   voltage-product terms of polar power flow). The AC problem lives
//!   here; first and second derivatives are exact and hand-coded per
//!   term.
//!
//! Builders (submodules) translate a validated [`Network`](crate::network::Network)
//! into these shapes:
//!
//! * [`ac`]: polar AC optimal power flow with explicit directed flows.
//! * [`relax`]: lifted voltage-product relaxations, cone on either the
//!   voltage products or the squared branch current, optionally
//!   strengthened with convex envelopes tying the lifted variables back
//!   to polar magnitudes and angles.
//! * [`copper_plate`]: network-free dispatch lower bound.
//! * [`sdp`]: export of the semidefinite strengthening in SDPA sparse
//!   format (no in-crate SDP solver).

pub mod ac;
pub mod copper_plate;
pub mod relax;
pub mod sdp;

use num_complex::Complex64;
use thiserror::Error;

use crate::network::{branch_admittance, Branch, NetworkError, Violation};

pub type VarId = usize;

/// One decision variable. Infinite bounds mean "free on that side";
/// `lb == ub` pins the variable. `start` seeds the nonlinear solver and
/// is ignored by the conic one (which self-starts from a central point).
#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub start: f64,
}

/// Sparse affine expression: sum of coeff * var, plus a constant.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn term(var: VarId, coeff: f64) -> Self {
        LinExpr { terms: vec![(var, coeff)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn push(&mut self, var: VarId, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((var, coeff));
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(v, c)| acc + c * x[v])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Eq,
    Le,
}

/// expr (sense) rhs.
#[derive(Debug, Clone)]
pub struct LinearRow {
    pub name: String,
    pub expr: LinExpr,
    pub sense: Sense,
    pub rhs: f64,
}

/// sum q_kl x_k x_l + lin <= rhs, with the quadratic part positive
/// semidefinite. Each unordered pair appears once in `quad` with the
/// full product coefficient (so `(k, k, c)` contributes c * x_k^2 and
/// `(k, l, c)` with k != l contributes c * x_k * x_l).
#[derive(Debug, Clone)]
pub struct QuadRow {
    pub name: String,
    pub quad: Vec<(VarId, VarId, f64)>,
    pub lin: LinExpr,
    pub rhs: f64,
}

/// Rotated cone membership ||z||^2 <= u * w with u, w >= 0; all members
/// are affine.
#[derive(Debug, Clone)]
pub struct ConeRow {
    pub name: String,
    pub u: LinExpr,
    pub w: LinExpr,
    pub z: Vec<LinExpr>,
}

/// Quadratic objective, same `quad` convention as [`QuadRow`].
#[derive(Debug, Clone, Default)]
pub struct Objective {
    pub quad: Vec<(VarId, VarId, f64)>,
    pub lin: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl Objective {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for &(var, c) in &self.lin {
            v += c * x[var];
        }
        for &(a, b, c) in &self.quad {
            v += c * x[a] * x[b];
        }
        v
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    pub vars: Vec<Variable>,
    pub rows: Vec<LinearRow>,
    pub quad_rows: Vec<QuadRow>,
    pub cone_rows: Vec<ConeRow>,
    pub objective: Objective,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64, start: f64) -> VarId {
        self.vars.push(Variable { name: name.into(), lb, ub, start });
        self.vars.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }
}

/// One term of a smooth constraint or objective in the nonlinear shape.
/// The two trigonometric terms cover the polar flow products:
/// coeff * v_i * v_j * cos(t_i - t_j - shift) and the sine twin.
#[derive(Debug, Clone, Copy)]
pub enum Term {
    Lin { var: VarId, coeff: f64 },
    Square { var: VarId, coeff: f64 },
    FlowCos { vi: VarId, vj: VarId, ti: VarId, tj: VarId, shift: f64, coeff: f64 },
    FlowSin { vi: VarId, vj: VarId, ti: VarId, tj: VarId, shift: f64, coeff: f64 },
}

impl Term {
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Term::Lin { var, coeff } => coeff * x[var],
            Term::Square { var, coeff } => coeff * x[var] * x[var],
            Term::FlowCos { vi, vj, ti, tj, shift, coeff } => {
                coeff * x[vi] * x[vj] * (x[ti] - x[tj] - shift).cos()
            }
            Term::FlowSin { vi, vj, ti, tj, shift, coeff } => {
                coeff * x[vi] * x[vj] * (x[ti] - x[tj] - shift).sin()
            }
        }
    }

    /// First derivatives; calls `push(var, d/dvar)` per involved variable.
    pub fn gradient(&self, x: &[f64], mut push: impl FnMut(VarId, f64)) {
        match *self {
            Term::Lin { var, coeff } => push(var, coeff),
            Term::Square { var, coeff } => push(var, 2.0 * coeff * x[var]),
            Term::FlowCos { vi, vj, ti, tj, shift, coeff } => {
                let (s, c) = (x[ti] - x[tj] - shift).sin_cos();
                push(vi, coeff * x[vj] * c);
                push(vj, coeff * x[vi] * c);
                push(ti, -coeff * x[vi] * x[vj] * s);
                push(tj, coeff * x[vi] * x[vj] * s);
            }
            Term::FlowSin { vi, vj, ti, tj, shift, coeff } => {
                let (s, c) = (x[ti] - x[tj] - shift).sin_cos();
                push(vi, coeff * x[vj] * s);
                push(vj, coeff * x[vi] * s);
                push(ti, coeff * x[vi] * x[vj] * c);
                push(tj, -coeff * x[vi] * x[vj] * c);
            }
        }
    }

    /// Second derivatives; calls `push(a, b, d^2/da db)` once per
    /// unordered variable pair with nonzero entry.
    pub fn hessian(&self, x: &[f64], mut push: impl FnMut(VarId, VarId, f64)) {
        match *self {
            Term::Lin { .. } => {}
            Term::Square { var, coeff } => push(var, var, 2.0 * coeff),
            Term::FlowCos { vi, vj, ti, tj, shift, coeff } => {
                let (s, c) = (x[ti] - x[tj] - shift).sin_cos();
                let (fi, fj) = (x[vi], x[vj]);
                push(vi, vj, coeff * c);
                push(vi, ti, -coeff * fj * s);
                push(vi, tj, coeff * fj * s);
                push(vj, ti, -coeff * fi * s);
                push(vj, tj, coeff * fi * s);
                push(ti, ti, -coeff * fi * fj * c);
                push(tj, tj, -coeff * fi * fj * c);
                push(ti, tj, coeff * fi * fj * c);
            }
            Term::FlowSin { vi, vj, ti, tj, shift, coeff } => {
                let (s, c) = (x[ti] - x[tj] - shift).sin_cos();
                let (fi, fj) = (x[vi], x[vj]);
                push(vi, vj, coeff * s);
                push(vi, ti, coeff * fj * c);
                push(vi, tj, -coeff * fj * c);
                push(vj, ti, coeff * fi * c);
                push(vj, tj, -coeff * fi * c);
                push(ti, ti, -coeff * fi * fj * s);
                push(tj, tj, -coeff * fi * fj * s);
                push(ti, tj, coeff * fi * fj * s);
            }
        }
    }
}

/// lb <= sum(terms) <= ub; equality when lb == ub.
#[derive(Debug, Clone)]
pub struct NlpConstraint {
    pub name: String,
    pub terms: Vec<Term>,
    pub lb: f64,
    pub ub: f64,
}

impl NlpConstraint {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.value(x)).sum()
    }
}

#[derive(Debug, Clone, Default)]
pub struct NlpProgram {
    pub vars: Vec<Variable>,
    pub constraints: Vec<NlpConstraint>,
    pub objective: Objective,
}

impl NlpProgram {
    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64, start: f64) -> VarId {
        self.vars.push(Variable { name: name.into(), lb, ub, start });
        self.vars.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("network failed validation:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    InvalidNetwork(Vec<Violation>),
    #[error(transparent)]
    Angle(#[from] NetworkError),
    #[error("formulation not applicable: {0}")]
    NotApplicable(String),
}

/// Which cone closes the lifted relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeVariant {
    /// |W_b|^2 <= (W_ff / tap^2) W_tt per branch.
    VoltageProduct,
    /// p_f^2 + q_f^2 <= (W_ff / tap^2) l per branch, with l the squared
    /// series-side current and explicit loss-linking rows.
    Current,
}

impl ConeVariant {
    pub fn short_name(self) -> &'static str {
        match self {
            ConeVariant::VoltageProduct => "w",
            ConeVariant::Current => "c",
        }
    }
}

impl std::str::FromStr for ConeVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "w" | "W" => Ok(ConeVariant::VoltageProduct),
            "c" | "C" => Ok(ConeVariant::Current),
            other => Err(format!("unknown cone variant '{other}' (expected 'w' or 'c')")),
        }
    }
}

/// Per-branch constants every builder shares. With series admittance
/// y = g + ib, half charging c = b_charge / 2 and tap T = tau e^{i shift},
/// the directed flows are linear in (W'_ff, W_tt, Re W_b, Im W_b) where
/// W'_ff = |V_f|^2 / tau^2 and W_b = V_f V_t* / T:
///
/// ```text
/// p_f = g W'_ff       - g Re - b Im        p_t = g W_tt       - g Re + b Im
/// q_f = -(b+c) W'_ff  + b Re - g Im        q_t = -(b+c) W_tt  + b Re + g Im
/// ```
#[derive(Debug, Clone, Copy)]
pub struct BranchCoeffs {
    pub g: f64,
    pub b: f64,
    /// Half of the total charging susceptance.
    pub c: f64,
    pub tau: f64,
    pub tau2: f64,
    pub shift: f64,
    pub r: f64,
    pub x: f64,
    /// Symmetric bound on the shifted angle difference, radians.
    pub angle: f64,
    /// MVA rating, per-unit, possibly infinite.
    pub rate: f64,
}

impl BranchCoeffs {
    pub fn new(br: &Branch) -> Result<Self, NetworkError> {
        let y = branch_admittance(br);
        Ok(BranchCoeffs {
            g: y.re,
            b: y.im,
            c: br.b_charge / 2.0,
            tau: br.tap,
            tau2: br.tap * br.tap,
            shift: br.shift,
            r: br.r,
            x: br.x,
            angle: br.angle_limit()?,
            rate: br.rate_a,
        })
    }

    pub fn y(&self) -> Complex64 {
        Complex64::new(self.g, self.b)
    }

    /// (coefficient on W'_ff resp. W_tt, on Re W_b, on Im W_b).
    pub fn pf_coeffs(&self) -> (f64, f64, f64) {
        (self.g, -self.g, -self.b)
    }

    pub fn qf_coeffs(&self) -> (f64, f64, f64) {
        (-(self.b + self.c), self.b, -self.g)
    }

    pub fn pt_coeffs(&self) -> (f64, f64, f64) {
        (self.g, -self.g, self.b)
    }

    pub fn qt_coeffs(&self) -> (f64, f64, f64) {
        (-(self.b + self.c), self.b, self.g)
    }
}

/// Variable layout of a lifted relaxation, indexed per bus / active
/// generator / active branch (positions in `gen_index` / `branch_index`
/// point back into the network's vectors).
#[derive(Debug, Clone, Default)]
pub struct LiftedVars {
    pub bus_w: Vec<VarId>,
    pub gen_index: Vec<usize>,
    pub gen_p: Vec<VarId>,
    pub gen_q: Vec<VarId>,
    pub branch_index: Vec<usize>,
    pub re_w: Vec<VarId>,
    pub im_w: Vec<VarId>,
    pub flow_pf: Vec<VarId>,
    pub flow_qf: Vec<VarId>,
    pub flow_pt: Vec<VarId>,
    pub flow_qt: Vec<VarId>,
    /// Squared series current, current-cone variant only.
    pub current: Vec<VarId>,
    /// Polar linking block, envelope-strengthened variant only.
    pub volt: Vec<VarId>,
    pub angle: Vec<VarId>,
    pub vv: Vec<VarId>,
    pub cs: Vec<VarId>,
    pub sn: Vec<VarId>,
}

/// A lifted relaxation program plus the layout needed to interpret its
/// solution vector.
#[derive(Debug, Clone)]
pub struct LiftedProgram {
    pub program: ConicProgram,
    pub vars: LiftedVars,
}

/// Variable layout of the polar AC program.
#[derive(Debug, Clone, Default)]
pub struct AcVars {
    pub volt: Vec<VarId>,
    pub angle: Vec<VarId>,
    pub gen_index: Vec<usize>,
    pub gen_p: Vec<VarId>,
    pub gen_q: Vec<VarId>,
    pub branch_index: Vec<usize>,
    pub flow_pf: Vec<VarId>,
    pub flow_qf: Vec<VarId>,
    pub flow_pt: Vec<VarId>,
    pub flow_qt: Vec<VarId>,
}

#[derive(Debug, Clone)]
pub struct AcProgram {
    pub program: NlpProgram,
    pub vars: AcVars,
}
