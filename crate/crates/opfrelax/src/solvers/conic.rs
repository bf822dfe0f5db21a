//! Primal-dual interior-point method for convex quadratic cone programs.
//!
//! The public shape [`ConicProgram`] is lowered to the canonical form
//!
//! ```text
//! minimize   (1/2) x' P x + q' x
//! subject to A x = b
//!            G x + s = h,   s in K = R+^l x SOC(m_1) x ... x SOC(m_k)
//! ```
//!
//! * pinned variables and equality rows become A;
//! * finite bounds and linear inequalities become orthant rows of G;
//! * each convex quadratic row x'Qx + a'x <= r is factored Q = F'F
//!   (small dense eigendecomposition, which also certifies convexity)
//!   and becomes the cone row ||Fx||^2 <= (r - a'x) * 1;
//! * each rotated cone row ||z||^2 <= u w maps to the second-order cone
//!   as (u + w, u - w, 2z).
//!
//! Rows are equilibrated by their max-abs coefficient; members of one
//! SOC block share a single scale so cone membership is preserved.
//!
//! The iteration is a Mehrotra predictor-corrector with Nesterov-Todd
//! scaling. Each step solves
//!
//! ```text
//! [ P  A'  G'  ] [dx]   [ bx ]
//! [ A  0   0   ] [dy] = [ by ]
//! [ G  0  -W'W ] [dz]   [ bz - W(lambda \ d_s) ]      ds = W(lambda \ d_s - W dz)
//! ```
//!
//! via a static-regularization LDL^T factorization (the symbolic
//! analysis is reused across iterations) with iterative refinement
//! against the unregularized matrix. The affine direction uses
//! d_s = -lambda o lambda; the combined direction adds the Mehrotra
//! correction and sigma * mu * e with sigma = (gap_aff / gap)^3.
//!
//! Status reporting: `Optimal` needs scaled primal/dual residuals below
//! `tol_feas` and relative gap below `tol_gap`; a Farkas-style
//! certificate (A'y + G'z ~ 0, z in K, b'y + h'z < 0) yields
//! `InfeasibleDetected`; scaling or factorization breakdown yields
//! `NumericWarning`; otherwise `IterationLimit`.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;

use super::cones::{ConeLayout, Scaling, SpanKind};
use super::ldl::{LdlFactor, SymmetricSparse};
use super::{Solution, SolveError, SolverConfig, SolverStatus};
use crate::formulations::{ConicProgram, LinExpr, Sense, VarId};

/// Static regularization of the KKT matrix: +EPS on the primal block,
/// -EPS on the multiplier blocks. Refinement removes the bias.
const STATIC_REG: f64 = 1e-9;

/// Relative eigenvalue cutoffs for the PSD factorization of quadratic
/// rows: below DROP the direction is treated as zero, below -REJECT the
/// row is reported nonconvex.
const PSD_DROP: f64 = 1e-12;
const PSD_REJECT: f64 = 1e-8;

type Row = Vec<(usize, f64)>;

struct Canonical {
    n: usize,
    a_rows: Vec<Row>,
    b: Vec<f64>,
    g_rows: Vec<Row>,
    h: Vec<f64>,
    layout: ConeLayout,
    /// Upper triangle of P (i <= j), obj = 1/2 x'Px + q'x + constant.
    p_upper: Vec<(usize, usize, f64)>,
    q: Vec<f64>,
    constant: f64,
}

impl Canonical {
    fn p_times(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, v) in &self.p_upper {
            out[i] += v * x[j];
            if i != j {
                out[j] += v * x[i];
            }
        }
    }

    fn a_times(&self, x: &[f64], out: &mut [f64]) {
        for (k, row) in self.a_rows.iter().enumerate() {
            out[k] = row.iter().map(|&(c, v)| v * x[c]).sum();
        }
    }

    fn at_times(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, row) in self.a_rows.iter().enumerate() {
            for &(c, v) in row {
                out[c] += v * y[k];
            }
        }
    }

    fn g_times(&self, x: &[f64], out: &mut [f64]) {
        for (k, row) in self.g_rows.iter().enumerate() {
            out[k] = row.iter().map(|&(c, v)| v * x[c]).sum();
        }
    }

    fn gt_times(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, row) in self.g_rows.iter().enumerate() {
            for &(c, v) in row {
                out[c] += v * z[k];
            }
        }
    }
}

/// Factors the PSD quadratic form into rows of F (each a sparse linear
/// expression) so that x'Qx = ||Fx||^2. Errors when the form has a
/// meaningfully negative eigenvalue.
fn factor_psd(quad: &[(VarId, VarId, f64)], context: &str) -> Result<Vec<Row>, SolveError> {
    if quad.is_empty() {
        return Ok(Vec::new());
    }
    let mut support: Vec<VarId> = quad.iter().flat_map(|&(a, b, _)| [a, b]).collect();
    support.sort_unstable();
    support.dedup();
    let k = support.len();
    let pos = |v: VarId| support.binary_search(&v).unwrap();
    let mut dense = DMatrix::<f64>::zeros(k, k);
    for &(a, b, c) in quad {
        let (ia, ib) = (pos(a), pos(b));
        if ia == ib {
            dense[(ia, ia)] += c;
        } else {
            dense[(ia, ib)] += c / 2.0;
            dense[(ib, ia)] += c / 2.0;
        }
    }
    let eig = dense.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
    let mut rows = Vec::new();
    for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -PSD_REJECT * scale {
            return Err(SolveError::Program(format!(
                "{context}: quadratic form is not positive semidefinite (eigenvalue {lam:.3e})"
            )));
        }
        if lam > PSD_DROP * scale {
            let w = lam.sqrt();
            let mut row: Row = Vec::new();
            for (r, &var) in support.iter().enumerate() {
                let coeff = w * eig.eigenvectors[(r, idx)];
                if coeff != 0.0 {
                    row.push((var, coeff));
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

fn expr_row(expr: &LinExpr, scale: f64) -> Row {
    expr.terms.iter().map(|&(v, c)| (v, c * scale)).collect()
}

fn lower(prog: &ConicProgram) -> Result<Canonical, SolveError> {
    let n = prog.vars.len();
    let mut a_rows = Vec::new();
    let mut b = Vec::new();
    let mut g_rows: Vec<Row> = Vec::new();
    let mut h = Vec::new();
    let mut layout = ConeLayout::new();

    for (i, v) in prog.vars.iter().enumerate() {
        if v.lb.is_nan() || v.ub.is_nan() {
            return Err(SolveError::Program(format!("variable {} has NaN bounds", v.name)));
        }
        if v.lb > v.ub {
            return Err(SolveError::Program(format!(
                "variable {} has inverted bounds [{}, {}]",
                v.name, v.lb, v.ub
            )));
        }
        if v.lb == v.ub {
            a_rows.push(vec![(i, 1.0)]);
            b.push(v.lb);
        }
    }
    for row in &prog.rows {
        let rhs = row.rhs - row.expr.constant;
        match row.sense {
            Sense::Eq => {
                a_rows.push(expr_row(&row.expr, 1.0));
                b.push(rhs);
            }
            Sense::Le => {
                g_rows.push(expr_row(&row.expr, 1.0));
                h.push(rhs);
            }
        }
    }
    // Quadratic rows that lost their curvature degrade to linear rows.
    let mut soc_blocks: Vec<Vec<(Row, f64)>> = Vec::new();
    for qrow in &prog.quad_rows {
        let f_rows = factor_psd(&qrow.quad, &qrow.name)?;
        let rhs = qrow.rhs - qrow.lin.constant;
        if f_rows.is_empty() {
            g_rows.push(expr_row(&qrow.lin, 1.0));
            h.push(rhs);
            continue;
        }
        // ||Fx||^2 <= rhs - a'x with u = 1:
        // s = (1 + w, 1 - w, 2Fx), w = rhs - a'x.
        let mut block = Vec::new();
        block.push((expr_row(&qrow.lin, 1.0), 1.0 + rhs));
        block.push((expr_row(&qrow.lin, -1.0), 1.0 - rhs));
        for f in &f_rows {
            block.push((f.iter().map(|&(v, c)| (v, -2.0 * c)).collect(), 0.0));
        }
        soc_blocks.push(block);
    }
    for crow in &prog.cone_rows {
        let mut sum = crow.u.clone();
        for &(v, c) in &crow.w.terms {
            sum.push(v, c);
        }
        sum.constant += crow.w.constant;
        let mut diff = crow.u.clone();
        for &(v, c) in &crow.w.terms {
            diff.push(v, -c);
        }
        diff.constant -= crow.w.constant;
        let mut block = Vec::new();
        block.push((expr_row(&sum, -1.0), sum.constant));
        block.push((expr_row(&diff, -1.0), diff.constant));
        for zexpr in &crow.z {
            block.push((expr_row(zexpr, -2.0), 2.0 * zexpr.constant));
        }
        soc_blocks.push(block);
    }
    // Bound rows go to the orthant after explicit Le rows.
    for (i, v) in prog.vars.iter().enumerate() {
        if v.lb == v.ub {
            continue;
        }
        if v.lb.is_finite() {
            g_rows.push(vec![(i, -1.0)]);
            h.push(-v.lb);
        }
        if v.ub.is_finite() {
            g_rows.push(vec![(i, 1.0)]);
            h.push(v.ub);
        }
    }
    layout.push_orthant(g_rows.len());
    for block in soc_blocks {
        layout.push_soc(block.len());
        for (row, rhs) in block {
            g_rows.push(row);
            h.push(rhs);
        }
    }

    // Row equilibration: per-row max-abs for A and orthant rows, one
    // shared scale per SOC block.
    let row_scale = |row: &mut Row, rhs: &mut f64, scale: f64| {
        if scale > 0.0 && scale.is_finite() {
            let inv = 1.0 / scale;
            for (_, c) in row.iter_mut() {
                *c *= inv;
            }
            *rhs *= inv;
        }
    };
    for (row, rhs) in a_rows.iter_mut().zip(b.iter_mut()) {
        let m = row.iter().fold(0.0f64, |a, &(_, c)| a.max(c.abs()));
        row_scale(row, rhs, m);
    }
    for span in &layout.spans {
        match span.kind {
            SpanKind::Orthant => {
                for k in span.start..span.start + span.len {
                    let m = g_rows[k].iter().fold(0.0f64, |a, &(_, c)| a.max(c.abs()));
                    row_scale(&mut g_rows[k], &mut h[k], m);
                }
            }
            SpanKind::Soc => {
                let mut m = 0.0f64;
                for k in span.start..span.start + span.len {
                    m = g_rows[k].iter().fold(m, |a, &(_, c)| a.max(c.abs()));
                }
                for k in span.start..span.start + span.len {
                    row_scale(&mut g_rows[k], &mut h[k], m);
                }
            }
        }
    }

    // Objective: P = second-derivative matrix of the quadratic part.
    let mut p_map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    if !prog.objective.quad.is_empty() {
        factor_psd(&prog.objective.quad, "objective")?;
        for &(a, bvar, c) in &prog.objective.quad {
            let (i, j) = if a <= bvar { (a, bvar) } else { (bvar, a) };
            let v = if i == j { 2.0 * c } else { c };
            *p_map.entry((i, j)).or_insert(0.0) += v;
        }
    }
    let mut q = vec![0.0; n];
    for &(v, c) in &prog.objective.lin {
        q[v] += c;
    }
    Ok(Canonical {
        n,
        a_rows,
        b,
        g_rows,
        h,
        layout,
        p_upper: p_map.into_iter().map(|((i, j), v)| (i, j, v)).collect(),
        q,
        constant: prog.objective.constant,
    })
}

/// KKT matrix with fixed pattern and rewritable scaling block.
struct Kkt {
    exact: SymmetricSparse,
    reg: SymmetricSparse,
    factor: LdlFactor,
    static_values: Vec<f64>,
    /// Entry index of each orthant row's diagonal, (cone_row, idx).
    orthant_diag: Vec<(usize, usize)>,
    /// Per SOC block: (local i, local j, entry idx) for the dense upper
    /// triangle.
    soc_entries: Vec<Vec<(usize, usize, usize)>>,
    /// Entry indices receiving +reg / -reg.
    pos_reg: Vec<usize>,
    neg_reg: Vec<usize>,
    dim: usize,
}

impl Kkt {
    fn build(can: &Canonical) -> Self {
        let n = can.n;
        let p = can.a_rows.len();
        let m = can.g_rows.len();
        let dim = n + p + m;
        let mut index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut values: Vec<f64> = Vec::new();
        let add = |index: &mut BTreeMap<(usize, usize), usize>,
                       values: &mut Vec<f64>,
                       i: usize,
                       j: usize,
                       v: f64|
         -> usize {
            let key = if i <= j { (i, j) } else { (j, i) };
            match index.get(&key) {
                Some(&slot) => {
                    values[slot] += v;
                    slot
                }
                None => {
                    values.push(v);
                    index.insert(key, values.len() - 1);
                    values.len() - 1
                }
            }
        };

        for &(i, j, v) in &can.p_upper {
            add(&mut index, &mut values, i, j, v);
        }
        let mut pos_reg = Vec::new();
        for i in 0..n {
            pos_reg.push(add(&mut index, &mut values, i, i, 0.0));
        }
        let mut neg_reg = Vec::new();
        for (k, row) in can.a_rows.iter().enumerate() {
            for &(c, v) in row {
                add(&mut index, &mut values, n + k, c, v);
            }
            neg_reg.push(add(&mut index, &mut values, n + k, n + k, 0.0));
        }
        for (k, row) in can.g_rows.iter().enumerate() {
            for &(c, v) in row {
                add(&mut index, &mut values, n + p + k, c, v);
            }
        }
        let mut orthant_diag = Vec::new();
        let mut soc_entries = Vec::new();
        for span in &can.layout.spans {
            match span.kind {
                SpanKind::Orthant => {
                    for r in span.start..span.start + span.len {
                        let slot = add(&mut index, &mut values, n + p + r, n + p + r, 0.0);
                        orthant_diag.push((r, slot));
                        neg_reg.push(slot);
                    }
                }
                SpanKind::Soc => {
                    let mut block = Vec::new();
                    for i in 0..span.len {
                        for j in i..span.len {
                            let slot = add(
                                &mut index,
                                &mut values,
                                n + p + span.start + i,
                                n + p + span.start + j,
                                0.0,
                            );
                            block.push((i, j, slot));
                            if i == j {
                                neg_reg.push(slot);
                            }
                        }
                    }
                    soc_entries.push(block);
                }
            }
        }

        let mut entries = vec![(0usize, 0usize); values.len()];
        for (&(i, j), &slot) in &index {
            entries[slot] = (i, j);
        }
        let exact = SymmetricSparse::from_parts(dim, entries.clone(), values.clone());
        let reg = SymmetricSparse::from_parts(dim, entries, values.clone());
        let factor = LdlFactor::symbolic(&exact);
        Kkt {
            exact,
            reg,
            factor,
            static_values: values,
            orthant_diag,
            soc_entries,
            pos_reg,
            neg_reg,
            dim,
        }
    }

    /// Rewrites the scaling block with -W'W and refactors. A column
    /// whose Schur pivot sits below the rounding noise of the
    /// elimination can come out exactly zero; such a pivot is
    /// ill-determined, so the factorization is retried with a larger
    /// static shift (the ladder is fixed, keeping runs deterministic),
    /// and iterative refinement against the unshifted matrix removes
    /// the extra bias from the solves.
    fn refactor(&mut self, can: &Canonical, scaling: &Scaling) -> Result<(), SolveError> {
        let vals = self.exact.values_mut();
        vals.copy_from_slice(&self.static_values);
        for &(r, slot) in &self.orthant_diag {
            let w = scaling.orthant_w[r];
            vals[slot] = -w * w;
        }
        let soc_spans: Vec<_> =
            can.layout.spans.iter().filter(|s| s.kind == SpanKind::Soc).collect();
        for (bidx, span) in soc_spans.iter().enumerate() {
            let w2 = scaling.soc_w_squared(bidx, span.len);
            for &(i, j, slot) in &self.soc_entries[bidx] {
                vals[slot] = -w2[i * span.len + j];
            }
        }
        let mut reg = STATIC_REG;
        loop {
            let reg_vals = self.reg.values_mut();
            reg_vals.copy_from_slice(self.exact.values());
            for &slot in &self.pos_reg {
                reg_vals[slot] += reg;
            }
            for &slot in &self.neg_reg {
                reg_vals[slot] -= reg;
            }
            match self.factor.factor(&self.reg) {
                Ok(()) => return Ok(()),
                Err(e) if reg < 1e-4 => {
                    let _ = e;
                    reg *= 100.0;
                }
                Err(e) => {
                    return Err(SolveError::Program(format!("KKT factorization failed: {e}")))
                }
            }
        }
    }

    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        self.factor.solve_refined(&self.exact, rhs, out);
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the program. Returns `Err` only for malformed input; numeric
/// trouble is reported through [`SolverStatus`].
pub fn solve_conic(prog: &ConicProgram, cfg: &SolverConfig) -> Result<Solution, SolveError> {
    let t0 = Instant::now();
    let can = lower(prog)?;
    let (n, p, m) = (can.n, can.a_rows.len(), can.g_rows.len());
    let nu = can.layout.degree().max(1);

    let finish = |status: SolverStatus, x: &[f64], dual: f64, iters: usize| Solution {
        status,
        x: x.to_vec(),
        objective: prog.objective.eval(x),
        dual_objective: dual,
        iterations: iters,
        runtime_s: t0.elapsed().as_secs_f64(),
    };

    let mut kkt = Kkt::build(&can);
    let dim = kkt.dim;

    // Identity-scaling start: solve the KKT system at W = I for the
    // primal/dual seed, then shift s and z into the cone.
    let ident = identity_scaling(&can.layout);
    kkt.refactor(&can, &ident)?;
    let mut rhs = vec![0.0; dim];
    for i in 0..n {
        rhs[i] = -can.q[i];
    }
    rhs[n..n + p].copy_from_slice(&can.b);
    rhs[n + p..].copy_from_slice(&can.h);
    let mut sol0 = vec![0.0; dim];
    kkt.solve(&rhs, &mut sol0);
    let mut x = sol0[..n].to_vec();
    let mut y = sol0[n..n + p].to_vec();
    let mut z = sol0[n + p..].to_vec();
    let mut s: Vec<f64> = z.iter().map(|&v| -v).collect();
    can.layout.shift_to_interior(&mut s);
    can.layout.shift_to_interior(&mut z);

    if m == 0 {
        // Purely equality-constrained QP: the seed solve is the answer.
        let obj = prog.objective.eval(&x);
        let mut ax = vec![0.0; p];
        can.a_times(&x, &mut ax);
        let pres: f64 = ax
            .iter()
            .zip(&can.b)
            .map(|(l, r)| (l - r).abs())
            .fold(0.0, f64::max);
        let status = if pres <= cfg.tol_feas.max(1e-10) * norm2(&can.b).max(1.0) {
            SolverStatus::Optimal
        } else {
            SolverStatus::NumericWarning
        };
        return Ok(finish(status, &x, obj, 0));
    }

    let norm_b = norm2(&can.b).max(1.0);
    let norm_h = norm2(&can.h).max(1.0);
    let norm_q = norm2(&can.q).max(1.0);

    let mut rx = vec![0.0; n];
    let mut ry = vec![0.0; p];
    let mut rz = vec![0.0; m];
    let mut px = vec![0.0; n];
    let mut aty = vec![0.0; n];
    let mut gtz = vec![0.0; n];
    let mut work_m1 = vec![0.0; m];
    let mut work_m2 = vec![0.0; m];
    let mut work_m3 = vec![0.0; m];
    let mut ds_aff = vec![0.0; m];
    let mut ds = vec![0.0; m];
    let mut unit = vec![0.0; m];
    can.layout.unit(&mut unit);

    let mut status = SolverStatus::IterationLimit;
    let mut iterations = cfg.max_iter;
    let mut dual_objective = f64::NEG_INFINITY;

    for iter in 0..cfg.max_iter {
        // Residuals and objective values.
        can.p_times(&x, &mut px);
        can.at_times(&y, &mut aty);
        can.gt_times(&z, &mut gtz);
        for i in 0..n {
            rx[i] = px[i] + can.q[i] + aty[i] + gtz[i];
        }
        can.a_times(&x, &mut ry);
        for k in 0..p {
            ry[k] -= can.b[k];
        }
        can.g_times(&x, &mut rz);
        for k in 0..m {
            rz[k] += s[k] - can.h[k];
        }
        let gap = dot(&s, &z);
        let pcost = 0.5 * dot(&px, &x) + dot(&can.q, &x);
        let dcost = pcost + dot(&y, &ry) + dot(&z, &rz) - gap;
        dual_objective = dcost + can.constant;
        let pres = (norm2(&ry) / norm_b).max(norm2(&rz) / norm_h);
        let dres = norm2(&rx) / norm_q;
        let relgap = gap / pcost.abs().max(1.0);

        if cfg.verbose {
            eprintln!(
                "iter {iter:3}  pcost {pcost:+.6e}  gap {gap:.3e}  pres {pres:.3e}  dres {dres:.3e}"
            );
        }
        if pres <= cfg.tol_feas && dres <= cfg.tol_feas && relgap <= cfg.tol_gap {
            status = SolverStatus::Optimal;
            iterations = iter;
            break;
        }

        // Farkas-style certificate of primal infeasibility.
        let cert = -(dot(&y, &can.b) + dot(&z, &can.h));
        if cert > 1e-8 {
            let mut res = vec![0.0; n];
            can.at_times(&y, &mut res);
            let mut gres = vec![0.0; n];
            can.gt_times(&z, &mut gres);
            let res_inf = res
                .iter()
                .zip(&gres)
                .map(|(a, g)| (a + g).abs())
                .fold(0.0f64, f64::max);
            let zbar_outside = can.layout.outside_measure(&z.iter().map(|v| v / cert).collect::<Vec<_>>());
            if res_inf / cert <= 1e-10 && zbar_outside <= 1e-10 {
                status = SolverStatus::InfeasibleDetected;
                iterations = iter;
                break;
            }
        }

        let scaling = match Scaling::compute(&can.layout, &s, &z) {
            Some(sc) => sc,
            None => {
                status = SolverStatus::NumericWarning;
                iterations = iter;
                break;
            }
        };
        if kkt.refactor(&can, &scaling).is_err() {
            status = SolverStatus::NumericWarning;
            iterations = iter;
            break;
        }
        let lambda = scaling.lambda.clone();
        let mu = gap / nu as f64;

        // Affine direction: d_s = -lambda o lambda.
        can.layout.jordan_mul(&lambda, &lambda, &mut work_m1);
        for v in work_m1.iter_mut() {
            *v = -*v;
        }
        let (dx_a, dy_a, dz_a, alpha_aff, gap_aff) = {
            let (dx, dy, dz) = newton_step(
                &kkt, &can, &scaling, &rx, &ry, &rz, &work_m1, &lambda, &mut work_m2, &mut work_m3,
            );
            // ds = W(lambda \ d_s - W dz)
            compute_ds(&can.layout, &scaling, &work_m1, &lambda, &dz, &mut ds_aff, &mut work_m2, &mut work_m3);
            let alpha = can
                .layout
                .max_step(&s, &ds_aff)
                .min(can.layout.max_step(&z, &dz))
                .min(1.0);
            let snew: Vec<f64> = s.iter().zip(&ds_aff).map(|(a, d)| a + alpha * d).collect();
            let znew: Vec<f64> = z.iter().zip(&dz).map(|(a, d)| a + alpha * d).collect();
            (dx, dy, dz, alpha, dot(&snew, &znew))
        };
        let _ = (&dx_a, &dy_a, alpha_aff);
        let sigma = ((gap_aff / gap).clamp(0.0, 1.0)).powi(3);

        // Combined direction:
        // d_s = -lambda o lambda - (W^{-1} ds_aff) o (W dz_aff) + sigma mu e.
        can.layout.jordan_mul(&lambda, &lambda, &mut work_m1);
        for v in work_m1.iter_mut() {
            *v = -*v;
        }
        let mut winv_ds = vec![0.0; m];
        scaling.apply_w_inv(&can.layout, &ds_aff, &mut winv_ds);
        let mut w_dz = vec![0.0; m];
        scaling.apply_w(&can.layout, &dz_a, &mut w_dz);
        let mut corr = vec![0.0; m];
        can.layout.jordan_mul(&winv_ds, &w_dz, &mut corr);
        for i in 0..m {
            work_m1[i] += -corr[i] + sigma * mu * unit[i];
        }
        let (dx, dy, dz) = newton_step(
            &kkt, &can, &scaling, &rx, &ry, &rz, &work_m1, &lambda, &mut work_m2, &mut work_m3,
        );
        compute_ds(&can.layout, &scaling, &work_m1, &lambda, &dz, &mut ds, &mut work_m2, &mut work_m3);

        let alpha_max = can.layout.max_step(&s, &ds).min(can.layout.max_step(&z, &dz));
        let alpha = (cfg.step_frac * alpha_max).min(1.0);
        if !alpha.is_finite() || alpha < 1e-13 {
            status = SolverStatus::NumericWarning;
            iterations = iter;
            break;
        }
        for i in 0..n {
            x[i] += alpha * dx[i];
        }
        for k in 0..p {
            y[k] += alpha * dy[k];
        }
        for k in 0..m {
            s[k] += alpha * ds[k];
            z[k] += alpha * dz[k];
        }
    }

    Ok(finish(status, &x, dual_objective, iterations))
}

/// Identity NT scaling (W = I) used for the cold-start solve.
fn identity_scaling(layout: &ConeLayout) -> Scaling {
    let mut orthant_w = vec![0.0; layout.dim];
    let mut soc = Vec::new();
    for span in &layout.spans {
        match span.kind {
            SpanKind::Orthant => {
                for i in span.start..span.start + span.len {
                    orthant_w[i] = 1.0;
                }
            }
            SpanKind::Soc => {
                let mut v = vec![0.0; span.len];
                v[0] = 1.0;
                soc.push(super::cones::SocScaling { eta: 1.0, v });
            }
        }
    }
    Scaling { orthant_w, soc, lambda: vec![0.0; layout.dim] }
}

/// Solves one Newton system for (dx, dy, dz) given the scaled
/// complementarity right-hand side `d_s`.
#[allow(clippy::too_many_arguments)]
fn newton_step(
    kkt: &Kkt,
    can: &Canonical,
    scaling: &Scaling,
    rx: &[f64],
    ry: &[f64],
    rz: &[f64],
    d_s: &[f64],
    lambda: &[f64],
    tmp1: &mut [f64],
    tmp2: &mut [f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (n, p, m) = (can.n, can.a_rows.len(), can.g_rows.len());
    // bz = -rz - W (lambda \ d_s)
    can.layout.jordan_div(lambda, d_s, tmp1);
    scaling.apply_w(&can.layout, tmp1, tmp2);
    let mut rhs = vec![0.0; kkt.dim];
    for i in 0..n {
        rhs[i] = -rx[i];
    }
    for k in 0..p {
        rhs[n + k] = -ry[k];
    }
    for k in 0..m {
        rhs[n + p + k] = -rz[k] - tmp2[k];
    }
    let mut sol = vec![0.0; kkt.dim];
    kkt.solve(&rhs, &mut sol);
    (
        sol[..n].to_vec(),
        sol[n..n + p].to_vec(),
        sol[n + p..].to_vec(),
    )
}

/// ds = W (lambda \ d_s - W dz).
#[allow(clippy::too_many_arguments)]
fn compute_ds(
    layout: &ConeLayout,
    scaling: &Scaling,
    d_s: &[f64],
    lambda: &[f64],
    dz: &[f64],
    ds: &mut [f64],
    tmp1: &mut [f64],
    tmp2: &mut [f64],
) {
    layout.jordan_div(lambda, d_s, tmp1);
    scaling.apply_w(layout, dz, tmp2);
    for i in 0..ds.len() {
        tmp1[i] -= tmp2[i];
    }
    scaling.apply_w(layout, tmp1, ds);
}
