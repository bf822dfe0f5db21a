//! Primal-dual interior-point solver for smooth nonconvex programs with
//! a quadratic objective and constraints built from the [`Term`]
//! language (linear, square, and polar trigonometric products).
//!
//! Range constraints lb <= c(x) <= ub get a slack variable s with those
//! bounds and become c(x) - s = 0, so internally the problem is
//!
//! ```text
//! minimize  f(x)   subject to  c(x) = 0,  lo <= x <= hi,
//! ```
//!
//! with pinned variables (lo == hi) held fixed and masked out of the
//! linear algebra. The log-barrier subproblems
//!
//! ```text
//! minimize f(x) - mu sum ln(x - lo) - mu sum ln(hi - x)  s.t. c(x) = 0
//! ```
//!
//! are solved by damped Newton steps on the primal-dual system
//!
//! ```text
//! [ W + Sigma + dw I   J' ] [dx]   [ -grad f - J'y + mu/(x-lo) - mu/(hi-x) ]
//! [ J                -dc I ] [dy] = [ -c(x)                                 ]
//! ```
//!
//! where W is the Lagrangian Hessian (exact, from the term language),
//! Sigma the primal-dual barrier curvature z/(x - bound), and dw is
//! raised until the LDL^T inertia is (n_free, m) — the certificate that
//! the step is a descent direction for the locally convexified model. A
//! small dc keeps the system quasi-definite so the factorization never
//! reorders. Steps respect the fraction-to-boundary rule and are
//! accepted by an Armijo test on the l1 exact-penalty merit function;
//! the barrier parameter follows the usual superlinear schedule
//! mu <- max(tol/10, min(0.2 mu, mu^1.5)).
//!
//! The solver stops with `Optimal` when the mu = 0 optimality error
//! (scaled dual infeasibility, constraint violation, complementarity)
//! drops below `tol_feas` (`tol_gap` is not used here); with
//! `RestorationFailure` when steps collapse while the constraints are
//! far from satisfied; with `NumericWarning` on factorization
//! breakdown; otherwise with `IterationLimit`.
//!
//! `Solution::x` is indexed by the caller's variable ids (slacks are
//! stripped), and `dual_objective` simply repeats the objective: a
//! nonconvex solve certifies no bound.

use std::collections::BTreeMap;
use std::time::Instant;

use super::ldl::{LdlFactor, SymmetricSparse};
use super::{Solution, SolveError, SolverConfig, SolverStatus};
use crate::formulations::{NlpProgram, Objective, Term, Variable};

/// Initial barrier parameter.
const MU_INIT: f64 = 0.1;
/// Barrier subproblem is "solved" when its error is below KAPPA_EPS * mu.
const KAPPA_EPS: f64 = 10.0;
/// Multiplier clamp width around mu / (x - bound).
const KAPPA_SIGMA: f64 = 1e10;
/// Armijo slope fraction.
const ARMIJO_C: f64 = 1e-4;
/// Baseline dual regularization keeping the KKT system quasi-definite.
const DELTA_C: f64 = 1e-11;
/// Interior push for start values: fraction of bound magnitude / width.
const KAPPA_PUSH: f64 = 1e-2;

struct ExpandedCon {
    terms: Vec<Term>,
    rhs: f64,
}

/// Internal reformulation: originals + slacks, all-equality constraints.
struct Expanded {
    vars: Vec<Variable>,
    cons: Vec<ExpandedCon>,
    n_orig: usize,
}

fn expand(prog: &NlpProgram) -> Result<Expanded, SolveError> {
    for v in &prog.vars {
        if v.lb.is_nan() || v.ub.is_nan() || v.lb > v.ub {
            return Err(SolveError::Program(format!(
                "variable {} has unusable bounds [{}, {}]",
                v.name, v.lb, v.ub
            )));
        }
        if v.lb == v.ub && !v.lb.is_finite() {
            return Err(SolveError::Program(format!(
                "variable {} is pinned at an infinite value",
                v.name
            )));
        }
    }
    let n_orig = prog.vars.len();
    let mut vars = prog.vars.clone();
    let mut cons = Vec::new();
    // Slack starts are evaluated at the pushed original start point.
    let x0: Vec<f64> = prog
        .vars
        .iter()
        .map(|v| if v.lb == v.ub { v.lb } else { pushed_start(v) })
        .collect();
    for c in &prog.constraints {
        if c.lb.is_nan() || c.ub.is_nan() || c.lb > c.ub {
            return Err(SolveError::Program(format!(
                "constraint {} has unusable bounds [{}, {}]",
                c.name, c.lb, c.ub
            )));
        }
        if c.lb == c.ub {
            if !c.lb.is_finite() {
                return Err(SolveError::Program(format!(
                    "constraint {} pins an infinite value",
                    c.name
                )));
            }
            cons.push(ExpandedCon { terms: c.terms.clone(), rhs: c.lb });
        } else if c.lb.is_infinite() && c.ub.is_infinite() {
            continue; // vacuous
        } else {
            let value = c.value(&x0);
            let slack = vars.len();
            vars.push(Variable {
                name: format!("{}.slack", c.name),
                lb: c.lb,
                ub: c.ub,
                start: value,
            });
            let mut terms = c.terms.clone();
            terms.push(Term::Lin { var: slack, coeff: -1.0 });
            cons.push(ExpandedCon { terms, rhs: 0.0 });
        }
    }
    Ok(Expanded { vars, cons, n_orig })
}

/// Start value moved strictly inside the bounds, IPOPT-style: at least
/// KAPPA_PUSH * max(1, |bound|) from each finite side, but no more than
/// KAPPA_PUSH of the interval width.
fn pushed_start(v: &Variable) -> f64 {
    let mut x = v.start;
    if x.is_nan() {
        x = 0.0;
    }
    let (lo, hi) = (v.lb, v.ub);
    if lo.is_finite() && hi.is_finite() {
        let p_lo = (KAPPA_PUSH * lo.abs().max(1.0)).min(KAPPA_PUSH * (hi - lo));
        let p_hi = (KAPPA_PUSH * hi.abs().max(1.0)).min(KAPPA_PUSH * (hi - lo));
        x.clamp(lo + p_lo, hi - p_hi)
    } else if lo.is_finite() {
        x.max(lo + KAPPA_PUSH * lo.abs().max(1.0))
    } else if hi.is_finite() {
        x.min(hi - KAPPA_PUSH * hi.abs().max(1.0))
    } else {
        x
    }
}

fn objective_gradient(obj: &Objective, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for &(v, c) in &obj.lin {
        out[v] += c;
    }
    for &(a, b, c) in &obj.quad {
        out[a] += c * x[b];
        out[b] += c * x[a];
    }
}

pub fn solve_nlp(prog: &NlpProgram, cfg: &SolverConfig) -> Result<Solution, SolveError> {
    let t0 = Instant::now();
    let exp = expand(prog)?;
    let n = exp.vars.len();
    let m = exp.cons.len();
    let tol = cfg.tol_feas;

    // Free-variable mask and bounds.
    let pinned: Vec<bool> = exp.vars.iter().map(|v| v.lb == v.ub).collect();
    let free: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();
    let free_of: Vec<Option<usize>> = {
        let mut map = vec![None; n];
        for (k, &i) in free.iter().enumerate() {
            map[i] = Some(k);
        }
        map
    };
    let nf = free.len();
    let lo: Vec<f64> = exp.vars.iter().map(|v| v.lb).collect();
    let hi: Vec<f64> = exp.vars.iter().map(|v| v.ub).collect();

    // Start point.
    let mut x: Vec<f64> = exp
        .vars
        .iter()
        .map(|v| if v.lb == v.ub { v.lb } else { pushed_start(v) })
        .collect();
    let mut y = vec![0.0; m];
    let mut zl = vec![0.0; n];
    let mut zu = vec![0.0; n];
    for &i in &free {
        if lo[i].is_finite() {
            zl[i] = 1.0;
        }
        if hi[i].is_finite() {
            zu[i] = 1.0;
        }
    }
    let n_bound_sides: usize = free
        .iter()
        .map(|&i| lo[i].is_finite() as usize + hi[i].is_finite() as usize)
        .sum();

    // Objective scaling.
    let mut grad_f = vec![0.0; n];
    objective_gradient(&prog.objective, &x, &mut grad_f);
    let grad0 = grad_f.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let s_f = (100.0 / grad0.max(1.0)).min(1.0);

    let finish = |status: SolverStatus, x: &[f64], iters: usize| {
        let objective = prog.objective.eval(x);
        Solution {
            status,
            x: x[..exp.n_orig].to_vec(),
            objective,
            dual_objective: objective,
            iterations: iters,
            runtime_s: t0.elapsed().as_secs_f64(),
        }
    };

    if nf == 0 {
        let feasible = exp
            .cons
            .iter()
            .all(|c| (c.terms.iter().map(|t| t.value(&x)).sum::<f64>() - c.rhs).abs() <= tol.max(1e-9));
        let status = if feasible { SolverStatus::Optimal } else { SolverStatus::RestorationFailure };
        return Ok(finish(status, &x, 0));
    }

    // --- KKT pattern (fixed across iterations) ---------------------------
    let dim = nf + m;
    let mut index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let add_key = |index: &mut BTreeMap<(usize, usize), usize>, count: &mut usize, i: usize, j: usize| {
        let key = if i <= j { (i, j) } else { (j, i) };
        index.entry(key).or_insert_with(|| {
            let s = *count;
            *count += 1;
            s
        });
    };
    let mut count = 0usize;
    for &i in &free {
        let fa = free_of[i].unwrap();
        add_key(&mut index, &mut count, fa, fa);
    }
    for &(a, b, _) in &prog.objective.quad {
        if let (Some(fa), Some(fb)) = (free_of[a], free_of[b]) {
            add_key(&mut index, &mut count, fa, fb);
        }
    }
    for (k, con) in exp.cons.iter().enumerate() {
        for term in &con.terms {
            term.hessian(&x, |a, b, _| {
                if let (Some(fa), Some(fb)) = (free_of[a], free_of[b]) {
                    add_key(&mut index, &mut count, fa, fb);
                }
            });
            term.gradient(&x, |a, _| {
                if let Some(fa) = free_of[a] {
                    add_key(&mut index, &mut count, nf + k, fa);
                }
            });
        }
        add_key(&mut index, &mut count, nf + k, nf + k);
    }
    let mut entries = vec![(0usize, 0usize); count];
    for (&(i, j), &slot) in &index {
        entries[slot] = (i, j);
    }
    let slot_of = |i: usize, j: usize| -> usize {
        let key = if i <= j { (i, j) } else { (j, i) };
        index[&key]
    };
    let free_diag_slots: Vec<usize> = free.iter().map(|&i| slot_of(free_of[i].unwrap(), free_of[i].unwrap())).collect();
    let con_diag_slots: Vec<usize> = (0..m).map(|k| slot_of(nf + k, nf + k)).collect();

    let mut kkt = SymmetricSparse::from_parts(dim, entries, vec![0.0; count]);
    let mut factor = LdlFactor::symbolic(&kkt);
    let mut base_values = vec![0.0; count];

    // --- iteration state --------------------------------------------------
    let mut mu = MU_INIT;
    let mu_min = (tol / 11.0).max(1e-14);
    let mut nu: f64 = 1e-6; // l1 penalty weight
    let mut prev_dw = 0.0f64;
    let mut small_steps = 0usize;
    let mut status = SolverStatus::IterationLimit;
    let mut iterations = cfg.max_iter;

    let mut cvals = vec![0.0; m];
    let mut jrows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut scratch = vec![0.0; nf];

    let eval_cons = |x: &[f64], cvals: &mut [f64]| {
        for (k, con) in exp.cons.iter().enumerate() {
            cvals[k] = con.terms.iter().map(|t| t.value(x)).sum::<f64>() - con.rhs;
        }
    };
    let barrier = |x: &[f64]| -> f64 {
        let mut acc = 0.0;
        for &i in &free {
            if lo[i].is_finite() {
                let d = x[i] - lo[i];
                if d <= 0.0 {
                    return f64::INFINITY;
                }
                acc -= d.ln();
            }
            if hi[i].is_finite() {
                let d = hi[i] - x[i];
                if d <= 0.0 {
                    return f64::INFINITY;
                }
                acc -= d.ln();
            }
        }
        acc
    };

    for iter in 0..cfg.max_iter {
        // Evaluations.
        objective_gradient(&prog.objective, &x, &mut grad_f);
        eval_cons(&x, &mut cvals);
        for (k, con) in exp.cons.iter().enumerate() {
            for v in scratch.iter_mut() {
                *v = 0.0;
            }
            let mut touched: Vec<usize> = Vec::new();
            for term in &con.terms {
                term.gradient(&x, |a, d| {
                    if let Some(fa) = free_of[a] {
                        if scratch[fa] == 0.0 {
                            touched.push(fa);
                        }
                        scratch[fa] += d;
                    }
                });
            }
            touched.sort_unstable();
            touched.dedup();
            jrows[k].clear();
            for &fa in &touched {
                if scratch[fa] != 0.0 {
                    jrows[k].push((fa, scratch[fa]));
                }
            }
        }

        // Optimality error at mu = 0 and at the current mu.
        let mut jty = vec![0.0; nf];
        for (k, row) in jrows.iter().enumerate() {
            for &(fa, v) in row {
                jty[fa] += v * y[k];
            }
        }
        let mut dual_inf = 0.0f64;
        for (fa, &i) in free.iter().enumerate() {
            dual_inf = dual_inf.max((s_f * grad_f[i] + jty[fa] - zl[i] + zu[i]).abs());
        }
        let cviol = cvals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let mut compl0 = 0.0f64;
        let mut compl_mu = 0.0f64;
        for &i in &free {
            if lo[i].is_finite() {
                let prod = (x[i] - lo[i]) * zl[i];
                compl0 = compl0.max(prod.abs());
                compl_mu = compl_mu.max((prod - mu).abs());
            }
            if hi[i].is_finite() {
                let prod = (hi[i] - x[i]) * zu[i];
                compl0 = compl0.max(prod.abs());
                compl_mu = compl_mu.max((prod - mu).abs());
            }
        }
        let z_sum: f64 = free
            .iter()
            .map(|&i| zl[i].abs() + zu[i].abs())
            .sum();
        let y_sum: f64 = y.iter().map(|v| v.abs()).sum();
        let s_d = if m + n_bound_sides > 0 {
            (((y_sum + z_sum) / (m + n_bound_sides) as f64).max(100.0)) / 100.0
        } else {
            1.0
        };
        let s_c = if n_bound_sides > 0 {
            ((z_sum / n_bound_sides as f64).max(100.0)) / 100.0
        } else {
            1.0
        };
        let e0 = (dual_inf / s_d).max(cviol).max(compl0 / s_c);
        let e_mu = (dual_inf / s_d).max(cviol).max(compl_mu / s_c);
        if cfg.verbose {
            eprintln!(
                "iter {iter:3}  f {:+.8e}  err {e0:.3e}  viol {cviol:.3e}  mu {mu:.1e}",
                prog.objective.eval(&x)
            );
        }
        if e0 <= tol {
            status = SolverStatus::Optimal;
            iterations = iter;
            break;
        }
        while e_mu <= KAPPA_EPS * mu && mu > mu_min {
            mu = (KAPPA_MU_LIN * mu).min(mu.powf(1.5)).max(mu_min);
        }
        let tau = 0.99f64.max(1.0 - mu);

        // Assemble the KKT values (without regularization).
        base_values.iter_mut().for_each(|v| *v = 0.0);
        for &(a, b, c) in &prog.objective.quad {
            if let (Some(fa), Some(fb)) = (free_of[a], free_of[b]) {
                let v = if a == b { 2.0 * c } else { c };
                base_values[slot_of(fa, fb)] += s_f * v;
            }
        }
        for (k, con) in exp.cons.iter().enumerate() {
            for term in &con.terms {
                term.hessian(&x, |a, b, v| {
                    if let (Some(fa), Some(fb)) = (free_of[a], free_of[b]) {
                        base_values[slot_of(fa, fb)] += y[k] * v;
                    }
                });
            }
            for &(fa, v) in &jrows[k] {
                base_values[slot_of(nf + k, fa)] += v;
            }
        }
        for (fa, &i) in free.iter().enumerate() {
            let mut sigma = 0.0;
            if lo[i].is_finite() {
                sigma += zl[i] / (x[i] - lo[i]);
            }
            if hi[i].is_finite() {
                sigma += zu[i] / (hi[i] - x[i]);
            }
            base_values[free_diag_slots[fa]] += sigma;
        }

        // Right-hand side.
        let mut rhs = vec![0.0; dim];
        for (fa, &i) in free.iter().enumerate() {
            let mut g = s_f * grad_f[i] + jty[fa];
            if lo[i].is_finite() {
                g -= mu / (x[i] - lo[i]);
            }
            if hi[i].is_finite() {
                g += mu / (hi[i] - x[i]);
            }
            rhs[fa] = -g;
        }
        for k in 0..m {
            rhs[nf + k] = -cvals[k];
        }

        // Inertia-corrected factorization.
        let mut dw = 0.0f64;
        let mut sol = vec![0.0; dim];
        let mut solved = false;
        for _attempt in 0..60 {
            let vals = kkt.values_mut();
            vals.copy_from_slice(&base_values);
            for &s in &free_diag_slots {
                vals[s] += dw;
            }
            for &s in &con_diag_slots {
                vals[s] -= DELTA_C;
            }
            let ok = match factor.factor(&kkt) {
                Ok(()) => factor.inertia() == (nf, m),
                Err(_) => false,
            };
            if ok {
                factor.solve_refined(&kkt, &rhs, &mut sol);
                solved = true;
                break;
            }
            dw = if dw == 0.0 {
                if prev_dw == 0.0 {
                    1e-4
                } else {
                    (prev_dw / 3.0).max(1e-20)
                }
            } else {
                dw * 10.0
            };
            if dw > 1e40 {
                break;
            }
        }
        if !solved {
            status = SolverStatus::NumericWarning;
            iterations = iter;
            break;
        }
        if dw > 0.0 {
            prev_dw = dw;
        }

        // Recover bound-multiplier steps.
        let dx = &sol[..nf];
        let dy = &sol[nf..];
        let mut dzl = vec![0.0; n];
        let mut dzu = vec![0.0; n];
        for (fa, &i) in free.iter().enumerate() {
            if lo[i].is_finite() {
                let d = x[i] - lo[i];
                dzl[i] = mu / d - zl[i] - zl[i] / d * dx[fa];
            }
            if hi[i].is_finite() {
                let d = hi[i] - x[i];
                dzu[i] = mu / d - zu[i] + zu[i] / d * dx[fa];
            }
        }

        // Fraction-to-boundary limits.
        let mut alpha_pr = 1.0f64;
        for (fa, &i) in free.iter().enumerate() {
            let d = dx[fa];
            if d < 0.0 && lo[i].is_finite() {
                alpha_pr = alpha_pr.min(-tau * (x[i] - lo[i]) / d);
            }
            if d > 0.0 && hi[i].is_finite() {
                alpha_pr = alpha_pr.min(tau * (hi[i] - x[i]) / d);
            }
        }
        let mut alpha_z = 1.0f64;
        for &i in &free {
            if zl[i] > 0.0 && dzl[i] < 0.0 {
                alpha_z = alpha_z.min(-tau * zl[i] / dzl[i]);
            }
            if zu[i] > 0.0 && dzu[i] < 0.0 {
                alpha_z = alpha_z.min(-tau * zu[i] / dzu[i]);
            }
        }

        // Penalty weight from the updated multiplier estimate.
        let y_new_inf = y
            .iter()
            .zip(dy)
            .map(|(a, d)| (a + d).abs())
            .fold(0.0f64, f64::max);
        nu = nu.max(1.05 * y_new_inf).min(1e10);

        // l1 merit line search.
        let f0 = s_f * prog.objective.eval(&x) + mu * barrier(&x);
        let c1: f64 = cvals.iter().map(|v| v.abs()).sum();
        let phi0 = f0 + nu * c1;
        let mut dgrad = 0.0;
        for (fa, &i) in free.iter().enumerate() {
            let mut g = s_f * grad_f[i];
            if lo[i].is_finite() {
                g -= mu / (x[i] - lo[i]);
            }
            if hi[i].is_finite() {
                g += mu / (hi[i] - x[i]);
            }
            dgrad += g * dx[fa];
        }
        let mut descent = dgrad - nu * c1;
        if descent >= 0.0 {
            descent = -1e-12 * phi0.abs().max(1.0);
        }

        let mut alpha = alpha_pr;
        let mut accepted = false;
        let mut x_trial = x.clone();
        for _bt in 0..50 {
            for (fa, &i) in free.iter().enumerate() {
                x_trial[i] = x[i] + alpha * dx[fa];
            }
            let bar = barrier(&x_trial);
            if bar.is_finite() {
                let mut ctrial = vec![0.0; m];
                eval_cons(&x_trial, &mut ctrial);
                let phi = s_f * prog.objective.eval(&x_trial)
                    + mu * bar
                    + nu * ctrial.iter().map(|v| v.abs()).sum::<f64>();
                if phi <= phi0 + ARMIJO_C * alpha * descent {
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-13 {
                break;
            }
        }
        if !accepted {
            if cviol > (10.0 * tol).max(1e-9) {
                status = SolverStatus::RestorationFailure;
            } else {
                status = SolverStatus::NumericWarning;
            }
            iterations = iter;
            break;
        }

        // Accept.
        let step_inf = dx.iter().fold(0.0f64, |a, &v| a.max(v.abs())) * alpha;
        for (fa, &i) in free.iter().enumerate() {
            x[i] += alpha * dx[fa];
        }
        for k in 0..m {
            y[k] += alpha * dy[k];
        }
        for &i in &free {
            if lo[i].is_finite() {
                zl[i] += alpha_z * dzl[i];
                let center = mu / (x[i] - lo[i]);
                zl[i] = zl[i].clamp(center / KAPPA_SIGMA, center * KAPPA_SIGMA);
            }
            if hi[i].is_finite() {
                zu[i] += alpha_z * dzu[i];
                let center = mu / (hi[i] - x[i]);
                zu[i] = zu[i].clamp(center / KAPPA_SIGMA, center * KAPPA_SIGMA);
            }
        }

        // Stuck at an infeasible point: steps make no progress while the
        // constraints stay violated.
        let x_inf = x.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
        if step_inf <= 1e-11 * x_inf {
            small_steps += 1;
        } else {
            small_steps = 0;
        }
        if small_steps >= 5 {
            status = if cviol > (10.0 * tol).max(1e-9) {
                SolverStatus::RestorationFailure
            } else {
                SolverStatus::NumericWarning
            };
            iterations = iter;
            break;
        }
    }

    Ok(finish(status, &x, iterations))
}

/// Linear shrink factor of the barrier schedule.
const KAPPA_MU_LIN: f64 = 0.2;
