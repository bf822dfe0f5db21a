//! Rank-one certification of lifted solutions and voltage recovery.
//!
//! A lifted point is globally exact when the Hermitian matrix
//! W = V V^H it claims to represent actually has rank one. Rank is
//! tested on the real embedding `[[X, -Y], [Y, X]]` of W = X + iY,
//! whose spectrum repeats each eigenvalue of W twice: the matrix has
//! rank one exactly when the third-largest embedded eigenvalue
//! magnitude vanishes, so the reported defect is
//! `|lambda_3| / |lambda_1|`.
//!
//! Recovery takes square roots of the diagonal for magnitudes and walks
//! a spanning forest of the off-diagonal support for angles, using
//! arg W_ij = theta_i - theta_j along each edge with the first vertex
//! of every component pinned to zero (the global phase is not
//! observable). A final elementwise comparison of W against v v^H
//! guards against inconsistent cycles that a tree walk alone would
//! miss.
//!
//! [`lift_to_voltages`] applies the same tree walk to a per-branch
//! relaxation solution, where only branch-pair products exist and each
//! product carries the tap magnitude and shift of its branch.

use crate::formulations::{BranchCoeffs, ConeVariant, LiftedProgram};
use crate::network::Network;
use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Rank1Error {
    #[error("matrix is {0}x{1}, not square")]
    NotSquare(usize, usize),
    #[error("matrix is not Hermitian: skew defect {0:.3e}")]
    NotHermitian(f64),
    #[error("matrix is not rank one: relative defect {0:.3e} exceeds {1:.3e}")]
    NotRankOne(f64, f64),
}

/// Real symmetric embedding `[[X, -Y], [Y, X]]` of a complex matrix.
pub fn real_embedding(w: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = w.nrows();
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = w[(i, j)].re;
            m[(n + i, n + j)] = w[(i, j)].re;
            m[(i, n + j)] = -w[(i, j)].im;
            m[(n + i, j)] = w[(i, j)].im;
        }
    }
    m
}

/// Relative rank-one defect `|lambda_3| / |lambda_1|` of a Hermitian
/// matrix, computed on the real embedding. Zero matrices report 0.
pub fn rank1_defect(w: &DMatrix<Complex64>) -> f64 {
    let m = real_embedding(w);
    let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().map(|e| e.abs()).collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if eig[0] <= f64::MIN_POSITIVE {
        return 0.0;
    }
    // Entries 0 and 1 are the duplicated leading eigenvalue.
    eig[2] / eig[0]
}

/// Certifies rank one and recovers a voltage vector with the first
/// entry of each connected component at angle zero. `ratio_tol` bounds
/// the acceptable relative defect (1e-6 is tight enough to separate
/// solver noise from genuinely inexact relaxations).
pub fn recover_rank1(w: &DMatrix<Complex64>, ratio_tol: f64) -> Result<Vec<Complex64>, Rank1Error> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Rank1Error::NotSquare(n, w.ncols()));
    }
    let scale = (0..n).map(|i| w[(i, i)].norm()).fold(1e-300, f64::max);
    let mut skew = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            skew = skew.max((w[(i, j)] - w[(j, i)].conj()).norm());
        }
    }
    if skew > 1e-8 * scale {
        return Err(Rank1Error::NotHermitian(skew));
    }
    let defect = rank1_defect(w);
    if defect > ratio_tol {
        return Err(Rank1Error::NotRankOne(defect, ratio_tol));
    }

    let mag: Vec<f64> = (0..n).map(|i| w[(i, i)].re.max(0.0).sqrt()).collect();
    let mut theta = vec![0.0f64; n];
    let mut seen = vec![false; n];
    let support = 1e-12 * scale;
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if !seen[j] && w[(i, j)].norm() > support {
                    theta[j] = theta[i] - w[(i, j)].arg();
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    let v: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(mag[i], theta[i])).collect();

    // Tree angles ignore cycle consistency; verify elementwise.
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((w[(i, j)] - v[i] * v[j].conj()).norm());
        }
    }
    let allowed = scale * ratio_tol.sqrt().max(1e-12) * 10.0;
    if worst > allowed {
        return Err(Rank1Error::NotRankOne(worst / scale, allowed / scale));
    }
    Ok(v)
}

/// Extracts per-bus magnitude and angle estimates from a lifted
/// relaxation point: magnitudes from the W diagonal, angles from a
/// spanning-tree walk over the branch products (tap and shift
/// unwound). Exact when the relaxation is tight; otherwise a heuristic
/// starting point whose quality the caller must judge by residuals.
pub fn lift_to_voltages(net: &Network, lifted: &LiftedProgram, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let index = net.bus_index();
    let n = net.buses.len();
    let vm: Vec<f64> = (0..n).map(|i| x[lifted.vars.bus_w[i]].max(0.0).sqrt()).collect();

    // Adjacency with the full bus-pair product W_ft = T * W_b per branch.
    let mut adj: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n];
    for (bk, &b) in lifted.vars.branch_index.iter().enumerate() {
        let br = &net.branches[b];
        let Ok(k) = BranchCoeffs::new(br) else { continue };
        let f = index[&br.from];
        let t = index[&br.to];
        let wb = match variant_of(lifted) {
            ConeVariant::VoltageProduct => {
                Complex64::new(x[lifted.vars.re_w[bk]], x[lifted.vars.im_w[bk]])
            }
            ConeVariant::Current => {
                let wpff = x[lifted.vars.bus_w[f]] / k.tau2;
                let pf = x[lifted.vars.flow_pf[bk]];
                let qf = x[lifted.vars.flow_qf[bk]];
                Complex64::new(
                    (1.0 - k.c * k.x) * wpff - k.r * pf - k.x * qf,
                    -k.c * k.r * wpff + k.x * pf - k.r * qf,
                )
            }
        };
        let wft = Complex64::from_polar(k.tau, k.shift) * wb;
        adj[f].push((t, wft));
        adj[t].push((f, wft.conj()));
    }

    let mut va = vec![0.0f64; n];
    let mut seen = vec![false; n];
    let start = net.reference_bus().unwrap_or(0);
    for root_candidate in std::iter::once(start).chain(0..n) {
        if seen[root_candidate] {
            continue;
        }
        seen[root_candidate] = true;
        let mut queue = std::collections::VecDeque::from([root_candidate]);
        while let Some(i) = queue.pop_front() {
            for &(j, wij) in &adj[i] {
                if !seen[j] && wij.norm() > 1e-12 {
                    va[j] = va[i] - wij.arg();
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    (vm, va)
}

fn variant_of(lifted: &LiftedProgram) -> ConeVariant {
    if lifted.vars.re_w.len() == lifted.vars.branch_index.len() && !lifted.vars.branch_index.is_empty() {
        ConeVariant::VoltageProduct
    } else if !lifted.vars.current.is_empty() {
        ConeVariant::Current
    } else {
        ConeVariant::VoltageProduct
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outer(v: &[Complex64]) -> DMatrix<Complex64> {
        let n = v.len();
        DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj())
    }

    #[test]
    fn recovers_random_voltage_profile_up_to_gauge() {
        let v = vec![
            Complex64::from_polar(1.03, 0.00),
            Complex64::from_polar(0.97, -0.21),
            Complex64::from_polar(1.06, 0.14),
            Complex64::from_polar(0.92, -0.02),
        ];
        let w = outer(&v);
        let got = recover_rank1(&w, 1e-6).unwrap();
        // Gauge: component root (index 0) has angle zero; v[0] already does.
        for (a, b) in v.iter().zip(&got) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_the_identity_matrix() {
        let w = DMatrix::from_diagonal_element(4, 4, Complex64::new(1.0, 0.0));
        assert!(matches!(recover_rank1(&w, 1e-6), Err(Rank1Error::NotRankOne(..))));
        assert!((rank1_defect(&w) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian_input() {
        let mut w = outer(&[Complex64::new(1.0, 0.0), Complex64::new(0.9, 0.1)]);
        w[(0, 1)] += Complex64::new(0.0, 1e-3);
        assert!(matches!(recover_rank1(&w, 1e-6), Err(Rank1Error::NotHermitian(_))));
    }

    #[test]
    fn defect_is_tiny_on_perturbed_rank_one() {
        let v = [Complex64::new(1.0, 0.2), Complex64::new(0.8, -0.3), Complex64::new(1.1, 0.0)];
        let mut w = outer(&v);
        for i in 0..3 {
            w[(i, i)] += Complex64::new(1e-12, 0.0);
        }
        assert!(rank1_defect(&w) < 1e-11);
    }
}
