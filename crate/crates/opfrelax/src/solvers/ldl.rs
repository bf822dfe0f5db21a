//! Sparse LDL^T factorization of symmetric quasi-definite matrices, with
//! reverse Cuthill-McKee ordering, up-looking numeric factorization over
//! the elimination tree, and iterative refinement against an unmodified
//! copy of the matrix.
//!
//! Both interior-point methods in this crate factor their KKT systems
//! here. The matrices they produce are made quasi-definite by static
//! regularization, so the factorization never pivots: the symbolic
//! analysis is done once and every iteration only refreshes values.
//! Everything is deterministic (ordering ties broken by index).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LdlError {
    #[error("zero pivot at column {0} during LDL^T factorization")]
    ZeroPivot(usize),
}

/// Symmetric matrix stored as its upper triangle (i <= j) in fixed
/// triplet structure. Values are rewritable; the pattern is not.
#[derive(Debug, Clone)]
pub struct SymmetricSparse {
    pub n: usize,
    entries: Vec<(usize, usize)>,
    values: Vec<f64>,
}

impl SymmetricSparse {
    /// Builds from triplets, merging duplicates by summation. Entries
    /// may be given in either triangle; they are mirrored to the upper.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut keyed: Vec<(usize, usize, f64)> = triplets
            .iter()
            .map(|&(i, j, v)| if i <= j { (i, j, v) } else { (j, i, v) })
            .collect();
        keyed.sort_by_key(|&(i, j, _)| (j, i));
        let mut entries = Vec::new();
        let mut values = Vec::new();
        for (i, j, v) in keyed {
            if let (Some(&(li, lj)), Some(last)) = (entries.last(), values.last_mut()) {
                if li == i && lj == j {
                    *last += v;
                    continue;
                }
            }
            entries.push((i, j));
            values.push(v);
        }
        SymmetricSparse { n, entries, values }
    }

    /// Builds from a curated entry list (upper triangle, unique keys)
    /// whose values will be rewritten in place between factorizations.
    pub fn from_parts(n: usize, entries: Vec<(usize, usize)>, values: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), values.len());
        debug_assert!(entries.iter().all(|&(i, j)| i <= j && j < n));
        SymmetricSparse { n, entries, values }
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// y = A x using the full symmetric matrix.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (k, &(i, j)) in self.entries.iter().enumerate() {
            let v = self.values[k];
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
    }
}

/// Reverse Cuthill-McKee ordering of the pattern graph. Deterministic:
/// component roots and BFS neighbors are taken in (degree, index) order.
fn rcm_order(n: usize, entries: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in entries {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(|l| l.len()).collect();

    let bfs_levels = |root: usize, seen: &mut [bool], order: &mut Vec<usize>| -> usize {
        let start = order.len();
        seen[root] = true;
        order.push(root);
        let mut level_start = start;
        let mut last = root;
        while level_start < order.len() {
            let level_end = order.len();
            for idx in level_start..level_end {
                let u = order[idx];
                let mut next: Vec<usize> =
                    adj[u].iter().copied().filter(|&v| !seen[v]).collect();
                next.sort_by_key(|&v| (degree[v], v));
                for v in next {
                    if !seen[v] {
                        seen[v] = true;
                        order.push(v);
                        last = v;
                    }
                }
            }
            level_start = level_end;
        }
        last
    };

    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    loop {
        let root = match (0..n).filter(|&v| !seen[v]).min_by_key(|&v| (degree[v], v)) {
            Some(r) => r,
            None => break,
        };
        // One extra BFS pass approximates a pseudo-peripheral root.
        let mut probe_seen = seen.clone();
        let mut probe_order = Vec::new();
        let far = bfs_levels(root, &mut probe_seen, &mut probe_order);
        bfs_levels(far, &mut seen, &mut order);
    }
    order.reverse();
    order
}

/// LDL^T factorization with fixed symbolic structure.
pub struct LdlFactor {
    n: usize,
    /// perm[k] = original index placed at position k.
    perm: Vec<usize>,
    /// Permuted upper-triangle CSC pattern.
    ap: Vec<usize>,
    ai: Vec<usize>,
    /// Slot in `ax` for each entry of the source matrix.
    slot: Vec<usize>,
    ax: Vec<f64>,
    parent: Vec<isize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl LdlFactor {
    /// Symbolic analysis of the pattern of `matrix`: ordering,
    /// elimination tree, and column counts. Call [`LdlFactor::factor`]
    /// afterwards with the live values.
    pub fn symbolic(matrix: &SymmetricSparse) -> Self {
        let n = matrix.n;
        let perm = rcm_order(n, matrix.entries());
        let mut iperm = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }

        // Permuted upper-triangle CSC with a slot map from source entries.
        let m = matrix.entries().len();
        let mut cols: Vec<(usize, usize, usize)> = Vec::with_capacity(m); // (col, row, src)
        for (src, &(i, j)) in matrix.entries().iter().enumerate() {
            let (pi, pj) = (iperm[i], iperm[j]);
            let (r, c) = if pi <= pj { (pi, pj) } else { (pj, pi) };
            cols.push((c, r, src));
        }
        cols.sort_unstable();
        let mut ap = vec![0usize; n + 1];
        let mut ai = vec![0usize; m];
        let mut slot = vec![0usize; m];
        for (k, &(c, r, src)) in cols.iter().enumerate() {
            ap[c + 1] += 1;
            ai[k] = r;
            slot[src] = k;
        }
        for c in 0..n {
            ap[c + 1] += ap[c];
        }

        // Elimination tree and column counts of L.
        let mut parent = vec![-1isize; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for p in ap[k]..ap[k + 1] {
                let mut i = ai[p];
                while i < k && flag[i] != k {
                    if parent[i] == -1 {
                        parent[i] = k as isize;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i] as usize;
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let total = lp[n];
        LdlFactor {
            n,
            perm,
            ap,
            ai,
            slot,
            ax: vec![0.0; m],
            parent,
            lp,
            li: vec![0usize; total],
            lx: vec![0.0; total],
            d: vec![0.0; n],
        }
    }

    /// Numeric factorization from the source matrix's current values
    /// (same structure as passed to [`LdlFactor::symbolic`]).
    pub fn factor(&mut self, matrix: &SymmetricSparse) -> Result<(), LdlError> {
        let n = self.n;
        self.ax.iter_mut().for_each(|v| *v = 0.0);
        for (src, &s) in self.slot.iter().enumerate() {
            self.ax[s] += matrix.values()[src];
        }
        let mut y = vec![0.0f64; n];
        let mut pattern = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for p in self.ap[k]..self.ap[k + 1] {
                let entry = self.ai[p];
                y[entry] += self.ax[p];
                let mut len = 0usize;
                let mut i = entry;
                while i < k && flag[i] != k {
                    stack[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = self.parent[i] as usize;
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = stack[len];
                }
            }
            let mut dk = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let lki = yi / self.d[i];
                for p in self.lp[i]..(self.lp[i] + lnz[i]) {
                    y[self.li[p]] -= self.lx[p] * yi;
                }
                let dest = self.lp[i] + lnz[i];
                self.li[dest] = k;
                self.lx[dest] = lki;
                lnz[i] += 1;
                dk -= lki * yi;
            }
            if dk == 0.0 {
                return Err(LdlError::ZeroPivot(self.perm[k]));
            }
            self.d[k] = dk;
        }
        Ok(())
    }

    /// (positive, negative) counts of the pivot signs; the inertia of
    /// the factored matrix.
    pub fn inertia(&self) -> (usize, usize) {
        let pos = self.d.iter().filter(|&&v| v > 0.0).count();
        (pos, self.n - pos)
    }

    /// Solves A x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut w = vec![0.0f64; n];
        for k in 0..n {
            w[k] = b[self.perm[k]];
        }
        for k in 0..n {
            let wk = w[k];
            for p in self.lp[k]..self.lp[k + 1] {
                w[self.li[p]] -= self.lx[p] * wk;
            }
        }
        for k in 0..n {
            w[k] /= self.d[k];
        }
        for k in (0..n).rev() {
            let mut wk = w[k];
            for p in self.lp[k]..self.lp[k + 1] {
                wk -= self.lx[p] * w[self.li[p]];
            }
            w[k] = wk;
        }
        for k in 0..n {
            b[self.perm[k]] = w[k];
        }
    }

    /// Solves `exact` x = b using this factorization of a nearby
    /// (regularized) matrix, with fixed-count iterative refinement.
    pub fn solve_refined(&self, exact: &SymmetricSparse, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        x.copy_from_slice(b);
        self.solve(x);
        let mut residual = vec![0.0f64; n];
        let mut correction = vec![0.0f64; n];
        for _ in 0..2 {
            exact.matvec(x, &mut residual);
            let mut worst = 0.0f64;
            for i in 0..n {
                residual[i] = b[i] - residual[i];
                worst = worst.max(residual[i].abs());
            }
            if worst < 1e-14 {
                break;
            }
            correction.copy_from_slice(&residual);
            self.solve(&mut correction);
            for i in 0..n {
                x[i] += correction[i];
            }
        }
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_solve_check(n: usize, triplets: &[(usize, usize, f64)], b: &[f64]) {
        let a = SymmetricSparse::from_triplets(n, triplets);
        let mut f = LdlFactor::symbolic(&a);
        f.factor(&a).unwrap();
        let mut x = b.to_vec();
        f.solve(&mut x);
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-10, "residual at {i}: {}", ax[i] - b[i]);
        }
    }

    #[test]
    fn factors_spd_tridiagonal() {
        let n = 12;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64) - 3.0).collect();
        dense_solve_check(n, &t, &b);
    }

    #[test]
    fn factors_quasi_definite_saddle_point() {
        // [ I  A' ; A  -delta I ] for a small random-ish A.
        let (nx, m) = (4, 3);
        let n = nx + m;
        let mut t = Vec::new();
        for i in 0..nx {
            t.push((i, i, 1.0));
        }
        for j in 0..m {
            t.push((nx + j, nx + j, -1e-8));
        }
        let a_entries = [(0usize, 0usize, 2.0), (0, 1, -1.0), (1, 2, 3.0), (2, 0, 0.5), (2, 3, 1.5)];
        for &(row, col, v) in &a_entries {
            t.push((nx + row, col, v));
        }
        let a = SymmetricSparse::from_triplets(n, &t);
        let mut f = LdlFactor::symbolic(&a);
        f.factor(&a).unwrap();
        assert_eq!(f.inertia(), (nx, m));
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let mut x = vec![0.0; n];
        f.solve_refined(&a, &b, &mut x);
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn merges_duplicate_triplets() {
        let a = SymmetricSparse::from_triplets(2, &[(0, 1, 1.0), (1, 0, 2.0), (0, 0, 1.0), (1, 1, 1.0)]);
        assert_eq!(a.entries().len(), 3);
        let mut y = vec![0.0; 2];
        a.matvec(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![4.0, 4.0]);
    }

    #[test]
    fn detects_indefinite_pivot_signs() {
        let t = [(0usize, 0usize, 1.0), (1, 1, -2.0), (2, 2, 3.0)];
        let a = SymmetricSparse::from_triplets(3, &t);
        let mut f = LdlFactor::symbolic(&a);
        f.factor(&a).unwrap();
        assert_eq!(f.inertia(), (2, 1));
    }
}
