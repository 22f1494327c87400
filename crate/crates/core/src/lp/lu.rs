//! Sparse LU factorization of simplex bases with product-form updates.
//!
//! The factorization is left-looking with threshold partial pivoting. Columns
//! are processed sparsest first and, among numerically acceptable pivots, the
//! row with the fewest nonzeros in the basis is preferred. After a basis change
//! the factors are not touched; an eta column is appended instead and the
//! caller refactorizes periodically.

/// Pivots smaller than this (relative to the column max) are rejected.
const PIVOT_THRESHOLD: f64 = 0.1;
/// Absolute size under which a column is treated as linearly dependent.
const SINGULAR_TOL: f64 = 1e-11;

/// A sparse column in (row, value) form.
pub(crate) type SparseCol = [(usize, f64)];

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    /// Off-pivot entries of the FTRAN'd entering column.
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LuFactors {
    m: usize,
    /// step -> original row chosen as pivot
    piv_row: Vec<usize>,
    /// step -> basis position of the column factored at that step
    step_col: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
    etas: Vec<Eta>,
}

/// Basis positions whose columns were dependent, and rows left without a pivot.
#[derive(Debug, Clone)]
pub(crate) struct Singularity {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

impl LuFactors {
    /// Factorize the `m x m` matrix whose columns are `cols[pos]`.
    pub(crate) fn factorize<'a, F>(m: usize, col: F) -> Result<LuFactors, Singularity>
    where
        F: Fn(usize) -> &'a SparseCol,
    {
        let mut row_count = vec![0usize; m];
        let mut order: Vec<(usize, usize)> = (0..m)
            .map(|p| {
                let c = col(p);
                for &(i, _) in c {
                    row_count[i] += 1;
                }
                (c.len(), p)
            })
            .collect();
        order.sort_unstable();

        let mut lu = LuFactors {
            m,
            piv_row: Vec::with_capacity(m),
            step_col: Vec::with_capacity(m),
            l_start: vec![0],
            u_start: vec![0],
            u_diag: Vec::with_capacity(m),
            ..Default::default()
        };
        let mut step_of_row = vec![usize::MAX; m];
        let mut work = vec![0.0f64; m];
        let mut pattern: Vec<usize> = Vec::new();
        let mut in_pattern = vec![false; m];
        let mut dependent = Vec::new();

        for &(_, pos) in &order {
            pattern.clear();
            for &(i, v) in col(pos) {
                work[i] += v;
                if !in_pattern[i] {
                    in_pattern[i] = true;
                    pattern.push(i);
                }
            }
            // Apply previous L columns in step order.
            let steps = lu.piv_row.len();
            for j in 0..steps {
                let r = lu.piv_row[j];
                let v = work[r];
                if v == 0.0 {
                    continue;
                }
                for k in lu.l_start[j]..lu.l_start[j + 1] {
                    let i = lu.l_idx[k];
                    work[i] -= lu.l_val[k] * v;
                    if !in_pattern[i] {
                        in_pattern[i] = true;
                        pattern.push(i);
                    }
                }
            }
            // Pick the pivot among rows not yet pivoted.
            let mut max_abs = 0.0f64;
            for &i in &pattern {
                if step_of_row[i] == usize::MAX {
                    max_abs = max_abs.max(work[i].abs());
                }
            }
            if max_abs <= SINGULAR_TOL {
                dependent.push(pos);
                for &i in &pattern {
                    work[i] = 0.0;
                    in_pattern[i] = false;
                }
                continue;
            }
            let mut best = usize::MAX;
            let mut best_key = (usize::MAX, 0.0f64);
            for &i in &pattern {
                if step_of_row[i] != usize::MAX {
                    continue;
                }
                let a = work[i].abs();
                if a < PIVOT_THRESHOLD * max_abs {
                    continue;
                }
                let key = (row_count[i], a);
                if key.0 < best_key.0
                    || (key.0 == best_key.0 && (key.1 > best_key.1 || (key.1 == best_key.1 && i < best)))
                {
                    best_key = key;
                    best = i;
                }
            }
            let pivot = work[best];
            let step = lu.piv_row.len();
            // U column: entries of already pivoted rows.
            let mut ucol: Vec<(usize, f64)> = Vec::new();
            for &i in &pattern {
                let s = step_of_row[i];
                if s != usize::MAX && work[i] != 0.0 {
                    ucol.push((s, work[i]));
                }
            }
            ucol.sort_unstable_by_key(|e| e.0);
            for (s, v) in ucol {
                lu.u_idx.push(s);
                lu.u_val.push(v);
            }
            lu.u_start.push(lu.u_idx.len());
            lu.u_diag.push(pivot);
            for &i in &pattern {
                if i != best && step_of_row[i] == usize::MAX && work[i] != 0.0 {
                    lu.l_idx.push(i);
                    lu.l_val.push(work[i] / pivot);
                }
            }
            lu.l_start.push(lu.l_idx.len());
            step_of_row[best] = step;
            lu.piv_row.push(best);
            lu.step_col.push(pos);
            for &i in &pattern {
                work[i] = 0.0;
                in_pattern[i] = false;
            }
        }

        if !dependent.is_empty() {
            let rows = (0..m).filter(|&i| step_of_row[i] == usize::MAX).collect();
            return Err(Singularity { positions: dependent, rows });
        }
        Ok(lu)
    }

    pub(crate) fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Solve `B x = rhs` in place. `rhs` is indexed by row on entry and by
    /// basis position on exit.
    pub(crate) fn ftran(&self, rhs: &mut [f64], scratch: &mut [f64]) {
        let m = self.m;
        // L solve in original row space.
        for j in 0..m {
            let v = rhs[self.piv_row[j]];
            if v == 0.0 {
                continue;
            }
            for k in self.l_start[j]..self.l_start[j + 1] {
                rhs[self.l_idx[k]] -= self.l_val[k] * v;
            }
        }
        // U back substitution in step space.
        for (k, w) in scratch.iter_mut().enumerate().take(m) {
            *w = rhs[self.piv_row[k]];
        }
        for k in (0..m).rev() {
            let z = scratch[k] / self.u_diag[k];
            scratch[k] = z;
            if z == 0.0 {
                continue;
            }
            for t in self.u_start[k]..self.u_start[k + 1] {
                scratch[self.u_idx[t]] -= self.u_val[t] * z;
            }
        }
        for k in 0..m {
            rhs[self.step_col[k]] = scratch[k];
        }
        for eta in &self.etas {
            let v = rhs[eta.pos] / eta.pivot;
            rhs[eta.pos] = v;
            if v != 0.0 {
                for &(i, a) in &eta.entries {
                    rhs[i] -= a * v;
                }
            }
        }
    }

    /// Solve `B^T y = rhs` in place. `rhs` is indexed by basis position on
    /// entry and by row on exit.
    pub(crate) fn btran(&self, rhs: &mut [f64], scratch: &mut [f64]) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut s = rhs[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * rhs[i];
            }
            rhs[eta.pos] = s / eta.pivot;
        }
        // U^T forward solve in step space.
        for k in 0..m {
            let mut s = rhs[self.step_col[k]];
            for t in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[t] * scratch[self.u_idx[t]];
            }
            scratch[k] = s / self.u_diag[k];
        }
        // L^T backward solve, results land on original rows.
        for j in (0..m).rev() {
            let mut s = scratch[j];
            for k in self.l_start[j]..self.l_start[j + 1] {
                s -= self.l_val[k] * rhs[self.l_idx[k]];
            }
            rhs[self.piv_row[j]] = s;
        }
    }

    /// Record the replacement of the column at `pos` by a column whose FTRAN
    /// image is `alpha` (indexed by basis position).
    pub(crate) fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha.iter().enumerate().filter(|&(i, &a)| i != pos && a != 0.0).map(|(i, &a)| (i, a)).collect();
        self.etas.push(Eta { pos, pivot: alpha[pos], entries });
    }
}
