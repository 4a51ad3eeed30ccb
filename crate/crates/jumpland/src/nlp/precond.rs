//! Banded-plus-border Cholesky preconditioner for the inner Newton solves.
//!
//! The Gauss-Newton matrix rho J' J is nearly banded once its columns are
//! reordered (reverse Cuthill-McKee): only a handful of columns, such as
//! phase durations that every transcription row touches, are dense. Those
//! are pulled into a border and handled through a small Schur complement,
//! so applying the preconditioner is a banded solve plus a rank-border
//! correction.

/// Column ordering and band structure, computed once per solve from the
/// Jacobian sparsity pattern.
pub(crate) struct SparsityPlan {
    /// Dense columns handled via the Schur border, original indices.
    pub border: Vec<usize>,
    /// Permuted position for non-border columns; usize::MAX for border.
    perm: Vec<usize>,
    /// Inverse permutation: original index of each permuted position.
    inv_perm: Vec<usize>,
    bandwidth: usize,
    n_banded: usize,
}

impl SparsityPlan {
    /// `rows` lists the Jacobian support (column indices) of every
    /// constraint row. Columns whose degree exceeds `border_degree` go to
    /// the border.
    pub fn analyze(n: usize, rows: &[Vec<usize>], border_degree: usize) -> Self {
        let mut degree = vec![0usize; n];
        for r in rows {
            for &c in r {
                degree[c] += 1;
            }
        }
        let border: Vec<usize> = (0..n).filter(|&c| degree[c] > border_degree).collect();
        let is_border: Vec<bool> = {
            let mut b = vec![false; n];
            for &c in &border {
                b[c] = true;
            }
            b
        };

        // Adjacency among non-border columns: two columns couple when some
        // row supports both.
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for r in rows {
            for (i, &a) in r.iter().enumerate() {
                if is_border[a] {
                    continue;
                }
                for &b in &r[i + 1..] {
                    if is_border[b] || a == b {
                        continue;
                    }
                    adj[a].push(b);
                    adj[b].push(a);
                }
            }
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }

        let order = rcm_order(n, &adj, &is_border);
        let mut perm = vec![usize::MAX; n];
        for (pos, &c) in order.iter().enumerate() {
            perm[c] = pos;
        }
        let mut bandwidth = 0usize;
        for c in 0..n {
            if is_border[c] {
                continue;
            }
            for &d in &adj[c] {
                bandwidth = bandwidth.max(perm[c].abs_diff(perm[d]));
            }
        }
        let n_banded = n - border.len();
        Self { border, perm, inv_perm: order, bandwidth, n_banded }
    }

}

/// Reverse Cuthill-McKee over the non-border columns.
fn rcm_order(n: usize, adj: &[Vec<usize>], is_border: &[bool]) -> Vec<usize> {
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let degree = |c: usize| adj[c].len();
    loop {
        // Lowest-degree unvisited non-border node seeds the next component.
        let seed = (0..n)
            .filter(|&c| !visited[c] && !is_border[c])
            .min_by_key(|&c| degree(c));
        let Some(seed) = seed else { break };
        let mut queue = std::collections::VecDeque::new();
        visited[seed] = true;
        queue.push_back(seed);
        while let Some(c) = queue.pop_front() {
            order.push(c);
            let mut nbrs: Vec<usize> =
                adj[c].iter().copied().filter(|&d| !visited[d] && !is_border[d]).collect();
            nbrs.sort_by_key(|&d| degree(d));
            for d in nbrs {
                visited[d] = true;
                queue.push_back(d);
            }
        }
    }
    order.reverse();
    order
}

/// One factorization of the masked, damped Gauss-Newton matrix.
pub(crate) struct Factor<'a> {
    plan: &'a SparsityPlan,
    /// Lower band of the Cholesky factor, row-major, width bandwidth + 1;
    /// entry (i, i - j) holds L[i][j].
    band: Vec<f64>,
    /// B^-1 E' (n_banded x nb) for the border correction.
    binv_et: Vec<f64>,
    /// Dense Cholesky factor of the border Schur complement (nb x nb).
    schur_l: Vec<f64>,
    /// Border rows of the assembled matrix (nb x n_banded), kept for the
    /// Schur right-hand side.
    e_rows: Vec<f64>,
    nb: usize,
}

impl<'a> Factor<'a> {
    /// Assemble and factor sum_r w_r a_r a_r' + diag(extra) with masked
    /// variables replaced by identity rows. Returns None if the matrix is
    /// not numerically positive definite.
    pub fn compute(
        plan: &'a SparsityPlan,
        n: usize,
        triplets: &[(u32, u32, f64)],
        row_weight: &[f64],
        diag_extra: &[f64],
        free: &[bool],
    ) -> Option<Factor<'a>> {
        let bw = plan.bandwidth;
        let nb = plan.border.len();
        let m = plan.n_banded;
        let width = bw + 1;
        let mut band = vec![0.0; m * width];
        let mut e = vec![0.0; nb * m];
        let mut c_mat = vec![0.0; nb * nb];

        let mut border_pos = vec![usize::MAX; n];
        for (i, &c) in plan.border.iter().enumerate() {
            border_pos[c] = i;
        }

        // Group triplets by row and accumulate weighted outer products.
        let mut row_cols: Vec<u32> = Vec::new();
        let mut row_vals: Vec<f64> = Vec::new();
        let mut cur_row = u32::MAX;
        let mut flush = |cols: &[u32], vals: &[f64], w: f64| {
            if w == 0.0 {
                return;
            }
            for (ai, &a) in cols.iter().enumerate() {
                let (a, va) = (a as usize, vals[ai]);
                if !free[a] {
                    continue;
                }
                for (bi, &b) in cols.iter().enumerate() {
                    let (b, vb) = (b as usize, vals[bi]);
                    if !free[b] {
                        continue;
                    }
                    let contrib = w * va * vb;
                    match (border_pos[a], border_pos[b]) {
                        (usize::MAX, usize::MAX) => {
                            let (pa, pb) = (plan.perm[a], plan.perm[b]);
                            if pa >= pb {
                                band[pa * width + (pa - pb)] += contrib;
                            }
                        }
                        (usize::MAX, qb) => {
                            e[qb * m + plan.perm[a]] += contrib;
                        }
                        (qa, usize::MAX) => {
                            // Covered by the symmetric (a, b) visit.
                            let _ = qa;
                        }
                        (qa, qb) => {
                            if qa >= qb {
                                c_mat[qa * nb + qb] += contrib;
                            }
                        }
                    }
                }
            }
        };
        for &(row, col, val) in triplets {
            if row != cur_row {
                if cur_row != u32::MAX {
                    flush(&row_cols, &row_vals, row_weight[cur_row as usize]);
                }
                cur_row = row;
                row_cols.clear();
                row_vals.clear();
            }
            row_cols.push(col);
            row_vals.push(val);
        }
        if cur_row != u32::MAX {
            flush(&row_cols, &row_vals, row_weight[cur_row as usize]);
        }

        for c in 0..n {
            let extra = if free[c] { diag_extra[c] } else { 1.0 };
            match border_pos[c] {
                usize::MAX => band[plan.perm[c] * width] += extra,
                q => c_mat[q * nb + q] += extra,
            }
        }

        // In-place banded Cholesky.
        for j in 0..m {
            let lo = j.saturating_sub(bw);
            let mut d = band[j * width];
            for k in lo..j {
                let l = band[j * width + (j - k)];
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            band[j * width] = d;
            let hi = (j + bw + 1).min(m);
            for i in j + 1..hi {
                let mut s = if i - j <= bw { band[i * width + (i - j)] } else { 0.0 };
                let lo_i = i.saturating_sub(bw);
                for k in lo_i.max(lo)..j {
                    s -= band[i * width + (i - k)] * band[j * width + (j - k)];
                }
                band[i * width + (i - j)] = s / d;
            }
        }

        let mut factor = Factor {
            plan,
            band,
            binv_et: vec![0.0; m * nb],
            schur_l: vec![0.0; nb * nb],
            e_rows: Vec::new(),
            nb,
        };

        // Border correction: Z = B^-1 E', S = C - E Z.
        let mut col = vec![0.0; m];
        for q in 0..nb {
            col.copy_from_slice(&e[q * m..(q + 1) * m]);
            factor.banded_solve(&mut col);
            for i in 0..m {
                factor.binv_et[i * nb + q] = col[i];
            }
        }
        let mut s = vec![0.0; nb * nb];
        for qa in 0..nb {
            for qb in 0..=qa {
                let mut v = c_mat[qa * nb + qb];
                for i in 0..m {
                    v -= e[qa * m + i] * factor.binv_et[i * nb + qb];
                }
                s[qa * nb + qb] = v;
            }
        }
        // Dense Cholesky of the Schur complement.
        for j in 0..nb {
            let mut d = s[j * nb + j];
            for k in 0..j {
                d -= factor.schur_l[j * nb + k] * factor.schur_l[j * nb + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            factor.schur_l[j * nb + j] = d;
            for i in j + 1..nb {
                let mut v = s[i * nb + j];
                for k in 0..j {
                    v -= factor.schur_l[i * nb + k] * factor.schur_l[j * nb + k];
                }
                factor.schur_l[i * nb + j] = v / d;
            }
        }
        // Keep E for the Schur right-hand side.
        factor.e_rows = e;
        Some(factor)
    }

    /// In-place banded triangular solves: x <- B^-1 x.
    fn banded_solve(&self, x: &mut [f64]) {
        let bw = self.plan.bandwidth;
        let width = bw + 1;
        let m = self.plan.n_banded;
        for i in 0..m {
            let lo = i.saturating_sub(bw);
            let mut v = x[i];
            for k in lo..i {
                v -= self.band[i * width + (i - k)] * x[k];
            }
            x[i] = v / self.band[i * width];
        }
        for i in (0..m).rev() {
            let hi = (i + bw + 1).min(m);
            let mut v = x[i];
            for k in i + 1..hi {
                v -= self.band[k * width + (k - i)] * x[k];
            }
            x[i] = v / self.band[i * width];
        }
    }

    /// out = M^-1 r over the free variables (masked entries pass through
    /// the identity block).
    pub fn apply(&self, r: &[f64], out: &mut [f64]) {
        let m = self.plan.n_banded;
        let nb = self.nb;
        let mut r1 = vec![0.0; m];
        for (pos, &orig) in self.plan.inv_perm.iter().enumerate() {
            r1[pos] = r[orig];
        }
        let mut z1 = r1.clone();
        self.banded_solve(&mut z1);

        // Schur solve for the border block.
        let mut rhs = vec![0.0; nb];
        for q in 0..nb {
            let mut v = r[self.plan.border[q]];
            for i in 0..m {
                v -= self.e_rows[q * m + i] * z1[i];
            }
            rhs[q] = v;
        }
        for j in 0..nb {
            let mut v = rhs[j];
            for k in 0..j {
                v -= self.schur_l[j * nb + k] * rhs[k];
            }
            rhs[j] = v / self.schur_l[j * nb + j];
        }
        for j in (0..nb).rev() {
            let mut v = rhs[j];
            for k in j + 1..nb {
                v -= self.schur_l[k * nb + j] * rhs[k];
            }
            rhs[j] = v / self.schur_l[j * nb + j];
        }

        for i in 0..m {
            let mut v = z1[i];
            for q in 0..nb {
                v -= self.binv_et[i * nb + q] * rhs[q];
            }
            z1[i] = v;
        }
        for (pos, &orig) in self.plan.inv_perm.iter().enumerate() {
            out[orig] = z1[pos];
        }
        for (q, &orig) in self.plan.border.iter().enumerate() {
            out[orig] = rhs[q];
        }
    }
}
