use super::minimum_degree;

const NONE: usize = usize::MAX;

/// Sparse LDLᵀ for symmetric quasi-definite matrices.
///
/// The pattern is fixed at construction (ordering, elimination tree and column
/// counts); [`LdlFactor::factor`] can then be called repeatedly with new values.
/// Pivots whose sign disagrees with the expected inertia are replaced by
/// `sign·dyn_reg`, which keeps the factorization alive on nearly singular
/// systems; callers recover accuracy with iterative refinement.
#[derive(Debug, Clone)]
pub(crate) struct LdlFactor {
    n: usize,
    /// perm[new] = old
    perm: Vec<usize>,
    /// Upper-triangular permuted matrix, CSC.
    ap: Vec<usize>,
    ai: Vec<usize>,
    ax: Vec<f64>,
    /// For each input entry, its slot in `ax`.
    slot: Vec<usize>,
    signs: Vec<f64>,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    pub(crate) dyn_eps: f64,
    pub(crate) dyn_reg: f64,
    pub(crate) regularized: usize,
}

impl LdlFactor {
    /// `entries` are (row, col) positions of the upper triangle (row ≤ col) in
    /// original indexing; every diagonal must be present. `signs[i]` is +1 or -1,
    /// the expected sign of pivot `i`.
    pub(crate) fn new(n: usize, entries: &[(usize, usize)], signs: &[f64]) -> Self {
        let offdiag: Vec<(usize, usize)> = entries.iter().copied().filter(|&(i, j)| i != j).collect();
        let perm = minimum_degree(n, &offdiag);
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // Permuted positions, upper triangle.
        let mapped: Vec<(usize, usize)> = entries
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (iperm[i], iperm[j]);
                if a <= b { (a, b) } else { (b, a) }
            })
            .collect();
        let mut order: Vec<usize> = (0..mapped.len()).collect();
        order.sort_by_key(|&k| (mapped[k].1, mapped[k].0));

        let mut ap = vec![0usize; n + 1];
        let mut ai = Vec::with_capacity(mapped.len());
        let mut slot = vec![0usize; mapped.len()];
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c) = mapped[k];
            if last != Some((r, c)) {
                ai.push(r);
                ap[c + 1] += 1;
                last = Some((r, c));
            }
            slot[k] = ai.len() - 1;
        }
        for c in 0..n {
            ap[c + 1] += ap[c];
        }
        let nnz = ai.len();

        // Elimination tree and column counts of L.
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut flag = vec![NONE; n];
        for j in 0..n {
            flag[j] = j;
            for p in ap[j]..ap[j + 1] {
                let mut i = ai[p];
                while flag[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    flag[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let total = lp[n];
        let psigns = perm.iter().map(|&old| signs[old]).collect();

        Self {
            n,
            perm,
            ap,
            ai,
            ax: vec![0.0; nnz],
            slot,
            signs: psigns,
            etree,
            lp,
            li: vec![0; total],
            lx: vec![0.0; total],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
            dyn_eps: 1e-13,
            dyn_reg: 1e-7,
            regularized: 0,
        }
    }

    /// Numeric factorization; `values[k]` belongs to `entries[k]` passed to `new`.
    /// Repeated entries are summed.
    pub(crate) fn factor(&mut self, values: &[f64]) -> Result<(), f64> {
        self.ax.iter_mut().for_each(|v| *v = 0.0);
        for (k, &v) in values.iter().enumerate() {
            self.ax[self.slot[k]] += v;
        }
        let n = self.n;
        let mut y = vec![0.0; n];
        let mut marked = vec![false; n];
        let mut yidx: Vec<usize> = Vec::with_capacity(n);
        let mut buf: Vec<usize> = Vec::with_capacity(n);
        let mut next = self.lp[..n].to_vec();
        self.regularized = 0;

        for k in 0..n {
            yidx.clear();
            let mut dk = 0.0;
            for p in self.ap[k]..self.ap[k + 1] {
                let b = self.ai[p];
                if b == k {
                    dk = self.ax[p];
                    continue;
                }
                y[b] = self.ax[p];
                if marked[b] {
                    continue;
                }
                marked[b] = true;
                buf.clear();
                buf.push(b);
                let mut nx = self.etree[b];
                while nx != NONE && nx < k {
                    if marked[nx] {
                        break;
                    }
                    marked[nx] = true;
                    buf.push(nx);
                    nx = self.etree[nx];
                }
                while let Some(v) = buf.pop() {
                    yidx.push(v);
                }
            }
            for &c in yidx.iter().rev() {
                let yc = y[c];
                let end = next[c];
                for q in self.lp[c]..end {
                    y[self.li[q]] -= self.lx[q] * yc;
                }
                self.li[end] = k;
                let l = yc * self.dinv[c];
                self.lx[end] = l;
                dk -= yc * l;
                next[c] += 1;
                y[c] = 0.0;
                marked[c] = false;
            }
            if !dk.is_finite() {
                return Err(dk);
            }
            if self.signs[k] * dk <= self.dyn_eps {
                dk = self.signs[k] * self.dyn_reg;
                self.regularized += 1;
            }
            self.d[k] = dk;
            self.dinv[k] = 1.0 / dk;
        }
        Ok(())
    }

    /// Solves in place; `b` is in original indexing.
    pub(crate) fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let xi = x[i];
            for q in self.lp[i]..self.lp[i + 1] {
                x[self.li[q]] -= self.lx[q] * xi;
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for q in self.lp[i]..self.lp[i + 1] {
                s -= self.lx[q] * x[self.li[q]];
            }
            x[i] = s;
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = x[new];
        }
    }

    #[cfg(test)]
    pub(crate) fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }
}
