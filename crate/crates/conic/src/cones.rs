//! Symmetric-cone algebra for the product of non-negative orthants and
//! second-order cones used by the interior-point method.

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kind {
    Lp,
    Soc,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Block {
    pub kind: Kind,
    pub start: usize,
    pub dim: usize,
}

impl Block {
    fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.dim
    }
}

/// Barrier degree: one per orthant coordinate, one per second-order cone.
pub(crate) fn degree(blocks: &[Block]) -> usize {
    blocks.iter().map(|b| if b.kind == Kind::Lp { b.dim } else { 1 }).sum()
}

pub(crate) fn add_identity(blocks: &[Block], v: &mut [f64], scale: f64) {
    for b in blocks {
        match b.kind {
            Kind::Lp => v[b.range()].iter_mut().for_each(|x| *x += scale),
            Kind::Soc => v[b.start] += scale,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest `t` such that `v + t·e` lies in the cone (negative when `v` is interior).
pub(crate) fn max_violation(blocks: &[Block], v: &[f64]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for b in blocks {
        let s = &v[b.range()];
        let t = match b.kind {
            Kind::Lp => s.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(-x)),
            Kind::Soc => norm(&s[1..]) - s[0],
        };
        worst = worst.max(t);
    }
    worst
}

/// Moves `v` into the interior: unchanged when already interior, otherwise
/// shifted by `(1 + violation)·e`.
pub(crate) fn shift_into_interior(blocks: &[Block], v: &mut [f64]) {
    let t = max_violation(blocks, v);
    if t >= -1e-8 {
        add_identity(blocks, v, 1.0 + t.max(0.0));
    }
}

/// Jordan product `u ∘ v`.
pub(crate) fn jordan(blocks: &[Block], u: &[f64], v: &[f64], out: &mut [f64]) {
    for b in blocks {
        let r = b.range();
        let (u, v, o) = (&u[r.clone()], &v[r.clone()], &mut out[r]);
        match b.kind {
            Kind::Lp => {
                for i in 0..u.len() {
                    o[i] = u[i] * v[i];
                }
            }
            Kind::Soc => {
                o[0] = dot(u, v);
                for i in 1..u.len() {
                    o[i] = u[0] * v[i] + v[0] * u[i];
                }
            }
        }
    }
}

/// Solves `λ ∘ x = d` for `x`.
pub(crate) fn jordan_div(blocks: &[Block], lambda: &[f64], d: &[f64], out: &mut [f64]) {
    for b in blocks {
        let r = b.range();
        let (l, d, o) = (&lambda[r.clone()], &d[r.clone()], &mut out[r]);
        match b.kind {
            Kind::Lp => {
                for i in 0..l.len() {
                    o[i] = d[i] / l[i];
                }
            }
            Kind::Soc => {
                let det = soc_det(l);
                let x0 = (l[0] * d[0] - dot(&l[1..], &d[1..])) / det;
                o[0] = x0;
                for i in 1..l.len() {
                    o[i] = (d[i] - x0 * l[i]) / l[0];
                }
            }
        }
    }
}

/// `u0² − ‖u1‖²` evaluated as a product to limit cancellation.
fn soc_det(u: &[f64]) -> f64 {
    let t = norm(&u[1..]);
    (u[0] - t) * (u[0] + t)
}

/// Nesterov-Todd scaling `W` with `W z = W⁻¹ s = λ`.
#[derive(Debug, Clone)]
pub(crate) enum Scaling {
    Lp { w: Vec<f64> },
    Soc { eta: f64, w: Vec<f64> },
}

#[derive(Debug, Clone)]
pub(crate) struct NtScaling {
    pub parts: Vec<Scaling>,
}

impl NtScaling {
    /// Returns `None` when `s` or `z` is not strictly interior.
    pub(crate) fn compute(blocks: &[Block], s: &[f64], z: &[f64]) -> Option<Self> {
        let mut parts = Vec::with_capacity(blocks.len());
        for b in blocks {
            let (s, z) = (&s[b.range()], &z[b.range()]);
            match b.kind {
                Kind::Lp => {
                    if s.iter().chain(z).any(|&x| !(x > 0.0)) {
                        return None;
                    }
                    parts.push(Scaling::Lp { w: s.iter().zip(z).map(|(a, c)| (a / c).sqrt()).collect() });
                }
                Kind::Soc => {
                    let (sd, zd) = (soc_det(s), soc_det(z));
                    if !(sd > 0.0 && zd > 0.0 && s[0] > 0.0 && z[0] > 0.0) {
                        return None;
                    }
                    let (sn, zn) = (sd.sqrt(), zd.sqrt());
                    let sbar: Vec<f64> = s.iter().map(|x| x / sn).collect();
                    let zbar: Vec<f64> = z.iter().map(|x| x / zn).collect();
                    let gamma = ((1.0 + dot(&sbar, &zbar)) / 2.0).sqrt();
                    let mut w = vec![0.0; s.len()];
                    w[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
                    for i in 1..s.len() {
                        w[i] = (sbar[i] - zbar[i]) / (2.0 * gamma);
                    }
                    // Renormalise w0 so that w0² − ‖w1‖² = 1 holds to rounding.
                    w[0] = (1.0 + dot(&w[1..], &w[1..])).sqrt();
                    parts.push(Scaling::Soc { eta: (sn / zn).sqrt(), w });
                }
            }
        }
        Some(Self { parts })
    }

    /// out = W v (inverse = false) or W⁻¹ v (inverse = true).
    pub(crate) fn apply(&self, blocks: &[Block], v: &[f64], out: &mut [f64], inverse: bool) {
        for (b, sc) in blocks.iter().zip(&self.parts) {
            let r = b.range();
            let (v, o) = (&v[r.clone()], &mut out[r]);
            match sc {
                Scaling::Lp { w } => {
                    for i in 0..v.len() {
                        o[i] = if inverse { v[i] / w[i] } else { v[i] * w[i] };
                    }
                }
                Scaling::Soc { eta, w } => {
                    // W = η [w0 w1ᵀ; w1 I + w1w1ᵀ/(1+w0)], W⁻¹ = η⁻¹ J W J / η².
                    let sgn = if inverse { -1.0 } else { 1.0 };
                    let scale = if inverse { 1.0 / eta } else { *eta };
                    let w1v1 = dot(&w[1..], &v[1..]);
                    o[0] = scale * (w[0] * v[0] + sgn * w1v1);
                    let c = sgn * v[0] + w1v1 / (1.0 + w[0]);
                    for i in 1..v.len() {
                        o[i] = scale * (v[i] + c * w[i]);
                    }
                }
            }
        }
    }

    /// Upper-triangle entries of `WᵀW = W²` per block, in cone-row coordinates,
    /// as (row, col, value) with row ≤ col. Ordering is fixed for a fixed block layout.
    pub(crate) fn w_squared_upper(&self, blocks: &[Block], out: &mut Vec<f64>) {
        out.clear();
        for (b, sc) in blocks.iter().zip(&self.parts) {
            match sc {
                Scaling::Lp { w } => out.extend(w.iter().map(|x| x * x)),
                Scaling::Soc { eta, w } => {
                    // W² = η² (2wwᵀ − J)
                    let e2 = eta * eta;
                    for c in 0..b.dim {
                        for r in 0..=c {
                            let mut v = 2.0 * w[r] * w[c];
                            if r == c {
                                v += if r == 0 { -1.0 } else { 1.0 };
                            }
                            out.push(e2 * v);
                        }
                    }
                }
            }
        }
    }
}

/// Pattern matching [`NtScaling::w_squared_upper`]: (row, col) offsets within the cone rows.
pub(crate) fn w_squared_pattern(blocks: &[Block]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for b in blocks {
        match b.kind {
            Kind::Lp => out.extend(b.range().map(|i| (i, i))),
            Kind::Soc => {
                for c in 0..b.dim {
                    for r in 0..=c {
                        out.push((b.start + r, b.start + c));
                    }
                }
            }
        }
    }
    out
}

/// Largest `α ≥ 0` (capped at `cap`) with `u + α d` inside the cone.
pub(crate) fn max_step(blocks: &[Block], u: &[f64], d: &[f64], cap: f64) -> f64 {
    let mut alpha = cap;
    for b in blocks {
        let (u, d) = (&u[b.range()], &d[b.range()]);
        match b.kind {
            Kind::Lp => {
                for i in 0..u.len() {
                    if d[i] < 0.0 {
                        alpha = alpha.min(-u[i] / d[i]);
                    }
                }
            }
            Kind::Soc => alpha = alpha.min(soc_step(u, d)),
        }
    }
    alpha.max(0.0)
}

fn soc_step(u: &[f64], d: &[f64]) -> f64 {
    // f(α) = (u0 + α d0)² − ‖u1 + α d1‖² = a α² + 2 b α + c, c > 0.
    let a = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let b = u[0] * d[0] - dot(&u[1..], &d[1..]);
    let c = soc_det(u).max(0.0);
    let mut best = f64::INFINITY;
    let scale = a.abs().max(b.abs()).max(c.abs()).max(f64::MIN_POSITIVE);
    if a.abs() <= 1e-14 * scale {
        if b < 0.0 {
            best = -c / (2.0 * b);
        }
    } else {
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -(b + b.signum() * sq);
            for r in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
                if r > 0.0 && r < best {
                    best = r;
                }
            }
        }
    }
    // Crossing through the apex onto the lower nappe.
    if d[0] < 0.0 {
        best = best.min(-u[0] / d[0]);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks() -> Vec<Block> {
        vec![
            Block { kind: Kind::Lp, start: 0, dim: 2 },
            Block { kind: Kind::Soc, start: 2, dim: 3 },
        ]
    }

    #[test]
    fn nt_scaling_maps_z_and_s_to_same_point() {
        let bl = blocks();
        let s = [1.0, 2.0, 3.0, 1.0, -0.5];
        let z = [0.5, 4.0, 2.0, -0.3, 1.1];
        let w = NtScaling::compute(&bl, &s, &z).unwrap();
        let mut wz = [0.0; 5];
        let mut wis = [0.0; 5];
        w.apply(&bl, &z, &mut wz, false);
        w.apply(&bl, &s, &mut wis, true);
        for i in 0..5 {
            assert!((wz[i] - wis[i]).abs() < 1e-12, "{i}: {} vs {}", wz[i], wis[i]);
        }
        // W⁻¹ W = I
        let v = [0.3, -1.0, 0.7, 2.0, -0.4];
        let mut t = [0.0; 5];
        let mut back = [0.0; 5];
        w.apply(&bl, &v, &mut t, false);
        w.apply(&bl, &t, &mut back, true);
        for i in 0..5 {
            assert!((back[i] - v[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn w_squared_matches_double_application() {
        let bl = blocks();
        let s = [1.0, 2.0, 3.0, 1.0, -0.5];
        let z = [0.5, 4.0, 2.0, -0.3, 1.1];
        let w = NtScaling::compute(&bl, &s, &z).unwrap();
        let mut vals = Vec::new();
        w.w_squared_upper(&bl, &mut vals);
        let pat = w_squared_pattern(&bl);
        let mut dense = [[0.0; 5]; 5];
        for (&(r, c), &v) in pat.iter().zip(&vals) {
            dense[r][c] = v;
            dense[c][r] = v;
        }
        let v = [0.3, -1.0, 0.7, 2.0, -0.4];
        let mut t = [0.0; 5];
        let mut ww = [0.0; 5];
        w.apply(&bl, &v, &mut t, false);
        w.apply(&bl, &t, &mut ww, false);
        for i in 0..5 {
            let dv: f64 = (0..5).map(|j| dense[i][j] * v[j]).sum();
            assert!((dv - ww[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn jordan_div_inverts_product() {
        let bl = blocks();
        let l = [1.0, 2.0, 3.0, 1.0, -0.5];
        let x = [0.2, -0.4, 1.0, -2.0, 0.25];
        let mut d = [0.0; 5];
        jordan(&bl, &l, &x, &mut d);
        let mut back = [0.0; 5];
        jordan_div(&bl, &l, &d, &mut back);
        for i in 0..5 {
            assert!((back[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn soc_step_hits_boundary() {
        let bl = [Block { kind: Kind::Soc, start: 0, dim: 2 }];
        let u = [1.0, 0.0];
        let d = [0.0, 1.0];
        let a = max_step(&bl, &u, &d, f64::INFINITY);
        assert!((a - 1.0).abs() < 1e-12);
        assert_eq!(max_step(&bl, &u, &[1.0, 0.5], 7.0), 7.0);
        let a = max_step(&bl, &u, &[-1.0, 0.0], 10.0);
        assert!((a - 1.0).abs() < 1e-12);
    }
}
