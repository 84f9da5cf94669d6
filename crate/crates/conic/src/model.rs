//! Incremental builder over [`MixedConicProgram`].
//!
//! Cone members may be arbitrary affine expressions. A member that is a single
//! variable with unit coefficient, no constant and not yet used by any cone is
//! placed in the cone directly; everything else goes through a fresh free
//! variable tied to the expression by an equality row. Cones therefore never
//! share variables.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::program::{Cone, ConicProgram, LinearRow, MixedConicProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// `Σ coef·var + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(Var, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn term(v: Var, coef: f64) -> Self {
        Self { terms: vec![(v, coef)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: Var, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
        self
    }

    pub fn sum<I: IntoIterator<Item = (Var, f64)>>(items: I) -> Self {
        let mut e = Self::new();
        for (v, c) in items {
            e.add_term(v, c);
        }
        e
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>()
    }

    fn row(&self, rhs: f64) -> LinearRow {
        let row = LinearRow::new(self.terms.iter().map(|&(v, c)| (v.0, c)).collect(), rhs - self.constant);
        LinearRow::new(row.canonical_terms(), row.rhs)
    }
}

impl From<Var> for LinExpr {
    fn from(v: Var) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl<T: Into<LinExpr>> Add<T> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: T) -> LinExpr {
        self += rhs;
        self
    }
}

impl<T: Into<LinExpr>> AddAssign<T> for LinExpr {
    fn add_assign(&mut self, rhs: T) {
        let rhs = rhs.into();
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl<T: Into<LinExpr>> Sub<T> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: T) -> LinExpr {
        self -= rhs;
        self
    }
}

impl<T: Into<LinExpr>> SubAssign<T> for LinExpr {
    fn sub_assign(&mut self, rhs: T) {
        let rhs = rhs.into();
        self.terms.extend(rhs.terms.into_iter().map(|(v, c)| (v, -c)));
        self.constant -= rhs.constant;
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, k: f64) -> LinExpr {
        self.terms.iter_mut().for_each(|t| t.1 *= k);
        self.constant *= k;
        self
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

impl Mul<f64> for Var {
    type Output = LinExpr;
    fn mul(self, k: f64) -> LinExpr {
        LinExpr::term(self, k)
    }
}

impl Mul<Var> for f64 {
    type Output = LinExpr;
    fn mul(self, v: Var) -> LinExpr {
        LinExpr::term(v, self)
    }
}

impl<T: Into<LinExpr>> Add<T> for Var {
    type Output = LinExpr;
    fn add(self, rhs: T) -> LinExpr {
        LinExpr::from(self) + rhs
    }
}

impl<T: Into<LinExpr>> Sub<T> for Var {
    type Output = LinExpr;
    fn sub(self, rhs: T) -> LinExpr {
        LinExpr::from(self) - rhs
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    program: ConicProgram,
    binaries: Vec<usize>,
    in_cone: Vec<bool>,
}

impl Default for Model {
    fn default() -> Self {
        Self::new()
    }
}

impl Model {
    pub fn new() -> Self {
        Self { program: ConicProgram::new(0), binaries: Vec::new(), in_cone: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.program.num_vars
    }

    pub fn add_var(&mut self, lower: f64, upper: f64) -> Var {
        let p = &mut self.program;
        p.num_vars += 1;
        p.objective.push(0.0);
        p.lower.push(lower);
        p.upper.push(upper);
        self.in_cone.push(false);
        Var(p.num_vars - 1)
    }

    pub fn add_free(&mut self) -> Var {
        self.add_var(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_binary(&mut self) -> Var {
        let v = self.add_var(0.0, 1.0);
        self.binaries.push(v.0);
        v
    }

    pub fn set_bounds(&mut self, v: Var, lower: f64, upper: f64) {
        self.program.lower[v.0] = lower;
        self.program.upper[v.0] = upper;
    }

    pub fn fix(&mut self, v: Var, value: f64) {
        self.set_bounds(v, value, value);
    }

    pub fn set_objective(&mut self, expr: impl Into<LinExpr>) {
        let e = expr.into();
        let p = &mut self.program;
        p.objective.iter_mut().for_each(|c| *c = 0.0);
        for (v, c) in e.terms {
            p.objective[v.0] += c;
        }
        p.objective_offset = e.constant;
    }

    /// `expr = rhs`
    pub fn add_eq(&mut self, expr: impl Into<LinExpr>, rhs: f64) {
        let row = expr.into().row(rhs);
        self.program.equalities.push(row);
    }

    /// `expr ≤ rhs`
    pub fn add_le(&mut self, expr: impl Into<LinExpr>, rhs: f64) {
        let row = expr.into().row(rhs);
        self.program.inequalities.push(row);
    }

    /// `expr ≥ rhs`
    pub fn add_ge(&mut self, expr: impl Into<LinExpr>, rhs: f64) {
        self.add_le(-expr.into(), -rhs);
    }

    fn member(&mut self, e: LinExpr) -> usize {
        if e.constant == 0.0 && e.terms.len() == 1 && e.terms[0].1 == 1.0 && !self.in_cone[e.terms[0].0 .0] {
            let j = e.terms[0].0 .0;
            self.in_cone[j] = true;
            return j;
        }
        let u = self.add_free();
        self.add_eq(LinExpr::from(u) - e, 0.0);
        self.in_cone[u.0] = true;
        u.0
    }

    /// `‖tail‖₂ ≤ head`
    pub fn add_soc(&mut self, head: impl Into<LinExpr>, tail: Vec<LinExpr>) {
        let h = self.member(head.into());
        let t = tail.into_iter().map(|e| self.member(e)).collect();
        self.program.cones.push(Cone::Soc { head: h, tail: t });
    }

    /// `‖tail‖₂² ≤ a·b` with `a, b ≥ 0`, stored as `‖(2·tail, a − b)‖ ≤ a + b`.
    pub fn add_rotated_soc(&mut self, a: impl Into<LinExpr>, b: impl Into<LinExpr>, tail: Vec<LinExpr>) {
        let (a, b) = (a.into(), b.into());
        let mut members: Vec<LinExpr> = tail.into_iter().map(|e| e * 2.0).collect();
        members.push(a.clone() - b.clone());
        self.add_soc(a + b, members);
    }

    /// Every member non-negative, as one orthant cone.
    pub fn add_nonneg(&mut self, members: Vec<LinExpr>) {
        let idx = members.into_iter().map(|e| self.member(e)).collect();
        self.program.cones.push(Cone::NonNeg(idx));
    }

    pub fn program(&self) -> &ConicProgram {
        &self.program
    }

    pub fn binaries(&self) -> &[usize] {
        &self.binaries
    }

    pub fn to_mixed(&self) -> MixedConicProgram {
        MixedConicProgram { program: self.program.clone(), binaries: self.binaries.clone() }
    }

    pub fn into_mixed(self) -> MixedConicProgram {
        MixedConicProgram { program: self.program, binaries: self.binaries }
    }
}
