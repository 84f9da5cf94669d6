use std::collections::BTreeSet;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProgramError {
    #[error("objective has {got} entries, expected {expected}")]
    ObjectiveLength { expected: usize, got: usize },
    #[error("bounds have {got} entries, expected {expected}")]
    BoundsLength { expected: usize, got: usize },
    #[error("variable index {index} out of range (num_vars = {num_vars})")]
    IndexOutOfRange { index: usize, num_vars: usize },
    #[error("variable {0} appears in more than one cone")]
    ConeOverlap(usize),
    #[error("variable {index} has lower bound {lower} above upper bound {upper}")]
    InvertedBounds { index: usize, lower: f64, upper: f64 },
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("binary variable {index} must have bounds within [0, 1], got [{lower}, {upper}]")]
    BinaryBounds { index: usize, lower: f64, upper: f64 },
    #[error("empty cone")]
    EmptyCone,
}

/// Sparse linear row `Σ coef·x[idx]` paired with a right-hand side.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { terms, rhs }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Merges repeated indices and drops exact zeros.
    pub(crate) fn canonical_terms(&self) -> Vec<(usize, f64)> {
        let mut t = self.terms.clone();
        t.sort_by_key(|&(j, _)| j);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
        for (j, a) in t {
            match out.last_mut() {
                Some((k, b)) if *k == j => *b += a,
                _ => out.push((j, a)),
            }
        }
        out.retain(|&(_, a)| a != 0.0);
        out
    }
}

/// A cone over variable indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Cone {
    /// Every listed variable is non-negative.
    NonNeg(Vec<usize>),
    /// `‖x[tail]‖₂ ≤ x[head]`.
    Soc { head: usize, tail: Vec<usize> },
}

impl Cone {
    pub fn indices(&self) -> Vec<usize> {
        match self {
            Cone::NonNeg(v) => v.clone(),
            Cone::Soc { head, tail } => {
                let mut v = Vec::with_capacity(tail.len() + 1);
                v.push(*head);
                v.extend_from_slice(tail);
                v
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Cone::NonNeg(v) => v.len(),
            Cone::Soc { tail, .. } => tail.len() + 1,
        }
    }
}

/// `min cᵀx + offset` subject to equalities, `<=` rows, bounds and cones.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    pub equalities: Vec<LinearRow>,
    /// Rows read as `terms·x ≤ rhs`.
    pub inequalities: Vec<LinearRow>,
    pub cones: Vec<Cone>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ConicProgram {
    /// A program with `num_vars` free variables, zero objective and no constraints.
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            objective_offset: 0.0,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            cones: Vec::new(),
            lower: vec![f64::NEG_INFINITY; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.num_vars;
        if self.objective.len() != n {
            return Err(ProgramError::ObjectiveLength { expected: n, got: self.objective.len() });
        }
        if self.lower.len() != n || self.upper.len() != n {
            let got = if self.lower.len() != n { self.lower.len() } else { self.upper.len() };
            return Err(ProgramError::BoundsLength { expected: n, got });
        }
        if self.objective.iter().any(|c| !c.is_finite()) || !self.objective_offset.is_finite() {
            return Err(ProgramError::NonFinite("objective"));
        }
        for (rows, what) in [(&self.equalities, "equalities"), (&self.inequalities, "inequalities")] {
            for row in rows {
                if !row.rhs.is_finite() {
                    return Err(ProgramError::NonFinite(what));
                }
                for &(j, a) in &row.terms {
                    if j >= n {
                        return Err(ProgramError::IndexOutOfRange { index: j, num_vars: n });
                    }
                    if !a.is_finite() {
                        return Err(ProgramError::NonFinite(what));
                    }
                }
            }
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(ProgramError::InvertedBounds { index: j, lower: lo, upper: hi });
            }
        }
        let mut seen = BTreeSet::new();
        for cone in &self.cones {
            if cone.dim() == 0 {
                return Err(ProgramError::EmptyCone);
            }
            for j in cone.indices() {
                if j >= n {
                    return Err(ProgramError::IndexOutOfRange { index: j, num_vars: n });
                }
                if !seen.insert(j) {
                    return Err(ProgramError::ConeOverlap(j));
                }
            }
        }
        Ok(())
    }
}

/// A [`ConicProgram`] whose listed variables must take values in `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedConicProgram {
    pub program: ConicProgram,
    pub binaries: Vec<usize>,
}

impl MixedConicProgram {
    pub fn validate(&self) -> Result<(), ProgramError> {
        self.program.validate()?;
        for &j in &self.binaries {
            if j >= self.program.num_vars {
                return Err(ProgramError::IndexOutOfRange { index: j, num_vars: self.program.num_vars });
            }
            let (lo, hi) = (self.program.lower[j], self.program.upper[j]);
            if lo < 0.0 || hi > 1.0 {
                return Err(ProgramError::BinaryBounds { index: j, lower: lo, upper: hi });
            }
        }
        Ok(())
    }
}
