//! Line-oriented text format for [`MixedConicProgram`].
//!
//! ```text
//! conic v1
//! vars <n>
//! obj <offset>
//! c <j> <coef>
//! bound <j> <lower> <upper>
//! eq <rhs> <k> <j> <coef> ...
//! le <rhs> <k> <j> <coef> ...
//! nonneg <k> <j> ...
//! soc <head> <k> <j> ...
//! bin <j>
//! end
//! ```
//!
//! Floats use Rust's shortest round-trip representation, so `parse(dump(p)) == p`.
//! Omitted objective coefficients are zero; omitted bounds are free.

use std::fmt::Write as _;

use thiserror::Error;

use crate::program::{Cone, ConicProgram, LinearRow, MixedConicProgram, ProgramError};

#[derive(Debug, Error)]
pub enum TextError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `end` line")]
    Truncated,
    #[error(transparent)]
    Invalid(#[from] ProgramError),
}

pub fn dump(p: &MixedConicProgram) -> String {
    let q = &p.program;
    let mut s = String::new();
    let _ = writeln!(s, "conic v1");
    let _ = writeln!(s, "vars {}", q.num_vars);
    let _ = writeln!(s, "obj {:?}", q.objective_offset);
    for (j, &c) in q.objective.iter().enumerate() {
        if c != 0.0 || c.is_sign_negative() {
            let _ = writeln!(s, "c {j} {c:?}");
        }
    }
    for j in 0..q.num_vars {
        let (lo, hi) = (q.lower[j], q.upper[j]);
        if lo != f64::NEG_INFINITY || hi != f64::INFINITY {
            let _ = writeln!(s, "bound {j} {lo:?} {hi:?}");
        }
    }
    for (tag, rows) in [("eq", &q.equalities), ("le", &q.inequalities)] {
        for row in rows {
            let _ = write!(s, "{tag} {:?} {}", row.rhs, row.terms.len());
            for &(j, a) in &row.terms {
                let _ = write!(s, " {j} {a:?}");
            }
            s.push('\n');
        }
    }
    for cone in &q.cones {
        match cone {
            Cone::NonNeg(idx) => {
                let _ = write!(s, "nonneg {}", idx.len());
                for j in idx {
                    let _ = write!(s, " {j}");
                }
            }
            Cone::Soc { head, tail } => {
                let _ = write!(s, "soc {head} {}", tail.len());
                for j in tail {
                    let _ = write!(s, " {j}");
                }
            }
        }
        s.push('\n');
    }
    for j in &p.binaries {
        let _ = writeln!(s, "bin {j}");
    }
    s.push_str("end\n");
    s
}

struct Cursor<'a> {
    line: usize,
    toks: std::str::SplitWhitespace<'a>,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> TextError {
        TextError::Syntax { line: self.line, msg: msg.into() }
    }

    fn next(&mut self) -> Result<&'a str, TextError> {
        self.toks.next().ok_or_else(|| self.err("unexpected end of line"))
    }

    fn usize(&mut self) -> Result<usize, TextError> {
        let t = self.next()?;
        t.parse().map_err(|_| self.err(format!("bad integer `{t}`")))
    }

    fn f64(&mut self) -> Result<f64, TextError> {
        let t = self.next()?;
        t.parse().map_err(|_| self.err(format!("bad number `{t}`")))
    }

    fn done(&mut self) -> Result<(), TextError> {
        match self.toks.next() {
            None => Ok(()),
            Some(t) => Err(self.err(format!("trailing token `{t}`"))),
        }
    }
}

pub fn parse(text: &str) -> Result<MixedConicProgram, TextError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let mut header = |want: &str| -> Result<Cursor<'_>, TextError> {
        let (line, l) = lines.next().ok_or(TextError::Truncated)?;
        let mut c = Cursor { line, toks: l.split_whitespace() };
        let tag = c.next()?;
        if tag != want {
            return Err(c.err(format!("expected `{want}`, found `{tag}`")));
        }
        Ok(c)
    };
    let mut c = header("conic")?;
    if c.next()? != "v1" {
        return Err(c.err("unsupported version"));
    }
    c.done()?;
    let mut c = header("vars")?;
    let n = c.usize()?;
    c.done()?;
    let mut c = header("obj")?;
    let mut prog = ConicProgram::new(n);
    prog.objective_offset = c.f64()?;
    c.done()?;
    let mut binaries = Vec::new();
    let mut ended = false;
    for (line, l) in lines {
        if ended {
            return Err(TextError::Syntax { line, msg: "content after `end`".into() });
        }
        let mut c = Cursor { line, toks: l.split_whitespace() };
        let tag = c.next()?;
        let check = |c: &Cursor, j: usize| if j < n { Ok(j) } else { Err(c.err(format!("index {j} out of range"))) };
        match tag {
            "c" => {
                let j = c.usize()?;
                let j = check(&c, j)?;
                prog.objective[j] = c.f64()?;
            }
            "bound" => {
                let j = c.usize()?;
                let j = check(&c, j)?;
                prog.lower[j] = c.f64()?;
                prog.upper[j] = c.f64()?;
            }
            "eq" | "le" => {
                let rhs = c.f64()?;
                let k = c.usize()?;
                let mut terms = Vec::with_capacity(k);
                for _ in 0..k {
                    let j = c.usize()?;
                    let j = check(&c, j)?;
                    terms.push((j, c.f64()?));
                }
                let row = LinearRow::new(terms, rhs);
                if tag == "eq" {
                    prog.equalities.push(row);
                } else {
                    prog.inequalities.push(row);
                }
            }
            "nonneg" => {
                let k = c.usize()?;
                let mut idx = Vec::with_capacity(k);
                for _ in 0..k {
                    let j = c.usize()?;
                    idx.push(check(&c, j)?);
                }
                prog.cones.push(Cone::NonNeg(idx));
            }
            "soc" => {
                let h = c.usize()?;
                let head = check(&c, h)?;
                let k = c.usize()?;
                let mut tail = Vec::with_capacity(k);
                for _ in 0..k {
                    let j = c.usize()?;
                    tail.push(check(&c, j)?);
                }
                prog.cones.push(Cone::Soc { head, tail });
            }
            "bin" => {
                let j = c.usize()?;
                binaries.push(check(&c, j)?);
            }
            "end" => ended = true,
            other => return Err(c.err(format!("unknown record `{other}`"))),
        }
        c.done()?;
    }
    if !ended {
        return Err(TextError::Truncated);
    }
    let p = MixedConicProgram { program: prog, binaries };
    p.validate()?;
    Ok(p)
}
