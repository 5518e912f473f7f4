//! Scalar expressions over named variables.
//!
//! Every function in a game instance (leader objectives, the shared coupling
//! term, the potential, follower map components and feasible-set bounds) is
//! an [`Expr`]. Expressions are parsed from text, evaluated against a
//! [`VarEnv`] or, on hot paths, compiled against a fixed variable layout.

mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

pub use parser::parse_expression;

/// Default relative step for central differences.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function '{name}' at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("function '{name}' at offset {offset} takes {expected} argument(s), found {found}")]
    Arity {
        name: String,
        expected: &'static str,
        found: usize,
        offset: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownFunction { offset, .. }
            | ParseError::Arity { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable '{0}'")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Log,
    Exp,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NaryOp {
    Max,
    Min,
}

/// Expression tree. `V` is the variable representation: names for parsed
/// trees, slot indices inside [`Compiled`].
#[derive(Debug, Clone, PartialEq)]
pub enum Expr<T = f64, V = String> {
    Const(T),
    Var(V),
    Neg(Box<Expr<T, V>>),
    Unary(UnaryOp, Box<Expr<T, V>>),
    Binary(BinaryOp, Box<Expr<T, V>>, Box<Expr<T, V>>),
    Nary(NaryOp, Vec<Expr<T, V>>),
}

/// Variable bindings. Lookups of unbound names are errors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarEnv<T = f64> {
    values: BTreeMap<String, T>,
}

impl<T: Scalar> VarEnv<T> {
    pub fn new() -> Self {
        Self {
            values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: impl Into<String>, value: T) -> Self {
        self.values.insert(name.into(), value);
        self
    }

    pub fn set(&mut self, name: impl Into<String>, value: T) {
        self.values.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Result<T, EvalError> {
        self.values
            .get(name)
            .copied()
            .ok_or_else(|| EvalError::Unbound(name.to_string()))
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
    {
        Self {
            values: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }
}

impl<T: Scalar> Expr<T> {
    pub fn constant(v: T) -> Self {
        Expr::Const(v)
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    /// Names of every variable referenced in the tree.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(a) | Expr::Unary(_, a) => a.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Nary(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// True if the tree contains a nonsmooth operator (max, min, abs).
    pub fn has_kinks(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Unary(UnaryOp::Abs, _) | Expr::Nary(..) => true,
            Expr::Neg(a) | Expr::Unary(_, a) => a.has_kinks(),
            Expr::Binary(_, a, b) => a.has_kinks() || b.has_kinks(),
        }
    }

    pub fn evaluate(&self, env: &VarEnv<T>) -> Result<T, EvalError> {
        eval_tree(self, &|name: &String| env.get(name))
    }

    /// Binds variable names to positions in `layout`.
    pub fn compile(&self, layout: &[String]) -> Result<Compiled<T>, EvalError> {
        let slots: BTreeMap<&str, usize> = layout
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        Ok(Compiled {
            root: self.bind(&slots)?,
        })
    }

    fn bind(&self, slots: &BTreeMap<&str, usize>) -> Result<Expr<T, usize>, EvalError> {
        Ok(match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) => Expr::Var(
                *slots
                    .get(v.as_str())
                    .ok_or_else(|| EvalError::Unbound(v.clone()))?,
            ),
            Expr::Neg(a) => Expr::Neg(Box::new(a.bind(slots)?)),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.bind(slots)?)),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.bind(slots)?), Box::new(b.bind(slots)?))
            }
            Expr::Nary(op, args) => Expr::Nary(
                *op,
                args.iter()
                    .map(|a| a.bind(slots))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }
}

/// Expression with variables resolved to slot indices.
#[derive(Debug, Clone)]
pub struct Compiled<T = f64> {
    root: Expr<T, usize>,
}

impl<T: Scalar> Compiled<T> {
    pub fn eval(&self, vals: &[T]) -> Result<T, EvalError> {
        eval_tree(&self.root, &|&i: &usize| Ok(vals[i]))
    }

    /// Evaluates with the layout split into two consecutive blocks.
    pub fn eval2(&self, head: &[T], tail: &[T]) -> Result<T, EvalError> {
        let n = head.len();
        eval_tree(&self.root, &|&i: &usize| {
            Ok(if i < n { head[i] } else { tail[i - n] })
        })
    }
}

fn eval_tree<T, V, F>(e: &Expr<T, V>, lookup: &F) -> Result<T, EvalError>
where
    T: Scalar,
    F: Fn(&V) -> Result<T, EvalError>,
{
    let out = match e {
        Expr::Const(c) => *c,
        Expr::Var(v) => lookup(v)?,
        Expr::Neg(a) => -eval_tree(a, lookup)?,
        Expr::Unary(op, a) => {
            let v = eval_tree(a, lookup)?;
            match op {
                UnaryOp::Log => {
                    if v <= T::zero() {
                        return Err(EvalError::Domain(format!("log of nonpositive value {v}")));
                    }
                    v.ln()
                }
                UnaryOp::Exp => v.exp(),
                UnaryOp::Abs => v.abs(),
            }
        }
        Expr::Binary(op, a, b) => {
            let l = eval_tree(a, lookup)?;
            let r = eval_tree(b, lookup)?;
            match op {
                BinaryOp::Add => l + r,
                BinaryOp::Sub => l - r,
                BinaryOp::Mul => l * r,
                BinaryOp::Div => {
                    if r == T::zero() {
                        return Err(EvalError::Domain("division by zero".into()));
                    }
                    l / r
                }
                BinaryOp::Pow => power(l, r)?,
            }
        }
        Expr::Nary(op, args) => {
            let mut acc = eval_tree(&args[0], lookup)?;
            for a in &args[1..] {
                let v = eval_tree(a, lookup)?;
                acc = match op {
                    NaryOp::Max => acc.max(v),
                    NaryOp::Min => acc.min(v),
                };
            }
            acc
        }
    };
    if out.is_finite() {
        Ok(out)
    } else {
        Err(EvalError::Domain(format!("non-finite result {out}")))
    }
}

/// Integer exponents use repeated multiplication; other exponents require a
/// positive base and go through `exp(y ln x)`.
fn power<T: Scalar>(base: T, exponent: T) -> Result<T, EvalError> {
    let is_int = exponent.fract() == T::zero() && exponent.abs() <= T::lit(i32::MAX as f64);
    if is_int {
        let n = exponent.abs().to_u32().expect("checked integer exponent");
        let mut acc = T::one();
        let mut b = base;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * b;
            }
            b = b * b;
            k >>= 1;
        }
        if exponent < T::zero() {
            if acc == T::zero() {
                return Err(EvalError::Domain(
                    "division by zero in negative power".into(),
                ));
            }
            acc = T::one() / acc;
        }
        return Ok(acc);
    }
    if base <= T::zero() {
        return Err(EvalError::Domain(format!(
            "noninteger power {exponent} of nonpositive base {base}"
        )));
    }
    Ok((exponent * base.ln()).exp())
}

/// Central-difference gradient with relative step `step·max(1,|v|)`.
///
/// At kinks of max/min the quotient averages the two one-sided slopes, so
/// results near nonsmooth points are approximate.
pub fn fd_gradient<T: Scalar>(
    e: &Expr<T>,
    env: &VarEnv<T>,
    vars: &[&str],
    step: T,
) -> Result<Vec<T>, EvalError> {
    let mut work = env.clone();
    vars.iter()
        .map(|&name| {
            let v = env.get(name)?;
            let h = step * T::one().max(v.abs());
            work.set(name, v + h);
            let up = e.evaluate(&work)?;
            work.set(name, v - h);
            let down = e.evaluate(&work)?;
            work.set(name, v);
            Ok((up - down) / (h + h))
        })
        .collect()
}

/// Central-difference partial derivative of a slice-evaluated function.
pub(crate) fn fd_partial<T, F>(f: &F, point: &[T], k: usize, step: T) -> Result<T, EvalError>
where
    T: Scalar,
    F: Fn(&[T]) -> Result<T, EvalError> + ?Sized,
{
    let mut p = point.to_vec();
    let h = step * T::one().max(point[k].abs());
    p[k] = point[k] + h;
    let up = f(&p)?;
    p[k] = point[k] - h;
    let down = f(&p)?;
    Ok((up - down) / (h + h))
}

/// Central-difference mixed second partial `∂²f/∂x_a∂x_b`, `a != b`.
pub(crate) fn fd_mixed_partial<T, F>(
    f: &F,
    point: &[T],
    a: usize,
    b: usize,
    step: T,
) -> Result<T, EvalError>
where
    T: Scalar,
    F: Fn(&[T]) -> Result<T, EvalError> + ?Sized,
{
    let ha = step * T::one().max(point[a].abs());
    let hb = step * T::one().max(point[b].abs());
    let mut p = point.to_vec();
    let mut at = |da: T, db: T| {
        p[a] = point[a] + da;
        p[b] = point[b] + db;
        f(&p)
    };
    let pp = at(ha, hb)?;
    let pm = at(ha, -hb)?;
    let mp = at(-ha, hb)?;
    let mm = at(-ha, -hb)?;
    Ok((pp - pm - mp + mm) / (T::lit(4.0) * ha * hb))
}

// Printing uses the grammar's precedence levels so output reparses to an
// equivalent tree: 1 = sum, 2 = product, 3 = factor, 4 = atom.
impl<T: Scalar> Expr<T> {
    fn level(&self) -> u8 {
        match self {
            Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
            Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
            Expr::Binary(BinaryOp::Pow, ..) => 3,
            Expr::Const(c) if *c < T::zero() || c.is_sign_negative() => 3,
            _ => 4,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_level: u8) -> fmt::Result {
        if self.level() < min_level {
            write!(f, "(")?;
            self.write_bare(f)?;
            write!(f, ")")
        } else {
            self.write_bare(f)
        }
    }

    fn write_bare(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.write_at(f, 4)
            }
            Expr::Unary(op, a) => {
                let name = match op {
                    UnaryOp::Log => "log",
                    UnaryOp::Exp => "exp",
                    UnaryOp::Abs => "abs",
                };
                write!(f, "{name}({a})")
            }
            Expr::Binary(op, a, b) => {
                let (sym, lhs, rhs) = match op {
                    BinaryOp::Add => (" + ", 1, 2),
                    BinaryOp::Sub => (" - ", 1, 2),
                    BinaryOp::Mul => ("*", 2, 3),
                    BinaryOp::Div => ("/", 2, 3),
                    BinaryOp::Pow => ("^", 4, 3),
                };
                a.write_at(f, lhs)?;
                write!(f, "{sym}")?;
                b.write_at(f, rhs)
            }
            Expr::Nary(op, args) => {
                let name = match op {
                    NaryOp::Max => "max",
                    NaryOp::Min => "min",
                };
                write!(f, "{name}(")?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl<T: Scalar> fmt::Display for Expr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_bare(f)
    }
}

impl<T: Scalar> std::str::FromStr for Expr<T> {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expression(s)
    }
}

#[cfg(test)]
mod tests;
