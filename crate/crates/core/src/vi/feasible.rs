use std::collections::BTreeSet;

use crate::expr::Expr;
use crate::model::{Func, ModelError};
use crate::scalar::Scalar;

use super::ViError;

/// Unvalidated description of K(x). `None` bounds are infinite.
#[derive(Debug, Clone)]
pub enum FeasibleSetDef<T = f64> {
    Box {
        lower: Vec<Option<Expr<T>>>,
        upper: Vec<Option<Expr<T>>>,
    },
    /// `{w >= 0, sum(w) <= b(x)}`
    Budget { b: Expr<T> },
}

/// The follower's feasible set K(x), with bounds that may depend on x.
#[derive(Debug, Clone)]
pub enum FeasibleSetSpec<T = f64> {
    Box {
        lower: Vec<Option<Func<T>>>,
        upper: Vec<Option<Func<T>>>,
    },
    Budget {
        dim: usize,
        b: Func<T>,
    },
}

/// K(x) with its bounds evaluated at a fixed x.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedSet<T = f64> {
    Box { lower: Vec<T>, upper: Vec<T> },
    Budget { dim: usize, b: T },
}

impl<T: Scalar> FeasibleSetDef<T> {
    pub(crate) fn build(
        self,
        dim: usize,
        layout: &[String],
        x_only: &BTreeSet<&str>,
    ) -> Result<FeasibleSetSpec<T>, ModelError> {
        let compile = |what: String, e: Expr<T>| -> Result<Func<T>, ModelError> {
            if let Some(v) = e
                .variables()
                .into_iter()
                .find(|v| !x_only.contains(v.as_str()))
            {
                return Err(ModelError::Invariant(format!(
                    "{what} references '{v}'; K bounds may depend on x only"
                )));
            }
            Ok(Func::new(e, layout)?)
        };
        match self {
            FeasibleSetDef::Box { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return Err(ModelError::DimensionMismatch {
                        what: "K box bounds",
                        expected: dim,
                        found: lower.len().min(upper.len()),
                    });
                }
                let side = |bounds: Vec<Option<Expr<T>>>, name: &str| {
                    bounds
                        .into_iter()
                        .enumerate()
                        .map(|(j, b)| b.map(|e| compile(format!("K {name}[{j}]"), e)).transpose())
                        .collect::<Result<Vec<_>, _>>()
                };
                Ok(FeasibleSetSpec::Box {
                    lower: side(lower, "lower")?,
                    upper: side(upper, "upper")?,
                })
            }
            FeasibleSetDef::Budget { b } => Ok(FeasibleSetSpec::Budget {
                dim,
                b: compile("K budget".into(), b)?,
            }),
        }
    }
}

impl<T: Scalar> FeasibleSetSpec<T> {
    /// Builds K from a definition whose bounds use the given leader
    /// coordinate names.
    pub fn new(def: FeasibleSetDef<T>, dim: usize, x_names: &[String]) -> Result<Self, ModelError> {
        let x_only = x_names.iter().map(String::as_str).collect();
        def.build(dim, x_names, &x_only)
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSetSpec::Box { lower, .. } => lower.len(),
            FeasibleSetSpec::Budget { dim, .. } => *dim,
        }
    }

    pub(crate) fn to_def(&self) -> FeasibleSetDef<T> {
        let exprs = |v: &[Option<Func<T>>]| {
            v.iter()
                .map(|b| b.as_ref().map(|f| f.expr().clone()))
                .collect()
        };
        match self {
            FeasibleSetSpec::Box { lower, upper } => FeasibleSetDef::Box {
                lower: exprs(lower),
                upper: exprs(upper),
            },
            FeasibleSetSpec::Budget { b, .. } => FeasibleSetDef::Budget {
                b: b.expr().clone(),
            },
        }
    }

    /// Bounding box of K when every bound is a finite constant.
    pub fn constant_hull(&self) -> Option<(Vec<T>, Vec<T>)> {
        let constant = |f: &Func<T>| -> Option<T> {
            if f.expr().variables().is_empty() {
                f.eval(&[], &[]).ok().filter(|v| v.is_finite())
            } else {
                None
            }
        };
        match self {
            FeasibleSetSpec::Box { lower, upper } => {
                let lo = lower
                    .iter()
                    .map(|b| b.as_ref().and_then(constant))
                    .collect::<Option<Vec<_>>>()?;
                let hi = upper
                    .iter()
                    .map(|b| b.as_ref().and_then(constant))
                    .collect::<Option<Vec<_>>>()?;
                Some((lo, hi))
            }
            FeasibleSetSpec::Budget { dim, b } => {
                let b = constant(b)?;
                Some((vec![T::zero(); *dim], vec![b; *dim]))
            }
        }
    }

    /// Evaluates the bounds at `x`.
    pub fn resolve(&self, x: &[T]) -> Result<ResolvedSet<T>, ViError> {
        match self {
            FeasibleSetSpec::Box { lower, upper } => {
                let eval = |b: &Option<Func<T>>, default: T| match b {
                    Some(f) => f.eval(x, &[]),
                    None => Ok(default),
                };
                let lo = lower
                    .iter()
                    .map(|b| eval(b, T::neg_infinity()))
                    .collect::<Result<Vec<_>, _>>()?;
                let hi = upper
                    .iter()
                    .map(|b| eval(b, T::infinity()))
                    .collect::<Result<Vec<_>, _>>()?;
                if let Some(j) = (0..lo.len()).find(|&j| lo[j] > hi[j]) {
                    return Err(ViError::EmptySet(format!(
                        "component {j} has lower {} > upper {}",
                        lo[j], hi[j]
                    )));
                }
                Ok(ResolvedSet::Box {
                    lower: lo,
                    upper: hi,
                })
            }
            FeasibleSetSpec::Budget { dim, b } => {
                let b = b.eval(x, &[])?;
                if b <= T::zero() {
                    return Err(ViError::EmptySet(format!("budget {b} is not positive")));
                }
                Ok(ResolvedSet::Budget { dim: *dim, b })
            }
        }
    }
}

impl<T: Scalar> ResolvedSet<T> {
    /// Euclidean projection of `p`.
    pub fn project(&self, p: &[T]) -> Vec<T> {
        match self {
            ResolvedSet::Box { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&v, (&lo, &hi))| v.max(lo).min(hi))
                .collect(),
            ResolvedSet::Budget { b, .. } => project_budget(p, *b),
        }
    }

    pub fn contains(&self, p: &[T], tol: T) -> bool {
        match self {
            ResolvedSet::Box { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&v, (&lo, &hi))| v >= lo - tol && v <= hi + tol),
            ResolvedSet::Budget { b, .. } => {
                p.iter().all(|&v| v >= -tol) && p.iter().fold(T::zero(), |s, &v| s + v) <= *b + tol
            }
        }
    }
}

/// Projection onto `{w >= 0, sum(w) <= b}`.
///
/// If clamping to the orthant already meets the budget that is the answer;
/// otherwise the projection lies on the face `sum(w) = b` and is found by the
/// sort-and-threshold method.
fn project_budget<T: Scalar>(p: &[T], b: T) -> Vec<T> {
    let clamped: Vec<T> = p.iter().map(|&v| v.max(T::zero())).collect();
    let total = clamped.iter().fold(T::zero(), |s, &v| s + v);
    if total <= b {
        return clamped;
    }
    let mut sorted = p.to_vec();
    sorted.sort_by(|a, c| c.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (j, &s) in sorted.iter().enumerate() {
        cumsum = cumsum + s;
        let t = (cumsum - b) / T::from_usize(j + 1).unwrap();
        if s - t > T::zero() {
            theta = t;
        }
    }
    p.iter().map(|&v| (v - theta).max(T::zero())).collect()
}
