//! Game instances: leaders, the shared coupling term, the potential and the
//! follower variational inequality.

mod gallery;
mod json;

use std::collections::BTreeSet;
use std::ops::Range;

use thiserror::Error;

use crate::expr::{Compiled, EvalError, Expr, ParseError};
use crate::scalar::{linspace, product_grid, Scalar};
use crate::vi::{FeasibleSetDef, FeasibleSetSpec};

pub use gallery::{build_gallery, GALLERY_NAMES};
pub use json::load_instance;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("cannot parse {field}: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("unknown gallery instance '{0}'")]
    UnknownGallery(String),
    #[error("invalid gallery parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("leader index {0} out of range")]
    NoSuchLeader(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Product of closed intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet<T = f64> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub labels: Vec<String>,
}

impl<T: Scalar> BoxSet<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>, labels: Vec<String>) -> Result<Self, ModelError> {
        if lower.len() != upper.len() || lower.len() != labels.len() {
            return Err(ModelError::Invariant(format!(
                "box bounds have lengths {}/{} for {} labels",
                lower.len(),
                upper.len(),
                labels.len()
            )));
        }
        for k in 0..lower.len() {
            if !lower[k].is_finite() || !upper[k].is_finite() {
                return Err(ModelError::Invariant(format!(
                    "box bound for {} is not finite",
                    labels[k]
                )));
            }
            if lower[k] > upper[k] {
                return Err(ModelError::Invariant(format!(
                    "empty box: {} has lower {} > upper {}",
                    labels[k], lower[k], upper[k]
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, p: &[T]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&lo, &hi))| lo <= v && v <= hi)
    }

    pub fn clamp(&self, p: &mut [T]) {
        for (k, v) in p.iter_mut().enumerate() {
            *v = v.max(self.lower[k]).min(self.upper[k]);
        }
    }

    pub fn midpoint(&self) -> Vec<T> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| (lo + hi) / T::lit(2.0))
            .collect()
    }

    /// Grid spacing per dimension for `count` points per axis.
    pub fn spacing(&self, count: usize) -> Vec<T> {
        let gaps = T::from_usize(count.max(2) - 1).unwrap();
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| (hi - lo) / gaps)
            .collect()
    }

    pub fn axes(&self, count: usize) -> Vec<Vec<T>> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| {
                if lo == hi {
                    vec![lo]
                } else {
                    linspace(lo, hi, count)
                }
            })
            .collect()
    }

    /// Stratified grid with `count` points per axis, lexicographic order.
    pub fn grid(&self, count: usize) -> Vec<Vec<T>> {
        product_grid(&self.axes(count))
    }
}

/// A parsed expression compiled against the instance's variable layout
/// (all leader coordinates, then follower coordinates).
#[derive(Debug, Clone)]
pub struct Func<T = f64> {
    expr: Expr<T>,
    compiled: Compiled<T>,
}

impl<T: Scalar> Func<T> {
    pub(crate) fn new(expr: Expr<T>, layout: &[String]) -> Result<Self, EvalError> {
        let compiled = expr.compile(layout)?;
        Ok(Self { expr, compiled })
    }

    pub fn expr(&self) -> &Expr<T> {
        &self.expr
    }

    /// Evaluates at leader profile `x` and follower point `w`.
    pub fn eval(&self, x: &[T], w: &[T]) -> Result<T, EvalError> {
        self.compiled.eval2(x, w)
    }
}

#[derive(Debug, Clone)]
pub struct LeaderSpec<T = f64> {
    /// 1-based identifier as written in instance files.
    pub id: usize,
    pub dim: usize,
    pub bounds: BoxSet<T>,
    pub phi: Func<T>,
}

/// How leader objectives couple to the follower response.
#[derive(Debug, Clone)]
pub enum Coupling<T = f64> {
    /// One `h(x, w)` shared by every leader (quasi-potential form).
    Shared(Func<T>),
    /// Per-leader `h_i(x, w)`; accepted by the verifiers only.
    Raw(Vec<Func<T>>),
}

#[derive(Debug, Clone)]
pub struct FollowerSpec<T = f64> {
    pub dim: usize,
    pub g: Vec<Func<T>>,
    pub k: FeasibleSetSpec<T>,
    /// Region scanned by multistart enumeration.
    pub search: BoxSet<T>,
}

#[derive(Debug, Clone)]
pub struct GameInstance<T = f64> {
    name: String,
    leaders: Vec<LeaderSpec<T>>,
    coupling: Coupling<T>,
    pi: Option<Func<T>>,
    follower: FollowerSpec<T>,
    x_names: Vec<String>,
    w_names: Vec<String>,
    offsets: Vec<usize>,
}

/// Unvalidated leader description.
#[derive(Debug, Clone)]
pub struct LeaderDef<T = f64> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub phi: Expr<T>,
}

#[derive(Debug, Clone)]
pub enum CouplingDef<T = f64> {
    Shared(Expr<T>),
    Raw(Vec<Expr<T>>),
}

#[derive(Debug, Clone)]
pub struct FollowerDef<T = f64> {
    pub dim: usize,
    pub g: Vec<Expr<T>>,
    pub k: FeasibleSetDef<T>,
    pub search: Option<(Vec<T>, Vec<T>)>,
}

/// Everything needed to build a [`GameInstance`]; validated by
/// [`GameInstance::from_parts`].
#[derive(Debug, Clone)]
pub struct InstanceParts<T = f64> {
    pub name: String,
    pub leaders: Vec<LeaderDef<T>>,
    pub coupling: CouplingDef<T>,
    pub pi: Option<Expr<T>>,
    pub follower: FollowerDef<T>,
}

/// Coordinate names of leader `id` (1-based) with `dim` coordinates.
pub fn leader_var_names(id: usize, dim: usize) -> Vec<String> {
    if dim == 1 {
        vec![format!("x{id}")]
    } else {
        (1..=dim).map(|k| format!("x{id}_{k}")).collect()
    }
}

pub fn follower_var_names(dim: usize) -> Vec<String> {
    if dim == 1 {
        vec!["w".to_string()]
    } else {
        (1..=dim).map(|j| format!("w{j}")).collect()
    }
}

fn check_vars<T: Scalar>(
    what: &str,
    e: &Expr<T>,
    allowed: &BTreeSet<&str>,
) -> Result<(), ModelError> {
    for v in e.variables() {
        if !allowed.contains(v.as_str()) {
            return Err(ModelError::Invariant(format!(
                "{what} references '{v}', which is not allowed there"
            )));
        }
    }
    Ok(())
}

fn check_smooth<T: Scalar>(what: &str, e: &Expr<T>) -> Result<(), ModelError> {
    if e.has_kinks() {
        return Err(ModelError::Invariant(format!(
            "{what} must be smooth (no max, min or abs)"
        )));
    }
    Ok(())
}

impl<T: Scalar> GameInstance<T> {
    pub fn from_parts(parts: InstanceParts<T>) -> Result<Self, ModelError> {
        let InstanceParts {
            name,
            leaders,
            coupling,
            pi,
            follower,
        } = parts;
        if leaders.is_empty() {
            return Err(ModelError::Invariant("at least one leader required".into()));
        }
        if follower.dim == 0 {
            return Err(ModelError::Invariant(
                "follower dimension must be positive".into(),
            ));
        }

        let mut x_names = Vec::new();
        let mut offsets = Vec::with_capacity(leaders.len() + 1);
        for (i, l) in leaders.iter().enumerate() {
            if l.lower.is_empty() || l.lower.len() != l.upper.len() {
                return Err(ModelError::Invariant(format!(
                    "leader {} has bounds of lengths {}/{}",
                    i + 1,
                    l.lower.len(),
                    l.upper.len()
                )));
            }
            offsets.push(x_names.len());
            x_names.extend(leader_var_names(i + 1, l.lower.len()));
        }
        offsets.push(x_names.len());
        let w_names = follower_var_names(follower.dim);
        let layout: Vec<String> = x_names.iter().chain(&w_names).cloned().collect();

        let x_only: BTreeSet<&str> = x_names.iter().map(String::as_str).collect();
        let all: BTreeSet<&str> = layout.iter().map(String::as_str).collect();
        let func = |e: Expr<T>| Func::new(e, &layout).map_err(ModelError::from);

        let mut built = Vec::with_capacity(leaders.len());
        for (i, l) in leaders.into_iter().enumerate() {
            let id = i + 1;
            let labels = x_names[offsets[i]..offsets[i + 1]].to_vec();
            let bounds = BoxSet::new(l.lower, l.upper, labels)?;
            check_vars(&format!("phi of leader {id}"), &l.phi, &x_only)?;
            check_smooth(&format!("phi of leader {id}"), &l.phi)?;
            built.push(LeaderSpec {
                id,
                dim: bounds.dim(),
                bounds,
                phi: func(l.phi)?,
            });
        }

        let coupling = match coupling {
            CouplingDef::Shared(h) => {
                check_vars("h", &h, &all)?;
                Coupling::Shared(func(h)?)
            }
            CouplingDef::Raw(hs) => {
                if hs.len() != built.len() {
                    return Err(ModelError::DimensionMismatch {
                        what: "raw_h",
                        expected: built.len(),
                        found: hs.len(),
                    });
                }
                let mut out = Vec::with_capacity(hs.len());
                for (i, h) in hs.into_iter().enumerate() {
                    check_vars(&format!("raw_h[{i}]"), &h, &all)?;
                    out.push(func(h)?);
                }
                Coupling::Raw(out)
            }
        };

        let pi = match pi {
            Some(p) => {
                check_vars("pi", &p, &x_only)?;
                check_smooth("pi", &p)?;
                Some(func(p)?)
            }
            None => None,
        };

        if follower.g.len() != follower.dim {
            return Err(ModelError::DimensionMismatch {
                what: "follower G",
                expected: follower.dim,
                found: follower.g.len(),
            });
        }
        let mut g = Vec::with_capacity(follower.dim);
        for (j, e) in follower.g.into_iter().enumerate() {
            check_vars(&format!("G[{j}]"), &e, &all)?;
            g.push(func(e)?);
        }
        let k = follower.k.build(follower.dim, &layout, &x_only)?;
        let search = match follower.search {
            Some((lo, hi)) => {
                if lo.len() != follower.dim || hi.len() != follower.dim {
                    return Err(ModelError::DimensionMismatch {
                        what: "follower search box",
                        expected: follower.dim,
                        found: lo.len().min(hi.len()),
                    });
                }
                BoxSet::new(lo, hi, w_names.clone())?
            }
            None => {
                let (lo, hi) = k.constant_hull().ok_or_else(|| {
                    ModelError::Schema(
                        "follower search box required when K has unbounded or x-dependent bounds"
                            .into(),
                    )
                })?;
                BoxSet::new(lo, hi, w_names.clone())?
            }
        };
        if let Some((lo, hi)) = k.constant_hull() {
            let covered =
                (0..follower.dim).all(|j| search.lower[j] <= lo[j] && search.upper[j] >= hi[j]);
            if !covered {
                return Err(ModelError::Invariant(
                    "follower search box does not cover K".into(),
                ));
            }
        }

        let game = Self {
            name,
            leaders: built,
            coupling,
            pi,
            follower: FollowerSpec {
                dim: g.len(),
                g,
                k,
                search,
            },
            x_names,
            w_names,
            offsets,
        };
        game.check_feasible_set_on_grid()?;
        Ok(game)
    }

    // K(x) must be nonempty on X; probed on a coarse grid.
    fn check_feasible_set_on_grid(&self) -> Result<(), ModelError> {
        let xbox = self.x_box();
        let count = if xbox.dim() <= 4 { 3 } else { 2 };
        for x in xbox.grid(count) {
            self.follower
                .k
                .resolve(&x)
                .map_err(|e| ModelError::Invariant(format!("K at x = {x:?}: {e}")))?;
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn leaders(&self) -> &[LeaderSpec<T>] {
        &self.leaders
    }

    pub fn n_leaders(&self) -> usize {
        self.leaders.len()
    }

    pub fn coupling(&self) -> &Coupling<T> {
        &self.coupling
    }

    pub fn pi(&self) -> Option<&Func<T>> {
        self.pi.as_ref()
    }

    pub fn follower(&self) -> &FollowerSpec<T> {
        &self.follower
    }

    pub fn is_raw(&self) -> bool {
        matches!(self.coupling, Coupling::Raw(_))
    }

    /// Total leader dimension.
    pub fn x_dim(&self) -> usize {
        self.x_names.len()
    }

    pub fn w_dim(&self) -> usize {
        self.w_names.len()
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn w_names(&self) -> &[String] {
        &self.w_names
    }

    /// Positions of leader `i`'s coordinates inside the joint profile.
    pub fn block(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// The joint strategy box X = X_1 × ... × X_N.
    pub fn x_box(&self) -> BoxSet<T> {
        let mut lower = Vec::with_capacity(self.x_dim());
        let mut upper = Vec::with_capacity(self.x_dim());
        for l in &self.leaders {
            lower.extend_from_slice(&l.bounds.lower);
            upper.extend_from_slice(&l.bounds.upper);
        }
        BoxSet {
            lower,
            upper,
            labels: self.x_names.clone(),
        }
    }

    /// Replaces the potential (revalidated).
    pub fn with_pi(&self, pi: Expr<T>) -> Result<Self, ModelError> {
        let mut parts = self.to_parts();
        parts.pi = Some(pi);
        Self::from_parts(parts)
    }

    pub(crate) fn to_parts(&self) -> InstanceParts<T> {
        InstanceParts {
            name: self.name.clone(),
            leaders: self
                .leaders
                .iter()
                .map(|l| LeaderDef {
                    lower: l.bounds.lower.clone(),
                    upper: l.bounds.upper.clone(),
                    phi: l.phi.expr().clone(),
                })
                .collect(),
            coupling: match &self.coupling {
                Coupling::Shared(h) => CouplingDef::Shared(h.expr().clone()),
                Coupling::Raw(hs) => {
                    CouplingDef::Raw(hs.iter().map(|h| h.expr().clone()).collect())
                }
            },
            pi: self.pi.as_ref().map(|p| p.expr().clone()),
            follower: FollowerDef {
                dim: self.follower.dim,
                g: self.follower.g.iter().map(|f| f.expr().clone()).collect(),
                k: self.follower.k.to_def(),
                search: Some((
                    self.follower.search.lower.clone(),
                    self.follower.search.upper.clone(),
                )),
            },
        }
    }

    pub(crate) fn check_dims(&self, x: &[T], w: &[T]) -> Result<(), ModelError> {
        if x.len() != self.x_dim() {
            return Err(ModelError::DimensionMismatch {
                what: "x",
                expected: self.x_dim(),
                found: x.len(),
            });
        }
        if w.len() != self.w_dim() {
            return Err(ModelError::DimensionMismatch {
                what: "w",
                expected: self.w_dim(),
                found: w.len(),
            });
        }
        Ok(())
    }

    /// Leader `i`'s objective `φ_i(x) + h(x, w)` (0-based `i`); raw-mode
    /// instances use the leader's own `h_i`.
    pub fn leader_objective(&self, i: usize, x: &[T], w: &[T]) -> Result<T, ModelError> {
        let leader = self.leaders.get(i).ok_or(ModelError::NoSuchLeader(i))?;
        self.check_dims(x, w)?;
        let h = match &self.coupling {
            Coupling::Shared(h) => h,
            Coupling::Raw(hs) => &hs[i],
        };
        Ok(leader.phi.eval(x, &[])? + h.eval(x, w)?)
    }

    /// `π(x)`, if the instance has a potential.
    pub fn potential(&self, x: &[T]) -> Option<Result<T, EvalError>> {
        self.pi.as_ref().map(|p| p.eval(x, &[]))
    }

    /// `π(x) + h(x, w)` for quasi-potential instances with a potential.
    pub fn quasi_potential(&self, x: &[T], w: &[T]) -> Option<Result<T, EvalError>> {
        match (&self.pi, &self.coupling) {
            (Some(p), Coupling::Shared(h)) => {
                Some(p.eval(x, &[]).and_then(|pv| Ok(pv + h.eval(x, w)?)))
            }
            _ => None,
        }
    }
}

/// Leader `i`'s objective as a free function.
pub fn leader_objective<T: Scalar>(
    g: &GameInstance<T>,
    i: usize,
    x: &[T],
    w: &[T],
) -> Result<T, ModelError> {
    g.leader_objective(i, x, w)
}

#[cfg(test)]
mod tests;
