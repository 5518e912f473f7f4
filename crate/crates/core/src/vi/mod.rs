//! The follower's parametrized variational inequality VI(G(x,·), K(x)).
//!
//! A point `w` solves the VI exactly when the natural map
//! `w − Π_K(x)(w − G(w; x))` vanishes. Solutions are found by projection
//! iterations with an extragradient fallback, and the (possibly multivalued)
//! solution set S(x) is approximated by multistart enumeration.

mod feasible;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::EvalError;
use crate::model::{GameInstance, ModelError};
use crate::scalar::{inf_norm_diff, lex_cmp, Scalar};

pub use feasible::{FeasibleSetDef, FeasibleSetSpec, ResolvedSet};

#[derive(Debug, Error)]
pub enum ViError {
    #[error("feasible set is empty: {0}")]
    EmptySet(String),
    #[error("VI iteration did not converge (best residual {best_residual:e})")]
    NotConverged { best_residual: f64 },
    #[error("no VI solution found in the search region at x = {x:?}")]
    EmptySolutionSet { x: Vec<f64> },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViConfig<T = f64> {
    pub residual_tol: T,
    pub step: T,
    pub max_iters: usize,
    /// Multistart points per follower dimension.
    pub multistart: usize,
    pub cluster_tol: T,
}

impl<T: Scalar> Default for ViConfig<T> {
    fn default() -> Self {
        Self {
            residual_tol: T::lit(1e-8),
            step: T::lit(0.5),
            max_iters: 10_000,
            multistart: 17,
            cluster_tol: T::lit(1e-6),
        }
    }
}

/// Finite approximation of S(x).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSet<T = f64> {
    pub x: Vec<T>,
    /// Lexicographically sorted, pairwise farther apart than `cluster_tol`.
    pub solutions: Vec<Vec<T>>,
    pub residuals: Vec<T>,
    pub cluster_tol: T,
    /// Heuristic: every multistart run converged.
    pub exhaustive: bool,
    pub starts: usize,
    pub failed_starts: usize,
}

impl<T: Scalar> SolutionSet<T> {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// Member closest to `target` in the ∞-norm.
    pub fn nearest(&self, target: &[T]) -> Option<&[T]> {
        self.solutions
            .iter()
            .min_by(|a, b| {
                inf_norm_diff(a, target)
                    .partial_cmp(&inf_norm_diff(b, target))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(Vec::as_slice)
    }
}

/// Euclidean projection onto K(x).
pub fn project<T: Scalar>(k: &FeasibleSetSpec<T>, x: &[T], p: &[T]) -> Result<Vec<T>, ViError> {
    Ok(k.resolve(x)?.project(p))
}

/// The follower VI frozen at one leader profile.
pub(crate) struct FollowerProblem<'a, T: Scalar> {
    game: &'a GameInstance<T>,
    x: &'a [T],
    set: ResolvedSet<T>,
}

impl<'a, T: Scalar> FollowerProblem<'a, T> {
    pub(crate) fn new(game: &'a GameInstance<T>, x: &'a [T]) -> Result<Self, ViError> {
        if x.len() != game.x_dim() {
            return Err(ModelError::DimensionMismatch {
                what: "x",
                expected: game.x_dim(),
                found: x.len(),
            }
            .into());
        }
        let set = game.follower().k.resolve(x)?;
        Ok(Self { game, x, set })
    }

    fn map(&self, w: &[T]) -> Result<Vec<T>, EvalError> {
        self.game
            .follower()
            .g
            .iter()
            .map(|f| f.eval(self.x, w))
            .collect()
    }

    fn check_w(&self, w: &[T]) -> Result<(), ViError> {
        if w.len() != self.game.w_dim() {
            return Err(ModelError::DimensionMismatch {
                what: "w",
                expected: self.game.w_dim(),
                found: w.len(),
            }
            .into());
        }
        Ok(())
    }

    pub(crate) fn residual(&self, w: &[T]) -> Result<T, ViError> {
        self.check_w(w)?;
        let g = self.map(w)?;
        Ok(self.residual_with(w, &g))
    }

    fn residual_with(&self, w: &[T], g: &[T]) -> T {
        let shifted: Vec<T> = w.iter().zip(g).map(|(&a, &b)| a - b).collect();
        inf_norm_diff(w, &self.set.project(&shifted))
    }

    fn shifted_projection(&self, w: &[T], g: &[T], gamma: T) -> Vec<T> {
        let p: Vec<T> = w.iter().zip(g).map(|(&a, &b)| a - gamma * b).collect();
        self.set.project(&p)
    }

    /// One projection or extragradient step from `w` (with `g = G(w)`).
    /// Returns the new point, its map value and its residual.
    fn step(&self, w: &[T], g: &[T], gamma: T, extragradient: bool) -> Result<Iterate<T>, ViError> {
        let next = if extragradient {
            let predictor = self.shifted_projection(w, g, gamma);
            let gp = self.map(&predictor)?;
            self.shifted_projection(w, &gp, gamma)
        } else {
            self.shifted_projection(w, g, gamma)
        };
        let gn = self.map(&next)?;
        let r = self.residual_with(&next, &gn);
        Ok(Iterate { w: next, g: gn, r })
    }

    /// Projection iterations from `start`, switching to extragradient after
    /// 50 iterations without a new best residual. Returns the solution and
    /// its residual.
    pub(crate) fn solve_from(
        &self,
        start: &[T],
        cfg: &ViConfig<T>,
    ) -> Result<(Vec<T>, T), ViError> {
        const STALL_LIMIT: usize = 50;
        let min_gamma = T::lit(1e-14);

        self.check_w(start)?;
        let w0 = self.set.project(start);
        let g0 = self.map(&w0)?;
        let r0 = self.residual_with(&w0, &g0);
        let mut cur = Iterate {
            w: w0,
            g: g0,
            r: r0,
        };
        let mut best = cur.clone();
        let mut gamma = cfg.step;
        let mut extragradient = false;
        let mut stall = 0;
        let mut iters = 0;
        while best.r > cfg.residual_tol && iters < cfg.max_iters {
            iters += 1;
            let next = self.step(&cur.w, &cur.g, gamma, extragradient)?;
            if extragradient && !(next.r < cur.r) {
                gamma = gamma / T::lit(2.0);
                if gamma < min_gamma {
                    break;
                }
                continue;
            }
            cur = next;
            if cur.r < best.r {
                best = cur.clone();
                stall = 0;
            } else {
                stall += 1;
            }
            if !extragradient && stall >= STALL_LIMIT {
                extragradient = true;
                cur = best.clone();
                stall = 0;
            }
        }
        if !(best.r <= cfg.residual_tol) {
            return Err(ViError::NotConverged {
                best_residual: best.r.as_f64(),
            });
        }

        // Polish while the residual keeps strictly decreasing.
        let mut cur = best;
        let target = cfg.residual_tol * T::lit(1e-6);
        for _ in 0..200 {
            if cur.r <= target {
                break;
            }
            let next = self.step(&cur.w, &cur.g, gamma, extragradient)?;
            if next.r < cur.r {
                cur = next;
            } else {
                break;
            }
        }
        Ok((cur.w, cur.r))
    }
}

#[derive(Debug, Clone)]
struct Iterate<T> {
    w: Vec<T>,
    g: Vec<T>,
    r: T,
}

/// `‖w − Π_K(x)(w − G(w; x))‖_∞`; zero exactly on S(x).
pub fn natural_map_residual<T: Scalar>(
    g: &GameInstance<T>,
    x: &[T],
    w: &[T],
) -> Result<T, ViError> {
    FollowerProblem::new(g, x)?.residual(w)
}

/// Solves the follower VI at `x` from one starting point.
pub fn solve_vi_from<T: Scalar>(
    g: &GameInstance<T>,
    x: &[T],
    start: &[T],
    cfg: &ViConfig<T>,
) -> Result<Vec<T>, ViError> {
    FollowerProblem::new(g, x)?
        .solve_from(start, cfg)
        .map(|(w, _)| w)
}

/// Multistart enumeration of S(x).
///
/// Starts form a stratified grid over the follower search box. Grid points
/// are also tested directly, which catches solutions that repel the
/// iteration. Results are clustered (lowest residual kept per cluster) and
/// sorted lexicographically.
pub fn enumerate_solutions<T: Scalar>(
    g: &GameInstance<T>,
    x: &[T],
    cfg: &ViConfig<T>,
) -> Result<SolutionSet<T>, ViError> {
    let problem = FollowerProblem::new(g, x)?;
    let starts = g.follower().search.grid(cfg.multistart);

    let outcomes: Vec<(Vec<(Vec<T>, T)>, bool, Option<ViError>)> = starts
        .par_iter()
        .map(|s| {
            let mut found = Vec::new();
            if let Ok(r) = problem.residual(s) {
                if r <= cfg.residual_tol {
                    found.push((s.clone(), r));
                }
            }
            match problem.solve_from(s, cfg) {
                Ok(hit) => {
                    found.push(hit);
                    (found, true, None)
                }
                Err(e @ ViError::Eval(_)) => (found, false, Some(e)),
                Err(_) => (found, false, None),
            }
        })
        .collect();

    let mut candidates = Vec::new();
    let mut failed = 0;
    let mut first_error = None;
    for (found, ok, err) in outcomes {
        candidates.extend(found);
        if !ok {
            failed += 1;
        }
        if first_error.is_none() {
            first_error = err;
        }
    }
    if candidates.is_empty() {
        if failed == starts.len() {
            if let Some(e) = first_error {
                return Err(e);
            }
        }
        return Err(ViError::EmptySolutionSet {
            x: x.iter().map(|v| v.as_f64()).collect(),
        });
    }

    candidates.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| lex_cmp(&a.0, &b.0))
    });
    let mut reps: Vec<(Vec<T>, T)> = Vec::new();
    for (w, r) in candidates {
        if reps
            .iter()
            .all(|(q, _)| inf_norm_diff(q, &w) > cfg.cluster_tol)
        {
            reps.push((w, r));
        }
    }
    reps.sort_by(|a, b| lex_cmp(&a.0, &b.0));

    Ok(SolutionSet {
        x: x.to_vec(),
        residuals: reps.iter().map(|(_, r)| *r).collect(),
        solutions: reps.into_iter().map(|(w, _)| w).collect(),
        cluster_tol: cfg.cluster_tol,
        exhaustive: failed == 0,
        starts: starts.len(),
        failed_starts: failed,
    })
}

/// `w ∈ S(x)` up to `tol` on the natural-map residual. An infinite
/// tolerance accepts every point.
pub fn membership<T: Scalar>(g: &GameInstance<T>, x: &[T], w: &[T], tol: T) -> bool {
    if tol == T::infinity() {
        return true;
    }
    matches!(natural_map_residual(g, x, w), Ok(r) if r <= tol)
}

#[cfg(test)]
mod tests;
