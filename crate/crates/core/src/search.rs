//! Coordinate pattern search on a box.

use crate::model::BoxSet;
use crate::scalar::Scalar;

/// Improvements must exceed this to be accepted.
pub(crate) const IMPROVEMENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub(crate) struct PatternOptions<T> {
    pub shrink: T,
    pub min_step: T,
    pub max_iters: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct PatternResult<T, A> {
    pub point: Vec<T>,
    pub value: T,
    pub aux: A,
    /// Objective after each accepted move, starting with the initial value.
    pub trace: Vec<T>,
    pub improved: bool,
}

/// Polls `±step_k` along each coordinate (probes clamped into `bounds`),
/// moves to the first strict improvement, and shrinks all steps when a
/// full poll fails. `f` returns `None` for infeasible probes.
pub(crate) fn pattern_search<T, A, E, F>(
    bounds: &BoxSet<T>,
    start: Vec<T>,
    start_value: T,
    start_aux: A,
    mut steps: Vec<T>,
    opts: &PatternOptions<T>,
    mut f: F,
) -> Result<PatternResult<T, A>, E>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<Option<(T, A)>, E>,
{
    let tol = T::lit(IMPROVEMENT_TOL);
    let mut point = start;
    let mut value = start_value;
    let mut aux = start_aux;
    let mut trace = vec![value];
    let mut improved = false;

    for _ in 0..opts.max_iters {
        let largest = steps.iter().fold(T::zero(), |m, &s| m.max(s));
        if largest < opts.min_step {
            break;
        }
        let mut moved = false;
        'poll: for k in 0..point.len() {
            if steps[k] <= T::zero() {
                continue;
            }
            for sign in [T::one(), -T::one()] {
                let mut probe = point.clone();
                probe[k] = (point[k] + sign * steps[k])
                    .max(bounds.lower[k])
                    .min(bounds.upper[k]);
                if probe[k] == point[k] {
                    continue;
                }
                if let Some((v, a)) = f(&probe)? {
                    if v < value - tol {
                        point = probe;
                        value = v;
                        aux = a;
                        trace.push(v);
                        improved = true;
                        moved = true;
                        break 'poll;
                    }
                }
            }
        }
        if !moved {
            for s in steps.iter_mut() {
                *s = *s * opts.shrink;
            }
        }
    }
    Ok(PatternResult {
        point,
        value,
        aux,
        trace,
        improved,
    })
}
