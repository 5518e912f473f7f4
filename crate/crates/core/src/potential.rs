//! Checks of the quasi-potential structure.
//!
//! A quasi-potential game needs a `π` with `∇_{x_i} π = ∇_{x_i} φ_i` for every
//! leader. These checks compare finite-difference gradients on a fixed
//! Halton sample of the strategy box, screen for the existence of such a `π`
//! through symmetry of mixed partials, and build a numeric `π̂` by line
//! integration when none is supplied.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{fd_mixed_partial, fd_partial, EvalError, DEFAULT_FD_STEP};
use crate::model::{BoxSet, GameInstance};
use crate::scalar::Scalar;

/// Relative step for second-order mixed differences.
const MIXED_FD_STEP: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("instance has no potential pi")]
    MissingPotential,
    #[error("instance is in raw mode (per-leader coupling); not quasi-potential")]
    RawMode,
    #[error("potential existence check failed (max mixed-partial asymmetry {max_deviation:e})")]
    ExistenceNotEstablished { max_deviation: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport<T = f64> {
    pub pass: bool,
    pub max_deviation: T,
    pub argmax_point: Vec<T>,
    pub samples: usize,
    pub tol: T,
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = f64::from(base);
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while index > 0 {
        out += (index % u64::from(base)) as f64 * inv;
        index /= u64::from(base);
        inv /= b;
    }
    out
}

/// First `count` points of the Halton sequence mapped into `bounds`.
pub fn halton_points<T: Scalar>(bounds: &BoxSet<T>, count: usize) -> Vec<Vec<T>> {
    (1..=count as u64)
        .map(|k| {
            (0..bounds.dim())
                .map(|d| {
                    let u = T::lit(radical_inverse(k, PRIMES[d % PRIMES.len()]));
                    bounds.lower[d] + (bounds.upper[d] - bounds.lower[d]) * u
                })
                .collect()
        })
        .collect()
}

/// Compares `∇_{x_i} π` with `∇_{x_i} φ_i` using the instance's own `π`.
pub fn check_gradient_identity<T: Scalar>(
    g: &GameInstance<T>,
    samples: usize,
    tol: T,
) -> Result<CheckReport<T>, PotentialError> {
    if g.is_raw() {
        return Err(PotentialError::RawMode);
    }
    let pi = g.pi().ok_or(PotentialError::MissingPotential)?;
    check_gradient_identity_with(g, &|x: &[T]| pi.eval(x, &[]), samples, tol)
}

/// Same check against an arbitrary potential callable.
pub fn check_gradient_identity_with<T: Scalar>(
    g: &GameInstance<T>,
    potential: &dyn Fn(&[T]) -> Result<T, EvalError>,
    samples: usize,
    tol: T,
) -> Result<CheckReport<T>, PotentialError> {
    let step = T::lit(DEFAULT_FD_STEP);
    let mut worst = T::zero();
    let mut argmax = Vec::new();
    for x in halton_points(&g.x_box(), samples) {
        for (i, leader) in g.leaders().iter().enumerate() {
            let phi = |p: &[T]| leader.phi.eval(p, &[]);
            for k in g.block(i) {
                let dpi = fd_partial(potential, &x, k, step)?;
                let dphi = fd_partial(&phi, &x, k, step)?;
                let dev = (dpi - dphi).abs();
                if dev > worst || argmax.is_empty() {
                    worst = dev;
                    argmax = x.clone();
                }
            }
        }
    }
    Ok(CheckReport {
        pass: worst <= tol,
        max_deviation: worst,
        argmax_point: argmax,
        samples,
        tol,
    })
}

/// Necessary condition for a potential: `∂²φ_i/∂x_a∂x_b = ∂²φ_j/∂x_b∂x_a`
/// for coordinates `a` of leader `i` and `b` of leader `j`, `i != j`.
pub fn check_potential_existence<T: Scalar>(
    g: &GameInstance<T>,
    samples: usize,
    tol: T,
) -> Result<CheckReport<T>, PotentialError> {
    let step = T::lit(MIXED_FD_STEP);
    let leaders = g.leaders();
    let mut worst = T::zero();
    let mut argmax = Vec::new();
    for x in halton_points(&g.x_box(), samples) {
        for i in 0..leaders.len() {
            for j in (i + 1)..leaders.len() {
                let phi_i = |p: &[T]| leaders[i].phi.eval(p, &[]);
                let phi_j = |p: &[T]| leaders[j].phi.eval(p, &[]);
                for a in g.block(i) {
                    for b in g.block(j) {
                        let dij = fd_mixed_partial(&phi_i, &x, a, b, step)?;
                        let dji = fd_mixed_partial(&phi_j, &x, b, a, step)?;
                        let dev = (dij - dji).abs();
                        if dev > worst || argmax.is_empty() {
                            worst = dev;
                            argmax = x.clone();
                        }
                    }
                }
            }
        }
    }
    if argmax.is_empty() {
        argmax = g.x_box().midpoint();
    }
    Ok(CheckReport {
        pass: worst <= tol,
        max_deviation: worst,
        argmax_point: argmax,
        samples,
        tol,
    })
}

/// Numeric potential built by integrating the leaders' partial gradients
/// along straight paths from the box midpoint.
///
/// Only differences `π̂(x) − π̂(x')` are meaningful; the additive constant is
/// fixed by `π̂(midpoint) = 0`.
#[derive(Debug, Clone)]
pub struct NumericPotential<'a, T: Scalar = f64> {
    game: &'a GameInstance<T>,
    origin: Vec<T>,
    panels: usize,
}

impl<'a, T: Scalar> NumericPotential<'a, T> {
    pub fn origin(&self) -> &[T] {
        &self.origin
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    /// `Σ_i ∫_0^1 ∇_{x_i}φ_i(x0 + t(x − x0))·(x_i − x0_i) dt`, composite
    /// trapezoid rule.
    pub fn value(&self, x: &[T]) -> Result<T, EvalError> {
        self.integrate(x, self.panels)
    }

    fn integrate(&self, x: &[T], panels: usize) -> Result<T, EvalError> {
        let step = T::lit(DEFAULT_FD_STEP);
        let n = T::from_usize(panels).unwrap();
        let dx: Vec<T> = x.iter().zip(&self.origin).map(|(&a, &b)| a - b).collect();
        let integrand = |t: T| -> Result<T, EvalError> {
            let p: Vec<T> = self
                .origin
                .iter()
                .zip(&dx)
                .map(|(&o, &d)| o + t * d)
                .collect();
            let mut acc = T::zero();
            for (i, leader) in self.game.leaders().iter().enumerate() {
                let phi = |q: &[T]| leader.phi.eval(q, &[]);
                for k in self.game.block(i) {
                    if dx[k] != T::zero() {
                        acc = acc + fd_partial(&phi, &p, k, step)? * dx[k];
                    }
                }
            }
            Ok(acc)
        };
        let half = T::lit(0.5);
        let mut sum = half * (integrand(T::zero())? + integrand(T::one())?);
        for k in 1..panels {
            sum = sum + integrand(T::from_usize(k).unwrap() / n)?;
        }
        Ok(sum / n)
    }

    /// Richardson-style error estimate at `x`: `|Q_n − Q_{2n}|·4/3`.
    pub fn error_estimate(&self, x: &[T]) -> Result<T, EvalError> {
        let coarse = self.integrate(x, self.panels)?;
        let fine = self.integrate(x, 2 * self.panels)?;
        Ok((coarse - fine).abs() * T::lit(4.0 / 3.0))
    }
}

/// Builds `π̂` after the mixed-partial screen passes (64 samples, tol 1e-4).
pub fn construct_potential<T: Scalar>(
    g: &GameInstance<T>,
    quadrature_steps: usize,
) -> Result<NumericPotential<'_, T>, PotentialError> {
    let screen = check_potential_existence(g, 64, T::lit(1e-4))?;
    if !screen.pass {
        return Err(PotentialError::ExistenceNotEstablished {
            max_deviation: screen.max_deviation.as_f64(),
        });
    }
    Ok(NumericPotential {
        game: g,
        origin: g.x_box().midpoint(),
        panels: quadrature_steps.max(1),
    })
}
