//! Reduction problems: minimize `π(x) + h(x, w)` over leader profiles `x`
//! and follower responses `w ∈ S(x)`.
//!
//! * optimistic: the inner choice of `w` minimizes,
//! * pessimistic: the inner choice maximizes (min–max),
//! * implicit: `S(x)` must be single-valued and `w = s(x)`.
//!
//! Each solve is a deterministic grid scan over the strategy box followed by
//! a coordinate pattern search from the best grid point. `S(x)` is always the
//! finite enumeration from [`crate::vi::enumerate_solutions`]; the solver
//! never differentiates through it.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::EvalError;
use crate::model::{GameInstance, ModelError};
use crate::scalar::Scalar;
use crate::search::{pattern_search, PatternOptions, IMPROVEMENT_TOL};
use crate::vi::{enumerate_solutions, SolutionSet, ViConfig, ViError};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("instance is in raw mode (per-leader coupling); the reduction requires a shared h")]
    RawMode,
    #[error("instance has no potential pi")]
    MissingPotential,
    #[error("no feasible (x, w) found: S(x) is empty at every probed x")]
    Infeasible,
    #[error("follower solution set is multivalued at x = {x:?} ({count} solutions)")]
    MultivaluedDetected { x: Vec<f64>, count: usize },
    #[error(transparent)]
    Vi(#[from] ViError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Formulation {
    Optimistic,
    Pessimistic,
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveConfig<T = f64> {
    /// Outer grid points per leader coordinate.
    pub grid: usize,
    pub shrink: T,
    pub min_step: T,
    pub max_refine_iters: usize,
    pub refine: bool,
    pub record_scan: bool,
    pub vi: ViConfig<T>,
}

impl<T: Scalar> Default for SolveConfig<T> {
    fn default() -> Self {
        Self {
            grid: 41,
            shrink: T::lit(0.5),
            min_step: T::lit(1e-6),
            max_refine_iters: 200,
            refine: true,
            record_scan: false,
            vi: ViConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    #[serde(rename = "optimal-on-grid")]
    OptimalOnGrid,
    #[serde(rename = "refined")]
    Refined,
}

/// Leader strategies with one follower response per leader.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile<T = f64> {
    pub x: Vec<T>,
    pub y: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow<T = f64> {
    pub x: Vec<T>,
    pub w: Vec<T>,
    pub objective: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport<T = f64> {
    pub status: SolveStatus,
    pub x: Vec<T>,
    pub w: Vec<T>,
    /// `π(x) + h(x, w)` at the reported point.
    pub value: T,
    pub profile: Profile<T>,
    pub residual: T,
    /// Every enumeration of S(x) along the way reported itself exhaustive.
    pub exhaustive: bool,
    pub wall_ms: u64,
    #[serde(skip)]
    pub formulation: Option<Formulation>,
    /// Objective sequence accepted by the refinement.
    #[serde(skip)]
    pub refine_trace: Vec<T>,
    #[serde(skip)]
    pub scan: Vec<ScanRow<T>>,
}

impl<T: Scalar> SolveReport<T> {
    /// Writes the scan log as CSV with header `x..., w..., objective`.
    pub fn write_scan_csv<W: Write>(&self, g: &GameInstance<T>, out: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header: Vec<String> = g.x_names().to_vec();
        header.extend(g.w_names().iter().cloned());
        header.push("objective".into());
        wtr.write_record(&header)?;
        for row in &self.scan {
            let rec: Vec<String> = row
                .x
                .iter()
                .chain(&row.w)
                .chain(std::iter::once(&row.objective))
                .map(|v| format!("{v:e}"))
                .collect();
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `y_i = w` for every leader.
pub fn lift_to_profile<T: Scalar>(x: &[T], w: &[T], n: usize) -> Profile<T> {
    Profile {
        x: x.to_vec(),
        y: vec![w.to_vec(); n],
    }
}

#[derive(Debug, Clone)]
struct PointValue<T> {
    w: Vec<T>,
    value: T,
    residual: T,
    exhaustive: bool,
}

fn check_instance<T: Scalar>(g: &GameInstance<T>) -> Result<(), SolveError> {
    if g.is_raw() {
        return Err(SolveError::RawMode);
    }
    if g.pi().is_none() {
        return Err(SolveError::MissingPotential);
    }
    Ok(())
}

fn objective<T: Scalar>(g: &GameInstance<T>, x: &[T], w: &[T]) -> Result<T, SolveError> {
    match g.quasi_potential(x, w) {
        Some(v) => Ok(v?),
        None => Err(SolveError::MissingPotential),
    }
}

/// Inner value at `x`; `None` when S(x) is empty.
fn evaluate_point<T: Scalar>(
    g: &GameInstance<T>,
    x: &[T],
    formulation: Formulation,
    vi: &ViConfig<T>,
    rows: Option<&mut Vec<ScanRow<T>>>,
) -> Result<Option<PointValue<T>>, SolveError> {
    let set: SolutionSet<T> = match enumerate_solutions(g, x, vi) {
        Ok(s) => s,
        Err(ViError::EmptySolutionSet { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    if formulation == Formulation::Implicit && set.len() > 1 {
        return Err(SolveError::MultivaluedDetected {
            x: x.iter().map(|v| v.as_f64()).collect(),
            count: set.len(),
        });
    }
    let mut best: Option<(usize, T)> = None;
    let mut values = Vec::with_capacity(set.len());
    for (k, w) in set.solutions.iter().enumerate() {
        let v = objective(g, x, w)?;
        values.push(v);
        let better = match best {
            None => true,
            Some((_, b)) => match formulation {
                Formulation::Pessimistic => v > b,
                _ => v < b,
            },
        };
        if better {
            best = Some((k, v));
        }
    }
    if let Some(rows) = rows {
        for (w, &v) in set.solutions.iter().zip(&values) {
            rows.push(ScanRow {
                x: x.to_vec(),
                w: w.clone(),
                objective: v,
            });
        }
    }
    let (k, value) = best.expect("nonempty solution set");
    Ok(Some(PointValue {
        w: set.solutions[k].clone(),
        value,
        residual: set.residuals[k],
        exhaustive: set.exhaustive,
    }))
}

fn refine<T: Scalar>(
    g: &GameInstance<T>,
    formulation: Formulation,
    cfg: &SolveConfig<T>,
    start: Vec<T>,
    start_point: PointValue<T>,
    steps: Vec<T>,
    exhaustive: &mut bool,
) -> Result<(Vec<T>, PointValue<T>, Vec<T>, bool), SolveError> {
    let opts = PatternOptions {
        shrink: cfg.shrink,
        min_step: cfg.min_step,
        max_iters: cfg.max_refine_iters,
    };
    let mut all_exhaustive = true;
    let value = start_point.value;
    let res = pattern_search(&g.x_box(), start, value, start_point, steps, &opts, |x| {
        let p = evaluate_point(g, x, formulation, &cfg.vi, None)?;
        if let Some(p) = &p {
            all_exhaustive &= p.exhaustive;
        }
        Ok::<_, SolveError>(p.map(|p| (p.value, p)))
    })?;
    *exhaustive &= all_exhaustive;
    Ok((res.point, res.aux, res.trace, res.improved))
}

fn solve<T: Scalar>(
    g: &GameInstance<T>,
    cfg: &SolveConfig<T>,
    formulation: Formulation,
) -> Result<SolveReport<T>, SolveError> {
    check_instance(g)?;
    let started = Instant::now();
    let xbox = g.x_box();
    let grid = xbox.grid(cfg.grid);

    let evaluated: Vec<Result<(Option<PointValue<T>>, Vec<ScanRow<T>>), SolveError>> = grid
        .par_iter()
        .map(|x| {
            let mut rows = Vec::new();
            let p = evaluate_point(
                g,
                x,
                formulation,
                &cfg.vi,
                cfg.record_scan.then_some(&mut rows),
            )?;
            Ok((p, rows))
        })
        .collect();

    let tol = T::lit(IMPROVEMENT_TOL);
    let mut best: Option<(usize, PointValue<T>)> = None;
    let mut exhaustive = true;
    let mut scan = Vec::new();
    for (idx, r) in evaluated.into_iter().enumerate() {
        let (p, rows) = r?;
        scan.extend(rows);
        let Some(p) = p else { continue };
        exhaustive &= p.exhaustive;
        let take = match &best {
            None => true,
            Some((_, b)) => p.value < b.value - tol,
        };
        if take {
            best = Some((idx, p));
        }
    }
    let (idx, point) = best.ok_or(SolveError::Infeasible)?;
    let x0 = grid[idx].clone();

    let (x, point, trace, improved) = if cfg.refine {
        refine(
            g,
            formulation,
            cfg,
            x0,
            point,
            xbox.spacing(cfg.grid),
            &mut exhaustive,
        )?
    } else {
        let v = point.value;
        (x0, point, vec![v], false)
    };

    Ok(SolveReport {
        status: if improved {
            SolveStatus::Refined
        } else {
            SolveStatus::OptimalOnGrid
        },
        profile: lift_to_profile(&x, &point.w, g.n_leaders()),
        value: point.value,
        residual: point.residual,
        w: point.w,
        x,
        exhaustive,
        wall_ms: started.elapsed().as_millis() as u64,
        formulation: Some(formulation),
        refine_trace: trace,
        scan,
    })
}

/// Optimistic reduction: `min π(x) + h(x, w)` over `x ∈ X`, `w ∈ S(x)`.
pub fn solve_p_quasi<T: Scalar>(
    g: &GameInstance<T>,
    cfg: &SolveConfig<T>,
) -> Result<SolveReport<T>, SolveError> {
    solve(g, cfg, Formulation::Optimistic)
}

/// Pessimistic reduction: `min_x max_{w ∈ S(x)} π(x) + h(x, w)`.
pub fn solve_p_pessimistic<T: Scalar>(
    g: &GameInstance<T>,
    cfg: &SolveConfig<T>,
) -> Result<SolveReport<T>, SolveError> {
    solve(g, cfg, Formulation::Pessimistic)
}

/// Implicit reduction for single-valued S: `min π(x) + h(x, s(x))`.
pub fn solve_p_implicit<T: Scalar>(
    g: &GameInstance<T>,
    cfg: &SolveConfig<T>,
) -> Result<SolveReport<T>, SolveError> {
    solve(g, cfg, Formulation::Implicit)
}

/// Pattern search from `start` without the grid scan; returns a local
/// minimizer of the chosen formulation. Initial steps are `initial_step`
/// times the box width per coordinate.
pub fn solve_local_from<T: Scalar>(
    g: &GameInstance<T>,
    start: &[T],
    initial_step: T,
    formulation: Formulation,
    cfg: &SolveConfig<T>,
) -> Result<SolveReport<T>, SolveError> {
    check_instance(g)?;
    let started = Instant::now();
    let xbox = g.x_box();
    let mut x0 = start.to_vec();
    xbox.clamp(&mut x0);
    let point =
        evaluate_point(g, &x0, formulation, &cfg.vi, None)?.ok_or(SolveError::Infeasible)?;
    let mut exhaustive = point.exhaustive;
    let steps = xbox
        .lower
        .iter()
        .zip(&xbox.upper)
        .map(|(&lo, &hi)| (hi - lo) * initial_step)
        .collect();
    let (x, point, trace, improved) =
        refine(g, formulation, cfg, x0, point, steps, &mut exhaustive)?;
    Ok(SolveReport {
        status: if improved {
            SolveStatus::Refined
        } else {
            SolveStatus::OptimalOnGrid
        },
        profile: lift_to_profile(&x, &point.w, g.n_leaders()),
        value: point.value,
        residual: point.residual,
        w: point.w,
        x,
        exhaustive,
        wall_ms: started.elapsed().as_millis() as u64,
        formulation: Some(formulation),
        refine_trace: trace,
        scan: Vec::new(),
    })
}
