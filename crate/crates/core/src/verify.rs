//! Certification of candidate equilibria.
//!
//! Every check here works directly on leader objectives and the enumerated
//! follower sets, so raw-mode instances (per-leader coupling, no potential)
//! are handled the same way as quasi-potential ones. Gaps follow one sign
//! convention throughout: `gap = candidate value − best deviation value`,
//! so a positive gap is the amount by which a leader can improve.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::EvalError;
use crate::model::{GameInstance, ModelError};
use crate::scalar::{inf_norm_diff, linspace, product_grid, Scalar};
use crate::search::{pattern_search, PatternOptions, IMPROVEMENT_TOL};
use crate::solvers::Profile;
use crate::vi::{enumerate_solutions, natural_map_residual, SolutionSet, ViConfig, ViError};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("infeasible candidate for leader {}: {reason}", .leader + 1)]
    InfeasibleCandidate { leader: usize, reason: String },
    #[error("expected {expected} follower responses, got {found}")]
    ProfileLength { expected: usize, found: usize },
    #[error(
        "objective of leader {} is not smooth in {variable} at the candidate \
         (one-sided slopes {left:e} and {right:e})",
        .leader + 1
    )]
    KinkDetected {
        leader: usize,
        variable: String,
        left: f64,
        right: f64,
    },
    #[error(
        "lost the follower branch of leader {} at step {tau:e}: nearest solution is {distance:e} away",
        .leader + 1
    )]
    FollowerTrackingLost {
        leader: usize,
        tau: f64,
        distance: f64,
    },
    #[error(transparent)]
    Vi(#[from] ViError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig<T = f64> {
    /// Deviation grid points per leader coordinate.
    pub grid: usize,
    /// Pattern search from the best grid deviation.
    pub refine: bool,
    pub shrink: T,
    pub min_step: T,
    pub max_refine_iters: usize,
    /// Natural-map residual accepted for the candidate's follower responses.
    pub membership_tol: T,
    pub vi: ViConfig<T>,
}

impl<T: Scalar> Default for VerifyConfig<T> {
    fn default() -> Self {
        Self {
            grid: 101,
            refine: true,
            shrink: T::lit(0.5),
            min_step: T::lit(1e-9),
            max_refine_iters: 200,
            membership_tol: T::lit(1e-6),
            vi: ViConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerificationKind {
    Global,
    Pessimistic,
    Local,
}

/// Outcome of one leader's deviation search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaderGap<T = f64> {
    /// 0-based leader index.
    pub leader: usize,
    pub candidate_value: T,
    pub best_value: T,
    /// `candidate_value − best_value`, never negative.
    pub gap: T,
    /// Best deviation found; equals the candidate when nothing improves.
    pub witness_u: Vec<T>,
    pub witness_v: Vec<T>,
    pub probes: usize,
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport<T = f64> {
    pub kind: VerificationKind,
    pub x: Vec<T>,
    pub y: Vec<Vec<T>>,
    pub eps: T,
    pub max_gap: T,
    /// `max_gap <= eps`.
    pub verdict: bool,
    pub leaders: Vec<LeaderGap<T>>,
    /// Grid points (or samples) per leader coordinate.
    pub deviation_grid: usize,
    pub radius: Option<T>,
    /// Every follower enumeration reported itself exhaustive.
    pub exhaustive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Inner {
    Optimistic,
    Pessimistic,
}

#[derive(Debug, Clone)]
struct Scan<T> {
    value: T,
    u: Vec<T>,
    v: Vec<T>,
    probes: usize,
    exhaustive: bool,
    refined: bool,
}

fn with_block<T: Scalar>(x: &[T], block: std::ops::Range<usize>, u: &[T]) -> Vec<T> {
    let mut z = x.to_vec();
    z[block].copy_from_slice(u);
    z
}

/// S(x), or `None` when K(x) is empty or no solution was found.
fn solutions_at<T: Scalar>(
    g: &GameInstance<T>,
    x: &[T],
    vi: &ViConfig<T>,
) -> Result<Option<SolutionSet<T>>, VerifyError> {
    match enumerate_solutions(g, x, vi) {
        Ok(s) => Ok(Some(s)),
        Err(ViError::EmptySolutionSet { .. } | ViError::EmptySet(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Leader `i`'s value over the admitted members of `set`: the smallest
/// (optimistic) or largest (pessimistic) objective and its response.
fn response_value<T: Scalar>(
    g: &GameInstance<T>,
    i: usize,
    x: &[T],
    set: &SolutionSet<T>,
    inner: Inner,
    admit: impl Fn(&[T]) -> bool,
) -> Result<Option<(T, Vec<T>)>, VerifyError> {
    let mut best: Option<(T, &Vec<T>)> = None;
    for v in set.solutions.iter().filter(|v| admit(v)) {
        let val = g.leader_objective(i, x, v)?;
        let better = match best {
            None => true,
            Some((b, _)) => match inner {
                Inner::Optimistic => val < b,
                Inner::Pessimistic => val > b,
            },
        };
        if better {
            best = Some((val, v));
        }
    }
    Ok(best.map(|(val, v)| (val, v.clone())))
}

/// Leader `i` plays `u` against `x^{-i}`.
fn probe<T: Scalar>(
    g: &GameInstance<T>,
    i: usize,
    x: &[T],
    u: &[T],
    inner: Inner,
    vi: &ViConfig<T>,
    admit: &(dyn Fn(&[T], &[T]) -> bool + Sync),
) -> Result<Option<(T, Vec<T>, bool)>, VerifyError> {
    let z = with_block(x, g.block(i), u);
    let Some(set) = solutions_at(g, &z, vi)? else {
        return Ok(None);
    };
    Ok(response_value(g, i, &z, &set, inner, |v| admit(u, v))?
        .map(|(val, v)| (val, v, set.exhaustive)))
}

fn scan_leader<T: Scalar>(
    g: &GameInstance<T>,
    i: usize,
    x: &[T],
    points: &[Vec<T>],
    seed: (T, Vec<T>, Vec<T>),
    inner: Inner,
    vi: &ViConfig<T>,
    admit: &(dyn Fn(&[T], &[T]) -> bool + Sync),
) -> Result<Scan<T>, VerifyError> {
    let evals: Vec<Result<Option<(T, Vec<T>, bool)>, VerifyError>> = points
        .par_iter()
        .map(|u| probe(g, i, x, u, inner, vi, admit))
        .collect();
    let tol = T::lit(IMPROVEMENT_TOL);
    let mut best = Scan {
        value: seed.0,
        u: seed.1,
        v: seed.2,
        probes: points.len(),
        exhaustive: true,
        refined: false,
    };
    for (u, r) in points.iter().zip(evals) {
        if let Some((val, v, ex)) = r? {
            best.exhaustive &= ex;
            if val < best.value - tol {
                best.value = val;
                best.u = u.clone();
                best.v = v;
            }
        }
    }
    Ok(best)
}

fn refine_leader<T: Scalar>(
    g: &GameInstance<T>,
    i: usize,
    x: &[T],
    best: Scan<T>,
    inner: Inner,
    cfg: &VerifyConfig<T>,
) -> Result<Scan<T>, VerifyError> {
    let bounds = &g.leaders()[i].bounds;
    let opts = PatternOptions {
        shrink: cfg.shrink,
        min_step: cfg.min_step,
        max_iters: cfg.max_refine_iters,
    };
    let mut probes = 0;
    let mut exhaustive = true;
    let res = pattern_search(
        bounds,
        best.u.clone(),
        best.value,
        best.v.clone(),
        bounds.spacing(cfg.grid),
        &opts,
        |u| {
            probes += 1;
            let r = probe(g, i, x, u, inner, &cfg.vi, &|_, _| true)?;
            Ok::<_, VerifyError>(r.map(|(val, v, ex)| {
                exhaustive &= ex;
                (val, v)
            }))
        },
    )?;
    Ok(Scan {
        value: res.value,
        u: res.point,
        v: res.aux,
        probes: best.probes + probes,
        exhaustive: best.exhaustive && exhaustive,
        refined: res.improved,
    })
}

fn leader_gap<T: Scalar>(i: usize, candidate_value: T, s: Scan<T>) -> LeaderGap<T> {
    LeaderGap {
        leader: i,
        candidate_value,
        best_value: s.value,
        gap: (candidate_value - s.value).max(T::zero()),
        witness_u: s.u,
        witness_v: s.v,
        probes: s.probes,
        refined: s.refined,
    }
}

fn check_strategies<T: Scalar>(g: &GameInstance<T>, x: &[T]) -> Result<(), VerifyError> {
    if x.len() != g.x_dim() {
        return Err(ModelError::DimensionMismatch {
            what: "x",
            expected: g.x_dim(),
            found: x.len(),
        }
        .into());
    }
    for (i, leader) in g.leaders().iter().enumerate() {
        if !leader.bounds.contains(&x[g.block(i)]) {
            return Err(VerifyError::InfeasibleCandidate {
                leader: i,
                reason: "x_i is outside the strategy box".into(),
            });
        }
    }
    Ok(())
}

fn check_candidate<T: Scalar>(
    g: &GameInstance<T>,
    x: &[T],
    y: &[Vec<T>],
    tol: T,
) -> Result<(), VerifyError> {
    check_strategies(g, x)?;
    if y.len() != g.n_leaders() {
        return Err(VerifyError::ProfileLength {
            expected: g.n_leaders(),
            found: y.len(),
        });
    }
    for (i, yi) in y.iter().enumerate() {
        let reason = match natural_map_residual(g, x, yi) {
            Ok(r) if r <= tol => continue,
            Ok(r) => format!("y_i is not in S(x) (natural-map residual {r:e})"),
            Err(ViError::EmptySet(msg)) => format!("K(x) is empty: {msg}"),
            Err(e) => return Err(e.into()),
        };
        return Err(VerifyError::InfeasibleCandidate { leader: i, reason });
    }
    Ok(())
}

fn finish<T: Scalar>(
    kind: VerificationKind,
    x: &[T],
    y: Vec<Vec<T>>,
    eps: T,
    scans: Vec<(LeaderGap<T>, bool)>,
    deviation_grid: usize,
    radius: Option<T>,
) -> VerificationReport<T> {
    let max_gap = scans.iter().fold(T::zero(), |m, (l, _)| m.max(l.gap));
    let exhaustive = scans.iter().all(|(_, e)| *e);
    VerificationReport {
        kind,
        x: x.to_vec(),
        y,
        eps,
        max_gap,
        verdict: max_gap <= eps,
        leaders: scans.into_iter().map(|(l, _)| l).collect(),
        deviation_grid,
        radius,
        exhaustive,
    }
}

/// ε-global Nash check of the profile `(x, y)`.
///
/// For each leader, scans a grid on its strategy box against `x^{-i}`,
/// takes the best follower response at each deviation and, if enabled,
/// polishes the best deviation by pattern search. The candidate itself
/// seeds the search, so gaps are never negative.
pub fn verify_global<T: Scalar>(
    g: &GameInstance<T>,
    x: &[T],
    y: &[Vec<T>],
    eps: T,
    cfg: &VerifyConfig<T>,
) -> Result<VerificationReport<T>, VerifyError> {
    check_candidate(g, x, y, cfg.membership_tol)?;
    let mut scans = Vec::with_capacity(g.n_leaders());
    for (i, leader) in g.leaders().iter().enumerate() {
        let cand = g.leader_objective(i, x, &y[i])?;
        let points = leader.bounds.grid(cfg.grid);
        let seed = (cand, x[g.block(i)].to_vec(), y[i].clone());
        let mut s = scan_leader(
            g,
            i,
            x,
            &points,
            seed,
            Inner::Optimistic,
            &cfg.vi,
            &|_, _| true,
        )?;
        if cfg.refine {
            s = refine_leader(g, i, x, s, Inner::Optimistic, cfg)?;
        }
        let ex = s.exhaustive;
        scans.push((leader_gap(i, cand, s), ex));
    }
    Ok(finish(
        VerificationKind::Global,
        x,
        y.to_vec(),
        eps,
        scans,
        cfg.grid,
        None,
    ))
}

/// ε-equilibrium check for the pessimistic game: every leader values a
/// profile by the worst follower response in S, at the candidate and at
/// each deviation. The reported `y_i` is leader `i`'s worst response at `x`.
pub fn verify_pessimistic<T: Scalar>(
    g: &GameInstance<T>,
    x: &[T],
    eps: T,
    cfg: &VerifyConfig<T>,
) -> Result<VerificationReport<T>, VerifyError> {
    check_strategies(g, x)?;
    let set = solutions_at(g, x, &cfg.vi)?.ok_or_else(|| VerifyError::InfeasibleCandidate {
        leader: 0,
        reason: "S(x) is empty".into(),
    })?;
    let mut scans = Vec::with_capacity(g.n_leaders());
    let mut y = Vec::with_capacity(g.n_leaders());
    for (i, leader) in g.leaders().iter().enumerate() {
        let (cand, worst) = response_value(g, i, x, &set, Inner::Pessimistic, |_| true)?
            .expect("nonempty solution set");
        let points = leader.bounds.grid(cfg.grid);
        let seed = (cand, x[g.block(i)].to_vec(), worst.clone());
        let mut s = scan_leader(
            g,
            i,
            x,
            &points,
            seed,
            Inner::Pessimistic,
            &cfg.vi,
            &|_, _| true,
        )?;
        if cfg.refine {
            s = refine_leader(g, i, x, s, Inner::Pessimistic, cfg)?;
        }
        let ex = s.exhaustive && set.exhaustive;
        scans.push((leader_gap(i, cand, s), ex));
        y.push(worst);
    }
    Ok(finish(
        VerificationKind::Pessimistic,
        x,
        y,
        eps,
        scans,
        cfg.grid,
        None,
    ))
}

/// Local Nash check: deviations `(u_i, v_i)` are restricted to the ∞-norm
/// ball of `radius` around `(x_i, y_i)`. Each leader probes `samples`
/// evenly spaced points per coordinate of the ball intersected with its box.
pub fn verify_local<T: Scalar>(
    g: &GameInstance<T>,
    x: &[T],
    y: &[Vec<T>],
    radius: T,
    eps: T,
    samples: usize,
    cfg: &VerifyConfig<T>,
) -> Result<VerificationReport<T>, VerifyError> {
    check_candidate(g, x, y, cfg.membership_tol)?;
    let slack = T::lit(1e-12);
    let mut scans = Vec::with_capacity(g.n_leaders());
    for (i, leader) in g.leaders().iter().enumerate() {
        let xi = &x[g.block(i)];
        let axes: Vec<Vec<T>> = xi
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let lo = (c - radius).max(leader.bounds.lower[k]);
                let hi = (c + radius).min(leader.bounds.upper[k]);
                let mut axis = if lo < hi {
                    linspace(lo, hi, samples)
                } else {
                    vec![c]
                };
                if !axis.contains(&c) {
                    axis.push(c);
                    axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
                }
                axis
            })
            .collect();
        let points = product_grid(&axes);
        let yi = &y[i];
        let admit =
            |u: &[T], v: &[T]| inf_norm_diff(u, xi).max(inf_norm_diff(v, yi)) <= radius + slack;
        let cand = g.leader_objective(i, x, yi)?;
        let seed = (cand, xi.to_vec(), yi.clone());
        let s = scan_leader(g, i, x, &points, seed, Inner::Optimistic, &cfg.vi, &admit)?;
        let ex = s.exhaustive;
        scans.push((leader_gap(i, cand, s), ex));
    }
    Ok(finish(
        VerificationKind::Local,
        x,
        y.to_vec(),
        eps,
        scans,
        samples,
        Some(radius),
    ))
}

/// One candidate profile probed by the nonexistence certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonexistenceRow<T = f64> {
    pub x: Vec<T>,
    pub y: Vec<Vec<T>>,
    pub gaps: Vec<T>,
    pub max_gap: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonexistenceReport<T = f64> {
    pub grid: usize,
    pub eps: T,
    /// Smallest max-gap over all candidate profiles (∞ when none exists).
    pub delta_star: T,
    /// Profile attaining `delta_star`.
    pub candidate: Option<Profile<T>>,
    pub candidate_gaps: Vec<T>,
    pub grid_points: usize,
    /// Grid points where S(x) came back empty.
    pub empty_points: usize,
    pub profiles: usize,
    /// `delta_star <= eps`: some grid candidate is an ε-equilibrium.
    pub exists: bool,
    pub statement: String,
    pub exhaustive: bool,
    #[serde(skip)]
    pub rows: Vec<NonexistenceRow<T>>,
}

impl<T: Scalar> NonexistenceReport<T> {
    /// One line per candidate profile: `x..., y<i>_<w>..., max_gap`.
    pub fn write_csv<W: Write>(&self, g: &GameInstance<T>, out: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header: Vec<String> = g.x_names().to_vec();
        for i in 0..g.n_leaders() {
            header.extend(g.w_names().iter().map(|w| format!("y{}_{w}", i + 1)));
        }
        header.push("max_gap".into());
        wtr.write_record(&header)?;
        for row in &self.rows {
            let rec: Vec<String> = row
                .x
                .iter()
                .chain(row.y.iter().flatten())
                .chain(std::iter::once(&row.max_gap))
                .map(|v| format!("{v:e}"))
                .collect();
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Grid certificate that no ε-equilibrium exists among grid candidates.
///
/// Candidates are every point `x` of the `grid`-per-coordinate product grid
/// on X combined with every profile `y_i ∈ S(x)`. Each leader deviates over
/// the same grid (plus pattern-search refinement when enabled), so S is
/// enumerated once per grid point. The result only speaks about the probed
/// candidates.
pub fn certify_nonexistence_on_grid<T: Scalar>(
    g: &GameInstance<T>,
    grid: usize,
    eps: T,
    cfg: &VerifyConfig<T>,
) -> Result<NonexistenceReport<T>, VerifyError> {
    let axes = g.x_box().axes(grid);
    let lens: Vec<usize> = axes.iter().map(Vec::len).collect();
    let mut strides = vec![1usize; lens.len()];
    for k in (0..lens.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * lens[k + 1];
    }
    let points = product_grid(&axes);
    let sets: Vec<Option<SolutionSet<T>>> = points
        .par_iter()
        .map(|x| solutions_at(g, x, &cfg.vi))
        .collect::<Result<_, _>>()?;
    let mut exhaustive = sets.iter().flatten().all(|s| s.exhaustive);
    let tol = T::lit(IMPROVEMENT_TOL);
    let dcfg = VerifyConfig { grid, ..*cfg };

    // Best deviation of each leader against each x^{-i}, keyed by the grid
    // index with leader i's digits zeroed.
    let mut best: Vec<BTreeMap<usize, (T, Vec<T>)>> = Vec::with_capacity(g.n_leaders());
    for i in 0..g.n_leaders() {
        let key = |idx: usize| -> usize {
            g.block(i)
                .map(|k| (idx / strides[k]) % lens[k] * strides[k])
                .fold(idx, |acc, d| acc - d)
        };
        let dev: Vec<Option<(T, Vec<T>)>> = points
            .par_iter()
            .zip(&sets)
            .map(|(x, s)| match s {
                Some(s) => response_value(g, i, x, s, Inner::Optimistic, |_| true),
                None => Ok(None),
            })
            .collect::<Result<_, _>>()?;
        let mut grid_best: BTreeMap<usize, (usize, T, Vec<T>)> = BTreeMap::new();
        for (idx, d) in dev.into_iter().enumerate() {
            let Some((val, v)) = d else { continue };
            let slot = grid_best.entry(key(idx)).or_insert((idx, val, v.clone()));
            if val < slot.1 - tol {
                *slot = (idx, val, v);
            }
        }
        let refined: Vec<(usize, T, Vec<T>, bool)> = grid_best
            .into_iter()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(k, (idx, val, v))| {
                let x = &points[idx];
                if !cfg.refine {
                    return Ok((k, val, v, true));
                }
                let s = Scan {
                    value: val,
                    u: x[g.block(i)].to_vec(),
                    v,
                    probes: 0,
                    exhaustive: true,
                    refined: false,
                };
                let s = refine_leader(g, i, x, s, Inner::Optimistic, &dcfg)?;
                Ok((k, s.value, s.v, s.exhaustive))
            })
            .collect::<Result<_, VerifyError>>()?;
        let mut map = BTreeMap::new();
        for (k, val, v, ex) in refined {
            exhaustive &= ex;
            map.insert(k, (val, v));
        }
        best.push(map);
    }

    let n = g.n_leaders();
    let mut rows: Vec<NonexistenceRow<T>> = Vec::new();
    let mut arg: Option<usize> = None;
    for (idx, (x, s)) in points.iter().zip(&sets).enumerate() {
        let Some(s) = s else { continue };
        let mut member_gaps: Vec<Vec<T>> = Vec::with_capacity(n);
        for (i, map) in best.iter().enumerate() {
            let key = g
                .block(i)
                .map(|k| (idx / strides[k]) % lens[k] * strides[k])
                .fold(idx, |acc, d| acc - d);
            let b = map[&key].0;
            member_gaps.push(
                s.solutions
                    .iter()
                    .map(|v| Ok((g.leader_objective(i, x, v)? - b).max(T::zero())))
                    .collect::<Result<_, VerifyError>>()?,
            );
        }
        // Every combination y_i ∈ S(x), mixed radix over the members.
        let m = s.len();
        let total = m.pow(n as u32);
        for combo in 0..total {
            let picks: Vec<usize> = (0..n)
                .map(|i| combo / m.pow((n - 1 - i) as u32) % m)
                .collect();
            let gaps: Vec<T> = picks
                .iter()
                .enumerate()
                .map(|(i, &p)| member_gaps[i][p])
                .collect();
            let max_gap = gaps.iter().fold(T::zero(), |a, &b| a.max(b));
            let take = match arg {
                None => true,
                Some(a) => max_gap < rows[a].max_gap - tol,
            };
            rows.push(NonexistenceRow {
                x: x.clone(),
                y: picks.iter().map(|&p| s.solutions[p].clone()).collect(),
                gaps,
                max_gap,
            });
            if take {
                arg = Some(rows.len() - 1);
            }
        }
    }

    let (delta_star, candidate, candidate_gaps) = match arg {
        Some(a) => {
            let r: &NonexistenceRow<T> = &rows[a];
            (
                r.max_gap,
                Some(Profile {
                    x: r.x.clone(),
                    y: r.y.clone(),
                }),
                r.gaps.clone(),
            )
        }
        None => (T::infinity(), None, Vec::new()),
    };
    let exists = delta_star <= eps;
    let statement = if exists {
        format!(
            "an eps-equilibrium exists among grid candidates for eps >= {delta_star:e} (eps = {eps:e})"
        )
    } else {
        format!("no eps-equilibrium exists among grid candidates for eps < {delta_star:e}")
    };
    Ok(NonexistenceReport {
        grid,
        eps,
        delta_star,
        candidate,
        candidate_gaps,
        grid_points: points.len(),
        empty_points: sets.iter().filter(|s| s.is_none()).count(),
        profiles: rows.len(),
        exists,
        statement,
        exhaustive,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityConfig<T = f64> {
    /// Arc step sizes; the quotient limit is extrapolated from the two
    /// smallest feasible ones.
    pub steps: Vec<T>,
    pub tol: T,
    /// Largest accepted disagreement of one-sided slopes.
    pub kink_tol: T,
    /// Relative step of the one-sided slopes.
    pub kink_step: T,
    /// Tracking radius as a multiple of the step size.
    pub tracking_factor: T,
    pub membership_tol: T,
    pub vi: ViConfig<T>,
}

impl<T: Scalar> Default for StationarityConfig<T> {
    fn default() -> Self {
        Self {
            steps: vec![T::lit(1e-2), T::lit(1e-3), T::lit(1e-4)],
            tol: T::lit(1e-4),
            kink_tol: T::lit(1e-4),
            kink_step: T::lit(1e-6),
            tracking_factor: T::lit(10.0),
            membership_tol: T::lit(1e-6),
            vi: ViConfig::default(),
        }
    }
}

/// Difference quotients of one leader's objective along `x_i + τ·(±e_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcQuotient<T = f64> {
    pub leader: usize,
    pub variable: String,
    /// +1 or −1.
    pub direction: i8,
    pub steps: Vec<T>,
    pub quotients: Vec<T>,
    /// Extrapolated limit as the step goes to zero.
    pub estimate: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport<T = f64> {
    pub x: Vec<T>,
    pub y: Vec<Vec<T>>,
    pub arcs: Vec<ArcQuotient<T>>,
    /// Smallest arc estimate (∞ when no direction is admissible).
    pub min_quotient: T,
    pub tol: T,
    /// `min_quotient >= -tol`.
    pub verdict: bool,
    /// S was multivalued at the candidate or along some arc, so the sampled
    /// arcs may miss tangent directions.
    pub approximate: bool,
}

fn check_kinks<T: Scalar>(
    g: &GameInstance<T>,
    i: usize,
    x: &[T],
    w: &[T],
    cfg: &StationarityConfig<T>,
) -> Result<(), VerifyError> {
    let f = |x: &[T], w: &[T]| g.leader_objective(i, x, w);
    let f0 = f(x, w)?;
    let coords = g
        .block(i)
        .map(|k| (true, k, g.x_names()[k].clone()))
        .chain((0..w.len()).map(|k| (false, k, g.w_names()[k].clone())));
    for (in_x, k, name) in coords {
        let base = if in_x { x[k] } else { w[k] };
        let h = cfg.kink_step * T::one().max(base.abs());
        let shifted = |d: T| -> Result<T, VerifyError> {
            let (mut xs, mut ws) = (x.to_vec(), w.to_vec());
            if in_x {
                xs[k] = base + d;
            } else {
                ws[k] = base + d;
            }
            Ok(f(&xs, &ws)?)
        };
        let right = (shifted(h)? - f0) / h;
        let left = (f0 - shifted(-h)?) / h;
        if (right - left).abs() > cfg.kink_tol {
            return Err(VerifyError::KinkDetected {
                leader: i,
                variable: name,
                left: left.as_f64(),
                right: right.as_f64(),
            });
        }
    }
    Ok(())
}

/// Nash B-stationarity along sampled feasible arcs.
///
/// For each leader and each signed coordinate direction that stays inside
/// the leader's box, the follower is re-solved along `x_i + τ·d` and the
/// solution nearest to `y_i` is tracked. The leader's difference quotients
/// are extrapolated to `τ → 0`; the candidate is B-stationary when no
/// estimate falls below `−tol`.
pub fn check_nash_b_stationarity<T: Scalar>(
    g: &GameInstance<T>,
    x: &[T],
    y: &[Vec<T>],
    cfg: &StationarityConfig<T>,
) -> Result<StationarityReport<T>, VerifyError> {
    check_candidate(g, x, y, cfg.membership_tol)?;
    let here = solutions_at(g, x, &cfg.vi)?.ok_or_else(|| VerifyError::InfeasibleCandidate {
        leader: 0,
        reason: "S(x) is empty".into(),
    })?;
    let mut approximate = here.len() > 1;
    let mut steps = cfg.steps.clone();
    steps.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let mut arcs = Vec::new();
    for (i, leader) in g.leaders().iter().enumerate() {
        check_kinks(g, i, x, &y[i], cfg)?;
        let base_v = here.nearest(&y[i]).expect("nonempty solution set").to_vec();
        let base = g.leader_objective(i, x, &base_v)?;
        for (local, k) in g.block(i).enumerate() {
            for direction in [1i8, -1] {
                let d = T::from_i8(direction).unwrap();
                let feasible: Vec<T> = steps
                    .iter()
                    .copied()
                    .filter(|&t| {
                        let u = x[k] + d * t;
                        leader.bounds.lower[local] <= u && u <= leader.bounds.upper[local]
                    })
                    .collect();
                if feasible.is_empty() {
                    continue;
                }
                let mut quotients = Vec::with_capacity(feasible.len());
                for &tau in &feasible {
                    let mut u = x.to_vec();
                    u[k] = x[k] + d * tau;
                    let set = solutions_at(g, &u, &cfg.vi)?;
                    let nearest = set.as_ref().and_then(|s| s.nearest(&y[i]));
                    let distance = nearest.map_or(T::infinity(), |v| inf_norm_diff(v, &y[i]));
                    if !(distance <= cfg.tracking_factor * tau) {
                        return Err(VerifyError::FollowerTrackingLost {
                            leader: i,
                            tau: tau.as_f64(),
                            distance: distance.as_f64(),
                        });
                    }
                    let set = set.expect("tracked solution");
                    approximate |= set.len() > 1;
                    let v = set.nearest(&y[i]).expect("tracked solution");
                    quotients.push((g.leader_objective(i, &u, v)? - base) / tau);
                }
                let n = quotients.len();
                let estimate = if n >= 2 {
                    let r = feasible[n - 2] / feasible[n - 1];
                    (r * quotients[n - 1] - quotients[n - 2]) / (r - T::one())
                } else {
                    quotients[0]
                };
                arcs.push(ArcQuotient {
                    leader: i,
                    variable: g.x_names()[k].clone(),
                    direction,
                    steps: feasible,
                    quotients,
                    estimate,
                });
            }
        }
    }
    let min_quotient = arcs.iter().fold(T::infinity(), |m, a| m.min(a.estimate));
    Ok(StationarityReport {
        x: x.to_vec(),
        y: y.to_vec(),
        verdict: min_quotient >= -cfg.tol,
        min_quotient,
        tol: cfg.tol,
        arcs,
        approximate,
    })
}
