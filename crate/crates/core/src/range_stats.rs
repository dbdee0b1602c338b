//! Range and maximal-distance statistics, exact range means, and the Monte
//! Carlo harness.
//!
//! Trials draw from per-trial streams and summaries are merged as exact
//! integer sums, so results do not depend on how trials are split across
//! workers.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::lamplighter::{LamplighterBridgeSampler, DEFAULT_MAX_ATTEMPTS};
use crate::bridge::{sample_bridge, sample_walk, BackwardTable};
use crate::error::{Error, Result};
use crate::kernels::{first_return_probabilities, return_probabilities, FirstReturnSequence, ReturnSequence};
use crate::numeric::slope;
use crate::rng::trial_rng;
use crate::walk_models::{ModelKind, Vertex, WalkModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Unconditioned,
    Bridge,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Unconditioned => "unconditioned",
            Mode::Bridge => "bridge",
        })
    }
}

/// `R_n = |{S_0, …, S_{n-1}}|`; the final vertex is not counted.
pub fn range_of_path(model: &WalkModel, path: &[Vertex]) -> usize {
    let n = path.len().saturating_sub(1);
    let mut seen = HashSet::with_capacity(n);
    for v in &path[..n] {
        seen.insert(model.canonical_key(v));
    }
    seen.len()
}

/// `D_n = max_k d(e, S_k)` over the whole path.
pub fn max_distance_of_path(model: &WalkModel, path: &[Vertex]) -> Result<usize> {
    let mut best = 0;
    for v in path {
        best = best.max(model.graph_distance(v)?);
    }
    Ok(best)
}

/// `E R_n = Σ_{k<n} (1 - F_k)` by a first-entry decomposition.
pub fn exact_unconditioned_range_mean(f: &FirstReturnSequence, n: usize) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    if f.max_index() + 1 < n {
        return Err(Error::InsufficientData {
            needed: n - 1,
            have: f.max_index(),
        });
    }
    Ok((0..n).map(|k| 1.0 - f.partial[k]).sum())
}

/// `E{R_n | S_n = e} = n + 1 - (1/u_n) Σ_{r=1}^{n} (n - r + 1) f_r u_{n-r}`, by a
/// last-exit decomposition. Ratios are taken in log space.
pub fn exact_bridge_range_mean(
    u: &ReturnSequence,
    f: &FirstReturnSequence,
    n: usize,
) -> Result<f64> {
    let have = u.max_index().min(f.max_index());
    if n > have {
        return Err(Error::InsufficientData { needed: n, have });
    }
    let log_un = u.log_u[n];
    if !log_un.is_finite() {
        return Err(Error::Period {
            n,
            period: u.period,
        });
    }
    let mut acc = 0.0;
    for r in 1..=n {
        let l = f.log_f[r] + u.log_u[n - r];
        if l.is_finite() {
            acc += (n - r + 1) as f64 * (l - log_un).exp();
        }
    }
    Ok(n as f64 + 1.0 - acc)
}

/// Exact mean of `R_n / n` from the kernels, when they are within budget.
pub fn exact_range_mean_ratio(model: &WalkModel, n: usize, mode: Mode) -> Result<f64> {
    let u = return_probabilities(model, n)?;
    let f = first_return_probabilities(&u)?;
    let mean = match mode {
        Mode::Unconditioned => exact_unconditioned_range_mean(&f, n)?,
        Mode::Bridge => exact_bridge_range_mean(&u, &f, n)?,
    };
    Ok(mean / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeSummary {
    pub model: String,
    pub n: usize,
    pub mode: Mode,
    pub trials: u64,
    pub seed: u64,
    /// Mean of `R_n / n`.
    pub mean_range: f64,
    /// Sample variance of `R_n / n`.
    pub var_range: f64,
    /// `1.96 √(var / trials)`.
    pub ci95: f64,
    /// Mean of `D_n`; `None` when the word metric has no closed form.
    pub mean_maxdist: Option<f64>,
}

impl RangeSummary {
    pub const CSV_HEADER: &'static str =
        "model,n,mode,trials,seed,mean_range,var_range,ci95,mean_maxdist";
}

/// Run-time knobs that do not change results.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExperimentOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Rejection attempts per lamplighter bridge.
    pub max_attempts: u64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            workers: None,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

/// Draws walks or bridges of one fixed length.
#[derive(Clone, Debug)]
pub enum PathSampler {
    Walk { n: usize },
    Bridge(BackwardTable),
    Lamplighter(LamplighterBridgeSampler),
}

impl PathSampler {
    pub fn new(model: &WalkModel, n: usize, mode: Mode, max_attempts: u64) -> Result<Self> {
        match (mode, model.kind()) {
            (Mode::Unconditioned, _) => Ok(PathSampler::Walk { n }),
            (Mode::Bridge, ModelKind::Lamplighter) => Ok(PathSampler::Lamplighter(
                LamplighterBridgeSampler::new(model.dim().unwrap(), n, max_attempts)?,
            )),
            (Mode::Bridge, _) => Ok(PathSampler::Bridge(BackwardTable::build(model, n)?)),
        }
    }

    /// Path of trial `trial` under master seed `seed`.
    pub fn sample(&self, model: &WalkModel, seed: u64, trial: u64) -> Result<Vec<Vertex>> {
        let mut rng = trial_rng(seed, trial);
        Ok(match self {
            PathSampler::Walk { n } => sample_walk(model, *n, &mut rng).vertices,
            PathSampler::Bridge(table) => sample_bridge(model, table, &mut rng)?.vertices,
            PathSampler::Lamplighter(s) => s.sample(&mut rng)?.vertices,
        })
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Sums {
    count: u64,
    range: u128,
    range_sq: u128,
    dist: u128,
}

impl Sums {
    fn merge(self, o: Sums) -> Sums {
        Sums {
            count: self.count + o.count,
            range: self.range + o.range,
            range_sq: self.range_sq + o.range_sq,
            dist: self.dist + o.dist,
        }
    }
}

/// Per-trial range and maximal distance, in trial order.
pub fn sample_path_stats(
    model: &WalkModel,
    n: usize,
    trials: u64,
    mode: Mode,
    seed: u64,
) -> Result<Vec<(usize, Option<usize>)>> {
    let sampler = PathSampler::new(model, n, mode, DEFAULT_MAX_ATTEMPTS)?;
    let with_dist = model.has_fast_distance();
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let path = sampler.sample(model, seed, t)?;
            let d = if with_dist {
                Some(max_distance_of_path(model, &path)?)
            } else {
                None
            };
            Ok((range_of_path(model, &path), d))
        })
        .collect()
}

pub fn mc_range_experiment(
    model: &WalkModel,
    n: usize,
    trials: u64,
    mode: Mode,
    seed: u64,
) -> Result<RangeSummary> {
    mc_range_experiment_with(model, n, trials, mode, seed, ExperimentOptions::default())
}

pub fn mc_range_experiment_with(
    model: &WalkModel,
    n: usize,
    trials: u64,
    mode: Mode,
    seed: u64,
    options: ExperimentOptions,
) -> Result<RangeSummary> {
    if trials == 0 {
        return Err(Error::InvalidSpec("trials must be >= 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidSpec("n must be >= 1".into()));
    }
    let sampler = PathSampler::new(model, n, mode, options.max_attempts)?;
    let with_dist = model.has_fast_distance();
    let run = || -> Result<Sums> {
        (0..trials)
            .into_par_iter()
            .map(|t| -> Result<Sums> {
                let path = sampler.sample(model, seed, t)?;
                let r = range_of_path(model, &path) as u128;
                let d = if with_dist {
                    max_distance_of_path(model, &path)? as u128
                } else {
                    0
                };
                Ok(Sums {
                    count: 1,
                    range: r,
                    range_sq: r * r,
                    dist: d,
                })
            })
            .try_reduce(Sums::default, |a, b| Ok(a.merge(b)))
    };
    let sums = match options.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let t = sums.count as f64;
    let nf = n as f64;
    let mean_range = sums.range as f64 / (t * nf);
    // T·Σr² - (Σr)² is exact in integers
    let spread = (sums.count as u128 * sums.range_sq - sums.range * sums.range) as f64;
    let var_range = if sums.count > 1 {
        spread / (t * (t - 1.0) * nf * nf)
    } else {
        0.0
    };
    Ok(RangeSummary {
        model: model.id().to_string(),
        n,
        mode,
        trials,
        seed,
        mean_range,
        var_range,
        ci95: 1.96 * (var_range / t).sqrt(),
        mean_maxdist: with_dist.then(|| sums.dist as f64 / t),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Exact mean of `R_n / n`, when the kernels are within budget.
    pub exact: Option<f64>,
    pub mc: Option<RangeSummary>,
    /// `exact - limit` (or the Monte Carlo mean when no exact value exists).
    pub gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Supplied limit of `R_n / n`, or `None` when unknown.
    pub limit: Option<f64>,
    /// Log-log slope of the mean range against `n`.
    pub slope: Option<f64>,
}

/// Exact (and optionally Monte Carlo) `R_n / n` along `n_grid`, compared with `limit`.
pub fn convergence_table(
    model: &WalkModel,
    n_grid: &[usize],
    mode: Mode,
    limit: Option<f64>,
    mc: Option<(u64, u64)>,
) -> Result<ConvergenceTable> {
    let n_top = n_grid.iter().copied().max().unwrap_or(0);
    let kernels = return_probabilities(model, n_top)
        .and_then(|u| first_return_probabilities(&u).map(|f| (u, f)))
        .ok();
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let exact = match &kernels {
            Some((u, f)) => Some(
                match mode {
                    Mode::Unconditioned => exact_unconditioned_range_mean(f, n)?,
                    Mode::Bridge => exact_bridge_range_mean(u, f, n)?,
                } / n as f64,
            ),
            None => None,
        };
        let mc = match mc {
            Some((trials, seed)) => Some(mc_range_experiment(model, n, trials, mode, seed)?),
            None => None,
        };
        let value = exact.or(mc.as_ref().map(|s| s.mean_range));
        let gap = match (value, limit) {
            (Some(v), Some(l)) => Some(v - l),
            _ => None,
        };
        rows.push(ConvergenceRow { n, exact, mc, gap });
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            let v = r.exact.or(r.mc.as_ref().map(|s| s.mean_range))?;
            Some(((r.n as f64).ln(), (v * r.n as f64).ln()))
        })
        .collect();
    let slope = (points.len() >= 2).then(|| {
        let x: Vec<f64> = points.iter().map(|p| p.0).collect();
        let y: Vec<f64> = points.iter().map(|p| p.1).collect();
        slope(&x, &y)
    });
    Ok(ConvergenceTable { rows, limit, slope })
}
