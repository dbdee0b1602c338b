//! Return and first-return kernels.
//!
//! `u_n` is the probability of being back at the identity after `n` steps and
//! `f_n` the probability that the first return happens at step `n`. Sequences
//! carry natural-log companions so that ratios stay accurate after the raw
//! values underflow.

mod diagnostics;
mod tree;

use log::warn;
use rayon::prelude::*;

use crate::bridge::projection::projection_range_tables;
use crate::error::{Error, Result};
use crate::grid::LatticeGrid;
use crate::numeric::{least_squares, power_tail_sum};
use crate::rng::{sample_weighted, trial_rng};
use crate::walk_models::{ModelKind, WalkModel};

pub use diagnostics::{
    ratio_diagnostics, verify_moment_properties, InequalityFamily, MomentViolation,
    RatioDiagnostics,
};
pub use tree::TreeClosedForms;

/// Largest `n` for which exact lamplighter return probabilities are computed.
pub const LAMPLIGHTER_EXACT_MAX: usize = 120;
/// Largest `n` for the tree height recursion.
pub const TREE_EXACT_MAX: usize = 200_000;

/// Deconvolution tolerance: `f_n` in `[-tol, 0)` is clamped to zero.
const CLAMP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ReturnSequence {
    /// `u[0..=N]`, with `u[0] = 1`.
    pub u: Vec<f64>,
    /// `ln u_n`, `-inf` where `u_n = 0`. Exact even where `u_n` underflows.
    pub log_u: Vec<f64>,
    pub period: usize,
    /// Standard errors for Monte Carlo estimates; `None` for exact sequences.
    pub std_err: Option<Vec<f64>>,
}

impl ReturnSequence {
    pub fn from_values(u: Vec<f64>, period: usize) -> Self {
        let log_u = u.iter().map(|x| x.ln()).collect();
        Self {
            u,
            log_u,
            period,
            std_err: None,
        }
    }

    pub fn from_logs(log_u: Vec<f64>, period: usize) -> Self {
        let u = log_u.iter().map(|x| x.exp()).collect();
        Self {
            u,
            log_u,
            period,
            std_err: None,
        }
    }

    /// Largest available index `N`.
    pub fn max_index(&self) -> usize {
        self.u.len() - 1
    }

    pub fn truncate(&self, n_max: usize) -> Self {
        let keep = (n_max + 1).min(self.u.len());
        Self {
            u: self.u[..keep].to_vec(),
            log_u: self.log_u[..keep].to_vec(),
            period: self.period,
            std_err: self.std_err.as_ref().map(|s| s[..keep].to_vec()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FirstReturnSequence {
    /// `f[0..=N]`; `f[0] = 0` by convention.
    pub f: Vec<f64>,
    pub log_f: Vec<f64>,
    /// `partial[k] = F_k = Σ_{r ≤ k} f_r`.
    pub partial: Vec<f64>,
    pub period: usize,
    /// Indices whose small negative round-off was clamped to zero.
    pub clamped: Vec<usize>,
}

impl FirstReturnSequence {
    pub fn from_logs(log_f: Vec<f64>, period: usize) -> Self {
        let f: Vec<f64> = log_f.iter().map(|x| x.exp()).collect();
        let partial = partial_sums(&f);
        Self {
            f,
            log_f,
            partial,
            period,
            clamped: Vec::new(),
        }
    }

    pub fn max_index(&self) -> usize {
        self.f.len() - 1
    }
}

fn partial_sums(f: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    f.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// Exact `u_0..u_N`.
///
/// Trees use the height recursion, lattices a cropped convolution over the box
/// of points that can still return by time `N`, and the one-dimensional
/// lamplighter the projected range recursion `u_n = Σ_r 2^{-r} q_r`.
pub fn return_probabilities(model: &WalkModel, n_max: usize) -> Result<ReturnSequence> {
    match model.kind() {
        ModelKind::Tree => {
            if n_max > TREE_EXACT_MAX {
                return Err(Error::Budget {
                    what: "tree return probabilities",
                    requested: n_max as u64,
                    limit: TREE_EXACT_MAX as u64,
                });
            }
            Ok(tree_returns(model.branching().unwrap(), n_max))
        }
        ModelKind::Lattice => lattice_returns(model, n_max),
        ModelKind::Lamplighter => {
            if model.dim() != Some(1) {
                return Err(Error::Budget {
                    what: "exact lamplighter return probabilities (only d = 1; request Monte Carlo)",
                    requested: n_max as u64,
                    limit: 0,
                });
            }
            if n_max > LAMPLIGHTER_EXACT_MAX {
                return Err(Error::Budget {
                    what: "exact lamplighter return probabilities (request Monte Carlo)",
                    requested: n_max as u64,
                    limit: LAMPLIGHTER_EXACT_MAX as u64,
                });
            }
            let tables = projection_range_tables(n_max)?;
            let mut u = vec![0.0; n_max + 1];
            for t in &tables {
                u[t.n] = t.lamplighter_return_probability();
            }
            Ok(ReturnSequence::from_values(u, 2))
        }
    }
}

/// Largest `N · max_jump` accepted by the lattice convolution, per dimension.
pub fn lattice_exact_limit(dim: usize) -> usize {
    match dim {
        1 => 50_000,
        2 => 2_000,
        3 => 400,
        _ => 60,
    }
}

fn lattice_returns(model: &WalkModel, n_max: usize) -> Result<ReturnSequence> {
    let dim = model.dim().unwrap();
    let jmax = model.max_jump();
    let limit = lattice_exact_limit(dim);
    let reach = n_max as u64 * jmax as u64;
    if reach > limit as u64 {
        return Err(Error::Budget {
            what: "lattice return probabilities (N x max jump)",
            requested: reach,
            limit: limit as u64,
        });
    }
    let law = model.lattice_law().unwrap();
    let mut grid = LatticeGrid::delta(dim);
    let mut u = vec![1.0];
    for m in 1..=n_max {
        let radius = (m.min(n_max - m) as i64) * jmax;
        grid = grid.step(&law, radius);
        u.push(grid.origin());
    }
    Ok(ReturnSequence::from_values(u, model.period()))
}

fn tree_returns(b: u32, n_max: usize) -> ReturnSequence {
    let down = 1.0 / (b as f64 + 1.0);
    let up = 1.0 - down;
    // g[h] ∝ G_m(h) = P_h(T_m = 0), truncated to the heights that matter by N
    let mut g = vec![1.0];
    let mut log_scale = 0.0;
    let mut log_u = vec![0.0];
    for m in 1..=n_max {
        let len = m.min(n_max - m) + 1;
        let mut next = vec![0.0; len];
        next[0] = g.get(1).copied().unwrap_or(0.0);
        for h in 1..len {
            let below = g.get(h - 1).copied().unwrap_or(0.0);
            let above = g.get(h + 1).copied().unwrap_or(0.0);
            next[h] = down * below + up * above;
        }
        let top = next.iter().copied().fold(0.0, f64::max);
        if top > 0.0 {
            for x in &mut next {
                *x /= top;
            }
            log_scale += top.ln();
        }
        log_u.push(if next[0] > 0.0 {
            next[0].ln() + log_scale
        } else {
            f64::NEG_INFINITY
        });
        g = next;
    }
    ReturnSequence::from_logs(log_u, 2)
}

/// Monte Carlo estimate of `u_0..u_N` with binomial standard errors.
pub fn return_probabilities_mc(
    model: &WalkModel,
    n_max: usize,
    trials: u64,
    seed: u64,
) -> Result<ReturnSequence> {
    if trials == 0 {
        return Err(Error::InvalidSpec("Monte Carlo needs at least one trial".into()));
    }
    let identity = model.canonical_key(&model.identity());
    let counts = (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; n_max + 1],
            |mut acc, trial| {
                let mut rng = trial_rng(seed, trial);
                let mut v = model.identity();
                acc[0] += 1;
                for n in 1..=n_max {
                    let steps = model.steps_from(&v);
                    let weights: Vec<f64> = steps.iter().map(|(_, p)| *p).collect();
                    let i = sample_weighted(&weights, &mut rng);
                    v = steps.into_iter().nth(i).unwrap().0;
                    if model.canonical_key(&v) == identity {
                        acc[n] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; n_max + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let t = trials as f64;
    let u: Vec<f64> = counts.iter().map(|&c| c as f64 / t).collect();
    let se = u.iter().map(|&p| (p * (1.0 - p) / t).sqrt()).collect();
    let mut seq = ReturnSequence::from_values(u, model.period());
    seq.std_err = Some(se);
    Ok(seq)
}

/// Renewal deconvolution `f_n = u_n - Σ_{k<n} f_k u_{n-k}`.
///
/// When the sequence decays far enough to underflow, both sequences are
/// multiplied by `s^n` first (the renewal identity is invariant under this)
/// and the log companions are recovered exactly.
pub fn first_return_probabilities(u: &ReturnSequence) -> Result<FirstReturnSequence> {
    if u.u.is_empty() || (u.u[0] - 1.0).abs() > 1e-15 {
        return Err(Error::InvalidSpec("return sequence must start with u_0 = 1".into()));
    }
    let n_max = u.max_index();
    let p = u.period.max(1);
    let tail_log = u.log_u[n_max];
    let log_s = if n_max > 0 && tail_log.is_finite() && tail_log < -600.0 {
        -tail_log / n_max as f64
    } else {
        0.0
    };
    let scaled_u: Vec<f64> = u
        .log_u
        .iter()
        .enumerate()
        .map(|(n, l)| (l + n as f64 * log_s).exp())
        .collect();
    let mut g = vec![0.0; n_max + 1];
    let mut clamped = Vec::new();
    for n in 1..=n_max {
        if n % p != 0 {
            continue;
        }
        let mut acc = scaled_u[n];
        let mut k = p;
        while k < n {
            acc -= g[k] * scaled_u[n - k];
            k += p;
        }
        if acc < 0.0 {
            if acc < -CLAMP_TOL {
                return Err(Error::NumericalInstability {
                    index: n,
                    value: acc,
                });
            }
            warn!("clamping f_{n} = {acc:e} to zero");
            clamped.push(n);
            acc = 0.0;
        }
        g[n] = acc;
    }
    let log_f: Vec<f64> = g
        .iter()
        .enumerate()
        .map(|(n, &x)| x.ln() - n as f64 * log_s)
        .collect();
    let f: Vec<f64> = log_f.iter().map(|x| x.exp()).collect();
    let partial = partial_sums(&f);
    Ok(FirstReturnSequence {
        f,
        log_f,
        partial,
        period: p,
        clamped,
    })
}

/// Asymptotic profile of the first-return tail used to extrapolate `F`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailModel {
    /// Recurrent or unknown: no tail is estimated.
    None,
    /// `f_n ≈ (a + b/n) ρ^{-n} n^{-γ}`, for `ρ > 1`.
    Geometric { rho: f64, gamma: f64 },
    /// `f_n ≈ (a + b/n) n^{-exponent}`, for `ρ = 1`.
    Polynomial { exponent: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EscapeEstimate {
    /// `Σ_{n ≤ N} f_n`.
    pub partial: f64,
    /// Fitted estimate of `Σ_{n > N} f_n`, reported separately.
    pub tail: Option<f64>,
    /// Partial sums moved by at most `1e-6` over the last quarter of the window.
    pub conclusive: bool,
}

impl EscapeEstimate {
    /// Partial sum plus the fitted tail, when one was fitted.
    pub fn extrapolated(&self) -> f64 {
        self.partial + self.tail.unwrap_or(0.0)
    }
}

/// Return probability `F = Σ f_n` from a truncated first-return sequence.
pub fn escape_probability(f: &FirstReturnSequence, tail: TailModel) -> EscapeEstimate {
    let n_max = f.max_index();
    let partial = f.partial[n_max];
    let quarter = f.partial[(3 * n_max) / 4];
    let conclusive = (partial - quarter).abs() <= 1e-6;
    let tail = match tail {
        TailModel::None => None,
        TailModel::Geometric { rho, gamma } => fit_tail(f, rho, gamma),
        TailModel::Polynomial { exponent } => fit_tail(f, 1.0, exponent),
    };
    EscapeEstimate {
        partial,
        tail,
        conclusive,
    }
}

/// Fits `f_n ρ^n n^γ ≈ a + b/n` on the upper half of the window and sums the profile beyond it.
fn fit_tail(f: &FirstReturnSequence, rho: f64, gamma: f64) -> Option<f64> {
    let n_max = f.max_index();
    let p = f.period.max(1);
    let mut design = Vec::new();
    let mut y = Vec::new();
    let mut n = (n_max / 2 / p).max(1) * p;
    while n <= n_max {
        if f.log_f[n].is_finite() {
            let nf = n as f64;
            design.push(vec![1.0, 1.0 / nf]);
            y.push((f.log_f[n] + nf * rho.ln() + gamma * nf.ln()).exp());
        }
        n += p;
    }
    if design.len() < 4 {
        return None;
    }
    let beta = least_squares(&design, &y);
    Some(power_tail_sum(beta[0], beta[1], gamma, 1.0 / rho, n_max, p))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadiusCorrection {
    /// `ln u_m ≈ c - m ln ρ`, extrapolated in `1/m`.
    None,
    /// `ln u_m ≈ c - m ln ρ - γ ln m` with `γ` fitted.
    Polynomial,
}

/// Spectral radius fit plus optional generating-function values.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratingSummary {
    /// Radius of convergence estimate, clamped to `≥ 1`.
    pub rho: f64,
    /// Unclamped fit result.
    pub raw_rho: f64,
    /// Fitted polynomial correction exponent.
    pub gamma: Option<f64>,
    /// Inclusive index window used by the fit.
    pub fit_window: (usize, usize),
    pub residual_rms: f64,
    /// Non-fatal diagnostics.
    pub flags: Vec<String>,
    pub f_at_rho: Option<SeriesValue>,
}

impl GeneratingSummary {
    /// Evaluates `F(ρ)` from `f` truncated at `k`.
    pub fn with_f_at_rho(mut self, f: &FirstReturnSequence, k: usize) -> Result<Self> {
        let value = generating_value(f, self.rho, k, Some(&self))?;
        self.f_at_rho = Some(value);
        Ok(self)
    }
}

pub fn spectral_radius_estimate(
    u: &ReturnSequence,
    correction: RadiusCorrection,
) -> Result<GeneratingSummary> {
    let p = u.period.max(1);
    let idx: Vec<usize> = (1..=u.max_index())
        .filter(|n| n % p == 0 && u.log_u[*n].is_finite())
        .collect();
    if idx.len() < 50 {
        return Err(Error::InsufficientData {
            needed: 50,
            have: idx.len(),
        });
    }
    let window = &idx[idx.len() / 2..];
    let (raw_rho, gamma, residuals) = match correction {
        RadiusCorrection::Polynomial => {
            let design: Vec<Vec<f64>> = window
                .iter()
                .map(|&m| vec![1.0, m as f64, (m as f64).ln()])
                .collect();
            let y: Vec<f64> = window.iter().map(|&m| u.log_u[m]).collect();
            let beta = least_squares(&design, &y);
            let res: Vec<f64> = design
                .iter()
                .zip(&y)
                .map(|(row, yy)| yy - (beta[0] + beta[1] * row[1] + beta[2] * row[2]))
                .collect();
            ((-beta[1]).exp(), Some(-beta[2]), res)
        }
        RadiusCorrection::None => {
            let design: Vec<Vec<f64>> =
                window.iter().map(|&m| vec![1.0, 1.0 / m as f64]).collect();
            let y: Vec<f64> = window.iter().map(|&m| -u.log_u[m] / m as f64).collect();
            let beta = least_squares(&design, &y);
            let res: Vec<f64> = design
                .iter()
                .zip(&y)
                .map(|(row, yy)| yy - (beta[0] + beta[1] * row[1]))
                .collect();
            (beta[0].exp(), None, res)
        }
    };
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    let mut flags = Vec::new();
    if raw_rho < 1.0 - 1e-9 {
        flags.push(format!("fitted rho {raw_rho} < 1 clamped to 1"));
    }
    let sign_changes = residuals
        .windows(2)
        .filter(|w| w[0].signum() != w[1].signum())
        .count();
    if sign_changes > 2 {
        flags.push(format!("non-monotone residuals ({sign_changes} sign changes)"));
    }
    Ok(GeneratingSummary {
        rho: raw_rho.max(1.0),
        raw_rho,
        gamma,
        fit_window: (window[0], *window.last().unwrap()),
        residual_rms: rms,
        flags,
        f_at_rho: None,
    })
}

/// Coefficients of a power series in log form.
pub trait SeriesCoefficients {
    fn log_coefficient(&self, n: usize) -> f64;
    fn max_index(&self) -> usize;
    fn period(&self) -> usize;
}

impl SeriesCoefficients for ReturnSequence {
    fn log_coefficient(&self, n: usize) -> f64 {
        self.log_u[n]
    }
    fn max_index(&self) -> usize {
        self.u.len() - 1
    }
    fn period(&self) -> usize {
        self.period
    }
}

impl SeriesCoefficients for FirstReturnSequence {
    fn log_coefficient(&self, n: usize) -> f64 {
        if n == 0 {
            f64::NEG_INFINITY
        } else {
            self.log_f[n]
        }
    }
    fn max_index(&self) -> usize {
        self.f.len() - 1
    }
    fn period(&self) -> usize {
        self.period
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesValue {
    pub z: f64,
    /// Truncation index `K`.
    pub terms: usize,
    /// `Σ_{n ≤ K} c_n z^n`.
    pub value: f64,
    /// Estimated `Σ_{n > K} c_n z^n` from the fitted `n^{-γ} ρ^{-n}` profile.
    pub tail_bound: Option<f64>,
}

/// Truncated series `Σ_{n ≤ K} c_n z^n`, with a tail estimate when a fitted profile is supplied.
pub fn generating_value<S: SeriesCoefficients + ?Sized>(
    series: &S,
    z: f64,
    k: usize,
    profile: Option<&GeneratingSummary>,
) -> Result<SeriesValue> {
    if k > series.max_index() {
        return Err(Error::InsufficientData {
            needed: k,
            have: series.max_index(),
        });
    }
    if let Some(prof) = profile {
        if z > prof.rho * (1.0 + 1e-12) {
            return Err(Error::Divergence { z, rho: prof.rho });
        }
    }
    let log_z = z.ln();
    let mut value = 0.0;
    for n in 0..=k {
        let l = series.log_coefficient(n);
        if l.is_finite() {
            value += if n == 0 { l.exp() } else { (l + n as f64 * log_z).exp() };
        }
    }
    let tail_bound = profile.and_then(|prof| {
        let gamma = prof.gamma?;
        let p = series.period().max(1);
        // amplitude: largest c_n ρ^n n^γ over the last tenth of the window
        let start = (k - k / 10).max(1);
        let amp = (start..=k)
            .filter(|n| n % p == 0)
            .map(|n| series.log_coefficient(n) + n as f64 * prof.rho.ln() + gamma * (n as f64).ln())
            .filter(|l| l.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        if !amp.is_finite() {
            return None;
        }
        let ratio = (z / prof.rho).min(1.0);
        Some(power_tail_sum(amp.exp(), 0.0, gamma, ratio, k, p))
    });
    Ok(SeriesValue {
        z,
        terms: k,
        value,
        tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk_models::{make_model, ModelSpec};

    fn tree(b: u32) -> WalkModel {
        WalkModel::tree(b).unwrap()
    }

    fn simple_lattice(dim: usize) -> WalkModel {
        make_model(&ModelSpec::Lattice {
            dim,
            jumps: vec![1],
        })
        .unwrap()
    }

    #[test]
    fn tree_small_returns() {
        let u = return_probabilities(&tree(2), 10).unwrap();
        assert_eq!(u.u[0], 1.0);
        assert_eq!(u.u[1], 0.0);
        assert!((u.u[2] - 1.0 / 3.0).abs() < 1e-15);
        assert!((u.u[4] - 5.0 / 27.0).abs() < 1e-15);
        assert!(u.u.iter().skip(1).step_by(2).all(|&x| x == 0.0));
    }

    #[test]
    fn lamplighter_u2() {
        let m = WalkModel::lamplighter(1).unwrap();
        let u = return_probabilities(&m, 6).unwrap();
        assert!((u.u[2] - 0.125).abs() < 1e-15);
        assert!(return_probabilities(&m, 121).is_err());
        assert!(return_probabilities(&WalkModel::lamplighter(2).unwrap(), 4).is_err());
    }

    #[test]
    fn first_returns_small() {
        let u = return_probabilities(&tree(2), 10).unwrap();
        let f = first_return_probabilities(&u).unwrap();
        assert!((f.f[2] - 1.0 / 3.0).abs() < 1e-15);
        assert!((f.f[4] - 2.0 / 27.0).abs() < 1e-15);
        let z = return_probabilities(&simple_lattice(1), 4).unwrap();
        let fz = first_return_probabilities(&z).unwrap();
        assert!((fz.f[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn deconvolution_rejects_bad_input() {
        let bad = ReturnSequence::from_values(vec![0.5, 0.1], 1);
        assert!(first_return_probabilities(&bad).is_err());
        // u_2 far above what a walk allows forces a negative f_4
        let weird = ReturnSequence::from_values(vec![1.0, 0.0, 0.9, 0.0, 0.1], 2);
        assert!(matches!(
            first_return_probabilities(&weird),
            Err(Error::NumericalInstability { index: 4, .. })
        ));
    }

    #[test]
    fn renewal_reconvolution() {
        for model in [tree(3), simple_lattice(2), WalkModel::lamplighter(1).unwrap()] {
            let u = return_probabilities(&model, 60).unwrap();
            let f = first_return_probabilities(&u).unwrap();
            for n in 1..=60 {
                let conv: f64 = (1..=n).map(|k| f.f[k] * u.u[n - k]).sum();
                assert!((conv - u.u[n]).abs() <= 1e-12, "{} n={n}", model.id());
            }
            assert!(f.partial.windows(2).all(|w| w[1] >= w[0] && w[1] <= 1.0));
        }
    }

    #[test]
    fn log_companion_survives_underflow() {
        // ρ = 5/4 for b = 4: u_n underflows near n ≈ 3200
        let u = return_probabilities(&tree(4), 4000).unwrap();
        assert_eq!(u.u[4000], 0.0);
        assert!(u.log_u[4000].is_finite());
        let slope = (u.log_u[4000] - u.log_u[3000]) / 1000.0;
        assert!((slope + (1.25f64).ln()).abs() < 1e-3);
        let f = first_return_probabilities(&u).unwrap();
        assert!(f.log_f[4000].is_finite());
        let closed = TreeClosedForms::new(4).log_first_return(2000);
        assert!((f.log_f[4000] - closed).abs() < 1e-8);
    }

    #[test]
    fn escape_tree_and_line() {
        let u = return_probabilities(&tree(2), 400).unwrap();
        let f = first_return_probabilities(&u).unwrap();
        let est = escape_probability(&f, TailModel::None);
        assert!((est.partial - 0.5).abs() < 1e-6);
        assert!(est.conclusive);

        let z = return_probabilities(&simple_lattice(1), 2000).unwrap();
        let fz = first_return_probabilities(&z).unwrap();
        let est = escape_probability(&fz, TailModel::None);
        assert!(est.partial > 0.98 && est.partial < 1.0);
        assert!(!est.conclusive);
    }

    #[test]
    fn radius_fits() {
        let u = return_probabilities(&tree(2), 1000).unwrap();
        let fit = spectral_radius_estimate(&u, RadiusCorrection::Polynomial).unwrap();
        let exact = 3.0 / (2.0 * 2f64.sqrt());
        assert!((fit.rho - exact).abs() / exact < 1e-4, "{}", fit.rho);
        assert!((fit.gamma.unwrap() - 1.5).abs() < 0.2, "{:?}", fit.gamma);

        let u3 = return_probabilities(&tree(3), 1000).unwrap();
        let fit3 = spectral_radius_estimate(&u3, RadiusCorrection::Polynomial).unwrap();
        assert!((fit3.rho - 2.0 / 3f64.sqrt()).abs() < 1e-4);

        let plain = spectral_radius_estimate(&u, RadiusCorrection::None).unwrap();
        assert!((plain.rho - exact).abs() / exact < 5e-3);

        let z = return_probabilities(&simple_lattice(1), 1000).unwrap();
        let fz = spectral_radius_estimate(&z, RadiusCorrection::Polynomial).unwrap();
        assert!((fz.rho - 1.0).abs() < 1e-4);

        let short = return_probabilities(&tree(2), 60).unwrap();
        assert!(matches!(
            spectral_radius_estimate(&short, RadiusCorrection::Polynomial),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn generating_values() {
        let u = return_probabilities(&tree(2), 2000).unwrap();
        let f = first_return_probabilities(&u).unwrap();
        let at_one = generating_value(&f, 1.0, 2000, None).unwrap();
        assert!((at_one.value - f.partial[2000]).abs() < 1e-14);
        let u0 = generating_value(&u, 0.0, 10, None).unwrap();
        assert_eq!(u0.value, 1.0);

        let fit = spectral_radius_estimate(&u, RadiusCorrection::Polynomial)
            .unwrap()
            .with_f_at_rho(&f, 2000)
            .unwrap();
        let v = fit.f_at_rho.clone().unwrap();
        let total = v.value + v.tail_bound.unwrap();
        assert!(v.value < 0.75);
        assert!((total - 0.75).abs() < 2e-3, "{} + {:?}", v.value, v.tail_bound);

        assert!(matches!(
            generating_value(&f, 1.2, 100, Some(&fit)),
            Err(Error::Divergence { .. })
        ));
        assert!(generating_value(&f, 1.0, 5000, None).is_err());
    }

    #[test]
    fn monte_carlo_returns() {
        let m = WalkModel::lamplighter(2).unwrap();
        let u = return_probabilities_mc(&m, 4, 20_000, 3).unwrap();
        // u_2 for d = 2: back along the same axis with no flips, (1/4)(1/4)
        let se = u.std_err.as_ref().unwrap()[2];
        assert!((u.u[2] - 1.0 / 16.0).abs() < 4.0 * se);
        assert_eq!(u.u[1], 0.0);
        let again = return_probabilities_mc(&m, 4, 20_000, 3).unwrap();
        assert_eq!(u, again);
    }
}
