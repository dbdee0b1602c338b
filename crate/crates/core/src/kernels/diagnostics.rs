//! Finite-window checks of the moment inequalities satisfied by return
//! sequences of symmetric walks, and ratio diagnostics for the growth
//! hypotheses behind the bridge range limits. Everything here is computed in
//! log space and reported over explicit finite grids.

use super::ReturnSequence;
use crate::numeric::slope;

const SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InequalityFamily {
    /// `u_{2n+2} ≤ u_{2n}`.
    EvenNonIncreasing,
    /// `u_{2n+1} ≤ u_{2n}`.
    OddBelowEven,
    /// `u_{2k} u_{2l} ≤ u_{2k+2l}`.
    Supermultiplicative,
    /// `u_{2r+2} u_{2n-2r-2} ≤ u_{2r} u_{2n-2r}` for `0 ≤ r ≤ (n-1)/2`.
    SplitProductNonIncreasing,
    /// `(n/(n+r)) (r/(n+r))^{r/n} e^{-r g(n)/n} ≤ u_{2n+2r}/u_{2n}` with `g(n) = ln(1/u_{2n})`.
    RatioLowerBound,
}

/// A failed instance `smaller ≤ larger`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentViolation {
    pub family: InequalityFamily,
    pub n: usize,
    pub r: usize,
    pub smaller: f64,
    pub larger: f64,
}

/// Checks every instance of the five inequality families on the full index
/// window with relative slack `1e-12`. Returns the violations found.
pub fn verify_moment_properties(u: &ReturnSequence) -> Vec<MomentViolation> {
    let lu = &u.log_u;
    let half = u.max_index() / 2;
    let mut out = Vec::new();
    let mut check = |family, n, r, log_small: f64, log_large: f64| {
        if log_small == f64::NEG_INFINITY {
            return;
        }
        if log_large == f64::NEG_INFINITY || log_small > log_large + SLACK {
            out.push(MomentViolation {
                family,
                n,
                r,
                smaller: log_small.exp(),
                larger: log_large.exp(),
            });
        }
    };
    for n in 0..half {
        check(InequalityFamily::EvenNonIncreasing, n, 0, lu[2 * n + 2], lu[2 * n]);
    }
    for n in 0..=half {
        if 2 * n + 1 <= u.max_index() {
            check(InequalityFamily::OddBelowEven, n, 0, lu[2 * n + 1], lu[2 * n]);
        }
    }
    for k in 0..=half {
        for l in k..=half - k {
            check(
                InequalityFamily::Supermultiplicative,
                k,
                l,
                lu[2 * k] + lu[2 * l],
                lu[2 * k + 2 * l],
            );
        }
    }
    for n in 1..=half {
        let mut r = 0;
        while 2 * r + 1 <= n {
            check(
                InequalityFamily::SplitProductNonIncreasing,
                n,
                r,
                lu[2 * r + 2] + lu[2 * n - 2 * r - 2],
                lu[2 * r] + lu[2 * n - 2 * r],
            );
            r += 1;
        }
    }
    for n in 1..=half {
        let g = -lu[2 * n];
        if !g.is_finite() {
            continue;
        }
        let nf = n as f64;
        for r in 1..=half - n {
            let rf = r as f64;
            let bound = (nf / (nf + rf)).ln() + (rf / nf) * (rf / (nf + rf)).ln() - rf * g / nf;
            check(
                InequalityFamily::RatioLowerBound,
                n,
                r,
                bound,
                lu[2 * n + 2 * r] - lu[2 * n],
            );
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioDiagnostics {
    pub rho: f64,
    pub eta: f64,
    /// `(n, u_{2n}/u_{4n})` for every `n ≥ 1` with `4n ≤ N`.
    pub doubling: Vec<(usize, f64)>,
    pub doubling_max: f64,
    pub doubling_verdict: String,
    /// `(n, sup_r u_{n-r}/(ρ^r u_n))` over `p | r`, `1 ≤ r < (1-η)n`.
    pub window_sup: Vec<(usize, f64)>,
    pub window_sup_max: f64,
    /// `(r, [(n, u_{n-r}/(ρ^r u_n))])` for fixed small `r`.
    pub fixed_r: Vec<(usize, Vec<(usize, f64)>)>,
    pub fixed_r_verdicts: Vec<(usize, String)>,
    /// `(n, g(n))` with `g(n) = ln(1/u_{2n})`, the tightest lower envelope.
    pub g_envelope: Vec<(usize, f64)>,
    /// Log-log slope of `g` over the upper half of the grid.
    pub g_exponent: f64,
    /// `(n, n·h(⌊n/g(n/2)⌋))` with `h(m) = u_{2m}`, the tightest upper envelope.
    pub h_condition: Vec<(usize, f64)>,
}

/// Ratio diagnostics over the finite window of `u`.
///
/// All suprema are maxima over the stated finite grids. Verdicts describe the
/// window only.
pub fn ratio_diagnostics(u: &ReturnSequence, rho: f64, eta: f64) -> RatioDiagnostics {
    assert!(rho > 0.0 && eta > 0.0 && eta < 1.0);
    let lu = &u.log_u;
    let n_max = u.max_index();
    let p = u.period.max(1);
    let ln_rho = rho.ln();

    let doubling: Vec<(usize, f64)> = (1..=n_max / 4)
        .filter(|n| lu[4 * n].is_finite())
        .map(|n| (n, (lu[2 * n] - lu[4 * n]).exp()))
        .collect();
    let doubling_max = doubling.iter().map(|x| x.1).fold(0.0, f64::max);
    let doubling_verdict = bounded_verdict(&doubling);

    let mut window_sup = Vec::new();
    let mut n = p;
    while n <= n_max {
        if lu[n].is_finite() {
            let mut best = f64::NEG_INFINITY;
            let mut r = p;
            while (r as f64) < (1.0 - eta) * n as f64 {
                let l = lu[n - r] - r as f64 * ln_rho - lu[n];
                best = best.max(l);
                r += p;
            }
            if best.is_finite() {
                window_sup.push((n, best.exp()));
            }
        }
        n += p;
    }
    let window_sup_max = window_sup.iter().map(|x| x.1).fold(0.0, f64::max);

    let fixed_list = [0, p, 2 * p, 4 * p, 8 * p];
    let mut fixed_r = Vec::new();
    let mut fixed_r_verdicts = Vec::new();
    for &r in &fixed_list {
        let traj: Vec<(usize, f64)> = (r + p..=n_max)
            .filter(|n| n % p == 0 && lu[*n].is_finite())
            .map(|n| (n, (lu[n - r] - r as f64 * ln_rho - lu[n]).exp()))
            .collect();
        if traj.is_empty() {
            continue;
        }
        let first = (traj[0].1 - 1.0).abs();
        let last = (traj.last().unwrap().1 - 1.0).abs();
        let verdict = if last <= first && last < 0.05 {
            "consistent with -> 1 on this window"
        } else {
            "not yet near 1 on this window"
        };
        fixed_r_verdicts.push((r, verdict.to_string()));
        fixed_r.push((r, traj));
    }

    let g_envelope: Vec<(usize, f64)> = (1..=n_max / 2)
        .filter(|n| lu[2 * n].is_finite())
        .map(|n| (n, -lu[2 * n]))
        .collect();
    let upper: Vec<&(usize, f64)> = g_envelope[g_envelope.len() / 2..]
        .iter()
        .filter(|(_, g)| *g > 0.0)
        .collect();
    let g_exponent = if upper.len() >= 2 {
        let x: Vec<f64> = upper.iter().map(|(n, _)| (*n as f64).ln()).collect();
        let y: Vec<f64> = upper.iter().map(|(_, g)| g.ln()).collect();
        slope(&x, &y)
    } else {
        f64::NAN
    };
    let h_condition: Vec<(usize, f64)> = (2..=n_max / 2)
        .filter_map(|n| {
            let g_half = -lu[2 * (n / 2)];
            if !(g_half > 0.0) || !g_half.is_finite() {
                return None;
            }
            let m = (n as f64 / g_half).floor() as usize;
            let h = lu[2 * m].exp();
            Some((n, n as f64 * h))
        })
        .collect();

    RatioDiagnostics {
        rho,
        eta,
        doubling,
        doubling_max,
        doubling_verdict,
        window_sup,
        window_sup_max,
        fixed_r,
        fixed_r_verdicts,
        g_envelope,
        g_exponent,
        h_condition,
    }
}

/// Compares the maximum over the last third of a trajectory with that over the middle third.
fn bounded_verdict(traj: &[(usize, f64)]) -> String {
    if traj.len() < 6 {
        return "window too short".into();
    }
    let third = traj.len() / 3;
    let mid = traj[third..2 * third].iter().map(|x| x.1).fold(0.0, f64::max);
    let last = traj[2 * third..].iter().map(|x| x.1).fold(0.0, f64::max);
    if last <= 1.05 * mid {
        "consistent with bounded on this window".into()
    } else {
        "growing on this window".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::return_probabilities;
    use crate::walk_models::{make_model, ModelSpec, WalkModel};

    #[test]
    fn tree_sequence_has_no_violations() {
        let u = return_probabilities(&WalkModel::tree(2).unwrap(), 200).unwrap();
        assert!(verify_moment_properties(&u).is_empty());
        assert!(u.u[4] >= u.u[2] * u.u[2]);
    }

    #[test]
    fn adversarial_sequence_is_caught() {
        let u = ReturnSequence::from_values(vec![1.0, 0.0, 0.2, 0.0, 0.3], 2);
        let v = verify_moment_properties(&u);
        assert!(v
            .iter()
            .any(|x| x.family == InequalityFamily::EvenNonIncreasing && x.n == 1));
    }

    #[test]
    fn zero_shift_ratio_is_one() {
        let u = return_probabilities(&WalkModel::tree(2).unwrap(), 100).unwrap();
        let d = ratio_diagnostics(&u, 1.06, 0.5);
        let (r, traj) = &d.fixed_r[0];
        assert_eq!(*r, 0);
        assert!(traj.iter().all(|(_, x)| *x == 1.0));
    }

    #[test]
    fn plane_doubling_ratio_near_two() {
        let m = make_model(&ModelSpec::Lattice {
            dim: 2,
            jumps: vec![1],
        })
        .unwrap();
        let u = return_probabilities(&m, 400).unwrap();
        let d = ratio_diagnostics(&u, 1.0, 0.5);
        let last = d.doubling.last().unwrap().1;
        assert!((last - 2.0).abs() < 0.02, "{last}");
        assert!(d.doubling_verdict.starts_with("consistent with bounded"));
    }

    #[test]
    fn tree_fixed_shift_tends_to_one() {
        let t = crate::kernels::TreeClosedForms::new(2);
        let u = return_probabilities(&WalkModel::tree(2).unwrap(), 2000).unwrap();
        let d = ratio_diagnostics(&u, t.rho, 0.5);
        let (_, traj) = d.fixed_r.iter().find(|(r, _)| *r == 2).unwrap();
        let first = (traj[5].1 - 1.0).abs();
        let last = (traj.last().unwrap().1 - 1.0).abs();
        assert!(last < first && last < 0.01, "{first} {last}");
        assert!(d.doubling_verdict.starts_with("growing"));
    }
}
