//! Joint law of return and range for simple random walk on `Z`, and the
//! projected range of the lamplighter bridge on `Z_2 wr Z`.
//!
//! A lamplighter bridge projects to a lattice bridge `y`, and exactly
//! `2^{n - N}` of the `2^n` flip sequences along `y` switch every lamp back off,
//! where `N` is the number of distinct sites among `y_0..y_{n-1}`. Reweighting
//! the lattice bridge range law by `2^{-r}` therefore gives the law of `N`.

use crate::error::{Error, Result};

pub const PROJECTION_MAX_N: usize = 200;

/// `q[r] = P{S_n = 0, range = r}` for the simple walk on `Z`, `r = 0..=n+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionRangeTable {
    pub n: usize,
    pub q: Vec<f64>,
}

impl ProjectionRangeTable {
    /// `Σ_r q_r`, the lattice return probability `u_n`.
    pub fn total(&self) -> f64 {
        self.q.iter().sum()
    }

    /// `Σ_r 2^{-r} q_r`, the lamplighter return probability.
    pub fn lamplighter_return_probability(&self) -> f64 {
        self.q
            .iter()
            .enumerate()
            .map(|(r, q)| q * 0.5f64.powi(r as i32))
            .sum()
    }

    /// Lattice bridge range law `p_r = q_r / u_n`.
    pub fn bridge_range_pmf(&self) -> Vec<f64> {
        let total = self.total();
        self.q.iter().map(|q| q / total).collect()
    }
}

/// Law of the projected range `N_n` of the lamplighter bridge.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionPmf {
    pub n: usize,
    /// `probs[r] = P{N_n = r}`.
    pub probs: Vec<f64>,
    /// `Σ_s 2^{-s} q_s`; equals the lamplighter `u_n`.
    pub denominator: f64,
}

pub fn projection_range_joint(n: usize) -> Result<ProjectionRangeTable> {
    if n % 2 != 0 {
        return Err(Error::Period { n, period: 2 });
    }
    let tables = projection_range_tables(n)?;
    Ok(tables.into_iter().last().expect("n itself is even"))
}

/// Tables for every even `n ≤ n_max` from one forward pass over
/// `(position, running min, running max)`.
pub fn projection_range_tables(n_max: usize) -> Result<Vec<ProjectionRangeTable>> {
    if n_max > PROJECTION_MAX_N {
        return Err(Error::Budget {
            what: "projected range recursion",
            requested: n_max as u64,
            limit: PROJECTION_MAX_N as u64,
        });
    }
    // bridges of length ≤ n_max never span more than n_max/2 sites beyond the first
    let width = n_max / 2;
    let side = width + 1;
    // state (a, c, x): min = -a, max = c, position = x - a, with a + c ≤ width
    let index = |a: usize, c: usize, x: usize| (a * side + c) * side + x;
    let mut cur = vec![0.0f64; side * side * side];
    cur[index(0, 0, 0)] = 1.0;
    // the empty bridge departs from no site
    let mut tables = vec![ProjectionRangeTable { n: 0, q: vec![1.0] }];
    for m in 1..=n_max {
        let mut next = vec![0.0f64; cur.len()];
        let remaining = (n_max - m) as i64;
        for a in 0..=width {
            for c in 0..=width - a {
                for x in 0..=a + c {
                    let v = cur[index(a, c, x)];
                    if v == 0.0 {
                        continue;
                    }
                    let pos = x as i64 - a as i64;
                    for step in [-1i64, 1] {
                        let np = pos + step;
                        if np.abs() > remaining {
                            continue;
                        }
                        let na = a.max((-np).max(0) as usize);
                        let nc = c.max(np.max(0) as usize);
                        if na + nc > width {
                            continue;
                        }
                        let nx = (np + na as i64) as usize;
                        next[index(na, nc, nx)] += 0.5 * v;
                    }
                }
            }
        }
        cur = next;
        if m % 2 == 0 {
            let mut q = vec![0.0; m + 2];
            for a in 0..=width {
                for c in 0..=width - a {
                    if a + c + 1 < q.len() {
                        q[a + c + 1] += cur[index(a, c, a)];
                    }
                }
            }
            tables.push(ProjectionRangeTable { n: m, q });
        }
    }
    Ok(tables)
}

/// `P{N_n = r} ∝ 2^{-r} q_r`.
pub fn lamplighter_projection_pmf(table: &ProjectionRangeTable) -> ProjectionPmf {
    let weights: Vec<f64> = table
        .q
        .iter()
        .enumerate()
        .map(|(r, q)| q * 0.5f64.powi(r as i32))
        .collect();
    let denominator: f64 = weights.iter().sum();
    ProjectionPmf {
        n: table.n,
        probs: weights.iter().map(|w| w / denominator).collect(),
        denominator,
    }
}

/// `E{N_n} = Σ r 2^{-r} q_r / Σ 2^{-s} q_s`.
pub fn expected_projection_range(table: &ProjectionRangeTable) -> f64 {
    let pmf = lamplighter_projection_pmf(table);
    pmf.probs
        .iter()
        .enumerate()
        .map(|(r, p)| r as f64 * p)
        .sum()
}
