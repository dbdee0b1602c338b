//! Exact bridge sampler for the lamplighter walk on `Z_2 wr Z`.
//!
//! A bridge is drawn in two stages. The marker path is a simple-walk bridge on
//! `Z`, accepted with probability `2^{-(N-1)}` where `N` is the number of
//! distinct sites it departs from. Flips are then drawn uniformly among the
//! `2^{n-N}` sequences that leave every lamp off: at each site the first
//! `v - 1` departures flip by fair coins and the last one restores even parity.

use std::collections::HashMap;

use rand::Rng;

use super::projection::{projection_range_joint, PROJECTION_MAX_N};
use super::{bridge_path_probability, sample_bridge, BackwardTable};
use crate::error::{Error, Result};
use crate::walk_models::{make_model, LampState, ModelSpec, Vertex, WalkModel};

pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct LampBridgePath {
    /// `(σ_k, y_k)` for `k = 0..=n`.
    pub vertices: Vec<Vertex>,
    /// `toggles[k]`: the lamp at `y_k` is flipped before the move at step `k`.
    pub toggles: Vec<bool>,
    /// 1 for rejection output, `2^{-N}` for importance output.
    pub weight: f64,
    /// `N`: distinct marker sites among `y_0..y_{n-1}`.
    pub projected_range: usize,
    /// Proposals drawn, including the accepted one.
    pub attempts: u64,
}

impl LampBridgePath {
    /// Every lamp is toggled an even number of times and the path ends at the identity.
    pub fn satisfies_invariants(&self) -> bool {
        let mut parity: HashMap<i64, bool> = HashMap::new();
        for (k, &t) in self.toggles.iter().enumerate() {
            if t {
                let y = marker(&self.vertices[k]);
                *parity.entry(y).or_default() ^= true;
            }
        }
        let end_ok = matches!(
            self.vertices.last(),
            Some(Vertex::Lamplighter(s)) if s.lamps.is_empty() && s.position == [0]
        );
        parity.values().all(|odd| !odd) && end_ok
    }
}

fn marker(v: &Vertex) -> i64 {
    match v {
        Vertex::Lamplighter(s) => s.position[0],
        Vertex::Lattice(x) => x[0],
        Vertex::Tree(_) => panic!("tree vertex has no marker"),
    }
}

#[derive(Clone, Debug)]
pub struct LamplighterBridgeSampler {
    n: usize,
    max_attempts: u64,
    line: WalkModel,
    table: BackwardTable,
    model: WalkModel,
}

impl LamplighterBridgeSampler {
    pub fn new(dim: usize, n: usize, max_attempts: u64) -> Result<Self> {
        if dim != 1 {
            return Err(Error::InvalidSpec(format!(
                "exact lamplighter bridges are only available for d = 1, got d = {dim}"
            )));
        }
        if max_attempts == 0 {
            return Err(Error::InvalidSpec("max_attempts must be >= 1".into()));
        }
        let line = make_model(&ModelSpec::Lattice {
            dim: 1,
            jumps: vec![1],
        })?;
        let table = BackwardTable::build(&line, n)?;
        Ok(Self {
            n,
            max_attempts,
            line,
            table,
            model: WalkModel::lamplighter(1)?,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn model(&self) -> &WalkModel {
        &self.model
    }

    /// Exact acceptance probability `Σ_r 2^{-(r-1)} q_r / u_n`, for `n ≤ 200`.
    pub fn acceptance_rate(&self) -> Result<f64> {
        let t = projection_range_joint(self.n)?;
        Ok(2.0 * t.lamplighter_return_probability() / t.total())
    }

    /// Rejection sampler; the output has exactly the conditioned law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LampBridgePath> {
        for attempt in 1..=self.max_attempts {
            let y = self.marker_bridge(rng)?;
            let range = departed_sites(&y);
            let accept = 0.5f64.powi(range as i32 - 1);
            if rng.gen::<f64>() < accept {
                let mut path = self.lift(&y, rng);
                path.attempts = attempt;
                return Ok(path);
            }
        }
        Err(Error::AcceptanceStarvation {
            attempts: self.max_attempts,
        })
    }

    /// One unconditioned marker bridge with importance weight `2^{-N}`;
    /// estimates must be self-normalized.
    pub fn sample_weighted<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LampBridgePath> {
        let y = self.marker_bridge(rng)?;
        let range = departed_sites(&y);
        let mut path = self.lift(&y, rng);
        path.weight = 0.5f64.powi(range as i32);
        path.attempts = 1;
        Ok(path)
    }

    /// Probability that [`Self::sample`] returns `vertices`, computed from the
    /// two sampling stages.
    pub fn path_probability(&self, vertices: &[Vertex]) -> Result<f64> {
        if vertices.len() != self.n + 1 {
            return Err(Error::InvalidSpec("path length does not match n".into()));
        }
        let mut y = Vec::with_capacity(vertices.len());
        let mut toggles = Vec::with_capacity(self.n);
        for k in 0..=self.n {
            let Vertex::Lamplighter(s) = &vertices[k] else {
                return Err(Error::InvalidSpec("not a lamplighter path".into()));
            };
            y.push(Vertex::Lattice(s.position.clone()));
            if k < self.n {
                let Vertex::Lamplighter(next) = &vertices[k + 1] else {
                    return Err(Error::InvalidSpec("not a lamplighter path".into()));
                };
                let mut flipped = s.clone();
                flipped.flip_here();
                let moved = (next.position[0] - s.position[0]).abs() == 1;
                if moved && next.lamps == s.lamps {
                    toggles.push(false);
                } else if moved && next.lamps == flipped.lamps {
                    toggles.push(true);
                } else {
                    return Ok(0.0);
                }
            }
        }
        let end = &vertices[self.n];
        if *end != self.model.identity() {
            return Ok(0.0);
        }
        let marker_prob = bridge_path_probability(&self.line, &self.table, &y)?;
        let range = departed_sites(&y);
        let accept = 0.5f64.powi(range as i32 - 1) / self.acceptance_rate()?;
        let flips = 0.5f64.powi((self.n - range) as i32);
        Ok(marker_prob * accept * flips)
    }

    fn marker_bridge<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Vertex>> {
        Ok(sample_bridge(&self.line, &self.table, rng)?.vertices)
    }

    /// Draws parity-feasible flips along the marker path `y`.
    fn lift<R: Rng + ?Sized>(&self, y: &[Vertex], rng: &mut R) -> LampBridgePath {
        let n = self.n;
        let mut remaining: HashMap<i64, usize> = HashMap::new();
        for v in &y[..n] {
            *remaining.entry(marker(v)).or_default() += 1;
        }
        let range = remaining.len();
        let mut state = LampState::identity(1);
        let mut vertices = vec![Vertex::Lamplighter(state.clone())];
        let mut toggles = Vec::with_capacity(n);
        for k in 0..n {
            let site = marker(&y[k]);
            let left = remaining.get_mut(&site).unwrap();
            *left -= 1;
            let flip = if *left > 0 {
                rng.gen::<bool>()
            } else {
                // last departure: restore the lamp to off
                state.lamps.contains(&vec![site])
            };
            if flip {
                state.flip_here();
            }
            state.position[0] = marker(&y[k + 1]);
            toggles.push(flip);
            vertices.push(Vertex::Lamplighter(state.clone()));
        }
        LampBridgePath {
            vertices,
            toggles,
            weight: 1.0,
            projected_range: range,
            attempts: 0,
        }
    }
}

fn departed_sites(y: &[Vertex]) -> usize {
    let mut sites: Vec<i64> = y[..y.len() - 1].iter().map(marker).collect();
    sites.sort_unstable();
    sites.dedup();
    sites.len()
}

/// One exact lamplighter bridge of length `n` in dimension `d` (only `d = 1`).
pub fn sample_lamplighter_bridge<R: Rng + ?Sized>(
    d: usize,
    n: usize,
    rng: &mut R,
) -> Result<LampBridgePath> {
    LamplighterBridgeSampler::new(d, n, DEFAULT_MAX_ATTEMPTS)?.sample(rng)
}

/// Largest `n` for which [`LamplighterBridgeSampler::acceptance_rate`] is exact.
pub const ACCEPTANCE_EXACT_MAX: usize = PROJECTION_MAX_N;
