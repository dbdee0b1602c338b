//! Walk families behind one abstraction.
//!
//! Three families are supported: integer lattices with an arbitrary finite
//! symmetric jump law, the homogeneous tree in which every vertex has degree
//! `b + 1`, and the lamplighter group `Z_2 wr Z^d` with the move-and-optionally-flip
//! step law. Every model exposes weighted out-neighbors, a stable canonical byte
//! key per vertex, the word distance to the identity and the period.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on stored keys during breadth-first exploration.
pub const DEFAULT_MAX_KEYS: u64 = 20_000_000;

const KIND_LATTICE: u8 = 0;
const KIND_TREE: u8 = 1;
const KIND_LAMPLIGHTER: u8 = 2;

const PROB_TOL: f64 = 1e-12;

/// Lamp configuration plus marker position. The identity is no lamps lit at the origin.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LampState {
    pub lamps: BTreeSet<Vec<i64>>,
    pub position: Vec<i64>,
}

impl LampState {
    pub fn identity(dim: usize) -> Self {
        Self {
            lamps: BTreeSet::new(),
            position: vec![0; dim],
        }
    }

    /// Toggles the lamp at the current marker position.
    pub fn flip_here(&mut self) {
        if !self.lamps.remove(&self.position) {
            self.lamps.insert(self.position.clone());
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Vertex {
    /// Integer coordinate vector.
    Lattice(Vec<i64>),
    /// Reduced label sequence from the root; labels are in `0..=b` at the root
    /// and in `0..b` below it. The parent is obtained by popping.
    Tree(Vec<u32>),
    Lamplighter(LampState),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lattice,
    Tree,
    Lamplighter,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Lattice => "lattice",
            ModelKind::Tree => "tree",
            ModelKind::Lamplighter => "lamplighter",
        })
    }
}

/// User-facing description of a walk, validated by [`make_model`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelSpec {
    /// Jumps `±j·e_i` for every listed size `j` and coordinate `i`, uniformly.
    Lattice { dim: usize, jumps: Vec<i64> },
    Tree { b: u32 },
    Lamplighter { dim: usize },
}

#[derive(Clone, Debug, PartialEq)]
struct LatticeStep {
    jump: Vec<i64>,
    prob: f64,
}

#[derive(Clone, Debug, PartialEq)]
enum Family {
    Lattice { dim: usize, steps: Vec<LatticeStep> },
    Tree { b: u32 },
    Lamplighter { dim: usize },
}

/// An immutable walk specification.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkModel {
    family: Family,
    period: usize,
    id: String,
}

pub fn make_model(spec: &ModelSpec) -> Result<WalkModel> {
    match spec {
        ModelSpec::Tree { b } => WalkModel::tree(*b),
        ModelSpec::Lamplighter { dim } => WalkModel::lamplighter(*dim),
        ModelSpec::Lattice { dim, jumps } => {
            if *dim == 0 {
                return Err(Error::InvalidSpec("lattice dimension must be >= 1".into()));
            }
            if jumps.is_empty() {
                return Err(Error::InvalidSpec("empty jump set".into()));
            }
            let mut sizes: Vec<i64> = jumps.iter().map(|j| j.abs()).collect();
            sizes.sort_unstable();
            sizes.dedup();
            if sizes[0] == 0 {
                return Err(Error::InvalidSpec("jump size 0 is not allowed".into()));
            }
            let count = 2 * dim * sizes.len();
            let prob = 1.0 / count as f64;
            let mut law = Vec::with_capacity(count);
            for &size in &sizes {
                for axis in 0..*dim {
                    for sign in [1, -1] {
                        let mut jump = vec![0; *dim];
                        jump[axis] = sign * size;
                        law.push((jump, prob));
                    }
                }
            }
            let tag: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
            let mut model = WalkModel::lattice_with_law(*dim, law)?;
            model.id = format!("lattice:d={dim}:jumps={}", tag.join("+"));
            Ok(model)
        }
    }
}

impl WalkModel {
    pub fn tree(b: u32) -> Result<Self> {
        if b < 2 {
            return Err(Error::InvalidSpec(format!("tree needs b >= 2, got {b}")));
        }
        Ok(Self {
            family: Family::Tree { b },
            period: 2,
            id: format!("tree:b={b}"),
        })
    }

    pub fn lamplighter(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpec("lamplighter dimension must be >= 1".into()));
        }
        Ok(Self {
            family: Family::Lamplighter { dim },
            period: 2,
            id: format!("lamplighter:d={dim}"),
        })
    }

    /// Lattice walk with an explicit jump law. Duplicate jumps are merged.
    pub fn lattice_with_law(dim: usize, law: Vec<(Vec<i64>, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpec("lattice dimension must be >= 1".into()));
        }
        if law.is_empty() {
            return Err(Error::InvalidSpec("empty jump set".into()));
        }
        let mut steps: Vec<LatticeStep> = Vec::new();
        for (jump, prob) in law {
            if jump.len() != dim {
                return Err(Error::InvalidSpec(format!(
                    "jump {jump:?} does not have dimension {dim}"
                )));
            }
            if !(prob > 0.0) || !prob.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "jump {jump:?} has non-positive probability {prob}"
                )));
            }
            match steps.iter_mut().find(|s| s.jump == jump) {
                Some(s) => s.prob += prob,
                None => steps.push(LatticeStep { jump, prob }),
            }
        }
        let total: f64 = steps.iter().map(|s| s.prob).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidSpec(format!(
                "step probabilities sum to {total}, not 1"
            )));
        }
        for s in &steps {
            let inverse: Vec<i64> = s.jump.iter().map(|x| -x).collect();
            let inverse_prob = steps
                .iter()
                .find(|t| t.jump == inverse)
                .map_or(0.0, |t| t.prob);
            if (inverse_prob - s.prob).abs() > PROB_TOL {
                return Err(Error::SymmetryViolation {
                    step: format!("{:?}", s.jump),
                    prob: s.prob,
                    inverse_prob,
                });
            }
        }
        let jumps: Vec<Vec<i64>> = steps.iter().map(|s| s.jump.clone()).collect();
        let period = lattice_period(dim, &jumps);
        let law_tag: Vec<String> = steps
            .iter()
            .map(|s| {
                s.jump
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(".")
            })
            .collect();
        let id = format!("lattice:d={dim}:law={}", law_tag.join("+"));
        Ok(Self {
            family: Family::Lattice { dim, steps },
            period,
            id,
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self.family {
            Family::Lattice { .. } => ModelKind::Lattice,
            Family::Tree { .. } => ModelKind::Tree,
            Family::Lamplighter { .. } => ModelKind::Lamplighter,
        }
    }

    /// Stable identifier used in CSV output.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// Size of the support of the step law.
    pub fn degree(&self) -> usize {
        match &self.family {
            Family::Lattice { steps, .. } => steps.len(),
            Family::Tree { b } => *b as usize + 1,
            Family::Lamplighter { dim } => 4 * dim,
        }
    }

    /// Lattice or lamplighter dimension; `None` for trees.
    pub fn dim(&self) -> Option<usize> {
        match &self.family {
            Family::Lattice { dim, .. } | Family::Lamplighter { dim } => Some(*dim),
            Family::Tree { .. } => None,
        }
    }

    /// Branching number of a tree model.
    pub fn branching(&self) -> Option<u32> {
        match &self.family {
            Family::Tree { b } => Some(*b),
            _ => None,
        }
    }

    /// Jump law of a lattice model.
    pub fn lattice_law(&self) -> Option<Vec<(Vec<i64>, f64)>> {
        match &self.family {
            Family::Lattice { steps, .. } => {
                Some(steps.iter().map(|s| (s.jump.clone(), s.prob)).collect())
            }
            _ => None,
        }
    }

    /// Largest coordinate displacement of a single step.
    pub fn max_jump(&self) -> i64 {
        match &self.family {
            Family::Lattice { steps, .. } => steps
                .iter()
                .flat_map(|s| s.jump.iter().map(|x| x.abs()))
                .max()
                .unwrap_or(0),
            Family::Tree { .. } | Family::Lamplighter { .. } => 1,
        }
    }

    pub fn identity(&self) -> Vertex {
        match &self.family {
            Family::Lattice { dim, .. } => Vertex::Lattice(vec![0; *dim]),
            Family::Tree { .. } => Vertex::Tree(Vec::new()),
            Family::Lamplighter { dim } => Vertex::Lamplighter(LampState::identity(*dim)),
        }
    }

    pub fn validate(&self, v: &Vertex) -> Result<()> {
        let bad = |reason: String| Error::InvalidVertex {
            model: self.id.clone(),
            reason,
        };
        match (&self.family, v) {
            (Family::Lattice { dim, .. }, Vertex::Lattice(x)) => {
                if x.len() != *dim {
                    return Err(bad(format!("coordinate length {} != {dim}", x.len())));
                }
            }
            (Family::Tree { b }, Vertex::Tree(labels)) => {
                for (depth, &l) in labels.iter().enumerate() {
                    let limit = if depth == 0 { *b + 1 } else { *b };
                    if l >= limit {
                        return Err(bad(format!("label {l} at depth {depth} >= {limit}")));
                    }
                }
            }
            (Family::Lamplighter { dim }, Vertex::Lamplighter(state)) => {
                if state.position.len() != *dim || state.lamps.iter().any(|s| s.len() != *dim) {
                    return Err(bad(format!("site dimension differs from {dim}")));
                }
            }
            _ => return Err(bad("vertex belongs to a different model family".into())),
        }
        Ok(())
    }

    /// Weighted out-neighbors of `v`. Probabilities are positive and sum to 1.
    pub fn neighbors(&self, v: &Vertex) -> Result<Vec<(Vertex, f64)>> {
        self.validate(v)?;
        Ok(self.steps_from(v))
    }

    /// Unchecked neighbor enumeration; `v` must be valid for the model.
    pub(crate) fn steps_from(&self, v: &Vertex) -> Vec<(Vertex, f64)> {
        match (&self.family, v) {
            (Family::Lattice { steps, .. }, Vertex::Lattice(x)) => steps
                .iter()
                .map(|s| {
                    let y = x.iter().zip(&s.jump).map(|(a, b)| a + b).collect();
                    (Vertex::Lattice(y), s.prob)
                })
                .collect(),
            (Family::Tree { b }, Vertex::Tree(labels)) => {
                let p = 1.0 / (*b as f64 + 1.0);
                let mut out = Vec::with_capacity(*b as usize + 1);
                let children = if labels.is_empty() {
                    *b + 1
                } else {
                    let mut parent = labels.clone();
                    parent.pop();
                    out.push((Vertex::Tree(parent), p));
                    *b
                };
                for c in 0..children {
                    let mut child = labels.clone();
                    child.push(c);
                    out.push((Vertex::Tree(child), p));
                }
                out
            }
            (Family::Lamplighter { dim }, Vertex::Lamplighter(state)) => {
                let p = 1.0 / (4 * dim) as f64;
                let mut out = Vec::with_capacity(4 * dim);
                for flip in [false, true] {
                    for axis in 0..*dim {
                        for sign in [1, -1] {
                            let mut next = state.clone();
                            if flip {
                                next.flip_here();
                            }
                            next.position[axis] += sign;
                            out.push((Vertex::Lamplighter(next), p));
                        }
                    }
                }
                out
            }
            _ => unreachable!("vertex validated against model family"),
        }
    }

    /// Canonical byte key: kind tag, then little-endian fixed-width fields.
    pub fn canonical_key(&self, v: &Vertex) -> Vec<u8> {
        let mut key = Vec::new();
        match v {
            Vertex::Lattice(x) => {
                key.push(KIND_LATTICE);
                push_coords(&mut key, x);
            }
            Vertex::Tree(labels) => {
                key.reserve(5 + 4 * labels.len());
                key.push(KIND_TREE);
                key.extend_from_slice(&(labels.len() as u32).to_le_bytes());
                for l in labels {
                    key.extend_from_slice(&l.to_le_bytes());
                }
            }
            Vertex::Lamplighter(state) => {
                key.push(KIND_LAMPLIGHTER);
                key.extend_from_slice(&(state.lamps.len() as u32).to_le_bytes());
                for site in &state.lamps {
                    push_coords(&mut key, site);
                }
                push_coords(&mut key, &state.position);
            }
        }
        key
    }

    /// True when [`Self::graph_distance`] is a closed formula rather than a search.
    pub fn has_fast_distance(&self) -> bool {
        match &self.family {
            Family::Tree { .. } => true,
            Family::Lattice { dim, steps } => is_unit_axis_law(*dim, steps),
            Family::Lamplighter { dim } => *dim == 1,
        }
    }

    /// Word distance from the identity to `v` along walk steps.
    pub fn graph_distance(&self, v: &Vertex) -> Result<usize> {
        self.validate(v)?;
        match (&self.family, v) {
            (Family::Tree { .. }, Vertex::Tree(labels)) => Ok(labels.len()),
            (Family::Lattice { dim, steps }, Vertex::Lattice(x)) => {
                if is_unit_axis_law(*dim, steps) {
                    Ok(x.iter().map(|c| c.unsigned_abs() as usize).sum())
                } else {
                    bfs_distance(self, v, DEFAULT_MAX_KEYS)
                }
            }
            (Family::Lamplighter { dim }, Vertex::Lamplighter(state)) => {
                if *dim != 1 {
                    return Err(Error::UnsupportedDistance(format!(
                        "{} (word metric only implemented for d = 1)",
                        self.id
                    )));
                }
                Ok(lamplighter_line_distance(state))
            }
            _ => unreachable!("vertex validated against model family"),
        }
    }
}

fn push_coords(key: &mut Vec<u8>, x: &[i64]) {
    for c in x {
        key.extend_from_slice(&c.to_le_bytes());
    }
}

fn is_unit_axis_law(dim: usize, steps: &[LatticeStep]) -> bool {
    steps.len() == 2 * dim
        && steps
            .iter()
            .all(|s| s.jump.iter().map(|x| x.abs()).sum::<i64>() == 1)
}

/// Distance on `Z_2 wr Z` for the flip-at-departure step law.
///
/// The walk must depart from every lit site and end at the marker position, so
/// the optimum is one of the two sweeps (left end first or right end first)
/// over the hull of lit sites, the origin and the end position. A lit end
/// position that the sweep only reaches at the final step costs one extra
/// out-and-back excursion.
fn lamplighter_line_distance(state: &LampState) -> usize {
    let y = state.position[0];
    let lit: Vec<i64> = state.lamps.iter().map(|s| s[0]).collect();
    let lo = lit.iter().copied().chain([0, y]).min().unwrap();
    let hi = lit.iter().copied().chain([0, y]).max().unwrap();
    let y_lit = state.lamps.contains(&state.position);
    let sweep = |first: i64, second: i64| -> i64 {
        let len = first.abs() + (second - first).abs() + (y - second).abs();
        // y is departed unless the tour reaches it for the first time at the end
        let departed = if len == 0 {
            false
        } else if y != second {
            true
        } else {
            // tour ends at its second extreme; y visited earlier only if the
            // first leg or the first extreme already covers it
            let (a, b) = (0.min(first), 0.max(first));
            (a..=b).contains(&y) && !(first == second)
        };
        len + if y_lit && !departed { 2 } else { 0 }
    };
    sweep(lo, hi).min(sweep(hi, lo)) as usize
}

/// Breadth-first word distance from the identity, bounded by `max_keys` stored keys.
pub fn bfs_distance(model: &WalkModel, target: &Vertex, max_keys: u64) -> Result<usize> {
    let target_key = model.canonical_key(target);
    let start = model.identity();
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    seen.insert(model.canonical_key(&start));
    if model.canonical_key(&start) == target_key {
        return Ok(0);
    }
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some((v, dist)) = queue.pop_front() {
        for (w, _) in model.steps_from(&v) {
            let key = model.canonical_key(&w);
            if key == target_key {
                return Ok(dist + 1);
            }
            if seen.insert(key) {
                if seen.len() as u64 > max_keys {
                    return Err(Error::Budget {
                        what: "breadth-first search keys",
                        requested: seen.len() as u64,
                        limit: max_keys,
                    });
                }
                queue.push_back((w, dist + 1));
            }
        }
    }
    unreachable!("infinite Cayley graph exhausted")
}

/// `volumes[n]` = number of distinct vertices reachable in at most `n` steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VolumeCurve {
    pub volumes: Vec<u64>,
}

pub fn ball_volume(model: &WalkModel, n: usize, max_keys: u64) -> Result<VolumeCurve> {
    let start = model.identity();
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    seen.insert(model.canonical_key(&start));
    let mut frontier = vec![start];
    let mut volumes = vec![1u64];
    for _ in 0..n {
        let mut next = Vec::new();
        for v in &frontier {
            for (w, _) in model.steps_from(v) {
                if seen.insert(model.canonical_key(&w)) {
                    if seen.len() as u64 > max_keys {
                        return Err(Error::Budget {
                            what: "ball volume keys",
                            requested: seen.len() as u64,
                            limit: max_keys,
                        });
                    }
                    next.push(w);
                }
            }
        }
        volumes.push(seen.len() as u64);
        frontier = next;
    }
    Ok(VolumeCurve { volumes })
}

/// Period of a lattice walk: 1 iff some closed walk has odd length, i.e. iff
/// `(0, …, 0, 1)` lies in the integer span of the augmented jumps `(s, 1)`.
fn lattice_period(dim: usize, jumps: &[Vec<i64>]) -> usize {
    let rows: Vec<Vec<i128>> = jumps
        .iter()
        .map(|s| {
            let mut r: Vec<i128> = s.iter().map(|&x| x as i128).collect();
            r.push(1);
            r
        })
        .collect();
    let echelon = integer_echelon(rows, dim + 1);
    let mut target = vec![0i128; dim + 1];
    target[dim] = 1;
    if in_integer_span(&echelon, target) {
        1
    } else {
        2
    }
}

/// Integer row-echelon form by Euclidean row reduction. Returns `(pivot column, row)` pairs.
fn integer_echelon(mut rows: Vec<Vec<i128>>, ncols: usize) -> Vec<(usize, Vec<i128>)> {
    let mut out = Vec::new();
    for col in 0..ncols {
        loop {
            let live: Vec<usize> = (0..rows.len()).filter(|&i| rows[i][col] != 0).collect();
            if live.len() <= 1 {
                break;
            }
            let pivot = *live.iter().min_by_key(|&&i| rows[i][col].abs()).unwrap();
            let prow = rows[pivot].clone();
            for &i in &live {
                if i != pivot {
                    let q = rows[i][col].div_euclid(prow[col]);
                    for (a, b) in rows[i].iter_mut().zip(&prow) {
                        *a -= q * b;
                    }
                }
            }
        }
        if let Some(i) = (0..rows.len()).find(|&i| rows[i][col] != 0) {
            out.push((col, rows.swap_remove(i)));
        }
    }
    out
}

fn in_integer_span(echelon: &[(usize, Vec<i128>)], mut target: Vec<i128>) -> bool {
    let mut pivots = echelon.iter().peekable();
    for col in 0..target.len() {
        match pivots.peek() {
            Some((pc, row)) if *pc == col => {
                if target[col] % row[col] != 0 {
                    return false;
                }
                let q = target[col] / row[col];
                for (a, b) in target.iter_mut().zip(row) {
                    *a -= q * b;
                }
                pivots.next();
            }
            _ => {
                if target[col] != 0 {
                    return false;
                }
            }
        }
    }
    true
}
