//! Bridges: walks of length `n` conditioned on `S_n = e`.
//!
//! Exact sampling goes through a backward table `G_m(v) = P_v(S_m = e)` and
//! the Doob transform `P(v, w) G_{m-1}(w) / G_m(v)`. Rows are stored rescaled
//! by their maximum with a per-row log scale; step distributions are
//! normalized locally, so only ratios inside one row ever matter.

pub mod lamplighter;
pub mod projection;

use std::collections::{HashMap, HashSet};

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::LatticeGrid;
use crate::rng::sample_weighted;
use crate::walk_models::{ModelKind, Vertex, WalkModel, DEFAULT_MAX_KEYS};

pub use lamplighter::{sample_lamplighter_bridge, LampBridgePath, LamplighterBridgeSampler};
pub use projection::{
    expected_projection_range, lamplighter_projection_pmf, projection_range_joint,
    projection_range_tables, ProjectionPmf, ProjectionRangeTable,
};

/// Largest tree bridge length with a backward table.
pub const TREE_TABLE_MAX: usize = 8192;
/// Largest number of walks visited by exhaustive enumeration.
pub const ENUMERATION_MAX_PATHS: u64 = 1 << 20;

/// Largest lattice bridge length with a backward table, per dimension.
pub fn lattice_table_limit(dim: usize) -> usize {
    match dim {
        1 => 4096,
        2 => 256,
        3 => 48,
        _ => 16,
    }
}

#[derive(Clone, Debug)]
enum Rows {
    /// `rows[m][h]`, indexed by height.
    Tree { rows: Vec<Vec<f64>> },
    /// `grids[m](v)` = distribution of `S_m` from `e`, equal to `G_m(v)` by symmetry.
    Lattice { grids: Vec<LatticeGrid> },
    /// `rows[m]` keyed by canonical key, over states visited at time `n - m`.
    Generic { rows: Vec<HashMap<Vec<u8>, f64>> },
}

/// `G_m(v)` for `m = 0..=n`, immutable once built.
#[derive(Clone, Debug)]
pub struct BackwardTable {
    model_id: String,
    n: usize,
    rows: Rows,
    /// `G_m(v) = stored_m(v) · exp(log_scale[m])`.
    log_scale: Vec<f64>,
}

pub fn backward_table(model: &WalkModel, n: usize) -> Result<BackwardTable> {
    BackwardTable::build(model, n)
}

impl BackwardTable {
    /// Tree tables run on heights, lattice tables on cropped grids, and the
    /// lamplighter on explicit reachable state sets.
    pub fn build(model: &WalkModel, n: usize) -> Result<Self> {
        check_period(model, n)?;
        let table = match model.kind() {
            ModelKind::Tree => build_tree(model, n),
            ModelKind::Lattice => build_lattice(model, n),
            ModelKind::Lamplighter => Self::build_generic(model, n, DEFAULT_MAX_KEYS),
        }?;
        // e.g. n = 1 for jumps {1, 2}: aperiodic, yet no bridge of that length
        if table.scaled(model, n, &model.identity()) == 0.0 {
            return Err(Error::UnreachableState { step: 0 });
        }
        Ok(table)
    }

    /// Table over explicit state sets; works for every model with at most
    /// `max_keys` stored states in total.
    pub fn build_generic(model: &WalkModel, n: usize, max_keys: u64) -> Result<Self> {
        check_period(model, n)?;
        // layers[k]: states reachable in exactly k steps that can still return by n
        let mut layers: Vec<Vec<Vertex>> = vec![vec![model.identity()]];
        let mut stored = 1u64;
        for k in 1..=n {
            let mut seen = HashSet::new();
            let mut next = Vec::new();
            for v in &layers[k - 1] {
                for (w, _) in model.steps_from(v) {
                    if seen.insert(model.canonical_key(&w)) {
                        next.push(w);
                    }
                }
            }
            stored += next.len() as u64;
            if stored > max_keys {
                return Err(Error::Budget {
                    what: "backward table states",
                    requested: stored,
                    limit: max_keys,
                });
            }
            layers.push(next);
        }
        let mut rows: Vec<HashMap<Vec<u8>, f64>> = Vec::with_capacity(n + 1);
        let mut log_scale = vec![0.0; n + 1];
        rows.push(HashMap::from([(model.canonical_key(&model.identity()), 1.0)]));
        for m in 1..=n {
            let prev = &rows[m - 1];
            let mut row = HashMap::new();
            for v in &layers[n - m] {
                let g: f64 = model
                    .steps_from(v)
                    .iter()
                    .map(|(w, p)| p * prev.get(&model.canonical_key(w)).copied().unwrap_or(0.0))
                    .sum();
                if g > 0.0 {
                    row.insert(model.canonical_key(v), g);
                }
            }
            let top = row.values().copied().fold(0.0, f64::max);
            if top > 0.0 {
                row.values_mut().for_each(|x| *x /= top);
                log_scale[m] = log_scale[m - 1] + top.ln();
            } else {
                log_scale[m] = log_scale[m - 1];
            }
            rows.push(row);
        }
        Ok(Self {
            model_id: model.id().to_string(),
            n,
            rows: Rows::Generic { rows },
            log_scale,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    /// Stored (rescaled) `G_m(v)`, zero outside the stored support.
    fn scaled(&self, model: &WalkModel, m: usize, v: &Vertex) -> f64 {
        match (&self.rows, v) {
            (Rows::Tree { rows, .. }, Vertex::Tree(labels)) => {
                rows[m].get(labels.len()).copied().unwrap_or(0.0)
            }
            (Rows::Lattice { grids }, Vertex::Lattice(x)) => grids[m].get(x),
            (Rows::Generic { rows }, _) => rows[m]
                .get(&model.canonical_key(v))
                .copied()
                .unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// `ln G_m(v)`; `-inf` when the walk cannot reach `e` from `v` in `m` steps.
    pub fn log_value(&self, model: &WalkModel, m: usize, v: &Vertex) -> f64 {
        self.scaled(model, m, v).ln() + self.log_scale[m]
    }

    pub fn value(&self, model: &WalkModel, m: usize, v: &Vertex) -> f64 {
        self.log_value(model, m, v).exp()
    }

    /// Relative residual of `G_m(v) = Σ_w P(v, w) G_{m-1}(w)`.
    pub fn consistency_residual(&self, model: &WalkModel, m: usize, v: &Vertex) -> f64 {
        assert!(m >= 1 && m <= self.n);
        let here = self.scaled(model, m, v);
        let shift = (self.log_scale[m - 1] - self.log_scale[m]).exp();
        let sum: f64 = model
            .steps_from(v)
            .iter()
            .map(|(w, p)| p * self.scaled(model, m - 1, w))
            .sum::<f64>()
            * shift;
        if here == 0.0 {
            sum.abs()
        } else {
            (sum - here).abs() / here
        }
    }

    fn check_model(&self, model: &WalkModel) -> Result<()> {
        if model.id() != self.model_id {
            return Err(Error::InvalidSpec(format!(
                "backward table was built for {}, not {}",
                self.model_id,
                model.id()
            )));
        }
        Ok(())
    }
}

fn check_period(model: &WalkModel, n: usize) -> Result<()> {
    if n % model.period() != 0 {
        return Err(Error::Period {
            n,
            period: model.period(),
        });
    }
    Ok(())
}

fn normalize_row(row: &mut [f64]) -> f64 {
    let top = row.iter().copied().fold(0.0, f64::max);
    if top > 0.0 {
        row.iter_mut().for_each(|x| *x /= top);
        top.ln()
    } else {
        0.0
    }
}

fn build_tree(model: &WalkModel, n: usize) -> Result<BackwardTable> {
    if n > TREE_TABLE_MAX {
        return Err(Error::Budget {
            what: "tree backward table length",
            requested: n as u64,
            limit: TREE_TABLE_MAX as u64,
        });
    }
    let b = model.branching().unwrap();
    let down = 1.0 / (b as f64 + 1.0);
    let up = 1.0 - down;
    let mut rows = vec![vec![1.0]];
    let mut log_scale = vec![0.0];
    for m in 1..=n {
        let prev = &rows[m - 1];
        let at = |h: usize| prev.get(h).copied().unwrap_or(0.0);
        let len = m.min(n - m) + 1;
        let mut row = vec![0.0; len];
        row[0] = at(1);
        for h in 1..len {
            row[h] = down * at(h - 1) + up * at(h + 1);
        }
        log_scale.push(log_scale[m - 1] + normalize_row(&mut row));
        rows.push(row);
    }
    Ok(BackwardTable {
        model_id: model.id().to_string(),
        n,
        rows: Rows::Tree { rows },
        log_scale,
    })
}

fn build_lattice(model: &WalkModel, n: usize) -> Result<BackwardTable> {
    let dim = model.dim().unwrap();
    let limit = lattice_table_limit(dim);
    if n > limit {
        return Err(Error::Budget {
            what: "lattice backward table length",
            requested: n as u64,
            limit: limit as u64,
        });
    }
    let law = model.lattice_law().unwrap();
    let jmax = model.max_jump();
    let mut grids = vec![LatticeGrid::delta(dim)];
    let mut log_scale = vec![0.0];
    for m in 1..=n {
        let radius = (m.min(n - m) as i64) * jmax;
        let mut g = grids[m - 1].step(&law, radius);
        let top = g.max_value();
        let mut ls = log_scale[m - 1];
        if top > 0.0 {
            g.scale(1.0 / top);
            ls += top.ln();
        }
        log_scale.push(ls);
        grids.push(g);
    }
    Ok(BackwardTable {
        model_id: model.id().to_string(),
        n,
        rows: Rows::Lattice { grids },
        log_scale,
    })
}

/// Law of `S_{k+1}` given `S_k = v` on the bridge of length `table.n()`.
pub fn bridge_step_distribution(
    model: &WalkModel,
    table: &BackwardTable,
    v: &Vertex,
    k: usize,
) -> Result<Vec<(Vertex, f64)>> {
    table.check_model(model)?;
    model.validate(v)?;
    if k >= table.n {
        return Err(Error::InvalidSpec(format!(
            "step {k} is past the bridge length {}",
            table.n
        )));
    }
    let m = table.n - k;
    let mut out: Vec<(Vertex, f64)> = model
        .steps_from(v)
        .into_iter()
        .map(|(w, p)| {
            let g = table.scaled(model, m - 1, &w);
            (w, p * g)
        })
        .collect();
    let total: f64 = out.iter().map(|x| x.1).sum();
    if !(total > 0.0) {
        return Err(Error::UnreachableState { step: k });
    }
    for x in &mut out {
        x.1 /= total;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BridgePath {
    pub model_id: String,
    pub n: usize,
    /// `S_0..S_n`.
    pub vertices: Vec<Vertex>,
    /// True for bridges, false for unconditioned walks.
    pub conditioned: bool,
}

pub fn sample_bridge<R: Rng + ?Sized>(
    model: &WalkModel,
    table: &BackwardTable,
    rng: &mut R,
) -> Result<BridgePath> {
    let mut v = model.identity();
    let mut vertices = Vec::with_capacity(table.n + 1);
    vertices.push(v.clone());
    for k in 0..table.n {
        let mut dist = bridge_step_distribution(model, table, &v, k)?;
        let weights: Vec<f64> = dist.iter().map(|x| x.1).collect();
        let i = sample_weighted(&weights, rng);
        v = dist.swap_remove(i).0;
        vertices.push(v.clone());
    }
    Ok(BridgePath {
        model_id: model.id().to_string(),
        n: table.n,
        vertices,
        conditioned: true,
    })
}

/// Unconditioned walk of length `n` from `e`.
pub fn sample_walk<R: Rng + ?Sized>(model: &WalkModel, n: usize, rng: &mut R) -> BridgePath {
    let mut v = model.identity();
    let mut vertices = Vec::with_capacity(n + 1);
    vertices.push(v.clone());
    for _ in 0..n {
        let mut steps = model.steps_from(&v);
        let weights: Vec<f64> = steps.iter().map(|x| x.1).collect();
        let i = sample_weighted(&weights, rng);
        v = steps.swap_remove(i).0;
        vertices.push(v.clone());
    }
    BridgePath {
        model_id: model.id().to_string(),
        n,
        vertices,
        conditioned: false,
    }
}

/// Probability that [`sample_bridge`] outputs `path`: the product of the step
/// distribution values along it.
pub fn bridge_path_probability(
    model: &WalkModel,
    table: &BackwardTable,
    path: &[Vertex],
) -> Result<f64> {
    if path.len() != table.n + 1 {
        return Err(Error::InvalidSpec(format!(
            "path has {} vertices, expected {}",
            path.len(),
            table.n + 1
        )));
    }
    let mut prob = 1.0;
    for k in 0..table.n {
        let target = model.canonical_key(&path[k + 1]);
        let p = bridge_step_distribution(model, table, &path[k], k)?
            .into_iter()
            .filter(|(w, _)| model.canonical_key(w) == target)
            .map(|x| x.1)
            .sum::<f64>();
        prob *= p;
    }
    Ok(prob)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnumeratedPath {
    pub vertices: Vec<Vertex>,
    /// Unconditional probability of the step sequence.
    pub mass: f64,
    /// `mass / u_n` for bridges, `mass` for walks.
    pub conditional: f64,
}

/// Visits every step sequence of length `n` with its path and mass.
pub fn visit_walks<F: FnMut(&[Vertex], f64)>(model: &WalkModel, n: usize, mut visit: F) -> Result<()> {
    let count = (model.degree() as f64).powi(n as i32);
    if count > ENUMERATION_MAX_PATHS as f64 {
        return Err(Error::Budget {
            what: "enumerated walks",
            requested: count.min(u64::MAX as f64) as u64,
            limit: ENUMERATION_MAX_PATHS,
        });
    }
    let mut path = vec![model.identity()];
    fn recurse<F: FnMut(&[Vertex], f64)>(
        model: &WalkModel,
        n: usize,
        path: &mut Vec<Vertex>,
        mass: f64,
        visit: &mut F,
    ) {
        if path.len() == n + 1 {
            visit(path, mass);
            return;
        }
        for (w, p) in model.steps_from(path.last().unwrap()) {
            path.push(w);
            recurse(model, n, path, mass * p, visit);
            path.pop();
        }
    }
    recurse(model, n, &mut path, 1.0, &mut visit);
    Ok(())
}

/// All step sequences of length `n`; each path appears once per step sequence.
pub fn enumerate_walks(model: &WalkModel, n: usize) -> Result<Vec<EnumeratedPath>> {
    let mut out = Vec::new();
    visit_walks(model, n, |path, mass| {
        out.push(EnumeratedPath {
            vertices: path.to_vec(),
            mass,
            conditional: mass,
        })
    })?;
    Ok(out)
}

/// All step sequences of length `n` that end at `e`, with their conditional probabilities.
pub fn enumerate_bridges(model: &WalkModel, n: usize) -> Result<Vec<EnumeratedPath>> {
    check_period(model, n)?;
    let e = model.canonical_key(&model.identity());
    let mut out = Vec::new();
    visit_walks(model, n, |path, mass| {
        if model.canonical_key(&path[n]) == e {
            out.push(EnumeratedPath {
                vertices: path.to_vec(),
                mass,
                conditional: 0.0,
            });
        }
    })?;
    let total: f64 = out.iter().map(|p| p.mass).sum();
    if total == 0.0 {
        return Err(Error::UnreachableState { step: 0 });
    }
    for p in &mut out {
        p.conditional = p.mass / total;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;
    use crate::walk_models::{make_model, ModelSpec};

    fn tree2() -> WalkModel {
        WalkModel::tree(2).unwrap()
    }

    #[test]
    fn tree_table_values() {
        let m = tree2();
        let t = backward_table(&m, 6).unwrap();
        assert_eq!(t.value(&m, 0, &m.identity()), 1.0);
        assert_eq!(t.value(&m, 0, &Vertex::Tree(vec![0])), 0.0);
        assert!((t.value(&m, 1, &Vertex::Tree(vec![1])) - 1.0 / 3.0).abs() < 1e-16);
        assert!((t.value(&m, 3, &Vertex::Tree(vec![1])) - 5.0 / 27.0).abs() < 1e-16);
        assert!((t.value(&m, 4, &m.identity()) - 5.0 / 27.0).abs() < 1e-16);
        assert!(matches!(backward_table(&m, 5), Err(Error::Period { n: 5, period: 2 })));
    }

    #[test]
    fn tree_step_distribution() {
        let m = tree2();
        let t = backward_table(&m, 2).unwrap();
        let d = bridge_step_distribution(&m, &t, &m.identity(), 0).unwrap();
        assert!(d.iter().all(|(_, p)| (*p - 1.0 / 3.0).abs() < 1e-15));

        let t4 = backward_table(&m, 4).unwrap();
        let d = bridge_step_distribution(&m, &t4, &Vertex::Tree(vec![0]), 1).unwrap();
        assert!((d[0].1 - 0.6).abs() < 1e-15);
        assert!((d[1].1 - 0.2).abs() < 1e-15 && (d[2].1 - 0.2).abs() < 1e-15);
        assert!((d.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(matches!(
            bridge_step_distribution(&m, &t4, &Vertex::Tree(vec![0, 0, 0]), 2),
            Err(Error::UnreachableState { step: 2 })
        ));
    }

    #[test]
    fn tables_agree_across_constructions() {
        for model in [
            tree2(),
            make_model(&ModelSpec::Lattice { dim: 1, jumps: vec![1, 2] }).unwrap(),
            make_model(&ModelSpec::Lattice { dim: 2, jumps: vec![1] }).unwrap(),
        ] {
            let n = 6;
            let fast = backward_table(&model, n).unwrap();
            let slow = BackwardTable::build_generic(&model, n, 1_000_000).unwrap();
            let mut rng = trial_rng(11, 0);
            for _ in 0..50 {
                let path = sample_bridge(&model, &fast, &mut rng).unwrap();
                for (k, v) in path.vertices.iter().enumerate() {
                    let a = fast.log_value(&model, n - k, v);
                    let b = slow.log_value(&model, n - k, v);
                    assert!((a - b).abs() < 1e-12, "{} k={k}", model.id());
                    if k < n {
                        assert!(fast.consistency_residual(&model, n - k, v) < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn bridges_return_and_are_adjacent() {
        let m = make_model(&ModelSpec::Lattice { dim: 1, jumps: vec![1, 2] }).unwrap();
        let t = backward_table(&m, 3).unwrap();
        let e = m.canonical_key(&m.identity());
        let mut rng = trial_rng(5, 0);
        for _ in 0..200 {
            let p = sample_bridge(&m, &t, &mut rng).unwrap();
            assert_eq!(m.canonical_key(&p.vertices[3]), e);
            for w in p.vertices.windows(2) {
                let key = m.canonical_key(&w[1]);
                assert!(m.steps_from(&w[0]).iter().any(|(x, _)| m.canonical_key(x) == key));
            }
        }
    }

    #[test]
    fn enumeration_small_cases() {
        let z = make_model(&ModelSpec::Lattice { dim: 1, jumps: vec![1] }).unwrap();
        let b = enumerate_bridges(&z, 2).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b.iter().all(|p| p.conditional == 0.5));

        let t = enumerate_bridges(&tree2(), 4).unwrap();
        assert_eq!(t.len(), 15);
        let mass: f64 = t.iter().map(|p| p.mass).sum();
        assert!((mass - 5.0 / 27.0).abs() < 1e-16);

        let odd = make_model(&ModelSpec::Lattice { dim: 1, jumps: vec![1, 2] }).unwrap();
        assert!(!enumerate_bridges(&odd, 3).unwrap().is_empty());
        assert!(enumerate_bridges(&tree2(), 3).is_err());
        assert!(matches!(enumerate_walks(&tree2(), 30), Err(Error::Budget { .. })));
    }

    #[test]
    fn lattice_table_cap() {
        let m = make_model(&ModelSpec::Lattice { dim: 3, jumps: vec![1] }).unwrap();
        assert!(matches!(backward_table(&m, 50), Err(Error::Budget { .. })));
    }

    #[test]
    fn long_tree_table_stays_finite() {
        let m = WalkModel::tree(4).unwrap();
        let t = backward_table(&m, 4000).unwrap();
        let l = t.log_value(&m, 4000, &m.identity());
        assert!(l.is_finite() && l < -700.0);
        let mut rng = trial_rng(2, 0);
        let p = sample_bridge(&m, &t, &mut rng).unwrap();
        assert_eq!(p.vertices.last(), Some(&m.identity()));
    }
}
