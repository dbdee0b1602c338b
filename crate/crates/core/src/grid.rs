//! Dense cubic grids of probabilities on `[-r, r]^d`, the storage behind the
//! lattice kernels and lattice backward tables.

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeGrid {
    dim: usize,
    radius: i64,
    side: usize,
    values: Vec<f64>,
}

impl LatticeGrid {
    pub fn zeros(dim: usize, radius: i64) -> Self {
        let side = (2 * radius + 1) as usize;
        Self {
            dim,
            radius,
            side,
            values: vec![0.0; side.pow(dim as u32)],
        }
    }

    /// Point mass at the origin.
    pub fn delta(dim: usize) -> Self {
        let mut g = Self::zeros(dim, 0);
        g.values[0] = 1.0;
        g
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    fn index(&self, x: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for &c in x {
            if c.abs() > self.radius {
                return None;
            }
            idx = idx * self.side + (c + self.radius) as usize;
        }
        Some(idx)
    }

    /// Value at `x`, zero outside the stored box.
    pub fn get(&self, x: &[i64]) -> f64 {
        self.index(x).map_or(0.0, |i| self.values[i])
    }

    pub fn origin(&self) -> f64 {
        self.get(&vec![0; self.dim])
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// One step of the walk: `out(y) = Σ_s p_s · self(y - s)`, restricted to
    /// `[-new_radius, new_radius]^d`. For symmetric laws this is also the
    /// backward recursion `Σ_s p_s · self(y + s)`.
    pub fn step(&self, law: &[(Vec<i64>, f64)], new_radius: i64) -> LatticeGrid {
        let mut out = LatticeGrid::zeros(self.dim, new_radius);
        let dim = self.dim;
        let mut coord = vec![-self.radius; dim];
        let mut target = vec![0i64; dim];
        for &v in &self.values {
            if v != 0.0 {
                for (jump, p) in law {
                    let mut inside = true;
                    for k in 0..dim {
                        target[k] = coord[k] + jump[k];
                        if target[k].abs() > new_radius {
                            inside = false;
                            break;
                        }
                    }
                    if inside {
                        let i = out.index(&target).expect("bounds checked");
                        out.values[i] += p * v;
                    }
                }
            }
            // odometer increment, last coordinate fastest
            for k in (0..dim).rev() {
                coord[k] += 1;
                if coord[k] > self.radius {
                    coord[k] = -self.radius;
                } else {
                    break;
                }
            }
        }
        out
    }
}
