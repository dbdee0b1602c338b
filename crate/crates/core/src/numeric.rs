//! Small numerical helpers shared by the kernel and statistics code.

/// Least-squares solution of `design · beta ≈ y` by modified Gram-Schmidt QR.
///
/// Columns are rescaled to unit max-norm before factorization so that mixed
/// regressors such as `1`, `n` and `ln n` stay well conditioned.
pub fn least_squares(design: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let rows = design.len();
    assert!(rows > 0 && rows == y.len());
    let cols = design[0].len();
    let mut scale = vec![0.0f64; cols];
    for row in design {
        for (s, v) in scale.iter_mut().zip(row) {
            *s = s.max(v.abs());
        }
    }
    for s in &mut scale {
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    // column-major copy
    let mut q: Vec<Vec<f64>> = (0..cols)
        .map(|j| design.iter().map(|row| row[j] / scale[j]).collect())
        .collect();
    let mut r = vec![vec![0.0; cols]; cols];
    for j in 0..cols {
        for i in 0..j {
            let dot: f64 = q[i].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
            r[i][j] = dot;
            let qi = q[i].clone();
            for (a, b) in q[j].iter_mut().zip(&qi) {
                *a -= dot * b;
            }
        }
        let norm = q[j].iter().map(|a| a * a).sum::<f64>().sqrt();
        r[j][j] = norm;
        if norm > 0.0 {
            for a in &mut q[j] {
                *a /= norm;
            }
        }
    }
    let qty: Vec<f64> = q
        .iter()
        .map(|col| col.iter().zip(y).map(|(a, b)| a * b).sum())
        .collect();
    let mut beta = vec![0.0; cols];
    for j in (0..cols).rev() {
        let mut acc = qty[j];
        for k in j + 1..cols {
            acc -= r[j][k] * beta[k];
        }
        beta[j] = if r[j][j] != 0.0 { acc / r[j][j] } else { 0.0 };
    }
    beta.iter().zip(&scale).map(|(b, s)| b / s).collect()
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let design: Vec<Vec<f64>> = x.iter().map(|&v| vec![1.0, v]).collect();
    least_squares(&design, y)[1]
}

/// `Σ (a + b/n) n^{-gamma} ratio^n` over `n > start` with `period | n`.
///
/// `ratio` must be at most 1. Terms are summed explicitly up to a cap, then the
/// remainder is approximated by a midpoint integral, which is accurate to
/// relative order `cap^{-2}`.
pub fn power_tail_sum(a: f64, b: f64, gamma: f64, ratio: f64, start: usize, period: usize) -> f64 {
    assert!(ratio <= 1.0 && ratio > 0.0);
    let p = period.max(1);
    let first = (start / p + 1) * p;
    let log_ratio = ratio.ln();
    let term = |n: f64| (a + b / n) * (-gamma * n.ln() + n * log_ratio).exp();
    const CAP: usize = 2_000_000;
    let mut sum = 0.0;
    let mut n = first;
    let mut steps = 0usize;
    loop {
        let t = term(n as f64);
        sum += t;
        steps += 1;
        n += p;
        if t.abs() < 1e-18 * sum.abs().max(1e-300) && log_ratio < 0.0 {
            return sum;
        }
        if steps >= CAP {
            break;
        }
    }
    if log_ratio < 0.0 {
        // geometric remainder bound
        let t = term(n as f64);
        return sum + t / (1.0 - ratio.powi(p as i32));
    }
    if gamma <= 1.0 {
        return f64::INFINITY;
    }
    // Σ_{n ≥ n0, step p} n^{-γ} ≈ (1/p) ∫_{n0 - p/2}^∞ x^{-γ} dx
    let x0 = n as f64 - p as f64 / 2.0;
    let integral_a = x0.powf(1.0 - gamma) / (gamma - 1.0);
    let integral_b = x0.powf(-gamma) / gamma;
    sum + (a * integral_a + b * integral_b) / p as f64
}

/// Numerically stable `ln(e^a + e^b)`.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_fit() {
        let xs: Vec<f64> = (1..50).map(|i| i as f64 * 10.0).collect();
        let design: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x, x.ln()]).collect();
        let y: Vec<f64> = xs.iter().map(|&x| 2.0 - 0.05 * x - 1.5 * x.ln()).collect();
        let beta = least_squares(&design, &y);
        assert!((beta[0] - 2.0).abs() < 1e-9);
        assert!((beta[1] + 0.05).abs() < 1e-12);
        assert!((beta[2] + 1.5).abs() < 1e-9);
    }

    #[test]
    fn tail_sum_matches_direct_sum() {
        // Σ_{n>10, even} n^{-3/2}: compare against a long explicit sum plus integral
        let direct: f64 = (6..20_000_000usize)
            .map(|k| (2 * k) as f64)
            .map(|n| n.powf(-1.5))
            .sum::<f64>()
            + (40_000_000f64 - 1.0).powf(-0.5);
        let tail = power_tail_sum(1.0, 0.0, 1.5, 1.0, 10, 2);
        assert!((tail - direct).abs() < 1e-6, "{tail} vs {direct}");

        let geo = power_tail_sum(1.0, 0.0, 0.0, 0.5, 0, 1);
        assert!((geo - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_add_basic() {
        assert!((log_add(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_add(f64::NEG_INFINITY, 1.5), 1.5);
    }
}
