//! Closed forms for simple random walk on the tree with degree `b + 1`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::FirstReturnSequence;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeClosedForms {
    pub b: u32,
    /// `λ = b / (b+1)^2`.
    pub lambda: f64,
    /// Return probability `F = 1/b`.
    pub escape: f64,
    /// `ρ = (b+1) / (2√b)`.
    pub rho: f64,
    /// `F(ρ) = (b+1) / (2b)`.
    pub f_at_rho: f64,
}

impl TreeClosedForms {
    pub fn new(b: u32) -> Self {
        assert!(b >= 2, "tree needs b >= 2");
        let bf = b as f64;
        Self {
            b,
            lambda: bf / ((bf + 1.0) * (bf + 1.0)),
            escape: 1.0 / bf,
            rho: (bf + 1.0) / (2.0 * bf.sqrt()),
            f_at_rho: (bf + 1.0) / (2.0 * bf),
        }
    }

    /// `ln f_{2k} = ln[(b+1)/b · C(2k-1, k) λ^k / (2k-1)]`.
    pub fn log_first_return(&self, k: usize) -> f64 {
        assert!(k >= 1);
        let bf = self.b as f64;
        // C(2k-1, k) = Π_{i=1}^{k-1} (k+i)/i
        let log_binom: f64 = (1..k).map(|i| ((k + i) as f64 / i as f64).ln()).sum();
        ((bf + 1.0) / bf).ln() + log_binom - ((2 * k - 1) as f64).ln() + k as f64 * self.lambda.ln()
    }

    pub fn first_return(&self, k: usize) -> f64 {
        self.log_first_return(k).exp()
    }

    /// `f_0..f_N` from the closed form, built by the term ratio
    /// `f_{2k+2} / f_{2k} = 2(2k-1)λ / (k+1)`.
    pub fn first_return_sequence(&self, n_max: usize) -> FirstReturnSequence {
        let mut log_f = vec![f64::NEG_INFINITY; n_max + 1];
        if n_max >= 2 {
            let mut current = self.log_first_return(1);
            log_f[2] = current;
            let ln_lambda = self.lambda.ln();
            let mut k = 1usize;
            while 2 * (k + 1) <= n_max {
                current += (2.0 * (2 * k - 1) as f64 / (k + 1) as f64).ln() + ln_lambda;
                k += 1;
                log_f[2 * k] = current;
            }
        }
        FirstReturnSequence::from_logs(log_f, 2)
    }

    /// Closed-form `F(z) = (b+1)/(2b) · (1 - √(1 - 4λz²))` for `|z| ≤ ρ`.
    pub fn f_generating(&self, z: f64) -> f64 {
        let c = (self.b as f64 + 1.0) / (2.0 * self.b as f64);
        c - c * (1.0 - 4.0 * self.lambda * z * z).max(0.0).sqrt()
    }

    /// Closed-form `U(z) = 2b / (b - 1 + (b+1)√(1 - 4λz²))`.
    pub fn u_generating(&self, z: f64) -> f64 {
        let bf = self.b as f64;
        2.0 * bf / (bf - 1.0 + (bf + 1.0) * (1.0 - 4.0 * self.lambda * z * z).max(0.0).sqrt())
    }

    /// Exact coefficients `u_0..u_N` of `U(z)` by rational power-series inversion.
    pub fn u_series_rational(&self, n_max: usize) -> Vec<BigRational> {
        let b = BigInt::from(self.b);
        let lambda = BigRational::new(b.clone(), (&b + 1u32) * (&b + 1u32));
        let kmax = n_max / 2;
        // √(1 - 4λw) = 1 - Σ_{k≥1} C(2k,k) λ^k / (2k-1) w^k, with w = z²
        let mut sqrt_coeffs = vec![BigRational::one()];
        let mut central = BigInt::one();
        let mut lambda_pow = BigRational::one();
        for k in 1..=kmax {
            central = central * BigInt::from(2 * (2 * k - 1)) / BigInt::from(k);
            lambda_pow = &lambda_pow * &lambda;
            let term = BigRational::from_integer(central.clone()) * &lambda_pow
                / BigRational::from_integer(BigInt::from(2 * k - 1));
            sqrt_coeffs.push(-term);
        }
        // denominator D(w) = b - 1 + (b+1)√(1-4λw); U = 2b / D
        let bp1 = BigRational::from_integer(&b + 1u32);
        let mut denom: Vec<BigRational> = sqrt_coeffs.iter().map(|c| &bp1 * c).collect();
        denom[0] += BigRational::from_integer(&b - 1u32);
        let two_b = BigRational::from_integer(&b * 2u32);
        let mut inv: Vec<BigRational> = Vec::with_capacity(kmax + 1);
        for k in 0..=kmax {
            let mut acc = if k == 0 {
                two_b.clone()
            } else {
                BigRational::zero()
            };
            for j in 1..=k {
                acc -= &denom[j] * &inv[k - j];
            }
            inv.push(acc / &denom[0]);
        }
        let mut out = vec![BigRational::zero(); n_max + 1];
        for (k, c) in inv.into_iter().enumerate() {
            out[2 * k] = c;
        }
        out
    }

    pub fn u_series(&self, n_max: usize) -> Vec<f64> {
        self.u_series_rational(n_max)
            .iter()
            .map(|c| c.to_f64().unwrap_or(0.0))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_for_b2() {
        let t = TreeClosedForms::new(2);
        assert!((t.lambda - 2.0 / 9.0).abs() < 1e-16);
        assert!((t.rho - 1.0606601717798212).abs() < 1e-15);
        assert!((4.0 * t.lambda * t.rho * t.rho - 1.0).abs() < 1e-15);
        assert_eq!(t.escape, 0.5);
        assert_eq!(t.f_at_rho, 0.75);
    }

    #[test]
    fn first_terms() {
        for b in 2..6 {
            let t = TreeClosedForms::new(b);
            assert!((t.first_return(1) - 1.0 / (b as f64 + 1.0)).abs() < 1e-15);
        }
        let t = TreeClosedForms::new(2);
        assert!((t.first_return(2) - 2.0 / 27.0).abs() < 1e-16);
        let seq = t.first_return_sequence(400);
        for k in 1..=200 {
            let direct = t.log_first_return(k);
            assert!((seq.log_f[2 * k] - direct).abs() < 1e-11);
        }
    }

    #[test]
    fn rational_u_series() {
        let t = TreeClosedForms::new(2);
        let u = t.u_series_rational(6);
        assert_eq!(u[0], BigRational::one());
        assert_eq!(u[2], BigRational::new(1.into(), 3.into()));
        assert_eq!(u[4], BigRational::new(5.into(), 27.into()));
        assert!(u[1].is_zero() && u[3].is_zero());
    }

    #[test]
    fn closed_generating_functions() {
        let t = TreeClosedForms::new(3);
        assert!((t.f_generating(1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((t.f_generating(t.rho) - t.f_at_rho).abs() < 1e-12);
        // renewal: U = 1/(1 - F)
        for z in [0.3, 0.7, 1.0, 1.1] {
            assert!((t.u_generating(z) - 1.0 / (1.0 - t.f_generating(z))).abs() < 1e-12);
        }
    }
}
