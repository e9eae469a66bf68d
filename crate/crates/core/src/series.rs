//! Truncated Laurent series arithmetic in a local variable x = z - p.
//!
//! A [`Series`] stores coefficients for orders `lo ..= hi` and tracks
//! how far its coefficients can be trusted: products of truncated
//! series are only reliable up to the order where missing tail terms of
//! one factor would first contribute. All operations propagate that
//! trust window, so a residual computed from series of order N is exact
//! (up to rounding) through the order it reports.

use num_complex::Complex64;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Coefficients c[i] of Σ c[i] x^(lo + i), trusted through order `hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub lo: i32,
    pub coeffs: Vec<C>,
}

impl Series {
    pub fn new(lo: i32, coeffs: Vec<C>) -> Self {
        assert!(!coeffs.is_empty());
        Self { lo, coeffs }
    }

    /// A constant (order-0) term, trusted through `hi`.
    pub fn constant(value: C, hi: i32) -> Self {
        let mut s = Self::zero_through(0, hi);
        s.coeffs[0] = value;
        s
    }

    /// Zero series with explicit trust window.
    pub fn zero_through(lo: i32, hi: i32) -> Self {
        assert!(hi >= lo);
        Self {
            lo,
            coeffs: vec![ZERO; (hi - lo + 1) as usize],
        }
    }

    pub fn hi(&self) -> i32 {
        self.lo + self.coeffs.len() as i32 - 1
    }

    /// Coefficient of x^k (zero outside the stored range).
    pub fn coeff(&self, k: i32) -> C {
        if k < self.lo || k > self.hi() {
            ZERO
        } else {
            self.coeffs[(k - self.lo) as usize]
        }
    }

    pub fn set_coeff(&mut self, k: i32, v: C) {
        assert!(k >= self.lo && k <= self.hi());
        self.coeffs[(k - self.lo) as usize] = v;
    }

    /// Drop coefficients above `hi` (narrow the trust window).
    pub fn truncate(&self, hi: i32) -> Self {
        assert!(hi >= self.lo);
        let keep = ((hi - self.lo + 1) as usize).min(self.coeffs.len());
        Self {
            lo: self.lo,
            coeffs: self.coeffs[..keep].to_vec(),
        }
    }

    pub fn add(&self, other: &Series) -> Series {
        let lo = self.lo.min(other.lo);
        let hi = self.hi().min(other.hi());
        let mut out = Series::zero_through(lo, hi);
        for k in lo..=hi {
            out.set_coeff(k, self.coeff(k) + other.coeff(k));
        }
        out
    }

    pub fn sub(&self, other: &Series) -> Series {
        self.add(&other.scale(C::new(-1.0, 0.0)))
    }

    pub fn scale(&self, factor: C) -> Series {
        Series {
            lo: self.lo,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Product, truncated to the trustworthy range
    /// min(self.hi + other.lo, other.hi + self.lo).
    pub fn mul(&self, other: &Series) -> Series {
        let lo = self.lo + other.lo;
        let hi = (self.hi() + other.lo).min(other.hi() + self.lo);
        let mut out = Series::zero_through(lo, hi);
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let ka = self.lo + i as i32;
            for (j, b) in other.coeffs.iter().enumerate() {
                let k = ka + other.lo + j as i32;
                if k > hi {
                    break;
                }
                let v = out.coeff(k) + a * b;
                out.set_coeff(k, v);
            }
        }
        out
    }

    /// Term-by-term derivative d/dx.
    pub fn derivative(&self) -> Series {
        let lo = self.lo - 1;
        let hi = self.hi() - 1;
        let mut out = Series::zero_through(lo, hi);
        for k in self.lo..=self.hi() {
            if k == 0 {
                continue;
            }
            out.set_coeff(k - 1, self.coeff(k) * C::new(k as f64, 0.0));
        }
        out
    }

    /// Multiply by (c0 + x), i.e. by the local expansion of z = p + x.
    pub fn mul_linear(&self, c0: C) -> Series {
        let lo = self.lo;
        let hi = self.hi(); // x-term pushes order up; trust capped at own hi
        let mut out = Series::zero_through(lo, hi);
        for k in lo..=hi {
            out.set_coeff(k, self.coeff(k) * c0 + self.coeff(k - 1));
        }
        out
    }

    /// Reciprocal of a series with a simple zero or pole at x = 0:
    /// requires the leading stored coefficient to be nonzero.
    pub fn reciprocal(&self) -> Series {
        let lead = self.coeffs[0];
        assert!(lead.norm() > 0.0, "reciprocal of series with zero leading term");
        // 1 / (lead x^lo (1 + u)) with u = higher terms / lead
        let m = self.coeffs.len();
        let mut inv_unit = vec![ZERO; m];
        inv_unit[0] = C::new(1.0, 0.0);
        for k in 1..m {
            let mut acc = ZERO;
            for j in 1..=k {
                acc += self.coeffs[j] / lead * inv_unit[k - j];
            }
            inv_unit[k] = -acc;
        }
        let coeffs = inv_unit.into_iter().map(|c| c / lead).collect();
        Series {
            lo: -self.lo,
            coeffs,
        }
    }

    /// Evaluate Σ c_k x^k at x.
    pub fn eval(&self, x: C) -> C {
        // ascending Horner on the non-negative part, explicit powers below
        let mut acc = ZERO;
        for k in (0.max(self.lo)..=self.hi()).rev() {
            acc = acc * x + self.coeff(k);
        }
        if self.lo < 0 {
            let inv = C::new(1.0, 0.0) / x;
            let mut xp = inv;
            for k in 1..=(-self.lo) {
                acc += self.coeff(-k) * xp;
                xp *= inv;
            }
        }
        acc
    }

    /// Largest coefficient magnitude over the stored range.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}
