//! Truncated power series in one variable.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{invalid, Result};

/// Highest retained order.
pub const MAX_ORDER: usize = 32;

/// `sum_k c[k] h^k`, truncated at a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    coeffs: Vec<f64>,
}

impl PowerSeries {
    pub fn new(mut coeffs: Vec<f64>, order: usize) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(invalid("order", format!("at most {MAX_ORDER}, got {order}")));
        }
        coeffs.resize(order + 1, 0.0);
        Ok(Self { coeffs })
    }

    pub fn constant(c: f64, order: usize) -> Result<Self> {
        Self::new(vec![c], order)
    }

    /// The series of `c0 + c1 h`.
    pub fn linear(c0: f64, c1: f64, order: usize) -> Result<Self> {
        Self::new(vec![c0, c1], order)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// `d^n/dh^n` at `h = 0`.
    pub fn derivative(&self, n: usize) -> f64 {
        self.coeff(n) * crate::special::factorial(n as u32)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `exp` of the series, by `b' = a' b`.
    pub fn exp(&self) -> Self {
        let n = self.order();
        let a = &self.coeffs;
        let mut b = vec![0.0; n + 1];
        b[0] = a[0].exp();
        for k in 1..=n {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * a[j] * b[k - j];
            }
            b[k] = s / k as f64;
        }
        Self { coeffs: b }
    }

    /// Principal square root; requires a positive constant term.
    pub fn sqrt(&self) -> Result<Self> {
        let a = &self.coeffs;
        if !(a[0] > 0.0) {
            return Err(invalid("series", "square root needs a positive constant term"));
        }
        let n = self.order();
        let mut s = vec![0.0; n + 1];
        s[0] = a[0].sqrt();
        for k in 1..=n {
            let mut acc = a[k];
            for j in 1..k {
                acc -= s[j] * s[k - j];
            }
            s[k] = acc / (2.0 * s[0]);
        }
        Ok(Self { coeffs: s })
    }

    /// `sum_k outer[k] self^k`; requires a vanishing constant term.
    pub fn compose_into(&self, outer: &[f64]) -> Result<Self> {
        if self.coeffs[0] != 0.0 {
            return Err(invalid("inner", "composition needs a zero constant term"));
        }
        let n = self.order();
        let mut acc = Self::constant(0.0, n)?;
        for &c in outer.iter().take(n + 1).rev() {
            acc = &(&acc * self) + &Self::constant(c, n)?;
        }
        Ok(acc)
    }

    fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.order(), other.order(), "series orders differ");
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }
}

impl Add for &PowerSeries {
    type Output = PowerSeries;
    fn add(self, rhs: &PowerSeries) -> PowerSeries {
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub for &PowerSeries {
    type Output = PowerSeries;
    fn sub(self, rhs: &PowerSeries) -> PowerSeries {
        self.zip(rhs, |a, b| a - b)
    }
}

impl Neg for &PowerSeries {
    type Output = PowerSeries;
    fn neg(self) -> PowerSeries {
        self.scale(-1.0)
    }
}

impl Mul for &PowerSeries {
    type Output = PowerSeries;
    fn mul(self, rhs: &PowerSeries) -> PowerSeries {
        assert_eq!(self.order(), rhs.order(), "series orders differ");
        let n = self.order();
        let mut c = vec![0.0; n + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().take(n + 1 - i).enumerate() {
                c[i + j] += a * b;
            }
        }
        PowerSeries { coeffs: c }
    }
}

/// Taylor coefficients of `E(u) = I_0(sqrt(u))` at `u0 >= 0`, multiplied by
/// `exp(-sqrt(u0))`, up to `order`.
pub fn bessel_i0_sqrt_taylor(u0: f64, order: usize) -> Result<Vec<f64>> {
    if !(u0 >= 0.0) {
        return Err(invalid("u0", format!("must be non-negative, got {u0}")));
    }
    let s0 = u0.sqrt();
    let mut c = vec![0.0; order + 1];
    if u0 < 400.0 {
        // Even series: E(u) = sum_k u^k / (4^k k!^2), re-expanded around u0.
        let scale = (-s0).exp();
        for (j, cj) in c.iter_mut().enumerate() {
            // term_k = e_k C(k, j) u0^{k-j}
            let mut term = 1.0;
            for k in 1..=j {
                term /= 4.0 * (k * k) as f64;
            }
            let mut sum = term;
            let mut k = j;
            loop {
                k += 1;
                term *= u0 * k as f64 / ((k - j) as f64 * 4.0 * (k * k) as f64);
                sum += term;
                if term < sum * 1e-17 || k > 2000 {
                    break;
                }
            }
            *cj = sum * scale;
        }
    } else {
        // 4 u E'' + 4 E' - E = 0 gives a two-term recurrence.
        c[0] = crate::special::bessel_i_scaled(0, s0);
        if order >= 1 {
            c[1] = crate::special::bessel_i_scaled(1, s0) / (2.0 * s0);
        }
        for k in 0..order.saturating_sub(1) {
            let kf = k as f64;
            c[k + 2] = (c[k] - 4.0 * (kf + 1.0) * (kf + 1.0) * c[k + 1])
                / (4.0 * u0 * (kf + 1.0) * (kf + 2.0));
        }
    }
    Ok(c)
}
