//! Characteristic function `Z(p)` of the Wigner time for beta = 2.
//!
//! `Z(p)/Z(0) = E[e^{-N p t}]` with `t = tau_W / g`. It is evaluated as an
//! average of a determinant ratio over Cauchy-distributed `k`, in closed form
//! at perfect coupling, and as an empirical Laplace transform of sampled delays.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::coupling::{DelayKind, TimeDelayBatch};
use crate::ensembles::{cayley_reaction, haar_unitary};
use crate::error::{invalid, Error, Result};
use crate::oracles::rational_det;
use crate::parallel::run_batches;
use crate::special::{bessel_k_ln_seq, ln_factorial, ln_gamma};
use crate::stats;

/// Digits the numerator determinant may lose before a sample is rejected.
pub const MAX_LOST_DIGITS: f64 = 12.0;

/// Smallest relative spread of the `xi_j` accepted by [`detratio_g`].
pub const MIN_XI_SPREAD: f64 = 1e-10;

/// A real number stored as `sign * exp(ln_abs)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogDet {
    pub ln_abs: f64,
    pub sign: f64,
}

impl LogDet {
    pub fn new(ln_abs: f64, sign: f64) -> Self {
        Self { ln_abs, sign }
    }

    pub fn value(&self) -> f64 {
        self.sign * self.ln_abs.exp()
    }

    pub fn div(&self, other: &LogDet) -> LogDet {
        LogDet::new(self.ln_abs - other.ln_abs, self.sign * other.sign)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > 12 {
        Err(invalid("N", "must lie in 1..=12"))
    } else {
        Ok(())
    }
}

/// `Z_{N,2}(0) = pi^N 2^{-N^2} N! prod_{n=1}^N Gamma(N+n)`.
pub fn z0_closed(n: usize) -> Result<f64> {
    check_n(n)?;
    let nf = n as f64;
    let mut ln = nf * PI.ln() - nf * nf * 2f64.ln() + ln_factorial(n as u32);
    for k in 1..=n {
        ln += ln_gamma((n + k) as f64);
    }
    Ok(ln.exp())
}

/// `G(k, 0) = 2^{-N} prod_{n=1}^N Gamma(N+n)`, the same for every `k`.
pub fn g_at_zero(n: usize) -> Result<f64> {
    check_n(n)?;
    Ok(ln_g_at_zero(n).exp())
}

fn ln_g_at_zero(n: usize) -> f64 {
    (1..=n).map(|k| ln_gamma((n + k) as f64)).sum::<f64>() - n as f64 * 2f64.ln()
}

/// Determinant of a matrix with positive entries given by their logarithms.
/// Rows and columns are rescaled to unit maximum before a pivoted LU, and the
/// second value is the number of decimal digits lost against the Hadamard bound.
pub fn log_det_positive(ln: &DMatrix<f64>) -> (LogDet, f64) {
    let n = ln.nrows();
    let mut scale = 0.0;
    let mut m = ln.clone();
    for i in 0..n {
        let r = m.row(i).max();
        scale += r;
        for j in 0..n {
            m[(i, j)] -= r;
        }
    }
    for j in 0..n {
        let c = m.column(j).max();
        scale += c;
        for i in 0..n {
            m[(i, j)] -= c;
        }
    }
    let a = m.map(f64::exp);
    let det = a.clone().lu().determinant();
    let hadamard: f64 = a.column_iter().map(|c| c.norm().ln()).sum();
    if det == 0.0 || !det.is_finite() {
        return (LogDet::new(f64::NEG_INFINITY, 0.0), f64::INFINITY);
    }
    let lost = (hadamard - det.abs().ln()) / std::f64::consts::LN_10;
    (LogDet::new(scale + det.abs().ln(), det.signum()), lost)
}

/// `ln [x^{nu/2} K_nu(2 sqrt(x s))]`-type entries: returns
/// `(nu/2) ln(p/xi) + ln K_nu(2 sqrt(p xi))` for `nu = nu0, nu0+1, ...`, and
/// the `p -> 0` limit `ln Gamma(nu) - ln 2 - nu ln xi` at `p = 0`.
fn bessel_column(nu0: usize, count: usize, p: f64, xi: f64) -> Result<Vec<f64>> {
    if p == 0.0 {
        return Ok((0..count)
            .map(|m| {
                let nu = (nu0 + m) as f64;
                ln_gamma(nu) - 2f64.ln() - nu * xi.ln()
            })
            .collect());
    }
    let ks = bessel_k_ln_seq(nu0 as f64, count, 2.0 * (p * xi).sqrt())?;
    Ok(ks
        .into_iter()
        .enumerate()
        .map(|(m, lk)| 0.5 * (nu0 + m) as f64 * (p / xi).ln() + lk)
        .collect())
}

/// Determinant ratio `G(k, p)` whose Cauchy average is `Z(p)`, with
/// `xi_j = (1 + k_j^2)/(1 + g^2 k_j^2)`. The denominator uses the closed
/// Vandermonde product. A sample whose numerator loses more than
/// [`MAX_LOST_DIGITS`] digits is refused with [`Error::PrecisionLoss`].
pub fn detratio_g(k: &[f64], p: f64, g: f64) -> Result<LogDet> {
    let n = k.len();
    check_n(n)?;
    if !(p >= 0.0 && p.is_finite()) {
        return Err(invalid("p", "must be finite and non-negative"));
    }
    if !(g > 0.0 && g.is_finite()) {
        return Err(invalid("g", "must be positive"));
    }
    if (1.0 - g * g).abs() < 1e-12 {
        return detratio_g_perfect(n, p);
    }
    let xi: Vec<f64> = k.iter().map(|&x| (1.0 + x * x) / (1.0 + g * g * x * x)).collect();
    let xmax = xi.iter().cloned().fold(0.0, f64::max);
    let mut den_ln = -2.0 * n as f64 * xi.iter().map(|x| x.ln()).sum::<f64>();
    let mut den_sign = 1.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = (1.0 - g * g) * (k[i] * k[i] - k[j] * k[j])
                / ((1.0 + g * g * k[i] * k[i]) * (1.0 + g * g * k[j] * k[j]));
            if d.abs() < MIN_XI_SPREAD * xmax {
                return Err(Error::PrecisionLoss { ratio: xmax / d.abs() });
            }
            den_ln += d.abs().ln();
            den_sign *= d.signum();
        }
    }
    let mut ln = DMatrix::zeros(n, n);
    for (j, &x) in xi.iter().enumerate() {
        for (i, v) in bessel_column(n + 1, n, p, x)?.into_iter().enumerate() {
            ln[(i, j)] = v;
        }
    }
    let (num, lost) = log_det_positive(&ln);
    if lost > MAX_LOST_DIGITS {
        return Err(Error::PrecisionLoss { ratio: 10f64.powf(lost) });
    }
    Ok(num.div(&LogDet::new(den_ln, den_sign)))
}

/// Confluent limit `g = 1`: `det[p^{nu/2} K_nu(2 sqrt p)]` with
/// `nu = N + i + j - 1`, divided by `det[(N+i)_{j-1}] = prod_{m<N} m!`.
fn detratio_g_perfect(n: usize, p: f64) -> Result<LogDet> {
    let num = hankel_numerator(n, p)?;
    let superfactorial: f64 = (1..n as u32).map(ln_factorial).sum();
    Ok(LogDet::new(num.ln_abs - superfactorial, num.sign))
}

fn hankel_numerator(n: usize, p: f64) -> Result<LogDet> {
    let col = bessel_column(n + 1, 2 * n - 1, p, 1.0)?;
    let ln = DMatrix::from_fn(n, n, |i, j| col[i + j]);
    let (det, lost) = log_det_positive(&ln);
    if lost > MAX_LOST_DIGITS {
        return Err(Error::PrecisionLoss { ratio: 10f64.powf(lost) });
    }
    Ok(det)
}

/// `ln det[Gamma(N + i + j - 1)]`, exact.
fn ln_gamma_hankel(n: usize) -> f64 {
    let fact = |m: usize| (1..=m as u64).fold(BigInt::one(), |a, k| a * BigInt::from(k));
    let m: Vec<Vec<BigRational>> = (1..=n)
        .map(|i| (1..=n).map(|j| BigRational::from_integer(fact(n + i + j - 2))).collect())
        .collect();
    rational_det(m).to_f64().map(f64::ln).unwrap_or(f64::NAN)
}

/// `Z(p)/Z(0)` at perfect coupling from the Hankel determinant
/// `det[p^{nu/2} K_nu(2 sqrt p)] / det[Gamma(nu)/2]`, `nu = N + i + j - 1`.
pub fn z_perfect_hankel(n: usize, p: f64) -> Result<LogDet> {
    check_n(n)?;
    if !(p >= 0.0 && p.is_finite()) {
        return Err(invalid("p", "must be finite and non-negative"));
    }
    if p == 0.0 {
        return Ok(LogDet::new(0.0, 1.0));
    }
    let num = hankel_numerator(n, p)?;
    let den = ln_gamma_hankel(n) - n as f64 * 2f64.ln();
    Ok(LogDet::new(num.ln_abs - den, num.sign))
}

/// One characteristic-function value with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZPoint {
    pub p: f64,
    pub z_ratio: f64,
    pub se: f64,
    pub method: String,
}

/// Monte Carlo estimate of `Z(p)/Z(0)` on a grid of `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZEstimate {
    pub points: Vec<ZPoint>,
    pub accepted: usize,
    pub rejected: usize,
}

impl ZEstimate {
    pub fn rejection_fraction(&self) -> f64 {
        self.rejected as f64 / (self.accepted + self.rejected).max(1) as f64
    }
}

/// Averages `G(k, p)/G(k, 0)` over `k` drawn as eigenvalues of the reaction
/// matrix of a CUE matrix, which follow the beta = 2 Cauchy law.
pub fn z_ratio_mc(
    n: usize,
    g: f64,
    ps: &[f64],
    samples: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<ZEstimate> {
    check_n(n)?;
    if samples == 0 {
        return Err(invalid("samples", "must be at least 1"));
    }
    let ln_g0 = ln_g_at_zero(n);
    let batches = run_batches(seed, samples, workers, |stream, count| {
        let mut rng = stream.rng();
        let mut rows = Vec::with_capacity(count);
        let mut rejected = 0usize;
        for _ in 0..count {
            let s = haar_unitary(n, &mut rng)?;
            let k = match cayley_reaction(&s) {
                Ok(k) => k.eigenvalues()?,
                Err(Error::NearSingular(_)) => {
                    rejected += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let row: Result<Vec<f64>> = ps
                .iter()
                .map(|&p| {
                    if p == 0.0 {
                        Ok(0.0)
                    } else {
                        let r = detratio_g(&k, p, g)?;
                        if r.sign <= 0.0 {
                            return Err(Error::Invariant("negative determinant ratio".into()));
                        }
                        Ok(r.ln_abs - ln_g0)
                    }
                })
                .collect();
            match row {
                Ok(r) => rows.push(r),
                Err(Error::PrecisionLoss { .. }) => rejected += 1,
                Err(e) => return Err(e),
            }
        }
        Ok((rows, rejected))
    })?;
    let rejected = batches.iter().map(|b| b.1).sum();
    let rows: Vec<Vec<f64>> = batches.into_iter().flat_map(|b| b.0).collect();
    if rows.is_empty() {
        return Err(Error::Insufficient("every sample was rejected".into()));
    }
    let points = ps
        .iter()
        .enumerate()
        .map(|(c, &p)| {
            let (mean, se) = log_mean(rows.iter().map(|r| r[c]));
            ZPoint { p, z_ratio: mean, se, method: "mc".into() }
        })
        .collect();
    Ok(ZEstimate { points, accepted: rows.len(), rejected })
}

/// Mean and standard error of `exp(l)` over the given logarithms.
fn log_mean(ls: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let m = ls.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return (0.0, 0.0);
    }
    let xs: Vec<f64> = ls.map(|l| (l - m).exp()).collect();
    let (mean, var) = stats::mean_variance(&xs);
    let scale = m.exp();
    (mean * scale, (var / xs.len() as f64).sqrt() * scale)
}

/// `E[e^{-N p t}]` with `t = 2 tau / (beta g)` over sampled Wigner times, with
/// a batch-means standard error.
/// `E[exp(-N p t)]` with `t = 2 tau_W/(beta g)` over a batch of Wigner times.
pub fn laplace_empirical(batch: &TimeDelayBatch, p: f64) -> Result<(f64, f64)> {
    if batch.kind != DelayKind::Wigner {
        return Err(invalid("batch", format!("expected Wigner times, got {}", batch.kind)));
    }
    laplace_from_times(&batch.values, batch.beta as f64, batch.channels, batch.g, p)
}

pub fn laplace_from_times(taus: &[f64], beta: f64, n: usize, g: f64, p: f64) -> Result<(f64, f64)> {
    if taus.is_empty() {
        return Err(Error::Insufficient("empty batch".into()));
    }
    if !(p >= 0.0) {
        return Err(invalid("p", "must be non-negative"));
    }
    if p == 0.0 {
        return Ok((1.0, 0.0));
    }
    let c = n as f64 * p * 2.0 / (beta * g);
    let xs: Vec<f64> = taus.iter().map(|t| (-c * t).exp()).collect();
    Ok(stats::batch_means(&xs, 32))
}

/// Least-squares fit of `ln Z = c + power ln p - rate sqrt p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeftTailFit {
    pub power: f64,
    pub power_se: f64,
    pub rate: f64,
    pub rate_se: f64,
    pub ln_amplitude: f64,
}

/// Fits `ln Z = c + power ln p - rate sqrt(p) + d/sqrt(p)`, the last term
/// absorbing the leading correction to the asymptotic form.
pub fn fit_left_tail(ps: &[f64], zs: &[f64], ses: Option<&[f64]>) -> Result<LeftTailFit> {
    if ps.len() != zs.len() || ps.len() < 5 {
        return Err(Error::Insufficient("need at least five (p, Z) points".into()));
    }
    if zs.iter().any(|z| !(*z > 0.0)) {
        return Err(Error::Insufficient("non-positive Z value".into()));
    }
    let y: Vec<f64> = zs.iter().map(|z| z.ln()).collect();
    let cols = vec![
        ps.iter().map(|p| p.ln()).collect(),
        ps.iter().map(|p| -p.sqrt()).collect(),
        ps.iter().map(|p| p.sqrt().recip()).collect(),
    ];
    let w: Option<Vec<f64>> = ses.map(|s| {
        s.iter()
            .zip(zs)
            .map(|(e, z)| {
                let rel = (e / z).max(1e-12);
                1.0 / (rel * rel)
            })
            .collect()
    });
    let (c, se) = stats::least_squares(&cols, &y, w.as_deref())?;
    Ok(LeftTailFit {
        power: c[1],
        power_se: se[1],
        rate: c[2],
        rate_se: se[2],
        ln_amplitude: c[0],
    })
}
