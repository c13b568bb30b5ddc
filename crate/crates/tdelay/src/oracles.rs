//! Closed-form and quadrature evaluation of exact time-delay statistics.
//!
//! Times are in Heisenberg units. Functions of the partial and proper times at
//! arbitrary coupling take `g_bar = 2/T - 1 >= 1`.

use std::f64::consts::PI;
use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::charfunc::z0_closed;
use crate::ddouble::CompensatedSum;
use crate::ensembles::SymmetryClass;
use crate::error::{invalid, Error, Result};
use crate::quad;
use crate::series::{bessel_i0_sqrt_taylor, PowerSeries, MAX_ORDER};
use crate::special::{
    double_factorial_odd, factorial, gamma_q, kummer_u_half, ln_barnes_g_int, ln_factorial,
    ln_gamma,
};

/// Largest accepted `sum |terms| / |sum|` in the derivative formulas.
pub const MAX_CANCELLATION: f64 = 1e9;

const QUAD_TOL: f64 = 1e-11;

fn check_channels(n: usize) -> Result<()> {
    if n == 0 {
        Err(invalid("N", "channel count must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_g_bar(g_bar: f64) -> Result<()> {
    if g_bar >= 1.0 && g_bar.is_finite() {
        Ok(())
    } else {
        Err(invalid("g_bar", format!("must be >= 1 and finite, got {g_bar}")))
    }
}

fn check_transmission(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(invalid("T", format!("must lie in (0, 1], got {t}")))
    }
}

fn check_positive(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {x}")))
    }
}

fn half_beta_n(beta: SymmetryClass, n: usize) -> f64 {
    beta.beta_f64() * n as f64 / 2.0
}

/// `g_bar = 2/T - 1`.
pub fn g_bar_from_transmission(t: f64) -> Result<f64> {
    check_transmission(t)?;
    Ok(2.0 / t - 1.0)
}

/// `sqrt(g_bar^2 - 1)` and the small coupling `g_bar - sqrt(g_bar^2 - 1)`.
fn g_bar_parts(g_bar: f64) -> (f64, f64) {
    let a = ((g_bar - 1.0) * (g_bar + 1.0)).sqrt();
    (a, 1.0 / (g_bar + a))
}

fn divergent_guard(beta: SymmetryClass, n: usize) -> Result<f64> {
    check_channels(n)?;
    let bn = beta.beta() as u32 * n as u32;
    if bn <= 2 {
        return Err(Error::DivergentMoment(bn));
    }
    Ok(bn as f64 - 2.0)
}

/// Variance of the Wigner time at perfect coupling.
pub fn var_wigner_perfect(beta: SymmetryClass, n: usize) -> Result<f64> {
    let d = divergent_guard(beta, n)?;
    let nf = n as f64;
    Ok(4.0 / (nf * nf * (nf + 1.0) * d))
}

/// Variance of one partial time at perfect coupling.
pub fn var_partial_perfect(beta: SymmetryClass, n: usize) -> Result<f64> {
    let d = divergent_guard(beta, n)?;
    let nf = n as f64;
    Ok(2.0 / (nf * nf * d))
}

/// Covariance of two distinct partial times at perfect coupling.
pub fn cov_partial_perfect(beta: SymmetryClass, n: usize) -> Result<f64> {
    Ok(var_partial_perfect(beta, n)? / (n as f64 + 1.0))
}

/// Variance of one proper time at perfect coupling.
pub fn var_proper_perfect(beta: SymmetryClass, n: usize) -> Result<f64> {
    let d = divergent_guard(beta, n)?;
    let nf = n as f64;
    let b = beta.beta_f64();
    Ok((nf * (b * (nf - 1.0) + 2.0) + 2.0) / (nf * nf * (nf + 1.0) * d))
}

/// Covariance of two distinct proper times at perfect coupling.
pub fn cov_proper_perfect(beta: SymmetryClass, n: usize) -> Result<f64> {
    divergent_guard(beta, n)?;
    let nf = n as f64;
    Ok(-1.0 / (nf * nf * (nf + 1.0)))
}

fn check_unitary_args(n: usize, t: f64) -> Result<f64> {
    if n < 2 {
        return Err(invalid("N", "the unitary-class formulas need N >= 2"));
    }
    check_transmission(t)?;
    Ok(n as f64)
}

/// Variance of the Wigner time for beta = 2 at transmission `t`.
pub fn var_wigner_unitary(n: usize, t: f64) -> Result<f64> {
    let nf = check_unitary_args(n, t)?;
    let num = 2.0 * -(-t).ln_1p().mul_add(nf + 1.0, 0.0).exp_m1();
    Ok(num / (t * t * nf * nf * (nf * nf - 1.0)))
}

/// Variance of one partial time for beta = 2 at transmission `t`.
pub fn var_partial_unitary(n: usize, t: f64) -> Result<f64> {
    let nf = check_unitary_args(n, t)?;
    Ok((2.0 * nf * (1.0 / t - 1.0) + 1.0) / (nf * nf * (nf - 1.0)))
}

/// Covariance of two distinct partial times for beta = 2 at transmission `t`.
pub fn cov_partial_unitary(n: usize, t: f64) -> Result<f64> {
    let nf = check_unitary_args(n, t)?;
    let one_minus = -(-t).ln_1p().mul_add(nf + 1.0, 0.0).exp_m1();
    let bracket = 2.0 * one_minus / (nf + 1.0) - 2.0 * t * (1.0 - t) - t * t / nf;
    Ok(bracket / (t * t * nf * (nf - 1.0) * (nf - 1.0)))
}

/// Density of the rescaled resonance width `y` (chi-square with beta N
/// degrees of freedom, unit mean).
pub fn resonance_width_pdf(beta: SymmetryClass, n: usize, y: f64) -> Result<f64> {
    check_channels(n)?;
    check_positive("y", y)?;
    let k = half_beta_n(beta, n);
    Ok((k * k.ln() - ln_gamma(k) + (k - 1.0) * y.ln() - k * y).exp())
}

/// Marginal density of a partial time at perfect coupling.
pub fn pdf_partial_perfect(beta: SymmetryClass, n: usize, tau: f64) -> Result<f64> {
    check_channels(n)?;
    check_positive("tau", tau)?;
    Ok(partial_perfect_unchecked(beta.beta_f64(), half_beta_n(beta, n), tau))
}

fn partial_perfect_unchecked(b: f64, k: f64, tau: f64) -> f64 {
    if !(tau > 0.0) {
        return 0.0;
    }
    let hb = b / 2.0;
    ((1.0 + k) * hb.ln() - ln_gamma(1.0 + k) - hb / tau - (2.0 + k) * tau.ln()).exp()
}

/// `P(tau_0 <= x)` at perfect coupling: `1/tau_0` is Gamma(1 + beta N/2, rate beta/2).
fn partial_perfect_cdf(b: f64, k: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    gamma_q(1.0 + k, b / (2.0 * x))
}

/// `(2/pi) int_0^inf dv/(1+v^2) h(D(v))` with
/// `D(v) = (1/g_s + g_s v^2)/(1 + v^2)`, the phase average at coupling `g_bar`.
fn phase_average(g_bar: f64, focus: Option<f64>, h: impl Fn(f64) -> f64) -> Result<f64> {
    let (_, gs) = g_bar_parts(g_bar);
    if gs == 1.0 {
        return Ok(h(1.0));
    }
    let d_of = |v: f64| {
        let v2 = v * v;
        (1.0 / gs + gs * v2) / (1.0 + v2)
    };
    let integrand = |v: f64| 2.0 / PI * h(d_of(v)) / (1.0 + v * v);
    let far = 10.0 / gs;
    let mut breaks = vec![0.0, 1.0, gs.sqrt().recip(), 1.0 / gs, far];
    if let Some(d) = focus {
        if d > gs && d < 1.0 / gs {
            breaks.push(((1.0 / gs - d) / (d - gs)).sqrt());
        }
    }
    breaks.retain(|b| *b <= far);
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * b.abs().max(1.0));
    let head = quad::integrate_with_breaks(integrand, &breaks, QUAD_TOL)?;
    let tail = quad::integrate_semi_infinite(integrand, far, far, QUAD_TOL)?;
    Ok(head + tail)
}

/// Marginal density of a partial time at arbitrary coupling, from the
/// one-dimensional phase integral with `u = v^2`.
pub fn pdf_partial(beta: SymmetryClass, n: usize, g_bar: f64, tau: f64) -> Result<f64> {
    check_channels(n)?;
    check_g_bar(g_bar)?;
    check_positive("tau", tau)?;
    let b = beta.beta_f64();
    let k = half_beta_n(beta, n);
    let mode = b / (2.0 * (2.0 + k));
    phase_average(g_bar, Some(mode / tau), |d| d * partial_perfect_unchecked(b, k, tau * d))
}

/// Cumulative distribution of a partial time at arbitrary coupling.
pub fn cdf_partial(beta: SymmetryClass, n: usize, g_bar: f64, tau: f64) -> Result<f64> {
    check_channels(n)?;
    check_g_bar(g_bar)?;
    check_positive("tau", tau)?;
    let b = beta.beta_f64();
    let k = half_beta_n(beta, n);
    let mode = b / (2.0 * (2.0 + k));
    phase_average(g_bar, Some(mode / tau), |d| {
        partial_perfect_cdf(b, k, tau * d).unwrap_or(f64::NAN)
    })
    .and_then(|v| {
        if v.is_finite() {
            Ok(v.clamp(0.0, 1.0))
        } else {
            Err(Error::Invariant("incomplete gamma failed inside the CDF".into()))
        }
    })
}

/// Density of the rescaled partial time `t = 4 sqrt(g_bar^2 - 1) tau / beta`.
pub fn pdf_partial_rescaled(beta: SymmetryClass, n: usize, g_bar: f64, t: f64) -> Result<f64> {
    check_g_bar(g_bar)?;
    if g_bar == 1.0 {
        return Err(invalid("g_bar", "the rescaled variable needs g_bar > 1"));
    }
    let (a, _) = g_bar_parts(g_bar);
    let jac = beta.beta_f64() / (4.0 * a);
    Ok(jac * pdf_partial(beta, n, g_bar, jac * t)?)
}

/// Weak-coupling limit of the rescaled partial-time density (Kummer form).
pub fn pdf_partial_weak(beta: SymmetryClass, n: usize, t: f64) -> Result<f64> {
    check_channels(n)?;
    check_positive("t", t)?;
    let k = half_beta_n(beta, n);
    let c = (beta.beta_f64() * n as f64 + 3.0) / 2.0;
    let u = kummer_u_half(c, 1.0 / t)?;
    Ok((-1.0 / t - (2.0 + k) * t.ln() - ln_gamma(1.0 + k)).exp() * u / PI.sqrt())
}

/// Weak-coupling limit for beta = 2 as a finite sum.
pub fn pdf_partial_weak_unitary_sum(n: usize, t: f64) -> Result<f64> {
    check_channels(n)?;
    check_positive("t", t)?;
    let mut s = 0.0;
    for m in 0..=n {
        let coeff = double_factorial_odd(m as u32)
            / (factorial(m as u32) * factorial((n - m) as u32) * 2f64.powi(m as i32));
        s += coeff * t.powi(m as i32 - n as i32);
    }
    Ok((-1.0 / t).exp() / (PI.sqrt() * t.powf(1.5)) * s)
}

/// Exact partial-time density for beta = 2 from the `N`-th derivative of
/// `I_0(sqrt(g_bar^2-1) gamma) e^{-g_bar gamma}` at `gamma = 1/tau`, computed
/// by Taylor arithmetic.
pub fn pdf_partial_unitary_exact(n: usize, g_bar: f64, tau: f64) -> Result<f64> {
    check_channels(n)?;
    check_g_bar(g_bar)?;
    check_positive("tau", tau)?;
    if n > 16 {
        return Err(invalid("N", "series order is limited to N <= 16"));
    }
    let y = 1.0 / tau;
    let (a, gs) = g_bar_parts(g_bar);
    let a2 = a * a;
    let c = bessel_i0_sqrt_taylor(a2 * y * y, n)?;
    let w = PowerSeries::new(vec![0.0, 2.0 * a2 * y, a2], n)?;
    let i0 = w.compose_into(&c)?;
    let x = PowerSeries::linear(0.0, -g_bar, n)?.exp();
    let mut acc = CompensatedSum::default();
    for k in 0..=n {
        acc.push_product(i0.coeff(k), x.coeff(n - k));
    }
    check_cancellation(&acc)?;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    // e^{(a - g_bar) y} = e^{-g_s y}
    let log_scale = (n as f64 + 2.0) * y.ln() - gs * y;
    Ok(sign * acc.value() * log_scale.exp())
}

fn check_cancellation(acc: &CompensatedSum) -> Result<()> {
    let r = acc.cancellation();
    if r > MAX_CANCELLATION && acc.value() != 0.0 {
        Err(Error::PrecisionLoss { ratio: r })
    } else {
        Ok(())
    }
}

/// Coefficients `[i][j]` of `g^i y^j` (with `y = 1/tau`) in the polynomial
/// `F_n = sum_m (d_g^2 - 2 y d_g)^m g^n / (2m+1)!`.
pub fn proper_f_polynomial(n: usize) -> Vec<Vec<f64>> {
    let dim = n + 1;
    let mut term = vec![vec![0.0; dim]; dim];
    term[n][0] = 1.0;
    let mut out = term.clone();
    for m in 1..=n {
        let mut next = vec![vec![0.0; dim]; dim];
        for i in 0..dim {
            for j in 0..dim {
                let c = term[i][j];
                if c == 0.0 {
                    continue;
                }
                if i >= 2 {
                    next[i - 2][j] += c * (i * (i - 1)) as f64;
                }
                if i >= 1 && j + 1 < dim {
                    next[i - 1][j + 1] -= 2.0 * c * i as f64;
                }
            }
        }
        term = next;
        let norm = factorial(2 * m as u32 + 1);
        for i in 0..dim {
            for j in 0..dim {
                out[i][j] += term[i][j] / norm;
            }
        }
    }
    out
}

/// `(F, dF/dy)` at `(g, y)`.
fn eval_f(poly: &[Vec<f64>], g: f64, y: f64) -> (f64, f64) {
    let mut f = 0.0;
    let mut dfy = 0.0;
    for (i, row) in poly.iter().enumerate() {
        let gi = g.powi(i as i32);
        for (j, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            f += c * gi * y.powi(j as i32);
            if j > 0 {
                dfy += c * gi * j as f64 * y.powi(j as i32 - 1);
            }
        }
    }
    (f, dfy)
}

/// `B_m` and `dB_m/dy` for `m <= m_max`, where
/// `B_m = (1/m!) (-d/dg)^m [I_0(sqrt(g^2-1) y) e^{-g y}]` at `g = g_bar`.
/// All values carry the common factor `e^{g_s y}` removed.
pub fn proper_b_coefficients(m_max: usize, g_bar: f64, y: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_g_bar(g_bar)?;
    check_positive("y", y)?;
    if m_max + 1 > MAX_ORDER {
        return Err(invalid("N", "series order exceeded"));
    }
    let (mut b, mut db) = if g_bar >= 2.0 {
        b_coefficients_phase(m_max, g_bar, y)?
    } else {
        b_coefficients_taylor(m_max, g_bar, y)?
    };
    for m in (1..=m_max).step_by(2) {
        b[m] = -b[m];
        db[m] = -db[m];
    }
    Ok((b, db))
}

/// Taylor route through `E(u) = I_0(sqrt u)`, accurate near `g_bar = 1`.
fn b_coefficients_taylor(m: usize, g: f64, y: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let a2 = (g - 1.0) * (g + 1.0);
    let c = bessel_i0_sqrt_taylor(a2 * y * y, m + 1)?;
    let dc: Vec<f64> = (0..=m).map(|k| (k + 1) as f64 * c[k + 1]).collect();
    let w = PowerSeries::new(vec![0.0, 2.0 * g * y * y, y * y], m)?;
    let e = w.compose_into(&c[..=m])?;
    let de = w.compose_into(&dc)?;
    let x = PowerSeries::linear(0.0, -y, m)?.exp();
    let q = PowerSeries::new(vec![a2, 2.0 * g, 1.0], m)?;
    let gs = PowerSeries::linear(g, 1.0, m)?;
    let b = &e * &x;
    let d = &(&(&q * &de).scale(2.0 * y) - &(&gs * &e)) * &x;
    Ok((b.coeffs().to_vec(), d.coeffs().to_vec()))
}

/// Phase-integral route `I_0(z) = (1/pi) int_0^pi e^{z cos theta} d theta`;
/// every exponent is formed without cancellation.
fn b_coefficients_phase(m: usize, g: f64, y: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let a = PowerSeries::new(vec![(g - 1.0) * (g + 1.0), 2.0 * g, 1.0], m)?.sqrt()?;
    let a0 = a.coeff(0);
    let a1_minus_1 = 1.0 / (a0 * (g + a0));
    let gs = 1.0 / (g + a0);
    let (nodes, weights) = quad::gauss_legendre(24);
    let width = 1.0 / (y * a0).sqrt();
    let mut edges = vec![0.0];
    if width >= PI / 4.0 {
        edges.extend([PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI]);
    } else {
        let mut e = 0.5 * width;
        while e < PI {
            edges.push(e);
            e *= 1.5;
            if y * a0 * (1.0 - e.cos()) > 1500.0 {
                break;
            }
        }
        edges.push(PI.min(e));
    }
    let len = m + 1;
    let mut acc = vec![0.0; 2 * len];
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, wt) in nodes.iter().zip(&weights) {
            let th = mid + half * x;
            let (s, c) = (0.5 * th).sin_cos();
            let s2 = 2.0 * s * s;
            let cos = c * c - s * s;
            let l0 = -gs - a0 * s2;
            let mut lc = vec![0.0; len];
            if len > 1 {
                lc[1] = a1_minus_1 * cos - s2;
            }
            for (k, slot) in lc.iter_mut().enumerate().skip(2) {
                *slot = a.coeff(k) * cos;
            }
            let rest = PowerSeries::new(lc, m)?;
            let base = (-y * a0 * s2).exp();
            let e = rest.scale(y).exp();
            let full = &rest + &PowerSeries::constant(l0, m)?;
            let d = &full * &e;
            let f = wt * half * base / PI;
            for k in 0..len {
                acc[k] += f * e.coeff(k);
                acc[len + k] += f * d.coeff(k);
            }
        }
    }
    Ok((acc[..len].to_vec(), acc[len..].to_vec()))
}

/// Exact proper-time density for beta = 2 at arbitrary coupling, from the
/// finite sum over `F_n` and `B_n`.
pub fn pdf_proper_unitary_exact(n: usize, g_bar: f64, tau: f64) -> Result<f64> {
    check_channels(n)?;
    check_g_bar(g_bar)?;
    check_positive("tau", tau)?;
    if n > 5 {
        return Err(invalid("N", "the proper-time formula is limited to N <= 5"));
    }
    if g_bar > 100.0 {
        return Err(invalid("g_bar", "the proper-time formula is limited to g_bar <= 100"));
    }
    let y = 1.0 / tau;
    let (_, gs) = g_bar_parts(g_bar);
    let log_scale = 3.0 * y.ln() - gs * y - (n as f64).ln();
    if log_scale < -745.0 - 40.0 * n as f64 {
        return Ok(0.0);
    }
    let (b, db) = proper_b_coefficients(n - 1, g_bar, y)?;
    let mut acc = CompensatedSum::default();
    for (m, (bm, dbm)) in b.iter().zip(&db).enumerate() {
        let (f, dfy) = eval_f(&proper_f_polynomial(m), g_bar, y);
        acc.push_product(*bm, dfy);
        acc.push_product(-f, *dbm);
    }
    let v = acc.value() * log_scale.exp();
    if v.abs() < 1e-300 {
        return Ok(0.0);
    }
    check_cancellation(&acc)?;
    Ok(v)
}

/// Tail coefficients of the rescaled partial and proper marginals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCoefficients {
    /// Far-tail amplitude.
    pub a: f64,
    /// Amplitude of the `t^{-3/2}` law.
    pub b: f64,
    /// Left-tail amplitude of the partial marginal.
    pub c_tilde: f64,
    /// Left-tail amplitude of the proper marginal (beta = 2 only).
    pub c: Option<f64>,
}

pub fn tail_coefficients(beta: SymmetryClass, n: usize) -> Result<TailCoefficients> {
    check_channels(n)?;
    let k = half_beta_n(beta, n);
    let lg_half = ln_gamma(0.5 + k);
    let lg_one = ln_gamma(1.0 + k);
    let b = (lg_half - lg_one).exp() / PI;
    let a = ((1.0 + 2.0 * k) * 2f64.ln() + lg_half - 2.0 * lg_one).exp() / PI.sqrt();
    let c_tilde = 1.0 / (PI.sqrt() * lg_one.exp());
    let c = (beta == SymmetryClass::Unitary).then(|| {
        let nf = n as f64;
        (2.0 * (nf - 1.0) * 2f64.ln() - ln_factorial(2 * n as u32 - 1)).exp() / (PI.sqrt() * nf)
    });
    Ok(TailCoefficients { a, b, c_tilde, c })
}

/// Crossover scales of the proper and partial marginals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoffs {
    /// Lower cutoff of the proper-time power law.
    pub t_low: f64,
    /// Lower cutoff of the partial-time power law.
    pub t_low_partial: f64,
    /// Upper cutoff.
    pub t_up: f64,
}

pub fn cutoffs(_beta: SymmetryClass, n: usize, g_bar: f64) -> Result<Cutoffs> {
    check_channels(n)?;
    check_g_bar(g_bar)?;
    let nf = n as f64;
    Ok(Cutoffs {
        t_low: 1.0 / (2.0 * nf * g_bar),
        t_low_partial: 1.0 / (nf * g_bar),
        t_up: 4.0 * std::f64::consts::E * g_bar / nf,
    })
}

/// Scale `1/(g N^2)` above which the Wigner time leaves the `tau^{-3/2}` law.
pub fn wigner_crossover(n: usize, g: f64) -> Result<f64> {
    check_channels(n)?;
    check_positive("g", g)?;
    Ok(1.0 / (g * (n * n) as f64))
}

/// Left-tail constants of the weak-coupling Wigner-time law for beta = 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeftTailPrefactor {
    /// Ratio of the Gamma-function determinants.
    pub b: f64,
    /// Amplitude of `p^{N^2/2} e^{-2N sqrt p}` in the characteristic function.
    pub a: f64,
    /// Amplitude of `t^{-N^2-3/2} e^{-N/t}` in the rescaled density.
    pub c: f64,
    pub power: f64,
    pub rate: f64,
}

fn big_factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `Gamma(m + 1/2) / sqrt(pi) = (2m)! / (4^m m!)`.
fn half_gamma_rational(m: u64) -> BigRational {
    BigRational::new(
        big_factorial(2 * m),
        BigInt::from(4u32).pow(m as u32) * big_factorial(m),
    )
}

/// Exact determinant by Gaussian elimination over the rationals.
pub(crate) fn rational_det(mut a: Vec<Vec<BigRational>>) -> BigRational {
    let n = a.len();
    let mut det = BigRational::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return BigRational::zero();
        };
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        let p = a[col][col].clone();
        det *= p.clone();
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone() / p.clone();
            for c in col..n {
                let sub = f.clone() * a[col][c].clone();
                a[r][c] -= sub;
            }
        }
    }
    det
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn left_tail_prefactor_unitary(n: usize) -> Result<LeftTailPrefactor> {
    check_channels(n)?;
    if n > 10 {
        return Err(invalid("N", "the determinant evaluation is limited to N <= 10"));
    }
    // Rows i with odd i carry a factor sqrt(pi); so do the Gamma(k/2) with odd
    // k in the product below, and the two counts agree.
    let half: Vec<Vec<BigRational>> = (1..=n as u64)
        .map(|i| {
            (1..=n as u64)
                .map(|j| {
                    if i % 2 == 0 {
                        BigRational::from_integer(big_factorial(i / 2 + j - 2))
                    } else {
                        half_gamma_rational((i - 1) / 2 + j - 1)
                    }
                })
                .collect()
        })
        .collect();
    let full: Vec<Vec<BigRational>> = (1..=n as u64)
        .map(|i| {
            (1..=n as u64)
                .map(|j| BigRational::from_integer(big_factorial(i + j - 2)))
                .collect()
        })
        .collect();
    let mut ratio = rational_det(half) / rational_det(full);
    for k in 1..=n as u64 {
        let gk = BigRational::from_integer(big_factorial(k - 1));
        let gk2 = if k % 2 == 0 {
            BigRational::from_integer(big_factorial(k / 2 - 1))
        } else {
            half_gamma_rational((k - 1) / 2)
        };
        ratio = ratio * gk / gk2;
    }
    if !ratio.is_positive() {
        return Err(Error::Invariant("determinant ratio is not positive".into()));
    }
    let b = rational_to_f64(&ratio);
    let nf = n as f64;
    let ln_a = -nf * (nf + 1.0) / 2.0 * 2f64.ln() + nf * PI.ln() + ln_barnes_g_int(n as u32 + 2) + b.ln();
    let a = ln_a.exp();
    let c = (nf / PI).sqrt() * (ln_a - z0_closed(n)?.ln()).exp();
    Ok(LeftTailPrefactor {
        b,
        a,
        c,
        power: nf * nf + 1.5,
        rate: nf,
    })
}

/// Predicted exponents of the Wigner-time tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargeDeviationExponents {
    /// `P(tau) ~ tau^{-left_power} e^{-left_rate/tau}` as `tau -> 0`, weak coupling.
    pub left_power: f64,
    pub left_rate: f64,
    /// `P(tau) ~ tau^{-far_power}` in the far tail.
    pub far_power: f64,
    /// Left-tail `(power, rate)` at perfect coupling, reported when `g = 1`.
    pub perfect: Option<(f64, f64)>,
}

pub fn large_dev_exponents(beta: SymmetryClass, n: usize, g: f64) -> Result<LargeDeviationExponents> {
    check_channels(n)?;
    check_positive("g", g)?;
    let b = beta.beta_f64();
    let nf = n as f64;
    let perfect = (g == 1.0).then(|| {
        (
            3.0 * b * nf * nf / 4.0 + nf * (1.0 - b / 2.0) / 2.0 + 1.5,
            b * nf / 2.0,
        )
    });
    Ok(LargeDeviationExponents {
        left_power: b * nf * nf / 2.0 + 1.5,
        left_rate: b * nf * g / 2.0,
        far_power: 2.0 + b * nf / 2.0,
        perfect,
    })
}

/// `int |Delta(x)|^beta prod (1+x_n^2)^{-alpha} dx` over `R^N`.
pub fn selberg_cauchy_norm(n: usize, alpha: f64, beta: f64) -> Result<f64> {
    check_channels(n)?;
    check_positive("beta", beta)?;
    let nf = n as f64;
    let a = alpha - 1.0 - beta * (nf - 1.0) / 2.0;
    if !(a > -0.5) {
        return Err(invalid(
            "alpha",
            format!("integral diverges: a = alpha - 1 - beta (N-1)/2 = {a} must exceed -1/2"),
        ));
    }
    let lam = beta / 2.0;
    let mut ln_m = -nf * ln_gamma(1.0 + lam);
    for j in 0..n {
        let jf = j as f64;
        ln_m += ln_gamma(lam * jf + 2.0 * a + 1.0) + ln_gamma(lam * (jf + 1.0) + 1.0)
            - 2.0 * ln_gamma(lam * jf + a + 1.0);
    }
    let ln_pre = (beta * nf * (nf - 1.0) / 2.0 - 2.0 * (alpha - 1.0) * nf) * 2f64.ln() + nf * PI.ln();
    Ok((ln_pre + ln_m).exp())
}

/// A function tabulated on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub quantity: String,
    pub beta: u8,
    pub channels: usize,
    pub coupling: Option<f64>,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(
        quantity: impl Into<String>,
        beta: u8,
        channels: usize,
        coupling: Option<f64>,
        x: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if x.len() != values.len() {
            return Err(Error::Invariant("grid and values differ in length".into()));
        }
        if x.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Invariant("grid is not strictly increasing".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invariant(format!("non-finite value {v}")));
        }
        Ok(Self {
            quantity: quantity.into(),
            beta,
            channels,
            coupling,
            x,
            values,
        })
    }

    /// Evaluates `f` on every grid point.
    pub fn tabulate(
        quantity: impl Into<String>,
        beta: u8,
        channels: usize,
        coupling: Option<f64>,
        x: Vec<f64>,
        f: impl Fn(f64) -> Result<f64> + Sync,
    ) -> Result<Self> {
        use rayon::prelude::*;
        let values = x.par_iter().map(|&t| f(t)).collect::<Result<Vec<f64>>>()?;
        Self::new(quantity, beta, channels, coupling, x, values)
    }

    /// CSV with `#` metadata lines followed by `x,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# quantity={}", self.quantity)?;
        writeln!(w, "# beta={}", self.beta)?;
        writeln!(w, "# channels={}", self.channels)?;
        if let Some(g) = self.coupling {
            writeln!(w, "# coupling={g}")?;
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["x", "value"]).map_err(csv_err)?;
        for (x, v) in self.x.iter().zip(&self.values) {
            csv.write_record([format!("{x:e}"), format!("{v:e}")]).map_err(csv_err)?;
        }
        csv.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
