//! Kolmogorov-Smirnov tests and moment estimators.

use rand::Rng;

use crate::error::{Error, Result};

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS distance of `xs` (sorted in place) against `cdf`.
pub fn ks_one_sample(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Two-sample KS statistic and asymptotic p-value; both inputs are sorted in place.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> (f64, f64) {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na as f64 * nb as f64) / (na + nb) as f64;
    let sq = ne.sqrt();
    let p = kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d);
    (d, p)
}

/// Largest `|F_a(x) - F_b(x)|` over the grid `xs` between two empirical CDFs.
pub fn ecdf_sup_distance(a: &[f64], b: &[f64], xs: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    xs.iter()
        .map(|&x| {
            let fa = a.partition_point(|&v| v <= x) as f64 / a.len() as f64;
            let fb = b.partition_point(|&v| v <= x) as f64 / b.len() as f64;
            (fa - fb).abs()
        })
        .fold(0.0, f64::max)
}

/// Mean and unbiased variance, computed with Welford updates.
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let mut m = 0.0;
    let mut s = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let d = x - m;
        m += d / (k + 1) as f64;
        s += d * (x - m);
    }
    let n = xs.len();
    (m, if n > 1 { s / (n - 1) as f64 } else { 0.0 })
}

/// Mean and its standard error from `batches` contiguous batch means; falls
/// back to the iid standard error for short inputs.
pub fn batch_means(xs: &[f64], batches: usize) -> (f64, f64) {
    let n = xs.len();
    let (mean, var) = mean_variance(xs);
    if batches < 2 || n < 2 * batches {
        return (mean, (var / n.max(1) as f64).sqrt());
    }
    let size = n / batches;
    let means: Vec<f64> = xs
        .chunks(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let (_, bvar) = mean_variance(&means);
    (mean, (bvar / batches as f64).sqrt())
}

/// Sample covariance of paired data.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0)
}

/// Bootstrap standard error of `statistic` over `resamples` resamples of `xs`.
pub fn bootstrap_se<R: Rng + ?Sized>(
    xs: &[f64],
    resamples: usize,
    rng: &mut R,
    statistic: impl Fn(&[f64]) -> f64,
) -> Result<f64> {
    if xs.len() < 2 || resamples < 2 {
        return Err(Error::Insufficient("bootstrap needs data and resamples".into()));
    }
    let mut buf = vec![0.0; xs.len()];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = xs[rng.random_range(0..xs.len())];
        }
        stats.push(statistic(&buf));
    }
    Ok(mean_variance(&stats).1.sqrt())
}

/// Ordinary least squares with an intercept on the given design columns.
/// Returns coefficients (intercept first) and their standard errors.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64], weights: Option<&[f64]>) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = y.len();
    let p = columns.len() + 1;
    if n <= p {
        return Err(Error::Insufficient(format!("{n} points for {p} parameters")));
    }
    let row = |i: usize| -> Vec<f64> {
        let mut r = Vec::with_capacity(p);
        r.push(1.0);
        r.extend(columns.iter().map(|c| c[i]));
        r
    };
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut xtx = nalgebra::DMatrix::<f64>::zeros(p, p);
    let mut xty = nalgebra::DVector::<f64>::zeros(p);
    for i in 0..n {
        let r = row(i);
        for a in 0..p {
            xty[a] += w(i) * r[a] * y[i];
            for b in 0..p {
                xtx[(a, b)] += w(i) * r[a] * r[b];
            }
        }
    }
    let inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::Insufficient("singular design matrix".into()))?;
    let beta = &inv * xty;
    let mut rss = 0.0;
    for i in 0..n {
        let r = row(i);
        let fit: f64 = r.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
        rss += w(i) * (y[i] - fit).powi(2);
    }
    let sigma2 = rss / (n - p) as f64;
    let se = (0..p).map(|a| (sigma2 * inv[(a, a)]).max(0.0).sqrt()).collect();
    Ok((beta.iter().copied().collect(), se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn kolmogorov_reference_points() {
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 5e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn uniform_sample_passes_ks() {
        let mut rng = RngStream::new(1, 0).rng();
        let mut xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let d = ks_one_sample(&mut xs, |x| x.clamp(0.0, 1.0));
        assert!(d < 1.63 / 100.0);
    }

    #[test]
    fn two_sample_detects_shift() {
        let mut rng = RngStream::new(2, 0).rng();
        let mut a: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let mut b: Vec<f64> = (0..5000).map(|_| rng.random::<f64>() + 0.1).collect();
        let (_, p) = ks_two_sample(&mut a, &mut b);
        assert!(p < 1e-6);
        let mut c: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let (_, p) = ks_two_sample(&mut a, &mut c);
        assert!(p > 0.001);
    }

    #[test]
    fn least_squares_recovers_line() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let (b, se) = least_squares(&[x], &y, None).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-12 && (b[1] + 0.5).abs() < 1e-12);
        assert!(se[1] < 1e-10);
    }
}
