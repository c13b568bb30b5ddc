//! Delay extraction, scalar samplers, mergeable histograms and tail analysis.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::axis::AxisSpec;
use crate::coupling::{
    build_sample, partial_times, proper_times, sample_wigner_time, Coupling, DelayKind,
    TimeDelayBatch,
};
use crate::ensembles::SymmetryClass;
use crate::error::{invalid, Error, Result};
use crate::oracles::csv_err;
use crate::parallel::run_batches;
use crate::rng::RngStream;
use crate::stats;

pub use crate::coupling::wigner_time;

/// Number of bootstrap resamples behind the variance standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Default bin specification, `log:1e-6:1e6:240`.
pub fn default_bins() -> AxisSpec {
    AxisSpec::Log { lo: 1e-6, hi: 1e6, count: 240 }
}

fn gamma_dist(shape: f64, scale: f64) -> Result<Gamma<f64>> {
    Gamma::new(shape, scale).map_err(|e| Error::Invariant(format!("gamma law: {e}")))
}

/// Partial time from uniform phase shifts: `f(theta) tau_0` with
/// `f = 1/(g_bar + sqrt(g_bar^2 - 1) cos theta)` and `1/tau_0` Gamma-distributed
/// with shape `1 + beta N/2` and rate `beta/2`.
pub fn sample_partial_cheap<R: Rng + ?Sized>(
    beta: SymmetryClass,
    n: usize,
    coupling: Coupling,
    rng: &mut R,
) -> Result<f64> {
    let b = beta.beta_f64();
    let law = gamma_dist(1.0 + b * n as f64 / 2.0, 2.0 / b)?;
    Ok(partial_cheap_draw(&law, coupling.g_bar(), rng))
}

fn partial_cheap_draw<R: Rng + ?Sized>(law: &Gamma<f64>, g_bar: f64, rng: &mut R) -> f64 {
    let a = ((g_bar - 1.0) * (g_bar + 1.0)).sqrt();
    let theta: f64 = rng.random::<f64>() * 2.0 * PI;
    let f = 1.0 / (g_bar + a * theta.cos());
    f / law.sample(rng)
}

/// Single-resonance model: `y` chi-square with `beta N` degrees of freedom and
/// unit mean, width `Gamma = N T y`, energy uniform on `[-pi, pi]`,
/// `tau = (1/N) Gamma / (E^2 + Gamma^2/4)`.
pub fn sample_heuristic<R: Rng + ?Sized>(
    beta: SymmetryClass,
    n: usize,
    t: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(invalid("T", format!("must lie in (0, 1], got {t}")));
    }
    let k = beta.beta_f64() * n as f64 / 2.0;
    let law = gamma_dist(k, 1.0 / k)?;
    Ok(heuristic_draw(&law, n, t, rng))
}

fn heuristic_draw<R: Rng + ?Sized>(law: &Gamma<f64>, n: usize, t: f64, rng: &mut R) -> f64 {
    let nf = n as f64;
    let width = nf * t * law.sample(rng);
    let e = (2.0 * rng.random::<f64>() - 1.0) * PI;
    width / (nf * (e * e + width * width / 4.0))
}

/// What to sample and how much.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: DelayKind,
    pub beta: SymmetryClass,
    pub channels: usize,
    pub coupling: Coupling,
    pub samples: usize,
    pub seed: u64,
    /// Matrix-based partial times instead of the uniform-phase sampler.
    pub partial_from_matrices: bool,
}

impl SamplerConfig {
    pub fn new(kind: DelayKind, beta: SymmetryClass, channels: usize, coupling: Coupling, samples: usize, seed: u64) -> Self {
        Self { kind, beta, channels, coupling, samples, seed, partial_from_matrices: false }
    }
}

/// Draws `samples` matrices (or scalar draws) in deterministic batches.
/// Proper and matrix partial times are pooled, `N` values per draw.
pub fn sample_batch(cfg: &SamplerConfig, workers: Option<usize>) -> Result<TimeDelayBatch> {
    if cfg.channels == 0 {
        return Err(invalid("N", "channel count must be at least 1"));
    }
    if cfg.samples == 0 {
        return Err(invalid("samples", "must be at least 1"));
    }
    let matrix = matches!(cfg.kind, DelayKind::Wigner | DelayKind::Proper)
        || (cfg.kind == DelayKind::Partial && cfg.partial_from_matrices);
    if matrix {
        SymmetryClass::for_sampling(cfg.beta.beta())?;
    }
    let parts = run_batches(cfg.seed, cfg.samples, workers, |stream, count| {
        sample_stream(cfg, stream, count)
    })?;
    TimeDelayBatch::concat(parts)
}

fn sample_stream(cfg: &SamplerConfig, stream: RngStream, count: usize) -> Result<TimeDelayBatch> {
    let mut rng = stream.rng();
    let n = cfg.channels;
    let (beta, c) = (cfg.beta, cfg.coupling);
    let mut values = Vec::with_capacity(count);
    let rejected = 0;
    match cfg.kind {
        DelayKind::Wigner => {
            for _ in 0..count {
                values.push(sample_wigner_time(beta, n, c, &mut rng)?);
            }
        }
        DelayKind::Proper => {
            values.reserve(count * (n - 1));
            for _ in 0..count {
                let s = build_sample(beta, n, c, &mut rng)?;
                values.extend(proper_times(&s.q)?);
            }
        }
        DelayKind::Partial if cfg.partial_from_matrices => {
            values.reserve(count * (n - 1));
            for _ in 0..count {
                let s = build_sample(beta, n, c, &mut rng)?;
                values.extend(partial_times(&s)?);
            }
        }
        DelayKind::Partial => {
            let b = beta.beta_f64();
            let law = gamma_dist(1.0 + b * n as f64 / 2.0, 2.0 / b)?;
            let g_bar = c.g_bar();
            for _ in 0..count {
                values.push(partial_cheap_draw(&law, g_bar, &mut rng));
            }
        }
        DelayKind::Heuristic => {
            let k = beta.beta_f64() * n as f64 / 2.0;
            let law = gamma_dist(k, 1.0 / k)?;
            let t = c.transmission();
            for _ in 0..count {
                values.push(heuristic_draw(&law, n, t, &mut rng));
            }
        }
    }
    let mut batch = TimeDelayBatch::new(cfg.kind, beta.beta(), n, c.g(), values)?;
    batch.rejected = rejected;
    Ok(batch)
}

/// Histogram with explicit edges and boundary counters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    edges: Vec<OrderedEdge>,
    counts: Vec<u64>,
    underflow: u64,
    overflow: u64,
    total: u64,
}

/// Bit-level wrapper so the histogram can derive `Eq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
struct OrderedEdge(#[serde(with = "f64_bits")] u64);

mod f64_bits {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(f64::from_bits(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        Ok(f64::deserialize(d)?.to_bits())
    }
}

/// One row of the histogram table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
    pub pdf: f64,
    pub cdf: f64,
    pub ccdf: f64,
}

impl EmpiricalDistribution {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(invalid("bins", "need at least two edges"));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("bins", "edges must be finite and strictly increasing"));
        }
        let bins = edges.len() - 1;
        Ok(Self {
            edges: edges.into_iter().map(|e| OrderedEdge(e.to_bits())).collect(),
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
            total: 0,
        })
    }

    pub fn from_axis(axis: &AxisSpec) -> Result<Self> {
        Self::new(axis.edges()?)
    }

    pub fn from_values(edges: Vec<f64>, values: &[f64]) -> Result<Self> {
        let mut d = Self::new(edges)?;
        d.accumulate(values);
        Ok(d)
    }

    pub fn edges(&self) -> Vec<f64> {
        self.edges.iter().map(|e| f64::from_bits(e.0)).collect()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn underflow(&self) -> u64 {
        self.underflow
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Bins `[lo, hi)`; values below the first edge or at or above the last
    /// edge go to the boundary counters.
    pub fn accumulate(&mut self, values: &[f64]) {
        let edges = self.edges();
        let last = *edges.last().unwrap_or(&0.0);
        for &v in values {
            self.total += 1;
            if !(v >= edges[0]) {
                self.underflow += 1;
            } else if v >= last {
                self.overflow += 1;
            } else {
                let i = edges.partition_point(|e| *e <= v) - 1;
                self.counts[i] += 1;
            }
        }
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.edges != other.edges {
            return Err(Error::EdgeMismatch);
        }
        Ok(Self {
            edges: self.edges.clone(),
            counts: self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect(),
            underflow: self.underflow + other.underflow,
            overflow: self.overflow + other.overflow,
            total: self.total + other.total,
        })
    }

    /// `pdf = count/(total width)`, `cdf` and `ccdf` at the upper edge.
    pub fn table(&self) -> Vec<HistogramRow> {
        let edges = self.edges();
        let total = self.total.max(1) as f64;
        let mut below = self.underflow;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &count)| {
                below += count;
                let (lo, hi) = (edges[i], edges[i + 1]);
                let cdf = below as f64 / total;
                HistogramRow {
                    bin_lo: lo,
                    bin_hi: hi,
                    count,
                    pdf: count as f64 / (total * (hi - lo)),
                    cdf,
                    ccdf: (self.total - below) as f64 / total,
                }
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["bin_lo", "bin_hi", "count", "pdf", "cdf", "ccdf"])
            .map_err(csv_err)?;
        for r in self.table() {
            out.write_record([
                format!("{:e}", r.bin_lo),
                format!("{:e}", r.bin_hi),
                r.count.to_string(),
                format!("{:e}", r.pdf),
                format!("{:e}", r.cdf),
                format!("{:e}", r.ccdf),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a table written by [`write_csv`](Self::write_csv). The boundary
    /// counters are recovered from the `pdf`, `cdf` and `ccdf` columns.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let headers = rdr.headers().map_err(|e| parse_err("header", e))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["bin_lo", "bin_hi", "count", "pdf", "cdf", "ccdf"] {
            return Err(Error::Parse {
                token: headers.iter().collect::<Vec<_>>().join(","),
                reason: "expected bin_lo,bin_hi,count,pdf,cdf,ccdf".into(),
            });
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| parse_err("record", e))?;
            if rec.len() != 6 {
                return Err(Error::Parse { token: rec.iter().collect::<Vec<_>>().join(","), reason: "expected 6 fields".into() });
            }
            let f = |i: usize| crate::axis::parse_float(&rec[i]);
            let count: u64 = rec[2].trim().parse().map_err(|_| Error::Parse {
                token: rec[2].to_string(),
                reason: "count must be a non-negative integer".into(),
            })?;
            rows.push((f(0)?, f(1)?, count, f(3)?, f(4)?, f(5)?));
        }
        if rows.is_empty() {
            return Err(Error::Parse { token: String::new(), reason: "no histogram rows".into() });
        }
        let mut edges = vec![rows[0].0];
        for (i, r) in rows.iter().enumerate() {
            if i > 0 && r.0 != rows[i - 1].1 {
                return Err(Error::Parse { token: r.0.to_string(), reason: "bins are not contiguous".into() });
            }
            edges.push(r.1);
        }
        let mut d = Self::new(edges)?;
        let mut sum: u64 = 0;
        for (slot, r) in d.counts.iter_mut().zip(&rows) {
            *slot = r.2;
            sum = sum.checked_add(r.2).ok_or_else(|| Error::Parse { token: r.2.to_string(), reason: "count overflow".into() })?;
        }
        let Some(r) = rows.iter().find(|r| r.2 > 0) else {
            return Err(Error::Parse { token: String::new(), reason: "cannot infer totals of an empty histogram".into() });
        };
        let total = r.2 as f64 / (r.3 * (r.1 - r.0));
        let first = &rows[0];
        let last = &rows[rows.len() - 1];
        let under = (first.4 * total - first.2 as f64).round();
        let over = (last.5 * total).round();
        if !(total.is_finite() && under >= 0.0 && over >= 0.0 && total < 1e19 && under < 1e19 && over < 1e19) {
            return Err(Error::Parse { token: format!("{total}"), reason: "inconsistent pdf/cdf columns".into() });
        }
        d.underflow = under as u64;
        d.overflow = over as u64;
        d.total = sum
            .checked_add(d.underflow)
            .and_then(|t| t.checked_add(d.overflow))
            .ok_or_else(|| Error::Parse { token: String::new(), reason: "count overflow".into() })?;
        Ok(d)
    }
}

fn parse_err(token: &str, e: csv::Error) -> Error {
    Error::Parse { token: token.into(), reason: e.to_string() }
}

/// Least-squares slope of `ln CCDF` against `ln x` over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub lo: f64,
    pub hi: f64,
    pub slope: f64,
    pub se: f64,
    pub points: usize,
    /// t-statistic of a quadratic term in `ln x`; a power law is reported
    /// only when it stays below 2 in magnitude.
    pub curvature_t: f64,
}

impl TailFit {
    pub fn is_power_law(&self) -> bool {
        self.curvature_t.abs() < 2.0
    }
}

/// Minimum number of occupied bins inside a fit window.
pub const MIN_TAIL_BINS: usize = 10;

/// Fits the CCDF, evaluated at upper bin edges, over `[lo, hi]`.
pub fn fit_tail_exponent(dist: &EmpiricalDistribution, lo: f64, hi: f64) -> Result<TailFit> {
    if !(lo > 0.0 && lo < hi) {
        return Err(invalid("window", "need 0 < lo < hi"));
    }
    let rows: Vec<HistogramRow> = dist
        .table()
        .into_iter()
        .filter(|r| r.bin_lo >= lo && r.bin_hi <= hi && r.count > 0 && r.ccdf > 0.0)
        .collect();
    if rows.len() < MIN_TAIL_BINS {
        return Err(Error::Insufficient(format!(
            "{} occupied bins in [{lo}, {hi}], need {MIN_TAIL_BINS}",
            rows.len()
        )));
    }
    let x: Vec<f64> = rows.iter().map(|r| r.bin_hi.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.ccdf.ln()).collect();
    let (c, se) = stats::least_squares(&[x.clone()], &y, None)?;
    let xm = x.iter().sum::<f64>() / x.len() as f64;
    let x2: Vec<f64> = x.iter().map(|v| (v - xm).powi(2)).collect();
    let curvature_t = match stats::least_squares(&[x.clone(), x2], &y, None) {
        Ok((c2, se2)) if se2[2] > 0.0 => c2[2] / se2[2],
        Ok(_) => 0.0,
        Err(_) => f64::NAN,
    };
    Ok(TailFit { lo, hi, slope: c[1], se: se[1], points: rows.len(), curvature_t })
}

/// Slope of `ln[pdf(t) t^power]` against `1/t` over `[lo, hi]`, weighted by
/// bin counts.
pub fn fit_log_density_vs_inverse(dist: &EmpiricalDistribution, power: f64, lo: f64, hi: f64) -> Result<TailFit> {
    let rows: Vec<HistogramRow> = dist
        .table()
        .into_iter()
        .filter(|r| r.bin_lo >= lo && r.bin_hi <= hi && r.count > 0)
        .collect();
    if rows.len() < MIN_TAIL_BINS {
        return Err(Error::Insufficient(format!("{} occupied bins in [{lo}, {hi}]", rows.len())));
    }
    let mid = |r: &HistogramRow| (r.bin_lo * r.bin_hi).sqrt();
    let x: Vec<f64> = rows.iter().map(|r| 1.0 / mid(r)).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.pdf.ln() + power * mid(r).ln()).collect();
    let w: Vec<f64> = rows.iter().map(|r| r.count as f64).collect();
    let (c, se) = stats::least_squares(&[x], &y, Some(&w))?;
    Ok(TailFit { lo, hi, slope: c[1], se: se[1], points: rows.len(), curvature_t: f64::NAN })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RescaleMode {
    /// `t = 2 tau/(beta g)`.
    T,
    /// `s = N |1/g - g| tau` for proper and partial times, `|1/g - g| tau` for
    /// the Wigner time.
    S,
}

pub fn rescale(batch: &TimeDelayBatch, mode: RescaleMode) -> Result<TimeDelayBatch> {
    let g = batch.g;
    let factor = match mode {
        RescaleMode::T => 2.0 / (batch.beta as f64 * g),
        RescaleMode::S => {
            if g == 1.0 {
                return Err(invalid("g", "the s variable is undefined at g = 1"));
            }
            let base = (1.0 / g - g).abs();
            match batch.kind {
                DelayKind::Wigner => base,
                _ => batch.channels as f64 * base,
            }
        }
    };
    let mut out = batch.clone();
    for v in &mut out.values {
        *v *= factor;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
}

/// Mean and variance with `SD/sqrt(M)` for the mean and a bootstrap standard
/// error for the variance.
pub fn summary(values: &[f64], seed: u64) -> Result<Summary> {
    if values.len() < 100 {
        return Err(Error::Insufficient(format!("{} values, need at least 100", values.len())));
    }
    let (mean, variance) = stats::mean_variance(values);
    let mut rng = RngStream::new(seed, u64::MAX).rng();
    let se_variance = stats::bootstrap_se(values, BOOTSTRAP_RESAMPLES, &mut rng, |xs| stats::mean_variance(xs).1)?;
    Ok(Summary {
        count: values.len(),
        mean,
        variance,
        se_mean: (variance / values.len() as f64).sqrt(),
        se_variance,
    })
}
