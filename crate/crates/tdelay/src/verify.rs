//! Acceptance suite: each criterion produces check records that compare an
//! observed statistic against an expectation with an explicit tolerance.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::axis::AxisSpec;
use crate::charfunc::{
    detratio_g, fit_left_tail, g_at_zero, laplace_empirical, z0_closed, z_perfect_hankel,
    z_ratio_mc,
};
use crate::coupling::{Coupling, DelayKind, TimeDelayBatch};
use crate::ensembles::{cayley_reaction, haar_unitary, SymmetryClass};
use crate::error::{invalid, Error, Result};
use crate::linalg::hermitian_eigensystem;
use crate::observables::{
    fit_log_density_vs_inverse, fit_tail_exponent, rescale, sample_batch, summary,
    EmpiricalDistribution, RescaleMode, SamplerConfig,
};
use crate::oracles;
use crate::quad::gauss_legendre;
use crate::rng::RngStream;
use crate::special::gamma;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Core,
    Tails,
    Charfunc,
    All,
}

impl Suite {
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::Core => &[1, 2, 3, 4, 5, 11, 12],
            Suite::Tails => &[6, 7, 8, 10],
            Suite::Charfunc => &[9],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "core" => Ok(Suite::Core),
            "tails" => Ok(Suite::Tails),
            "charfunc" => Ok(Suite::Charfunc),
            "all" => Ok(Suite::All),
            _ => Err(Error::Parse { token: s.into(), reason: "expected core, tails, charfunc or all".into() }),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Core => "core",
            Suite::Tails => "tails",
            Suite::Charfunc => "charfunc",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

/// How `observed` is compared with `expected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    /// `|observed - expected| <= tolerance`.
    Within,
    /// `observed < expected`.
    Below,
    /// `observed > expected`.
    Above,
    /// Reported for comparison only.
    Info,
}

/// JSON has no NaN; unevaluated values are written as `null`.
fn null_as_nan<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub criterion: u8,
    pub name: String,
    pub parameters: String,
    pub comparison: Comparison,
    #[serde(deserialize_with = "null_as_nan")]
    pub expected: f64,
    #[serde(deserialize_with = "null_as_nan")]
    pub observed: f64,
    pub std_error: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl CheckRecord {
    fn within(criterion: u8, name: &str, parameters: String, expected: f64, observed: f64, std_error: Option<f64>, tolerance: f64) -> Self {
        let pass = (observed - expected).abs() <= tolerance;
        Self { criterion, name: name.into(), parameters, comparison: Comparison::Within, expected, observed, std_error, tolerance: Some(tolerance), pass }
    }

    fn within_se(criterion: u8, name: &str, parameters: String, expected: f64, observed: f64, se: f64, k: f64) -> Self {
        Self::within(criterion, name, parameters, expected, observed, Some(se), k * se)
    }

    fn bound(criterion: u8, name: &str, parameters: String, comparison: Comparison, limit: f64, observed: f64) -> Self {
        let pass = match comparison {
            Comparison::Below => observed < limit,
            Comparison::Above => observed > limit,
            _ => true,
        };
        Self { criterion, name: name.into(), parameters, comparison, expected: limit, observed, std_error: None, tolerance: None, pass }
    }

    fn info(criterion: u8, name: &str, parameters: String, expected: f64, observed: f64) -> Self {
        Self { criterion, name: name.into(), parameters, comparison: Comparison::Info, expected, observed, std_error: None, tolerance: None, pass: true }
    }

    /// Records a check that could not be evaluated.
    fn failed(criterion: u8, name: &str, parameters: String, err: &Error) -> Self {
        Self {
            criterion,
            name: name.into(),
            parameters: format!("{parameters} error={err}"),
            comparison: Comparison::Within,
            expected: f64::NAN,
            observed: f64::NAN,
            std_error: None,
            tolerance: None,
            pass: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: Suite,
    pub seed: u64,
    pub records: Vec<CheckRecord>,
    pub pass: bool,
    pub runtime_seconds: f64,
}

impl VerificationReport {
    pub fn criterion_passes(&self, id: u8) -> Option<bool> {
        let mut it = self.records.iter().filter(|r| r.criterion == id).peekable();
        it.peek()?;
        Some(it.all(|r| r.pass))
    }

    /// Parses a report and checks that the global flag agrees with the records.
    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| Error::Parse { token: format!("line {}", e.line()), reason: e.to_string() })?;
        if r.pass != r.records.iter().all(|c| c.pass) {
            return Err(Error::Invariant("global pass flag disagrees with the records".into()));
        }
        Ok(r)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

pub fn run_suite(suite: Suite, seed: u64, workers: Option<usize>) -> Result<VerificationReport> {
    let start = Instant::now();
    let mut records = Vec::new();
    for &id in suite.criteria() {
        records.extend(run_criterion(id, seed, workers)?);
    }
    let pass = records.iter().all(|r| r.pass);
    Ok(VerificationReport { suite, seed, records, pass, runtime_seconds: start.elapsed().as_secs_f64() })
}

/// Runs one acceptance criterion. Statistical failures become failing
/// records; only configuration errors are returned as `Err`.
pub fn run_criterion(id: u8, seed: u64, workers: Option<usize>) -> Result<Vec<CheckRecord>> {
    let ctx = Ctx { seed: RngStream::derive_seed(seed, id as u64), workers, id, counter: 0 };
    match id {
        1 => means(ctx),
        2 => perfect_variances(ctx),
        3 => coupled_variances(ctx),
        4 => proper_marginal(ctx),
        5 => partial_chain(ctx),
        6 => partial_tail(ctx),
        7 => wigner_tails(ctx),
        8 => collapse_and_symmetry(ctx),
        9 => charfunc_triangle(ctx),
        10 => left_tail(ctx),
        11 => oracle_consistency(ctx),
        12 => crossover(ctx),
        _ => Err(invalid("criterion", format!("no criterion {id}"))),
    }
}

struct Ctx {
    seed: u64,
    workers: Option<usize>,
    id: u8,
    counter: u64,
}

impl Ctx {
    fn next_seed(&mut self) -> u64 {
        self.counter += 1;
        RngStream::derive_seed(self.seed, self.counter)
    }

    fn sample(&mut self, kind: DelayKind, beta: u8, n: usize, coupling: Coupling, samples: usize) -> Result<TimeDelayBatch> {
        let cfg = SamplerConfig::new(kind, SymmetryClass::new(beta)?, n, coupling, samples, self.next_seed());
        sample_batch(&cfg, self.workers)
    }
}

fn params(beta: u8, n: usize, g: f64) -> String {
    format!("beta={beta} N={n} g={g}")
}

fn per_draw_means(values: &[f64], n: usize) -> Vec<f64> {
    values.chunks_exact(n).map(|c| c.iter().sum::<f64>() / n as f64).collect()
}

fn means(mut ctx: Ctx) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for beta in [1u8, 2] {
        for n in [1usize, 2, 4] {
            for g in [1.0, 0.1] {
                let c = Coupling::new(g)?;
                let p = params(beta, n, g);
                let w = ctx.sample(DelayKind::Wigner, beta, n, c, 100_000)?;
                let (m, v) = stats::mean_variance(&w.values);
                out.push(CheckRecord::within_se(ctx.id, "mean wigner", p.clone(), 1.0 / n as f64, m, (v / w.len() as f64).sqrt(), 4.0));
                let pr = ctx.sample(DelayKind::Proper, beta, n, c, 100_000)?;
                let draws = per_draw_means(&pr.values, n);
                let (m, v) = stats::mean_variance(&draws);
                out.push(CheckRecord::within_se(ctx.id, "mean pooled proper", p, 1.0 / n as f64, m, (v / draws.len() as f64).sqrt(), 4.0));
            }
        }
    }
    Ok(out)
}

/// Average over draws of the off-diagonal products of deviations from the
/// pooled mean; returns the estimate and its standard error.
fn pooled_covariance(values: &[f64], n: usize) -> (f64, f64) {
    let (mu, _) = stats::mean_variance(values);
    let z: Vec<f64> = values
        .chunks_exact(n)
        .map(|c| {
            let s: f64 = c.iter().map(|x| x - mu).sum();
            let s2: f64 = c.iter().map(|x| (x - mu).powi(2)).sum();
            (s * s - s2) / (n * (n - 1)) as f64
        })
        .collect();
    let (m, v) = stats::mean_variance(&z);
    (m, (v / z.len() as f64).sqrt())
}

fn variance_check(ctx: &mut Ctx, name: &str, p: String, expected: f64, values: &[f64]) -> Result<CheckRecord> {
    let s = summary(values, ctx.next_seed())?;
    Ok(CheckRecord::within_se(ctx.id, name, p, expected, s.variance, s.se_variance, 5.0))
}

fn perfect_variances(mut ctx: Ctx) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    let c = Coupling::perfect();
    for (beta, n, expected) in [(2u8, 2usize, 1.0 / 6.0), (2, 4, 1.0 / 120.0), (1, 4, 1.0 / 40.0)] {
        let w = ctx.sample(DelayKind::Wigner, beta, n, c, 1_000_000)?;
        out.push(variance_check(&mut ctx, "var wigner", params(beta, n, 1.0), expected, &w.values)?);
    }
    let pr = ctx.sample(DelayKind::Proper, 2, 2, c, 1_000_000)?;
    let (cov, se) = pooled_covariance(&pr.values, 2);
    out.push(CheckRecord::within_se(ctx.id, "cov proper", params(2, 2, 1.0), -1.0 / 12.0, cov, se, 5.0));
    Ok(out)
}

fn coupled_variances(mut ctx: Ctx) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for (t, expected) in [(0.5, 7.0 / 12.0), (0.2, 61.0 / 30.0)] {
        let c = Coupling::from_transmission(t)?;
        let w = ctx.sample(DelayKind::Wigner, 2, 2, c, 1_000_000)?;
        out.push(variance_check(&mut ctx, "var wigner", format!("beta=2 N=2 T={t}"), expected, &w.values)?);
    }
    let c = Coupling::from_transmission(0.5)?;
    let pt = ctx.sample(DelayKind::Partial, 2, 2, c, 1_000_000)?;
    out.push(variance_check(&mut ctx, "var partial (uniform phases)", "beta=2 N=2 T=0.5".into(), 1.25, &pt.values)?);
    Ok(out)
}

/// CDF table of a density on `[lo, hi]` by Gauss-Legendre panels in `ln x`.
struct CdfTable {
    u: Vec<f64>,
    f: Vec<f64>,
    d: Vec<f64>,
}

impl CdfTable {
    fn build(pdf: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64, panels: usize) -> Result<Self> {
        let (nodes, weights) = gauss_legendre(16);
        let (a, b) = (lo.ln(), hi.ln());
        let h = (b - a) / panels as f64;
        let mut u = vec![a];
        let mut f = vec![0.0];
        let mut d = vec![pdf(lo)? * lo];
        let mut acc = 0.0;
        for i in 0..panels {
            let (u0, u1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let mut s = 0.0;
            for (t, w) in nodes.iter().zip(&weights) {
                let uu = 0.5 * (u0 + u1) + 0.5 * (u1 - u0) * t;
                let xu = uu.exp();
                s += w * pdf(xu)? * xu;
            }
            acc += 0.5 * (u1 - u0) * s;
            let x1 = u1.exp();
            u.push(u1);
            f.push(acc);
            d.push(pdf(x1)? * x1);
        }
        Ok(Self { u, f, d })
    }

    /// Cubic Hermite interpolation in `ln x`, using the density for slopes.
    fn eval(&self, v: f64) -> f64 {
        let last = self.u.len() - 1;
        if v <= 0.0 || v.ln() <= self.u[0] {
            return 0.0;
        }
        let uv = v.ln();
        if uv >= self.u[last] {
            return self.f[last];
        }
        let i = self.u.partition_point(|&e| e <= uv) - 1;
        let h = self.u[i + 1] - self.u[i];
        let t = (uv - self.u[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.f[i]
            + (t3 - 2.0 * t2 + t) * h * self.d[i]
            + (-2.0 * t3 + 3.0 * t2) * self.f[i + 1]
            + (t3 - t2) * h * self.d[i + 1]
    }
}

fn proper_marginal(mut ctx: Ctx) -> Result<Vec<CheckRecord>> {
    let g_bar = 10.0;
    let c = Coupling::from_transmission(2.0 / (g_bar + 1.0))?;
    let p = format!("beta=2 N=2 g_bar={g_bar}");
    let mut pr = ctx.sample(DelayKind::Proper, 2, 2, c, 50_000)?;
    let (lo, hi) = (1e-4, 50.0);
    let table = CdfTable::build(|t| oracles::pdf_proper_unitary_exact(2, g_bar, t), lo, hi, 800)?;
    // Beyond `hi` the proper and partial marginals share their power-law
    // tail; the partial CCDF carries the table to infinity.
    let f_hi = *table.f.last().unwrap_or(&1.0);
    let partial_ccdf = |t: f64| 1.0 - oracles::cdf_partial(SymmetryClass::Unitary, 2, g_bar, t).unwrap_or(1.0);
    let tail_hi = partial_ccdf(hi);
    let cdf = |t: f64| {
        if t <= hi {
            table.eval(t)
        } else {
            1.0 - (1.0 - f_hi) * partial_ccdf(t) / tail_hi
        }
    };
    let d = stats::ks_one_sample(&mut pr.values, cdf);
    Ok(vec![
        CheckRecord::bound(ctx.id, "ks proper vs exact", p.clone(), Comparison::Below, 0.01, d),
        CheckRecord::info(ctx.id, "exact mass below cutoff", p, 1.0, f_hi),
    ])
}

fn partial_chain(ctx: Ctx) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    let g_bar = 10.0;
    let mut sup: f64 = 0.0;
    for tau in (AxisSpec::Log { lo: 0.01, hi: 100.0, count: 400 }).points() {
        let a = oracles::pdf_partial(SymmetryClass::Unitary, 2, g_bar, tau)?;
        let b = oracles::pdf_partial_unitary_exact(2, g_bar, tau)?;
        sup = sup.max((a - b).abs());
    }
    out.push(CheckRecord::bound(ctx.id, "sup |quadrature - derivative formula|", format!("beta=2 N=2 g_bar={g_bar}"), Comparison::Below, 1e-6, sup));
    for beta in [SymmetryClass::Orthogonal, SymmetryClass::Unitary] {
        let mut sup: f64 = 0.0;
        for t in (AxisSpec::Log { lo: 0.05, hi: 20.0, count: 200 }).points() {
            let weak = oracles::pdf_partial_weak(beta, 2, t)?;
            let strong = oracles::pdf_partial_rescaled(beta, 2, 1e3, t)?;
            sup = sup.max(((strong - weak) / weak).abs());
        }
        out.push(CheckRecord::bound(ctx.id, "sup relative deviation from weak limit", format!("beta={} N=2 g_bar=1000", beta.beta()), Comparison::Below, 0.01, sup));
    }
    Ok(out)
}

fn log_hist(values: &[f64], lo: f64, hi: f64, per_decade: usize) -> Result<EmpiricalDistribution> {
    let count = ((hi / lo).log10() * per_decade as f64).round() as usize;
    EmpiricalDistribution::from_values(AxisSpec::Log { lo, hi, count }.edges()?, values)
}

fn slope_record(id: u8, name: &str, p: String, dist: &EmpiricalDistribution, lo: f64, hi: f64, expected: f64, tol: f64) -> Vec<CheckRecord> {
    let p = format!("{p} window=[{lo:e},{hi:e}]");
    match fit_tail_exponent(dist, lo, hi) {
        Ok(f) => vec![
            CheckRecord::within(id, name, p.clone(), expected, f.slope, Some(f.se), tol),
            CheckRecord::info(id, &format!("{name} curvature t"), p, 0.0, f.curvature_t),
        ],
        Err(e) => vec![CheckRecord::failed(id, name, p, &e)],
    }
}

fn partial_tail(mut ctx: Ctx) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    let (n, g_bar) = (2usize, 100.0);
    let c = Coupling::from_transmission(2.0 / (g_bar + 1.0))?;
    let p = format!("beta=2 N={n} g_bar={g_bar}");
    let batch = ctx.sample(DelayKind::Partial, 2, n, c, 10_000_000)?;
    let s = rescale(&batch, RescaleMode::S)?;
    let dist = log_hist(&s.values, 1e-2, 1e7, 30)?;
    out.extend(slope_record(ctx.id, "ccdf slope, intermediate", p.clone(), &dist, 10.0, 1e3, -0.5, 0.05));
    out.extend(slope_record(ctx.id, "ccdf slope, far tail", p.clone(), &dist, 1.5e5, 5e5, -3.0, 0.3));
    // amplitude of the t^{-3/2} window in t = s/N with the slope held fixed
    let t: Vec<f64> = s.values.iter().map(|v| v / n as f64).collect();
    let td = log_hist(&t, 1e-2, 1e7, 30)?;
    let rows: Vec<_> = td.table().into_iter().filter(|r| r.bin_lo >= 20.0 && r.bin_hi <= 500.0 && r.count > 0).collect();
    let wsum: f64 = rows.iter().map(|r| r.count as f64).sum();
    let ln_amp = rows.iter().map(|r| r.count as f64 * (r.pdf * ((r.bin_lo * r.bin_hi).sqrt()).powf(1.5)).ln()).sum::<f64>() / wsum;
    let b = oracles::tail_coefficients(SymmetryClass::Unitary, n)?.b;
    let amp = ln_amp.exp();
    out.push(CheckRecord::within(ctx.id, "t^-3/2 amplitude", format!("{p} window=[20,500]"), b, amp, None, 0.1 * b));
    Ok(out)
}

fn wigner_tails(mut ctx: Ctx) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    let (n, g) = (2usize, 0.02);
    let c = Coupling::new(g)?;
    let mid_hi = 0.3 / (g * n as f64).powi(2);
    for (beta, far) in [(2u8, -3.0), (1, -2.0)] {
        let p = params(beta, n, g);
        let batch = ctx.sample(DelayKind::Wigner, beta, n, c, 10_000_000)?;
        let s = rescale(&batch, RescaleMode::S)?;
        let dist = log_hist(&s.values, 1e-3, 1e7, 30)?;
        if beta == 2 {
            out.extend(slope_record(ctx.id, "ccdf slope, intermediate", p.clone(), &dist, 3.0, mid_hi, -0.5, 0.1));
        }
        out.extend(slope_record(ctx.id, "ccdf slope, far tail", p, &dist, 2e3, 1.5e4, far, 0.4));
    }
    Ok(out)
}

fn collapse_and_symmetry(mut ctx: Ctx) -> Result<Vec<CheckRecord>> {
    let (beta, n) = (2u8, 2usize);
    let mut s_values = Vec::new();
    for g in [0.01, 0.005] {
        let b = ctx.sample(DelayKind::Wigner, beta, n, Coupling::new(g)?, 1_000_000)?;
        s_values.push(rescale(&b, RescaleMode::S)?.values);
    }
    let grid = AxisSpec::Log { lo: 1.0, hi: 1e3, count: 300 }.points();
    let sup = stats::ecdf_sup_distance(&s_values[0], &s_values[1], &grid);
    let mut a = ctx.sample(DelayKind::Wigner, beta, n, Coupling::new(0.2)?, 100_000)?.values;
    let mut b = ctx.sample(DelayKind::Wigner, beta, n, Coupling::new(5.0)?, 100_000)?.values;
    let (_, pval) = stats::ks_two_sample(&mut a, &mut b);
    Ok(vec![
        CheckRecord::bound(ctx.id, "collapse sup distance in s", "beta=2 N=2 g=0.01,0.005 s=[1,1e3]".into(), Comparison::Below, 0.02, sup),
        CheckRecord::bound(ctx.id, "g <-> 1/g two-sample KS p-value", "beta=2 N=2 g=0.2,5".into(), Comparison::Above, 0.01, pval),
    ])
}

fn charfunc_triangle(mut ctx: Ctx) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    let ps = [0.1, 1.0, 10.0];
    let n = 2;
    let g = 0.1;
    let z = z_ratio_mc(n, g, &ps, 1_000_000, ctx.next_seed(), ctx.workers)?;
    let w = ctx.sample(DelayKind::Wigner, 2, n, Coupling::new(g)?, 1_000_000)?;
    for (pt, &p) in z.points.iter().zip(&ps) {
        let (l, _) = laplace_empirical(&w, p)?;
        out.push(CheckRecord::within(ctx.id, "z_ratio_mc vs laplace", format!("N=2 g={g} p={p}"), pt.z_ratio, l, Some(pt.se), 0.02 * pt.z_ratio));
    }
    let z1 = z_ratio_mc(n, 1.0, &ps, 10_000, ctx.next_seed(), ctx.workers)?;
    let w1 = ctx.sample(DelayKind::Wigner, 2, n, Coupling::perfect(), 1_000_000)?;
    for (pt, &p) in z1.points.iter().zip(&ps) {
        let h = z_perfect_hankel(n, p)?.value();
        let floor = 1e-10 * h;
        out.push(CheckRecord::within(ctx.id, "z_ratio_mc vs hankel", format!("N=2 g=1 p={p}"), h, pt.z_ratio, Some(pt.se), (3.0 * pt.se).max(floor)));
        let (l, se) = laplace_empirical(&w1, p)?;
        let comb = (se * se + pt.se * pt.se).sqrt();
        out.push(CheckRecord::within(ctx.id, "laplace vs hankel", format!("N=2 g=1 p={p}"), h, l, Some(comb), (3.0 * comb).max(floor)));
    }
    let mut rng = RngStream::new(ctx.next_seed(), 0).rng();
    let g0 = g_at_zero(n)?;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let s = haar_unitary(n, &mut rng)?;
        let k = hermitian_eigensystem(&cayley_reaction(&s)?)?.values;
        let r = detratio_g(&k, 0.0, g)?.value();
        worst = worst.max((r / g0 - 1.0).abs());
    }
    out.push(CheckRecord::bound(ctx.id, "G(k, 0) constancy", format!("N=2 g={g} draws=1000"), Comparison::Below, 1e-8, worst));
    Ok(out)
}

fn left_tail(mut ctx: Ctx) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    let g = 0.01;
    let ps: Vec<f64> = AxisSpec::Log { lo: 1e2, hi: 1e4, count: 13 }.points();
    for n in [1usize, 2] {
        let z = z_ratio_mc(n, g, &ps, 200_000, ctx.next_seed(), ctx.workers)?;
        let zs: Vec<f64> = z.points.iter().map(|p| p.z_ratio).collect();
        let ses: Vec<f64> = z.points.iter().map(|p| p.se).collect();
        let p = format!("N={n} g={g} p=[1e2,1e4]");
        match fit_left_tail(&ps, &zs, Some(&ses)) {
            Ok(f) => {
                let rate = 2.0 * n as f64;
                let power = (n * n) as f64 / 2.0;
                out.push(CheckRecord::within(ctx.id, "characteristic function rate", p.clone(), rate, f.rate, Some(f.rate_se), 0.05 * rate));
                out.push(CheckRecord::within(ctx.id, "characteristic function power", p, power, f.power, Some(f.power_se), 0.15 * power));
            }
            Err(e) => out.push(CheckRecord::failed(ctx.id, "characteristic function fit", p, &e)),
        }
    }
    let n = 2usize;
    let batch = ctx.sample(DelayKind::Wigner, 2, n, Coupling::new(g)?, 10_000_000)?;
    let t = rescale(&batch, RescaleMode::T)?;
    let dist = log_hist(&t.values, 1e-2, 1e6, 60)?;
    let lo = dist.table().into_iter().find(|r| r.count >= 20).map(|r| r.bin_lo).unwrap_or(0.1);
    let hi = 0.4;
    let power = (n * n) as f64 + 1.5;
    let p = format!("beta=2 N={n} g={g} window=[{lo:.4},{hi}]");
    match fit_log_density_vs_inverse(&dist, power, lo, hi) {
        Ok(f) => out.push(CheckRecord::within(ctx.id, "left-tail rate in t", p.clone(), -(n as f64), f.slope, Some(f.se), 0.2 * n as f64)),
        Err(e) => out.push(CheckRecord::failed(ctx.id, "left-tail rate in t", p.clone(), &e)),
    }
    let pref = oracles::left_tail_prefactor_unitary(n)?;
    let t_mid = (lo * hi).sqrt();
    let predicted = pref.c * t_mid.powf(-pref.power) * (-pref.rate / t_mid).exp();
    let observed = dist
        .table()
        .into_iter()
        .find(|r| r.bin_lo <= t_mid && t_mid < r.bin_hi)
        .map(|r| r.pdf)
        .unwrap_or(f64::NAN);
    out.push(CheckRecord::info(ctx.id, "left-tail prefactor, density at window centre", p, predicted, observed));
    Ok(out)
}

fn oracle_consistency(ctx: Ctx) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    let b2 = SymmetryClass::Unitary;
    for n in 2..=8 {
        let a = oracles::var_wigner_unitary(n, 1.0)?;
        let b = oracles::var_wigner_perfect(b2, n)?;
        out.push(CheckRecord::within(ctx.id, "var wigner at T=1", format!("N={n}"), b, a, None, 1e-12));
        let a = oracles::cov_partial_unitary(n, 1.0)?;
        let b = oracles::cov_partial_perfect(b2, n)?;
        out.push(CheckRecord::within(ctx.id, "cov partial at T=1", format!("N={n}"), b, a, None, 1e-12));
    }
    for n in 1..=4 {
        let z0 = z0_closed(n)?;
        let prod: f64 = (1..=n).map(|k| gamma((n + k) as f64)).product();
        let via = prod / 2f64.powi(n as i32) * oracles::selberg_cauchy_norm(n, n as f64, 2.0)?;
        out.push(CheckRecord::within(ctx.id, "normalisation via Selberg", format!("N={n}"), 1.0, via / z0, None, 1e-10));
    }
    Ok(out)
}

fn crossover(mut ctx: Ctx) -> Result<Vec<CheckRecord>> {
    let n = 50usize;
    let mut out = Vec::new();
    for (nt, comparison, limit) in [(10.0, Comparison::Below, 0.2), (0.1, Comparison::Above, 1.0)] {
        let t = nt / n as f64;
        let w = ctx.sample(DelayKind::Wigner, 2, n, Coupling::from_transmission(t)?, 100_000)?;
        let (m, v) = stats::mean_variance(&w.values);
        out.push(CheckRecord::bound(ctx.id, "relative SD of wigner time", format!("beta=2 N={n} NT={nt}"), comparison, limit, v.sqrt() / m));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        for s in [Suite::Core, Suite::Tails, Suite::Charfunc, Suite::All] {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
        assert!("fast".parse::<Suite>().is_err());
        let mut all: Vec<u8> = [Suite::Core, Suite::Tails, Suite::Charfunc].iter().flat_map(|s| s.criteria().to_vec()).collect();
        all.sort();
        assert_eq!(all, Suite::All.criteria());
    }

    #[test]
    fn cdf_table_integrates_a_known_density() {
        let t = CdfTable::build(|x| Ok((-x).exp()), 1e-6, 40.0, 200).unwrap();
        for x in [0.01, 0.5, 1.0, 3.0, 10.0] {
            assert!((t.eval(x) - (1.0 - (-x).exp())).abs() < 1e-4, "{x}");
        }
    }

    #[test]
    fn pooled_covariance_of_independent_pairs() {
        let mut rng = RngStream::new(1, 0).rng();
        let v: Vec<f64> = (0..200_000).map(|_| crate::rng::normal(&mut rng)).collect();
        let (c, se) = pooled_covariance(&v, 2);
        assert!(c.abs() < 5.0 * se);
    }

    #[test]
    fn oracle_criterion_passes_and_report_round_trips() {
        let records = run_criterion(11, 1, None).unwrap();
        assert!(records.iter().all(|r| r.pass));
        let report = VerificationReport { suite: Suite::Core, seed: 1, pass: true, records, runtime_seconds: 0.1 };
        let json = report.to_json().unwrap();
        let back = VerificationReport::from_json(&json).unwrap();
        let generic: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(generic["records"].as_array().unwrap().len(), back.records.len());
        let tampered = json.replacen("\"pass\": true", "\"pass\": false", 1);
        assert!(VerificationReport::from_json(&tampered).is_err());
        assert_eq!(back, report);
        assert_eq!(back.criterion_passes(11), Some(true));
        assert_eq!(back.criterion_passes(3), None);
        assert!(run_criterion(13, 1, None).is_err());
        let failed = CheckRecord::failed(1, "x", String::new(), &Error::EdgeMismatch);
        let report = VerificationReport { suite: Suite::Core, seed: 1, pass: false, records: vec![failed], runtime_seconds: 0.0 };
        let back = VerificationReport::from_json(&report.to_json().unwrap()).unwrap();
        assert!(back.records[0].observed.is_nan() && !back.pass);
    }
}
