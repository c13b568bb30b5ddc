//! Non-ideal coupling: the Poisson-kernel map of the scattering matrix and the
//! congruence `Q_s = A Q_s0 A` of the symmetrised Wigner-Smith matrix.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensembles::{
    cayley_reaction, sample_inverse_ws_perfect, sample_scattering_perfect, SymmetryClass,
};
use crate::error::{invalid, Error, Result};
use crate::linalg::{
    c, hermitian_part, identity, matrix_function_hermitian, CMatrix, HermitianMatrix, UnitaryMatrix,
};

/// Resampling attempts before a near-singular Cayley input is reported.
pub const MAX_RESAMPLES: usize = 100;

/// Uniform coupling constant `g > 0`, equivalently transmission
/// `T = 4g/(1+g)^2` and mean scattering amplitude `(1-g)/(1+g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    g: f64,
}

impl Coupling {
    pub fn new(g: f64) -> Result<Self> {
        if g > 0.0 && g.is_finite() {
            Ok(Self { g })
        } else {
            Err(invalid("g", format!("must be positive and finite, got {g}")))
        }
    }

    pub fn perfect() -> Self {
        Self { g: 1.0 }
    }

    /// The root `g <= 1` of `T = 4g/(1+g)^2`.
    pub fn from_transmission(t: f64) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(invalid("T", format!("must lie in (0, 1], got {t}")));
        }
        let r = 1.0 + (1.0 - t).sqrt();
        Ok(Self { g: t / (r * r) })
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn transmission(&self) -> f64 {
        4.0 * self.g / ((1.0 + self.g) * (1.0 + self.g))
    }

    pub fn mean_s(&self) -> f64 {
        (1.0 - self.g) / (1.0 + self.g)
    }

    /// `2/T - 1 = (1 + g^2)/(2g)`.
    pub fn g_bar(&self) -> f64 {
        (1.0 + self.g * self.g) / (2.0 * self.g)
    }

    pub fn is_perfect(&self) -> bool {
        self.g == 1.0
    }

    /// The equivalent coupling in `(0, 1]`.
    pub fn canonical(&self) -> Self {
        if self.g > 1.0 {
            Self { g: 1.0 / self.g }
        } else {
            *self
        }
    }
}

/// Channel-dependent couplings `g_a` in the basis rotated by `mixing`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralCoupling {
    g: Vec<f64>,
    mixing: UnitaryMatrix,
}

impl GeneralCoupling {
    pub fn new(g: Vec<f64>, mixing: UnitaryMatrix) -> Result<Self> {
        if g.is_empty() || g.len() != mixing.dim() {
            return Err(invalid("g_a", "need one coupling per channel"));
        }
        if let Some(x) = g.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(invalid("g_a", format!("couplings must be positive, got {x}")));
        }
        Ok(Self { g, mixing })
    }

    pub fn diagonal(g: Vec<f64>) -> Result<Self> {
        let n = g.len();
        Self::new(g, UnitaryMatrix::identity(n))
    }

    pub fn couplings(&self) -> &[f64] {
        &self.g
    }

    /// `C = U diag(sqrt g_a) U^dagger`.
    fn root_matrix(&self) -> CMatrix {
        let u = self.mixing.matrix();
        let n = self.g.len();
        let d = CMatrix::from_fn(n, n, |i, j| if i == j { c(self.g[i].sqrt()) } else { c(0.0) });
        u * d * u.adjoint()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingSpec {
    Uniform(Coupling),
    General(GeneralCoupling),
}

/// One joint draw of the scattering matrix and the symmetrised Wigner-Smith matrix.
#[derive(Debug, Clone)]
pub struct CavitySample {
    pub s: UnitaryMatrix,
    pub q: HermitianMatrix,
    pub coupling: CouplingSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayKind {
    Wigner,
    Proper,
    Partial,
    Heuristic,
}

impl std::str::FromStr for DelayKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wigner" => Ok(Self::Wigner),
            "proper" => Ok(Self::Proper),
            "partial" => Ok(Self::Partial),
            "heuristic" => Ok(Self::Heuristic),
            _ => Err(Error::Parse {
                token: s.into(),
                reason: "expected wigner, proper, partial or heuristic".into(),
            }),
        }
    }
}

impl std::fmt::Display for DelayKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Wigner => "wigner",
            Self::Proper => "proper",
            Self::Partial => "partial",
            Self::Heuristic => "heuristic",
        })
    }
}

/// Sampled delays in Heisenberg units; proper and partial times are pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeDelayBatch {
    pub kind: DelayKind,
    pub beta: u8,
    pub channels: usize,
    pub g: f64,
    pub values: Vec<f64>,
    pub rejected: usize,
}

impl TimeDelayBatch {
    pub fn new(kind: DelayKind, beta: u8, channels: usize, g: f64, values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Invariant(format!("non-positive delay {v}")));
        }
        Ok(Self { kind, beta, channels, g, values, rejected: 0 })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Concatenates batches drawn with the same configuration.
    pub fn concat(parts: Vec<TimeDelayBatch>) -> Result<Self> {
        let mut it = parts.into_iter();
        let mut out = it
            .next()
            .ok_or_else(|| Error::Insufficient("no batches to merge".into()))?;
        for p in it {
            if (p.kind, p.beta, p.channels) != (out.kind, out.beta, out.channels) || p.g != out.g {
                return Err(Error::Invariant("merging batches of different configurations".into()));
            }
            out.values.extend(p.values);
            out.rejected += p.rejected;
        }
        Ok(out)
    }
}

/// `A = sqrt(2g) [(1+g^2) I + (1-g^2) H]^{-1/2}` with `H = (S0 + S0^dagger)/2`.
pub fn coupling_matrix_a(s0: &UnitaryMatrix, g: f64) -> Result<HermitianMatrix> {
    Coupling::new(g)?;
    let h = HermitianMatrix::from_parts(hermitian_part(s0.matrix()));
    let (a, b) = (1.0 + g * g, 1.0 - g * g);
    let pre = (2.0 * g).sqrt();
    Ok(matrix_function_hermitian(&h, |x| pre / (a + b * x).sqrt())?.assume_positive())
}

/// `S = (S_bar I + S0)(I + S_bar S0)^{-1}` with `S_bar = (1-g)/(1+g)`.
pub fn transform_scattering(s0: &UnitaryMatrix, coupling: Coupling) -> Result<UnitaryMatrix> {
    if coupling.is_perfect() {
        return Ok(s0.clone());
    }
    let sbar = c(coupling.mean_s());
    let i = identity(s0.dim());
    let num = &i * sbar + s0.matrix();
    let den = &i + s0.matrix() * sbar;
    let s = den
        .lu()
        .solve(&num)
        .ok_or_else(|| Error::Invariant("I + S_bar S0 is singular".into()))?;
    Ok(UnitaryMatrix::new_unchecked(s))
}

/// Joint draw at uniform coupling.
pub fn build_sample<R: Rng + ?Sized>(
    beta: SymmetryClass,
    n: usize,
    coupling: Coupling,
    rng: &mut R,
) -> Result<CavitySample> {
    let s0 = sample_scattering_perfect(beta, n, rng)?;
    let q0 = sample_inverse_ws_perfect(beta, n, rng)?.inverse_positive()?;
    if coupling.is_perfect() {
        return Ok(CavitySample { s: s0, q: q0, coupling: CouplingSpec::Uniform(coupling) });
    }
    let a = coupling_matrix_a(&s0, coupling.g())?;
    let q = a.matrix() * q0.matrix() * a.matrix();
    Ok(CavitySample {
        s: transform_scattering(&s0, coupling)?,
        q: HermitianMatrix::from_parts(q).assume_positive(),
        coupling: CouplingSpec::Uniform(coupling),
    })
}

/// Wigner time alone, `(2g/N) tr([(1+g^2) I + (1-g^2) H]^{-1} Gamma_0^{-1})`,
/// without forming `A` or `S`.
pub fn sample_wigner_time<R: Rng + ?Sized>(
    beta: SymmetryClass,
    n: usize,
    coupling: Coupling,
    rng: &mut R,
) -> Result<f64> {
    let s0 = sample_scattering_perfect(beta, n, rng)?;
    let gamma0 = sample_inverse_ws_perfect(beta, n, rng)?;
    let g = coupling.g();
    let m = identity(n) * c(1.0 + g * g) + hermitian_part(s0.matrix()) * c(1.0 - g * g);
    let p = gamma0.matrix() * m;
    let inv = p
        .try_inverse()
        .ok_or_else(|| Error::Invariant("Gamma_0 M is singular".into()))?;
    let tr: f64 = inv.diagonal().iter().map(|z| z.re).sum();
    let tau = 2.0 * g * tr / n as f64;
    if tau > 0.0 && tau.is_finite() {
        Ok(tau)
    } else {
        Err(Error::Invariant(format!("non-positive Wigner time {tau}")))
    }
}

/// Joint draw at channel-dependent coupling:
/// `A = (I + (CKC)^2)^{-1/2} C (I + K^2)^{1/2}`, `Q_s = A Q_s0 A^dagger`,
/// `S = (I - i CKC)(I + i CKC)^{-1}`. Returns the sample and the number of
/// near-singular draws that were discarded.
pub fn build_sample_general<R: Rng + ?Sized>(
    beta: SymmetryClass,
    coupling: &GeneralCoupling,
    rng: &mut R,
) -> Result<(CavitySample, usize)> {
    let n = coupling.g.len();
    for attempt in 0..MAX_RESAMPLES {
        let s0 = sample_scattering_perfect(beta, n, rng)?;
        let q0 = sample_inverse_ws_perfect(beta, n, rng)?.inverse_positive()?;
        let k = match cayley_reaction(&s0) {
            Ok(k) => k,
            Err(Error::NearSingular(_)) => continue,
            Err(e) => return Err(e),
        };
        let cm = coupling.root_matrix();
        let ckc = HermitianMatrix::from_parts(&cm * k.matrix() * &cm);
        let left = matrix_function_hermitian(&ckc, |x| 1.0 / (1.0 + x * x).sqrt())?;
        let right = matrix_function_hermitian(&k, |x| (1.0 + x * x).sqrt())?;
        let a = left.matrix() * &cm * right.matrix();
        let q = &a * q0.matrix() * a.adjoint();
        let i = identity(n);
        let ickc = ckc.matrix() * num_complex::Complex64::new(0.0, 1.0);
        let s = (&i + &ickc)
            .lu()
            .solve(&(&i - &ickc))
            .ok_or_else(|| Error::Invariant("I + i CKC is singular".into()))?;
        return Ok((
            CavitySample {
                s: UnitaryMatrix::new_unchecked(s),
                q: HermitianMatrix::from_parts(q).assume_positive(),
                coupling: CouplingSpec::General(coupling.clone()),
            },
            attempt,
        ));
    }
    Err(Error::NearSingular(0.0))
}

/// `(1/N) tr Q_s`.
pub fn wigner_time(q: &HermitianMatrix) -> Result<f64> {
    let t = q.trace() / q.dim() as f64;
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(Error::Invariant(format!("non-positive trace {t}")))
    }
}

/// Eigenvalues of `Q_s`, ascending.
pub fn proper_times(q: &HermitianMatrix) -> Result<Vec<f64>> {
    let v = q.eigenvalues()?;
    if v[0] > 0.0 {
        Ok(v)
    } else {
        Err(Error::Invariant(format!("non-positive proper time {}", v[0])))
    }
}

/// Eigenphase derivatives: diagonal of `Q_s` in the eigenbasis of `S`, taken
/// from the reaction matrix of `e^{i alpha} S` with `alpha` chosen to keep the
/// Cayley map regular.
pub fn partial_times(sample: &CavitySample) -> Result<Vec<f64>> {
    for alpha in [0.0, 1.0, 2.0] {
        let rotated = UnitaryMatrix::new_unchecked(
            sample.s.matrix() * num_complex::Complex64::from_polar(1.0, alpha),
        );
        let k = match cayley_reaction(&rotated) {
            Ok(k) => k,
            Err(Error::NearSingular(_)) => continue,
            Err(e) => return Err(e),
        };
        let v = k.eigensystem()?.vectors;
        let d: DMatrix<_> = v.adjoint() * sample.q.matrix() * &v;
        let out: Vec<f64> = d.diagonal().iter().map(|z| z.re).collect();
        if let Some(x) = out.iter().find(|x| !(**x > 0.0)) {
            return Err(Error::Invariant(format!("non-positive partial time {x}")));
        }
        return Ok(out);
    }
    Err(Error::NearSingular(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{cayley_scattering, eigenphases, haar_unitary, unitary_eigenphases};
    use crate::linalg::{max_abs_diff, unitarity_residual};
    use crate::rng::RngStream;
    use crate::stats::{ks_one_sample, mean_variance};
    use std::f64::consts::PI;

    const B1: SymmetryClass = SymmetryClass::Orthogonal;
    const B2: SymmetryClass = SymmetryClass::Unitary;

    #[test]
    fn coupling_conversions() {
        let c = Coupling::new(0.25).unwrap();
        assert!((c.transmission() - 0.64).abs() < 1e-15);
        assert!((Coupling::new(4.0).unwrap().transmission() - 0.64).abs() < 1e-15);
        assert!((Coupling::from_transmission(0.64).unwrap().g() - 0.25).abs() < 1e-15);
        assert_eq!(Coupling::from_transmission(1.0).unwrap().g(), 1.0);
        assert_eq!(Coupling::new(1.0).unwrap().mean_s(), 0.0);
        assert!((Coupling::from_transmission(0.5).unwrap().g_bar() - 3.0).abs() < 1e-14);
        assert_eq!(Coupling::new(4.0).unwrap().canonical().g(), 0.25);
        assert!(Coupling::new(0.0).is_err() && Coupling::from_transmission(1.5).is_err());
    }

    #[test]
    fn a_matrix_limits() {
        let mut rng = RngStream::new(1, 0).rng();
        let s0 = haar_unitary(3, &mut rng).unwrap();
        let a = coupling_matrix_a(&s0, 1.0).unwrap();
        assert!(max_abs_diff(a.matrix(), &identity(3)) < 1e-12);
        let a = coupling_matrix_a(&UnitaryMatrix::identity(2), 0.3).unwrap();
        assert!(max_abs_diff(a.matrix(), &(identity(2) * c(0.3f64.sqrt()))) < 1e-14);
        let a = coupling_matrix_a(&s0, 0.3).unwrap();
        let h = hermitian_part(s0.matrix());
        assert!(max_abs_diff(&(a.matrix() * &h), &(&h * a.matrix())) < 1e-9);
    }

    #[test]
    fn a_matrix_matches_reaction_route() {
        let mut rng = RngStream::new(2, 0).rng();
        let g: f64 = 0.3;
        let mut checked = 0;
        while checked < 20 {
            let s0 = haar_unitary(3, &mut rng).unwrap();
            if unitary_eigenphases(&s0).unwrap().iter().any(|t| t.abs() >= 3.0) {
                continue;
            }
            let k = cayley_reaction(&s0).unwrap();
            let lit = matrix_function_hermitian(&k, |x| g.sqrt() * ((1.0 + x * x) / (1.0 + g * g * x * x)).sqrt()).unwrap();
            let a = coupling_matrix_a(&s0, g).unwrap();
            assert!(max_abs_diff(a.matrix(), lit.matrix()) < 1e-8);
            checked += 1;
        }
    }

    #[test]
    fn scattering_map_properties() {
        let mut rng = RngStream::new(3, 0).rng();
        let c9 = Coupling::new(1.0 / 9.0).unwrap();
        let one = UnitaryMatrix::new(DMatrix::from_element(1, 1, c(1.0))).unwrap();
        let minus = UnitaryMatrix::new(DMatrix::from_element(1, 1, c(-1.0))).unwrap();
        assert!((transform_scattering(&one, c9).unwrap().matrix()[(0, 0)] - c(1.0)).norm() < 1e-15);
        assert!((transform_scattering(&minus, c9).unwrap().matrix()[(0, 0)] - c(-1.0)).norm() < 1e-15);
        for _ in 0..50 {
            let s0 = haar_unitary(4, &mut rng).unwrap();
            assert_eq!(transform_scattering(&s0, Coupling::perfect()).unwrap(), s0);
            let s = transform_scattering(&s0, Coupling::new(0.2).unwrap()).unwrap();
            assert!(unitarity_residual(s.matrix()) < 1e-10);
            let k = cayley_reaction(&s0).unwrap();
            let lit = cayley_scattering(&k, 0.2).unwrap();
            assert!(max_abs_diff(s.matrix(), lit.matrix()) < 1e-9);
        }
    }

    #[test]
    fn one_channel_poisson_kernel() {
        let c9 = Coupling::new(1.0 / 9.0).unwrap();
        let sb = c9.mean_s();
        let mut rng = RngStream::new(4, 0).rng();
        let mut phases: Vec<f64> = (0..100_000)
            .map(|_| {
                let s0 = haar_unitary(1, &mut rng).unwrap();
                transform_scattering(&s0, c9).unwrap().matrix()[(0, 0)].arg()
            })
            .collect();
        // CDF of (1 - sb^2)/(2 pi |1 - sb e^{i theta}|^2) on (-pi, pi]
        let cdf = |t: f64| 0.5 + ((1.0 + sb) / (1.0 - sb) * (t / 2.0).tan()).atan() / PI;
        let d = ks_one_sample(&mut phases, cdf);
        assert!(d < 0.01, "KS {d}");
    }

    #[test]
    fn perfect_coupling_returns_inverse_wishart_inverse() {
        let mut r1 = RngStream::new(5, 0).rng();
        let mut r2 = RngStream::new(5, 0).rng();
        let s = build_sample(B2, 3, Coupling::perfect(), &mut r1).unwrap();
        let _ = sample_scattering_perfect(B2, 3, &mut r2).unwrap();
        let g0 = sample_inverse_ws_perfect(B2, 3, &mut r2).unwrap();
        let q0 = g0.inverse_positive().unwrap();
        assert_eq!(s.q.matrix(), q0.matrix());
    }

    #[test]
    fn fast_wigner_path_matches_full_construction() {
        for beta in [B1, B2] {
            let c = Coupling::new(0.07).unwrap();
            let mut r1 = RngStream::new(6, 1).rng();
            let mut r2 = RngStream::new(6, 1).rng();
            for _ in 0..50 {
                let s = build_sample(beta, 3, c, &mut r1).unwrap();
                let t = sample_wigner_time(beta, 3, c, &mut r2).unwrap();
                let w = wigner_time(&s.q).unwrap();
                assert!((t - w).abs() < 1e-9 * w);
            }
        }
    }

    #[test]
    fn orthogonal_class_stays_real_symmetric() {
        let mut rng = RngStream::new(7, 0).rng();
        let s = build_sample(B1, 3, Coupling::new(0.3).unwrap(), &mut rng).unwrap();
        let q = s.q.matrix();
        assert!(q.iter().all(|z| z.im.abs() < 1e-12));
        assert!(max_abs_diff(s.s.matrix(), &s.s.matrix().transpose()) < 1e-12);
    }

    #[test]
    fn general_coupling_reduces_to_uniform() {
        let g = 0.4;
        let gc = GeneralCoupling::diagonal(vec![g; 3]).unwrap();
        let mut r1 = RngStream::new(8, 0).rng();
        let mut r2 = RngStream::new(8, 0).rng();
        for _ in 0..20 {
            let (a, skipped) = build_sample_general(B2, &gc, &mut r1).unwrap();
            if skipped > 0 {
                return;
            }
            let b = build_sample(B2, 3, Coupling::new(g).unwrap(), &mut r2).unwrap();
            assert!(max_abs_diff(a.q.matrix(), b.q.matrix()) < 1e-8);
            assert!(max_abs_diff(a.s.matrix(), b.s.matrix()) < 1e-8);
        }
    }

    #[test]
    fn general_coupling_is_positive_and_keeps_the_mean() {
        let mut rng = RngStream::new(9, 0).rng();
        let mix = haar_unitary(2, &mut rng).unwrap();
        let gc = GeneralCoupling::new(vec![0.1, 0.4], mix).unwrap();
        let mut taus = Vec::new();
        for _ in 0..100_000 {
            let (s, _) = build_sample_general(B2, &gc, &mut rng).unwrap();
            assert!(proper_times(&s.q).unwrap()[0] > 0.0);
            assert!(unitarity_residual(s.s.matrix()) < 1e-10);
            taus.push(wigner_time(&s.q).unwrap());
        }
        let (m, v) = mean_variance(&taus);
        let se = (v / taus.len() as f64).sqrt();
        assert!((m - 0.5).abs() < 4.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn reaction_eigenphases() {
        let k = HermitianMatrix::from_parts(DMatrix::zeros(3, 3));
        assert!(eigenphases(&k, 0.5).unwrap().iter().all(|t| *t == 0.0));
        let k = HermitianMatrix::from_parts(DMatrix::from_element(1, 1, c(1.0)));
        assert!((eigenphases(&k, 1.0).unwrap()[0] + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn partial_times_sum_to_trace() {
        let mut rng = RngStream::new(10, 0).rng();
        for _ in 0..100 {
            let s = build_sample(B2, 4, Coupling::new(0.3).unwrap(), &mut rng).unwrap();
            let p = partial_times(&s).unwrap();
            let sum: f64 = p.iter().sum();
            assert!((sum - s.q.trace()).abs() < 1e-9 * s.q.trace());
        }
    }

    #[test]
    fn one_channel_times_coincide() {
        let mut rng = RngStream::new(11, 0).rng();
        let s = build_sample(B2, 1, Coupling::new(0.3).unwrap(), &mut rng).unwrap();
        let w = wigner_time(&s.q).unwrap();
        assert!((proper_times(&s.q).unwrap()[0] - w).abs() < 1e-12 * w);
        assert!((partial_times(&s).unwrap()[0] - w).abs() < 1e-12 * w);
    }
}
