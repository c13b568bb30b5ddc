//! Circular, Laguerre and Cauchy ensembles at perfect coupling.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{c, hermitian_part, identity, CMatrix, HermitianMatrix, UnitaryMatrix};
use crate::rng::{complex_normal, normal};

/// Minimum admissible `|1 + e^{i theta}|` before the Cayley map is refused.
pub const CAYLEY_SINGULAR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum SymmetryClass {
    Orthogonal,
    Unitary,
    Symplectic,
}

impl SymmetryClass {
    /// Accepts beta in {1, 2, 4}.
    pub fn new(beta: u8) -> Result<Self> {
        match beta {
            1 => Ok(Self::Orthogonal),
            2 => Ok(Self::Unitary),
            4 => Ok(Self::Symplectic),
            b => Err(Error::UnsupportedSymmetry(b)),
        }
    }

    /// Accepts beta in {1, 2}, the classes with a matrix sampler.
    pub fn for_sampling(beta: u8) -> Result<Self> {
        match Self::new(beta)? {
            Self::Symplectic => Err(Error::UnsupportedSymmetry(4)),
            s => Ok(s),
        }
    }

    pub fn beta(self) -> u8 {
        match self {
            Self::Orthogonal => 1,
            Self::Unitary => 2,
            Self::Symplectic => 4,
        }
    }

    pub fn beta_f64(self) -> f64 {
        self.beta() as f64
    }

    fn require_sampling(self) -> Result<()> {
        match self {
            Self::Symplectic => Err(Error::UnsupportedSymmetry(4)),
            _ => Ok(()),
        }
    }
}

impl TryFrom<u8> for SymmetryClass {
    type Error = Error;
    fn try_from(b: u8) -> Result<Self> {
        Self::new(b)
    }
}

impl From<SymmetryClass> for u8 {
    fn from(s: SymmetryClass) -> u8 {
        s.beta()
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        Err(invalid("N", "channel count must be at least 1"))
    } else {
        Ok(())
    }
}

/// Haar unitary from the QR factorisation of a complex Ginibre matrix, with the
/// phases of `diag(R)` absorbed into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<UnitaryMatrix> {
    check_dim(n)?;
    let z = CMatrix::from_fn(n, n, |_, _| complex_normal(rng));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let norm = d.norm();
        let phase = if norm > 0.0 { d / norm } else { c(1.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    Ok(UnitaryMatrix::new_unchecked(q))
}

/// CUE (beta=2) or COE `U U^T` (beta=1) scattering matrix.
pub fn sample_scattering_perfect<R: Rng + ?Sized>(
    beta: SymmetryClass,
    n: usize,
    rng: &mut R,
) -> Result<UnitaryMatrix> {
    beta.require_sampling()?;
    let u = haar_unitary(n, rng)?;
    match beta {
        SymmetryClass::Unitary => Ok(u),
        _ => {
            let m = u.matrix();
            let s = m * m.transpose();
            let s = (&s + s.transpose()) * c(0.5);
            Ok(UnitaryMatrix::new_unchecked(s))
        }
    }
}

/// Inverse Wigner-Smith matrix at perfect coupling: complex Wishart `X X^dagger`
/// with `X` of size N x 2N (beta=2), real Wishart `X X^T` with `X` of size
/// N x (2N+1) (beta=1).
pub fn sample_inverse_ws_perfect<R: Rng + ?Sized>(
    beta: SymmetryClass,
    n: usize,
    rng: &mut R,
) -> Result<HermitianMatrix> {
    beta.require_sampling()?;
    check_dim(n)?;
    let x: CMatrix = match beta {
        SymmetryClass::Unitary => DMatrix::from_fn(n, 2 * n, |_, _| complex_normal(rng)),
        _ => DMatrix::from_fn(n, 2 * n + 1, |_, _| c(normal(rng))),
    };
    let g = &x * x.adjoint();
    Ok(HermitianMatrix::from_parts(g).assume_positive())
}

/// Smallest `|1 + e^{i theta}|` over the spectrum of a unitary matrix, read off
/// the Hermitian part: `|1 + e^{i theta}|^2 = 2 (1 + cos theta)`.
pub fn min_distance_to_minus_one(s: &UnitaryMatrix) -> Result<f64> {
    let h = HermitianMatrix::from_parts(hermitian_part(s.matrix()));
    let lmin = h.eigenvalues()?[0];
    Ok((2.0 * (1.0 + lmin)).max(0.0).sqrt())
}

/// Inverse Cayley map `K = -i (I + S)^{-1} (I - S)`.
pub fn cayley_reaction(s: &UnitaryMatrix) -> Result<HermitianMatrix> {
    let d = min_distance_to_minus_one(s)?;
    if d < CAYLEY_SINGULAR_TOL {
        return Err(Error::NearSingular(d));
    }
    let n = s.dim();
    let i = identity(n);
    let lhs = &i + s.matrix();
    let rhs = &i - s.matrix();
    let x = lhs
        .lu()
        .solve(&rhs)
        .ok_or(Error::NearSingular(d))?;
    Ok(HermitianMatrix::from_parts(x * Complex64::new(0.0, -1.0)))
}

/// Forward Cayley map `S = (I - i g K)(I + i g K)^{-1}`.
pub fn cayley_scattering(k: &HermitianMatrix, g: f64) -> Result<UnitaryMatrix> {
    let n = k.dim();
    let i = identity(n);
    let igk = k.matrix() * Complex64::new(0.0, g);
    let num = &i - &igk;
    let den = &i + &igk;
    let s = den
        .lu()
        .solve(&num)
        .ok_or_else(|| Error::Invariant("I + i g K is singular".into()))?;
    Ok(UnitaryMatrix::new_unchecked(s))
}

/// Eigenphases `theta_a = -2 arctan(g k_a)` of `S = (I - i g K)(I + i g K)^{-1}`.
pub fn eigenphases(k: &HermitianMatrix, g: f64) -> Result<Vec<f64>> {
    Ok(k
        .eigenvalues()?
        .into_iter()
        .map(|x| -2.0 * (g * x).atan())
        .collect())
}

/// Eigenphases in (-pi, pi] of a unitary matrix through the Cayley map; the
/// spectrum is rotated first when an eigenvalue sits next to -1.
pub fn unitary_eigenphases(s: &UnitaryMatrix) -> Result<Vec<f64>> {
    let wrap = |x: f64| {
        let y = (x + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
            - std::f64::consts::PI;
        if y == -std::f64::consts::PI {
            std::f64::consts::PI
        } else {
            y
        }
    };
    for alpha in [0.0, 1.0, 2.0] {
        let rotated = UnitaryMatrix::new_unchecked(s.matrix() * Complex64::from_polar(1.0, alpha));
        match cayley_reaction(&rotated) {
            Ok(k) => {
                return Ok(eigenphases(&k, 1.0)?
                    .into_iter()
                    .map(|t| wrap(t - alpha))
                    .collect())
            }
            Err(Error::NearSingular(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NearSingular(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, max_abs_diff, unitarity_residual};
    use crate::rng::RngStream;
    use crate::stats::{ks_one_sample, ks_two_sample};
    use std::f64::consts::PI;

    #[test]
    fn haar_scalar_has_unit_modulus() {
        let mut rng = RngStream::new(1, 0).rng();
        for _ in 0..100 {
            let u = haar_unitary(1, &mut rng).unwrap();
            assert!((u.matrix()[(0, 0)].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_is_unitary() {
        let mut rng = RngStream::new(2, 0).rng();
        for _ in 0..100 {
            let u = haar_unitary(4, &mut rng).unwrap();
            assert!(unitarity_residual(u.matrix()) < 1e-10);
        }
        assert!(haar_unitary(0, &mut rng).is_err());
    }

    #[test]
    fn haar_eigenphases_are_uniform() {
        let mut rng = RngStream::new(3, 0).rng();
        let mut phases = Vec::new();
        for _ in 0..10_000 {
            let u = haar_unitary(3, &mut rng).unwrap();
            phases.extend(unitary_eigenphases(&u).unwrap());
        }
        let d = ks_one_sample(&mut phases, |x| (x + PI) / (2.0 * PI));
        assert!(d < 1.36 / (3.0e4f64).sqrt() * 1.5, "KS {d}");
    }

    #[test]
    fn coe_is_symmetric_and_scalar_unimodular() {
        let mut rng = RngStream::new(4, 0).rng();
        let s = sample_scattering_perfect(SymmetryClass::Orthogonal, 2, &mut rng).unwrap();
        assert!(max_abs_diff(s.matrix(), &s.matrix().transpose()) < 1e-12);
        let s1 = sample_scattering_perfect(SymmetryClass::Orthogonal, 1, &mut rng).unwrap();
        assert!((s1.matrix()[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(matches!(
            sample_scattering_perfect(SymmetryClass::Symplectic, 2, &mut rng),
            Err(Error::UnsupportedSymmetry(4))
        ));
    }

    #[test]
    fn cue_scalar_phase_is_uniform() {
        let mut rng = RngStream::new(5, 0).rng();
        let mut ph: Vec<f64> = (0..10_000)
            .map(|_| {
                sample_scattering_perfect(SymmetryClass::Unitary, 1, &mut rng)
                    .unwrap()
                    .matrix()[(0, 0)]
                    .arg()
            })
            .collect();
        let d = ks_one_sample(&mut ph, |x| (x + PI) / (2.0 * PI));
        assert!(d < 1.63 / 100.0, "KS {d}");
    }

    #[test]
    fn coe_invariance_under_transpose_conjugation() {
        let mut rng = RngStream::new(6, 0).rng();
        let v = haar_unitary(2, &mut RngStream::new(6, 99).rng()).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for _ in 0..50_000 {
            let s = sample_scattering_perfect(SymmetryClass::Orthogonal, 2, &mut rng).unwrap();
            a.extend(unitary_eigenphases(&s).unwrap());
            let s = sample_scattering_perfect(SymmetryClass::Orthogonal, 2, &mut rng).unwrap();
            let t = v.matrix().transpose() * s.matrix() * v.matrix();
            b.extend(unitary_eigenphases(&UnitaryMatrix::new_unchecked(t)).unwrap());
        }
        let (_, p) = ks_two_sample(&mut a, &mut b);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn wishart_scalar_means() {
        let n = 1_000_000;
        for (beta, mean) in [(SymmetryClass::Unitary, 2.0), (SymmetryClass::Orthogonal, 3.0)] {
            let mut rng = RngStream::new(7, beta.beta() as u64).rng();
            let xs: Vec<f64> = (0..n)
                .map(|_| sample_inverse_ws_perfect(beta, 1, &mut rng).unwrap().trace())
                .collect();
            let (m, se) = mean_se(&xs);
            assert!((m - mean).abs() < 4.0 * se, "beta {beta:?}: {m} +- {se}");
        }
    }

    #[test]
    fn wishart_trace_means() {
        let n = 200_000;
        for nch in [2usize, 3] {
            for (beta, expect) in [
                (SymmetryClass::Unitary, 2.0 * (nch * nch) as f64),
                (SymmetryClass::Orthogonal, (nch * (2 * nch + 1)) as f64),
            ] {
                let mut rng = RngStream::new(8, nch as u64).rng();
                let xs: Vec<f64> = (0..n)
                    .map(|_| sample_inverse_ws_perfect(beta, nch, &mut rng).unwrap().trace())
                    .collect();
                let (m, se) = mean_se(&xs);
                assert!((m - expect).abs() < 4.0 * se, "{m} vs {expect}");
            }
        }
    }

    #[test]
    fn wishart_is_positive_definite() {
        let mut rng = RngStream::new(9, 0).rng();
        for beta in [SymmetryClass::Unitary, SymmetryClass::Orthogonal] {
            for _ in 0..200 {
                let g = sample_inverse_ws_perfect(beta, 4, &mut rng).unwrap();
                assert!(g.eigenvalues().unwrap()[0] > 0.0);
            }
        }
    }

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn cayley_fixed_point_and_scalar() {
        let k = cayley_reaction(&UnitaryMatrix::identity(3)).unwrap();
        assert!(max_abs(k.matrix()) < 1e-15);
        let s = UnitaryMatrix::new(CMatrix::from_element(1, 1, Complex64::new(0.0, 1.0))).unwrap();
        let k = cayley_reaction(&s).unwrap();
        assert!((k.matrix()[(0, 0)].re + 1.0).abs() < 1e-14);
        let minus = UnitaryMatrix::new(CMatrix::from_element(1, 1, c(-1.0))).unwrap();
        assert!(matches!(cayley_reaction(&minus), Err(Error::NearSingular(_))));
    }

    #[test]
    fn cayley_round_trip() {
        let mut rng = RngStream::new(10, 0).rng();
        let s = haar_unitary(4, &mut rng).unwrap();
        let k = cayley_reaction(&s).unwrap();
        let back = cayley_scattering(&k, 1.0).unwrap();
        assert!(max_abs_diff(back.matrix(), s.matrix()) < 1e-10);
    }

    #[test]
    fn cue_reaction_levels_follow_cauchy_density() {
        // Marginal level density of the N=2 Cauchy ensemble, integrated numerically
        // from the joint weight (k1-k2)^2 / ((1+k1^2)^2 (1+k2^2)^2).
        let level_cdf = |x: f64| -> f64 {
            let joint_marg = |k: f64| {
                crate::quad::integrate_real_line(
                    |k2| (k - k2).powi(2) / ((1.0 + k * k).powi(2) * (1.0 + k2 * k2).powi(2)),
                    1e-12,
                )
                .unwrap()
            };
            let norm = PI * PI / 2.0;
            let mass = crate::quad::integrate(
                |u: f64| {
                    // k = tan(u) maps (-pi/2, atan x) onto (-inf, x)
                    let k = u.tan();
                    joint_marg(k) * (1.0 + k * k)
                },
                -PI / 2.0,
                x.atan(),
                1e-10,
            )
            .unwrap();
            mass / norm
        };
        let grid: Vec<f64> = (-40..=40).map(|i| (i as f64 / 8.0).sinh()).collect();
        let table: Vec<(f64, f64)> = grid.iter().map(|&x| (x, level_cdf(x))).collect();

        let mut rng = RngStream::new(11, 0).rng();
        let mut ks = Vec::new();
        while ks.len() < 200_000 {
            let s = haar_unitary(2, &mut rng).unwrap();
            if let Ok(k) = cayley_reaction(&s) {
                ks.extend(k.eigenvalues().unwrap());
            }
        }
        ks.sort_by(f64::total_cmp);
        let n = ks.len() as f64;
        let mut d: f64 = 0.0;
        for &(x, f) in &table {
            let emp = ks.partition_point(|&v| v <= x) as f64 / n;
            d = d.max((emp - f).abs());
        }
        assert!(d < 0.01, "KS {d}");
    }
}
