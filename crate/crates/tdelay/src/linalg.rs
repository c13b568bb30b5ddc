//! Small dense complex matrices: structured wrappers and a cyclic Jacobi
//! eigensolver for Hermitian input.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const UNITARY_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |a_ij - b_ij|`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs_diff(&(u.adjoint() * u), &identity(n))
}

pub fn hermiticity_residual(h: &CMatrix) -> f64 {
    max_abs_diff(h, &h.adjoint())
}

/// `(M + M^dagger) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(CMatrix);

impl UnitaryMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Invariant("unitary matrix must be square".into()));
        }
        let r = unitarity_residual(&m);
        if !(r < UNITARY_TOL) {
            return Err(Error::Invariant(format!("unitarity residual {r:.3e}")));
        }
        Ok(Self(m))
    }

    /// Wraps `m` without the O(N^3) unitarity check outside debug builds.
    pub fn new_unchecked(m: CMatrix) -> Self {
        debug_assert!(
            unitarity_residual(&m) < UNITARY_TOL,
            "unitarity residual {:e}",
            unitarity_residual(&m)
        );
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: CMatrix,
    positive_definite: bool,
}

impl HermitianMatrix {
    /// Checks `|H - H^dagger|_max` relative to the entry scale, then stores the
    /// exactly symmetrised matrix.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Invariant("Hermitian matrix must be square".into()));
        }
        let r = hermiticity_residual(&m);
        if !(r <= HERMITIAN_TOL * max_abs(&m).max(1.0)) {
            return Err(Error::Invariant(format!("Hermiticity residual {r:.3e}")));
        }
        Ok(Self {
            m: hermitian_part(&m),
            positive_definite: false,
        })
    }

    /// Symmetrises `m` without checking; for matrices Hermitian by construction.
    pub fn from_parts(m: CMatrix) -> Self {
        Self {
            m: hermitian_part(&m),
            positive_definite: false,
        }
    }

    /// Marks the matrix positive definite after verifying its Cholesky factor exists.
    pub fn certify_positive(mut self) -> Result<Self> {
        if self.m.clone().cholesky().is_none() {
            return Err(Error::Invariant("matrix is not positive definite".into()));
        }
        self.positive_definite = true;
        Ok(self)
    }

    pub(crate) fn assume_positive(mut self) -> Self {
        self.positive_definite = true;
        self
    }

    pub fn is_positive_definite(&self) -> bool {
        self.positive_definite
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn eigensystem(&self) -> Result<EigenSystem> {
        hermitian_eigensystem(self)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(hermitian_eigensystem(self)?.values)
    }

    /// Inverse of a positive definite matrix via Cholesky.
    pub fn inverse_positive(&self) -> Result<HermitianMatrix> {
        let chol = self
            .m
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Invariant("matrix is not positive definite".into()))?;
        Ok(HermitianMatrix::from_parts(chol.inverse()).assume_positive())
    }
}

#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, ordered like `values`.
    pub vectors: CMatrix,
}

/// Cyclic Jacobi diagonalisation of a Hermitian matrix.
///
/// Each rotation first removes the phase of `a_pq` with a diagonal unitary and
/// then applies the real symmetric Jacobi rotation, so the composite 2x2 block is
/// `[[c, s], [-s e^{-i phi}, c e^{-i phi}]]`.
pub fn hermitian_eigensystem(h: &HermitianMatrix) -> Result<EigenSystem> {
    let n = h.dim();
    let mut a = h.matrix().clone();
    let mut v = identity(n);
    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    let mut converged = n <= 1 || scale == 0.0;
    let mut sweep = 0;
    while !converged {
        if sweep == MAX_SWEEPS {
            return Err(Error::NoConvergence(MAX_SWEEPS));
        }
        sweep += 1;
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let b = apq.norm();
                if b == 0.0 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                if sweep > 4 && b < 1e-18 * (app.abs() + aqq.abs()) {
                    a[(p, q)] = Complex64::new(0.0, 0.0);
                    a[(q, p)] = Complex64::new(0.0, 0.0);
                    continue;
                }
                let phase = apq / b;
                let theta = (aqq - app) / (2.0 * b);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                let g_pp = c(cs);
                let g_pq = c(sn);
                let g_qp = -phase.conj() * sn;
                let g_qq = phase.conj() * cs;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, p)] = c(app - t * b);
                a[(q, q)] = c(aqq + t * b);
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
            }
        }
        converged = false;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, col| v[(r, order[col])]);
    Ok(EigenSystem { values, vectors })
}

/// Spectral calculus `V f(diag lambda) V^dagger`.
pub fn matrix_function_hermitian(
    h: &HermitianMatrix,
    f: impl Fn(f64) -> f64,
) -> Result<HermitianMatrix> {
    let es = hermitian_eigensystem(h)?;
    Ok(HermitianMatrix::from_parts(apply_spectral(&es, f)?))
}

pub(crate) fn apply_spectral(es: &EigenSystem, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let n = es.values.len();
    let mut fv = Vec::with_capacity(n);
    for &l in &es.values {
        let y = f(l);
        if !y.is_finite() {
            return Err(Error::Domain(l));
        }
        fv.push(y);
    }
    let v = &es.vectors;
    let scaled = CMatrix::from_fn(n, n, |r, col| v[(r, col)] * fv[col]);
    Ok(scaled * v.adjoint())
}

/// `tr(X Y)` in O(N^2).
pub fn trace_of_product(x: &CMatrix, y: &CMatrix) -> Complex64 {
    let n = x.nrows();
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += x[(i, j)] * y[(j, i)];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal, RngStream};

    fn random_hermitian(n: usize, seed: u64) -> HermitianMatrix {
        let mut rng = RngStream::new(seed, 0).rng();
        let g = CMatrix::from_fn(n, n, |_, _| complex_normal(&mut rng));
        HermitianMatrix::from_parts(&g + g.adjoint())
    }

    fn diag(vals: &[f64]) -> HermitianMatrix {
        let n = vals.len();
        HermitianMatrix::new(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c(vals[i])
            } else {
                c(0.0)
            }
        }))
        .unwrap()
    }

    #[test]
    fn diagonal_input_sorts_and_permutes() {
        let es = hermitian_eigensystem(&diag(&[3.0, 1.0])).unwrap();
        assert_eq!(es.values, vec![1.0, 3.0]);
        assert!((es.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((es.vectors[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pauli_x_spectrum() {
        let h = HermitianMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0), c(1.0), c(1.0), c(0.0)],
        ))
        .unwrap();
        let es = hermitian_eigensystem(&h).unwrap();
        assert!((es.values[0] + 1.0).abs() < 1e-14);
        assert!((es.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction_residual() {
        for (n, seed) in [(8, 1), (3, 2), (16, 3), (64, 4)] {
            let h = random_hermitian(n, seed);
            let es = hermitian_eigensystem(&h).unwrap();
            let lam = CMatrix::from_fn(n, n, |i, j| if i == j { c(es.values[i]) } else { c(0.0) });
            let res = max_abs_diff(&(h.matrix() * &es.vectors), &(&es.vectors * lam));
            assert!(res < 1e-10 * max_abs(h.matrix()), "n={n} residual {res:e}");
            assert!(unitarity_residual(&es.vectors) < 1e-10);
            assert!(es.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn degenerate_spectrum_converges() {
        let h = HermitianMatrix::new(identity(5) * c(2.0)).unwrap();
        let es = hermitian_eigensystem(&h).unwrap();
        assert!(es.values.iter().all(|&l| (l - 2.0).abs() < 1e-15));
    }

    #[test]
    fn function_identity_and_sqrt() {
        let h = random_hermitian(4, 9);
        let f = matrix_function_hermitian(&h, |x| x).unwrap();
        assert!(max_abs_diff(f.matrix(), h.matrix()) < 1e-12 * max_abs(h.matrix()).max(1.0));
        let i = HermitianMatrix::new(identity(3)).unwrap();
        let s = matrix_function_hermitian(&i, f64::sqrt).unwrap();
        assert!(max_abs_diff(s.matrix(), &identity(3)) < 1e-15);
    }

    #[test]
    fn function_square_matches_product() {
        let h = random_hermitian(4, 10);
        let f = matrix_function_hermitian(&h, |x| x * x).unwrap();
        let hh = h.matrix() * h.matrix();
        assert!(max_abs_diff(f.matrix(), &hh) < 1e-10 * max_abs(&hh));
        let comm = f.matrix() * h.matrix() - h.matrix() * f.matrix();
        assert!(max_abs(&comm) < 1e-9);
    }

    #[test]
    fn function_domain_error() {
        let h = diag(&[-1.0, 2.0]);
        assert!(matches!(
            matrix_function_hermitian(&h, f64::ln),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert!(HermitianMatrix::new(m).is_err());
    }

    #[test]
    fn rejects_non_unitary() {
        assert!(UnitaryMatrix::new(identity(2) * c(1.1)).is_err());
        assert!(UnitaryMatrix::new(identity(2)).is_ok());
    }
}
