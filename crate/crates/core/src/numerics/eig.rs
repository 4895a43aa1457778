//! Cyclic Jacobi eigensolver for complex Hermitian matrices.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::{CMat, CVec, Error, Result};

const MAX_SWEEPS: usize = 64;

/// Full eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Eigenvalues, sorted descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: CMat,
}

impl EigenResult {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> CVec {
        self.vectors.column(k).into_owned()
    }

    /// `U diag(values) U^H`.
    pub fn reconstruct(&self) -> CMat {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for (k, &lambda) in self.values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(lambda);
        }
        let mut out = CMat::zeros(n, n);
        out.gemm(
            Complex64::new(1.0, 0.0),
            &scaled,
            &self.vectors.adjoint(),
            Complex64::new(0.0, 0.0),
        );
        out
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// The input is symmetrized as `(A + A^H) / 2` before rotating, so matrices
/// that are Hermitian up to rounding are accepted. Each eigenvector is
/// normalized so that its first non-negligible component is real and positive.
pub fn hermitian_eig(a: &CMat) -> Result<EigenResult> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::contract(format!(
            "hermitian_eig expects a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::domain("hermitian_eig: non-finite entry"));
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let asym = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (a[(i, j)] - a[(j, i)].conj()).norm())
        .fold(0.0, f64::max);
    if asym > 1e-10 * scale.max(1.0) {
        return Err(Error::contract(format!(
            "hermitian_eig: matrix is not Hermitian (asymmetry {asym:.3e})"
        )));
    }

    // Row-major working copy of the symmetrized matrix.
    let mut m: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
        }
        m[i * n + i].im = 0.0;
    }
    let mut v: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        v[i * n + i] = Complex64::new(1.0, 0.0);
    }

    let frob: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let threshold = f64::EPSILON * frob;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= threshold || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, n, p, q, threshold / (n as f64));
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[i * n + i].re).collect();
    order.sort_by(|&x, &y| diag[y].total_cmp(&diag[x]));

    let values: Vec<f64> = order.iter().map(|&k| diag[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut u: CVec = DVector::from_fn(n, |r, _| v[r * n + k]);
        fix_phase(&mut u);
        vectors.set_column(col, &u);
    }
    Ok(EigenResult { values, vectors })
}

/// Largest eigenvalue and its eigenvector.
pub fn top_eigenpair(a: &CMat) -> Result<(f64, CVec)> {
    let eig = hermitian_eig(a)?;
    if eig.dim() == 0 {
        return Err(Error::contract("top_eigenpair of an empty matrix"));
    }
    Ok((eig.values[0], eig.vector(0)))
}

/// One two-sided Jacobi rotation annihilating `m[p][q]`.
fn rotate(m: &mut [Complex64], v: &mut [Complex64], n: usize, p: usize, q: usize, skip: f64) {
    let apq = m[p * n + q];
    let mag = apq.norm();
    if mag <= skip {
        return;
    }
    let app = m[p * n + p].re;
    let aqq = m[q * n + q].re;
    // Phase that makes the (p, q) entry real and positive.
    let e = apq / mag;
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // U restricted to (p, q): [[c, s], [-s e*, c e*]].
    let u_pp = Complex64::new(c, 0.0);
    let u_pq = Complex64::new(s, 0.0);
    let u_qp = -e.conj() * s;
    let u_qq = e.conj() * c;

    // m <- m U (columns p, q)
    for r in 0..n {
        let x = m[r * n + p];
        let y = m[r * n + q];
        m[r * n + p] = x * u_pp + y * u_qp;
        m[r * n + q] = x * u_pq + y * u_qq;
    }
    // m <- U^H m (rows p, q)
    for col in 0..n {
        let x = m[p * n + col];
        let y = m[q * n + col];
        m[p * n + col] = u_pp.conj() * x + u_qp.conj() * y;
        m[q * n + col] = u_pq.conj() * x + u_qq.conj() * y;
    }
    m[p * n + q] = Complex64::new(0.0, 0.0);
    m[q * n + p] = Complex64::new(0.0, 0.0);
    m[p * n + p].im = 0.0;
    m[q * n + q].im = 0.0;
    // v <- v U
    for r in 0..n {
        let x = v[r * n + p];
        let y = v[r * n + q];
        v[r * n + p] = x * u_pp + y * u_qp;
        v[r * n + q] = x * u_pq + y * u_qq;
    }
}

/// Normalizes `u` and rotates it so its first non-negligible entry is real
/// and positive.
pub(crate) fn fix_phase(u: &mut CVec) {
    let norm = u.norm();
    if norm == 0.0 {
        return;
    }
    let tiny = 1e-12 * norm;
    if let Some(z) = u.iter().copied().find(|z| z.norm() > tiny) {
        let phase = z.conj() / z.norm();
        u.scale_mut(1.0 / norm);
        for x in u.iter_mut() {
            *x *= phase;
        }
    }
}

#[cfg(test)]
fn real_symmetric_eigenvalues(a: &nalgebra::DMatrix<f64>) -> Result<Vec<f64>> {
    let c = a.map(|x| Complex64::new(x, 0.0));
    Ok(hermitian_eig(&c)?.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = CMat::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = c(rng.random_range(-1.0..1.0), 0.0);
            for j in (i + 1)..n {
                let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                a[(i, j)] = z;
                a[(j, i)] = z.conj();
            }
        }
        a
    }

    fn check_decomposition(a: &CMat, eig: &EigenResult) {
        let n = a.nrows();
        let anorm = a.norm().max(1e-300);
        for k in 0..n {
            let u = eig.vector(k);
            let r = a * &u - &u * c(eig.values[k], 0.0);
            assert!(r.norm() <= 1e-9 * anorm, "residual {} for k={k}", r.norm());
        }
        let gram = eig.vectors.adjoint() * &eig.vectors;
        let ident = CMat::identity(n, n);
        assert!((gram - ident).norm() <= 1e-10 * (n as f64).max(1.0));
        for w in eig.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let eig = hermitian_eig(&CMat::identity(3, 3)).unwrap();
        for v in &eig.values {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rank_one_outer_product() {
        let b = CVec::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.3), c(0.0, -1.0)]);
        let a = &b * b.adjoint();
        let eig = hermitian_eig(&a).unwrap();
        let nb2 = b.norm_squared();
        assert!((eig.values[0] - nb2).abs() < 1e-12 * nb2);
        assert!(eig.values[1].abs() < 1e-12 && eig.values[2].abs() < 1e-12);
        // u1 is parallel to b
        let u = eig.vector(0);
        let overlap = (u.adjoint() * &b)[(0, 0)].norm();
        assert!((overlap - nb2.sqrt()).abs() < 1e-12);
        // sign convention: first component real positive
        assert!(u[0].re > 0.0 && u[0].im.abs() < 1e-15);
    }

    #[test]
    fn random_hermitian_reconstructs() {
        let a = random_hermitian(6, 7);
        let eig = hermitian_eig(&a).unwrap();
        assert!((eig.reconstruct() - &a).norm() <= 1e-9 * a.norm());
        check_decomposition(&a, &eig);
    }

    #[test]
    fn matches_nalgebra_on_real_symmetric() {
        let a = random_hermitian(8, 11).map(|z| z.re);
        let a = (&a + a.transpose()) * 0.5;
        let mut reference: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
        reference.sort_by(|x, y| y.total_cmp(x));
        let ours = real_symmetric_eigenvalues(&a).unwrap();
        for (x, y) in ours.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite_and_non_hermitian() {
        let mut a = CMat::identity(2, 2);
        a[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(hermitian_eig(&a), Err(Error::Domain(_))));
        let mut b = CMat::identity(2, 2);
        b[(0, 1)] = c(1.0, 0.0);
        assert!(hermitian_eig(&b).is_err());
    }

    #[test]
    fn empty_and_scalar() {
        let eig = hermitian_eig(&CMat::zeros(0, 0)).unwrap();
        assert_eq!(eig.dim(), 0);
        let eig = hermitian_eig(&CMat::from_element(1, 1, c(-2.5, 0.0))).unwrap();
        assert_eq!(eig.values, vec![-2.5]);
        assert_eq!(eig.vectors[(0, 0)], c(1.0, 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn residuals_and_orthonormality(n in 1usize..=64, seed in any::<u64>()) {
            let a = random_hermitian(n, seed);
            let eig = hermitian_eig(&a).unwrap();
            check_decomposition(&a, &eig);
        }
    }
}
