//! Dense primal-dual interior-point solver for complex Hermitian SDPs of the
//! form
//!
//! ```text
//! minimize   tr(C X)
//! subject to tr(A_k X) =  b_k
//!            tr(G_m X) >= h_m
//!            X Hermitian PSD
//! ```
//!
//! The complex problem is mapped to a real symmetric one of twice the size
//! (see [`embed_complex`]) and solved with an infeasible-start HKM
//! path-following method with Mehrotra predictor-corrector steps.

mod dump;
mod ipm;

use nalgebra::DMatrix;

use crate::{CMat, Error, Result};

pub use dump::{parse_dump, write_dump};
pub use ipm::{solve, solve_with, SdpSettings};

const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub dim: usize,
    pub objective: CMat,
    /// `(A_k, b_k)` meaning `tr(A_k X) = b_k`.
    pub equalities: Vec<(CMat, f64)>,
    /// `(G_m, h_m)` meaning `tr(G_m X) >= h_m`.
    pub inequalities: Vec<(CMat, f64)>,
}

impl SdpProblem {
    /// Problem with zero objective and no constraints.
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            objective: CMat::zeros(dim, dim),
            equalities: Vec::new(),
            inequalities: Vec::new(),
        }
    }

    pub fn with_objective(mut self, c: CMat) -> Self {
        self.objective = c;
        self
    }

    pub fn add_equality(&mut self, a: CMat, b: f64) {
        self.equalities.push((a, b));
    }

    pub fn add_inequality(&mut self, g: CMat, h: f64) {
        self.inequalities.push((g, h));
    }

    /// Adds `X[i][i] = 1` for every diagonal entry in `range`.
    pub fn add_unit_diagonal(&mut self, range: std::ops::Range<usize>) {
        for i in range {
            let mut a = CMat::zeros(self.dim, self.dim);
            a[(i, i)] = 1.0.into();
            self.add_equality(a, 1.0);
        }
    }

    pub fn num_constraints(&self) -> usize {
        self.equalities.len() + self.inequalities.len()
    }

    /// Objective value `tr(C X)` of a Hermitian candidate.
    pub fn objective_value(&self, x: &CMat) -> f64 {
        trace_product(&self.objective, x)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim;
        let check = |name: &str, m: &CMat| -> Result<()> {
            if m.shape() != (n, n) {
                return Err(Error::contract(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::domain(format!("{name} has non-finite entries")));
            }
            let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
            let mut asym = 0.0f64;
            for j in 0..n {
                for i in 0..=j {
                    asym = asym.max((m[(i, j)] - m[(j, i)].conj()).norm());
                }
            }
            if asym > HERMITIAN_TOL * scale {
                return Err(Error::contract(format!("{name} is not Hermitian (asymmetry {asym:.3e})")));
            }
            Ok(())
        };
        check("objective", &self.objective)?;
        for (k, (a, b)) in self.equalities.iter().enumerate() {
            check(&format!("equality {k}"), a)?;
            if !b.is_finite() {
                return Err(Error::domain(format!("equality {k} has non-finite right-hand side")));
            }
        }
        for (k, (g, h)) in self.inequalities.iter().enumerate() {
            check(&format!("inequality {k}"), g)?;
            if !h.is_finite() {
                return Err(Error::domain(format!("inequality {k} has non-finite right-hand side")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIters,
}

/// Progress of one interior-point iteration (unscaled quantities).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpIterate {
    pub primal_value: f64,
    pub dual_value: f64,
    /// `||b - A(X)|| / (1 + ||b||)`.
    pub primal_residual: f64,
    /// `||C - A*(y) - Z|| / (1 + ||C||)`.
    pub dual_residual: f64,
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: CMat,
    pub primal_value: f64,
    pub dual_value: f64,
    /// Upper bound on `|primal_value - dual_value|`.
    pub gap: f64,
    /// `|primal - dual| / (1 + |primal| + |dual|)`.
    pub rel_gap: f64,
    pub status: SdpStatus,
    pub iterations: usize,
    pub equality_duals: Vec<f64>,
    pub inequality_duals: Vec<f64>,
    pub history: Vec<SdpIterate>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

/// `tr(A X)` for Hermitian `A`, `X`; the imaginary part vanishes.
pub fn trace_product(a: &CMat, x: &CMat) -> f64 {
    // sum_{ij} A_ij X_ji = sum_ij A_ij conj(X_ij) for Hermitian X
    a.iter().zip(x.iter()).map(|(a, x)| (a * x.conj()).re).sum()
}

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`.
///
/// For Hermitian `H` and `X`, `tr(H X) = tr(T(H) T(X)) / 2`.
pub fn embed_complex(h: &CMat) -> DMatrix<f64> {
    let n = h.nrows();
    let mut t = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let z = h[(i, j)];
            t[(i, j)] = z.re;
            t[(i + n, j + n)] = z.re;
            t[(i, j + n)] = -z.im;
            t[(i + n, j)] = z.im;
        }
    }
    t
}

/// Inverse of [`embed_complex`] that averages the two conjugate blocks and
/// re-Hermitizes.
pub fn recover_complex(y: &DMatrix<f64>) -> CMat {
    let n = y.nrows() / 2;
    let x = CMat::from_fn(n, n, |i, j| {
        let re = 0.5 * (y[(i, j)] + y[(i + n, j + n)]);
        let im = 0.5 * (y[(i + n, j)] - y[(i, j + n)]);
        num_complex::Complex64::new(re, im)
    });
    (&x + x.adjoint()) * num_complex::Complex64::new(0.5, 0.0)
}
