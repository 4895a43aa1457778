//! Central-cut ellipsoid method for maximizing a concave, possibly
//! non-smooth function over the nonnegative orthant.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Ellipsoid `{x : (x - c)^T S^{-1} (x - c) <= 1}`.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
}

impl Ellipsoid {
    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::domain(format!("ellipsoid radius must be positive, got {radius}")));
        }
        let n = center.len();
        Ok(Self {
            center,
            shape: DMatrix::identity(n, n) * (radius * radius),
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `sqrt(g^T S g)`: half-width of the ellipsoid along `g`.
    pub fn width_along(&self, g: &DVector<f64>) -> f64 {
        (g.dot(&(&self.shape * g))).max(0.0).sqrt()
    }

    pub fn log_volume_factor(&self) -> Option<f64> {
        // log det(S) / 2; the constant unit-ball volume is omitted.
        self.shape
            .clone()
            .cholesky()
            .map(|c| c.l().diagonal().iter().map(|d| d.ln()).sum())
    }

    /// Keep the half `{x : g^T (x - c) <= 0}` and replace the ellipsoid by the
    /// minimum-volume ellipsoid containing it.
    pub fn central_cut(&mut self, g: &DVector<f64>) -> Result<()> {
        let n = self.dim() as f64;
        let sg = &self.shape * g;
        let gsg = g.dot(&sg);
        if !(gsg > 0.0) {
            return Err(Error::Numerical("ellipsoid cut direction has zero width".into()));
        }
        let b = sg / gsg.sqrt();
        self.center -= &b * (1.0 / (n + 1.0));
        if self.dim() == 1 {
            // One-dimensional ellipsoid method is bisection.
            self.shape *= 0.25;
        } else {
            let factor = n * n / (n * n - 1.0);
            let update = &b * b.transpose() * (2.0 / (n + 1.0));
            self.shape = (&self.shape - update) * factor;
            // keep it exactly symmetric
            self.shape = (&self.shape + self.shape.transpose()) * 0.5;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EllipsoidSettings {
    pub init_radius: f64,
    /// Stop once `sqrt(g^T S g)` for an objective cut drops below this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for EllipsoidSettings {
    fn default() -> Self {
        Self {
            init_radius: 1e3,
            tol: 1e-6,
            max_iters: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EllipsoidOutcome {
    /// Best feasible point visited.
    pub best: DVector<f64>,
    pub best_value: f64,
    /// Subgradient of the negated objective at `best`.
    pub best_subgradient: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximize a concave function over `x >= 0`.
///
/// `oracle(x)` returns `(f(x), g)` where `g` is a subgradient of `-f` at `x`.
/// The oracle is only called at points with nonnegative coordinates;
/// negative centers are handled with feasibility cuts.
pub fn ellipsoid_maximize<F>(
    mut oracle: F,
    init_center: &[f64],
    settings: &EllipsoidSettings,
) -> Result<EllipsoidOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    ellipsoid_maximize_until(
        |x| oracle(x).map(|(v, g)| (v, g, false)),
        init_center,
        settings,
    )
}

/// Like [`ellipsoid_maximize`], but the oracle may also report that the
/// queried point is good enough (for example, because a primal-dual gap has
/// closed); the search then stops with `converged = true`.
pub fn ellipsoid_maximize_until<F>(
    mut oracle: F,
    init_center: &[f64],
    settings: &EllipsoidSettings,
) -> Result<EllipsoidOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>, bool)>,
{
    let dim = init_center.len();
    if dim == 0 {
        return Err(Error::contract("ellipsoid_maximize: dimension must be at least 1"));
    }
    if !(settings.tol > 0.0) {
        return Err(Error::domain("ellipsoid_maximize: tol must be positive"));
    }
    let mut ell = Ellipsoid::ball(DVector::from_column_slice(init_center), settings.init_radius)?;
    let mut best: Option<(DVector<f64>, f64, DVector<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iters {
        iterations += 1;
        let infeasible = (0..dim).find(|&i| ell.center[i] < 0.0);
        let cut = match infeasible {
            Some(i) => {
                let mut g = DVector::zeros(dim);
                g[i] = -1.0;
                g
            }
            None => {
                let (value, grad, done) = oracle(ell.center.as_slice())?;
                if !value.is_finite() || grad.len() != dim || grad.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Numerical(format!(
                        "ellipsoid oracle returned a non-finite value or bad subgradient at {:?}",
                        ell.center.as_slice()
                    )));
                }
                let g = DVector::from_vec(grad);
                if best.as_ref().is_none_or(|(_, v, _)| value > *v) {
                    best = Some((ell.center.clone(), value, g.clone()));
                }
                let width = ell.width_along(&g);
                if done || width <= settings.tol {
                    converged = true;
                    break;
                }
                g
            }
        };
        if ell.central_cut(&cut).is_err() {
            converged = best.is_some();
            break;
        }
    }

    let (best, best_value, best_subgradient) = match best {
        Some(b) => b,
        None => {
            // Never visited a feasible center: evaluate at the projection.
            let x: Vec<f64> = ell.center.iter().map(|v| v.max(0.0)).collect();
            let (value, grad, _) = oracle(&x)?;
            (DVector::from_vec(x), value, DVector::from_vec(grad))
        }
    };
    Ok(EllipsoidOutcome {
        best,
        best_value,
        best_subgradient,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(tol: f64) -> EllipsoidSettings {
        EllipsoidSettings {
            init_radius: 1e3,
            tol,
            max_iters: 50_000,
        }
    }

    #[test]
    fn smooth_concave_quadratic() {
        let c = [0.7, 2.0, 3.5];
        let out = ellipsoid_maximize(
            |x| {
                let v = -x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                let g = x.iter().zip(&c).map(|(a, b)| 2.0 * (a - b)).collect();
                Ok((v, g))
            },
            &[1.0, 1.0, 1.0],
            &settings(1e-9),
        )
        .unwrap();
        assert!(out.converged);
        for (x, t) in out.best.iter().zip(&c) {
            assert!((x - t).abs() < 1e-4, "{x} vs {t}");
        }
    }

    #[test]
    fn nonsmooth_absolute_value() {
        // maximize -sum |x_i - 1|
        let out = ellipsoid_maximize(
            |x| {
                let v = -x.iter().map(|a| (a - 1.0).abs()).sum::<f64>();
                let g = x.iter().map(|a| if *a >= 1.0 { 1.0 } else { -1.0 }).collect();
                Ok((v, g))
            },
            &[1.0, 1.0],
            &settings(1e-8),
        )
        .unwrap();
        // oracle by direct minimization: the unique optimum is the ones vector
        for x in out.best.iter() {
            assert!((x - 1.0).abs() < 1e-6);
        }
        assert!(out.best_value > -1e-6);
    }

    #[test]
    fn nonsmooth_from_offset_center() {
        let out = ellipsoid_maximize(
            |x| {
                let v = -x.iter().map(|a| (a - 1.0).abs()).sum::<f64>();
                let g = x.iter().map(|a| if *a >= 1.0 { 1.0 } else { -1.0 }).collect();
                Ok((v, g))
            },
            &[40.0, 3.0, 0.0],
            &settings(1e-8),
        )
        .unwrap();
        for x in out.best.iter() {
            assert!((x - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn one_dimensional_boundary_optimum() {
        // maximize -x over x >= 0: optimum at the boundary
        let out = ellipsoid_maximize(|x| Ok((-x[0], vec![1.0])), &[1.0], &settings(1e-9)).unwrap();
        assert!(out.best[0] >= 0.0 && out.best[0] < 1e-8);
    }

    #[test]
    fn volume_strictly_decreases() {
        let n = 4usize;
        let mut ell = Ellipsoid::ball(DVector::from_element(n, 1.0), 10.0).unwrap();
        let nf = n as f64;
        let bound = -1.0 / (2.0 * (nf + 1.0));
        let dirs = [
            DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.3, -2.0, 0.1, 0.5]),
            DVector::from_vec(vec![-1.0, 1.0, 1.0, -1.0]),
        ];
        for k in 0..30 {
            let before = ell.log_volume_factor().unwrap();
            ell.central_cut(&dirs[k % dirs.len()]).unwrap();
            let after = ell.log_volume_factor().unwrap();
            // classical central-cut bound: vol ratio < exp(-1/(2(n+1)))
            assert!(after - before < bound, "k={k}: {}", after - before);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ellipsoid_maximize(|_| Ok((0.0, vec![])), &[], &settings(1e-6)).is_err());
        let bad = EllipsoidSettings {
            init_radius: -1.0,
            ..settings(1e-6)
        };
        assert!(ellipsoid_maximize(|_| Ok((0.0, vec![0.0])), &[1.0], &bad).is_err());
    }
}
