use num_complex::Complex64;

use crate::{CVec, Error, Result};

const UNIT_TOL: f64 = 1e-12;

/// Unit-modulus vector `exp(j theta)`.
pub fn unit_phases(theta: &[f64]) -> CVec {
    CVec::from_iterator(theta.len(), theta.iter().map(|&t| Complex64::from_polar(1.0, t)))
}

/// Reflection vectors of the IRS in the energy-transfer (WET) and
/// information-transfer (WIT) phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePlan {
    pub wet: CVec,
    pub wit: CVec,
}

impl PhasePlan {
    pub fn new(wet: CVec, wit: CVec) -> Result<Self> {
        let plan = Self { wet, wit };
        plan.validate()?;
        Ok(plan)
    }

    /// All-zero phases.
    pub fn ones(n: usize) -> Self {
        let v = CVec::from_element(n, Complex64::new(1.0, 0.0));
        Self { wet: v.clone(), wit: v }
    }

    pub fn num_elements(&self) -> usize {
        self.wet.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.wet.len() != self.wit.len() {
            return Err(Error::contract("WET and WIT reflection vectors differ in length"));
        }
        let bad = self
            .wet
            .iter()
            .chain(self.wit.iter())
            .find(|z| (z.norm() - 1.0).abs() > UNIT_TOL);
        match bad {
            Some(z) => Err(Error::contract(format!("reflection coefficient {z} is not unit-modulus"))),
            None => Ok(()),
        }
    }
}

/// Projects every entry onto the unit circle; zero entries map to 1.
pub fn project_unit(v: &CVec) -> CVec {
    v.map(|z| {
        let r = z.norm();
        if r > 0.0 {
            z / r
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}
