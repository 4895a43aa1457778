use crate::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximizer of `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol` and returns the best point
/// evaluated, never evaluating outside `[lo, hi]`.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain(format!("golden_section: need lo < hi, got [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("golden_section: tol must be positive"));
    }
    let mut eval = |t: f64| -> Result<f64> {
        let v = f(t)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::domain(format!("golden_section: f({t}) is not finite")))
        }
    };

    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    let mut best = if f2 > f1 { (x2, f2) } else { (x1, f1) };

    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(x1)?;
            if f1 > best.1 {
                best = (x1, f1);
            }
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(x2)?;
            if f2 > best.1 {
                best = (x2, f2);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_parabola() {
        let (t, v) = golden_section(|t| Ok(-(t - 0.3) * (t - 0.3)), 0.0, 1.0, 1e-6).unwrap();
        assert!((t - 0.3).abs() <= 1e-6);
        assert!(v <= 0.0 && v > -1e-12);
    }

    #[test]
    fn constant_function() {
        let (t, v) = golden_section(|_| Ok(2.5), 0.0, 1.0, 1e-4).unwrap();
        assert!((0.0..=1.0).contains(&t));
        assert_eq!(v, 2.5);
    }

    #[test]
    fn logistic_product() {
        let (t, _) = golden_section(|t| Ok(t * (1.0 - t)), 0.0, 1.0, 1e-5).unwrap();
        assert!((t - 0.5).abs() <= 1e-5);
    }

    #[test]
    fn stays_inside_bracket() {
        let mut seen = Vec::new();
        golden_section(
            |t| {
                seen.push(t);
                Ok((5.0 * t).sin())
            },
            0.2,
            0.9,
            1e-7,
        )
        .unwrap();
        assert!(seen.iter().all(|t| (0.2..=0.9).contains(t)));
    }

    #[test]
    fn errors() {
        assert!(golden_section(|_| Ok(0.0), 1.0, 0.0, 1e-3).is_err());
        assert!(golden_section(|_| Ok(f64::NAN), 0.0, 1.0, 1e-3).is_err());
    }
}
