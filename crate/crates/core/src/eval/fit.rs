use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const FIT_DEGREE: usize = 4;

/// Least-squares quartic through `(x, y)`. Coefficients are constant term
/// first, in the original `x` units.
///
/// The system is solved by SVD on `x` centred and scaled to `[-1, 1]`,
/// then expanded back.
pub fn poly_fit4(x: &[f64], y: &[f64]) -> Result<[f64; FIT_DEGREE + 1]> {
    let terms = FIT_DEGREE + 1;
    if x.len() != y.len() {
        return Err(Error::Fit(format!("{} x values vs {} y values", x.len(), y.len())));
    }
    if x.len() < terms {
        return Err(Error::Fit(format!("a quartic fit needs at least {terms} points, got {}", x.len())));
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Fit("non-finite x".into()));
    }
    let center = (lo + hi) / 2.0;
    let scale = (hi - lo) / 2.0;
    if scale <= 0.0 {
        return Err(Error::Fit("all x values are equal".into()));
    }
    let a = DMatrix::from_fn(x.len(), terms, |r, c| ((x[r] - center) / scale).powi(c as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= smax * 1e-10 {
        return Err(Error::Fit("rank-deficient system (fewer than five distinct x values)".into()));
    }
    let t = svd.solve(&b, 0.0).map_err(|e| Error::Fit(e.to_string()))?;

    // p(x) = sum_k t_k ((x - c) / s)^k, expanded into powers of x.
    let mut coeffs = [0.0; FIT_DEGREE + 1];
    for k in 0..terms {
        let tk = t[k] / scale.powi(k as i32);
        for (j, c) in coeffs.iter_mut().enumerate().take(k + 1) {
            *c += tk * binomial(k, j) * (-center).powi((k - j) as i32);
        }
    }
    Ok(coeffs)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Horner evaluation, constant term first.
pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_recovered() {
        let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let c = poly_fit4(&x, &x).unwrap();
        for (got, want) in c.iter().zip([0.0, 1.0, 0.0, 0.0, 0.0]) {
            assert!((got - want).abs() < 1e-9, "{c:?}");
        }
    }

    #[test]
    fn quartic_recovered() {
        let x: Vec<f64> = (0..8).map(|i| i as f64 * 0.5 - 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powi(4)).collect();
        let c = poly_fit4(&x, &y).unwrap();
        assert!((c[4] - 1.0).abs() < 1e-6, "{c:?}");
    }

    #[test]
    fn preconditions() {
        assert!(matches!(poly_fit4(&[1.0, 2.0, 3.0, 4.0], &[1.0; 4]), Err(Error::Fit(_))));
        assert!(poly_fit4(&[2.0; 6], &[1.0; 6]).is_err());
        // Six points but only three distinct abscissae.
        assert!(poly_fit4(&[1.0, 1.0, 2.0, 2.0, 3.0, 3.0], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).is_err());
    }

    #[test]
    fn horner() {
        assert_eq!(poly_eval(&[1.0, 2.0, 3.0], 2.0), 17.0);
    }

    proptest! {
        #[test]
        fn quartic_data_fits_exactly(c in prop::array::uniform5(-3.0f64..3.0), n in 6usize..20) {
            // x spread over more than a decade
            let x: Vec<f64> = (0..n).map(|i| 0.5 + 9.5 * i as f64 / (n - 1) as f64).collect();
            let y: Vec<f64> = x.iter().map(|&v| poly_eval(&c, v)).collect();
            let fit = poly_fit4(&x, &y).unwrap();
            let resid: f64 = x.iter().zip(&y).map(|(&v, w)| (poly_eval(&fit, v) - w).powi(2)).sum::<f64>().sqrt();
            prop_assert!(resid < 1e-8, "residual {resid}");
        }
    }
}
