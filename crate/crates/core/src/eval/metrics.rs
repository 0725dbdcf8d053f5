use crate::error::{Error, Result};

fn check_pair(pred: &[f64], gt: &[f64], min: usize) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!("{} predictions vs {} targets", pred.len(), gt.len())));
    }
    if pred.len() < min {
        return Err(Error::Shape(format!("need at least {min} samples, got {}", pred.len())));
    }
    Ok(())
}

/// 1-based ranks, ties share the mean of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("an input vector is constant".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation.
pub fn srcc(pred: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(pred, gt, 2)?;
    pearson(&average_ranks(pred), &average_ranks(gt))
}

/// Pearson correlation, optionally after mapping `pred` through the
/// least-squares quartic fit onto `gt`.
pub fn plcc(pred: &[f64], gt: &[f64], fitted: bool) -> Result<f64> {
    check_pair(pred, gt, 2)?;
    if !fitted {
        return pearson(pred, gt);
    }
    let coeffs = super::poly_fit4(pred, gt)?;
    let mapped: Vec<f64> = pred.iter().map(|&x| super::poly_eval(&coeffs, x)).collect();
    pearson(&mapped, gt)
}

pub fn rmse(pred: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(pred, gt, 1)?;
    let mse = pred.iter().zip(gt).map(|(p, g)| (p - g).powi(2)).sum::<f64>() / pred.len() as f64;
    Ok(mse.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn srcc_examples() {
        let gt = [1.0, 2.0, 3.0, 4.0];
        assert!((srcc(&gt, &gt).unwrap() - 1.0).abs() < 1e-12);
        assert!((srcc(&[4.0, 3.0, 2.0, 1.0], &gt).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(srcc(&gt, &[1.0, 3.0, 2.0, 4.0]).unwrap(), 0.8);
        assert!(matches!(srcc(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::UndefinedCorrelation(_))));
    }

    #[test]
    fn tied_ranks_are_averaged() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn plcc_examples() {
        let gt: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        let lin: Vec<f64> = gt.iter().map(|g| 2.0 * g + 1.0).collect();
        assert!((plcc(&lin, &gt, false).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = gt.iter().map(|g| -g).collect();
        assert!((plcc(&neg, &gt, false).unwrap() + 1.0).abs() < 1e-12);
        let cube: Vec<f64> = gt.iter().map(|g| g.powi(3)).collect();
        assert!(plcc(&cube, &gt, true).unwrap() >= plcc(&cube, &gt, false).unwrap());
        assert!(plcc(&cube[..4], &gt[..4], true).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[4.0, 5.0], &[1.0, 2.0]).unwrap() - 3.0).abs() < 1e-12);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - (12.5f64).sqrt()).abs() < 1e-12);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn vectors() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..30).prop_flat_map(|n| {
            (
                prop::collection::vec(-100.0f64..100.0, n),
                prop::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn srcc_invariant_under_increasing_maps((a, b) in vectors()) {
            let s = srcc(&a, &b).unwrap();
            let ta: Vec<f64> = a.iter().map(|x| (x / 50.0).exp() + x * 2.0).collect();
            let tb: Vec<f64> = b.iter().map(|x| x.powi(3)).collect();
            prop_assert!((srcc(&ta, &tb).unwrap() - s).abs() < 1e-9);
        }

        #[test]
        fn plcc_invariant_under_positive_affine((a, b) in vectors(), k in 0.1f64..10.0, c in -50.0f64..50.0) {
            let r = plcc(&a, &b, false).unwrap();
            let ta: Vec<f64> = a.iter().map(|x| k * x + c).collect();
            prop_assert!((plcc(&ta, &b, false).unwrap() - r).abs() < 1e-9);
        }

        #[test]
        fn rmse_symmetric_and_triangle((a, b) in vectors(), shift in -10.0f64..10.0) {
            prop_assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
            let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x + y) / 2.0 + shift).collect();
            prop_assert!(rmse(&a, &b).unwrap() <= rmse(&a, &c).unwrap() + rmse(&c, &b).unwrap() + 1e-9);
        }
    }
}
