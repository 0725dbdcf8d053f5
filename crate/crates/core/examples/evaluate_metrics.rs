//! SRCC, PLCC (raw and after the quartic fit) and RMSE for a set of
//! predictions.
//!
//! `cargo run --example evaluate_metrics`

use ecvqa::eval::{compute_metrics, poly_eval, srcc};

fn main() -> ecvqa::Result<()> {
    println!("srcc((1,2,3,4), (1,3,2,4)) = {}", srcc(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0])?);
    let gt: Vec<f64> = (0..20).map(|i| 5.0 * i as f64).collect();
    // A monotone but curved predictor: rank-perfect, linearly imperfect.
    let pred: Vec<f64> = gt.iter().map(|g| 40.0 * (g / 100.0).powi(3) + 0.3 * (g * 0.7).sin()).collect();
    let r = compute_metrics(&pred, &gt)?;
    println!("n = {}", r.n);
    println!("srcc        {:?}", r.srcc);
    println!("plcc raw    {:?}", r.plcc_raw);
    println!("plcc fitted {:?}", r.plcc_fitted);
    println!("rmse        {:.4}", r.rmse);
    if let Some(c) = r.fit_coeffs {
        println!("fit(pred[10] = {:.3}) = {:.3} (gt {})", pred[10], poly_eval(&c, pred[10]), gt[10]);
    }
    let flat = compute_metrics(&[50.0; 5], &[10.0, 20.0, 30.0, 40.0, 50.0])?;
    println!("constant predictor: rmse {:.3}, errors {:?}", flat.rmse, flat.errors);
    Ok(())
}
