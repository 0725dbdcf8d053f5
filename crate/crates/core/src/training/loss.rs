use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which pairwise rank loss to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankLossVariant {
    /// `max(0, |p_m - p_n| - e_mn)` with `e_mn = g_m - g_n` when `p_m >= p_n`,
    /// else `g_n - g_m`.
    #[default]
    Verbatim,
    /// `max(0, |p_m - p_n| - sgn(g_m - g_n) (p_m - p_n))`: nonzero only for
    /// pairs whose predicted order disagrees with the targets.
    Conventional,
}

fn check(pred: &[f64], gt: &[f64], min: usize) -> Result<usize> {
    if pred.len() != gt.len() {
        return Err(Error::Loss(format!("{} predictions vs {} targets", pred.len(), gt.len())));
    }
    if pred.len() < min {
        return Err(Error::Loss(format!("need at least {min} samples, got {}", pred.len())));
    }
    Ok(pred.len())
}

pub fn mae_loss(pred: &[f64], gt: &[f64]) -> Result<f64> {
    let n = check(pred, gt, 1)?;
    Ok(pred.iter().zip(gt).map(|(p, g)| (p - g).abs()).sum::<f64>() / n as f64)
}

/// `dL/dpred` of [`mae_loss`]; zero where the residual is exactly zero.
pub fn mae_grad(pred: &[f64], gt: &[f64]) -> Result<Vec<f64>> {
    let n = check(pred, gt, 1)? as f64;
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            let r = p - g;
            if r > 0.0 {
                1.0 / n
            } else if r < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect())
}

fn pair_term(variant: RankLossVariant, dp: f64, dg: f64) -> (f64, f64) {
    // (value, d value / d dp)
    let s = if dp >= 0.0 { 1.0 } else { -1.0 };
    let (v, slope) = match variant {
        RankLossVariant::Verbatim => (s * dp - s * dg, s),
        RankLossVariant::Conventional => {
            let t = if dg >= 0.0 { 1.0 } else { -1.0 };
            (s * dp - t * dp, s - t)
        }
    };
    if v > 0.0 {
        (v, slope)
    } else {
        (0.0, 0.0)
    }
}

/// Mean over all `N^2` ordered pairs (diagonal included) of the pairwise
/// hinge, using the printed case split.
pub fn rank_loss(pred: &[f64], gt: &[f64]) -> Result<f64> {
    rank_loss_with(pred, gt, RankLossVariant::Verbatim)
}

pub fn rank_loss_with(pred: &[f64], gt: &[f64], variant: RankLossVariant) -> Result<f64> {
    Ok(rank_value_grad(pred, gt, variant)?.0)
}

pub fn rank_grad(pred: &[f64], gt: &[f64], variant: RankLossVariant) -> Result<Vec<f64>> {
    Ok(rank_value_grad(pred, gt, variant)?.1)
}

fn rank_value_grad(pred: &[f64], gt: &[f64], variant: RankLossVariant) -> Result<(f64, Vec<f64>)> {
    let n = check(pred, gt, 2)?;
    let norm = (n * n) as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; n];
    for m in 0..n {
        for k in 0..n {
            let (v, slope) = pair_term(variant, pred[m] - pred[k], gt[m] - gt[k]);
            total += v;
            grad[m] += slope / norm;
            grad[k] -= slope / norm;
        }
    }
    Ok((total / norm, grad))
}

/// `mae + beta * rank` with the verbatim rank loss.
pub fn total_loss(pred: &[f64], gt: &[f64], beta: f64) -> Result<f64> {
    Ok(total_loss_grad(pred, gt, beta, RankLossVariant::Verbatim)?.value)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub mae: f64,
    pub rank: f64,
    /// `dL/dpred`
    pub grad: Vec<f64>,
}

pub fn total_loss_grad(pred: &[f64], gt: &[f64], beta: f64, variant: RankLossVariant) -> Result<LossValue> {
    if !(beta >= 0.0) {
        return Err(Error::Loss(format!("beta must be >= 0, got {beta}")));
    }
    let mae = mae_loss(pred, gt)?;
    let mut grad = mae_grad(pred, gt)?;
    let rank = if beta > 0.0 {
        let (r, g) = rank_value_grad(pred, gt, variant)?;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += beta * b);
        r
    } else {
        0.0
    };
    Ok(LossValue {
        value: mae + beta * rank,
        mae,
        rank,
        grad,
    })
}
