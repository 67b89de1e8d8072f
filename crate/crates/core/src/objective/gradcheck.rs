use super::features::cosine_similarity_grad;
use super::loss::{rain_robust_batch_loss_grad, rain_robust_pair_loss_grad, RobustLossParams};
use crate::error::{Error, Result};

/// A scalar function of several vectors with an analytic gradient.
pub trait DifferentiableLoss {
    fn value(&self, point: &[Vec<f64>]) -> Result<f64>;
    fn gradient(&self, point: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;
}

/// `sim(u, v)` at `[u, v]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CosineLoss;

/// Pair loss at `[anchor, positive, negatives...]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairLoss(pub RobustLossParams);

/// Batch loss at `[z_I0, z_J0, z_I1, z_J1, ...]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BatchLoss(pub RobustLossParams);

fn arity(point: &[Vec<f64>], min: usize) -> Result<()> {
    if point.len() < min {
        return Err(Error::InvalidParameter(format!(
            "need at least {min} vectors, got {}",
            point.len()
        )));
    }
    Ok(())
}

impl DifferentiableLoss for CosineLoss {
    fn value(&self, point: &[Vec<f64>]) -> Result<f64> {
        Ok(self.gradient_with_value(point)?.0)
    }

    fn gradient(&self, point: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(self.gradient_with_value(point)?.1)
    }
}

impl CosineLoss {
    fn gradient_with_value(&self, point: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
        arity(point, 2)?;
        let (s, gu, gv) = cosine_similarity_grad(&point[0], &point[1])?;
        Ok((s, vec![gu, gv]))
    }
}

impl DifferentiableLoss for PairLoss {
    fn value(&self, point: &[Vec<f64>]) -> Result<f64> {
        arity(point, 2)?;
        let negs: Vec<&[f64]> = point[2..].iter().map(|v| v.as_slice()).collect();
        Ok(rain_robust_pair_loss_grad(&point[0], &point[1], &negs, &self.0)?.loss)
    }

    fn gradient(&self, point: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        arity(point, 2)?;
        let negs: Vec<&[f64]> = point[2..].iter().map(|v| v.as_slice()).collect();
        let g = rain_robust_pair_loss_grad(&point[0], &point[1], &negs, &self.0)?;
        let mut out = vec![g.anchor, g.positive];
        out.extend(g.negatives);
        Ok(out)
    }
}

impl BatchLoss {
    fn pairs(point: &[Vec<f64>]) -> Result<Vec<(&[f64], &[f64])>> {
        if point.is_empty() || point.len() % 2 != 0 {
            return Err(Error::InvalidParameter(
                "batch point needs an even, nonzero vector count".into(),
            ));
        }
        Ok(point
            .chunks_exact(2)
            .map(|c| (c[0].as_slice(), c[1].as_slice()))
            .collect())
    }
}

impl DifferentiableLoss for BatchLoss {
    fn value(&self, point: &[Vec<f64>]) -> Result<f64> {
        Ok(rain_robust_batch_loss_grad(&Self::pairs(point)?, &self.0)?.loss)
    }

    fn gradient(&self, point: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let g = rain_robust_batch_loss_grad(&Self::pairs(point)?, &self.0)?;
        Ok(g.rainy
            .into_iter()
            .zip(g.clean)
            .flat_map(|(a, b)| [a, b])
            .collect())
    }
}

/// Largest `|analytic − numeric| / max(|numeric|, 1e-8)` over every
/// coordinate, using central differences of width `2ε`.
pub fn gradient_check(
    loss: &dyn DifferentiableLoss,
    point: &[Vec<f64>],
    epsilon: f64,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let analytic = loss.gradient(point)?;
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for v in 0..x.len() {
        for i in 0..x[v].len() {
            let orig = x[v][i];
            x[v][i] = orig + epsilon;
            let up = loss.value(&x)?;
            x[v][i] = orig - epsilon;
            let down = loss.value(&x)?;
            x[v][i] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            let a = analytic[v][i];
            if !(numeric.is_finite() && a.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient at vector {v}, coordinate {i}"
                )));
            }
            worst = worst.max((a - numeric).abs() / numeric.abs().max(1e-8));
        }
    }
    Ok(worst)
}
