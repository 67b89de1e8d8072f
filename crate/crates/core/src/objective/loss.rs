use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{cosine_similarity_grad, FeatureVector};
use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;
use crate::metrics::{ms_ssim, MsSsimParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustLossParams {
    pub temperature: f64,
    /// Standard InfoNCE keeps the positive in the denominator; `false` sums
    /// over negatives only, which allows negative losses.
    pub include_positive_in_denominator: bool,
}

impl Default for RobustLossParams {
    fn default() -> Self {
        Self {
            temperature: 0.25,
            include_positive_in_denominator: true,
        }
    }
}

impl RobustLossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub l1: f64,
    pub robust: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            l1: 0.1,
            robust: 0.1,
        }
    }
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.l1 >= 0.0 && self.robust >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "objective weights must be nonnegative: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Pair loss with gradients for every input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLossGrad {
    pub loss: f64,
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    acc.iter_mut().zip(x).for_each(|(y, v)| *y += a * v);
}

/// InfoNCE loss `−log(exp(s⁺/τ) / D)` with its gradients.
pub fn rain_robust_pair_loss_grad(
    anchor: &[f64],
    positive: &[f64],
    negatives: &[&[f64]],
    params: &RobustLossParams,
) -> Result<PairLossGrad> {
    params.validate()?;
    let flag = params.include_positive_in_denominator;
    if negatives.is_empty() && !flag {
        return Err(Error::InvalidParameter(
            "empty denominator: no negatives and the positive is excluded".into(),
        ));
    }
    let tau = params.temperature;
    let (sp, ga_p, gp) = cosine_similarity_grad(anchor, positive)?;
    let neg: Vec<(f64, Vec<f64>, Vec<f64>)> = negatives
        .iter()
        .map(|k| cosine_similarity_grad(anchor, k))
        .collect::<Result<_>>()?;

    let lp = sp / tau;
    let logits: Vec<f64> = neg.iter().map(|(s, _, _)| s / tau).collect();
    let m = logits
        .iter()
        .copied()
        .chain(flag.then_some(lp))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    if flag {
        z += (lp - m).exp();
    }
    let lse = m + z.ln();
    let loss = lse - lp;
    if !loss.is_finite() {
        return Err(Error::NonFinite("pair loss".into()));
    }

    // dL/ds for the positive and each negative
    let dp = ((if flag { (lp - lse).exp() } else { 0.0 }) - 1.0) / tau;
    let mut g_anchor = vec![0.0; anchor.len()];
    axpy(&mut g_anchor, dp, &ga_p);
    let g_positive: Vec<f64> = gp.iter().map(|g| dp * g).collect();
    let mut g_neg = Vec::with_capacity(neg.len());
    for ((_, ga_k, gk), l) in neg.iter().zip(&logits) {
        let dk = (l - lse).exp() / tau;
        axpy(&mut g_anchor, dk, ga_k);
        g_neg.push(gk.iter().map(|g| dk * g).collect());
    }
    Ok(PairLossGrad {
        loss,
        anchor: g_anchor,
        positive: g_positive,
        negatives: g_neg,
    })
}

pub fn rain_robust_pair_loss(
    anchor: &FeatureVector,
    positive: &FeatureVector,
    negatives: &[FeatureVector],
    params: &RobustLossParams,
) -> Result<f64> {
    let negs: Vec<&[f64]> = negatives.iter().map(|n| n.values()).collect();
    Ok(rain_robust_pair_loss_grad(anchor.values(), positive.values(), &negs, params)?.loss)
}

/// Batch loss with gradients for each `z_I` and `z_J`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLossGrad {
    pub loss: f64,
    pub rainy: Vec<Vec<f64>>,
    pub clean: Vec<Vec<f64>>,
}

/// Mean of the 2N directed pair losses `(z_Iᵢ → z_Jᵢ)` and `(z_Jᵢ → z_Iᵢ)`;
/// each uses the other 2(N−1) batch features as negatives.
pub fn rain_robust_batch_loss_grad(
    pairs: &[(&[f64], &[f64])],
    params: &RobustLossParams,
) -> Result<BatchLossGrad> {
    let n = pairs.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    // feature k: pair k/2, rainy if even
    let feature = |k: usize| {
        if k % 2 == 0 {
            pairs[k / 2].0
        } else {
            pairs[k / 2].1
        }
    };
    let terms: Vec<(usize, PairLossGrad)> = (0..2 * n)
        .into_par_iter()
        .map(|k| {
            let i = k / 2;
            let negatives: Vec<&[f64]> = (0..n)
                .filter(|&j| j != i)
                .flat_map(|j| [pairs[j].0, pairs[j].1])
                .collect();
            rain_robust_pair_loss_grad(feature(k), feature(k ^ 1), &negatives, params)
                .map(|g| (k, g))
        })
        .collect::<Result<_>>()?;

    let scale = 1.0 / (2 * n) as f64;
    let mut grads: Vec<Vec<f64>> = (0..2 * n).map(|k| vec![0.0; feature(k).len()]).collect();
    let mut total = 0.0;
    for (k, g) in &terms {
        total += g.loss;
        axpy(&mut grads[*k], scale, &g.anchor);
        axpy(&mut grads[k ^ 1], scale, &g.positive);
        let others = (0..2 * n).filter(|&q| q / 2 != k / 2);
        for (q, gq) in others.zip(&g.negatives) {
            axpy(&mut grads[q], scale, gq);
        }
    }
    let mut rainy = Vec::with_capacity(n);
    let mut clean = Vec::with_capacity(n);
    for (k, g) in grads.into_iter().enumerate() {
        if k % 2 == 0 {
            rainy.push(g);
        } else {
            clean.push(g);
        }
    }
    Ok(BatchLossGrad {
        loss: total * scale,
        rainy,
        clean,
    })
}

/// `pairs` holds `(z_I, z_J)` for each rainy/clean pair in the batch.
pub fn rain_robust_batch_loss(
    pairs: &[(FeatureVector, FeatureVector)],
    params: &RobustLossParams,
) -> Result<f64> {
    let refs: Vec<(&[f64], &[f64])> = pairs
        .iter()
        .map(|(i, j)| (i.values(), j.values()))
        .collect();
    Ok(rain_robust_batch_loss_grad(&refs, params)?.loss)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    /// `1 − MS-SSIM(Ĵ, J)`.
    pub ms_ssim_loss: f64,
    /// Mean absolute error, unweighted.
    pub l1: f64,
    /// Pair loss anchored at `z_I`, unweighted.
    pub robust: f64,
    pub total: f64,
}

/// `(1 − MS-SSIM) + λ_l1·mean|Ĵ − J| + λ_robust·ℓ(z_I, z_J)`.
#[allow(clippy::too_many_arguments)]
pub fn full_objective(
    restored: &ImageBuffer,
    truth: &ImageBuffer,
    z_j: &FeatureVector,
    z_i: &FeatureVector,
    negatives: &[FeatureVector],
    weights: &ObjectiveWeights,
    robust: &RobustLossParams,
    ms: &MsSsimParams,
) -> Result<ObjectiveBreakdown> {
    weights.validate()?;
    restored.ensure_same_shape(truth)?;
    let ms_ssim_loss = 1.0 - ms_ssim(restored, truth, ms)?;
    let n = restored.data().len() as f64;
    let l1 = restored
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n;
    let robust = rain_robust_pair_loss(z_i, z_j, negatives, robust)?;
    Ok(ObjectiveBreakdown {
        ms_ssim_loss,
        l1,
        robust,
        total: ms_ssim_loss + weights.l1 * l1 + weights.robust * robust,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(n: usize, i: usize) -> FeatureVector {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        FeatureVector::new(v).unwrap()
    }

    #[test]
    fn pair_closed_forms() {
        let a = basis(3, 0);
        let negs = [basis(3, 1), basis(3, 2)];
        let p = RobustLossParams::default();
        let l = rain_robust_pair_loss(&a, &a, &negs, &p).unwrap();
        assert!((l - (1.0 + 2.0 * (-4f64).exp()).ln()).abs() < 1e-12);
        let literal = RobustLossParams {
            include_positive_in_denominator: false,
            ..p
        };
        let l = rain_robust_pair_loss(&a, &a, &negs, &literal).unwrap();
        assert!((l - (2f64.ln() - 4.0)).abs() < 1e-12);
        assert!(rain_robust_pair_loss(&a, &a, &[], &literal).is_err());
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let a = basis(2, 0);
        let b = FeatureVector::new(vec![-1.0, 0.0]).unwrap();
        let p = RobustLossParams {
            temperature: 1e-4,
            include_positive_in_denominator: true,
        };
        let l = rain_robust_pair_loss(&a, &b, &[a.clone()], &p).unwrap();
        assert!((l - 2e4).abs() < 1e-6, "{l}");
    }

    #[test]
    fn batch_closed_forms() {
        let p = RobustLossParams::default();
        let pairs = vec![(basis(4, 0), basis(4, 0)), (basis(4, 1), basis(4, 1))];
        // positives identical, the other pair orthogonal
        let l = rain_robust_batch_loss(&pairs, &p).unwrap();
        assert!((l - (1.0 + 2.0 * (-4f64).exp()).ln()).abs() < 1e-12);
        let same = vec![(basis(4, 2), basis(4, 2)), (basis(4, 2), basis(4, 2))];
        assert!((rain_robust_batch_loss(&same, &p).unwrap() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn objective_identity() {
        let img = ImageBuffer::filled(180, 180, 1, 0.4).unwrap();
        let z = basis(3, 0);
        let w = ObjectiveWeights {
            l1: 0.1,
            robust: 0.0,
        };
        let o = full_objective(
            &img,
            &img,
            &z,
            &z,
            &[basis(3, 1)],
            &w,
            &RobustLossParams::default(),
            &MsSsimParams::default(),
        )
        .unwrap();
        assert_eq!(o.total, 0.0);
    }
}
