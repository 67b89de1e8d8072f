//! The rain-robust training objective over condensed feature vectors.

mod features;
mod gradcheck;
mod loss;

pub use features::{
    condense_features, cosine_similarity, cosine_similarity_grad, FeatureMap, FeatureVector,
};
pub use gradcheck::{gradient_check, BatchLoss, CosineLoss, DifferentiableLoss, PairLoss};
pub use loss::{
    full_objective, rain_robust_batch_loss, rain_robust_batch_loss_grad, rain_robust_pair_loss,
    rain_robust_pair_loss_grad, BatchLossGrad, ObjectiveBreakdown, ObjectiveWeights, PairLossGrad,
    RobustLossParams,
};
