//! Paired rainy/clean frame synthesis under the additive streak model.

mod composite;
mod corpus;
mod pair;
mod scene;
mod streaks;

pub use composite::{apply_veiling, composite_rain, Composite, VeilParams};
pub use corpus::{
    camera_jitter, gaussian_bump, write_corpus, CorpusEntry, CorpusSpec, Perturbation,
};
pub use pair::{synthesize_pair, SynthProvenance, SynthesizedPair};
pub use scene::procedural_scene;
pub use streaks::{render_streak_layer, sample_streaks, Streak, StreakLayer, StreakParams};
