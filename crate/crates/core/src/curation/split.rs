use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CurationRecord, Status};
use crate::error::{Error, Result};

/// Frame proportions of the published train/val/test split.
pub const DEFAULT_RATIOS: [f64; 3] = [0.829, 0.105, 0.066];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub ratios: [f64; 3],
    /// pair id → split, accepted pairs only.
    pub assignments: BTreeMap<String, Split>,
    pub scenes: BTreeMap<String, Split>,
    /// Frame targets per split after rounding.
    pub targets: [usize; 3],
    pub warnings: Vec<String>,
}

impl SplitAssignment {
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for s in self.assignments.values() {
            c[*s as usize] += 1;
        }
        c
    }
}

/// Integer apportionment of `total` by `ratios`: floors first, then the
/// largest fractional remainders (earlier index on ties) take the rest.
pub fn largest_remainder(total: usize, ratios: &[f64]) -> Vec<usize> {
    let sum: f64 = ratios.iter().sum();
    let exact: Vec<f64> = ratios.iter().map(|r| r / sum * total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = total - out.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        out[i] += 1;
    }
    out
}

fn validate(ratios: &[f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !(*r > 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!(
            "ratios must be positive and sum to 1, got {ratios:?}"
        )));
    }
    Ok(())
}

/// Assigns whole scenes of accepted pairs to train/val/test.
///
/// Frame targets come from largest-remainder rounding. Scenes are shuffled
/// under `seed`, ordered largest first, and each goes to the split furthest
/// below its target.
pub fn split_dataset<'a>(
    records: impl IntoIterator<Item = &'a CurationRecord>,
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitAssignment> {
    validate(&ratios)?;
    let mut scenes: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in records.into_iter().filter(|r| r.status == Status::Accepted) {
        scenes.entry(&r.scene_id).or_default().push(&r.pair_id);
    }
    if scenes.is_empty() {
        return Err(Error::Split("no accepted pairs to split".into()));
    }
    let mut warnings = Vec::new();
    if scenes.len() < Split::ALL.len() {
        warnings.push(format!(
            "only {} scene(s) for {} splits; some splits stay empty",
            scenes.len(),
            Split::ALL.len()
        ));
    }
    let total: usize = scenes.values().map(Vec::len).sum();
    let t = largest_remainder(total, &ratios);
    let targets = [t[0], t[1], t[2]];

    let mut order: Vec<(&str, &Vec<&str>)> = scenes.iter().map(|(k, v)| (*k, v)).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by(|a, b| b.1.len().cmp(&a.1.len()));

    let mut filled = [0usize; 3];
    let mut out = SplitAssignment {
        seed,
        ratios,
        assignments: BTreeMap::new(),
        scenes: BTreeMap::new(),
        targets,
        warnings,
    };
    for (scene, pairs) in order {
        let k = (0..3)
            .max_by(|&a, &b| {
                let da = targets[a] as i64 - filled[a] as i64;
                let db = targets[b] as i64 - filled[b] as i64;
                da.cmp(&db).then(b.cmp(&a))
            })
            .expect("three splits");
        filled[k] += pairs.len();
        let split = Split::ALL[k];
        out.scenes.insert(scene.to_string(), split);
        for p in pairs {
            out.assignments.insert(p.to_string(), split);
        }
    }
    Ok(out)
}
