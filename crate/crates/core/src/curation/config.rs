use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Rect;
use crate::registration::{DemonsParams, RansacParams, SiftParams};

/// Cutoffs for the collection criteria and correction selection. Copied
/// into every record so a manifest is self-describing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Global shift (px) at or above which a homography is estimated.
    pub t_global: f64,
    /// Block shift (px) at or above which elastic registration runs.
    pub t_local: f64,
    /// Mean-luminance delta flagged as an illumination shift.
    pub illumination_shift: f64,
    pub max_time_delta_minutes: f64,
    /// Reject when the 1st luminance percentile exceeds this.
    pub exposure_p1_max: f64,
    /// Reject when the 99th luminance percentile falls below this.
    pub exposure_p99_min: f64,
    /// Reject when the high-frequency energy ratio exceeds this.
    pub noise_max: f64,
    pub block_size: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            t_global: 1.0,
            t_local: 0.75,
            illumination_shift: 0.05,
            max_time_delta_minutes: 40.0,
            exposure_p1_max: 0.5,
            exposure_p99_min: 0.1,
            noise_max: 0.3,
            block_size: 32,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_global > 0.0
            && self.t_local > 0.0
            && self.illumination_shift >= 0.0
            && self.max_time_delta_minutes >= 0.0
            && (0.0..=1.0).contains(&self.exposure_p1_max)
            && (0.0..=1.0).contains(&self.exposure_p99_min)
            && self.noise_max > 0.0
            && self.block_size >= 8;
        if !ok {
            return Err(Error::Config(format!("thresholds out of range: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    pub ratio: f64,
    /// Half-width of the horizontal opening applied to both frames before
    /// keypoint detection; 0 disables it.
    pub streak_suppression: usize,
    pub sift: SiftParams,
    pub ransac: RansacParams,
    pub demons: DemonsParams,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            ratio: 0.75,
            streak_suppression: 2,
            sift: SiftParams::default(),
            ransac: RansacParams::default(),
            demons: DemonsParams::default(),
        }
    }
}

/// Exclusion regions for one scene: rectangles to drop, or a PNG whose
/// nonzero pixels are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneMask {
    pub scene: String,
    #[serde(default)]
    pub exclude: Vec<Rect>,
    #[serde(default)]
    pub png: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub rainy_dir: PathBuf,
    pub clean_dir: PathBuf,
    /// Explicit `rainy,clean` pairing; stems are matched when absent.
    #[serde(default)]
    pub pairing_csv: Option<PathBuf>,
    pub output_root: PathBuf,
    /// Defaults to `<output_root>/manifest.jsonl`.
    #[serde(default)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOptions {
    /// Accept pairs that need no correction instead of leaving them pending.
    pub auto_accept_uncorrected: bool,
    /// Timestamp stamped on automatic decisions; keeps re-runs byte-identical.
    pub run_timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurationConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub registration: RegistrationConfig,
    #[serde(default)]
    pub pipeline: PipelineOptions,
    #[serde(default)]
    pub masks: Vec<SceneMask>,
}

impl CurationConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        // relative paths resolve against the config file's directory
        let base = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let base = std::fs::canonicalize(&base).map_err(|e| Error::io(&base, e))?;
        cfg.rebase(&base);
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: CurationConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            match line {
                Some(l) => Error::Config(format!("line {l}: {}", e.message())),
                None => Error::Config(e.message().to_string()),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate()?;
        self.registration
            .demons
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if !(self.registration.ratio > 0.0 && self.registration.ratio < 1.0) {
            return Err(Error::Config(format!(
                "ratio {} outside (0, 1)",
                self.registration.ratio
            )));
        }
        Ok(())
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.rainy_dir);
        fix(&mut self.paths.clean_dir);
        fix(&mut self.paths.output_root);
        if let Some(p) = self.paths.pairing_csv.as_mut() {
            fix(p);
        }
        if let Some(p) = self.paths.manifest.as_mut() {
            fix(p);
        }
        for m in &mut self.masks {
            if let Some(p) = m.png.as_mut() {
                fix(p);
            }
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.paths
            .manifest
            .clone()
            .unwrap_or_else(|| self.paths.output_root.join("manifest.jsonl"))
    }

    pub fn mask_for(&self, scene: &str) -> Option<&SceneMask> {
        self.masks.iter().find(|m| m.scene == scene)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[paths]
rainy_dir = "rainy"
clean_dir = "clean"
output_root = "out"
"#;

    #[test]
    fn defaults_fill_in() {
        let c = CurationConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.thresholds, Thresholds::default());
        assert_eq!(c.manifest_path(), PathBuf::from("out/manifest.jsonl"));
        assert!(!c.pipeline.auto_accept_uncorrected);
    }

    #[test]
    fn overrides_and_masks() {
        let text = format!(
            "{MINIMAL}\n[thresholds]\nt_global = 2.5\n\n[registration.ransac]\nseed = 9\n\n[[masks]]\nscene = \"s1\"\nexclude = [{{ x = 0, y = 0, w = 10, h = 4 }}]\n"
        );
        let c = CurationConfig::parse(&text).unwrap();
        assert_eq!(c.thresholds.t_global, 2.5);
        assert_eq!(c.registration.ransac.seed, 9);
        assert_eq!(c.registration.ransac.max_iterations, 2000);
        assert_eq!(c.mask_for("s1").unwrap().exclude[0], Rect::new(0, 0, 10, 4));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = format!("{MINIMAL}\n[thresholds]\nt_gloabl = 2.5\n");
        let msg = CurationConfig::parse(&text).unwrap_err().to_string();
        assert!(msg.contains("line 8"), "{msg}");
        let bad = "[paths]\nrainy_dir = \n";
        assert!(CurationConfig::parse(bad)
            .unwrap_err()
            .to_string()
            .contains("line 2"));
        let range = format!("{MINIMAL}\n[thresholds]\nt_local = -1.0\n");
        assert!(CurationConfig::parse(&range).is_err());
    }
}
