//! Subcommand adapters over `rainforge_core`. Each returns the JSON value it
//! prints so tests can compare against direct library calls.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rainforge_core::curation::{
    align_pair, assess_criteria, export_dataset, run_pipeline, select_correction, split_dataset,
    CorrectionMode, CurationConfig, Manifest, ModeRequest, RegistrationConfig, SplitAssignment,
    Thresholds,
};
use rainforge_core::imaging::{load_image, save_image, Homography, Rect};
use rainforge_core::metrics::{quality_report, MsSsimParams};
use rainforge_core::objective::{
    full_objective, gradient_check, rain_robust_batch_loss_grad, rain_robust_pair_loss_grad,
    BatchLoss, CosineLoss, FeatureVector, ObjectiveWeights, PairLoss, RobustLossParams,
};
use rainforge_core::registration::alignment_residual;
use rainforge_core::synth::{
    procedural_scene, synthesize_pair, write_corpus, CorpusSpec, StreakParams, VeilParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::{
    AlignArgs, AssessArgs, CliError, Command, ConfigArg, ExportArgs, LosscheckArgs, MetricsArgs,
    PipelineArgs, SplitArgs, SynthArgs, CONFIG_ENV,
};

type CmdResult<T = Value> = std::result::Result<T, CliError>;

pub fn dispatch(cmd: Command, out: &mut dyn Write) -> CmdResult<()> {
    let value = match cmd {
        Command::Align(a) => align(&a)?,
        Command::Assess(a) => assess(&a)?,
        Command::Pipeline(a) => pipeline(&a)?,
        Command::Synth(a) => synth(&a)?,
        Command::Metrics(a) => metrics(&a)?,
        Command::Losscheck(a) => losscheck(&a)?,
        Command::Split(a) => split(&a)?,
        Command::Export(a) => export(&a)?,
        Command::Serve(a) => {
            let root = a.root.clone().unwrap_or_else(|| parent_dir(&a.manifest));
            let service = crate::server::ReviewService::open(&a.manifest, root)?;
            eprintln!(
                "serving {} on http://{}:{}",
                a.manifest.display(),
                a.bind,
                a.port
            );
            crate::server::serve(service, &a.bind, a.port)?;
            return Ok(());
        }
    };
    serde_json::to_writer_pretty(&mut *out, &value)?;
    writeln!(out)?;
    Ok(())
}

fn parent_dir(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn config_path(arg: &ConfigArg) -> Option<PathBuf> {
    arg.config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
}

/// Loads the config; parse and validation errors are usage errors.
pub fn load_config(path: &Path) -> CmdResult<CurationConfig> {
    CurationConfig::load(path).map_err(|e| match e {
        rainforge_core::Error::Io { .. } => CliError::Usage(format!("cannot read config: {e}")),
        other => CliError::Usage(other.to_string()),
    })
}

fn optional_config(arg: &ConfigArg) -> CmdResult<(Thresholds, RegistrationConfig)> {
    match config_path(arg) {
        Some(p) => {
            let c = load_config(&p)?;
            Ok((c.thresholds, c.registration))
        }
        None => Ok((Thresholds::default(), RegistrationConfig::default())),
    }
}

fn parse_mode(s: &str) -> CmdResult<ModeRequest> {
    if s == "auto" {
        return Ok(ModeRequest::Auto);
    }
    s.parse::<CorrectionMode>()
        .map(ModeRequest::Fixed)
        .map_err(|e| CliError::Usage(e.to_string()))
}

pub fn align(a: &AlignArgs) -> CmdResult {
    let request = parse_mode(&a.mode)?;
    let (th, reg) = optional_config(&a.config)?;
    let rainy = load_image(&a.rainy)?;
    let clean = load_image(&a.clean)?;
    let motion = alignment_residual(&rainy, &clean, th.block_size)?;
    let outcome = align_pair(&rainy, &clean, &motion, request, &reg, &th)?;

    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    if let Some(h) = &outcome.homography {
        std::fs::write(a.out.join("homography.json"), serde_json::to_vec(h)?)?;
    }
    if let Some(f) = &outcome.field {
        f.save(a.out.join("field.dfield"))?;
    }
    save_image(&outcome.aligned, a.out.join("aligned.png"))?;

    let region = outcome
        .valid
        .inscribed_rect()
        .ok_or(rainforge_core::Error::EmptyMask)?;
    let report = json!({
        "mode": outcome.mode,
        "homography": outcome.homography,
        "ransac": outcome.ransac,
        "field_max_magnitude": outcome.field.as_ref().map(|f| f.max_magnitude()),
        "motion": motion,
        "post_warp": outcome.post_warp,
        "pre_metrics": quality_report(&rainy, &clean, region)?,
        "metrics": quality_report(&rainy, &outcome.aligned, region)?,
        "diagnostics": outcome.diagnostics,
    });
    std::fs::write(
        a.out.join("report.json"),
        serde_json::to_vec_pretty(&report)?,
    )?;
    Ok(report)
}

pub fn assess(a: &AssessArgs) -> CmdResult {
    let (th, _) = optional_config(&a.config)?;
    let rainy = load_image(&a.rainy)?;
    let clean = load_image(&a.clean)?;
    let report = assess_criteria(&rainy, &clean, a.time_delta_minutes, &th)?;
    Ok(json!({
        "hard_failures": report.hard_failures(),
        "correction_mode": select_correction(&report.motion, None, &th),
        "criteria": report,
    }))
}

pub fn pipeline(a: &PipelineArgs) -> CmdResult {
    let path = config_path(&a.config).ok_or_else(|| {
        CliError::Usage(format!(
            "no config given: pass --config or set {CONFIG_ENV}"
        ))
    })?;
    let cfg = load_config(&path)?;
    Ok(serde_json::to_value(run_pipeline(&cfg)?)?)
}

pub fn synth(a: &SynthArgs) -> CmdResult {
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    if a.corpus {
        let spec = CorpusSpec {
            seed: a.seed,
            ..Default::default()
        };
        let truth = write_corpus(&a.out, &spec)?;
        let value = json!({ "spec": spec, "pairs": truth });
        std::fs::write(a.out.join("truth.json"), serde_json::to_vec_pretty(&value)?)?;
        return Ok(value);
    }
    let clean_path = a
        .clean
        .as_ref()
        .expect("clap requires --clean without --corpus");
    let clean = load_image(clean_path)?;
    let layers: Vec<StreakParams> = (0..a.layers)
        .map(|i| StreakParams {
            count: a.count,
            seed: a.seed.wrapping_add(i as u64),
            ..Default::default()
        })
        .collect();
    let veil = VeilParams {
        strength: a.veil,
        ..VeilParams::none()
    };
    let shift = (a.shift_x != 0.0 || a.shift_y != 0.0)
        .then(|| Homography::translation(a.shift_x, a.shift_y));
    let pair = synthesize_pair(&clean, &layers, &veil, shift.as_ref(), None)?;
    save_image(&pair.rainy, a.out.join("rainy.png"))?;
    let provenance = serde_json::to_value(&pair.provenance)?;
    std::fs::write(
        a.out.join("provenance.json"),
        serde_json::to_vec_pretty(&provenance)?,
    )?;
    Ok(provenance)
}

fn parse_region(s: &str) -> CmdResult<Rect> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("region {s:?}: {e}")))?;
    match parts[..] {
        [x, y, w, h] => Ok(Rect::new(x, y, w, h)),
        _ => Err(CliError::Usage(format!("region {s:?} must be x,y,w,h"))),
    }
}

pub fn metrics(a: &MetricsArgs) -> CmdResult {
    let region = a.region.as_deref().map(parse_region).transpose()?;
    let ia = load_image(&a.a)?;
    let ib = load_image(&a.b)?;
    let region = region.unwrap_or_else(|| Rect::full(ia.width(), ia.height()));
    Ok(serde_json::to_value(quality_report(&ia, &ib, region)?)?)
}

fn random_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn losscheck(a: &LosscheckArgs) -> CmdResult {
    if a.dim == 0 || a.batch < 2 {
        return Err(CliError::Usage("need --dim >= 1 and --batch >= 2".into()));
    }
    let params = RobustLossParams {
        temperature: a.temperature,
        include_positive_in_denominator: !a.paper_literal,
    };
    params
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let batch: Vec<Vec<f64>> = (0..2 * a.batch)
        .map(|_| random_vec(&mut rng, a.dim))
        .collect();
    let pairs: Vec<(&[f64], &[f64])> = batch
        .chunks(2)
        .map(|c| (c[0].as_slice(), c[1].as_slice()))
        .collect();

    // term i = 0 of the batch: anchor z_I0, positive z_J0, the rest negative
    let negatives: Vec<&[f64]> = batch[2..].iter().map(|v| v.as_slice()).collect();
    let pair_loss = rain_robust_pair_loss_grad(&batch[0], &batch[1], &negatives, &params)?.loss;
    let batch_loss = rain_robust_batch_loss_grad(&pairs, &params)?.loss;

    let truth = procedural_scene(192, 192, a.seed);
    let restored = truth.map(|v| (v * 0.95 + 0.02).clamp(0.0, 1.0));
    let fv = |v: &Vec<f64>| FeatureVector::new(v.clone());
    let feature_negatives = batch[2..].iter().map(fv).collect::<Result<Vec<_>, _>>()?;
    let objective = full_objective(
        &restored,
        &truth,
        &fv(&batch[1])?,
        &fv(&batch[0])?,
        &feature_negatives,
        &ObjectiveWeights::default(),
        &params,
        &MsSsimParams::default(),
    )?;

    let mut pair_point = vec![batch[0].clone(), batch[1].clone()];
    pair_point.extend(batch[2..].iter().cloned());
    let cosine_err = gradient_check(&CosineLoss, &batch[..2], a.epsilon)?;
    let pair_err = gradient_check(&PairLoss(params), &pair_point, a.epsilon)?;
    let batch_err = gradient_check(&BatchLoss(params), &batch, a.epsilon)?;
    Ok(json!({
        "flags": {
            "temperature": params.temperature,
            "include_positive_in_denominator": params.include_positive_in_denominator,
            "epsilon": a.epsilon,
            "dim": a.dim,
            "batch": a.batch,
            "seed": a.seed,
        },
        "terms": {
            "cosine_similarity": rainforge_core::objective::cosine_similarity(&batch[0], &batch[1])?,
            "pair_loss": pair_loss,
            "batch_loss": batch_loss,
            "objective": objective,
        },
        "gradient_check": {
            "cosine_similarity": cosine_err,
            "pair_loss": pair_err,
            "batch_loss": batch_err,
        },
    }))
}

fn parse_ratios(s: &str) -> CmdResult<[f64; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("ratios {s:?}: {e}")))?;
    v.try_into()
        .map_err(|_| CliError::Usage(format!("ratios {s:?} must have three values")))
}

pub fn split(a: &SplitArgs) -> CmdResult {
    let ratios = parse_ratios(&a.ratios)?;
    let manifest = Manifest::load(&a.manifest)?;
    let assignment = split_dataset(manifest.records(), ratios, a.seed)?;
    for w in &assignment.warnings {
        eprintln!("warning: {w}");
    }
    let value = serde_json::to_value(&assignment)?;
    if let Some(p) = &a.out {
        std::fs::write(p, serde_json::to_vec_pretty(&value)?)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(value)
}

pub fn export(a: &ExportArgs) -> CmdResult {
    let manifest = Manifest::load(&a.manifest)?;
    let text = std::fs::read_to_string(&a.split)
        .with_context(|| format!("reading {}", a.split.display()))?;
    let assignment: SplitAssignment =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.split.display()))?;
    let root = a.root.clone().unwrap_or_else(|| parent_dir(&a.manifest));
    Ok(serde_json::to_value(export_dataset(
        &manifest,
        &assignment,
        &root,
        &a.out,
    )?)?)
}
