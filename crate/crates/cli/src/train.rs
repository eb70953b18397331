use anyhow::{bail, Context};
use priceband_core::ctsgan::{
    train_phase1_autoencoder, train_phase2_supervised, train_phase3_joint, CtsganModel, ModelDims, ProgressRecord,
    TrainingConfig, TrainingExample,
};
use priceband_core::data_ingest::CONDITION_DIM;
use priceband_core::rng::derive_seed;

use crate::artifacts::{self, load_full, training_part};
use crate::config::RunConfig;

const MODEL_STREAM: u64 = 0x4d44;
const TRAIN_STREAM: u64 = 0x5452;

type PhaseFn = fn(&mut CtsganModel, &[TrainingExample], &TrainingConfig, &mut dyn FnMut(&ProgressRecord)) -> priceband_core::Result<Vec<f64>>;

pub fn run(cfg: &RunConfig, resume: bool) -> anyhow::Result<()> {
    let full = load_full(cfg)?;
    let train = training_part(cfg, &full)?;
    let samples = train.samples(cfg.hdd_base).context("building training samples")?;
    if samples.is_empty() {
        bail!("no training samples: need at least two consecutive complete days");
    }
    let examples: Vec<TrainingExample> = samples.iter().map(TrainingExample::from).collect();
    let dims = ModelDims::with_sizes(CONDITION_DIM, cfg.model.hidden_dim, cfg.model.latent_dim);
    let checkpoint = cfg.checkpoint_path();
    let log_path = artifacts::train_log_path(cfg);

    let (mut model, mut log) = if resume && checkpoint.is_file() {
        let model = CtsganModel::load(&checkpoint).with_context(|| format!("resuming from {}", checkpoint.display()))?;
        if *model.dims() != dims {
            bail!(
                "checkpoint dimensions {:?} do not match the configured model {:?}",
                model.dims(),
                dims
            );
        }
        let log = std::fs::read_to_string(&log_path).unwrap_or_default();
        (model, log)
    } else {
        if resume {
            log::warn!("no checkpoint at {}; training from scratch", checkpoint.display());
        }
        (CtsganModel::new(dims, derive_seed(cfg.seed, MODEL_STREAM, 0))?, String::new())
    };
    artifacts::write(&artifacts::norm_path(cfg), serde_json::to_string_pretty(train.norm())?)?;

    let training = TrainingConfig {
        seed: derive_seed(cfg.seed, TRAIN_STREAM, 0),
        ..cfg.training.clone()
    };
    println!(
        "training on {} samples ({} .. {}), {} iterations per phase",
        examples.len(),
        samples[0].date,
        samples[samples.len() - 1].date,
        training.iterations_per_phase
    );

    let phases: [(&str, PhaseFn, bool); 3] = [
        ("autoencoder", train_phase1_autoencoder, model.flags().autoencoder),
        ("supervised", train_phase2_supervised, model.flags().supervised),
        ("joint", train_phase3_joint, model.flags().joint),
    ];
    for (name, phase, done) in phases {
        if done {
            println!("phase {name}: already complete, skipped");
            continue;
        }
        let mut lines = String::new();
        let mut progress = |r: &ProgressRecord| {
            if let Ok(line) = serde_json::to_string(r) {
                lines.push_str(&line);
                lines.push('\n');
            }
            log::debug!("{name} {} {:.6}", r.iteration, r.loss);
        };
        let curve = phase(&mut model, &examples, &training, &mut progress).with_context(|| format!("phase {name}"))?;
        model.save(&checkpoint).with_context(|| format!("writing {}", checkpoint.display()))?;
        log.push_str(&lines);
        artifacts::write(&log_path, &log)?;
        match (curve.first(), curve.last()) {
            (Some(first), Some(last)) => {
                println!("phase {name}: {} iterations, loss {first:.6} -> {last:.6}", curve.len())
            }
            _ => println!("phase {name}: 0 iterations"),
        }
    }
    if let Some(eval) = model.training_log().discriminator_eval {
        println!(
            "discriminator: accuracy {:.3}, mean score real {:.4} / generated {:.4}",
            eval.accuracy, eval.mean_real_score, eval.mean_generated_score
        );
    }
    println!("checkpoint written to {}", checkpoint.display());
    Ok(())
}
