//! Mini-batch training loop with seeded shuffling and Brier-score model
//! selection.

use super::adamw::AdamW;
use super::loss::{instance_loss_on_tape, weighted_brier_probs};
use super::params::ModelParams;
use super::tape::{sigmoid, Tape};
use super::{LossKind, TrainConfig};
use crate::datagen::{DatasetFile, SampleSet};
use crate::error::{Error, Result};
use crate::graph::{build_tripartite, TripartiteGraph};
use crate::instance::MbqpInstance;
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};

/// One training instance with its cached graph encoding and samples.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub instance: MbqpInstance,
    pub graph: TripartiteGraph,
    pub set: SampleSet,
}

impl TrainExample {
    pub fn new(instance: MbqpInstance, set: SampleSet) -> Self {
        let graph = build_tripartite(&instance);
        Self {
            instance,
            graph,
            set,
        }
    }

    pub fn from_dataset_file(file: &DatasetFile) -> Result<Self> {
        let set = file.sample_set()?;
        Ok(Self::new(file.instance.clone(), set))
    }
}

/// Train/validation split.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub train: Vec<TrainExample>,
    pub val: Vec<TrainExample>,
}

impl Dataset {
    /// Deterministic split: the last `ceil(val_frac * len)` examples (in the
    /// given order) become validation.
    pub fn split(mut examples: Vec<TrainExample>, val_frac: f64) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        let n_val = ((val_frac * examples.len() as f64).ceil() as usize).min(examples.len());
        let val = examples.split_off(examples.len() - n_val);
        Ok(Self {
            train: examples,
            val,
        })
    }
}

/// Mean loss and flat gradient of a batch. Under the pure contrastive loss,
/// instances without negatives are skipped; the batch must keep at least one
/// usable instance.
pub fn gradient(
    params: &ModelParams,
    batch: &[&TrainExample],
    loss_kind: LossKind,
    config: &TrainConfig,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("gradient over empty batch".into()));
    }
    let usable: Vec<&TrainExample> = batch
        .iter()
        .copied()
        .filter(|ex| loss_kind != LossKind::Cl || !ex.set.negatives.is_empty())
        .collect();
    if usable.is_empty() {
        return Err(Error::InvalidArgument(
            "no instance in the batch has negatives for the contrastive loss".into(),
        ));
    }

    let mut tape = Tape::new();
    let model = params.bind(&mut tape);
    let mut total: Option<super::tape::NodeId> = None;
    for ex in &usable {
        let loss = instance_loss_on_tape(
            &mut tape,
            &model,
            &ex.instance,
            &ex.graph,
            &ex.set,
            loss_kind,
            config.lambda_cl,
            config.temperature_w,
        )?;
        total = Some(match total {
            None => loss,
            Some(acc) => tape.add(acc, loss),
        });
    }
    let total = total.expect("usable batch is non-empty");
    let mean = tape.scale(total, 1.0 / usable.len() as f64);
    let loss_value = tape.value(mean).data[0];
    if !loss_value.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss {loss_value}")));
    }
    let grads = tape.backward(mean);
    Ok((loss_value, model.collect_gradient(&grads)))
}

/// Mean weighted Brier score of the model over validation examples.
pub fn weighted_brier(params: &ModelParams, validation: &[TrainExample]) -> Result<f64> {
    if validation.is_empty() {
        return Err(Error::InvalidArgument("Brier score over empty validation".into()));
    }
    let mut total = 0.0;
    for ex in validation {
        let logits = super::forward(params, &ex.graph)?;
        let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        total += weighted_brier_probs(&probs, &ex.set, &ex.instance.binary)?;
    }
    Ok(total / validation.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_brier: Option<f64>,
}

/// Training result: the final parameters, the parameters with the best
/// validation Brier score, and the per-epoch log.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub final_params: ModelParams,
    pub best_params: ModelParams,
    pub best_brier: Option<f64>,
    pub initial_brier: Option<f64>,
    pub log: Vec<EpochLog>,
}

/// Mini-batch loop: seeded shuffle each epoch, AdamW steps per batch,
/// validation Brier after every epoch with strict-improvement selection.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let mut params = ModelParams::init(config.hidden, config.heads, config.seed)?;
    let mut flat = params.flatten();
    let mut opt = AdamW::new(flat.len(), config.lr, config.weight_decay);

    let eval_brier = |p: &ModelParams| -> Result<Option<f64>> {
        if dataset.val.is_empty() {
            Ok(None)
        } else {
            weighted_brier(p, &dataset.val).map(Some)
        }
    };

    let initial_brier = eval_brier(&params)?;
    let mut best_params = params.clone();
    let mut best_brier = initial_brier;
    let mut log = Vec::with_capacity(config.epochs);

    let mut indices: Vec<usize> = (0..dataset.train.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng = SplitMix64::derive(config.seed, 0x5e9 + epoch as u64);
        rng.shuffle(&mut indices);
        let mut loss_sum = 0.0;
        let mut example_count = 0usize;
        for chunk in indices.chunks(config.batch_size) {
            let batch: Vec<&TrainExample> = chunk.iter().map(|&i| &dataset.train[i]).collect();
            let (loss, grad) = gradient(&params, &batch, config.loss_kind, config)?;
            opt.step(&mut flat, &grad)?;
            params.unflatten(&flat)?;
            loss_sum += loss * batch.len() as f64;
            example_count += batch.len();
        }
        let mean_loss = loss_sum / example_count as f64;
        let val_brier = eval_brier(&params)?;
        if let (Some(current), maybe_best) = (val_brier, best_brier) {
            if maybe_best.map_or(true, |b| current < b) {
                best_brier = Some(current);
                best_params = params.clone();
            }
        }
        log.push(EpochLog {
            epoch,
            mean_loss,
            val_brier,
        });
    }
    if dataset.val.is_empty() {
        best_params = params.clone();
    }
    Ok(TrainOutcome {
        final_params: params,
        best_params,
        best_brier,
        initial_brier,
        log,
    })
}
