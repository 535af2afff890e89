//! Graph attention model, losses, gradients, and training.

pub mod adamw;
pub mod forward;
pub mod loss;
pub mod params;
pub mod tape;
pub mod train;

pub use adamw::AdamW;
pub use forward::forward;
pub use loss::{loss_cl, loss_combined, loss_wce, weighted_brier_probs};
pub use params::{Checkpoint, ModelParams};
pub use train::{gradient, train, weighted_brier, Dataset, TrainExample, TrainOutcome};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which loss drives training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    Wce,
    Cl,
    ClWce,
}

impl LossKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wce" => Ok(LossKind::Wce),
            "cl" => Ok(LossKind::Cl),
            "cl+wce" | "clwce" | "cl_wce" => Ok(LossKind::ClWce),
            other => Err(Error::InvalidArgument(format!("unknown loss kind {other:?}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::Wce => "wce",
            LossKind::Cl => "cl",
            LossKind::ClWce => "cl+wce",
        }
    }
}

/// Training hyperparameters. `temperature_w` must be negative: better
/// positives then get lower temperatures, which sharpens their contrast
/// against negatives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    pub lambda_cl: f64,
    pub temperature_w: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden: usize,
    pub heads: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_kind: LossKind::ClWce,
            lambda_cl: 5.0,
            temperature_w: -0.5,
            lr: 1e-5,
            weight_decay: 0.01,
            batch_size: 16,
            epochs: 50,
            hidden: 32,
            heads: 4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature_w >= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "temperature_w must be negative, got {}",
                self.temperature_w
            )));
        }
        if self.loss_kind == LossKind::ClWce && self.lambda_cl <= 0.0 {
            return Err(Error::InvalidArgument(
                "lambda_cl must be positive for the combined loss".into(),
            ));
        }
        if self.hidden == 0 || self.heads == 0 || self.hidden % self.heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "hidden ({}) must be a positive multiple of heads ({})",
                self.hidden, self.heads
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-variable probability of taking value 1.
pub fn predict_prob(logits: &[f64]) -> Vec<f64> {
    logits.iter().map(|&z| tape::sigmoid(z)).collect()
}

/// Per-variable signed prediction in [-1, 1], matching the -1/1 solution
/// encoding of the contrastive loss.
pub fn predict_signed(logits: &[f64]) -> Vec<f64> {
    logits.iter().map(|&z| z.tanh()).collect()
}
