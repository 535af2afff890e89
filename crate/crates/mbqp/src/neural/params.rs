//! Model parameters: embeddings, four attention rounds, output MLP.
//!
//! Every tensor flattens into one vector in a fixed order (embeddings,
//! rounds, MLP; row-major within a tensor), and `unflatten` restores it
//! bit-exactly. The parameter count is a closed-form function of
//! (hidden, heads) and the fixed feature widths.

use super::tape::{Tape, Tensor};
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::graph::{F_C, F_Q, F_V};
use crate::rng::SplitMix64;
use base64::Engine;
use serde::{Deserialize, Serialize};

pub const ROUNDS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead {
    /// Target (query) projection, [hidden, head_dim].
    pub w_q: Tensor,
    /// Source (key) projection, [hidden, head_dim].
    pub w_k: Tensor,
    /// Message (value) projection, [hidden, head_dim].
    pub w_v: Tensor,
    /// Attention vector applied after the nonlinearity, [head_dim, 1].
    pub attn: Tensor,
    /// Per-edge coefficient embedding, [1, head_dim].
    pub edge: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRound {
    pub heads: Vec<AttentionHead>,
    /// Output projection after head concat, [hidden, hidden].
    pub w_o: Tensor,
    pub b_o: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub w3: Tensor,
    pub b3: Tensor,
}

/// All weights of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub hidden: usize,
    pub heads: usize,
    pub embed_v: Tensor,
    pub embed_v_b: Tensor,
    pub embed_c: Tensor,
    pub embed_c_b: Tensor,
    pub embed_q: Tensor,
    pub embed_q_b: Tensor,
    pub rounds: Vec<AttentionRound>,
    pub mlp: Mlp,
}

/// Closed-form parameter count for a given width and head count.
pub fn param_count(hidden: usize, heads: usize) -> usize {
    let d = hidden / heads;
    let embeddings = (F_V + 1) * hidden + (F_C + 1) * hidden + (F_Q + 1) * hidden;
    let per_head = 3 * hidden * d + d + d; // projections + attention + edge
    let per_round = heads * per_head + hidden * hidden + hidden;
    let mlp = hidden * hidden + hidden + hidden * hidden + hidden + hidden + 1;
    embeddings + ROUNDS * per_round + mlp
}

impl ModelParams {
    /// Seeded uniform init: each matrix draws from [-s, s] with
    /// s = 1/sqrt(fan_in); biases start at zero. Draw order equals flatten
    /// order.
    pub fn init(hidden: usize, heads: usize, seed: u64) -> Result<Self> {
        if hidden == 0 || heads == 0 || hidden % heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "hidden ({hidden}) must be a positive multiple of heads ({heads})"
            )));
        }
        let d = hidden / heads;
        let mut rng = SplitMix64::derive(seed, 0x90de1);
        let mut mat = |rows: usize, cols: usize, fan_in: usize| {
            let s = 1.0 / (fan_in as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| s * (2.0 * rng.next_f64() - 1.0))
                .collect();
            Tensor::from_vec(rows, cols, data)
        };

        let embed_v = mat(F_V, hidden, F_V);
        let embed_v_b = Tensor::zeros(1, hidden);
        let embed_c = mat(F_C, hidden, F_C);
        let embed_c_b = Tensor::zeros(1, hidden);
        let embed_q = mat(F_Q, hidden, F_Q);
        let embed_q_b = Tensor::zeros(1, hidden);

        let mut rounds = Vec::with_capacity(ROUNDS);
        for _ in 0..ROUNDS {
            let mut heads_vec = Vec::with_capacity(heads);
            for _ in 0..heads {
                heads_vec.push(AttentionHead {
                    w_q: mat(hidden, d, hidden),
                    w_k: mat(hidden, d, hidden),
                    w_v: mat(hidden, d, hidden),
                    attn: mat(d, 1, d),
                    edge: mat(1, d, 1),
                });
            }
            rounds.push(AttentionRound {
                heads: heads_vec,
                w_o: mat(hidden, hidden, hidden),
                b_o: Tensor::zeros(1, hidden),
            });
        }

        let mlp = Mlp {
            w1: mat(hidden, hidden, hidden),
            b1: Tensor::zeros(1, hidden),
            w2: mat(hidden, hidden, hidden),
            b2: Tensor::zeros(1, hidden),
            w3: mat(hidden, 1, hidden),
            b3: Tensor::zeros(1, 1),
        };

        Ok(Self {
            hidden,
            heads,
            embed_v,
            embed_v_b,
            embed_c,
            embed_c_b,
            embed_q,
            embed_q_b,
            rounds,
            mlp,
        })
    }

    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![
            &self.embed_v,
            &self.embed_v_b,
            &self.embed_c,
            &self.embed_c_b,
            &self.embed_q,
            &self.embed_q_b,
        ];
        for round in &self.rounds {
            for head in &round.heads {
                out.push(&head.w_q);
                out.push(&head.w_k);
                out.push(&head.w_v);
                out.push(&head.attn);
                out.push(&head.edge);
            }
            out.push(&round.w_o);
            out.push(&round.b_o);
        }
        out.push(&self.mlp.w1);
        out.push(&self.mlp.b1);
        out.push(&self.mlp.w2);
        out.push(&self.mlp.b2);
        out.push(&self.mlp.w3);
        out.push(&self.mlp.b3);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = vec![
            &mut self.embed_v,
            &mut self.embed_v_b,
            &mut self.embed_c,
            &mut self.embed_c_b,
            &mut self.embed_q,
            &mut self.embed_q_b,
        ];
        for round in &mut self.rounds {
            for head in &mut round.heads {
                out.push(&mut head.w_q);
                out.push(&mut head.w_k);
                out.push(&mut head.w_v);
                out.push(&mut head.attn);
                out.push(&mut head.edge);
            }
            out.push(&mut round.w_o);
            out.push(&mut round.b_o);
        }
        out.push(&mut self.mlp.w1);
        out.push(&mut self.mlp.b1);
        out.push(&mut self.mlp.w2);
        out.push(&mut self.mlp.b2);
        out.push(&mut self.mlp.w3);
        out.push(&mut self.mlp.b3);
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(param_count(self.hidden, self.heads));
        for t in self.tensors() {
            flat.extend_from_slice(&t.data);
        }
        flat
    }

    /// Writes a flat vector back into the parameter tensors.
    pub fn unflatten(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != param_count(self.hidden, self.heads) {
            return Err(Error::DimensionMismatch(format!(
                "flat vector has {} entries, model needs {}",
                flat.len(),
                param_count(self.hidden, self.heads)
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let len = t.data.len();
            t.data.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    /// Registers every parameter tensor as a tape leaf, in flatten order,
    /// and returns the structured ids the forward pass navigates.
    pub fn bind(&self, tape: &mut Tape) -> BoundModel {
        let mut flat_ids = Vec::new();
        let push = |tape: &mut Tape, t: &Tensor, ids: &mut Vec<NodeId>| {
            let id = tape.leaf(t.clone());
            ids.push(id);
            id
        };
        let embed_v = push(tape, &self.embed_v, &mut flat_ids);
        let embed_v_b = push(tape, &self.embed_v_b, &mut flat_ids);
        let embed_c = push(tape, &self.embed_c, &mut flat_ids);
        let embed_c_b = push(tape, &self.embed_c_b, &mut flat_ids);
        let embed_q = push(tape, &self.embed_q, &mut flat_ids);
        let embed_q_b = push(tape, &self.embed_q_b, &mut flat_ids);
        let mut rounds = Vec::with_capacity(self.rounds.len());
        for round in &self.rounds {
            let mut heads = Vec::with_capacity(round.heads.len());
            for head in &round.heads {
                heads.push(BoundHead {
                    w_q: push(tape, &head.w_q, &mut flat_ids),
                    w_k: push(tape, &head.w_k, &mut flat_ids),
                    w_v: push(tape, &head.w_v, &mut flat_ids),
                    attn: push(tape, &head.attn, &mut flat_ids),
                    edge: push(tape, &head.edge, &mut flat_ids),
                });
            }
            rounds.push(BoundRound {
                heads,
                w_o: push(tape, &round.w_o, &mut flat_ids),
                b_o: push(tape, &round.b_o, &mut flat_ids),
            });
        }
        let mlp = BoundMlp {
            w1: push(tape, &self.mlp.w1, &mut flat_ids),
            b1: push(tape, &self.mlp.b1, &mut flat_ids),
            w2: push(tape, &self.mlp.w2, &mut flat_ids),
            b2: push(tape, &self.mlp.b2, &mut flat_ids),
            w3: push(tape, &self.mlp.w3, &mut flat_ids),
            b3: push(tape, &self.mlp.b3, &mut flat_ids),
        };
        BoundModel {
            hidden: self.hidden,
            heads: self.heads,
            embed_v,
            embed_v_b,
            embed_c,
            embed_c_b,
            embed_q,
            embed_q_b,
            rounds,
            mlp,
            flat_ids,
        }
    }
}

use super::tape::NodeId;

#[derive(Debug, Clone, Copy)]
pub struct BoundHead {
    pub w_q: NodeId,
    pub w_k: NodeId,
    pub w_v: NodeId,
    pub attn: NodeId,
    pub edge: NodeId,
}

#[derive(Debug, Clone)]
pub struct BoundRound {
    pub heads: Vec<BoundHead>,
    pub w_o: NodeId,
    pub b_o: NodeId,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundMlp {
    pub w1: NodeId,
    pub b1: NodeId,
    pub w2: NodeId,
    pub b2: NodeId,
    pub w3: NodeId,
    pub b3: NodeId,
}

/// Parameter leaves on a tape. `flat_ids` follows flatten order.
#[derive(Debug, Clone)]
pub struct BoundModel {
    pub hidden: usize,
    pub heads: usize,
    pub embed_v: NodeId,
    pub embed_v_b: NodeId,
    pub embed_c: NodeId,
    pub embed_c_b: NodeId,
    pub embed_q: NodeId,
    pub embed_q_b: NodeId,
    pub rounds: Vec<BoundRound>,
    pub mlp: BoundMlp,
    pub flat_ids: Vec<NodeId>,
}

impl BoundModel {
    /// Concatenates the leaf gradients into a flat vector aligned with
    /// `ModelParams::flatten`.
    pub fn collect_gradient(&self, grads: &[Tensor]) -> Vec<f64> {
        let mut flat = Vec::new();
        for &id in &self.flat_ids {
            flat.extend_from_slice(&grads[id.index()].data);
        }
        flat
    }
}

/// Serialized model: config plus base64 of the little-endian flat parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub flat_params: String,
    pub param_count: usize,
    pub seed: u64,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, config: &TrainConfig) -> Self {
        let flat = params.flatten();
        let mut bytes = Vec::with_capacity(flat.len() * 8);
        for v in &flat {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        Self {
            config: config.clone(),
            flat_params: base64::engine::general_purpose::STANDARD.encode(&bytes),
            param_count: flat.len(),
            seed: config.seed,
        }
    }

    pub fn restore(&self) -> Result<ModelParams> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&self.flat_params)
            .map_err(|e| Error::InvalidArgument(format!("bad checkpoint payload: {e}")))?;
        if bytes.len() != self.param_count * 8 {
            return Err(Error::DimensionMismatch(format!(
                "checkpoint has {} bytes, expected {}",
                bytes.len(),
                self.param_count * 8
            )));
        }
        let flat: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut params = ModelParams::init(self.config.hidden, self.config.heads, self.seed)?;
        params.unflatten(&flat)?;
        Ok(params)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_json(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_unflatten_identity() {
        let params = ModelParams::init(8, 2, 42).unwrap();
        let flat = params.flatten();
        assert_eq!(flat.len(), param_count(8, 2));
        let mut other = ModelParams::init(8, 2, 99).unwrap();
        assert_ne!(other.flatten(), flat);
        other.unflatten(&flat).unwrap();
        assert_eq!(other.flatten(), flat);
        assert_eq!(other, params);
    }

    #[test]
    fn param_count_matches_layout() {
        for (h, heads) in [(4, 2), (8, 4), (16, 4), (32, 4)] {
            let p = ModelParams::init(h, heads, 1).unwrap();
            assert_eq!(p.flatten().len(), param_count(h, heads));
        }
    }

    #[test]
    fn init_rejects_bad_dims() {
        assert!(ModelParams::init(10, 4, 0).is_err());
        assert!(ModelParams::init(0, 1, 0).is_err());
    }

    #[test]
    fn checkpoint_round_trip_bit_exact() {
        let config = TrainConfig {
            hidden: 8,
            heads: 2,
            seed: 7,
            ..TrainConfig::default()
        };
        let params = ModelParams::init(8, 2, 7).unwrap();
        let ck = Checkpoint::new(&params, &config);
        let json = ck.to_json_string().unwrap();
        let back = Checkpoint::from_json_str(&json).unwrap();
        let restored = back.restore().unwrap();
        assert_eq!(restored.flatten(), params.flatten());
        assert_eq!(json, back.to_json_string().unwrap());
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = ModelParams::init(8, 2, 5).unwrap();
        let b = ModelParams::init(8, 2, 5).unwrap();
        assert_eq!(a.flatten(), b.flatten());
        let c = ModelParams::init(8, 2, 6).unwrap();
        assert_ne!(a.flatten(), c.flatten());
    }
}
