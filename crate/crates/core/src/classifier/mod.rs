//! Stage two: classify supertokens with stacked pre-norm attention blocks.
//!
//! Tokens enter without positional information, so the model is equivariant
//! to token order. Each block is
//!
//! ```text
//! X ← X + MultiHeadAttention(LayerNorm(X)) Wo + bo
//! X ← X + GELU(LayerNorm(X) W1 + b1) W2 + b2
//! ```
//!
//! followed by a final LayerNorm, a linear head and a row softmax. All
//! parameters live in one flat buffer whose tensor order is fixed by
//! [`ParamLayout`]; gradients, optimizer state and checkpoints share it.

mod checkpoint;
mod gradcheck;
pub(crate) mod linalg;
mod model;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};
pub use gradcheck::{grad_check, GradCheckReport};
pub use model::{attention_maps, backward, forward, loss_and_gradients, soft_ce_loss, TokenProbs, PROB_FLOOR};
pub use train::{cosine_lr, train, train_from, Adam, EpochLog, TrainConfig, TrainOutcome};

use std::ops::Range;

use crate::error::{invalid, Result};
use crate::features::glorot_uniform;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub dim: usize,
    pub heads: usize,
    pub blocks: usize,
    pub classes: usize,
    /// Hidden width of the MLP, `mlp_ratio * dim`.
    pub mlp_ratio: usize,
}

impl ModelConfig {
    pub fn new(dim: usize, classes: usize) -> Self {
        Self { dim, heads: 4, blocks: 2, classes, mlp_ratio: 4 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.heads == 0 || self.classes == 0 || self.mlp_ratio == 0 {
            return Err(invalid!("model dimensions must be ≥ 1 ({self:?})"));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(invalid!("heads ({}) must divide dim ({})", self.heads, self.dim));
        }
        Ok(())
    }

    pub fn hidden(&self) -> usize {
        self.dim * self.mlp_ratio
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }
}

/// One named tensor inside the flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockRanges {
    pub ln1_gain: Range<usize>,
    pub ln1_bias: Range<usize>,
    pub query: Range<usize>,
    pub key: Range<usize>,
    pub value: Range<usize>,
    pub out_proj: Range<usize>,
    pub out_bias: Range<usize>,
    pub ln2_gain: Range<usize>,
    pub ln2_bias: Range<usize>,
    pub mlp_in: Range<usize>,
    pub mlp_in_bias: Range<usize>,
    pub mlp_out: Range<usize>,
    pub mlp_out_bias: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub blocks: Vec<BlockRanges>,
    pub final_gain: Range<usize>,
    pub final_bias: Range<usize>,
    pub head: Range<usize>,
    pub head_bias: Range<usize>,
    pub tensors: Vec<TensorSpec>,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let (c, hd, k) = (cfg.dim, cfg.hidden(), cfg.classes);
        let mut tensors = Vec::new();
        let mut offset = 0;
        let mut take = |name: String, rows: usize, cols: usize| {
            let range = offset..offset + rows * cols;
            offset += rows * cols;
            tensors.push(TensorSpec { name, rows, cols, range: range.clone() });
            range
        };
        let blocks = (0..cfg.blocks)
            .map(|b| BlockRanges {
                ln1_gain: take(format!("block{b}.ln1.gain"), 1, c),
                ln1_bias: take(format!("block{b}.ln1.bias"), 1, c),
                query: take(format!("block{b}.attn.query"), c, c),
                key: take(format!("block{b}.attn.key"), c, c),
                value: take(format!("block{b}.attn.value"), c, c),
                out_proj: take(format!("block{b}.attn.out"), c, c),
                out_bias: take(format!("block{b}.attn.out_bias"), 1, c),
                ln2_gain: take(format!("block{b}.ln2.gain"), 1, c),
                ln2_bias: take(format!("block{b}.ln2.bias"), 1, c),
                mlp_in: take(format!("block{b}.mlp.in"), c, hd),
                mlp_in_bias: take(format!("block{b}.mlp.in_bias"), 1, hd),
                mlp_out: take(format!("block{b}.mlp.out"), hd, c),
                mlp_out_bias: take(format!("block{b}.mlp.out_bias"), 1, c),
            })
            .collect();
        let final_gain = take("final.ln.gain".into(), 1, c);
        let final_bias = take("final.ln.bias".into(), 1, c);
        let head = take("head.weight".into(), c, k);
        let head_bias = take("head.bias".into(), 1, k);
        Self { blocks, final_gain, final_bias, head, head_bias, tensors, total: offset }
    }
}

/// Model weights in one flat buffer laid out by [`ParamLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub config: ModelConfig,
    pub seed: u64,
    pub layout: ParamLayout,
    pub values: Vec<f64>,
}

impl ClassifierParams {
    /// Glorot-uniform matrices, unit LayerNorm gains, zero biases.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let mut values = vec![0.0; layout.total];
        let mut rng = SeededRng::new(seed);
        for t in &layout.tensors {
            let v = &mut values[t.range.clone()];
            if t.name.ends_with("gain") {
                v.fill(1.0);
            } else if t.rows > 1 {
                v.copy_from_slice(&glorot_uniform(&mut rng, t.rows, t.cols, t.rows * t.cols));
            }
        }
        Ok(Self { config, seed, layout, values })
    }

    pub fn from_values(config: ModelConfig, seed: u64, values: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        if values.len() != layout.total {
            return Err(invalid!("parameter buffer has {} values, layout needs {}", values.len(), layout.total));
        }
        Ok(Self { config, seed, layout, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tensor(&self, range: &Range<usize>) -> &[f64] {
        &self.values[range.clone()]
    }
}

/// Gradient buffer with the same layout as [`ClassifierParams::values`].
pub type Gradients = Vec<f64>;
