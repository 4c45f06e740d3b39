//! The recommendation model: personalized embeddings refined by a
//! time-weighted game-context pathway and an attention-weighted social
//! pathway, fused into one user vector scored against game embeddings.

pub mod checkpoint;
mod forward;
mod inputs;
pub mod linalg;
mod percentile;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::RelationKind;

pub use forward::{
    attention_logits, final_user_embedding, game_context_embedding, game_context_embeddings, leaky_relu, score,
    score_all, social_attention, softmax, user_context_embedding, user_embeddings, user_social_embedding,
    UserComponents, LEAKY_SLOPE,
};
pub(crate) use forward::{context_aggregate, context_from_aggregates, neighbor_aggregates, user_components};
pub use inputs::{ModelInputs, Normalization};
pub use percentile::{percentile, time_weights, PercentileIndex};

/// Number of context relations.
pub const RELATIONS: usize = RelationKind::ALL.len();

/// Every trainable parameter. Gradients use the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    /// One row per user.
    pub user_personal: Array2<f64>,
    /// One row per game; also the node features of the context convolution.
    pub game_personal: Array2<f64>,
    /// Per-relation `d x d` convolution weight, in [`RelationKind::ALL`] order.
    pub conv_weight: Vec<Array2<f64>>,
    pub conv_bias: Vec<Array1<f64>>,
    /// `d x 2d` projection of `personal ⊕ time-weighted context`.
    pub ctx_fuse: Array2<f64>,
    /// `d x d` projection applied before the attention vector.
    pub att_proj: Array2<f64>,
    /// Length `2d`; first half scores the user, second half the friend.
    pub att_vec: Array1<f64>,
    /// `d x 2d` projection of `personal ⊕ friend aggregate`.
    pub soc_fuse: Array2<f64>,
}

impl ModelState {
    pub fn zeros(users: usize, games: usize, dim: usize) -> Self {
        ModelState {
            user_personal: Array2::zeros((users, dim)),
            game_personal: Array2::zeros((games, dim)),
            conv_weight: (0..RELATIONS).map(|_| Array2::zeros((dim, dim))).collect(),
            conv_bias: (0..RELATIONS).map(|_| Array1::zeros(dim)).collect(),
            ctx_fuse: Array2::zeros((dim, 2 * dim)),
            att_proj: Array2::zeros((dim, dim)),
            att_vec: Array1::zeros(2 * dim),
            soc_fuse: Array2::zeros((dim, 2 * dim)),
        }
    }

    /// Embeddings, weight matrices and the attention vector drawn from
    /// `U[-1/sqrt(d), 1/sqrt(d)]`; biases zero.
    pub fn init(users: usize, games: usize, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding size must be >= 1".into()));
        }
        let mut state = Self::zeros(users, games, dim);
        let bound = 1.0 / (dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, values) in state.tensors_mut() {
            if name.starts_with("conv_bias") {
                continue;
            }
            for v in values {
                *v = rng.random_range(-bound..=bound);
            }
        }
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.user_personal.ncols()
    }

    pub fn num_users(&self) -> usize {
        self.user_personal.nrows()
    }

    pub fn num_games(&self) -> usize {
        self.game_personal.nrows()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.num_users(), self.num_games(), self.dim())
    }

    /// Named flat views of every tensor in a fixed order (the checkpoint order).
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        fn slice(a: &Array2<f64>) -> &[f64] {
            a.as_slice().expect("standard layout")
        }
        let mut out: Vec<(String, &[f64])> = vec![
            ("user_personal".into(), slice(&self.user_personal)),
            ("game_personal".into(), slice(&self.game_personal)),
        ];
        for (kind, w) in RelationKind::ALL.iter().zip(&self.conv_weight) {
            out.push((format!("conv_weight.{kind}"), slice(w)));
        }
        for (kind, b) in RelationKind::ALL.iter().zip(&self.conv_bias) {
            out.push((format!("conv_bias.{kind}"), b.as_slice().expect("contiguous")));
        }
        out.push(("ctx_fuse".into(), slice(&self.ctx_fuse)));
        out.push(("att_proj".into(), slice(&self.att_proj)));
        out.push(("att_vec".into(), self.att_vec.as_slice().expect("contiguous")));
        out.push(("soc_fuse".into(), slice(&self.soc_fuse)));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = vec![
            (
                "user_personal".into(),
                self.user_personal.as_slice_mut().expect("standard layout"),
            ),
            (
                "game_personal".into(),
                self.game_personal.as_slice_mut().expect("standard layout"),
            ),
        ];
        for (kind, w) in RelationKind::ALL.iter().zip(self.conv_weight.iter_mut()) {
            out.push((
                format!("conv_weight.{kind}"),
                w.as_slice_mut().expect("standard layout"),
            ));
        }
        for (kind, b) in RelationKind::ALL.iter().zip(self.conv_bias.iter_mut()) {
            out.push((format!("conv_bias.{kind}"), b.as_slice_mut().expect("contiguous")));
        }
        out.push((
            "ctx_fuse".into(),
            self.ctx_fuse.as_slice_mut().expect("standard layout"),
        ));
        out.push((
            "att_proj".into(),
            self.att_proj.as_slice_mut().expect("standard layout"),
        ));
        out.push(("att_vec".into(), self.att_vec.as_slice_mut().expect("contiguous")));
        out.push((
            "soc_fuse".into(),
            self.soc_fuse.as_slice_mut().expect("standard layout"),
        ));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

/// Weights of the context, social and personal user embeddings. The personal
/// weight is always `1 - w_context - w_social`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFusionWeights")]
pub struct FusionWeights {
    w_context: f64,
    w_social: f64,
    w_self: f64,
}

impl FusionWeights {
    pub fn new(w_context: f64, w_social: f64) -> Result<Self> {
        let w_self = 1.0 - w_context - w_social;
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        // Allow for rounding in the complement, e.g. 1 - 0.7 - 0.3.
        if !unit(w_context) || !unit(w_social) || w_self < -1e-12 {
            return Err(Error::InvalidArgument(format!(
                "fusion weights must lie in [0, 1] with w_context + w_social <= 1, got context {w_context}, social {w_social}"
            )));
        }
        Ok(FusionWeights {
            w_context,
            w_social,
            w_self: w_self.max(0.0),
        })
    }

    /// Best setting reported for the full model: context 0.5, social 0.1.
    pub fn tuned() -> Self {
        FusionWeights::new(0.5, 0.1).expect("valid weights")
    }

    pub fn personal_only() -> Self {
        FusionWeights::new(0.0, 0.0).expect("valid weights")
    }

    pub fn context(&self) -> f64 {
        self.w_context
    }

    pub fn social(&self) -> f64 {
        self.w_social
    }

    pub fn personal(&self) -> f64 {
        self.w_self
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFusionWeights {
    w_context: f64,
    w_social: f64,
    w_self: f64,
}

impl TryFrom<RawFusionWeights> for FusionWeights {
    type Error = Error;

    fn try_from(raw: RawFusionWeights) -> Result<Self> {
        let w = FusionWeights::new(raw.w_context, raw.w_social)?;
        if (w.w_self - raw.w_self).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "w_self {} is not 1 - w_context - w_social",
                raw.w_self
            )));
        }
        Ok(w)
    }
}

impl Default for FusionWeights {
    fn default() -> Self {
        FusionWeights::tuned()
    }
}

/// Which pathways the forward pass evaluates, and how they are weighted.
///
/// With the context pathway disabled the attention scores friends by their
/// personal embeddings instead of their contextual ones, so the social
/// pathway never reads the context graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub fusion: FusionWeights,
    pub use_context: bool,
    pub use_social: bool,
}

impl ModelConfig {
    pub fn full(fusion: FusionWeights) -> Self {
        ModelConfig {
            fusion,
            use_context: true,
            use_social: true,
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::full(FusionWeights::tuned())
    }
}
