use ndarray::{Array1, Array2};
use rayon::prelude::*;

use super::linalg::{axpy, dot, matvec, matvec_split, row};
use super::{FusionWeights, ModelConfig, ModelInputs, ModelState, RELATIONS};
use crate::graph::RelationKind;

/// Negative-side slope of the attention nonlinearity.
pub const LEAKY_SLOPE: f64 = 0.2;

pub fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Contextual embedding of one game: the mean over relations of
/// `W_c (normalized neighbor sum of game embeddings) + b_c`. A relation with
/// no neighbors contributes its bias only.
pub fn game_context_embedding(state: &ModelState, inputs: &ModelInputs, i: usize) -> Array1<f64> {
    let d = state.dim();
    let mut out = Array1::zeros(d);
    let mut agg = vec![0.0; d];
    let mut projected = vec![0.0; d];
    for kind in RelationKind::ALL {
        agg.fill(0.0);
        for (j, coef) in inputs.neighborhood(kind, i) {
            axpy(coef, row(&state.game_personal, j), &mut agg);
        }
        matvec(&state.conv_weight[kind.index()], &agg, &mut projected);
        for k in 0..d {
            out[k] += (projected[k] + state.conv_bias[kind.index()][k]) / RELATIONS as f64;
        }
    }
    out
}

/// Normalized neighbor sums of game embeddings, one `games x d` matrix per relation.
pub(crate) fn neighbor_aggregates(state: &ModelState, inputs: &ModelInputs) -> Vec<Array2<f64>> {
    let d = state.dim();
    let n = state.num_games();
    let q = state.game_personal.as_slice().expect("standard layout");
    inputs
        .conv
        .iter()
        .map(|adj| {
            let mut m = Array2::zeros((n, d));
            m.as_slice_mut()
                .expect("standard layout")
                .par_chunks_mut(d)
                .enumerate()
                .for_each(|(i, out)| {
                    let r = adj.range(i);
                    for (&j, &c) in adj.neighbors[r.clone()].iter().zip(&adj.coef[r]) {
                        axpy(c, &q[j * d..(j + 1) * d], out);
                    }
                });
            m
        })
        .collect()
}

/// Contextual embeddings of all games from precomputed neighbor sums.
pub(crate) fn context_from_aggregates(state: &ModelState, aggregates: &[Array2<f64>]) -> Array2<f64> {
    let scale = 1.0 / RELATIONS as f64;
    let mut out = Array2::zeros((state.num_games(), state.dim()));
    for (c, m) in aggregates.iter().enumerate() {
        out += &m.dot(&state.conv_weight[c].t());
        out += &state.conv_bias[c];
    }
    out *= scale;
    out
}

/// Contextual embeddings of every game, one row per game.
pub fn game_context_embeddings(state: &ModelState, inputs: &ModelInputs) -> Array2<f64> {
    context_from_aggregates(state, &neighbor_aggregates(state, inputs))
}

/// Time-weighted sum of the user's game context embeddings (zero for users
/// without training games).
pub(crate) fn context_aggregate(inputs: &ModelInputs, game_ctx: &Array2<f64>, u: usize, out: &mut [f64]) {
    out.fill(0.0);
    for &(i, gamma) in inputs.engaged(u) {
        axpy(gamma, row(game_ctx, i), out);
    }
}

/// User context embedding: `ctx_fuse (personal ⊕ time-weighted game context)`.
pub fn user_context_embedding(state: &ModelState, inputs: &ModelInputs, game_ctx: &Array2<f64>, u: usize) -> Vec<f64> {
    let d = state.dim();
    let mut agg = vec![0.0; d];
    context_aggregate(inputs, game_ctx, u, &mut agg);
    let mut out = vec![0.0; d];
    matvec_split(&state.ctx_fuse, row(&state.user_personal, u), &agg, &mut out);
    out
}

/// Pre-softmax attention scores of each friend:
/// `LeakyReLU(a · (W x_user ⊕ W x_friend))`.
pub fn attention_logits(state: &ModelState, user: &[f64], friends: &[&[f64]]) -> Vec<f64> {
    let d = state.dim();
    let a = state.att_vec.as_slice().expect("contiguous");
    let mut z = vec![0.0; d];
    matvec(&state.att_proj, user, &mut z);
    let own = dot(&a[..d], &z);
    friends
        .iter()
        .map(|f| {
            matvec(&state.att_proj, f, &mut z);
            leaky_relu(own + dot(&a[d..], &z))
        })
        .collect()
}

/// Softmax attention over friends, given the attention inputs of the user
/// and of each friend (their context embeddings in the full model).
pub fn social_attention(state: &ModelState, user: &[f64], friends: &[&[f64]]) -> Vec<f64> {
    softmax(&attention_logits(state, user, friends))
}

/// `soc_fuse (personal ⊕ Σ α_f personal_f)`; friendless users aggregate to zero.
pub fn user_social_embedding(state: &ModelState, personal: &[f64], friends: &[&[f64]], alpha: &[f64]) -> Vec<f64> {
    let d = state.dim();
    let mut agg = vec![0.0; d];
    for (f, &w) in friends.iter().zip(alpha) {
        axpy(w, f, &mut agg);
    }
    let mut out = vec![0.0; d];
    matvec_split(&state.soc_fuse, personal, &agg, &mut out);
    out
}

/// The three user representations that the predictor fuses.
#[derive(Clone, Debug, PartialEq)]
pub struct UserComponents {
    pub context: Option<Vec<f64>>,
    pub social: Option<Vec<f64>>,
    pub personal: Vec<f64>,
}

/// `w_context e_c + w_social e_s + w_self e_p`; absent pathways contribute nothing.
pub fn final_user_embedding(parts: &UserComponents, weights: &FusionWeights) -> Vec<f64> {
    let mut out = vec![0.0; parts.personal.len()];
    if let Some(c) = &parts.context {
        axpy(weights.context(), c, &mut out);
    }
    if let Some(s) = &parts.social {
        axpy(weights.social(), s, &mut out);
    }
    axpy(weights.personal(), &parts.personal, &mut out);
    out
}

pub fn score(state: &ModelState, user_embedding: &[f64], i: usize) -> f64 {
    dot(user_embedding, row(&state.game_personal, i))
}

/// Attention input of a user: context embedding when that pathway is on,
/// otherwise the personal embedding.
fn attention_input(
    state: &ModelState,
    inputs: &ModelInputs,
    config: &ModelConfig,
    game_ctx: Option<&Array2<f64>>,
    v: usize,
) -> Vec<f64> {
    match (config.use_context, game_ctx) {
        (true, Some(g)) => user_context_embedding(state, inputs, g, v),
        _ => row(&state.user_personal, v).to_vec(),
    }
}

pub(crate) fn user_components(
    state: &ModelState,
    inputs: &ModelInputs,
    config: &ModelConfig,
    game_ctx: Option<&Array2<f64>>,
    u: usize,
) -> UserComponents {
    let personal = row(&state.user_personal, u).to_vec();
    let context = match (config.use_context, game_ctx) {
        (true, Some(g)) => Some(user_context_embedding(state, inputs, g, u)),
        _ => None,
    };
    let social = config.use_social.then(|| {
        let friends = inputs.friends(u);
        let friend_personal: Vec<&[f64]> = friends.iter().map(|&f| row(&state.user_personal, f)).collect();
        if friends.is_empty() {
            return user_social_embedding(state, &personal, &[], &[]);
        }
        let own = match &context {
            Some(c) => c.clone(),
            None => attention_input(state, inputs, config, game_ctx, u),
        };
        let friend_inputs: Vec<Vec<f64>> = friends
            .iter()
            .map(|&f| attention_input(state, inputs, config, game_ctx, f))
            .collect();
        let refs: Vec<&[f64]> = friend_inputs.iter().map(Vec::as_slice).collect();
        let alpha = social_attention(state, &own, &refs);
        user_social_embedding(state, &personal, &friend_personal, &alpha)
    });
    UserComponents {
        context,
        social,
        personal,
    }
}

/// Final embeddings for the given users, one row each.
pub fn user_embeddings(state: &ModelState, inputs: &ModelInputs, config: &ModelConfig, users: &[usize]) -> Array2<f64> {
    let d = state.dim();
    let game_ctx = config.use_context.then(|| game_context_embeddings(state, inputs));
    let mut out = Array2::zeros((users.len(), d));
    out.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(d)
        .zip(users.par_iter())
        .for_each(|(dst, &u)| {
            let parts = user_components(state, inputs, config, game_ctx.as_ref(), u);
            dst.copy_from_slice(&final_user_embedding(&parts, &config.fusion));
        });
    out
}

/// Scores of user `u` against every game, in game-index order.
pub fn score_all(state: &ModelState, inputs: &ModelInputs, config: &ModelConfig, u: usize) -> Vec<f64> {
    let e = user_embeddings(state, inputs, config, &[u]);
    let e = row(&e, 0);
    (0..state.num_games()).map(|i| score(state, e, i)).collect()
}
