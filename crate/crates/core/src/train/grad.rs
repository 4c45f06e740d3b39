//! BPR loss and its analytic gradient.
//!
//! [`bpr_loss`] is built from the per-user forward functions and is the
//! reference; [`gradients`] runs a batched forward pass that caches the
//! intermediates needed for backpropagation.

use std::collections::{BTreeSet, HashMap};

use ndarray::Array2;

use super::Triplet;
use crate::graph::RelationKind;
use crate::model::linalg::{axpy, dot, matvec, matvec_split, matvec_t_acc, outer_acc, row, row_mut};
use crate::model::{
    context_aggregate, context_from_aggregates, final_user_embedding, game_context_embedding, leaky_relu,
    neighbor_aggregates, score, social_attention, softmax, user_context_embedding, user_social_embedding, ModelConfig,
    ModelInputs, ModelState, UserComponents, LEAKY_SLOPE, RELATIONS,
};

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(r_ui - r_uj)` for one triplet.
pub fn pair_loss(positive_score: f64, negative_score: f64) -> f64 {
    softplus(negative_score - positive_score)
}

/// Parameter rows a batch reads, sorted. Only these rows are regularized.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Touched {
    pub users: Vec<usize>,
    pub games: Vec<usize>,
}

pub fn touched_rows(inputs: &ModelInputs, config: &ModelConfig, batch: &[Triplet]) -> Touched {
    let mut users: BTreeSet<usize> = batch.iter().map(|t| t.user).collect();
    let mut games = vec![false; inputs.games().len()];
    for t in batch {
        games[t.positive] = true;
        games[t.negative] = true;
    }
    if config.use_social {
        let batch_users: Vec<usize> = users.iter().copied().collect();
        for u in batch_users {
            users.extend(inputs.friends(u));
        }
    }
    if config.use_context {
        let mut engaged = vec![false; games.len()];
        for &v in &users {
            for &(i, _) in inputs.engaged(v) {
                engaged[i] = true;
            }
        }
        for i in (0..engaged.len()).filter(|&i| engaged[i]) {
            for kind in RelationKind::ALL {
                for (j, _) in inputs.neighborhood(kind, i) {
                    games[j] = true;
                }
            }
        }
    }
    Touched {
        users: users.into_iter().collect(),
        games: (0..games.len()).filter(|&i| games[i]).collect(),
    }
}

fn shared_active(name: &str, config: &ModelConfig) -> bool {
    let context = name.starts_with("conv_") || name == "ctx_fuse";
    let social = name.starts_with("att_") || name == "soc_fuse";
    (context && config.use_context) || (social && config.use_social)
}

fn squared_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum()
}

/// `λ ||Θ||²` over the touched rows and the shared parameters of the active pathways.
pub fn regularizer(state: &ModelState, config: &ModelConfig, touched: &Touched, lambda: f64) -> f64 {
    let mut total = 0.0;
    for &u in &touched.users {
        total += squared_norm(row(&state.user_personal, u));
    }
    for &i in &touched.games {
        total += squared_norm(row(&state.game_personal, i));
    }
    for (name, t) in state.tensors().into_iter().skip(2) {
        if shared_active(&name, config) {
            total += squared_norm(t);
        }
    }
    lambda * total
}

/// Batch objective: summed pairwise loss plus the regularizer.
pub fn bpr_loss(state: &ModelState, inputs: &ModelInputs, config: &ModelConfig, batch: &[Triplet], lambda: f64) -> f64 {
    let game_ctx = config.use_context.then(|| {
        let mut g = Array2::zeros((state.num_games(), state.dim()));
        for i in 0..state.num_games() {
            g.row_mut(i).assign(&game_context_embedding(state, inputs, i));
        }
        g
    });
    let attention_input = |v: usize| match &game_ctx {
        Some(g) => user_context_embedding(state, inputs, g, v),
        None => row(&state.user_personal, v).to_vec(),
    };
    let mut embeddings: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut total = 0.0;
    for t in batch {
        let e = embeddings.entry(t.user).or_insert_with(|| {
            let u = t.user;
            let personal = row(&state.user_personal, u).to_vec();
            let context = game_ctx.as_ref().map(|g| user_context_embedding(state, inputs, g, u));
            let social = config.use_social.then(|| {
                let friends = inputs.friends(u);
                let friend_personal: Vec<&[f64]> = friends.iter().map(|&f| row(&state.user_personal, f)).collect();
                let friend_inputs: Vec<Vec<f64>> = friends.iter().map(|&f| attention_input(f)).collect();
                let refs: Vec<&[f64]> = friend_inputs.iter().map(Vec::as_slice).collect();
                let alpha = if friends.is_empty() {
                    Vec::new()
                } else {
                    social_attention(state, &attention_input(u), &refs)
                };
                user_social_embedding(state, &personal, &friend_personal, &alpha)
            });
            final_user_embedding(
                &UserComponents {
                    context,
                    social,
                    personal,
                },
                &config.fusion,
            )
        });
        total += pair_loss(score(state, e, t.positive), score(state, e, t.negative));
    }
    total + regularizer(state, config, &touched_rows(inputs, config, batch), lambda)
}

/// Attention state of one batch user, kept for the backward pass.
struct SocialCache {
    /// Slots of the friends.
    friends: Vec<usize>,
    /// Pre-activation attention scores.
    pre: Vec<f64>,
    alpha: Vec<f64>,
    /// `Σ α_f personal_f`.
    agg: Vec<f64>,
}

/// Loss and gradient of [`bpr_loss`] with respect to every parameter.
pub fn gradients(
    state: &ModelState,
    inputs: &ModelInputs,
    config: &ModelConfig,
    batch: &[Triplet],
    lambda: f64,
) -> (f64, ModelState) {
    let d = state.dim();
    let fusion = config.fusion;
    let mut grad = state.zeros_like();
    let touched = touched_rows(inputs, config, batch);
    let slot: HashMap<usize, usize> = touched.users.iter().enumerate().map(|(s, &u)| (u, s)).collect();
    let n = touched.users.len();

    // Forward over every user the batch reads.
    let aggregates = config.use_context.then(|| neighbor_aggregates(state, inputs));
    let game_ctx = aggregates.as_ref().map(|a| context_from_aggregates(state, a));
    let mut ctx_agg = Array2::<f64>::zeros((n, d));
    let mut ctx = Array2::<f64>::zeros((n, d));
    let mut z = Array2::<f64>::zeros((n, d));
    for (s, &v) in touched.users.iter().enumerate() {
        let personal = row(&state.user_personal, v);
        if let Some(g) = &game_ctx {
            context_aggregate(inputs, g, v, row_mut(&mut ctx_agg, s));
            let mut out = vec![0.0; d];
            matvec_split(&state.ctx_fuse, personal, row(&ctx_agg, s), &mut out);
            row_mut(&mut ctx, s).copy_from_slice(&out);
        }
        if config.use_social {
            let input = if config.use_context { row(&ctx, s) } else { personal };
            let mut out = vec![0.0; d];
            matvec(&state.att_proj, input, &mut out);
            row_mut(&mut z, s).copy_from_slice(&out);
        }
    }

    let a = state.att_vec.as_slice().expect("contiguous");
    let (a_user, a_friend) = a.split_at(d);
    let batch_users: Vec<usize> = batch
        .iter()
        .map(|t| t.user)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut embedding = Array2::<f64>::zeros((n, d));
    let mut social: HashMap<usize, SocialCache> = HashMap::new();
    for &u in &batch_users {
        let s = slot[&u];
        let personal = row(&state.user_personal, u);
        let mut e = vec![0.0; d];
        axpy(fusion.personal(), personal, &mut e);
        if config.use_context {
            axpy(fusion.context(), row(&ctx, s), &mut e);
        }
        if config.use_social {
            let friends: Vec<usize> = inputs.friends(u).iter().map(|f| slot[f]).collect();
            let own = dot(a_user, row(&z, s));
            let pre: Vec<f64> = friends.iter().map(|&fs| own + dot(a_friend, row(&z, fs))).collect();
            let logits: Vec<f64> = pre.iter().map(|&p| leaky_relu(p)).collect();
            let alpha = if friends.is_empty() {
                Vec::new()
            } else {
                softmax(&logits)
            };
            let mut agg = vec![0.0; d];
            for (&f, &w) in inputs.friends(u).iter().zip(&alpha) {
                axpy(w, row(&state.user_personal, f), &mut agg);
            }
            let mut soc = vec![0.0; d];
            matvec_split(&state.soc_fuse, personal, &agg, &mut soc);
            axpy(fusion.social(), &soc, &mut e);
            social.insert(
                u,
                SocialCache {
                    friends,
                    pre,
                    alpha,
                    agg,
                },
            );
        }
        row_mut(&mut embedding, s).copy_from_slice(&e);
    }

    // Pairwise loss and its gradient with respect to scores.
    let mut loss = 0.0;
    let mut g_embedding = Array2::<f64>::zeros((n, d));
    for t in batch {
        let s = slot[&t.user];
        let e = row(&embedding, s);
        let qi = row(&state.game_personal, t.positive);
        let qj = row(&state.game_personal, t.negative);
        let x = dot(e, qi) - dot(e, qj);
        loss += softplus(-x);
        let delta = -sigmoid(-x);
        let ge = row_mut(&mut g_embedding, s);
        axpy(delta, qi, ge);
        axpy(-delta, qj, ge);
        let e = e.to_vec();
        axpy(delta, &e, row_mut(&mut grad.game_personal, t.positive));
        axpy(-delta, &e, row_mut(&mut grad.game_personal, t.negative));
    }

    // Fusion, social pathway and attention.
    let mut g_ctx = Array2::<f64>::zeros((n, d));
    let mut g_z = Array2::<f64>::zeros((n, d));
    let mut g_a = vec![0.0; 2 * d];
    for &u in &batch_users {
        let s = slot[&u];
        let ge = row(&g_embedding, s).to_vec();
        axpy(fusion.personal(), &ge, row_mut(&mut grad.user_personal, u));
        if config.use_context {
            axpy(fusion.context(), &ge, row_mut(&mut g_ctx, s));
        }
        let Some(cache) = social.get(&u) else { continue };
        let g_soc: Vec<f64> = ge.iter().map(|g| fusion.social() * g).collect();
        outer_acc(&mut grad.soc_fuse, &g_soc, row(&state.user_personal, u), &cache.agg);
        matvec_t_acc(&state.soc_fuse, &g_soc, 0, row_mut(&mut grad.user_personal, u));
        let mut g_agg = vec![0.0; d];
        matvec_t_acc(&state.soc_fuse, &g_soc, d, &mut g_agg);
        if cache.friends.is_empty() {
            continue;
        }
        let friend_ids = inputs.friends(u);
        let g_alpha: Vec<f64> = friend_ids
            .iter()
            .map(|&f| dot(&g_agg, row(&state.user_personal, f)))
            .collect();
        for (&f, &w) in friend_ids.iter().zip(&cache.alpha) {
            axpy(w, &g_agg, row_mut(&mut grad.user_personal, f));
        }
        let mean: f64 = cache.alpha.iter().zip(&g_alpha).map(|(w, g)| w * g).sum();
        #[allow(clippy::needless_range_loop)]
        for k in 0..cache.friends.len() {
            let g_logit = cache.alpha[k] * (g_alpha[k] - mean);
            let g_pre = g_logit * if cache.pre[k] > 0.0 { 1.0 } else { LEAKY_SLOPE };
            let fs = cache.friends[k];
            axpy(g_pre, row(&z, s), &mut g_a[..d]);
            axpy(g_pre, row(&z, fs), &mut g_a[d..]);
            axpy(g_pre, a_user, row_mut(&mut g_z, s));
            axpy(g_pre, a_friend, row_mut(&mut g_z, fs));
        }
    }
    grad.att_vec.as_slice_mut().expect("contiguous").copy_from_slice(&g_a);

    // Attention projection back to its inputs.
    if config.use_social {
        for (s, &v) in touched.users.iter().enumerate() {
            let gz = row(&g_z, s);
            if gz.iter().all(|&g| g == 0.0) {
                continue;
            }
            let gz = gz.to_vec();
            if config.use_context {
                let input = row(&ctx, s).to_vec();
                outer_acc(&mut grad.att_proj, &gz, &input, &[]);
                matvec_t_acc(&state.att_proj, &gz, 0, row_mut(&mut g_ctx, s));
            } else {
                outer_acc(&mut grad.att_proj, &gz, row(&state.user_personal, v), &[]);
                matvec_t_acc(&state.att_proj, &gz, 0, row_mut(&mut grad.user_personal, v));
            }
        }
    }

    // Context fusion back to game context embeddings, then through the convolution.
    if let Some(aggregates) = &aggregates {
        let mut g_game_ctx = Array2::<f64>::zeros((state.num_games(), d));
        for (s, &v) in touched.users.iter().enumerate() {
            let gc = row(&g_ctx, s);
            if gc.iter().all(|&g| g == 0.0) {
                continue;
            }
            let gc = gc.to_vec();
            outer_acc(&mut grad.ctx_fuse, &gc, row(&state.user_personal, v), row(&ctx_agg, s));
            matvec_t_acc(&state.ctx_fuse, &gc, 0, row_mut(&mut grad.user_personal, v));
            let mut g_agg = vec![0.0; d];
            matvec_t_acc(&state.ctx_fuse, &gc, d, &mut g_agg);
            for &(i, gamma) in inputs.engaged(v) {
                axpy(gamma, &g_agg, row_mut(&mut g_game_ctx, i));
            }
        }
        let scale = 1.0 / RELATIONS as f64;
        for (c, m) in aggregates.iter().enumerate() {
            grad.conv_weight[c] += &(g_game_ctx.t().dot(m) * scale);
            grad.conv_bias[c] += &(g_game_ctx.sum_axis(ndarray::Axis(0)) * scale);
            let g_m = g_game_ctx.dot(&state.conv_weight[c]) * scale;
            let adj = &inputs.conv[c];
            for j in 0..state.num_games() {
                let r = adj.range(j);
                let target = row_mut(&mut grad.game_personal, j);
                for (&i, &ct) in adj.neighbors[r.clone()].iter().zip(&adj.coef_transposed[r]) {
                    axpy(ct, row(&g_m, i), target);
                }
            }
        }
    }

    // Regularizer.
    let reg = regularizer(state, config, &touched, lambda);
    for &u in &touched.users {
        axpy(
            2.0 * lambda,
            row(&state.user_personal, u),
            row_mut(&mut grad.user_personal, u),
        );
    }
    for &i in &touched.games {
        axpy(
            2.0 * lambda,
            row(&state.game_personal, i),
            row_mut(&mut grad.game_personal, i),
        );
    }
    for ((name, g), (_, p)) in grad.tensors_mut().into_iter().zip(state.tensors()).skip(2) {
        if shared_active(&name, config) {
            axpy(2.0 * lambda, p, g);
        }
    }
    (loss + reg, grad)
}
