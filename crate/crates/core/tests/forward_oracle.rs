//! The model's forward pass against a straight-line recomputation from the raw tables.

// Index loops mirror the written formulas.
#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use scgrec::data::Dataset;
use scgrec::graph::{ContextGraph, RelationKind};
use scgrec::model::{score_all, FusionWeights, ModelConfig, ModelInputs, ModelState, Normalization};

fn mv(w: &Array2<f64>, x: &[f64]) -> Vec<f64> {
    (0..w.nrows())
        .map(|r| (0..x.len()).map(|c| w[[r, c]] * x[c]).sum())
        .collect()
}

fn cat(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().chain(b).copied().collect()
}

/// Scores of every (user, game) pair, keyed by ids.
fn oracle_scores(d: &Dataset, graph: &ContextGraph, s: &ModelState, config: &ModelConfig) -> BTreeMap<(u64, u64), f64> {
    let dim = s.dim();
    let users: Vec<u64> = d
        .engagements()
        .iter()
        .map(|e| e.user_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let games: Vec<u64> = d.catalog().keys().copied().collect();
    let uidx = |u: u64| users.iter().position(|&x| x == u).unwrap();
    let gidx = |g: u64| games.iter().position(|&x| x == g).unwrap();
    let p = |u: u64| s.user_personal.row(uidx(u)).to_vec();
    let q = |g: u64| s.game_personal.row(gidx(g)).to_vec();

    let mut game_ctx: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for &g in &games {
        let mut out = vec![0.0; dim];
        for kind in RelationKind::ALL {
            let nbrs: Vec<u64> = graph
                .edges(kind)
                .into_iter()
                .filter_map(|(a, b, _)| {
                    if a == g {
                        Some(b)
                    } else if b == g {
                        Some(a)
                    } else {
                        None
                    }
                })
                .collect();
            let mut mean = vec![0.0; dim];
            for &j in &nbrs {
                for k in 0..dim {
                    mean[k] += q(j)[k] / nbrs.len() as f64;
                }
            }
            let w = mv(&s.conv_weight[kind.index()], &mean);
            for k in 0..dim {
                out[k] += (w[k] + s.conv_bias[kind.index()][k]) / 5.0;
            }
        }
        game_ctx.insert(g, out);
    }

    let ctx = |u: u64| {
        let mine: Vec<_> = d.engagements().iter().filter(|e| e.user_id == u).collect();
        let pct: Vec<f64> = mine
            .iter()
            .map(|e| {
                let all: Vec<f64> = d
                    .engagements()
                    .iter()
                    .filter(|x| x.game_id == e.game_id)
                    .map(|x| x.dwelling_minutes)
                    .collect();
                all.iter().filter(|&&t| t <= e.dwelling_minutes).count() as f64 / all.len() as f64
            })
            .collect();
        let total: f64 = pct.iter().sum();
        let mut agg = vec![0.0; dim];
        for (e, w) in mine.iter().zip(&pct) {
            for k in 0..dim {
                agg[k] += w / total * game_ctx[&e.game_id][k];
            }
        }
        mv(&s.ctx_fuse, &cat(&p(u), &agg))
    };

    let mut out = BTreeMap::new();
    for &u in &users {
        let c = ctx(u);
        let friends: Vec<u64> = d
            .social()
            .iter()
            .filter_map(|e| {
                if e.user_a == u {
                    Some(e.user_b)
                } else if e.user_b == u {
                    Some(e.user_a)
                } else {
                    None
                }
            })
            .collect();
        let x = |v: u64| if config.use_context { ctx(v) } else { p(v) };
        let a = s.att_vec.to_vec();
        let zu = mv(&s.att_proj, &x(u));
        let logits: Vec<f64> = friends
            .iter()
            .map(|&f| {
                let zf = mv(&s.att_proj, &x(f));
                let v: f64 = (0..dim).map(|k| a[k] * zu[k] + a[dim + k] * zf[k]).sum();
                if v > 0.0 {
                    v
                } else {
                    0.2 * v
                }
            })
            .collect();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
        let mut aggp = vec![0.0; dim];
        for (&f, l) in friends.iter().zip(&logits) {
            for k in 0..dim {
                aggp[k] += (l - m).exp() / z * p(f)[k];
            }
        }
        let soc = mv(&s.soc_fuse, &cat(&p(u), &aggp));
        let w = config.fusion;
        let e: Vec<f64> = (0..dim)
            .map(|k| {
                let mut v = w.personal() * p(u)[k];
                if config.use_context {
                    v += w.context() * c[k];
                }
                if config.use_social {
                    v += w.social() * soc[k];
                }
                v
            })
            .collect();
        for &g in &games {
            out.insert((u, g), (0..dim).map(|k| e[k] * q(g)[k]).sum());
        }
    }
    out
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn forward_pass_matches_straight_line_oracle() {
    let d = common::tiny_dataset();
    let graph = common::tiny_graph(&d);
    let inputs = ModelInputs::new(&d, &graph, Normalization::Mean).unwrap();
    for (dim, seed) in [(4, 0), (8, 1), (3, 2)] {
        let s = ModelState::init(5, 8, dim, seed).unwrap();
        for config in [
            ModelConfig::default(),
            ModelConfig {
                use_context: false,
                ..ModelConfig::default()
            },
            ModelConfig {
                use_social: false,
                ..ModelConfig::default()
            },
        ] {
            let expect = oracle_scores(&d, &graph, &s, &config);
            for (u, &uid) in inputs.users().iter().enumerate() {
                let got = score_all(&s, &inputs, &config, u);
                for (i, &gid) in inputs.games().iter().enumerate() {
                    let e = expect[&(uid, gid)];
                    assert!(close(got[i], e), "user {uid} game {gid}: {} vs {e}", got[i]);
                }
            }
        }
    }
}

#[test]
fn relabeling_ids_permutes_scores() {
    let d = common::tiny_dataset();
    let graph = common::tiny_graph(&d);
    let inputs = ModelInputs::new(&d, &graph, Normalization::Mean).unwrap();
    let s = ModelState::init(5, 8, 4, 7).unwrap();
    let config = ModelConfig::default();

    // Reverses id order for both users and games.
    let ru = |u: u64| 100 - u;
    let rg = |g: u64| 1000 - g;
    let engagements = d
        .engagements()
        .iter()
        .map(|e| common::eng(ru(e.user_id), rg(e.game_id), e.dwelling_minutes))
        .collect();
    let social: Vec<(u64, u64)> = d.social().iter().map(|e| (ru(e.user_a), ru(e.user_b))).collect();
    let catalog: Vec<_> = d
        .catalog()
        .values()
        .map(|g| {
            let mut g = g.clone();
            g.game_id = rg(g.game_id);
            g
        })
        .collect();
    let d2 = Dataset::new(engagements, social, catalog).0;
    let graph2 = common::tiny_graph(&d2);
    let inputs2 = ModelInputs::new(&d2, &graph2, Normalization::Mean).unwrap();
    let mut s2 = s.clone();
    for (u, &uid) in inputs.users().iter().enumerate() {
        let u2 = inputs2.user_index(ru(uid)).unwrap();
        s2.user_personal.row_mut(u2).assign(&s.user_personal.row(u));
    }
    for (i, &gid) in inputs.games().iter().enumerate() {
        let i2 = inputs2.game_index(rg(gid)).unwrap();
        s2.game_personal.row_mut(i2).assign(&s.game_personal.row(i));
    }
    for (u, &uid) in inputs.users().iter().enumerate() {
        let a = score_all(&s, &inputs, &config, u);
        let b = score_all(&s2, &inputs2, &config, inputs2.user_index(ru(uid)).unwrap());
        for (i, &gid) in inputs.games().iter().enumerate() {
            let i2 = inputs2.game_index(rg(gid)).unwrap();
            assert!(close(a[i], b[i2]), "user {uid} game {gid}");
        }
    }
}

#[test]
fn personal_only_weights_ignore_other_parameters() {
    let inputs = common::tiny_inputs();
    let config = ModelConfig::full(FusionWeights::personal_only());
    let s = ModelState::init(5, 8, 4, 3).unwrap();
    let mut other = ModelState::init(5, 8, 4, 99).unwrap();
    other.user_personal = s.user_personal.clone();
    other.game_personal = s.game_personal.clone();
    for u in 0..5 {
        let a = score_all(&s, &inputs, &config, u);
        let b = score_all(&other, &inputs, &config, u);
        assert_eq!(a, b);
        for (i, v) in a.iter().enumerate() {
            let direct: f64 = s.user_personal.row(u).dot(&s.game_personal.row(i));
            assert!(close(*v, direct));
        }
    }
}

#[test]
fn empty_neighborhoods_give_bias_only() {
    let d = common::tiny_dataset();
    let graph = ContextGraph::assemble(
        &d.games(),
        RelationKind::ALL
            .iter()
            .map(|&k| scgrec::graph::RelationEdges::new(k))
            .collect(),
    )
    .unwrap();
    let inputs = ModelInputs::new(&d, &graph, Normalization::Mean).unwrap();
    let mut s = ModelState::init(5, 8, 3, 0).unwrap();
    let g = scgrec::model::game_context_embedding(&s, &inputs, 0);
    assert!(g.iter().all(|&v| v == 0.0));
    for b in &mut s.conv_bias {
        b.fill(0.5);
    }
    let g = scgrec::model::game_context_embedding(&s, &inputs, 0);
    assert!(g.iter().all(|&v| (v - 0.5).abs() < 1e-15));
}

#[test]
fn single_neighbor_with_identity_weight_returns_its_embedding() {
    let d = common::tiny_dataset();
    let mut edges: Vec<_> = RelationKind::ALL
        .iter()
        .map(|&k| scgrec::graph::RelationEdges::new(k))
        .collect();
    edges[0].insert(10, 13, 1.0);
    let graph = ContextGraph::assemble(&d.games(), edges).unwrap();
    let inputs = ModelInputs::new(&d, &graph, Normalization::Mean).unwrap();
    let mut s = ModelState::init(5, 8, 3, 0).unwrap();
    for w in &mut s.conv_weight {
        w.fill(0.0);
    }
    s.conv_weight[0] = Array2::eye(3) * 5.0;
    let g = scgrec::model::game_context_embedding(&s, &inputs, 0);
    let expected = s.game_personal.row(inputs.game_index(13).unwrap());
    for k in 0..3 {
        assert!((g[k] - expected[k]).abs() < 1e-15);
    }
}
