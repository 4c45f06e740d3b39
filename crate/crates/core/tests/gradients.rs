mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scgrec::eval::{ablation_variant, Ablation};
use scgrec::graph::RelationKind;
use scgrec::model::{ModelConfig, ModelInputs, ModelState, Normalization};
use scgrec::train::gradcheck::check_gradients;
use scgrec::train::{bpr_loss, epoch_triplets, gradients};

fn configs() -> Vec<(&'static str, ModelConfig)> {
    let full = ModelConfig::default();
    vec![
        ("full", full),
        ("no_social", ablation_variant(&full, Ablation::A)),
        ("no_context", ablation_variant(&full, Ablation::B)),
        ("personal_only", ablation_variant(&full, Ablation::C)),
    ]
}

fn assert_check(inputs: &ModelInputs, config: &ModelConfig, label: &str, seed: u64) {
    let state = ModelState::init(inputs.users().len(), inputs.games().len(), 4, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (batch, _) = epoch_triplets(inputs, 1, &mut rng);
    let report = check_gradients(&state, inputs, config, &batch, 1e-2, 1e-4);
    for t in &report.tensors {
        assert_eq!(
            t.failures, 0,
            "{label}: {} rel {:.3e} abs {:.3e}",
            t.tensor, t.max_relative_error, t.max_absolute_error_small
        );
    }
    assert!(report.checked_entries() > 200);
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let inputs = common::tiny_inputs();
    for (label, config) in configs() {
        assert_check(&inputs, &config, label, 3);
    }
}

#[test]
fn analytic_gradient_matches_with_symmetric_normalization() {
    let d = common::tiny_dataset();
    let g = common::tiny_graph(&d);
    let inputs = ModelInputs::new(&d, &g, Normalization::Symmetric).unwrap();
    assert_check(&inputs, &ModelConfig::default(), "symmetric", 11);
}

#[test]
fn batched_loss_equals_reference_loss() {
    let inputs = common::tiny_inputs();
    for (label, config) in configs() {
        let state = ModelState::init(inputs.users().len(), inputs.games().len(), 6, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (batch, _) = epoch_triplets(&inputs, 2, &mut rng);
        let (loss, _) = gradients(&state, &inputs, &config, &batch, 1e-3);
        let reference = bpr_loss(&state, &inputs, &config, &batch, 1e-3);
        assert!(
            (loss - reference).abs() < 1e-10 * reference.abs().max(1.0),
            "{label}: {loss} vs {reference}"
        );
    }
}

#[test]
fn every_relation_has_edges_in_fixture() {
    let d = common::tiny_dataset();
    let g = common::tiny_graph(&d);
    for kind in RelationKind::ALL {
        assert!(g.relation(kind).edge_count() > 0, "{kind} empty");
    }
}

#[test]
fn inactive_pathways_get_no_gradient() {
    let inputs = common::tiny_inputs();
    let config = ablation_variant(&ModelConfig::default(), Ablation::C);
    let state = ModelState::init(inputs.users().len(), inputs.games().len(), 4, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (batch, _) = epoch_triplets(&inputs, 1, &mut rng);
    let (_, grad) = gradients(&state, &inputs, &config, &batch, 1e-2);
    for (name, t) in grad.tensors().into_iter().skip(2) {
        assert!(t.iter().all(|&v| v == 0.0), "{name}");
    }
}

#[test]
fn full_model_reaches_every_tensor() {
    let inputs = common::tiny_inputs();
    let state = ModelState::init(inputs.users().len(), inputs.games().len(), 4, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (batch, _) = epoch_triplets(&inputs, 1, &mut rng);
    let (_, grad) = gradients(&state, &inputs, &ModelConfig::default(), &batch, 0.0);
    for (name, t) in grad.tensors() {
        let norm: f64 = t.iter().map(|v| v * v).sum();
        assert!(norm > 1e-12, "{name} has no gradient");
    }
}
