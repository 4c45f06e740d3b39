#![allow(dead_code)]

use scgrec::data::{Dataset, Engagement};
use scgrec::graph::{build_context_graph, ContextGraph};
use scgrec::model::{ModelInputs, Normalization};
use scgrec::train::gradcheck::{reference_dataset, reference_graph_config};

pub fn eng(user_id: u64, game_id: u64, dwelling_minutes: f64) -> Engagement {
    Engagement {
        user_id,
        game_id,
        dwelling_minutes,
    }
}

/// Five users, eight games, every relation non-empty, user 5 friendless.
pub fn tiny_dataset() -> Dataset {
    reference_dataset()
}

pub fn tiny_graph(d: &Dataset) -> ContextGraph {
    build_context_graph(d, &reference_graph_config()).unwrap().0
}

pub fn tiny_inputs() -> ModelInputs {
    let d = tiny_dataset();
    let g = tiny_graph(&d);
    ModelInputs::new(&d, &g, Normalization::Mean).unwrap()
}
