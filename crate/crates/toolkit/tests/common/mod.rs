#![allow(dead_code)]

use duck_toolkit::{parse_config, ExperimentConfig};

/// Four well separated blob classes and a small network: trains in well under
/// a second, which keeps the pipeline tests cheap.
pub const SMALL: &str = r#"
[dataset]
kind = "blobs"
classes = 4
dim = 8
train_per_class = 60
test_per_class = 30
spread = 0.2
seed = 7

[model]
hidden = [32, 16]
embedding_dim = 8
epochs = 40
batch_size = 32
seed = 3
"#;

pub fn small(extra: &str) -> ExperimentConfig {
    parse_config(&format!("{extra}\n{SMALL}")).unwrap()
}

pub fn small_cr(extra: &str, forget_sets: &str) -> ExperimentConfig {
    small(&format!("{extra}\n[cr]\nforget_sets = {forget_sets}\n"))
}
