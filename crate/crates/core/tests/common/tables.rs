//! Row-by-row transcription of the architecture tables, read with the tables' own conventions:
//! - an `Input` row gives the input width;
//! - in head tables (no `Input` row) the first `Linear` row gives the input
//!   width and the following row the output width;
//! - otherwise a `Linear` row gives the output width;
//! - `Output (Linear)` is a final linear layer, while a bare `Output` row
//!   only names the width produced by the preceding layer;
//! - `Sigmoid` is a final linear layer to one logit (the sigmoid itself is
//!   applied inside the binary cross-entropy).

use semifit::nets::{ArchConfig, LayerSpec, NetSpec};

pub type Table = &'static [(&'static str, &'static str)];

pub const CLS: &str = "CLS Token size";
pub const K: &str = "Number of classes";

pub const ENCODER: &[(&str, &str)] = &[
    (CLS, "Input"),
    ("8000", "Linear"),
    ("8000", "Leaky ReLU (slope = 0.01)"),
    ("8000", "Dropout (probability = 0.3)"),
];
pub const CONTENT: &[(&str, &str)] = &[("8000", "Linear"), ("1024", "Leaky ReLU (slope = 0.01)"), (K, "Output (Linear)")];
pub const STYLE: &[(&str, &str)] = &[("8000", "Linear"), ("100", "Output")];
pub const DECODER: &[(&str, &str)] = &[
    ("Content size + Style size", "Input"),
    ("2560", "Linear"),
    ("2560", "Leaky ReLU (slope = 0.01)"),
    ("2560", "Dropout (probability = 0.3)"),
    ("2560", "Linear"),
    ("2560", "Leaky ReLU (slope = 0.01)"),
    ("2560", "Dropout (probability = 0.3)"),
    (CLS, "Output (Linear)"),
];
pub const DISC_CONTENT: &[(&str, &str)] = &[(K, "Input"), ("500", "Linear"), ("500", "Linear"), ("1", "Sigmoid")];
pub const DISC_STYLE: &[(&str, &str)] = &[("100", "Input"), ("50", "Linear"), ("500", "Linear"), ("1", "Sigmoid")];
pub const DISC_CLS: &[(&str, &str)] = &[
    (CLS, "Input"),
    ("128", "Linear"),
    ("128", "Leaky ReLU (slope = 0.02)"),
    ("64", "Linear"),
    ("64", "Leaky ReLU (slope = 0.02)"),
    ("32", "Linear"),
    ("32", "Leaky ReLU (slope = 0.02)"),
    ("1", "Sigmoid"),
];

pub fn size(s: &str, cls_dim: usize, k: usize) -> usize {
    match s {
        CLS => cls_dim,
        K => k,
        "Content size + Style size" => k + 100,
        n => n.parse().unwrap(),
    }
}

pub fn param(layer: &str, key: &str) -> f64 {
    let start = layer.find(key).unwrap() + key.len();
    layer[start..].trim_end_matches(')').trim().parse().unwrap()
}

/// Interprets one table as `(input width, layers)`.
pub fn interpret(table: &[(&str, &str)], cls_dim: usize, k: usize) -> (usize, Vec<LayerSpec>) {
    let rows: Vec<(usize, &str)> = table.iter().map(|&(s, l)| (size(s, cls_dim, k), l)).collect();
    let (input, mut layers, rest) = match rows[0] {
        (n, "Input") => (n, Vec::new(), &rows[1..]),
        (n, "Linear") => (n, vec![LayerSpec::Linear { out: rows[1].0 }], &rows[1..]),
        _ => panic!("table must start with Input or Linear"),
    };
    for &(n, l) in rest {
        if l.starts_with("Leaky ReLU") {
            layers.push(LayerSpec::LeakyRelu { slope: param(l, "slope =") });
        } else if l.starts_with("Dropout") {
            layers.push(LayerSpec::Dropout { p: param(l, "probability =") });
        } else if l == "Linear" || l == "Output (Linear)" || l == "Sigmoid" {
            layers.push(LayerSpec::Linear { out: n });
        } else if l != "Output" {
            panic!("unknown layer {l}");
        }
    }
    (input, layers)
}

pub fn without_inserted(spec: &NetSpec) -> Vec<LayerSpec> {
    spec.layers
        .iter()
        .enumerate()
        .filter(|(i, _)| !spec.inserted.contains(i))
        .map(|(_, l)| *l)
        .collect()
}

pub fn full_cases(cls_dim: usize, k: usize) -> [(&'static str, Table, NetSpec); 7] {
    let arch = ArchConfig::full();
    [
        ("encoder", ENCODER, NetSpec::shared_encoder(cls_dim, &arch)),
        ("content", CONTENT, NetSpec::content_head(k, &arch)),
        ("style", STYLE, NetSpec::style_head(&arch)),
        ("decoder", DECODER, NetSpec::decoder(k, cls_dim, &arch)),
        ("disc_content", DISC_CONTENT, NetSpec::disc_content(k, &arch)),
        ("disc_style", DISC_STYLE, NetSpec::disc_style(&arch)),
        ("disc_cls", DISC_CLS, NetSpec::disc_cls(cls_dim, &arch)),
    ]
}

/// Names of full-preset networks that disagree with their table.
pub fn table_mismatches(cls_dim: usize, k: usize) -> Vec<&'static str> {
    full_cases(cls_dim, k)
        .into_iter()
        .filter(|(_, table, spec)| {
            let (input, layers) = interpret(table, cls_dim, k);
            spec.input_dim != input || without_inserted(spec) != layers
        })
        .map(|(name, _, _)| name)
        .collect()
}
