//! Built networks against the transcribed architecture tables.

mod common;

use common::tables::*;
use semifit::nets::{ArchConfig, ComponentBundle, LayerSpec, NetSpec};

#[test]
fn full_preset_matches_every_table() {
    for (cls_dim, k) in [(768, 10), (1024, 4), (64, 10)] {
        assert!(table_mismatches(cls_dim, k).is_empty());
        for (name, table, spec) in full_cases(cls_dim, k) {
            let (input, layers) = interpret(table, cls_dim, k);
            assert_eq!(spec.input_dim, input, "{name} input");
            assert_eq!(without_inserted(&spec), layers, "{name} layers");
        }
    }
}

#[test]
fn inserted_activations_are_flagged() {
    let arch = ArchConfig::full();
    assert!(arch.disc_inserted_activations);
    for spec in [NetSpec::disc_content(10, &arch), NetSpec::disc_style(&arch)] {
        assert_eq!(spec.inserted.len(), 2, "{}", spec.name);
        for &i in &spec.inserted {
            assert_eq!(spec.layers[i], LayerSpec::LeakyRelu { slope: 0.02 });
            assert!(matches!(spec.layers[i - 1], LayerSpec::Linear { .. }));
        }
    }
    for spec in [
        NetSpec::shared_encoder(768, &arch),
        NetSpec::content_head(10, &arch),
        NetSpec::style_head(&arch),
        NetSpec::decoder(10, 768, &arch),
        NetSpec::disc_cls(768, &arch),
    ] {
        assert!(spec.inserted.is_empty(), "{}", spec.name);
    }
    let plain = ArchConfig {
        disc_inserted_activations: false,
        ..ArchConfig::full()
    };
    let (input, layers) = interpret(DISC_CONTENT, 768, 10);
    let spec = NetSpec::disc_content(10, &plain);
    assert_eq!((spec.input_dim, spec.layers.clone()), (input, layers));
}

#[test]
fn built_bundle_has_table_shapes() {
    let bundle = ComponentBundle::build(768, 10, &ArchConfig::full(), 0).unwrap();
    let shapes = |net: &semifit::nets::Net| -> Vec<(usize, usize)> {
        net.linear_params().iter().map(|&(w, _)| bundle.store.get(w).shape()).collect()
    };
    assert_eq!(shapes(&bundle.encoder), vec![(768, 8000)]);
    assert_eq!(shapes(&bundle.content), vec![(8000, 1024), (1024, 10)]);
    assert_eq!(shapes(&bundle.style), vec![(8000, 100)]);
    assert_eq!(shapes(&bundle.decoder), vec![(110, 2560), (2560, 2560), (2560, 768)]);
    assert_eq!(shapes(&bundle.disc_content), vec![(10, 500), (500, 500), (500, 1)]);
    assert_eq!(shapes(&bundle.disc_style), vec![(100, 50), (50, 500), (500, 1)]);
    assert_eq!(shapes(&bundle.disc_cls), vec![(768, 128), (128, 64), (64, 32), (32, 1)]);
}

#[test]
fn desk_preset_keeps_topology() {
    let (full, desk) = (ArchConfig::full(), ArchConfig::desk());
    assert_eq!((desk.slope, desk.disc_slope, desk.dropout, desk.style_dim), (0.01, 0.02, 0.3, 100));
    for (a, b) in [
        (NetSpec::shared_encoder(64, &full), NetSpec::shared_encoder(64, &desk)),
        (NetSpec::decoder(10, 64, &full), NetSpec::decoder(10, 64, &desk)),
        (NetSpec::disc_content(10, &full), NetSpec::disc_content(10, &desk)),
    ] {
        let kinds = |s: &NetSpec| s.layers.iter().map(std::mem::discriminant).collect::<Vec<_>>();
        assert_eq!(kinds(&a), kinds(&b));
    }
}
