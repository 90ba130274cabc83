use nalgebra::DMatrix;

use egokit::gng::{GngEdge, GngGraph, GngNode, GngParams, NodeStats};
use egokit::mjpf::{init_filter, ModelBundle};
use egokit::signal::Scaler;
use egokit::vocabulary::{TransitionModel, Vocabulary};

fn single_node(dim: usize, at: f64) -> GngGraph {
    GngGraph {
        dim,
        nodes: vec![GngNode {
            id: 0,
            centroid: vec![at; dim],
            error: 0.0,
        }],
        edges: Vec::<GngEdge>::new(),
        node_stats: vec![NodeStats {
            count: 1,
            mean: vec![at; dim],
            cov: vec![vec![0.0; dim]; dim],
        }],
        params: GngParams::default(),
    }
}

/// One word, zero drift, (regularized) zero process noise.
fn static_model(dim: usize, r: f64) -> ModelBundle {
    let vocab = Vocabulary {
        order: 1,
        dim,
        alphabets: vec![single_node(dim, 0.0), single_node(dim, 0.0)],
        observed_words: vec![0],
    };
    ModelBundle::new(
        "XY".into(),
        (0..dim).map(|i| format!("c{i}")).collect(),
        Scaler::identity(dim),
        0.1,
        vocab,
        TransitionModel {
            matrix: vec![vec![1.0]],
            smoothing: 0.0,
        },
        DMatrix::identity(dim, dim) * r,
        false,
    )
    .unwrap()
}

#[test]
fn constant_signal_is_tracked_to_the_observation() {
    let m = static_model(2, 1e-8);
    let z = [0.7, -1.3];
    let mut f = init_filter(&m, 50, &z, 3).unwrap();
    let mut last = Vec::new();
    for _ in 0..50 {
        f.predict().unwrap();
        let r = f.update(&z).unwrap();
        let w: f64 = f.particles().iter().map(|p| p.weight).sum();
        assert!((w - 1.0).abs() < 1e-9);
        assert!((0.0..=1.0).contains(&r.theta));
        last = r.posterior_mean;
    }
    assert!((last[0] - z[0]).abs() < 1e-6 && (last[1] - z[1]).abs() < 1e-6);
}

#[test]
fn covariances_stay_positive_definite() {
    let m = static_model(3, 1e-4);
    let mut f = init_filter(&m, 20, &[0.0; 3], 1).unwrap();
    for k in 0..100 {
        f.predict().unwrap();
        f.update(&[(k as f64 * 0.3).sin(), 0.1, -0.2]).unwrap();
        for p in f.particles() {
            assert!(p.cov.clone().cholesky().is_some());
        }
    }
}
