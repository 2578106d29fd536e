use std::f64::consts::PI;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng as _;

use vowelpp::embedding::{EmbeddingKind, EmbeddingParams, Layout};
use vowelpp::training::random_parameters;

fn layouts() -> Vec<Layout> {
    vec![
        Layout::new(EmbeddingKind::Tabular, 5, 2, 3, 0, false).unwrap(),
        Layout::new(EmbeddingKind::Neural, 5, 2, 4, 0, false).unwrap(),
        Layout::new(EmbeddingKind::Neural, 5, 2, 6, 3, false).unwrap(),
        Layout::new(EmbeddingKind::Interpretable, 5, 2, 2, 2, false).unwrap(),
        Layout::new(EmbeddingKind::Prototype, 5, 2, 4, 1, false).unwrap(),
    ]
}

/// Central-difference check of `u . e + w . x` against `Embedder::backward`.
#[test]
fn backward_matches_finite_differences() {
    let h = 1e-6;
    for layout in layouts() {
        for draw in 0..20u64 {
            let params = random_parameters(&layout, 0.8, draw).values;
            let mut g = vowelpp::rng::stream(draw, 50);
            let f: Vec<f64> = (0..2).map(|_| g.random_range(-0.5..0.5)).collect();
            let u = DVector::from_fn(layout.output_dim(), |_, _| g.random_range(-1.0..1.0));
            let w = layout.metric_dim().map(|k| DVector::from_fn(k, |_, _| g.random_range(-1.0..1.0)));
            let uses_x = layout.kind == EmbeddingKind::Prototype;
            let scalar = |p: &[f64]| {
                let emb = vowelpp::embedding::Embedder::new(&layout, p).unwrap();
                let t = emb.forward(2, &f).unwrap();
                let mut s = u.dot(&t.e);
                if uses_x {
                    s += w.as_ref().unwrap().dot(t.x.as_ref().unwrap());
                }
                s
            };
            let emb = vowelpp::embedding::Embedder::new(&layout, &params).unwrap();
            let tape = emb.forward(2, &f).unwrap();
            let mut grad = vec![0.0; params.len()];
            emb.backward(&tape, &u, if uses_x { w.as_ref() } else { None }, &mut grad);
            let mut p = params.clone();
            for k in 0..params.len() {
                p[k] = params[k] + h;
                let fp = scalar(&p);
                p[k] = params[k] - h;
                let fm = scalar(&p);
                p[k] = params[k];
                let fd = (fp - fm) / (2.0 * h);
                let err = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-4);
                assert!(err < 1e-5, "{:?} draw {draw} param {k}: {fd} vs {}", layout.kind, grad[k]);
            }
        }
    }
}

proptest! {
    #[test]
    fn prototype_responses_form_a_gaussian_mixture(seed in any::<u64>(), fx in -1.0f64..1.0, fy in -1.0f64..1.0) {
        let layout = Layout::new(EmbeddingKind::Prototype, 5, 2, 6, 1, false).unwrap();
        let pv = random_parameters(&layout, 1.0, seed);
        let EmbeddingParams::Prototype(p) = pv.unflatten() else { unreachable!() };
        let tape = pv.embedder().forward(0, &[fx, fy]).unwrap();
        let x = tape.x.unwrap();
        let w = p.weights();
        prop_assert!((w.sum() - 1.0).abs() < 1e-12 && w.iter().all(|&v| v >= 0.0));
        let s = p.sigma();
        let mut density = 0.0;
        let mut peak: f64 = 0.0;
        for l in 0..6 {
            let d2 = (&x - p.prototypes.column(l)).norm_squared();
            let gauss = (-d2 / (2.0 * s * s)).exp() / (2.0 * PI * s * s);
            density += w[l] * gauss;
            peak = peak.max(1.0 / (2.0 * PI * s * s));
            prop_assert!(tape.e[l] >= 0.0);
            prop_assert!((tape.e[l] - w[l] * gauss).abs() <= 1e-12 * (1.0 + w[l] * gauss));
        }
        prop_assert!((tape.e.sum() - density).abs() <= 1e-12 * (1.0 + density));
        prop_assert!(tape.e.sum() <= peak * (1.0 + 1e-12));
    }
}

#[test]
fn prototype_responses_are_positive_near_the_prototypes() {
    let layout = Layout::new(EmbeddingKind::Prototype, 5, 2, 3, 0, false).unwrap();
    let pv = random_parameters(&layout, 0.3, 4);
    let tape = pv.embedder().forward(0, &[0.1, -0.1]).unwrap();
    assert!(tape.e.iter().all(|&v| v > 0.0));
}
