//! Analytic InfoNCE gradients against central finite differences.

use geoicl_core::adapter::{AdapterParams, Embedding};
use geoicl_core::infonce::{info_nce_gradients, info_nce_loss, InfoNceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely.
const FLOOR: f64 = 1e-6;

fn batch(seed: u64, n: usize, d: usize) -> Vec<(Embedding, Embedding)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = || Embedding::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect());
    (0..n).map(|_| (v(), v())).collect()
}

fn loss(text: &AdapterParams, image: &AdapterParams, pairs: &[(Embedding, Embedding)], cfg: &InfoNceConfig) -> f64 {
    let t: Vec<Embedding> = pairs.iter().map(|(x, _)| text.forward(x).unwrap()).collect();
    let v: Vec<Embedding> = pairs.iter().map(|(_, y)| image.forward(y).unwrap()).collect();
    info_nce_loss(&t.iter().collect::<Vec<_>>(), &v.iter().collect::<Vec<_>>(), cfg).unwrap()
}

/// Largest relative error over every parameter of both towers.
fn max_relative_error(seed: u64, cfg: &InfoNceConfig) -> f64 {
    let dims = [8, 16, 16, 8];
    let text = AdapterParams::init(seed, dims).unwrap();
    let image = AdapterParams::init(seed.wrapping_add(1000), dims).unwrap();
    let pairs = batch(seed ^ 0xabcdef, 4, 8);
    let refs: Vec<(&Embedding, &Embedding)> = pairs.iter().map(|(a, b)| (a, b)).collect();
    let g = info_nce_gradients(&text, &image, &refs, cfg).unwrap();
    assert!((g.loss - loss(&text, &image, &pairs, cfg)).abs() < 1e-12);

    let mut worst: f64 = 0.0;
    for tower in 0..2 {
        let analytic = if tower == 0 { &g.text } else { &g.image };
        for t in 0..6 {
            for i in 0..analytic.tensors()[t].len() {
                let probe = |delta: f64| {
                    let (mut tp, mut ip) = (text.clone(), image.clone());
                    let p = if tower == 0 { &mut tp } else { &mut ip };
                    p.tensors_mut()[t][i] += delta;
                    loss(&tp, &ip, &pairs, cfg)
                };
                let numeric = (probe(EPS) - probe(-EPS)) / (2.0 * EPS);
                let a = analytic.tensors()[t][i];
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
                worst = worst.max(err);
            }
        }
    }
    worst
}

#[test]
fn seed_42_batch_matches_finite_differences() {
    let err = max_relative_error(42, &InfoNceConfig::default());
    assert!(err <= 1e-4, "max relative error {err:e}");
}

#[test]
fn many_seeds_and_temperatures() {
    for seed in 0..8 {
        for temperature in [0.07, 0.14, 1.0] {
            let cfg = InfoNceConfig { temperature, ..Default::default() };
            let err = max_relative_error(seed, &cfg);
            assert!(err <= 1e-4, "seed {seed} tau {temperature}: {err:e}");
        }
    }
}

#[test]
fn one_directional_loss_also_matches() {
    let cfg = InfoNceConfig { symmetric: false, ..Default::default() };
    assert!(max_relative_error(7, &cfg) <= 1e-4);
}
