#![allow(dead_code)]

use fhecnn::cnn::{Activation, LayerSpec, NetworkSpec, PlainImage, Shape};
use fhecnn::fixedpoint::FixedPointFormat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn shape(c: usize, h: usize, w: usize) -> Shape {
    Shape {
        channels: c,
        height: h,
        width: w,
    }
}

fn reals(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Random network of 1–3 layers, channel/node widths ≤ 8, kernels ≤ 3.
pub fn random_network(seed: u64) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let convs = rng.random_range(0..=2usize);
    let mut input = shape(rng.random_range(1..=2), 0, 0);
    let mut layers = Vec::new();
    let mut plan = Vec::new();
    for _ in 0..convs {
        let k = rng.random_range(1..=3usize);
        let pool = rng.random_range(1..=2usize);
        plan.push((k, pool));
    }
    // choose an input side that every conv/pool stage divides cleanly
    let mut target = rng.random_range(1..=2usize);
    for &(k, pool) in plan.iter().rev() {
        target = target * pool + k - 1;
    }
    let side = target;
    input.height = side;
    input.width = side;
    let mut c = input.channels;
    let mut cur = side;
    for (k, pool) in plan {
        let out = rng.random_range(1..=8usize);
        let act = if rng.random_bool(0.7) {
            Activation::Relu
        } else {
            Activation::Linear
        };
        let w = reals(&mut rng, out * c * k * k, 1.0);
        let b = reals(&mut rng, out, 0.5);
        layers.push(LayerSpec::conv(c, out, k, pool, w, b, act).unwrap());
        c = out;
        cur = (cur - k + 1) / pool;
    }
    let mut n = c * cur * cur;
    let fcs = if layers.is_empty() {
        rng.random_range(1..=3usize)
    } else {
        rng.random_range(1..=3 - layers.len())
    };
    for i in 0..fcs {
        let out = rng.random_range(1..=8usize);
        let act = if i + 1 < fcs && rng.random_bool(0.7) {
            Activation::Relu
        } else {
            Activation::Linear
        };
        layers.push(
            LayerSpec::fully_connected(n, out, reals(&mut rng, out * n, 1.0), reals(&mut rng, out, 0.5), act).unwrap(),
        );
        n = out;
    }
    NetworkSpec::new(input, FixedPointFormat::PRESET, layers).unwrap()
}

pub fn random_image(s: Shape, seed: u64) -> PlainImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PlainImage::new(s, reals(&mut rng, s.len(), 1.0)).unwrap()
}

pub fn workspace_file(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}
