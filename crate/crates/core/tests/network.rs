//! Forward pass: reference agreement, backend equivalence and obliviousness.

mod common;

use common::*;
use fhecnn::cnn::{self, reference, Activation, LayerSpec, NetworkSpec, PreparedNetwork, Tensor};
use fhecnn::fhe::{self, Client, Evaluator, Preset};
use fhecnn::fixedpoint::FixedPointFormat;

fn bits(values: &[fhecnn::fixedpoint::FixedPointCipher], client: &Client) -> Vec<i64> {
    values
        .iter()
        .map(|v| fhecnn::fixedpoint::decode_raw(v, client).unwrap())
        .collect()
}

fn tiny_model() -> NetworkSpec {
    NetworkSpec::parse(&std::fs::read_to_string(workspace_file("models/tiny.model")).unwrap()).unwrap()
}

#[test]
fn tiny_model_matches_reference_on_shipped_images() {
    let net = tiny_model();
    for k in 0..4 {
        let img =
            cnn::PlainImage::from_pgm(&std::fs::read(workspace_file(&format!("images/tiny/tiny{k}.pgm"))).unwrap())
                .unwrap();
        let enc = cnn::encrypt_image(&img, net.format, &Client::Clear).unwrap();
        let ev = Evaluator::clear();
        let scores = cnn::classify(&ev, &enc, &PreparedNetwork::public(&net).unwrap()).unwrap();
        let got = cnn::decrypt_scores(&scores, &Client::Clear).unwrap();
        let want = reference::forward(&net, &img).unwrap();
        assert_eq!(cnn::argmax(&got), cnn::argmax(&want));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-3, "{g} vs {w}");
        }
    }
}

#[test]
fn encrypted_weights_give_identical_scores() {
    let net = random_network(4);
    let img = random_image(net.input, 5);
    let ev = Evaluator::clear();
    let enc = cnn::encrypt_image(&img, net.format, &Client::Clear).unwrap();
    let public = cnn::classify(&ev, &enc, &PreparedNetwork::public(&net).unwrap()).unwrap();
    let secret = cnn::classify(
        &ev,
        &enc,
        &PreparedNetwork::encrypted(&net, &Client::Clear, 1 << 40).unwrap(),
    )
    .unwrap();
    assert_eq!(
        bits(&public.scores, &Client::Clear),
        bits(&secret.scores, &Client::Clear)
    );
}

#[test]
fn nand_count_is_independent_of_the_image() {
    let net = random_network(8);
    let counts: Vec<u64> = (0..3)
        .map(|s| {
            let ev = Evaluator::clear();
            let enc = cnn::encrypt_image(&random_image(net.input, s), net.format, &Client::Clear).unwrap();
            cnn::classify(&ev, &enc, &PreparedNetwork::public(&net).unwrap()).unwrap();
            ev.stats().nand_count
        })
        .collect();
    assert!(counts.windows(2).all(|p| p[0] == p[1]), "{counts:?}");
}

#[test]
fn small_network_on_gsw_equals_clear() {
    let fmt = FixedPointFormat::new(8, 4).unwrap();
    let conv = LayerSpec::conv(
        1,
        1,
        2,
        2,
        vec![0.5, -0.25, 0.75, 0.125],
        vec![0.0625],
        Activation::Relu,
    )
    .unwrap();
    let fc = LayerSpec::fully_connected(1, 2, vec![1.5, -0.5], vec![0.0, 0.25], Activation::Linear).unwrap();
    let net = NetworkSpec::new(shape(1, 3, 3), fmt, vec![conv, fc]).unwrap();
    let img = cnn::PlainImage::new(shape(1, 3, 3), vec![0.5, -0.25, 1.0, 0.0, 0.75, -1.0, 0.25, 0.5, -0.5]).unwrap();
    let p = Preset::Toy.params();
    let client = Client::gsw(p.clone(), fhe::keygen(&p, 31).unwrap(), 32);
    let run = |c: &Client| {
        let ev = c.evaluator(33).unwrap();
        let enc = cnn::encrypt_image(&img, fmt, c).unwrap();
        let s = cnn::classify(&ev, &enc, &PreparedNetwork::public(&net).unwrap()).unwrap();
        (bits(&s.scores, c), ev.stats().nand_count)
    };
    assert_eq!(run(&client), run(&Client::Clear));
}

#[test]
fn score_tensor_roundtrip_through_bytes() {
    let net = tiny_model();
    let img = random_image(net.input, 1);
    let enc = cnn::encrypt_image(&img, net.format, &Client::Clear).unwrap();
    let t = Tensor::new(vec![1, 6, 6], enc.flatten(), None).unwrap();
    let bytes = t.to_bytes().unwrap();
    let back = Tensor::read_from(&mut bytes.as_slice()).unwrap();
    assert_eq!(bits(&back.values, &Client::Clear), bits(&enc.flatten(), &Client::Clear));
    assert_eq!(&bytes[..4], b"GCN1");
}

#[test]
fn wrong_image_shape_is_rejected() {
    let net = tiny_model();
    let img = random_image(shape(1, 5, 5), 0);
    let enc = cnn::encrypt_image(&img, net.format, &Client::Clear).unwrap();
    let err = cnn::classify(&Evaluator::clear(), &enc, &PreparedNetwork::public(&net).unwrap()).unwrap_err();
    assert!(matches!(err, fhecnn::Error::Shape(_)));
}
