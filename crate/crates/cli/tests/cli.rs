//! End-to-end behaviour of the `fhecnn` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fhecnn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fhecnn"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = fhecnn(args, dir);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str], dir: &Path) -> i32 {
    fhecnn(args, dir).status.code().unwrap()
}

fn tiny() -> String {
    root().join("models/tiny.model").display().to_string()
}

fn tiny_image(k: usize) -> String {
    root().join(format!("images/tiny/tiny{k}.pgm")).display().to_string()
}

fn write_model(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn keygen_is_deterministic_and_reloadable() {
    let d = tempfile::tempdir().unwrap();
    ok(
        &["keygen", "--preset", "toy", "--seed", "1", "--out", "a.key"],
        d.path(),
    );
    ok(
        &["keygen", "--preset", "toy", "--seed", "1", "--out", "b.key"],
        d.path(),
    );
    ok(
        &["keygen", "--preset", "toy", "--seed", "2", "--out", "c.key"],
        d.path(),
    );
    let a = std::fs::read(d.path().join("a.key")).unwrap();
    assert_eq!(a, std::fs::read(d.path().join("b.key")).unwrap());
    assert_ne!(a, std::fs::read(d.path().join("c.key")).unwrap());
    assert_eq!(&a[..4], b"GCN1");
    ok(
        &[
            "encrypt-image",
            "--backend",
            "gsw",
            "--key",
            "a.key",
            &tiny_image(0),
            "--out",
            "x.ct",
        ],
        d.path(),
    );
}

#[test]
fn error_classes_have_distinct_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    assert_eq!(code(&["keygen", "--preset", "bogus", "--out", "k"], p), 2);
    assert_eq!(code(&["bound"], p), 2);
    assert_eq!(code(&["bound", "--model", "missing.model"], p), 3);
    let broken = write_model(
        p,
        "broken.model",
        "gcnn-model 1\nformat 32 16\ninput 1 6 6\nlayer fc in=36\n",
    );
    assert_eq!(code(&["bound", "--model", &broken], p), 7);
    assert_eq!(code(&["verify", "--model", &broken, &tiny_image(0)], p), 7);
    let preset = root().join("models/preset.model").display().to_string();
    assert_eq!(
        code(&["encrypt-image", "--model", &preset, &tiny_image(0), "--out", "x"], p),
        4
    );
    // gsw without a key
    assert_eq!(
        code(&["encrypt-image", "--backend", "gsw", &tiny_image(0), "--out", "x"], p),
        2
    );
    // clear file given to the gsw backend
    ok(
        &["encrypt-image", "--model", &tiny(), &tiny_image(0), "--out", "c.ct"],
        p,
    );
    ok(&["keygen", "--out", "k.key"], p);
    assert_eq!(
        code(
            &[
                "classify",
                "--backend",
                "gsw",
                "--key",
                "k.key",
                "--model",
                &tiny(),
                "c.ct",
                "--out",
                "s"
            ],
            p
        ),
        2
    );
}

#[test]
fn noise_exhaustion_has_its_own_exit_code() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(&["keygen", "--out", "k.key"], p);
    ok(&["keygen", "--seed", "9", "--out", "other.key"], p);
    ok(
        &[
            "encrypt-image",
            "--backend",
            "gsw",
            "--key",
            "k.key",
            &tiny_image(0),
            "--out",
            "x.ct",
        ],
        p,
    );
    // The bits are fresh and decrypt under the right key.
    ok(&["decrypt-scores", "--backend", "gsw", "--key", "k.key", "x.ct"], p);
    // Flip the tracked noise of the first ciphertext record past the budget.
    let mut bytes = std::fs::read(p.join("x.ct")).unwrap();
    let first_record = 23 + 3 + 4 + 3 * 4 + 8;
    bytes[first_record..first_record + 8].copy_from_slice(&5000.0f64.to_le_bytes());
    std::fs::write(p.join("y.ct"), &bytes).unwrap();
    assert_eq!(
        code(&["decrypt-scores", "--backend", "gsw", "--key", "k.key", "y.ct"], p),
        5
    );
}

#[test]
fn encrypted_image_file_layout() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    let img = root().join("images/digit00.pgm").display().to_string();
    ok(&["encrypt-image", &img, "--out", "d.ct"], p);
    let len = std::fs::metadata(p.join("d.ct")).unwrap().len() as usize;
    assert_eq!(len, 23 + 3 + 4 + 3 * 4 + 8 + 28 * 28 * 32);
    ok(&["keygen", "--out", "k.key"], p);
    ok(
        &[
            "encrypt-image",
            "--backend",
            "gsw",
            "--key",
            "k.key",
            &tiny_image(1),
            "--out",
            "g.ct",
        ],
        p,
    );
    let len = std::fs::metadata(p.join("g.ct")).unwrap().len() as usize;
    let record = 8 + 1 + 108 * 108 * 2;
    assert_eq!(len, 23 + 3 + 4 + 3 * 4 + 8 + 6 * 6 * 32 * record);
}

#[test]
fn gsw_encrypt_then_decrypt_recovers_pixels() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(&["keygen", "--out", "k.key"], p);
    ok(
        &[
            "encrypt-image",
            "--backend",
            "gsw",
            "--key",
            "k.key",
            "--kv",
            &tiny_image(2),
            "--out",
            "g.ct",
        ],
        p,
    );
    let text = ok(
        &["decrypt-scores", "--backend", "gsw", "--key", "k.key", "--kv", "g.ct"],
        p,
    );
    let img = fhecnn::cnn::PlainImage::from_pgm(&std::fs::read(tiny_image(2)).unwrap()).unwrap();
    for (i, want) in img.data.iter().enumerate() {
        let line = text.lines().find(|l| l.starts_with(&format!("score{i}="))).unwrap();
        let got: f64 = line.split('=').nth(1).unwrap().parse().unwrap();
        assert!(got <= *want && want - got < 1.0 / 65536.0, "{i}: {got} vs {want}");
    }
}

#[test]
fn zero_weight_model_scores_are_its_biases_and_ties_go_low() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    let zeros = vec!["0"; 36 * 8].join(" ");
    let model = write_model(
        p,
        "zero.model",
        &format!(
            "gcnn-model 1\nformat 32 16\ninput 1 6 6\nlayer fc in=36 out=8 activation=linear\nweights {zeros}\nbiases 0 0.125 0.75 0.25 0 0 0 0.75\nend\n"
        ),
    );
    ok(
        &["encrypt-image", "--model", &model, &tiny_image(0), "--out", "i.ct"],
        p,
    );
    ok(&["classify", "--model", &model, "i.ct", "--out", "s.ct"], p);
    let text = ok(&["decrypt-scores", "--kv", "s.ct"], p);
    let scores: Vec<f64> = text
        .lines()
        .filter(|l| l.starts_with("score"))
        .map(|l| l.split('=').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(scores, vec![0.0, 0.125, 0.75, 0.25, 0.0, 0.0, 0.0, 0.75]);
    assert!(text.contains("class=2"));
}

#[test]
fn bound_of_empty_model_is_delta() {
    let d = tempfile::tempdir().unwrap();
    let model = write_model(
        d.path(),
        "empty.model",
        "gcnn-model 1\nformat 32 16\ninput 1 2 2\nend\n",
    );
    let text = ok(&["bound", "--kv", "--model", &model], d.path());
    assert!(text.contains(&format!("total_bound={:e}", 2f64.powi(-16))), "{text}");
}

#[test]
fn bound_total_is_product_of_printed_factors() {
    let text = ok(&["bound", "--kv", "--model", &tiny()], &root());
    let get = |k: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{k}=")))
            .unwrap()
            .parse()
            .unwrap()
    };
    let prod = get("initial_delta") * get("layer0.r") * get("layer0.d") * get("layer1.r") * get("layer1.d");
    assert!((prod - get("total_bound")).abs() <= 1e-12 * prod);
}

#[test]
fn classify_is_identical_across_worker_counts_and_weight_modes() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(
        &["encrypt-image", "--model", &tiny(), &tiny_image(3), "--out", "i.ct"],
        p,
    );
    ok(
        &[
            "classify",
            "--workers",
            "1",
            "--model",
            &tiny(),
            "i.ct",
            "--out",
            "a.ct",
        ],
        p,
    );
    ok(
        &[
            "classify",
            "--workers",
            "3",
            "--model",
            &tiny(),
            "i.ct",
            "--out",
            "b.ct",
        ],
        p,
    );
    ok(
        &[
            "classify",
            "--encrypt-weights",
            "--model",
            &tiny(),
            "i.ct",
            "--out",
            "c.ct",
        ],
        p,
    );
    let a = std::fs::read(p.join("a.ct")).unwrap();
    assert_eq!(a, std::fs::read(p.join("b.ct")).unwrap());
    assert_eq!(a, std::fs::read(p.join("c.ct")).unwrap());
    assert_eq!(
        code(
            &["classify", "--workers", "0", "--model", &tiny(), "i.ct", "--out", "z"],
            p
        ),
        2
    );
}

#[test]
fn verify_tiny_model_passes() {
    let text = ok(&["verify", "--kv", "--model", &tiny(), "images/tiny"], &root());
    assert!(text.contains("matches=4"), "{text}");
    assert!(text.contains("result=PASS"));
}

#[test]
fn convert_json_model() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    std::fs::write(
        p.join("m.json"),
        r#"{"input": [1, 6, 6], "layers": [
            {"type": "conv", "in": 1, "out": 1, "kernel": 3, "pool": 2, "activation": "relu",
             "weights": [[[[1.375, -0.625, -2.875], [2.5, -1.5, -0.625], [0.375, 1.5, 2.375]]]], "biases": [2.375]},
            {"type": "fc", "in": 4, "out": 2, "activation": "linear",
             "weights": [[-0.25, 0.25, 2.375, -1.75], [0.375, -0.75, -2.25, 1.375]], "biases": [0.5, -0.5]}]}"#,
    )
    .unwrap();
    ok(&["convert", "m.json", "--out", "m.model"], p);
    let converted = fhecnn::cnn::NetworkSpec::parse(&std::fs::read_to_string(p.join("m.model")).unwrap()).unwrap();
    let shipped = fhecnn::cnn::NetworkSpec::parse(&std::fs::read_to_string(tiny()).unwrap()).unwrap();
    assert_eq!(converted, shipped);
}
