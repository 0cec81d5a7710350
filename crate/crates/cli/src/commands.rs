use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fhecnn::cnn::{self, reference, NetworkSpec, PreparedNetwork, Tensor};
use fhecnn::error_analysis::{theorem_bound, theorem_bound_for_inputs};
use fhecnn::fhe::{derive_seed, keygen, wire, BackendKind, Client, Evaluator, Preset};
use fhecnn::fixedpoint::FixedPointFormat;
use fhecnn::{Error, Result};

use crate::args::{Backend, Cli, Command};
use crate::files;

const KEYGEN: u64 = 1;
const ENCRYPT: u64 = 2;
const REFRESH: u64 = 3;
const WEIGHT_NONCE_BASE: u64 = 1 << 40;

/// What a command produced; `verify` can succeed at running but fail its checks.
pub struct Outcome {
    pub text: String,
    pub failed: bool,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome { text, failed: false }
    }
}

fn backend_kind(b: Backend) -> BackendKind {
    match b {
        Backend::Clear => BackendKind::Clear,
        Backend::Gsw => BackendKind::Gsw,
    }
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str, cmd: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Usage(format!("{cmd} needs --{flag}")))
}

/// Key holder for the selected backend.
fn client(cli: &Cli, cmd: &str) -> Result<Client> {
    match cli.backend {
        Backend::Clear => Ok(Client::Clear),
        Backend::Gsw => {
            let (params, sk) = files::load_key(need(&cli.key, "key", cmd)?)?;
            Ok(Client::gsw(params, sk, derive_seed(cli.seed, ENCRYPT)))
        }
    }
}

fn check_backend(cli: &Cli, t: &Tensor, what: &str) -> Result<()> {
    if t.backend != backend_kind(cli.backend) {
        return Err(Error::Usage(format!(
            "{what} was produced with the {} backend but --backend is {}",
            t.backend,
            backend_kind(cli.backend)
        )));
    }
    Ok(())
}

fn check_params(client: &Client, t: &Tensor) -> Result<()> {
    if let Client::Gsw { params, .. } = client {
        if t.params.as_ref() != Some(params) {
            return Err(Error::Usage("key parameters differ from the file's parameters".into()));
        }
    }
    Ok(())
}

fn kv_text(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Keygen => keygen_cmd(cli),
        Command::EncryptImage { image } => encrypt_cmd(cli, image),
        Command::Classify { image } => classify_cmd(cli, image),
        Command::DecryptScores { scores } => decrypt_cmd(cli, scores),
        Command::Bound => bound_cmd(cli),
        Command::Verify { images } => verify_cmd(cli, images),
        Command::Convert { json } => convert_cmd(cli, json),
    }
}

fn keygen_cmd(cli: &Cli) -> Result<Outcome> {
    let out = need(&cli.out, "out", "keygen")?;
    let preset: Preset = cli.preset.parse()?;
    let params = preset.params();
    let sk = keygen(&params, derive_seed(cli.seed, KEYGEN))?;
    let mut buf = Vec::new();
    wire::write_secret_key(&mut buf, &sk, &params)?;
    files::write_atomic(out, &buf)?;
    Ok(Outcome::ok(format!(
        "wrote {preset} key (n={}, q=2^{}, ct_dim={}) to {}\n",
        params.lattice_dim,
        params.log_q,
        params.ct_dim,
        out.display()
    )))
}

fn encrypt_cmd(cli: &Cli, image: &Path) -> Result<Outcome> {
    let out = need(&cli.out, "out", "encrypt-image")?;
    let model = cli.model.as_deref().map(files::load_model).transpose()?;
    let img = files::load_image(image, model.as_ref().map(|m| m.input))?;
    let format = match &model {
        Some(m) => {
            img.expect_shape(m.input)?;
            m.format
        }
        None => FixedPointFormat::PRESET,
    };
    let client = client(cli, "encrypt-image")?;
    let enc = cnn::encrypt_image(&img, format, &client)?;
    let s = img.shape;
    let params = match &client {
        Client::Gsw { params, .. } => Some(params.clone()),
        Client::Clear => None,
    };
    let tensor = Tensor::new(vec![s.channels, s.height, s.width], enc.flatten(), params)?;
    files::write_atomic(out, &tensor.to_bytes()?)?;
    let n = s.len();
    Ok(Outcome::ok(format!(
        "encrypted {n} values ({} bit ciphertexts, {} backend) to {}\n",
        n * format.width(),
        client.kind(),
        out.display()
    )))
}

fn evaluator(cli: &Cli, client: &Client) -> Result<Evaluator> {
    client.evaluator(derive_seed(cli.seed, REFRESH))
}

fn prepare<'a>(cli: &Cli, net: &'a NetworkSpec, client: &Client) -> Result<PreparedNetwork<'a>> {
    if cli.encrypt_weights {
        PreparedNetwork::encrypted(net, client, WEIGHT_NONCE_BASE)
    } else {
        PreparedNetwork::public(net)
    }
}

fn classify_cmd(cli: &Cli, image: &Path) -> Result<Outcome> {
    let out = need(&cli.out, "out", "classify")?;
    let net = files::load_model(need(&cli.model, "model", "classify")?)?;
    let tensor = files::load_tensor(image)?;
    check_backend(cli, &tensor, "the encrypted image")?;
    if tensor.format != net.format {
        return Err(Error::Usage(format!(
            "image uses {}/{} fixed point, model uses {}/{}",
            tensor.format.total_bits, tensor.format.frac_bits, net.format.total_bits, net.format.frac_bits
        )));
    }
    let want = [net.input.channels, net.input.height, net.input.width];
    if tensor.dims != want {
        return Err(Error::Shape(format!(
            "model expects input {want:?}, image has {:?}",
            tensor.dims
        )));
    }
    let client = client(cli, "classify")?;
    check_params(&client, &tensor)?;
    let ev = evaluator(cli, &client)?;
    let prepared = prepare(cli, &net, &client)?;
    let enc = cnn::EncImage::from_flat(tensor.values, net.input)?;
    let start = Instant::now();
    let scores = cnn::classify(&ev, &enc, &prepared)?;
    let elapsed = start.elapsed();
    let n = scores.scores.len();
    let result = Tensor::new(vec![n], scores.scores, tensor.params)?;
    files::write_atomic(out, &result.to_bytes()?)?;
    let s = ev.stats();
    let pairs = vec![
        ("scores".to_string(), n.to_string()),
        ("nand_count".into(), s.nand_count.to_string()),
        ("refresh_count".into(), s.refresh_count.to_string()),
        ("max_noise".into(), s.max_noise_seen.to_string()),
        ("overflow_count".into(), s.overflow_count.to_string()),
        ("wall_seconds".into(), format!("{:.3}", elapsed.as_secs_f64())),
    ];
    if cli.kv {
        return Ok(Outcome::ok(kv_text(&pairs)));
    }
    Ok(Outcome::ok(format!(
        "wrote {n} encrypted scores to {}\nNAND gates {}  refreshes {}  max noise {}  overflows {}  time {:.3}s\n",
        out.display(),
        s.nand_count,
        s.refresh_count,
        s.max_noise_seen,
        s.overflow_count,
        elapsed.as_secs_f64()
    )))
}

fn decrypt_cmd(cli: &Cli, scores: &Path) -> Result<Outcome> {
    let tensor = files::load_tensor(scores)?;
    check_backend(cli, &tensor, "the scores file")?;
    let client = client(cli, "decrypt-scores")?;
    check_params(&client, &tensor)?;
    let values = cnn::infer::decrypt_values(&tensor.values, &client)?;
    let class = cnn::argmax(&values).expect("tensors are nonempty");
    let mut text = String::new();
    for (i, v) in values.iter().enumerate() {
        if cli.kv {
            let _ = writeln!(text, "score{i}={v}");
        } else {
            let _ = writeln!(text, "score {i:>2}  {v:>14.6}");
        }
    }
    let _ = if cli.kv {
        writeln!(text, "class={class}")
    } else {
        writeln!(text, "class {class}")
    };
    if let Some(out) = &cli.out {
        files::write_atomic(out, text.as_bytes())?;
    }
    Ok(Outcome::ok(text))
}

fn bound_cmd(cli: &Cli) -> Result<Outcome> {
    let net = files::load_model(need(&cli.model, "model", "bound")?)?;
    let report = theorem_bound(&net);
    let text = if cli.kv {
        kv_text(&report.key_values())
    } else {
        format!("{report}\n")
    };
    if let Some(out) = &cli.out {
        files::write_atomic(out, text.as_bytes())?;
    }
    Ok(Outcome::ok(text))
}

struct ImageResult {
    name: String,
    enc_class: usize,
    ref_class: usize,
    errors: Vec<f64>,
    overflows: u64,
}

fn verify_cmd(cli: &Cli, images: &[PathBuf]) -> Result<Outcome> {
    let net = files::load_model(need(&cli.model, "model", "verify")?)?;
    let paths = files::expand_images(images)?;
    let imgs = paths
        .iter()
        .map(|p| {
            let img = files::load_image(p, Some(net.input))?;
            img.expect_shape(net.input)
                .map_err(|e| Error::Shape(format!("{}: {e}", p.display())))?;
            Ok(img)
        })
        .collect::<Result<Vec<_>>>()?;
    let client = client(cli, "verify")?;
    let prepared = prepare(cli, &net, &client)?;
    let start = Instant::now();
    let results = imgs
        .iter()
        .zip(&paths)
        .enumerate()
        .map(|(i, (img, path))| {
            let ev = client.evaluator(derive_seed(derive_seed(cli.seed, REFRESH), i as u64))?;
            let enc = cnn::encrypt_image(img, net.format, &client)?;
            let got = cnn::decrypt_scores(&cnn::classify(&ev, &enc, &prepared)?, &client)?;
            let want = reference::forward(&net, img)?;
            log::info!("verified {}", path.display());
            Ok(ImageResult {
                name: path
                    .file_name()
                    .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into()),
                enc_class: cnn::argmax(&got).unwrap_or(0),
                ref_class: cnn::argmax(&want).unwrap_or(0),
                errors: got.iter().zip(&want).map(|(a, b)| (a - b).abs()).collect(),
                overflows: ev.stats().overflow_count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let elapsed = start.elapsed();

    let magnitude = imgs
        .iter()
        .flat_map(|i| i.data.iter())
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let mut report = theorem_bound_for_inputs(&net, magnitude);
    let all: Vec<f64> = results.iter().flat_map(|r| r.errors.iter().copied()).collect();
    report.record_errors(&all, results.iter().map(|r| r.overflows).sum());
    let matches = results.iter().filter(|r| r.enc_class == r.ref_class).count();
    let over = all.iter().filter(|&&e| e > report.total_bound).count();
    let over_slack = all.iter().filter(|&&e| e > report.bound_with_slack()).count();
    let failed = matches != results.len() || over > 0;

    let mut text = String::new();
    if cli.kv {
        for (i, r) in results.iter().enumerate() {
            let max = r.errors.iter().copied().fold(0.0, f64::max);
            let _ = writeln!(
                text,
                "image{i}={} enc={} ref={} max_error={max:e}",
                r.name, r.enc_class, r.ref_class
            );
        }
        let mut pairs = vec![
            ("images".to_string(), results.len().to_string()),
            ("matches".into(), matches.to_string()),
            ("bound_violations".into(), over.to_string()),
            ("bound_violations_with_slack".into(), over_slack.to_string()),
            ("wall_seconds".into(), format!("{:.3}", elapsed.as_secs_f64())),
        ];
        pairs.extend(report.key_values());
        pairs.push(("result".into(), if failed { "FAIL" } else { "PASS" }.into()));
        text.push_str(&kv_text(&pairs));
    } else {
        for r in &results {
            let max = r.errors.iter().copied().fold(0.0, f64::max);
            let _ = writeln!(
                text,
                "{:<20} encrypted {}  reference {}  {}  max error {max:.3e}",
                r.name,
                r.enc_class,
                r.ref_class,
                if r.enc_class == r.ref_class {
                    "match"
                } else {
                    "MISMATCH"
                }
            );
        }
        let _ = writeln!(text, "{report}");
        let _ = writeln!(text, "class matches  {matches}/{}", results.len());
        let _ = writeln!(text, "scores over bound {over} (over bound + slack {over_slack})");
        let _ = writeln!(text, "time           {:.1}s", elapsed.as_secs_f64());
        let _ = writeln!(text, "{}", if failed { "FAIL" } else { "PASS" });
    }
    if let Some(out) = &cli.out {
        files::write_atomic(out, text.as_bytes())?;
    }
    Ok(Outcome { text, failed })
}

fn convert_cmd(cli: &Cli, json: &Path) -> Result<Outcome> {
    let out = need(&cli.out, "out", "convert")?;
    let text = String::from_utf8(files::read(json)?).map_err(|_| Error::Format("JSON file is not UTF-8".into()))?;
    let net = crate::convert::from_json(&text)?;
    files::write_atomic(out, net.to_text().as_bytes())?;
    Ok(Outcome::ok(format!(
        "wrote {}-layer model to {}{}\n",
        net.layers.len(),
        out.display(),
        if net.is_preset_architecture() {
            " (preset architecture)"
        } else {
            ""
        }
    )))
}
