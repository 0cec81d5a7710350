use std::io::Write;
use std::path::{Path, PathBuf};

use fhecnn::cnn::{NetworkSpec, PlainImage, Shape, Tensor};
use fhecnn::fhe::{wire, FheParams, SecretKey};
use fhecnn::{Error, Result};

pub fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<NetworkSpec> {
    let text = String::from_utf8(read(path)?).map_err(|_| Error::Format("model file is not UTF-8".into()))?;
    NetworkSpec::parse(&text)
}

pub fn load_key(path: &Path) -> Result<(FheParams, SecretKey)> {
    wire::read_secret_key(&mut read(path)?.as_slice())
}

pub fn load_tensor(path: &Path) -> Result<Tensor> {
    Tensor::read_from(&mut read(path)?.as_slice())
}

/// PGM by magic bytes, otherwise CSV shaped like `shape`.
pub fn load_image(path: &Path, shape: Option<Shape>) -> Result<PlainImage> {
    let bytes = read(path)?;
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        return PlainImage::from_pgm(&bytes);
    }
    let shape = shape.ok_or_else(|| Error::Usage("CSV images need --model to supply the input shape".into()))?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Format("image is neither PGM nor text".into()))?;
    PlainImage::from_csv(&text, shape)
}

pub fn expand_images(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "pgm"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::Usage("no images found".into()));
    }
    Ok(out)
}
