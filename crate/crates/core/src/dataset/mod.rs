//! Dataset handling: image IO and preprocessing, manifest files, and the
//! synthetic corpus generator.
//!
//! A manifest is a UTF-8 text file with one record per line:
//!
//! ```text
//! image_id;relative_path;irma_code
//! ```
//!
//! The third field is optional (the trailing `;` may be omitted entirely).
//! Paths are resolved relative to the manifest's own directory, `#` lines
//! and blank lines are skipped, and every referenced file must exist at
//! load time.

pub mod image;
pub mod synth;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::irma::IrmaCode;

pub use image::{
    load_grayscale, normalize, parse_pgm, preprocess, resize_bilinear, save_pgm, to_rows,
    ImageVector, RawImage,
};
pub use synth::{class_code, generate_synthetic, SyntheticImage};

/// One manifest record. `path` has already been resolved against the
/// manifest's directory.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub irma: Option<IrmaCode>,
}

/// Loads and validates a manifest: ids must be unique and every referenced
/// image file must exist.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.splitn(3, ';');
        let id = fields.next().unwrap_or("").trim();
        let rel = fields.next().map(str::trim).unwrap_or("");
        let code = fields.next().map(str::trim).unwrap_or("");
        if id.is_empty() || rel.is_empty() {
            return Err(Error::parse(format!(
                "{}:{}: expected image_id;relative_path[;irma_code]",
                path.display(),
                lineno + 1
            )));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::parse(format!(
                "{}:{}: duplicate image id {id:?}",
                path.display(),
                lineno + 1
            )));
        }
        let irma = if code.is_empty() {
            None
        } else {
            Some(
                IrmaCode::parse(code)
                    .map_err(|e| Error::parse(format!("{}:{}: {e}", path.display(), lineno + 1)))?,
            )
        };
        let resolved = base.join(rel);
        if !resolved.is_file() {
            return Err(Error::parse(format!(
                "{}:{}: referenced file {} does not exist",
                path.display(),
                lineno + 1,
                resolved.display()
            )));
        }
        entries.push(ManifestEntry {
            id: id.to_string(),
            path: resolved,
            irma,
        });
    }
    if entries.is_empty() {
        return Err(Error::parse(format!(
            "{}: manifest holds no records",
            path.display()
        )));
    }
    Ok(entries)
}

/// Writes a manifest. `paths` must already be relative to the manifest's
/// directory; they are written verbatim.
pub fn save_manifest(path: &Path, records: &[(String, String, Option<IrmaCode>)]) -> Result<()> {
    let mut text = String::new();
    for (id, rel, irma) in records {
        match irma {
            Some(code) => writeln!(text, "{id};{rel};{code}").expect("string write"),
            None => writeln!(text, "{id};{rel}").expect("string write"),
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
