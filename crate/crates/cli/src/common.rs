//! Shared plumbing: fingerprint headers, text output, aligned code files.

use std::path::{Path, PathBuf};

use ddahash::code::BinaryCode;
use ddahash::storage;
use ddahash::{Error, Result};

/// Header lines for an output file: the tool name and the complete
/// configuration of the run. Deliberately free of timestamps and
/// durations so identical invocations write identical bytes.
pub fn fingerprint(
    tool: &str,
    seed: u64,
    threads: usize,
    fields: &[(&str, String)],
) -> Vec<String> {
    let mut config = format!("seed={seed} threads={threads}");
    for (key, value) in fields {
        config.push_str(&format!(" {key}={value}"));
    }
    vec![format!("ddahash {tool} v1"), format!("config {config}")]
}

/// Writes header lines as `#` comments followed by the body lines.
pub fn write_lines(path: &Path, header: &[String], body: &[String]) -> Result<()> {
    let mut text = String::new();
    for line in header {
        text.push_str("# ");
        text.push_str(line);
        text.push('\n');
    }
    for line in body {
        text.push_str(line);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Sidecar path `<out>.<suffix>` next to a primary output.
pub fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

/// Codes as loaded from a file: one `(image_id, code)` pair per line.
pub type NamedCodes = Vec<(String, BinaryCode)>;

/// Loads two code files that must describe the same images in the same
/// order — typically short and long codes encoded from one manifest.
pub fn load_aligned_codes(first: &Path, second: &Path) -> Result<(NamedCodes, NamedCodes)> {
    let a = storage::load_codes(first)?;
    let b = storage::load_codes(second)?;
    if a.len() != b.len() {
        return Err(Error::invalid_argument(format!(
            "{} holds {} codes but {} holds {}; the files must describe the same images",
            first.display(),
            a.len(),
            second.display(),
            b.len()
        )));
    }
    for ((id_a, _), (id_b, _)) in a.iter().zip(&b) {
        if id_a != id_b {
            return Err(Error::invalid_argument(format!(
                "{} and {} disagree on image order ({id_a:?} vs {id_b:?})",
                first.display(),
                second.display()
            )));
        }
    }
    Ok((a, b))
}

/// A required flag that depends on the chosen strategy or mode.
pub fn require<'a>(value: &'a Option<PathBuf>, flag: &str, context: &str) -> Result<&'a PathBuf> {
    value
        .as_ref()
        .ok_or_else(|| Error::invalid_argument(format!("{context} needs --{flag}")))
}

pub fn show(path: &Path) -> String {
    path.display().to_string()
}
