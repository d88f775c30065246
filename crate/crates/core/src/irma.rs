//! IRMA codes and the hierarchical retrieval error.
//!
//! A code is 13 characters in four structures — technical (4), directional
//! (3), anatomical (3), biological (3) — written "TTTT-DDD-AAA-BBB". The
//! error between a query's code and its first hit weighs each mismatch by
//! 1/(branch count) and 1/(position), and a mismatch at position h poisons
//! every deeper position of its structure.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Characters per structure.
pub const STRUCTURE_LENS: [usize; 4] = [4, 3, 3, 3];
/// Offset of each structure in the 13-character code.
const STRUCTURE_STARTS: [usize; 4] = [0, 4, 7, 10];
/// Total code characters.
pub const CODE_CHARS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IrmaCode {
    /// Lowercase ASCII from {0-9, a-z}, structures concatenated.
    chars: [u8; CODE_CHARS],
}

impl IrmaCode {
    /// Accepts the hyphenated canonical form or the bare 13 characters;
    /// uppercase input is lowercased.
    pub fn parse(text: &str) -> Result<Self> {
        let raw = text.trim();
        let bytes = raw.as_bytes();
        let compact: Vec<u8> = match bytes.len() {
            16 => {
                for pos in [4, 8, 12] {
                    if bytes[pos] != b'-' {
                        return Err(Error::parse(format!(
                            "expected '-' at position {pos} of {raw:?}"
                        )));
                    }
                }
                bytes
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| ![4, 8, 12].contains(i))
                    .map(|(_, &b)| b)
                    .collect()
            }
            13 => bytes.to_vec(),
            n => {
                return Err(Error::parse(format!(
                    "IRMA code {raw:?} has {n} characters, expected 13 bare or 16 hyphenated"
                )))
            }
        };
        let mut chars = [0u8; CODE_CHARS];
        for (i, &b) in compact.iter().enumerate() {
            let lc = b.to_ascii_lowercase();
            if !(lc.is_ascii_digit() || lc.is_ascii_lowercase()) {
                return Err(Error::parse(format!(
                    "invalid character {:?} at position {i} of {raw:?}",
                    b as char
                )));
            }
            chars[i] = lc;
        }
        Ok(IrmaCode { chars })
    }

    /// The j-th structure (1-based) as text.
    pub fn structure(&self, j: usize) -> &str {
        assert!((1..=4).contains(&j), "structure index {j} out of 1..=4");
        let start = STRUCTURE_STARTS[j - 1];
        std::str::from_utf8(&self.chars[start..start + STRUCTURE_LENS[j - 1]])
            .expect("code characters are ASCII")
    }

    /// Character at structure j, position i (both 1-based).
    fn char_at(&self, j: usize, i: usize) -> u8 {
        self.chars[STRUCTURE_STARTS[j - 1] + i - 1]
    }
}

impl fmt::Display for IrmaCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{}-{}-{}",
            self.structure(1),
            self.structure(2),
            self.structure(3),
            self.structure(4)
        )
    }
}

fn check_indices(j: usize, i: usize) -> Result<()> {
    if !(1..=4).contains(&j) {
        return Err(Error::invalid_argument(format!(
            "structure index {j} out of 1..=4"
        )));
    }
    if i == 0 || i > STRUCTURE_LENS[j - 1] {
        return Err(Error::invalid_argument(format!(
            "position {i} out of 1..={} for structure {j}",
            STRUCTURE_LENS[j - 1]
        )));
    }
    Ok(())
}

/// Hierarchical mismatch indicator: 1 iff the codes differ at any position
/// h ≤ i within structure j (indices 1-based).
pub fn delta(query: &IrmaCode, retrieved: &IrmaCode, j: usize, i: usize) -> Result<u8> {
    check_indices(j, i)?;
    for h in 1..=i {
        if query.char_at(j, h) != retrieved.char_at(j, h) {
            return Ok(1);
        }
    }
    Ok(0)
}

/// Branch counts b_{j,i}: how many characters the code hierarchy can take
/// at structure j, position i. Fractional counts arise when averaging over
/// prefixes; all counts are ≥ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchTable {
    counts: [Vec<f64>; 4],
}

impl BranchTable {
    /// The same branch count everywhere — useful for hand-checked fixtures.
    pub fn uniform(b: f64) -> Result<Self> {
        if b < 1.0 || b.is_nan() {
            return Err(Error::invalid_argument(format!(
                "branch count must be ≥ 1, got {b}"
            )));
        }
        Ok(BranchTable {
            counts: STRUCTURE_LENS.map(|len| vec![b; len]),
        })
    }

    /// Derives the table from an observed code set. Unconditional mode
    /// counts distinct characters at each (j,i) across the whole set;
    /// prefix-conditioned mode groups codes by their structure-j prefix of
    /// length i−1 and averages the per-group distinct counts. Counts are
    /// floored at 1 either way.
    pub fn from_codes(codes: &[IrmaCode], prefix_conditioned: bool) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::invalid_argument(
                "cannot derive branch counts from an empty code set",
            ));
        }
        let mut counts = STRUCTURE_LENS.map(|len| vec![1.0; len]);
        for j in 1..=4 {
            for i in 1..=STRUCTURE_LENS[j - 1] {
                let count = if prefix_conditioned {
                    // prefix (chars 1..i-1 of structure j) -> distinct chars at i
                    let mut groups: std::collections::BTreeMap<
                        Vec<u8>,
                        std::collections::BTreeSet<u8>,
                    > = std::collections::BTreeMap::new();
                    for code in codes {
                        let prefix: Vec<u8> = (1..i).map(|h| code.char_at(j, h)).collect();
                        groups.entry(prefix).or_default().insert(code.char_at(j, i));
                    }
                    let total: usize = groups.values().map(|s| s.len()).sum();
                    total as f64 / groups.len() as f64
                } else {
                    let distinct: std::collections::BTreeSet<u8> =
                        codes.iter().map(|c| c.char_at(j, i)).collect();
                    distinct.len() as f64
                };
                counts[j - 1][i - 1] = count.max(1.0);
            }
        }
        Ok(BranchTable { counts })
    }

    /// Branch count at structure j, position i (1-based).
    pub fn count(&self, j: usize, i: usize) -> Result<f64> {
        check_indices(j, i)?;
        Ok(self.counts[j - 1][i - 1])
    }

    /// Writes "j,i,count" lines.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for j in 1..=4 {
            for i in 1..=STRUCTURE_LENS[j - 1] {
                out.push_str(&format!("{j},{i},{}\n", self.counts[j - 1][i - 1]));
            }
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    /// Reads "j,i,count" lines; every position must appear exactly once.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut counts = STRUCTURE_LENS.map(|len| vec![0.0; len]);
        let mut seen = STRUCTURE_LENS.map(|len| vec![false; len]);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::format(format!(
                    "line {}: expected j,i,count, got {line:?}",
                    lineno + 1
                )));
            }
            let j: usize = fields[0]
                .trim()
                .parse()
                .map_err(|_| Error::format(format!("line {}: bad structure index", lineno + 1)))?;
            let i: usize = fields[1]
                .trim()
                .parse()
                .map_err(|_| Error::format(format!("line {}: bad position index", lineno + 1)))?;
            let count: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|_| Error::format(format!("line {}: bad count", lineno + 1)))?;
            check_indices(j, i).map_err(|e| Error::format(format!("line {}: {e}", lineno + 1)))?;
            if count < 1.0 {
                return Err(Error::format(format!(
                    "line {}: branch count {count} < 1",
                    lineno + 1
                )));
            }
            if seen[j - 1][i - 1] {
                return Err(Error::format(format!(
                    "line {}: duplicate entry for ({j},{i})",
                    lineno + 1
                )));
            }
            seen[j - 1][i - 1] = true;
            counts[j - 1][i - 1] = count;
        }
        for j in 1..=4 {
            for i in 1..=STRUCTURE_LENS[j - 1] {
                if !seen[j - 1][i - 1] {
                    return Err(Error::format(format!("missing entry for ({j},{i})")));
                }
            }
        }
        Ok(BranchTable { counts })
    }
}

/// Error contribution of one structure:
/// Σ_i (1/b_{j,i}) (1/i) δ(query, retrieved, j, i).
pub fn structure_error(
    query: &IrmaCode,
    retrieved: &IrmaCode,
    table: &BranchTable,
    j: usize,
) -> Result<f64> {
    check_indices(j, 1)?;
    let mut sum = 0.0;
    for i in 1..=STRUCTURE_LENS[j - 1] {
        let d = delta(query, retrieved, j, i)?;
        if d == 1 {
            sum += 1.0 / table.count(j, i)? / i as f64;
        }
    }
    Ok(sum)
}

/// Retrieval error of one (query, first hit) pair: the sum over all four
/// structures of `structure_error`.
pub fn image_error(query: &IrmaCode, retrieved: &IrmaCode, table: &BranchTable) -> Result<f64> {
    let mut sum = 0.0;
    for j in 1..=4 {
        sum += structure_error(query, retrieved, table, j)?;
    }
    Ok(sum)
}

/// Total error over all (query, retrieved) pairs.
pub fn total_error(pairs: &[(IrmaCode, IrmaCode)], table: &BranchTable) -> Result<f64> {
    let mut sum = 0.0;
    for (q, r) in pairs {
        sum += image_error(q, r, table)?;
    }
    Ok(sum)
}

/// Per-structure subtotals over all pairs, for evaluation breakdowns.
pub fn total_structure_errors(
    pairs: &[(IrmaCode, IrmaCode)],
    table: &BranchTable,
) -> Result<[f64; 4]> {
    let mut sums = [0.0; 4];
    for (q, r) in pairs {
        for j in 1..=4 {
            sums[j - 1] += structure_error(q, r, table, j)?;
        }
    }
    Ok(sums)
}

/// Reads an "image_id;TTTT-DDD-AAA-BBB" codes file.
pub fn load_irma_codes(path: &Path) -> Result<Vec<(String, IrmaCode)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, code) = line.split_once(';').ok_or_else(|| {
            Error::format(format!(
                "line {}: expected image_id;code, got {line:?}",
                lineno + 1
            ))
        })?;
        let code = IrmaCode::parse(code)
            .map_err(|e| Error::format(format!("line {}: {e}", lineno + 1)))?;
        out.push((id.trim().to_string(), code));
    }
    Ok(out)
}

/// Writes an "image_id;TTTT-DDD-AAA-BBB" codes file.
pub fn save_irma_codes(path: &Path, codes: &[(String, IrmaCode)]) -> Result<()> {
    let mut out = String::new();
    for (id, code) in codes {
        out.push_str(&format!("{id};{code}\n"));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}
