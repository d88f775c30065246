//! Hamming-space retrieval: exhaustive scan, multi-probe semantic hashing
//! over a 16-bit hash table with long-code re-ranking, the combined
//! normalized distance, and the Pearson-correlation baseline.

use crate::code::BinaryCode;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Ordered (id, code) pairs with a uniform code length.
#[derive(Debug, Clone)]
pub struct CodeDatabase {
    ids: Vec<String>,
    codes: Vec<BinaryCode>,
    code_len: usize,
}

impl CodeDatabase {
    pub fn from_pairs(pairs: Vec<(String, BinaryCode)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid_argument("code database is empty"));
        }
        let code_len = pairs[0].1.len();
        let mut ids = Vec::with_capacity(pairs.len());
        let mut codes = Vec::with_capacity(pairs.len());
        let mut seen = std::collections::HashSet::with_capacity(pairs.len());
        for (id, code) in pairs {
            if code.len() != code_len {
                return Err(Error::invalid_argument(format!(
                    "code for {id:?} has {} bits, database uses {code_len}",
                    code.len()
                )));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::invalid_argument(format!(
                    "duplicate image id {id:?}"
                )));
            }
            ids.push(id);
            codes.push(code);
        }
        Ok(CodeDatabase {
            ids,
            codes,
            code_len,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn code_len(&self) -> usize {
        self.code_len
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn code(&self, index: usize) -> &BinaryCode {
        &self.codes[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BinaryCode)> {
        self.ids.iter().map(String::as_str).zip(self.codes.iter())
    }
}

/// First-hit search result: the database index of the nearest code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchHit {
    pub index: usize,
    pub distance: u32,
}

/// Free-function Hamming distance; see [`BinaryCode::hamming`].
pub fn hamming(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    a.hamming(b)
}

/// Linear scan returning the database index with the smallest Hamming
/// distance; ties go to the smallest index.
pub fn exhaustive_search(query: &BinaryCode, db: &CodeDatabase) -> Result<SearchHit> {
    if query.len() != db.code_len() {
        return Err(Error::invalid_argument(format!(
            "query has {} bits, database codes have {}",
            query.len(),
            db.code_len()
        )));
    }
    let mut best: Option<SearchHit> = None;
    for (index, code) in db.codes.iter().enumerate() {
        let distance = query.hamming(code)?;
        if best.is_none_or(|b| distance < b.distance) {
            best = Some(SearchHit { index, distance });
        }
    }
    best.ok_or_else(|| Error::invalid_state("cannot search an empty database"))
}

/// Whether a probe visits the whole Hamming ball (≤ H) or only its shell
/// (exactly H flips).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeMode {
    UpTo,
    Exactly,
}

/// All 16-bit keys within distance H of `key` (or exactly H in shell
/// mode), lexicographically unordered but duplicate-free.
pub fn ball_keys(key: u16, flips: u32, mode: ProbeMode) -> Result<Vec<u16>> {
    if flips > 16 {
        return Err(Error::invalid_argument(format!(
            "cannot flip {flips} bits of a 16-bit key"
        )));
    }
    let mut keys = Vec::new();
    if mode == ProbeMode::UpTo || flips == 0 {
        keys.push(key);
    }
    // Combination walk: flip every size-h subset of the 16 positions.
    fn recurse(key: u16, start: u32, remaining: u32, keys: &mut Vec<u16>) {
        if remaining == 0 {
            keys.push(key);
            return;
        }
        for pos in start..=(16 - remaining) {
            recurse(key ^ (1u16 << pos), pos + 1, remaining - 1, keys);
        }
    }
    let from = if mode == ProbeMode::UpTo {
        1
    } else {
        flips.max(1)
    };
    if flips > 0 {
        for h in from..=flips {
            recurse(key, 0, h, &mut keys);
        }
    }
    Ok(keys)
}

/// The Hamming ball of radius `flips` around a 16-bit code, including the
/// code itself.
pub fn enumerate_ball(code: &BinaryCode, flips: u32) -> Result<Vec<BinaryCode>> {
    let key = code.as_u16_key()?;
    Ok(ball_keys(key, flips, ProbeMode::UpTo)?
        .into_iter()
        .map(BinaryCode::from_u16_key)
        .collect())
}

/// Hash table from 16-bit short code to the database indices that share
/// it, directly indexed by key (65,536 buckets).
#[derive(Debug, Clone)]
pub struct HashIndex {
    buckets: Vec<Vec<u32>>,
    entries: usize,
}

impl HashIndex {
    pub fn build(short_db: &CodeDatabase) -> Result<Self> {
        if short_db.code_len() != 16 {
            return Err(Error::invalid_argument(format!(
                "hash index needs 16-bit codes, got {}",
                short_db.code_len()
            )));
        }
        let mut buckets = vec![Vec::new(); 1 << 16];
        for (index, code) in short_db.codes.iter().enumerate() {
            buckets[code.as_u16_key()? as usize].push(index as u32);
        }
        Ok(HashIndex {
            buckets,
            entries: short_db.len(),
        })
    }

    pub fn bucket(&self, key: u16) -> &[u32] {
        &self.buckets[key as usize]
    }

    /// Total entries across all buckets (= database size).
    pub fn entries(&self) -> usize {
        self.entries
    }
}

/// A semantic-hashing result: the first hit after long-code re-ranking,
/// plus how many candidates the probe examined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SemanticHit {
    pub index: usize,
    pub distance: u32,
    pub candidates: usize,
}

/// Multi-probe retrieval: gathers the buckets of every short code within
/// `flips` of the query's short code, then re-ranks the union by long-code
/// Hamming distance (ties to the smallest database index). Returns `None`
/// when no bucket held a candidate — callers typically fall back to an
/// exhaustive scan.
pub fn semantic_hash_retrieve(
    query_short: &BinaryCode,
    query_long: &BinaryCode,
    index: &HashIndex,
    long_db: &CodeDatabase,
    flips: u32,
    mode: ProbeMode,
) -> Result<Option<SemanticHit>> {
    if query_long.len() != long_db.code_len() {
        return Err(Error::invalid_argument(format!(
            "query long code has {} bits, database codes have {}",
            query_long.len(),
            long_db.code_len()
        )));
    }
    if index.entries() != long_db.len() {
        return Err(Error::invalid_argument(format!(
            "hash index holds {} entries but the long-code database has {}",
            index.entries(),
            long_db.len()
        )));
    }
    let key = query_short.as_u16_key()?;
    let mut candidates: Vec<u32> = Vec::new();
    for probe in ball_keys(key, flips, mode)? {
        candidates.extend_from_slice(index.bucket(probe));
    }
    if candidates.is_empty() {
        return Ok(None);
    }
    // Ascending index order makes the tie-breaking identical to the
    // exhaustive scan's.
    candidates.sort_unstable();
    let total = candidates.len();
    let mut best: Option<SemanticHit> = None;
    for candidate in candidates {
        let idx = candidate as usize;
        let distance = query_long.hamming(long_db.code(idx))?;
        if best.is_none_or(|b| distance < b.distance) {
            best = Some(SemanticHit {
                index: idx,
                distance,
                candidates: total,
            });
        }
    }
    Ok(best)
}

/// Sum of the two normalized Hamming distances,
/// d(a)/len(a) + d(b)/len(b) ∈ [0,2].
pub fn combined_distance(
    q_first: &BinaryCode,
    c_first: &BinaryCode,
    q_second: &BinaryCode,
    c_second: &BinaryCode,
) -> Result<f64> {
    let d1 = q_first.hamming(c_first)?;
    let d2 = q_second.hamming(c_second)?;
    Ok(f64::from(d1) / q_first.len() as f64 + f64::from(d2) / q_second.len() as f64)
}

/// First hit under `combined_distance`; the two databases must be aligned
/// index-for-index over the same images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedHit {
    pub index: usize,
    pub distance: f64,
}

pub fn combined_search(
    query_first: &BinaryCode,
    query_second: &BinaryCode,
    first_db: &CodeDatabase,
    second_db: &CodeDatabase,
) -> Result<CombinedHit> {
    if first_db.len() != second_db.len() {
        return Err(Error::invalid_argument(format!(
            "databases hold {} and {} codes; they must align",
            first_db.len(),
            second_db.len()
        )));
    }
    let mut best: Option<CombinedHit> = None;
    for index in 0..first_db.len() {
        let distance = combined_distance(
            query_first,
            first_db.code(index),
            query_second,
            second_db.code(index),
        )?;
        if best.is_none_or(|b| distance < b.distance) {
            best = Some(CombinedHit { index, distance });
        }
    }
    best.ok_or_else(|| Error::invalid_state("cannot search an empty database"))
}

/// The Pearson baseline's result: highest absolute correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearsonHit {
    pub index: usize,
    pub correlation: f64,
}

/// Returns the database row with the highest |Pearson correlation| to the
/// query vector. Zero-variance candidates are skipped; ties go to the
/// smallest index.
pub fn pearson_retrieve(query: &[f64], db: &Matrix) -> Result<PearsonHit> {
    if query.len() != db.cols() {
        return Err(Error::invalid_argument(format!(
            "query has {} dimensions, database rows have {}",
            query.len(),
            db.cols()
        )));
    }
    let n = query.len() as f64;
    let q_mean = query.iter().sum::<f64>() / n;
    let q_var: f64 = query.iter().map(|&v| (v - q_mean).powi(2)).sum();
    if q_var == 0.0 {
        return Err(Error::invalid_argument(
            "query has zero variance; correlation is undefined",
        ));
    }
    let mut best: Option<PearsonHit> = None;
    for r in 0..db.rows() {
        let row = db.row(r);
        let mean = row.iter().sum::<f64>() / n;
        let mut cov = 0.0;
        let mut var = 0.0;
        for (&q, &c) in query.iter().zip(row) {
            cov += (q - q_mean) * (c - mean);
            var += (c - mean) * (c - mean);
        }
        if var == 0.0 {
            continue;
        }
        let corr = (cov / (q_var * var).sqrt()).abs();
        if best.is_none_or(|b| corr > b.correlation) {
            best = Some(PearsonHit {
                index: r,
                correlation: corr,
            });
        }
    }
    best.ok_or_else(|| Error::invalid_state("no candidate with nonzero variance"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_code(len: usize, rng: &mut Rng) -> BinaryCode {
        let bits: Vec<bool> = (0..len).map(|_| rng.next_f64() < 0.5).collect();
        BinaryCode::from_bits(&bits)
    }

    fn random_db(n: usize, len: usize, seed: u64) -> CodeDatabase {
        let mut rng = Rng::new(seed);
        CodeDatabase::from_pairs(
            (0..n)
                .map(|i| (format!("img{i:05}"), random_code(len, &mut rng)))
                .collect(),
        )
        .unwrap()
    }

    fn bits3(s: &str) -> BinaryCode {
        BinaryCode::from_bits(&s.chars().map(|c| c == '1').collect::<Vec<_>>())
    }

    #[test]
    fn database_rejects_mixed_lengths_and_duplicate_ids() {
        let mixed = vec![
            ("a".to_string(), BinaryCode::zeros(8)),
            ("b".to_string(), BinaryCode::zeros(16)),
        ];
        assert!(CodeDatabase::from_pairs(mixed).is_err());
        let dup = vec![
            ("a".to_string(), BinaryCode::zeros(8)),
            ("a".to_string(), BinaryCode::zeros(8)),
        ];
        assert!(CodeDatabase::from_pairs(dup).is_err());
        assert!(CodeDatabase::from_pairs(vec![]).is_err());
    }

    #[test]
    fn exhaustive_search_picks_earliest_among_ties() {
        // db {000, 011, 111}, query 001: distances are 1, 1, 2 — both 000
        // and 011 tie at distance 1, so the earlier row wins.
        let db = CodeDatabase::from_pairs(vec![
            ("a".to_string(), bits3("000")),
            ("b".to_string(), bits3("011")),
            ("c".to_string(), bits3("111")),
        ])
        .unwrap();
        let hit = exhaustive_search(&bits3("001"), &db).unwrap();
        assert_eq!(hit.index, 0);
        assert_eq!(hit.distance, 1);
        assert_eq!(db.id(hit.index), "a");
    }

    #[test]
    fn exhaustive_search_finds_exact_matches() {
        let db = random_db(100, 64, 1);
        let hit = exhaustive_search(db.code(37), &db).unwrap();
        assert_eq!(hit.distance, 0);
        // Index 37 unless an earlier duplicate exists (random codes, none).
        assert_eq!(hit.index, 37);
    }

    #[test]
    fn exhaustive_search_matches_naive_oracle() {
        let db = random_db(200, 512, 2);
        let mut rng = Rng::new(3);
        for _ in 0..50 {
            let query = random_code(512, &mut rng);
            let hit = exhaustive_search(&query, &db).unwrap();
            let mut naive_best = (usize::MAX, u32::MAX);
            for i in 0..db.len() {
                let d = query.hamming(db.code(i)).unwrap();
                if d < naive_best.1 {
                    naive_best = (i, d);
                }
            }
            assert_eq!((hit.index, hit.distance), naive_best);
        }
    }

    #[test]
    fn ball_counts_follow_binomial_sums() {
        // Σ_{h≤H} C(16,h) for H = 0..3 and the full space.
        for (flips, expect) in [(0u32, 1usize), (1, 17), (2, 137), (3, 697), (16, 65536)] {
            let keys = ball_keys(0x1234, flips, ProbeMode::UpTo).unwrap();
            assert_eq!(keys.len(), expect, "H={flips}");
            // No duplicates, and every key within range.
            let set: std::collections::HashSet<u16> = keys.iter().copied().collect();
            assert_eq!(set.len(), expect);
            for k in keys {
                assert!((k ^ 0x1234).count_ones() <= flips);
            }
        }
        assert!(ball_keys(0, 17, ProbeMode::UpTo).is_err());
    }

    #[test]
    fn shell_mode_keeps_only_the_exact_distance() {
        let keys = ball_keys(0xbeef, 2, ProbeMode::Exactly).unwrap();
        assert_eq!(keys.len(), 120); // C(16,2)
        for k in &keys {
            assert_eq!((k ^ 0xbeef).count_ones(), 2);
        }
        // Shell at H=0 is the code itself.
        assert_eq!(ball_keys(7, 0, ProbeMode::Exactly).unwrap(), vec![7]);
    }

    #[test]
    fn enumerate_ball_includes_the_code_itself() {
        let code = BinaryCode::from_u16_key(0x00ff);
        let ball = enumerate_ball(&code, 1).unwrap();
        assert_eq!(ball.len(), 17);
        assert!(ball.contains(&code));
        for c in &ball {
            assert!(code.hamming(c).unwrap() <= 1);
        }
    }

    #[test]
    fn hash_index_buckets_cover_the_database() {
        let db = random_db(500, 16, 4);
        let index = HashIndex::build(&db).unwrap();
        let total: usize = (0..=u16::MAX).map(|k| index.bucket(k).len()).sum();
        assert_eq!(total, db.len());
        assert_eq!(index.entries(), db.len());
        // Every id sits in the bucket of its own short code.
        for i in 0..db.len() {
            let key = db.code(i).as_u16_key().unwrap();
            assert!(index.bucket(key).contains(&(i as u32)));
        }
        assert!(HashIndex::build(&random_db(10, 32, 5)).is_err());
    }

    #[test]
    fn full_ball_probe_equals_exhaustive_search() {
        let short_db = random_db(800, 16, 6);
        let long_db = random_db(800, 512, 7);
        let index = HashIndex::build(&short_db).unwrap();
        let mut rng = Rng::new(8);
        for _ in 0..25 {
            let qs = random_code(16, &mut rng);
            let ql = random_code(512, &mut rng);
            let semantic = semantic_hash_retrieve(&qs, &ql, &index, &long_db, 16, ProbeMode::UpTo)
                .unwrap()
                .expect("H=16 probes every bucket");
            let exhaustive = exhaustive_search(&ql, &long_db).unwrap();
            assert_eq!(semantic.index, exhaustive.index);
            assert_eq!(semantic.distance, exhaustive.distance);
            assert_eq!(semantic.candidates, long_db.len());
        }
    }

    #[test]
    fn probe_candidates_stay_within_the_ball() {
        let short_db = random_db(2000, 16, 9);
        let long_db = random_db(2000, 64, 10);
        let index = HashIndex::build(&short_db).unwrap();
        let mut rng = Rng::new(11);
        for flips in [0u32, 1, 2] {
            let qs = random_code(16, &mut rng);
            let ql = random_code(64, &mut rng);
            if let Some(hit) =
                semantic_hash_retrieve(&qs, &ql, &index, &long_db, flips, ProbeMode::UpTo).unwrap()
            {
                let short_distance = qs.hamming(short_db.code(hit.index)).unwrap();
                assert!(short_distance <= flips);
            }
        }
    }

    #[test]
    fn first_hit_distance_is_monotone_in_the_radius() {
        let short_db = random_db(3000, 16, 12);
        let long_db = random_db(3000, 128, 13);
        let index = HashIndex::build(&short_db).unwrap();
        let mut rng = Rng::new(14);
        for _ in 0..10 {
            let qs = random_code(16, &mut rng);
            let ql = random_code(128, &mut rng);
            let mut prev = u32::MAX;
            for flips in 0..=16 {
                if let Some(hit) =
                    semantic_hash_retrieve(&qs, &ql, &index, &long_db, flips, ProbeMode::UpTo)
                        .unwrap()
                {
                    assert!(
                        hit.distance <= prev,
                        "H={flips} went {prev} -> {}",
                        hit.distance
                    );
                    prev = hit.distance;
                }
            }
        }
    }

    #[test]
    fn empty_candidate_set_is_a_signal_not_a_crash() {
        // One entry at key 0x0000; a query at 0xffff with H=0 probes only
        // its own (empty) bucket.
        let short_db =
            CodeDatabase::from_pairs(vec![("only".to_string(), BinaryCode::from_u16_key(0x0000))])
                .unwrap();
        let long_db =
            CodeDatabase::from_pairs(vec![("only".to_string(), BinaryCode::zeros(64))]).unwrap();
        let index = HashIndex::build(&short_db).unwrap();
        let query_short = BinaryCode::from_u16_key(0xffff);
        let query_long = BinaryCode::zeros(64);
        let miss = semantic_hash_retrieve(
            &query_short,
            &query_long,
            &index,
            &long_db,
            0,
            ProbeMode::UpTo,
        )
        .unwrap();
        assert!(miss.is_none());
        // The full ball still reaches it.
        let hit = semantic_hash_retrieve(
            &query_short,
            &query_long,
            &index,
            &long_db,
            16,
            ProbeMode::UpTo,
        )
        .unwrap();
        assert_eq!(hit.unwrap().index, 0);
    }

    #[test]
    fn combined_distance_sums_normalized_halves() {
        let a = BinaryCode::zeros(2048);
        let mut a_half = a.clone();
        for i in 0..1024 {
            a_half.flip_bit(i);
        }
        let b = BinaryCode::zeros(512);
        let mut b_half = b.clone();
        for i in 0..256 {
            b_half.flip_bit(i);
        }
        assert_eq!(combined_distance(&a, &a, &b, &b).unwrap(), 0.0);
        assert_eq!(combined_distance(&a, &a_half, &b, &b_half).unwrap(), 1.0);

        let mut a_full = a.clone();
        for i in 0..2048 {
            a_full.flip_bit(i);
        }
        let mut b_full = b.clone();
        for i in 0..512 {
            b_full.flip_bit(i);
        }
        assert_eq!(combined_distance(&a, &a_full, &b, &b_full).unwrap(), 2.0);
    }

    #[test]
    fn combined_search_scans_aligned_databases() {
        let first = random_db(300, 64, 15);
        let second = random_db(300, 16, 16);
        let mut rng = Rng::new(17);
        let qf = random_code(64, &mut rng);
        let qs = random_code(16, &mut rng);
        let hit = combined_search(&qf, &qs, &first, &second).unwrap();
        // Naive oracle.
        let mut best = (usize::MAX, f64::INFINITY);
        for i in 0..300 {
            let d = combined_distance(&qf, first.code(i), &qs, second.code(i)).unwrap();
            if d < best.1 {
                best = (i, d);
            }
        }
        assert_eq!((hit.index, hit.distance), best);

        let misaligned = random_db(299, 16, 18);
        assert!(combined_search(&qf, &qs, &first, &misaligned).is_err());
    }

    #[test]
    fn hamming_is_a_metric() {
        let mut rng = Rng::new(19);
        for _ in 0..200 {
            let a = random_code(64, &mut rng);
            let b = random_code(64, &mut rng);
            let c = random_code(64, &mut rng);
            let ab = a.hamming(&b).unwrap();
            let ba = b.hamming(&a).unwrap();
            let ac = a.hamming(&c).unwrap();
            let cb = c.hamming(&b).unwrap();
            assert_eq!(ab, ba);
            assert_eq!(a.hamming(&a).unwrap(), 0);
            assert!(ab <= ac + cb, "triangle violated: {ab} > {ac}+{cb}");
        }
    }

    #[test]
    fn pearson_finds_itself_and_its_negation() {
        let mut rng = Rng::new(20);
        let query: Vec<f64> = (0..32).map(|_| rng.next_f64()).collect();
        let negated: Vec<f64> = query.iter().map(|&v| 1.0 - v).collect();

        let mut data = Vec::new();
        data.extend_from_slice(&negated);
        data.extend_from_slice(&query);
        let db = Matrix::from_vec(2, 32, data);

        let hit = pearson_retrieve(&query, &db).unwrap();
        // Both rows reach |corr| = 1; the earlier row (the negation) wins.
        assert_eq!(hit.index, 0);
        assert!((hit.correlation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_matches_direct_formula_oracle() {
        let mut rng = Rng::new(21);
        let db = Matrix::from_fn(100, 16, |_, _| rng.next_f64());
        let query: Vec<f64> = (0..16).map(|_| rng.next_f64()).collect();
        let hit = pearson_retrieve(&query, &db).unwrap();

        let corr = |row: &[f64]| -> f64 {
            let n = 16.0;
            let mq = query.iter().sum::<f64>() / n;
            let mr = row.iter().sum::<f64>() / n;
            let cov: f64 = query
                .iter()
                .zip(row)
                .map(|(&q, &r)| (q - mq) * (r - mr))
                .sum();
            let vq: f64 = query.iter().map(|&q| (q - mq).powi(2)).sum();
            let vr: f64 = row.iter().map(|&r| (r - mr).powi(2)).sum();
            (cov / (vq * vr).sqrt()).abs()
        };
        let mut best = (usize::MAX, -1.0);
        for i in 0..100 {
            let c = corr(db.row(i));
            if c > best.1 {
                best = (i, c);
            }
        }
        assert_eq!(hit.index, best.0);
        assert!((hit.correlation - best.1).abs() < 1e-12);
    }

    #[test]
    fn pearson_rejects_flat_queries_and_skips_flat_rows() {
        let db = Matrix::from_vec(2, 4, vec![1.0, 1.0, 1.0, 1.0, 0.1, 0.4, 0.3, 0.9]);
        assert!(pearson_retrieve(&[2.0, 2.0, 2.0, 2.0], &db).is_err());
        let hit = pearson_retrieve(&[0.2, 0.5, 0.1, 0.8], &db).unwrap();
        assert_eq!(hit.index, 1, "constant row must be skipped");

        let flat_db = Matrix::from_vec(1, 4, vec![3.0, 3.0, 3.0, 3.0]);
        assert!(pearson_retrieve(&[0.2, 0.5, 0.1, 0.8], &flat_db).is_err());
    }
}
