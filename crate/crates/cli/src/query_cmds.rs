//! Query-side commands: retrieve, evaluate, bench.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;

use ddahash::code::BinaryCode;
use ddahash::hasher::build_encoder;
use ddahash::index::{
    combined_search, exhaustive_search, pearson_retrieve, semantic_hash_retrieve, CodeDatabase,
    HashIndex, ProbeMode,
};
use ddahash::irma::{load_irma_codes, total_error, total_structure_errors, BranchTable, IrmaCode};
use ddahash::matrix::Matrix;
use ddahash::stats::mean_and_ci95;
use ddahash::storage::{load_codes, load_model, load_projections};
use ddahash::{Error, Result};

use crate::common::{fingerprint, load_aligned_codes, require, show, sidecar, write_lines};

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Strategy {
    /// Linear Hamming scan over one code file.
    Exhaustive,
    /// 16-bit hash probe with long-code re-ranking.
    SemanticHash,
    /// Sum of normalized Hamming distances over two aligned code files.
    Combined,
    /// Highest |Pearson correlation| over raw projection vectors.
    Pearson,
}

#[derive(Args)]
pub struct RetrieveArgs {
    #[arg(long, value_enum)]
    strategy: Strategy,

    /// Database codes (exhaustive strategy).
    #[arg(long)]
    db: Option<PathBuf>,

    /// Query codes (exhaustive strategy).
    #[arg(long)]
    queries: Option<PathBuf>,

    /// 16-bit bucket codes of the database (semantic-hash).
    #[arg(long)]
    db_short: Option<PathBuf>,

    /// Long re-ranking codes of the database (semantic-hash).
    #[arg(long)]
    db_long: Option<PathBuf>,

    /// 16-bit bucket codes of the queries (semantic-hash).
    #[arg(long)]
    queries_short: Option<PathBuf>,

    /// Long re-ranking codes of the queries (semantic-hash).
    #[arg(long)]
    queries_long: Option<PathBuf>,

    /// Hamming ball radius H over the 16-bit keys.
    #[arg(long, default_value_t = 2)]
    bit_flips: u32,

    /// Probe only keys at exactly H flips instead of the whole ball.
    #[arg(long)]
    exact_h: bool,

    /// First code file of the combined distance (database side).
    #[arg(long)]
    db_a: Option<PathBuf>,

    /// Second code file of the combined distance (database side).
    #[arg(long)]
    db_b: Option<PathBuf>,

    /// First code file of the combined distance (query side).
    #[arg(long)]
    queries_a: Option<PathBuf>,

    /// Second code file of the combined distance (query side).
    #[arg(long)]
    queries_b: Option<PathBuf>,

    /// Projection dump of the database (pearson strategy).
    #[arg(long)]
    db_projections: Option<PathBuf>,

    /// Projection dump of the queries (pearson strategy).
    #[arg(long)]
    query_projections: Option<PathBuf>,

    /// Results file to write; per-query latency goes to `<out>.latency`.
    #[arg(long)]
    out: PathBuf,
}

/// One retrieval answer: the hit, its printed distance, and the wall time.
struct Answer {
    query_id: String,
    hit_id: String,
    distance: String,
    nanos: u128,
}

fn semantic_first_hit(
    query_short: &BinaryCode,
    query_long: &BinaryCode,
    index: &HashIndex,
    long_db: &CodeDatabase,
    flips: u32,
    mode: ProbeMode,
) -> Result<(usize, u32, bool)> {
    match semantic_hash_retrieve(query_short, query_long, index, long_db, flips, mode)? {
        Some(hit) => Ok((hit.index, hit.distance, false)),
        None => {
            // No probed bucket held anything: fall back to the full scan so
            // every query still gets its first hit.
            let hit = exhaustive_search(query_long, long_db)?;
            Ok((hit.index, hit.distance, true))
        }
    }
}

pub fn retrieve(seed: u64, threads: usize, args: &RetrieveArgs) -> Result<()> {
    let mut fields: Vec<(&str, String)> = Vec::new();
    let mut distance_column = "hamming";
    let mut fallbacks = 0usize;

    let answers: Vec<Answer> = match args.strategy {
        Strategy::Exhaustive => {
            let db_path = require(&args.db, "db", "strategy exhaustive")?;
            let queries_path = require(&args.queries, "queries", "strategy exhaustive")?;
            fields.push(("strategy", "exhaustive".into()));
            fields.push(("db", show(db_path)));
            fields.push(("queries", show(queries_path)));
            let db = CodeDatabase::from_pairs(load_codes(db_path)?)?;
            load_codes(queries_path)?
                .into_iter()
                .map(|(query_id, code)| {
                    let start = Instant::now();
                    let hit = exhaustive_search(&code, &db)?;
                    Ok(Answer {
                        query_id,
                        hit_id: db.id(hit.index).to_string(),
                        distance: hit.distance.to_string(),
                        nanos: start.elapsed().as_nanos(),
                    })
                })
                .collect::<Result<_>>()?
        }
        Strategy::SemanticHash => {
            let context = "strategy semantic-hash";
            let ds = require(&args.db_short, "db-short", context)?;
            let dl = require(&args.db_long, "db-long", context)?;
            let qs = require(&args.queries_short, "queries-short", context)?;
            let ql = require(&args.queries_long, "queries-long", context)?;
            let mode = if args.exact_h {
                ProbeMode::Exactly
            } else {
                ProbeMode::UpTo
            };
            fields.push(("strategy", "semantic-hash".into()));
            fields.push(("db_short", show(ds)));
            fields.push(("db_long", show(dl)));
            fields.push(("queries_short", show(qs)));
            fields.push(("queries_long", show(ql)));
            fields.push(("bit_flips", args.bit_flips.to_string()));
            fields.push((
                "probe_mode",
                if args.exact_h { "exactly" } else { "up-to" }.to_string(),
            ));
            let (short_db, long_db) = load_aligned_codes(ds, dl)?;
            let short_db = CodeDatabase::from_pairs(short_db)?;
            let long_db = CodeDatabase::from_pairs(long_db)?;
            let index = HashIndex::build(&short_db)?;
            let (short_q, long_q) = load_aligned_codes(qs, ql)?;
            short_q
                .into_iter()
                .zip(long_q)
                .map(|((query_id, short), (_, long))| {
                    let start = Instant::now();
                    let (idx, distance, fell_back) =
                        semantic_first_hit(&short, &long, &index, &long_db, args.bit_flips, mode)?;
                    fallbacks += usize::from(fell_back);
                    Ok(Answer {
                        query_id,
                        hit_id: long_db.id(idx).to_string(),
                        distance: distance.to_string(),
                        nanos: start.elapsed().as_nanos(),
                    })
                })
                .collect::<Result<_>>()?
        }
        Strategy::Combined => {
            let context = "strategy combined";
            let da = require(&args.db_a, "db-a", context)?;
            let db_ = require(&args.db_b, "db-b", context)?;
            let qa = require(&args.queries_a, "queries-a", context)?;
            let qb = require(&args.queries_b, "queries-b", context)?;
            distance_column = "combined";
            fields.push(("strategy", "combined".into()));
            fields.push(("db_a", show(da)));
            fields.push(("db_b", show(db_)));
            fields.push(("queries_a", show(qa)));
            fields.push(("queries_b", show(qb)));
            let (first_db, second_db) = load_aligned_codes(da, db_)?;
            let first_db = CodeDatabase::from_pairs(first_db)?;
            let second_db = CodeDatabase::from_pairs(second_db)?;
            let (first_q, second_q) = load_aligned_codes(qa, qb)?;
            first_q
                .into_iter()
                .zip(second_q)
                .map(|((query_id, a), (_, b))| {
                    let start = Instant::now();
                    let hit = combined_search(&a, &b, &first_db, &second_db)?;
                    Ok(Answer {
                        query_id,
                        hit_id: first_db.id(hit.index).to_string(),
                        distance: hit.distance.to_string(),
                        nanos: start.elapsed().as_nanos(),
                    })
                })
                .collect::<Result<_>>()?
        }
        Strategy::Pearson => {
            let context = "strategy pearson";
            let dp = require(&args.db_projections, "db-projections", context)?;
            let qp = require(&args.query_projections, "query-projections", context)?;
            distance_column = "correlation";
            fields.push(("strategy", "pearson".into()));
            fields.push(("db_projections", show(dp)));
            fields.push(("query_projections", show(qp)));
            let db_records = load_projections(dp)?;
            let dim = db_records[0].1.len();
            let mut data = Vec::with_capacity(db_records.len() * dim);
            let mut db_ids = Vec::with_capacity(db_records.len());
            for (id, values) in db_records {
                data.extend_from_slice(&values);
                db_ids.push(id);
            }
            let db = Matrix::from_vec(db_ids.len(), dim, data);
            load_projections(qp)?
                .into_iter()
                .map(|(query_id, values)| {
                    let start = Instant::now();
                    let hit = pearson_retrieve(&values, &db)?;
                    Ok(Answer {
                        query_id,
                        hit_id: db_ids[hit.index].clone(),
                        distance: hit.correlation.to_string(),
                        nanos: start.elapsed().as_nanos(),
                    })
                })
                .collect::<Result<_>>()?
        }
    };

    let mut header = fingerprint("retrieve", seed, threads, &fields);
    header.push(format!("columns query_id retrieved_id {distance_column}"));
    let body: Vec<String> = answers
        .iter()
        .map(|a| format!("{} {} {}", a.query_id, a.hit_id, a.distance))
        .collect();
    write_lines(&args.out, &header, &body)?;

    let mut latency_header = fingerprint("retrieve", seed, threads, &fields);
    latency_header.push("columns query_id nanoseconds".to_string());
    let latency_body: Vec<String> = answers
        .iter()
        .map(|a| format!("{} {}", a.query_id, a.nanos))
        .collect();
    write_lines(
        &sidecar(&args.out, "latency"),
        &latency_header,
        &latency_body,
    )?;

    if fallbacks > 0 {
        eprintln!(
            "{fallbacks} of {} queries fell back to the exhaustive scan",
            answers.len()
        );
    }
    println!(
        "retrieved {} first hits to {}",
        answers.len(),
        show(&args.out)
    );
    Ok(())
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Results file from `retrieve`.
    #[arg(long)]
    results: PathBuf,

    /// `image_id;irma_code` file covering every query id.
    #[arg(long)]
    query_irma: PathBuf,

    /// `image_id;irma_code` file covering every retrievable id.
    #[arg(long)]
    db_irma: PathBuf,

    /// Branch counts: `uniform:<b>`, `estimate`, `estimate-prefix`, or a
    /// path to a `j,i,count` file.
    #[arg(long, default_value = "estimate")]
    branch_table: String,

    /// Write the branch counts actually used to this file.
    #[arg(long)]
    save_branch_table: Option<PathBuf>,

    /// Report file to write.
    #[arg(long)]
    out: PathBuf,
}

fn parse_results(path: &PathBuf) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(Error::parse(format!(
                "{}:{}: expected `query_id retrieved_id ...`",
                path.display(),
                lineno + 1
            )));
        }
        pairs.push((fields[0].to_string(), fields[1].to_string()));
    }
    if pairs.is_empty() {
        return Err(Error::parse(format!(
            "{}: no retrieval results found",
            path.display()
        )));
    }
    Ok(pairs)
}

fn missing_report(kind: &str, mut ids: Vec<&String>) -> String {
    ids.sort();
    ids.dedup();
    let total = ids.len();
    let shown: Vec<&str> = ids.iter().take(10).map(|s| s.as_str()).collect();
    let suffix = if total > 10 {
        format!(" … and {} more", total - 10)
    } else {
        String::new()
    };
    format!("{kind} without an IRMA code: {}{suffix}", shown.join(", "))
}

pub fn evaluate(seed: u64, threads: usize, args: &EvaluateArgs) -> Result<()> {
    let results = parse_results(&args.results)?;
    let query_codes: BTreeMap<String, IrmaCode> =
        load_irma_codes(&args.query_irma)?.into_iter().collect();
    let db_codes: BTreeMap<String, IrmaCode> =
        load_irma_codes(&args.db_irma)?.into_iter().collect();

    let missing_queries: Vec<&String> = results
        .iter()
        .map(|(q, _)| q)
        .filter(|q| !query_codes.contains_key(*q))
        .collect();
    if !missing_queries.is_empty() {
        return Err(Error::invalid_argument(missing_report(
            "queries",
            missing_queries,
        )));
    }
    let missing_hits: Vec<&String> = results
        .iter()
        .map(|(_, h)| h)
        .filter(|h| !db_codes.contains_key(*h))
        .collect();
    if !missing_hits.is_empty() {
        return Err(Error::invalid_argument(missing_report(
            "retrieved images",
            missing_hits,
        )));
    }

    let table = match args.branch_table.as_str() {
        "estimate" | "estimate-prefix" => {
            let all: Vec<IrmaCode> = query_codes
                .values()
                .chain(db_codes.values())
                .copied()
                .collect();
            BranchTable::from_codes(&all, args.branch_table == "estimate-prefix")?
        }
        spec => match spec.strip_prefix("uniform:") {
            Some(b) => {
                let b: f64 = b.parse().map_err(|_| {
                    Error::invalid_argument(format!("bad uniform branch count {b:?}"))
                })?;
                BranchTable::uniform(b)?
            }
            None => BranchTable::load(std::path::Path::new(spec))?,
        },
    };
    if let Some(path) = &args.save_branch_table {
        table.save(path)?;
    }

    let pairs: Vec<(IrmaCode, IrmaCode)> = results
        .iter()
        .map(|(q, h)| (query_codes[q], db_codes[h]))
        .collect();
    let e_total = total_error(&pairs, &table)?;
    let subtotals = total_structure_errors(&pairs, &table)?;

    let header = fingerprint(
        "evaluate",
        seed,
        threads,
        &[
            ("results", show(&args.results)),
            ("query_irma", show(&args.query_irma)),
            ("db_irma", show(&args.db_irma)),
            ("branch_table", args.branch_table.clone()),
        ],
    );
    let mut body = vec![
        format!("queries {}", pairs.len()),
        format!("e_total {e_total}"),
        format!("e_mean {}", e_total / pairs.len() as f64),
    ];
    for (j, subtotal) in subtotals.iter().enumerate() {
        body.push(format!("e_structure_{} {subtotal}", j + 1));
    }
    write_lines(&args.out, &header, &body)?;
    for line in &body {
        println!("{line}");
    }
    Ok(())
}

#[derive(Args)]
pub struct BenchArgs {
    /// 16-bit bucket codes of the database.
    #[arg(long)]
    db_short: PathBuf,

    /// Long re-ranking codes of the database.
    #[arg(long)]
    db_long: PathBuf,

    /// 16-bit bucket codes of the queries.
    #[arg(long)]
    queries_short: PathBuf,

    /// Long re-ranking codes of the queries.
    #[arg(long)]
    queries_long: PathBuf,

    /// Hamming ball radius H for the semantic-hash strategy.
    #[arg(long, default_value_t = 2)]
    bit_flips: u32,

    /// Probe only keys at exactly H flips instead of the whole ball.
    #[arg(long)]
    exact_h: bool,

    /// Independent timing runs per strategy.
    #[arg(long, default_value_t = 20)]
    runs: usize,

    /// Also time encode-then-scan sweeps with this model (end-to-end).
    #[arg(long, requires = "query_manifest")]
    model: Option<PathBuf>,

    /// Manifest of query images for the end-to-end sweep.
    #[arg(long, requires = "model")]
    query_manifest: Option<PathBuf>,

    /// Square side images are resized to before flattening (end-to-end).
    #[arg(long, default_value_t = 32)]
    image_size: usize,

    /// Timing report to write.
    #[arg(long)]
    out: PathBuf,
}

pub fn bench(seed: u64, threads: usize, args: &BenchArgs) -> Result<()> {
    if args.runs < 2 {
        return Err(Error::invalid_argument(format!(
            "--runs must be at least 2 to form a confidence interval, got {}",
            args.runs
        )));
    }
    let (short_db, long_db) = load_aligned_codes(&args.db_short, &args.db_long)?;
    let short_db = CodeDatabase::from_pairs(short_db)?;
    let long_db = CodeDatabase::from_pairs(long_db)?;
    let index = HashIndex::build(&short_db)?;
    let (short_q, long_q) = load_aligned_codes(&args.queries_short, &args.queries_long)?;
    let mode = if args.exact_h {
        ProbeMode::Exactly
    } else {
        ProbeMode::UpTo
    };

    // End-to-end setup: image rows are loaded once (file IO excluded), the
    // per-run cost is encoding plus the exhaustive scan.
    let end_to_end = match (&args.model, &args.query_manifest) {
        (Some(model), Some(manifest)) => {
            let encoder = build_encoder(&load_model(model)?)?;
            let expected = args.image_size * args.image_size;
            if encoder.input_dim() != Some(expected) {
                return Err(Error::invalid_argument(format!(
                    "--image-size {} gives {expected}-pixel inputs but the model expects {:?}",
                    args.image_size,
                    encoder.input_dim()
                )));
            }
            if encoder.output_dim() != Some(long_db.code_len()) {
                return Err(Error::invalid_argument(format!(
                    "model produces {:?}-bit codes but the long database holds {}-bit codes",
                    encoder.output_dim(),
                    long_db.code_len()
                )));
            }
            let (_, rows) = crate::model_cmds::load_image_rows(manifest, args.image_size)?;
            Some((encoder, rows))
        }
        _ => None,
    };

    let exhaustive_sweep = || -> Result<Vec<usize>> {
        long_q
            .iter()
            .map(|(_, code)| Ok(exhaustive_search(code, &long_db)?.index))
            .collect()
    };
    let mut fallbacks = 0usize;
    let mut semantic_sweep = |count: bool| -> Result<Vec<usize>> {
        short_q
            .iter()
            .zip(&long_q)
            .map(|((_, short), (_, long))| {
                let (idx, _, fell_back) =
                    semantic_first_hit(short, long, &index, &long_db, args.bit_flips, mode)?;
                if count {
                    fallbacks += usize::from(fell_back);
                }
                Ok(idx)
            })
            .collect()
    };

    let mut exhaustive_ns = Vec::with_capacity(args.runs);
    let mut semantic_ns = Vec::with_capacity(args.runs);
    let mut e2e_ns = Vec::with_capacity(args.runs);
    let mut reference: Option<(Vec<usize>, Vec<usize>)> = None;
    for run in 0..args.runs {
        let start = Instant::now();
        let ex_answers = exhaustive_sweep()?;
        exhaustive_ns.push(start.elapsed().as_nanos() as f64);

        let start = Instant::now();
        let sh_answers = semantic_sweep(run == 0)?;
        semantic_ns.push(start.elapsed().as_nanos() as f64);

        if let Some((encoder, rows)) = &end_to_end {
            let start = Instant::now();
            let codes = crate::model_cmds::encode_rows(encoder, rows)?;
            for code in &codes {
                exhaustive_search(code, &long_db)?;
            }
            e2e_ns.push(start.elapsed().as_nanos() as f64);
        }

        match &reference {
            None => reference = Some((ex_answers, sh_answers)),
            Some((ex_ref, sh_ref)) => {
                if *ex_ref != ex_answers || *sh_ref != sh_answers {
                    return Err(Error::invalid_state(
                        "retrieval answers changed between timing runs",
                    ));
                }
            }
        }
    }

    let ex = mean_and_ci95(&exhaustive_ns)?;
    let sh = mean_and_ci95(&semantic_ns)?;
    let header = fingerprint(
        "bench",
        seed,
        threads,
        &[
            ("db_short", show(&args.db_short)),
            ("db_long", show(&args.db_long)),
            ("queries_short", show(&args.queries_short)),
            ("queries_long", show(&args.queries_long)),
            ("bit_flips", args.bit_flips.to_string()),
            (
                "probe_mode",
                if args.exact_h { "exactly" } else { "up-to" }.to_string(),
            ),
            ("runs", args.runs.to_string()),
        ],
    );
    let mut body = vec![
        format!("runs {}", args.runs),
        format!("queries {}", long_q.len()),
        format!("database {}", long_db.len()),
        format!("exhaustive mean_ns {} ci95_ns {}", ex.mean, ex.ci95),
        format!("semantic-hash mean_ns {} ci95_ns {}", sh.mean, sh.ci95),
        format!("semantic-hash fallbacks {fallbacks}"),
        format!("speedup semantic-hash_vs_exhaustive {}", ex.mean / sh.mean),
    ];
    if !e2e_ns.is_empty() {
        let e2e = mean_and_ci95(&e2e_ns)?;
        body.push(format!(
            "exhaustive-end-to-end mean_ns {} ci95_ns {}",
            e2e.mean, e2e.ci95
        ));
    }
    write_lines(&args.out, &header, &body)?;
    for line in &body {
        println!("{line}");
    }
    Ok(())
}
