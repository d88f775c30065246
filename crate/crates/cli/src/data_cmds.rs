//! Dataset-side commands: synth, radon, index.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;

use ddahash::dataset::{generate_synthetic, load_manifest, preprocess, save_pgm};
use ddahash::index::{CodeDatabase, HashIndex};
use ddahash::radon::{default_angles, radon_barcode, radon_projections_at};
use ddahash::storage::{save_codes, save_projections};
use ddahash::{Error, Result};

use crate::common::{fingerprint, show, write_lines};

#[derive(Args)]
pub struct SynthArgs {
    /// Number of images to generate.
    #[arg(long)]
    count: usize,

    /// Number of balanced classes (image i belongs to class i mod classes).
    #[arg(long)]
    classes: usize,

    /// Square image side in pixels.
    #[arg(long, default_value_t = 32)]
    size: usize,

    /// Output directory; receives images/, manifest.txt, and irma.txt.
    #[arg(long)]
    out: PathBuf,
}

pub fn synth(seed: u64, threads: usize, args: &SynthArgs) -> Result<()> {
    let images = generate_synthetic(args.count, args.classes, args.size, seed)?;
    let image_dir = args.out.join("images");
    std::fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;

    let header = fingerprint(
        "synth",
        seed,
        threads,
        &[
            ("count", args.count.to_string()),
            ("classes", args.classes.to_string()),
            ("size", args.size.to_string()),
        ],
    );

    let mut manifest_lines = Vec::with_capacity(images.len());
    let mut irma_lines = Vec::with_capacity(images.len());
    for im in &images {
        let rel = format!("images/{}.pgm", im.id);
        save_pgm(&args.out.join(&rel), &im.image)?;
        manifest_lines.push(format!("{};{};{}", im.id, rel, im.irma));
        irma_lines.push(format!("{};{}", im.id, im.irma));
    }
    write_lines(&args.out.join("manifest.txt"), &header, &manifest_lines)?;
    write_lines(&args.out.join("irma.txt"), &header, &irma_lines)?;
    println!(
        "wrote {} images across {} classes to {}",
        images.len(),
        args.classes,
        show(&args.out)
    );
    Ok(())
}

#[derive(Args)]
pub struct RadonArgs {
    /// Manifest of input images.
    #[arg(long)]
    manifest: PathBuf,

    /// Square working resolution images are resized to before projecting.
    #[arg(long, default_value_t = 256)]
    size: usize,

    /// Number of projection angles, evenly spaced over [0, π).
    #[arg(long, default_value_t = 16)]
    angles: usize,

    /// Bins per projection (default: one per pixel column).
    #[arg(long)]
    bins: Option<usize>,

    /// Projection dump to write.
    #[arg(long)]
    out: PathBuf,

    /// Also write median-thresholded Radon barcodes to this code file.
    #[arg(long)]
    rbc: Option<PathBuf>,
}

pub fn radon(seed: u64, threads: usize, args: &RadonArgs) -> Result<()> {
    let entries = load_manifest(&args.manifest)?;
    let bins = args.bins.unwrap_or(args.size);
    let angle_list = default_angles(args.angles);

    let sets: Vec<(String, ddahash::radon::RadonProjectionSet)> = entries
        .par_iter()
        .map(|entry| {
            let image = preprocess(&entry.path, args.size)?;
            let set = radon_projections_at(&image, &angle_list, bins)?;
            Ok((entry.id.clone(), set))
        })
        .collect::<Result<_>>()?;

    let records: Vec<(String, Vec<f64>)> = sets
        .iter()
        .map(|(id, set)| (id.clone(), set.flatten()))
        .collect();
    save_projections(&args.out, &records)?;

    if let Some(rbc_path) = &args.rbc {
        let codes: Vec<_> = sets
            .iter()
            .map(|(id, set)| (id.clone(), radon_barcode(set)))
            .collect();
        let header = fingerprint(
            "radon",
            seed,
            threads,
            &[
                ("manifest", show(&args.manifest)),
                ("size", args.size.to_string()),
                ("angles", args.angles.to_string()),
                ("bins", bins.to_string()),
            ],
        );
        save_codes(rbc_path, &codes, &header)?;
    }
    println!(
        "projected {} images at {} angles x {} bins to {}",
        records.len(),
        args.angles,
        bins,
        show(&args.out)
    );
    Ok(())
}

#[derive(Args)]
pub struct IndexArgs {
    /// 16-bit code file to index.
    #[arg(long)]
    codes: PathBuf,

    /// Bucket statistics report to write.
    #[arg(long)]
    out: PathBuf,
}

pub fn index(seed: u64, threads: usize, args: &IndexArgs) -> Result<()> {
    let db = CodeDatabase::from_pairs(ddahash::storage::load_codes(&args.codes)?)?;
    let idx = HashIndex::build(&db)?;

    let mut used = 0usize;
    let mut max_bucket = 0usize;
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for key in 0..=u16::MAX {
        let size = idx.bucket(key).len();
        if size > 0 {
            used += 1;
            max_bucket = max_bucket.max(size);
            *histogram.entry(size).or_insert(0) += 1;
        }
    }

    let mut body = vec![
        format!("entries {}", idx.entries()),
        format!("buckets_used {used}"),
        format!("max_bucket {max_bucket}"),
    ];
    for (size, count) in &histogram {
        body.push(format!("occupancy {size} {count}"));
    }
    let header = fingerprint("index", seed, threads, &[("codes", show(&args.codes))]);
    write_lines(&args.out, &header, &body)?;
    println!(
        "indexed {} codes into {used} buckets (largest {max_bucket})",
        idx.entries()
    );
    Ok(())
}
