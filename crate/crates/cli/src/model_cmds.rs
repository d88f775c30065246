//! Model-side commands: train, encode.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use rayon::prelude::*;

use ddahash::dataset::{load_manifest, preprocess, to_rows};
use ddahash::hasher::{
    assemble_stack, build_encoder, encode_batch, fine_tune, layer_train, EncoderGeometry,
    FineTuneConfig, PretrainConfig,
};
use ddahash::matrix::Matrix;
use ddahash::nn::{Network, OptimizerKind};
use ddahash::radon::ProjectionScaler;
use ddahash::storage::{
    load_model, load_projections, load_scaler, save_codes, save_model, save_scaler,
};
use ddahash::{Error, Result, Rng};

use crate::common::{fingerprint, show, sidecar, write_lines};

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// 1024 → 768 → 512 → 16, fine-tuned with RMSProp (short codes).
    Dda16,
    /// 1024 → 768 → 512, fine-tuned with Adam (long codes).
    Dda512,
    /// 4096 → 2048 projection compressor, Adam, 2200 fine-tune epochs.
    Rabc,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Manifest of training images (image-input models).
    #[arg(long, conflicts_with = "projections")]
    manifest: Option<PathBuf>,

    /// Projection dump to train on instead of images; fits and saves a
    /// min-max scaler alongside the model.
    #[arg(long)]
    projections: Option<PathBuf>,

    /// Architecture preset with its published optimizer pairing.
    #[arg(long, value_enum, conflicts_with = "geometry")]
    preset: Option<Preset>,

    /// Custom encoder geometry, e.g. 1024x768,768x512,512x16.
    #[arg(long)]
    geometry: Option<String>,

    /// Fine-tune optimizer: rmsprop or adam (default: the preset pairing,
    /// rmsprop for custom geometries).
    #[arg(long)]
    optimizer: Option<String>,

    /// Fine-tune epochs (default: 2200 for the rabc preset, 100 otherwise).
    #[arg(long)]
    epochs: Option<usize>,

    /// Pretraining epochs per layer pair.
    #[arg(long, default_value_t = 100)]
    pretrain_epochs: usize,

    #[arg(long, default_value_t = 16)]
    batch_size: usize,

    #[arg(long, default_value_t = 0.001)]
    learning_rate: f64,

    /// Dropout probability for input corruption and the pre-coding layer.
    #[arg(long, default_value_t = 0.2)]
    dropout_p: f64,

    /// Ablation: fine-tune without the pre-coding dropout layer.
    #[arg(long)]
    no_dropout: bool,

    /// Ablation: stop after layer-wise pretraining (no fine-tuning).
    #[arg(long)]
    no_finetune: bool,

    /// Ablation: sigmoid output layer instead of softmax.
    #[arg(long)]
    sigmoid_output: bool,

    /// Square side images are resized to before flattening.
    #[arg(long, default_value_t = 32)]
    image_size: usize,

    /// Model file to write; also writes `<out>.log` (loss curves) and
    /// `<out>.time` (wall time, not byte-reproducible).
    #[arg(long)]
    out: PathBuf,
}

fn resolve_architecture(args: &TrainArgs) -> Result<(EncoderGeometry, OptimizerKind, usize)> {
    let (geometry, default_optimizer, default_epochs) = match (&args.preset, &args.geometry) {
        (Some(Preset::Dda16), None) => (
            EncoderGeometry::new(vec![(1024, 768), (768, 512), (512, 16)])?,
            OptimizerKind::RmsProp,
            100,
        ),
        (Some(Preset::Dda512), None) => (
            EncoderGeometry::new(vec![(1024, 768), (768, 512)])?,
            OptimizerKind::Adam,
            100,
        ),
        (Some(Preset::Rabc), None) => (
            EncoderGeometry::new(vec![(4096, 2048)])?,
            OptimizerKind::Adam,
            2200,
        ),
        (None, Some(text)) => (EncoderGeometry::parse(text)?, OptimizerKind::RmsProp, 100),
        (None, None) => {
            return Err(Error::invalid_argument(
                "pass --preset or --geometry to choose an architecture",
            ));
        }
        (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
    };
    let optimizer = match &args.optimizer {
        Some(name) => name.parse()?,
        None => default_optimizer,
    };
    Ok((geometry, optimizer, args.epochs.unwrap_or(default_epochs)))
}

/// Loads manifest images resized to `side`, in manifest order.
pub(crate) fn load_image_rows(
    manifest: &std::path::Path,
    side: usize,
) -> Result<(Vec<String>, Matrix)> {
    let entries = load_manifest(manifest)?;
    let vectors: Vec<_> = entries
        .par_iter()
        .map(|entry| preprocess(&entry.path, side))
        .collect::<Result<_>>()?;
    let ids = entries.into_iter().map(|e| e.id).collect();
    Ok((ids, to_rows(&vectors)?))
}

pub fn train(seed: u64, threads: usize, args: &TrainArgs) -> Result<()> {
    let started = Instant::now();
    let (geometry, optimizer, epochs) = resolve_architecture(args)?;

    let rows = match (&args.manifest, &args.projections) {
        (Some(manifest), None) => {
            let expected = args.image_size * args.image_size;
            if expected != geometry.input_dim() {
                return Err(Error::invalid_argument(format!(
                    "--image-size {} gives {expected}-pixel inputs but the geometry expects {}",
                    args.image_size,
                    geometry.input_dim()
                )));
            }
            load_image_rows(manifest, args.image_size)?.1
        }
        (None, Some(projections)) => {
            let records = load_projections(projections)?;
            let dim = records[0].1.len();
            if dim != geometry.input_dim() {
                return Err(Error::invalid_argument(format!(
                    "projections have {dim} dimensions but the geometry expects {}",
                    geometry.input_dim()
                )));
            }
            let mut data = Vec::with_capacity(records.len() * dim);
            for (_, values) in &records {
                data.extend_from_slice(values);
            }
            let raw = Matrix::from_vec(records.len(), dim, data);
            let scaler = ProjectionScaler::fit(&raw)?;
            save_scaler(&sidecar(&args.out, "scaler"), &scaler)?;
            scaler.apply(&raw)?
        }
        _ => {
            return Err(Error::invalid_argument(
                "pass exactly one of --manifest or --projections",
            ));
        }
    };

    let pretrain_config = PretrainConfig {
        epochs: args.pretrain_epochs,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        dropout_p: args.dropout_p,
    };
    let finetune_config = FineTuneConfig {
        epochs,
        batch_size: args.batch_size,
        optimizer,
        learning_rate: args.learning_rate,
        dropout_p: args.dropout_p,
        use_dropout: !args.no_dropout,
        softmax_output: !args.sigmoid_output,
    };

    let mut rng = Rng::new(seed);
    let stack = layer_train(&rows, &geometry, &pretrain_config, &mut rng)?;
    let pretrain_histories = stack.histories.clone();
    let (model, finetune_history) = if args.no_finetune {
        (assemble_stack(&geometry, &stack, &finetune_config)?, vec![])
    } else {
        fine_tune(&rows, &geometry, &stack, &finetune_config, &mut rng)?
    };
    save_model(&args.out, &model)?;

    let header = fingerprint(
        "train",
        seed,
        threads,
        &[
            ("geometry", geometry.to_string()),
            ("optimizer", optimizer.name().to_string()),
            ("epochs", epochs.to_string()),
            ("pretrain_epochs", args.pretrain_epochs.to_string()),
            ("batch_size", args.batch_size.to_string()),
            ("learning_rate", args.learning_rate.to_string()),
            ("dropout_p", args.dropout_p.to_string()),
            ("dropout", (!args.no_dropout).to_string()),
            ("finetune", (!args.no_finetune).to_string()),
            ("softmax_output", (!args.sigmoid_output).to_string()),
            ("samples", rows.rows().to_string()),
        ],
    );
    let mut log = Vec::new();
    for (pair, history) in pretrain_histories.iter().enumerate() {
        for (epoch, loss) in history.iter().enumerate() {
            log.push(format!(
                "pretrain pair={pair} epoch={} loss={loss}",
                epoch + 1
            ));
        }
    }
    for (epoch, loss) in finetune_history.iter().enumerate() {
        log.push(format!("finetune epoch={} loss={loss}", epoch + 1));
    }
    write_lines(&sidecar(&args.out, "log"), &header, &log)?;

    let elapsed = started.elapsed().as_secs_f64();
    write_lines(
        &sidecar(&args.out, "time"),
        &header,
        &[format!("wall_seconds {elapsed}")],
    )?;
    eprintln!("trained in {elapsed:.1}s");
    let last_pretrain: Vec<String> = pretrain_histories
        .iter()
        .map(|h| format!("{:.4}", h.last().copied().unwrap_or(f64::NAN)))
        .collect();
    println!(
        "model {} ({geometry}, {}): pretrain final loss [{}]{}",
        show(&args.out),
        optimizer.name(),
        last_pretrain.join(", "),
        match finetune_history.last() {
            Some(loss) => format!(", fine-tune final loss {loss:.4}"),
            None => ", fine-tune skipped".to_string(),
        }
    );
    Ok(())
}

#[derive(Args)]
pub struct EncodeArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,

    /// Manifest of images to encode (image-input models).
    #[arg(long, conflicts_with = "projections")]
    manifest: Option<PathBuf>,

    /// Projection dump to encode (projection models); needs --scaler.
    #[arg(long)]
    projections: Option<PathBuf>,

    /// Scaler saved at training time.
    #[arg(long)]
    scaler: Option<PathBuf>,

    /// Square side images are resized to before flattening.
    #[arg(long, default_value_t = 32)]
    image_size: usize,

    /// Code file to write.
    #[arg(long)]
    out: PathBuf,
}

pub fn encode(seed: u64, threads: usize, args: &EncodeArgs) -> Result<()> {
    let encoder = build_encoder(&load_model(&args.model)?)?;
    let input_dim = encoder.input_dim().unwrap_or(0);

    let (ids, rows, source) = match (&args.manifest, &args.projections) {
        (Some(manifest), None) => {
            let expected = args.image_size * args.image_size;
            if expected != input_dim {
                return Err(Error::invalid_argument(format!(
                    "--image-size {} gives {expected}-pixel inputs but the model expects {input_dim}",
                    args.image_size
                )));
            }
            let (ids, rows) = load_image_rows(manifest, args.image_size)?;
            (ids, rows, show(manifest))
        }
        (None, Some(projections)) => {
            let scaler_path = args.scaler.as_ref().ok_or_else(|| {
                Error::invalid_argument("projection encoding needs --scaler from training")
            })?;
            let scaler = load_scaler(scaler_path)?;
            let records = load_projections(projections)?;
            if scaler.dim() != records[0].1.len() || scaler.dim() != input_dim {
                return Err(Error::invalid_argument(format!(
                    "dimensions disagree: projections {}, scaler {}, model {input_dim}",
                    records[0].1.len(),
                    scaler.dim()
                )));
            }
            let mut data = Vec::with_capacity(records.len() * scaler.dim());
            let mut ids = Vec::with_capacity(records.len());
            for (id, values) in &records {
                data.extend(scaler.apply_row(values)?);
                ids.push(id.clone());
            }
            let rows = Matrix::from_vec(records.len(), scaler.dim(), data);
            (ids, rows, show(projections))
        }
        _ => {
            return Err(Error::invalid_argument(
                "pass exactly one of --manifest or --projections",
            ));
        }
    };

    let codes = encode_rows(&encoder, &rows)?;
    let pairs: Vec<_> = ids.into_iter().zip(codes).collect();
    let header = fingerprint(
        "encode",
        seed,
        threads,
        &[
            ("model", show(&args.model)),
            ("input", source),
            ("bits", pairs[0].1.len().to_string()),
        ],
    );
    save_codes(&args.out, &pairs, &header)?;
    println!(
        "encoded {} images into {}-bit codes at {}",
        pairs.len(),
        pairs[0].1.len(),
        show(&args.out)
    );
    Ok(())
}

/// Encodes in bounded chunks so huge datasets don't hold two full copies
/// of their activations in memory.
pub fn encode_rows(encoder: &Network, rows: &Matrix) -> Result<Vec<ddahash::code::BinaryCode>> {
    const CHUNK_ROWS: usize = 1024;
    let dim = rows.cols();
    let mut codes = Vec::with_capacity(rows.rows());
    let data = rows.data();
    for chunk in data.chunks(CHUNK_ROWS * dim) {
        let batch = Matrix::from_vec(chunk.len() / dim, dim, chunk.to_vec());
        codes.extend(encode_batch(encoder, &batch)?);
    }
    Ok(codes)
}
