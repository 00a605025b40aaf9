//! Command-line surface for the transformation-learning pipeline:
//! corpus and dataset generation, GAE/RBM training, representation
//! probing, evaluation, PCA, analogy-making, and n-gram rendering.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric abort.
//! All commands are deterministic per (config, seed); reruns overwrite
//! outputs byte-identically. `MTP_THREADS` is honored for future
//! parallel builds; the current implementation is single-threaded.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mtp_core::analogy;
use mtp_core::classifier;
use mtp_core::dataset::{read_mtp1, split_dataset, write_mtp1};
use mtp_core::error::Error;
use mtp_core::eval::{
    projections_csv, random_baseline_row, pca, EvalReport, ReportRow, SummaryTable,
    TRANSFORM_COLUMNS,
};
use mtp_core::gae::{self, GaeConfig, GaeModel};
use mtp_core::midi::{parse_smf, quantize, read_jsonl_notes, write_jsonl_notes};
use mtp_core::pianoroll::{
    extract_ngrams, render, render_ngram, roll_from_notes, NGram, RenderFormat, NGRAM_BITS,
};
use mtp_core::pipeline::{self, pair_matrix, synthetic_ngrams, DeskProfile};
use mtp_core::rbm::{self, RbmConfig};
use mtp_core::rng::Rng;
use mtp_core::synth::SynthConfig;
use mtp_core::transforms::{make_pairs, TransformType};

#[derive(Parser)]
#[command(name = "mtp", version, about = "Musical transformation learning pipeline")]
struct Cli {
    /// Flat JSON config file; explicit flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TransformArg {
    Transc,
    Transd,
    Tempo,
    Retro,
}

impl From<TransformArg> for TransformType {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::Transc => TransformType::TransC,
            TransformArg::Transd => TransformType::TransD,
            TransformArg::Tempo => TransformType::Tempo,
            TransformArg::Retro => TransformType::Retro,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Gae,
    Rbm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RenderArg {
    Ascii,
    Pgm,
}

/// Shared corpus source flags: a directory of MIDI/JSONL pieces or the
/// synthetic generator.
#[derive(Args, Clone)]
struct CorpusArgs {
    /// Directory of .mid / .jsonl pieces; omit to use the synthetic corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Synthetic corpus size (pieces).
    #[arg(long)]
    pieces: Option<usize>,
    /// Fixed tonic pitch class (0-11) for every synthetic piece.
    #[arg(long)]
    key: Option<u8>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus as JSON-lines note files.
    GenCorpus {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        pieces: Option<usize>,
        #[arg(long)]
        key: Option<u8>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build a labeled MTP1 pair dataset plus a JSON sidecar with the
    /// class histogram and rejection statistics.
    GenPairs {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum)]
        transform: TransformArg,
        /// Number of pairs.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on an MTP1 dataset; writes a checkpoint and a
    /// per-epoch loss-history CSV.
    Train {
        #[arg(value_enum)]
        model: ModelKind,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<u32>,
        /// Factor units (GAE) / first hidden layer (RBM).
        #[arg(long)]
        factors: Option<usize>,
        /// Mapping units (GAE) / second hidden layer (RBM).
        #[arg(long)]
        mappings: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Resume from an existing checkpoint instead of fresh init.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Train a probe classifier on frozen codes; writes the FFN
    /// checkpoint, a report, and the confusion matrix CSV.
    Probe {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out_ffn: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        confusion: Option<PathBuf>,
        #[arg(long)]
        train_size: Option<usize>,
        #[arg(long)]
        val_size: Option<usize>,
        #[arg(long)]
        test_size: Option<usize>,
        #[arg(long)]
        epochs: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Shuffle training labels (chance-level calibration control).
        #[arg(long, default_value_t = false)]
        shuffle_labels: bool,
    },
    /// Reconstruction cross-entropy summary for checkpoints on a dataset.
    Eval {
        #[arg(long)]
        gae: Option<PathBuf>,
        #[arg(long)]
        rbm: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PCA of GAE mapping codes over a dataset, as CSV with class labels.
    Pca {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 2)]
        components: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Infer a mapping from a template pair and apply it to targets;
    /// writes PGM render pairs and a score CSV.
    Analogize {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Index of the template pair within the dataset.
        #[arg(long, default_value_t = 0)]
        template_index: usize,
        /// Number of target pairs (taken after the template).
        #[arg(long, default_value_t = 100)]
        targets: usize,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Render one dataset n-gram as ASCII art or PGM.
    Render {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Render the pair's y side instead of x.
        #[arg(long, default_value_t = false)]
        y_side: bool,
        #[arg(long, value_enum, default_value_t = RenderArg::Ascii)]
        format: RenderArg,
        /// Output file; ASCII prints to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are successful outputs, not usage errors.
            use clap::error::ErrorKind::*;
            let code = match e.kind() {
                DisplayHelp | DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match load_config(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    match run(cli.command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    let code = match e {
        Error::InvalidArgument(_) => 1,
        Error::NonFinite(_) => 3,
        _ => 2,
    };
    ExitCode::from(code)
}

/// Flat key/value defaults from `--config`; flags take precedence.
struct FileConfig {
    map: serde_json::Map<String, serde_json::Value>,
}

impl FileConfig {
    fn u64(&self, key: &str) -> Option<u64> {
        self.map.get(key).and_then(|v| v.as_u64())
    }

    fn usize(&self, key: &str) -> Option<usize> {
        self.u64(key).map(|v| v as usize)
    }

    fn f64(&self, key: &str) -> Option<f64> {
        self.map.get(key).and_then(|v| v.as_f64())
    }
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, Error> {
    let map = match path {
        None => serde_json::Map::new(),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            match serde_json::from_str::<serde_json::Value>(&text)? {
                serde_json::Value::Object(m) => m,
                _ => {
                    return Err(Error::MalformedData(
                        "config file must be a flat JSON object".into(),
                    ))
                }
            }
        }
    };
    Ok(FileConfig { map })
}

fn corpus_ngrams(args: &CorpusArgs, seed: u64) -> Result<Vec<NGram>, Error> {
    match &args.corpus {
        Some(dir) => {
            let mut grams = Vec::new();
            let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .collect();
            entries.sort();
            for path in entries {
                let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
                let notes = match ext {
                    "mid" | "midi" => quantize(&parse_smf(&fs::read(&path)?)?)?,
                    "jsonl" => read_jsonl_notes(fs::File::open(&path)?)?,
                    _ => continue,
                };
                let (roll, _) = roll_from_notes(&notes);
                grams.extend(extract_ngrams(&roll, 1));
            }
            pipeline::require_corpus(&grams, 100)?;
            Ok(grams)
        }
        None => {
            let cfg = SynthConfig {
                n_pieces: args.pieces.unwrap_or(48),
                key: args.key,
                seed,
                ..Default::default()
            };
            Ok(synthetic_ngrams(&cfg))
        }
    }
}

/// Sniffs a checkpoint's format from its JSON header line.
enum Checkpoint {
    Gae(GaeModel),
    Rbm(rbm::StackedRbm),
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, Error> {
    let bytes = fs::read(path)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedData("checkpoint missing header line".into()))?;
    let header: serde_json::Value = serde_json::from_slice(&bytes[..newline])?;
    if header.get("o").is_some() {
        Ok(Checkpoint::Gae(gae::read_checkpoint(&bytes)?))
    } else if header.get("hidden1").is_some() && header.get("classes").is_none() {
        Ok(Checkpoint::Rbm(rbm::read_checkpoint(&bytes)?))
    } else {
        Err(Error::MalformedData(format!(
            "{} is not a GAE1 or RBM1 checkpoint",
            path.display()
        )))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn run(cmd: Command, cfg: &FileConfig) -> Result<(), Error> {
    match cmd {
        Command::GenCorpus { out_dir, pieces, key, seed } => {
            let synth = SynthConfig {
                n_pieces: pieces.or(cfg.usize("pieces")).unwrap_or(48),
                key,
                seed: seed.or(cfg.u64("seed")).unwrap_or(0),
                ..Default::default()
            };
            fs::create_dir_all(&out_dir)?;
            for (i, piece) in mtp_core::synth::gen_synthetic(&synth).iter().enumerate() {
                let path = out_dir.join(format!("piece_{i:04}.jsonl"));
                write_atomic(&path, &write_jsonl_notes(piece))?;
            }
            println!("wrote {} pieces to {}", synth.n_pieces, out_dir.display());
            Ok(())
        }

        Command::GenPairs { corpus, transform, n, seed, out } => {
            let transform: TransformType = transform.into();
            let seed = seed.or(cfg.u64("seed")).unwrap_or(0);
            let n = n.or(cfg.usize("n")).unwrap_or(1000);
            let grams = corpus_ngrams(&corpus, seed)?;
            let mut rng = Rng::new(seed).split(0xda7a).split(transform.tag() as u64);
            let (ds, stats) = make_pairs(&grams, transform, n, &mut rng, true)?;
            write_atomic(&out, &write_mtp1(&ds))?;
            let sidecar = serde_json::json!({
                "transform": transform.name(),
                "samples": ds.samples.len(),
                "class_histogram": ds.class_histogram(),
                "preshift_rejections": stats.preshift_rejections,
                "range_rejections": stats.range_rejections,
                "key_fit_rejections": stats.key_fit_rejections,
                "seed": seed,
            });
            let mut sidecar_path = out.clone().into_os_string();
            sidecar_path.push(".json");
            write_atomic(
                Path::new(&sidecar_path),
                format!("{}\n", serde_json::to_string_pretty(&sidecar).unwrap()).as_bytes(),
            )?;
            println!("wrote {} {} pairs to {}", ds.samples.len(), transform.name(), out.display());
            Ok(())
        }

        Command::Train { model, dataset, out, history, epochs, factors, mappings, lr, seed, resume } => {
            let ds = read_mtp1(&fs::read(&dataset)?)?;
            let seed = seed.or(cfg.u64("seed")).unwrap_or(0);
            let factors = factors.or(cfg.usize("factors")).unwrap_or(128);
            let mappings = mappings.or(cfg.usize("mappings")).unwrap_or(64);
            let hist = match model {
                ModelKind::Gae => {
                    let profile = DeskProfile::default();
                    let mut gae_cfg = GaeConfig {
                        epochs: epochs
                            .or(cfg.u64("epochs").map(|e| e as u32))
                            .unwrap_or(profile.gae_epochs),
                        seed,
                        ..profile.gae_config()
                    };
                    gae_cfg.lr = lr.or(cfg.f64("lr")).unwrap_or(profile.gae_lr);
                    let mut m = match &resume {
                        Some(p) => match load_checkpoint(p)? {
                            Checkpoint::Gae(m) => m,
                            Checkpoint::Rbm(_) => {
                                return Err(Error::InvalidArgument(
                                    "cannot resume GAE training from an RBM checkpoint".into(),
                                ))
                            }
                        },
                        None => {
                            let mut m = GaeModel::init(NGRAM_BITS, factors, mappings, seed);
                            m.scale_filters(profile.gae_filter_scale);
                            m
                        }
                    };
                    let hist = gae::train(&mut m, &ds, &gae_cfg)?;
                    write_atomic(&out, &gae::write_checkpoint(&m))?;
                    hist
                }
                ModelKind::Rbm => {
                    if resume.is_some() {
                        return Err(Error::InvalidArgument(
                            "RBM training does not support --resume".into(),
                        ));
                    }
                    let rbm_cfg = RbmConfig {
                        epochs: epochs.or(cfg.u64("epochs").map(|e| e as u32)).unwrap_or(100),
                        lr: lr.or(cfg.f64("lr")).unwrap_or(RbmConfig::default().lr),
                        seed,
                        ..RbmConfig::default()
                    };
                    let (stack, hist) =
                        rbm::train_stack(&pair_matrix(&ds), factors, mappings, &rbm_cfg)?;
                    write_atomic(&out, &rbm::write_checkpoint(&stack))?;
                    hist
                }
            };
            if let Some(hp) = history {
                let mut csv = String::from("epoch,loss\n");
                for (i, l) in hist.iter().enumerate() {
                    csv.push_str(&format!("{i},{l}\n"));
                }
                write_atomic(&hp, csv.as_bytes())?;
            }
            println!("wrote checkpoint {}", out.display());
            Ok(())
        }

        Command::Probe {
            checkpoint,
            dataset,
            out_ffn,
            report,
            confusion: confusion_out,
            train_size,
            val_size,
            test_size,
            epochs,
            seed,
            shuffle_labels,
        } => {
            let ds = read_mtp1(&fs::read(&dataset)?)?;
            let seed = seed.or(cfg.u64("seed")).unwrap_or(0);
            let ck = load_checkpoint(&checkpoint)?;
            let n = ds.samples.len();
            let n_test = test_size.or(cfg.usize("test_size")).unwrap_or(n / 5);
            let n_val = val_size.or(cfg.usize("val_size")).unwrap_or(n / 20);
            let n_train = train_size
                .or(cfg.usize("train_size"))
                .unwrap_or_else(|| n.saturating_sub(n_test + n_val));
            let mut split_rng = Rng::new(seed).split(0x5917).split(ds.transform.tag() as u64);
            let (train, val, test) = split_dataset(&ds, n_train, n_val, n_test, &mut split_rng)?;

            let (model_id, codes_train, codes_val, codes_test, size) = match &ck {
                Checkpoint::Gae(m) => (
                    "GAE",
                    m.encode_dataset(&train),
                    m.encode_dataset(&val),
                    m.encode_dataset(&test),
                    format!("{}/{}", m.n_factors(), m.n_mappings()),
                ),
                Checkpoint::Rbm(s) => (
                    "RBM",
                    pipeline::rbm_codes(s, &train),
                    pipeline::rbm_codes(s, &val),
                    pipeline::rbm_codes(s, &test),
                    format!("{}/{}", s.layer1.hidden(), s.layer2.hidden()),
                ),
            };
            let mut labels_train = train.labels();
            if shuffle_labels {
                labels_train = pipeline::shuffled_labels(&labels_train, seed);
            }
            let clf_cfg = classifier::ClfConfig {
                epochs: epochs.or(cfg.u64("clf_epochs").map(|e| e as u32)).unwrap_or(30),
                seed,
                ..Default::default()
            };
            let classes = ds.transform.class_count();
            let (ffn, err_pct, cm) = pipeline::probe_codes(
                &codes_train,
                &labels_train,
                &codes_val,
                &val.labels(),
                &codes_test,
                &test.labels(),
                classes,
                &clf_cfg,
            )?;

            if let Some(p) = out_ffn {
                write_atomic(&p, &classifier::write_checkpoint(&ffn))?;
            }
            if let Some(p) = &confusion_out {
                write_atomic(p, cm.to_csv().as_bytes())?;
            }
            let eval_report = EvalReport {
                model_id: model_id.into(),
                transform: ds.transform,
                size: size.clone(),
                misclassification_pct: err_pct,
                reconstruction_ce: None,
                confusion: cm,
            };
            let col = TRANSFORM_COLUMNS.iter().position(|&t| t == ds.transform).unwrap();
            let mut values = [None; 4];
            values[col] = Some(err_pct);
            let table = SummaryTable {
                metric: "misclassification_pct".into(),
                rows: vec![
                    ReportRow { model: model_id.into(), size, values },
                    random_baseline_row(),
                ],
            };
            let text = format!("{}\n{}", eval_report.to_text(), table.to_text());
            match &report {
                Some(p) => write_atomic(p, text.as_bytes())?,
                None => println!("{text}"),
            }
            Ok(())
        }

        Command::Eval { gae: gae_path, rbm: rbm_path, dataset, format, out } => {
            let ds = read_mtp1(&fs::read(&dataset)?)?;
            let col = TRANSFORM_COLUMNS.iter().position(|&t| t == ds.transform).unwrap();
            let mut rows = Vec::new();
            if let Some(p) = &gae_path {
                let m = match load_checkpoint(p)? {
                    Checkpoint::Gae(m) => m,
                    Checkpoint::Rbm(_) => {
                        return Err(Error::InvalidArgument("--gae given an RBM checkpoint".into()))
                    }
                };
                let mut values = [None; 4];
                values[col] = Some(pipeline::gae_reconstruction_ce(&m, &ds));
                rows.push(ReportRow {
                    model: "GAE".into(),
                    size: format!("{}/{}", m.n_factors(), m.n_mappings()),
                    values,
                });
            }
            if let Some(p) = &rbm_path {
                let s = match load_checkpoint(p)? {
                    Checkpoint::Rbm(s) => s,
                    Checkpoint::Gae(_) => {
                        return Err(Error::InvalidArgument("--rbm given a GAE checkpoint".into()))
                    }
                };
                let mut values = [None; 4];
                values[col] = Some(pipeline::rbm_reconstruction_ce(&s, &ds));
                rows.push(ReportRow {
                    model: "RBM".into(),
                    size: format!("{}/{}", s.layer1.hidden(), s.layer2.hidden()),
                    values,
                });
            }
            let table = SummaryTable { metric: "reconstruction_ce".into(), rows };
            let text = match format {
                FormatArg::Text => table.to_text(),
                FormatArg::Csv => table.to_csv(),
            };
            match &out {
                Some(p) => write_atomic(p, text.as_bytes())?,
                None => print!("{text}"),
            }
            Ok(())
        }

        Command::Pca { checkpoint, dataset, components, out } => {
            let ds = read_mtp1(&fs::read(&dataset)?)?;
            let m = match load_checkpoint(&checkpoint)? {
                Checkpoint::Gae(m) => m,
                Checkpoint::Rbm(_) => {
                    return Err(Error::InvalidArgument(
                        "PCA of mapping codes requires a GAE checkpoint".into(),
                    ))
                }
            };
            let codes = m.encode_dataset(&ds);
            let (_, proj, _) = pca(&codes, components)?;
            write_atomic(&out, projections_csv(&proj, &ds.labels())?.as_bytes())?;
            println!("wrote projections to {}", out.display());
            Ok(())
        }

        Command::Analogize { checkpoint, dataset, template_index, targets, threshold, out_dir } => {
            let ds = read_mtp1(&fs::read(&dataset)?)?;
            let m = match load_checkpoint(&checkpoint)? {
                Checkpoint::Gae(m) => m,
                Checkpoint::Rbm(_) => {
                    return Err(Error::InvalidArgument("analogy requires a gated model".into()))
                }
            };
            let decode_pair = |s: &mtp_core::transforms::PairSample| {
                Ok::<_, Error>((
                    mtp_core::pianoroll::decode(&s.x)?,
                    mtp_core::pianoroll::decode(&s.y)?,
                ))
            };
            let template = ds.samples.get(template_index).ok_or_else(|| {
                Error::InvalidArgument(format!("template index {template_index} out of range"))
            })?;
            let (tx, ty) = decode_pair(template)?;
            let target_samples: Vec<(NGram, Option<NGram>)> = ds
                .samples
                .iter()
                .enumerate()
                .filter(|(i, s)| *i != template_index && s.label == template.label)
                .take(targets)
                .map(|(_, s)| {
                    let (x, y) = decode_pair(s)?;
                    Ok((x, Some(y)))
                })
                .collect::<Result<_, Error>>()?;
            if target_samples.is_empty() {
                return Err(Error::InsufficientData(
                    "no target pairs share the template's class".into(),
                ));
            }
            let results = analogy::analogize(&m, &tx, &ty, &target_samples, threshold)?;
            fs::create_dir_all(&out_dir)?;
            for (i, r) in results.iter().enumerate() {
                write_atomic(
                    &out_dir.join(format!("target_{i:04}_source.pgm")),
                    &render_ngram(&r.source, RenderFormat::Pgm),
                )?;
                write_atomic(
                    &out_dir.join(format!("target_{i:04}_generated.pgm")),
                    &render(&r.probs, RenderFormat::Pgm)?,
                )?;
            }
            write_atomic(&out_dir.join("scores.csv"), analogy::scores_csv(&results).as_bytes())?;
            if let Some((p, r, f1)) = analogy::mean_scores(&results) {
                println!("targets: {}  mean precision {p:.4}  recall {r:.4}  F1 {f1:.4}", results.len());
            }
            Ok(())
        }

        Command::Render { dataset, index, y_side, format, out } => {
            let ds = read_mtp1(&fs::read(&dataset)?)?;
            let sample = ds.samples.get(index).ok_or_else(|| {
                Error::InvalidArgument(format!("index {index} out of range"))
            })?;
            let bits = if y_side { &sample.y } else { &sample.x };
            let gram = mtp_core::pianoroll::decode(bits)?;
            let fmt = match format {
                RenderArg::Ascii => RenderFormat::Ascii,
                RenderArg::Pgm => RenderFormat::Pgm,
            };
            let bytes = render_ngram(&gram, fmt);
            match &out {
                Some(p) => write_atomic(p, &bytes)?,
                None => print!("{}", String::from_utf8_lossy(&bytes)),
            }
            Ok(())
        }
    }
}

