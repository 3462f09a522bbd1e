//! `drumsense` — generate drumming records, train the fusion autoencoder,
//! reconstruct with dropped modalities and score the reconstructions.
//!
//! Every command prints a JSON summary on stdout; diagnostics go to stderr.

mod error;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drumsense::eval::{evaluate, EvalConfig};
use drumsense::export::{motion_csv, pgm_from_unit, spec_csv, wav_bytes, pgm_bytes};
use drumsense::net::{gradient_check, load_checkpoint, save_checkpoint, sequences_from_records, train_sequences, Sequence};
use drumsense::pipeline::{generate_from_text, random_record};
use drumsense::record::{dataset_index, load_record, save_record, MultimodalRecord};
use drumsense::{ArchSpec, DatasetParams, FusionModel, Hyper, ModalityMask, SceneConfig};
use serde_json::json;

use error::CliError;

#[derive(Parser)]
#[command(name = "drumsense", version, about = "Synthetic drumming robot records and cross-modal autoencoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render one tab file into a .mmr record.
    Gen {
        #[arg(long)]
        tab: PathBuf,
        /// Scene JSON; the built-in default scene when omitted.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.02)]
        noise_sigma: f64,
    },
    /// Write `count` random records, record i drawn with seed `seed + i`.
    Dataset {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
        #[arg(long, default_value_t = 0.25)]
        density: f64,
        #[arg(long, default_value_t = 120.0)]
        tempo: f64,
        #[arg(long, default_value_t = 0.02)]
        noise_sigma: f64,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a record's metadata and optionally export its streams.
    Inspect {
        #[arg(long)]
        record: PathBuf,
        /// Frame used by --dump-image (default 0) and --dump-audio (whole
        /// record when omitted).
        #[arg(long)]
        frame: Option<usize>,
        #[arg(long)]
        dump_image: Option<PathBuf>,
        #[arg(long)]
        dump_audio: Option<PathBuf>,
        #[arg(long)]
        dump_motion: Option<PathBuf>,
        #[arg(long)]
        dump_spec: Option<PathBuf>,
    },
    /// Train a fresh model on every .mmr file of a directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = Hyper::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = Hyper::default().drop_p)]
        drop: f64,
        #[arg(long, default_value_t = Hyper::default().lambda)]
        lambda: f64,
        #[arg(long, default_value_t = Hyper::default().lr)]
        lr: f64,
        /// Per-epoch loss table; defaults to the checkpoint path with a
        /// `.csv` extension.
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },
    /// Reconstruct one record with some modalities dropped.
    Reconstruct {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        record: PathBuf,
        /// Comma-separated modalities to drop (image, audio, motion) or `none`.
        #[arg(long, default_value = "none")]
        mask: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model's cross-modal reconstructions on a record directory.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        scene: Option<PathBuf>,
    },
    /// Finite-difference check of the analytic gradient on a tiny network.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-2)]
        lambda: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code() as u8)
        }
    }
}

fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Gen { tab, scene, out, seed, noise_sigma } => cmd_gen(&tab, scene.as_deref(), &out, seed, noise_sigma),
        Command::Dataset { count, duration, density, tempo, noise_sigma, scene, out, seed } => {
            let params = DatasetParams { duration_s: duration, density, tempo_bpm: tempo, noise_sigma, ..DatasetParams::default() };
            cmd_dataset(count, &params, scene.as_deref(), &out, seed)
        }
        Command::Inspect { record, frame, dump_image, dump_audio, dump_motion, dump_spec } => {
            cmd_inspect(&record, frame, dump_image.as_deref(), dump_audio.as_deref(), dump_motion.as_deref(), dump_spec.as_deref())
        }
        Command::Train { data, out, epochs, seed, drop, lambda, lr, loss_csv } => {
            let hyper = Hyper { epochs, seed, drop_p: drop, lambda, lr, ..Hyper::default() };
            let csv = loss_csv.unwrap_or_else(|| out.with_extension("csv"));
            cmd_train(&data, &out, &csv, &hyper)
        }
        Command::Reconstruct { model, record, mask, out } => cmd_reconstruct(&model, &record, &mask, &out),
        Command::Eval { model, data, report, scene } => cmd_eval(&model, &data, &report, scene.as_deref()),
        Command::Gradcheck { seed, lambda } => cmd_gradcheck(seed, lambda),
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON value serializes"));
}

fn load_scene(path: Option<&Path>) -> Result<SceneConfig, CliError> {
    let scene = match path {
        Some(p) => SceneConfig::load(p).map_err(|e| CliError::scene(p, e))?,
        None => SceneConfig::default(),
    };
    scene.validate().map_err(|e| CliError::Invalid(format!("scene: {e}")))?;
    Ok(scene)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn cmd_gen(tab: &Path, scene: Option<&Path>, out: &Path, seed: u64, noise_sigma: f64) -> Result<u8, CliError> {
    let text = fs::read_to_string(tab).map_err(|e| CliError::io(tab, e))?;
    let scene = load_scene(scene)?;
    let generated = generate_from_text(&text, &scene, seed, noise_sigma)?;
    let bytes = save_record(&generated.record, out).map_err(|e| CliError::record(out, e))?;
    let summary = generated.summary();
    print_json(&json!({
        "out": out,
        "bytes": bytes,
        "frames": summary.frames,
        "contacts": summary.contacts,
        "beats": summary.beats,
        "duration_s": summary.duration_s,
    }));
    Ok(0)
}

fn cmd_dataset(count: usize, params: &DatasetParams, scene: Option<&Path>, out: &Path, seed: u64) -> Result<u8, CliError> {
    let scene = load_scene(scene)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut written = 0usize;
    let mut skipped = Vec::new();
    for i in 0..count {
        let record_seed = seed.wrapping_add(i as u64);
        match random_record(&scene, record_seed, params) {
            Ok(g) => {
                let path = out.join(format!("rec_{i:05}.mmr"));
                save_record(&g.record, &path).map_err(|e| CliError::record(&path, e))?;
                written += 1;
            }
            Err(e) if e.is_infeasible() => {
                eprintln!("record {i} (seed {record_seed}) skipped: {e}");
                skipped.push(json!({ "index": i, "seed": record_seed, "reason": e.to_string() }));
            }
            Err(e) => return Err(e.into()),
        }
    }
    print_json(&json!({ "out": out, "requested": count, "written": written, "skipped": skipped }));
    Ok(0)
}

fn read_record(path: &Path) -> Result<MultimodalRecord, CliError> {
    load_record(path).map_err(|e| CliError::record(path, e))
}

fn cmd_inspect(
    path: &Path,
    frame: Option<usize>,
    dump_image: Option<&Path>,
    dump_audio: Option<&Path>,
    dump_motion: Option<&Path>,
    dump_spec: Option<&Path>,
) -> Result<u8, CliError> {
    let rec = read_record(path)?;
    let meta = &rec.meta;
    let n = rec.frames.len();
    if let Some(k) = frame {
        if k >= n {
            return Err(CliError::Invalid(format!("frame {k} out of range: record has {n} frames")));
        }
    }
    if let Some(p) = dump_image {
        let f = &rec.frames[frame.unwrap_or(0)];
        write_file(p, &pgm_bytes(meta.image_width as usize, meta.image_height as usize, &f.image))?;
    }
    if let Some(p) = dump_audio {
        let samples: Vec<f64> = match frame {
            Some(k) => rec.frames[k].audio.iter().map(|v| f64::from(*v)).collect(),
            None => rec.frames.iter().flat_map(|f| f.audio.iter().map(|v| f64::from(*v))).collect(),
        };
        write_file(p, &wav_bytes(&samples, meta.sample_rate))?;
    }
    if let Some(p) = dump_motion {
        let rows: Vec<Vec<f64>> = rec.frames.iter().map(|f| f.q.iter().map(|v| f64::from(*v)).collect()).collect();
        write_file(p, motion_csv(f64::from(meta.frame_rate), &rows).as_bytes())?;
    }
    if let Some(p) = dump_spec {
        let rows: Vec<Vec<f64>> = rec.frames.iter().map(|f| f.spec.iter().map(|v| f64::from(*v)).collect()).collect();
        write_file(p, spec_csv(&rows).as_bytes())?;
    }
    let contacts: u32 = rec.frames.iter().map(|f| f.contacts.count_ones()).sum();
    print_json(&json!({
        "meta": meta,
        "frames": n,
        "contact_flags": contacts,
        "encoded_bytes": rec.encoded_len(),
    }));
    Ok(0)
}

/// Loads every record of a dataset directory in path order.
fn load_dataset(dir: &Path) -> Result<Vec<MultimodalRecord>, CliError> {
    let index = dataset_index(dir).map_err(|e| CliError::io(dir, e))?;
    if let Some((path, reason)) = index.skipped.first() {
        return Err(CliError::io(path, reason));
    }
    if index.entries.is_empty() {
        return Err(CliError::Invalid(format!("{}: no .mmr records", dir.display())));
    }
    index.entries.iter().map(|(p, _)| read_record(p)).collect()
}

fn cmd_train(data: &Path, out: &Path, csv: &Path, hyper: &Hyper) -> Result<u8, CliError> {
    hyper.validate().map_err(|e| CliError::net(None, e))?;
    let records = load_dataset(data)?;
    let seqs = sequences_from_records(&records, hyper.seq_len).map_err(|e| CliError::net(None, e))?;
    let arch = ArchSpec {
        image_width: records[0].meta.image_width as usize,
        image_height: records[0].meta.image_height as usize,
        ..ArchSpec::default()
    };
    let mut model = FusionModel::init_params(arch, hyper.seed).map_err(|e| CliError::net(None, e))?;
    let report = train_sequences(&mut model, &seqs, hyper, |epoch, loss| eprintln!("epoch {epoch} loss {loss:.6}"))
        .map_err(|e| CliError::net(None, e))?;
    save_checkpoint(&model, out).map_err(|e| CliError::net(Some(out), e))?;
    write_file(csv, report.to_csv().as_bytes())?;
    print_json(&json!({
        "model": out,
        "loss_csv": csv,
        "parameters": model.param_count(),
        "sequences": report.sequences,
        "seq_len": report.seq_len,
        "updates": report.updates,
        "epochs": report.loss_history.len(),
        "first_loss": report.loss_history.first(),
        "final_loss": report.final_loss(),
    }));
    Ok(0)
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len().max(1) as f64
}

fn cmd_reconstruct(model_path: &Path, record: &Path, mask: &str, out: &Path) -> Result<u8, CliError> {
    let mask = ModalityMask::parse_dropped(mask).map_err(|e| CliError::net(None, e))?;
    let model = load_checkpoint(model_path).map_err(|e| CliError::net(Some(model_path), e))?;
    let rec = read_record(record)?;
    let n = rec.frames.len();
    let input = Sequence::from_record(&rec, 0, n).map_err(|e| CliError::net(None, e))?;
    let (recon, _) = model.forward_sequence(&input, mask).map_err(|e| CliError::net(None, e))?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;

    let arch = model.arch();
    let (w, h) = (arch.image_width, arch.image_height);
    for (k, pixels) in recon.image.chunks(arch.pixels()).enumerate() {
        write_file(&out.join(format!("frame_{k:04}.pgm")), &pgm_from_unit(w, h, pixels))?;
    }
    let spec: Vec<Vec<f64>> = recon.audio.chunks(arch.audio_bins).map(<[f64]>::to_vec).collect();
    write_file(&out.join("spec.csv"), spec_csv(&spec).as_bytes())?;
    let motion: Vec<Vec<f64>> = recon
        .motion
        .chunks(arch.motion_dim)
        .map(|row| row.iter().map(|v| v * std::f64::consts::PI).collect())
        .collect();
    write_file(&out.join("motion.csv"), motion_csv(f64::from(rec.meta.frame_rate), &motion).as_bytes())?;

    print_json(&json!({
        "out": out,
        "frames": recon.len,
        "dropped": mask.label(),
        "mse": {
            "image": mse(&recon.image, &input.image),
            "audio": mse(&recon.audio, &input.audio),
            "motion": mse(&recon.motion, &input.motion),
        },
    }));
    Ok(0)
}

fn cmd_eval(model_path: &Path, data: &Path, report_path: &Path, scene: Option<&Path>) -> Result<u8, CliError> {
    let scene = load_scene(scene)?;
    let records = load_dataset(data)?;
    let model = load_checkpoint(model_path).map_err(|e| CliError::net(Some(model_path), e))?;
    let report = evaluate(&model, &records, &scene, &EvalConfig::default())?;
    write_file(report_path, report.to_json().as_bytes())?;
    print_json(&json!({
        "report": report_path,
        "model_id": report.model_id,
        "records": report.dataset_size,
        "keep_all_mse": report.keep_all,
        "motion_from_audio_accuracy": report.motion_from_audio.accuracy,
        "audio_from_vision_motion_accuracy": report.audio_from_vision_motion.accuracy,
        "denoising_ratio": report.denoising.ratio,
        "denoising_onset_recall": report.denoising.onset_recall,
    }));
    Ok(0)
}

fn cmd_gradcheck(seed: u64, lambda: f64) -> Result<u8, CliError> {
    let report = gradient_check(seed, lambda).map_err(|e| CliError::net(None, e))?;
    print_json(&json!({
        "seed": seed,
        "lambda": report.lambda,
        "max_rel_error": report.max_rel_error,
        "worst": report.worst,
        "passed": report.passed,
        "tensors": report.tensors.iter().map(|t| json!({ "name": t.name, "rel_error": t.rel_error })).collect::<Vec<_>>(),
    }));
    Ok(if report.passed { 0 } else { 1 })
}
