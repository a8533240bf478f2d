mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eegspeech_core::corpus::io::{read_json, write_bytes, write_eeg, write_json, write_wav};
use eegspeech_core::corpus::{generate_corpus, CorpusConfig, CorpusManifest, SplitName};
use eegspeech_core::data::prepare_trial;
use eegspeech_core::eval::{EvalConfig, EvalReport};
use eegspeech_core::frontend::stft::mel_spectrogram;
use eegspeech_core::frontend::{Waveform, AUDIO_RATE_HZ};
use eegspeech_core::phoneme::Variant;
use eegspeech_core::pipeline::{decode_splits, evaluate_checkpoint};
use eegspeech_core::trainer::{train, TrainConfig};
use eegspeech_core::{Checkpoint32, Error};

#[derive(Parser)]
#[command(name = "eegspeech", version, about = "Decode speech and phonemes from EEG")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired EEG / speech / phoneme corpus.
    SynthData(SynthArgs),
    /// Filter EEG and compute log-mel features for every trial.
    Preprocess(PreprocessArgs),
    /// Train a model into a run directory.
    Train(TrainArgs),
    /// Write decoded WAV files and phoneme predictions for a split.
    Decode(DecodeArgs),
    /// Score a trained run on held-out splits.
    Evaluate(EvaluateArgs),
    /// Export the phoneme-group tables of a report.
    Analyze(AnalyzeArgs),
    /// Draw per-group bar charts from one or more reports.
    Plot(PlotArgs),
}

#[derive(Args)]
struct OutArgs {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Corpus configuration (JSON); defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the corpus seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Corpus directory or its manifest.jsonl.
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Training configuration (JSON); defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Corpus directory or its manifest.jsonl.
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    /// Predictor variant: CB-0, CB-1 or CB-2.
    #[arg(long, value_name = "NAME", value_parser = parse_variant)]
    variant: Option<Variant>,
    /// Overrides the training seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Train without the phoneme predictor.
    #[arg(long)]
    no_phoneme_predictor: bool,
    /// Continue from this checkpoint.
    #[arg(long, value_name = "PATH")]
    resume: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct RunArgs {
    /// Run directory written by `train`.
    #[arg(long, value_name = "DIR")]
    run: PathBuf,
    /// Checkpoint to load; defaults to the latest one in the run.
    #[arg(long, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
    /// Corpus directory or its manifest.jsonl.
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    /// Decoding threads; outputs do not depend on this.
    #[arg(long, value_name = "N", default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// train, unseen_speech, unseen_subject or unseen_both.
    #[arg(long, value_name = "NAME", value_parser = parse_split)]
    split: SplitName,
    /// Prior sampling temperature.
    #[arg(long, default_value_t = 0.667)]
    temperature: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Evaluation configuration (JSON); defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Split to score; repeat for several. Defaults to the three held-out splits.
    #[arg(long, value_name = "NAME", value_parser = parse_split)]
    split: Vec<SplitName>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Report written by `evaluate`.
    #[arg(long, value_name = "PATH")]
    report: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct PlotArgs {
    /// Report written by `evaluate`; repeat to compare variants.
    #[arg(long, value_name = "PATH", required = true)]
    report: Vec<PathBuf>,
    /// Split to chart.
    #[arg(long, value_name = "NAME", value_parser = parse_split, default_value = "unseen_both")]
    split: SplitName,
    #[command(flatten)]
    out: OutArgs,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| format!("unknown variant {s}; expected CB-0, CB-1 or CB-2"))
}

fn parse_split(s: &str) -> Result<SplitName, String> {
    SplitName::parse(s).ok_or_else(|| format!("unknown split {s}"))
}

/// Fails if `dir` already holds files and `force` is off.
fn prepare_out(o: &OutArgs) -> Result<(), Error> {
    if !o.force && o.out.is_dir() {
        let busy = fs::read_dir(&o.out).map_err(|e| Error::io(&o.out, e))?.next().is_some();
        if busy {
            return Err(Error::Config(format!(
                "{} is not empty; pass --force to overwrite",
                o.out.display()
            )));
        }
    }
    fs::create_dir_all(&o.out).map_err(|e| Error::io(&o.out, e))
}

fn latest_checkpoint(run: &Path) -> Result<PathBuf, Error> {
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in fs::read_dir(run).map_err(|e| Error::io(run, e))? {
        let path = entry.map_err(|e| Error::io(run, e))?.path();
        let it = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("ckpt_")?.strip_suffix(".bin")?.parse::<u64>().ok());
        if let Some(it) = it {
            if best.as_ref().is_none_or(|(b, _)| it > *b) {
                best = Some((it, path));
            }
        }
    }
    best.map(|(_, p)| p).ok_or_else(|| {
        Error::io(
            run,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no checkpoint in run directory"),
        )
    })
}

fn load_run(r: &RunArgs) -> Result<(Checkpoint32, CorpusManifest), Error> {
    let path = match &r.checkpoint {
        Some(p) => p.clone(),
        None => latest_checkpoint(&r.run)?,
    };
    Ok((Checkpoint32::load(&path)?, CorpusManifest::open(&r.manifest)?))
}

fn synth_data(a: SynthArgs) -> Result<(), Error> {
    let mut cfg: CorpusConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => CorpusConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    prepare_out(&a.out)?;
    let m = generate_corpus(&cfg, &a.out.out)?;
    println!("wrote {} trials to {}", m.trials.len(), a.out.out.display());
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> Result<(), Error> {
    let m = CorpusManifest::open(&a.manifest)?;
    prepare_out(&a.out)?;
    let mut index = Vec::new();
    for t in &m.trials {
        let p = prepare_trial(&m, t)?;
        let eeg_path = format!("eeg/{}.f32", t.id);
        write_eeg(&a.out.out.join(&eeg_path), &p.eeg)?;
        let mel = mel_spectrogram(&p.linear)?;
        let mel_path = format!("mel/{}.f32", t.id);
        let bytes: Vec<u8> = mel.data.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
        write_bytes(&a.out.out.join(&mel_path), &bytes)?;
        index.push(serde_json::json!({
            "id": t.id,
            "eeg": eeg_path,
            "mel": mel_path,
            "mel_bins": mel.n_bins,
            "mel_frames": mel.n_frames,
        }));
    }
    write_json(&a.out.out.join("features.json"), &index)?;
    println!("preprocessed {} trials", index.len());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<(), Error> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.variant {
        cfg.variant = v;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.no_phoneme_predictor {
        cfg.enable_phoneme_predictor = false;
        cfg.alpha = 0.0;
    }
    cfg.validate()?;
    let m = CorpusManifest::open(&a.manifest)?;
    if a.resume.is_none() {
        prepare_out(&a.out)?;
    }
    let total = cfg.iterations;
    let out = train::<f32>(&cfg, &m, &a.out.out, a.resume.as_deref(), |s| {
        if s.iteration % 50 == 0 || s.iteration == total {
            eprintln!(
                "iter {:>6}  l_eeg {:.4}  l_ctc {}  l_mel {:.3}  l_disc {:.3}",
                s.iteration,
                s.l_eeg,
                s.l_ctc.map_or("-".into(), |v| format!("{v:.4}")),
                s.l_mel,
                s.l_disc
            );
        }
    })?;
    println!("{}", out.final_checkpoint.display());
    Ok(())
}

fn decode_cmd(a: DecodeArgs) -> Result<(), Error> {
    let (ck, m) = load_run(&a.run)?;
    prepare_out(&a.out)?;
    let decoded = decode_splits(&ck, &m, &[a.split], a.temperature, a.run.workers)?;
    let mut tsv = String::from("id\ttarget\tpredicted\n");
    for d in &decoded[0].1 {
        write_wav(
            &a.out.out.join(format!("{}.wav", d.id)),
            &Waveform::new(d.audio.clone(), AUDIO_RATE_HZ),
        )?;
        let join = |ids: &[usize]| m.inventory.decode(ids).join(" ");
        tsv.push_str(&format!("{}\t{}\t{}\n", d.id, join(&d.targets), join(&d.predicted)));
    }
    write_bytes(&a.out.out.join("phonemes.tsv"), tsv.as_bytes())?;
    println!("decoded {} trials", decoded[0].1.len());
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<(), Error> {
    let cfg: EvalConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => EvalConfig::default(),
    };
    let splits = if a.split.is_empty() {
        SplitName::TEST.to_vec()
    } else {
        a.split.clone()
    };
    let (ck, m) = load_run(&a.run)?;
    prepare_out(&a.out)?;
    let report = evaluate_checkpoint(&ck, &m, &splits, &cfg, a.run.workers)?;
    report.write(&a.out.out)?;
    print!("{}", report.summary_csv());
    Ok(())
}

fn analyze_cmd(a: AnalyzeArgs) -> Result<(), Error> {
    let report: EvalReport = read_json(&a.report)?;
    prepare_out(&a.out)?;
    for t in &report.groups {
        let axis = serde_json::to_value(t.axis)?;
        let name = format!("{}_{}.csv", t.split.as_str(), axis.as_str().unwrap_or("axis"));
        write_bytes(&a.out.out.join(name), EvalReport::group_csv(t).as_bytes())?;
    }
    println!("wrote {} group tables", report.groups.len());
    Ok(())
}

fn plot_cmd(a: PlotArgs) -> Result<(), Error> {
    let reports = a
        .report
        .iter()
        .map(|p| read_json::<EvalReport>(p))
        .collect::<Result<Vec<_>, _>>()?;
    prepare_out(&a.out)?;
    let files = plot::group_charts(&reports, a.split, &a.out.out)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        e if e.is_io() => 1,
        Error::Data(_) | Error::Json(_) => 1,
        Error::Config(_) | Error::Unsupported(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = std::panic::catch_unwind(|| match cli.cmd {
        Command::SynthData(a) => synth_data(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => train_cmd(a),
        Command::Decode(a) => decode_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Plot(a) => plot_cmd(a),
    });
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(3),
    }
}
