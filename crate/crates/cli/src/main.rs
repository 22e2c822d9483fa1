use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use scenedet::config::LearnConfig;
use scenedet::detect::{detect, Detection};
use scenedet::eval::evaluate;
use scenedet::pipeline::self_learn;
use scenedet::scene::{
    load_images, load_sequence, read_jsonl, read_model, synth_negatives, synth_scene, write_frames, write_jsonl,
    write_model, write_sequence, BoxRecord, DistractorStyle, GroundTruth, LogRecord, SynthConfig,
};
use scenedet::{Error, LabeledSample};

#[derive(Parser, Debug)]
#[command(name = "scenedet", version, about = "Self-learning scene-specific pedestrian detector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic scene, its ground truth and negative images.
    Synth(SynthArgs),
    /// Learn a detector from an unlabeled video and negative images.
    Learn(LearnArgs),
    /// Run a detector over a directory of frames.
    Detect(DetectArgs),
    /// Score detections against ground truth.
    Eval(EvalArgs),
    /// Tabulate a learning log.
    Report(ReportArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Style {
    Vehicle,
    PartLike,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    frames: usize,
    #[arg(long, default_value_t = 192)]
    width: usize,
    #[arg(long, default_value_t = 160)]
    height: usize,
    #[arg(long, default_value_t = 3)]
    sprites: usize,
    #[arg(long, default_value_t = 2)]
    distractors: usize,
    #[arg(long, value_enum, default_value_t = Style::Vehicle)]
    distractor_style: Style,
    #[arg(long, default_value_t = 10)]
    negatives: usize,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
}

/// Frame range `[start, end)`; `end` defaults to the sequence length.
#[derive(Args, Debug, Clone, Copy)]
struct Range {
    #[arg(long, default_value_t = 0)]
    start: usize,
    #[arg(long)]
    end: Option<usize>,
}

impl Range {
    fn resolve(&self, len: usize) -> Result<std::ops::Range<usize>, Error> {
        let end = self.end.unwrap_or(len).min(len);
        if self.start >= end {
            return Err(Error::Config(format!("empty frame range {}..{end}", self.start)));
        }
        Ok(self.start..end)
    }
}

#[derive(Args, Debug)]
struct LearnArgs {
    /// Directory of PGM video frames.
    #[arg(long)]
    video: PathBuf,
    /// Directory of PGM negative images.
    #[arg(long)]
    negatives: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    range: Range,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma_max: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long)]
    k_nn: Option<usize>,
    #[arg(long)]
    bg_threshold: Option<f64>,
    #[arg(long)]
    nms_iou: Option<f64>,
    #[arg(long)]
    stop_epsilon: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Any other configuration key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    /// Directory of PGM frames.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    range: Range,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    nms_iou: Option<f64>,
    /// Comma-separated window heights.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    range: Range,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    log: PathBuf,
    /// Also write the table as CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Learn(a) => learn(a),
        Command::Detect(a) => run_detect(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), Error> {
    let cfg = SynthConfig {
        width: a.width,
        height: a.height,
        frames: a.frames,
        sprites: a.sprites,
        distractors: a.distractors,
        distractor_style: match a.distractor_style {
            Style::Vehicle => DistractorStyle::Vehicle,
            Style::PartLike => DistractorStyle::PartLike,
        },
        negatives: a.negatives,
        noise: a.noise,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let (video, gt) = synth_scene(&cfg)?;
    let negatives = synth_negatives(&cfg)?;
    ensure_dir(&a.out)?;
    write_sequence(&video, &a.out.join("video"))?;
    write_frames(&negatives, &a.out.join("negatives"))?;
    write_jsonl(&a.out.join("gt.jsonl"), &gt.to_records())?;
    write_json(&a.out.join("synth.json"), &cfg)?;
    println!(
        "wrote {} frames, {} boxes and {} negative images to {}",
        video.len(),
        gt.frames.iter().map(Vec::len).sum::<usize>(),
        negatives.len(),
        a.out.display()
    );
    Ok(())
}

fn learn_config(a: &LearnArgs) -> Result<LearnConfig, Error> {
    let mut cfg = match &a.config {
        Some(path) => LearnConfig::from_file(path)?,
        None => LearnConfig::default(),
    };
    let flags: [(&str, Option<String>); 11] = [
        ("c", a.c.map(|v| v.to_string())),
        ("lambda", a.lambda.map(|v| v.to_string())),
        ("gamma_max", a.gamma_max.map(|v| v.to_string())),
        ("r", a.r.map(|v| v.to_string())),
        ("tau", a.tau.map(|v| v.to_string())),
        ("k_nn", a.k_nn.map(|v| v.to_string())),
        ("bg_threshold", a.bg_threshold.map(|v| v.to_string())),
        ("nms_iou", a.nms_iou.map(|v| v.to_string())),
        ("stop_epsilon", a.stop_epsilon.map(|v| v.to_string())),
        ("max_iterations", a.max_iterations.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn label_record(s: &LabeledSample, offset: usize) -> BoxRecord {
    let mut r = BoxRecord::from_box(s.proposal.frame_index + offset, &s.proposal.bbox);
    r.score = Some(s.soft_score);
    r.label = Some(s.label);
    r.provenance = Some(s.provenance);
    r.iteration = Some(s.iteration);
    r.source = Some(s.proposal.source);
    r.id = s.proposal.track_id;
    r
}

fn learn(a: LearnArgs) -> Result<(), Error> {
    let cfg = learn_config(&a)?;
    let full = load_sequence(&a.video)?;
    let range = a.range.resolve(full.len())?;
    let offset = range.start;
    let video = full.slice(range);
    let negatives = load_images(&a.negatives)?;
    let out = self_learn(&video, &negatives, &cfg)?;
    ensure_dir(&a.out)?;
    write_model(&out.model, &cfg.hyper, &a.out.join("model.json"))?;
    // Negative-image samples are numbered after the video frames; only
    // video labels are shifted back to the caller's frame numbering.
    let labels: Vec<BoxRecord> = out
        .state
        .labels()
        .iter()
        .map(|s| {
            let shift = if s.proposal.frame_index < video.len() { offset } else { 0 };
            label_record(s, shift)
        })
        .collect();
    write_jsonl(&a.out.join("labels.jsonl"), &labels)?;
    write_jsonl(&a.out.join("log.jsonl"), &out.log)?;
    write_json(&a.out.join("config.json"), &cfg)?;
    let last = out.log.last().expect("at least one iteration");
    println!(
        "learned in {} iterations: xi {:.4}, {} positives, {} labels written to {}",
        last.iteration,
        last.xi,
        last.positives,
        labels.len(),
        a.out.display()
    );
    Ok(())
}

fn run_detect(a: DetectArgs) -> Result<(), Error> {
    let (model, hyper) = read_model(&a.model)?;
    let mut params = scenedet::detect::DetectParams {
        nms_iou: hyper.nms_iou,
        ..Default::default()
    };
    if let Some(t) = a.threshold {
        params.threshold = t;
    }
    if let Some(n) = a.nms_iou {
        params.nms_iou = n;
    }
    if let Some(s) = a.scales {
        params.scales = s;
    }
    params.validate()?;
    let seq = load_sequence(&a.frames)?;
    let range = a.range.resolve(seq.len())?;
    let mut dets: Vec<Detection> = Vec::new();
    for frame in &seq.frames[range.clone()] {
        dets.extend(detect(&model, frame, &params)?);
    }
    let records: Vec<BoxRecord> = dets
        .iter()
        .map(|d| {
            let mut r = BoxRecord::from_box(d.frame_index, &d.bbox);
            r.score = Some(d.score);
            r
        })
        .collect();
    ensure_dir(&a.out)?;
    write_jsonl(&a.out.join("detections.jsonl"), &records)?;
    println!("{} detections over {} frames", records.len(), range.len());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Error> {
    let det_records: Vec<BoxRecord> = read_jsonl(&a.detections)?;
    let gt_records: Vec<BoxRecord> = read_jsonl(&a.gt)?;
    let frames = gt_records.iter().map(|r| r.frame + 1).max().unwrap_or(0);
    let range = a.range.resolve(frames)?;
    let gt = GroundTruth::from_records(&gt_records, frames).slice(range.clone());
    let dets: Vec<Detection> = det_records
        .iter()
        .filter(|r| range.contains(&r.frame))
        .map(|r| Detection {
            bbox: r.bbox(),
            score: r.score.unwrap_or(0.0),
            frame_index: r.frame - range.start,
        })
        .collect();
    let curve = evaluate(&dets, &gt, a.iou);
    ensure_dir(&a.out)?;
    fs::write(a.out.join("curve.csv"), curve.to_csv())?;
    let summary = curve.summary();
    write_json(&a.out.join("summary.json"), &summary)?;
    println!(
        "AP {:.4}, max recall {:.4} over {} frames ({} ground-truth boxes, {} detections)",
        summary.ap, summary.max_recall, summary.frames, summary.ground_truth, summary.detections
    );
    Ok(())
}

fn report(a: ReportArgs) -> Result<(), Error> {
    let log: Vec<LogRecord> = read_jsonl(&a.log)?;
    if log.is_empty() {
        return Err(Error::EmptyInput("learning log"));
    }
    let header = "iteration,xi,xi_l,xi_u,gamma,u,alpha_det,alpha_motion,alpha_obj,positives,negatives,hard_negatives,warning";
    let mut csv = String::from(header);
    csv.push('\n');
    println!(
        "{:>4} {:>8} {:>8} {:>8} {:>5} {:>5} {:>24} {:>6} {:>6} {:>6}",
        "iter", "xi", "xi_l", "xi_u", "gamma", "u", "alpha (det, mot, obj)", "pos", "neg", "hard"
    );
    for r in &log {
        println!(
            "{:>4} {:>8.5} {:>8.5} {:>8.5} {:>5.1} {:>5} {:>7.3} {:>7.3} {:>7.3} {:>6} {:>6} {:>6}{}",
            r.iteration,
            r.xi,
            r.xi_l,
            r.xi_u,
            r.gamma,
            r.u,
            r.alpha[0],
            r.alpha[1],
            r.alpha[2],
            r.positives,
            r.negatives,
            r.hard_negatives,
            if r.stability_warning { "  (error rose)" } else { "" }
        );
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.iteration,
            r.xi,
            r.xi_l,
            r.xi_u,
            r.gamma,
            r.u,
            r.alpha[0],
            r.alpha[1],
            r.alpha[2],
            r.positives,
            r.negatives,
            r.hard_negatives,
            r.stability_warning
        ));
    }
    if let Some(out) = &a.out {
        ensure_dir(out)?;
        fs::write(out.join("report.csv"), csv)?;
    }
    Ok(())
}
