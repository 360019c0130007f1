//! Batch workflows over the betarep library: annotation conversion, NMS
//! strategy runs, detection evaluation, ground-truth pair studies, mask
//! rendering, and synthetic scene generation.
//!
//! Exit codes: 0 success, 1 usage/parse error, 2 internal invariant
//! violation. Data artifacts go to `--out` (stdout when omitted); summaries
//! and warnings go to stderr so piped output stays clean.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use betarep::io::{
    read_detections, read_odgt, write_detections, write_odgt, write_pair_records,
    DetectionRecord,
};
use betarep::{
    average_precision, boxes_to_beta_flagged, log_avg_miss_rate, match_detections,
    pair_statistics, render_mask, run_nms, synth_scenes, BetaPedestrian, DetLabel, GtBox,
    OcclusionPattern, Strategy, SynthConfig, ToolkitConfig,
};

#[derive(Parser)]
#[command(name = "betarep", version, about = "Beta-representation toolkit for occluded pedestrians")]
struct Cli {
    /// JSON config file; falls back to $BETAREP_CONFIG, then built-in defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for parallel sections (0 = one per core); outputs are
    /// byte-identical regardless of this value
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert odgt annotations into beta-representation JSON lines
    Convert(ConvertArgs),
    /// Filter detections with an NMS strategy
    Nms(NmsArgs),
    /// Evaluate detections against annotations (AP and MR^-2)
    Eval(EvalArgs),
    /// Pair statistics over ground truth: fIoU, vIoU, KL, failed-case counts
    Compare(CompareArgs),
    /// Render the 2D beta mask of one pedestrian to PGM and CSV
    RenderMask(RenderMaskArgs),
    /// Generate synthetic crowded scenes as an odgt file
    Synth(SynthArgs),
}

#[derive(Args)]
struct ConvertArgs {
    /// odgt annotation file
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NmsArgs {
    /// Detections JSON-lines file
    #[arg(long)]
    detections: PathBuf,
    /// fiou | viou | fiou_viou | soft | beta
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    iou_threshold: Option<f64>,
    #[arg(long)]
    viou_threshold: Option<f64>,
    /// In nats
    #[arg(long)]
    kl_threshold: Option<f64>,
    /// Grid resolution (cells per axis)
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    iou_threshold: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    annotations: PathBuf,
    /// Comma-separated KL thresholds for the failed-case sweep
    #[arg(long, value_delimiter = ',')]
    kl_threshold: Option<Vec<f64>>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderMaskArgs {
    /// Eight comma-separated parameters: l,t,r,b,alpha_x,beta_x,alpha_y,beta_y
    #[arg(long, value_delimiter = ',')]
    beta: Vec<f64>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    /// Output PGM path; the CSV lands next to it with a .csv extension
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    scenes: usize,
    /// Persons per scene as "min-max" or a single count
    #[arg(long, default_value = "2-8")]
    persons: String,
    /// Overlap intensity in [0, 1]
    #[arg(long, default_value_t = 0.6)]
    intensity: f64,
    /// Comma-separated pattern mix: left_visible,right_visible,top_visible,
    /// bottom_visible,center_visible
    #[arg(long, value_delimiter = ',')]
    patterns: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, not usage errors.
            if e.use_stderr() {
                eprint!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: could not size the thread pool: {e}");
            std::process::exit(2);
        }
    }
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(e: &betarep::Error) -> i32 {
    use betarep::Error::*;
    match e {
        Parse { .. } | Schema { .. } | Io(_) | InvalidConfig(_) => 1,
        InvalidGeometry(_) | InfeasibleMoments { .. } | Domain(_) | GridMismatch(_)
        | Coverage(_) | UndefinedMetric(_) | Generation(_) => 2,
    }
}

fn run(cli: &Cli) -> betarep::Result<()> {
    let cfg = ToolkitConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Convert(args) => cmd_convert(args, &cfg),
        Command::Nms(args) => cmd_nms(args, &cfg),
        Command::Eval(args) => cmd_eval(args, &cfg),
        Command::Compare(args) => cmd_compare(args, &cfg),
        Command::RenderMask(args) => cmd_render_mask(args, &cfg),
        Command::Synth(args) => cmd_synth(args),
    }
}

/// Writer for `--out`, falling back to stdout.
fn out_writer(path: Option<&Path>) -> betarep::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn cmd_convert(args: &ConvertArgs, cfg: &ToolkitConfig) -> betarep::Result<()> {
    let (scenes, warnings) = read_odgt(&args.annotations)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let mut out = out_writer(args.out.as_deref())?;
    let mut persons = 0u64;
    let mut clamped_x = 0u64;
    let mut clamped_y = 0u64;
    for scene in &scenes {
        for p in &scene.persons {
            let (bp, flags) = boxes_to_beta_flagged(&p.boxes, &cfg.weights)?;
            persons += 1;
            clamped_x += u64::from(flags.x);
            clamped_y += u64::from(flags.y);
            let line = json!({
                "image": scene.id,
                "ignore": u8::from(p.ignore),
                "beta": bp.to_flat(),
            });
            writeln!(out, "{line}")?;
        }
    }
    out.flush()?;
    let rate = if persons > 0 {
        (clamped_x + clamped_y) as f64 / (2 * persons) as f64
    } else {
        0.0
    };
    eprintln!(
        "{}",
        json!({
            "report": "convert",
            "scenes": scenes.len(),
            "persons": persons,
            "skipped_records": warnings.len(),
            "clamped_x": clamped_x,
            "clamped_y": clamped_y,
            "clamp_rate_per_axis": rate,
            "config": cfg.echo(),
        })
    );
    Ok(())
}

/// Group records by image, preserving first-appearance order.
fn group_by_image(records: Vec<DetectionRecord>) -> Vec<(String, Vec<betarep::Detection>)> {
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut groups: Vec<(String, Vec<betarep::Detection>)> = Vec::new();
    for r in records {
        match index.get(&r.image) {
            Some(&i) => groups[i].1.push(r.detection),
            None => {
                index.insert(r.image.clone(), groups.len());
                groups.push((r.image, vec![r.detection]));
            }
        }
    }
    groups
}

fn cmd_nms(args: &NmsArgs, cfg: &ToolkitConfig) -> betarep::Result<()> {
    let mut nms_cfg = cfg.nms_config();
    if let Some(s) = args.strategy {
        nms_cfg.strategy = s;
    }
    if let Some(v) = args.iou_threshold {
        nms_cfg.iou_threshold = v;
    }
    if let Some(v) = args.viou_threshold {
        nms_cfg.viou_threshold = v;
    }
    if let Some(v) = args.kl_threshold {
        nms_cfg.kl_threshold = v;
    }
    if let Some(v) = args.grid {
        nms_cfg.grid.resolution = v;
    }
    nms_cfg.validate()?;

    let groups = group_by_image(read_detections(&args.detections)?);
    let mut out = out_writer(args.out.as_deref())?;
    let mut times_ms = Vec::with_capacity(groups.len());
    let mut kept_records = Vec::new();
    let mut input_count = 0usize;
    for (image, dets) in groups {
        input_count += dets.len();
        let start = Instant::now();
        let kept = run_nms(&dets, &nms_cfg)?;
        times_ms.push(start.elapsed().as_secs_f64() * 1e3);
        for d in kept {
            kept_records.push(DetectionRecord {
                image: image.clone(),
                detection: d,
            });
        }
    }
    write_detections(&mut out, &kept_records)?;
    out.flush()?;

    let total: f64 = times_ms.iter().sum();
    let report = json!({
        "report": "nms",
        "strategy": nms_cfg.strategy,
        "thresholds": {
            "iou": nms_cfg.iou_threshold,
            "viou": nms_cfg.viou_threshold,
            "kl": nms_cfg.kl_threshold,
        },
        "grid_resolution": nms_cfg.grid.resolution,
        "images": times_ms.len(),
        "detections_in": input_count,
        "detections_kept": kept_records.len(),
        "wall_ms": {
            "total": total,
            "mean": if times_ms.is_empty() { 0.0 } else { total / times_ms.len() as f64 },
            "min": times_ms.iter().copied().fold(f64::INFINITY, f64::min),
            "max": times_ms.iter().copied().fold(0.0, f64::max),
        },
        "config": cfg.echo(),
    });
    eprintln!("{report}");
    Ok(())
}

fn cmd_eval(args: &EvalArgs, cfg: &ToolkitConfig) -> betarep::Result<()> {
    let iou_thresh = args.iou_threshold.unwrap_or(cfg.eval.iou_threshold);
    let (scenes, warnings) = read_odgt(&args.annotations)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let groups = group_by_image(read_detections(&args.detections)?);
    let scene_ids: std::collections::HashSet<&str> =
        scenes.iter().map(|s| s.id.as_str()).collect();
    for (image, _) in &groups {
        if !scene_ids.contains(image.as_str()) {
            return Err(betarep::Error::Schema {
                record: 0,
                msg: format!("detections reference unannotated image '{image}'"),
            });
        }
    }
    let by_image: std::collections::HashMap<&str, &Vec<betarep::Detection>> =
        groups.iter().map(|(img, d)| (img.as_str(), d)).collect();

    let mut scored: Vec<(f64, bool)> = Vec::new();
    let mut total_gt = 0usize;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut ignored = 0usize;
    for scene in &scenes {
        let gts: Vec<GtBox> = scene
            .persons
            .iter()
            .map(|p| GtBox {
                bbox: *p.boxes.full(),
                ignore: p.ignore,
            })
            .collect();
        total_gt += gts.iter().filter(|g| !g.ignore).count();
        let empty = Vec::new();
        let dets = by_image.get(scene.id.as_str()).copied().unwrap_or(&empty);
        let result = match_detections(dets, &gts, iou_thresh);
        for (d, label) in dets.iter().zip(&result.labels) {
            match label {
                DetLabel::Tp { .. } => {
                    scored.push((d.score, true));
                    tp += 1;
                }
                DetLabel::Fp => {
                    scored.push((d.score, false));
                    fp += 1;
                }
                DetLabel::Ignored => ignored += 1,
            }
        }
    }
    let ap = average_precision(&scored, total_gt)?;
    let mr2 = log_avg_miss_rate(&scored, total_gt, scenes.len())?;
    let report = json!({
        "report": "eval",
        "iou_threshold": iou_thresh,
        "images": scenes.len(),
        "ground_truths": total_gt,
        "detections_scored": scored.len(),
        "tp": tp,
        "fp": fp,
        "ignored_detections": ignored,
        "ap": ap,
        "mr2": mr2,
        "config": cfg.echo(),
    });
    let mut out = out_writer(args.out.as_deref())?;
    writeln!(out, "{report}")?;
    out.flush()?;
    Ok(())
}

fn cmd_compare(args: &CompareArgs, cfg: &ToolkitConfig) -> betarep::Result<()> {
    let mut stats_cfg = cfg.pair_stats_config();
    if let Some(ts) = &args.kl_threshold {
        stats_cfg.kl_thresholds = ts.clone();
    }
    if let Some(g) = args.grid {
        stats_cfg.grid.resolution = g;
    }
    let (scenes, warnings) = read_odgt(&args.annotations)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let (records, summary) = pair_statistics(&scenes, &stats_cfg)?;
    let out = out_writer(args.out.as_deref())?;
    write_pair_records(out, &records)?;
    eprintln!(
        "{}",
        json!({
            "report": "compare",
            "scenes": scenes.len(),
            "overlapped_pairs": summary.total_pairs,
            "failed_cases": {
                "fiou": { "threshold": stats_cfg.fiou_threshold, "count": summary.fiou_failed },
                "viou": { "threshold": stats_cfg.viou_threshold, "count": summary.viou_failed },
                "kl": summary.kl_failed.iter().map(|(t, c)| json!({
                    "threshold": t, "count": c,
                })).collect::<Vec<_>>(),
            },
            "config": cfg.echo(),
        })
    );
    Ok(())
}

fn cmd_render_mask(args: &RenderMaskArgs, cfg: &ToolkitConfig) -> betarep::Result<()> {
    let flat: [f64; 8] = args.beta.clone().try_into().map_err(|_| {
        betarep::Error::InvalidConfig("--beta needs exactly 8 comma-separated values".into())
    })?;
    let bp = BetaPedestrian::from_flat(flat)?;
    let h = args.height.unwrap_or(cfg.mask.height);
    let w = args.width.unwrap_or(cfg.mask.width);
    let mask = render_mask(&bp, h, w)?;

    // PGM (P2): gray levels scaled so the peak cell is 255.
    let peak = mask.values().iter().copied().fold(0.0, f64::max);
    let mut pgm = String::new();
    pgm.push_str(&format!("P2\n{w} {h}\n255\n"));
    for row in 0..h {
        let line: Vec<String> = (0..w)
            .map(|col| format!("{}", (mask.get(row, col) / peak * 255.0).round() as u32))
            .collect();
        pgm.push_str(&line.join(" "));
        pgm.push('\n');
    }
    std::fs::write(&args.out, pgm)?;

    let csv_path = args.out.with_extension("csv");
    let mut csv = String::new();
    for row in 0..h {
        let line: Vec<String> = (0..w).map(|col| mask.get(row, col).to_string()).collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
    }
    std::fs::write(&csv_path, csv)?;

    eprintln!(
        "{}",
        json!({
            "report": "render-mask",
            "height": h,
            "width": w,
            "pgm": args.out.display().to_string(),
            "csv": csv_path.display().to_string(),
            "mass": mask.total_mass(),
            "config": cfg.echo(),
        })
    );
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> betarep::Result<()> {
    let (pmin, pmax) = match args.persons.split_once('-') {
        Some((a, b)) => (
            a.parse()
                .map_err(|_| betarep::Error::InvalidConfig(format!("bad --persons '{}'", args.persons)))?,
            b.parse()
                .map_err(|_| betarep::Error::InvalidConfig(format!("bad --persons '{}'", args.persons)))?,
        ),
        None => {
            let n = args
                .persons
                .parse()
                .map_err(|_| betarep::Error::InvalidConfig(format!("bad --persons '{}'", args.persons)))?;
            (n, n)
        }
    };
    let patterns = match &args.patterns {
        None => OcclusionPattern::ALL.to_vec(),
        Some(names) => names
            .iter()
            .map(|n| match n.as_str() {
                "left_visible" => Ok(OcclusionPattern::LeftVisible),
                "right_visible" => Ok(OcclusionPattern::RightVisible),
                "top_visible" => Ok(OcclusionPattern::TopVisible),
                "bottom_visible" => Ok(OcclusionPattern::BottomVisible),
                "center_visible" => Ok(OcclusionPattern::CenterVisible),
                other => Err(betarep::Error::InvalidConfig(format!(
                    "unknown pattern '{other}'"
                ))),
            })
            .collect::<betarep::Result<_>>()?,
    };
    let cfg = SynthConfig {
        seed: args.seed,
        scenes: args.scenes,
        persons_min: pmin,
        persons_max: pmax,
        overlap_intensity: args.intensity,
        patterns,
        ..SynthConfig::default()
    };
    let scenes = synth_scenes(&cfg)?;
    let mut out = out_writer(args.out.as_deref())?;
    write_odgt(&mut out, &scenes)?;
    out.flush()?;
    eprintln!(
        "{}",
        json!({
            "report": "synth",
            "seed": cfg.seed,
            "scenes": scenes.len(),
            "persons": scenes.iter().map(|s| s.persons.len()).sum::<usize>(),
        })
    );
    Ok(())
}
