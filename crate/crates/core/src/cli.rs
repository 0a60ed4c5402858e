//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus;
use crate::error::{Error, Result};
use crate::motion::{block_match, load_flow, FlowField};
use crate::raster::{save_gray_png, write_atomic, Raster};
use crate::scheduler::{
    cost_report, schedule_image, AttenuationModel, CostReport, ProfileSet, QualityMap, ScheduleContext,
    ScheduleOptions, VariantProfile, DEFAULT_BANDS_PX,
};
use crate::spectral::{attenuation_curve, attenuation_from_pairs, AttenuationCurve, SurrogateOperator};
use crate::viewing::{decode_luminance, LuminanceImage, ViewingConditions};

#[derive(Debug, Parser)]
#[command(name = "hvpf", version, about = "Perceptual per-patch scheduling of super-resolution variants")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure an operator's frequency attenuation over an image corpus and
    /// fit the fall-off model.
    EstimateAttenuation(EstimateArgs),
    /// Combine fitted curves and per-variant costs into a profile set.
    MakeProfiles(MakeProfilesArgs),
    /// Schedule one image.
    Schedule(ScheduleArgs),
    /// Schedule every frame of a clip, with motion from flow files or block
    /// matching.
    ScheduleVideo(ScheduleVideoArgs),
    /// Write synthetic test images.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Directory of PNG/PGM reference images.
    #[arg(long, requires = "op", conflicts_with = "pairs")]
    pub corpus: Option<PathBuf>,
    /// identity | blur:SIGMA | bicubic:K | box:K
    #[arg(long)]
    pub op: Option<String>,
    /// Text file listing "reference reconstruction" path pairs, one per line.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Scale factor recorded with the curve; must agree with --op.
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MakeProfilesArgs {
    /// Curve JSON files, one per variant.
    #[arg(long, num_args = 1.., required = true)]
    pub curves: Vec<PathBuf>,
    /// JSON array of {id, name, cost_flops[, baseline_full]}, one entry per
    /// curve in the same order.
    #[arg(long)]
    pub costs: PathBuf,
    /// Band frequencies in cycles/pixel.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BANDS_PX.to_vec())]
    pub bands: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Gaze point in pixels, "X,Y".
    #[arg(long)]
    pub gaze: Option<String>,
    /// External flow (.flo or .csv) for this image.
    #[arg(long, conflicts_with = "prev")]
    pub flow: Option<PathBuf>,
    /// Previous frame; motion is block-matched against it.
    #[arg(long)]
    pub prev: Option<PathBuf>,
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScheduleVideoArgs {
    /// Glob matching the frames; sorted by path.
    #[arg(long)]
    pub frames: String,
    #[arg(long)]
    pub config: PathBuf,
    /// Glob matching one flow file per consecutive frame pair.
    #[arg(long)]
    pub flows: Option<String>,
    #[arg(long)]
    pub gaze: Option<String>,
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Dead-leaves image (occluding disks, natural-image-like spectrum).
    DeadLeaves {
        #[arg(long, default_value_t = 512)]
        width: usize,
        #[arg(long, default_value_t = 512)]
        height: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Square-wave checkerboard.
    Checkerboard {
        #[arg(long, default_value_t = 512)]
        width: usize,
        #[arg(long, default_value_t = 512)]
        height: usize,
        /// Pixels per full cycle.
        #[arg(long)]
        period: f64,
        #[arg(long, default_value_t = 0)]
        lo: u8,
        #[arg(long, default_value_t = 255)]
        hi: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Uniform gray.
    Uniform {
        #[arg(long, default_value_t = 512)]
        width: usize,
        #[arg(long, default_value_t = 512)]
        height: usize,
        #[arg(long, default_value_t = 128)]
        code: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Clip of a dead-leaves scene panning horizontally.
    Pan {
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 256)]
        height: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        frames: usize,
        /// Pixels per frame.
        #[arg(long, default_value_t = 8)]
        speed: usize,
        /// Frames are written as frame_NNN.png.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::EstimateAttenuation(a) => estimate_attenuation(&a),
        Command::MakeProfiles(a) => make_profiles(&a),
        Command::Schedule(a) => schedule(&a),
        Command::ScheduleVideo(a) => schedule_video(&a),
        Command::Synth(s) => synth(s),
    }
}

/// Sizes the global rayon pool from HVPF_THREADS (unset or 0 = automatic).
pub fn init_threads() -> Result<()> {
    let n = match std::env::var("HVPF_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::config(format!("HVPF_THREADS must be a non-negative integer, got '{v}'")))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn load_luminance(path: &Path, vc: &ViewingConditions) -> Result<LuminanceImage> {
    decode_luminance(&Raster::load(path)?, vc)
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm" | "pnm"))
}

fn estimate_attenuation(a: &EstimateArgs) -> Result<()> {
    // corpora are decoded through the reference display; the measured ratio
    // is a property of the operator, not of the display
    let vc = ViewingConditions::office_uhd_27();
    let curve = match (&a.corpus, &a.pairs) {
        (Some(dir), None) => {
            let op: SurrogateOperator = a.op.as_deref().unwrap_or_default().parse()?;
            if let Some(k) = a.k {
                if k != op.scale_factor() {
                    return Err(Error::config(format!("--k {k} disagrees with operator {op}")));
                }
            }
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| Error::io(dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| is_image(p))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(Error::input(format!("{} contains no PNG/PGM images", dir.display())));
            }
            let images = paths.iter().map(|p| load_luminance(p, &vc)).collect::<Result<Vec<_>>>()?;
            attenuation_curve(&op, &images)?
        }
        (None, Some(list)) => {
            if a.op.is_some() {
                return Err(Error::config("--op applies to --corpus, not --pairs"));
            }
            let pairs = read_pair_list(list)?
                .iter()
                .map(|(r, x)| Ok((load_luminance(r, &vc)?, load_luminance(x, &vc)?)))
                .collect::<Result<Vec<_>>>()?;
            attenuation_from_pairs(&pairs, a.k.unwrap_or(1), None)?
        }
        _ => return Err(Error::config("give either --corpus with --op, or --pairs")),
    };
    if curve.fit.coarse {
        log::warn!("fall-off fit did not converge; writing the best point found (flagged coarse)");
    }
    write_json(&a.out, &curve.to_file())
}

fn read_pair_list(list: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let text = std::fs::read_to_string(list).map_err(|e| Error::io(list, e))?;
    let base = list.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let [r, x] = fields[..] else {
            return Err(Error::format_at(Some(list.to_path_buf()), i + 1, "expected two paths"));
        };
        out.push((base.join(r), base.join(x)));
    }
    if out.is_empty() {
        return Err(Error::input(format!("{} lists no pairs", list.display())));
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostEntry {
    id: u32,
    #[serde(default)]
    name: Option<String>,
    cost_flops: f64,
    #[serde(default)]
    baseline_full: bool,
}

fn make_profiles(a: &MakeProfilesArgs) -> Result<()> {
    let bands: [f64; 3] = a.bands[..]
        .try_into()
        .map_err(|_| Error::config("--bands takes exactly three frequencies"))?;
    if bands.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
        return Err(Error::config("band frequencies must be finite and non-negative"));
    }
    let text = std::fs::read_to_string(&a.costs).map_err(|e| Error::io(&a.costs, e))?;
    let costs: Vec<CostEntry> = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: Some(a.costs.clone()),
        line: Some(e.line()),
        msg: e.to_string(),
    })?;
    if costs.len() != a.curves.len() {
        return Err(Error::config(format!(
            "{} curves but {} cost entries",
            a.curves.len(),
            costs.len()
        )));
    }
    let variants = a
        .curves
        .iter()
        .zip(costs)
        .map(|(path, c)| {
            let curve = AttenuationCurve::load(path)?;
            let name = c.name.unwrap_or_else(|| {
                curve
                    .operator
                    .clone()
                    .unwrap_or_else(|| path.file_stem().unwrap_or_default().to_string_lossy().into_owned())
            });
            let mut v = VariantProfile::new(c.id, name, c.cost_flops, AttenuationModel::Falloff(curve.fit.params), bands);
            v.baseline_full = c.baseline_full;
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let set = ProfileSet::new(variants)?;
    write_json(&a.out, &set.to_entries())
}

fn parse_gaze(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::input(format!("gaze must be \"X,Y\" in pixels, got '{s}'"));
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    let x: f64 = x.trim().parse().map_err(|_| bad())?;
    let y: f64 = y.trim().parse().map_err(|_| bad())?;
    if !(x.is_finite() && y.is_finite()) {
        return Err(bad());
    }
    Ok((x, y))
}

/// Report written next to each quality map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    #[serde(flatten)]
    pub cost: CostReport,
    pub pixels_per_degree: f64,
    pub levels: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaze: Option<[f64; 2]>,
    pub mean_velocity_px_per_frame: f64,
}

/// Cost report plus viewing context, as written to `*.report.json`.
pub fn image_report(map: &QualityMap, cfg: &RunConfig, gaze: Option<(f64, f64)>) -> Result<ImageReport> {
    let mean_v = map.velocity.iter().sum::<f64>() / map.n_patches() as f64;
    Ok(ImageReport {
        cost: cost_report(map, &cfg.profiles),
        pixels_per_degree: cfg.viewing.pixels_per_degree()?,
        levels: cfg.levels,
        gaze: gaze.map(|(x, y)| [x, y]),
        mean_velocity_px_per_frame: mean_v,
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_map_outputs(prefix: &Path, map: &QualityMap, report: &ImageReport, profiles: &ProfileSet) -> Result<()> {
    write_atomic(&with_suffix(prefix, ".map.csv"), map.to_csv().as_bytes())?;
    write_json(&with_suffix(prefix, ".report.json"), report)?;
    save_gray_png(&with_suffix(prefix, ".heatmap.png"), map.width, map.height, &map.heatmap(profiles))
}

fn options(cfg: &RunConfig) -> ScheduleOptions {
    ScheduleOptions {
        levels: cfg.levels,
        ..ScheduleOptions::new(cfg.patch_size)
    }
}

fn schedule(a: &ScheduleArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.config)?;
    let img = load_luminance(&a.image, &cfg.viewing)?;
    let gaze = a.gaze.as_deref().map(parse_gaze).transpose()?;
    let flow = match (&a.flow, &a.prev) {
        (Some(f), _) => Some(load_flow(f, Some((img.width(), img.height())))?),
        (None, Some(p)) => {
            let prev = load_luminance(p, &cfg.viewing)?;
            Some(block_match(&prev, &img, cfg.motion.block, cfg.motion.search_radius)?)
        }
        (None, None) => None,
    };
    let ctx = ScheduleContext { gaze, flow: flow.as_ref() };
    let map = schedule_image(&img, &cfg.viewing, &cfg.csf, &cfg.profiles, &options(&cfg), &ctx)?;
    let report = image_report(&map, &cfg, gaze)?;
    write_map_outputs(&a.out_prefix, &map, &report, &cfg.profiles)
}

fn glob_sorted(pattern: &str) -> Result<Vec<PathBuf>> {
    let mut paths = glob::glob(pattern)
        .map_err(|e| Error::input(format!("bad glob '{pattern}': {e}")))?
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::input(format!("glob '{pattern}': {e}")))?;
    paths.sort();
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub index: usize,
    pub frame: String,
    pub cost_total: f64,
    pub cost_baseline: f64,
    pub ratio: f64,
    pub mean_velocity_px_per_frame: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub n_frames: usize,
    pub cost_total: f64,
    pub cost_baseline: f64,
    pub ratio: f64,
    pub frames: Vec<FrameSummary>,
}

fn schedule_video(a: &ScheduleVideoArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.config)?;
    let paths = glob_sorted(&a.frames)?;
    if paths.len() < 2 {
        return Err(Error::input(format!(
            "'{}' matched {} frame(s); video scheduling needs at least 2",
            a.frames,
            paths.len()
        )));
    }
    let frames = paths
        .iter()
        .map(|p| load_luminance(p, &cfg.viewing))
        .collect::<Result<Vec<_>>>()?;
    let (w, h) = (frames[0].width(), frames[0].height());
    for (p, f) in paths.iter().zip(&frames) {
        if (f.width(), f.height()) != (w, h) {
            return Err(Error::input(format!(
                "{} is {}x{}, expected {w}x{h} like the first frame",
                p.display(),
                f.width(),
                f.height()
            )));
        }
    }
    let flows = match &a.flows {
        Some(pattern) => {
            let flow_paths = glob_sorted(pattern)?;
            if flow_paths.len() != frames.len() - 1 {
                return Err(Error::input(format!(
                    "{} frames need {} flow files, '{pattern}' matched {}",
                    frames.len(),
                    frames.len() - 1,
                    flow_paths.len()
                )));
            }
            Some(flow_paths.iter().map(|p| load_flow(p, Some((w, h)))).collect::<Result<Vec<_>>>()?)
        }
        None => None,
    };
    let gaze = a.gaze.as_deref().map(parse_gaze).transpose()?;
    let maps = schedule_frames(&frames, &cfg, flows, gaze)?;
    let mut summaries = Vec::with_capacity(frames.len());
    let (mut total, mut baseline) = (0.0, 0.0);
    for (n, map) in maps.iter().enumerate() {
        let report = image_report(map, &cfg, gaze)?;
        write_map_outputs(&with_suffix(&a.out_prefix, &format!(".frame{n:04}")), map, &report, &cfg.profiles)?;
        total += map.cost_total;
        baseline += map.cost_baseline;
        summaries.push(FrameSummary {
            index: n,
            frame: paths[n].file_name().unwrap_or_default().to_string_lossy().into_owned(),
            cost_total: map.cost_total,
            cost_baseline: map.cost_baseline,
            ratio: map.ratio,
            mean_velocity_px_per_frame: report.mean_velocity_px_per_frame,
        });
    }
    write_json(
        &with_suffix(&a.out_prefix, ".report.json"),
        &VideoReport {
            n_frames: frames.len(),
            cost_total: total,
            cost_baseline: baseline,
            ratio: total / baseline,
            frames: summaries,
        },
    )
}

/// Schedules a clip. `flows[k]` is the motion from frame k to k + 1; when
/// absent it is block-matched. Frame 0 uses the motion towards frame 1.
pub fn schedule_frames(
    frames: &[LuminanceImage],
    cfg: &RunConfig,
    flows: Option<Vec<FlowField>>,
    gaze: Option<(f64, f64)>,
) -> Result<Vec<QualityMap>> {
    if frames.len() < 2 {
        return Err(Error::input("a clip needs at least 2 frames"));
    }
    let flows = match flows {
        Some(f) if f.len() == frames.len() - 1 => f,
        Some(f) => {
            return Err(Error::input(format!("{} frames need {} flows, got {}", frames.len(), frames.len() - 1, f.len())))
        }
        None => frames
            .windows(2)
            .map(|pair| block_match(&pair[0], &pair[1], cfg.motion.block, cfg.motion.search_radius))
            .collect::<Result<_>>()?,
    };
    let opts = options(cfg);
    frames
        .iter()
        .enumerate()
        .map(|(n, frame)| {
            let ctx = ScheduleContext { gaze, flow: Some(&flows[n.max(1) - 1]) };
            schedule_image(frame, &cfg.viewing, &cfg.csf, &cfg.profiles, &opts, &ctx)
        })
        .collect()
}

fn synth(cmd: SynthCommand) -> Result<()> {
    match cmd {
        SynthCommand::DeadLeaves { width, height, seed, out } => {
            check_size(width, height)?;
            corpus::dead_leaves_raster(width, height, seed).save_png(&out)
        }
        SynthCommand::Checkerboard { width, height, period, lo, hi, out } => {
            check_size(width, height)?;
            if !(period.is_finite() && period >= 2.0) {
                return Err(Error::input("checkerboard period must be at least 2 px"));
            }
            corpus::checkerboard_raster(width, height, period, lo, hi).save_png(&out)
        }
        SynthCommand::Uniform { width, height, code, out } => {
            check_size(width, height)?;
            corpus::uniform_raster(width, height, code).save_png(&out)
        }
        SynthCommand::Pan { width, height, seed, frames, speed, out_dir } => {
            check_size(width, height)?;
            if frames == 0 {
                return Err(Error::input("--frames must be positive"));
            }
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            for (n, frame) in corpus::pan_clip(width, height, seed, frames, speed).iter().enumerate() {
                frame.save_png(&out_dir.join(format!("frame_{n:03}.png")))?;
            }
            Ok(())
        }
    }
}

fn check_size(w: usize, h: usize) -> Result<()> {
    if w == 0 || h == 0 || w > 16384 || h > 16384 {
        return Err(Error::input(format!("image size {w}x{h} is out of range")));
    }
    Ok(())
}
