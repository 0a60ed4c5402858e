//! Per-patch variant selection under a one-JND budget, and cost
//! accounting.

mod profiles;

pub use profiles::{
    select_variant, similarities, AttenuationModel, ProfileSet, SampledCurve, VariantEntry, VariantProfile,
    COSINE_TIE, DEFAULT_BANDS_PX,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrast::{build_pyramid, mask, normalize, ContrastPyramid, DEFAULT_LEVELS, MASK_ALPHA, MASK_BETA};
use crate::csf::ContrastSensitivity;
use crate::error::{Error, Result};
use crate::motion::{patch_velocity, FlowField};
use crate::viewing::{check_gaze, eccentricity_at, retinal_velocity, LuminanceImage, ViewingConditions};

/// |C_n| below this is treated as no contrast (t = 0).
pub const CONTRAST_EPS: f64 = 1e-4;

/// Smallest output contrast that stays within one JND of `c_n`
/// (magnitude) under masking `m`. Zero when `c_n` is below threshold.
pub fn tolerable_contrast(c_n: f64, m: f64, alpha: f64) -> f64 {
    let excess = c_n.abs().powf(alpha) - (1.0 + m);
    if excess <= 0.0 {
        0.0
    } else {
        excess.powf(1.0 / alpha)
    }
}

/// Per-band tolerable attenuation of a normalized and masked pyramid: the
/// maximum over positions of C′_n/|C_n|, for the first three bands.
pub fn tolerable_attenuation(pyr: &ContrastPyramid, alpha: f64) -> Result<[f64; 3]> {
    if pyr.bands.len() < 3 {
        return Err(Error::input(format!("need at least 3 bands, pyramid has {}", pyr.bands.len())));
    }
    let mut t = [0.0; 3];
    for (ti, band) in t.iter_mut().zip(&pyr.bands) {
        if band.mask_term.len() != band.normalized.len() || band.normalized.len() != band.physical.len() {
            return Err(Error::Internal("pyramid has not been normalized and masked".into()));
        }
        for (&c, &m) in band.normalized.iter().zip(&band.mask_term) {
            let mag = c.abs();
            if mag < CONTRAST_EPS {
                continue;
            }
            let r = (tolerable_contrast(mag, m, alpha) / mag).clamp(0.0, 1.0);
            if r > *ti {
                *ti = r;
            }
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleOptions {
    pub patch_size: usize,
    pub levels: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl ScheduleOptions {
    pub fn new(patch_size: usize) -> Self {
        Self {
            patch_size,
            levels: DEFAULT_LEVELS,
            alpha: MASK_ALPHA,
            beta: MASK_BETA,
        }
    }
}

/// Optional per-image context.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScheduleContext<'a> {
    /// Gaze point in image pixels; eccentricity is 0 everywhere without it.
    pub gaze: Option<(f64, f64)>,
    /// Screen-space motion in pixels/frame.
    pub flow: Option<&'a FlowField>,
}

/// Per-patch variant assignment for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityMap {
    pub width: usize,
    pub height: usize,
    pub patch_size: usize,
    pub cols: usize,
    pub rows: usize,
    /// Selected variant id per patch, row-major.
    pub grid: Vec<u32>,
    pub t_vectors: Vec<[f64; 3]>,
    /// Patch-center eccentricity in degrees.
    pub eccentricity: Vec<f64>,
    /// Mean on-screen speed in pixels/frame.
    pub velocity: Vec<f64>,
    pub cost_total: f64,
    pub cost_baseline: f64,
    pub ratio: f64,
}

impl QualityMap {
    pub fn n_patches(&self) -> usize {
        self.grid.len()
    }

    /// Pixel rectangle (x0, y0, w, h) of patch `i` inside the image.
    pub fn patch_rect(&self, i: usize) -> (usize, usize, usize, usize) {
        patch_rect(i, self.cols, self.patch_size, self.width, self.height)
    }

    /// Grid of ids as CSV, one patch row per line.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for r in 0..self.rows {
            let row: Vec<String> = self.grid[r * self.cols..(r + 1) * self.cols]
                .iter()
                .map(u32::to_string)
                .collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    /// Full-resolution 8-bit heatmap: the k-th cheapest of n variants maps
    /// to round(255·k/(n−1)).
    pub fn heatmap(&self, profiles: &ProfileSet) -> Vec<u8> {
        let order = profiles.ids_by_cost();
        let n = order.len();
        let shade = |id: u32| -> u8 {
            let k = order.iter().position(|&o| o == id).unwrap_or(0);
            (255.0 * k as f64 / (n - 1).max(1) as f64).round() as u8
        };
        let mut out = vec![0u8; self.width * self.height];
        for (i, &id) in self.grid.iter().enumerate() {
            let g = shade(id);
            let (x0, y0, w, h) = self.patch_rect(i);
            for y in y0..y0 + h {
                out[y * self.width + x0..y * self.width + x0 + w].fill(g);
            }
        }
        out
    }
}

fn patch_rect(i: usize, cols: usize, p: usize, width: usize, height: usize) -> (usize, usize, usize, usize) {
    let (x0, y0) = ((i % cols) * p, (i / cols) * p);
    (x0, y0, p.min(width - x0), p.min(height - y0))
}

struct PatchResult {
    id: u32,
    t: [f64; 3],
    ecc: f64,
    vel: f64,
}

/// Effective tiling: the requested patch size, or the whole image when it
/// does not fit.
pub fn effective_patch_size(width: usize, height: usize, patch_size: usize) -> (usize, bool) {
    if patch_size > width.min(height) {
        (width.max(height), true)
    } else {
        (patch_size, false)
    }
}

/// Tiles the image, analyses each patch and picks a variant for it.
pub fn schedule_image(
    image: &LuminanceImage,
    vc: &ViewingConditions,
    csf: &dyn ContrastSensitivity,
    profiles: &ProfileSet,
    opts: &ScheduleOptions,
    ctx: &ScheduleContext<'_>,
) -> Result<QualityMap> {
    vc.validate()?;
    let (w, h) = (image.width(), image.height());
    if opts.levels < 3 {
        return Err(Error::config(format!("pyramid needs at least 3 levels, got {}", opts.levels)));
    }
    let min_patch = 1usize << opts.levels;
    if opts.patch_size < min_patch {
        return Err(Error::config(format!(
            "patch size {} is below {min_patch} px needed for {} levels",
            opts.patch_size, opts.levels
        )));
    }
    let (p, fallback) = effective_patch_size(w, h, opts.patch_size);
    if fallback {
        log::warn!(
            "patch size {} exceeds the {w}x{h} image; scheduling it as a single patch",
            opts.patch_size
        );
        if w.min(h) < min_patch {
            return Err(Error::input(format!("a {w}x{h} image is too small to analyse ({min_patch} px minimum)")));
        }
    }
    let ppd = vc.pixels_per_degree()?;
    if let Some(g) = ctx.gaze {
        check_gaze(g, (w, h))?;
    }
    let (cols, rows) = if fallback { (1, 1) } else { (w.div_ceil(p), h.div_ceil(p)) };
    let n = cols * rows;
    let speeds = match ctx.flow {
        Some(flow) => patch_velocity(flow, w, h, p)?,
        None => vec![0.0; n],
    };

    let results: Vec<PatchResult> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (x0, y0, pw, ph) = if fallback { (0, 0, w, h) } else { patch_rect(i, cols, p, w, h) };
            let window = if fallback { image.clone() } else { image.padded_window(x0, y0, p) };
            let ecc = match ctx.gaze {
                Some(g) => eccentricity_at((x0 as f64 + pw as f64 / 2.0, y0 as f64 + ph as f64 / 2.0), g, ppd),
                None => 0.0,
            };
            let vel = speeds[i];
            let deg_per_s = retinal_velocity(vel, vc.fps, ppd)?;
            let mut pyr = build_pyramid(&window, vc, opts.levels)?;
            normalize(&mut pyr, csf, deg_per_s, ecc)?;
            mask(&mut pyr, opts.alpha, opts.beta)?;
            let t = tolerable_attenuation(&pyr, opts.alpha)?;
            let id = select_variant(&t, profiles)?;
            Ok(PatchResult { id, t, ecc, vel })
        })
        .collect::<Result<_>>()?;

    let cost_of = |id: u32| profiles.get(id).expect("selected from the set").cost_flops;
    // sequential sum keeps the total bit-identical across thread counts
    let mut cost_total = 0.0;
    for r in &results {
        cost_total += cost_of(r.id);
    }
    let cost_baseline = n as f64 * profiles.baseline().cost_flops;
    Ok(QualityMap {
        width: w,
        height: h,
        patch_size: p,
        cols,
        rows,
        grid: results.iter().map(|r| r.id).collect(),
        t_vectors: results.iter().map(|r| r.t).collect(),
        eccentricity: results.iter().map(|r| r.ecc).collect(),
        velocity: results.iter().map(|r| r.vel).collect(),
        cost_total,
        cost_baseline,
        ratio: cost_total / cost_baseline,
    })
}

/// Network input conventions used to derive a patch size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkStyle {
    /// Network runs on a pre-upsampled image; `receptive_field` is in
    /// high-resolution pixels.
    PreUpsampled { receptive_field: u32 },
    /// Network consumes fixed-size low-resolution patches.
    LowRes { patch: u32 },
}

/// Patch side in low-resolution pixels, plus a warning when R/k had to be
/// rounded up.
pub fn default_patch_size(style: NetworkStyle, k: u32) -> Result<(usize, Option<String>)> {
    if !matches!(k, 2 | 4 | 8) {
        return Err(Error::config(format!("scale factor must be 2, 4 or 8, got {k}")));
    }
    match style {
        NetworkStyle::PreUpsampled { receptive_field: r } => {
            if r == 0 {
                return Err(Error::config("receptive field must be positive"));
            }
            let p = r.div_ceil(k) as usize;
            let warn = (r % k != 0).then(|| format!("receptive field {r} is not divisible by {k}; using {p} px"));
            Ok((p, warn))
        }
        NetworkStyle::LowRes { patch } => {
            if patch == 0 {
                return Err(Error::config("low-resolution patch size must be positive"));
            }
            Ok((patch as usize, None))
        }
    }
}

/// Scheduler cost anchors: (patch area in px², FLOPs).
pub const OVERHEAD_ANCHORS: [(f64, f64); 2] = [(100.0, 39_000.0), (1225.0, 477_000.0)];

/// Scheduler cost for one patch, linear in patch area through the two
/// anchors (10×10 and 35×35).
pub fn overhead_flops(patch_size: usize) -> f64 {
    let [(a0, f0), (a1, f1)] = OVERHEAD_ANCHORS;
    let area = (patch_size * patch_size) as f64;
    f0 + (area - a0) * (f1 - f0) / (a1 - a0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramEntry {
    pub id: u32,
    pub name: String,
    pub cost_flops: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub model: String,
    pub flops_per_patch: f64,
    pub total_flops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub width: usize,
    pub height: usize,
    pub patch_size: usize,
    pub cols: usize,
    pub rows: usize,
    pub n_patches: usize,
    pub cost_total: f64,
    pub cost_baseline: f64,
    pub ratio: f64,
    pub baseline_id: u32,
    pub histogram: Vec<HistogramEntry>,
    pub overhead: OverheadReport,
}

pub fn cost_report(map: &QualityMap, profiles: &ProfileSet) -> CostReport {
    let histogram = profiles
        .ids_by_cost()
        .into_iter()
        .map(|id| {
            let v = profiles.get(id).expect("id from the set");
            HistogramEntry {
                id,
                name: v.name.clone(),
                cost_flops: v.cost_flops,
                count: map.grid.iter().filter(|&&g| g == id).count(),
            }
        })
        .collect();
    let per_patch = overhead_flops(map.patch_size);
    CostReport {
        width: map.width,
        height: map.height,
        patch_size: map.patch_size,
        cols: map.cols,
        rows: map.rows,
        n_patches: map.n_patches(),
        cost_total: map.cost_total,
        cost_baseline: map.cost_baseline,
        ratio: map.ratio,
        baseline_id: profiles.baseline().id,
        histogram,
        overhead: OverheadReport {
            model: "linear in patch area through 39000 FLOPs at 10x10 and 477000 FLOPs at 35x35".into(),
            flops_per_patch: per_patch,
            total_flops: per_patch * map.n_patches() as f64,
        },
    }
}
