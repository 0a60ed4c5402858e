//! Deterministic synthetic test imagery.
//!
//! The dead-leaves model (opaque disks with a power-law radius distribution)
//! reproduces the occlusion edges and ~1/f² power spectrum of natural
//! photographs, which is what attenuation profiling and the scheduler's
//! directional checks rely on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::Raster;
use crate::viewing::{LuminanceImage, ViewingConditions};

/// Dead-leaves image as 8-bit codes.
pub fn dead_leaves_raster(width: usize, height: usize, seed: u64) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6465_6164_6c76);
    let r_min = 1.5f64;
    let r_max = (width.min(height) as f64 / 4.0).max(r_min * 2.0);
    let mut codes = vec![rng.gen_range(40.0..215.0f64).round(); width * height];
    let n_disks = (width * height) / 60;
    let (inv_lo, inv_hi) = (1.0 / (r_max * r_max), 1.0 / (r_min * r_min));
    for _ in 0..n_disks {
        // p(r) ∝ r^-3  <=>  1/r² uniform
        let r = 1.0 / rng.gen_range(inv_lo..inv_hi).sqrt();
        let cx = rng.gen_range(0.0..width as f64);
        let cy = rng.gen_range(0.0..height as f64);
        let code = rng.gen_range(10.0..245.0f64).round();
        let x0 = (cx - r).floor().max(0.0) as usize;
        let x1 = ((cx + r).ceil() as usize).min(width - 1);
        let y0 = (cy - r).floor().max(0.0) as usize;
        let y1 = ((cy + r).ceil() as usize).min(height - 1);
        let r2 = r * r;
        for y in y0..=y1 {
            let dy = y as f64 + 0.5 - cy;
            for x in x0..=x1 {
                let dx = x as f64 + 0.5 - cx;
                if dx * dx + dy * dy < r2 {
                    codes[y * width + x] = code;
                }
            }
        }
    }
    Raster::from_codes(width, height, codes).expect("codes are in range")
}

/// Dead-leaves image decoded through the reference office display.
pub fn dead_leaves(width: usize, height: usize, seed: u64) -> LuminanceImage {
    decode(&dead_leaves_raster(width, height, seed), &ViewingConditions::office_uhd_27())
}

/// A corpus of `n` dead-leaves images with consecutive seeds.
pub fn natural_corpus(n: usize, side: usize) -> Vec<LuminanceImage> {
    (0..n as u64).map(|s| dead_leaves(side, side, 1000 + s)).collect()
}

/// Gaussian white noise around `mean`.
pub fn white_noise(width: usize, height: usize, mean: f64, std: f64, seed: u64) -> LuminanceImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LuminanceImage::from_fn(width, height, |_, _| {
        // Box–Muller
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        mean + std * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    })
}

/// Square-wave checkerboard with `period_px` pixels per full cycle along
/// each axis, alternating between codes `lo` and `hi`.
pub fn checkerboard_raster(width: usize, height: usize, period_px: f64, lo: u8, hi: u8) -> Raster {
    let half = period_px / 2.0;
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let cx = ((x as f64 + 0.5) / half).floor() as i64;
            let cy = ((y as f64 + 0.5) / half).floor() as i64;
            data.push(if (cx + cy).rem_euclid(2) == 0 { hi } else { lo });
        }
    }
    Raster::from_gray8(width, height, &data).expect("valid dimensions")
}

pub fn uniform_raster(width: usize, height: usize, code: u8) -> Raster {
    Raster::from_gray8(width, height, &vec![code; width * height]).expect("valid dimensions")
}

/// Clip of a dead-leaves scene translating right by `speed` px per frame.
pub fn pan_clip(width: usize, height: usize, seed: u64, frames: usize, speed: usize) -> Vec<Raster> {
    let scene_w = width + speed * frames.saturating_sub(1);
    let scene = dead_leaves_raster(scene_w, height, seed);
    (0..frames)
        .map(|n| {
            let x0 = speed * (frames - 1 - n);
            let codes = (0..height)
                .flat_map(|y| &scene.codes()[y * scene_w + x0..y * scene_w + x0 + width])
                .copied()
                .collect();
            Raster::from_codes(width, height, codes).expect("cropped from a valid raster")
        })
        .collect()
}

fn decode(raster: &Raster, vc: &ViewingConditions) -> LuminanceImage {
    crate::viewing::decode_luminance(raster, vc).expect("nonempty raster")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(dead_leaves_raster(64, 64, 3), dead_leaves_raster(64, 64, 3));
        assert_ne!(dead_leaves_raster(64, 64, 3), dead_leaves_raster(64, 64, 4));
    }

    #[test]
    fn checkerboard_alternates() {
        let r = checkerboard_raster(8, 8, 4.0, 0, 255);
        let g = r.to_gray8();
        assert_eq!(&g[..8], &[255, 255, 0, 0, 255, 255, 0, 0]);
        assert_eq!(g[2 * 8], 0);
    }

    #[test]
    fn pan_clip_translates() {
        let clip = pan_clip(40, 24, 5, 3, 4);
        assert_eq!(clip.len(), 3);
        for y in 0..24 {
            for x in 4..40 {
                assert_eq!(clip[1].codes()[y * 40 + x], clip[0].codes()[y * 40 + x - 4]);
                assert_eq!(clip[2].codes()[y * 40 + x], clip[1].codes()[y * 40 + x - 4]);
            }
        }
    }
}
