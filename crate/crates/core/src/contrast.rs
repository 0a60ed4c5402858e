//! Multi-scale band-limited contrast of a luminance patch, its CSF
//! normalization and the within-band masking transform.

use crate::csf::{ContrastSensitivity, CsfQuery};
use crate::error::{Error, Result};
use crate::viewing::{LuminanceImage, ViewingConditions};

pub const DEFAULT_LEVELS: usize = 3;
pub const MASK_ALPHA: f64 = 0.7;
pub const MASK_BETA: f64 = 0.2;

/// 5-tap binomial kernel, indexed by offset + 2.
const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastBand {
    /// Cycles per degree.
    pub center_freq: f64,
    /// Cycles per pixel of the analysed raster.
    pub center_freq_px: f64,
    pub width: usize,
    pub height: usize,
    /// Peli contrast C.
    pub physical: Vec<f64>,
    /// Local adapting luminance, expand(G_{i+1}).
    pub adapting: Vec<f64>,
    /// C_n; empty until [`normalize`] runs.
    pub normalized: Vec<f64>,
    /// C_t; empty until [`mask`] runs.
    pub masked: Vec<f64>,
    /// M; empty until [`mask`] runs.
    pub mask_term: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastPyramid {
    pub bands: Vec<ContrastBand>,
    /// G_0..G_n.
    pub gaussian: Vec<LuminanceImage>,
    pub luminance_floor: f64,
}

/// Binomial blur with edge replication followed by 2× decimation.
/// Output side is ceil(side/2).
pub fn reduce(img: &LuminanceImage) -> LuminanceImage {
    let (w, h) = (img.width(), img.height());
    let (ow, oh) = (w.div_ceil(2), h.div_ceil(2));
    let horiz = LuminanceImage::from_fn(ow, h, |x, y| {
        let cx = 2 * x as isize;
        let center = img.get(2 * x, y);
        let mut acc = 0.0;
        for (k, wgt) in BINOMIAL.iter().enumerate() {
            acc += wgt * (img.get_clamped(cx + k as isize - 2, y as isize) - center);
        }
        center + acc
    });
    LuminanceImage::from_fn(ow, oh, |x, y| {
        let cy = 2 * y as isize;
        let center = horiz.get(x, 2 * y);
        let mut acc = 0.0;
        for (k, wgt) in BINOMIAL.iter().enumerate() {
            acc += wgt * (horiz.get_clamped(x as isize, cy + k as isize - 2) - center);
        }
        center + acc
    })
}

fn expand_1d(n_out: usize, src: impl Fn(isize) -> f64) -> Vec<f64> {
    (0..n_out)
        .map(|i| {
            let m = (i / 2) as isize;
            let center = src(m);
            if i % 2 == 0 {
                center + 0.125 * (src(m - 1) - center) + 0.125 * (src(m + 1) - center)
            } else {
                center + 0.5 * (src(m + 1) - center)
            }
        })
        .collect()
}

/// Interpolating 2× upsample to `width`×`height` (the binomial kernel
/// scaled by 2, split into its even and odd phases).
pub fn expand(img: &LuminanceImage, width: usize, height: usize) -> LuminanceImage {
    let sh = img.height();
    let mut horiz = Vec::with_capacity(width * sh);
    for y in 0..sh {
        horiz.extend(expand_1d(width, |x| img.get_clamped(x, y as isize)));
    }
    let horiz = LuminanceImage::new(width, sh, horiz).expect("sizes match");
    let mut out = vec![0.0; width * height];
    for x in 0..width {
        let col = expand_1d(height, |y| horiz.get_clamped(x as isize, y));
        for (y, v) in col.into_iter().enumerate() {
            out[y * width + x] = v;
        }
    }
    LuminanceImage::new(width, height, out).expect("sizes match")
}

/// Gaussian pyramid G_0..G_n and Peli contrast for levels 0..n−1, with
/// band i centered at (ppd/2)/2^{i+1} cycles per degree.
pub fn build_pyramid(patch: &LuminanceImage, vc: &ViewingConditions, n_levels: usize) -> Result<ContrastPyramid> {
    if n_levels == 0 {
        return Err(Error::input("pyramid needs at least one level"));
    }
    let min_side = 1usize
        .checked_shl(n_levels as u32)
        .ok_or_else(|| Error::input(format!("{n_levels} pyramid levels is too many")))?;
    if patch.width().min(patch.height()) < min_side {
        return Err(Error::input(format!(
            "a {}x{} patch is too small for {n_levels} levels (needs side >= {min_side})",
            patch.width(),
            patch.height()
        )));
    }
    let ppd = vc.pixels_per_degree()?;
    let l_floor = vc.luminance_floor();

    let mut gaussian = vec![patch.clone()];
    for i in 0..n_levels {
        let next = reduce(&gaussian[i]);
        gaussian.push(next);
    }

    let bands = (0..n_levels)
        .map(|i| {
            let g = &gaussian[i];
            let e = expand(&gaussian[i + 1], g.width(), g.height());
            let physical = g
                .values()
                .iter()
                .zip(e.values())
                .map(|(&gv, &ev)| (gv - ev) / (ev + l_floor))
                .collect();
            let center_freq_px = 0.5 / (1u64 << (i + 1)) as f64;
            ContrastBand {
                center_freq: ppd * center_freq_px,
                center_freq_px,
                width: g.width(),
                height: g.height(),
                physical,
                adapting: e.into_values(),
                normalized: Vec::new(),
                masked: Vec::new(),
                mask_term: Vec::new(),
            }
        })
        .collect();

    Ok(ContrastPyramid {
        bands,
        gaussian,
        luminance_floor: l_floor,
    })
}

/// CSF normalization with a per-band, per-position eccentricity (degrees).
/// `velocity` is the retinal speed in deg/s; temporal frequency is
/// velocity × band frequency.
pub fn normalize_with(
    pyr: &mut ContrastPyramid,
    csf: &dyn ContrastSensitivity,
    velocity: f64,
    eccentricity: impl Fn(usize, usize, usize) -> f64,
) -> Result<()> {
    if !(velocity.is_finite() && velocity >= 0.0) {
        return Err(Error::input(format!("retinal velocity must be non-negative, got {velocity}")));
    }
    let l_floor = pyr.luminance_floor;
    for (level, band) in pyr.bands.iter_mut().enumerate() {
        let f = band.center_freq;
        let f_t = velocity * f;
        let mut out = Vec::with_capacity(band.physical.len());
        for (idx, (&c, &l)) in band.physical.iter().zip(&band.adapting).enumerate() {
            if c == 0.0 {
                out.push(0.0);
                continue;
            }
            let (x, y) = (idx % band.width, idx / band.width);
            let q = CsfQuery::new(f, f_t, l.max(l_floor), eccentricity(level, x, y));
            out.push(c * csf.sensitivity(&q)?);
        }
        band.normalized = out;
    }
    Ok(())
}

/// [`normalize_with`] at a single eccentricity for the whole patch.
pub fn normalize(pyr: &mut ContrastPyramid, csf: &dyn ContrastSensitivity, velocity: f64, eccentricity: f64) -> Result<()> {
    normalize_with(pyr, csf, velocity, |_, _, _| eccentricity)
}

/// Perceived contrast of a single value given its masking term.
pub fn masked_value(c_n: f64, m: f64, alpha: f64) -> f64 {
    c_n.signum() * c_n.abs().powf(alpha) / (1.0 + m)
}

/// Mean of |C_n(q)|^β over the rest of the band, for every position.
pub fn mask_terms(normalized: &[f64], beta: f64) -> Vec<f64> {
    let n = normalized.len();
    if n <= 1 {
        return vec![0.0; n];
    }
    let powered: Vec<f64> = normalized.iter().map(|c| c.abs().powf(beta)).collect();
    let total: f64 = powered.iter().sum();
    powered
        .iter()
        .map(|p| ((total - p) / (n - 1) as f64).max(0.0))
        .collect()
}

/// Within-band masking; fills `masked` and `mask_term`.
pub fn mask(pyr: &mut ContrastPyramid, alpha: f64, beta: f64) -> Result<()> {
    for band in &mut pyr.bands {
        if band.normalized.len() != band.physical.len() {
            return Err(Error::Internal("mask called before normalize".into()));
        }
        band.mask_term = mask_terms(&band.normalized, beta);
        band.masked = band
            .normalized
            .iter()
            .zip(&band.mask_term)
            .map(|(&c, &m)| masked_value(c, m, alpha))
            .collect();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csf::{AnalyticCsf, CsfModel};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vc() -> ViewingConditions {
        ViewingConditions::office_uhd_27()
    }

    fn random_patch(side: usize, seed: u64) -> LuminanceImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LuminanceImage::from_fn(side, side, |_, _| rng.gen_range(0.4..400.0))
    }

    #[test]
    fn constant_patch_has_exactly_zero_contrast() {
        for side in [8, 10, 13, 32] {
            let p = LuminanceImage::filled(side, side, 123.456);
            let pyr = build_pyramid(&p, &vc(), 3).unwrap();
            for b in &pyr.bands {
                assert!(b.physical.iter().all(|&c| c == 0.0));
            }
        }
    }

    #[test]
    fn level_count_and_frequencies() {
        let pyr = build_pyramid(&random_patch(16, 1), &vc(), 4).unwrap();
        assert_eq!(pyr.bands.len(), 4);
        assert_eq!(pyr.gaussian.len(), 5);
        let ppd = vc().pixels_per_degree().unwrap();
        assert_abs_diff_eq!(pyr.bands[0].center_freq, ppd / 4.0, epsilon = 1e-12);
        assert!(pyr.bands.windows(2).all(|w| w[0].center_freq > w[1].center_freq));
        assert!(build_pyramid(&random_patch(7, 1), &vc(), 3).is_err());
        assert!(build_pyramid(&random_patch(8, 1), &vc(), 3).is_ok());
    }

    #[test]
    fn scaling_luminance_leaves_contrast_unchanged() {
        let mut v = vc();
        v.black_level = 0.0;
        v.peak_luminance = 1e9;
        let p = random_patch(32, 2).map(|l| 1e5 + 1e3 * l);
        let a = build_pyramid(&p, &v, 3).unwrap();
        let b = build_pyramid(&p.map(|l| 2.0 * l), &v, 3).unwrap();
        for (x, y) in a.bands.iter().zip(&b.bands) {
            for (c1, c2) in x.physical.iter().zip(&y.physical) {
                assert!((c1 - c2).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn sinusoid_at_band_zero_lands_in_level_zero() {
        let f0 = 0.25;
        let p = LuminanceImage::from_fn(64, 64, |x, _| {
            100.0 + 50.0 * (std::f64::consts::TAU * f0 * (x as f64 + 0.5)).sin()
        });
        let pyr = build_pyramid(&p, &vc(), 3).unwrap();
        let energy: Vec<f64> = pyr
            .bands
            .iter()
            .map(|b| b.physical.iter().map(|c| c * c).sum())
            .collect();
        let total: f64 = energy.iter().sum();
        assert!(energy[0] / total >= 0.7, "{energy:?}");
    }

    #[test]
    fn reconstruction_is_consistent() {
        for seed in 0..50 {
            let pyr = build_pyramid(&random_patch(24, seed), &vc(), 3).unwrap();
            for (i, b) in pyr.bands.iter().enumerate() {
                for (k, (&c, &e)) in b.physical.iter().zip(&b.adapting).enumerate() {
                    let g = c * (e + pyr.luminance_floor) + e;
                    assert!((g - pyr.gaussian[i].values()[k]).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn physical_contrast_bounded() {
        let v = vc();
        let bound = (v.peak_luminance - v.black_level) / v.black_level;
        for seed in 0..20 {
            let pyr = build_pyramid(&random_patch(16, seed), &v, 3).unwrap();
            for b in &pyr.bands {
                assert!(b.physical.iter().all(|c| c.is_finite() && c.abs() <= bound));
            }
        }
    }

    #[test]
    fn normalization_example() {
        let csf = CsfModel::DefaultAnalytic(AnalyticCsf::default());
        let mut pyr = build_pyramid(&LuminanceImage::filled(8, 8, 100.0), &vc(), 3).unwrap();
        // overwrite band 0 with a known contrast at 3 cpd and 100 cd/m²
        pyr.bands[0].center_freq = 3.0;
        pyr.bands[0].physical.fill(0.01);
        pyr.bands[0].adapting.fill(100.0);
        normalize(&mut pyr, &csf, 0.0, 0.0).unwrap();
        let expected = 0.01 * 200.0 * (100.0f64 / 150.0).sqrt();
        assert_abs_diff_eq!(pyr.bands[0].normalized[0], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 1.633, epsilon = 1e-3);
        assert!(pyr.bands[1].normalized.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn eccentricity_reduces_normalized_contrast() {
        let csf = CsfModel::default();
        let p = random_patch(32, 9);
        let mut a = build_pyramid(&p, &vc(), 3).unwrap();
        let mut b = a.clone();
        normalize(&mut a, &csf, 0.0, 0.0).unwrap();
        normalize(&mut b, &csf, 0.0, 20.0).unwrap();
        for (x, y) in a.bands.iter().zip(&b.bands) {
            for (c0, c20) in x.normalized.iter().zip(&y.normalized) {
                assert!(c20.abs() <= c0.abs());
            }
        }
    }

    #[test]
    fn masking_examples() {
        assert_abs_diff_eq!(masked_value(1.0, mask_terms(&[1.0, 0.0, 0.0], 0.2)[0], 0.7), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(masked_value(1.0, mask_terms(&[1.0, 1.0, -1.0, 1.0], 0.2)[0], 0.7), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(masked_value(-0.5, mask_terms(&[-0.5, 0.0], 0.2)[0], 0.7), -0.6156, epsilon = 1e-4);
        assert_eq!(mask_terms(&[5.0], 0.2), vec![0.0]);
    }

    proptest! {
        #[test]
        fn mask_preserves_sign_and_is_monotone(c in -50.0f64..50.0, m in 0.0f64..10.0, dm in 0.0f64..10.0, dc in 0.0f64..10.0) {
            let t = masked_value(c, m, MASK_ALPHA);
            if c != 0.0 {
                prop_assert_eq!(t.signum(), c.signum());
            }
            prop_assert!(masked_value(c, m + dm, MASK_ALPHA).abs() <= t.abs());
            let bigger = c.signum() * (c.abs() + dc);
            prop_assert!(masked_value(bigger, m, MASK_ALPHA).abs() >= t.abs());
        }
    }
}
