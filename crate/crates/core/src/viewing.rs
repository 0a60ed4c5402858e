//! Display and observer model.
//!
//! Everything downstream works in physical units: luminance in cd/m², spatial
//! frequency in cycles per visual degree, velocities in degrees per second.
//! [`ViewingConditions`] is the single place where pixels are tied to those
//! units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

const METERS_PER_INCH: f64 = 0.0254;

/// Physical display plus observer distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewingConditions {
    pub diagonal_m: f64,
    pub resolution: (u32, u32),
    pub peak_luminance: f64,
    pub black_level: f64,
    pub gamma: f64,
    pub distance_m: f64,
    /// Frames per second; 0 for still images.
    pub fps: f64,
}

impl ViewingConditions {
    pub const DEFAULT_GAMMA: f64 = 2.2;
    pub const DEFAULT_BLACK_LEVEL: f64 = 0.4;

    /// 27" 3840×2160 office monitor, 400 cd/m² peak, viewed from 60 cm.
    pub fn office_uhd_27() -> Self {
        Self {
            diagonal_m: 27.0 * METERS_PER_INCH,
            resolution: (3840, 2160),
            peak_luminance: 400.0,
            black_level: Self::DEFAULT_BLACK_LEVEL,
            gamma: Self::DEFAULT_GAMMA,
            distance_m: 0.60,
            fps: 24.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.resolution;
        if w == 0 || h == 0 {
            return Err(Error::config("display resolution must be positive"));
        }
        if !(self.diagonal_m.is_finite() && self.diagonal_m > 0.0) {
            return Err(Error::config("display diagonal must be positive"));
        }
        if !(self.distance_m.is_finite() && self.distance_m > 0.0) {
            return Err(Error::config("viewing distance must be positive"));
        }
        if !(self.black_level.is_finite() && self.black_level >= 0.0) {
            return Err(Error::config("black level must be non-negative"));
        }
        if !(self.peak_luminance.is_finite() && self.peak_luminance > self.black_level) {
            return Err(Error::config("peak luminance must exceed the black level"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::config("gamma must be positive"));
        }
        if !(self.fps.is_finite() && self.fps >= 0.0) {
            return Err(Error::config("fps must be non-negative"));
        }
        let ppd = pixels_per_degree_raw(self);
        if !(ppd.is_finite() && ppd > 0.0) {
            return Err(Error::config(format!("pixels per degree is not finite ({ppd})")));
        }
        Ok(())
    }

    /// Horizontal pixel density in pixels per meter, assuming square pixels.
    pub fn pixel_density(&self) -> f64 {
        let (w, h) = (self.resolution.0 as f64, self.resolution.1 as f64);
        let width_m = self.diagonal_m * w / w.hypot(h);
        w / width_m
    }

    pub fn pixels_per_degree(&self) -> Result<f64> {
        let ppd = pixels_per_degree_raw(self);
        if ppd.is_finite() && ppd > 0.0 {
            Ok(ppd)
        } else {
            Err(Error::config(format!("pixels per degree is not finite ({ppd})")))
        }
    }

    /// Highest representable spatial frequency in cycles per degree.
    pub fn nyquist_cpd(&self) -> Result<f64> {
        Ok(self.pixels_per_degree()? / 2.0)
    }

    /// Luminance floor added to contrast denominators.
    pub fn luminance_floor(&self) -> f64 {
        self.black_level + 0.01
    }

    /// Maps an 8-bit code (possibly fractional after luma reduction) to
    /// cd/m² through the gamma display model.
    pub fn code_to_luminance(&self, code: f64) -> f64 {
        let v = (code / 255.0).clamp(0.0, 1.0);
        if v >= 1.0 {
            return self.peak_luminance;
        }
        self.black_level + (self.peak_luminance - self.black_level) * v.powf(self.gamma)
    }

    /// Inverse of [`code_to_luminance`](Self::code_to_luminance).
    pub fn luminance_to_code(&self, luminance: f64) -> f64 {
        let v = ((luminance - self.black_level) / (self.peak_luminance - self.black_level))
            .clamp(0.0, 1.0);
        255.0 * v.powf(1.0 / self.gamma)
    }

    /// Retinal speed in degrees per second for an on-screen speed in
    /// pixels per frame.
    pub fn retinal_velocity(&self, px_per_frame: f64) -> Result<f64> {
        retinal_velocity(px_per_frame, self.fps, self.pixels_per_degree()?)
    }
}

fn pixels_per_degree_raw(vc: &ViewingConditions) -> f64 {
    let one_degree_m = 2.0 * vc.distance_m * 0.5f64.to_radians().tan();
    vc.pixel_density() * one_degree_m
}

/// Pixels subtended by one degree of visual angle at the display center.
pub fn pixels_per_degree(vc: &ViewingConditions) -> Result<f64> {
    vc.pixels_per_degree()
}

/// Speed in degrees per second: `|v| * fps / ppd`.
pub fn retinal_velocity(px_per_frame: f64, fps: f64, ppd: f64) -> Result<f64> {
    let speed = px_per_frame.abs();
    if speed == 0.0 {
        return Ok(0.0);
    }
    if fps <= 0.0 {
        return Err(Error::config(
            "nonzero motion requires a positive frame rate",
        ));
    }
    Ok(speed * fps / ppd)
}

/// JSON form of [`ViewingConditions`]. The diagonal may be given in inches
/// or meters; display gamma and black level fall back to 2.2 and 0.4 cd/m².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal_m: Option<f64>,
    pub res_w: u32,
    pub res_h: u32,
    pub peak_nits: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub black_nits: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub distance_cm: f64,
    #[serde(default)]
    pub fps: f64,
}

impl ViewingConfig {
    pub fn resolve(&self) -> Result<ViewingConditions> {
        let diagonal_m = match (self.diagonal_in, self.diagonal_m) {
            (Some(_), Some(_)) => {
                return Err(Error::config("give either diagonal_in or diagonal_m, not both"))
            }
            (Some(inches), None) => inches * METERS_PER_INCH,
            (None, Some(m)) => m,
            (None, None) => return Err(Error::config("missing display diagonal")),
        };
        let vc = ViewingConditions {
            diagonal_m,
            resolution: (self.res_w, self.res_h),
            peak_luminance: self.peak_nits,
            black_level: self.black_nits.unwrap_or(ViewingConditions::DEFAULT_BLACK_LEVEL),
            gamma: self.gamma.unwrap_or(ViewingConditions::DEFAULT_GAMMA),
            distance_m: self.distance_cm / 100.0,
            fps: self.fps,
        };
        vc.validate()?;
        Ok(vc)
    }
}

impl From<&ViewingConditions> for ViewingConfig {
    fn from(vc: &ViewingConditions) -> Self {
        Self {
            diagonal_in: None,
            diagonal_m: Some(vc.diagonal_m),
            res_w: vc.resolution.0,
            res_h: vc.resolution.1,
            peak_nits: vc.peak_luminance,
            black_nits: Some(vc.black_level),
            gamma: Some(vc.gamma),
            distance_cm: vc.distance_m * 100.0,
            fps: vc.fps,
        }
    }
}

/// Row-major luminance plane in cd/m².
#[derive(Debug, Clone, PartialEq)]
pub struct LuminanceImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl LuminanceImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input("image has zero size"));
        }
        if values.len() != width * height {
            return Err(Error::input(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height,
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image has zero size");
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Sample with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.values[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `size`×`size` window starting at (x0, y0); samples past the image
    /// border are edge-replicated.
    pub fn padded_window(&self, x0: usize, y0: usize, size: usize) -> Self {
        Self::from_fn(size, size, |x, y| {
            self.get_clamped((x0 + x) as isize, (y0 + y) as isize)
        })
    }

    /// Crop without padding. Panics if the rectangle leaves the image.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop out of bounds");
        Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }
}

/// Converts an 8-bit raster into display luminance. Color rasters have
/// already been reduced to Rec.709 luma codes by [`Raster`].
pub fn decode_luminance(raster: &Raster, vc: &ViewingConditions) -> Result<LuminanceImage> {
    if raster.width() == 0 || raster.height() == 0 {
        return Err(Error::input("image has zero size"));
    }
    let values = raster
        .codes()
        .iter()
        .map(|&c| vc.code_to_luminance(c))
        .collect();
    LuminanceImage::new(raster.width(), raster.height(), values)
}

/// Inverse of [`decode_luminance`], rounding to the nearest code.
pub fn encode_luminance(image: &LuminanceImage, vc: &ViewingConditions) -> Raster {
    let codes = image
        .values()
        .iter()
        .map(|&l| vc.luminance_to_code(l).round())
        .collect();
    Raster::from_codes(image.width(), image.height(), codes)
        .expect("dimensions come from a valid image")
}

/// Angular distance from the gaze point in degrees, per pixel, row-major.
///
/// Uses the flat-screen small-angle form `distance_px / ppd`. Against exact
/// `atan` geometry for a viewer centered on the gaze point the error stays
/// under 5% out to 30°.
pub fn eccentricity_field(gaze: (f64, f64), resolution: (usize, usize), ppd: f64) -> Result<Vec<f64>> {
    let (w, h) = resolution;
    check_gaze(gaze, resolution)?;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(eccentricity_at((x as f64, y as f64), gaze, ppd));
        }
    }
    Ok(out)
}

pub fn eccentricity_at(point: (f64, f64), gaze: (f64, f64), ppd: f64) -> f64 {
    (point.0 - gaze.0).hypot(point.1 - gaze.1) / ppd
}

pub fn check_gaze(gaze: (f64, f64), resolution: (usize, usize)) -> Result<()> {
    let (w, h) = resolution;
    let inside = gaze.0.is_finite()
        && gaze.1.is_finite()
        && gaze.0 >= 0.0
        && gaze.1 >= 0.0
        && gaze.0 < w as f64
        && gaze.1 < h as f64;
    if inside {
        Ok(())
    } else {
        Err(Error::input(format!(
            "gaze ({}, {}) lies outside the {w}x{h} raster",
            gaze.0, gaze.1
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn ppd_of_office_display() {
        let vc = ViewingConditions::office_uhd_27();
        let ppd = vc.pixels_per_degree().unwrap();
        assert_abs_diff_eq!(ppd, 67.3, epsilon = 0.1);
        assert_abs_diff_eq!(vc.nyquist_cpd().unwrap(), 33.6, epsilon = 0.1);

        let far = ViewingConditions {
            distance_m: 1.2,
            ..vc
        };
        assert_abs_diff_eq!(far.pixels_per_degree().unwrap(), 134.6, epsilon = 0.15);
    }

    #[test]
    fn luminance_endpoints_and_midpoint() {
        let vc = ViewingConditions::office_uhd_27();
        assert_eq!(vc.code_to_luminance(255.0), 400.0);
        assert_eq!(vc.code_to_luminance(0.0), 0.4);
        let expected = 0.4 + 399.6 * (128.0f64 / 255.0).powf(2.2);
        assert_abs_diff_eq!(vc.code_to_luminance(128.0), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(vc.code_to_luminance(128.0), 88.12, epsilon = 0.01);
    }

    #[test]
    fn decode_rejects_empty() {
        let vc = ViewingConditions::office_uhd_27();
        let empty = Raster::empty_for_tests();
        assert!(matches!(decode_luminance(&empty, &vc), Err(Error::Input(_))));
    }

    #[test]
    fn eccentricity_examples() {
        let field = eccentricity_field((10.0, 10.0), (20, 20), 67.3).unwrap();
        assert_eq!(field[10 * 20 + 10], 0.0);
        assert_abs_diff_eq!(eccentricity_at((673.0, 0.0), (0.0, 0.0), 67.3), 10.0, epsilon = 1e-12);
        let corner = eccentricity_at((0.0, 0.0), (1920.0, 1080.0), 67.3);
        assert_abs_diff_eq!(corner, 32.7, epsilon = 0.05);
        assert!(eccentricity_field((20.0, 3.0), (20, 20), 67.3).is_err());
        assert!(eccentricity_field((-1.0, 3.0), (20, 20), 67.3).is_err());
    }

    #[test]
    fn small_angle_error_bounds() {
        let vc = ViewingConditions::office_uhd_27();
        let ppd = vc.pixels_per_degree().unwrap();
        let px_per_m = vc.pixel_density();
        let rel_err = |deg: f64| {
            let offset_px = deg.to_radians().tan() * vc.distance_m * px_per_m;
            (offset_px / ppd - deg).abs() / deg
        };
        // linear in the on-screen offset, so the error grows like tan(θ)/θ
        for deg in 1..=21 {
            assert!(rel_err(deg as f64) < 0.05, "{deg}°: {}", rel_err(deg as f64));
        }
        assert!((rel_err(30.0) - 0.1027).abs() < 2e-3, "{}", rel_err(30.0));
    }

    #[test]
    fn retinal_velocity_examples() {
        assert_eq!(retinal_velocity(0.0, 0.0, 48.0).unwrap(), 0.0);
        assert_abs_diff_eq!(retinal_velocity(2.0, 24.0, 48.0).unwrap(), 1.0, epsilon = 1e-12);
        let speed = 2.0f64.hypot(2.0);
        assert_abs_diff_eq!(retinal_velocity(speed, 24.0, 67.3).unwrap(), 1.01, epsilon = 0.005);
        assert!(matches!(retinal_velocity(1.0, 0.0, 48.0), Err(Error::Config(_))));
    }

    #[test]
    fn config_resolves_inches_and_defaults() {
        let json = r#"{"diagonal_in":27,"res_w":3840,"res_h":2160,"peak_nits":400,"distance_cm":60,"fps":24}"#;
        let cfg: ViewingConfig = serde_json::from_str(json).unwrap();
        let vc = cfg.resolve().unwrap();
        assert_abs_diff_eq!(vc.pixels_per_degree().unwrap(), 67.3, epsilon = 0.1);
        assert_eq!(vc.gamma, 2.2);
        assert_eq!(vc.black_level, 0.4);

        let both = r#"{"diagonal_in":27,"diagonal_m":0.6,"res_w":10,"res_h":10,"peak_nits":400,"distance_cm":60}"#;
        let cfg: ViewingConfig = serde_json::from_str(both).unwrap();
        assert!(cfg.resolve().is_err());

        let dark = r#"{"diagonal_m":0.6,"res_w":10,"res_h":10,"peak_nits":0.1,"distance_cm":60}"#;
        let cfg: ViewingConfig = serde_json::from_str(dark).unwrap();
        assert!(cfg.resolve().is_err());
    }

    fn arb_vc() -> impl Strategy<Value = ViewingConditions> {
        (0.1f64..3.0, 100u32..8000, 100u32..8000, 0.1f64..5.0).prop_map(|(diag, w, h, dist)| {
            ViewingConditions {
                diagonal_m: diag,
                resolution: (w, h),
                distance_m: dist,
                ..ViewingConditions::office_uhd_27()
            }
        })
    }

    proptest! {
        #[test]
        fn ppd_increases_with_distance_and_density(vc in arb_vc(), f in 1.01f64..3.0) {
            let base = vc.pixels_per_degree().unwrap();
            let farther = ViewingConditions { distance_m: vc.distance_m * f, ..vc };
            prop_assert!(farther.pixels_per_degree().unwrap() > base);
            // same resolution on a smaller panel means denser pixels
            let denser = ViewingConditions { diagonal_m: vc.diagonal_m / f, ..vc };
            prop_assert!(denser.pixels_per_degree().unwrap() > base);
        }

        #[test]
        fn decode_is_monotone(a in 0u8..=255, b in 0u8..=255) {
            let vc = ViewingConditions::office_uhd_27();
            let (lo, hi) = (a.min(b) as f64, a.max(b) as f64);
            prop_assert!(vc.code_to_luminance(lo) <= vc.code_to_luminance(hi));
        }

        #[test]
        fn eccentricity_radially_monotone(gx in 0.0f64..63.0, gy in 0.0f64..63.0, angle in 0.0f64..std::f64::consts::TAU) {
            let (dx, dy) = (angle.cos(), angle.sin());
            let mut last = -1.0;
            for step in 0..50 {
                let r = step as f64 * 0.7;
                let e = eccentricity_at((gx + r * dx, gy + r * dy), (gx, gy), 40.0);
                prop_assert!(e >= last);
                last = e;
            }
        }

        #[test]
        fn retinal_velocity_is_homogeneous(v in 0.0f64..50.0, lambda in 0.0f64..10.0) {
            let a = retinal_velocity(lambda * v, 24.0, 67.3).unwrap();
            let b = lambda * retinal_velocity(v, 24.0, 67.3).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}
