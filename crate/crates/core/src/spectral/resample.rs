//! Analytic stand-ins for super-resolution operators.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::viewing::LuminanceImage;

/// Image-to-image operator whose frequency response is known in closed
/// form (or nearly so), used to exercise attenuation profiling without a
/// neural network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurrogateOperator {
    Identity,
    /// Gaussian blur at the original resolution, σ in pixels.
    GaussianBlur { sigma: f64 },
    /// Catmull-Rom downscale by `k` (antialiased) followed by Catmull-Rom
    /// upscale back to the original size.
    BicubicDownUp { k: u32 },
    /// k×k area average followed by pixel replication.
    BoxDownUp { k: u32 },
}

impl SurrogateOperator {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SurrogateOperator::Identity => Ok(()),
            SurrogateOperator::GaussianBlur { sigma } => {
                if sigma.is_finite() && sigma > 0.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!("blur sigma must be positive, got {sigma}")))
                }
            }
            SurrogateOperator::BicubicDownUp { k } | SurrogateOperator::BoxDownUp { k } => {
                if matches!(k, 2 | 4 | 8) {
                    Ok(())
                } else {
                    Err(Error::config(format!("scale factor must be 2, 4 or 8, got {k}")))
                }
            }
        }
    }

    /// Resampling factor, 1 for operators that work at full resolution.
    pub fn scale_factor(&self) -> u32 {
        match *self {
            SurrogateOperator::BicubicDownUp { k } | SurrogateOperator::BoxDownUp { k } => k,
            _ => 1,
        }
    }

    pub fn apply(&self, image: &LuminanceImage) -> Result<LuminanceImage> {
        self.validate()?;
        Ok(match *self {
            SurrogateOperator::Identity => image.clone(),
            SurrogateOperator::GaussianBlur { sigma } => gaussian_blur(image, sigma),
            SurrogateOperator::BicubicDownUp { k } => {
                let (w, h) = (image.width(), image.height());
                let lw = (w as f64 / k as f64).round().max(1.0) as usize;
                let lh = (h as f64 / k as f64).round().max(1.0) as usize;
                let low = resize_catmull_rom(image, lw, lh);
                resize_catmull_rom(&low, w, h)
            }
            SurrogateOperator::BoxDownUp { k } => box_down_up(image, k as usize),
        })
    }
}

impl fmt::Display for SurrogateOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurrogateOperator::Identity => write!(f, "identity"),
            SurrogateOperator::GaussianBlur { sigma } => write!(f, "blur:{sigma}"),
            SurrogateOperator::BicubicDownUp { k } => write!(f, "bicubic:{k}"),
            SurrogateOperator::BoxDownUp { k } => write!(f, "box:{k}"),
        }
    }
}

impl FromStr for SurrogateOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let bad = || Error::config(format!("unrecognized operator '{s}'"));
        let op = match (kind, arg) {
            ("identity", None) => SurrogateOperator::Identity,
            ("blur", Some(a)) => SurrogateOperator::GaussianBlur {
                sigma: a.parse().map_err(|_| bad())?,
            },
            ("bicubic", Some(a)) => SurrogateOperator::BicubicDownUp {
                k: a.parse().map_err(|_| bad())?,
            },
            ("box", Some(a)) => SurrogateOperator::BoxDownUp {
                k: a.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        op.validate()?;
        Ok(op)
    }
}

/// Separable sampled Gaussian, radius ⌈4σ⌉, edge replication.
pub fn gaussian_blur(image: &LuminanceImage, sigma: f64) -> LuminanceImage {
    let radius = (4.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);

    let (w, h) = (image.width(), image.height());
    let horiz = LuminanceImage::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(j, k)| k * image.get_clamped(x as isize + j as isize - radius, y as isize))
            .sum()
    });
    LuminanceImage::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(j, k)| k * horiz.get_clamped(x as isize, y as isize + j as isize - radius))
            .sum()
    })
}

/// Catmull-Rom (Keys, a = −0.5) kernel.
fn catmull_rom(x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        1.5 * x * x * x - 2.5 * x * x + 1.0
    } else if x < 2.0 {
        -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0
    } else {
        0.0
    }
}

/// Per-output-sample taps for a 1-D resize with pixel-center alignment.
/// When shrinking, the kernel is stretched by the scale factor so it also
/// acts as the antialiasing filter.
fn resize_taps(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_out as f64 / n_in as f64;
    let (support, stretch) = if scale < 1.0 {
        (2.0 / scale, scale)
    } else {
        (2.0, 1.0)
    };
    (0..n_out)
        .map(|i| {
            let center = (i as f64 + 0.5) / scale - 0.5;
            let lo = (center - support).floor() as isize;
            let hi = (center + support).ceil() as isize;
            let mut taps: Vec<(usize, f64)> = (lo..=hi)
                .filter_map(|j| {
                    let wgt = catmull_rom((j as f64 - center) * stretch);
                    (wgt != 0.0).then(|| (j.clamp(0, n_in as isize - 1) as usize, wgt))
                })
                .collect();
            let sum: f64 = taps.iter().map(|t| t.1).sum();
            taps.iter_mut().for_each(|t| t.1 /= sum);
            taps
        })
        .collect()
}

pub fn resize_catmull_rom(image: &LuminanceImage, out_w: usize, out_h: usize) -> LuminanceImage {
    let tx = resize_taps(image.width(), out_w);
    let ty = resize_taps(image.height(), out_h);
    let horiz = LuminanceImage::from_fn(out_w, image.height(), |x, y| {
        tx[x].iter().map(|&(j, k)| k * image.get(j, y)).sum()
    });
    LuminanceImage::from_fn(out_w, out_h, |x, y| {
        ty[y].iter().map(|&(j, k)| k * horiz.get(x, j)).sum()
    })
}

fn box_down_up(image: &LuminanceImage, k: usize) -> LuminanceImage {
    let (w, h) = (image.width(), image.height());
    let (lw, lh) = (w.div_ceil(k), h.div_ceil(k));
    let low = LuminanceImage::from_fn(lw, lh, |bx, by| {
        let (x0, y0) = (bx * k, by * k);
        let (x1, y1) = ((x0 + k).min(w), (y0 + k).min(h));
        let mut s = 0.0;
        for y in y0..y1 {
            for x in x0..x1 {
                s += image.get(x, y);
            }
        }
        s / ((x1 - x0) * (y1 - y0)) as f64
    });
    LuminanceImage::from_fn(w, h, |x, y| low.get(x / k, y / k))
}
