use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::viewing::LuminanceImage;

/// Radially averaged Fourier magnitude over annuli of equal width in
/// normalized frequency (cycles/pixel, `0..=0.5`).
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSpectrum {
    /// Bin centers in cycles/pixel.
    pub bin_freqs: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

impl RadialSpectrum {
    pub fn bin_width(&self) -> f64 {
        0.5 / self.bin_freqs.len() as f64
    }

    /// Index of the bin whose half-open interval contains `u`.
    pub fn bin_of(&self, u: f64) -> Option<usize> {
        let i = (u / self.bin_width()).floor();
        (i >= 0.0 && (i as usize) < self.bin_freqs.len()).then_some(i as usize)
    }

    /// Bin centers in cycles per degree.
    pub fn freqs_cpd(&self, ppd: f64) -> Vec<f64> {
        self.bin_freqs.iter().map(|u| u * ppd).collect()
    }
}

/// Periodic Hann window; its spectrum has only three nonzero taps, so
/// leakage stays confined to adjacent frequencies.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
        .collect()
}

/// 2-D DFT magnitude of the mean-subtracted, Hann-windowed image, averaged
/// over annuli. The DC term is excluded and frequencies beyond 0.5
/// cycles/pixel (the spectrum corners) are dropped. Magnitudes are scaled by
/// `1/sqrt(sum w^2)` so white noise of standard deviation σ averages to
/// roughly σ·sqrt(π)/2 independent of image size.
pub fn radial_average(image: &LuminanceImage) -> Result<RadialSpectrum> {
    let (w, h) = (image.width(), image.height());
    if w < 8 || h < 8 {
        return Err(Error::input(format!(
            "radial average needs at least 8x8 pixels, got {w}x{h}"
        )));
    }
    let mean = image.mean();
    let wx = hann(w);
    let wy = hann(h);
    let norm = (wx.iter().map(|v| v * v).sum::<f64>() * wy.iter().map(|v| v * v).sum::<f64>())
        .sqrt();

    let mut buf: Vec<Complex<f64>> = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            buf.push(Complex::new((image.get(x, y) - mean) * wx[x] * wy[y], 0.0));
        }
    }

    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(w);
    for row in buf.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(h);
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }

    let n_bins = w.min(h) / 2;
    let bin_width = 0.5 / n_bins as f64;
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for ky in 0..h {
        let fy = signed_freq(ky, h);
        for kx in 0..w {
            if kx == 0 && ky == 0 {
                continue;
            }
            let fx = signed_freq(kx, w);
            let u = fx.hypot(fy);
            let bin = (u / bin_width).floor() as usize;
            if bin < n_bins {
                sums[bin] += buf[ky * w + kx].norm();
                counts[bin] += 1;
            }
        }
    }

    let magnitudes = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 / norm })
        .collect();
    let bin_freqs = (0..n_bins).map(|i| (i as f64 + 0.5) * bin_width).collect();
    Ok(RadialSpectrum {
        bin_freqs,
        magnitudes,
    })
}

#[inline]
fn signed_freq(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64 / n as f64
    } else {
        (k as f64 - n as f64) / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn constant_image_has_empty_spectrum() {
        let img = LuminanceImage::filled(64, 48, 123.0);
        let s = radial_average(&img).unwrap();
        assert_eq!(s.bin_freqs.len(), 24);
        for &m in &s.magnitudes {
            assert!(m <= 1e-9 * 123.0);
        }
    }

    #[test]
    fn sinusoid_peaks_at_its_bin() {
        let img = LuminanceImage::from_fn(64, 64, |x, _| {
            100.0 + 20.0 * (std::f64::consts::TAU * 0.125 * x as f64).cos()
        });
        let s = radial_average(&img).unwrap();
        let peak = s
            .magnitudes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(Some(peak), s.bin_of(0.125));
    }

    #[test]
    fn rejects_tiny_images() {
        assert!(radial_average(&LuminanceImage::filled(7, 64, 1.0)).is_err());
    }

    #[test]
    fn white_noise_is_flat() {
        // Monte-Carlo oracle: average the per-bin magnitudes over 10 seeds,
        // then compare each bin in [0.05, 0.45] with the mean level.
        let mut acc = vec![0.0; 256];
        let mut freqs = Vec::new();
        for seed in 0..10 {
            let img = corpus::white_noise(512, 512, 100.0, 10.0, seed);
            let s = radial_average(&img).unwrap();
            for (a, m) in acc.iter_mut().zip(&s.magnitudes) {
                *a += m / 10.0;
            }
            freqs = s.bin_freqs;
        }
        let band: Vec<f64> = freqs
            .iter()
            .zip(&acc)
            .filter(|(f, _)| (0.05..=0.45).contains(*f))
            .map(|(_, m)| *m)
            .collect();
        let mean = band.iter().sum::<f64>() / band.len() as f64;
        for m in band {
            assert!((m / mean - 1.0).abs() <= 0.15, "{m} vs {mean}");
        }
    }

    #[test]
    fn transpose_and_offset_invariance() {
        let img = corpus::dead_leaves(96, 64, 7);
        let a = radial_average(&img).unwrap();
        let b = radial_average(&img.transpose()).unwrap();
        let c = radial_average(&img.map(|v| v + 37.5)).unwrap();
        for i in 0..a.magnitudes.len() {
            let scale = a.magnitudes[i].max(1e-12);
            assert!((a.magnitudes[i] - b.magnitudes[i]).abs() / scale <= 1e-6);
            assert!((a.magnitudes[i] - c.magnitudes[i]).abs() / scale <= 1e-6);
        }
    }
}
