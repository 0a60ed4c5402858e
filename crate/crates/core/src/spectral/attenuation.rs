use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::falloff::{fit_gaussian_falloff, FalloffFit, FalloffParams};
use super::radial::radial_average;
use super::resample::SurrogateOperator;
use crate::error::{Error, Result};
use crate::viewing::LuminanceImage;

/// Upper clamp on per-image ratios; tolerates mild overshoot while keeping
/// nearly empty reference bins from dominating the mean.
pub const RATIO_CLAMP: f64 = 1.5;

/// Reference bins below this fraction of the image RMS are treated as
/// empty.
pub const BIN_FLOOR_REL: f64 = 1e-8;

/// Frequency response of an operator, aggregated over a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct AttenuationCurve {
    pub scale_factor_k: u32,
    pub operator: Option<String>,
    /// Bin centers in cycles/pixel.
    pub bin_freqs: Vec<f64>,
    /// Mean reconstructed/reference magnitude ratio; `None` where no corpus
    /// image had usable reference energy.
    pub samples: Vec<Option<f64>>,
    pub fit: FalloffFit,
}

impl AttenuationCurve {
    pub fn valid_samples(&self) -> (Vec<f64>, Vec<f64>) {
        self.bin_freqs
            .iter()
            .zip(&self.samples)
            .filter_map(|(&f, s)| s.map(|v| (f, v)))
            .unzip()
    }

    pub fn to_file(&self) -> CurveFile {
        CurveFile {
            k: self.scale_factor_k,
            operator: self.operator.clone(),
            bin_freqs: self.bin_freqs.clone(),
            samples: self.samples.clone(),
            fit: FitRecord {
                a: self.fit.params.a,
                b: self.fit.params.b,
                c: self.fit.params.c,
                rms: self.fit.rms,
                coarse: self.fit.coarse,
            },
        }
    }

    pub fn from_file(file: CurveFile) -> Result<Self> {
        if file.bin_freqs.len() != file.samples.len() {
            return Err(Error::format("bin_freqs and samples differ in length"));
        }
        if file.bin_freqs.is_empty() {
            return Err(Error::format("curve has no samples"));
        }
        if file.bin_freqs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::format("bin_freqs must be strictly increasing"));
        }
        let params = FalloffParams {
            a: file.fit.a,
            b: file.fit.b,
            c: file.fit.c,
        };
        params.validate()?;
        if !file.fit.rms.is_finite() {
            return Err(Error::format("fit residual must be finite"));
        }
        Ok(Self {
            scale_factor_k: file.k,
            operator: file.operator,
            bin_freqs: file.bin_freqs,
            samples: file.samples,
            fit: FalloffFit {
                params,
                rms: file.fit.rms,
                coarse: file.fit.coarse,
            },
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: CurveFile = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: Some(path.to_path_buf()),
            line: Some(e.line()),
            msg: e.to_string(),
        })?;
        Self::from_file(file)
    }
}

/// On-disk curve: `{k, bin_freqs[], samples[], fit:{a,b,c,rms}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFile {
    pub k: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<String>,
    pub bin_freqs: Vec<f64>,
    pub samples: Vec<Option<f64>>,
    pub fit: FitRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rms: f64,
    #[serde(default)]
    pub coarse: bool,
}

/// Per-bin ratio for one (reference, reconstruction) pair; `None` marks
/// bins whose reference magnitude falls below the floor.
pub fn pair_ratio(reference: &LuminanceImage, reconstruction: &LuminanceImage) -> Result<(Vec<f64>, Vec<Option<f64>>)> {
    if (reference.width(), reference.height()) != (reconstruction.width(), reconstruction.height()) {
        return Err(Error::input(format!(
            "reference is {}x{} but reconstruction is {}x{}",
            reference.width(),
            reference.height(),
            reconstruction.width(),
            reconstruction.height()
        )));
    }
    let rs = radial_average(reference)?;
    let xs = radial_average(reconstruction)?;
    let floor = BIN_FLOOR_REL * reference.rms();
    let ratios = rs
        .magnitudes
        .iter()
        .zip(&xs.magnitudes)
        .map(|(&r, &x)| (r >= floor && r > 0.0).then(|| (x / r).clamp(0.0, RATIO_CLAMP)))
        .collect();
    Ok((rs.bin_freqs, ratios))
}

/// Averages per-pair ratio curves and fits the fall-off model.
pub fn attenuation_from_pairs(
    pairs: &[(LuminanceImage, LuminanceImage)],
    k: u32,
    operator: Option<String>,
) -> Result<AttenuationCurve> {
    if pairs.is_empty() {
        return Err(Error::input("attenuation needs at least one image"));
    }
    let per_image: Vec<(Vec<f64>, Vec<Option<f64>>)> = pairs
        .par_iter()
        .map(|(r, x)| pair_ratio(r, x))
        .collect::<Result<_>>()?;
    aggregate(per_image, k, operator)
}

/// Downscales each corpus image by the operator's factor, reconstructs it
/// and measures the frequency response against the original.
pub fn attenuation_curve(
    op: &SurrogateOperator,
    corpus: &[LuminanceImage],
) -> Result<AttenuationCurve> {
    op.validate()?;
    if corpus.is_empty() {
        return Err(Error::input("attenuation needs at least one image"));
    }
    let per_image: Vec<(Vec<f64>, Vec<Option<f64>>)> = corpus
        .par_iter()
        .map(|img| pair_ratio(img, &op.apply(img)?))
        .collect::<Result<_>>()?;
    aggregate(per_image, op.scale_factor(), Some(op.to_string()))
}

fn aggregate(
    per_image: Vec<(Vec<f64>, Vec<Option<f64>>)>,
    k: u32,
    operator: Option<String>,
) -> Result<AttenuationCurve> {
    let bin_freqs = per_image[0].0.clone();
    if per_image.iter().any(|(f, _)| f.len() != bin_freqs.len()) {
        return Err(Error::input("corpus images must share the same bin layout (same minimum side)"));
    }
    let n_bins = bin_freqs.len();
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (_, ratios) in &per_image {
        for (i, r) in ratios.iter().enumerate() {
            if let Some(v) = r {
                sums[i] += v;
                counts[i] += 1;
            }
        }
    }
    let samples: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();

    let (f, y): (Vec<f64>, Vec<f64>) = bin_freqs
        .iter()
        .zip(&samples)
        .filter_map(|(&f, s)| s.map(|v| (f, v)))
        .unzip();
    let fit = fit_gaussian_falloff(&f, &y)?;
    Ok(AttenuationCurve {
        scale_factor_k: k,
        operator,
        bin_freqs,
        samples,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn identity_is_one_everywhere() {
        let imgs = corpus::natural_corpus(3, 64);
        let curve = attenuation_curve(&SurrogateOperator::Identity, &imgs).unwrap();
        assert_eq!(curve.scale_factor_k, 1);
        assert_eq!(curve.samples[0], None, "DC-only bin has no energy");
        for s in curve.samples.iter().flatten() {
            assert!((s - 1.0).abs() <= 1e-6);
        }
        for &f in &curve.bin_freqs {
            assert!(curve.fit.params.eval(f) >= 0.99);
        }
    }

    #[test]
    fn stronger_blur_attenuates_more() {
        let imgs = corpus::natural_corpus(2, 64);
        let a = attenuation_curve(&SurrogateOperator::GaussianBlur { sigma: 0.8 }, &imgs).unwrap();
        let b = attenuation_curve(&SurrogateOperator::GaussianBlur { sigma: 1.6 }, &imgs).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            if let (Some(x), Some(y)) = (x, y) {
                assert!(x >= y, "{x} < {y}");
            }
        }
    }

    #[test]
    fn mismatched_pair_rejected() {
        let a = LuminanceImage::filled(16, 16, 1.0);
        let b = LuminanceImage::filled(16, 17, 1.0);
        assert!(matches!(pair_ratio(&a, &b), Err(Error::Input(_))));
    }

    #[test]
    fn file_roundtrip_keeps_invalid_bins() {
        let imgs = corpus::natural_corpus(1, 32);
        let curve = attenuation_curve(&SurrogateOperator::BicubicDownUp { k: 2 }, &imgs).unwrap();
        let text = serde_json::to_string(&curve.to_file()).unwrap();
        assert!(text.contains("null"));
        let back = AttenuationCurve::from_file(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, curve);
    }
}
