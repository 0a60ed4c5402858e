//! Frequency-response profiling of image reconstruction operators.

mod attenuation;
mod falloff;
mod radial;
mod resample;

pub use attenuation::{
    attenuation_curve, attenuation_from_pairs, pair_ratio, AttenuationCurve, CurveFile, FitRecord,
    BIN_FLOOR_REL, RATIO_CLAMP,
};
pub use falloff::{eval_falloff, fit_gaussian_falloff, FalloffFit, FalloffParams, A_BOUNDS, B_BOUNDS, C_BOUNDS};
pub use radial::{radial_average, RadialSpectrum};
pub use resample::{gaussian_blur, resize_catmull_rom, SurrogateOperator};
