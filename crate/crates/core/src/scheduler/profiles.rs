use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{FalloffParams, RATIO_CLAMP};

/// Normalized band centers (cycles/pixel) of pyramid levels 0, 1, 2.
pub const DEFAULT_BANDS_PX: [f64; 3] = [0.25, 0.125, 0.0625];

/// Similarity differences below this count as ties.
pub const COSINE_TIE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCurve {
    pub freqs: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledCurve {
    fn validate(&self) -> Result<()> {
        if self.freqs.len() != self.values.len() || self.freqs.is_empty() {
            return Err(Error::config("sampled curve needs matching, nonempty freqs and values"));
        }
        if self.freqs.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::config("sampled curve frequencies must be strictly increasing"));
        }
        if self.values.iter().chain(&self.freqs).any(|v| !v.is_finite()) {
            return Err(Error::config("sampled curve values must be finite"));
        }
        Ok(())
    }

    /// Piecewise-linear, held constant past either end.
    pub fn eval(&self, f: f64) -> f64 {
        let n = self.freqs.len();
        if f <= self.freqs[0] {
            return self.values[0];
        }
        if f >= self.freqs[n - 1] {
            return self.values[n - 1];
        }
        let i = self.freqs.partition_point(|&x| x <= f) - 1;
        let t = (f - self.freqs[i]) / (self.freqs[i + 1] - self.freqs[i]);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttenuationModel {
    Falloff(FalloffParams),
    Sampled(SampledCurve),
}

impl AttenuationModel {
    pub fn eval(&self, f: f64) -> f64 {
        match self {
            AttenuationModel::Falloff(p) => p.eval(f),
            AttenuationModel::Sampled(s) => s.eval(f),
        }
    }
}

/// One candidate upsampler.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantProfile {
    pub id: u32,
    pub name: String,
    pub cost_flops: f64,
    pub atten: AttenuationModel,
    pub baseline_full: bool,
    /// Attenuation at the three band frequencies, clamped to [0, 1.5].
    pub t_hat: [f64; 3],
}

impl VariantProfile {
    pub fn new(id: u32, name: impl Into<String>, cost_flops: f64, atten: AttenuationModel, bands: [f64; 3]) -> Self {
        let t_hat = bands.map(|f| atten.eval(f).clamp(0.0, RATIO_CLAMP));
        Self {
            id,
            name: name.into(),
            cost_flops,
            atten,
            baseline_full: false,
            t_hat,
        }
    }
}

/// On-disk variant entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantEntry {
    pub id: u32,
    pub name: String,
    pub cost_flops: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atten: Option<FalloffParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<SampledCurve>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub baseline_full: bool,
    /// Precomputed attenuation at the band frequencies; recomputed from the
    /// curve when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_hat: Option<[f64; 3]>,
}

/// Validated variant set with exactly one baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    variants: Vec<VariantProfile>,
    baseline: usize,
    cheapest: usize,
}

impl ProfileSet {
    /// Validates the set. If no variant is flagged as the baseline, the
    /// most expensive one is used.
    pub fn new(variants: Vec<VariantProfile>) -> Result<Self> {
        if variants.is_empty() {
            return Err(Error::config("profile set is empty"));
        }
        let mut ids = BTreeSet::new();
        for v in &variants {
            if !ids.insert(v.id) {
                return Err(Error::config(format!("duplicate variant id {}", v.id)));
            }
            if !(v.cost_flops.is_finite() && v.cost_flops > 0.0) {
                return Err(Error::config(format!("variant {} has nonpositive cost", v.id)));
            }
            if v.t_hat.iter().any(|t| !(0.0..=RATIO_CLAMP).contains(t)) {
                return Err(Error::config(format!(
                    "variant {} has t_hat {:?} outside [0, {RATIO_CLAMP}]",
                    v.id, v.t_hat
                )));
            }
        }
        if variants.len() < 2 {
            return Err(Error::config("profile set needs at least two variants"));
        }
        let distinct_costs: BTreeSet<u64> = variants.iter().map(|v| v.cost_flops.to_bits()).collect();
        if distinct_costs.len() < 2 {
            return Err(Error::config("profile set needs at least two distinct costs"));
        }
        let max_cost = variants.iter().map(|v| v.cost_flops).fold(f64::MIN, f64::max);
        let flagged: Vec<usize> = (0..variants.len()).filter(|&i| variants[i].baseline_full).collect();
        let baseline = match flagged.as_slice() {
            [] => {
                let top: Vec<usize> = (0..variants.len())
                    .filter(|&i| variants[i].cost_flops == max_cost)
                    .collect();
                if top.len() > 1 {
                    return Err(Error::config(
                        "several variants share the highest cost; flag one with baseline_full",
                    ));
                }
                top[0]
            }
            [i] => *i,
            _ => return Err(Error::config("more than one variant is flagged baseline_full")),
        };
        if variants[baseline].cost_flops < max_cost {
            return Err(Error::config(format!(
                "baseline variant {} is not the most expensive",
                variants[baseline].id
            )));
        }
        let mut variants = variants;
        for (i, v) in variants.iter_mut().enumerate() {
            v.baseline_full = i == baseline;
        }
        let cheapest = (0..variants.len())
            .min_by(|&a, &b| cost_order(&variants[a], &variants[b]))
            .expect("nonempty");
        Ok(Self {
            variants,
            baseline,
            cheapest,
        })
    }

    pub fn from_entries(entries: Vec<VariantEntry>, bands: [f64; 3]) -> Result<Self> {
        let variants = entries
            .into_iter()
            .map(|e| {
                let atten = match (e.atten, e.samples) {
                    (Some(p), None) => {
                        p.validate()?;
                        AttenuationModel::Falloff(p)
                    }
                    (None, Some(s)) => {
                        s.validate()?;
                        AttenuationModel::Sampled(s)
                    }
                    _ => {
                        return Err(Error::config(format!(
                            "variant {} needs exactly one of 'atten' or 'samples'",
                            e.id
                        )))
                    }
                };
                let mut v = VariantProfile::new(e.id, e.name, e.cost_flops, atten, bands);
                if let Some(t) = e.t_hat {
                    v.t_hat = t;
                }
                v.baseline_full = e.baseline_full;
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(variants)
    }

    pub fn from_json(text: &str, path: Option<&Path>) -> Result<Self> {
        let entries: Vec<VariantEntry> = serde_json::from_str(text).map_err(|e| Error::Format {
            path: path.map(Path::to_path_buf),
            line: Some(e.line()),
            msg: e.to_string(),
        })?;
        Self::from_entries(entries, DEFAULT_BANDS_PX)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, Some(path))
    }

    pub fn to_entries(&self) -> Vec<VariantEntry> {
        self.variants
            .iter()
            .map(|v| {
                let (atten, samples) = match &v.atten {
                    AttenuationModel::Falloff(p) => (Some(*p), None),
                    AttenuationModel::Sampled(s) => (None, Some(s.clone())),
                };
                VariantEntry {
                    id: v.id,
                    name: v.name.clone(),
                    cost_flops: v.cost_flops,
                    atten,
                    samples,
                    baseline_full: v.baseline_full,
                    t_hat: Some(v.t_hat),
                }
            })
            .collect()
    }

    pub fn variants(&self) -> &[VariantProfile] {
        &self.variants
    }

    pub fn baseline(&self) -> &VariantProfile {
        &self.variants[self.baseline]
    }

    pub fn cheapest(&self) -> &VariantProfile {
        &self.variants[self.cheapest]
    }

    pub fn get(&self, id: u32) -> Option<&VariantProfile> {
        self.variants.iter().find(|v| v.id == id)
    }

    /// Variant ids ordered from cheapest to most expensive.
    pub fn ids_by_cost(&self) -> Vec<u32> {
        let mut v: Vec<&VariantProfile> = self.variants.iter().collect();
        v.sort_by(|a, b| cost_order(a, b));
        v.into_iter().map(|p| p.id).collect()
    }
}

fn cost_order(a: &VariantProfile, b: &VariantProfile) -> std::cmp::Ordering {
    a.cost_flops.total_cmp(&b.cost_flops).then(a.id.cmp(&b.id))
}

fn cosine(t: &[f64; 3], u: &[f64; 3]) -> f64 {
    let dot: f64 = t.iter().zip(u).map(|(a, b)| a * b).sum();
    let nt = t.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 {
        return 0.0;
    }
    dot / (nt * nu)
}

/// Variant whose attenuation vector points most nearly along `t`; the
/// cheapest variant when `t` is zero.
pub fn select_variant(t: &[f64; 3], profiles: &ProfileSet) -> Result<u32> {
    if t.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::input(format!("tolerable attenuation {t:?} must be finite and non-negative")));
    }
    if t.iter().all(|&v| v == 0.0) {
        return Ok(profiles.cheapest().id);
    }
    let mut best: Option<(f64, &VariantProfile)> = None;
    for v in profiles.variants() {
        let s = cosine(t, &v.t_hat);
        best = match best {
            None => Some((s, v)),
            Some((bs, bv)) => {
                if s > bs + COSINE_TIE || ((s - bs).abs() <= COSINE_TIE && cost_order(v, bv).is_lt()) {
                    Some((s, v))
                } else {
                    Some((bs, bv))
                }
            }
        };
    }
    Ok(best.expect("profile set is nonempty").1.id)
}

/// Cosine similarity between `t` and each variant's attenuation vector.
pub fn similarities(t: &[f64; 3], profiles: &ProfileSet) -> Vec<(u32, f64)> {
    profiles.variants().iter().map(|v| (v.id, cosine(t, &v.t_hat))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn with_t_hat(id: u32, cost: f64, t_hat: [f64; 3]) -> VariantProfile {
        let mut v = VariantProfile::new(
            id,
            format!("v{id}"),
            cost,
            AttenuationModel::Falloff(FalloffParams { a: 1.0, b: 0.0, c: 0.0 }),
            DEFAULT_BANDS_PX,
        );
        v.t_hat = t_hat;
        v
    }

    fn two() -> ProfileSet {
        ProfileSet::new(vec![
            with_t_hat(0, 1.0, [0.95, 0.45, 0.10]),
            with_t_hat(1, 4.0, [0.99, 0.93, 0.80]),
        ])
        .unwrap()
    }

    #[test]
    fn worked_example_selects_full() {
        let t = [0.9, 0.9, 0.8];
        let sims = similarities(&t, &two());
        // independent recomputation of the cosines
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let cos = |a: [f64; 3], b: [f64; 3]| dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt());
        assert_abs_diff_eq!(sims[0].1, cos(t, [0.95, 0.45, 0.10]), epsilon = 1e-15);
        assert_abs_diff_eq!(sims[1].1, cos(t, [0.99, 0.93, 0.80]), epsilon = 1e-15);
        assert!(sims[1].1 > 0.999 && sims[0].1 < 0.85);
        assert_eq!(select_variant(&t, &two()).unwrap(), 1);
    }

    #[test]
    fn zero_t_selects_cheapest() {
        assert_eq!(select_variant(&[0.0; 3], &two()).unwrap(), 0);
    }

    #[test]
    fn parallel_vector_wins_and_ties_go_cheap() {
        let set = ProfileSet::new(vec![
            with_t_hat(0, 3.0, [1.0, 0.0, 0.0]),
            with_t_hat(1, 9.0, [0.0, 1.0, 0.0]),
            with_t_hat(2, 2.0, [0.0, 1.5, 0.0]),
        ])
        .unwrap();
        assert_eq!(select_variant(&[0.0, 0.5, 0.0], &set).unwrap(), 2);
        assert_eq!(select_variant(&[0.7, 0.0, 0.0], &set).unwrap(), 0);
    }

    #[test]
    fn set_validation() {
        assert!(ProfileSet::new(vec![]).is_err());
        assert!(ProfileSet::new(vec![with_t_hat(0, 1.0, [1.0; 3])]).is_err());
        assert!(ProfileSet::new(vec![with_t_hat(0, 1.0, [1.0; 3]), with_t_hat(0, 2.0, [1.0; 3])]).is_err());
        assert!(ProfileSet::new(vec![with_t_hat(0, 1.0, [1.0; 3]), with_t_hat(1, 1.0, [1.0; 3])]).is_err());
        assert!(ProfileSet::new(vec![with_t_hat(0, 0.0, [1.0; 3]), with_t_hat(1, 1.0, [1.0; 3])]).is_err());
        assert!(ProfileSet::new(vec![with_t_hat(0, 1.0, [1.6, 1.0, 1.0]), with_t_hat(1, 2.0, [1.0; 3])]).is_err());
        let mut cheap_base = with_t_hat(0, 1.0, [1.0; 3]);
        cheap_base.baseline_full = true;
        assert!(ProfileSet::new(vec![cheap_base, with_t_hat(1, 2.0, [1.0; 3])]).is_err());
        assert_eq!(two().baseline().id, 1);
    }

    #[test]
    fn json_forms() {
        let text = r#"[
            {"id": 0, "name": "bicubic", "cost_flops": 1e6, "samples": {"freqs": [0.0, 0.5], "values": [1.0, 0.0]}},
            {"id": 1, "name": "full", "cost_flops": 4e6, "atten": {"a": 0.3989422804014327, "b": 0.0, "c": 0.0}, "baseline_full": true}
        ]"#;
        let set = ProfileSet::from_json(text, None).unwrap();
        assert_eq!(set.get(0).unwrap().t_hat, [0.5, 0.75, 0.875]);
        assert!(set.get(1).unwrap().t_hat[2] > 0.98);
        assert!(ProfileSet::from_json(r#"[{"id":0,"name":"x","cost_flops":1}]"#, None).is_err());
        assert!(matches!(ProfileSet::from_json("[{", None), Err(Error::Format { .. })));
        let again = ProfileSet::from_entries(set.to_entries(), DEFAULT_BANDS_PX).unwrap();
        assert_eq!(again, set);
    }

    #[test]
    fn sampled_curve_interpolates() {
        let s = SampledCurve { freqs: vec![0.1, 0.2, 0.4], values: vec![1.0, 0.5, 0.1] };
        assert_eq!(s.eval(0.0), 1.0);
        assert_abs_diff_eq!(s.eval(0.15), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eval(0.3), 0.3, epsilon = 1e-12);
        assert_eq!(s.eval(1.0), 0.1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn selection_is_scale_invariant(
            t in prop::array::uniform3(0.0f64..1.0),
            lambda in 1e-3f64..1e3,
        ) {
            prop_assume!(t.iter().any(|&v| v > 1e-6));
            let set = ProfileSet::new(vec![
                with_t_hat(0, 1.0, [0.95, 0.45, 0.10]),
                with_t_hat(1, 2.0, [0.98, 0.7, 0.3]),
                with_t_hat(2, 4.0, [0.99, 0.93, 0.80]),
            ]).unwrap();
            let scaled = t.map(|v| v * lambda);
            prop_assert_eq!(select_variant(&t, &set).unwrap(), select_variant(&scaled, &set).unwrap());
        }
    }
}
