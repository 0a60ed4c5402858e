//! Contrast sensitivity as a function of spatial frequency, temporal
//! frequency, adapting luminance and eccentricity.
//!
//! Two models are provided: a compact analytic default with the usual
//! qualitative shape (band-pass in spatial frequency, decaying with
//! eccentricity and temporal frequency, growing with luminance), and a
//! rectilinear lookup table loaded from CSV for plugging in tabulations of
//! published models.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsfQuery {
    /// Cycles per degree.
    pub f_spatial: f64,
    /// Hz.
    pub f_temporal: f64,
    /// Adapting luminance, cd/m².
    pub luminance: f64,
    /// Degrees from the gaze direction.
    pub eccentricity: f64,
}

impl CsfQuery {
    pub fn new(f_spatial: f64, f_temporal: f64, luminance: f64, eccentricity: f64) -> Self {
        Self {
            f_spatial,
            f_temporal,
            luminance,
            eccentricity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.f_spatial.is_finite()
            && self.f_temporal.is_finite()
            && self.eccentricity.is_finite()
            && self.f_spatial >= 0.0
            && self.f_temporal >= 0.0
            && self.eccentricity >= 0.0
            && self.luminance > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("invalid CSF query {self:?}")))
        }
    }

    fn axes(&self) -> [f64; 4] {
        [self.f_spatial, self.f_temporal, self.luminance, self.eccentricity]
    }
}

/// Anything that maps a query to a (positive) contrast sensitivity.
pub trait ContrastSensitivity: Send + Sync {
    fn sensitivity(&self, q: &CsfQuery) -> Result<f64>;
}

/// Separable analytic CSF:
///
/// `S = s_max · s_sp(f·(1 + e/e2)) · s_t(ω) · s_L(L)` with
/// `s_sp(x) = (x/f_peak)·exp(1 − x/f_peak)` (and `s0` at DC),
/// `s_t(ω) = exp(−max(0, ω − ω0)/ωc)`, `s_L(L) = (L/(L + L_half))^p`.
///
/// The constants are modelling choices, not a calibrated fit; only the
/// ordinal behaviour is meant to be relied on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticCsf {
    pub s_max: f64,
    pub f_peak: f64,
    pub s0: f64,
    pub e2: f64,
    pub omega0: f64,
    pub omega_c: f64,
    pub l_half: f64,
    pub p: f64,
}

impl Default for AnalyticCsf {
    fn default() -> Self {
        Self {
            s_max: 200.0,
            f_peak: 3.0,
            s0: 0.2,
            e2: 2.3,
            omega0: 5.0,
            omega_c: 8.0,
            l_half: 50.0,
            p: 0.5,
        }
    }
}

impl AnalyticCsf {
    pub fn spatial_factor(&self, f_eff: f64) -> f64 {
        if f_eff > 0.0 {
            let x = f_eff / self.f_peak;
            x * (1.0 - x).exp()
        } else {
            self.s0
        }
    }

    pub fn temporal_factor(&self, omega: f64) -> f64 {
        if omega <= self.omega0 {
            1.0
        } else {
            (-(omega - self.omega0) / self.omega_c).exp()
        }
    }

    pub fn luminance_factor(&self, l: f64) -> f64 {
        (l / (l + self.l_half)).powf(self.p)
    }

    /// Eccentricity-scaled spatial frequency.
    pub fn effective_frequency(&self, f: f64, e: f64) -> f64 {
        f * (1.0 + e / self.e2)
    }
}

impl ContrastSensitivity for AnalyticCsf {
    fn sensitivity(&self, q: &CsfQuery) -> Result<f64> {
        q.validate()?;
        let s = self.s_max
            * self.spatial_factor(self.effective_frequency(q.f_spatial, q.eccentricity))
            * self.temporal_factor(q.f_temporal)
            * self.luminance_factor(q.luminance);
        // far-tail underflow would otherwise break strict positivity
        Ok(s.max(f64::MIN_POSITIVE))
    }
}

pub const TABLE_COLUMNS: [&str; 5] = [
    "f_spatial_cpd",
    "f_temporal_hz",
    "luminance_nits",
    "eccentricity_deg",
    "sensitivity",
];

/// Sensitivities on a full rectilinear grid over the four query axes,
/// evaluated by multilinear interpolation. Queries outside the grid hull are
/// clamped to it.
#[derive(Debug, Clone, PartialEq)]
pub struct CsfTable {
    axes: [Vec<f64>; 4],
    /// Row-major with the eccentricity axis varying fastest.
    values: Vec<f64>,
}

impl CsfTable {
    pub fn new(axes: [Vec<f64>; 4], values: Vec<f64>) -> Result<Self> {
        for (i, axis) in axes.iter().enumerate() {
            if axis.is_empty() {
                return Err(Error::config(format!("axis '{}' is empty", TABLE_COLUMNS[i])));
            }
            if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config(format!(
                    "axis '{}' is not strictly increasing: {axis:?}",
                    TABLE_COLUMNS[i]
                )));
            }
        }
        let n: usize = axes.iter().map(Vec::len).product();
        if values.len() != n {
            return Err(Error::config(format!(
                "grid needs {n} sensitivities, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config("sensitivities must be positive"));
        }
        Ok(Self { axes, values })
    }

    pub fn axes(&self) -> &[Vec<f64>; 4] {
        &self.axes
    }

    fn index(&self, idx: [usize; 4]) -> usize {
        ((idx[0] * self.axes[1].len() + idx[1]) * self.axes[2].len() + idx[2]) * self.axes[3].len()
            + idx[3]
    }

    /// Interpolated sensitivity and whether the query had to be clamped.
    pub fn lookup(&self, q: &CsfQuery) -> Result<(f64, bool)> {
        q.validate()?;
        let mut clamped = false;
        // (lower index, weight of upper neighbour) per axis
        let mut cell = [(0usize, 0.0f64); 4];
        for (d, &v) in q.axes().iter().enumerate() {
            let axis = &self.axes[d];
            let (lo, hi) = (axis[0], axis[axis.len() - 1]);
            let x = if v < lo || v > hi {
                clamped = true;
                v.clamp(lo, hi)
            } else {
                v
            };
            if axis.len() == 1 {
                cell[d] = (0, 0.0);
                continue;
            }
            let i = axis.partition_point(|&a| a <= x).clamp(1, axis.len() - 1) - 1;
            let t = (x - axis[i]) / (axis[i + 1] - axis[i]);
            cell[d] = (i, t);
        }
        let mut s = 0.0;
        for corner in 0..16u32 {
            let mut w = 1.0;
            let mut idx = [0usize; 4];
            for d in 0..4 {
                let upper = corner >> d & 1 == 1;
                let (i, t) = cell[d];
                if upper {
                    if t == 0.0 {
                        w = 0.0;
                        break;
                    }
                    idx[d] = i + 1;
                    w *= t;
                } else {
                    idx[d] = i;
                    w *= 1.0 - t;
                }
            }
            if w != 0.0 {
                s += w * self.values[self.index(idx)];
            }
        }
        Ok((s, clamped))
    }

    /// Parses the CSV table format. Row order is free but every grid node
    /// must appear exactly once.
    pub fn from_csv_reader<R: std::io::Read>(reader: R, path: Option<&Path>) -> Result<Self> {
        let fmt_err = |line: usize, msg: String| Error::format_at(path.map(Path::to_path_buf), line, msg);
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| fmt_err(1, e.to_string()))?
            .clone();
        let mut col = [usize::MAX; 5];
        for (i, name) in TABLE_COLUMNS.iter().enumerate() {
            col[i] = header
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| fmt_err(1, format!("missing column '{name}'")))?;
        }

        let mut rows: Vec<([f64; 4], f64, usize)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                fmt_err(line, e.to_string())
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            if rec.len() != header.len() {
                return Err(fmt_err(line, format!("expected {} fields, got {}", header.len(), rec.len())));
            }
            let mut vals = [0.0f64; 5];
            for (i, &c) in col.iter().enumerate() {
                vals[i] = rec[c]
                    .parse()
                    .map_err(|_| fmt_err(line, format!("'{}' is not a number", &rec[c])))?;
                if !vals[i].is_finite() {
                    return Err(fmt_err(line, "non-finite value".into()));
                }
            }
            if vals[4] <= 0.0 {
                return Err(fmt_err(line, format!("sensitivity must be positive, got {}", vals[4])));
            }
            rows.push(([vals[0], vals[1], vals[2], vals[3]], vals[4], line));
        }
        if rows.is_empty() {
            return Err(fmt_err(1, "table has no rows".into()));
        }

        let mut axes: [Vec<f64>; 4] = Default::default();
        for (d, axis) in axes.iter_mut().enumerate() {
            let mut v: Vec<f64> = rows.iter().map(|r| r.0[d]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            *axis = v;
        }
        let n: usize = axes.iter().map(Vec::len).product();
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        let mut values = vec![0.0; n];
        let locate = |axis: &Vec<f64>, v: f64| axis.binary_search_by(|a| a.total_cmp(&v)).unwrap();
        let shape = [axes[1].len(), axes[2].len(), axes[3].len()];
        for (key, s, line) in &rows {
            let idx = [
                locate(&axes[0], key[0]),
                locate(&axes[1], key[1]),
                locate(&axes[2], key[2]),
                locate(&axes[3], key[3]),
            ];
            let flat = ((idx[0] * shape[0] + idx[1]) * shape[1] + idx[2]) * shape[2] + idx[3];
            if let Some(first) = seen.insert(flat, *line) {
                return Err(fmt_err(*line, format!("grid node {key:?} repeats line {first}")));
            }
            values[flat] = *s;
        }
        if seen.len() != n {
            let last_line = rows.last().map(|r| r.2).unwrap_or(1);
            return Err(fmt_err(
                last_line,
                format!("ragged grid: {} of {n} nodes present", seen.len()),
            ));
        }
        Self::new(axes, values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(f, Some(path))
    }
}

impl ContrastSensitivity for CsfTable {
    fn sensitivity(&self, q: &CsfQuery) -> Result<f64> {
        self.lookup(q).map(|(s, _)| s)
    }
}

/// Selectable CSF implementation.
#[derive(Debug, Clone, PartialEq)]
pub enum CsfModel {
    DefaultAnalytic(AnalyticCsf),
    LookupTable(CsfTable),
}

impl Default for CsfModel {
    fn default() -> Self {
        CsfModel::DefaultAnalytic(AnalyticCsf::default())
    }
}

impl CsfModel {
    pub fn load_table(path: &Path) -> Result<Self> {
        CsfTable::load(path).map(CsfModel::LookupTable)
    }
}

impl ContrastSensitivity for CsfModel {
    fn sensitivity(&self, q: &CsfQuery) -> Result<f64> {
        match self {
            CsfModel::DefaultAnalytic(m) => m.sensitivity(q),
            CsfModel::LookupTable(t) => t.sensitivity(q),
        }
    }
}

/// Free-function form of [`CsfModel::load_table`].
pub fn load_table(path: &Path) -> Result<CsfModel> {
    CsfModel::load_table(path)
}

pub fn sensitivity(model: &CsfModel, q: &CsfQuery) -> Result<f64> {
    model.sensitivity(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn s(f: f64, w: f64, l: f64, e: f64) -> f64 {
        AnalyticCsf::default().sensitivity(&CsfQuery::new(f, w, l, e)).unwrap()
    }

    #[test]
    fn analytic_examples() {
        // L → ∞: luminance factor → 1
        assert_abs_diff_eq!(s(3.0, 0.0, 1e15, 0.0), 200.0, epsilon = 1e-9);
        assert!(s(6.0, 0.0, 100.0, 10.0) < s(6.0, 0.0, 100.0, 0.0));
        assert_abs_diff_eq!(
            s(3.0, 13.0, 100.0, 0.0),
            s(3.0, 0.0, 100.0, 0.0) * (-1.0f64).exp(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(s(3.0, 0.0, 100.0, 0.0), 200.0 * (100.0f64 / 150.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s(0.0, 0.0, 1e15, 0.0), 200.0 * 0.2, epsilon = 1e-9);
    }

    #[test]
    fn rejects_invalid_queries() {
        let m = CsfModel::default();
        assert!(m.sensitivity(&CsfQuery::new(f64::NAN, 0.0, 100.0, 0.0)).is_err());
        assert!(m.sensitivity(&CsfQuery::new(1.0, -1.0, 100.0, 0.0)).is_err());
        assert!(m.sensitivity(&CsfQuery::new(1.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn peak_is_in_photopic_band() {
        let mut best = (0.0, 0.0);
        for i in 1..2000 {
            let f = i as f64 * 0.01;
            let v = s(f, 0.0, 100.0, 0.0);
            if v > best.1 {
                best = (f, v);
            }
        }
        assert!((2.0..=6.0).contains(&best.0), "{best:?}");
    }

    const GRID_CSV: &str = "\
f_spatial_cpd,f_temporal_hz,luminance_nits,eccentricity_deg,sensitivity
1,0,100,0,10
2,0,100,0,30
";

    #[test]
    fn table_is_exact_at_nodes_and_linear_between() {
        let t = CsfTable::from_csv_reader(GRID_CSV.as_bytes(), None).unwrap();
        assert_eq!(t.lookup(&CsfQuery::new(1.0, 0.0, 100.0, 0.0)).unwrap(), (10.0, false));
        assert_eq!(t.lookup(&CsfQuery::new(2.0, 0.0, 100.0, 0.0)).unwrap(), (30.0, false));
        assert_eq!(t.lookup(&CsfQuery::new(1.5, 0.0, 100.0, 0.0)).unwrap(), (20.0, false));
        // out of hull on f: clamped to the edge node
        assert_eq!(t.lookup(&CsfQuery::new(9.0, 0.0, 100.0, 0.0)).unwrap(), (30.0, true));
    }

    #[test]
    fn table_2x2x1x1() {
        let csv = "\
sensitivity,f_spatial_cpd,f_temporal_hz,luminance_nits,eccentricity_deg
4,1,0,10,0
8,1,10,10,0
12,3,0,10,0
16,3,10,10,0
";
        let t = CsfTable::from_csv_reader(csv.as_bytes(), None).unwrap();
        assert_eq!(t.lookup(&CsfQuery::new(3.0, 0.0, 10.0, 0.0)).unwrap().0, 12.0);
        assert_eq!(t.lookup(&CsfQuery::new(1.0, 5.0, 10.0, 0.0)).unwrap().0, 6.0);
        assert_eq!(t.lookup(&CsfQuery::new(2.0, 5.0, 10.0, 0.0)).unwrap().0, 10.0);
    }

    #[test]
    fn table_validation() {
        let axes = [vec![3.0, 1.0, 5.0], vec![0.0], vec![100.0], vec![0.0]];
        assert!(CsfTable::new(axes, vec![1.0; 3]).is_err());

        let ragged = "\
f_spatial_cpd,f_temporal_hz,luminance_nits,eccentricity_deg,sensitivity
1,0,100,0,10
2,0,100,0,30
2,5,100,0,30
";
        let err = CsfTable::from_csv_reader(ragged.as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(_), .. }), "{err}");

        let dup = format!("{GRID_CSV}1,0,100,0,11\n");
        let err = CsfTable::from_csv_reader(dup.as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(4), .. }), "{err}");

        let bad_num = "f_spatial_cpd,f_temporal_hz,luminance_nits,eccentricity_deg,sensitivity\n1,x,100,0,1\n";
        let err = CsfTable::from_csv_reader(bad_num.as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(2), .. }), "{err}");

        let nonpos = "f_spatial_cpd,f_temporal_hz,luminance_nits,eccentricity_deg,sensitivity\n1,0,100,0,0\n";
        assert!(CsfTable::from_csv_reader(nonpos.as_bytes(), None).is_err());

        let missing = "f_spatial_cpd,luminance_nits,eccentricity_deg,sensitivity\n1,100,0,1\n";
        assert!(CsfTable::from_csv_reader(missing.as_bytes(), None).is_err());
    }

    proptest! {
        #[test]
        fn analytic_positive_and_monotone(
            f in 0.0f64..120.0, w in 0.0f64..80.0, l in 0.01f64..1e4, e in 0.0f64..90.0,
            dw in 0.0f64..20.0, dl in 0.0f64..1e3, de in 0.0f64..30.0,
        ) {
            let base = s(f, w, l, e);
            prop_assert!(base > 0.0);
            prop_assert!(s(f, w + dw, l, e) <= base);
            prop_assert!(s(f, w, l + dl, e) >= base);
            if f > 0.0 {
                prop_assert!(s(f, w, l, e + de) <= base * (1.0 + 1e-12) || s(f, w, l, e) < 1e-300);
            }
        }

        #[test]
        fn unimodal_in_spatial_frequency(l in 1.0f64..1e3, a in 0.01f64..60.0, b in 0.01f64..60.0) {
            let m = AnalyticCsf::default();
            let (lo, hi) = (a.min(b), a.max(b));
            let peak = m.f_peak;
            if hi <= peak {
                prop_assert!(s(lo, 0.0, l, 0.0) <= s(hi, 0.0, l, 0.0));
            } else if lo >= peak {
                prop_assert!(s(lo, 0.0, l, 0.0) >= s(hi, 0.0, l, 0.0));
            }
        }

        #[test]
        fn table_bounded_by_neighbours(f in 1.0f64..3.0, w in 0.0f64..10.0) {
            let csv = "\
f_spatial_cpd,f_temporal_hz,luminance_nits,eccentricity_deg,sensitivity
1,0,10,0,4
1,10,10,0,8
3,0,10,0,12
3,10,10,0,16
";
            let t = CsfTable::from_csv_reader(csv.as_bytes(), None).unwrap();
            let (v, clamped) = t.lookup(&CsfQuery::new(f, w, 10.0, 0.0)).unwrap();
            prop_assert!(!clamped);
            prop_assert!((4.0..=16.0).contains(&v));
        }
    }
}
