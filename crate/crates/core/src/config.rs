//! Run configuration shared by the scheduling commands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contrast::DEFAULT_LEVELS;
use crate::csf::CsfModel;
use crate::error::{Error, Result};
use crate::scheduler::{default_patch_size, NetworkStyle, ProfileSet, VariantEntry, DEFAULT_BANDS_PX};
use crate::viewing::{ViewingConditions, ViewingConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum CsfConfig {
    #[default]
    Default,
    Table { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VariantsSource {
    Path(PathBuf),
    Inline(Vec<VariantEntry>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatchSizeSpec {
    Px(usize),
    Keyword(String),
}

impl Default for PatchSizeSpec {
    fn default() -> Self {
        PatchSizeSpec::Keyword("auto".into())
    }
}

/// Network conventions for `"patch_size": "auto"`: either
/// `receptive_field` (pre-upsampling networks) or `lowres_patch`, plus the
/// scale factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receptive_field: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lowres_patch: Option<u32>,
    pub scale: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionConfig {
    #[serde(default = "default_block")]
    pub block: usize,
    #[serde(default = "default_radius")]
    pub search_radius: usize,
}

fn default_block() -> usize {
    16
}

fn default_radius() -> usize {
    10
}

fn default_levels() -> usize {
    DEFAULT_LEVELS
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            block: default_block(),
            search_radius: default_radius(),
        }
    }
}

/// Config file as written by users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub viewing: ViewingConfig,
    #[serde(default)]
    pub csf: CsfConfig,
    pub variants: VariantsSource,
    #[serde(default)]
    pub patch_size: PatchSizeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkConfig>,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default)]
    pub motion: MotionConfig,
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub viewing: ViewingConditions,
    pub csf: CsfModel,
    pub profiles: ProfileSet,
    pub patch_size: usize,
    pub levels: usize,
    pub motion: MotionConfig,
}

impl RunConfigFile {
    /// Resolves file references relative to `base`.
    pub fn resolve(&self, base: &Path) -> Result<RunConfig> {
        let viewing = self.viewing.resolve()?;
        let csf = match &self.csf {
            CsfConfig::Default => CsfModel::default(),
            CsfConfig::Table { path } => CsfModel::load_table(&base.join(path))?,
        };
        let profiles = match &self.variants {
            VariantsSource::Path(p) => ProfileSet::load(&base.join(p))?,
            VariantsSource::Inline(entries) => ProfileSet::from_entries(entries.clone(), DEFAULT_BANDS_PX)?,
        };
        if self.levels < 3 {
            return Err(Error::config(format!("levels must be at least 3, got {}", self.levels)));
        }
        let patch_size = match &self.patch_size {
            PatchSizeSpec::Px(p) => *p,
            PatchSizeSpec::Keyword(k) if k == "auto" => {
                let net = self
                    .network
                    .ok_or_else(|| Error::config("\"patch_size\": \"auto\" needs a \"network\" section"))?;
                let style = match (net.receptive_field, net.lowres_patch) {
                    (Some(r), None) => NetworkStyle::PreUpsampled { receptive_field: r },
                    (None, Some(p)) => NetworkStyle::LowRes { patch: p },
                    _ => {
                        return Err(Error::config(
                            "network needs exactly one of receptive_field or lowres_patch",
                        ))
                    }
                };
                let (p, warning) = default_patch_size(style, net.scale)?;
                if let Some(w) = warning {
                    log::warn!("{w}");
                }
                p
            }
            PatchSizeSpec::Keyword(k) => {
                return Err(Error::config(format!("patch_size must be a number or \"auto\", got \"{k}\"")))
            }
        };
        let min = 1usize << self.levels;
        if patch_size < min {
            return Err(Error::config(format!(
                "patch_size {patch_size} is below {min} px needed for {} levels",
                self.levels
            )));
        }
        if self.motion.block < 4 || self.motion.search_radius < 1 {
            return Err(Error::config("motion needs block >= 4 and search_radius >= 1"));
        }
        Ok(RunConfig {
            viewing,
            csf,
            profiles,
            patch_size,
            levels: self.levels,
            motion: self.motion,
        })
    }
}

impl RunConfig {
    pub fn from_json(text: &str, base: &Path, path: Option<&Path>) -> Result<Self> {
        let file: RunConfigFile = serde_json::from_str(text).map_err(|e| Error::Format {
            path: path.map(Path::to_path_buf),
            line: Some(e.line()),
            msg: e.to_string(),
        })?;
        file.resolve(base)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base, Some(path))
    }
}
