//! Run and synthesis configuration files (TOML).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use reclink::blocking::{BlockField, BlockScheme};
use reclink::comparison::FieldSpec;
use reclink::estimator::{LossParams, ESTIMATORS};
use reclink::evaluation::{default_grid, SyntheticConfig};
use reclink::model::{LayoutRules, PriorConfig};
use reclink::sampler::{SamplerConfig, UCorrection};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Column holding record ids; rows are numbered from 1 when absent.
    #[serde(default)]
    pub id_column_a: Option<String>,
    #[serde(default)]
    pub id_column_b: Option<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

/// A comparison field and the input column it is read from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    #[serde(flatten)]
    pub spec: FieldSpec,
    /// Defaults to the field name.
    #[serde(default)]
    pub column: Option<String>,
}

impl FieldConfig {
    pub fn column(&self) -> &str {
        self.column.as_deref().unwrap_or(&self.spec.name)
    }
}

/// Splits a full-name column into first- and last-name fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub first: String,
    pub last: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Fields normalized as names, token by token.
    pub name_fields: Vec<String>,
    /// Both fields read the same full-name column, which is then split.
    pub split: Option<SplitConfig>,
    /// Extra abbreviations on top of the built-in table.
    pub abbreviations: BTreeMap<String, String>,
    /// Fields normalized as place names.
    pub place_fields: Vec<String>,
    /// Extra place spellings on top of the built-in table.
    pub places: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockingConfig {
    /// `none` (one block) or `names` (initial-letter groups).
    pub preset: String,
    pub first: String,
    pub last: String,
    /// Explicit scheme; overrides the preset.
    pub fields: Vec<BlockField>,
}

impl Default for BlockingConfig {
    fn default() -> Self {
        BlockingConfig {
            preset: "none".into(),
            first: "first".into(),
            last: "last".into(),
            fields: Vec::new(),
        }
    }
}

impl BlockingConfig {
    pub fn scheme(&self) -> Result<BlockScheme> {
        if !self.fields.is_empty() {
            return Ok(BlockScheme {
                fields: self.fields.clone(),
            });
        }
        match self.preset.as_str() {
            "none" => Ok(BlockScheme::single_block()),
            "names" => Ok(BlockScheme::default_names(&self.first, &self.last)),
            other => bail!("unknown blocking preset `{other}` (expected `none` or `names`)"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub loss: LossParams,
    /// Registered point estimator: `auto`, `threshold` or `lsap`.
    pub estimator: String,
    /// Loss weights for the frontier table.
    pub grid: Vec<LossParams>,
    /// Use the built-in grid when `grid` is empty.
    pub default_grid: bool,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            loss: LossParams::default(),
            estimator: "auto".into(),
            grid: Vec::new(),
            default_grid: false,
        }
    }
}

impl EstimateConfig {
    pub fn resolved_grid(&self) -> Vec<LossParams> {
        if self.grid.is_empty() && self.default_grid {
            default_grid()
        } else {
            self.grid.clone()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarginsConfig {
    /// Fields subject to u-correction; all fields when empty.
    pub fields: Vec<String>,
    /// Margins file written by `link margins` and read by `link run`.
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    #[serde(default)]
    pub truth: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub input: InputConfig,
    pub fields: Vec<FieldConfig>,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub blocking: BlockingConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub layout: LayoutRules,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub estimate: EstimateConfig,
    #[serde(default)]
    pub margins: MarginsConfig,
}

fn default_workers() -> usize {
    1
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Reads a config file; relative paths are taken from its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.input.a = resolve(base, &cfg.input.a);
        cfg.input.b = resolve(base, &cfg.input.b);
        cfg.output_dir = resolve(base, &cfg.output_dir);
        cfg.truth = cfg.truth.map(|t| resolve(base, &t));
        cfg.margins.file = cfg.margins.file.map(|m| resolve(base, &m));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn specs(&self) -> Vec<FieldSpec> {
        self.fields.iter().map(|f| f.spec.clone()).collect()
    }

    pub fn field_position(&self, name: &str) -> Result<usize> {
        self.fields
            .iter()
            .position(|f| f.spec.name == name)
            .with_context(|| format!("no field named `{name}`"))
    }

    /// Schema positions of the u-corrected fields.
    pub fn margin_fields(&self) -> Result<Vec<usize>> {
        if self.margins.fields.is_empty() {
            Ok((0..self.fields.len()).collect())
        } else {
            self.margins.fields.iter().map(|n| self.field_position(n)).collect()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fields.is_empty() {
            bail!("at least one field is required");
        }
        for (k, f) in self.fields.iter().enumerate() {
            f.spec.validate()?;
            if self.fields[..k].iter().any(|g| g.spec.name == f.spec.name) {
                bail!("field `{}` is defined twice", f.spec.name);
            }
        }
        if self.workers == 0 {
            bail!("workers must be positive");
        }
        let pp = &self.preprocess;
        for name in pp.name_fields.iter().chain(&pp.place_fields) {
            self.field_position(name)?;
        }
        if let Some(split) = &pp.split {
            let (f, l) = (self.field_position(&split.first)?, self.field_position(&split.last)?);
            if f == l || self.fields[f].column() != self.fields[l].column() {
                bail!("split fields must be distinct and read the same column");
            }
        }
        self.blocking.scheme()?.validate(&self.specs())?;
        self.sampler.validate()?;
        self.estimate.loss.validate()?;
        for l in &self.estimate.grid {
            l.validate()?;
        }
        ESTIMATORS.get(&self.estimate.estimator)?;
        if self.sampler.u_correction != UCorrection::Off {
            self.margin_fields()?;
        }
        let levels: Vec<usize> = self.fields.iter().map(|f| f.spec.num_levels()).collect();
        self.prior.validate(&levels)?;
        Ok(())
    }
}

/// Configuration of `link synth`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub output_dir: PathBuf,
    #[serde(default)]
    pub synthetic: SyntheticConfig,
}

impl SynthConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: SynthConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.output_dir = resolve(path.parent().unwrap_or(Path::new(".")), &cfg.output_dir);
        cfg.synthetic.validate()?;
        Ok(cfg)
    }
}
