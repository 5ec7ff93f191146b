//! Run configuration: one JSON file whose relative paths are resolved
//! against the file's own directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use metasel::net::Activation;
use metasel::{
    hash_hex, parse_metadata_ndjson, validate_expected, DistributionTable, MetadataSchema, NetConfig,
    SampleMetadata, SelectorConfig, TrainConfig,
};
use metasel_extract::{ExtractOptions, OverpassConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Required, either here or via `--seed`.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Defaults to the built-in driving schema.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default)]
    pub metadata: Option<PathBuf>,
    #[serde(default)]
    pub expected: Option<PathBuf>,
    /// Applied to both training and selection; the `keep_ratio` fields of
    /// the `train` and `selector` sections are overwritten.
    #[serde(default = "default_keep_ratio")]
    pub keep_ratio: f64,
    /// Where `train` writes and `select --reuse-checkpoint` reads.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub net: NetSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub selector: SelectorConfig,
    #[serde(default)]
    pub extract: Option<ExtractSection>,
    #[serde(default)]
    pub synth: Option<SynthSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub evaluate: Option<EvaluateSection>,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn default_keep_ratio() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
}

impl Default for NetSection {
    fn default() -> Self {
        Self {
            hidden_layers: vec![128, 128],
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractSection {
    pub traces: PathBuf,
    /// Offline way fixture; when absent the Overpass provider is used.
    #[serde(default)]
    pub fixture: Option<PathBuf>,
    /// Lookup cache for the online provider, created if missing.
    #[serde(default)]
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub overpass: OverpassConfig,
    #[serde(default)]
    pub options: ExtractOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n: usize,
    /// Profile file; otherwise a random mixture is drawn from the run seed.
    #[serde(default)]
    pub profile: Option<PathBuf>,
    #[serde(default = "default_components")]
    pub components: usize,
    #[serde(default = "default_concentration")]
    pub concentration: f64,
}

fn default_components() -> usize {
    4
}

fn default_concentration() -> f64 {
    1.0
}

/// How each sweep cell's target is derived from a listed target table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// The same table at every ρ.
    #[default]
    Fixed,
    /// `(1 − ρ)·E + ρ·Original`.
    TowardOriginal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub rho_list: Vec<f64>,
    #[serde(default)]
    pub expected_list: Vec<PathBuf>,
    /// Extra seeded random targets, drawn from `seed`, `seed + 1`, ...
    #[serde(default)]
    pub random_targets: usize,
    #[serde(default)]
    pub target_mode: TargetMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub manifests: Vec<PathBuf>,
    #[serde(default = "default_pair_cap")]
    pub pair_cap: usize,
}

fn default_pair_cap() -> usize {
    50_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Rows of each similarity matrix.
    pub similarity_cap: usize,
    pub pair_cap: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            similarity_cap: 50,
            pair_cap: default_pair_cap(),
        }
    }
}

/// Schema, corpus and target loaded from a config.
pub struct Inputs {
    pub schema: MetadataSchema,
    pub corpus: Vec<SampleMetadata>,
    pub expected: DistributionTable,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text)?;
        cfg.base_dir = base_dir.to_path_buf();
        if !(cfg.keep_ratio > 0.0 && cfg.keep_ratio <= 1.0) {
            bail!("keep_ratio {} outside (0, 1]", cfg.keep_ratio);
        }
        Ok(cfg)
    }

    /// Resolves a config-relative path.
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Resolves a path that must already exist.
    pub fn existing(&self, p: &Path, what: &str) -> Result<PathBuf> {
        let full = self.path(p);
        if !full.exists() {
            bail!("{what} {} does not exist", full.display());
        }
        Ok(full)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.context("no seed: set \"seed\" in the config or pass --seed")
    }

    pub fn out_dir(&self) -> PathBuf {
        match &self.out_dir {
            Some(p) => self.path(p),
            None => self.base_dir.join("out"),
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        match &self.checkpoint {
            Some(p) => self.path(p),
            None => self.out_dir().join("checkpoint.json"),
        }
    }

    pub fn load_schema(&self) -> Result<MetadataSchema> {
        match &self.schema {
            None => Ok(MetadataSchema::driving()),
            Some(p) => {
                let full = self.existing(p, "schema")?;
                Ok(MetadataSchema::from_json(&read(&full)?).with_context(|| format!("schema {}", full.display()))?)
            }
        }
    }

    pub fn load_corpus(&self, schema: &MetadataSchema) -> Result<Vec<SampleMetadata>> {
        let p = self.metadata.as_ref().context("config has no \"metadata\" path")?;
        let full = self.existing(p, "metadata file")?;
        parse_metadata_ndjson(&read(&full)?, schema).with_context(|| format!("metadata {}", full.display()))
    }

    pub fn load_expected_file(&self, p: &Path, schema: &MetadataSchema) -> Result<DistributionTable> {
        let full = self.existing(p, "expected distribution")?;
        let table = DistributionTable::from_json(&read(&full)?, schema)
            .with_context(|| format!("expected distribution {}", full.display()))?;
        let (table, warnings) = validate_expected(table, schema)?;
        for w in warnings {
            tracing::warn!("{}: {w}", full.display());
        }
        Ok(table)
    }

    pub fn load_inputs(&self) -> Result<Inputs> {
        let schema = self.load_schema()?;
        let corpus = self.load_corpus(&schema)?;
        let p = self.expected.as_ref().context("config has no \"expected\" path")?;
        let expected = self.load_expected_file(p, &schema)?;
        Ok(Inputs {
            schema,
            corpus,
            expected,
        })
    }

    pub fn net_config(&self, inputs: usize) -> Result<NetConfig> {
        let mut layer_sizes = vec![inputs];
        layer_sizes.extend(&self.net.hidden_layers);
        layer_sizes.push(1);
        let cfg = NetConfig {
            layer_sizes,
            hidden_activation: self.net.activation,
            init_seed: self.seed()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_config(&self, keep_ratio: f64) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            keep_ratio,
            shuffle_seed: self.seed()?,
            ..self.train.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn selector_config(&self, keep_ratio: f64) -> Result<SelectorConfig> {
        let cfg = SelectorConfig {
            keep_ratio,
            ..self.selector.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Hash of everything that determines a trained network apart from the data.
pub fn config_hash(net: &NetConfig, train: &TrainConfig) -> String {
    hash_hex(json!({ "net": net, "train": train }).to_string().as_bytes())
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
