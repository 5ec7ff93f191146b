//! Synthetic corpora drawn from mixture profiles.
//!
//! Each sample picks a mixture component, then draws an occupancy fraction
//! for every cell from `Beta(mean·κ, (1 − mean)·κ)` and a duration uniformly
//! from the profile's range. The expected occupancy of a cell under a
//! component is therefore exactly its `mean`.

use indexmap::IndexMap;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Beta;
use serde::{Deserialize, Serialize};

use crate::distribution::DistributionTable;
use crate::error::{Error, Result};
use crate::sample::SampleMetadata;
use crate::schema::MetadataSchema;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellOccupancy {
    pub mean: f64,
    /// Beta concentration κ; larger means tighter around `mean`.
    #[serde(default = "default_concentration")]
    pub concentration: f64,
}

fn default_concentration() -> f64 {
    8.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    /// Keyed by `"domain/category"`; unlisted cells never occur.
    pub cells: IndexMap<String, CellOccupancy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub name: String,
    pub components: Vec<MixtureComponent>,
    pub duration_range_s: [f64; 2],
    pub seed: u64,
}

enum CellDraw {
    Zero,
    Constant(f64),
    Beta(Beta<f64>),
}

struct CompiledComponent {
    cells: Vec<CellDraw>,
}

impl SynthProfile {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: SynthProfile = serde_json::from_str(text)?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn validate(&self, schema: &MetadataSchema) -> Result<()> {
        self.compile(schema).map(|_| ())
    }

    fn compile(&self, schema: &MetadataSchema) -> Result<Vec<CompiledComponent>> {
        let [lo, hi] = self.duration_range_s;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidProfile(format!("duration range [{lo}, {hi}] must be positive")));
        }
        if self.components.is_empty() {
            return Err(Error::InvalidProfile("no mixture components".into()));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if self.components.iter().any(|c| !(c.weight >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProfile(format!("mixture weights sum to {total}, expected 1")));
        }
        self.components
            .iter()
            .map(|comp| {
                let mut cells: Vec<CellDraw> = (0..schema.cell_count()).map(|_| CellDraw::Zero).collect();
                for (key, occ) in &comp.cells {
                    let j = schema.parse_key(key).map_err(|e| Error::InvalidProfile(e.to_string()))?;
                    if !(0.0..=1.0).contains(&occ.mean) {
                        return Err(Error::InvalidProfile(format!("cell {key:?} mean {} outside [0, 1]", occ.mean)));
                    }
                    if !(occ.concentration > 0.0 && occ.concentration.is_finite()) {
                        return Err(Error::InvalidProfile(format!("cell {key:?} concentration must be positive")));
                    }
                    cells[j] = if occ.mean == 0.0 || occ.mean == 1.0 {
                        CellDraw::Constant(occ.mean)
                    } else {
                        let beta = Beta::new(occ.mean * occ.concentration, (1.0 - occ.mean) * occ.concentration)
                            .map_err(|e| Error::InvalidProfile(format!("cell {key:?}: {e}")))?;
                        CellDraw::Beta(beta)
                    };
                }
                Ok(CompiledComponent { cells })
            })
            .collect()
    }

    /// Analytic expectation of the corpus aggregate.
    pub fn expected_aggregate(&self, schema: &MetadataSchema) -> Result<Vec<f64>> {
        self.compile(schema)?;
        let mut out = vec![0.0; schema.cell_count()];
        for comp in &self.components {
            for (key, occ) in &comp.cells {
                out[schema.parse_key(key)?] += comp.weight * occ.mean;
            }
        }
        Ok(out)
    }

    /// `k` components with random per-cell means. Multi-category domains get
    /// a random split of at most 1 across their categories, mimicking
    /// mutually exclusive road classes; single-category domains get a
    /// skewed occupancy so rare flags stay rare.
    pub fn random(schema: &MetadataSchema, components: usize, concentration: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_5eed);
        let comps = (0..components)
            .map(|_| {
                let mut cells = IndexMap::new();
                for d in 0..schema.domain_count() {
                    let range = schema.domain_cells(d);
                    if range.len() == 1 {
                        let u: f64 = rng.gen();
                        let mean = (u * u * 0.9).clamp(0.0, 1.0);
                        cells.insert(schema.cell_key(range.start), CellOccupancy { mean, concentration });
                        continue;
                    }
                    let coverage: f64 = rng.gen_range(0.5..1.0);
                    let raw: Vec<f64> = range.clone().map(|_| rng.gen::<f64>().powi(3)).collect();
                    let sum: f64 = raw.iter().sum::<f64>().max(1e-12);
                    for (j, r) in range.zip(raw) {
                        let mean = (coverage * r / sum).clamp(0.0, 1.0);
                        cells.insert(schema.cell_key(j), CellOccupancy { mean, concentration });
                    }
                }
                MixtureComponent { weight: 1.0 / components as f64, cells }
            })
            .collect();
        Self {
            name: format!("random-{components}"),
            components: comps,
            duration_range_s: [20.0, 60.0],
            seed,
        }
    }
}

/// Draws `n` samples with ids `syn-000000`, `syn-000001`, ...
pub fn generate_synthetic(n: usize, schema: &MetadataSchema, profile: &SynthProfile) -> Result<Vec<SampleMetadata>> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let compiled = profile.compile(schema)?;
    let picker = WeightedIndex::new(profile.components.iter().map(|c| c.weight))
        .map_err(|e| Error::InvalidProfile(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let [lo, hi] = profile.duration_range_s;
    (0..n)
        .map(|i| {
            let comp = &compiled[picker.sample(&mut rng)];
            let duration = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            let tags = comp
                .cells
                .iter()
                .map(|draw| {
                    let frac = match draw {
                        CellDraw::Zero => 0.0,
                        CellDraw::Constant(c) => *c,
                        CellDraw::Beta(b) => b.sample(&mut rng),
                    };
                    (frac.clamp(0.0, 1.0) * duration).min(duration)
                })
                .collect();
            SampleMetadata::new(format!("syn-{i:06}"), duration, tags)
        })
        .collect()
}

/// A random target table: independent uniform ratios per cell, with
/// multi-category domains rescaled to sum to at most 1.
pub fn random_expected(schema: &MetadataSchema, seed: u64) -> DistributionTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe_7ab1e);
    let mut values = vec![0.0; schema.cell_count()];
    for d in 0..schema.domain_count() {
        let range = schema.domain_cells(d);
        if range.len() == 1 {
            values[range.start] = rng.gen::<f64>() * 0.6;
            continue;
        }
        let raw: Vec<f64> = range.clone().map(|_| rng.gen::<f64>()).collect();
        let sum: f64 = raw.iter().sum();
        let coverage: f64 = rng.gen_range(0.6..1.0);
        for (j, r) in range.zip(raw) {
            values[j] = coverage * r / sum;
        }
    }
    DistributionTable::new(values)
}

/// Target for keep ratio ρ that moves from `target` towards the corpus
/// aggregate as ρ grows: `(1 − ρ)·target + ρ·original`. At ρ = 1 only the
/// whole corpus can be selected, so the target becomes what it achieves.
/// Cells excluded from `target` stay excluded.
pub fn blend_toward_original(target: &DistributionTable, original: &DistributionTable, keep_ratio: f64) -> Result<DistributionTable> {
    if target.len() != original.len() {
        return Err(Error::Shape(format!("{} target cells vs {} corpus cells", target.len(), original.len())));
    }
    let values = target
        .values
        .iter()
        .zip(&original.values)
        .map(|(t, o)| (1.0 - keep_ratio) * t + keep_ratio * o)
        .collect();
    DistributionTable::with_mask(values, target.included.clone())
}
