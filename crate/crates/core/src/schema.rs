//! Metadata schema: an ordered list of domains, each holding an ordered list
//! of categories. Every (domain, category) pair is a *cell*; cells are
//! flattened into `[0, M)` in declaration order.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Separator between domain and category in cell keys (`"Way type/Highway"`).
pub const CELL_SEPARATOR: char = '/';

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub categories: Vec<String>,
}

impl DomainSpec {
    pub fn new<S: Into<String>>(name: S, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub domain: usize,
    pub category: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SchemaDoc {
    domains: Vec<DomainSpec>,
}

#[derive(Debug, Clone)]
pub struct MetadataSchema {
    domains: Vec<DomainSpec>,
    offsets: Vec<usize>,
    cell_domain: Vec<usize>,
    by_key: HashMap<String, usize>,
}

impl PartialEq for MetadataSchema {
    fn eq(&self, other: &Self) -> bool {
        self.domains == other.domains
    }
}

impl MetadataSchema {
    pub fn new(domains: Vec<DomainSpec>) -> Result<Self> {
        if domains.is_empty() {
            return Err(Error::InvalidSchema("at least one domain is required".into()));
        }
        let mut offsets = Vec::with_capacity(domains.len() + 1);
        let mut cell_domain = Vec::new();
        let mut by_key = HashMap::new();
        let mut seen_domains = std::collections::HashSet::new();
        offsets.push(0);
        for (d, spec) in domains.iter().enumerate() {
            if spec.name.is_empty() || spec.name.contains(CELL_SEPARATOR) {
                return Err(Error::InvalidSchema(format!(
                    "domain name {:?} must be non-empty and must not contain '{CELL_SEPARATOR}'",
                    spec.name
                )));
            }
            if !seen_domains.insert(spec.name.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate domain {:?}", spec.name)));
            }
            if spec.categories.is_empty() {
                return Err(Error::InvalidSchema(format!("domain {:?} has no categories", spec.name)));
            }
            for cat in &spec.categories {
                if cat.is_empty() {
                    return Err(Error::InvalidSchema(format!("empty category name in {:?}", spec.name)));
                }
                let key = format!("{}{CELL_SEPARATOR}{}", spec.name, cat);
                if by_key.insert(key, cell_domain.len()).is_some() {
                    return Err(Error::InvalidSchema(format!(
                        "duplicate category {cat:?} in domain {:?}",
                        spec.name
                    )));
                }
                cell_domain.push(d);
            }
            offsets.push(cell_domain.len());
        }
        Ok(Self {
            domains,
            offsets,
            cell_domain,
            by_key,
        })
    }

    /// The eight road-attribute domains extracted from map data: way type,
    /// lane count (1 to 6) and six single-category flags.
    pub fn driving() -> Self {
        let single = |n: &str| DomainSpec::new(n, [n]);
        Self::new(vec![
            DomainSpec::new("Way type", ["Highway", "Primary way", "Secondary way", "Link way"]),
            DomainSpec::new(
                "Number of lane",
                ["1-lane", "2-lanes", "3-lanes", "4-lanes", "5-lanes", "6-lanes"],
            ),
            single("Bridge"),
            single("One way"),
            single("Toll"),
            single("Tunnel"),
            single("Roundabout"),
            single("Shoulder"),
        ])
        .expect("built-in schema is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SchemaDoc = serde_json::from_str(text)?;
        Self::new(doc.domains)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SchemaDoc {
            domains: self.domains.clone(),
        })
        .expect("schema serializes")
    }

    pub fn domains(&self) -> &[DomainSpec] {
        &self.domains
    }

    /// D: number of domains.
    pub fn domain_count(&self) -> usize {
        self.domains.len()
    }

    /// M: total number of cells.
    pub fn cell_count(&self) -> usize {
        self.cell_domain.len()
    }

    pub fn domain_cells(&self, domain: usize) -> Range<usize> {
        self.offsets[domain]..self.offsets[domain + 1]
    }

    pub fn domain_of(&self, index: usize) -> usize {
        self.cell_domain[index]
    }

    pub fn cell_index(&self, domain: &str, category: &str) -> Option<usize> {
        let d = self.domains.iter().position(|s| s.name == domain)?;
        let c = self.domains[d].categories.iter().position(|s| s == category)?;
        Some(self.offsets[d] + c)
    }

    pub fn index_of(&self, cell: Cell) -> Option<usize> {
        let spec = self.domains.get(cell.domain)?;
        (cell.category < spec.categories.len()).then(|| self.offsets[cell.domain] + cell.category)
    }

    pub fn cell(&self, index: usize) -> Cell {
        let domain = self.cell_domain[index];
        Cell {
            domain,
            category: index - self.offsets[domain],
        }
    }

    /// `"domain/category"` key of a flat cell index.
    pub fn cell_key(&self, index: usize) -> String {
        let Cell { domain, category } = self.cell(index);
        let spec = &self.domains[domain];
        format!("{}{CELL_SEPARATOR}{}", spec.name, spec.categories[category])
    }

    pub fn cell_keys(&self) -> impl Iterator<Item = String> + '_ {
        (0..self.cell_count()).map(|i| self.cell_key(i))
    }

    /// Resolves a `"domain/category"` key.
    pub fn parse_key(&self, key: &str) -> Result<usize> {
        self.by_key
            .get(key)
            .copied()
            .ok_or_else(|| Error::SchemaMismatch(format!("unknown cell {key:?}")))
    }

    /// Stable content hash, used to bind checkpoints and manifests to a schema.
    pub fn fingerprint(&self) -> String {
        crate::hash_hex(self.to_json().as_bytes())
    }
}
