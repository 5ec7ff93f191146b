//! Metadata distributions over schema cells: the expected table supplied by
//! a validation engineer and the achieved table of a selected subset.

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::sample::SampleMetadata;
use crate::schema::MetadataSchema;

/// Per-cell ratios plus an inclusion mask. Excluded cells take no part in
/// any metric.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionTable {
    pub values: Vec<f64>,
    pub included: Vec<bool>,
}

impl DistributionTable {
    /// A fully included table.
    pub fn new(values: Vec<f64>) -> Self {
        let included = vec![true; values.len()];
        Self { values, included }
    }

    pub fn with_mask(values: Vec<f64>, included: Vec<bool>) -> Result<Self> {
        if values.len() != included.len() {
            return Err(Error::Shape(format!(
                "{} values but {} mask entries",
                values.len(),
                included.len()
            )));
        }
        Ok(Self { values, included })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn included_count(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    pub fn exclude(&mut self, cell: usize) {
        self.included[cell] = false;
    }

    pub(crate) fn check_schema(&self, schema: &MetadataSchema) -> Result<()> {
        if self.values.len() != schema.cell_count() || self.included.len() != schema.cell_count() {
            return Err(Error::SchemaMismatch(format!(
                "table has {} cells, schema has {}",
                self.values.len(),
                schema.cell_count()
            )));
        }
        Ok(())
    }

    /// Parses `{"cells": {"domain/category": ratio | null}}`. Every schema
    /// cell must be listed; `null` marks an excluded cell.
    pub fn from_json(text: &str, schema: &MetadataSchema) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)?;
        let cells = doc
            .get("cells")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::InvalidDistribution("expected an object with a \"cells\" map".into()))?;
        let m = schema.cell_count();
        let mut values = vec![0.0; m];
        let mut included = vec![false; m];
        let mut seen = vec![false; m];
        for (key, v) in cells {
            let j = schema.parse_key(key)?;
            seen[j] = true;
            match v {
                Value::Null => {}
                other => {
                    values[j] = other
                        .as_f64()
                        .ok_or_else(|| Error::InvalidDistribution(format!("cell {key:?} is not a number")))?;
                    included[j] = true;
                }
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidDistribution(format!(
                "cell {:?} missing (use null to exclude it)",
                schema.cell_key(j)
            )));
        }
        Ok(Self { values, included })
    }

    /// Cell-keyed map in schema order, `null` for excluded cells.
    pub fn to_cell_map(&self, schema: &MetadataSchema) -> Map<String, Value> {
        let mut cells = Map::new();
        for (j, key) in schema.cell_keys().enumerate() {
            let v = if self.included[j] {
                Value::from(self.values[j])
            } else {
                Value::Null
            };
            cells.insert(key, v);
        }
        cells
    }

    pub fn to_json(&self, schema: &MetadataSchema) -> String {
        let mut doc = Map::new();
        doc.insert("cells".into(), Value::Object(self.to_cell_map(schema)));
        serde_json::to_string_pretty(&Value::Object(doc)).expect("table serializes")
    }
}

/// Duration-weighted aggregate: Σ tag duration / Σ sample duration per cell.
pub fn aggregate_distribution(subset: &[SampleMetadata], schema: &MetadataSchema) -> Result<DistributionTable> {
    aggregate_refs(subset.iter(), schema)
}

pub(crate) fn aggregate_refs<'a>(
    subset: impl IntoIterator<Item = &'a SampleMetadata>,
    schema: &MetadataSchema,
) -> Result<DistributionTable> {
    let m = schema.cell_count();
    let mut sums = vec![0.0; m];
    let mut total = 0.0;
    let mut count = 0usize;
    for s in subset {
        s.check_schema(schema)?;
        for (acc, t) in sums.iter_mut().zip(s.tag_durations()) {
            *acc += t;
        }
        total += s.total_duration_s();
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptySubset);
    }
    Ok(DistributionTable::new(
        sums.into_iter().map(|v| (v / total).clamp(0.0, 1.0)).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapWarning {
    pub domain: String,
    pub sum: f64,
}

impl std::fmt::Display for OverlapWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "domain {:?} sums to {:.6} > 1; its categories must overlap in time",
            self.domain, self.sum
        )
    }
}

/// Checks an expected distribution against the schema. Values outside
/// `[0, 1]` are errors; multi-category domains summing past 1 only warn.
pub fn validate_expected(
    e: DistributionTable,
    schema: &MetadataSchema,
) -> Result<(DistributionTable, Vec<OverlapWarning>)> {
    e.check_schema(schema)?;
    for (j, (&v, &inc)) in e.values.iter().zip(&e.included).enumerate() {
        if inc && !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidDistribution(format!(
                "cell {:?} = {v} outside [0, 1]",
                schema.cell_key(j)
            )));
        }
    }
    if e.included_count() == 0 {
        return Err(Error::InvalidDistribution("no included cells".into()));
    }
    let mut warnings = Vec::new();
    for (d, spec) in schema.domains().iter().enumerate() {
        let range = schema.domain_cells(d);
        if range.len() < 2 {
            continue;
        }
        let sum: f64 = range.filter(|&j| e.included[j]).map(|j| e.values[j]).sum();
        if sum > 1.0 + 1e-9 {
            warnings.push(OverlapWarning {
                domain: spec.name.clone(),
                sum,
            });
        }
    }
    Ok((e, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::phi_sample;
    use crate::schema::DomainSpec;

    fn table1_schema() -> MetadataSchema {
        MetadataSchema::new(vec![
            DomainSpec::new("Road type", ["Highway", "Urban", "Rural", "Other"]),
            DomainSpec::new("Weather", ["Sunny", "Rainy", "Foggy", "Snowy"]),
        ])
        .unwrap()
    }

    #[test]
    fn single_sample_aggregate_equals_phi() {
        let s = MetadataSchema::driving();
        let m = SampleMetadata::from_tags("a", 41.0, [("Bridge/Bridge", 14.0), ("One way/One way", 41.0)], &s).unwrap();
        let agg = aggregate_distribution(std::slice::from_ref(&m), &s).unwrap();
        assert_eq!(agg.values, phi_sample(&m, &s).unwrap().0);
    }

    #[test]
    fn aggregate_is_duration_weighted() {
        let s = MetadataSchema::driving();
        let a = SampleMetadata::from_tags("a", 10.0, [("Way type/Highway", 10.0)], &s).unwrap();
        let b = SampleMetadata::from_tags("b", 30.0, [], &s).unwrap();
        let agg = aggregate_distribution(&[a, b], &s).unwrap();
        assert_eq!(agg.values[0], 0.25);
    }

    #[test]
    fn empty_subset_errors() {
        assert!(matches!(
            aggregate_distribution(&[], &MetadataSchema::driving()),
            Err(Error::EmptySubset)
        ));
    }

    #[test]
    fn table1_validates_without_warning() {
        let s = table1_schema();
        let e = DistributionTable::new(vec![0.6, 0.2, 0.1, 0.1, 0.8, 0.17, 0.03, 0.0]);
        let (_, warnings) = validate_expected(e, &s).unwrap();
        assert!(warnings.is_empty());
    }

    #[test]
    fn out_of_range_is_error() {
        let s = table1_schema();
        let e = DistributionTable::new(vec![1.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(validate_expected(e, &s), Err(Error::InvalidDistribution(_))));
        // excluded cells are not range-checked
        let e = DistributionTable::with_mask(
            vec![1.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![false, true, true, true, true, true, true, true],
        )
        .unwrap();
        assert!(validate_expected(e, &s).is_ok());
    }

    #[test]
    fn overlapping_domain_warns() {
        let s = MetadataSchema::new(vec![DomainSpec::new("d", ["x", "y"])]).unwrap();
        let (_, w) = validate_expected(DistributionTable::new(vec![0.8, 0.5]), &s).unwrap();
        assert_eq!(w.len(), 1);
        assert!((w[0].sum - 1.3).abs() < 1e-12);
    }

    #[test]
    fn json_format() {
        let s = table1_schema();
        let text = r#"{"cells":{"Road type/Highway":0.6,"Road type/Urban":0.2,"Road type/Rural":0.1,
            "Road type/Other":0.1,"Weather/Sunny":0.8,"Weather/Rainy":0.17,"Weather/Foggy":0.03,"Weather/Snowy":null}}"#;
        let e = DistributionTable::from_json(text, &s).unwrap();
        assert!(!e.included[7]);
        assert_eq!(e.values[0], 0.6);
        assert_eq!(DistributionTable::from_json(&e.to_json(&s), &s).unwrap(), e);

        let missing = r#"{"cells":{"Road type/Highway":0.6}}"#;
        assert!(matches!(
            DistributionTable::from_json(missing, &s),
            Err(Error::InvalidDistribution(_))
        ));
        assert!(DistributionTable::from_json(r#"{"cells":{"Nope/x":1}}"#, &s).is_err());
        assert!(DistributionTable::from_json("[]", &s).is_err());
    }
}
