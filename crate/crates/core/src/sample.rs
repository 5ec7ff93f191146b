//! Per-sample metadata (tag durations) and the ratio transform.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::schema::MetadataSchema;

/// Tag durations of one data sample, dense over the schema's cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMetadata {
    sample_id: String,
    total_duration_s: f64,
    tag_durations: Vec<f64>,
}

impl SampleMetadata {
    /// Builds a sample from dense per-cell durations. Durations longer than
    /// the sample itself are rejected, not clamped.
    pub fn new(sample_id: impl Into<String>, total_duration_s: f64, tag_durations: Vec<f64>) -> Result<Self> {
        let sample_id = sample_id.into();
        if !(total_duration_s.is_finite() && total_duration_s > 0.0) {
            return Err(Error::DegenerateSample { sample_id });
        }
        for (j, &t) in tag_durations.iter().enumerate() {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::InvalidSample {
                    sample_id,
                    reason: format!("cell {j} has invalid duration {t}"),
                });
            }
            if t > total_duration_s {
                return Err(Error::InvalidSample {
                    sample_id,
                    reason: format!("cell {j} duration {t} exceeds total {total_duration_s}"),
                });
            }
        }
        Ok(Self {
            sample_id,
            total_duration_s,
            tag_durations,
        })
    }

    /// Builds a sample from sparse `(cell key, seconds)` pairs.
    pub fn from_tags<'a>(
        sample_id: impl Into<String>,
        total_duration_s: f64,
        tags: impl IntoIterator<Item = (&'a str, f64)>,
        schema: &MetadataSchema,
    ) -> Result<Self> {
        let mut dense = vec![0.0; schema.cell_count()];
        for (key, secs) in tags {
            dense[schema.parse_key(key)?] += secs;
        }
        Self::new(sample_id, total_duration_s, dense)
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn total_duration_s(&self) -> f64 {
        self.total_duration_s
    }

    pub fn tag_durations(&self) -> &[f64] {
        &self.tag_durations
    }

    pub fn tag(&self, cell: usize) -> f64 {
        self.tag_durations.get(cell).copied().unwrap_or(0.0)
    }

    pub(crate) fn check_schema(&self, schema: &MetadataSchema) -> Result<()> {
        if self.tag_durations.len() != schema.cell_count() {
            return Err(Error::SchemaMismatch(format!(
                "sample {} has {} cells, schema has {}",
                self.sample_id,
                self.tag_durations.len(),
                schema.cell_count()
            )));
        }
        Ok(())
    }
}

/// Per-cell occupancy ratios of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RatioVector(pub Vec<f64>);

impl RatioVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for RatioVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Tag duration over sample duration, per cell.
pub fn phi_sample(sample: &SampleMetadata, schema: &MetadataSchema) -> Result<RatioVector> {
    sample.check_schema(schema)?;
    let total = sample.total_duration_s;
    if !(total > 0.0) {
        return Err(Error::DegenerateSample {
            sample_id: sample.sample_id.clone(),
        });
    }
    Ok(RatioVector(
        sample
            .tag_durations
            .iter()
            .map(|&t| (t / total).clamp(0.0, 1.0))
            .collect(),
    ))
}

pub fn phi_corpus(corpus: &[SampleMetadata], schema: &MetadataSchema) -> Result<Vec<RatioVector>> {
    corpus.iter().map(|s| phi_sample(s, schema)).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    sample_id: String,
    total_duration_s: f64,
    #[serde(default)]
    tags: Map<String, Value>,
}

/// Parses one metadata record (`{"sample_id", "total_duration_s", "tags"}`).
pub fn parse_sample_record(line: &str, schema: &MetadataSchema) -> Result<SampleMetadata> {
    let rec: SampleRecord = serde_json::from_str(line)?;
    let mut dense = vec![0.0; schema.cell_count()];
    for (key, v) in &rec.tags {
        let secs = v
            .as_f64()
            .ok_or_else(|| Error::InvalidSample {
                sample_id: rec.sample_id.clone(),
                reason: format!("tag {key:?} is not a number"),
            })?;
        let j = schema.parse_key(key)?;
        dense[j] += secs;
    }
    SampleMetadata::new(rec.sample_id, rec.total_duration_s, dense)
}

/// Parses newline-delimited metadata records. Blank lines are skipped;
/// sample ids must be unique.
pub fn parse_metadata_ndjson(text: &str, schema: &MetadataSchema) -> Result<Vec<SampleMetadata>> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let sample = parse_sample_record(line, schema).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if !seen.insert(sample.sample_id.clone()) {
            return Err(Error::parse(i + 1, format!("duplicate sample id {:?}", sample.sample_id)));
        }
        out.push(sample);
    }
    Ok(out)
}

/// One JSON line per sample; zero-duration tags are omitted and the rest
/// are written in schema cell order.
pub fn sample_to_json_line(sample: &SampleMetadata, schema: &MetadataSchema) -> String {
    let mut tags = Map::new();
    for (j, &t) in sample.tag_durations.iter().enumerate() {
        if t > 0.0 {
            tags.insert(schema.cell_key(j), Value::from(t));
        }
    }
    let rec = SampleRecord {
        sample_id: sample.sample_id.clone(),
        total_duration_s: sample.total_duration_s,
        tags,
    };
    serde_json::to_string(&rec).expect("record serializes")
}

pub fn write_metadata_ndjson(corpus: &[SampleMetadata], schema: &MetadataSchema) -> String {
    let mut out = String::new();
    for s in corpus {
        out.push_str(&sample_to_json_line(s, schema));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema() -> MetadataSchema {
        MetadataSchema::driving()
    }

    #[test]
    fn full_occupancy_is_one() {
        let s = schema();
        let m = SampleMetadata::from_tags("a", 41.0, [("Number of lane/1-lane", 41.0)], &s).unwrap();
        let r = phi_sample(&m, &s).unwrap();
        assert_eq!(r.0[s.parse_key("Number of lane/1-lane").unwrap()], 1.0);
    }

    #[test]
    fn no_tags_gives_zero_vector() {
        let s = schema();
        let m = SampleMetadata::from_tags("a", 40.0, [], &s).unwrap();
        assert!(phi_sample(&m, &s).unwrap().0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn partial_bridge_ratio() {
        let s = schema();
        let m = SampleMetadata::from_tags("a", 41.0, [("Bridge/Bridge", 14.0)], &s).unwrap();
        let r = phi_sample(&m, &s).unwrap();
        assert!((r.0[s.parse_key("Bridge/Bridge").unwrap()] - 14.0 / 41.0).abs() < 1e-15);
        assert!((14.0f64 / 41.0 - 0.3415).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_samples() {
        let s = schema();
        assert!(matches!(
            SampleMetadata::from_tags("z", 0.0, [], &s),
            Err(Error::DegenerateSample { .. })
        ));
        assert!(matches!(
            SampleMetadata::from_tags("x", 10.0, [("Bridge/Bridge", 11.0)], &s),
            Err(Error::InvalidSample { .. })
        ));
        assert!(matches!(
            SampleMetadata::from_tags("y", 10.0, [("Weather/Sunny", 1.0)], &s),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn wrong_length_is_schema_mismatch() {
        let m = SampleMetadata::new("a", 1.0, vec![0.0; 3]).unwrap();
        assert!(matches!(phi_sample(&m, &schema()), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn ndjson_round_trip_and_errors() {
        let s = schema();
        let text = r#"{"sample_id":"v1","total_duration_s":41,"tags":{"One way/One way":41,"Way type/Link way":41}}

{"sample_id":"v2","total_duration_s":40}
"#;
        let corpus = parse_metadata_ndjson(text, &s).unwrap();
        assert_eq!(corpus.len(), 2);
        let again = parse_metadata_ndjson(&write_metadata_ndjson(&corpus, &s), &s).unwrap();
        assert_eq!(corpus, again);

        let dup = "{\"sample_id\":\"a\",\"total_duration_s\":1}\n{\"sample_id\":\"a\",\"total_duration_s\":1}";
        assert!(matches!(parse_metadata_ndjson(dup, &s), Err(Error::Parse { line: 2, .. })));
        assert!(parse_metadata_ndjson("{\"sample_id\":\"a\",\"total_duration_s\":1,\"tags\":{\"Bridge/Bridge\":\"x\"}}", &s).is_err());
        assert!(parse_metadata_ndjson("not json", &s).is_err());
    }

    proptest! {
        #[test]
        fn phi_is_scale_invariant(
            total in 1.0f64..1000.0,
            fracs in proptest::collection::vec(0.0f64..=1.0, 16),
            k in 0.01f64..100.0,
        ) {
            let s = schema();
            let tags: Vec<f64> = fracs.iter().map(|f| f * total).collect();
            let a = SampleMetadata::new("a", total, tags.clone()).unwrap();
            let b = SampleMetadata::new("b", total * k, tags.iter().map(|t| t * k).collect()).unwrap();
            let ra = phi_sample(&a, &s).unwrap();
            let rb = phi_sample(&b, &s).unwrap();
            for (x, y) in ra.0.iter().zip(&rb.0) {
                prop_assert!((x - y).abs() <= 1e-12);
                prop_assert!((0.0..=1.0).contains(x));
            }
        }
    }
}
