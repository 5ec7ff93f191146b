use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub lat: f64,
    pub lon: f64,
    /// Seconds from the start of the recording.
    pub t: f64,
}

impl GpsFix {
    pub fn new(lat: f64, lon: f64, t: f64) -> Result<Self> {
        let fix = Self { lat, lon, t };
        fix.validate()?;
        Ok(fix)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::InvalidFix(format!("coordinates ({}, {}) out of range", self.lat, self.lon)));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidFix(format!("timestamp {} must be a nonnegative number", self.t)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WayClass {
    Motorway,
    Primary,
    Secondary,
    Link,
    Other,
    /// No way within the search radius.
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct WayAttributes {
    pub way_class: WayClass,
    pub lanes: Option<u32>,
    pub bridge: bool,
    pub tunnel: bool,
    pub oneway: bool,
    pub toll: bool,
    pub roundabout: bool,
    pub shoulder: bool,
}

impl WayAttributes {
    /// Nothing found near the fix.
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lanes == Some(0) {
            return Err(Error::InvalidAttributes("lanes must be at least 1".into()));
        }
        if self.way_class == WayClass::None && (self.lanes.is_some() || self.any_flag()) {
            return Err(Error::InvalidAttributes("a missing way cannot carry attributes".into()));
        }
        Ok(())
    }

    fn any_flag(&self) -> bool {
        self.bridge || self.tunnel || self.oneway || self.toll || self.roundabout || self.shoulder
    }
}

/// One recording: its id and GPS fixes in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub sample_id: String,
    pub fixes: Vec<GpsFix>,
}

/// Reads newline-delimited `{"sample_id", "fixes": [{"lat","lon","t"}]}`
/// records. Blank lines are skipped; duplicate ids are rejected. Fix-level
/// problems are left for extraction so one bad trace does not sink a file.
pub fn parse_traces_ndjson(text: &str) -> Result<Vec<Trace>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let trace: Trace = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(trace.sample_id.clone()) {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("duplicate sample id {:?}", trace.sample_id),
            });
        }
        out.push(trace);
    }
    Ok(out)
}
