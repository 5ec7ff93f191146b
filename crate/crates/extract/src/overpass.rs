//! Client for an Overpass-style map query service.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::point_polyline_distance_m;
use crate::provider::AttributeProvider;
use crate::types::{GpsFix, WayAttributes, WayClass};

/// Prefix of the environment variables read by [`OverpassConfig::apply_env`].
pub const ENV_PREFIX: &str = "METASEL_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverpassConfig {
    pub endpoint: String,
    pub requests_per_second: f64,
    pub max_retries: u32,
    /// First retry delay; doubles on each further retry.
    pub backoff_initial_ms: u64,
    pub timeout_ms: u64,
    pub user_agent: String,
}

impl Default for OverpassConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://overpass-api.de/api/interpreter".into(),
            requests_per_second: 1.0,
            max_retries: 4,
            backoff_initial_ms: 500,
            timeout_ms: 30_000,
            user_agent: concat!("metasel/", env!("CARGO_PKG_VERSION")).into(),
        }
    }
}

impl OverpassConfig {
    pub fn validate(&self) -> Result<()> {
        if self.endpoint.is_empty() {
            return Err(Error::Config("empty endpoint".into()));
        }
        if !(self.requests_per_second > 0.0 && self.requests_per_second.is_finite()) {
            return Err(Error::Config(format!("request rate {} must be positive", self.requests_per_second)));
        }
        Ok(())
    }

    /// Overrides fields from `METASEL_OVERPASS_ENDPOINT`,
    /// `METASEL_OVERPASS_RATE` (requests per second) and
    /// `METASEL_OVERPASS_RETRIES`, looked up through `get`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<()> {
        let var = |name: &str| get(&format!("{ENV_PREFIX}{name}"));
        if let Some(v) = var("OVERPASS_ENDPOINT") {
            self.endpoint = v;
        }
        if let Some(v) = var("OVERPASS_RATE") {
            self.requests_per_second = v
                .parse()
                .map_err(|_| Error::Config(format!("{ENV_PREFIX}OVERPASS_RATE={v:?} is not a number")))?;
        }
        if let Some(v) = var("OVERPASS_RETRIES") {
            self.max_retries = v
                .parse()
                .map_err(|_| Error::Config(format!("{ENV_PREFIX}OVERPASS_RETRIES={v:?} is not an integer")))?;
        }
        self.validate()
    }
}

pub struct OverpassProvider {
    config: OverpassConfig,
    client: reqwest::blocking::Client,
    next_slot: Mutex<Instant>,
}

impl OverpassProvider {
    pub fn new(config: OverpassConfig) -> Result<Self> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .user_agent(config.user_agent.clone())
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            config,
            client,
            next_slot: Mutex::new(Instant::now()),
        })
    }

    /// Blocks until this caller's request slot; slots are spaced by the
    /// configured rate across all threads.
    fn wait_turn(&self) {
        let interval = Duration::from_secs_f64(1.0 / self.config.requests_per_second);
        let slot = {
            let mut next = self.next_slot.lock().expect("rate gate");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + interval;
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }

    fn request(&self, query: &str) -> Result<String> {
        let mut delay = Duration::from_millis(self.config.backoff_initial_ms);
        let mut last_error = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                tracing::debug!(attempt, ?delay, "retrying map query: {last_error}");
                std::thread::sleep(delay);
                delay *= 2;
            }
            self.wait_turn();
            let resp = self.client.post(&self.config.endpoint).form(&[("data", query)]).send();
            match resp {
                Ok(r) if r.status().is_success() => {
                    return r.text().map_err(|e| Error::ProviderUnavailable(e.to_string()));
                }
                Ok(r) => {
                    let status = r.status();
                    last_error = format!("HTTP {status}");
                    // only throttling and server errors are worth retrying
                    if !(status.as_u16() == 429 || status.is_server_error()) {
                        break;
                    }
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(Error::ProviderUnavailable(format!("{}: {last_error}", self.config.endpoint)))
    }
}

/// Query for ways carrying a `highway` tag within `radius_m` of the fix,
/// with their tags and geometry.
pub fn build_query(fix: &GpsFix, radius_m: f64) -> String {
    format!(
        "[out:json][timeout:25];way(around:{radius_m},{:.6},{:.6})[highway];out tags geom;",
        fix.lat, fix.lon
    )
}

impl AttributeProvider for OverpassProvider {
    fn lookup(&self, fix: &GpsFix, radius_m: f64) -> Result<WayAttributes> {
        let body = self.request(&build_query(fix, radius_m))?;
        nearest_way_attributes(&body, fix)
    }
}

#[derive(Debug, Deserialize)]
struct Response {
    elements: Vec<Element>,
}

#[derive(Debug, Deserialize)]
struct Element {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    tags: BTreeMap<String, String>,
    #[serde(default)]
    geometry: Vec<LatLon>,
}

#[derive(Debug, Deserialize)]
struct LatLon {
    lat: f64,
    lon: f64,
}

/// Attributes of the way nearest to `fix` in a JSON query response. Ways
/// without geometry are ranked after all ways with geometry; ties keep
/// response order.
pub fn nearest_way_attributes(body: &str, fix: &GpsFix) -> Result<WayAttributes> {
    let resp: Response = serde_json::from_str(body).map_err(|e| Error::Response(e.to_string()))?;
    let mut best: Option<(f64, &Element)> = None;
    for el in resp.elements.iter().filter(|e| e.kind == "way" && e.tags.contains_key("highway")) {
        let line: Vec<[f64; 2]> = el.geometry.iter().map(|p| [p.lat, p.lon]).collect();
        let d = point_polyline_distance_m((fix.lat, fix.lon), &line).unwrap_or(f64::INFINITY);
        if d.is_nan() {
            return Err(Error::Response("non-numeric way geometry".into()));
        }
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, el));
        }
    }
    Ok(best.map_or_else(WayAttributes::none, |(_, el)| attributes_from_tags(&el.tags)))
}

fn truthy(tags: &BTreeMap<String, String>, key: &str) -> bool {
    tags.get(key).is_some_and(|v| !matches!(v.as_str(), "no" | "0" | "false"))
}

/// Maps OSM way tags to [`WayAttributes`].
pub fn attributes_from_tags(tags: &BTreeMap<String, String>) -> WayAttributes {
    let Some(highway) = tags.get("highway") else {
        return WayAttributes::none();
    };
    let way_class = match highway.as_str() {
        "motorway" => WayClass::Motorway,
        "primary" => WayClass::Primary,
        "secondary" => WayClass::Secondary,
        h if h.ends_with("_link") => WayClass::Link,
        _ => WayClass::Other,
    };
    // "2;3" and similar multi-values: keep the leading number
    let lanes = tags.get("lanes").and_then(|v| {
        let digits: String = v.trim().chars().take_while(|c| c.is_ascii_digit()).collect();
        digits.parse::<u32>().ok().filter(|&n| n >= 1)
    });
    let junction = tags.get("junction").map(String::as_str);
    WayAttributes {
        way_class,
        lanes,
        bridge: truthy(tags, "bridge"),
        tunnel: truthy(tags, "tunnel"),
        oneway: matches!(tags.get("oneway").map(String::as_str), Some("yes" | "1" | "true" | "-1")),
        toll: tags.get("toll").is_some_and(|v| v == "yes"),
        roundabout: matches!(junction, Some("roundabout" | "circular")),
        shoulder: truthy(tags, "shoulder"),
    }
}
