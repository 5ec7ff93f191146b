use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::point_polyline_distance_m;
use crate::types::{GpsFix, WayAttributes};

/// Default search radius for nearest-way matching.
pub const DEFAULT_RADIUS_M: f64 = 15.0;

/// Source of road attributes for a GPS position.
pub trait AttributeProvider: Send + Sync {
    /// Attributes of the nearest way within `radius_m`, or
    /// [`WayAttributes::none`] when there is none.
    fn lookup(&self, fix: &GpsFix, radius_m: f64) -> Result<WayAttributes>;
}

impl<P: AttributeProvider + ?Sized> AttributeProvider for &P {
    fn lookup(&self, fix: &GpsFix, radius_m: f64) -> Result<WayAttributes> {
        (**self).lookup(fix, radius_m)
    }
}

impl<P: AttributeProvider + ?Sized> AttributeProvider for Box<P> {
    fn lookup(&self, fix: &GpsFix, radius_m: f64) -> Result<WayAttributes> {
        (**self).lookup(fix, radius_m)
    }
}

pub fn fetch_way_attributes(fix: &GpsFix, radius_m: f64, provider: &dyn AttributeProvider) -> Result<WayAttributes> {
    fix.validate()?;
    if !(radius_m > 0.0 && radius_m.is_finite()) {
        return Err(Error::Config(format!("radius {radius_m} m must be positive")));
    }
    let attrs = provider.lookup(fix, radius_m)?;
    attrs.validate()?;
    Ok(attrs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureWay {
    /// `[lat, lon]` vertices.
    pub polyline: Vec<[f64; 2]>,
    pub attributes: WayAttributes,
}

/// Offline provider over a hand-authored list of ways.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixtureProvider {
    ways: Vec<FixtureWay>,
}

impl FixtureProvider {
    pub fn new(ways: Vec<FixtureWay>) -> Result<Self> {
        for (i, w) in ways.iter().enumerate() {
            if w.polyline.is_empty() {
                return Err(Error::InvalidAttributes(format!("fixture way {i} has no vertices")));
            }
            for &[lat, lon] in &w.polyline {
                GpsFix::new(lat, lon, 0.0).map_err(|e| Error::InvalidAttributes(format!("fixture way {i}: {e}")))?;
            }
            w.attributes
                .validate()
                .map_err(|e| Error::InvalidAttributes(format!("fixture way {i}: {e}")))?;
        }
        Ok(Self { ways })
    }

    /// Parses a JSON list of `{ "polyline": [[lat, lon], ...], "attributes": {...} }`.
    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn ways(&self) -> &[FixtureWay] {
        &self.ways
    }
}

impl AttributeProvider for FixtureProvider {
    /// Nearest way by point-to-polyline distance; the earlier way wins ties.
    fn lookup(&self, fix: &GpsFix, radius_m: f64) -> Result<WayAttributes> {
        let mut best: Option<(f64, &FixtureWay)> = None;
        for way in &self.ways {
            let Some(d) = point_polyline_distance_m((fix.lat, fix.lon), &way.polyline) else {
                continue;
            };
            if d <= radius_m && best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, way));
            }
        }
        Ok(best.map_or_else(WayAttributes::none, |(_, w)| w.attributes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
struct CacheKey {
    lat_e5: i64,
    lon_e5: i64,
    radius_mm: u64,
}

impl CacheKey {
    fn new(fix: &GpsFix, radius_m: f64) -> Self {
        Self {
            lat_e5: (fix.lat * 1e5).round() as i64,
            lon_e5: (fix.lon * 1e5).round() as i64,
            radius_mm: (radius_m * 1e3).round() as u64,
        }
    }

    fn fix(&self) -> GpsFix {
        GpsFix {
            lat: self.lat_e5 as f64 / 1e5,
            lon: self.lon_e5 as f64 / 1e5,
            t: 0.0,
        }
    }

    fn radius(&self) -> f64 {
        self.radius_mm as f64 / 1e3
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: CacheKey,
    attributes: WayAttributes,
}

/// Memoises another provider on coordinates rounded to 5 decimals (about
/// a metre). Lookups always go to the inner provider with the rounded
/// position, so a cache hit returns exactly what a recomputation would.
/// Failed lookups are not cached.
pub struct CachedProvider<P> {
    inner: P,
    entries: RwLock<HashMap<CacheKey, WayAttributes>>,
    inner_calls: AtomicUsize,
}

impl<P: AttributeProvider> CachedProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            entries: RwLock::new(HashMap::new()),
            inner_calls: AtomicUsize::new(0),
        }
    }

    /// Number of lookups forwarded to the inner provider.
    pub fn inner_calls(&self) -> usize {
        self.inner_calls.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adds the entries of a file written by [`save`](Self::save); a missing
    /// file is an empty cache.
    pub fn load(&self, path: &Path) -> Result<()> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
            Err(e) => return Err(e.into()),
        };
        let entries: Vec<CacheEntry> = serde_json::from_str(&text)?;
        let mut map = self.entries.write().expect("cache lock");
        for e in entries {
            e.attributes.validate()?;
            map.insert(e.key, e.attributes);
        }
        Ok(())
    }

    /// Writes all entries sorted by key, so equal caches give equal files.
    pub fn save(&self, path: &Path) -> Result<()> {
        let map = self.entries.read().expect("cache lock");
        let mut entries: Vec<CacheEntry> = map
            .iter()
            .map(|(&key, &attributes)| CacheEntry { key, attributes })
            .collect();
        entries.sort_by_key(|e| e.key);
        std::fs::write(path, serde_json::to_string(&entries)?)?;
        Ok(())
    }
}

impl<P: AttributeProvider> AttributeProvider for CachedProvider<P> {
    fn lookup(&self, fix: &GpsFix, radius_m: f64) -> Result<WayAttributes> {
        let key = CacheKey::new(fix, radius_m);
        if let Some(hit) = self.entries.read().expect("cache lock").get(&key) {
            return Ok(*hit);
        }
        self.inner_calls.fetch_add(1, Ordering::Relaxed);
        let attrs = self.inner.lookup(&key.fix(), key.radius())?;
        self.entries.write().expect("cache lock").insert(key, attrs);
        Ok(attrs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::WayClass;

    fn motorway() -> FixtureWay {
        FixtureWay {
            polyline: vec![[48.0, 11.0], [48.0, 11.01]],
            attributes: WayAttributes {
                way_class: WayClass::Motorway,
                lanes: Some(4),
                ..Default::default()
            },
        }
    }

    #[test]
    fn fixture_inside_buffer() {
        let p = FixtureProvider::new(vec![motorway()]).unwrap();
        // ~5.5 m north of the centre line
        let a = fetch_way_attributes(&GpsFix::new(48.00005, 11.005, 0.0).unwrap(), 15.0, &p).unwrap();
        assert_eq!(a.way_class, WayClass::Motorway);
        assert_eq!(a.lanes, Some(4));
        assert!(!a.bridge);
        // ~22 m away: outside the 15 m radius
        let b = p.lookup(&GpsFix::new(48.0002, 11.005, 0.0).unwrap(), 15.0).unwrap();
        assert_eq!(b, WayAttributes::none());
    }

    #[test]
    fn open_water_has_no_way() {
        let p = FixtureProvider::new(vec![motorway()]).unwrap();
        let a = p.lookup(&GpsFix::new(0.0, -30.0, 0.0).unwrap(), 15.0).unwrap();
        assert_eq!(a.way_class, WayClass::None);
        let empty = FixtureProvider::default();
        assert_eq!(empty.lookup(&GpsFix::new(48.0, 11.0, 0.0).unwrap(), 15.0).unwrap(), WayAttributes::none());
    }

    #[test]
    fn nearest_way_wins() {
        let mut near = motorway();
        near.polyline = vec![[48.00003, 11.0], [48.00003, 11.01]];
        near.attributes.way_class = WayClass::Link;
        near.attributes.lanes = Some(1);
        let p = FixtureProvider::new(vec![motorway(), near]).unwrap();
        let a = p.lookup(&GpsFix::new(48.00004, 11.005, 0.0).unwrap(), 15.0).unwrap();
        assert_eq!(a.way_class, WayClass::Link);
    }

    #[test]
    fn fixture_validation() {
        let mut bad = motorway();
        bad.polyline.clear();
        assert!(FixtureProvider::new(vec![bad]).is_err());
        let mut bad = motorway();
        bad.polyline.push([95.0, 0.0]);
        assert!(FixtureProvider::new(vec![bad]).is_err());
        assert!(FixtureProvider::from_json("[{\"polyline\":[[1,2]],\"attributes\":{\"lanes\":0,\"way_class\":\"other\"}}]").is_err());
    }

    #[test]
    fn radius_must_be_positive() {
        let p = FixtureProvider::default();
        assert!(fetch_way_attributes(&GpsFix::new(0.0, 0.0, 0.0).unwrap(), 0.0, &p).is_err());
    }

    #[test]
    fn cache_serves_repeats() {
        let c = CachedProvider::new(FixtureProvider::new(vec![motorway()]).unwrap());
        let fix = GpsFix::new(48.00001, 11.002, 0.0).unwrap();
        let a = c.lookup(&fix, 15.0).unwrap();
        let b = c.lookup(&GpsFix { t: 9.0, ..fix }, 15.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(c.inner_calls(), 1);
        // a different radius is a different key
        c.lookup(&fix, 30.0).unwrap();
        assert_eq!(c.inner_calls(), 2);
    }

    #[test]
    fn cache_persists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        let c = CachedProvider::new(FixtureProvider::new(vec![motorway()]).unwrap());
        c.lookup(&GpsFix::new(48.0, 11.001, 0.0).unwrap(), 15.0).unwrap();
        c.lookup(&GpsFix::new(10.0, 10.0, 0.0).unwrap(), 15.0).unwrap();
        c.save(&path).unwrap();
        let d = CachedProvider::new(FixtureProvider::default());
        d.load(&path).unwrap();
        assert_eq!(d.len(), 2);
        let hit = d.lookup(&GpsFix::new(48.0, 11.001, 3.0).unwrap(), 15.0).unwrap();
        assert_eq!(hit.way_class, WayClass::Motorway);
        assert_eq!(d.inner_calls(), 0);
        d.load(&dir.path().join("absent.json")).unwrap();
    }
}
