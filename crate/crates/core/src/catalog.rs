//! The shared content catalog: rooms, walls (imagemaps), targets and clips.
//!
//! Every device of a pair holds an identical catalog; equality is checked
//! through [`Catalog::checksum`], a SHA-256 over the canonical (sorted-key,
//! whitespace-free) JSON rendering of the validated catalog.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{self, Point};
use crate::ids::{ClipId, Millis, RoomId, TargetId, WallId};

/// Default display time for tap tips.
pub const DEFAULT_TAP_TIP_DURATION_MS: u64 = 2000;

const SAMPLE_CATALOG: &str = include_str!("../data/sample_catalog.json");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("malformed catalog document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid catalog at {path}: {reason}")]
    Validation { path: String, reason: String },
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> CatalogError {
    CatalogError::Validation { path: path.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("point ({x}, {y}) is outside the {width}x{height} wall image")]
pub struct OutOfBounds {
    pub x: f64,
    pub y: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub clip_id: ClipId,
    pub duration_ms: u64,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub target_id: TargetId,
    pub clip_id: ClipId,
    pub polygon: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub wall_id: WallId,
    pub room_id: RoomId,
    pub image_ref: String,
    pub width_px: u32,
    pub height_px: u32,
    /// Declaration order is the tie-break for overlapping targets.
    pub targets: Vec<Target>,
}

/// Counts and durations reported by `validate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogSummary {
    pub rooms: usize,
    pub walls: usize,
    pub targets: usize,
    pub clips: usize,
    pub min_duration_ms: u64,
    pub max_duration_ms: u64,
    pub durations_ms: BTreeMap<ClipId, u64>,
    pub checksum: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub room_id: RoomId,
    pub name: String,
    pub walls: Vec<WallId>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TapOutcome {
    Hit { target_id: TargetId, clip_id: ClipId },
    Miss { tip_outlines: Vec<Vec<Point>>, tip_expiry_ms: Millis },
}

impl TapOutcome {
    pub fn is_hit(&self) -> bool {
        matches!(self, TapOutcome::Hit { .. })
    }
}

impl Wall {
    pub fn in_bounds(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= f64::from(self.width_px) && p.y <= f64::from(self.height_px)
    }

    fn check_bounds(&self, p: Point) -> Result<(), OutOfBounds> {
        if self.in_bounds(p) {
            Ok(())
        } else {
            Err(OutOfBounds { x: p.x, y: p.y, width: self.width_px, height: self.height_px })
        }
    }

    /// First target in declared order whose polygon contains `p`.
    pub fn hit_test(&self, p: Point) -> Result<Option<&Target>, OutOfBounds> {
        self.check_bounds(p)?;
        Ok(self.targets.iter().find(|t| geometry::contains(&t.polygon, p)))
    }

    /// Hit, or a miss carrying every target outline on this wall.
    pub fn resolve_tap(&self, p: Point, now_ms: Millis, tip_duration_ms: u64) -> Result<TapOutcome, OutOfBounds> {
        Ok(match self.hit_test(p)? {
            Some(t) => TapOutcome::Hit { target_id: t.target_id.clone(), clip_id: t.clip_id.clone() },
            None => TapOutcome::Miss {
                tip_outlines: self.targets.iter().map(|t| t.polygon.clone()).collect(),
                tip_expiry_ms: now_ms + tip_duration_ms as Millis,
            },
        })
    }
}

// Raw document shapes. Numeric fields are signed so that non-positive
// values surface as validation errors with a path rather than parse errors.
mod doc {
    use serde::Deserialize;

    #[derive(Deserialize)]
    pub struct Catalog {
        pub rooms: Vec<Room>,
        pub walls: Vec<Wall>,
        pub clips: Vec<Clip>,
    }

    #[derive(Deserialize)]
    pub struct Room {
        pub room_id: String,
        pub name: String,
        pub walls: Vec<String>,
    }

    #[derive(Deserialize)]
    pub struct Wall {
        pub wall_id: String,
        pub room_id: String,
        pub image_ref: String,
        pub width_px: i64,
        pub height_px: i64,
        pub targets: Vec<Target>,
    }

    #[derive(Deserialize)]
    pub struct Target {
        pub target_id: String,
        pub clip_id: String,
        pub polygon: Vec<[f64; 2]>,
    }

    #[derive(Deserialize)]
    pub struct Clip {
        pub clip_id: String,
        pub duration_ms: i64,
        pub title: String,
        #[serde(default)]
        pub transcript: Option<String>,
    }
}

#[derive(Serialize)]
struct CatalogOut<'a> {
    rooms: &'a [Room],
    walls: &'a [Wall],
    clips: &'a [Clip],
}

/// Validated, immutable catalog.
#[derive(Clone, Debug)]
pub struct Catalog {
    rooms: Vec<Room>,
    walls: Vec<Wall>,
    clips: Vec<Clip>,
    checksum: String,
    clip_index: HashMap<ClipId, usize>,
    wall_index: HashMap<WallId, usize>,
}

impl PartialEq for Catalog {
    fn eq(&self, other: &Self) -> bool {
        self.rooms == other.rooms && self.walls == other.walls && self.clips == other.clips
    }
}

impl Catalog {
    pub fn from_json(source: &[u8]) -> Result<Self, CatalogError> {
        let raw: doc::Catalog = serde_json::from_slice(source)?;
        Self::validate(raw)
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self, CatalogError> {
        let bytes = std::fs::read(path.as_ref()).map_err(|e| invalid(path.as_ref().display().to_string(), e.to_string()))?;
        Self::from_json(&bytes)
    }

    /// The bundled three-room sample.
    pub fn sample() -> Self {
        Self::from_json(SAMPLE_CATALOG.as_bytes()).expect("bundled sample catalog is valid")
    }

    pub fn sample_json() -> &'static str {
        SAMPLE_CATALOG
    }

    fn validate(raw: doc::Catalog) -> Result<Self, CatalogError> {
        let mut clips = Vec::with_capacity(raw.clips.len());
        let mut clip_index = HashMap::new();
        for (i, c) in raw.clips.into_iter().enumerate() {
            let path = format!("clips[{i}]");
            if c.clip_id.is_empty() {
                return Err(invalid(format!("{path}.clip_id"), "empty id"));
            }
            if c.duration_ms <= 0 {
                return Err(invalid(format!("{path}.duration_ms"), format!("must be positive, got {}", c.duration_ms)));
            }
            let id = ClipId(c.clip_id);
            if clip_index.insert(id.clone(), i).is_some() {
                return Err(invalid(format!("{path}.clip_id"), format!("duplicate clip id {id}")));
            }
            clips.push(Clip { clip_id: id, duration_ms: c.duration_ms as u64, title: c.title, transcript: c.transcript });
        }

        let mut walls = Vec::with_capacity(raw.walls.len());
        let mut wall_index = HashMap::new();
        let mut target_ids = HashSet::new();
        for (i, w) in raw.walls.into_iter().enumerate() {
            let path = format!("walls[{i}]");
            if w.width_px <= 0 || w.height_px <= 0 || w.width_px > i64::from(u32::MAX) || w.height_px > i64::from(u32::MAX) {
                return Err(invalid(path, format!("image size {}x{} must be positive", w.width_px, w.height_px)));
            }
            let wall_id = WallId(w.wall_id);
            if wall_index.insert(wall_id.clone(), i).is_some() {
                return Err(invalid(format!("{path}.wall_id"), format!("duplicate wall id {wall_id}")));
            }
            let mut wall = Wall {
                wall_id,
                room_id: RoomId(w.room_id),
                image_ref: w.image_ref,
                width_px: w.width_px as u32,
                height_px: w.height_px as u32,
                targets: Vec::with_capacity(w.targets.len()),
            };
            for (j, t) in w.targets.into_iter().enumerate() {
                let tpath = format!("{path}.targets[{j}]");
                let clip_id = ClipId(t.clip_id);
                if !clip_index.contains_key(&clip_id) {
                    return Err(invalid(format!("{tpath}.clip_id"), format!("unknown clip {clip_id}")));
                }
                if !target_ids.insert(t.target_id.clone()) {
                    return Err(invalid(format!("{tpath}.target_id"), format!("duplicate target id {}", t.target_id)));
                }
                let polygon: Vec<Point> = t.polygon.into_iter().map(Point::from).collect();
                if polygon.len() < 3 {
                    return Err(invalid(format!("{tpath}.polygon"), "needs at least 3 points"));
                }
                if let Some(k) = polygon.iter().position(|p| !p.x.is_finite() || !p.y.is_finite() || !wall.in_bounds(*p)) {
                    return Err(invalid(format!("{tpath}.polygon[{k}]"), "point outside wall image"));
                }
                if geometry::signed_area(&polygon) == 0.0 {
                    return Err(invalid(format!("{tpath}.polygon"), "zero area"));
                }
                if !geometry::is_simple(&polygon) {
                    return Err(invalid(format!("{tpath}.polygon"), "self-intersecting"));
                }
                wall.targets.push(Target { target_id: TargetId(t.target_id), clip_id, polygon });
            }
            walls.push(wall);
        }

        let mut rooms = Vec::with_capacity(raw.rooms.len());
        let mut referenced = HashSet::new();
        let mut room_ids = HashSet::new();
        for (i, r) in raw.rooms.into_iter().enumerate() {
            let path = format!("rooms[{i}]");
            if !room_ids.insert(r.room_id.clone()) {
                return Err(invalid(format!("{path}.room_id"), format!("duplicate room id {}", r.room_id)));
            }
            for (j, w) in r.walls.iter().enumerate() {
                let wpath = format!("{path}.walls[{j}]");
                let wall_id = WallId(w.clone());
                let Some(&wi) = wall_index.get(&wall_id) else {
                    return Err(invalid(wpath, format!("unknown wall {wall_id}")));
                };
                if walls[wi].room_id.as_str() != r.room_id {
                    return Err(invalid(wpath, format!("wall {wall_id} belongs to room {}", walls[wi].room_id)));
                }
                if !referenced.insert(wall_id.clone()) {
                    return Err(invalid(wpath, format!("wall {wall_id} listed more than once")));
                }
            }
            rooms.push(Room { room_id: RoomId(r.room_id), name: r.name, walls: r.walls.into_iter().map(WallId).collect() });
        }
        if let Some(i) = walls.iter().position(|w| !referenced.contains(&w.wall_id)) {
            return Err(invalid(format!("walls[{i}]"), "wall is not listed by any room"));
        }
        if walls.is_empty() {
            return Err(invalid("walls", "catalog has no walls"));
        }

        let mut catalog = Catalog { rooms, walls, clips, checksum: String::new(), clip_index, wall_index };
        catalog.checksum = hex::encode(Sha256::digest(catalog.canonical_json().as_bytes()));
        Ok(catalog)
    }

    /// Document form of the catalog (the file format).
    pub fn to_value(&self) -> Value {
        serde_json::to_value(CatalogOut { rooms: &self.rooms, walls: &self.walls, clips: &self.clips }).expect("catalog serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("catalog serializes")
    }

    /// Sorted keys, no insignificant whitespace.
    pub fn canonical_json(&self) -> String {
        let mut out = String::new();
        write_canonical(&self.to_value(), &mut out);
        out
    }

    /// Lowercase hex SHA-256 of [`Catalog::canonical_json`].
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    pub fn walls(&self) -> &[Wall] {
        &self.walls
    }

    pub fn clips(&self) -> &[Clip] {
        &self.clips
    }

    pub fn clip(&self, id: &ClipId) -> Option<&Clip> {
        self.clip_index.get(id).map(|&i| &self.clips[i])
    }

    pub fn duration_ms(&self, id: &ClipId) -> Option<u64> {
        self.clip(id).map(|c| c.duration_ms)
    }

    pub fn summary(&self) -> CatalogSummary {
        let durations: BTreeMap<ClipId, u64> = self.clips.iter().map(|c| (c.clip_id.clone(), c.duration_ms)).collect();
        CatalogSummary {
            rooms: self.rooms.len(),
            walls: self.walls.len(),
            targets: self.walls.iter().map(|w| w.targets.len()).sum(),
            clips: self.clips.len(),
            min_duration_ms: durations.values().copied().min().unwrap_or(0),
            max_duration_ms: durations.values().copied().max().unwrap_or(0),
            durations_ms: durations,
            checksum: self.checksum.clone(),
        }
    }

    pub fn wall(&self, id: &WallId) -> Option<&Wall> {
        self.wall_index.get(id).map(|&i| &self.walls[i])
    }

    /// The wall a device shows when a session starts: first wall of the first room.
    pub fn initial_wall(&self) -> &WallId {
        self.rooms.iter().flat_map(|r| r.walls.first()).next().unwrap_or(&self.walls[0].wall_id)
    }
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(duration: i64, target_clip: &str) -> String {
        format!(
            r#"{{"rooms":[{{"room_id":"r","name":"Room","walls":["w"]}}],
                "walls":[{{"wall_id":"w","room_id":"r","image_ref":"w.png","width_px":100,"height_px":100,
                  "targets":[{{"target_id":"t1","clip_id":"{target_clip}","polygon":[[10,10],[40,10],[40,40],[10,40]]}}]}}],
                "clips":[{{"clip_id":"c1","duration_ms":{duration},"title":"One"}}]}}"#
        )
    }

    fn wall_of(json: &str) -> Wall {
        Catalog::from_json(json.as_bytes()).unwrap().walls()[0].clone()
    }

    #[test]
    fn sample_catalog_shape() {
        let cat = Catalog::sample();
        assert_eq!(cat.rooms().len(), 3);
        assert_eq!(cat.clips().len(), 51);
        let long: Vec<_> = cat.clips().iter().filter(|c| c.duration_ms > 27_000).collect();
        assert_eq!(long.len(), 1);
        assert_eq!(long[0].duration_ms, 59_000);
        assert!(cat.clips().iter().all(|c| c.duration_ms == 59_000 || (5_500..=27_000).contains(&c.duration_ms)));
        assert_eq!(cat.checksum().len(), 64);
    }

    #[test]
    fn zero_duration_is_a_validation_error() {
        let err = Catalog::from_json(tiny(0, "c1").as_bytes()).unwrap_err();
        match err {
            CatalogError::Validation { path, .. } => assert_eq!(path, "clips[0].duration_ms"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_clip_reference() {
        let err = Catalog::from_json(tiny(1000, "c999").as_bytes()).unwrap_err();
        assert!(matches!(err, CatalogError::Validation { ref path, .. } if path == "walls[0].targets[0].clip_id"));
    }

    #[test]
    fn malformed_document_is_a_parse_error() {
        assert!(matches!(Catalog::from_json(b"{\"rooms\": [").unwrap_err(), CatalogError::Parse(_)));
        assert!(matches!(Catalog::from_json(b"{\"rooms\": []}").unwrap_err(), CatalogError::Parse(_)));
    }

    #[test]
    fn out_of_bounds_polygon_point() {
        let json = tiny(1000, "c1").replace("[40,40]", "[40,140]");
        let err = Catalog::from_json(json.as_bytes()).unwrap_err();
        assert!(matches!(err, CatalogError::Validation { ref path, .. } if path == "walls[0].targets[0].polygon[2]"));
    }

    #[test]
    fn degenerate_polygon() {
        let json = tiny(1000, "c1").replace("[[10,10],[40,10],[40,40],[10,40]]", "[[10,10],[20,20],[30,30]]");
        assert!(matches!(Catalog::from_json(json.as_bytes()).unwrap_err(), CatalogError::Validation { .. }));
        let bowtie = tiny(1000, "c1").replace("[[10,10],[40,10],[40,40],[10,40]]", "[[10,10],[40,40],[40,10],[10,40]]");
        assert!(matches!(Catalog::from_json(bowtie.as_bytes()).unwrap_err(), CatalogError::Validation { .. }));
    }

    #[test]
    fn unlisted_wall_is_rejected() {
        let json = tiny(1000, "c1").replace(r#""walls":["w"]"#, r#""walls":[]"#);
        assert!(matches!(Catalog::from_json(json.as_bytes()).unwrap_err(), CatalogError::Validation { .. }));
    }

    #[test]
    fn round_trip_and_checksum() {
        let cat = Catalog::sample();
        let again = Catalog::from_json(cat.to_json_pretty().as_bytes()).unwrap();
        assert_eq!(cat, again);
        assert_eq!(cat.checksum(), again.checksum());

        let mut v = cat.to_value();
        v["clips"][0]["title"] = Value::String("Changed".into());
        let mutated = Catalog::from_json(v.to_string().as_bytes()).unwrap();
        assert_ne!(cat.checksum(), mutated.checksum());
    }

    #[test]
    fn canonical_form_sorts_keys() {
        let cat = Catalog::from_json(tiny(1000, "c1").as_bytes()).unwrap();
        let canon = cat.canonical_json();
        assert!(canon.starts_with(r#"{"clips":[{"clip_id":"c1","duration_ms":1000,"title":"One"}],"rooms""#));
        assert!(!canon.contains(' '));
    }

    #[test]
    fn tap_hit_and_miss() {
        let wall = wall_of(&tiny(1000, "c1"));
        assert_eq!(
            wall.resolve_tap(Point::new(20.0, 20.0), 0, 2000).unwrap(),
            TapOutcome::Hit { target_id: "t1".into(), clip_id: "c1".into() }
        );
        match wall.resolve_tap(Point::new(80.0, 80.0), 10_000, 2000).unwrap() {
            TapOutcome::Miss { tip_outlines, tip_expiry_ms } => {
                assert_eq!(tip_expiry_ms, 12_000);
                assert_eq!(tip_outlines, vec![wall.targets[0].polygon.clone()]);
            }
            hit => panic!("expected miss, got {hit:?}"),
        }
        assert!(wall.resolve_tap(Point::new(101.0, 5.0), 0, 2000).is_err());
        assert!(wall.hit_test(Point::new(-1.0, 5.0)).is_err());
    }

    #[test]
    fn overlapping_targets_resolve_in_declared_order() {
        let json = r#"{"rooms":[{"room_id":"r","name":"Room","walls":["w"]}],
            "walls":[{"wall_id":"w","room_id":"r","image_ref":"w.png","width_px":100,"height_px":100,
              "targets":[{"target_id":"back","clip_id":"c1","polygon":[[0,0],[60,0],[60,60],[0,60]]},
                         {"target_id":"front","clip_id":"c2","polygon":[[30,30],[90,30],[90,90],[30,90]]}]}],
            "clips":[{"clip_id":"c1","duration_ms":1000,"title":"One"},{"clip_id":"c2","duration_ms":1000,"title":"Two"}]}"#;
        let wall = wall_of(json);
        assert_eq!(wall.hit_test(Point::new(45.0, 45.0)).unwrap().unwrap().target_id.as_str(), "back");
        assert_eq!(wall.hit_test(Point::new(75.0, 75.0)).unwrap().unwrap().target_id.as_str(), "front");
        assert!(wall.hit_test(Point::new(95.0, 5.0)).unwrap().is_none());
    }
}
