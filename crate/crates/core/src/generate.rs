//! Random inputs for property tests, fuzzing and benchmarks.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::audio::EavesdropLevel;
use crate::catalog::{Target, Wall};
use crate::geometry::{self, Point};
use crate::harness::scenario::{Action, Mode, Scenario, ScenarioEvent, DEVICE_A, DEVICE_B};
use crate::ids::{ClipId, Millis, RoomId, TargetId, WallId};
use crate::protocol::ProtocolConfig;
use crate::simnet::NetworkConfig;
use crate::Catalog;

/// A star-shaped polygon around `center`: vertices at increasing angles with
/// random radii. Always simple.
pub fn star_polygon(rng: &mut impl Rng, center: Point, max_radius: f64, vertices: usize) -> Vec<Point> {
    let mut angles: Vec<f64> = (0..vertices).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    angles
        .into_iter()
        .map(|a| {
            let r = rng.random_range(0.2 * max_radius..=max_radius);
            Point::new(center.x + r * a.cos(), center.y + r * a.sin())
        })
        .collect()
}

/// A wall with 1..=8 possibly overlapping targets (star-shaped, rectangles
/// and triangles), some with integer vertices so boundary taps are possible.
pub fn random_wall(rng: &mut impl Rng) -> Wall {
    let width = rng.random_range(100..=1200u32);
    let height = rng.random_range(100..=900u32);
    let (w, h) = (f64::from(width), f64::from(height));
    let n = rng.random_range(1..=8);
    let mut targets = Vec::with_capacity(n);
    while targets.len() < n {
        let polygon = match rng.random_range(0..3) {
            0 => {
                let c = Point::new(rng.random_range(0.0..w), rng.random_range(0.0..h));
                let r = rng.random_range(5.0..(w.min(h) / 2.0));
                let verts = rng.random_range(3..=12);
                star_polygon(rng, c, r, verts).into_iter().map(|p| Point::new(p.x.clamp(0.0, w), p.y.clamp(0.0, h))).collect()
            }
            1 => {
                let x0 = rng.random_range(0..width - 1);
                let y0 = rng.random_range(0..height - 1);
                let x1 = rng.random_range(x0 + 1..=width);
                let y1 = rng.random_range(y0 + 1..=height);
                let (x0, y0, x1, y1) = (f64::from(x0), f64::from(y0), f64::from(x1), f64::from(y1));
                vec![Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)]
            }
            _ => (0..3).map(|_| Point::new(f64::from(rng.random_range(0..=width)), f64::from(rng.random_range(0..=height)))).collect(),
        };
        // clamping or coincident vertices can degenerate the polygon; redraw
        if polygon.len() < 3 || geometry::signed_area(&polygon) == 0.0 || !geometry::is_simple(&polygon) {
            continue;
        }
        let k = targets.len();
        targets.push(Target { target_id: TargetId(format!("t{k}")), clip_id: ClipId(format!("c{k}")), polygon });
    }
    Wall {
        wall_id: WallId::new("generated"),
        room_id: RoomId::new("room"),
        image_ref: "generated.png".into(),
        width_px: width,
        height_px: height,
        targets,
    }
}

/// Uniform point on the wall image; one in five lands on a target vertex.
pub fn random_point(rng: &mut impl Rng, wall: &Wall) -> Point {
    if rng.random_bool(0.2) {
        if let Some(t) = wall.targets.choose(rng) {
            return *t.polygon.choose(rng).expect("polygons have vertices");
        }
    }
    Point::new(rng.random_range(0.0..=f64::from(wall.width_px)), rng.random_range(0.0..=f64::from(wall.height_px)))
}

/// Bounds for [`random_scenario`].
#[derive(Clone, Debug)]
pub struct ScenarioBounds {
    pub max_loss: f64,
    pub max_delay_ms: u64,
    pub max_events: usize,
    pub max_end_ms: Millis,
    /// Chance of the open-air comparison mode.
    pub openair_probability: f64,
}

impl Default for ScenarioBounds {
    fn default() -> Self {
        Self { max_loss: 0.3, max_delay_ms: 200, max_events: 40, max_end_ms: 120_000, openair_probability: 0.1 }
    }
}

fn aim(rng: &mut impl Rng, wall: &Wall) -> Point {
    // vertex mean of a target: inside for the convex targets of typical catalogs
    if rng.random_bool(0.75) {
        if let Some(t) = wall.targets.choose(rng) {
            let n = t.polygon.len() as f64;
            let p = Point::new(t.polygon.iter().map(|p| p.x).sum::<f64>() / n, t.polygon.iter().map(|p| p.y).sum::<f64>() / n);
            return Point::new(p.x.round(), p.y.round());
        }
    }
    Point::new(f64::from(rng.random_range(0..=wall.width_px)), f64::from(rng.random_range(0..=wall.height_px)))
}

/// A valid random scenario over `catalog`: taps (mostly on targets), level
/// changes, wall switches and stops from both devices on a random channel.
pub fn random_scenario(rng: &mut impl Rng, catalog: &Catalog, catalog_ref: &str, bounds: &ScenarioBounds) -> Scenario {
    let end_ms = rng.random_range(5_000..=bounds.max_end_ms.max(5_000));
    let n = rng.random_range(0..=bounds.max_events);
    let mut times: Vec<Millis> = (0..n).map(|_| rng.random_range(0..=end_ms)).collect();
    times.sort_unstable();

    let walls: Vec<&WallId> = catalog.walls().iter().map(|w| &w.wall_id).collect();
    let mut current = [catalog.initial_wall().clone(), catalog.initial_wall().clone()];
    let mut events = Vec::with_capacity(n);
    for at_ms in times {
        let d = rng.random_range(0..2usize);
        let device = if d == 0 { DEVICE_A } else { DEVICE_B };
        let roll = rng.random_range(0..100);
        let action = if roll < 55 {
            let wall = catalog.wall(&current[d]).expect("tracked wall exists");
            let p = aim(rng, wall);
            Action::Tap { wall_id: current[d].clone(), x: p.x, y: p.y }
        } else if roll < 75 {
            Action::SetLevel { level: *EavesdropLevel::ALL.choose(rng).expect("non-empty") }
        } else if roll < 90 {
            let wall = (*walls.choose(rng).expect("catalog has walls")).clone();
            current[d] = wall.clone();
            Action::SwitchWall { wall_id: wall }
        } else {
            Action::StopPersonal
        };
        events.push(ScenarioEvent::new(at_ms, device, action));
    }

    let delay_max_ms = rng.random_range(0..=bounds.max_delay_ms);
    let delay_min_ms = rng.random_range(0..=delay_max_ms);
    let network = NetworkConfig {
        loss_probability: if bounds.max_loss > 0.0 { rng.random_range(0.0..=bounds.max_loss) } else { 0.0 },
        delay_min_ms,
        delay_max_ms,
        duplicate_probability: rng.random_range(0.0..=0.1),
        seed: rng.random(),
    };
    let protocol = ProtocolConfig {
        announce_interval_ms: *[250, 500, 1000, 1000, 2000].choose(rng).expect("non-empty"),
        latency_compensation_ms: *[0, 0, 0, 20, 50].choose(rng).expect("non-empty"),
        change_announces: rng.random_range(0..=3),
        ..ProtocolConfig::default()
    };
    let mode = if rng.random_bool(bounds.openair_probability) { Mode::Openair } else { Mode::Eavesdrop };
    Scenario { catalog_ref: catalog_ref.to_owned(), network, protocol, guidebook: Default::default(), mode, events, end_ms }
}
