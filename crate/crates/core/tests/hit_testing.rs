use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sottovoce_core::catalog::Wall;
use sottovoce_core::generate::{random_point, random_wall};
use sottovoce_core::{Point, TapOutcome};

/// Winding-number containment by summing signed angles; boundary by distance.
fn oracle_contains(polygon: &[Point], p: Point) -> bool {
    let n = polygon.len();
    let mut total = 0.0f64;
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[(i + 1) % n]);
        let (ax, ay, bx, by) = (a.x - p.x, a.y - p.y, b.x - p.x, b.y - p.y);
        // distance from p to segment ab
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len2 = dx * dx + dy * dy;
        let u = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
        let (cx, cy) = (a.x + u * dx - p.x, a.y + u * dy - p.y);
        if (cx * cx + cy * cy).sqrt() <= 1e-9 {
            return true;
        }
        total += (ax * by - ay * bx).atan2(ax * bx + ay * by);
    }
    total.abs() > std::f64::consts::PI
}

fn oracle_first_hit(wall: &Wall, p: Point) -> Option<usize> {
    wall.targets.iter().position(|t| oracle_contains(&t.polygon, p))
}

proptest! {
    #[test]
    fn hit_test_matches_winding_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let wall = random_wall(&mut rng);
        for _ in 0..200 {
            let p = random_point(&mut rng, &wall);
            let got = wall.hit_test(p).unwrap().map(|t| t.target_id.clone());
            let want = oracle_first_hit(&wall, p).map(|i| wall.targets[i].target_id.clone());
            prop_assert_eq!(got, want, "point {:?}", p);
        }
    }

    #[test]
    fn miss_iff_no_hit(seed in any::<u64>(), now in 0i64..1_000_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let wall = random_wall(&mut rng);
        for _ in 0..50 {
            let p = random_point(&mut rng, &wall);
            let hit = wall.hit_test(p).unwrap();
            match wall.resolve_tap(p, now, 2000).unwrap() {
                TapOutcome::Hit { target_id, .. } => prop_assert_eq!(Some(target_id), hit.map(|t| t.target_id.clone())),
                TapOutcome::Miss { tip_outlines, tip_expiry_ms } => {
                    prop_assert!(hit.is_none());
                    prop_assert_eq!(tip_outlines.len(), wall.targets.len());
                    prop_assert_eq!(tip_expiry_ms, now + 2000);
                }
            }
        }
    }
}

#[test]
fn repeated_misses_extend_tip_expiry() {
    use sottovoce_core::{Catalog, DeviceState, GuidebookConfig};
    let catalog = Catalog::sample();
    let wall = catalog.initial_wall().clone();
    let mut dev = DeviceState::new("A".into(), "B".into(), wall.clone());
    let cfg = GuidebookConfig::default();
    // a tap log of misses; the expected expiry is the max over the log
    let log = [(1000, 790.0, 590.0), (1400, 799.0, 599.0), (1450, 795.0, 2.0)];
    let w = catalog.wall(&wall).unwrap();
    assert!(log.iter().all(|&(_, x, y)| w.hit_test(Point::new(x, y)).unwrap().is_none()));
    for &(t, x, y) in &log {
        dev.tap(&catalog, &wall, Point::new(x, y), t, &cfg).unwrap();
    }
    let oracle = log.iter().map(|&(t, _, _)| t + cfg.tap_tip_duration_ms as i64).max();
    assert_eq!(dev.tap_tip_expiry_ms, oracle);
}

#[test]
fn out_of_bounds_tap_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let wall = random_wall(&mut rng);
    let outside = Point::new(f64::from(wall.width_px) + 0.5, 0.0);
    assert!(wall.hit_test(outside).is_err());
    assert!(wall.resolve_tap(outside, 0, 2000).is_err());
}
