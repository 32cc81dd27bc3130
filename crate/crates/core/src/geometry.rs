//! Planar primitives for imagemap targets.
//!
//! Containment uses the even-odd rule with boundary points counted as
//! inside. Coordinates are wall-image pixels and may be fractional.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Twice the signed area of triangle (a, b, c); positive when counter-clockwise.
fn cross(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn within_box(p: Point, a: Point, b: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// True when `p` lies on the closed segment `a`–`b`.
pub fn on_segment(p: Point, a: Point, b: Point) -> bool {
    cross(a, b, p) == 0.0 && within_box(p, a, b)
}

fn edges(polygon: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    let n = polygon.len();
    (0..n).map(move |i| (polygon[i], polygon[(i + 1) % n]))
}

/// Even-odd containment; points on an edge or vertex are inside.
pub fn contains(polygon: &[Point], p: Point) -> bool {
    if polygon.len() < 3 {
        return false;
    }
    let mut inside = false;
    for (a, b) in edges(polygon) {
        if on_segment(p, a, b) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Shoelace area, signed (counter-clockwise positive).
pub fn signed_area(polygon: &[Point]) -> f64 {
    edges(polygon).map(|(a, b)| a.x * b.y - b.x * a.y).sum::<f64>() / 2.0
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && within_box(p1, q1, q2))
        || (d2 == 0.0 && within_box(p2, q1, q2))
        || (d3 == 0.0 && within_box(q1, p1, p2))
        || (d4 == 0.0 && within_box(q2, p1, p2))
}

/// A polygon is simple when no two edges meet except adjacent edges at
/// their shared vertex. Repeated consecutive vertices are rejected.
pub fn is_simple(polygon: &[Point]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let edge = |i: usize| (polygon[i], polygon[(i + 1) % n]);
    for i in 0..n {
        let (a, b) = edge(i);
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            let (c, d) = edge(j);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // shared vertex plus a collinear fold-back means overlap
                let (shared, other_ab, other_cd) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                if cross(shared, other_ab, other_cd) == 0.0 {
                    let dot = (other_ab.x - shared.x) * (other_cd.x - shared.x) + (other_ab.y - shared.y) * (other_cd.y - shared.y);
                    if dot > 0.0 {
                        return false;
                    }
                }
                // a triangle's edges are all mutually adjacent
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Point> {
        vec![Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(10.0, 10.0), Point::new(0.0, 10.0)]
    }

    #[test]
    fn boundary_counts_as_inside() {
        let sq = square();
        assert!(contains(&sq, Point::new(0.0, 5.0)));
        assert!(contains(&sq, Point::new(10.0, 10.0)));
        assert!(contains(&sq, Point::new(5.0, 0.0)));
        assert!(contains(&sq, Point::new(5.0, 5.0)));
        assert!(!contains(&sq, Point::new(10.5, 5.0)));
        assert!(!contains(&sq, Point::new(-0.001, 0.0)));
    }

    #[test]
    fn concave_polygon_notch_is_outside() {
        // U shape opening upward
        let u = vec![
            Point::new(0.0, 0.0),
            Point::new(30.0, 0.0),
            Point::new(30.0, 30.0),
            Point::new(20.0, 30.0),
            Point::new(20.0, 10.0),
            Point::new(10.0, 10.0),
            Point::new(10.0, 30.0),
            Point::new(0.0, 30.0),
        ];
        assert!(is_simple(&u));
        assert!(!contains(&u, Point::new(15.0, 20.0)));
        assert!(contains(&u, Point::new(5.0, 20.0)));
        assert!(contains(&u, Point::new(15.0, 5.0)));
        assert_eq!(signed_area(&u), 700.0);
    }

    #[test]
    fn bowtie_is_not_simple() {
        let bowtie = vec![Point::new(0.0, 0.0), Point::new(10.0, 10.0), Point::new(10.0, 0.0), Point::new(0.0, 10.0)];
        assert!(!is_simple(&bowtie));
        assert!(is_simple(&square()));
    }

    #[test]
    fn degenerate_polygons() {
        let collinear = vec![Point::new(0.0, 0.0), Point::new(5.0, 0.0), Point::new(10.0, 0.0)];
        assert_eq!(signed_area(&collinear), 0.0);
        let foldback = vec![Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(5.0, 0.0)];
        assert!(!is_simple(&foldback));
        let repeated = vec![Point::new(0.0, 0.0), Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(0.0, 10.0)];
        assert!(!is_simple(&repeated));
    }
}
