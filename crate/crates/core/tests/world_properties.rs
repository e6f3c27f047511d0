use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use semloc::world::HitTarget;
use semloc::{MapObject, Point2, Pose2D, Rect, WorldMap};

const HALF: f64 = 25.0;

fn bounds() -> Rect {
    Rect::new(Point2::new(-HALF, -HALF), Point2::new(HALF, HALF))
}

fn object_strategy() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-20.0..20.0, -20.0..20.0, 0.3..4.0, 0.3..4.0)
}

fn build(specs: &[(f64, f64, f64, f64)]) -> WorldMap {
    let objects = specs
        .iter()
        .enumerate()
        .map(|(i, &(x, y, hx, hy))| MapObject::new(i as u32, "block", Point2::new(x, y), Point2::new(hx, hy)))
        .collect();
    WorldMap::new(bounds(), objects).unwrap()
}

fn range_or_inf(hit: Option<f64>) -> f64 {
    hit.unwrap_or(f64::INFINITY)
}

/// First t along the ray, on a 1e-4 m lattice, that lands inside an object
/// or leaves the bounds.
fn marched(map: &WorldMap, origin: Point2, bearing: f64, limit: f64) -> Option<f64> {
    let b = map.bounds();
    let (dx, dy) = (bearing.cos(), bearing.sin());
    (1u64..)
        .map(|k| k as f64 * 1e-4)
        .take_while(|&t| t <= limit)
        .find(|&t| {
            let p = Point2::new(origin.x + t * dx, origin.y + t * dy);
            !(p.x > b.min.x && p.x < b.max.x && p.y > b.min.y && p.y < b.max.y)
                || map.objects().iter().any(|o| o.rect().contains(p))
        })
}

proptest! {
    #[test]
    fn growing_an_object_never_lengthens_a_ray(
        specs in prop::collection::vec(object_strategy(), 1..6),
        pick in any::<prop::sample::Index>(),
        grow in (0.0f64..3.0, 0.0f64..3.0),
        origin in (-24.0..24.0, -24.0..24.0),
        bearing in -PI..PI,
    ) {
        let map = build(&specs);
        let origin = Point2::new(origin.0, origin.1);
        prop_assume!(map.is_free(origin));
        let before = map.ray_cast(origin, bearing, 40.0).unwrap();

        let mut grown = specs.clone();
        let k = pick.index(grown.len());
        let (x, y, hx, hy) = grown[k];
        // stay inside the bounds
        let hx = (hx + grow.0).min(HALF - x.abs());
        let hy = (hy + grow.1).min(HALF - y.abs());
        grown[k] = (x, y, hx, hy);
        let bigger = build(&grown);
        prop_assume!(bigger.is_free(origin));
        let after = bigger.ray_cast(origin, bearing, 40.0).unwrap();
        prop_assert!(range_or_inf(after) <= range_or_inf(before));
    }

    #[test]
    fn full_circle_sees_every_object(
        specs in prop::collection::vec(object_strategy(), 0..8),
        pose in (-24.0..24.0, -24.0..24.0, -PI..PI),
    ) {
        let map = build(&specs);
        let pose = Pose2D::new(pose.0, pose.1, pose.2);
        prop_assume!(map.is_free(pose.position()));
        let seen = map.visible_objects(&pose, TAU, map.bounds().diagonal(), false).unwrap();
        let mut ids: Vec<u32> = seen.iter().map(|v| v.object_id).collect();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..specs.len() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn visible_ranges_and_bearings_stay_in_range(
        specs in prop::collection::vec(object_strategy(), 0..8),
        pose in (-24.0..24.0, -24.0..24.0, -PI..PI),
        fov in 0.1..TAU,
        max_range in 1.0..60.0,
        occlusion in any::<bool>(),
    ) {
        let map = build(&specs);
        let pose = Pose2D::new(pose.0, pose.1, pose.2);
        prop_assume!(map.is_free(pose.position()));
        let seen = map.visible_objects(&pose, fov, max_range, occlusion).unwrap();
        for v in &seen {
            prop_assert!((-PI..PI).contains(&v.bearing));
            prop_assert!(v.bearing.abs() <= fov / 2.0);
            prop_assert!(v.range > 0.0 && v.range <= max_range);
        }
        for w in seen.windows(2) {
            prop_assert!((w[0].bearing, w[0].range) <= (w[1].bearing, w[1].range));
        }
    }
}

#[test]
fn oblique_ray_matches_marching() {
    let map = build(&[(10.0, 3.0, 2.5, 2.5), (-5.0, 12.0, 1.0, 4.0)]);
    let origin = Point2::new(0.0, 0.0);
    let got = map.ray_cast(origin, 0.2, 40.0).unwrap().unwrap();
    let want = marched(&map, origin, 0.2, 40.0).unwrap();
    assert!((got - want).abs() <= 1e-3, "{got} vs {want}");
    // x = 7.5 face: t = 7.5 / cos 0.2
    assert!((got - 7.5 / 0.2f64.cos()).abs() < 1e-12);
}

#[test]
fn occlusion_matches_marching_along_the_center_ray() {
    // a wall of small blocks partly shading larger ones behind it
    let map = build(&[
        (5.0, 0.0, 0.5, 0.5),
        (12.0, 0.3, 1.0, 1.0),
        (12.0, 6.0, 1.0, 1.0),
        (6.0, -3.0, 0.5, 2.0),
        (15.0, -8.0, 1.5, 1.5),
    ]);
    let pose = Pose2D::new(0.0, 0.0, 0.0);
    let open = map.visible_objects(&pose, TAU, 40.0, false).unwrap();
    let shaded = map.visible_objects(&pose, TAU, 40.0, true).unwrap();
    assert!(shaded.len() < open.len());
    for v in &open {
        let obj = map.objects().iter().find(|o| o.id == v.object_id).unwrap();
        let bearing = (obj.center.y).atan2(obj.center.x);
        // march toward the center; blocked if another object is entered first
        let (dx, dy) = (bearing.cos(), bearing.sin());
        let blocked = (1u64..)
            .map(|k| k as f64 * 1e-4)
            .take_while(|&t| t < v.range)
            .any(|t| {
                let p = Point2::new(t * dx, t * dy);
                map.objects().iter().any(|o| o.id != obj.id && o.rect().contains(p))
            });
        let kept = shaded.iter().any(|s| s.object_id == v.object_id);
        assert_eq!(kept, !blocked, "object {}", v.object_id);
    }
}

#[test]
fn first_hit_names_the_surface() {
    let map = build(&[(10.0, 0.0, 1.0, 1.0)]);
    let hit = map.first_hit(Point2::new(0.0, 0.0), 0.0).unwrap();
    assert_eq!(hit.target, HitTarget::Object(0));
    assert_eq!(hit.range, 9.0);
    let wall = map.first_hit(Point2::new(0.0, 0.0), PI / 2.0).unwrap();
    assert_eq!(wall.target, HitTarget::Bounds);
    assert!((wall.range - 25.0).abs() < 1e-12);
}
