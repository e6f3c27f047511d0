//! Map representation and the exact-geometry queries the sensor simulators
//! are built on.
//!
//! Obstacles are axis-aligned rectangles and the map bounds behave as a
//! solid enclosure, so every ray cast inside the map ends on some surface.

use std::cell::Cell;
use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class label shared between map objects and the detections derived from
/// them.
pub type ClassLabel = Arc<str>;

thread_local! {
    static RAYS_CAST: Cell<u64> = const { Cell::new(0) };
}

/// Number of rays traced by the calling thread so far.
pub fn rays_cast_on_this_thread() -> u64 {
    RAYS_CAST.with(Cell::get)
}

/// Wraps an angle into `[-π, π)`. Angles already in range are returned
/// unchanged, bit for bit.
pub fn wrap_angle(angle: f64) -> f64 {
    if (-PI..PI).contains(&angle) {
        return angle;
    }
    let wrapped = (angle + PI).rem_euclid(TAU) - PI;
    // rem_euclid may round up to TAU
    if wrapped >= PI {
        -PI
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Planar vehicle pose. The heading is kept in `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose2D {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(min: Point2, max: Point2) -> Self {
        Rect { min, max }
    }

    pub fn from_center(center: Point2, half_extents: Point2) -> Self {
        Rect {
            min: Point2::new(center.x - half_extents.x, center.y - half_extents.y),
            max: Point2::new(center.x + half_extents.x, center.y + half_extents.y),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Point2 {
        Point2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    /// Closed containment test (points on the boundary count as inside).
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.min.x >= self.min.x
            && other.max.x <= self.max.x
            && other.min.y >= self.min.y
            && other.max.y <= self.max.y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// Slab test: distance along the unit direction `dir` at which a ray from
    /// `origin` enters the rectangle, if it does so at a positive distance.
    fn ray_entry(&self, origin: Point2, dir: Point2) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for (o, d, lo, hi) in [
            (origin.x, dir.x, self.min.x, self.max.x),
            (origin.y, dir.y, self.min.y, self.max.y),
        ] {
            if d == 0.0 {
                if o < lo || o > hi {
                    return None;
                }
            } else {
                let t1 = (lo - o) / d;
                let t2 = (hi - o) / d;
                t_near = t_near.max(t1.min(t2));
                t_far = t_far.min(t1.max(t2));
            }
        }
        (t_near <= t_far && t_near > 0.0).then_some(t_near)
    }

    /// Distance at which a ray starting inside the rectangle leaves it.
    fn ray_exit(&self, origin: Point2, dir: Point2) -> f64 {
        let axis_exit = |o: f64, d: f64, lo: f64, hi: f64| {
            if d > 0.0 {
                (hi - o) / d
            } else if d < 0.0 {
                (lo - o) / d
            } else {
                f64::INFINITY
            }
        };
        axis_exit(origin.x, dir.x, self.min.x, self.max.x).min(axis_exit(
            origin.y,
            dir.y,
            self.min.y,
            self.max.y,
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapObject {
    pub id: u32,
    pub class_label: ClassLabel,
    pub center: Point2,
    pub half_extents: Point2,
}

impl MapObject {
    pub fn new(id: u32, class_label: &str, center: Point2, half_extents: Point2) -> Self {
        MapObject {
            id,
            class_label: Arc::from(class_label),
            center,
            half_extents,
        }
    }

    pub fn rect(&self) -> Rect {
        Rect::from_center(self.center, self.half_extents)
    }
}

/// What a ray hit first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HitTarget {
    /// Index into [`WorldMap::objects`].
    Object(usize),
    Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub range: f64,
    pub target: HitTarget,
}

/// An object as seen from a pose: range and bearing of its center relative
/// to the vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibleObject {
    pub object_id: u32,
    pub class_label: ClassLabel,
    pub range: f64,
    pub bearing: f64,
}

/// Bounded world of labelled rectangular objects. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    bounds: Rect,
    objects: Vec<MapObject>,
    rects: Vec<Rect>,
}

impl WorldMap {
    pub fn new(bounds: Rect, objects: Vec<MapObject>) -> Result<Self> {
        let finite = [bounds.min.x, bounds.min.y, bounds.max.x, bounds.max.y]
            .iter()
            .all(|v| v.is_finite());
        if !finite || bounds.width() <= 0.0 || bounds.height() <= 0.0 {
            return Err(Error::InvalidMap(
                "bounds must have positive width and height".into(),
            ));
        }
        let mut ids = std::collections::HashSet::new();
        for obj in &objects {
            if !(obj.half_extents.x > 0.0 && obj.half_extents.y > 0.0) {
                return Err(Error::InvalidMap(format!(
                    "object {} has non-positive half extents",
                    obj.id
                )));
            }
            if !(obj.center.x.is_finite() && obj.center.y.is_finite()) {
                return Err(Error::InvalidMap(format!(
                    "object {} has a non-finite center",
                    obj.id
                )));
            }
            if !bounds.contains_rect(&obj.rect()) {
                return Err(Error::ObjectOutOfBounds { id: obj.id });
            }
            if !ids.insert(obj.id) {
                return Err(Error::DuplicateId(obj.id));
            }
        }
        let rects = objects.iter().map(MapObject::rect).collect();
        Ok(WorldMap {
            bounds,
            objects,
            rects,
        })
    }

    pub fn bounds(&self) -> &Rect {
        &self.bounds
    }

    pub fn objects(&self) -> &[MapObject] {
        &self.objects
    }

    /// True when `p` is inside the bounds and not inside (or on) any object.
    pub fn is_free(&self, p: Point2) -> bool {
        self.bounds.contains(p) && !self.rects.iter().any(|r| r.contains(p))
    }

    fn check_sensor_origin(&self, origin: Point2) -> Result<()> {
        if !(origin.x.is_finite() && origin.y.is_finite()) || !self.bounds.contains(origin) {
            return Err(Error::PoseOutOfBounds {
                x: origin.x,
                y: origin.y,
            });
        }
        if let Some(i) = self.rects.iter().position(|r| r.contains(origin)) {
            return Err(Error::PoseInsideObject {
                id: self.objects[i].id,
                x: origin.x,
                y: origin.y,
            });
        }
        Ok(())
    }

    /// First surface hit by a ray from a free-space origin, ignoring the
    /// object at index `skip`. Never misses: the bounds close the world.
    fn first_hit_unchecked(&self, origin: Point2, bearing: f64, skip: Option<usize>) -> RayHit {
        RAYS_CAST.with(|c| c.set(c.get() + 1));
        let dir = Point2::new(bearing.cos(), bearing.sin());
        let mut best = RayHit {
            range: self.bounds.ray_exit(origin, dir),
            target: HitTarget::Bounds,
        };
        for (i, rect) in self.rects.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            if let Some(t) = rect.ray_entry(origin, dir) {
                if t < best.range {
                    best = RayHit {
                        range: t,
                        target: HitTarget::Object(i),
                    };
                }
            }
        }
        best
    }

    /// Closed-form first hit along an absolute bearing.
    pub fn first_hit(&self, origin: Point2, bearing: f64) -> Result<RayHit> {
        self.check_sensor_origin(origin)?;
        Ok(self.first_hit_unchecked(origin, bearing, None))
    }

    /// Range to the first surface along the absolute `bearing`, or `None`
    /// when that surface is farther than `max_range`.
    pub fn ray_cast(&self, origin: Point2, bearing: f64, max_range: f64) -> Result<Option<f64>> {
        if !(max_range > 0.0 && max_range.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "max_range must be positive and finite, got {max_range}"
            )));
        }
        let hit = self.first_hit(origin, bearing)?;
        Ok((hit.range <= max_range).then_some(hit.range))
    }

    /// Casts one ray per relative bearing from `pose`, checking the origin
    /// once for the whole fan.
    pub fn ray_cast_beams(&self, pose: &Pose2D, bearings: &[f64], max_range: f64) -> Result<Vec<Option<f64>>> {
        if !(max_range > 0.0 && max_range.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "max_range must be positive and finite, got {max_range}"
            )));
        }
        let origin = pose.position();
        self.check_sensor_origin(origin)?;
        Ok(bearings
            .iter()
            .map(|b| {
                let hit = self.first_hit_unchecked(origin, pose.heading + b, None);
                (hit.range <= max_range).then_some(hit.range)
            })
            .collect())
    }

    /// Objects whose centers fall within range and field of view of `pose`,
    /// ordered by bearing then range.
    ///
    /// With `occlusion` on, an object is dropped when the ray toward its
    /// center meets another object first. Only the center ray is tested.
    pub fn visible_objects(
        &self,
        pose: &Pose2D,
        fov: f64,
        max_range: f64,
        occlusion: bool,
    ) -> Result<Vec<VisibleObject>> {
        if !(fov > 0.0 && fov <= TAU) {
            return Err(Error::InvalidArgument(format!(
                "fov must lie in (0, 2π], got {fov}"
            )));
        }
        if !(max_range > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "max_range must be positive, got {max_range}"
            )));
        }
        let origin = pose.position();
        if occlusion {
            self.check_sensor_origin(origin)?;
        }
        let half_fov = 0.5 * fov;
        let mut seen = Vec::new();
        for (i, obj) in self.objects.iter().enumerate() {
            let dx = obj.center.x - origin.x;
            let dy = obj.center.y - origin.y;
            let range = dx.hypot(dy);
            if range == 0.0 || range > max_range {
                continue;
            }
            let absolute = dy.atan2(dx);
            let bearing = wrap_angle(absolute - pose.heading);
            if bearing.abs() > half_fov {
                continue;
            }
            if occlusion {
                let hit = self.first_hit_unchecked(origin, absolute, Some(i));
                if matches!(hit.target, HitTarget::Object(_)) && hit.range < range {
                    continue;
                }
            }
            seen.push(VisibleObject {
                object_id: obj.id,
                class_label: obj.class_label.clone(),
                range,
                bearing,
            });
        }
        seen.sort_by(|a, b| {
            a.bearing
                .total_cmp(&b.bearing)
                .then(a.range.total_cmp(&b.range))
        });
        Ok(seen)
    }

    pub fn to_json(&self) -> String {
        let doc = MapFile {
            bounds: BoundsFile {
                min: [self.bounds.min.x, self.bounds.min.y],
                max: [self.bounds.max.x, self.bounds.max.y],
            },
            objects: self
                .objects
                .iter()
                .map(|o| ObjectFile {
                    id: o.id,
                    class: o.class_label.to_string(),
                    center: [o.center.x, o.center.y],
                    half_extents: [o.half_extents.x, o.half_extents.y],
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("map serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MapFile = serde_json::from_str(text).map_err(schema_error)?;
        let bounds = Rect::new(
            Point2::new(doc.bounds.min[0], doc.bounds.min[1]),
            Point2::new(doc.bounds.max[0], doc.bounds.max[1]),
        );
        let objects = doc
            .objects
            .into_iter()
            .map(|o| {
                MapObject::new(
                    o.id,
                    &o.class,
                    Point2::new(o.center[0], o.center[1]),
                    Point2::new(o.half_extents[0], o.half_extents[1]),
                )
            })
            .collect();
        WorldMap::new(bounds, objects)
    }
}

/// Reads and validates a map file.
pub fn load_map(path: impl AsRef<Path>) -> Result<WorldMap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    WorldMap::from_json(&text)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    bounds: BoundsFile,
    objects: Vec<ObjectFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsFile {
    min: [f64; 2],
    max: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectFile {
    id: u32,
    class: String,
    center: [f64; 2],
    half_extents: [f64; 2],
}

/// Turns a serde error into a schema violation naming the offending field.
/// The JSON key `class` carries the object's class label.
fn schema_error(err: serde_json::Error) -> Error {
    let detail = err.to_string();
    let field = detail
        .split('`')
        .nth(1)
        .filter(|_| detail.contains("field `"))
        .unwrap_or("<document>");
    let field = match field {
        "class" => "class_label",
        other => other,
    };
    Error::Schema {
        field: field.to_string(),
        detail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_world(objects: Vec<MapObject>) -> WorldMap {
        WorldMap::new(
            Rect::new(Point2::new(-25.0, -25.0), Point2::new(25.0, 25.0)),
            objects,
        )
        .unwrap()
    }

    fn block_at(id: u32, x: f64, y: f64) -> MapObject {
        MapObject::new(id, "block", Point2::new(x, y), Point2::new(2.5, 2.5))
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
        assert_eq!(wrap_angle(0.3), 0.3);
        assert!((wrap_angle(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!((wrap_angle(-TAU - 0.2) - (-0.2)).abs() < 1e-12);
        for k in -50..50 {
            let w = wrap_angle(k as f64 * 0.37);
            assert!((-PI..PI).contains(&w));
        }
    }

    #[test]
    fn empty_map_beyond_range_is_miss() {
        let map = square_world(vec![]);
        assert_eq!(map.ray_cast(Point2::new(0.0, 0.0), 0.0, 10.0).unwrap(), None);
        assert_eq!(
            map.ray_cast(Point2::new(0.0, 0.0), 0.0, 30.0).unwrap(),
            Some(25.0)
        );
    }

    #[test]
    fn axis_aligned_face_hit() {
        let map = square_world(vec![MapObject::new(
            1,
            "block",
            Point2::new(12.5, 0.0),
            Point2::new(2.5, 2.5),
        )]);
        assert_eq!(
            map.ray_cast(Point2::new(0.0, 0.0), 0.0, 30.0).unwrap(),
            Some(10.0)
        );
    }

    #[test]
    fn origin_inside_object_is_rejected() {
        let map = square_world(vec![block_at(7, 0.0, 0.0)]);
        let err = map.ray_cast(Point2::new(1.0, 1.0), 0.0, 10.0).unwrap_err();
        assert!(matches!(err, Error::PoseInsideObject { id: 7, .. }));
        let err = map.ray_cast(Point2::new(40.0, 0.0), 0.0, 10.0).unwrap_err();
        assert!(matches!(err, Error::PoseOutOfBounds { .. }));
        assert!(map.ray_cast(Point2::new(10.0, 0.0), 0.0, 0.0).is_err());
    }

    #[test]
    fn visible_on_axis_target() {
        let map = square_world(vec![block_at(3, 10.0, 0.0)]);
        let seen = map
            .visible_objects(&Pose2D::new(0.0, 0.0, 0.0), PI / 2.0, 20.0, false)
            .unwrap();
        assert_eq!(seen.len(), 1);
        assert_eq!(seen[0].object_id, 3);
        assert_eq!(&*seen[0].class_label, "block");
        assert_eq!(seen[0].range, 10.0);
        assert_eq!(seen[0].bearing, 0.0);

        let behind = map
            .visible_objects(&Pose2D::new(0.0, 0.0, PI), PI / 2.0, 20.0, false)
            .unwrap();
        assert!(behind.is_empty());
    }

    #[test]
    fn visible_ordering_and_occlusion() {
        let map = square_world(vec![
            block_at(1, 20.0, 0.0),
            block_at(2, 10.0, 0.0),
            block_at(3, 0.0, 10.0),
            block_at(4, 0.0, -10.0),
        ]);
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        let all = map.visible_objects(&pose, TAU, 100.0, false).unwrap();
        let ids: Vec<u32> = all.iter().map(|v| v.object_id).collect();
        assert_eq!(ids, vec![4, 2, 1, 3]);

        let occluded = map.visible_objects(&pose, TAU, 100.0, true).unwrap();
        let ids: Vec<u32> = occluded.iter().map(|v| v.object_id).collect();
        assert_eq!(ids, vec![4, 2, 3]);
    }

    #[test]
    fn occlusion_propagates_degenerate_pose() {
        let map = square_world(vec![block_at(1, 0.0, 0.0)]);
        let pose = Pose2D::new(0.5, 0.5, 0.0);
        assert!(map.visible_objects(&pose, TAU, 30.0, false).is_ok());
        assert!(map.visible_objects(&pose, TAU, 30.0, true).is_err());
    }

    #[test]
    fn map_validation() {
        let bounds = Rect::new(Point2::new(-25.0, -25.0), Point2::new(25.0, 25.0));
        let err = WorldMap::new(bounds, vec![block_at(1, 60.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::ObjectOutOfBounds { id: 1 }));
        let err =
            WorldMap::new(bounds, vec![block_at(1, 0.0, 0.0), block_at(1, 10.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(1)));
        let flat = Rect::new(Point2::new(0.0, 0.0), Point2::new(10.0, 0.0));
        assert!(WorldMap::new(flat, vec![]).is_err());
        let thin = MapObject::new(1, "pylon", Point2::new(0.0, 0.0), Point2::new(0.0, 1.0));
        assert!(WorldMap::new(bounds, vec![thin]).is_err());
    }

    #[test]
    fn load_map_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.json");
        std::fs::write(
            &path,
            r#"{"bounds": {"min": [-25, -25], "max": [25, 25]},
                "objects": [
                  {"id": 1, "class": "block", "center": [5, 5], "half_extents": [2.5, 2.5]},
                  {"id": 2, "class": "pylon", "center": [-10, 3], "half_extents": [0.5, 0.5]}
                ]}"#,
        )
        .unwrap();
        let map = load_map(&path).unwrap();
        assert_eq!(map.objects().len(), 2);
        assert_eq!(&*map.objects()[1].class_label, "pylon");
        assert_eq!(WorldMap::from_json(&map.to_json()).unwrap(), map);
    }

    #[test]
    fn load_map_errors() {
        let out_of_bounds = r#"{"bounds": {"min": [-25, -25], "max": [25, 25]},
            "objects": [{"id": 1, "class": "block", "center": [60, 0], "half_extents": [2.5, 2.5]}]}"#;
        assert!(matches!(
            WorldMap::from_json(out_of_bounds),
            Err(Error::ObjectOutOfBounds { id: 1 })
        ));

        let no_class = r#"{"bounds": {"min": [-25, -25], "max": [25, 25]},
            "objects": [{"id": 1, "center": [0, 0], "half_extents": [2.5, 2.5]}]}"#;
        match WorldMap::from_json(no_class) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "class_label"),
            other => panic!("expected schema error, got {other:?}"),
        }

        let unknown = r#"{"bounds": {"min": [-25, -25], "max": [25, 25]}, "objects": [], "depth": 3}"#;
        match WorldMap::from_json(unknown) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "depth"),
            other => panic!("expected schema error, got {other:?}"),
        }

        assert!(matches!(
            load_map("/nonexistent/map.json"),
            Err(Error::Io { .. })
        ));
    }
}
