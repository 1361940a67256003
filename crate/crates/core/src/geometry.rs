//! Collision, line-of-sight and field-of-view predicates.
//!
//! Everything here is a pure function over 64-bit coordinates. Boundary
//! comparisons are inclusive and carry no epsilon slack.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// A point in world space. `z` is altitude above the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Projection onto the ground plane.
    pub fn ground(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// A point on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Lift onto the ground plane (`z = 0`).
    pub fn at_ground(&self) -> Point3 {
        Point3::new(self.x, self.y, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Solid vertical cylinder standing on the ground: `dist_to_axis <= radius`
/// and `0 <= z <= height`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub center: Point2,
    pub radius: f64,
    pub height: f64,
}

impl Cylinder {
    pub fn new(center: Point2, radius: f64, height: f64) -> Result<Self, GeometryError> {
        let cyl = Self {
            center,
            radius,
            height,
        };
        cyl.validate()?;
        Ok(cyl)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.center.is_finite() || !(self.radius > 0.0) || !(self.height > 0.0) {
            return Err(GeometryError::InvalidCylinder {
                radius: self.radius,
                height: self.height,
            });
        }
        Ok(())
    }

    /// Point-membership test for the solid, boundary included.
    pub fn contains(&self, p: &Point3) -> bool {
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        dx * dx + dy * dy <= self.radius * self.radius && p.z >= 0.0 && p.z <= self.height
    }
}

/// Camera half-angle measured from the nadir, configured in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FovSpec {
    theta_deg: f64,
    tan_theta: f64,
}

impl TryFrom<f64> for FovSpec {
    type Error = GeometryError;

    fn try_from(theta_deg: f64) -> Result<Self, Self::Error> {
        Self::from_degrees(theta_deg)
    }
}

impl From<FovSpec> for f64 {
    fn from(fov: FovSpec) -> f64 {
        fov.theta_deg
    }
}

impl FovSpec {
    pub fn from_degrees(theta_deg: f64) -> Result<Self, GeometryError> {
        if !(theta_deg > 0.0 && theta_deg < 90.0) {
            return Err(GeometryError::InvalidFov(theta_deg));
        }
        Ok(Self {
            theta_deg,
            tan_theta: tan_degrees(theta_deg),
        })
    }

    pub fn degrees(&self) -> f64 {
        self.theta_deg
    }

    pub fn tan(&self) -> f64 {
        self.tan_theta
    }
}

/// `tan(pi/4)` rounds to `1 - 2^-53` through radians; keep 45 degrees exact so
/// footprint edges land on the lattice.
fn tan_degrees(deg: f64) -> f64 {
    if deg == 45.0 {
        1.0
    } else {
        deg.to_radians().tan()
    }
}

/// Side length of the square ground footprint seen from altitude `z`.
pub fn fov_diameter(z: f64, fov: &FovSpec) -> Result<f64, GeometryError> {
    if !(z >= 0.0) {
        return Err(GeometryError::NegativeAltitude(z));
    }
    Ok(2.0 * z * fov.tan())
}

/// True when the UAV is inside (or on the boundary of) the obstacle.
pub fn check_collision(uav: &Point3, obs: &Cylinder) -> bool {
    let dx = uav.x - obs.center.x;
    let dy = uav.y - obs.center.y;
    (dx * dx + dy * dy).sqrt() <= obs.radius && uav.z <= obs.height
}

/// Exact test of the closed segment `a..=b` against the solid cylinder.
///
/// The segment is parameterised as `a + t (b - a)` with `t` in `[0, 1]`. The
/// solid is the intersection of two convex sets, the slab `0 <= z <= h` and
/// the infinite disc prism around the axis, so each constraint yields one
/// closed `t` interval and the segment hits the solid iff all three intervals
/// overlap.
pub fn segment_cylinder_intersect(
    a: &Point3,
    b: &Point3,
    obs: &Cylinder,
) -> Result<bool, GeometryError> {
    if a == b {
        return Err(GeometryError::DegenerateSegment);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);

    // slab
    let dz = b.z - a.z;
    if dz == 0.0 {
        if a.z < 0.0 || a.z > obs.height {
            return Ok(false);
        }
    } else {
        let t0 = (0.0 - a.z) / dz;
        let t1 = (obs.height - a.z) / dz;
        lo = lo.max(t0.min(t1));
        hi = hi.min(t0.max(t1));
        if lo > hi {
            return Ok(false);
        }
    }

    // lateral: |(a_xy - c) + t d_xy|^2 <= r^2
    let ox = a.x - obs.center.x;
    let oy = a.y - obs.center.y;
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let qa = dx * dx + dy * dy;
    let qc = ox * ox + oy * oy - obs.radius * obs.radius;
    if qa == 0.0 {
        return Ok(qc <= 0.0);
    }
    let qb = 2.0 * (ox * dx + oy * dy);
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Ok(false);
    }
    let sq = disc.sqrt();
    // Numerically stable root pair.
    let q = -0.5 * (qb + qb.signum() * sq);
    let (r0, r1) = if q == 0.0 {
        let r = -qb / (2.0 * qa);
        (r, r)
    } else {
        let u = q / qa;
        let v = qc / q;
        (u.min(v), u.max(v))
    };
    Ok(lo.max(r0) <= hi.min(r1))
}

/// True when the sight line from the UAV down to the ground target passes
/// through the obstacle.
pub fn check_occlusion(
    uav: &Point3,
    target: &Point2,
    obs: &Cylinder,
) -> Result<bool, GeometryError> {
    let ground = target.at_ground();
    if *uav == ground {
        return Err(GeometryError::DegenerateSegment);
    }
    segment_cylinder_intersect(uav, &ground, obs)
}

/// The printed closed-form occlusion condition, evaluated literally.
///
/// Kept for side-by-side comparison with [`check_occlusion`]. It ignores the
/// segment's parameter range and divides by `x_T - x_D`, so it is not used by
/// the simulator. Non-finite intermediates make the condition false.
pub fn check_occlusion_closed_form(uav: &Point3, target: &Point2, obs: &Cylinder) -> bool {
    let dx = target.x - uav.x;
    let dy = target.y - uav.y;
    let height_term = uav.z * (uav.x - obs.center.x) / dx + uav.z;
    let lateral_term = (dx * obs.center.y + dy * obs.center.x) / (dx * dx + dy * dy).sqrt();
    height_term <= obs.height && lateral_term <= obs.radius
}

/// True when the target lies inside the square footprint centred under the UAV.
pub fn check_visibility(uav: &Point3, target: &Point2, fov: &FovSpec) -> bool {
    let Ok(diameter) = fov_diameter(uav.z, fov) else {
        return false;
    };
    let half = diameter / 2.0;
    (target.x - uav.x).abs() <= half && (target.y - uav.y).abs() <= half
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub visible: bool,
    /// Lowest index of an obstacle blocking the sight line, if any.
    pub occluded_by: Option<usize>,
}

/// Combined footprint and occlusion check over every obstacle.
pub fn target_visible(
    uav: &Point3,
    target: &Point2,
    obstacles: &[Cylinder],
    fov: &FovSpec,
) -> VisibilityReport {
    let occluded_by = first_occluder(uav, target, obstacles);
    VisibilityReport {
        visible: occluded_by.is_none() && check_visibility(uav, target, fov),
        occluded_by,
    }
}

/// Index of the first obstacle cutting the sight line. A UAV sitting on the
/// ground exactly at the target has no sight line and is never occluded.
pub fn first_occluder(uav: &Point3, target: &Point2, obstacles: &[Cylinder]) -> Option<usize> {
    obstacles
        .iter()
        .position(|obs| check_occlusion(uav, target, obs).unwrap_or(false))
}
