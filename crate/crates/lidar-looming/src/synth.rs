//! Synthetic LiDAR: closed-form ray casting against primitive scenes,
//! with analytic ground-truth looming for every hit.
//!
//! Scenes are built from spheres, planes, and axis-aligned boxes, each
//! carrying a constant velocity, so every intersection and every true
//! looming value has a closed form. Scans are instantaneous (one ray per
//! cell center, no rolling shutter) and object motion is linear in time.
//!
//! Scene files are line-oriented text, one primitive per line, SI units:
//!
//! ```text
//! # comment
//! SPHERE cx cy cz r vx vy vz
//! PLANE  px py pz nx ny nz vx vy vz
//! BOX    minx miny minz maxx maxy maxz vx vy vz
//! ```

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{GeometryError, Looming, Vec3};
use crate::looming::{LoomingMap, DEFAULT_CLAMP};
use crate::range_image::{GridSpec, RangeImage, DEFAULT_R_MAX};

/// Intersections closer than this are treated as self-hits and skipped.
const RAY_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SceneParseError {
    Line { line: usize, msg: String },
}

impl fmt::Display for SceneParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneParseError::Line { line, msg } => write!(f, "scene line {line}: {msg}"),
        }
    }
}

impl std::error::Error for SceneParseError {}

/// A scene primitive with a constant velocity.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Sphere {
        center: Vec3,
        radius: f64,
        velocity: Vec3,
    },
    Plane {
        point: Vec3,
        normal: Vec3,
        velocity: Vec3,
    },
    AxisBox {
        min: Vec3,
        max: Vec3,
        velocity: Vec3,
    },
}

impl Primitive {
    pub fn velocity(&self) -> Vec3 {
        match self {
            Primitive::Sphere { velocity, .. }
            | Primitive::Plane { velocity, .. }
            | Primitive::AxisBox { velocity, .. } => *velocity,
        }
    }

    /// Nearest intersection distance along `dir` from `origin`, against
    /// the primitive displaced by `velocity * at_time`.
    fn intersect(&self, origin: Vec3, dir: Vec3, at_time: f64) -> Option<f64> {
        match *self {
            Primitive::Sphere {
                center,
                radius,
                velocity,
            } => {
                let c = center + velocity.scaled(at_time);
                let oc = origin - c;
                let b = oc.dot(dir);
                let disc = b * b - (oc.norm_squared() - radius * radius);
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let near = -b - sq;
                if near > RAY_EPSILON {
                    Some(near)
                } else {
                    let far = -b + sq;
                    (far > RAY_EPSILON).then_some(far)
                }
            }
            Primitive::Plane {
                point,
                normal,
                velocity,
            } => {
                let p = point + velocity.scaled(at_time);
                let denom = dir.dot(normal);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let s = (p - origin).dot(normal) / denom;
                (s > RAY_EPSILON).then_some(s)
            }
            Primitive::AxisBox { min, max, velocity } => {
                let shift = velocity.scaled(at_time);
                let lo = min + shift;
                let hi = max + shift;
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                for (o, d, l, h) in [
                    (origin.x, dir.x, lo.x, hi.x),
                    (origin.y, dir.y, lo.y, hi.y),
                    (origin.z, dir.z, lo.z, hi.z),
                ] {
                    if d.abs() < 1e-15 {
                        if o < l || o > h {
                            return None;
                        }
                        continue;
                    }
                    let (a, b) = ((l - o) / d, (h - o) / d);
                    let (a, b) = if a <= b { (a, b) } else { (b, a) };
                    t_near = t_near.max(a);
                    t_far = t_far.min(b);
                    if t_near > t_far {
                        return None;
                    }
                }
                if t_near > RAY_EPSILON {
                    Some(t_near)
                } else {
                    (t_far > RAY_EPSILON).then_some(t_far)
                }
            }
        }
    }
}

/// A collection of moving primitives.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub objects: Vec<Primitive>,
}

impl Scene {
    pub fn new(objects: Vec<Primitive>) -> Self {
        Scene { objects }
    }

    /// Parse the line-oriented scene format. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Scene, SceneParseError> {
        let mut objects = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let kind = fields.next().unwrap();
            let nums: Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
            let nums = nums.map_err(|e| SceneParseError::Line {
                line: line_no,
                msg: format!("bad number: {e}"),
            })?;
            let err = |msg: String| SceneParseError::Line { line: line_no, msg };
            if !nums.iter().all(|n| n.is_finite()) {
                return Err(err("numbers must be finite".into()));
            }
            let obj = match kind {
                "SPHERE" => {
                    if nums.len() != 7 {
                        return Err(err(format!("SPHERE needs 7 numbers, got {}", nums.len())));
                    }
                    if nums[3] <= 0.0 {
                        return Err(err("sphere radius must be > 0".into()));
                    }
                    Primitive::Sphere {
                        center: Vec3::new(nums[0], nums[1], nums[2]),
                        radius: nums[3],
                        velocity: Vec3::new(nums[4], nums[5], nums[6]),
                    }
                }
                "PLANE" => {
                    if nums.len() != 9 {
                        return Err(err(format!("PLANE needs 9 numbers, got {}", nums.len())));
                    }
                    let n = Vec3::new(nums[3], nums[4], nums[5]);
                    let len = n.norm();
                    if len == 0.0 {
                        return Err(err("plane normal must be nonzero".into()));
                    }
                    Primitive::Plane {
                        point: Vec3::new(nums[0], nums[1], nums[2]),
                        normal: n.scaled(1.0 / len),
                        velocity: Vec3::new(nums[6], nums[7], nums[8]),
                    }
                }
                "BOX" => {
                    if nums.len() != 9 {
                        return Err(err(format!("BOX needs 9 numbers, got {}", nums.len())));
                    }
                    let min = Vec3::new(nums[0], nums[1], nums[2]);
                    let max = Vec3::new(nums[3], nums[4], nums[5]);
                    if !(min.x < max.x && min.y < max.y && min.z < max.z) {
                        return Err(err("box min must be componentwise below max".into()));
                    }
                    Primitive::AxisBox {
                        min,
                        max,
                        velocity: Vec3::new(nums[6], nums[7], nums[8]),
                    }
                }
                other => return Err(err(format!("unknown primitive {other:?}"))),
            };
            objects.push(obj);
        }
        Ok(Scene { objects })
    }

    /// The built-in demo: a wall far ahead plus three small spheres near
    /// the motion axis, all stationary. Geometry chosen so that a
    /// forward-moving vehicle sees mostly near-perpendicular surfaces.
    pub fn demo() -> Scene {
        Scene::new(vec![
            Primitive::Plane {
                point: Vec3::new(116.0, 0.0, 0.0),
                normal: Vec3::new(-1.0, 0.0, 0.0),
                velocity: Vec3::ZERO,
            },
            Primitive::Sphere {
                center: Vec3::new(20.0, 1.0, -1.0),
                radius: 1.2,
                velocity: Vec3::ZERO,
            },
            Primitive::Sphere {
                center: Vec3::new(35.0, -1.5, -2.2),
                radius: 2.0,
                velocity: Vec3::ZERO,
            },
            Primitive::Sphere {
                center: Vec3::new(52.0, 2.0, -3.2),
                radius: 3.0,
                velocity: Vec3::ZERO,
            },
        ])
    }
}

/// Vehicle pose and motion at one instant. `t` is the translation
/// velocity in the sensor frame (x forward); `heading` rotates the
/// sensor frame about world z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub position: Vec3,
    pub heading: f64,
    pub t: Vec3,
    pub omega_z: f64,
}

impl VehicleState {
    pub fn new(position: Vec3, heading: f64, t: Vec3, omega_z: f64) -> Self {
        VehicleState {
            position,
            heading,
            t,
            omega_z,
        }
    }

    /// Translation velocity expressed in the world frame.
    pub fn world_velocity(&self) -> Vec3 {
        rotate_z(self.t, self.heading)
    }

    /// Pose after `dt` seconds of constant sensor-frame velocity and
    /// constant yaw rate (exact circular arc when turning).
    pub fn advanced(&self, dt: f64) -> VehicleState {
        let h0 = self.heading;
        let h1 = h0 + self.omega_z * dt;
        let delta = if self.omega_z.abs() < 1e-12 {
            rotate_z(self.t, h0).scaled(dt)
        } else {
            let w = self.omega_z;
            let (s0, c0) = h0.sin_cos();
            let (s1, c1) = h1.sin_cos();
            let dx = ((s1 - s0) * self.t.x + (c1 - c0) * self.t.y) / w;
            let dy = (-(c1 - c0) * self.t.x + (s1 - s0) * self.t.y) / w;
            Vec3::new(dx, dy, self.t.z * dt)
        };
        VehicleState {
            position: self.position + delta,
            heading: h1,
            t: self.t,
            omega_z: self.omega_z,
        }
    }
}

/// Rotate `v` about the z-axis by `angle`.
pub fn rotate_z(v: Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

/// A ray hit: distance along the ray and the index of the hit object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub range: f64,
    pub object: usize,
}

/// Nearest hit along a ray against the scene at time `at_time`, or None
/// beyond `r_max`.
pub fn ray_cast_hit(
    scene: &Scene,
    origin: Vec3,
    direction: Vec3,
    at_time: f64,
    r_max: f64,
) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (idx, obj) in scene.objects.iter().enumerate() {
        if let Some(range) = obj.intersect(origin, direction, at_time) {
            if range <= r_max && best.is_none_or(|b| range < b.range) {
                best = Some(Hit { range, object: idx });
            }
        }
    }
    best
}

/// Nearest intersection distance within the default 120 m cap, or None.
pub fn ray_cast(scene: &Scene, origin: Vec3, direction: Vec3, at_time: f64) -> Option<f64> {
    ray_cast_hit(scene, origin, direction, at_time, DEFAULT_R_MAX).map(|h| h.range)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub r_max: f64,
    /// Additive Gaussian range noise; 0 disables it. 0.02 m matches the
    /// rated accuracy of the reference sensor.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            r_max: DEFAULT_R_MAX,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

fn cast_cells(
    scene: &Scene,
    state: &VehicleState,
    spec: GridSpec,
    at_time: f64,
    r_max: f64,
) -> Vec<Option<Hit>> {
    let mut hits = Vec::with_capacity(spec.len());
    for row in 0..spec.height {
        for col in 0..spec.width {
            let (theta, phi) = spec.cell_center(col, row);
            let dir = rotate_z(
                crate::geometry::radial_unit_vector(theta, phi),
                state.heading,
            );
            hits.push(ray_cast_hit(scene, state.position, dir, at_time, r_max));
        }
    }
    hits
}

/// One ray per cell center from the vehicle pose; misses leave the cell
/// EMPTY. Noise-free with default options.
pub fn simulate_scan(
    scene: &Scene,
    state: &VehicleState,
    spec: GridSpec,
    at_time: f64,
) -> RangeImage {
    simulate_scan_with(scene, state, spec, at_time, SimOptions::default())
}

/// Scan with explicit options. With noise enabled, one normal draw is
/// consumed per cell in row-major order, hit or miss, so the pattern
/// depends only on the seed and the grid.
pub fn simulate_scan_with(
    scene: &Scene,
    state: &VehicleState,
    spec: GridSpec,
    at_time: f64,
    opts: SimOptions,
) -> RangeImage {
    let hits = cast_cells(scene, state, spec, at_time, opts.r_max);
    let mut img = RangeImage::empty(spec, at_time);
    let mut rng = (opts.noise_sigma > 0.0).then(|| {
        let normal = Normal::new(0.0, opts.noise_sigma).expect("sigma is positive and finite");
        (ChaCha8Rng::seed_from_u64(opts.seed), normal)
    });
    for row in 0..spec.height {
        for col in 0..spec.width {
            let i = spec.cell_index(col, row);
            let noise = rng.as_mut().map_or(0.0, |(r, n)| n.sample(r));
            if let Some(hit) = hits[i] {
                let r = hit.range + noise;
                if r > 0.0 && r <= opts.r_max {
                    img.set(col, row, r);
                }
            }
        }
    }
    img
}

/// Which object each cell's ray hits, for building per-object masks.
pub fn hit_objects(
    scene: &Scene,
    state: &VehicleState,
    spec: GridSpec,
    at_time: f64,
    r_max: f64,
) -> Vec<Option<usize>> {
    cast_cells(scene, state, spec, at_time, r_max)
        .into_iter()
        .map(|h| h.map(|hit| hit.object))
        .collect()
}

/// True looming of a point moving at `point_vel`, seen from a vehicle at
/// `veh_pos` moving at `veh_vel`: L = −(Δp·Δv)/(Δp·Δp) for relative
/// position Δp and relative velocity Δv.
pub fn ground_truth_looming(
    point_pos: Vec3,
    point_vel: Vec3,
    veh_pos: Vec3,
    veh_vel: Vec3,
) -> Result<Looming, GeometryError> {
    let dp = point_pos - veh_pos;
    let dd = dp.norm_squared();
    if dd == 0.0 {
        return Err(GeometryError::UndefinedAtOrigin);
    }
    let dv = point_vel - veh_vel;
    Ok(Looming(-dp.dot(dv) / dd))
}

/// Analytic ground-truth looming map with the default clamp.
pub fn ground_truth_map(
    scene: &Scene,
    state: &VehicleState,
    spec: GridSpec,
    at_time: f64,
) -> LoomingMap {
    ground_truth_map_clamped(scene, state, spec, at_time, DEFAULT_R_MAX, DEFAULT_CLAMP)
}

/// Analytic ground-truth looming: each cell's ray is cast to find the
/// hit point and owning object, then the exact relative-motion looming
/// is evaluated there. Misses stay EMPTY.
pub fn ground_truth_map_clamped(
    scene: &Scene,
    state: &VehicleState,
    spec: GridSpec,
    at_time: f64,
    r_max: f64,
    l_max: f64,
) -> LoomingMap {
    let veh_vel = state.world_velocity();
    let mut map = LoomingMap::empty(spec, 0.0);
    for row in 0..spec.height {
        for col in 0..spec.width {
            let (theta, phi) = spec.cell_center(col, row);
            let dir = rotate_z(
                crate::geometry::radial_unit_vector(theta, phi),
                state.heading,
            );
            if let Some(hit) = ray_cast_hit(scene, state.position, dir, at_time, r_max) {
                let point = state.position + dir.scaled(hit.range);
                let obj_vel = scene.objects[hit.object].velocity();
                let l = ground_truth_looming(point, obj_vel, state.position, veh_vel)
                    .expect("hit range is positive")
                    .0;
                map.set_clamped(spec.cell_index(col, row), l, l_max);
            }
        }
    }
    map
}
