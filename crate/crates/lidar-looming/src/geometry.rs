//! Coordinate conversions, relative velocity fields, and the looming cue.
//!
//! Conventions: x forward, y left, z up. Azimuth `theta` is measured in
//! the XY-plane from the +x axis, elevation `phi` from the XY-plane
//! toward +z. `theta` lives in [-π, π), `phi` in [-π/2, π/2].
//!
//! Looming of a point at range r with range rate ṙ is L = −ṙ/r, in s⁻¹.
//! Positive looming means the range is closing. For a sensor translating
//! with velocity `t`, L = t·e_r / r, which depends on the translation
//! only; rotation of the sensor contributes nothing to the radial rate.
//!
//! All operations are pure functions over immutable values and are safe
//! to call concurrently.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryError {
    /// The operation needs a nonzero range.
    UndefinedAtOrigin,
    /// Azimuth rate is undefined at the poles (|phi| = π/2).
    DegeneratePole,
    /// An input violated a precondition.
    InvalidInput(&'static str),
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::UndefinedAtOrigin => write!(f, "undefined at zero range"),
            GeometryError::DegeneratePole => {
                write!(f, "azimuth rate degenerate at |phi| = pi/2")
            }
            GeometryError::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl std::error::Error for GeometryError {}

/// Rectilinear 3-vector. Meters for positions, m/s for velocities,
/// rad/s for rotation rates, depending on the call site.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scaled(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        self.scaled(s)
    }
}

/// Wrap an angle into [-π, π).
pub fn normalize_theta(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= PI {
        t - TAU
    } else {
        t
    }
}

/// Spherical coordinates of a point: range, azimuth from +x, elevation
/// from the XY-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoord {
    /// Range in meters, >= 0.
    pub r: f64,
    /// Azimuth in radians, [-π, π).
    pub theta: f64,
    /// Elevation in radians, [-π/2, π/2].
    pub phi: f64,
}

impl SphericalCoord {
    /// Build a coordinate, wrapping `theta` into [-π, π) and clamping
    /// `phi` into [-π/2, π/2].
    pub fn new(r: f64, theta: f64, phi: f64) -> Result<Self, GeometryError> {
        if !r.is_finite() || r < 0.0 {
            return Err(GeometryError::InvalidInput("range must be finite and >= 0"));
        }
        if !theta.is_finite() || !phi.is_finite() {
            return Err(GeometryError::InvalidInput("angles must be finite"));
        }
        Ok(SphericalCoord {
            r,
            theta: normalize_theta(theta),
            phi: phi.clamp(-FRAC_PI_2, FRAC_PI_2),
        })
    }
}

/// Time derivatives of spherical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalRates {
    /// Range rate, m/s.
    pub r_dot: f64,
    /// Azimuth rate, rad/s.
    pub theta_dot: f64,
    /// Elevation rate, rad/s.
    pub phi_dot: f64,
}

/// Looming value in s⁻¹. Positive when the range is closing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Looming(pub f64);

impl Looming {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Convert a rectilinear point to spherical coordinates.
///
/// Uses two-argument arctangents for both angles, so every quadrant is
/// unambiguous. The origin maps to (0, 0, 0) by convention so that the
/// sensor's own location appearing in a cloud is tolerated.
pub fn cart_to_spherical(p: Vec3) -> SphericalCoord {
    let r = p.norm();
    if r == 0.0 {
        return SphericalCoord {
            r: 0.0,
            theta: 0.0,
            phi: 0.0,
        };
    }
    let horiz = (p.x * p.x + p.y * p.y).sqrt();
    SphericalCoord {
        r,
        theta: normalize_theta(p.y.atan2(p.x)),
        phi: p.z.atan2(horiz),
    }
}

/// Convert spherical coordinates back to a rectilinear point.
pub fn spherical_to_cart(s: SphericalCoord) -> Vec3 {
    let (st, ct) = s.theta.sin_cos();
    let (sp, cp) = s.phi.sin_cos();
    Vec3::new(s.r * cp * ct, s.r * cp * st, s.r * sp)
}

/// Unit vector pointing from the origin toward the direction (theta, phi).
pub fn radial_unit_vector(theta: f64, phi: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(ct * cp, st * cp, sp)
}

/// Relative velocity of a stationary scene point as seen from a sensor
/// translating with velocity `t` and rotating with rate `omega`:
/// V = (−t) + (−omega × r).
pub fn relative_velocity_field(t: Vec3, omega: Vec3, r_vec: Vec3) -> Vec3 {
    -t - omega.cross(r_vec)
}

/// Decompose a rectilinear velocity observed at `at` into spherical
/// coordinate rates (ṙ, θ̇, φ̇).
///
/// Fails with [`GeometryError::UndefinedAtOrigin`] at zero range and with
/// [`GeometryError::DegeneratePole`] when |phi| = π/2, where the azimuth
/// rate has no meaning.
pub fn velocity_to_spherical_rates(
    v: Vec3,
    at: SphericalCoord,
) -> Result<SphericalRates, GeometryError> {
    if at.r == 0.0 {
        return Err(GeometryError::UndefinedAtOrigin);
    }
    if at.r < 0.0 || !at.r.is_finite() {
        return Err(GeometryError::InvalidInput("range must be finite and > 0"));
    }
    if at.phi.abs() >= FRAC_PI_2 {
        return Err(GeometryError::DegeneratePole);
    }
    let (st, ct) = at.theta.sin_cos();
    let (sp, cp) = at.phi.sin_cos();
    // Rows of the rectilinear -> spherical rotation applied to v:
    // (ṙ, r θ̇ cos φ, r φ̇).
    let r_dot = ct * cp * v.x + st * cp * v.y + sp * v.z;
    let tangential_theta = -st * v.x + ct * v.y;
    let tangential_phi = -ct * sp * v.x - st * sp * v.y + cp * v.z;
    Ok(SphericalRates {
        r_dot,
        theta_dot: tangential_theta / (at.r * cp),
        phi_dot: tangential_phi / at.r,
    })
}

/// Recompose a rectilinear velocity from spherical rates at `at`.
/// Exact inverse of [`velocity_to_spherical_rates`]; the rotation matrix
/// is orthonormal so its inverse is its transpose.
pub fn spherical_rates_to_velocity(rates: SphericalRates, at: SphericalCoord) -> Vec3 {
    let (st, ct) = at.theta.sin_cos();
    let (sp, cp) = at.phi.sin_cos();
    let u1 = rates.r_dot;
    let u2 = at.r * rates.theta_dot * cp;
    let u3 = at.r * rates.phi_dot;
    Vec3::new(
        ct * cp * u1 - st * u2 - ct * sp * u3,
        st * cp * u1 + ct * u2 - st * sp * u3,
        sp * u1 + cp * u3,
    )
}

/// Looming in vector form: L = (t·r) / (r·r).
pub fn looming_vector_form(t: Vec3, r_vec: Vec3) -> Result<Looming, GeometryError> {
    let rr = r_vec.norm_squared();
    if rr == 0.0 {
        return Err(GeometryError::UndefinedAtOrigin);
    }
    Ok(Looming(t.dot(r_vec) / rr))
}

/// Looming from the radial component of the translation velocity:
/// L = t·e_r / r. Independent of any sensor rotation.
pub fn looming_radial(t: Vec3, at: SphericalCoord) -> Result<Looming, GeometryError> {
    if at.r == 0.0 {
        return Err(GeometryError::UndefinedAtOrigin);
    }
    let e_r = radial_unit_vector(at.theta, at.phi);
    Ok(Looming(t.dot(e_r) / at.r))
}

/// Discrete looming from two range samples dt apart:
/// L = −((r_curr − r_prev)/dt) / r_curr.
///
/// The denominator is the current range, matching what is applied to
/// consecutive range-image grids.
pub fn looming_finite_difference(
    r_prev: f64,
    r_curr: f64,
    dt: f64,
) -> Result<Looming, GeometryError> {
    if r_prev <= 0.0 || r_curr <= 0.0 || !r_prev.is_finite() || !r_curr.is_finite() {
        return Err(GeometryError::InvalidInput("ranges must be finite and > 0"));
    }
    if dt <= 0.0 || !dt.is_finite() {
        return Err(GeometryError::InvalidInput("dt must be finite and > 0"));
    }
    Ok(Looming(-((r_curr - r_prev) / dt) / r_curr))
}
