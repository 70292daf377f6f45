//! Looming estimation from LiDAR range data.
//!
//! Looming is the negative rate of change of range over range, −ṙ/r,
//! measured in s⁻¹. A positive value means the range to a point is
//! shrinking and the point is a potential collision threat. The crate
//! estimates looming fields from raw LiDAR data by two routes:
//!
//! * two consecutive spherical range-image grids ([`looming::loom_from_grids`]),
//! * per-point range combined with the vehicle translation velocity
//!   ([`looming::loom_from_velocity`]),
//!
//! and turns looming fields into ordinal threat-zone maps. The [`synth`]
//! module is a ray-casting LiDAR simulator with analytic ground-truth
//! looming, used as the oracle for end-to-end validation. [`io`] covers
//! the on-disk formats: Velodyne `.bin` clouds, `RGRID`/`LGRID` grid
//! files, PPM renderings, and ego-motion logs.

pub mod config;
pub mod geometry;
pub mod io;
pub mod looming;
pub mod range_image;
pub mod synth;

pub use geometry::{Looming, SphericalCoord, SphericalRates, Vec3};
pub use looming::{LoomingMap, ThreatClass, ThreatMap};
pub use range_image::{GridSpec, PointCloud, RangeImage};
