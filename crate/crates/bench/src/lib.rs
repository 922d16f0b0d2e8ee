//! Fixed inputs shared by the benchmarks.

use scatterlab::stationary::{spacetime, StationaryMetric};
use scatterlab::{models, Vector};

/// Entry point and projected direction of a ray through the unit cylinder.
pub fn cylinder_ray(theta: f64, slope: f64) -> (Vector, Vector) {
    let (s, c) = theta.sin_cos();
    (
        Vector::from_column_slice(&[0.0, c, s]),
        Vector::from_column_slice(&[1.0, -slope * s, slope * c]),
    )
}

/// Two boundary points of the unit cylinder, `dt` apart in time.
pub fn boundary_pair(theta: f64, separation: f64, dt: f64) -> (Vector, Vector) {
    let at = |a: f64| Vector::from_column_slice(&[a.cos(), a.sin()]);
    (spacetime(0.0, &at(theta)), spacetime(dt, &at(theta + separation)))
}

pub fn rotating_disk() -> StationaryMetric {
    models::stationary_rot(0.2)
}
