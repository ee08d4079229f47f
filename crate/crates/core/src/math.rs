//! Small 2-D vector helpers and `libm` wrappers usable without `std`.

pub type Vec2 = [f64; 2];

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub fn asin(x: f64) -> f64 {
    libm::asin(x)
}

#[inline]
pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(a: Vec2, s: f64) -> Vec2 {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// z-component of the planar cross product `a × b`.
#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    libm::hypot(a[0], a[1])
}

/// Applies `R(r) = [[c, -s], [s, c]]` to `v`.
#[inline]
pub fn rotate(r: Vec2, v: Vec2) -> Vec2 {
    [r[0] * v[0] - r[1] * v[1], r[1] * v[0] + r[0] * v[1]]
}

/// Applies `R(r)^T` to `v`.
#[inline]
pub fn rotate_inv(r: Vec2, v: Vec2) -> Vec2 {
    [r[0] * v[0] + r[1] * v[1], -r[1] * v[0] + r[0] * v[1]]
}

/// Unit rotation parameters `(cos θ, sin θ)`.
#[inline]
pub fn rot_from_angle(theta: f64) -> Vec2 {
    [cos(theta), sin(theta)]
}

#[inline]
pub fn angle_of(r: Vec2) -> f64 {
    atan2(r[1], r[0])
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut t = libm::fmod(theta + core::f64::consts::PI, two_pi);
    if t < 0.0 {
        t += two_pi;
    }
    t - core::f64::consts::PI
}
