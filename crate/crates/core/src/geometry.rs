//! Boxes, torus geometry and finite configurations.
//!
//! Points are stored as `[f64; 3]` regardless of the ambient dimension;
//! coordinates beyond the dimension are kept at zero so that Euclidean
//! distances need no dimension argument.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Point = [f64; 3];

pub const ORIGIN: Point = [0.0; 3];

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn norm_sq(a: &Point) -> f64 {
    a[0] * a[0] + a[1] * a[1] + a[2] * a[2]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

/// Build a point from a coordinate slice of length 1 to 3.
pub fn point(coords: &[f64]) -> Point {
    let mut p = ORIGIN;
    for (dst, src) in p.iter_mut().zip(coords) {
        *dst = *src;
    }
    p
}

/// Lebesgue measure of the closed ball of radius `r` in dimension `dim`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    match dim {
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        3 => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
        _ => f64::NAN,
    }
}

/// The half-open cube `Π (c_i - n/2, c_i + n/2]`, optionally identified
/// with the torus `R^d / nZ^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub dim: usize,
    pub side: f64,
    pub center: Point,
    #[serde(default)]
    pub periodic: bool,
}

impl Cube {
    pub fn new(dim: usize, side: f64, center: Point) -> Result<Self> {
        let cube = Cube {
            dim,
            side,
            center,
            periodic: false,
        };
        cube.validate()?;
        Ok(cube)
    }

    /// Centered cube `Λ_n`.
    pub fn centered(dim: usize, side: f64) -> Result<Self> {
        Self::new(dim, side, ORIGIN)
    }

    pub fn torus(dim: usize, side: f64) -> Result<Self> {
        Ok(Self::centered(dim, side)?.with_periodic(true))
    }

    pub fn with_periodic(mut self, periodic: bool) -> Self {
        self.periodic = periodic;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(invalid("dim", format!("must be 1, 2 or 3, got {}", self.dim)));
        }
        if !(self.side > 0.0) || !self.side.is_finite() {
            return Err(invalid("side", format!("must be positive, got {}", self.side)));
        }
        if self.center[self.dim..].iter().any(|&c| c != 0.0) {
            return Err(invalid("center", "unused coordinates must be zero"));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.center[axis] - 0.5 * self.side
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.center[axis] + 0.5 * self.side
    }

    /// Membership in the half-open cube.
    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim).all(|i| p[i] > self.lower(i) && p[i] <= self.upper(i))
            && p[self.dim..].iter().all(|&c| c == 0.0)
    }

    /// Concentric cube with a different side length.
    pub fn concentric(&self, side: f64) -> Result<Cube> {
        let mut c = *self;
        c.side = side;
        c.periodic = false;
        c.validate()?;
        Ok(c)
    }

    /// Uniform draw from the half-open cube.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let mut p = ORIGIN;
        for (i, coord) in p.iter_mut().enumerate().take(self.dim) {
            // 1 - U lies in (0, 1], matching the half-open convention
            let u: f64 = rng.gen::<f64>();
            *coord = self.lower(i) + self.side * (1.0 - u);
        }
        p
    }

    /// Map a point onto the fundamental cell of the torus.
    pub fn wrap(&self, p: &Point) -> Point {
        let mut q = *p;
        for (i, coord) in q.iter_mut().enumerate().take(self.dim) {
            let lo = self.lower(i);
            let mut t = (*coord - lo) / self.side;
            t -= t.floor();
            // t in [0,1); shift 0 to 1 for the half-open (lo, hi] cell
            if t == 0.0 {
                t = 1.0;
            }
            *coord = lo + t * self.side;
            if *coord <= lo {
                *coord = self.upper(i);
            }
        }
        q
    }

    /// Minimal-image displacement `a - b` on the torus.
    #[inline]
    pub fn torus_delta(&self, a: &Point, b: &Point) -> Point {
        let mut d = sub(a, b);
        for c in d.iter_mut().take(self.dim) {
            *c -= self.side * (*c / self.side).round();
        }
        d
    }

    #[inline]
    pub fn torus_dist(&self, a: &Point, b: &Point) -> f64 {
        norm(&self.torus_delta(a, b))
    }

    /// Euclidean distance from `p` to the closed cube (zero inside).
    pub fn distance_to(&self, p: &Point) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            let lo = self.lower(i);
            let hi = self.upper(i);
            let e = if p[i] < lo {
                lo - p[i]
            } else if p[i] > hi {
                p[i] - hi
            } else {
                0.0
            };
            s += e * e;
        }
        s.sqrt()
    }
}

/// A finite point set inside a cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub region: Cube,
    pub points: Vec<Point>,
}

impl Configuration {
    pub fn empty(region: Cube) -> Self {
        Configuration {
            region,
            points: Vec::new(),
        }
    }

    /// Checked constructor: points must be inside the region and distinct.
    pub fn new(region: Cube, points: Vec<Point>) -> Result<Self> {
        region.validate()?;
        for (i, p) in points.iter().enumerate() {
            if !region.contains(p) {
                return Err(Error::PointOutsideBox { index: i });
            }
        }
        let mut sorted: Vec<&Point> = points.iter().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("points", "configuration contains coincident points"));
        }
        Ok(Configuration { region, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of points inside `sub` (the counting function m(ω, Λ')).
    pub fn count_in(&self, sub: &Cube) -> usize {
        self.points.iter().filter(|p| sub.contains(p)).count()
    }

    /// Points of `self` that lie inside `sub`.
    pub fn restrict(&self, sub: &Cube) -> Vec<Point> {
        self.points.iter().copied().filter(|p| sub.contains(p)).collect()
    }

    /// CSV dump: one point per row, columns `x1..xd`.
    pub fn to_csv(&self) -> String {
        let d = self.region.dim;
        let mut out = String::new();
        let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for p in &self.points {
            let row: Vec<String> = p[..d].iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}
