//! Interaction models and energies of finite configurations.
//!
//! Energies live in the extended reals: `f64::INFINITY` stands for +∞
//! (hard-core exclusion) and propagates through sums unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{ball_volume, dist, norm_sq, sub, Configuration, Cube, Point};

/// Boltzmann weight `e^{-u}` with `e^{-∞} = 0`.
#[inline]
pub fn boltzmann(u: f64) -> f64 {
    if u == f64::INFINITY {
        0.0
    } else {
        (-u).exp()
    }
}

/// Radial pair potential φ ≥ 0 with compact support.
#[derive(Debug, Clone, PartialEq)]
pub enum PairPotential {
    /// `a0 · 1{|x| ≤ r}`; `a0 = ∞` is the hard-core case.
    Strauss { a0: f64, r: f64 },
    /// Step function: `values[i]` on `(radii[i-1], radii[i]]`, zero beyond
    /// the last radius. `support` is the declared range R.
    RadialTable {
        radii: Vec<f64>,
        values: Vec<f64>,
        support: f64,
    },
    Zero,
}

impl PairPotential {
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            PairPotential::Strauss { a0, r: range } => {
                if r <= *range {
                    *a0
                } else {
                    0.0
                }
            }
            PairPotential::RadialTable { radii, values, .. } => {
                // first radius >= r
                let i = radii.partition_point(|&ri| ri < r);
                if i < values.len() {
                    values[i]
                } else {
                    0.0
                }
            }
            PairPotential::Zero => 0.0,
        }
    }

    pub fn range(&self) -> f64 {
        match self {
            PairPotential::Strauss { r, .. } => *r,
            PairPotential::RadialTable { support, .. } => *support,
            PairPotential::Zero => 0.0,
        }
    }

    /// Largest value attained by φ (used by Condition (L) style checks).
    pub fn max_value(&self) -> f64 {
        match self {
            PairPotential::Strauss { a0, .. } => *a0,
            PairPotential::RadialTable { values, .. } => {
                values.iter().copied().fold(0.0, f64::max)
            }
            PairPotential::Zero => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PairPotential::Strauss { a0, r } => {
                if !(*a0 >= 0.0) {
                    return Err(invalid("a0", format!("must be nonnegative, got {a0}")));
                }
                if !(*r > 0.0) || !r.is_finite() {
                    return Err(invalid("r", format!("must be positive, got {r}")));
                }
            }
            PairPotential::RadialTable {
                radii,
                values,
                support,
            } => {
                if radii.is_empty() || radii.len() != values.len() {
                    return Err(invalid("values", "radii and values must be nonempty and of equal length"));
                }
                if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("radii", "must be positive and strictly increasing"));
                }
                if values.iter().any(|v| !(*v >= 0.0)) {
                    return Err(invalid("values", "must be nonnegative or +inf"));
                }
                if !(*support >= radii[radii.len() - 1]) || !support.is_finite() {
                    return Err(invalid("support", "must be finite and cover the last radius"));
                }
            }
            PairPotential::Zero => {}
        }
        Ok(())
    }
}

/// Energy law of the point process.
#[derive(Debug, Clone, PartialEq)]
pub enum Interaction {
    Poisson { intensity: f64 },
    Pairwise { phi: PairPotential, z: f64 },
    /// `U(ω) = scale · |∪ B(x, R/2)|`.
    Area { radius: f64, scale: f64 },
}

/// An interaction law plus the optional percolation threshold used for the
/// advisory Condition (U3) check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "wire::RawModel", into = "wire::RawModel")]
pub struct InteractionModel {
    pub law: Interaction,
    pub mu_d_bound: Option<f64>,
}

impl InteractionModel {
    pub fn new(law: Interaction) -> Result<Self> {
        let m = InteractionModel {
            law,
            mu_d_bound: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn poisson(intensity: f64) -> Result<Self> {
        Self::new(Interaction::Poisson { intensity })
    }

    pub fn strauss(a0: f64, r: f64, z: f64) -> Result<Self> {
        Self::new(Interaction::Pairwise {
            phi: PairPotential::Strauss { a0, r },
            z,
        })
    }

    pub fn pairwise(phi: PairPotential, z: f64) -> Result<Self> {
        Self::new(Interaction::Pairwise { phi, z })
    }

    pub fn free(z: f64) -> Result<Self> {
        Self::pairwise(PairPotential::Zero, z)
    }

    pub fn area(radius: f64, scale: f64) -> Result<Self> {
        Self::new(Interaction::Area { radius, scale })
    }

    pub fn with_mu_d_bound(mut self, bound: f64) -> Self {
        self.mu_d_bound = Some(bound);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.law {
            Interaction::Poisson { intensity } => {
                if !(*intensity > 0.0) || !intensity.is_finite() {
                    return Err(invalid("intensity", format!("must be positive, got {intensity}")));
                }
            }
            Interaction::Pairwise { phi, z } => {
                phi.validate()?;
                if !(*z > 0.0) || !z.is_finite() {
                    return Err(invalid("z", format!("must be positive, got {z}")));
                }
            }
            Interaction::Area { radius, scale } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(invalid("radius", format!("must be positive, got {radius}")));
                }
                if !scale.is_finite() {
                    return Err(invalid("scale", "must be finite"));
                }
            }
        }
        if let Some(m) = self.mu_d_bound {
            if !(m > 0.0) {
                return Err(invalid("mu_d_bound", "must be positive"));
            }
        }
        Ok(())
    }

    /// Interaction range R (zero for models without interaction).
    pub fn range(&self) -> f64 {
        match &self.law {
            Interaction::Poisson { .. } => 0.0,
            Interaction::Pairwise { phi, .. } => phi.range(),
            Interaction::Area { radius, .. } => *radius,
        }
    }

    /// `log z` (or `log μ`); zero for the area model.
    pub fn log_activity(&self) -> f64 {
        match &self.law {
            Interaction::Poisson { intensity } => intensity.ln(),
            Interaction::Pairwise { z, .. } => z.ln(),
            Interaction::Area { .. } => 0.0,
        }
    }

    /// Lower bound b on every local energy, computed from the model.
    pub fn stability_constant(&self, dim: usize) -> f64 {
        match &self.law {
            Interaction::Poisson { intensity } => -intensity.ln(),
            Interaction::Pairwise { z, .. } => -z.ln(),
            Interaction::Area { radius, scale } => scale.min(0.0) * ball_volume(dim, 0.5 * radius),
        }
    }

    /// Dominating Poisson intensity `e^{-b}`.
    pub fn dominating_intensity(&self, dim: usize) -> f64 {
        (-self.stability_constant(dim)).exp()
    }

    /// Advisory Condition (U3) check `R^d e^{-b} < μ_d`. Returns true when a
    /// bound was supplied and the condition fails; d = 1 always passes.
    pub fn u3_warning(&self, dim: usize) -> bool {
        match self.mu_d_bound {
            Some(mu) if dim >= 2 => {
                self.range().powi(dim as i32) * self.dominating_intensity(dim) >= mu
            }
            _ => false,
        }
    }

    pub fn is_interacting(&self) -> bool {
        match &self.law {
            Interaction::Poisson { .. } => false,
            Interaction::Pairwise { phi, .. } => !matches!(phi, PairPotential::Zero),
            Interaction::Area { scale, .. } => *scale != 0.0,
        }
    }

    pub fn pair_potential(&self) -> Option<&PairPotential> {
        match &self.law {
            Interaction::Pairwise { phi, .. } => Some(phi),
            _ => None,
        }
    }

    /// Local energy of `x` against neighbors given as explicit positions
    /// (already unwrapped on the torus). Neighbors beyond the range may be
    /// included; they contribute nothing.
    pub fn local_energy_at(&self, x: &Point, neighbors: &[Point], dim: usize) -> f64 {
        match &self.law {
            Interaction::Poisson { intensity } => -intensity.ln(),
            Interaction::Pairwise { phi, z } => {
                let range = phi.range();
                let r2 = range * range;
                let mut s = 0.0;
                for y in neighbors {
                    let d2 = norm_sq(&sub(x, y));
                    if d2 <= r2 {
                        s += phi.eval(d2.sqrt());
                    }
                }
                s - z.ln()
            }
            Interaction::Area { radius, scale } => {
                let rho = 0.5 * radius;
                let near: Vec<Point> = neighbors
                    .iter()
                    .filter(|y| dist(x, y) < *radius)
                    .copied()
                    .collect();
                scale * area::uncovered_volume(x, &near, rho, dim)
            }
        }
    }
}

/// Wire format for interaction models.
mod wire {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(rename_all = "lowercase")]
    pub enum Kind {
        Poisson,
        Strauss,
        Table,
        Zero,
        Area,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct RawModel {
        pub kind: Kind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub intensity: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::extreal::opt")]
        pub a0: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub r: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub z: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub radii: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::extreal::opt_vec")]
        pub values: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub support: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub radius: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub scale: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub mu_d_bound: Option<f64>,
    }

    fn need(v: Option<f64>, name: &'static str) -> std::result::Result<f64, Error> {
        v.ok_or_else(|| invalid(name, "missing field"))
    }

    impl TryFrom<RawModel> for InteractionModel {
        type Error = Error;

        fn try_from(raw: RawModel) -> std::result::Result<Self, Error> {
            let allowed: &[&str] = match raw.kind {
                Kind::Poisson => &["intensity"],
                Kind::Strauss => &["a0", "r", "z"],
                Kind::Table => &["radii", "values", "support", "z"],
                Kind::Zero => &["z"],
                Kind::Area => &["radius", "scale"],
            };
            let present = [
                ("intensity", raw.intensity.is_some()),
                ("a0", raw.a0.is_some()),
                ("r", raw.r.is_some()),
                ("z", raw.z.is_some()),
                ("radii", raw.radii.is_some()),
                ("values", raw.values.is_some()),
                ("support", raw.support.is_some()),
                ("radius", raw.radius.is_some()),
                ("scale", raw.scale.is_some()),
            ];
            if let Some((name, _)) = present.iter().find(|(n, set)| *set && !allowed.contains(n)) {
                return Err(invalid(name, "not used by this model kind"));
            }
            let law = match raw.kind {
                Kind::Poisson => Interaction::Poisson {
                    intensity: need(raw.intensity, "intensity")?,
                },
                Kind::Strauss => Interaction::Pairwise {
                    phi: PairPotential::Strauss {
                        a0: need(raw.a0, "a0")?,
                        r: need(raw.r, "r")?,
                    },
                    z: raw.z.unwrap_or(1.0),
                },
                Kind::Table => {
                    let radii = raw.radii.ok_or_else(|| invalid("radii", "missing field"))?;
                    let support = raw
                        .support
                        .or_else(|| radii.last().copied())
                        .ok_or_else(|| invalid("support", "missing field"))?;
                    Interaction::Pairwise {
                        phi: PairPotential::RadialTable {
                            radii,
                            values: raw.values.ok_or_else(|| invalid("values", "missing field"))?,
                            support,
                        },
                        z: raw.z.unwrap_or(1.0),
                    }
                }
                Kind::Zero => Interaction::Pairwise {
                    phi: PairPotential::Zero,
                    z: raw.z.unwrap_or(1.0),
                },
                Kind::Area => Interaction::Area {
                    radius: need(raw.radius, "radius")?,
                    scale: raw.scale.unwrap_or(1.0),
                },
            };
            let m = InteractionModel {
                law,
                mu_d_bound: raw.mu_d_bound,
            };
            m.validate()?;
            Ok(m)
        }
    }

    impl From<InteractionModel> for RawModel {
        fn from(m: InteractionModel) -> Self {
            let mut raw = RawModel {
                kind: Kind::Zero,
                intensity: None,
                a0: None,
                r: None,
                z: None,
                radii: None,
                values: None,
                support: None,
                radius: None,
                scale: None,
                mu_d_bound: m.mu_d_bound,
            };
            match m.law {
                Interaction::Poisson { intensity } => {
                    raw.kind = Kind::Poisson;
                    raw.intensity = Some(intensity);
                }
                Interaction::Pairwise { phi, z } => {
                    raw.z = Some(z);
                    match phi {
                        PairPotential::Strauss { a0, r } => {
                            raw.kind = Kind::Strauss;
                            raw.a0 = Some(a0);
                            raw.r = Some(r);
                        }
                        PairPotential::RadialTable {
                            radii,
                            values,
                            support,
                        } => {
                            raw.kind = Kind::Table;
                            raw.radii = Some(radii);
                            raw.values = Some(values);
                            raw.support = Some(support);
                        }
                        PairPotential::Zero => raw.kind = Kind::Zero,
                    }
                }
                Interaction::Area { radius, scale } => {
                    raw.kind = Kind::Area;
                    raw.radius = Some(radius);
                    raw.scale = Some(scale);
                }
            }
            raw
        }
    }
}

/// Uncovered measure of a ball given overlapping neighbor balls of the same
/// radius. Exact in d = 1; ray quadrature in d = 2, 3 (the radial part of
/// each ray is integrated exactly).
pub(crate) mod area {
    use crate::geometry::{ball_volume, Point};
    use std::sync::OnceLock;

    const RAYS_2D: usize = 2048;
    const RAYS_3D: usize = 1024;

    fn directions_3d() -> &'static [[f64; 3]] {
        static DIRS: OnceLock<Vec<[f64; 3]>> = OnceLock::new();
        DIRS.get_or_init(|| {
            // Fibonacci lattice on the unit sphere
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..RAYS_3D)
                .map(|i| {
                    let y = 1.0 - (2.0 * i as f64 + 1.0) / RAYS_3D as f64;
                    let rad = (1.0 - y * y).sqrt();
                    let t = golden * i as f64;
                    [rad * t.cos(), y, rad * t.sin()]
                })
                .collect()
        })
    }

    fn merge(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
        for (a, b) in iv {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        out
    }

    /// Covered part of the ray segment `t ∈ [0, rho]` from `x` along `e`.
    fn ray_cover(x: &Point, e: &[f64; 3], near: &[Point], rho: f64) -> Vec<(f64, f64)> {
        let mut iv = Vec::new();
        for c in near {
            let w = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
            let b = w[0] * e[0] + w[1] * e[1] + w[2] * e[2];
            let cc = w[0] * w[0] + w[1] * w[1] + w[2] * w[2] - rho * rho;
            let disc = b * b - cc;
            if disc <= 0.0 {
                continue;
            }
            let s = disc.sqrt();
            let t1 = (-b - s).max(0.0);
            let t2 = (-b + s).min(rho);
            if t2 > t1 {
                iv.push((t1, t2));
            }
        }
        merge(iv)
    }

    pub fn uncovered_volume(x: &Point, near: &[Point], rho: f64, dim: usize) -> f64 {
        let full = ball_volume(dim, rho);
        if near.is_empty() {
            return full;
        }
        match dim {
            1 => {
                let lo = x[0] - rho;
                let hi = x[0] + rho;
                let iv: Vec<(f64, f64)> = near
                    .iter()
                    .map(|c| ((c[0] - rho).max(lo), (c[0] + rho).min(hi)))
                    .filter(|(a, b)| b > a)
                    .collect();
                let covered: f64 = merge(iv).iter().map(|(a, b)| b - a).sum();
                (full - covered).clamp(0.0, full)
            }
            2 => {
                let mut covered = 0.0;
                for k in 0..RAYS_2D {
                    let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / RAYS_2D as f64;
                    let e = [t.cos(), t.sin(), 0.0];
                    for (a, b) in ray_cover(x, &e, near, rho) {
                        covered += 0.5 * (b * b - a * a);
                    }
                }
                covered *= 2.0 * std::f64::consts::PI / RAYS_2D as f64;
                (full - covered).clamp(0.0, full)
            }
            _ => {
                let mut covered = 0.0;
                for e in directions_3d() {
                    for (a, b) in ray_cover(x, e, near, rho) {
                        covered += (b * b * b - a * a * a) / 3.0;
                    }
                }
                covered *= 4.0 * std::f64::consts::PI / RAYS_3D as f64;
                (full - covered).clamp(0.0, full)
            }
        }
    }
}

/// `U(ω)`: ½Σφ − #ω log z for pairwise models, `scale·|∪B(x,R/2)|` for the
/// area model, `−#ω log μ` for Poisson. `U(∅) = 0`.
pub fn total_energy(omega: &Configuration, model: &InteractionModel) -> f64 {
    energy_of_points(&omega.points, omega.region.dim, model)
}

pub(crate) fn energy_of_points(points: &[Point], dim: usize, model: &InteractionModel) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let n = points.len() as f64;
    match &model.law {
        Interaction::Poisson { intensity } => n * -intensity.ln(),
        Interaction::Pairwise { phi, z } => {
            let mut s = 0.0;
            let range = phi.range();
            for i in 0..points.len() {
                for j in (i + 1)..points.len() {
                    let d = dist(&points[i], &points[j]);
                    if d <= range {
                        s += phi.eval(d);
                    }
                }
            }
            s + n * -z.ln()
        }
        Interaction::Area { .. } => {
            let mut s = 0.0;
            for j in 0..points.len() {
                s += model.local_energy_at(&points[j], &points[..j], dim);
            }
            s
        }
    }
}

/// `u(x; γ)`, the energy cost of adding `x` to `γ`.
pub fn local_energy(x: &Point, gamma: &Configuration, model: &InteractionModel) -> f64 {
    model.local_energy_at(x, &gamma.points, gamma.region.dim)
}

fn check_torus(region: &Cube, model: &InteractionModel) -> Result<()> {
    let range = model.range();
    if region.side <= 2.0 * range {
        return Err(Error::BoxTooSmall {
            side: region.side,
            range,
        });
    }
    Ok(())
}

/// Nearest images of `points` relative to `x` on the torus `region`.
pub(crate) fn images_near(x: &Point, points: &[Point], region: &Cube) -> Vec<Point> {
    points
        .iter()
        .map(|y| {
            let d = region.torus_delta(y, x);
            [x[0] + d[0], x[1] + d[1], x[2] + d[2]]
        })
        .collect()
}

/// Local energy of `x` against `gamma` on the torus `region`.
pub fn periodic_local_energy(
    x: &Point,
    gamma: &[Point],
    region: &Cube,
    model: &InteractionModel,
) -> f64 {
    model.local_energy_at(x, &images_near(x, gamma, region), region.dim)
}

/// `U^per` on the torus carried by `omega.region` (minimal-image metric).
pub fn periodic_energy(omega: &Configuration, model: &InteractionModel) -> Result<f64> {
    let region = &omega.region;
    check_torus(region, model)?;
    let pts = &omega.points;
    if pts.is_empty() {
        return Ok(0.0);
    }
    let n = pts.len() as f64;
    Ok(match &model.law {
        Interaction::Poisson { intensity } => n * -intensity.ln(),
        Interaction::Pairwise { phi, z } => {
            let range = phi.range();
            let mut s = 0.0;
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    let d = region.torus_dist(&pts[i], &pts[j]);
                    if d <= range {
                        s += phi.eval(d);
                    }
                }
            }
            s + n * -z.ln()
        }
        Interaction::Area { .. } => {
            let mut s = 0.0;
            for j in 0..pts.len() {
                s += periodic_local_energy(&pts[j], &pts[..j], region, model);
            }
            s
        }
    })
}

/// `U_{Λ,γ}(ω)`: energy of `ω ⊂ Λ` given the exterior boundary `γ_{Λ^c}`,
/// evaluated as the telescoping sum of local energies.
pub fn conditional_energy(
    omega: &Configuration,
    gamma: &Configuration,
    region: &Cube,
    model: &InteractionModel,
) -> Result<f64> {
    for (i, p) in omega.points.iter().enumerate() {
        if !region.contains(p) {
            return Err(Error::PointOutsideBox { index: i });
        }
    }
    let mut env: Vec<Point> = gamma
        .points
        .iter()
        .filter(|p| !region.contains(p))
        .copied()
        .collect();
    let mut s = 0.0;
    for x in &omega.points {
        s += model.local_energy_at(x, &env, region.dim);
        env.push(*x);
    }
    Ok(s)
}
