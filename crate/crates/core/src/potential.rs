//! Single-site potentials and assembly of the random field `V_ω` on grids.
//!
//! Grid nodes sit at `lower + k·h` along each axis. Dirichlet grids keep the
//! interior nodes `k = 1..M` with `M = L/h − 1`; periodic grids keep
//! `k = 1..=M` with `M = n/h`, node `M` being identified with the lower face.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{norm, point, Cube, Point};

/// Radial shape of one well component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialProfile {
    /// `−depth` on `|x| ≤ radius`.
    Square { depth: f64, radius: f64 },
    /// `−e^{−|x|}/|x|` (d = 3).
    ScreenedCoulomb {},
    /// `amplitude·|x|^{−ν}` on `|x| ≤ cutoff`.
    PowerLaw { nu: f64, amplitude: f64, cutoff: f64 },
    /// `−c·δ` (d = 1).
    Delta { c: f64 },
    /// Linear interpolation of `values` at `radii`, zero beyond the last radius.
    Table { radii: Vec<f64>, values: Vec<f64> },
}

impl RadialProfile {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            RadialProfile::Square { depth, radius } => {
                if !(*depth > 0.0) || !depth.is_finite() {
                    return Err(invalid("depth", "must be positive"));
                }
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(invalid("radius", "must be positive"));
                }
            }
            RadialProfile::ScreenedCoulomb {} => {
                if dim != 3 {
                    return Err(invalid("profile", "screened Coulomb profile requires d = 3"));
                }
            }
            RadialProfile::PowerLaw { nu, amplitude, cutoff } => {
                let hi = 2f64.min(dim as f64 / 2.0);
                if !(*nu > 0.0 && *nu < hi) {
                    return Err(invalid("nu", format!("must lie in (0, {hi})")));
                }
                if !(*amplitude < 0.0) {
                    return Err(invalid("amplitude", "must be negative"));
                }
                if !(*cutoff > 0.0) || !cutoff.is_finite() {
                    return Err(invalid("cutoff", "must be positive"));
                }
            }
            RadialProfile::Delta { c } => {
                if dim != 1 {
                    return Err(invalid("profile", "delta wells exist only in d = 1"));
                }
                if !(*c > 0.0) || !c.is_finite() {
                    return Err(invalid("c", "must be positive"));
                }
            }
            RadialProfile::Table { radii, values } => {
                if radii.is_empty() || radii.len() != values.len() {
                    return Err(invalid("values", "radii and values must be nonempty and of equal length"));
                }
                if radii[0] < 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("radii", "must be nonnegative and strictly increasing"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("values", "must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Support radius (`∞` for the screened Coulomb profile).
    pub fn support(&self) -> f64 {
        match self {
            RadialProfile::Square { radius, .. } => *radius,
            RadialProfile::ScreenedCoulomb {} => f64::INFINITY,
            RadialProfile::PowerLaw { cutoff, .. } => *cutoff,
            RadialProfile::Delta { .. } => 0.0,
            RadialProfile::Table { radii, .. } => radii[radii.len() - 1],
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(
            self,
            RadialProfile::ScreenedCoulomb {} | RadialProfile::PowerLaw { .. } | RadialProfile::Delta { .. }
        )
    }

    /// Pointwise value at radius `r`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        Ok(match self {
            RadialProfile::Square { depth, radius } => {
                if r <= *radius {
                    -depth
                } else {
                    0.0
                }
            }
            RadialProfile::ScreenedCoulomb {} => {
                if r == 0.0 {
                    return Err(Error::SingularPoint);
                }
                -(-r).exp() / r
            }
            RadialProfile::PowerLaw { nu, amplitude, cutoff } => {
                if r == 0.0 {
                    return Err(Error::SingularPoint);
                }
                if r <= *cutoff {
                    amplitude * r.powf(-nu)
                } else {
                    0.0
                }
            }
            RadialProfile::Delta { .. } => {
                if r == 0.0 {
                    return Err(Error::SingularPoint);
                }
                0.0
            }
            RadialProfile::Table { radii, values } => {
                let last = radii.len() - 1;
                if r > radii[last] {
                    0.0
                } else if r <= radii[0] {
                    values[0]
                } else {
                    let i = radii.partition_point(|&x| x < r);
                    let t = (r - radii[i - 1]) / (radii[i] - radii[i - 1]);
                    values[i - 1] + t * (values[i] - values[i - 1])
                }
            }
        })
    }

    /// Essential infimum sign: true when the profile takes negative values.
    pub fn has_negative_part(&self) -> bool {
        match self {
            RadialProfile::Table { values, .. } => values.iter().any(|&v| v < 0.0),
            _ => true,
        }
    }

    /// Radius of the support of the negative part.
    pub fn negative_support(&self) -> f64 {
        match self {
            RadialProfile::Table { radii, values } => {
                let mut s: f64 = 0.0;
                for i in 0..radii.len() {
                    let neg_here = values[i] < 0.0;
                    let neg_next = i + 1 < radii.len() && values[i + 1] < 0.0;
                    if neg_here || neg_next {
                        s = s.max(if neg_next { radii[i + 1] } else { radii[i] });
                    }
                }
                s
            }
            _ => self.support(),
        }
    }
}

/// Grid treatment of a profile at spacing `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regularized {
    pub profile: RadialProfile,
    pub h: f64,
    pub dim: usize,
}

/// Regularize a profile for evaluation on nodes of spacing `h`.
pub fn regularize(profile: &RadialProfile, h: f64, dim: usize) -> Regularized {
    Regularized {
        profile: profile.clone(),
        h,
        dim,
    }
}

/// `∫_0^u sign(t)|t|^{−ν} dt` extended as an odd function.
fn power_primitive(u: f64, nu: f64) -> f64 {
    u.signum() * u.abs().powf(1.0 - nu) / (1.0 - nu)
}

impl Regularized {
    /// Value at a node whose displacement from the well center is `offset`.
    pub fn node_value(&self, offset: &Point) -> f64 {
        let h = self.h;
        let r = norm(offset);
        match &self.profile {
            RadialProfile::Delta { c } => {
                // the nearest node owns the mass; ties go to the upper node
                if offset[0] > -0.5 * h && offset[0] <= 0.5 * h {
                    -c / h
                } else {
                    0.0
                }
            }
            RadialProfile::PowerLaw { nu, amplitude, cutoff } if r < 0.5 * h => {
                if self.dim == 1 {
                    // exact average over the node cell, which contains the center
                    let s = offset[0];
                    amplitude * (power_primitive(s + 0.5 * h, *nu) - power_primitive(s - 0.5 * h, *nu)) / h
                } else {
                    let rho = equal_volume_radius(self.dim, h).min(*cutoff);
                    let d = self.dim as f64;
                    amplitude * d / (d - nu) * rho.powf(-nu)
                }
            }
            RadialProfile::ScreenedCoulomb {} if r < 0.5 * h => {
                let rho = equal_volume_radius(self.dim, h);
                -3.0 / rho.powi(3) * (1.0 - (-rho).exp() * (1.0 + rho))
            }
            p => p.eval(r).unwrap_or(0.0),
        }
    }
}

/// Radius of the ball whose volume equals `h^d`.
fn equal_volume_radius(dim: usize, h: f64) -> f64 {
    let unit = crate::geometry::ball_volume(dim, 1.0);
    (h.powi(dim as i32) / unit).powf(1.0 / dim as f64)
}

/// Exponentially decaying part `V₁(x) = amplitude·e^{−decay·|x|}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tail {
    pub amplitude: f64,
    pub decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Well {
    pub center: Vec<f64>,
    pub b: f64,
    pub profile: RadialProfile,
}

impl Well {
    pub fn center_point(&self) -> Point {
        point(&self.center)
    }
}

/// `V = V₁ + Σ b_i V₃^{(i)}(· − y_i) + V₄ + V₅`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleSitePotential {
    #[serde(default)]
    pub wells: Vec<Well>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<Tail>,
    /// Bounded, sign-indefinite, compactly supported part centered at 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v4: Option<RadialProfile>,
    /// Bounded, nonnegative, compactly supported part centered at 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v5: Option<RadialProfile>,
    /// Declared integrability exponent `p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

/// `p(d)`: 2 for d ≤ 3, d/2 above.
pub fn p_of_d(dim: usize) -> f64 {
    if dim <= 3 {
        2.0
    } else {
        dim as f64 / 2.0
    }
}

impl SingleSitePotential {
    pub fn single(profile: RadialProfile) -> Self {
        SingleSitePotential {
            wells: vec![Well {
                center: vec![0.0],
                b: 1.0,
                profile,
            }],
            tail: None,
            v4: None,
            v5: None,
            p: None,
        }
    }

    pub fn from_wells(wells: Vec<Well>) -> Self {
        SingleSitePotential {
            wells,
            tail: None,
            v4: None,
            v5: None,
            p: None,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        for w in &self.wells {
            if w.center.len() > dim || w.center.iter().any(|c| !c.is_finite()) {
                return Err(invalid("center", format!("must have at most {dim} finite coordinates")));
            }
            if !(w.b > 0.0) || !w.b.is_finite() {
                return Err(invalid("b", "well weights must be positive"));
            }
            w.profile.validate(dim)?;
        }
        if let Some(t) = &self.tail {
            if !(t.decay > 0.0) || !t.amplitude.is_finite() {
                return Err(invalid("tail", "decay must be positive and amplitude finite"));
            }
        }
        for (name, part) in [("v4", &self.v4), ("v5", &self.v5)] {
            if let Some(p) = part {
                p.validate(dim)?;
                if p.is_singular() || !p.support().is_finite() {
                    return Err(invalid(name, "must be bounded with compact support"));
                }
            }
        }
        if let Some(RadialProfile::Table { values, .. }) = &self.v5 {
            if values.iter().any(|&v| v < 0.0) {
                return Err(invalid("v5", "must be nonnegative"));
            }
        } else if self.v5.is_some() {
            return Err(invalid("v5", "must be a nonnegative table profile"));
        }
        Ok(())
    }

    /// Advisory check of the declared exponent against `p(d)`.
    pub fn integrability_warning(&self, dim: usize) -> bool {
        matches!(self.p, Some(p) if p <= p_of_d(dim))
    }

    /// Whether the well supports are pairwise disjoint.
    pub fn wells_disjoint(&self) -> bool {
        for i in 0..self.wells.len() {
            for j in 0..i {
                let d = crate::geometry::dist(&self.wells[i].center_point(), &self.wells[j].center_point());
                if d < self.wells[i].profile.support() + self.wells[j].profile.support() {
                    return false;
                }
            }
        }
        true
    }

    /// Whether the assembled potential takes negative values.
    pub fn essinf_negative(&self) -> bool {
        self.wells.iter().any(|w| w.profile.has_negative_part())
            || self.tail.as_ref().is_some_and(|t| t.amplitude < 0.0)
            || self.v4.as_ref().is_some_and(|p| p.has_negative_part())
    }

    /// Largest distance from the origin at which `V` can be nonzero, before
    /// truncation of infinite-range parts.
    pub fn reach(&self) -> f64 {
        let mut r: f64 = 0.0;
        for w in &self.wells {
            r = r.max(norm(&w.center_point()) + w.profile.support());
        }
        for p in [&self.v4, &self.v5].into_iter().flatten() {
            r = r.max(p.support());
        }
        if self.tail.is_some() {
            r = f64::INFINITY;
        }
        r
    }

    /// Diameter of the union of the well supports.
    pub fn well_diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.wells {
            for b in &self.wells {
                let s = crate::geometry::dist(&a.center_point(), &b.center_point());
                d = d.max(s + a.profile.support() + b.profile.support());
            }
        }
        d
    }

    /// Smallest decay length among the infinite-range parts, if any.
    pub fn decay_rate(&self) -> Option<f64> {
        let mut rate: Option<f64> = self.tail.as_ref().map(|t| t.decay);
        if self
            .wells
            .iter()
            .any(|w| matches!(w.profile, RadialProfile::ScreenedCoulomb {}))
        {
            rate = Some(rate.map_or(1.0, |r: f64| r.min(1.0)));
        }
        rate
    }

    /// Pointwise value `V(x)`.
    pub fn evaluate(&self, x: &Point) -> Result<f64> {
        let mut v = 0.0;
        if let Some(t) = &self.tail {
            v += t.amplitude * (-t.decay * norm(x)).exp();
        }
        for w in &self.wells {
            let c = w.center_point();
            let r = crate::geometry::dist(x, &c);
            v += w.b * w.profile.eval(r)?;
        }
        for p in [&self.v4, &self.v5].into_iter().flatten() {
            v += p.eval(norm(x))?;
        }
        Ok(v)
    }
}

/// `V(x)` for a single-site potential.
pub fn evaluate_single_site(v: &SingleSitePotential, x: &Point) -> Result<f64> {
    v.evaluate(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet,
    /// Quasi-periodic with phase `θ ∈ [0, 2π/n)^d`.
    Bloch { theta: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub region: Cube,
    pub h: f64,
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn dirichlet(region: Cube, h: f64) -> Result<Self> {
        let mut region = region;
        region.periodic = false;
        let g = GridSpec {
            region,
            h,
            boundary: Boundary::Dirichlet,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn bloch(region: Cube, h: f64, theta: [f64; 3]) -> Result<Self> {
        let mut region = region;
        region.periodic = true;
        let g = GridSpec {
            region,
            h,
            boundary: Boundary::Bloch { theta },
        };
        g.validate()?;
        Ok(g)
    }

    pub fn periodic(region: Cube, h: f64) -> Result<Self> {
        Self::bloch(region, h, [0.0; 3])
    }

    pub fn dim(&self) -> usize {
        self.region.dim
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.boundary, Boundary::Bloch { .. })
    }

    pub fn validate(&self) -> Result<()> {
        self.region.validate()?;
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(invalid("h", "must be positive"));
        }
        let ratio = self.region.side / self.h;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(invalid("h", "box side must be an integer multiple of h"));
        }
        if let Boundary::Bloch { theta } = self.boundary {
            if !self.region.periodic {
                return Err(invalid("boundary", "Bloch boundary requires a periodic box"));
            }
            let top = 2.0 * std::f64::consts::PI / self.region.side;
            for &t in &theta[..self.dim()] {
                if !(0.0..top + 1e-12).contains(&t) {
                    return Err(invalid("theta", "must lie in [0, 2π/n)"));
                }
            }
        }
        if self.nodes_per_axis() < 1 {
            return Err(invalid("h", "grid has no interior nodes"));
        }
        Ok(())
    }

    pub fn nodes_per_axis(&self) -> usize {
        let cells = (self.region.side / self.h).round() as usize;
        if self.is_periodic() {
            cells
        } else {
            cells.saturating_sub(1)
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis().pow(self.dim() as u32)
    }

    /// Coordinate of node `k` (1-based) along `axis`.
    #[inline]
    pub fn node_coord(&self, axis: usize, k: i64) -> f64 {
        self.region.lower(axis) + k as f64 * self.h
    }

    /// Position of the node with flat index `idx` (row-major, last axis
    /// fastest).
    pub fn node_position(&self, idx: usize) -> Point {
        let m = self.nodes_per_axis();
        let d = self.dim();
        let mut p = [0.0; 3];
        let mut rest = idx;
        for axis in (0..d).rev() {
            let j = rest % m;
            rest /= m;
            p[axis] = self.node_coord(axis, j as i64 + 1);
        }
        p
    }

    /// Flat index of the node nearest to `x`, if it exists on a Dirichlet
    /// grid (always on a periodic one).
    pub fn nearest_node(&self, x: &Point) -> Option<usize> {
        let m = self.nodes_per_axis() as i64;
        let mut idx = 0usize;
        for axis in 0..self.dim() {
            let t = (x[axis] - self.region.lower(axis)) / self.h;
            let k = (t - 0.5).ceil() as i64;
            let j = if self.is_periodic() {
                (k - 1).rem_euclid(m)
            } else if k >= 1 && k <= m {
                k - 1
            } else {
                return None;
            };
            idx = idx * m as usize + j as usize;
        }
        Some(idx)
    }
}

/// A dense grid array of field values.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    /// Per-point bound on the contribution discarded by the cutoff.
    pub truncation_bound: f64,
    pub cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub dim: usize,
    pub nodes_per_axis: usize,
    pub h: f64,
    pub lower: Vec<f64>,
    pub boundary: Boundary,
    pub layout: String,
    pub truncation_bound: f64,
    pub cutoff: f64,
}

impl Field {
    pub fn zeros(grid: &GridSpec) -> Self {
        Field {
            grid: *grid,
            values: vec![0.0; grid.node_count()],
            truncation_bound: 0.0,
            cutoff: 0.0,
        }
    }

    pub fn scaled(&self, g: f64) -> Field {
        Field {
            values: self.values.iter().map(|v| g * v).collect(),
            ..self.clone()
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn header(&self) -> FieldHeader {
        let d = self.grid.dim();
        FieldHeader {
            dim: d,
            nodes_per_axis: self.grid.nodes_per_axis(),
            h: self.grid.h,
            lower: (0..d).map(|i| self.grid.node_coord(i, 1)).collect(),
            boundary: self.grid.boundary,
            layout: "row-major f64 little-endian, last axis fastest".into(),
            truncation_bound: self.truncation_bound,
            cutoff: self.cutoff,
        }
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Default truncation radius for infinite-range parts: `10/decay`.
pub fn default_cutoff(v: &SingleSitePotential) -> f64 {
    match v.decay_rate() {
        Some(rate) => 10.0 / rate,
        None => v.reach().max(0.0),
    }
}

/// `V_ω = Σ_{x∈ω} V(· − x)` on the nodes of `grid`. On a periodic grid all
/// images within the cutoff contribute.
pub fn assemble_field(
    v: &SingleSitePotential,
    points: &[Point],
    grid: &GridSpec,
    cutoff: Option<f64>,
) -> Result<Field> {
    let weighted: Vec<(Point, f64)> = points.iter().map(|p| (*p, 1.0)).collect();
    assemble_weighted(v, &weighted, grid, cutoff)
}

/// `Σ_j c_j V(· − x_j)` on the nodes of `grid`.
pub fn assemble_weighted(
    v: &SingleSitePotential,
    points: &[(Point, f64)],
    grid: &GridSpec,
    cutoff: Option<f64>,
) -> Result<Field> {
    grid.validate()?;
    let dim = grid.dim();
    v.validate(dim)?;
    let cutoff = cutoff.unwrap_or_else(|| default_cutoff(v));
    let mut truncation_bound = 0.0;
    if let Some(rate) = v.decay_rate() {
        let required = 5.0 / rate;
        if cutoff < required {
            return Err(Error::CutoffTooSmall { cutoff, required });
        }
        let amp = v.tail.as_ref().map_or(0.0, |t| t.amplitude.abs());
        let coulomb: f64 = v
            .wells
            .iter()
            .filter(|w| matches!(w.profile, RadialProfile::ScreenedCoulomb {}))
            .map(|w| w.b / cutoff)
            .sum();
        truncation_bound = amp * (-rate * cutoff).exp() + coulomb * (-cutoff).exp();
    }
    let mut field = Field::zeros(grid);
    field.truncation_bound = truncation_bound;
    field.cutoff = cutoff;
    for (x, weight) in points {
        if let Some(t) = &v.tail {
            stamp(&mut field.values, grid, x, cutoff, |off| {
                t.amplitude * (-t.decay * norm(off)).exp()
            }, *weight);
        }
        for w in &v.wells {
            let c = w.center_point();
            let center = [x[0] + c[0], x[1] + c[1], x[2] + c[2]];
            let reg = regularize(&w.profile, grid.h, dim);
            let b = w.b * weight;
            match &w.profile {
                RadialProfile::Delta { c } => {
                    if let Some(idx) = grid.nearest_node(&center) {
                        field.values[idx] += b * (-c / grid.h);
                    }
                }
                p => {
                    let reach = p.support().min(cutoff);
                    stamp(&mut field.values, grid, &center, reach, |off| reg.node_value(off), b);
                }
            }
        }
        for p in [&v.v4, &v.v5].into_iter().flatten() {
            let reg = regularize(p, grid.h, dim);
            stamp(&mut field.values, grid, x, p.support(), |off| reg.node_value(off), *weight);
        }
    }
    Ok(field)
}

/// Add `weight·f(node − center)` to every node within `reach` of `center`,
/// wrapping indices on periodic grids.
fn stamp(
    values: &mut [f64],
    grid: &GridSpec,
    center: &Point,
    reach: f64,
    f: impl Fn(&Point) -> f64,
    weight: f64,
) {
    let dim = grid.dim();
    let m = grid.nodes_per_axis() as i64;
    let periodic = grid.is_periodic();
    let mut lo = [1i64; 3];
    let mut hi = [1i64; 3];
    for axis in 0..dim {
        let base = grid.region.lower(axis);
        let a = ((center[axis] - reach - base) / grid.h).ceil() as i64;
        let b = ((center[axis] + reach - base) / grid.h).floor() as i64;
        if periodic {
            lo[axis] = a;
            hi[axis] = b;
        } else {
            lo[axis] = a.max(1);
            hi[axis] = b.min(m);
        }
        if lo[axis] > hi[axis] {
            return;
        }
    }
    let r2 = reach * reach;
    let wrap = |k: i64| -> usize { (k - 1).rem_euclid(m) as usize };
    let mut k = lo;
    loop {
        let mut off = [0.0; 3];
        let mut d2 = 0.0;
        for axis in 0..dim {
            off[axis] = grid.node_coord(axis, k[axis]) - center[axis];
            d2 += off[axis] * off[axis];
        }
        if d2 <= r2 {
            let mut idx = 0usize;
            for &ka in k.iter().take(dim) {
                idx = idx * m as usize + wrap(ka);
            }
            values[idx] += weight * f(&off);
        }
        // odometer over the index box, last axis fastest
        let mut axis = dim;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if k[axis] < hi[axis] {
                k[axis] += 1;
                break;
            }
            k[axis] = lo[axis];
        }
    }
}
