//! Poisson and Gibbs samplers, the quadrature count oracle, and sampler
//! diagnostics.
//!
//! Gibbs laws are targeted with a birth/death/translate Metropolis-Hastings
//! chain. Every chain starts from the empty configuration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Configuration, Cube, Point, ORIGIN};
use crate::pointproc::{boltzmann, Interaction, InteractionModel};

/// A named, reproducible generator: ChaCha8 seeded from a 64-bit seed, with
/// an independent stream per work unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState { seed, stream: 0 }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        RngState { stream, ..self }
    }

    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Missing fields take the defaults of [`ChainSettings::with_sweeps`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawChainSettings")]
pub struct ChainSettings {
    pub sweeps: usize,
    pub burn_in: usize,
    pub p_birth: f64,
    pub p_death: f64,
    pub p_translate: f64,
    /// Radius of the translate proposal ball; defaults to R/2.
    #[serde(default)]
    pub step: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChainSettings {
    #[serde(default = "default_sweeps")]
    sweeps: usize,
    burn_in: Option<usize>,
    p_birth: Option<f64>,
    p_death: Option<f64>,
    p_translate: Option<f64>,
    #[serde(default)]
    step: Option<f64>,
}

fn default_sweeps() -> usize {
    200
}

impl From<RawChainSettings> for ChainSettings {
    fn from(r: RawChainSettings) -> Self {
        let d = ChainSettings::with_sweeps(r.sweeps);
        ChainSettings {
            sweeps: r.sweeps,
            burn_in: r.burn_in.unwrap_or(d.burn_in),
            p_birth: r.p_birth.unwrap_or(d.p_birth),
            p_death: r.p_death.unwrap_or(d.p_death),
            p_translate: r.p_translate.unwrap_or(d.p_translate),
            step: r.step,
        }
    }
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self::with_sweeps(200)
    }
}

impl ChainSettings {
    pub fn with_sweeps(sweeps: usize) -> Self {
        ChainSettings {
            sweeps,
            burn_in: sweeps / 5,
            p_birth: 0.35,
            p_death: 0.35,
            p_translate: 0.30,
            step: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ps = [self.p_birth, self.p_death, self.p_translate];
        if ps.iter().any(|p| !(*p >= 0.0)) {
            return Err(invalid("p_birth", "move probabilities must be nonnegative"));
        }
        if (ps.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(invalid("p_translate", "move probabilities must sum to 1"));
        }
        if self.p_birth == 0.0 || self.p_death == 0.0 {
            return Err(Error::NonErgodicSettings);
        }
        if self.burn_in > self.sweeps {
            return Err(invalid("burn_in", "must not exceed sweeps"));
        }
        if let Some(s) = self.step {
            if !(s > 0.0) {
                return Err(invalid("step", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Law of a point count truncated at `kmax`, with the remaining mass in
/// `tail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountPmf {
    pub probs: Vec<f64>,
    pub tail: f64,
}

impl CountPmf {
    pub fn from_counts(counts: &[usize], kmax: usize) -> Self {
        let mut probs = vec![0.0; kmax + 1];
        let mut tail = 0.0;
        let w = 1.0 / counts.len().max(1) as f64;
        for &c in counts {
            if c <= kmax {
                probs[c] += w;
            } else {
                tail += w;
            }
        }
        CountPmf { probs, tail }
    }

    pub fn poisson(lambda: f64, kmax: usize) -> Self {
        let mut probs = Vec::with_capacity(kmax + 1);
        let mut p = (-lambda).exp();
        for k in 0..=kmax {
            probs.push(p);
            p *= lambda / (k + 1) as f64;
        }
        let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
        CountPmf { probs, tail }
    }

    pub fn kmax(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.tail
    }

    /// Total variation distance with the tail treated as one category.
    /// Both laws are truncated to the smaller `kmax`.
    pub fn tv_distance(&self, other: &CountPmf) -> f64 {
        let k = self.kmax().min(other.kmax());
        let fold = |p: &CountPmf| p.tail + p.probs[k + 1..].iter().sum::<f64>();
        let mut s: f64 = (0..=k).map(|i| (self.probs[i] - other.probs[i]).abs()).sum();
        s += (fold(self) - fold(other)).abs();
        0.5 * s
    }

    /// Mean of the truncated part (tail excluded).
    pub fn partial_mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}

pub fn sample_poisson<R: Rng + ?Sized>(region: &Cube, intensity: f64, rng: &mut R) -> Result<Configuration> {
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(invalid("intensity", "must be nonnegative and finite"));
    }
    let lambda = intensity * region.volume();
    let n = if lambda > 0.0 {
        Poisson::new(lambda)
            .map_err(|e| invalid("intensity", e.to_string()))?
            .sample(rng) as usize
    } else {
        0
    };
    let points = (0..n).map(|_| region.sample_uniform(rng)).collect();
    Ok(Configuration {
        region: *region,
        points,
    })
}

/// Uniform grid of cells of side at least the interaction range, used for
/// neighbor lookup.
#[derive(Debug, Clone)]
struct CellGrid {
    dim: usize,
    lo: [f64; 3],
    size: [f64; 3],
    counts: [usize; 3],
    periodic: bool,
    cells: Vec<Vec<u32>>,
}

const MAX_CELLS: usize = 1 << 21;

impl CellGrid {
    fn new(lo: [f64; 3], side: f64, dim: usize, range: f64, periodic: bool) -> Self {
        let per_axis_cap = (MAX_CELLS as f64).powf(1.0 / dim as f64).floor() as usize;
        let mut n = if range > 0.0 {
            (side / range).floor() as usize
        } else {
            1
        };
        n = n.clamp(1, per_axis_cap.max(1));
        let mut counts = [1; 3];
        let mut size = [1.0; 3];
        for i in 0..dim {
            counts[i] = n;
            size[i] = side / n as f64;
        }
        let total = counts.iter().product();
        CellGrid {
            dim,
            lo,
            size,
            counts,
            periodic,
            cells: vec![Vec::new(); total],
        }
    }

    #[inline]
    fn coord(&self, p: &Point, i: usize) -> usize {
        let c = ((p[i] - self.lo[i]) / self.size[i]).floor();
        (c.max(0.0) as usize).min(self.counts[i] - 1)
    }

    #[inline]
    fn index(&self, c: [usize; 3]) -> usize {
        (c[0] * self.counts[1] + c[1]) * self.counts[2] + c[2]
    }

    #[inline]
    fn cell_of(&self, p: &Point) -> usize {
        let mut c = [0; 3];
        for (i, ci) in c.iter_mut().enumerate().take(self.dim) {
            *ci = self.coord(p, i);
        }
        self.index(c)
    }

    fn insert(&mut self, p: &Point, id: u32) {
        let c = self.cell_of(p);
        self.cells[c].push(id);
    }

    fn remove(&mut self, p: &Point, id: u32) {
        let c = self.cell_of(p);
        let v = &mut self.cells[c];
        if let Some(pos) = v.iter().position(|&j| j == id) {
            v.swap_remove(pos);
        }
    }

    fn rename(&mut self, p: &Point, from: u32, to: u32) {
        let c = self.cell_of(p);
        if let Some(slot) = self.cells[c].iter_mut().find(|j| **j == from) {
            *slot = to;
        }
    }

    /// Cells within one step of the cell of `p`, deduplicated.
    fn neighborhood(&self, p: &Point, out: &mut Vec<usize>) {
        out.clear();
        let mut base = [0i64; 3];
        for (i, b) in base.iter_mut().enumerate().take(self.dim) {
            *b = self.coord(p, i) as i64;
        }
        let span = |i: usize| if i < self.dim { -1..=1i64 } else { 0..=0i64 };
        for a in span(0) {
            for b in span(1) {
                for c in span(2) {
                    let raw = [base[0] + a, base[1] + b, base[2] + c];
                    let mut idx = [0usize; 3];
                    let mut ok = true;
                    for i in 0..3 {
                        let n = self.counts[i] as i64;
                        let v = raw[i];
                        if v < 0 || v >= n {
                            if self.periodic && i < self.dim {
                                idx[i] = v.rem_euclid(n) as usize;
                            } else {
                                ok = false;
                            }
                        } else {
                            idx[i] = v as usize;
                        }
                    }
                    if ok {
                        let k = self.index(idx);
                        if !out.contains(&k) {
                            out.push(k);
                        }
                    }
                }
            }
        }
    }
}

/// Birth/death/translate Metropolis-Hastings chain targeting either the
/// conditional Gibbs law on a box with fixed exterior boundary, or the
/// periodic Gibbs law on a torus.
#[derive(Debug, Clone)]
pub struct Chain {
    model: InteractionModel,
    region: Cube,
    periodic: bool,
    volume: f64,
    p_birth: f64,
    p_death: f64,
    step: f64,
    sweep_len: usize,
    points: Vec<Point>,
    boundary: Vec<Point>,
    grid: Option<CellGrid>,
    boundary_grid: Option<CellGrid>,
    constant_u: Option<f64>,
    scratch_cells: Vec<usize>,
    scratch_pts: Vec<Point>,
}

impl Chain {
    /// Chain for `P^Gib_{Λ,γ}`; only boundary points outside Λ and within
    /// the interaction range of Λ are kept.
    pub fn conditional(
        model: &InteractionModel,
        region: &Cube,
        gamma: &[Point],
        settings: &ChainSettings,
    ) -> Result<Self> {
        let mut region = *region;
        region.periodic = false;
        Self::build(model, region, gamma, settings)
    }

    /// Chain for `P^per_{Λ_n}` on the torus carried by `torus`.
    pub fn periodic(model: &InteractionModel, torus: &Cube, settings: &ChainSettings) -> Result<Self> {
        let range = model.range();
        if torus.side <= 2.0 * range {
            return Err(Error::BoxTooSmall {
                side: torus.side,
                range,
            });
        }
        let mut region = *torus;
        region.periodic = true;
        Self::build(model, region, &[], settings)
    }

    fn build(model: &InteractionModel, region: Cube, gamma: &[Point], settings: &ChainSettings) -> Result<Self> {
        settings.validate()?;
        model.validate()?;
        region.validate()?;
        let dim = region.dim;
        let range = model.range();
        let constant_u = if model.is_interacting() {
            None
        } else {
            Some(model.local_energy_at(&ORIGIN, &[], dim))
        };
        let periodic = region.periodic;
        let boundary: Vec<Point> = if periodic || constant_u.is_some() {
            Vec::new()
        } else {
            gamma
                .iter()
                .filter(|p| !region.contains(p) && region.distance_to(p) <= range)
                .copied()
                .collect()
        };
        let (grid, boundary_grid) = if constant_u.is_some() {
            (None, None)
        } else if periodic {
            let mut lo = [0.0; 3];
            for (i, l) in lo.iter_mut().enumerate().take(dim) {
                *l = region.lower(i);
            }
            (Some(CellGrid::new(lo, region.side, dim, range, true)), None)
        } else {
            let mut lo = [0.0; 3];
            for (i, l) in lo.iter_mut().enumerate().take(dim) {
                *l = region.lower(i) - range;
            }
            let side = region.side + 2.0 * range;
            let g = CellGrid::new(lo, side, dim, range, false);
            let mut bg = g.clone();
            for (j, p) in boundary.iter().enumerate() {
                bg.insert(p, j as u32);
            }
            (Some(g), Some(bg))
        };
        let step = settings.step.unwrap_or(if range > 0.0 { 0.5 * range } else { 0.5 });
        let mean = model.dominating_intensity(dim) * region.volume();
        let sweep_len = if mean.is_finite() { (mean.ceil() as usize).max(1) } else { 1 };
        Ok(Chain {
            model: model.clone(),
            region,
            periodic,
            volume: region.volume(),
            p_birth: settings.p_birth,
            p_death: settings.p_death,
            step,
            sweep_len,
            points: Vec::new(),
            boundary,
            grid,
            boundary_grid,
            constant_u,
            scratch_cells: Vec::new(),
            scratch_pts: Vec::new(),
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn region(&self) -> &Cube {
        &self.region
    }

    pub fn sweep_len(&self) -> usize {
        self.sweep_len
    }

    pub fn configuration(&self) -> Configuration {
        Configuration {
            region: self.region,
            points: self.points.clone(),
        }
    }

    /// Replace the state. Points must lie in the region.
    pub fn set_state(&mut self, pts: &[Point]) -> Result<()> {
        for (i, p) in pts.iter().enumerate() {
            if !self.region.contains(p) {
                return Err(Error::PointOutsideBox { index: i });
            }
        }
        self.points.clear();
        if let Some(g) = self.grid.as_mut() {
            for c in g.cells.iter_mut() {
                c.clear();
            }
        }
        for p in pts {
            self.push_point(*p);
        }
        Ok(())
    }

    fn push_point(&mut self, p: Point) {
        let id = self.points.len() as u32;
        if let Some(g) = self.grid.as_mut() {
            g.insert(&p, id);
        }
        self.points.push(p);
    }

    fn remove_point(&mut self, i: usize) {
        let last = self.points.len() - 1;
        let p = self.points[i];
        if let Some(g) = self.grid.as_mut() {
            g.remove(&p, i as u32);
            if i != last {
                let q = self.points[last];
                g.rename(&q, last as u32, i as u32);
            }
        }
        self.points.swap_remove(i);
    }

    fn move_point(&mut self, i: usize, to: Point) {
        let from = self.points[i];
        if let Some(g) = self.grid.as_mut() {
            g.remove(&from, i as u32);
            g.insert(&to, i as u32);
        }
        self.points[i] = to;
    }

    /// `u(x; current ∪ boundary)`, skipping point `skip` of the state.
    pub fn local_energy(&mut self, x: &Point, skip: Option<usize>) -> f64 {
        if let Some(u) = self.constant_u {
            return u;
        }
        let grid = self.grid.as_ref().expect("interacting chains carry a grid");
        grid.neighborhood(x, &mut self.scratch_cells);
        self.scratch_pts.clear();
        for &c in &self.scratch_cells {
            for &j in &grid.cells[c] {
                if Some(j as usize) == skip {
                    continue;
                }
                let y = &self.points[j as usize];
                if self.periodic {
                    let d = self.region.torus_delta(y, x);
                    self.scratch_pts.push([x[0] + d[0], x[1] + d[1], x[2] + d[2]]);
                } else {
                    self.scratch_pts.push(*y);
                }
            }
            if let Some(bg) = &self.boundary_grid {
                for &j in &bg.cells[c] {
                    self.scratch_pts.push(self.boundary[j as usize]);
                }
            }
        }
        self.model
            .local_energy_at(x, &self.scratch_pts, self.region.dim)
    }

    /// Metropolis-Hastings ratio for adding `x` to the current state.
    pub fn birth_ratio(&mut self, x: &Point) -> f64 {
        let k = self.points.len() as f64;
        let u = self.local_energy(x, None);
        self.p_death / self.p_birth * self.volume / (k + 1.0) * boltzmann(u)
    }

    /// Metropolis-Hastings ratio for removing point `i`.
    pub fn death_ratio(&mut self, i: usize) -> f64 {
        let k = self.points.len() as f64;
        let x = self.points[i];
        let u = self.local_energy(&x, Some(i));
        self.p_birth / self.p_death * k / self.volume * (u).exp()
    }

    fn propose_shift<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let dim = self.region.dim;
        loop {
            let mut v = ORIGIN;
            let mut s = 0.0;
            for c in v.iter_mut().take(dim) {
                *c = rng.gen_range(-1.0..1.0);
                s += *c * *c;
            }
            if s <= 1.0 {
                for c in v.iter_mut().take(dim) {
                    *c *= self.step;
                }
                return v;
            }
        }
    }

    /// One elementary move.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let m: f64 = rng.gen();
        if m < self.p_birth {
            let x = self.region.sample_uniform(rng);
            let r = self.birth_ratio(&x);
            if rng.gen::<f64>() < r {
                self.push_point(x);
            }
        } else if m < self.p_birth + self.p_death {
            if self.points.is_empty() {
                return;
            }
            let i = rng.gen_range(0..self.points.len());
            let r = self.death_ratio(i);
            if rng.gen::<f64>() < r {
                self.remove_point(i);
            }
        } else {
            if self.points.is_empty() {
                return;
            }
            let i = rng.gen_range(0..self.points.len());
            let old = self.points[i];
            let d = self.propose_shift(rng);
            let mut new = [old[0] + d[0], old[1] + d[1], old[2] + d[2]];
            if self.periodic {
                new = self.region.wrap(&new);
            } else if !self.region.contains(&new) {
                return;
            }
            let u_new = self.local_energy(&new, Some(i));
            if u_new == f64::INFINITY {
                return;
            }
            let u_old = self.local_energy(&old, Some(i));
            let accept = u_old == f64::INFINITY || rng.gen::<f64>() < (u_old - u_new).exp();
            if accept {
                self.move_point(i, new);
            }
        }
    }

    /// One sweep: a fixed number of elementary moves, the dominating
    /// Poisson mean `⌈e^{-b}|Λ|⌉`. A length tied to the current count would
    /// make the observed chain favour sparse states.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for _ in 0..self.sweep_len {
            self.step(rng);
        }
    }

    pub fn run<R: Rng + ?Sized>(&mut self, sweeps: usize, rng: &mut R) {
        for _ in 0..sweeps {
            self.sweep(rng);
        }
    }
}

/// Draw from `P^Gib_{Λ,γ}`: the chain state after `settings.sweeps` sweeps.
pub fn sample_gibbs_conditional<R: Rng + ?Sized>(
    model: &InteractionModel,
    region: &Cube,
    gamma: &Configuration,
    settings: &ChainSettings,
    rng: &mut R,
) -> Result<Configuration> {
    let mut chain = Chain::conditional(model, region, &gamma.points, settings)?;
    chain.run(settings.sweeps, rng);
    Ok(chain.configuration())
}

/// Draw from `P^per_{Λ_n}`.
pub fn sample_gibbs_periodic<R: Rng + ?Sized>(
    model: &InteractionModel,
    torus: &Cube,
    settings: &ChainSettings,
    rng: &mut R,
) -> Result<Configuration> {
    let mut chain = Chain::periodic(model, torus, settings)?;
    chain.run(settings.sweeps, rng);
    Ok(chain.configuration())
}

/// Draw from the model on `region` with empty boundary (periodic when the
/// region is). Non-interacting models are sampled exactly.
pub fn sample_model<R: Rng + ?Sized>(
    model: &InteractionModel,
    region: &Cube,
    settings: &ChainSettings,
    rng: &mut R,
) -> Result<Configuration> {
    if !model.is_interacting() {
        let intensity = (-model.local_energy_at(&ORIGIN, &[], region.dim)).exp();
        if region.periodic && region.side <= 2.0 * model.range() {
            return Err(Error::BoxTooSmall {
                side: region.side,
                range: model.range(),
            });
        }
        return sample_poisson(region, intensity, rng);
    }
    if region.periodic {
        sample_gibbs_periodic(model, region, settings, rng)
    } else {
        sample_gibbs_conditional(model, region, &Configuration::empty(*region), settings, rng)
    }
}

/// Run a chain past burn-in and record `samples` values of `observe`, one
/// every `thin` sweeps.
pub fn collect<R: Rng + ?Sized, T>(
    chain: &mut Chain,
    burn_in: usize,
    samples: usize,
    thin: usize,
    rng: &mut R,
    mut observe: impl FnMut(&Chain) -> T,
) -> Vec<T> {
    chain.run(burn_in, rng);
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        chain.run(thin.max(1), rng);
        out.push(observe(chain));
    }
    out
}

/// Count of points of `pts` inside `window`.
pub fn count_in(pts: &[Point], window: &Cube) -> usize {
    pts.iter().filter(|p| window.contains(p)).count()
}

/// Count law under `P^Gib_{Λ,γ}` (or `P^per` for a periodic region) by
/// midpoint tensor quadrature with `nodes` cells per axis.
///
/// `w_k = (1/k!) ∫_{Λ^k} e^{-U_{Λ,γ}}` is summed over multisets of cells with
/// multinomial weights. The mass beyond `kmax` is bounded through
/// `w_{k+1} ≤ w_k e^{-b} |Λ| / (k+1)` and reported as `tail`.
pub fn dlr_count_pmf_oracle(
    model: &InteractionModel,
    region: &Cube,
    gamma: &Configuration,
    kmax: usize,
    nodes: usize,
) -> Result<CountPmf> {
    let dim = region.dim;
    if dim * kmax > 4 || kmax > 5 {
        return Err(Error::DimensionTooLarge { dim, kmax });
    }
    if nodes == 0 {
        return Err(invalid("nodes", "must be positive"));
    }
    let periodic = region.periodic;
    if periodic && region.side <= 2.0 * model.range() {
        return Err(Error::BoxTooSmall {
            side: region.side,
            range: model.range(),
        });
    }
    let h = region.side / nodes as f64;
    let m = nodes.pow(dim as u32);
    let centers: Vec<Point> = (0..m)
        .map(|mut idx| {
            let mut p = ORIGIN;
            for (i, c) in p.iter_mut().enumerate().take(dim) {
                let j = idx % nodes;
                idx /= nodes;
                *c = region.lower(i) + (j as f64 + 0.5) * h;
            }
            p
        })
        .collect();
    let exterior: Vec<Point> = if periodic {
        Vec::new()
    } else {
        gamma
            .points
            .iter()
            .filter(|p| !region.contains(p) && region.distance_to(p) <= model.range())
            .copied()
            .collect()
    };
    let cell_vol = h.powi(dim as i32);
    let mut w = vec![0.0; kmax + 1];
    w[0] = 1.0;

    let pair_fast = match &model.law {
        Interaction::Pairwise { phi, z } => Some((phi.clone(), z.ln())),
        _ => None,
    };
    let distance = |a: &Point, b: &Point| {
        if periodic {
            region.torus_dist(a, b)
        } else {
            crate::geometry::dist(a, b)
        }
    };

    if let (Some((phi, logz)), true) = (&pair_fast, m <= 4096) {
        // boundary term per cell, then a dense pair table
        let bnd: Vec<f64> = centers
            .iter()
            .map(|c| exterior.iter().map(|y| phi.eval(crate::geometry::dist(c, y))).sum::<f64>() - logz)
            .collect();
        let mut pair = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                pair[i * m + j] = phi.eval(distance(&centers[i], &centers[j]));
            }
        }
        let mut chosen = Vec::with_capacity(kmax);
        pair_recurse(&pair, &bnd, m, kmax, 0, 0.0, 1.0, 0, &mut chosen, &mut w, cell_vol);
    } else {
        let mut chosen: Vec<usize> = Vec::with_capacity(kmax);
        generic_recurse(
            model, &centers, &exterior, region, kmax, 0, 0.0, 1.0, 0, &mut chosen, &mut w, cell_vol,
        );
    }

    // tail bound from the last computed weight
    let lam = model.dominating_intensity(dim) * region.volume();
    let mut tail = 0.0;
    let mut term = w[kmax];
    let mut j = kmax;
    loop {
        j += 1;
        term *= lam / j as f64;
        tail += term;
        if term <= 1e-18 * tail.max(1e-300) || j > kmax + 10_000 {
            break;
        }
    }
    let z: f64 = w.iter().sum::<f64>() + tail;
    Ok(CountPmf {
        probs: w.iter().map(|x| x / z).collect(),
        tail: tail / z,
    })
}

#[allow(clippy::too_many_arguments)]
fn pair_recurse(
    pair: &[f64],
    bnd: &[f64],
    m: usize,
    kmax: usize,
    start: usize,
    energy: f64,
    mult: f64,
    run: usize,
    chosen: &mut Vec<usize>,
    w: &mut [f64],
    cell_vol: f64,
) {
    let depth = chosen.len();
    if depth == kmax {
        return;
    }
    let scale = cell_vol.powi(depth as i32 + 1);
    let last = chosen.last().copied();
    for c in start..m {
        let mut u = bnd[c];
        for &p in chosen.iter() {
            u += pair[p * m + c];
        }
        let e = energy + u;
        let (mu, r) = if Some(c) == last {
            (mult / (run + 1) as f64, run + 1)
        } else {
            (mult, 1)
        };
        if e == f64::INFINITY {
            continue;
        }
        w[depth + 1] += scale * mu * (-e).exp();
        if depth + 1 < kmax {
            chosen.push(c);
            pair_recurse(pair, bnd, m, kmax, c, e, mu, r, chosen, w, cell_vol);
            chosen.pop();
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn generic_recurse(
    model: &InteractionModel,
    centers: &[Point],
    exterior: &[Point],
    region: &Cube,
    kmax: usize,
    start: usize,
    energy: f64,
    mult: f64,
    run: usize,
    chosen: &mut Vec<usize>,
    w: &mut [f64],
    cell_vol: f64,
) {
    let depth = chosen.len();
    if depth == kmax {
        return;
    }
    let scale = cell_vol.powi(depth as i32 + 1);
    let last = chosen.last().copied();
    let mut env: Vec<Point> = exterior.to_vec();
    env.extend(chosen.iter().map(|&i| centers[i]));
    for c in start..centers.len() {
        let x = centers[c];
        let u = if region.periodic {
            crate::pointproc::periodic_local_energy(&x, &env, region, model)
        } else {
            model.local_energy_at(&x, &env, region.dim)
        };
        let e = energy + u;
        let (mu, r) = if Some(c) == last {
            (mult / (run + 1) as f64, run + 1)
        } else {
            (mult, 1)
        };
        if e == f64::INFINITY {
            continue;
        }
        w[depth + 1] += scale * mu * (-e).exp();
        if depth + 1 < kmax {
            chosen.push(c);
            generic_recurse(model, centers, exterior, region, kmax, c, e, mu, r, chosen, w, cell_vol);
            chosen.pop();
        }
    }
}

/// Standard error of the mean of a correlated series by batch means.
pub fn batch_mean_stderr(xs: &[f64], batches: usize) -> f64 {
    let b = batches.clamp(2, xs.len().max(2));
    let size = xs.len() / b;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..b)
        .map(|i| xs[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub gibbs_mean: f64,
    pub poisson_mean: f64,
    pub stderr: f64,
    pub z_score: f64,
    pub violated: bool,
    /// `P(N ≥ k)` for k = 1..4 under the Gibbs sampler and the dominating
    /// Poisson law.
    pub gibbs_upper_tail: Vec<f64>,
    pub poisson_upper_tail: Vec<f64>,
    pub samples: usize,
}

/// Compare the Gibbs mean count on Λ with the dominating Poisson mean
/// `e^{-b}|Λ|`.
pub fn check_domination<R: Rng + ?Sized>(
    model: &InteractionModel,
    region: &Cube,
    gamma: &Configuration,
    samples: usize,
    settings: &ChainSettings,
    rng: &mut R,
) -> Result<DominationReport> {
    if samples < 1000 {
        return Err(invalid("samples", "at least 1000 samples are required"));
    }
    let mut chain = Chain::conditional(model, region, &gamma.points, settings)?;
    let counts = collect(&mut chain, settings.burn_in.max(1), samples, 1, rng, |c| c.len());
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let gibbs_mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let poisson_mean = model.dominating_intensity(region.dim) * region.volume();
    let stderr = batch_mean_stderr(&xs, 50);
    let z_score = (gibbs_mean - poisson_mean) / stderr;
    let poisson = CountPmf::poisson(poisson_mean, 3);
    let mut gibbs_upper_tail = Vec::new();
    let mut poisson_upper_tail = Vec::new();
    for k in 1..=4 {
        gibbs_upper_tail.push(counts.iter().filter(|&&c| c >= k).count() as f64 / counts.len() as f64);
        poisson_upper_tail.push(1.0 - poisson.probs[..k].iter().sum::<f64>());
    }
    Ok(DominationReport {
        gibbs_mean,
        poisson_mean,
        stderr,
        z_score,
        violated: z_score > 3.0,
        gibbs_upper_tail,
        poisson_upper_tail,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEstimate {
    pub n: f64,
    pub tv: f64,
    pub bootstrap_sigma: f64,
    pub samples: usize,
}

/// Lattice of points filling `Λ_{n+2R} ∖ Λ_n` with the given spacing, keeping
/// only points within distance R of `Λ_n`.
pub fn dense_boundary(region: &Cube, range: f64, spacing: f64) -> Vec<Point> {
    let outer = Cube {
        side: region.side + 2.0 * range,
        periodic: false,
        ..*region
    };
    let per_axis = (outer.side / spacing).floor() as usize;
    let dim = region.dim;
    let total = per_axis.pow(dim as u32);
    let mut out = Vec::new();
    for mut idx in 0..total {
        let mut p = ORIGIN;
        for (i, c) in p.iter_mut().enumerate().take(dim) {
            let j = idx % per_axis;
            idx /= per_axis;
            *c = outer.lower(i) + (j as f64 + 0.5) * spacing;
        }
        if outer.contains(&p) && !region.contains(&p) && region.distance_to(&p) <= range {
            out.push(p);
        }
    }
    out
}

/// For each side `n`, the total-variation distance between the count laws
/// of `ω ∩ Λ_{n/2}` under `P^Gib_{Λ_n,∅}` and `P^Gib_{Λ_n,γ}` with
/// `γ = boundary(Λ_n)`, with bootstrap error bars.
#[allow(clippy::too_many_arguments)]
pub fn boundary_influence_probe<R: Rng + ?Sized>(
    model: &InteractionModel,
    dim: usize,
    sides: &[f64],
    boundary: impl Fn(&Cube) -> Vec<Point>,
    samples: usize,
    thin: usize,
    settings: &ChainSettings,
    rng: &mut R,
) -> Result<Vec<InfluenceEstimate>> {
    let range = model.range();
    let mut out = Vec::with_capacity(sides.len());
    for &n in sides {
        if n <= 2.0 * range {
            return Err(Error::BoxTooSmall { side: n, range });
        }
        let region = Cube::centered(dim, n)?;
        let window = Cube::centered(dim, 0.5 * n)?;
        let gamma = boundary(&region);
        let mut free = Chain::conditional(model, &region, &[], settings)?;
        let mut fixed = Chain::conditional(model, &region, &gamma, settings)?;
        let a = collect(&mut free, settings.burn_in, samples, thin, rng, |c| count_in(c.points(), &window));
        let b = collect(&mut fixed, settings.burn_in, samples, thin, rng, |c| count_in(c.points(), &window));
        let kmax = a.iter().chain(b.iter()).copied().max().unwrap_or(0);
        let tv = CountPmf::from_counts(&a, kmax).tv_distance(&CountPmf::from_counts(&b, kmax));
        let reps = 200;
        let mut boots = Vec::with_capacity(reps);
        let mut ra = vec![0usize; a.len()];
        let mut rb = vec![0usize; b.len()];
        for _ in 0..reps {
            for v in ra.iter_mut() {
                *v = a[rng.gen_range(0..a.len())];
            }
            for v in rb.iter_mut() {
                *v = b[rng.gen_range(0..b.len())];
            }
            boots.push(CountPmf::from_counts(&ra, kmax).tv_distance(&CountPmf::from_counts(&rb, kmax)));
        }
        let mean = boots.iter().sum::<f64>() / reps as f64;
        let sigma = (boots.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        out.push(InfluenceEstimate {
            n,
            tv,
            bootstrap_sigma: sigma,
            samples,
        });
    }
    Ok(out)
}
