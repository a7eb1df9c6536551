//! Ground-state energies `E(g) = inf σ(−Δ + gV)`, the positive branch
//! `E_−(g) = −E(g)` and its inverse `g(E)`, for single wells and for convex
//! combinations `Σ c_j V(· − x_j)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{dist, norm, point, Cube, Point};
use crate::operator::{build_hamiltonian, Eigenpair};
use crate::parallel::Exec;
use crate::potential::{assemble_weighted, GridSpec, SingleSitePotential};
use crate::stats::ols;

/// Weights `c_j > 0` with `Σ c_j = 1` and distinct shifts `x_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WellCombination {
    pub weights: Vec<f64>,
    pub shifts: Vec<Vec<f64>>,
}

impl WellCombination {
    pub fn new(weights: Vec<f64>, shifts: Vec<Vec<f64>>) -> Result<Self> {
        let c = WellCombination { weights, shifts };
        c.validate()?;
        Ok(c)
    }

    /// `c = (1)`, `x = (0)`.
    pub fn trivial() -> Self {
        WellCombination {
            weights: vec![1.0],
            shifts: vec![vec![0.0]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(invalid("weights", "need at least one well"));
        }
        if self.weights.len() != self.shifts.len() {
            return Err(invalid("shifts", "must have one shift per weight"));
        }
        if self.weights.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(invalid("weights", "must be positive"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("weights", format!("must sum to 1, got {total}")));
        }
        let pts = self.points();
        for i in 0..pts.len() {
            for j in 0..i {
                if pts[i] == pts[j] {
                    return Err(invalid("shifts", "shifts must be pairwise distinct"));
                }
            }
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<Point> {
        self.shifts.iter().map(|s| point(s)).collect()
    }

    fn weighted(&self) -> Vec<(Point, f64)> {
        self.points().into_iter().zip(self.weights.iter().copied()).collect()
    }

    fn spread(&self) -> f64 {
        self.points().iter().map(norm).fold(0.0, f64::max)
    }
}

/// Numerical settings for ground-state solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundSolver {
    pub dim: usize,
    pub h: f64,
    /// Residual tolerance of the eigensolver, relative to the matrix scale.
    #[serde(default = "default_eig_tol")]
    pub eig_tol: f64,
    /// Relative change under box doubling accepted as converged.
    #[serde(default = "default_box_tol")]
    pub box_tol: f64,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
    /// Smallest box side to consider.
    #[serde(default)]
    pub min_side: f64,
    #[serde(default)]
    pub exec: Exec,
}

fn default_eig_tol() -> f64 {
    1e-10
}

fn default_box_tol() -> f64 {
    1e-3
}

fn default_max_nodes() -> usize {
    4_000_000
}

/// Ground state on a concrete grid.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub g: f64,
    /// `λ_min`, i.e. `E(g)`.
    pub energy: f64,
    pub grid: GridSpec,
    pub pair: Eigenpair,
}

impl GroundState {
    /// Value of the L²-normalized ground state at the node nearest to `x`.
    pub fn value_at(&self, x: &Point) -> Option<f64> {
        let idx = self.grid.nearest_node(x)?;
        let w = self.grid.h.powi(self.grid.dim() as i32).sqrt();
        Some(self.pair.vector.abs()[idx] / w)
    }
}

impl GroundSolver {
    pub fn new(dim: usize, h: f64) -> Self {
        GroundSolver {
            dim,
            h,
            eig_tol: default_eig_tol(),
            box_tol: default_box_tol(),
            max_nodes: default_max_nodes(),
            min_side: 0.0,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(invalid("dim", "must be 1, 2 or 3"));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(invalid("h", "must be positive"));
        }
        if !(self.eig_tol > 0.0) || !(self.box_tol > 0.0) {
            return Err(invalid("tol", "tolerances must be positive"));
        }
        Ok(())
    }

    /// Centered Dirichlet grid whose side is an even multiple of `h`, so
    /// that the origin is a node.
    pub fn grid(&self, side: f64) -> Result<GridSpec> {
        let cells = 2 * (side / (2.0 * self.h)).ceil().max(1.0) as usize;
        let m = cells.saturating_sub(1);
        let nodes = m.saturating_pow(self.dim as u32);
        if nodes > self.max_nodes {
            return Err(Error::GridCap {
                nodes,
                cap: self.max_nodes,
            });
        }
        GridSpec::dirichlet(Cube::centered(self.dim, cells as f64 * self.h)?, self.h)
    }

    fn initial_side(&self, v: &SingleSitePotential, comb: &WellCombination) -> f64 {
        let diam = v.well_diameter() + 2.0 * comb.spread();
        (10.0 * diam.max(10.0 * self.h)).max(self.min_side)
    }

    /// Ground state of `−Δ + g Σ c_j V(· − x_j)` on a fixed grid.
    pub fn solve_on(&self, v: &SingleSitePotential, comb: &WellCombination, g: f64, grid: &GridSpec) -> Result<GroundState> {
        if !(g >= 0.0) || !g.is_finite() {
            return Err(invalid("g", "must be nonnegative"));
        }
        comb.validate()?;
        let field = assemble_weighted(v, &comb.weighted(), grid, None)?;
        let values: Vec<f64> = field.values.iter().map(|x| g * x).collect();
        let h = build_hamiltonian(grid, &values)?;
        let pair = h.smallest_eigenpair(self.eig_tol)?;
        Ok(GroundState {
            g,
            energy: pair.value,
            grid: *grid,
            pair,
        })
    }

    /// Ground state with the box doubled until `λ_min` moves by less than
    /// `box_tol` relative. A state still unbound (`λ_min ≥ 0`) after the box
    /// has grown 64-fold is reported as is.
    pub fn solve_auto(&self, v: &SingleSitePotential, comb: &WellCombination, g: f64) -> Result<GroundState> {
        self.solve_from(v, comb, g, 0.0)
    }

    fn solve_from(&self, v: &SingleSitePotential, comb: &WellCombination, g: f64, start: f64) -> Result<GroundState> {
        self.validate()?;
        let first = self.initial_side(v, comb).max(start);
        let mut side = first;
        let mut prev = self.solve_on(v, comb, g, &self.grid(side)?)?;
        loop {
            side *= 2.0;
            let grid = match self.grid(side) {
                Ok(grid) => grid,
                Err(_) if prev.energy >= 0.0 => return Ok(prev),
                Err(e) => return Err(e),
            };
            let next = self.solve_on(v, comb, g, &grid)?;
            let change = (next.energy - prev.energy).abs();
            if next.energy < 0.0 && change <= self.box_tol * next.energy.abs() {
                return Ok(next);
            }
            if next.energy >= 0.0 && side >= 64.0 * first {
                return Ok(next);
            }
            prev = next;
        }
    }

    /// `E_−(g)` for a combination, with automatic box sizing.
    pub fn combined_e_minus(&self, v: &SingleSitePotential, comb: &WellCombination, g: f64) -> Result<f64> {
        Ok(-self.solve_auto(v, comb, g)?.energy)
    }

    pub fn e_minus(&self, v: &SingleSitePotential, g: f64) -> Result<f64> {
        self.combined_e_minus(v, &WellCombination::trivial(), g)
    }

    /// `g(E)` for the combination, by doubling then bisection on a box
    /// sized at the upper bracket.
    pub fn combined_g_of_e(&self, v: &SingleSitePotential, comb: &WellCombination, e: f64, tol: f64) -> Result<f64> {
        self.invert(v, comb, e, tol, true)
    }

    pub fn g_of_e(&self, v: &SingleSitePotential, e: f64, tol: f64) -> Result<f64> {
        self.invert(v, &WellCombination::trivial(), e, tol, false)
    }

    fn invert(&self, v: &SingleSitePotential, comb: &WellCombination, e: f64, tol: f64, combined: bool) -> Result<f64> {
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::BelowOnset { energy: e });
        }
        if !(tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        const G_MAX: f64 = 1e12;
        // ten decay lengths of a bound state at energy −E on each side
        let start = 20.0 / e.sqrt();
        let mut hi = 1.0;
        let mut top = self.solve_from(v, comb, hi, start)?;
        if -top.energy >= e {
            let mut lo = hi;
            loop {
                lo *= 0.5;
                let s = self.solve_from(v, comb, lo, start)?;
                if -s.energy < e {
                    break;
                }
                hi = lo;
                top = s;
                if lo < 1e-12 {
                    return Err(invalid("energy", "target reached at vanishing coupling"));
                }
            }
        } else {
            loop {
                hi *= 2.0;
                if hi > G_MAX {
                    return Err(if combined {
                        Error::NotInDq { g_max: G_MAX }
                    } else {
                        Error::BelowOnset { energy: e }
                    });
                }
                top = self.solve_from(v, comb, hi, start)?;
                if -top.energy >= e {
                    break;
                }
            }
        }
        if (-top.energy - e).abs() <= tol * e {
            return Ok(hi);
        }
        let grid = top.grid;
        let mut lo = hi * 0.5;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let em = -self.solve_on(v, comb, mid, &grid)?.energy;
            if (em - e).abs() <= tol * e {
                return Ok(mid);
            }
            if em < e {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::NoConvergence { lo, hi })
    }

    /// Sample `E_−` at each `g`, in parallel across `g` values.
    pub fn curve(&self, v: &SingleSitePotential, comb: &WellCombination, gs: &[f64]) -> Result<GCurve> {
        let results = self.exec.map_indexed(gs.len(), |i| self.solve_auto(v, comb, gs[i]));
        let mut points = Vec::with_capacity(gs.len());
        for r in results {
            let s = r?;
            points.push(GPoint {
                g: s.g,
                e_minus: -s.energy,
                h: s.grid.h,
                side: s.grid.region.side,
            });
        }
        points.sort_by(|a, b| a.g.total_cmp(&b.g));
        Ok(GCurve { points })
    }

    /// Slopes of `log|v_g(x)|` against `√g` for each probe `x`, where `v_g`
    /// is the normalized ground state of `−Δ + gV`. One grid, sized for the
    /// smallest `g` and large enough to hold the probes, serves all `g`.
    pub fn decay_profile(&self, v: &SingleSitePotential, gs: &[f64], probes: &[Point]) -> Result<DecayReport> {
        if gs.len() < 3 {
            return Err(invalid("g", "need at least three coupling values"));
        }
        if gs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("g", "must be strictly increasing"));
        }
        let comb = WellCombination::trivial();
        let first = self.solve_auto(v, &comb, gs[0])?;
        let reach = probes.iter().map(norm).fold(0.0, f64::max);
        let side = first.grid.region.side.max(2.0 * reach + 4.0);
        let grid = self.grid(side)?;
        let states = self.exec.map_indexed(gs.len(), |i| self.solve_on(v, &comb, gs[i], &grid));
        let mut log_abs = vec![Vec::with_capacity(gs.len()); probes.len()];
        for s in states {
            let s = s?;
            for (k, p) in probes.iter().enumerate() {
                let val = s.value_at(p).ok_or_else(|| invalid("probes", "probe outside the grid"))?;
                log_abs[k].push(val.ln());
            }
        }
        let sqrt_g: Vec<f64> = gs.iter().map(|g| g.sqrt()).collect();
        let mut slopes = Vec::new();
        let mut r_squared = Vec::new();
        for ys in &log_abs {
            let f = ols(&sqrt_g, ys).ok_or_else(|| invalid("g", "degenerate fit"))?;
            slopes.push(f.slope);
            r_squared.push(f.r_squared);
        }
        Ok(DecayReport {
            g: gs.to_vec(),
            probes: probes.to_vec(),
            log_abs,
            slopes,
            r_squared,
        })
    }
}

/// `λ_min(−Δ + gV)` on `grid`, with `V` centered at the origin.
pub fn ground_energy(v: &SingleSitePotential, g: f64, grid: &GridSpec) -> Result<f64> {
    combined_ground_energy(v, &WellCombination::trivial(), g, grid)
}

/// `λ_min(−Δ + g Σ c_j V(· − x_j))` on `grid`.
pub fn combined_ground_energy(v: &SingleSitePotential, comb: &WellCombination, g: f64, grid: &GridSpec) -> Result<f64> {
    let solver = GroundSolver::new(grid.dim(), grid.h);
    Ok(solver.solve_on(v, comb, g, grid)?.energy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GPoint {
    pub g: f64,
    pub e_minus: f64,
    pub h: f64,
    pub side: f64,
}

/// Sampled `(g, E_−(g))` pairs in increasing `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GCurve {
    pub points: Vec<GPoint>,
}

impl GCurve {
    /// First sampled `g` with `E_−(g) > 0`.
    pub fn onset(&self) -> Option<f64> {
        self.points.iter().find(|p| p.e_minus > 0.0).map(|p| p.g)
    }

    /// Whether `E_−` is strictly increasing from the onset on.
    pub fn is_increasing(&self) -> bool {
        let pos: Vec<&GPoint> = self.points.iter().filter(|p| p.e_minus > 0.0).collect();
        pos.windows(2).all(|w| w[1].e_minus > w[0].e_minus)
    }

    /// Piecewise-linear inverse on the positive, increasing part.
    pub fn invert(&self, e: f64) -> Result<f64> {
        let pos: Vec<&GPoint> = self.points.iter().filter(|p| p.e_minus > 0.0).collect();
        let first = pos.first().ok_or(Error::BelowOnset { energy: e })?;
        if e < first.e_minus {
            return Err(Error::BelowOnset { energy: e });
        }
        for w in pos.windows(2) {
            if e <= w[1].e_minus {
                let t = (e - w[0].e_minus) / (w[1].e_minus - w[0].e_minus);
                return Ok(w[0].g + t * (w[1].g - w[0].g));
            }
        }
        if e == first.e_minus {
            return Ok(first.g);
        }
        Err(invalid("energy", "above the sampled range"))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("g,E_minus,h,L\n");
        for p in &self.points {
            s.push_str(&format!("{:e},{:e},{:e},{:e}\n", p.g, p.e_minus, p.h, p.side));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub g: Vec<f64>,
    pub probes: Vec<Point>,
    /// `log_abs[k][i] = log|v_{g_i}(probe_k)|`.
    pub log_abs: Vec<Vec<f64>>,
    pub slopes: Vec<f64>,
    pub r_squared: Vec<f64>,
}

/// Largest second difference of `g` sampled on a uniform `E` grid, relative
/// to `max |g|`. Concave data give values `≤ 0` up to noise.
pub fn convexity_defect(gs: &[f64]) -> f64 {
    let scale = gs.iter().map(|g| g.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    gs.windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]) / scale)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Minimal distance between distinct shifts; a diagnostic for separated-well
/// comparisons.
pub fn min_separation(comb: &WellCombination) -> f64 {
    let pts = comb.points();
    let mut m = f64::INFINITY;
    for i in 0..pts.len() {
        for j in 0..i {
            m = m.min(dist(&pts[i], &pts[j]));
        }
    }
    m
}
