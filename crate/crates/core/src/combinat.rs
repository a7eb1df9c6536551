//! Level sets of the pair potential, packing numbers, index sets of
//! interacting wells, and the tail constants they predict.
//!
//! Interiors are tested on radial intervals: `x ∈ Int S_a` when `φ ≥ a` on a
//! closed `δ`-ball around `x`. Pair potentials are radial step functions,
//! so the test is exact once `δ` is below the gap to the nearest breakpoint;
//! breakpoints closer than `δ` are reported as boundary cases.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{dist, norm, sub, Point, ORIGIN};
use crate::pointproc::{Interaction, InteractionModel, PairPotential};
use crate::potential::SingleSitePotential;

/// Default dilation for interior tests.
pub const DILATION: f64 = 1e-9;

/// Largest candidate set accepted by the grid packing search.
pub const MAX_CANDIDATES: usize = 10_000;

/// Largest number of wells accepted by the exact weight search.
pub const MAX_WELLS: usize = 20;

/// Radial pieces `(upper, value)`: value on `(previous upper, upper]`, the
/// first piece starting at 0.
fn pieces(phi: &PairPotential) -> Vec<(f64, f64)> {
    match phi {
        PairPotential::Strauss { a0, r } => vec![(*r, *a0), (f64::INFINITY, 0.0)],
        PairPotential::RadialTable { radii, values, .. } => {
            let mut p: Vec<(f64, f64)> = radii.iter().copied().zip(values.iter().copied()).collect();
            p.push((f64::INFINITY, 0.0));
            p
        }
        PairPotential::Zero => vec![(f64::INFINITY, 0.0)],
    }
}

/// `x ∈ S_a = {φ ≥ a} ∪ {0}`.
pub fn level_member(phi: &PairPotential, a: f64, x: &Point) -> bool {
    let r = norm(x);
    r == 0.0 || phi.eval(r) >= a
}

/// Whether every radius in `[lo, hi]` lies in the radial level set.
fn radial_interval_in(pieces: &[(f64, f64)], a: f64, lo: f64, hi: f64) -> bool {
    if hi <= 0.0 {
        return true;
    }
    let mut start = f64::NEG_INFINITY;
    for &(upper, value) in pieces {
        // piece covers (start, upper]; only ρ = 0 is exempt
        let meets = lo <= upper && hi > start.max(0.0) || (lo <= 0.0 && start < 0.0 && hi > 0.0);
        if meets && value < a {
            return false;
        }
        start = upper;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interior {
    Inside,
    Outside,
    /// A breakpoint of `S_a` lies within the dilation of the tested set.
    Boundary,
}

/// Whether the closed ball `B(x, rho)` lies in `Int S_a`.
pub fn ball_in_interior(phi: &PairPotential, a: f64, x: &Point, rho: f64, delta: f64) -> Interior {
    let p = pieces(phi);
    let c = norm(x);
    let lo = (c - rho).max(0.0);
    let hi = c + rho;
    // breakpoints where membership changes
    let mut prev_member = p.first().is_some_and(|q| q.1 >= a);
    for w in p.windows(2) {
        let member_next = w[1].1 >= a;
        if member_next != prev_member {
            let b = w[0].0;
            if (b - hi).abs() <= delta || (lo > 0.0 && (b - lo).abs() <= delta) {
                return Interior::Boundary;
            }
        }
        prev_member = member_next;
    }
    if radial_interval_in(&p, a, (lo - delta).max(0.0), hi + delta) {
        Interior::Inside
    } else {
        Interior::Outside
    }
}

/// `x ∈ Int S_a`, with boundary cases counted as outside.
pub fn in_interior(phi: &PairPotential, a: f64, x: &Point) -> bool {
    ball_in_interior(phi, a, x, 0.0, DILATION) == Interior::Inside
}

/// `x ∈ supp φ`, the closure of `{φ ≠ 0}`.
pub fn in_support(phi: &PairPotential, x: &Point) -> bool {
    let r = norm(x);
    let mut reach: f64 = -1.0;
    for (upper, value) in pieces(phi) {
        if value != 0.0 {
            reach = reach.max(upper);
        }
    }
    r <= reach
}

/// `lim_{x→0} φ(x)`, when the first piece has positive length.
pub fn limit_at_origin(phi: &PairPotential) -> f64 {
    pieces(phi)[0].1
}

/// `Λ_l + ∪_k B(c_k, ρ_k)`: points within `ρ_k` of the closed cube of side
/// `l` centered at `c_k`, for some `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingRegion {
    pub dim: usize,
    pub l: f64,
    pub balls: Vec<(Point, f64)>,
}

impl PackingRegion {
    /// The closed cube of side `side` centered at the origin.
    pub fn cube(dim: usize, side: f64) -> Self {
        PackingRegion {
            dim,
            l: side,
            balls: vec![(ORIGIN, 0.0)],
        }
    }

    /// `Λ_l + supp V_{2,−}` with the negative supports approximated by balls.
    pub fn minkowski(dim: usize, l: f64, v: &SingleSitePotential) -> Self {
        PackingRegion {
            dim,
            l,
            balls: negative_balls(v),
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.balls.iter().any(|(c, rho)| {
            let mut s = 0.0;
            for i in 0..self.dim {
                let e = ((x[i] - c[i]).abs() - 0.5 * self.l).max(0.0);
                s += e * e;
            }
            s.sqrt() <= *rho * (1.0 + 1e-12) + 1e-15
        })
    }

    fn bounds(&self, axis: usize) -> (f64, f64) {
        let lo = self.balls.iter().map(|(c, r)| c[axis] - 0.5 * self.l - r).fold(f64::INFINITY, f64::min);
        let hi = self.balls.iter().map(|(c, r)| c[axis] + 0.5 * self.l + r).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Balls covering the supports of the negative parts of `V₂`.
fn negative_balls(v: &SingleSitePotential) -> Vec<(Point, f64)> {
    let mut balls: Vec<(Point, f64)> = v
        .wells
        .iter()
        .filter(|w| w.profile.has_negative_part())
        .map(|w| (w.center_point(), w.profile.negative_support()))
        .collect();
    if let Some(p) = &v.v4 {
        if p.has_negative_part() {
            balls.push((ORIGIN, p.negative_support()));
        }
    }
    balls
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packing {
    /// Cardinality of the best configuration found.
    pub count: usize,
    /// True when `count` is the continuum packing number.
    pub exact: bool,
    pub witness: Vec<Point>,
    pub candidates: usize,
}

/// Largest configuration in `region` with `x − y ∉ S_a` for distinct
/// points. One-dimensional intervals with a Strauss potential use the
/// closed form; otherwise the exact maximum over a `δ`-grid of candidates
/// gives a lower bound. Grids at `δ` and `δ/2` are nested.
pub fn packing_number(region: &PackingRegion, phi: &PairPotential, a: f64, delta: f64) -> Result<Packing> {
    if !(a > 0.0) {
        return Err(invalid("a", "level must be positive"));
    }
    if !(delta > 0.0) {
        return Err(invalid("delta", "grid resolution must be positive"));
    }
    if region.balls.is_empty() {
        return Err(invalid("region", "empty region"));
    }
    if let (1, 1, PairPotential::Strauss { a0, r }) = (region.dim, region.balls.len(), phi) {
        if a <= *a0 {
            let (lo, hi) = region.bounds(0);
            let len = hi - lo;
            let m = len / r;
            let count = if (m - m.round()).abs() <= 1e-12 * m.max(1.0) {
                (m.round() as usize).max(1)
            } else {
                m.floor() as usize + 1
            };
            let witness = if count == 1 {
                vec![[0.5 * (lo + hi), 0.0, 0.0]]
            } else {
                (0..count)
                    .map(|k| [lo + len * k as f64 / (count - 1) as f64, 0.0, 0.0])
                    .collect()
            };
            return Ok(Packing {
                count,
                exact: true,
                witness,
                candidates: 0,
            });
        }
    }
    let mut axes: Vec<Vec<f64>> = Vec::new();
    let mut total: usize = 1;
    for axis in 0..region.dim {
        let (lo, hi) = region.bounds(axis);
        let steps = ((hi - lo) / delta + 1e-9).floor() as usize;
        let mut coords: Vec<f64> = (0..=steps).map(|k| lo + k as f64 * delta).collect();
        if hi - coords[steps] > 1e-12 * (hi - lo).max(1.0) {
            coords.push(hi);
        }
        total = total.saturating_mul(coords.len());
        if total > 64 * MAX_CANDIDATES {
            return Err(Error::GridTooLarge {
                candidates: total,
                limit: MAX_CANDIDATES,
            });
        }
        axes.push(coords);
    }
    let mut cand: Vec<Point> = Vec::new();
    let mut idx = vec![0usize; region.dim];
    'outer: loop {
        let mut p = ORIGIN;
        for (i, &k) in idx.iter().enumerate() {
            p[i] = axes[i][k];
        }
        if region.contains(&p) {
            cand.push(p);
        }
        for i in (0..region.dim).rev() {
            idx[i] += 1;
            if idx[i] < axes[i].len() {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }
    if cand.len() > MAX_CANDIDATES {
        return Err(Error::GridTooLarge {
            candidates: cand.len(),
            limit: MAX_CANDIDATES,
        });
    }
    // compatibility graph: an independent set of conflicts is a clique here
    let n = cand.len();
    let words = n.div_ceil(64);
    let mut compat = vec![vec![0u64; words]; n];
    for i in 0..n {
        for j in 0..i {
            if !level_member(phi, a, &sub(&cand[i], &cand[j])) {
                compat[i][j / 64] |= 1 << (j % 64);
                compat[j][i / 64] |= 1 << (i % 64);
            }
        }
    }
    let best = max_clique(&compat, n);
    Ok(Packing {
        count: best.len(),
        exact: false,
        witness: best.iter().map(|&i| cand[i]).collect(),
        candidates: n,
    })
}

fn popcount(s: &[u64]) -> usize {
    s.iter().map(|w| w.count_ones() as usize).sum()
}

/// Maximum clique by branch and bound with greedy colouring bounds.
fn max_clique(adj: &[Vec<u64>], n: usize) -> Vec<usize> {
    let words = n.div_ceil(64);
    let mut all = vec![0u64; words];
    for i in 0..n {
        all[i / 64] |= 1 << (i % 64);
    }
    let mut best: Vec<usize> = Vec::new();
    let mut current = Vec::new();
    expand(adj, &all, &mut current, &mut best);
    best
}

fn expand(adj: &[Vec<u64>], cand: &[u64], current: &mut Vec<usize>, best: &mut Vec<usize>) {
    if popcount(cand) == 0 {
        if current.len() > best.len() {
            *best = current.clone();
        }
        return;
    }
    // greedy colouring: vertices listed with their colour index
    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut uncol = cand.to_vec();
    let mut colour = 0;
    while popcount(&uncol) > 0 {
        colour += 1;
        let mut q = uncol.clone();
        while let Some(v) = first_bit(&q) {
            q[v / 64] &= !(1 << (v % 64));
            uncol[v / 64] &= !(1 << (v % 64));
            for (w, a) in q.iter_mut().zip(&adj[v]) {
                *w &= !a;
            }
            order.push((v, colour));
        }
    }
    let mut cand = cand.to_vec();
    for &(v, c) in order.iter().rev() {
        if current.len() + c <= best.len() {
            return;
        }
        current.push(v);
        let next: Vec<u64> = cand.iter().zip(&adj[v]).map(|(a, b)| a & b).collect();
        expand(adj, &next, current, best);
        current.pop();
        cand[v / 64] &= !(1 << (v % 64));
    }
}

fn first_bit(s: &[u64]) -> Option<usize> {
    s.iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

/// Whether every difference of two points of `supp V_{2,−}` lies in
/// `Int S_a`, which forces `T_a = 1`.
pub fn t_a_is_one(v: &SingleSitePotential, phi: &PairPotential, a: f64) -> bool {
    let balls = negative_balls(v);
    if balls.iter().any(|(_, r)| !r.is_finite()) || v.tail.as_ref().is_some_and(|t| t.amplitude < 0.0) {
        return false;
    }
    for (ci, ri) in &balls {
        for (cj, rj) in &balls {
            if ball_in_interior(phi, a, &sub(ci, cj), ri + rj, DILATION) != Interior::Inside {
                return false;
            }
        }
    }
    true
}

/// Symmetric relation on `{0..q}` stored as adjacency bitmasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub q: usize,
    pub rows: Vec<u32>,
}

impl Relation {
    pub fn empty(q: usize) -> Self {
        Relation { q, rows: vec![0; q] }
    }

    pub fn from_fn(q: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut r = Relation::empty(q);
        for i in 0..q {
            for j in 0..q {
                if f(i, j) {
                    r.rows[i] |= 1 << j;
                }
            }
        }
        r
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.rows[i] >> j & 1 == 1
    }

    pub fn insert(&mut self, i: usize, j: usize) {
        self.rows[i] |= 1 << j;
        self.rows[j] |= 1 << i;
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.q).all(|i| (0..self.q).all(|j| self.contains(i, j) == self.contains(j, i)))
    }

    /// Whether `self ⊆ other`.
    pub fn is_subset(&self, other: &Relation) -> bool {
        self.rows.iter().zip(&other.rows).all(|(a, b)| a & !b == 0)
    }
}

/// Well centers and weights; the input of the index-set construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellGraph {
    pub centers: Vec<Point>,
    pub weights: Vec<f64>,
    /// Support radius of each well.
    pub radii: Vec<f64>,
}

impl WellGraph {
    pub fn from_potential(v: &SingleSitePotential) -> Self {
        WellGraph {
            centers: v.wells.iter().map(|w| w.center_point()).collect(),
            weights: v.wells.iter().map(|w| w.b).collect(),
            radii: v.wells.iter().map(|w| w.profile.support()).collect(),
        }
    }

    pub fn q(&self) -> usize {
        self.centers.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSets {
    /// `(i, j)` with `y_i − y_j ∈ supp φ`.
    pub i: Relation,
    /// `(i, j)` with `supp V₃⁽ⁱ⁾ − supp V₃⁽ʲ⁾ ⊂ Int S_a`.
    pub i_a: Relation,
    /// `(i, j)` with `y_i − y_j ∈ Int S_a`.
    pub i_tilde_a: Relation,
    /// Some center difference sits on a breakpoint of `S_a` or `supp φ`.
    pub boundary: bool,
}

pub fn build_index_sets(wells: &WellGraph, phi: &PairPotential, a: f64) -> Result<IndexSets> {
    let q = wells.q();
    if q > MAX_WELLS {
        return Err(Error::TooManyWells { q, cap: MAX_WELLS });
    }
    let mut boundary = false;
    let mut i_rel = Relation::empty(q);
    let mut i_a = Relation::empty(q);
    let mut i_t = Relation::empty(q);
    let reach = phi.range();
    for i in 0..q {
        for j in 0..q {
            let d = sub(&wells.centers[i], &wells.centers[j]);
            if in_support(phi, &d) {
                i_rel.rows[i] |= 1 << j;
            }
            if i != j && (norm(&d) - reach).abs() <= DILATION {
                boundary = true;
            }
            match ball_in_interior(phi, a, &d, 0.0, DILATION) {
                Interior::Inside => i_t.rows[i] |= 1 << j,
                Interior::Boundary if i != j => boundary = true,
                _ => {}
            }
            let rho = wells.radii[i] + wells.radii[j];
            if rho.is_finite() && ball_in_interior(phi, a, &d, rho, DILATION) == Interior::Inside {
                i_a.rows[i] |= 1 << j;
            }
        }
    }
    Ok(IndexSets {
        i: i_rel,
        i_a,
        i_tilde_a: i_t,
        boundary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSet {
    /// `max_{J ∈ K(relation)} Σ_{i∈J} b_i²`.
    pub value: f64,
    pub witness: Vec<usize>,
}

/// Exact maximum of `Σ_{i∈J} b_i²` over sets `J` containing no related
/// pair of distinct indices.
pub fn max_indep_weight(weights: &[f64], relation: &Relation) -> Result<WeightedSet> {
    let q = weights.len();
    if q > MAX_WELLS {
        return Err(Error::TooManyWells { q, cap: MAX_WELLS });
    }
    if relation.q != q {
        return Err(invalid("relation", "size does not match the number of wells"));
    }
    let w: Vec<f64> = weights.iter().map(|b| b * b).collect();
    let conflict: Vec<u32> = (0..q).map(|i| relation.rows[i] & !(1 << i)).collect();
    // suffix sums bound what the remaining indices can add
    let mut suffix = vec![0.0; q + 1];
    for i in (0..q).rev() {
        suffix[i] = suffix[i + 1] + w[i];
    }
    let mut best = (0.0, 0u32);
    fn go(i: usize, set: u32, acc: f64, w: &[f64], conflict: &[u32], suffix: &[f64], best: &mut (f64, u32)) {
        if acc > best.0 {
            *best = (acc, set);
        }
        if i == w.len() || acc + suffix[i] <= best.0 {
            return;
        }
        if set & conflict[i] == 0 {
            go(i + 1, set | 1 << i, acc + w[i], w, conflict, suffix, best);
        }
        go(i + 1, set, acc, w, conflict, suffix, best);
    }
    go(0, 0, 0.0, &w, &conflict, &suffix, &mut best);
    Ok(WeightedSet {
        value: best.0,
        witness: (0..q).filter(|i| best.1 >> i & 1 == 1).collect(),
    })
}

/// Turán lower bound on the edge count of a `k`-vertex graph with
/// independence number at most `x`: `max(0, k(k − x)/(2x))`.
pub fn turan_min_edges(k: u64, x: u64) -> f64 {
    if x == 0 {
        return f64::INFINITY;
    }
    let (k, x) = (k as f64, x as f64);
    (k * (k - x) / (2.0 * x)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regressor {
    /// `g(E)·log g(E)`.
    GLogG,
    /// `g(E)²`.
    GSquared,
    /// `g₃(E)²`, with `g₃` the inverse coupling of a single `V₃`.
    G3Squared,
}

impl Regressor {
    pub fn name(self) -> &'static str {
        match self {
            Regressor::GLogG => "g_log_g",
            Regressor::GSquared => "g_squared",
            Regressor::G3Squared => "g3_squared",
        }
    }

    pub fn eval(self, g: f64) -> f64 {
        match self {
            Regressor::GLogG => g * g.ln(),
            Regressor::GSquared | Regressor::G3Squared => g * g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Predicted leading behaviour `log N(−E) ≈ slope · regressor(E)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub regime: String,
    pub a0: Option<f64>,
    pub sup_a_over_t: Option<f64>,
    pub multiwell_weight: Option<WeightedSet>,
    pub regressor: Regressor,
    pub predicted_slope: f64,
    /// False when the slope is only an upper bound for `log N`.
    pub sharp: bool,
    pub statement: String,
    pub checks: Vec<HypothesisCheck>,
}

fn check(checks: &mut Vec<HypothesisCheck>, name: &str, passed: bool, detail: impl Into<String>) {
    checks.push(HypothesisCheck {
        name: name.into(),
        passed,
        detail: detail.into(),
    });
}

fn unmet(checks: &[HypothesisCheck]) -> Option<Error> {
    checks.iter().find(|c| !c.passed).map(|c| Error::HypothesisUnmet {
        check: c.name.clone(),
        detail: c.detail.clone(),
    })
}

/// Constants predicted for `model` with single-site potential `v`.
pub fn predicted_constants(model: &InteractionModel, v: &SingleSitePotential, dim: usize) -> Result<ConstantReport> {
    model.validate()?;
    v.validate(dim)?;
    let mut checks = Vec::new();
    check(&mut checks, "essinf_negative", v.essinf_negative(), "V must take negative values");
    let phi = match &model.law {
        Interaction::Poisson { .. } | Interaction::Area { .. } => None,
        Interaction::Pairwise { phi: PairPotential::Zero, .. } => None,
        Interaction::Pairwise { phi, .. } => Some(phi.clone()),
    };
    let Some(phi) = phi else {
        check(&mut checks, "weak_interaction", true, "bounded local energy");
        if let Some(e) = unmet(&checks) {
            return Err(e);
        }
        return Ok(ConstantReport {
            regime: "weak".into(),
            a0: None,
            sup_a_over_t: None,
            multiwell_weight: None,
            regressor: Regressor::GLogG,
            predicted_slope: -1.0,
            sharp: true,
            statement: "log N(-E) ~ -g(E) log g(E) (upper bound; the lower bound carries 1 + d·alpha*)".into(),
            checks,
        });
    };
    let a0 = limit_at_origin(&phi);
    check(
        &mut checks,
        "condition_L",
        a0 > 0.0 && a0.is_finite(),
        format!("lim φ(x) at 0 is {a0}; need 0 < a0 < inf"),
    );
    if let Some(e) = unmet(&checks) {
        return Err(e);
    }
    let below = a0 * (1.0 - 1e-6);
    let wells = WellGraph::from_potential(v);
    let disjoint = v.wells_disjoint();
    let identical = v.wells.windows(2).all(|w| w[0].profile == w[1].profile);
    if wells.q() >= 2 {
        check(&mut checks, "V5_disjoint_supports", disjoint, "well supports must be pairwise disjoint");
        check(&mut checks, "V6_translated_profile", identical, "wells must share one profile");
        let sets = build_index_sets(&wells, &phi, below)?;
        check(
            &mut checks,
            "not_boundary_case",
            !sets.boundary,
            "a center difference lies on the edge of the interaction range",
        );
        let singular = v.wells.iter().all(|w| w.profile.is_singular());
        let (name, near) = if singular {
            ("V-P2", &sets.i_tilde_a)
        } else {
            ("V-P1", &sets.i_a)
        };
        let m_i = max_indep_weight(&wells.weights, &sets.i)?;
        let m_a = max_indep_weight(&wells.weights, near)?;
        check(
            &mut checks,
            name,
            (m_a.value - m_i.value).abs() <= 1e-12 * m_i.value,
            format!("max weight {} near a0 versus {} under I", m_a.value, m_i.value),
        );
        if let Some(e) = unmet(&checks) {
            return Err(e);
        }
        let slope = -a0 / (2.0 * m_i.value);
        return Ok(ConstantReport {
            regime: "multiwell".into(),
            a0: Some(a0),
            sup_a_over_t: None,
            multiwell_weight: Some(m_i),
            regressor: Regressor::G3Squared,
            predicted_slope: slope,
            sharp: true,
            statement: "log N(-E) ~ -(a0 / (2 max_{J in K(I)} sum b_i^2)) g3(E)^2".into(),
            checks,
        });
    }
    let one = t_a_is_one(v, &phi, below);
    if one {
        check(&mut checks, "T_a_is_one", true, "differences of supp V_2,- lie in Int S_a below a0");
        return Ok(ConstantReport {
            regime: "pairwise".into(),
            a0: Some(a0),
            sup_a_over_t: Some(a0),
            multiwell_weight: None,
            regressor: Regressor::GSquared,
            predicted_slope: -a0 / 2.0,
            sharp: true,
            statement: "log N(-E) ~ -(a0/2) g(E)^2".into(),
            checks,
        });
    }
    // upper bound only: sup over a geometric grid of a/T_a with packing
    // lower bounds for T_a at a small l
    check(&mut checks, "T_a_is_one", false, "packing bound used; slope is an upper bound");
    let region = PackingRegion::minkowski(dim, 1e-6, v);
    let scale = region.balls.iter().map(|(c, r)| norm(c) + r).fold(0.0, f64::max).max(1e-3);
    let delta = scale / if dim == 1 { 200.0 } else { 20.0 };
    let mut sup: f64 = 0.0;
    for k in 0..24 {
        let a = a0 * 0.75f64.powi(k);
        if !in_interior(&phi, a, &ORIGIN) {
            continue;
        }
        let t = packing_number(&region, &phi, a, delta)?.count.max(1);
        sup = sup.max(a / t as f64);
    }
    Ok(ConstantReport {
        regime: "pairwise_bound".into(),
        a0: Some(a0),
        sup_a_over_t: Some(sup),
        multiwell_weight: None,
        regressor: Regressor::GSquared,
        predicted_slope: -sup / 2.0,
        sharp: false,
        statement: "limsup log N(-E)/g(E)^2 <= -(1/2) sup_a a/T_a".into(),
        checks,
    })
}

/// Separation of two centers relative to the interaction range, used to
/// label two-well configurations.
pub fn two_well_case(y1: &Point, y2: &Point, range: f64) -> Option<u8> {
    let d = dist(y1, y2);
    if (d - range).abs() <= DILATION {
        None
    } else if d < range {
        Some(1)
    } else {
        Some(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point;
    use crate::potential::{RadialProfile, Well};

    fn strauss(a0: f64, r: f64) -> PairPotential {
        PairPotential::Strauss { a0, r }
    }

    #[test]
    fn level_sets() {
        let phi = strauss(2.0, 1.0);
        assert!(level_member(&phi, 1.0, &point(&[0.5])));
        assert!(!level_member(&phi, 3.0, &point(&[0.5])));
        assert!(level_member(&phi, 3.0, &ORIGIN));
        assert!(level_member(&PairPotential::Zero, 5.0, &ORIGIN));
    }

    #[test]
    fn interior_of_closed_ball() {
        let phi = strauss(1.0, 1.0);
        assert!(in_interior(&phi, 1.0, &point(&[0.999])));
        assert!(!in_interior(&phi, 1.0, &point(&[1.0])));
        assert_eq!(ball_in_interior(&phi, 0.5, &point(&[1.0]), 0.0, DILATION), Interior::Boundary);
        assert!(!in_interior(&phi, 1.5, &ORIGIN));
        assert!(in_interior(&phi, 0.5, &ORIGIN));
    }

    #[test]
    fn packing_examples() {
        let phi = strauss(1.0, 0.4);
        let p = packing_number(&PackingRegion::cube(1, 1.0), &phi, 1.0, 0.01).unwrap();
        assert_eq!((p.count, p.exact), (3, true));
        let p = packing_number(&PackingRegion::cube(1, 0.3), &phi, 1.0, 0.01).unwrap();
        assert_eq!(p.count, 1);
        // the four corners are pairwise at distance ≥ 1 > 0.9
        let p = packing_number(&PackingRegion::cube(2, 1.0), &strauss(1.0, 0.9), 1.0, 0.05).unwrap();
        assert_eq!(p.count, 4);
        assert!(!p.exact);
    }

    #[test]
    fn grid_limit() {
        let r = packing_number(&PackingRegion::cube(2, 1.0), &strauss(1.0, 0.1), 1.0, 0.001);
        assert!(matches!(r, Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn t_a_examples() {
        let phi = strauss(1.0, 1.0);
        let small = SingleSitePotential::single(RadialProfile::Square { depth: 1.0, radius: 0.4 });
        let big = SingleSitePotential::single(RadialProfile::Square { depth: 1.0, radius: 0.6 });
        assert!(t_a_is_one(&small, &phi, 0.5));
        assert!(!t_a_is_one(&big, &phi, 0.5));
        assert!(!t_a_is_one(&small, &phi, 1.5));
    }

    fn two_delta(y: f64, b1: f64, b2: f64) -> SingleSitePotential {
        SingleSitePotential::from_wells(vec![
            Well { center: vec![-y / 2.0], b: b1, profile: RadialProfile::Delta { c: 1.0 } },
            Well { center: vec![y / 2.0], b: b2, profile: RadialProfile::Delta { c: 1.0 } },
        ])
    }

    #[test]
    fn two_well_cases() {
        let phi = strauss(1.0, 1.0);
        let close = WellGraph::from_potential(&two_delta(0.5, 2.0, 1.0));
        let s = build_index_sets(&close, &phi, 0.5).unwrap();
        assert!(s.i_tilde_a.contains(0, 1) && s.i.contains(0, 1));
        assert!(s.i_a.is_subset(&s.i_tilde_a));
        assert_eq!(max_indep_weight(&close.weights, &s.i).unwrap().value, 4.0);
        let far = WellGraph::from_potential(&two_delta(1.5, 2.0, 1.0));
        let s = build_index_sets(&far, &phi, 0.5).unwrap();
        assert!(!s.i.contains(0, 1));
        assert!(s.i.contains(0, 0));
        let m = max_indep_weight(&far.weights, &s.i).unwrap();
        assert_eq!(m.value, 5.0);
        assert_eq!(m.witness, vec![0, 1]);
    }

    #[test]
    fn turan_values() {
        assert_eq!(turan_min_edges(4, 2), 2.0);
        assert_eq!(turan_min_edges(5, 2), 3.75);
        assert_eq!(turan_min_edges(3, 5), 0.0);
    }

    #[test]
    fn predicted_slopes() {
        let v = SingleSitePotential::single(RadialProfile::Square { depth: 1.0, radius: 0.25 });
        let r = predicted_constants(&InteractionModel::poisson(1.0).unwrap(), &v, 1).unwrap();
        assert_eq!((r.regressor, r.predicted_slope), (Regressor::GLogG, -1.0));
        let r = predicted_constants(&InteractionModel::strauss(2.0, 1.0, 1.0).unwrap(), &v, 1).unwrap();
        assert_eq!((r.regressor, r.predicted_slope), (Regressor::GSquared, -1.0));
        let m = InteractionModel::strauss(1.0, 1.0, 1.0).unwrap();
        let r = predicted_constants(&m, &two_delta(1.5, 2.0, 1.0), 1).unwrap();
        assert_eq!(r.regressor, Regressor::G3Squared);
        assert!((r.predicted_slope + 1.0 / 10.0).abs() < 1e-15);
        let r = predicted_constants(&m, &two_delta(0.5, 2.0, 1.0), 1).unwrap();
        assert!((r.predicted_slope + 1.0 / 8.0).abs() < 1e-15);
        assert!(matches!(
            predicted_constants(&m, &two_delta(1.0, 2.0, 1.0), 1),
            Err(Error::HypothesisUnmet { .. })
        ));
        let hard = InteractionModel::strauss(f64::INFINITY, 1.0, 1.0).unwrap();
        assert!(matches!(predicted_constants(&hard, &v, 1), Err(Error::HypothesisUnmet { .. })));
    }

    #[test]
    fn large_well_gives_bound_only() {
        let v = SingleSitePotential::single(RadialProfile::Square { depth: 1.0, radius: 0.75 });
        let m = InteractionModel::strauss(1.0, 1.0, 1.0).unwrap();
        let r = predicted_constants(&m, &v, 1).unwrap();
        assert!(!r.sharp);
        // support length 1.5, r = 1: two points fit, T = 2 near a0
        assert!((r.sup_a_over_t.unwrap() - 0.5).abs() < 1e-9);
    }
}
