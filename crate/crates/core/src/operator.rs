//! Grid Hamiltonians `−Δ + V` and their spectral counting.
//!
//! Counting uses Sylvester's law of inertia: the number of negative pivots
//! of an `LDLᴴ` factorization of `H − E` equals the number of eigenvalues
//! below `E`. Real tridiagonal matrices use the Sturm recurrence; everything
//! else is reordered by reverse Cuthill-McKee and factored inside its
//! envelope.

use std::collections::VecDeque;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::potential::{Boundary, Field, GridSpec};

pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn abs2(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn finite(self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn re(self) -> f64 {
        self
    }
    fn abs2(self) -> f64 {
        self * self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Hermitian matrix in compressed-row storage holding both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Scalar> SparseHermitian<T> {
    /// Build from `(row, col, value)` triplets; duplicates are summed. The
    /// result must be exactly Hermitian.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(invalid("triplets", format!("index ({i}, {j}) out of range {n}")));
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    let k = vals.len() - 1;
                    vals[k] += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(cols.len());
        }
        let m = SparseHermitian {
            n,
            row_ptr,
            cols,
            vals,
        };
        if m.hermiticity_defect() != 0.0 {
            return Err(invalid("triplets", "matrix is not exactly Hermitian"));
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let a = self.row_ptr[i];
        let b = self.row_ptr[i + 1];
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => T::zero(),
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.get(i, i).re()
    }

    /// `max |a_ij − conj(a_ji)|` over stored entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                let d = (a - self.get(j, i).conj()).abs2().sqrt();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let (c, v) = self.row(i);
            let mut s = T::zero();
            for (&j, &a) in c.iter().zip(v) {
                s += a * x[j];
            }
            *yi = s;
        }
    }

    /// Gershgorin interval `[lo, hi]` containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            let mut r = 0.0;
            let mut d = 0.0;
            for (&j, &a) in c.iter().zip(v) {
                if j == i {
                    d = a.re();
                } else {
                    r += a.abs2().sqrt();
                }
            }
            lo = lo.min(d - r);
            hi = hi.max(d + r);
        }
        if self.n == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    fn is_tridiagonal(&self) -> bool {
        (0..self.n).all(|i| self.row(i).0.iter().all(|&j| j + 1 >= i && j <= i + 1))
    }

    fn to_dense(&self) -> Vec<Vec<T>> {
        let mut a = vec![vec![T::zero(); self.n]; self.n];
        for (i, row) in a.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                row[j] = x;
            }
        }
        a
    }
}

/// Reverse Cuthill-McKee ordering of the adjacency graph. `perm[new] = old`.
pub fn rcm_ordering<T: Scalar>(a: &SparseHermitian<T>) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_last = |start: usize, seen: &mut Vec<bool>| -> (usize, Vec<usize>) {
        let mut q = VecDeque::new();
        let mut comp = Vec::new();
        q.push_back(start);
        seen[start] = true;
        while let Some(u) = q.pop_front() {
            comp.push(u);
            let mut nb: Vec<usize> = a.row(u).0.iter().copied().filter(|&v| !seen[v]).collect();
            nb.sort_by_key(|&v| (degree[v], v));
            for v in nb {
                seen[v] = true;
                q.push_back(v);
            }
        }
        (*comp.last().unwrap_or(&start), comp)
    };
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    for &s in &by_degree {
        if visited[s] {
            continue;
        }
        // pseudo-peripheral start: two BFS passes from a low-degree node
        let mut scratch = visited.clone();
        let (far, _) = bfs_last(s, &mut scratch);
        let mut scratch = visited.clone();
        let (far2, _) = bfs_last(far, &mut scratch);
        let start = if degree[far2] <= degree[s] { far2 } else { s };
        let (_, comp) = bfs_last(start, &mut visited);
        order.extend(comp);
    }
    order.reverse();
    order
}

/// Symbolic envelope structure under a fixed ordering.
#[derive(Debug, Clone)]
struct Envelope {
    perm: Vec<usize>,
    inv: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
}

impl Envelope {
    fn new<T: Scalar>(a: &SparseHermitian<T>) -> Self {
        let perm = rcm_ordering(a);
        let n = a.dim();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first = vec![0; n];
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            let old = perm[i];
            let f = a.row(old).0.iter().map(|&j| inv[j]).filter(|&j| j <= i).min().unwrap_or(i);
            first[i] = f;
            offset.push(offset[i] + (i - f));
        }
        Envelope {
            perm,
            inv,
            first,
            offset,
        }
    }
}

/// `LDLᴴ` factor of `A − σ` inside the envelope, with real `D`.
struct Factor<T> {
    l: Vec<T>,
    d: Vec<f64>,
    negatives: usize,
    perturbations: usize,
}

fn factor<T: Scalar>(a: &SparseHermitian<T>, env: &Envelope, sigma: f64, pivmin: f64) -> Option<Factor<T>> {
    let n = a.dim();
    let mut l = vec![T::zero(); *env.offset.last().unwrap_or(&0)];
    let mut d = vec![0.0; n];
    let mut negatives = 0;
    let mut perturbations = 0;
    let mut ld = vec![T::zero(); n];
    for i in 0..n {
        let fi = env.first[i];
        let base = env.offset[i];
        // scatter row i of A (lower part) into the envelope
        let old = env.perm[i];
        let (c, v) = a.row(old);
        for (&jo, &x) in c.iter().zip(v) {
            let j = env.inv[jo];
            if j < i {
                l[base + (j - fi)] = x;
            }
        }
        let mut dii = a.get(old, old).re() - sigma;
        for j in fi..i {
            let fj = env.first[j];
            let k0 = fi.max(fj);
            let bj = env.offset[j];
            let mut s = l[base + (j - fi)];
            for k in k0..j {
                s -= ld[k] * l[bj + (k - fj)].conj();
            }
            let lij = s.scale(1.0 / d[j]);
            l[base + (j - fi)] = lij;
            ld[j] = lij.scale(d[j]);
            dii -= lij.abs2() * d[j];
        }
        if !dii.is_finite() {
            return None;
        }
        if dii.abs() < pivmin {
            dii = pivmin;
            perturbations += 1;
        }
        if dii < 0.0 {
            negatives += 1;
        }
        d[i] = dii;
        for j in fi..i {
            ld[j] = T::zero();
        }
    }
    if l.iter().any(|x| !x.finite()) {
        return None;
    }
    Some(Factor {
        l,
        d,
        negatives,
        perturbations,
    })
}

fn solve<T: Scalar>(f: &Factor<T>, env: &Envelope, b: &[T]) -> Vec<T> {
    let n = b.len();
    let mut y: Vec<T> = (0..n).map(|i| b[env.perm[i]]).collect();
    for i in 0..n {
        let fi = env.first[i];
        let base = env.offset[i];
        let mut s = y[i];
        for j in fi..i {
            s -= f.l[base + (j - fi)] * y[j];
        }
        y[i] = s;
    }
    for i in 0..n {
        y[i] = y[i].scale(1.0 / f.d[i]);
    }
    for i in (0..n).rev() {
        let fi = env.first[i];
        let base = env.offset[i];
        let xi = y[i];
        for j in fi..i {
            let lij = f.l[base + (j - fi)];
            y[j] -= lij.conj() * xi;
        }
    }
    let mut x = vec![T::zero(); n];
    for i in 0..n {
        x[env.perm[i]] = y[i];
    }
    x
}

#[derive(Debug, Clone)]
pub enum MatrixData {
    Real(SparseHermitian<f64>),
    Complex(SparseHermitian<Complex64>),
}

/// Sparse Hermitian discretization of `−Δ + V`.
#[derive(Debug)]
pub struct HamiltonianMatrix {
    pub data: MatrixData,
    pub grid: Option<GridSpec>,
    scale: f64,
    tridiagonal: bool,
    envelope: OnceLock<Envelope>,
}

impl Clone for HamiltonianMatrix {
    fn clone(&self) -> Self {
        HamiltonianMatrix {
            data: self.data.clone(),
            grid: self.grid,
            scale: self.scale,
            tridiagonal: self.tridiagonal,
            envelope: OnceLock::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertiaResult {
    pub count: usize,
    pub shift: f64,
    pub perturbations: usize,
    pub retried: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EigenVector {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl EigenVector {
    /// Real parts (the vector itself for real matrices).
    pub fn real(&self) -> Vec<f64> {
        match self {
            EigenVector::Real(v) => v.clone(),
            EigenVector::Complex(v) => v.iter().map(|z| z.re).collect(),
        }
    }

    /// Moduli of the components.
    pub fn abs(&self) -> Vec<f64> {
        match self {
            EigenVector::Real(v) => v.iter().map(|x| x.abs()).collect(),
            EigenVector::Complex(v) => v.iter().map(|z| z.norm()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: EigenVector,
    pub bracket: (f64, f64),
    pub residual: f64,
    pub iterations: usize,
}

impl HamiltonianMatrix {
    pub fn from_real(m: SparseHermitian<f64>) -> Self {
        Self::wrap(MatrixData::Real(m), None)
    }

    pub fn from_complex(m: SparseHermitian<Complex64>) -> Self {
        Self::wrap(MatrixData::Complex(m), None)
    }

    fn wrap(data: MatrixData, grid: Option<GridSpec>) -> Self {
        let (lo, hi, tri) = match &data {
            MatrixData::Real(m) => {
                let (lo, hi) = m.gershgorin();
                (lo, hi, m.is_tridiagonal())
            }
            MatrixData::Complex(m) => {
                let (lo, hi) = m.gershgorin();
                (lo, hi, false)
            }
        };
        HamiltonianMatrix {
            data,
            grid,
            scale: lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE),
            tridiagonal: tri,
            envelope: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.data {
            MatrixData::Real(m) => m.dim(),
            MatrixData::Complex(m) => m.dim(),
        }
    }

    /// Magnitude scale `max |Gershgorin bound|` used for relative tolerances.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        match &self.data {
            MatrixData::Real(m) => m.gershgorin(),
            MatrixData::Complex(m) => m.gershgorin(),
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        match &self.data {
            MatrixData::Real(m) => m.hermiticity_defect(),
            MatrixData::Complex(m) => m.hermiticity_defect(),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.data, MatrixData::Complex(_))
    }

    /// Dense copy (complex entries), for testing against dense solvers.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        match &self.data {
            MatrixData::Real(m) => m
                .to_dense()
                .into_iter()
                .map(|r| r.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
                .collect(),
            MatrixData::Complex(m) => m.to_dense(),
        }
    }

    fn envelope(&self) -> &Envelope {
        self.envelope.get_or_init(|| match &self.data {
            MatrixData::Real(m) => Envelope::new(m),
            MatrixData::Complex(m) => Envelope::new(m),
        })
    }

    fn pivmin(&self) -> f64 {
        f64::EPSILON * self.scale * 1e-2
    }

    fn sturm(&self, m: &SparseHermitian<f64>, e: f64) -> InertiaResult {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut perturbations = 0;
        let mut q = 1.0;
        for i in 0..m.dim() {
            let b2 = if i > 0 { m.get(i, i - 1).powi(2) } else { 0.0 };
            q = m.diag(i) - e - if i > 0 { b2 / q } else { 0.0 };
            if q.abs() < pivmin {
                q = pivmin;
                perturbations += 1;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        InertiaResult {
            count,
            shift: e,
            perturbations,
            retried: false,
        }
    }

    fn ldl_count(&self, e: f64) -> Option<InertiaResult> {
        let env = self.envelope();
        let pivmin = self.pivmin();
        let f = match &self.data {
            MatrixData::Real(m) => factor(m, env, e, pivmin).map(|f| (f.negatives, f.perturbations)),
            MatrixData::Complex(m) => factor(m, env, e, pivmin).map(|f| (f.negatives, f.perturbations)),
        };
        f.map(|(count, perturbations)| InertiaResult {
            count,
            shift: e,
            perturbations,
            retried: false,
        })
    }

    /// Number of eigenvalues strictly below `e`.
    pub fn count_below(&self, e: f64) -> Result<InertiaResult> {
        if !e.is_finite() {
            return Err(invalid("energy", "must be finite"));
        }
        if let (MatrixData::Real(m), true) = (&self.data, self.tridiagonal) {
            return Ok(self.sturm(m, e));
        }
        if let Some(r) = self.ldl_count(e) {
            return Ok(r);
        }
        let shifted = e + 1e-10 * e.abs().max(self.scale * f64::EPSILON);
        match self.ldl_count(shifted) {
            Some(mut r) => {
                r.retried = true;
                Ok(r)
            }
            None => Err(Error::FactorizationBreakdown { shift: shifted }),
        }
    }

    /// Eigenvalues `≤ e`, implemented as `< e + 1e−12·scale`.
    pub fn count_at_most(&self, e: f64) -> Result<InertiaResult> {
        self.count_below(e + 1e-12 * self.scale)
    }

    /// Smallest eigenvalue and eigenvector. The eigenvalue is bracketed by
    /// inertia bisection, then refined by inverse iteration shifted to the
    /// lower end of the bracket.
    pub fn smallest_eigenpair(&self, tol: f64) -> Result<Eigenpair> {
        if !(tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        let n = self.dim();
        if n == 0 {
            return Err(invalid("matrix", "empty matrix"));
        }
        let (mut lo, mut hi) = self.gershgorin();
        let width = 1e-8 * self.scale;
        for _ in 0..200 {
            if hi - lo <= width {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid)?.count >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        match &self.data {
            MatrixData::Real(m) => {
                let (value, mut v, residual, it) = self.inverse_iteration(m, lo, hi, tol)?;
                // fix the sign so the dominant component is positive
                let big = v.iter().copied().fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a });
                if big < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                Ok(Eigenpair {
                    value,
                    vector: EigenVector::Real(v),
                    bracket: (lo, hi),
                    residual,
                    iterations: it,
                })
            }
            MatrixData::Complex(m) => {
                let (value, v, residual, it) = self.inverse_iteration(m, lo, hi, tol)?;
                Ok(Eigenpair {
                    value,
                    vector: EigenVector::Complex(v),
                    bracket: (lo, hi),
                    residual,
                    iterations: it,
                })
            }
        }
    }

    fn inverse_iteration<T: Scalar>(
        &self,
        m: &SparseHermitian<T>,
        lo: f64,
        hi: f64,
        tol: f64,
    ) -> Result<(f64, Vec<T>, f64, usize)> {
        let n = m.dim();
        let env = self.envelope();
        let sigma = lo - 1e-3 * (hi - lo).max(1e-14 * self.scale);
        let f = factor(m, env, sigma, self.pivmin()).ok_or(Error::FactorizationBreakdown { shift: sigma })?;
        let mut v: Vec<T> = (0..n)
            .map(|i| {
                let t = ((i as f64 + 1.0) * 12.9898).sin() * 43758.5453;
                T::from_real(1.0 + 0.5 * (t - t.floor()))
            })
            .collect();
        normalize(&mut v);
        let mut hv = vec![T::zero(); n];
        let target = tol * self.scale;
        for it in 1..=200 {
            let mut w = solve(&f, env, &v);
            normalize(&mut w);
            v = w;
            m.matvec(&v, &mut hv);
            let rho: f64 = v.iter().zip(&hv).map(|(a, b)| (a.conj() * *b).re()).sum();
            let res: f64 = hv
                .iter()
                .zip(&v)
                .map(|(a, b)| (*a - b.scale(rho)).abs2())
                .sum::<f64>()
                .sqrt();
            if res <= target {
                return Ok((rho, v, res, it));
            }
        }
        Err(Error::NoConvergence { lo, hi })
    }
}

fn normalize<T: Scalar>(v: &mut [T]) {
    let s = v.iter().map(|x| x.abs2()).sum::<f64>().sqrt();
    if s > 0.0 {
        for x in v.iter_mut() {
            *x = x.scale(1.0 / s);
        }
    }
}

/// Assemble `−Δ + field` on `grid`: off-diagonal stencil entries `−1/h²`,
/// diagonal `2d/h² + field`, with Bloch phases on wrap-around couplings.
pub fn build_hamiltonian(grid: &GridSpec, field: &[f64]) -> Result<HamiltonianMatrix> {
    grid.validate()?;
    let n = grid.node_count();
    if field.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            got: field.len(),
        });
    }
    let dim = grid.dim();
    let m = grid.nodes_per_axis();
    let h2 = 1.0 / (grid.h * grid.h);
    let strides: Vec<usize> = (0..dim).map(|a| m.pow((dim - 1 - a) as u32)).collect();
    match grid.boundary {
        Boundary::Dirichlet => {
            let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(n * (2 * dim + 1));
            for i in 0..n {
                t.push((i, i, 2.0 * dim as f64 * h2 + field[i]));
                for &s in &strides {
                    let j = (i / s) % m;
                    if j + 1 < m {
                        t.push((i, i + s, -h2));
                        t.push((i + s, i, -h2));
                    }
                }
            }
            let sh = SparseHermitian::from_triplets(n, &t)?;
            Ok(HamiltonianMatrix::wrap(MatrixData::Real(sh), Some(*grid)))
        }
        Boundary::Bloch { theta } => {
            if m < 3 {
                return Err(invalid("h", "periodic grids need at least 3 nodes per axis"));
            }
            let side = grid.region.side;
            let phases: Vec<Complex64> = (0..dim)
                .map(|a| Complex64::from_polar(1.0, side * theta[a]))
                .collect();
            let real = theta[..dim].iter().all(|&t| t == 0.0);
            let mut t: Vec<(usize, usize, Complex64)> = Vec::with_capacity(n * (2 * dim + 1));
            for i in 0..n {
                t.push((i, i, Complex64::new(2.0 * dim as f64 * h2 + field[i], 0.0)));
                for (a, &s) in strides.iter().enumerate() {
                    let j = (i / s) % m;
                    if j + 1 < m {
                        let k = i + s;
                        t.push((i, k, Complex64::new(-h2, 0.0)));
                        t.push((k, i, Complex64::new(-h2, 0.0)));
                    } else {
                        // ψ(x + n e_a) = e^{i n θ_a} ψ(x)
                        let k = i - j * s;
                        let c = phases[a] * -h2;
                        t.push((i, k, c));
                        t.push((k, i, c.conj()));
                    }
                }
            }
            if real {
                let tr: Vec<(usize, usize, f64)> = t.iter().map(|&(i, j, v)| (i, j, v.re)).collect();
                let sh = SparseHermitian::from_triplets(n, &tr)?;
                Ok(HamiltonianMatrix::wrap(MatrixData::Real(sh), Some(*grid)))
            } else {
                let sh = SparseHermitian::from_triplets(n, &t)?;
                Ok(HamiltonianMatrix::wrap(MatrixData::Complex(sh), Some(*grid)))
            }
        }
    }
}

/// Convenience wrapper taking an assembled [`Field`].
pub fn hamiltonian_from_field(field: &Field) -> Result<HamiltonianMatrix> {
    build_hamiltonian(&field.grid, &field.values)
}

pub fn count_below(h: &HamiltonianMatrix, e: f64) -> Result<InertiaResult> {
    h.count_below(e)
}

pub fn smallest_eigenpair(h: &HamiltonianMatrix, tol: f64) -> Result<Eigenpair> {
    h.smallest_eigenpair(tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Cube;
    use nalgebra::{DMatrix, SymmetricEigen};

    fn dense_eigs(h: &HamiltonianMatrix) -> Vec<f64> {
        let a = h.to_dense();
        let n = a.len();
        // Hermitian n×n as real symmetric 2n×2n: [[A_re, −A_im], [A_im, A_re]]
        let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = a[i][j].re;
                m[(i + n, j + n)] = a[i][j].re;
                m[(i, j + n)] = -a[i][j].im;
                m[(i + n, j)] = a[i][j].im;
            }
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        // each eigenvalue appears twice
        ev.chunks(2).map(|c| c[0]).collect()
    }

    #[test]
    fn dirichlet_three_nodes() {
        let g = GridSpec::dirichlet(Cube::centered(1, 4.0).unwrap(), 1.0).unwrap();
        let h = build_hamiltonian(&g, &[0.0; 3]).unwrap();
        let d = h.to_dense();
        let want = [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d[i][j].re, want[i][j]);
                assert_eq!(d[i][j].im, 0.0);
            }
        }
        assert!(matches!(
            build_hamiltonian(&g, &[0.0; 2]),
            Err(Error::ShapeMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn bloch_zero_phase_is_real_circulant() {
        let g = GridSpec::periodic(Cube::torus(1, 5.0).unwrap(), 1.0).unwrap();
        let h = build_hamiltonian(&g, &[0.0; 5]).unwrap();
        assert!(!h.is_complex());
        let d = h.to_dense();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(d[i][j], d[(i + 1) % 5][(j + 1) % 5]);
            }
        }
        assert_eq!(d[0][4].re, -1.0);
    }

    #[test]
    fn bloch_phase_matrix_is_hermitian_and_matches_dense() {
        let t = Cube::torus(2, 2.0).unwrap();
        let g = GridSpec::bloch(t, 0.5, [0.4, 1.1, 0.0]).unwrap();
        let field: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
        let h = build_hamiltonian(&g, &field).unwrap();
        assert!(h.is_complex());
        assert_eq!(h.hermiticity_defect(), 0.0);
        let ev = dense_eigs(&h);
        for e in [-1.0, 3.3, 8.1, 15.2] {
            let want = ev.iter().filter(|&&x| x < e).count();
            assert_eq!(h.count_below(e).unwrap().count, want, "E={e}");
        }
    }

    #[test]
    fn constant_field_shifts_spectrum() {
        let g = GridSpec::dirichlet(Cube::centered(2, 2.0).unwrap(), 0.25).unwrap();
        let n = g.node_count();
        let h0 = build_hamiltonian(&g, &vec![0.0; n]).unwrap();
        let h1 = build_hamiltonian(&g, &vec![3.0; n]).unwrap();
        let e0 = dense_eigs(&h0);
        let e1 = dense_eigs(&h1);
        for (a, b) in e0.iter().zip(&e1) {
            assert!((b - a - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn diagonal_counts() {
        let m = SparseHermitian::from_triplets(3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)]).unwrap();
        let h = HamiltonianMatrix::from_real(m);
        assert_eq!(h.count_below(2.5).unwrap().count, 2);
        assert_eq!(h.count_below(0.5).unwrap().count, 0);
    }

    #[test]
    fn diagonal_eigenpair() {
        let m = SparseHermitian::from_triplets(3, &[(0, 0, -3.0), (1, 1, 0.0), (2, 2, 5.0)]).unwrap();
        let h = HamiltonianMatrix::from_real(m);
        let p = h.smallest_eigenpair(1e-10).unwrap();
        assert!((p.value + 3.0).abs() < 1e-9);
        let v = p.vector.real();
        assert!((v[0] - 1.0).abs() < 1e-9 && v[1].abs() < 1e-9 && v[2].abs() < 1e-9);
    }

    #[test]
    fn rejects_non_hermitian() {
        assert!(SparseHermitian::from_triplets(2, &[(0, 1, 1.0), (1, 0, 2.0)]).is_err());
    }

    #[test]
    fn sturm_and_ldl_agree_on_tridiagonal() {
        let g = GridSpec::dirichlet(Cube::centered(1, 10.0).unwrap(), 0.1).unwrap();
        let field: Vec<f64> = (0..g.node_count()).map(|i| -5.0 * ((i as f64) * 0.31).cos()).collect();
        let h = build_hamiltonian(&g, &field).unwrap();
        for e in [-4.0, -1.0, 0.5, 7.0, 120.0] {
            let sturm = h.count_below(e).unwrap().count;
            let ldl = h.ldl_count(e).unwrap().count;
            assert_eq!(sturm, ldl, "E={e}");
        }
    }

    #[test]
    fn free_dirichlet_ground_state() {
        let l = 1.0;
        let g = GridSpec::dirichlet(Cube::centered(1, l).unwrap(), l / 2000.0).unwrap();
        let h = build_hamiltonian(&g, &vec![0.0; g.node_count()]).unwrap();
        let p = h.smallest_eigenpair(1e-10).unwrap();
        let exact = std::f64::consts::PI.powi(2) / (l * l);
        assert!(((p.value - exact) / exact).abs() < 1e-4);
    }
}
