//! Distance-induced neighbour graphs and their spectral properties.
//!
//! Neighbour sets follow `N_i = { j : ‖X_i − X_j‖ < r }`. Because `‖X_i − X_i‖ = 0 < r`
//! every agent is its own neighbour by default, which makes the averaging
//! matrix `P = T⁻¹A` row-stochastic. The self-exclusive variant is available
//! for sensitivity runs through [`ProximityGraph::build_with`].

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::ops::Div;

use nalgebra::{DMatrix, DVector, RealField};
use num_traits::{Float, FromPrimitive, One, Zero};
use serde::{Deserialize, Serialize};

use crate::dynamics::Role;
use crate::{Error, Result, Scalar};

/// Above this node count only the extremal Laplacian eigenvalues are computed.
pub const DENSE_EIGEN_LIMIT: usize = 5000;

/// Eigenvalues below this are treated as zero when deciding connectivity.
pub const CONNECTIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position2D<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Position2D<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn in_unit_square(&self) -> bool {
        let (zero, one) = (T::zero(), T::one());
        self.x >= zero && self.x <= one && self.y >= zero && self.y <= one
    }
}

/// Buckets points into square cells of side `reach` so that every pair within
/// `reach` lies in the same or an adjacent cell.
fn for_each_close_pair<T: Scalar>(
    positions: &[Position2D<T>],
    reach: T,
    mut visit: impl FnMut(usize, usize, T),
) {
    let cell = |p: &Position2D<T>| -> (i64, i64) {
        let cx = (p.x / reach).floor().to_i64().unwrap_or(i64::MAX);
        let cy = (p.y / reach).floor().to_i64().unwrap_or(i64::MAX);
        (cx, cy)
    };
    let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in positions.iter().enumerate() {
        cells.entry(cell(p)).or_default().push(i);
    }
    for (&(cx, cy), members) in &cells {
        for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                let key = (cx.saturating_add(dx), cy.saturating_add(dy));
                // each unordered cell pair once
                if key < (cx, cy) {
                    continue;
                }
                let Some(others) = cells.get(&key) else { continue };
                let same = key == (cx, cy);
                for (a, &i) in members.iter().enumerate() {
                    let start = if same { a + 1 } else { 0 };
                    for &j in &others[start..] {
                        let d = positions[i].distance(&positions[j]);
                        if d <= reach {
                            visit(i, j, d);
                        }
                    }
                }
            }
        }
    }
}

fn validate_positions<T: Scalar>(positions: &[Position2D<T>], radius: T) -> Result<()> {
    if positions.is_empty() {
        return Err(Error::EmptySwarm);
    }
    if !(radius > T::zero()) || !radius.is_finite() {
        return Err(Error::param("radius", format!("must be positive and finite, got {radius}")));
    }
    if let Some(i) = positions.iter().position(|p| !p.is_finite()) {
        return Err(Error::param("positions", format!("agent {i} has a non-finite coordinate")));
    }
    Ok(())
}

/// Undirected proximity graph with sorted neighbour lists.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityGraph<T> {
    radius: T,
    self_inclusive: bool,
    neighbors: Vec<Vec<usize>>,
}

impl<T: Scalar> ProximityGraph<T> {
    /// Self-inclusive graph: `(i, j)` is an edge iff `‖X_i − X_j‖ < radius`.
    pub fn build(positions: &[Position2D<T>], radius: T) -> Result<Self> {
        Self::build_with(positions, radius, true)
    }

    pub fn build_with(positions: &[Position2D<T>], radius: T, self_inclusive: bool) -> Result<Self> {
        validate_positions(positions, radius)?;
        let n = positions.len();
        let mut neighbors: Vec<Vec<usize>> = if self_inclusive {
            (0..n).map(|i| vec![i]).collect()
        } else {
            vec![Vec::new(); n]
        };
        for_each_close_pair(positions, radius, |i, j, d| {
            if d < radius {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        });
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self { radius, self_inclusive, neighbors })
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn is_self_inclusive(&self) -> bool {
        self.self_inclusive
    }

    /// Sorted neighbour list of `i` (contains `i` itself in self-inclusive graphs).
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Edges `(i, j)` with `i < j`; self-edges are never listed.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }

    pub fn same_neighborhoods(&self, other: &Self) -> bool {
        self.neighbors == other.neighbors
    }

    pub fn component_count(&self) -> usize {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        let mut components = 0;
        for root in 0..n {
            if seen[root] {
                continue;
            }
            components += 1;
            seen[root] = true;
            queue.push_back(root);
            while let Some(i) = queue.pop_front() {
                for &j in &self.neighbors[i] {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        components
    }

    /// True iff a single connected component spans all nodes.
    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    /// Row-stochastic averaging matrix, `P_ij = 1/d_i` on edges.
    ///
    /// Generic over the entry type so the row-sum identity can be checked in
    /// exact rational arithmetic. Agents without neighbours (self-exclusive
    /// convention only) hold their state, i.e. `P_ii = 1`.
    pub fn averaging_matrix<R>(&self) -> DMatrix<R>
    where
        R: nalgebra::Scalar + Zero + One + FromPrimitive + Div<Output = R>,
    {
        let n = self.node_count();
        let mut p = DMatrix::from_element(n, n, R::zero());
        for (i, list) in self.neighbors.iter().enumerate() {
            if list.is_empty() {
                p[(i, i)] = R::one();
                continue;
            }
            let w = R::one() / R::from_usize(list.len()).expect("degree representable");
            for &j in list {
                p[(i, j)] = w.clone();
            }
        }
        p
    }

    /// Scales `x` by the symmetric normalised adjacency `T^{-1/2} A T^{-1/2}`.
    fn normalized_adjacency_apply(&self, inv_sqrt_deg: &[T], x: &[T], out: &mut [T]) {
        for (i, list) in self.neighbors.iter().enumerate() {
            let acc = list.iter().fold(T::zero(), |acc, &j| acc + inv_sqrt_deg[j] * x[j]);
            out[i] = if list.is_empty() { x[i] } else { inv_sqrt_deg[i] * acc };
        }
    }

    fn inverse_sqrt_degrees(&self) -> Vec<T> {
        self.neighbors
            .iter()
            .map(|l| if l.is_empty() { T::zero() } else { T::one() / T::from_count(l.len()).sqrt() })
            .collect()
    }
}

impl<T: Scalar + RealField> ProximityGraph<T> {
    /// `ℒ = I − T^{-1/2} A T^{-1/2}` on the same adjacency used by the averaging
    /// matrix, so that `eig(P) = 1 − eig(ℒ)`. Isolated nodes get a zero row.
    pub fn normalized_laplacian(&self) -> DMatrix<T> {
        let n = self.node_count();
        let inv = self.inverse_sqrt_degrees();
        let mut l = DMatrix::from_element(n, n, T::zero());
        for (i, list) in self.neighbors.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            l[(i, i)] = T::one();
            for &j in list {
                l[(i, j)] -= inv[i] * inv[j];
            }
        }
        l
    }

    pub fn spectral_summary(&self) -> Result<SpectralSummary<T>> {
        self.spectral_summary_with_limit(DENSE_EIGEN_LIMIT)
    }

    /// Dense eigendecomposition up to `dense_limit` nodes, extremal
    /// eigenvalues by power iteration above it.
    pub fn spectral_summary_with_limit(&self, dense_limit: usize) -> Result<SpectralSummary<T>> {
        let n = self.node_count();
        if n == 1 {
            return Ok(SpectralSummary::singleton());
        }
        let (eigenvalues, lambda1, lambda_max) = if n <= dense_limit {
            let eig = dense_symmetric_eigenvalues(self.normalized_laplacian())?;
            let (l1, lmax) = (eig[1], eig[n - 1]);
            (eig, l1, lmax)
        } else {
            let (l1, lmax) = self.extremal_eigenvalues()?;
            (Vec::new(), l1, lmax)
        };
        let one = T::one();
        let spectral_gap = Float::max(Float::abs(one - lambda1), Float::abs(one - lambda_max));
        Ok(SpectralSummary {
            eigenvalues,
            lambda1,
            lambda_max,
            spectral_gap,
            is_connected: lambda1 > T::lit(CONNECTIVITY_TOL),
        })
    }

    fn extremal_eigenvalues(&self) -> Result<(T, T)> {
        let n = self.node_count();
        let inv = self.inverse_sqrt_degrees();
        let half = T::lit(0.5);
        // top eigenvector of S for the connected part: sqrt(d_i)
        let mut u0: Vec<T> = self
            .neighbors
            .iter()
            .map(|l| Float::sqrt(T::from_count(l.len())))
            .collect();
        normalize(&mut u0);
        let mut scratch = vec![T::zero(); n];

        // (I + S)/2 deflated by u0 -> (1 + μ₂)/2
        let top = power_iteration(n, |x, out| {
            let mut y = x.to_vec();
            project_out(&mut y, &u0);
            self.normalized_adjacency_apply(&inv, &y, &mut scratch);
            for i in 0..n {
                out[i] = half * (y[i] + scratch[i]);
            }
            project_out(out, &u0);
        })?;
        let mu2 = top + top - T::one();

        let mut scratch = vec![T::zero(); n];
        // (I − S)/2 -> (1 − μ_min)/2
        let bottom = power_iteration(n, |x, out| {
            self.normalized_adjacency_apply(&inv, x, &mut scratch);
            for i in 0..n {
                out[i] = half * (x[i] - scratch[i]);
            }
        })?;
        Ok((T::one() - mu2, bottom + bottom))
    }
}

fn normalize<T: Scalar>(v: &mut [T]) {
    let norm = v.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
    if norm > T::zero() {
        v.iter_mut().for_each(|x| *x = *x / norm);
    }
}

fn project_out<T: Scalar>(v: &mut [T], unit: &[T]) {
    let dot = v.iter().zip(unit).fold(T::zero(), |a, (&x, &u)| a + x * u);
    v.iter_mut().zip(unit).for_each(|(x, &u)| *x = *x - dot * u);
}

/// Dominant eigenvalue of a positive semidefinite operator.
fn power_iteration<T: Scalar>(n: usize, mut apply: impl FnMut(&[T], &mut [T])) -> Result<T> {
    const MAX_ITERS: usize = 200_000;
    let tol = Float::sqrt(T::epsilon()) * T::lit(1e-2);
    let mut x: Vec<T> = (0..n).map(|i| T::one() + T::from_count(i % 7) / T::lit(7.0)).collect();
    normalize(&mut x);
    let mut y = vec![T::zero(); n];
    let mut residual = T::infinity();
    for _ in 0..MAX_ITERS {
        apply(&x, &mut y);
        let rayleigh = x.iter().zip(&y).fold(T::zero(), |a, (&p, &q)| a + p * q);
        residual = x
            .iter()
            .zip(&y)
            .fold(T::zero(), |a, (&p, &q)| {
                let r = q - rayleigh * p;
                a + r * r
            })
            .sqrt();
        if residual <= tol {
            return Ok(rayleigh);
        }
        std::mem::swap(&mut x, &mut y);
        normalize(&mut x);
        if x.iter().all(|v| v.is_zero()) {
            return Ok(T::zero());
        }
    }
    Err(Error::EigenNonConvergence { residual: residual.as_f64() })
}

/// Ascending eigenvalues of a symmetric matrix, verified by residual.
pub(crate) fn dense_symmetric_eigenvalues<T: Scalar + RealField>(m: DMatrix<T>) -> Result<Vec<T>> {
    let n = m.nrows();
    let check = m.clone();
    let Some(eig) = nalgebra::SymmetricEigen::try_new(m, <T as Float>::epsilon(), 100 * n.max(10))
    else {
        return Err(Error::EigenNonConvergence { residual: f64::INFINITY });
    };
    let residual = (&check * &eig.eigenvectors
        - &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues))
        .column_iter()
        .map(|c| c.norm())
        .fold(T::zero(), Float::max);
    let tol = Float::sqrt(<T as Float>::epsilon()) * T::from_count(n.max(1));
    if !(residual <= tol) {
        return Err(Error::EigenNonConvergence { residual: residual.as_f64() });
    }
    let mut values: Vec<T> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(values)
}

/// Spectral (2-)norm `‖A − B‖`, the largest singular value of the difference.
pub fn matrix_deviation<T: Scalar + RealField>(p_now: &DMatrix<T>, p_initial: &DMatrix<T>) -> Result<T> {
    if p_now.shape() != p_initial.shape() {
        return Err(Error::DimensionMismatch { left: p_now.shape(), right: p_initial.shape() });
    }
    let diff = p_now - p_initial;
    if diff.iter().all(|v| v.is_zero()) {
        return Ok(T::zero());
    }
    let sv: DVector<T> = diff.singular_values();
    Ok(sv.iter().copied().fold(T::zero(), Float::max))
}

pub fn build_graph<T: Scalar>(positions: &[Position2D<T>], radius: T) -> Result<ProximityGraph<T>> {
    ProximityGraph::build(positions, radius)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary<T> {
    /// All eigenvalues of `ℒ` in ascending order; empty when only the extremal
    /// ones were computed.
    pub eigenvalues: Vec<T>,
    pub lambda1: T,
    pub lambda_max: T,
    /// `max(|1 − λ₁|, |1 − λ_{n−1}|)`.
    pub spectral_gap: T,
    pub is_connected: bool,
}

impl<T: Scalar> SpectralSummary<T> {
    /// A single node has the lone eigenvalue 0; it is reported connected with
    /// `λ₁ = λ_max = gap = 0`.
    fn singleton() -> Self {
        Self {
            eigenvalues: vec![T::zero()],
            lambda1: T::zero(),
            lambda_max: T::zero(),
            spectral_gap: T::zero(),
            is_connected: true,
        }
    }

    pub fn record(&self, radius: T) -> SpectralRecord {
        SpectralRecord {
            n: self.eigenvalues.len(),
            radius: radius.as_f64(),
            lambda1: self.lambda1.as_f64(),
            lambda_n1: self.lambda_max.as_f64(),
            gap: self.spectral_gap.as_f64(),
            connected: self.is_connected,
        }
    }
}

/// JSON export record for a spectral summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralRecord {
    pub n: usize,
    pub radius: f64,
    pub lambda1: f64,
    #[serde(rename = "lambdaN1")]
    pub lambda_n1: f64,
    pub gap: f64,
    pub connected: bool,
}

impl<T: Scalar + RealField> ProximityGraph<T> {
    pub fn spectral_record(&self) -> Result<SpectralRecord> {
        let summary = self.spectral_summary()?;
        let mut record = summary.record(self.radius);
        record.n = self.node_count();
        Ok(record)
    }
}

impl<T: Scalar> ProximityGraph<T> {
    /// Edge list as `i,j` lines, `i < j`, no self-edges, no header.
    pub fn write_edge_list_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, j) in self.edges() {
            writeln!(out, "{i},{j}")?;
        }
        Ok(())
    }
}

/// Agents whose initial distance from `node` lies in `[(1−η)r, (1+η)r]`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RingSet {
    pub node: usize,
    pub followers: Vec<usize>,
    pub leaders: Vec<usize>,
}

impl RingSet {
    pub fn follower_count(&self) -> usize {
        self.followers.len()
    }

    pub fn leader_count(&self) -> usize {
        self.leaders.len()
    }

    pub fn len(&self) -> usize {
        self.followers.len() + self.leaders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, j: usize) -> bool {
        self.followers.binary_search(&j).is_ok() || self.leaders.binary_search(&j).is_ok()
    }
}

/// Largest annulus constant admitted in strict mode.
pub const STRICT_ETA_MAX: f64 = 1.0 / 512.0;

/// Ring sets for every node. `strict` enforces `0 < η ≤ 1/512`; otherwise any
/// `η ∈ (0, 1)` is accepted.
pub fn ring_sets<T: Scalar>(
    initial_positions: &[Position2D<T>],
    radius: T,
    eta: T,
    roles: &[Role],
    strict: bool,
) -> Result<Vec<RingSet>> {
    validate_positions(initial_positions, radius)?;
    if !(eta > T::zero()) {
        return Err(Error::param("eta", format!("must be positive, got {eta}")));
    }
    if strict && eta > T::lit(STRICT_ETA_MAX) {
        return Err(Error::param("eta", format!("strict mode requires eta <= 1/512, got {eta}")));
    }
    if eta >= T::one() {
        return Err(Error::param("eta", format!("must be below 1, got {eta}")));
    }
    if roles.len() != initial_positions.len() {
        return Err(Error::DimensionMismatch {
            left: (initial_positions.len(), 1),
            right: (roles.len(), 1),
        });
    }
    let n = initial_positions.len();
    let inner = (T::one() - eta) * radius;
    let outer = (T::one() + eta) * radius;
    let mut rings: Vec<RingSet> = (0..n).map(|node| RingSet { node, ..Default::default() }).collect();
    for_each_close_pair(initial_positions, outer, |i, j, d| {
        if d >= inner && d <= outer {
            for (a, b) in [(i, j), (j, i)] {
                match roles[b] {
                    Role::Follower => rings[a].followers.push(b),
                    Role::Leader => rings[a].leaders.push(b),
                }
            }
        }
    });
    for ring in &mut rings {
        ring.followers.sort_unstable();
        ring.leaders.sort_unstable();
    }
    Ok(rings)
}
