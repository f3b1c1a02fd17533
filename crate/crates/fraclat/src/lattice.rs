//! Freudenthal partition of the n-cube and shifted scaled lattices over a box.
//!
//! The unit cube splits into `n!` simplices, one per permutation of the axes:
//! the simplex for permutation `p` is the convex hull of the vertex chain
//! `v_0 = 0`, `v_i = v_{i-1} + e_{p[i-1]}`, equivalently the set of points
//! whose coordinates are nonincreasing when read in the order given by `p`.
//! All simplices are congruent with volume `1/n!`, and the dyads `e (x) e` of
//! the edge directions of any one simplex form a basis of the symmetric
//! matrices.

use std::collections::{BTreeSet, HashMap};

use log::warn;
use thiserror::Error;

use crate::geom::{det_small, BoxDomain, Coord, IVec, MAX_DIM};

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("dimension must be between 1 and {MAX_DIM}, got {0}")]
    DimensionOutOfRange(usize),
    #[error("mesh size must be positive and finite, got {0}")]
    InvalidMeshSize(f64),
    #[error("shift components must lie in [0,1)")]
    InvalidShift,
    #[error("enlarged domain must strictly contain the h*sqrt(n) neighborhood of the domain")]
    EnlargedDomainTooSmall,
    #[error("dimension mismatch between lattice components")]
    DimensionMismatch,
}

/// One simplex of the Freudenthal partition, as the vertex chain generated by
/// an axis permutation.
#[derive(Clone, Debug)]
pub struct Simplex {
    perm: Vec<u8>,
    vertices: Vec<IVec>,
}

impl Simplex {
    fn from_perm(perm: Vec<u8>) -> Self {
        let n = perm.len();
        let mut vertices = Vec::with_capacity(n + 1);
        let mut v = IVec::zeros(n);
        vertices.push(v);
        for &axis in &perm {
            v = v.add(&IVec::basis(n, axis as usize));
            vertices.push(v);
        }
        Simplex { perm, vertices }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Generating permutation (0-based axis order).
    pub fn perm(&self) -> &[u8] {
        &self.perm
    }

    /// Vertex chain `v_0 .. v_n` in lattice coordinates.
    pub fn vertices(&self) -> &[IVec] {
        &self.vertices
    }

    /// Volume in the unit-cube frame, computed from the vertex-difference
    /// determinant. Equals `1/n!` for every Freudenthal simplex.
    pub fn volume(&self) -> f64 {
        let n = self.dim();
        let mut m = [[0.0f64; MAX_DIM]; MAX_DIM];
        for i in 1..=n {
            let d = self.vertices[i].sub(&self.vertices[0]);
            for k in 0..n {
                m[k][i - 1] = d.get(k) as f64;
            }
        }
        det_small(&mut m, n).abs() / factorial(n) as f64
    }

    /// Barycentric coordinates of `x` (unit-cube frame) with respect to this
    /// simplex. All entries are nonnegative iff `x` lies in the simplex.
    pub fn barycentric(&self, x: &Coord) -> Vec<f64> {
        let n = self.dim();
        debug_assert_eq!(x.dim(), n);
        let mut lambda = vec![0.0; n + 1];
        // With t_j = x_{perm[j]}: l_0 = 1 - t_0, l_i = t_{i-1} - t_i, l_n = t_{n-1}.
        lambda[0] = 1.0 - x[self.perm[0] as usize];
        for i in 1..n {
            lambda[i] = x[self.perm[i - 1] as usize] - x[self.perm[i] as usize];
        }
        lambda[n] = x[self.perm[n - 1] as usize];
        lambda
    }

    /// Gradients of the barycentric (hat) functions, as integer vectors.
    /// The gradient in a cell of size `h` is the returned vector over `h`.
    pub fn bary_gradients(&self) -> Vec<IVec> {
        let n = self.dim();
        let mut grads = Vec::with_capacity(n + 1);
        let mut g0 = IVec::zeros(n);
        g0.set(self.perm[0] as usize, -1);
        grads.push(g0);
        for i in 1..n {
            let mut g = IVec::zeros(n);
            g.set(self.perm[i - 1] as usize, 1);
            g.set(self.perm[i] as usize, -1);
            grads.push(g);
        }
        grads.push(IVec::basis(n, self.perm[n - 1] as usize));
        grads
    }
}

/// One edge of a simplex: the difference of a vertex pair, tagged with the
/// lower vertex of the pair.
#[derive(Clone, Debug)]
pub struct Edge {
    /// Index of the base vertex within the simplex chain.
    pub base_index: usize,
    /// Base vertex in lattice coordinates (a 0/1 vector).
    pub base: IVec,
    /// Direction, a nonzero 0/1 vector.
    pub dir: IVec,
    /// Squared Euclidean length of `dir` (the number of set entries).
    pub len_sq: i64,
    /// Unit direction `dir / |dir|`.
    pub unit: Coord,
}

/// The `n(n+1)/2` edge directions of a simplex, each with its base vertex.
#[derive(Clone, Debug)]
pub struct EdgeDirections {
    pub edges: Vec<Edge>,
}

/// All pairwise vertex differences `v_i - v_k`, `k < i`, in lexicographic pair
/// order. Each direction is realized by exactly one vertex pair; this is
/// checked at construction.
pub fn edge_directions(simplex: &Simplex) -> EdgeDirections {
    let n = simplex.dim();
    let mut edges = Vec::with_capacity(n * (n + 1) / 2);
    let mut seen = BTreeSet::new();
    for k in 0..n {
        for i in (k + 1)..=n {
            let dir = simplex.vertices[i].sub(&simplex.vertices[k]);
            assert!(dir.is_zero_one() && dir.support() > 0);
            assert!(seen.insert(dir), "direction realized by two vertex pairs");
            let len_sq = dir.norm_sq();
            let unit = dir.to_coord().scale(1.0 / (len_sq as f64).sqrt());
            edges.push(Edge { base_index: k, base: simplex.vertices[k], dir, len_sq, unit });
        }
    }
    EdgeDirections { edges }
}

/// The Freudenthal partition of `[0,1]^n`: `n!` simplices indexed by the axis
/// permutations in lexicographic order.
pub fn freudenthal_partition(n: usize) -> Result<Vec<Simplex>, LatticeError> {
    if n < 1 || n > MAX_DIM {
        return Err(LatticeError::DimensionOutOfRange(n));
    }
    let mut perms = Vec::with_capacity(factorial(n));
    let mut current = Vec::with_capacity(n);
    let mut used = vec![false; n];
    gen_perms(n, &mut current, &mut used, &mut perms);
    Ok(perms.into_iter().map(Simplex::from_perm).collect())
}

fn gen_perms(n: usize, current: &mut Vec<u8>, used: &mut [bool], out: &mut Vec<Vec<u8>>) {
    if current.len() == n {
        out.push(current.clone());
        return;
    }
    for a in 0..n {
        if !used[a] {
            used[a] = true;
            current.push(a as u8);
            gen_perms(n, current, used, out);
            current.pop();
            used[a] = false;
        }
    }
}

/// Deduplicated union of the edge directions over all simplices of the
/// partition: exactly the `2^n - 1` nonzero 0/1 vectors, in lexicographic
/// order.
pub fn distinct_direction_union(n: usize) -> Result<Vec<IVec>, LatticeError> {
    let simplices = freudenthal_partition(n)?;
    let mut set = BTreeSet::new();
    for s in &simplices {
        for e in edge_directions(s).edges {
            set.insert(e.dir);
        }
    }
    Ok(set.into_iter().collect())
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Parameters of a shifted scaled lattice over a box domain.
#[derive(Clone, Debug)]
pub struct LatticeSpec {
    pub n: usize,
    /// Mesh size.
    pub h: f64,
    /// Shift in `[0,1)^n`; lattice vertices sit at `h * (index + shift)`.
    pub shift: Coord,
    /// The domain over which continuum quantities are integrated.
    pub omega: BoxDomain,
    /// The enlarged domain over which discrete quantities run.
    pub omega_hat: BoxDomain,
}

impl LatticeSpec {
    /// Spec with the default enlarged domain, the `2 h sqrt(n)` dilation of
    /// `omega`. The margin keeps every edge segment of every cell meeting
    /// `omega` inside the enlarged domain.
    pub fn new(n: usize, h: f64, shift: Coord, omega: BoxDomain) -> Result<Self, LatticeError> {
        let margin = 2.0 * h * (n as f64).sqrt();
        Self::with_enlarged(n, h, shift, omega, omega.dilate(margin))
    }

    pub fn with_enlarged(
        n: usize,
        h: f64,
        shift: Coord,
        omega: BoxDomain,
        omega_hat: BoxDomain,
    ) -> Result<Self, LatticeError> {
        if n < 1 || n > MAX_DIM {
            return Err(LatticeError::DimensionOutOfRange(n));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(LatticeError::InvalidMeshSize(h));
        }
        if shift.dim() != n || omega.dim() != n || omega_hat.dim() != n {
            return Err(LatticeError::DimensionMismatch);
        }
        if shift.iter().any(|y| !(0.0..1.0).contains(&y)) {
            return Err(LatticeError::InvalidShift);
        }
        let needed = h * (n as f64).sqrt();
        for k in 0..n {
            let lo_margin = omega.lo[k] - omega_hat.lo[k];
            let hi_margin = omega_hat.hi[k] - omega.hi[k];
            if lo_margin <= needed * (1.0 - 1e-12) || hi_margin <= needed * (1.0 - 1e-12) {
                return Err(LatticeError::EnlargedDomainTooSmall);
            }
        }
        Ok(LatticeSpec { n, h, shift, omega, omega_hat })
    }

    /// Position of the lattice vertex with integer key `key`.
    pub fn vertex_position(&self, key: &IVec) -> Coord {
        let mut x = Coord::zeros(self.n);
        for k in 0..self.n {
            x[k] = self.h * (key.get(k) as f64 + self.shift[k]);
        }
        x
    }
}

/// One lattice cell `base + [0,h)^n`.
#[derive(Clone, Debug)]
pub struct Cell {
    /// Integer cell index; the base point is `h * (index + shift)`.
    pub index: IVec,
    pub base: Coord,
    /// Whether the closed cell intersects the closure of `omega`.
    pub meets_omega: bool,
    /// Whether the closed cell lies inside the enlarged domain.
    pub inside_hat: bool,
}

/// Per-simplex data cached once per lattice and reused for every cell.
#[derive(Clone, Debug)]
pub struct SimplexData {
    pub simplex: Simplex,
    pub edges: EdgeDirections,
    pub bary_grads: Vec<IVec>,
}

/// Result of point location: the containing cell, the simplex within it and
/// the barycentric coordinates.
#[derive(Clone, Debug)]
pub struct PointLocation {
    pub cell: usize,
    pub simplex: usize,
    pub bary: Vec<f64>,
}

/// A shifted scaled Freudenthal lattice with enumerated cells.
pub struct Lattice {
    spec: LatticeSpec,
    simplices: Vec<SimplexData>,
    /// Distinct (corner, direction) edge segments of the reference cell.
    cell_segments: Vec<(IVec, IVec)>,
    directions: Vec<IVec>,
    cells: Vec<Cell>,
    cell_lookup: HashMap<IVec, usize>,
}

impl Lattice {
    pub fn build(spec: LatticeSpec) -> Result<Self, LatticeError> {
        let n = spec.n;
        let partition = freudenthal_partition(n)?;
        let simplices: Vec<SimplexData> = partition
            .into_iter()
            .map(|s| {
                let edges = edge_directions(&s);
                let bary_grads = s.bary_gradients();
                SimplexData { simplex: s, edges, bary_grads }
            })
            .collect();

        let mut seg_set = BTreeSet::new();
        for sd in &simplices {
            for e in &sd.edges.edges {
                seg_set.insert((e.base, e.dir));
            }
        }
        let cell_segments: Vec<_> = seg_set.into_iter().collect();

        let mut dir_set = BTreeSet::new();
        for (_, d) in &cell_segments {
            dir_set.insert(*d);
        }
        let directions: Vec<_> = dir_set.into_iter().collect();

        let cells = enumerate_cells(&spec);
        if cells.is_empty() {
            warn!("mesh size {} produced no cells over the enlarged domain", spec.h);
        }
        let cell_lookup = cells.iter().enumerate().map(|(i, c)| (c.index, i)).collect();
        Ok(Lattice { spec, simplices, cell_segments, directions, cells, cell_lookup })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn simplices(&self) -> &[SimplexData] {
        &self.simplices
    }

    /// Distinct edge segments of the reference cell as (corner, direction)
    /// pairs in lattice coordinates; there are `3^n - 2^n` of them.
    pub fn cell_segments(&self) -> &[(IVec, IVec)] {
        &self.cell_segments
    }

    /// Deduplicated union of edge directions over all simplices.
    pub fn directions(&self) -> &[IVec] {
        &self.directions
    }

    /// All cells whose closure intersects the enlarged domain, in
    /// lexicographic index order.
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell_position(&self, index: &IVec) -> Option<usize> {
        self.cell_lookup.get(index).copied()
    }

    /// Number of cells meeting `omega`; these carry the discrete bulk energy.
    pub fn bulk_cell_count(&self) -> usize {
        self.cells.iter().filter(|c| c.meets_omega).count()
    }

    /// Total volume of the cells meeting `omega`.
    pub fn covered_volume(&self) -> f64 {
        self.bulk_cell_count() as f64 * self.spec.h.powi(self.spec.n as i32)
    }

    /// Integer keys of the `2^n` corners of a cell.
    pub fn cell_corner_keys(&self, cell: &Cell) -> Vec<IVec> {
        let n = self.spec.n;
        (0..(1usize << n))
            .map(|mask| {
                let mut key = cell.index;
                for k in 0..n {
                    if mask & (1 << k) != 0 {
                        key.set(k, key.get(k) + 1);
                    }
                }
                key
            })
            .collect()
    }

    /// Canonical identifiers of the `2n` faces of a cell; shared faces of
    /// adjacent cells map to the same identifier.
    pub fn cell_face_keys(&self, cell: &Cell) -> Vec<(IVec, usize)> {
        let n = self.spec.n;
        let mut keys = Vec::with_capacity(2 * n);
        for axis in 0..n {
            keys.push((cell.index, axis));
            let mut upper = cell.index;
            upper.set(axis, upper.get(axis) + 1);
            keys.push((upper, axis));
        }
        keys
    }

    /// Locate the cell and simplex containing `x`, with barycentric
    /// coordinates. Boundary ties resolve to the lexicographically smallest
    /// generating permutation. Returns `None` outside the enumerated cells.
    pub fn locate(&self, x: &Coord) -> Option<PointLocation> {
        let n = self.spec.n;
        let h = self.spec.h;
        let mut index = IVec::zeros(n);
        let mut local = Coord::zeros(n);
        for k in 0..n {
            let t = x[k] / h - self.spec.shift[k];
            let i = t.floor();
            index.set(k, i as i64);
            local[k] = t - i;
        }
        let cell = self.cell_position(&index)?;
        // Stable sort by descending local coordinate; ties keep ascending axis
        // order, which selects the lexicographically smallest permutation.
        let mut axes: Vec<u8> = (0..n as u8).collect();
        axes.sort_by(|&a, &b| local[b as usize].total_cmp(&local[a as usize]));
        let rank = perm_rank(&axes);
        let bary = self.simplices[rank].simplex.barycentric(&local);
        Some(PointLocation { cell, simplex: rank, bary })
    }
}

/// Lexicographic rank of a permutation (Lehmer code).
fn perm_rank(perm: &[u8]) -> usize {
    let n = perm.len();
    let mut rank = 0usize;
    for i in 0..n {
        let smaller = perm[i + 1..].iter().filter(|&&x| x < perm[i]).count();
        rank += smaller * factorial(n - 1 - i);
    }
    rank
}

/// Every cell whose closure intersects the closure of the enlarged domain, in
/// lexicographic index order.
fn enumerate_cells(spec: &LatticeSpec) -> Vec<Cell> {
    let bases = enumerate_cell_indices(&spec.omega_hat, spec.h, &spec.shift);
    bases
        .into_iter()
        .map(|index| {
            let base = spec.vertex_position(&index);
            let meets_omega = spec.omega.meets_cell(&base, spec.h);
            let inside_hat = spec.omega_hat.contains_cell(&base, spec.h);
            Cell { index, base, meets_omega, inside_hat }
        })
        .collect()
}

/// Integer indices of the cells of the `h`-lattice shifted by `h*shift` whose
/// closure intersects the closed box.
pub fn enumerate_cell_indices(domain: &BoxDomain, h: f64, shift: &Coord) -> Vec<IVec> {
    let n = domain.dim();
    let mut lo = [0i64; MAX_DIM];
    let mut hi = [0i64; MAX_DIM];
    for k in 0..n {
        // i ranges with h*(i + y) <= hi and h*(i + y + 1) >= lo.
        lo[k] = ((domain.lo[k] / h - shift[k] - 1.0).ceil() as i64) - 1;
        hi[k] = ((domain.hi[k] / h - shift[k]).floor() as i64) + 1;
    }
    let mut out = Vec::new();
    let mut index = IVec::zeros(n);
    fill_range(domain, h, shift, 0, &mut index, &lo, &hi, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn fill_range(
    domain: &BoxDomain,
    h: f64,
    shift: &Coord,
    axis: usize,
    index: &mut IVec,
    lo: &[i64; MAX_DIM],
    hi: &[i64; MAX_DIM],
    out: &mut Vec<IVec>,
) {
    if axis == domain.dim() {
        let mut base = Coord::zeros(domain.dim());
        for k in 0..domain.dim() {
            base[k] = h * (index.get(k) as f64 + shift[k]);
        }
        if domain.meets_cell(&base, h) {
            out.push(*index);
        }
        return;
    }
    for i in lo[axis]..=hi[axis] {
        index.set(axis, i);
        fill_range(domain, h, shift, axis + 1, index, lo, hi, out);
    }
}
