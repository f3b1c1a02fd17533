//! Symmetric-matrix algebra: the energy direction set, the p-growth density,
//! and the decomposition of strain directions into the edge-dyad basis of a
//! simplex.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::geom::Coord;
use crate::lattice::{EdgeDirections, SimplexData};

#[derive(Debug, Error)]
pub enum SymError {
    #[error("dimension mismatch")]
    DimensionMismatch,
    #[error("direction set does not span the symmetric matrices")]
    NotSpanning,
    #[error("growth exponent must be >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("edge basis is ill-conditioned (cond = {cond:.3e})")]
    IllConditioned { cond: f64 },
}

/// A symmetric `n x n` matrix; storage keeps only the upper triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, upper: vec![0.0; n * (n + 1) / 2] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from a full row-major array, symmetrizing `(M + M^T) / 2`.
    pub fn from_full(n: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), n * n);
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, 0.5 * (entries[i * n + j] + entries[j * n + i]));
            }
        }
        m
    }

    /// Build from the upper triangle in row-major pair order
    /// `(0,0), (0,1), ..., (1,1), ...`.
    pub fn from_upper(n: usize, upper: Vec<f64>) -> Self {
        assert_eq!(upper.len(), n * (n + 1) / 2);
        SymMatrix { n, upper }
    }

    /// The dyad `v (x) v` of a vector.
    pub fn dyad(v: &Coord) -> Self {
        let n = v.dim();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, v[i] * v[j]);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn upper_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + j
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.upper_index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let idx = self.upper_index(i, j);
        self.upper[idx] = v;
    }

    /// Quadratic form `v . (self v)`.
    pub fn quad_form(&self, v: &Coord) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += v[i] * self.get(i, j) * v[j];
            }
        }
        s
    }

    /// Coordinates in the orthonormal basis of the symmetric matrices:
    /// diagonal entries as-is, off-diagonal entries scaled by sqrt(2).
    pub fn orthonormal_coords(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.upper.len());
        for i in 0..self.n {
            for j in i..self.n {
                let e = self.get(i, j);
                v.push(if i == j { e } else { std::f64::consts::SQRT_2 * e });
            }
        }
        v
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix { n: self.n, upper: self.upper.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.upper.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Frobenius inner product `A : B = sum_ij A_ij B_ij`.
pub fn sym_inner(a: &SymMatrix, b: &SymMatrix) -> Result<f64, SymError> {
    if a.dim() != b.dim() {
        return Err(SymError::DimensionMismatch);
    }
    let mut s = 0.0;
    for i in 0..a.dim() {
        s += a.get(i, i) * b.get(i, i);
        for j in (i + 1)..a.dim() {
            s += 2.0 * a.get(i, j) * b.get(i, j);
        }
    }
    Ok(s)
}

/// `|x|^p` with fast paths for the common exponents.
pub fn abs_pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else if p == 1.0 {
        x.abs()
    } else {
        x.abs().powf(p)
    }
}

/// A spanning set of symmetric matrices together with the growth exponent.
#[derive(Clone, Debug)]
pub struct EnergyDirections {
    matrices: Vec<SymMatrix>,
    p: f64,
}

impl EnergyDirections {
    /// Validates the spanning property (full row rank of the coordinate
    /// matrix) and `p >= 1`. Density results downstream need `p > 1`; that is
    /// flagged by the harness, not enforced here.
    pub fn new(matrices: Vec<SymMatrix>, p: f64) -> Result<Self, SymError> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(SymError::InvalidExponent(p));
        }
        let n = matrices.first().ok_or(SymError::NotSpanning)?.dim();
        if matrices.iter().any(|m| m.dim() != n) {
            return Err(SymError::DimensionMismatch);
        }
        let m = n * (n + 1) / 2;
        let coords = DMatrix::from_fn(m, matrices.len(), |r, c| matrices[c].orthonormal_coords()[r]);
        let svd = coords.svd(false, false);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax.max(1.0)).count();
        if rank < m {
            return Err(SymError::NotSpanning);
        }
        Ok(EnergyDirections { matrices, p })
    }

    /// The orthonormal canonical basis of the symmetric matrices:
    /// `e_i (x) e_i` and `(e_i (x) e_j + e_j (x) e_i) / sqrt(2)` for `i < j`.
    /// With this choice and `p = 2` the density is the squared Frobenius norm.
    pub fn canonical(n: usize, p: f64) -> Result<Self, SymError> {
        let mut matrices = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                let mut m = SymMatrix::zeros(n);
                m.set(i, j, if i == j { 1.0 } else { 1.0 / std::f64::consts::SQRT_2 });
                matrices.push(m);
            }
        }
        Self::new(matrices, p)
    }

    pub fn matrices(&self) -> &[SymMatrix] {
        &self.matrices
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].dim()
    }
}

/// Density `W(s) = sum_A |s : A|^p`; nonnegative, and zero only at zero
/// because the directions span.
pub fn energy_density(strain: &SymMatrix, dirs: &EnergyDirections) -> f64 {
    let p = dirs.exponent();
    dirs.matrices()
        .iter()
        .map(|a| abs_pow(sym_inner(strain, a).expect("validated dimensions"), p))
        .sum()
}

/// Coefficients of the energy directions in the normalized edge-dyad basis of
/// one simplex: `alpha[a][j]` satisfies
/// `sum_j alpha[a][j] unit_j (x) unit_j = A_a`.
#[derive(Clone, Debug)]
pub struct EdgeBasisCoefficients {
    pub alpha: Vec<Vec<f64>>,
}

/// Solve the `n(n+1)/2`-dimensional system expressing `matrix` in the basis of
/// normalized edge dyads. Unique by the basis property of the Freudenthal
/// edges; ill-conditioning beyond 1e12 is reported as an error.
pub fn edge_basis_coefficients(
    matrix: &SymMatrix,
    edges: &EdgeDirections,
) -> Result<Vec<f64>, SymError> {
    let table = edge_basis_table(std::slice::from_ref(matrix), edges)?;
    Ok(table.alpha.into_iter().next().unwrap())
}

/// Coefficients for a whole direction set against one simplex, sharing a
/// single factorization.
pub fn edge_basis_table(
    matrices: &[SymMatrix],
    edges: &EdgeDirections,
) -> Result<EdgeBasisCoefficients, SymError> {
    let n = matrices.first().map(|m| m.dim()).ok_or(SymError::DimensionMismatch)?;
    let m = n * (n + 1) / 2;
    if edges.edges.len() != m {
        return Err(SymError::DimensionMismatch);
    }
    let basis = DMatrix::from_fn(m, m, |r, c| {
        SymMatrix::dyad(&edges.edges[c].unit).orthonormal_coords()[r]
    });
    let svd = basis.clone().svd(false, false);
    let cond = svd.singular_values.max() / svd.singular_values.min();
    if !cond.is_finite() || cond > 1e12 {
        return Err(SymError::IllConditioned { cond });
    }
    let lu = basis.lu();
    let mut alpha = Vec::with_capacity(matrices.len());
    for a in matrices {
        if a.dim() != n {
            return Err(SymError::DimensionMismatch);
        }
        let rhs = nalgebra::DVector::from_vec(a.orthonormal_coords());
        let sol = lu.solve(&rhs).ok_or(SymError::IllConditioned { cond })?;
        alpha.push(sol.iter().copied().collect());
    }
    Ok(EdgeBasisCoefficients { alpha })
}

/// Coefficient tables for every simplex of a partition, built eagerly and
/// shared read-only afterwards. Indexed `[simplex][direction][edge]`.
pub fn coefficient_cache(
    dirs: &EnergyDirections,
    simplices: &[SimplexData],
) -> Result<Vec<EdgeBasisCoefficients>, SymError> {
    simplices.iter().map(|sd| edge_basis_table(dirs.matrices(), &sd.edges)).collect()
}
