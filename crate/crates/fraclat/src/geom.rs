//! Small fixed-capacity vectors and axis-aligned boxes for dimensions 1..=8.
//!
//! The lattice dimension is a runtime parameter, so points are stored in a
//! `Copy` array of capacity [`MAX_DIM`] instead of heap-allocated vectors.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

/// Hard cap on the spatial dimension (8! simplices per cell is the budget).
pub const MAX_DIM: usize = 8;

/// A point or vector in `R^n`, `n <= MAX_DIM`.
#[derive(Clone, Copy, PartialEq)]
pub struct Coord {
    n: u8,
    a: [f64; MAX_DIM],
}

impl Coord {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1 && n <= MAX_DIM);
        Coord { n: n as u8, a: [0.0; MAX_DIM] }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut c = Coord::zeros(v.len());
        c.a[..v.len()].copy_from_slice(v);
        c
    }

    pub fn dim(&self) -> usize {
        self.n as usize
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.a[..self.n as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.as_slice().iter().copied()
    }

    pub fn dot(&self, other: &Coord) -> f64 {
        debug_assert_eq!(self.n, other.n);
        self.as_slice().iter().zip(other.as_slice()).map(|(x, y)| x * y).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, s: f64) -> Coord {
        let mut out = *self;
        for k in 0..self.dim() {
            out.a[k] *= s;
        }
        out
    }

    /// `self + t * v`
    pub fn axpy(&self, t: f64, v: &Coord) -> Coord {
        debug_assert_eq!(self.n, v.n);
        let mut out = *self;
        for k in 0..self.dim() {
            out.a[k] += t * v.a[k];
        }
        out
    }

    pub fn basis(n: usize, k: usize) -> Coord {
        let mut c = Coord::zeros(n);
        c.a[k] = 1.0;
        c
    }
}

impl Index<usize> for Coord {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for Coord {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        debug_assert!(i < self.n as usize);
        &mut self.a[i]
    }
}

impl Add for Coord {
    type Output = Coord;
    fn add(self, rhs: Coord) -> Coord {
        self.axpy(1.0, &rhs)
    }
}

impl Sub for Coord {
    type Output = Coord;
    fn sub(self, rhs: Coord) -> Coord {
        self.axpy(-1.0, &rhs)
    }
}

impl Mul<f64> for Coord {
    type Output = Coord;
    fn mul(self, s: f64) -> Coord {
        self.scale(s)
    }
}

impl fmt::Debug for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

/// An integer lattice vector, used for cell indices, vertex keys and
/// edge directions (which are 0/1 vectors).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IVec {
    n: u8,
    a: [i64; MAX_DIM],
}

impl IVec {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1 && n <= MAX_DIM);
        IVec { n: n as u8, a: [0; MAX_DIM] }
    }

    pub fn from_slice(v: &[i64]) -> Self {
        let mut c = IVec::zeros(v.len());
        c.a[..v.len()].copy_from_slice(v);
        c
    }

    pub fn dim(&self) -> usize {
        self.n as usize
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.a[..self.n as usize]
    }

    pub fn get(&self, i: usize) -> i64 {
        self.as_slice()[i]
    }

    pub fn set(&mut self, i: usize, v: i64) {
        debug_assert!(i < self.n as usize);
        self.a[i] = v;
    }

    pub fn add(&self, other: &IVec) -> IVec {
        debug_assert_eq!(self.n, other.n);
        let mut out = *self;
        for k in 0..self.dim() {
            out.a[k] += other.a[k];
        }
        out
    }

    pub fn sub(&self, other: &IVec) -> IVec {
        debug_assert_eq!(self.n, other.n);
        let mut out = *self;
        for k in 0..self.dim() {
            out.a[k] -= other.a[k];
        }
        out
    }

    pub fn basis(n: usize, k: usize) -> IVec {
        let mut c = IVec::zeros(n);
        c.a[k] = 1;
        c
    }

    /// Number of nonzero entries.
    pub fn support(&self) -> usize {
        self.as_slice().iter().filter(|&&x| x != 0).count()
    }

    pub fn is_zero_one(&self) -> bool {
        self.as_slice().iter().all(|&x| x == 0 || x == 1)
    }

    pub fn norm_sq(&self) -> i64 {
        self.as_slice().iter().map(|&x| x * x).sum()
    }

    pub fn to_coord(&self) -> Coord {
        let mut c = Coord::zeros(self.dim());
        for k in 0..self.dim() {
            c[k] = self.a[k] as f64;
        }
        c
    }
}

impl fmt::Debug for IVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

/// Axis-aligned open box `(lo_1, hi_1) x ... x (lo_n, hi_n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxDomain {
    pub lo: Coord,
    pub hi: Coord,
}

impl BoxDomain {
    pub fn new(lo: Coord, hi: Coord) -> Self {
        assert_eq!(lo.dim(), hi.dim());
        for k in 0..lo.dim() {
            assert!(lo[k] < hi[k], "degenerate box on axis {k}");
        }
        BoxDomain { lo, hi }
    }

    pub fn unit(n: usize) -> Self {
        let lo = Coord::zeros(n);
        let mut hi = Coord::zeros(n);
        for k in 0..n {
            hi[k] = 1.0;
        }
        BoxDomain { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn extent(&self, k: usize) -> f64 {
        self.hi[k] - self.lo[k]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.extent(k)).product()
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim()).map(|k| self.extent(k).powi(2)).sum::<f64>().sqrt()
    }

    /// Box dilated by `margin` on every side.
    pub fn dilate(&self, margin: f64) -> BoxDomain {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for k in 0..self.dim() {
            lo[k] -= margin;
            hi[k] += margin;
        }
        BoxDomain { lo, hi }
    }

    /// Membership in the open box.
    pub fn contains(&self, x: &Coord) -> bool {
        (0..self.dim()).all(|k| self.lo[k] < x[k] && x[k] < self.hi[k])
    }

    /// Membership in the closed box.
    pub fn contains_closed(&self, x: &Coord) -> bool {
        (0..self.dim()).all(|k| self.lo[k] <= x[k] && x[k] <= self.hi[k])
    }

    /// Whether the closed box `[lo', lo'+h]^n` based at `base` intersects `self`'s closure.
    pub fn meets_cell(&self, base: &Coord, h: f64) -> bool {
        (0..self.dim()).all(|k| base[k] <= self.hi[k] && base[k] + h >= self.lo[k])
    }

    /// Whether the closed cell based at `base` lies inside the closed box.
    pub fn contains_cell(&self, base: &Coord, h: f64) -> bool {
        (0..self.dim()).all(|k| base[k] >= self.lo[k] && base[k] + h <= self.hi[k])
    }

    /// Volume of the intersection with the closed cell `[base, base+h]^n`.
    pub fn cell_overlap_volume(&self, base: &Coord, h: f64) -> f64 {
        let mut v = 1.0;
        for k in 0..self.dim() {
            let lo = base[k].max(self.lo[k]);
            let hi = (base[k] + h).min(self.hi[k]);
            if hi <= lo {
                return 0.0;
            }
            v *= hi - lo;
        }
        v
    }

    /// Parameter range `[t0, t1]` for which `a + t (b - a)` stays in the closed
    /// box, or `None` if the segment misses it.
    pub fn clip_segment(&self, a: &Coord, b: &Coord) -> Option<(f64, f64)> {
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for k in 0..self.dim() {
            let d = b[k] - a[k];
            if d.abs() < 1e-300 {
                if a[k] < self.lo[k] || a[k] > self.hi[k] {
                    return None;
                }
                continue;
            }
            let (mut ta, mut tb) = ((self.lo[k] - a[k]) / d, (self.hi[k] - a[k]) / d);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

/// Determinant of the leading `n x n` block by Gaussian elimination with
/// partial pivoting. The matrix is consumed.
pub fn det_small(m: &mut [[f64; MAX_DIM]; MAX_DIM], n: usize) -> f64 {
    let mut d = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        if m[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            m.swap(piv, col);
            d = -d;
        }
        d *= m[col][col];
        for row in (col + 1)..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    d
}

/// Compensated (Neumaier) summation; used for deterministic energy sums.
#[derive(Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        KahanSum::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coord_ops() {
        let a = Coord::from_slice(&[1.0, 2.0]);
        let b = Coord::from_slice(&[3.0, -1.0]);
        assert_eq!((a + b).as_slice(), &[4.0, 1.0]);
        assert_eq!((a - b).as_slice(), &[-2.0, 3.0]);
        assert_eq!(a.dot(&b), 1.0);
        assert_eq!(a.axpy(2.0, &b).as_slice(), &[7.0, 0.0]);
    }

    #[test]
    fn box_overlap() {
        let omega = BoxDomain::unit(2);
        assert_eq!(omega.cell_overlap_volume(&Coord::from_slice(&[0.25, 0.25]), 0.5), 0.25);
        assert_eq!(omega.cell_overlap_volume(&Coord::from_slice(&[-0.25, 0.0]), 0.5), 0.125);
        assert_eq!(omega.cell_overlap_volume(&Coord::from_slice(&[2.0, 2.0]), 0.5), 0.0);
    }

    #[test]
    fn segment_clipping() {
        let omega = BoxDomain::unit(2);
        let a = Coord::from_slice(&[-0.5, 0.5]);
        let b = Coord::from_slice(&[1.5, 0.5]);
        let (t0, t1) = omega.clip_segment(&a, &b).unwrap();
        assert!((t0 - 0.25).abs() < 1e-15 && (t1 - 0.75).abs() < 1e-15);
        let c = Coord::from_slice(&[-0.5, 1.5]);
        assert!(omega.clip_segment(&a, &c).is_none());
    }

    #[test]
    fn kahan_recovers_small_terms() {
        let mut s = KahanSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }
}
