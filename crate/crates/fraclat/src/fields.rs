//! Piecewise-analytic displacement fields with closed-form strain, explicit
//! jump surfaces and analytic areas.
//!
//! Every catalog field is globally defined by closed forms; the declared jump
//! surface is exactly the discontinuity set of the field, which keeps the
//! crossing indicator and the sampled values consistent near the lattice
//! margins.

use rand::Rng;
use thiserror::Error;

use crate::geom::{BoxDomain, Coord};
use crate::sym::{abs_pow, sym_inner, EnergyDirections, SymMatrix};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("point lies outside the field domain")]
    OutOfDomain,
    #[error("line misses the field domain")]
    DegenerateLine,
    #[error("unknown catalog field '{0}'")]
    UnknownField(String),
    #[error("invalid field parameters: {0}")]
    BadParams(String),
}

/// One patch of a jump surface.
#[derive(Clone, Debug, PartialEq)]
pub enum Patch {
    /// Axis-aligned hyperplane piece `{x_axis = offset}`, restricted on every
    /// other axis by an optional closed range.
    AxisPlane { axis: usize, offset: f64, bounds: Vec<Option<(f64, f64)>> },
    /// A straight piece in the plane: `point + t * tangent` for `t` in the
    /// optional range, with `tangent` the rotation of the unit normal.
    Line2D { point: Coord, normal: Coord, trange: Option<(f64, f64)> },
    /// Sphere about `center`, optionally restricted to the polar zone with
    /// `cos(theta)` in `cos_range` measured from `axis`.
    Sphere { center: Coord, radius: f64, axis: Option<(Coord, (f64, f64))> },
}

impl Patch {
    /// Unit normal of the patch (orientation is the positive axis side).
    pub fn normal(&self, n: usize) -> Coord {
        match self {
            Patch::AxisPlane { axis, .. } => Coord::basis(n, *axis),
            Patch::Line2D { normal, .. } => *normal,
            // Spheres have no single normal; callers must not ask.
            Patch::Sphere { .. } => panic!("sphere patches have position-dependent normals"),
        }
    }

    /// Parameters `t` in `[0,1]` where the closed segment `a + t (b-a)` meets
    /// the patch.
    pub fn crossings(&self, a: &Coord, b: &Coord) -> Vec<f64> {
        match self {
            Patch::AxisPlane { axis, offset, bounds } => {
                let d = b[*axis] - a[*axis];
                if d.abs() < 1e-300 {
                    return Vec::new();
                }
                let t = (offset - a[*axis]) / d;
                if !(0.0..=1.0).contains(&t) {
                    return Vec::new();
                }
                let hit = a.axpy(t, &(*b - *a));
                for (k, bound) in bounds.iter().enumerate() {
                    if k == *axis {
                        continue;
                    }
                    if let Some((lo, hi)) = bound {
                        if hit[k] < *lo || hit[k] > *hi {
                            return Vec::new();
                        }
                    }
                }
                vec![t]
            }
            Patch::Line2D { point, normal, trange } => {
                let d = *b - *a;
                let dn = d.dot(normal);
                if dn.abs() < 1e-300 {
                    return Vec::new();
                }
                let t = (point.dot(normal) - a.dot(normal)) / dn;
                if !(0.0..=1.0).contains(&t) {
                    return Vec::new();
                }
                if let Some((lo, hi)) = trange {
                    let tangent = Coord::from_slice(&[-normal[1], normal[0]]);
                    let s = (a.axpy(t, &d) - *point).dot(&tangent);
                    if s < *lo || s > *hi {
                        return Vec::new();
                    }
                }
                vec![t]
            }
            Patch::Sphere { center, radius, axis } => {
                let d = *b - *a;
                let rel = *a - *center;
                let qa = d.norm_sq();
                if qa < 1e-300 {
                    return Vec::new();
                }
                let qb = 2.0 * rel.dot(&d);
                let qc = rel.norm_sq() - radius * radius;
                let disc = qb * qb - 4.0 * qa * qc;
                if disc < 0.0 {
                    return Vec::new();
                }
                let sq = disc.sqrt();
                let mut out = Vec::new();
                for t in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
                    if !(0.0..=1.0).contains(&t) {
                        continue;
                    }
                    if let Some((u, (c0, c1))) = axis {
                        let hit = a.axpy(t, &d) - *center;
                        let c = hit.dot(u) / radius;
                        if c < *c0 || c > *c1 {
                            continue;
                        }
                    }
                    out.push(t);
                }
                out.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
                out
            }
        }
    }

    /// Analytic surface area of the patch inside a closed box.
    pub fn area_in_box(&self, domain: &BoxDomain) -> f64 {
        let n = domain.dim();
        match self {
            Patch::AxisPlane { axis, offset, bounds } => {
                if *offset < domain.lo[*axis] || *offset > domain.hi[*axis] {
                    return 0.0;
                }
                let mut area = 1.0;
                for k in 0..n {
                    if k == *axis {
                        continue;
                    }
                    let (lo, hi) = match bounds[k] {
                        Some((lo, hi)) => (lo.max(domain.lo[k]), hi.min(domain.hi[k])),
                        None => (domain.lo[k], domain.hi[k]),
                    };
                    if hi <= lo {
                        return 0.0;
                    }
                    area *= hi - lo;
                }
                area
            }
            Patch::Line2D { point, normal, trange } => {
                let tangent = Coord::from_slice(&[-normal[1], normal[0]]);
                // Clip the (possibly bounded) line to the box.
                let reach = 4.0 * domain.diameter().max(1.0)
                    + point.norm()
                    + trange.map_or(0.0, |(lo, hi)| lo.abs().max(hi.abs()));
                let (mut lo, mut hi) = trange.unwrap_or((-reach, reach));
                let a = point.axpy(lo, &tangent);
                let b = point.axpy(hi, &tangent);
                match domain.clip_segment(&a, &b) {
                    Some((t0, t1)) => {
                        let len = hi - lo;
                        hi = lo + t1 * len;
                        lo += t0 * len;
                        (hi - lo).max(0.0)
                    }
                    None => 0.0,
                }
            }
            Patch::Sphere { center, radius, axis } => {
                let inside = (0..n).all(|k| {
                    center[k] - radius >= domain.lo[k] && center[k] + radius <= domain.hi[k]
                });
                if !inside {
                    // Supported geometries keep spheres inside the domain.
                    return f64::NAN;
                }
                match axis {
                    None => sphere_area(n, *radius),
                    Some((_, (c0, c1))) => match n {
                        2 => 2.0 * radius * (c0.acos() - c1.acos()),
                        3 => 2.0 * std::f64::consts::PI * radius * radius * (c1 - c0),
                        _ => f64::NAN,
                    },
                }
            }
        }
    }
}

/// Surface area of the sphere of the given radius in `R^n`.
pub fn sphere_area(n: usize, radius: f64) -> f64 {
    // 2 pi^(n/2) / Gamma(n/2) * r^(n-1), unrolled for n <= 8.
    use std::f64::consts::PI;
    let unit = match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        5 => 8.0 * PI * PI / 3.0,
        6 => PI.powi(3),
        7 => 16.0 * PI.powi(3) / 15.0,
        8 => PI.powi(4) / 3.0,
        _ => unreachable!("dimension cap"),
    };
    unit * radius.powi(n as i32 - 1)
}

/// The jump surface of a test field as a list of patches with pairwise
/// negligible overlaps.
#[derive(Clone, Debug, Default)]
pub struct JumpSurface {
    pub patches: Vec<Patch>,
}

impl JumpSurface {
    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn area_in(&self, domain: &BoxDomain) -> f64 {
        self.patches.iter().map(|p| p.area_in_box(domain)).sum()
    }
}

/// Closed-form local field on one region.
#[derive(Clone, Debug)]
pub enum LocalField {
    Zero,
    Constant(Coord),
    /// `u(x) = M x + b` with `M` row-major.
    Affine { matrix: Vec<f64>, offset: Coord },
    /// `u_component(x) = scale * x_axis^2`.
    QuadraticAxis { component: usize, axis: usize, scale: f64 },
    /// `u_component(x) = scale * sin(freq * x_axis)`.
    SineAxis { component: usize, axis: usize, scale: f64, freq: f64 },
    /// `u_component(x) = scale * sin^2(freq * x_axis)`.
    SineSqAxis { component: usize, axis: usize, scale: f64, freq: f64 },
}

impl LocalField {
    fn eval(&self, n: usize, x: &Coord) -> Coord {
        match self {
            LocalField::Zero => Coord::zeros(n),
            LocalField::Constant(c) => *c,
            LocalField::Affine { matrix, offset } => {
                let mut u = *offset;
                for i in 0..n {
                    for j in 0..n {
                        u[i] += matrix[i * n + j] * x[j];
                    }
                }
                u
            }
            LocalField::QuadraticAxis { component, axis, scale } => {
                let mut u = Coord::zeros(n);
                u[*component] = scale * x[*axis] * x[*axis];
                u
            }
            LocalField::SineAxis { component, axis, scale, freq } => {
                let mut u = Coord::zeros(n);
                u[*component] = scale * (freq * x[*axis]).sin();
                u
            }
            LocalField::SineSqAxis { component, axis, scale, freq } => {
                let mut u = Coord::zeros(n);
                u[*component] = scale * (freq * x[*axis]).sin().powi(2);
                u
            }
        }
    }

    /// Symmetrized gradient at `x`.
    fn strain(&self, n: usize, x: &Coord) -> SymMatrix {
        match self {
            LocalField::Zero | LocalField::Constant(_) => SymMatrix::zeros(n),
            LocalField::Affine { matrix, .. } => SymMatrix::from_full(n, matrix),
            LocalField::QuadraticAxis { component, axis, scale } => {
                entry_strain(n, *component, *axis, 2.0 * scale * x[*axis])
            }
            LocalField::SineAxis { component, axis, scale, freq } => {
                entry_strain(n, *component, *axis, scale * freq * (freq * x[*axis]).cos())
            }
            LocalField::SineSqAxis { component, axis, scale, freq } => {
                entry_strain(n, *component, *axis, scale * freq * (2.0 * freq * x[*axis]).sin())
            }
        }
    }
}

/// Symmetrization of a gradient with a single entry `du_component/dx_axis`.
fn entry_strain(n: usize, component: usize, axis: usize, value: f64) -> SymMatrix {
    let mut s = SymMatrix::zeros(n);
    if component == axis {
        s.set(component, axis, value);
    } else {
        s.set(component, axis, 0.5 * value);
    }
    s
}

/// Membership rule for a region. Boundary points belong to the closed side,
/// which realizes the on-surface policy (points exactly on the jump take the
/// region on the side opposite the normal).
#[derive(Clone, Debug)]
pub enum RegionRule {
    /// `x . normal <= offset` when `closed_side`, else `x . normal > offset`.
    HalfSpace { normal: Coord, offset: f64, closed_side: bool },
    /// `|x - center| <= radius` when `closed_side` (inside), else outside.
    Ball { center: Coord, radius: f64, closed_side: bool },
}

impl RegionRule {
    fn contains(&self, x: &Coord) -> bool {
        match self {
            RegionRule::HalfSpace { normal, offset, closed_side } => {
                let v = x.dot(normal);
                if *closed_side {
                    v <= *offset
                } else {
                    v > *offset
                }
            }
            RegionRule::Ball { center, radius, closed_side } => {
                let d = (*x - *center).norm();
                if *closed_side {
                    d <= *radius
                } else {
                    d > *radius
                }
            }
        }
    }
}

/// One region of the partition: the intersection of its rules, carrying a
/// closed-form local field.
#[derive(Clone, Debug)]
pub struct Region {
    pub rules: Vec<RegionRule>,
    pub field: LocalField,
}

impl Region {
    fn contains(&self, x: &Coord) -> bool {
        self.rules.iter().all(|r| r.contains(x))
    }
}

/// Catalog field selector with parameters; instantiated against a concrete
/// domain pair per run.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldSpec {
    Affine { matrix: Vec<f64>, offset: Vec<f64> },
    Rigid { spin: Vec<f64>, offset: Vec<f64> },
    Quadratic { scale: f64 },
    Trig { scale: f64, freq: f64 },
    PlanarJump { axis: usize, offset: f64, amplitude: Vec<f64> },
    BoundedPlanarJump { offset: f64, scale: f64 },
    TiltedJump { normal: Vec<f64>, offset: f64, amplitude: Vec<f64> },
    SphereJump { center: Vec<f64>, radius: f64, amplitude: Vec<f64> },
    Custom { regions: Vec<CustomRegion>, patches: Vec<Patch> },
}

/// Region record for config-defined piecewise-affine fields.
#[derive(Clone, Debug, PartialEq)]
pub struct CustomRegion {
    /// Half-spaces as (normal, offset, closed_side) triples.
    pub halfspaces: Vec<(Vec<f64>, f64, bool)>,
    pub matrix: Vec<f64>,
    pub offset: Vec<f64>,
}

impl FieldSpec {
    pub fn name(&self) -> &'static str {
        match self {
            FieldSpec::Affine { .. } => "affine",
            FieldSpec::Rigid { .. } => "rigid",
            FieldSpec::Quadratic { .. } => "quadratic",
            FieldSpec::Trig { .. } => "trig",
            FieldSpec::PlanarJump { .. } => "planar_jump",
            FieldSpec::BoundedPlanarJump { .. } => "bounded_planar_jump",
            FieldSpec::TiltedJump { .. } => "tilted_jump",
            FieldSpec::SphereJump { .. } => "sphere_jump",
            FieldSpec::Custom { .. } => "custom",
        }
    }
}

/// A piecewise-analytic displacement field on the enlarged domain.
pub struct TestField {
    name: String,
    n: usize,
    regions: Vec<Region>,
    jump: JumpSurface,
    omega: BoxDomain,
    omega_hat: BoxDomain,
    spec: FieldSpec,
}

impl TestField {
    /// Instantiate a catalog field against a domain pair.
    pub fn instantiate(
        spec: &FieldSpec,
        n: usize,
        omega: BoxDomain,
        omega_hat: BoxDomain,
    ) -> Result<TestField, FieldError> {
        let mut regions = Vec::new();
        let mut jump = JumpSurface::default();
        match spec {
            FieldSpec::Affine { matrix, offset } => {
                if matrix.len() != n * n || offset.len() != n {
                    return Err(FieldError::BadParams("affine needs n*n matrix and n offset".into()));
                }
                regions.push(Region {
                    rules: vec![],
                    field: LocalField::Affine {
                        matrix: matrix.clone(),
                        offset: Coord::from_slice(offset),
                    },
                });
            }
            FieldSpec::Rigid { spin, offset } => {
                if spin.len() != n * (n - 1) / 2 || offset.len() != n {
                    return Err(FieldError::BadParams(
                        "rigid needs n(n-1)/2 spin entries and n offset".into(),
                    ));
                }
                let mut matrix = vec![0.0; n * n];
                let mut it = spin.iter();
                for i in 0..n {
                    for j in (i + 1)..n {
                        let w = *it.next().unwrap();
                        matrix[i * n + j] = w;
                        matrix[j * n + i] = -w;
                    }
                }
                regions.push(Region {
                    rules: vec![],
                    field: LocalField::Affine { matrix, offset: Coord::from_slice(offset) },
                });
            }
            FieldSpec::Quadratic { scale } => {
                regions.push(Region {
                    rules: vec![],
                    field: LocalField::QuadraticAxis { component: 0, axis: 0, scale: *scale },
                });
            }
            FieldSpec::Trig { scale, freq } => {
                if n < 2 {
                    return Err(FieldError::BadParams("trig needs n >= 2".into()));
                }
                regions.push(Region {
                    rules: vec![],
                    field: LocalField::SineAxis {
                        component: 1,
                        axis: 0,
                        scale: *scale,
                        freq: *freq,
                    },
                });
            }
            FieldSpec::PlanarJump { axis, offset, amplitude } => {
                if *axis >= n || amplitude.len() != n {
                    return Err(FieldError::BadParams("planar_jump axis/amplitude mismatch".into()));
                }
                regions.push(Region {
                    rules: vec![RegionRule::HalfSpace {
                        normal: Coord::basis(n, *axis),
                        offset: *offset,
                        closed_side: true,
                    }],
                    field: LocalField::Zero,
                });
                regions.push(Region {
                    rules: vec![],
                    field: LocalField::Constant(Coord::from_slice(amplitude)),
                });
                jump.patches.push(Patch::AxisPlane {
                    axis: *axis,
                    offset: *offset,
                    bounds: vec![None; n],
                });
            }
            FieldSpec::BoundedPlanarJump { offset, scale } => {
                if n != 2 {
                    return Err(FieldError::BadParams("bounded_planar_jump needs n = 2".into()));
                }
                // Zero left of the plane; on the right the first component is
                // scale * sin^2(pi x2), which vanishes outside (0,1) so the
                // discontinuity is exactly the unit-length patch.
                regions.push(Region {
                    rules: vec![RegionRule::HalfSpace {
                        normal: Coord::basis(n, 0),
                        offset: *offset,
                        closed_side: true,
                    }],
                    field: LocalField::Zero,
                });
                regions.push(Region {
                    rules: vec![RegionRule::HalfSpace {
                        normal: Coord::basis(n, 1),
                        offset: 0.0,
                        closed_side: true,
                    }],
                    field: LocalField::Zero,
                });
                regions.push(Region {
                    rules: vec![RegionRule::HalfSpace {
                        normal: Coord::basis(n, 1).scale(-1.0),
                        offset: -1.0,
                        closed_side: true,
                    }],
                    field: LocalField::Zero,
                });
                regions.push(Region {
                    rules: vec![],
                    field: LocalField::SineSqAxis {
                        component: 0,
                        axis: 1,
                        scale: *scale,
                        freq: std::f64::consts::PI,
                    },
                });
                jump.patches.push(Patch::AxisPlane {
                    axis: 0,
                    offset: *offset,
                    bounds: vec![None, Some((0.0, 1.0))],
                });
            }
            FieldSpec::TiltedJump { normal, offset, amplitude } => {
                if n != 2 || normal.len() != 2 || amplitude.len() != 2 {
                    return Err(FieldError::BadParams("tilted_jump needs n = 2".into()));
                }
                let nu = Coord::from_slice(normal);
                let nu = nu.scale(1.0 / nu.norm());
                regions.push(Region {
                    rules: vec![RegionRule::HalfSpace {
                        normal: nu,
                        offset: *offset,
                        closed_side: true,
                    }],
                    field: LocalField::Zero,
                });
                regions.push(Region {
                    rules: vec![],
                    field: LocalField::Constant(Coord::from_slice(amplitude)),
                });
                jump.patches.push(Patch::Line2D {
                    point: nu.scale(*offset),
                    normal: nu,
                    trange: None,
                });
            }
            FieldSpec::SphereJump { center, radius, amplitude } => {
                if center.len() != n || amplitude.len() != n {
                    return Err(FieldError::BadParams("sphere_jump parameter mismatch".into()));
                }
                let c = Coord::from_slice(center);
                let inside_omega = (0..n)
                    .all(|k| c[k] - radius >= omega.lo[k] && c[k] + radius <= omega.hi[k]);
                if !(*radius > 0.0) || !inside_omega {
                    return Err(FieldError::BadParams(
                        "sphere must have positive radius and lie inside the domain".into(),
                    ));
                }
                regions.push(Region {
                    rules: vec![RegionRule::Ball { center: c, radius: *radius, closed_side: true }],
                    field: LocalField::Constant(Coord::from_slice(amplitude)),
                });
                regions.push(Region { rules: vec![], field: LocalField::Zero });
                jump.patches.push(Patch::Sphere { center: c, radius: *radius, axis: None });
            }
            FieldSpec::Custom { regions: recs, patches } => {
                for rec in recs {
                    if rec.matrix.len() != n * n || rec.offset.len() != n {
                        return Err(FieldError::BadParams("custom region matrix/offset size".into()));
                    }
                    let rules = rec
                        .halfspaces
                        .iter()
                        .map(|(nrm, off, closed)| {
                            if nrm.len() != n {
                                return Err(FieldError::BadParams(
                                    "custom half-space normal size".into(),
                                ));
                            }
                            Ok(RegionRule::HalfSpace {
                                normal: Coord::from_slice(nrm),
                                offset: *off,
                                closed_side: *closed,
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    regions.push(Region {
                        rules,
                        field: LocalField::Affine {
                            matrix: rec.matrix.clone(),
                            offset: Coord::from_slice(&rec.offset),
                        },
                    });
                }
                if regions.is_empty() {
                    return Err(FieldError::BadParams("custom field needs regions".into()));
                }
                jump.patches = patches.clone();
            }
        }
        Ok(TestField {
            name: spec.name().to_string(),
            n,
            regions,
            jump,
            omega,
            omega_hat,
            spec: spec.clone(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn omega(&self) -> &BoxDomain {
        &self.omega
    }

    pub fn omega_hat(&self) -> &BoxDomain {
        &self.omega_hat
    }

    pub fn jump(&self) -> &JumpSurface {
        &self.jump
    }

    pub fn has_jump(&self) -> bool {
        !self.jump.is_empty()
    }

    /// Jump area inside the reporting domain.
    pub fn jump_area_omega(&self) -> f64 {
        self.jump.area_in(&self.omega)
    }

    /// Jump area of the full declared surface (inside the enlarged domain).
    pub fn total_jump_area(&self) -> f64 {
        self.jump.area_in(&self.omega_hat)
    }

    fn region_at(&self, x: &Coord) -> &Region {
        self.regions
            .iter()
            .find(|r| r.contains(x))
            .expect("region lists end with a catch-all")
    }

    /// Index of the region containing `x`. Distinct indices across a stencil
    /// mean the closed forms differ even where the values are continuous.
    pub fn region_index(&self, x: &Coord) -> usize {
        self.regions
            .iter()
            .position(|r| r.contains(x))
            .expect("region lists end with a catch-all")
    }

    pub fn eval(&self, x: &Coord) -> Result<Coord, FieldError> {
        if !self.omega_hat.contains_closed(x) {
            return Err(FieldError::OutOfDomain);
        }
        Ok(self.region_at(x).field.eval(self.n, x))
    }

    pub fn strain(&self, x: &Coord) -> Result<SymMatrix, FieldError> {
        if !self.omega_hat.contains_closed(x) {
            return Err(FieldError::OutOfDomain);
        }
        Ok(self.region_at(x).field.strain(self.n, x))
    }

    /// Exact analytic test of whether the closed segment `[a, b]` meets the
    /// jump surface. This is the indicator gating the discrete energies and
    /// the bad-cell classification.
    pub fn segment_crosses_jump(&self, a: &Coord, b: &Coord) -> bool {
        self.jump.patches.iter().any(|p| !p.crossings(a, b).is_empty())
    }

    /// Sorted crossing parameters of `[a, b]` with the jump surface.
    pub fn jump_crossings(&self, a: &Coord, b: &Coord) -> Vec<f64> {
        let mut ts: Vec<f64> =
            self.jump.patches.iter().flat_map(|p| p.crossings(a, b)).collect();
        ts.sort_by(|x, y| x.total_cmp(y));
        ts.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        ts
    }

    /// Closed-form bulk energy over `omega` where tractable for the field
    /// kind and exponent.
    pub fn analytic_bulk_energy(&self, dirs: &EnergyDirections) -> Option<f64> {
        let p = dirs.exponent();
        let omega = &self.omega;
        let n = self.n;
        match &self.spec {
            FieldSpec::Affine { matrix, .. } => {
                let s = SymMatrix::from_full(n, matrix);
                Some(crate::sym::energy_density(&s, dirs) * omega.volume())
            }
            FieldSpec::Rigid { .. } => Some(0.0),
            FieldSpec::PlanarJump { .. }
            | FieldSpec::TiltedJump { .. }
            | FieldSpec::SphereJump { .. } => Some(0.0),
            FieldSpec::Quadratic { scale } => {
                // strain = 2 s x_0 on the (0,0) entry: W = K |2 s x_0|^p.
                let k: f64 = dirs.matrices().iter().map(|a| abs_pow(a.get(0, 0), p)).sum();
                let others: f64 = (1..n).map(|k| omega.extent(k)).product();
                Some(k * others * abs_power_integral(2.0 * scale, p, omega.lo[0], omega.hi[0]))
            }
            FieldSpec::Trig { scale, freq } => {
                if p != 2.0 {
                    return None;
                }
                // strain offdiag (0,1) = s f cos(f x_0) / 2: |xi:A|^2 = A01^2 (s f cos)^2.
                let k: f64 = dirs.matrices().iter().map(|a| a.get(0, 1).powi(2)).sum();
                let others: f64 = (1..n).map(|k| omega.extent(k)).product();
                let (lo, hi) = (omega.lo[0], omega.hi[0]);
                let int_cos2 =
                    0.5 * (hi - lo) + ((2.0 * freq * hi).sin() - (2.0 * freq * lo).sin()) / (4.0 * freq);
                Some(k * (scale * freq).powi(2) * others * int_cos2)
            }
            FieldSpec::BoundedPlanarJump { offset, scale } => {
                if p != 2.0 {
                    return None;
                }
                let pi = std::f64::consts::PI;
                let k: f64 = dirs.matrices().iter().map(|a| a.get(0, 1).powi(2)).sum();
                let width = (omega.hi[0] - offset.max(omega.lo[0])).max(0.0);
                let (lo, hi) = (omega.lo[1].max(0.0), omega.hi[1].min(1.0));
                if hi <= lo {
                    return Some(0.0);
                }
                let int_sin2 =
                    0.5 * (hi - lo) - ((4.0 * pi * hi).sin() - (4.0 * pi * lo).sin()) / (8.0 * pi);
                Some(k * (scale * pi).powi(2) * width * int_sin2)
            }
            FieldSpec::Custom { .. } => None,
        }
    }
}

/// Integral of `|a t|^p` over `[lo, hi]`.
fn abs_power_integral(a: f64, p: f64, lo: f64, hi: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let anti = |t: f64| t.signum() * abs_pow(a * t, p + 1.0) / (a.abs() * (p + 1.0));
    anti(hi) - anti(lo)
}

/// Verification report for one one-dimensional slice of a field.
#[derive(Clone, Debug)]
pub struct SliceReport {
    /// Slice parameters where a value jump was detected by sampling.
    pub detected_jumps: Vec<f64>,
    /// Analytic crossing parameters of the line with the jump surface.
    pub analytic_crossings: Vec<f64>,
    /// Detected jumps that sit on no analytic crossing.
    pub spurious_jumps: usize,
    /// Largest relative error of the sampled slice derivative against the
    /// longitudinal strain, away from crossings.
    pub max_deriv_rel_err: f64,
    pub valid: bool,
}

/// Sample the scalar slice `t -> u(anchor + t dir) . dir` and verify that its
/// jumps lie on the jump-surface trace and its derivative matches the
/// longitudinal strain `dir . e(u) dir`.
pub fn slice_check(
    field: &TestField,
    dir: &Coord,
    anchor: &Coord,
    samples: usize,
) -> Result<SliceReport, FieldError> {
    assert!((dir.norm() - 1.0).abs() < 1e-12, "direction must be a unit vector");
    // Clip the line to a slightly shrunk enlarged domain.
    let hat = field.omega_hat();
    let reach = 4.0 * hat.diameter() + anchor.norm();
    let a = anchor.axpy(-reach, dir);
    let b = anchor.axpy(reach, dir);
    let (c0, c1) = hat.clip_segment(&a, &b).ok_or(FieldError::DegenerateLine)?;
    if c1 - c0 < 1e-9 {
        return Err(FieldError::DegenerateLine);
    }
    let shrink = 1e-9 * (c1 - c0);
    let t0 = -reach + (c0 + shrink) * 2.0 * reach;
    let t1 = -reach + (c1 - shrink) * 2.0 * reach;

    let m = samples.max(16);
    let dt = (t1 - t0) / (m - 1) as f64;
    let point = |t: f64| anchor.axpy(t, dir);
    let mut values = Vec::with_capacity(m);
    for i in 0..m {
        let x = point(t0 + dt * i as f64);
        values.push(field.eval(&x)?.dot(dir));
    }
    let crossings: Vec<f64> = field
        .jump_crossings(&point(t0), &point(t1))
        .into_iter()
        .map(|s| t0 + s * (t1 - t0))
        .collect();

    // Scale for distinguishing jumps from steep-but-smooth variation.
    let mut deriv_scale = 1e-9f64;
    for i in 0..m {
        let x = point(t0 + dt * i as f64);
        deriv_scale = deriv_scale.max(field.strain(&x)?.quad_form(dir).abs());
    }
    let jump_threshold = 16.0 * deriv_scale * dt + 1e-9;

    let mut detected = Vec::new();
    let mut spurious = 0;
    for i in 0..m - 1 {
        if (values[i + 1] - values[i]).abs() > jump_threshold {
            let lo = t0 + dt * i as f64;
            let hi = lo + dt;
            detected.push(0.5 * (lo + hi));
            if !crossings.iter().any(|&c| c >= lo - dt && c <= hi + dt) {
                spurious += 1;
            }
        }
    }

    let mut max_rel = 0.0f64;
    for i in 1..m - 1 {
        let t = t0 + dt * i as f64;
        if crossings.iter().any(|&c| (c - t).abs() <= 2.0 * dt) {
            continue;
        }
        // Stencils straddling a region seam compare against mixed closed
        // forms; the field is continuous there but not analytic.
        if field.region_index(&point(t - dt)) != field.region_index(&point(t + dt)) {
            continue;
        }
        let fd = (values[i + 1] - values[i - 1]) / (2.0 * dt);
        let exact = field.strain(&point(t))?.quad_form(dir);
        let denom = exact.abs().max(deriv_scale.max(1e-9));
        max_rel = max_rel.max((fd - exact).abs() / denom);
    }

    // Central differences on an analytic slice carry O(dt^2) truncation.
    let tol = (100.0 * dt * dt * deriv_scale.max(1.0) + 1e-7).max(1e-4);
    let valid = spurious == 0 && max_rel <= tol;
    Ok(SliceReport {
        detected_jumps: detected,
        analytic_crossings: crossings,
        spurious_jumps: spurious,
        max_deriv_rel_err: max_rel,
        valid,
    })
}

/// Check the closed-form strain against central finite differences of the
/// values at random points; returns the largest relative error observed.
/// Points whose difference stencil touches the jump surface are skipped.
pub fn check_strain_consistency(
    field: &TestField,
    rng: &mut impl Rng,
    samples: usize,
) -> Result<f64, FieldError> {
    let n = field.dim();
    let omega = field.omega();
    let step = 1e-5 * omega.diameter();
    let mut max_rel = 0.0f64;
    let mut tested = 0;
    let mut attempts = 0;
    while tested < samples && attempts < 100 * samples {
        attempts += 1;
        let x = Coord::from_slice(
            &(0..n)
                .map(|k| rng.gen_range(omega.lo[k]..omega.hi[k]))
                .collect::<Vec<_>>(),
        );
        let mut stencil_clean = true;
        for k in 0..n {
            let e = Coord::basis(n, k);
            let (a, b) = (x.axpy(-step, &e), x.axpy(step, &e));
            if !field.omega_hat().contains_closed(&a)
                || !field.omega_hat().contains_closed(&b)
                || field.segment_crosses_jump(&a, &b)
                || field.region_index(&a) != field.region_index(&b)
            {
                stencil_clean = false;
                break;
            }
        }
        if !stencil_clean {
            continue;
        }
        tested += 1;
        let mut grad = vec![0.0; n * n];
        for k in 0..n {
            let e = Coord::basis(n, k);
            let up = field.eval(&x.axpy(step, &e))?;
            let dn = field.eval(&x.axpy(-step, &e))?;
            for i in 0..n {
                grad[i * n + k] = (up[i] - dn[i]) / (2.0 * step);
            }
        }
        let fd = SymMatrix::from_full(n, &grad);
        let exact = field.strain(&x)?;
        let scale = exact.max_abs_entry().max(1.0);
        let err = fd.add(&exact.scale(-1.0)).max_abs_entry() / scale;
        max_rel = max_rel.max(err);
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sym::energy_density;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_domains(n: usize) -> (BoxDomain, BoxDomain) {
        let omega = BoxDomain::unit(n);
        (omega, omega.dilate(0.25))
    }

    fn field(spec: &FieldSpec, n: usize) -> TestField {
        let (omega, hat) = unit_domains(n);
        TestField::instantiate(spec, n, omega, hat).unwrap()
    }

    #[test]
    fn affine_and_rigid_evaluation() {
        let m = FieldSpec::Affine { matrix: vec![1.0, 2.0, 0.0, 3.0], offset: vec![0.0, 0.0] };
        let f = field(&m, 2);
        let x = Coord::from_slice(&[0.5, 0.25]);
        let u = f.eval(&x).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-15 && (u[1] - 0.75).abs() < 1e-15);
        // Rigid motion (x2, -x1): spin entry +1, zero strain.
        let omega = BoxDomain::new(Coord::zeros(2), Coord::from_slice(&[3.0, 3.0]));
        let r = TestField::instantiate(
            &FieldSpec::Rigid { spin: vec![1.0], offset: vec![0.0, 0.0] },
            2,
            omega,
            omega.dilate(0.5),
        )
        .unwrap();
        let u = r.eval(&Coord::from_slice(&[1.0, 2.0])).unwrap();
        assert_eq!(u.as_slice(), &[2.0, -1.0]);
        assert_eq!(r.strain(&x).unwrap().max_abs_entry(), 0.0);
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let f = field(&FieldSpec::Quadratic { scale: 1.0 }, 2);
        assert!(f.eval(&Coord::from_slice(&[5.0, 0.0])).is_err());
    }

    #[test]
    fn two_region_lookup() {
        let spec =
            FieldSpec::PlanarJump { axis: 0, offset: 0.5, amplitude: vec![1.0, 0.0] };
        let f = field(&spec, 2);
        assert_eq!(f.eval(&Coord::from_slice(&[0.7, 0.3])).unwrap().as_slice(), &[1.0, 0.0]);
        assert_eq!(f.eval(&Coord::from_slice(&[0.3, 0.7])).unwrap().as_slice(), &[0.0, 0.0]);
        // On-surface points take the side opposite the normal.
        assert_eq!(f.eval(&Coord::from_slice(&[0.5, 0.5])).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn quadratic_strain_value() {
        let f = field(&FieldSpec::Quadratic { scale: 1.0 }, 2);
        let s = f.strain(&Coord::from_slice(&[1.0, 1.0])).unwrap();
        assert_eq!(s.get(0, 0), 2.0);
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(s.get(1, 1), 0.0);
    }

    #[test]
    fn segment_crossing_examples() {
        let spec =
            FieldSpec::PlanarJump { axis: 0, offset: 0.5, amplitude: vec![1.0, 0.0] };
        let f = field(&spec, 2);
        assert!(f.segment_crosses_jump(
            &Coord::from_slice(&[0.4, 0.2]),
            &Coord::from_slice(&[0.6, 0.2])
        ));
        assert!(!f.segment_crosses_jump(
            &Coord::from_slice(&[0.1, 0.2]),
            &Coord::from_slice(&[0.3, 0.2])
        ));

        let sphere = FieldSpec::SphereJump {
            center: vec![0.5, 0.5],
            radius: 0.25,
            amplitude: vec![1.0, 0.0],
        };
        let f = field(&sphere, 2);
        // Segment from the center straight out: one root at the radius.
        let ts = f.jump_crossings(&Coord::from_slice(&[0.5, 0.5]), &Coord::from_slice(&[1.0, 0.5]));
        assert_eq!(ts.len(), 1);
        assert!((ts[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn jump_area_bookkeeping() {
        let f = field(
            &FieldSpec::PlanarJump { axis: 0, offset: 0.5, amplitude: vec![1.0, 0.0] },
            2,
        );
        assert!((f.jump_area_omega() - 1.0).abs() < 1e-12);
        // Enlarged by 0.25 per side: the plane trace is 1.5 long.
        assert!((f.total_jump_area() - 1.5).abs() < 1e-12);

        let f = field(&FieldSpec::BoundedPlanarJump { offset: 0.5, scale: 1.0 }, 2);
        assert!((f.jump_area_omega() - 1.0).abs() < 1e-12);
        assert!((f.total_jump_area() - 1.0).abs() < 1e-12);

        let f = field(
            &FieldSpec::SphereJump { center: vec![0.5, 0.5], radius: 0.25, amplitude: vec![1.0, 0.0] },
            2,
        );
        let want = 2.0 * std::f64::consts::PI * 0.25;
        assert!((f.jump_area_omega() - want).abs() < 1e-12);

        // Tilted line through the unit square: chord length of x + y = 1.
        let f = field(
            &FieldSpec::TiltedJump {
                normal: vec![1.0, 1.0],
                offset: 1.0 / std::f64::consts::SQRT_2,
                amplitude: vec![1.0, 0.0],
            },
            2,
        );
        assert!((f.jump_area_omega() - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn bounded_jump_is_continuous_past_the_patch_ends() {
        let f = field(&FieldSpec::BoundedPlanarJump { offset: 0.5, scale: 1.0 }, 2);
        // Just right of the plane, above and below the patch: both sides zero.
        for x2 in [-0.1, 1.1] {
            let a = Coord::from_slice(&[0.49, x2]);
            let b = Coord::from_slice(&[0.51, x2]);
            assert!(!f.segment_crosses_jump(&a, &b));
            let ua = f.eval(&a).unwrap();
            let ub = f.eval(&b).unwrap();
            assert!((ua - ub).norm() < 1e-15);
        }
        // Across the patch the value jumps by sin^2(pi x2).
        let a = Coord::from_slice(&[0.49, 0.5]);
        let b = Coord::from_slice(&[0.51, 0.5]);
        assert!(f.segment_crosses_jump(&a, &b));
        let diff = (f.eval(&b).unwrap() - f.eval(&a).unwrap()).norm();
        assert!((diff - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strain_consistency_via_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for spec in catalog_specs() {
            let f = field(&spec, 2);
            let err = check_strain_consistency(&f, &mut rng, 100).unwrap();
            assert!(err <= 1e-6, "{}: max rel err {err}", f.name());
        }
    }

    fn catalog_specs() -> Vec<FieldSpec> {
        vec![
            FieldSpec::Affine { matrix: vec![1.0, 2.0, 0.0, 3.0], offset: vec![0.1, -0.2] },
            FieldSpec::Rigid { spin: vec![0.7], offset: vec![0.0, 0.3] },
            FieldSpec::Quadratic { scale: 1.0 },
            FieldSpec::Trig { scale: 1.0, freq: std::f64::consts::PI },
            FieldSpec::PlanarJump { axis: 0, offset: 0.5, amplitude: vec![1.0, 0.0] },
            FieldSpec::BoundedPlanarJump { offset: 0.5, scale: 1.0 },
            FieldSpec::TiltedJump {
                normal: vec![0.6, 0.8],
                offset: 0.55,
                amplitude: vec![0.5, -0.5],
            },
            FieldSpec::SphereJump {
                center: vec![0.5, 0.5],
                radius: 0.25,
                amplitude: vec![1.0, 0.5],
            },
        ]
    }

    #[test]
    fn analytic_bulk_closed_forms() {
        let dirs = EnergyDirections::canonical(2, 2.0).unwrap();
        let f = field(&FieldSpec::Quadratic { scale: 1.0 }, 2);
        assert!((f.analytic_bulk_energy(&dirs).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        let dirs3 = EnergyDirections::canonical(2, 3.0).unwrap();
        assert!((f.analytic_bulk_energy(&dirs3).unwrap() - 2.0).abs() < 1e-12);

        let f = field(&FieldSpec::Trig { scale: 1.0, freq: std::f64::consts::PI }, 2);
        let want = std::f64::consts::PI.powi(2) / 4.0;
        assert!((f.analytic_bulk_energy(&dirs).unwrap() - want).abs() < 1e-12);
        assert!(f.analytic_bulk_energy(&dirs3).is_none());

        let f = field(&FieldSpec::BoundedPlanarJump { offset: 0.5, scale: 1.0 }, 2);
        let want = std::f64::consts::PI.powi(2) / 8.0;
        assert!((f.analytic_bulk_energy(&dirs).unwrap() - want).abs() < 1e-12);

        let m = vec![1.0, 0.0, 0.0, 1.0];
        let f = field(&FieldSpec::Affine { matrix: m.clone(), offset: vec![0.0, 0.0] }, 2);
        let w = energy_density(&SymMatrix::from_full(2, &m), &dirs);
        assert!((f.analytic_bulk_energy(&dirs).unwrap() - w).abs() < 1e-12);
    }

    /// Monte Carlo oracle for the slab identity: the volume of points whose
    /// forward segment of length h|e| crosses a unit-area planar patch equals
    /// h |e . normal| up to boundary effects.
    #[test]
    fn tubular_volume_law() {
        let h = 1.0 / 32.0;
        let box2 = BoxDomain::new(Coord::from_slice(&[-1.0, -1.0]), Coord::from_slice(&[2.0, 2.0]));
        let cases: Vec<(Patch, Coord)> = vec![
            (
                Patch::AxisPlane { axis: 0, offset: 0.5, bounds: vec![None, Some((0.0, 1.0))] },
                Coord::from_slice(&[1.0, 0.0]),
            ),
            (
                Patch::AxisPlane { axis: 0, offset: 0.5, bounds: vec![None, Some((0.0, 1.0))] },
                Coord::from_slice(&[1.0, 1.0]),
            ),
            (
                Patch::Line2D {
                    point: Coord::from_slice(&[0.5, 0.5]),
                    normal: Coord::from_slice(&[0.6, 0.8]),
                    trange: Some((-0.5, 0.5)),
                },
                Coord::from_slice(&[1.0, 0.0]),
            ),
            (
                Patch::Line2D {
                    point: Coord::from_slice(&[0.5, 0.5]),
                    normal: Coord::from_slice(&[0.6, 0.8]),
                    trange: Some((-0.5, 0.5)),
                },
                Coord::from_slice(&[1.0, 1.0]),
            ),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for (patch, e) in cases {
            let nu = patch.normal(2);
            let want = e.dot(&nu).abs(); // area is 1 by construction
            let trials = 1_000_000usize;
            let mut hits = 0usize;
            for _ in 0..trials {
                let x = Coord::from_slice(&[
                    rng.gen_range(box2.lo[0]..box2.hi[0]),
                    rng.gen_range(box2.lo[1]..box2.hi[1]),
                ]);
                let y = x.axpy(h, &e);
                if !patch.crossings(&x, &y).is_empty() {
                    hits += 1;
                }
            }
            let measured = hits as f64 / trials as f64 * box2.volume() / h;
            assert!(
                (measured - want).abs() <= 0.02 * want.max(0.1),
                "direction {:?}: measured {measured}, want {want}",
                e
            );
        }
    }

    #[test]
    fn slice_checks_on_catalog() {
        // Affine slices: no jumps, constant slope equal to the quadratic form.
        let f = field(
            &FieldSpec::Affine { matrix: vec![1.0, 2.0, 0.0, 3.0], offset: vec![0.0, 0.0] },
            2,
        );
        let dir = Coord::from_slice(&[1.0, 0.0]);
        let rep = slice_check(&f, &dir, &Coord::from_slice(&[0.0, 0.3]), 512).unwrap();
        assert!(rep.valid && rep.detected_jumps.is_empty());

        // Jump slice along the normal: exactly one detected jump at the plane.
        let f = field(
            &FieldSpec::PlanarJump { axis: 0, offset: 0.5, amplitude: vec![1.0, 0.0] },
            2,
        );
        let rep = slice_check(&f, &dir, &Coord::from_slice(&[0.0, 0.3]), 512).unwrap();
        assert!(rep.valid);
        assert_eq!(rep.detected_jumps.len(), 1);
        assert!((rep.detected_jumps[0] - 0.5).abs() < 0.01);

        // Tangent slices never cross, on either side of the plane.
        let tangent = Coord::from_slice(&[0.0, 1.0]);
        for x1 in [0.3, 0.7] {
            let rep = slice_check(&f, &tangent, &Coord::from_slice(&[x1, 0.0]), 512).unwrap();
            assert!(rep.valid && rep.analytic_crossings.is_empty());
            assert!(rep.detected_jumps.is_empty());
        }

        // Random lines over the whole catalog.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for spec in catalog_specs() {
            let f = field(&spec, 2);
            for _ in 0..20 {
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let dir = Coord::from_slice(&[theta.cos(), theta.sin()]);
                let anchor =
                    Coord::from_slice(&[rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]);
                match slice_check(&f, &dir, &anchor, 800) {
                    Ok(rep) => assert!(
                        rep.valid,
                        "{}: spurious={} deriv={}",
                        f.name(),
                        rep.spurious_jumps,
                        rep.max_deriv_rel_err
                    ),
                    Err(FieldError::DegenerateLine) => {}
                    Err(e) => panic!("unexpected error: {e}"),
                }
            }
        }
    }

    #[test]
    fn sphere_area_values() {
        assert!((sphere_area(2, 1.0) - std::f64::consts::TAU).abs() < 1e-12);
        assert!((sphere_area(3, 2.0) - 16.0 * std::f64::consts::PI).abs() < 1e-12);
    }
}
