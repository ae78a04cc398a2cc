//! Frame, Riesz and Bessel analysis of coherent systems `pi(Lambda) g`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, BallPoints};
use crate::linalg::{cholesky, cholesky_solve, hermitian_eigen, inner, norm_sqr, solve_lower, CMatrix, C64};
use crate::rep::{coefficient_field, finite_apply, CoefficientField, PlaneField, RepKind, RepModel, Window};
use crate::rng;

/// Guard on `|S - S^*|` before symmetrization.
pub const ASYMMETRY_TOL: f64 = 1e-10;

/// Relative size below which a lower bound counts as zero.
const ZERO_BOUND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointSet {
    /// Finite list of points of the plane.
    Explicit { points: Vec<[f64; 2]> },
    /// `a Z x b Z`.
    Lattice { a: f64, b: f64 },
    /// `a Z x b Z` with the open disks of the holes removed.
    LatticeWithHoles { a: f64, b: f64, holes: Vec<Hole> },
    /// Subset of `Z_N x Z_N`.
    FiniteSubset { n: usize, elements: Vec<(usize, usize)> },
}

fn dedup_sorted<T: PartialOrd + Copy>(mut v: Vec<T>) -> Vec<T> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    v.dedup_by(|a, b| a == b);
    v
}

impl PointSet {
    pub fn explicit(points: Vec<[f64; 2]>) -> Self {
        PointSet::Explicit {
            points: dedup_sorted(points),
        }
    }

    pub fn lattice(a: f64, b: f64) -> Result<Self> {
        check_lattice(a, b)?;
        Ok(PointSet::Lattice { a, b })
    }

    pub fn lattice_with_holes(a: f64, b: f64, holes: Vec<Hole>) -> Result<Self> {
        check_lattice(a, b)?;
        if holes.iter().any(|h| !(h.radius >= 0.0)) {
            return Err(Error::NegativeRadius(-1.0));
        }
        Ok(PointSet::LatticeWithHoles { a, b, holes })
    }

    pub fn finite_subset(n: usize, elements: Vec<(usize, usize)>) -> Self {
        let elements = dedup_sorted(elements.into_iter().map(|(k, l)| (k % n, l % n)).collect());
        PointSet::FiniteSubset { n, elements }
    }

    /// The whole of `Z_N x Z_N`.
    pub fn finite_all(n: usize) -> Self {
        let elements = (0..n).flat_map(|k| (0..n).map(move |l| (k, l))).collect();
        PointSet::FiniteSubset { n, elements }
    }

    pub fn is_finite_model(&self) -> bool {
        matches!(self, PointSet::FiniteSubset { .. })
    }

    /// Lattice constants, if the set is (a punctured) lattice.
    pub fn lattice_constants(&self) -> Option<(f64, f64)> {
        match self {
            PointSet::Lattice { a, b } | PointSet::LatticeWithHoles { a, b, .. } => Some((*a, *b)),
            _ => None,
        }
    }

    /// Points of the plane set within distance `r` of `center`, in index order.
    pub fn points_in_disk(&self, center: [f64; 2], r: f64, closed: bool) -> Result<Vec<[f64; 2]>> {
        if !(r >= 0.0) {
            return Err(Error::NegativeRadius(r));
        }
        let inside = |p: &[f64; 2]| {
            let d2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
            if closed {
                d2 <= r * r
            } else {
                d2 < r * r
            }
        };
        match self {
            PointSet::Explicit { points } => Ok(points.iter().copied().filter(inside).collect()),
            PointSet::Lattice { a, b } => Ok(lattice_box(*a, *b, center, r).filter(inside).collect()),
            PointSet::LatticeWithHoles { a, b, holes } => Ok(lattice_box(*a, *b, center, r)
                .filter(inside)
                .filter(|p| !in_hole(holes, p))
                .collect()),
            PointSet::FiniteSubset { .. } => Err(Error::Unsupported("finite subsets live on Z_N x Z_N")),
        }
    }

    /// Elements of `Lambda` inside an enumerated ball of `Z_N x Z_N`.
    pub fn elements_in(&self, ball: &Ball) -> Result<Vec<(usize, usize)>> {
        match (self, &ball.points) {
            (PointSet::FiniteSubset { n, elements }, BallPoints::Enumerated { elements: bp, .. }) => {
                let mut inside: Vec<(usize, usize)> = bp
                    .iter()
                    .map(|e| (e[0].rem_euclid(*n as i64) as usize, e[1].rem_euclid(*n as i64) as usize))
                    .collect();
                inside.sort_unstable();
                Ok(elements
                    .iter()
                    .copied()
                    .filter(|x| inside.binary_search(x).is_ok())
                    .collect())
            }
            _ => Err(Error::Unsupported("restriction needs a finite subset and an enumerated ball")),
        }
    }
}

fn check_lattice(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lattice",
            reason: "lattice constants must be positive",
        });
    }
    Ok(())
}

fn in_hole(holes: &[Hole], p: &[f64; 2]) -> bool {
    holes
        .iter()
        .any(|h| (p[0] - h.center[0]).hypot(p[1] - h.center[1]) < h.radius)
}

fn lattice_box(a: f64, b: f64, c: [f64; 2], r: f64) -> impl Iterator<Item = [f64; 2]> {
    let i0 = ((c[0] - r) / a).floor() as i64;
    let i1 = ((c[0] + r) / a).ceil() as i64;
    let j0 = ((c[1] - r) / b).floor() as i64;
    let j1 = ((c[1] + r) / b).ceil() as i64;
    (i0..=i1).flat_map(move |i| (j0..=j1).map(move |j| [i as f64 * a, j as f64 * b]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Frame,
    Riesz,
    Bessel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum BoundMethod {
    ExactSpectrum,
    TruncatedSection { radius: f64, margin: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameBounds {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub kind: BoundKind,
    pub method: BoundMethod,
    /// `B / A`; absent when `A = 0`.
    pub condition_number: Option<f64>,
}

impl FrameBounds {
    pub fn new(a: f64, b: f64, kind: BoundKind, method: BoundMethod) -> Self {
        let a = if a.abs() <= ZERO_BOUND * b.abs().max(1.0) { 0.0 } else { a.max(0.0) };
        let (kind, condition_number) = if a > 0.0 {
            (kind, Some(b / a))
        } else {
            (BoundKind::Bessel, None)
        };
        Self {
            a,
            b,
            kind,
            method,
            condition_number,
        }
    }
}

/// Truncation used for plane models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionConfig {
    /// Radius of the section `Lambda ∩ B_R(center)`.
    pub radius: f64,
    /// Test functions are atoms centred in `B_{R - margin}`.
    pub margin: f64,
    /// Grid spacing of the test atoms.
    pub test_spacing: f64,
    pub center: [f64; 2],
}

impl Default for SectionConfig {
    fn default() -> Self {
        Self {
            radius: 12.0,
            margin: 3.0,
            test_spacing: 1.25,
            center: [0.0, 0.0],
        }
    }
}

fn plane_field(rep: &RepModel, g: &Window) -> Result<alloc::boxed::Box<dyn PlaneField + Send + Sync>> {
    match coefficient_field(rep, g, g, 1e-10)? {
        CoefficientField::Plane(p) if p.has_phase() => Ok(p),
        CoefficientField::Plane(_) => Err(Error::Unsupported("modulus-only windows have no atoms")),
        CoefficientField::Finite(_) => Err(Error::Unsupported("expected a plane model")),
    }
}

/// `<pi(lambda) g, pi(mu) g> = e^{2 pi i x_l (w_l - w_m)} V_g g(mu - lambda)`.
pub fn atom_inner(field: &dyn PlaneField, l: [f64; 2], m: [f64; 2]) -> Result<C64> {
    let v = field.value([m[0] - l[0], m[1] - l[1]])?;
    Ok(C64::from_polar(1.0, 2.0 * PI * l[0] * (l[1] - m[1])) * v)
}

fn finite_atoms(rep: &RepModel, g: &Window, lambda: &PointSet) -> Result<Vec<Vec<C64>>> {
    let n = rep.finite_dim().ok_or(Error::Unsupported("expected the finite model"))?;
    let gv = match g {
        Window::Vector(v) if v.len() == n => v,
        Window::Vector(v) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            })
        }
        _ => return Err(Error::DimensionMismatch { expected: n, got: 0 }),
    };
    match lambda {
        PointSet::FiniteSubset { n: m, elements } => {
            if *m != n {
                return Err(Error::DimensionMismatch { expected: n, got: *m });
            }
            if elements.is_empty() {
                return Err(Error::EmptyPointSet);
            }
            Ok(elements.iter().map(|(k, l)| finite_apply(*k, *l, gv)).collect())
        }
        _ => Err(Error::Unsupported("finite model needs a finite subset")),
    }
}

/// `S = sum_lambda pi(lambda) g (pi(lambda) g)^*` for the finite model.
pub fn frame_operator(rep: &RepModel, g: &Window, lambda: &PointSet) -> Result<CMatrix> {
    let atoms = finite_atoms(rep, g, lambda)?;
    let n = atoms[0].len();
    let mut s = CMatrix::zeros(n, n);
    for a in &atoms {
        s.add_outer(a, 1.0);
    }
    guard_hermitian(&mut s)?;
    Ok(s)
}

fn guard_hermitian(m: &mut CMatrix) -> Result<()> {
    let asym = m.hermitian_asymmetry();
    if asym > ASYMMETRY_TOL * m.max_abs().max(1.0) {
        return Err(Error::NotHermitian(asym));
    }
    m.symmetrize();
    Ok(())
}

/// Frame bounds: exact spectrum of `S` for the finite model, truncated-section
/// estimates for plane models.
pub fn frame_operator_spectrum(
    rep: &RepModel,
    g: &Window,
    lambda: &PointSet,
    section: &SectionConfig,
) -> Result<FrameBounds> {
    if let RepKind::FiniteWeylHeisenberg { .. } = rep.kind {
        let s = frame_operator(rep, g, lambda)?;
        let eig = hermitian_eigen(&s, false)?;
        return Ok(FrameBounds::new(
            eig.min(),
            eig.max(),
            BoundKind::Frame,
            BoundMethod::ExactSpectrum,
        ));
    }
    let eig = section_spectrum(rep, g, lambda, section)?;
    Ok(FrameBounds::new(
        eig[0],
        eig[eig.len() - 1],
        BoundKind::Frame,
        BoundMethod::TruncatedSection {
            radius: section.radius,
            margin: section.margin,
        },
    ))
}

/// Test atom centres: grid points of the given spacing inside `B_{R - margin}`.
pub fn test_centers(section: &SectionConfig) -> Result<Vec<[f64; 2]>> {
    let inner_r = section.radius - section.margin;
    if !(inner_r > 0.0) || !(section.test_spacing > 0.0) {
        return Err(Error::SectionTooSmall {
            section: section.radius,
            hole: 0.0,
            margin: section.margin,
        });
    }
    let h = section.test_spacing;
    let m = (inner_r / h).floor() as i64;
    let mut out = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            let p = [i as f64 * h, j as f64 * h];
            if p[0].hypot(p[1]) <= inner_r {
                out.push([section.center[0] + p[0], section.center[1] + p[1]]);
            }
        }
    }
    Ok(out)
}

/// Generalized eigenvalues of `sum_lambda |<f, pi(lambda) g>|^2` against `|f|^2`
/// on the span of the test atoms, ascending.
pub fn section_spectrum(
    rep: &RepModel,
    g: &Window,
    lambda: &PointSet,
    section: &SectionConfig,
) -> Result<Vec<f64>> {
    let field = plane_field(rep, g)?;
    let pts = lambda.points_in_disk(section.center, section.radius, true)?;
    if pts.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let tests = test_centers(section)?;
    let nv = tests.len();
    let mut mv = CMatrix::zeros(nv, nv);
    for (i, mu) in tests.iter().enumerate() {
        for (j, nu) in tests.iter().enumerate() {
            mv[(i, j)] = atom_inner(field.as_ref(), *nu, *mu)?;
        }
    }
    guard_hermitian(&mut mv)?;
    let l = cholesky(&mv)?;
    // X = L^{-1} T^*, with T[lambda, nu] = <pi(nu) g, pi(lambda) g>
    let mut h = CMatrix::zeros(nv, nv);
    for la in &pts {
        let col: Vec<C64> = tests
            .iter()
            .map(|nu| atom_inner(field.as_ref(), *nu, *la).map(|z| z.conj()))
            .collect::<Result<_>>()?;
        let x = solve_lower(&l, &col);
        h.add_outer(&x, 1.0);
    }
    guard_hermitian(&mut h)?;
    Ok(hermitian_eigen(&h, false)?.values)
}

/// Gram matrix `G[i, j] = <pi(lambda_j) g, pi(lambda_i) g>`.
pub fn gram_matrix(
    rep: &RepModel,
    g: &Window,
    lambda: &PointSet,
    section: &SectionConfig,
) -> Result<CMatrix> {
    let mut gm = if let RepKind::FiniteWeylHeisenberg { .. } = rep.kind {
        let atoms = finite_atoms(rep, g, lambda)?;
        let k = atoms.len();
        let mut gm = CMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                gm[(i, j)] = inner(&atoms[j], &atoms[i]);
            }
        }
        gm
    } else {
        let field = plane_field(rep, g)?;
        let pts = lambda.points_in_disk(section.center, section.radius, true)?;
        if pts.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let k = pts.len();
        let mut gm = CMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                gm[(i, j)] = atom_inner(field.as_ref(), pts[j], pts[i])?;
            }
        }
        gm
    };
    guard_hermitian(&mut gm)?;
    Ok(gm)
}

/// Extreme eigenvalues of the Gram matrix of the (restricted) system.
pub fn riesz_bounds(
    rep: &RepModel,
    g: &Window,
    lambda: &PointSet,
    section: &SectionConfig,
) -> Result<FrameBounds> {
    let gm = gram_matrix(rep, g, lambda, section)?;
    let eig = hermitian_eigen(&gm, false)?;
    let method = if rep.finite_dim().is_some() {
        BoundMethod::ExactSpectrum
    } else {
        BoundMethod::TruncatedSection {
            radius: section.radius,
            margin: 0.0,
        }
    };
    Ok(FrameBounds::new(eig.min(), eig.max(), BoundKind::Riesz, method))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub q_radius: f64,
    pub rel_sep: usize,
    /// Zero when the value is exact.
    pub grid_spacing: f64,
    pub exact: bool,
}

/// Largest number of lattice points in a closed disk of radius `rho`.
///
/// The maximal depth of the disk arrangement is attained at a disk centre or
/// at an intersection point of two circles, so checking those is exact.
pub fn lattice_relative_separation(a: f64, b: f64, rho: f64) -> Result<usize> {
    check_lattice(a, b)?;
    if !(rho >= 0.0) {
        return Err(Error::NegativeRadius(rho));
    }
    let cell_center = [0.5 * a, 0.5 * b];
    let reach = rho + 0.5 * a.hypot(b);
    let near: Vec<[f64; 2]> = lattice_box(a, b, cell_center, reach + rho).collect();
    let eps = 1e-9 * rho.max(1.0);
    let count = |x: [f64; 2]| {
        near.iter()
            .filter(|p| (p[0] - x[0]).hypot(p[1] - x[1]) <= rho + eps)
            .count()
    };
    let in_domain = |x: [f64; 2]| x[0] >= -eps && x[0] <= a + eps && x[1] >= -eps && x[1] <= b + eps;
    let mut best = count([0.0, 0.0]);
    for (i, p) in near.iter().enumerate() {
        for q in &near[i + 1..] {
            for x in circle_intersections(*p, *q, rho) {
                if in_domain(x) {
                    best = best.max(count(x));
                }
            }
        }
    }
    Ok(best)
}

fn circle_intersections(p: [f64; 2], q: [f64; 2], r: f64) -> Vec<[f64; 2]> {
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    let d = dx.hypot(dy);
    if d == 0.0 || d > 2.0 * r {
        return Vec::new();
    }
    let m = [p[0] + 0.5 * dx, p[1] + 0.5 * dy];
    let h = (r * r - 0.25 * d * d).max(0.0).sqrt();
    let (ux, uy) = (-dy / d, dx / d);
    vec![[m[0] + h * ux, m[1] + h * uy], [m[0] - h * ux, m[1] - h * uy]]
}

/// `Rel_Q(Lambda) = sup_x #(Lambda ∩ xQ)` for `Q` a ball at the identity.
pub fn relative_separation(lambda: &PointSet, q: &Ball) -> Result<SeparationReport> {
    if !q.centered_at_identity() {
        return Err(Error::NotCentered);
    }
    match (lambda, &q.points) {
        (PointSet::FiniteSubset { n, elements }, BallPoints::Enumerated { elements: qe, .. }) => {
            let n = *n;
            let mut mask = vec![false; n * n];
            for (k, l) in elements {
                mask[k * n + l] = true;
            }
            let mut best = 0;
            for k in 0..n {
                for l in 0..n {
                    let c = qe
                        .iter()
                        .filter(|z| {
                            let a = (k as i64 + z[0]).rem_euclid(n as i64) as usize;
                            let b = (l as i64 + z[1]).rem_euclid(n as i64) as usize;
                            mask[a * n + b]
                        })
                        .count();
                    best = best.max(c);
                }
            }
            Ok(SeparationReport {
                q_radius: q.radius,
                rel_sep: best,
                grid_spacing: 0.0,
                exact: true,
            })
        }
        (PointSet::Lattice { a, b } | PointSet::LatticeWithHoles { a, b, .. }, BallPoints::Geometric { .. }) => {
            // holes only lower counts locally; far from them the lattice value is attained
            Ok(SeparationReport {
                q_radius: q.radius,
                rel_sep: lattice_relative_separation(*a, *b, q.radius)?,
                grid_spacing: 0.0,
                exact: true,
            })
        }
        (PointSet::Explicit { points }, BallPoints::Geometric { .. }) => {
            let rho = q.radius;
            let eps = 1e-9 * rho.max(1.0);
            let count = |x: [f64; 2]| {
                points
                    .iter()
                    .filter(|p| (p[0] - x[0]).hypot(p[1] - x[1]) <= rho + eps)
                    .count()
            };
            let mut best = 0;
            for (i, p) in points.iter().enumerate() {
                best = best.max(count(*p));
                for q2 in &points[i + 1..] {
                    for x in circle_intersections(*p, *q2, rho) {
                        best = best.max(count(x));
                    }
                }
            }
            Ok(SeparationReport {
                q_radius: q.radius,
                rel_sep: best,
                grid_spacing: 0.0,
                exact: true,
            })
        }
        _ => Err(Error::DimensionMismatch { expected: 2, got: 0 }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesselSeparationReport {
    pub separation: SeparationReport,
    pub bessel_bound: f64,
    pub window_norm: f64,
    /// Size of `U`: number of elements (finite) or radius (plane).
    pub neighbourhood: f64,
    /// Number of translates of `U` in the greedy cover of `Q`.
    pub cover_count: usize,
    /// `C(g, Q) = 4 n`.
    pub constant: f64,
    /// `C B |g|^{-2}`.
    pub rhs: f64,
    pub pass: bool,
}

/// Greedy cover of `Q` by translates of `U = {|V_g g| > |g|^2 / 2}` and
/// the check `Rel_Q(Lambda) <= 4 n B |g|^{-2}`.
pub fn bessel_separation_bound(
    rep: &RepModel,
    g: &Window,
    lambda: &PointSet,
    q: &Ball,
    bessel_bound: f64,
) -> Result<BesselSeparationReport> {
    let separation = relative_separation(lambda, q)?;
    let ng = g.norm();
    if !(ng > 0.0) {
        return Err(Error::ZeroWindow);
    }
    let (neighbourhood, cover_count) = match coefficient_field(rep, g, g, 1e-10)? {
        CoefficientField::Finite(ff) => finite_cover(&ff, q, ng)?,
        CoefficientField::Plane(p) => {
            let u = neighbourhood_radius(p.as_ref(), q.radius, ng)?;
            (u, disk_cover(q.radius, u))
        }
    };
    let constant = 4.0 * cover_count as f64;
    let rhs = constant * bessel_bound / (ng * ng);
    Ok(BesselSeparationReport {
        separation,
        bessel_bound,
        window_norm: ng,
        neighbourhood,
        cover_count,
        constant,
        rhs,
        pass: separation.rel_sep as f64 <= rhs,
    })
}

fn finite_cover(ff: &crate::rep::FiniteField, q: &Ball, ng: f64) -> Result<(f64, usize)> {
    let n = ff.n as i64;
    let qe = q.elements().ok_or(Error::Unsupported("finite cover needs an enumerated ball"))?;
    let red = |e: &[i64; 3]| (e[0].rem_euclid(n), e[1].rem_euclid(n));
    let mut qset: Vec<(i64, i64)> = qe.iter().map(red).collect();
    qset.sort_unstable();
    qset.dedup();
    let u: Vec<(i64, i64)> = qset
        .iter()
        .copied()
        .filter(|(k, l)| ff.modulus(*k as usize, *l as usize) > 0.5 * ng * ng)
        .collect();
    if u.is_empty() {
        return Err(Error::NoNeighbourhood);
    }
    let mut covered = vec![false; qset.len()];
    let mut left = qset.len();
    let mut count = 0;
    while left > 0 {
        let mut best = (0usize, (0, 0));
        for x in 0..n {
            for y in 0..n {
                let gain = u
                    .iter()
                    .filter_map(|(a, b)| qset.binary_search(&((x + a).rem_euclid(n), (y + b).rem_euclid(n))).ok())
                    .filter(|i| !covered[*i])
                    .count();
                if gain > best.0 {
                    best = (gain, (x, y));
                }
            }
        }
        let (x, y) = best.1;
        for (a, b) in &u {
            if let Ok(i) = qset.binary_search(&((x + a).rem_euclid(n), (y + b).rem_euclid(n))) {
                if !covered[i] {
                    covered[i] = true;
                    left -= 1;
                }
            }
        }
        count += 1;
    }
    Ok((u.len() as f64, count))
}

/// Radius of the largest disk around the identity on which `|V_g g| > |g|^2 / 2`.
pub fn neighbourhood_radius(field: &dyn PlaneField, rho: f64, ng: f64) -> Result<f64> {
    let half = 0.5 * ng * ng;
    let u = if let Some(profile) = field.radial() {
        // bisection on the nonincreasing profile
        if profile.at_origin() <= half {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            while profile.eval(hi) > half {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if profile.eval(mid) > half {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        }
    } else {
        let h = rho / 64.0;
        let mut r = 0.0;
        'grow: loop {
            let next = r + h;
            for j in 0..64 {
                let th = 2.0 * PI * j as f64 / 64.0;
                if field.modulus([next * th.cos(), next * th.sin()])? <= half {
                    break 'grow;
                }
            }
            r = next;
            if r > 64.0 * rho {
                break;
            }
        }
        r
    };
    if !(u > 0.0) {
        return Err(Error::NoNeighbourhood);
    }
    Ok(u)
}

/// Greedy cover of the disk of radius `rho` by disks of radius `u`.
///
/// Targets are the points of an `h = u / 8` grid whose cells meet the disk;
/// a centre covers a target when the whole cell lies inside its disk.
/// Centres come from a grid of spacing `u / 2`.
pub fn disk_cover(rho: f64, u: f64) -> usize {
    let h = u / 8.0;
    let reach = u - h / SQRT_2;
    let tm = ((rho + h) / h).ceil() as i64;
    let mut targets = Vec::new();
    for i in -tm..=tm {
        for j in -tm..=tm {
            let t = [i as f64 * h, j as f64 * h];
            if t[0].hypot(t[1]) <= rho + h / SQRT_2 {
                targets.push(t);
            }
        }
    }
    let cs = u / 2.0;
    let cm = ((rho + u) / cs).ceil() as i64;
    let mut centers = Vec::new();
    for i in -cm..=cm {
        for j in -cm..=cm {
            let c = [i as f64 * cs, j as f64 * cs];
            if c[0].hypot(c[1]) <= rho + u {
                centers.push(c);
            }
        }
    }
    let covers = |c: &[f64; 2], t: &[f64; 2]| (c[0] - t[0]).hypot(c[1] - t[1]) <= reach;
    let mut covered = vec![false; targets.len()];
    let mut left = targets.len();
    let mut count = 0;
    while left > 0 {
        let mut best = (0usize, 0usize);
        for (ci, c) in centers.iter().enumerate() {
            let gain = targets
                .iter()
                .zip(&covered)
                .filter(|(t, done)| !**done && covers(c, t))
                .count();
            if gain > best.0 {
                best = (gain, ci);
            }
        }
        if best.0 == 0 {
            break;
        }
        let c = centers[best.1];
        for (t, done) in targets.iter().zip(covered.iter_mut()) {
            if !*done && covers(&c, t) {
                *done = true;
                left -= 1;
            }
        }
        count += 1;
    }
    count
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionLemmaReport {
    pub dim: usize,
    pub sum: f64,
    pub expected: f64,
    pub deviation: f64,
}

/// `sum_x |P_V pi(x) g|^2` against `d^{-1} |g|^2 dim V`.
pub fn dimension_lemma_check(rep: &RepModel, g: &Window, v: &[Vec<C64>]) -> Result<DimensionLemmaReport> {
    let n = rep.finite_dim().ok_or(Error::Unsupported("expected the finite model"))?;
    let gv = match g {
        Window::Vector(x) if x.len() == n => x,
        _ => return Err(Error::DimensionMismatch { expected: n, got: 0 }),
    };
    let mut dev = 0.0_f64;
    for (i, a) in v.iter().enumerate() {
        if a.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.len(),
            });
        }
        for (j, b) in v.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((inner(a, b) - target).norm());
        }
    }
    if dev > 1e-10 {
        return Err(Error::NotOrthonormal(dev));
    }
    let mut terms = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            let x = finite_apply(k, l, gv);
            terms.push(v.iter().map(|b| inner(&x, b).norm_sqr()).sum::<f64>());
        }
    }
    let sum = crate::quadrature::pairwise_sum(&terms);
    let expected = n as f64 * norm_sqr(gv) * v.len() as f64;
    Ok(DimensionLemmaReport {
        dim: v.len(),
        sum,
        expected,
        deviation: (sum - expected).abs(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualFrame {
    pub vectors: Vec<Vec<C64>>,
    pub bounds: FrameBounds,
}

/// Canonical dual `{S^{-1} pi(lambda) g}` of a finite frame.
pub fn canonical_dual(rep: &RepModel, g: &Window, lambda: &PointSet) -> Result<DualFrame> {
    let s = frame_operator(rep, g, lambda)?;
    let eig = hermitian_eigen(&s, false)?;
    let bounds = FrameBounds::new(eig.min(), eig.max(), BoundKind::Frame, BoundMethod::ExactSpectrum);
    if bounds.a <= 0.0 {
        return Err(Error::Singular);
    }
    let l = cholesky(&s)?;
    let vectors = finite_atoms(rep, g, lambda)?
        .iter()
        .map(|a| cholesky_solve(&l, a))
        .collect();
    Ok(DualFrame { vectors, bounds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualReport {
    pub trials: usize,
    pub seed: u64,
    pub max_residual: f64,
    pub dual_lower: f64,
    pub dual_upper: f64,
}

/// Reconstruction `f = sum <f, pi(lambda) g> S^{-1} pi(lambda) g` on random `f`.
pub fn verify_dual(rep: &RepModel, g: &Window, lambda: &PointSet, trials: usize, seed: u64) -> Result<DualReport> {
    let dual = canonical_dual(rep, g, lambda)?;
    let atoms = finite_atoms(rep, g, lambda)?;
    let n = atoms[0].len();
    let mut r = rng::seeded(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let f = rng::unit_vector(&mut r, n);
        let mut rec = vec![C64::new(0.0, 0.0); n];
        for (a, d) in atoms.iter().zip(&dual.vectors) {
            let c = inner(&f, a);
            for (x, y) in rec.iter_mut().zip(d) {
                *x += c * y;
            }
        }
        let res: f64 = rec.iter().zip(&f).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(res);
    }
    let mut sd = CMatrix::zeros(n, n);
    for d in &dual.vectors {
        sd.add_outer(d, 1.0);
    }
    guard_hermitian(&mut sd)?;
    let eig = hermitian_eigen(&sd, false)?;
    Ok(DualReport {
        trials,
        seed,
        max_residual: worst,
        dual_lower: eig.min(),
        dual_upper: eig.max(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmalgamCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

/// `sum_{lambda in Lambda ∩ B_r} |F(lambda)|^2 <= Rel_Q / mu(Q) int_{B_{r+rho}} |M_Q F|^2`
/// for a radial coefficient field `F`.
pub fn amalgam_check(field: &dyn PlaneField, lambda: &PointSet, r: f64, q: &Ball) -> Result<AmalgamCheck> {
    let profile = field
        .radial()
        .ok_or(Error::Unsupported("amalgam check needs a radial profile"))?;
    let rho = q.radius;
    let rel = relative_separation(lambda, q)?.rel_sep as f64;
    let pts = lambda.points_in_disk([0.0, 0.0], r, true)?;
    let lhs_terms: Vec<f64> = pts.iter().map(|p| field.modulus(*p).map(|m| m * m)).collect::<Result<_>>()?;
    let lhs = crate::quadrature::pairwise_sum(&lhs_terms);
    let integral = crate::quadrature::romberg(
        |s| 2.0 * PI * profile.maximal(s, rho).powi(2) * s,
        0.0,
        r + rho,
        1e-10,
    )?
    .value;
    let mu_q = PI * rho * rho;
    let rhs = rel / mu_q * integral;
    Ok(AmalgamCheck {
        lhs,
        rhs,
        margin: rhs - lhs,
        pass: lhs <= rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ball, PeriodicMetric, Point};

    fn delta(n: usize) -> Window {
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[0] = C64::new(1.0, 0.0);
        Window::Vector(v)
    }

    #[test]
    fn shifted_deltas_are_orthonormal() {
        let rep = RepModel::finite_weyl_heisenberg(4).unwrap();
        let lam = PointSet::finite_subset(4, (0..4).map(|k| (k, 0)).collect());
        let fb = frame_operator_spectrum(&rep, &delta(4), &lam, &SectionConfig::default()).unwrap();
        assert!((fb.a - 1.0).abs() < 1e-12 && (fb.b - 1.0).abs() < 1e-12);
        let rb = riesz_bounds(&rep, &delta(4), &lam, &SectionConfig::default()).unwrap();
        assert!((rb.a - 1.0).abs() < 1e-12 && (rb.b - 1.0).abs() < 1e-12);
        let dual = canonical_dual(&rep, &delta(4), &lam).unwrap();
        let atoms = finite_atoms(&rep, &delta(4), &lam).unwrap();
        for (d, a) in dual.vectors.iter().zip(&atoms) {
            for (x, y) in d.iter().zip(a) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn full_group_is_tight() {
        let rep = RepModel::finite_weyl_heisenberg(8).unwrap();
        let g = Window::Vector(rng::unit_vector(&mut rng::seeded(2), 8));
        let fb = frame_operator_spectrum(&rep, &g, &PointSet::finite_all(8), &SectionConfig::default()).unwrap();
        assert!((fb.a - 8.0).abs() < 1e-10 && (fb.b - 8.0).abs() < 1e-10);
        assert_eq!(fb.condition_number.map(|c| (c - 1.0).abs() < 1e-10), Some(true));
    }

    #[test]
    fn empty_set_rejected() {
        let rep = RepModel::finite_weyl_heisenberg(4).unwrap();
        let lam = PointSet::finite_subset(4, Vec::new());
        assert_eq!(
            frame_operator_spectrum(&rep, &delta(4), &lam, &SectionConfig::default()),
            Err(Error::EmptyPointSet)
        );
    }

    #[test]
    fn lattice_separation_values() {
        assert_eq!(lattice_relative_separation(1.0, 1.0, 0.4).unwrap(), 1);
        assert_eq!(lattice_relative_separation(0.5, 0.5, 0.6).unwrap(), 6);
        assert_eq!(lattice_relative_separation(1.0, 1.0, 0.5).unwrap(), 2);
    }

    #[test]
    fn bounds_json_keys() {
        let fb = FrameBounds::new(1.0, 2.0, BoundKind::Frame, BoundMethod::ExactSpectrum);
        assert_eq!(fb.condition_number, Some(2.0));
        let zero = FrameBounds::new(0.0, 2.0, BoundKind::Frame, BoundMethod::ExactSpectrum);
        assert_eq!(zero.kind, BoundKind::Bessel);
    }

    #[test]
    fn gaussian_cover_constant() {
        let rep = RepModel::gabor_gaussian();
        let g = rep.default_window();
        let e = PeriodicMetric::euclidean(2).unwrap();
        let q = ball(&e, Point::Real([0.0; 3]), 1.0, false).unwrap();
        let lam = PointSet::lattice(0.5, 0.5).unwrap();
        let r1 = bessel_separation_bound(&rep, &g, &lam, &q, 4.5).unwrap();
        let r2 = bessel_separation_bound(&rep, &g.scaled(2.0), &lam, &q, 4.5 * 4.0).unwrap();
        assert!((r1.neighbourhood - (2.0 * 2.0_f64.ln() / PI).sqrt()).abs() < 1e-12);
        assert_eq!(r1.cover_count, r2.cover_count);
        assert!(r1.pass && r2.pass);
    }
}
