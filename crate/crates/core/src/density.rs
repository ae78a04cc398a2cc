//! Counting functions, Beurling densities, the error integrals `I_n` / `J_n`
//! and checks of the counting, density, error-exponent and hole-radius bounds.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{disk_cover, neighbourhood_radius, section_spectrum, BoundKind, FrameBounds, Hole, PointSet, SectionConfig};
use crate::geometry::{least_squares, Ball, BallPoints, PeriodicMetric, Point};
use crate::quadrature::{integrate_half_line, log_concave_tail, romberg};
use crate::rep::{
    coefficient_field, decay_envelope_check, local_maximal, CoefficientField, FiniteField, MaximalOptions,
    RadialProfile, RepModel, Window,
};

/// Default absolute tolerance for the error integrals.
pub const ERROR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingRecord {
    pub n: usize,
    pub radius: f64,
    pub inf_count: usize,
    pub sup_count: usize,
    pub measure: f64,
    /// Spacing of the centre grid; zero when every centre was visited.
    pub grid_spacing: f64,
    pub centers: usize,
    /// Centres at which some point of the set lies on the sphere.
    pub ties: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorKind {
    I,
    J,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorIntegralRecord {
    pub n: usize,
    pub radius: f64,
    pub kind: ErrorKind,
    pub value: f64,
    pub tol: f64,
    /// `value / mu(K_n)`.
    pub normalized: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TheoremId {
    #[serde(rename = "T3.3")]
    T3_3,
    #[serde(rename = "T3.5")]
    T3_5,
    #[serde(rename = "T3.6")]
    T3_6,
    #[serde(rename = "T4.3i")]
    T4_3i,
    #[serde(rename = "T4.3ii")]
    T4_3ii,
    #[serde(rename = "T5.1")]
    T5_1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub theorem: TheoremId,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// Positive when the inequality holds.
    pub margin: f64,
    pub constant: Option<f64>,
    pub pass: bool,
    /// Boundary cases are recorded but never asserted.
    pub diagnostic: bool,
    pub inputs: BTreeMap<String, f64>,
}

fn inputs(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// `#(Lambda ∩ center K)`.
pub fn count_points(lambda: &PointSet, center: Point, k: &Ball) -> Result<usize> {
    match (center, &k.points) {
        (Point::Real(c), BallPoints::Geometric { dim: 2, .. }) => {
            Ok(lambda.points_in_disk([c[0], c[1]], k.radius, k.closed)?.len())
        }
        (Point::Discrete(c), BallPoints::Enumerated { elements, .. }) => match lambda {
            PointSet::FiniteSubset { n, elements: lam } => {
                let n = *n as i64;
                let mut seen: Vec<(usize, usize)> = elements
                    .iter()
                    .map(|z| ((c[0] + z[0]).rem_euclid(n) as usize, (c[1] + z[1]).rem_euclid(n) as usize))
                    .collect();
                seen.sort_unstable();
                seen.dedup();
                Ok(lam.iter().filter(|x| seen.binary_search(x).is_ok()).count())
            }
            _ => Err(Error::Unsupported("discrete balls count finite subsets")),
        },
        _ => Err(Error::DimensionMismatch { expected: 2, got: 0 }),
    }
}

/// `#(Lambda ∩ (center + [-side/2, side/2]^2))`.
pub fn count_in_square(lambda: &PointSet, center: [f64; 2], side: f64) -> Result<usize> {
    let half = 0.5 * side;
    let pts = lambda.points_in_disk(center, half * core::f64::consts::SQRT_2, true)?;
    Ok(pts
        .iter()
        .filter(|p| (p[0] - center[0]).abs() <= half && (p[1] - center[1]).abs() <= half)
        .count())
}

/// Centre grid: one fundamental domain of the lattice, or the whole finite group.
fn centre_grid(lambda: &PointSet, spacing: Option<f64>) -> Result<(Vec<Point>, f64)> {
    match lambda {
        PointSet::FiniteSubset { n, .. } => {
            let n = *n as i64;
            Ok(((0..n).flat_map(|k| (0..n).map(move |l| Point::Discrete([k, l, 0]))).collect(), 0.0))
        }
        PointSet::Lattice { a, b } | PointSet::LatticeWithHoles { a, b, .. } => {
            let h = spacing.unwrap_or(a.min(*b) / 8.0);
            if !(h > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "center_spacing",
                    reason: "centre grid spacing must be positive",
                });
            }
            let (na, nb) = ((a / h).ceil() as usize, (b / h).ceil() as usize);
            let mut out = Vec::with_capacity(na * nb);
            for i in 0..na {
                for j in 0..nb {
                    out.push(Point::Real([i as f64 * h, j as f64 * h, 0.0]));
                }
            }
            Ok((out, h))
        }
        PointSet::Explicit { .. } => Ok((vec![Point::Real([0.0; 3])], 0.0)),
    }
}

fn has_tie(lambda: &PointSet, center: Point, k: &Ball) -> Result<bool> {
    match center {
        Point::Real(c) => {
            let r = k.radius;
            let eps = 1e-9 * r.max(1.0);
            let shell = lambda.points_in_disk([c[0], c[1]], r + eps, true)?;
            Ok(shell
                .iter()
                .any(|p| ((p[0] - c[0]).hypot(p[1] - c[1]) - r).abs() <= eps))
        }
        Point::Discrete(_) => Ok(false),
    }
}

/// Counting records over the centre grid for each ball of the exhaustion.
pub fn counting_records(lambda: &PointSet, exhaustion: &[Ball], spacing: Option<f64>) -> Result<Vec<CountingRecord>> {
    if exhaustion.is_empty() {
        return Err(Error::EmptySamples("exhaustion"));
    }
    let (centers, h) = centre_grid(lambda, spacing)?;
    exhaustion
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let mut lo = usize::MAX;
            let mut hi = 0;
            let mut ties = 0;
            for c in &centers {
                let m = count_points(lambda, *c, k)?;
                lo = lo.min(m);
                hi = hi.max(m);
                if has_tie(lambda, *c, k)? {
                    ties += 1;
                }
            }
            Ok(CountingRecord {
                n: i + 1,
                radius: k.radius,
                inf_count: lo,
                sup_count: hi,
                measure: k.measure(),
                grid_spacing: h,
                centers: centers.len(),
                ties,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub lower: f64,
    pub upper: f64,
    pub records: Vec<CountingRecord>,
}

/// Lower and upper density proxies at the largest ball of the exhaustion.
pub fn beurling_density(
    lambda: &PointSet,
    metric: &PeriodicMetric,
    exhaustion: &[Ball],
    spacing: Option<f64>,
) -> Result<DensityEstimate> {
    if exhaustion.is_empty() {
        return Err(Error::EmptySamples("exhaustion"));
    }
    if let PointSet::Explicit { points } = lambda {
        if points.is_empty() {
            return Ok(DensityEstimate {
                lower: 0.0,
                upper: 0.0,
                records: Vec::new(),
            });
        }
    }
    if metric.group.is_discrete() != lambda.is_finite_model() {
        return Err(Error::Unsupported("point set does not live on the metric's group"));
    }
    let records = counting_records(lambda, exhaustion, spacing)?;
    let last = records.last().expect("exhaustion is nonempty");
    Ok(DensityEstimate {
        lower: last.inf_count as f64 / last.measure,
        upper: last.sup_count as f64 / last.measure,
        records,
    })
}

/// Area of the intersection of two disks with radii `r1`, `r2` at distance `d`.
pub fn lens_area(r1: f64, r2: f64, d: f64) -> f64 {
    if r1 <= 0.0 || r2 <= 0.0 || d >= r1 + r2 {
        return 0.0;
    }
    if d <= (r1 - r2).abs() {
        let r = r1.min(r2);
        return PI * r * r;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
    r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * k.max(0.0).sqrt()
}

/// `int_t^inf 2 pi s F(s) ds` for `F = M^2`, `t >= rho`.
fn radial_mass_tail(profile: RadialProfile, rho: f64, t: f64) -> f64 {
    match profile {
        RadialProfile::Gaussian { amplitude } => {
            let u = t - rho;
            amplitude * amplitude * ((-PI * u * u).exp() + PI * rho * libm::erfc(PI.sqrt() * u))
        }
        RadialProfile::Power { c0, exponent } => {
            let p2 = 2.0 * exponent;
            if p2 <= 2.0 {
                return f64::INFINITY;
            }
            let v = 1.0 + t - rho;
            2.0 * PI * c0 * c0 * (v.powf(2.0 - p2) / (p2 - 2.0) + (rho - 1.0) * v.powf(1.0 - p2) / (p2 - 1.0))
        }
    }
}

/// Romberg after `s = a + (b - a)(1 - cos th) / 2`, which smooths square-root
/// behaviour at both ends.
fn romberg_cosine<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let half = 0.5 * (b - a);
    Ok(romberg(
        |th: f64| f(a + half * (1.0 - th.cos())) * half * th.sin(),
        0.0,
        PI,
        tol,
    )?
    .value)
}

/// `2 pi int_0^inf s F(s) (pi r1^2 - L(r1, r2, s)) ds` with `F = M_Q^2`.
fn radial_error_integral(profile: RadialProfile, rho: f64, r1: f64, r2: f64, tol: f64) -> Result<f64> {
    let big = PI * r1 * r1;
    let integrand = |s: f64| {
        let m = profile.maximal(s, rho);
        2.0 * PI * s * m * m * (big - lens_area(r1, r2, s))
    };
    let mut cuts = vec![0.0, rho, (r1 - r2).abs(), r1 + r2];
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let end = rho.max(r1 + r2);
    let pieces: Vec<(f64, f64)> = cuts
        .windows(2)
        .map(|w| (w[0], w[1].min(end)))
        .filter(|(a, b)| b > a)
        .collect();
    let piece_tol = tol / (2.0 * pieces.len().max(1) as f64);
    let mut total = 0.0;
    for (a, b) in pieces {
        total += romberg_cosine(&integrand, a, b, piece_tol)?;
    }
    Ok(total + big * radial_mass_tail(profile, rho, end))
}

fn radial_profile_of(rep: &RepModel, g: &Window) -> Result<RadialProfile> {
    match coefficient_field(rep, g, g, 1e-10)? {
        CoefficientField::Plane(p) => p
            .radial()
            .ok_or(Error::Unsupported("error integrals on the plane need a radial profile")),
        CoefficientField::Finite(_) => Err(Error::Unsupported("expected a plane model")),
    }
}

fn check_centered_disks(q: &Ball, k: &Ball) -> Result<()> {
    if !q.centered_at_identity() || !k.centered_at_identity() {
        return Err(Error::NotCentered);
    }
    Ok(())
}

fn finite_maximal_sq(rep: &RepModel, g: &Window, q: &Ball) -> Result<FiniteField> {
    let field = coefficient_field(rep, g, g, 1e-10)?;
    let n = rep.finite_dim().ok_or(Error::Unsupported("expected the finite model"))?;
    let mut values = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            let m = local_maximal(&field, q, Point::Discrete([k as i64, l as i64, 0]), MaximalOptions::default())?.value;
            values.push(crate::C64::new(m * m, 0.0));
        }
    }
    Ok(FiniteField { n, values })
}

/// Exact double sum `sum_{y in Y} sum_{z in Z} F(z - y)` on `Z_N x Z_N`.
fn finite_double_sum(f: &FiniteField, ys: &[bool], zs: &[bool]) -> f64 {
    let n = f.n;
    let mut terms = Vec::new();
    for y in 0..n * n {
        if !ys[y] {
            continue;
        }
        let (yk, yl) = (y / n, y % n);
        let mut s = 0.0;
        for z in 0..n * n {
            if zs[z] {
                let (zk, zl) = (z / n, z % n);
                s += f.at((zk + n - yk) % n, (zl + n - yl) % n).re;
            }
        }
        terms.push(s);
    }
    crate::quadrature::pairwise_sum(&terms)
}

fn finite_masks(n: usize, q: &Ball, k: &Ball) -> Result<(Vec<bool>, Vec<bool>, Vec<bool>)> {
    let ke = k.elements().ok_or(Error::Unsupported("expected an enumerated ball"))?;
    let qe = q.elements().ok_or(Error::Unsupported("expected an enumerated ball"))?;
    let idx = |e: &[i64; 3]| (e[0].rem_euclid(n as i64) as usize) * n + e[1].rem_euclid(n as i64) as usize;
    let mut inside = vec![false; n * n];
    for e in ke {
        inside[idx(e)] = true;
    }
    let mut kq = vec![false; n * n];
    let mut kcq = vec![false; n * n];
    for x in 0..n * n {
        for e in qe {
            let z = ((x / n + e[0].rem_euclid(n as i64) as usize) % n) * n + (x % n + e[1].rem_euclid(n as i64) as usize) % n;
            if inside[x] {
                kq[z] = true;
            } else {
                kcq[z] = true;
            }
        }
    }
    Ok((inside, kq, kcq))
}

fn error_record(n: usize, k: &Ball, kind: ErrorKind, value: f64, tol: f64) -> ErrorIntegralRecord {
    ErrorIntegralRecord {
        n,
        radius: k.radius,
        kind,
        value,
        tol,
        normalized: value / k.measure(),
    }
}

/// `I_n = int_{K_n} int_{K_n^c Q} |M_Q V_g g(y^{-1} z)|^2 dz dy`.
pub fn error_integral_i(rep: &RepModel, g: &Window, q: &Ball, k: &Ball, n: usize, tol: f64) -> Result<ErrorIntegralRecord> {
    check_centered_disks(q, k)?;
    if let Some(dim) = rep.finite_dim() {
        let f = finite_maximal_sq(rep, g, q)?;
        let (inside, _, kcq) = finite_masks(dim, q, k)?;
        return Ok(error_record(n, k, ErrorKind::I, finite_double_sum(&f, &inside, &kcq), 0.0));
    }
    let profile = radial_profile_of(rep, g)?;
    let (r, rho) = (k.radius, q.radius);
    let value = radial_error_integral(profile, rho, r, (r - rho).max(0.0), tol)?;
    Ok(error_record(n, k, ErrorKind::I, value, tol))
}

/// `J_n = int_{K_n^c} int_{K_n Q} |M_Q V_g g(y^{-1} z)|^2 dz dy`.
pub fn error_integral_j(rep: &RepModel, g: &Window, q: &Ball, k: &Ball, n: usize, tol: f64) -> Result<ErrorIntegralRecord> {
    check_centered_disks(q, k)?;
    if let Some(dim) = rep.finite_dim() {
        let f = finite_maximal_sq(rep, g, q)?;
        let (inside, kq, _) = finite_masks(dim, q, k)?;
        let outside: Vec<bool> = inside.iter().map(|b| !b).collect();
        return Ok(error_record(n, k, ErrorKind::J, finite_double_sum(&f, &outside, &kq), 0.0));
    }
    let profile = radial_profile_of(rep, g)?;
    let (r, rho) = (k.radius, q.radius);
    let value = radial_error_integral(profile, rho, r + rho, r, tol)?;
    Ok(error_record(n, k, ErrorKind::J, value, tol))
}

/// `C(g, Q) = 4 n` from the greedy cover of `Q` by translates of `U`.
pub fn cover_constant(rep: &RepModel, g: &Window, q: &Ball) -> Result<f64> {
    let ng = g.norm();
    if !(ng > 0.0) {
        return Err(Error::ZeroWindow);
    }
    match coefficient_field(rep, g, g, 1e-10)? {
        CoefficientField::Plane(p) => {
            let u = neighbourhood_radius(p.as_ref(), q.radius, ng)?;
            Ok(4.0 * disk_cover(q.radius, u) as f64)
        }
        CoefficientField::Finite(_) => {
            let lam = PointSet::finite_all(rep.finite_dim().unwrap_or(0));
            let r = crate::frame::bessel_separation_bound(rep, g, &lam, q, 1.0)?;
            Ok(r.constant)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingReport {
    pub records: Vec<CountingRecord>,
    pub integrals_i: Vec<ErrorIntegralRecord>,
    pub integrals_j: Vec<ErrorIntegralRecord>,
    pub checks: Vec<TheoremCheck>,
    pub density_check: Option<TheoremCheck>,
    /// `(B / (A |g|^4)) (C(g,Q) / mu(Q))`.
    pub constant: f64,
    pub cover_constant: f64,
    pub bounds: FrameBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingOptions {
    pub tol: f64,
    pub center_spacing: Option<f64>,
}

impl Default for CountingOptions {
    fn default() -> Self {
        Self {
            tol: ERROR_TOL,
            center_spacing: None,
        }
    }
}

/// Critical density: the set's density equals the formal degree.
fn is_critical(lambda: &PointSet, d_pi: f64) -> bool {
    match lambda.lattice_constants() {
        Some((a, b)) => matches!(lambda, PointSet::Lattice { .. }) && (1.0 / (a * b) - d_pi).abs() <= 1e-9 * d_pi,
        None => false,
    }
}

fn counting_constant(g: &Window, q: &Ball, bounds: &FrameBounds, cover: f64) -> f64 {
    let ng = g.norm();
    bounds.b / (bounds.a * ng.powi(4)) * (cover / q.measure())
}

fn all_error_integrals(
    rep: &RepModel,
    g: &Window,
    q: &Ball,
    exhaustion: &[Ball],
    tol: f64,
) -> Result<(Vec<ErrorIntegralRecord>, Vec<ErrorIntegralRecord>)> {
    let mut is = Vec::with_capacity(exhaustion.len());
    let mut js = Vec::with_capacity(exhaustion.len());
    for (i, k) in exhaustion.iter().enumerate() {
        is.push(error_integral_i(rep, g, q, k, i + 1, tol)?);
        js.push(error_integral_j(rep, g, q, k, i + 1, tol)?);
    }
    Ok((is, js))
}

/// `inf_x #(Lambda ∩ x K_n) >= d_pi (mu(K_n) - C I_n)` along the exhaustion,
/// plus the finite-n form of `D^-(Lambda) >= d_pi` at the largest ball.
pub fn check_frame_counting(
    rep: &RepModel,
    g: &Window,
    lambda: &PointSet,
    exhaustion: &[Ball],
    q: &Ball,
    bounds: &FrameBounds,
    opts: CountingOptions,
) -> Result<CountingReport> {
    if bounds.kind != BoundKind::Frame || !(bounds.a > 0.0) {
        return Err(Error::Precondition("frame bounds with A > 0 are required"));
    }
    let records = counting_records(lambda, exhaustion, opts.center_spacing)?;
    let (integrals_i, integrals_j) = all_error_integrals(rep, g, q, exhaustion, opts.tol)?;
    let cover = cover_constant(rep, g, q)?;
    let c = counting_constant(g, q, bounds, cover);
    let d = rep.formal_degree;
    let diagnostic = is_critical(lambda, d);
    let checks: Vec<TheoremCheck> = records
        .iter()
        .zip(&integrals_i)
        .map(|(rec, int)| {
            let lhs = rec.inf_count as f64;
            let rhs = d * (rec.measure - c * int.value);
            TheoremCheck {
                theorem: TheoremId::T3_3,
                n: rec.n,
                lhs,
                rhs,
                margin: lhs - rhs,
                constant: Some(c),
                pass: lhs >= rhs,
                diagnostic,
                inputs: inputs(&[
                    ("radius", rec.radius),
                    ("measure", rec.measure),
                    ("I_n", int.value),
                    ("d_pi", d),
                    ("A", bounds.a),
                    ("B", bounds.b),
                    ("C_gQ", cover),
                    ("mu_Q", q.measure()),
                ]),
            }
        })
        .collect();
    let density_check = records.last().zip(integrals_i.last()).map(|(rec, int)| {
        let lhs = rec.inf_count as f64 / rec.measure;
        let rhs = d - d * c * int.normalized;
        TheoremCheck {
            theorem: TheoremId::T3_6,
            n: rec.n,
            lhs,
            rhs,
            margin: lhs - rhs,
            constant: Some(c),
            pass: lhs >= rhs,
            diagnostic,
            inputs: inputs(&[("radius", rec.radius), ("I_n_normalized", int.normalized), ("d_pi", d)]),
        }
    });
    Ok(CountingReport {
        records,
        integrals_i,
        integrals_j,
        checks,
        density_check,
        constant: c,
        cover_constant: cover,
        bounds: *bounds,
    })
}

/// `sup_x #(Lambda ∩ x K_n) <= d_pi (mu(K_n) + C J_n)` along the exhaustion.
pub fn check_riesz_counting(
    rep: &RepModel,
    g: &Window,
    lambda: &PointSet,
    exhaustion: &[Ball],
    q: &Ball,
    bounds: &FrameBounds,
    opts: CountingOptions,
) -> Result<CountingReport> {
    if bounds.kind != BoundKind::Riesz || !(bounds.a > 0.0) {
        return Err(Error::Precondition("Riesz bounds with A > 0 are required"));
    }
    let records = counting_records(lambda, exhaustion, opts.center_spacing)?;
    let (integrals_i, integrals_j) = all_error_integrals(rep, g, q, exhaustion, opts.tol)?;
    let cover = cover_constant(rep, g, q)?;
    let c = counting_constant(g, q, bounds, cover);
    let d = rep.formal_degree;
    let diagnostic = is_critical(lambda, d);
    let checks = records
        .iter()
        .zip(&integrals_j)
        .map(|(rec, int)| {
            let lhs = rec.sup_count as f64;
            let rhs = d * (rec.measure + c * int.value);
            TheoremCheck {
                theorem: TheoremId::T3_5,
                n: rec.n,
                lhs,
                rhs,
                margin: rhs - lhs,
                constant: Some(c),
                pass: lhs <= rhs,
                diagnostic,
                inputs: inputs(&[
                    ("radius", rec.radius),
                    ("measure", rec.measure),
                    ("J_n", int.value),
                    ("d_pi", d),
                    ("A", bounds.a),
                    ("B", bounds.b),
                    ("C_gQ", cover),
                    ("mu_Q", q.measure()),
                ]),
            }
        })
        .collect();
    Ok(CountingReport {
        records,
        integrals_i,
        integrals_j,
        checks,
        density_check: None,
        constant: c,
        cover_constant: cover,
        bounds: *bounds,
    })
}

/// Error-exponent check: slope of `log(E_n / mu(K_n))` against `log r_n`
/// must not exceed `-alpha delta / (delta + alpha) + 0.15`. The returned
/// constant makes `1 - C r^{-alpha delta / (delta + alpha)}` a lower envelope of
/// `inf_count / (d_pi mu)` (for `T4.3i`) or `1 + C r^{-...}` an upper envelope
/// of `sup_count / (d_pi mu)` (for `T4.3ii`).
pub fn check_polynomial_error_exponent(
    records: &[CountingRecord],
    integrals: &[ErrorIntegralRecord],
    alpha: f64,
    delta: f64,
    d_pi: f64,
    theorem: TheoremId,
) -> Result<TheoremCheck> {
    if integrals.len() < 4 {
        return Err(Error::InsufficientRadii {
            needed: 4,
            got: integrals.len(),
        });
    }
    let r_min = integrals.iter().map(|r| r.radius).fold(f64::INFINITY, f64::min);
    let r_max = integrals.iter().map(|r| r.radius).fold(0.0, f64::max);
    if r_max < 4.0 * r_min {
        return Err(Error::InsufficientRadii {
            needed: 4,
            got: integrals.len(),
        });
    }
    if !matches!(theorem, TheoremId::T4_3i | TheoremId::T4_3ii) {
        return Err(Error::InvalidParameter {
            name: "theorem",
            reason: "exponent checks are T4.3i or T4.3ii",
        });
    }
    if integrals.iter().any(|r| !(r.normalized > 0.0)) {
        return Err(Error::DegenerateVolume(0.0));
    }
    let xs: Vec<f64> = integrals.iter().map(|r| r.radius.ln()).collect();
    let ys: Vec<f64> = integrals.iter().map(|r| r.normalized.ln()).collect();
    let (_, slope, rmse) = least_squares(&xs, &ys);
    let kappa = alpha * delta / (delta + alpha);
    let threshold = -kappa + 0.15;
    let envelope = records
        .iter()
        .map(|rec| {
            let ratio = match theorem {
                TheoremId::T4_3i => 1.0 - rec.inf_count as f64 / (d_pi * rec.measure),
                _ => rec.sup_count as f64 / (d_pi * rec.measure) - 1.0,
            };
            ratio.max(0.0) * rec.radius.powf(kappa)
        })
        .fold(0.0, f64::max);
    Ok(TheoremCheck {
        theorem,
        n: integrals.len(),
        lhs: slope,
        rhs: threshold,
        margin: threshold - slope,
        constant: Some(envelope),
        pass: slope <= threshold,
        diagnostic: false,
        inputs: inputs(&[("alpha", alpha), ("delta", delta), ("kappa", kappa), ("fit_rmse", rmse), ("d_pi", d_pi)]),
    })
}

/// `R = (C0^2 C B / A)^{1 / (alpha + delta - 1)}`.
pub fn hole_radius_bound(c0: f64, alpha: f64, delta: f64, c: f64, a: f64, b: f64) -> Result<f64> {
    if !(alpha + delta > 1.0) {
        return Err(Error::HypothesisViolated("alpha > 1 - delta"));
    }
    if !(a > 0.0) {
        return Err(Error::Precondition("lower frame bound must be positive"));
    }
    Ok((c0 * c0 * c * b / a).powf(1.0 / (alpha + delta - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleParams {
    /// Radius of the neighbourhood `Q = B_{r0}`; must exceed 1.
    pub r0: f64,
    pub alpha: f64,
    pub delta: f64,
    /// Growth exponent of the group.
    pub growth: f64,
    /// Radius up to which the decay envelope is sampled.
    pub envelope_radius: f64,
    /// Step of the grid certifying `C''`.
    pub tail_step: f64,
    /// Radii at which the tail is compared with its envelope.
    pub tail_check_radii: [f64; 2],
    pub tol: f64,
}

impl Default for HoleParams {
    fn default() -> Self {
        Self {
            r0: 1.25,
            alpha: 2.0,
            delta: 1.0,
            growth: 2.0,
            envelope_radius: 8.0,
            tail_step: 0.125,
            tail_check_radii: [2.0, 4.0],
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleExperiment {
    pub lattice: (f64, f64),
    pub hole_radius: f64,
    pub bounds: FrameBounds,
    /// `R(A(r), B(r))`, present when `A(r) > 0`.
    pub theorem_radius: Option<f64>,
    pub check: Option<TheoremCheck>,
    pub counterexample: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub r: f64,
    pub tail: f64,
    pub envelope: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleRun {
    pub params: HoleParams,
    pub section: SectionConfig,
    pub c0: f64,
    /// `4 n / mu(Q)`.
    pub c_prime: f64,
    /// Fitted certificate for the tail envelope.
    pub c_double_prime: f64,
    pub constant: f64,
    pub experiments: Vec<HoleExperiment>,
    pub tail_checks: Vec<TailCheck>,
    pub lower_bounds_monotone: bool,
    pub counterexamples: usize,
}

/// `int_{|x| > r - r0} |M_Q V_g g|^2`.
pub fn gap_tail(profile: RadialProfile, r0: f64, r: f64, tol: f64) -> Result<f64> {
    let t = (r - r0).max(0.0);
    let integrand = |s: f64| {
        let m = profile.maximal(s, r0);
        2.0 * PI * s * m * m
    };
    let tail = |x: f64| {
        if x < r0 {
            return f64::INFINITY;
        }
        match profile {
            RadialProfile::Gaussian { .. } => {
                let u = x - r0;
                log_concave_tail(integrand(x), -2.0 * PI * u + 1.0 / x)
            }
            RadialProfile::Power { .. } => radial_mass_tail(profile, r0, x),
        }
    };
    let breaks = [r0, r0 + 1.0];
    Ok(integrate_half_line(integrand, t, &breaks, tail, tol)?.value)
}

/// Removes `Lambda ∩ B_r(0)` from the lattice for each hole radius, measures
/// section frame bounds and checks `r <= R(A(r), B(r))` whenever `A(r) > 0`.
pub fn run_hole_falsification(
    rep: &RepModel,
    g: &Window,
    lattice: (f64, f64),
    hole_radii: &[f64],
    section: &SectionConfig,
    params: &HoleParams,
) -> Result<HoleRun> {
    let (a, b) = lattice;
    if !(a * b < 1.0 / rep.formal_degree) {
        return Err(Error::Precondition("base lattice must be in the frame regime"));
    }
    if !(params.r0 > 1.0) {
        return Err(Error::InvalidParameter {
            name: "r0",
            reason: "r0 must exceed 1",
        });
    }
    if !(params.alpha + params.delta > 1.0) {
        return Err(Error::HypothesisViolated("alpha > 1 - delta"));
    }
    let largest = hole_radii.iter().fold(0.0, |m: f64, r| m.max(*r));
    if largest >= section.radius - section.margin {
        return Err(Error::SectionTooSmall {
            section: section.radius,
            hole: largest,
            margin: section.margin,
        });
    }
    let ng = g.norm();
    if !(ng > 0.0) {
        return Err(Error::ZeroWindow);
    }
    let field = coefficient_field(rep, g, g, 1e-10)?;
    let profile = match &field {
        CoefficientField::Plane(p) => p
            .radial()
            .ok_or(Error::Unsupported("hole experiments need a radial profile"))?,
        CoefficientField::Finite(_) => return Err(Error::Unsupported("expected a plane model")),
    };
    let metric = PeriodicMetric::euclidean(2)?;
    let exponent = 0.5 * (params.growth + params.alpha);
    let env = decay_envelope_check(&field, &metric, ng * ng, exponent, params.envelope_radius)?;
    let c0 = env.c0_required / (ng * ng);

    let q = crate::geometry::ball(&metric, Point::Real([0.0; 3]), params.r0, false)?;
    let c_prime = cover_constant(rep, g, &q)? / q.measure();

    // C'' certified on [r0, r_end] by monotonicity of the tail and the envelope
    let p = params.alpha + params.delta - 1.0;
    let norm4 = ng.powi(4);
    let mut grid = Vec::new();
    let mut r = params.r0;
    let r_end = params.r0 + 16.0;
    while r <= r_end + 1e-12 {
        grid.push(r);
        r += params.tail_step;
    }
    let tails: Vec<f64> = grid
        .iter()
        .map(|r| gap_tail(profile, params.r0, *r, params.tol))
        .collect::<Result<_>>()?;
    let c_double_prime = tails
        .windows(2)
        .zip(grid.windows(2))
        .map(|(_, rs)| rs)
        .zip(&tails)
        .map(|(rs, t)| t * rs[1].powf(p) / (c0 * c0 * norm4))
        .fold(0.0, f64::max);
    let constant = c_prime * c_double_prime;

    let mut tail_checks = Vec::new();
    for r in params.tail_check_radii {
        let tail = gap_tail(profile, params.r0, r, params.tol)?;
        let envelope = c0 * c0 * norm4 * c_double_prime * r.powf(-p);
        tail_checks.push(TailCheck {
            r,
            tail,
            envelope,
            pass: tail <= envelope,
        });
    }

    let mut experiments = Vec::with_capacity(hole_radii.len());
    for &hr in hole_radii {
        let lam = PointSet::lattice_with_holes(
            a,
            b,
            vec![Hole {
                center: [0.0, 0.0],
                radius: hr,
            }],
        )?;
        let eig = section_spectrum(rep, g, &lam, section)?;
        let bounds = FrameBounds::new(
            eig[0],
            eig[eig.len() - 1],
            BoundKind::Frame,
            crate::frame::BoundMethod::TruncatedSection {
                radius: section.radius,
                margin: section.margin,
            },
        );
        let (theorem_radius, check) = if bounds.a > 0.0 {
            let big_r = hole_radius_bound(c0, params.alpha, params.delta, constant, bounds.a, bounds.b)?;
            let check = TheoremCheck {
                theorem: TheoremId::T5_1,
                n: experiments.len() + 1,
                lhs: hr,
                rhs: big_r,
                margin: big_r - hr,
                constant: Some(constant),
                pass: hr <= big_r,
                diagnostic: false,
                inputs: inputs(&[
                    ("C0", c0),
                    ("C_prime", c_prime),
                    ("C_double_prime", c_double_prime),
                    ("A", bounds.a),
                    ("B", bounds.b),
                    ("alpha", params.alpha),
                    ("delta", params.delta),
                ]),
            };
            (Some(big_r), Some(check))
        } else {
            (None, None)
        };
        let counterexample = check.as_ref().is_some_and(|c| !c.pass);
        experiments.push(HoleExperiment {
            lattice,
            hole_radius: hr,
            bounds,
            theorem_radius,
            check,
            counterexample,
        });
    }
    let mut order: Vec<&HoleExperiment> = experiments.iter().collect();
    order.sort_by(|x, y| x.hole_radius.total_cmp(&y.hole_radius));
    let lower_bounds_monotone = order
        .windows(2)
        .all(|w| w[1].bounds.a <= w[0].bounds.a * (1.0 + 1e-10) + 1e-12);
    let counterexamples = experiments.iter().filter(|e| e.counterexample).count();
    Ok(HoleRun {
        params: *params,
        section: *section,
        c0,
        c_prime,
        c_double_prime,
        constant,
        experiments,
        tail_checks,
        lower_bounds_monotone,
        counterexamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ball;

    fn disk(r: f64) -> Ball {
        ball(&PeriodicMetric::euclidean(2).unwrap(), Point::Real([0.0; 3]), r, true).unwrap()
    }

    #[test]
    fn lattice_counts() {
        let z2 = PointSet::lattice(1.0, 1.0).unwrap();
        assert_eq!(count_points(&z2, Point::Real([0.0; 3]), &disk(2.0)).unwrap(), 13);
        assert_eq!(count_in_square(&z2, [0.0, 0.0], 7.0).unwrap(), 49);
        let empty = PointSet::explicit(Vec::new());
        assert_eq!(count_points(&empty, Point::Real([0.0; 3]), &disk(2.0)).unwrap(), 0);
    }

    #[test]
    fn lens_limits() {
        assert!((lens_area(2.0, 1.0, 0.5) - PI).abs() < 1e-15);
        assert_eq!(lens_area(2.0, 1.0, 3.0), 0.0);
        // two unit disks at distance 1
        let expected = 2.0 * PI / 3.0 - 3.0_f64.sqrt() / 2.0;
        assert!((lens_area(1.0, 1.0, 1.0) - expected).abs() < 1e-14);
    }

    #[test]
    fn hole_radius_examples() {
        assert!((hole_radius_bound(1.0, 2.0, 1.0, 1.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((hole_radius_bound(1.0, 1.0, 1.0, 1.0, 1.0, 16.0).unwrap() - 16.0).abs() < 1e-12);
        assert!(hole_radius_bound(1.0, 0.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn gap_tail_matches_closed_form() {
        let p = RadialProfile::Gaussian { amplitude: 1.0 };
        for r in [2.0, 2.5, 4.0] {
            let t: f64 = r - 1.25;
            let closed = if t >= 1.25 {
                radial_mass_tail(p, 1.25, t)
            } else {
                PI * (1.25 * 1.25 - t * t) + radial_mass_tail(p, 1.25, 1.25)
            };
            let q = gap_tail(p, 1.25, r, 1e-12).unwrap();
            assert!((q - closed).abs() < 1e-9, "{r}: {q} vs {closed}");
        }
    }
}
