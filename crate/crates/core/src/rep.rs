//! Projective representations with evaluable matrix coefficients.
//!
//! Finite model on `C^N`: `(pi(k,l) f)(n) = e^{2 pi i l n / N} f(n - k mod N)`,
//! cocycle `sigma((k,l),(k',l')) = e^{-2 pi i k l' / N}`.
//!
//! Plane model on `L^2(R)`: `pi(x, w) f(t) = e^{2 pi i w t} f(t - x)`,
//! cocycle `e^{-2 pi i x w'}`. The unit Gaussian `2^{1/4} e^{-pi t^2}` has
//! `V_g g(x, w) = e^{-pi i x w} e^{-pi (x^2 + w^2) / 2}`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, BallPoints, GroupModel, PeriodicMetric, Point};
use crate::linalg::{inner, norm, C64};
use crate::quadrature::{self, integrate_half_line, log_concave_tail, romberg_2d};
use crate::rng;

/// Gaussian support used for numeric quadrature, `e^{-pi 6^2} ~ 1e-49`.
const GAUSSIAN_SUPPORT: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RepKind {
    FiniteWeylHeisenberg { n: usize },
    GaborGaussian,
    /// Modulus model `|V_g g(x)| = c0 (1 + |x|)^{-(d + alpha + beta) / 2}`.
    GaborDecay { d: f64, alpha: f64, beta: f64, c0: f64 },
    GaborNumeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepModel {
    pub kind: RepKind,
    pub group: GroupModel,
    pub formal_degree: f64,
}

impl RepModel {
    pub fn finite_weyl_heisenberg(n: usize) -> Result<Self> {
        Ok(Self {
            kind: RepKind::FiniteWeylHeisenberg { n },
            group: GroupModel::finite_cyclic_sq(n as u32)?,
            formal_degree: 1.0 / n as f64,
        })
    }

    fn plane(kind: RepKind) -> Self {
        Self {
            kind,
            group: GroupModel::euclidean(2).expect("dimension 2 is supported"),
            formal_degree: 1.0,
        }
    }

    pub fn gabor_gaussian() -> Self {
        Self::plane(RepKind::GaborGaussian)
    }

    pub fn gabor_decay(d: f64, alpha: f64, beta: f64, c0: f64) -> Result<Self> {
        if !(c0 > 0.0) || !(d + alpha + beta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "c0",
                reason: "decay profile needs c0 > 0 and a positive exponent",
            });
        }
        Ok(Self::plane(RepKind::GaborDecay { d, alpha, beta, c0 }))
    }

    pub fn gabor_numeric() -> Self {
        Self::plane(RepKind::GaborNumeric)
    }

    pub fn finite_dim(&self) -> Option<usize> {
        match self.kind {
            RepKind::FiniteWeylHeisenberg { n } => Some(n),
            _ => None,
        }
    }

    /// Window naturally attached to the model.
    pub fn default_window(&self) -> Window {
        match self.kind {
            RepKind::FiniteWeylHeisenberg { n } => {
                let mut v = vec![C64::new(0.0, 0.0); n];
                v[0] = C64::new(1.0, 0.0);
                Window::Vector(v)
            }
            RepKind::GaborDecay { d, alpha, beta, c0 } => Window::DecayProfile { d, alpha, beta, c0 },
            RepKind::GaborGaussian | RepKind::GaborNumeric => Window::Gaussian { scale: 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Window {
    /// Vector in `C^N`.
    Vector(Vec<C64>),
    /// `scale * 2^{1/4} e^{-pi t^2}`.
    Gaussian { scale: f64 },
    /// Modulus-only window described by its coefficient envelope.
    DecayProfile { d: f64, alpha: f64, beta: f64, c0: f64 },
    /// Samples `values[j] = g(start + j step)`, linearly interpolated, zero outside.
    Samples { start: f64, step: f64, values: Vec<C64> },
}

impl Window {
    pub fn norm(&self) -> f64 {
        match self {
            Window::Vector(v) => norm(v),
            Window::Gaussian { scale } => scale.abs(),
            Window::DecayProfile { c0, .. } => c0.sqrt(),
            Window::Samples { step, values, .. } => {
                // exact for the piecewise linear interpolant
                let s: f64 = values
                    .windows(2)
                    .map(|w| w[0].norm_sqr() + (w[0] * w[1].conj()).re + w[1].norm_sqr())
                    .sum();
                (s * step / 3.0).sqrt()
            }
        }
    }

    pub fn scaled(&self, c: f64) -> Window {
        match self {
            Window::Vector(v) => Window::Vector(v.iter().map(|z| z * c).collect()),
            Window::Gaussian { scale } => Window::Gaussian { scale: scale * c },
            Window::DecayProfile { d, alpha, beta, c0 } => Window::DecayProfile {
                d: *d,
                alpha: *alpha,
                beta: *beta,
                c0: c0 * c * c,
            },
            Window::Samples {
                start,
                step,
                values,
            } => Window::Samples {
                start: *start,
                step: *step,
                values: values.iter().map(|z| z * c).collect(),
            },
        }
    }

    fn support(&self) -> Option<(f64, f64)> {
        match self {
            Window::Gaussian { .. } => Some((-GAUSSIAN_SUPPORT, GAUSSIAN_SUPPORT)),
            Window::Samples {
                start,
                step,
                values,
            } => Some((*start, start + step * (values.len().max(1) - 1) as f64)),
            _ => None,
        }
    }

    /// Point value of a function window on the real line.
    pub fn eval(&self, t: f64) -> C64 {
        match self {
            Window::Gaussian { scale } => {
                C64::new(scale * 2.0_f64.powf(0.25) * (-PI * t * t).exp(), 0.0)
            }
            Window::Samples {
                start,
                step,
                values,
            } => {
                let u = (t - start) / step;
                if !(u >= 0.0) || values.is_empty() {
                    return C64::new(0.0, 0.0);
                }
                let j = u.floor() as usize;
                if j + 1 >= values.len() {
                    return if j + 1 == values.len() && u == j as f64 {
                        values[j]
                    } else {
                        C64::new(0.0, 0.0)
                    };
                }
                let frac = u - j as f64;
                values[j] * (1.0 - frac) + values[j + 1] * frac
            }
            _ => C64::new(0.0, 0.0),
        }
    }
}

fn roots(n: usize) -> Vec<C64> {
    (0..n)
        .map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64))
        .collect()
}

/// `pi(k, l) f` on `C^N`.
pub fn finite_apply(k: usize, l: usize, f: &[C64]) -> Vec<C64> {
    let n = f.len();
    let w = roots(n);
    (0..n)
        .map(|m| w[(l * m) % n] * f[(m + n - k % n) % n])
        .collect()
}

/// `sigma((k,l),(k',l'))` for the finite model.
pub fn finite_cocycle(n: usize, x: (usize, usize), y: (usize, usize)) -> C64 {
    let e = (n - (x.0 * y.1) % n) % n;
    C64::from_polar(1.0, 2.0 * PI * e as f64 / n as f64)
}

/// Exponent form: `pi(k,l) e_m = w^{phase} e_{m+k}` with `w = e^{2 pi i / N}`.
fn monomial(n: usize, (k, l): (usize, usize), m: usize) -> (usize, usize) {
    let target = (m + k) % n;
    (target, (l * target) % n)
}

/// Checks `pi(x) pi(y) = sigma(x,y) pi(xy)` for all pairs in exact arithmetic on
/// phase exponents. Returns the number of failing pairs.
pub fn cocycle_exact_failures(n: usize) -> usize {
    let mut failures = 0;
    for k in 0..n {
        for l in 0..n {
            for k2 in 0..n {
                for l2 in 0..n {
                    let sigma = (n - (k * l2) % n) % n;
                    let xy = ((k + k2) % n, (l + l2) % n);
                    let ok = (0..n).all(|m| {
                        let (t1, p1) = monomial(n, (k2, l2), m);
                        let (t2, p2) = monomial(n, (k, l), t1);
                        let (t3, p3) = monomial(n, xy, m);
                        t2 == t3 && (p1 + p2) % n == (sigma + p3) % n
                    });
                    if !ok {
                        failures += 1;
                    }
                }
            }
        }
    }
    failures
}

/// Largest `|pi(x) pi(y) f - sigma(x,y) pi(xy) f|` over all pairs for one `f`.
pub fn cocycle_defect(f: &[C64]) -> f64 {
    let n = f.len();
    let mut worst = 0.0_f64;
    for k in 0..n {
        for l in 0..n {
            for k2 in 0..n {
                for l2 in 0..n {
                    let lhs = finite_apply(k, l, &finite_apply(k2, l2, f));
                    let s = finite_cocycle(n, (k, l), (k2, l2));
                    let rhs = finite_apply((k + k2) % n, (l + l2) % n, f);
                    for (a, b) in lhs.iter().zip(&rhs) {
                        worst = worst.max((a - s * b).norm());
                    }
                }
            }
        }
    }
    worst
}

/// `V_g f` on all of `Z_N x Z_N`, row-major in `(k, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteField {
    pub n: usize,
    pub values: Vec<C64>,
}

impl FiniteField {
    pub fn new(f: &[C64], g: &[C64]) -> Result<Self> {
        let n = f.len();
        if g.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: g.len(),
            });
        }
        let w = roots(n);
        let mut values = Vec::with_capacity(n * n);
        for k in 0..n {
            let prod: Vec<C64> = (0..n).map(|m| f[m] * g[(m + n - k) % n].conj()).collect();
            for l in 0..n {
                let v: C64 = prod
                    .iter()
                    .enumerate()
                    .map(|(m, p)| p * w[(n - (l * m) % n) % n])
                    .sum();
                values.push(v);
            }
        }
        Ok(Self { n, values })
    }

    pub fn at(&self, k: usize, l: usize) -> C64 {
        self.values[(k % self.n) * self.n + l % self.n]
    }

    pub fn modulus(&self, k: usize, l: usize) -> f64 {
        self.at(k, l).norm()
    }
}

/// `|F|` as a function of `|z|` for radial coefficient fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum RadialProfile {
    /// `amplitude * e^{-pi s^2 / 2}`.
    Gaussian { amplitude: f64 },
    /// `c0 (1 + s)^{-exponent}`.
    Power { c0: f64, exponent: f64 },
}

impl RadialProfile {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            RadialProfile::Gaussian { amplitude } => amplitude * (-0.5 * PI * s * s).exp(),
            RadialProfile::Power { c0, exponent } => c0 * (1.0 + s).powf(-exponent),
        }
    }

    /// `M_Q F` at distance `s` when `Q` is the ball of radius `rho`.
    pub fn maximal(&self, s: f64, rho: f64) -> f64 {
        self.eval((s - rho).max(0.0))
    }

    pub fn at_origin(&self) -> f64 {
        self.eval(0.0)
    }
}

/// Coefficient field on the time-frequency plane.
pub trait PlaneField {
    fn value(&self, z: [f64; 2]) -> Result<C64>;

    fn modulus(&self, z: [f64; 2]) -> Result<f64> {
        Ok(self.value(z)?.norm())
    }

    /// Set when `|F(z)|` depends only on `|z|` and is nonincreasing.
    fn radial(&self) -> Option<RadialProfile> {
        None
    }

    /// Lipschitz constant of `|F|`.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    /// Whether `value` carries the true phase (and not only the modulus).
    fn has_phase(&self) -> bool {
        true
    }
}

/// `V_g f` for two Gaussian windows, with `amplitude = scale_f * scale_g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianField {
    pub amplitude: f64,
}

impl PlaneField for GaussianField {
    fn value(&self, [x, w]: [f64; 2]) -> Result<C64> {
        Ok(C64::from_polar(
            self.amplitude * (-0.5 * PI * (x * x + w * w)).exp(),
            -PI * x * w,
        ))
    }

    fn radial(&self) -> Option<RadialProfile> {
        Some(RadialProfile::Gaussian {
            amplitude: self.amplitude,
        })
    }

    fn lipschitz(&self) -> Option<f64> {
        // max of pi s e^{-pi s^2 / 2}
        Some(self.amplitude.abs() * (PI * (-1.0_f64).exp()).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayField {
    pub c0: f64,
    pub exponent: f64,
}

impl PlaneField for DecayField {
    fn value(&self, [x, w]: [f64; 2]) -> Result<C64> {
        let s = x.hypot(w);
        Ok(C64::new(self.c0 * (1.0 + s).powf(-self.exponent), 0.0))
    }

    fn radial(&self) -> Option<RadialProfile> {
        Some(RadialProfile::Power {
            c0: self.c0,
            exponent: self.exponent,
        })
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.c0 * self.exponent)
    }

    fn has_phase(&self) -> bool {
        false
    }
}

/// `V_g f` by adaptive quadrature of `int f(t) conj(g(t - x)) e^{-2 pi i w t} dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericField {
    pub f: Window,
    pub g: Window,
    pub tol: f64,
}

impl PlaneField for NumericField {
    fn value(&self, [x, w]: [f64; 2]) -> Result<C64> {
        let (fa, fb) = self.f.support().ok_or(Error::Unsupported("window has no samples"))?;
        let (ga, gb) = self.g.support().ok_or(Error::Unsupported("window has no samples"))?;
        let (a, b) = (fa.max(ga + x), fb.min(gb + x));
        if a >= b {
            return Ok(C64::new(0.0, 0.0));
        }
        quadrature::adaptive_simpson(
            |t| self.f.eval(t) * self.g.eval(t - x).conj() * C64::from_polar(1.0, -2.0 * PI * w * t),
            a,
            b,
            self.tol,
        )
    }
}

pub enum CoefficientField {
    Finite(FiniteField),
    Plane(Box<dyn PlaneField + Send + Sync>),
}

impl core::fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CoefficientField::Finite(x) => f.debug_tuple("Finite").field(&x.n).finish(),
            CoefficientField::Plane(p) => f
                .debug_struct("Plane")
                .field("radial", &p.radial())
                .finish(),
        }
    }
}

fn decay_exponent(d: f64, alpha: f64, beta: f64) -> f64 {
    0.5 * (d + alpha + beta)
}

/// Field `x -> V_g f(x)` for the given representation.
pub fn coefficient_field(
    rep: &RepModel,
    f: &Window,
    g: &Window,
    tol: f64,
) -> Result<CoefficientField> {
    match (rep.kind, f, g) {
        (RepKind::FiniteWeylHeisenberg { n }, Window::Vector(fv), Window::Vector(gv)) => {
            if fv.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: fv.len(),
                });
            }
            Ok(CoefficientField::Finite(FiniteField::new(fv, gv)?))
        }
        (RepKind::FiniteWeylHeisenberg { n }, _, _) => Err(Error::DimensionMismatch {
            expected: n,
            got: 0,
        }),
        (_, Window::Vector(v), _) | (_, _, Window::Vector(v)) => Err(Error::DimensionMismatch {
            expected: 0,
            got: v.len(),
        }),
        (_, Window::DecayProfile { d, alpha, beta, c0 }, Window::DecayProfile { .. }) => {
            Ok(CoefficientField::Plane(Box::new(DecayField {
                c0: *c0,
                exponent: decay_exponent(*d, *alpha, *beta),
            })))
        }
        (_, Window::DecayProfile { .. }, _) | (_, _, Window::DecayProfile { .. }) => Err(
            Error::Unsupported("decay profiles only pair with themselves"),
        ),
        (RepKind::GaborNumeric, _, _) | (_, Window::Samples { .. }, _) | (_, _, Window::Samples { .. }) => {
            Ok(CoefficientField::Plane(Box::new(NumericField {
                f: f.clone(),
                g: g.clone(),
                tol,
            })))
        }
        (_, Window::Gaussian { scale: sf }, Window::Gaussian { scale: sg }) => {
            Ok(CoefficientField::Plane(Box::new(GaussianField {
                amplitude: sf * sg,
            })))
        }
    }
}

fn finite_index(n: usize, e: [i64; 3]) -> (usize, usize) {
    let n = n as i64;
    (e[0].rem_euclid(n) as usize, e[1].rem_euclid(n) as usize)
}

/// `V_g f(x) = <f, pi(x) g>`.
pub fn matrix_coefficient(rep: &RepModel, f: &Window, g: &Window, x: Point) -> Result<C64> {
    match (rep.kind, f, g, x) {
        (RepKind::FiniteWeylHeisenberg { n }, Window::Vector(fv), Window::Vector(gv), Point::Discrete(e)) => {
            if fv.len() != n || gv.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: if fv.len() != n { fv.len() } else { gv.len() },
                });
            }
            let (k, l) = finite_index(n, e);
            Ok(inner(fv, &finite_apply(k, l, gv)))
        }
        (RepKind::FiniteWeylHeisenberg { n }, _, _, _) => Err(Error::DimensionMismatch {
            expected: n,
            got: 0,
        }),
        (_, _, _, Point::Real(z)) => match coefficient_field(rep, f, g, quadrature::DEFAULT_TOL)? {
            CoefficientField::Plane(p) => p.value([z[0], z[1]]),
            CoefficientField::Finite(_) => Err(Error::Unsupported("finite field on the plane")),
        },
        _ => Err(Error::DimensionMismatch {
            expected: 2,
            got: 3,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub max_deviation: f64,
    pub tol: f64,
    pub pass: bool,
}

/// `(sum_x <f1, pi(x) g1> <pi(x) g2, f2>, d^{-1} <f1, f2> conj(<g1, g2>))`.
pub fn orthogonality_sides(
    f1: &[C64],
    f2: &[C64],
    g1: &[C64],
    g2: &[C64],
) -> Result<(C64, C64)> {
    let n = f1.len();
    let a = FiniteField::new(f1, g1)?;
    let b = FiniteField::new(f2, g2)?;
    let lhs: C64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y.conj()).sum();
    let rhs = inner(f1, f2) * inner(g1, g2).conj() * n as f64;
    Ok((lhs, rhs))
}

pub fn verify_orthogonality(rep: &RepModel, trials: usize, tol: f64, seed: u64) -> Result<OrthogonalityReport> {
    let n = rep
        .finite_dim()
        .ok_or(Error::Unsupported("orthogonality sums need the finite model"))?;
    let mut r = rng::seeded(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let f1 = rng::unit_vector(&mut r, n);
        let f2 = rng::unit_vector(&mut r, n);
        let g1 = rng::unit_vector(&mut r, n);
        let g2 = rng::unit_vector(&mut r, n);
        let (lhs, rhs) = orthogonality_sides(&f1, &f2, &g1, &g2)?;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(OrthogonalityReport {
        n,
        trials,
        seed,
        max_deviation: worst,
        tol,
        pass: worst <= tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximalOptions {
    /// Grid spacing; defaults to `radius(Q) / 32`.
    pub spacing: Option<f64>,
    /// Add the Lipschitz slack so the value bounds the true sup from above.
    pub certify: bool,
}

impl Default for MaximalOptions {
    fn default() -> Self {
        Self {
            spacing: None,
            certify: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximalValue {
    pub value: f64,
    /// Exact (finite or radial) or certified upper bound.
    pub certified: bool,
    pub spacing: f64,
}

/// `M_Q F(x) = sup_{z in Q} |F(x z)|`.
pub fn local_maximal(
    field: &CoefficientField,
    q: &Ball,
    x: Point,
    opts: MaximalOptions,
) -> Result<MaximalValue> {
    if !q.centered_at_identity() {
        return Err(Error::NotCentered);
    }
    match (field, &q.points, x) {
        (CoefficientField::Finite(ff), BallPoints::Enumerated { elements, .. }, Point::Discrete(e)) => {
            let (k, l) = finite_index(ff.n, e);
            let value = elements
                .iter()
                .map(|z| {
                    let (a, b) = finite_index(ff.n, *z);
                    ff.modulus(k + a, l + b)
                })
                .fold(0.0, f64::max);
            Ok(MaximalValue {
                value,
                certified: true,
                spacing: 0.0,
            })
        }
        (CoefficientField::Plane(p), BallPoints::Geometric { dim: 2, .. }, Point::Real(z)) => {
            plane_maximal(p.as_ref(), q.radius, [z[0], z[1]], opts)
        }
        _ => Err(Error::DimensionMismatch {
            expected: 2,
            got: 0,
        }),
    }
}

/// Local maximal function on the plane for `Q` the disk of radius `rho`.
pub fn plane_maximal(
    field: &dyn PlaneField,
    rho: f64,
    z: [f64; 2],
    opts: MaximalOptions,
) -> Result<MaximalValue> {
    if let Some(profile) = field.radial() {
        return Ok(MaximalValue {
            value: profile.maximal(z[0].hypot(z[1]), rho),
            certified: true,
            spacing: 0.0,
        });
    }
    let h = opts.spacing.unwrap_or(rho / 32.0);
    if !(h > 0.0) {
        return Err(Error::InvalidParameter {
            name: "spacing",
            reason: "grid spacing must be positive",
        });
    }
    let slack = if opts.certify {
        field.lipschitz().ok_or(Error::MissingModulusBound)? * h / core::f64::consts::SQRT_2
    } else {
        0.0
    };
    let m = (rho / h).floor() as i64;
    let mut best = 0.0_f64;
    for i in -m..=m {
        for j in -m..=m {
            let (a, b) = (i as f64 * h, j as f64 * h);
            if a.hypot(b) <= rho {
                best = best.max(field.modulus([z[0] + a, z[1] + b])?);
            }
        }
    }
    Ok(MaximalValue {
        value: best + slack,
        certified: opts.certify,
        spacing: h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorm {
    /// `int |M_Q V_g g|^2 (1 + |x|)^alpha`, or infinity when outside the class.
    #[serde(with = "crate::serde_float")]
    pub value: f64,
    #[serde(with = "crate::serde_float")]
    pub tail_bound: f64,
    #[serde(with = "crate::serde_float")]
    pub truncation: f64,
    pub in_class: bool,
}

fn finite_word_norm(n: usize, k: usize, l: usize) -> f64 {
    (k.min(n - k) + l.min(n - l)) as f64
}

/// Weighted `L^2` norm of the local maximal function of `V_g g`.
///
/// Finite models use the word metric of `Z_N x Z_N` for `|x|`; plane models
/// need a radial coefficient profile and integrate in polar form.
pub fn weighted_maximal_norm(
    rep: &RepModel,
    g: &Window,
    q: &Ball,
    alpha: f64,
    tol: f64,
) -> Result<WeightedNorm> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: "weight exponent must be nonnegative",
        });
    }
    if !q.centered_at_identity() {
        return Err(Error::NotCentered);
    }
    let field = coefficient_field(rep, g, g, tol)?;
    match field {
        CoefficientField::Finite(ref ff) => {
            let n = ff.n;
            let mut terms = Vec::with_capacity(n * n);
            for k in 0..n {
                for l in 0..n {
                    let m = local_maximal(
                        &field,
                        q,
                        Point::Discrete([k as i64, l as i64, 0]),
                        MaximalOptions::default(),
                    )?
                    .value;
                    terms.push(m * m * (1.0 + finite_word_norm(n, k, l)).powf(alpha));
                }
            }
            Ok(WeightedNorm {
                value: quadrature::pairwise_sum(&terms),
                tail_bound: 0.0,
                truncation: f64::INFINITY,
                in_class: true,
            })
        }
        CoefficientField::Plane(p) => {
            if let RepKind::GaborDecay { beta, .. } = rep.kind {
                // annular decay exponent of the plane is 1
                if beta + 1.0 <= 1.0 {
                    return Ok(not_in_class());
                }
            }
            let profile = p
                .radial()
                .ok_or(Error::Unsupported("weighted norm needs a radial coefficient profile"))?;
            radial_weighted_norm(profile, q.radius, alpha, tol)
        }
    }
}

fn not_in_class() -> WeightedNorm {
    WeightedNorm {
        value: f64::INFINITY,
        tail_bound: f64::INFINITY,
        truncation: f64::INFINITY,
        in_class: false,
    }
}

/// `2 pi int_0^inf M(s)^2 (1 + s)^alpha s ds` with `M(s) = profile((s - rho)_+)`.
pub fn radial_weighted_norm(
    profile: RadialProfile,
    rho: f64,
    alpha: f64,
    tol: f64,
) -> Result<WeightedNorm> {
    let integrand = |s: f64| {
        let m = profile.maximal(s, rho);
        2.0 * PI * m * m * (1.0 + s).powf(alpha) * s
    };
    let tail = |t: f64| radial_tail(profile, rho, alpha, t);
    if let RadialProfile::Power { exponent, .. } = profile {
        if 2.0 * exponent - alpha - 2.0 <= 0.0 {
            return Ok(not_in_class());
        }
    }
    let breaks = [rho.max(0.0)];
    let q = integrate_half_line(integrand, 0.0, &breaks, tail, tol)?;
    Ok(WeightedNorm {
        value: q.value,
        tail_bound: q.tail_bound,
        truncation: q.truncation,
        in_class: true,
    })
}

/// Bound on `2 pi int_t^inf M(s)^2 (1+s)^alpha s ds` for `t >= rho`.
fn radial_tail(profile: RadialProfile, rho: f64, alpha: f64, t: f64) -> f64 {
    if t < rho {
        return f64::INFINITY;
    }
    match profile {
        RadialProfile::Gaussian { amplitude } => {
            // log-concave integrand
            let u = t - rho;
            let h = 2.0 * PI * amplitude * amplitude * (-PI * u * u).exp() * (1.0 + t).powf(alpha) * t;
            let slope = -2.0 * PI * u + alpha / (1.0 + t) + 1.0 / t;
            log_concave_tail(h, slope)
        }
        RadialProfile::Power { c0, exponent } => {
            // (1+s)^{alpha} s <= (1+rho)^{alpha+1} (1+s-rho)^{alpha+1}
            let q = 2.0 * exponent - alpha - 2.0;
            if q <= 0.0 {
                return f64::INFINITY;
            }
            2.0 * PI * c0 * c0 * (1.0 + rho).powf(alpha + 1.0) * (1.0 + t - rho).powf(-q) / q
        }
    }
}

/// `||g||^4 / int_{B_R} |V_g g|^2` (finite: `R = None` means the whole group).
pub fn estimate_formal_degree(rep: &RepModel, g: &Window, truncation: Option<f64>) -> Result<f64> {
    let ng = g.norm();
    if !(ng > 0.0) {
        return Err(Error::ZeroWindow);
    }
    let field = coefficient_field(rep, g, g, quadrature::DEFAULT_TOL * 1e-2)?;
    let energy = match field {
        CoefficientField::Finite(ff) => {
            let n = ff.n;
            let mut terms = Vec::with_capacity(n * n);
            for k in 0..n {
                for l in 0..n {
                    if truncation.is_none_or(|r| finite_word_norm(n, k, l) <= r) {
                        terms.push(ff.modulus(k, l).powi(2));
                    }
                }
            }
            quadrature::pairwise_sum(&terms)
        }
        CoefficientField::Plane(p) => {
            let r = truncation.ok_or(Error::InvalidParameter {
                name: "truncation",
                reason: "plane models need a finite truncation radius",
            })?;
            plane_energy(p.as_ref(), r, ng.powi(4) * 1e-12)?
        }
    };
    Ok(ng.powi(4) / energy)
}

/// `int_{|z| <= r} |F(z)|^2 dz`.
pub fn plane_energy(field: &dyn PlaneField, r: f64, tol: f64) -> Result<f64> {
    if let Some(profile) = field.radial() {
        let f = |s: f64| 2.0 * PI * profile.eval(s).powi(2) * s;
        return Ok(quadrature::romberg(f, 0.0, r, tol)?.value);
    }
    // polar coordinates keep the integrand smooth
    let failure = core::cell::RefCell::new(None);
    let q = romberg_2d(
        |s, th| match field.modulus([s * th.cos(), s * th.sin()]) {
            Ok(m) => m * m * s,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        (0.0, r),
        (0.0, 2.0 * PI),
        tol,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(q?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormalDegreeEstimate {
    pub value: f64,
    pub truncation: f64,
    pub converged: bool,
}

/// Doubles the truncation radius until the estimate moves by less than `tol`.
pub fn formal_degree_converged(
    rep: &RepModel,
    g: &Window,
    r_start: f64,
    tol: f64,
    max_doublings: usize,
) -> Result<FormalDegreeEstimate> {
    let mut r = r_start;
    let mut prev = estimate_formal_degree(rep, g, Some(r))?;
    for _ in 0..max_doublings {
        r *= 2.0;
        let next = estimate_formal_degree(rep, g, Some(r))?;
        if (next - prev).abs() < tol {
            return Ok(FormalDegreeEstimate {
                value: next,
                truncation: r,
                converged: true,
            });
        }
        prev = next;
    }
    Ok(FormalDegreeEstimate {
        value: prev,
        truncation: r,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelopeReport {
    pub c0: f64,
    pub exponent: f64,
    pub sample_radius: f64,
    /// `max |V_g g(x)| (1 + |x|)^exponent / c0` over the samples.
    pub max_ratio: f64,
    /// Smallest constant for which the envelope holds on the samples.
    pub c0_required: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Shells per unit radius and angles per shell used on the plane.
const SHELLS_PER_UNIT: f64 = 32.0;
const ANGLES: usize = 64;

/// Samples `|V_g g|` on shells up to `sample_radius` and compares it to
/// `c0 (1 + |x|)^{-exponent}`.
pub fn decay_envelope_check(
    field: &CoefficientField,
    metric: &PeriodicMetric,
    c0: f64,
    exponent: f64,
    sample_radius: f64,
) -> Result<DecayEnvelopeReport> {
    if !(exponent > 0.0) {
        return Err(Error::InvalidParameter {
            name: "exponent",
            reason: "decay exponent must be positive",
        });
    }
    let mut required = 0.0_f64;
    let mut samples = 0usize;
    match field {
        CoefficientField::Finite(ff) => {
            let n = ff.n;
            for k in 0..n {
                for l in 0..n {
                    let s = metric.norm([k as i64, l as i64, 0])?;
                    if s <= sample_radius {
                        required = required.max(ff.modulus(k, l) * (1.0 + s).powf(exponent));
                        samples += 1;
                    }
                }
            }
        }
        CoefficientField::Plane(p) => {
            let shells = (sample_radius * SHELLS_PER_UNIT).ceil() as usize;
            for i in 0..=shells {
                let s = sample_radius * i as f64 / shells.max(1) as f64;
                let angles = if i == 0 { 1 } else { ANGLES };
                for j in 0..angles {
                    let th = 2.0 * PI * j as f64 / angles as f64;
                    let m = p.modulus([s * th.cos(), s * th.sin()])?;
                    required = required.max(m * (1.0 + s).powf(exponent));
                    samples += 1;
                }
            }
        }
    }
    let max_ratio = required / c0;
    Ok(DecayEnvelopeReport {
        c0,
        exponent,
        sample_radius,
        max_ratio,
        c0_required: required,
        samples,
        pass: max_ratio <= 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ball;

    fn delta(n: usize, i: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[i] = C64::new(1.0, 0.0);
        v
    }

    #[test]
    fn cocycle_exact_up_to_16() {
        for n in 1..=16 {
            assert_eq!(cocycle_exact_failures(n), 0, "n = {n}");
        }
    }

    #[test]
    fn shifted_delta_is_orthogonal() {
        let rep = RepModel::finite_weyl_heisenberg(4).unwrap();
        let g = Window::Vector(delta(4, 0));
        let v = matrix_coefficient(&rep, &g, &g, Point::Discrete([1, 0, 0])).unwrap();
        assert_eq!(v, C64::new(0.0, 0.0));
        let e = matrix_coefficient(&rep, &g, &g, Point::Discrete([0, 0, 0])).unwrap();
        assert_eq!(e, C64::new(1.0, 0.0));
    }

    #[test]
    fn field_matches_pointwise_coefficient() {
        let rep = RepModel::finite_weyl_heisenberg(5).unwrap();
        let mut r = rng::seeded(1);
        let f = rng::unit_vector(&mut r, 5);
        let g = rng::unit_vector(&mut r, 5);
        let ff = FiniteField::new(&f, &g).unwrap();
        let (wf, wg) = (Window::Vector(f), Window::Vector(g));
        for k in 0..5 {
            for l in 0..5 {
                let v = matrix_coefficient(&rep, &wf, &wg, Point::Discrete([k, l, 0])).unwrap();
                assert!((v - ff.at(k as usize, l as usize)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn dimension_mismatch_reported() {
        let rep = RepModel::finite_weyl_heisenberg(4).unwrap();
        let g = Window::Vector(delta(3, 0));
        assert!(matches!(
            matrix_coefficient(&rep, &g, &g, Point::Discrete([0; 3])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gaussian_maximal_on_inner_edge() {
        let rep = RepModel::gabor_gaussian();
        let g = rep.default_window();
        let field = coefficient_field(&rep, &g, &g, 1e-10).unwrap();
        let e = PeriodicMetric::euclidean(2).unwrap();
        let q = ball(&e, Point::Real([0.0; 3]), 1.0, false).unwrap();
        let m = local_maximal(&field, &q, Point::Real([3.0, 0.0, 0.0]), MaximalOptions::default())
            .unwrap();
        assert!((m.value - (-2.0 * PI).exp()).abs() < 1e-15);
    }

    #[test]
    fn formal_degree_finite_and_gaussian() {
        let rep = RepModel::finite_weyl_heisenberg(6).unwrap();
        let g = Window::Vector(rng::unit_vector(&mut rng::seeded(4), 6));
        let d = estimate_formal_degree(&rep, &g, None).unwrap();
        assert!((d - 1.0 / 6.0).abs() < 1e-12);
        let gab = RepModel::gabor_gaussian();
        let d = estimate_formal_degree(&gab, &Window::Gaussian { scale: 1.0 }, Some(6.0)).unwrap();
        assert!((d - 1.0).abs() < 1e-6);
        let d2 = estimate_formal_degree(&gab, &Window::Gaussian { scale: 2.0 }, Some(6.0)).unwrap();
        assert!((d - d2).abs() < 1e-12);
    }

    #[test]
    fn samples_window_norm_exact_for_linear_pieces() {
        let w = Window::Samples {
            start: 0.0,
            step: 1.0,
            values: vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        };
        // int of the hat function squared = 2/3
        assert!((w.norm() - (2.0_f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(w.eval(0.5), C64::new(0.5, 0.0));
        assert_eq!(w.eval(2.5), C64::new(0.0, 0.0));
    }

    #[test]
    fn decay_profile_outside_class() {
        let rep = RepModel::gabor_decay(2.0, 1.0, 0.0, 1.0).unwrap();
        let g = rep.default_window();
        let e = PeriodicMetric::euclidean(2).unwrap();
        let q = ball(&e, Point::Real([0.0; 3]), 1.0, false).unwrap();
        let w = weighted_maximal_norm(&rep, &g, &q, 1.0, 1e-8).unwrap();
        assert!(!w.in_class);
        assert!(w.value.is_infinite());
    }
}
