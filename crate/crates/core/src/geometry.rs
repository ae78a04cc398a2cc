//! Groups of polynomial growth with periodic metrics.
//!
//! Discrete elements are stored as `[i64; 3]`:
//! `Z^d` (d <= 3) zero padded, `H_3(Z)` in normal form `(x, y, z)` with
//! `(x,y,z)(x',y',z') = (x+x', y+y', z+z'+x y')`, and `Z_N x Z_N` as `(k, l, 0)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use hashbrown::{HashMap, HashSet};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Element = [i64; 3];

/// Default cap on the number of enumerated elements.
pub const DEFAULT_BUDGET: usize = 5_000_000;

/// Radius up to which a custom generating set must reach the canonical generators.
const GENERATION_RADIUS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupKind {
    Euclidean { dim: usize },
    IntegerLattice { dim: usize },
    DiscreteHeisenberg,
    FiniteCyclicSq { n: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupModel {
    pub kind: GroupKind,
    /// Symmetric generating set; empty for euclidean kinds.
    pub generators: Vec<Element>,
}

fn canonical_generators(kind: GroupKind) -> Vec<Element> {
    match kind {
        GroupKind::Euclidean { .. } => Vec::new(),
        GroupKind::IntegerLattice { dim } => {
            let mut gens = Vec::with_capacity(2 * dim);
            for i in 0..dim {
                let mut e = [0; 3];
                e[i] = 1;
                gens.push(e);
                e[i] = -1;
                gens.push(e);
            }
            gens
        }
        GroupKind::DiscreteHeisenberg => vec![[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]],
        GroupKind::FiniteCyclicSq { n } => {
            let m = n as i64 - 1;
            let mut gens = vec![[1, 0, 0], [m, 0, 0], [0, 1, 0], [0, m, 0]];
            gens.sort_unstable();
            gens.dedup();
            gens
        }
    }
}

impl GroupModel {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "supported dimensions are 1, 2 and 3",
            });
        }
        Ok(Self {
            kind: GroupKind::Euclidean { dim },
            generators: Vec::new(),
        })
    }

    pub fn integer_lattice(dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "supported dimensions are 1, 2 and 3",
            });
        }
        let kind = GroupKind::IntegerLattice { dim };
        Ok(Self {
            kind,
            generators: canonical_generators(kind),
        })
    }

    pub fn discrete_heisenberg() -> Self {
        let kind = GroupKind::DiscreteHeisenberg;
        Self {
            kind,
            generators: canonical_generators(kind),
        }
    }

    pub fn finite_cyclic_sq(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "cyclic order must be at least 2",
            });
        }
        let kind = GroupKind::FiniteCyclicSq { n };
        Ok(Self {
            kind,
            generators: canonical_generators(kind),
        })
    }

    /// Discrete group with a custom generating set. The set must be closed
    /// under inversion and reach every canonical generator within a few steps.
    pub fn with_generators(kind: GroupKind, generators: Vec<Element>) -> Result<Self> {
        if matches!(kind, GroupKind::Euclidean { .. }) {
            return Err(Error::Unsupported("euclidean groups take no generators"));
        }
        let base = match kind {
            GroupKind::IntegerLattice { dim } => Self::integer_lattice(dim)?,
            GroupKind::FiniteCyclicSq { n } => Self::finite_cyclic_sq(n)?,
            _ => Self::discrete_heisenberg(),
        };
        let mut gens: Vec<Element> = generators.into_iter().map(|g| base.reduce(g)).collect();
        gens.sort_unstable();
        gens.dedup();
        gens.retain(|g| *g != base.identity());
        if gens.is_empty() {
            return Err(Error::InvalidParameter {
                name: "generators",
                reason: "generating set is empty",
            });
        }
        for g in &gens {
            if gens.binary_search(&base.inv(*g)).is_err() {
                return Err(Error::InvalidParameter {
                    name: "generators",
                    reason: "generating set is not symmetric",
                });
            }
        }
        let model = Self {
            kind,
            generators: gens,
        };
        let layers = bfs_layers(&model, GENERATION_RADIUS, DEFAULT_BUDGET)?;
        let reached: HashSet<Element> = layers.iter().flatten().copied().collect();
        if let Some(order) = model.order() {
            if reached.len() != order {
                return Err(Error::InvalidParameter {
                    name: "generators",
                    reason: "generating set does not generate the group",
                });
            }
        } else if !canonical_generators(kind).iter().all(|g| reached.contains(g)) {
            return Err(Error::InvalidParameter {
                name: "generators",
                reason: "generating set does not generate the group",
            });
        }
        Ok(model)
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self.kind, GroupKind::Euclidean { .. })
    }

    pub fn measure_name(&self) -> &'static str {
        if self.is_discrete() {
            "counting"
        } else {
            "lebesgue"
        }
    }

    /// Number of elements of a finite group.
    pub fn order(&self) -> Option<usize> {
        match self.kind {
            GroupKind::FiniteCyclicSq { n } => Some((n as usize) * (n as usize)),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            GroupKind::Euclidean { dim } | GroupKind::IntegerLattice { dim } => dim,
            GroupKind::DiscreteHeisenberg => 3,
            GroupKind::FiniteCyclicSq { .. } => 2,
        }
    }

    pub fn identity(&self) -> Element {
        [0; 3]
    }

    fn reduce(&self, a: Element) -> Element {
        match self.kind {
            GroupKind::FiniteCyclicSq { n } => {
                let n = n as i64;
                [a[0].rem_euclid(n), a[1].rem_euclid(n), 0]
            }
            GroupKind::IntegerLattice { dim } => {
                let mut out = [0; 3];
                out[..dim].copy_from_slice(&a[..dim]);
                out
            }
            _ => a,
        }
    }

    pub fn mul(&self, a: Element, b: Element) -> Element {
        match self.kind {
            GroupKind::DiscreteHeisenberg => [a[0] + b[0], a[1] + b[1], a[2] + b[2] + a[0] * b[1]],
            GroupKind::FiniteCyclicSq { n } => {
                let n = n as i64;
                [(a[0] + b[0]).rem_euclid(n), (a[1] + b[1]).rem_euclid(n), 0]
            }
            _ => [a[0] + b[0], a[1] + b[1], a[2] + b[2]],
        }
    }

    pub fn inv(&self, a: Element) -> Element {
        match self.kind {
            GroupKind::DiscreteHeisenberg => [-a[0], -a[1], -a[2] + a[0] * a[1]],
            GroupKind::FiniteCyclicSq { n } => {
                let n = n as i64;
                [(-a[0]).rem_euclid(n), (-a[1]).rem_euclid(n), 0]
            }
            _ => [-a[0], -a[1], -a[2]],
        }
    }
}

fn bfs_layers(group: &GroupModel, depth: u32, budget: usize) -> Result<Vec<Vec<Element>>> {
    let mut visited: HashSet<Element> = HashSet::new();
    let e = group.identity();
    visited.insert(e);
    let mut layers = vec![vec![e]];
    for _ in 0..depth {
        let mut next = Vec::new();
        for x in layers.last().into_iter().flatten() {
            for g in &group.generators {
                let y = group.mul(*x, *g);
                if visited.insert(y) {
                    if visited.len() > budget {
                        return Err(Error::BudgetExceeded { budget });
                    }
                    next.push(y);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        layers.push(next);
    }
    Ok(layers)
}

/// Breadth-first spheres of the word metric around the identity.
#[derive(Debug, Clone)]
pub struct WordSpheres {
    pub layers: Vec<Vec<Element>>,
    lengths: HashMap<Element, u32>,
}

impl WordSpheres {
    /// Word length of `e` if it lies within the explored radius.
    pub fn length(&self, e: &Element) -> Option<u32> {
        self.lengths.get(e).copied()
    }

    pub fn radius(&self) -> usize {
        self.layers.len() - 1
    }

    /// Cardinality of the closed ball of integer radius `k`.
    pub fn closed_count(&self, k: usize) -> usize {
        self.layers.iter().take(k + 1).map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    EuclideanNorm,
    WordMetric,
    HomogeneousHeisenberg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicMetric {
    pub kind: MetricKind,
    pub group: GroupModel,
    pub budget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Discrete(Element),
    Real([f64; 3]),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BallPoints {
    /// Elements sorted by distance to the centre (ties in enumeration order).
    Enumerated {
        elements: Vec<Element>,
        distances: Vec<f64>,
    },
    Geometric { dim: usize, measure: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
    pub closed: bool,
    pub points: BallPoints,
}

impl Ball {
    pub fn measure(&self) -> f64 {
        match &self.points {
            BallPoints::Enumerated { elements, .. } => elements.len() as f64,
            BallPoints::Geometric { measure, .. } => *measure,
        }
    }

    pub fn elements(&self) -> Option<&[Element]> {
        match &self.points {
            BallPoints::Enumerated { elements, .. } => Some(elements),
            BallPoints::Geometric { .. } => None,
        }
    }

    pub fn centered_at_identity(&self) -> bool {
        match self.center {
            Point::Discrete(e) => e == [0; 3],
            Point::Real(x) => x == [0.0; 3],
        }
    }
}

/// Lebesgue measure of the euclidean ball of radius `r` in `R^d`.
pub fn euclidean_ball_volume(dim: usize, r: f64) -> f64 {
    let unit = match dim {
        0 => 1.0,
        1 => 2.0,
        _ => {
            let (mut v, start) = if dim % 2 == 0 { (1.0, 2) } else { (2.0, 3) };
            let mut k = start;
            while k <= dim {
                v *= 2.0 * PI / k as f64;
                k += 2;
            }
            v
        }
    };
    unit * r.powi(dim as i32)
}

fn within(d: f64, r: f64, closed: bool) -> bool {
    if closed {
        d <= r
    } else {
        d < r
    }
}

impl PeriodicMetric {
    pub fn new(kind: MetricKind, group: GroupModel) -> Result<Self> {
        let ok = match kind {
            MetricKind::EuclideanNorm => matches!(
                group.kind,
                GroupKind::Euclidean { .. } | GroupKind::IntegerLattice { .. }
            ),
            MetricKind::WordMetric => group.is_discrete(),
            MetricKind::HomogeneousHeisenberg => group.kind == GroupKind::DiscreteHeisenberg,
        };
        if !ok {
            return Err(Error::Unsupported("metric kind does not fit the group kind"));
        }
        Ok(Self {
            kind,
            group,
            budget: DEFAULT_BUDGET,
        })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(MetricKind::EuclideanNorm, GroupModel::euclidean(dim)?)
    }

    pub fn word(group: GroupModel) -> Result<Self> {
        Self::new(MetricKind::WordMetric, group)
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    /// Spheres of the word metric up to integer radius `depth`.
    pub fn spheres(&self, depth: u32) -> Result<WordSpheres> {
        if self.kind != MetricKind::WordMetric {
            return Err(Error::Unsupported("spheres exist only for word metrics"));
        }
        let layers = bfs_layers(&self.group, depth, self.budget)?;
        let mut lengths = HashMap::new();
        for (k, layer) in layers.iter().enumerate() {
            for e in layer {
                lengths.insert(*e, k as u32);
            }
        }
        Ok(WordSpheres { layers, lengths })
    }

    /// `|e| = d(e, identity)` for norm-induced metrics on discrete groups.
    pub fn norm(&self, e: Element) -> Result<f64> {
        match self.kind {
            MetricKind::EuclideanNorm => {
                Ok((e[0] as f64).hypot(e[1] as f64).hypot(e[2] as f64))
            }
            MetricKind::HomogeneousHeisenberg => Ok(heisenberg_gauge(e)),
            MetricKind::WordMetric => {
                let mut depth = 1;
                loop {
                    let s = self.spheres(depth)?;
                    if let Some(k) = s.length(&e) {
                        return Ok(k as f64);
                    }
                    if s.radius() < depth as usize {
                        return Err(Error::InvalidParameter {
                            name: "element",
                            reason: "element not in the group",
                        });
                    }
                    depth *= 2;
                }
            }
        }
    }

    pub fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        match (a, b) {
            (Point::Real(x), Point::Real(y)) if !self.group.is_discrete() => {
                let d = (x[0] - y[0]).hypot(x[1] - y[1]).hypot(x[2] - y[2]);
                Ok(d)
            }
            (Point::Discrete(x), Point::Discrete(y)) if self.group.is_discrete() => {
                self.norm(self.group.mul(self.group.inv(*x), *y))
            }
            _ => Err(Error::DimensionMismatch {
                expected: self.group.dim(),
                got: 0,
            }),
        }
    }
}

/// Cygan–Korányi gauge in exponential coordinates `t = z - x y / 2`.
pub fn heisenberg_gauge(e: Element) -> f64 {
    let (x, y, z) = (e[0] as f64, e[1] as f64, e[2] as f64);
    let t = z - 0.5 * x * y;
    let h = x * x + y * y;
    (h * h + 16.0 * t * t).sqrt().sqrt()
}

fn check_radius(r: f64) -> Result<()> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::NegativeRadius(r));
    }
    Ok(())
}

/// Elements of the ball of radius `r` around the identity with their norms.
fn identity_ball(metric: &PeriodicMetric, r: f64, closed: bool) -> Result<Vec<(Element, f64)>> {
    let budget = metric.budget;
    match metric.kind {
        MetricKind::WordMetric => {
            let depth = if closed {
                r.floor()
            } else {
                r.ceil() - 1.0
            };
            if depth < 0.0 {
                return Ok(Vec::new());
            }
            if depth > u32::MAX as f64 {
                return Err(Error::BudgetExceeded { budget });
            }
            let s = metric.spheres(depth as u32)?;
            Ok(s
                .layers
                .iter()
                .enumerate()
                .flat_map(|(k, layer)| layer.iter().map(move |e| (*e, k as f64)))
                .collect())
        }
        MetricKind::EuclideanNorm => {
            let dim = metric.group.dim();
            let m = r.floor() as i64;
            let side = 2.0 * m as f64 + 1.0;
            if side.powi(dim as i32) > budget as f64 {
                return Err(Error::BudgetExceeded { budget });
            }
            let span = |i: usize| if i < dim { -m..=m } else { 0..=0 };
            let mut out = Vec::new();
            for a in span(0) {
                for b in span(1) {
                    for c in span(2) {
                        let e = [a, b, c];
                        let d = metric.norm(e)?;
                        if within(d, r, closed) {
                            out.push((e, d));
                        }
                    }
                }
            }
            sort_by_distance(&mut out);
            Ok(out)
        }
        MetricKind::HomogeneousHeisenberg => {
            let m = r.floor() as i64;
            let t_max = 0.25 * r * r;
            let estimate = (2.0 * m as f64 + 1.0).powi(2) * (2.0 * t_max + 1.0);
            if estimate > budget as f64 {
                return Err(Error::BudgetExceeded { budget });
            }
            let mut out = Vec::new();
            for x in -m..=m {
                for y in -m..=m {
                    let mid = 0.5 * (x * y) as f64;
                    let lo = (mid - t_max).ceil() as i64;
                    let hi = (mid + t_max).floor() as i64;
                    for z in lo..=hi {
                        let e = [x, y, z];
                        let d = heisenberg_gauge(e);
                        if within(d, r, closed) {
                            out.push((e, d));
                        }
                    }
                }
            }
            sort_by_distance(&mut out);
            Ok(out)
        }
    }
}

fn sort_by_distance(v: &mut [(Element, f64)]) {
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
}

/// Ball of radius `r` around `center`.
pub fn ball(metric: &PeriodicMetric, center: Point, r: f64, closed: bool) -> Result<Ball> {
    check_radius(r)?;
    match (center, metric.group.kind) {
        (Point::Real(_), GroupKind::Euclidean { dim }) => Ok(Ball {
            center,
            radius: r,
            closed,
            points: BallPoints::Geometric {
                dim,
                measure: euclidean_ball_volume(dim, r),
            },
        }),
        (Point::Discrete(c), _) if metric.group.is_discrete() => {
            let c = metric.group.reduce(c);
            let local = identity_ball(metric, r, closed)?;
            let (elements, distances) = local
                .into_iter()
                .map(|(e, d)| (metric.group.mul(c, e), d))
                .unzip();
            Ok(Ball {
                center: Point::Discrete(c),
                radius: r,
                closed,
                points: BallPoints::Enumerated {
                    elements,
                    distances,
                },
            })
        }
        _ => Err(Error::DimensionMismatch {
            expected: metric.group.dim(),
            got: 0,
        }),
    }
}

fn identity_point(metric: &PeriodicMetric) -> Point {
    if metric.group.is_discrete() {
        Point::Discrete([0; 3])
    } else {
        Point::Real([0.0; 3])
    }
}

/// Haar measure of the ball of radius `r`.
pub fn ball_measure(metric: &PeriodicMetric, r: f64, closed: bool) -> Result<f64> {
    check_radius(r)?;
    match metric.group.kind {
        GroupKind::Euclidean { dim } => Ok(euclidean_ball_volume(dim, r)),
        _ => Ok(identity_ball(metric, r, closed)?.len() as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub radii: Vec<f64>,
    pub volumes: Vec<f64>,
    pub exponent_hat: f64,
    pub constant_hat: f64,
    /// RMSE of the log-log fit.
    pub residual: f64,
}

impl GrowthFit {
    pub fn predict(&self, r: f64) -> f64 {
        self.constant_hat * r.powf(self.exponent_hat)
    }
}

/// Least-squares line `y = a + b x`; returns `(a, b, rmse)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - a - b * x;
            e * e
        })
        .sum();
    (a, b, (sse / n).sqrt())
}

/// Log-log fit of closed-ball volumes.
pub fn fit_growth_exponent(metric: &PeriodicMetric, radii: &[f64]) -> Result<GrowthFit> {
    if radii.len() < 4 {
        return Err(Error::InsufficientRadii {
            needed: 4,
            got: radii.len(),
        });
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] < 1.0 {
        return Err(Error::InvalidParameter {
            name: "radii",
            reason: "radii must be strictly increasing and at least 1",
        });
    }
    let volumes = closed_volumes(metric, radii)?;
    if let Some((r, _)) = radii.iter().zip(&volumes).find(|(_, v)| **v <= 0.0) {
        return Err(Error::DegenerateVolume(*r));
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = volumes.iter().map(|v| v.ln()).collect();
    let (a, b, rmse) = least_squares(&xs, &ys);
    Ok(GrowthFit {
        radii: radii.to_vec(),
        volumes,
        exponent_hat: b,
        constant_hat: a.exp(),
        residual: rmse,
    })
}

fn closed_volumes(metric: &PeriodicMetric, radii: &[f64]) -> Result<Vec<f64>> {
    if metric.kind == MetricKind::WordMetric {
        let max = radii.iter().fold(0.0_f64, |m, r| m.max(*r));
        let s = metric.spheres(max.floor() as u32)?;
        return Ok(radii
            .iter()
            .map(|r| s.closed_count(r.floor() as usize) as f64)
            .collect());
    }
    radii
        .iter()
        .map(|r| ball_measure(metric, *r, true))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnularDecayConfig {
    /// Candidate exponents are `step, 2 step, ..., 1`.
    pub delta_step: f64,
    /// Largest admissible constant.
    pub c_max: f64,
}

impl Default for AnnularDecayConfig {
    fn default() -> Self {
        Self {
            delta_step: 0.05,
            c_max: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSample {
    pub r: f64,
    pub s: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnularDecayFit {
    pub delta_hat: f64,
    pub c_hat: f64,
    pub samples: Vec<AnnulusSample>,
    pub violations: usize,
}

/// `mu(B_r \ B_{r-s}) / mu(B_r)` with open balls and `s = frac * r`.
pub fn annulus_samples(
    metric: &PeriodicMetric,
    r_samples: &[f64],
    s_fracs: &[f64],
) -> Result<Vec<AnnulusSample>> {
    if r_samples.is_empty() {
        return Err(Error::EmptySamples("r_samples"));
    }
    if s_fracs.is_empty() {
        return Err(Error::EmptySamples("s_fracs"));
    }
    if r_samples.iter().any(|r| !(*r >= 1.0)) {
        return Err(Error::InvalidParameter {
            name: "r_samples",
            reason: "radii must be at least 1",
        });
    }
    if s_fracs.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(Error::InvalidParameter {
            name: "s_fracs",
            reason: "fractions must lie in (0, 1]",
        });
    }
    let mut out = Vec::with_capacity(r_samples.len() * s_fracs.len());
    for &r in r_samples {
        let outer = ball_measure(metric, r, false)?;
        if outer <= 0.0 {
            return Err(Error::DegenerateVolume(r));
        }
        for &f in s_fracs {
            let s = f * r;
            let inner = ball_measure(metric, (r - s).max(0.0), false)?;
            out.push(AnnulusSample {
                r,
                s,
                ratio: (outer - inner) / outer,
            });
        }
    }
    Ok(out)
}

fn required_constant(samples: &[AnnulusSample], delta: f64) -> f64 {
    samples
        .iter()
        .map(|p| p.ratio / (p.s / p.r).powf(delta))
        .fold(0.0, f64::max)
}

fn count_violations(samples: &[AnnulusSample], delta: f64, c: f64) -> usize {
    samples
        .iter()
        .filter(|p| p.ratio > c * (p.s / p.r).powf(delta) * (1.0 + 1e-12))
        .count()
}

/// Largest grid exponent whose minimal constant stays below `c_max`.
pub fn estimate_annular_decay(
    metric: &PeriodicMetric,
    r_samples: &[f64],
    s_fracs: &[f64],
    config: AnnularDecayConfig,
) -> Result<AnnularDecayFit> {
    if !(config.delta_step > 0.0 && config.delta_step <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "delta_step",
            reason: "must lie in (0, 1]",
        });
    }
    let samples = annulus_samples(metric, r_samples, s_fracs)?;
    let steps = (1.0 / config.delta_step).round() as usize;
    let mut chosen = None;
    for k in (1..=steps).rev() {
        let delta = k as f64 * config.delta_step;
        let c = required_constant(&samples, delta);
        if c <= config.c_max {
            chosen = Some((delta, c));
            break;
        }
    }
    let (delta_hat, c_hat) = match chosen {
        Some(v) => v,
        None => {
            let delta = config.delta_step;
            (delta, required_constant(&samples, delta))
        }
    };
    let violations = count_violations(&samples, delta_hat, c_hat);
    Ok(AnnularDecayFit {
        delta_hat,
        c_hat,
        samples,
        violations,
    })
}

/// Violations of a fitted annular-decay certificate on another sample grid.
pub fn recheck_annular_decay(
    metric: &PeriodicMetric,
    fit: &AnnularDecayFit,
    r_samples: &[f64],
    s_fracs: &[f64],
) -> Result<usize> {
    let samples = annulus_samples(metric, r_samples, s_fracs)?;
    Ok(count_violations(&samples, fit.delta_hat, fit.c_hat))
}

/// `mu(K_n K ∩ K_n^c K) / mu(K_n)`.
pub fn folner_ratio(metric: &PeriodicMetric, k_n: &Ball, k: &Ball) -> Result<f64> {
    if !k.centered_at_identity() {
        return Err(Error::NotCentered);
    }
    match (&k_n.points, &k.points) {
        (BallPoints::Geometric { dim, .. }, BallPoints::Geometric { .. }) => {
            let (r, rk) = (k_n.radius, k.radius);
            if r <= 0.0 {
                return Err(Error::DegenerateVolume(r));
            }
            let d = *dim as i32;
            Ok(((r + rk).powi(d) - (r - rk).max(0.0).powi(d)) / r.powi(d))
        }
        (
            BallPoints::Enumerated { elements: kn, .. },
            BallPoints::Enumerated { elements: kk, .. },
        ) => {
            if kn.is_empty() || kk.is_empty() {
                return Err(Error::EmptyPointSet);
            }
            if kn.len().saturating_mul(kk.len()) > metric.budget {
                return Err(Error::BudgetExceeded {
                    budget: metric.budget,
                });
            }
            let g = &metric.group;
            let inside: HashSet<Element> = kn.iter().copied().collect();
            let k_inv: Vec<Element> = kk.iter().map(|x| g.inv(*x)).collect();
            let mut product: HashSet<Element> = HashSet::new();
            let mut boundary = 0usize;
            for y in kn {
                for x in kk {
                    let z = g.mul(*y, *x);
                    if product.insert(z) && k_inv.iter().any(|ki| !inside.contains(&g.mul(z, *ki))) {
                        boundary += 1;
                    }
                }
            }
            Ok(boundary as f64 / kn.len() as f64)
        }
        _ => Err(Error::DimensionMismatch {
            expected: metric.group.dim(),
            got: 0,
        }),
    }
}

/// Closed balls around the identity with radii `r_1 + (n - 1) step`,
/// where `r_1 = max(r0 + 1, step)`.
pub fn folner_exhaustion(
    metric: &PeriodicMetric,
    r0: f64,
    count: usize,
    step: f64,
) -> Result<Vec<Ball>> {
    if !(r0 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r0",
            reason: "r0 must be positive",
        });
    }
    if metric.group.is_discrete() && r0 < 1.0 {
        return Err(Error::InvalidParameter {
            name: "r0",
            reason: "r0 must be at least 1 for discrete groups",
        });
    }
    if !(step > r0) {
        return Err(Error::InvalidParameter {
            name: "step",
            reason: "step must exceed r0",
        });
    }
    let r1 = (r0 + 1.0).max(step);
    let center = identity_point(metric);
    (0..count)
        .map(|n| ball(metric, center, r1 + n as f64 * step, true))
        .collect()
}

pub fn exhaustion_radii(r0: f64, count: usize, step: f64) -> Vec<f64> {
    let r1 = (r0 + 1.0).max(step);
    (0..count).map(|n| r1 + n as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z2() -> PeriodicMetric {
        PeriodicMetric::word(GroupModel::integer_lattice(2).unwrap()).unwrap()
    }

    fn h3() -> PeriodicMetric {
        PeriodicMetric::word(GroupModel::discrete_heisenberg()).unwrap()
    }

    #[test]
    fn small_balls() {
        let b0 = ball(&z2(), Point::Discrete([0; 3]), 0.0, true).unwrap();
        assert_eq!(b0.measure(), 1.0);
        let b1 = ball(&z2(), Point::Discrete([0; 3]), 1.0, true).unwrap();
        assert_eq!(b1.measure(), 5.0);
        assert_eq!(ball_measure(&z2(), 2.0, true).unwrap(), 13.0);
        assert_eq!(ball_measure(&h3(), 1.0, true).unwrap(), 5.0);
        assert_eq!(ball_measure(&h3(), 0.0, true).unwrap(), 1.0);
        assert_eq!(ball_measure(&z2(), 1.0, false).unwrap(), 1.0);
        let e = PeriodicMetric::euclidean(2).unwrap();
        assert!((ball_measure(&e, 1.0, true).unwrap() - PI).abs() < 1e-15);
    }

    #[test]
    fn volume_recursion() {
        assert!((euclidean_ball_volume(3, 1.0) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((euclidean_ball_volume(1, 2.0) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn heisenberg_inverse_and_product() {
        let g = GroupModel::discrete_heisenberg();
        let a = [2, -1, 5];
        let b = [-3, 4, 1];
        assert_eq!(g.mul(a, g.inv(a)), [0; 3]);
        assert_eq!(g.mul(g.inv(a), a), [0; 3]);
        // commutator of the generators is central
        let (x, y) = ([1, 0, 0], [0, 1, 0]);
        let c = g.mul(g.mul(x, y), g.mul(g.inv(x), g.inv(y)));
        assert_eq!(c, [0, 0, 1]);
        assert_eq!(g.mul(g.mul(a, b), x), g.mul(a, g.mul(b, x)));
    }

    #[test]
    fn negative_radius_rejected() {
        assert_eq!(
            ball(&z2(), Point::Discrete([0; 3]), -1.0, true),
            Err(Error::NegativeRadius(-1.0))
        );
    }

    #[test]
    fn budget_enforced() {
        let m = z2().with_budget(10);
        assert!(matches!(
            ball_measure(&m, 3.0, true),
            Err(Error::BudgetExceeded { budget: 10 })
        ));
    }

    #[test]
    fn euclidean_folner_closed_form() {
        let e = PeriodicMetric::euclidean(2).unwrap();
        let kn = ball(&e, Point::Real([0.0; 3]), 5.0, true).unwrap();
        let k = ball(&e, Point::Real([0.0; 3]), 1.0, true).unwrap();
        assert!((folner_ratio(&e, &kn, &k).unwrap() - 0.8).abs() < 1e-14);
    }

    #[test]
    fn exhaustion_rejects_small_step() {
        let err = folner_exhaustion(&z2(), 1.0, 3, 1.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "step", .. }));
    }

    #[test]
    fn asymmetric_generators_rejected() {
        let kind = GroupKind::IntegerLattice { dim: 2 };
        assert!(GroupModel::with_generators(kind, vec![[1, 0, 0], [0, 1, 0]]).is_err());
        let ok = GroupModel::with_generators(
            kind,
            vec![[1, 1, 0], [-1, -1, 0], [0, 1, 0], [0, -1, 0]],
        );
        assert!(ok.is_ok());
        let sub = GroupModel::with_generators(kind, vec![[2, 0, 0], [-2, 0, 0], [0, 1, 0], [0, -1, 0]]);
        assert!(sub.is_err());
    }

    #[test]
    fn gauge_is_homogeneous() {
        // dilation (x, y, t) -> (s x, s y, s^2 t) scales the gauge by s
        let e = [1, 2, 4];
        let t = 4.0 - 1.0;
        let scaled = [3, 6, (9.0 * t + 0.5 * 18.0) as i64];
        assert!((heisenberg_gauge(scaled) - 3.0 * heisenberg_gauge(e)).abs() < 1e-12);
    }
}
