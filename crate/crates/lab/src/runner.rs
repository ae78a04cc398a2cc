//! Experiment pipelines.

use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use cofra_core::density::{
    beurling_density, check_frame_counting, check_polynomial_error_exponent, check_riesz_counting, run_hole_falsification,
    CountingOptions, CountingReport, DensityEstimate, HoleParams, HoleRun, TheoremCheck, TheoremId,
};
use cofra_core::frame::{
    bessel_separation_bound, frame_operator, frame_operator_spectrum, gram_matrix, relative_separation, riesz_bounds,
    verify_dual, BesselSeparationReport, BoundKind, DualReport, FrameBounds, PointSet, SectionConfig, SeparationReport,
};
use cofra_core::geometry::{
    annulus_samples, ball, estimate_annular_decay, fit_growth_exponent, folner_exhaustion, folner_ratio, AnnularDecayConfig,
    AnnularDecayFit, Ball, GroupModel, GrowthFit, MetricKind, PeriodicMetric, Point,
};
use cofra_core::rep::{
    cocycle_exact_failures, coefficient_field, decay_envelope_check, formal_degree_converged, verify_orthogonality,
    weighted_maximal_norm, DecayEnvelopeReport, FormalDegreeEstimate, OrthogonalityReport, RepModel, WeightedNorm, Window,
};
use cofra_core::rng::{gaussian_vector, seeded};
use cofra_core::C64;

use crate::config::{ExperimentConfig, ExperimentKind, GroupChoice, MetricChoice, ModelChoice, PointSetChoice, Regime};
use crate::io;

fn core_err(stage: &str) -> impl Fn(cofra_core::Error) -> anyhow::Error + '_ {
    move |e| anyhow!("{stage}: {e}")
}

/// One pass/fail line of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    /// Diagnostic lines never fail a run.
    pub diagnostic: bool,
    #[serde(with = "cofra_core::serde_float")]
    pub value: f64,
    #[serde(with = "cofra_core::serde_float")]
    pub threshold: f64,
}

impl CheckLine {
    fn new(name: impl Into<String>, pass: bool, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass,
            diagnostic: false,
            value,
            threshold,
        }
    }

    fn from_theorem(label: &str, c: &TheoremCheck) -> Self {
        Self {
            name: format!("{label}[n={}]", c.n),
            pass: c.pass,
            diagnostic: c.diagnostic,
            value: c.lhs,
            threshold: c.rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FolnerRow {
    pub n: usize,
    pub radius: f64,
    pub measure: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryResults {
    pub growth: GrowthFit,
    pub folner: Vec<FolnerRow>,
    pub annular: Option<AnnularDecayFit>,
    pub recheck_violations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionRow {
    pub dim: usize,
    pub sum: f64,
    pub expected: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepResults {
    pub orthogonality: Option<OrthogonalityReport>,
    pub cocycle_failures: Option<usize>,
    pub dimension: Vec<DimensionRow>,
    pub formal_degree: Option<FormalDegreeEstimate>,
    pub weighted_norm: Option<WeightedNorm>,
    pub envelope: Option<DecayEnvelopeReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameInstance {
    pub label: String,
    pub size: usize,
    pub bounds: FrameBounds,
    pub separation: SeparationReport,
    pub bessel: Option<BesselSeparationReport>,
    /// Same check with the window doubled.
    pub bessel_scaled: Option<BesselSeparationReport>,
    pub dual: Option<DualReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResults {
    pub instances: Vec<FrameInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityResults {
    pub regime: Regime,
    pub counting: CountingReport,
    pub density: DensityEstimate,
    pub exponent_radii: Vec<f64>,
    pub exponent_normalized: Vec<f64>,
    pub exponent: Option<TheoremCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Results {
    Geometry(GeometryResults),
    RepCheck(RepResults),
    Frame(FrameResults),
    Density(Box<DensityResults>),
    Hole(HoleRun),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub results: Results,
    pub checks: Vec<CheckLine>,
    /// All non-diagnostic checks pass.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Extra files produced by a run (dumps), keyed by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub timings: Vec<StageTiming>,
    pub artifacts: Vec<Artifact>,
}

struct Clock {
    timings: Vec<StageTiming>,
    last: Instant,
}

impl Clock {
    fn new() -> Self {
        Self {
            timings: Vec::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: (now - self.last).as_secs_f64(),
        });
        self.last = now;
    }
}

/// Validates the configuration and runs one experiment.
pub fn run_experiment(kind: ExperimentKind, config: &ExperimentConfig, base_dir: &Path) -> Result<RunOutput> {
    config.validate(kind)?;
    let mut clock = Clock::new();
    let mut artifacts = Vec::new();
    let (results, checks) = match kind {
        ExperimentKind::Geometry => run_geometry(config, &mut clock, &mut artifacts)?,
        ExperimentKind::RepCheck => run_rep(config, base_dir, &mut clock, &mut artifacts)?,
        ExperimentKind::Frame => run_frame(config, base_dir, &mut clock, &mut artifacts)?,
        ExperimentKind::Density => run_density(config, base_dir, &mut clock)?,
        ExperimentKind::Hole => run_hole(config, base_dir, &mut clock)?,
    };
    let pass = checks.iter().all(|c| c.pass || c.diagnostic);
    Ok(RunOutput {
        report: RunReport {
            tool: "cofra".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: kind,
            config: config.clone(),
            results,
            checks,
            pass,
        },
        timings: clock.timings,
        artifacts,
    })
}

fn group_model(cfg: &ExperimentConfig) -> Result<GroupModel> {
    let g = &cfg.geometry;
    let stage = core_err("geometry");
    Ok(match g.group {
        GroupChoice::IntegerLattice => GroupModel::integer_lattice(g.dim).map_err(stage)?,
        GroupChoice::Euclidean => GroupModel::euclidean(g.dim).map_err(stage)?,
        GroupChoice::Heisenberg => GroupModel::discrete_heisenberg(),
        GroupChoice::FiniteCyclicSq => GroupModel::finite_cyclic_sq(g.n).map_err(stage)?,
    })
}

pub fn metric_for(cfg: &ExperimentConfig) -> Result<PeriodicMetric> {
    let kind = match cfg.geometry.metric {
        MetricChoice::Word => MetricKind::WordMetric,
        MetricChoice::Euclidean => MetricKind::EuclideanNorm,
        MetricChoice::Gauge => MetricKind::HomogeneousHeisenberg,
    };
    Ok(PeriodicMetric::new(kind, group_model(cfg)?)
        .map_err(core_err("geometry"))?
        .with_budget(cfg.budget))
}

fn run_geometry(cfg: &ExperimentConfig, clock: &mut Clock, artifacts: &mut Vec<Artifact>) -> Result<(Results, Vec<CheckLine>)> {
    let g = &cfg.geometry;
    let metric = metric_for(cfg)?;
    let mut checks = Vec::new();

    let growth = fit_growth_exponent(&metric, &g.radii).map_err(core_err("growth fit"))?;
    clock.lap("growth");
    if let Some([lo, hi]) = g.growth_range {
        let e = growth.exponent_hat;
        checks.push(CheckLine::new("growth_exponent_in_range", (lo..=hi).contains(&e), e, hi));
    }
    if metric.group.is_discrete() {
        let b = ball(&metric, Point::Discrete([0; 3]), g.radii[g.radii.len() - 1], true).map_err(core_err("ball"))?;
        artifacts.push(Artifact {
            name: "ball.csv".to_string(),
            contents: io::ball_csv(&b)?,
        });
    }

    let exhaustion = folner_exhaustion(&metric, g.folner_r0, g.folner_count, g.step).map_err(core_err("folner"))?;
    let k = ball(&metric, origin(&metric), g.folner_k, true).map_err(core_err("folner"))?;
    let mut folner = Vec::with_capacity(exhaustion.len());
    for (i, kn) in exhaustion.iter().enumerate() {
        folner.push(FolnerRow {
            n: i + 1,
            radius: kn.radius,
            measure: kn.measure(),
            ratio: folner_ratio(&metric, kn, &k).map_err(core_err("folner"))?,
        });
    }
    let decreasing = folner.windows(2).all(|w| w[1].ratio < w[0].ratio);
    let last = folner.last().map_or(f64::NAN, |r| r.ratio);
    checks.push(CheckLine::new("folner_ratio_decreasing", decreasing, last, folner[0].ratio));
    clock.lap("folner");

    let (annular, recheck_violations) = if g.annulus_radii.is_empty() {
        (None, None)
    } else {
        let config = AnnularDecayConfig {
            delta_step: g.delta_step,
            c_max: g.c_max,
        };
        let fit = estimate_annular_decay(&metric, &g.annulus_radii, &g.annulus_fracs, config)
            .map_err(core_err("annular decay"))?;
        checks.push(CheckLine::new("annular_decay_violations", fit.violations == 0, fit.violations as f64, 0.0));
        let recheck = if g.recheck_radii.is_empty() || g.recheck_fracs.is_empty() {
            None
        } else {
            let samples = annulus_samples(&metric, &g.recheck_radii, &g.recheck_fracs).map_err(core_err("annular decay"))?;
            let v = samples
                .iter()
                .filter(|s| s.ratio > fit.c_hat * (s.s / s.r).powf(fit.delta_hat) * (1.0 + 1e-12))
                .count();
            checks.push(CheckLine::new("annular_decay_recheck", v == 0, v as f64, 0.0));
            Some(v)
        };
        (Some(fit), recheck)
    };
    clock.lap("annular");
    Ok((
        Results::Geometry(GeometryResults {
            growth,
            folner,
            annular,
            recheck_violations,
        }),
        checks,
    ))
}

fn origin(metric: &PeriodicMetric) -> Point {
    if metric.group.is_discrete() {
        Point::Discrete([0; 3])
    } else {
        Point::Real([0.0; 3])
    }
}

pub fn rep_model(cfg: &ExperimentConfig) -> Result<RepModel> {
    let r = &cfg.rep;
    let stage = core_err("representation");
    Ok(match r.model {
        ModelChoice::FiniteWeylHeisenberg => RepModel::finite_weyl_heisenberg(r.n).map_err(stage)?,
        ModelChoice::GaborGaussian => RepModel::gabor_gaussian(),
        ModelChoice::GaborDecay => RepModel::gabor_decay(r.d, r.alpha, r.beta, r.c0).map_err(stage)?,
        ModelChoice::GaborNumeric => RepModel::gabor_numeric(),
    })
}

pub fn window_for(cfg: &ExperimentConfig, rep: &RepModel, base_dir: &Path) -> Result<Window> {
    let w = &cfg.rep.window;
    let window = match &w.file {
        None => rep.default_window(),
        Some(file) => {
            let path = base_dir.join(file);
            let values = io::read_window_csv(&path)?;
            match rep.finite_dim() {
                Some(n) if values.len() != n => {
                    anyhow::bail!("window {} has {} entries, expected {n}", path.display(), values.len())
                }
                Some(_) => Window::Vector(values),
                None => Window::Samples {
                    start: w.start,
                    step: w.step,
                    values,
                },
            }
        }
    };
    Ok(if w.scale == 1.0 { window } else { window.scaled(w.scale) })
}

/// Orthonormal basis of a random `dim`-dimensional subspace (Gram-Schmidt).
fn random_subspace(n: usize, dim: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = seeded(seed);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v = gaussian_vector(&mut rng, n);
        for b in &basis {
            let c = cofra_core::linalg::inner(&v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        let nv = cofra_core::linalg::norm(&v);
        if nv > 1e-6 {
            basis.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    basis
}

fn run_rep(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    clock: &mut Clock,
    artifacts: &mut Vec<Artifact>,
) -> Result<(Results, Vec<CheckLine>)> {
    let r = &cfg.rep;
    let rep = rep_model(cfg)?;
    let g = window_for(cfg, &rep, base_dir)?;
    let mut checks = Vec::new();
    let mut results = RepResults {
        orthogonality: None,
        cocycle_failures: None,
        dimension: Vec::new(),
        formal_degree: None,
        weighted_norm: None,
        envelope: None,
    };
    let metric = if let Some(n) = rep.finite_dim() {
        let o = verify_orthogonality(&rep, r.trials, r.tol, cfg.seed).map_err(core_err("orthogonality"))?;
        checks.push(CheckLine::new("orthogonality", o.pass, o.max_deviation, o.tol));
        results.orthogonality = Some(o);
        clock.lap("orthogonality");

        let failures = cocycle_exact_failures(n);
        checks.push(CheckLine::new("cocycle", failures == 0, failures as f64, 0.0));
        results.cocycle_failures = Some(failures);

        let rows: Vec<DimensionRow> = r
            .subspace_dims
            .par_iter()
            .enumerate()
            .map(|(i, &dim)| {
                let v = random_subspace(n, dim, cfg.seed.wrapping_add(1 + i as u64));
                cofra_core::frame::dimension_lemma_check(&rep, &g, &v)
                    .map(|d| DimensionRow {
                        dim,
                        sum: d.sum,
                        expected: d.expected,
                        deviation: d.deviation,
                    })
                    .map_err(core_err("dimension lemma"))
            })
            .collect::<Result<_>>()?;
        for d in &rows {
            checks.push(CheckLine::new(format!("dimension_lemma[dim={}]", d.dim), d.deviation <= r.tol, d.deviation, r.tol));
        }
        results.dimension = rows;
        clock.lap("dimension lemma");
        PeriodicMetric::word(GroupModel::finite_cyclic_sq(n as u32).map_err(core_err("metric"))?)
            .map_err(core_err("metric"))?
    } else {
        let fd = formal_degree_converged(&rep, &g, 4.0, 1e-8, 6).map_err(core_err("formal degree"))?;
        let dev = (fd.value - rep.formal_degree).abs();
        checks.push(CheckLine::new("formal_degree", fd.converged && dev <= 1e-6, fd.value, rep.formal_degree));
        results.formal_degree = Some(fd);
        clock.lap("formal degree");
        PeriodicMetric::euclidean(2).map_err(core_err("metric"))?
    };

    let q = ball(&metric, origin(&metric), r.q_radius, true).map_err(core_err("neighbourhood"))?;
    match weighted_maximal_norm(&rep, &g, &q, r.alpha, 1e-8) {
        Ok(w) => {
            let mut line = CheckLine::new("weighted_class", w.in_class, w.value, f64::INFINITY);
            line.diagnostic = true;
            checks.push(line);
            results.weighted_norm = Some(w);
        }
        Err(cofra_core::Error::Unsupported(_)) => {}
        Err(e) => return Err(anyhow!("weighted norm: {e}")),
    }
    clock.lap("weighted norm");

    let field = coefficient_field(&rep, &g, &g, 1e-10).map_err(core_err("coefficients"))?;
    let ng = g.norm();
    let exponent = 0.5 * (if rep.finite_dim().is_some() { 2.0 } else { r.d } + r.alpha);
    let radius = if rep.finite_dim().is_some() { r.n as f64 } else { 8.0 };
    let env = decay_envelope_check(&field, &metric, ng * ng, exponent, radius).map_err(core_err("decay envelope"))?;
    let mut line = CheckLine::new("decay_envelope", env.pass, env.c0_required, env.c0);
    line.diagnostic = true;
    checks.push(line);
    results.envelope = Some(env);
    clock.lap("decay envelope");

    if r.grid_radius > 0.0 || rep.finite_dim().is_some() {
        artifacts.push(Artifact {
            name: "coefficients.csv".to_string(),
            contents: io::coefficient_grid_csv(&field, r.grid_radius, r.grid_step)?,
        });
    }
    Ok((Results::RepCheck(results), checks))
}

fn finite_instances(cfg: &ExperimentConfig, n: usize) -> Vec<(String, PointSet)> {
    match cfg.frame.point_set {
        PointSetChoice::Full => vec![("full".to_string(), PointSet::finite_all(n))],
        _ => cfg
            .frame
            .subset_sizes
            .iter()
            .enumerate()
            .map(|(i, &size)| {
                use rand::seq::SliceRandom;
                let mut rng = seeded(cfg.seed.wrapping_add(100 + i as u64));
                let mut all: Vec<(usize, usize)> = (0..n).flat_map(|k| (0..n).map(move |l| (k, l))).collect();
                all.shuffle(&mut rng);
                all.truncate(size);
                all.sort_unstable();
                (format!("subset{i}"), PointSet::finite_subset(n, all))
            })
            .collect(),
    }
}

fn frame_section(cfg: &ExperimentConfig) -> SectionConfig {
    SectionConfig {
        radius: cfg.frame.section_radius,
        margin: cfg.frame.section_margin,
        test_spacing: cfg.frame.test_spacing,
        ..SectionConfig::default()
    }
}

fn run_frame(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    clock: &mut Clock,
    artifacts: &mut Vec<Artifact>,
) -> Result<(Results, Vec<CheckLine>)> {
    let f = &cfg.frame;
    let rep = rep_model(cfg)?;
    let g = window_for(cfg, &rep, base_dir)?;
    let section = frame_section(cfg);
    let (q, instances) = match rep.finite_dim() {
        Some(n) => {
            let m = PeriodicMetric::word(GroupModel::finite_cyclic_sq(n as u32).map_err(core_err("metric"))?)
                .map_err(core_err("metric"))?;
            let q = ball(&m, Point::Discrete([0; 3]), f.q_radius, true).map_err(core_err("neighbourhood"))?;
            (q, finite_instances(cfg, n))
        }
        None => {
            let m = PeriodicMetric::euclidean(2).map_err(core_err("metric"))?;
            let q = ball(&m, Point::Real([0.0; 3]), f.q_radius, true).map_err(core_err("neighbourhood"))?;
            let lam = PointSet::lattice(f.lattice[0], f.lattice[1]).map_err(core_err("point set"))?;
            (q, vec![(format!("lattice{}x{}", f.lattice[0], f.lattice[1]), lam)])
        }
    };
    let doubled = g.scaled(2.0);
    let results: Vec<FrameInstance> = instances
        .par_iter()
        .enumerate()
        .map(|(i, (label, lam))| -> Result<FrameInstance> {
            let bounds = if f.riesz {
                riesz_bounds(&rep, &g, lam, &section)
            } else {
                frame_operator_spectrum(&rep, &g, lam, &section)
            }
            .map_err(core_err("bounds"))?;
            let separation = relative_separation(lam, &q).map_err(core_err("separation"))?;
            let (bessel, bessel_scaled) = if f.riesz {
                (None, None)
            } else {
                let b = bessel_separation_bound(&rep, &g, lam, &q, bounds.b).map_err(core_err("bessel"))?;
                let b2 = bessel_separation_bound(&rep, &doubled, lam, &q, 4.0 * bounds.b).map_err(core_err("bessel"))?;
                (Some(b), Some(b2))
            };
            let dual = if rep.finite_dim().is_some() && bounds.kind == BoundKind::Frame {
                Some(verify_dual(&rep, &g, lam, f.dual_trials, cfg.seed.wrapping_add(200 + i as u64)).map_err(core_err("dual"))?)
            } else {
                None
            };
            let size = match lam {
                PointSet::FiniteSubset { elements, .. } => elements.len(),
                _ => 0,
            };
            Ok(FrameInstance {
                label: label.clone(),
                size,
                bounds,
                separation,
                bessel,
                bessel_scaled,
                dual,
            })
        })
        .collect::<Result<_>>()?;
    clock.lap("bounds");

    if f.dump_matrix {
        let (_, lam) = &instances[0];
        let m = if rep.finite_dim().is_some() && !f.riesz {
            frame_operator(&rep, &g, lam)
        } else {
            gram_matrix(&rep, &g, lam, &section)
        }
        .map_err(core_err("matrix"))?;
        artifacts.push(Artifact {
            name: "matrix.csv".to_string(),
            contents: io::matrix_csv(&m),
        });
    }

    let mut checks = Vec::new();
    for inst in &results {
        let b = &inst.bounds;
        checks.push(CheckLine::new(format!("bounds_ordered[{}]", inst.label), b.a <= b.b, b.a, b.b));
        if let (Some(x), Some(y)) = (&inst.bessel, &inst.bessel_scaled) {
            checks.push(CheckLine::new(
                format!("bessel_separation[{}]", inst.label),
                x.pass,
                x.separation.rel_sep as f64,
                x.rhs,
            ));
            let same = x.cover_count == y.cover_count && x.pass == y.pass;
            checks.push(CheckLine::new(
                format!("bessel_scale_invariance[{}]", inst.label),
                same,
                y.cover_count as f64,
                x.cover_count as f64,
            ));
        }
        if let Some(d) = &inst.dual {
            checks.push(CheckLine::new(format!("dual_reconstruction[{}]", inst.label), d.max_residual <= 1e-8, d.max_residual, 1e-8));
        }
    }
    clock.lap("checks");
    Ok((Results::Frame(FrameResults { instances: results }), checks))
}

fn disks(radii: &[f64]) -> Result<Vec<Ball>> {
    let m = PeriodicMetric::euclidean(2).map_err(core_err("metric"))?;
    radii
        .iter()
        .map(|r| ball(&m, Point::Real([0.0; 3]), *r, true).map_err(core_err("exhaustion")))
        .collect()
}

fn run_density(cfg: &ExperimentConfig, base_dir: &Path, clock: &mut Clock) -> Result<(Results, Vec<CheckLine>)> {
    let d = &cfg.density;
    let rep = rep_model(cfg)?;
    let g = window_for(cfg, &rep, base_dir)?;
    let lam = PointSet::lattice(d.lattice[0], d.lattice[1]).map_err(core_err("point set"))?;
    let section = SectionConfig {
        radius: d.section_radius,
        margin: d.section_margin,
        test_spacing: d.test_spacing,
        ..SectionConfig::default()
    };
    let bounds = match d.regime {
        Regime::Frame => frame_operator_spectrum(&rep, &g, &lam, &section),
        Regime::Riesz => riesz_bounds(&rep, &g, &lam, &section),
    }
    .map_err(core_err("bounds"))?;
    clock.lap("bounds");

    let metric = PeriodicMetric::euclidean(2).map_err(core_err("metric"))?;
    let q = ball(&metric, Point::Real([0.0; 3]), d.q_radius, true).map_err(core_err("neighbourhood"))?;
    let opts = CountingOptions {
        tol: d.tol,
        center_spacing: d.center_spacing,
    };
    let count = |radii: &[f64]| -> Result<CountingReport> {
        let ex = disks(radii)?;
        match d.regime {
            Regime::Frame => check_frame_counting(&rep, &g, &lam, &ex, &q, &bounds, opts),
            Regime::Riesz => check_riesz_counting(&rep, &g, &lam, &ex, &q, &bounds, opts),
        }
        .map_err(core_err("counting"))
    };
    let counting = count(&d.radii)?;
    let density = beurling_density(&lam, &metric, &disks(&d.radii)?, d.center_spacing).map_err(core_err("density"))?;
    clock.lap("counting");

    let exp_radii = if d.exponent_radii.is_empty() { d.radii.clone() } else { d.exponent_radii.clone() };
    let exp_report = count(&exp_radii)?;
    let (theorem, integrals) = match d.regime {
        Regime::Frame => (TheoremId::T4_3i, &exp_report.integrals_i),
        Regime::Riesz => (TheoremId::T4_3ii, &exp_report.integrals_j),
    };
    let exponent =
        check_polynomial_error_exponent(&exp_report.records, integrals, d.alpha, d.delta, rep.formal_degree, theorem).ok();
    let exponent_normalized: Vec<f64> = integrals.iter().map(|r| r.normalized).collect();
    clock.lap("exponent");

    let label = match d.regime {
        Regime::Frame => "frame_counting",
        Regime::Riesz => "riesz_counting",
    };
    let mut checks: Vec<CheckLine> = counting.checks.iter().map(|c| CheckLine::from_theorem(label, c)).collect();
    if let Some(c) = &counting.density_check {
        checks.push(CheckLine::from_theorem("density_lower_bound", c));
    }
    let norm: Vec<f64> = match d.regime {
        Regime::Frame => counting.integrals_i.iter().map(|r| r.normalized).collect(),
        Regime::Riesz => counting.integrals_j.iter().map(|r| r.normalized).collect(),
    };
    let decreasing = norm.windows(2).all(|w| w[1] < w[0]);
    checks.push(CheckLine::new(
        "normalized_error_decreasing",
        decreasing,
        norm.last().copied().unwrap_or(f64::NAN),
        norm.first().copied().unwrap_or(f64::NAN),
    ));
    match &exponent {
        Some(c) => checks.push(CheckLine::from_theorem("error_exponent", c)),
        None => {
            let mut line = CheckLine::new("error_exponent", false, f64::NAN, f64::NAN);
            line.diagnostic = true;
            checks.push(line);
        }
    }
    Ok((
        Results::Density(Box::new(DensityResults {
            regime: d.regime,
            counting,
            density,
            exponent_radii: exp_radii,
            exponent_normalized,
            exponent,
        })),
        checks,
    ))
}

fn run_hole(cfg: &ExperimentConfig, base_dir: &Path, clock: &mut Clock) -> Result<(Results, Vec<CheckLine>)> {
    let h = &cfg.hole;
    let rep = rep_model(cfg)?;
    let g = window_for(cfg, &rep, base_dir)?;
    let section = SectionConfig {
        radius: h.section_radius,
        margin: h.section_margin,
        test_spacing: h.test_spacing,
        ..SectionConfig::default()
    };
    let params = HoleParams {
        r0: h.r0,
        alpha: h.alpha,
        delta: h.delta,
        tail_check_radii: h.tail_check_radii,
        tail_step: h.tail_step,
        envelope_radius: h.envelope_radius,
        ..HoleParams::default()
    };
    let run = run_hole_falsification(&rep, &g, (h.lattice[0], h.lattice[1]), &h.hole_radii, &section, &params)
        .map_err(core_err("hole"))
        .context("hole falsification")?;
    clock.lap("hole");
    let mut checks = Vec::new();
    for e in &run.experiments {
        if let Some(c) = &e.check {
            let mut line = CheckLine::from_theorem("hole_radius", c);
            line.name = format!("hole_radius[r={}]", e.hole_radius);
            checks.push(line);
        }
    }
    checks.push(CheckLine::new("lower_bound_monotone", run.lower_bounds_monotone, run.experiments.len() as f64, 0.0));
    for t in &run.tail_checks {
        checks.push(CheckLine::new(format!("gap_tail[r={}]", t.r), t.pass, t.tail, t.envelope));
    }
    checks.push(CheckLine::new("counterexamples", run.counterexamples == 0, run.counterexamples as f64, 0.0));
    Ok((Results::Hole(run), checks))
}
