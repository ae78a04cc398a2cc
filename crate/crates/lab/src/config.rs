//! Experiment configuration: a TOML file with one table per experiment kind.
//!
//! Every field has a default, so an empty file is a valid configuration. The
//! resolved configuration (defaults filled in) is echoed into each report.

use std::path::Path;

use serde::{Deserialize, Serialize};

/// Overrides the enumeration budget of ball constructions.
pub const BUDGET_ENV: &str = "COFRA_BALL_BUDGET";

/// Largest `N` accepted for exhaustive finite-model checks.
pub const MAX_FINITE_N: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Geometry,
    RepCheck,
    Frame,
    Density,
    Hole,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Geometry => "geometry",
            ExperimentKind::RepCheck => "rep-check",
            ExperimentKind::Frame => "frame",
            ExperimentKind::Density => "density",
            ExperimentKind::Hole => "hole",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupChoice {
    IntegerLattice,
    Euclidean,
    Heisenberg,
    FiniteCyclicSq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricChoice {
    Word,
    Euclidean,
    Gauge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub group: GroupChoice,
    pub metric: MetricChoice,
    pub dim: usize,
    /// Order of the cyclic factor for `finite_cyclic_sq`.
    pub n: u32,
    pub radii: Vec<f64>,
    /// Expected range of the growth exponent; checked when present.
    pub growth_range: Option<[f64; 2]>,
    pub annulus_radii: Vec<f64>,
    pub annulus_fracs: Vec<f64>,
    /// Re-check grid for the certified annular decay fit.
    pub recheck_radii: Vec<f64>,
    pub recheck_fracs: Vec<f64>,
    pub delta_step: f64,
    pub c_max: f64,
    pub folner_r0: f64,
    pub folner_count: usize,
    pub step: f64,
    /// Radius of the fixed ball `K` in Følner ratios.
    pub folner_k: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            group: GroupChoice::IntegerLattice,
            metric: MetricChoice::Word,
            dim: 2,
            n: 8,
            radii: vec![4.0, 6.0, 8.0, 10.0, 12.0],
            growth_range: None,
            annulus_radii: Vec::new(),
            annulus_fracs: vec![0.05, 0.1, 0.2, 0.4],
            recheck_radii: Vec::new(),
            recheck_fracs: vec![0.075, 0.15, 0.3],
            delta_step: 0.05,
            c_max: 4.0,
            folner_r0: 1.0,
            folner_count: 4,
            step: 5.0,
            folner_k: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    FiniteWeylHeisenberg,
    GaborGaussian,
    GaborDecay,
    GaborNumeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// CSV file with columns `index,real,imag`; the model default when absent.
    pub file: Option<String>,
    /// Sample grid for plane windows read from a file.
    pub start: f64,
    pub step: f64,
    /// Multiplies the window.
    pub scale: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            file: None,
            start: -6.0,
            step: 1.0 / 256.0,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepConfig {
    pub model: ModelChoice,
    pub n: usize,
    pub trials: usize,
    pub tol: f64,
    /// Decay model parameters.
    pub d: f64,
    pub alpha: f64,
    pub beta: f64,
    pub c0: f64,
    pub window: WindowConfig,
    /// Subspace dimensions for the dimension lemma (finite model).
    pub subspace_dims: Vec<usize>,
    /// Radius of the neighbourhood `Q` for maximal functions.
    pub q_radius: f64,
    /// Radius of the coefficient grid dump (plane models); no dump when zero.
    pub grid_radius: f64,
    pub grid_step: f64,
}

impl Default for RepConfig {
    fn default() -> Self {
        Self {
            model: ModelChoice::FiniteWeylHeisenberg,
            n: 8,
            trials: 20,
            tol: 1e-10,
            d: 2.0,
            alpha: 2.0,
            beta: 1.0,
            c0: 1.0,
            window: WindowConfig::default(),
            subspace_dims: vec![0, 1, 3, 8],
            q_radius: 1.0,
            grid_radius: 0.0,
            grid_step: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSetChoice {
    Lattice,
    /// Random subsets of `Z_N x Z_N` (finite model).
    RandomSubset,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub point_set: PointSetChoice,
    pub lattice: [f64; 2],
    /// Sizes of the random subsets, one instance each.
    pub subset_sizes: Vec<usize>,
    pub section_radius: f64,
    pub section_margin: f64,
    pub test_spacing: f64,
    pub riesz: bool,
    pub q_radius: f64,
    pub dual_trials: usize,
    /// Write `S` (finite model) or the Gram matrix to `matrix.csv`.
    pub dump_matrix: bool,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            point_set: PointSetChoice::Lattice,
            lattice: [0.5, 0.5],
            subset_sizes: vec![12, 20, 28, 36, 44],
            section_radius: 12.0,
            section_margin: 3.0,
            test_spacing: 1.25,
            riesz: false,
            q_radius: 1.0,
            dual_trials: 10,
            dump_matrix: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Frame,
    Riesz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    pub regime: Regime,
    pub lattice: [f64; 2],
    pub radii: Vec<f64>,
    /// Radii for the error-exponent fit; the counting radii when empty.
    pub exponent_radii: Vec<f64>,
    pub q_radius: f64,
    pub alpha: f64,
    pub delta: f64,
    pub tol: f64,
    pub center_spacing: Option<f64>,
    pub section_radius: f64,
    pub section_margin: f64,
    pub test_spacing: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            regime: Regime::Frame,
            lattice: [0.5, 0.5],
            radii: vec![6.0, 10.0, 14.0],
            exponent_radii: vec![4.0, 6.0, 10.0, 14.0, 16.0],
            q_radius: 1.0,
            alpha: 2.0,
            delta: 1.0,
            tol: 1e-8,
            center_spacing: None,
            section_radius: 12.0,
            section_margin: 3.0,
            test_spacing: 1.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoleConfig {
    pub lattice: [f64; 2],
    pub hole_radii: Vec<f64>,
    pub section_radius: f64,
    pub section_margin: f64,
    pub test_spacing: f64,
    pub r0: f64,
    pub alpha: f64,
    pub delta: f64,
    pub tail_check_radii: [f64; 2],
    pub tail_step: f64,
    pub envelope_radius: f64,
}

impl Default for HoleConfig {
    fn default() -> Self {
        Self {
            lattice: [0.5, 0.5],
            hole_radii: vec![0.0, 1.0, 2.0, 4.0],
            section_radius: 12.0,
            section_margin: 3.0,
            test_spacing: 1.25,
            r0: 1.25,
            alpha: 2.0,
            delta: 1.0,
            tail_check_radii: [2.0, 4.0],
            tail_step: 0.125,
            envelope_radius: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub budget: usize,
    pub geometry: GeometryConfig,
    pub rep: RepConfig,
    pub frame: FrameConfig,
    pub density: DensityConfig,
    pub hole: HoleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            budget: cofra_core::geometry::DEFAULT_BUDGET,
            geometry: GeometryConfig::default(),
            rep: RepConfig::default(),
            frame: FrameConfig::default(),
            density: DensityConfig::default(),
            hole: HoleConfig::default(),
        }
    }
}

fn positive(field: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {x}")))
    }
}

fn ascending_positive(field: &str, xs: &[f64]) -> Result<(), ConfigError> {
    if xs.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(invalid(field, "radii must be positive"));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(field, "radii must be strictly increasing"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Applies the environment budget override, if any.
    pub fn with_env_overrides(mut self) -> Result<Self, ConfigError> {
        if let Ok(v) = std::env::var(BUDGET_ENV) {
            self.budget = v
                .trim()
                .parse()
                .map_err(|_| invalid("budget", format!("{BUDGET_ENV}={v} is not an integer")))?;
        }
        Ok(self)
    }

    /// Checks the tables used by `kind`.
    pub fn validate(&self, kind: ExperimentKind) -> Result<(), ConfigError> {
        if self.budget == 0 {
            return Err(invalid("budget", "must be positive"));
        }
        match kind {
            ExperimentKind::Geometry => self.validate_geometry(),
            ExperimentKind::RepCheck => self.validate_rep(),
            ExperimentKind::Frame => self.validate_frame(),
            ExperimentKind::Density => self.validate_density(),
            ExperimentKind::Hole => self.validate_hole(),
        }
    }

    fn validate_geometry(&self) -> Result<(), ConfigError> {
        let g = &self.geometry;
        if !(1..=3).contains(&g.dim) {
            return Err(invalid("geometry.dim", "supported dimensions are 1, 2 and 3"));
        }
        if g.group == GroupChoice::FiniteCyclicSq && !(2..=MAX_FINITE_N as u32).contains(&g.n) {
            return Err(invalid("geometry.n", format!("must lie in 2..={MAX_FINITE_N}")));
        }
        match (g.group, g.metric) {
            (GroupChoice::Euclidean, MetricChoice::Euclidean)
            | (GroupChoice::Heisenberg, MetricChoice::Gauge)
            | (_, MetricChoice::Word) => {}
            _ => return Err(invalid("geometry.metric", "not available for this group")),
        }
        if g.group == GroupChoice::Euclidean && g.metric == MetricChoice::Word {
            return Err(invalid("geometry.metric", "euclidean space uses the euclidean metric"));
        }
        if g.radii.len() < 4 {
            return Err(invalid("geometry.radii", "at least four radii are needed for a fit"));
        }
        ascending_positive("geometry.radii", &g.radii)?;
        if g.radii[0] < 1.0 {
            return Err(invalid("geometry.radii", "radii must be at least 1"));
        }
        ascending_positive("geometry.annulus_radii", &g.annulus_radii)?;
        ascending_positive("geometry.recheck_radii", &g.recheck_radii)?;
        for (field, fracs) in [("geometry.annulus_fracs", &g.annulus_fracs), ("geometry.recheck_fracs", &g.recheck_fracs)] {
            if fracs.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
                return Err(invalid(field, "fractions must lie in (0, 1)"));
            }
        }
        if !g.recheck_fracs.is_empty() && !g.annulus_fracs.is_empty() {
            let lo = g.annulus_fracs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = g.annulus_fracs.iter().cloned().fold(0.0, f64::max);
            if g.recheck_fracs.iter().any(|f| *f < lo || *f > hi) {
                return Err(invalid("geometry.recheck_fracs", "must lie inside the fitted fraction range"));
            }
        }
        if !(g.delta_step > 0.0 && g.delta_step <= 1.0) {
            return Err(invalid("geometry.delta_step", "must lie in (0, 1]"));
        }
        positive("geometry.c_max", g.c_max)?;
        positive("geometry.folner_r0", g.folner_r0)?;
        if g.step <= g.folner_r0 {
            return Err(invalid("step", format!("must exceed folner_r0 = {}", g.folner_r0)));
        }
        positive("geometry.folner_k", g.folner_k)?;
        if g.folner_count == 0 {
            return Err(invalid("geometry.folner_count", "must be positive"));
        }
        Ok(())
    }

    fn validate_rep(&self) -> Result<(), ConfigError> {
        let r = &self.rep;
        if r.model == ModelChoice::FiniteWeylHeisenberg {
            if !(1..=MAX_FINITE_N).contains(&r.n) {
                return Err(invalid("rep.n", format!("must lie in 1..={MAX_FINITE_N}")));
            }
            if r.subspace_dims.iter().any(|d| *d > r.n) {
                return Err(invalid("rep.subspace_dims", "dimensions cannot exceed n"));
            }
        }
        if r.model == ModelChoice::GaborDecay {
            positive("rep.c0", r.c0)?;
            positive("rep.d", r.d)?;
        }
        positive("rep.tol", r.tol)?;
        positive("rep.q_radius", r.q_radius)?;
        positive("rep.window.step", r.window.step)?;
        if r.window.scale == 0.0 || !r.window.scale.is_finite() {
            return Err(invalid("rep.window.scale", "must be a nonzero number"));
        }
        if r.grid_radius < 0.0 {
            return Err(invalid("rep.grid_radius", "must be nonnegative"));
        }
        positive("rep.grid_step", r.grid_step)?;
        Ok(())
    }

    fn validate_frame(&self) -> Result<(), ConfigError> {
        self.validate_rep()?;
        let f = &self.frame;
        positive("frame.lattice", f.lattice[0])?;
        positive("frame.lattice", f.lattice[1])?;
        positive("frame.section_radius", f.section_radius)?;
        positive("frame.test_spacing", f.test_spacing)?;
        positive("frame.q_radius", f.q_radius)?;
        if !(f.section_margin >= 0.0 && f.section_margin < f.section_radius) {
            return Err(invalid("frame.section_margin", "must lie in [0, section_radius)"));
        }
        let finite = self.rep.model == ModelChoice::FiniteWeylHeisenberg;
        if finite && f.point_set == PointSetChoice::Lattice {
            return Err(invalid("frame.point_set", "the finite model uses random_subset or full"));
        }
        if !finite && f.point_set != PointSetChoice::Lattice {
            return Err(invalid("frame.point_set", "plane models use lattice point sets"));
        }
        if finite && f.subset_sizes.iter().any(|s| *s == 0 || *s > self.rep.n * self.rep.n) {
            return Err(invalid("frame.subset_sizes", "sizes must lie in 1..=n^2"));
        }
        Ok(())
    }

    fn validate_density(&self) -> Result<(), ConfigError> {
        self.validate_rep()?;
        let d = &self.density;
        if self.rep.model == ModelChoice::FiniteWeylHeisenberg {
            return Err(invalid("rep.model", "density runs use a plane model"));
        }
        positive("density.lattice", d.lattice[0])?;
        positive("density.lattice", d.lattice[1])?;
        if d.radii.is_empty() {
            return Err(invalid("density.radii", "at least one radius is needed"));
        }
        ascending_positive("density.radii", &d.radii)?;
        ascending_positive("density.exponent_radii", &d.exponent_radii)?;
        positive("density.q_radius", d.q_radius)?;
        positive("density.tol", d.tol)?;
        positive("density.delta", d.delta)?;
        if d.delta > 1.0 {
            return Err(invalid("density.delta", "must lie in (0, 1]"));
        }
        if let Some(h) = d.center_spacing {
            positive("density.center_spacing", h)?;
        }
        positive("density.section_radius", d.section_radius)?;
        positive("density.test_spacing", d.test_spacing)?;
        if !(d.section_margin >= 0.0 && d.section_margin < d.section_radius) {
            return Err(invalid("density.section_margin", "must lie in [0, section_radius)"));
        }
        Ok(())
    }

    fn validate_hole(&self) -> Result<(), ConfigError> {
        self.validate_rep()?;
        let h = &self.hole;
        if self.rep.model == ModelChoice::FiniteWeylHeisenberg {
            return Err(invalid("rep.model", "hole runs use a plane model"));
        }
        positive("hole.lattice", h.lattice[0])?;
        positive("hole.lattice", h.lattice[1])?;
        if h.hole_radii.iter().any(|r| !(*r >= 0.0)) {
            return Err(invalid("hole.hole_radii", "radii must be nonnegative"));
        }
        positive("hole.section_radius", h.section_radius)?;
        positive("hole.test_spacing", h.test_spacing)?;
        if h.r0 <= 1.0 {
            return Err(invalid("hole.r0", "must exceed 1"));
        }
        positive("hole.tail_step", h.tail_step)?;
        positive("hole.envelope_radius", h.envelope_radius)?;
        if h.alpha + h.delta <= 1.0 {
            return Err(invalid("hole.alpha", "alpha + delta must exceed 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn step_below_r0_names_step() {
        let cfg = ExperimentConfig::from_toml("[geometry]\nfolner_r0 = 2.0\nstep = 1.5\n").unwrap();
        let err = cfg.validate(ExperimentKind::Geometry).unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { field, .. } if field == "step"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_toml("[hole]\nradius = 3\n").is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }
}
