//! Experiment configuration, read from TOML.
//!
//! The grammar is documented key by key in `configs/README.md`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    BoostBandit,
    BoostFullInfo,
    OgdBaseline,
    NfkmBaseline,
    SfwStochastic,
    SfwBandit,
    ConstantBaseline,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::BoostBandit => "boost_bandit",
            Algorithm::BoostFullInfo => "boost_full_info",
            Algorithm::OgdBaseline => "ogd_baseline",
            Algorithm::NfkmBaseline => "nfkm_baseline",
            Algorithm::SfwStochastic => "sfw_stochastic",
            Algorithm::SfwBandit => "sfw_bandit",
            Algorithm::ConstantBaseline => "constant_baseline",
        }
    }

    /// Whether the algorithm predicts labels from features (as opposed to
    /// playing points against a loss sequence).
    pub fn is_supervised(self) -> bool {
        !matches!(self, Algorithm::SfwStochastic | Algorithm::SfwBandit)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(Algorithm::deserialize(toml::Value::String(s.to_owned()))?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label used in reports; defaults to the dataset name.
    #[serde(default)]
    pub name: Option<String>,
    pub algorithm: Algorithm,
    /// A second algorithm run on the same streams and seeds, used as the
    /// baseline for the relative decrease.
    #[serde(default)]
    pub compare_with: Option<Algorithm>,
    /// Rounds; defaults to the stream length for CSV data.
    #[serde(default)]
    pub horizon: Option<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "defaults::noise_halfwidth")]
    pub noise_halfwidth: f64,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub set: Option<SetConfig>,
    #[serde(default)]
    pub olo: OloConfig,
    #[serde(default)]
    pub sfw: SfwConfig,
    #[serde(default)]
    pub boost: BoostConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    /// Learner settings for the `compare_with` run; defaults to `learner`.
    #[serde(default)]
    pub baseline_learner: Option<LearnerConfig>,
    #[serde(default)]
    pub nfkm: NfkmConfig,
    #[serde(default)]
    pub constant: ConstantConfig,
    #[serde(default)]
    pub tune: TuneConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    #[serde(flatten)]
    pub source: DataSource,
    #[serde(default)]
    pub normalization: Normalization,
    /// Interval every label coordinate lies in.
    pub label_range: [f64; 2],
    /// Shift labels (and the label set) so the set is centered at the origin.
    #[serde(default = "defaults::yes")]
    pub center_labels: bool,
    /// Prepend a constant 1 feature.
    #[serde(default = "defaults::yes")]
    pub bias: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        schema: PathBuf,
    },
    Synthetic {
        kind: SyntheticKind,
        #[serde(default)]
        params: SyntheticParams,
        /// Fixed stream for every run seed; by default each run seed draws
        /// its own stream.
        #[serde(default)]
        stream_seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    RealizableLinearMixture,
    FixedQuadratic,
    RandomLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticParams {
    /// Raw feature count (before the bias column).
    #[serde(default = "defaults::feature_dim")]
    pub feature_dim: usize,
    #[serde(default = "defaults::one")]
    pub label_dim: usize,
    /// Weight `α` of the first map in the mixture.
    #[serde(default = "defaults::mixture")]
    pub mixture: f64,
    /// Standard deviation of the generating map entries.
    #[serde(default = "defaults::scale")]
    pub scale: f64,
    /// How the second generating map relates to the first.
    #[serde(default)]
    pub coupling: Coupling,
    /// Half-width of the box each generating map is clipped to.
    #[serde(default = "defaults::clip")]
    pub clip: f64,
    /// Minimizer of the fixed quadratic.
    #[serde(default)]
    pub target: Option<Vec<f64>>,
    /// Mean of the random linear coefficients.
    #[serde(default)]
    pub mean: Option<Vec<f64>>,
    /// Radius of the sphere the random linear coefficients are spread on.
    #[serde(default = "defaults::one_f")]
    pub spread: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Both maps are drawn independently.
    #[default]
    Independent,
    /// The second map negates the first on every feature except the bias,
    /// which makes the mixture non-monotone along the first map.
    Mirrored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Minmax,
    Zscore,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetConfig {
    Ball { dim: usize, radius: f64 },
    Box { dim: usize, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OloName {
    #[default]
    Fpl,
    Ogd,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OloConfig {
    #[serde(default)]
    pub kind: OloName,
    /// FPL perturbation scale `1/ε` or OGD step scale; derived when absent.
    #[serde(default)]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NPolicy {
    /// `round(βD√T/σ)`.
    Auto,
    /// `⌈√T⌉`.
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NChoice {
    Fixed(usize),
    Policy(NPolicy),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaChoice {
    Fixed(f64),
    /// `T^(-1/4)`.
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SfwConfig {
    #[serde(rename = "N", alias = "n", default = "defaults::n_auto")]
    pub n: NChoice,
    #[serde(default = "defaults::delta_auto")]
    pub delta: DeltaChoice,
    #[serde(default = "defaults::n_cap")]
    pub n_cap: usize,
    /// Radius of the uniform ball noise added to exact gradients.
    #[serde(default)]
    pub gradient_noise: f64,
}

impl Default for SfwConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostConfig {
    #[serde(rename = "N", alias = "n", default = "defaults::boost_n")]
    pub n: usize,
    #[serde(default = "defaults::half")]
    pub delta: f64,
    #[serde(default = "defaults::one_f")]
    pub gamma: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerUpdate {
    #[default]
    Exact,
    Fkm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    /// Base rate; the harness divides it by the gradient bound `σ`.
    #[serde(default = "defaults::lr")]
    pub lr: f64,
    /// Decay exponent in `lr·t^(-c)`.
    #[serde(default = "defaults::half")]
    pub c: f64,
    #[serde(default)]
    pub update: LearnerUpdate,
    #[serde(default = "defaults::weight_cap")]
    pub weight_cap: f64,
    /// Defaults to `10·d·M/δ` in bandit modes and unbounded otherwise.
    #[serde(default)]
    pub gradient_cap: Option<f64>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NfkmMode {
    /// One update per round with the mean of `N` estimates.
    #[default]
    Average,
    /// `N` single-estimate updates per round.
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NfkmConfig {
    #[serde(default)]
    pub mode: NfkmMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantConfig {
    /// Prediction in original label units.
    #[serde(default)]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    #[serde(default = "defaults::lr_range")]
    pub lr_range: [f64; 2],
    #[serde(default = "defaults::lr_points")]
    pub lr_points: usize,
    #[serde(default = "defaults::c_grid")]
    pub c: Vec<f64>,
    /// Learner counts; defaults to the configured one.
    #[serde(rename = "N", alias = "n", default)]
    pub n: Vec<usize>,
    /// Smoothing radii; defaults to the configured one.
    #[serde(default)]
    pub delta: Vec<f64>,
    /// Seeds used while tuning; defaults to the run seeds.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    /// Solve for the best fixed comparator and report regret.
    #[serde(default = "defaults::yes")]
    pub regret: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

mod defaults {
    use super::{AutoTag, DeltaChoice, NChoice, NPolicy};

    pub fn noise_halfwidth() -> f64 {
        0.1
    }
    pub fn yes() -> bool {
        true
    }
    pub fn one() -> usize {
        1
    }
    pub fn one_f() -> f64 {
        1.0
    }
    pub fn half() -> f64 {
        0.5
    }
    pub fn feature_dim() -> usize {
        4
    }
    pub fn mixture() -> f64 {
        0.5
    }
    pub fn scale() -> f64 {
        2.0
    }
    pub fn clip() -> f64 {
        0.5
    }
    pub fn n_auto() -> NChoice {
        NChoice::Policy(NPolicy::Auto)
    }
    pub fn delta_auto() -> DeltaChoice {
        DeltaChoice::Auto(AutoTag::Auto)
    }
    pub fn n_cap() -> usize {
        fwboost::sfw::DEFAULT_N_CAP
    }
    pub fn boost_n() -> usize {
        10
    }
    pub fn lr() -> f64 {
        0.05
    }
    pub fn weight_cap() -> f64 {
        fwboost::boosting::LinearWeakLearner::DEFAULT_WEIGHT_CAP
    }
    pub fn lr_range() -> [f64; 2] {
        [1e-4, 0.1]
    }
    pub fn lr_points() -> usize {
        7
    }
    pub fn c_grid() -> Vec<f64> {
        vec![0.25, 0.5, 0.75, 1.0]
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative dataset paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg =
            Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let DataSource::Csv { path: data, schema } = &mut cfg.dataset.source {
            let base = path.parent().unwrap_or(Path::new("."));
            for p in [data, schema] {
                if p.is_relative() && !p.exists() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// The config the `compare_with` baseline runs under.
    pub fn baseline_config(&self) -> ExperimentConfig {
        let mut cfg = self.clone();
        if let Some(l) = self.baseline_learner {
            cfg.learner = l;
        }
        cfg
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.dataset.name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("seeds must be nonempty");
        }
        if self.horizon == Some(0) {
            bail!("horizon must be positive");
        }
        if !(self.noise_halfwidth.is_finite() && self.noise_halfwidth >= 0.0) {
            bail!("noise_halfwidth must be a nonnegative number");
        }
        let [lo, hi] = self.dataset.label_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            bail!("dataset.label_range must be an increasing pair, got [{lo}, {hi}]");
        }
        if let DataSource::Synthetic { params, .. } = &self.dataset.source {
            if params.feature_dim == 0 || params.label_dim == 0 {
                bail!("synthetic feature_dim and label_dim must be positive");
            }
            if !(0.0..=1.0).contains(&params.mixture) {
                bail!("dataset.params.mixture must lie in [0, 1]");
            }
            if self.horizon.is_none() {
                bail!("synthetic datasets need an explicit horizon");
            }
        }
        if self.boost.n == 0 {
            bail!("boost.N must be positive");
        }
        if !(self.boost.delta.is_finite() && self.boost.delta > 0.0) {
            bail!("boost.delta must be positive");
        }
        for l in std::iter::once(&self.learner).chain(&self.baseline_learner) {
            if !(l.lr > 0.0 && l.c >= 0.0) {
                bail!("learner.lr must be positive and learner.c nonnegative");
            }
        }
        if let NChoice::Fixed(0) = self.sfw.n {
            bail!("sfw.N must be positive");
        }
        if let DeltaChoice::Fixed(d) = self.sfw.delta {
            if !(d.is_finite() && d > 0.0) {
                bail!("sfw.delta must be positive");
            }
        }
        if self.compare_with == Some(self.algorithm) {
            bail!("compare_with names the algorithm itself");
        }
        if !(self.tune.lr_range[0] > 0.0 && self.tune.lr_range[0] <= self.tune.lr_range[1]) {
            bail!("tune.lr_range must be a positive increasing pair");
        }
        Ok(())
    }
}
