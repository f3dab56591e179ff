use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Objective;
use crate::levels::LevelHierarchy;
use crate::models::{FaultyModel, Model, SurrogateModel, SurrogateParams, SyntheticModel};
use crate::scheduler::SampleKey;

/// Campaign configuration, read from sectioned TOML.
///
/// ```toml
/// [campaign]
/// id = "demo"
/// seed = 7
///
/// [mode]
/// tolerance = 0.05
///
/// [hierarchy]
/// finest_level = 3
///
/// [model]
/// kind = "synthetic"
///
/// [model.params]
/// decay = 1.0
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub campaign: CampaignSection,
    pub mode: ModeSection,
    pub hierarchy: HierarchySection,
    pub model: ModelSection,
    #[serde(default)]
    pub statistics: StatisticsSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    pub id: String,
    pub seed: u64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Scalar output steering the campaign; the model's first output when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qoi: Option<String>,
    #[serde(default)]
    pub coefficients: CoefficientMode,
    #[serde(default = "default_true")]
    pub decay_fit: bool,
    /// Kurtosis inflation factor `s`, in standard deviations of the variance estimate.
    #[serde(default)]
    pub confidence_sigmas: f64,
    #[serde(default = "default_one")]
    pub workers: usize,
    #[serde(default = "default_one")]
    pub batch_size: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientMode {
    /// Optimal control-variate coefficients.
    #[default]
    Optimal,
    /// `alpha = 1` everywhere: standard multi-level Monte Carlo.
    Unit,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchySection {
    pub finest_level: usize,
    /// Work of level 0 for the synthetic model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_work: Option<f64>,
    /// Work growth exponent per level for the synthetic model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub work_rate: Option<f64>,
    /// Explicit per-level work, overriding the model's nominal work.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub work: Option<Vec<f64>>,
    /// Resolution handed to the model on each level; `0..=L` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Vec<i32>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Synthetic,
    Surrogate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default)]
    pub failure_rate: f64,
    /// `[level, index]` pairs that always fail.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fail_samples: Vec<[u64; 2]>,
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticsSection {
    #[serde(default = "default_products")]
    pub products: Vec<String>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Gaussian smoothing width of the mean time series, in grid points.
    #[serde(default = "default_smoothing")]
    pub smoothing_width: f64,
}

impl Default for StatisticsSection {
    fn default() -> Self {
        Self {
            products: default_products(),
            grid_points: default_grid_points(),
            smoothing_width: default_smoothing(),
        }
    }
}

/// Parameters of the synthetic model under `[model.params]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub decay: f64,
    pub amplitude: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            decay: 1.0,
            amplitude: 1.0,
        }
    }
}

/// Statistics products understood by the report generator.
pub const PRODUCTS: [&str; 6] = ["bands", "pdf", "joint", "correlation", "smoothing", "speedup"];

fn default_max_iterations() -> usize {
    10
}
fn default_true() -> bool {
    true
}
fn default_one() -> usize {
    1
}
fn default_products() -> Vec<String> {
    PRODUCTS.iter().map(|s| s.to_string()).collect()
}
fn default_grid_points() -> usize {
    128
}
fn default_smoothing() -> f64 {
    2.0
}

impl CampaignConfig {
    /// Parse and validate configuration text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Value = text
            .parse::<toml::Table>()
            .map(toml::Value::Table)
            .map_err(|e| Error::config("<syntax>", e.message().to_string()))?;
        let config: Self = deserialize_at(value, "")?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    /// Synthetic-model campaign with defaults everywhere else.
    pub fn synthetic(
        id: &str,
        seed: u64,
        finest_level: usize,
        decay: f64,
        amplitude: f64,
        objective: Objective,
    ) -> Self {
        let mut params = toml::Table::new();
        params.insert("decay".into(), decay.into());
        params.insert("amplitude".into(), amplitude.into());
        let mut config = Self {
            campaign: CampaignSection {
                id: id.to_string(),
                seed,
                max_iterations: default_max_iterations(),
                qoi: None,
                coefficients: CoefficientMode::Optimal,
                decay_fit: true,
                confidence_sigmas: 0.0,
                workers: 1,
                batch_size: 1,
            },
            mode: ModeSection::default(),
            hierarchy: HierarchySection {
                finest_level,
                base_work: None,
                work_rate: None,
                work: None,
                resolution: None,
            },
            model: ModelSection {
                kind: ModelKind::Synthetic,
                failure_rate: 0.0,
                fail_samples: Vec::new(),
                params,
            },
            statistics: StatisticsSection::default(),
        };
        config.set_objective(objective);
        config
    }

    pub fn objective(&self) -> Objective {
        match (self.mode.tolerance, self.mode.budget) {
            (Some(t), _) => Objective::Tolerance(t),
            (None, Some(b)) => Objective::Budget(b),
            (None, None) => Objective::Tolerance(f64::NAN),
        }
    }

    pub fn set_objective(&mut self, objective: Objective) {
        self.mode = match objective {
            Objective::Tolerance(t) => ModeSection {
                tolerance: Some(t),
                budget: None,
            },
            Objective::Budget(b) => ModeSection {
                tolerance: None,
                budget: Some(b),
            },
        };
    }

    pub fn num_levels(&self) -> usize {
        self.hierarchy.finest_level + 1
    }

    /// Check every semantic constraint, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let c = &self.campaign;
        if c.id.is_empty()
            || !c
                .id
                .chars()
                .all(|ch| ch.is_ascii_alphanumeric() || matches!(ch, '-' | '_' | '.'))
        {
            return Err(Error::config("campaign.id", "use letters, digits, `-`, `_` or `.`"));
        }
        if c.max_iterations == 0 {
            return Err(Error::config("campaign.max_iterations", "must be at least 1"));
        }
        if !(c.confidence_sigmas >= 0.0) || !c.confidence_sigmas.is_finite() {
            return Err(Error::config(
                "campaign.confidence_sigmas",
                "must be finite and non-negative",
            ));
        }
        if c.workers == 0 {
            return Err(Error::config("campaign.workers", "must be at least 1"));
        }
        if c.batch_size == 0 {
            return Err(Error::config("campaign.batch_size", "must be at least 1"));
        }
        match (self.mode.tolerance, self.mode.budget) {
            (Some(_), Some(_)) => return Err(Error::config("mode", "set exactly one of `tolerance` and `budget`")),
            (None, None) => return Err(Error::config("mode", "set one of `tolerance` or `budget`")),
            (Some(t), None) if !(t > 0.0 && t.is_finite()) => {
                return Err(Error::config("mode.tolerance", "must be positive and finite"))
            }
            (None, Some(b)) if !(b > 0.0 && b.is_finite()) => {
                return Err(Error::config("mode.budget", "must be positive and finite"))
            }
            _ => {}
        }
        let n = self.num_levels();
        let h = &self.hierarchy;
        if let Some(w) = &h.work {
            if w.len() != n {
                return Err(Error::config(
                    "hierarchy.work",
                    format!("expected {n} entries, got {}", w.len()),
                ));
            }
        }
        if let Some(r) = &h.resolution {
            if r.len() != n {
                return Err(Error::config(
                    "hierarchy.resolution",
                    format!("expected {n} entries, got {}", r.len()),
                ));
            }
            if r.windows(2).any(|p| p[1] <= p[0]) {
                return Err(Error::config("hierarchy.resolution", "must be strictly increasing"));
            }
        }
        if self.model.kind == ModelKind::Surrogate {
            for (key, v) in [
                ("hierarchy.base_work", h.base_work),
                ("hierarchy.work_rate", h.work_rate),
            ] {
                if v.is_some() {
                    return Err(Error::config(
                        key,
                        "only used by the synthetic model; set `hierarchy.work` instead",
                    ));
                }
            }
        }
        if let Some(b) = h.base_work {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::config("hierarchy.base_work", "must be positive and finite"));
            }
        }
        if let Some(r) = h.work_rate {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::config("hierarchy.work_rate", "must be positive and finite"));
            }
        }
        let m = &self.model;
        if !(0.0..=1.0).contains(&m.failure_rate) {
            return Err(Error::config("model.failure_rate", "must lie in [0, 1]"));
        }
        if let Some([l, _]) = m.fail_samples.iter().find(|[l, _]| *l as usize >= n) {
            return Err(Error::config(
                "model.fail_samples",
                format!("level {l} exceeds the finest level {}", n - 1),
            ));
        }
        for p in &self.statistics.products {
            if !PRODUCTS.contains(&p.as_str()) {
                return Err(Error::config(
                    "statistics.products",
                    format!("unknown product `{p}` (known: {})", PRODUCTS.join(", ")),
                ));
            }
        }
        if self.statistics.grid_points < 8 {
            return Err(Error::config("statistics.grid_points", "must be at least 8"));
        }
        if !(self.statistics.smoothing_width >= 0.0) {
            return Err(Error::config("statistics.smoothing_width", "must be non-negative"));
        }

        let model = self.build_model()?;
        if let Some(q) = &c.qoi {
            let names = model.qoi_names();
            if !names.contains(q) {
                return Err(Error::config(
                    "campaign.qoi",
                    format!("unknown output `{q}` (available: {})", names.join(", ")),
                ));
            }
        }
        let hierarchy = self.build_hierarchy(model.as_ref())?;
        if let Objective::Budget(b) = self.objective() {
            let minimum: f64 = hierarchy.term_costs().iter().sum();
            if b < minimum {
                return Err(Error::Budget { given: b, minimum });
            }
        }
        Ok(())
    }

    /// Instantiate the configured model, wrapped for fault injection when requested.
    pub fn build_model(&self) -> Result<Box<dyn Model>> {
        let inner: Box<dyn Model> = match self.model.kind {
            ModelKind::Synthetic => {
                let p: SyntheticParams = deserialize_at(toml::Value::Table(self.model.params.clone()), "model.params")?;
                if !(p.decay > 0.0) {
                    return Err(Error::config("model.params.decay", "must be positive"));
                }
                let base = self.hierarchy.base_work.unwrap_or(1.0);
                let rate = self.hierarchy.work_rate.unwrap_or(4.0);
                Box::new(SyntheticModel::new(p.decay, p.amplitude).with_work(base, rate))
            }
            ModelKind::Surrogate => {
                let p: SurrogateParams = deserialize_at(toml::Value::Table(self.model.params.clone()), "model.params")?;
                p.validate().map_err(|e| Error::config("model.params", e.to_string()))?;
                Box::new(SurrogateModel::new(p)?)
            }
        };
        if self.model.failure_rate == 0.0 && self.model.fail_samples.is_empty() {
            return Ok(inner);
        }
        let mut faulty = FaultyModel::new(inner, self.model.failure_rate)?;
        for [l, i] in &self.model.fail_samples {
            faulty = faulty.fail_stream(SampleKey::new(*l as usize, *i).stream(self.campaign.seed).id());
        }
        Ok(Box::new(faulty))
    }

    /// Level hierarchy: explicit `hierarchy.work` if given, else the model's
    /// nominal work at each level's resolution.
    pub fn build_hierarchy(&self, model: &dyn Model) -> Result<LevelHierarchy> {
        let n = self.num_levels();
        let resolution = self
            .hierarchy
            .resolution
            .clone()
            .unwrap_or_else(|| (0..n as i32).collect());
        let work = match &self.hierarchy.work {
            Some(w) => w.clone(),
            None => resolution
                .iter()
                .map(|&r| {
                    model.nominal_work(r).ok_or_else(|| {
                        Error::config(
                            "hierarchy.work",
                            "the model reports no nominal work; list it explicitly",
                        )
                    })
                })
                .collect::<Result<_>>()?,
        };
        LevelHierarchy::from_work(work)
            .and_then(|h| h.with_resolution(resolution))
            .map_err(|e| Error::config("hierarchy", e.to_string()))
    }

    /// Name of the steering output.
    pub fn qoi(&self, model: &dyn Model) -> String {
        self.campaign
            .qoi
            .clone()
            .or_else(|| model.qoi_names().into_iter().next())
            .unwrap_or_default()
    }
}

fn deserialize_at<T: DeserializeOwned>(value: toml::Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        let mut key = join_key(prefix, if path == "." { "" } else { &path });
        if let Some(field) = message
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
        {
            key = join_key(&key, field);
        }
        if key.is_empty() {
            key = "<root>".into();
        }
        Error::config(key, message)
    })
}

fn join_key(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a}.{b}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[campaign]
id = "t"
seed = 3

[mode]
tolerance = 0.1

[hierarchy]
finest_level = 2

[model]
kind = "synthetic"
"#;

    fn key_of(text: &str) -> String {
        match CampaignConfig::from_toml_str(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = CampaignConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.campaign.max_iterations, 10);
        assert!(c.campaign.decay_fit);
        assert_eq!(c.objective(), Objective::Tolerance(0.1));
        let model = c.build_model().unwrap();
        let h = c.build_hierarchy(model.as_ref()).unwrap();
        assert_eq!(h.work(), &[1.0, 16.0, 256.0]);
        assert_eq!(c.qoi(model.as_ref()), "q");
    }

    #[test]
    fn round_trips_through_toml() {
        let c = CampaignConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(CampaignConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(&MINIMAL.replace("seed = 3\n", "")), "campaign.seed");
        assert_eq!(
            key_of(&MINIMAL.replace("tolerance = 0.1", "tolerance = -1.0")),
            "mode.tolerance"
        );
        assert_eq!(
            key_of(&MINIMAL.replace("tolerance = 0.1", "tolerance = \"x\"")),
            "mode.tolerance"
        );
        assert_eq!(
            key_of(&MINIMAL.replace("finest_level = 2", "finest_level = 2\nlevles = 3")),
            "hierarchy.levles"
        );
        assert_eq!(
            key_of(&format!("{MINIMAL}\n[model.params]\ndecay = \"fast\"\n")),
            "model.params.decay"
        );
        assert_eq!(
            key_of(&MINIMAL.replace("[mode]\ntolerance = 0.1", "[mode]\ntolerance = 0.1\nbudget = 5.0")),
            "mode"
        );
        assert_eq!(key_of("[campaign\n"), "<syntax>");
    }

    #[test]
    fn budget_below_minimum_is_rejected() {
        let text = MINIMAL.replace("tolerance = 0.1", "budget = 10.0");
        match CampaignConfig::from_toml_str(&text) {
            Err(Error::Budget { minimum, .. }) => assert_eq!(minimum, 1.0 + 17.0 + 272.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fault_injection_wraps_the_model() {
        let text = MINIMAL.replace("kind = \"synthetic\"", "kind = \"synthetic\"\nfail_samples = [[0, 1]]");
        let c = CampaignConfig::from_toml_str(&text).unwrap();
        let m = c.build_model().unwrap();
        let s = SampleKey::new(0, 1).stream(3);
        assert!(m.evaluate(&s, 0).is_err());
        assert!(m.evaluate(&SampleKey::new(0, 2).stream(3), 0).is_ok());
    }
}
