//! Experiment configuration: one TOML file plus command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use mgrl_core::data::SynthKnobs;
use mgrl_core::learner::config_hash;
use mgrl_core::metrics::PAggregation;
use mgrl_core::{BatteryModel, LearnerConfig, MdpConfig, Method};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Where the exogenous series come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset directory; synthetic data is generated when absent.
    pub dir: Option<PathBuf>,
    pub synth_seed: u64,
    /// Years of synthetic data; the last `test_years` are held out.
    pub years: usize,
    pub test_years: usize,
    /// Synthetic profiles held out for evaluation.
    pub n_validation: usize,
    pub split_seed: u64,
    pub synth: SynthKnobs,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dir: None,
            synth_seed: 0,
            years: 5,
            test_years: 1,
            n_validation: 12,
            split_seed: 0,
            synth: SynthKnobs::default(),
        }
    }
}

/// Grids of the three sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub alpha: Vec<f64>,
    pub replacement: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alpha: vec![0.1, 0.5, 1.0, 1.5, 2.0],
            replacement: vec![200.0, 1000.0, 3000.0, 5000.0, 10000.0],
            lambda: vec![0.0, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapConfig {
    pub action_bins: usize,
    pub demand_bins: usize,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            action_bins: 21,
            demand_bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seed of every learner; data seeds live under `data`.
    pub seed: u64,
    pub out: PathBuf,
    pub methods: Vec<String>,
    /// Method the gap series are taken against.
    pub baseline: String,
    /// Method tested against all others.
    pub reference: String,
    pub p_aggregation: PAggregation,
    /// Multiplier on buying and selling prices, in training and testing.
    pub price_scale: f64,
    /// Ambient temperature seen by the ablated learners during training [°C].
    pub fixed_temperature: f64,
    pub data: DataConfig,
    pub battery: BatteryModel,
    pub mdp: MdpConfig,
    pub learner: LearnerConfig,
    pub sweep: SweepConfig,
    pub heatmap: HeatmapConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("runs/default"),
            methods: Method::roster().iter().map(|m| m.to_string()).collect(),
            baseline: "50-50".into(),
            reference: "rl".into(),
            p_aggregation: PAggregation::Max,
            price_scale: 1.0,
            fixed_temperature: 25.0,
            data: DataConfig::default(),
            battery: BatteryModel::default(),
            mdp: MdpConfig::default(),
            learner: LearnerConfig::default(),
            sweep: SweepConfig::default(),
            heatmap: HeatmapConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub methods: Option<Vec<String>>,
}

/// Training-relevant part of the configuration, stored in checkpoints.
#[derive(Debug, Clone, Serialize)]
pub struct TrainingIdentity<'a> {
    pub method: String,
    pub price_scale: f64,
    pub fixed_temperature: f64,
    pub data: &'a DataConfig,
    pub battery: &'a BatteryModel,
    pub mdp: &'a MdpConfig,
    pub learner: &'a LearnerConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::user(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::user(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// File (or defaults) with overrides applied and checked.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &overrides.out {
            cfg.out = out.clone();
        }
        if let Some(methods) = &overrides.methods {
            cfg.methods = methods.clone();
        }
        cfg.learner.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.parsed_methods()?;
        for name in [&self.baseline, &self.reference] {
            name.parse::<Method>()?;
        }
        if !(self.price_scale > 0.0 && self.price_scale.is_finite()) {
            return Err(CliError::user("price_scale must be positive"));
        }
        if !self.fixed_temperature.is_finite() {
            return Err(CliError::user("fixed_temperature must be finite"));
        }
        if let Some(dir) = &self.data.dir {
            if !dir.is_dir() {
                return Err(CliError::user(format!("data directory {} does not exist", dir.display())));
            }
        } else {
            self.data.synth.validate()?;
            if self.data.years <= self.data.test_years {
                return Err(CliError::user("need more data years than test years"));
            }
        }
        if self.data.test_years == 0 {
            return Err(CliError::user("test_years must be at least one"));
        }
        if self.heatmap.action_bins == 0 || self.heatmap.demand_bins == 0 {
            return Err(CliError::user("heatmap needs at least one bin per axis"));
        }
        self.battery.validate()?;
        self.mdp.validate()?;
        self.learner.validate()?;
        Ok(())
    }

    pub fn parsed_methods(&self) -> CliResult<Vec<Method>> {
        if self.methods.is_empty() {
            return Err(CliError::user("method list is empty"));
        }
        let mut out: Vec<Method> = Vec::new();
        for name in &self.methods {
            let m: Method = name.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }

    pub fn training_identity(&self, method: Method) -> TrainingIdentity<'_> {
        TrainingIdentity {
            method: method.to_string(),
            price_scale: self.price_scale,
            fixed_temperature: self.fixed_temperature,
            data: &self.data,
            battery: &self.battery,
            mdp: &self.mdp,
            learner: &self.learner,
        }
    }

    /// Hash identifying the experiment an output directory belongs to. The
    /// output path, the method selection and the reporting choices do not
    /// enter it.
    pub fn experiment_hash(&self) -> CliResult<String> {
        let mut v = serde_json::to_value(self).map_err(|e| CliError::internal(e.to_string()))?;
        if let Some(map) = v.as_object_mut() {
            for key in ["out", "methods", "baseline", "reference", "p_aggregation"] {
                map.remove(key);
            }
        }
        Ok(config_hash(&v)?)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::internal(format!("cannot render config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text, "mem").unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "seed = 4\n[mdp]\nlambda = 0.5\n[battery]\nkind = \"thevenin\"\nr0 = 0.05\n",
            "mem",
        )
        .unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.mdp.lambda, 0.5);
        assert_eq!(cfg.mdp.horizon, MdpConfig::default().horizon);
        match cfg.battery {
            BatteryModel::Thevenin(p) => assert_eq!(p.r0, 0.05),
            other => panic!("unexpected model {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_user_errors() {
        let err = ExperimentConfig::from_toml("sede = 4\n", "mem").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = ExperimentConfig::from_toml("[mdp]\nlamda = 1.0\n", "mem").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "seed = 1\nmethods = [\"og\"]\n").unwrap();
        let o = Overrides {
            seed: Some(9),
            out: Some(dir.path().join("x")),
            methods: Some(vec!["bf".into(), "50-50".into()]),
        };
        let cfg = ExperimentConfig::resolve(Some(&path), &o).unwrap();
        assert_eq!((cfg.seed, cfg.learner.seed), (9, 9));
        assert_eq!(cfg.methods, vec!["bf", "50-50"]);
    }

    #[test]
    fn hash_ignores_output_and_methods() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            out: "elsewhere".into(),
            methods: vec!["og".into()],
            ..a.clone()
        };
        assert_eq!(a.experiment_hash().unwrap(), b.experiment_hash().unwrap());
        let c = ExperimentConfig { seed: 1, ..a.clone() };
        assert_ne!(a.experiment_hash().unwrap(), c.experiment_hash().unwrap());
    }

    #[test]
    fn bad_method_is_rejected() {
        let cfg = ExperimentConfig {
            methods: vec!["30-30".into()],
            ..ExperimentConfig::default()
        };
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }
}
