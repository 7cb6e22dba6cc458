//! Run configuration: programmatic defaults, JSON config files and merging.

use std::str::FromStr;

use serde::Deserialize;
use turbo_filter::ssm::AgentParams;

use crate::BenchError;

/// Which filter a benchmark entry runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Ekf,
    Mpf,
    Tf1,
    Tf2,
    Pf,
}

impl FilterKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterKind::Ekf => "ekf",
            FilterKind::Mpf => "mpf",
            FilterKind::Tf1 => "tf1",
            FilterKind::Tf2 => "tf2",
            FilterKind::Pf => "pf",
        }
    }

    pub fn uses_particles(&self) -> bool {
        !matches!(self, FilterKind::Ekf)
    }
}

impl FromStr for FilterKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ekf" => Ok(FilterKind::Ekf),
            "mpf" => Ok(FilterKind::Mpf),
            "tf1" => Ok(FilterKind::Tf1),
            "tf2" => Ok(FilterKind::Tf2),
            "pf" => Ok(FilterKind::Pf),
            other => Err(BenchError::Config(format!(
                "unknown filter '{other}' (expected ekf|mpf|tf1|tf2|pf)"
            ))),
        }
    }
}

impl std::fmt::Display for FilterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One benchmark entry: filter, sizes, seeding and model parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub filter: FilterKind,
    pub n_p: usize,
    pub n_it: usize,
    pub t_steps: usize,
    pub n_runs: usize,
    pub base_seed: u64,
    pub params: AgentParams,
    /// Include the determinant factors in the turbo-filter particle weights.
    pub det_factors: bool,
    /// Distribute Monte Carlo runs over a thread pool. Per-run seeds make the
    /// RMSE columns independent of the thread count; timings are cleanest
    /// when this is off.
    pub parallel: bool,
}

impl RunConfig {
    pub fn new(filter: FilterKind) -> Self {
        Self {
            filter,
            n_p: 100,
            n_it: 1,
            t_steps: 300,
            n_runs: 50,
            base_seed: 1,
            params: AgentParams::paper(),
            det_factors: false,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.n_runs == 0 {
            return Err(BenchError::Config("n_runs must be at least 1".to_string()));
        }
        if self.t_steps == 0 {
            return Err(BenchError::Config("t_steps must be at least 1".to_string()));
        }
        if self.filter.uses_particles() && self.n_p == 0 {
            return Err(BenchError::Config(format!(
                "filter '{}' needs n_p >= 1",
                self.filter
            )));
        }
        if matches!(self.filter, FilterKind::Tf1 | FilterKind::Tf2) && self.n_it == 0 {
            return Err(BenchError::Config("turbo filters need n_it >= 1".to_string()));
        }
        Ok(())
    }
}

/// Flat JSON config file mirroring [`RunConfig`]; every field optional, CLI
/// flags take precedence over file values.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub filter: Option<String>,
    pub n_p: Option<usize>,
    pub n_it: Option<usize>,
    pub t_steps: Option<usize>,
    pub n_runs: Option<usize>,
    pub base_seed: Option<u64>,
    pub det_factors: Option<bool>,
    pub parallel: Option<bool>,
    pub sweep_np: Option<Vec<usize>>,
    pub out: Option<String>,
    pub format: Option<String>,
    pub rho: Option<f64>,
    pub t_s: Option<f64>,
    pub sigma_p: Option<f64>,
    pub sigma_ep: Option<f64>,
    pub sigma_ev: Option<f64>,
    pub a0: Option<f64>,
    pub d0: Option<f64>,
    pub a0_tilde: Option<f64>,
    pub v0: Option<f64>,
    pub p_init: Option<[f64; 2]>,
    pub v_init: Option<[f64; 2]>,
    pub init_cov_scale: Option<f64>,
}

impl FileConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Config(format!("config file: {e}")))
    }

    /// Overwrites the model parameters with any values present in the file.
    pub fn apply_params(&self, params: &mut AgentParams) {
        if let Some(v) = self.rho {
            params.rho = v;
        }
        if let Some(v) = self.t_s {
            params.t_s = v;
        }
        if let Some(v) = self.sigma_p {
            params.sigma_p = v;
        }
        if let Some(v) = self.sigma_ep {
            params.sigma_ep = v;
        }
        if let Some(v) = self.sigma_ev {
            params.sigma_ev = v;
        }
        if let Some(v) = self.a0 {
            params.a0 = v;
        }
        if let Some(v) = self.d0 {
            params.d0 = v;
        }
        if let Some(v) = self.a0_tilde {
            params.a0_tilde = v;
        }
        if let Some(v) = self.v0 {
            params.v0 = v;
        }
        if let Some(v) = self.p_init {
            params.p_init = v;
        }
        if let Some(v) = self.v_init {
            params.v_init = v;
        }
        if let Some(v) = self.init_cov_scale {
            params.init_cov_scale = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_kind_round_trip() {
        for name in ["ekf", "mpf", "tf1", "tf2", "pf"] {
            assert_eq!(FilterKind::from_str(name).unwrap().as_str(), name);
        }
        assert!(FilterKind::from_str("ukf").is_err());
    }

    #[test]
    fn validation_rules() {
        let mut cfg = RunConfig::new(FilterKind::Tf1);
        assert!(cfg.validate().is_ok());
        cfg.n_p = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::new(FilterKind::Ekf);
        cfg.n_p = 0;
        assert!(cfg.validate().is_ok());
        cfg.n_runs = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn file_config_parses_and_applies() {
        let file = FileConfig::from_json(
            r#"{"filter": "mpf", "n_p": 25, "rho": 0.95, "p_init": [1.0, 2.0]}"#,
        )
        .unwrap();
        assert_eq!(file.filter.as_deref(), Some("mpf"));
        assert_eq!(file.n_p, Some(25));
        let mut params = AgentParams::paper();
        file.apply_params(&mut params);
        assert_eq!(params.rho, 0.95);
        assert_eq!(params.p_init, [1.0, 2.0]);
        assert_eq!(params.v_init, [4.0, 4.0]);
    }

    #[test]
    fn file_config_rejects_unknown_fields() {
        assert!(FileConfig::from_json(r#"{"particles": 10}"#).is_err());
    }
}
