//! Mission configuration: every tunable of a run in one JSON document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapters::{AdapterConfig, LookupTable};
use crate::dynamics::DynamicsConfig;
use crate::energy::PowerModel;
use crate::error::{Error, Result};
use crate::pipeline::TimingModel;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionConfig {
    pub adapter: AdapterConfig,
    pub timing: TimingModel,
    pub power: PowerModel,
    pub dynamics: DynamicsConfig,
    /// Lookup table for the lookup-table mode; derived from the sensor's
    /// pixel capacity when absent.
    pub lookup: Option<LookupTable>,
    /// Simulated-time limit (s); ten times the straight-line flight time at
    /// 0.5 m/s when absent.
    pub timeout: Option<f64>,
}

impl MissionConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.adapter.validate()?;
        self.timing.validate()?;
        self.power.validate()?;
        self.dynamics.validate()?;
        if let Some(t) = self.timeout {
            if !(t > 0.0) {
                return Err(Error::Config("timeout must be positive".into()));
            }
        }
        Ok(())
    }

    /// The lookup table in effect for a sensor of `pixel_capacity`.
    pub fn lookup_table(&self, pixel_capacity: u32) -> LookupTable {
        self.lookup
            .clone()
            .unwrap_or_else(|| LookupTable::default_for(pixel_capacity))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = MissionConfig::default();
        cfg.validate().unwrap();
        assert_eq!(MissionConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg =
            MissionConfig::from_json(r#"{"adapter": {"alpha": 4.0}, "timeout": 30}"#).unwrap();
        assert_eq!(cfg.adapter.alpha, 4.0);
        assert_eq!(cfg.adapter.phi, 0.6);
        assert_eq!(cfg.timeout, Some(30.0));
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(MissionConfig::from_json(r#"{"adaptr": {}}"#).is_err());
        assert!(MissionConfig::from_json(r#"{"adapter": {"lambda": 1.0}}"#).is_err());
        assert!(MissionConfig::from_json(r#"{"timeout": 0}"#).is_err());
    }
}
