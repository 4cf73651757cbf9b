//! Flight and compute energy accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parametric power draw: flight `c0 + c1 v + c2 v^3`, compute two-level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerModel {
    /// Hover power (W).
    pub c0: f64,
    /// Linear speed term (W s/m).
    pub c1: f64,
    /// Cubic speed term (W s^3/m^3).
    pub c2: f64,
    /// Compute power while idle (W).
    pub p_idle: f64,
    /// Additional compute power while the pipeline is busy (W).
    pub p_active: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            c0: 100.0,
            c1: 5.0,
            c2: 1.0,
            p_idle: 5.0,
            p_active: 10.0,
        }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        if [self.c1, self.c2, self.p_idle, self.p_active]
            .iter()
            .any(|&c| !(c >= 0.0))
            || !(self.c0 > 0.0)
        {
            return Err(Error::Config(
                "power coefficients must be non-negative with c0 > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn flight_power(&self, speed: f64) -> f64 {
        self.c0 + self.c1 * speed + self.c2 * speed.powi(3)
    }

    pub fn compute_power(&self, busy: bool) -> f64 {
        self.p_idle + if busy { self.p_active } else { 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub flight_j: f64,
    pub compute_j: f64,
}

impl EnergyLedger {
    pub fn total(&self) -> f64 {
        self.flight_j + self.compute_j
    }

    /// Adds `dt` seconds at `speed`, with the pipeline busy or idle.
    pub fn accrue(&mut self, model: &PowerModel, speed: f64, busy: bool, dt: f64) {
        debug_assert!(dt >= 0.0);
        self.flight_j += model.flight_power(speed) * dt;
        self.compute_j += model.compute_power(busy) * dt;
    }

    /// Accrues a step of which `busy_fraction` was spent computing.
    pub fn accrue_split(&mut self, model: &PowerModel, speed: f64, busy_fraction: f64, dt: f64) {
        let busy_dt = dt * busy_fraction.clamp(0.0, 1.0);
        if busy_dt > 0.0 {
            self.accrue(model, speed, true, busy_dt);
        }
        if dt - busy_dt > 0.0 {
            self.accrue(model, speed, false, dt - busy_dt);
        }
    }

    /// Compute energy expressed as the distance the same energy would fly
    /// at `cruise_speed`.
    pub fn compute_as_flight_meters(&self, model: &PowerModel, cruise_speed: f64) -> f64 {
        self.compute_j / model.flight_power(cruise_speed) * cruise_speed
    }
}

/// Each ledger's total as a percentage of the baseline's total.
pub fn normalize(baseline: Option<&EnergyLedger>, ledgers: &[EnergyLedger]) -> Result<Vec<f64>> {
    let base = baseline
        .map(EnergyLedger::total)
        .filter(|&t| t > 0.0)
        .ok_or(Error::MissingBaseline)?;
    Ok(ledgers.iter().map(|l| l.total() / base * 100.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accrue_examples() {
        let m = PowerModel {
            c0: 100.0,
            c1: 0.0,
            c2: 0.0,
            p_idle: 5.0,
            p_active: 10.0,
        };
        let mut l = EnergyLedger::default();
        l.accrue(&m, 0.0, false, 1.0);
        assert_eq!((l.flight_j, l.compute_j), (100.0, 5.0));

        let m = PowerModel {
            c0: 100.0,
            c1: 5.0,
            c2: 1.0,
            ..m
        };
        let mut l = EnergyLedger::default();
        l.accrue(&m, 2.0, false, 1.0);
        assert_eq!(l.flight_j, 118.0);
    }

    #[test]
    fn half_steps_add_up() {
        let m = PowerModel::default();
        let mut a = EnergyLedger::default();
        let mut b = EnergyLedger::default();
        a.accrue(&m, 1.7, true, 0.02);
        b.accrue(&m, 1.7, true, 0.01);
        b.accrue(&m, 1.7, true, 0.01);
        assert!((a.total() - b.total()).abs() < 1e-12);
    }

    #[test]
    fn normalize_examples() {
        let base = EnergyLedger {
            flight_j: 900.0,
            compute_j: 100.0,
        };
        let half = EnergyLedger {
            flight_j: 450.0,
            compute_j: 50.0,
        };
        let other = EnergyLedger {
            flight_j: 300.0,
            compute_j: 123.0,
        };
        let pct = normalize(Some(&base), &[base, half, other]).unwrap();
        assert_eq!(pct[0], 100.0);
        assert_eq!(pct[1], 50.0);
        assert!((pct[2] - 42.3).abs() < 1e-12);
        assert!(matches!(
            normalize(None, &[half]),
            Err(Error::MissingBaseline)
        ));
    }

    #[test]
    fn flight_power_increases_with_speed() {
        let m = PowerModel::default();
        let mut prev = m.flight_power(0.0);
        for i in 1..50 {
            let p = m.flight_power(i as f64 * 0.1);
            assert!(p > prev);
            prev = p;
        }
    }
}
