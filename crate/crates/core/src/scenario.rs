//! Contamination event and run configuration.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::behavior::{DoseModel, SuspensionTable};
use crate::engine::ModelLevel;
use crate::SECONDS_PER_DAY;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("value of `{key}` out of range: {reason}")]
    OutOfRange { key: String, reason: String },
}

impl ScenarioError {
    pub fn out_of_range(key: &str, reason: impl Into<String>) -> Self {
        ScenarioError::OutOfRange {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Name of the offending key.
    pub fn key(&self) -> &str {
        match self {
            ScenarioError::MissingKey(k) => k,
            ScenarioError::OutOfRange { key, .. } => key,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContaminantKind {
    /// Mass-denominated toxin; concentrations in mg/L, doses in mg.
    Chemical,
    /// Organism-denominated pathogen; concentrations in count/L.
    Pathogen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadUnit {
    Kilograms,
    Organisms,
    /// Infectious doses, converted with `doses_to_organisms`.
    Doses,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightModel {
    /// Every agent weighs the same.
    Fixed(f64),
    /// Exponential draw around the demographic group's mean weight.
    Sampled,
}

/// Word-of-mouth cluster composition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub size: u32,
    pub isolates: u32,
    pub sources: u32,
    pub intermediates: u32,
    pub ultimates: u32,
    /// Share of ultimate receivers wired directly to the source (rounded up).
    pub direct_share: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            size: 15,
            isolates: 1,
            sources: 1,
            intermediates: 2,
            ultimates: 11,
            direct_share: 0.5,
        }
    }
}

impl ClusterParams {
    /// Cluster of `size` keeping isolate/source/intermediate counts and
    /// giving the rest to ultimate receivers.
    pub fn resized(&self, size: u32) -> Self {
        let fixed = self.isolates + self.sources + self.intermediates;
        ClusterParams {
            size,
            ultimates: size.saturating_sub(fixed),
            ..*self
        }
    }

    pub fn with_intermediates(&self, intermediates: u32) -> Self {
        let fixed = self.isolates + self.sources + intermediates;
        ClusterParams {
            intermediates,
            ultimates: self.size.saturating_sub(fixed),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.size == 0 {
            return Err(ScenarioError::out_of_range(
                "cluster_size",
                "must be positive",
            ));
        }
        if self.sources != 1 {
            return Err(ScenarioError::out_of_range(
                "cluster_sources",
                "exactly one original source per cluster",
            ));
        }
        if self.isolates + self.sources + self.intermediates + self.ultimates != self.size {
            return Err(ScenarioError::out_of_range(
                "cluster_size",
                "isolates + sources + intermediates + ultimates must equal the cluster size",
            ));
        }
        if !(0.0..=1.0).contains(&self.direct_share) {
            return Err(ScenarioError::out_of_range(
                "cluster_direct_share",
                "must lie in [0, 1]",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub contaminant: ContaminantKind,
    pub injection_node: String,
    /// Absolute simulation time, s.
    pub injection_start: f64,
    pub injection_end: f64,
    pub load: f64,
    pub load_unit: LoadUnit,
    /// Organisms per infectious dose for dose-denominated loads.
    pub doses_to_organisms: f64,
    /// Seasonal multiplier applied to every demand.
    pub demand_multiplier: f64,
    pub critical_dose: DoseModel,
    pub weight_model: WeightModel,
    pub model_level: ModelLevel,
    pub duration_days: f64,
    pub trials: u32,
    pub seed: u64,
    pub total_population: u32,
    pub cluster: ClusterParams,
    pub suspension: SuspensionTable,
    /// m/s, converts Euclidean distance into travel time.
    pub walking_speed: f64,
    /// Hours spent at the work node by employed agents.
    pub work_hours: f64,
    /// Steps between exposure/warning and its effect (demand cut, message).
    pub reaction_latency: u32,
    /// Warned or exposed agents also stop drinking tap water.
    pub informed_stop_drinking: bool,
    /// Patterns whose junctions host visitors (work, shops) rather than homes.
    pub nonresidential_patterns: Vec<String>,
}

impl ScenarioConfig {
    /// A scenario with every optional field at its default.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        contaminant: ContaminantKind,
        injection_node: &str,
        injection_start: f64,
        injection_end: f64,
        load: f64,
        load_unit: LoadUnit,
        demand_multiplier: f64,
        critical_dose: DoseModel,
        model_level: ModelLevel,
    ) -> Self {
        let duration_days = match contaminant {
            ContaminantKind::Chemical => 8.0,
            ContaminantKind::Pathogen => 10.0,
        };
        let doses_to_organisms = match critical_dose {
            DoseModel::FixedCount(n) => n,
            DoseModel::PerBodyWeight(_) => 1.0,
        };
        ScenarioConfig {
            contaminant,
            injection_node: injection_node.into(),
            injection_start,
            injection_end,
            load,
            load_unit,
            doses_to_organisms,
            demand_multiplier,
            critical_dose,
            weight_model: WeightModel::Fixed(70.0),
            model_level,
            duration_days,
            trials: 10,
            seed: 0,
            total_population: 1000,
            cluster: ClusterParams::default(),
            suspension: SuspensionTable::default(),
            walking_speed: 1.4,
            work_hours: 8.0,
            reaction_latency: 1,
            informed_stop_drinking: false,
            nonresidential_patterns: Vec::new(),
        }
    }

    pub fn duration_seconds(&self) -> f64 {
        self.duration_days * SECONDS_PER_DAY
    }

    /// Total load in internal mass units: mg for chemicals, organisms for
    /// pathogens.
    pub fn load_in_mass_units(&self) -> f64 {
        match self.load_unit {
            LoadUnit::Kilograms => self.load * 1e6,
            LoadUnit::Organisms => self.load,
            LoadUnit::Doses => self.load * self.doses_to_organisms,
        }
    }

    /// Checks every invariant, including a strictly positive load.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.load > 0.0) || !self.load.is_finite() {
            return Err(ScenarioError::out_of_range("load", "must be positive"));
        }
        self.validate_allowing_zero_load()
    }

    /// Same as [`validate`](Self::validate) but accepts a zero load, which is
    /// useful for baseline (no-event) runs.
    pub fn validate_allowing_zero_load(&self) -> Result<(), ScenarioError> {
        let err = ScenarioError::out_of_range;
        if !(self.load >= 0.0) {
            return Err(err("load", "must not be negative"));
        }
        match (self.contaminant, self.load_unit) {
            (ContaminantKind::Chemical, LoadUnit::Kilograms) => {}
            (ContaminantKind::Pathogen, LoadUnit::Organisms | LoadUnit::Doses) => {}
            _ => return Err(err("load", "unit does not match contaminant kind")),
        }
        if !(self.injection_start >= 0.0) {
            return Err(err("injection_start", "must not be negative"));
        }
        if !(self.injection_start < self.injection_end) {
            return Err(err("injection_end", "must be later than injection_start"));
        }
        if !(self.duration_days > 0.0) {
            return Err(err("duration_days", "must be positive"));
        }
        if self.injection_end > self.duration_seconds() {
            return Err(err(
                "injection_end",
                "must not exceed the simulation duration",
            ));
        }
        if !(self.demand_multiplier > 0.0) || !self.demand_multiplier.is_finite() {
            return Err(err("demand_multiplier", "must be positive"));
        }
        if !(self.doses_to_organisms > 0.0) {
            return Err(err("doses_to_organisms", "must be positive"));
        }
        self.critical_dose.validate()?;
        if let WeightModel::Fixed(w) = self.weight_model {
            if !(w > 0.0) {
                return Err(err("weight", "must be positive"));
            }
        }
        if self.trials == 0 {
            return Err(err("trials", "at least one trial"));
        }
        if self.total_population == 0 {
            return Err(err("total_population", "must be positive"));
        }
        self.cluster.validate()?;
        self.suspension.validate()?;
        if !(self.walking_speed > 0.0) {
            return Err(err("walking_speed", "must be positive"));
        }
        if !(self.work_hours > 0.0 && self.work_hours < 24.0) {
            return Err(err("work_hours", "must lie in (0, 24)"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn west_300kg() -> ScenarioConfig {
        ScenarioConfig::new(
            ContaminantKind::Chemical,
            "WEST",
            18.0 * 3600.0,
            24.0 * 3600.0,
            300.0,
            LoadUnit::Kilograms,
            0.60,
            DoseModel::PerBodyWeight(5.0e-8),
            ModelLevel::new(3).unwrap(),
        )
    }

    #[test]
    fn defaults_are_valid() {
        let s = west_300kg();
        s.validate().unwrap();
        assert_eq!(s.duration_days, 8.0);
        assert_eq!(s.load_in_mass_units(), 3.0e8);
    }

    #[test]
    fn cluster_roles_must_sum_to_size() {
        let mut s = west_300kg();
        s.cluster.ultimates = 12;
        assert_eq!(s.validate().unwrap_err().key(), "cluster_size");
    }

    #[test]
    fn end_after_start() {
        let mut s = west_300kg();
        s.injection_end = s.injection_start;
        assert_eq!(s.validate().unwrap_err().key(), "injection_end");
    }

    #[test]
    fn end_within_duration() {
        let mut s = west_300kg();
        s.duration_days = 0.5;
        assert_eq!(s.validate().unwrap_err().key(), "injection_end");
    }

    #[test]
    fn zero_load_only_for_baselines() {
        let mut s = west_300kg();
        s.load = 0.0;
        assert_eq!(s.validate().unwrap_err().key(), "load");
        s.validate_allowing_zero_load().unwrap();
    }

    #[test]
    fn pathogen_dose_conversion_defaults_to_infectious_dose() {
        let s = ScenarioConfig::new(
            ContaminantKind::Pathogen,
            "WEST",
            8.0 * 3600.0,
            67.0 * 3600.0,
            36e6,
            LoadUnit::Doses,
            0.85,
            DoseModel::FixedCount(9.0),
            ModelLevel::new(1).unwrap(),
        );
        s.validate().unwrap();
        assert_eq!(s.duration_days, 10.0);
        assert_eq!(s.load_in_mass_units(), 36e6 * 9.0);
    }

    #[test]
    fn resizing_keeps_role_counts() {
        let c = ClusterParams::default().resized(30);
        c.validate().unwrap();
        assert_eq!(c.ultimates, 26);
        let c = ClusterParams::default().with_intermediates(8);
        c.validate().unwrap();
        assert_eq!(c.ultimates, 5);
    }
}
