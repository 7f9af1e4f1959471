//! Exposure statistics and the coincident population plume index.

use alloc::vec::Vec;

use crate::engine::{ModelLevel, SimulationResults};
use crate::quality::CLEAN_THRESHOLD;

/// Fraction of the population standing at a node whose concentration
/// exceeds the clean threshold. Travelers are not in `occupancy` but still
/// count in `population`.
pub fn cpp(occupancy: &[u32], concentrations: &[f64], population: u32) -> f64 {
    debug_assert_eq!(occupancy.len(), concentrations.len());
    if population == 0 {
        return 0.0;
    }
    let present: u64 = occupancy
        .iter()
        .zip(concentrations)
        .filter(|(_, &c)| c > CLEAN_THRESHOLD)
        .map(|(&k, _)| k as u64)
        .sum();
    debug_assert!(occupancy.iter().map(|&k| k as u64).sum::<u64>() <= population as u64);
    present as f64 / population as f64
}

/// Exposure totals of one model level over its trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSummary {
    pub model: ModelLevel,
    /// (seed, total exposed) per trial in trial order.
    pub trials: Vec<(u64, u32)>,
    pub mean: f64,
    pub min: u32,
    pub max: u32,
}

impl ModelSummary {
    pub fn from_totals(model: ModelLevel, trials: Vec<(u64, u32)>) -> Self {
        let totals = trials.iter().map(|t| t.1);
        let min = totals.clone().min().unwrap_or(0);
        let max = totals.clone().max().unwrap_or(0);
        let mean = if trials.is_empty() {
            0.0
        } else {
            totals.map(f64::from).sum::<f64>() / trials.len() as f64
        };
        ModelSummary {
            model,
            trials,
            mean,
            min,
            max,
        }
    }

    pub fn from_results(model: ModelLevel, results: &[SimulationResults]) -> Self {
        Self::from_totals(
            model,
            results
                .iter()
                .map(|r| (r.seed, r.total_exposed()))
                .collect(),
        )
    }

    pub fn range(&self) -> u32 {
        self.max - self.min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cpp_cases() {
        assert_eq!(cpp(&[10, 20], &[0.0, 0.0], 30), 0.0);
        assert_eq!(cpp(&[10, 20], &[1.0, 2.0], 30), 1.0);
        assert_eq!(cpp(&[50, 30, 20], &[0.3, 0.0, 1e-12], 100), 0.5);
        assert_eq!(cpp(&[0], &[1.0], 0), 0.0);
    }

    #[test]
    fn summary_statistics() {
        let m = ModelLevel::new(3).unwrap();
        let s = ModelSummary::from_totals(m, alloc::vec![(0, 4), (1, 10), (2, 7)]);
        assert_eq!((s.min, s.max, s.range()), (4, 10, 6));
        assert_eq!(s.mean, 7.0);
        let one = ModelSummary::from_totals(m, alloc::vec![(5, 3)]);
        assert_eq!((one.mean, one.min, one.max), (3.0, 3, 3));
    }
}
