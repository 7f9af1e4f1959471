//! Meal-time distributions.

use alloc::format;
use alloc::vec::Vec;

use super::PopulationError;
use crate::SECONDS_PER_DAY;

/// Piecewise-linear cumulative distribution over the time of day, s.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCdf {
    points: Vec<(f64, f64)>,
}

impl PiecewiseCdf {
    /// `points` are (time of day s, cumulative probability), starting at 0
    /// and ending at 1.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, PopulationError> {
        let bad = |m: &str| Err(PopulationError::InvalidCdf(m.into()));
        if points.len() < 2 {
            return bad("at least two points are required");
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return bad("times must increase strictly");
            }
            if w[1].1 < w[0].1 {
                return bad("probabilities must not decrease");
            }
        }
        let (t0, p0) = points[0];
        let (t1, p1) = points[points.len() - 1];
        if p0 != 0.0 || p1 != 1.0 {
            return bad("probabilities must run from 0 to 1");
        }
        if t0 < 0.0 || t1 >= SECONDS_PER_DAY {
            return bad("times must fall within one day");
        }
        Ok(PiecewiseCdf { points })
    }

    /// Convenience constructor taking clock hours.
    pub fn from_hours(points: &[(f64, f64)]) -> Result<Self, PopulationError> {
        Self::new(points.iter().map(|&(h, p)| (h * 3600.0, p)).collect())
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn earliest(&self) -> f64 {
        self.points[0].0
    }

    pub fn latest(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= self.earliest() {
            return 0.0;
        }
        if t >= self.latest() {
            return 1.0;
        }
        let i = self.points.partition_point(|&(x, _)| x <= t);
        let (x0, p0) = self.points[i - 1];
        let (x1, p1) = self.points[i];
        p0 + (p1 - p0) * (t - x0) / (x1 - x0)
    }

    /// Inverse CDF.
    pub fn sample(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        for w in self.points.windows(2) {
            let ((x0, p0), (x1, p1)) = (w[0], w[1]);
            if u <= p1 && p1 > p0 {
                return x0 + (x1 - x0) * ((u - p0) / (p1 - p0)).max(0.0);
            }
        }
        self.latest()
    }

    /// Draw conditioned on exceeding `lower`.
    pub fn sample_after(&self, lower: f64, u: f64) -> f64 {
        let f = self.cdf(lower);
        if f >= 1.0 {
            return lower;
        }
        self.sample(f + u * (1.0 - f)).max(lower)
    }
}

/// Breakfast, lunch and dinner time distributions with a minimum spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct MealTables {
    pub breakfast: PiecewiseCdf,
    pub lunch: PiecewiseCdf,
    pub dinner: PiecewiseCdf,
    /// Minimum time between consecutive major meals, s.
    pub min_gap: f64,
}

impl Default for MealTables {
    /// Smoothed approximations of published U.S. meal-timing surveys.
    fn default() -> Self {
        let cdf = |p: &[(f64, f64)]| PiecewiseCdf::from_hours(p).expect("default meal table");
        MealTables {
            breakfast: cdf(&[
                (5.0, 0.0),
                (6.0, 0.08),
                (7.0, 0.35),
                (8.0, 0.70),
                (9.0, 0.90),
                (10.0, 1.0),
            ]),
            lunch: cdf(&[
                (10.5, 0.0),
                (11.5, 0.15),
                (12.0, 0.40),
                (13.0, 0.80),
                (14.0, 0.95),
                (15.0, 1.0),
            ]),
            dinner: cdf(&[
                (16.5, 0.0),
                (17.5, 0.20),
                (18.5, 0.60),
                (19.5, 0.88),
                (20.5, 0.97),
                (21.5, 1.0),
            ]),
            min_gap: 2.0 * 3600.0,
        }
    }
}

impl MealTables {
    /// Rejects tables where a later meal could be forced past its own
    /// support or past midnight.
    pub fn new(
        breakfast: PiecewiseCdf,
        lunch: PiecewiseCdf,
        dinner: PiecewiseCdf,
        min_gap: f64,
    ) -> Result<Self, PopulationError> {
        if !(min_gap >= 0.0) {
            return Err(PopulationError::InvalidCdf(
                "meal gap must not be negative".into(),
            ));
        }
        if !(breakfast.latest() + min_gap < lunch.latest()
            && lunch.latest() + min_gap < dinner.latest())
        {
            return Err(PopulationError::InvalidCdf(format!(
                "each meal must be able to follow the previous one by {} h",
                min_gap / 3600.0
            )));
        }
        Ok(MealTables {
            breakfast,
            lunch,
            dinner,
            min_gap,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trips() {
        let m = MealTables::default();
        for k in 1..100 {
            let u = k as f64 / 100.0;
            let t = m.lunch.sample(u);
            assert!((m.lunch.cdf(t) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_draw_respects_lower_bound() {
        let m = MealTables::default();
        let lower = 13.0 * 3600.0;
        for k in 0..=10 {
            assert!(m.lunch.sample_after(lower, k as f64 / 10.0) >= lower);
        }
        assert_eq!(m.lunch.sample_after(16.0 * 3600.0, 0.3), 16.0 * 3600.0);
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(PiecewiseCdf::from_hours(&[(5.0, 0.0)]).is_err());
        assert!(PiecewiseCdf::from_hours(&[(5.0, 0.0), (4.0, 1.0)]).is_err());
        assert!(PiecewiseCdf::from_hours(&[(5.0, 0.1), (6.0, 1.0)]).is_err());
        assert!(
            PiecewiseCdf::from_hours(&[(5.0, 0.0), (6.0, 0.6), (7.0, 0.5), (8.0, 1.0)]).is_err()
        );
        let d = MealTables::default();
        assert!(MealTables::new(
            d.breakfast.clone(),
            d.lunch.clone(),
            d.dinner.clone(),
            6.0 * 3600.0
        )
        .is_err());
    }
}
