//! CSV overrides for the demographic and meal-time tables.
//!
//! Demographics: `age_group,gender,share,mean_age_yr,mean_weight_kg,mean_volume_l,employment_fraction`
//! with one row per age group and gender (`M` or `F`); `share` is the
//! fraction of the whole population.
//!
//! Meal times: `meal,clock_time_h,cumulative_probability` where `meal` is
//! `breakfast`, `lunch` or `dinner` and rows of one meal are in time order.

use hydrosoc_core::population::{
    DemographicRow, DemographicTable, Gender, MealTables, PiecewiseCdf, PopulationError,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error(transparent)]
    Invalid(#[from] PopulationError),
}

#[derive(Debug, Serialize, Deserialize)]
struct DemographicRecord {
    age_group: String,
    gender: String,
    share: f64,
    mean_age_yr: f64,
    mean_weight_kg: f64,
    mean_volume_l: f64,
    employment_fraction: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CdfRecord {
    meal: String,
    clock_time_h: f64,
    cumulative_probability: f64,
}

pub fn parse_demographics(text: &str) -> Result<DemographicTable, TableError> {
    let mut rows = Vec::new();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    for (i, rec) in rdr.deserialize::<DemographicRecord>().enumerate() {
        let r = rec?;
        let gender = match r.gender.as_str() {
            "M" | "m" => Gender::Male,
            "F" | "f" => Gender::Female,
            g => {
                return Err(TableError::Row {
                    row: i + 1,
                    reason: format!("gender `{g}` is not M or F"),
                })
            }
        };
        rows.push(DemographicRow {
            age_group: r.age_group,
            gender,
            share: r.share,
            mean_age: r.mean_age_yr,
            mean_weight: r.mean_weight_kg,
            mean_volume: r.mean_volume_l,
            employment: r.employment_fraction,
        });
    }
    Ok(DemographicTable::new(rows)?)
}

pub fn write_demographics(table: &DemographicTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in table.rows() {
        w.serialize(DemographicRecord {
            age_group: r.age_group.clone(),
            gender: r.gender.as_str().into(),
            share: r.share,
            mean_age_yr: r.mean_age,
            mean_weight_kg: r.mean_weight,
            mean_volume_l: r.mean_volume,
            employment_fraction: r.employment,
        })
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv output is UTF-8")
}

/// Reads the three meal distributions; the minimum spacing between meals is
/// kept at its default.
pub fn parse_meal_cdfs(text: &str) -> Result<MealTables, TableError> {
    let mut points: [Vec<(f64, f64)>; 3] = Default::default();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    for (i, rec) in rdr.deserialize::<CdfRecord>().enumerate() {
        let r = rec?;
        let slot = match r.meal.as_str() {
            "breakfast" => 0,
            "lunch" => 1,
            "dinner" => 2,
            m => {
                return Err(TableError::Row {
                    row: i + 1,
                    reason: format!("meal `{m}` is not breakfast, lunch or dinner"),
                })
            }
        };
        points[slot].push((r.clock_time_h, r.cumulative_probability));
    }
    let [b, l, d] = points;
    let defaults = MealTables::default();
    Ok(MealTables::new(
        PiecewiseCdf::from_hours(&b)?,
        PiecewiseCdf::from_hours(&l)?,
        PiecewiseCdf::from_hours(&d)?,
        defaults.min_gap,
    )?)
}

pub fn write_meal_cdfs(meals: &MealTables) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (name, cdf) in [
        ("breakfast", &meals.breakfast),
        ("lunch", &meals.lunch),
        ("dinner", &meals.dinner),
    ] {
        for &(t, p) in cdf.points() {
            w.serialize(CdfRecord {
                meal: name.into(),
                clock_time_h: t / 3600.0,
                cumulative_probability: p,
            })
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv output is UTF-8")
}
