//! Distance-decay exponent calibration against an observed OD matrix.
//!
//! The objective is the sum of squared errors between the modelled aggregate
//! flows and the observation. A coarse grid over the search range locates the
//! basin; golden-section search then refines inside one grid step on either
//! side of the best grid point.

use rayon::prelude::*;
use serde::Serialize;

use crate::demand::{AttractionVector, ProductionVector, Zone};
use crate::error::{Error, Result};
use crate::geo::Coordinate;
use crate::gravity::{distance_matrix, distribute_all, ImpedanceMatrix, ODMatrix, ScenarioSpec};
use crate::matrix::SquareMatrix;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSearch {
    pub lo: f64,
    pub hi: f64,
    pub grid_step: f64,
    /// Golden-section search stops once the bracket is narrower than this.
    pub tolerance: f64,
}

impl CalibrationSearch {
    pub fn new(lo: f64, hi: f64) -> Self {
        CalibrationSearch {
            lo,
            hi,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.lo) || !positive(self.hi) {
            return Err(Error::Range(format!(
                "search range [{}, {}] must lie in (0, inf)",
                self.lo, self.hi
            )));
        }
        if self.lo >= self.hi {
            return Err(Error::Range(format!(
                "search range lower bound {} is not below upper bound {}",
                self.lo, self.hi
            )));
        }
        if !positive(self.grid_step) || !positive(self.tolerance) {
            return Err(Error::Range(
                "grid step and tolerance must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Ascending grid from `lo` in `grid_step` increments, always ending at `hi`.
    pub fn grid(&self) -> Vec<f64> {
        let steps = ((self.hi - self.lo) / self.grid_step + 1e-9).floor() as usize;
        let mut points: Vec<f64> = (0..=steps)
            .map(|k| (self.lo + k as f64 * self.grid_step).min(self.hi))
            .collect();
        if points.last().is_some_and(|&last| self.hi - last > 1e-12) {
            points.push(self.hi);
        }
        points
    }
}

impl Default for CalibrationSearch {
    fn default() -> Self {
        CalibrationSearch {
            lo: 0.5,
            hi: 3.0,
            grid_step: 0.05,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub beta_hat: f64,
    /// Sum of squared errors at `beta_hat`, in trips squared.
    pub objective: f64,
    pub evaluations: usize,
    pub search_range: (f64, f64),
}

/// Modelled aggregate flows as a function of the decay exponent.
struct Model<'a> {
    codes: Vec<String>,
    scenario: &'a ScenarioSpec,
    distances: SquareMatrix,
    partitions: Option<Vec<&'a str>>,
    productions: &'a [ProductionVector],
    attractions: &'a [AttractionVector],
    observed: &'a ODMatrix,
}

impl Model<'_> {
    fn sse(&self, beta: f64) -> Result<f64> {
        let f = ImpedanceMatrix::from_distances(
            self.codes.clone(),
            self.scenario.label(),
            &self.distances,
            beta,
            self.partitions.as_deref(),
        )?;
        let flows = distribute_all(self.productions, self.attractions, &f)?;
        let n = self.distances.dim();
        let mut sse = 0.0;
        for i in 0..n {
            for j in 0..n {
                let modelled: f64 = flows.iter().map(|d| d.od.values[(i, j)]).sum();
                let err = modelled - self.observed.values[(i, j)];
                sse += err * err;
            }
        }
        Ok(sse)
    }
}

/// Fits the decay exponent that minimises the squared error between the
/// modelled aggregate flows and `observed`. Ties resolve toward the smaller
/// exponent.
pub fn calibrate_beta(
    observed: &ODMatrix,
    zones: &[Zone],
    productions: &[ProductionVector],
    attractions: &[AttractionVector],
    scenario: &ScenarioSpec,
    min_distance_km: f64,
    search: &CalibrationSearch,
) -> Result<CalibrationResult> {
    search.validate()?;
    if observed.dim() == 0 {
        return Err(Error::Contract("observed OD matrix is empty".into()));
    }
    let codes: Vec<String> = zones.iter().map(|z| z.code.clone()).collect();
    if observed.zone_codes != codes {
        return Err(Error::Contract(
            "observed matrix zone order differs from the zone table".into(),
        ));
    }
    let coords: Vec<Coordinate> = zones.iter().map(|z| z.coord).collect();
    let model = Model {
        codes,
        scenario,
        distances: distance_matrix(&coords, min_distance_km)?,
        partitions: scenario.partitions(zones)?,
        productions,
        attractions,
        observed,
    };

    let grid = search.grid();
    let objectives = grid
        .par_iter()
        .map(|&beta| model.sse(beta))
        .collect::<Result<Vec<_>>>()?;
    let mut evaluations = grid.len();
    let mut best = 0;
    for (k, &obj) in objectives.iter().enumerate() {
        if obj < objectives[best] {
            best = k;
        }
    }
    let (grid_beta, grid_obj) = (grid[best], objectives[best]);

    let mut a = (grid_beta - search.grid_step).max(search.lo);
    let mut b = (grid_beta + search.grid_step).min(search.hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = model.sse(c)?;
    let mut fd = model.sse(d)?;
    evaluations += 2;
    while b - a >= search.tolerance {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = model.sse(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = model.sse(d)?;
        }
        evaluations += 1;
    }
    let refined = 0.5 * (a + b);
    let refined_obj = model.sse(refined)?;
    evaluations += 1;

    let (beta_hat, objective) = if refined_obj < grid_obj {
        (refined, refined_obj)
    } else {
        (grid_beta, grid_obj)
    };
    Ok(CalibrationResult {
        beta_hat,
        objective,
        evaluations,
        search_range: (search.lo, search.hi),
    })
}
