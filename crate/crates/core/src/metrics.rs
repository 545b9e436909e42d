//! Scenario analytics over OD matrices.

use serde::Serialize;

use crate::demand::Zone;
use crate::error::{Error, Result};
use crate::gravity::ODMatrix;

/// Longitude/latitude differences at or below this many degrees count as
/// no movement on that axis.
pub const DIRECTION_DEAD_BAND_DEG: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioComparison {
    pub total_without: f64,
    pub total_with: f64,
    pub delta: f64,
    pub increase_vs_without: f64,
    pub increase_vs_with: f64,
    /// Row-sum change per origin zone, in matrix order.
    pub per_zone_row_deltas: Vec<f64>,
}

/// Shares of inter-zonal trips per compass direction. Each axis is `None`
/// when no trip has a component on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionalShares {
    pub west_to_east: Option<f64>,
    pub east_to_west: Option<f64>,
    pub north_to_south: Option<f64>,
    pub south_to_north: Option<f64>,
}

pub fn total_trips(m: &ODMatrix) -> f64 {
    m.values.sum()
}

pub fn scenario_delta(without: &ODMatrix, with_: &ODMatrix) -> Result<ScenarioComparison> {
    without.ensure_same_zones(with_)?;
    let total_without = total_trips(without);
    let total_with = total_trips(with_);
    let delta = total_with - total_without;
    let ratio = |den: f64| if den == 0.0 { 0.0 } else { delta / den };
    // With both totals at zero the delta is zero as well, so 0 is exact.
    let per_zone_row_deltas = (0..without.dim())
        .map(|i| with_.values.row_sum(i) - without.values.row_sum(i))
        .collect();
    Ok(ScenarioComparison {
        total_without,
        total_with,
        delta,
        increase_vs_without: ratio(total_without),
        increase_vs_with: ratio(total_with),
        per_zone_row_deltas,
    })
}

/// Looks up the zone record for every matrix row, in matrix order.
fn zones_for<'a>(m: &ODMatrix, zones: &'a [Zone]) -> Result<Vec<&'a Zone>> {
    m.zone_codes
        .iter()
        .map(|code| {
            zones
                .iter()
                .find(|z| &z.code == code)
                .ok_or_else(|| Error::Contract(format!("zone {code} is not in the zone table")))
        })
        .collect()
}

/// Fraction of trips whose origin and destination lie in different countries.
///
/// With `include_intrazonal` the denominator is every trip in the matrix,
/// otherwise only off-diagonal trips. Returns 0 for an empty denominator.
pub fn cross_border_share(m: &ODMatrix, zones: &[Zone], include_intrazonal: bool) -> Result<f64> {
    let rows = zones_for(m, zones)?;
    if let Some(z) = rows.iter().find(|z| z.country.trim().is_empty()) {
        return Err(Error::Config(format!(
            "zone {} has no country label",
            z.code
        )));
    }
    let mut crossing = 0.0;
    let mut total = 0.0;
    for (i, j, v) in m.values.cells() {
        if i == j && !include_intrazonal {
            continue;
        }
        total += v;
        if rows[i].country != rows[j].country {
            crossing += v;
        }
    }
    Ok(if total == 0.0 { 0.0 } else { crossing / total })
}

/// Classifies inter-zonal trips by the sign of the centroid displacement on
/// each axis. Intra-zonal trips are ignored.
pub fn directional_shares(m: &ODMatrix, zones: &[Zone]) -> Result<DirectionalShares> {
    let rows = zones_for(m, zones)?;
    let (mut east, mut west, mut north, mut south) = (0.0, 0.0, 0.0, 0.0);
    for (i, j, v) in m.values.cells() {
        if i == j {
            continue;
        }
        let dlon = rows[j].coord.lon() - rows[i].coord.lon();
        let dlat = rows[j].coord.lat() - rows[i].coord.lat();
        if dlon > DIRECTION_DEAD_BAND_DEG {
            east += v;
        } else if dlon < -DIRECTION_DEAD_BAND_DEG {
            west += v;
        }
        if dlat > DIRECTION_DEAD_BAND_DEG {
            north += v;
        } else if dlat < -DIRECTION_DEAD_BAND_DEG {
            south += v;
        }
    }
    let split = |pos: f64, neg: f64| {
        let total = pos + neg;
        if total > 0.0 {
            (Some(pos / total), Some(neg / total))
        } else {
            (None, None)
        }
    };
    let (west_to_east, east_to_west) = split(east, west);
    let (south_to_north, north_to_south) = split(north, south);
    Ok(DirectionalShares {
        west_to_east,
        east_to_west,
        north_to_south,
        south_to_north,
    })
}
