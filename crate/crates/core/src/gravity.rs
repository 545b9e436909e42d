//! Production-constrained gravity distribution.
//!
//! Flows for one purpose are
//!
//! ```text
//! Q[i][j] = P[i] * A[j] * F[i][j] / sum_x(A[x] * F[i][x]),   F[i][j] = W[i][j]^(-beta)
//! ```
//!
//! so every origin row sums to its production whenever some attraction is
//! reachable from it. The proportionality constant of the unconstrained form
//! cancels in the normalisation and does not appear anywhere.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{
    attraction_vector, productions, AttractionVector, DemographicRates, ProductionVector, Purpose,
    Zone,
};
use crate::error::{Error, Result};
use crate::geo::{distance_km, intra_zonal_distance, Coordinate, DEFAULT_MIN_DISTANCE_KM};
use crate::matrix::SquareMatrix;

/// Row denominators below this are treated as unreachable.
const DENOMINATOR_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GravityConfig {
    /// Distance-decay exponent.
    pub beta: f64,
    pub min_distance_km: f64,
}

impl Default for GravityConfig {
    fn default() -> Self {
        GravityConfig {
            beta: 2.0,
            min_distance_km: DEFAULT_MIN_DISTANCE_KM,
        }
    }
}

impl GravityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "gravity.beta = {} must be > 0",
                self.beta
            )));
        }
        if !(self.min_distance_km > 0.0 && self.min_distance_km.is_finite()) {
            return Err(Error::Config(format!(
                "gravity.min_distance_km = {} must be > 0",
                self.min_distance_km
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    /// Trips confined to their own partition.
    Barrier,
    /// Every pair of zones is reachable.
    #[default]
    Connected,
}

impl std::str::FromStr for ScenarioMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "barrier" => Ok(ScenarioMode::Barrier),
            "connected" => Ok(ScenarioMode::Connected),
            _ => Err(Error::parse(s, "scenario must be `barrier` or `connected`")),
        }
    }
}

/// Zone attribute that defines the barrier partitions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKey {
    #[default]
    Subregion,
    Country,
}

impl PartitionKey {
    pub fn of<'a>(&self, zone: &'a Zone) -> &'a str {
        match self {
            PartitionKey::Subregion => &zone.subregion,
            PartitionKey::Country => &zone.country,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub mode: ScenarioMode,
    pub partition_key: PartitionKey,
}

impl ScenarioSpec {
    pub fn barrier() -> Self {
        ScenarioSpec {
            mode: ScenarioMode::Barrier,
            ..Default::default()
        }
    }

    pub fn connected() -> Self {
        ScenarioSpec {
            mode: ScenarioMode::Connected,
            ..Default::default()
        }
    }

    pub fn label(&self) -> &'static str {
        match self.mode {
            ScenarioMode::Barrier => "barrier",
            ScenarioMode::Connected => "connected",
        }
    }

    /// Partition label per zone in barrier mode, `None` when connected.
    pub fn partitions<'a>(&self, zones: &'a [Zone]) -> Result<Option<Vec<&'a str>>> {
        if self.mode == ScenarioMode::Connected {
            return Ok(None);
        }
        zones
            .iter()
            .map(|z| {
                let part = self.partition_key.of(z).trim();
                if part.is_empty() {
                    Err(Error::Config(format!(
                        "zone {} has no {:?} value required by the barrier scenario",
                        z.code, self.partition_key
                    )))
                } else {
                    Ok(part)
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

/// Friction factors `F[i][j] = W[i][j]^(-beta)` with severed pairs set to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceMatrix {
    pub zone_codes: Vec<String>,
    pub scenario: String,
    pub values: SquareMatrix,
}

impl ImpedanceMatrix {
    /// Builds friction factors from an explicit travel-distance matrix.
    ///
    /// `partitions`, when given, zeroes every pair whose labels differ.
    /// `beta = 0` is accepted here and yields `F = 1` on reachable pairs.
    pub fn from_distances(
        zone_codes: Vec<String>,
        scenario: impl Into<String>,
        distances: &SquareMatrix,
        beta: f64,
        partitions: Option<&[&str]>,
    ) -> Result<Self> {
        let n = distances.dim();
        if zone_codes.len() != n {
            return Err(Error::Contract(format!(
                "{} zone codes for a {n}x{n} distance matrix",
                zone_codes.len()
            )));
        }
        if let Some(parts) = partitions {
            if parts.len() != n {
                return Err(Error::Contract(format!(
                    "{} partition labels for {n} zones",
                    parts.len()
                )));
            }
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Range(format!(
                "beta = {beta} must be finite and >= 0"
            )));
        }
        if let Some((i, j, w)) = distances
            .cells()
            .find(|&(_, _, w)| !(w > 0.0 && w.is_finite()))
        {
            return Err(Error::Range(format!(
                "impedance distance at ({i}, {j}) is {w}, expected a positive finite value"
            )));
        }
        let values = SquareMatrix::from_fn(n, |i, j| match partitions {
            Some(parts) if parts[i] != parts[j] => 0.0,
            _ => distances[(i, j)].powf(-beta),
        });
        Ok(ImpedanceMatrix {
            zone_codes,
            scenario: scenario.into(),
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.dim()
    }
}

/// Travel distances between zone centroids: floored great-circle distance off
/// the diagonal, intra-zonal distance on it.
pub fn distance_matrix(coords: &[Coordinate], min_distance_km: f64) -> Result<SquareMatrix> {
    let n = coords.len();
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 zones, got {n}")));
    }
    let diagonal = (0..n)
        .map(|i| intra_zonal_distance(i, coords, min_distance_km))
        .collect::<Result<Vec<_>>>()?;
    Ok(SquareMatrix::from_fn(n, |i, j| {
        if i == j {
            diagonal[i]
        } else {
            distance_km(coords[i], coords[j]).max(min_distance_km)
        }
    }))
}

pub fn impedance_matrix(
    zones: &[Zone],
    config: &GravityConfig,
    scenario: &ScenarioSpec,
) -> Result<ImpedanceMatrix> {
    config.validate()?;
    let coords: Vec<Coordinate> = zones.iter().map(|z| z.coord).collect();
    let distances = distance_matrix(&coords, config.min_distance_km)?;
    let partitions = scenario.partitions(zones)?;
    ImpedanceMatrix::from_distances(
        zones.iter().map(|z| z.code.clone()).collect(),
        scenario.label(),
        &distances,
        config.beta,
        partitions.as_deref(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixPurpose {
    Single(Purpose),
    Aggregate,
}

impl fmt::Display for MatrixPurpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixPurpose::Single(p) => p.fmt(f),
            MatrixPurpose::Aggregate => f.write_str("aggregate"),
        }
    }
}

/// Yearly trips between zones; rows are origins, columns destinations.
#[derive(Debug, Clone, PartialEq)]
pub struct ODMatrix {
    pub zone_codes: Vec<String>,
    pub purpose: MatrixPurpose,
    pub scenario: String,
    pub values: SquareMatrix,
}

impl ODMatrix {
    pub fn new(
        zone_codes: Vec<String>,
        purpose: MatrixPurpose,
        scenario: impl Into<String>,
        values: SquareMatrix,
    ) -> Result<Self> {
        if zone_codes.len() != values.dim() {
            return Err(Error::Contract(format!(
                "{} zone codes for a {n}x{n} matrix",
                zone_codes.len(),
                n = values.dim()
            )));
        }
        if let Some((i, j, v)) = values
            .cells()
            .find(|&(_, _, v)| !(v >= 0.0 && v.is_finite()))
        {
            return Err(Error::Contract(format!(
                "cell ({}, {}) = {v} is not a non-negative finite trip count",
                zone_codes[i], zone_codes[j]
            )));
        }
        Ok(ODMatrix {
            zone_codes,
            purpose,
            scenario: scenario.into(),
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.dim()
    }

    pub fn zone_index(&self, code: &str) -> Option<usize> {
        self.zone_codes.iter().position(|c| c == code)
    }

    pub fn get(&self, origin: &str, dest: &str) -> Option<f64> {
        Some(self.values[(self.zone_index(origin)?, self.zone_index(dest)?)])
    }

    pub(crate) fn ensure_same_zones(&self, other: &ODMatrix) -> Result<()> {
        if self.zone_codes != other.zone_codes {
            return Err(Error::Contract(
                "OD matrices have different zone orderings".into(),
            ));
        }
        Ok(())
    }
}

/// Production of a zone that could not reach any attraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Stranded {
    pub zone: usize,
    pub code: String,
    pub purpose: Purpose,
    pub lost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub od: ODMatrix,
    /// Zones with positive production and no reachable attraction.
    pub stranded: Vec<Stranded>,
}

/// Distributes one purpose's productions over the reachable attractions.
pub fn distribute(
    p: &ProductionVector,
    a: &AttractionVector,
    f: &ImpedanceMatrix,
) -> Result<Distribution> {
    let n = f.dim();
    if p.values.len() != n || a.values.len() != n {
        return Err(Error::Contract(format!(
            "dimension mismatch: {} productions, {} attractions, {n}x{n} impedance",
            p.values.len(),
            a.values.len()
        )));
    }
    if p.purpose != a.purpose {
        return Err(Error::Contract(format!(
            "production purpose {} does not match attraction purpose {}",
            p.purpose, a.purpose
        )));
    }

    let mut values = SquareMatrix::zeros(n);
    let mut stranded = Vec::new();
    for i in 0..n {
        let friction = f.values.row(i);
        let denominator: f64 = a
            .values
            .iter()
            .zip(friction)
            .map(|(&ax, &fx)| ax * fx)
            .sum();
        if denominator < DENOMINATOR_FLOOR {
            if p.values[i] > 0.0 {
                stranded.push(Stranded {
                    zone: i,
                    code: f.zone_codes[i].clone(),
                    purpose: p.purpose,
                    lost: p.values[i],
                });
            }
            continue;
        }
        let scale = p.values[i] / denominator;
        for (q, (&aj, &fj)) in values
            .row_mut(i)
            .iter_mut()
            .zip(a.values.iter().zip(friction))
        {
            *q = scale * aj * fj;
        }
    }

    Ok(Distribution {
        od: ODMatrix::new(
            f.zone_codes.clone(),
            MatrixPurpose::Single(p.purpose),
            f.scenario.clone(),
            values,
        )?,
        stranded,
    })
}

/// Elementwise sum of purpose matrices sharing zones and scenario.
pub fn aggregate(per_purpose: &[ODMatrix]) -> Result<ODMatrix> {
    let (first, rest) = per_purpose
        .split_first()
        .ok_or_else(|| Error::Contract("nothing to aggregate".into()))?;
    let mut values = first.values.clone();
    for m in rest {
        first.ensure_same_zones(m)?;
        if m.scenario != first.scenario {
            return Err(Error::Contract(format!(
                "cannot aggregate scenario {} with {}",
                first.scenario, m.scenario
            )));
        }
        for i in 0..values.dim() {
            for (acc, &v) in values.row_mut(i).iter_mut().zip(m.values.row(i)) {
                *acc += v;
            }
        }
    }
    ODMatrix::new(
        first.zone_codes.clone(),
        MatrixPurpose::Aggregate,
        first.scenario.clone(),
        values,
    )
}

/// Rounds every cell half away from zero. Meant for output only.
pub fn round_matrix(m: &ODMatrix) -> ODMatrix {
    ODMatrix {
        values: m.values.map(f64::round),
        ..m.clone()
    }
}

/// Productions, attractions and distributions for every purpose under one
/// scenario.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub productions: Vec<ProductionVector>,
    pub attractions: Vec<AttractionVector>,
    pub per_purpose: Vec<Distribution>,
    pub aggregate: ODMatrix,
}

impl ScenarioRun {
    pub fn stranded(&self) -> impl Iterator<Item = &Stranded> {
        self.per_purpose.iter().flat_map(|d| d.stranded.iter())
    }
}

/// Runs generation and distribution for all purposes.
pub fn run_scenario(
    zones: &[Zone],
    rates: &DemographicRates,
    config: &GravityConfig,
    scenario: &ScenarioSpec,
) -> Result<ScenarioRun> {
    rates.validate()?;
    let f = impedance_matrix(zones, config, scenario)?;
    let productions: Vec<_> = Purpose::ALL
        .iter()
        .map(|&p| productions(zones, rates, p))
        .collect();
    let attractions: Vec<_> = Purpose::ALL
        .iter()
        .map(|&p| attraction_vector(zones, p))
        .collect();
    let per_purpose = distribute_all(&productions, &attractions, &f)?;
    let matrices: Vec<ODMatrix> = per_purpose.iter().map(|d| d.od.clone()).collect();
    let aggregate = aggregate(&matrices)?;
    Ok(ScenarioRun {
        productions,
        attractions,
        per_purpose,
        aggregate,
    })
}

/// Distributes each production vector against the attraction vector of the
/// same purpose. Purposes are processed in parallel; output order follows
/// `productions`.
pub fn distribute_all(
    productions: &[ProductionVector],
    attractions: &[AttractionVector],
    f: &ImpedanceMatrix,
) -> Result<Vec<Distribution>> {
    productions
        .par_iter()
        .map(|p| {
            let a = attractions
                .iter()
                .find(|a| a.purpose == p.purpose)
                .ok_or_else(|| {
                    Error::Contract(format!("no attraction vector for purpose {}", p.purpose))
                })?;
            distribute(p, a, f)
        })
        .collect()
}
