//! Trip production per purpose and the facility-share attraction rule.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Coordinate;

/// Trip purpose. Each purpose is distributed independently and the results
/// are summed into the aggregate matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Kindergarten,
    PrimarySchool,
    SecondarySchool,
    Hospital,
    Market,
}

impl Purpose {
    pub const ALL: [Purpose; 5] = [
        Purpose::Kindergarten,
        Purpose::PrimarySchool,
        Purpose::SecondarySchool,
        Purpose::Hospital,
        Purpose::Market,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Purpose::Kindergarten => "kindergarten",
            Purpose::PrimarySchool => "primary_school",
            Purpose::SecondarySchool => "secondary_school",
            Purpose::Hospital => "hospital",
            Purpose::Market => "market",
        }
    }

    pub fn school_level(self) -> Option<SchoolLevel> {
        match self {
            Purpose::Kindergarten => Some(SchoolLevel::Kindergarten),
            Purpose::PrimarySchool => Some(SchoolLevel::Primary),
            Purpose::SecondarySchool => Some(SchoolLevel::Secondary),
            Purpose::Hospital | Purpose::Market => None,
        }
    }
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Purpose {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Purpose::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::parse(s, "unknown purpose"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchoolLevel {
    Kindergarten,
    Primary,
    Secondary,
}

impl SchoolLevel {
    pub fn purpose(self) -> Purpose {
        match self {
            SchoolLevel::Kindergarten => Purpose::Kindergarten,
            SchoolLevel::Primary => Purpose::PrimarySchool,
            SchoolLevel::Secondary => Purpose::SecondarySchool,
        }
    }
}

/// Facility counts per purpose in one zone.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facilities {
    pub kindergarten: u64,
    pub primary_school: u64,
    pub secondary_school: u64,
    pub hospital: u64,
    pub market: u64,
}

impl Facilities {
    pub fn count(&self, purpose: Purpose) -> u64 {
        match purpose {
            Purpose::Kindergarten => self.kindergarten,
            Purpose::PrimarySchool => self.primary_school,
            Purpose::SecondarySchool => self.secondary_school,
            Purpose::Hospital => self.hospital,
            Purpose::Market => self.market,
        }
    }

    pub fn set(&mut self, purpose: Purpose, count: u64) {
        match purpose {
            Purpose::Kindergarten => self.kindergarten = count,
            Purpose::PrimarySchool => self.primary_school = count,
            Purpose::SecondarySchool => self.secondary_school = count,
            Purpose::Hospital => self.hospital = count,
            Purpose::Market => self.market = count,
        }
    }
}

/// A settlement treated as one traffic zone, centred on its coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub code: String,
    pub name: String,
    pub country: String,
    pub subregion: String,
    pub coord: Coordinate,
    pub pop_female: u64,
    pub pop_male: u64,
    pub facilities: Facilities,
}

impl Zone {
    pub fn pop_total(&self) -> u64 {
        self.pop_female + self.pop_male
    }
}

/// Production coefficients. School shares are fractions of the population in
/// school age by sex; the health terms are yearly per-capita rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemographicRates {
    pub kindergarten_f: f64,
    pub kindergarten_m: f64,
    pub primary_f: f64,
    pub primary_m: f64,
    pub secondary_f: f64,
    pub secondary_m: f64,
    pub school_days: f64,
    pub pregnancy_rate: f64,
    pub visits_per_pregnancy: f64,
    pub pregnancy_attendance: f64,
    pub skilled_birth_share: f64,
    pub under5_share: f64,
    pub child_visit_coverage: f64,
    pub tb_rate: f64,
    pub tb_attendance: f64,
    pub market_share: f64,
    pub market_days: f64,
}

impl Default for DemographicRates {
    fn default() -> Self {
        DemographicRates {
            kindergarten_f: 0.085,
            kindergarten_m: 0.087,
            primary_f: 0.071,
            primary_m: 0.073,
            secondary_f: 0.112,
            secondary_m: 0.115,
            school_days: 200.0,
            pregnancy_rate: 0.0378,
            visits_per_pregnancy: 4.0,
            pregnancy_attendance: 0.5,
            skilled_birth_share: 0.51,
            under5_share: 0.172,
            child_visit_coverage: 0.84,
            tb_rate: 0.0014,
            tb_attendance: 0.84,
            market_share: 0.25,
            market_days: 52.0,
        }
    }
}

impl DemographicRates {
    pub fn validate(&self) -> Result<()> {
        let fractions = [
            ("kindergarten_f", self.kindergarten_f),
            ("kindergarten_m", self.kindergarten_m),
            ("primary_f", self.primary_f),
            ("primary_m", self.primary_m),
            ("secondary_f", self.secondary_f),
            ("secondary_m", self.secondary_m),
            ("pregnancy_rate", self.pregnancy_rate),
            ("pregnancy_attendance", self.pregnancy_attendance),
            ("skilled_birth_share", self.skilled_birth_share),
            ("under5_share", self.under5_share),
            ("child_visit_coverage", self.child_visit_coverage),
            ("tb_rate", self.tb_rate),
            ("tb_attendance", self.tb_attendance),
            ("market_share", self.market_share),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "rates.{name} = {v} is not in [0, 1]"
                )));
            }
        }
        for (name, v) in [
            ("school_days", self.school_days),
            ("market_days", self.market_days),
        ] {
            if !(1.0..=366.0).contains(&v) {
                return Err(Error::Config(format!(
                    "rates.{name} = {v} is not in [1, 366]"
                )));
            }
        }
        if !(self.visits_per_pregnancy >= 0.0 && self.visits_per_pregnancy.is_finite()) {
            return Err(Error::Config(format!(
                "rates.visits_per_pregnancy = {} must be non-negative",
                self.visits_per_pregnancy
            )));
        }
        Ok(())
    }

    /// Female and male shares of the population attending `level`.
    pub fn school_shares(&self, level: SchoolLevel) -> (f64, f64) {
        match level {
            SchoolLevel::Kindergarten => (self.kindergarten_f, self.kindergarten_m),
            SchoolLevel::Primary => (self.primary_f, self.primary_m),
            SchoolLevel::Secondary => (self.secondary_f, self.secondary_m),
        }
    }

    /// Yearly hospital trips per inhabitant: antenatal and assisted-birth
    /// visits, under-five visits, and tuberculosis treatment.
    pub fn hospital_per_capita(&self) -> f64 {
        self.pregnancy_rate
            * (self.visits_per_pregnancy * self.pregnancy_attendance + self.skilled_birth_share)
            + self.child_visit_coverage * self.under5_share
            + self.tb_rate * self.tb_attendance
    }
}

/// Yearly trips produced by each zone for one purpose.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductionVector {
    pub purpose: Purpose,
    pub values: Vec<f64>,
}

impl ProductionVector {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Share of a purpose's attraction held by each zone.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractionVector {
    pub purpose: Purpose,
    pub values: Vec<f64>,
}

impl AttractionVector {
    /// True when no zone offers the purpose.
    pub fn is_empty(&self) -> bool {
        self.values.iter().all(|&a| a == 0.0)
    }
}

pub fn school_productions(
    zones: &[Zone],
    rates: &DemographicRates,
    level: SchoolLevel,
) -> ProductionVector {
    let (share_f, share_m) = rates.school_shares(level);
    let values = zones
        .iter()
        .map(|z| (share_f * z.pop_female as f64 + share_m * z.pop_male as f64) * rates.school_days)
        .collect();
    ProductionVector {
        purpose: level.purpose(),
        values,
    }
}

pub fn hospital_productions(zones: &[Zone], rates: &DemographicRates) -> ProductionVector {
    let per_capita = rates.hospital_per_capita();
    ProductionVector {
        purpose: Purpose::Hospital,
        values: zones
            .iter()
            .map(|z| z.pop_total() as f64 * per_capita)
            .collect(),
    }
}

pub fn market_productions(zones: &[Zone], rates: &DemographicRates) -> ProductionVector {
    ProductionVector {
        purpose: Purpose::Market,
        values: zones
            .iter()
            .map(|z| rates.market_share * z.pop_total() as f64 * rates.market_days)
            .collect(),
    }
}

/// Dispatches to the production rule for `purpose`.
pub fn productions(zones: &[Zone], rates: &DemographicRates, purpose: Purpose) -> ProductionVector {
    match purpose.school_level() {
        Some(level) => school_productions(zones, rates, level),
        None if purpose == Purpose::Hospital => hospital_productions(zones, rates),
        None => market_productions(zones, rates),
    }
}

/// Attraction of each zone as its share of all facilities of `purpose`.
/// All zeros when the purpose has no facility anywhere.
pub fn attraction_vector(zones: &[Zone], purpose: Purpose) -> AttractionVector {
    let total: u64 = zones.iter().map(|z| z.facilities.count(purpose)).sum();
    let values = if total == 0 {
        vec![0.0; zones.len()]
    } else {
        zones
            .iter()
            .map(|z| z.facilities.count(purpose) as f64 / total as f64)
            .collect()
    };
    AttractionVector { purpose, values }
}
