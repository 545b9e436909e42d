//! Gravity-model travel demand engine.
//!
//! The pipeline runs in batch stages: zone ingestion ([`io`]), trip production
//! and attraction per purpose ([`demand`]), production-constrained distribution
//! under a connectivity scenario ([`gravity`]), scenario analytics ([`metrics`]),
//! distance-decay calibration ([`calibrate`]) and flow-map output ([`flowmap`]).

pub mod calibrate;
pub mod demand;
pub mod error;
pub mod flowmap;
pub mod geo;
pub mod gravity;
pub mod io;
pub mod matrix;
pub mod metrics;

pub use calibrate::{calibrate_beta, CalibrationResult, CalibrationSearch};
pub use demand::{
    attraction_vector, hospital_productions, market_productions, productions, school_productions,
    AttractionVector, DemographicRates, Facilities, ProductionVector, Purpose, SchoolLevel, Zone,
};
pub use error::{Error, Result};
pub use flowmap::{classify_flows, default_breaks, render_geojson, render_svg, RenderSpec};
pub use geo::{distance_km, intra_zonal_distance, parse_dm, Coordinate};
pub use gravity::{
    aggregate, distribute, impedance_matrix, round_matrix, run_scenario, Distribution,
    GravityConfig, ImpedanceMatrix, MatrixPurpose, ODMatrix, PartitionKey, ScenarioMode,
    ScenarioRun, ScenarioSpec, Stranded,
};
pub use io::{
    export_flow_interchange, load_zones, read_od_csv, write_od_csv, LoadOptions, ZoneTable,
};
pub use matrix::SquareMatrix;
pub use metrics::{
    cross_border_share, directional_shares, scenario_delta, total_trips, DirectionalShares,
    ScenarioComparison,
};
