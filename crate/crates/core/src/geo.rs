//! Geographic coordinates and great-circle distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius (IUGG), in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Default floor applied to every impedance distance, in kilometres.
pub const DEFAULT_MIN_DISTANCE_KM: f64 = 0.1;

/// A WGS84 position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    lat: f64,
    lon: f64,
}

impl Coordinate {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::Range(format!("latitude {lat} outside [-90, 90]")));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::Range(format!("longitude {lon} outside [-180, 180]")));
        }
        Ok(Coordinate { lat, lon })
    }

    /// Builds a coordinate from two textual angles, each either decimal
    /// degrees or a degrees-minutes string with hemisphere letter.
    pub fn parse(lat: &str, lon: &str) -> Result<Self> {
        let lat_angle = parse_dm(lat)?;
        let lon_angle = parse_dm(lon)?;
        if lat_angle.axis == Some(Axis::Longitude) {
            return Err(Error::parse(lat, "E/W hemisphere given for a latitude"));
        }
        if lon_angle.axis == Some(Axis::Latitude) {
            return Err(Error::parse(lon, "N/S hemisphere given for a longitude"));
        }
        Coordinate::new(lat_angle.degrees, lon_angle.degrees)
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Latitude,
    Longitude,
}

/// A parsed angle. `axis` is known only when the text carried a hemisphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle {
    pub degrees: f64,
    pub axis: Option<Axis>,
}

/// Parses `D° M.MMM' H` (H one of N, S, E, W) into signed decimal degrees.
///
/// A plain signed decimal number is accepted as-is. The minutes mark may be
/// `'` or `′` and may be omitted.
pub fn parse_dm(text: &str) -> Result<Angle> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(Error::parse(text, "empty coordinate"));
    }
    if let Ok(degrees) = trimmed.parse::<f64>() {
        if !degrees.is_finite() {
            return Err(Error::parse(trimmed, "non-finite coordinate"));
        }
        return Ok(Angle {
            degrees,
            axis: None,
        });
    }

    let (deg_text, rest) = trimmed
        .split_once('°')
        .ok_or_else(|| Error::parse(trimmed, "expected a degree sign or a decimal number"))?;
    let deg_text = deg_text.trim();
    if deg_text.is_empty() || !deg_text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::parse(
            deg_text,
            "degrees must be an unsigned integer",
        ));
    }
    let degrees: f64 = deg_text
        .parse()
        .map_err(|_| Error::parse(deg_text, "degrees must be an unsigned integer"))?;

    let rest = rest.trim();
    let hemisphere = rest
        .chars()
        .last()
        .ok_or_else(|| Error::parse(trimmed, "missing minutes and hemisphere"))?;
    let (sign, axis) = match hemisphere {
        'N' => (1.0, Axis::Latitude),
        'S' => (-1.0, Axis::Latitude),
        'E' => (1.0, Axis::Longitude),
        'W' => (-1.0, Axis::Longitude),
        _ => {
            return Err(Error::parse(
                hemisphere.to_string(),
                "expected hemisphere N, S, E or W",
            ))
        }
    };
    let min_text = rest[..rest.len() - hemisphere.len_utf8()].trim();
    let min_text = min_text
        .strip_suffix('\'')
        .or_else(|| min_text.strip_suffix('′'))
        .unwrap_or(min_text)
        .trim();
    let minutes: f64 = match min_text.parse() {
        Ok(m) if min_text.bytes().all(|b| b.is_ascii_digit() || b == b'.') => m,
        _ => return Err(Error::parse(min_text, "minutes must be an unsigned number")),
    };
    if minutes >= 60.0 {
        return Err(Error::Range(format!("minutes {minutes} must be below 60")));
    }

    Ok(Angle {
        degrees: sign * (degrees + minutes / 60.0),
        axis: Some(axis),
    })
}

/// Haversine great-circle distance in kilometres.
pub fn distance_km(a: Coordinate, b: Coordinate) -> f64 {
    if a == b {
        return 0.0;
    }
    // Order the endpoints so the result is bit-identical in both directions.
    let (p, q) = if (a.lat, a.lon) <= (b.lat, b.lon) {
        (a, b)
    } else {
        (b, a)
    };
    let phi1 = p.lat.to_radians();
    let phi2 = q.lat.to_radians();
    let dphi = (q.lat - p.lat).to_radians();
    let dlambda = (q.lon - p.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Intra-zonal travel distance for zone `i`: half the distance to its nearest
/// distinct zone, never below `min_distance_km`.
pub fn intra_zonal_distance(i: usize, coords: &[Coordinate], min_distance_km: f64) -> Result<f64> {
    if coords.len() < 2 {
        return Err(Error::Config(
            "intra-zonal distance needs at least two zones".into(),
        ));
    }
    if i >= coords.len() {
        return Err(Error::Contract(format!(
            "zone index {i} out of bounds for {} zones",
            coords.len()
        )));
    }
    let nearest = coords
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &c)| distance_km(coords[i], c))
        .fold(f64::INFINITY, f64::min);
    Ok((nearest / 2.0).max(min_distance_km))
}
