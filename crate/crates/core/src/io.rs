//! Zone table ingestion, OD matrix CSV files and the two-file flow
//! interchange export (nodes + flows) read by desktop flow-mapping tools.
//!
//! All files use `,` separators, `.` decimals and LF line endings.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::demand::{Facilities, Purpose, Zone};
use crate::error::{Error, Result};
use crate::geo::Coordinate;
use crate::gravity::{MatrixPurpose, ODMatrix};
use crate::matrix::SquareMatrix;

/// Top-left cell of an OD CSV file.
pub const OD_CORNER: &str = "O\\D";

/// Scenario label given to matrices read back from CSV.
pub const FILE_SCENARIO: &str = "file";

const BASE_COLUMNS: [&str; 6] = ["code", "name", "country", "subregion", "lat", "lon"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadOptions {
    /// Female share used to split rows that only carry `pop_total`.
    pub female_share_default: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            female_share_default: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneTable {
    pub zones: Vec<Zone>,
    pub source_path: String,
    pub warnings: Vec<String>,
}

impl ZoneTable {
    pub fn codes(&self) -> Vec<String> {
        self.zones.iter().map(|z| z.code.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    pub(crate) fn ensure_matches(&self, m: &ODMatrix) -> Result<()> {
        if self.zones.len() != m.dim()
            || self
                .zones
                .iter()
                .zip(&m.zone_codes)
                .any(|(z, c)| &z.code != c)
        {
            return Err(Error::Contract(format!(
                "OD matrix zones do not match the zone table {} (same codes in the same order required)",
                self.source_path
            )));
        }
        Ok(())
    }
}

pub fn load_zones(path: impl AsRef<Path>, options: &LoadOptions) -> Result<ZoneTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_zones(&text, &path.display().to_string(), options)
}

/// Parses zone CSV text. `source` is only used for diagnostics.
pub fn parse_zones(text: &str, source: &str, options: &LoadOptions) -> Result<ZoneTable> {
    let share = options.female_share_default;
    if !(0.0..=1.0).contains(&share) {
        return Err(Error::Config(format!(
            "female_share_default = {share} is not in [0, 1]"
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(k, h)| (h.trim(), k))
        .collect();

    let header_error = |message: String| Error::Validation { row: 1, message };
    for name in BASE_COLUMNS
        .iter()
        .copied()
        .chain(Purpose::ALL.iter().map(|p| p.as_str()))
    {
        if !column.contains_key(name) {
            return Err(header_error(format!("missing required column `{name}`")));
        }
    }
    let has_pair = column.contains_key("pop_female") && column.contains_key("pop_male");
    if !has_pair && !column.contains_key("pop_total") {
        return Err(header_error(
            "missing population columns: need `pop_female` and `pop_male`, or `pop_total`".into(),
        ));
    }

    let mut warnings = Vec::new();
    let known: HashSet<&str> = BASE_COLUMNS
        .iter()
        .copied()
        .chain(Purpose::ALL.iter().map(|p| p.as_str()))
        .chain(["pop_female", "pop_male", "pop_total"])
        .collect();
    for h in headers.iter().map(str::trim) {
        if !known.contains(h) {
            warnings.push(format!("row 1: ignoring unknown column `{h}`"));
        }
    }

    let mut zones = Vec::new();
    let mut seen = HashSet::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 2;
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Validation {
                row,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let field = |name: &str| record[column[name]].trim();
        let invalid = |message: String| Error::Validation { row, message };

        let code = field("code");
        if code.is_empty() {
            return Err(invalid("empty zone code".into()));
        }
        if !seen.insert(code.to_string()) {
            return Err(invalid(format!("duplicate zone code `{code}`")));
        }
        let coord = Coordinate::parse(field("lat"), field("lon"))
            .map_err(|e| invalid(format!("unparsable coordinate: {e}")))?;
        let count = |name: &str| parse_count(field(name), name).map_err(&invalid);

        let (pop_female, pop_male) = if has_pair {
            (count("pop_female")?, count("pop_male")?)
        } else {
            let total = count("pop_total")?;
            let female = (total as f64 * share).round() as u64;
            warnings.push(format!(
                "row {row}: zone {code} has only pop_total; split with female share {share}"
            ));
            (female, total - female)
        };
        let mut facilities = Facilities::default();
        for purpose in Purpose::ALL {
            facilities.set(purpose, count(purpose.as_str())?);
        }

        zones.push(Zone {
            code: code.to_string(),
            name: field("name").to_string(),
            country: field("country").to_string(),
            subregion: field("subregion").to_string(),
            coord,
            pop_female,
            pop_male,
            facilities,
        });
    }

    Ok(ZoneTable {
        zones,
        source_path: source.to_string(),
        warnings,
    })
}

fn parse_count(text: &str, column: &str) -> std::result::Result<u64, String> {
    text.parse::<u64>().map_err(|_| {
        if text.parse::<i64>().is_ok_and(|v| v < 0) {
            format!("negative count {text} in `{column}`")
        } else {
            format!("`{column}` value `{text}` is not a non-negative integer")
        }
    })
}

/// Integer rendering of a rounded cell.
fn cell_text(v: f64) -> String {
    format!("{}", v.round() as i64)
}

/// Quotes a field only when it contains a separator, quote or line break.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// OD matrix as CSV text with rounded integer cells.
pub fn od_csv_string(m: &ODMatrix) -> String {
    let mut out = String::from(OD_CORNER);
    for code in &m.zone_codes {
        out.push(',');
        out.push_str(&csv_field(code));
    }
    out.push('\n');
    for (code, row) in m.zone_codes.iter().zip(m.values.rows()) {
        out.push_str(&csv_field(code));
        for &v in row {
            out.push(',');
            out.push_str(&cell_text(v));
        }
        out.push('\n');
    }
    out
}

pub fn write_od_csv(m: &ODMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, od_csv_string(m)).map_err(|e| Error::io(path, e))
}

pub fn read_od_csv(path: impl AsRef<Path>) -> Result<ODMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_od_csv(&text)
}

/// Parses OD CSV text. Row labels must repeat the header codes in order.
pub fn parse_od_csv(text: &str) -> Result<ODMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| Error::parse("", "empty OD file"))??;
    let corner = header.get(0).unwrap_or("").trim();
    if corner != OD_CORNER {
        return Err(Error::parse(
            corner,
            format!("row 1, column 1: expected `{OD_CORNER}`"),
        ));
    }
    let codes: Vec<String> = header
        .iter()
        .skip(1)
        .map(|c| c.trim().to_string())
        .collect();
    let n = codes.len();
    let mut unique = HashSet::new();
    if let Some(dup) = codes.iter().find(|c| !unique.insert(c.as_str())) {
        return Err(Error::parse(dup.as_str(), "row 1: duplicate zone code"));
    }

    let mut values = SquareMatrix::zeros(n);
    let mut rows = 0;
    for (k, record) in records.enumerate() {
        let record = record?;
        let row = k + 2;
        if rows == n {
            return Err(Error::parse(
                record.get(0).unwrap_or(""),
                format!("row {row}: more rows than the {n} header columns"),
            ));
        }
        if record.len() != n + 1 {
            return Err(Error::parse(
                record.get(0).unwrap_or(""),
                format!(
                    "row {row}: expected {} cells, found {}",
                    n + 1,
                    record.len()
                ),
            ));
        }
        let label = record[0].trim();
        if label != codes[rows] {
            let message = if codes.iter().any(|c| c == label) {
                format!(
                    "row {row}, column 1: row code out of order, expected `{}`",
                    codes[rows]
                )
            } else {
                format!("row {row}, column 1: unknown zone code")
            };
            return Err(Error::parse(label, message));
        }
        for (j, cell) in record.iter().skip(1).enumerate() {
            let cell = cell.trim();
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    Error::parse(
                        cell,
                        format!("row {row}, column {}: non-numeric cell", j + 2),
                    )
                })?;
            if v < 0.0 {
                return Err(Error::parse(
                    cell,
                    format!("row {row}, column {}: negative trip count", j + 2),
                ));
            }
            values[(rows, j)] = v;
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::parse(
            "",
            format!("matrix is not square: {rows} rows for {n} columns"),
        ));
    }
    ODMatrix::new(codes, MatrixPurpose::Aggregate, FILE_SCENARIO, values)
}

/// Node and flow tables of the flow interchange format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowInterchange {
    /// `Code,Name,Lat,Lon`, one row per zone in table order.
    pub nodes: String,
    /// `Origin,Dest,Magnitude`, origin-major, rounded magnitudes.
    pub flows: String,
    pub flow_count: usize,
}

impl FlowInterchange {
    /// Writes `nodes.csv` and `flows.csv` into `dir`, returning both paths.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let nodes = dir.join("nodes.csv");
        let flows = dir.join("flows.csv");
        fs::write(&nodes, &self.nodes).map_err(|e| Error::io(&nodes, e))?;
        fs::write(&flows, &self.flows).map_err(|e| Error::io(&flows, e))?;
        Ok((nodes, flows))
    }
}

/// Builds the interchange tables. Cells whose rounded magnitude is at least
/// `min_flow` are listed, intra-zonal cells included.
pub fn export_flow_interchange(
    m: &ODMatrix,
    zones: &ZoneTable,
    min_flow: f64,
) -> Result<FlowInterchange> {
    if min_flow.is_nan() || min_flow < 0.0 {
        return Err(Error::Config(format!("min_flow = {min_flow} must be >= 0")));
    }
    zones.ensure_matches(m)?;

    let mut nodes = String::from("Code,Name,Lat,Lon\n");
    for z in &zones.zones {
        let _ = writeln!(
            nodes,
            "{},{},{},{}",
            csv_field(&z.code),
            csv_field(&z.name),
            z.coord.lat(),
            z.coord.lon()
        );
    }

    let mut flows = String::from("Origin,Dest,Magnitude\n");
    let mut flow_count = 0;
    for (i, j, v) in m.values.cells() {
        let magnitude = v.round();
        if magnitude >= min_flow {
            let _ = writeln!(
                flows,
                "{},{},{}",
                csv_field(&m.zone_codes[i]),
                csv_field(&m.zone_codes[j]),
                cell_text(magnitude)
            );
            flow_count += 1;
        }
    }
    Ok(FlowInterchange {
        nodes,
        flows,
        flow_count,
    })
}
