//! Flow-map output: classed straight-line flows between zone centroids, drawn
//! as SVG on a plate carrée projection or exported as GeoJSON.
//!
//! Flows are compared on rounded magnitudes. A flow is visible when it is
//! inter-zonal, positive and at least `min_flow`. Visible flows are painted in
//! descending magnitude so the smaller ones stay on top.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::gravity::ODMatrix;
use crate::io::ZoneTable;

/// Perpendicular shift applied to each direction of a two-way pair, in px.
const PAIR_OFFSET_PX: f64 = 2.0;
const NODE_CLASSES: usize = 5;
const NODE_FILL: &str = "#1f4e79";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSpec {
    /// Ascending class boundaries in trips per year. Empty means equal
    /// intervals over the rendered matrix with `classes` classes.
    pub breaks: Vec<f64>,
    pub classes: usize,
    pub min_flow: f64,
    /// One stroke colour per class, darkest first.
    pub flow_colors: Vec<String>,
    /// One stroke width per class, in px.
    pub widths: Vec<f64>,
    /// Circle radius per node class, in px.
    pub node_radii: Vec<f64>,
    /// Lower bound of each node class on attracted trips. Empty means equal
    /// intervals from zero to the largest attracted volume.
    pub node_bounds: Vec<f64>,
    pub width: f64,
    pub height: f64,
    /// Margin on each side as a fraction of the canvas.
    pub padding: f64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            breaks: Vec::new(),
            classes: 5,
            min_flow: 1.0,
            flow_colors: ["#7f2704", "#a63603", "#d94801", "#f16913", "#fd8d3c"]
                .map(String::from)
                .to_vec(),
            widths: vec![0.75, 1.5, 3.0, 5.0, 8.0],
            node_radii: vec![3.0, 5.0, 7.5, 10.5, 14.0],
            node_bounds: Vec::new(),
            width: 960.0,
            height: 720.0,
            padding: 0.05,
        }
    }
}

fn strictly_ascending(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite()) && values.windows(2).all(|w| w[0] < w[1])
}

impl RenderSpec {
    pub fn validate(&self) -> Result<()> {
        let class_count = self.class_count();
        if !strictly_ascending(&self.breaks) {
            return Err(Error::Config(
                "render.breaks must be strictly ascending".into(),
            ));
        }
        if class_count < 2 {
            return Err(Error::Config("render needs at least 2 flow classes".into()));
        }
        if self.flow_colors.len() != class_count || self.widths.len() != class_count {
            return Err(Error::Config(format!(
                "{class_count} flow classes need as many colors and widths (got {} and {})",
                self.flow_colors.len(),
                self.widths.len()
            )));
        }
        if self.widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Config("render.widths must be positive".into()));
        }
        if !(self.min_flow >= 0.0 && self.min_flow.is_finite()) {
            return Err(Error::Config(format!(
                "render.min_flow = {} must be >= 0",
                self.min_flow
            )));
        }
        if self.node_radii.len() != NODE_CLASSES
            || self.node_radii.iter().any(|r| r.is_nan() || *r <= 0.0)
        {
            return Err(Error::Config(format!(
                "render.node_radii needs {NODE_CLASSES} positive radii"
            )));
        }
        if !self.node_bounds.is_empty()
            && (self.node_bounds.len() != NODE_CLASSES || !strictly_ascending(&self.node_bounds))
        {
            return Err(Error::Config(format!(
                "render.node_bounds needs {NODE_CLASSES} strictly ascending values"
            )));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::Config(
                "render canvas must have a positive size".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.padding) {
            return Err(Error::Config("render.padding must be in [0, 0.5)".into()));
        }
        Ok(())
    }

    fn class_count(&self) -> usize {
        if self.breaks.is_empty() {
            self.classes
        } else {
            self.breaks.len() + 1
        }
    }

    /// Class boundaries for `m`: the configured ones, or equal intervals.
    pub fn breaks_for(&self, m: &ODMatrix) -> Result<Vec<f64>> {
        if self.breaks.is_empty() {
            default_breaks(m, m, self.classes)
        } else {
            Ok(self.breaks.clone())
        }
    }
}

/// Class of each value: the number of breaks at or below it, `None` when the
/// value is below `min_flow`.
pub fn classify_flows(values: &[f64], breaks: &[f64], min_flow: f64) -> Result<Vec<Option<usize>>> {
    if !strictly_ascending(breaks) {
        return Err(Error::Config(
            "class breaks must be strictly ascending".into(),
        ));
    }
    Ok(values
        .iter()
        .map(|&v| (v >= min_flow).then(|| breaks.partition_point(|&b| b <= v)))
        .collect())
}

/// `k - 1` equal-interval boundaries from zero to the largest positive cell
/// of either matrix, so both scenarios share one legend.
pub fn default_breaks(without: &ODMatrix, with_: &ODMatrix, k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {k}")));
    }
    let max = without
        .values
        .as_slice()
        .iter()
        .chain(with_.values.as_slice())
        .copied()
        .filter(|&v| v > 0.0)
        .fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::Config(
            "cannot derive class breaks: both matrices are all zero".into(),
        ));
    }
    Ok((1..k).map(|i| max * i as f64 / k as f64).collect())
}

#[derive(Debug, Clone, Copy)]
struct Flow {
    origin: usize,
    dest: usize,
    trips: f64,
    class: usize,
}

/// Rounded matrix, visible flows and per-zone totals shared by both outputs.
struct Scene {
    rounded: Vec<f64>,
    n: usize,
    flows: Vec<Flow>,
    breaks: Vec<f64>,
}

impl Scene {
    fn build(m: &ODMatrix, zones: &ZoneTable, spec: &RenderSpec) -> Result<Self> {
        zones.ensure_matches(m)?;
        spec.validate()?;
        let breaks = if m.values.sum() > 0.0 || !spec.breaks.is_empty() {
            spec.breaks_for(m)?
        } else {
            // nothing to draw; keep a unit legend
            (1..spec.classes).map(|i| i as f64).collect()
        };
        let n = m.dim();
        let rounded: Vec<f64> = m.values.as_slice().iter().map(|v| v.round()).collect();
        let classes = classify_flows(&rounded, &breaks, spec.min_flow)?;
        let flows = rounded
            .iter()
            .zip(classes)
            .enumerate()
            .filter_map(|(k, (&trips, class))| {
                let (origin, dest) = (k / n, k % n);
                match class {
                    Some(class) if origin != dest && trips > 0.0 => Some(Flow {
                        origin,
                        dest,
                        trips,
                        class,
                    }),
                    _ => None,
                }
            })
            .collect();
        Ok(Scene {
            rounded,
            n,
            flows,
            breaks,
        })
    }

    fn total_in(&self, j: usize) -> f64 {
        (0..self.n).map(|i| self.rounded[i * self.n + j]).sum()
    }

    fn total_out(&self, i: usize) -> f64 {
        self.rounded[i * self.n..(i + 1) * self.n].iter().sum()
    }

    /// Visible flows, largest first; equal magnitudes keep origin-major order.
    fn draw_order(&self) -> Vec<Flow> {
        let mut flows = self.flows.clone();
        flows.sort_by(|a, b| b.trips.total_cmp(&a.trips));
        flows
    }
}

/// Fixed three-decimal formatting without negative zero.
fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
    out
}

/// Plate carrée mapping of the zone bounding box onto the padded canvas,
/// with one scale on both axes.
struct Projection {
    center_lon: f64,
    center_lat: f64,
    scale: f64,
    width: f64,
    height: f64,
}

impl Projection {
    fn fit(zones: &ZoneTable, spec: &RenderSpec) -> Self {
        let (mut min_lon, mut max_lon) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut min_lat, mut max_lat) = (f64::INFINITY, f64::NEG_INFINITY);
        for z in &zones.zones {
            min_lon = min_lon.min(z.coord.lon());
            max_lon = max_lon.max(z.coord.lon());
            min_lat = min_lat.min(z.coord.lat());
            max_lat = max_lat.max(z.coord.lat());
        }
        if zones.is_empty() {
            (min_lon, max_lon, min_lat, max_lat) = (0.0, 0.0, 0.0, 0.0);
        }
        let inner_w = spec.width * (1.0 - 2.0 * spec.padding);
        let inner_h = spec.height * (1.0 - 2.0 * spec.padding);
        let span_lon = (max_lon - min_lon).max(1e-9);
        let span_lat = (max_lat - min_lat).max(1e-9);
        Projection {
            center_lon: 0.5 * (min_lon + max_lon),
            center_lat: 0.5 * (min_lat + max_lat),
            scale: (inner_w / span_lon).min(inner_h / span_lat),
            width: spec.width,
            height: spec.height,
        }
    }

    fn project(&self, lat: f64, lon: f64) -> (f64, f64) {
        (
            0.5 * self.width + (lon - self.center_lon) * self.scale,
            0.5 * self.height - (lat - self.center_lat) * self.scale,
        )
    }
}

/// Renders `m` as an SVG 1.1 document. Output is byte-identical for
/// identical inputs.
pub fn render_svg(m: &ODMatrix, zones: &ZoneTable, spec: &RenderSpec) -> Result<String> {
    let scene = Scene::build(m, zones, spec)?;
    let projection = Projection::fit(zones, spec);
    let points: Vec<(f64, f64)> = zones
        .zones
        .iter()
        .map(|z| projection.project(z.coord.lat(), z.coord.lon()))
        .collect();
    let visible: HashSet<(usize, usize)> = scene.flows.iter().map(|f| (f.origin, f.dest)).collect();

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = num(spec.width),
        h = num(spec.height)
    );
    let _ = writeln!(
        svg,
        "<title>OD flows ({} / {})</title>",
        escape_xml(&m.scenario),
        m.purpose
    );
    let _ = writeln!(
        svg,
        r##"<rect width="100%" height="100%" fill="#ffffff"/>"##
    );

    let _ = writeln!(svg, r#"<g id="flows" stroke-linecap="round">"#);
    for flow in scene.draw_order() {
        let (mut x1, mut y1) = points[flow.origin];
        let (mut x2, mut y2) = points[flow.dest];
        let (dx, dy) = (x2 - x1, y2 - y1);
        let len = dx.hypot(dy);
        if visible.contains(&(flow.dest, flow.origin)) && len > 0.0 {
            // right-hand side of the direction of travel
            let (ox, oy) = (-dy / len * PAIR_OFFSET_PX, dx / len * PAIR_OFFSET_PX);
            x1 += ox;
            y1 += oy;
            x2 += ox;
            y2 += oy;
        }
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="{}" data-origin="{}" data-dest="{}" data-trips="{}" data-class="{}"/>"#,
            num(x1),
            num(y1),
            num(x2),
            num(y2),
            escape_xml(&spec.flow_colors[flow.class]),
            num(spec.widths[flow.class]),
            escape_xml(&m.zone_codes[flow.origin]),
            escape_xml(&m.zone_codes[flow.dest]),
            flow.trips as i64,
            flow.class
        );
    }
    let _ = writeln!(svg, "</g>");

    let totals_in: Vec<f64> = (0..scene.n).map(|j| scene.total_in(j)).collect();
    let node_bounds = if spec.node_bounds.is_empty() {
        let max = totals_in.iter().copied().fold(0.0, f64::max);
        (0..NODE_CLASSES)
            .map(|k| max * k as f64 / NODE_CLASSES as f64)
            .collect()
    } else {
        spec.node_bounds.clone()
    };
    let _ = writeln!(svg, r#"<g id="nodes">"#);
    for (z, (&(cx, cy), &attracted)) in zones.zones.iter().zip(points.iter().zip(&totals_in)) {
        let class = node_bounds
            .partition_point(|&b| b <= attracted)
            .saturating_sub(1);
        let _ = writeln!(
            svg,
            r##"<circle cx="{}" cy="{}" r="{}" fill="{NODE_FILL}" fill-opacity="0.75" stroke="#222222" stroke-width="0.5" data-code="{}" data-trips-in="{}"><title>{}</title></circle>"##,
            num(cx),
            num(cy),
            num(spec.node_radii[class]),
            escape_xml(&z.code),
            attracted as i64,
            escape_xml(&z.name)
        );
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(
        svg,
        r#"<g id="legend" font-family="sans-serif" font-size="11">"#
    );
    let (lx, mut ly) = (12.0, 20.0);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-weight="bold">Trips per year</text>"#,
        num(lx),
        num(ly)
    );
    let lower = std::iter::once(spec.min_flow).chain(scene.breaks.iter().copied());
    let upper = scene
        .breaks
        .iter()
        .map(|&b| Some(b))
        .chain(std::iter::once(None));
    for (class, (lo, hi)) in lower.zip(upper).enumerate() {
        ly += 16.0;
        let label = match hi {
            Some(hi) => format!("[{}, {})", num(lo), num(hi)),
            None => format!("&gt;= {}", num(lo)),
        };
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="{}"/>"#,
            num(lx),
            num(ly - 4.0),
            num(lx + 28.0),
            num(ly - 4.0),
            escape_xml(&spec.flow_colors[class]),
            num(spec.widths[class])
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">{label}</text>"#,
            num(lx + 36.0),
            num(ly)
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// GeoJSON FeatureCollection: one LineString per visible flow in origin-major
/// order, then one Point per zone.
pub fn render_geojson(m: &ODMatrix, zones: &ZoneTable, spec: &RenderSpec) -> Result<String> {
    let scene = Scene::build(m, zones, spec)?;
    let coord = |k: usize| {
        let c = zones.zones[k].coord;
        json!([c.lon(), c.lat()])
    };
    let mut features = Vec::with_capacity(scene.flows.len() + zones.len());
    for flow in &scene.flows {
        features.push(json!({
            "type": "Feature",
            "geometry": {
                "type": "LineString",
                "coordinates": [coord(flow.origin), coord(flow.dest)],
            },
            "properties": {
                "origin": m.zone_codes[flow.origin],
                "dest": m.zone_codes[flow.dest],
                "trips": flow.trips as i64,
                "class": flow.class,
            },
        }));
    }
    for (k, z) in zones.zones.iter().enumerate() {
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "Point", "coordinates": coord(k) },
            "properties": {
                "code": z.code,
                "name": z.name,
                "total_in": scene.total_in(k) as i64,
                "total_out": scene.total_out(k) as i64,
            },
        }));
    }
    let collection = json!({ "type": "FeatureCollection", "features": features });
    let mut text = serde_json::to_string_pretty(&collection)
        .map_err(|e| Error::Contract(format!("GeoJSON serialisation failed: {e}")))?;
    text.push('\n');
    Ok(text)
}
