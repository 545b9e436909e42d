use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use odflow_core::io::FlowInterchange;
use odflow_core::{
    calibrate_beta, cross_border_share, default_breaks, directional_shares,
    export_flow_interchange, load_zones, read_od_csv, render_geojson, render_svg, round_matrix,
    run_scenario, scenario_delta, write_od_csv, DirectionalShares, ODMatrix, Purpose, ScenarioMode,
    ZoneTable,
};
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::{styling_enabled, Command, ConfigArgs};

pub fn run(command: Command, args: &ConfigArgs, out: &mut dyn Write) -> Result<ExitCode> {
    let mut overrides = args.set.clone();
    match &command {
        Command::Compute {
            scenario,
            beta,
            school_days,
            market_days,
            ..
        } => {
            if let Some(s) = scenario {
                overrides.push(("scenario.mode".into(), mode_value(*s)));
            }
            push_number(&mut overrides, "gravity.beta", *beta);
            push_number(&mut overrides, "rates.school_days", *school_days);
            push_number(&mut overrides, "rates.market_days", *market_days);
        }
        Command::Calibrate {
            scenario, range, ..
        } => {
            if let Some(s) = scenario {
                overrides.push(("scenario.mode".into(), mode_value(*s)));
            }
            if let Some((lo, hi)) = range {
                overrides.push(("calibrate.lo".into(), json!(lo)));
                overrides.push(("calibrate.hi".into(), json!(hi)));
            }
        }
        Command::Render {
            breaks, min_flow, ..
        } => {
            if let Some(b) = breaks {
                overrides.push(("render.breaks".into(), json!(b)));
            }
            push_number(&mut overrides, "render.min_flow", *min_flow);
        }
        _ => {}
    }
    let config = RunConfig::load(args.config.as_deref(), &overrides)?;

    match command {
        Command::Validate { zones } => validate(&zones, &config, out),
        Command::Demand { zones } => demand(&zones, &config, out),
        Command::Compute {
            zones, out: dir, ..
        } => compute(&zones, &dir, &config, out),
        Command::Compare {
            without,
            with_,
            zones,
            json,
        } => compare(&without, &with_, &zones, json, &config, out),
        Command::Calibrate {
            zones,
            observed,
            json,
            ..
        } => calibrate(&zones, &observed, json, &config, out),
        Command::Render {
            od,
            zones,
            out: svg_path,
            geojson,
            shared_with,
            ..
        } => render(
            &od,
            &zones,
            &svg_path,
            geojson.as_deref(),
            shared_with.as_deref(),
            &config,
            out,
        ),
        Command::ExportFlows {
            od,
            zones,
            out_dir,
            min_flow,
        } => export_flows(&od, &zones, &out_dir, min_flow, &config, out),
    }
    .map(|()| ExitCode::SUCCESS)
}

fn mode_value(s: crate::ScenarioArg) -> Value {
    match ScenarioMode::from(s) {
        ScenarioMode::Barrier => json!("barrier"),
        ScenarioMode::Connected => json!("connected"),
    }
}

fn push_number(overrides: &mut Vec<(String, Value)>, key: &str, value: Option<f64>) {
    if let Some(v) = value {
        overrides.push((key.into(), json!(v)));
    }
}

fn zones_from(path: &Path, config: &RunConfig) -> Result<ZoneTable> {
    Ok(load_zones(path, &config.demand)?)
}

fn validate(path: &Path, config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let table = zones_from(path, config)?;
    for w in &table.warnings {
        writeln!(out, "WARNING: {w}")?;
    }
    for (k, z) in table.zones.iter().enumerate() {
        for (field, value) in [("country", &z.country), ("subregion", &z.subregion)] {
            if value.trim().is_empty() {
                writeln!(
                    out,
                    "WARNING: row {}: zone {} has an empty {field}",
                    k + 2,
                    z.code
                )?;
            }
        }
    }
    writeln!(out, "OK: {} zones in {}", table.len(), path.display())?;
    Ok(())
}

fn demand(path: &Path, config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let table = zones_from(path, config)?;
    let vectors: Vec<_> = Purpose::ALL
        .iter()
        .map(|&p| odflow_core::productions(&table.zones, &config.rates, p))
        .collect();
    write!(out, "code")?;
    for p in Purpose::ALL {
        write!(out, ",{p}")?;
    }
    writeln!(out, ",total")?;
    for (i, z) in table.zones.iter().enumerate() {
        write!(out, "{}", z.code)?;
        let mut total = 0.0;
        for v in &vectors {
            total += v.values[i];
            write!(out, ",{:.3}", v.values[i])?;
        }
        writeln!(out, ",{total:.3}")?;
    }
    Ok(())
}

fn compute(zones: &Path, dir: &Path, config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let table = zones_from(zones, config)?;
    let run = run_scenario(
        &table.zones,
        &config.rates,
        &config.gravity,
        &config.scenario,
    )?;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for d in &run.per_purpose {
        write_od_csv(&d.od, dir.join(format!("od_{}.csv", d.od.purpose)))?;
    }
    write_od_csv(&run.aggregate, dir.join("od_aggregate.csv"))?;

    let mut report = String::from("purpose,code,lost_trips\n");
    for s in run.stranded() {
        report.push_str(&format!("{},{},{:.3}\n", s.purpose, s.code, s.lost));
    }
    let stranded_path = dir.join("stranded.csv");
    fs::write(&stranded_path, report)
        .with_context(|| format!("cannot write {}", stranded_path.display()))?;

    let lost: f64 = run.stranded().map(|s| s.lost).sum();
    writeln!(out, "scenario: {}", config.scenario.label())?;
    writeln!(out, "beta: {}", config.gravity.beta)?;
    writeln!(
        out,
        "total_trips: {}",
        thousands(odflow_core::total_trips(&run.aggregate))
    )?;
    writeln!(
        out,
        "stranded: {} zone-purposes, {} trips",
        run.stranded().count(),
        thousands(lost)
    )?;
    writeln!(out, "output: {}", dir.display())?;
    Ok(())
}

/// Integer with comma thousands separators.
fn thousands(v: f64) -> String {
    let n = v.round() as i64;
    let digits = n.unsigned_abs().to_string();
    let mut grouped = String::new();
    for (k, ch) in digits.chars().enumerate() {
        if k > 0 && (digits.len() - k).is_multiple_of(3) {
            grouped.push(',');
        }
        grouped.push(ch);
    }
    if n < 0 {
        format!("-{grouped}")
    } else {
        grouped
    }
}

fn share_value(v: Option<f64>) -> Value {
    v.map_or(Value::Null, |v| json!(v))
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{:.2}%", 100.0 * v))
}

fn compare(
    without_path: &Path,
    with_path: &Path,
    zones: &Path,
    as_json: bool,
    config: &RunConfig,
    out: &mut dyn Write,
) -> Result<()> {
    let table = zones_from(zones, config)?;
    let without = read_od_csv(without_path)?;
    let with_ = read_od_csv(with_path)?;
    let cmp = scenario_delta(&without, &with_)?;
    let include = config.metrics.cross_border_include_intrazonal;
    let border_without = cross_border_share(&without, &table.zones, include)?;
    let border_with = cross_border_share(&with_, &table.zones, include)?;
    let dir_without = directional_shares(&without, &table.zones)?;
    let dir_with = directional_shares(&with_, &table.zones)?;

    if as_json {
        let mut report = Map::new();
        report.insert("total_without".into(), json!(cmp.total_without));
        report.insert("total_with".into(), json!(cmp.total_with));
        report.insert("delta".into(), json!(cmp.delta));
        report.insert("increase_vs_without".into(), json!(cmp.increase_vs_without));
        report.insert("increase_vs_with".into(), json!(cmp.increase_vs_with));
        report.insert("cross_border_share_without".into(), json!(border_without));
        report.insert("cross_border_share_with".into(), json!(border_with));
        for (suffix, d) in [("without", dir_without), ("with", dir_with)] {
            for (key, v) in directions(&d) {
                report.insert(format!("{key}_{suffix}"), share_value(v));
            }
        }
        writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&Value::Object(report))?
        )?;
        return Ok(());
    }

    let heading = |text: &str| {
        if styling_enabled() {
            format!("\x1b[1m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    };
    writeln!(out, "{}", heading("scenario comparison"))?;
    writeln!(
        out,
        "  total_without        {:>12}",
        thousands(cmp.total_without)
    )?;
    writeln!(
        out,
        "  total_with           {:>12}",
        thousands(cmp.total_with)
    )?;
    writeln!(out, "  delta                {:>12}", thousands(cmp.delta))?;
    writeln!(
        out,
        "  increase_vs_without  {:>12}",
        pct(Some(cmp.increase_vs_without))
    )?;
    writeln!(
        out,
        "  increase_vs_with     {:>12}",
        pct(Some(cmp.increase_vs_with))
    )?;
    writeln!(out, "{}", heading("cross-border share"))?;
    writeln!(
        out,
        "  without              {:>12}",
        pct(Some(border_without))
    )?;
    writeln!(out, "  with                 {:>12}", pct(Some(border_with)))?;
    for (label, d) in [("without", dir_without), ("with", dir_with)] {
        writeln!(out, "{}", heading(&format!("directional shares ({label})")))?;
        for (key, v) in directions(&d) {
            writeln!(out, "  {key:<20} {:>12}", pct(v))?;
        }
    }
    Ok(())
}

fn directions(d: &DirectionalShares) -> [(&'static str, Option<f64>); 4] {
    [
        ("west_to_east", d.west_to_east),
        ("east_to_west", d.east_to_west),
        ("south_to_north", d.south_to_north),
        ("north_to_south", d.north_to_south),
    ]
}

fn calibrate(
    zones: &Path,
    observed: &Path,
    as_json: bool,
    config: &RunConfig,
    out: &mut dyn Write,
) -> Result<()> {
    let table = zones_from(zones, config)?;
    let observed = read_od_csv(observed)?;
    let productions: Vec<_> = Purpose::ALL
        .iter()
        .map(|&p| odflow_core::productions(&table.zones, &config.rates, p))
        .collect();
    let attractions: Vec<_> = Purpose::ALL
        .iter()
        .map(|&p| odflow_core::attraction_vector(&table.zones, p))
        .collect();
    let result = calibrate_beta(
        &observed,
        &table.zones,
        &productions,
        &attractions,
        &config.scenario,
        config.gravity.min_distance_km,
        &config.calibrate.search(),
    )?;
    if as_json {
        writeln!(out, "{}", serde_json::to_string_pretty(&result)?)?;
    } else {
        writeln!(out, "beta_hat: {:.6}", result.beta_hat)?;
        writeln!(out, "objective: {:.6e}", result.objective)?;
        writeln!(out, "evaluations: {}", result.evaluations)?;
        writeln!(
            out,
            "search_range: {}:{}",
            result.search_range.0, result.search_range.1
        )?;
    }
    Ok(())
}

fn render(
    od: &Path,
    zones: &Path,
    svg_path: &Path,
    geojson_path: Option<&Path>,
    shared_with: Option<&Path>,
    config: &RunConfig,
    out: &mut dyn Write,
) -> Result<()> {
    let table = zones_from(zones, config)?;
    let m = read_od_csv(od)?;
    let mut spec = config.render.clone();
    if let Some(other) = shared_with {
        if !spec.breaks.is_empty() {
            bail!("--shared-with derives class breaks and cannot be combined with explicit breaks");
        }
        spec.breaks = default_breaks(&m, &read_od_csv(other)?, spec.classes)?;
    }
    let svg = render_svg(&m, &table, &spec)?;
    write_text(svg_path, &svg)?;
    writeln!(out, "wrote {}", svg_path.display())?;
    if let Some(path) = geojson_path {
        write_text(path, &render_geojson(&m, &table, &spec)?)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn export_flows(
    od: &Path,
    zones: &Path,
    out_dir: &Path,
    min_flow: f64,
    config: &RunConfig,
    out: &mut dyn Write,
) -> Result<()> {
    let table = zones_from(zones, config)?;
    let m: ODMatrix = round_matrix(&read_od_csv(od)?);
    let fx: FlowInterchange = export_flow_interchange(&m, &table, min_flow)?;
    let (nodes, flows) = fx.write_to(out_dir)?;
    writeln!(out, "wrote {} ({} nodes)", nodes.display(), table.len())?;
    writeln!(out, "wrote {} ({} flows)", flows.display(), fx.flow_count)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
