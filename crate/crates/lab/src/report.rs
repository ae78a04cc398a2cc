//! Report emission: `report.json`, per-experiment CSV tables, dumps and a
//! separate `timing.json` (wall-clock numbers would break byte stability).

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::io::{fmt_float, write_file};
use crate::runner::{Results, RunOutput, RunReport};

/// Column order of the density table.
pub const DENSITY_COLUMNS: [&str; 11] =
    ["n", "r_n", "inf_count", "sup_count", "measure", "I_n", "J_n", "lhs", "rhs", "margin", "pass"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

fn table(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// `(file name, contents)` of the CSV tables for a report.
pub fn csv_tables(report: &RunReport) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    match &report.results {
        Results::Geometry(g) => {
            let rows = g
                .growth
                .radii
                .iter()
                .zip(&g.growth.volumes)
                .map(|(r, v)| vec![fmt_float(*r), fmt_float(*v), fmt_float(g.growth.predict(*r))])
                .collect();
            out.push(("growth.csv".into(), table(&["r", "volume", "fit"], rows)?));
            let rows = g
                .folner
                .iter()
                .map(|f| vec![f.n.to_string(), fmt_float(f.radius), fmt_float(f.measure), fmt_float(f.ratio)])
                .collect();
            out.push(("folner.csv".into(), table(&["n", "r_n", "measure", "ratio"], rows)?));
            if let Some(a) = &g.annular {
                let rows = a
                    .samples
                    .iter()
                    .map(|s| vec![fmt_float(s.r), fmt_float(s.s), fmt_float(s.ratio), fmt_float(a.c_hat * (s.s / s.r).powf(a.delta_hat))])
                    .collect();
                out.push(("annulus.csv".into(), table(&["r", "s", "ratio", "envelope"], rows)?));
            }
        }
        Results::RepCheck(r) => {
            let rows = r
                .dimension
                .iter()
                .map(|d| vec![d.dim.to_string(), fmt_float(d.sum), fmt_float(d.expected), fmt_float(d.deviation)])
                .collect();
            out.push(("dimension.csv".into(), table(&["dim", "sum", "expected", "deviation"], rows)?));
        }
        Results::Frame(f) => {
            let rows = f
                .instances
                .iter()
                .map(|i| {
                    vec![
                        i.label.clone(),
                        i.size.to_string(),
                        fmt_float(i.bounds.a),
                        fmt_float(i.bounds.b),
                        format!("{:?}", i.bounds.kind),
                        opt(i.bounds.condition_number),
                        i.separation.rel_sep.to_string(),
                        i.bessel.as_ref().map(|b| b.cover_count.to_string()).unwrap_or_default(),
                        i.bessel.as_ref().map(|b| b.pass.to_string()).unwrap_or_default(),
                    ]
                })
                .collect();
            out.push((
                "bounds.csv".into(),
                table(&["instance", "size", "A", "B", "kind", "condition_number", "rel_sep", "cover", "bessel_pass"], rows)?,
            ));
        }
        Results::Density(d) => {
            let c = &d.counting;
            let rows = c
                .records
                .iter()
                .zip(&c.integrals_i)
                .zip(&c.integrals_j)
                .zip(&c.checks)
                .map(|(((rec, i), j), chk)| {
                    vec![
                        rec.n.to_string(),
                        fmt_float(rec.radius),
                        rec.inf_count.to_string(),
                        rec.sup_count.to_string(),
                        fmt_float(rec.measure),
                        fmt_float(i.value),
                        fmt_float(j.value),
                        fmt_float(chk.lhs),
                        fmt_float(chk.rhs),
                        fmt_float(chk.margin),
                        chk.pass.to_string(),
                    ]
                })
                .collect();
            let header = serde_json::json!({
                "experiment": report.experiment,
                "seed": report.config.seed,
                "regime": d.regime,
                "rep": report.config.rep,
                "density": report.config.density,
                "constant": c.constant,
                "cover_constant": c.cover_constant,
                "bounds": c.bounds,
            });
            let mut text = format!("# {}\n", serde_json::to_string(&header)?);
            text.push_str(&table(&DENSITY_COLUMNS, rows)?);
            out.push(("density.csv".into(), text));
        }
        Results::Hole(h) => {
            let rows = h
                .experiments
                .iter()
                .map(|e| {
                    vec![
                        fmt_float(e.hole_radius),
                        fmt_float(e.bounds.a),
                        fmt_float(e.bounds.b),
                        format!("{:?}", e.bounds.kind),
                        opt(e.theorem_radius),
                        opt(e.check.as_ref().map(|c| c.margin)),
                        (!e.counterexample).to_string(),
                    ]
                })
                .collect();
            out.push(("holes.csv".into(), table(&["r", "A", "B", "kind", "R", "margin", "pass"], rows)?));
        }
    }
    let rows = report
        .checks
        .iter()
        .map(|c| vec![c.name.clone(), c.pass.to_string(), c.diagnostic.to_string(), fmt_float(c.value), fmt_float(c.threshold)])
        .collect();
    out.push(("checks.csv".into(), table(&["check", "pass", "diagnostic", "value", "threshold"], rows)?));
    Ok(out)
}

/// Writes the report in the requested formats plus timings and dumps; returns
/// the written paths.
pub fn emit_report(output: &RunOutput, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut written = Vec::new();
    if formats.contains(&Format::Json) {
        let path = dir.join("report.json");
        write_file(&path, &(serde_json::to_string_pretty(&output.report)? + "\n"))?;
        written.push(path);
    }
    if formats.contains(&Format::Csv) {
        for (name, text) in csv_tables(&output.report)? {
            let path = dir.join(name);
            write_file(&path, &text)?;
            written.push(path);
        }
        for a in &output.artifacts {
            let path = dir.join(&a.name);
            write_file(&path, &a.contents)?;
            written.push(path);
        }
    }
    let path = dir.join("timing.json");
    write_file(&path, &(serde_json::to_string_pretty(&output.timings)? + "\n"))?;
    written.push(path);
    Ok(written)
}
