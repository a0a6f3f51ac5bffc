//! Output files: `result.json`, the flat `results.csv`, and per-path CSVs.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every finite `f64` exactly.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use reflex_core::ldp::McEstimate;
use reflex_core::skeleton::SkeletonSolution;
use reflex_core::{Grid, ReflectedPath};

use crate::error::RunError;
use crate::experiment::{ExperimentResult, ResultDocument};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn csv_err(path: &Path, e: csv::Error) -> RunError {
    RunError::Document(format!("{}: {e}", path.display()))
}

/// Writes a path as `t, x_1..x_d, k_1..k_d, tv` where `k` is the cumulative
/// local time, preceded by `# key: value` metadata lines.
pub fn write_path_csv(path: &Path, z: &ReflectedPath, meta: &[(&str, String)]) -> Result<(), RunError> {
    let mut file = BufWriter::new(File::create(path).map_err(|e| RunError::io(path.display().to_string(), e))?);
    for (k, v) in meta {
        writeln!(file, "# {k}: {v}").map_err(|e| RunError::io(path.display().to_string(), e))?;
    }
    let d = z.dim();
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("x_{i}")));
    header.extend((1..=d).map(|i| format!("k_{i}")));
    header.push("tv".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let k = z.cumulative_local_time();
    for (j, t) in z.state.grid.times().iter().enumerate() {
        let mut row = vec![fmt_f64(*t)];
        row.extend(z.state.point(j).iter().map(|v| fmt_f64(*v)));
        row.extend(k[j * d..(j + 1) * d].iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(z.total_variation[j]));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| RunError::io(path.display().to_string(), e))
}

/// Reads a file written by [`write_path_csv`]. Times, states and total
/// variation are restored exactly; local-time increments are recovered by
/// differencing the cumulative columns.
pub fn read_path_csv(path: &Path) -> Result<ReflectedPath, RunError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(|e| csv_err(path, e))?;
    let cols = r.headers().map_err(|e| csv_err(path, e))?.len();
    if cols < 4 || (cols - 2) % 2 != 0 {
        return Err(RunError::Document(format!("{}: unexpected column count {cols}", path.display())));
    }
    let d = (cols - 2) / 2;
    let (mut times, mut x, mut k, mut tv) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| RunError::Document(format!("{}: {e}", path.display())))?;
        times.push(vals[0]);
        x.extend_from_slice(&vals[1..=d]);
        k.extend_from_slice(&vals[d + 1..=2 * d]);
        tv.push(vals[2 * d + 1]);
    }
    let steps = times.len().saturating_sub(1);
    let dyadic = steps
        .is_power_of_two()
        .then(|| Grid::try_dyadic(steps.trailing_zeros()).ok())
        .flatten()
        .filter(|g| g.times() == times.as_slice());
    let grid = match dyadic {
        Some(g) => g,
        None => Grid::from_times(times)?,
    };
    let mut local_time = vec![0.0; k.len()];
    for j in 1..tv.len() {
        for i in 0..d {
            local_time[j * d + i] = k[j * d + i] - k[(j - 1) * d + i];
        }
    }
    Ok(ReflectedPath { state: reflex_core::Path::new(grid, d, x)?, local_time, total_variation: tv })
}

fn skeleton_meta(s: &SkeletonSolution) -> Vec<(&'static str, String)> {
    vec![
        (
            "method",
            serde_json::to_value(s.method).map(|v| v.as_str().unwrap_or_default().to_string()).unwrap_or_default(),
        ),
        ("iterations_or_level", s.iterations_or_level.to_string()),
        ("residual", fmt_opt(s.residual)),
        ("action", fmt_f64(s.control.action())),
    ]
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }
}

fn estimate_cells(e: &McEstimate) -> Vec<String> {
    vec![
        fmt_f64(e.epsilon),
        e.n_paths.to_string(),
        e.hits.to_string(),
        fmt_f64(e.p_hat),
        fmt_f64(e.std_err),
        fmt_opt(e.slope),
        fmt_opt(e.slope_err),
    ]
}

const ESTIMATE_COLS: [&str; 7] = ["epsilon", "n_paths", "hits", "p_hat", "std_err", "slope", "slope_err"];

fn coords(x: &[f64]) -> String {
    x.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" ")
}

fn flat_table(doc: &ResultDocument) -> Table {
    match &doc.result {
        ExperimentResult::Simulate { epsilon, level, paths, .. } => {
            let mut t = Table::new(&[
                "path_index",
                "epsilon",
                "level",
                "final_state",
                "total_local_time",
                "max_excursion",
                "pushes",
            ]);
            for p in paths {
                t.rows.push(vec![
                    p.path_index.to_string(),
                    fmt_f64(*epsilon),
                    level.to_string(),
                    coords(&p.final_state),
                    fmt_f64(p.total_local_time),
                    fmt_f64(p.max_excursion),
                    p.pushes.to_string(),
                ]);
            }
            t
        }
        ExperimentResult::Skeleton(s) => {
            let mut t =
                Table::new(&["method", "level", "iterations", "residual", "action", "total_local_time", "sup_diff"]);
            if let Some(p) = &s.picard {
                t.rows.push(vec![
                    "picard".into(),
                    p.z.state.grid.level().map(|l| l.to_string()).unwrap_or_default(),
                    p.iterations_or_level.to_string(),
                    fmt_opt(p.residual),
                    fmt_f64(s.action),
                    fmt_f64(p.z.total_local_time()),
                    fmt_opt(s.sup_difference),
                ]);
            }
            if let Some(e) = &s.euler {
                t.rows.push(vec![
                    "euler".into(),
                    e.iterations_or_level.to_string(),
                    String::new(),
                    String::new(),
                    fmt_f64(s.action),
                    fmt_f64(e.z.total_local_time()),
                    fmt_opt(s.sup_difference),
                ]);
            }
            for g in &s.convergence {
                t.rows.push(vec![
                    "euler-gap".into(),
                    g.level.to_string(),
                    String::new(),
                    String::new(),
                    fmt_f64(s.action),
                    String::new(),
                    fmt_f64(g.sup_diff),
                ]);
            }
            t
        }
        ExperimentResult::Rate { cases } => {
            let mut t =
                Table::new(&["case", "x0", "value", "constraint_violation", "feasible", "evaluations", "limsup_value"]);
            for (i, c) in cases.iter().enumerate() {
                t.rows.push(vec![
                    i.to_string(),
                    coords(&c.x0),
                    c.result.value.map(fmt_f64).unwrap_or_else(|| "inf".into()),
                    fmt_f64(c.result.constraint_violation),
                    c.result.feasible.to_string(),
                    c.result.trace.evaluations.to_string(),
                    c.limsup.as_ref().map(|l| l.value.map(fmt_f64).unwrap_or_else(|| "inf".into())).unwrap_or_default(),
                ]);
            }
            t
        }
        ExperimentResult::LdpCurve(c) => {
            let mut t = Table::new(&[&ESTIMATE_COLS[..], &["prediction"]].concat());
            let pred = c.prediction.as_ref().and_then(|p| p.value);
            for e in &c.estimates {
                let mut row = estimate_cells(e);
                row.push(fmt_opt(pred));
                t.rows.push(row);
            }
            t
        }
        ExperimentResult::ExpApprox(x) => {
            let mut t = Table::new(&[
                "level",
                "epsilon",
                "delta",
                "n_paths",
                "hits",
                "p_hat",
                "std_err",
                "mean_sup_diff",
                "max_sup_diff",
            ]);
            for r in &x.rows {
                t.rows.push(vec![
                    r.level.to_string(),
                    fmt_f64(x.epsilon),
                    fmt_f64(x.delta),
                    r.n_paths.to_string(),
                    r.hits.to_string(),
                    fmt_f64(r.p_hat),
                    fmt_f64(r.std_err),
                    fmt_f64(r.mean_sup_diff),
                    fmt_f64(r.max_sup_diff),
                ]);
            }
            t
        }
        ExperimentResult::Anticipated(a) => {
            let mut t = Table::new(&[&["arm"][..], &ESTIMATE_COLS, &["prediction"]].concat());
            let pred = a.prediction.as_ref().and_then(|p| p.value);
            for r in &a.rows {
                for (arm, e) in [("fixed", &r.fixed), ("shifted", &r.shifted)] {
                    let mut row = vec![arm.to_string()];
                    row.extend(estimate_cells(e));
                    row.push(fmt_opt(pred));
                    t.rows.push(row);
                }
            }
            t
        }
        ExperimentResult::Uniform(u) => {
            let mut t = Table::new(&[&["point", "x0"][..], &ESTIMATE_COLS, &["prediction"]].concat());
            for (i, p) in u.points.iter().enumerate() {
                let mut row = vec![i.to_string(), coords(&p.x0)];
                row.extend(estimate_cells(&p.estimate));
                row.push(fmt_opt(p.prediction));
                t.rows.push(row);
            }
            t
        }
    }
}

pub fn write_flat_csv(path: &Path, doc: &ResultDocument) -> Result<(), RunError> {
    let table = flat_table(doc);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(&table.header).map_err(|e| csv_err(path, e))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| RunError::io(path.display().to_string(), e))
}

pub fn to_json(doc: &ResultDocument) -> String {
    serde_json::to_string_pretty(doc).expect("result documents serialize to JSON")
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value).expect("documents serialize to JSON");
    fs::write(path, text + "\n").map_err(|e| RunError::io(path.display().to_string(), e))
}

/// Writes `result.json`, `results.csv` and any per-path files into `dir`,
/// returning the paths written.
pub fn write_outputs(dir: &Path, doc: &ResultDocument) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir.display().to_string(), e))?;
    let mut written = Vec::new();
    let json = dir.join("result.json");
    write_json(&json, doc)?;
    written.push(json);
    let csv = dir.join("results.csv");
    write_flat_csv(&csv, doc)?;
    written.push(csv);
    match &doc.result {
        ExperimentResult::Simulate { full, epsilon, .. } if doc.config.output.path_csv => {
            for (i, z) in full {
                let p = dir.join(format!("path_{i}.csv"));
                write_path_csv(&p, z, &[("path_index", i.to_string()), ("epsilon", fmt_f64(*epsilon))])?;
                written.push(p);
            }
        }
        ExperimentResult::Skeleton(s) => {
            for sol in [&s.picard, &s.euler].into_iter().flatten() {
                let meta = skeleton_meta(sol);
                let p = dir.join(format!("skeleton_{}.csv", meta[0].1));
                write_path_csv(&p, &sol.z, &meta)?;
                written.push(p);
            }
        }
        _ => {}
    }
    Ok(written)
}
