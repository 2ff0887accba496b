//! CSV readers and writers for every file the pipeline exchanges.
//!
//! All files are UTF-8 with LF line endings and a header row.
//! Probabilities and other dimensionless quantities print at 12
//! significant digits; volumes print at 4 decimals, matching the
//! fixed-point resolution they are computed at.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::game::{BasinGrid, EquilibriumReport, GameState, Separatrix};
use crate::markov::{ObsRecord, ObservationLog, StageTransitionModel};
use crate::sdp::{OccupancyReport, PolicySolution};
use crate::state_space::StateSpace;

/// Decimal formatting at `digits` significant digits, without scientific
/// notation; round-trips through `f64` parsing at that precision.
pub fn fmt_sig(value: f64, digits: usize) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}

fn fmt_prob(value: f64) -> String {
    fmt_sig(value, 12)
}

fn fmt_volume(value: f64) -> String {
    format!("{value:.4}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.display().to_string(),
                source,
            })?;
        }
    }
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_error(path: &Path, line: usize, detail: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        detail: detail.into(),
    }
}

/// Splits a CSV body into trimmed rows, checking the header.
fn rows<'a>(
    path: &Path,
    text: &'a str,
    header: &str,
) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim_end_matches('\r') == header => {}
        Some((_, first)) => {
            return Err(parse_error(
                path,
                1,
                format!("expected header `{header}`, got `{first}`"),
            ))
        }
        None => return Err(parse_error(path, 1, "empty file")),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        out.push((idx + 1, line.split(',').collect()));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    fields: &[&str],
    pos: usize,
    name: &str,
) -> Result<T> {
    let raw = fields
        .get(pos)
        .ok_or_else(|| parse_error(path, line, format!("missing column `{name}`")))?;
    raw.parse().map_err(|_| {
        parse_error(path, line, format!("column `{name}` has invalid value `{raw}`"))
    })
}

// ---------------------------------------------------------------------------
// observations.csv
// ---------------------------------------------------------------------------

pub fn write_observations(path: &Path, log: &ObservationLog) -> Result<()> {
    let mut out = String::from("trajectory_id,k,state_index\n");
    for record in &log.records {
        let _ = writeln!(
            out,
            "{},{},{}",
            record.trajectory_id, record.stage, record.state_index
        );
    }
    write_file(path, &out)
}

pub fn read_observations(path: &Path) -> Result<ObservationLog> {
    let text = read_file(path)?;
    let mut records = Vec::new();
    for (line, fields) in rows(path, &text, "trajectory_id,k,state_index")? {
        if fields.len() != 3 {
            return Err(parse_error(path, line, "expected 3 columns"));
        }
        let trajectory_id = fields[0].to_string();
        if trajectory_id.is_empty() {
            return Err(parse_error(path, line, "empty trajectory_id"));
        }
        records.push(ObsRecord {
            trajectory_id,
            stage: field(path, line, &fields, 1, "k")?,
            state_index: field(path, line, &fields, 2, "state_index")?,
        });
    }
    Ok(ObservationLog { records })
}

// ---------------------------------------------------------------------------
// transition_model.csv
// ---------------------------------------------------------------------------

pub fn write_transition_model(path: &Path, model: &StageTransitionModel) -> Result<()> {
    let mut out = String::from("k,from_index,to_index,p\n");
    for (k0, matrix) in model.matrices.iter().enumerate() {
        for (i0, row) in matrix.iter().enumerate() {
            for (j0, &p) in row.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", k0 + 1, i0 + 1, j0 + 1, fmt_prob(p));
            }
        }
    }
    write_file(path, &out)
}

/// Loads a model, inferring the state count and stage count from the file.
/// Every `(k, i, j)` entry must be present exactly once; rows are
/// renormalized after a 1e-6 stochasticity check so that downstream sums
/// hold to machine precision despite the 12-digit print format.
pub fn read_transition_model(path: &Path) -> Result<StageTransitionModel> {
    let text = read_file(path)?;
    let mut entries: Vec<(usize, usize, usize, f64, usize)> = Vec::new();
    let mut stages = 0usize;
    let mut l = 0usize;
    for (line, fields) in rows(path, &text, "k,from_index,to_index,p")? {
        if fields.len() != 4 {
            return Err(parse_error(path, line, "expected 4 columns"));
        }
        let k: usize = field(path, line, &fields, 0, "k")?;
        let i: usize = field(path, line, &fields, 1, "from_index")?;
        let j: usize = field(path, line, &fields, 2, "to_index")?;
        let p: f64 = field(path, line, &fields, 3, "p")?;
        if k == 0 || i == 0 || j == 0 {
            return Err(parse_error(path, line, "indices are 1-based"));
        }
        if !(0.0..=1.0 + 1e-9).contains(&p) {
            return Err(parse_error(path, line, format!("probability {p} outside [0, 1]")));
        }
        stages = stages.max(k);
        l = l.max(i).max(j);
        entries.push((k, i, j, p, line));
    }
    if entries.is_empty() {
        return Err(parse_error(path, 1, "no transition entries"));
    }
    let mut matrices = vec![vec![vec![f64::NAN; l]; l]; stages];
    for (k, i, j, p, line) in entries {
        let slot = &mut matrices[k - 1][i - 1][j - 1];
        if !slot.is_nan() {
            return Err(parse_error(
                path,
                line,
                format!("duplicate entry for ({k}, {i}, {j})"),
            ));
        }
        *slot = p;
    }
    for (k0, matrix) in matrices.iter_mut().enumerate() {
        for (i0, row) in matrix.iter_mut().enumerate() {
            let sum: f64 = row.iter().sum();
            if sum.is_nan() {
                return Err(Error::Model {
                    stage: k0 + 1,
                    detail: format!("row {} is incomplete", i0 + 1),
                });
            }
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::Model {
                    stage: k0 + 1,
                    detail: format!("row {} sums to {sum}, not 1", i0 + 1),
                });
            }
            for p in row.iter_mut() {
                *p /= sum;
            }
        }
    }
    Ok(StageTransitionModel {
        state_count: l,
        matrices,
        alpha: None,
        stationary: false,
    })
}

/// Row-major flattening of one stage's matrix, for histogram plots.
pub fn write_histogram(path: &Path, model: &StageTransitionModel, stage: usize) -> Result<()> {
    if stage == 0 || stage >= model.stages() {
        return Err(Error::Model {
            stage,
            detail: format!("model covers stages 1..{}", model.stages() - 1),
        });
    }
    let mut out = String::from("from_index,to_index,p\n");
    for (i0, row) in model.matrix(stage).iter().enumerate() {
        for (j0, &p) in row.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", i0 + 1, j0 + 1, fmt_prob(p));
        }
    }
    write_file(path, &out)
}

// ---------------------------------------------------------------------------
// states.csv / appendix_map.csv
// ---------------------------------------------------------------------------

pub fn render_states(space: &StateSpace) -> String {
    let mut out = String::from("index,code,bits\n");
    for state in &space.states {
        let _ = writeln!(out, "{},{},{}", state.index, state.code, state.bits_string());
    }
    out
}

pub fn write_states(path: &Path, space: &StateSpace) -> Result<()> {
    write_file(path, &render_states(space))
}

pub fn write_appendix_map(path: &Path, map: &std::collections::BTreeMap<usize, usize>) -> Result<()> {
    let mut out = String::from("appendix_index,canonical_index\n");
    for (appendix, canonical) in map {
        let _ = writeln!(out, "{appendix},{canonical}");
    }
    write_file(path, &out)
}

// ---------------------------------------------------------------------------
// values.csv / policy.csv / report.csv / monthly.csv
// ---------------------------------------------------------------------------

pub fn write_values(path: &Path, solution: &PolicySolution) -> Result<()> {
    let mut out = String::from("k,state_index,J\n");
    for (k0, row) in solution.values.iter().enumerate() {
        for (s0, &value) in row.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", k0 + 1, s0 + 1, fmt_sig(value, 12));
        }
    }
    write_file(path, &out)
}

pub fn write_policy(path: &Path, solution: &PolicySolution) -> Result<()> {
    let mut out = String::from("k,state_index,resource,user,u\n");
    for (k0, stage) in solution.policy.iter().enumerate() {
        for (s0, decision) in stage.iter().enumerate() {
            for (i, row) in decision.amounts.iter().enumerate() {
                for (j, &amount) in row.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        k0 + 1,
                        s0 + 1,
                        i + 1,
                        j + 1,
                        fmt_volume(amount)
                    );
                }
            }
        }
    }
    write_file(path, &out)
}

pub fn write_report(path: &Path, rendered: &str) -> Result<()> {
    write_file(path, rendered)
}

pub fn write_monthly(path: &Path, report: &OccupancyReport) -> Result<()> {
    let mut out = String::from("k,user,amount\n");
    for (k0, row) in report.monthly.iter().enumerate() {
        for (j, &amount) in row.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", k0 + 1, j + 1, fmt_volume(amount));
        }
    }
    write_file(path, &out)
}

// ---------------------------------------------------------------------------
// game outputs
// ---------------------------------------------------------------------------

pub fn write_equilibria(path: &Path, reports: &[EquilibriumReport]) -> Result<()> {
    let mut out = String::from("p,q,det,trace,label\n");
    for report in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_prob(report.point.p),
            fmt_prob(report.point.q),
            fmt_sig(report.det, 12),
            fmt_sig(report.trace, 12),
            report.label
        );
    }
    write_file(path, &out)
}

pub fn write_trajectory(path: &Path, trajectory: &[(f64, GameState)]) -> Result<()> {
    let mut out = String::from("t,p,q\n");
    for &(t, state) in trajectory {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_sig(t, 12),
            fmt_prob(state.p),
            fmt_prob(state.q)
        );
    }
    write_file(path, &out)
}

pub fn write_basin(path: &Path, grid: &BasinGrid) -> Result<()> {
    let mut out = String::from("p,q,label\n");
    for &(center, label) in &grid.cells {
        let _ = writeln!(out, "{},{},{label}", fmt_prob(center.p), fmt_prob(center.q));
    }
    write_file(path, &out)
}

pub fn write_separatrix(path: &Path, separatrix: &Separatrix) -> Result<()> {
    let mut out = String::from("p,q\n");
    for vertex in separatrix.vertices {
        let _ = writeln!(out, "{},{}", fmt_prob(vertex.p), fmt_prob(vertex.q));
    }
    write_file(path, &out)
}
