//! CSV and sidecar emission. All numeric fields use the shortest exact f64
//! representation, so reruns with the same seed produce identical bytes.

use std::path::Path;

use anyhow::{Context, Result};
use gdr_core::{BeliefGrid, IterationStat, Policy, QTable, ValueTable};

pub fn fmt(value: f64) -> String {
    format!("{value}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Banner row prepended to data files when a run hit its iteration cap.
pub fn warning_row(columns: usize, message: &str) -> Vec<String> {
    let mut row = vec![String::new(); columns];
    row[0] = format!("warning: {message}");
    row
}

pub fn grid_sidecar(path: &Path, grid: &BeliefGrid) -> Result<()> {
    let points: Vec<&[f64]> = grid.points().collect();
    let body = serde_json::json!({
        "resolution": grid.resolution,
        "dim": grid.dim,
        "points": points,
    });
    std::fs::write(path, serde_json::to_string_pretty(&body)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn value_table_rows(table: &ValueTable, warning: Option<&str>) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    if let Some(message) = warning {
        rows.push(warning_row(3, message));
    }
    for bi in 0..table.grid.len() {
        for s in 0..table.num_states {
            rows.push(vec![bi.to_string(), s.to_string(), fmt(table.get(bi, s))]);
        }
    }
    rows
}

pub fn policy_rows(policy: &Policy, warning: Option<&str>) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    if let Some(message) = warning {
        rows.push(warning_row(3, message));
    }
    if let Policy::BeliefStateTable { action_dist, .. } = policy {
        for (bi, per_state) in action_dist.iter().enumerate() {
            for (s, dist) in per_state.iter().enumerate() {
                let action = dist
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                rows.push(vec![bi.to_string(), s.to_string(), action.to_string()]);
            }
        }
    }
    rows
}

pub fn iteration_rows(
    log: &[IterationStat],
    wall_ms: &[f64],
    warning: Option<&str>,
) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    if let Some(message) = warning {
        rows.push(warning_row(3, message));
    }
    for (stat, ms) in log.iter().zip(wall_ms) {
        rows.push(vec![stat.iter.to_string(), fmt(stat.residual), fmt(*ms)]);
    }
    rows
}

pub fn qtable_rows(q: &QTable) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for bi in 0..q.grid.len() {
        for s in 0..q.num_states {
            for a in 0..q.num_actions {
                rows.push(vec![
                    bi.to_string(),
                    s.to_string(),
                    a.to_string(),
                    fmt(q.get(bi, s, a)),
                ]);
            }
        }
    }
    rows
}
