//! CSV tables, `stats.json` and SVG figures.
//!
//! Figures: `fig2` keyword totals, `fig3` keyword counts by day, `fig4` the
//! 2-D cluster scatter (color = issue, marker = channel), `fig5` cluster
//! counts by channel, `fig6` cluster totals, `fig7` cluster counts by day.
//! All floats are written with six decimals, so outputs are byte-stable.

pub mod svg;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::Duration;
use serde::Serialize;
use thiserror::Error;

use crate::analyze::StatsReport;
use crate::corpus::{AnalysisWindow, Channel, DayIndex};
use crate::keywords::{MethodTag, SalienceTable};
use crate::labeling::ExcludedComment;

pub use svg::ScatterPoint;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed {path} at row {row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ReportError {
    ReportError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn parse_err(path: &Path, row: usize, e: impl std::fmt::Display) -> ReportError {
    ReportError::Parse {
        path: path.display().to_string(),
        row,
        message: e.to_string(),
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.6}")
}

pub const COUNTS_HEADER: [&str; 4] = ["issue", "day", "channel", "count"];
pub const ASSIGNMENT_HEADER: [&str; 6] = ["comment_id", "label", "channel", "day", "x2d", "y2d"];
pub const CLUSTERS_HEADER: [&str; 7] = ["comment_id", "label", "issue", "channel", "day", "x2d", "y2d"];
pub const EXCLUDED_HEADER: [&str; 3] = ["comment_id", "cluster", "reason"];

fn write_rows<const N: usize>(path: &Path, header: [&str; N], rows: Vec<[String; N]>) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>, ReportError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let found = r.headers().map_err(|e| parse_err(path, 1, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(parse_err(path, 1, format!("expected header {}", header.join(","))));
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| rec.map_err(|e| parse_err(path, i + 2, e)))
        .collect()
}

/// `issue,day,channel,count` for every non-zero cell.
pub fn write_counts_csv(path: &Path, table: &SalienceTable) -> Result<(), ReportError> {
    let rows = table
        .counts
        .iter()
        .map(|(k, n)| {
            [
                table.issues[k.issue].clone(),
                k.day.0.to_string(),
                k.channel.to_string(),
                n.to_string(),
            ]
        })
        .collect();
    write_rows(path, COUNTS_HEADER, rows)
}

pub fn read_counts_csv(path: &Path, method: MethodTag, issues: Vec<String>) -> Result<SalienceTable, ReportError> {
    let mut table = SalienceTable::new(method, issues);
    for (i, rec) in read_rows(path, &COUNTS_HEADER)?.iter().enumerate() {
        let row = i + 2;
        let issue = table
            .issues
            .iter()
            .position(|n| n == &rec[0])
            .ok_or_else(|| parse_err(path, row, format!("unknown issue {:?}", &rec[0])))?;
        let day: u32 = rec[1].parse().map_err(|e| parse_err(path, row, e))?;
        let n: u64 = rec[3].parse().map_err(|e| parse_err(path, row, e))?;
        table.add(issue, DayIndex(day), &Channel::new(&rec[2]), n);
    }
    Ok(table)
}

/// One clustered comment with its plotting coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentRow {
    pub comment_id: String,
    pub label: i64,
    pub channel: Channel,
    pub day: DayIndex,
    pub x2d: f64,
    pub y2d: f64,
}

pub fn write_assignment_csv(path: &Path, rows: &[AssignmentRow]) -> Result<(), ReportError> {
    write_rows(
        path,
        ASSIGNMENT_HEADER,
        rows.iter()
            .map(|r| {
                [
                    r.comment_id.clone(),
                    r.label.to_string(),
                    r.channel.to_string(),
                    r.day.0.to_string(),
                    fmt_f64(r.x2d),
                    fmt_f64(r.y2d),
                ]
            })
            .collect(),
    )
}

pub fn read_assignment_csv(path: &Path) -> Result<Vec<AssignmentRow>, ReportError> {
    read_rows(path, &ASSIGNMENT_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let e = |m: String| parse_err(path, i + 2, m);
            Ok(AssignmentRow {
                comment_id: rec[0].to_string(),
                label: rec[1].parse().map_err(|x| e(format!("label: {x}")))?,
                channel: Channel::new(&rec[2]),
                day: DayIndex(rec[3].parse().map_err(|x| e(format!("day: {x}")))?),
                x2d: rec[4].parse().map_err(|x| e(format!("x2d: {x}")))?,
                y2d: rec[5].parse().map_err(|x| e(format!("y2d: {x}")))?,
            })
        })
        .collect()
}

/// A clustered comment with its issue, empty when excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRow {
    pub assignment: AssignmentRow,
    pub issue: Option<String>,
}

pub fn write_clusters_csv(path: &Path, rows: &[ClusterRow]) -> Result<(), ReportError> {
    write_rows(
        path,
        CLUSTERS_HEADER,
        rows.iter()
            .map(|r| {
                let a = &r.assignment;
                [
                    a.comment_id.clone(),
                    a.label.to_string(),
                    r.issue.clone().unwrap_or_default(),
                    a.channel.to_string(),
                    a.day.0.to_string(),
                    fmt_f64(a.x2d),
                    fmt_f64(a.y2d),
                ]
            })
            .collect(),
    )
}

pub fn read_clusters_csv(path: &Path) -> Result<Vec<ClusterRow>, ReportError> {
    read_rows(path, &CLUSTERS_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let e = |m: String| parse_err(path, i + 2, m);
            Ok(ClusterRow {
                assignment: AssignmentRow {
                    comment_id: rec[0].to_string(),
                    label: rec[1].parse().map_err(|x| e(format!("label: {x}")))?,
                    channel: Channel::new(&rec[3]),
                    day: DayIndex(rec[4].parse().map_err(|x| e(format!("day: {x}")))?),
                    x2d: rec[5].parse().map_err(|x| e(format!("x2d: {x}")))?,
                    y2d: rec[6].parse().map_err(|x| e(format!("y2d: {x}")))?,
                },
                issue: Some(rec[2].to_string()).filter(|s| !s.is_empty()),
            })
        })
        .collect()
}

pub fn write_excluded_csv(path: &Path, excluded: &[ExcludedComment]) -> Result<(), ReportError> {
    write_rows(
        path,
        EXCLUDED_HEADER,
        excluded
            .iter()
            .map(|e| [e.comment_id.clone(), e.cluster.to_string(), e.reason.to_string()])
            .collect(),
    )
}

/// `(comment_id, reason)` pairs from `excluded.csv`.
pub fn read_excluded_csv(path: &Path) -> Result<Vec<(String, String)>, ReportError> {
    Ok(read_rows(path, &EXCLUDED_HEADER)?
        .iter()
        .map(|r| (r[0].to_string(), r[2].to_string()))
        .collect())
}

pub fn write_stats_json(path: &Path, stats: &StatsReport) -> Result<(), ReportError> {
    let mut text = serde_json::to_string_pretty(stats).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub const FIGURE_FILES: [&str; 6] = [
    "fig2_keyword_totals.svg",
    "fig3_keyword_by_day.svg",
    "fig4_cluster_scatter.svg",
    "fig5_cluster_by_channel.svg",
    "fig6_cluster_totals.svg",
    "fig7_cluster_by_day.svg",
];

fn day_labels(window: &AnalysisWindow) -> Vec<String> {
    (0..window.num_days())
        .map(|d| (window.start_date + Duration::days(d as i64)).format("%b %d").to_string())
        .collect()
}

fn by_day_series(table: &SalienceTable, days: usize) -> Vec<(String, Vec<u64>)> {
    table
        .by_day()
        .into_iter()
        .zip(&table.issues)
        .map(|(m, name)| {
            let mut v = vec![0; days];
            for (d, n) in m {
                if (d.0 as usize) < days {
                    v[d.0 as usize] = n;
                }
            }
            (name.clone(), v)
        })
        .collect()
}

/// Renders the six figures as `(file name, svg text)`.
pub fn render_figures(
    keyword: &SalienceTable,
    cluster: &SalienceTable,
    rows: &[ClusterRow],
    window: &AnalysisWindow,
) -> Vec<(&'static str, String)> {
    let days = day_labels(window);
    let channels: Vec<Channel> = rows
        .iter()
        .map(|r| r.assignment.channel.clone())
        .chain(cluster.channels())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let channel_names: Vec<String> = channels.iter().map(Channel::to_string).collect();
    let points: Vec<ScatterPoint> = rows
        .iter()
        .map(|r| ScatterPoint {
            x: r.assignment.x2d,
            y: r.assignment.y2d,
            color: r.issue.as_ref().and_then(|i| cluster.issues.iter().position(|n| n == i)),
            shape: channels
                .iter()
                .position(|c| c == &r.assignment.channel)
                .unwrap_or(0),
        })
        .collect();
    let per_channel: Vec<(String, Vec<u64>)> = cluster
        .by_channel()
        .into_iter()
        .zip(&cluster.issues)
        .map(|(m, name)| {
            (
                name.clone(),
                channels.iter().map(|c| m.get(c).copied().unwrap_or(0)).collect(),
            )
        })
        .collect();
    vec![
        (
            FIGURE_FILES[0],
            svg::bar_chart("Keyword frequency by issue area", "occurrences", &keyword.issues, &keyword.issue_totals()),
        ),
        (
            FIGURE_FILES[1],
            svg::grouped_bar_chart(
                "Keyword frequency by issue area and day",
                "occurrences",
                &days,
                &by_day_series(keyword, days.len()),
            ),
        ),
        (
            FIGURE_FILES[2],
            svg::scatter("Comment clusters (2-D layout)", &points, &cluster.issues, &channel_names),
        ),
        (
            FIGURE_FILES[3],
            svg::grouped_bar_chart(
                "Cluster issue areas by channel",
                "comments",
                &channel_names,
                &per_channel,
            ),
        ),
        (
            FIGURE_FILES[4],
            svg::bar_chart("Cluster frequency by issue area", "comments", &cluster.issues, &cluster.issue_totals()),
        ),
        (
            FIGURE_FILES[5],
            svg::grouped_bar_chart(
                "Cluster frequency by issue area and day",
                "comments",
                &days,
                &by_day_series(cluster, days.len()),
            ),
        ),
    ]
}

pub fn emit_figures(
    outdir: &Path,
    keyword: &SalienceTable,
    cluster: &SalienceTable,
    rows: &[ClusterRow],
    window: &AnalysisWindow,
) -> Result<Vec<PathBuf>, ReportError> {
    render_figures(keyword, cluster, rows, window)
        .into_iter()
        .map(|(name, text)| {
            let path = outdir.join(name);
            fs::write(&path, text).map_err(|e| io_err(&path, e))?;
            Ok(path)
        })
        .collect()
}

/// Everything a finished analysis writes.
pub struct ReportInputs<'a> {
    pub keyword: &'a SalienceTable,
    pub cluster: &'a SalienceTable,
    pub stats: &'a StatsReport,
    pub rows: &'a [ClusterRow],
    pub excluded: &'a [ExcludedComment],
    pub window: &'a AnalysisWindow,
}

/// Writes count tables, `clusters.csv`, `excluded.csv`, `stats.json` and the figures.
pub fn emit_reports(inputs: &ReportInputs<'_>, outdir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(outdir).map_err(|e| io_err(outdir, e))?;
    let mut written = Vec::new();
    let mut out = |name: &str| {
        let p = outdir.join(name);
        written.push(p.clone());
        p
    };
    write_counts_csv(&out("counts_keyword.csv"), inputs.keyword)?;
    write_counts_csv(&out("counts_cluster.csv"), inputs.cluster)?;
    write_clusters_csv(&out("clusters.csv"), inputs.rows)?;
    write_excluded_csv(&out("excluded.csv"), inputs.excluded)?;
    write_stats_json(&out("stats.json"), inputs.stats)?;
    written.extend(emit_figures(outdir, inputs.keyword, inputs.cluster, inputs.rows, inputs.window)?);
    Ok(written)
}
