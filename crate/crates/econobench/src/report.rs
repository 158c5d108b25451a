//! Render the analysis bundle into a single markdown summary.
//!
//! The report is a pure function of the CSV bundle: players come out in the
//! order `analyze` wrote them (baseline first, agents alphabetical), games in
//! the canonical order, and re-rendering the same bundle is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::games::GameId;
use crate::pipeline::PipelineError;
use crate::store::SessionStore;

/// A parsed report CSV: the metadata comment plus header/rows.
struct Table {
    meta: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<Table, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingBundle(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let mut meta = String::new();
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(comment) = line.strip_prefix('#') {
            meta = comment.trim().to_string();
        } else if header.is_empty() {
            header = line.split(',').map(str::to_string).collect();
        } else if !line.is_empty() {
            rows.push(line.split(',').map(str::to_string).collect());
        }
    }
    Ok(Table { meta, header, rows })
}

fn fmt_cell(value: &str) -> String {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => format!("{v:.3}"),
        _ => value.to_string(),
    }
}

/// Render `<session>/reports/report.md` from the analysis bundle and return
/// its contents.
pub fn run_report(config: &RunConfig) -> Result<String, PipelineError> {
    let store = SessionStore::new(&config.session_dir);
    let reports = store.reports_dir();

    let turing = read_table(&reports.join("turing.csv"))?;
    let wasserstein = read_table(&reports.join("wasserstein.csv"))?;
    let logit: Option<Table> = {
        let path = reports.join("logit_fits.csv");
        path.exists().then(|| read_table(&path)).transpose()?
    };
    let inconsistency: Option<Table> = {
        let path = reports.join("inconsistency.csv");
        path.exists().then(|| read_table(&path)).transpose()?
    };

    if turing.rows.is_empty() {
        return Err(PipelineError::MissingBundle(reports.join("turing.csv")));
    }

    let mut out = String::new();
    writeln!(out, "# Behavioral games benchmark report\n").unwrap();
    writeln!(out, "`{}`\n", turing.meta).unwrap();

    // Players in first-appearance order; games in canonical order.
    let mut players: Vec<String> = Vec::new();
    for row in &turing.rows {
        if !players.contains(&row[0]) {
            players.push(row[0].clone());
        }
    }
    let games: Vec<&GameId> = GameId::ALL
        .iter()
        .filter(|g| turing.rows.iter().any(|row| row[1] == g.key()))
        .collect();

    // Turing win rates: players x games.
    writeln!(out, "## Turing test win rates\n").unwrap();
    write!(out, "| player |").unwrap();
    for game in &games {
        write!(out, " {} |", game.label()).unwrap();
    }
    writeln!(out, " average |").unwrap();
    write!(out, "|---|").unwrap();
    for _ in 0..=games.len() {
        write!(out, "---|").unwrap();
    }
    out.push('\n');
    let turing_cell: BTreeMap<(String, String), String> = turing
        .rows
        .iter()
        .map(|row| ((row[0].clone(), row[1].clone()), row[2].clone()))
        .collect();
    for player in &players {
        write!(out, "| {player} |").unwrap();
        for game in &games {
            let value = turing_cell
                .get(&(player.clone(), game.key().to_string()))
                .map(|v| fmt_cell(v))
                .unwrap_or_default();
            write!(out, " {value} |").unwrap();
        }
        let avg = turing_cell
            .get(&(player.clone(), "average".to_string()))
            .map(|v| fmt_cell(v))
            .unwrap_or_default();
        writeln!(out, " {avg} |").unwrap();
    }
    out.push('\n');

    // Wasserstein matrix as written.
    writeln!(out, "## Behavior dissimilarity (mean Wasserstein)\n").unwrap();
    write!(out, "| |").unwrap();
    for name in &wasserstein.header[1..] {
        write!(out, " {name} |").unwrap();
    }
    out.push('\n');
    write!(out, "|---|").unwrap();
    for _ in 1..wasserstein.header.len() {
        write!(out, "---|").unwrap();
    }
    out.push('\n');
    for row in &wasserstein.rows {
        write!(out, "| {} |", row[0]).unwrap();
        for value in &row[1..] {
            write!(out, " {} |", fmt_cell(value)).unwrap();
        }
        out.push('\n');
    }
    out.push('\n');

    // Logit fits: one row per player x game, b-hat and CI per exponent.
    if let Some(logit) = &logit {
        writeln!(out, "## Revealed preference weights (logit fit)\n").unwrap();
        let mut r_labels: Vec<String> = Vec::new();
        for row in &logit.rows {
            if !r_labels.contains(&row[2]) {
                r_labels.push(row[2].clone());
            }
        }
        write!(out, "| player | game |").unwrap();
        for r in &r_labels {
            write!(out, " b (r={r}) | 95% CI (r={r}) |").unwrap();
        }
        out.push('\n');
        write!(out, "|---|---|").unwrap();
        for _ in &r_labels {
            write!(out, "---|---|").unwrap();
        }
        out.push('\n');
        let cell: BTreeMap<(String, String, String), (String, String, String)> = logit
            .rows
            .iter()
            .map(|row| {
                (
                    (row[0].clone(), row[1].clone(), row[2].clone()),
                    (row[3].clone(), row[5].clone(), row[6].clone()),
                )
            })
            .collect();
        for player in &players {
            for game in &games {
                if *game == &GameId::BombRisk {
                    continue;
                }
                let mut line = format!("| {player} | {} |", game.label());
                let mut any = false;
                for r in &r_labels {
                    match cell.get(&(player.clone(), game.key().to_string(), r.clone())) {
                        Some((b, lo, hi)) => {
                            any = true;
                            write!(
                                line,
                                " {} | ({}, {}) |",
                                fmt_cell(b),
                                fmt_cell(lo),
                                fmt_cell(hi)
                            )
                            .unwrap();
                        }
                        None => write!(line, " | |").unwrap(),
                    }
                }
                if any {
                    writeln!(out, "{line}").unwrap();
                }
            }
        }
        out.push('\n');
    }

    // Inconsistency scores.
    if let Some(inconsistency) = &inconsistency {
        writeln!(out, "## Cross-game inconsistency\n").unwrap();
        let mut r_labels: Vec<String> = Vec::new();
        for row in &inconsistency.rows {
            if !r_labels.contains(&row[1]) {
                r_labels.push(row[1].clone());
            }
        }
        write!(out, "| player |").unwrap();
        for r in &r_labels {
            write!(out, " r={r} |").unwrap();
        }
        out.push('\n');
        write!(out, "|---|").unwrap();
        for _ in &r_labels {
            write!(out, "---|").unwrap();
        }
        out.push('\n');
        let cell: BTreeMap<(String, String), String> = inconsistency
            .rows
            .iter()
            .map(|row| ((row[0].clone(), row[1].clone()), row[2].clone()))
            .collect();
        for player in &players {
            write!(out, "| {player} |").unwrap();
            for r in &r_labels {
                let value = cell
                    .get(&(player.clone(), r.clone()))
                    .map(|v| fmt_cell(v))
                    .unwrap_or_default();
                write!(out, " {value} |").unwrap();
            }
            out.push('\n');
        }
        out.push('\n');
    }

    let path: PathBuf = reports.join("report.md");
    std::fs::write(&path, &out)?;
    Ok(out)
}
