use std::collections::BTreeMap;
use std::path::Path;

use crate::args::PlotKind;
use crate::error::{CliError, CliResult};
use crate::svg::{heatmap, line_plot, Series};
use crate::table::Table;
use crate::write_text;

pub fn plot(input: &Path, kind: PlotKind, select: Option<&str>, out: &Path) -> CliResult<()> {
    let table = Table::read(input)?;
    let origin = input.display().to_string();
    table.require_rows(&origin)?;
    let svg = match kind {
        PlotKind::Loss => loss(&table)?,
        PlotKind::Accuracy => accuracy(&table, select, &origin)?,
        PlotKind::Rssa => rssa(&table)?,
        PlotKind::Heatmap => matrix(&table, &origin)?,
    };
    write_text(out, &svg)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn loss(t: &Table) -> CliResult<String> {
    let (epoch, loss) = (t.column("epoch")?, t.column("loss")?);
    let points = (0..t.rows.len()).map(|r| (t.number(r, epoch), t.number(r, loss))).collect();
    Ok(line_plot("Loss over training epochs", "epoch", "loss", &[Series { name: "train loss".into(), points }]))
}

/// Groups rows by their text key in first-seen order.
fn group_rows(t: &Table, key: impl Fn(&[String]) -> String, rows: impl Iterator<Item = usize>) -> Vec<(String, Vec<usize>)> {
    let mut order: Vec<(String, Vec<usize>)> = Vec::new();
    for r in rows {
        let k = key(&t.rows[r]);
        match order.iter_mut().find(|(name, _)| *name == k) {
            Some((_, members)) => members.push(r),
            None => order.push((k, vec![r])),
        }
    }
    order
}

fn accuracy(t: &Table, select: Option<&str>, origin: &str) -> CliResult<String> {
    let (kind, lambda, fraction, acc) = (t.column("kind")?, t.column("lambda")?, t.column("fraction")?, t.column("val_accuracy")?);
    let rows: Vec<usize> = (0..t.rows.len()).filter(|&r| select.is_none_or(|s| t.rows[r][kind] == s)).collect();
    if rows.is_empty() {
        return Err(CliError::config(format!("{origin}: no rows for kind {:?}", select.unwrap_or_default())));
    }
    let series: Vec<Series> = group_rows(t, |row| format!("{} λ={}", row[kind], row[lambda]), rows.into_iter())
        .into_iter()
        .map(|(name, members)| Series { name, points: members.iter().map(|&r| (t.number(r, fraction), t.number(r, acc))).collect() })
        .collect();
    let title = match select {
        Some(s) => format!("Validation accuracy, {s}"),
        None => "Validation accuracy".to_string(),
    };
    Ok(line_plot(&title, "corrupted fraction", "accuracy", &series))
}

fn rssa(t: &Table) -> CliResult<String> {
    let (kind, lambda, fraction) = (t.column("kind")?, t.column("lambda")?, t.column("fraction")?);
    let columns: Vec<(usize, &str)> =
        t.header.iter().enumerate().filter_map(|(i, h)| h.strip_prefix("rssa_").map(|name| (i, name))).collect();
    if columns.is_empty() {
        return Err(CliError::config("missing column \"rssa_<explainer>\""));
    }
    // Lowest corrupted fraction per kind.
    let mut p0: BTreeMap<&str, f64> = BTreeMap::new();
    for r in 0..t.rows.len() {
        let p = t.number(r, fraction);
        let e = p0.entry(t.rows[r][kind].as_str()).or_insert(p);
        *e = e.min(p);
    }
    let rows = (0..t.rows.len()).filter(|&r| t.number(r, fraction) == p0[t.rows[r][kind].as_str()]);
    let groups = group_rows(t, |row| row[kind].clone(), rows);
    let mut series = Vec::new();
    for &(col, name) in &columns {
        for (k, members) in &groups {
            let points = members.iter().map(|&r| (t.number(r, lambda), t.number(r, col))).collect();
            series.push(Series { name: format!("{name} {k}"), points });
        }
    }
    Ok(line_plot("Mean RSSA against noise level", "λ", "RSSA", &series))
}

fn matrix(t: &Table, origin: &str) -> CliResult<String> {
    if t.header.len() < 2 {
        return Err(CliError::config(format!("{origin}: a heatmap needs a label column and at least one value column")));
    }
    let rows: Vec<String> = t.rows.iter().map(|r| r[0].clone()).collect();
    let values: Vec<Vec<f64>> = (0..t.rows.len()).map(|r| (1..t.header.len()).map(|c| t.number(r, c)).collect()).collect();
    let title = Path::new(origin).file_stem().map_or_else(|| origin.to_string(), |s| s.to_string_lossy().into_owned());
    Ok(heatmap(&title, &rows, &t.header[1..], &values))
}
