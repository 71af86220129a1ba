//! CSV ingestion and emission.
//!
//! Two-sample files are wide: `id,group[,pair_id],t0,t1,…`, one curve per
//! row. Trial files are `trial,neuron,t0,t1,…` with every (trial, neuron)
//! combination exactly once. Row numbers in messages are file line numbers
//! (the header is line 1). Floats are written with the shortest
//! representation that parses back to the same value.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use funcov::{FunctionalSample, Grid, TrialDataset};

use crate::error::{CliError, CliResult};

/// Both groups of a two-sample file.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSample {
    pub group1: FunctionalSample,
    pub group2: FunctionalSample,
    /// Whether the file had a `pair_id` column; the samples then carry
    /// those ids.
    pub has_pair_ids: bool,
}

fn reader(path: &Path) -> CliResult<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(path, e.to_string()))
}

fn headers(rdr: &mut csv::Reader<std::fs::File>, path: &Path) -> CliResult<Vec<String>> {
    Ok(rdr
        .headers()
        .map_err(|e| CliError::input(path, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect())
}

fn parse_value(path: &Path, line: u64, column: &str, cell: &str) -> CliResult<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(CliError::input(path, format!("row {line}, column {column}: value '{cell}' is not finite"))),
        Err(_) => Err(CliError::input(path, format!("row {line}, column {column}: '{cell}' is not a number"))),
    }
}

/// Reads a grid of timepoints separated by commas or whitespace.
pub fn read_grid(path: &Path) -> CliResult<Grid> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e.to_string()))?;
    let points = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(i, s)| {
            s.parse::<f64>()
                .map_err(|_| CliError::input(path, format!("timepoint {}: '{s}' is not a number", i + 1)))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    Grid::from_points(points).map_err(|e| CliError::input(path, e.to_string()))
}

fn resolve_grid(path: &Path, n_points: usize, grid: Option<&Path>) -> CliResult<Grid> {
    if n_points < 2 {
        return Err(CliError::input(path, format!("need at least two timepoint columns, found {n_points}")));
    }
    match grid {
        None => Ok(Grid::uniform(n_points)?),
        Some(g) => {
            let grid = read_grid(g)?;
            if grid.len() != n_points {
                return Err(CliError::input(
                    g,
                    format!("grid has {} timepoints but {} has {n_points} value columns", grid.len(), path.display()),
                ));
            }
            Ok(grid)
        }
    }
}

struct Row {
    line: u64,
    keys: Vec<String>,
    values: Vec<f64>,
}

/// Reads every record, checking width and numeric cells. `keys` holds the
/// first `n_keys` columns verbatim.
fn read_rows(path: &Path, n_keys: usize) -> CliResult<(Vec<String>, Vec<Row>)> {
    let mut rdr = reader(path)?;
    let header = headers(&mut rdr, path)?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::input(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(CliError::input(
                path,
                format!("row {line} has {} fields, expected {}", record.len(), header.len()),
            ));
        }
        let keys: Vec<String> = record.iter().take(n_keys).map(str::to_owned).collect();
        if let Some(i) = keys.iter().position(String::is_empty) {
            return Err(CliError::input(path, format!("row {line}: column {} is empty", header[i])));
        }
        let values = record
            .iter()
            .zip(&header)
            .skip(n_keys)
            .map(|(cell, column)| parse_value(path, line, column, cell))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(Row { line, keys, values });
    }
    Ok((header, rows))
}

fn expect_header(path: &Path, header: &[String], names: &[&str]) -> CliResult<()> {
    if header.len() < names.len() || header.iter().zip(names).any(|(h, n)| h != n) {
        return Err(CliError::input(
            path,
            format!("header must start with {}, found '{}'", names.join(","), header.join(",")),
        ));
    }
    Ok(())
}

pub fn parse_two_sample_csv(path: &Path, grid: Option<&Path>) -> CliResult<TwoSample> {
    let has_pair_ids = {
        let mut rdr = reader(path)?;
        let header = headers(&mut rdr, path)?;
        expect_header(path, &header, &["id", "group"])?;
        header.get(2).is_some_and(|h| h == "pair_id")
    };
    let n_keys = if has_pair_ids { 3 } else { 2 };
    let (header, rows) = read_rows(path, n_keys)?;
    let grid = resolve_grid(path, header.len() - n_keys, grid)?;

    let mut values: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    let mut ids: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    let mut seen: HashSet<(u8, String)> = HashSet::new();
    for row in rows {
        let group = match row.keys[1].as_str() {
            "1" => 1u8,
            "2" => 2,
            other => {
                return Err(CliError::input(path, format!("row {}: group must be 1 or 2, found '{other}'", row.line)))
            }
        };
        if has_pair_ids {
            let pair = row.keys[2].clone();
            if !seen.insert((group, pair.clone())) {
                return Err(CliError::input(
                    path,
                    format!("row {}: duplicate pair_id '{pair}' in group {group}", row.line),
                ));
            }
            ids[group as usize - 1].push(pair);
        }
        values[group as usize - 1].push(row.values);
    }
    let build = |z: usize| -> CliResult<FunctionalSample> {
        if values[z].is_empty() {
            return Err(CliError::input(path, format!("group {} has no curves", z + 1)));
        }
        let sample = FunctionalSample::from_rows(&values[z], grid.clone())?;
        Ok(if has_pair_ids { sample.with_ids(ids[z].clone())? } else { sample })
    };
    Ok(TwoSample { group1: build(0)?, group2: build(1)?, has_pair_ids })
}

/// Gaps in a trial file are reported for at most this many combinations.
const MAX_LISTED_GAPS: usize = 10;

pub fn parse_trial_csv(path: &Path, grid: Option<&Path>) -> CliResult<TrialDataset> {
    {
        let mut rdr = reader(path)?;
        let header = headers(&mut rdr, path)?;
        expect_header(path, &header, &["trial", "neuron"])?;
    }
    let (header, rows) = read_rows(path, 2)?;
    let grid = resolve_grid(path, header.len() - 2, grid)?;

    let mut trial_ids: Vec<String> = Vec::new();
    let mut neuron_ids: Vec<String> = Vec::new();
    let mut trial_index: HashMap<String, usize> = HashMap::new();
    let mut neuron_index: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    for row in rows {
        let [trial, neuron] = [&row.keys[0], &row.keys[1]];
        let t = *trial_index.entry(trial.clone()).or_insert_with(|| {
            trial_ids.push(trial.clone());
            trial_ids.len() - 1
        });
        let n = *neuron_index.entry(neuron.clone()).or_insert_with(|| {
            neuron_ids.push(neuron.clone());
            neuron_ids.len() - 1
        });
        if cells.insert((t, n), row.values).is_some() {
            return Err(CliError::input(
                path,
                format!("row {}: trial '{trial}', neuron '{neuron}' appears more than once", row.line),
            ));
        }
    }
    if trial_ids.is_empty() {
        return Err(CliError::input(path, "no data rows"));
    }
    let gaps: BTreeSet<(usize, usize)> = (0..trial_ids.len())
        .flat_map(|t| (0..neuron_ids.len()).map(move |n| (t, n)))
        .filter(|key| !cells.contains_key(key))
        .collect();
    if !gaps.is_empty() {
        let listed: Vec<String> = gaps
            .iter()
            .take(MAX_LISTED_GAPS)
            .map(|&(t, n)| format!("(trial '{}', neuron '{}')", trial_ids[t], neuron_ids[n]))
            .collect();
        return Err(CliError::input(
            path,
            format!("{} missing (trial, neuron) combinations, first: {}", gaps.len(), listed.join(", ")),
        ));
    }
    let trials = (0..trial_ids.len())
        .map(|t| {
            let rows: Vec<Vec<f64>> = (0..neuron_ids.len()).map(|n| cells.remove(&(t, n)).unwrap()).collect();
            Ok(FunctionalSample::from_rows(&rows, grid.clone())?.with_ids(neuron_ids.clone())?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(TrialDataset::new(trial_ids, trials)?)
}

fn time_columns(t: usize) -> impl Iterator<Item = String> {
    (0..t).map(|j| format!("t{j}"))
}

fn write_curve<W: Write>(out: &mut csv::Writer<W>, keys: &[&str], curve: impl Iterator<Item = f64>) -> CliResult<()> {
    let fields: Vec<String> = keys.iter().map(|k| k.to_string()).chain(curve.map(|v| v.to_string())).collect();
    out.write_record(&fields).map_err(csv_error)
}

fn csv_error(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::Output(io),
        other => CliError::Usage(format!("{other:?}")),
    }
}

/// Writes two groups in the wide format. Curve ids are `g<group>_<row>`;
/// a `pair_id` column is written when both samples carry ids.
pub fn write_two_sample_csv<W: Write>(w: W, group1: &FunctionalSample, group2: &FunctionalSample) -> CliResult<()> {
    let paired = group1.ids().is_some() && group2.ids().is_some();
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = vec!["id".into(), "group".into()];
    if paired {
        header.push("pair_id".into());
    }
    header.extend(time_columns(group1.n_points()));
    out.write_record(&header).map_err(csv_error)?;
    for (z, sample) in [group1, group2].into_iter().enumerate() {
        let group = (z + 1).to_string();
        for i in 0..sample.n_curves() {
            let id = format!("g{}_{i}", z + 1);
            let mut keys = vec![id.as_str(), group.as_str()];
            if let Some(ids) = sample.ids().filter(|_| paired) {
                keys.push(&ids[i]);
            }
            write_curve(&mut out, &keys, sample.values().row(i).iter().copied())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_trial_csv<W: Write>(w: W, ds: &TrialDataset) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<String> = ["trial".to_string(), "neuron".to_string()].into_iter().chain(time_columns(ds.n_points())).collect();
    out.write_record(&header).map_err(csv_error)?;
    for (t, trial) in ds.trials().iter().enumerate() {
        for (i, neuron) in ds.neuron_ids().iter().enumerate() {
            write_curve(&mut out, &[&ds.trial_ids()[t], neuron], trial.values().row(i).iter().copied())?;
        }
    }
    out.flush()?;
    Ok(())
}
