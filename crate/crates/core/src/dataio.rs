//! CSV ingestion of intensity matrices and persistence of draws, summaries
//! and histogram data.
//!
//! Intensities are expected on the log scale; no transform is applied.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, ParseErrorKind, Result};
use crate::group::{GroupData, MaskedMatrix};
use crate::imputation::ImputedSet;
use crate::samples::DifferenceSamples;
use crate::summary::{quantile_sorted, PeptideSummary, PosteriorSummary};

/// Header names recognised for the optional protein column.
pub const PROTEIN_HEADERS: &[&str] = &["protein", "protein_id", "proteins"];

pub fn is_missing_marker(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan")
}

fn parse_err(
    kind: ParseErrorKind,
    path: &Path,
    line: usize,
    column: usize,
    message: impl Into<String>,
) -> Error {
    Error::Parse {
        kind,
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

/// Parses a finite real; only the decimal point is accepted.
fn parse_value(cell: &str, path: &Path, line: usize, column: usize) -> Result<f64> {
    let c = cell.trim();
    let ok = !c.is_empty()
        && c.bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'));
    match c.parse::<f64>() {
        Ok(v) if ok && v.is_finite() => Ok(v),
        _ => Err(parse_err(
            ParseErrorKind::InvalidNumber,
            path,
            line,
            column,
            format!("'{c}' is not a finite number"),
        )),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file))
}

fn records(path: &Path) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in reader(path)?.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        out.push((line, rec));
    }
    Ok(out)
}

/// Sample id → condition label, in file order.
pub fn load_design(path: &Path) -> Result<Vec<(String, String)>> {
    let rows = records(path)?;
    let Some(((hline, header), body)) = rows.split_first() else {
        return Err(parse_err(ParseErrorKind::EmptyFile, path, 1, 1, "design file is empty"));
    };
    if header.len() != 2 {
        return Err(parse_err(
            ParseErrorKind::BadHeader,
            path,
            *hline,
            1,
            "design header must have two columns (sample, condition)",
        ));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(body.len());
    for (line, rec) in body {
        if rec.len() != 2 {
            return Err(parse_err(
                ParseErrorKind::NonRectangular,
                path,
                *line,
                rec.len().min(2) + 1,
                format!("expected 2 fields, found {}", rec.len()),
            ));
        }
        let sample = rec[0].trim().to_string();
        let condition = rec[1].trim().to_string();
        if sample.is_empty() || condition.is_empty() {
            let col = if sample.is_empty() { 1 } else { 2 };
            return Err(parse_err(
                ParseErrorKind::BadHeader,
                path,
                *line,
                col,
                "sample id and condition must be non-empty",
            ));
        }
        if !seen.insert(sample.clone()) {
            return Err(parse_err(
                ParseErrorKind::DuplicateSample,
                path,
                *line,
                1,
                format!("sample '{sample}' is listed more than once"),
            ));
        }
        out.push((sample, condition));
    }
    if out.is_empty() {
        return Err(parse_err(ParseErrorKind::EmptyFile, path, *hline, 1, "design lists no samples"));
    }
    Ok(out)
}

/// A parsed intensity file before it is split by condition.
struct WideTable {
    peptide_ids: Vec<String>,
    proteins: Option<Vec<String>>,
    sample_ids: Vec<String>,
    /// Row-major peptides × samples; `None` for missing.
    cells: Vec<Vec<Option<f64>>>,
}

fn load_wide(path: &Path, allow_missing: bool) -> Result<WideTable> {
    let rows = records(path)?;
    let Some(((hline, header), body)) = rows.split_first() else {
        return Err(parse_err(ParseErrorKind::EmptyFile, path, 1, 1, "data file is empty"));
    };
    let has_protein = header.len() >= 2
        && PROTEIN_HEADERS
            .iter()
            .any(|h| header[1].trim().eq_ignore_ascii_case(h));
    let first_sample = if has_protein { 2 } else { 1 };
    if header.len() <= first_sample {
        return Err(parse_err(
            ParseErrorKind::BadHeader,
            path,
            *hline,
            1,
            "header lists no sample columns",
        ));
    }
    let sample_ids: Vec<String> = header.iter().skip(first_sample).map(|s| s.trim().to_string()).collect();
    let mut seen = HashSet::new();
    for (k, s) in sample_ids.iter().enumerate() {
        if s.is_empty() || !seen.insert(s.as_str()) {
            return Err(parse_err(
                ParseErrorKind::DuplicateSample,
                path,
                *hline,
                first_sample + k + 1,
                format!("sample column '{s}' is empty or repeated"),
            ));
        }
    }

    let width = header.len();
    let mut peptide_ids = Vec::with_capacity(body.len());
    let mut proteins = has_protein.then(|| Vec::with_capacity(body.len()));
    let mut cells = Vec::with_capacity(body.len());
    let mut seen = HashSet::new();
    for (line, rec) in body {
        if rec.len() != width {
            return Err(parse_err(
                ParseErrorKind::NonRectangular,
                path,
                *line,
                rec.len().min(width) + 1,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        let id = rec[0].trim().to_string();
        if id.is_empty() || !seen.insert(id.clone()) {
            return Err(parse_err(
                ParseErrorKind::DuplicatePeptide,
                path,
                *line,
                1,
                format!("peptide id '{id}' is empty or repeated"),
            ));
        }
        if let Some(p) = proteins.as_mut() {
            p.push(rec[1].trim().to_string());
        }
        let mut row = Vec::with_capacity(sample_ids.len());
        for (k, cell) in rec.iter().enumerate().skip(first_sample) {
            if is_missing_marker(cell) {
                if !allow_missing {
                    return Err(parse_err(
                        ParseErrorKind::UnexpectedMissing,
                        path,
                        *line,
                        k + 1,
                        "imputed matrices may not contain missing values",
                    ));
                }
                row.push(None);
            } else {
                row.push(Some(parse_value(cell, path, *line, k + 1)?));
            }
        }
        peptide_ids.push(id);
        cells.push(row);
    }
    if peptide_ids.is_empty() {
        return Err(parse_err(ParseErrorKind::EmptyFile, path, *hline, 1, "data file has no peptides"));
    }
    Ok(WideTable {
        peptide_ids,
        proteins,
        sample_ids,
        cells,
    })
}

/// Sample columns (indices into the wide table) of each condition.
fn split_conditions(
    table: &WideTable,
    design: &[(String, String)],
    data_path: &Path,
    design_path: &Path,
) -> Result<BTreeMap<String, Vec<usize>>> {
    let column: HashMap<&str, usize> = table
        .sample_ids
        .iter()
        .enumerate()
        .map(|(k, s)| (s.as_str(), k))
        .collect();
    let assigned: HashMap<&str, &str> = design.iter().map(|(s, c)| (s.as_str(), c.as_str())).collect();
    // design line numbers: header is line 1, so entry i is line i + 2 (blank lines aside)
    for (i, (sample, _)) in design.iter().enumerate() {
        if !column.contains_key(sample.as_str()) {
            return Err(parse_err(
                ParseErrorKind::MissingSample,
                design_path,
                i + 2,
                1,
                format!("sample '{sample}' does not appear in {}", data_path.display()),
            ));
        }
    }
    let offset = if table.proteins.is_some() { 2 } else { 1 };
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (k, sample) in table.sample_ids.iter().enumerate() {
        match assigned.get(sample.as_str()) {
            Some(cond) => groups.entry(cond.to_string()).or_default().push(k),
            None => {
                return Err(parse_err(
                    ParseErrorKind::UnknownSample,
                    data_path,
                    1,
                    offset + k + 1,
                    format!("sample '{sample}' is not assigned a condition in {}", design_path.display()),
                ))
            }
        }
    }
    Ok(groups)
}

fn group_matrix(table: &WideTable, cols: &[usize]) -> Result<MaskedMatrix> {
    let rows: Vec<Vec<Option<f64>>> = cols
        .iter()
        .map(|&k| table.cells.iter().map(|r| r[k]).collect())
        .collect();
    MaskedMatrix::from_rows(&rows)
}

/// Loads a wide intensity CSV and its design into one group per condition.
///
/// Rows of each group follow the order of the sample columns in the data
/// header; a second column headed `protein`, `protein_id` or `proteins`
/// carries protein labels.
pub fn load_dataset(data: &Path, design: &Path) -> Result<BTreeMap<String, GroupData>> {
    let table = load_wide(data, true)?;
    let design_rows = load_design(design)?;
    let conditions = split_conditions(&table, &design_rows, data, design)?;
    conditions
        .into_iter()
        .map(|(cond, cols)| {
            let matrix = group_matrix(&table, &cols)?;
            let g = GroupData::new(cond.clone(), table.peptide_ids.clone(), table.proteins.clone(), matrix)?;
            Ok((cond, g))
        })
        .collect()
}

/// Loads `D` externally imputed copies of a dataset (same layout as the data
/// file, no missing values) and pairs them with the observed groups.
///
/// Sample and peptide order may differ from the original file; cells are
/// matched by id.
pub fn load_imputed(
    data: &Path,
    design: &Path,
    imputed: &[PathBuf],
) -> Result<BTreeMap<String, ImputedSet>> {
    if imputed.is_empty() {
        return Err(Error::InvalidInput("no imputed files given".into()));
    }
    let table = load_wide(data, true)?;
    let design_rows = load_design(design)?;
    let conditions = split_conditions(&table, &design_rows, data, design)?;

    let mut per_group: BTreeMap<String, Vec<DMatrix<f64>>> = BTreeMap::new();
    for path in imputed {
        let other = load_wide(path, false)?;
        let sample_col: HashMap<&str, usize> = other
            .sample_ids
            .iter()
            .enumerate()
            .map(|(k, s)| (s.as_str(), k))
            .collect();
        let pep_row: HashMap<&str, usize> = other
            .peptide_ids
            .iter()
            .enumerate()
            .map(|(k, s)| (s.as_str(), k))
            .collect();
        if other.sample_ids.len() != table.sample_ids.len() || other.peptide_ids.len() != table.peptide_ids.len() {
            return Err(Error::InvalidInput(format!(
                "{}: shape {}x{} differs from the data file ({}x{})",
                path.display(),
                other.peptide_ids.len(),
                other.sample_ids.len(),
                table.peptide_ids.len(),
                table.sample_ids.len()
            )));
        }
        for (cond, cols) in &conditions {
            let mut m = DMatrix::zeros(cols.len(), table.peptide_ids.len());
            for (i, &k) in cols.iter().enumerate() {
                let sample = &table.sample_ids[k];
                let kk = *sample_col.get(sample.as_str()).ok_or_else(|| {
                    Error::InvalidInput(format!("{}: sample '{sample}' is missing", path.display()))
                })?;
                for (j, pep) in table.peptide_ids.iter().enumerate() {
                    let r = *pep_row.get(pep.as_str()).ok_or_else(|| {
                        Error::InvalidInput(format!("{}: peptide '{pep}' is missing", path.display()))
                    })?;
                    m[(i, j)] = other.cells[r][kk].expect("missing cells rejected on load");
                }
            }
            per_group.entry(cond.clone()).or_default().push(m);
        }
    }
    conditions
        .iter()
        .map(|(cond, cols)| {
            let observed = group_matrix(&table, cols)?;
            let draws = per_group.remove(cond).unwrap_or_default();
            let set = ImputedSet::from_external(observed, draws)
                .map_err(|e| Error::InvalidInput(format!("condition '{cond}': {e}")))?;
            Ok((cond.clone(), set))
        })
        .collect()
}

/// Square matrix with peptide ids as its first row and first column:
///
/// ```text
/// peptide,p1,p2
/// p1,1.0,0.2
/// p2,0.2,1.0
/// ```
pub fn load_labelled_matrix(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let rows = records(path)?;
    let Some(((hline, header), body)) = rows.split_first() else {
        return Err(parse_err(ParseErrorKind::EmptyFile, path, 1, 1, "matrix file is empty"));
    };
    let ids: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    if ids.is_empty() {
        return Err(parse_err(ParseErrorKind::BadHeader, path, *hline, 1, "header lists no peptides"));
    }
    if body.len() != ids.len() {
        return Err(Error::InvalidInput(format!(
            "{}: {} header ids but {} rows",
            path.display(),
            ids.len(),
            body.len()
        )));
    }
    let dim = ids.len();
    let mut m = DMatrix::zeros(dim, dim);
    for (i, (line, rec)) in body.iter().enumerate() {
        if rec.len() != dim + 1 {
            return Err(parse_err(
                ParseErrorKind::NonRectangular,
                path,
                *line,
                rec.len().min(dim + 1) + 1,
                format!("expected {} fields, found {}", dim + 1, rec.len()),
            ));
        }
        if rec[0].trim() != ids[i] {
            return Err(parse_err(
                ParseErrorKind::BadHeader,
                path,
                *line,
                1,
                format!("row label '{}' does not match column '{}'", rec[0].trim(), ids[i]),
            ));
        }
        for j in 0..dim {
            m[(i, j)] = parse_value(&rec[j + 1], path, *line, j + 2)?;
        }
    }
    Ok((ids, m))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))?;
    let inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    Ok(())
}

/// Shortest representation that parses back to the same bits.
fn fmt_real(v: f64) -> String {
    format!("{v:?}")
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Writes draws as a long table `draw,peptide,value` (17 significant digits).
pub fn write_samples(samples: &DifferenceSamples, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "draw,peptide,value").map_err(io)?;
    for (q, id) in samples.peptide_ids.iter().enumerate() {
        let quoted = quote(id);
        for (r, v) in samples.peptide(q).iter().enumerate() {
            writeln!(w, "{r},{quoted},{v:.16e}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Draws read back from [`write_samples`] output.
#[derive(Clone, Debug, PartialEq)]
pub struct DrawTable {
    pub peptide_ids: Vec<String>,
    pub n_draws: usize,
    /// Peptide-major, as in [`DifferenceSamples::values`].
    pub values: Vec<f64>,
}

impl DrawTable {
    pub fn peptide(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_draws..(q + 1) * self.n_draws]
    }
}

pub fn read_samples(path: &Path) -> Result<DrawTable> {
    let rows = records(path)?;
    let Some(((hline, header), body)) = rows.split_first() else {
        return Err(parse_err(ParseErrorKind::EmptyFile, path, 1, 1, "draws file is empty"));
    };
    if header.iter().map(str::trim).ne(["draw", "peptide", "value"]) {
        return Err(parse_err(ParseErrorKind::BadHeader, path, *hline, 1, "expected header draw,peptide,value"));
    }
    let mut peptide_ids: Vec<String> = Vec::new();
    let mut values = Vec::with_capacity(body.len());
    let mut counts: Vec<usize> = Vec::new();
    for (line, rec) in body {
        if rec.len() != 3 {
            return Err(parse_err(
                ParseErrorKind::NonRectangular,
                path,
                *line,
                rec.len().min(3) + 1,
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        let id = &rec[1];
        if peptide_ids.last().map(String::as_str) != Some(id) {
            if peptide_ids.iter().any(|p| p == id) {
                return Err(parse_err(
                    ParseErrorKind::DuplicatePeptide,
                    path,
                    *line,
                    2,
                    format!("draws of peptide '{id}' are not contiguous"),
                ));
            }
            peptide_ids.push(id.to_string());
            counts.push(0);
        }
        let draw: usize = rec[0].trim().parse().map_err(|_| {
            parse_err(ParseErrorKind::InvalidNumber, path, *line, 1, format!("bad draw index '{}'", &rec[0]))
        })?;
        let count = counts.last_mut().expect("pushed above");
        if draw != *count {
            return Err(parse_err(
                ParseErrorKind::InvalidNumber,
                path,
                *line,
                1,
                format!("expected draw index {count}, found {draw}"),
            ));
        }
        *count += 1;
        values.push(parse_value(&rec[2], path, *line, 3)?);
    }
    let n_draws = counts.first().copied().unwrap_or(0);
    if let Some(q) = counts.iter().position(|&c| c != n_draws) {
        return Err(Error::InvalidInput(format!(
            "{}: peptide '{}' has {} draws, expected {n_draws}",
            path.display(),
            peptide_ids[q],
            counts[q]
        )));
    }
    Ok(DrawTable {
        peptide_ids,
        n_draws,
        values,
    })
}

const SUMMARY_HEADER: [&str; 10] = [
    "peptide",
    "mean",
    "lo",
    "hi",
    "prob_positive",
    "prob_negative",
    "prob_exceeds_tau",
    "flagged",
    "level",
    "tau",
];

pub fn write_summary(summary: &PosteriorSummary, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let e = |e| Error::csv(path, e);
    w.write_record(SUMMARY_HEADER).map_err(e)?;
    for s in &summary.peptides {
        w.write_record([
            s.peptide.clone(),
            fmt_real(s.mean),
            fmt_real(s.lo),
            fmt_real(s.hi),
            fmt_real(s.prob_positive),
            fmt_real(s.prob_negative),
            fmt_real(s.prob_exceeds_tau),
            s.flagged.to_string(),
            fmt_real(summary.level),
            fmt_real(summary.tau),
        ])
        .map_err(e)?;
    }
    finish(w, path)
}

pub fn read_summary(path: &Path) -> Result<PosteriorSummary> {
    let rows = records(path)?;
    let Some(((hline, header), body)) = rows.split_first() else {
        return Err(parse_err(ParseErrorKind::EmptyFile, path, 1, 1, "summary file is empty"));
    };
    if header.iter().map(str::trim).ne(SUMMARY_HEADER) {
        return Err(parse_err(ParseErrorKind::BadHeader, path, *hline, 1, "unexpected summary header"));
    }
    let mut peptides = Vec::with_capacity(body.len());
    let (mut level, mut tau) = (f64::NAN, f64::NAN);
    for (line, rec) in body {
        if rec.len() != SUMMARY_HEADER.len() {
            return Err(parse_err(
                ParseErrorKind::NonRectangular,
                path,
                *line,
                rec.len().min(SUMMARY_HEADER.len()) + 1,
                format!("expected {} fields, found {}", SUMMARY_HEADER.len(), rec.len()),
            ));
        }
        let num = |k: usize| parse_value(&rec[k], path, *line, k + 1);
        let flagged = match rec[7].trim() {
            "true" => true,
            "false" => false,
            other => {
                return Err(parse_err(
                    ParseErrorKind::InvalidNumber,
                    path,
                    *line,
                    8,
                    format!("'{other}' is not true/false"),
                ))
            }
        };
        peptides.push(PeptideSummary {
            peptide: rec[0].to_string(),
            mean: num(1)?,
            lo: num(2)?,
            hi: num(3)?,
            prob_positive: num(4)?,
            prob_negative: num(5)?,
            prob_exceeds_tau: num(6)?,
            flagged,
        });
        level = num(8)?;
        tau = num(9)?;
    }
    let average_prob_negative = if peptides.is_empty() {
        f64::NAN
    } else {
        peptides.iter().map(|p| p.prob_negative).sum::<f64>() / peptides.len() as f64
    };
    Ok(PosteriorSummary {
        level,
        tau,
        peptides,
        average_prob_negative,
    })
}

/// Equal-width histogram normalised to unit area.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn new(draws: &[f64], bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidInput("histograms need at least 2 bins".into()));
        }
        if draws.is_empty() {
            return Err(Error::InvalidInput("no draws to bin".into()));
        }
        let (mut lo, mut hi) = draws
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if hi <= lo {
            lo -= 0.5;
            hi += 0.5;
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &x in draws {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let edges = (0..=bins)
            .map(|k| if k == bins { hi } else { lo + k as f64 * width })
            .collect();
        let scale = 1.0 / (draws.len() as f64 * width);
        Ok(Self {
            edges,
            density: counts.iter().map(|&c| c as f64 * scale).collect(),
        })
    }

    pub fn area(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }
}

/// Writes `peptide,bin,left,right,density,ci_lo,ci_hi` rows, one per bin.
pub fn write_histogram(samples: &DifferenceSamples, bins: usize, level: f64, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let e = |e| Error::csv(path, e);
    w.write_record(["peptide", "bin", "left", "right", "density", "ci_lo", "ci_hi"])
        .map_err(e)?;
    let tail = 0.5 * (1.0 - level);
    for (q, id) in samples.peptide_ids.iter().enumerate() {
        let draws = samples.peptide(q);
        let hist = Histogram::new(draws, bins)?;
        let mut sorted = draws.to_vec();
        sorted.sort_by(f64::total_cmp);
        let ci_lo = fmt_real(quantile_sorted(&sorted, tail));
        let ci_hi = fmt_real(quantile_sorted(&sorted, 1.0 - tail));
        for k in 0..bins {
            w.write_record([
                id.clone(),
                k.to_string(),
                fmt_real(hist.edges[k]),
                fmt_real(hist.edges[k + 1]),
                fmt_real(hist.density[k]),
                ci_lo.clone(),
                ci_hi.clone(),
            ])
            .map_err(e)?;
        }
    }
    finish(w, path)
}
