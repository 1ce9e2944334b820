//! Time-series panels: CSV ingestion, return computation and train/test splits.
//!
//! Panels are rectangular `T × d` matrices with one row per period and one
//! column per asset. Dates are carried as opaque, strictly increasing labels.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column layout of an input CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// First column is the date, every other column is one asset.
    #[default]
    Wide,
    /// Three columns: `date,asset,price`.
    Long,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub date_column: String,
    pub layout: Layout,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            date_column: "date".to_string(),
            layout: Layout::Wide,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReturnKind {
    #[default]
    Simple,
    Log,
}

fn validate_labels(dates: &[String], assets: &[String], values: &DMatrix<f64>) -> Result<()> {
    if values.nrows() != dates.len() {
        return Err(Error::Panel(format!(
            "{} rows but {} dates",
            values.nrows(),
            dates.len()
        )));
    }
    if values.ncols() != assets.len() {
        return Err(Error::Panel(format!(
            "{} columns but {} assets",
            values.ncols(),
            assets.len()
        )));
    }
    let mut seen = HashMap::with_capacity(assets.len());
    for (k, a) in assets.iter().enumerate() {
        if let Some(prev) = seen.insert(a.as_str(), k) {
            return Err(Error::Panel(format!(
                "duplicate asset `{a}` in columns {prev} and {k}"
            )));
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Panel("non-finite cell".into()));
    }
    Ok(())
}

/// Close prices, one row per trading day.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<String>,
    assets: Vec<String>,
    values: DMatrix<f64>,
}

impl PricePanel {
    /// Builds a panel. Dates are compared as strings and must be strictly
    /// increasing, which holds for ISO-8601 labels.
    pub fn new(dates: Vec<String>, assets: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        validate_labels(&dates, &assets, &values)?;
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Panel("dates are not strictly increasing".into()));
        }
        Ok(Self {
            dates,
            assets,
            values,
        })
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_assets(&self) -> usize {
        self.values.ncols()
    }

    /// Writes the panel as a wide CSV (`date,<asset>...`).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_wide(writer, "date", &self.dates, &self.assets, &self.values)
    }
}

/// Periodic returns. Row `t` is the return realized over period `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<String>,
    assets: Vec<String>,
    values: DMatrix<f64>,
}

impl ReturnPanel {
    pub fn new(dates: Vec<String>, assets: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        validate_labels(&dates, &assets, &values)?;
        if values.nrows() == 0 {
            return Err(Error::Panel("return panel has no rows".into()));
        }
        Ok(Self {
            dates,
            assets,
            values,
        })
    }

    /// Panel with synthetic `0..T-1` date labels.
    pub fn from_matrix(assets: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let dates = synthetic_dates(values.nrows());
        Self::new(dates, assets, values)
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Number of periods `T`.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of assets `d`.
    pub fn n_assets(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, k: usize) -> DVector<f64> {
        self.values.column(k).into_owned()
    }

    /// Single-asset panel for column `k`.
    pub fn asset(&self, k: usize) -> ReturnPanel {
        ReturnPanel {
            dates: self.dates.clone(),
            assets: vec![self.assets[k].clone()],
            values: self.values.columns(k, 1).into_owned(),
        }
    }

    /// Contiguous, non-empty row range.
    pub fn slice_rows(&self, rows: Range<usize>) -> Result<ReturnPanel> {
        if rows.end > self.len() || rows.start > rows.end {
            return Err(Error::Panel(format!(
                "row range {rows:?} outside 0..{}",
                self.len()
            )));
        }
        ReturnPanel::new(
            self.dates[rows.clone()].to_vec(),
            self.assets.clone(),
            self.values.rows(rows.start, rows.len()).into_owned(),
        )
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_wide(writer, "date", &self.dates, &self.assets, &self.values)
    }
}

pub(crate) fn synthetic_dates(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn write_wide<W: Write>(
    writer: W,
    date_header: &str,
    dates: &[String],
    assets: &[String],
    values: &DMatrix<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = Vec::with_capacity(assets.len() + 1);
    header.push(date_header.to_string());
    header.extend(assets.iter().cloned());
    w.write_record(&header)?;
    for (t, date) in dates.iter().enumerate() {
        let mut record = Vec::with_capacity(assets.len() + 1);
        record.push(date.clone());
        record.extend(values.row(t).iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Result of ingesting a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub panel: PricePanel,
    /// Rows removed because at least one cell was missing or not a positive
    /// finite price.
    pub dropped_rows: usize,
}

/// Reads a price panel from `path`.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Ingested> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Reads a price panel from any reader; see [`load_csv`].
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let date_idx = headers
        .iter()
        .position(|h| *h == schema.date_column)
        .ok_or_else(|| Error::Ingest {
            row: 1,
            column: schema.date_column.clone(),
            message: "date column not found in header".into(),
        })?;

    // (date, cells) in file order; None marks a missing cell
    let (assets, rows) = match schema.layout {
        Layout::Wide => read_wide(&mut rdr, &headers, date_idx)?,
        Layout::Long => read_long(&mut rdr, &headers, date_idx)?,
    };

    let mut rows = rows;
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Ingest {
            row: 0,
            column: schema.date_column.clone(),
            message: format!("duplicate date {}", w[0].0),
        });
    }

    let total = rows.len();
    let kept: Vec<(NaiveDate, Vec<f64>)> = rows
        .into_iter()
        .filter_map(|(date, cells)| {
            let clean: Option<Vec<f64>> = cells
                .into_iter()
                .map(|c| c.filter(|v| v.is_finite() && *v > 0.0))
                .collect();
            clean.map(|c| (date, c))
        })
        .collect();
    let dropped_rows = total - kept.len();
    if kept.is_empty() || assets.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let n = kept.len();
    let d = assets.len();
    let values = DMatrix::from_fn(n, d, |t, k| kept[t].1[k]);
    let dates = kept
        .iter()
        .map(|(date, _)| date.format("%Y-%m-%d").to_string())
        .collect();
    Ok(Ingested {
        panel: PricePanel::new(dates, assets, values)?,
        dropped_rows,
    })
}

type RawRows = Vec<(NaiveDate, Vec<Option<f64>>)>;

fn parse_date(raw: &str, row: usize, column: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|e| Error::Ingest {
        row,
        column: column.to_string(),
        message: format!("unparseable date `{raw}`: {e}"),
    })
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<Option<f64>> {
    if raw.is_empty() || matches!(raw.to_ascii_lowercase().as_str(), "na" | "nan" | "null") {
        return Ok(None);
    }
    raw.parse::<f64>().map(Some).map_err(|_| Error::Ingest {
        row,
        column: column.to_string(),
        message: format!("unparseable number `{raw}`"),
    })
}

fn read_wide<R: Read>(
    rdr: &mut csv::Reader<R>,
    headers: &[String],
    date_idx: usize,
) -> Result<(Vec<String>, RawRows)> {
    let assets: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != date_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let record = record?;
        let date = parse_date(record.get(date_idx).unwrap_or(""), line, &headers[date_idx])?;
        let mut cells = Vec::with_capacity(assets.len());
        for (j, name) in headers.iter().enumerate() {
            if j == date_idx {
                continue;
            }
            cells.push(parse_cell(record.get(j).unwrap_or(""), line, name)?);
        }
        rows.push((date, cells));
    }
    Ok((assets, rows))
}

fn read_long<R: Read>(
    rdr: &mut csv::Reader<R>,
    headers: &[String],
    date_idx: usize,
) -> Result<(Vec<String>, RawRows)> {
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Ingest {
                row: 1,
                column: name.to_string(),
                message: "column not found in header".into(),
            })
    };
    let asset_idx = find("asset")?;
    let price_idx = find("price")?;

    let mut assets: Vec<String> = Vec::new();
    let mut asset_pos: HashMap<String, usize> = HashMap::new();
    let mut by_date: HashMap<NaiveDate, Vec<Option<f64>>> = HashMap::new();
    let mut seen: HashMap<(NaiveDate, usize), usize> = HashMap::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let date = parse_date(record.get(date_idx).unwrap_or(""), line, &headers[date_idx])?;
        let asset = record.get(asset_idx).unwrap_or("").to_string();
        let price = parse_cell(record.get(price_idx).unwrap_or(""), line, "price")?;
        let k = *asset_pos.entry(asset.clone()).or_insert_with(|| {
            assets.push(asset.clone());
            assets.len() - 1
        });
        if let Some(first) = seen.insert((date, k), line) {
            return Err(Error::Ingest {
                row: line,
                column: "asset".into(),
                message: format!("duplicate ({date}, {asset}) entry, first at row {first}"),
            });
        }
        let cells = by_date.entry(date).or_default();
        if cells.len() <= k {
            cells.resize(k + 1, None);
        }
        cells[k] = price;
    }
    let d = assets.len();
    let rows = by_date
        .into_iter()
        .map(|(date, mut cells)| {
            cells.resize(d, None);
            (date, cells)
        })
        .collect();
    Ok((assets, rows))
}

/// Converts prices to returns. The output has `T - 1` rows labelled with
/// `dates[1..]`.
pub fn to_returns(prices: &PricePanel, kind: ReturnKind) -> Result<ReturnPanel> {
    let n = prices.len();
    if n < 2 {
        return Err(Error::Panel(format!(
            "need at least 2 prices to form returns, got {n}"
        )));
    }
    let p = prices.values();
    let mut out = DMatrix::zeros(n - 1, p.ncols());
    for t in 1..n {
        for k in 0..p.ncols() {
            let (prev, cur) = (p[(t - 1, k)], p[(t, k)]);
            if prev <= 0.0 || (kind == ReturnKind::Log && cur <= 0.0) {
                return Err(Error::Domain(format!(
                    "nonpositive price at row {t}, asset `{}`",
                    prices.assets()[k]
                )));
            }
            out[(t - 1, k)] = match kind {
                ReturnKind::Simple => cur / prev - 1.0,
                ReturnKind::Log => (cur / prev).ln(),
            };
        }
    }
    ReturnPanel::new(prices.dates()[1..].to_vec(), prices.assets().to_vec(), out)
}

/// Fraction of rows assigned to the training segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
        }
    }
}

impl SplitSpec {
    /// Training rows for a panel of `t` rows.
    pub fn train_len(&self, t: usize) -> usize {
        (self.train_fraction * t as f64).floor() as usize
    }
}

/// Splits a panel into a leading train segment and a trailing test segment.
pub fn split(returns: &ReturnPanel, spec: SplitSpec) -> Result<(ReturnPanel, ReturnPanel)> {
    let t = returns.len();
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Split(format!(
            "train fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    if t < 5 {
        return Err(Error::Split(format!("need at least 5 rows, got {t}")));
    }
    let n_train = spec.train_len(t);
    if n_train == 0 || n_train >= t {
        return Err(Error::Split(format!(
            "fraction {} of {t} rows leaves an empty segment",
            spec.train_fraction
        )));
    }
    Ok((returns.slice_rows(0..n_train)?, returns.slice_rows(n_train..t)?))
}
