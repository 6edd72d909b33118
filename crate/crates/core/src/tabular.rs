//! Tabular data model and ingestion.
//!
//! A [`Table`] is an immutable set of named, typed columns. Tables come from
//! CSV/TSV text or from a *workbook bundle*: a ZIP archive holding one CSV per
//! sheet plus a `manifest.json` of the form
//! `{"sheets":[{"name":"Sheet1","file":"sheet1.csv"}]}`.
//!
//! Native spreadsheet formats are not parsed. Anything that is not text or a
//! bundle is reported as [`SourceFormat::UnsupportedBinary`]; a converter can be
//! plugged in front of [`ingest`] through [`FormatConverter`].

use std::collections::HashSet;
use std::fmt;
use std::io::{Cursor, Read};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TabularError {
    #[error("header error: {0}")]
    Header(String),
    #[error("row {row} has {found} fields, header has {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("malformed CSV: {0}")]
    Malformed(String),
    #[error("unsupported format ({detail}); convert to CSV or CSV bundle")]
    UnsupportedFormat { detail: String },
    #[error("unknown sheet `{0}`")]
    UnknownSheet(String),
    #[error("invalid workbook bundle: {0}")]
    Bundle(String),
    #[error("table has no numeric columns")]
    NoNumericColumns,
    #[error("empty input")]
    Empty,
    #[error("invalid table: {0}")]
    Invalid(String),
}

impl TabularError {
    /// Human-readable remedy for the caller, when one exists.
    pub fn remedy(&self) -> Option<&'static str> {
        match self {
            TabularError::UnsupportedFormat { .. } => Some("convert to CSV or CSV bundle"),
            TabularError::UnknownSheet(_) => Some("choose one of the sheets listed in the report"),
            TabularError::RaggedRow { .. } => Some("make every row as wide as the header"),
            TabularError::Header(_) => Some("give every column a distinct, non-empty name"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DType {
    Numeric,
    Text,
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DType::Numeric => f.write_str("numeric"),
            DType::Text => f.write_str("text"),
        }
    }
}

/// Column cells. `None` is a missing cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dtype", content = "values")]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    Text(Vec<Option<String>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    name: String,
    #[serde(flatten)]
    data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Numeric(values),
        }
    }

    pub fn text(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Text(values),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dtype(&self) -> DType {
        match self.data {
            ColumnData::Numeric(_) => DType::Numeric,
            ColumnData::Text(_) => DType::Text,
        }
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_numeric(&self) -> Option<&[Option<f64>]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&[Option<String>]> {
        match &self.data {
            ColumnData::Text(v) => Some(v),
            ColumnData::Numeric(_) => None,
        }
    }

    pub fn missing_count(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.iter().filter(|c| c.is_none()).count(),
            ColumnData::Text(v) => v.iter().filter(|c| c.is_none()).count(),
        }
    }

    /// Cell rendered as CSV text (empty for missing).
    pub fn cell_text(&self, row: usize) -> String {
        match &self.data {
            ColumnData::Numeric(v) => v[row].map(format_number).unwrap_or_default(),
            ColumnData::Text(v) => v[row].clone().unwrap_or_default(),
        }
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_number(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct Table {
    name: String,
    columns: Vec<Column>,
    n_rows: usize,
}

#[derive(Deserialize)]
struct RawTable {
    name: String,
    columns: Vec<Column>,
    n_rows: usize,
}

impl TryFrom<RawTable> for Table {
    type Error = TabularError;

    fn try_from(raw: RawTable) -> Result<Self, Self::Error> {
        let table = Table::new(raw.name, raw.columns)?;
        if table.n_rows != raw.n_rows && !table.columns.is_empty() {
            return Err(TabularError::Invalid("n_rows disagrees with column length".into()));
        }
        Ok(Table {
            n_rows: raw.n_rows,
            ..table
        })
    }
}

impl Table {
    /// Builds a table, checking name uniqueness and equal column lengths.
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<Self, TabularError> {
        let mut seen = HashSet::new();
        for c in &columns {
            if c.name.trim().is_empty() {
                return Err(TabularError::Header("empty column name".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(TabularError::Header(format!("duplicate column name `{}`", c.name)));
            }
        }
        let n_rows = columns.first().map(Column::len).unwrap_or(0);
        if let Some(c) = columns.iter().find(|c| c.len() != n_rows) {
            return Err(TabularError::Invalid(format!(
                "column `{}` has {} cells, expected {n_rows}",
                c.name,
                c.len()
            )));
        }
        Ok(Table {
            name: name.into(),
            columns,
            n_rows,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Copy of this table under another name.
    pub fn renamed(&self, name: impl Into<String>) -> Table {
        Table {
            name: name.into(),
            ..self.clone()
        }
    }

    /// Keeps the named columns, in table order.
    pub fn select(&self, names: &[String]) -> Table {
        let columns = self
            .columns
            .iter()
            .filter(|c| names.iter().any(|n| n == &c.name))
            .cloned()
            .collect();
        Table {
            name: self.name.clone(),
            columns,
            n_rows: self.n_rows,
        }
    }

    /// Drops the named columns.
    pub fn without(&self, names: &[String]) -> Table {
        let columns = self
            .columns
            .iter()
            .filter(|c| !names.iter().any(|n| n == &c.name))
            .cloned()
            .collect();
        Table {
            name: self.name.clone(),
            columns,
            n_rows: self.n_rows,
        }
    }

    /// A label per row: the first text column's value, else the 1-based row number.
    pub fn row_labels(&self) -> Vec<String> {
        let text = self.columns.iter().find_map(Column::as_text);
        (0..self.n_rows)
            .map(|i| match text.and_then(|t| t[i].clone()) {
                Some(s) => s,
                None => format!("row {}", i + 1),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceFormat {
    Csv,
    Tsv,
    WorkbookBundle,
    UnsupportedBinary,
}

impl SourceFormat {
    pub fn describe(&self) -> &'static str {
        match self {
            SourceFormat::Csv => "a CSV file",
            SourceFormat::Tsv => "a tab-separated file",
            SourceFormat::WorkbookBundle => "a workbook bundle",
            SourceFormat::UnsupportedBinary => "a binary file I cannot read",
        }
    }
}

/// A multi-sheet workbook: sheet names with their raw CSV bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Workbook {
    sheets: Vec<(String, Vec<u8>)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    sheets: Vec<ManifestSheet>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestSheet {
    name: String,
    file: String,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl Workbook {
    pub fn new(sheets: Vec<(String, Vec<u8>)>) -> Result<Self, TabularError> {
        if sheets.is_empty() {
            return Err(TabularError::Bundle("workbook has no sheets".into()));
        }
        let mut seen = HashSet::new();
        for (name, _) in &sheets {
            if !seen.insert(name.as_str()) {
                return Err(TabularError::Bundle(format!("duplicate sheet name `{name}`")));
            }
        }
        Ok(Workbook { sheets })
    }

    pub fn sheet_names(&self) -> Vec<String> {
        self.sheets.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn sheets(&self) -> &[(String, Vec<u8>)] {
        &self.sheets
    }

    /// Reads a bundle ZIP.
    pub fn from_bundle(bytes: &[u8]) -> Result<Self, TabularError> {
        let mut archive = zip::ZipArchive::new(Cursor::new(bytes)).map_err(|e| TabularError::Bundle(e.to_string()))?;
        let manifest: Manifest = {
            let mut entry = archive
                .by_name(MANIFEST_NAME)
                .map_err(|_| TabularError::Bundle(format!("missing {MANIFEST_NAME}")))?;
            let mut text = String::new();
            entry
                .read_to_string(&mut text)
                .map_err(|e| TabularError::Bundle(e.to_string()))?;
            serde_json::from_str(&text).map_err(|e| TabularError::Bundle(format!("{MANIFEST_NAME}: {e}")))?
        };
        let mut sheets = Vec::with_capacity(manifest.sheets.len());
        for sheet in manifest.sheets {
            let mut entry = archive.by_name(&sheet.file).map_err(|_| {
                TabularError::Bundle(format!(
                    "sheet `{}` points at missing file `{}`",
                    sheet.name, sheet.file
                ))
            })?;
            let mut data = Vec::new();
            entry
                .read_to_end(&mut data)
                .map_err(|e| TabularError::Bundle(e.to_string()))?;
            sheets.push((sheet.name, data));
        }
        Workbook::new(sheets)
    }

    /// Writes this workbook as a bundle ZIP (sheets stored as `sheetN.csv`).
    pub fn to_bundle(&self) -> Vec<u8> {
        use std::io::Write;
        let mut out = Cursor::new(Vec::new());
        {
            let mut zip = zip::ZipWriter::new(&mut out);
            let opts = zip::write::SimpleFileOptions::default().compression_method(zip::CompressionMethod::Deflated);
            let manifest = Manifest {
                sheets: self
                    .sheets
                    .iter()
                    .enumerate()
                    .map(|(i, (name, _))| ManifestSheet {
                        name: name.clone(),
                        file: format!("sheet{}.csv", i + 1),
                    })
                    .collect(),
            };
            zip.start_file(MANIFEST_NAME, opts).expect("zip in memory");
            zip.write_all(serde_json::to_string(&manifest).expect("manifest").as_bytes())
                .expect("zip in memory");
            for (i, (_, data)) in self.sheets.iter().enumerate() {
                zip.start_file(format!("sheet{}.csv", i + 1), opts)
                    .expect("zip in memory");
                zip.write_all(data).expect("zip in memory");
            }
            zip.finish().expect("zip in memory");
        }
        out.into_inner()
    }
}

/// Which sheets of a workbook to transform.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SheetSelection {
    #[default]
    All,
    First,
    Names(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestionReport {
    pub source_format: SourceFormat,
    pub sheets_found: usize,
    pub sheet_names: Vec<String>,
    pub sheets_transformed: Vec<String>,
    pub tables: Vec<Table>,
    pub warnings: Vec<String>,
}

impl IngestionReport {
    /// JSON summary without cell data.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "source_format": self.source_format,
            "sheets_found": self.sheets_found,
            "sheet_names": self.sheet_names,
            "sheets_transformed": self.sheets_transformed,
            "tables": self.tables.iter().map(|t| serde_json::json!({
                "name": t.name(),
                "n_rows": t.n_rows(),
                "columns": t.columns().iter().map(|c| serde_json::json!({
                    "name": c.name(),
                    "dtype": c.dtype(),
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "warnings": self.warnings,
        })
    }
}

/// Converts an unsupported input (e.g. a native spreadsheet) to CSV or a bundle.
pub trait FormatConverter {
    /// Returns converted bytes and a new filename hint, or `None` if it cannot help.
    fn convert(&self, bytes: &[u8], filename_hint: &str) -> Option<(Vec<u8>, String)>;
}

const ZIP_MAGIC: &[u8] = b"PK\x03\x04";

pub fn detect_format(bytes: &[u8], filename_hint: &str) -> SourceFormat {
    if bytes.starts_with(ZIP_MAGIC) {
        let has_manifest = zip::ZipArchive::new(Cursor::new(bytes))
            .map(|mut a| a.by_name(MANIFEST_NAME).is_ok())
            .unwrap_or(false);
        return if has_manifest {
            SourceFormat::WorkbookBundle
        } else {
            SourceFormat::UnsupportedBinary
        };
    }
    if bytes.is_empty() || bytes.contains(&0) || std::str::from_utf8(bytes).is_err() {
        return SourceFormat::UnsupportedBinary;
    }
    if filename_hint.to_ascii_lowercase().ends_with(".tsv") {
        SourceFormat::Tsv
    } else {
        SourceFormat::Csv
    }
}

/// True for decimals: optional sign, digits with optional fraction, optional exponent.
pub fn is_decimal(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return false;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return false;
        }
    }
    i == b.len()
}

/// Splits RFC-4180 text into records. Quoted fields may hold delimiters,
/// quotes (doubled) and newlines; CRLF and LF both end a record.
fn split_records(text: &str, delimiter: char) -> Result<Vec<Vec<String>>, TabularError> {
    let mut records = Vec::new();
    let mut record = Vec::new();
    let mut field = String::new();
    let mut chars = text.chars().peekable();
    let mut in_quotes = false;
    let mut field_started = false;
    let mut line = 1usize;
    while let Some(c) = chars.next() {
        if in_quotes {
            match c {
                '"' if chars.peek() == Some(&'"') => {
                    chars.next();
                    field.push('"');
                }
                '"' => in_quotes = false,
                '\n' => {
                    line += 1;
                    field.push(c);
                }
                _ => field.push(c),
            }
            continue;
        }
        match c {
            '"' if !field_started => {
                in_quotes = true;
                field_started = true;
            }
            '"' => {
                return Err(TabularError::Malformed(format!("stray quote on line {line}")));
            }
            '\r' if chars.peek() == Some(&'\n') => {}
            '\n' => {
                line += 1;
                record.push(std::mem::take(&mut field));
                records.push(std::mem::take(&mut record));
                field_started = false;
            }
            c if c == delimiter => {
                record.push(std::mem::take(&mut field));
                field_started = false;
            }
            _ => {
                field.push(c);
                field_started = true;
            }
        }
    }
    if in_quotes {
        return Err(TabularError::Malformed("unterminated quoted field".into()));
    }
    if field_started || !record.is_empty() {
        record.push(field);
        records.push(record);
    }
    Ok(records)
}

/// Parses delimited text with a mandatory header row.
///
/// A blank line is a single empty field: a missing cell in a one-column file,
/// and skipped otherwise.
pub fn parse_csv(bytes: &[u8], delimiter: char, name: &str) -> Result<Table, TabularError> {
    if delimiter == '"' || delimiter == '\n' || delimiter == '\r' {
        return Err(TabularError::Malformed(format!("invalid delimiter {delimiter:?}")));
    }
    let text = std::str::from_utf8(bytes).map_err(|e| TabularError::Malformed(e.to_string()))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    if text.trim().is_empty() {
        return Err(TabularError::Empty);
    }
    let mut records = split_records(text, delimiter)?.into_iter();
    let header = records.next().ok_or(TabularError::Empty)?;
    let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    let mut seen = HashSet::new();
    for (i, n) in names.iter().enumerate() {
        if n.is_empty() {
            return Err(TabularError::Header(format!("column {} has an empty name", i + 1)));
        }
        if !seen.insert(n.as_str()) {
            return Err(TabularError::Header(format!("duplicate column name `{n}`")));
        }
    }

    let width = names.len();
    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); width];
    for (idx, record) in records.enumerate() {
        if width > 1 && record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(TabularError::RaggedRow {
                row: idx + 1,
                expected: width,
                found: record.len(),
            });
        }
        for (col, field) in record.into_iter().enumerate() {
            cells[col].push(if field.is_empty() { None } else { Some(field) });
        }
    }

    let columns = names
        .into_iter()
        .zip(cells)
        .map(|(name, raw)| {
            if raw.iter().flatten().all(|s| is_decimal(s.trim())) {
                let values = raw
                    .iter()
                    .map(|c| c.as_ref().map(|s| s.trim().parse::<f64>().expect("checked decimal")))
                    .collect();
                Column::numeric(name, values)
            } else {
                Column::text(name, raw)
            }
        })
        .collect();
    Table::new(name, columns)
}

fn quote_field(field: &str, delimiter: char, out: &mut String) {
    let needs = field.contains(delimiter) || field.contains('"') || field.contains('\n') || field.contains('\r');
    if needs {
        out.push('"');
        out.push_str(&field.replace('"', "\"\""));
        out.push('"');
    } else {
        out.push_str(field);
    }
}

/// Writes a table as CSV (RFC-4180 quoting, LF line endings).
pub fn serialize_csv(table: &Table, delimiter: char) -> String {
    let mut out = String::new();
    let write_row = |fields: Vec<String>, out: &mut String| {
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                out.push(delimiter);
            }
            quote_field(f, delimiter, out);
        }
        out.push('\n');
    };
    write_row(table.column_names(), &mut out);
    for row in 0..table.n_rows() {
        write_row(table.columns().iter().map(|c| c.cell_text(row)).collect(), &mut out);
    }
    out
}

pub fn ingest(bytes: &[u8], filename_hint: &str, selection: &SheetSelection) -> Result<IngestionReport, TabularError> {
    if bytes.is_empty() {
        return Err(TabularError::Empty);
    }
    let format = detect_format(bytes, filename_hint);
    let stem = table_stem(filename_hint);
    match format {
        SourceFormat::UnsupportedBinary => Err(TabularError::UnsupportedFormat {
            detail: format!("`{filename_hint}` is neither delimited text nor a workbook bundle"),
        }),
        SourceFormat::Csv | SourceFormat::Tsv => {
            let delimiter = if format == SourceFormat::Tsv { '\t' } else { ',' };
            let mut warnings = Vec::new();
            if let SheetSelection::Names(names) = selection {
                if let Some(other) = names.iter().find(|n| n.as_str() != stem) {
                    return Err(TabularError::UnknownSheet(other.clone()));
                }
            }
            let table = parse_csv(bytes, delimiter, &stem)?;
            if table.n_rows() == 0 {
                warnings.push("the file has a header but no data rows".to_string());
            }
            Ok(IngestionReport {
                source_format: format,
                sheets_found: 1,
                sheet_names: vec![stem.clone()],
                sheets_transformed: vec![stem],
                tables: vec![table],
                warnings,
            })
        }
        SourceFormat::WorkbookBundle => {
            let workbook = Workbook::from_bundle(bytes)?;
            let names = workbook.sheet_names();
            let chosen: Vec<String> = match selection {
                SheetSelection::All => names.clone(),
                SheetSelection::First => vec![names[0].clone()],
                SheetSelection::Names(wanted) => {
                    if let Some(missing) = wanted.iter().find(|w| !names.contains(w)) {
                        return Err(TabularError::UnknownSheet(missing.clone()));
                    }
                    // Keep workbook order.
                    names.iter().filter(|n| wanted.contains(n)).cloned().collect()
                }
            };
            let mut tables = Vec::new();
            let mut warnings = Vec::new();
            for (name, data) in workbook.sheets() {
                if !chosen.contains(name) {
                    continue;
                }
                let table = parse_csv(data, ',', name).map_err(|e| match e {
                    TabularError::RaggedRow { .. } | TabularError::Header(_) => {
                        TabularError::Bundle(format!("sheet `{name}`: {e}"))
                    }
                    other => other,
                })?;
                if table.n_rows() == 0 {
                    warnings.push(format!("sheet `{name}` has no data rows"));
                }
                tables.push(table);
            }
            Ok(IngestionReport {
                source_format: format,
                sheets_found: names.len(),
                sheet_names: names,
                sheets_transformed: chosen,
                tables,
                warnings,
            })
        }
    }
}

/// Like [`ingest`], but gives a converter a chance at unsupported input first.
pub fn ingest_with(
    converter: &dyn FormatConverter,
    bytes: &[u8],
    filename_hint: &str,
    selection: &SheetSelection,
) -> Result<IngestionReport, TabularError> {
    if !bytes.is_empty() && detect_format(bytes, filename_hint) == SourceFormat::UnsupportedBinary {
        if let Some((converted, hint)) = converter.convert(bytes, filename_hint) {
            return ingest(&converted, &hint, selection);
        }
    }
    ingest(bytes, filename_hint, selection)
}

pub fn table_stem(filename: &str) -> String {
    let base = filename.rsplit(['/', '\\']).next().unwrap_or(filename);
    let stem = match base.rfind('.') {
        Some(i) if i > 0 => &base[..i],
        _ => base,
    };
    if stem.is_empty() {
        "data".to_string()
    } else {
        stem.to_string()
    }
}

/// The numeric columns of `table`, in order.
pub fn numeric_view(table: &Table) -> Result<Table, TabularError> {
    let columns: Vec<Column> = table
        .columns()
        .iter()
        .filter(|c| c.dtype() == DType::Numeric)
        .cloned()
        .collect();
    if columns.is_empty() {
        return Err(TabularError::NoNumericColumns);
    }
    Ok(Table {
        name: table.name.clone(),
        columns,
        n_rows: table.n_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_plain_csv() {
        assert_eq!(detect_format(b"a,b\n1,2\n", "x.csv"), SourceFormat::Csv);
        assert_eq!(detect_format(b"a\tb\n1\t2\n", "x.tsv"), SourceFormat::Tsv);
    }

    #[test]
    fn zip_without_manifest_is_unsupported() {
        let mut out = Cursor::new(Vec::new());
        {
            use std::io::Write;
            let mut zip = zip::ZipWriter::new(&mut out);
            zip.start_file("[Content_Types].xml", zip::write::SimpleFileOptions::default())
                .unwrap();
            zip.write_all(b"<Types/>").unwrap();
            zip.finish().unwrap();
        }
        assert_eq!(
            detect_format(&out.into_inner(), "book.xlsx"),
            SourceFormat::UnsupportedBinary
        );
        assert_eq!(detect_format(&[0, 1, 2, 3], "x.bin"), SourceFormat::UnsupportedBinary);
    }

    #[test]
    fn parses_types_and_missing() {
        let t = parse_csv(b"a,b\n1,x\n2,y\n", ',', "t").unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.columns()[0].as_numeric().unwrap(), &[Some(1.0), Some(2.0)]);
        assert_eq!(
            t.columns()[1].as_text().unwrap(),
            &[Some("x".to_string()), Some("y".to_string())]
        );

        let t = parse_csv(b"a\n1\n\n3\n", ',', "t").unwrap();
        assert_eq!(t.columns()[0].as_numeric().unwrap(), &[Some(1.0), None, Some(3.0)]);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            parse_csv(b"a,a\n1,2\n", ',', "t"),
            Err(TabularError::Header(_))
        ));
        assert!(matches!(
            parse_csv(b"a,\n1,2\n", ',', "t"),
            Err(TabularError::Header(_))
        ));
    }

    #[test]
    fn ragged_row_reports_index() {
        let err = parse_csv(b"a,b\n1,2\n3\n", ',', "t").unwrap_err();
        assert_eq!(
            err,
            TabularError::RaggedRow {
                row: 2,
                expected: 2,
                found: 1
            }
        );
    }

    #[test]
    fn quoted_fields_and_crlf() {
        let t = parse_csv(b"name,v\r\n\"a, b\",1\r\n\"say \"\"hi\"\"\nthere\",2\r\n", ',', "t").unwrap();
        let names = t.columns()[0].as_text().unwrap();
        assert_eq!(names[0].as_deref(), Some("a, b"));
        assert_eq!(names[1].as_deref(), Some("say \"hi\"\nthere"));
        let back = parse_csv(serialize_csv(&t, ',').as_bytes(), ',', "t").unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn decimal_grammar() {
        for ok in ["1", "-2.5", "+.5", "3.", "1e5", "2.5E-3", "007"] {
            assert!(is_decimal(ok), "{ok}");
        }
        for bad in ["", ".", "-", "1e", "e5", "1,5", "NaN", "inf", "0x10", "1.2.3"] {
            assert!(!is_decimal(bad), "{bad}");
        }
    }

    #[test]
    fn numeric_view_keeps_order() {
        let t = parse_csv(b"a,b,c\n1,x,3\n2,y,4\n", ',', "t").unwrap();
        let v = numeric_view(&t).unwrap();
        assert_eq!(v.column_names(), vec!["a", "c"]);
        let text = parse_csv(b"b\nx\n", ',', "t").unwrap();
        assert_eq!(numeric_view(&text), Err(TabularError::NoNumericColumns));
        let all = parse_csv(b"a,c\n1,3\n", ',', "t").unwrap();
        assert_eq!(numeric_view(&all).unwrap(), all);
    }

    fn five_sheet_bundle() -> Vec<u8> {
        let sheets = (1..=5)
            .map(|i| (format!("Sheet{i}"), format!("x,y\n{i},{}\n", i * 2).into_bytes()))
            .collect();
        Workbook::new(sheets).unwrap().to_bundle()
    }

    #[test]
    fn bundle_selection() {
        let bytes = five_sheet_bundle();
        assert_eq!(detect_format(&bytes, "book.zip"), SourceFormat::WorkbookBundle);
        let report = ingest(&bytes, "book.zip", &SheetSelection::Names(vec!["Sheet1".into()])).unwrap();
        assert_eq!(report.sheets_found, 5);
        assert_eq!(report.sheets_transformed, vec!["Sheet1"]);
        assert_eq!(report.tables.len(), 1);

        let first = ingest(&bytes, "book.zip", &SheetSelection::First).unwrap();
        assert_eq!(first.sheets_transformed, vec!["Sheet1"]);

        let all = ingest(&bytes, "book.zip", &SheetSelection::All).unwrap();
        assert_eq!(all.tables.len(), 5);

        let err = ingest(&bytes, "book.zip", &SheetSelection::Names(vec!["Nope".into()])).unwrap_err();
        assert_eq!(err, TabularError::UnknownSheet("Nope".into()));
    }

    #[test]
    fn single_csv_ingest() {
        let r = ingest(b"a,b\n1,2\n", "data/x.csv", &SheetSelection::All).unwrap();
        assert_eq!(r.sheets_found, 1);
        assert_eq!(r.tables.len(), 1);
        assert_eq!(r.tables[0].name(), "x");
    }

    #[test]
    fn unsupported_carries_remedy() {
        let err = ingest(&[0xd0, 0xcf, 0x11, 0xe0, 0], "old.xls", &SheetSelection::All).unwrap_err();
        assert!(err.to_string().contains("convert to CSV or CSV bundle"));
        assert_eq!(err.remedy(), Some("convert to CSV or CSV bundle"));
    }

    struct Upper;
    impl FormatConverter for Upper {
        fn convert(&self, _bytes: &[u8], _hint: &str) -> Option<(Vec<u8>, String)> {
            Some((b"a\n1\n".to_vec(), "converted.csv".into()))
        }
    }

    #[test]
    fn converter_extension_point() {
        let r = ingest_with(&Upper, &[0, 1, 2], "x.xlsx", &SheetSelection::All).unwrap();
        assert_eq!(r.tables[0].name(), "converted");
    }

    #[test]
    fn table_json_round_trip() {
        let t = parse_csv(b"a,b\n1,x\n,y\n", ',', "t").unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: Table = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}
