use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};

/// Column names of the listings dump, in dump order.
pub const RAW_COLUMNS: [&str; 20] = [
    "dateCrawled",
    "name",
    "seller",
    "offerType",
    "price",
    "abtest",
    "vehicleType",
    "yearOfRegistration",
    "gearbox",
    "powerPS",
    "model",
    "kilometer",
    "monthOfRegistration",
    "fuelType",
    "brand",
    "notRepairedDamage",
    "dateCreated",
    "nrOfPictures",
    "postalCode",
    "lastSeen",
];

/// A numeric cell as it appeared in the dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NumCell {
    #[default]
    Empty,
    Value(i64),
    /// Present but not an integer.
    Malformed,
}

impl NumCell {
    fn parse(s: &str) -> Self {
        let s = s.trim();
        if s.is_empty() {
            return NumCell::Empty;
        }
        s.parse().map_or(NumCell::Malformed, NumCell::Value)
    }

    pub fn value(self) -> Option<i64> {
        match self {
            NumCell::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_empty(self) -> bool {
        self == NumCell::Empty
    }
}

impl From<i64> for NumCell {
    fn from(v: i64) -> Self {
        NumCell::Value(v)
    }
}

/// One unvalidated row of the dump. Nothing is checked here.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawListing {
    pub date_crawled: String,
    pub name: String,
    pub seller: String,
    pub offer_type: String,
    pub price: NumCell,
    pub abtest: String,
    pub vehicle_type: Option<String>,
    pub year_of_registration: NumCell,
    pub gearbox: Option<String>,
    pub power_ps: NumCell,
    pub model: Option<String>,
    pub kilometer: NumCell,
    pub month_of_registration: NumCell,
    pub fuel_type: Option<String>,
    pub brand: Option<String>,
    pub not_repaired_damage: Option<String>,
    pub date_created: String,
    pub nr_of_pictures: NumCell,
    pub postal_code: String,
    pub last_seen: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvDialect {
    pub delimiter: u8,
    pub quote: u8,
}

impl Default for CsvDialect {
    fn default() -> Self {
        Self {
            delimiter: b',',
            quote: b'"',
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedListings {
    pub rows: Vec<RawListing>,
    /// Data rows skipped because their column count did not match the header.
    pub parse_errors: usize,
}

/// Decodes a field as UTF-8, falling back to Latin-1 for the parts of the dump
/// that are not valid UTF-8.
fn decode(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_owned(),
        Err(_) => bytes.iter().map(|&b| b as char).collect(),
    }
}

fn opt_text(s: String) -> Option<String> {
    if s.trim().is_empty() {
        None
    } else {
        Some(s)
    }
}

pub fn parse_csv_path(path: impl AsRef<Path>, dialect: CsvDialect) -> Result<ParsedListings> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(BufReader::new(file), dialect)
}

pub fn parse_csv<R: Read>(source: R, dialect: CsvDialect) -> Result<ParsedListings> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(dialect.delimiter)
        .quote(dialect.quote)
        .has_headers(true)
        .flexible(true)
        .from_reader(source);

    let header: Vec<String> = reader.byte_headers()?.iter().map(decode).collect();
    let mut positions = [0usize; RAW_COLUMNS.len()];
    for (slot, name) in positions.iter_mut().zip(RAW_COLUMNS) {
        *slot = header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))?;
    }

    let mut out = ParsedListings::default();
    let mut record = csv::ByteRecord::new();
    while reader.read_byte_record(&mut record)? {
        if record.len() != header.len() {
            out.parse_errors += 1;
            continue;
        }
        let field = |col: usize| decode(&record[positions[col]]);
        let num = |col: usize| NumCell::parse(&field(col));
        out.rows.push(RawListing {
            date_crawled: field(0),
            name: field(1),
            seller: field(2),
            offer_type: field(3),
            price: num(4),
            abtest: field(5),
            vehicle_type: opt_text(field(6)),
            year_of_registration: num(7),
            gearbox: opt_text(field(8)),
            power_ps: num(9),
            model: opt_text(field(10)),
            kilometer: num(11),
            month_of_registration: num(12),
            fuel_type: opt_text(field(13)),
            brand: opt_text(field(14)),
            not_repaired_damage: opt_text(field(15)),
            date_created: field(16),
            nr_of_pictures: num(17),
            postal_code: field(18),
            last_seen: field(19),
        });
    }
    Ok(out)
}
