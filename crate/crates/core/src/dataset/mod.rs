//! Raw listings → cleaned, encoded dataset.

mod encode;
mod filter;
mod raw;
mod split;
mod store;

pub use encode::{
    derive_features, encode_categoricals, encode_row, feature_names, CategoryVocab, CleanDataset, DerivedRecord,
    Feature, MissingField, Vocabulary, N_FEATURES,
};
pub use filter::{apply_filters, first_failing_rule, FilterConfig, FilterReport, Rule, RuleCount};
pub use raw::{parse_csv, parse_csv_path, CsvDialect, NumCell, ParsedListings, RawListing, RAW_COLUMNS};
pub use split::{split_dataset, split_sizes, subsample_indices, DatasetSplit, SPLIT_RATIOS};
pub use store::{DatasetFile, DATASET_FORMAT, DATASET_VERSION};

use crate::error::Result;

/// Output of [`clean_listings`].
#[derive(Debug, Clone)]
pub struct Cleaned {
    pub dataset: CleanDataset,
    pub records: Vec<DerivedRecord>,
    pub report: FilterReport,
}

/// Runs filtering, feature derivation and encoding. Rows that pass the
/// filters but cannot be derived are counted as missing values.
pub fn clean_listings(rows: Vec<RawListing>, cfg: &FilterConfig) -> Result<Cleaned> {
    let (survivors, mut report) = apply_filters(rows, cfg);
    let mut records = Vec::with_capacity(survivors.len());
    for row in &survivors {
        match derive_features(row, cfg) {
            Ok(r) => records.push(r),
            Err(_) => report.record(Rule::NotAvailable),
        }
    }
    let dataset = encode_categoricals(&records)?;
    Ok(Cleaned {
        dataset,
        records,
        report,
    })
}
