use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encode::{feature_names, CategoryVocab, CleanDataset, N_FEATURES};
use super::filter::{FilterConfig, FilterReport};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DATASET_FORMAT: &str = "carprice-clean-dataset";
pub const DATASET_VERSION: u32 = 1;

/// On-disk form of a cleaned dataset: one integer array per column, the
/// vocabularies needed to decode them, and the cleaning provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetFile {
    pub format: String,
    pub version: u32,
    pub config: FilterConfig,
    pub filter_report: FilterReport,
    pub vocab: CategoryVocab,
    pub column_order: Vec<String>,
    pub price: Vec<i64>,
    pub columns: Vec<Vec<i64>>,
}

impl DatasetFile {
    pub fn new(dataset: &CleanDataset, config: FilterConfig, filter_report: FilterReport) -> Self {
        Self {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            config,
            filter_report,
            vocab: dataset.vocab.clone(),
            column_order: feature_names(),
            price: dataset.target.iter().map(|&p| p as i64).collect(),
            columns: (0..N_FEATURES)
                .map(|j| dataset.features.column(j).map(|v| v as i64).collect())
                .collect(),
        }
    }

    pub fn to_dataset(&self) -> Result<CleanDataset> {
        if self.format != DATASET_FORMAT {
            return Err(Error::MalformedDataset(format!("unexpected format `{}`", self.format)));
        }
        if self.version != DATASET_VERSION {
            return Err(Error::MalformedDataset(format!(
                "unsupported version {} (supported: {DATASET_VERSION})",
                self.version
            )));
        }
        if self.column_order != feature_names() || self.columns.len() != N_FEATURES {
            return Err(Error::MalformedDataset("unexpected column layout".into()));
        }
        let n = self.price.len();
        if self.columns.iter().any(|c| c.len() != n) {
            return Err(Error::MalformedDataset("columns have unequal lengths".into()));
        }
        let mut features = Matrix::zeros(n, N_FEATURES);
        for (j, col) in self.columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                features.set(i, j, v as f64);
            }
        }
        Ok(CleanDataset {
            features,
            target: self.price.iter().map(|&p| p as f64).collect(),
            vocab: self.vocab.clone(),
        })
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}
