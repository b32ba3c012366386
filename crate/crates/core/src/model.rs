//! Fitted model bundle and its binary file format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  b"CPRF"
//! u32    format version
//! u32    header length, then the header as UTF-8 JSON
//! u32    feature count d, then d × f64 cumulative impurity decrease
//! u32    tree count; per tree: u32 node count, then nodes
//!          leaf:  u8 0, f64 value, u64 n_samples
//!          split: u8 1, u32 feature, f64 threshold, u32 left, u32 right,
//!                 u64 n_samples, f64 improvement
//! [u8;32] SHA-256 of every preceding byte
//! ```
//!
//! Floats live in the binary payload so they round-trip bit for bit; the JSON
//! header keeps the file inspectable with `head -c`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{feature_names, CategoryVocab, Feature, FilterConfig, Vocabulary, N_FEATURES};
use crate::error::{Error, Result};
use crate::forest::{Hyperparams, Node, Prediction, RandomForest, RegressionTree};
use crate::seed::SEED_MIXER;

pub const MAGIC: &[u8; 4] = b"CPRF";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: i64,
    /// `None` means unbounded above.
    pub max: Option<i64>,
}

impl Range {
    pub fn contains(&self, v: i64) -> bool {
        v >= self.min && self.max.is_none_or(|m| v <= m)
    }
}

/// Admissible values for the numeric inputs, taken from the cleaning bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NumericBounds {
    pub age: Range,
    pub year_of_registration: Range,
    #[serde(rename = "powerPS")]
    pub power_ps: Range,
    pub kilometer: Range,
}

impl NumericBounds {
    pub fn from_config(cfg: &FilterConfig) -> Self {
        Self {
            age: Range {
                min: 0,
                max: Some(cfg.reference_year - cfg.min_year),
            },
            year_of_registration: Range {
                min: cfg.min_year,
                max: Some(cfg.reference_year),
            },
            power_ps: Range {
                min: cfg.min_power_ps,
                max: Some(cfg.max_power_ps),
            },
            kilometer: Range { min: 1, max: None },
        }
    }
}

/// Everything needed to turn raw car attributes into a feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeatureSchema {
    pub columns: Vec<String>,
    pub vocab: CategoryVocab,
    pub bounds: NumericBounds,
    pub reference_year: i64,
}

impl FeatureSchema {
    pub fn new(vocab: CategoryVocab, cfg: &FilterConfig) -> Self {
        Self {
            columns: feature_names(),
            vocab,
            bounds: NumericBounds::from_config(cfg),
            reference_year: cfg.reference_year,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BuildMetadata {
    pub dataset_rows: usize,
    pub train_rows: usize,
    pub split_seed: Option<u64>,
    /// Only set when the caller supplies one, so repeated fits stay byte-identical.
    pub trained_at: Option<String>,
    /// Rows kept when training on a random subsample of the cleaned dataset.
    #[serde(default)]
    pub subsample: Option<usize>,
    /// Features zeroed out by correlation-based selection.
    #[serde(default)]
    pub discarded_features: Vec<String>,
}

/// Age given directly or through the registration year.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgeInput {
    Age(i64),
    YearOfRegistration(i64),
}

/// One car's predictors in raw (unencoded) form.
#[derive(Debug, Clone, PartialEq)]
pub struct CarAttributes {
    pub vehicle_type: String,
    pub age: AgeInput,
    pub power_ps: i64,
    pub model: String,
    pub kilometer: i64,
    pub fuel_type: String,
    pub brand: String,
    pub damage_repaired: bool,
    pub is_automatic: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncodeError {
    #[error("unknown {field} `{value}`")]
    UnknownCategory {
        field: &'static str,
        value: String,
        valid: Vec<String>,
    },
    #[error("{field} = {value} is outside {range:?}")]
    OutOfBounds {
        field: &'static str,
        value: i64,
        range: Range,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub forest: RandomForest,
    pub schema: FeatureSchema,
    pub metadata: BuildMetadata,
}

impl ForestModel {
    pub fn new(forest: RandomForest, schema: FeatureSchema, metadata: BuildMetadata) -> Result<Self> {
        if forest.n_features() != schema.columns.len() {
            return Err(Error::FeatureArity {
                expected: schema.columns.len(),
                got: forest.n_features(),
            });
        }
        Ok(Self {
            forest,
            schema,
            metadata,
        })
    }

    /// Validates and encodes `car`. Categoricals must be in the vocabulary.
    pub fn encode(&self, car: &CarAttributes) -> Result<[f64; N_FEATURES], EncodeError> {
        let bounds = &self.schema.bounds;
        let check = |field: &'static str, value: i64, range: Range| {
            if range.contains(value) {
                Ok(value)
            } else {
                Err(EncodeError::OutOfBounds { field, value, range })
            }
        };
        let category = |feature: Feature, value: &str| -> Result<f64, EncodeError> {
            let vocab: &Vocabulary = self.schema.vocab.for_feature(feature).expect("categorical feature");
            vocab
                .encode(value)
                .map(f64::from)
                .ok_or_else(|| EncodeError::UnknownCategory {
                    field: feature.name(),
                    value: value.to_owned(),
                    valid: vocab.values().to_vec(),
                })
        };
        let age = match car.age {
            AgeInput::Age(a) => check("age", a, bounds.age)?,
            AgeInput::YearOfRegistration(y) => {
                self.schema.reference_year - check("yearOfRegistration", y, bounds.year_of_registration)?
            }
        };
        Ok([
            category(Feature::VehicleType, &car.vehicle_type)?,
            age as f64,
            check("powerPS", car.power_ps, bounds.power_ps)? as f64,
            category(Feature::Model, &car.model)?,
            check("kilometer", car.kilometer, bounds.kilometer)? as f64,
            category(Feature::FuelType, &car.fuel_type)?,
            category(Feature::Brand, &car.brand)?,
            f64::from(u8::from(car.damage_repaired)),
            f64::from(u8::from(car.is_automatic)),
        ])
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.forest.predict(x)
    }

    /// Hex SHA-256 of the serialized model; identifies the model version.
    pub fn fingerprint(&self) -> Result<String> {
        let bytes = self.to_bytes()?;
        Ok(hex_string(&bytes[bytes.len() - CHECKSUM_LEN..]))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = FileHeader {
            format: "carprice-forest".into(),
            hyperparams: *self.forest.params(),
            master_seed: self.forest.seed(),
            seed_mixer: SEED_MIXER.into(),
            n_features: self.forest.n_features(),
            n_trees: self.forest.trees().len(),
            schema: self.schema.clone(),
            metadata: self.metadata.clone(),
        };
        let header = serde_json::to_vec(&header)?;

        let mut out = Vec::with_capacity(64 + header.len());
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        put_u32(&mut out, header.len() as u32);
        out.extend_from_slice(&header);
        put_u32(&mut out, self.forest.n_features() as u32);
        for &v in self.forest.impurity_decrease() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        put_u32(&mut out, self.forest.trees().len() as u32);
        for tree in self.forest.trees() {
            put_u32(&mut out, tree.nodes().len() as u32);
            for node in tree.nodes() {
                match *node {
                    Node::Leaf { value, n_samples } => {
                        out.push(0);
                        out.extend_from_slice(&value.to_le_bytes());
                        out.extend_from_slice(&(n_samples as u64).to_le_bytes());
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                        n_samples,
                        improvement,
                    } => {
                        out.push(1);
                        put_u32(&mut out, feature as u32);
                        out.extend_from_slice(&threshold.to_le_bytes());
                        put_u32(&mut out, left as u32);
                        put_u32(&mut out, right as u32);
                        out.extend_from_slice(&(n_samples as u64).to_le_bytes());
                        out.extend_from_slice(&improvement.to_le_bytes());
                    }
                }
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 + CHECKSUM_LEN || &bytes[..4] != MAGIC {
            return Err(Error::MalformedModel("not a model file".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != checksum {
            return Err(Error::ChecksumMismatch);
        }

        let mut r = Reader { buf: body, pos: 8 };
        let header_len = r.u32()? as usize;
        let header: FileHeader = serde_json::from_slice(r.take(header_len)?)?;
        let n_features = r.u32()? as usize;
        if n_features != header.n_features || n_features != header.schema.columns.len() {
            return Err(Error::MalformedModel("feature count mismatch".into()));
        }
        let impurity = (0..n_features).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let n_trees = r.u32()? as usize;
        if n_trees != header.n_trees {
            return Err(Error::MalformedModel("tree count mismatch".into()));
        }
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes = r.u32()? as usize;
            let mut nodes = Vec::with_capacity(n_nodes.min(body.len()));
            for _ in 0..n_nodes {
                let node = match r.u8()? {
                    0 => Node::Leaf {
                        value: r.f64()?,
                        n_samples: r.u64()? as usize,
                    },
                    1 => Node::Split {
                        feature: r.u32()? as usize,
                        threshold: r.f64()?,
                        left: r.u32()? as usize,
                        right: r.u32()? as usize,
                        n_samples: r.u64()? as usize,
                        improvement: r.f64()?,
                    },
                    tag => return Err(Error::MalformedModel(format!("unknown node tag {tag}"))),
                };
                nodes.push(node);
            }
            trees.push(RegressionTree::from_nodes(nodes, n_features)?);
        }
        if r.pos != body.len() {
            return Err(Error::MalformedModel("trailing bytes after trees".into()));
        }
        let forest = RandomForest::from_parts(trees, header.hyperparams, header.master_seed, n_features, impurity)?;
        ForestModel::new(forest, header.schema, header.metadata)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct FileHeader {
    format: String,
    hyperparams: Hyperparams,
    master_seed: u64,
    seed_mixer: String,
    n_features: usize,
    n_trees: usize,
    schema: FeatureSchema,
    metadata: BuildMetadata,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::MalformedModel("truncated payload".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
