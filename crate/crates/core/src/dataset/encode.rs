use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::filter::FilterConfig;
use super::raw::RawListing;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Predictor columns, in matrix column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feature {
    VehicleType,
    Age,
    PowerPs,
    Model,
    Kilometer,
    FuelType,
    Brand,
    DamageRepaired,
    IsAutomatic,
}

pub const N_FEATURES: usize = 9;

impl Feature {
    pub const ALL: [Feature; N_FEATURES] = [
        Feature::VehicleType,
        Feature::Age,
        Feature::PowerPs,
        Feature::Model,
        Feature::Kilometer,
        Feature::FuelType,
        Feature::Brand,
        Feature::DamageRepaired,
        Feature::IsAutomatic,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::VehicleType => "vehicleType",
            Feature::Age => "age",
            Feature::PowerPs => "powerPS",
            Feature::Model => "model",
            Feature::Kilometer => "kilometer",
            Feature::FuelType => "fuelType",
            Feature::Brand => "brand",
            Feature::DamageRepaired => "damageRepaired",
            Feature::IsAutomatic => "isAutomatic",
        }
    }
}

pub fn feature_names() -> Vec<String> {
    Feature::ALL.iter().map(|f| f.name().to_owned()).collect()
}

/// A cleaned listing whose categoricals are still raw strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedRecord {
    pub price: i64,
    pub vehicle_type: String,
    pub age: i64,
    pub power_ps: i64,
    pub model: String,
    pub kilometer: i64,
    pub fuel_type: String,
    pub brand: String,
    pub damage_repaired: bool,
    pub is_automatic: bool,
}

/// Why a filtered row could not be turned into a [`DerivedRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MissingField(pub &'static str);

pub fn derive_features(row: &RawListing, cfg: &FilterConfig) -> Result<DerivedRecord, MissingField> {
    fn text(v: &Option<String>, name: &'static str) -> Result<String, MissingField> {
        v.clone().ok_or(MissingField(name))
    }
    let year = row
        .year_of_registration
        .value()
        .ok_or(MissingField("yearOfRegistration"))?;
    Ok(DerivedRecord {
        price: row.price.value().ok_or(MissingField("price"))?,
        vehicle_type: text(&row.vehicle_type, "vehicleType")?,
        age: cfg.reference_year - year,
        power_ps: row.power_ps.value().ok_or(MissingField("powerPS"))?,
        model: text(&row.model, "model")?,
        kilometer: row.kilometer.value().ok_or(MissingField("kilometer"))?,
        fuel_type: text(&row.fuel_type, "fuelType")?,
        brand: text(&row.brand, "brand")?,
        damage_repaired: text(&row.not_repaired_damage, "notRepairedDamage")? == cfg.no_damage,
        is_automatic: text(&row.gearbox, "gearbox")? == cfg.automatic_gearbox,
    })
}

/// Dense label encoding of one categorical column. Codes follow the
/// lexicographic order of the raw strings; `len()` is reserved for values
/// never seen during cleaning.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vocabulary {
    values: Vec<String>,
}

impl Vocabulary {
    pub fn from_values<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = values.into_iter().map(Into::into).collect();
        Self {
            values: set.into_iter().collect(),
        }
    }

    /// Rebuilds a vocabulary from a stored value list, which must be strictly sorted.
    pub fn from_sorted(values: Vec<String>) -> Option<Self> {
        values.windows(2).all(|w| w[0] < w[1]).then_some(Self { values })
    }

    pub fn encode(&self, value: &str) -> Option<u32> {
        self.values
            .binary_search_by(|v| v.as_str().cmp(value))
            .ok()
            .map(|i| i as u32)
    }

    pub fn encode_or_unknown(&self, value: &str) -> u32 {
        self.encode(value).unwrap_or_else(|| self.unknown_code())
    }

    pub fn decode(&self, code: u32) -> Option<&str> {
        self.values.get(code as usize).map(String::as_str)
    }

    pub fn unknown_code(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CategoryVocab {
    pub vehicle_type: Vocabulary,
    pub model: Vocabulary,
    pub fuel_type: Vocabulary,
    pub brand: Vocabulary,
}

impl CategoryVocab {
    pub fn for_feature(&self, feature: Feature) -> Option<&Vocabulary> {
        match feature {
            Feature::VehicleType => Some(&self.vehicle_type),
            Feature::Model => Some(&self.model),
            Feature::FuelType => Some(&self.fuel_type),
            Feature::Brand => Some(&self.brand),
            _ => None,
        }
    }
}

/// Cleaned, encoded predictors plus the price target.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanDataset {
    pub features: Matrix,
    pub target: Vec<f64>,
    pub vocab: CategoryVocab,
}

impl CleanDataset {
    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn column(&self, feature: Feature) -> impl Iterator<Item = f64> + '_ {
        self.features.column(feature.index())
    }

    /// Rows `indices` as a standalone dataset sharing the vocabulary.
    pub fn subset(&self, indices: &[usize]) -> CleanDataset {
        CleanDataset {
            features: self.features.select_rows(indices),
            target: indices.iter().map(|&i| self.target[i]).collect(),
            vocab: self.vocab.clone(),
        }
    }
}

pub fn encode_categoricals(records: &[DerivedRecord]) -> Result<CleanDataset> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let vocab = CategoryVocab {
        vehicle_type: Vocabulary::from_values(records.iter().map(|r| r.vehicle_type.as_str())),
        model: Vocabulary::from_values(records.iter().map(|r| r.model.as_str())),
        fuel_type: Vocabulary::from_values(records.iter().map(|r| r.fuel_type.as_str())),
        brand: Vocabulary::from_values(records.iter().map(|r| r.brand.as_str())),
    };
    let mut features = Matrix::zeros(records.len(), N_FEATURES);
    for (i, r) in records.iter().enumerate() {
        let row = encode_row(r, &vocab);
        for (j, v) in row.into_iter().enumerate() {
            features.set(i, j, v);
        }
    }
    Ok(CleanDataset {
        features,
        target: records.iter().map(|r| r.price as f64).collect(),
        vocab,
    })
}

/// Encodes one record; categoricals absent from `vocab` get the reserved unknown code.
pub fn encode_row(r: &DerivedRecord, vocab: &CategoryVocab) -> [f64; N_FEATURES] {
    [
        vocab.vehicle_type.encode_or_unknown(&r.vehicle_type) as f64,
        r.age as f64,
        r.power_ps as f64,
        vocab.model.encode_or_unknown(&r.model) as f64,
        r.kilometer as f64,
        vocab.fuel_type.encode_or_unknown(&r.fuel_type) as f64,
        vocab.brand.encode_or_unknown(&r.brand) as f64,
        f64::from(u8::from(r.damage_repaired)),
        f64::from(u8::from(r.is_automatic)),
    ]
}
