//! Descriptive statistics of a cleaned dataset, emitted as plot-ready data.

use std::num::NonZeroU32;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{CleanDataset, Feature};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SummaryStats {
    pub mean_price: f64,
    pub mean_kilometer: f64,
    /// Lower median for even counts.
    pub median_age: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub category: String,
    pub mean_price: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Inclusive lower edge of the bin, in years.
    pub start: u32,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub category: String,
    pub count: usize,
}

/// Box-plot summary; whiskers extend to the most extreme observation within
/// 1.5 IQR of the quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FiveNumber {
    pub lower_whisker: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub upper_whisker: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DamageBoxplot {
    pub not_repaired: FiveNumber,
    pub repaired: FiveNumber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EdaReport {
    pub rows: usize,
    pub summary: SummaryStats,
    pub vehicle_type_mean_price: Vec<GroupMean>,
    pub top_brand_mean_price: Vec<GroupMean>,
    pub age_histogram: Vec<HistogramBin>,
    pub fuel_type_counts: Vec<CategoryCount>,
    pub damage_repaired_price: DamageBoxplot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupField {
    VehicleType,
    Brand,
}

impl GroupField {
    fn feature(self) -> Feature {
        match self {
            GroupField::VehicleType => Feature::VehicleType,
            GroupField::Brand => Feature::Brand,
        }
    }
}

impl FromStr for GroupField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vehicleType" => Ok(GroupField::VehicleType),
            "brand" => Ok(GroupField::Brand),
            other => Err(Error::UnknownGroupField(other.to_owned())),
        }
    }
}

pub fn summary_stats(ds: &CleanDataset) -> Result<SummaryStats> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = ds.len() as f64;
    let mut ages: Vec<f64> = ds.column(Feature::Age).collect();
    ages.sort_by(f64::total_cmp);
    Ok(SummaryStats {
        mean_price: ds.target.iter().sum::<f64>() / n,
        mean_kilometer: ds.column(Feature::Kilometer).sum::<f64>() / n,
        median_age: ages[(ages.len() - 1) / 2],
    })
}

/// Mean price per category, highest first; equal means keep code order.
pub fn group_mean_price(ds: &CleanDataset, field: GroupField) -> Vec<GroupMean> {
    let feature = field.feature();
    let vocab = ds.vocab.for_feature(feature).expect("group fields are categorical");
    let mut sums = vec![(0.0f64, 0usize); vocab.len()];
    for (code, price) in ds.column(feature).zip(&ds.target) {
        let slot = &mut sums[code as usize];
        slot.0 += price;
        slot.1 += 1;
    }
    let mut groups: Vec<(usize, GroupMean)> = sums
        .into_iter()
        .enumerate()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(code, (sum, count))| {
            let category = vocab.decode(code as u32).unwrap_or_default().to_owned();
            (
                code,
                GroupMean {
                    category,
                    mean_price: sum / count as f64,
                    count,
                },
            )
        })
        .collect();
    groups.sort_by(|a, b| b.1.mean_price.total_cmp(&a.1.mean_price).then(a.0.cmp(&b.0)));
    groups.into_iter().map(|(_, g)| g).collect()
}

pub fn age_histogram(ds: &CleanDataset, bin_width: NonZeroU32) -> Vec<HistogramBin> {
    let width = bin_width.get();
    let ages: Vec<u32> = ds.column(Feature::Age).map(|a| a.max(0.0) as u32).collect();
    let Some(&max_age) = ages.iter().max() else {
        return Vec::new();
    };
    let mut counts = vec![0usize; (max_age / width) as usize + 1];
    for a in ages {
        counts[(a / width) as usize] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            start: i as u32 * width,
            count,
        })
        .collect()
}

/// Linear interpolation between order statistics at rank `(n − 1)·p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn five_number(values: &[f64]) -> Option<FiveNumber> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25);
    let median = quantile_sorted(&v, 0.5);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let lower_whisker = v.iter().copied().find(|&x| x >= lo_fence).unwrap_or(v[0]).min(q1);
    let upper_whisker = v
        .iter()
        .rev()
        .copied()
        .find(|&x| x <= hi_fence)
        .unwrap_or(v[v.len() - 1])
        .max(q3);
    Some(FiveNumber {
        lower_whisker,
        q1,
        median,
        q3,
        upper_whisker,
        count: v.len(),
    })
}

pub fn boxplot_stats(ds: &CleanDataset) -> Result<DamageBoxplot> {
    let (mut repaired, mut not_repaired) = (Vec::new(), Vec::new());
    for (flag, &price) in ds.column(Feature::DamageRepaired).zip(&ds.target) {
        if flag == 1.0 {
            repaired.push(price);
        } else {
            not_repaired.push(price);
        }
    }
    Ok(DamageBoxplot {
        not_repaired: five_number(&not_repaired).ok_or_else(|| Error::EmptyGroup("damageRepaired=0".into()))?,
        repaired: five_number(&repaired).ok_or_else(|| Error::EmptyGroup("damageRepaired=1".into()))?,
    })
}

/// Listings per fuel type, most frequent first; ties keep code order.
pub fn fuel_counts(ds: &CleanDataset) -> Vec<CategoryCount> {
    let vocab = &ds.vocab.fuel_type;
    let mut counts = vec![0usize; vocab.len()];
    for code in ds.column(Feature::FuelType) {
        counts[code as usize] += 1;
    }
    let mut out: Vec<(usize, usize)> = counts.into_iter().enumerate().filter(|&(_, c)| c > 0).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    out.into_iter()
        .map(|(code, count)| CategoryCount {
            category: vocab.decode(code as u32).unwrap_or_default().to_owned(),
            count,
        })
        .collect()
}

pub const TOP_BRANDS: usize = 10;

pub fn eda_report(ds: &CleanDataset) -> Result<EdaReport> {
    let mut brands = group_mean_price(ds, GroupField::Brand);
    brands.truncate(TOP_BRANDS);
    Ok(EdaReport {
        rows: ds.len(),
        summary: summary_stats(ds)?,
        vehicle_type_mean_price: group_mean_price(ds, GroupField::VehicleType),
        top_brand_mean_price: brands,
        age_histogram: age_histogram(ds, NonZeroU32::MIN),
        fuel_type_counts: fuel_counts(ds),
        damage_repaired_price: boxplot_stats(ds)?,
    })
}
