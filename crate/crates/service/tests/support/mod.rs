#![allow(dead_code)]

use carprice_core::dataset::{clean_listings, parse_csv, CsvDialect, FilterConfig, RAW_COLUMNS};
use carprice_core::forest::{fit_forest, Hyperparams};
use carprice_core::model::{BuildMetadata, FeatureSchema, ForestModel};
use carprice_core::seed::splitmix64;

/// Tiny deterministic stream for fixtures; not used by anything under test.
pub struct Stream(u64);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(1);
        splitmix64(self.0)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn pick<'a>(&mut self, items: &[&'a str]) -> &'a str {
        items[self.below(items.len() as u64) as usize]
    }
}

const BRANDS: [(&str, &[&str], f64); 5] = [
    ("volkswagen", &["golf", "polo", "passat"], 1.0),
    ("bmw", &["3er", "5er", "x5"], 1.5),
    ("opel", &["corsa", "astra"], 0.8),
    ("porsche", &["911", "cayenne"], 3.5),
    ("renault", &["clio", "twingo"], 0.7),
];
const VEHICLE_TYPES: [&str; 5] = ["limousine", "kleinwagen", "kombi", "suv", "cabrio"];
const FUELS: [&str; 3] = ["benzin", "diesel", "lpg"];

/// Raw listings CSV in the dump's column layout. About one row in six is
/// deliberately dirty so every cleaning rule has work to do.
pub fn synthetic_csv(rows: usize, seed: u64) -> String {
    let mut s = Stream::new(seed);
    let mut out = RAW_COLUMNS.join(",");
    out.push('\n');
    for i in 0..rows {
        let (brand, models, factor) = BRANDS[s.below(BRANDS.len() as u64) as usize];
        let model = s.pick(models);
        let vt = s.pick(&VEHICLE_TYPES);
        let fuel = s.pick(&FUELS);
        let year = 1990 + s.below(27) as i64;
        let power = 50 + s.below(250) as i64;
        let km = [5_000, 50_000, 90_000, 125_000, 150_000][s.below(5) as usize];
        let automatic = s.below(4) == 0;
        let damage = s.below(5) == 0;
        let age = (2017 - year) as f64;
        let base =
            30_000.0 * factor * (-0.11 * age).exp() * (0.6 + power as f64 / 300.0) * (1.0 - km as f64 / 400_000.0);
        let noise = 1.0 + 0.1 * (s.unit() - 0.5);
        let price = ((base * noise * if damage { 0.6 } else { 1.0 }) as i64).max(1);

        let mut seller = "privat";
        let mut offer = "Angebot";
        let mut price_cell = price.to_string();
        let mut year_cell = year.to_string();
        let mut power_cell = power.to_string();
        let mut month_cell = (1 + s.below(12)).to_string();
        let mut gearbox = if automatic { "automatik" } else { "manuell" };
        let mut vt_cell = vt.to_string();
        match s.below(24) {
            0 => seller = "gewerblich",
            1 => offer = "Gesuch",
            2 => year_cell = "2019".into(),
            3 => power_cell = "0".into(),
            4 => price_cell.clear(),
            5 => price_cell = "0".into(),
            6 => month_cell = "0".into(),
            7 => gearbox = "",
            8 => vt_cell.clear(),
            _ => {}
        }
        let damage_cell = if damage { "ja" } else { "nein" };
        out.push_str(&format!(
            "2016-03-24 11:52:17,car_{i},{seller},{offer},{price_cell},test,{vt_cell},{year_cell},{gearbox},{power_cell},{model},{km},{month_cell},{fuel},{brand},{damage_cell},2016-03-24 00:00:00,0,{},2016-04-07 03:16:57\n",
            10_000 + s.below(89_999)
        ));
    }
    out
}

/// A small trained model over synthetic listings.
pub fn small_model(rows: usize, trees: usize, seed: u64) -> ForestModel {
    let cfg = FilterConfig::default();
    let parsed = parse_csv(synthetic_csv(rows, seed).as_bytes(), CsvDialect::default()).unwrap();
    let cleaned = clean_listings(parsed.rows, &cfg).unwrap();
    let ds = cleaned.dataset;
    let params = Hyperparams::with_trees(trees);
    let forest = fit_forest(&ds.features, &ds.target, &params, seed).unwrap();
    let metadata = BuildMetadata {
        dataset_rows: ds.len(),
        train_rows: ds.len(),
        split_seed: None,
        trained_at: None,
        subsample: None,
        discarded_features: Vec::new(),
    };
    ForestModel::new(forest, FeatureSchema::new(ds.vocab.clone(), &cfg), metadata).unwrap()
}

/// A request body every synthetic model accepts.
pub fn valid_request() -> serde_json::Value {
    serde_json::json!({
        "vehicleType": "limousine",
        "age": 10,
        "powerPS": 120,
        "model": "golf",
        "kilometer": 125000,
        "fuelType": "benzin",
        "brand": "volkswagen",
        "damageRepaired": true,
        "isAutomatic": false
    })
}
