use serde::{Deserialize, Serialize};

use super::raw::{NumCell, RawListing};

/// Tokens and bounds used by the cleaning rules. The token defaults are the
/// German values used in the eBay-Kleinanzeigen dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub private_seller: String,
    pub sale_offer: String,
    pub min_year: i64,
    /// Latest admissible registration year; also the year ages are measured from.
    pub reference_year: i64,
    pub min_power_ps: i64,
    pub max_power_ps: i64,
    /// Listings priced at or below this value are placeholders for cars that
    /// are not actually on offer.
    pub unavailable_max_price: i64,
    pub automatic_gearbox: String,
    pub manual_gearbox: String,
    /// `notRepairedDamage` value meaning "no unrepaired damage".
    pub no_damage: String,
    /// `notRepairedDamage` value meaning "has unrepaired damage".
    pub has_damage: String,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            private_seller: "privat".into(),
            sale_offer: "Angebot".into(),
            min_year: 1863,
            reference_year: 2017,
            min_power_ps: 10,
            max_power_ps: 1000,
            unavailable_max_price: 0,
            automatic_gearbox: "automatik".into(),
            manual_gearbox: "manuell".into(),
            no_damage: "nein".into(),
            has_damage: "ja".into(),
        }
    }
}

/// The nine cleaning rules, in the order they are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    PrivateSeller,
    SaleOffer,
    RegistrationYear,
    PowerRange,
    MissingPrice,
    Unavailable,
    RegistrationDate,
    BooleanConversion,
    NotAvailable,
}

impl Rule {
    pub const ALL: [Rule; 9] = [
        Rule::PrivateSeller,
        Rule::SaleOffer,
        Rule::RegistrationYear,
        Rule::PowerRange,
        Rule::MissingPrice,
        Rule::Unavailable,
        Rule::RegistrationDate,
        Rule::BooleanConversion,
        Rule::NotAvailable,
    ];

    /// 1-based position in the rule order.
    pub fn number(self) -> usize {
        self as usize + 1
    }

    pub fn description(self) -> &'static str {
        match self {
            Rule::PrivateSeller => "sold by a dealership",
            Rule::SaleOffer => "request-for-purchase listing",
            Rule::RegistrationYear => "registration year outside the admissible range",
            Rule::PowerRange => "implausible power value",
            Rule::MissingPrice => "no price",
            Rule::Unavailable => "listed as unavailable (placeholder price)",
            Rule::RegistrationDate => "invalid registration date",
            Rule::BooleanConversion => "boolean field not convertible to 0/1",
            Rule::NotAvailable => "missing or unparseable value",
        }
    }

    fn rejects(self, row: &RawListing, cfg: &FilterConfig) -> bool {
        let outside = |cell: NumCell, lo: i64, hi: i64| cell.value().is_some_and(|v| v < lo || v > hi);
        let not_in = |v: &Option<String>, tokens: [&str; 2]| v.as_deref().is_some_and(|s| !tokens.contains(&s));
        match self {
            Rule::PrivateSeller => !row.seller.trim().is_empty() && row.seller != cfg.private_seller,
            Rule::SaleOffer => !row.offer_type.trim().is_empty() && row.offer_type != cfg.sale_offer,
            Rule::RegistrationYear => outside(row.year_of_registration, cfg.min_year, cfg.reference_year),
            Rule::PowerRange => outside(row.power_ps, cfg.min_power_ps, cfg.max_power_ps),
            Rule::MissingPrice => row.price.is_empty(),
            Rule::Unavailable => row.price.value().is_some_and(|p| p <= cfg.unavailable_max_price),
            Rule::RegistrationDate => {
                outside(row.month_of_registration, 1, 12)
                    || outside(row.year_of_registration, cfg.min_year, cfg.reference_year)
            }
            Rule::BooleanConversion => {
                not_in(&row.gearbox, [&cfg.automatic_gearbox, &cfg.manual_gearbox])
                    || not_in(&row.not_repaired_damage, [&cfg.no_damage, &cfg.has_damage])
            }
            Rule::NotAvailable => has_missing_value(row),
        }
    }
}

fn has_missing_value(row: &RawListing) -> bool {
    let num_missing = |c: NumCell| c.value().is_none();
    row.seller.trim().is_empty()
        || row.offer_type.trim().is_empty()
        || num_missing(row.price)
        || num_missing(row.year_of_registration)
        || num_missing(row.power_ps)
        || num_missing(row.month_of_registration)
        || row.kilometer.value().is_none_or(|km| km <= 0)
        || row.vehicle_type.is_none()
        || row.gearbox.is_none()
        || row.model.is_none()
        || row.fuel_type.is_none()
        || row.brand.is_none()
        || row.not_repaired_damage.is_none()
}

/// First rule (in rule order) that rejects `row`, if any.
pub fn first_failing_rule(row: &RawListing, cfg: &FilterConfig) -> Option<Rule> {
    Rule::ALL.into_iter().find(|r| r.rejects(row, cfg))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCount {
    pub rule: usize,
    pub name: Rule,
    pub description: String,
    pub removed: usize,
}

/// Row accounting for one cleaning run. Each rejected row is attributed to the
/// first rule that rejects it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input_rows: usize,
    pub surviving_rows: usize,
    pub removed: Vec<RuleCount>,
    /// Rows dropped by the CSV reader before filtering (wrong column count).
    #[serde(default)]
    pub parse_errors: usize,
}

impl FilterReport {
    pub fn new(input_rows: usize) -> Self {
        Self {
            input_rows,
            surviving_rows: input_rows,
            removed: Rule::ALL
                .iter()
                .map(|&r| RuleCount {
                    rule: r.number(),
                    name: r,
                    description: r.description().to_owned(),
                    removed: 0,
                })
                .collect(),
            parse_errors: 0,
        }
    }

    pub fn record(&mut self, rule: Rule) {
        self.removed[rule as usize].removed += 1;
        self.surviving_rows -= 1;
    }

    pub fn removed_by(&self, rule: Rule) -> usize {
        self.removed[rule as usize].removed
    }

    pub fn total_removed(&self) -> usize {
        self.removed.iter().map(|c| c.removed).sum()
    }

    /// `input = surviving + Σ removed`.
    pub fn is_conserved(&self) -> bool {
        self.input_rows == self.surviving_rows + self.total_removed()
    }
}

pub fn apply_filters(rows: Vec<RawListing>, cfg: &FilterConfig) -> (Vec<RawListing>, FilterReport) {
    let mut report = FilterReport::new(rows.len());
    let survivors = rows
        .into_iter()
        .filter(|row| match first_failing_rule(row, cfg) {
            Some(rule) => {
                report.record(rule);
                false
            }
            None => true,
        })
        .collect();
    (survivors, report)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn valid_row() -> RawListing {
        RawListing {
            seller: "privat".into(),
            offer_type: "Angebot".into(),
            price: 4500.into(),
            abtest: "test".into(),
            vehicle_type: Some("limousine".into()),
            year_of_registration: 2005.into(),
            gearbox: Some("manuell".into()),
            power_ps: 101.into(),
            model: Some("golf".into()),
            kilometer: 150_000.into(),
            month_of_registration: 3.into(),
            fuel_type: Some("benzin".into()),
            brand: Some("volkswagen".into()),
            not_repaired_damage: Some("nein".into()),
            ..Default::default()
        }
    }

    fn rejected_by(row: RawListing) -> Option<Rule> {
        first_failing_rule(&row, &FilterConfig::default())
    }

    #[test]
    fn valid_row_is_kept() {
        let (kept, report) = apply_filters(vec![valid_row()], &FilterConfig::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(report.total_removed(), 0);
        assert!(report.is_conserved());
    }

    #[test]
    fn dealership_is_rule_one() {
        let row = RawListing {
            seller: "gewerblich".into(),
            ..valid_row()
        };
        assert_eq!(rejected_by(row), Some(Rule::PrivateSeller));
    }

    #[test]
    fn purchase_request_is_rule_two() {
        let row = RawListing {
            offer_type: "Gesuch".into(),
            ..valid_row()
        };
        assert_eq!(rejected_by(row), Some(Rule::SaleOffer));
    }

    #[test]
    fn year_bounds_are_rule_three() {
        for year in [1850, 1862, 2018, 9999] {
            let row = RawListing {
                year_of_registration: year.into(),
                ..valid_row()
            };
            assert_eq!(rejected_by(row), Some(Rule::RegistrationYear), "year {year}");
        }
        for year in [1863, 2017] {
            let row = RawListing {
                year_of_registration: year.into(),
                ..valid_row()
            };
            assert_eq!(rejected_by(row), None, "year {year}");
        }
    }

    #[test]
    fn power_bounds_are_rule_four() {
        for ps in [0, 9, 1001, 20000] {
            let row = RawListing {
                power_ps: ps.into(),
                ..valid_row()
            };
            assert_eq!(rejected_by(row), Some(Rule::PowerRange), "power {ps}");
        }
    }

    #[test]
    fn empty_price_is_rule_five() {
        let row = RawListing {
            price: NumCell::Empty,
            ..valid_row()
        };
        assert_eq!(rejected_by(row), Some(Rule::MissingPrice));
    }

    #[test]
    fn zero_price_is_rule_six() {
        let row = RawListing {
            price: 0.into(),
            ..valid_row()
        };
        assert_eq!(rejected_by(row), Some(Rule::Unavailable));
    }

    #[test]
    fn unknown_month_is_rule_seven() {
        for month in [0, 13] {
            let row = RawListing {
                month_of_registration: month.into(),
                ..valid_row()
            };
            assert_eq!(rejected_by(row), Some(Rule::RegistrationDate));
        }
    }

    #[test]
    fn unconvertible_boolean_is_rule_eight() {
        let row = RawListing {
            gearbox: Some("halbautomatik".into()),
            ..valid_row()
        };
        assert_eq!(rejected_by(row), Some(Rule::BooleanConversion));
        let row = RawListing {
            not_repaired_damage: Some("vielleicht".into()),
            ..valid_row()
        };
        assert_eq!(rejected_by(row), Some(Rule::BooleanConversion));
    }

    #[test]
    fn missing_and_malformed_values_are_rule_nine() {
        let cases = [
            RawListing {
                vehicle_type: None,
                ..valid_row()
            },
            RawListing {
                not_repaired_damage: None,
                ..valid_row()
            },
            RawListing {
                price: NumCell::Malformed,
                ..valid_row()
            },
            RawListing {
                power_ps: NumCell::Empty,
                ..valid_row()
            },
            RawListing {
                kilometer: 0.into(),
                ..valid_row()
            },
        ];
        for row in cases {
            assert_eq!(rejected_by(row.clone()), Some(Rule::NotAvailable), "{row:?}");
        }
    }

    #[test]
    fn earliest_rule_wins() {
        let row = RawListing {
            seller: "gewerblich".into(),
            year_of_registration: 1700.into(),
            price: NumCell::Empty,
            brand: None,
            ..valid_row()
        };
        assert_eq!(rejected_by(row), Some(Rule::PrivateSeller));
    }
}
