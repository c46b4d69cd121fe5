//! Reference data: the crime-survey table and published results.

use crate::models::{ModelParams, Odds};
use crate::table::ObservedTable;

/// Victimization status in two consecutive survey periods (1 = crime-free,
/// 2 = victimized), 756 households including partial and full nonresponse.
pub fn crime_table() -> ObservedTable {
    ObservedTable::from_counts([392, 55, 76, 38, 33, 9, 31, 7, 115]).expect("non-empty")
}

/// Published statistics for the crime table, each to the printed precision.
pub mod crime {
    pub const MCNEMAR: f64 = 3.37;
    pub const G2_A: f64 = 296.17;
    pub const G2_B: f64 = 178.32;
    pub const G2_C: f64 = 0.03;
    pub const G2_SYM_C: f64 = 1.01;
    pub const G2_CONDITIONAL: f64 = 0.98;
    pub const ALPHA1: f64 = 0.083;
    pub const ALPHA2: f64 = 0.010;
    pub const BETA: f64 = 0.075;
    pub const GAMMA: f64 = 3.026;
    pub const PI00: [f64; 4] = [0.515, 0.078, 0.098, 0.051];
}

/// The published symmetric Model C estimates as parameters.
pub fn crime_sym_c_params() -> ModelParams {
    ModelParams::new(
        crime::PI00,
        Odds::C {
            alpha1: crime::ALPHA1,
            alpha2: crime::ALPHA2,
            beta: crime::BETA,
            gamma: crime::GAMMA,
        },
    )
}

/// One row of a published rejection-rate table:
/// `(n, varied probability, [McNemar, S^c, c, S|c])`.
pub type PublishedRow = (u64, f64, [f64; 4]);

/// Scenario 1 (varies `p`, symmetry holds), 2000 replications.
pub const SCENARIO1_PUBLISHED: [PublishedRow; 9] = [
    (250, 0.50, [0.0485, 0.0510, 0.0595, 0.0335]),
    (250, 0.55, [0.0955, 0.0525, 0.0640, 0.0360]),
    (250, 0.60, [0.2405, 0.0535, 0.0675, 0.0350]),
    (500, 0.50, [0.0600, 0.0575, 0.0575, 0.0480]),
    (500, 0.55, [0.1495, 0.0480, 0.0565, 0.0480]),
    (500, 0.60, [0.4480, 0.0480, 0.0570, 0.0400]),
    (1000, 0.50, [0.0470, 0.0460, 0.0500, 0.0390]),
    (1000, 0.55, [0.2795, 0.0460, 0.0535, 0.0400]),
    (1000, 0.60, [0.7405, 0.0550, 0.0485, 0.0530]),
];

/// Scenario 2 (varies `p*`, complete cases symmetric), 2000 replications.
pub const SCENARIO2_PUBLISHED: [PublishedRow; 9] = [
    (250, 0.50, [0.0525, 0.0460, 0.0705, 0.0240]),
    (250, 0.55, [0.0540, 0.0515, 0.0615, 0.0365]),
    (250, 0.60, [0.0560, 0.1235, 0.1015, 0.0955]),
    (500, 0.50, [0.0455, 0.0535, 0.0595, 0.0350]),
    (500, 0.55, [0.0515, 0.0820, 0.0630, 0.0730]),
    (500, 0.60, [0.0480, 0.2070, 0.0970, 0.2230]),
    (1000, 0.50, [0.0495, 0.0475, 0.0500, 0.0435]),
    (1000, 0.55, [0.0485, 0.0825, 0.0510, 0.0940]),
    (1000, 0.60, [0.0430, 0.3690, 0.0770, 0.4590]),
];

/// Published rows for scenario 1 or 2.
pub fn published(scenario: u8) -> Option<&'static [PublishedRow; 9]> {
    match scenario {
        1 => Some(&SCENARIO1_PUBLISHED),
        2 => Some(&SCENARIO2_PUBLISHED),
        _ => None,
    }
}
