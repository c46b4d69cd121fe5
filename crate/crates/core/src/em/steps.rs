//! Single E- and M-steps of the Lagrange-augmented EM recursion.

use serde::{Deserialize, Serialize};

use crate::error::EmError;
use crate::models::{Hypothesis, ModelId, ModelParams, Odds};
use crate::table::ObservedTable;

/// Odds never drop below this value during iteration.
pub const ODDS_FLOOR: f64 = 1e-12;

/// Parameters plus Lagrange multipliers between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmState {
    pub params: ModelParams,
    /// Multiplier of the normalization constraint.
    pub lambda1: f64,
    /// Multiplier of the symmetry constraint; zero for unconstrained fits.
    pub lambda2: f64,
    pub iteration: usize,
}

impl EmState {
    /// Starting state with `lambda1 = n` and `lambda2 = 0`.
    pub fn start(params: ModelParams, table: &ObservedTable) -> Self {
        Self {
            params,
            lambda1: table.total() as f64,
            lambda2: 0.0,
            iteration: 0,
        }
    }
}

/// Completed-data pseudo-counts produced by the E-step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentedCounts {
    /// Expected counts of each outcome `(i, j)` over all missingness
    /// patterns, `(n00_11*, n00_12*, n00_21*, n00_22*)`.
    pub n00: [f64; 4],
    /// Expected number of full-array counts carrying each odds parameter,
    /// laid out like the model's odds (`n_alpha1`, `n_alpha2`, ...).
    pub odds: Odds,
    /// Expected full array `[pattern][cell]`, patterns ordered
    /// `00, 01, 10, 11` and cells row-major.
    pub full: [[f64; 4]; 4],
}

impl AugmentedCounts {
    pub fn model(&self) -> ModelId {
        self.odds.model()
    }

    pub fn total(&self) -> f64 {
        self.n00.iter().sum()
    }

    /// Expected complete-data log-likelihood `Q(theta' | theta)` at `params`,
    /// without the Lagrange term.
    pub fn q_value(&self, params: &ModelParams) -> f64 {
        let xlogy = |n: f64, v: f64| if n > 0.0 { n * v.ln() } else { 0.0 };
        let cells: f64 = self.n00.iter().zip(params.pi00).map(|(&n, p)| xlogy(n, p)).sum();
        let odds: f64 = self
            .odds
            .values()
            .into_iter()
            .zip(params.odds.values())
            .map(|(n, v)| xlogy(n, v))
            .sum();
        cells + odds
    }
}

/// Distributes every supplemental margin over the complete cells in
/// proportion to the current model probabilities.
pub fn e_step(table: &ObservedTable, params: &ModelParams) -> Result<AugmentedCounts, EmError> {
    let pi = params.pi00_grid();
    let weight = |pattern: usize, i: usize, j: usize| pi[i][j] * params.odds.pattern_weights(i, j)[pattern];

    let mut full = [[0.0; 4]; 4];
    let complete = table.complete();
    for i in 0..2 {
        for j in 0..2 {
            full[0][2 * i + j] = complete[i][j];
        }
    }

    let rows = table.row_margins();
    for i in 0..2 {
        if rows[i] > 0.0 {
            let denom: f64 = (0..2).map(|j| weight(1, i, j)).sum();
            if denom <= 0.0 {
                return Err(EmError::Degenerate("row-margin allocation denominator"));
            }
            for j in 0..2 {
                full[1][2 * i + j] = rows[i] * weight(1, i, j) / denom;
            }
        }
    }

    let cols = table.col_margins();
    for j in 0..2 {
        if cols[j] > 0.0 {
            let denom: f64 = (0..2).map(|i| weight(2, i, j)).sum();
            if denom <= 0.0 {
                return Err(EmError::Degenerate("column-margin allocation denominator"));
            }
            for i in 0..2 {
                full[2][2 * i + j] = cols[j] * weight(2, i, j) / denom;
            }
        }
    }

    let both = table.both_missing();
    if both > 0.0 {
        let denom: f64 = (0..4).map(|c| weight(3, c / 2, c % 2)).sum();
        if denom <= 0.0 {
            return Err(EmError::Degenerate("double-missing allocation denominator"));
        }
        for (c, slot) in full[3].iter_mut().enumerate() {
            *slot = both * weight(3, c / 2, c % 2) / denom;
        }
    }

    let mut n00 = [0.0; 4];
    for (c, slot) in n00.iter_mut().enumerate() {
        *slot = full.iter().map(|p| p[c]).sum();
    }

    // Counts carrying a row-specific odds parameter live in cells 0,1 (row 1)
    // or 2,3 (row 2); column-specific ones in cells 0,2 or 1,3.
    let row = |p: usize, i: usize| full[p][2 * i] + full[p][2 * i + 1];
    let col = |p: usize, j: usize| full[p][j] + full[p][2 + j];
    let total = |p: usize| full[p].iter().sum::<f64>();

    let odds = match params.odds {
        Odds::A { .. } => Odds::A {
            alpha: total(2) + total(3),
            beta1: col(1, 0) + col(3, 0),
            beta2: col(1, 1) + col(3, 1),
        },
        Odds::B { .. } => Odds::B {
            alpha1: row(2, 0) + row(3, 0),
            alpha2: row(2, 1) + row(3, 1),
            beta1: col(1, 0) + col(3, 0),
            beta2: col(1, 1) + col(3, 1),
        },
        Odds::C { .. } => Odds::C {
            alpha1: row(2, 0) + row(3, 0),
            alpha2: row(2, 1) + row(3, 1),
            beta: total(1),
            gamma: total(3),
        },
    };

    Ok(AugmentedCounts { n00, odds, full })
}

fn floor(v: f64) -> f64 {
    v.max(ODDS_FLOOR)
}

fn ratio(num: f64, den: f64, what: &'static str) -> Result<f64, EmError> {
    if den > 0.0 && den.is_finite() {
        Ok(floor(num / den))
    } else {
        Err(EmError::Degenerate(what))
    }
}

/// Sequential conditional maximization of the Lagrangian: odds blocks first
/// (using the multipliers and cell probabilities of the previous iteration),
/// then the cell probabilities and multipliers.
pub fn m_step(hypothesis: Hypothesis, counts: &AugmentedCounts, state: &EmState) -> Result<EmState, EmError> {
    let model = hypothesis.model();
    if counts.model() != model || state.params.model() != model {
        return Err(EmError::ModelMismatch {
            expected: model,
            found: if counts.model() != model {
                counts.model()
            } else {
                state.params.model()
            },
        });
    }
    if !hypothesis.is_fittable() {
        return Err(EmError::NotFittable(hypothesis.to_string()));
    }
    let symmetric = hypothesis.is_symmetric();
    let (l1, l2) = (state.lambda1, if symmetric { state.lambda2 } else { 0.0 });
    let p = state.params.pi00_grid();
    let row = |i: usize| p[i][0] + p[i][1];
    let col = |j: usize| p[0][j] + p[1][j];

    let odds = match (state.params.odds, counts.odds) {
        (
            Odds::A { beta1, beta2, .. },
            Odds::A {
                alpha: n_a,
                beta1: n_b1,
                beta2: n_b2,
            },
        ) => {
            let a = (1.0 + beta1) * col(0) + (1.0 + beta2) * col(1);
            let b = (1.0 + beta2) * p[0][1] - (1.0 + beta1) * p[1][0];
            let alpha = ratio(n_a, l1 * a + l2 * b, "alpha update denominator")?;
            let beta1 = ratio(
                n_b1,
                (1.0 + alpha) * (l1 * col(0) - l2 * p[1][0]),
                "beta1 update denominator",
            )?;
            let beta2 = ratio(
                n_b2,
                (1.0 + alpha) * (l1 * col(1) + l2 * p[0][1]),
                "beta2 update denominator",
            )?;
            Odds::A { alpha, beta1, beta2 }
        }
        (
            Odds::B { beta1, beta2, .. },
            Odds::B {
                alpha1: n_a1,
                alpha2: n_a2,
                beta1: n_b1,
                beta2: n_b2,
            },
        ) => {
            let alpha1 = ratio(
                n_a1,
                l1 * ((beta1 + 1.0) * p[0][0] + (beta2 + 1.0) * p[0][1]) + l2 * (beta2 + 1.0) * p[0][1],
                "alpha1 update denominator",
            )?;
            let alpha2 = ratio(
                n_a2,
                l1 * ((beta1 + 1.0) * p[1][0] + (beta2 + 1.0) * p[1][1]) - l2 * (beta1 + 1.0) * p[1][0],
                "alpha2 update denominator",
            )?;
            let beta1 = ratio(
                n_b1,
                l1 * ((alpha1 + 1.0) * p[0][0] + (alpha2 + 1.0) * p[1][0]) - l2 * (alpha2 + 1.0) * p[1][0],
                "beta1 update denominator",
            )?;
            let beta2 = ratio(
                n_b2,
                l1 * ((alpha1 + 1.0) * p[0][1] + (alpha2 + 1.0) * p[1][1]) + l2 * (alpha1 + 1.0) * p[0][1],
                "beta2 update denominator",
            )?;
            Odds::B {
                alpha1,
                alpha2,
                beta1,
                beta2,
            }
        }
        (
            Odds::C { gamma, .. },
            Odds::C {
                alpha1: n_a1,
                alpha2: n_a2,
                beta: n_b,
                gamma: n_g,
            },
        ) => {
            let alpha1 = ratio(
                n_a1,
                (gamma + 1.0) * (l1 * row(0) + l2 * p[0][1]),
                "alpha1 update denominator",
            )?;
            let alpha2 = ratio(
                n_a2,
                (gamma + 1.0) * (l1 * row(1) - l2 * p[1][0]),
                "alpha2 update denominator",
            )?;
            let total: f64 = state.params.pi00.iter().sum();
            let beta = ratio(n_b, l1 * total + l2 * (p[0][1] - p[1][0]), "beta update denominator")?;
            let gamma = ratio(
                n_g,
                l1 * (alpha1 * row(0) + alpha2 * row(1)) + l2 * (alpha1 * p[0][1] - alpha2 * p[1][0]),
                "gamma update denominator",
            )?;
            Odds::C {
                alpha1,
                alpha2,
                beta,
                gamma,
            }
        }
        _ => unreachable!("models checked above"),
    };

    let f = odds.marginal_factors();
    let n = counts.n00;
    let mut pi00 = [
        n[0] / (l1 * f[0][0]),
        n[1] / (l1 * f[0][1]),
        n[2] / (l1 * f[1][0]),
        n[3] / (l1 * f[1][1]),
    ];
    let mut lambda2 = 0.0;
    if symmetric {
        let pooled = n[1] + n[2];
        if pooled <= 0.0 {
            return Err(EmError::PooledSingularity);
        }
        pi00[1] = pooled / (2.0 * l1 * f[0][1]);
        pi00[2] = pooled / (2.0 * l1 * f[1][0]);
        lambda2 = l1 * (n[1] - n[2]) / pooled;
    }
    if pi00.iter().any(|v| !v.is_finite()) {
        return Err(EmError::Degenerate("cell probability update"));
    }

    Ok(EmState {
        params: ModelParams::new(pi00, odds),
        lambda1: counts.total(),
        lambda2,
        iteration: state.iteration + 1,
    })
}
