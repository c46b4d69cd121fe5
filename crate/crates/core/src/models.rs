//! The three identified nonignorable-nonresponse models.
//!
//! Each model writes the full-array probability of outcome `(i, j)` with
//! missingness pattern `(k, l)` as `pi00_ij * w_kl(i, j)`, where the weight
//! of the fully observed pattern is one and the other weights are odds:
//!
//! | model | `w_01`  | `w_10`  | `w_11`          |
//! |-------|---------|---------|-----------------|
//! | A     | `β_j`   | `α`     | `α β_j`         |
//! | B     | `β_j`   | `α_i`   | `α_i β_j`       |
//! | C     | `β`     | `α_i`   | `α_i γ`         |
//!
//! Summing the weights gives the marginal factor `F_ij`, so that
//! `Pr(Y1 = i, Y2 = j) = pi00_ij * F_ij`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::table::{CellProbabilities, ObservedTable};

/// Tolerance for the normalization check on exactly constructed parameters.
pub const EXACT_TOLERANCE: f64 = 1e-10;
/// Tolerance for the normalization check on converged EM output.
pub const FITTED_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    A,
    B,
    C,
}

impl ModelId {
    pub const ALL: [ModelId; 3] = [ModelId::A, ModelId::B, ModelId::C];

    /// Free parameters once the probabilities are constrained to sum to one.
    pub fn free_parameters(self) -> u32 {
        match self {
            ModelId::A => 4 + 1 + 2 - 1,
            ModelId::B => 4 + 2 + 2 - 1,
            ModelId::C => 4 + 2 + 1 + 1 - 1,
        }
    }

    pub fn letter(self) -> char {
        match self {
            ModelId::A => 'a',
            ModelId::B => 'b',
            ModelId::C => 'c',
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(ModelId::A),
            "b" => Ok(ModelId::B),
            "c" => Ok(ModelId::C),
            other => Err(format!("unknown model {other:?}, expected a, b or c")),
        }
    }
}

/// The hypotheses that can be tested against a table.
///
/// `Conditional` is a report kind built from a pair of fits; it is never
/// fitted on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum Hypothesis {
    Model(ModelId),
    Symmetric(ModelId),
    Conditional(ModelId),
}

impl Hypothesis {
    pub fn model(self) -> ModelId {
        match self {
            Hypothesis::Model(m) | Hypothesis::Symmetric(m) | Hypothesis::Conditional(m) => m,
        }
    }

    pub fn is_symmetric(self) -> bool {
        matches!(self, Hypothesis::Symmetric(_))
    }

    pub fn is_fittable(self) -> bool {
        !matches!(self, Hypothesis::Conditional(_))
    }

    /// Asymptotic chi-square degrees of freedom of the G² statistic.
    pub fn degrees_of_freedom(self) -> u32 {
        const SATURATED: u32 = 9 - 1;
        match self {
            Hypothesis::Model(m) => SATURATED - m.free_parameters(),
            Hypothesis::Symmetric(m) => SATURATED - m.free_parameters() + 1,
            Hypothesis::Conditional(_) => 1,
        }
    }

    /// All six hypotheses that are fitted directly.
    pub fn fitted() -> [Hypothesis; 6] {
        [
            Hypothesis::Model(ModelId::A),
            Hypothesis::Symmetric(ModelId::A),
            Hypothesis::Model(ModelId::B),
            Hypothesis::Symmetric(ModelId::B),
            Hypothesis::Model(ModelId::C),
            Hypothesis::Symmetric(ModelId::C),
        ]
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hypothesis::Model(m) => write!(f, "{m}"),
            Hypothesis::Symmetric(m) => write!(f, "S^{m}"),
            Hypothesis::Conditional(m) => write!(f, "S|{m}"),
        }
    }
}

/// Missingness odds of each model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Odds {
    A {
        alpha: f64,
        beta1: f64,
        beta2: f64,
    },
    B {
        alpha1: f64,
        alpha2: f64,
        beta1: f64,
        beta2: f64,
    },
    C {
        alpha1: f64,
        alpha2: f64,
        beta: f64,
        gamma: f64,
    },
}

impl Odds {
    pub fn model(&self) -> ModelId {
        match self {
            Odds::A { .. } => ModelId::A,
            Odds::B { .. } => ModelId::B,
            Odds::C { .. } => ModelId::C,
        }
    }

    /// All odds set to the same value.
    pub fn uniform(model: ModelId, v: f64) -> Self {
        match model {
            ModelId::A => Odds::A {
                alpha: v,
                beta1: v,
                beta2: v,
            },
            ModelId::B => Odds::B {
                alpha1: v,
                alpha2: v,
                beta1: v,
                beta2: v,
            },
            ModelId::C => Odds::C {
                alpha1: v,
                alpha2: v,
                beta: v,
                gamma: v,
            },
        }
    }

    pub fn names(&self) -> &'static [&'static str] {
        match self {
            Odds::A { .. } => &["alpha", "beta1", "beta2"],
            Odds::B { .. } => &["alpha1", "alpha2", "beta1", "beta2"],
            Odds::C { .. } => &["alpha1", "alpha2", "beta", "gamma"],
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match *self {
            Odds::A { alpha, beta1, beta2 } => vec![alpha, beta1, beta2],
            Odds::B {
                alpha1,
                alpha2,
                beta1,
                beta2,
            } => vec![alpha1, alpha2, beta1, beta2],
            Odds::C {
                alpha1,
                alpha2,
                beta,
                gamma,
            } => vec![alpha1, alpha2, beta, gamma],
        }
    }

    /// Rebuilds odds of the given model from values in [`Odds::names`] order.
    ///
    /// Panics if `values` has the wrong length.
    pub fn from_values(model: ModelId, values: &[f64]) -> Self {
        match (model, values) {
            (ModelId::A, &[alpha, beta1, beta2]) => Odds::A { alpha, beta1, beta2 },
            (ModelId::B, &[alpha1, alpha2, beta1, beta2]) => Odds::B {
                alpha1,
                alpha2,
                beta1,
                beta2,
            },
            (ModelId::C, &[alpha1, alpha2, beta, gamma]) => Odds::C {
                alpha1,
                alpha2,
                beta,
                gamma,
            },
            _ => panic!("model {model} takes a different number of odds than {}", values.len()),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let v: Vec<f64> = self.values().into_iter().map(f).collect();
        Odds::from_values(self.model(), &v)
    }

    /// Weights `(w_00, w_01, w_10, w_11)` of the four missingness patterns
    /// for outcome `(i, j)`, zero-based.
    pub fn pattern_weights(&self, i: usize, j: usize) -> [f64; 4] {
        match *self {
            Odds::A { alpha, beta1, beta2 } => {
                let b = [beta1, beta2][j];
                [1.0, b, alpha, alpha * b]
            }
            Odds::B {
                alpha1,
                alpha2,
                beta1,
                beta2,
            } => {
                let a = [alpha1, alpha2][i];
                let b = [beta1, beta2][j];
                [1.0, b, a, a * b]
            }
            Odds::C {
                alpha1,
                alpha2,
                beta,
                gamma,
            } => {
                let a = [alpha1, alpha2][i];
                [1.0, beta, a, a * gamma]
            }
        }
    }

    /// Marginal factors `F_ij` with `Pr(Y1 = i, Y2 = j) = pi00_ij * F_ij`.
    pub fn marginal_factors(&self) -> [[f64; 2]; 2] {
        match *self {
            Odds::A { alpha, beta1, beta2 } => {
                let r = 1.0 + alpha;
                [
                    [r * (1.0 + beta1), r * (1.0 + beta2)],
                    [r * (1.0 + beta1), r * (1.0 + beta2)],
                ]
            }
            Odds::B {
                alpha1,
                alpha2,
                beta1,
                beta2,
            } => [
                [(1.0 + alpha1) * (1.0 + beta1), (1.0 + alpha1) * (1.0 + beta2)],
                [(1.0 + alpha2) * (1.0 + beta1), (1.0 + alpha2) * (1.0 + beta2)],
            ],
            Odds::C {
                alpha1,
                alpha2,
                beta,
                gamma,
            } => {
                let f1 = 1.0 + alpha1 + beta + alpha1 * gamma;
                let f2 = 1.0 + alpha2 + beta + alpha2 * gamma;
                [[f1, f1], [f2, f2]]
            }
        }
    }
}

/// Complete-cell probabilities plus missingness odds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `(pi00_11, pi00_12, pi00_21, pi00_22)`.
    pub pi00: [f64; 4],
    #[serde(flatten)]
    pub odds: Odds,
}

impl ModelParams {
    pub fn new(pi00: [f64; 4], odds: Odds) -> Self {
        Self { pi00, odds }
    }

    pub fn model(&self) -> ModelId {
        self.odds.model()
    }

    /// Complete-cell probabilities indexed `[i][j]`.
    pub fn pi00_grid(&self) -> [[f64; 2]; 2] {
        let p = self.pi00;
        [[p[0], p[1]], [p[2], p[3]]]
    }

    pub fn marginal_factors(&self) -> [[f64; 2]; 2] {
        self.odds.marginal_factors()
    }

    /// Probabilities of the nine observed cells.
    pub fn cell_probabilities(&self) -> CellProbabilities {
        let p = self.pi00_grid();
        let mut out = [0.0; 9];
        out[..4].copy_from_slice(&self.pi00);
        for i in 0..2 {
            for j in 0..2 {
                let w = self.odds.pattern_weights(i, j);
                out[4 + i] += p[i][j] * w[1];
                out[6 + j] += p[i][j] * w[2];
                out[8] += p[i][j] * w[3];
            }
        }
        CellProbabilities(out)
    }

    /// `Pr(Y1 = i, Y2 = j)`, zero-based indices.
    pub fn marginal_probability(&self, i: usize, j: usize) -> f64 {
        assert!(i < 2 && j < 2, "cell index ({i}, {j}) out of range");
        self.pi00_grid()[i][j] * self.marginal_factors()[i][j]
    }

    pub fn marginal_table(&self) -> [[f64; 2]; 2] {
        let p = self.pi00_grid();
        let f = self.marginal_factors();
        [
            [p[0][0] * f[0][0], p[0][1] * f[0][1]],
            [p[1][0] * f[1][0], p[1][1] * f[1][1]],
        ]
    }

    /// `Pr(Y1 = 1, Y2 = 2) - Pr(Y1 = 2, Y2 = 1)`.
    pub fn symmetry_residual(&self) -> f64 {
        let m = self.marginal_table();
        m[0][1] - m[1][0]
    }

    /// `(sum of the nine cell probabilities - 1, symmetry residual)`.
    pub fn constraint_values(&self) -> (f64, f64) {
        let total: f64 = self.marginal_table().iter().flatten().sum();
        (total - 1.0, self.symmetry_residual())
    }

    /// True if any odds parameter sits below `threshold`.
    pub fn on_boundary(&self, threshold: f64) -> bool {
        self.odds.values().iter().any(|&v| v < threshold)
    }

    /// Kernel of the observed-data log-likelihood, `sum n * log(pi)`.
    ///
    /// Cells with zero count contribute nothing. Returns negative infinity
    /// when a positive count meets a zero probability.
    pub fn log_likelihood(&self, table: &ObservedTable) -> f64 {
        let probs = self.cell_probabilities();
        table
            .counts_f64()
            .iter()
            .zip(probs.0)
            .filter(|(&n, _)| n > 0.0)
            .map(|(&n, p)| if p > 0.0 { n * p.ln() } else { f64::NEG_INFINITY })
            .sum()
    }

    /// Checks finiteness, sign constraints and normalization within `tol`.
    pub fn validate(&self, tol: f64) -> Result<(), ParamError> {
        const CELLS: [&str; 4] = ["pi00_11", "pi00_12", "pi00_21", "pi00_22"];
        for (name, &v) in CELLS.iter().zip(&self.pi00) {
            if !v.is_finite() {
                return Err(ParamError::NonFinite(name));
            }
            if v <= 0.0 {
                return Err(ParamError::NonPositiveCell { name, value: v });
            }
        }
        for (name, v) in self.odds.names().iter().zip(self.odds.values()) {
            if !v.is_finite() {
                return Err(ParamError::NonFinite(name));
            }
            if v < 0.0 {
                return Err(ParamError::NegativeOdds { name, value: v });
            }
        }
        let total = self.cell_probabilities().sum();
        if (total - 1.0).abs() > tol {
            return Err(ParamError::NotNormalized(total));
        }
        Ok(())
    }
}
