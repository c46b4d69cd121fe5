//! Test statistics: G², the conditional symmetry test and McNemar's test.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::em::FitResult;
use crate::error::InferenceError;
use crate::models::Hypothesis;
use crate::special::regularized_gamma_q;
use crate::table::{ObservedTable, CELL_NAMES};

/// Conditional statistics in `[-CLAMP_TOLERANCE, 0)` are reported as zero.
pub const CLAMP_TOLERANCE: f64 = 1e-8;

/// `P(X > x)` for `X ~ chi-square(df)`.
///
/// Panics on negative `x` or zero degrees of freedom.
pub fn chi_square_upper_tail(x: f64, df: u32) -> f64 {
    assert!(x >= 0.0, "chi-square statistic must be non-negative, got {x}");
    assert!(df > 0, "chi-square degrees of freedom must be positive");
    regularized_gamma_q(f64::from(df) / 2.0, x / 2.0)
}

/// `2 * sum n log(n / m)` over the nine observed cells, with `0 log 0 = 0`.
pub fn g_squared_from_expected(table: &ObservedTable, expected: &[f64; 9]) -> Result<f64, InferenceError> {
    let mut sum = 0.0;
    for ((&n, &m), cell) in table.counts_f64().iter().zip(expected).zip(CELL_NAMES) {
        if n == 0.0 {
            continue;
        }
        if m <= 0.0 {
            return Err(InferenceError::ZeroExpected { cell });
        }
        sum += n * (n / m).ln();
    }
    // Rounding can leave a perfect fit a hair below zero.
    Ok((2.0 * sum).max(0.0))
}

/// Likelihood-ratio statistic of a fitted hypothesis against the saturated
/// model of the observed cells.
pub fn g_squared(table: &ObservedTable, fit: &FitResult) -> Result<f64, InferenceError> {
    g_squared_from_expected(table, &fit.expected)
}

fn check_level(level: f64) -> Result<(), InferenceError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(InferenceError::Level(level))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// Complete-case McNemar test.
    McNemar,
    Hypothesis(Hypothesis),
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestKind::McNemar => write!(f, "McNemar"),
            TestKind::Hypothesis(h) => write!(f, "G2({h})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub kind: TestKind,
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    pub level: f64,
    pub reject: bool,
    /// Sample size the statistic is based on.
    pub n: u64,
    /// The statistic was slightly negative and has been set to zero.
    #[serde(default)]
    pub clamped: bool,
    /// For conditional tests: the symmetric and the unconstrained fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fits: Option<Box<(FitResult, FitResult)>>,
}

impl TestReport {
    fn new(kind: TestKind, statistic: f64, df: u32, level: f64, n: u64) -> Self {
        let p_value = chi_square_upper_tail(statistic, df);
        Self {
            kind,
            statistic,
            df,
            p_value,
            level,
            reject: p_value < level,
            n,
            clamped: false,
            fits: None,
        }
    }

    /// Upper `level` critical value of the reference distribution.
    pub fn critical_value(&self) -> f64 {
        crate::special::chi_square_quantile_upper(self.level, self.df)
    }
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let crit = self.critical_value();
        let relation = if self.statistic < crit { "<" } else { ">=" };
        let decision = if self.reject { "reject" } else { "accept" };
        writeln!(f, "{:<12} {:>10.4}", format!("{}", self.kind), self.statistic)?;
        writeln!(f, "{:<12} {:>10}", "df", self.df)?;
        writeln!(f, "{:<12} {:>10.4}", "p-value", self.p_value)?;
        write!(
            f,
            "{:<12} {:.2} {relation} {:.2}, {decision} at {}%",
            "decision",
            self.statistic,
            crit,
            self.level * 100.0
        )
    }
}

/// Goodness-of-fit test of a single fitted hypothesis.
pub fn fit_test(fit: &FitResult, level: f64) -> Result<TestReport, InferenceError> {
    check_level(level)?;
    let n = fit.expected.iter().sum::<f64>().round() as u64;
    Ok(TestReport::new(
        TestKind::Hypothesis(fit.hypothesis),
        fit.g_squared,
        fit.df,
        level,
        n,
    ))
}

/// Symmetry given the model: `G²(S^m) - G²(m)` on one degree of freedom.
pub fn conditional_test(sym: &FitResult, model: &FitResult, level: f64) -> Result<TestReport, InferenceError> {
    check_level(level)?;
    let m = match (sym.hypothesis, model.hypothesis) {
        (Hypothesis::Symmetric(a), Hypothesis::Model(b)) if a == b => a,
        (s, m) => return Err(InferenceError::NotNested(format!("{s} and {m}"))),
    };
    let n_sym: f64 = sym.expected.iter().sum();
    let n_model: f64 = model.expected.iter().sum();
    if (n_sym - n_model).abs() > 1e-6 * n_sym.max(1.0) {
        return Err(InferenceError::NotNested(format!(
            "fits are for different sample sizes ({n_sym} vs {n_model})"
        )));
    }
    let raw = sym.g_squared - model.g_squared;
    let clamped = raw < 0.0;
    if raw < -CLAMP_TOLERANCE {
        return Err(InferenceError::NegativeConditional(raw));
    }
    let hypothesis = Hypothesis::Conditional(m);
    let mut report = TestReport::new(
        TestKind::Hypothesis(hypothesis),
        raw.max(0.0),
        hypothesis.degrees_of_freedom(),
        level,
        n_sym.round() as u64,
    );
    report.clamped = clamped;
    report.fits = Some(Box::new((sym.clone(), model.clone())));
    Ok(report)
}

/// McNemar's test on the complete cases, without continuity correction.
pub fn mcnemar(table: &ObservedTable, level: f64) -> Result<TestReport, InferenceError> {
    check_level(level)?;
    let b = table.n00_12 as f64;
    let c = table.n00_21 as f64;
    if b + c == 0.0 {
        return Err(InferenceError::NoDiscordantPairs);
    }
    let stat = (c - b).powi(2) / (c + b);
    Ok(TestReport::new(
        TestKind::McNemar,
        stat,
        1,
        level,
        table.complete_total(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::{fit, FitConfig};
    use crate::models::ModelId;
    use proptest::prelude::*;

    fn crime() -> ObservedTable {
        ObservedTable::from_counts([392, 55, 76, 38, 33, 9, 31, 7, 115]).unwrap()
    }

    #[test]
    fn mcnemar_crime_data() {
        let r = mcnemar(&crime(), 0.05).unwrap();
        assert!((r.statistic - 441.0 / 131.0).abs() < 1e-12);
        assert!((r.statistic - 3.37).abs() < 0.005);
        assert!(!r.reject);
        assert_eq!(r.df, 1);
        assert_eq!(r.n, 561);
    }

    #[test]
    fn mcnemar_edge_cases() {
        let sym = ObservedTable::from_counts([5, 4, 4, 5, 0, 0, 0, 0, 0]).unwrap();
        assert_eq!(mcnemar(&sym, 0.05).unwrap().statistic, 0.0);
        let lopsided = ObservedTable::from_counts([5, 0, 9, 5, 0, 0, 0, 0, 0]).unwrap();
        let r = mcnemar(&lopsided, 0.05).unwrap();
        assert_eq!(r.statistic, 9.0);
        assert!(r.reject);
        let none = ObservedTable::from_counts([5, 0, 0, 5, 1, 1, 1, 1, 1]).unwrap();
        assert_eq!(mcnemar(&none, 0.05).unwrap_err(), InferenceError::NoDiscordantPairs);
        assert_eq!(mcnemar(&sym, 1.5).unwrap_err(), InferenceError::Level(1.5));
    }

    #[test]
    fn saturated_expected_gives_zero() {
        let t = crime();
        assert_eq!(g_squared_from_expected(&t, &t.counts_f64()).unwrap(), 0.0);
    }

    #[test]
    fn zero_expected_with_positive_count_is_an_error() {
        let t = crime();
        let mut m = t.counts_f64();
        m[8] = 0.0;
        assert_eq!(
            g_squared_from_expected(&t, &m).unwrap_err(),
            InferenceError::ZeroExpected { cell: "n11_pp" }
        );
    }

    #[test]
    fn chi_square_reference_points() {
        assert!((chi_square_upper_tail(3.841, 1) - 0.05).abs() < 1e-3);
        assert!((chi_square_upper_tail(5.991, 2) - 0.05).abs() < 1e-4);
        assert!((chi_square_upper_tail(5.991, 2) - (-2.9955f64).exp()).abs() < 1e-12);
        for df in 1..6 {
            assert_eq!(chi_square_upper_tail(0.0, df), 1.0);
        }
    }

    #[test]
    #[should_panic(expected = "non-negative")]
    fn chi_square_rejects_negative() {
        chi_square_upper_tail(-1.0, 1);
    }

    #[test]
    fn conditional_on_crime_data() {
        let cfg = FitConfig::default();
        let sym = fit(Hypothesis::Symmetric(ModelId::C), &crime(), &cfg).unwrap();
        let free = fit(Hypothesis::Model(ModelId::C), &crime(), &cfg).unwrap();
        let r = conditional_test(&sym, &free, 0.05).unwrap();
        assert!((r.statistic - 0.98).abs() < 0.03, "{}", r.statistic);
        assert!(!r.reject);
        assert_eq!(r.df, 1);
        assert_eq!(r.statistic, sym.g_squared - free.g_squared);
        // Twice the log-likelihood gap gives the same value.
        let direct = 2.0 * (free.log_likelihood - sym.log_likelihood);
        assert!((r.statistic - direct).abs() < 1e-8);
        let text = r.to_string();
        assert!(text.contains("< 3.84, accept"), "{text}");
    }

    #[test]
    fn conditional_rejects_mismatched_pairs() {
        let cfg = FitConfig::default();
        let sym = fit(Hypothesis::Symmetric(ModelId::C), &crime(), &cfg).unwrap();
        let other = fit(Hypothesis::Model(ModelId::B), &crime(), &cfg).unwrap();
        assert!(matches!(
            conditional_test(&sym, &other, 0.05),
            Err(InferenceError::NotNested(_))
        ));
        assert!(matches!(
            conditional_test(&other, &sym, 0.05),
            Err(InferenceError::NotNested(_))
        ));
    }

    #[test]
    fn conditional_clamps_tiny_negative_values() {
        let t = ObservedTable::from_counts([10, 7, 7, 10, 0, 0, 0, 0, 0]).unwrap();
        let cfg = FitConfig::default();
        let sym = fit(Hypothesis::Symmetric(ModelId::C), &t, &cfg).unwrap();
        let mut free = fit(Hypothesis::Model(ModelId::C), &t, &cfg).unwrap();
        free.g_squared = sym.g_squared + 5e-9;
        let r = conditional_test(&sym, &free, 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(r.clamped);
        free.g_squared = sym.g_squared + 1e-3;
        assert!(matches!(
            conditional_test(&sym, &free, 0.05),
            Err(InferenceError::NegativeConditional(_))
        ));
    }

    proptest! {
        #[test]
        fn chi_square_tail_decreases(x in 0.0f64..60.0, dx in 1e-3f64..5.0, df in 1u32..6) {
            prop_assert!(chi_square_upper_tail(x + dx, df) < chi_square_upper_tail(x, df));
        }

        #[test]
        fn df_two_is_exponential(x in 0.0f64..200.0) {
            prop_assert!((chi_square_upper_tail(x, 2) - (-x / 2.0).exp()).abs() < 1e-12);
        }

        #[test]
        fn mcnemar_symmetries(a in 0u64..50, b in 0u64..50, c in 1u64..50, d in 0u64..50) {
            let t = ObservedTable::from_counts([a, b, c, d, 0, 0, 0, 0, 0]).unwrap();
            let s = mcnemar(&t, 0.05).unwrap().statistic;
            let concordant = ObservedTable::from_counts([d, b, c, a, 0, 0, 0, 0, 0]).unwrap();
            let discordant = ObservedTable::from_counts([a, c, b, d, 0, 0, 0, 0, 0]).unwrap();
            prop_assert_eq!(mcnemar(&concordant, 0.05).unwrap().statistic, s);
            prop_assert_eq!(mcnemar(&discordant, 0.05).unwrap().statistic, s);
        }
    }
}
