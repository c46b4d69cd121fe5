//! Symmetry tests for square contingency tables with nonignorable
//! nonresponse.
//!
//! Paired categorical outcomes `(Y1, Y2)` with two levels each are observed
//! together with response indicators, giving a 3×3 table of counts: the
//! complete 2×2 block, the two partially observed margins and the
//! both-missing cell. Three log-linear nonresponse models (`a`, `b`, `c`)
//! are fitted by a Lagrange-augmented EM algorithm, with and without the
//! marginal symmetry constraint, and compared by likelihood-ratio tests.
//!
//! ```
//! use nisym::{fixtures, fit_nested, conditional_test, FitConfig, ModelId};
//!
//! let table = fixtures::crime_table();
//! let (sym, free) = fit_nested(ModelId::C, &table, &FitConfig::default()).unwrap();
//! let report = conditional_test(&sym, &free, 0.05).unwrap();
//! assert!(!report.reject);
//! ```

pub mod em;
pub mod error;
pub mod fixtures;
pub mod inference;
pub mod models;
pub mod simulate;
pub mod special;
pub mod table;

pub use em::{fit, fit_nested, FitConfig, FitResult, FitStatus, InitStrategy};
pub use error::{EmError, InferenceError, ParamError, ParseError, SimulationError};
pub use inference::{chi_square_upper_tail, conditional_test, fit_test, g_squared, mcnemar, TestKind, TestReport};
pub use models::{Hypothesis, ModelId, ModelParams, Odds};
pub use simulate::{
    resolve_scenario, run_study, sample_table, RejectionRow, ResolvedScenario, ScenarioSpec, TestSelection, Varied,
};
pub use table::{CellProbabilities, ObservedTable, TableFormat};
