//! Lagrange-augmented EM fitting of the six directly fitted hypotheses.
//!
//! Each iteration runs [`e_step`] and [`m_step`]. After the first M-step the
//! normalization multiplier equals the sample size and every iterate
//! satisfies the hypothesis' equality constraints exactly, so the
//! observed-data log-likelihood can be tracked for convergence.

mod steps;

pub use steps::{e_step, m_step, AugmentedCounts, EmState, ODDS_FLOOR};

use serde::{Deserialize, Serialize};

use crate::error::EmError;
use crate::inference::{chi_square_upper_tail, g_squared_from_expected};
use crate::models::{Hypothesis, ModelId, ModelParams, Odds};
use crate::table::ObservedTable;

/// Odds below this value at exit mark the fit as a boundary solution.
pub const BOUNDARY_THRESHOLD: f64 = 1e-8;

/// How the starting point of a fit is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Moment-style start from the observed margins.
    #[default]
    Moments,
    /// Start from the given parameters.
    Given(ModelParams),
    /// The moment start plus one start per corner of a grid that scales each
    /// odds parameter by 1/4 or 4. The fit with the largest likelihood wins.
    MultiStart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Stop once the relative change of the log-likelihood kernel falls
    /// below this value and no parameter moved by more than ten times it.
    pub tolerance: f64,
    /// Largest admissible constraint residual at exit.
    pub constraint_tolerance: f64,
    pub init: InitStrategy,
    /// Keep the log-likelihood after every iteration in [`FitResult::trace`].
    pub record_trace: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-10,
            constraint_tolerance: 1e-8,
            init: InitStrategy::Moments,
            record_trace: false,
        }
    }
}

/// Iteration budget for simulation studies. Fits whose optimum sits on or
/// near the boundary of the odds space approach it sublinearly and can need
/// a few hundred thousand cycles to reach a fixed point.
pub const STUDY_MAX_ITERATIONS: usize = 1_000_000;

impl FitConfig {
    /// Defaults with the larger [`STUDY_MAX_ITERATIONS`] budget.
    pub fn for_study() -> Self {
        Self {
            max_iterations: STUDY_MAX_ITERATIONS,
            ..Self::default()
        }
    }

    pub fn with_init(mut self, init: InitStrategy) -> Self {
        self.init = init;
        self
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxIterations,
    /// A numerical failure; the reported parameters are the last valid ones.
    Failed(String),
}

/// Outcome of fitting one hypothesis to one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub hypothesis: Hypothesis,
    pub params: ModelParams,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Expected frequencies of the nine observed cells.
    pub expected: [f64; 9],
    pub log_likelihood: f64,
    pub g_squared: f64,
    pub df: u32,
    pub p_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub status: FitStatus,
    pub boundary: bool,
    /// `(normalization residual, symmetry residual)` at exit.
    pub constraint_residual: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

/// Kernel of the observed-data log-likelihood.
pub fn observed_log_likelihood(params: &ModelParams, table: &ObservedTable) -> f64 {
    params.log_likelihood(table)
}

/// `(normalization residual, symmetry residual)` of `params`.
pub fn constraint_values(params: &ModelParams) -> (f64, f64) {
    params.constraint_values()
}

/// Moment-style starting values.
///
/// Complete-cell probabilities are proportional to `n00_ij + 1/2`, scaled to
/// the (smoothed) complete-case share of the sample; odds come from the
/// ratio of each supplemental margin to the complete cases, with the same
/// smoothing so that no parameter starts at zero.
pub fn initial_params(model: ModelId, table: &ObservedTable) -> ModelParams {
    let n = table.total() as f64;
    let complete = table.complete_total() as f64 + 2.0;
    let pi00 = table.counts_f64()[..4]
        .iter()
        .map(|&c| (c + 0.5) / (n + 2.0))
        .collect::<Vec<_>>();
    let rows = table.row_margins();
    let cols = table.col_margins();
    let row_odds = |v: f64| (v + 0.5) / complete;
    let r = row_odds(rows[0] + rows[1]);
    let c = row_odds(cols[0] + cols[1]);
    let odds = match model {
        ModelId::A => Odds::A {
            alpha: c,
            beta1: r,
            beta2: r,
        },
        ModelId::B => Odds::B {
            alpha1: c,
            alpha2: c,
            beta1: r,
            beta2: r,
        },
        ModelId::C => Odds::C {
            alpha1: c,
            alpha2: c,
            beta: r,
            gamma: 1.0,
        },
    };
    ModelParams::new([pi00[0], pi00[1], pi00[2], pi00[3]], odds)
}

fn start_points(model: ModelId, table: &ObservedTable, init: &InitStrategy) -> Vec<ModelParams> {
    match init {
        InitStrategy::Moments => vec![initial_params(model, table)],
        InitStrategy::Given(p) => vec![*p],
        InitStrategy::MultiStart => {
            let base = initial_params(model, table);
            let values = base.odds.values();
            let k = values.len();
            let mut starts = vec![base];
            for mask in 0..(1usize << k) {
                let scaled: Vec<f64> = values
                    .iter()
                    .enumerate()
                    .map(|(bit, v)| if mask >> bit & 1 == 1 { v * 4.0 } else { v / 4.0 })
                    .collect();
                starts.push(ModelParams::new(base.pi00, Odds::from_values(model, &scaled)));
            }
            starts
        }
    }
}

fn max_param_change(a: &ModelParams, b: &ModelParams) -> f64 {
    let cells = a.pi00.iter().zip(&b.pi00).map(|(x, y)| (x - y).abs());
    let odds = a
        .odds
        .values()
        .into_iter()
        .zip(b.odds.values())
        .map(|(x, y)| (x - y).abs());
    cells.chain(odds).fold(0.0, f64::max)
}

/// Fits a directly fitted hypothesis by EM.
///
/// Numerical trouble during iteration does not produce an error: the result
/// carries `converged = false` and a [`FitStatus::Failed`] status instead.
/// Only a request to fit a conditional hypothesis is rejected.
pub fn fit(hypothesis: Hypothesis, table: &ObservedTable, cfg: &FitConfig) -> Result<FitResult, EmError> {
    if !hypothesis.is_fittable() {
        return Err(EmError::NotFittable(hypothesis.to_string()));
    }
    if let InitStrategy::Given(p) = &cfg.init {
        if p.model() != hypothesis.model() {
            return Err(EmError::ModelMismatch {
                expected: hypothesis.model(),
                found: p.model(),
            });
        }
    }
    let best = start_points(hypothesis.model(), table, &cfg.init)
        .into_iter()
        .map(|start| fit_from(hypothesis, table, cfg, start))
        .reduce(|best, next| if better(&next, &best) { next } else { best })
        .expect("at least one start point");
    Ok(best)
}

fn better(a: &FitResult, b: &FitResult) -> bool {
    match (a.converged, b.converged) {
        (true, false) => true,
        (false, true) => false,
        _ => a.log_likelihood > b.log_likelihood,
    }
}

/// Extra M-step passes allowed within one cycle; see [`cycle`].
const MAX_REFINEMENTS: usize = 500;

/// Likelihood drops smaller than this are treated as rounding noise.
const ASCENT_SLACK: f64 = 1e-10;

/// One E-step followed by the sequential M-step.
///
/// The odds updates use the multipliers and cell probabilities of the
/// previous cycle, so a single pass only approximates the constrained
/// maximizer of the expected complete-data log-likelihood and can, early on,
/// lower the observed likelihood. When that happens the M-step is repeated
/// on the same completed counts, which converges to the exact constrained
/// maximizer and restores ascent.
fn cycle(
    hypothesis: Hypothesis,
    table: &ObservedTable,
    state: &EmState,
    floor: Option<f64>,
) -> Result<(EmState, f64), EmError> {
    let counts = e_step(table, &state.params)?;
    let mut next = m_step(hypothesis, &counts, state)?;
    let mut ll = next.params.log_likelihood(table);
    let Some(floor) = floor else {
        return Ok((next, ll));
    };
    let iteration = next.iteration;
    for _ in 0..MAX_REFINEMENTS {
        if ll >= floor - ASCENT_SLACK {
            break;
        }
        next = m_step(hypothesis, &counts, &next)?;
        ll = next.params.log_likelihood(table);
    }
    next.iteration = iteration;
    Ok((next, ll))
}

/// Runs EM from one starting point.
pub fn fit_from(hypothesis: Hypothesis, table: &ObservedTable, cfg: &FitConfig, start: ModelParams) -> FitResult {
    let mut state = EmState::start(start, table);
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut previous: Option<f64> = None;
    let mut status = FitStatus::MaxIterations;
    // A start that already meets the constraints (a warm start) is a valid
    // point of the hypothesis, so even the first cycle must not go below it.
    let (norm, sym) = start.constraint_values();
    let mut floor = (norm.abs() <= 1e-12 && (!hypothesis.is_symmetric() || sym.abs() <= 1e-12))
        .then(|| start.log_likelihood(table))
        .filter(|ll| ll.is_finite());

    for _ in 0..cfg.max_iterations.max(1) {
        let (next, ll) = match cycle(hypothesis, table, &state, floor) {
            Ok(next) => next,
            Err(e) => {
                status = FitStatus::Failed(e.to_string());
                break;
            }
        };
        if let Some(t) = trace.as_mut() {
            t.push(ll);
        }
        let moved = max_param_change(&state.params, &next.params);
        state = next;
        if !ll.is_finite() {
            status = FitStatus::Failed("log-likelihood is not finite".into());
            break;
        }
        if let Some(prev) = previous {
            let rel = (ll - prev).abs() / ll.abs().max(f64::MIN_POSITIVE);
            if rel <= cfg.tolerance && moved <= 10.0 * cfg.tolerance {
                status = FitStatus::Converged;
                break;
            }
        }
        previous = Some(ll);
        floor = previous;
    }

    let (norm, sym) = state.params.constraint_values();
    if status == FitStatus::Converged
        && (norm.abs() > cfg.constraint_tolerance
            || (hypothesis.is_symmetric() && sym.abs() > cfg.constraint_tolerance))
    {
        status = FitStatus::Failed(format!("constraint residuals ({norm:e}, {sym:e}) exceed tolerance"));
    }
    summarize(hypothesis, table, state, status, trace)
}

fn summarize(
    hypothesis: Hypothesis,
    table: &ObservedTable,
    state: EmState,
    status: FitStatus,
    trace: Option<Vec<f64>>,
) -> FitResult {
    let n = table.total() as f64;
    let expected = state.params.cell_probabilities().scaled(n);
    let g_squared = g_squared_from_expected(table, &expected).unwrap_or(f64::INFINITY);
    let df = hypothesis.degrees_of_freedom();
    let p_value = if g_squared.is_finite() {
        chi_square_upper_tail(g_squared, df)
    } else {
        0.0
    };
    FitResult {
        hypothesis,
        params: state.params,
        lambda1: state.lambda1,
        lambda2: state.lambda2,
        expected,
        log_likelihood: state.params.log_likelihood(table),
        g_squared,
        df,
        p_value,
        iterations: state.iteration,
        converged: status == FitStatus::Converged,
        status,
        boundary: state.params.on_boundary(BOUNDARY_THRESHOLD),
        constraint_residual: state.params.constraint_values(),
        trace,
    }
}

/// Fits `Symmetric(model)` and `Model(model)` as a nested pair.
///
/// The unconstrained fit is additionally started from the symmetric
/// estimate, so its likelihood is never below the constrained one. If the
/// cold start ends below the symmetric fit, the warm-started fit is reported
/// even when it ran out of iterations.
pub fn fit_nested(model: ModelId, table: &ObservedTable, cfg: &FitConfig) -> Result<(FitResult, FitResult), EmError> {
    let sym = fit(Hypothesis::Symmetric(model), table, cfg)?;
    let free = fit(Hypothesis::Model(model), table, cfg)?;
    if !sym.converged {
        return Ok((sym, free));
    }
    let warm = fit_from(Hypothesis::Model(model), table, cfg, sym.params);
    let free = if better(&warm, &free) || free.log_likelihood < sym.log_likelihood {
        warm
    } else {
        free
    };
    Ok((sym, free))
}
