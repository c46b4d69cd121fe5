//! Monte Carlo study of type I error and power under Model C.
//!
//! A scenario fixes the two discordant conditional probabilities
//!
//! * `p  = Pr(Y1=1, Y2=2 | complete case, discordant)` and
//! * `p* = Pr(Y1=1, Y2=2 | discordant)`,
//!
//! together with `pi00_11`, `pi00_12`, `alpha1`, `beta` and `gamma`. The
//! remaining parameters follow from those two ratios and from the
//! normalization constraint. Each replication draws a multinomial table and
//! runs McNemar's test, the two Model C goodness-of-fit tests and the
//! conditional symmetry test.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::{fit_nested, FitConfig};
use crate::error::SimulationError;
use crate::inference::{conditional_test, fit_test, mcnemar};
use crate::models::{ModelId, ModelParams, Odds};
use crate::table::{CellProbabilities, ObservedTable};

/// Which conditional probability a scenario grid varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Varied {
    #[default]
    P,
    PStar,
}

fn default_reps() -> usize {
    2000
}

fn default_level() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub p: f64,
    pub p_star: f64,
    pub pi00_11: f64,
    pub pi00_12: f64,
    pub alpha1: f64,
    pub beta: f64,
    pub gamma: f64,
    pub n: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_level")]
    pub alpha_level: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub varies: Varied,
}

impl ScenarioSpec {
    pub fn varied_probability(&self) -> f64 {
        match self.varies {
            Varied::P => self.p,
            Varied::PStar => self.p_star,
        }
    }
}

/// Model C parameters and observed-cell probabilities implied by a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedScenario {
    pub params: ModelParams,
    pub probabilities: CellProbabilities,
}

fn in_open_unit(name: &str, v: f64) -> Result<(), SimulationError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(SimulationError::Infeasible(format!("{name} = {v} must lie in (0, 1)")))
    }
}

/// Solves for `pi00_21`, `alpha2` and `pi00_22`.
pub fn resolve_scenario(s: &ScenarioSpec) -> Result<ResolvedScenario, SimulationError> {
    in_open_unit("p", s.p)?;
    in_open_unit("p_star", s.p_star)?;
    in_open_unit("pi00_11", s.pi00_11)?;
    in_open_unit("pi00_12", s.pi00_12)?;
    for (name, v) in [("alpha1", s.alpha1), ("beta", s.beta), ("gamma", s.gamma)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(SimulationError::Infeasible(format!(
                "{name} = {v} must be a non-negative odds"
            )));
        }
    }
    if s.n == 0 {
        return Err(SimulationError::Infeasible("sample size must be positive".into()));
    }

    let k = (1.0 - s.p) / s.p;
    let pi00_21 = k * s.pi00_12;
    let alpha2 = (1.0 - s.p_star) / (k * s.p_star) * s.alpha1
        + (1.0 - s.p_star - k * s.p_star) * (1.0 + s.beta) / (k * s.p_star * (1.0 + s.gamma));
    if alpha2 < 0.0 {
        return Err(SimulationError::Infeasible(format!("alpha2 = {alpha2} is negative")));
    }
    let f1 = 1.0 + s.alpha1 + s.beta + s.alpha1 * s.gamma;
    let f2 = 1.0 + alpha2 + s.beta + alpha2 * s.gamma;
    let pi00_22 = (1.0 - (s.pi00_11 + s.pi00_12) * f1 - pi00_21 * f2) / f2;
    if pi00_22 < 0.0 {
        return Err(SimulationError::Infeasible(format!("pi00_22 = {pi00_22} is negative")));
    }
    let params = ModelParams::new(
        [s.pi00_11, s.pi00_12, pi00_21, pi00_22],
        Odds::C {
            alpha1: s.alpha1,
            alpha2,
            beta: s.beta,
            gamma: s.gamma,
        },
    );
    Ok(ResolvedScenario {
        params,
        probabilities: params.cell_probabilities(),
    })
}

/// `(p, p*)`: the share of the (1,2) cell among discordant pairs, for
/// complete cases and for the full population.
pub fn conditional_probabilities(params: &ModelParams) -> Result<(f64, f64), SimulationError> {
    let [_, b, c, _] = params.pi00;
    let m = params.marginal_table();
    if b + c <= 0.0 || m[0][1] + m[1][0] <= 0.0 {
        return Err(SimulationError::NoDiscordantMass);
    }
    Ok((b / (b + c), m[0][1] / (m[0][1] + m[1][0])))
}

/// Random stream for one replication. Streams for distinct
/// `(scenario, replication)` pairs under one seed never overlap.
pub fn replication_rng(seed: u64, scenario: u32, replication: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(scenario) << 32) | u64::from(replication));
    rng
}

/// One multinomial draw of size `n` over the nine cells, by sequential
/// conditional binomials.
pub fn sample_table<R: Rng + ?Sized>(probs: &CellProbabilities, n: u64, rng: &mut R) -> ObservedTable {
    let mut counts = [0u64; 9];
    let mut remaining = n;
    let mut mass = 1.0;
    for (k, &p) in probs.0.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k == 8 {
            counts[k] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, q).expect("probability in [0, 1]").sample(rng);
        counts[k] = draw;
        remaining -= draw;
        mass -= p;
    }
    ObservedTable::from_array_unchecked(counts)
}

/// Draws the table of replication `index` under `seed`.
pub fn sample_table_seeded(probs: &CellProbabilities, n: u64, seed: u64, index: u32) -> ObservedTable {
    sample_table(probs, n, &mut replication_rng(seed, 0, index))
}

/// Tests to run in every replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSelection {
    pub mcnemar: bool,
    pub sym_c: bool,
    pub model_c: bool,
    pub conditional: bool,
}

impl Default for TestSelection {
    fn default() -> Self {
        Self {
            mcnemar: true,
            sym_c: true,
            model_c: true,
            conditional: true,
        }
    }
}

/// Rejection rates for one scenario. A rate is `None` when the test was not
/// selected or failed in every replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub n: u64,
    pub varied_prob: f64,
    pub mcnemar: Option<f64>,
    pub sym_c: Option<f64>,
    pub model_c: Option<f64>,
    pub conditional: Option<f64>,
    /// Replications in which at least one selected test could not be computed.
    pub failures: usize,
    pub reps: usize,
}

/// Per-test rejection and failure counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    rejected: [usize; 4],
    failed: [usize; 4],
    failed_reps: usize,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        for k in 0..4 {
            self.rejected[k] += other.rejected[k];
            self.failed[k] += other.failed[k];
        }
        self.failed_reps += other.failed_reps;
        self
    }
}

/// Outcome of one test in one replication: `Some(reject)` or `None` on failure.
fn replicate(table: &ObservedTable, level: f64, tests: &TestSelection, cfg: &FitConfig) -> [Option<Option<bool>>; 4] {
    let mut out = [None; 4];
    if tests.mcnemar {
        out[0] = Some(mcnemar(table, level).ok().map(|r| r.reject));
    }
    if tests.sym_c || tests.model_c || tests.conditional {
        let pair = fit_nested(ModelId::C, table, cfg).ok();
        let verdict = |f: &crate::em::FitResult| {
            if f.converged {
                fit_test(f, level).ok().map(|r| r.reject)
            } else {
                None
            }
        };
        if tests.sym_c {
            out[1] = Some(pair.as_ref().and_then(|(s, _)| verdict(s)));
        }
        if tests.model_c {
            out[2] = Some(pair.as_ref().and_then(|(_, m)| verdict(m)));
        }
        if tests.conditional {
            out[3] = Some(pair.as_ref().and_then(|(s, m)| {
                if s.converged && m.converged {
                    conditional_test(s, m, level).ok().map(|r| r.reject)
                } else {
                    None
                }
            }));
        }
    }
    out
}

/// Runs every scenario of `grid` and tabulates rejection rates.
pub fn run_study(
    grid: &[ScenarioSpec],
    tests: &TestSelection,
    cfg: &FitConfig,
) -> Result<Vec<RejectionRow>, SimulationError> {
    grid.iter()
        .enumerate()
        .map(|(idx, spec)| run_scenario(idx as u32, spec, tests, cfg))
        .collect()
}

/// Runs one scenario; `index` selects the scenario's family of random streams.
pub fn run_scenario(
    index: u32,
    spec: &ScenarioSpec,
    tests: &TestSelection,
    cfg: &FitConfig,
) -> Result<RejectionRow, SimulationError> {
    if spec.reps == 0 {
        return Err(SimulationError::NoReplications);
    }
    if !(spec.alpha_level > 0.0 && spec.alpha_level < 1.0) {
        return Err(SimulationError::Infeasible(format!(
            "significance level {} outside (0, 1)",
            spec.alpha_level
        )));
    }
    let resolved = resolve_scenario(spec)?;
    let tally = (0..spec.reps as u32)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(spec.seed, index, rep);
            let table = sample_table(&resolved.probabilities, spec.n, &mut rng);
            let outcome = replicate(&table, spec.alpha_level, tests, cfg);
            let mut t = Tally::default();
            for (k, o) in outcome.iter().enumerate() {
                match o {
                    Some(Some(true)) => t.rejected[k] += 1,
                    Some(None) => t.failed[k] += 1,
                    _ => {}
                }
            }
            if outcome.iter().any(|o| matches!(o, Some(None))) {
                t.failed_reps = 1;
            }
            t
        })
        .reduce(Tally::default, Tally::merge);

    if tally.failed_reps * 100 > spec.reps {
        return Err(SimulationError::TooManyFailures {
            failed: tally.failed_reps,
            reps: spec.reps,
        });
    }
    let selected = [tests.mcnemar, tests.sym_c, tests.model_c, tests.conditional];
    let rate = |k: usize| {
        let denom = spec.reps - tally.failed[k];
        (selected[k] && denom > 0).then(|| tally.rejected[k] as f64 / denom as f64)
    };
    Ok(RejectionRow {
        n: spec.n,
        varied_prob: spec.varied_probability(),
        mcnemar: rate(0),
        sym_c: rate(1),
        model_c: rate(2),
        conditional: rate(3),
        failures: tally.failed_reps,
        reps: spec.reps,
    })
}

/// Sample sizes used by both published scenario grids.
pub const SAMPLE_SIZES: [u64; 3] = [250, 500, 1000];
/// Values taken by the varied conditional probability.
pub const VARIED_VALUES: [f64; 3] = [0.50, 0.55, 0.60];

/// Scenario 1: symmetry holds (`p* = 0.5`) while `p` moves away from 0.5.
pub fn scenario1(n: u64, p: f64, reps: usize, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        p,
        p_star: 0.50,
        pi00_11: 0.50,
        pi00_12: 0.10,
        alpha1: 0.05,
        beta: 0.15,
        gamma: 1.20,
        n,
        reps,
        alpha_level: 0.05,
        seed,
        varies: Varied::P,
    }
}

/// Scenario 2: complete cases look symmetric (`p = 0.5`) while `p*` grows.
pub fn scenario2(n: u64, p_star: f64, reps: usize, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        p: 0.50,
        p_star,
        pi00_11: 0.30,
        pi00_12: 0.10,
        alpha1: 0.25,
        beta: 0.10,
        gamma: 1.50,
        n,
        reps,
        alpha_level: 0.05,
        seed,
        varies: Varied::PStar,
    }
}

/// Full 3×3 grid of a published scenario (1 or 2).
pub fn scenario_grid(scenario: u8, reps: usize, seed: u64) -> Vec<ScenarioSpec> {
    let make = match scenario {
        1 => scenario1,
        2 => scenario2,
        _ => panic!("unknown scenario {scenario}"),
    };
    SAMPLE_SIZES
        .iter()
        .flat_map(|&n| VARIED_VALUES.iter().map(move |&v| make(n, v, reps, seed)))
        .collect()
}

/// Master seed used when none is given.
pub const DEFAULT_SEED: u64 = 1;

/// Both published grids in one sequence (scenario 1 first), so that every
/// cell has its own scenario index and hence its own random streams.
pub fn published_grid(reps: usize, seed: u64) -> Vec<ScenarioSpec> {
    let mut grid = scenario_grid(1, reps, seed);
    grid.extend(scenario_grid(2, reps, seed));
    grid
}

/// Position of `(scenario, n, varied value)` within [`published_grid`].
pub fn published_index(scenario: u8, n: u64, varied: f64) -> Option<u32> {
    let i = SAMPLE_SIZES.iter().position(|&m| m == n)?;
    let j = VARIED_VALUES.iter().position(|&v| (v - varied).abs() < 1e-9)?;
    let base = match scenario {
        1 => 0,
        2 => 9,
        _ => return None,
    };
    Some((base + 3 * i + j) as u32)
}

/// Reads a scenario grid from a JSON array or a CSV file with a header.
pub fn parse_manifest(source: &str) -> Result<Vec<ScenarioSpec>, SimulationError> {
    let trimmed = source.trim_start();
    if trimmed.starts_with('[') || trimmed.starts_with('{') {
        return serde_json::from_str(trimmed).map_err(|e| SimulationError::Manifest(e.to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source.as_bytes());
    reader
        .deserialize()
        .collect::<Result<Vec<ScenarioSpec>, _>>()
        .map_err(|e| SimulationError::Manifest(e.to_string()))
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map(|v| format!("{v:.4}")).unwrap_or_default()
}

/// CSV with columns `n, varied_prob, mcnemar, sym_c, model_c, conditional, failures`.
pub fn rows_to_csv(rows: &[RejectionRow]) -> String {
    let mut out = String::from("n,varied_prob,mcnemar,sym_c,model_c,conditional,failures\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            r.varied_prob,
            r.mcnemar.map(|v| v.to_string()).unwrap_or_default(),
            r.sym_c.map(|v| v.to_string()).unwrap_or_default(),
            r.model_c.map(|v| v.to_string()).unwrap_or_default(),
            r.conditional.map(|v| v.to_string()).unwrap_or_default(),
            r.failures
        );
    }
    out
}

/// Aligned text table in the layout of the published rejection tables.
pub fn rows_to_text(rows: &[RejectionRow], varied: Varied) -> String {
    let label = match varied {
        Varied::P => "p",
        Varied::PStar => "p*",
    };
    let mut out = format!(
        "{:>6} {:>5} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "n", label, "McNemar", "S^c", "c", "S|c", "failed"
    );
    let mut last_n = None;
    for r in rows {
        let n = if last_n == Some(r.n) {
            String::new()
        } else {
            r.n.to_string()
        };
        last_n = Some(r.n);
        let _ = writeln!(
            out,
            "{:>6} {:>5.2} {:>8} {:>8} {:>8} {:>8} {:>8}",
            n,
            r.varied_prob,
            fmt_rate(r.mcnemar),
            fmt_rate(r.sym_c),
            fmt_rate(r.model_c),
            fmt_rate(r.conditional),
            r.failures
        );
    }
    out
}
