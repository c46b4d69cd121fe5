//! Human-readable and CSV layouts.

use std::fmt::Write as _;

use nisym::table::CELL_NAMES;
use nisym::{fit_test, fixtures, FitResult, ModelParams, ObservedTable, RejectionRow, TestReport};
use serde::Serialize;

pub fn fit_text(table: &ObservedTable, r: &FitResult, level: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "hypothesis    {}", r.hypothesis);
    let status = if r.converged { "converged" } else { "NOT converged" };
    let _ = writeln!(out, "status        {status} after {} iterations", r.iterations);
    let _ = writeln!(out, "log-lik       {:.6}", r.log_likelihood);
    if r.boundary {
        let _ = writeln!(
            out,
            "boundary      yes (an odds estimate is ~0; chi-square p-value is approximate)"
        );
    }
    let _ = writeln!(out, "\nestimates");
    for (name, v) in param_list(&r.params) {
        let _ = writeln!(out, "  {name:<10} {v:>12.6}");
    }
    let _ = writeln!(out, "\n{:<10} {:>10} {:>12}", "cell", "observed", "expected");
    for ((name, obs), exp) in CELL_NAMES.iter().zip(table.counts()).zip(r.expected) {
        let _ = writeln!(out, "{name:<10} {obs:>10} {exp:>12.4}");
    }
    out.push('\n');
    match fit_test(r, level) {
        Ok(t) => {
            let _ = writeln!(out, "{t}");
        }
        Err(e) => {
            let _ = writeln!(out, "G2 unavailable: {e}");
        }
    }
    out
}

pub fn fit_csv(table: &ObservedTable, r: &FitResult) -> String {
    let mut out = String::from("cell,observed,expected\n");
    for ((name, obs), exp) in CELL_NAMES.iter().zip(table.counts()).zip(r.expected) {
        let _ = writeln!(out, "{name},{obs},{exp}");
    }
    out
}

fn param_list(p: &ModelParams) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = ["pi00_11", "pi00_12", "pi00_21", "pi00_22"]
        .iter()
        .zip(p.pi00)
        .map(|(n, x)| (n.to_string(), x))
        .collect();
    v.extend(
        p.odds
            .names()
            .iter()
            .zip(p.odds.values())
            .map(|(n, x)| (n.to_string(), x)),
    );
    v
}

pub fn test_text(sym: &TestReport, free: &TestReport, cond: &TestReport) -> String {
    let mut out = String::new();
    for r in [sym, free, cond] {
        let _ = writeln!(out, "{r}\n");
    }
    if cond.clamped {
        let _ = writeln!(
            out,
            "note: conditional statistic was within rounding of zero and set to 0"
        );
    }
    out
}

pub fn tests_csv(reports: &[&TestReport]) -> String {
    let mut out = String::from("test,statistic,df,p_value,level,reject\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.kind, r.statistic, r.df, r.p_value, r.level, r.reject
        );
    }
    out
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub name: String,
    pub published: f64,
    pub computed: f64,
}

impl Comparison {
    pub fn new(name: &str, published: f64, computed: f64) -> Self {
        Self {
            name: name.to_string(),
            published,
            computed,
        }
    }
}

/// Symmetric Model C estimates next to the published ones.
pub fn estimates(p: &ModelParams) -> Vec<Comparison> {
    use fixtures::crime;
    let published = [
        crime::PI00[0],
        crime::PI00[1],
        crime::PI00[2],
        crime::PI00[3],
        crime::ALPHA1,
        crime::ALPHA2,
        crime::BETA,
        crime::GAMMA,
    ];
    param_list(p)
        .into_iter()
        .zip(published)
        .map(|((name, v), pubv)| Comparison::new(&name, pubv, v))
        .collect()
}

#[derive(Debug, Serialize)]
pub struct SimulatedRow {
    /// Published `(McNemar, S^c, c, S|c)` rates.
    pub published: [f64; 4],
    pub computed: RejectionRow,
}

#[derive(Debug, Serialize)]
pub struct ScenarioBlock {
    pub scenario: u8,
    pub rows: Vec<SimulatedRow>,
}

#[derive(Debug, Serialize)]
pub struct Reproduction {
    pub analysis: Vec<Comparison>,
    pub estimates: Vec<Comparison>,
    pub reps: usize,
    pub seed: u64,
    pub reduced_precision: bool,
    pub scenarios: Vec<ScenarioBlock>,
}

fn computed_rates(r: &RejectionRow) -> [Option<f64>; 4] {
    [r.mcnemar, r.sym_c, r.model_c, r.conditional]
}

fn rate(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

pub fn reproduce_text(r: &Reproduction) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Crime survey table (n = {})", fixtures::crime_table().total());
    let _ = writeln!(out, "{:<16} {:>10} {:>10}", "statistic", "published", "computed");
    for c in &r.analysis {
        let _ = writeln!(out, "{:<16} {:>10.2} {:>10.4}", c.name, c.published, c.computed);
    }
    let _ = writeln!(out, "\n{:<16} {:>10} {:>10}", "S^c estimate", "published", "computed");
    for c in &r.estimates {
        let _ = writeln!(out, "{:<16} {:>10.3} {:>10.4}", c.name, c.published, c.computed);
    }
    for block in &r.scenarios {
        let label = if block.scenario == 1 { "p" } else { "p*" };
        let _ = writeln!(
            out,
            "\nScenario {}: rejection rates at 5%, {} replications, seed {}{}",
            block.scenario,
            r.reps,
            r.seed,
            if r.reduced_precision {
                " (reduced precision: Monte Carlo error is larger than in the published table)"
            } else {
                ""
            }
        );
        let _ = writeln!(
            out,
            "{:>5} {:>5} {:^17}{:^17}{:^17}{:^17}{:>6}",
            "n", label, "McNemar", "S^c", "c", "S|c", "failed"
        );
        let sub = format!(" {:>6} {:>7}  ", "pub", "ours");
        let _ = writeln!(out, "{:>5} {:>5} {}", "", "", sub.repeat(4));
        let mut last = None;
        for row in &block.rows {
            let c = &row.computed;
            let n = if last == Some(c.n) {
                String::new()
            } else {
                c.n.to_string()
            };
            last = Some(c.n);
            let _ = write!(out, "{n:>5} {:>5.2} ", c.varied_prob);
            for (p, v) in row.published.iter().zip(computed_rates(c)) {
                let _ = write!(out, " {p:>6.4} {:>7}  ", rate(v));
            }
            let _ = writeln!(out, "{:>5}", c.failures);
        }
    }
    out
}

pub fn reproduce_csv(r: &Reproduction) -> String {
    let mut out = String::from("section,name,published,computed\n");
    for c in &r.analysis {
        let _ = writeln!(out, "analysis,{},{},{}", c.name, c.published, c.computed);
    }
    for c in &r.estimates {
        let _ = writeln!(out, "estimate,{},{},{}", c.name, c.published, c.computed);
    }
    let tests = ["mcnemar", "sym_c", "model_c", "conditional"];
    for block in &r.scenarios {
        for row in &block.rows {
            let c = &row.computed;
            for ((t, p), v) in tests.iter().zip(row.published).zip(computed_rates(c)) {
                let _ = writeln!(
                    out,
                    "scenario{},n={} prob={} {t},{p},{}",
                    block.scenario,
                    c.n,
                    c.varied_prob,
                    v.map(|x| x.to_string()).unwrap_or_default()
                );
            }
        }
    }
    out
}
