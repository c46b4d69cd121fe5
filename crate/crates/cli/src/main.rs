//! `nisym`: symmetry tests for 2×2 tables with nonignorable nonresponse.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical failure.

mod render;

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nisym::simulate::{self, published_grid, published_index, DEFAULT_SEED};
use nisym::{
    conditional_test, fit, fit_nested, fit_test, fixtures, mcnemar, FitConfig, Hypothesis, InitStrategy, ModelId,
    ObservedTable, TableFormat, TestSelection,
};

#[derive(Parser, Debug)]
#[command(
    name = "nisym",
    version,
    about = "Symmetry tests for square tables with nonignorable nonresponse"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model, with or without the symmetry constraint.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Impose marginal symmetry.
        #[arg(long)]
        symmetric: bool,
        #[arg(long, default_value_t = 0.05, value_parser = parse_level)]
        level: f64,
        #[command(flatten)]
        em: EmArgs,
        #[arg(long, value_enum, default_value_t = Output::Text)]
        output: Output,
    },
    /// Conditional test of symmetry given a model (fits both nested hypotheses).
    Test {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value_t = ModelArg::C)]
        model: ModelArg,
        #[arg(long, default_value_t = 0.05, value_parser = parse_level)]
        level: f64,
        #[command(flatten)]
        em: EmArgs,
        #[arg(long, value_enum, default_value_t = Output::Text)]
        output: Output,
    },
    /// McNemar's test on the complete cases.
    Mcnemar {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 0.05, value_parser = parse_level)]
        level: f64,
        #[arg(long, value_enum, default_value_t = Output::Text)]
        output: Output,
    },
    /// Monte Carlo rejection rates for a scenario grid.
    Simulate {
        /// Scenario manifest (JSON array or CSV with a header row).
        #[arg(long, conflicts_with = "scenario")]
        input: Option<PathBuf>,
        /// Built-in scenario grid instead of a manifest.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        scenario: Option<u8>,
        /// Only the rows with this sample size.
        #[arg(long)]
        n: Option<u64>,
        /// Replications per scenario (overrides the manifest).
        #[arg(long)]
        reps: Option<usize>,
        /// Master seed (overrides the manifest).
        #[arg(long)]
        seed: Option<u64>,
        /// Significance level (overrides the manifest).
        #[arg(long, value_parser = parse_level)]
        level: Option<f64>,
        #[command(flatten)]
        em: EmArgs,
        #[arg(long, value_enum, default_value_t = Output::Text)]
        output: Output,
    },
    /// Re-run the crime-survey analysis and the published simulation tables.
    Reproduce {
        /// Replications per scenario; 0 skips the simulation.
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Only this scenario grid.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        scenario: Option<u8>,
        /// Only the rows with this sample size.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, value_enum, default_value_t = Output::Text)]
        output: Output,
    },
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Table file, or `-` for standard input.
    #[arg(long)]
    input: PathBuf,
    /// Table format; inferred from the file extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args, Debug)]
struct EmArgs {
    /// Iteration cap for each EM run.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Convergence tolerance on the relative log-likelihood change.
    #[arg(long)]
    tol: Option<f64>,
    /// Also start EM from a grid of scaled odds and keep the best fit.
    #[arg(long)]
    multi_start: bool,
}

impl EmArgs {
    fn config(&self, base: FitConfig) -> anyhow::Result<FitConfig> {
        let mut cfg = base;
        if let Some(m) = self.max_iter {
            if m == 0 {
                return Err(anyhow!("--max-iter must be at least 1"));
            }
            cfg.max_iterations = m;
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(anyhow!("--tol must be positive"));
            }
            cfg.tolerance = t;
        }
        if self.multi_start {
            cfg.init = InitStrategy::MultiStart;
        }
        Ok(cfg)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModelArg {
    A,
    B,
    C,
}

impl From<ModelArg> for ModelId {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::A => ModelId::A,
            ModelArg::B => ModelId::B,
            ModelArg::C => ModelId::C,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Output {
    Text,
    Json,
    Csv,
}

fn parse_level(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("significance level {v} must lie in (0, 1)"))
    }
}

/// An error tagged with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait Tag<T> {
    fn input_error(self) -> Result<T, Failure>;
    fn numerical(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Tag<T> for Result<T, E> {
    fn input_error(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: 1,
            error: e.into(),
        })
    }
    fn numerical(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: 2,
            error: e.into(),
        })
    }
}

fn read_source(path: &Path) -> anyhow::Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .context("reading standard input")?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn load_table(args: &InputArgs) -> anyhow::Result<ObservedTable> {
    let format = match args.format {
        Some(FormatArg::Csv) => TableFormat::Csv,
        Some(FormatArg::Json) => TableFormat::Json,
        None => TableFormat::from_path(&args.input),
    };
    let source = read_source(&args.input)?;
    ObservedTable::parse(&source, format).with_context(|| format!("parsing {}", args.input.display()))
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Fit {
            input,
            model,
            symmetric,
            level,
            em,
            output,
        } => {
            let table = load_table(&input).input_error()?;
            let cfg = em.config(FitConfig::default()).input_error()?;
            let model = ModelId::from(model);
            let h = if symmetric {
                Hypothesis::Symmetric(model)
            } else {
                Hypothesis::Model(model)
            };
            let result = fit(h, &table, &cfg).numerical()?;
            match output {
                Output::Json => println!("{}", to_json(&result)),
                Output::Csv => print!("{}", render::fit_csv(&table, &result)),
                Output::Text => print!("{}", render::fit_text(&table, &result, level)),
            }
            if !result.converged {
                return Err(Failure {
                    code: 2,
                    error: anyhow!("{h} did not converge: {:?}", result.status),
                });
            }
        }
        Command::Test {
            input,
            model,
            level,
            em,
            output,
        } => {
            let table = load_table(&input).input_error()?;
            let cfg = em.config(FitConfig::default()).input_error()?;
            let (sym, free) = fit_nested(model.into(), &table, &cfg).numerical()?;
            for f in [&sym, &free] {
                if !f.converged {
                    return Err(Failure {
                        code: 2,
                        error: anyhow!("{} did not converge: {:?}", f.hypothesis, f.status),
                    });
                }
            }
            let sym_report = fit_test(&sym, level).numerical()?;
            let free_report = fit_test(&free, level).numerical()?;
            let cond = conditional_test(&sym, &free, level).numerical()?;
            match output {
                Output::Json => println!(
                    "{}",
                    to_json(&serde_json::json!({
                        "symmetric": sym_report,
                        "model": free_report,
                        "conditional": cond,
                    }))
                ),
                Output::Csv => print!("{}", render::tests_csv(&[&sym_report, &free_report, &cond])),
                Output::Text => print!("{}", render::test_text(&sym_report, &free_report, &cond)),
            }
        }
        Command::Mcnemar { input, level, output } => {
            let table = load_table(&input).input_error()?;
            let report = mcnemar(&table, level).numerical()?;
            match output {
                Output::Json => println!("{}", to_json(&report)),
                Output::Csv => print!("{}", render::tests_csv(&[&report])),
                Output::Text => println!("{report}"),
            }
        }
        Command::Simulate {
            input,
            scenario,
            n,
            reps,
            seed,
            level,
            em,
            output,
        } => {
            let mut grid = match (&input, scenario) {
                (Some(path), _) => {
                    let source = read_source(path).input_error()?;
                    simulate::parse_manifest(&source).input_error()?
                }
                (None, Some(s)) => simulate::scenario_grid(s, reps.unwrap_or(2000), seed.unwrap_or(DEFAULT_SEED)),
                (None, None) => {
                    return Err(anyhow!("either --input <manifest> or --scenario <1|2> is required")).input_error()
                }
            };
            for spec in &mut grid {
                if let Some(r) = reps {
                    spec.reps = r;
                }
                if let Some(s) = seed {
                    spec.seed = s;
                }
                if let Some(l) = level {
                    spec.alpha_level = l;
                }
            }
            if let Some(n) = n {
                grid.retain(|s| s.n == n);
            }
            if grid.is_empty() {
                return Err(anyhow!("no scenarios selected")).input_error();
            }
            let cfg = em.config(FitConfig::for_study()).input_error()?;
            let rows = simulate::run_study(&grid, &TestSelection::default(), &cfg).map_err(|e| {
                let code = if matches!(e, nisym::SimulationError::TooManyFailures { .. }) {
                    2
                } else {
                    1
                };
                Failure { code, error: e.into() }
            })?;
            match output {
                Output::Json => println!("{}", to_json(&rows)),
                Output::Csv => print!("{}", simulate::rows_to_csv(&rows)),
                Output::Text => print!("{}", simulate::rows_to_text(&rows, grid[0].varies)),
            }
        }
        Command::Reproduce {
            reps,
            seed,
            scenario,
            n,
            output,
        } => {
            let report = reproduce(reps, seed, scenario, n)?;
            match output {
                Output::Json => println!("{}", to_json(&report)),
                Output::Csv => print!("{}", render::reproduce_csv(&report)),
                Output::Text => print!("{}", render::reproduce_text(&report)),
            }
        }
    }
    Ok(())
}

fn reproduce(reps: usize, seed: u64, scenario: Option<u8>, n: Option<u64>) -> Result<render::Reproduction, Failure> {
    let table = fixtures::crime_table();
    let cfg = FitConfig::default();
    let mc = mcnemar(&table, 0.05).numerical()?;
    let mut g2 = Vec::new();
    for m in ModelId::ALL {
        g2.push(fit(Hypothesis::Model(m), &table, &cfg).numerical()?.g_squared);
    }
    let (sym, free) = fit_nested(ModelId::C, &table, &cfg).numerical()?;
    let cond = conditional_test(&sym, &free, 0.05).numerical()?;
    let analysis = vec![
        render::Comparison::new("McNemar z0^2", fixtures::crime::MCNEMAR, mc.statistic),
        render::Comparison::new("G2(a)", fixtures::crime::G2_A, g2[0]),
        render::Comparison::new("G2(b)", fixtures::crime::G2_B, g2[1]),
        render::Comparison::new("G2(c)", fixtures::crime::G2_C, g2[2]),
        render::Comparison::new("G2(S^c)", fixtures::crime::G2_SYM_C, sym.g_squared),
        render::Comparison::new("G2(S|c)", fixtures::crime::G2_CONDITIONAL, cond.statistic),
    ];
    let estimates = render::estimates(&sym.params);

    let mut blocks = Vec::new();
    if reps > 0 {
        let grid = published_grid(reps, seed);
        let cfg = FitConfig::for_study();
        for s in [1u8, 2] {
            if scenario.is_some_and(|want| want != s) {
                continue;
            }
            let published = fixtures::published(s).expect("scenario exists");
            let mut rows = Vec::new();
            for &(pn, v, rates) in published.iter() {
                if n.is_some_and(|want| want != pn) {
                    continue;
                }
                let idx = published_index(s, pn, v).expect("published cell");
                let row =
                    simulate::run_scenario(idx, &grid[idx as usize], &TestSelection::default(), &cfg).numerical()?;
                rows.push(render::SimulatedRow {
                    published: rates,
                    computed: row,
                });
            }
            if rows.is_empty() {
                return Err(anyhow!("no published rows with n = {}", n.unwrap_or_default())).input_error();
            }
            blocks.push(render::ScenarioBlock { scenario: s, rows });
        }
    }
    Ok(render::Reproduction {
        analysis,
        estimates,
        reps,
        seed,
        reduced_precision: reps > 0 && reps < 2000,
        scenarios: blocks,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
