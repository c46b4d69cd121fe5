//! Independent maximum-likelihood oracle.
//!
//! The observed-cell probabilities are written out by hand for each model and
//! the likelihood is maximized by Nelder-Mead over an unconstrained
//! reparameterization: softmax logits for the joint distribution of
//! `(Y1, Y2)` (with the two discordant logits tied under symmetry) and
//! log-odds for the missingness parameters. Normalization and symmetry hold
//! by construction, so no Lagrange multipliers are involved.

#![allow(dead_code)]

use argmin::core::{CostFunction, Error, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nisym::{Hypothesis, ModelId, ModelParams, ObservedTable, Odds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn odds_count(model: ModelId) -> usize {
    match model {
        ModelId::A => 3,
        ModelId::B | ModelId::C => 4,
    }
}

fn logit_count(symmetric: bool) -> usize {
    if symmetric {
        2
    } else {
        3
    }
}

pub fn dimension(h: Hypothesis) -> usize {
    logit_count(h.is_symmetric()) + odds_count(h.model())
}

/// Observed-cell probabilities from marginal probabilities `m` (row-major)
/// and the model's odds.
pub fn observed_probabilities(model: ModelId, m: [f64; 4], o: &[f64]) -> [f64; 9] {
    // Weights of the patterns (Y2 missing, Y1 missing, both) for cell (i, j).
    let w = |i: usize, j: usize| -> (f64, f64, f64) {
        match model {
            ModelId::A => (o[1 + j], o[0], o[0] * o[1 + j]),
            ModelId::B => (o[2 + j], o[i], o[i] * o[2 + j]),
            ModelId::C => (o[2], o[i], o[i] * o[3]),
        }
    };
    let mut pi = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let (a, b, c) = w(i, j);
            pi[i][j] = m[2 * i + j] / (1.0 + a + b + c);
        }
    }
    let mut p = [0.0; 9];
    p[0] = pi[0][0];
    p[1] = pi[0][1];
    p[2] = pi[1][0];
    p[3] = pi[1][1];
    for i in 0..2 {
        for j in 0..2 {
            let (a, b, c) = w(i, j);
            p[4 + i] += pi[i][j] * a;
            p[6 + j] += pi[i][j] * b;
            p[8] += pi[i][j] * c;
        }
    }
    p
}

fn marginals(x: &[f64], symmetric: bool) -> [f64; 4] {
    let logits = if symmetric {
        [x[0], x[1], x[1], 0.0]
    } else {
        [x[0], x[1], x[2], 0.0]
    };
    let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|l| (l - top).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

pub fn log_likelihood_at(h: Hypothesis, table: &ObservedTable, x: &[f64]) -> f64 {
    let k = logit_count(h.is_symmetric());
    let m = marginals(x, h.is_symmetric());
    let odds: Vec<f64> = x[k..].iter().map(|v| v.exp()).collect();
    let p = observed_probabilities(h.model(), m, &odds);
    table
        .counts()
        .iter()
        .zip(p)
        .map(|(&n, p)| if n == 0 { 0.0 } else { n as f64 * p.ln() })
        .sum()
}

/// Maps library parameters into the oracle's coordinates.
pub fn to_oracle(h: Hypothesis, params: &ModelParams) -> Vec<f64> {
    let m = params.marginal_table();
    let m = [m[0][0], m[0][1], m[1][0], m[1][1]];
    let mut x = if h.is_symmetric() {
        let off = 0.5 * (m[1] + m[2]);
        vec![(m[0] / m[3]).ln(), (off / m[3]).ln()]
    } else {
        vec![(m[0] / m[3]).ln(), (m[1] / m[3]).ln(), (m[2] / m[3]).ln()]
    };
    x.extend(params.odds.values().iter().map(|v| v.max(1e-300).ln()));
    x
}

/// Maps oracle coordinates back into library parameters.
pub fn from_oracle(h: Hypothesis, x: &[f64]) -> ModelParams {
    let k = logit_count(h.is_symmetric());
    let m = marginals(x, h.is_symmetric());
    let odds_v: Vec<f64> = x[k..].iter().map(|v| v.exp()).collect();
    let odds = Odds::from_values(h.model(), &odds_v);
    let f = odds.marginal_factors();
    let pi00 = [m[0] / f[0][0], m[1] / f[0][1], m[2] / f[1][0], m[3] / f[1][1]];
    ModelParams::new(pi00, odds)
}

struct Negated<'a> {
    h: Hypothesis,
    table: &'a ObservedTable,
}

impl CostFunction for Negated<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> Result<f64, Error> {
        // Keep the simplex out of regions where exp under/overflows.
        if x.iter().any(|v| !v.is_finite() || v.abs() > 60.0) {
            return Ok(f64::INFINITY);
        }
        let ll = log_likelihood_at(self.h, self.table, x);
        Ok(if ll.is_finite() { -ll } else { f64::INFINITY })
    }
}

fn nelder_mead(h: Hypothesis, table: &ObservedTable, start: &[f64], step: f64) -> (Vec<f64>, f64) {
    let mut simplex = vec![start.to_vec()];
    for k in 0..start.len() {
        let mut v = start.to_vec();
        v[k] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-13)
        .expect("valid tolerance");
    let res = Executor::new(Negated { h, table }, solver)
        .configure(|s| s.max_iters(20_000))
        .run()
        .expect("nelder-mead runs");
    let state = res.state();
    let best = state.get_best_param().expect("best point").clone();
    (best, -state.get_best_cost())
}

/// Maximized log-likelihood and its argument, from `starts` random starting
/// points plus any `extra` points, each polished by repeated restarts.
pub fn maximize(h: Hypothesis, table: &ObservedTable, starts: usize, seed: u64, extra: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = dimension(h);
    let mut points: Vec<Vec<f64>> = extra.to_vec();
    for _ in 0..starts {
        points.push((0..dim).map(|_| rng.random_range(-2.5..1.5)).collect());
    }
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for p in points {
        let (mut x, mut ll) = nelder_mead(h, table, &p, 0.5);
        for _ in 0..50 {
            let (x2, ll2) = nelder_mead(h, table, &x, 0.05);
            let gain = ll2 - ll;
            if ll2 > ll {
                x = x2;
                ll = ll2;
            }
            if gain < 1e-11 {
                break;
            }
        }
        if ll > best.1 {
            best = (x, ll);
        }
    }
    best
}

/// Random table with every cell in `lo..=hi`.
pub fn random_table(rng: &mut impl Rng, lo: u64, hi: u64) -> ObservedTable {
    let counts: [u64; 9] = std::array::from_fn(|_| rng.random_range(lo..=hi));
    ObservedTable::from_counts(counts).expect("positive counts")
}
