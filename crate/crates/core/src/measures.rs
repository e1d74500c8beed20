//! Bernoulli and finite-memory Markov measures on the full shift: entropy,
//! finite-depth Lyapunov vectors, Bowen's inequality at finite depth, and a
//! lower bound for the variational principle by optimizing over a family.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pressure::pressure;
use crate::shift::{fold_log_spectra, EnumConfig, OneStepCocycle};

/// Product measure given by a probability vector on the symbols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliMeasure {
    p: Vec<f64>,
}

fn check_probability_vector(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Input(format!("{what} is empty")));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Input(format!("{what} has negative or non-finite entries")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::Input(format!("{what} sums to {sum}, expected 1")));
    }
    Ok(())
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

impl BernoulliMeasure {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        check_probability_vector(&p, "probability vector")?;
        Ok(Self { p })
    }

    pub fn uniform(k: usize) -> Self {
        Self { p: vec![1.0 / k as f64; k] }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn alphabet(&self) -> usize {
        self.p.len()
    }

    pub fn entropy(&self) -> f64 {
        -self.p.iter().map(|&p| plogp(p)).sum::<f64>()
    }

    fn log_cylinder(&self, word: &[usize]) -> f64 {
        word.iter().map(|&s| self.p[s].ln()).sum()
    }
}

/// Stationary Markov measure with memory `m`: the next symbol depends on
/// the previous `m` symbols. States are length-`m` words encoded in base `k`
/// with the oldest symbol most significant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovMeasure {
    k: usize,
    memory: usize,
    /// Row-major `k^m × k`: probability of the next symbol given the state.
    transition: Vec<f64>,
    stationary: Vec<f64>,
}

impl MarkovMeasure {
    /// `rows[s][j]` is the probability of symbol `j` after state `s`.
    pub fn new(k: usize, memory: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if k == 0 || memory == 0 {
            return Err(Error::Input("Markov measure needs k ≥ 1 and memory ≥ 1".into()));
        }
        let states = k
            .checked_pow(memory as u32)
            .filter(|&s| s <= 1 << 16)
            .ok_or_else(|| Error::Input("too many Markov states".into()))?;
        if rows.len() != states {
            return Err(Error::Input(format!(
                "expected {states} transition rows, got {}",
                rows.len()
            )));
        }
        let mut transition = Vec::with_capacity(states * k);
        for (s, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Input(format!("transition row {} has wrong length", s + 1)));
            }
            check_probability_vector(row, &format!("transition row {}", s + 1))?;
            transition.extend_from_slice(row);
        }
        let stationary = stationary_distribution(k, states, &transition)?;
        Ok(Self {
            k,
            memory,
            transition,
            stationary,
        })
    }

    /// Memory-one chain with the given `k × k` transition matrix.
    pub fn first_order(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows.len(), 1, rows)
    }

    pub fn alphabet(&self) -> usize {
        self.k
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn transition_rows(&self) -> Vec<Vec<f64>> {
        self.transition.chunks(self.k).map(<[f64]>::to_vec).collect()
    }

    fn states(&self) -> usize {
        self.stationary.len()
    }

    #[inline]
    fn prob(&self, state: usize, next: usize) -> f64 {
        self.transition[state * self.k + next]
    }

    pub fn entropy(&self) -> f64 {
        -(0..self.states())
            .map(|s| {
                self.stationary[s] * (0..self.k).map(|j| plogp(self.prob(s, j))).sum::<f64>()
            })
            .sum::<f64>()
    }

    fn log_cylinder(&self, word: &[usize]) -> f64 {
        let m = self.memory;
        let n = word.len();
        if n < m {
            let span = self.k.pow((m - n) as u32);
            let head = word.iter().fold(0, |acc, &s| acc * self.k + s);
            let mass: f64 = self.stationary[head * span..(head + 1) * span].iter().sum();
            return mass.ln();
        }
        let states = self.states();
        let mut state = word[..m].iter().fold(0, |acc, &s| acc * self.k + s);
        let mut log = self.stationary[state].ln();
        for &s in &word[m..] {
            log += self.prob(state, s).ln();
            state = (state * self.k + s) % states;
        }
        log
    }
}

/// Solves `π P = π`, `Σ π = 1` for the chain on length-`m` states.
fn stationary_distribution(k: usize, states: usize, transition: &[f64]) -> Result<Vec<f64>> {
    let mut chain = DMatrix::<f64>::zeros(states, states);
    for s in 0..states {
        for j in 0..k {
            chain[(s, (s * k + j) % states)] += transition[s * k + j];
        }
    }
    let mut system = chain.transpose() - DMatrix::<f64>::identity(states, states);
    for c in 0..states {
        system[(states - 1, c)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(states);
    rhs[states - 1] = 1.0;
    let solved = system.lu().solve(&rhs).map(|v| v.iter().copied().collect::<Vec<f64>>());
    let candidate = match solved {
        Some(pi) if pi.iter().all(|v| v.is_finite() && *v >= -1e-12) => pi,
        // reducible chain: Cesàro average of the uniform start
        _ => {
            let mut pi = vec![1.0 / states as f64; states];
            let mut avg = vec![0.0; states];
            let iters = 20_000;
            for _ in 0..iters {
                let mut next = vec![0.0; states];
                for s in 0..states {
                    for t in 0..states {
                        next[t] += pi[s] * chain[(s, t)];
                    }
                }
                pi = next;
                for (a, p) in avg.iter_mut().zip(&pi) {
                    *a += p / iters as f64;
                }
            }
            avg
        }
    };
    let mut pi: Vec<f64> = candidate.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    for v in &mut pi {
        *v /= total;
    }
    let residual = (0..states)
        .map(|t| ((0..states).map(|s| pi[s] * chain[(s, t)]).sum::<f64>() - pi[t]).abs())
        .fold(0.0, f64::max);
    if residual > 1e-10 {
        return Err(Error::Numeric(format!(
            "stationary vector residual {residual:e} exceeds 1e-10"
        )));
    }
    Ok(pi)
}

/// A shift-invariant measure from one of the supported families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Measure {
    Bernoulli(BernoulliMeasure),
    Markov(MarkovMeasure),
}

impl Measure {
    pub fn alphabet(&self) -> usize {
        match self {
            Measure::Bernoulli(b) => b.alphabet(),
            Measure::Markov(m) => m.alphabet(),
        }
    }

    /// `log μ[I]` of the cylinder fixed by `word` in coordinates `0..n`.
    pub fn log_cylinder(&self, word: &[usize]) -> f64 {
        match self {
            Measure::Bernoulli(b) => b.log_cylinder(word),
            Measure::Markov(m) => m.log_cylinder(word),
        }
    }
}

impl From<BernoulliMeasure> for Measure {
    fn from(b: BernoulliMeasure) -> Self {
        Measure::Bernoulli(b)
    }
}

impl From<MarkovMeasure> for Measure {
    fn from(m: MarkovMeasure) -> Self {
        Measure::Markov(m)
    }
}

/// Measure-theoretic entropy `h_μ(T)`.
pub fn entropy(mu: &Measure) -> f64 {
    match mu {
        Measure::Bernoulli(b) => b.entropy(),
        Measure::Markov(m) => m.entropy(),
    }
}

/// A vector of exponents `α_1 ≥ … ≥ α_d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExponentVector(Vec<f64>);

impl ExponentVector {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("exponent vector must be nonempty and finite".into()));
        }
        if alpha.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Input("exponent vector must be sorted nonincreasing".into()));
        }
        Ok(Self(alpha))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for ExponentVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn check_alphabet(cocycle: &OneStepCocycle, mu: &Measure) -> Result<()> {
    if mu.alphabet() != cocycle.k() {
        return Err(Error::Input(format!(
            "measure is on {} symbols, cocycle has {}",
            mu.alphabet(),
            cocycle.k()
        )));
    }
    Ok(())
}

/// `(1/n) Σ_I μ[I] log σ(A_I)` over all words of length `n`.
pub fn lyapunov_vector(
    cocycle: &OneStepCocycle,
    mu: &Measure,
    n: usize,
    cfg: &EnumConfig,
) -> Result<ExponentVector> {
    check_alphabet(cocycle, mu)?;
    if n == 0 {
        return Err(Error::Input("depth must be at least 1".into()));
    }
    let d = cocycle.dim();
    let sum = fold_log_spectra(
        cocycle,
        n,
        cfg,
        || vec![0.0; d],
        |acc, w, ls| {
            let weight = mu.log_cylinder(w).exp();
            if weight > 0.0 {
                for (a, l) in acc.iter_mut().zip(ls) {
                    *a += weight * l;
                }
            }
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                *x += y;
            }
            a
        },
    )?;
    let mut alpha: Vec<f64> = sum.iter().map(|v| v / n as f64).collect();
    alpha.sort_by(|a, b| b.total_cmp(a));
    ExponentVector::new(alpha)
}

/// Both sides of Bowen's inequality at depth `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowenCheck {
    /// `(1/n) Σ_I μ[I] (−log μ[I] + log ψ^q(A_I))`.
    pub lhs: f64,
    /// `P_n(q)`.
    pub rhs: f64,
}

impl BowenCheck {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

pub fn bowen_check(
    cocycle: &OneStepCocycle,
    mu: &Measure,
    q: &[f64],
    n: usize,
    cfg: &EnumConfig,
) -> Result<BowenCheck> {
    check_alphabet(cocycle, mu)?;
    let rhs = pressure(cocycle, q, n, cfg)?.value;
    let total = fold_log_spectra(
        cocycle,
        n,
        cfg,
        || 0.0,
        |acc: &mut f64, w, ls| {
            let log_mu = mu.log_cylinder(w);
            if log_mu > f64::NEG_INFINITY {
                let log_psi: f64 = q.iter().zip(ls).map(|(a, b)| if *a == 0.0 { 0.0 } else { a * b }).sum();
                *acc += log_mu.exp() * (log_psi - log_mu);
            }
        },
        |a, b| a + b,
    )?;
    Ok(BowenCheck {
        lhs: total / n as f64,
        rhs,
    })
}

/// Measure family searched by [`variational_crosscheck`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Bernoulli,
    Markov { memory: usize },
}

impl Family {
    pub const MAX_MEMORY: usize = 2;
}

/// Outcome of the family optimization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckResult {
    /// `max h(μ) + ⟨q, χ_n(μ)⟩` found over the family.
    pub best: f64,
    /// `P_n(q)`.
    pub pressure: f64,
    /// `pressure − best`.
    pub gap: f64,
    pub witness: Measure,
    /// Whether the best restart met the stationarity tolerance.
    pub converged: bool,
    pub iterations: usize,
}

/// Optimizer settings; defaults follow the documented behaviour.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AscentOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub seed: u64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iterations: 200,
            gradient_tol: 1e-7,
            seed: 0x5eed,
        }
    }
}

const FLOOR: f64 = 1e-12;

/// Words grouped by a statistic that determines `μ[I]` for every member of
/// the family, with `Σ ⟨q, log σ(A_I)⟩` over each group.
struct Objective {
    k: usize,
    n: usize,
    family: Family,
    groups: Vec<(Vec<u32>, f64)>,
}

impl Objective {
    fn key(family: Family, k: usize, word: &[usize]) -> Vec<u32> {
        match family {
            Family::Bernoulli => {
                let mut counts = vec![0u32; k];
                for &s in word {
                    counts[s] += 1;
                }
                counts
            }
            Family::Markov { memory } => {
                if word.len() < memory {
                    return std::iter::once(u32::MAX)
                        .chain(word.iter().map(|&s| s as u32))
                        .collect();
                }
                let states = k.pow(memory as u32);
                let mut state = word[..memory].iter().fold(0, |acc, &s| acc * k + s);
                let mut key = vec![0u32; 1 + states * k];
                key[0] = state as u32;
                for &s in &word[memory..] {
                    key[1 + state * k + s] += 1;
                    state = (state * k + s) % states;
                }
                key
            }
        }
    }

    fn blocks(&self) -> usize {
        match self.family {
            Family::Bernoulli => 1,
            Family::Markov { memory } => self.k.pow(memory as u32),
        }
    }

    fn measure(&self, theta: &[f64]) -> Result<Measure> {
        Ok(match self.family {
            Family::Bernoulli => Measure::Bernoulli(BernoulliMeasure { p: theta.to_vec() }),
            Family::Markov { memory } => {
                let rows: Vec<Vec<f64>> = theta.chunks(self.k).map(<[f64]>::to_vec).collect();
                let states = rows.len();
                let stationary = stationary_distribution(self.k, states, theta)?;
                Measure::Markov(MarkovMeasure {
                    k: self.k,
                    memory,
                    transition: rows.concat(),
                    stationary,
                })
            }
        })
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        let mu = self.measure(theta)?;
        let logs: Vec<f64> = theta.iter().map(|v| v.ln()).collect();
        let mut drift = 0.0;
        for (key, sum) in &self.groups {
            let log_mu = match (&mu, self.family) {
                (Measure::Bernoulli(_), _) => key
                    .iter()
                    .zip(&logs)
                    .map(|(&c, l)| if c == 0 { 0.0 } else { c as f64 * l })
                    .sum(),
                (Measure::Markov(m), Family::Markov { .. }) if key[0] != u32::MAX => {
                    m.stationary[key[0] as usize].ln()
                        + key[1..]
                            .iter()
                            .zip(&logs)
                            .map(|(&c, l)| if c == 0 { 0.0 } else { c as f64 * l })
                            .sum::<f64>()
                }
                (m, _) => {
                    let word: Vec<usize> = key[1..].iter().map(|&s| s as usize).collect();
                    m.log_cylinder(&word)
                }
            };
            drift += log_mu.exp() * sum;
        }
        Ok(entropy(&mu) + drift / self.n as f64)
    }

    /// Derivatives along `e_i − (1/k)·1` inside each block, i.e. the
    /// gradient projected onto the tangent space of the product of simplices.
    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let k = self.k;
        let mut g = vec![0.0; theta.len()];
        let mut probe = theta.to_vec();
        for b in 0..self.blocks() {
            let block = &theta[b * k..(b + 1) * k];
            let min = block.iter().copied().fold(f64::INFINITY, f64::min);
            let h = (1e-6f64).min(0.5 * min);
            for i in 0..k {
                for sign in [1.0, -1.0] {
                    for j in 0..k {
                        let dir = if i == j { 1.0 - 1.0 / k as f64 } else { -1.0 / k as f64 };
                        probe[b * k + j] = theta[b * k + j] + sign * h * dir;
                    }
                    let v = self.value(&probe)?;
                    g[b * k + i] += sign * v / (2.0 * h);
                }
                probe[b * k..(b + 1) * k].copy_from_slice(block);
            }
        }
        Ok(g)
    }

    fn project(&self, theta: &mut [f64]) {
        for block in theta.chunks_mut(self.k) {
            project_simplex(block, FLOOR);
        }
    }
}

/// Euclidean projection onto `{x : x_i ≥ floor, Σ x_i = 1}`.
fn project_simplex(x: &mut [f64], floor: f64) {
    let k = x.len();
    let mass = 1.0 - floor * k as f64;
    let mut sorted: Vec<f64> = x.iter().map(|v| v - floor).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - mass) / (i + 1) as f64;
        if v - t > 0.0 {
            shift = t;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - floor - shift).max(0.0) + floor;
    }
}

struct Ascent {
    value: f64,
    theta: Vec<f64>,
    converged: bool,
    iterations: usize,
}

fn ascend(obj: &Objective, mut theta: Vec<f64>, opts: &AscentOptions) -> Result<Ascent> {
    obj.project(&mut theta);
    let mut f = obj.value(&theta)?;
    let mut step = 1.0;
    for it in 0..opts.max_iterations {
        let g = obj.gradient(&theta)?;
        loop {
            let mut cand: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t + step * gi).collect();
            obj.project(&mut cand);
            let moved: Vec<f64> = cand.iter().zip(&theta).map(|(c, t)| c - t).collect();
            let mapping = moved.iter().map(|v| v * v).sum::<f64>().sqrt() / step;
            if mapping <= opts.gradient_tol {
                return Ok(Ascent { value: f, theta, converged: true, iterations: it });
            }
            let fc = obj.value(&cand)?;
            let predicted: f64 = g.iter().zip(&moved).map(|(a, b)| a * b).sum();
            if fc >= f + 1e-4 * predicted {
                theta = cand;
                f = fc;
                step = (step * 2.0).min(1e3);
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                return Ok(Ascent { value: f, theta, converged: false, iterations: it });
            }
        }
    }
    Ok(Ascent {
        value: f,
        theta,
        converged: false,
        iterations: opts.max_iterations,
    })
}

fn random_start(rng: &mut ChaCha8Rng, blocks: usize, k: usize) -> Vec<f64> {
    let mut theta = Vec::with_capacity(blocks * k);
    for _ in 0..blocks {
        let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = raw.iter().sum();
        theta.extend(raw.iter().map(|v| v / total));
    }
    theta
}

/// Maximizes `h(μ) + ⟨q, χ_n(μ)⟩` over a measure family by projected
/// gradient ascent from several starts (the first is uniform).
pub fn variational_crosscheck(
    cocycle: &OneStepCocycle,
    q: &[f64],
    n: usize,
    family: Family,
    cfg: &EnumConfig,
) -> Result<CrosscheckResult> {
    variational_crosscheck_with(cocycle, q, n, family, cfg, &AscentOptions::default())
}

pub fn variational_crosscheck_with(
    cocycle: &OneStepCocycle,
    q: &[f64],
    n: usize,
    family: Family,
    cfg: &EnumConfig,
    opts: &AscentOptions,
) -> Result<CrosscheckResult> {
    if let Family::Markov { memory } = family {
        if memory == 0 || memory > Family::MAX_MEMORY {
            return Err(Error::Input(format!(
                "Markov memory must be in 1..={}",
                Family::MAX_MEMORY
            )));
        }
    }
    let p = pressure(cocycle, q, n, cfg)?.value;
    let k = cocycle.k();
    let groups = fold_log_spectra(
        cocycle,
        n,
        cfg,
        BTreeMap::<Vec<u32>, f64>::new,
        |acc, w, ls| {
            let x: f64 = q.iter().zip(ls).map(|(a, b)| if *a == 0.0 { 0.0 } else { a * b }).sum();
            *acc.entry(Objective::key(family, k, w)).or_insert(0.0) += x;
        },
        |mut a, b| {
            for (key, v) in b {
                *a.entry(key).or_insert(0.0) += v;
            }
            a
        },
    )?;
    let obj = Objective {
        k,
        n,
        family,
        groups: groups.into_iter().collect(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let blocks = obj.blocks();
    let starts: Vec<Vec<f64>> = (0..opts.restarts.max(1))
        .map(|i| {
            if i == 0 {
                vec![1.0 / k as f64; blocks * k]
            } else {
                random_start(&mut rng, blocks, k)
            }
        })
        .collect();
    let runs = cfg.install(|| {
        starts
            .into_par_iter()
            .map(|s| ascend(&obj, s, opts))
            .collect::<Result<Vec<_>>>()
    })??;
    let best = runs
        .into_iter()
        .reduce(|a, b| {
            let better = b.value > a.value
                || (b.value == a.value
                    && b.theta.iter().zip(&a.theta).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y));
            if better {
                b
            } else {
                a
            }
        })
        .expect("at least one restart");
    Ok(CrosscheckResult {
        best: best.value,
        pressure: p,
        gap: p - best.value,
        witness: obj.measure(&best.theta)?,
        converged: best.converged,
        iterations: best.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn scalar_pair() -> OneStepCocycle {
        OneStepCocycle::new(vec![Matrix::diag(&[2.0]), Matrix::diag(&[0.5])]).unwrap()
    }

    fn diag_pair() -> OneStepCocycle {
        OneStepCocycle::new(vec![Matrix::diag(&[4.0, 1.0]), Matrix::diag(&[1.0, 4.0])]).unwrap()
    }

    fn binom(n: usize, j: usize) -> f64 {
        (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn entropy_examples() {
        let h = |p: Vec<f64>| entropy(&BernoulliMeasure::new(p).unwrap().into());
        assert!((h(vec![0.5, 0.5]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(h(vec![1.0, 0.0]), 0.0);
        let expect = -0.3 * 0.3f64.ln() - 0.7 * 0.7f64.ln();
        assert!((h(vec![0.3, 0.7]) - expect).abs() < 1e-15);
        assert!((h(vec![0.3, 0.7]) - 0.610864).abs() < 1e-6);
    }

    #[test]
    fn markov_entropy_and_stationarity() {
        let m = MarkovMeasure::first_order(&[vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap();
        let pi = m.stationary();
        assert!((pi[0] - 0.75).abs() < 1e-12 && (pi[1] - 0.25).abs() < 1e-12);
        let h2 = |p: f64| -plogp(p) - plogp(1.0 - p);
        assert!((m.entropy() - (0.75 * h2(0.9) + 0.25 * h2(0.3))).abs() < 1e-12);
        // cylinders of each length sum to one
        for n in 1..5 {
            let total: f64 = (0..1usize << n)
                .map(|bits| {
                    let w: Vec<usize> = (0..n).map(|i| (bits >> (n - 1 - i)) & 1).collect();
                    m.log_cylinder(&w).exp()
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn memory_two_cylinders_are_consistent() {
        let rows = vec![vec![0.2, 0.8], vec![0.6, 0.4], vec![0.5, 0.5], vec![0.9, 0.1]];
        let m = MarkovMeasure::new(2, 2, &rows).unwrap();
        for n in 1..6 {
            let total: f64 = (0..1usize << n)
                .map(|bits| {
                    let w: Vec<usize> = (0..n).map(|i| (bits >> (n - 1 - i)) & 1).collect();
                    m.log_cylinder(&w).exp()
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        // shift invariance: μ[a] = μ[·a]
        let a = m.log_cylinder(&[1]).exp();
        let b = m.log_cylinder(&[0, 1]).exp() + m.log_cylinder(&[1, 1]).exp();
        assert!((a - b).abs() < 1e-12);
        assert!(m.entropy() <= 2f64.ln());
    }

    #[test]
    fn invalid_measures_rejected() {
        assert!(BernoulliMeasure::new(vec![0.5, 0.6]).is_err());
        assert!(BernoulliMeasure::new(vec![1.5, -0.5]).is_err());
        assert!(MarkovMeasure::first_order(&[vec![0.5, 0.5], vec![1.0]]).is_err());
        assert!(MarkovMeasure::new(2, 1, &[vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn reducible_chain_still_has_stationary_vector() {
        let m = MarkovMeasure::first_order(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let total: f64 = m.stationary().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_examples() {
        let cfg = EnumConfig::default();
        let single = OneStepCocycle::new(vec![Matrix::diag(&[2.0, 0.5])]).unwrap();
        let mu = BernoulliMeasure::new(vec![1.0]).unwrap().into();
        for n in [1, 5] {
            let a = lyapunov_vector(&single, &mu, n, &cfg).unwrap();
            assert!((a[0] - 2f64.ln()).abs() < 1e-14 && (a[1] + 2f64.ln()).abs() < 1e-14);
        }

        let c = diag_pair();
        let mu: Measure = BernoulliMeasure::uniform(2).into();
        let n = 10;
        let expect_max: f64 = (0..=n)
            .map(|j| binom(n, j) * j.max(n - j) as f64)
            .sum::<f64>()
            / 2f64.powi(n as i32);
        let a = lyapunov_vector(&c, &mu, n, &cfg).unwrap();
        let log4 = 4f64.ln();
        assert!((a[0] - log4 * expect_max / n as f64).abs() < 1e-12);
        assert!((a[0] - 0.863726).abs() < 1e-6);
        assert!((a[1] - 0.522568).abs() < 1e-6);
        assert!((a[0] + a[1] - log4).abs() < 1e-10);

        // approach to log 2 as depth grows
        let mut prev = a[0] - 2f64.ln();
        for n in [12, 14, 16] {
            let a = lyapunov_vector(&c, &mu, n, &cfg).unwrap();
            let gap = a[0] - 2f64.ln();
            assert!(gap > 0.0 && gap < prev);
            prev = gap;
        }
    }

    #[test]
    fn bowen_examples() {
        let cfg = EnumConfig::default();
        let c = diag_pair();
        let b = bowen_check(&c, &BernoulliMeasure::uniform(2).into(), &[0.0, 0.0], 6, &cfg).unwrap();
        assert!((b.lhs - 2f64.ln()).abs() < 1e-12 && (b.rhs - 2f64.ln()).abs() < 1e-12);

        // scalar cocycle: direct 64-term evaluation and the KL identity
        let s = scalar_pair();
        let p = [0.7, 0.3];
        let mu: Measure = BernoulliMeasure::new(p.to_vec()).unwrap().into();
        let b = bowen_check(&s, &mu, &[1.0], 6, &cfg).unwrap();
        let (mut lhs, mut z) = (0.0, 0.0);
        let mut kl_terms = Vec::new();
        for bits in 0..64u32 {
            let ones = bits.count_ones() as i32;
            let m = p[0].powi(6 - ones) * p[1].powi(ones);
            let c = (6 - 2 * ones) as f64 * 2f64.ln();
            lhs += m * (c - m.ln());
            z += c.exp();
            kl_terms.push((m, c));
        }
        let kl: f64 = kl_terms.iter().map(|(m, c)| m * (m.ln() - (c - z.ln()))).sum();
        assert!((b.lhs - lhs / 6.0).abs() < 1e-12);
        assert!(b.lhs < b.rhs);
        assert!((b.slack() - kl / 6.0).abs() < 1e-12);

        // one-step Gibbs measure: both generators have top singular value 4
        let gibbs = BernoulliMeasure::uniform(2).into();
        let b = bowen_check(&c, &gibbs, &[1.0, 0.0], 1, &cfg).unwrap();
        assert!((b.lhs - b.rhs).abs() < 1e-12);
    }

    #[test]
    fn crosscheck_identity_is_entropy_only() {
        let c = OneStepCocycle::new(vec![Matrix::identity(2); 3]).unwrap();
        let r = variational_crosscheck(&c, &[1.5, -0.5], 4, Family::Bernoulli, &EnumConfig::default())
            .unwrap();
        assert!((r.best - 3f64.ln()).abs() < 1e-12);
        assert!((r.pressure - 3f64.ln()).abs() < 1e-12);
        let Measure::Bernoulli(b) = &r.witness else { panic!() };
        assert!(b.probabilities().iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-9));
        assert!(r.converged);
    }

    #[test]
    fn crosscheck_scalar_recovers_gibbs_measure() {
        let r = variational_crosscheck(&scalar_pair(), &[1.0], 12, Family::Bernoulli, &EnumConfig::default())
            .unwrap();
        assert!((r.pressure - 2.5f64.ln()).abs() < 1e-12);
        assert!(r.best <= r.pressure + 1e-8);
        assert!((r.best - r.pressure).abs() < 1e-6);
        let Measure::Bernoulli(b) = &r.witness else { panic!() };
        assert!((b.probabilities()[0] - 0.8).abs() < 1e-3);
    }

    #[test]
    fn crosscheck_diagonal_pair_has_gap() {
        let cfg = EnumConfig::default();
        let c = diag_pair();
        let bern = variational_crosscheck(&c, &[1.0, 0.0], 12, Family::Bernoulli, &cfg).unwrap();
        assert!(bern.best <= bern.pressure + 1e-8);
        assert!(bern.gap > 1e-3);
        let markov = variational_crosscheck(&c, &[1.0, 0.0], 12, Family::Markov { memory: 1 }, &cfg).unwrap();
        assert!(markov.best <= markov.pressure + 1e-8);
        assert!(markov.best >= bern.best - 1e-6);
    }

    #[test]
    fn crosscheck_markov_memory_two_runs() {
        let c = OneStepCocycle::new(vec![
            Matrix::diag(&[2.0, 0.5]),
            Matrix::from_rows(&[[1.0, 1.0], [-1.0, 1.0]]).unwrap(),
        ])
        .unwrap();
        let r = variational_crosscheck(&c, &[0.5, -0.5], 6, Family::Markov { memory: 2 }, &EnumConfig::default())
            .unwrap();
        assert!(r.best <= r.pressure + 1e-8);
        assert!(variational_crosscheck(&c, &[0.5, -0.5], 6, Family::Markov { memory: 3 }, &EnumConfig::default())
            .is_err());
    }

    #[test]
    fn simplex_projection() {
        let mut x = vec![0.7, 0.7, -0.2];
        project_simplex(&mut x, 0.0);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((x[0] - 0.5).abs() < 1e-15 && x[2] == 0.0);
        let mut y = vec![1.0, 0.0];
        project_simplex(&mut y, FLOOR);
        assert!(y[1] >= FLOOR);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn cocycle() -> OneStepCocycle {
            OneStepCocycle::new(vec![
                Matrix::from_rows(&[[2.0, 1.0], [0.0, 0.5]]).unwrap(),
                Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.3]]).unwrap(),
            ])
            .unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn bowen_inequality_holds(
                p in 0.0f64..1.0,
                q in proptest::collection::vec(-3.0f64..3.0, 2),
                n in 1usize..7,
            ) {
                let mu = BernoulliMeasure::new(vec![p, 1.0 - p]).unwrap().into();
                let b = bowen_check(&cocycle(), &mu, &q, n, &EnumConfig::default()).unwrap();
                prop_assert!(b.lhs <= b.rhs + 1e-10);
            }

            #[test]
            fn entropy_bounded_by_log_k(a in 0.01f64..0.99, b in 0.01f64..0.99) {
                let m = MarkovMeasure::first_order(&[vec![a, 1.0 - a], vec![b, 1.0 - b]]).unwrap();
                prop_assert!(m.entropy() <= 2f64.ln() + 1e-12);
            }

            #[test]
            fn lyapunov_sorted_and_conserves_det(p in 0.0f64..1.0, n in 1usize..7) {
                let c = cocycle();
                let mu: Measure = BernoulliMeasure::new(vec![p, 1.0 - p]).unwrap().into();
                let a = lyapunov_vector(&c, &mu, n, &EnumConfig::default()).unwrap();
                prop_assert!(a[0] >= a[1]);
                let mean_det = (p * c.log_abs_det(0) + (1.0 - p) * c.log_abs_det(1)) * n as f64;
                prop_assert!((a[0] + a[1] - mean_det / n as f64).abs() < 1e-10);
            }
        }
    }
}
