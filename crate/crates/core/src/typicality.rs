//! Pinching and twisting conditions along a homoclinic orbit, and
//! domination of a singular-value gap.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{combinations, singular_values, Matrix, ScaledMatrix};
use crate::shift::{fold_log_spectra, EnumConfig, OneStepCocycle, Word};

/// Largest condition number accepted for `A^n(p)` before inverting it.
const MAX_CONDITION: f64 = 1e14;

/// Lengths up to this value are excluded from the domination fit.
pub const BURN_IN: usize = 4;

/// Default relative tolerance for the typicality margins.
pub const DEFAULT_TOL: f64 = 1e-8;

/// A periodic point `p = periodic^∞` and a homoclinic point `z` that differs
/// from `p` on the bridge block `z_0 … z_{n−1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomoclinicSpec {
    pub periodic_word: Word,
    pub bridge_word: Word,
}

impl HomoclinicSpec {
    pub fn new(periodic_word: Word, bridge_word: Word) -> Result<Self> {
        if periodic_word.is_empty() {
            return Err(Error::Input("periodic word is empty".into()));
        }
        Ok(Self { periodic_word, bridge_word })
    }

    pub fn period(&self) -> usize {
        self.periodic_word.len()
    }

    /// The bridge extended with symbols of `p` up to a multiple of the period.
    pub fn padded_bridge(&self) -> Word {
        let per = self.period();
        let p = self.periodic_word.symbols();
        let mut s = self.bridge_word.symbols().to_vec();
        let n = s.len().div_ceil(per).max(1) * per;
        for j in s.len()..n {
            s.push(p[j % per]);
        }
        Word::new(s)
    }

    /// `true` when the padded bridge coincides with `p` itself, so `z = p`.
    pub fn is_trivial(&self) -> bool {
        let p = self.periodic_word.symbols();
        self.padded_bridge()
            .symbols()
            .iter()
            .enumerate()
            .all(|(j, &s)| s == p[j % p.len()])
    }

    fn check(&self, k: usize) -> Result<()> {
        self.periodic_word.check_alphabet(k)?;
        self.bridge_word.check_alphabet(k)
    }
}

fn product(cocycle: &OneStepCocycle, symbols: &[usize]) -> Matrix {
    symbols
        .iter()
        .fold(Matrix::identity(cocycle.dim()), |acc, &s| cocycle.generator(s).mul(&acc))
}

/// `A^{per}(p)`, one period of the periodic orbit.
pub fn period_matrix(cocycle: &OneStepCocycle, spec: &HomoclinicSpec) -> Result<Matrix> {
    spec.check(cocycle.k())?;
    Ok(product(cocycle, spec.periodic_word.symbols()))
}

/// `W = (A^n(p))^{−1} · A^n(z)` with `n` the padded bridge length.
pub fn holonomy_loop(cocycle: &OneStepCocycle, spec: &HomoclinicSpec) -> Result<Matrix> {
    spec.check(cocycle.k())?;
    let bridge = spec.padded_bridge();
    let reps = bridge.len() / spec.period();
    let per = product(cocycle, spec.periodic_word.symbols());
    let mut ap = Matrix::identity(cocycle.dim());
    for _ in 0..reps {
        ap = per.mul(&ap);
    }
    let sv = singular_values(&ap)?;
    let ls = sv.log_sigma();
    let log_cond = ls[0] - ls[ls.len() - 1];
    if log_cond.is_nan() || log_cond > MAX_CONDITION.ln() {
        return Err(Error::Numeric(format!(
            "A^{}(p) is too ill-conditioned to invert (log condition {log_cond:.3})",
            bridge.len()
        )));
    }
    let az = product(cocycle, bridge.symbols());
    Ok(ap.inverse()?.mul(&az))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    fn from_margin(margin: f64, tol: f64) -> Self {
        if margin > tol {
            Outcome::Pass
        } else if margin > tol / 10.0 {
            Outcome::Inconclusive
        } else {
            Outcome::Fail
        }
    }

    fn and(self, other: Outcome) -> Outcome {
        match (self, other) {
            (Outcome::Fail, _) | (_, Outcome::Fail) => Outcome::Fail,
            (Outcome::Inconclusive, _) | (_, Outcome::Inconclusive) => Outcome::Inconclusive,
            _ => Outcome::Pass,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// Simple eigenvalues with distinct moduli.
    Pinching,
    /// Independence of the twisted and untwisted eigenvectors.
    Twisting,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::Pinching => "(i) distinct eigenvalue moduli",
            Condition::Twisting => "(ii) holonomy twist independence",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueCheck {
    pub outcome: Outcome,
    /// Moduli in decreasing order.
    pub moduli: Vec<f64>,
    /// Smallest `(|λ_i| − |λ_{i+1}|) / |λ_i|`.
    pub min_relative_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceCheck {
    /// 1-based eigenvector indices moved by the holonomy loop.
    pub twisted: Vec<usize>,
    /// 1-based eigenvector indices taken as they are.
    pub plain: Vec<usize>,
    /// `σ_min / σ_max` of the stacked unit columns.
    pub margin: f64,
    pub outcome: Outcome,
}

/// The 1-typicality checks for one exterior power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub t: usize,
    pub eigenvalue_check: EigenvalueCheck,
    pub independence_checks: Vec<IndependenceCheck>,
    pub outcome: Outcome,
    pub failed_condition: Option<Condition>,
}

impl PowerReport {
    fn margin(&self) -> f64 {
        self.independence_checks
            .iter()
            .map(|c| c.margin)
            .fold(self.eigenvalue_check.min_relative_gap, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypicalityVerdict {
    Typical,
    NotTypical,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypicalityReport {
    pub spec: HomoclinicSpec,
    pub tol: f64,
    pub per_exterior_power: Vec<PowerReport>,
    pub overall: TypicalityVerdict,
    /// First failing `(t, condition)`, if any.
    pub failed: Option<(usize, Condition)>,
    /// Smallest margin over all checks that were run.
    pub margin: f64,
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Unit null vector of `P − λI`, first nonzero coordinate positive.
fn eigenvector(p: &Matrix, lambda: f64) -> Vec<f64> {
    let d = p.dim();
    let m = p.to_nalgebra() - DMatrix::identity(d, d) * lambda;
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty spectrum");
    let mut v: Vec<f64> = vt.row(idx).iter().copied().collect();
    let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale).copied() {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    unit(v)
}

fn sigma_ratio(columns: &[Vec<f64>]) -> f64 {
    let d = columns[0].len();
    let m = DMatrix::from_fn(d, columns.len(), |i, j| columns[j][i]);
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        min / max
    } else {
        0.0
    }
}

fn one_typical_section(p: &Matrix, w: &Matrix, t: usize, tol: f64) -> PowerReport {
    let d = p.dim();
    let eig = p.to_nalgebra().complex_eigenvalues();
    let mut lambdas: Vec<(f64, f64, f64)> = eig.iter().map(|z| (z.norm(), z.re, z.im)).collect();
    lambdas.sort_by(|a, b| b.0.total_cmp(&a.0));
    let moduli: Vec<f64> = lambdas.iter().map(|l| l.0).collect();
    let min_gap = moduli
        .windows(2)
        .map(|w| if w[0] > 0.0 { (w[0] - w[1]) / w[0] } else { 0.0 })
        .fold(f64::INFINITY, f64::min);
    let min_gap = if min_gap.is_finite() { min_gap } else { 1.0 };
    let eig_outcome = Outcome::from_margin(min_gap, tol);
    let eigenvalue_check = EigenvalueCheck { outcome: eig_outcome, moduli, min_relative_gap: min_gap };

    let all_real = lambdas.iter().all(|l| l.2.abs() <= 1e-12 * l.0.max(1.0));
    if eig_outcome == Outcome::Fail || !all_real {
        return PowerReport {
            t,
            eigenvalue_check,
            independence_checks: Vec::new(),
            outcome: Outcome::Fail,
            failed_condition: Some(Condition::Pinching),
        };
    }

    let vectors: Vec<Vec<f64>> = lambdas.iter().map(|l| eigenvector(p, l.1)).collect();
    let twisted: Vec<Vec<f64>> = vectors.iter().map(|v| unit(w.mul_vec(v))).collect();
    let mut checks = Vec::new();
    // subsets of an independent family are independent: the maximal pairs suffice
    for size in 0..=d {
        let is = if size == 0 { vec![Vec::new()] } else { combinations(d, size) };
        let js = if size == d { vec![Vec::new()] } else { combinations(d, d - size) };
        for i in &is {
            for j in &js {
                let cols: Vec<Vec<f64>> = i
                    .iter()
                    .map(|&a| twisted[a].clone())
                    .chain(j.iter().map(|&b| vectors[b].clone()))
                    .collect();
                let margin = sigma_ratio(&cols);
                checks.push(IndependenceCheck {
                    twisted: i.iter().map(|a| a + 1).collect(),
                    plain: j.iter().map(|b| b + 1).collect(),
                    margin,
                    outcome: Outcome::from_margin(margin, tol),
                });
            }
        }
    }
    let indep = checks.iter().fold(Outcome::Pass, |acc, c| acc.and(c.outcome));
    let outcome = eig_outcome.and(indep);
    let failed_condition = (indep == Outcome::Fail).then_some(Condition::Twisting);
    PowerReport { t, eigenvalue_check, independence_checks: checks, outcome, failed_condition }
}

fn aggregate(spec: &HomoclinicSpec, tol: f64, sections: Vec<PowerReport>) -> TypicalityReport {
    let outcome = sections.iter().fold(Outcome::Pass, |acc, s| acc.and(s.outcome));
    let overall = match outcome {
        Outcome::Pass => TypicalityVerdict::Typical,
        Outcome::Fail => TypicalityVerdict::NotTypical,
        Outcome::Inconclusive => TypicalityVerdict::Inconclusive,
    };
    let failed = sections
        .iter()
        .find_map(|s| s.failed_condition.map(|c| (s.t, c)));
    let margin = sections.iter().map(PowerReport::margin).fold(f64::INFINITY, f64::min);
    TypicalityReport { spec: spec.clone(), tol, per_exterior_power: sections, overall, failed, margin }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Input(format!("tolerance {tol} must lie in (0, 1)")));
    }
    Ok(())
}

/// Conditions (i) and (ii) for the cocycle itself.
pub fn check_one_typical(cocycle: &OneStepCocycle, spec: &HomoclinicSpec, tol: f64) -> Result<TypicalityReport> {
    check_tol(tol)?;
    let p = period_matrix(cocycle, spec)?;
    let w = holonomy_loop(cocycle, spec)?;
    Ok(aggregate(spec, tol, vec![one_typical_section(&p, &w, 1, tol)]))
}

/// Conditions (i) and (ii) for every exterior power `∧^t`, `1 ≤ t < d`, with
/// the same homoclinic pair.
pub fn check_typical(cocycle: &OneStepCocycle, spec: &HomoclinicSpec, tol: f64) -> Result<TypicalityReport> {
    check_tol(tol)?;
    let d = cocycle.dim();
    if d < 2 {
        return Err(Error::Input("typicality needs dimension at least 2".into()));
    }
    let mut sections = Vec::with_capacity(d - 1);
    for t in 1..d {
        let wedge = if t == 1 { cocycle.clone() } else { cocycle.exterior_power(t)? };
        let p = period_matrix(&wedge, spec)?;
        let w = holonomy_loop(&wedge, spec)?;
        sections.push(one_typical_section(&p, &w, t, tol));
    }
    Ok(aggregate(spec, tol, sections))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum SearchOutcome {
    Found {
        report: TypicalityReport,
        candidates_checked: usize,
    },
    NotFound {
        /// Report with the largest margin among the candidates tried.
        best: Option<TypicalityReport>,
        candidates_checked: usize,
    },
}

fn words_of_length(k: usize, len: usize) -> impl Iterator<Item = Word> {
    let total = k.pow(len as u32);
    (0..total).map(move |mut idx| {
        let mut s = vec![0; len];
        for slot in s.iter_mut().rev() {
            *slot = idx % k;
            idx /= k;
        }
        Word::new(s)
    })
}

fn count_words(k: usize, max_len: usize) -> Option<u64> {
    (1..=max_len).try_fold(0u64, |acc, l| acc.checked_add((k as u64).checked_pow(l as u32)?))
}

/// Tries periodic words of length up to `max_period` and bridges up to
/// `max_bridge`, each ordered by length then lexicographically, and returns
/// the first pair certified typical.
pub fn search_homoclinic(
    cocycle: &OneStepCocycle,
    max_period: usize,
    max_bridge: usize,
    tol: f64,
    cfg: &EnumConfig,
) -> Result<SearchOutcome> {
    check_tol(tol)?;
    if max_period == 0 || max_bridge == 0 {
        return Err(Error::Input("max period and max bridge must be at least 1".into()));
    }
    let k = cocycle.k();
    let total = count_words(k, max_period)
        .zip(count_words(k, max_bridge))
        .and_then(|(a, b)| a.checked_mul(b));
    match total {
        Some(t) if t <= cfg.budget => {}
        _ => {
            return Err(Error::Budget {
                k,
                n: max_period + max_bridge,
                leaves: total.map_or_else(|| "overflow".into(), |t| t.to_string()),
                budget: cfg.budget,
            })
        }
    }

    let mut checked = 0;
    let mut best: Option<TypicalityReport> = None;
    for plen in 1..=max_period {
        for periodic in words_of_length(k, plen) {
            let specs: Vec<HomoclinicSpec> = (1..=max_bridge)
                .flat_map(|b| words_of_length(k, b))
                .map(|bridge| HomoclinicSpec { periodic_word: periodic.clone(), bridge_word: bridge })
                .filter(|s| !s.is_trivial())
                .collect();
            let reports: Vec<Option<TypicalityReport>> = cfg.install(|| {
                specs
                    .par_iter()
                    .map(|s| check_typical(cocycle, s, tol).ok())
                    .collect()
            })?;
            for report in reports.into_iter().flatten() {
                checked += 1;
                if report.overall == TypicalityVerdict::Typical {
                    return Ok(SearchOutcome::Found { report, candidates_checked: checked });
                }
                if best.as_ref().is_none_or(|b| report.margin > b.margin) {
                    best = Some(report);
                }
            }
        }
    }
    Ok(SearchOutcome::NotFound { best, candidates_checked: checked })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DominationMode {
    Exhaustive,
    Sampled { samples: usize, seed: u64 },
}

impl DominationMode {
    pub fn sampled() -> Self {
        DominationMode::Sampled { samples: 10_000, seed: 0x5eed }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DominationVerdict {
    Dominated,
    NotDominated,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    /// 1-based gap index: compares `σ_{i+1}` with `σ_i`.
    pub index: usize,
    pub mode: DominationMode,
    pub lengths: Vec<usize>,
    /// Largest `log(σ_{i+1}/σ_i)` over the words of each length.
    pub worst_log_ratio: Vec<f64>,
    /// Least-squares slope over lengths beyond the burn-in.
    pub log_tau: f64,
    pub log_c: f64,
    /// Worst ratios strictly decrease beyond the burn-in.
    pub monotone: bool,
    pub verdict: DominationVerdict,
}

fn worst_ratio_exhaustive(cocycle: &OneStepCocycle, index: usize, n: usize, cfg: &EnumConfig) -> Result<f64> {
    fold_log_spectra(
        cocycle,
        n,
        cfg,
        || f64::NEG_INFINITY,
        |acc, _, ls| *acc = acc.max(ls[index] - ls[index - 1]),
        f64::max,
    )
}

fn worst_ratio_sampled(
    cocycle: &OneStepCocycle,
    index: usize,
    n: usize,
    samples: usize,
    seed: u64,
    cfg: &EnumConfig,
) -> Result<f64> {
    let k = cocycle.k();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let words: Vec<Vec<usize>> = (0..samples)
        .map(|_| (0..n).map(|_| rng.random_range(0..k)).collect())
        .collect();
    let ratios: Vec<Result<f64>> = cfg.install(|| {
        words
            .par_iter()
            .map(|w| {
                let mut acc = ScaledMatrix::identity(cocycle.dim());
                for &s in w {
                    acc = acc.mul_left(cocycle.generator(s))?;
                }
                let ls = acc.log_singular_values();
                Ok(ls[index] - ls[index - 1])
            })
            .collect()
    })?;
    ratios.into_iter().try_fold(f64::NEG_INFINITY, |acc, r| Ok(acc.max(r?)))
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Measures the worst singular-value ratio `σ_{i+1}/σ_i` per length and
/// fits `log ratio ≈ log C + N log τ`.
pub fn check_dominated(
    cocycle: &OneStepCocycle,
    index: usize,
    lengths: &[usize],
    mode: DominationMode,
    cfg: &EnumConfig,
) -> Result<DominationReport> {
    let d = cocycle.dim();
    if index == 0 || index >= d {
        return Err(Error::Input(format!("index {index} must satisfy 1 <= i < d = {d}")));
    }
    let mut lengths = lengths.to_vec();
    lengths.sort_unstable();
    lengths.dedup();
    if lengths.first() == Some(&0) {
        return Err(Error::Input("lengths must be at least 1".into()));
    }
    if lengths.len() < 2 {
        return Err(Error::Input("at least two distinct lengths are needed for the fit".into()));
    }
    if mode == DominationMode::Exhaustive {
        cfg.check_budget(cocycle.k(), *lengths.last().unwrap())?;
    }
    let worst = lengths
        .iter()
        .map(|&n| match mode {
            DominationMode::Exhaustive => worst_ratio_exhaustive(cocycle, index, n, cfg),
            DominationMode::Sampled { samples, seed } => {
                if samples == 0 {
                    return Err(Error::Input("sample count must be positive".into()));
                }
                worst_ratio_sampled(cocycle, index, n, samples, seed, cfg)
            }
        })
        .collect::<Result<Vec<f64>>>()?;

    let fit: Vec<(f64, f64)> = lengths
        .iter()
        .zip(&worst)
        .filter(|(n, _)| **n > BURN_IN)
        .map(|(&n, &r)| (n as f64, r))
        .collect();
    let enough = fit.len() >= 2;
    let (x, y): (Vec<f64>, Vec<f64>) = if enough {
        fit.iter().copied().unzip()
    } else {
        lengths.iter().map(|&n| n as f64).zip(worst.iter().copied()).unzip()
    };
    let (log_tau, log_c) = least_squares(&x, &y);
    let monotone = y.windows(2).all(|w| w[1] < w[0]);
    let verdict = if log_tau > -1e-3 {
        DominationVerdict::NotDominated
    } else if monotone && enough {
        DominationVerdict::Dominated
    } else {
        DominationVerdict::Inconclusive
    };
    Ok(DominationReport { index, mode, lengths, worst_log_ratio: worst, log_tau, log_c, monotone, verdict })
}
