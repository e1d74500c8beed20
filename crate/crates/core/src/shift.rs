//! Words over `{1, …, k}`, one-step cocycles and enumeration of all word
//! products of a given length.
//!
//! Symbols are stored zero-based; text forms (parsing and display) are
//! one-based. For a word `I = i_0 … i_{n-1}` the product is
//! `A_I = A_{i_{n-1}} ⋯ A_{i_0}`: the last symbol's matrix is leftmost.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::{exterior_power, singular_values, Matrix, ScaledMatrix};

/// Default cap on the number of leaves visited by one enumeration.
pub const DEFAULT_BUDGET: u64 = 1 << 26;

/// Environment variable overriding [`DEFAULT_BUDGET`].
pub const BUDGET_ENV: &str = "COCYCLE_BUDGET";

/// A finite word over the alphabet `{0, …, k-1}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    symbols: Vec<usize>,
}

impl Word {
    pub fn new(symbols: Vec<usize>) -> Self {
        Self { symbols }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Parses a one-based word: either digits (`"121"`) or a comma-separated
    /// list (`"1,12,3"`). The empty string is the empty word.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(Self::empty());
        }
        let symbols = if text.contains(',') {
            text.split(',')
                .map(|tok| {
                    let tok = tok.trim();
                    tok.parse::<usize>()
                        .ok()
                        .filter(|&v| v >= 1)
                        .map(|v| v - 1)
                        .ok_or_else(|| Error::Input(format!("invalid symbol {tok:?}")))
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            text.chars()
                .map(|ch| match ch.to_digit(10) {
                    Some(v) if v >= 1 => Ok(v as usize - 1),
                    _ => Err(Error::Input(format!("invalid symbol {ch:?}"))),
                })
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Self { symbols })
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Concatenation `self` followed by `other`.
    pub fn concat(&self, other: &Word) -> Word {
        let mut symbols = self.symbols.clone();
        symbols.extend_from_slice(&other.symbols);
        Word { symbols }
    }

    pub fn check_alphabet(&self, k: usize) -> Result<()> {
        match self.symbols.iter().find(|&&s| s >= k) {
            Some(&s) => Err(Error::Input(format!(
                "symbol {} out of range for alphabet of size {k}",
                s + 1
            ))),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.symbols.iter().all(|&s| s < 9) {
            for s in &self.symbols {
                write!(f, "{}", s + 1)?;
            }
        } else {
            let parts: Vec<String> = self.symbols.iter().map(|s| (s + 1).to_string()).collect();
            write!(f, "{}", parts.join(","))?;
        }
        Ok(())
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Word::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// The generator `(A_1, …, A_k)` of a one-step cocycle over the full shift.
#[derive(Clone, Debug)]
pub struct OneStepCocycle {
    dim: usize,
    generators: Vec<Matrix>,
    log_abs_dets: Vec<f64>,
    max_log_norm: f64,
    max_log_inv_norm: f64,
}

impl OneStepCocycle {
    /// Validates and caches a generator tuple. Generators must share one
    /// dimension and satisfy `|det A| > 1e-12 · ‖A‖^d`.
    pub fn new(generators: Vec<Matrix>) -> Result<Self> {
        let Some(first) = generators.first() else {
            return Err(Error::Validation("a cocycle needs at least one generator".into()));
        };
        let dim = first.dim();
        let mut log_abs_dets = Vec::with_capacity(generators.len());
        let mut max_log_norm = f64::NEG_INFINITY;
        let mut max_log_inv_norm = f64::NEG_INFINITY;
        for (i, a) in generators.iter().enumerate() {
            if a.dim() != dim {
                return Err(Error::Validation(format!(
                    "generator {} has dimension {}, expected {dim}",
                    i + 1,
                    a.dim()
                )));
            }
            if !a.is_finite() {
                return Err(Error::Validation(format!(
                    "generator {} has non-finite entries",
                    i + 1
                )));
            }
            let log_det = a.log_abs_det();
            let spectrum = singular_values(a)?;
            let log_norm = spectrum.log_sigma()[0];
            if !log_det.is_finite() || log_det <= (1e-12f64).ln() + dim as f64 * log_norm {
                return Err(Error::Validation(format!("generator {} is singular", i + 1)));
            }
            max_log_norm = max_log_norm.max(log_norm);
            max_log_inv_norm = max_log_inv_norm.max(-spectrum.log_sigma()[dim - 1]);
            log_abs_dets.push(log_det);
        }
        Ok(Self {
            dim,
            generators,
            log_abs_dets,
            max_log_norm,
            max_log_inv_norm,
        })
    }

    /// Alphabet size `k`.
    pub fn k(&self) -> usize {
        self.generators.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[Matrix] {
        &self.generators
    }

    pub fn generator(&self, symbol: usize) -> &Matrix {
        &self.generators[symbol]
    }

    pub fn log_abs_det(&self, symbol: usize) -> f64 {
        self.log_abs_dets[symbol]
    }

    /// `max_i log ‖A_i‖` (spectral norm).
    pub fn max_log_norm(&self) -> f64 {
        self.max_log_norm
    }

    /// `max_i log ‖A_i^{-1}‖`.
    pub fn max_log_inv_norm(&self) -> f64 {
        self.max_log_inv_norm
    }

    /// The cocycle generated by the `t`-th compound matrices.
    pub fn exterior_power(&self, t: usize) -> Result<OneStepCocycle> {
        let gens = self
            .generators
            .iter()
            .map(|a| exterior_power(a, t))
            .collect::<Result<Vec<_>>>()?;
        OneStepCocycle::new(gens)
    }
}

/// `A_I = A_{i_{n-1}} ⋯ A_{i_0}`; the empty word gives the identity.
pub fn word_product(cocycle: &OneStepCocycle, word: &Word) -> Result<ScaledMatrix> {
    word.check_alphabet(cocycle.k())?;
    let mut acc = ScaledMatrix::identity(cocycle.dim());
    let mut next = ScaledMatrix::identity(cocycle.dim());
    for &s in word.symbols() {
        next.assign_product(cocycle.generator(s), cocycle.log_abs_det(s), &acc)?;
        std::mem::swap(&mut acc, &mut next);
    }
    Ok(acc)
}

/// Enumeration settings shared by every engine that sums over `L_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumConfig {
    /// Maximum number of leaves (`k^n`) a single enumeration may visit.
    pub budget: u64,
    /// Worker threads; `None` uses the global rayon pool, `Some(1)` runs inline.
    pub threads: Option<usize>,
    /// Merge per-prefix partial results in a fixed order so output is
    /// bit-identical for any thread count.
    pub deterministic: bool,
}

impl Default for EnumConfig {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            threads: None,
            deterministic: true,
        }
    }
}

impl EnumConfig {
    pub fn sequential() -> Self {
        Self {
            threads: Some(1),
            ..Self::default()
        }
    }

    /// Default settings with the budget taken from `COCYCLE_BUDGET` when set.
    pub fn from_env() -> Result<Self> {
        let mut cfg = Self::default();
        if let Ok(raw) = std::env::var(BUDGET_ENV) {
            cfg.budget = raw.trim().parse().map_err(|_| {
                Error::Input(format!("{BUDGET_ENV} must be a positive integer, got {raw:?}"))
            })?;
        }
        Ok(cfg)
    }

    /// Number of leaves `k^n`, or a budget error.
    pub fn check_budget(&self, k: usize, n: usize) -> Result<u64> {
        let leaves = u32::try_from(n)
            .ok()
            .and_then(|n| (k as u64).checked_pow(n));
        match leaves {
            Some(l) if l <= self.budget => Ok(l),
            other => Err(Error::Budget {
                k,
                n,
                leaves: other.map_or_else(|| "overflow".to_string(), |l| l.to_string()),
                budget: self.budget,
            }),
        }
    }

    /// Runs `f` on a pool with the configured thread count.
    pub(crate) fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R> {
        match self.threads {
            Some(t) if t > 1 => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| Error::Input(format!("cannot start thread pool: {e}")))?;
                Ok(pool.install(f))
            }
            _ => Ok(f()),
        }
    }
}

/// Visits every length-`n` word in lexicographic order with its product.
/// The visitor sees zero-based symbols.
pub fn enumerate_products<F>(
    cocycle: &OneStepCocycle,
    n: usize,
    cfg: &EnumConfig,
    mut visitor: F,
) -> Result<()>
where
    F: FnMut(&[usize], &ScaledMatrix),
{
    cfg.check_budget(cocycle.k(), n)?;
    dfs(cocycle, &[], &ScaledMatrix::identity(cocycle.dim()), n, &mut visitor)
}

/// Depth-first walk below `prefix`; each tree node costs one multiply.
fn dfs<F>(
    cocycle: &OneStepCocycle,
    prefix: &[usize],
    prefix_product: &ScaledMatrix,
    n: usize,
    visitor: &mut F,
) -> Result<()>
where
    F: FnMut(&[usize], &ScaledMatrix),
{
    let start = prefix.len();
    let remaining = n - start;
    if remaining == 0 {
        visitor(prefix, prefix_product);
        return Ok(());
    }
    let k = cocycle.k();
    let mut word = prefix.to_vec();
    word.resize(n, 0);
    let mut stack: Vec<ScaledMatrix> = vec![prefix_product.clone(); remaining + 1];
    let mut choice = vec![0usize; remaining];
    let mut level = 0;
    loop {
        if choice[level] == k {
            if level == 0 {
                break;
            }
            level -= 1;
            choice[level] += 1;
            continue;
        }
        let s = choice[level];
        word[start + level] = s;
        let (lo, hi) = stack.split_at_mut(level + 1);
        hi[0].assign_product(cocycle.generator(s), cocycle.log_abs_det(s), &lo[level])?;
        if level + 1 == remaining {
            visitor(&word, &hi[0]);
            choice[level] += 1;
        } else {
            level += 1;
            choice[level] = 0;
        }
    }
    Ok(())
}

/// Prefix length used to split the word tree into independent subtrees.
/// Depends only on `k` and `n`, never on the thread count.
fn split_depth(k: usize, n: usize) -> usize {
    if k <= 1 {
        return 0;
    }
    let mut depth = 0;
    let mut count = 1usize;
    while depth < n && count < 64 {
        count *= k;
        depth += 1;
    }
    depth
}

fn prefixes(k: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

/// Merges adjacent pairs repeatedly; the shape depends only on `parts.len()`.
pub(crate) fn tree_merge<A>(mut parts: Vec<A>, merge: &impl Fn(A, A) -> A) -> Option<A> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge(a, b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop()
}

/// Parallel fold over all length-`n` word products.
///
/// The word tree is split at a fixed prefix depth; every prefix subtree is
/// folded into its own accumulator. In deterministic mode the accumulators
/// are merged by a fixed binary tree in prefix order, otherwise in whatever
/// order the workers finish.
pub fn fold_products<A, I, F, M>(
    cocycle: &OneStepCocycle,
    n: usize,
    cfg: &EnumConfig,
    init: I,
    visit: F,
    merge: M,
) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, &[usize], &ScaledMatrix) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    cfg.check_budget(cocycle.k(), n)?;
    let split = split_depth(cocycle.k(), n);
    let roots = prefixes(cocycle.k(), split);

    let fold_subtree = |prefix: &Vec<usize>| -> Result<A> {
        let word = Word::new(prefix.clone());
        let product = word_product(cocycle, &word)?;
        let mut acc = init();
        dfs(cocycle, prefix, &product, n, &mut |w: &[usize], m: &ScaledMatrix| {
            visit(&mut acc, w, m)
        })?;
        Ok(acc)
    };

    if cfg.threads == Some(1) {
        let parts = roots.iter().map(fold_subtree).collect::<Result<Vec<A>>>()?;
        return Ok(tree_merge(parts, &merge).unwrap_or_else(&init));
    }

    cfg.install(|| {
        if cfg.deterministic {
            let parts = roots
                .par_iter()
                .map(fold_subtree)
                .collect::<Result<Vec<A>>>()?;
            Ok(tree_merge(parts, &merge).unwrap_or_else(&init))
        } else {
            roots
                .par_iter()
                .map(fold_subtree)
                .try_reduce(&init, |a, b| Ok(merge(a, b)))
        }
    })?
}

/// Convenience fold over the log singular values of every length-`n` product.
pub fn fold_log_spectra<A, I, F, M>(
    cocycle: &OneStepCocycle,
    n: usize,
    cfg: &EnumConfig,
    init: I,
    visit: F,
    merge: M,
) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, &[usize], &[f64]) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    fold_products(
        cocycle,
        n,
        cfg,
        init,
        |acc, w, m| {
            let ls = m.log_singular_values();
            visit(acc, w, &ls)
        },
        merge,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair() -> OneStepCocycle {
        OneStepCocycle::new(vec![
            Matrix::diag(&[2.0, 1.0]),
            Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn word_product_uses_last_symbol_leftmost() {
        let c = pair();
        let p = word_product(&c, &Word::parse("12").unwrap()).unwrap().to_matrix();
        let expect = Matrix::from_rows(&[[0.0, 1.0], [2.0, 0.0]]).unwrap();
        assert!(p.max_abs_diff(&expect) < 1e-15);

        let p = word_product(&c, &Word::parse("21").unwrap()).unwrap().to_matrix();
        let expect = Matrix::from_rows(&[[0.0, 2.0], [1.0, 0.0]]).unwrap();
        assert!(p.max_abs_diff(&expect) < 1e-15);

        let p = word_product(&c, &Word::empty()).unwrap().to_matrix();
        assert_eq!(p, Matrix::identity(2));
    }

    #[test]
    fn word_product_rejects_bad_symbol() {
        let c = pair();
        assert!(matches!(
            word_product(&c, &Word::new(vec![0, 2])),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn word_parse_and_display() {
        let w = Word::parse("1213").unwrap();
        assert_eq!(w.symbols(), &[0, 1, 0, 2]);
        assert_eq!(w.to_string(), "1213");
        let w = Word::parse("1, 12,3").unwrap();
        assert_eq!(w.symbols(), &[0, 11, 2]);
        assert_eq!(w.to_string(), "1,12,3");
        assert!(Word::parse("").unwrap().is_empty());
        assert!(Word::parse("102").is_err());
        assert!(Word::parse("1,0").is_err());
        assert!(Word::parse("a").is_err());
    }

    #[test]
    fn singular_generator_rejected() {
        let err = OneStepCocycle::new(vec![
            Matrix::identity(2),
            Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap(),
        ])
        .unwrap_err();
        assert_eq!(err.to_string(), "validation error: generator 2 is singular");
    }

    #[test]
    fn cached_norm_bounds() {
        let c = OneStepCocycle::new(vec![Matrix::diag(&[4.0, 0.5]), Matrix::diag(&[1.0, 0.25])])
            .unwrap();
        assert!((c.max_log_norm() - 4f64.ln()).abs() < 1e-14);
        assert!((c.max_log_inv_norm() - 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn enumeration_visits_lexicographically() {
        let c = pair();
        let mut seen = Vec::new();
        enumerate_products(&c, 3, &EnumConfig::default(), |w, _| seen.push(w.to_vec())).unwrap();
        assert_eq!(seen.len(), 8);
        let mut sorted = seen.clone();
        sorted.sort();
        assert_eq!(seen, sorted);
        assert_eq!(seen[0], vec![0, 0, 0]);
        assert_eq!(seen[7], vec![1, 1, 1]);
    }

    #[test]
    fn singleton_alphabet_gives_power() {
        let a = Matrix::from_rows(&[[1.0, 1.0], [0.0, 2.0]]).unwrap();
        let c = OneStepCocycle::new(vec![a.clone()]).unwrap();
        let mut visits = Vec::new();
        enumerate_products(&c, 5, &EnumConfig::default(), |_, m| visits.push(m.to_matrix())).unwrap();
        assert_eq!(visits.len(), 1);
        let mut p = Matrix::identity(2);
        for _ in 0..5 {
            p = a.mul(&p);
        }
        assert!(visits[0].max_abs_diff(&p) < 1e-12 * p.inf_norm());
    }

    #[test]
    fn binomial_singular_value_pattern() {
        let c = OneStepCocycle::new(vec![Matrix::diag(&[4.0, 1.0]), Matrix::diag(&[1.0, 4.0])])
            .unwrap();
        let n = 10;
        // oracle: j copies of symbol 1 give diag(4^j, 4^(n-j))
        let mut expected = std::collections::BTreeMap::new();
        let mut binom = 1u64;
        for j in 0..=n {
            if j > 0 {
                binom = binom * (n - j + 1) as u64 / j as u64;
            }
            *expected.entry((j.max(n - j), j.min(n - j))).or_insert(0u64) += binom;
        }
        let mut seen = std::collections::BTreeMap::new();
        let log4 = 4f64.ln();
        enumerate_products(&c, n, &EnumConfig::default(), |_, m| {
            let ls = m.log_singular_values();
            let hi = (ls[0] / log4).round() as usize;
            let lo = (ls[1] / log4).round() as usize;
            assert!((ls[0] - hi as f64 * log4).abs() < 1e-9);
            assert!((ls[1] - lo as f64 * log4).abs() < 1e-9);
            *seen.entry((hi, lo)).or_insert(0u64) += 1;
        })
        .unwrap();
        assert_eq!(seen, expected);
    }

    #[test]
    fn budget_is_enforced() {
        let c = pair();
        let cfg = EnumConfig {
            budget: 1000,
            ..EnumConfig::default()
        };
        let err = enumerate_products(&c, 10, &cfg, |_, _| {}).unwrap_err();
        assert!(err.to_string().contains("2^10 = 1024"), "{err}");
        assert!(enumerate_products(&c, 9, &cfg, |_, _| {}).is_ok());
        let err = cfg.check_budget(3, 200).unwrap_err();
        assert!(err.to_string().contains("overflow"));
    }

    fn random_cocycle(rng: &mut ChaCha8Rng, k: usize, d: usize) -> OneStepCocycle {
        let gens = (0..k)
            .map(|_| {
                let mut m = Matrix::identity(d);
                for i in 0..d {
                    for j in 0..d {
                        m.set(i, j, m.get(i, j) + rng.random_range(-1.0..1.0));
                    }
                }
                m
            })
            .collect();
        OneStepCocycle::new(gens).unwrap()
    }

    fn rel_close(a: &ScaledMatrix, b: &ScaledMatrix) -> bool {
        let shift = a.log_scale() - b.log_scale();
        let ba = a.base().scaled(shift.exp());
        ba.max_abs_diff(b.base()) <= 1e-9 * (1.0 + b.base().inf_norm())
    }

    #[test]
    fn cocycle_law_on_random_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = random_cocycle(&mut rng, 3, 3);
        for _ in 0..50 {
            let u = Word::new((0..rng.random_range(0..6)).map(|_| rng.random_range(0..3)).collect());
            let v = Word::new((0..rng.random_range(0..6)).map(|_| rng.random_range(0..3)).collect());
            let uv = word_product(&c, &u.concat(&v)).unwrap();
            let pu = word_product(&c, &u).unwrap().to_matrix();
            let pv = word_product(&c, &v).unwrap().to_matrix();
            // A_{UV} = A_V · A_U
            let composed = ScaledMatrix::from_matrix(&pv.mul(&pu)).unwrap();
            assert!(rel_close(&uv, &composed));
        }
    }

    #[test]
    fn dfs_reuse_matches_direct_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = random_cocycle(&mut rng, 3, 2);
        let n = 7;
        let mut all = Vec::new();
        enumerate_products(&c, n, &EnumConfig::default(), |w, m| all.push((w.to_vec(), m.clone())))
            .unwrap();
        assert_eq!(all.len(), 3usize.pow(n as u32));
        for _ in 0..100 {
            let (w, m) = &all[rng.random_range(0..all.len())];
            let direct = word_product(&c, &Word::new(w.clone())).unwrap();
            assert!(rel_close(m, &direct));
        }
    }

    #[test]
    fn parallel_fold_counts_every_leaf() {
        let c = pair();
        for threads in [Some(1), Some(3), None] {
            for deterministic in [true, false] {
                let cfg = EnumConfig {
                    threads,
                    deterministic,
                    ..EnumConfig::default()
                };
                let count = fold_products(&c, 9, &cfg, || 0u64, |a, _, _| *a += 1, |a, b| a + b)
                    .unwrap();
                assert_eq!(count, 512);
            }
        }
    }

    #[test]
    fn split_depth_is_bounded_by_n() {
        assert_eq!(split_depth(2, 3), 3);
        assert_eq!(split_depth(2, 20), 6);
        assert_eq!(split_depth(3, 20), 4);
        assert_eq!(split_depth(1, 20), 0);
    }
}
