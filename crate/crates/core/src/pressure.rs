//! Finite-depth pressure `P_n(q) = (1/n) log Σ_{|I|=n} ψ^q(A_I)`, its Gibbs
//! gradient, Fekete-type brackets and a cached point cloud of log singular
//! values for repeated evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::QVector;
use crate::shift::{fold_log_spectra, EnumConfig, OneStepCocycle};

/// One finite-depth pressure evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub q: QVector,
    pub depth: usize,
    /// `P_n(q)`.
    pub value: f64,
    /// Gibbs average of `(1/n) log σ(A_I)`; sorted nonincreasing.
    pub gradient: Vec<f64>,
    pub upper_bound: Option<f64>,
    pub lower_bound: Option<f64>,
    /// `|P_n − P_m|` for the two deepest evaluated depths.
    pub cauchy_gap: Option<f64>,
}

/// Running log-sum-exp of `⟨q, L_I⟩` together with the weighted sum of `L_I`.
#[derive(Clone, Debug)]
struct GibbsAccumulator {
    max: f64,
    sum: f64,
    weighted: Vec<f64>,
}

impl GibbsAccumulator {
    fn new(d: usize) -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
            weighted: vec![0.0; d],
        }
    }

    #[inline]
    fn push(&mut self, x: f64, log_sigma: &[f64]) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            let r = (self.max - x).exp();
            self.sum *= r;
            for w in &mut self.weighted {
                *w *= r;
            }
            self.max = x;
        }
        let e = (x - self.max).exp();
        self.sum += e;
        for (w, l) in self.weighted.iter_mut().zip(log_sigma) {
            *w += e * l;
        }
    }

    fn merge(mut self, mut other: Self) -> Self {
        if other.max > self.max {
            std::mem::swap(&mut self, &mut other);
        }
        if other.max == f64::NEG_INFINITY {
            return self;
        }
        let r = (other.max - self.max).exp();
        self.sum += other.sum * r;
        for (w, o) in self.weighted.iter_mut().zip(&other.weighted) {
            *w += o * r;
        }
        self
    }

    fn finish(&self, n: usize) -> (f64, Vec<f64>) {
        let nf = n as f64;
        let value = (self.max + self.sum.ln()) / nf;
        let gradient = self.weighted.iter().map(|w| w / self.sum / nf).collect();
        (value, gradient)
    }
}

fn check_q(cocycle: &OneStepCocycle, q: &[f64]) -> Result<()> {
    if q.len() != cocycle.dim() {
        return Err(Error::Input(format!(
            "q has length {}, expected {}",
            q.len(),
            cocycle.dim()
        )));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("q has non-finite entries".into()));
    }
    Ok(())
}

fn check_depth(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Input("depth must be at least 1".into()));
    }
    Ok(())
}

/// `P_n(q)` and its gradient from one streaming pass over `L_n`.
pub fn pressure(
    cocycle: &OneStepCocycle,
    q: &[f64],
    n: usize,
    cfg: &EnumConfig,
) -> Result<PressureEstimate> {
    let mut out = pressure_grid(cocycle, &[q.to_vec()], n, cfg)?;
    Ok(out.remove(0))
}

/// Pressure at every `q` of a grid, sharing one enumeration of the products.
pub fn pressure_grid(
    cocycle: &OneStepCocycle,
    grid: &[Vec<f64>],
    n: usize,
    cfg: &EnumConfig,
) -> Result<Vec<PressureEstimate>> {
    if grid.is_empty() {
        return Err(Error::Input("q grid is empty".into()));
    }
    check_depth(n)?;
    for q in grid {
        check_q(cocycle, q)?;
    }
    let d = cocycle.dim();
    let accs = fold_log_spectra(
        cocycle,
        n,
        cfg,
        || vec![GibbsAccumulator::new(d); grid.len()],
        |accs, _, ls| {
            for (acc, q) in accs.iter_mut().zip(grid) {
                let x: f64 = q.iter().zip(ls).map(|(a, b)| if *a == 0.0 { 0.0 } else { a * b }).sum();
                acc.push(x, ls);
            }
        },
        |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
    )?;
    accs.iter()
        .zip(grid)
        .map(|(acc, q)| {
            let (value, gradient) = acc.finish(n);
            Ok(PressureEstimate {
                q: QVector::new(q.clone())?,
                depth: n,
                value,
                gradient,
                upper_bound: None,
                lower_bound: None,
                cauchy_gap: None,
            })
        })
        .collect()
}

/// Which one-sided multiplicativity `ψ^q` has.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Multiplicativity {
    /// `q` nonincreasing: `ψ^q` is submultiplicative, `P_n ≥ P`.
    Sub,
    /// `q` nondecreasing: supermultiplicative, `P_n ≤ P`.
    Super,
    /// All `q_m` equal (always the case for `d = 1`): `ψ^q = |det|^{q_1}` is
    /// multiplicative and both bounds hold.
    Exact,
    Neither,
}

/// Classifies `q` by the signs of `q_m − q_{m+1}`.
pub fn multiplicativity(q: &[f64]) -> Multiplicativity {
    let sub = q.windows(2).all(|w| w[0] >= w[1]);
    let sup = q.windows(2).all(|w| w[0] <= w[1]);
    match (sub, sup) {
        (true, true) => Multiplicativity::Exact,
        (true, false) => Multiplicativity::Sub,
        (false, true) => Multiplicativity::Super,
        (false, false) => Multiplicativity::Neither,
    }
}

/// Evaluates `P_n(q)` at each depth and derives the one-sided limit bounds.
/// The returned estimate carries the value and gradient at the deepest depth.
pub fn pressure_bracket(
    cocycle: &OneStepCocycle,
    q: &[f64],
    depths: &[usize],
    cfg: &EnumConfig,
) -> Result<PressureEstimate> {
    if depths.is_empty() {
        return Err(Error::Input("depth list is empty".into()));
    }
    if depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Input("depth list must be strictly ascending".into()));
    }
    let estimates = depths
        .iter()
        .map(|&n| pressure(cocycle, q, n, cfg))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (upper, lower) = match multiplicativity(q) {
        Multiplicativity::Exact => (Some(min), Some(max)),
        Multiplicativity::Sub => (Some(min), None),
        Multiplicativity::Super => (None, Some(max)),
        Multiplicativity::Neither => (None, None),
    };
    let gap = (values.len() >= 2).then(|| (values[values.len() - 1] - values[values.len() - 2]).abs());
    let mut deepest = estimates.into_iter().next_back().expect("nonempty");
    deepest.upper_bound = upper;
    deepest.lower_bound = lower;
    deepest.cauchy_gap = gap;
    Ok(deepest)
}

/// Value, gradient and Hessian of `P_n` at one `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct CloudEvaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `d × d` Gibbs covariance of `L_I`, divided by `n`.
    pub hessian: Vec<f64>,
}

/// The `k^n` vectors `log σ(A_I)` of one depth, kept in lexicographic word
/// order so `P_n` can be re-evaluated at many `q` without new products.
#[derive(Clone, Debug)]
pub struct LogSpectrumCloud {
    dim: usize,
    depth: usize,
    alphabet: usize,
    points: Vec<f64>,
}

impl LogSpectrumCloud {
    pub fn build(cocycle: &OneStepCocycle, n: usize, cfg: &EnumConfig) -> Result<Self> {
        check_depth(n)?;
        let points = fold_log_spectra(
            cocycle,
            n,
            cfg,
            Vec::new,
            |acc: &mut Vec<f64>, _, ls| acc.extend_from_slice(ls),
            |mut a, b| {
                a.extend(b);
                a
            },
        )?;
        Ok(Self {
            dim: cocycle.dim(),
            depth: n,
            alphabet: cocycle.k(),
            points,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Raw `log σ(A_I)` of the `i`-th word.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// `(1/n) log σ(A_I)` for every word.
    pub fn exponents(&self) -> Vec<Vec<f64>> {
        let nf = self.depth as f64;
        self.points
            .chunks(self.dim)
            .map(|p| p.iter().map(|v| v / nf).collect())
            .collect()
    }

    fn exponent_of(&self, q: &[f64], p: &[f64]) -> f64 {
        q.iter().zip(p).map(|(a, b)| if *a == 0.0 { 0.0 } else { a * b }).sum()
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        let max = self
            .points
            .chunks(self.dim)
            .map(|p| self.exponent_of(q, p))
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = self
            .points
            .chunks(self.dim)
            .map(|p| (self.exponent_of(q, p) - max).exp())
            .sum();
        (max + sum.ln()) / self.depth as f64
    }

    pub fn evaluate(&self, q: &[f64]) -> CloudEvaluation {
        let d = self.dim;
        let nf = self.depth as f64;
        let xs: Vec<f64> = self.points.chunks(d).map(|p| self.exponent_of(q, p)).collect();
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
        let sum: f64 = weights.iter().sum();
        let mut mean = vec![0.0; d];
        for (w, p) in weights.iter().zip(self.points.chunks(d)) {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += w * v;
            }
        }
        for m in &mut mean {
            *m /= sum;
        }
        let mut hessian = vec![0.0; d * d];
        for (w, p) in weights.iter().zip(self.points.chunks(d)) {
            for i in 0..d {
                let di = p[i] - mean[i];
                for j in 0..d {
                    hessian[i * d + j] += w * di * (p[j] - mean[j]);
                }
            }
        }
        for h in &mut hessian {
            *h /= sum * nf;
        }
        CloudEvaluation {
            value: (max + sum.ln()) / nf,
            gradient: mean.iter().map(|m| m / nf).collect(),
            hessian,
        }
    }
}
