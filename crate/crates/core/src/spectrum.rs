//! Legendre spectrum `S_n(α) = inf_q {P_n(q) − ⟨q, α⟩}` at a fixed depth and
//! estimates of the exponent range from pressure gradients.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ConvexHull;
use crate::matrix::QVector;
use crate::measures::ExponentVector;
use crate::pressure::{pressure_grid, LogSpectrumCloud};
use crate::shift::{EnumConfig, OneStepCocycle};

/// Affine-dimension tolerance used for exponent hulls.
const HULL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumStatus {
    /// Minimizer found and `α` is well inside the depth-`n` exponent hull.
    Interior,
    /// Minimizer found close to (or escaping towards) the hull boundary.
    BoundarySuspect,
    /// `f(q)` keeps decreasing at a definite rate: `α` lies outside the hull.
    Infeasible,
}

/// One evaluated point of the spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub alpha: ExponentVector,
    /// `P_n(q*) − ⟨q*, α⟩` at the returned minimizer.
    pub value: f64,
    pub minimizer_q: QVector,
    pub status: SpectrumStatus,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Distance from `α` to the relative boundary of the exponent hull;
    /// `None` when the hull was not built (`d > 3`).
    pub boundary_distance: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumOptions {
    /// `‖q‖` beyond which the minimization is declared unbounded or boundary.
    pub q_max: f64,
    pub gradient_tol: f64,
    /// Decrease of `f` per unit of `q` movement separating infeasible from
    /// boundary-suspect once `‖q‖ > q_max`.
    pub rate_cutoff: f64,
    /// Points closer than this to the hull boundary are boundary-suspect.
    pub boundary_band: f64,
    pub max_iterations: usize,
    /// Largest step length in `q` per iteration.
    pub max_step: f64,
    /// Start each curve point from the previous interior minimizer.
    pub warm_start: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            q_max: 64.0,
            gradient_tol: 1e-7,
            rate_cutoff: 1e-6,
            boundary_band: 0.05,
            max_iterations: 1000,
            max_step: 4.0,
            warm_start: true,
        }
    }
}

/// Minimizes `P_n(q) − ⟨q, α⟩` against a cached depth-`n` cloud.
#[derive(Clone, Debug)]
pub struct SpectrumSolver {
    cloud: LogSpectrumCloud,
    hull: ConvexHull,
    options: SpectrumOptions,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl SpectrumSolver {
    pub fn new(cocycle: &OneStepCocycle, n: usize, cfg: &EnumConfig) -> Result<Self> {
        Self::with_options(cocycle, n, cfg, SpectrumOptions::default())
    }

    pub fn with_options(
        cocycle: &OneStepCocycle,
        n: usize,
        cfg: &EnumConfig,
        options: SpectrumOptions,
    ) -> Result<Self> {
        let cloud = LogSpectrumCloud::build(cocycle, n, cfg)?;
        let hull = ConvexHull::new(&cloud.exponents(), HULL_TOL);
        Ok(Self { cloud, hull, options })
    }

    pub fn cloud(&self) -> &LogSpectrumCloud {
        &self.cloud
    }

    /// Hull of the exponents `(1/n) log σ(A_I)` over all words of the depth.
    pub fn exponent_hull(&self) -> &ConvexHull {
        &self.hull
    }

    pub fn options(&self) -> &SpectrumOptions {
        &self.options
    }

    fn objective(&self, q: &[f64], alpha: &[f64]) -> f64 {
        self.cloud.value(q) - dot(q, alpha)
    }

    pub fn point(&self, alpha: &ExponentVector, q_init: &[f64]) -> Result<SpectrumPoint> {
        let d = self.cloud.dim();
        if alpha.len() != d {
            return Err(Error::Input(format!(
                "alpha has length {}, expected {d}",
                alpha.len()
            )));
        }
        let opts = &self.options;
        let mut q = if q_init.len() == d && q_init.iter().all(|v| v.is_finite()) {
            q_init.to_vec()
        } else {
            vec![0.0; d]
        };
        let boundary_distance = self.hull.boundary_distance(alpha);

        let finish = |q: Vec<f64>, value: f64, status, iterations, gradient_norm| -> Result<SpectrumPoint> {
            Ok(SpectrumPoint {
                alpha: alpha.clone(),
                value,
                minimizer_q: QVector::new(q)?,
                status,
                iterations,
                gradient_norm,
                boundary_distance,
            })
        };
        let classify = |converged: bool| match (converged, boundary_distance) {
            (true, Some(dist)) if dist < opts.boundary_band => SpectrumStatus::BoundarySuspect,
            (true, _) => SpectrumStatus::Interior,
            (false, _) => SpectrumStatus::BoundarySuspect,
        };

        let mut ev = self.cloud.evaluate(&q);
        let mut f = ev.value - dot(&q, alpha);
        for it in 0..opts.max_iterations {
            let g: Vec<f64> = ev.gradient.iter().zip(alpha.iter()).map(|(a, b)| a - b).collect();
            let gn = norm(&g);
            if gn <= opts.gradient_tol {
                return finish(q, f, classify(true), it, gn);
            }

            // Newton direction on the regularized Hessian, else steepest descent
            let trace: f64 = (0..d).map(|i| ev.hessian[i * d + i]).sum();
            let reg = 1e-10 * (1.0 + trace);
            let h = DMatrix::from_fn(d, d, |i, j| ev.hessian[i * d + j] + if i == j { reg } else { 0.0 });
            let mut dir: Vec<f64> = match h.cholesky() {
                Some(ch) => ch.solve(&DVector::from_column_slice(&g)).iter().map(|v| -v).collect(),
                None => g.iter().map(|v| -v).collect(),
            };
            if !dir.iter().all(|v| v.is_finite()) || dot(&dir, &g) >= 0.0 {
                dir = g.iter().map(|v| -v).collect();
            }
            let len = norm(&dir);
            if len > opts.max_step {
                for v in &mut dir {
                    *v *= opts.max_step / len;
                }
            }

            let slope = dot(&g, &dir);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let cand: Vec<f64> = q.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                let fc = self.objective(&cand, alpha);
                if fc <= f + 1e-4 * t * slope {
                    accepted = Some((cand, fc));
                    break;
                }
                t *= 0.5;
            }
            let Some((q_new, f_new)) = accepted else {
                // no representable decrease left
                let converged = gn <= 1e-5;
                return finish(q, f, classify(converged), it, gn);
            };

            if norm(&q_new) > opts.q_max {
                let moved: f64 = q_new.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let rate = (f - f_new) / moved;
                let status = if rate >= opts.rate_cutoff {
                    SpectrumStatus::Infeasible
                } else {
                    SpectrumStatus::BoundarySuspect
                };
                let g_new: Vec<f64> = self
                    .cloud
                    .evaluate(&q_new)
                    .gradient
                    .iter()
                    .zip(alpha.iter())
                    .map(|(a, b)| a - b)
                    .collect();
                return finish(q_new, f_new, status, it + 1, norm(&g_new));
            }
            q = q_new;
            ev = self.cloud.evaluate(&q);
            f = ev.value - dot(&q, alpha);
        }
        let g: Vec<f64> = ev.gradient.iter().zip(alpha.iter()).map(|(a, b)| a - b).collect();
        let gn = norm(&g);
        finish(q, f, classify(gn <= 1e-5), opts.max_iterations, gn)
    }

    /// Evaluates a list of exponent vectors in order. With warm starts each
    /// point starts from the last interior minimizer; otherwise points are
    /// solved independently in parallel.
    pub fn curve(&self, alphas: &[ExponentVector]) -> Result<Vec<SpectrumPoint>> {
        if alphas.is_empty() {
            return Err(Error::Input("alpha list is empty".into()));
        }
        let zero = vec![0.0; self.cloud.dim()];
        if !self.options.warm_start {
            return alphas.par_iter().map(|a| self.point(a, &zero)).collect();
        }
        let mut out = Vec::with_capacity(alphas.len());
        let mut start = zero.clone();
        for a in alphas {
            let p = self.point(a, &start)?;
            if p.status == SpectrumStatus::Interior {
                start = p.minimizer_q.to_vec();
            }
            out.push(p);
        }
        Ok(out)
    }
}

/// `S_n(α)` from a single start point.
pub fn spectrum_point(
    cocycle: &OneStepCocycle,
    alpha: &ExponentVector,
    n: usize,
    q_init: &[f64],
    cfg: &EnumConfig,
) -> Result<SpectrumPoint> {
    SpectrumSolver::new(cocycle, n, cfg)?.point(alpha, q_init)
}

pub fn spectrum_curve(
    cocycle: &OneStepCocycle,
    alphas: &[ExponentVector],
    n: usize,
    cfg: &EnumConfig,
) -> Result<Vec<SpectrumPoint>> {
    SpectrumSolver::new(cocycle, n, cfg)?.curve(alphas)
}

/// Convex hull of pressure gradients over a probe grid in `q`.
#[derive(Clone, Debug, Serialize)]
pub struct OmegaEstimate {
    pub vertices: Vec<ExponentVector>,
    pub depth: usize,
    pub q_samples: Vec<Vec<f64>>,
    /// Affine dimension of the gradient set.
    pub affine_dim: usize,
    /// `false` when the vertices are the raw gradient cloud (`d > 3`).
    pub exact: bool,
    #[serde(skip)]
    hull: ConvexHull,
}

impl OmegaEstimate {
    pub fn hull(&self) -> &ConvexHull {
        &self.hull
    }
}

/// The origin, `±radius` along each axis and `count` directions on the
/// sphere of radius `radius`.
pub fn probe_grid(d: usize, radius: f64, count: usize) -> Vec<Vec<f64>> {
    let mut grid = vec![vec![0.0; d]];
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut q = vec![0.0; d];
            q[i] = s * radius;
            grid.push(q);
        }
    }
    match d {
        1 => {
            // the sphere is {±radius}; fill the segment instead
            for i in 0..count {
                let t = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.5 };
                grid.push(vec![radius * (2.0 * t - 1.0)]);
            }
        }
        2 => {
            for i in 0..count {
                let a = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                grid.push(vec![radius * a.cos(), radius * a.sin()]);
            }
        }
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for i in 0..count {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                let r = (1.0 - z * z).sqrt();
                let a = golden * i as f64;
                grid.push(vec![radius * r * a.cos(), radius * r * a.sin(), radius * z]);
            }
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x0e9a);
            for _ in 0..count {
                let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let len = norm(&v).max(f64::MIN_POSITIVE);
                grid.push(v.iter().map(|x| radius * x / len).collect());
            }
        }
    }
    grid
}

/// Inner approximation of the depth-`n` exponent hull by pressure gradients.
pub fn estimate_omega(
    cocycle: &OneStepCocycle,
    n: usize,
    probe_radius: f64,
    probe_count: usize,
    cfg: &EnumConfig,
) -> Result<OmegaEstimate> {
    if !probe_radius.is_finite() || probe_radius <= 0.0 {
        return Err(Error::Input("probe radius must be positive".into()));
    }
    let grid = probe_grid(cocycle.dim(), probe_radius, probe_count);
    let estimates = pressure_grid(cocycle, &grid, n, cfg)?;
    let gradients: Vec<Vec<f64>> = estimates.into_iter().map(|e| e.gradient).collect();
    let hull = ConvexHull::new(&gradients, HULL_TOL);
    let vertices = hull
        .vertices()
        .iter()
        .map(|v| {
            let mut v = v.clone();
            v.sort_by(|a, b| b.total_cmp(a));
            ExponentVector::new(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OmegaEstimate {
        vertices,
        depth: n,
        q_samples: grid,
        affine_dim: hull.affine_dim(),
        exact: hull.is_exact(),
        hull,
    })
}
