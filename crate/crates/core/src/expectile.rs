//! First-order optimality system of the Σ-expectile and its exact solution.
//!
//! For weights `π` the expectile `x` solves, for every `k`,
//!
//! ```text
//! π_kk l_k(x_k) + Σ_{i≠k} π_ki l_ik(x_i, x_k) = 0
//! l_ik(x_i, x_k) = α E[(X_i - x_i)_+ 1{X_k > x_k}] - (1 - α) E[(x_i - X_i)_+ 1{X_k < x_k}]
//! ```
//!
//! Pair terms have closed forms for independent and comonotonic vectors,
//! which are the only dependence structures solved exactly here.

use crate::error::{Error, Result};
use crate::margins::MarginSpec;
use crate::roots::root_decreasing;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Symmetric non-negative weight matrix `Σ = (π_ij)` with positive diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct WeightMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl WeightMatrix {
    /// All-ones weights (the L1-expectile).
    pub fn ones(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![1.0; dim * dim],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("weight matrix is empty".into()));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParameter(
                "weight matrix must be square".into(),
            ));
        }
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        let w = Self { dim, entries };
        for i in 0..dim {
            if !(w.get(i, i) > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "diagonal weight {i} must be positive"
                )));
            }
            for j in 0..dim {
                let v = w.get(i, j);
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "weight ({i},{j}) must be non-negative"
                    )));
                }
                if v != w.get(j, i) {
                    return Err(Error::InvalidParameter(
                        "weight matrix must be symmetric".into(),
                    ));
                }
            }
        }
        Ok(w)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn is_all_ones(&self) -> bool {
        self.entries.iter().all(|&v| v == 1.0)
    }
}

impl TryFrom<Vec<Vec<f64>>> for WeightMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<WeightMatrix> for Vec<Vec<f64>> {
    fn from(w: WeightMatrix) -> Self {
        w.entries.chunks(w.dim).map(<[f64]>::to_vec).collect()
    }
}

/// Dependence structures with closed-form pair terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dependence {
    Independent,
    Comonotonic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawProblem {
    margins: Vec<MarginSpec>,
    #[serde(default)]
    weights: Option<WeightMatrix>,
    dependence: Dependence,
    alpha: f64,
}

/// Margins, weights, dependence structure and level.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawProblem", into = "RawProblem")]
pub struct ExpectileProblem {
    margins: Vec<MarginSpec>,
    weights: WeightMatrix,
    dependence: Dependence,
    alpha: f64,
}

impl TryFrom<RawProblem> for ExpectileProblem {
    type Error = Error;
    fn try_from(raw: RawProblem) -> Result<Self> {
        let d = raw.margins.len();
        let weights = raw.weights.unwrap_or_else(|| WeightMatrix::ones(d));
        Self::new(raw.margins, weights, raw.dependence, raw.alpha)
    }
}

impl From<ExpectileProblem> for RawProblem {
    fn from(p: ExpectileProblem) -> Self {
        RawProblem {
            margins: p.margins,
            weights: Some(p.weights),
            dependence: p.dependence,
            alpha: p.alpha,
        }
    }
}

impl ExpectileProblem {
    pub fn new(
        margins: Vec<MarginSpec>,
        weights: WeightMatrix,
        dependence: Dependence,
        alpha: f64,
    ) -> Result<Self> {
        if margins.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one margin is required".into(),
            ));
        }
        if weights.dim() != margins.len() {
            return Err(Error::InvalidParameter(format!(
                "weight matrix is {0}x{0} but there are {1} margins",
                weights.dim(),
                margins.len()
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::ProbabilityDomain(alpha));
        }
        Ok(Self {
            margins,
            weights,
            dependence,
            alpha,
        })
    }

    /// L1-expectile problem (all weights equal to one).
    pub fn l1(margins: Vec<MarginSpec>, dependence: Dependence, alpha: f64) -> Result<Self> {
        let w = WeightMatrix::ones(margins.len());
        Self::new(margins, w, dependence, alpha)
    }

    pub fn dim(&self) -> usize {
        self.margins.len()
    }

    pub fn margins(&self) -> &[MarginSpec] {
        &self.margins
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn dependence(&self) -> Dependence {
        self.dependence
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(
            self.margins.clone(),
            self.weights.clone(),
            self.dependence,
            alpha,
        )
    }

    pub fn with_margins(&self, margins: Vec<MarginSpec>) -> Result<Self> {
        Self::new(margins, self.weights.clone(), self.dependence, self.alpha)
    }
}

/// Solver output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectileSolution {
    pub point: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// `l_ij` for independent components:
/// `α P(X_j > x_j) E[(X_i - x_i)_+] - (1 - α) P(X_j <= x_j) E[(x_i - X_i)_+]`.
pub fn pair_term_independent(
    alpha: f64,
    m_i: &MarginSpec,
    m_j: &MarginSpec,
    x_i: f64,
    x_j: f64,
) -> f64 {
    alpha * m_j.survival(x_j) * m_i.upper_partial_moment(x_i)
        - (1.0 - alpha) * m_j.cdf(x_j) * m_i.lower_partial_moment(x_i)
}

/// `μ_ij = F_i^←(F_j(x_j))`.
pub fn pseudo_inverse_match(m_i: &MarginSpec, m_j: &MarginSpec, x_j: f64) -> f64 {
    m_i.pseudo_inverse_match(m_j, x_j)
}

/// `l_ij` for comonotonic components.
pub fn pair_term_comonotonic(
    alpha: f64,
    m_i: &MarginSpec,
    m_j: &MarginSpec,
    x_i: f64,
    x_j: f64,
) -> f64 {
    let mu = pseudo_inverse_match(m_i, m_j, x_j);
    let upper = m_j.survival(x_j) * (mu - x_i).max(0.0) + m_i.upper_partial_moment(x_i.max(mu));
    let lower = m_j.cdf(x_j) * (x_i - mu).max(0.0) + m_i.lower_partial_moment(x_i.min(mu));
    alpha * upper - (1.0 - alpha) * lower
}

/// `l_i(x) = α E[(X - x)_+] - (1 - α) E[(x - X)_+]`.
pub fn self_term(alpha: f64, m: &MarginSpec, x: f64) -> f64 {
    alpha * m.upper_partial_moment(x) - (1.0 - alpha) * m.lower_partial_moment(x)
}

fn pair_term(
    dep: Dependence,
    alpha: f64,
    m_i: &MarginSpec,
    m_j: &MarginSpec,
    x_i: f64,
    x_j: f64,
) -> f64 {
    match dep {
        Dependence::Independent => pair_term_independent(alpha, m_i, m_j, x_i, x_j),
        Dependence::Comonotonic => pair_term_comonotonic(alpha, m_i, m_j, x_i, x_j),
    }
}

fn residual_component(problem: &ExpectileProblem, x: &[f64], k: usize) -> f64 {
    let (alpha, m, w) = (problem.alpha, &problem.margins, &problem.weights);
    let mut r = w.get(k, k) * self_term(alpha, &m[k], x[k]);
    for i in 0..x.len() {
        if i != k {
            let wki = w.get(k, i);
            if wki != 0.0 {
                r += wki * pair_term(problem.dependence, alpha, &m[i], &m[k], x[i], x[k]);
            }
        }
    }
    r
}

/// Residual of the optimality system at `x`.
pub fn system_residual(problem: &ExpectileProblem, x: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), problem.dim(), "point dimension mismatch");
    (0..x.len())
        .map(|k| residual_component(problem, x, k))
        .collect()
}

/// Max-norm of the residual with component `k` divided by `|x_k| P(X_k > x_k) + 1`.
pub fn scaled_residual_norm(problem: &ExpectileProblem, x: &[f64]) -> f64 {
    system_residual(problem, x)
        .iter()
        .zip(x)
        .zip(&problem.margins)
        .map(|((r, &xk), m)| (r / (xk.abs() * m.survival(xk) + 1.0)).abs())
        .try_fold(0.0_f64, |acc, v| v.is_finite().then(|| acc.max(v)))
        .unwrap_or(f64::INFINITY)
}

/// Univariate expectile: the zero of [`self_term`].
///
/// `tol` is a relative tolerance on the returned point.
pub fn univariate_expectile(m: &MarginSpec, alpha: f64, tol: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::ProbabilityDomain(alpha));
    }
    let mean = m.mean();
    let step = 0.5 * (mean.abs() + m.scale_multiplier());
    Ok(root_decreasing(|x| self_term(alpha, m, x), mean, step, tol))
}

fn jacobian(problem: &ExpectileProblem, x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let mut jac = DMatrix::zeros(d, d);
    let mut probe = x.to_vec();
    for i in 0..d {
        let h = 1e-6 * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let up = system_residual(problem, &probe);
        probe[i] = x[i] - h;
        let down = system_residual(problem, &probe);
        probe[i] = x[i];
        for k in 0..d {
            jac[(k, i)] = (up[k] - down[k]) / (2.0 * h);
        }
    }
    jac
}

/// One Gauss–Seidel sweep solving each equation in its own coordinate.
fn gauss_seidel_sweep(problem: &ExpectileProblem, x: &mut [f64]) {
    for k in 0..x.len() {
        let mut probe = x.to_vec();
        let step = 0.1 * (1.0 + x[k].abs());
        x[k] = root_decreasing(
            |v| {
                probe[k] = v;
                residual_component(problem, &probe, k)
            },
            x[k],
            step,
            1e-15,
        );
    }
}

/// Comonotonic candidate on the common-level curve `F_i(x_i) = F_j(x_j)`.
///
/// On this curve all indicators coincide, every pair term collapses to a self
/// term and the first equation becomes a regular scalar root along the curve. The
/// full system is degenerate there (its Jacobian has rank one), so Newton
/// alone only reaches about the square root of machine precision.
fn common_level_candidate(problem: &ExpectileProblem) -> Option<Vec<f64>> {
    let margins = &problem.margins;
    // A reference with unbounded lower support keeps every coordinate finite.
    let r = margins
        .iter()
        .position(|m| m.support_lower() == f64::NEG_INFINITY)
        .unwrap_or(0);
    let reference = &margins[r];
    let curve = |t: f64| -> Vec<f64> {
        margins
            .iter()
            .enumerate()
            .map(|(i, m)| {
                if i == r {
                    t
                } else {
                    m.pseudo_inverse_match(reference, t)
                }
            })
            .collect()
    };
    let start = univariate_expectile(reference, problem.alpha, 1e-14).ok()?;
    let step = 0.5 * (start.abs() + reference.scale_multiplier());
    let t = root_decreasing(
        |t| {
            curve(t)
                .iter()
                .zip(margins)
                .enumerate()
                .map(|(i, (&x, m))| problem.weights.get(0, i) * self_term(problem.alpha, m, x))
                .sum()
        },
        start,
        step,
        1e-15,
    );
    let x = curve(t);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Solve the optimality system by damped Newton with a finite-difference
/// Jacobian, falling back to Gauss–Seidel bisection sweeps when Newton stalls.
/// Comonotonic problems first try the common-level curve, which solves every
/// all-ones weight matrix exactly.
///
/// Converged when the scaled residual max-norm (see [`scaled_residual_norm`])
/// is at most `tol`.
pub fn solve_multivariate_expectile(
    problem: &ExpectileProblem,
    tol: f64,
    max_iter: usize,
) -> Result<ExpectileSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut x = problem
        .margins
        .iter()
        .map(|m| univariate_expectile(m, problem.alpha, 1e-14))
        .collect::<Result<Vec<f64>>>()?;
    let mut merit = scaled_residual_norm(problem, &x);
    if problem.dependence == Dependence::Comonotonic {
        if let Some(candidate) = common_level_candidate(problem) {
            let m = scaled_residual_norm(problem, &candidate);
            if m <= tol {
                return Ok(ExpectileSolution {
                    point: candidate,
                    residual_norm: m,
                    iterations: 0,
                });
            }
            if m < merit {
                x = candidate;
                merit = m;
            }
        }
    }
    let mut iterations = 0;
    // Newton continues past `tol` while the merit keeps falling.
    while iterations < max_iter && merit > 0.0 {
        iterations += 1;
        let r = DVector::from_vec(system_residual(problem, &x));
        let step = jacobian(problem, &x).lu().solve(&(-r));
        let mut improved = false;
        if let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
            let mut lambda = 1.0;
            for _ in 0..30 {
                let trial: Vec<f64> = x
                    .iter()
                    .zip(step.iter())
                    .map(|(xi, si)| xi + lambda * si)
                    .collect();
                let m = scaled_residual_norm(problem, &trial);
                if m < merit {
                    x = trial;
                    merit = m;
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
        }
        if !improved {
            if merit <= tol {
                break;
            }
            gauss_seidel_sweep(problem, &mut x);
            let m = scaled_residual_norm(problem, &x);
            if !(m < merit) && m > tol {
                merit = merit.min(m);
                continue;
            }
            merit = m;
        }
    }
    if merit <= tol {
        Ok(ExpectileSolution {
            point: x,
            residual_norm: merit,
            iterations,
        })
    } else {
        Err(Error::NonConvergence {
            best: x,
            residual: merit,
            iterations,
        })
    }
}
