//! Seeded sampling and the replication harness behind the convergence studies.
//!
//! Replication `r` of a study draws from `ChaCha8Rng::seed_from_u64(master_seed)`
//! switched to stream `r` (boxplot studies use stream `(n_index << 32) | r`),
//! so every replication owns an independent, reproducible stream and results
//! do not depend on scheduling. Records are emitted in canonical order
//! `(alpha, k, rep, component)` after all replications complete.

use crate::error::{Error, Result};
use crate::estimation::{
    expectile_from_estimates, tail_estimates, weissman_quantile, Norm, SampleMatrix,
};
use crate::expectile::{solve_multivariate_expectile, Dependence, ExpectileProblem};
use crate::margins::MarginSpec;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

/// Residual tolerance for exact reference values.
pub const REFERENCE_TOL: f64 = 1e-10;
const REFERENCE_MAX_ITER: usize = 200;

/// Generator for `stream` under `master_seed`.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Draw `n` rows by inverse transform. Comonotonic rows share one uniform.
pub fn draw_sample_with<R: Rng + ?Sized>(
    margins: &[MarginSpec],
    dependence: Dependence,
    n: usize,
    rng: &mut R,
) -> Result<SampleMatrix> {
    let d = margins.len();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        match dependence {
            Dependence::Independent => {
                for m in margins {
                    let u: f64 = rng.sample(Open01);
                    data.push(m.inverse_transform_sample(u)?);
                }
            }
            Dependence::Comonotonic => {
                let u: f64 = rng.sample(Open01);
                for m in margins {
                    data.push(m.inverse_transform_sample(u)?);
                }
            }
        }
    }
    SampleMatrix::from_row_major(n, d, data)
}

/// Draw `n` rows using stream 0 of `seed`.
pub fn draw_sample(
    margins: &[MarginSpec],
    dependence: Dependence,
    n: usize,
    seed: u64,
) -> Result<SampleMatrix> {
    draw_sample_with(margins, dependence, n, &mut stream_rng(seed, 0))
}

/// Exact expectile at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub alpha: f64,
    pub point: Vec<f64>,
}

/// Exact solutions of `template` at every level of `alpha_grid`.
pub fn exact_reference_curve(
    template: &ExpectileProblem,
    alpha_grid: &[f64],
) -> Result<Vec<ReferencePoint>> {
    alpha_grid
        .iter()
        .map(|&alpha| {
            let at_level = |source: Error| Error::AtLevel {
                alpha,
                source: Box::new(source),
            };
            let problem = template.with_alpha(alpha).map_err(at_level)?;
            let sol = solve_multivariate_expectile(&problem, REFERENCE_TOL, REFERENCE_MAX_ITER)
                .map_err(at_level)?;
            Ok(ReferencePoint {
                alpha,
                point: sol.point,
            })
        })
        .collect()
}

fn default_replications() -> usize {
    100
}

/// Configuration of a `k`-sweep study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub margins: Vec<MarginSpec>,
    pub dependence: Dependence,
    pub alpha_grid: Vec<f64>,
    /// Empty means the default grid `{n/200, n/100, n/50, n/20}`.
    #[serde(default)]
    pub k_grid: Vec<usize>,
    pub n: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub norm: Norm,
}

/// Default `k` grid `{n/200, n/100, n/50, n/20}`.
pub fn default_k_grid(n: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = [200, 100, 50, 20]
        .iter()
        .map(|div| (n / div).max(2))
        .collect();
    grid.dedup();
    grid
}

impl ExperimentConfig {
    /// The `k` grid actually used.
    pub fn effective_k_grid(&self) -> Vec<usize> {
        if self.k_grid.is_empty() {
            default_k_grid(self.n)
        } else {
            self.k_grid.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.margins.is_empty() {
            return Err(Error::InvalidParameter("margins must be nonempty".into()));
        }
        if self.alpha_grid.is_empty() {
            return Err(Error::InvalidParameter(
                "alpha_grid must be nonempty".into(),
            ));
        }
        if let Some(&a) = self.alpha_grid.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::ProbabilityDomain(a));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter(
                "replications must be positive".into(),
            ));
        }
        let grid = self.effective_k_grid();
        let k_max = grid.iter().copied().max().unwrap_or(0);
        if let Some(&k) = grid.iter().find(|k| **k < 2) {
            return Err(Error::Bounds { k, n: self.n });
        }
        if self.n < k_max + 1 {
            return Err(Error::Bounds {
                k: k_max,
                n: self.n,
            });
        }
        Ok(())
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub alpha: f64,
    pub k: usize,
    pub n: usize,
    pub rep: usize,
    /// 1-based component index.
    pub component: usize,
    pub exact: f64,
    pub estimate: f64,
    pub ratio: f64,
    pub error_flag: bool,
}

/// Estimates of one replication: `[k_index][alpha_index]`, `None` on failure.
type ReplicationEstimates = Vec<Vec<Option<Vec<f64>>>>;

fn replicate_sweep(
    config: &ExperimentConfig,
    k_grid: &[usize],
    rep: usize,
) -> Result<ReplicationEstimates> {
    let mut rng = stream_rng(config.master_seed, rep as u64);
    let sample = draw_sample_with(&config.margins, config.dependence, config.n, &mut rng)?;
    let first = sample.column(0);
    k_grid
        .iter()
        .map(|&k| match tail_estimates(&sample, k, config.norm) {
            Ok(est) => config
                .alpha_grid
                .iter()
                .map(|&alpha| {
                    let var = weissman_quantile(&first, k, est.gamma_hat, alpha)?;
                    Ok(Some(expectile_from_estimates(&est, var, config.dependence)))
                })
                .collect(),
            Err(Error::TailTooHeavy { .. } | Error::Domain(_)) => {
                Ok(vec![None; config.alpha_grid.len()])
            }
            Err(e) => Err(e),
        })
        .collect()
}

/// Run the study: exact L1-expectiles per level, estimates per
/// `(k, level, replication)`. Replications run on the current rayon pool.
///
/// Replications whose estimate fails (`γ̂ >= 1` or a nonpositive threshold)
/// yield `NaN` estimates with `error_flag` set.
pub fn run_k_sweep(config: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    let k_grid = config.effective_k_grid();
    let template = ExpectileProblem::l1(
        config.margins.clone(),
        config.dependence,
        config.alpha_grid[0],
    )?;
    let exact = exact_reference_curve(&template, &config.alpha_grid)?;
    let per_rep: Vec<ReplicationEstimates> = (0..config.replications)
        .into_par_iter()
        .map(|rep| replicate_sweep(config, &k_grid, rep))
        .collect::<Result<_>>()?;

    let d = config.margins.len();
    let mut records =
        Vec::with_capacity(config.alpha_grid.len() * k_grid.len() * config.replications * d);
    for (ai, reference) in exact.iter().enumerate() {
        for (ki, &k) in k_grid.iter().enumerate() {
            for (rep, estimates) in per_rep.iter().enumerate() {
                let estimate = estimates[ki][ai].as_deref();
                for j in 0..d {
                    let exact = reference.point[j];
                    let est = estimate.map_or(f64::NAN, |e| e[j]);
                    let ratio = if exact.is_finite() && exact != 0.0 {
                        est / exact
                    } else {
                        f64::NAN
                    };
                    records.push(ExperimentRecord {
                        alpha: reference.alpha,
                        k,
                        n: config.n,
                        rep,
                        component: j + 1,
                        exact,
                        estimate: est,
                        ratio,
                        error_flag: estimate.is_none(),
                    });
                }
            }
        }
    }
    Ok(records)
}

/// Header of sweep tables.
pub const SWEEP_HEADER: &str = "alpha,k,n,rep,component,exact,estimate,ratio,error_flag";

/// Write sweep records as CSV; floats use shortest round-trip formatting.
pub fn write_sweep_csv<W: Write>(records: &[ExperimentRecord], mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.alpha,
            r.k,
            r.n,
            r.rep,
            r.component,
            r.exact,
            r.estimate,
            r.ratio,
            u8::from(r.error_flag)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// How the boxplot study picks `k` for each sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KRule {
    /// `k = round(fraction * n)`.
    Fraction(f64),
    Fixed(usize),
    /// Explicit `n → k` table.
    Table(BTreeMap<usize, usize>),
}

impl KRule {
    pub fn k_for(&self, n: usize) -> Result<usize> {
        let k = match self {
            KRule::Fraction(f) => {
                if !(*f > 0.0 && *f < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "k fraction must be in (0, 1), got {f}"
                    )));
                }
                (f * n as f64).round() as usize
            }
            KRule::Fixed(k) => *k,
            KRule::Table(t) => *t.get(&n).ok_or_else(|| {
                Error::InvalidParameter(format!("k table has no entry for n={n}"))
            })?,
        };
        if k < 2 || k >= n {
            return Err(Error::Bounds { k, n });
        }
        Ok(k)
    }
}

/// Configuration of a `ĉ` boxplot study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxplotConfig {
    pub margins: Vec<MarginSpec>,
    pub dependence: Dependence,
    pub n_grid: Vec<usize>,
    pub k_rule: KRule,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub norm: Norm,
}

/// One row of a boxplot table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotRecord {
    pub n: usize,
    pub k: usize,
    pub rep: usize,
    /// 1-based component index.
    pub component: usize,
    pub c_hat: f64,
    pub gamma_hat: f64,
    pub error_flag: bool,
}

/// Distribution of `ĉ` and `γ̂` over replications for each sample size.
pub fn run_boxplot_study(config: &BoxplotConfig) -> Result<Vec<BoxplotRecord>> {
    if config.margins.is_empty() || config.n_grid.is_empty() || config.replications == 0 {
        return Err(Error::InvalidParameter(
            "margins, n_grid and replications must be nonempty".into(),
        ));
    }
    let ks = config
        .n_grid
        .iter()
        .map(|&n| config.k_rule.k_for(n))
        .collect::<Result<Vec<usize>>>()?;
    let d = config.margins.len();
    let jobs: Vec<(usize, usize)> = (0..config.n_grid.len())
        .flat_map(|ni| (0..config.replications).map(move |rep| (ni, rep)))
        .collect();
    let results: Vec<Vec<BoxplotRecord>> = jobs
        .into_par_iter()
        .map(|(ni, rep)| {
            let (n, k) = (config.n_grid[ni], ks[ni]);
            let mut rng = stream_rng(config.master_seed, ((ni as u64) << 32) | rep as u64);
            let sample = draw_sample_with(&config.margins, config.dependence, n, &mut rng)?;
            let est = match tail_estimates(&sample, k, config.norm) {
                Ok(est) => Some(est),
                Err(Error::TailTooHeavy { .. } | Error::Domain(_)) => None,
                Err(e) => return Err(e),
            };
            Ok((0..d)
                .map(|j| BoxplotRecord {
                    n,
                    k,
                    rep,
                    component: j + 1,
                    c_hat: est.as_ref().map_or(f64::NAN, |e| e.c_hat[j]),
                    gamma_hat: est.as_ref().map_or(f64::NAN, |e| e.gamma_hat),
                    error_flag: est.is_none(),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}

/// Header of boxplot tables.
pub const BOXPLOT_HEADER: &str = "n,k,rep,component,c_hat,gamma_hat,error_flag";

pub fn write_boxplot_csv<W: Write>(records: &[BoxplotRecord], mut out: W) -> Result<()> {
    writeln!(out, "{BOXPLOT_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            r.k,
            r.rep,
            r.component,
            r.c_hat,
            r.gamma_hat,
            u8::from(r.error_flag)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Median of the finite values, `NaN` if there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
