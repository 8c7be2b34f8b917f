//! Tail estimators from samples: Hill, tail equivalence coefficients,
//! Weissman quantiles and extreme L1-expectiles.
//!
//! All estimators use the same number `k` of upper order statistics.

use crate::error::{Error, Result};
use crate::expectile::Dependence;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// `n × d` sample, one observation per row, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn from_row_major(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "a sample needs at least 2 rows, got {n}"
            )));
        }
        if d == 0 {
            return Err(Error::InvalidParameter(
                "a sample needs at least one column".into(),
            ));
        }
        if data.len() != n * d {
            return Err(Error::InvalidParameter(format!(
                "expected {} values for {n}x{d}, got {}",
                n * d,
                data.len()
            )));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParameter(
                "all rows must have the same width".into(),
            ));
        }
        Self::from_row_major(rows.len(), d, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * c).collect(),
            ..*self
        }
    }

    /// Read CSV with header `x1,…,xd`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let d = rdr.headers()?.len();
        let mut data = Vec::new();
        let mut n = 0;
        for record in rdr.records() {
            let record = record?;
            if record.len() != d {
                return Err(Error::InvalidParameter(format!(
                    "row {} has {} fields, expected {d}",
                    n + 1,
                    record.len()
                )));
            }
            for field in record.iter() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidParameter(format!("row {}: cannot parse {field:?}", n + 1))
                })?;
                data.push(v);
            }
            n += 1;
        }
        Self::from_row_major(n, d, data)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Write CSV with header `x1,…,xd`; values use shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record((1..=self.d).map(|j| format!("x{j}")))?;
        for row in self.rows() {
            w.write_record(row.iter().map(f64::to_string))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Row norm fed to the Hill estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    L1,
    Max,
}

impl Norm {
    pub fn apply(self, row: &[f64]) -> f64 {
        match self {
            Norm::L1 => row.iter().map(|v| v.abs()).sum(),
            Norm::Max => row.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

/// Estimated tail index, tail equivalence coefficients and the `k` used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimates {
    pub gamma_hat: f64,
    pub c_hat: Vec<f64>,
    pub k: usize,
}

/// `k`-th largest value (1-based).
pub fn kth_upper_order_stat(column: &[f64], k: usize) -> Result<f64> {
    let n = column.len();
    if k == 0 || k > n {
        return Err(Error::Bounds { k, n });
    }
    let mut buf = column.to_vec();
    let idx = n - k;
    let (_, v, _) = buf.select_nth_unstable_by(idx, f64::total_cmp);
    Ok(*v)
}

/// Top `k + 1` values in decreasing order.
fn top_values(values: &[f64], k: usize) -> Vec<f64> {
    let mut buf = values.to_vec();
    let n = buf.len();
    buf.select_nth_unstable_by(n - k - 1, f64::total_cmp);
    let mut top = buf.split_off(n - k - 1);
    top.sort_unstable_by(|a, b| b.total_cmp(a));
    top
}

/// Hill estimator `γ̂ = (1/k) Σ_{i<k} ln(Z_(i) / Z_(k))` over the `k + 1`
/// largest values `Z_(0) ≥ … ≥ Z_(k)`.
pub fn hill_estimator(values: &[f64], k: usize) -> Result<f64> {
    let n = values.len();
    if k < 2 || k >= n {
        return Err(Error::Bounds { k, n });
    }
    let top = top_values(values, k);
    let threshold = top[k];
    if !(threshold > 0.0) {
        return Err(Error::Domain(format!(
            "Hill estimator needs the {} largest values positive, threshold is {threshold}",
            k + 1
        )));
    }
    let ln_t = threshold.ln();
    Ok(top[..k].iter().map(|z| z.ln() - ln_t).sum::<f64>() / k as f64)
}

/// Hill estimate on the row norms of the sample.
pub fn hill_on_norms(samples: &SampleMatrix, k: usize, norm: Norm) -> Result<f64> {
    let norms: Vec<f64> = samples.rows().map(|r| norm.apply(r)).collect();
    hill_estimator(&norms, k)
}

/// `ĉ_i = (X_{i,(k)} / X_{1,(k)})^(1/γ̂)`, with `X_{i,(k)}` the `k`-th largest
/// value of column `i`.
pub fn tail_equivalence_estimates(
    samples: &SampleMatrix,
    k: usize,
    gamma_hat: f64,
) -> Result<Vec<f64>> {
    if !(gamma_hat > 0.0) {
        return Err(Error::Domain(format!(
            "gamma_hat must be positive, got {gamma_hat}"
        )));
    }
    let thresholds = (0..samples.d())
        .map(|j| kth_upper_order_stat(&samples.column(j), k))
        .collect::<Result<Vec<f64>>>()?;
    if let Some((j, t)) = thresholds.iter().enumerate().find(|(_, t)| !(**t > 0.0)) {
        return Err(Error::Domain(format!(
            "threshold of column {} is {t}, must be positive",
            j + 1
        )));
    }
    Ok(thresholds
        .iter()
        .map(|t| (t / thresholds[0]).powf(1.0 / gamma_hat))
        .collect())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::ProbabilityDomain(alpha))
    }
}

/// Weissman extrapolation `X_(k) (k / ((1-α) n))^γ̂`.
pub fn weissman_quantile(column: &[f64], k: usize, gamma_hat: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let n = column.len();
    if k >= n {
        return Err(Error::Bounds { k, n });
    }
    let threshold = kth_upper_order_stat(column, k)?;
    Ok(threshold * (k as f64 / ((1.0 - alpha) * n as f64)).powf(gamma_hat))
}

/// `γ̂` on the row norms and `ĉ` at the same `k`.
///
/// Fails with [`Error::TailTooHeavy`] when `γ̂ >= 1`.
pub fn tail_estimates(samples: &SampleMatrix, k: usize, norm: Norm) -> Result<TailEstimates> {
    let gamma_hat = hill_on_norms(samples, k, norm)?;
    if gamma_hat >= 1.0 {
        return Err(Error::TailTooHeavy { gamma_hat });
    }
    let c_hat = tail_equivalence_estimates(samples, k, gamma_hat)?;
    Ok(TailEstimates {
        gamma_hat,
        c_hat,
        k,
    })
}

/// Extreme L1-expectile from tail estimates and `VaR̂_α(X₁)`.
pub fn expectile_from_estimates(est: &TailEstimates, var: f64, dependence: Dependence) -> Vec<f64> {
    let g = est.gamma_hat;
    let base = var * (g / (1.0 - g)).powf(g);
    match dependence {
        Dependence::Independent => {
            let p = g / (1.0 - g);
            let powers: Vec<f64> = est.c_hat.iter().map(|c| c.powf(p)).collect();
            let total: f64 = powers.iter().sum();
            let scale = base * total.powf(-g);
            powers.iter().map(|w| scale * w).collect()
        }
        Dependence::Comonotonic => est.c_hat.iter().map(|c| base * c.powf(g)).collect(),
    }
}

/// Extreme L1-expectile estimate together with the tail estimates behind it.
pub fn estimate_extreme_expectile(
    samples: &SampleMatrix,
    k: usize,
    alpha: f64,
    dependence: Dependence,
    norm: Norm,
) -> Result<(TailEstimates, Vec<f64>)> {
    check_alpha(alpha)?;
    let est = tail_estimates(samples, k, norm)?;
    let var = weissman_quantile(&samples.column(0), k, est.gamma_hat, alpha)?;
    let point = expectile_from_estimates(&est, var, dependence);
    Ok((est, point))
}

/// `ê⊥`: extreme L1-expectile estimator for asymptotically independent components.
pub fn extreme_expectile_independent(
    samples: &SampleMatrix,
    k: usize,
    alpha: f64,
) -> Result<Vec<f64>> {
    estimate_extreme_expectile(samples, k, alpha, Dependence::Independent, Norm::L1).map(|(_, e)| e)
}

/// `ê⁺`: extreme L1-expectile estimator for comonotonic components.
pub fn extreme_expectile_comonotonic(
    samples: &SampleMatrix,
    k: usize,
    alpha: f64,
) -> Result<Vec<f64>> {
    estimate_extreme_expectile(samples, k, alpha, Dependence::Comonotonic, Norm::L1).map(|(_, e)| e)
}

/// `√k (1 + ln²(k / (n(1-α))))^(-1/2)`; larger is better for consistency.
pub fn k_growth_diagnostic(n: usize, k: usize, alpha: f64) -> f64 {
    let kf = k as f64;
    let l = (kf / (n as f64 * (1.0 - alpha))).ln();
    kf.sqrt() / (1.0 + l * l).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    #[test]
    fn order_stats() {
        assert_eq!(kth_upper_order_stat(&[3.0, 1.0, 2.0], 1).unwrap(), 3.0);
        assert_eq!(kth_upper_order_stat(&[3.0, 1.0, 2.0], 3).unwrap(), 1.0);
        assert_eq!(kth_upper_order_stat(&[5.0, 5.0, 1.0], 2).unwrap(), 5.0);
        assert!(matches!(
            kth_upper_order_stat(&[1.0], 2),
            Err(Error::Bounds { k: 2, n: 1 })
        ));
        assert!(kth_upper_order_stat(&[1.0], 0).is_err());
    }

    #[test]
    fn hill_examples() {
        assert_relative_eq!(
            hill_estimator(&[1.0, E, E * E], 2).unwrap(),
            1.5,
            epsilon = 1e-15
        );
        assert_eq!(hill_estimator(&[4.0; 10], 5).unwrap(), 0.0);
        assert!(hill_estimator(&[1.0, 2.0, 3.0], 3).is_err());
        assert!(hill_estimator(&[1.0, 2.0, 3.0], 1).is_err());
        assert!(matches!(
            hill_estimator(&[-1.0, 2.0, 3.0], 2),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn hill_on_exact_pareto_grid() {
        let n = 100_000;
        let grid = |shift: f64| -> Vec<f64> {
            (1..=n)
                .map(|i| {
                    let u = i as f64 / (n + 1) as f64;
                    10.0 * ((1.0 - u).powf(-0.5) - shift)
                })
                .collect()
        };
        let pure = hill_estimator(&grid(0.0), 1000).unwrap();
        assert!((pure / 0.5 - 1.0).abs() < 0.02, "gamma={pure}");
        // The shifted (Lomax) form carries a second-order bias at k/n = 1%.
        let shifted = hill_estimator(&grid(1.0), 1000).unwrap();
        assert!((0.45..0.55).contains(&shifted), "gamma={shifted}");
    }

    #[test]
    fn tail_equivalence_examples() {
        let s = SampleMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
        assert_eq!(
            tail_equivalence_estimates(&s, 2, 0.5).unwrap(),
            vec![1.0, 1.0]
        );
        let s =
            SampleMatrix::from_rows(&[vec![1.0, 1.0], vec![10.0, 15.0], vec![30.0, 40.0]]).unwrap();
        let c = tail_equivalence_estimates(&s, 2, 0.5).unwrap();
        assert_relative_eq!(c[1], 2.25, epsilon = 1e-14);
        let bad = SampleMatrix::from_rows(&[vec![1.0, -1.0], vec![2.0, -2.0]]).unwrap();
        assert!(tail_equivalence_estimates(&bad, 1, 0.5).is_err());
    }

    #[test]
    fn weissman_examples() {
        let mut col = vec![1.0; 10_000];
        col[..99].fill(100.0);
        col[99] = 10.0;
        let q = weissman_quantile(&col, 100, 0.5, 0.999).unwrap();
        assert_relative_eq!(q, 10.0 * 10f64.sqrt(), max_relative = 1e-12);
        let q = weissman_quantile(&col, 100, 0.5, 0.99).unwrap();
        assert_relative_eq!(q, 10.0, max_relative = 1e-12);
        assert!(weissman_quantile(&col, 100, 0.5, 1.0).is_err());
    }

    fn two_column(var_first_kth: f64) -> SampleMatrix {
        // n = 10_000 rows where the 100th largest of column 1 is 10, of
        // column 2 is 15, and L1 norms give γ̂ = 0.5 via the exact Pareto grid.
        let n = 10_000;
        let rows: Vec<Vec<f64>> = (1..=n)
            .map(|i| {
                let u = i as f64 / (n + 1) as f64;
                let x = var_first_kth * (1.0 - u).powf(-0.5);
                vec![x, 1.5 * x]
            })
            .collect();
        SampleMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn estimator_arithmetic() {
        let s = two_column(1.0);
        let (est, ind) =
            estimate_extreme_expectile(&s, 100, 0.999, Dependence::Independent, Norm::L1).unwrap();
        let g = est.gamma_hat;
        let var = weissman_quantile(&s.column(0), 100, g, 0.999).unwrap();
        let p = g / (1.0 - g);
        let c2 = est.c_hat[1];
        let base = var * p.powf(g);
        assert_relative_eq!(
            ind[0],
            base * (1.0 + c2.powf(p)).powf(-g),
            max_relative = 1e-13
        );
        assert_relative_eq!(ind[1], ind[0] * c2.powf(p), max_relative = 1e-13);
        let (_, com) =
            estimate_extreme_expectile(&s, 100, 0.999, Dependence::Comonotonic, Norm::L1).unwrap();
        assert_relative_eq!(com[0], base, max_relative = 1e-13);
        assert_relative_eq!(com[1], base * c2.powf(g), max_relative = 1e-13);
    }

    #[test]
    fn estimator_hand_values() {
        // VaR̂ = 31.6228, γ̂ = 0.5, ĉ₂ = 2.25.
        let var = 10.0 * 10f64.sqrt();
        let ind = [
            var * (1.0 / 3.25f64).sqrt(),
            var * (1.0 / 3.25f64).sqrt() * 2.25,
        ];
        assert_relative_eq!(ind[0], 17.54, max_relative = 5e-4);
        assert_relative_eq!(ind[1], 39.47, max_relative = 5e-4);
    }

    #[test]
    fn one_dimensional_estimators_coincide() {
        let rows: Vec<Vec<f64>> = (1..=1000)
            .map(|i| vec![(1001.0 / i as f64).powf(0.4)])
            .collect();
        let s = SampleMatrix::from_rows(&rows).unwrap();
        let a = extreme_expectile_independent(&s, 50, 0.999).unwrap();
        let b = extreme_expectile_comonotonic(&s, 50, 0.999).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tail_too_heavy() {
        let rows: Vec<Vec<f64>> = (1..=1000)
            .map(|i| vec![(1001.0 / i as f64).powf(1.2)])
            .collect();
        let s = SampleMatrix::from_rows(&rows).unwrap();
        assert!(matches!(
            extreme_expectile_independent(&s, 100, 0.999),
            Err(Error::TailTooHeavy { .. })
        ));
    }

    #[test]
    fn diagnostic_examples() {
        assert_relative_eq!(
            k_growth_diagnostic(100_000, 100, 0.999),
            10.0,
            max_relative = 1e-12
        );
        assert!(k_growth_diagnostic(100_000, 1, 0.999) <= 1.0);
        assert!(
            k_growth_diagnostic(100_000, 120, 0.999) > k_growth_diagnostic(100_000, 100, 0.999)
        );
    }

    #[test]
    fn csv_round_trip() {
        let s = SampleMatrix::from_rows(&[vec![1.5, -2.0], vec![0.1, 1e-300]]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"x1,x2\n"));
        assert_eq!(SampleMatrix::read_csv(buf.as_slice()).unwrap(), s);
        assert!(SampleMatrix::read_csv("x1,x2\n1,2\n3\n".as_bytes()).is_err());
        assert!(SampleMatrix::read_csv("x1\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn norms() {
        assert_eq!(Norm::L1.apply(&[1.0, -2.0]), 3.0);
        assert_eq!(Norm::Max.apply(&[1.0, -2.0]), 2.0);
    }
}
