//! Parametric heavy-tailed margins.
//!
//! Each margin is `X = location + scale * Y` where `Y` follows one of three
//! regularly varying families:
//!
//! | family  | survival of `Y`             | tail index |
//! |---------|-----------------------------|------------|
//! | Pareto  | `(b / (b + y))^a`, `y >= 0`   | `a`        |
//! | Burr    | `(b / (b + y^τ))^a`, `y >= 0` | `a τ`      |
//! | Student | `σ T`, `T ~ t(z)`            | `z`        |
//!
//! Partial moments are closed form: Pareto directly, Burr through the
//! incomplete beta function, Student through `E[(T - t)_+] = (z + t²) f(t) / (z - 1) - t P(T > t)`.

use crate::error::{Error, Result};
use crate::special::{beta_reg_pair, ln_beta, StudentT};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Heavy-tailed family of the standardized variable `Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Pareto { shape: f64, scale: f64 },
    Burr { shape: f64, scale: f64, power: f64 },
    Student { scale: f64, dof: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Pareto { .. } => "pareto",
            Family::Burr { .. } => "burr",
            Family::Student { .. } => "student",
        }
    }
}

/// Marginal distribution `location + scale * Y`, `Y` from [`Family`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawMargin", into = "RawMargin")]
pub struct MarginSpec {
    family: Family,
    location: f64,
    scale: f64,
    student: Option<StudentT>,
}

impl PartialEq for MarginSpec {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.location == other.location && self.scale == other.scale
    }
}

/// Tail index and tail-equivalence coefficient of a margin relative to a
/// reference margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailProfile {
    pub theta: f64,
    pub c: f64,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::ProbabilityDomain(p))
    }
}

impl MarginSpec {
    /// Pareto margin with survival `(b / (b + x))^a`. Requires `a > 1`.
    pub fn pareto(a: f64, b: f64) -> Result<Self> {
        Self::new(Family::Pareto { shape: a, scale: b }, 0.0, 1.0)
    }

    /// Burr margin with survival `(b / (b + x^τ))^a`. Requires `a τ > 1`.
    pub fn burr(a: f64, b: f64, tau: f64) -> Result<Self> {
        Self::new(
            Family::Burr {
                shape: a,
                scale: b,
                power: tau,
            },
            0.0,
            1.0,
        )
    }

    /// `scale * T` with `T` a Student-t with `dof` degrees of freedom. Requires `dof > 1`.
    pub fn student(scale: f64, dof: f64) -> Result<Self> {
        Self::new(Family::Student { scale, dof }, 0.0, 1.0)
    }

    pub fn new(family: Family, location: f64, scale: f64) -> Result<Self> {
        match family {
            Family::Pareto { shape, scale } => {
                positive("pareto shape", shape)?;
                positive("pareto scale", scale)?;
                if shape <= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "pareto shape must exceed 1 for a finite mean, got {shape}"
                    )));
                }
            }
            Family::Burr {
                shape,
                scale,
                power,
            } => {
                positive("burr shape", shape)?;
                positive("burr scale", scale)?;
                positive("burr power", power)?;
                if shape * power <= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "burr shape * power must exceed 1 for a finite mean, got {}",
                        shape * power
                    )));
                }
            }
            Family::Student { scale, dof } => {
                positive("student scale", scale)?;
                positive("student dof", dof)?;
                if dof <= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "student dof must exceed 1 for a finite mean, got {dof}"
                    )));
                }
            }
        }
        if !location.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "location must be finite, got {location}"
            )));
        }
        positive("scale multiplier", scale)?;
        let student = match family {
            Family::Student { dof, .. } => Some(StudentT::new(dof)),
            _ => None,
        };
        Ok(Self {
            family,
            location,
            scale,
            student,
        })
    }

    /// Same margin shifted by `shift`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        Self::new(self.family, self.location + shift, self.scale)
    }

    /// Same margin with the scale multiplier multiplied by `factor`
    /// (the location is scaled too, so `X` becomes `factor * X`).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.family, self.location * factor, self.scale * factor)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale_multiplier(&self) -> f64 {
        self.scale
    }

    #[inline]
    fn standardize(&self, x: f64) -> f64 {
        (x - self.location) / self.scale
    }

    fn t(&self) -> &StudentT {
        self.student.as_ref().expect("student margin")
    }

    /// Left endpoint of the support (`-inf` for Student margins).
    pub fn support_lower(&self) -> f64 {
        match self.family {
            Family::Student { .. } => f64::NEG_INFINITY,
            _ => self.location,
        }
    }

    /// `P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        let y = self.standardize(x);
        match self.family {
            Family::Pareto { shape, scale } => {
                if y <= 0.0 {
                    1.0
                } else {
                    (scale / (scale + y)).powf(shape)
                }
            }
            Family::Burr {
                shape,
                scale,
                power,
            } => {
                if y <= 0.0 {
                    1.0
                } else {
                    (scale / (scale + y.powf(power))).powf(shape)
                }
            }
            Family::Student { scale, .. } => self.t().survival(y / scale),
        }
    }

    /// `P(X <= x)`, accurate in the left tail.
    pub fn cdf(&self, x: f64) -> f64 {
        let y = self.standardize(x);
        match self.family {
            Family::Pareto { shape, scale } => {
                if y <= 0.0 {
                    0.0
                } else {
                    -(-shape * (y / scale).ln_1p()).exp_m1()
                }
            }
            Family::Burr {
                shape,
                scale,
                power,
            } => {
                if y <= 0.0 {
                    0.0
                } else {
                    -(-shape * (y.powf(power) / scale).ln_1p()).exp_m1()
                }
            }
            Family::Student { scale, .. } => self.t().cdf(y / scale),
        }
    }

    fn quantile_std(&self, p: f64, q: f64) -> f64 {
        match self.family {
            Family::Pareto { shape, scale } => pareto_quantile_std(shape, scale, p, q),
            Family::Burr {
                shape,
                scale,
                power,
            } => pareto_quantile_std(shape, scale, p, q).powf(1.0 / power),
            Family::Student { scale, .. } => {
                if q <= 0.5 {
                    scale * self.t().upper_quantile(q)
                } else {
                    -scale * self.t().upper_quantile(p)
                }
            }
        }
    }

    /// Generalized inverse of the distribution function, `p` in (0, 1).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        Ok(self.location + self.scale * self.quantile_std(p, 1.0 - p))
    }

    /// Value with survival probability `q`, accurate for tiny `q`.
    pub fn upper_quantile(&self, q: f64) -> Result<f64> {
        check_probability(q)?;
        Ok(self.location + self.scale * self.quantile_std(1.0 - q, q))
    }

    /// Inverse transform of a uniform variate.
    pub fn inverse_transform_sample(&self, u: f64) -> Result<f64> {
        self.quantile(u)
    }

    fn mean_std(&self) -> f64 {
        match self.family {
            Family::Pareto { shape, scale } => scale / (shape - 1.0),
            Family::Burr {
                shape,
                scale,
                power,
            } => {
                let p = 1.0 / power;
                scale.powf(p) * p * ln_beta(p, shape - p).exp()
            }
            Family::Student { .. } => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.location + self.scale * self.mean_std()
    }

    fn upper_pm_std(&self, y: f64) -> f64 {
        match self.family {
            Family::Pareto { shape, scale } => {
                if y <= 0.0 {
                    self.mean_std() - y
                } else {
                    scale * (scale / (scale + y)).powf(shape - 1.0) / (shape - 1.0)
                }
            }
            Family::Burr {
                shape,
                scale,
                power,
            } => {
                if y <= 0.0 {
                    self.mean_std() - y
                } else {
                    let p = 1.0 / power;
                    let q = shape - p;
                    let v = y.powf(power) / scale;
                    let (w, w_c) = if v < 1.0 {
                        (v / (1.0 + v), 1.0 / (1.0 + v))
                    } else {
                        let s = 1.0 / v;
                        (1.0 / (1.0 + s), s / (1.0 + s))
                    };
                    let (_, upper) = beta_reg_pair(p, q, w, w_c);
                    scale.powf(p) * p * ln_beta(p, q).exp() * upper
                }
            }
            Family::Student { scale, .. } => scale * self.t().upper_partial_moment(y / scale),
        }
    }

    /// `E[(X - x)_+]`.
    pub fn upper_partial_moment(&self, x: f64) -> f64 {
        self.scale * self.upper_pm_std(self.standardize(x))
    }

    /// `E[(x - X)_+]`.
    pub fn lower_partial_moment(&self, x: f64) -> f64 {
        let y = self.standardize(x);
        let v = match self.family {
            Family::Pareto { .. } | Family::Burr { .. } => {
                if y <= 0.0 {
                    0.0
                } else {
                    (y - self.mean_std() + self.upper_pm_std(y)).max(0.0)
                }
            }
            // Symmetry: E[(y - T)_+] = E[(T + y)_+].
            Family::Student { scale, .. } => scale * self.t().upper_partial_moment(-y / scale),
        };
        self.scale * v
    }

    /// Regular-variation index `θ` of the survival function.
    pub fn tail_index(&self) -> f64 {
        match self.family {
            Family::Pareto { shape, .. } => shape,
            Family::Burr { shape, power, .. } => shape * power,
            Family::Student { dof, .. } => dof,
        }
    }

    /// Constant `K` with `P(X > x) ~ K x^(-θ)`.
    pub fn tail_constant(&self) -> f64 {
        let theta = self.tail_index();
        match self.family {
            Family::Pareto { shape, scale } => scale.powf(shape) * self.scale.powf(theta),
            Family::Burr { shape, scale, .. } => scale.powf(shape) * self.scale.powf(theta),
            Family::Student { scale, .. } => {
                self.t().tail_constant() * (scale * self.scale).powf(theta)
            }
        }
    }

    /// `lim P(X > x) / P(X_ref > x)` for same-family margins with equal tail index.
    pub fn tail_equivalence(&self, reference: &MarginSpec) -> Result<f64> {
        if std::mem::discriminant(&self.family) != std::mem::discriminant(&reference.family) {
            return Err(Error::FamilyMismatch {
                left: self.family.name(),
                right: reference.family.name(),
            });
        }
        let (left, right) = (self.tail_index(), reference.tail_index());
        if left != right {
            return Err(Error::TailIndexMismatch { left, right });
        }
        Ok(self.tail_constant() / reference.tail_constant())
    }

    /// Tail profile relative to `reference`.
    pub fn tail_profile(&self, reference: &MarginSpec) -> Result<TailProfile> {
        Ok(TailProfile {
            theta: self.tail_index(),
            c: self.tail_equivalence(reference)?,
        })
    }

    /// `F_self^←(F_other(x))`: the value of this margin matched in probability
    /// to `x` under `other`.
    pub fn pseudo_inverse_match(&self, other: &MarginSpec, x: f64) -> f64 {
        let y = other.standardize(x);
        let ratio = match (self.family, other.family) {
            (
                Family::Pareto {
                    shape: a1,
                    scale: b1,
                },
                Family::Pareto {
                    shape: a2,
                    scale: b2,
                },
            ) if a1 == a2 => Some(b1 / b2),
            (
                Family::Burr {
                    shape: a1,
                    scale: b1,
                    power: t1,
                },
                Family::Burr {
                    shape: a2,
                    scale: b2,
                    power: t2,
                },
            ) if a1 == a2 && t1 == t2 => Some((b1 / b2).powf(1.0 / t1)),
            (Family::Student { scale: s1, dof: z1 }, Family::Student { scale: s2, dof: z2 })
                if z1 == z2 =>
            {
                Some(s1 / s2)
            }
            _ => None,
        };
        if let Some(ratio) = ratio {
            let y = match self.family {
                Family::Student { .. } => y,
                _ => y.max(0.0),
            };
            return self.location + self.scale * ratio * y;
        }
        let (p, q) = (other.cdf(x), other.survival(x));
        if p <= 0.0 {
            return self.support_lower();
        }
        if q <= 0.0 {
            return f64::INFINITY;
        }
        self.location + self.scale * self.quantile_std(p, q)
    }
}

fn pareto_quantile_std(shape: f64, scale: f64, p: f64, q: f64) -> f64 {
    // b ((1 - p)^(-1/a) - 1), evaluated from whichever of p, q is small.
    let ln_q = if p < 0.5 { (-p).ln_1p() } else { q.ln() };
    scale * (-ln_q / shape).exp_m1()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawMargin {
    family: String,
    params: BTreeMap<String, f64>,
    #[serde(default)]
    location: f64,
    #[serde(default = "one")]
    scale: f64,
}

fn one() -> f64 {
    1.0
}

fn param(params: &BTreeMap<String, f64>, names: &[&str]) -> Result<f64> {
    names
        .iter()
        .find_map(|n| params.get(*n).copied())
        .ok_or_else(|| Error::InvalidParameter(format!("missing parameter {:?}", names[0])))
}

impl TryFrom<RawMargin> for MarginSpec {
    type Error = Error;

    fn try_from(raw: RawMargin) -> Result<Self> {
        let p = &raw.params;
        let family = match raw.family.as_str() {
            "pareto" => Family::Pareto {
                shape: param(p, &["shape", "a"])?,
                scale: param(p, &["scale", "b"])?,
            },
            "burr" => Family::Burr {
                shape: param(p, &["shape", "a"])?,
                scale: param(p, &["scale", "b"])?,
                power: param(p, &["power", "tau"])?,
            },
            "student" => Family::Student {
                scale: param(p, &["scale", "a"])?,
                dof: param(p, &["dof", "z"])?,
            },
            other => return Err(Error::InvalidParameter(format!("unknown family {other:?}"))),
        };
        MarginSpec::new(family, raw.location, raw.scale)
    }
}

impl From<MarginSpec> for RawMargin {
    fn from(m: MarginSpec) -> Self {
        let params: Vec<(&str, f64)> = match m.family {
            Family::Pareto { shape, scale } => vec![("shape", shape), ("scale", scale)],
            Family::Burr {
                shape,
                scale,
                power,
            } => vec![("shape", shape), ("scale", scale), ("power", power)],
            Family::Student { scale, dof } => vec![("scale", scale), ("dof", dof)],
        };
        RawMargin {
            family: m.family.name().to_string(),
            params: params
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            location: m.location,
            scale: m.scale,
        }
    }
}
