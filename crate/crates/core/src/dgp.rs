// SPDX-License-Identifier: MIT OR Apache-2.0

//! Simulation data: `Y_k = μ + δ·1{k > τ} + e_k` with the error processes of
//! the simulation study, standardized to unit variance at the start.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_sim::VarianceProfile;
use crate::rng::{self, StreamRng};
use crate::series::TimeSeries;

pub const AR_COEFFICIENT: f64 = 0.3;
pub const ARCH_COEFFICIENT: f64 = 0.9;
pub const BURN_IN: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ErrorModel {
    Iid,
    Ar1 {
        phi: f64,
    },
    /// AR(1) whose realizations after `break_at·n` are multiplied by `factor`.
    Ar1Ar1 {
        phi: f64,
        break_at: f64,
        factor: f64,
    },
    /// AR(1) whose realizations up to `break_at·n` are multiplied by `factor`.
    Ar1HeadScaled {
        phi: f64,
        break_at: f64,
        factor: f64,
    },
    /// ARCH(1) with intercept `1 - alpha1`, realizations multiplied by
    /// `m_k` with `m_k² = 1 + U_k·2(k-1)/(n-1)`, `U_k ~ U(0,1)`.
    Arch1Inc {
        alpha1: f64,
    },
}

impl ErrorModel {
    pub fn iid() -> Self {
        ErrorModel::Iid
    }

    pub fn ar1() -> Self {
        ErrorModel::Ar1 { phi: AR_COEFFICIENT }
    }

    pub fn ar1_ar1() -> Self {
        ErrorModel::Ar1Ar1 {
            phi: AR_COEFFICIENT,
            break_at: 0.25,
            factor: std::f64::consts::SQRT_2,
        }
    }

    /// First quarter multiplied by 10.
    pub fn ar1_extreme() -> Self {
        ErrorModel::Ar1HeadScaled {
            phi: AR_COEFFICIENT,
            break_at: 0.25,
            factor: 10.0,
        }
    }

    pub fn arch1_inc() -> Self {
        ErrorModel::Arch1Inc {
            alpha1: ARCH_COEFFICIENT,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ErrorModel::Iid => "iid",
            ErrorModel::Ar1 { .. } => "ar1",
            ErrorModel::Ar1Ar1 { .. } => "ar1_ar1",
            ErrorModel::Ar1HeadScaled { .. } => "ar1_extreme",
            ErrorModel::Arch1Inc { .. } => "arch1_inc",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag.to_ascii_lowercase().replace('-', "_").as_str() {
            "iid" => Ok(Self::iid()),
            "ar1" => Ok(Self::ar1()),
            "ar1_ar1" => Ok(Self::ar1_ar1()),
            "ar1_extreme" => Ok(Self::ar1_extreme()),
            "arch1_inc" | "arch1" => Ok(Self::arch1_inc()),
            _ => Err(Error::UnknownName {
                what: "error model",
                name: tag.to_string(),
                available: "iid, ar1, ar1_ar1, ar1_extreme, arch1_inc".into(),
            }),
        }
    }

    fn validate(&self) -> Result<()> {
        let check_phi = |phi: f64| {
            if phi > -1.0 && phi < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("AR coefficient {phi} must lie in (-1, 1)")))
            }
        };
        let check_scaling = |break_at: f64, factor: f64| {
            if !(break_at > 0.0 && break_at < 1.0) {
                return Err(Error::invalid(format!("break fraction {break_at} must lie in (0, 1)")));
            }
            if !(factor.is_finite() && factor > 0.0) {
                return Err(Error::invalid(format!("scale factor {factor} must be positive")));
            }
            Ok(())
        };
        match *self {
            ErrorModel::Iid => Ok(()),
            ErrorModel::Ar1 { phi } => check_phi(phi),
            ErrorModel::Ar1Ar1 { phi, break_at, factor }
            | ErrorModel::Ar1HeadScaled { phi, break_at, factor } => {
                check_phi(phi)?;
                check_scaling(break_at, factor)
            }
            ErrorModel::Arch1Inc { alpha1 } => {
                if (0.0..1.0).contains(&alpha1) {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("ARCH coefficient {alpha1} must lie in [0, 1)")))
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Innovation {
    #[default]
    Normal,
    /// Student t with 3 degrees of freedom divided by `sqrt(3)`.
    StudentT3,
}

impl Innovation {
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag.to_ascii_lowercase().as_str() {
            "normal" | "n" | "gaussian" => Ok(Innovation::Normal),
            "t3" | "student_t3" => Ok(Innovation::StudentT3),
            _ => Err(Error::UnknownName {
                what: "innovation law",
                name: tag.to_string(),
                available: "normal, t3".into(),
            }),
        }
    }
}

struct InnovationSampler {
    law: Innovation,
    t3: StudentT<f64>,
}

impl InnovationSampler {
    fn new(law: Innovation) -> Self {
        Self {
            law,
            t3: StudentT::new(3.0).expect("3 degrees of freedom"),
        }
    }

    fn draw(&self, rng: &mut StreamRng) -> f64 {
        match self.law {
            Innovation::Normal => StandardNormal.sample(rng),
            Innovation::StudentT3 => self.t3.sample(rng) / 3f64.sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub n: usize,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub delta: f64,
    /// Last pre-change index; `None` is the null hypothesis.
    #[serde(default)]
    pub tau: Option<usize>,
    pub errors: ErrorModel,
    #[serde(default)]
    pub innovations: Innovation,
}

impl DgpSpec {
    pub fn null(n: usize, errors: ErrorModel, innovations: Innovation) -> Self {
        Self {
            n,
            mu: 0.0,
            delta: 0.0,
            tau: None,
            errors,
            innovations,
        }
    }

    pub fn with_change(mut self, delta: f64, tau: usize) -> Self {
        self.delta = delta;
        self.tau = Some(tau);
        self
    }

    pub fn is_null(&self) -> bool {
        self.delta == 0.0 || self.tau.is_none_or(|t| t >= self.n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!("series length n={} must be at least 2", self.n)));
        }
        if let Some(tau) = self.tau {
            if tau < 1 || tau > self.n {
                return Err(Error::invalid(format!("tau={tau} must lie in 1..={}", self.n)));
            }
        }
        if !self.mu.is_finite() || !self.delta.is_finite() {
            return Err(Error::invalid("mu and delta must be finite"));
        }
        self.errors.validate()
    }

    /// Stable identifier, e.g. `iid_null_n400` or `ar1_t3_d0.5_tau25_n100`.
    pub fn cell_id(&self) -> String {
        let mut id = self.errors.tag().to_string();
        if self.innovations == Innovation::StudentT3 {
            id.push_str("_t3");
        }
        match (self.is_null(), self.tau) {
            (false, Some(tau)) => id.push_str(&format!("_d{}_tau{}", self.delta, tau)),
            _ => id.push_str("_null"),
        }
        id.push_str(&format!("_n{}", self.n));
        id
    }
}

fn ar1_errors(
    n: usize,
    phi: f64,
    sampler: &InnovationSampler,
    rng: &mut StreamRng,
) -> Vec<f64> {
    let scale = (1.0 - phi * phi).sqrt();
    let mut e = match sampler.law {
        // Exact stationary start.
        Innovation::Normal => sampler.draw(rng),
        Innovation::StudentT3 => {
            let mut e = 0.0;
            for _ in 0..BURN_IN {
                e = phi * e + scale * sampler.draw(rng);
            }
            phi * e + scale * sampler.draw(rng)
        }
    };
    let mut out = Vec::with_capacity(n);
    out.push(e);
    for _ in 1..n {
        e = phi * e + scale * sampler.draw(rng);
        out.push(e);
    }
    out
}

fn arch_errors(n: usize, alpha1: f64, sampler: &InnovationSampler, rng: &mut StreamRng) -> Vec<f64> {
    let omega = 1.0 - alpha1;
    let mut e = 0.0f64;
    for _ in 0..BURN_IN {
        e = sampler.draw(rng) * (omega + alpha1 * e * e).sqrt();
    }
    let denom = (n - 1) as f64;
    (1..=n)
        .map(|k| {
            e = sampler.draw(rng) * (omega + alpha1 * e * e).sqrt();
            let u: f64 = rng.random();
            let m2 = 1.0 + u * 2.0 * (k - 1) as f64 / denom;
            e * m2.sqrt()
        })
        .collect()
}

fn errors(spec: &DgpSpec, rng: &mut StreamRng) -> Vec<f64> {
    let sampler = InnovationSampler::new(spec.innovations);
    let n = spec.n;
    match spec.errors {
        ErrorModel::Iid => (0..n).map(|_| sampler.draw(rng)).collect(),
        ErrorModel::Ar1 { phi } => ar1_errors(n, phi, &sampler, rng),
        ErrorModel::Ar1Ar1 { phi, break_at, factor } => {
            let cut = break_at * n as f64;
            let mut e = ar1_errors(n, phi, &sampler, rng);
            for (i, v) in e.iter_mut().enumerate() {
                if (i + 1) as f64 > cut {
                    *v *= factor;
                }
            }
            e
        }
        ErrorModel::Ar1HeadScaled { phi, break_at, factor } => {
            let cut = break_at * n as f64;
            let mut e = ar1_errors(n, phi, &sampler, rng);
            for (i, v) in e.iter_mut().enumerate() {
                if (i + 1) as f64 <= cut {
                    *v *= factor;
                }
            }
            e
        }
        ErrorModel::Arch1Inc { alpha1 } => arch_errors(n, alpha1, &sampler, rng),
    }
}

/// One realization of the model, deterministic in `(spec, seed)`.
pub fn generate(spec: &DgpSpec, seed: u64) -> Result<TimeSeries> {
    spec.validate()?;
    let mut rng = rng::stream(seed, &[]);
    let tau = spec.tau.unwrap_or(spec.n);
    let values = errors(spec, &mut rng)
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let shift = if i + 1 > tau { spec.delta } else { 0.0 };
            spec.mu + shift + e
        })
        .collect();
    TimeSeries::new(values)
}

/// Variance profile implied by the deterministic multipliers of the model.
pub fn theoretical_eta(spec: &DgpSpec) -> Result<VarianceProfile> {
    spec.errors.validate()?;
    match spec.errors {
        ErrorModel::Iid | ErrorModel::Ar1 { .. } => Ok(VarianceProfile::Constant),
        ErrorModel::Ar1Ar1 { break_at, factor, .. } => Ok(VarianceProfile::PiecewiseConstant {
            breaks: vec![break_at],
            values: vec![1.0, factor * factor],
        }),
        ErrorModel::Ar1HeadScaled { break_at, factor, .. } => Ok(VarianceProfile::PiecewiseConstant {
            breaks: vec![break_at],
            values: vec![factor * factor, 1.0],
        }),
        ErrorModel::Arch1Inc { .. } => Err(Error::invalid(
            "the ARCH(1) inc volatility envelope is random; it has no deterministic η",
        )),
    }
}

/// Single-column CSV with a `value` header.
pub fn series_to_csv(series: &TimeSeries) -> String {
    let mut out = String::with_capacity(series.len() * 20 + 6);
    out.push_str("value\n");
    for v in series.values() {
        out.push_str(&format!("{v}\n"));
    }
    out
}
