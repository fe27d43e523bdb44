//! Critical offspring distributions with finite support.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LAW_TOLERANCE: f64 = 1e-12;

/// A critical offspring law `ν = (ν_0, ..., ν_K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw {
    probs: Vec<f64>,
    cdf: Vec<f64>,
    sigma2: f64,
    mu3: f64,
}

impl OffspringLaw {
    /// Validate normalization and criticality and cache the moments.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidLaw("empty probability vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidLaw(format!("entry {p} is not a probability")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > LAW_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        let mean: f64 = probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        if (mean - 1.0).abs() > LAW_TOLERANCE {
            return Err(Error::NotCritical { mean });
        }
        let centered = |power: i32| -> f64 {
            probs
                .iter()
                .enumerate()
                .map(|(k, p)| (k as f64 - 1.0).abs().powi(power) * p)
                .sum()
        };
        let sigma2 = centered(2);
        let mu3 = centered(3);
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // The last bucket absorbs rounding so inverse-CDF sampling never
        // falls off the end.
        *cdf.last_mut().expect("non-empty") = f64::INFINITY;
        Ok(OffspringLaw {
            probs,
            cdf,
            sigma2,
            mu3,
        })
    }

    /// `(1/2, 0, 1/2)`: die or split in two.
    pub fn binary_critical() -> Self {
        OffspringLaw::new(vec![0.5, 0.0, 0.5]).expect("valid law")
    }

    /// `(p/2, 1 - p, p/2)`, a critical law with variance `p`.
    pub fn trinomial(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidLaw(format!("trinomial parameter {p} not in [0, 1]")));
        }
        OffspringLaw::new(vec![p / 2.0, 1.0 - p, p / 2.0])
    }

    /// Always exactly one offspring; branching changes nothing.
    pub fn deterministic_one() -> Self {
        OffspringLaw::new(vec![0.0, 1.0]).expect("valid law")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `σ² = Σ_k (k - 1)² ν_k`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `Σ_k |k - 1|³ ν_k`.
    pub fn mu3(&self) -> f64 {
        self.mu3
    }

    pub fn max_offspring(&self) -> usize {
        self.probs.len() - 1
    }

    /// True for every law this type admits, since the support is finite.
    pub fn third_moment_finite(&self) -> bool {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64).powi(3) * p)
            .sum::<f64>()
            .is_finite()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        self.cdf.iter().position(|&c| u < c).expect("cdf ends at infinity") as u64
    }
}

/// How a law is written in experiment configs: a named built-in or an
/// explicit probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawSpec {
    Named(String),
    Trinomial(f64),
    Probs(Vec<f64>),
}

impl LawSpec {
    pub fn build(&self) -> Result<OffspringLaw> {
        match self {
            LawSpec::Named(name) => match name.as_str() {
                "binary-critical" => Ok(OffspringLaw::binary_critical()),
                "deterministic" => Ok(OffspringLaw::deterministic_one()),
                other => Err(Error::InvalidLaw(format!("unknown named law `{other}`"))),
            },
            LawSpec::Trinomial(p) => OffspringLaw::trinomial(*p),
            LawSpec::Probs(p) => OffspringLaw::new(p.clone()),
        }
    }
}
