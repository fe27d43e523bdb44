//! JSON configuration for each subcommand.
//!
//! Unknown fields are rejected. Semantic checks run after parsing and
//! report every offending field at once.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Site};
use crate::offspring::LawSpec;
use crate::particle::ParticleState;

fn one() -> f64 {
    1.0
}

fn default_law() -> LawSpec {
    LawSpec::Named("binary-critical".into())
}

fn default_dt() -> f64 {
    1e-3
}

fn default_z() -> f64 {
    3.0
}

/// `half_width` present: the torus `[-n, n]^d`; absent: `Z^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub dim: usize,
    #[serde(default)]
    pub half_width: Option<u32>,
}

impl LatticeSpec {
    pub fn build(&self) -> Result<Lattice> {
        match self.half_width {
            Some(n) => Lattice::torus(self.dim, n),
            None => Lattice::infinite(self.dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteCount {
    pub site: Site,
    pub xi: u64,
    pub eta: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `ξ₀ ≡ theta1`, `η₀ ≡ theta2` on a torus.
    Constant {
        theta1: u64,
        theta2: u64,
    },
    Sites(Vec<SiteCount>),
}

impl InitialSpec {
    pub fn build(&self, lattice: Lattice) -> Result<ParticleState> {
        match self {
            InitialSpec::Constant { theta1, theta2 } => ParticleState::constant(lattice, *theta1, *theta2),
            InitialSpec::Sites(list) => {
                let entries: Vec<(Site, u64, u64)> = list.iter().map(|s| (s.site, s.xi, s.eta)).collect();
                ParticleState::from_counts(lattice, &entries)
            }
        }
    }
}

/// A torus field: one value everywhere, or one per site in index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Constant(f64),
    Values(Vec<f64>),
}

impl FieldSpec {
    pub fn build(&self, size: usize) -> Result<Vec<f64>> {
        let v = match self {
            FieldSpec::Constant(c) => vec![*c; size],
            FieldSpec::Values(v) if v.len() == size => v.clone(),
            FieldSpec::Values(v) => {
                return Err(Error::Config(vec![format!(
                    "field has {} values, torus has {size} sites",
                    v.len()
                )]))
            }
        };
        if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Config(vec![
                "field values must be finite and non-negative".into()
            ]));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldPairSpec {
    pub u: FieldSpec,
    pub v: FieldSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub lattice: LatticeSpec,
    #[serde(default = "one")]
    pub kappa: f64,
    pub gamma: f64,
    #[serde(default = "default_law")]
    pub law: LawSpec,
    pub horizon: f64,
    pub initial: InitialSpec,
    pub replicates: usize,
    pub seed: u64,
    /// Write every event to `events.ndjson`.
    #[serde(default)]
    pub record_events: bool,
    #[serde(default)]
    pub event_cap: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdeMode {
    /// Field system on a torus.
    Field,
    /// Two-dimensional limit diffusion.
    Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSdeConfig {
    pub mode: SdeMode,
    /// Required in field mode; must be a torus.
    #[serde(default)]
    pub lattice: Option<LatticeSpec>,
    #[serde(default = "one")]
    pub kappa: f64,
    pub gamma_tilde: f64,
    /// Field mode: initial fields. Limit mode: constants give `(X₀, Y₀)`.
    pub initial: FieldPairSpec,
    pub t: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelsConfig {
    pub lattice: LatticeSpec,
    #[serde(default = "one")]
    pub kappa: f64,
    pub times: Vec<f64>,
    /// Also write `g_∞(0)` on `Z^d` and the resulting `γσ²` bound.
    #[serde(default)]
    pub green_infinity: bool,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsCheckConfig {
    pub lattice: LatticeSpec,
    #[serde(default = "one")]
    pub kappa: f64,
    pub gamma: f64,
    #[serde(default = "default_law")]
    pub law: LawSpec,
    pub theta1: u64,
    pub theta2: u64,
    pub t: f64,
    /// Site pair for the two-point moments; defaults to the origin and `e₁`.
    #[serde(default)]
    pub x: Option<Site>,
    #[serde(default)]
    pub y: Option<Site>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_z")]
    pub z_threshold: f64,
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoexistenceConfig {
    pub dim: usize,
    #[serde(default = "one")]
    pub kappa: f64,
    pub gamma: f64,
    #[serde(default = "default_law")]
    pub law: LawSpec,
    pub horizons: Vec<f64>,
    /// Defaults to one particle of each type at the origin.
    #[serde(default)]
    pub initial: Option<Vec<SiteCount>>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FssExperimentConfig {
    pub dim: usize,
    pub n_values: Vec<u32>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub theta1: u64,
    pub theta2: u64,
    pub gamma: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "default_law")]
    pub law: LawSpec,
    /// `(a, b)` pairs; defaults to `{0, 0.5, 1}²`.
    #[serde(default)]
    pub grid: Option<Vec<(f64, f64)>>,
    pub replicates: usize,
    pub diffusion_paths: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub seed: u64,
    #[serde(default)]
    pub allow_large_gamma: bool,
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualityCheckConfig {
    pub lattice: LatticeSpec,
    #[serde(default = "one")]
    pub kappa: f64,
    pub gamma_tilde: f64,
    pub left: FieldPairSpec,
    pub right: FieldPairSpec,
    pub t: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Allowance for discretization bias added to `3·stderr`.
    #[serde(default = "default_bias")]
    pub bias_allowance: f64,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_bias() -> f64 {
    0.01
}

/// Collects validation problems by field name.
#[derive(Default)]
pub(crate) struct Problems(Vec<String>);

impl Problems {
    pub fn check(&mut self, ok: bool, field: &str, msg: impl std::fmt::Display) {
        if !ok {
            self.0.push(format!("{field}: {msg}"));
        }
    }

    pub fn positive(&mut self, field: &str, x: f64) {
        self.check(
            x > 0.0 && x.is_finite(),
            field,
            format_args!("must be positive, got {x}"),
        );
    }

    pub fn non_negative(&mut self, field: &str, x: f64) {
        self.check(
            x >= 0.0 && x.is_finite(),
            field,
            format_args!("must be non-negative, got {x}"),
        );
    }

    pub fn replicates(&mut self, n: usize) {
        self.check(n > 0, "replicates", "must be positive");
    }

    pub fn threads(&mut self, t: Option<usize>) {
        self.check(t != Some(0), "threads", "must be positive when given");
    }

    pub fn absorb<T>(&mut self, field: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(Error::Config(list)) => {
                self.0.extend(list.into_iter().map(|m| format!("{field}: {m}")));
                None
            }
            Err(e) => {
                self.0.push(format!("{field}: {e}"));
                None
            }
        }
    }

    pub fn finish(self) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(self.0))
        }
    }
}

impl SimulateConfig {
    pub fn validate(&self) -> Result<()> {
        let mut p = Problems::default();
        p.positive("kappa", self.kappa);
        p.positive("gamma", self.gamma);
        p.non_negative("horizon", self.horizon);
        p.replicates(self.replicates);
        p.threads(self.threads);
        p.check(self.event_cap != Some(0), "event_cap", "must be positive when given");
        p.absorb("law", self.law.build());
        if let Some(lat) = p.absorb("lattice", self.lattice.build()) {
            p.absorb("initial", self.initial.build(lat));
        }
        p.finish()
    }
}

impl SimulateSdeConfig {
    pub fn validate(&self) -> Result<()> {
        let mut p = Problems::default();
        p.positive("kappa", self.kappa);
        p.non_negative("gamma_tilde", self.gamma_tilde);
        p.non_negative("t", self.t);
        p.positive("dt", self.dt);
        p.replicates(self.replicates);
        p.threads(self.threads);
        match self.mode {
            SdeMode::Field => match self.lattice.map(|l| l.build()) {
                None => p.check(false, "lattice", "required in field mode"),
                Some(Ok(lat)) => match lat.size() {
                    Some(size) => {
                        p.absorb("initial.u", self.initial.u.build(size));
                        p.absorb("initial.v", self.initial.v.build(size));
                        p.check(self.kappa * self.dt < 1.0, "dt", "kappa * dt must be below 1");
                    }
                    None => p.check(false, "lattice", "field mode needs a torus (set half_width)"),
                },
                Some(Err(e)) => p.check(false, "lattice", e),
            },
            SdeMode::Limit => {
                for (name, f) in [("initial.u", &self.initial.u), ("initial.v", &self.initial.v)] {
                    p.check(
                        matches!(f, FieldSpec::Constant(_)),
                        name,
                        "limit mode takes a single number",
                    );
                    p.absorb(name, f.build(1));
                }
            }
        }
        p.finish()
    }
}

impl KernelsConfig {
    pub fn validate(&self) -> Result<()> {
        let mut p = Problems::default();
        p.positive("kappa", self.kappa);
        p.check(!self.times.is_empty(), "times", "must not be empty");
        for t in &self.times {
            p.non_negative("times", *t);
        }
        match self.lattice.build() {
            Ok(lat) => {
                p.check(lat.is_torus(), "lattice", "kernel tables need a torus (set half_width)");
                p.check(
                    lat.size().is_none_or(|s| s <= 20_000),
                    "lattice",
                    "torus too large for a dense kernel dump (max 20000 sites)",
                );
            }
            Err(e) => p.check(false, "lattice", e),
        }
        p.check(
            !self.green_infinity || self.lattice.dim >= 3,
            "green_infinity",
            "g_inf is finite only for dim >= 3",
        );
        p.finish()
    }
}

impl MomentsCheckConfig {
    pub fn validate(&self) -> Result<()> {
        let mut p = Problems::default();
        p.positive("kappa", self.kappa);
        p.positive("gamma", self.gamma);
        p.non_negative("t", self.t);
        p.replicates(self.replicates);
        p.threads(self.threads);
        p.positive("z_threshold", self.z_threshold);
        p.absorb("law", self.law.build());
        match self.lattice.build() {
            Ok(lat) if lat.is_torus() => {
                let (x, y) = self.sites(&lat);
                p.check(lat.contains(&x), "x", "not a torus site");
                p.check(lat.contains(&y), "y", "not a torus site");
                p.check(x != y, "y", "must differ from x");
            }
            Ok(_) => p.check(false, "lattice", "moment checks need a torus (set half_width)"),
            Err(e) => p.check(false, "lattice", e),
        }
        p.finish()
    }

    pub fn sites(&self, lattice: &Lattice) -> (Site, Site) {
        let d = lattice.dim();
        let x = self.x.unwrap_or_else(|| Site::origin(d));
        let y = self.y.unwrap_or_else(|| Site::origin(d).shifted(0, 1));
        (x, y)
    }
}

impl CoexistenceConfig {
    pub fn validate(&self) -> Result<()> {
        let mut p = Problems::default();
        p.positive("kappa", self.kappa);
        p.positive("gamma", self.gamma);
        p.replicates(self.replicates);
        p.threads(self.threads);
        p.check(!self.horizons.is_empty(), "horizons", "must not be empty");
        for h in &self.horizons {
            p.non_negative("horizons", *h);
        }
        p.absorb("law", self.law.build());
        if let Some(lat) = p.absorb("dim", Lattice::infinite(self.dim)) {
            p.absorb("initial", self.initial_state(lat));
        }
        p.finish()
    }

    pub fn initial_state(&self, lattice: Lattice) -> Result<ParticleState> {
        match &self.initial {
            Some(list) => InitialSpec::Sites(list.clone()).build(lattice),
            None => ParticleState::from_counts(lattice, &[(Site::origin(lattice.dim()), 1, 1)]),
        }
    }
}

impl FssExperimentConfig {
    pub fn to_fss(&self) -> Result<crate::fss::FssConfig> {
        let mut p = Problems::default();
        p.replicates(self.replicates);
        p.threads(self.threads);
        let law = p.absorb("law", self.law.build());
        p.finish()?;
        let mut cfg = crate::fss::FssConfig::new(
            self.dim,
            self.n_values.clone(),
            self.horizon,
            (self.theta1, self.theta2),
            self.gamma,
            law.expect("checked"),
        );
        cfg.kappa = self.kappa;
        if let Some(g) = &self.grid {
            cfg.grid = g.clone();
        }
        cfg.particle_replicates = self.replicates;
        cfg.diffusion_paths = self.diffusion_paths;
        cfg.dt = self.dt;
        cfg.seed = self.seed;
        cfg.allow_large_gamma = self.allow_large_gamma;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl DualityCheckConfig {
    pub fn to_duality(&self) -> Result<crate::sde::DualityConfig> {
        let mut p = Problems::default();
        p.positive("kappa", self.kappa);
        p.non_negative("gamma_tilde", self.gamma_tilde);
        p.non_negative("t", self.t);
        p.positive("dt", self.dt);
        p.non_negative("bias_allowance", self.bias_allowance);
        p.replicates(self.replicates);
        p.threads(self.threads);
        p.check(self.kappa * self.dt < 1.0, "dt", "kappa * dt must be below 1");
        let lat = match self.lattice.build() {
            Ok(l) if l.is_torus() => Some(l),
            Ok(_) => {
                p.check(false, "lattice", "duality checks need a torus (set half_width)");
                None
            }
            Err(e) => {
                p.check(false, "lattice", e);
                None
            }
        };
        let size = lat.and_then(|l| l.size()).unwrap_or(0);
        let fields = lat.map(|_| {
            (
                p.absorb("left.u", self.left.u.build(size)),
                p.absorb("left.v", self.left.v.build(size)),
                p.absorb("right.u", self.right.u.build(size)),
                p.absorb("right.v", self.right.v.build(size)),
            )
        });
        p.finish()?;
        let (Some(lattice), Some((Some(lu), Some(lv), Some(ru), Some(rv)))) = (lat, fields) else {
            unreachable!("problems were reported above")
        };
        Ok(crate::sde::DualityConfig {
            lattice,
            kappa: self.kappa,
            gamma_tilde: self.gamma_tilde,
            left: (lu, lv),
            right: (ru, rv),
            t: self.t,
            replicates: self.replicates,
            dt: self.dt,
            seed: self.seed,
        })
    }
}
