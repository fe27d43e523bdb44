//! Experiment orchestration behind the command-line subcommands.
//!
//! Each subcommand reads one JSON config, runs replicates through the
//! seeded runner and writes CSV tables, optional NDJSON logs, plot scripts
//! and `manifest.json` into an output directory. CSV bytes depend only on
//! the config and master seed; the manifest additionally records wall time
//! and thread count.

mod config;
mod output;
mod plot;

use std::path::Path;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

pub use config::{
    CoexistenceConfig, DualityCheckConfig, FieldPairSpec, FieldSpec, FssExperimentConfig, InitialSpec, KernelsConfig,
    LatticeSpec, MomentsCheckConfig, SdeMode, SimulateConfig, SimulateSdeConfig, SiteCount,
};
pub use output::{
    config_hash, sha256_hex, version_string, Cell, OutputDir, OutputFile, RunManifest, Table, SCHEMA_VERSION, SEED_RULE,
};
pub use plot::{csv_columns, emit_plot_script, PlotKind};

use crate::error::{Error, Result};
use crate::fss::fss_compare;
use crate::kernels::{green_infinity_zd, max_gamma_sigma2, KernelTable, GREEN_TOLERANCE};
use crate::lattice::{Lattice, Site};
use crate::moments::{self, MomentQuery};
use crate::particle::{coexistence_trial, run, survival_curve, EventRecord, SimConfig};
use crate::sde::{deterministic_duality_sides, limit_diffusion_path, self_duality_check, DpIntegrator, FieldPair};
use crate::seeding::{domain_seed, replicate_map, rng_from_seed, SeedDomain};
use crate::stats::SampleStats;

/// Environment variable overriding the default worker count.
pub const THREADS_ENV: &str = "CATALYTIC_THREADS";

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VALIDATION: i32 = 2;
    pub const CHECK_FAILED: i32 = 3;
    pub const INTERNAL: i32 = 4;
}

/// Exit code for an error: input problems are validation failures,
/// everything else is internal.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Misuse(_)
        | Error::InvalidLattice(_)
        | Error::NotNormalized { .. }
        | Error::NotCritical { .. }
        | Error::InvalidLaw(_)
        | Error::Divergent { .. }
        | Error::Stability { .. }
        | Error::Config(_)
        | Error::Schema(_)
        | Error::Json(_) => exit::VALIDATION,
        Error::EventCapExceeded { .. } | Error::Io(_) | Error::Csv(_) => exit::INTERNAL,
    }
}

/// Machine-readable error record for stderr.
pub fn error_json(err: &Error) -> serde_json::Value {
    let (kind, messages) = match err {
        Error::Config(m) => ("config", m.clone()),
        Error::Schema(m) => ("schema", m.iter().map(|c| format!("missing column: {c}")).collect()),
        Error::Json(e) => ("parse", vec![e.to_string()]),
        Error::EventCapExceeded { .. } => ("event_cap", vec![err.to_string()]),
        Error::Io(_) | Error::Csv(_) => ("io", vec![err.to_string()]),
        _ => ("invalid_input", vec![err.to_string()]),
    };
    json!({ "error": kind, "exit_code": exit_code(err), "messages": messages })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Simulate,
    SimulateSde,
    Kernels,
    MomentsCheck,
    Coexistence,
    Fss,
    DualityCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Simulate,
        ExperimentKind::SimulateSde,
        ExperimentKind::Kernels,
        ExperimentKind::MomentsCheck,
        ExperimentKind::Coexistence,
        ExperimentKind::Fss,
        ExperimentKind::DualityCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::SimulateSde => "simulate-sde",
            ExperimentKind::Kernels => "kernels",
            ExperimentKind::MomentsCheck => "moments-check",
            ExperimentKind::Coexistence => "coexistence",
            ExperimentKind::Fss => "fss",
            ExperimentKind::DualityCheck => "duality-check",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    /// Human-readable summary lines.
    pub report: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.manifest.passed == Some(false) {
            exit::CHECK_FAILED
        } else {
            exit::SUCCESS
        }
    }
}

pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

/// Worker count from the config, else the environment, else all cores.
/// The global pool can be sized only once per process; later calls keep
/// the first size.
pub fn configure_threads(requested: Option<usize>) -> Result<usize> {
    let from_env =
        match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
                Error::Config(vec![format!("{THREADS_ENV}: expected a positive integer, got `{v}`")])
            })?),
            Err(_) => None,
        };
    let wanted = requested.or(from_env);
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = wanted {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(rayon::current_num_threads())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = wanted;
        Ok(1)
    }
}

/// Run one experiment from its JSON config text.
pub fn run_experiment(kind: ExperimentKind, config_text: &str, out_dir: &Path) -> Result<RunOutcome> {
    let started = Instant::now();
    let mut result = match kind {
        ExperimentKind::Simulate => prepare(
            config_text,
            out_dir,
            |c: &SimulateConfig| (c.seed, c.threads),
            run_simulate,
        ),
        ExperimentKind::SimulateSde => prepare(
            config_text,
            out_dir,
            |c: &SimulateSdeConfig| (c.seed, c.threads),
            run_simulate_sde,
        ),
        ExperimentKind::Kernels => prepare(config_text, out_dir, |c: &KernelsConfig| (c.seed, None), run_kernels),
        ExperimentKind::MomentsCheck => prepare(
            config_text,
            out_dir,
            |c: &MomentsCheckConfig| (c.seed, c.threads),
            run_moments_check,
        ),
        ExperimentKind::Coexistence => prepare(
            config_text,
            out_dir,
            |c: &CoexistenceConfig| (c.seed, c.threads),
            run_coexistence,
        ),
        ExperimentKind::Fss => prepare(
            config_text,
            out_dir,
            |c: &FssExperimentConfig| (c.seed, c.threads),
            run_fss,
        ),
        ExperimentKind::DualityCheck => prepare(
            config_text,
            out_dir,
            |c: &DualityCheckConfig| (c.seed, c.threads),
            run_duality,
        ),
    }?;
    result.manifest.subcommand = kind.name().into();
    result.manifest.wall_time_seconds = started.elapsed().as_secs_f64();
    let bytes = serde_json::to_vec_pretty(&result.manifest)?;
    std::fs::write(out_dir.join("manifest.json"), bytes)?;
    Ok(result)
}

/// What a runner hands back before the manifest is assembled.
struct Produced {
    passed: Option<bool>,
    summary: serde_json::Value,
    report: Vec<String>,
}

fn prepare<C, F>(text: &str, out_dir: &Path, meta: impl Fn(&C) -> (u64, Option<usize>), body: F) -> Result<RunOutcome>
where
    C: DeserializeOwned + Serialize,
    F: FnOnce(&C, &mut OutputDir) -> Result<Produced>,
{
    let cfg: C = parse_config(text)?;
    let (seed, threads) = meta(&cfg);
    let threads = configure_threads(threads)?;
    let hash = config_hash(&cfg)?;
    let mut out = OutputDir::create(out_dir, &hash, seed)?;
    let produced = body(&cfg, &mut out)?;
    Ok(RunOutcome {
        manifest: RunManifest {
            schema: format!("catalytic.manifest/{SCHEMA_VERSION}"),
            subcommand: String::new(),
            version: version_string(),
            config_hash: hash,
            master_seed: seed,
            seed_rule: SEED_RULE.into(),
            threads,
            wall_time_seconds: 0.0,
            passed: produced.passed,
            outputs: out.into_files(),
            summary: produced.summary,
        },
        report: produced.report,
    })
}

fn mean_se(s: &SampleStats) -> serde_json::Value {
    json!({ "mean": s.mean(), "stderr": s.stderr() })
}

fn coord_columns(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

fn run_simulate(cfg: &SimulateConfig, out: &mut OutputDir) -> Result<Produced> {
    cfg.validate()?;
    let lattice = cfg.lattice.build()?;
    let law = cfg.law.build()?;
    let initial = cfg.initial.build(lattice)?;
    let mut base = SimConfig::new(lattice, cfg.kappa, cfg.gamma, law, cfg.horizon, 0);
    base.record_trajectory = cfg.record_events;
    if let Some(cap) = cfg.event_cap {
        base.event_cap = cap;
    }
    let master = domain_seed(cfg.seed, SeedDomain::Particle);
    let trajs = replicate_map(cfg.replicates, master, |_, seed| {
        run(&SimConfig { seed, ..base.clone() }, initial.clone()).map(|t| (seed, t))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut reps = Table::new(
        "replicates",
        "catalytic.simulate.replicates",
        &[
            "replicate",
            "seed",
            "final_time",
            "total_xi",
            "total_eta",
            "xi_walks",
            "eta_walks",
            "xi_branches",
            "eta_branches",
            "quiescent",
        ],
    );
    let mut mass = Table::new(
        "mass",
        "catalytic.simulate.mass",
        &["replicate", "time", "total_xi", "total_eta"],
    );
    #[derive(Serialize)]
    struct Logged<'a> {
        replicate: usize,
        #[serde(flatten)]
        event: &'a EventRecord,
    }
    let mut events = Vec::new();
    let (mut sx, mut se) = (SampleStats::new(), SampleStats::new());
    for (i, (seed, t)) in trajs.iter().enumerate() {
        let s = &t.final_state;
        let c = t.counts;
        reps.push(crate::row![
            i,
            seed,
            s.clock(),
            s.total_xi(),
            s.total_eta(),
            c.xi_walks,
            c.eta_walks,
            c.xi_branches,
            c.eta_branches,
            t.quiescent
        ]);
        for p in t.total_mass_series() {
            mass.push(crate::row![i, p.time, p.total_xi, p.total_eta]);
        }
        if let Some(evs) = &t.events {
            events.extend(evs.iter().map(|e| Logged { replicate: i, event: e }));
        }
        sx.push(s.total_xi() as f64);
        se.push(s.total_eta() as f64);
    }
    out.write_table(&reps)?;
    out.write_table(&mass)?;
    if cfg.record_events {
        out.write_ndjson("events.ndjson", "catalytic.simulate.events", &events)?;
    }
    Ok(Produced {
        passed: None,
        summary: json!({
            "replicates": cfg.replicates,
            "initial_total_xi": initial.total_xi(),
            "initial_total_eta": initial.total_eta(),
            "final_total_xi": mean_se(&sx),
            "final_total_eta": mean_se(&se),
        }),
        report: vec![
            format!("replicates: {}", cfg.replicates),
            format!(
                "final total xi: {:.4} ± {:.4} (initial {})",
                sx.mean(),
                sx.stderr(),
                initial.total_xi()
            ),
            format!(
                "final total eta: {:.4} ± {:.4} (initial {})",
                se.mean(),
                se.stderr(),
                initial.total_eta()
            ),
        ],
    })
}

fn run_simulate_sde(cfg: &SimulateSdeConfig, out: &mut OutputDir) -> Result<Produced> {
    cfg.validate()?;
    let master = domain_seed(cfg.seed, SeedDomain::Diffusion);
    let mut table;
    let (mut su, mut sv) = (SampleStats::new(), SampleStats::new());
    let (u0, v0);
    match cfg.mode {
        SdeMode::Field => {
            let lattice = cfg.lattice.expect("validated").build()?;
            let size = lattice.size().expect("torus");
            let kt = KernelTable::new(lattice, cfg.kappa)?;
            let start = FieldPair::new(cfg.initial.u.build(size)?, cfg.initial.v.build(size)?)?;
            (u0, v0) = (start.total_u(), start.total_v());
            let paths = replicate_map(cfg.replicates, master, |_, seed| {
                let mut integ = DpIntegrator::new(&kt)?;
                let mut s = start.clone();
                integ.advance(&mut s, cfg.gamma_tilde, cfg.t, cfg.dt, &mut rng_from_seed(seed))?;
                Ok((seed, s))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            table = Table::new(
                "paths",
                "catalytic.sde.field",
                &["replicate", "seed", "total_u", "total_v", "clipped"],
            );
            for (i, (seed, s)) in paths.iter().enumerate() {
                table.push(crate::row![i, seed, s.total_u(), s.total_v(), s.clipped]);
                su.push(s.total_u());
                sv.push(s.total_v());
            }
        }
        SdeMode::Limit => {
            let x0 = cfg.initial.u.build(1)?[0];
            let y0 = cfg.initial.v.build(1)?[0];
            (u0, v0) = (x0, y0);
            let paths = replicate_map(cfg.replicates, master, |_, seed| {
                limit_diffusion_path(x0, y0, cfg.gamma_tilde, cfg.t, cfg.dt, &mut rng_from_seed(seed))
                    .map(|p| (seed, p))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            table = Table::new(
                "paths",
                "catalytic.sde.limit",
                &["replicate", "seed", "x", "y", "clipped"],
            );
            for (i, (seed, (s, clipped))) in paths.iter().enumerate() {
                table.push(crate::row![i, seed, s.x, s.y, clipped]);
                su.push(s.x);
                sv.push(s.y);
            }
        }
    }
    out.write_table(&table)?;
    Ok(Produced {
        passed: None,
        summary: json!({
            "initial_total_u": u0,
            "initial_total_v": v0,
            "final_total_u": mean_se(&su),
            "final_total_v": mean_se(&sv),
        }),
        report: vec![
            format!("final total u: {:.5} ± {:.5} (initial {u0})", su.mean(), su.stderr()),
            format!("final total v: {:.5} ± {:.5} (initial {v0})", sv.mean(), sv.stderr()),
        ],
    })
}

fn run_kernels(cfg: &KernelsConfig, out: &mut OutputDir) -> Result<Produced> {
    cfg.validate()?;
    let lattice = cfg.lattice.build()?;
    let kt = KernelTable::new(lattice, cfg.kappa)?;
    let mut cols = vec!["t".to_string(), "site_index".to_string()];
    cols.extend(coord_columns(lattice.dim()));
    cols.extend(["p_t".to_string(), "g_t".to_string()]);
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::new("kernels", "catalytic.kernels", &col_refs);
    for &t in &cfg.times {
        let p = kt.p_t_field(t)?;
        let g = kt.green_field(t)?;
        for (i, x) in lattice.sites().enumerate() {
            let mut row = crate::row![t, i];
            row.extend(x.coords().iter().map(|c| c.to_string()));
            row.extend(crate::row![p[i], g[i]]);
            table.push(row);
        }
    }
    out.write_table(&table)?;
    let mut summary = json!({ "sites": lattice.size(), "times": cfg.times });
    let mut report = vec![format!(
        "{} sites, {} times",
        lattice.size().unwrap_or(0),
        cfg.times.len()
    )];
    if cfg.green_infinity {
        let g0 = green_infinity_zd(lattice.dim(), cfg.kappa, &Site::origin(lattice.dim()), GREEN_TOLERANCE)?;
        let bound = max_gamma_sigma2(g0);
        let mut gi = Table::new(
            "green_infinity",
            "catalytic.kernels.green_infinity",
            &["dim", "kappa", "g_inf_0", "max_gamma_sigma2"],
        );
        gi.push(crate::row![lattice.dim(), cfg.kappa, g0, bound]);
        out.write_table(&gi)?;
        summary["g_inf_0"] = json!(g0);
        summary["max_gamma_sigma2"] = json!(bound);
        report.push(format!(
            "g_inf(0) on Z^{} = {g0:.10}, max gamma*sigma2 = {bound:.6}",
            lattice.dim()
        ));
    }
    let path = out.root().join("kernels.csv");
    out.register(&emit_plot_script(&path, PlotKind::Kernels)?)?;
    Ok(Produced {
        passed: None,
        summary,
        report,
    })
}

fn run_moments_check(cfg: &MomentsCheckConfig, out: &mut OutputDir) -> Result<Produced> {
    cfg.validate()?;
    let lattice = cfg.lattice.build()?;
    let law = cfg.law.build()?;
    let (x, y) = cfg.sites(&lattice);
    let kt = KernelTable::new(lattice, cfg.kappa)?;
    let sim = SimConfig::new(lattice, cfg.kappa, cfg.gamma, law.clone(), cfg.t, 0);
    let initial = crate::particle::ParticleState::constant(lattice, cfg.theta1, cfg.theta2)?;
    let master = domain_seed(cfg.seed, SeedDomain::Particle);
    let finals = replicate_map(cfg.replicates, master, |_, seed| {
        let t = run(&SimConfig { seed, ..sim.clone() }, initial.clone())?;
        let s = &t.final_state;
        Ok([
            s.xi(&x) as f64,
            s.eta(&x) as f64,
            s.xi(&y) as f64,
            s.eta(&y) as f64,
            s.total_xi() as f64,
            s.total_eta() as f64,
        ])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let q = MomentQuery::new(&kt, cfg.t, cfg.gamma, law.sigma2(), cfg.theta1, cfg.theta2).at(x, y);
    let size = lattice.size().expect("torus") as f64;
    type Sample = fn(&[f64; 6]) -> f64;
    let checks: Vec<(&str, f64, Sample)> = vec![
        ("mean_xi", moments::mean_xi(&q)?, |s| s[0]),
        ("mean_eta", moments::mean_eta(&q)?, |s| s[1]),
        ("cross_xi_x_eta_y", moments::cross_moment(&q)?, |s| s[0] * s[3]),
        ("second_xi", moments::second_moment_xi(&q)?, |s| s[0] * s[0]),
        ("second_eta", moments::second_moment_eta(&q)?, |s| s[1] * s[1]),
        ("pair_xi", moments::pair_moment_xi(&q)?, |s| s[0] * s[2]),
        ("pair_eta", moments::pair_moment_eta(&q)?, |s| s[1] * s[3]),
        ("total_xi", cfg.theta1 as f64 * size, |s| s[4]),
        ("total_eta", cfg.theta2 as f64 * size, |s| s[5]),
    ];
    let mut table = Table::new(
        "moments",
        "catalytic.moments",
        &["quantity", "oracle", "mc_mean", "mc_stderr", "z", "pass"],
    );
    let mut report = Vec::new();
    let mut all = true;
    for (name, oracle, f) in checks {
        let stats: SampleStats = finals.iter().map(f).collect();
        let z = stats.z_score(oracle);
        let pass = z.abs() < cfg.z_threshold;
        all &= pass;
        table.push(crate::row![name, oracle, stats.mean(), stats.stderr(), z, pass]);
        report.push(format!(
            "{:<18} oracle {:>12.6}  mc {:>12.6} ± {:<10.6} z {:>7.3}  {}",
            name,
            oracle,
            stats.mean(),
            stats.stderr(),
            z,
            if pass { "ok" } else { "FAIL" }
        ));
    }
    let path = out.write_table(&table)?;
    out.register(&emit_plot_script(&path, PlotKind::Moments)?)?;
    Ok(Produced {
        passed: Some(all),
        summary: json!({ "replicates": cfg.replicates, "z_threshold": cfg.z_threshold, "all_within": all }),
        report,
    })
}

fn run_coexistence(cfg: &CoexistenceConfig, out: &mut OutputDir) -> Result<Produced> {
    cfg.validate()?;
    let lattice = Lattice::infinite(cfg.dim)?;
    let law = cfg.law.build()?;
    let initial = cfg.initial_state(lattice)?;
    let horizon = cfg.horizons.iter().copied().fold(0.0, f64::max);
    let base = SimConfig::new(lattice, cfg.kappa, cfg.gamma, law, horizon, 0);
    let master = domain_seed(cfg.seed, SeedDomain::Particle);
    let records = replicate_map(cfg.replicates, master, |_, seed| {
        coexistence_trial(&SimConfig { seed, ..base.clone() }, initial.clone(), horizon).map(|r| (seed, r))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut trials = Table::new(
        "trials",
        "catalytic.coexistence.trials",
        &[
            "replicate",
            "seed",
            "xi_alive",
            "eta_alive",
            "extinction_time",
            "final_xi",
            "final_eta",
        ],
    );
    for (i, (seed, r)) in records.iter().enumerate() {
        let tau = r.extinction_time.map(|t| t.cell()).unwrap_or_default();
        trials.push(crate::row![
            i,
            seed,
            r.xi_alive,
            r.eta_alive,
            tau,
            r.final_totals.0,
            r.final_totals.1
        ]);
    }
    let recs: Vec<_> = records.iter().map(|r| r.1).collect();
    let curve = survival_curve(&recs, &cfg.horizons);
    let mut table = Table::new(
        "survival",
        "catalytic.coexistence.survival",
        &["horizon", "replicates", "both_alive", "estimate", "stderr"],
    );
    let mut report = Vec::new();
    for p in &curve {
        table.push(crate::row![p.horizon, p.replicates, p.both_alive, p.estimate, p.stderr]);
        report.push(format!(
            "horizon {:>8}: P(both alive) = {:.4} ± {:.4} ({} / {})",
            p.horizon, p.estimate, p.stderr, p.both_alive, p.replicates
        ));
    }
    out.write_table(&trials)?;
    let path = out.write_table(&table)?;
    out.register(&emit_plot_script(&path, PlotKind::Coexistence)?)?;
    Ok(Produced {
        passed: None,
        summary: json!({ "curve": curve }),
        report,
    })
}

fn run_fss(cfg: &FssExperimentConfig, out: &mut OutputDir) -> Result<Produced> {
    let fss = cfg.to_fss()?;
    let rep = fss_compare(&fss)?;
    let mut table = Table::new(
        "fss",
        "catalytic.fss",
        &[
            "n",
            "a",
            "b",
            "particle_re",
            "particle_im",
            "particle_stderr",
            "limit_re",
            "limit_im",
            "limit_stderr",
            "gap",
            "combined_stderr",
            "within_threshold",
            "trend_ok",
            "verdict",
        ],
    );
    let k = fss.grid.len();
    let mut report = Vec::new();
    for (i, r) in rep.rows.iter().enumerate() {
        let trend = i < k || {
            let prev = &rep.rows[i - k];
            r.gap <= prev.gap + 3.0 * prev.combined_stderr.hypot(r.combined_stderr)
        };
        let ok = r.within_threshold && trend;
        table.push(crate::row![
            r.n,
            r.a,
            r.b,
            r.particle.value.re,
            r.particle.value.im,
            r.particle.stderr,
            r.limit.value.re,
            r.limit.value.im,
            r.limit.stderr,
            r.gap,
            r.combined_stderr,
            r.within_threshold,
            trend,
            if ok { "pass" } else { "fail" }
        ]);
        report.push(format!(
            "n={} a={} b={}: gap {:.5} (3σ {:.5}) {}",
            r.n,
            r.a,
            r.b,
            r.gap,
            3.0 * r.combined_stderr,
            if ok { "ok" } else { "FAIL" }
        ));
    }
    let mut totals = Table::new(
        "totals",
        "catalytic.fss.totals",
        &["n", "mean_xi", "stderr_xi", "mean_eta", "stderr_eta"],
    );
    for &(n, mx, sx, me, se) in &rep.mean_totals {
        totals.push(crate::row![n, mx, sx, me, se]);
    }
    let path = out.write_table(&table)?;
    out.write_table(&totals)?;
    out.register(&emit_plot_script(&path, PlotKind::Fss)?)?;
    let passed = rep.all_within_threshold && rep.trend_ok;
    report.push(format!(
        "gamma*sigma2 = {} (bound {:.6}); all within threshold: {}; trend: {}",
        rep.gamma_sigma2, rep.gamma_sigma2_bound, rep.all_within_threshold, rep.trend_ok
    ));
    Ok(Produced {
        passed: Some(passed),
        summary: json!({
            "gamma_sigma2": rep.gamma_sigma2,
            "gamma_sigma2_bound": rep.gamma_sigma2_bound,
            "all_within_threshold": rep.all_within_threshold,
            "trend_ok": rep.trend_ok,
        }),
        report,
    })
}

/// Tolerance for the noise-free semigroup comparison.
const EXACT_TOLERANCE: f64 = 1e-8;

fn run_duality(cfg: &DualityCheckConfig, out: &mut OutputDir) -> Result<Produced> {
    let dc = cfg.to_duality()?;
    let rec = self_duality_check(&dc)?;
    let mut table = Table::new(
        "duality",
        "catalytic.duality",
        &["side", "re", "im", "stderr", "replicates"],
    );
    table.push(crate::row![
        "lhs",
        rec.lhs.re,
        rec.lhs.im,
        rec.lhs_stderr,
        rec.replicates
    ]);
    table.push(crate::row![
        "rhs",
        rec.rhs.re,
        rec.rhs.im,
        rec.rhs_stderr,
        rec.replicates
    ]);
    let tolerance = 3.0 * rec.combined_stderr() + cfg.bias_allowance;
    let mut passed = rec.gap() <= tolerance;
    let mut report = vec![
        format!("lhs = {:.6} {:+.6}i ± {:.6}", rec.lhs.re, rec.lhs.im, rec.lhs_stderr),
        format!("rhs = {:.6} {:+.6}i ± {:.6}", rec.rhs.re, rec.rhs.im, rec.rhs_stderr),
        format!("|lhs - rhs| = {:.6}, tolerance {:.6}", rec.gap(), tolerance),
    ];
    let mut summary = json!({
        "gap": rec.gap(),
        "combined_stderr": rec.combined_stderr(),
        "tolerance": tolerance,
        "max_clipped_fraction": rec.max_clipped_fraction,
    });
    if cfg.gamma_tilde == 0.0 {
        let kt = KernelTable::new(dc.lattice, dc.kappa)?;
        let (l, r) = deterministic_duality_sides(&kt, dc.t, (&dc.left.0, &dc.left.1), (&dc.right.0, &dc.right.1))?;
        table.push(crate::row!["exact_lhs", l.re, l.im, 0.0, 0u64]);
        table.push(crate::row!["exact_rhs", r.re, r.im, 0.0, 0u64]);
        let exact_gap = l.sub(&r).abs();
        passed &= exact_gap <= EXACT_TOLERANCE;
        summary["exact_gap"] = json!(exact_gap);
        report.push(format!("noise-free semigroup sides differ by {exact_gap:.3e}"));
    }
    let mut check = Table::new(
        "duality_check",
        "catalytic.duality.check",
        &[
            "gap",
            "combined_stderr",
            "bias_allowance",
            "tolerance",
            "max_clipped_fraction",
            "passed",
        ],
    );
    check.push(crate::row![
        rec.gap(),
        rec.combined_stderr(),
        cfg.bias_allowance,
        tolerance,
        rec.max_clipped_fraction,
        passed
    ]);
    out.write_table(&table)?;
    out.write_table(&check)?;
    Ok(Produced {
        passed: Some(passed),
        summary,
        report,
    })
}
