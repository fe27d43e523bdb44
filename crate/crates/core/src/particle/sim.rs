use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::state::{ParticleState, Species};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Site};
use crate::offspring::OffspringLaw;
use crate::seeding::{rng_from_seed, SimRng};

pub const DEFAULT_EVENT_CAP: u64 = 1_000_000_000;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub lattice: Lattice,
    /// Jump rate of each particle.
    pub kappa: f64,
    /// Branching-rate constant: a ξ-particle at `x` branches at rate `γ η(x)`.
    pub gamma: f64,
    pub law: OffspringLaw,
    pub horizon: f64,
    pub seed: u64,
    pub record_trajectory: bool,
    pub event_cap: u64,
}

impl SimConfig {
    pub fn new(lattice: Lattice, kappa: f64, gamma: f64, law: OffspringLaw, horizon: f64, seed: u64) -> Self {
        SimConfig {
            lattice,
            kappa,
            gamma,
            law,
            horizon,
            seed,
            record_trajectory: false,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            problems.push(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            problems.push(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            problems.push(format!("horizon must be finite and non-negative, got {}", self.horizon));
        }
        if self.event_cap == 0 {
            problems.push("event cap must be positive".into());
        }
        if let Err(e) = self.lattice.validate() {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    XiWalk,
    EtaWalk,
    XiBranch,
    EtaBranch,
}

impl EventKind {
    pub fn species(self) -> Species {
        match self {
            EventKind::XiWalk | EventKind::XiBranch => Species::Xi,
            EventKind::EtaWalk | EventKind::EtaBranch => Species::Eta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventDetail {
    /// Destination of a walk step.
    To(Site),
    /// Number of offspring replacing the parent.
    Offspring(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    pub site: Site,
    pub detail: EventDetail,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Event(EventRecord),
    /// Total rate is zero: both populations are empty.
    Quiescent,
    /// The next event would fall after the horizon; the clock was moved
    /// to the horizon and the state left unchanged.
    HorizonReached,
}

/// Advance by one Gillespie event (no horizon).
pub fn step<R: Rng + ?Sized>(state: &mut ParticleState, config: &SimConfig, rng: &mut R) -> StepOutcome {
    step_until(state, config, f64::INFINITY, rng)
}

/// Direct method over four categories: ξ-walk, η-walk, ξ-branch, η-branch
/// with total rates `κΞ`, `κH`, `γS`, `γS` where `S = Σ ξη`.
pub fn step_until<R: Rng + ?Sized>(
    state: &mut ParticleState,
    config: &SimConfig,
    horizon: f64,
    rng: &mut R,
) -> StepOutcome {
    let xi_walk = config.kappa * state.total_xi() as f64;
    let eta_walk = config.kappa * state.total_eta() as f64;
    let interaction = state.interaction_sum();
    let branch = config.gamma * interaction as f64;
    let total = xi_walk + eta_walk + 2.0 * branch;
    if total <= 0.0 {
        return StepOutcome::Quiescent;
    }
    let wait: f64 = Exp1.sample(rng);
    let time = state.clock() + wait / total;
    if time > horizon {
        state.set_clock(horizon);
        return StepOutcome::HorizonReached;
    }
    state.set_clock(time);

    let u = rng.random::<f64>() * total;
    let categories = [
        (EventKind::XiWalk, xi_walk),
        (EventKind::EtaWalk, eta_walk),
        (EventKind::XiBranch, branch),
        (EventKind::EtaBranch, branch),
    ];
    let mut acc = 0.0;
    let mut kind = EventKind::XiWalk;
    for (k, rate) in categories {
        if rate > 0.0 {
            // rounding can push u to the very top; the last live category
            // takes it
            kind = k;
            acc += rate;
            if u < acc {
                break;
            }
        }
    }
    let species = kind.species();
    let dim = state.lattice().dim();
    let record = match kind {
        EventKind::XiWalk | EventKind::EtaWalk => {
            let weight = state.tree(species).total();
            let slot = state.tree(species).find(rng.random_range(0..weight));
            let site = state.site_of(slot);
            let dir = rng.random_range(0..2 * dim);
            let dest = state.move_particle(species, slot, dir);
            EventRecord {
                time,
                kind,
                site,
                detail: EventDetail::To(dest),
            }
        }
        EventKind::XiBranch | EventKind::EtaBranch => {
            // per-site rate γ ξ(x) η(x) for either species
            let slot = state.interaction_tree().find(rng.random_range(0..interaction));
            let site = state.site_of(slot);
            let k = config.law.sample(rng);
            state.branch(species, slot, k);
            EventRecord {
                time,
                kind,
                site,
                detail: EventDetail::Offspring(k),
            }
        }
    };
    StepOutcome::Event(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventCounts {
    pub xi_walks: u64,
    pub eta_walks: u64,
    pub xi_branches: u64,
    pub eta_branches: u64,
}

impl EventCounts {
    pub fn total(&self) -> u64 {
        self.xi_walks + self.eta_walks + self.xi_branches + self.eta_branches
    }

    fn record(&mut self, kind: EventKind) {
        match kind {
            EventKind::XiWalk => self.xi_walks += 1,
            EventKind::EtaWalk => self.eta_walks += 1,
            EventKind::XiBranch => self.xi_branches += 1,
            EventKind::EtaBranch => self.eta_branches += 1,
        }
    }
}

/// Totals `(Ξ_t, H_t)` from time `time` until the next point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassPoint {
    pub time: f64,
    pub total_xi: u64,
    pub total_eta: u64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub initial_time: f64,
    pub final_state: ParticleState,
    /// Every event in order, when `record_trajectory` is set.
    pub events: Option<Vec<EventRecord>>,
    /// Piecewise-constant totals: one point at the start and one after each
    /// branching event.
    pub mass_series: Vec<MassPoint>,
    pub counts: EventCounts,
    /// The run ended because both populations were empty.
    pub quiescent: bool,
    /// The run ended early because the stop condition fired.
    pub stopped_early: bool,
}

impl Trajectory {
    pub fn total_mass_series(&self) -> &[MassPoint] {
        &self.mass_series
    }

    /// `(Ξ_t, H_t)` for `t` in the simulated window.
    pub fn totals_at(&self, t: f64) -> Result<(u64, u64)> {
        if t < self.initial_time || t > self.final_state.clock() {
            return Err(Error::misuse(format!(
                "time {t} outside simulated window [{}, {}]",
                self.initial_time,
                self.final_state.clock()
            )));
        }
        let idx = self.mass_series.partition_point(|p| p.time <= t);
        let p = self.mass_series[idx.saturating_sub(1)];
        Ok((p.total_xi, p.total_eta))
    }
}

/// Simulate until `clock ≥ horizon` or quiescence.
pub fn run(config: &SimConfig, initial: ParticleState) -> Result<Trajectory> {
    run_until(config, initial, |_| false)
}

/// Like [`run`], but also stops right after any event for which `stop`
/// returns true.
pub fn run_until(
    config: &SimConfig,
    initial: ParticleState,
    mut stop: impl FnMut(&ParticleState) -> bool,
) -> Result<Trajectory> {
    config.validate()?;
    if initial.lattice() != &config.lattice {
        return Err(Error::misuse("initial state lives on a different lattice"));
    }
    let mut rng: SimRng = rng_from_seed(config.seed);
    let start = initial.clock();
    let horizon = start + config.horizon;
    let mut traj = Trajectory {
        initial_time: start,
        mass_series: vec![MassPoint {
            time: start,
            total_xi: initial.total_xi(),
            total_eta: initial.total_eta(),
        }],
        final_state: initial,
        events: config.record_trajectory.then(Vec::new),
        counts: EventCounts::default(),
        quiescent: false,
        stopped_early: false,
    };
    if stop(&traj.final_state) {
        traj.stopped_early = true;
        return Ok(traj);
    }
    loop {
        if traj.counts.total() >= config.event_cap {
            return Err(Error::EventCapExceeded {
                cap: config.event_cap,
                partial: Box::new(traj),
            });
        }
        match step_until(&mut traj.final_state, config, horizon, &mut rng) {
            StepOutcome::Event(ev) => {
                traj.counts.record(ev.kind);
                if matches!(ev.kind, EventKind::XiBranch | EventKind::EtaBranch) {
                    traj.mass_series.push(MassPoint {
                        time: ev.time,
                        total_xi: traj.final_state.total_xi(),
                        total_eta: traj.final_state.total_eta(),
                    });
                }
                if let Some(events) = traj.events.as_mut() {
                    events.push(ev);
                }
                if stop(&traj.final_state) {
                    traj.stopped_early = true;
                    return Ok(traj);
                }
            }
            StepOutcome::Quiescent => {
                traj.final_state.set_clock(horizon);
                traj.quiescent = true;
                return Ok(traj);
            }
            StepOutcome::HorizonReached => return Ok(traj),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lattice: Lattice, law: OffspringLaw, horizon: f64, seed: u64) -> SimConfig {
        SimConfig::new(lattice, 1.0, 1.0, law, horizon, seed)
    }

    #[test]
    fn empty_state_is_quiescent() {
        let lat = Lattice::torus(1, 1).unwrap();
        let config = cfg(lat, OffspringLaw::binary_critical(), 10.0, 1);
        let mut state = ParticleState::empty(lat);
        let mut rng = rng_from_seed(0);
        assert_eq!(step(&mut state, &config, &mut rng), StepOutcome::Quiescent);
        let traj = run(&config, ParticleState::empty(lat)).unwrap();
        assert!(traj.quiescent);
        assert_eq!(traj.counts.total(), 0);
    }

    #[test]
    fn lone_population_only_walks() {
        let lat = Lattice::infinite(2).unwrap();
        let mut config = cfg(lat, OffspringLaw::binary_critical(), 200.0, 5);
        config.record_trajectory = true;
        let init = ParticleState::from_counts(lat, &[(Site::origin(2), 1, 0)]).unwrap();
        let traj = run(&config, init).unwrap();
        let events = traj.events.unwrap();
        assert!(!events.is_empty());
        assert!(events.iter().all(|e| e.kind == EventKind::XiWalk));
        assert_eq!(traj.final_state.total_xi(), 1);
        assert_eq!(traj.mass_series.len(), 1);
    }

    #[test]
    fn zero_horizon_returns_initial() {
        let lat = Lattice::torus(1, 2).unwrap();
        let config = cfg(lat, OffspringLaw::binary_critical(), 0.0, 3);
        let init = ParticleState::constant(lat, 2, 1).unwrap();
        let traj = run(&config, init.clone()).unwrap();
        assert_eq!(traj.counts.total(), 0);
        assert_eq!(
            traj.final_state.field(Species::Xi).unwrap(),
            init.field(Species::Xi).unwrap()
        );
        assert_eq!(traj.final_state.clock(), 0.0);
    }

    #[test]
    fn invariants_hold_along_a_run() {
        let lat = Lattice::infinite(1).unwrap();
        let config = cfg(lat, OffspringLaw::new(vec![0.3, 0.5, 0.1, 0.1]).unwrap(), 1.0, 9);
        let mut state = ParticleState::from_counts(lat, &[(Site::new(&[0]), 3, 2), (Site::new(&[1]), 1, 4)]).unwrap();
        let mut rng = rng_from_seed(17);
        for _ in 0..5000 {
            match step(&mut state, &config, &mut rng) {
                StepOutcome::Event(_) => assert!(state.check_invariants()),
                _ => break,
            }
        }
    }

    #[test]
    fn event_cap_aborts_with_partial_trajectory() {
        let lat = Lattice::torus(1, 1).unwrap();
        let mut config = cfg(lat, OffspringLaw::binary_critical(), 1e6, 2);
        config.event_cap = 50;
        let init = ParticleState::constant(lat, 1, 1).unwrap();
        match run(&config, init) {
            Err(Error::EventCapExceeded { cap, partial }) => {
                assert_eq!(cap, 50);
                assert_eq!(partial.counts.total(), 50);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let lat = Lattice::torus(2, 1).unwrap();
        let mut config = cfg(lat, OffspringLaw::binary_critical(), 3.0, 77);
        config.record_trajectory = true;
        let init = ParticleState::constant(lat, 2, 2).unwrap();
        let a = run(&config, init.clone()).unwrap();
        let b = run(&config, init).unwrap();
        assert_eq!(a.events, b.events);
        assert_eq!(a.mass_series, b.mass_series);
    }

    #[test]
    fn totals_at_reads_piecewise_constant_series() {
        let lat = Lattice::torus(1, 1).unwrap();
        let config = cfg(lat, OffspringLaw::binary_critical(), 5.0, 4);
        let init = ParticleState::constant(lat, 2, 2).unwrap();
        let traj = run(&config, init).unwrap();
        assert_eq!(traj.totals_at(0.0).unwrap(), (6, 6));
        let end = traj.totals_at(5.0).unwrap();
        assert_eq!(end, (traj.final_state.total_xi(), traj.final_state.total_eta()));
        assert!(traj.totals_at(5.5).is_err());
    }

    #[test]
    fn rejects_invalid_config() {
        let lat = Lattice::torus(1, 1).unwrap();
        let mut config = cfg(lat, OffspringLaw::binary_critical(), 1.0, 0);
        config.gamma = 0.0;
        config.kappa = -1.0;
        match run(&config, ParticleState::empty(lat)) {
            Err(Error::Config(p)) => assert_eq!(p.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
