//! Exact event-driven simulation of the two-type mutually catalytic
//! branching random walk.
//!
//! Each particle jumps at rate `κ` to a uniformly chosen nearest neighbor.
//! A ξ-particle at `x` branches at rate `γ η(x)` (so the ξ-branch rate of
//! the site is `γ ξ(x) η(x)`), and symmetrically for η. At a branch the
//! parent is replaced in place by `k ~ ν` offspring. The simulator is the
//! Gillespie direct method over the four event categories, with
//! per-category site selection through Fenwick trees of integer weights.

mod coexistence;
mod sim;
mod state;

pub use coexistence::{coexistence_trial, survival_curve, CoexistenceRecord, SurvivalPoint};
pub use sim::{
    run, run_until, step, step_until, EventCounts, EventDetail, EventKind, EventRecord, MassPoint, SimConfig,
    StepOutcome, Trajectory, DEFAULT_EVENT_CAP,
};
pub use state::{ParticleState, Species};
