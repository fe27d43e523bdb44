use serde::Serialize;

use super::sim::{run_until, SimConfig};
use super::state::ParticleState;
use crate::error::{Error, Result};
use crate::stats::SampleStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoexistenceRecord {
    pub xi_alive: bool,
    pub eta_alive: bool,
    /// First time either total reached zero.
    pub extinction_time: Option<f64>,
    pub horizon: f64,
    /// `(Ξ, H)` when the trial stopped.
    pub final_totals: (u64, u64),
}

impl CoexistenceRecord {
    /// Both populations alive at time `t ≤ horizon`. Extinction is
    /// absorbing, so this is read off the first extinction time.
    pub fn both_alive_at(&self, t: f64) -> bool {
        debug_assert!(t <= self.horizon);
        self.extinction_time.is_none_or(|tau| tau > t)
    }
}

/// Run one replicate on `Z^d` until `horizon` or until one population dies.
pub fn coexistence_trial(config: &SimConfig, initial: ParticleState, horizon: f64) -> Result<CoexistenceRecord> {
    if config.lattice.is_torus() {
        return Err(Error::misuse("coexistence trials run on Z^d"));
    }
    let mut cfg = config.clone();
    cfg.horizon = horizon;
    cfg.record_trajectory = false;
    let traj = run_until(&cfg, initial, |s| s.total_xi() == 0 || s.total_eta() == 0)?;
    let state = &traj.final_state;
    let xi_alive = state.total_xi() > 0;
    let eta_alive = state.total_eta() > 0;
    let extinction_time = (!(xi_alive && eta_alive)).then(|| state.clock());
    Ok(CoexistenceRecord {
        xi_alive,
        eta_alive,
        extinction_time,
        horizon,
        final_totals: (state.total_xi(), state.total_eta()),
    })
}

/// Estimated probability that both populations are alive, per horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalPoint {
    pub horizon: f64,
    pub replicates: u64,
    pub both_alive: u64,
    pub estimate: f64,
    pub stderr: f64,
}

pub fn survival_curve(records: &[CoexistenceRecord], horizons: &[f64]) -> Vec<SurvivalPoint> {
    horizons
        .iter()
        .map(|&h| {
            let stats: SampleStats = records
                .iter()
                .map(|r| if r.both_alive_at(h) { 1.0 } else { 0.0 })
                .collect();
            SurvivalPoint {
                horizon: h,
                replicates: stats.count(),
                both_alive: records.iter().filter(|r| r.both_alive_at(h)).count() as u64,
                estimate: stats.mean(),
                stderr: stats.stderr(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Lattice, Site};
    use crate::offspring::OffspringLaw;

    #[test]
    fn empty_start_is_dead_at_zero() {
        let lat = Lattice::infinite(1).unwrap();
        let cfg = SimConfig::new(lat, 1.0, 1.0, OffspringLaw::binary_critical(), 10.0, 1);
        let r = coexistence_trial(&cfg, ParticleState::empty(lat), 10.0).unwrap();
        assert!(!r.xi_alive && !r.eta_alive);
        assert_eq!(r.extinction_time, Some(0.0));
        assert!(!r.both_alive_at(0.0));
    }

    #[test]
    fn one_extinction_ends_the_trial() {
        let lat = Lattice::infinite(1).unwrap();
        let cfg = SimConfig::new(lat, 1.0, 5.0, OffspringLaw::binary_critical(), 1e4, 1);
        let o = Site::origin(1);
        for seed in 0..20 {
            let mut c = cfg.clone();
            c.seed = seed;
            let init = ParticleState::from_counts(lat, &[(o, 1, 1)]).unwrap();
            let r = coexistence_trial(&c, init, 1e4).unwrap();
            // in d = 1 with strong branching one type dies quickly
            if let Some(t) = r.extinction_time {
                assert!(t < 1e4);
                assert!(r.xi_alive ^ r.eta_alive, "both cannot die at once");
            }
        }
    }

    #[test]
    fn survival_curve_is_monotone() {
        let recs = vec![
            CoexistenceRecord {
                xi_alive: true,
                eta_alive: true,
                extinction_time: None,
                horizon: 10.0,
                final_totals: (0, 0),
            },
            CoexistenceRecord {
                xi_alive: false,
                eta_alive: true,
                extinction_time: Some(3.0),
                horizon: 10.0,
                final_totals: (0, 0),
            },
            CoexistenceRecord {
                xi_alive: true,
                eta_alive: false,
                extinction_time: Some(7.0),
                horizon: 10.0,
                final_totals: (0, 0),
            },
        ];
        let curve = survival_curve(&recs, &[1.0, 5.0, 10.0]);
        let alive: Vec<u64> = curve.iter().map(|p| p.both_alive).collect();
        assert_eq!(alive, vec![3, 2, 1]);
        assert!((curve[2].estimate - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn torus_is_rejected() {
        let lat = Lattice::torus(1, 1).unwrap();
        let cfg = SimConfig::new(lat, 1.0, 1.0, OffspringLaw::binary_critical(), 1.0, 1);
        assert!(coexistence_trial(&cfg, ParticleState::empty(lat), 1.0).is_err());
    }
}
